//! Interpolates between two synthetic color images: a red blob in one
//! corner and a blue blob in the other. Frames are written as PNG and CSV
//! with a JSON manifest.
//!
//! ```bash
//! cargo run --release --example image_interpolation [output-dir]
//! ```

use vomt::imaging::{
    centroid, interpolate_images, render_frames, rgb_mutation_graph, save_png, two_gaussian_fixture, ImageDensity,
    ImageMeta, RunConfig, Scaling,
};

fn main() -> vomt::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| {
        std::env::temp_dir()
            .join("vomt-image-interpolation")
            .display()
            .to_string()
    });
    let side = 12;
    let fx = two_gaussian_fixture(side);

    let a = ImageDensity::from_image(&fx.start)?;
    let b = ImageDensity::from_image(&fx.end)?;
    let mut cfg = RunConfig::new(1e-3, 8, 5);
    cfg.solver.objective_tol = 1e-5;
    cfg.solver.max_iters = 4000;
    let (_, report, traj) = interpolate_images(&a, &b, &rgb_mutation_graph(), &cfg)?;
    println!(
        "distance {:.5}, converged {} after {} iterations ({:.1}s)",
        report.value, report.converged, report.iterations, report.wall_time_s
    );

    for &t in &cfg.frame_times {
        let (x, y) = centroid(&traj.density_at(t), side, side);
        println!("  t = {t:.3}: centroid ({x:.2}, {y:.2})");
    }
    let files = render_frames(
        &traj,
        &ImageMeta::from_pair(&a, &b),
        &cfg.frame_times,
        &dir,
        Scaling::Original,
        None,
    )?;
    save_png(&fx.start, format!("{dir}/start.png"))?;
    save_png(&fx.end, format!("{dir}/end.png"))?;
    println!("wrote {} files to {dir}", files.len() + 2);
    Ok(())
}
