//! Color images as three-channel vector densities on a pixel grid, and
//! rendering of interpolated frames.
//!
//! Pixel `(x, y)` maps to node `y * width + x`; channels are R, G, B.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageFormat, ImageReader, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{complete_graph, grid_graph, Graph, LayeredGraph};
use crate::mass::{DensityTable, VectorMass};
use crate::solver::SolverConfig;
use crate::transport::{assemble, solve, DistanceReport, Geometry, Residuals, Trajectory, TransportProblem, Variant};

/// Relative floor applied to dark pixels before normalization.
pub const IMAGE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ImageDensity {
    pub width: usize,
    pub height: usize,
    /// Jointly normalized RGB mass.
    pub mass: VectorMass,
    /// Sum of floored intensities in `[0, 1]` units before normalization.
    pub original_total: f64,
    /// Absolute floor that was applied, `IMAGE_FLOOR * max intensity`.
    pub floor: f64,
}

impl ImageDensity {
    /// Builds a density from interleaved 8-bit RGB samples.
    pub fn from_rgb8(width: usize, height: usize, data: &[u8]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyShape);
        }
        if data.len() != 3 * width * height {
            return Err(Error::DimensionMismatch {
                expected: 3 * width * height,
                got: data.len(),
            });
        }
        let max = data.iter().copied().max().unwrap_or(0);
        if max == 0 {
            return Err(Error::ZeroImage);
        }
        let floor = IMAGE_FLOOR * max as f64 / 255.0;
        let n = width * height;
        let mut values = vec![0.0; 3 * n];
        for (p, px) in data.chunks(3).enumerate() {
            for c in 0..3 {
                values[c * n + p] = (px[c] as f64 / 255.0).max(floor);
            }
        }
        let total: f64 = values.iter().sum();
        values.iter_mut().for_each(|v| *v /= total);
        Ok(ImageDensity {
            width,
            height,
            mass: VectorMass::new(3, values)?,
            original_total: total,
            floor,
        })
    }

    pub fn from_image(img: &RgbImage) -> Result<Self> {
        Self::from_rgb8(img.width() as usize, img.height() as usize, img.as_raw())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Reads an 8-bit RGB PNG.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageDensity> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    if reader.format() != Some(ImageFormat::Png) {
        return Err(Error::UnsupportedFormat(format!(
            "{} is not a PNG file",
            path.display()
        )));
    }
    let img = reader.decode()?;
    match img {
        image::DynamicImage::ImageRgb8(rgb) => ImageDensity::from_image(&rgb),
        other => Err(Error::UnsupportedFormat(format!(
            "{} has pixel layout {:?}, expected 8-bit RGB",
            path.display(),
            other.color()
        ))),
    }
}

pub fn save_png(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    img.save_with_format(path, ImageFormat::Png)?;
    Ok(())
}

/// Two synthetic images with one Gaussian blob each, of different colors
/// and centers.
#[derive(Debug, Clone)]
pub struct GaussianFixture {
    pub start: RgbImage,
    pub end: RgbImage,
    /// Blob centers in pixel coordinates.
    pub centers: [(f64, f64); 2],
    /// Expected normalized channel totals of the loaded start and end images.
    pub channel_totals: [[f64; 3]; 2],
}

/// Orange blob in the upper-left quadrant to a blue blob in the lower-right,
/// width `0.12 * side`.
pub fn two_gaussian_fixture(side: usize) -> GaussianFixture {
    let s = side as f64;
    let sigma = 0.12 * s;
    let centers = [(0.3 * s, 0.3 * s), (0.7 * s, 0.7 * s)];
    let colors = [[1.0, 0.45, 0.1], [0.1, 0.35, 1.0]];
    let mut images = Vec::new();
    let mut totals = [[0.0; 3]; 2];
    for (k, (&(cx, cy), color)) in centers.iter().zip(&colors).enumerate() {
        let mut img = RgbImage::new(side as u32, side as u32);
        let mut max = 0u8;
        for (x, y, px) in img.enumerate_pixels_mut() {
            let dx = x as f64 + 0.5 - cx;
            let dy = y as f64 + 0.5 - cy;
            let g = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
            for c in 0..3 {
                px.0[c] = (255.0 * color[c] * g).round() as u8;
                max = max.max(px.0[c]);
            }
        }
        let floor = IMAGE_FLOOR * max as f64 / 255.0;
        let mut sums = [0.0; 3];
        for px in img.pixels() {
            for c in 0..3 {
                sums[c] += (px.0[c] as f64 / 255.0).max(floor);
            }
        }
        let total: f64 = sums.iter().sum();
        for c in 0..3 {
            totals[k][c] = sums[c] / total;
        }
        images.push(img);
    }
    let end = images.pop().unwrap();
    let start = images.pop().unwrap();
    GaussianFixture {
        start,
        end,
        centers,
        channel_totals: totals,
    }
}

/// Intensity-weighted centroid `(x, y)` over all channels of a composite
/// density, in pixel-center coordinates.
pub fn centroid(values: &[f64], width: usize, height: usize) -> (f64, f64) {
    let n = width * height;
    let (mut sx, mut sy, mut total) = (0.0, 0.0, 0.0);
    for chunk in values.chunks(n) {
        for (p, v) in chunk.iter().enumerate() {
            sx += v * ((p % width) as f64 + 0.5);
            sy += v * ((p / width) as f64 + 0.5);
            total += v;
        }
    }
    (sx / total, sy / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    /// One factor for all frames, mapping the largest entry to 255.
    GlobalMax,
    /// Undo the joint normalization, interpolating the two original totals.
    Original,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub width: usize,
    pub height: usize,
    pub start_total: f64,
    pub end_total: f64,
}

impl ImageMeta {
    pub fn from_pair(a: &ImageDensity, b: &ImageDensity) -> Self {
        ImageMeta {
            width: a.width,
            height: a.height,
            start_total: a.original_total,
            end_total: b.original_total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub variant: Variant,
    pub gamma: Option<f64>,
    pub n_t: usize,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residuals: Residuals,
}

impl RunSummary {
    pub fn new(problem: &TransportProblem, report: &DistanceReport) -> Self {
        RunSummary {
            variant: problem.variant,
            gamma: problem.gamma,
            n_t: problem.n_t,
            value: report.value,
            converged: report.converged,
            iterations: report.iterations,
            residuals: report.residuals.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub t: f64,
    pub csv: String,
    pub png: Option<String>,
    /// Joint mass of the frame.
    pub mass: f64,
    pub channel_masses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameManifest {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub scaling: Scaling,
    /// Factor from density to 8-bit level under `GlobalMax`.
    pub global_factor: Option<f64>,
    pub frames: Vec<FrameRecord>,
    pub run: Option<RunSummary>,
}

/// File stem for a frame at time `t`, e.g. `frame_t0.100`.
pub fn frame_stem(t: f64) -> String {
    format!("frame_t{t:.3}")
}

fn to_rgb(values: &[f64], meta: &ImageMeta, factor: f64) -> RgbImage {
    let n = meta.width * meta.height;
    let mut img = RgbImage::new(meta.width as u32, meta.height as u32);
    for (p, px) in img.pixels_mut().enumerate() {
        for c in 0..3 {
            px.0[c] = (values[c * n + p] * factor).round().clamp(0.0, 255.0) as u8;
        }
    }
    img
}

/// Renders a composite RGB density with an explicit density-to-level factor.
pub fn render_density(values: &[f64], meta: &ImageMeta, factor: f64) -> RgbImage {
    to_rgb(values, meta, factor)
}

/// Writes one CSV per requested time (and a PNG when the trajectory has
/// three channels) plus `manifest.json`.
pub fn render_frames(
    traj: &Trajectory,
    meta: &ImageMeta,
    times: &[f64],
    out_dir: impl AsRef<Path>,
    scaling: Scaling,
    run: Option<RunSummary>,
) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    if let Some(t) = times.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::InvalidParameter(format!("frame time {t} outside [0, 1]")));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let frames: Vec<Vec<f64>> = times.iter().map(|&t| traj.density_at(t)).collect();
    let png = traj.channels == 3 && traj.densities[0].len() == 3 * meta.width * meta.height;
    let global_factor = match scaling {
        Scaling::GlobalMax => {
            let max = frames.iter().flatten().fold(0.0f64, |a, v| a.max(*v));
            Some(if max > 0.0 { 255.0 / max } else { 0.0 })
        }
        Scaling::Original => None,
    };
    let mut written = Vec::new();
    let mut records = Vec::new();
    for (&t, values) in times.iter().zip(&frames) {
        let stem = frame_stem(t);
        let clipped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
        let csv = format!("{stem}.csv");
        let table = DensityTable::from_composite(traj.channels, &clipped);
        let path = dir.join(&csv);
        table.write(&path)?;
        written.push(path);
        let png_name = if png {
            let factor = global_factor.unwrap_or(255.0 * ((1.0 - t) * meta.start_total + t * meta.end_total));
            let name = format!("{stem}.png");
            let path = dir.join(&name);
            save_png(&to_rgb(&clipped, meta, factor), &path)?;
            written.push(path);
            Some(name)
        } else {
            None
        };
        let nodes = values.len() / traj.channels;
        records.push(FrameRecord {
            t,
            csv,
            png: png_name,
            mass: values.iter().sum(),
            channel_masses: values.chunks(nodes).map(|c| c.iter().sum()).collect(),
        });
    }
    let manifest = FrameManifest {
        width: meta.width,
        height: meta.height,
        channels: traj.channels,
        scaling,
        global_factor,
        frames: records,
        run,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

/// `n` evenly spaced interior times `1/(n+1), ..., n/(n+1)`.
pub fn interior_times(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / (n + 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub variant: Variant,
    pub gamma: f64,
    pub n_t: usize,
    /// Grid spacing; `None` uses `1 / max(width, height)`.
    pub h: Option<f64>,
    pub solver: SolverConfig,
    pub inputs: Vec<PathBuf>,
    pub output_dir: PathBuf,
    pub frame_times: Vec<f64>,
    pub scaling: Scaling,
}

impl RunConfig {
    pub fn new(gamma: f64, n_t: usize, frames: usize) -> Self {
        RunConfig {
            variant: Variant::SymmetricLayered,
            gamma,
            n_t,
            h: None,
            solver: SolverConfig::default(),
            inputs: Vec::new(),
            output_dir: PathBuf::from("."),
            frame_times: interior_times(frames),
            scaling: Scaling::GlobalMax,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::BadGamma(self.gamma));
        }
        if self.n_t < 2 {
            return Err(Error::BadTimeGrid(self.n_t));
        }
        if !self.variant.is_layered() {
            return Err(Error::InvalidParameter("image runs need a layered variant".into()));
        }
        if let Some(t) = self.frame_times.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::InvalidParameter(format!("frame time {t} outside [0, 1]")));
        }
        if let Some(h) = self.h {
            if !(h > 0.0) {
                return Err(Error::InvalidParameter(format!("grid spacing {h} must be positive")));
            }
        }
        self.solver.validate()
    }
}

/// Default mutation graph for RGB: the complete graph on three channels.
pub fn rgb_mutation_graph() -> Graph {
    complete_graph(3, 1.0).expect("K3 is a valid graph")
}

/// Solves the layered transport problem between two images of equal size.
pub fn interpolate_images(
    a: &ImageDensity,
    b: &ImageDensity,
    mutation: &Graph,
    cfg: &RunConfig,
) -> Result<(TransportProblem, DistanceReport, Trajectory)> {
    cfg.validate()?;
    if (a.width, a.height) != (b.width, b.height) {
        return Err(Error::DimensionMismatch {
            expected: a.pixel_count(),
            got: b.pixel_count(),
        });
    }
    if mutation.node_count() != 3 {
        return Err(Error::ChannelCountMismatch {
            expected: 3,
            got: mutation.node_count(),
        });
    }
    let h = cfg.h.unwrap_or(1.0 / a.width.max(a.height) as f64);
    let spatial = grid_graph(&[a.height, a.width], h)?;
    let layered = LayeredGraph::new(spatial, mutation.clone(), 3)?;
    let problem = assemble(
        cfg.variant,
        &Geometry::Layered(layered),
        a.mass.values(),
        b.mass.values(),
        cfg.gamma,
        cfg.n_t,
    )?;
    let (report, traj) = solve(&problem, &cfg.solver)?;
    Ok((problem, report, traj))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn red_and_blue_pixels() {
        let d = ImageDensity::from_rgb8(2, 1, &[255, 0, 0, 0, 0, 255]).unwrap();
        let v = d.mass.values();
        // layout: R(p0), R(p1), G(p0), G(p1), B(p0), B(p1)
        assert!((v[0] - 0.5).abs() < 1e-5 && (v[5] - 0.5).abs() < 1e-5);
        assert!(v[1] < 1e-5 && v[2] < 1e-5);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(d.floor, 1e-6);
    }

    #[test]
    fn black_image_is_rejected() {
        assert!(matches!(ImageDensity::from_rgb8(2, 2, &[0; 12]), Err(Error::ZeroImage)));
    }

    #[test]
    fn fixture_totals_match_loader() {
        let fx = two_gaussian_fixture(64);
        for (img, totals) in [(&fx.start, fx.channel_totals[0]), (&fx.end, fx.channel_totals[1])] {
            let d = ImageDensity::from_image(img).unwrap();
            for (c, want) in totals.iter().enumerate() {
                assert!((d.mass.channel_mass(c) - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn frame_names() {
        assert_eq!(frame_stem(0.1), "frame_t0.100");
        let t = interior_times(9);
        assert_eq!(t.len(), 9);
        assert!((t[0] - 0.1).abs() < 1e-15 && (t[8] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn centroid_of_single_pixel() {
        let mut v = vec![0.0; 3 * 4];
        v[4 + 3] = 1.0;
        assert_eq!(centroid(&v, 2, 2), (1.5, 1.5));
    }
}
