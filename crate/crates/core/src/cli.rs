//! Command-line front end. `cli_main` parses arguments, runs one job and maps
//! the outcome to an exit code: 0 on success, 2 for bad input, 3 when a
//! solver stopped without meeting its tolerances (results are still written).

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::entropy::{integrate, states_to_csv};
use crate::error::{Error, Result};
use crate::fixtures::{layered_line, shifted_bump, swapped_bumps};
use crate::graph::{complete_graph, grid_graph, path_graph, Graph, LayeredGraph};
use crate::imaging::{
    interior_times, interpolate_images, load_image, render_frames, rgb_mutation_graph, ImageMeta, RunConfig,
    RunSummary, Scaling,
};
use crate::mass::{mix_with_uniform, DensityTable, VectorMass};
use crate::solver::SolverConfig;
use crate::transport::{assemble, export_trajectory, solve, DistanceReport, Geometry, Variant};
use crate::w1::{default_costs, w1_action, w1_graph};

pub const EXIT_OK: i32 = 0;
pub const EXIT_BAD_INPUT: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "vomt",
    version,
    about = "Dynamic optimal transport on graphs and vector-valued densities"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Feasibility tolerance of the transport solver.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub tol: f64,
    /// Relative objective change tolerance over the monitoring window.
    #[arg(long, global = true, default_value_t = 1e-7)]
    pub objective_tol: f64,
    #[arg(long, global = true, default_value_t = 50_000)]
    pub max_iters: usize,
    /// Seed for the operator-norm estimate.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for element-wise solver steps (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, global = true, default_value = ".")]
    pub output_dir: PathBuf,
    /// Mix transport marginals with the uniform density, `(1 - eps) rho + eps / n`.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "1e-9", value_name = "EPS")]
    pub mix: Option<f64>,
}

impl GlobalOpts {
    fn marginal(&self, values: &[f64]) -> Result<Vec<f64>> {
        match self.mix {
            Some(eps) => mix_with_uniform(values, eps),
            None => Ok(values.to_vec()),
        }
    }
}

impl GlobalOpts {
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            max_iters: self.max_iters,
            feasibility_tol: self.tol,
            objective_tol: self.objective_tol,
            seed: self.seed,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphVariant {
    W2a,
    W2aHat,
    /// `max(W(mu, nu), W(nu, mu))` of the asymmetric distance.
    W2aMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VectorFixture {
    /// Two equal-mass bumps that trade places.
    SwappedBumps,
    /// One bump moves, the other stays.
    ShiftedBump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScalingArg {
    GlobalMax,
    Original,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transport distance between two scalar densities on a graph.
    DistGraph {
        graph: PathBuf,
        mu: PathBuf,
        nu: PathBuf,
        #[arg(long, value_enum, default_value = "w2a-hat")]
        variant: GraphVariant,
        #[arg(long, default_value_t = 32)]
        nt: usize,
        /// Also write the density slices and a manifest to the output directory.
        #[arg(long)]
        trajectory: bool,
    },
    /// Graph W1 distance by min-cost flow.
    W1 {
        graph: PathBuf,
        mu: PathBuf,
        nu: PathBuf,
        /// Report the dual certificate and fail when it does not close the gap.
        #[arg(long)]
        dual_check: bool,
        /// Also solve the dynamic (action) form and compare.
        #[arg(long)]
        action_check: bool,
        #[arg(long, default_value_t = 16)]
        nt: usize,
    },
    /// Vector-valued interpolation on a 1-D or grid domain.
    InterpVector {
        /// Start density CSV (`channels=M` header); omit to use --fixture.
        mu: Option<PathBuf>,
        nu: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 16)]
        nt: usize,
        #[arg(long, default_value_t = 9)]
        frames: usize,
        #[arg(long, value_enum, default_value = "swapped-bumps")]
        fixture: VectorFixture,
        /// Cells of the fixture line.
        #[arg(long, default_value_t = 32)]
        cells: usize,
        /// Grid shape for CSV input, e.g. `32` or `16x16`.
        #[arg(long, conflicts_with = "graph")]
        shape: Option<String>,
        /// Spatial graph TSV for CSV input.
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Grid spacing; defaults to one over the longest axis.
        #[arg(long)]
        h: Option<f64>,
        #[arg(long, default_value = "w2b-hat")]
        variant: String,
    },
    /// Color image interpolation.
    InterpImage {
        start: PathBuf,
        end: PathBuf,
        #[arg(long, default_value_t = 0.001)]
        gamma: f64,
        #[arg(long, default_value_t = 16)]
        nt: usize,
        #[arg(long, default_value_t = 9)]
        frames: usize,
        /// `complete`, `path`, or a TSV file over the three channels.
        #[arg(long, default_value = "complete")]
        mutation_graph: String,
        #[arg(long, value_enum, default_value = "global-max")]
        scaling: ScalingArg,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long, default_value = "w2b-hat")]
        variant: String,
    },
    /// Entropy gradient flow from a positive density.
    EntropyFlow {
        graph: PathBuf,
        rho: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
    },
}

/// Outcome of a job: whether every solve met its tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Converged,
    NotConverged,
}

impl Outcome {
    fn from_flag(converged: bool) -> Self {
        if converged {
            Outcome::Converged
        } else {
            Outcome::NotConverged
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::MaxIterationsExceeded { .. } | Error::CgStall { .. } | Error::StepUnderflow(_) => EXIT_NOT_CONVERGED,
        _ => EXIT_BAD_INPUT,
    }
}

/// Parses `argv` (including the program name), runs the job and returns the
/// process exit code. Diagnostics go to standard error.
pub fn cli_main(argv: Vec<OsString>) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_BAD_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = if cli.global.threads > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(cli.global.threads).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => Err(Error::InvalidParameter(format!("thread pool: {e}"))),
        }
    } else {
        run(&cli)
    };
    match result {
        Ok(Outcome::Converged) => EXIT_OK,
        Ok(Outcome::NotConverged) => {
            eprintln!("vomt: solver did not meet its tolerances; results were written and flagged");
            EXIT_NOT_CONVERGED
        }
        Err(e) => {
            eprintln!("vomt: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<Outcome> {
    let g = &cli.global;
    let cfg = g.solver_config();
    cfg.validate()?;
    match &cli.command {
        Command::DistGraph {
            graph,
            mu,
            nu,
            variant,
            nt,
            trajectory,
        } => dist_graph(g, &cfg, graph, mu, nu, *variant, *nt, *trajectory),
        Command::W1 {
            graph,
            mu,
            nu,
            dual_check,
            action_check,
            nt,
        } => w1(g, &cfg, graph, mu, nu, *dual_check, *action_check, *nt),
        Command::InterpVector {
            mu,
            nu,
            gamma,
            nt,
            frames,
            fixture,
            cells,
            shape,
            graph,
            h,
            variant,
        } => {
            let variant: Variant = variant.parse()?;
            let (layered, mu, nu) = match (mu, nu) {
                (Some(a), Some(b)) => {
                    let mu = DensityTable::read(a)?.to_vector()?;
                    let nu = DensityTable::read(b)?.to_vector()?;
                    let spatial = match (shape, graph) {
                        (_, Some(path)) => Graph::read_tsv(path)?,
                        (Some(s), None) => {
                            let dims = parse_shape(s)?;
                            let spacing = h.unwrap_or(1.0 / *dims.iter().max().unwrap() as f64);
                            grid_graph(&dims, spacing)?
                        }
                        (None, None) => {
                            let n = mu.nodes();
                            grid_graph(&[n], h.unwrap_or(1.0 / n as f64))?
                        }
                    };
                    let layered = LayeredGraph::new(spatial, complete_graph(mu.channels(), 1.0)?, mu.channels())?;
                    (layered, mu, nu)
                }
                (None, None) => {
                    let (mu, nu) = match fixture {
                        VectorFixture::SwappedBumps => swapped_bumps(*cells)?,
                        VectorFixture::ShiftedBump => shifted_bump(*cells)?,
                    };
                    let layered = match h {
                        Some(h) => LayeredGraph::with_complete_mutation(grid_graph(&[*cells], *h)?, 2)?,
                        None => layered_line(*cells, 2)?,
                    };
                    (layered, mu, nu)
                }
                _ => return Err(Error::InvalidParameter("give both densities or neither".into())),
            };
            let mu = VectorMass::new(mu.channels(), g.marginal(mu.values())?)?;
            let nu = VectorMass::new(nu.channels(), g.marginal(nu.values())?)?;
            interp_vector(g, &cfg, variant, &layered, &mu, &nu, *gamma, *nt, *frames)
        }
        Command::InterpImage {
            start,
            end,
            gamma,
            nt,
            frames,
            mutation_graph,
            scaling,
            h,
            variant,
        } => {
            let mut run_cfg = RunConfig::new(*gamma, *nt, *frames);
            run_cfg.variant = variant.parse()?;
            run_cfg.h = *h;
            run_cfg.solver = cfg.clone();
            run_cfg.inputs = vec![start.clone(), end.clone()];
            run_cfg.output_dir = g.output_dir.clone();
            run_cfg.scaling = match scaling {
                ScalingArg::GlobalMax => Scaling::GlobalMax,
                ScalingArg::Original => Scaling::Original,
            };
            let mutation = match mutation_graph.as_str() {
                "complete" => rgb_mutation_graph(),
                "path" => path_graph(3, 1.0)?,
                file => Graph::read_tsv(file)?,
            };
            interp_image(&run_cfg, &mutation)
        }
        Command::EntropyFlow { graph, rho, h, steps } => {
            let g_ = Graph::read_tsv(graph)?;
            let rho = DensityTable::read(rho)?.to_scalar()?;
            let states = integrate(&g_, rho.values(), *h, *steps)?;
            let path = write_file(&g.output_dir, "entropy_flow.csv", &states_to_csv(&states))?;
            let last = states.last().expect("integration returns the initial state");
            print_json(&json!({
                "t": last.t,
                "rho": last.rho,
                "entropy": last.entropy,
                "steps": steps,
                "csv": path,
            }))?;
            Ok(Outcome::Converged)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn dist_graph(
    g: &GlobalOpts,
    cfg: &SolverConfig,
    graph: &Path,
    mu: &Path,
    nu: &Path,
    variant: GraphVariant,
    nt: usize,
    trajectory: bool,
) -> Result<Outcome> {
    let graph = Graph::read_tsv(graph)?;
    let mu = g.marginal(DensityTable::read(mu)?.to_scalar()?.values())?;
    let nu = g.marginal(DensityTable::read(nu)?.to_scalar()?.values())?;
    let geom = Geometry::Graph(graph);
    let run = |v: Variant, a: &[f64], b: &[f64], export: bool| -> Result<DistanceReport> {
        let problem = assemble(v, &geom, a, b, 1.0, nt)?;
        let (report, traj) = solve(&problem, cfg)?;
        if export {
            export_trajectory(&traj, &problem, &report, &g.output_dir)?;
        }
        Ok(report)
    };
    match variant {
        GraphVariant::W2a | GraphVariant::W2aHat => {
            let v = if variant == GraphVariant::W2a {
                Variant::AsymmetricGraph
            } else {
                Variant::SymmetricGraph
            };
            let report = run(v, &mu, &nu, trajectory)?;
            print_json(&report)?;
            Ok(Outcome::from_flag(report.converged))
        }
        GraphVariant::W2aMax => {
            let forward = run(Variant::AsymmetricGraph, &mu, &nu, trajectory)?;
            let backward = run(Variant::AsymmetricGraph, &nu, &mu, false)?;
            print_json(&json!({
                "value": forward.value.max(backward.value),
                "converged": forward.converged && backward.converged,
                "forward": forward,
                "backward": backward,
            }))?;
            Ok(Outcome::from_flag(forward.converged && backward.converged))
        }
    }
}

/// Absolute gap allowed between the primal and dual W1 values.
const W1_GAP_TOL: f64 = 1e-8;

#[allow(clippy::too_many_arguments)]
fn w1(
    g: &GlobalOpts,
    cfg: &SolverConfig,
    graph: &Path,
    mu: &Path,
    nu: &Path,
    dual_check: bool,
    action_check: bool,
    nt: usize,
) -> Result<Outcome> {
    let graph = Graph::read_tsv(graph)?;
    let mu = DensityTable::read(mu)?.to_scalar()?;
    let nu = DensityTable::read(nu)?.to_scalar()?;
    let costs = default_costs(&graph);
    let res = w1_graph(&graph, &costs, mu.values(), nu.values())?;
    let mut out = json!({
        "value": res.value,
        "flow": res.flow,
        "residual": res.residual,
    });
    let mut outcome = Outcome::Converged;
    if dual_check {
        out["potentials"] = json!(res.potentials);
        out["dual_value"] = json!(res.dual_value);
        out["gap"] = json!(res.gap);
        out["dual_infeasibility"] = json!(res.dual_infeasibility);
        if res.gap.abs() > W1_GAP_TOL || res.dual_infeasibility > W1_GAP_TOL {
            outcome = Outcome::NotConverged;
        }
    }
    if action_check {
        let action = w1_action(&graph, &costs, mu.values(), nu.values(), nt, cfg)?;
        out["action_value"] = json!(action.value);
        out["action_converged"] = json!(action.converged);
        out["action_difference"] = json!((action.value - res.value).abs());
        if !action.converged {
            outcome = Outcome::NotConverged;
        }
    }
    write_file(&g.output_dir, "w1.json", &serde_json::to_string_pretty(&out)?)?;
    print_json(&out)?;
    Ok(outcome)
}

#[derive(Serialize)]
struct VectorRun<'a> {
    run: RunSummary,
    mutation_flux: f64,
    channel_mass_change: Vec<f64>,
    files: &'a [PathBuf],
}

#[allow(clippy::too_many_arguments)]
fn interp_vector(
    g: &GlobalOpts,
    cfg: &SolverConfig,
    variant: Variant,
    layered: &LayeredGraph,
    mu: &VectorMass,
    nu: &VectorMass,
    gamma: f64,
    nt: usize,
    frames: usize,
) -> Result<Outcome> {
    if !variant.is_layered() {
        return Err(Error::InvalidParameter("interp-vector needs a layered variant".into()));
    }
    let problem = assemble(
        variant,
        &Geometry::Layered(layered.clone()),
        mu.values(),
        nu.values(),
        gamma,
        nt,
    )?;
    let (report, traj) = solve(&problem, cfg)?;
    let meta = ImageMeta {
        width: layered.spatial_nodes(),
        height: 1,
        start_total: 1.0,
        end_total: 1.0,
    };
    let run = RunSummary::new(&problem, &report);
    let files = render_frames(
        &traj,
        &meta,
        &interior_times(frames),
        &g.output_dir,
        Scaling::GlobalMax,
        Some(run.clone()),
    )?;
    let start = traj.channel_masses(0);
    let change = (0..=nt)
        .map(|k| traj.channel_masses(k))
        .fold(vec![0.0f64; start.len()], |acc, m| {
            acc.iter()
                .zip(m.iter().zip(&start))
                .map(|(a, (x, s))| a.max((x - s).abs()))
                .collect()
        });
    print_json(&VectorRun {
        run,
        mutation_flux: traj.mutation_flux_mass(&problem),
        channel_mass_change: change,
        files: &files,
    })?;
    Ok(Outcome::from_flag(report.converged))
}

fn interp_image(cfg: &RunConfig, mutation: &Graph) -> Result<Outcome> {
    let a = load_image(&cfg.inputs[0])?;
    let b = load_image(&cfg.inputs[1])?;
    let (problem, report, traj) = interpolate_images(&a, &b, mutation, cfg)?;
    let run = RunSummary::new(&problem, &report);
    let files = render_frames(
        &traj,
        &ImageMeta::from_pair(&a, &b),
        &cfg.frame_times,
        &cfg.output_dir,
        cfg.scaling,
        Some(run.clone()),
    )?;
    print_json(&json!({ "run": run, "files": files }))?;
    Ok(Outcome::from_flag(report.converged))
}

/// Parses `32`, `16x16` or `4x4x4`.
pub fn parse_shape(s: &str) -> Result<Vec<usize>> {
    s.split('x')
        .map(|d| {
            d.trim()
                .parse::<usize>()
                .map_err(|e| Error::InvalidParameter(format!("bad shape {s:?}: {e}")))
        })
        .collect()
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    let mut out = std::io::stdout().lock();
    // a closed pipe (e.g. `| head`) is not an error for the job itself
    match writeln!(out, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
        _ => Ok(()),
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> Vec<OsString> {
        list.iter().map(OsString::from).collect()
    }

    #[test]
    fn shapes() {
        assert_eq!(parse_shape("16x8").unwrap(), vec![16, 8]);
        assert_eq!(parse_shape("32").unwrap(), vec![32]);
        assert!(parse_shape("4xa").is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(cli_main(args(&["vomt", "no-such-command"])), EXIT_BAD_INPUT);
        assert_eq!(
            cli_main(args(&["vomt", "dist-graph", "a", "b", "c", "--variant", "w9"])),
            EXIT_BAD_INPUT
        );
        assert_eq!(cli_main(args(&["vomt", "--help"])), EXIT_OK);
    }

    #[test]
    fn missing_files_exit_2() {
        assert_eq!(
            cli_main(args(&["vomt", "w1", "/nonexistent/g.tsv", "m.csv", "n.csv"])),
            EXIT_BAD_INPUT
        );
    }

    #[test]
    fn codes_for_errors() {
        assert_eq!(
            exit_code(&Error::MaxIterationsExceeded { iterations: 3 }),
            EXIT_NOT_CONVERGED
        );
        assert_eq!(exit_code(&Error::ZeroImage), EXIT_BAD_INPUT);
    }
}
