use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use motsink::bench::{cmd_bench, BenchOpts, Structure};
use motsink::errsweep::{cmd_fastsum_error, ErrSweepOpts};
use motsink::experiments::{
    cmd_barycenter, cmd_euler_flow, cmd_oracle_check, BarycenterOpts, EulerOpts, OracleOpts,
    TreeShape,
};
use motsink::spec::{ExperimentSpec, KernelChoice};

#[derive(Parser)]
#[command(
    name = "motsink",
    version,
    about = "Structured multi-marginal Sinkhorn: experiments and benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Entropic regularization
    #[arg(long)]
    eta: Option<f64>,
    /// Stopping threshold on the Sinkhorn-value change per sweep
    #[arg(long)]
    delta: Option<f64>,
    /// Iteration (sweep) cap; benchmark-style commands run exactly this many
    #[arg(long)]
    iters: Option<usize>,
    /// Fourier expansion half-degree per dimension
    #[arg(long = "M")]
    half_degree: Option<usize>,
    /// Boundary smoothness order of the regularized kernel
    #[arg(long)]
    p: Option<usize>,
    /// Boundary width of the regularized kernel (normalized coordinates)
    #[arg(long = "eps-b")]
    eps_b: Option<f64>,
    /// Kernel application mode
    #[arg(long, default_value = "direct")]
    kernel: KernelChoice,
    /// NFFT window cutoff
    #[arg(long = "nfft-cutoff", default_value_t = 8)]
    nfft_cutoff: usize,
    /// NFFT oversampling factor
    #[arg(long = "nfft-oversampling", default_value_t = 2.0)]
    nfft_oversampling: f64,
    /// Seed for all generated point sets
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Worker threads (0 = all cores); single-threaded runs are
    /// bit-reproducible, and parallel kernels reduce deterministically
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Output directory for emitted tables and measures
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also emit the per-sweep iteration log
    #[arg(long)]
    log: bool,
}

impl Common {
    fn spec(&self, eta: f64, delta: f64, iters: usize, m: usize, eps_b: f64) -> ExperimentSpec {
        ExperimentSpec {
            eta: self.eta.unwrap_or(eta),
            delta: self.delta.unwrap_or(delta),
            iterations: self.iters.unwrap_or(iters),
            half_degree: self.half_degree.unwrap_or(m),
            smoothness: self.p.unwrap_or(3),
            eps_b: self.eps_b.unwrap_or(eps_b),
            kernel: self.kernel,
            cutoff: self.nfft_cutoff,
            oversampling: self.nfft_oversampling,
            seed: self.seed,
            out_dir: self.out.clone(),
            emit_log: self.log,
        }
    }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> motsink::Result<Vec<T>> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<T>()
                .map_err(|_| motsink::CliError::Usage(format!("cannot parse list item '{tok}'")))
        })
        .collect()
}

#[derive(Subcommand)]
enum Command {
    /// Time the tree solver (direct vs NFFT) over K and N sweeps
    BenchTree {
        #[command(flatten)]
        common: Common,
        /// Comma-separated K values for the K sweep
        #[arg(long, default_value = "3,4,5,6,8,10,12,15")]
        k_list: String,
        /// Comma-separated N values for the N sweep
        #[arg(long, default_value = "1000,2000,4000,8000")]
        n_list: String,
        /// Fixed N during the K sweep
        #[arg(long, default_value_t = 2000)]
        n_fixed: usize,
        /// Fixed K during the N sweep
        #[arg(long, default_value_t = 10)]
        k_fixed: usize,
        /// Point dimension
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Timing repetitions (median reported)
        #[arg(long, default_value_t = 3)]
        reps: usize,
    },
    /// Time the circle solver (direct vs NFFT) over K and N sweeps
    BenchCircle {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "3,4,5,6,8,10,12,15")]
        k_list: String,
        #[arg(long, default_value = "200,400,800")]
        n_list: String,
        #[arg(long, default_value_t = 300)]
        n_fixed: usize,
        #[arg(long, default_value_t = 3)]
        k_fixed: usize,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 3)]
        reps: usize,
    },
    /// Tabulate |S_direct - S_nfft| at a fixed sweep over M and eta
    FastsumError {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "tree")]
        structure: Structure,
        /// Atoms per marginal
        #[arg(long)]
        n: Option<usize>,
        /// Number of marginals
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value = "0.005,0.05,0.5")]
        eta_list: String,
        #[arg(long, default_value = "8,16,32,64,128,256,512")]
        m_list: String,
    },
    /// Fixed-support barycenter over a tree of input measures
    Barycenter {
        #[command(flatten)]
        common: Common,
        /// Leaf measure files
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Tree layout connecting the inputs
        #[arg(long, default_value = "star")]
        tree: TreeShape,
        /// Comma-separated barycenter weights, one per input (default: uniform)
        #[arg(long)]
        weights: Option<String>,
    },
    /// Generalized Euler flow with a prescribed connection map
    EulerFlow {
        #[command(flatten)]
        common: Common,
        /// Number of particles
        #[arg(long, default_value_t = 400)]
        n: usize,
        /// Number of time steps (marginals)
        #[arg(long, default_value_t = 5)]
        time_steps: usize,
        /// Connection map: identity | reflect | two-branch
        #[arg(long, default_value = "reflect")]
        sigma: String,
        /// Positional bins per axis in the emitted heat-map grids
        #[arg(long, default_value_t = 64)]
        bins: usize,
    },
    /// Cross-check the structured solvers against the dense oracle
    OracleCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "tree")]
        structure: Structure,
        #[arg(long, default_value_t = 50)]
        instances: usize,
        /// Lockstep sweeps to compare
        #[arg(long, default_value_t = 5)]
        sweeps: usize,
        /// Sampling box side for atom positions
        #[arg(long, default_value_t = 0.35)]
        span: f64,
    },
}

fn init_threads(threads: usize) {
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

fn run(cli: Cli) -> motsink::Result<()> {
    match cli.command {
        Command::BenchTree {
            common,
            k_list,
            n_list,
            n_fixed,
            k_fixed,
            dim,
            reps,
        } => {
            init_threads(common.threads);
            let spec = common.spec(0.1, ExperimentSpec::never_stop(), 10, 156, 1.0 / 16.0);
            cmd_bench(
                Structure::Tree,
                &spec,
                &BenchOpts {
                    k_list: parse_list(&k_list)?,
                    n_list: parse_list(&n_list)?,
                    k_fixed,
                    n_fixed,
                    dim,
                    reps,
                },
            )?;
        }
        Command::BenchCircle {
            common,
            k_list,
            n_list,
            n_fixed,
            k_fixed,
            dim,
            reps,
        } => {
            init_threads(common.threads);
            let spec = common.spec(0.1, ExperimentSpec::never_stop(), 10, 2000, 3.0 / 32.0);
            cmd_bench(
                Structure::Circle,
                &spec,
                &BenchOpts {
                    k_list: parse_list(&k_list)?,
                    n_list: parse_list(&n_list)?,
                    k_fixed,
                    n_fixed,
                    dim,
                    reps,
                },
            )?;
        }
        Command::FastsumError {
            common,
            structure,
            n,
            k,
            dim,
            eta_list,
            m_list,
        } => {
            init_threads(common.threads);
            let spec = common.spec(0.1, ExperimentSpec::never_stop(), 10, 156, 1.0 / 16.0);
            let (default_n, default_k) = match structure {
                Structure::Tree => (10_000, 10),
                Structure::Circle => (1000, 3),
            };
            cmd_fastsum_error(
                &spec,
                &ErrSweepOpts {
                    structure,
                    n: n.unwrap_or(default_n),
                    k: k.unwrap_or(default_k),
                    dim,
                    eta_list: parse_list(&eta_list)?,
                    m_list: parse_list(&m_list)?,
                },
            )?;
        }
        Command::Barycenter {
            common,
            inputs,
            tree,
            weights,
        } => {
            init_threads(common.threads);
            let spec = common.spec(5e-3, ExperimentSpec::never_stop(), 150, 156, 1.0 / 16.0);
            let weights = weights.as_deref().map(parse_list::<f64>).transpose()?;
            cmd_barycenter(
                &spec,
                &BarycenterOpts {
                    inputs,
                    shape: tree,
                    weights,
                },
            )?;
        }
        Command::EulerFlow {
            common,
            n,
            time_steps,
            sigma,
            bins,
        } => {
            init_threads(common.threads);
            let spec = common.spec(0.05, ExperimentSpec::never_stop(), 50, 156, 1.0 / 16.0);
            cmd_euler_flow(
                &spec,
                &EulerOpts {
                    n,
                    time_steps,
                    sigma,
                    bins,
                },
            )?;
        }
        Command::OracleCheck {
            common,
            structure,
            instances,
            sweeps,
            span,
        } => {
            init_threads(common.threads);
            let spec = common.spec(0.1, 1e-12, 10_000, 64, 1.0 / 16.0);
            let rows = cmd_oracle_check(
                &spec,
                &OracleOpts {
                    structure,
                    instances,
                    sweeps,
                    span,
                },
            )?;
            let worst_lock = rows.iter().fold(0.0f64, |a, r| a.max(r.lockstep));
            let worst_pair = rows.iter().fold(0.0f64, |a, r| a.max(r.pair));
            let worst_res = rows.iter().fold(0.0f64, |a, r| a.max(r.residual));
            println!(
                "oracle check ({}): {} instances, worst lockstep {:.3e}, worst pair {:.3e}, worst residual {:.3e}",
                structure.as_str(),
                rows.len(),
                worst_lock,
                worst_pair,
                worst_res
            );
            if worst_lock > 1e-10 || worst_pair > 1e-10 || worst_res > 1e-8 {
                return Err(motsink::CliError::Check(format!(
                    "oracle deviation beyond tolerance: lockstep {worst_lock:.3e}, pair {worst_pair:.3e}, residual {worst_res:.3e}"
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
