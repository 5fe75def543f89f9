//! Timing benchmark harness for the complexity claims.
//!
//! Methodology: the instance point cloud is seeded, every marginal shares
//! one cloud (so edge kernels are shared by construction), the iteration
//! count is fixed so the direct and fast solvers perform identical work
//! schedules, kernel precomputation (dense matrices, Fourier
//! coefficients, gridding plans) is warmed before the clock starts and
//! reported separately, and the reported time is the median of `reps`
//! runs.

use std::time::Instant;

use motsink_core::circle::sinkhorn_circle;
use motsink_core::graph::{CircleGraph, TreeGraph};
use motsink_core::kernel::{DirectFactory, FastFactory, KernelFactory};
use motsink_core::tree::sinkhorn_tree;
use motsink_core::{DiscreteMeasure, SinkhornConfig};

use crate::gen::uniform_cloud;
use crate::io::write_series_file;
use crate::spec::ExperimentSpec;
use crate::Result;

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

#[derive(Debug, Clone, Copy)]
pub struct BenchRow {
    pub x: f64,
    pub time_nfft: f64,
    pub time_direct: f64,
    pub precompute_nfft: f64,
    pub precompute_direct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    Tree,
    Circle,
}

impl Structure {
    pub fn as_str(&self) -> &'static str {
        match self {
            Structure::Tree => "tree",
            Structure::Circle => "circle",
        }
    }
}

impl std::str::FromStr for Structure {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "tree" => Ok(Structure::Tree),
            "circle" => Ok(Structure::Circle),
            other => Err(format!("unknown structure '{other}' (expected tree|circle)")),
        }
    }
}

/// Shared-cloud instance: the same seeded points at every node.
pub fn shared_cloud_measures(
    n: usize,
    k: usize,
    dim: usize,
    seed: u64,
) -> Vec<DiscreteMeasure<f64>> {
    let m = DiscreteMeasure::uniform(uniform_cloud(n, dim, seed)).expect("nonempty cloud");
    vec![m; k]
}

fn fixed_iter_config(spec: &ExperimentSpec, direct: bool) -> SinkhornConfig<f64> {
    let mut s = spec.clone();
    s.delta = ExperimentSpec::never_stop();
    if direct {
        s.kernel = crate::spec::KernelChoice::Direct;
    } else {
        s.kernel = crate::spec::KernelChoice::Nfft;
    }
    s.config()
}

/// Times one structured solve at fixed iteration count in both kernel
/// modes. Returns `(time_nfft, time_direct, pre_nfft, pre_direct)`.
pub fn time_instance(
    structure: Structure,
    spec: &ExperimentSpec,
    n: usize,
    k: usize,
    dim: usize,
    reps: usize,
    force_columns: bool,
) -> Result<BenchRow> {
    let measures = shared_cloud_measures(n, k, dim, spec.seed);
    let views: Vec<_> = measures.iter().map(|m| m.points()).collect();

    // direct mode: warm the dense kernel cache, then time the iterations
    let t0 = Instant::now();
    let mut direct = DirectFactory::new();
    direct.make_edge(views[0], views[0], spec.eta)?;
    let precompute_direct = t0.elapsed().as_secs_f64();
    let config = fixed_iter_config(spec, true);
    let mut direct_times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        run_structured(structure, &measures, &config, &mut direct)?;
        direct_times.push(t.elapsed().as_secs_f64());
    }

    // fast mode: warm Fourier coefficients and gridding plans
    let mut params = spec.fastsum_params();
    if force_columns {
        params = params.with_materialize_limit(0);
    }
    let t0 = Instant::now();
    let mut fast = FastFactory::new(params, &views)?;
    fast.make_edge(views[0], views[0], spec.eta)?;
    let precompute_nfft = t0.elapsed().as_secs_f64();
    let mut config = fixed_iter_config(spec, false);
    config.eta = spec.eta;
    let mut fast_times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        run_structured(structure, &measures, &config, &mut fast)?;
        fast_times.push(t.elapsed().as_secs_f64());
    }

    Ok(BenchRow {
        x: 0.0,
        time_nfft: median(fast_times),
        time_direct: median(direct_times),
        precompute_nfft,
        precompute_direct,
    })
}

fn run_structured(
    structure: Structure,
    measures: &[DiscreteMeasure<f64>],
    config: &SinkhornConfig<f64>,
    factory: &mut dyn KernelFactory<f64>,
) -> Result<()> {
    match structure {
        Structure::Tree => {
            let tree = TreeGraph::chain(measures.len())?;
            sinkhorn_tree(measures, &tree, config, factory)?;
        }
        Structure::Circle => {
            let circle = CircleGraph::new(measures.len())?;
            sinkhorn_circle(measures, &circle, config, factory)?;
        }
    }
    Ok(())
}

pub struct BenchOpts {
    pub k_list: Vec<usize>,
    pub n_list: Vec<usize>,
    pub k_fixed: usize,
    pub n_fixed: usize,
    pub dim: usize,
    pub reps: usize,
}

pub struct BenchOutput {
    pub vs_k: Vec<BenchRow>,
    pub vs_n: Vec<BenchRow>,
}

/// Runs the `K`-sweep (fixed `N`) and `N`-sweep (fixed `K`) for one
/// structure and writes the two plot-ready tables.
pub fn cmd_bench(
    structure: Structure,
    spec: &ExperimentSpec,
    opts: &BenchOpts,
) -> Result<BenchOutput> {
    spec.validate()?;
    // column-by-column fast summation in the circle benchmark, so the
    // measured scaling is the transform's, not a cached dense product's
    let force_columns = structure == Structure::Circle;
    let mut vs_k = Vec::new();
    for &k in &opts.k_list {
        let mut row = time_instance(
            structure,
            spec,
            opts.n_fixed,
            k,
            opts.dim,
            opts.reps,
            force_columns,
        )?;
        row.x = k as f64;
        vs_k.push(row);
    }
    let mut vs_n = Vec::new();
    for &n in &opts.n_list {
        let mut row = time_instance(
            structure,
            spec,
            n,
            opts.k_fixed,
            opts.dim,
            opts.reps,
            force_columns,
        )?;
        row.x = n as f64;
        vs_n.push(row);
    }
    let name = structure.as_str();
    let comment = |sweep: &str, fixed: String| {
        vec![
            format!("{name}-structured cost, time vs {sweep} ({fixed})"),
            format!(
                "eta={} iterations={} M={} p={} eps_b={} seed={}",
                spec.eta, spec.iterations, spec.half_degree, spec.smoothness, spec.eps_b, spec.seed
            ),
            "median of repeated runs; kernel precomputation excluded and reported separately"
                .into(),
        ]
    };
    let columns = [
        "x",
        "time_nfft",
        "time_direct",
        "precompute_nfft",
        "precompute_direct",
    ];
    let to_rows = |rows: &[BenchRow]| {
        rows.iter()
            .map(|r| {
                vec![
                    r.x,
                    r.time_nfft,
                    r.time_direct,
                    r.precompute_nfft,
                    r.precompute_direct,
                ]
            })
            .collect::<Vec<_>>()
    };
    write_series_file(
        &spec.out_dir.join(format!("{name}_time_vs_k.dat")),
        &comment("K", format!("N={}", opts.n_fixed)),
        &columns,
        &to_rows(&vs_k),
    )?;
    write_series_file(
        &spec.out_dir.join(format!("{name}_time_vs_n.dat")),
        &comment("N", format!("K={}", opts.k_fixed)),
        &columns,
        &to_rows(&vs_n),
    )?;
    Ok(BenchOutput { vs_k, vs_n })
}

/// Single-sweep entry point used by tests that need just one table.
pub fn bench_n_sweep(
    structure: Structure,
    spec: &ExperimentSpec,
    n_list: &[usize],
    k_fixed: usize,
    dim: usize,
    reps: usize,
) -> Result<Vec<BenchRow>> {
    let force_columns = structure == Structure::Circle;
    let mut out = Vec::new();
    for &n in n_list {
        let mut row = time_instance(structure, spec, n, k_fixed, dim, reps, force_columns)?;
        row.x = n as f64;
        out.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_laws() {
        let xs = [100.0, 200.0, 400.0, 800.0];
        let quad: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        assert!((log_log_slope(&xs, &quad) - 2.0).abs() < 1e-12);
        let lin: Vec<f64> = xs.iter().map(|x| 0.5 * x).collect();
        assert!((log_log_slope(&xs, &lin) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn median_of_three() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
    }
}
