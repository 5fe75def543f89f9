//! Approximation-error sweep: direct versus NFFT Sinkhorn value at a
//! fixed iteration, across the Fourier degree and the regularization.

use motsink_core::circle::sinkhorn_circle;
use motsink_core::graph::{CircleGraph, TreeGraph};
use motsink_core::kernel::AutoFactory;
use motsink_core::tree::sinkhorn_tree;
use motsink_core::{DiscreteMeasure, KernelMode, SinkhornConfig};

use crate::bench::{shared_cloud_measures, Structure};
use crate::io::write_series_file;
use crate::spec::ExperimentSpec;
use crate::Result;

pub struct ErrSweepOpts {
    pub structure: Structure,
    pub n: usize,
    pub k: usize,
    pub dim: usize,
    pub eta_list: Vec<f64>,
    pub m_list: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
pub struct ErrRow {
    pub m: usize,
    /// `|S_direct - S_nfft|` at the fixed iteration; infinite when the
    /// fast run failed numerically (kernel approximation too coarse).
    pub error: f64,
    pub time_fast: f64,
    pub time_direct: f64,
}

fn final_objective(
    structure: Structure,
    measures: &[DiscreteMeasure<f64>],
    config: &SinkhornConfig<f64>,
) -> Result<(f64, f64)> {
    let t = std::time::Instant::now();
    let mut factory = AutoFactory::from_config(config, measures)?;
    let objective = match structure {
        Structure::Tree => {
            let tree = TreeGraph::chain(measures.len())?;
            *sinkhorn_tree(measures, &tree, config, &mut factory)?
                .trace
                .last()
                .expect("at least one sweep")
        }
        Structure::Circle => {
            let circle = CircleGraph::new(measures.len())?;
            *sinkhorn_circle(measures, &circle, config, &mut factory)?
                .trace
                .last()
                .expect("at least one sweep")
        }
    };
    Ok((objective, t.elapsed().as_secs_f64()))
}

/// For each eta, sweeps the Fourier degree and tabulates the objective
/// discrepancy; one output file per eta.
pub fn cmd_fastsum_error(
    spec: &ExperimentSpec,
    opts: &ErrSweepOpts,
) -> Result<Vec<(f64, Vec<ErrRow>)>> {
    let measures = shared_cloud_measures(opts.n, opts.k, opts.dim, spec.seed);
    let mut all = Vec::new();
    for &eta in &opts.eta_list {
        let mut base = spec.clone();
        base.eta = eta;
        base.delta = ExperimentSpec::never_stop();
        base.kernel = crate::spec::KernelChoice::Direct;
        let direct_config = base.config();
        let (s_direct, time_direct) = final_objective(opts.structure, &measures, &direct_config)?;
        let mut rows = Vec::new();
        for &m in &opts.m_list {
            let mut fast = base.clone();
            fast.kernel = crate::spec::KernelChoice::Nfft;
            fast.half_degree = m;
            let fast_config = fast.config();
            debug_assert!(matches!(fast_config.kernel_mode, KernelMode::Fast(_)));
            let (error, time_fast) = match final_objective(opts.structure, &measures, &fast_config)
            {
                Ok((s_fast, t)) => ((s_direct - s_fast).abs(), t),
                // a too-coarse kernel approximation can drive the scaling
                // into invalid territory; record that degree as unusable
                Err(crate::CliError::Core(e)) if e.is_numerical() => (f64::INFINITY, f64::NAN),
                Err(e) => return Err(e),
            };
            rows.push(ErrRow {
                m,
                error,
                time_fast,
                time_direct,
            });
        }
        let path = spec
            .out_dir
            .join(format!("fastsum_error_{}_eta{eta}.dat", opts.structure.as_str()));
        write_series_file(
            &path,
            &[
                format!(
                    "|S_direct - S_nfft| after {} sweeps, {}-structured, N={} K={} d={} eta={eta}",
                    spec.iterations,
                    opts.structure.as_str(),
                    opts.n,
                    opts.k,
                    opts.dim
                ),
                format!("p={} seed={}", spec.smoothness, spec.seed),
            ],
            &["M", "error", "time_fast", "time_direct"],
            &rows
                .iter()
                .map(|r| vec![r.m as f64, r.error, r.time_fast, r.time_direct])
                .collect::<Vec<_>>(),
        )?;
        all.push((eta, rows));
    }
    Ok(all)
}

/// Smallest degree in the sweep reaching `threshold`, if any.
pub fn minimal_degree(rows: &[ErrRow], threshold: f64) -> Option<usize> {
    rows.iter().find(|r| r.error <= threshold).map(|r| r.m)
}
