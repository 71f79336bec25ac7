use lgtquench_core::dqpt::ReturnRateSeries;
use lgtquench_core::exact::ObservableSample;
use lgtquench_core::model::{stagger, ModelParams, ProductStateConfig, MATTER_PER_CELL};
use lgtquench_core::par::{self, Execution};
use serde::{Deserialize, Serialize};

use crate::mpo::Mpo;
use crate::state::{product_to_umps, UniformMps};
use crate::tebd::{Propagator, Truncation};
use crate::transfer::{transfer_spectrum, Contraction, EigenOptions};
use crate::UmpsError;

/// Numerical settings of a UMPS quench.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UmpsControls {
    /// Trotter step, in units of `1/J`.
    pub dt: f64,
    pub truncation: Truncation,
    /// Transfer eigenvalues (rate branches) per manifold.
    pub n_eigs: usize,
    pub eigen: EigenOptions,
    /// Compute rates at `t` from states at `t/2`.
    pub doubling: bool,
    /// Snapshots whose spectra are solved together.
    pub batch: usize,
}

impl Default for UmpsControls {
    fn default() -> Self {
        Self { dt: 0.01, truncation: Truncation::default(), n_eigs: 4, eigen: EigenOptions::default(), doubling: true, batch: 8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UmpsQuench {
    pub params: ModelParams,
    pub initial: ProductStateConfig,
    /// Second manifold state; its rates fill the `minus` branches.
    pub partner: Option<ProductStateConfig>,
    pub t_max: f64,
    pub dt_output: f64,
    /// Sign making `N_d(0) = +1`.
    pub nd_sign: f64,
    pub controls: UmpsControls,
    pub execution: Execution,
}

/// Output of [`run_quench_umps`].
#[derive(Clone, Debug, PartialEq)]
pub struct UmpsRun {
    pub series: ReturnRateSeries,
    /// Observables are measured on the simulated states, so with doubling
    /// they stop at half the rate horizon.
    pub obs_times: Vec<f64>,
    pub observables: Vec<ObservableSample>,
    /// Accumulated discarded weight at each series time (worst trajectory).
    pub truncation: Vec<f64>,
    pub bond_dims: Vec<usize>,
    /// Largest energy change per cell along the main trajectory.
    pub energy_drift: f64,
    /// Last valid series time when the run stopped early.
    pub horizon: Option<f64>,
    pub failure: Option<String>,
}

struct Trajectory {
    psi: UniformMps,
    discarded: f64,
}

fn validate(q: &UmpsQuench) -> Result<(usize, usize, f64), UmpsError> {
    let c = &q.controls;
    let bad = |m: String| Err(UmpsError::InvalidControls(m));
    if !(q.t_max > 0.0) || !(q.dt_output > 0.0) || !(c.dt > 0.0) {
        return bad(format!("t_max, dt_output and dt must be positive (got {}, {}, {})", q.t_max, q.dt_output, c.dt));
    }
    let interval = if c.doubling { 0.5 * q.dt_output } else { q.dt_output };
    if c.dt > interval * (1.0 + 1e-12) {
        return bad(format!("integrator step {} exceeds the simulated output spacing {interval}", c.dt));
    }
    if c.n_eigs < 1 || c.truncation.chi_max < 1 || c.batch < 1 {
        return bad("n_eigs, chi_max and batch must be at least 1".into());
    }
    q.params.validate()?;
    let n_out = (q.t_max / q.dt_output + 1e-9).floor() as usize;
    let substeps = (interval / c.dt - 1e-9).ceil().max(1.0) as usize;
    Ok((n_out, substeps, interval))
}

fn observables(psi: &UniformMps, nd_sign: f64, g0: &[f64]) -> ObservableSample {
    let dens = psi.local_densities();
    let mut s = ObservableSample::default();
    if psi.kind().has_links() {
        let n = dens.len() as f64;
        s.ex = Some(dens.iter().map(|d| d.1).sum::<f64>() / n);
        s.ex_stag = Some(dens.iter().enumerate().map(|(k, d)| stagger(k) * d.1).sum::<f64>() / n);
        let g = psi.gauss_expectations();
        s.gauge_violation = Some(g.iter().zip(g0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    } else {
        s.gauge_violation = Some(0.0);
    }
    let imbalance: f64 = dens.iter().enumerate().map(|(i, d)| -stagger(i) * d.0).sum();
    s.nd = Some(nd_sign * imbalance / (MATTER_PER_CELL as f64 / 2.0));
    s
}

/// Evolves the initial state (and its partner) and records rate branches,
/// observables and truncation diagnostics.
///
/// Failures after the start do not abort: the partial series is returned with
/// `horizon` and `failure` set.
pub fn run_quench_umps(q: &UmpsQuench) -> Result<UmpsRun, UmpsError> {
    let (n_out, substeps, interval) = validate(q)?;
    let c = q.controls;
    let kind = q.params.kind;
    let prop = Propagator::new(&q.params, interval / substeps as f64)?;
    let mpo = Mpo::new(&q.params);
    let start_plus = product_to_umps(&q.initial, kind)?;
    let start_minus = q.partner.as_ref().map(|p| product_to_umps(p, kind)).transpose()?;
    let e0 = mpo.expectation_per_cell(&start_plus);
    let g0 = start_plus.gauss_expectations();
    let has_minus = start_minus.is_some();

    let mut plus = Trajectory { psi: start_plus.clone(), discarded: 0.0 };
    let mut minus = start_minus.clone().map(|psi| Trajectory { psi, discarded: 0.0 });

    let mut run = UmpsRun {
        series: ReturnRateSeries {
            times: Vec::new(),
            plus: vec![Vec::new(); c.n_eigs],
            minus: if has_minus { vec![Vec::new(); c.n_eigs] } else { Vec::new() },
        },
        obs_times: Vec::new(),
        observables: Vec::new(),
        truncation: Vec::new(),
        bond_dims: Vec::new(),
        energy_drift: 0.0,
        horizon: None,
        failure: None,
    };

    // snapshot k holds the states at k * interval
    let mut pending: Vec<(usize, UniformMps, Option<UniformMps>, f64)> = Vec::new();
    let mut k = 0usize;
    loop {
        let snap_minus = minus.as_ref().map(|m| m.psi.clone());
        let disc = plus.discarded.max(minus.as_ref().map_or(0.0, |m| m.discarded));
        pending.push((k, plus.psi.clone(), snap_minus, disc));
        let t_sim = k as f64 * interval;
        run.obs_times.push(t_sim);
        run.observables.push(observables(&plus.psi, q.nd_sign, &g0));
        run.energy_drift = run.energy_drift.max((mpo.expectation_per_cell(&plus.psi) - e0).abs());

        let done = k == n_out;
        if pending.len() >= c.batch || done {
            let solved = par::map(q.execution, &pending, |(k, psi, partner, _)| {
                let mut opts = c.eigen;
                opts.seed = opts.seed.wrapping_add(2 * *k as u64);
                let (bra_plus, bra_minus, how) = if c.doubling {
                    (psi, partner.as_ref(), Contraction::Bilinear)
                } else {
                    (&start_plus, start_minus.as_ref(), Contraction::Overlap)
                };
                let p = transfer_spectrum(bra_plus, psi, c.n_eigs, how, &opts)?;
                opts.seed = opts.seed.wrapping_add(1);
                let m = bra_minus.map(|b| transfer_spectrum(b, psi, c.n_eigs, how, &opts)).transpose()?;
                Ok::<_, UmpsError>((p, m))
            });
            for ((k, psi, _, disc), result) in pending.drain(..).zip(solved) {
                match result {
                    Ok((p, m)) => {
                        run.series.times.push(k as f64 * q.dt_output);
                        push_rates(&mut run.series.plus, &p.rates(MATTER_PER_CELL));
                        if let Some(m) = m {
                            push_rates(&mut run.series.minus, &m.rates(MATTER_PER_CELL));
                        }
                        run.truncation.push(disc);
                        run.bond_dims.push(psi.max_bond_dim());
                    }
                    Err(e) => {
                        run.failure = Some(format!("t = {}: {e}", k as f64 * q.dt_output));
                        break;
                    }
                }
            }
            if run.failure.is_some() {
                break;
            }
        }
        if done {
            break;
        }
        let step = |tr: &mut Trajectory| -> Result<(), UmpsError> {
            tr.discarded += prop.evolve(&mut tr.psi, substeps, &c.truncation)?;
            Ok(())
        };
        let step = &step;
        let (a, b) = par::join(q.execution, || step(&mut plus), || minus.as_mut().map(|m| step(m)).transpose());
        if let Err(e) = a.and(b.map(|_| ())) {
            run.failure = Some(format!("evolution beyond t = {t_sim}: {e}"));
            // spectra of already simulated snapshots
            break;
        }
        k += 1;
    }
    if run.failure.is_some() {
        run.horizon = Some(run.series.times.last().copied().unwrap_or(0.0));
        let n = run.series.times.len();
        run.obs_times.truncate(n.max(1));
        run.observables.truncate(n.max(1));
    }
    Ok(run)
}

fn push_rates(branches: &mut [Vec<f64>], rates: &[f64]) {
    for (n, b) in branches.iter_mut().enumerate() {
        b.push(rates.get(n).copied().unwrap_or(f64::INFINITY));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lgtquench_core::model::{named_state, LatticeSpec, NamedState};

    fn quench(name: NamedState, params: ModelParams, t_max: f64) -> UmpsQuench {
        let lat = LatticeSpec::infinite();
        UmpsQuench {
            params,
            initial: named_state(name, &lat).unwrap(),
            partner: name.partner().map(|p| named_state(p, &lat).unwrap()),
            t_max,
            dt_output: 0.1,
            nd_sign: name.nd_sign(),
            controls: UmpsControls { dt: 0.025, truncation: Truncation { chi_max: 64, max_discarded: 1e-20 }, n_eigs: 2, ..Default::default() },
            execution: Execution::Sequential,
        }
    }

    #[test]
    fn doubling_matches_direct_overlap() {
        let mut q = quench(NamedState::SlPlus, ModelParams::z2(1.0, 0.5, 0.7), 1.0);
        // early minus-branch eigenvalues are nearly degenerate and sensitive
        // to any truncation, so compare untruncated states
        q.controls.truncation.max_discarded = 0.0;
        let doubled = run_quench_umps(&q).unwrap();
        q.controls.doubling = false;
        let direct = run_quench_umps(&q).unwrap();
        assert_eq!(doubled.series.times, direct.series.times);
        for (a, b) in doubled.series.plus[0].iter().zip(&direct.series.plus[0]) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        for (a, b) in doubled.series.minus[0].iter().zip(&direct.series.minus[0]) {
            if a.is_finite() || b.is_finite() {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn observables_start_from_the_product_values() {
        let q = quench(NamedState::FpPlus, ModelParams::z2(1.0, 0.0, 0.5), 0.4);
        let run = run_quench_umps(&q).unwrap();
        let s0 = run.observables[0];
        assert_eq!((s0.ex, s0.nd, s0.gauge_violation), (Some(1.0), Some(1.0), Some(0.0)));
        assert!(run.observables.iter().all(|s| s.gauge_violation.unwrap() < 1e-10));
        assert_eq!(run.obs_times.len(), run.series.times.len());
        assert!((run.obs_times.last().unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(run.series.plus[0][0], 0.0);
        assert_eq!(run.series.minus[0][0], f64::INFINITY);
        assert!(run.horizon.is_none());
    }

    #[test]
    fn invalid_controls_are_rejected() {
        let mut q = quench(NamedState::FpPlus, ModelParams::z2(1.0, 0.0, 0.5), 1.0);
        q.controls.dt = 0.2;
        assert!(matches!(run_quench_umps(&q), Err(UmpsError::InvalidControls(_))));
    }
}
