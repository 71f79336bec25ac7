//! Krylov propagation of finite chains.

use std::sync::Arc;

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    build_hamiltonian_with, resonance_energy_operator, stagger, Basis, Boundary, GaugeSector, LatticeSpec, ModelError,
    ModelKind, ModelParams, ProductStateConfig, VIRTUAL_LINK,
};
use crate::par::{self, Execution};
use crate::sparse::OperatorMatrix;
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid evolution settings: {0}")]
    InvalidSpec(String),
    #[error("state and operator live on different bases")]
    BasisMismatch,
    #[error("configuration {0} is not in the basis")]
    NotInBasis(String),
    #[error("time grid must be non-negative and nondecreasing")]
    InvalidGrid,
    #[error("Krylov step did not reach tolerance at t = {t} (step shrank to {step:.3e}); retry with a smaller dt")]
    KrylovBreakdown { t: f64, step: f64 },
}

/// Amplitudes over an enumerated basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    basis: Arc<Basis>,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn from_amplitudes(basis: Arc<Basis>, amps: Vec<C64>) -> Result<Self, ExactError> {
        if amps.len() != basis.len() {
            return Err(ExactError::BasisMismatch);
        }
        Ok(Self { basis, amps })
    }

    /// The basis vector of a product configuration.
    pub fn product(basis: Arc<Basis>, config: &ProductStateConfig) -> Result<Self, ExactError> {
        let idx = basis.index_of(config).ok_or_else(|| ExactError::NotInBasis(config.to_string()))?;
        let mut amps = vec![C64::new(0.0, 0.0); basis.len()];
        amps[idx] = C64::new(1.0, 0.0);
        Ok(Self { basis, amps })
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &StateVector) -> Result<C64, ExactError> {
        if self.basis.keys() != other.basis.keys() {
            return Err(ExactError::BasisMismatch);
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn conj(&self) -> Self {
        Self { basis: self.basis.clone(), amps: self.amps.iter().map(|a| a.conj()).collect() }
    }

    /// Probabilities `|a_s|^2`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Krylov step settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSpec {
    /// Largest step between Krylov restarts, in units of `1/J`.
    pub dt: f64,
    pub krylov_dim: usize,
    /// Local error target per step.
    pub tol: f64,
}

impl Default for EvolutionSpec {
    fn default() -> Self {
        Self { dt: 0.02, krylov_dim: 20, tol: 1e-10 }
    }
}

impl EvolutionSpec {
    pub fn validate(&self) -> Result<(), ExactError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(ExactError::InvalidSpec(format!("dt must be positive, got {}", self.dt)));
        }
        if self.krylov_dim < 4 {
            return Err(ExactError::InvalidSpec(format!("krylov_dim must be at least 4, got {}", self.krylov_dim)));
        }
        if !(self.tol > 0.0) {
            return Err(ExactError::InvalidSpec(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthonormal Lanczos basis and tridiagonal projection of `h` started
/// from `v`, with full reorthogonalisation.
struct Lanczos {
    vectors: Vec<Vec<C64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// Norm of the residual after the last vector; zero on invariant
    /// subspaces.
    residual: f64,
}

fn lanczos(h: &OperatorMatrix, v: &[C64], m: usize) -> Lanczos {
    let n0 = norm(v);
    let mut vectors = vec![v.iter().map(|x| x / n0).collect::<Vec<_>>()];
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let mut w = vec![C64::new(0.0, 0.0); v.len()];
    let m = m.min(v.len());
    loop {
        let j = vectors.len() - 1;
        h.apply_into(&vectors[j], &mut w);
        let a = dot(&vectors[j], &w).re;
        alpha.push(a);
        for q in &vectors {
            let c = dot(q, &w);
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= c * qi;
            }
        }
        let b = norm(&w);
        let invariant = b < 1e-13 * (a.abs() + beta.last().copied().unwrap_or(0.0) + 1.0);
        if vectors.len() == m || invariant {
            return Lanczos { vectors, alpha, beta, residual: if invariant { 0.0 } else { b } };
        }
        beta.push(b);
        vectors.push(w.iter().map(|x| x / b).collect());
    }
}

/// `exp(-i T tau) e_1` for the symmetric tridiagonal `T`.
fn tridiagonal_exp(alpha: &[f64], beta: &[f64], tau: f64) -> Vec<C64> {
    let m = alpha.len();
    let t = Mat::<f64>::from_fn(m, m, |r, c| {
        if r == c {
            alpha[r]
        } else if r == c + 1 {
            beta[c]
        } else if c == r + 1 {
            beta[r]
        } else {
            0.0
        }
    });
    let evd = t.self_adjoint_eigen(Side::Lower).expect("tridiagonal eigendecomposition");
    let (u, s) = (evd.U(), evd.S());
    (0..m)
        .map(|r| {
            (0..m)
                .map(|k| {
                    let phase = C64::new(0.0, -s[k] * tau).exp();
                    phase * (u[(r, k)] * u[(0, k)])
                })
                .sum()
        })
        .collect()
}

/// Advances `psi` by `tau` with one Krylov projection. Returns the new
/// state and the a posteriori error estimate.
fn krylov_step(h: &OperatorMatrix, psi: &[C64], tau: f64, m: usize) -> (Vec<C64>, f64) {
    let n0 = norm(psi);
    if n0 == 0.0 {
        return (psi.to_vec(), 0.0);
    }
    let lz = lanczos(h, psi, m);
    let coeffs = tridiagonal_exp(&lz.alpha, &lz.beta, tau);
    let err = n0 * lz.residual * coeffs.last().map_or(0.0, |c| c.norm());
    let mut out = vec![C64::new(0.0, 0.0); psi.len()];
    for (c, v) in coeffs.iter().zip(&lz.vectors) {
        let c = c * n0;
        for (o, x) in out.iter_mut().zip(v) {
            *o += c * x;
        }
    }
    (out, err)
}

/// `exp(-i H t) psi0` at every time of a nondecreasing grid.
///
/// Steps of at most `spec.dt` are taken between grid points; a step whose
/// error estimate exceeds `spec.tol` is halved until it does not.
pub fn evolve(
    h: &OperatorMatrix,
    psi0: &StateVector,
    times: &[f64],
    spec: &EvolutionSpec,
) -> Result<Vec<StateVector>, ExactError> {
    spec.validate()?;
    if h.dim() != psi0.amps.len() {
        return Err(ExactError::BasisMismatch);
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(ExactError::InvalidGrid);
    }
    let mut out = Vec::with_capacity(times.len());
    let mut psi = psi0.amps.clone();
    let mut now = 0.0;
    for &target in times {
        while target - now > 1e-14 * target.max(1.0) {
            let mut tau = (target - now).min(spec.dt);
            loop {
                let (next, err) = krylov_step(h, &psi, tau, spec.krylov_dim);
                if err <= spec.tol {
                    psi = next;
                    now += tau;
                    break;
                }
                tau *= 0.5;
                if tau < 1e-10 {
                    return Err(ExactError::KrylovBreakdown { t: now, step: tau });
                }
            }
        }
        now = target;
        out.push(StateVector { basis: psi0.basis.clone(), amps: psi.clone() });
    }
    Ok(out)
}

/// Return rate per site `-(1/L) ln |<ref|psi>|^2`; `f64::INFINITY` when the
/// overlap magnitude is below `1e-15`.
pub fn loschmidt_rate(psi_ref: &StateVector, psi_t: &StateVector, n_sites: usize) -> Result<f64, ExactError> {
    Ok(rate_from_overlap(psi_ref.overlap(psi_t)?, n_sites))
}

pub fn rate_from_overlap(overlap: C64, n_sites: usize) -> f64 {
    let a = overlap.norm();
    if a < 1e-15 {
        f64::INFINITY
    } else {
        -(a * a).ln() / n_sites as f64
    }
}

/// `<psi_b(-t/2)|psi_a(t/2)>` from the two forward-evolved half-time states.
///
/// For a real Hamiltonian and a real reference state `psi_b(-t/2)` is the
/// complex conjugate of `psi_b(t/2)`, so the overlap is the bilinear form
/// `sum_s b_s(t/2) a_s(t/2)`. It equals `<psi_b|exp(-i H t)|psi_a>`.
pub fn doubling_overlap(ref_half: &StateVector, evolved_half: &StateVector) -> Result<C64, ExactError> {
    if ref_half.basis.keys() != evolved_half.basis.keys() {
        return Err(ExactError::BasisMismatch);
    }
    Ok(ref_half.amps.iter().zip(&evolved_half.amps).map(|(b, a)| b * a).sum())
}

/// Which observables to record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Ex,
    ExStag,
    Nd,
    GaugeViolation,
}

impl Observable {
    pub const ALL: [Observable; 4] = [Observable::Ex, Observable::ExStag, Observable::Nd, Observable::GaugeViolation];
}

/// One sample of the diagonal observables; unrequested entries are `None`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservableSample {
    /// Mean link sign `sum sigma_k / n_links`.
    pub ex: Option<f64>,
    /// `sum (-1)^j sigma_{j,j+1} / n_links`.
    pub ex_stag: Option<f64>,
    /// `nd_sign * (N_odd - N_even) / (L / 2)`.
    pub nd: Option<f64>,
    /// `max_j |<G_j> - g_j|`.
    pub gauge_violation: Option<f64>,
}

/// Settings for [`measure_observables`].
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableSpec {
    pub which: Vec<Observable>,
    /// `+1` for fp and CP starts, `-1` for sl and vac starts, so that `N_d`
    /// starts at `+1`.
    pub nd_sign: f64,
    /// Sector against which the Gauss law is checked.
    pub sector: Option<GaugeSector>,
}

impl ObservableSpec {
    pub fn all(nd_sign: f64, sector: Option<GaugeSector>) -> Self {
        Self { which: Observable::ALL.to_vec(), nd_sign, sector }
    }
}

/// Expectation values `<n_i>` of every matter site.
pub fn site_densities(psi: &StateVector) -> Vec<f64> {
    let basis = &psi.basis;
    let l = basis.lattice().n_matter;
    let mut out = vec![0.0; l];
    for (key, p) in basis.keys().iter().zip(psi.probabilities()) {
        for (i, o) in out.iter_mut().enumerate() {
            *o += p * basis.occupation(*key, i) as f64;
        }
    }
    out
}

/// Expectation values of every link sign.
pub fn link_signs(psi: &StateVector) -> Vec<f64> {
    let basis = &psi.basis;
    let mut out = vec![0.0; basis.n_links()];
    for (key, p) in basis.keys().iter().zip(psi.probabilities()) {
        for (k, o) in out.iter_mut().enumerate() {
            *o += p * basis.link_sign(*key, k) as f64;
        }
    }
    out
}

/// Local order parameters of a state on a finite chain.
pub fn measure_observables(psi: &StateVector, spec: &ObservableSpec) -> ObservableSample {
    let basis = &psi.basis;
    let lattice = basis.lattice();
    let wants = |o| spec.which.contains(&o);
    let mut sample = ObservableSample::default();
    let links = if basis.n_links() > 0 && (wants(Observable::Ex) || wants(Observable::ExStag)) {
        link_signs(psi)
    } else {
        Vec::new()
    };
    if !links.is_empty() {
        let n = links.len() as f64;
        if wants(Observable::Ex) {
            sample.ex = Some(links.iter().sum::<f64>() / n);
        }
        if wants(Observable::ExStag) {
            sample.ex_stag = Some(links.iter().enumerate().map(|(k, s)| stagger(k) * s).sum::<f64>() / n);
        }
    }
    if wants(Observable::Nd) {
        let dens = site_densities(psi);
        let imbalance: f64 = dens.iter().enumerate().map(|(i, n)| -stagger(i) * n).sum();
        sample.nd = Some(spec.nd_sign * imbalance / (lattice.n_matter as f64 / 2.0));
    }
    if wants(Observable::GaugeViolation) {
        sample.gauge_violation = Some(match &spec.sector {
            Some(sector) if basis.n_links() > 0 => gauge_violation(psi, sector),
            _ => 0.0,
        });
    }
    sample
}

fn gauge_violation(psi: &StateVector, sector: &GaugeSector) -> f64 {
    let basis = &psi.basis;
    let lattice = basis.lattice();
    let l = lattice.n_matter;
    let mut expect = vec![0.0; l];
    for (key, p) in basis.keys().iter().zip(psi.probabilities()) {
        if p == 0.0 {
            continue;
        }
        for (i, e) in expect.iter_mut().enumerate() {
            let sign = |k: Option<usize>| k.map_or(VIRTUAL_LINK, |k| basis.link_sign(*key, k)) as f64;
            let (left, right) = (sign(lattice.left_link(i)), sign(lattice.right_link(i)));
            let n = basis.occupation(*key, i) as f64;
            *e += p * match sector.kind {
                ModelKind::U1Qlm => n - (i % 2 == 1) as u8 as f64 - 0.5 * (right - left),
                _ => (1.0 - 2.0 * n) * left * right,
            };
        }
    }
    expect.iter().zip(&sector.values).map(|(e, &g)| (e - g as f64).abs()).fold(0.0, f64::max)
}

/// Largest deviation of the resonance energy from its initial value, per
/// two-site cell, along a trajectory.
///
/// For the Z2 theory the operator is `H_mu + H_h`; for the link model it is
/// the image of `sum (-1)^j n_j - sum tau^x` (see
/// [`resonance_energy_operator`]).
pub fn constant_of_motion_check(states: &[StateVector], params: &ModelParams) -> f64 {
    let Some(first) = states.first() else { return 0.0 };
    let basis = first.basis.clone();
    let op = resonance_energy_operator(params, &basis);
    let cells = basis.lattice().n_matter as f64 / 2.0;
    let e0 = op.expectation(&first.amps).re;
    states.iter().map(|s| (op.expectation(&s.amps).re - e0).abs() / cells).fold(0.0, f64::max)
}

/// A finite-chain quench from a product state.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactQuench {
    pub params: ModelParams,
    pub lattice: LatticeSpec,
    pub initial: ProductStateConfig,
    /// Second state of the initial manifold, if the rate to it is wanted.
    pub partner: Option<ProductStateConfig>,
    pub times: Vec<f64>,
    pub spec: EvolutionSpec,
    pub observables: ObservableSpec,
    /// Obtain rates at time `t` from states at `t/2`.
    pub doubling: bool,
    pub execution: Execution,
}

/// Output of [`run_quench_exact`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactSeries {
    pub times: Vec<f64>,
    /// Rate per matter site to the initial state.
    pub rate_plus: Vec<f64>,
    /// Rate per matter site to the partner state; `None` if the partner lies
    /// outside the initial state's gauge sector (the overlap vanishes).
    pub rate_minus: Option<Vec<f64>>,
    pub observables: Vec<ObservableSample>,
    pub max_norm_error: f64,
    pub dimension: usize,
}

/// Evolves `q.initial` and records rates and observables on `q.times`.
pub fn run_quench_exact(q: &ExactQuench) -> Result<ExactSeries, ExactError> {
    if q.lattice.boundary == Boundary::Infinite {
        return Err(ModelError::ConfigMismatch("exact evolution needs a finite chain".into()).into());
    }
    let kind = q.params.kind;
    let initial = if kind.has_links() { q.initial.clone() } else { q.initial.matter_only() };
    let basis = Arc::new(Basis::containing(&initial, &q.lattice, kind)?);
    let h = build_hamiltonian_with(&q.params, &basis, q.execution)?;
    let psi0 = StateVector::product(basis.clone(), &initial)?;
    let partner = match &q.partner {
        Some(p) if kind.has_links() => StateVector::product(basis.clone(), p).ok(),
        Some(p) => StateVector::product(basis.clone(), &p.matter_only()).ok(),
        None => None,
    };
    let n = q.lattice.n_matter;

    let states = evolve(&h, &psi0, &q.times, &q.spec)?;
    let max_norm_error = states.iter().map(|s| (s.norm() - 1.0).abs()).fold(0.0, f64::max);
    let rates = |reference: &StateVector| -> Result<Vec<f64>, ExactError> {
        if q.doubling {
            let half: Vec<f64> = q.times.iter().map(|t| 0.5 * t).collect();
            let (a, b) = par::join(
                q.execution,
                || evolve(&h, &psi0, &half, &q.spec),
                || evolve(&h, reference, &half, &q.spec),
            );
            let (a, b) = (a?, b?);
            a.iter().zip(&b).map(|(x, y)| Ok(rate_from_overlap(doubling_overlap(y, x)?, n))).collect()
        } else {
            states.iter().map(|s| loschmidt_rate(reference, s, n)).collect()
        }
    };
    let rate_plus = rates(&psi0)?;
    let rate_minus = partner.as_ref().map(rates).transpose()?;
    let observables = par::map(q.execution, &states, |s| measure_observables(s, &q.observables));
    Ok(ExactSeries {
        times: q.times.clone(),
        rate_plus,
        rate_minus,
        observables,
        max_norm_error,
        dimension: basis.len(),
    })
}
