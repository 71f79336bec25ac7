use faer::{Mat, Side};
use lgtquench_core::model::local::{bond_hamiltonian, site_dim, LocalOp};
use lgtquench_core::model::ModelParams;
use lgtquench_core::C64;
use serde::{Deserialize, Serialize};

use crate::state::{czero, UniformMps};
use crate::UmpsError;

/// Truncation settings of a two-site update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Truncation {
    pub chi_max: usize,
    /// Largest discarded Schmidt weight per update.
    pub max_discarded: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { chi_max: 128, max_discarded: 1e-20 }
    }
}

/// `exp(-i tau h)` of a Hermitian two-site operator.
pub fn gate(h: &LocalOp, tau: f64) -> Result<LocalOp, UmpsError> {
    let n = h.dim;
    let m = Mat::from_fn(n, n, |r, c| h.get(r, c));
    let eig = m.self_adjoint_eigen(Side::Lower).map_err(|e| UmpsError::Linalg(format!("{e:?}")))?;
    let (u, s) = (eig.U(), eig.S());
    let mut out = LocalOp::zeros(n);
    for k in 0..n {
        let phase = C64::from_polar(1.0, -tau * s[k].re);
        for r in 0..n {
            let a = u[(r, k)] * phase;
            for c in 0..n {
                out.data[r * n + c] += a * u[(c, k)].conj();
            }
        }
    }
    Ok(out)
}

/// Second-order Trotter propagator for the two bond classes of the cell.
#[derive(Clone, Debug)]
pub struct Propagator {
    half_even: LocalOp,
    full_even: LocalOp,
    full_odd: LocalOp,
    pub dt: f64,
}

impl Propagator {
    pub fn new(params: &ModelParams, dt: f64) -> Result<Self, UmpsError> {
        let (even, odd) = (bond_hamiltonian(params, 0), bond_hamiltonian(params, 1));
        Ok(Self { half_even: gate(&even, 0.5 * dt)?, full_even: gate(&even, dt)?, full_odd: gate(&odd, dt)?, dt })
    }

    /// Advances by `steps * dt`, fusing the half steps of consecutive
    /// Trotter layers. Returns the summed discarded weight.
    pub fn evolve(&self, psi: &mut UniformMps, steps: usize, trunc: &Truncation) -> Result<f64, UmpsError> {
        if steps == 0 {
            return Ok(0.0);
        }
        let mut discarded = apply_bond_gate(psi, 0, &self.half_even, trunc)?;
        for k in 0..steps {
            discarded += apply_bond_gate(psi, 1, &self.full_odd, trunc)?;
            let last = if k + 1 == steps { &self.half_even } else { &self.full_even };
            discarded += apply_bond_gate(psi, 0, last, trunc)?;
        }
        Ok(discarded)
    }
}

/// Applies a two-site gate on `(site, site + 1)` and restores the
/// right-canonical form by a truncated SVD without inverting Schmidt values.
pub fn apply_bond_gate(psi: &mut UniformMps, site: usize, g: &LocalOp, trunc: &Truncation) -> Result<f64, UmpsError> {
    let n = psi.n_sites();
    let d = site_dim(psi.kind);
    let next = (site + 1) % n;
    let lam = psi.schmidt[site].clone();
    let (cl, cr) = (lam.len(), psi.schmidt[(next + 1) % n].len());
    let theta: Vec<Mat<C64>> = (0..d * d).map(|ab| &psi.tensors[site][ab / d] * &psi.tensors[next][ab % d]).collect();
    // gated two-site tensor as a (d cl) x (d cr) matrix
    let mut big = Mat::<C64>::zeros(d * cl, d * cr);
    for out in 0..d * d {
        let (o1, o2) = (out / d, out % d);
        for (inp, t) in theta.iter().enumerate() {
            let w = g.get(out, inp);
            if w == czero() {
                continue;
            }
            for r in 0..cl {
                for c in 0..cr {
                    big[(o1 * cl + r, o2 * cr + c)] += w * t[(r, c)];
                }
            }
        }
    }
    let weighted = Mat::from_fn(d * cl, d * cr, |r, c| big[(r, c)] * lam[r % cl]);
    let svd = weighted.thin_svd().map_err(|e| UmpsError::Linalg(format!("{e:?}")))?;
    let s: Vec<f64> = (0..svd.S().dim()).map(|k| svd.S()[k].re).collect();
    let total: f64 = s.iter().map(|x| x * x).sum();
    if !(total > 0.0) {
        return Err(UmpsError::Linalg("two-site tensor vanished".into()));
    }
    let mut keep = s.len().min(trunc.chi_max).max(1);
    let mut tail: f64 = s[keep..].iter().map(|x| x * x).sum();
    while keep > 1 && (tail + s[keep - 1] * s[keep - 1]) / total <= trunc.max_discarded {
        keep -= 1;
        tail += s[keep] * s[keep];
    }
    let kept_norm = (total - tail).sqrt();
    let v = svd.V();
    let vk = v.subcols(0, keep).to_owned();
    let left = &big * &vk;
    psi.tensors[site] = (0..d).map(|o| Mat::from_fn(cl, keep, |r, c| left[(o * cl + r, c)] / kept_norm)).collect();
    psi.tensors[next] = (0..d).map(|o| Mat::from_fn(keep, cr, |r, c| vk[(o * cr + c, r)].conj())).collect();
    psi.schmidt[next] = s[..keep].iter().map(|x| x / kept_norm).collect();
    Ok(tail / total)
}
