use faer::Mat;
use lgtquench_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::state::{czero, UniformMps};
use crate::UmpsError;

/// How the bra tensors enter the mixed transfer matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Contraction {
    /// `sum_s conj(A_bra^s) (x) A_ket^s`, the ordinary overlap `<bra|ket>`.
    Overlap,
    /// `sum_s A_bra^s (x) A_ket^s`, used by the doubling trick where the bra
    /// is the complex conjugate of an evolved state.
    Bilinear,
}

/// Iterative eigensolver settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenOptions {
    pub tol: f64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: 1e-10, krylov_dim: 40, max_restarts: 400, seed: 0x5eed }
    }
}

/// Leading eigenvalues of a mixed transfer matrix, per unit cell.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferSpectrum {
    /// Ordered by decreasing magnitude, then increasing phase.
    pub eps: Vec<C64>,
    /// Largest relative residual of the returned eigenpairs.
    pub residual: f64,
}

impl TransferSpectrum {
    /// `-ln |eps_n|^2` divided by `sites_per_cell`, `inf` for vanishing
    /// eigenvalues.
    pub fn rates(&self, sites_per_cell: usize) -> Vec<f64> {
        self.eps.iter().map(|e| rate_from_eigenvalue(*e, sites_per_cell)).collect()
    }
}

pub fn rate_from_eigenvalue(eps: C64, sites_per_cell: usize) -> f64 {
    let a = eps.norm();
    if a < 1e-15 {
        f64::INFINITY
    } else {
        -2.0 * a.ln() / sites_per_cell as f64
    }
}

/// The mixed transfer map acting on `chi_bra x chi_ket` matrices from the
/// right.
struct TransferMap<'a> {
    bra: &'a UniformMps,
    ket: &'a UniformMps,
    bra_tensors: Vec<Vec<Mat<C64>>>,
}

impl<'a> TransferMap<'a> {
    fn new(bra: &'a UniformMps, ket: &'a UniformMps, contraction: Contraction) -> Self {
        let bra_tensors = match contraction {
            Contraction::Bilinear => bra.tensors.clone(),
            Contraction::Overlap => bra.conj().tensors,
        };
        Self { bra, ket, bra_tensors }
    }

    fn shape(&self) -> (usize, usize) {
        (self.bra.bond_dim(0), self.ket.bond_dim(0))
    }

    fn dim(&self) -> usize {
        let (a, b) = self.shape();
        a * b
    }

    fn apply(&self, x: &[C64], out: &mut [C64]) {
        let (rb, rk) = self.shape();
        let mut m = Mat::from_fn(rb, rk, |r, c| x[r + rb * c]);
        for site in (0..self.ket.n_sites()).rev() {
            let (lb, lk) = (self.bra.bond_dim(site), self.ket.bond_dim(site));
            let mut next = Mat::<C64>::zeros(lb, lk);
            for (b, k) in self.bra_tensors[site].iter().zip(&self.ket.tensors[site]) {
                next += b * (&m * k.transpose());
            }
            m = next;
        }
        for c in 0..rk {
            for r in 0..rb {
                out[r + rb * c] = m[(r, c)];
            }
        }
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn order(a: &C64, b: &C64) -> std::cmp::Ordering {
    b.norm().total_cmp(&a.norm()).then(a.arg().total_cmp(&b.arg()))
}

/// The `n_eigs` largest-magnitude eigenvalues of the mixed transfer matrix
/// between `bra` and `ket`, normalized by the norms per cell of both states.
pub fn transfer_spectrum(
    bra: &UniformMps,
    ket: &UniformMps,
    n_eigs: usize,
    contraction: Contraction,
    opts: &EigenOptions,
) -> Result<TransferSpectrum, UmpsError> {
    if bra.n_sites() != ket.n_sites() || bra.phys_dim() != ket.phys_dim() {
        return Err(UmpsError::Shape("bra and ket have different unit cells".into()));
    }
    let mixed = TransferMap::new(bra, ket, contraction);
    let (eps, residual) = leading_eigenvalues(&mixed, n_eigs, opts, None)?;
    let scale = (norm_per_cell(bra, opts)? * norm_per_cell(ket, opts)?).sqrt();
    let eps = eps.into_iter().map(|e| e / scale).collect();
    Ok(TransferSpectrum { eps, residual })
}

/// Leading eigenvalue of the ordinary transfer matrix, `<psi|psi>` per cell.
pub fn norm_per_cell(psi: &UniformMps, opts: &EigenOptions) -> Result<f64, UmpsError> {
    let map = TransferMap::new(psi, psi, Contraction::Overlap);
    let chi = psi.bond_dim(0);
    // the identity is the exact fixed point of a right-canonical state
    let start: Vec<C64> = (0..chi * chi).map(|i| if i % (chi + 1) == 0 { C64::new(1.0, 0.0) } else { czero() }).collect();
    let (eps, _) = leading_eigenvalues(&map, 1, opts, Some(start))?;
    Ok(eps[0].norm())
}

fn leading_eigenvalues(
    map: &TransferMap<'_>,
    n_eigs: usize,
    opts: &EigenOptions,
    start: Option<Vec<C64>>,
) -> Result<(Vec<C64>, f64), UmpsError> {
    let n = map.dim();
    let want = n_eigs.min(n).max(1);
    if n <= opts.krylov_dim.max(want + 2) {
        return dense_eigenvalues(map, want);
    }
    let m = opts.krylov_dim.max(2 * want + 4).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v0 = start.unwrap_or_else(|| (0..n).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect());
    let s = norm(&v0);
    v0.iter_mut().for_each(|x| *x /= s);
    let mut basis: Vec<Vec<C64>> = vec![v0];
    let mut images: Vec<Vec<C64>> = Vec::new();
    let mut last_residual = f64::INFINITY;
    for _ in 0..opts.max_restarts {
        // expand to m vectors
        let mut breakdown = false;
        while images.len() < basis.len() || basis.len() < m {
            if images.len() < basis.len() {
                let mut w = vec![czero(); n];
                map.apply(&basis[images.len()], &mut w);
                images.push(w);
                continue;
            }
            let mut w = images.last().unwrap().clone();
            let scale = norm(&w);
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(b, &w);
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let wn = norm(&w);
            if wn <= 1e-13 * scale.max(1e-300) {
                breakdown = true;
                break;
            }
            w.iter_mut().for_each(|x| *x /= wn);
            basis.push(w);
        }
        let k = basis.len();
        let g = Mat::from_fn(k, k, |r, c| dot(&basis[r], &images[c]));
        let eig = g.eigen().map_err(|e| UmpsError::Linalg(format!("{e:?}")))?;
        let (u, s) = (eig.U(), eig.S());
        let mut idx: Vec<usize> = (0..k).collect();
        idx.sort_by(|&a, &b| order(&s[a], &s[b]));
        let top = s[idx[0]].norm().max(1e-300);
        let mut residual = 0.0f64;
        for &j in idx.iter().take(want) {
            let theta = s[j];
            let y: Vec<C64> = (0..k).map(|r| u[(r, j)]).collect();
            let yn = norm(&y);
            let mut r = vec![czero(); n];
            let mut x = vec![czero(); n];
            for (c, yc) in y.iter().enumerate() {
                let yc = yc / yn;
                r.iter_mut().zip(&images[c]).for_each(|(a, b)| *a += yc * b);
                x.iter_mut().zip(&basis[c]).for_each(|(a, b)| *a += yc * b);
            }
            r.iter_mut().zip(&x).for_each(|(a, b)| *a -= theta * b);
            residual = residual.max(norm(&r) / norm(&x).max(1e-300) / top);
        }
        last_residual = residual;
        if residual <= opts.tol || breakdown {
            let eps: Vec<C64> = idx.iter().take(want).map(|&j| s[j]).collect();
            return Ok((eps, residual));
        }
        // thick restart on the leading Ritz vectors
        let keep = (want + (m - want) / 2).min(k - 1).max(want);
        let y = Mat::from_fn(k, keep, |r, c| u[(r, idx[c])]);
        let q = y.qr().compute_thin_Q();
        let combine = |vs: &[Vec<C64>]| -> Vec<Vec<C64>> {
            (0..keep)
                .map(|c| {
                    let mut out = vec![czero(); n];
                    for (r, v) in vs.iter().enumerate() {
                        let w = q[(r, c)];
                        out.iter_mut().zip(v).for_each(|(a, b)| *a += w * b);
                    }
                    out
                })
                .collect()
        };
        basis = combine(&basis);
        images = combine(&images);
    }
    Err(UmpsError::EigenNotConverged { requested: want, residual: last_residual, tol: opts.tol })
}

fn dense_eigenvalues(map: &TransferMap<'_>, want: usize) -> Result<(Vec<C64>, f64), UmpsError> {
    let n = map.dim();
    let mut m = Mat::<C64>::zeros(n, n);
    let mut e = vec![czero(); n];
    let mut col = vec![czero(); n];
    for c in 0..n {
        e.iter_mut().for_each(|x| *x = czero());
        e[c] = C64::new(1.0, 0.0);
        map.apply(&e, &mut col);
        for r in 0..n {
            m[(r, c)] = col[r];
        }
    }
    let mut vals = m.eigenvalues().map_err(|e| UmpsError::Linalg(format!("{e:?}")))?;
    vals.sort_by(order);
    vals.truncate(want);
    Ok((vals, 0.0))
}

/// `<psi(-t/2)|phi(t/2)>` per cell from states evolved to `t/2`, for real
/// Hamiltonians and real initial states.
pub fn doubling_overlap(ref_half: &UniformMps, evolved_half: &UniformMps, opts: &EigenOptions) -> Result<C64, UmpsError> {
    Ok(transfer_spectrum(ref_half, evolved_half, 1, Contraction::Bilinear, opts)?.eps[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::product_to_umps;
    use crate::tebd::{Propagator, Truncation};
    use lgtquench_core::model::{named_state, LatticeSpec, ModelKind, ModelParams, NamedState};

    fn named(n: NamedState, kind: ModelKind) -> UniformMps {
        product_to_umps(&named_state(n, &LatticeSpec::infinite()).unwrap(), kind).unwrap()
    }

    #[test]
    fn self_overlap_is_one() {
        let p = ModelParams::z2(1.0, 0.2, 0.5);
        let mut psi = named(NamedState::FpPlus, p.kind);
        Propagator::new(&p, 0.05).unwrap().evolve(&mut psi, 20, &Truncation::default()).unwrap();
        let spec = transfer_spectrum(&psi, &psi, 3, Contraction::Overlap, &EigenOptions::default()).unwrap();
        assert!((spec.eps[0] - 1.0).norm() < 1e-10, "{:?}", spec.eps);
        assert!(spec.rates(2)[0].abs() < 1e-10);
        assert!(spec.eps.windows(2).all(|w| w[0].norm() >= w[1].norm()));
        assert!(spec.eps.iter().all(|e| e.norm() <= 1.0 + 1e-8));
    }

    #[test]
    fn product_states_give_products_of_local_overlaps() {
        let fp = named(NamedState::FpPlus, ModelKind::Z2Lgt);
        let fm = named(NamedState::FpMinus, ModelKind::Z2Lgt);
        let o = transfer_spectrum(&fp, &fm, 1, Contraction::Overlap, &EigenOptions::default()).unwrap();
        assert_eq!(o.eps[0].norm(), 0.0);
        assert_eq!(o.rates(2)[0], f64::INFINITY);
        let o = transfer_spectrum(&fp, &fp, 1, Contraction::Overlap, &EigenOptions::default()).unwrap();
        assert!((o.eps[0] - 1.0).norm() < 1e-15);
    }

    #[test]
    fn iterative_and_dense_solvers_agree() {
        let p = ModelParams::z2(1.0, 0.3, 0.8);
        let mut a = named(NamedState::SlPlus, p.kind);
        let mut b = named(NamedState::SlMinus, p.kind);
        let prop = Propagator::new(&p, 0.05).unwrap();
        let tr = Truncation { chi_max: 24, max_discarded: 1e-12 };
        prop.evolve(&mut a, 16, &tr).unwrap();
        prop.evolve(&mut b, 16, &tr).unwrap();
        let map = TransferMap::new(&a, &b, Contraction::Bilinear);
        assert!(map.dim() > 60);
        let (dense, _) = dense_eigenvalues(&map, 4).unwrap();
        let (iter, res) = leading_eigenvalues(&map, 4, &EigenOptions { krylov_dim: 24, ..Default::default() }, None).unwrap();
        assert!(res < 1e-10);
        for (x, y) in dense.iter().zip(&iter) {
            assert!((x - y).norm() < 1e-8, "{dense:?} vs {iter:?}");
        }
    }
}
