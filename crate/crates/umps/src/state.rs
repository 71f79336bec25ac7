use faer::Mat;
use lgtquench_core::model::local::{site_dim, site_index, site_state, LocalOp};
use lgtquench_core::model::{ModelKind, ProductStateConfig, MATTER_PER_CELL};
use lgtquench_core::C64;

use crate::UmpsError;

/// Translation-invariant MPS with a two-site unit cell of fused
/// (matter, right link) sites.
///
/// Tensors are stored in right-canonical form `B^s = Gamma^s Lambda`, with the
/// Schmidt values of the bond on the left of each site kept alongside.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformMps {
    pub(crate) kind: ModelKind,
    /// `tensors[site][s]` has shape `(chi_left(site), chi_left(site + 1))`.
    pub(crate) tensors: Vec<Vec<Mat<C64>>>,
    /// Schmidt values on the bond left of each site.
    pub(crate) schmidt: Vec<Vec<f64>>,
}

pub(crate) fn czero() -> C64 {
    C64::new(0.0, 0.0)
}

impl UniformMps {
    pub fn from_parts(kind: ModelKind, tensors: Vec<Vec<Mat<C64>>>, schmidt: Vec<Vec<f64>>) -> Result<Self, UmpsError> {
        let n = tensors.len();
        if n != MATTER_PER_CELL || schmidt.len() != n {
            return Err(UmpsError::Shape(format!("unit cell must hold {MATTER_PER_CELL} sites")));
        }
        for (i, site) in tensors.iter().enumerate() {
            if site.len() != site_dim(kind) {
                return Err(UmpsError::Shape(format!("site {i} has {} physical states", site.len())));
            }
            let (l, r) = (schmidt[i].len(), schmidt[(i + 1) % n].len());
            if site.iter().any(|m| m.nrows() != l || m.ncols() != r) {
                return Err(UmpsError::Shape(format!("site {i} tensor does not match bonds {l} x {r}")));
            }
        }
        Ok(Self { kind, tensors, schmidt })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn phys_dim(&self) -> usize {
        site_dim(self.kind)
    }

    /// Bond dimension on the left of `site`.
    pub fn bond_dim(&self, site: usize) -> usize {
        self.schmidt[site].len()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.schmidt.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn tensor(&self, site: usize, s: usize) -> &Mat<C64> {
        &self.tensors[site][s]
    }

    pub fn schmidt_values(&self, site: usize) -> &[f64] {
        &self.schmidt[site]
    }

    /// Elementwise complex conjugate, the time-reversed state for real
    /// Hamiltonians.
    pub fn conj(&self) -> Self {
        let tensors = self.tensors.iter().map(|site| site.iter().map(|m| Mat::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)].conj())).collect()).collect();
        Self { kind: self.kind, tensors, schmidt: self.schmidt.clone() }
    }

    /// Largest deviation from `sum_s B^s B^s^dag = 1` over the cell, with row
    /// `a` weighted by the Schmidt value `lambda_a` of the bond it hangs on.
    ///
    /// Rows with negligible Schmidt weight do not enter any expectation value,
    /// and their roundoff is amplified by `1 / lambda_a` in the two-site update.
    pub fn right_canonical_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (site, tensors) in self.tensors.iter().enumerate() {
            let lam = &self.schmidt[site];
            let l = tensors[0].nrows();
            let mut acc = Mat::<C64>::zeros(l, l);
            for m in tensors {
                acc += m * m.adjoint();
            }
            for r in 0..l {
                for c in 0..l {
                    let target = if r == c { 1.0 } else { 0.0 };
                    worst = worst.max(lam[r] * lam[c] * (acc[(r, c)] - target).norm());
                }
            }
        }
        worst
    }

    /// Diagonal of the one-site reduced density matrix.
    pub fn site_probabilities(&self, site: usize) -> Vec<f64> {
        let lam = &self.schmidt[site];
        let mut p: Vec<f64> = self.tensors[site]
            .iter()
            .map(|m| {
                let mut acc = 0.0;
                for r in 0..m.nrows() {
                    let w = lam[r] * lam[r];
                    for c in 0..m.ncols() {
                        acc += w * m[(r, c)].norm_sqr();
                    }
                }
                acc
            })
            .collect();
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        p
    }

    /// Diagonal of the two-site reduced density matrix of `(site, site + 1)`,
    /// indexed `a * d + b`.
    pub fn pair_probabilities(&self, site: usize) -> Vec<f64> {
        let n = self.n_sites();
        let d = self.phys_dim();
        let lam = &self.schmidt[site];
        let next = (site + 1) % n;
        let mut p = vec![0.0; d * d];
        for a in 0..d {
            for b in 0..d {
                let m = &self.tensors[site][a] * &self.tensors[next][b];
                let mut acc = 0.0;
                for r in 0..m.nrows() {
                    let w = lam[r] * lam[r];
                    for c in 0..m.ncols() {
                        acc += w * m[(r, c)].norm_sqr();
                    }
                }
                p[a * d + b] = acc;
            }
        }
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        p
    }

    /// `<O>` for an operator on fused sites `(site, site + 1)`.
    pub fn two_site_expectation(&self, site: usize, op: &LocalOp) -> C64 {
        let n = self.n_sites();
        let d = self.phys_dim();
        assert_eq!(op.dim, d * d);
        let lam = &self.schmidt[site];
        let next = (site + 1) % n;
        let theta: Vec<Mat<C64>> = (0..d * d).map(|ab| &self.tensors[site][ab / d] * &self.tensors[next][ab % d]).collect();
        let mut num = czero();
        let mut den = 0.0;
        for (out, t_out) in theta.iter().enumerate() {
            for r in 0..t_out.nrows() {
                let w = lam[r] * lam[r];
                for c in 0..t_out.ncols() {
                    let bra = t_out[(r, c)].conj() * w;
                    den += (bra * t_out[(r, c)]).re;
                    for (inp, t_in) in theta.iter().enumerate() {
                        let o = op.get(out, inp);
                        if o != czero() {
                            num += bra * o * t_in[(r, c)];
                        }
                    }
                }
            }
        }
        num / den
    }

    /// `(<n_i>, <sigma_i>)` for the two sites of the cell.
    pub fn local_densities(&self) -> Vec<(f64, f64)> {
        (0..self.n_sites())
            .map(|i| {
                self.site_probabilities(i).iter().enumerate().fold((0.0, 0.0), |(n, s), (idx, p)| {
                    let (occ, sigma) = site_state(self.kind, idx);
                    (n + p * occ as f64, s + p * sigma as f64)
                })
            })
            .collect()
    }

    /// `<G_i>` for the two matter sites of the cell, using the link on the
    /// left (held by the previous fused site).
    pub fn gauss_expectations(&self) -> Vec<f64> {
        let n = self.n_sites();
        let d = self.phys_dim();
        (0..n)
            .map(|i| {
                let prev = (i + n - 1) % n;
                let p = self.pair_probabilities(prev);
                let mut g = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        let (_, left) = site_state(self.kind, a);
                        let (occ, right) = site_state(self.kind, b);
                        let value = match self.kind {
                            ModelKind::U1Qlm => occ as f64 - (i % 2 == 1) as u8 as f64 - 0.5 * (right - left) as f64,
                            ModelKind::Z2Lgt => (1.0 - 2.0 * occ as f64) * (left * right) as f64,
                            ModelKind::FreeFermion => 0.0,
                        };
                        g += p[a * d + b] * value;
                    }
                }
                g
            })
            .collect()
    }
}

/// The `chi = 1` state of a unit-cell-periodic product configuration.
///
/// The configuration may cover any whole number of unit cells as long as it
/// repeats with the cell period.
pub fn product_to_umps(config: &ProductStateConfig, kind: ModelKind) -> Result<UniformMps, UmpsError> {
    let l = config.occupations.len();
    if l == 0 || l % MATTER_PER_CELL != 0 {
        return Err(UmpsError::NotPeriodic(format!("{l} matter sites do not fill whole cells")));
    }
    if kind.has_links() && config.links.len() < l {
        return Err(UmpsError::NotPeriodic("every matter site needs a link on its right".into()));
    }
    for i in MATTER_PER_CELL..l {
        let k = i % MATTER_PER_CELL;
        if config.occupations[i] != config.occupations[k] || (kind.has_links() && config.links[i] != config.links[k]) {
            return Err(UmpsError::NotPeriodic(format!("site {i} differs from site {k} of the first cell")));
        }
    }
    let d = site_dim(kind);
    let tensors = (0..MATTER_PER_CELL)
        .map(|i| {
            let sigma = if kind.has_links() { config.links[i] } else { 1 };
            let idx = site_index(kind, config.occupations[i], sigma);
            (0..d).map(|s| Mat::from_fn(1, 1, |_, _| if s == idx { C64::new(1.0, 0.0) } else { czero() })).collect()
        })
        .collect();
    Ok(UniformMps { kind, tensors, schmidt: vec![vec![1.0]; MATTER_PER_CELL] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use lgtquench_core::model::{named_state, LatticeSpec, NamedState};

    #[test]
    fn product_state_is_canonical_and_local() {
        let cfg = named_state(NamedState::SlPlus, &LatticeSpec::infinite()).unwrap();
        let psi = product_to_umps(&cfg, ModelKind::Z2Lgt).unwrap();
        assert_eq!(psi.max_bond_dim(), 1);
        assert!(psi.right_canonical_residual() < 1e-15);
        assert_eq!(psi.local_densities(), vec![(0.0, -1.0), (1.0, 1.0)]);
    }

    #[test]
    fn gauss_values_of_named_states() {
        let lat = LatticeSpec::infinite();
        let fp = product_to_umps(&named_state(NamedState::FpPlus, &lat).unwrap(), ModelKind::Z2Lgt).unwrap();
        assert_eq!(fp.gauss_expectations(), vec![-1.0, 1.0]);
        let cp = product_to_umps(&named_state(NamedState::Cp, &lat).unwrap(), ModelKind::U1Qlm).unwrap();
        assert_eq!(cp.gauss_expectations(), vec![0.0, 0.0]);
    }

    #[test]
    fn aperiodic_configuration_is_rejected() {
        let cfg = ProductStateConfig::new(vec![1, 0, 0, 1], vec![1, 1, 1, 1]);
        assert!(matches!(product_to_umps(&cfg, ModelKind::Z2Lgt), Err(UmpsError::NotPeriodic(_))));
        let cfg = ProductStateConfig::new(vec![1, 0, 1, 0], vec![1, -1, 1, -1]);
        assert!(product_to_umps(&cfg, ModelKind::U1Qlm).is_ok());
    }
}
