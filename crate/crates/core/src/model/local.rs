//! Few-body operators on fused matter-link sites.
//!
//! Tensor-network backends group matter site `i` with the link on its right
//! into one local site of dimension 4 (2 for the matter-only chain). The
//! local basis index is `2 n + b` with `b = 1` for link sign `-1`. Every term
//! of the Hamiltonian then acts on at most two neighbouring fused sites.

use crate::C64;

use super::lattice::stagger;
use super::{ModelKind, ModelParams};

/// A dense square operator, row-major, `data[out * dim + in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalOp {
    pub dim: usize,
    pub data: Vec<C64>,
}

impl LocalOp {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![C64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut op = Self::zeros(dim);
        for i in 0..dim {
            op.data[i * dim + i] = C64::new(1.0, 0.0);
        }
        op
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut op = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            op.data[i * values.len() + i] = C64::new(v, 0.0);
        }
        op
    }

    pub fn get(&self, out: usize, inp: usize) -> C64 {
        self.data[out * self.dim + inp]
    }

    pub fn set(&mut self, out: usize, inp: usize, v: C64) {
        self.data[out * self.dim + inp] = v;
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self { dim: self.dim, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() }
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        let mut out = Self::zeros(d);
        for r in 0..d {
            for c in 0..d {
                out.data[c * d + r] = self.data[r * d + c].conj();
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let d = self.dim;
        assert_eq!(d, other.dim);
        let mut out = Self::zeros(d);
        for r in 0..d {
            for m in 0..d {
                let a = self.data[r * d + m];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..d {
                    out.data[r * d + c] += a * other.data[m * d + c];
                }
            }
        }
        out
    }

    /// `self (x) other`, with `self` on the more significant index.
    pub fn kron(&self, other: &Self) -> Self {
        let (a, b) = (self.dim, other.dim);
        let d = a * b;
        let mut out = Self::zeros(d);
        for r1 in 0..a {
            for c1 in 0..a {
                let x = self.data[r1 * a + c1];
                if x == C64::new(0.0, 0.0) {
                    continue;
                }
                for r2 in 0..b {
                    for c2 in 0..b {
                        out.data[(r1 * b + r2) * d + c1 * b + c2] = x * other.data[r2 * b + c2];
                    }
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }
}

/// Dimension of a fused site.
pub fn site_dim(kind: ModelKind) -> usize {
    if kind.has_links() {
        4
    } else {
        2
    }
}

/// Local basis index of occupation `n` and link sign `sigma`.
pub fn site_index(kind: ModelKind, n: u8, sigma: i8) -> usize {
    if kind.has_links() {
        2 * n as usize + (sigma < 0) as usize
    } else {
        n as usize
    }
}

/// `(n, sigma)` of a local basis index (`sigma = 1` without links).
pub fn site_state(kind: ModelKind, index: usize) -> (u8, i8) {
    if kind.has_links() {
        ((index / 2) as u8, if index % 2 == 1 { -1 } else { 1 })
    } else {
        (index as u8, 1)
    }
}

fn for_states(kind: ModelKind, f: impl Fn(u8, i8) -> f64) -> LocalOp {
    let d = site_dim(kind);
    LocalOp::diagonal(&(0..d).map(|s| {
        let (n, sigma) = site_state(kind, s);
        f(n, sigma)
    }).collect::<Vec<_>>())
}

/// Matter occupation `n`.
pub fn number(kind: ModelKind) -> LocalOp {
    for_states(kind, |n, _| n as f64)
}

/// Link sign `sigma` (`tau^x`, or `2 s^z`).
pub fn link_sign(kind: ModelKind) -> LocalOp {
    for_states(kind, |_, s| s as f64)
}

/// Diagonal single-site energy of a fused site whose matter index has
/// parity `parity` (0 for odd 1-based sites).
pub fn onsite(params: &ModelParams, parity: usize) -> LocalOp {
    let (mu, h, delta) = (params.effective_mu(), params.effective_h(), params.effective_delta());
    let bias = if parity % 2 == 0 { delta } else { 0.0 };
    for_states(params.kind, |n, s| mu * stagger(parity) * n as f64 - h * s as f64 + 0.5 * bias * s as f64)
}

/// The two left factors `(A, A')` of the hopping term
/// `A (x) c + A' (x) c^dag` across the link of the left fused site.
///
/// `A` creates a particle on the left site and acts on its right link
/// (`tau^z` or `s^+`), `A'` annihilates it (`tau^z` or `s^-`).
pub fn hop_left(kind: ModelKind) -> (LocalOp, LocalOp) {
    let d = site_dim(kind);
    let mut create = LocalOp::zeros(d);
    let mut destroy = LocalOp::zeros(d);
    let one = C64::new(1.0, 0.0);
    match kind {
        ModelKind::FreeFermion => {
            create.set(1, 0, one);
            destroy.set(0, 1, one);
        }
        ModelKind::Z2Lgt => {
            for sigma in [1, -1] {
                create.set(site_index(kind, 1, -sigma), site_index(kind, 0, sigma), one);
                destroy.set(site_index(kind, 0, -sigma), site_index(kind, 1, sigma), one);
            }
        }
        ModelKind::U1Qlm => {
            create.set(site_index(kind, 1, 1), site_index(kind, 0, -1), one);
            destroy.set(site_index(kind, 0, -1), site_index(kind, 1, 1), one);
        }
    }
    (create, destroy)
}

/// Right factors `(c, c^dag)` of the hopping term.
pub fn hop_right(kind: ModelKind) -> (LocalOp, LocalOp) {
    let d = site_dim(kind);
    let mut c = LocalOp::zeros(d);
    let one = C64::new(1.0, 0.0);
    let links: &[i8] = if kind.has_links() { &[1, -1] } else { &[1] };
    for &sigma in links {
        c.set(site_index(kind, 0, sigma), site_index(kind, 1, sigma), one);
    }
    let cdag = c.adjoint();
    (c, cdag)
}

/// Two-site Hamiltonian on fused sites `(i, i + 1)` with `i % 2 == parity`:
/// the hop across link `i` plus the single-site energy of site `i`.
///
/// Summing this over all `i` reproduces the full Hamiltonian once.
pub fn bond_hamiltonian(params: &ModelParams, parity: usize) -> LocalOp {
    let kind = params.kind;
    let (a, a2) = hop_left(kind);
    let (c, cdag) = hop_right(kind);
    let hop = a.kron(&c).add(&a2.kron(&cdag)).scaled(-params.j);
    hop.add(&onsite(params, parity).kron(&LocalOp::identity(site_dim(kind))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_hamiltonian, Basis, LatticeSpec};

    /// Embeds the fused-site bond terms into a periodic chain of `l` matter
    /// sites and compares with the sparse Hamiltonian.
    fn assemble(params: &ModelParams, l: usize) -> Vec<Vec<C64>> {
        let kind = params.kind;
        let d = site_dim(kind);
        let dim = d.pow(l as u32);
        let mut out = vec![vec![C64::new(0.0, 0.0); dim]; dim];
        for i in 0..l {
            let h = bond_hamiltonian(params, i % 2);
            let j = (i + 1) % l;
            for s in 0..dim {
                let digit = |x: usize, site: usize| (x / d.pow((l - 1 - site) as u32)) % d;
                let (si, sj) = (digit(s, i), digit(s, j));
                for oi in 0..d {
                    for oj in 0..d {
                        let v = h.get(oi * d + oj, si * d + sj);
                        if v == C64::new(0.0, 0.0) {
                            continue;
                        }
                        let t = s - si * d.pow((l - 1 - i) as u32) - sj * d.pow((l - 1 - j) as u32)
                            + oi * d.pow((l - 1 - i) as u32)
                            + oj * d.pow((l - 1 - j) as u32);
                        out[t][s] += v;
                    }
                }
            }
        }
        out
    }

    /// Fused-site index of a basis key: digit `i` is `(n_i, sigma_i)`.
    fn fused_index(basis: &Basis, key: u64) -> usize {
        let kind = basis.kind();
        let l = basis.lattice().n_matter;
        (0..l).fold(0, |acc, i| {
            let sigma = if kind.has_links() { basis.link_sign(key, i) } else { 1 };
            acc * site_dim(kind) + site_index(kind, basis.occupation(key, i), sigma)
        })
    }

    #[test]
    fn bond_terms_reassemble_the_ring_hamiltonian() {
        let lat = LatticeSpec::periodic(4).unwrap();
        for params in [
            ModelParams::z2(0.8, 0.6, -0.3),
            ModelParams::free_fermion(1.3),
            ModelParams::u1_qlm(0.9, 1.7),
        ] {
            let basis = Basis::full(&lat, params.kind).unwrap();
            let h = build_hamiltonian(&params, &basis).unwrap();
            let dense = assemble(&params, 4);
            for (r, c, v) in h.entries() {
                let (fr, fc) = (fused_index(&basis, basis.keys()[r]), fused_index(&basis, basis.keys()[c]));
                assert!((dense[fr][fc] - v).norm() < 1e-14, "{}", params.kind);
            }
            let nnz_dense = dense.iter().flatten().filter(|x| x.norm() > 1e-13).count();
            assert_eq!(nnz_dense, h.entries().filter(|e| e.2.norm() > 1e-13).count(), "{}", params.kind);
        }
    }

    #[test]
    fn bond_hamiltonian_is_hermitian() {
        for p in [ModelParams::z2(1.0, 0.3, 0.2), ModelParams::u1_qlm(1.0, 0.5)] {
            for parity in 0..2 {
                let h = bond_hamiltonian(&p, parity);
                assert!(h.add(&h.adjoint().scaled(-1.0)).max_abs() < 1e-15);
            }
        }
    }
}
