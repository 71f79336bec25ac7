use lgtquench_core::model::local::{hop_left, hop_right, onsite, site_dim, LocalOp};
use lgtquench_core::model::{ModelParams, MATTER_PER_CELL};

use crate::state::UniformMps;

/// MPO bond dimension: identity, the two open hopping channels, and the
/// finished-term channel.
pub const MPO_BOND: usize = 4;

/// The Hamiltonian as a lower-triangular MPO over the fused sites of one
/// cell.
///
/// `sites[i][a][b]` is the operator between MPO bond states `a` (left) and
/// `b` (right). State 3 carries "term not started", state 0 "term finished".
#[derive(Clone, Debug, PartialEq)]
pub struct Mpo {
    pub sites: Vec<Vec<Vec<LocalOp>>>,
}

impl Mpo {
    pub fn new(params: &ModelParams) -> Self {
        let kind = params.kind;
        let d = site_dim(kind);
        let (create, destroy) = hop_left(kind);
        let (c, cdag) = hop_right(kind);
        let sites = (0..MATTER_PER_CELL)
            .map(|parity| {
                let mut w = vec![vec![LocalOp::zeros(d); MPO_BOND]; MPO_BOND];
                w[0][0] = LocalOp::identity(d);
                w[1][0] = c.clone();
                w[2][0] = cdag.clone();
                w[3][0] = onsite(params, parity);
                w[3][1] = create.scaled(-params.j);
                w[3][2] = destroy.scaled(-params.j);
                w[3][3] = LocalOp::identity(d);
                w
            })
            .collect();
        Self { sites }
    }

    /// The two-site operator collecting all terms that start on `site`.
    pub fn bond_operator(&self, site: usize) -> LocalOp {
        let n = self.sites.len();
        let (w, next) = (&self.sites[site], &self.sites[(site + 1) % n]);
        let d = w[0][0].dim;
        let mut op = w[3][0].kron(&LocalOp::identity(d));
        for k in 1..MPO_BOND - 1 {
            op = op.add(&w[3][k].kron(&next[k][0]));
        }
        op
    }

    /// Energy per unit cell.
    pub fn expectation_per_cell(&self, psi: &UniformMps) -> f64 {
        (0..self.sites.len()).map(|i| psi.two_site_expectation(i, &self.bond_operator(i)).re).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::product_to_umps;
    use lgtquench_core::model::local::bond_hamiltonian;
    use lgtquench_core::model::{classical_energy, named_state, LatticeSpec, NamedState};

    #[test]
    fn product_state_energy_is_classical() {
        let lat = LatticeSpec::infinite();
        for (p, names) in [
            (ModelParams::z2(1.0, 0.7, 1.3), &[NamedState::FpPlus, NamedState::FpMinus, NamedState::SlPlus, NamedState::SlMinus][..]),
            (ModelParams::u1_qlm(1.0, 2.5), &[NamedState::Cp, NamedState::VacPlus, NamedState::VacMinus][..]),
        ] {
            let mpo = Mpo::new(&p);
            for &name in names {
                let cfg = named_state(name, &lat).unwrap();
                let psi = product_to_umps(&cfg, p.kind).unwrap();
                let e = mpo.expectation_per_cell(&psi);
                assert!((e - classical_energy(&cfg, &p)).abs() < 1e-14, "{name}: {e}");
            }
        }
    }

    #[test]
    fn bond_operators_match_the_bond_hamiltonian() {
        let p = ModelParams::z2(0.9, -0.4, 0.6);
        let mpo = Mpo::new(&p);
        for parity in 0..2 {
            let diff = mpo.bond_operator(parity).add(&bond_hamiltonian(&p, parity).scaled(-1.0));
            assert!(diff.max_abs() < 1e-15);
        }
    }
}
