use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::lattice::{stagger, LatticeSpec};
use super::sector::check_layout;
use super::{named_state, ModelError, ModelKind, ModelParams, NamedState, ProductStateConfig};

/// Diagonal energy `<config| H_mu + H_h (+ H_delta) |config>` per two-site
/// unit cell. Hopping is off-diagonal and does not contribute.
pub fn classical_energy(config: &ProductStateConfig, params: &ModelParams) -> f64 {
    let l = config.occupations.len();
    let mass: f64 = config.occupations.iter().enumerate().map(|(i, &n)| stagger(i) * n as f64).sum();
    let field: f64 = config.links.iter().map(|&s| s as f64).sum();
    let bias: f64 = config.links.iter().step_by(2).map(|&s| 0.5 * s as f64).sum();
    let total = params.effective_mu() * mass - params.effective_h() * field + params.effective_delta() * bias;
    total / (l as f64 / 2.0)
}

/// Applies one gauge-invariant hop across bond `(k, a, b)`, or `None` when
/// the hop is blocked.
pub fn hop(config: &ProductStateConfig, kind: ModelKind, (k, a, b): (usize, usize, usize)) -> Option<ProductStateConfig> {
    let (na, nb) = (config.occupations[a], config.occupations[b]);
    if na == nb {
        return None;
    }
    let mut out = config.clone().unnamed();
    out.occupations[a] = nb;
    out.occupations[b] = na;
    match kind {
        ModelKind::FreeFermion => {}
        ModelKind::Z2Lgt => out.links[k] = -out.links[k],
        ModelKind::U1Qlm => {
            let sigma = config.links[k];
            // b -> a raises the link, a -> b lowers it
            if (nb == 1 && sigma != -1) || (na == 1 && sigma != 1) {
                return None;
            }
            out.links[k] = -sigma;
        }
    }
    Some(out)
}

/// Configurations reached from `config` by hopping once across every bond
/// of one parity class, i.e. by the same hop in every unit cell.
///
/// Results carry a name when they coincide with a named state.
pub fn transitional_manifold(
    config: &ProductStateConfig,
    lattice: &LatticeSpec,
    kind: ModelKind,
) -> Result<Vec<ProductStateConfig>, ModelError> {
    check_layout(config, lattice)?;
    if kind.has_links() && config.links.len() != lattice.n_links() {
        return Err(ModelError::ConfigMismatch("links are required for a gauge theory".into()));
    }
    let bonds = lattice.bonds();
    let mut out = Vec::new();
    for parity in 0..2 {
        let mut current = Some(config.clone().unnamed());
        for &bond in bonds.iter().filter(|(k, _, _)| k % 2 == parity) {
            current = current.and_then(|c| hop(&c, kind, bond));
        }
        if let Some(mut c) = current {
            c.name = NamedState::ALL
                .into_iter()
                .find(|&n| named_state(n, lattice).is_ok_and(|s| s.occupations == c.occupations && s.links == c.links));
            if !out.contains(&c) {
                out.push(c);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Classical energies of the named states and the resonance they imply.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceReport {
    pub kind: ModelKind,
    /// Energy per unit cell of each named state native to `kind`.
    pub energies: BTreeMap<String, f64>,
    /// For the Z2 theory: the fp state degenerate with both sl states, if any.
    /// For the link model: the vacuum degenerate with CP, if exactly one is.
    pub resonant: Option<NamedState>,
    /// Named states degenerate with the first state of each initial manifold
    /// (fp-, fp+ for Z2; CP for the link model).
    pub degenerate_pairs: Vec<(NamedState, NamedState)>,
}

/// Determines from classical energies which named states are resonant.
pub fn resonance_report(params: &ModelParams, tol: f64) -> ResonanceReport {
    let lat = LatticeSpec::infinite();
    let energy = |n: NamedState| classical_energy(&named_state(n, &lat).expect("infinite cell"), params);
    let natives: Vec<NamedState> = match params.kind {
        ModelKind::U1Qlm => vec![NamedState::Cp, NamedState::VacPlus, NamedState::VacMinus],
        _ => vec![NamedState::FpPlus, NamedState::FpMinus, NamedState::SlPlus, NamedState::SlMinus],
    };
    let energies: BTreeMap<String, f64> = natives.iter().map(|&n| (n.to_string(), energy(n))).collect();
    let close = |a: NamedState, b: NamedState| (energy(a) - energy(b)).abs() <= tol;
    let mut pairs = Vec::new();
    for (x, &a) in natives.iter().enumerate() {
        for &b in &natives[x + 1..] {
            if close(a, b) {
                pairs.push((a, b));
            }
        }
    }
    let resonant = match params.kind {
        ModelKind::U1Qlm => {
            let vac: Vec<_> = [NamedState::VacPlus, NamedState::VacMinus]
                .into_iter()
                .filter(|&v| close(NamedState::Cp, v))
                .collect();
            (vac.len() == 1).then(|| vac[0])
        }
        _ => {
            let fp: Vec<_> = [NamedState::FpPlus, NamedState::FpMinus]
                .into_iter()
                .filter(|&f| close(f, NamedState::SlPlus) && close(f, NamedState::SlMinus))
                .collect();
            (fp.len() == 1).then(|| fp[0])
        }
    };
    ResonanceReport { kind: params.kind, energies, resonant, degenerate_pairs: pairs }
}
