use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::lattice::{Boundary, LatticeSpec};
use super::{ModelError, ModelKind};

/// The seven named product states.
///
/// Unit cell `|n_1, sigma_{12}, n_2, sigma_{23}>` with 1-based matter labels
/// (odd sites favoured by a positive staggered mass):
///
/// | name  | n_1 | link 1-2 | n_2 | link 2-3 | theory |
/// |-------|-----|----------|-----|----------|--------|
/// | fp+   | 1   | +1       | 0   | +1       | Z2     |
/// | fp-   | 1   | -1       | 0   | -1       | Z2     |
/// | sl+   | 0   | -1       | 1   | +1       | Z2     |
/// | sl-   | 0   | +1       | 1   | -1       | Z2     |
/// | CP    | 1   | +1/2     | 0   | -1/2     | QLM    |
/// | vac+  | 0   | +1/2     | 1   | +1/2     | QLM    |
/// | vac-  | 0   | -1/2     | 1   | -1/2     | QLM    |
///
/// Z2 link entries are `tau^x` eigenvalues, QLM entries are `s^z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NamedState {
    #[serde(rename = "fp+")]
    FpPlus,
    #[serde(rename = "fp-")]
    FpMinus,
    #[serde(rename = "sl+")]
    SlPlus,
    #[serde(rename = "sl-")]
    SlMinus,
    #[serde(rename = "CP")]
    Cp,
    #[serde(rename = "vac+")]
    VacPlus,
    #[serde(rename = "vac-")]
    VacMinus,
}

impl NamedState {
    pub const ALL: [NamedState; 7] = [
        NamedState::FpPlus,
        NamedState::FpMinus,
        NamedState::SlPlus,
        NamedState::SlMinus,
        NamedState::Cp,
        NamedState::VacPlus,
        NamedState::VacMinus,
    ];

    /// The theory whose Gauss law this state is written for.
    pub fn native_kind(self) -> ModelKind {
        match self {
            NamedState::Cp | NamedState::VacPlus | NamedState::VacMinus => ModelKind::U1Qlm,
            _ => ModelKind::Z2Lgt,
        }
    }

    /// The degenerate partner with all links reversed, if it exists.
    pub fn partner(self) -> Option<NamedState> {
        match self {
            NamedState::FpPlus => Some(NamedState::FpMinus),
            NamedState::FpMinus => Some(NamedState::FpPlus),
            NamedState::SlPlus => Some(NamedState::SlMinus),
            NamedState::SlMinus => Some(NamedState::SlPlus),
            NamedState::VacPlus => Some(NamedState::VacMinus),
            NamedState::VacMinus => Some(NamedState::VacPlus),
            NamedState::Cp => None,
        }
    }

    /// Sign that makes the staggered particle-number difference `+1` in this
    /// state.
    pub fn nd_sign(self) -> f64 {
        match self {
            NamedState::FpPlus | NamedState::FpMinus | NamedState::Cp => 1.0,
            _ => -1.0,
        }
    }

    /// Occupation of 0-based matter site `i`.
    fn occupation(self, i: usize) -> u8 {
        let odd_site = i % 2 == 0;
        match self {
            NamedState::FpPlus | NamedState::FpMinus | NamedState::Cp => odd_site as u8,
            _ => (!odd_site) as u8,
        }
    }

    /// Link sign on 0-based link `k`.
    fn link(self, k: usize) -> i8 {
        let even_k = k % 2 == 0;
        match self {
            NamedState::FpPlus | NamedState::VacPlus => 1,
            NamedState::FpMinus | NamedState::VacMinus => -1,
            NamedState::SlPlus => {
                if even_k {
                    -1
                } else {
                    1
                }
            }
            NamedState::SlMinus | NamedState::Cp => {
                if even_k {
                    1
                } else {
                    -1
                }
            }
        }
    }
}

impl fmt::Display for NamedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NamedState::FpPlus => "fp+",
            NamedState::FpMinus => "fp-",
            NamedState::SlPlus => "sl+",
            NamedState::SlMinus => "sl-",
            NamedState::Cp => "CP",
            NamedState::VacPlus => "vac+",
            NamedState::VacMinus => "vac-",
        })
    }
}

impl FromStr for NamedState {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NamedState::ALL
            .into_iter()
            .find(|n| n.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModelError::UnknownState(s.to_string()))
    }
}

/// A product configuration of matter occupations and link signs.
///
/// `links[k]` is the sign on link `k`; the vector is empty for matter-only
/// chains. For an infinite lattice the configuration is one unit cell.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProductStateConfig {
    pub occupations: Vec<u8>,
    pub links: Vec<i8>,
    pub name: Option<NamedState>,
}

impl ProductStateConfig {
    pub fn new(occupations: Vec<u8>, links: Vec<i8>) -> Self {
        Self { occupations, links, name: None }
    }

    pub fn n_particles(&self) -> usize {
        self.occupations.iter().map(|&n| n as usize).sum()
    }

    /// Drops the link degrees of freedom (free-fermion projection).
    pub fn matter_only(&self) -> Self {
        Self { occupations: self.occupations.clone(), links: Vec::new(), name: self.name }
    }

    /// The same configuration with the name cleared.
    pub fn unnamed(mut self) -> Self {
        self.name = None;
        self
    }
}

impl fmt::Display for ProductStateConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(n) = self.name {
            write!(f, "{n} ")?;
        }
        f.write_str("|")?;
        for (i, n) in self.occupations.iter().enumerate() {
            write!(f, "{n}")?;
            if let Some(s) = self.links.get(i) {
                f.write_str(if *s > 0 { "+" } else { "-" })?;
            }
        }
        f.write_str(">")
    }
}

/// Builds a named product state on `lattice`.
///
/// The lattice must be even (enforced by [`LatticeSpec`]); the number of
/// links follows the boundary condition.
pub fn named_state(name: NamedState, lattice: &LatticeSpec) -> Result<ProductStateConfig, ModelError> {
    let l = lattice.n_matter;
    if l % 2 != 0 {
        return Err(ModelError::OddLattice(l));
    }
    let n_links = match lattice.boundary {
        Boundary::Open => l - 1,
        Boundary::Periodic | Boundary::Infinite => l,
    };
    Ok(ProductStateConfig {
        occupations: (0..l).map(|i| name.occupation(i)).collect(),
        links: (0..n_links).map(|k| name.link(k)).collect(),
        name: Some(name),
    })
}

/// Parses and builds a named state in one step.
pub fn named_state_str(name: &str, lattice: &LatticeSpec) -> Result<ProductStateConfig, ModelError> {
    named_state(name.parse()?, lattice)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fp_plus_has_odd_sites_occupied_and_positive_links() {
        let s = named_state(NamedState::FpPlus, &LatticeSpec::open(4).unwrap()).unwrap();
        assert_eq!(s.occupations, vec![1, 0, 1, 0]);
        assert_eq!(s.links, vec![1, 1, 1]);
    }

    #[test]
    fn vac_plus_cell_matches_convention() {
        let s = named_state(NamedState::VacPlus, &LatticeSpec::infinite()).unwrap();
        assert_eq!(s.occupations, vec![0, 1]);
        assert_eq!(s.links, vec![1, 1]);
        let cp = named_state(NamedState::Cp, &LatticeSpec::infinite()).unwrap();
        assert_eq!(cp.occupations, vec![1, 0]);
        assert_eq!(cp.links, vec![1, -1]);
    }

    #[test]
    fn partners_differ_only_in_links() {
        let lat = LatticeSpec::periodic(6).unwrap();
        for name in [NamedState::FpPlus, NamedState::SlPlus, NamedState::VacPlus] {
            let a = named_state(name, &lat).unwrap();
            let b = named_state(name.partner().unwrap(), &lat).unwrap();
            assert_eq!(a.occupations, b.occupations);
            assert!(a.links.iter().zip(&b.links).all(|(x, y)| x == &-y));
        }
    }

    #[test]
    fn all_named_states_are_half_filled() {
        let lat = LatticeSpec::periodic(8).unwrap();
        for name in NamedState::ALL {
            assert_eq!(named_state(name, &lat).unwrap().n_particles(), 4, "{name}");
        }
    }

    #[test]
    fn names_round_trip_and_unknown_names_fail() {
        for name in NamedState::ALL {
            assert_eq!(name.to_string().parse::<NamedState>().unwrap(), name);
        }
        assert!(matches!("fp0".parse::<NamedState>(), Err(ModelError::UnknownState(_))));
    }
}
