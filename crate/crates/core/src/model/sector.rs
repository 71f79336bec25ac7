use serde::{Deserialize, Serialize};

use super::lattice::LatticeSpec;
use super::{ModelError, ModelKind, ProductStateConfig};

/// Sign of the frozen boundary links of an open chain (`tau^x = +1`, which is
/// `s^z = +1/2` after the link-model mapping on an even chain).
pub const VIRTUAL_LINK: i8 = 1;

/// Eigenvalues of the Gauss-law generators on every matter site.
///
/// For the Z2 theory the values are `+-1`; for the U(1) link model they are
/// the integer charges `G_j`, zero in the physical sector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GaugeSector {
    pub kind: ModelKind,
    pub values: Vec<i8>,
}

impl GaugeSector {
    /// `g_j = -1` on odd and `+1` on even sites (Z2), or `G_j = 0` (U(1)).
    pub fn reference(lattice: &LatticeSpec, kind: ModelKind) -> Result<Self, ModelError> {
        let l = lattice.n_matter;
        let values = match kind {
            ModelKind::Z2Lgt => (0..l).map(|i| if i % 2 == 0 { -1 } else { 1 }).collect(),
            ModelKind::U1Qlm => vec![0; l],
            ModelKind::FreeFermion => {
                return Err(ModelError::InvalidSector("a matter-only chain has no Gauss law".into()))
            }
        };
        Ok(Self { kind, values })
    }

    /// The sector in which `config` lies.
    pub fn containing(config: &ProductStateConfig, lattice: &LatticeSpec, kind: ModelKind) -> Result<Self, ModelError> {
        check_layout(config, lattice)?;
        let values = (0..lattice.n_matter)
            .map(|i| match kind {
                ModelKind::Z2Lgt => Ok(gauss_value_z2(config, lattice, i)),
                ModelKind::U1Qlm => Ok(gauss_value_u1(config, lattice, i)),
                ModelKind::FreeFermion => Err(ModelError::InvalidSector("a matter-only chain has no Gauss law".into())),
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { kind, values })
    }

    pub fn contains(&self, config: &ProductStateConfig, lattice: &LatticeSpec) -> bool {
        GaugeSector::containing(config, lattice, self.kind).map(|s| s == *self).unwrap_or(false)
    }
}

pub(crate) fn check_layout(config: &ProductStateConfig, lattice: &LatticeSpec) -> Result<(), ModelError> {
    if config.occupations.len() != lattice.n_matter {
        return Err(ModelError::ConfigMismatch(format!(
            "{} occupations for {} matter sites",
            config.occupations.len(),
            lattice.n_matter
        )));
    }
    if !config.links.is_empty() && config.links.len() != lattice.n_links() {
        return Err(ModelError::ConfigMismatch(format!(
            "{} links for a lattice with {}",
            config.links.len(),
            lattice.n_links()
        )));
    }
    Ok(())
}

fn neighbour_links(config: &ProductStateConfig, lattice: &LatticeSpec, i: usize) -> (i8, i8) {
    let left = lattice.left_link(i).map_or(VIRTUAL_LINK, |k| config.links[k]);
    let right = lattice.right_link(i).map_or(VIRTUAL_LINK, |k| config.links[k]);
    (left, right)
}

/// `G_j = exp(i pi n_j) tau^x_{j-1,j} tau^x_{j,j+1}` evaluated on a product
/// configuration.
pub fn gauss_value_z2(config: &ProductStateConfig, lattice: &LatticeSpec, i: usize) -> i8 {
    let (l, r) = neighbour_links(config, lattice, i);
    let parity = if config.occupations[i] == 1 { -1 } else { 1 };
    parity * l * r
}

/// `G_j = n_j - b_j - (s^z_{j,j+1} - s^z_{j-1,j})` with background
/// `b_j = 1` on even 1-based sites.
pub fn gauss_value_u1(config: &ProductStateConfig, lattice: &LatticeSpec, i: usize) -> i8 {
    let (l, r) = neighbour_links(config, lattice, i);
    let background = (i % 2 == 1) as i8;
    config.occupations[i] as i8 - background - (r - l) / 2
}
