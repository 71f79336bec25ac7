use super::lattice::{Boundary, LatticeSpec};
use super::sector::{check_layout, VIRTUAL_LINK};
use super::{GaugeSector, ModelError, ModelKind, ProductStateConfig};

/// An enumerated set of product configurations.
///
/// States are packed into `u64` keys: occupation bits (site 1 most
/// significant) above link bits (link 1-2 most significant), with bit value 1
/// for an occupied site or a link of sign `-1`. Keys are kept sorted, which is
/// lexicographic order over `(occupations, links)`, matter-major; matrix
/// indices are positions in this order.
#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    lattice: LatticeSpec,
    kind: ModelKind,
    n_links: usize,
    keys: Vec<u64>,
    sector: Option<GaugeSector>,
    particle_number: Option<usize>,
}

impl Basis {
    /// Every configuration of the chain, without any constraint.
    pub fn full(lattice: &LatticeSpec, kind: ModelKind) -> Result<Self, ModelError> {
        check_finite(lattice)?;
        let n_links = if kind.has_links() { lattice.n_links() } else { 0 };
        let bits = lattice.n_matter + n_links;
        Ok(Self {
            lattice: *lattice,
            kind,
            n_links,
            keys: (0..1u64 << bits).collect(),
            sector: None,
            particle_number: None,
        })
    }

    /// Matter configurations of a chain without links, optionally at fixed
    /// particle number.
    pub fn matter(lattice: &LatticeSpec, particle_number: Option<usize>) -> Result<Self, ModelError> {
        check_finite(lattice)?;
        let l = lattice.n_matter;
        let keys = (0..1u64 << l)
            .filter(|k| particle_number.is_none_or(|n| k.count_ones() as usize == n))
            .collect();
        Ok(Self {
            lattice: *lattice,
            kind: ModelKind::FreeFermion,
            n_links: 0,
            keys,
            sector: None,
            particle_number,
        })
    }

    /// All product states obeying the Gauss law of `sector`, optionally at
    /// fixed particle number.
    ///
    /// Links are fixed site by site from the left, so the enumeration costs
    /// `O(2^L)` rather than `O(2^(L + links))`.
    pub fn gauge_sector(
        lattice: &LatticeSpec,
        sector: &GaugeSector,
        particle_number: Option<usize>,
    ) -> Result<Self, ModelError> {
        check_finite(lattice)?;
        let l = lattice.n_matter;
        if sector.values.len() != l {
            return Err(ModelError::InvalidSector(format!("{} Gauss values for {l} sites", sector.values.len())));
        }
        let n_links = lattice.n_links();
        let closing: &[i8] = match lattice.boundary {
            Boundary::Open => &[VIRTUAL_LINK],
            _ => &[1, -1],
        };
        let mut keys = Vec::new();
        let mut links = vec![0i8; n_links];
        for occ in 0..1u64 << l {
            if particle_number.is_some_and(|n| occ.count_ones() as usize != n) {
                continue;
            }
            let n = |i: usize| ((occ >> (l - 1 - i)) & 1) as i8;
            for &start in closing {
                // `start` is the link on the left of site 0.
                let mut left = start;
                let mut ok = true;
                for i in 0..l {
                    let right = match sector.kind {
                        ModelKind::Z2Lgt => {
                            let parity = if n(i) == 1 { -1 } else { 1 };
                            sector.values[i] * parity * left
                        }
                        ModelKind::U1Qlm => {
                            let background = (i % 2 == 1) as i8;
                            left + 2 * (n(i) - background - sector.values[i])
                        }
                        ModelKind::FreeFermion => unreachable!("sectors carry a gauge kind"),
                    };
                    if right != 1 && right != -1 {
                        ok = false;
                        break;
                    }
                    if i + 1 < l || lattice.boundary != Boundary::Open {
                        if i + 1 == l {
                            // ring closes on the link we started from
                            ok = right == start;
                        } else {
                            links[i] = right;
                        }
                    } else {
                        ok = right == VIRTUAL_LINK;
                    }
                    left = right;
                }
                if ok {
                    if lattice.boundary != Boundary::Open {
                        links[l - 1] = start;
                    }
                    keys.push(pack(occ, &links));
                }
            }
        }
        if keys.is_empty() {
            return Err(ModelError::EmptySector);
        }
        keys.sort_unstable();
        keys.dedup();
        Ok(Self {
            lattice: *lattice,
            kind: sector.kind,
            n_links,
            keys,
            sector: Some(sector.clone()),
            particle_number,
        })
    }

    /// Reference gauge sector of `kind` (or all matter states for the free
    /// fermion chain).
    pub fn reference(lattice: &LatticeSpec, kind: ModelKind, particle_number: Option<usize>) -> Result<Self, ModelError> {
        match kind {
            ModelKind::FreeFermion => Self::matter(lattice, particle_number),
            _ => Self::gauge_sector(lattice, &GaugeSector::reference(lattice, kind)?, particle_number),
        }
    }

    /// The gauge sector containing `config`, at its particle number.
    pub fn containing(config: &ProductStateConfig, lattice: &LatticeSpec, kind: ModelKind) -> Result<Self, ModelError> {
        let n = Some(config.n_particles());
        match kind {
            ModelKind::FreeFermion => Self::matter(lattice, n),
            _ => Self::gauge_sector(lattice, &GaugeSector::containing(config, lattice, kind)?, n),
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn n_links(&self) -> usize {
        self.n_links
    }

    pub fn sector(&self) -> Option<&GaugeSector> {
        self.sector.as_ref()
    }

    pub fn particle_number(&self) -> Option<usize> {
        self.particle_number
    }

    pub fn keys(&self) -> &[u64] {
        &self.keys
    }

    pub fn index_of_key(&self, key: u64) -> Option<usize> {
        self.keys.binary_search(&key).ok()
    }

    pub fn index_of(&self, config: &ProductStateConfig) -> Option<usize> {
        self.key_of(config).ok().and_then(|k| self.index_of_key(k))
    }

    pub fn key_of(&self, config: &ProductStateConfig) -> Result<u64, ModelError> {
        check_layout(config, &self.lattice)?;
        if config.links.len() != self.n_links {
            return Err(ModelError::ConfigMismatch(format!(
                "{} links for a basis with {}",
                config.links.len(),
                self.n_links
            )));
        }
        let l = self.lattice.n_matter;
        let occ = config.occupations.iter().enumerate().fold(0u64, |acc, (i, &n)| acc | ((n as u64 & 1) << (l - 1 - i)));
        Ok(pack(occ, &config.links))
    }

    /// Occupation of matter site `i` in basis state `key`.
    pub fn occupation(&self, key: u64, i: usize) -> u8 {
        ((key >> (self.n_links + self.lattice.n_matter - 1 - i)) & 1) as u8
    }

    /// Sign of link `k` in basis state `key`.
    pub fn link_sign(&self, key: u64, k: usize) -> i8 {
        if (key >> (self.n_links - 1 - k)) & 1 == 1 {
            -1
        } else {
            1
        }
    }

    pub fn config(&self, index: usize) -> ProductStateConfig {
        let key = self.keys[index];
        ProductStateConfig::new(
            (0..self.lattice.n_matter).map(|i| self.occupation(key, i)).collect(),
            (0..self.n_links).map(|k| self.link_sign(key, k)).collect(),
        )
    }

    /// Key with matter site `i` toggled.
    pub(crate) fn toggle_site(&self, key: u64, i: usize) -> u64 {
        key ^ (1 << (self.n_links + self.lattice.n_matter - 1 - i))
    }

    /// Key with link `k` flipped.
    pub(crate) fn flip_link(&self, key: u64, k: usize) -> u64 {
        key ^ (1 << (self.n_links - 1 - k))
    }
}

fn pack(occ: u64, links: &[i8]) -> u64 {
    let link_bits = links.iter().fold(0u64, |acc, &s| (acc << 1) | (s < 0) as u64);
    (occ << links.len()) | link_bits
}

fn check_finite(lattice: &LatticeSpec) -> Result<(), ModelError> {
    if lattice.boundary == Boundary::Infinite {
        return Err(ModelError::ConfigMismatch("an infinite lattice has no finite basis".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gauss_value_u1, gauss_value_z2, named_state, NamedState};

    fn brute_force_count(lattice: &LatticeSpec, sector: &GaugeSector) -> usize {
        let full = Basis::full(lattice, sector.kind).unwrap();
        (0..full.len())
            .filter(|&idx| {
                let c = full.config(idx);
                (0..lattice.n_matter).all(|i| {
                    let g = match sector.kind {
                        ModelKind::Z2Lgt => gauss_value_z2(&c, lattice, i),
                        _ => gauss_value_u1(&c, lattice, i),
                    };
                    g == sector.values[i]
                })
            })
            .count()
    }

    #[test]
    fn full_basis_has_two_to_the_sites() {
        let lat = LatticeSpec::open(4).unwrap();
        assert_eq!(Basis::full(&lat, ModelKind::Z2Lgt).unwrap().len(), 1 << 7);
        assert_eq!(Basis::full(&LatticeSpec::periodic(4).unwrap(), ModelKind::U1Qlm).unwrap().len(), 1 << 8);
    }

    #[test]
    fn sector_dimension_matches_exhaustive_filter() {
        for l in [2, 4, 6] {
            for boundary in [Boundary::Open, Boundary::Periodic] {
                let lat = LatticeSpec::new(l, boundary).unwrap();
                for kind in [ModelKind::Z2Lgt, ModelKind::U1Qlm] {
                    let sector = GaugeSector::reference(&lat, kind).unwrap();
                    let basis = Basis::gauge_sector(&lat, &sector, None).unwrap();
                    assert_eq!(basis.len(), brute_force_count(&lat, &sector), "L={l} {boundary:?} {kind}");
                }
            }
        }
    }

    #[test]
    fn l2_open_reference_sector_dimension() {
        // exhaustive filter over the 2^3 states: (n1, n2, tau) with
        // -1 = (-1)^n1 tau and 1 = (-1)^n2 tau  ->  (1,0,+), (0,1,-)
        let lat = LatticeSpec::open(2).unwrap();
        let b = Basis::reference(&lat, ModelKind::Z2Lgt, None).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b.config(0).occupations, vec![0, 1]);
        assert_eq!(b.config(1).occupations, vec![1, 0]);
    }

    #[test]
    fn keys_round_trip_and_are_ordered_matter_major() {
        let lat = LatticeSpec::open(4).unwrap();
        let b = Basis::full(&lat, ModelKind::Z2Lgt).unwrap();
        for idx in [0, 5, 77, 127] {
            assert_eq!(b.index_of(&b.config(idx)), Some(idx));
        }
        let c0 = b.config(0);
        assert_eq!(c0.occupations, vec![0, 0, 0, 0]);
        assert_eq!(c0.links, vec![1, 1, 1]);
        assert_eq!(b.config(1).links, vec![1, 1, -1]);
        assert_eq!(b.config(8).occupations, vec![0, 0, 0, 1]);
    }

    #[test]
    fn named_states_sit_in_their_sectors() {
        let ring = LatticeSpec::periodic(6).unwrap();
        let z2 = Basis::reference(&ring, ModelKind::Z2Lgt, Some(3)).unwrap();
        for name in [NamedState::FpPlus, NamedState::FpMinus, NamedState::SlPlus, NamedState::SlMinus] {
            assert!(z2.index_of(&named_state(name, &ring).unwrap()).is_some(), "{name}");
        }
        let open = LatticeSpec::open(6).unwrap();
        let z2o = Basis::reference(&open, ModelKind::Z2Lgt, None).unwrap();
        assert!(z2o.index_of(&named_state(NamedState::FpPlus, &open).unwrap()).is_some());
        assert!(z2o.index_of(&named_state(NamedState::SlPlus, &open).unwrap()).is_some());
        assert!(z2o.index_of(&named_state(NamedState::FpMinus, &open).unwrap()).is_none());
    }

    #[test]
    fn inconsistent_sector_is_empty() {
        let lat = LatticeSpec::open(2).unwrap();
        let sector = GaugeSector { kind: ModelKind::U1Qlm, values: vec![2, 2] };
        assert_eq!(Basis::gauge_sector(&lat, &sector, None), Err(ModelError::EmptySector));
    }
}
