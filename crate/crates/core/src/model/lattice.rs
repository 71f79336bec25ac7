use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// `L - 1` dynamical links plus two frozen virtual links at the ends.
    Open,
    /// `L` links; the last one closes the ring.
    Periodic,
    /// Translation-invariant chain described by one unit cell.
    Infinite,
}

/// Matter sites per unit cell; a cell also holds the two links to their right.
pub const MATTER_PER_CELL: usize = 2;
/// Physical sites per unit cell (matter, link, matter, link).
pub const SITES_PER_CELL: usize = 4;

/// A chain of `n_matter` staggered matter sites with links in between.
///
/// For [`Boundary::Infinite`] `n_matter` is the number of matter sites in the
/// unit cell, i.e. always [`MATTER_PER_CELL`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub n_matter: usize,
    pub boundary: Boundary,
}

impl LatticeSpec {
    pub fn open(n_matter: usize) -> Result<Self, ModelError> {
        Self::new(n_matter, Boundary::Open)
    }

    pub fn periodic(n_matter: usize) -> Result<Self, ModelError> {
        Self::new(n_matter, Boundary::Periodic)
    }

    pub fn infinite() -> Self {
        Self { n_matter: MATTER_PER_CELL, boundary: Boundary::Infinite }
    }

    pub fn new(n_matter: usize, boundary: Boundary) -> Result<Self, ModelError> {
        if boundary == Boundary::Infinite {
            return Ok(Self::infinite());
        }
        if n_matter == 0 || n_matter % 2 != 0 {
            return Err(ModelError::OddLattice(n_matter));
        }
        if n_matter > 30 {
            return Err(ModelError::LatticeTooLarge(n_matter));
        }
        Ok(Self { n_matter, boundary })
    }

    /// Number of dynamical links.
    pub fn n_links(&self) -> usize {
        match self.boundary {
            Boundary::Open => self.n_matter - 1,
            Boundary::Periodic | Boundary::Infinite => self.n_matter,
        }
    }

    /// Physical sites in the unit cell of an infinite chain.
    pub fn unit_cell(&self) -> usize {
        SITES_PER_CELL
    }

    /// Bonds `(link, left, right)` along which matter hops.
    pub fn bonds(&self) -> Vec<(usize, usize, usize)> {
        let l = self.n_matter;
        (0..self.n_links()).map(|k| (k, k, (k + 1) % l)).collect()
    }

    /// Index of the link on the left of matter site `i`, `None` for the
    /// virtual link of an open chain.
    pub fn left_link(&self, i: usize) -> Option<usize> {
        match (i, self.boundary) {
            (0, Boundary::Open) => None,
            (0, _) => Some(self.n_matter - 1),
            _ => Some(i - 1),
        }
    }

    /// Index of the link on the right of matter site `i`, `None` for the
    /// virtual link of an open chain.
    pub fn right_link(&self, i: usize) -> Option<usize> {
        if self.boundary == Boundary::Open && i + 1 == self.n_matter {
            None
        } else {
            Some(i)
        }
    }
}

/// `(-1)^j` for the 0-based matter index `i = j - 1`.
pub fn stagger(i: usize) -> f64 {
    if i % 2 == 0 {
        -1.0
    } else {
        1.0
    }
}

/// `(-1)^j` for link `k` joining 1-based sites `j = k + 1` and `j + 1`.
pub fn link_stagger(k: usize) -> f64 {
    stagger(k)
}
