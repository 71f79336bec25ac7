use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Which Hamiltonian is being simulated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// Z2 gauge theory with staggered fermions: hopping, staggered mass and
    /// electric field.
    #[serde(rename = "z2")]
    Z2Lgt,
    /// Matter-only hopping chain; the `mu = h = 0` limit of the Z2 theory.
    #[serde(rename = "free_fermion")]
    FreeFermion,
    /// Spin-1/2 U(1) quantum link model with optional even-link bias.
    #[serde(rename = "u1_qlm")]
    U1Qlm,
}

impl ModelKind {
    /// Whether the chain carries gauge-link degrees of freedom.
    pub fn has_links(self) -> bool {
        !matches!(self, ModelKind::FreeFermion)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Z2Lgt => "z2",
            ModelKind::FreeFermion => "free_fermion",
            ModelKind::U1Qlm => "u1_qlm",
        })
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "z2" | "Z2" | "z2lgt" => Ok(ModelKind::Z2Lgt),
            "free_fermion" | "ff" => Ok(ModelKind::FreeFermion),
            "u1_qlm" | "u1" | "qlm" => Ok(ModelKind::U1Qlm),
            other => Err(ModelError::UnknownKind(other.to_string())),
        }
    }
}

/// Couplings of the quench Hamiltonian.
///
/// `j` is the hopping amplitude and sets the unit of energy; times are quoted
/// in units of `1/j`. `mu` and `h` enter only the Z2 theory, `delta` only the
/// quantum link model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub kind: ModelKind,
    #[serde(default = "one")]
    pub j: f64,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub h: f64,
    #[serde(default)]
    pub delta: f64,
}

fn one() -> f64 {
    1.0
}

impl ModelParams {
    pub fn z2(j: f64, mu: f64, h: f64) -> Self {
        Self { kind: ModelKind::Z2Lgt, j, mu, h, delta: 0.0 }
    }

    pub fn free_fermion(j: f64) -> Self {
        Self { kind: ModelKind::FreeFermion, j, mu: 0.0, h: 0.0, delta: 0.0 }
    }

    pub fn u1_qlm(j: f64, delta: f64) -> Self {
        Self { kind: ModelKind::U1Qlm, j, mu: 0.0, h: 0.0, delta }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [("j", self.j), ("mu", self.mu), ("h", self.h), ("delta", self.delta)] {
            if !v.is_finite() {
                return Err(ModelError::InvalidParams(format!("{name} must be finite, got {v}")));
            }
        }
        if self.j <= 0.0 {
            return Err(ModelError::InvalidParams(format!("j must be positive, got {}", self.j)));
        }
        Ok(())
    }

    /// Mass coupling as it enters the Hamiltonian (zero unless Z2).
    pub fn effective_mu(&self) -> f64 {
        if self.kind == ModelKind::Z2Lgt {
            self.mu
        } else {
            0.0
        }
    }

    /// Electric-field coupling as it enters the Hamiltonian (zero unless Z2).
    pub fn effective_h(&self) -> f64 {
        if self.kind == ModelKind::Z2Lgt {
            self.h
        } else {
            0.0
        }
    }

    /// Even-link bias as it enters the Hamiltonian (zero unless U(1) QLM).
    pub fn effective_delta(&self) -> f64 {
        if self.kind == ModelKind::U1Qlm {
            self.delta
        } else {
            0.0
        }
    }

    /// `mu == h` within `tol`, the mass-resonance condition of the Z2 theory.
    pub fn is_mass_resonant(&self, tol: f64) -> bool {
        self.kind == ModelKind::Z2Lgt && (self.mu - self.h).abs() <= tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_rejects_nonpositive_hopping() {
        assert!(ModelParams::z2(0.0, 0.0, 0.0).validate().is_err());
        assert!(ModelParams::z2(-1.0, 0.0, 0.0).validate().is_err());
        assert!(ModelParams::z2(1.0, f64::NAN, 0.0).validate().is_err());
        assert!(ModelParams::z2(1.0, 0.3, 0.5).validate().is_ok());
    }

    #[test]
    fn delta_is_ignored_outside_the_link_model() {
        let mut p = ModelParams::z2(1.0, 0.0, 0.0);
        p.delta = 4.0;
        assert_eq!(p.effective_delta(), 0.0);
        assert_eq!(ModelParams::u1_qlm(1.0, 4.0).effective_delta(), 4.0);
    }

    #[test]
    fn kind_parses_from_config_names() {
        assert_eq!("z2".parse::<ModelKind>().unwrap(), ModelKind::Z2Lgt);
        assert_eq!("u1_qlm".parse::<ModelKind>().unwrap(), ModelKind::U1Qlm);
        assert!("xyz".parse::<ModelKind>().is_err());
    }
}
