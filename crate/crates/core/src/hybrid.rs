//! Analog/digital factorization of a combiner for APs with K RF chains.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_part, solve_hpd, CMatrix};

/// Which analog stage to use when an AP has only K RF chains.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HybridMode {
    /// Fully digital combining.
    #[default]
    Off,
    /// Phase-only projection of the digital combiner.
    Proposed,
    /// Random phases.
    Random,
}

impl HybridMode {
    pub fn label(self) -> &'static str {
        match self {
            HybridMode::Off => "off",
            HybridMode::Proposed => "proposed",
            HybridMode::Random => "random",
        }
    }
}

impl std::str::FromStr for HybridMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(HybridMode::Off),
            "proposed" => Ok(HybridMode::Proposed),
            "random" => Ok(HybridMode::Random),
            other => Err(Error::InvalidConfig(format!(
                "unknown hybrid mode '{other}'"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HybridCombiner {
    /// N x K, unit-modulus entries.
    pub analog: CMatrix,
    /// K x K.
    pub digital: CMatrix,
    /// `analog * digital`.
    pub combined: CMatrix,
}

impl HybridCombiner {
    pub fn new(analog: CMatrix, digital: CMatrix) -> Self {
        let combined = &analog * &digital;
        Self {
            analog,
            digital,
            combined,
        }
    }
}

/// Entrywise projection onto unit modulus; zero entries map to 1.
pub fn project_analog(u: &CMatrix) -> CMatrix {
    u.map(|z| {
        let r = z.norm();
        if r > 0.0 {
            z / r
        } else {
            c(1.0, 0.0)
        }
    })
}

/// Least-squares digital stage: `argmin_D ||U - A D||_F = (A^H A)^{-1} A^H U`.
pub fn fit_digital(u: &CMatrix, analog: &CMatrix) -> Result<CMatrix> {
    if analog.nrows() != u.nrows() {
        return Err(Error::Domain(
            "analog and digital combiners disagree on N".into(),
        ));
    }
    if analog.ncols() > analog.nrows() {
        return Err(Error::Numerical(
            "analog combiner has more RF chains than antennas".into(),
        ));
    }
    let gram = hermitian_part(&(analog.adjoint() * analog));
    solve_hpd(&gram, &(analog.adjoint() * u))
        .map_err(|_| Error::Numerical("analog combiner is rank deficient".into()))
}

/// I.i.d. phases uniform on `(-pi, pi)`.
pub fn random_analog<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(n, k, |_, _| {
        let theta = PI * (2.0 * rng.random::<f64>() - 1.0);
        c(theta.cos(), theta.sin())
    })
}

/// Projection plus least-squares fit of a digital combiner.
pub fn hybridize(u: &CMatrix) -> Result<HybridCombiner> {
    let analog = project_analog(u);
    let digital = fit_digital(u, &analog)?;
    Ok(HybridCombiner::new(analog, digital))
}
