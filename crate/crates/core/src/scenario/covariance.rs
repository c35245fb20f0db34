//! Local scattering spatial correlation and channel sampling.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{c, psd_sqrt, CMatrix, CVector, C64};

/// Gauss-Hermite rule for the weight `exp(-x^2)`.
#[derive(Debug)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    /// Weights as produced by the rule; they sum to sqrt(pi) up to round-off.
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub-Welsch: nodes are the eigenvalues of the symmetric Jacobi
    /// matrix of the Hermite recurrence.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::Domain("Gauss-Hermite order must be positive".into()));
        }
        let jacobi = DMatrix::<f64>::from_fn(order, order, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::try_new(jacobi, f64::EPSILON, 100_000)
            .ok_or_else(|| Error::Numerical("Gauss-Hermite eigen-solve did not converge".into()))?;
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|k| {
                (
                    eig.eigenvalues[k],
                    PI.sqrt() * eig.eigenvectors[(0, k)].powi(2),
                )
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        })
    }

    /// Shared rule of the given order, built once per process.
    pub fn cached(order: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(rule) = cache.lock().unwrap().get(&order) {
            return Ok(rule.clone());
        }
        let rule = Arc::new(Self::new(order)?);
        cache.lock().unwrap().insert(order, rule.clone());
        Ok(rule)
    }
}

/// Quadrature order needed for the most oscillatory entry of an `n`-antenna
/// correlation matrix, never below `min_order`.
///
/// After the substitution `delta = sqrt(2) sigma x` the largest lag
/// oscillates like `exp(j w x)` with `w = 2 pi d_H (n-1) sqrt(2) sigma`; the
/// rule's node spacing has to resolve that, which needs roughly `w^2 / 2`
/// nodes.
pub fn quadrature_order(n: usize, spread: f64, spacing: f64, min_order: usize) -> usize {
    let w = 2.0 * PI * spacing * (n.saturating_sub(1)) as f64 * 2f64.sqrt() * spread;
    min_order.max((0.5 * w * w).ceil() as usize + 20)
}

/// Spatial correlation of an `n`-element ULA under the local scattering
/// model with Gaussian angular spread around `nominal_angle`.
///
/// The matrix is Toeplitz-Hermitian with every diagonal entry equal to
/// `beta`. A zero `spread` gives the rank-one single-path limit.
pub fn local_scattering_covariance(
    n: usize,
    beta: f64,
    nominal_angle: f64,
    spread: f64,
    spacing: f64,
    min_order: usize,
) -> Result<CMatrix> {
    if !(beta >= 0.0) || !(spread >= 0.0) {
        return Err(Error::Domain(
            "beta and angular spread must be nonnegative".into(),
        ));
    }
    let mut lag = vec![c(1.0, 0.0); n];
    if spread == 0.0 {
        for (l, v) in lag.iter_mut().enumerate() {
            *v = cis(2.0 * PI * spacing * l as f64 * nominal_angle.sin());
        }
    } else {
        let rule = GaussHermite::cached(quadrature_order(n, spread, spacing, min_order))?;
        let total: f64 = rule.weights.iter().sum();
        if ((total - PI.sqrt()) / PI.sqrt()).abs() > 1e-6 {
            return Err(Error::Numerical(format!(
                "Gauss-Hermite weights sum to {total}, expected sqrt(pi)"
            )));
        }
        let sines: Vec<f64> = rule
            .nodes
            .iter()
            .map(|&x| (nominal_angle + 2f64.sqrt() * spread * x).sin())
            .collect();
        for (l, v) in lag.iter_mut().enumerate().skip(1) {
            let acc = rule
                .weights
                .iter()
                .zip(&sines)
                .fold(c(0.0, 0.0), |acc, (w, s)| {
                    acc + cis(2.0 * PI * spacing * l as f64 * s) * *w
                });
            *v = acc / total;
        }
    }
    Ok(CMatrix::from_fn(n, n, |a, b| {
        if a >= b {
            lag[a - b] * beta
        } else {
            lag[b - a].conj() * beta
        }
    }))
}

fn cis(theta: f64) -> C64 {
    c(theta.cos(), theta.sin())
}

/// Draws from `CN(0, R)` using a cached Hermitian square root of `R`.
#[derive(Clone, Debug)]
pub struct ChannelSampler {
    root: CMatrix,
}

impl ChannelSampler {
    pub fn new(r: &CMatrix) -> Result<Self> {
        Ok(Self { root: psd_sqrt(r)? })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CVector {
        let g = standard_complex_normal(self.root.ncols(), rng);
        &self.root * g
    }
}

/// `h = R^{1/2} g` with `g ~ CN(0, I)`.
pub fn sample_channel<R: Rng + ?Sized>(r: &CMatrix, rng: &mut R) -> Result<CVector> {
    Ok(ChannelSampler::new(r)?.sample(rng))
}

/// Vector of i.i.d. `CN(0, 1)` entries.
pub fn standard_complex_normal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVector::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re * s, im * s)
    })
}
