//! Per-AP fronthaul quantizer design.
//!
//! The quantization noise covariance is searched in the eigenbasis of the
//! whitened signal covariance `W G Sx G^H W^H`, where `W = L^{-1}` for the
//! Cholesky factor `Sn = L L^H`. With
//! `a_k = 1 / omega_k` the per-eigenmode problem is
//!
//! ```text
//! max  sum_k log2(1 + a_k (g_k + 1)) - log2(1 + a_k)
//! s.t. sum_k log2(1 + a_k (g_k + 1)) <= C_F,   a_k >= 0
//! ```
//!
//! whose solution is `a_k = [ (1 - 1/(g_k + 1)) / lambda - 1 ]^+` with the
//! multiplier `lambda` set so that the rate budget is met with equality.
//!
//! When `Sigma_n` is singular (more UEs than the combiners have rank, e.g.
//! `K > N` at the head of a stripe) the design runs on the range of
//! `Sigma_n`, which contains the whole signal. The null space carries
//! neither signal nor noise; it gets unit-scale quantization noise, which
//! costs no rate and loses no information but keeps `Sigma_e` invertible.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky_factor, hermitian_eigen, hermitian_part, identity, solve_lower, CMatrix,
};

/// Modes with `a_k < A_MIN` are realized by attenuating the mode by
/// `sqrt(a_k)` under unit whitened noise rather than by adding noise
/// `1/a_k`. Both carry the same rate and information; the attenuated form
/// keeps `Sigma_e` within a factor `1 + 1/A_MIN` of `Sigma_n` in the
/// whitened domain, so discarded modes do not pile up noise along a stripe.
pub const A_MIN: f64 = 1e-3;

/// Whitened eigenvalues at or below this carry no signal.
pub const SIGNAL_FLOOR: f64 = 1e-12;

/// Rate-budget tolerance of the fallback bisection, in bits.
pub const BISECTION_TOL_BITS: f64 = 1e-9;
pub const BISECTION_MAX_ITER: usize = 200;
pub const LAMBDA_MIN: f64 = 1e-12;

/// Eigenvalues of a singular `Sigma_n` below this fraction of the largest
/// one span its null space.
pub const RANK_TOL: f64 = 1e-12;
/// Largest tolerated share of signal energy outside the range of `Sigma_n`.
pub const NULL_LEAK_TOL: f64 = 1e-6;

/// Noise factor and eigenbasis of the whitened signal covariance.
#[derive(Clone, Debug)]
pub struct QuantizerBasis {
    /// Eigenvalues, descending, clamped to be nonnegative; one per
    /// dimension of the range of `Sigma_n`.
    pub gamma: Vec<f64>,
    pub u_eig: CMatrix,
    /// `F` with `Sigma_n = F F^H`: the lower-triangular Cholesky factor, or
    /// `Q S^{1/2}` (K x r) from the eigenpairs when `Sigma_n` is singular.
    pub noise_factor: CMatrix,
    /// Present when `Sigma_n` is singular.
    pub null_space: Option<NullSpace>,
}

/// Range/null split of a singular `Sigma_n = Q S Q^H`.
#[derive(Clone, Debug)]
pub struct NullSpace {
    /// `S^{-1/2} Q^H`, the whitener on the range.
    pub whitener: CMatrix,
    /// `I - Q Q^H`.
    pub projector: CMatrix,
    /// Quantization noise placed on the null space, `tr(Sigma_n) / r`.
    pub noise: f64,
}

impl QuantizerBasis {
    /// `W X` for the whitener `W` (`F^{-1}` on the range).
    fn whiten(&self, x: &CMatrix) -> Result<CMatrix> {
        match &self.null_space {
            None => solve_lower(&self.noise_factor, x),
            Some(ns) => Ok(&ns.whitener * x),
        }
    }

    /// `(U^H W)` as a matrix.
    fn back_projection(&self) -> Result<CMatrix> {
        match &self.null_space {
            // U^H L^{-1} = (L^{-H} U)^H.
            None => self
                .noise_factor
                .ad_solve_lower_triangular(&self.u_eig)
                .map(|m| m.adjoint())
                .ok_or_else(|| Error::Numerical("singular noise factor".into())),
            Some(ns) => Ok(self.u_eig.adjoint() * &ns.whitener),
        }
    }
}

fn singular_noise_factor(
    (values, vectors): (Vec<f64>, CMatrix),
    g_hat: &CMatrix,
) -> Result<(CMatrix, NullSpace)> {
    let top = values.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return Err(Error::Domain(
            "noise covariance before quantization vanishes".into(),
        ));
    }
    if let Some(&min) = values.last() {
        if min < -RANK_TOL.sqrt() * top {
            return Err(Error::Domain(format!(
                "noise covariance before quantization has eigenvalue {min:e}"
            )));
        }
    }
    let rank = values.iter().take_while(|&&v| v > RANK_TOL * top).count();
    let k = vectors.nrows();
    let q = vectors.columns(0, rank).into_owned();
    let mut factor = q.clone();
    let mut whitener = q.adjoint();
    for (j, &v) in values.iter().take(rank).enumerate() {
        let root = v.sqrt();
        factor.column_mut(j).scale_mut(root);
        whitener.row_mut(j).unscale_mut(root);
    }
    let projector = identity(k) - &q * q.adjoint();
    let leak = crate::linalg::frobenius(&(&projector * g_hat));
    let total = crate::linalg::frobenius(g_hat);
    if leak > NULL_LEAK_TOL * total {
        return Err(Error::Domain(
            "signal reaches a direction without noise; its information is unbounded".into(),
        ));
    }
    let noise = values.iter().take(rank).sum::<f64>() / rank as f64;
    Ok((
        factor,
        NullSpace {
            whitener,
            projector,
            noise,
        },
    ))
}

/// Solution of the per-eigenmode allocation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuantizerSolution {
    /// `a_k`; zero for inactive modes.
    pub a: Vec<f64>,
    pub lambda: f64,
    /// Whether the closed form gave a strictly positive `a_k`.
    pub active: Vec<bool>,
}

pub fn quantizer_eigenvalues(
    g_hat: &CMatrix,
    sigma_n: &CMatrix,
    sigma_x: &CMatrix,
) -> Result<QuantizerBasis> {
    let eig = hermitian_eigen(sigma_n)?;
    let top = eig.0.first().copied().unwrap_or(0.0);
    let full_rank = eig.0.last().is_some_and(|&v| v > RANK_TOL * top);
    let (noise_factor, null_space) = match full_rank.then(|| cholesky_factor(sigma_n)) {
        Some(Ok(l)) => (l, None),
        _ => {
            let (f, ns) = singular_noise_factor(eig, g_hat)?;
            (f, Some(ns))
        }
    };
    let mut basis = QuantizerBasis {
        gamma: Vec::new(),
        u_eig: CMatrix::zeros(0, 0),
        noise_factor,
        null_space,
    };
    let wg = basis.whiten(g_hat)?;
    let whitened = hermitian_part(&(&wg * sigma_x * wg.adjoint()));
    let (values, u_eig) = hermitian_eigen(&whitened)?;
    let scale = values.first().copied().unwrap_or(0.0).abs().max(1.0);
    if let Some(&min) = values.last() {
        if min < -1e-10 * scale {
            return Err(Error::Numerical(format!(
                "whitened signal covariance has eigenvalue {min:e}"
            )));
        }
    }
    basis.gamma = values.into_iter().map(|v| v.max(0.0)).collect();
    basis.u_eig = u_eig;
    Ok(basis)
}

/// Closed-form `a_k` for a given multiplier, before flooring.
pub fn closed_form_a(gamma: f64, lambda: f64) -> f64 {
    ((1.0 - 1.0 / (gamma + 1.0)) / lambda - 1.0).max(0.0)
}

/// `sum_k log2(1 + a_k (g_k + 1))`.
pub fn fronthaul_budget(gamma: &[f64], a: &[f64]) -> f64 {
    gamma
        .iter()
        .zip(a)
        .map(|(g, a)| (a * (g + 1.0)).ln_1p())
        .sum::<f64>()
        / crate::linalg::LN_2
}

/// `sum_k log2(1 + a_k (g_k + 1)) - log2(1 + a_k)`.
pub fn eigenmode_objective(gamma: &[f64], a: &[f64]) -> f64 {
    gamma
        .iter()
        .zip(a)
        .map(|(g, a)| (a * (g + 1.0)).ln_1p() - a.ln_1p())
        .sum::<f64>()
        / crate::linalg::LN_2
}

/// Stationarity of the Lagrangian at an active coordinate (zero at the
/// optimum).
pub fn stationarity_residual(gamma: f64, a: f64, lambda: f64) -> f64 {
    (1.0 - lambda) * (gamma + 1.0) / (1.0 + a * (gamma + 1.0)) - 1.0 / (1.0 + a)
}

fn allocation(gamma: &[f64], lambda: f64) -> Vec<f64> {
    gamma.iter().map(|&g| closed_form_a(g, lambda)).collect()
}

/// Allocates the fronthaul budget `c_f` over the eigenmodes `gamma`.
///
/// Activity is monotone in `g_k`, so the active set is a prefix of the
/// modes sorted by `g_k`. On the active set `S` the budget reads
/// `sum_S log2(g_k t) = c_f` with `t = 1/lambda - 1`, which fixes `t` in
/// closed form; the prefix whose `t` keeps exactly `S` active is the
/// optimum. Should rounding leave no prefix consistent, the multiplier is
/// bisected instead.
pub fn solve_quantizer(gamma: &[f64], c_f: f64) -> Result<QuantizerSolution> {
    if !(c_f > 0.0) || !c_f.is_finite() {
        return Err(Error::Domain(format!(
            "fronthaul capacity must be positive, got {c_f}"
        )));
    }
    if gamma.is_empty() {
        return Err(Error::Domain("no eigenmodes to quantize".into()));
    }
    if gamma.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
        return Err(Error::Domain(
            "eigenvalues must be finite and nonnegative".into(),
        ));
    }
    let k = gamma.len();

    if gamma.iter().all(|&g| g <= SIGNAL_FLOOR) {
        // No signal: every feasible point is optimal, spread the bits evenly.
        // The multiplier of this degenerate problem is zero.
        return Ok(QuantizerSolution {
            a: vec![(c_f / k as f64).exp2() - 1.0; k],
            lambda: 0.0,
            active: vec![true; k],
        });
    }

    let mut order: Vec<usize> = (0..k).filter(|&i| gamma[i] > SIGNAL_FLOOR).collect();
    order.sort_by(|&i, &j| gamma[j].total_cmp(&gamma[i]));
    let mut log_sum = 0.0;
    for (s, &top) in order.iter().enumerate() {
        log_sum += gamma[top].log2();
        let t = ((c_f - log_sum) / (s + 1) as f64).exp2();
        let next_inactive = order.get(s + 1).is_none_or(|&n| gamma[n] * t <= 1.0);
        if gamma[top] * t > 1.0 && next_inactive {
            let mut a = vec![0.0; k];
            for &i in &order[..=s] {
                a[i] = (gamma[i] * t - 1.0) / (gamma[i] + 1.0);
            }
            return Ok(QuantizerSolution {
                active: a.iter().map(|&x| x > 0.0).collect(),
                a,
                lambda: 1.0 / (1.0 + t),
            });
        }
    }
    log::debug!("no consistent active set for {gamma:?} at {c_f} bits; bisecting");
    bisect_multiplier(gamma, c_f)
}

/// Bisection on `ln(lambda)` over `[ln LAMBDA_MIN, 0]`, where the budget is
/// continuous and nonincreasing in `lambda` and vanishes at `lambda = 1`.
pub fn bisect_multiplier(gamma: &[f64], c_f: f64) -> Result<QuantizerSolution> {
    let budget = |lambda: f64| fronthaul_budget(gamma, &allocation(gamma, lambda));
    if budget(LAMBDA_MIN) < c_f {
        return Err(Error::Numerical(format!(
            "fronthaul budget {c_f} bits is out of reach for lambda >= {LAMBDA_MIN:e}"
        )));
    }
    let (mut lo, mut hi) = (LAMBDA_MIN.ln(), 0.0f64);
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let lambda = mid.exp();
        let a = allocation(gamma, lambda);
        let b = fronthaul_budget(gamma, &a);
        if (b - c_f).abs() < BISECTION_TOL_BITS {
            return Ok(QuantizerSolution {
                active: a.iter().map(|&x| x > 0.0).collect(),
                a,
                lambda,
            });
        }
        if b > c_f {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numerical(format!(
        "multiplier bisection missed the {c_f}-bit budget after {BISECTION_MAX_ITER} steps"
    )))
}

/// `Omega = F U diag(1/a) U^H F^H`, i.e. `diag(1/a)` in the eigenbasis
/// mapped back through the inverse whitener `F`.
pub fn recover_omega(a: &[f64], u_eig: &CMatrix, noise_factor: &CMatrix) -> Result<CMatrix> {
    let k = a.len();
    if u_eig.shape() != (k, k) || noise_factor.ncols() != k {
        return Err(Error::Domain("recover_omega: dimension mismatch".into()));
    }
    if let Some(bad) = a.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::Domain(format!(
            "quantizer coefficient {bad:e} gives no finite noise"
        )));
    }
    let mut scaled = u_eig.clone();
    for (col, &ak) in a.iter().enumerate() {
        for r in 0..k {
            scaled[(r, col)] /= ak;
        }
    }
    let left = noise_factor * scaled;
    let right = noise_factor * u_eig;
    Ok(hermitian_part(&(left * right.adjoint())))
}

/// Full optimized quantizer for one AP.
#[derive(Clone, Debug)]
pub struct QuantizerDesign {
    pub basis: QuantizerBasis,
    pub solution: QuantizerSolution,
    pub omega: CMatrix,
    /// `T = L U diag(t) U^H L^{-1}` applied to the combined signal before
    /// quantization; `None` when every mode has `a_k >= A_MIN`.
    pub shaping: Option<CMatrix>,
}

/// Realizes an allocation as quantization noise plus an optional shaping
/// matrix (see [`A_MIN`]).
pub fn realize_quantizer(a: &[f64], basis: &QuantizerBasis) -> Result<(CMatrix, Option<CMatrix>)> {
    let attenuate = a.iter().any(|&x| x < A_MIN);
    let (mut omega, shaping) = if attenuate {
        let r = a.len();
        let (f, u) = (&basis.noise_factor, &basis.u_eig);
        let mut noise = u.clone();
        let mut gain = u.clone();
        for (col, &ak) in a.iter().enumerate() {
            let (w, t) = if ak >= A_MIN {
                (1.0 / ak, 1.0)
            } else {
                (1.0, ak.max(0.0).sqrt())
            };
            for row in 0..r {
                noise[(row, col)] *= w;
                gain[(row, col)] *= t;
            }
        }
        let fu = f * u;
        let omega = hermitian_part(&(f * noise * fu.adjoint()));
        let mut t = f * gain * basis.back_projection()?;
        if let Some(ns) = &basis.null_space {
            t += &ns.projector;
        }
        (omega, Some(t))
    } else {
        (recover_omega(a, &basis.u_eig, &basis.noise_factor)?, None)
    };
    if let Some(ns) = &basis.null_space {
        omega = hermitian_part(&(omega + &ns.projector * crate::linalg::c(ns.noise, 0.0)));
    }
    Ok((omega, shaping))
}

pub fn design_quantizer(
    g_hat: &CMatrix,
    sigma_n: &CMatrix,
    sigma_x: &CMatrix,
    c_f: f64,
) -> Result<QuantizerDesign> {
    let basis = quantizer_eigenvalues(g_hat, sigma_n, sigma_x)?;
    let solution = solve_quantizer(&basis.gamma, c_f)?;
    let (omega, shaping) = realize_quantizer(&solution.a, &basis)?;
    Ok(QuantizerDesign {
        basis,
        solution,
        omega,
        shaping,
    })
}

/// Quantization noise of the identity-whitened, unrotated case.
pub fn diagonal_omega(a: &[f64]) -> CMatrix {
    let k = a.len();
    let mut m = identity(k);
    for (i, &ai) in a.iter().enumerate() {
        m[(i, i)] = crate::linalg::c(1.0 / ai, 0.0);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, diag_real, frobenius, spectral_map};

    #[test]
    fn single_mode_reference() {
        let s = solve_quantizer(&[3.0], 2.0).unwrap();
        assert!((s.a[0] - 0.75).abs() < 1e-8);
        assert!((s.lambda - 3.0 / 7.0).abs() < 1e-8);
        assert!((fronthaul_budget(&[3.0], &s.a) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn large_budget_reaches_unquantized_rate() {
        let g = [5.0, 0.5];
        let s = solve_quantizer(&g, 60.0).unwrap();
        let limit: f64 = g.iter().map(|x| (1.0 + x).log2()).sum();
        assert!((eigenmode_objective(&g, &s.a) - limit).abs() < 1e-6);
    }

    #[test]
    fn zero_signal_spreads_bits() {
        let s = solve_quantizer(&[0.0, 0.0, 0.0], 6.0).unwrap();
        for a in &s.a {
            assert!((a - 3.0).abs() < 1e-12);
        }
        assert!((fronthaul_budget(&[0.0; 3], &s.a) - 6.0).abs() < 1e-12);
        assert_eq!(s.lambda, 0.0);
    }

    #[test]
    fn weak_modes_are_switched_off() {
        let g = [50.0, 1e-4];
        let s = solve_quantizer(&g, 1.0).unwrap();
        assert_eq!(s.active, vec![true, false]);
        assert_eq!(s.a[1], 0.0);
        assert!((fronthaul_budget(&g, &s.a) - 1.0).abs() < 1e-9);
        assert!(stationarity_residual(g[0], s.a[0], s.lambda).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(solve_quantizer(&[1.0], 0.0).is_err());
        assert!(solve_quantizer(&[-1.0], 1.0).is_err());
        assert!(solve_quantizer(&[], 1.0).is_err());
        // Needs lambda below the bisection bracket; the exact path copes.
        assert!(bisect_multiplier(&[1.0], 200.0).is_err());
        let s = solve_quantizer(&[1.0], 200.0).unwrap();
        assert!((fronthaul_budget(&[1.0], &s.a) - 200.0).abs() < 1e-9);
    }

    #[test]
    fn exact_and_bisected_multipliers_agree() {
        let g = [9.0, 2.0, 0.3, 0.0];
        for c_f in [0.5, 3.0, 11.0] {
            let exact = solve_quantizer(&g, c_f).unwrap();
            let bisected = bisect_multiplier(&g, c_f).unwrap();
            assert_eq!(exact.active, bisected.active);
            assert!((exact.lambda - bisected.lambda).abs() < 1e-8 * exact.lambda);
            assert!((fronthaul_budget(&g, &exact.a) - c_f).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_factor_gives_diagonal_omega() {
        let a = [2.0, 0.5];
        let om = recover_omega(&a, &identity(2), &identity(2)).unwrap();
        assert!(frobenius(&(om - diagonal_omega(&a))) < 1e-15);
    }

    #[test]
    fn scalar_back_substitution() {
        let (g, p, sn, cf) = (c(0.8, -0.3), 2.0, 0.4, 3.0);
        let g_hat = CMatrix::from_element(1, 1, g);
        let design = design_quantizer(&g_hat, &diag_real(&[sn]), &diag_real(&[p]), cf).unwrap();
        let gamma = p * g.norm_sqr() / sn;
        let want = sn * (gamma + 1.0) / (2f64.powf(cf) - 1.0);
        assert!((design.omega[(0, 0)].re - want).abs() < 1e-9 * want);
    }

    #[test]
    fn pre_diagonalized_eigenvalues() {
        let g_hat = diag_real(&[1.0, 3.0, 2.0]);
        let b = quantizer_eigenvalues(&g_hat, &identity(3), &identity(3)).unwrap();
        assert_eq!(b.gamma.len(), 3);
        for (got, want) in b.gamma.iter().zip([9.0, 4.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        let rebuilt = spectral_map(&b.gamma, &b.u_eig, |v| v);
        assert!(frobenius(&(rebuilt - diag_real(&[1.0, 9.0, 4.0]))) < 1e-10);
    }

    #[test]
    fn zero_channel_has_zero_eigenvalues() {
        let b = quantizer_eigenvalues(&CMatrix::zeros(2, 2), &identity(2), &identity(2)).unwrap();
        assert!(b.gamma.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn noiseless_signal_direction_is_a_domain_error() {
        let sn = diag_real(&[1.0, 0.0]);
        assert!(matches!(
            quantizer_eigenvalues(&identity(2), &sn, &identity(2)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            quantizer_eigenvalues(&identity(2), &diag_real(&[1.0, -1.0]), &identity(2)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn singular_noise_designs_on_its_range() {
        // Signal and noise both live on the first axis.
        let g = diag_real(&[2.0, 0.0]);
        let sn = diag_real(&[1.0, 0.0]);
        let d = design_quantizer(&g, &sn, &identity(2), 3.0).unwrap();
        assert_eq!(d.basis.gamma.len(), 1);
        assert!((d.basis.gamma[0] - 4.0).abs() < 1e-12);
        // One mode takes the whole budget: 1 + a * 5 = 8.
        let a = d.solution.a[0];
        assert!((a - 7.0 / 5.0).abs() < 1e-8);
        assert!((d.omega[(0, 0)].re - 1.0 / a).abs() < 1e-8);
        assert!((d.omega[(1, 1)].re - 1.0).abs() < 1e-12);
    }
}
