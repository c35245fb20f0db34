//! Rate functionals, baseline schemes, the cutset bound and a signal-level
//! Monte-Carlo check of the design.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hybrid::HybridMode;
use crate::inp::{ApObservation, Combiners, NetworkDesign, Scheme, SideInfo};
use crate::linalg::{
    blkdiag, diag_real, hermitian_part, identity, log2_det_hpd, psd_sqrt, solve_hpd, trace_re,
    vstack, CMatrix,
};
use crate::scenario::standard_complex_normal;

/// Largest stripe count accepted by [`cutset_bound`].
pub const CUTSET_MAX_STRIPES: usize = 12;

/// `log2 det(noise + G Sx G^H) - log2 det(noise)`.
pub fn information_rate(g: &CMatrix, noise: &CMatrix, sigma_x: &CMatrix) -> Result<f64> {
    if g.ncols() != sigma_x.nrows() || noise.nrows() != g.nrows() {
        return Err(Error::Domain("information_rate: dimension mismatch".into()));
    }
    let total = hermitian_part(&(g * sigma_x * g.adjoint() + noise));
    Ok(log2_det_hpd(&total)? - log2_det_hpd(&hermitian_part(noise))?)
}

/// Rate needed to carry the compressed signal over one link.
pub fn fronthaul_rate(
    g_hat: &CMatrix,
    sigma_e: &CMatrix,
    sigma_x: &CMatrix,
    omega: &CMatrix,
) -> Result<f64> {
    let signal = hermitian_part(&(g_hat * sigma_x * g_hat.adjoint() + sigma_e));
    let log_omega = log2_det_hpd(&hermitian_part(omega))
        .map_err(|_| Error::Domain("quantization noise is singular".into()))?;
    Ok(log2_det_hpd(&signal)? - log_omega)
}

/// Achievable sum-rate at the processor from the final side information of
/// every stripe, with block-diagonal stripe noise.
pub fn sum_rate_lb(side_infos: &[SideInfo], sigma_x: &CMatrix) -> Result<f64> {
    if side_infos.is_empty() {
        return Err(Error::Domain("no stripes reach the processor".into()));
    }
    let k = sigma_x.nrows();
    if side_infos
        .iter()
        .any(|s| s.g_hat.shape() != (k, k) || s.sigma_e.shape() != (k, k))
    {
        return Err(Error::Domain(
            "side information does not match the UE count".into(),
        ));
    }
    let g: Vec<&CMatrix> = side_infos.iter().map(|s| &s.g_hat).collect();
    let e: Vec<&CMatrix> = side_infos.iter().map(|s| &s.sigma_e).collect();
    information_rate(&vstack(&g)?, &blkdiag(&e), sigma_x)
}

/// Information the compressed signal of one AP carries about `x`.
/// `omega` may be zero as long as `sigma_n + omega` is positive definite.
pub fn per_ap_info(
    g_hat: &CMatrix,
    sigma_n: &CMatrix,
    omega: &CMatrix,
    sigma_x: &CMatrix,
) -> Result<f64> {
    information_rate(g_hat, &(sigma_n + omega), sigma_x)
}

/// `I(x; {y_(m,i)})` over a set of APs in the effective model
/// `y = H_hat x + w`, via the K x K form `log2 det(I + Sx^{1/2} J Sx^{1/2})`
/// with `J = sum H_hat^H Sigma_w^{-1} H_hat`.
pub fn mutual_information(aps: &[&ApObservation], sigma_x: &CMatrix) -> Result<f64> {
    let k = sigma_x.nrows();
    let mut j = CMatrix::zeros(k, k);
    for obs in aps {
        j += obs.h_hat.adjoint() * solve_hpd(&obs.sigma_w, &obs.h_hat)?;
    }
    let root = psd_sqrt(sigma_x)?;
    log2_det_hpd(&hermitian_part(&(identity(k) + &root * j * &root)))
}

/// `min over stripe subsets S of C_F (M - |S|) + I(x; y_S)`.
pub fn cutset_bound(stripes: &[Vec<ApObservation>], sigma_x: &CMatrix, c_f: f64) -> Result<f64> {
    let m = stripes.len();
    if m == 0 {
        return Err(Error::Domain("no stripes".into()));
    }
    if m > CUTSET_MAX_STRIPES {
        return Err(Error::Unsupported(format!(
            "cutset enumeration over {m} stripes (limit {CUTSET_MAX_STRIPES})"
        )));
    }
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << m) {
        let chosen: Vec<&ApObservation> = (0..m)
            .filter(|s| mask & (1 << s) != 0)
            .flat_map(|s| stripes[s].iter())
            .collect();
        let info = if chosen.is_empty() {
            0.0
        } else {
            mutual_information(&chosen, sigma_x)?
        };
        let outside = (m - mask.count_ones() as usize) as f64;
        best = best.min(c_f * outside + info);
    }
    Ok(best)
}

/// Maximum-ratio combining: `U = H_hat`, `V = I` after the head of the
/// stripe.
pub fn mrc_combiners(h_hat: &CMatrix, has_predecessor: bool) -> Combiners {
    Combiners {
        u: h_hat.clone(),
        v: has_predecessor.then(|| identity(h_hat.ncols())),
    }
}

/// Entrywise quantization with `C_F / K` bits per entry.
pub fn naive_fh(
    g_hat: &CMatrix,
    sigma_n: &CMatrix,
    sigma_x: &CMatrix,
    c_f: f64,
) -> Result<CMatrix> {
    if !(c_f > 0.0) || !c_f.is_finite() {
        return Err(Error::Domain(format!(
            "fronthaul capacity must be positive, got {c_f}"
        )));
    }
    let k = g_hat.nrows();
    let denom = (c_f / k as f64).exp2() - 1.0;
    let cov = g_hat * sigma_x * g_hat.adjoint() + sigma_n;
    let d: Vec<f64> = (0..k).map(|i| cov[(i, i)].re / denom).collect();
    if d.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Numerical(
            "entrywise quantizer has a non-positive step".into(),
        ));
    }
    Ok(diag_real(&d))
}

/// Side-information reals exchanged per link under a scheme.
///
/// Every scheme forwards `(G_hat, Sigma_e)` since both quantizers are
/// designed from them; only the combining half is scheme dependent.
pub fn side_info_overhead(scheme: Scheme, ues: usize) -> OverheadSplit {
    let full = 2 * ues * ues;
    let combining = match scheme.combining {
        crate::inp::Combining::Mmse => full,
        crate::inp::Combining::Mrc => 0,
    };
    OverheadSplit {
        combining,
        per_link: full,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OverheadSplit {
    /// Reals the combiner itself needs.
    pub combining: usize,
    /// Reals actually sent per link.
    pub per_link: usize,
}

/// Rates of one designed network.
#[derive(Clone, Debug, Serialize)]
pub struct RateReport {
    pub scheme: String,
    pub hybrid: HybridMode,
    pub sum_rate_lb: f64,
    /// Indexed `[m][i]`.
    pub per_ap_fh_rate: Vec<Vec<f64>>,
    pub per_ap_info: Vec<Vec<f64>>,
    pub cutset: f64,
    pub overhead_total: usize,
}

impl RateReport {
    pub fn mean_fh_rate(&self) -> f64 {
        let all: Vec<f64> = self.per_ap_fh_rate.iter().flatten().copied().collect();
        all.iter().sum::<f64>() / all.len().max(1) as f64
    }
}

pub fn rate_report(
    design: &NetworkDesign,
    stripes: &[Vec<ApObservation>],
    sigma_x: &CMatrix,
    c_f: f64,
) -> Result<RateReport> {
    let mut per_ap_fh_rate = Vec::with_capacity(design.stripes.len());
    let mut per_ap_info_all = Vec::with_capacity(design.stripes.len());
    let mut links = 0;
    for outcome in &design.stripes {
        let mut fh = Vec::with_capacity(outcome.aps.len());
        let mut info = Vec::with_capacity(outcome.aps.len());
        for ap in &outcome.aps {
            let si = &ap.side_info_out;
            fh.push(fronthaul_rate(&si.g_hat, &si.sigma_e, sigma_x, &ap.omega)?);
            info.push(per_ap_info(&si.g_hat, &ap.sigma_n, &ap.omega, sigma_x)?);
        }
        links += outcome.aps.len();
        per_ap_fh_rate.push(fh);
        per_ap_info_all.push(info);
    }
    Ok(RateReport {
        scheme: design.scheme.label().to_string(),
        hybrid: design.hybrid,
        sum_rate_lb: sum_rate_lb(&design.final_side_infos(), sigma_x)?,
        per_ap_fh_rate,
        per_ap_info: per_ap_info_all,
        cutset: cutset_bound(stripes, sigma_x, c_f)?,
        overhead_total: links * side_info_overhead(design.scheme, sigma_x.nrows()).per_link,
    })
}

/// Sample statistics of the processor input.
#[derive(Clone, Debug)]
pub struct TransmissionStats {
    pub symbols: usize,
    pub empirical_cov: CMatrix,
    /// `G_CP Sx G_CP^H + Sigma_e,CP`.
    pub analytic_cov: CMatrix,
    /// `||empirical - analytic||_F / ||analytic||_F`.
    pub relative_cov_error: f64,
    /// Mean of `||x - W^H r_CP||^2` with the analytic LMMSE filter `W`.
    pub empirical_mse: f64,
    pub analytic_mse: f64,
}

const SYMBOL_BLOCK: usize = 4096;

fn covariance_root(a: &CMatrix) -> Result<CMatrix> {
    if a.iter().all(|z| z.norm_sqr() == 0.0) {
        return Ok(CMatrix::zeros(a.nrows(), a.ncols()));
    }
    psd_sqrt(a)
}

fn gaussian_block<R: Rng + ?Sized>(root: &CMatrix, cols: usize, rng: &mut R) -> CMatrix {
    let n = root.ncols();
    let mut z = CMatrix::zeros(n, cols);
    for j in 0..cols {
        z.set_column(j, &standard_complex_normal(n, rng));
    }
    root * z
}

/// Pushes `n_symbols` through every stripe: `y = H_hat x + w` at each AP
/// with `w ~ CN(0, Sigma_w)`, then `r = U^H y + V^H r_prev + q` with
/// `q ~ CN(0, Omega)`. Randomness is drawn in blocks of symbols, per block
/// `x` first, then stripe by stripe and AP by AP `w` and `q`.
pub fn simulate_transmission<R: Rng + ?Sized>(
    design: &NetworkDesign,
    stripes: &[Vec<ApObservation>],
    sigma_x: &CMatrix,
    n_symbols: usize,
    rng: &mut R,
) -> Result<TransmissionStats> {
    if n_symbols == 0 {
        return Err(Error::Domain("need at least one symbol".into()));
    }
    if design.stripes.len() != stripes.len()
        || design
            .stripes
            .iter()
            .zip(stripes)
            .any(|(d, s)| d.aps.len() != s.len())
    {
        return Err(Error::Domain(
            "design does not match the observations".into(),
        ));
    }
    let k = sigma_x.nrows();
    let x_root = covariance_root(sigma_x)?;
    let mut roots = Vec::with_capacity(stripes.len());
    for (outcome, obs) in design.stripes.iter().zip(stripes) {
        let mut per_ap = Vec::with_capacity(obs.len());
        for (ap, o) in outcome.aps.iter().zip(obs) {
            per_ap.push((covariance_root(&o.sigma_w)?, covariance_root(&ap.omega)?));
        }
        roots.push(per_ap);
    }

    let finals = design.final_side_infos();
    let g_refs: Vec<&CMatrix> = finals.iter().map(|s| &s.g_hat).collect();
    let e_refs: Vec<&CMatrix> = finals.iter().map(|s| &s.sigma_e).collect();
    let g_cp = vstack(&g_refs)?;
    let analytic_cov = hermitian_part(&(&g_cp * sigma_x * g_cp.adjoint() + blkdiag(&e_refs)));
    let cross = &g_cp * sigma_x;
    let filter = solve_hpd(&analytic_cov, &cross)?;
    let analytic_mse = trace_re(&(sigma_x - filter.adjoint() * &cross));

    let dim = analytic_cov.nrows();
    let mut acc = CMatrix::zeros(dim, dim);
    let mut sq_err = 0.0;
    let mut done = 0;
    while done < n_symbols {
        let cols = SYMBOL_BLOCK.min(n_symbols - done);
        let x = gaussian_block(&x_root, cols, rng);
        let mut r_cp = CMatrix::zeros(dim, cols);
        for (m, (outcome, obs)) in design.stripes.iter().zip(stripes).enumerate() {
            let mut r: Option<CMatrix> = None;
            for ((ap, o), (w_root, q_root)) in outcome.aps.iter().zip(obs).zip(&roots[m]) {
                let y = &o.h_hat * &x + gaussian_block(w_root, cols, rng);
                let mut next = ap.u.adjoint() * y;
                if let (Some(v), Some(prev)) = (&ap.v, &r) {
                    next += v.adjoint() * prev;
                }
                next += gaussian_block(q_root, cols, rng);
                r = Some(next);
            }
            r_cp.rows_mut(m * k, k)
                .copy_from(&r.expect("non-empty stripe"));
        }
        acc += &r_cp * r_cp.adjoint();
        let err = &x - filter.adjoint() * &r_cp;
        sq_err += err.iter().map(|z| z.norm_sqr()).sum::<f64>();
        done += cols;
    }
    let empirical_cov = acc.unscale(n_symbols as f64);
    let relative_cov_error = (&empirical_cov - &analytic_cov).norm() / analytic_cov.norm();
    Ok(TransmissionStats {
        symbols: n_symbols,
        empirical_cov,
        analytic_cov,
        relative_cov_error,
        empirical_mse: sq_err / n_symbols as f64,
        analytic_mse,
    })
}
