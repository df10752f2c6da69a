//! Linear baselines: quantized zero-forcing with optimal or equal
//! per-antenna power, Gaussian null-space dithering, and the unquantized
//! ZF/RZF references.
//!
//! All baselines keep the beamformers fixed and reuse the duality power
//! machinery to balance the downlink powers, so they satisfy the same
//! power-accounting identities as the max-min solution and differ only in
//! the beamformer choice and per-antenna policy.

use crate::ceq::{CeqConfig, QnMode};
use crate::error::{Error, Result};
use crate::grid::Scenario;
use crate::power::{solve_power, Direction};
use crate::solver::{BeamformingSolution, SolverTrace};
use crate::sqinr::{
    build_coupling, dl_sqinr_approx_all, dl_sqinr_exact_all, per_antenna_power, DitherSpec,
    PaMode, PrecodingState, QuantModel,
};
use crate::{CMat, Cx};

/// Zero-forcing beamformers: per subcarrier the minimum-norm right inverse
/// of the effective downlink channel `H_n^T`, column-normalized to unit
/// norm. Requires `H_n^T` to have full row rank `K`.
pub fn zf_precoder(freq: &[CMat]) -> Result<Vec<CMat>> {
    rzf_precoder(freq, 0.0)
}

/// Regularized zero-forcing: `conj(H)(H^T conj(H) + alpha I)^{-1}` with
/// unit-normalized columns; `alpha = 0` recovers plain zero-forcing.
pub fn rzf_precoder(freq: &[CMat], alpha: f64) -> Result<Vec<CMat>> {
    freq.iter()
        .enumerate()
        .map(|(n, h)| {
            let k = h.ncols();
            let hc = h.map(|v| v.conj());
            let mut gram = h.transpose() * &hc;
            for i in 0..k {
                gram[(i, i)] += Cx::new(alpha, 0.0);
            }
            let inv = gram.try_inverse().ok_or(Error::RankDeficient { n })?;
            let mut t = hc * inv;
            for c in 0..k {
                let norm = t.column(c).norm();
                if norm.is_nan() || norm <= 0.0 {
                    return Err(Error::RankDeficient { n });
                }
                let mut col = t.column_mut(c);
                col /= Cx::new(norm, 0.0);
            }
            Ok(t)
        })
        .collect()
}

/// Balances downlink powers for fixed beamformers and scores the solution.
fn solve_fixed_beamformers(
    beamformers: Vec<CMat>,
    scn: &Scenario,
    targets: &[f64],
    p_bs: f64,
    pa_mode: PaMode,
    dither: Option<&DitherSpec>,
) -> Result<BeamformingSolution> {
    if targets.len() != scn.n_links() {
        return Err(Error::DimensionMismatch(format!(
            "target vector has length {}, expected {}",
            targets.len(),
            scn.n_links()
        )));
    }
    let mut state = PrecodingState::new(beamformers, targets.to_vec());
    let coupling = build_coupling(&state, scn, QuantModel::Joint)?;
    let budget = p_bs * scn.n_sc_total as f64;
    let dl = solve_power(&coupling, Direction::Downlink, budget)?;
    let ul = solve_power(&coupling, Direction::Uplink, budget)?;
    state.dl_power = dl.powers;
    state.ul_power = ul.powers;
    let pa = per_antenna_power(&state, scn, pa_mode, p_bs)?;
    state.per_antenna = Some(pa.clone());
    let sqinr_approx = dl_sqinr_approx_all(&state, scn)?;
    let sqinr_exact = dl_sqinr_exact_all(&state, scn, QnMode::Exact, dither)?;
    let r_opt = sqinr_approx
        .iter()
        .zip(targets.iter())
        .map(|(s, t)| s / t)
        .fold(f64::INFINITY, f64::min);
    Ok(BeamformingSolution {
        beamformers: state.beamformers,
        dl_power: state.dl_power,
        ul_power: state.ul_power,
        per_antenna: pa,
        targets: targets.to_vec(),
        k_true: scn.k_users(),
        sqinr_approx,
        sqinr_exact,
        r_opt,
        traces: vec![SolverTrace {
            lambda_history: vec![dl.lambda_max],
            iterations: 1,
            converged: true,
            final_r_opt: dl.r_opt,
        }],
    })
}

/// Quantized ZF with the balance-optimal power allocation and the
/// linear-restoring per-antenna profile.
pub fn zf_opt_power(scn: &Scenario, targets: &[f64], p_bs: f64) -> Result<BeamformingSolution> {
    let beams = zf_precoder(scn.freq)?;
    solve_fixed_beamformers(beams, scn, targets, p_bs, PaMode::Restore, None)
}

/// Quantized ZF with the power budget split evenly across antennas; the
/// downlink power vector is still balanced by the eigen solve, but the
/// exact SQINRs are evaluated with the fixed equal-amplitude diagonal.
pub fn zf_equal_power(scn: &Scenario, targets: &[f64], p_bs: f64) -> Result<BeamformingSolution> {
    let beams = zf_precoder(scn.freq)?;
    solve_fixed_beamformers(beams, scn, targets, p_bs, PaMode::Equal, None)
}

/// Infinite-resolution ZF reference: the plain linear chain with balanced
/// powers (`zeta = 1`, no quantization coupling).
pub fn unquantized_zf(
    freq: &[CMat],
    n_sc_total: usize,
    sigma2: f64,
    targets: &[f64],
    p_bs: f64,
) -> Result<BeamformingSolution> {
    let ceq = CeqConfig::unquantized();
    let scn = Scenario::with_guards(freq, n_sc_total, &ceq, sigma2);
    let beams = zf_precoder(freq)?;
    solve_fixed_beamformers(beams, &scn, targets, p_bs, PaMode::Restore, None)
}

/// Infinite-resolution regularized-ZF reference; `alpha` defaults to
/// `K sigma^2 / P_BS`.
pub fn unquantized_rzf(
    freq: &[CMat],
    n_sc_total: usize,
    sigma2: f64,
    targets: &[f64],
    p_bs: f64,
    alpha: Option<f64>,
) -> Result<BeamformingSolution> {
    let ceq = CeqConfig::unquantized();
    let scn = Scenario::with_guards(freq, n_sc_total, &ceq, sigma2);
    let k = freq[0].ncols();
    let alpha = alpha.unwrap_or(k as f64 * sigma2 / p_bs);
    let beams = rzf_precoder(freq, alpha)?;
    solve_fixed_beamformers(beams, &scn, targets, p_bs, PaMode::Restore, None)
}

/// Per-subcarrier Hermitian projectors onto the null space of the effective
/// downlink channel: `P_n d` satisfies `H_n^T (P_n d) = 0`, so dither shaped
/// this way is invisible to every user before quantization.
pub fn null_space_projectors(freq: &[CMat]) -> Result<Vec<CMat>> {
    freq.iter()
        .enumerate()
        .map(|(n, h)| {
            let n_bs = h.nrows();
            let hc = h.map(|v| v.conj());
            let gram = h.transpose() * &hc;
            let inv = gram.try_inverse().ok_or(Error::RankDeficient { n })?;
            Ok(CMat::identity(n_bs, n_bs) - hc * inv * h.transpose())
        })
        .collect()
}

/// Chosen dither level and the solution scored at it.
#[derive(Debug, Clone)]
pub struct GaussianDitherOutcome {
    pub sigma_d2: f64,
    pub solution: BeamformingSolution,
    /// Projectors to reuse when injecting the dither into a link
    /// simulation.
    pub projectors: Vec<CMat>,
    /// `(sigma_d2, min exact SQINR)` per evaluated grid point.
    pub evaluated: Vec<(f64, f64)>,
}

/// ZF with Gaussian null-space dithering: adds complex Gaussian noise of
/// per-entry variance `sigma_d2` (projected onto the per-subcarrier channel
/// null space) to the pre-quantizer signal, choosing `sigma_d2` from the
/// grid by maximizing the minimum exact SQINR.
///
/// With `N_BS = K` there is no null space; the projectors vanish and every
/// grid point scores like the undithered system.
pub fn zf_gaussian_dither(
    scn: &Scenario,
    targets: &[f64],
    p_bs: f64,
    sigma_d2_grid: &[f64],
) -> Result<GaussianDitherOutcome> {
    if sigma_d2_grid.is_empty() {
        return Err(Error::InvalidConfig("empty dither grid".into()));
    }
    if sigma_d2_grid.iter().any(|&s| s < 0.0) {
        return Err(Error::InvalidConfig(
            "dither variances must be nonnegative".into(),
        ));
    }
    let beams = zf_precoder(scn.freq)?;
    let projectors = null_space_projectors(scn.freq)?;
    let mut best: Option<(f64, f64, BeamformingSolution)> = None;
    let mut evaluated = Vec::new();
    for &s2 in sigma_d2_grid {
        let spec = DitherSpec {
            sigma_d2: s2,
            projectors: projectors.clone(),
        };
        let dither = if s2 > 0.0 { Some(&spec) } else { None };
        let sol = solve_fixed_beamformers(
            beams.clone(),
            scn,
            targets,
            p_bs,
            PaMode::Restore,
            dither,
        )?;
        let min_sqinr = sol.sqinr_exact.iter().copied().fold(f64::INFINITY, f64::min);
        evaluated.push((s2, min_sqinr));
        if best.as_ref().is_none_or(|(_, m, _)| min_sqinr > *m) {
            best = Some((s2, min_sqinr, sol));
        }
    }
    let (sigma_d2, _, solution) = best.expect("grid is non-empty");
    Ok(GaussianDitherOutcome {
        sigma_d2,
        solution,
        projectors,
        evaluated,
    })
}
