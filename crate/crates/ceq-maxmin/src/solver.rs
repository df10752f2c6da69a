//! Alternating max-min solvers: the joint solver over all subcarriers, its
//! decoupled per-subcarrier variant, and dummy-user dithering.
//!
//! The max-min SQINR problem is solved through its uplink dual. Each outer
//! iteration alternates two exact steps:
//!
//! 1. *Beamformer step.* At fixed uplink powers each pair's uplink SQINR is
//!    a generalized Rayleigh quotient of the rank-one pair
//!    `(h h^H, S(p))`; its maximizer is the solution of one Hermitian
//!    linear system `S x = h` (conjugated back to the transmit convention
//!    and normalized).
//! 2. *Power step.* At fixed beamformers the optimal uplink powers are the
//!    Perron eigenpair of the extended uplink coupling matrix.
//!
//! The dominant eigenvalue is monotonically nonincreasing across
//! iterations, which gives the stopping rule. After convergence the
//! downlink powers come from the extended *downlink* coupling matrix of the
//! final beamformers, the per-antenna amplitudes restore the linear
//! per-antenna profile (or split the budget evenly), and the solution is
//! scored under both the small-angle and the exact arcsine SQINR models.
//!
//! The per-subcarrier variant runs the identical loop on each subcarrier in
//! isolation — a single-subcarrier system with the per-subcarrier power
//! budget — and is embarrassingly parallel.

use rayon::prelude::*;

use crate::ceq::QnMode;
use crate::error::{Error, Result};
use crate::grid::Scenario;
use crate::power::{
    build_extended, dominant_eigenpair, solve_power, Direction, POWER_ITER_TOL,
};
use crate::sqinr::{
    build_coupling, dl_sqinr_approx_all, dl_sqinr_exact_all, per_antenna_power, PaMode,
    PrecodingState, QuantModel,
};
use crate::{CMat, CVec, Cx, RVec};

/// Outer-loop configuration.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Stop once the dominant eigenvalue decreases by less than this.
    pub epsilon: f64,
    /// Outer-iteration cap; hitting it flags the trace as unconverged.
    pub max_outer_iters: usize,
    /// Joint (all subcarriers coupled) or per-subcarrier decoupled solve.
    pub variant: QuantModel,
    /// Per-antenna amplitude policy used when scoring the solution.
    pub per_antenna: PaMode,
    /// Dummy-user dithering; consumed by [`dither_line_search`].
    pub dither: Option<DitherConfig>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            max_outer_iters: 50,
            variant: QuantModel::Joint,
            per_antenna: PaMode::Restore,
            dither: None,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_outer_iters < 1 {
            return Err(Error::InvalidConfig(
                "max_outer_iters must be at least 1".into(),
            ));
        }
        if self.epsilon < 10.0 * POWER_ITER_TOL {
            return Err(Error::InvalidConfig(format!(
                "epsilon = {} is tighter than 10x the power-iteration tolerance {}; the outer loop could converge on eigen-solver noise",
                self.epsilon, POWER_ITER_TOL
            )));
        }
        if let Some(d) = &self.dither {
            if !d.gamma_grid.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::InvalidConfig(
                    "dither gamma grid must be strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Dummy-user dithering parameters: how many null-space users to add per
/// subcarrier and the line-search grid of their common (linear) SQINR
/// target. A grid value of 0 means no dithering at all.
#[derive(Debug, Clone)]
pub struct DitherConfig {
    pub n_dummy: usize,
    pub gamma_grid: Vec<f64>,
}

/// Convergence record of one outer loop.
#[derive(Debug, Clone)]
pub struct SolverTrace {
    /// Dominant eigenvalue after each outer iteration; monotonically
    /// nonincreasing up to the eigen-solver tolerance.
    pub lambda_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Balance ratio `1/lambda` of the final power solve.
    pub final_r_opt: f64,
}

impl SolverTrace {
    /// CSV rows `iteration,lambda_max,min_ratio` (header included).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,lambda_max,min_ratio\n");
        for (i, l) in self.lambda_history.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", i + 1, l, 1.0 / l));
        }
        s
    }
}

/// A complete solution: beamformers, both power vectors, the per-antenna
/// amplitudes, and the achieved SQINRs under both models.
#[derive(Debug, Clone)]
pub struct BeamformingSolution {
    pub beamformers: Vec<CMat>,
    pub dl_power: Vec<f64>,
    pub ul_power: Vec<f64>,
    pub per_antenna: RVec,
    pub targets: Vec<f64>,
    /// Leading user count that corresponds to real users; columns beyond it
    /// are dithering dummies.
    pub k_true: usize,
    /// Small-angle SQINRs per stacked pair.
    pub sqinr_approx: Vec<f64>,
    /// Exact arcsine-law SQINRs per stacked pair.
    pub sqinr_exact: Vec<f64>,
    /// Minimum achieved-to-target ratio under the small-angle model.
    pub r_opt: f64,
    /// One trace for the joint solve, one per subcarrier otherwise.
    pub traces: Vec<SolverTrace>,
}

impl BeamformingSolution {
    /// Exact SQINRs of the true users only (dummies dropped), stacked as
    /// `a * k_true + k`.
    pub fn true_user_sqinr_exact(&self, k_total: usize) -> Vec<f64> {
        let n_active = self.beamformers.len();
        let mut out = Vec::with_capacity(self.k_true * n_active);
        for a in 0..n_active {
            for k in 0..self.k_true {
                out.push(self.sqinr_exact[a * k_total + k]);
            }
        }
        out
    }

    pub fn min_true_sqinr_exact(&self, k_total: usize) -> f64 {
        self.true_user_sqinr_exact(k_total)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Per-antenna quantization-noise diagonal of the uplink `S` matrices:
/// `sum p_{i,j} |h_{i,j}[u]|^2` averaged per the model.
fn quant_diag(scn: &Scenario, ul_power: &[f64], model: QuantModel, a: usize) -> RVec {
    let n_bs = scn.n_bs();
    let mut d = RVec::zeros(n_bs);
    match model {
        QuantModel::Joint => {
            let scale = 1.0 / scn.n_sc_total as f64;
            for j in 0..scn.n_active() {
                let h = &scn.freq[j];
                for i in 0..scn.k_users() {
                    let p = ul_power[scn.link(i, j)];
                    if p == 0.0 {
                        continue;
                    }
                    for (u, v) in h.column(i).iter().enumerate() {
                        d[u] += p * scale * v.norm_sqr();
                    }
                }
            }
        }
        QuantModel::PerSubcarrier => {
            let h = &scn.freq[a];
            for i in 0..scn.k_users() {
                let p = ul_power[scn.link(i, a)];
                if p == 0.0 {
                    continue;
                }
                for (u, v) in h.column(i).iter().enumerate() {
                    d[u] += p * v.norm_sqr();
                }
            }
        }
    }
    d
}

fn beamformer_from_quant_diag(
    scn: &Scenario,
    ul_power: &[f64],
    qd: &RVec,
    k: usize,
    a: usize,
) -> Result<CVec> {
    let n_bs = scn.n_bs();
    let zeta2 = scn.ceq.zeta * scn.ceq.zeta;
    let qn_factor = scn.ceq.quant_noise_factor();
    let h = &scn.freq[a];
    let mut s = CMat::zeros(n_bs, n_bs);
    for i in 0..scn.k_users() {
        if i == k {
            continue;
        }
        let p = ul_power[scn.link(i, a)];
        if p == 0.0 {
            continue;
        }
        let col = h.column(i);
        for r in 0..n_bs {
            for c in 0..n_bs {
                s[(r, c)] += col[r] * col[c].conj() * p;
            }
        }
    }
    for u in 0..n_bs {
        s[(u, u)] += Cx::new(qn_factor * qd[u] + scn.sigma2 / zeta2, 0.0);
    }
    // The quotient |h^T t|^2 / (t^T S t^*) becomes the standard Hermitian
    // quotient u^H (h h^H) u / u^H S u in u = conj(t); for the rank-one
    // numerator the maximizer is u = S^{-1} h, one Cholesky solve.
    let chol = nalgebra::Cholesky::new(s)
        .ok_or_else(|| Error::SingularSystem("uplink S matrix is not positive definite".into()))?;
    let u = chol.solve(&CVec::from_column_slice(h.column(k).as_slice()));
    let t = u.map(|v| v.conj());
    let norm = t.norm();
    if norm.is_nan() || norm <= 0.0 {
        return Err(Error::SingularSystem(
            "beamformer solve produced a zero vector".into(),
        ));
    }
    Ok(t / Cx::new(norm, 0.0))
}

/// One beamformer update: the unit-norm maximizer of user `k`'s uplink SQINR
/// on subcarrier `a` at fixed uplink powers.
///
/// Needs `sigma2 > 0` (the `S` matrix must be positive definite); with all
/// powers zero the step reduces to the matched filter `conj(h)/||h||`.
pub fn beamformer_step(
    scn: &Scenario,
    ul_power: &[f64],
    model: QuantModel,
    k: usize,
    a: usize,
) -> Result<CVec> {
    if ul_power.len() != scn.n_links() {
        return Err(Error::DimensionMismatch(format!(
            "uplink power vector has length {}, expected {}",
            ul_power.len(),
            scn.n_links()
        )));
    }
    let qd = quant_diag(scn, ul_power, model, a);
    beamformer_from_quant_diag(scn, ul_power, &qd, k, a)
}

/// Beamformers, downlink powers, uplink powers, balance ratio and trace of
/// one alternating loop.
type LoopOutcome = (Vec<CMat>, Vec<f64>, Vec<f64>, f64, SolverTrace);

/// Joint alternating minimization on the given scenario with total budget
/// `p_budget`. Shared by the joint solver (whole system) and the
/// per-subcarrier solver (single-subcarrier scenario).
fn run_joint_loop(
    scn: &Scenario,
    targets: &[f64],
    p_budget: f64,
    epsilon: f64,
    max_outer_iters: usize,
) -> Result<LoopOutcome> {
    let k_users = scn.k_users();
    let n_links = scn.n_links();
    let mut ul_power = vec![0.0; n_links];
    let mut beams: Vec<CMat> = Vec::new();
    let mut lambda_prev = f64::INFINITY;
    let mut trace = SolverTrace {
        lambda_history: Vec::new(),
        iterations: 0,
        converged: false,
        final_r_opt: 0.0,
    };
    let mut coupling = None;
    for _ in 0..max_outer_iters {
        // Beamformer step for every stacked pair. Joint quantization diag is
        // shared across pairs.
        let qd = quant_diag(scn, &ul_power, QuantModel::Joint, 0);
        let mut new_beams = Vec::with_capacity(scn.n_active());
        for a in 0..scn.n_active() {
            let mut t = CMat::zeros(scn.n_bs(), k_users);
            for k in 0..k_users {
                let col = beamformer_from_quant_diag(scn, &ul_power, &qd, k, a)?;
                t.set_column(k, &col);
            }
            new_beams.push(t);
        }
        beams = new_beams;

        // Power step: Perron eigenpair of the extended uplink coupling.
        let state = PrecodingState::new(beams.clone(), targets.to_vec());
        let c = build_coupling(&state, scn, QuantModel::Joint)?;
        let ext = build_extended(&c, Direction::Uplink, p_budget)?;
        let (lambda, v) = dominant_eigenpair(&ext)?;
        ul_power = v.as_slice()[..n_links].to_vec();
        coupling = Some(c);
        trace.lambda_history.push(lambda);
        trace.iterations += 1;
        if lambda_prev - lambda < epsilon {
            trace.converged = true;
            break;
        }
        lambda_prev = lambda;
    }
    let coupling = coupling.expect("at least one outer iteration runs");
    // Downlink powers from the extended downlink matrix of the final
    // beamformers.
    let dl = solve_power(&coupling, Direction::Downlink, p_budget)?;
    trace.final_r_opt = dl.r_opt;
    Ok((beams, dl.powers, ul_power, dl.r_opt, trace))
}

/// Runs the configured max-min solver and scores the outcome.
///
/// Joint: one alternating loop over all stacked pairs with total budget
/// `P_BS * N_SC`. Per-subcarrier: independent single-subcarrier loops (in
/// parallel), each with the per-subcarrier share of the total budget. The
/// returned SQINRs are always evaluated on the full system: small-angle
/// ratios plus the exact arcsine law with the configured per-antenna
/// policy.
pub fn run(
    scn: &Scenario,
    targets: &[f64],
    p_bs: f64,
    cfg: &SolverConfig,
) -> Result<BeamformingSolution> {
    cfg.validate()?;
    scn.validate()?;
    if targets.len() != scn.n_links() {
        return Err(Error::DimensionMismatch(format!(
            "target vector has length {}, expected {}",
            targets.len(),
            scn.n_links()
        )));
    }
    if targets.iter().any(|&t| t.is_nan() || t <= 0.0) {
        return Err(Error::InvalidConfig("targets must be positive".into()));
    }
    if p_bs.is_nan() || p_bs <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "transmit power must be positive, got {p_bs}"
        )));
    }

    let k_users = scn.k_users();
    let total_budget = p_bs * scn.n_sc_total as f64;
    let (beams, dl_power, ul_power, traces) = match cfg.variant {
        QuantModel::Joint => {
            let (beams, q, p, _r, trace) =
                run_joint_loop(scn, targets, total_budget, cfg.epsilon, cfg.max_outer_iters)?;
            (beams, q, p, vec![trace])
        }
        QuantModel::PerSubcarrier => {
            // Equal share of the total budget per occupied subcarrier; with
            // every subcarrier active this is exactly P_BS.
            let sc_budget = total_budget / scn.n_active() as f64;
            let per_sc: Vec<_> = (0..scn.n_active())
                .into_par_iter()
                .map(|a| {
                    let freq_a = std::slice::from_ref(&scn.freq[a]);
                    // A single-subcarrier system with unit FFT size is the
                    // per-subcarrier model: same-subcarrier quantization
                    // terms at full weight.
                    let sub = Scenario::with_guards(freq_a, 1, scn.ceq, scn.sigma2);
                    let sub_targets = &targets[a * k_users..(a + 1) * k_users];
                    run_joint_loop(
                        &sub,
                        sub_targets,
                        sc_budget,
                        cfg.epsilon,
                        cfg.max_outer_iters,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let mut beams = Vec::with_capacity(scn.n_active());
            let mut q = vec![0.0; scn.n_links()];
            let mut p = vec![0.0; scn.n_links()];
            let mut traces = Vec::with_capacity(scn.n_active());
            for (a, (b, qa, pa, _r, trace)) in per_sc.into_iter().enumerate() {
                beams.push(b.into_iter().next().expect("one subcarrier"));
                q[a * k_users..(a + 1) * k_users].copy_from_slice(&qa);
                p[a * k_users..(a + 1) * k_users].copy_from_slice(&pa);
                traces.push(trace);
            }
            (beams, q, p, traces)
        }
    };

    let mut state = PrecodingState::new(beams, targets.to_vec());
    state.dl_power = dl_power;
    state.ul_power = ul_power;
    let pa = per_antenna_power(&state, scn, cfg.per_antenna, p_bs)?;
    state.per_antenna = Some(pa.clone());

    let sqinr_approx = dl_sqinr_approx_all(&state, scn)?;
    let sqinr_exact = dl_sqinr_exact_all(&state, scn, QnMode::Exact, None)?;
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
        k_true: k_users,
        sqinr_approx,
        sqinr_exact,
        r_opt,
        traces,
    })
}

/// Appends `n_dummy` synthetic user columns per subcarrier, lying in the
/// orthogonal complement of the true users' channels and scaled to the
/// average true-channel column norm.
pub fn add_dummy_users(freq: &[CMat], n_dummy: usize) -> Result<Vec<CMat>> {
    if n_dummy == 0 {
        return Ok(freq.to_vec());
    }
    let n_bs = freq[0].nrows();
    let k = freq[0].ncols();
    if n_dummy > n_bs - k {
        return Err(Error::InvalidConfig(format!(
            "{n_dummy} dummy users do not fit in the {}-dimensional null space",
            n_bs - k
        )));
    }
    freq.iter()
        .map(|h| {
            // Orthonormal basis of the complement of col(H) from the
            // column-pivoted QR of the complement projector.
            let gram = h.adjoint() * h;
            let inv = gram
                .try_inverse()
                .ok_or(Error::RankDeficient { n: 0 })?;
            let proj = CMat::identity(n_bs, n_bs) - h * inv * h.adjoint();
            let qr = proj.clone().col_piv_qr();
            let q = qr.q();
            let scale = (0..k).map(|c| h.column(c).norm()).sum::<f64>() / k as f64;
            let mut aug = CMat::zeros(n_bs, k + n_dummy);
            aug.view_mut((0, 0), (n_bs, k)).copy_from(h);
            for d in 0..n_dummy {
                let col = q.column(d);
                // The projector has rank n_bs - k, so the leading pivoted
                // columns are genuine null-space directions.
                let residual = (&proj * col - col).norm();
                if residual > 1e-8 {
                    return Err(Error::SingularSystem(format!(
                        "null-space basis column {d} failed the projector check ({residual})"
                    )));
                }
                aug.set_column(k + d, &(col * Cx::new(scale, 0.0)));
            }
            Ok(aug)
        })
        .collect()
}

/// Outcome of the dummy-user line search.
#[derive(Debug, Clone)]
pub struct DitherOutcome {
    pub solution: BeamformingSolution,
    /// Chosen common dummy target (linear; 0 means dithering off).
    pub gamma_dummy: f64,
    /// `(gamma, min true-user exact SQINR)` for every evaluated grid point.
    pub evaluated: Vec<(f64, f64)>,
}

/// Line search over the common dummy-user target: runs the solver per grid
/// value, keeps the point maximizing the minimum true-user exact SQINR and
/// stops early once that minimum starts decreasing.
pub fn dither_line_search(
    scn: &Scenario,
    targets: &[f64],
    p_bs: f64,
    cfg: &SolverConfig,
) -> Result<DitherOutcome> {
    cfg.validate()?;
    let dither = cfg
        .dither
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("dither_line_search needs cfg.dither".into()))?;
    let k_true = scn.k_users();
    let mut best: Option<(f64, f64, BeamformingSolution)> = None;
    let mut evaluated = Vec::new();
    let mut prev_min = f64::NEG_INFINITY;
    for &gamma in &dither.gamma_grid {
        let (min_true, sol) = if gamma <= 0.0 || dither.n_dummy == 0 {
            let sol = run(scn, targets, p_bs, cfg)?;
            (sol.min_true_sqinr_exact(k_true), sol)
        } else {
            let aug_freq = add_dummy_users(scn.freq, dither.n_dummy)?;
            let aug_scn = Scenario::with_guards(&aug_freq, scn.n_sc_total, scn.ceq, scn.sigma2);
            let k_aug = k_true + dither.n_dummy;
            let mut aug_targets = vec![gamma; aug_scn.n_links()];
            for a in 0..scn.n_active() {
                for k in 0..k_true {
                    aug_targets[a * k_aug + k] = targets[a * k_true + k];
                }
            }
            let mut sol = run(&aug_scn, &aug_targets, p_bs, cfg)?;
            sol.k_true = k_true;
            (sol.min_true_sqinr_exact(k_aug), sol)
        };
        evaluated.push((gamma, min_true));
        if best.as_ref().is_none_or(|(_, m, _)| min_true > *m) {
            best = Some((gamma, min_true, sol));
        }
        if min_true < prev_min {
            break;
        }
        prev_min = min_true;
    }
    let (gamma_dummy, _, solution) = best.expect("grid is non-empty");
    Ok(DitherOutcome {
        solution,
        gamma_dummy,
        evaluated,
    })
}
