//! Duality-based power allocation via Perron eigenpairs of extended
//! coupling matrices.
//!
//! For a fixed set of beamformers the small-angle SQINR balance is linear in
//! the powers: `q = D(Psi + Phi) q + (sigma^2/zeta^2) D 1` must hold to meet
//! every target exactly, and the max-min balancing problem under a sum-power
//! budget is solved by the dominant eigenpair of the *extended* coupling
//! matrix — the coupling bordered by a power-budget row and the noise
//! column. The Perron-Frobenius theorem makes the dominant eigenpair
//! positive for irreducible couplings; its eigenvalue's reciprocal is the
//! achieved-to-target balance ratio, shared by every user and subcarrier,
//! and the eigenvector (last entry scaled to 1) is the power allocation.
//!
//! The uplink problem uses the transposed coupling; both extended matrices
//! share their spectrum, which is the uplink-downlink duality this crate is
//! built around.

use crate::error::{Error, Result};
use crate::sqinr::{CouplingSystem, PhiCoupling};
use crate::{RMat, RVec};

/// Which direction's balance the extended matrix encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Downlink,
    Uplink,
}

/// Coupling matrix bordered by the power-budget row and noise column.
#[derive(Debug, Clone)]
pub struct ExtendedCoupling {
    pub matrix: RMat,
    pub kind: Direction,
    /// Total power budget of the balance (Watts): `P_BS * N_SC` for the
    /// joint system, `P_BS` per subcarrier.
    pub p_budget: f64,
}

fn assemble_extended(gain: &RMat, d: &[f64], noise_over_zeta2: f64, p_budget: f64) -> RMat {
    let n = d.len();
    let mut m = RMat::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(gain);
    for r in 0..n {
        m[(r, n)] = noise_over_zeta2 * d[r];
    }
    // Budget row: column sums of the gain block and the noise column,
    // scaled by the budget.
    for c in 0..n {
        let col_sum: f64 = (0..n).map(|r| gain[(r, c)]).sum();
        m[(n, c)] = col_sum / p_budget;
    }
    m[(n, n)] = noise_over_zeta2 * d.iter().sum::<f64>() / p_budget;
    m
}

/// Builds the extended coupling matrix over all stacked pairs (requires the
/// joint quantization coupling). `p_budget` must be the total budget
/// `P_BS * N_SC`.
pub fn build_extended(
    coupling: &CouplingSystem,
    kind: Direction,
    p_budget: f64,
) -> Result<ExtendedCoupling> {
    if p_budget <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "power budget must be positive, got {p_budget}"
        )));
    }
    let mut gain = coupling.gain_matrix();
    if kind == Direction::Uplink {
        // D (Psi + Phi)^T, not (D (Psi + Phi))^T: transpose the coupling
        // before the diagonal scaling.
        let n = coupling.n_links();
        let mut t = RMat::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                // gain[(r,c)] = d[r] * psi_phi[(r,c)]; we need
                // d[r] * psi_phi[(c,r)] = gain[(c,r)] * d[r] / d[c].
                t[(r, c)] = gain[(c, r)] * coupling.d[r] / coupling.d[c];
            }
        }
        gain = t;
    }
    let noise = coupling.sigma2 / (coupling.zeta * coupling.zeta);
    Ok(ExtendedCoupling {
        matrix: assemble_extended(&gain, &coupling.d, noise, p_budget),
        kind,
        p_budget,
    })
}

/// Builds the extended coupling matrix of one subcarrier (requires the
/// per-subcarrier quantization coupling). `p_budget` is the per-subcarrier
/// budget `P_BS`.
pub fn build_extended_sc(
    coupling: &CouplingSystem,
    a: usize,
    kind: Direction,
    p_budget: f64,
) -> Result<ExtendedCoupling> {
    if p_budget <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "power budget must be positive, got {p_budget}"
        )));
    }
    let mut gain = coupling.gain_matrix_sc(a)?;
    let k = coupling.k_users;
    let d = &coupling.d[a * k..(a + 1) * k];
    if kind == Direction::Uplink {
        let mut t = RMat::zeros(k, k);
        for r in 0..k {
            for c in 0..k {
                t[(r, c)] = gain[(c, r)] * d[r] / d[c];
            }
        }
        gain = t;
    }
    let noise = coupling.sigma2 / (coupling.zeta * coupling.zeta);
    Ok(ExtendedCoupling {
        matrix: assemble_extended(&gain, d, noise, p_budget),
        kind,
        p_budget,
    })
}

/// Tolerance of the power iteration on the relative eigenvalue change; kept
/// at least an order of magnitude tighter than the outer solver's stopping
/// threshold so the alternating minimization cannot falsely converge.
pub const POWER_ITER_TOL: f64 = 1e-10;

/// Iteration cap of the power iteration.
pub const POWER_ITER_MAX: usize = 10_000;

/// Dominant eigenvalue and eigenvector of a nonnegative matrix by power
/// iteration.
///
/// Iterates on `M + I` (same eigenvectors, spectrum shifted by one), which
/// is primitive whenever `M` is irreducible, so the iteration cannot cycle;
/// starting from a positive vector keeps every iterate positive. The
/// stopping rule uses the Collatz-Wielandt bounds: the Perron value lies
/// between the smallest and largest entry ratio of consecutive iterates,
/// so their gap bounds the true eigenvalue error rather than the per-step
/// change.
pub fn power_iteration(m: &RMat) -> Result<(f64, RVec)> {
    let n = m.nrows();
    if m.ncols() != n || n == 0 {
        return Err(Error::DimensionMismatch(format!(
            "power iteration needs a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    let mut v = RVec::from_element(n, 1.0 / n as f64);
    for _ in 0..POWER_ITER_MAX {
        let mut w = m * &v;
        w += &v; // the +I shift
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for (wi, vi) in w.iter().zip(v.iter()) {
            let r = wi / vi;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let norm = w.iter().sum::<f64>();
        if norm.is_nan() || norm <= 0.0 {
            return Err(Error::NonPositiveEigenvector { index: 0 });
        }
        w /= norm;
        v = w;
        if hi - lo <= POWER_ITER_TOL * hi.max(1.0) {
            return Ok((0.5 * (hi + lo) - 1.0, v));
        }
    }
    Err(Error::PowerIterationDiverged {
        iters: POWER_ITER_MAX,
    })
}

/// Perron eigenpair of an extended coupling matrix, eigenvector scaled so
/// its last entry is 1 (the power allocation occupies the leading entries).
///
/// Non-positive eigenvector entries signal a reducible coupling (degenerate
/// channel) and are rejected rather than normalized away.
pub fn dominant_eigenpair(ext: &ExtendedCoupling) -> Result<(f64, RVec)> {
    let (lambda, mut v) = power_iteration(&ext.matrix)?;
    let n = v.len();
    for (i, &x) in v.iter().enumerate() {
        if x <= 0.0 {
            return Err(Error::NonPositiveEigenvector { index: i });
        }
    }
    let last = v[n - 1];
    v /= last;
    Ok((lambda, v))
}

/// Output of the max-min balancing power solve.
#[derive(Debug, Clone)]
pub struct PowerSolution {
    /// Balance ratio `R = 1/lambda_max`: every achieved-to-target SQINR
    /// ratio equals `R` under the small-angle model.
    pub r_opt: f64,
    pub lambda_max: f64,
    /// Stacked power allocation summing to the budget.
    pub powers: Vec<f64>,
}

/// Max-min optimal powers over all stacked pairs for the given direction.
pub fn solve_power(
    coupling: &CouplingSystem,
    kind: Direction,
    p_budget: f64,
) -> Result<PowerSolution> {
    let ext = build_extended(coupling, kind, p_budget)?;
    let (lambda, v) = dominant_eigenpair(&ext)?;
    Ok(PowerSolution {
        r_opt: 1.0 / lambda,
        lambda_max: lambda,
        powers: v.as_slice()[..v.len() - 1].to_vec(),
    })
}

/// Per-subcarrier variant of [`solve_power`].
pub fn solve_power_sc(
    coupling: &CouplingSystem,
    a: usize,
    kind: Direction,
    p_budget: f64,
) -> Result<PowerSolution> {
    let ext = build_extended_sc(coupling, a, kind, p_budget)?;
    let (lambda, v) = dominant_eigenpair(&ext)?;
    Ok(PowerSolution {
        r_opt: 1.0 / lambda,
        lambda_max: lambda,
        powers: v.as_slice()[..v.len() - 1].to_vec(),
    })
}

/// Outcome of the fixed-target power solve: infeasibility is a value (sweep
/// drivers continue past it), not an error.
#[derive(Debug, Clone)]
pub enum FixedTarget {
    /// Powers meeting every target exactly, plus the spectral radius of the
    /// coupling (strictly below 1).
    Feasible { powers: Vec<f64>, lambda_max: f64 },
    /// Targets unachievable at any power: the coupling's spectral radius is
    /// at or above 1.
    Infeasible { lambda_max: f64 },
}

impl FixedTarget {
    pub fn is_feasible(&self) -> bool {
        matches!(self, FixedTarget::Feasible { .. })
    }

    pub fn lambda_max(&self) -> f64 {
        match self {
            FixedTarget::Feasible { lambda_max, .. } => *lambda_max,
            FixedTarget::Infeasible { lambda_max } => *lambda_max,
        }
    }
}

fn fixed_target_from_gain(gain: &RMat, d: &[f64], sigma2: f64, zeta: f64) -> Result<FixedTarget> {
    let (lambda, _) = power_iteration(gain)?;
    if lambda >= 1.0 {
        return Ok(FixedTarget::Infeasible { lambda_max: lambda });
    }
    let n = d.len();
    let noise = sigma2 / (zeta * zeta);
    let rhs = RVec::from_iterator(n, d.iter().map(|&x| noise * x));
    let sys = RMat::identity(n, n) - gain;
    match sys.lu().solve(&rhs) {
        Some(p) if p.iter().all(|&x| x >= 0.0) => Ok(FixedTarget::Feasible {
            powers: p.as_slice().to_vec(),
            lambda_max: lambda,
        }),
        _ => Ok(FixedTarget::Infeasible { lambda_max: lambda }),
    }
}

/// Powers achieving every target exactly, when the spectral radius of
/// `D(Psi + Phi)` (transposed for the uplink) stays below 1.
pub fn fixed_target_power(coupling: &CouplingSystem, kind: Direction) -> Result<FixedTarget> {
    let mut gain = coupling.gain_matrix();
    if kind == Direction::Uplink {
        let n = coupling.n_links();
        let mut t = RMat::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                t[(r, c)] = gain[(c, r)] * coupling.d[r] / coupling.d[c];
            }
        }
        gain = t;
    }
    fixed_target_from_gain(&gain, &coupling.d, coupling.sigma2, coupling.zeta)
}

/// Per-subcarrier variant of [`fixed_target_power`].
pub fn fixed_target_power_sc(
    coupling: &CouplingSystem,
    a: usize,
    kind: Direction,
) -> Result<FixedTarget> {
    let mut gain = coupling.gain_matrix_sc(a)?;
    let k = coupling.k_users;
    let d = &coupling.d[a * k..(a + 1) * k];
    if kind == Direction::Uplink {
        let mut t = RMat::zeros(k, k);
        for r in 0..k {
            for c in 0..k {
                t[(r, c)] = gain[(c, r)] * d[r] / d[c];
            }
        }
        gain = t;
    }
    fixed_target_from_gain(&gain, d, coupling.sigma2, coupling.zeta)
}

/// Spectral radius by a dense eigensolver; the slow cross-check for the
/// power iteration (validation tool and tests).
pub fn spectral_radius_dense(m: &RMat) -> f64 {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|e| e.norm())
        .fold(0.0, f64::max)
}

/// True when the coupling carries the dense joint quantization matrix.
pub fn phi_is_joint(coupling: &CouplingSystem) -> bool {
    matches!(coupling.phi, PhiCoupling::Joint(_))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ceq::CeqConfig;
    use crate::grid::Scenario;
    use crate::sqinr::{build_coupling, dl_sqinr_approx_all, PrecodingState, QuantModel};
    use crate::{CMat, Cx};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn random_unit_columns(n_bs: usize, k: usize, rng: &mut ChaCha12Rng) -> CMat {
        let mut t = CMat::from_fn(n_bs, k, |_, _| crate::channel::standard_complex(rng));
        for c in 0..k {
            let norm = t.column(c).norm();
            let mut col = t.column_mut(c);
            col /= Cx::new(norm, 0.0);
        }
        t
    }

    fn random_setup(
        n_bs: usize,
        k: usize,
        n_sc: usize,
        seed: u64,
    ) -> (Vec<CMat>, Vec<CMat>, Vec<f64>) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let freq: Vec<CMat> = (0..n_sc)
            .map(|_| CMat::from_fn(n_bs, k, |_, _| crate::channel::standard_complex(&mut rng)))
            .collect();
        let beams: Vec<CMat> = (0..n_sc)
            .map(|_| random_unit_columns(n_bs, k, &mut rng))
            .collect();
        let targets = vec![1.5; k * n_sc];
        (freq, beams, targets)
    }

    #[test]
    fn single_link_extended_matrix_closed_form() {
        // K = 1, N_SC = 1, no coupling: the 2x2 matrix is
        // [[0, a], [0, a/P]] with a = (sigma^2/zeta^2) * gamma/|h^T t|^2,
        // whose dominant eigenpair is (a/P, [P, 1]).
        let ceq = CeqConfig::unquantized();
        let sigma2 = 0.5;
        let p_bs = 2.0;
        let h = CMat::from_fn(3, 1, |r, _| Cx::new(1.0 + r as f64, -(r as f64)));
        let freq = vec![h.clone()];
        let scn = Scenario::fully_active(&freq, &ceq, sigma2);
        let t = h.map(|v| v.conj()) / Cx::new(h.column(0).norm(), 0.0);
        let state = PrecodingState::new(vec![t], vec![3.0]);
        let coupling = build_coupling(&state, &scn, QuantModel::Joint).unwrap();
        let ext = build_extended(&coupling, Direction::Downlink, p_bs).unwrap();
        let a = sigma2 * coupling.d[0];
        assert_abs_diff_eq!(ext.matrix[(0, 0)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ext.matrix[(0, 1)], a, epsilon = 1e-12);
        assert_abs_diff_eq!(ext.matrix[(1, 0)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ext.matrix[(1, 1)], a / p_bs, epsilon = 1e-12);

        let (lambda, v) = dominant_eigenpair(&ext).unwrap();
        assert_abs_diff_eq!(lambda, a / p_bs, epsilon = 1e-9);
        assert_abs_diff_eq!(v[0], p_bs, epsilon = 1e-7);

        // Balancing uses the whole budget and achieves gamma * R exactly.
        let sol = solve_power(&coupling, Direction::Downlink, p_bs).unwrap();
        let mut state2 = state.clone();
        state2.dl_power = sol.powers.clone();
        let achieved = dl_sqinr_approx_all(&state2, &scn).unwrap();
        assert_abs_diff_eq!(achieved[0] / 3.0, sol.r_opt, epsilon = 1e-8 * sol.r_opt);
    }

    #[test]
    fn dl_and_ul_extended_matrices_share_spectra() {
        for seed in 0..5 {
            let (freq, beams, targets) = random_setup(6, 3, 4, seed);
            let ceq = CeqConfig::bits(3).unwrap();
            let scn = Scenario::fully_active(&freq, &ceq, 0.8);
            let state = PrecodingState::new(beams, targets);
            let coupling = build_coupling(&state, &scn, QuantModel::Joint).unwrap();
            let dl = build_extended(&coupling, Direction::Downlink, 4.0).unwrap();
            let ul = build_extended(&coupling, Direction::Uplink, 4.0).unwrap();
            let mut ev_dl: Vec<f64> = dl
                .matrix
                .clone()
                .complex_eigenvalues()
                .iter()
                .map(|e| e.norm())
                .collect();
            let mut ev_ul: Vec<f64> = ul
                .matrix
                .clone()
                .complex_eigenvalues()
                .iter()
                .map(|e| e.norm())
                .collect();
            ev_dl.sort_by(f64::total_cmp);
            ev_ul.sort_by(f64::total_cmp);
            for (a, b) in ev_dl.iter().zip(ev_ul.iter()) {
                assert!((a - b).abs() < 1e-10 * a.max(1.0), "{a} vs {b}");
            }
            // Entrywise nonnegativity of both extended matrices.
            assert!(dl.matrix.iter().all(|&v| v >= 0.0));
            assert!(ul.matrix.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn power_iteration_matches_dense_eigensolver() {
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        for _ in 0..10 {
            let m = RMat::from_fn(5, 5, |_, _| rand::Rng::random::<f64>(&mut rng));
            let (lambda, v) = power_iteration(&m).unwrap();
            let dense = spectral_radius_dense(&m);
            assert!((lambda - dense).abs() < 1e-9 * dense.max(1.0));
            // Residual check: M v = lambda v.
            let res = (&m * &v - &v * lambda).norm();
            assert!(res < 1e-8, "residual {res}");
        }
    }

    #[test]
    fn eigen_homogeneity_under_scaling() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let m = RMat::from_fn(4, 4, |_, _| rand::Rng::random::<f64>(&mut rng));
        let (l1, v1) = power_iteration(&m).unwrap();
        let (l2, v2) = power_iteration(&m.scale(3.0)).unwrap();
        assert_abs_diff_eq!(l2, 3.0 * l1, epsilon = 1e-8 * l1.max(1.0));
        assert!((&v1 - &v2).norm() < 1e-7);
    }

    #[test]
    fn solve_power_balances_all_ratios_and_budget() {
        for seed in [3u64, 17, 23] {
            let (freq, beams, targets) = random_setup(8, 3, 4, seed);
            let ceq = CeqConfig::bits(2).unwrap();
            let scn = Scenario::fully_active(&freq, &ceq, 0.5);
            let mut state = PrecodingState::new(beams, targets.clone());
            let coupling = build_coupling(&state, &scn, QuantModel::Joint).unwrap();
            let p_budget = 4.0 * 3.0;
            let sol = solve_power(&coupling, Direction::Downlink, p_budget).unwrap();
            let total: f64 = sol.powers.iter().sum();
            assert!((total - p_budget).abs() <= 1e-6 * p_budget);

            state.dl_power = sol.powers.clone();
            let achieved = dl_sqinr_approx_all(&state, &scn).unwrap();
            for (i, (ach, tgt)) in achieved.iter().zip(targets.iter()).enumerate() {
                let ratio = ach / tgt;
                assert!(
                    (ratio - sol.r_opt).abs() <= 1e-6 * sol.r_opt,
                    "link {i}: ratio {ratio} vs R {}",
                    sol.r_opt
                );
            }
        }
    }

    #[test]
    fn r_opt_monotone_in_budget() {
        let (freq, beams, targets) = random_setup(6, 2, 2, 5);
        let ceq = CeqConfig::bits(2).unwrap();
        let scn = Scenario::fully_active(&freq, &ceq, 0.5);
        let state = PrecodingState::new(beams, targets);
        let coupling = build_coupling(&state, &scn, QuantModel::Joint).unwrap();
        let mut prev = 0.0;
        for p in [0.5, 1.0, 2.0, 8.0, 32.0] {
            let sol = solve_power(&coupling, Direction::Downlink, p).unwrap();
            assert!(sol.r_opt >= prev, "R must not decrease with budget");
            prev = sol.r_opt;
        }
    }

    #[test]
    fn fixed_target_achieves_targets_exactly() {
        let (freq, beams, mut targets) = random_setup(8, 3, 3, 11);
        let ceq = CeqConfig::bits(3).unwrap();
        let scn = Scenario::fully_active(&freq, &ceq, 0.5);
        // Scale targets to a comfortably feasible level first.
        let state = PrecodingState::new(beams.clone(), targets.clone());
        let coupling = build_coupling(&state, &scn, QuantModel::Joint).unwrap();
        let lambda = spectral_radius_dense(&coupling.gain_matrix());
        let scale = 0.6 / lambda;
        for t in targets.iter_mut() {
            *t *= scale;
        }
        let mut state = PrecodingState::new(beams, targets.clone());
        let coupling = build_coupling(&state, &scn, QuantModel::Joint).unwrap();
        match fixed_target_power(&coupling, Direction::Downlink).unwrap() {
            FixedTarget::Feasible { powers, lambda_max } => {
                assert!(lambda_max < 1.0);
                state.dl_power = powers;
                let achieved = dl_sqinr_approx_all(&state, &scn).unwrap();
                for (ach, tgt) in achieved.iter().zip(targets.iter()) {
                    assert!(
                        (ach - tgt).abs() <= 1e-8 * tgt,
                        "achieved {ach} vs target {tgt}"
                    );
                }
            }
            FixedTarget::Infeasible { .. } => panic!("scaled targets must be feasible"),
        }
    }

    #[test]
    fn fixed_target_reports_infeasible_past_the_boundary() {
        let (freq, beams, targets) = random_setup(6, 3, 2, 13);
        let ceq = CeqConfig::bits(2).unwrap();
        let scn = Scenario::fully_active(&freq, &ceq, 0.5);
        let state = PrecodingState::new(beams.clone(), targets.clone());
        let coupling = build_coupling(&state, &scn, QuantModel::Joint).unwrap();
        let lambda = spectral_radius_dense(&coupling.gain_matrix());
        // D scales linearly with the targets, so pushing them past the
        // Perron boundary must flip the verdict.
        let scale_up: Vec<f64> = targets.iter().map(|t| t * 1.2 / lambda).collect();
        let state_up = PrecodingState::new(beams, scale_up);
        let coupling_up = build_coupling(&state_up, &scn, QuantModel::Joint).unwrap();
        match fixed_target_power(&coupling_up, Direction::Downlink).unwrap() {
            FixedTarget::Infeasible { lambda_max } => {
                assert!(lambda_max >= 1.0 - 1e-9, "lambda {lambda_max}")
            }
            FixedTarget::Feasible { .. } => panic!("targets beyond the boundary must be infeasible"),
        }
    }

    #[test]
    fn ul_fixed_target_achieves_targets_under_ul_sqinr() {
        // The uplink solve must meet every target exactly under the uplink
        // SQINR model evaluated directly from channel and beamformers.
        let (freq, beams, mut targets) = random_setup(8, 3, 3, 57);
        let ceq = CeqConfig::bits(2).unwrap();
        let scn = Scenario::fully_active(&freq, &ceq, 0.5);
        let state = PrecodingState::new(beams.clone(), targets.clone());
        let coupling = build_coupling(&state, &scn, QuantModel::Joint).unwrap();
        let lambda = spectral_radius_dense(&coupling.gain_matrix());
        for t in targets.iter_mut() {
            *t *= 0.6 / lambda;
        }
        let state = PrecodingState::new(beams, targets.clone());
        let coupling = build_coupling(&state, &scn, QuantModel::Joint).unwrap();
        match fixed_target_power(&coupling, Direction::Uplink).unwrap() {
            FixedTarget::Feasible { powers, .. } => {
                for a in 0..3 {
                    for k in 0..3 {
                        let t = crate::CVec::from_column_slice(
                            state.beamformers[a].column(k).as_slice(),
                        );
                        let achieved = crate::sqinr::ul_sqinr(
                            &t,
                            &powers,
                            &scn,
                            QuantModel::Joint,
                            k,
                            a,
                        )
                        .unwrap();
                        let tgt = targets[scn.link(k, a)];
                        assert!(
                            (achieved - tgt).abs() <= 1e-8 * tgt,
                            "({k},{a}): achieved {achieved} vs target {tgt}"
                        );
                    }
                }
            }
            FixedTarget::Infeasible { .. } => panic!("scaled targets must be feasible"),
        }
    }

    #[test]
    fn duality_equal_sum_power() {
        // Fixed-target DL and UL powers have equal 1-norms for any
        // beamformers and feasible targets.
        for seed in 0..8 {
            let (freq, beams, mut targets) = random_setup(6, 2, 3, 100 + seed);
            let ceq = CeqConfig::bits(2).unwrap();
            let scn = Scenario::fully_active(&freq, &ceq, 0.4);
            let state = PrecodingState::new(beams.clone(), targets.clone());
            let coupling = build_coupling(&state, &scn, QuantModel::Joint).unwrap();
            let lambda = spectral_radius_dense(&coupling.gain_matrix());
            for t in targets.iter_mut() {
                *t *= 0.7 / lambda;
            }
            let state = PrecodingState::new(beams, targets);
            let coupling = build_coupling(&state, &scn, QuantModel::Joint).unwrap();
            let dl = fixed_target_power(&coupling, Direction::Downlink).unwrap();
            let ul = fixed_target_power(&coupling, Direction::Uplink).unwrap();
            match (dl, ul) {
                (
                    FixedTarget::Feasible { powers: q, .. },
                    FixedTarget::Feasible { powers: p, .. },
                ) => {
                    let sq: f64 = q.iter().sum();
                    let sp: f64 = p.iter().sum();
                    assert!(
                        (sq - sp).abs() <= 1e-8 * sq,
                        "seed {seed}: ||q|| = {sq}, ||p|| = {sp}"
                    );
                }
                _ => panic!("seed {seed}: scaled targets must be feasible"),
            }
        }
    }

    #[test]
    fn rejects_nonpositive_budget() {
        let (freq, beams, targets) = random_setup(4, 2, 2, 1);
        let ceq = CeqConfig::bits(2).unwrap();
        let scn = Scenario::fully_active(&freq, &ceq, 0.5);
        let state = PrecodingState::new(beams, targets);
        let coupling = build_coupling(&state, &scn, QuantModel::Joint).unwrap();
        assert!(build_extended(&coupling, Direction::Downlink, 0.0).is_err());
        assert!(build_extended(&coupling, Direction::Downlink, -1.0).is_err());
    }

    #[test]
    fn per_subcarrier_solves_balance_each_subcarrier() {
        let (freq, beams, targets) = random_setup(6, 2, 3, 21);
        let ceq = CeqConfig::bits(2).unwrap();
        let scn = Scenario::fully_active(&freq, &ceq, 0.5);
        let state = PrecodingState::new(beams, targets);
        let coupling = build_coupling(&state, &scn, QuantModel::PerSubcarrier).unwrap();
        assert!(!phi_is_joint(&coupling));
        for a in 0..3 {
            let sol = solve_power_sc(&coupling, a, Direction::Uplink, 2.0).unwrap();
            let total: f64 = sol.powers.iter().sum();
            assert!((total - 2.0).abs() < 1e-6 * 2.0);
            assert!(sol.r_opt > 0.0);
        }
    }
}
