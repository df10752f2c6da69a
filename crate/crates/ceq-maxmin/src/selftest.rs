//! User-facing self-test: runs the library's core invariants with
//! summarized tolerances. Backs the command-line `validate` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::ceq::{CeqConfig, CeqResolution};
use crate::channel::standard_complex;
use crate::error::Result;
use crate::grid::Scenario;
use crate::power::{
    fixed_target_power, spectral_radius_dense, Direction, FixedTarget,
};
use crate::solver::{run, SolverConfig};
use crate::sqinr::{
    build_coupling_with_debug, dl_sqinr_approx_all, CouplingDebug, PrecodingState, QuantModel,
};
use crate::{CMat, Cx};

/// One invariant check: the measured violation against its allowance.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub measured: f64,
    pub allowed: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.measured <= self.allowed
    }
}

/// Fault-injection switches so the self-test can demonstrate its own
/// sensitivity.
#[derive(Debug, Clone, Copy, Default)]
pub struct SelfTestOptions {
    /// Flip the sign of the quantization coupling when building the
    /// balancing systems; the duality check must then fail.
    pub inject_phi_sign_error: bool,
}

fn random_unit_columns(n_bs: usize, k: usize, rng: &mut ChaCha12Rng) -> CMat {
    let mut t = CMat::from_fn(n_bs, k, |_, _| standard_complex(rng));
    for c in 0..k {
        let norm = t.column(c).norm();
        let mut col = t.column_mut(c);
        col /= Cx::new(norm, 0.0);
    }
    t
}

fn random_channels(n_bs: usize, k: usize, n_sc: usize, rng: &mut ChaCha12Rng) -> Vec<CMat> {
    (0..n_sc)
        .map(|_| CMat::from_fn(n_bs, k, |_, _| standard_complex(rng)))
        .collect()
}

/// Duality: fixed-target downlink and uplink powers share their 1-norm, and
/// the downlink solution achieves every target under an independent
/// evaluation of the small-angle SQINR.
fn duality_check(seed: u64, debug: CouplingDebug) -> Result<Vec<CheckReport>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let ceq = CeqConfig::bits(2)?;
    let mut worst_norm_gap = 0.0f64;
    let mut worst_target_gap = 0.0f64;
    for _ in 0..20 {
        let freq = random_channels(8, 3, 4, &mut rng);
        let scn = Scenario::fully_active(&freq, &ceq, 0.5);
        let beams = (0..4).map(|_| random_unit_columns(8, 3, &mut rng)).collect();
        let mut state = PrecodingState::new(beams, vec![1.0; scn.n_links()]);
        // Scale the targets to a comfortably feasible level.
        let c0 = build_coupling_with_debug(&state, &scn, QuantModel::Joint, CouplingDebug::default())?;
        let lambda = spectral_radius_dense(&c0.gain_matrix());
        state.targets = vec![0.6 / lambda; scn.n_links()];
        // A corrupted coupling may break the nonnegative eigen machinery
        // outright; that counts as a failed check, not an aborted run.
        let solves = build_coupling_with_debug(&state, &scn, QuantModel::Joint, debug)
            .and_then(|coupling| {
                let dl = fixed_target_power(&coupling, Direction::Downlink)?;
                let ul = fixed_target_power(&coupling, Direction::Uplink)?;
                Ok((dl, ul))
            });
        match solves {
            Ok((
                FixedTarget::Feasible { powers: q, .. },
                FixedTarget::Feasible { powers: p, .. },
            )) => {
                let sq: f64 = q.iter().sum();
                let sp: f64 = p.iter().sum();
                worst_norm_gap = worst_norm_gap.max((sq - sp).abs() / sq.max(1e-300));
                // Independent route: evaluate the achieved SQINRs directly
                // from the channel and beamformers, bypassing the coupling
                // matrices.
                state.dl_power = q;
                let achieved = dl_sqinr_approx_all(&state, &scn)?;
                for (ach, tgt) in achieved.iter().zip(state.targets.iter()) {
                    worst_target_gap = worst_target_gap.max((ach - tgt).abs() / tgt);
                }
            }
            _ => {
                worst_target_gap = f64::INFINITY;
                worst_norm_gap = f64::INFINITY;
            }
        }
    }
    Ok(vec![
        CheckReport {
            name: "duality: ||p||_1 equals ||q||_1 (relative)",
            measured: worst_norm_gap,
            allowed: 1e-8,
        },
        CheckReport {
            name: "duality: fixed-target powers achieve targets (relative)",
            measured: worst_target_gap,
            allowed: 1e-6,
        },
    ])
}

/// Monotone convergence of the alternating solver.
fn monotonicity_check(seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let ceq = CeqConfig::bits(3)?;
    let mut worst_increase = 0.0f64;
    for _ in 0..10 {
        let freq = random_channels(8, 2, 4, &mut rng);
        let scn = Scenario::fully_active(&freq, &ceq, 0.4);
        let sol = run(&scn, &vec![2.0; scn.n_links()], 1.0, &SolverConfig::default())?;
        for w in sol.traces[0].lambda_history.windows(2) {
            worst_increase = worst_increase.max(w[1] - w[0]);
        }
    }
    Ok(CheckReport {
        name: "solver: dominant eigenvalue nonincreasing (absolute)",
        measured: worst_increase,
        allowed: 1e-9,
    })
}

/// Monte Carlo arcsine law at 2e5 samples, reported as error over standard
/// errors (allowance 3).
fn arcsine_check(seed: u64) -> Result<Vec<CheckReport>> {
    let n = 200_000usize;
    let rho = Cx::new(0.45, -0.3);
    let mut reports = Vec::new();
    for (name, res) in [
        ("arcsine Monte Carlo, b = 2 (error / SE)", CeqResolution::Bits(2)),
        ("arcsine Monte Carlo, b = 3 (error / SE)", CeqResolution::Bits(3)),
        ("arcsine Monte Carlo, b = inf (error / SE)", CeqResolution::Infinite),
    ] {
        let cfg = CeqConfig::new(res)?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let a = (1.0 - rho.norm_sqr()).sqrt();
        let mut sum = Cx::new(0.0, 0.0);
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let u = standard_complex(&mut rng);
            let v = standard_complex(&mut rng);
            let z1 = cfg.quantize(u);
            let z2 = cfg.quantize(rho.conj() * u + a * v);
            let prod = z1 * z2.conj();
            sum += prod;
            sum_sq += prod.norm_sqr();
        }
        let mean = sum / n as f64;
        let var = (sum_sq / n as f64 - mean.norm_sqr()).max(0.0);
        let se = (var / n as f64).sqrt();
        let err = (mean - cfg.arcsine_scalar(rho)).norm();
        reports.push(CheckReport {
            name,
            measured: err / se,
            allowed: 3.0,
        });
    }
    Ok(reports)
}

/// Power iteration against the dense eigensolver.
fn eigen_oracle_check(seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let m = crate::RMat::from_fn(7, 7, |_, _| rng.random::<f64>());
        let (lambda, _) = crate::power::power_iteration(&m)?;
        let dense = spectral_radius_dense(&m);
        worst = worst.max((lambda - dense).abs() / dense);
    }
    Ok(CheckReport {
        name: "power iteration vs dense eigensolver (relative)",
        measured: worst,
        allowed: 1e-9,
    })
}

/// Runs every self-test check. All pass on a healthy build; the
/// fault-injection options exist to prove the checks can fail.
pub fn run_all(seed: u64, options: SelfTestOptions) -> Result<Vec<CheckReport>> {
    let debug = CouplingDebug {
        phi_sign_flip: options.inject_phi_sign_error,
    };
    let mut reports = duality_check(seed, debug)?;
    reports.push(monotonicity_check(seed.wrapping_add(1))?);
    reports.extend(arcsine_check(seed.wrapping_add(2))?);
    reports.push(eigen_oracle_check(seed.wrapping_add(3))?);
    Ok(reports)
}
