//! Sweep execution: the cartesian grid of declared axes, deterministic
//! per-point seeding, parallel evaluation and ordered CSV emission.

use std::fmt::Write as _;

use anyhow::{Context, Result};
use ceq_maxmin::baselines::{unquantized_rzf, unquantized_zf, zf_equal_power, zf_opt_power};
use ceq_maxmin::ceq::{CeqConfig, CeqResolution};
use ceq_maxmin::channel::{generate, ChannelConfig, ChannelRealization};
use ceq_maxmin::grid::{ActiveSet, Scenario};
use ceq_maxmin::linksim::{run_link_sim, LinkConfig};
use ceq_maxmin::metrics::{min_rate, per_user_rate, sum_rate, RateRow};
use ceq_maxmin::solver::{dither_line_search, run, BeamformingSolution, DitherConfig, SolverConfig};
use ceq_maxmin::sqinr::{
    dl_sqinr_approx_all, dl_sqinr_exact_all, PaMode, PrecodingState, QnMode, QuantModel,
};
use ceq_maxmin::CMat;
use rayon::prelude::*;

use crate::config::{db_to_linear, dbm_to_watts, Algorithm, ExperimentFile};

/// One grid point of the sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub index: usize,
    pub algorithm: Algorithm,
    pub resolution_label: String,
    pub resolution: CeqResolution,
    pub k_users: usize,
    pub n_bs: usize,
    pub n_sc: usize,
    pub p_bs_dbm: f64,
    pub est_error: f64,
}

pub fn enumerate_points(file: &ExperimentFile) -> Result<Vec<SweepPoint>> {
    let e = &file.experiment;
    let mut points = Vec::new();
    let mut index = 0;
    for alg in &e.algorithms {
        let algorithm = Algorithm::parse(alg)?;
        for res in &e.resolutions {
            let resolution = crate::config::parse_resolution(res)?;
            for &k in &e.k_users {
                for &n_bs in &e.n_bs {
                    for &n_sc in &e.n_sc {
                        for &p in &e.p_bs_dbm {
                            for &err in &e.est_error {
                                points.push(SweepPoint {
                                    index,
                                    algorithm,
                                    resolution_label: res.clone(),
                                    resolution,
                                    k_users: k,
                                    n_bs,
                                    n_sc,
                                    p_bs_dbm: p,
                                    est_error: err,
                                });
                                index += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(points)
}

/// Deterministic substream: one seed per (master, point, trial, salt).
fn derive_seed(master: u64, point: usize, trial: usize, salt: u64) -> u64 {
    let mut x = master
        ^ (point as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (trial as u64).wrapping_mul(0xD1B5_4A32_D192_ED03)
        ^ salt.wrapping_mul(0x94D0_49BB_1331_11EB);
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Result rows of one (point, trial) execution.
pub struct TrialOutput {
    pub rate_row: RateRow,
    pub trace_rows: String,
    pub linksim_rows: String,
}

fn zero_augmented(freq: &[CMat], k_total: usize) -> Vec<CMat> {
    let k_true = freq[0].ncols();
    if k_total == k_true {
        return freq.to_vec();
    }
    freq.iter()
        .map(|h| {
            let mut aug = CMat::zeros(h.nrows(), k_total);
            aug.view_mut((0, 0), (h.nrows(), k_true)).copy_from(h);
            aug
        })
        .collect()
}

/// Scores a solution against the true channel: the design may have used a
/// degraded estimate and may carry dummy users, so the true-channel grid is
/// zero-padded to the solution's user count and only true users are
/// reported (stacked `a * k_true + k`).
fn evaluate_on_true(
    sol: &BeamformingSolution,
    freq_true: &[CMat],
    n_sc_total: usize,
    ceq: &CeqConfig,
    sigma2: f64,
) -> ceq_maxmin::Result<(Vec<f64>, Vec<f64>)> {
    let k_total = sol.beamformers[0].ncols();
    let k_true = sol.k_true;
    let freq = zero_augmented(freq_true, k_total);
    let scn = Scenario::with_guards(&freq, n_sc_total, ceq, sigma2);
    let state = PrecodingState {
        beamformers: sol.beamformers.clone(),
        dl_power: sol.dl_power.clone(),
        ul_power: sol.ul_power.clone(),
        per_antenna: Some(sol.per_antenna.clone()),
        targets: sol.targets.clone(),
    };
    let approx = dl_sqinr_approx_all(&state, &scn)?;
    let exact = dl_sqinr_exact_all(&state, &scn, QnMode::Exact, None)?;
    let pick = |all: &[f64]| {
        let mut out = Vec::with_capacity(k_true * freq.len());
        for a in 0..freq.len() {
            for k in 0..k_true {
                out.push(all[a * k_total + k]);
            }
        }
        out
    };
    Ok((pick(&approx), pick(&exact)))
}

fn dispatch_algorithm(
    point: &SweepPoint,
    file: &ExperimentFile,
    scn_design: &Scenario,
    p_bs: f64,
) -> ceq_maxmin::Result<BeamformingSolution> {
    let targets = vec![db_to_linear(file.experiment.target_sqinr_db); scn_design.n_links()];
    let base_cfg = SolverConfig {
        epsilon: file.solver.epsilon,
        max_outer_iters: file.solver.max_outer_iters,
        ..SolverConfig::default()
    };
    let dither = file.dither.as_ref().map(|d| DitherConfig {
        n_dummy: d.n_dummy,
        gamma_grid: std::iter::once(0.0)
            .chain(d.gamma_grid_db.iter().map(|&db| db_to_linear(db)))
            .collect(),
    });
    let maxmin = |variant: QuantModel, pa: PaMode| -> ceq_maxmin::Result<BeamformingSolution> {
        let cfg = SolverConfig {
            variant,
            per_antenna: pa,
            dither: dither.clone(),
            ..base_cfg.clone()
        };
        if cfg.dither.is_some() {
            Ok(dither_line_search(scn_design, &targets, p_bs, &cfg)?.solution)
        } else {
            run(scn_design, &targets, p_bs, &cfg)
        }
    };
    match point.algorithm {
        Algorithm::MaxminJoint => maxmin(QuantModel::Joint, PaMode::Restore),
        Algorithm::MaxminSc => maxmin(QuantModel::PerSubcarrier, PaMode::Restore),
        Algorithm::MaxminScEqual => maxmin(QuantModel::PerSubcarrier, PaMode::Equal),
        Algorithm::ZfOpt => zf_opt_power(scn_design, &targets, p_bs),
        Algorithm::ZfEqual => zf_equal_power(scn_design, &targets, p_bs),
        Algorithm::UnqZf => unquantized_zf(
            scn_design.freq,
            scn_design.n_sc_total,
            scn_design.sigma2,
            &targets,
            p_bs,
        ),
        Algorithm::UnqRzf => unquantized_rzf(
            scn_design.freq,
            scn_design.n_sc_total,
            scn_design.sigma2,
            &targets,
            p_bs,
            None,
        ),
    }
}

fn restrict(freq: &[CMat], active: &ActiveSet) -> Vec<CMat> {
    active.indices().iter().map(|&n| freq[n].clone()).collect()
}

pub fn run_trial(
    file: &ExperimentFile,
    point: &SweepPoint,
    trial: usize,
    master_seed: u64,
) -> Result<TrialOutput> {
    let e = &file.experiment;
    let sigma2 = dbm_to_watts(e.noise_power_dbm);
    let p_bs = dbm_to_watts(point.p_bs_dbm);
    let channel_cfg = ChannelConfig {
        n_bs: point.n_bs,
        k_users: point.k_users,
        n_sc: point.n_sc,
        l_taps: file.channel.l_taps,
        pdp_decay: file.channel.pdp_decay,
        seed: derive_seed(master_seed, point.index, trial, 0),
        est_error: point.est_error,
        user_correlation: file.channel.user_correlation,
    };
    let realization_id = trial as u64;

    let outcome = (|| -> ceq_maxmin::Result<(BeamformingSolution, ChannelRealization, ActiveSet, CeqConfig)> {
        let channel = generate(&channel_cfg)?;
        let active = match file.linksim.as_ref().and_then(|l| l.n_active) {
            Some(n_active) => ActiveSet::centered(point.n_sc, n_active)?,
            None => ActiveSet::all(point.n_sc),
        };
        // The unquantized references run on the ideal linear DAC regardless
        // of the resolution axis.
        let ceq = match point.algorithm {
            Algorithm::UnqZf | Algorithm::UnqRzf => CeqConfig::unquantized(),
            _ => CeqConfig::new(point.resolution)?,
        };
        let design_freq = restrict(&channel.freq_est, &active);
        let scn_design = Scenario::with_guards(&design_freq, point.n_sc, &ceq, sigma2);
        let sol = dispatch_algorithm(point, file, &scn_design, p_bs)?;
        Ok((sol, channel, active, ceq))
    })();

    let (sol, channel, active, ceq) = match outcome {
        Ok(v) => v,
        Err(err) => {
            // Degenerate draws and infeasible points produce a row, not an
            // aborted sweep.
            let rate_row = RateRow {
                realization_id,
                algorithm: point.algorithm.name().into(),
                resolution: point.resolution_label.clone(),
                k_users: point.k_users,
                n_bs: point.n_bs,
                n_sc: point.n_sc,
                p_bs_dbm: point.p_bs_dbm,
                est_error: point.est_error,
                status: format!("infeasible({err})").replace(',', ";"),
                sum_rate: f64::NAN,
                min_rate: f64::NAN,
                per_user: Vec::new(),
            };
            return Ok(TrialOutput {
                rate_row,
                trace_rows: String::new(),
                linksim_rows: String::new(),
            });
        }
    };

    let true_freq = restrict(&channel.freq, &active);
    let (approx, exact) = evaluate_on_true(&sol, &true_freq, point.n_sc, &ceq, sigma2)
        .context("true-channel evaluation failed")?;
    let sqinrs = if e.rate_model == "approx" { &approx } else { &exact };
    let sum = sum_rate(sqinrs, sol.k_true, point.n_sc).context("sum rate")?;
    let min = min_rate(sqinrs, sol.k_true, point.n_sc).context("min rate")?;
    let per_user = (0..sol.k_true)
        .map(|k| per_user_rate(sqinrs, sol.k_true, point.n_sc, k))
        .collect();

    let mut trace_rows = String::new();
    for (t_idx, trace) in sol.traces.iter().enumerate() {
        for (iter, lambda) in trace.lambda_history.iter().enumerate() {
            let _ = writeln!(
                trace_rows,
                "{},{},{},{},{},{},{}",
                point.index,
                realization_id,
                point.algorithm.name(),
                t_idx,
                iter + 1,
                lambda,
                1.0 / lambda
            );
        }
    }

    let mut linksim_rows = String::new();
    if let Some(l) = &file.linksim {
        let link_cfg = LinkConfig {
            constellation: file.constellation().expect("linksim section present"),
            n_ofdm_symbols: l.n_ofdm_symbols,
            n_cp: l.n_cp,
            noise_power: sigma2,
            seed: derive_seed(master_seed, point.index, trial, 1),
            scaling: file.scaling_mode().expect("linksim section present"),
        };
        let report = run_link_sim(&sol, &channel, &active, &ceq, &link_cfg, None)
            .context("link simulation failed")?;
        for a in 0..report.n_active {
            for k in 0..report.k_true {
                let _ = writeln!(
                    linksim_rows,
                    "{},{},{},sqinr,{},{},{}",
                    point.index,
                    realization_id,
                    point.algorithm.name(),
                    k,
                    active.subcarrier(a),
                    report.empirical_sqinr[a * report.k_true + k]
                );
            }
        }
        for k in 0..report.k_true {
            let _ = writeln!(
                linksim_rows,
                "{},{},{},ber,{},,{}",
                point.index,
                realization_id,
                point.algorithm.name(),
                k,
                report.ber[k]
            );
        }
    }

    Ok(TrialOutput {
        rate_row: RateRow {
            realization_id,
            algorithm: point.algorithm.name().into(),
            resolution: point.resolution_label.clone(),
            k_users: point.k_users,
            n_bs: point.n_bs,
            n_sc: point.n_sc,
            p_bs_dbm: point.p_bs_dbm,
            est_error: point.est_error,
            status: "ok".into(),
            sum_rate: sum,
            min_rate: min,
            per_user,
        },
        trace_rows,
        linksim_rows,
    })
}

/// Runs every (point, trial) pair, in parallel, merged in point order.
pub fn run_all_points(
    file: &ExperimentFile,
    points: &[SweepPoint],
    master_seed: u64,
) -> Result<Vec<TrialOutput>> {
    let trials = file.experiment.trials;
    let jobs: Vec<(usize, usize)> = points
        .iter()
        .flat_map(|p| (0..trials).map(move |t| (p.index, t)))
        .collect();
    jobs.into_par_iter()
        .map(|(pi, trial)| run_trial(file, &points[pi], trial, master_seed))
        .collect()
}
