//! Experiment configuration: a TOML file declaring the sweep axes and the
//! fixed parameters. Powers are written in dBm and converted to Watts at
//! parse time so everything downstream works in one unit.

use anyhow::{bail, Context};
use ceq_maxmin::ceq::CeqResolution;
use ceq_maxmin::linksim::{Constellation, ScalingMode};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub experiment: ExperimentSection,
    pub channel: ChannelSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub dither: Option<DitherSection>,
    #[serde(default)]
    pub linksim: Option<LinkSimSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    pub seed: u64,
    pub trials: usize,
    pub algorithms: Vec<String>,
    /// CEQ resolutions: integers ("2", "3", ...) or "inf".
    pub resolutions: Vec<String>,
    pub k_users: Vec<usize>,
    pub n_bs: Vec<usize>,
    pub n_sc: Vec<usize>,
    pub p_bs_dbm: Vec<f64>,
    #[serde(default = "default_est_error")]
    pub est_error: Vec<f64>,
    pub target_sqinr_db: f64,
    pub noise_power_dbm: f64,
    /// "exact" (arcsine law, default) or "approx" (small-angle) rates.
    #[serde(default = "default_rate_model")]
    pub rate_model: String,
}

fn default_est_error() -> Vec<f64> {
    vec![0.0]
}

fn default_rate_model() -> String {
    "exact".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub l_taps: usize,
    pub pdp_decay: f64,
    #[serde(default)]
    pub user_correlation: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub epsilon: f64,
    pub max_outer_iters: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            max_outer_iters: 50,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DitherSection {
    pub n_dummy: usize,
    /// Common dummy-user target grid in dB; a zero (dither off) point is
    /// prepended automatically.
    pub gamma_grid_db: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSimSection {
    /// "qpsk" or "qam16".
    pub constellation: String,
    pub n_ofdm_symbols: usize,
    pub n_cp: usize,
    /// Occupied subcarriers (centered block); omit for all.
    #[serde(default)]
    pub n_active: Option<usize>,
    /// "genie" (default) or "pilot".
    #[serde(default = "default_scaling")]
    pub scaling: String,
    #[serde(default = "default_pilot_symbols")]
    pub pilot_symbols: usize,
}

fn default_scaling() -> String {
    "genie".into()
}

fn default_pilot_symbols() -> usize {
    16
}

/// `P[W] = 10^((dBm - 30)/10)`.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Sweep algorithms; the list mirrors the comparison set of the experiment
/// driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    MaxminJoint,
    MaxminSc,
    MaxminScEqual,
    ZfOpt,
    ZfEqual,
    UnqZf,
    UnqRzf,
}

impl Algorithm {
    pub fn parse(s: &str) -> anyhow::Result<Self> {
        Ok(match s {
            "maxmin_joint" => Algorithm::MaxminJoint,
            "maxmin_sc" => Algorithm::MaxminSc,
            "maxmin_sc_equal" => Algorithm::MaxminScEqual,
            "zf_opt" => Algorithm::ZfOpt,
            "zf_equal" => Algorithm::ZfEqual,
            "unq_zf" => Algorithm::UnqZf,
            "unq_rzf" => Algorithm::UnqRzf,
            other => bail!(
                "experiment.algorithms: unknown algorithm {other:?} (expected one of \
                 maxmin_joint, maxmin_sc, maxmin_sc_equal, zf_opt, zf_equal, unq_zf, unq_rzf)"
            ),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::MaxminJoint => "maxmin_joint",
            Algorithm::MaxminSc => "maxmin_sc",
            Algorithm::MaxminScEqual => "maxmin_sc_equal",
            Algorithm::ZfOpt => "zf_opt",
            Algorithm::ZfEqual => "zf_equal",
            Algorithm::UnqZf => "unq_zf",
            Algorithm::UnqRzf => "unq_rzf",
        }
    }
}

pub fn parse_resolution(s: &str) -> anyhow::Result<CeqResolution> {
    match s {
        "inf" | "infinity" => Ok(CeqResolution::Infinite),
        other => {
            let bits: u32 = other.parse().with_context(|| {
                format!("experiment.resolutions: expected an integer or \"inf\", got {other:?}")
            })?;
            if bits < 2 {
                bail!("experiment.resolutions: resolution must be at least 2 bits, got {bits}");
            }
            Ok(CeqResolution::Bits(bits))
        }
    }
}

impl ExperimentFile {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let file: ExperimentFile = toml::from_str(text).context("config file does not match the schema")?;
        file.validate()?;
        Ok(file)
    }

    fn validate(&self) -> anyhow::Result<()> {
        let e = &self.experiment;
        if e.trials == 0 {
            bail!("experiment.trials: must be at least 1");
        }
        for (name, list_empty) in [
            ("experiment.algorithms", e.algorithms.is_empty()),
            ("experiment.resolutions", e.resolutions.is_empty()),
            ("experiment.k_users", e.k_users.is_empty()),
            ("experiment.n_bs", e.n_bs.is_empty()),
            ("experiment.n_sc", e.n_sc.is_empty()),
            ("experiment.p_bs_dbm", e.p_bs_dbm.is_empty()),
            ("experiment.est_error", e.est_error.is_empty()),
        ] {
            if list_empty {
                bail!("{name}: axis must not be empty");
            }
        }
        for a in &e.algorithms {
            Algorithm::parse(a)?;
        }
        for r in &e.resolutions {
            parse_resolution(r)?;
        }
        if !matches!(e.rate_model.as_str(), "exact" | "approx") {
            bail!(
                "experiment.rate_model: expected \"exact\" or \"approx\", got {:?}",
                e.rate_model
            );
        }
        for &err in &e.est_error {
            if !(0.0..=1.0).contains(&err) {
                bail!("experiment.est_error: values must lie in [0, 1], got {err}");
            }
        }
        if self.channel.l_taps == 0 {
            bail!("channel.l_taps: must be at least 1");
        }
        if self.solver.epsilon.is_nan() || self.solver.epsilon <= 0.0 {
            bail!("solver.epsilon: must be positive");
        }
        if let Some(d) = &self.dither {
            if !d.gamma_grid_db.windows(2).all(|w| w[0] < w[1]) {
                bail!("dither.gamma_grid_db: grid must be strictly increasing");
            }
        }
        if let Some(l) = &self.linksim {
            match l.constellation.as_str() {
                "qpsk" | "qam16" => {}
                other => bail!(
                    "linksim.constellation: expected \"qpsk\" or \"qam16\", got {other:?}"
                ),
            }
            match l.scaling.as_str() {
                "genie" | "pilot" => {}
                other => bail!("linksim.scaling: expected \"genie\" or \"pilot\", got {other:?}"),
            }
            if l.n_ofdm_symbols == 0 {
                bail!("linksim.n_ofdm_symbols: must be at least 1");
            }
        }
        Ok(())
    }

    pub fn constellation(&self) -> Option<Constellation> {
        self.linksim.as_ref().map(|l| match l.constellation.as_str() {
            "qpsk" => Constellation::Qpsk,
            _ => Constellation::Qam16,
        })
    }

    pub fn scaling_mode(&self) -> Option<ScalingMode> {
        self.linksim.as_ref().map(|l| match l.scaling.as_str() {
            "pilot" => ScalingMode::Pilot(l.pilot_symbols),
            _ => ScalingMode::Genie,
        })
    }
}
