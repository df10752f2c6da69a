//! Synthetic frequency-selective multi-user channels and the unitary OFDM
//! transforms.
//!
//! Channels are Rayleigh tapped-delay lines: `L` time-domain taps per
//! (antenna, user) pair, drawn IID circularly-symmetric complex Gaussian
//! and shaped by an exponential power-delay profile normalized to unit
//! total power. The per-subcarrier frequency response is the plain
//! `N_SC`-point DFT of the tap sequence, so signal-path transforms stay
//! unitary (`1/sqrt(N_SC)`) while the channel DFT carries no normalization —
//! together they reproduce the standard cyclic-prefix input/output relation
//! `y_n = H_n^T x_n + w_n`.
//!
//! The transmitter may be handed an imperfect estimate: the Gauss-Markov
//! mixture `sqrt(1 - e^2) H + e E` with `E` an independent draw of the same
//! statistics, which preserves total channel power for every error level
//! `e` in `[0, 1]`.

use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::{CMat, Cx};

/// Parameters of the synthetic tapped-delay-line channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    /// Base-station antenna count.
    pub n_bs: usize,
    /// Single-antenna user count.
    pub k_users: usize,
    /// OFDM FFT size (total subcarriers).
    pub n_sc: usize,
    /// Delay-spread tap count `L`.
    pub l_taps: usize,
    /// Exponential power-delay-profile rate per tap; 0 gives a uniform
    /// profile.
    pub pdp_decay: f64,
    /// RNG seed; equal seeds reproduce bit-identical realizations.
    pub seed: u64,
    /// Normalized channel-estimation error `e` in `[0, 1]`.
    pub est_error: f64,
    /// Optional pairwise correlation between user channels in `[0, 1)`,
    /// applied by Cholesky coloring across the user axis.
    pub user_correlation: f64,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l_taps < 1 || self.n_sc < self.l_taps {
            return Err(Error::InvalidConfig(format!(
                "need n_sc >= l_taps >= 1, got n_sc = {}, l_taps = {}",
                self.n_sc, self.l_taps
            )));
        }
        if self.k_users < 1 {
            return Err(Error::InvalidConfig("k_users must be at least 1".into()));
        }
        if self.n_bs < self.k_users {
            return Err(Error::InvalidConfig(format!(
                "need n_bs >= k_users for zero-forcing feasibility, got {} < {}",
                self.n_bs, self.k_users
            )));
        }
        if !(0.0..=1.0).contains(&self.est_error) {
            return Err(Error::InvalidConfig(format!(
                "est_error must lie in [0, 1], got {}",
                self.est_error
            )));
        }
        if !(0.0..1.0).contains(&self.user_correlation) {
            return Err(Error::InvalidConfig(format!(
                "user_correlation must lie in [0, 1), got {}",
                self.user_correlation
            )));
        }
        if self.pdp_decay.is_nan() || self.pdp_decay < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "pdp_decay must be nonnegative, got {}",
                self.pdp_decay
            )));
        }
        Ok(())
    }
}

/// One channel draw: time-domain taps, true frequency response, and the
/// (possibly degraded) estimate exposed to the transmitter.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `l_taps` matrices of shape `n_bs x k_users`.
    pub taps: Vec<CMat>,
    /// `n_sc` per-subcarrier matrices `H_n`, the DFT of the taps.
    pub freq: Vec<CMat>,
    /// Transmitter-side estimate; equals `freq` exactly when `est_error = 0`.
    pub freq_est: Vec<CMat>,
}

impl ChannelRealization {
    pub fn n_bs(&self) -> usize {
        self.taps[0].nrows()
    }

    pub fn k_users(&self) -> usize {
        self.taps[0].ncols()
    }

    pub fn n_sc(&self) -> usize {
        self.freq.len()
    }

    pub fn l_taps(&self) -> usize {
        self.taps.len()
    }
}

/// Exponential power-delay profile, normalized so the tap powers sum to 1.
pub fn power_delay_profile(l_taps: usize, decay: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..l_taps).map(|l| (-decay * l as f64).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

/// One circularly-symmetric complex Gaussian sample of unit variance.
pub fn standard_complex<R: Rng>(rng: &mut R) -> Cx {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Cx::new(re / 2f64.sqrt(), im / 2f64.sqrt())
}

/// Draws taps with the configured profile and user coloring.
fn draw_taps<R: Rng>(cfg: &ChannelConfig, pdp: &[f64], chol: Option<&CMat>, rng: &mut R) -> Vec<CMat> {
    (0..cfg.l_taps)
        .map(|l| {
            let mut g = CMat::from_fn(cfg.n_bs, cfg.k_users, |_, _| standard_complex(rng));
            if let Some(lmat) = chol {
                // Color the user axis: each antenna row g^T -> (L g)^T makes
                // the cross-user covariance equal L L^H.
                g = &g * lmat.transpose();
            }
            let amp = pdp[l].sqrt();
            g.scale_mut(amp);
            g
        })
        .collect()
}

/// DFT of the taps along the delay axis (zero-padded to `n_sc`, no
/// normalization).
fn taps_to_freq(taps: &[CMat], n_sc: usize) -> Vec<CMat> {
    let n_bs = taps[0].nrows();
    let k = taps[0].ncols();
    let fft = FftPlanner::new().plan_fft_forward(n_sc);
    let mut freq = vec![CMat::zeros(n_bs, k); n_sc];
    let mut line = vec![Cx::new(0.0, 0.0); n_sc];
    for a in 0..n_bs {
        for u in 0..k {
            line.fill(Cx::new(0.0, 0.0));
            for (l, tap) in taps.iter().enumerate() {
                line[l] = tap[(a, u)];
            }
            fft.process(&mut line);
            for (n, f) in freq.iter_mut().enumerate() {
                f[(a, u)] = line[n];
            }
        }
    }
    freq
}

/// Generates one channel realization.
pub fn generate(cfg: &ChannelConfig) -> Result<ChannelRealization> {
    cfg.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let pdp = power_delay_profile(cfg.l_taps, cfg.pdp_decay);

    let chol = if cfg.user_correlation > 0.0 {
        let k = cfg.k_users;
        let rho = cfg.user_correlation;
        let c = CMat::from_fn(k, k, |i, j| {
            if i == j {
                Cx::new(1.0, 0.0)
            } else {
                Cx::new(rho, 0.0)
            }
        });
        let chol = nalgebra::Cholesky::new(c).ok_or_else(|| {
            Error::InvalidConfig("user correlation matrix is not positive definite".into())
        })?;
        Some(chol.l())
    } else {
        None
    };

    let taps = draw_taps(cfg, &pdp, chol.as_ref(), &mut rng);
    let freq = taps_to_freq(&taps, cfg.n_sc);

    let freq_est = if cfg.est_error == 0.0 {
        freq.clone()
    } else {
        // Independent draw with identical statistics supplies the error term,
        // so the estimate keeps per-entry power and user coloring.
        let err_taps = draw_taps(cfg, &pdp, chol.as_ref(), &mut rng);
        let err_freq = taps_to_freq(&err_taps, cfg.n_sc);
        let keep = (1.0 - cfg.est_error * cfg.est_error).sqrt();
        freq.iter()
            .zip(err_freq.iter())
            .map(|(h, e)| h.map(|v| v * keep) + e.map(|v| v * cfg.est_error))
            .collect()
    };

    Ok(ChannelRealization {
        taps,
        freq,
        freq_est,
    })
}

/// Direction of the unitary signal transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformDirection {
    /// Time to frequency.
    Fft,
    /// Frequency to time.
    Ifft,
}

/// Applies the `1/sqrt(N_SC)`-normalized (inverse) DFT along the column axis
/// of `mat`; each row is one antenna's subcarrier/time sequence. The column
/// count fixes the transform length, and an FFT/IFFT round trip is the
/// identity to machine precision.
pub fn time_frequency_transform(mat: &CMat, direction: TransformDirection) -> Result<CMat> {
    let n = mat.ncols();
    if n == 0 {
        return Err(Error::DimensionMismatch("empty matrix".into()));
    }
    let mut planner = FftPlanner::new();
    let fft: Arc<dyn Fft<f64>> = match direction {
        TransformDirection::Fft => planner.plan_fft_forward(n),
        TransformDirection::Ifft => planner.plan_fft_inverse(n),
    };
    let scale = 1.0 / (n as f64).sqrt();
    let mut out = mat.clone();
    let mut line = vec![Cx::new(0.0, 0.0); n];
    for r in 0..mat.nrows() {
        for c in 0..n {
            line[c] = mat[(r, c)];
        }
        fft.process(&mut line);
        for c in 0..n {
            out[(r, c)] = line[c] * scale;
        }
    }
    Ok(out)
}

const TENSOR_MAGIC: &str = "ceq-maxmin channel v1";

fn write_tensor(w: &mut impl Write, name: &str, mats: &[CMat]) -> std::io::Result<()> {
    writeln!(w, "{} {} {} {}", name, mats.len(), mats[0].nrows(), mats[0].ncols())?;
    for m in mats {
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                writeln!(w, "{} {}", v.re, v.im)?;
            }
        }
    }
    Ok(())
}

fn read_tensor(
    lines: &mut impl Iterator<Item = std::io::Result<String>>,
    name: &str,
) -> Result<Vec<CMat>> {
    let header = lines
        .next()
        .ok_or_else(|| Error::Format(format!("missing {name} header")))?
        .map_err(|e| Error::Format(e.to_string()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != name {
        return Err(Error::Format(format!("bad {name} header: {header}")));
    }
    let dims: Vec<usize> = parts[1..]
        .iter()
        .map(|p| {
            p.parse()
                .map_err(|_| Error::Format(format!("bad dimension in {header}")))
        })
        .collect::<Result<_>>()?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    let mut mats = Vec::with_capacity(count);
    for _ in 0..count {
        let mut m = CMat::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let line = lines
                    .next()
                    .ok_or_else(|| Error::Format(format!("truncated {name} tensor")))?
                    .map_err(|e| Error::Format(e.to_string()))?;
                let mut it = line.split_whitespace();
                let re: f64 = it
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::Format(format!("bad complex entry: {line}")))?;
                let im: f64 = it
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::Format(format!("bad complex entry: {line}")))?;
                m[(r, c)] = Cx::new(re, im);
            }
        }
        mats.push(m);
    }
    Ok(mats)
}

impl ChannelRealization {
    /// Writes the realization in the documented text tensor format: a magic
    /// line, then per tensor a `name count rows cols` header followed by
    /// `count*rows*cols` lines of `re im` in row-major order. Values use
    /// Rust's shortest round-trip float formatting, so a load reproduces the
    /// realization bit-exactly.
    pub fn save(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "{TENSOR_MAGIC}")?;
        write_tensor(w, "taps", &self.taps)?;
        write_tensor(w, "freq", &self.freq)?;
        write_tensor(w, "freq_est", &self.freq_est)?;
        Ok(())
    }

    /// Reads a realization written by [`ChannelRealization::save`].
    pub fn load(r: &mut impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let magic = lines
            .next()
            .ok_or_else(|| Error::Format("empty file".into()))?
            .map_err(|e| Error::Format(e.to_string()))?;
        if magic.trim() != TENSOR_MAGIC {
            return Err(Error::Format(format!("unexpected magic line: {magic}")));
        }
        let taps = read_tensor(&mut lines, "taps")?;
        let freq = read_tensor(&mut lines, "freq")?;
        let freq_est = read_tensor(&mut lines, "freq_est")?;
        Ok(Self {
            taps,
            freq,
            freq_est,
        })
    }
}
