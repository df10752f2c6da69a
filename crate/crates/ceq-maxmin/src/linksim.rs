//! Monte Carlo OFDM link simulator: the ground-truth oracle for the
//! analytical SQINR expressions and the bit-error-rate measurement engine.
//!
//! One trial transmits a full OFDM symbol through the physical chain —
//! frequency-domain precoding, optional null-space dither, unitary IFFT,
//! constant-envelope quantization, per-antenna scaling, cyclic prefix,
//! tapped-delay-line convolution, AWGN, CP removal, unitary FFT — and fits
//! one complex scalar per (user, subcarrier) pair between the known symbols
//! and the received ones. From those fits come the empirical SQINRs
//! (`|g|^2 E|s|^2 / E|y - g s|^2`), error-vector magnitudes, and uncoded
//! bit error rates on Gray-labeled QPSK or 16-QAM.
//!
//! Trials run in seed-deterministic chunks (`seed` + chunk index fixes the
//! substream), so runs are reproducible and chunks are embarrassingly
//! parallel with a deterministic merge.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::ceq::{CeqConfig, CeqResolution};
use crate::channel::{standard_complex, time_frequency_transform, ChannelRealization, TransformDirection};
use crate::error::{Error, Result};
use crate::grid::ActiveSet;
use crate::solver::BeamformingSolution;
use crate::sqinr::DitherSpec;
use crate::{CMat, Cx};

/// Unit-energy, Gray-labeled constellations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constellation {
    Qpsk,
    Qam16,
}

impl Constellation {
    pub fn bits_per_symbol(&self) -> usize {
        match self {
            Constellation::Qpsk => 2,
            Constellation::Qam16 => 4,
        }
    }

    /// Per-axis amplitude levels in Gray-code order (label index = Gray
    /// label of the level).
    fn axis_levels(&self) -> &'static [f64] {
        match self {
            // QPSK: one bit per axis at +-1/sqrt(2).
            Constellation::Qpsk => &[std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2],
            // 16-QAM: PAM-4 per axis, Gray order 00 01 11 10 over
            // +3 +1 -1 -3 (scaled to unit average symbol energy).
            Constellation::Qam16 => &QAM16_LEVELS,
        }
    }

    /// Symbol for a bit label; the low half of the bits indexes the real
    /// axis, the high half the imaginary axis.
    pub fn modulate(&self, label: u32) -> Cx {
        let half = self.bits_per_symbol() / 2;
        let mask = (1u32 << half) - 1;
        let levels = self.axis_levels();
        Cx::new(
            levels[(label & mask) as usize],
            levels[((label >> half) & mask) as usize],
        )
    }

    /// Nearest-neighbor detection returning the bit label.
    pub fn detect(&self, y: Cx) -> u32 {
        let half = self.bits_per_symbol() / 2;
        let levels = self.axis_levels();
        let nearest = |v: f64| -> u32 {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (i, &l) in levels.iter().enumerate() {
                let d = (v - l).abs();
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            best as u32
        };
        nearest(y.re) | (nearest(y.im) << half)
    }

    pub fn random_label<R: Rng>(&self, rng: &mut R) -> u32 {
        rng.random_range(0..(1u32 << self.bits_per_symbol()))
    }
}

const QAM16_SCALE: f64 = 0.316_227_766_016_837_94; // 1/sqrt(10)
// Label-indexed levels; Gray assignment 00->+3, 01->+1, 11->-1, 10->-3
// makes amplitude neighbors differ in exactly one bit.
const QAM16_LEVELS: [f64; 4] = [
    3.0 * QAM16_SCALE,
    QAM16_SCALE,
    -3.0 * QAM16_SCALE,
    -QAM16_SCALE,
];

/// Receiver scaling estimator: a genie least-squares fit over every
/// transmitted symbol, or a least-squares fit over a leading pilot block of
/// the given length (in OFDM symbols).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingMode {
    Genie,
    Pilot(usize),
}

/// Link-simulation parameters.
#[derive(Debug, Clone)]
pub struct LinkConfig {
    pub constellation: Constellation,
    /// Number of data OFDM symbols measured.
    pub n_ofdm_symbols: usize,
    /// Cyclic-prefix length; must cover the channel memory (`>= L - 1`).
    pub n_cp: usize,
    /// Receiver noise power (Watts); 0 disables the AWGN.
    pub noise_power: f64,
    pub seed: u64,
    pub scaling: ScalingMode,
}

/// Empirical statistics of one simulated link.
#[derive(Debug, Clone)]
pub struct LinkSimReport {
    /// Per (true user, active subcarrier) pair, stacked `a * k_true + k`.
    pub empirical_sqinr: Vec<f64>,
    /// Per true user.
    pub ber: Vec<f64>,
    /// Per true user: rms error vector magnitude after scaling.
    pub evm: Vec<f64>,
    pub bit_errors: Vec<u64>,
    pub bits_total: Vec<u64>,
    pub k_true: usize,
    pub n_active: usize,
}

impl LinkSimReport {
    /// CSV rows: one `sqinr` row per (user, subcarrier) pair and one `ber`
    /// summary row per user.
    pub fn to_csv(&self, realization_id: u64, active: &ActiveSet) -> String {
        let mut s = String::from("kind,realization,user,subcarrier,value\n");
        for a in 0..self.n_active {
            for k in 0..self.k_true {
                s.push_str(&format!(
                    "sqinr,{},{},{},{}\n",
                    realization_id,
                    k,
                    active.subcarrier(a),
                    self.empirical_sqinr[a * self.k_true + k]
                ));
            }
        }
        for k in 0..self.k_true {
            s.push_str(&format!("ber,{},{},,{}\n", realization_id, k, self.ber[k]));
        }
        s
    }
}

/// Maps per-active-subcarrier symbols through the beamformers and powers to
/// the full frequency-domain antenna grid (guards stay zero).
pub fn precode_frequency(
    symbols: &CMat,
    beamformers: &[CMat],
    dl_power: &[f64],
    active: &ActiveSet,
) -> CMat {
    let n_bs = beamformers[0].nrows();
    let k = beamformers[0].ncols();
    let mut x = CMat::zeros(n_bs, active.n_sc());
    for a in 0..active.n_active() {
        let t = &beamformers[a];
        let n = active.subcarrier(a);
        for i in 0..k {
            let amp = dl_power[a * k + i].sqrt();
            let s = symbols[(i, a)] * amp;
            for u in 0..n_bs {
                x[(u, n)] += t[(u, i)] * s;
            }
        }
    }
    x
}

/// Transmit chain for one OFDM symbol: precode, add dither, unitary IFFT,
/// quantize, apply the per-antenna amplitudes, prepend the cyclic prefix.
///
/// The unquantized reference bypasses both the quantizer and the
/// per-antenna scaling (its power already sits in the symbol amplitudes).
pub fn transmit<R: Rng>(
    symbols: &CMat,
    sol: &BeamformingSolution,
    active: &ActiveSet,
    ceq: &CeqConfig,
    n_cp: usize,
    dither: Option<&DitherSpec>,
    rng: &mut R,
) -> Result<CMat> {
    let n_bs = sol.beamformers[0].nrows();
    let k = sol.beamformers[0].ncols();
    if symbols.nrows() != k || symbols.ncols() != active.n_active() {
        return Err(Error::DimensionMismatch(format!(
            "symbol matrix is {}x{}, expected {}x{}",
            symbols.nrows(),
            symbols.ncols(),
            k,
            active.n_active()
        )));
    }
    let mut x = precode_frequency(symbols, &sol.beamformers, &sol.dl_power, active);
    if let Some(d) = dither {
        let amp = d.sigma_d2.sqrt();
        for a in 0..active.n_active() {
            let g = crate::CVec::from_fn(n_bs, |_, _| standard_complex(rng) * amp);
            let shaped = &d.projectors[a] * g;
            let n = active.subcarrier(a);
            for u in 0..n_bs {
                x[(u, n)] += shaped[u];
            }
        }
    }
    let mut time = time_frequency_transform(&x, TransformDirection::Ifft)?;
    if !matches!(ceq.resolution, CeqResolution::Unquantized) {
        ceq.quantize_in_place(&mut time);
        for u in 0..n_bs {
            let w = Cx::new(sol.per_antenna[u], 0.0);
            for m in 0..time.ncols() {
                time[(u, m)] *= w;
            }
        }
    }
    // Cyclic prefix: the last n_cp time samples lead the symbol.
    let n_sc = active.n_sc();
    let mut out = CMat::zeros(n_bs, n_cp + n_sc);
    for m in 0..n_cp {
        out.set_column(m, &time.column(n_sc - n_cp + m));
    }
    for m in 0..n_sc {
        out.set_column(n_cp + m, &time.column(m));
    }
    Ok(out)
}

/// Tapped-delay-line propagation, AWGN, CP removal and unitary FFT:
/// returns the received frequency-domain symbols of the physical users on
/// the active subcarriers (`k_true x n_active`).
pub fn receive<R: Rng>(
    tx: &CMat,
    channel: &ChannelRealization,
    active: &ActiveSet,
    n_cp: usize,
    noise_power: f64,
    rng: &mut R,
) -> Result<CMat> {
    let n_bs = channel.n_bs();
    let k = channel.k_users();
    let l = channel.l_taps();
    let n_sc = active.n_sc();
    if tx.nrows() != n_bs || tx.ncols() != n_cp + n_sc {
        return Err(Error::DimensionMismatch(format!(
            "transmit matrix is {}x{}, expected {}x{}",
            tx.nrows(),
            tx.ncols(),
            n_bs,
            n_cp + n_sc
        )));
    }
    if n_cp + 1 < l {
        return Err(Error::InvalidConfig(format!(
            "cyclic prefix {n_cp} shorter than the channel memory {}",
            l - 1
        )));
    }
    // Linear convolution; only the samples after the CP are kept, so the
    // prefix absorbs the channel memory and the kept block sees a circular
    // convolution of the core symbol.
    let amp = (noise_power / 2.0).sqrt() * 2.0f64.sqrt(); // complex std
    let mut y = CMat::zeros(k, n_sc);
    for m in 0..n_sc {
        let idx = n_cp + m;
        for u in 0..k {
            let mut acc = Cx::new(0.0, 0.0);
            for (dl, tap) in channel.taps.iter().enumerate() {
                if dl > idx {
                    break;
                }
                for b in 0..n_bs {
                    acc += tap[(b, u)] * tx[(b, idx - dl)];
                }
            }
            if noise_power > 0.0 {
                acc += standard_complex(rng) * amp;
            }
            y[(u, m)] = acc;
        }
    }
    let freq = time_frequency_transform(&y, TransformDirection::Fft)?;
    let mut out = CMat::zeros(k, active.n_active());
    for a in 0..active.n_active() {
        out.set_column(a, &freq.column(active.subcarrier(a)));
    }
    Ok(out)
}

/// Per-link accumulators of the scalar-fit statistics.
#[derive(Debug, Clone, Default)]
struct LinkStats {
    n: u64,
    cross: Cx,
    s_pow: f64,
    y_pow: f64,
}

impl LinkStats {
    fn push(&mut self, s: Cx, y: Cx) {
        self.n += 1;
        self.cross += s.conj() * y;
        self.s_pow += s.norm_sqr();
        self.y_pow += y.norm_sqr();
    }

    fn merge(&mut self, other: &LinkStats) {
        self.n += other.n;
        self.cross += other.cross;
        self.s_pow += other.s_pow;
        self.y_pow += other.y_pow;
    }

    fn gain(&self) -> Cx {
        self.cross / self.s_pow
    }

    /// Mean squared residual of the least-squares scalar fit.
    fn error_power(&self) -> f64 {
        ((self.y_pow - self.cross.norm_sqr() / self.s_pow) / self.n as f64).max(0.0)
    }
}

fn substream(seed: u64, label: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

const CHUNK: usize = 64;

struct ChunkOutcome {
    stats: Vec<LinkStats>,
    bit_errors: Vec<u64>,
    bits: Vec<u64>,
}

/// Simulates `count` OFDM symbols with the chunk's substream. When `gains`
/// is present, also demaps and counts bit errors against the Gray labels.
#[allow(clippy::too_many_arguments)]
fn simulate_chunk(
    sol: &BeamformingSolution,
    channel: &ChannelRealization,
    active: &ActiveSet,
    ceq: &CeqConfig,
    cfg: &LinkConfig,
    dither: Option<&DitherSpec>,
    chunk_label: u64,
    count: usize,
    gains: Option<&[Cx]>,
) -> Result<ChunkOutcome> {
    let k_total = sol.beamformers[0].ncols();
    let k_true = sol.k_true.min(channel.k_users());
    let n_active = active.n_active();
    let n_links = k_true * n_active;
    let mut rng = substream(cfg.seed, chunk_label);
    let mut stats = vec![LinkStats::default(); n_links];
    let mut bit_errors = vec![0u64; k_true];
    let mut bits = vec![0u64; k_true];
    let mut labels = vec![0u32; k_total * n_active];
    for _ in 0..count {
        let symbols = CMat::from_fn(k_total, n_active, |i, a| {
            let label = cfg.constellation.random_label(&mut rng);
            labels[a * k_total + i] = label;
            cfg.constellation.modulate(label)
        });
        let tx = transmit(&symbols, sol, active, ceq, cfg.n_cp, dither, &mut rng)?;
        let y = receive(&tx, channel, active, cfg.n_cp, cfg.noise_power, &mut rng)?;
        for a in 0..n_active {
            for k in 0..k_true {
                let link = a * k_true + k;
                let s = symbols[(k, a)];
                stats[link].push(s, y[(k, a)]);
                if let Some(g) = gains {
                    let detected = cfg.constellation.detect(y[(k, a)] / g[link]);
                    let errs = (detected ^ labels[a * k_total + k]).count_ones();
                    bit_errors[k] += errs as u64;
                    bits[k] += cfg.constellation.bits_per_symbol() as u64;
                }
            }
        }
    }
    Ok(ChunkOutcome {
        stats,
        bit_errors,
        bits,
    })
}

fn chunk_plan(total: usize) -> Vec<(u64, usize)> {
    let mut plan = Vec::new();
    let mut done = 0usize;
    let mut label = 0u64;
    while done < total {
        let count = CHUNK.min(total - done);
        plan.push((label, count));
        done += count;
        label += 1;
    }
    plan
}

#[allow(clippy::too_many_arguments)]
fn run_chunks(
    sol: &BeamformingSolution,
    channel: &ChannelRealization,
    active: &ActiveSet,
    ceq: &CeqConfig,
    cfg: &LinkConfig,
    dither: Option<&DitherSpec>,
    total: usize,
    label_offset: u64,
    gains: Option<&[Cx]>,
) -> Result<(Vec<LinkStats>, Vec<u64>, Vec<u64>)> {
    let k_true = sol.k_true.min(channel.k_users());
    let n_links = k_true * active.n_active();
    let outcomes: Vec<ChunkOutcome> = chunk_plan(total)
        .into_par_iter()
        .map(|(label, count)| {
            simulate_chunk(
                sol,
                channel,
                active,
                ceq,
                cfg,
                dither,
                label_offset + label,
                count,
                gains,
            )
        })
        .collect::<Result<_>>()?;
    let mut stats = vec![LinkStats::default(); n_links];
    let mut bit_errors = vec![0u64; k_true];
    let mut bits = vec![0u64; k_true];
    for o in outcomes {
        for (acc, s) in stats.iter_mut().zip(o.stats.iter()) {
            acc.merge(s);
        }
        for (acc, e) in bit_errors.iter_mut().zip(o.bit_errors.iter()) {
            *acc += e;
        }
        for (acc, b) in bits.iter_mut().zip(o.bits.iter()) {
            *acc += b;
        }
    }
    Ok((stats, bit_errors, bits))
}

/// Runs the Monte Carlo link simulation for a solution over a physical
/// channel realization.
///
/// Genie scaling fits the per-link scalar over all data symbols in a first
/// pass and replays the identical substreams for detection; pilot scaling
/// fits it over a leading pilot block (extra symbols, separate substream)
/// and detects in a single data pass.
pub fn run_link_sim(
    sol: &BeamformingSolution,
    channel: &ChannelRealization,
    active: &ActiveSet,
    ceq: &CeqConfig,
    cfg: &LinkConfig,
    dither: Option<&DitherSpec>,
) -> Result<LinkSimReport> {
    if sol.beamformers[0].nrows() != channel.n_bs() {
        return Err(Error::DimensionMismatch(format!(
            "solution has {} antennas, channel {}",
            sol.beamformers[0].nrows(),
            channel.n_bs()
        )));
    }
    if sol.beamformers.len() != active.n_active() {
        return Err(Error::DimensionMismatch(format!(
            "{} beamformer matrices for {} active subcarriers",
            sol.beamformers.len(),
            active.n_active()
        )));
    }
    if sol.k_true > channel.k_users() {
        return Err(Error::DimensionMismatch(format!(
            "solution has {} true users, channel only {}",
            sol.k_true,
            channel.k_users()
        )));
    }
    if cfg.n_ofdm_symbols == 0 {
        return Err(Error::InvalidConfig("n_ofdm_symbols must be positive".into()));
    }
    let k_true = sol.k_true;
    let n_active = active.n_active();
    let n_links = k_true * n_active;

    // Scaling fit.
    const PILOT_LABEL_BASE: u64 = 1 << 40;
    let (gain_stats, data_from_gain_pass) = match cfg.scaling {
        ScalingMode::Genie => {
            let (stats, _, _) = run_chunks(
                sol, channel, active, ceq, cfg, dither, cfg.n_ofdm_symbols, 0, None,
            )?;
            (stats, true)
        }
        ScalingMode::Pilot(np) => {
            if np == 0 {
                return Err(Error::InvalidConfig("pilot block must be non-empty".into()));
            }
            let (stats, _, _) = run_chunks(
                sol,
                channel,
                active,
                ceq,
                cfg,
                dither,
                np,
                PILOT_LABEL_BASE,
                None,
            )?;
            (stats, false)
        }
    };
    let gains: Vec<Cx> = gain_stats.iter().map(|s| s.gain()).collect();

    // Detection pass. Genie replays the same substreams; pilot runs the
    // data symbols fresh.
    let (data_stats, bit_errors, bits) = run_chunks(
        sol,
        channel,
        active,
        ceq,
        cfg,
        dither,
        cfg.n_ofdm_symbols,
        0,
        Some(&gains),
    )?;
    let data_stats = if data_from_gain_pass {
        gain_stats
    } else {
        data_stats
    };

    let mut empirical_sqinr = vec![0.0; n_links];
    let mut evm_num = vec![0.0; k_true];
    let mut evm_den = vec![0.0; k_true];
    for a in 0..n_active {
        for k in 0..k_true {
            let link = a * k_true + k;
            let st = &data_stats[link];
            let g = gains[link];
            // Error power against the *fitted* scaling used for detection.
            let err = if data_from_gain_pass {
                st.error_power()
            } else {
                // E|y - g s|^2 with the pilot-block g.
                (st.y_pow - 2.0 * (g.conj() * st.cross).re + g.norm_sqr() * st.s_pow)
                    .max(0.0)
                    / st.n as f64
            };
            let sig = g.norm_sqr() * st.s_pow / st.n as f64;
            empirical_sqinr[link] = if err > 0.0 { sig / err } else { f64::INFINITY };
            evm_num[k] += err / g.norm_sqr();
            evm_den[k] += st.s_pow / st.n as f64;
        }
    }
    let evm = (0..k_true)
        .map(|k| (evm_num[k] / evm_den[k]).sqrt())
        .collect();
    let ber = (0..k_true)
        .map(|k| bit_errors[k] as f64 / bits[k].max(1) as f64)
        .collect();
    Ok(LinkSimReport {
        empirical_sqinr,
        ber,
        evm,
        bit_errors,
        bits_total: bits,
        k_true,
        n_active,
    })
}
