//! Constant-envelope quantizer (CEQ) kernels and their second-order
//! statistics.
//!
//! A `b`-bit CEQ maps every complex sample to the unit-magnitude point
//! `exp(j(pi + 2 pi m) / 2^b)`, `m = 0..2^b-1`, whose phase is nearest to the
//! input phase; the infinite-resolution CEQ keeps the phase and normalizes
//! the magnitude. For circularly-symmetric Gaussian inputs the quantizer
//! output is described exactly by two objects:
//!
//! * the Bussgang gain `zeta_b = 2^b / (2 sqrt(pi)) * sin(pi / 2^b)`, the
//!   linear-regression coefficient of the output on the (diagonally
//!   normalized) input, and
//! * the arcsine law, a closed-form map from the normalized input covariance
//!   to the output covariance.
//!
//! The difference between the arcsine-law covariance and the linearized part
//! is the quantization-noise covariance; its small-angle approximation
//! `(1 - zeta_b^2) I` is what makes the uplink-downlink duality machinery of
//! [`crate::power`] tractable.

use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::quad::gauss_legendre_on;
use crate::{CMat, Cx};

/// Phase resolution of the DAC model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CeqResolution {
    /// `b`-bit CEQ with a `2^b`-point phase alphabet; `b = 2` is the
    /// classical 1-bit-per-rail DAC.
    Bits(u32),
    /// Infinite phase resolution: output is the unit-magnitude normalized
    /// input. Still a constant-envelope constraint, so `zeta < 1`.
    Infinite,
    /// Ideal linear DAC (identity, `zeta = 1`). Used by the unquantized
    /// zero-forcing references and the linear bypass tests.
    Unquantized,
}

impl std::fmt::Display for CeqResolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CeqResolution::Bits(b) => write!(f, "{b}"),
            CeqResolution::Infinite => write!(f, "inf"),
            CeqResolution::Unquantized => write!(f, "unquantized"),
        }
    }
}

/// Quantizer description plus its precomputed Bussgang scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct CeqConfig {
    pub resolution: CeqResolution,
    /// Bussgang gain `zeta_b`.
    pub zeta: f64,
    /// Second-order scalar `zeta_bar_b`; equals `zeta_b^2` for every
    /// resolution (checked at construction to 1e-12).
    pub zeta_bar: f64,
}

impl CeqConfig {
    pub fn new(resolution: CeqResolution) -> Result<Self> {
        let zeta = bussgang_zeta(resolution)?;
        let zeta_bar = zeta_bar(resolution);
        debug_assert!(
            (zeta_bar - zeta * zeta).abs() < 1e-12,
            "zeta_bar must equal zeta^2"
        );
        Ok(Self {
            resolution,
            zeta,
            zeta_bar,
        })
    }

    pub fn bits(b: u32) -> Result<Self> {
        Self::new(CeqResolution::Bits(b))
    }

    pub fn infinite() -> Self {
        Self::new(CeqResolution::Infinite).expect("infinite resolution is always valid")
    }

    pub fn unquantized() -> Self {
        Self::new(CeqResolution::Unquantized).expect("unquantized is always valid")
    }

    /// `1/zeta^2 - 1`, the weight of the quantization-noise terms in the
    /// small-angle SQINR expressions. Zero for the unquantized reference.
    pub fn quant_noise_factor(&self) -> f64 {
        1.0 / (self.zeta * self.zeta) - 1.0
    }

    /// The `2^b`-point phase alphabet for finite resolutions.
    pub fn alphabet(&self) -> Option<Vec<Cx>> {
        match self.resolution {
            CeqResolution::Bits(b) => {
                let m = 1u64 << b;
                Some(
                    (0..m)
                        .map(|i| Cx::from_polar(1.0, (PI + TAU * i as f64) / m as f64))
                        .collect(),
                )
            }
            _ => None,
        }
    }

    /// Quantizes one sample.
    ///
    /// Finite `b` returns the alphabet element whose phase is nearest to the
    /// input phase; an input exactly on a decision boundary (or zero) maps
    /// to the tied element with the smallest index `m`. Infinite resolution
    /// returns `x/|x|` (and `1` for `x = 0`); the unquantized reference is
    /// the identity.
    pub fn quantize(&self, x: Cx) -> Cx {
        match self.resolution {
            CeqResolution::Unquantized => x,
            CeqResolution::Infinite => {
                let r = x.norm();
                if r == 0.0 {
                    Cx::new(1.0, 0.0)
                } else {
                    x / r
                }
            }
            CeqResolution::Bits(b) => {
                let m = 1i64 << b;
                // Alphabet phases are 2 pi (i + 1/2) / 2^b; the nearest index
                // solves i = phase * 2^b / (2 pi) - 1/2. Working on the index
                // line keeps the boundary (tie) case exact: a fractional part
                // of 1/2 is a tie and resolves to the smaller wrapped index.
                let mf = x.arg() * (m as f64) / TAU - 0.5;
                let lo = mf.floor();
                let frac = mf - lo;
                let idx = if frac > 0.5 {
                    wrap_index(lo as i64 + 1, m)
                } else if frac < 0.5 {
                    wrap_index(lo as i64, m)
                } else {
                    wrap_index(lo as i64, m).min(wrap_index(lo as i64 + 1, m))
                };
                Cx::from_polar(1.0, (PI + TAU * idx as f64) / m as f64)
            }
        }
    }

    /// Elementwise quantization of a matrix of samples.
    pub fn quantize_in_place(&self, samples: &mut CMat) {
        for v in samples.iter_mut() {
            *v = self.quantize(*v);
        }
    }

    /// Scalar arcsine law: output correlation of the quantizer for a pair of
    /// unit-variance Gaussian inputs with complex correlation `rho`.
    pub fn arcsine_scalar(&self, rho: Cx) -> Cx {
        // Guard the asin domain against |rho| = 1 rounding noise.
        let rho = clamp_to_unit_disc(rho);
        match self.resolution {
            CeqResolution::Unquantized => rho,
            CeqResolution::Infinite => {
                let (phi, w) = infinite_rule(rho.norm());
                let mut acc = Cx::new(0.0, 0.0);
                for (&p, &wi) in phi.iter().zip(w.iter()) {
                    let arg = (rho * Cx::from_polar(1.0, -p)).re.clamp(-1.0, 1.0);
                    acc += Cx::from_polar(1.0, p) * arg.asin() * wi;
                }
                0.5 * acc
            }
            CeqResolution::Bits(b) => {
                let m = 1u64 << b;
                let scale = m as f64 / PI * (PI / m as f64).sin().powi(2);
                let mut acc = Cx::new(0.0, 0.0);
                for delta in 0..(m / 2) {
                    let theta = TAU * delta as f64 / m as f64;
                    let arg = (rho * Cx::from_polar(1.0, -theta)).re.clamp(-1.0, 1.0);
                    acc += Cx::from_polar(1.0, theta) * arg.asin();
                }
                scale * acc
            }
        }
    }
}

fn wrap_index(i: i64, m: i64) -> i64 {
    i.rem_euclid(m)
}

fn clamp_to_unit_disc(rho: Cx) -> Cx {
    let mag = rho.norm();
    if mag > 1.0 {
        rho / mag
    } else {
        rho
    }
}

/// Gauss-Legendre rule on `[0, pi]` for the infinite-resolution arcsine
/// integral. The integrand steepens as the correlation magnitude approaches
/// 1 (the arcsine derivative blows up), so the node count grows with the
/// magnitude: 64 nodes are machine-precision up to 0.9 but the error stays
/// below 1e-10 for magnitudes up to 0.999 only from 512 nodes on.
fn infinite_rule(mag: f64) -> &'static (Vec<f64>, Vec<f64>) {
    static RULES: [OnceLock<(Vec<f64>, Vec<f64>)>; 4] =
        [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let (slot, n) = if mag <= 0.9 {
        (0, 64)
    } else if mag <= 0.99 {
        (1, 128)
    } else if mag <= 0.999 {
        (2, 512)
    } else {
        (3, 1024)
    };
    RULES[slot].get_or_init(|| gauss_legendre_on(n, 0.0, PI))
}

/// Bussgang gain of the CEQ: `2^b / (2 sqrt(pi)) * sin(pi / 2^b)` for finite
/// `b`, `sqrt(pi/4)` for infinite resolution, `1` for the unquantized
/// reference. Resolutions below 2 bits are rejected.
pub fn bussgang_zeta(resolution: CeqResolution) -> Result<f64> {
    match resolution {
        CeqResolution::Bits(b) if b < 2 => Err(Error::ResolutionTooLow(b)),
        CeqResolution::Bits(b) => {
            let m = (1u64 << b) as f64;
            Ok(m / (2.0 * PI.sqrt()) * (PI / m).sin())
        }
        CeqResolution::Infinite => Ok((PI / 4.0).sqrt()),
        CeqResolution::Unquantized => Ok(1.0),
    }
}

/// Second-order scalar `zeta_bar_b`, the linear coefficient of the arcsine
/// law at zero correlation. Provably equal to `zeta_b^2`; kept as an
/// independent computation so the identity stays testable.
fn zeta_bar(resolution: CeqResolution) -> f64 {
    match resolution {
        CeqResolution::Bits(b) => {
            let m = (1u64 << b) as f64;
            let scale = m / PI * (PI / m).sin().powi(2);
            let sum: f64 = (0..(1u64 << b) / 2)
                .map(|delta| (TAU * delta as f64 / m).cos().powi(2))
                .sum();
            scale * sum
        }
        CeqResolution::Infinite => PI / 4.0,
        CeqResolution::Unquantized => 1.0,
    }
}

/// Arcsine law for matrices: covariance of the quantized signal given the
/// normalized (unit-diagonal) input covariance `r_hat`.
///
/// The result is Hermitian with an exactly unit diagonal. Inputs whose
/// diagonal deviates from 1 by more than 1e-9, or with off-diagonal
/// magnitude above `1 + 1e-9`, are rejected; magnitudes within the noise
/// band are clamped onto the unit disc before the arcsine.
pub fn arcsine_correlation(r_hat: &CMat, cfg: &CeqConfig) -> Result<CMat> {
    let n = r_hat.nrows();
    if r_hat.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "covariance must be square, got {}x{}",
            n,
            r_hat.ncols()
        )));
    }
    for i in 0..n {
        let d = r_hat[(i, i)];
        if (d.re - 1.0).abs() > 1e-9 || d.im.abs() > 1e-9 {
            return Err(Error::NonUnitDiagonal {
                index: i,
                value: d.re,
            });
        }
    }
    let mut out = CMat::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let rho = r_hat[(i, j)];
            let mag = rho.norm();
            if mag > 1.0 + 1e-9 {
                return Err(Error::CorrelationOutOfRange {
                    row: i,
                    col: j,
                    value: mag,
                });
            }
            let z = cfg.arcsine_scalar(rho);
            out[(i, j)] = z;
            out[(j, i)] = z.conj();
        }
    }
    Ok(out)
}

/// Quantization-noise covariance model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QnMode {
    /// Full arcsine law: `R_eta = R_z - A R_x A^H`.
    Exact,
    /// First-order (small-angle) approximation: `R_eta = (1 - zeta^2) I`.
    SmallAngle,
}

/// Covariance of the uncorrelated Bussgang distortion for an input with
/// covariance `r_x`.
///
/// `Exact` normalizes `r_x` to unit diagonal, applies the arcsine law and
/// subtracts the linearized part `zeta^2 * rho`; the result is expressed in
/// the unit-modulus output scale (the quantizer output has unit power per
/// sample). `SmallAngle` returns `(1 - zeta^2) I` directly. A zero diagonal
/// entry in `r_x` makes the Bussgang gain singular and is rejected.
pub fn quantization_noise_covariance(r_x: &CMat, cfg: &CeqConfig, mode: QnMode) -> Result<CMat> {
    let n = r_x.nrows();
    if r_x.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "covariance must be square, got {}x{}",
            n,
            r_x.ncols()
        )));
    }
    let mut scale = vec![0.0; n];
    for i in 0..n {
        let d = r_x[(i, i)].re;
        if d <= 0.0 {
            return Err(Error::SingularDiagonal { index: i });
        }
        scale[i] = 1.0 / d.sqrt();
    }
    match mode {
        QnMode::SmallAngle => {
            let f = 1.0 - cfg.zeta * cfg.zeta;
            Ok(CMat::from_diagonal_element(n, n, Cx::new(f, 0.0)))
        }
        QnMode::Exact => {
            let mut rho = CMat::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    rho[(i, j)] = if i == j {
                        Cx::new(1.0, 0.0)
                    } else {
                        r_x[(i, j)] * scale[i] * scale[j]
                    };
                }
            }
            let r_z = arcsine_correlation(&rho, cfg)?;
            let z2 = cfg.zeta * cfg.zeta;
            Ok(r_z - rho.map(|v| v * z2))
        }
    }
}
