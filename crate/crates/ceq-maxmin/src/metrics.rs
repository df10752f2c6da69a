//! Ergodic rate metrics and result aggregation.
//!
//! Rates are Shannon rates of the per-pair SQINRs, normalized by the full
//! FFT size and *not* discounted for the cyclic prefix. Aggregation across
//! channel realizations uses compensated summation so results do not depend
//! on accumulation order.

use crate::error::{Error, Result};

/// Kahan-compensated sum; order-independent to near machine precision.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

fn validate(sqinr: &[f64], k_users: usize, n_sc_total: usize) -> Result<()> {
    if k_users == 0 || n_sc_total == 0 {
        return Err(Error::InvalidConfig(
            "k_users and n_sc_total must be positive".into(),
        ));
    }
    if !sqinr.len().is_multiple_of(k_users) {
        return Err(Error::DimensionMismatch(format!(
            "{} SQINR entries do not split into {} users",
            sqinr.len(),
            k_users
        )));
    }
    if let Some(bad) = sqinr.iter().find(|&&g| g.is_nan() || g < 0.0) {
        return Err(Error::InvalidConfig(format!(
            "SQINR values must be nonnegative, got {bad}"
        )));
    }
    Ok(())
}

/// Sum rate of one realization in bits/s/Hz:
/// `(1/N_SC) sum_{k,n} log2(1 + sqinr_{k,n})` over the stacked
/// `a * K + k` layout.
pub fn sum_rate(sqinr: &[f64], k_users: usize, n_sc_total: usize) -> Result<f64> {
    validate(sqinr, k_users, n_sc_total)?;
    Ok(kahan_sum(sqinr.iter().map(|&g| (1.0 + g).log2())) / n_sc_total as f64)
}

/// Minimum per-user rate of one realization:
/// `min_k (1/N_SC) sum_n log2(1 + sqinr_{k,n})`.
pub fn min_rate(sqinr: &[f64], k_users: usize, n_sc_total: usize) -> Result<f64> {
    validate(sqinr, k_users, n_sc_total)?;
    Ok((0..k_users)
        .map(|k| per_user_rate(sqinr, k_users, n_sc_total, k))
        .fold(f64::INFINITY, f64::min))
}

/// Rate of a single user: `(1/N_SC) sum_n log2(1 + sqinr_{k,n})`.
pub fn per_user_rate(sqinr: &[f64], k_users: usize, n_sc_total: usize, k: usize) -> f64 {
    kahan_sum(
        sqinr
            .iter()
            .skip(k)
            .step_by(k_users)
            .map(|&g| (1.0 + g).log2()),
    ) / n_sc_total as f64
}

/// Running mean over realizations (ergodic aggregation), compensated.
#[derive(Debug, Clone, Default)]
pub struct ErgodicMean {
    sum: f64,
    comp: f64,
    count: u64,
}

impl ErgodicMean {
    pub fn push(&mut self, value: f64) {
        let y = value - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
        self.count += 1;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.sum / self.count as f64
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}

/// One output row of an experiment sweep; the schema is fixed so every
/// consumer (plot scripts, validation) can rely on it.
#[derive(Debug, Clone)]
pub struct RateRow {
    pub realization_id: u64,
    pub algorithm: String,
    pub resolution: String,
    pub k_users: usize,
    pub n_bs: usize,
    pub n_sc: usize,
    pub p_bs_dbm: f64,
    pub est_error: f64,
    pub status: String,
    pub sum_rate: f64,
    pub min_rate: f64,
    pub per_user: Vec<f64>,
}

impl RateRow {
    /// Header for tables with `max_users` per-user columns.
    pub fn csv_header(max_users: usize) -> String {
        let mut s = String::from(
            "realization_id,algorithm,b,k_users,n_bs,n_sc,p_bs_dbm,est_error,status,sum_rate,min_rate",
        );
        for k in 0..max_users {
            s.push_str(&format!(",user_rate_{k}"));
        }
        s.push('\n');
        s
    }

    pub fn to_csv(&self, max_users: usize) -> String {
        let mut s = format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.realization_id,
            self.algorithm,
            self.resolution,
            self.k_users,
            self.n_bs,
            self.n_sc,
            self.p_bs_dbm,
            self.est_error,
            self.status,
            self.sum_rate,
            self.min_rate
        );
        for k in 0..max_users {
            match self.per_user.get(k) {
                Some(r) => s.push_str(&format!(",{r}")),
                None => s.push(','),
            }
        }
        s.push('\n');
        s
    }
}
