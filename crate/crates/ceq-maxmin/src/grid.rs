//! System dimensions, the user/subcarrier stacking convention, and the
//! [`Scenario`] bundle passed to every SQINR evaluation.
//!
//! Vectors indexed by (user, subcarrier) pairs — power allocations, SQINR
//! targets, coupling-matrix rows — use a single stacked layout throughout the
//! crate: subcarriers vary slowest, users fastest, so the pair `(k, a)` lives
//! at index `a * K + k`. Guard subcarriers are excluded from the stacking;
//! `a` counts *active* subcarriers while the `1/N_SC` time-averaging factors
//! of the quantizer statistics keep using the full FFT size.

use crate::ceq::CeqConfig;
use crate::error::{Error, Result};
use crate::CMat;

/// Set of active (occupied) subcarriers out of an `n_sc`-point OFDM grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    n_sc: usize,
    active: Vec<usize>,
}

impl ActiveSet {
    /// All `n_sc` subcarriers occupied.
    pub fn all(n_sc: usize) -> Self {
        Self {
            n_sc,
            active: (0..n_sc).collect(),
        }
    }

    /// Occupy only the listed subcarriers; the rest are guards.
    ///
    /// Indices must be strictly increasing and below `n_sc`.
    pub fn with_guards(n_sc: usize, active: Vec<usize>) -> Result<Self> {
        if active.is_empty() {
            return Err(Error::InvalidConfig("active set is empty".into()));
        }
        if !active.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(
                "active subcarrier indices must be strictly increasing".into(),
            ));
        }
        if *active.last().unwrap() >= n_sc {
            return Err(Error::InvalidConfig(format!(
                "active subcarrier {} out of range (n_sc = {})",
                active.last().unwrap(),
                n_sc
            )));
        }
        Ok(Self { n_sc, active })
    }

    /// Centered block of `n_active` occupied subcarriers (guards split
    /// between the band edges), mirroring the usual guard-band layout.
    pub fn centered(n_sc: usize, n_active: usize) -> Result<Self> {
        if n_active == 0 || n_active > n_sc {
            return Err(Error::InvalidConfig(format!(
                "n_active = {n_active} out of range for n_sc = {n_sc}"
            )));
        }
        let start = (n_sc - n_active) / 2;
        Ok(Self {
            n_sc,
            active: (start..start + n_active).collect(),
        })
    }

    /// Full FFT size including guards.
    pub fn n_sc(&self) -> usize {
        self.n_sc
    }

    /// Number of occupied subcarriers.
    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    /// Subcarrier index of the `a`-th active position.
    pub fn subcarrier(&self, a: usize) -> usize {
        self.active[a]
    }

    /// Active subcarrier indices in increasing order.
    pub fn indices(&self) -> &[usize] {
        &self.active
    }
}

/// Everything a SQINR evaluation needs to know about the link: the
/// per-subcarrier channels of the occupied subcarriers, the full FFT size,
/// the quantizer statistics and the receiver noise power.
///
/// `freq[a]` is the `N_BS x K` frequency-domain channel of the `a`-th
/// active subcarrier (column `k` is user `k`'s channel).
#[derive(Debug, Clone)]
pub struct Scenario<'a> {
    pub freq: &'a [CMat],
    pub n_sc_total: usize,
    pub ceq: &'a CeqConfig,
    pub sigma2: f64,
}

impl<'a> Scenario<'a> {
    /// Scenario with every subcarrier occupied: `freq` holds all `N_SC`
    /// channel matrices.
    pub fn fully_active(freq: &'a [CMat], ceq: &'a CeqConfig, sigma2: f64) -> Self {
        Self {
            freq,
            n_sc_total: freq.len(),
            ceq,
            sigma2,
        }
    }

    /// Scenario over a restricted active set; `freq` holds one matrix per
    /// active subcarrier and `n_sc_total` the full FFT size.
    pub fn with_guards(freq: &'a [CMat], n_sc_total: usize, ceq: &'a CeqConfig, sigma2: f64) -> Self {
        Self {
            freq,
            n_sc_total,
            ceq,
            sigma2,
        }
    }

    pub fn n_bs(&self) -> usize {
        self.freq[0].nrows()
    }

    pub fn k_users(&self) -> usize {
        self.freq[0].ncols()
    }

    /// Number of occupied subcarriers.
    pub fn n_active(&self) -> usize {
        self.freq.len()
    }

    /// Number of stacked (user, subcarrier) pairs.
    pub fn n_links(&self) -> usize {
        self.k_users() * self.n_active()
    }

    /// Stacked index of user `k` on active subcarrier `a`.
    pub fn link(&self, k: usize, a: usize) -> usize {
        a * self.k_users() + k
    }

    /// Inverse of [`Scenario::link`].
    pub fn unstack(&self, idx: usize) -> (usize, usize) {
        (idx % self.k_users(), idx / self.k_users())
    }

    /// Checks that all channel matrices share one shape.
    pub fn validate(&self) -> Result<()> {
        let (n_bs, k) = (self.n_bs(), self.k_users());
        if self.n_sc_total < self.n_active() {
            return Err(Error::InvalidConfig(format!(
                "n_sc_total = {} smaller than the {} active subcarriers",
                self.n_sc_total,
                self.n_active()
            )));
        }
        for (a, h) in self.freq.iter().enumerate() {
            if h.nrows() != n_bs || h.ncols() != k {
                return Err(Error::DimensionMismatch(format!(
                    "channel matrix {a} is {}x{}, expected {n_bs}x{k}",
                    h.nrows(),
                    h.ncols()
                )));
            }
        }
        Ok(())
    }
}
