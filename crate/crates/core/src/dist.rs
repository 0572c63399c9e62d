//! Negative binomial probabilities on the integer support.
//!
//! `NB(d, R)` counts the target wins (probability `1 - R` each) observed
//! before the `d`-th decoy win (probability `R`). Everything here is computed
//! from the PMF recurrence
//!
//! ```text
//! pmf(0) = R^d,    pmf(k + 1) = pmf(k) * (k + d) / (k + 1) * (1 - R)
//! ```
//!
//! with a running cumulative sum, so CDF, survival and quantiles agree exactly
//! with one another at every integer.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Largest support point any scan is allowed to reach by default.
pub const DEFAULT_SUPPORT_CEILING: u64 = 10_000_000;

/// `NB(d, R)`: number of target wins before the `d`-th decoy win.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegBin {
    d: u64,
    r: f64,
    ceiling: u64,
}

impl NegBin {
    pub fn new(d: u64, r: f64) -> Result<Self> {
        if d < 1 {
            return Err(Error::param(format!("negative binomial needs d >= 1, got {d}")));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::param(format!("negative binomial needs 0 < R < 1, got {r}")));
        }
        Ok(NegBin {
            d,
            r,
            ceiling: DEFAULT_SUPPORT_CEILING,
        })
    }

    /// Override the support ceiling used when scanning for CDF values and quantiles.
    pub fn with_ceiling(mut self, ceiling: u64) -> Self {
        self.ceiling = ceiling;
        self
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// `B = (1 - R) / R`, the odds of a target win against a decoy win.
    pub fn odds(&self) -> f64 {
        (1.0 - self.r) / self.r
    }

    pub fn mean(&self) -> f64 {
        self.odds() * self.d as f64
    }

    pub fn variance(&self) -> f64 {
        let b = self.odds();
        b * (1.0 + b) * self.d as f64
    }

    fn mode(&self) -> u64 {
        ((self.d - 1) as f64 * (1.0 - self.r) / self.r).floor() as u64
    }

    fn check_ceiling(&self, k: u64) -> Result<()> {
        if k > self.ceiling {
            Err(Error::Overflow {
                d: self.d,
                r: self.r,
                ceiling: self.ceiling,
            })
        } else {
            Ok(())
        }
    }

    fn terms(&self) -> PmfTerms {
        PmfTerms::new(self.d, self.r)
    }

    pub fn pmf(&self, k: u64) -> Result<f64> {
        self.check_ceiling(k)?;
        Ok(self.terms().nth(k as usize).unwrap_or(0.0))
    }

    /// `F(k) = P(NB <= k)`; zero for negative `k`.
    pub fn cdf(&self, k: i64) -> Result<f64> {
        if k < 0 {
            return Ok(0.0);
        }
        let k = k as u64;
        self.check_ceiling(k)?;
        let mode = self.mode();
        let mut total = 0.0;
        for (j, p) in self.terms().enumerate() {
            let j = j as u64;
            let next = total + p;
            // past the mode the remaining terms can no longer move the sum
            if j > mode && next == total {
                break;
            }
            total = next;
            if j == k {
                break;
            }
        }
        Ok(total)
    }

    /// `G(k) = P(NB >= k) = 1 - F(k - 1)`.
    pub fn survival(&self, k: u64) -> Result<f64> {
        if k == 0 {
            return Ok(1.0);
        }
        Ok(1.0 - self.cdf(k as i64 - 1)?)
    }

    /// `min { i : F(i) >= p }` for `0 < p < 1`.
    pub fn quantile(&self, p: f64) -> Result<u64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::param(format!("quantile level must lie in (0, 1), got {p}")));
        }
        self.table()?.quantile(p)
    }

    /// Cumulative table over the whole numerically relevant support.
    pub fn table(&self) -> Result<CdfTable> {
        CdfTable::build(*self)
    }

    /// Process-wide memoized table for `(d, R, ceiling)`.
    pub fn shared_table(&self) -> Result<Arc<CdfTable>> {
        type Key = (u64, u64, u64);
        static CACHE: OnceLock<Mutex<HashMap<Key, Arc<CdfTable>>>> = OnceLock::new();
        let key = (self.d, self.r.to_bits(), self.ceiling);
        let cache = CACHE.get_or_init(Default::default);
        if let Some(t) = cache.lock().expect("nb cache poisoned").get(&key) {
            return Ok(Arc::clone(t));
        }
        let table = Arc::new(self.table()?);
        cache
            .lock()
            .expect("nb cache poisoned")
            .insert(key, Arc::clone(&table));
        Ok(table)
    }
}

/// Iterator over `pmf(0), pmf(1), ...` with a log-scale carried separately so
/// that `R^d` underflowing for large `d` does not zero the whole sequence.
struct PmfTerms {
    k: f64,
    d: f64,
    q: f64,
    mant: f64,
    log_scale: f64,
}

impl PmfTerms {
    fn new(d: u64, r: f64) -> Self {
        let log0 = d as f64 * r.ln();
        let (mant, log_scale) = if log0 > -600.0 {
            (r.powf(d as f64), 0.0)
        } else {
            (1.0, log0)
        };
        PmfTerms {
            k: 0.0,
            d: d as f64,
            q: 1.0 - r,
            mant,
            log_scale,
        }
    }
}

impl Iterator for PmfTerms {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let value = if self.log_scale == 0.0 {
            self.mant
        } else {
            self.mant * self.log_scale.exp()
        };
        self.mant *= (self.k + self.d) / (self.k + 1.0) * self.q;
        self.k += 1.0;
        if self.mant > 1e150 || (self.mant < 1e-150 && self.mant > 0.0 && self.log_scale != 0.0) {
            self.log_scale += self.mant.ln();
            self.mant = 1.0;
        }
        Some(value)
    }
}

/// Memoized `F(0), F(1), ...` up to the point where further terms no longer
/// change the running sum; beyond that the CDF is constant.
#[derive(Debug, Clone)]
pub struct CdfTable {
    nb: NegBin,
    cdf: Vec<f64>,
}

impl CdfTable {
    pub fn build(nb: NegBin) -> Result<Self> {
        let mode = nb.mode();
        let mut cdf = Vec::with_capacity((nb.mean() + 12.0 * nb.variance().sqrt()) as usize + 16);
        let mut total = 0.0;
        for (k, p) in nb.terms().enumerate() {
            let k = k as u64;
            nb.check_ceiling(k)?;
            let next = total + p;
            if k > mode && next == total {
                break;
            }
            total = next;
            cdf.push(total);
        }
        Ok(CdfTable { nb, cdf })
    }

    pub fn nb(&self) -> NegBin {
        self.nb
    }

    /// Last support point stored; the CDF is flat from here on.
    pub fn support_end(&self) -> u64 {
        self.cdf.len() as u64 - 1
    }

    pub fn cdf(&self, k: i64) -> f64 {
        if k < 0 {
            0.0
        } else {
            let i = (k as usize).min(self.cdf.len() - 1);
            self.cdf[i]
        }
    }

    pub fn survival(&self, k: u64) -> f64 {
        if k == 0 {
            1.0
        } else {
            1.0 - self.cdf(k as i64 - 1)
        }
    }

    /// `min { i : F(i) >= p }`.
    pub fn quantile(&self, p: f64) -> Result<u64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::param(format!("quantile level must lie in (0, 1), got {p}")));
        }
        let i = self.cdf.partition_point(|&f| f < p);
        if i == self.cdf.len() {
            return Err(Error::Overflow {
                d: self.nb.d,
                r: self.nb.r,
                ceiling: self.support_end(),
            });
        }
        Ok(i as u64)
    }

    /// The `1 - u` quantile evaluated through the survival function:
    /// `min { i : G(i + 1) <= u }`, which equals `quantile(1 - u)` in exact
    /// arithmetic and satisfies `G(k) <= u  <=>  k > result` exactly in
    /// floating point. If no stored point qualifies (u below the numerical
    /// tail) the end of the stored support is returned.
    pub fn upper_quantile(&self, u: f64) -> u64 {
        let i = self.cdf.partition_point(|&f| 1.0 - f > u);
        (i.min(self.cdf.len() - 1)) as u64
    }
}
