//! Truncated distributions over nonnegative integer round counts.
//!
//! A [`DelayDistribution`] stores both the PMF and the CDF on `0..=n_max`.
//! Mass beyond `n_max` is never silently dropped: it is reported as
//! `tail_mass = 1 - cdf[n_max]`. Because every supported operation only
//! reads values at indices `<= k` to produce index `k`, the in-range values
//! are exact (up to rounding) no matter how much mass was truncated.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("{0}")]
    Domain(String),
    #[error("truncation lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("max of an empty list of distributions")]
    EmptyList,
    #[error("confidence {tau} exceeds the covered mass {covered} at n_max = {n_max}")]
    TailTooHeavy {
        tau: f64,
        covered: f64,
        n_max: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayDistribution {
    pmf: Vec<f64>,
    cdf: Vec<f64>,
    tail_mass: f64,
}

fn tail_of(cdf: &[f64]) -> f64 {
    (1.0 - cdf.last().copied().unwrap_or(0.0)).clamp(0.0, 1.0)
}

impl DelayDistribution {
    /// Builds from a PMF on `0..=n_max`; the CDF is its running sum.
    pub fn from_pmf(pmf: Vec<f64>) -> Result<Self, DistError> {
        if pmf.len() < 2 {
            return Err(DistError::Domain("n_max must be at least 1".into()));
        }
        if let Some(bad) = pmf.iter().find(|&&x| !(x >= 0.0 && x.is_finite())) {
            return Err(DistError::Domain(format!(
                "negative or non-finite mass {bad}"
            )));
        }
        let cdf: Vec<f64> = pmf
            .iter()
            .scan(0.0, |acc, &x| {
                *acc += x;
                Some(*acc)
            })
            .collect();
        if cdf[cdf.len() - 1] > 1.0 + 1e-9 {
            return Err(DistError::Domain(format!(
                "total mass {} exceeds 1",
                cdf[cdf.len() - 1]
            )));
        }
        let tail_mass = tail_of(&cdf);
        Ok(Self {
            pmf,
            cdf,
            tail_mass,
        })
    }

    /// Builds from a nondecreasing CDF on `0..=n_max`; the PMF is its first
    /// difference.
    pub fn from_cdf(cdf: Vec<f64>) -> Result<Self, DistError> {
        if cdf.len() < 2 {
            return Err(DistError::Domain("n_max must be at least 1".into()));
        }
        let mut prev = 0.0;
        let mut pmf = Vec::with_capacity(cdf.len());
        for &c in &cdf {
            if !(c.is_finite() && c >= prev && c <= 1.0 + 1e-9) {
                return Err(DistError::Domain(format!(
                    "cdf must be nondecreasing within [0, 1], found {c} after {prev}"
                )));
            }
            pmf.push(c - prev);
            prev = c;
        }
        let tail_mass = tail_of(&cdf);
        Ok(Self {
            pmf,
            cdf,
            tail_mass,
        })
    }

    /// Empirical distribution of nonnegative integer samples.
    ///
    /// `n_max` is the largest sample (at least 1), so the tail is empty.
    pub fn from_samples(samples: &[usize]) -> Result<Self, DistError> {
        if samples.is_empty() {
            return Err(DistError::Domain("no samples".into()));
        }
        let n_max = samples.iter().copied().max().unwrap_or(0).max(1);
        let mut counts = vec![0usize; n_max + 1];
        for &s in samples {
            counts[s] += 1;
        }
        let r = samples.len() as f64;
        let mut acc = 0usize;
        let cdf = counts
            .iter()
            .map(|&c| {
                acc += c;
                acc as f64 / r
            })
            .collect();
        Self::from_cdf(cdf)
    }

    /// All mass on round `k`.
    pub fn point_mass(k: usize, n_max: usize) -> Result<Self, DistError> {
        if n_max == 0 {
            return Err(DistError::Domain("n_max must be at least 1".into()));
        }
        let mut pmf = vec![0.0; n_max + 1];
        if k <= n_max {
            pmf[k] = 1.0;
        }
        Self::from_pmf(pmf)
    }

    /// Rounds until the first success of independent trials that each fail
    /// with probability `p`: `pmf[k] = p^(k-1) (1-p)` and `cdf[k] = 1 - p^k`.
    pub fn geometric(p: f64, n_max: usize) -> Result<Self, DistError> {
        if !(0.0..1.0).contains(&p) {
            return Err(DistError::Domain(format!(
                "failure probability {p} outside [0, 1)"
            )));
        }
        if n_max == 0 {
            return Err(DistError::Domain("n_max must be at least 1".into()));
        }
        let mut pmf = vec![0.0; n_max + 1];
        let mut cdf = vec![0.0; n_max + 1];
        for k in 1..=n_max {
            let pk = p.powi(k as i32 - 1);
            pmf[k] = pk * (1.0 - p);
            cdf[k] = 1.0 - pk * p;
        }
        let tail_mass = tail_of(&cdf);
        Ok(Self {
            pmf,
            cdf,
            tail_mass,
        })
    }

    pub fn n_max(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// Probability of exceeding `n_max`.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// `Pr(X <= k)`, saturating at `cdf[n_max]` beyond the truncation point.
    pub fn cdf_at(&self, k: usize) -> f64 {
        self.cdf[k.min(self.n_max())]
    }

    /// `Pr(X = k)`, zero beyond the truncation point.
    pub fn pmf_at(&self, k: usize) -> f64 {
        self.pmf.get(k).copied().unwrap_or(0.0)
    }

    /// `sum_k k pmf[k]`. With `tail_mass > 0` this underestimates the true mean.
    pub fn expectation(&self) -> f64 {
        self.pmf
            .iter()
            .enumerate()
            .map(|(k, &p)| k as f64 * p)
            .sum()
    }

    /// Variance of the in-range part, normalized by the covered mass.
    pub fn variance(&self) -> f64 {
        let covered = 1.0 - self.tail_mass;
        if covered <= 0.0 {
            return 0.0;
        }
        let mean = self.expectation() / covered;
        self.pmf
            .iter()
            .enumerate()
            .map(|(k, &p)| (k as f64 - mean).powi(2) * p)
            .sum::<f64>()
            / covered
    }

    /// Distribution of `X + Y` for independent `X`, `Y`: PMF convolution,
    /// truncated back to `n_max`.
    pub fn sum(&self, other: &Self) -> Result<Self, DistError> {
        let n = self.n_max();
        if other.n_max() != n {
            return Err(DistError::LengthMismatch(n, other.n_max()));
        }
        let mut out = vec![0.0; n + 1];
        for (i, &a) in self.pmf.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (o, &b) in out[i..].iter_mut().zip(&other.pmf) {
                *o += a * b;
            }
        }
        Self::from_pmf(out)
    }

    /// Distribution of the maximum of independent variables: pointwise
    /// product of the CDFs.
    pub fn max_combine(ds: &[&Self]) -> Result<Self, DistError> {
        let (first, rest) = ds.split_first().ok_or(DistError::EmptyList)?;
        if rest.is_empty() {
            return Ok((*first).clone());
        }
        let n = first.n_max();
        let mut cdf = first.cdf.clone();
        for d in rest {
            if d.n_max() != n {
                return Err(DistError::LengthMismatch(n, d.n_max()));
            }
            for (c, &x) in cdf.iter_mut().zip(&d.cdf) {
                *c *= x;
            }
        }
        Self::from_cdf(cdf)
    }

    /// Smallest `k` with `cdf[k] >= tau`.
    pub fn deadline_quantile(&self, tau: f64) -> Result<usize, DistError> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(DistError::Domain(format!(
                "confidence {tau} outside (0, 1)"
            )));
        }
        self.cdf
            .iter()
            .position(|&c| c >= tau)
            .ok_or(DistError::TailTooHeavy {
                tau,
                covered: self.cdf[self.n_max()],
                n_max: self.n_max(),
            })
    }

    /// Copy re-truncated to a longer `n_max`; the extension carries no mass.
    pub fn extended(&self, n_max: usize) -> Self {
        let mut d = self.clone();
        if n_max > self.n_max() {
            let last = self.cdf[self.n_max()];
            d.pmf.resize(n_max + 1, 0.0);
            d.cdf.resize(n_max + 1, last);
        }
        d
    }

    /// Last index worth printing: trailing rows with exactly zero mass are
    /// dropped (row 1 is always kept).
    pub fn last_significant(&self) -> usize {
        self.pmf.iter().rposition(|&p| p != 0.0).unwrap_or(0).max(1)
    }
}

/// Initial truncation length from Markov's inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncationSeed {
    pub n_max: usize,
    /// The bound exceeded `cap` and was clamped.
    pub clamped: bool,
}

/// `ceil(n / ((1 - p_max) eps))`, clamped to `cap`.
///
/// `Pr(Z > N) <= E[Z]/N <= n / ((1 - p_max) N)`, so this length keeps the
/// truncated mass below `eps` for any network on `n` nodes.
pub fn truncation_length(
    n: usize,
    p_max: f64,
    eps: f64,
    cap: usize,
) -> Result<TruncationSeed, DistError> {
    if n == 0 || cap == 0 {
        return Err(DistError::Domain(
            "node count and cap must be positive".into(),
        ));
    }
    if !(0.0..1.0).contains(&p_max) {
        return Err(DistError::Domain(format!("p_max {p_max} outside [0, 1)")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(DistError::Domain(format!("eps {eps} outside (0, 1)")));
    }
    let raw = n as f64 / ((1.0 - p_max) * eps);
    // Shave off rounding noise so exact quotients do not round up by one.
    let bound = (raw * (1.0 - 4.0 * f64::EPSILON)).ceil();
    if bound >= cap as f64 {
        Ok(TruncationSeed {
            n_max: cap,
            clamped: bound > cap as f64,
        })
    } else {
        Ok(TruncationSeed {
            n_max: (bound as usize).max(1),
            clamped: false,
        })
    }
}
