//! Matrix profile of integer series, and a causal discord detector on the
//! in-degree series.
//!
//! Distances are z-normalized Euclidean. Sliding dot products are exact
//! integers, so the only rounding happens in one square root per pair. A
//! subsequence with zero variance normalizes to the zero vector: two constant
//! subsequences are at distance 0 and a constant one lies at `sqrt(m)` from
//! any non-constant one.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::iter::Sum;
use core::ops::{Add, Mul, Sub};

use super::{bad, flag, DetectContext, Detector, DetectorError, DetectorSpec, Params, PredictionSeries, TrainLabels};
use crate::snapshot::SnapshotSequence;
use crate::stats::quantile;

/// Trivial-match half-width for subsequence length `m`: `ceil(m / 2)`.
pub fn exclusion_zone(m: usize) -> usize {
    m.div_ceil(2)
}

/// Running sums `(S, Q)` of every length-`m` subsequence.
fn window_sums(series: &[u32], m: usize) -> Vec<(i128, i128)> {
    let k = series.len() + 1 - m;
    let mut out = Vec::with_capacity(k);
    let (mut s, mut q) = (0i128, 0i128);
    for (i, &x) in series.iter().enumerate() {
        let x = i128::from(x);
        s += x;
        q += x * x;
        if i >= m {
            let y = i128::from(series[i - m]);
            s -= y;
            q -= y * y;
        }
        if i + 1 >= m {
            out.push((s, q));
        }
    }
    debug_assert_eq!(out.len(), k);
    out
}

/// Per-subsequence terms of the distance: `S`, `A = mQ - S^2` and `sqrt(A)`.
#[derive(Clone, Copy)]
struct Window {
    sum: i128,
    spread: i128,
    root: f64,
}

fn windows(series: &[u32], m: usize) -> Vec<Window> {
    window_sums(series, m)
        .into_iter()
        .map(|(s, q)| {
            let spread = m as i128 * q - s * s;
            Window {
                sum: s,
                spread,
                root: libm::sqrt(spread as f64),
            }
        })
        .collect()
}

/// z-normalized distance from the sliding dot product `qt`.
///
/// With `A`, `B` the window spreads and `C = m qt - S_i S_j`, the squared
/// distance is `2m (1 - C / sqrt(AB))`. Near `C = sqrt(AB)` the difference is
/// taken exactly as `(AB - C^2) / (sqrt(AB) (sqrt(AB) + C))`.
fn znorm_distance(m: usize, qt: i128, a: Window, b: Window) -> f64 {
    match (a.spread == 0, b.spread == 0) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return libm::sqrt(m as f64),
        _ => {}
    }
    let c = m as i128 * qt - a.sum * b.sum;
    let root = a.root * b.root;
    let mut one_minus_rho = 1.0 - c as f64 / root;
    if one_minus_rho < 1e-3 && c > 0 {
        if let (Some(ab), Some(c2)) = (a.spread.checked_mul(b.spread), c.checked_mul(c)) {
            one_minus_rho = (ab - c2) as f64 / (root * (root + c as f64));
        }
    }
    libm::sqrt((2.0 * m as f64 * one_minus_rho).max(0.0))
}

/// Self-join matrix profile. Entries without any non-trivial neighbor are
/// `+inf` with index `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixProfile {
    m: usize,
    profile: Vec<f64>,
    index: Vec<Option<usize>>,
    left: Vec<f64>,
    left_index: Vec<Option<usize>>,
}

impl MatrixProfile {
    /// Computes full and left profiles diagonal by diagonal. `None` when
    /// `m < 2` or the series is shorter than `m`.
    pub fn self_join(series: &[u32], m: usize) -> Option<Self> {
        if m < 2 || series.len() < m {
            return None;
        }
        let k = series.len() + 1 - m;
        let sums = windows(series, m);
        let mut mp = MatrixProfile {
            m,
            profile: vec![f64::INFINITY; k],
            index: vec![None; k],
            left: vec![f64::INFINITY; k],
            left_index: vec![None; k],
        };
        // 64-bit dot products cannot overflow below these bounds
        if m <= 1 << 11 && series.iter().all(|&v| v <= 1 << 20) {
            let x: Vec<i64> = series.iter().map(|&v| i64::from(v)).collect();
            mp.sweep(&x, &sums);
        } else {
            let x: Vec<i128> = series.iter().map(|&v| i128::from(v)).collect();
            mp.sweep(&x, &sums);
        }
        Some(mp)
    }

    fn sweep<A>(&mut self, x: &[A], sums: &[Window])
    where
        A: Copy + Add<Output = A> + Sub<Output = A> + Mul<Output = A> + Sum + Into<i128>,
    {
        let (m, k) = (self.m, sums.len());
        for d in exclusion_zone(m) + 1..k {
            let mut qt: A = (0..m).map(|l| x[l] * x[d + l]).sum();
            for i in 0..k - d {
                let j = i + d;
                if i > 0 {
                    qt = qt + x[i + m - 1] * x[j + m - 1] - x[i - 1] * x[j - 1];
                }
                let dist = znorm_distance(m, qt.into(), sums[i], sums[j]);
                if dist < self.profile[i] {
                    self.profile[i] = dist;
                    self.index[i] = Some(j);
                }
                if dist < self.profile[j] {
                    self.profile[j] = dist;
                    self.index[j] = Some(i);
                }
                if dist < self.left[j] {
                    self.left[j] = dist;
                    self.left_index[j] = Some(i);
                }
            }
        }
    }

    pub fn subsequence_len(&self) -> usize {
        self.m
    }

    /// Distance of subsequence `i` to its nearest non-trivial match.
    pub fn profile(&self) -> &[f64] {
        &self.profile
    }

    pub fn index(&self) -> &[Option<usize>] {
        &self.index
    }

    /// Nearest non-trivial match among earlier subsequences only.
    pub fn left_profile(&self) -> &[f64] {
        &self.left
    }

    pub fn left_index(&self) -> &[Option<usize>] {
        &self.left_index
    }

    /// Start of the top discord (largest finite profile value; earliest on ties).
    pub fn discord(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &p) in self.profile.iter().enumerate() {
            if p.is_finite() && best.is_none_or(|b| p > self.profile[b]) {
                best = Some(i);
            }
        }
        best
    }
}

#[derive(Debug, Clone)]
pub struct MatrixProfileDetector {
    name: String,
    /// Fixed subsequence length; when `None` it follows the window.
    m: Option<usize>,
    quantile: f64,
    margin: f64,
}

impl MatrixProfileDetector {
    pub const MIN_M: usize = 3;

    pub fn new(name: String, m: Option<usize>, quantile: f64, margin: f64) -> Self {
        MatrixProfileDetector {
            name,
            m,
            quantile,
            margin,
        }
    }

    pub fn from_spec(name: String, spec: &DetectorSpec) -> Result<Self, DetectorError> {
        let p = Params::new(spec, &["m", "quantile", "margin"])?;
        let m = p.count("m")?;
        if m.is_some_and(|m| m < Self::MIN_M) {
            return Err(bad("m", "subsequence length must be at least 3"));
        }
        let quantile = p.number("quantile")?.unwrap_or(0.98);
        if !(0.0..=1.0).contains(&quantile) {
            return Err(bad("quantile", "must lie in [0, 1]"));
        }
        let margin = p.number("margin")?.unwrap_or(1e-6);
        if margin < 0.0 {
            return Err(bad("margin", "must be non-negative"));
        }
        Ok(Self::new(name, m, quantile, margin))
    }

    fn subsequence_len(&self, window: usize) -> usize {
        self.m.unwrap_or(window.max(Self::MIN_M))
    }
}

impl Detector for MatrixProfileDetector {
    fn name(&self) -> &str {
        &self.name
    }

    fn windowed(&self) -> bool {
        self.m.is_none()
    }

    /// Scores the subsequence ending at `t = s - lag` by its left matrix
    /// profile value, so only bins `<= t` are read. The threshold is the
    /// pooled quantile of left-profile values of subsequences lying inside
    /// the calibration region, plus `margin`.
    fn predict(
        &self,
        snap: &SnapshotSequence,
        _train: &TrainLabels<'_>,
        ctx: &DetectContext,
    ) -> Result<PredictionSeries, DetectorError> {
        ctx.validate(snap)?;
        let m = self.subsequence_len(ctx.window);
        if ctx.fit_end < 2 * m {
            return Err(DetectorError::SeriesTooShort { node: 0 });
        }
        let n = snap.node_count();
        let horizon = ctx.horizon().map_or(0, |h| h + 1).max(ctx.fit_end);
        let degrees = snap.degree_table();
        let profiles: Vec<MatrixProfile> = (0..n)
            .map(|v| MatrixProfile::self_join(&degrees.series(v)[..horizon], m).expect("series spans at least 2m bins"))
            .collect();

        let calib_subsequences = ctx.fit_end + 1 - m;
        let pooled: Vec<f64> = profiles
            .iter()
            .flat_map(|p| p.left_profile()[..calib_subsequences].iter().copied())
            .filter(|x| x.is_finite())
            .collect();
        let threshold = quantile(&pooled, self.quantile).map_or(f64::INFINITY, |q| q + self.margin);

        let mut out = PredictionSeries::new(n, ctx.targets.clone(), ctx.lag);
        out.fill(|v, s| {
            let score = ctx
                .source_bin(s)
                .and_then(|t| (t + 1).checked_sub(m))
                .map(|i| profiles[v].left_profile()[i])
                .filter(|x| x.is_finite());
            flag(score, threshold)
        });
        out.calibration.threshold = Some(threshold);
        Ok(out)
    }
}
