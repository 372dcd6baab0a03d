//! Wasserstein-1 estimators (1D exact, d ≥ 2 by optimal assignment) and
//! log-log rate fitting.

use crate::error::{Error, Result};
use crate::linalg::sub_vec;
use crate::rng::{sample_without_replacement, NoiseStream};

/// Largest point count accepted by the exact assignment solver.
pub const ASSIGNMENT_CAP: usize = 4096;

/// Equal-weight empirical measure.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    pub points: Vec<Vec<f64>>,
}

impl EmpiricalMeasure {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("EmpiricalMeasure: empty".into()));
        }
        let d = points[0].len();
        for p in &points {
            if p.len() != d {
                return Err(Error::InvalidInput("EmpiricalMeasure: ragged dims".into()));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("EmpiricalMeasure: non-finite point".into()));
            }
        }
        Ok(Self { points })
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// 1D coordinate view.
    pub fn coords_1d(&self) -> Result<Vec<f64>> {
        if self.dim() != 1 {
            return Err(Error::InvalidInput("coords_1d: dim != 1".into()));
        }
        Ok(self.points.iter().map(|p| p[0]).collect())
    }
}

/// W1 between 1D samples by the comonotone (sorted) coupling. Unequal
/// sizes are aligned on the midpoint quantiles of the larger count.
pub fn w1_1d_sorted(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("w1_1d_sorted: empty sample".into()));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.total_cmp(y));
    sb.sort_by(|x, y| x.total_cmp(y));
    if sa.len() == sb.len() {
        let n = sa.len() as f64;
        return Ok(sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum::<f64>() / n);
    }
    let n = sa.len().max(sb.len());
    let q = |s: &[f64], u: f64| -> f64 {
        let k = ((u * s.len() as f64) as usize).min(s.len() - 1);
        s[k]
    };
    let mut total = 0.0;
    for i in 0..n {
        let u = (i as f64 + 0.5) / n as f64;
        total += (q(&sa, u) - q(&sb, u)).abs();
    }
    Ok(total / n as f64)
}

/// Exact 1D W1 between tabulated CDFs on a shared grid: ∫|F−G| by
/// trapezoid. Both CDFs must start at 0 and end at 1.
pub fn w1_1d_cdf(xs: &[f64], f_cdf: &[f64], g_cdf: &[f64]) -> Result<f64> {
    if xs.len() < 2 || xs.len() != f_cdf.len() || xs.len() != g_cdf.len() {
        return Err(Error::InvalidInput("w1_1d_cdf: grid mismatch".into()));
    }
    for cdf in [f_cdf, g_cdf] {
        let (first, last) = (cdf[0], *cdf.last().unwrap());
        if first.abs() > 1e-6 || (last - 1.0).abs() > 1e-6 {
            return Err(Error::Unnormalized(format!(
                "CDF spans [{first}, {last}], expected [0, 1]"
            )));
        }
    }
    let mut s = 0.0;
    for i in 1..xs.len() {
        let h = xs[i] - xs[i - 1];
        let d0 = (f_cdf[i - 1] - g_cdf[i - 1]).abs();
        let d1 = (f_cdf[i] - g_cdf[i]).abs();
        s += 0.5 * h * (d0 + d1);
    }
    Ok(s)
}

/// Exact 1D W1 between an empirical sample and a continuous law given by
/// a piecewise-linear CDF on `xs`: ∫|F_n − F| over the merged breakpoints,
/// splitting intervals where the difference changes sign.
pub fn w1_1d_sample_vs_cdf(sample: &[f64], xs: &[f64], cdf: &[f64]) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InvalidInput("w1_1d_sample_vs_cdf: empty sample".into()));
    }
    if xs.len() < 2 || xs.len() != cdf.len() {
        return Err(Error::InvalidInput("w1_1d_sample_vs_cdf: grid mismatch".into()));
    }
    if cdf[0].abs() > 1e-6 || (cdf.last().unwrap() - 1.0).abs() > 1e-6 {
        return Err(Error::Unnormalized(format!(
            "CDF spans [{}, {}], expected [0, 1]",
            cdf[0],
            cdf.last().unwrap()
        )));
    }
    let mut s = sample.to_vec();
    s.sort_by(|x, y| x.total_cmp(y));
    let n = s.len() as f64;
    let fs = |x: f64| s.partition_point(|&v| v <= x) as f64 / n;
    let fc = |x: f64| -> f64 {
        if x <= xs[0] {
            return 0.0;
        }
        if x >= *xs.last().unwrap() {
            return 1.0;
        }
        let i = xs.partition_point(|&v| v <= x);
        let (x0, x1) = (xs[i - 1], xs[i]);
        let th = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
        cdf[i - 1] + th * (cdf[i] - cdf[i - 1])
    };
    // merged breakpoints; F_n constant and F linear between consecutive ones
    let mut bp: Vec<f64> = xs.to_vec();
    bp.extend_from_slice(&s);
    bp.push(s[0].min(xs[0]));
    bp.push(s[s.len() - 1].max(*xs.last().unwrap()));
    bp.sort_by(|x, y| x.total_cmp(y));
    bp.dedup();
    let mut total = 0.0;
    for w in bp.windows(2) {
        let (u, v) = (w[0], w[1]);
        if v <= u {
            continue;
        }
        let k = fs(0.5 * (u + v)); // F_n on the open interval
        let (du, dv) = (fc(u) - k, fc(v) - k);
        total += if du * dv >= 0.0 {
            0.5 * (v - u) * (du.abs() + dv.abs())
        } else {
            // linear difference crosses zero inside the interval
            let r = u + (v - u) * du / (du - dv);
            0.5 * ((r - u) * du.abs() + (v - r) * dv.abs())
        };
    }
    Ok(total)
}

/// W1 by exact minimum-cost assignment under Euclidean cost (any dim).
pub fn w1_assignment(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::InvalidInput("w1_assignment: empty or unequal counts".into()));
    }
    if a.len() > ASSIGNMENT_CAP {
        return Err(Error::InvalidInput(format!(
            "w1_assignment: {} points exceeds cap {ASSIGNMENT_CAP}; subsample first",
            a.len()
        )));
    }
    let n = a.len();
    let cost = |i: usize, j: usize| -> f64 {
        a[i].iter()
            .zip(&b[j])
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let total = hungarian_min_cost(n, &cost);
    Ok(total / n as f64)
}

/// Subsampled assignment W1 with a crude bootstrap standard error, for
/// point sets above the exact-solver cap.
pub fn w1_assignment_subsampled(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    cap: usize,
    stream: &NoiseStream,
    batch: u64,
) -> Result<(f64, f64)> {
    let cap = cap.min(ASSIGNMENT_CAP);
    if a.len() <= cap && b.len() <= cap && a.len() == b.len() {
        return Ok((w1_assignment(a, b)?, 0.0));
    }
    let reps = 8;
    let mut vals = Vec::with_capacity(reps);
    for r in 0..reps {
        let mut rng = stream.sequential(batch.wrapping_add(r as u64), crate::rng::sub::BATCH);
        let ia = sample_without_replacement(a.len(), cap, &mut rng);
        let ib = sample_without_replacement(b.len(), cap, &mut rng);
        let sa: Vec<Vec<f64>> = ia.iter().map(|&i| a[i].clone()).collect();
        let sb: Vec<Vec<f64>> = ib.iter().map(|&i| b[i].clone()).collect();
        vals.push(w1_assignment(&sa, &sb)?);
    }
    let mean = vals.iter().sum::<f64>() / reps as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (reps - 1) as f64;
    // standard error of the reported mean; reps share the underlying
    // sample, so treat this as a noise scale rather than a rigorous CI
    Ok((mean, (var / reps as f64).sqrt()))
}

/// Shortest-augmenting-path Hungarian algorithm; cost queried lazily so
/// no n×n matrix is materialized. Returns the total assignment cost.
fn hungarian_min_cost(n: usize, cost: &dyn Fn(usize, usize) -> f64) -> f64 {
    // rows and columns are 1-based; column 0 is the virtual start
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1]; // p[j]: row matched to column j
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        // augment along the alternating path
        while j0 != 0 {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        }
    }
    (1..=n).map(|j| cost(p[j] - 1, j - 1)).sum()
}

/// Least-squares fit of log y against log x.
#[derive(Debug, Clone, Copy)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn rate_fit(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    if xs.len() < 4 || xs.len() != ys.len() {
        return Err(Error::InvalidInput("rate_fit: need ≥ 4 matched points".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput("rate_fit: values must be positive finite".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidInput("rate_fit: x values are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { (sxy * sxy / (sxx * syy)).min(1.0) } else { 1.0 };
    Ok(RateFit { slope, intercept, r_squared })
}

/// Mean Euclidean distance between paired points (coupling diagnostics).
pub fn mean_pair_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::InvalidInput("mean_pair_distance: unequal counts".into()));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| crate::linalg::norm2(&sub_vec(x, y)))
        .sum::<f64>()
        / a.len() as f64)
}
