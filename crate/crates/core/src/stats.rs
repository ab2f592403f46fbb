//! Order-independent summation and sample moments.

use serde::{Deserialize, Serialize};

/// Pairwise (cascade) summation. The result depends only on the order of
/// `xs`, never on how the caller produced them.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Sample mean, unbiased variance, skewness and (non-excess) kurtosis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Moments {
        let n = xs.len();
        let m = mean(xs);
        let centered = |p: i32| -> f64 {
            let v: Vec<f64> = xs.iter().map(|x| (x - m).powi(p)).collect();
            pairwise_sum(&v) / n as f64
        };
        let m2 = centered(2);
        let variance = if n > 1 {
            m2 * n as f64 / (n - 1) as f64
        } else {
            f64::NAN
        };
        Moments {
            count: n,
            mean: m,
            variance,
            skewness: centered(3) / m2.powf(1.5),
            kurtosis: centered(4) / (m2 * m2),
        }
    }
}

/// Pearson correlation.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let va: Vec<f64> = a.iter().map(|x| (x - ma).powi(2)).collect();
    let vb: Vec<f64> = b.iter().map(|y| (y - mb).powi(2)).collect();
    pairwise_sum(&cov) / (pairwise_sum(&va) * pairwise_sum(&vb)).sqrt()
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let sxx: Vec<f64> = x.iter().map(|a| (a - mx).powi(2)).collect();
    pairwise_sum(&sxy) / pairwise_sum(&sxx)
}
