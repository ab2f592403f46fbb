//! Adaptive Gauss–Kronrod (7/15) quadrature with user-supplied breakpoints.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Integral value with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Integral {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Integral {
        value: kronrod * h,
        error: ((kronrod - gauss) * h).abs(),
    }
}

/// Integrates `f` over `[a, b]`, splitting first at `breaks` and then
/// bisecting the subinterval with the largest error until the total error
/// estimate is below `tol` (absolute) or the subdivision budget is spent.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> Result<Integral> {
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut points = vec![lo];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|x| *x > lo && *x < hi).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    points.extend(inner);
    points.push(hi);

    let mut pieces: Vec<(f64, f64, Integral)> = points.windows(2).map(|w| (w[0], w[1], gk15(&f, w[0], w[1]))).collect();
    const MAX_PIECES: usize = 4000;
    loop {
        let total_err: f64 = pieces.iter().map(|p| p.2.error).sum();
        if total_err <= tol {
            break;
        }
        if pieces.len() >= MAX_PIECES {
            let value: f64 = pieces.iter().map(|p| p.2.value).sum();
            return Err(Error::NumericFailure {
                what: format!("quadrature on [{lo}, {hi}] (value {value})"),
                error_estimate: total_err,
            });
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2.error.total_cmp(&y.1 .2.error))
            .expect("at least one piece");
        let (l, r, _) = pieces.swap_remove(idx);
        let m = 0.5 * (l + r);
        if m <= l || m >= r {
            // interval cannot be split further in floating point
            let total_err: f64 = pieces.iter().map(|p| p.2.error).sum();
            return Err(Error::NumericFailure {
                what: format!("quadrature on [{lo}, {hi}] hit floating-point resolution"),
                error_estimate: total_err,
            });
        }
        pieces.push((l, m, gk15(&f, l, m)));
        pieces.push((m, r, gk15(&f, m, r)));
    }
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    let value: f64 = pieces.iter().map(|p| p.2.value).sum();
    let error: f64 = pieces.iter().map(|p| p.2.error).sum();
    Ok(Integral {
        value: sign * value,
        error,
    })
}
