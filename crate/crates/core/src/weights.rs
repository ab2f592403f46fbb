//! Weight functions for pre-averaging, their correlation functionals and
//! the five scalar constants entering the asymptotic variance.
//!
//! `phi(u, v, y) = ∫ u(x - y) v(x) dx` where `u` and `v` are `g` or `g'`.
//! The constants are
//! `psi1 = ∫ g'^2`, `psi2 = ∫ g^2`, `phi22 = ∫_0^∞ phi_gg^2`,
//! `phi12 = ∫_0^∞ phi_gg phi_g'g'` and `phi11 = ∫_0^∞ phi_g'g'^2`.

use std::cell::Cell;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::integrate;

/// Range multiple for unbounded weights: `e^{-40}` is far below any tolerance used.
const TAIL_RATES: f64 = 40.0;
const PHI_TOL: f64 = 1e-13;
const CONSTANT_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WeightKind {
    /// `g(x) = x ∧ (1 - x)` on `[0, 1]`.
    Tent,
    /// `g(x) = exp(-rate |x|)`.
    DoubleExp { rate: f64 },
    /// Linear interpolation of `(x, y)` knots running from `(0, 0)` to `(1, 0)`.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Support {
    UnitInterval,
    ExponentialDecay,
}

/// Selects `g` or its derivative inside `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    G,
    DG,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub psi1: f64,
    pub psi2: f64,
    pub phi22: f64,
    pub phi12: f64,
    pub phi11: f64,
}

/// Constants together with the quadrature error estimate of each entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsWithError {
    pub value: Constants,
    pub error: Constants,
}

impl WeightKind {
    pub fn tent() -> Self {
        WeightKind::Tent
    }

    pub fn double_exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::input(format!("double exponential rate {rate} must be positive")));
        }
        Ok(WeightKind::DoubleExp { rate })
    }

    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 3 {
            return Err(Error::input("piecewise-linear weight needs at least three knots"));
        }
        let (first, last) = (knots[0], knots[knots.len() - 1]);
        if first != (0.0, 0.0) || last != (1.0, 0.0) {
            return Err(Error::input(
                "piecewise-linear weight must start at (0,0) and end at (1,0)",
            ));
        }
        if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::input("piecewise-linear knots must have increasing x"));
        }
        if knots.iter().any(|k| !k.1.is_finite()) || knots.iter().all(|k| k.1 == 0.0) {
            return Err(Error::input(
                "piecewise-linear weight must be finite and not identically zero",
            ));
        }
        Ok(WeightKind::PiecewiseLinear { knots })
    }

    /// Parses `tent`, `doubleexp`, `doubleexp:<rate>` (rate may be written
    /// `sqrt<v>`) or `pwl:<x>/<y>,<x>/<y>,...`.
    pub fn parse(name: &str) -> Result<Self> {
        let name = name.trim();
        let (head, arg) = match name.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (name, None),
        };
        match (head, arg) {
            ("tent", None) => Ok(WeightKind::Tent),
            ("doubleexp", None) => Self::double_exponential(1.0),
            ("doubleexp", Some(r)) => Self::double_exponential(parse_number(r)?),
            ("pwl", Some(spec)) => {
                let knots = spec
                    .split(',')
                    .map(|pair| {
                        let (x, y) = pair
                            .split_once('/')
                            .ok_or_else(|| Error::input(format!("knot '{pair}' is not x/y")))?;
                        Ok((parse_number(x)?, parse_number(y)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::piecewise_linear(knots)
            }
            _ => Err(Error::input(format!("unknown weight '{name}'"))),
        }
    }

    pub fn support(&self) -> Support {
        match self {
            WeightKind::DoubleExp { .. } => Support::ExponentialDecay,
            _ => Support::UnitInterval,
        }
    }

    pub fn decay_rate(&self) -> Option<f64> {
        match self {
            WeightKind::DoubleExp { rate } => Some(*rate),
            _ => None,
        }
    }

    pub fn g(&self, x: f64) -> f64 {
        match self {
            WeightKind::Tent => {
                if (0.0..=1.0).contains(&x) {
                    x.min(1.0 - x)
                } else {
                    0.0
                }
            }
            WeightKind::DoubleExp { rate } => (-rate * x.abs()).exp(),
            WeightKind::PiecewiseLinear { knots } => match segment(knots, x) {
                Some(i) => {
                    let ((x0, y0), (x1, y1)) = (knots[i], knots[i + 1]);
                    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
                }
                None => 0.0,
            },
        }
    }

    /// Derivative of `g`, right-continuous at kinks.
    pub fn dg(&self, x: f64) -> f64 {
        match self {
            WeightKind::Tent => {
                if (0.0..0.5).contains(&x) {
                    1.0
                } else if (0.5..1.0).contains(&x) {
                    -1.0
                } else {
                    0.0
                }
            }
            WeightKind::DoubleExp { rate } => {
                if x == 0.0 {
                    0.0
                } else {
                    -rate * x.signum() * (-rate * x.abs()).exp()
                }
            }
            WeightKind::PiecewiseLinear { knots } => match segment(knots, x) {
                Some(i) if x < 1.0 => {
                    let ((x0, y0), (x1, y1)) = (knots[i], knots[i + 1]);
                    (y1 - y0) / (x1 - x0)
                }
                _ => 0.0,
            },
        }
    }

    pub fn eval(&self, c: Component, x: f64) -> f64 {
        match c {
            Component::G => self.g(x),
            Component::DG => self.dg(x),
        }
    }

    /// Points where `g` or `g'` is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            WeightKind::Tent => vec![0.0, 0.5, 1.0],
            WeightKind::DoubleExp { .. } => vec![0.0],
            WeightKind::PiecewiseLinear { knots } => knots.iter().map(|k| k.0).collect(),
        }
    }

    /// Interval outside of which `g` is zero or negligible.
    fn effective_support(&self) -> (f64, f64) {
        match self {
            WeightKind::DoubleExp { rate } => (-TAIL_RATES / rate, TAIL_RATES / rate),
            _ => (0.0, 1.0),
        }
    }

    /// Closed-form `phi` when one is registered.
    fn phi_closed_form(&self, u: Component, v: Component, y: f64) -> Option<f64> {
        use Component::*;
        let a = y.abs();
        match self {
            WeightKind::DoubleExp { rate: r } => {
                let e = (-r * a).exp();
                Some(match (u, v) {
                    (G, G) => (1.0 + r * a) * e / r,
                    (DG, DG) => r * (1.0 - r * a) * e,
                    (G, DG) => -r * y * e,
                    (DG, G) => r * y * e,
                })
            }
            WeightKind::Tent => {
                // phi_gg and its first two derivatives for y >= 0
                let (f, df, d2f) = if a <= 0.5 {
                    (
                        1.0 / 12.0 - a * a / 2.0 + a * a * a / 2.0,
                        -a + 1.5 * a * a,
                        -1.0 + 3.0 * a,
                    )
                } else if a <= 1.0 {
                    let b = 1.0 - a;
                    (b * b * b / 6.0, -b * b / 2.0, b)
                } else {
                    (0.0, 0.0, 0.0)
                };
                let odd = y.signum() * df;
                Some(match (u, v) {
                    (G, G) => f,
                    (DG, DG) => -d2f,
                    (G, DG) => odd,
                    (DG, G) => -odd,
                })
            }
            WeightKind::PiecewiseLinear { .. } => None,
        }
    }

    fn constants_closed_form(&self) -> Option<Constants> {
        match self {
            WeightKind::Tent => Some(Constants {
                psi1: 1.0,
                psi2: 1.0 / 12.0,
                phi22: 151.0 / 80640.0,
                phi12: 1.0 / 96.0,
                phi11: 1.0 / 6.0,
            }),
            WeightKind::DoubleExp { rate: r } => Some(Constants {
                psi1: *r,
                psi2: 1.0 / r,
                phi22: 1.25 / (r * r * r),
                phi12: 0.25 / r,
                phi11: 0.25 * r,
            }),
            WeightKind::PiecewiseLinear { .. } => None,
        }
    }
}

fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let parsed = match s.strip_prefix("sqrt") {
        Some(rest) => rest
            .trim_matches(|c| c == '(' || c == ')')
            .parse::<f64>()
            .map(f64::sqrt),
        None => s.parse::<f64>(),
    };
    parsed.map_err(|_| Error::input(format!("cannot parse number '{s}'")))
}

fn segment(knots: &[(f64, f64)], x: f64) -> Option<usize> {
    if !(0.0..=1.0).contains(&x) {
        return None;
    }
    let i = knots.partition_point(|k| k.0 <= x);
    Some(i.saturating_sub(1).min(knots.len() - 2))
}

impl fmt::Display for WeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightKind::Tent => write!(f, "tent"),
            WeightKind::DoubleExp { rate } => write!(f, "doubleexp:{rate}"),
            WeightKind::PiecewiseLinear { knots } => {
                let parts: Vec<String> = knots.iter().map(|(x, y)| format!("{x}/{y}")).collect();
                write!(f, "pwl:{}", parts.join(","))
            }
        }
    }
}

/// `phi(u, v, y)` by adaptive quadrature.
pub fn phi_quadrature(kind: &WeightKind, u: Component, v: Component, y: f64) -> Result<f64> {
    phi_quadrature_with_error(kind, u, v, y).map(|(value, _)| value)
}

fn phi_quadrature_with_error(kind: &WeightKind, u: Component, v: Component, y: f64) -> Result<(f64, f64)> {
    let (lo, hi) = kind.effective_support();
    // v(x) lives on [lo, hi], u(x - y) on [lo + y, hi + y]
    let (a, b) = match kind.support() {
        Support::UnitInterval => (lo.max(lo + y), hi.min(hi + y)),
        Support::ExponentialDecay => (lo.min(lo + y), hi.max(hi + y)),
    };
    if a >= b {
        return Ok((0.0, 0.0));
    }
    let mut breaks = kind.kinks();
    breaks.extend(kind.kinks().into_iter().map(|k| k + y));
    let r = integrate(|x| kind.eval(u, x - y) * kind.eval(v, x), a, b, &breaks, PHI_TOL)?;
    Ok((r.value, r.error))
}

/// Quadrature-only constants with error estimates.
pub fn constants_quadrature(kind: &WeightKind) -> Result<ConstantsWithError> {
    use Component::*;
    let (lo, hi) = kind.effective_support();
    let kinks = kind.kinks();
    let psi1 = integrate(|x| kind.dg(x).powi(2), lo, hi, &kinks, CONSTANT_TOL)?;
    let psi2 = integrate(|x| kind.g(x).powi(2), lo, hi, &kinks, CONSTANT_TOL)?;

    // phi is non-smooth where shifted kinks collide
    let mut lag_breaks: Vec<f64> = kinks
        .iter()
        .flat_map(|a| kinks.iter().map(move |b| (a - b).abs()))
        .collect();
    lag_breaks.sort_by(f64::total_cmp);
    lag_breaks.dedup();
    let y_max = hi - lo;

    let inner_err = Cell::new(0.0f64);
    let phi_sup = Cell::new(0.0f64);
    let failure = Cell::new(None::<f64>);
    let phi_at = |u, v, y| match phi_quadrature_with_error(kind, u, v, y) {
        Ok((val, err)) => {
            inner_err.set(inner_err.get().max(err));
            phi_sup.set(phi_sup.get().max(val.abs()));
            val
        }
        Err(Error::NumericFailure { error_estimate, .. }) => {
            failure.set(Some(error_estimate));
            0.0
        }
        Err(_) => 0.0,
    };
    let outer = |f: &dyn Fn(f64) -> f64| -> Result<(f64, f64)> {
        inner_err.set(0.0);
        phi_sup.set(0.0);
        let r = integrate(f, 0.0, y_max, &lag_breaks, CONSTANT_TOL)?;
        if let Some(e) = failure.get() {
            return Err(Error::NumericFailure {
                what: "inner phi quadrature".into(),
                error_estimate: e,
            });
        }
        // propagate inner errors through the product integrand
        let err = r.error + 2.0 * phi_sup.get() * inner_err.get() * y_max;
        Ok((r.value, err))
    };
    let phi22 = outer(&|y| phi_at(G, G, y).powi(2))?;
    let phi12 = outer(&|y| phi_at(G, G, y) * phi_at(DG, DG, y))?;
    let phi11 = outer(&|y| phi_at(DG, DG, y).powi(2))?;

    Ok(ConstantsWithError {
        value: Constants {
            psi1: psi1.value,
            psi2: psi2.value,
            phi22: phi22.0,
            phi12: phi12.0,
            phi11: phi11.0,
        },
        error: Constants {
            psi1: psi1.error,
            psi2: psi2.error,
            phi22: phi22.1,
            phi12: phi12.1,
            phi11: phi11.1,
        },
    })
}

/// A validated weight with cached constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub kind: WeightKind,
    pub constants: Constants,
}

impl WeightSpec {
    /// Uses registered closed forms when available and quadrature otherwise.
    pub fn new(kind: WeightKind) -> Result<Self> {
        let constants = match kind.constants_closed_form() {
            Some(c) => c,
            None => constants_quadrature(&kind)?.value,
        };
        if !(constants.psi2 > 0.0) {
            return Err(Error::input("weight has zero L2 norm"));
        }
        Ok(WeightSpec { kind, constants })
    }

    pub fn tent() -> Self {
        Self::new(WeightKind::Tent).expect("tent weight is valid")
    }

    pub fn double_exponential(rate: f64) -> Result<Self> {
        Self::new(WeightKind::double_exponential(rate)?)
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::new(WeightKind::parse(name)?)
    }

    pub fn name(&self) -> String {
        self.kind.to_string()
    }

    pub fn g(&self, x: f64) -> f64 {
        self.kind.g(x)
    }

    pub fn dg(&self, x: f64) -> f64 {
        self.kind.dg(x)
    }

    pub fn support(&self) -> Support {
        self.kind.support()
    }

    pub fn is_bounded(&self) -> bool {
        self.support() == Support::UnitInterval
    }

    /// `phi(u, v, y)`, closed form when registered.
    pub fn phi(&self, u: Component, v: Component, y: f64) -> Result<f64> {
        match self.kind.phi_closed_form(u, v, y) {
            Some(val) => Ok(val),
            None => phi_quadrature(&self.kind, u, v, y),
        }
    }

    /// Kernel implied by the weight, `phi_gg(y) / phi_gg(0)`.
    pub fn kernel(&self, y: f64) -> Result<f64> {
        Ok(self.phi(Component::G, Component::G, y)? / self.constants.psi2)
    }

    /// `2 sqrt(phi22 phi12) - psi2^2`, strictly positive for every admissible weight.
    pub fn jump_variance_gap(&self) -> f64 {
        let c = &self.constants;
        2.0 * (c.phi22 * c.phi12).sqrt() - c.psi2 * c.psi2
    }
}

/// Samples `g(p / k)` over the effective index range.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteWeights {
    pub k: usize,
    /// Smallest index carried in `samples`.
    pub first: i64,
    pub samples: Vec<f64>,
    /// Truncation half-width for unbounded weights; `k` for bounded ones.
    pub half_width: usize,
}

impl DiscreteWeights {
    /// `g(p / k)`, zero outside the stored range.
    pub fn at(&self, p: i64) -> f64 {
        let idx = p - self.first;
        if idx < 0 {
            0.0
        } else {
            self.samples.get(idx as usize).copied().unwrap_or(0.0)
        }
    }

    pub fn last(&self) -> i64 {
        self.first + self.samples.len() as i64 - 1
    }

    /// First differences `g((p+1)/k) - g(p/k)` over the stored range.
    pub fn differences(&self) -> Vec<f64> {
        self.samples.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Samples the weight on the grid `p / k`. Bounded weights use `p = 1..k-1`;
/// exponentially decaying ones use `|p| <= d` with
/// `d = ceil(k ln(1/tol) / rate)`, beyond which `|g| < tol`.
pub fn discretize(spec: &WeightSpec, k: usize, tolerance: f64) -> Result<DiscreteWeights> {
    if k < 2 {
        return Err(Error::input("window size must be at least 2"));
    }
    if !(tolerance > 0.0 && tolerance < 1.0) {
        return Err(Error::input("tolerance must lie in (0, 1)"));
    }
    let kf = k as f64;
    match spec.kind.decay_rate() {
        None => Ok(DiscreteWeights {
            k,
            first: 1,
            samples: (1..k).map(|p| spec.g(p as f64 / kf)).collect(),
            half_width: k,
        }),
        Some(rate) => {
            let d = (kf * (1.0 / tolerance).ln() / rate).ceil() as usize;
            let di = d as i64;
            Ok(DiscreteWeights {
                k,
                first: -di,
                samples: (-di..=di).map(|p| spec.g(p as f64 / kf)).collect(),
                half_width: d,
            })
        }
    }
}

/// `k = round(theta sqrt(n))`, at least 2.
pub fn window_size(theta: f64, n: usize) -> Result<usize> {
    if !(theta > 0.0 && theta.is_finite()) || n == 0 {
        return Err(Error::input("window size needs theta > 0 and n >= 1"));
    }
    Ok(((theta * (n as f64).sqrt()).round() as usize).max(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Component::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn assert_constants(c: &Constants, e: &Constants, tol: f64) {
        assert!(close(c.psi1, e.psi1, tol), "psi1 {} vs {}", c.psi1, e.psi1);
        assert!(close(c.psi2, e.psi2, tol), "psi2 {} vs {}", c.psi2, e.psi2);
        assert!(close(c.phi22, e.phi22, tol), "phi22 {} vs {}", c.phi22, e.phi22);
        assert!(close(c.phi12, e.phi12, tol), "phi12 {} vs {}", c.phi12, e.phi12);
        assert!(close(c.phi11, e.phi11, tol), "phi11 {} vs {}", c.phi11, e.phi11);
    }

    #[test]
    fn tent_values() {
        let t = WeightSpec::tent();
        assert_eq!(t.g(0.5), 0.5);
        assert_eq!(t.g(0.0), 0.0);
        assert_eq!(t.g(1.0), 0.0);
        assert_eq!(t.g(1.5), 0.0);
        assert_eq!(t.constants.psi1, 1.0);
        assert!(close(t.constants.psi2, 1.0 / 12.0, 1e-16));
    }

    #[test]
    fn quadrature_agrees_with_closed_forms() {
        for kind in [
            WeightKind::Tent,
            WeightKind::DoubleExp { rate: 1.0 },
            WeightKind::DoubleExp { rate: 5f64.sqrt() },
            WeightKind::DoubleExp { rate: 0.4 },
        ] {
            let q = constants_quadrature(&kind).unwrap();
            let c = kind.constants_closed_form().unwrap();
            assert_constants(&q.value, &c, 1e-8);
            for e in [q.error.psi1, q.error.psi2, q.error.phi22, q.error.phi12, q.error.phi11] {
                assert!(e <= 1e-8, "{kind}: error estimate {e}");
            }
        }
    }

    #[test]
    fn double_exp_unit_rate_constants() {
        let c = WeightSpec::double_exponential(1.0).unwrap().constants;
        assert_constants(
            &c,
            &Constants {
                psi1: 1.0,
                psi2: 1.0,
                phi22: 1.25,
                phi12: 0.25,
                phi11: 0.25,
            },
            1e-15,
        );
    }

    #[test]
    fn phi_closed_forms_match_quadrature() {
        for kind in [WeightKind::Tent, WeightKind::DoubleExp { rate: 1.3 }] {
            let spec = WeightSpec::new(kind.clone()).unwrap();
            for &y in &[-1.2, -0.7, -0.3, 0.0, 0.2, 0.5, 0.8, 1.0, 2.5] {
                for (u, v) in [(G, G), (G, DG), (DG, G), (DG, DG)] {
                    let a = spec.phi(u, v, y).unwrap();
                    let b = phi_quadrature(&kind, u, v, y).unwrap();
                    assert!(close(a, b, 1e-10), "{kind} {u:?}{v:?} y={y}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn kernel_correspondence() {
        let spec = WeightSpec::double_exponential(1.0).unwrap();
        for &y in &[0.0, 0.5, 1.0, 2.0, 5.0] {
            let q = phi_quadrature(&spec.kind, G, G, y).unwrap();
            assert!(close(q, (1.0 + y) * (-y).exp(), 1e-10));
        }
    }

    #[test]
    fn phi_identities() {
        let pwl = WeightSpec::parse("pwl:0/0,0.3/1,1/0").unwrap();
        for spec in [WeightSpec::tent(), WeightSpec::double_exponential(2.0).unwrap(), pwl] {
            assert!(close(spec.phi(G, G, 0.0).unwrap(), spec.constants.psi2, 1e-10));
            assert!(spec.phi(DG, G, 0.0).unwrap().abs() < 1e-10);
            assert!(spec.phi(G, DG, 0.0).unwrap().abs() < 1e-10);
            // phi_g'g' = -phi_gg'' at smooth points
            let h = 1e-3;
            for &y in &[0.13, 0.71, 0.37] {
                let f = |y| phi_quadrature(&spec.kind, G, G, y).unwrap();
                let d2 = (f(y + h) - 2.0 * f(y) + f(y - h)) / (h * h);
                let target = phi_quadrature(&spec.kind, DG, DG, y).unwrap();
                assert!(close(-d2, target, 1e-4), "{}: y={y} {} vs {}", spec.name(), -d2, target);
            }
        }
    }

    #[test]
    fn piecewise_linear_matching_tent_has_tent_constants() {
        let spec = WeightSpec::parse("pwl:0/0,0.5/0.5,1/0").unwrap();
        assert_constants(
            &spec.constants,
            &WeightKind::Tent.constants_closed_form().unwrap(),
            1e-8,
        );
    }

    #[test]
    fn parse_names() {
        assert_eq!(WeightKind::parse("tent").unwrap(), WeightKind::Tent);
        assert_eq!(
            WeightKind::parse("doubleexp").unwrap(),
            WeightKind::DoubleExp { rate: 1.0 }
        );
        assert_eq!(
            WeightKind::parse("doubleexp:sqrt5").unwrap(),
            WeightKind::DoubleExp { rate: 5f64.sqrt() }
        );
        assert!(WeightKind::parse("doubleexp:-1").is_err());
        assert!(WeightKind::parse("box").is_err());
        assert!(WeightKind::parse("pwl:0/0,1/1").is_err());
        let k = WeightKind::parse("doubleexp:2.5").unwrap();
        assert_eq!(WeightKind::parse(&k.to_string()).unwrap(), k);
    }

    #[test]
    fn efficiency_identity_at_oracle_theta() {
        let c = WeightSpec::double_exponential(1.0).unwrap().constants;
        let t = 1.0;
        let v = 4.0 * (c.phi22 * t + 2.0 * c.phi12 / t + c.phi11 / t.powi(3)) / (c.psi2 * c.psi2);
        assert!(close(v, 8.0, 1e-12));
    }

    #[test]
    fn strict_gap_for_shipped_weights() {
        for name in ["tent", "doubleexp", "doubleexp:sqrt5", "pwl:0/0,0.3/1,1/0"] {
            let spec = WeightSpec::parse(name).unwrap();
            assert!(spec.jump_variance_gap() > 1e-6, "{name}");
        }
    }

    #[test]
    fn discretize_examples() {
        let d = discretize(&WeightSpec::tent(), 2, 1e-12).unwrap();
        assert_eq!(d.samples, vec![0.5]);
        assert_eq!(d.at(0), 0.0);
        assert_eq!(d.at(2), 0.0);

        let spec = WeightSpec::double_exponential(1.0).unwrap();
        let d = discretize(&spec, 10, 1e-12).unwrap();
        assert_eq!(d.half_width, 277);
        assert!(spec.g(278.0 / 10.0) < 1e-12);
        for p in 0..=277 {
            assert_eq!(d.at(p), d.at(-p));
        }
        assert!(d.at(277) < 1e-12 && d.at(276) >= 1e-12);
        assert!(discretize(&spec, 1, 1e-12).is_err());
    }

    #[test]
    fn window_size_examples() {
        assert_eq!(window_size(1.0, 10_000).unwrap(), 100);
        assert_eq!(window_size(0.5, 10_000).unwrap(), 50);
        assert_eq!(window_size(0.01, 10).unwrap(), 2);
        assert!(window_size(0.0, 10).is_err());
    }
}
