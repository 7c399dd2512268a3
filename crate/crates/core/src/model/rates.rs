//! Deterministic intensity curves `t -> rate`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// A shareable, immutable function of time.
#[derive(Clone)]
pub struct RateFn(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl RateFn {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        RateFn(Arc::new(f))
    }

    pub fn constant(value: f64) -> Self {
        RateFn::new(move |_| value)
    }

    pub fn zero() -> Self {
        RateFn::constant(0.0)
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        (self.0)(t)
    }

    /// `c · self(t)`
    pub fn scaled(&self, c: f64) -> Self {
        let inner = self.clone();
        RateFn::new(move |t| c * inner.eval(t))
    }
}

impl fmt::Debug for RateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("RateFn(..)")
    }
}

impl<F: Fn(f64) -> f64 + Send + Sync + 'static> From<F> for RateFn {
    fn from(f: F) -> Self {
        RateFn::new(f)
    }
}

/// Gompertz–Makeham intensity `a + 10^(b t + c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GompertzMakeham {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl GompertzMakeham {
    pub fn rate(&self, t: f64) -> f64 {
        self.a + 10f64.powf(self.b * t + self.c)
    }
}

/// Serialisable description of a rate curve, as found in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSpec {
    Constant(f64),
    GompertzMakeham(GompertzMakeham),
    /// `intercept + slope · t`
    Linear {
        intercept: f64,
        slope: f64,
    },
    /// Piecewise-linear through `(t, rate)` knots, flat outside.
    Table(Vec<(f64, f64)>),
}

impl RateSpec {
    pub fn build(&self) -> RateFn {
        match self.clone() {
            RateSpec::Constant(v) => RateFn::constant(v),
            RateSpec::GompertzMakeham(gm) => RateFn::new(move |t| gm.rate(t)),
            RateSpec::Linear { intercept, slope } => RateFn::new(move |t| intercept + slope * t),
            RateSpec::Table(knots) => {
                let knots: Arc<[(f64, f64)]> = knots.into();
                RateFn::new(move |t| interpolate(&knots, t))
            }
        }
    }

    /// Structural problems (not sign problems, which depend on the horizon).
    pub fn problems(&self) -> Vec<String> {
        match self {
            RateSpec::Table(knots) if knots.is_empty() => vec!["rate table is empty".into()],
            RateSpec::Table(knots) => {
                let mut out = Vec::new();
                if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                    out.push("rate table times must be strictly increasing".into());
                }
                if knots.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
                    out.push("rate table entries must be finite".into());
                }
                out
            }
            RateSpec::Constant(v) if !v.is_finite() => vec!["constant rate must be finite".into()],
            _ => Vec::new(),
        }
    }
}

fn interpolate(knots: &[(f64, f64)], t: f64) -> f64 {
    let i = knots.partition_point(|&(x, _)| x <= t);
    if i == 0 {
        return knots[0].1;
    }
    if i == knots.len() {
        return knots[i - 1].1;
    }
    let (x0, y0) = knots[i - 1];
    let (x1, y1) = knots[i];
    y0 + (y1 - y0) * (t - x0) / (x1 - x0)
}
