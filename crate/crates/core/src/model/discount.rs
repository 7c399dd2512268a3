//! Deterministic discounting `v(t, s) = exp(-∫_t^s r(u) du)` with a
//! piecewise-constant short rate. Every quantity the solvers and the
//! simulator need (discount factors, discounted annuity segments) has a
//! closed form on each piece.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct Discount {
    // piece i holds rates[i] on [starts[i], starts[i+1]); the first piece
    // extends to -inf and the last to +inf
    starts: Vec<f64>,
    rates: Vec<f64>,
    // ∫_{starts[0]}^{starts[i]} r
    cum: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscountSpec {
    Constant(f64),
    /// Step curve: `(t_i, r_i)` means rate `r_i` from `t_i` until the next knot.
    Table(Vec<(f64, f64)>),
}

impl DiscountSpec {
    pub fn build(&self) -> Result<Discount, String> {
        match self {
            DiscountSpec::Constant(r) => {
                if r.is_finite() {
                    Ok(Discount::constant(*r))
                } else {
                    Err("interest rate must be finite".into())
                }
            }
            DiscountSpec::Table(knots) => Discount::step(knots),
        }
    }
}

impl Discount {
    pub fn constant(r: f64) -> Self {
        Discount { starts: vec![0.0], rates: vec![r], cum: vec![0.0] }
    }

    pub fn step(knots: &[(f64, f64)]) -> Result<Self, String> {
        if knots.is_empty() {
            return Err("interest table is empty".into());
        }
        if knots.iter().any(|(t, r)| !t.is_finite() || !r.is_finite()) {
            return Err("interest table entries must be finite".into());
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err("interest table times must be strictly increasing".into());
        }
        let starts: Vec<f64> = knots.iter().map(|k| k.0).collect();
        let rates: Vec<f64> = knots.iter().map(|k| k.1).collect();
        let mut cum = vec![0.0; starts.len()];
        for i in 1..starts.len() {
            cum[i] = cum[i - 1] + rates[i - 1] * (starts[i] - starts[i - 1]);
        }
        Ok(Discount { starts, rates, cum })
    }

    pub fn is_constant(&self) -> bool {
        self.rates.len() == 1
    }

    fn piece(&self, t: f64) -> usize {
        self.starts.partition_point(|&s| s <= t).saturating_sub(1)
    }

    /// Short rate `r(t)`.
    pub fn rate(&self, t: f64) -> f64 {
        self.rates[self.piece(t)]
    }

    /// `∫_{origin}^t r(u) du`
    fn cumulative(&self, t: f64) -> f64 {
        let i = self.piece(t);
        self.cum[i] + self.rates[i] * (t - self.starts[i])
    }

    /// `v(t, s)`
    pub fn factor(&self, t: f64, s: f64) -> f64 {
        if self.is_constant() {
            return (-self.rates[0] * (s - t)).exp();
        }
        (-(self.cumulative(s) - self.cumulative(t))).exp()
    }

    /// `∫_a^b v(t, u) du`, zero when `b <= a`.
    pub fn annuity(&self, t: f64, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        if self.is_constant() {
            return self.factor(t, a) * segment(self.rates[0], b - a);
        }
        let mut total = 0.0;
        let mut lo = a;
        let mut i = self.piece(a);
        while lo < b {
            let hi = self.starts.get(i + 1).map_or(b, |&next| next.min(b));
            total += self.factor(t, lo) * segment(self.rates[i], hi - lo);
            lo = hi;
            i += 1;
        }
        total
    }
}

/// `∫_0^len e^{-r u} du`
fn segment(r: f64, len: f64) -> f64 {
    if r == 0.0 {
        len
    } else {
        -(-r * len).exp_m1() / r
    }
}
