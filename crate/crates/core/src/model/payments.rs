//! Contractual cash flows: sojourn payments `B_g` (a rate plus lumps) and
//! transition payments `b_gh`. Rates are piecewise constant in time, which
//! covers every contract in this crate and lets the simulator discount
//! each sojourn segment in closed form.

use serde::{Deserialize, Serialize};

use super::discount::Discount;
use super::state::{State, StateLabel};

/// `amount` per year while in `state`, on `[from, until)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SojournRate {
    pub state: StateLabel,
    pub amount: f64,
    #[serde(default)]
    pub from: Option<f64>,
    #[serde(default)]
    pub until: Option<f64>,
}

/// A point of increase of `B_g`: `amount` paid at `time` if in `state` then.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SojournLump {
    pub time: f64,
    pub state: StateLabel,
    pub amount: f64,
}

/// `amount` paid on a jump `from -> to` occurring in `[from_time, until_time)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionPayment {
    pub from: StateLabel,
    pub to: StateLabel,
    pub amount: f64,
    #[serde(default)]
    pub from_time: Option<f64>,
    #[serde(default)]
    pub until_time: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PaymentSpec {
    #[serde(default)]
    pub sojourn: Vec<SojournRate>,
    #[serde(default)]
    pub lumps: Vec<SojournLump>,
    #[serde(default)]
    pub transitions: Vec<TransitionPayment>,
}

fn window(from: Option<f64>, until: Option<f64>) -> (f64, f64) {
    (from.unwrap_or(f64::NEG_INFINITY), until.unwrap_or(f64::INFINITY))
}

impl SojournRate {
    fn window(&self) -> (f64, f64) {
        window(self.from, self.until)
    }
}

impl TransitionPayment {
    fn window(&self) -> (f64, f64) {
        window(self.from_time, self.until_time)
    }
}

impl PaymentSpec {
    pub fn none() -> Self {
        Self::default()
    }

    /// Continuous annuity of `amount` per year in `state` up to `until`.
    pub fn annuity(state: StateLabel, amount: f64, until: Option<f64>) -> Self {
        PaymentSpec { sojourn: vec![SojournRate { state, amount, from: None, until }], ..Self::default() }
    }

    pub fn with_transition(mut self, from: StateLabel, to: StateLabel, amount: f64) -> Self {
        self.transitions.push(TransitionPayment { from, to, amount, from_time: None, until_time: None });
        self
    }

    pub fn with_lump(mut self, time: f64, state: StateLabel, amount: f64) -> Self {
        self.lumps.push(SojournLump { time, state, amount });
        self
    }

    pub fn is_zero(&self) -> bool {
        self.sojourn.iter().all(|p| p.amount == 0.0)
            && self.lumps.iter().all(|p| p.amount == 0.0)
            && self.transitions.iter().all(|p| p.amount == 0.0)
    }

    /// `dB_g/dt` at `t`, right-continuous.
    pub fn sojourn_rate(&self, t: f64, g: &State) -> f64 {
        let label = g.label();
        self.sojourn
            .iter()
            .filter(|p| p.state == label)
            .filter(|p| {
                let (a, b) = p.window();
                a <= t && t < b
            })
            .map(|p| p.amount)
            .sum()
    }

    /// Left limit `dB_g/dt (t-)`; this is what the backward recursion uses at
    /// grid point `t_n`, i.e. the rate in force on `(t_{n-1}, t_n]`.
    pub fn sojourn_rate_left(&self, t: f64, g: &State) -> f64 {
        let label = g.label();
        self.sojourn
            .iter()
            .filter(|p| p.state == label)
            .filter(|p| {
                let (a, b) = p.window();
                a < t && t <= b
            })
            .map(|p| p.amount)
            .sum()
    }

    /// `b_gh(t)`; zero when `g == h`.
    pub fn transition(&self, t: f64, g: &State, h: &State) -> f64 {
        if g == h {
            return 0.0;
        }
        let (lg, lh) = (g.label(), h.label());
        self.transitions
            .iter()
            .filter(|p| p.from == lg && p.to == lh)
            .filter(|p| {
                let (a, b) = p.window();
                a <= t && t < b
            })
            .map(|p| p.amount)
            .sum()
    }

    /// Left limit of `b_gh` at `t`, used alongside
    /// [`sojourn_rate_left`](Self::sojourn_rate_left).
    pub fn transition_left(&self, t: f64, g: &State, h: &State) -> f64 {
        if g == h {
            return 0.0;
        }
        let (lg, lh) = (g.label(), h.label());
        self.transitions
            .iter()
            .filter(|p| p.from == lg && p.to == lh)
            .filter(|p| {
                let (a, b) = p.window();
                a < t && t <= b
            })
            .map(|p| p.amount)
            .sum()
    }

    /// Lumps for `label` with time in `[a, b)`.
    pub fn lumps_in(&self, label: StateLabel, a: f64, b: f64) -> impl Iterator<Item = &SojournLump> {
        self.lumps.iter().filter(move |l| l.state == label && a <= l.time && l.time < b)
    }

    /// Present value at `t` of the sojourn stream of `g` over `[a, b)`,
    /// rate part and lumps.
    pub fn sojourn_pv(&self, g: &State, a: f64, b: f64, t: f64, discount: &Discount) -> f64 {
        let label = g.label();
        let rate: f64 = self
            .sojourn
            .iter()
            .filter(|p| p.state == label && p.amount != 0.0)
            .map(|p| {
                let (lo, hi) = p.window();
                p.amount * discount.annuity(t, a.max(lo), b.min(hi))
            })
            .sum();
        let lumps: f64 = self.lumps_in(label, a, b).map(|l| l.amount * discount.factor(t, l.time)).sum();
        rate + lumps
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        for p in &self.sojourn {
            let (a, b) = p.window();
            if !p.amount.is_finite() {
                out.push(format!("sojourn rate for {:?} is not finite", p.state));
            }
            if a.is_nan() || b.is_nan() || a >= b {
                out.push(format!("sojourn rate for {:?} has an empty window", p.state));
            }
        }
        for l in &self.lumps {
            if !l.amount.is_finite() || !l.time.is_finite() {
                out.push(format!("lump for {:?} is not finite", l.state));
            }
        }
        for p in &self.transitions {
            let (a, b) = p.window();
            if !p.amount.is_finite() {
                out.push(format!("transition payment {:?} -> {:?} is not finite", p.from, p.to));
            }
            if a.is_nan() || b.is_nan() || a >= b {
                out.push(format!("transition payment {:?} -> {:?} has an empty window", p.from, p.to));
            }
        }
        out
    }
}
