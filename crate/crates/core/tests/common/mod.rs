#![allow(dead_code)]

use std::sync::Arc;

use thiele::discrete::DiscreteModel;
use thiele::duration::{RehabRates, Rehabilitation};
use thiele::measure::SpouseModel;
use thiele::model::{Discount, GompertzMakeham, Horizon, PaymentSpec, RateFn, StateLabel, WeightedSample};

/// (1 - e^{-0.5}) / 0.05
pub const ANNUITY_CERTAIN: f64 = 7.869_386_805_747_332;
/// 0.01 / 0.04 · (1 - e^{-0.8})
pub const TERM_INSURANCE: f64 = 0.137_667_758_970_694_6;

pub fn annuity_certain_model() -> DiscreteModel {
    DiscreteModel::new(
        1,
        |_, _, _| 0.0,
        PaymentSpec::annuity(StateLabel::Discrete(0), 1.0, None),
        Discount::constant(0.05),
    )
}

pub fn term_insurance_model() -> DiscreteModel {
    DiscreteModel::from_rates(
        2,
        vec![(0, 1, RateFn::constant(0.01))],
        PaymentSpec::none().with_transition(StateLabel::Discrete(0), StateLabel::Discrete(1), 1.0),
        Discount::constant(0.03),
    )
}

/// The disability model with duration-free rehabilitation written as a
/// chain on `0 = active, 1 = disabled, 2 = dead`.
pub fn disability_as_chain(rates: &RehabRates, annuity: f64, retirement: f64, r: f64) -> DiscreteModel {
    let Rehabilitation::DurationFree(rehab) = &rates.rehabilitation else {
        panic!("only duration-free rehabilitation reduces to a chain");
    };
    DiscreteModel::from_rates(
        3,
        vec![
            (0, 1, rates.mu_star_diamond.clone()),
            (0, 2, rates.mu_star_dagger.clone()),
            (1, 0, rehab.clone()),
            (1, 2, rates.mu_diamond_dagger.clone()),
        ],
        PaymentSpec::annuity(StateLabel::Discrete(1), annuity, Some(retirement)),
        Discount::constant(r),
    )
}

/// The spouse model with a single node `d` as a chain on
/// `0 = alive, 1 = dead with spouse, 2 = dead without`.
pub fn spouse_as_chain(m: &SpouseModel, discount: Discount) -> DiscreteModel {
    assert_eq!(m.phi.len(), 1);
    let d = m.phi.nodes()[0].0;
    let (mu, g, ms) = (m.mu_star_dagger.clone(), m.spouse_presence.clone(), m.spouse_mortality.clone());
    let (mu2, g2) = (mu.clone(), g.clone());
    DiscreteModel::from_rates(
        3,
        vec![
            (0, 1, RateFn::new(move |t| mu.eval(t) * g.eval(t))),
            (0, 2, RateFn::new(move |t| mu2.eval(t) * (1.0 - g2.eval(t)))),
            (1, 2, RateFn::new(move |t| ms.eval(t - d))),
        ],
        PaymentSpec::annuity(StateLabel::Discrete(1), m.annuity_rate, Some(m.horizon.end)),
        discount,
    )
}

pub const SPOUSE_MORTALITY: GompertzMakeham = GompertzMakeham { a: 0.0003, b: 0.042, c: -4.6 };

/// Gompertz–Makeham insured and spouse mortality, a linear presence
/// probability and six age-difference nodes; insured ages 40 to 90.
pub fn spouse_instance() -> SpouseModel {
    let insured = GompertzMakeham { a: 0.0004, b: 0.060, c: -5.46 };
    SpouseModel {
        mu_star_dagger: RateFn::new(move |t| insured.rate(t)),
        spouse_presence: RateFn::new(|t| 0.85 - 0.004 * (t - 40.0)),
        phi: Arc::new(
            WeightedSample::new(vec![(-4.0, 0.1), (-1.0, 0.2), (1.0, 0.25), (3.0, 0.25), (6.0, 0.15), (10.0, 0.05)])
                .unwrap(),
        ),
        spouse_mortality: RateFn::new(|age| SPOUSE_MORTALITY.rate(age)),
        annuity_rate: 1.0,
        horizon: Horizon::new(40.0, 90.0),
    }
}

/// Largest `|a - b|` over two equally long slices.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Two-sided one-sample Kolmogorov–Smirnov statistic of `xs` against a
/// continuous `cdf` on `(-inf, end)`. Samples at or beyond `end` form an
/// atom there (paths that never jump before the horizon), so only the gap
/// just below `end` is checked for them.
pub fn ks_statistic(xs: &mut [f64], cdf: impl Fn(f64) -> f64, end: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let inside = xs.partition_point(|&x| x < end);
    let d = xs[..inside]
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let below_end = if end.is_finite() { cdf(end) } else { 1.0 };
    d.max((below_end - inside as f64 / n).abs())
}

/// Asymptotic 1% critical value of the KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

/// Upper 1% points of χ² for 1 to 6 degrees of freedom.
pub const CHI2_99: [f64; 6] = [6.6349, 9.2103, 11.3449, 13.2767, 15.0863, 16.8119];

/// Pearson statistic for observed against expected counts.
pub fn chi_square(observed: &[f64], expected: &[f64]) -> f64 {
    observed.iter().zip(expected).map(|(o, e)| (o - e) * (o - e) / e).sum()
}
