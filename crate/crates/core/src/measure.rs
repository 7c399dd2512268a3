//! Random-spouse contracts: on the insured's death a spouse may or may not
//! exist, and the age difference is random. The kernel out of `*` therefore
//! has a continuous part `μ*†(t) g(t) φ(dd)` over `{†} × ℝ`, with `φ` given
//! as a finite weighted sample so the reserve integral is an exact sum:
//!
//! ```text
//! ∫ (b + V_h(t)) q_t(*, dh) = μ*†(t) [ g(t) Σ_j w_j V_{(†, d_j)}(t) + (1 - g(t)) · 0 ]
//! ```
//!
//! Death without a spouse is an explicit absorbing atom, so `λ_t(*)` is the
//! full mortality.

use rayon::prelude::*;

use crate::discrete::ReserveTable;
use crate::error::{Error, Result};
use crate::model::{
    Atom, ContinuousFamily, ContinuousPart, Discount, Horizon, IntensityKernel, PaymentSpec, RateFn, State, StateLabel,
    TimeGrid, WeightedSample,
};

#[derive(Debug, Clone)]
pub struct SpouseModel {
    /// Insured mortality by age.
    pub mu_star_dagger: RateFn,
    /// Probability that a spouse exists at the insured's death, by age.
    pub spouse_presence: RateFn,
    /// Law of the age difference `insured age - spouse age`.
    pub phi: std::sync::Arc<WeightedSample>,
    /// Spouse mortality by the spouse's own age.
    pub spouse_mortality: RateFn,
    /// Paid continuously to the surviving spouse.
    pub annuity_rate: f64,
    pub horizon: Horizon,
}

impl SpouseModel {
    /// Row order of the reserve table: `*`, then one state per node, then `†`.
    pub fn states(&self) -> Vec<State> {
        std::iter::once(State::Active)
            .chain(self.phi.nodes().iter().map(|&(d, _)| State::DeadWithSpouse { age_diff: d }))
            .chain(std::iter::once(State::Dead))
            .collect()
    }

    pub fn payments(&self) -> PaymentSpec {
        PaymentSpec::annuity(StateLabel::DeadWithSpouse, self.annuity_rate, Some(self.horizon.end))
    }

    fn node_of(&self, age_diff: f64) -> Option<usize> {
        self.phi.nodes().iter().position(|&(d, _)| d == age_diff)
    }

    fn check_ages(&self, start: f64) -> Result<()> {
        for (node, &(d, _)) in self.phi.nodes().iter().enumerate() {
            let age = start - d;
            if age < 0.0 {
                return Err(Error::NegativeSpouseAge { node, age });
            }
        }
        Ok(())
    }
}

/// Backward solve in two phases: each spouse node as an independent
/// single-life annuity, then the active state against their weighted sum.
pub fn solve_spouse_reserves(model: &SpouseModel, discount: &Discount, grid: &TimeGrid) -> Result<ReserveTable> {
    if !(model.annuity_rate.is_finite()) {
        return Err(Error::Invalid("annuity_rate must be finite".into()));
    }
    model.check_ages(grid.start)?;
    let dt = grid.dt();
    let big_n = grid.steps;
    let states = model.states();

    let node_values: Vec<Vec<f64>> = model
        .phi
        .nodes()
        .par_iter()
        .enumerate()
        .map(|(j, &(d, _))| {
            let mut v = vec![0.0; big_n + 1];
            for n in (1..=big_n).rev() {
                let t = grid.time(n);
                let exit = model.spouse_mortality.eval(t - d) + discount.rate(t);
                let prev = v[n] - dt * (exit * v[n] - model.annuity_rate);
                if !prev.is_finite() {
                    return Err(Error::NonFinite { t, state: states[1 + j].to_string() });
                }
                v[n - 1] = prev;
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;

    let mut active = vec![0.0; big_n + 1];
    for n in (1..=big_n).rev() {
        let t = grid.time(n);
        let g = model.spouse_presence.eval(t);
        if !(0.0..=1.0).contains(&g) {
            return Err(Error::Invalid(format!("spouse presence probability {g} at t = {t} is outside [0, 1]")));
        }
        let mu = model.mu_star_dagger.eval(t);
        let expected: f64 = model.phi.nodes().iter().zip(&node_values).map(|(&(_, w), v)| w * v[n]).sum();
        let prev = active[n] - dt * ((mu + discount.rate(t)) * active[n] - mu * g * expected);
        if !prev.is_finite() {
            return Err(Error::NonFinite { t, state: State::Active.to_string() });
        }
        active[n - 1] = prev;
    }

    let mut values = Vec::with_capacity(states.len());
    values.push(active);
    values.extend(node_values);
    values.push(vec![0.0; big_n + 1]);
    Ok(ReserveTable { times: grid.times(), states, values })
}

impl IntensityKernel for SpouseModel {
    fn horizon(&self) -> Horizon {
        self.horizon
    }

    fn atoms(&self, t: f64, x: &State) -> Vec<Atom> {
        match *x {
            State::Active => {
                let g = self.spouse_presence.eval(t);
                vec![Atom::new(State::Dead, self.mu_star_dagger.eval(t) * (1.0 - g))]
            }
            State::DeadWithSpouse { age_diff } => {
                vec![Atom::new(State::Dead, self.spouse_mortality.eval(t - age_diff))]
            }
            _ => Vec::new(),
        }
    }

    fn continuous_part(&self, t: f64, x: &State) -> Option<ContinuousPart> {
        match x {
            State::Active => Some(ContinuousPart {
                family: ContinuousFamily::DeadWithSpouse,
                law: self.phi.clone(),
                total_mass: self.mu_star_dagger.eval(t) * self.spouse_presence.eval(t),
            }),
            _ => None,
        }
    }

    fn description(&self) -> String {
        format!("random spouse with {} age-difference nodes", self.phi.len())
    }

    fn hazard_basis(&self) -> Vec<RateFn> {
        std::iter::once(self.mu_star_dagger.clone())
            .chain(self.phi.nodes().iter().map(|&(d, _)| {
                let m = self.spouse_mortality.clone();
                RateFn::new(move |t| m.eval(t - d))
            }))
            .collect()
    }

    fn hazard_weights(&self, x: &State) -> Option<Vec<(usize, f64)>> {
        match *x {
            State::Active => Some(vec![(0, 1.0)]),
            State::DeadWithSpouse { age_diff } => self.node_of(age_diff).map(|j| vec![(1 + j, 1.0)]),
            _ => Some(Vec::new()),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::total_rate;

    fn model(nodes: Vec<(f64, f64)>, g: f64) -> SpouseModel {
        SpouseModel {
            mu_star_dagger: RateFn::new(|t| 0.0005 + 10f64.powf(0.04 * t - 4.5)),
            spouse_presence: RateFn::constant(g),
            phi: Arc::new(WeightedSample::new(nodes).unwrap()),
            spouse_mortality: RateFn::new(|age| 0.0003 + 10f64.powf(0.042 * age - 4.6)),
            annuity_rate: 1.0,
            horizon: Horizon::new(40.0, 90.0),
        }
    }

    fn grid() -> TimeGrid {
        TimeGrid::new(40.0, 90.0, 0.05).unwrap()
    }

    #[test]
    fn no_spouse_no_reserve() {
        let t = solve_spouse_reserves(&model(vec![(2.0, 1.0)], 0.0), &Discount::constant(0.02), &grid()).unwrap();
        assert!(t.values[0].iter().all(|&v| v == 0.0));
        assert!(t.values[1][0] > 0.0);
        assert!(t.values[2].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_mortality_leaves_active() {
        let m = model(vec![(-3.0, 0.5), (4.0, 0.5)], 0.7);
        let lambda = total_rate(&m, 60.0, &State::Active).unwrap();
        assert!((lambda - m.mu_star_dagger.eval(60.0)).abs() < 1e-15);
    }

    #[test]
    fn constant_rate_annuity_layer() {
        let mut m = model(vec![(0.0, 1.0)], 1.0);
        m.spouse_mortality = RateFn::constant(0.02);
        let dt = 0.001;
        let g = TimeGrid::new(40.0, 60.0, dt).unwrap();
        let t = solve_spouse_reserves(&m, &Discount::constant(0.03), &g).unwrap();
        // (1 - e^{-(μ+r)(T-t)}) / (μ+r)
        let exact = (1.0 - (-0.05f64 * 20.0).exp()) / 0.05;
        assert!((t.values[1][0] - exact).abs() < 20.0 * dt * 0.05, "{}", t.values[1][0]);
    }

    #[test]
    fn negative_spouse_age_names_node() {
        let err = solve_spouse_reserves(&model(vec![(5.0, 0.5), (45.0, 0.5)], 1.0), &Discount::constant(0.0), &grid());
        match err {
            Err(Error::NegativeSpouseAge { node, age }) => {
                assert_eq!(node, 1);
                assert_eq!(age, -5.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn presence_outside_unit_interval_rejected() {
        let err = solve_spouse_reserves(&model(vec![(0.0, 1.0)], 1.5), &Discount::constant(0.0), &grid());
        assert!(matches!(err, Err(Error::Invalid(_))));
    }

    #[test]
    fn two_nodes_average_single_node_runs() {
        let d = Discount::constant(0.025);
        let mixed = solve_spouse_reserves(&model(vec![(-4.0, 0.5), (6.0, 0.5)], 0.8), &d, &grid()).unwrap();
        let a = solve_spouse_reserves(&model(vec![(-4.0, 1.0)], 0.8), &d, &grid()).unwrap();
        let b = solve_spouse_reserves(&model(vec![(6.0, 1.0)], 0.8), &d, &grid()).unwrap();
        for n in 0..mixed.times.len() {
            let avg = 0.5 * (a.values[0][n] + b.values[0][n]);
            assert!((mixed.values[0][n] - avg).abs() < 1e-12);
        }
    }
}
