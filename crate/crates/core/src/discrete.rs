//! Finite-state reserves and transition probabilities.
//!
//! On a finite state space the kernel reduces to the matrix of transition
//! intensities `μ_ij(t)`, and the reserve equation to the classical Thiele
//! system
//!
//! ```text
//! dV_i = (λ_i + r) V_i dt - dB_i - Σ_{j≠i} (b_ij + V_j) μ_ij dt
//! ```
//!
//! [`solve_reserves_discrete`] integrates it backwards with the explicit
//! Euler recursion used throughout the crate. [`reserve_via_probabilities`]
//! computes the same reserves from forward Kolmogorov transition
//! probabilities instead; it exists to cross-check the recursion.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{Atom, Discount, Horizon, IntensityKernel, PaymentSpec, RateFn, State, TimeGrid};

pub type IntensityFn = Arc<dyn Fn(f64, usize, usize) -> f64 + Send + Sync>;

/// A finite chain `0..n_states` with intensities `mu(t, i, j)`, `i != j`.
#[derive(Clone)]
pub struct DiscreteModel {
    pub n_states: usize,
    pub mu: IntensityFn,
    pub payments: PaymentSpec,
    pub discount: Discount,
    pub horizon: Horizon,
}

impl std::fmt::Debug for DiscreteModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscreteModel")
            .field("n_states", &self.n_states)
            .field("payments", &self.payments)
            .field("discount", &self.discount)
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

impl DiscreteModel {
    pub fn new(
        n_states: usize,
        mu: impl Fn(f64, usize, usize) -> f64 + Send + Sync + 'static,
        payments: PaymentSpec,
        discount: Discount,
    ) -> Self {
        DiscreteModel {
            n_states,
            mu: Arc::new(mu),
            payments,
            discount,
            horizon: Horizon::new(f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Builds `mu` from a sparse list of `(from, to, rate)` curves.
    pub fn from_rates(
        n_states: usize,
        rates: Vec<(usize, usize, RateFn)>,
        payments: PaymentSpec,
        discount: Discount,
    ) -> Self {
        let mut table: Vec<Vec<Option<RateFn>>> = vec![vec![None; n_states]; n_states];
        for (i, j, f) in rates {
            table[i][j] = Some(match table[i][j].take() {
                Some(prev) => RateFn::new(move |t| prev.eval(t) + f.eval(t)),
                None => f,
            });
        }
        Self::new(n_states, move |t, i, j| table[i][j].as_ref().map_or(0.0, |f| f.eval(t)), payments, discount)
    }

    pub fn with_horizon(mut self, start: f64, end: f64) -> Self {
        self.horizon = Horizon::new(start, end);
        self
    }

    /// `λ_i(t) = Σ_{j≠i} μ_ij(t)`
    pub fn exit_rate(&self, t: f64, i: usize) -> f64 {
        (0..self.n_states).filter(|&j| j != i).map(|j| (self.mu)(t, i, j)).sum()
    }

    /// Largest `λ_i(t) + |r(t)|` over the grid points.
    pub fn max_rate(&self, grid: &TimeGrid) -> f64 {
        grid.times()
            .into_iter()
            .flat_map(|t| (0..self.n_states).map(move |i| (t, i)))
            .map(|(t, i)| self.exit_rate(t, i) + self.discount.rate(t).abs())
            .fold(0.0, f64::max)
    }

    fn states(&self) -> Vec<State> {
        (0..self.n_states).map(State::Discrete).collect()
    }
}

/// Agreement bound for two first-order methods on the same instance:
/// `2 · dt · horizon · max_rate`.
pub fn two_method_tolerance(dt: f64, horizon: f64, max_rate: f64) -> f64 {
    2.0 * dt * horizon * max_rate
}

impl IntensityKernel for DiscreteModel {
    fn horizon(&self) -> Horizon {
        self.horizon
    }

    fn atoms(&self, t: f64, x: &State) -> Vec<Atom> {
        let State::Discrete(i) = *x else {
            return Vec::new();
        };
        (0..self.n_states)
            .filter(|&j| j != i)
            .map(|j| Atom::new(State::Discrete(j), (self.mu)(t, i, j)))
            .filter(|a| a.rate != 0.0)
            .collect()
    }

    fn description(&self) -> String {
        format!("finite chain with {} states", self.n_states)
    }

    fn hazard_basis(&self) -> Vec<RateFn> {
        (0..self.n_states)
            .map(|i| {
                let m = self.clone();
                RateFn::new(move |t| m.exit_rate(t, i))
            })
            .collect()
    }

    fn hazard_weights(&self, x: &State) -> Option<Vec<(usize, f64)>> {
        match *x {
            State::Discrete(i) if i < self.n_states => Some(vec![(i, 1.0)]),
            _ => None,
        }
    }
}

/// Reserves `V_g(t_n)` on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReserveTable {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    /// `values[i][n] = V_{states[i]}(times[n])`
    pub values: Vec<Vec<f64>>,
}

impl ReserveTable {
    pub fn state_index(&self, state: &State) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }

    pub fn value(&self, i: usize, n: usize) -> f64 {
        self.values[i][n]
    }

    /// Reserve of `states[i]` at the first grid time.
    pub fn initial(&self, i: usize) -> f64 {
        self.values[i][0]
    }

    /// Looks up `V_state(t)` at a grid time.
    pub fn lookup(&self, state: &State, t: f64) -> Option<f64> {
        let i = self.state_index(state)?;
        let n = self.times.iter().position(|&x| (x - t).abs() <= 1e-9 * t.abs().max(1.0))?;
        Some(self.values[i][n])
    }

    /// CSV with columns `time,state,value`, rows in backward-solve order
    /// (latest time first).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "state", "value"])?;
        for n in (0..self.times.len()).rev() {
            for (i, s) in self.states.iter().enumerate() {
                w.write_record([fmt_f64(self.times[n]), s.to_string(), fmt_f64(self.values[i][n])])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip representation, always with a decimal point or exponent.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Grid index of each lump, keyed by state, per node.
fn lumps_on_grid(model: &DiscreteModel, grid: &TimeGrid) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; model.n_states]; grid.steps + 1];
    for lump in &model.payments.lumps {
        if let (Some(n), crate::model::StateLabel::Discrete(i)) = (grid.node_at_or_after(lump.time), lump.state) {
            if i < model.n_states {
                out[n][i] += lump.amount;
            }
        }
    }
    out
}

/// Backward Euler recursion from `grid.end` (where `V = boundary`) to
/// `grid.start`. Lumps are paid at the first grid point at or after their
/// time and are included in the reserve at that point.
pub fn solve_reserves_discrete(model: &DiscreteModel, boundary: &[f64], grid: &TimeGrid) -> Result<ReserveTable> {
    let n_states = model.n_states;
    if boundary.len() != n_states {
        return Err(Error::Invalid(format!("boundary has {} entries for {} states", boundary.len(), n_states)));
    }
    let dt = grid.dt();
    let states = model.states();
    let lumps = lumps_on_grid(model, grid);
    let mut values = vec![vec![0.0; grid.steps + 1]; n_states];
    for i in 0..n_states {
        values[i][grid.steps] = boundary[i] + lumps[grid.steps][i];
    }

    let mut mu = vec![0.0; n_states * n_states];
    for n in (1..=grid.steps).rev() {
        let t = grid.time(n);
        let r = model.discount.rate(t);
        for i in 0..n_states {
            for j in 0..n_states {
                mu[i * n_states + j] = if i == j { 0.0 } else { (model.mu)(t, i, j) };
            }
        }
        for i in 0..n_states {
            let v_i = values[i][n];
            let mut exit = 0.0;
            let mut inflow = 0.0;
            for j in (0..n_states).filter(|&j| j != i) {
                let m = mu[i * n_states + j];
                if m == 0.0 {
                    continue;
                }
                exit += m;
                inflow += (model.payments.transition_left(t, &states[i], &states[j]) + values[j][n]) * m;
            }
            let drift = (exit + r) * v_i - model.payments.sojourn_rate_left(t, &states[i]) - inflow;
            let next = v_i - dt * drift + lumps[n - 1][i];
            if !next.is_finite() {
                return Err(Error::NonFinite { t, state: states[i].to_string() });
            }
            values[i][n - 1] = next;
        }
    }

    Ok(ReserveTable { times: grid.times(), states, values })
}

/// `P_{t_0, t_n}(i, {j})` for `n = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrixPath {
    pub times: Vec<f64>,
    n_states: usize,
    data: Vec<f64>,
}

impl TransitionMatrixPath {
    /// Allowed excursion outside `[0, 1]` before clamping.
    pub const RANGE_TOLERANCE: f64 = 1e-9;
    pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn prob(&self, n: usize, i: usize, j: usize) -> f64 {
        self.data[(n * self.n_states + i) * self.n_states + j]
    }

    pub fn row(&self, n: usize, i: usize) -> &[f64] {
        let start = (n * self.n_states + i) * self.n_states;
        &self.data[start..start + self.n_states]
    }

    /// Law of `X_{t_n}` given `X_{t_0} = x0`, for each `n`.
    pub fn distribution_from(&self, x0: usize) -> Vec<Vec<f64>> {
        (0..self.times.len()).map(|n| self.row(n, x0).to_vec()).collect()
    }
}

/// Forward Kolmogorov equation `∂_s P = P Q(s)` by explicit Euler from the
/// identity at `grid.start`.
pub fn solve_kolmogorov_forward(model: &DiscreteModel, grid: &TimeGrid) -> Result<TransitionMatrixPath> {
    let k = model.n_states;
    let dt = grid.dt();
    let mut data = vec![0.0; (grid.steps + 1) * k * k];
    for i in 0..k {
        data[i * k + i] = 1.0;
    }
    let mut q = vec![0.0; k * k];
    for n in 0..grid.steps {
        let t = grid.time(n);
        for i in 0..k {
            let mut exit = 0.0;
            for j in (0..k).filter(|&j| j != i) {
                let m = (model.mu)(t, i, j);
                if !m.is_finite() {
                    return Err(Error::NonFinite { t, state: State::Discrete(i).to_string() });
                }
                q[i * k + j] = m;
                exit += m;
            }
            q[i * k + i] = -exit;
        }
        let (head, tail) = data.split_at_mut((n + 1) * k * k);
        let cur = &head[n * k * k..];
        let next = &mut tail[..k * k];
        for i in 0..k {
            for j in 0..k {
                let flow: f64 = (0..k).map(|l| cur[i * k + l] * q[l * k + j]).sum();
                let p = cur[i * k + j] + dt * flow;
                if !(-TransitionMatrixPath::RANGE_TOLERANCE..=1.0 + TransitionMatrixPath::RANGE_TOLERANCE).contains(&p)
                {
                    return Err(Error::ProbabilityOutOfRange { t: grid.time(n + 1), value: p });
                }
                next[i * k + j] = p.clamp(0.0, 1.0);
            }
            let sum: f64 = next[i * k..(i + 1) * k].iter().sum();
            if (sum - 1.0).abs() > TransitionMatrixPath::ROW_SUM_TOLERANCE {
                return Err(Error::ProbabilityOutOfRange { t: grid.time(n + 1), value: sum });
            }
        }
    }
    Ok(TransitionMatrixPath { times: grid.times(), n_states: k, data })
}

/// Reserves as expected discounted cash flows,
/// `V_i(t_m) = Σ_n Σ_h P_{t_m,t_n}(i,h) v(t_m,t_n) c_h(t_n) dt + terminal + lumps`,
/// with `c_h = dB_h/dt + Σ_k μ_hk b_hk` and left-point quadrature.
///
/// Costs one forward solve per grid point; meant as an oracle on small grids.
#[allow(clippy::needless_range_loop)]
pub fn reserve_via_probabilities(model: &DiscreteModel, boundary: &[f64], grid: &TimeGrid) -> Result<ReserveTable> {
    let k = model.n_states;
    if boundary.len() != k {
        return Err(Error::Invalid(format!("boundary has {} entries for {} states", boundary.len(), k)));
    }
    let dt = grid.dt();
    let states = model.states();
    let lumps = lumps_on_grid(model, grid);
    let cash_rate: Vec<Vec<f64>> = (0..grid.steps)
        .map(|n| {
            let t = grid.time(n);
            (0..k)
                .map(|h| {
                    let transitions: f64 = (0..k)
                        .filter(|&j| j != h)
                        .map(|j| (model.mu)(t, h, j) * model.payments.transition(t, &states[h], &states[j]))
                        .sum();
                    model.payments.sojourn_rate(t, &states[h]) + transitions
                })
                .collect()
        })
        .collect();

    let mut values = vec![vec![0.0; grid.steps + 1]; k];
    for m in 0..=grid.steps {
        let t_m = grid.time(m);
        let tail = if m == grid.steps {
            None
        } else {
            Some(solve_kolmogorov_forward(model, &TimeGrid::with_steps(t_m, grid.end, grid.steps - m))?)
        };
        let prob = |rel: usize, i: usize, h: usize| match &tail {
            Some(p) => p.prob(rel, i, h),
            None => f64::from(i == h),
        };
        for i in 0..k {
            let mut v = 0.0;
            for n in m..=grid.steps {
                let rel = n - m;
                let disc = model.discount.factor(t_m, grid.time(n));
                for h in 0..k {
                    let p = prob(rel, i, h);
                    if p == 0.0 {
                        continue;
                    }
                    let mut cash = lumps[n][h];
                    if n < grid.steps {
                        cash += cash_rate[n][h] * dt;
                    } else {
                        cash += boundary[h];
                    }
                    v += p * disc * cash;
                }
            }
            values[i][m] = v;
        }
    }
    Ok(ReserveTable { times: grid.times(), states, values })
}
