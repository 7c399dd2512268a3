//! Disability insurance with duration-dependent rehabilitation.
//!
//! The state space is `{*, †} ∪ {◇} × [0, ∞)`: a disabled insured carries the
//! time of disability onset, and the rehabilitation intensity may depend on
//! it. With onsets restricted to the time grid, the reserve of `(◇, t_k)` at
//! `t_n` lives on a lower-triangular array `k <= n`, and the backward
//! recursion for one time step is
//!
//! ```text
//! V◇[k][n-1] = V◇[k][n] - dt [(ρ(t_n, t_k) + μ◇†(t_n) + r) V◇[k][n] - a - ρ(t_n, t_k) V*[n]]   for k <= n-1
//! V*[n-1]    = V*[n]    - dt [(μ*†(t_n) + μ*◇(t_n) + r) V*[n] - μ*◇(t_n) V◇[n][n]]
//! ```
//!
//! where `ρ` is the rehabilitation intensity and `a` the disability annuity.
//! Reserves vanish at retirement.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::discrete::fmt_f64;
use crate::error::{Error, Result};
use crate::model::{
    Atom, Discount, GompertzMakeham, Horizon, IntensityKernel, PaymentSpec, RateFn, State, StateLabel, TimeGrid,
};

/// Columns shorter than this are updated sequentially.
const PARALLEL_MIN_ROWS: usize = 4096;

/// Two-parameter rehabilitation intensity `μ◇*(t, ·)`.
#[derive(Clone)]
pub enum Rehabilitation {
    /// `base(t) · (1 - μ◇†(onset age))`.
    OnsetAdjusted { base: RateFn },
    /// `base(t)`, independent of the disability duration.
    DurationFree(RateFn),
    /// Arbitrary `μ(t, τ)` with `τ = t - onset` the time spent disabled.
    General(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for Rehabilitation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Rehabilitation::OnsetAdjusted { .. } => "OnsetAdjusted",
            Rehabilitation::DurationFree(_) => "DurationFree",
            Rehabilitation::General(_) => "General",
        })
    }
}

#[derive(Debug, Clone)]
pub struct RehabRates {
    /// active -> dead
    pub mu_star_dagger: RateFn,
    /// active -> disabled
    pub mu_star_diamond: RateFn,
    /// disabled -> active
    pub rehabilitation: Rehabilitation,
    /// disabled -> dead
    pub mu_diamond_dagger: RateFn,
    /// Inception age.
    pub t0: f64,
}

pub const MORTALITY: GompertzMakeham = GompertzMakeham { a: 0.0004, b: 0.060, c: -5.46 };
pub const DISABLEMENT: GompertzMakeham = GompertzMakeham { a: 0.0005, b: 0.038, c: -4.12 };
pub const REHAB_INTERCEPT: f64 = 0.773763;
pub const REHAB_SLOPE: f64 = -0.01045;

/// Gompertz–Makeham mortality and disablement, the linear base
/// rehabilitation rate with its onset adjustment, and disabled mortality
/// equal to active mortality.
pub fn default_rates(t0: f64) -> RehabRates {
    let mortality = RateFn::new(|t| MORTALITY.rate(t));
    RehabRates {
        mu_star_dagger: mortality.clone(),
        mu_star_diamond: RateFn::new(|t| DISABLEMENT.rate(t)),
        rehabilitation: Rehabilitation::OnsetAdjusted { base: RateFn::new(|t| REHAB_INTERCEPT + REHAB_SLOPE * t) },
        mu_diamond_dagger: mortality,
        t0,
    }
}

impl RehabRates {
    /// `1 - μ◇†` at the onset age. The onset coordinate is already an age
    /// (inception age plus time from inception to onset).
    #[inline]
    pub fn onset_factor(&self, onset: f64) -> f64 {
        1.0 - self.mu_diamond_dagger.eval(onset)
    }

    /// `μ◇*(t, t - onset) · 1[t >= onset]`
    pub fn rehab(&self, t: f64, onset: f64) -> f64 {
        if t < onset {
            return 0.0;
        }
        match &self.rehabilitation {
            Rehabilitation::OnsetAdjusted { base } => base.eval(t) * self.onset_factor(onset),
            Rehabilitation::DurationFree(base) => base.eval(t),
            Rehabilitation::General(f) => f(t, t - onset),
        }
    }

    /// No rehabilitation at all.
    pub fn without_rehabilitation(mut self) -> Self {
        self.rehabilitation = Rehabilitation::DurationFree(RateFn::zero());
        self
    }

    /// Sampled intensities on the grid for sign checks, as `(name, t, value)`.
    pub fn samples(&self, grid: &TimeGrid) -> Vec<(&'static str, f64, f64)> {
        let times = grid.times();
        let mut out = Vec::with_capacity(times.len() * 6);
        for &t in &times {
            out.push(("active->dead", t, self.mu_star_dagger.eval(t)));
            out.push(("active->disabled", t, self.mu_star_diamond.eval(t)));
            out.push(("disabled->dead", t, self.mu_diamond_dagger.eval(t)));
            out.push(("rehabilitation at onset", t, self.rehab(t, t)));
            out.push(("rehabilitation from inception", t, self.rehab(t, grid.start)));
        }
        out
    }
}

/// Per-step evaluation of `ρ(t_n, t_k)` over `k`.
enum RehabColumn<'a> {
    /// `ρ = base · factor[k]`
    Scaled {
        base: f64,
        factor: &'a [f64],
    },
    General {
        f: &'a (dyn Fn(f64, f64) -> f64 + Send + Sync),
        t: f64,
        grid: &'a TimeGrid,
    },
}

impl RehabColumn<'_> {
    #[inline]
    fn at(&self, k: usize) -> f64 {
        match self {
            RehabColumn::Scaled { base, factor } => base * factor[k],
            RehabColumn::General { f, t, grid } => {
                let onset = grid.time(k);
                debug_assert!(onset <= *t);
                f(*t, *t - onset)
            }
        }
    }
}

struct Stepper<'a> {
    rates: &'a RehabRates,
    discount: &'a Discount,
    grid: TimeGrid,
    annuity: f64,
    factor: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(rates: &'a RehabRates, discount: &'a Discount, grid: &TimeGrid, annuity: f64) -> Result<Self> {
        if !(annuity.is_finite() && annuity >= 0.0) {
            return Err(Error::Invalid(format!("annuity_rate must be finite and >= 0, got {annuity}")));
        }
        let factor = match &rates.rehabilitation {
            Rehabilitation::OnsetAdjusted { .. } => {
                (0..=grid.steps).map(|k| rates.onset_factor(grid.time(k))).collect()
            }
            Rehabilitation::DurationFree(_) => vec![1.0; grid.steps + 1],
            Rehabilitation::General(_) => Vec::new(),
        };
        Ok(Stepper { rates, discount, grid: *grid, annuity, factor })
    }

    /// Step `n -> n-1`. `col` holds `V◇[k][n]` for `k = 0..=n`, `next`
    /// receives `V◇[k][n-1]` for `k = 0..n`. Returns `V*[n-1]`.
    fn step(&self, n: usize, active: f64, col: &[f64], next: &mut [f64]) -> Result<f64> {
        debug_assert_eq!(col.len(), n + 1);
        debug_assert_eq!(next.len(), n);
        let t = self.grid.time(n);
        let dt = self.grid.dt();
        let r = self.discount.rate(t);
        let exit_dead = self.rates.mu_diamond_dagger.eval(t) + r;
        let annuity = self.annuity;
        let rehab = match &self.rates.rehabilitation {
            Rehabilitation::OnsetAdjusted { base } | Rehabilitation::DurationFree(base) => {
                RehabColumn::Scaled { base: base.eval(t), factor: &self.factor }
            }
            Rehabilitation::General(f) => RehabColumn::General { f: f.as_ref(), t, grid: &self.grid },
        };

        // onsets k <= n-1 < n, so rehabilitation is always in force here
        let update = |k: usize, v: f64| {
            let rho = rehab.at(k);
            v - dt * ((rho + exit_dead) * v - annuity - rho * active)
        };
        if n >= PARALLEL_MIN_ROWS {
            next.par_iter_mut()
                .with_min_len(PARALLEL_MIN_ROWS / 4)
                .enumerate()
                .for_each(|(k, out)| *out = update(k, col[k]));
        } else {
            for (k, out) in next.iter_mut().enumerate() {
                *out = update(k, col[k]);
            }
        }
        if let Some(k) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSurface { k, n: n - 1 });
        }

        let to_disabled = self.rates.mu_star_diamond.eval(t);
        let exit = self.rates.mu_star_dagger.eval(t) + to_disabled + r;
        let newly_disabled = col[n];
        let prev = active - dt * (exit * active - to_disabled * newly_disabled);
        if !prev.is_finite() {
            return Err(Error::NonFinite { t: self.grid.time(n - 1), state: State::Active.to_string() });
        }
        Ok(prev)
    }
}

/// The full reserve surface: `V*[n]` and `V◇[k][n]` for `k <= n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisabilityReserveSurface {
    pub grid: TimeGrid,
    pub active: Vec<f64>,
    // column-major lower triangle: column n holds k = 0..=n at n(n+1)/2
    disabled: Vec<f64>,
}

#[inline]
fn column_offset(n: usize) -> usize {
    n * (n + 1) / 2
}

impl DisabilityReserveSurface {
    /// `V_{(◇, t_k)}(t_n)`; requires `k <= n`.
    pub fn disabled(&self, k: usize, n: usize) -> f64 {
        assert!(k <= n, "onset index {k} after time index {n}");
        self.disabled[column_offset(n) + k]
    }

    /// `V◇[k][n]` for all `k <= n`.
    pub fn column(&self, n: usize) -> &[f64] {
        &self.disabled[column_offset(n)..column_offset(n + 1)]
    }

    /// `s -> V_{(◇,s)}(s)`, the reserve at onset.
    pub fn onset_curve(&self) -> Vec<f64> {
        (0..=self.grid.steps).map(|n| self.disabled(n, n)).collect()
    }

    /// `t -> V_{(◇,t_k)}(t)` for `t >= t_k`.
    pub fn slice(&self, k: usize) -> Vec<f64> {
        (k..=self.grid.steps).map(|n| self.disabled(k, n)).collect()
    }
}

/// Solves the surface on `grid`, whose end is the retirement age.
pub fn solve_disability(
    rates: &RehabRates,
    discount: &Discount,
    grid: &TimeGrid,
    annuity_rate: f64,
) -> Result<DisabilityReserveSurface> {
    let stepper = Stepper::new(rates, discount, grid, annuity_rate)?;
    let big_n = grid.steps;
    let mut disabled = vec![0.0; column_offset(big_n + 1)];
    let mut active = vec![0.0; big_n + 1];
    for n in (1..=big_n).rev() {
        let (head, tail) = disabled.split_at_mut(column_offset(n));
        let next = &mut head[column_offset(n - 1)..];
        let col = &tail[..n + 1];
        active[n - 1] = stepper.step(n, active[n], col, next)?;
    }
    Ok(DisabilityReserveSurface { grid: *grid, active, disabled })
}

/// Curves kept by the streaming solver.
#[derive(Debug, Clone, PartialEq)]
pub struct DisabilityCurves {
    pub grid: TimeGrid,
    /// `V*[n]`
    pub active: Vec<f64>,
    /// `V◇[n][n]`
    pub onset: Vec<f64>,
    /// Requested `V◇[k][n]`, in the order of the probes.
    pub probes: Vec<f64>,
}

/// Same recursion as [`solve_disability`] holding only two columns at a
/// time, `O(N)` memory. `probes` lists `(k, n)` entries to keep.
pub fn solve_disability_streaming(
    rates: &RehabRates,
    discount: &Discount,
    grid: &TimeGrid,
    annuity_rate: f64,
    probes: &[(usize, usize)],
) -> Result<DisabilityCurves> {
    let big_n = grid.steps;
    if let Some(&(k, n)) = probes.iter().find(|&&(k, n)| k > n || n > big_n) {
        return Err(Error::Invalid(format!("probe ({k}, {n}) is outside the triangular grid")));
    }
    let stepper = Stepper::new(rates, discount, grid, annuity_rate)?;
    let mut active = vec![0.0; big_n + 1];
    let mut onset = vec![0.0; big_n + 1];
    let mut values = vec![0.0; probes.len()];
    let mut col = vec![0.0; big_n + 1];
    let mut next = vec![0.0; big_n];
    for n in (1..=big_n).rev() {
        active[n - 1] = stepper.step(n, active[n], &col[..n + 1], &mut next[..n])?;
        std::mem::swap(&mut col, &mut next);
        onset[n - 1] = col[n - 1];
        for (p, &(k, m)) in values.iter_mut().zip(probes) {
            if m == n - 1 {
                *p = col[k];
            }
        }
    }
    Ok(DisabilityCurves { grid: *grid, active, onset, probes: values })
}

/// Figure data: the active reserve curve, the reserve-at-onset curve and
/// optional fixed-onset slices.
#[derive(Debug, Clone, PartialEq)]
pub struct Figures {
    pub active: Vec<(f64, f64)>,
    pub onset: Vec<(f64, f64)>,
    /// `(onset, [(t, V_{(◇,onset)}(t))])`
    pub slices: Vec<(f64, Vec<(f64, f64)>)>,
}

/// Slice onsets are snapped to the nearest grid point.
pub fn emit_figures(surface: &DisabilityReserveSurface, slice_onsets: &[f64]) -> Result<Figures> {
    let grid = &surface.grid;
    let times = grid.times();
    let active = times.iter().copied().zip(surface.active.iter().copied()).collect();
    let onset = times.iter().copied().zip(surface.onset_curve()).collect();
    let slices = slice_onsets
        .iter()
        .map(|&s| {
            if !(grid.start..=grid.end).contains(&s) {
                return Err(Error::Invalid(format!("slice onset {s} is outside [{}, {}]", grid.start, grid.end)));
            }
            let k = ((s - grid.start) / grid.dt()).round() as usize;
            let curve = (k..=grid.steps).map(|n| (times[n], surface.disabled(k, n))).collect();
            Ok((times[k], curve))
        })
        .collect::<Result<_>>()?;
    Ok(Figures { active, onset, slices })
}

impl Figures {
    pub fn from_curves(curves: &DisabilityCurves) -> Self {
        let times = curves.grid.times();
        Figures {
            active: times.iter().copied().zip(curves.active.iter().copied()).collect(),
            onset: times.iter().copied().zip(curves.onset.iter().copied()).collect(),
            slices: Vec::new(),
        }
    }

    /// `time,value`, latest time first.
    pub fn write_active_csv<W: Write>(&self, out: W) -> Result<()> {
        write_curve(out, "time", &self.active)
    }

    /// `onset,value`, latest onset first.
    pub fn write_onset_csv<W: Write>(&self, out: W) -> Result<()> {
        write_curve(out, "onset", &self.onset)
    }

    /// `onset,time,value`.
    pub fn write_slices_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["onset", "time", "value"])?;
        for (s, curve) in &self.slices {
            for &(t, v) in curve.iter().rev() {
                w.write_record([fmt_f64(*s), fmt_f64(t), fmt_f64(v)])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn write_curve<W: Write>(out: W, x: &str, points: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([x, "value"])?;
    for &(t, v) in points.iter().rev() {
        w.write_record([fmt_f64(t), fmt_f64(v)])?;
    }
    w.flush()?;
    Ok(())
}

/// The disability contract as a jump process, for simulation.
#[derive(Debug, Clone)]
pub struct DisabilityModel {
    pub rates: RehabRates,
    pub annuity_rate: f64,
    pub retirement: f64,
}

impl DisabilityModel {
    /// Default rates, an annuity of 1 per year, retirement at 67.
    pub fn standard(t0: f64) -> Self {
        DisabilityModel { rates: default_rates(t0), annuity_rate: 1.0, retirement: 67.0 }
    }

    pub fn payments(&self) -> PaymentSpec {
        PaymentSpec::annuity(StateLabel::Disabled, self.annuity_rate, Some(self.retirement))
    }
}

impl IntensityKernel for DisabilityModel {
    fn horizon(&self) -> Horizon {
        Horizon::new(self.rates.t0, self.retirement)
    }

    fn atoms(&self, t: f64, x: &State) -> Vec<Atom> {
        match *x {
            State::Active => vec![
                Atom::new(State::Dead, self.rates.mu_star_dagger.eval(t)),
                // the new disabled state remembers its onset time
                Atom::new(State::Disabled { onset: t }, self.rates.mu_star_diamond.eval(t)),
            ],
            State::Disabled { onset } => vec![
                Atom::new(State::Active, self.rates.rehab(t, onset)),
                Atom::new(State::Dead, self.rates.mu_diamond_dagger.eval(t)),
            ],
            _ => Vec::new(),
        }
    }

    fn description(&self) -> String {
        format!(
            "disability with {:?} rehabilitation, inception age {}, retirement {}",
            self.rates.rehabilitation, self.rates.t0, self.retirement
        )
    }

    fn hazard_basis(&self) -> Vec<RateFn> {
        let (d, i) = (self.rates.mu_star_dagger.clone(), self.rates.mu_star_diamond.clone());
        let base = match &self.rates.rehabilitation {
            Rehabilitation::OnsetAdjusted { base } | Rehabilitation::DurationFree(base) => base.clone(),
            Rehabilitation::General(_) => RateFn::zero(),
        };
        vec![RateFn::new(move |t| d.eval(t) + i.eval(t)), base, self.rates.mu_diamond_dagger.clone()]
    }

    fn hazard_weights(&self, x: &State) -> Option<Vec<(usize, f64)>> {
        match *x {
            State::Active => Some(vec![(0, 1.0)]),
            State::Disabled { onset } => match &self.rates.rehabilitation {
                Rehabilitation::OnsetAdjusted { .. } => Some(vec![(1, self.rates.onset_factor(onset)), (2, 1.0)]),
                Rehabilitation::DurationFree(_) => Some(vec![(1, 1.0), (2, 1.0)]),
                Rehabilitation::General(_) => None,
            },
            _ => Some(Vec::new()),
        }
    }
}
