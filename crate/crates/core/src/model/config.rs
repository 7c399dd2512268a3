//! The JSON model document and the [`Scenario`] built from it.
//!
//! Times are ages in years, rates per year, money in contract units. The
//! grid step may be written as a number or as a fraction string such as
//! `"1/12"`.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize};

use super::{
    Discount, DiscountSpec, GompertzMakeham, Horizon, IntensityKernel, PaymentSpec, RateSpec, ScaledKernel, State,
    TimeGrid, WeightedSample,
};
use crate::discrete::{solve_reserves_discrete, DiscreteModel, ReserveTable};
use crate::duration::{
    emit_figures, solve_disability, solve_disability_streaming, DisabilityModel, Figures, RehabRates, Rehabilitation,
    DISABLEMENT, MORTALITY, REHAB_INTERCEPT, REHAB_SLOPE,
};
use crate::error::{Error, Result};
use crate::measure::{solve_spouse_reserves, SpouseModel};
use crate::simulator::{simulate_pv, McEstimate, PathSample, Simulator};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Discrete,
    DisabilityRehab,
    RandomSpouse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub schema: u32,
    pub model_kind: ModelKind,
    /// First grid time; the inception age for the disability and spouse models.
    pub t_start: f64,
    /// Boundary time `T` where reserves are fixed (retirement for disability).
    pub horizon_end: f64,
    #[serde(deserialize_with = "grid_step")]
    pub grid_step: f64,
    pub interest: DiscountSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrete: Option<DiscreteSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disability: Option<DisabilitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spouse: Option<SpouseSection>,
    #[serde(default)]
    pub simulation: SimulationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSpec {
    pub from: usize,
    pub to: usize,
    pub rate: RateSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteSection {
    pub n_states: usize,
    #[serde(default)]
    pub transitions: Vec<TransitionSpec>,
    #[serde(default)]
    pub payments: PaymentSpec,
    /// `V_i(T)`; zeros when absent.
    #[serde(default)]
    pub boundary: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RehabSpec {
    /// `base(t) · (1 - μ◇†(onset))` for `t >= onset`.
    OnsetAdjusted {
        base: RateSpec,
    },
    DurationFree(RateSpec),
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisabilitySection {
    pub annuity_rate: f64,
    pub mu_star_dagger: RateSpec,
    pub mu_star_diamond: RateSpec,
    pub rehabilitation: RehabSpec,
    /// Defaults to `mu_star_dagger`.
    pub mu_diamond_dagger: Option<RateSpec>,
    /// Onset ages for the fixed-onset reserve slices.
    pub slice_onsets: Vec<f64>,
}

impl Default for DisabilitySection {
    fn default() -> Self {
        DisabilitySection {
            annuity_rate: 1.0,
            mu_star_dagger: RateSpec::GompertzMakeham(MORTALITY),
            mu_star_diamond: RateSpec::GompertzMakeham(DISABLEMENT),
            rehabilitation: RehabSpec::OnsetAdjusted {
                base: RateSpec::Linear { intercept: REHAB_INTERCEPT, slope: REHAB_SLOPE },
            },
            mu_diamond_dagger: None,
            slice_onsets: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpouseSection {
    /// Insured mortality by age.
    pub mortality: RateSpec,
    /// Probability of a surviving spouse at the insured's death.
    pub presence: RateSpec,
    /// `(insured age - spouse age, weight)` pairs.
    pub phi: Vec<(f64, f64)>,
    /// Spouse mortality by the spouse's age.
    pub spouse_mortality: RateSpec,
    #[serde(default = "one")]
    pub annuity_rate: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub state: State,
    /// Defaults to `t_start`.
    #[serde(default)]
    pub time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    /// States whose reserves are estimated; model defaults when empty.
    pub targets: Vec<Target>,
    pub paths: usize,
    pub seed: u64,
    /// Hazard sub-steps per solver step.
    pub substeps: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection { targets: Vec::new(), paths: 100_000, seed: 1, substeps: 4 }
    }
}

fn grid_step<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Step {
        Number(f64),
        Text(String),
    }
    match Step::deserialize(d)? {
        Step::Number(x) => Ok(x),
        Step::Text(s) => parse_fraction(&s).ok_or_else(|| serde::de::Error::custom(format!("bad grid_step {s:?}"))),
    }
}

fn parse_fraction(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((a, b)) => Some(a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?),
        None => s.trim().parse().ok(),
    }
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The disability contract with default rates: annuity 1 until `retirement`.
    pub fn standard_disability(t0: f64, retirement: f64, grid_step: f64, r: f64) -> Self {
        ModelConfig {
            schema: SCHEMA_VERSION,
            model_kind: ModelKind::DisabilityRehab,
            t_start: t0,
            horizon_end: retirement,
            grid_step,
            interest: DiscountSpec::Constant(r),
            discrete: None,
            disability: Some(DisabilitySection::default()),
            spouse: None,
            simulation: SimulationSection::default(),
        }
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.t_start, self.horizon_end, self.grid_step)
    }

    /// Simulation targets with times filled in; model defaults when none are given.
    pub fn targets(&self) -> Vec<(State, f64)> {
        if !self.simulation.targets.is_empty() {
            return self.simulation.targets.iter().map(|t| (t.state, t.time.unwrap_or(self.t_start))).collect();
        }
        let states = match self.model_kind {
            ModelKind::Discrete => vec![State::Discrete(0)],
            ModelKind::DisabilityRehab => vec![State::Active, State::Disabled { onset: self.t_start }],
            ModelKind::RandomSpouse => vec![State::Active],
        };
        states.into_iter().map(|s| (s, self.t_start)).collect()
    }

    /// Validates and builds. Any error-level diagnostic is returned as
    /// [`Error::Config`].
    pub fn build(&self) -> Result<Scenario> {
        let errors: Vec<String> =
            super::validate::validate_model(self).into_iter().filter(|d| d.is_error()).map(|d| d.message).collect();
        if !errors.is_empty() {
            return Err(Error::Config(errors));
        }
        let discount = self.interest.build().map_err(Error::Invalid)?;
        let grid = self.grid()?;
        let horizon = Horizon::new(self.t_start, self.horizon_end);
        let missing = |name: &str| Error::Config(vec![format!("model_kind requires a \"{name}\" section")]);
        let model = match self.model_kind {
            ModelKind::Discrete => {
                let d = self.discrete.as_ref().ok_or_else(|| missing("discrete"))?;
                let rates = d.transitions.iter().map(|t| (t.from, t.to, t.rate.build())).collect();
                let model = DiscreteModel::from_rates(d.n_states, rates, d.payments.clone(), discount)
                    .with_horizon(self.t_start, self.horizon_end);
                let boundary = d.boundary.clone().unwrap_or_else(|| vec![0.0; d.n_states]);
                ScenarioModel::Discrete { model, boundary }
            }
            ModelKind::DisabilityRehab => {
                let d = self.disability.as_ref().ok_or_else(|| missing("disability"))?;
                ScenarioModel::Disability {
                    model: DisabilityModel {
                        rates: d.rates(self.t_start),
                        annuity_rate: d.annuity_rate,
                        retirement: self.horizon_end,
                    },
                    discount,
                    slice_onsets: d.slice_onsets.clone(),
                }
            }
            ModelKind::RandomSpouse => {
                let s = self.spouse.as_ref().ok_or_else(|| missing("spouse"))?;
                let phi = WeightedSample::new(s.phi.clone()).map_err(|e| Error::Config(vec![e]))?;
                ScenarioModel::Spouse {
                    model: SpouseModel {
                        mu_star_dagger: s.mortality.build(),
                        spouse_presence: s.presence.build(),
                        phi: Arc::new(phi),
                        spouse_mortality: s.spouse_mortality.build(),
                        annuity_rate: s.annuity_rate,
                        horizon,
                    },
                    discount,
                }
            }
        };
        Ok(Scenario { model, grid, targets: self.targets(), simulation: self.simulation.clone() })
    }
}

impl DisabilitySection {
    pub fn rates(&self, t0: f64) -> RehabRates {
        let mu_star_dagger = self.mu_star_dagger.build();
        let rehabilitation = match &self.rehabilitation {
            RehabSpec::OnsetAdjusted { base } => Rehabilitation::OnsetAdjusted { base: base.build() },
            RehabSpec::DurationFree(base) => Rehabilitation::DurationFree(base.build()),
            RehabSpec::None => Rehabilitation::DurationFree(super::RateFn::zero()),
        };
        RehabRates {
            mu_diamond_dagger: self.mu_diamond_dagger.as_ref().map_or_else(|| mu_star_dagger.clone(), RateSpec::build),
            mu_star_dagger,
            mu_star_diamond: self.mu_star_diamond.build(),
            rehabilitation,
            t0,
        }
    }
}

#[derive(Debug, Clone)]
pub enum ScenarioModel {
    Discrete { model: DiscreteModel, boundary: Vec<f64> },
    Disability { model: DisabilityModel, discount: Discount, slice_onsets: Vec<f64> },
    Spouse { model: SpouseModel, discount: Discount },
}

/// A validated model ready to solve and simulate.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: ScenarioModel,
    pub grid: TimeGrid,
    pub targets: Vec<(State, f64)>,
    pub simulation: SimulationSection,
}

/// Solver output in the form the model naturally produces.
#[derive(Debug, Clone)]
pub enum Reserves {
    Table(ReserveTable),
    Disability(Figures),
}

/// Above this many steps the disability surface is solved in streaming mode.
const FULL_SURFACE_MAX_STEPS: usize = 4096;

impl Scenario {
    pub fn kernel(&self) -> &dyn IntensityKernel {
        match &self.model {
            ScenarioModel::Discrete { model, .. } => model,
            ScenarioModel::Disability { model, .. } => model,
            ScenarioModel::Spouse { model, .. } => model,
        }
    }

    pub fn payments(&self) -> PaymentSpec {
        match &self.model {
            ScenarioModel::Discrete { model, .. } => model.payments.clone(),
            ScenarioModel::Disability { model, .. } => model.payments(),
            ScenarioModel::Spouse { model, .. } => model.payments(),
        }
    }

    pub fn discount(&self) -> &Discount {
        match &self.model {
            ScenarioModel::Discrete { model, .. } => &model.discount,
            ScenarioModel::Disability { discount, .. } | ScenarioModel::Spouse { discount, .. } => discount,
        }
    }

    fn terminal(&self) -> Vec<(State, f64)> {
        match &self.model {
            ScenarioModel::Discrete { boundary, .. } => {
                boundary.iter().enumerate().map(|(i, &v)| (State::Discrete(i), v)).collect()
            }
            _ => Vec::new(),
        }
    }

    pub fn solve(&self) -> Result<Reserves> {
        match &self.model {
            ScenarioModel::Discrete { model, boundary } => {
                Ok(Reserves::Table(solve_reserves_discrete(model, boundary, &self.grid)?))
            }
            ScenarioModel::Disability { model, discount, slice_onsets } => {
                if self.grid.steps <= FULL_SURFACE_MAX_STEPS {
                    let surface = solve_disability(&model.rates, discount, &self.grid, model.annuity_rate)?;
                    Ok(Reserves::Disability(emit_figures(&surface, slice_onsets)?))
                } else {
                    let g = &self.grid;
                    let ks: Vec<usize> = slice_onsets.iter().map(|&s| self.onset_index(s)).collect::<Result<_>>()?;
                    let probes: Vec<(usize, usize)> =
                        ks.iter().flat_map(|&k| (k..=g.steps).map(move |n| (k, n))).collect();
                    let curves = solve_disability_streaming(&model.rates, discount, g, model.annuity_rate, &probes)?;
                    let mut figures = Figures::from_curves(&curves);
                    let mut values = curves.probes.iter();
                    for &k in &ks {
                        let curve = (k..=g.steps).map(|n| (g.time(n), *values.next().unwrap())).collect();
                        figures.slices.push((g.time(k), curve));
                    }
                    Ok(Reserves::Disability(figures))
                }
            }
            ScenarioModel::Spouse { model, discount } => {
                Ok(Reserves::Table(solve_spouse_reserves(model, discount, &self.grid)?))
            }
        }
    }

    fn onset_index(&self, s: f64) -> Result<usize> {
        let g = &self.grid;
        if !(g.start..=g.end).contains(&s) {
            return Err(Error::Invalid(format!("onset {s} is outside [{}, {}]", g.start, g.end)));
        }
        Ok(((s - g.start) / g.dt()).round() as usize)
    }

    fn time_index(&self, t: f64) -> Result<usize> {
        self.grid.node_at(t).ok_or_else(|| Error::Invalid(format!("time {t} is not a grid point")))
    }

    /// Solver reserves `V_x(t)` for the given targets.
    pub fn reserves_at(&self, targets: &[(State, f64)]) -> Result<Vec<f64>> {
        match &self.model {
            ScenarioModel::Disability { model, discount, .. } => {
                let mut probes = Vec::new();
                let mut slots = Vec::with_capacity(targets.len());
                for (x, t) in targets {
                    let n = self.time_index(*t)?;
                    slots.push(match *x {
                        State::Active => Slot::Active(n),
                        State::Dead => Slot::Zero,
                        State::Disabled { onset } => {
                            let k = self
                                .grid
                                .node_at(onset)
                                .ok_or_else(|| Error::Invalid(format!("onset {onset} is not a grid point")))?;
                            if k > n {
                                return Err(Error::Invalid(format!("onset {onset} is after time {t}")));
                            }
                            probes.push((k, n));
                            Slot::Probe(probes.len() - 1)
                        }
                        other => return Err(Error::Invalid(format!("state {other} is not in the disability model"))),
                    });
                }
                let curves =
                    solve_disability_streaming(&model.rates, discount, &self.grid, model.annuity_rate, &probes)?;
                Ok(slots
                    .into_iter()
                    .map(|s| match s {
                        Slot::Active(n) => curves.active[n],
                        Slot::Zero => 0.0,
                        Slot::Probe(p) => curves.probes[p],
                    })
                    .collect())
            }
            _ => {
                let Reserves::Table(table) = self.solve()? else { unreachable!() };
                targets
                    .iter()
                    .map(|(x, t)| {
                        let n = self.time_index(*t)?;
                        let i = table
                            .state_index(x)
                            .ok_or_else(|| Error::Invalid(format!("state {x} is not in the model")))?;
                        Ok(table.value(i, n))
                    })
                    .collect()
            }
        }
    }

    fn substep(&self) -> f64 {
        self.grid.dt() / self.simulation.substeps.max(1) as f64
    }

    /// Monte Carlo estimate of `V_x(t)`. `kernel_scale` multiplies every
    /// intensity in the simulated process (1 for the model as configured).
    pub fn simulate(&self, x: &State, t: f64, n_paths: usize, seed: u64, kernel_scale: f64) -> Result<McEstimate> {
        let payments = self.payments();
        let kernel = ScaledKernel { inner: self.kernel(), factor: kernel_scale };
        let sim = Simulator::new(&kernel, &payments, self.discount(), self.grid.start, self.grid.end, self.substep())?
            .with_terminal(self.terminal());
        simulate_pv(&sim, x, t, n_paths, seed)
    }

    /// The first `n_paths` trajectories behind [`simulate`](Self::simulate).
    pub fn sample_paths(&self, x: &State, t: f64, n_paths: usize, seed: u64) -> Result<Vec<PathSample>> {
        let payments = self.payments();
        let kernel = ScaledKernel { inner: self.kernel(), factor: 1.0 };
        let sim = Simulator::new(&kernel, &payments, self.discount(), self.grid.start, self.grid.end, self.substep())?
            .with_terminal(self.terminal());
        sim.sample_paths(x, t, n_paths, seed)
    }
}

enum Slot {
    Active(usize),
    Zero,
    Probe(usize),
}

/// Used by the defaults above and handy for configs built in code.
pub fn gompertz_makeham(a: f64, b: f64, c: f64) -> RateSpec {
    RateSpec::GompertzMakeham(GompertzMakeham { a, b, c })
}
