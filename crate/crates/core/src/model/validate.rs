//! Static checks of a [`ModelConfig`] before anything is solved.

use std::fmt;

use serde::Serialize;

use super::config::{ModelConfig, ModelKind, RehabSpec, SCHEMA_VERSION};
use super::{kernel_problems, DiscountSpec, Horizon, RateSpec, State, StateLabel, TimeGrid, WeightedSample};
use crate::duration::DisabilityModel;
use crate::measure::SpouseModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    fn error(message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, message: message.into() }
    }

    fn warning(message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, message: message.into() }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.severity {
            Severity::Error => write!(f, "error: {}", self.message),
            Severity::Warning => write!(f, "warning: {}", self.message),
        }
    }
}

/// Rates are sampled this many times per year when checking signs.
const SAMPLES_PER_YEAR: f64 = 16.0;

/// Every problem found; an empty list means the configuration is valid.
/// Negative intensities are warnings, everything else is an error.
pub fn validate_model(cfg: &ModelConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if cfg.schema != SCHEMA_VERSION {
        out.push(Diagnostic::error(format!("unsupported schema {}, expected {SCHEMA_VERSION}", cfg.schema)));
    }
    let interval_ok = cfg.t_start.is_finite() && cfg.horizon_end.is_finite() && cfg.horizon_end > cfg.t_start;
    if !interval_ok {
        out.push(Diagnostic::error(format!("horizon_end {} must be after t_start {}", cfg.horizon_end, cfg.t_start)));
    }
    if !(cfg.grid_step.is_finite() && cfg.grid_step > 0.0) {
        out.push(Diagnostic::error("grid_step must be positive"));
    } else if interval_ok {
        if let Err(e) = TimeGrid::new(cfg.t_start, cfg.horizon_end, cfg.grid_step) {
            out.push(Diagnostic::error(strip(e)));
        }
    }
    if let Err(e) = cfg.interest.build() {
        out.push(Diagnostic::error(e));
    }
    if let DiscountSpec::Table(knots) = &cfg.interest {
        if knots.first().is_some_and(|k| k.0 > cfg.t_start) {
            out.push(Diagnostic::warning("interest table starts after t_start; its first rate is used before it"));
        }
    }
    if !interval_ok {
        return out;
    }
    let samples = sample_times(cfg.t_start, cfg.horizon_end);
    match cfg.model_kind {
        ModelKind::Discrete => discrete(cfg, &samples, &mut out),
        ModelKind::DisabilityRehab => disability(cfg, &samples, &mut out),
        ModelKind::RandomSpouse => spouse(cfg, &samples, &mut out),
    }
    simulation(cfg, &mut out);
    out
}

fn strip(e: crate::Error) -> String {
    match e {
        crate::Error::Invalid(m) => m,
        other => other.to_string(),
    }
}

fn sample_times(start: f64, end: f64) -> Vec<f64> {
    let n = ((end - start) * SAMPLES_PER_YEAR).ceil().max(1.0) as usize;
    (0..=n).map(|i| if i == n { end } else { start + (end - start) * i as f64 / n as f64 }).collect()
}

fn rate_problems(name: &str, spec: &RateSpec, out: &mut Vec<Diagnostic>) {
    for p in spec.problems() {
        out.push(Diagnostic::error(format!("{name}: {p}")));
    }
}

fn push_kernel_problems(problems: Vec<super::KernelProblem>, out: &mut Vec<Diagnostic>) {
    out.extend(problems.into_iter().map(|p| {
        if p.fatal {
            Diagnostic::error(p.message)
        } else {
            Diagnostic::warning(p.message)
        }
    }));
}

fn discrete(cfg: &ModelConfig, samples: &[f64], out: &mut Vec<Diagnostic>) {
    let Some(d) = &cfg.discrete else {
        out.push(Diagnostic::error("model_kind discrete requires a \"discrete\" section"));
        return;
    };
    if d.n_states == 0 {
        out.push(Diagnostic::error("n_states must be at least 1"));
        return;
    }
    let mut structural = false;
    for t in &d.transitions {
        if t.from >= d.n_states || t.to >= d.n_states {
            out.push(Diagnostic::error(format!("transition {} -> {} refers to a missing state", t.from, t.to)));
            structural = true;
        } else if t.from == t.to {
            out.push(Diagnostic::error(format!("transition {} -> {} is a self-loop", t.from, t.to)));
            structural = true;
        }
        rate_problems(&format!("rate {} -> {}", t.from, t.to), &t.rate, out);
    }
    for p in d.payments.problems() {
        out.push(Diagnostic::error(p));
    }
    let labels = d
        .payments
        .sojourn
        .iter()
        .map(|p| p.state)
        .chain(d.payments.lumps.iter().map(|l| l.state))
        .chain(d.payments.transitions.iter().flat_map(|p| [p.from, p.to]));
    for label in labels {
        match label {
            StateLabel::Discrete(i) if i < d.n_states => {}
            other => out.push(Diagnostic::error(format!("payment refers to state {other}, not a state of this chain"))),
        }
    }
    if let Some(b) = &d.boundary {
        if b.len() != d.n_states {
            out.push(Diagnostic::error(format!("boundary has {} entries for {} states", b.len(), d.n_states)));
        }
        if b.iter().any(|v| !v.is_finite()) {
            out.push(Diagnostic::error("boundary values must be finite"));
        }
    }
    if structural || d.transitions.iter().any(|t| !t.rate.problems().is_empty()) {
        return;
    }
    let model = crate::discrete::DiscreteModel::from_rates(
        d.n_states,
        d.transitions.iter().map(|t| (t.from, t.to, t.rate.build())).collect(),
        d.payments.clone(),
        super::Discount::constant(0.0),
    );
    let points: Vec<(f64, State)> =
        samples.iter().flat_map(|&t| (0..d.n_states).map(move |i| (t, State::Discrete(i)))).collect();
    push_kernel_problems(kernel_problems(&model, &points), out);
}

fn disability(cfg: &ModelConfig, samples: &[f64], out: &mut Vec<Diagnostic>) {
    let Some(d) = &cfg.disability else {
        out.push(Diagnostic::error("model_kind disability_rehab requires a \"disability\" section"));
        return;
    };
    if !(d.annuity_rate.is_finite() && d.annuity_rate >= 0.0) {
        out.push(Diagnostic::error("annuity_rate must be finite and non-negative"));
    }
    let mut specs = vec![("mu_star_dagger", &d.mu_star_dagger), ("mu_star_diamond", &d.mu_star_diamond)];
    if let Some(m) = &d.mu_diamond_dagger {
        specs.push(("mu_diamond_dagger", m));
    }
    match &d.rehabilitation {
        RehabSpec::OnsetAdjusted { base } | RehabSpec::DurationFree(base) => specs.push(("rehabilitation", base)),
        RehabSpec::None => {}
    }
    let before = out.len();
    for (name, spec) in specs {
        rate_problems(name, spec, out);
    }
    let rates_ok = out.len() == before;
    for &s in &d.slice_onsets {
        if !(cfg.t_start..=cfg.horizon_end).contains(&s) {
            out.push(Diagnostic::error(format!("slice onset {s} is outside [{}, {}]", cfg.t_start, cfg.horizon_end)));
        }
    }
    if !rates_ok {
        return;
    }
    let model =
        DisabilityModel { rates: d.rates(cfg.t_start), annuity_rate: d.annuity_rate, retirement: cfg.horizon_end };
    // rehabilitation depends on the onset, so check both extremes
    let points: Vec<(f64, State)> = samples
        .iter()
        .flat_map(|&t| {
            [(t, State::Active), (t, State::Disabled { onset: cfg.t_start }), (t, State::Disabled { onset: t })]
        })
        .collect();
    push_kernel_problems(kernel_problems(&model, &points), out);
}

fn spouse(cfg: &ModelConfig, samples: &[f64], out: &mut Vec<Diagnostic>) {
    let Some(s) = &cfg.spouse else {
        out.push(Diagnostic::error("model_kind random_spouse requires a \"spouse\" section"));
        return;
    };
    if !s.annuity_rate.is_finite() {
        out.push(Diagnostic::error("annuity_rate must be finite"));
    }
    let before = out.len();
    rate_problems("mortality", &s.mortality, out);
    rate_problems("presence", &s.presence, out);
    rate_problems("spouse_mortality", &s.spouse_mortality, out);
    let phi = match WeightedSample::new(s.phi.clone()) {
        Ok(phi) => phi,
        Err(e) => {
            out.push(Diagnostic::error(format!("phi: {e}")));
            return;
        }
    };
    for (node, &(d, _)) in phi.nodes().iter().enumerate() {
        let age = cfg.t_start - d;
        if age < 0.0 {
            out.push(Diagnostic::error(format!(
                "spouse age {age} is negative at t_start for phi node {node} (d = {d})"
            )));
        }
    }
    if out.len() > before {
        return;
    }
    let g = s.presence.build();
    if let Some(&t) = samples.iter().find(|&&t| !(0.0..=1.0).contains(&g.eval(t))) {
        out.push(Diagnostic::error(format!("presence probability {} at t = {t} is outside [0, 1]", g.eval(t))));
        return;
    }
    let model = SpouseModel {
        mu_star_dagger: s.mortality.build(),
        spouse_presence: g,
        phi: std::sync::Arc::new(phi.clone()),
        spouse_mortality: s.spouse_mortality.build(),
        annuity_rate: s.annuity_rate,
        horizon: Horizon::new(cfg.t_start, cfg.horizon_end),
    };
    let points: Vec<(f64, State)> = samples
        .iter()
        .flat_map(|&t| {
            std::iter::once((t, State::Active))
                .chain(phi.nodes().iter().map(move |&(d, _)| (t, State::DeadWithSpouse { age_diff: d })))
        })
        .collect();
    push_kernel_problems(kernel_problems(&model, &points), out);
}

fn simulation(cfg: &ModelConfig, out: &mut Vec<Diagnostic>) {
    let sim = &cfg.simulation;
    if sim.paths == 0 {
        out.push(Diagnostic::error("simulation.paths must be at least 1"));
    }
    if sim.substeps == 0 {
        out.push(Diagnostic::error("simulation.substeps must be at least 1"));
    }
    let grid = TimeGrid::new(cfg.t_start, cfg.horizon_end, cfg.grid_step).ok();
    for (x, t) in cfg.targets() {
        if let Err(e) = x.check(Some(t)) {
            out.push(Diagnostic::error(format!("target {x}: {e}")));
        }
        let allowed = match cfg.model_kind {
            ModelKind::Discrete => {
                matches!(x, State::Discrete(i) if cfg.discrete.as_ref().is_none_or(|d| i < d.n_states))
            }
            ModelKind::DisabilityRehab => matches!(x, State::Active | State::Disabled { .. } | State::Dead),
            ModelKind::RandomSpouse => matches!(x, State::Active | State::DeadWithSpouse { .. } | State::Dead),
        };
        if !allowed {
            out.push(Diagnostic::error(format!("target state {x} does not belong to this model")));
        }
        if let Some(g) = &grid {
            if g.node_at(t).is_none() {
                out.push(Diagnostic::error(format!("target time {t} is not a grid point")));
            }
            if let State::Disabled { onset } = x {
                if g.node_at(onset).is_none() {
                    out.push(Diagnostic::error(format!("target onset {onset} is not a grid point")));
                }
            }
        }
        if let (State::DeadWithSpouse { age_diff }, Some(s)) = (x, &cfg.spouse) {
            if !s.phi.iter().any(|&(d, _)| d == age_diff) {
                out.push(Diagnostic::error(format!("target {x} is not a node of phi")));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard(step: f64, end: f64) -> ModelConfig {
        ModelConfig::standard_disability(30.0, end, step, 0.03)
    }

    #[test]
    fn standard_configuration_is_clean() {
        assert_eq!(validate_model(&standard(1.0 / 12.0, 67.0)), vec![]);
    }

    #[test]
    fn negative_step_gives_one_diagnostic() {
        let d = validate_model(&standard(-1.0 / 12.0, 67.0));
        assert_eq!(d, vec![Diagnostic::error("grid_step must be positive")]);
    }

    #[test]
    fn rehabilitation_turns_negative_before_eighty() {
        let d = validate_model(&standard(1.0 / 12.0, 80.0));
        assert_eq!(d.len(), 1, "{d:?}");
        assert_eq!(d[0].severity, Severity::Warning);
        // first sample past the root 0.773763 / 0.01045 = 74.04…
        assert!(d[0].message.starts_with("rate disabled:30 -> active is negative"), "{d:?}");
        assert!(d[0].message.ends_with("at t = 74.0625"), "{d:?}");
    }

    #[test]
    fn divisibility() {
        let d = validate_model(&standard(0.7, 67.0));
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("not a multiple"));
    }

    #[test]
    fn spouse_checks() {
        let text = r#"{
            "schema": 1, "model_kind": "random_spouse", "t_start": 20, "horizon_end": 90, "grid_step": 0.25,
            "interest": {"constant": 0.02},
            "spouse": {
                "mortality": {"constant": 0.01},
                "presence": {"table": [[20, 0.5], [90, 1.2]]},
                "phi": [[25.0, 0.5], [0.0, 0.5]],
                "spouse_mortality": {"constant": 0.01}
            }
        }"#;
        let d = validate_model(&ModelConfig::from_json(text).unwrap());
        assert_eq!(d.len(), 1, "{d:?}");
        assert!(d[0].message.contains("phi node 0"));
        let fixed = text.replace("[25.0, 0.5]", "[5.0, 0.5]");
        let d = validate_model(&ModelConfig::from_json(&fixed).unwrap());
        assert_eq!(d.len(), 1, "{d:?}");
        assert!(d[0].message.contains("presence probability"));
    }

    #[test]
    fn discrete_structure() {
        let text = r#"{
            "schema": 2, "model_kind": "discrete", "t_start": 0, "horizon_end": 1, "grid_step": 0.5,
            "interest": {"constant": 0.0},
            "discrete": {
                "n_states": 2,
                "transitions": [{"from": 0, "to": 2, "rate": {"constant": 0.1}}],
                "payments": {"sojourn": [{"state": "active", "amount": 1.0}]},
                "boundary": [0.0]
            }
        }"#;
        let d = validate_model(&ModelConfig::from_json(text).unwrap());
        assert_eq!(d.len(), 4, "{d:?}");
        assert!(d.iter().all(Diagnostic::is_error));
    }
}
