use std::path::PathBuf;

use thiele::model::config::{ModelConfig, Reserves};
use thiele::model::validate::validate_model;
use thiele::model::{total_rate, Atom, Discount, Horizon, IntensityKernel, State};
use thiele::Error;

fn config_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn shipped() -> Vec<(String, ModelConfig)> {
    let mut out: Vec<_> = std::fs::read_dir(config_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), ModelConfig::load(&p).unwrap()))
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

#[test]
fn shipped_configs_are_clean_and_round_trip() {
    let configs = shipped();
    assert!(configs.len() >= 4);
    for (name, cfg) in configs {
        assert!(validate_model(&cfg).is_empty(), "{name}: {:?}", validate_model(&cfg));
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(ModelConfig::from_json(&text).unwrap(), cfg, "{name}");
        cfg.build().unwrap().solve().unwrap();
    }
}

#[test]
fn shipped_standard_config_is_the_default_contract() {
    let cfg = ModelConfig::load(config_dir().join("disability.json")).unwrap();
    let mut code = ModelConfig::standard_disability(30.0, 67.0, 1.0 / 12.0, 0.03);
    code.disability.as_mut().unwrap().slice_onsets = vec![30.0, 40.0, 50.0, 60.0];
    code.simulation = cfg.simulation.clone();
    assert_eq!(cfg, code);
    let Reserves::Disability(figures) = cfg.build().unwrap().solve().unwrap() else {
        panic!("disability config solved to a table");
    };
    assert_eq!(figures.active.last().unwrap(), &(67.0, 0.0));
    assert_eq!(figures.slices.len(), 4);
}

#[test]
fn horizon_past_rehabilitation_root_warns_once() {
    let cfg = ModelConfig::standard_disability(30.0, 80.0, 1.0 / 12.0, 0.03);
    let diags = validate_model(&cfg);
    assert_eq!(diags.len(), 1, "{diags:?}");
    assert!(!diags[0].is_error());
    // a warning does not stop the build
    cfg.build().unwrap();
}

#[test]
fn negative_step_is_rejected_with_one_diagnostic() {
    let mut cfg = ModelConfig::standard_disability(30.0, 67.0, 1.0 / 12.0, 0.03);
    cfg.grid_step = -1.0 / 12.0;
    let diags = validate_model(&cfg);
    assert_eq!(diags.len(), 1);
    assert_eq!(diags[0].message, "grid_step must be positive");
    assert!(matches!(cfg.build(), Err(Error::Config(_))));
}

#[test]
fn total_rate_of_the_disability_model_at_forty() {
    let scenario = ModelConfig::standard_disability(30.0, 67.0, 1.0 / 12.0, 0.03).build().unwrap();
    let lambda = total_rate(scenario.kernel(), 40.0, &State::Active).unwrap();
    assert!((lambda - 0.0042829).abs() < 5e-7, "{lambda}");
    assert_eq!(total_rate(scenario.kernel(), 40.0, &State::Dead).unwrap(), 0.0);
}

/// The default kernel with one of its atoms out of `Active` removed.
struct Without<'a> {
    inner: &'a dyn IntensityKernel,
    drop: usize,
}

impl IntensityKernel for Without<'_> {
    fn horizon(&self) -> Horizon {
        self.inner.horizon()
    }
    fn atoms(&self, t: f64, x: &State) -> Vec<Atom> {
        let mut atoms = self.inner.atoms(t, x);
        if *x == State::Active {
            atoms.remove(self.drop);
        }
        atoms
    }
    fn description(&self) -> String {
        "reduced".into()
    }
}

#[test]
fn removing_an_atom_lowers_the_total_rate_by_its_rate() {
    let scenario = ModelConfig::standard_disability(30.0, 67.0, 1.0 / 12.0, 0.03).build().unwrap();
    let k = scenario.kernel();
    for t in [30.0, 45.5, 66.9] {
        let full = total_rate(k, t, &State::Active).unwrap();
        for (i, atom) in k.atoms(t, &State::Active).iter().enumerate() {
            let less = total_rate(&Without { inner: k, drop: i }, t, &State::Active).unwrap();
            assert!((full - less - atom.rate).abs() < 1e-15);
        }
    }
}

#[test]
fn discount_factors_compose() {
    let d = Discount::constant(0.037);
    for (t, u, s) in [(0.0, 3.0, 10.0), (30.0, 31.5, 67.0), (5.0, 5.0, 5.0)] {
        assert!((d.factor(t, u) * d.factor(u, s) - d.factor(t, s)).abs() < 1e-12);
    }
}
