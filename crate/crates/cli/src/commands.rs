use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use thiele::model::config::{ModelConfig, Reserves, Scenario};
use thiele::model::validate::{validate_model, Diagnostic, Severity};
use thiele::model::State;
use thiele::simulator::{write_paths_csv, McEstimate};

use crate::manifest::{sha256_hex, timestamp, RunManifest};
use crate::{Failure, McArgs};

/// Agreement threshold for `compare`.
const Z_LIMIT: f64 = 4.0;

struct Loaded {
    cfg: ModelConfig,
    hash: String,
    path: String,
}

fn read_config(path: &Path) -> Result<(Loaded, Vec<Diagnostic>), Failure> {
    let bytes =
        std::fs::read(path).map_err(|e| Failure::Invalid(vec![format!("cannot read {}: {e}", path.display())]))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Failure::Invalid(vec![format!("{} is not UTF-8", path.display())]))?;
    let cfg = ModelConfig::from_json(&text).map_err(|e| Failure::Invalid(vec![format!("{}: {e}", path.display())]))?;
    let diagnostics = validate_model(&cfg);
    let loaded = Loaded { cfg, hash: sha256_hex(&bytes), path: path.display().to_string() };
    Ok((loaded, diagnostics))
}

/// Loads, validates and builds. Warnings are reported on stderr; any error
/// stops with exit code 2.
fn load(path: &Path) -> Result<(Loaded, Scenario), Failure> {
    let (loaded, diagnostics) = read_config(path)?;
    for d in diagnostics.iter().filter(|d| !d.is_error()) {
        eprintln!("{d}");
    }
    let errors: Vec<String> = diagnostics.into_iter().filter(Diagnostic::is_error).map(|d| d.message).collect();
    if !errors.is_empty() {
        return Err(Failure::Invalid(errors));
    }
    let scenario = loaded.cfg.build()?;
    Ok((loaded, scenario))
}

fn print_json(value: &impl Serialize) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Failure::Output(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

/// Collects output files and writes the manifest last.
struct Outputs<'a> {
    dir: &'a Path,
    files: Vec<String>,
    started: String,
}

impl<'a> Outputs<'a> {
    fn create(dir: &'a Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Output(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Outputs { dir, files: Vec::new(), started: timestamp() })
    }

    fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> Result<(), Failure>,
    ) -> Result<(), Failure> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| Failure::Output(format!("cannot write {}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), Failure> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(|e| Failure::Output(e.to_string()))?;
            writeln!(w)?;
            Ok(())
        })
    }

    fn finish(self, command: &str, loaded: &Loaded) -> Result<Vec<String>, Failure> {
        let manifest = RunManifest {
            tool: "thiele",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config: loaded.path.clone(),
            config_sha256: loaded.hash.clone(),
            started: self.started,
            finished: timestamp(),
            files: self.files,
        };
        manifest.write(self.dir)?;
        Ok(manifest.files)
    }
}

#[derive(Serialize)]
struct Value {
    state: State,
    time: f64,
    value: f64,
}

pub fn reserve(config: &Path, out: &Path) -> Result<(), Failure> {
    let (loaded, scenario) = load(config)?;
    let mut outputs = Outputs::create(out)?;
    match scenario.solve()? {
        Reserves::Table(table) => outputs.write("reserves.csv", |w| Ok(table.write_csv(w)?))?,
        Reserves::Disability(figures) => {
            outputs.write("active_reserve.csv", |w| Ok(figures.write_active_csv(w)?))?;
            outputs.write("disabled_onset_reserve.csv", |w| Ok(figures.write_onset_csv(w)?))?;
            if !figures.slices.is_empty() {
                outputs.write("disabled_slices.csv", |w| Ok(figures.write_slices_csv(w)?))?;
            }
        }
    }
    let values = scenario.reserves_at(&scenario.targets)?;
    let files = outputs.finish("reserve", &loaded)?;
    let reserves: Vec<Value> =
        scenario.targets.iter().zip(values).map(|(&(state, time), value)| Value { state, time, value }).collect();
    print_json(&json!({ "command": "reserve", "out": out.display().to_string(), "files": files, "reserves": reserves }))
}

#[derive(Serialize)]
struct Estimate {
    state: State,
    time: f64,
    #[serde(flatten)]
    mc: McEstimate,
}

fn estimates(scenario: &Scenario, mc: McArgs) -> Result<Vec<Estimate>, Failure> {
    let n_paths = mc.paths.unwrap_or(scenario.simulation.paths);
    let seed = mc.seed.unwrap_or(scenario.simulation.seed);
    if n_paths == 0 {
        return Err(Failure::Invalid(vec!["--paths must be at least 1".into()]));
    }
    if !(mc.perturb_mc_rates.is_finite() && mc.perturb_mc_rates >= 0.0) {
        return Err(Failure::Invalid(vec!["rate perturbation must be finite and non-negative".into()]));
    }
    scenario
        .targets
        .iter()
        .map(|&(state, time)| {
            let mc = scenario.simulate(&state, time, n_paths, seed, mc.perturb_mc_rates)?;
            Ok(Estimate { state, time, mc })
        })
        .collect()
}

pub fn simulate(config: &Path, out: &Path, mc: McArgs, dump_paths: bool) -> Result<(), Failure> {
    let (loaded, scenario) = load(config)?;
    let estimates = estimates(&scenario, mc)?;
    let mut outputs = Outputs::create(out)?;
    outputs.write_json("mc_estimate.json", &json!({ "estimates": &estimates }))?;
    if dump_paths {
        for (k, e) in estimates.iter().enumerate() {
            let paths = scenario.sample_paths(&e.state, e.time, e.mc.n_paths as usize, e.mc.seed)?;
            outputs.write(&format!("paths_{k}.csv"), |w| Ok(write_paths_csv(&paths, e.time, w)?))?;
        }
    }
    let files = outputs.finish("simulate", &loaded)?;
    print_json(
        &json!({ "command": "simulate", "out": out.display().to_string(), "files": files, "estimates": estimates }),
    )
}

#[derive(Serialize)]
struct Comparison {
    state: State,
    time: f64,
    ode: f64,
    mean: f64,
    std_error: f64,
    z: f64,
    pass: bool,
}

pub fn compare(config: &Path, mc: McArgs, out: Option<&Path>) -> Result<(), Failure> {
    let (loaded, scenario) = load(config)?;
    let ode = scenario.reserves_at(&scenario.targets)?;
    let rows: Vec<Comparison> = estimates(&scenario, mc)?
        .into_iter()
        .zip(ode)
        .map(|(e, ode)| {
            let z = e.mc.z_score(ode);
            let McEstimate { mean, std_error, .. } = e.mc;
            Comparison { state: e.state, time: e.time, ode, mean, std_error, z, pass: z.abs() < Z_LIMIT }
        })
        .collect();
    let pass = rows.iter().all(|r| r.pass);
    // serde_json writes non-finite numbers as null; z is infinite only for a
    // degenerate estimate that disagrees, and `pass` already records that
    let report = json!({ "command": "compare", "pass": pass, "z_limit": Z_LIMIT, "targets": rows });
    if let Some(dir) = out {
        let mut outputs = Outputs::create(dir)?;
        outputs.write_json("compare.json", &report)?;
        outputs.finish("compare", &loaded)?;
    }
    print_json(&report)?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Disagreement)
    }
}

pub fn validate(config: &Path) -> Result<(), Failure> {
    let (_, diagnostics) = read_config(config)?;
    for d in &diagnostics {
        eprintln!("{d}");
    }
    let valid = !diagnostics.iter().any(Diagnostic::is_error);
    let list: Vec<_> = diagnostics
        .iter()
        .map(|d| {
            let severity = match d.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            json!({ "severity": severity, "message": d.message })
        })
        .collect();
    print_json(&json!({ "command": "validate", "valid": valid, "diagnostics": list }))?;
    if valid {
        Ok(())
    } else {
        Err(Failure::Invalid(Vec::new()))
    }
}
