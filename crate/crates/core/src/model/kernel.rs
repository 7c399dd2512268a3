//! Jump intensity kernels `q_t(x, ·)`.
//!
//! A kernel is a finite set of atoms plus at most one continuous part whose
//! law over a coordinate family is given as a finite weighted sample. That
//! shape covers the finite chain, the disability model (the onset coordinate
//! is a Dirac atom at the jump time) and the random-spouse model.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::rates::RateFn;
use super::state::State;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    pub start: f64,
    pub end: f64,
}

impl Horizon {
    const SLACK: f64 = 1e-9;

    pub fn new(start: f64, end: f64) -> Self {
        Horizon { start, end }
    }

    pub fn contains(&self, t: f64) -> bool {
        let slack = Self::SLACK * self.end.abs().max(1.0);
        t >= self.start - slack && t <= self.end + slack
    }

    pub fn check(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::OutsideHorizon { t, start: self.start, end: self.end })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub target: State,
    pub rate: f64,
}

impl Atom {
    pub fn new(target: State, rate: f64) -> Self {
        Atom { target, rate }
    }
}

/// Finite probability law on the real line: `(coordinate, weight)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct WeightedSample {
    nodes: Vec<(f64, f64)>,
    cumulative: Vec<f64>,
}

impl WeightedSample {
    pub const WEIGHT_TOLERANCE: f64 = 1e-12;

    pub fn new(nodes: Vec<(f64, f64)>) -> std::result::Result<Self, String> {
        if nodes.is_empty() {
            return Err("weighted sample has no nodes".into());
        }
        if nodes.iter().any(|&(x, w)| !x.is_finite() || !w.is_finite() || w < 0.0) {
            return Err("weighted sample needs finite coordinates and non-negative weights".into());
        }
        let total: f64 = nodes.iter().map(|n| n.1).sum();
        if (total - 1.0).abs() > Self::WEIGHT_TOLERANCE {
            return Err(format!("weights sum to {total}, expected 1"));
        }
        let cumulative = nodes
            .iter()
            .scan(0.0, |acc, n| {
                *acc += n.1;
                Some(*acc)
            })
            .collect();
        Ok(WeightedSample { nodes, cumulative })
    }

    pub fn point(x: f64) -> Self {
        WeightedSample::new(vec![(x, 1.0)]).expect("single node")
    }

    pub fn nodes(&self) -> &[(f64, f64)] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node index for a uniform draw `u` in `[0, 1)`.
    pub fn select(&self, u: f64) -> usize {
        let total = *self.cumulative.last().unwrap();
        self.cumulative.partition_point(|&c| c <= u * total).min(self.nodes.len() - 1)
    }
}

impl TryFrom<Vec<(f64, f64)>> for WeightedSample {
    type Error = String;
    fn try_from(nodes: Vec<(f64, f64)>) -> std::result::Result<Self, String> {
        WeightedSample::new(nodes)
    }
}

impl From<WeightedSample> for Vec<(f64, f64)> {
    fn from(s: WeightedSample) -> Self {
        s.nodes
    }
}

/// The coordinate families a continuous kernel part can target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContinuousFamily {
    DeadWithSpouse,
}

impl ContinuousFamily {
    pub fn state(&self, coord: f64) -> State {
        match self {
            ContinuousFamily::DeadWithSpouse => State::DeadWithSpouse { age_diff: coord },
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContinuousPart {
    pub family: ContinuousFamily,
    pub law: Arc<WeightedSample>,
    /// `q_t(x, family)`, per year.
    pub total_mass: f64,
}

pub trait IntensityKernel: Send + Sync {
    fn horizon(&self) -> Horizon;

    /// Point masses of `q_t(x, ·)`. Never targets `x` itself.
    fn atoms(&self, t: f64, x: &State) -> Vec<Atom>;

    fn continuous_part(&self, _t: f64, _x: &State) -> Option<ContinuousPart> {
        None
    }

    fn description(&self) -> String;

    /// Time-only basis functions `f_i(t) >= 0` such that, for states
    /// reported by [`hazard_weights`](Self::hazard_weights),
    /// `λ_t(x) = Σ_i c_i(x) f_i(t)`. The simulator tabulates cumulative
    /// integrals of these once and inverts them per jump.
    fn hazard_basis(&self) -> Vec<RateFn> {
        Vec::new()
    }

    /// Coefficients `(i, c_i(x))` of `λ_t(x)` in [`hazard_basis`](Self::hazard_basis), or
    /// `None` when `x` has no such decomposition.
    fn hazard_weights(&self, _x: &State) -> Option<Vec<(usize, f64)>> {
        None
    }
}

impl<K: IntensityKernel + ?Sized> IntensityKernel for Arc<K> {
    fn horizon(&self) -> Horizon {
        (**self).horizon()
    }
    fn atoms(&self, t: f64, x: &State) -> Vec<Atom> {
        (**self).atoms(t, x)
    }
    fn continuous_part(&self, t: f64, x: &State) -> Option<ContinuousPart> {
        (**self).continuous_part(t, x)
    }
    fn description(&self) -> String {
        (**self).description()
    }
    fn hazard_basis(&self) -> Vec<RateFn> {
        (**self).hazard_basis()
    }
    fn hazard_weights(&self, x: &State) -> Option<Vec<(usize, f64)>> {
        (**self).hazard_weights(x)
    }
}

impl<K: IntensityKernel + ?Sized> IntensityKernel for &K {
    fn horizon(&self) -> Horizon {
        (**self).horizon()
    }
    fn atoms(&self, t: f64, x: &State) -> Vec<Atom> {
        (**self).atoms(t, x)
    }
    fn continuous_part(&self, t: f64, x: &State) -> Option<ContinuousPart> {
        (**self).continuous_part(t, x)
    }
    fn description(&self) -> String {
        (**self).description()
    }
    fn hazard_basis(&self) -> Vec<RateFn> {
        (**self).hazard_basis()
    }
    fn hazard_weights(&self, x: &State) -> Option<Vec<(usize, f64)>> {
        (**self).hazard_weights(x)
    }
}

/// `λ_t(x) = q_t(x, S \ {x})`
pub fn total_rate<K: IntensityKernel + ?Sized>(kernel: &K, t: f64, x: &State) -> Result<f64> {
    kernel.horizon().check(t)?;
    let atoms: f64 = kernel.atoms(t, x).iter().map(|a| a.rate).sum();
    let cont = kernel.continuous_part(t, x).map_or(0.0, |c| c.total_mass);
    let total = atoms + cont;
    if !total.is_finite() {
        return Err(Error::NonFinite { t, state: x.to_string() });
    }
    Ok(total)
}

/// Kernel with every intensity multiplied by a constant factor.
pub struct ScaledKernel<K> {
    pub inner: K,
    pub factor: f64,
}

impl<K: IntensityKernel> IntensityKernel for ScaledKernel<K> {
    fn horizon(&self) -> Horizon {
        self.inner.horizon()
    }
    fn atoms(&self, t: f64, x: &State) -> Vec<Atom> {
        let mut atoms = self.inner.atoms(t, x);
        for a in &mut atoms {
            a.rate *= self.factor;
        }
        atoms
    }
    fn continuous_part(&self, t: f64, x: &State) -> Option<ContinuousPart> {
        self.inner.continuous_part(t, x).map(|mut c| {
            c.total_mass *= self.factor;
            c
        })
    }
    fn description(&self) -> String {
        format!("{} (intensities x{})", self.inner.description(), self.factor)
    }
    fn hazard_basis(&self) -> Vec<RateFn> {
        self.inner.hazard_basis()
    }
    fn hazard_weights(&self, x: &State) -> Option<Vec<(usize, f64)>> {
        self.inner.hazard_weights(x).map(|w| w.into_iter().map(|(i, c)| (i, c * self.factor)).collect())
    }
}

/// A defect found by [`kernel_problems`]. Negative rates are not fatal
/// (they can be harmless outside the states actually visited); non-finite
/// values and self-targets are.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelProblem {
    pub fatal: bool,
    pub message: String,
}

/// Sign, finiteness and self-loop checks of `kernel` at the given `(t, x)`
/// points. Only the first problem of each kind per transition (by label) is
/// reported, in the order of `points`.
pub fn kernel_problems<K: IntensityKernel + ?Sized>(kernel: &K, points: &[(f64, State)]) -> Vec<KernelProblem> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut push = |kind: u8, from: &State, to: Option<&State>, fatal, message| {
        if seen.insert((kind, from.label(), to.map(State::label))) {
            out.push(KernelProblem { fatal, message });
        }
    };
    for (t, x) in points {
        for a in kernel.atoms(*t, x) {
            if a.target == *x {
                push(0, x, Some(&a.target), true, format!("kernel at t = {t} charges the current state {x}"));
            }
            if !a.rate.is_finite() {
                push(1, x, Some(&a.target), true, format!("rate {x} -> {} is not finite at t = {t}", a.target));
            } else if a.rate < 0.0 {
                let msg = format!("rate {x} -> {} is negative ({:.6}) at t = {t}", a.target, a.rate);
                push(2, x, Some(&a.target), false, msg);
            }
        }
        if let Some(c) = kernel.continuous_part(*t, x) {
            if !c.total_mass.is_finite() {
                push(1, x, None, true, format!("continuous mass out of {x} is not finite at t = {t}"));
            } else if c.total_mass < 0.0 {
                let msg = format!("continuous mass out of {x} is negative ({:.6}) at t = {t}", c.total_mass);
                push(2, x, None, false, msg);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    struct TwoAtoms;

    impl IntensityKernel for TwoAtoms {
        fn horizon(&self) -> Horizon {
            Horizon::new(0.0, 10.0)
        }
        fn atoms(&self, t: f64, x: &State) -> Vec<Atom> {
            match x {
                State::Active => vec![Atom::new(State::Dead, 0.1), Atom::new(State::Discrete(1), 0.01 * t)],
                _ => Vec::new(),
            }
        }
        fn description(&self) -> String {
            "two atoms".into()
        }
    }

    #[test]
    fn total_rate_sums_atoms() {
        assert!((total_rate(&TwoAtoms, 5.0, &State::Active).unwrap() - 0.15).abs() < 1e-15);
        assert_eq!(total_rate(&TwoAtoms, 5.0, &State::Dead).unwrap(), 0.0);
    }

    #[test]
    fn total_rate_outside_horizon_is_domain_error() {
        assert!(matches!(total_rate(&TwoAtoms, 11.0, &State::Active), Err(Error::OutsideHorizon { .. })));
    }

    #[test]
    fn scaled_kernel_scales_total_rate() {
        let k = ScaledKernel { inner: TwoAtoms, factor: 2.0 };
        assert!((total_rate(&k, 5.0, &State::Active).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn negative_rate_is_a_soft_problem() {
        let k = ScaledKernel { inner: TwoAtoms, factor: -1.0 };
        let p = kernel_problems(&k, &[(1.0, State::Active), (2.0, State::Dead)]);
        assert_eq!(p.len(), 2);
        assert!(p.iter().all(|p| !p.fatal));
        assert!(kernel_problems(&TwoAtoms, &[(1.0, State::Active)]).is_empty());
    }

    #[test]
    fn weighted_sample_validation_and_selection() {
        assert!(WeightedSample::new(vec![(0.0, 0.5), (1.0, 0.4)]).is_err());
        assert!(WeightedSample::new(vec![(0.0, -0.5), (1.0, 1.5)]).is_err());
        let s = WeightedSample::new(vec![(-2.0, 0.25), (0.0, 0.5), (3.0, 0.25)]).unwrap();
        assert_eq!(s.select(0.0), 0);
        assert_eq!(s.select(0.3), 1);
        assert_eq!(s.select(0.9999), 2);
    }
}
