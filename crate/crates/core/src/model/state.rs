//! Points of the hybrid state space.
//!
//! Purely discrete labels carry no coordinate. The two labels that live on a
//! continuum carry one real coordinate each: the disability onset time for
//! `Disabled`, and the insured/spouse age difference for `DeadWithSpouse`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// The tag of a state, with any continuous coordinate dropped. Written as
/// `active`, `disabled`, `dead`, `spouse` or a bare index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateLabel {
    Active,
    Disabled,
    Dead,
    DeadWithSpouse,
    Discrete(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum State {
    /// `*`
    Active,
    /// `(◇, onset)`: disabled since the given time.
    Disabled { onset: f64 },
    /// `†`
    Dead,
    /// `(†, d)`: insured dead, survived by a spouse with age difference `d`
    /// (insured age minus spouse age).
    DeadWithSpouse { age_diff: f64 },
    /// A state of a finite chain.
    Discrete(usize),
}

impl State {
    pub fn label(&self) -> StateLabel {
        match self {
            State::Active => StateLabel::Active,
            State::Disabled { .. } => StateLabel::Disabled,
            State::Dead => StateLabel::Dead,
            State::DeadWithSpouse { .. } => StateLabel::DeadWithSpouse,
            State::Discrete(i) => StateLabel::Discrete(*i),
        }
    }

    pub fn coord(&self) -> Option<f64> {
        match self {
            State::Disabled { onset } => Some(*onset),
            State::DeadWithSpouse { age_diff } => Some(*age_diff),
            _ => None,
        }
    }

    /// Checks the coordinate constraints. `t` is the time at which the state
    /// is occupied, when one is in context.
    pub fn check(&self, t: Option<f64>) -> Result<(), String> {
        match *self {
            State::Disabled { onset } => {
                if !onset.is_finite() || onset < 0.0 {
                    return Err(format!("disability onset {onset} must be finite and >= 0"));
                }
                if let Some(t) = t {
                    if onset > t + 1e-9 {
                        return Err(format!("disability onset {onset} lies after time {t}"));
                    }
                }
                Ok(())
            }
            State::DeadWithSpouse { age_diff } if !age_diff.is_finite() => {
                Err(format!("spouse age difference {age_diff} must be finite"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            State::Active => f.write_str("active"),
            State::Disabled { onset } => write!(f, "disabled:{onset}"),
            State::Dead => f.write_str("dead"),
            State::DeadWithSpouse { age_diff } => write!(f, "spouse:{age_diff}"),
            State::Discrete(i) => write!(f, "{i}"),
        }
    }
}

impl FromStr for State {
    type Err = Error;

    /// Parses the `Display` form: `active`, `dead`, `disabled:<onset>`,
    /// `spouse:<age diff>`, or a bare index for a discrete state.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || Error::Invalid(format!("unrecognised state `{s}`"));
        let coord = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
        let s = s.trim();
        let state = match s.split_once(':') {
            Some(("disabled", v)) => State::Disabled { onset: coord(v)? },
            Some(("spouse", v)) => State::DeadWithSpouse { age_diff: coord(v)? },
            Some(_) => return Err(bad()),
            None => match s {
                "active" | "*" => State::Active,
                "dead" => State::Dead,
                _ => State::Discrete(s.parse().map_err(|_| bad())?),
            },
        };
        state.check(None).map_err(Error::Invalid)?;
        Ok(state)
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateLabel::Active => f.write_str("active"),
            StateLabel::Disabled => f.write_str("disabled"),
            StateLabel::Dead => f.write_str("dead"),
            StateLabel::DeadWithSpouse => f.write_str("spouse"),
            StateLabel::Discrete(i) => write!(f, "{i}"),
        }
    }
}

impl FromStr for StateLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim() {
            "active" | "*" => StateLabel::Active,
            "disabled" => StateLabel::Disabled,
            "dead" => StateLabel::Dead,
            "spouse" => StateLabel::DeadWithSpouse,
            other => StateLabel::Discrete(
                other.parse().map_err(|_| Error::Invalid(format!("unrecognised state label `{s}`")))?,
            ),
        })
    }
}

/// JSON form of states and labels: a string, or a bare index for discrete states.
#[derive(Deserialize)]
#[serde(untagged)]
enum Repr {
    Index(usize),
    Text(String),
}

impl Serialize for StateLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            StateLabel::Discrete(i) => serializer.serialize_u64(*i as u64),
            other => serializer.collect_str(other),
        }
    }
}

impl<'de> Deserialize<'de> for StateLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match Repr::deserialize(deserializer)? {
            Repr::Index(i) => Ok(StateLabel::Discrete(i)),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl Serialize for State {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for State {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match Repr::deserialize(deserializer)? {
            Repr::Index(i) => Ok(State::Discrete(i)),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}
