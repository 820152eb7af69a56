//! Scenario types and dataset preparation.
//!
//! A [`Scenario`] is a fixed `N_MAX × F × T_OBS` grid: slot 0 is the target
//! vehicle, slots 1..9 hold up to eight neighbors by spatial role. Values are
//! laid out slot-major, then feature, then time step.

pub mod highd;
pub mod io;
pub mod label;
pub mod prep;
pub mod synth;
pub mod track;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use label::{label_scenario, LABEL_HORIZON};
pub use prep::{balance_dataset, split, transform_to_target_frame, Normalization};
pub use track::{Direction, Track, TrackPoint};

/// Vehicle slots per scenario (target plus eight neighbors).
pub const N_MAX: usize = 9;
/// Features per vehicle and time step: x, y, vx, vy.
pub const FEATURES: usize = 4;
/// Observed time steps (3 s at 25 Hz).
pub const T_OBS: usize = 75;
/// Flattened scenario length.
pub const SCENARIO_LEN: usize = N_MAX * FEATURES * T_OBS;
/// Number of future-behavior classes.
pub const NUM_CLASSES: usize = 3;
pub const FRAME_RATE_HZ: f64 = 25.0;

pub const FEAT_X: usize = 0;
pub const FEAT_Y: usize = 1;
pub const FEAT_VX: usize = 2;
pub const FEAT_VY: usize = 3;

#[inline]
pub fn grid_index(slot: usize, feature: usize, t: usize) -> usize {
    (slot * FEATURES + feature) * T_OBS + t
}

/// Future behavior of the target vehicle. The declaration order is the class
/// ordering used for one-hot vectors, confusion matrices and CSV columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BehaviorClass {
    #[serde(rename = "lcl")]
    LaneChangeLeft,
    #[serde(rename = "kl")]
    LaneKeep,
    #[serde(rename = "lcr")]
    LaneChangeRight,
}

impl BehaviorClass {
    pub const ALL: [BehaviorClass; NUM_CLASSES] = [
        BehaviorClass::LaneChangeLeft,
        BehaviorClass::LaneKeep,
        BehaviorClass::LaneChangeRight,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn short_name(self) -> &'static str {
        match self {
            BehaviorClass::LaneChangeLeft => "lcl",
            BehaviorClass::LaneKeep => "kl",
            BehaviorClass::LaneChangeRight => "lcr",
        }
    }

    pub fn one_hot(self) -> [f64; NUM_CLASSES] {
        let mut v = [0.0; NUM_CLASSES];
        v[self.index()] = 1.0;
        v
    }

    /// Inverse of [`one_hot`](Self::one_hot); rejects anything that is not
    /// exactly one active entry.
    pub fn from_one_hot(v: &[f64]) -> Result<Self> {
        if v.len() != NUM_CLASSES {
            return Err(Error::DimensionMismatch {
                expected: NUM_CLASSES,
                actual: v.len(),
            });
        }
        let active: Vec<usize> = (0..NUM_CLASSES).filter(|&i| v[i] == 1.0).collect();
        let rest_zero = (0..NUM_CLASSES).all(|i| v[i] == 1.0 || v[i] == 0.0);
        match (active.as_slice(), rest_zero) {
            ([i], true) => Ok(Self::ALL[*i]),
            _ => Err(Error::Invalid(format!("not a one-hot class vector: {v:?}"))),
        }
    }
}

impl fmt::Display for BehaviorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for BehaviorClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lcl" => Ok(BehaviorClass::LaneChangeLeft),
            "kl" => Ok(BehaviorClass::LaneKeep),
            "lcr" => Ok(BehaviorClass::LaneChangeRight),
            other => Err(Error::Invalid(format!("unknown behavior class '{other}'"))),
        }
    }
}

/// One observed traffic situation.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    values: Vec<f64>,
    presence: [bool; N_MAX],
    class: BehaviorClass,
}

impl Scenario {
    /// Builds a scenario, enforcing shape, finiteness, target presence and
    /// zero-filled absent slots.
    pub fn new(values: Vec<f64>, presence: [bool; N_MAX], class: BehaviorClass) -> Result<Self> {
        if values.len() != SCENARIO_LEN {
            return Err(Error::DimensionMismatch {
                expected: SCENARIO_LEN,
                actual: values.len(),
            });
        }
        if !presence[0] {
            return Err(Error::InvalidScenario("target slot 0 must be present".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidScenario(format!("non-finite value at flat index {i}")));
        }
        for (slot, &present) in presence.iter().enumerate() {
            if !present {
                let start = grid_index(slot, 0, 0);
                if values[start..start + FEATURES * T_OBS].iter().any(|&v| v != 0.0) {
                    return Err(Error::InvalidScenario(format!(
                        "absent slot {slot} is not zero-filled"
                    )));
                }
            }
        }
        Ok(Self {
            values,
            presence,
            class,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn presence(&self) -> &[bool; N_MAX] {
        &self.presence
    }

    pub fn class(&self) -> BehaviorClass {
        self.class
    }

    pub fn get(&self, slot: usize, feature: usize, t: usize) -> f64 {
        self.values[grid_index(slot, feature, t)]
    }

    pub fn present_count(&self) -> usize {
        self.presence.iter().filter(|&&p| p).count()
    }

    /// Presence flags packed into the low nine bits, slot 0 in bit 0.
    pub fn presence_mask(&self) -> u16 {
        self.presence
            .iter()
            .enumerate()
            .fold(0u16, |m, (i, &p)| if p { m | (1 << i) } else { m })
    }

    pub(crate) fn presence_from_mask(mask: u16) -> [bool; N_MAX] {
        std::array::from_fn(|i| mask & (1 << i) != 0)
    }

    /// Applies `f(slot, feature, value)` to every value of every present slot.
    pub(crate) fn map_present(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Scenario {
        let mut values = self.values.clone();
        for slot in (0..N_MAX).filter(|&s| self.presence[s]) {
            for feature in 0..FEATURES {
                for t in 0..T_OBS {
                    let i = grid_index(slot, feature, t);
                    values[i] = f(slot, feature, values[i]);
                }
            }
        }
        Scenario {
            values,
            presence: self.presence,
            class: self.class,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    /// Not yet split.
    All,
    Train,
    Test,
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitTag::All => "all",
            SplitTag::Train => "train",
            SplitTag::Test => "test",
        })
    }
}

/// Ordered collection of scenarios plus the normalization statistics fitted
/// on the training split, once known. Dataset files hold physical units;
/// [`Dataset::normalized`] produces the copy the model consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub scenarios: Vec<Scenario>,
    pub split: SplitTag,
    pub normalization: Option<Normalization>,
}

impl Dataset {
    pub fn new(scenarios: Vec<Scenario>, split: SplitTag) -> Self {
        Self {
            scenarios,
            split,
            normalization: None,
        }
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for s in &self.scenarios {
            counts[s.class().index()] += 1;
        }
        counts
    }

    pub fn labels(&self) -> Vec<BehaviorClass> {
        self.scenarios.iter().map(Scenario::class).collect()
    }

    /// Copy with every scenario standardized by `norm`.
    pub fn normalized(&self, norm: &Normalization) -> Dataset {
        Dataset {
            scenarios: self.scenarios.iter().map(|s| norm.apply(s)).collect(),
            split: self.split,
            normalization: Some(*norm),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blank() -> Vec<f64> {
        vec![0.0; SCENARIO_LEN]
    }

    #[test]
    fn one_hot_round_trip() {
        for c in BehaviorClass::ALL {
            assert_eq!(BehaviorClass::from_one_hot(&c.one_hot()).unwrap(), c);
        }
        assert!(BehaviorClass::from_one_hot(&[1.0, 1.0, 0.0]).is_err());
        assert!(BehaviorClass::from_one_hot(&[0.0, 0.0, 0.0]).is_err());
        assert!(BehaviorClass::from_one_hot(&[0.5, 0.5, 0.0]).is_err());
    }

    #[test]
    fn class_order_is_lcl_kl_lcr() {
        let names: Vec<_> = BehaviorClass::ALL.iter().map(|c| c.short_name()).collect();
        assert_eq!(names, ["lcl", "kl", "lcr"]);
    }

    #[test]
    fn scenario_rejects_missing_target() {
        let mut presence = [false; N_MAX];
        presence[1] = true;
        let err = Scenario::new(blank(), presence, BehaviorClass::LaneKeep);
        assert!(matches!(err, Err(Error::InvalidScenario(_))));
    }

    #[test]
    fn scenario_rejects_bad_shape_and_nan() {
        let mut presence = [false; N_MAX];
        presence[0] = true;
        assert!(Scenario::new(vec![0.0; 10], presence, BehaviorClass::LaneKeep).is_err());
        let mut v = blank();
        v[3] = f64::NAN;
        assert!(Scenario::new(v, presence, BehaviorClass::LaneKeep).is_err());
    }

    #[test]
    fn scenario_rejects_nonzero_absent_slot() {
        let mut presence = [false; N_MAX];
        presence[0] = true;
        let mut v = blank();
        v[grid_index(4, FEAT_VX, 10)] = 1.0;
        assert!(Scenario::new(v, presence, BehaviorClass::LaneKeep).is_err());
    }

    #[test]
    fn presence_mask_round_trip() {
        let presence = [true, false, true, false, false, false, false, false, true];
        let s = Scenario::new(vec![0.0; SCENARIO_LEN], presence, BehaviorClass::LaneKeep).unwrap();
        assert_eq!(Scenario::presence_from_mask(s.presence_mask()), presence);
        assert_eq!(s.present_count(), 3);
    }
}
