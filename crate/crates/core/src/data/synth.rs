//! Synthetic highway scenarios standing in for recorded data.
//!
//! Each scenario is built from explicit vehicle tracks on a straight road
//! with `lanes` parallel lanes, lane 1 leftmost. Lane-keep targets hold their
//! lateral position; lane-change targets follow a cosine ramp that starts
//! inside the observation window and crosses the lane boundary within the
//! labeling horizon. Neighbors drive at constant velocity. The stored class
//! is always recomputed from the generated target track.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::highd::{scenario_from_tracks, NeighborRole};
use super::label::{label_scenario, LABEL_HORIZON};
use super::track::{Direction, Track, TrackPoint};
use super::{BehaviorClass, Dataset, Scenario, SplitTag, FRAME_RATE_HZ, NUM_CLASSES, T_OBS};
use crate::error::{Error, Result};
use crate::rng;

const TRACK_FRAMES: usize = T_OBS + LABEL_HORIZON;
const CHANGE_START: (f64, f64) = (45.0, 60.0);
const CHANGE_DURATION: (f64, f64) = (90.0, 100.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Scenario counts in class order (lcl, kl, lcr).
    pub per_class: [usize; NUM_CLASSES],
    pub lanes: u32,
    pub lane_width: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    /// Probability that each of the eight neighbor roles is occupied.
    pub neighbor_probability: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            per_class: [100, 100, 100],
            lanes: 3,
            lane_width: 3.75,
            speed_min: 22.0,
            speed_max: 36.0,
            neighbor_probability: 0.5,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.per_class.iter().any(|&n| n == 0) {
            return Err(Error::Config(format!(
                "per-class scenario counts must be positive, got {:?}",
                self.per_class
            )));
        }
        validate_road(self.lanes, self.lane_width, self.speed_min, self.speed_max)?;
        if !(0.0..=1.0).contains(&self.neighbor_probability) {
            return Err(Error::Config("neighbor_probability must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Scenarios drawn around `clusters` random prototypes; cluster `k` carries
/// class `k mod 3` in (lcl, kl, lcr) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteredSynthConfig {
    pub clusters: usize,
    pub per_cluster: usize,
    pub lanes: u32,
    pub lane_width: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    /// Scale of member perturbations around their prototype.
    pub jitter: f64,
}

impl Default for ClusteredSynthConfig {
    fn default() -> Self {
        Self {
            clusters: 64,
            per_cluster: 12,
            lanes: 3,
            lane_width: 3.75,
            speed_min: 22.0,
            speed_max: 36.0,
            jitter: 1.0,
        }
    }
}

impl ClusteredSynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 || self.per_cluster == 0 {
            return Err(Error::Config("clusters and per_cluster must be positive".into()));
        }
        if !(self.jitter >= 0.0) {
            return Err(Error::Config("jitter must be non-negative".into()));
        }
        validate_road(self.lanes, self.lane_width, self.speed_min, self.speed_max)
    }
}

fn validate_road(lanes: u32, lane_width: f64, speed_min: f64, speed_max: f64) -> Result<()> {
    if lanes < 3 {
        return Err(Error::Config("at least 3 lanes are needed for both lane changes".into()));
    }
    if !(lane_width > 0.0) {
        return Err(Error::Config("lane_width must be positive".into()));
    }
    if !(speed_min > 0.0 && speed_max > speed_min) {
        return Err(Error::Config("speed range must satisfy 0 < speed_min < speed_max".into()));
    }
    Ok(())
}

/// A generated scenario together with the tracks it was cut from.
#[derive(Debug, Clone)]
pub struct SynthSample {
    pub scenario: Scenario,
    pub target: Track,
    pub neighbors: Vec<(NeighborRole, Track)>,
    pub cluster: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
struct NeighborRecipe {
    dx: f64,
    dv: f64,
    offset: f64,
}

#[derive(Debug, Clone)]
struct Recipe {
    class: BehaviorClass,
    lane: i32,
    offset: f64,
    speed: f64,
    x0: f64,
    change_start: f64,
    change_duration: f64,
    neighbors: [Option<NeighborRecipe>; 8],
}

struct Road {
    lanes: u32,
    lane_width: f64,
}

impl Road {
    fn center(&self, lane: i32) -> f64 {
        (lane as f64 - 0.5) * self.lane_width
    }

    fn lane_of(&self, y: f64) -> i32 {
        (y / self.lane_width).floor() as i32 + 1
    }

    fn lane_exists(&self, lane: i32) -> bool {
        lane >= 1 && lane <= self.lanes as i32
    }

    fn target_lane(&self, class: BehaviorClass, rng: &mut ChaCha8Rng) -> i32 {
        let (lo, hi) = match class {
            BehaviorClass::LaneChangeLeft => (2, self.lanes as i32),
            BehaviorClass::LaneKeep => (1, self.lanes as i32),
            BehaviorClass::LaneChangeRight => (1, self.lanes as i32 - 1),
        };
        rng.random_range(lo..=hi)
    }
}

fn neighbor_dx(role: NeighborRole, rng: &mut ChaCha8Rng) -> f64 {
    use NeighborRole::*;
    match role {
        FrontSame | FrontLeft | FrontRight => rng.random_range(15.0..60.0),
        RearSame | RearLeft | RearRight => rng.random_range(-60.0..-15.0),
        AlongsideLeft | AlongsideRight => rng.random_range(-4.0..4.0),
    }
}

fn random_recipe(road: &Road, class: BehaviorClass, speed: (f64, f64), p_neighbor: f64, rng: &mut ChaCha8Rng) -> Recipe {
    let lane = road.target_lane(class, rng);
    let mut neighbors = [None; 8];
    for role in NeighborRole::ALL {
        let occupied = rng.random_bool(p_neighbor);
        if occupied && road.lane_exists(lane + role.lane_offset()) {
            neighbors[role.slot() - 1] = Some(NeighborRecipe {
                dx: neighbor_dx(role, rng),
                dv: rng.random_range(-3.0..3.0),
                offset: rng.random_range(-0.3..0.3),
            });
        }
    }
    Recipe {
        class,
        lane,
        offset: rng.random_range(-0.4..0.4),
        speed: rng.random_range(speed.0..speed.1),
        x0: rng.random_range(0.0..400.0),
        change_start: rng.random_range(CHANGE_START.0..CHANGE_START.1),
        change_duration: rng.random_range(CHANGE_DURATION.0..CHANGE_DURATION.1),
        neighbors,
    }
}

fn perturb(proto: &Recipe, jitter: f64, rng: &mut ChaCha8Rng) -> Recipe {
    let mut noise = |scale: f64| -> f64 {
        if jitter == 0.0 {
            0.0
        } else {
            rng.random_range(-scale * jitter..=scale * jitter)
        }
    };
    let mut r = proto.clone();
    r.offset = (r.offset + noise(0.05)).clamp(-0.45, 0.45);
    r.speed += noise(0.3);
    r.x0 += noise(50.0);
    r.change_start = (r.change_start + noise(2.0)).clamp(CHANGE_START.0, CHANGE_START.1);
    r.change_duration = (r.change_duration + noise(2.0)).clamp(CHANGE_DURATION.0, CHANGE_DURATION.1);
    for n in r.neighbors.iter_mut().flatten() {
        n.dx += noise(1.0);
        n.dv += noise(0.2);
        n.offset += noise(0.05);
    }
    r
}

fn straight_track(id: u32, x0: f64, y: f64, speed: f64, road: &Road) -> Track {
    let lane = road.lane_of(y);
    Track {
        id,
        direction: Direction::Right,
        points: (0..TRACK_FRAMES)
            .map(|f| TrackPoint {
                frame: f as i64,
                x: x0 + speed * f as f64 / FRAME_RATE_HZ,
                y,
                vx: speed,
                vy: 0.0,
                lane,
            })
            .collect(),
    }
}

fn realize(recipe: &Recipe, road: &Road, cluster: Option<usize>) -> Result<SynthSample> {
    let y0 = road.center(recipe.lane) + recipe.offset;
    let shift = match recipe.class {
        BehaviorClass::LaneChangeLeft => -road.lane_width,
        BehaviorClass::LaneKeep => 0.0,
        BehaviorClass::LaneChangeRight => road.lane_width,
    };
    let (s, d) = (recipe.change_start, recipe.change_duration);
    let target = Track {
        id: 0,
        direction: Direction::Right,
        points: (0..TRACK_FRAMES)
            .map(|f| {
                let u = ((f as f64 - s) / d).clamp(0.0, 1.0);
                let ramp = 0.5 * (1.0 - (std::f64::consts::PI * u).cos());
                let vy = if u > 0.0 && u < 1.0 {
                    shift * 0.5 * std::f64::consts::PI * (std::f64::consts::PI * u).sin() / d * FRAME_RATE_HZ
                } else {
                    0.0
                };
                let y = y0 + shift * ramp;
                TrackPoint {
                    frame: f as i64,
                    x: recipe.x0 + recipe.speed * f as f64 / FRAME_RATE_HZ,
                    y,
                    vx: recipe.speed,
                    vy,
                    lane: road.lane_of(y),
                }
            })
            .collect(),
    };

    let mut neighbors = Vec::new();
    for role in NeighborRole::ALL {
        if let Some(n) = recipe.neighbors[role.slot() - 1] {
            let lane = recipe.lane + role.lane_offset();
            let y = road.center(lane) + n.offset;
            let track = straight_track(role.slot() as u32, recipe.x0 + n.dx, y, recipe.speed + n.dv, road);
            neighbors.push((role, track));
        }
    }

    let class = label_scenario(&target, T_OBS as i64 - 1)
        .ok_or_else(|| Error::Invalid("synthetic target track shorter than labeling horizon".into()))?;
    if class != recipe.class {
        return Err(Error::Invalid(format!(
            "synthetic track labeled {class} but generated as {}",
            recipe.class
        )));
    }
    let mut by_role: [Option<&Track>; 8] = [None; 8];
    for (role, track) in &neighbors {
        by_role[role.slot() - 1] = Some(track);
    }
    let scenario = scenario_from_tracks(&target, &by_role, 0, class)
        .ok_or_else(|| Error::Invalid("synthetic target does not cover the window".into()))?;
    Ok(SynthSample {
        scenario,
        target,
        neighbors,
        cluster,
    })
}

/// Generates `per_class` scenarios for each class, class-blocked in
/// (lcl, kl, lcr) order, keeping the source tracks.
pub fn synth_generate_with_tracks(config: &SynthConfig, seed: u64) -> Result<Vec<SynthSample>> {
    config.validate()?;
    let road = Road {
        lanes: config.lanes,
        lane_width: config.lane_width,
    };
    let mut rng = rng::seeded(seed, rng::stream::SYNTH);
    let mut out = Vec::with_capacity(config.per_class.iter().sum());
    for class in BehaviorClass::ALL {
        for _ in 0..config.per_class[class.index()] {
            let recipe = random_recipe(
                &road,
                class,
                (config.speed_min, config.speed_max),
                config.neighbor_probability,
                &mut rng,
            );
            out.push(realize(&recipe, &road, None)?);
        }
    }
    Ok(out)
}

pub fn synth_generate(config: &SynthConfig, seed: u64) -> Result<Dataset> {
    Ok(into_dataset(synth_generate_with_tracks(config, seed)?))
}

/// Generates `clusters × per_cluster` scenarios, cluster-blocked.
pub fn synth_clustered(config: &ClusteredSynthConfig, seed: u64) -> Result<Vec<SynthSample>> {
    config.validate()?;
    let road = Road {
        lanes: config.lanes,
        lane_width: config.lane_width,
    };
    let mut rng = rng::seeded(seed, rng::stream::SYNTH);
    let mut out = Vec::with_capacity(config.clusters * config.per_cluster);
    for k in 0..config.clusters {
        let class = BehaviorClass::ALL[k % NUM_CLASSES];
        let proto = random_recipe(&road, class, (config.speed_min, config.speed_max), 0.5, &mut rng);
        for _ in 0..config.per_cluster {
            let member = perturb(&proto, config.jitter, &mut rng);
            out.push(realize(&member, &road, Some(k))?);
        }
    }
    Ok(out)
}

pub fn into_dataset(samples: Vec<SynthSample>) -> Dataset {
    Dataset::new(samples.into_iter().map(|s| s.scenario).collect(), SplitTag::All)
}
