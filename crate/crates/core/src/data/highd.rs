//! Ingestion of highD-style recordings.
//!
//! Reads `XX_tracks.csv` (columns `frame,id,x,y,xVelocity,yVelocity,laneId`,
//! others ignored) and `XX_tracksMeta.csv` (columns `id,drivingDirection`),
//! then cuts every track into 75-frame observation windows.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use super::label::{label_scenario, LABEL_HORIZON};
use super::track::{Direction, Track, TrackPoint};
use super::{
    grid_index, transform_to_target_frame, BehaviorClass, Dataset, Scenario, SplitTag, FEAT_VX,
    FEAT_VY, FEAT_X, FEAT_Y, N_MAX, SCENARIO_LEN, T_OBS,
};
use crate::error::{Error, Result};

/// Frames between consecutive window starts on the same target (1 s).
pub const WINDOW_STRIDE: usize = 25;
/// Longitudinal gap (m) below which a neighbor in an adjacent lane counts as alongside.
pub const ALONGSIDE_GAP: f64 = 5.0;

/// Spatial role of a neighbor; the discriminant plus one is its slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborRole {
    FrontSame,
    RearSame,
    FrontLeft,
    AlongsideLeft,
    RearLeft,
    FrontRight,
    AlongsideRight,
    RearRight,
}

impl NeighborRole {
    pub const ALL: [NeighborRole; 8] = [
        NeighborRole::FrontSame,
        NeighborRole::RearSame,
        NeighborRole::FrontLeft,
        NeighborRole::AlongsideLeft,
        NeighborRole::RearLeft,
        NeighborRole::FrontRight,
        NeighborRole::AlongsideRight,
        NeighborRole::RearRight,
    ];

    pub fn slot(self) -> usize {
        self as usize + 1
    }

    /// Lane offset in the direction-normalized sense (-1 left, +1 right).
    pub fn lane_offset(self) -> i32 {
        use NeighborRole::*;
        match self {
            FrontSame | RearSame => 0,
            FrontLeft | AlongsideLeft | RearLeft => -1,
            FrontRight | AlongsideRight | RearRight => 1,
        }
    }

    /// Role of a vehicle at longitudinal offset `dx` (direction-normalized)
    /// and lane offset `dlane`, if it is one of the eight tracked roles.
    pub fn classify(dx: f64, dlane: i32) -> Option<Self> {
        use NeighborRole::*;
        let ahead = dx >= 0.0;
        match dlane {
            0 if ahead => Some(FrontSame),
            0 => Some(RearSame),
            -1 if dx.abs() < ALONGSIDE_GAP => Some(AlongsideLeft),
            -1 if ahead => Some(FrontLeft),
            -1 => Some(RearLeft),
            1 if dx.abs() < ALONGSIDE_GAP => Some(AlongsideRight),
            1 if ahead => Some(FrontRight),
            1 => Some(RearRight),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub tracks: usize,
    pub windows: usize,
    pub scenarios: usize,
    pub skipped_absent_target: usize,
    pub skipped_short_horizon: usize,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: Dataset,
    pub stats: IngestStats,
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: format!("missing column '{name}'"),
    })
}

fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
    path: &Path,
) -> Result<T> {
    let line = record.position().map_or(0, |p| p.line());
    let raw = record.get(idx).ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("missing field '{name}'"),
    })?;
    raw.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("cannot parse {name} value '{raw}'"),
    })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

/// Reads `id → drivingDirection` from a tracks-meta file.
pub fn read_meta(path: &Path) -> Result<HashMap<u32, Direction>> {
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let id_col = column(&headers, "id", path)?;
    let dir_col = column(&headers, "drivingDirection", path)?;
    let mut out = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let id: u32 = parse_field(&record, id_col, "id", path)?;
        let code: i64 = parse_field(&record, dir_col, "drivingDirection", path)?;
        let dir = Direction::from_highd(code).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: record.position().map_or(0, |p| p.line()),
            message: format!("drivingDirection must be 1 or 2, got {code}"),
        })?;
        out.insert(id, dir);
    }
    Ok(out)
}

/// Reads a tracks file and groups rows into per-vehicle tracks sorted by frame.
pub fn read_tracks(path: &Path, directions: &HashMap<u32, Direction>) -> Result<Vec<Track>> {
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let cols = [
        column(&headers, "frame", path)?,
        column(&headers, "id", path)?,
        column(&headers, "x", path)?,
        column(&headers, "y", path)?,
        column(&headers, "xVelocity", path)?,
        column(&headers, "yVelocity", path)?,
        column(&headers, "laneId", path)?,
    ];
    let mut grouped: BTreeMap<u32, Vec<TrackPoint>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let id: u32 = parse_field(&record, cols[1], "id", path)?;
        let point = TrackPoint {
            frame: parse_field(&record, cols[0], "frame", path)?,
            x: parse_field(&record, cols[2], "x", path)?,
            y: parse_field(&record, cols[3], "y", path)?,
            vx: parse_field(&record, cols[4], "xVelocity", path)?,
            vy: parse_field(&record, cols[5], "yVelocity", path)?,
            lane: parse_field(&record, cols[6], "laneId", path)?,
        };
        if ![point.x, point.y, point.vx, point.vy].iter().all(|v| v.is_finite()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: record.position().map_or(0, |p| p.line()),
                message: "non-finite kinematic value".into(),
            });
        }
        grouped.entry(id).or_default().push(point);
    }
    grouped
        .into_iter()
        .map(|(id, mut points)| {
            points.sort_by_key(|p| p.frame);
            let direction = *directions.get(&id).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                message: format!("track id {id} has no entry in the meta file"),
            })?;
            Ok(Track {
                id,
                direction,
                points,
            })
        })
        .collect()
}

/// Reads both files and windows every track.
pub fn ingest_tracks(tracks_file: &Path, meta_file: &Path) -> Result<Ingested> {
    let directions = read_meta(meta_file)?;
    let tracks = read_tracks(tracks_file, &directions)?;
    Ok(windows_from_tracks(&tracks))
}

/// Assembles a scenario from a target and per-role neighbors over the window
/// `[start, start + T_OBS)`. Coordinates are mirrored for the upper
/// carriageway so every target travels along +x, then translated to the
/// target frame. Returns `None` if the target does not cover the window.
pub fn scenario_from_tracks(
    target: &Track,
    neighbors: &[Option<&Track>; 8],
    start: i64,
    class: BehaviorClass,
) -> Option<Scenario> {
    let mut values = vec![0.0; SCENARIO_LEN];
    let mut presence = [false; N_MAX];
    let sign = target.direction.sign();
    let end = start + T_OBS as i64 - 1;
    let mut fill = |slot: usize, track: &Track| -> bool {
        if !track.covers(start, end) {
            return false;
        }
        for t in 0..T_OBS {
            let p = track.at(start + t as i64).expect("covered frame");
            values[grid_index(slot, FEAT_X, t)] = sign * p.x;
            values[grid_index(slot, FEAT_Y, t)] = sign * p.y;
            values[grid_index(slot, FEAT_VX, t)] = sign * p.vx;
            values[grid_index(slot, FEAT_VY, t)] = sign * p.vy;
        }
        presence[slot] = true;
        true
    };
    if !fill(0, target) {
        return None;
    }
    for (k, n) in neighbors.iter().enumerate() {
        if let Some(track) = n {
            fill(k + 1, track);
        }
    }
    let scenario = Scenario::new(values, presence, class).ok()?;
    Some(transform_to_target_frame(&scenario))
}

/// Nearest occupant per role at the window's last observed frame, among
/// same-direction tracks that cover the whole window.
pub fn select_neighbors<'a>(
    target: &Track,
    candidates: &'a [Track],
    start: i64,
) -> [Option<&'a Track>; 8] {
    let end = start + T_OBS as i64 - 1;
    let mut best: [Option<(&Track, f64)>; 8] = [None; 8];
    let Some(tp) = target.at(end) else {
        return [None; 8];
    };
    let sign = target.direction.sign();
    let lane_sign = target.direction.lane_sign();
    for cand in candidates {
        if cand.id == target.id || cand.direction != target.direction || !cand.covers(start, end) {
            continue;
        }
        let cp = cand.at(end).expect("covered frame");
        let dx = sign * (cp.x - tp.x);
        let dlane = (cp.lane - tp.lane) * lane_sign;
        if let Some(role) = NeighborRole::classify(dx, dlane) {
            let slot = role.slot() - 1;
            if best[slot].is_none_or(|(_, d)| dx.abs() < d) {
                best[slot] = Some((cand, dx.abs()));
            }
        }
    }
    best.map(|b| b.map(|(t, _)| t))
}

/// Cuts each track into observation windows every [`WINDOW_STRIDE`] frames
/// and labels them.
pub fn windows_from_tracks(tracks: &[Track]) -> Ingested {
    let mut stats = IngestStats {
        tracks: tracks.len(),
        ..Default::default()
    };
    let mut scenarios = Vec::new();
    for target in tracks {
        let (Some(first), Some(last)) = (target.first_frame(), target.last_frame()) else {
            continue;
        };
        let mut start = first;
        while start + T_OBS as i64 - 1 <= last {
            stats.windows += 1;
            let end = start + T_OBS as i64 - 1;
            if !target.covers(start, end) {
                stats.skipped_absent_target += 1;
            } else if let Some(class) = label_scenario(target, end) {
                let neighbors = select_neighbors(target, tracks, start);
                match scenario_from_tracks(target, &neighbors, start, class) {
                    Some(s) => scenarios.push(s),
                    None => stats.skipped_absent_target += 1,
                }
            } else {
                stats.skipped_short_horizon += 1;
            }
            start += WINDOW_STRIDE as i64;
        }
    }
    stats.scenarios = scenarios.len();
    if stats.skipped_short_horizon > 0 {
        log::debug!(
            "{} windows lacked the {LABEL_HORIZON}-frame labeling horizon",
            stats.skipped_short_horizon
        );
    }
    Ingested {
        dataset: Dataset::new(scenarios, SplitTag::All),
        stats,
    }
}
