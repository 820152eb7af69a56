use serde::{Deserialize, Serialize};

/// highD `drivingDirection`: 1 drives towards negative x (upper carriageway),
/// 2 towards positive x (lower carriageway).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Left,
    Right,
}

impl Direction {
    pub fn from_highd(code: i64) -> Option<Self> {
        match code {
            1 => Some(Direction::Left),
            2 => Some(Direction::Right),
            _ => None,
        }
    }

    /// Sign that maps raw coordinates into a frame where travel is along +x
    /// and a leftward lane change decreases the lane id.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Left => -1.0,
            Direction::Right => 1.0,
        }
    }

    pub fn lane_sign(self) -> i32 {
        match self {
            Direction::Left => -1,
            Direction::Right => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub frame: i64,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub lane: i32,
}

/// One vehicle's trajectory, sorted by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u32,
    pub direction: Direction,
    pub points: Vec<TrackPoint>,
}

impl Track {
    pub fn first_frame(&self) -> Option<i64> {
        self.points.first().map(|p| p.frame)
    }

    pub fn last_frame(&self) -> Option<i64> {
        self.points.last().map(|p| p.frame)
    }

    /// Point at `frame`, located by offset from the first frame and verified,
    /// falling back to binary search when the track has gaps.
    pub fn at(&self, frame: i64) -> Option<&TrackPoint> {
        let first = self.first_frame()?;
        let off = frame.checked_sub(first)?;
        if off < 0 {
            return None;
        }
        match self.points.get(off as usize) {
            Some(p) if p.frame == frame => Some(p),
            _ => self
                .points
                .binary_search_by_key(&frame, |p| p.frame)
                .ok()
                .map(|i| &self.points[i]),
        }
    }

    /// True when every frame in `[start, end]` is present.
    pub fn covers(&self, start: i64, end: i64) -> bool {
        match (self.at(start), self.at(end)) {
            (Some(_), Some(_)) => {
                let i = self.points.binary_search_by_key(&start, |p| p.frame).unwrap();
                let j = self.points.binary_search_by_key(&end, |p| p.frame).unwrap();
                (j - i) as i64 == end - start
            }
            _ => false,
        }
    }
}
