use super::track::Track;
use super::BehaviorClass;

/// Frames after the observation window inspected for a lane change (2 s).
pub const LABEL_HORIZON: usize = 50;

/// Future-behavior label for a window ending (inclusive) at `window_end`.
///
/// Returns `None` when the track does not extend `LABEL_HORIZON` frames past
/// the window end. Lane ids are read in the direction-normalized sense: a
/// decrease is a move to the left.
pub fn label_scenario(target: &Track, window_end: i64) -> Option<BehaviorClass> {
    let start = target.at(window_end)?;
    let horizon_end = window_end + LABEL_HORIZON as i64;
    if !target.covers(window_end, horizon_end) {
        return None;
    }
    let sign = target.direction.lane_sign();
    for frame in window_end + 1..=horizon_end {
        let lane = target.at(frame)?.lane;
        if lane != start.lane {
            return Some(if (lane - start.lane) * sign < 0 {
                BehaviorClass::LaneChangeLeft
            } else {
                BehaviorClass::LaneChangeRight
            });
        }
    }
    Some(BehaviorClass::LaneKeep)
}
