//! Interior (proper) time for a single process.
//!
//! A [`ProcessClock`] hands out signpost numbers from one process-global
//! monotonic counter and tracks a subtime counter per lane (one lane per
//! concurrent logical thread). Wall-clock time never participates in any
//! ordering decision here; it is carried elsewhere as display context only.

use std::collections::HashMap;
use std::sync::Mutex;

use thiserror::Error;

/// Signpost number reserved for "program start". The first real signpost of
/// every lane back-links to it.
pub const PROGRAM_START_SIGNPOST: u64 = 0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClockError {
    #[error("no such lane: {0:?}")]
    NoSuchLane(LaneId),
}

/// Opaque per-clock lane identifier. Lane 0 is the main lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LaneId(u32);

impl LaneId {
    pub const MAIN: LaneId = LaneId(0);

    pub fn index(self) -> u32 {
        self.0
    }
}

/// Counter state of one lane: the signpost it currently sits on and the
/// subtime within that signpost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaneState {
    pub lane_id: LaneId,
    pub current_signpost: u64,
    pub current_subtime: u32,
    /// Set on a freshly forked lane until its first signpost is emitted;
    /// that first signpost is the fork event ("go>" in a timeline).
    pub forked: bool,
}

/// Result of advancing a lane to a new signpost: the causal back-link pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignpostTick {
    /// The lane's previous signpost (where the causal arrow points back to).
    pub root: u64,
    /// The freshly allocated signpost number.
    pub now: u64,
    /// True when this is the first signpost of a forked lane.
    pub forked: bool,
}

struct ClockInner {
    next_signpost: u64,
    next_lane: u32,
    lanes: HashMap<LaneId, LaneState>,
}

/// Per-process interior clock. Signpost numbers are allocated from a single
/// process-global counter so that interleaved lanes produce globally unique,
/// gap-free numbers. Shareable across the threads of one process.
pub struct ProcessClock {
    process_id: String,
    inner: Mutex<ClockInner>,
}

impl ProcessClock {
    /// A fresh clock: one main lane sitting on signpost 0 ("program start"),
    /// subtime 1, with the next allocation returning 1.
    pub fn new(process_id: impl Into<String>) -> Self {
        let mut lanes = HashMap::new();
        lanes.insert(
            LaneId::MAIN,
            LaneState {
                lane_id: LaneId::MAIN,
                current_signpost: PROGRAM_START_SIGNPOST,
                current_subtime: 1,
                forked: false,
            },
        );
        ProcessClock {
            process_id: process_id.into(),
            inner: Mutex::new(ClockInner {
                next_signpost: 1,
                next_lane: 1,
                lanes,
            }),
        }
    }

    pub fn process_id(&self) -> &str {
        &self.process_id
    }

    pub fn main_lane(&self) -> LaneId {
        LaneId::MAIN
    }

    /// Snapshot of a lane's counters.
    pub fn lane(&self, lane: LaneId) -> Option<LaneState> {
        self.inner.lock().unwrap().lanes.get(&lane).cloned()
    }

    /// Move a lane to a freshly allocated signpost. Returns the back-link
    /// pair (root = the lane's previous signpost, now = the new one) and
    /// resets the lane's subtime to 1.
    pub fn advance_signpost(&self, lane: LaneId) -> Result<SignpostTick, ClockError> {
        let mut inner = self.inner.lock().unwrap();
        let now = inner.next_signpost;
        let state = inner
            .lanes
            .get_mut(&lane)
            .ok_or(ClockError::NoSuchLane(lane))?;
        let tick = SignpostTick {
            root: state.current_signpost,
            now,
            forked: state.forked,
        };
        state.current_signpost = now;
        state.current_subtime = 1;
        state.forked = false;
        inner.next_signpost += 1;
        Ok(tick)
    }

    /// Count one detail event within the lane's current signpost.
    /// Returns (now, delta) with delta = previous subtime + 1.
    pub fn tick_subtime(&self, lane: LaneId) -> Result<(u64, u32), ClockError> {
        let mut inner = self.inner.lock().unwrap();
        let state = inner
            .lanes
            .get_mut(&lane)
            .ok_or(ClockError::NoSuchLane(lane))?;
        state.current_subtime += 1;
        Ok((state.current_signpost, state.current_subtime))
    }

    /// Create a new lane forked from `parent`. The new lane remembers the
    /// parent's current signpost; its own first signpost will back-link to
    /// that value and is rendered as a fork. The signpost number itself is
    /// allocated when that first signpost is emitted, so other lanes may
    /// claim numbers in between (that is exactly the interleaving a
    /// concurrent process produces).
    pub fn fork_lane(&self, parent: LaneId) -> Result<LaneState, ClockError> {
        let mut inner = self.inner.lock().unwrap();
        let parent_signpost = inner
            .lanes
            .get(&parent)
            .ok_or(ClockError::NoSuchLane(parent))?
            .current_signpost;
        let lane_id = LaneId(inner.next_lane);
        inner.next_lane += 1;
        let state = LaneState {
            lane_id,
            current_signpost: parent_signpost,
            current_subtime: 1,
            forked: true,
        };
        inner.lanes.insert(lane_id, state.clone());
        Ok(state)
    }
}
