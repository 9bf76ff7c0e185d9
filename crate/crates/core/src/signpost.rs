//! Instrumentation API: signpost markers with builder-style annotations.
//!
//! A [`Tracer`] owns one process clock and one journal. Code marks
//! significant events with [`Tracer::signpost`] and decorates the returned
//! handle with details; each annotation becomes exactly one journal record
//! tagged with the relation kind the concept builder will turn into an edge.

use std::sync::Mutex;

use thiserror::Error;

use crate::journal::{AnnotationKind, DetailClass, Event, Journal, JournalError, Timestamp};
use crate::proper_time::{ClockError, LaneId, ProcessClock};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Clock(#[from] ClockError),
    #[error(transparent)]
    Journal(#[from] JournalError),
    #[error("stale handle: lane moved past signpost {signpost} (now at {current})")]
    StaleHandle { signpost: u64, current: u64 },
    #[error("empty annotation")]
    EmptyAnnotation,
    #[error("namespace required")]
    NamespaceRequired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimestampMode {
    /// Capture the wall clock at each event (context only).
    Wall,
    /// Fixed timestamp; journals become byte-identical across runs.
    Fixed,
}

/// Owns the clock and journal of one instrumented process.
pub struct Tracer {
    clock: ProcessClock,
    journal: Mutex<Journal>,
    mode: TimestampMode,
}

impl Tracer {
    pub fn new(process: &str, pid: &str) -> Self {
        Tracer::with_mode(process, pid, TimestampMode::Wall)
    }

    pub fn with_mode(process: &str, pid: &str, mode: TimestampMode) -> Self {
        Tracer {
            clock: ProcessClock::new(process),
            journal: Mutex::new(Journal::new(process, pid)),
            mode,
        }
    }

    fn stamp(&self) -> Timestamp {
        match self.mode {
            TimestampMode::Wall => Timestamp::now(),
            TimestampMode::Fixed => Timestamp::fixed(),
        }
    }

    pub fn main_lane(&self) -> LaneId {
        self.clock.main_lane()
    }

    /// Fork a new lane from `parent`. The forked lane's first signpost
    /// back-links to the parent's signpost as of this call and is recorded
    /// as a fork event.
    pub fn fork_lane(&self, parent: LaneId) -> Result<LaneId, TraceError> {
        Ok(self.clock.fork_lane(parent)?.lane_id)
    }

    /// Mark a significant event on `lane`. Emits the signpost (or fork)
    /// record and returns a handle for detail annotations. The handle stays
    /// live until the lane's next signpost.
    pub fn signpost<'a>(
        &'a self,
        lane: LaneId,
        text: &str,
    ) -> Result<SignpostHandle<'a>, TraceError> {
        let tick = self.clock.advance_signpost(lane)?;
        let stamp = self.stamp();
        let mut journal = self.journal.lock().unwrap();
        let id = journal.intern(text);
        let event = if tick.forked {
            Event::fork(tick.root, tick.now, id, stamp)
        } else {
            Event::signpost(tick.root, tick.now, id, stamp)
        };
        journal.append(event)?;
        Ok(SignpostHandle {
            tracer: self,
            lane,
            signpost: tick.now,
        })
    }

    /// Consume the tracer and return the recorded journal.
    pub fn into_journal(self) -> Journal {
        self.journal.into_inner().unwrap()
    }
}

/// Live reference to one signpost; all detail emissions attach to its
/// signpost number. Annotations after the lane moved on are refused.
pub struct SignpostHandle<'a> {
    tracer: &'a Tracer,
    lane: LaneId,
    signpost: u64,
}

impl SignpostHandle<'_> {
    pub fn number(&self) -> u64 {
        self.signpost
    }

    fn detail(
        &self,
        class: &str,
        relation: AnnotationKind,
        text: &str,
    ) -> Result<&Self, TraceError> {
        if text.is_empty() {
            return Err(TraceError::EmptyAnnotation);
        }
        let current = self
            .tracer
            .clock
            .lane(self.lane)
            .ok_or(ClockError::NoSuchLane(self.lane))?
            .current_signpost;
        if current != self.signpost {
            return Err(TraceError::StaleHandle {
                signpost: self.signpost,
                current,
            });
        }
        let (now, delta) = self.tracer.clock.tick_subtime(self.lane)?;
        let stamp = self.tracer.stamp();
        let mut journal = self.tracer.journal.lock().unwrap();
        let id = journal.intern(text);
        journal.append(Event::detail(
            now,
            delta,
            DetailClass::new(class, relation),
            id,
            stamp,
        ))?;
        Ok(self)
    }

    /// What the code is about to attempt: `[intent: : text]`.
    pub fn intent(&self, text: &str) -> Result<&Self, TraceError> {
        self.detail("intent", AnnotationKind::Expresses, text)
    }

    /// Incidental aside: `[btw: text]`.
    pub fn note(&self, text: &str) -> Result<&Self, TraceError> {
        self.detail("btw", AnnotationKind::Expresses, text)
    }

    /// Observation worth keeping: `[remarked: : text]`.
    pub fn remark(&self, text: &str) -> Result<&Self, TraceError> {
        self.detail("remarked", AnnotationKind::Expresses, text)
    }

    /// Failure attribution. Recorded as a remark; the concept builder turns
    /// it into an expressed failure attribute of this signpost.
    pub fn failed_because(&self, text: &str) -> Result<&Self, TraceError> {
        self.detail("remarked", AnnotationKind::Expresses, text)
    }

    /// Scalar attribute in an explicit namespace, e.g.
    /// `[system error message: ...]`.
    pub fn attribute(&self, name: &str, namespace: &str) -> Result<&Self, TraceError> {
        if namespace.is_empty() {
            return Err(TraceError::NamespaceRequired);
        }
        self.detail(namespace, AnnotationKind::Expresses, name)
    }

    /// Declare a dependency: the named resource is a potential cause of
    /// this signpost ("may determine"). Renders as `[namespace: name]`.
    pub fn relies_on(&self, name: &str, namespace: &str) -> Result<&Self, TraceError> {
        if namespace.is_empty() {
            return Err(TraceError::NamespaceRequired);
        }
        self.detail(namespace, AnnotationKind::Dependency, name)
    }

    /// Declare scope: this signpost is contained by the named concept,
    /// e.g. `[coroutine: main]`.
    pub fn part_of(&self, name: &str, namespace: &str) -> Result<&Self, TraceError> {
        if namespace.is_empty() {
            return Err(TraceError::NamespaceRequired);
        }
        self.detail(namespace, AnnotationKind::Containment, name)
    }
}
