//! Causal-history tracing toolkit.
//!
//! A process records its own history against interior (proper) time:
//! monotonic signpost counters with causal back-links instead of wall-clock
//! ordering. Journals built this way can be rendered as timelines, merged
//! into a graph of invariant concepts connected by four spacetime relation
//! types, and searched for stories that explain an outcome. A small
//! deterministic channel simulator and entropy/sampling analyzers cover the
//! observability side: what ordering, coupling, and category information
//! survives transmission and aggregation.
//!
//! Module map:
//! - [`proper_time`]: per-process counters and lanes
//! - [`journal`]: the append-only record format and timeline renderer
//! - [`signpost`]: the instrumentation API
//! - [`concept`]: the concept graph, selection rules, observability checks
//! - [`story`]: cone searches, loop detection, map rendering
//! - [`sim`]: seeded channel experiments (ordering, coupling, push/pull)
//! - [`metrics`]: entropy of mixing, sampling recommendation, cyclic buckets
//! - [`demo`]: the scripted demo program used by the CLI and tests

pub mod concept;
pub mod demo;
pub mod journal;
pub mod metrics;
pub mod proper_time;
pub mod signpost;
pub mod sim;
pub mod story;

pub use concept::{ConceptGraph, ConceptKey, ObservabilityResult, PromiseRecord};
pub use journal::{Event, EventKind, Journal};
pub use proper_time::{LaneId, ProcessClock};
pub use signpost::{SignpostHandle, Tracer};
pub use story::{SearchMode, Story, StoryQuery};
