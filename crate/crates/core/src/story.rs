//! Story extraction: cone searches over the concept graph.
//!
//! A story is a walk along causal (FOLLOWS) edges, optionally widened by
//! single generalization steps along CONTAINS edges. Searches are bounded
//! at the start (retarded), at the end (advanced), or at both ends
//! (causal). Frequently trodden transitions can re-rank stories into
//! classical paths. Causal loops are reported, never rejected. Searches are
//! read-only over a graph snapshot and may run concurrently.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::concept::{ConceptEdge, ConceptGraph, ConceptKey, Confidence, RelationType};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StoryError {
    #[error("{mode:?} search requires {what}")]
    MissingBound {
        mode: SearchMode,
        what: &'static str,
    },
    #[error("unknown concept {key}; nearest names: {}", nearest.iter().map(|k| k.display()).collect::<Vec<_>>().join(", "))]
    UnknownConcept {
        key: ConceptKey,
        nearest: Vec<ConceptKey>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    /// Bounded at the start: everything that follows from a concept.
    Retarded,
    /// Bounded at the end: everything that leads to a concept.
    Advanced,
    /// Bounded at both ends: explanations of "end given start".
    Causal,
}

#[derive(Debug, Clone)]
pub struct StoryQuery {
    pub mode: SearchMode,
    pub start: Option<ConceptKey>,
    pub end: Option<ConceptKey>,
    /// Maximum number of causal hops per story.
    pub max_depth: usize,
    pub max_stories: usize,
    /// Include "may determine" dependency edges as causal transitions.
    pub include_may: bool,
}

impl StoryQuery {
    pub fn retarded(start: ConceptKey) -> Self {
        StoryQuery {
            mode: SearchMode::Retarded,
            start: Some(start),
            end: None,
            max_depth: 8,
            max_stories: 50,
            include_may: true,
        }
    }

    pub fn advanced(end: ConceptKey) -> Self {
        StoryQuery {
            mode: SearchMode::Advanced,
            start: None,
            end: Some(end),
            ..StoryQuery::retarded(ConceptKey::program_start())
        }
    }

    pub fn causal(start: ConceptKey, end: ConceptKey) -> Self {
        StoryQuery {
            mode: SearchMode::Causal,
            end: Some(end),
            ..StoryQuery::retarded(start)
        }
    }

    pub fn with_depth(mut self, max_depth: usize) -> Self {
        self.max_depth = max_depth;
        self
    }

    pub fn with_max_stories(mut self, max_stories: usize) -> Self {
        self.max_stories = max_stories;
        self
    }

    pub fn definite_only(mut self) -> Self {
        self.include_may = false;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    CausalHop,
    GeneralizationHop,
}

/// The edge a story step walked over, as stored in the graph (the walk may
/// traverse it against its stored direction).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepEdge {
    pub from: ConceptKey,
    pub to: ConceptKey,
    pub relation: RelationType,
    pub verb: String,
    pub weight: u64,
}

impl StepEdge {
    fn of(edge: &ConceptEdge) -> Self {
        StepEdge {
            from: edge.from.clone(),
            to: edge.to.clone(),
            relation: edge.relation,
            verb: edge.verb().to_string(),
            weight: edge.weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoryStep {
    pub concept: ConceptKey,
    /// Edge walked to arrive here; `None` on the first step.
    pub edge: Option<StepEdge>,
    pub kind: StepKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Story {
    pub steps: Vec<StoryStep>,
    /// Sum of log(weight + 1) over causal hops: a monotone frequency score.
    pub score: f64,
}

impl Story {
    pub fn concepts(&self) -> Vec<&ConceptKey> {
        self.steps.iter().map(|s| &s.concept).collect()
    }

    pub fn causal_hops(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| s.edge.is_some() && s.kind == StepKind::CausalHop)
            .count()
    }
}

struct Index<'g> {
    follows_out: HashMap<&'g ConceptKey, Vec<&'g ConceptEdge>>,
    follows_in: HashMap<&'g ConceptKey, Vec<&'g ConceptEdge>>,
    contains_adj: HashMap<&'g ConceptKey, Vec<(&'g ConceptKey, &'g ConceptEdge)>>,
}

impl<'g> Index<'g> {
    fn build(graph: &'g ConceptGraph) -> Self {
        let mut follows_out: HashMap<&ConceptKey, Vec<&ConceptEdge>> = HashMap::new();
        let mut follows_in: HashMap<&ConceptKey, Vec<&ConceptEdge>> = HashMap::new();
        let mut contains_adj: HashMap<&ConceptKey, Vec<(&ConceptKey, &ConceptEdge)>> =
            HashMap::new();
        // graph edges iterate in canonical order, keeping traversal
        // deterministic
        for edge in graph.edges() {
            match edge.relation {
                RelationType::Follows => {
                    follows_out.entry(&edge.from).or_default().push(edge);
                    follows_in.entry(&edge.to).or_default().push(edge);
                }
                RelationType::Contains => {
                    contains_adj
                        .entry(&edge.from)
                        .or_default()
                        .push((&edge.to, edge));
                    contains_adj
                        .entry(&edge.to)
                        .or_default()
                        .push((&edge.from, edge));
                }
                _ => {}
            }
        }
        Index {
            follows_out,
            follows_in,
            contains_adj,
        }
    }
}

/// Depth-bounded cone search. Returns stories ordered by score descending,
/// ties broken by lexicographic concept sequence; deterministic.
pub fn search(graph: &ConceptGraph, query: &StoryQuery) -> Result<Vec<Story>, StoryError> {
    let anchor = |key: &Option<ConceptKey>, what| {
        key.clone().ok_or(StoryError::MissingBound {
            mode: query.mode,
            what,
        })
    };
    let origin = match query.mode {
        SearchMode::Retarded => anchor(&query.start, "a start concept")?,
        SearchMode::Advanced => anchor(&query.end, "an end concept")?,
        SearchMode::Causal => {
            let start = anchor(&query.start, "a start concept")?;
            anchor(&query.end, "an end concept")?;
            start
        }
    };
    for key in [&query.start, &query.end].into_iter().flatten() {
        if graph.node(key).is_none() {
            return Err(StoryError::UnknownConcept {
                key: key.clone(),
                nearest: graph.nearest(&key.name, 3),
            });
        }
    }
    let index = Index::build(graph);
    let mut walker = Walker {
        graph: &index,
        query,
        target: match query.mode {
            SearchMode::Causal => query.end.clone(),
            _ => None,
        },
        backward: query.mode == SearchMode::Advanced,
        stories: Vec::new(),
        path: vec![(origin.clone(), None)],
        visited: HashSet::from([origin.clone()]),
    };
    walker.dfs(&origin, query.max_depth, 0);
    let mut stories = walker.stories;
    stories.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.concepts().cmp(&b.concepts()))
    });
    stories.truncate(query.max_stories);
    Ok(stories)
}

type PathEntry = (ConceptKey, Option<(StepEdge, StepKind)>);

struct Walker<'a, 'g> {
    graph: &'a Index<'g>,
    query: &'a StoryQuery,
    target: Option<ConceptKey>,
    backward: bool,
    stories: Vec<Story>,
    path: Vec<PathEntry>,
    visited: HashSet<ConceptKey>,
}

impl Walker<'_, '_> {
    fn dfs(&mut self, at: &ConceptKey, depth_left: usize, gen_run: usize) {
        if let Some(target) = &self.target {
            if at == target {
                self.emit();
                return;
            }
        }
        let mut extended = false;

        if depth_left > 0 {
            let causal: Vec<(&ConceptKey, &ConceptEdge)> = if self.backward {
                self.graph
                    .follows_in
                    .get(at)
                    .into_iter()
                    .flatten()
                    .map(|e| (&e.from, *e))
                    .collect()
            } else {
                self.graph
                    .follows_out
                    .get(at)
                    .into_iter()
                    .flatten()
                    .map(|e| (&e.to, *e))
                    .collect()
            };
            for (next, edge) in causal {
                if edge.confidence == Confidence::May && !self.query.include_may {
                    continue;
                }
                if self.visited.contains(next) {
                    continue;
                }
                extended = true;
                self.step(next, edge, StepKind::CausalHop);
                self.dfs(&next.clone(), depth_left - 1, 0);
                self.unstep();
            }
        }

        // widen via containment: at most one class up and one member down
        // between causal hops, so expansion cannot wander the lattice
        if gen_run < 2 {
            let neighbours: Vec<(&ConceptKey, &ConceptEdge)> = self
                .graph
                .contains_adj
                .get(at)
                .into_iter()
                .flatten()
                .copied()
                .collect();
            for (next, edge) in neighbours {
                if self.visited.contains(next) {
                    continue;
                }
                extended = true;
                self.step(next, edge, StepKind::GeneralizationHop);
                self.dfs(&next.clone(), depth_left, gen_run + 1);
                self.unstep();
            }
        }

        // open-ended searches emit maximal walks; a lone concept with no
        // continuation is a one-step story
        if !extended && self.target.is_none() {
            self.emit();
        }
    }

    fn step(&mut self, next: &ConceptKey, edge: &ConceptEdge, kind: StepKind) {
        self.visited.insert(next.clone());
        self.path
            .push((next.clone(), Some((StepEdge::of(edge), kind))));
    }

    fn unstep(&mut self) {
        if let Some((key, _)) = self.path.pop() {
            self.visited.remove(&key);
        }
    }

    fn emit(&mut self) {
        let mut entries = self.path.clone();
        if self.backward {
            // collected end-first; flip into causal order and re-hang each
            // edge on the step it leads into
            entries.reverse();
            let mut shifted: Vec<PathEntry> = Vec::with_capacity(entries.len());
            for i in 0..entries.len() {
                let edge = if i == 0 {
                    None
                } else {
                    entries[i - 1].1.clone()
                };
                shifted.push((entries[i].0.clone(), edge));
            }
            entries = shifted;
        }
        let steps: Vec<StoryStep> = entries
            .into_iter()
            .map(|(concept, edge)| match edge {
                Some((edge, kind)) => StoryStep {
                    concept,
                    edge: Some(edge),
                    kind,
                },
                None => StoryStep {
                    concept,
                    edge: None,
                    kind: StepKind::CausalHop,
                },
            })
            .collect();
        let score = steps
            .iter()
            .filter(|s| s.kind == StepKind::CausalHop)
            .filter_map(|s| s.edge.as_ref())
            .map(|e| ((e.weight + 1) as f64).ln())
            .sum();
        self.stories.push(Story { steps, score });
    }
}

/// All elementary causal cycles up to `max_len` nodes. "May determine"
/// edges count as causal here. Deterministic order.
pub fn detect_loops(graph: &ConceptGraph, max_len: usize) -> Vec<Vec<ConceptKey>> {
    let index = Index::build(graph);
    let mut nodes: Vec<&ConceptKey> = index.follows_out.keys().copied().collect();
    nodes.sort();
    let mut cycles = Vec::new();
    for start in nodes {
        let mut path = vec![start.clone()];
        let mut on_path: HashSet<&ConceptKey> = HashSet::from([start]);
        find_cycles(
            &index,
            start,
            start,
            &mut path,
            &mut on_path,
            max_len,
            &mut cycles,
        );
    }
    cycles
}

fn find_cycles<'g>(
    index: &Index<'g>,
    start: &'g ConceptKey,
    at: &'g ConceptKey,
    path: &mut Vec<ConceptKey>,
    on_path: &mut HashSet<&'g ConceptKey>,
    max_len: usize,
    cycles: &mut Vec<Vec<ConceptKey>>,
) {
    for edge in index.follows_out.get(at).into_iter().flatten() {
        let next = &edge.to;
        if next == start {
            cycles.push(path.clone());
            continue;
        }
        // only enumerate cycles whose smallest node is `start`, so each
        // elementary cycle is reported once
        if *next < *start || on_path.contains(next) || path.len() >= max_len {
            continue;
        }
        on_path.insert(next);
        path.push(next.clone());
        find_cycles(index, start, next, path, on_path, max_len, cycles);
        path.pop();
        on_path.remove(next);
    }
}

/// Stable re-sort of stories by cumulative observed transition frequency:
/// well-trodden routes become classical paths. Ties keep the prior order.
pub fn rank_paths(
    stories: Vec<Story>,
    visit_counts: &BTreeMap<(ConceptKey, ConceptKey), u64>,
) -> Vec<Story> {
    let mut keyed: Vec<(u64, usize, Story)> = stories
        .into_iter()
        .enumerate()
        .map(|(i, story)| {
            let total: u64 = story
                .steps
                .iter()
                .filter(|s| s.kind == StepKind::CausalHop)
                .filter_map(|s| s.edge.as_ref())
                .map(|e| {
                    visit_counts
                        .get(&(e.from.clone(), e.to.clone()))
                        .copied()
                        .unwrap_or(0)
                })
                .sum();
            (total, i, story)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, _, s)| s).collect()
}

/// Render stories as an indented map of `(from) --b(verb)--> "to"` lines,
/// bracketed by non-local cause markers. Dependency edges incident to each
/// visited concept are annotated beneath it. Deterministic.
pub fn render_map(graph: &ConceptGraph, stories: &[Story]) -> String {
    let index = Index::build(graph);
    let mut out = String::new();
    out.push_str("<begin NON-LOCAL CAUSE>\n");
    for story in stories {
        let used: HashSet<(&ConceptKey, &ConceptKey)> = story
            .steps
            .iter()
            .filter_map(|s| s.edge.as_ref())
            .map(|e| (&e.from, &e.to))
            .collect();
        let mut depth = 0usize;
        let mut prev: Option<&ConceptKey> = None;
        for step in &story.steps {
            if let (Some(prev), Some(edge)) = (prev, &step.edge) {
                let _ = writeln!(
                    out,
                    "{}({}) --b({})--> \"{}\"",
                    "  ".repeat(depth),
                    prev.display(),
                    edge.verb,
                    step.concept.display()
                );
                if step.kind == StepKind::CausalHop {
                    depth += 1;
                }
            }
            // annotate incoming dependencies the walk itself did not use
            for edge in index.follows_in.get(&step.concept).into_iter().flatten() {
                if edge.confidence == Confidence::May && !used.contains(&(&edge.from, &edge.to)) {
                    let _ = writeln!(
                        out,
                        "{}({}) --b(may determine)--> \"{}\"",
                        "  ".repeat(depth),
                        step.concept.display(),
                        edge.from.display()
                    );
                }
            }
            prev = Some(&step.concept);
        }
    }
    out.push_str("<end NON-LOCAL CAUSE>\n");
    out
}

/// Structured story records, one step per line.
pub fn story_records(stories: &[Story]) -> String {
    let mut out = String::new();
    for (i, story) in stories.iter().enumerate() {
        let _ = writeln!(out, "story\t{}\t{:.4}", i, story.score);
        for step in &story.steps {
            let kind = match step.kind {
                StepKind::CausalHop => "causal",
                StepKind::GeneralizationHop => "generalization",
            };
            let verb = step.edge.as_ref().map(|e| e.verb.as_str()).unwrap_or("-");
            let _ = writeln!(
                out,
                "step\t{}\t{}\t{}\t{}",
                kind, verb, step.concept.namespace, step.concept.name
            );
        }
    }
    out
}
