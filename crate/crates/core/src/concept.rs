//! Concept graph: invariant concepts connected by the four spacetime
//! relation types, built idempotently from journals.
//!
//! Re-ingesting the same labelled interval is a no-op (frequencies and
//! weights count once per interval label), so merges converge: any order
//! and any amount of duplication of the same journals produces the same
//! graph. The three local relation types are mutually exclusive per ordered
//! concept pair; NEAR may coexist with any of them. Causal loops are kept,
//! not rejected — the story engine reports them.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::journal::{AnnotationKind, EventKind, Journal};

/// Namespace of concepts minted from signpost texts.
pub const SIGNPOST_NS: &str = "signpost";
/// Name of the boundary concept every first signpost links back to.
pub const PROGRAM_START: &str = "program start";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("incompatible relation types for pair ({from} -> {to}): {existing:?} already present, cannot add {new:?}")]
    IncompatibleRelation {
        from: String,
        to: String,
        existing: RelationType,
        new: RelationType,
    },
    #[error("unknown concept: {0}")]
    UnknownConcept(String),
    #[error("mismatched promise pair: {0}")]
    MismatchedPromises(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for GraphError {
    fn from(e: std::io::Error) -> Self {
        GraphError::Io(e.to_string())
    }
}

/// (namespace, name) — the unique key of a concept.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConceptKey {
    pub namespace: String,
    pub name: String,
}

impl ConceptKey {
    pub fn new(namespace: impl Into<String>, name: impl Into<String>) -> Self {
        ConceptKey {
            namespace: namespace.into(),
            name: name.into(),
        }
    }

    pub fn signpost(name: impl Into<String>) -> Self {
        ConceptKey::new(SIGNPOST_NS, name)
    }

    pub fn program_start() -> Self {
        ConceptKey::signpost(PROGRAM_START)
    }

    /// Display form: signpost concepts are bare, everything else keeps its
    /// namespace bracket, e.g. `[dns lookup: 123.456.789.123]`.
    pub fn display(&self) -> String {
        if self.namespace == SIGNPOST_NS {
            self.name.clone()
        } else {
            format!("[{}: {}]", self.namespace, self.name)
        }
    }
}

impl fmt::Display for ConceptKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptNode {
    pub key: ConceptKey,
    /// Observation count; 0 means the concept was only ever referenced by
    /// an edge and never defined.
    pub frequency: u64,
    pub first_seen: String,
    pub last_seen: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationType {
    Contains,
    Follows,
    Expresses,
    Near,
}

impl RelationType {
    pub fn is_exclusive(self) -> bool {
        self != RelationType::Near
    }

    fn tag(self) -> &'static str {
        match self {
            RelationType::Contains => "CONTAINS",
            RelationType::Follows => "FOLLOWS",
            RelationType::Expresses => "EXPRESSES",
            RelationType::Near => "NEAR",
        }
    }

    fn from_tag(s: &str) -> Option<Self> {
        match s {
            "CONTAINS" => Some(RelationType::Contains),
            "FOLLOWS" => Some(RelationType::Follows),
            "EXPRESSES" => Some(RelationType::Expresses),
            "NEAR" => Some(RelationType::Near),
            _ => None,
        }
    }
}

/// Direction of intent: `Plus` reads forward ("A contains B"), `Minus`
/// reads inverted ("A is part of B").
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Orientation {
    Plus,
    Minus,
}

impl Orientation {
    fn tag(self) -> &'static str {
        match self {
            Orientation::Plus => "+",
            Orientation::Minus => "-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Confidence {
    Definite,
    May,
}

impl Confidence {
    fn tag(self) -> &'static str {
        match self {
            Confidence::Definite => "definite",
            Confidence::May => "may",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptEdge {
    pub from: ConceptKey,
    pub to: ConceptKey,
    pub relation: RelationType,
    pub orientation: Orientation,
    pub confidence: Confidence,
    pub weight: u64,
}

impl ConceptEdge {
    /// Surface verb used when rendering maps.
    pub fn verb(&self) -> &'static str {
        match (self.relation, self.confidence, self.orientation) {
            (RelationType::Follows, Confidence::May, _) => "may determine",
            (RelationType::Follows, Confidence::Definite, _) => "precedes",
            (RelationType::Contains, _, Orientation::Minus) => "part of",
            (RelationType::Contains, _, Orientation::Plus) => "contains",
            (RelationType::Near, _, _) => "close to",
            (RelationType::Expresses, _, _) => match self.to.namespace.as_str() {
                "intent" => "intent",
                "btw" => "btw",
                "remarked" => "remarked",
                _ => "attribute",
            },
        }
    }
}

/// One edge observation handed to [`ConceptGraph::add_edge`]. The optional
/// interval label makes repeated observations idempotent.
#[derive(Debug, Clone)]
pub struct EdgeObservation {
    pub from: ConceptKey,
    pub to: ConceptKey,
    pub relation: RelationType,
    pub orientation: Orientation,
    pub confidence: Confidence,
    pub label: Option<String>,
}

impl EdgeObservation {
    pub fn new(from: ConceptKey, to: ConceptKey, relation: RelationType) -> Self {
        EdgeObservation {
            from,
            to,
            relation,
            orientation: Orientation::Plus,
            confidence: Confidence::Definite,
            label: None,
        }
    }

    pub fn oriented(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    pub fn confidence(mut self, confidence: Confidence) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn labelled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

/// A (+/-) promise with a body set between two agent ends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromiseRecord {
    pub giver: String,
    pub receiver: String,
    pub sign: Orientation,
    pub body: BTreeSet<String>,
    /// Optional condition body (a conditional promise `b|c` conveys nothing
    /// while the condition is unmet).
    pub condition: Option<BTreeSet<String>>,
}

impl PromiseRecord {
    pub fn offer(
        giver: &str,
        receiver: &str,
        body: impl IntoIterator<Item = &'static str>,
    ) -> Self {
        PromiseRecord {
            giver: giver.to_string(),
            receiver: receiver.to_string(),
            sign: Orientation::Plus,
            body: body.into_iter().map(String::from).collect(),
            condition: None,
        }
    }

    pub fn accept(
        giver: &str,
        receiver: &str,
        body: impl IntoIterator<Item = &'static str>,
    ) -> Self {
        PromiseRecord {
            sign: Orientation::Minus,
            ..PromiseRecord::offer(giver, receiver, body)
        }
    }

    /// What the promise conveys: its body when unconditional or when the
    /// condition is met, nothing otherwise.
    pub fn effective_body(&self, condition_met: bool) -> BTreeSet<String> {
        match &self.condition {
            Some(_) if !condition_met => BTreeSet::new(),
            _ => self.body.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservabilityResult {
    pub observable: bool,
    /// Body overlap `b_i ∩ b_j` — what actually propagates.
    pub overlap: BTreeSet<String>,
}

/// An offered value set `X` at source `S` is observable by `R` iff both the
/// offer (+) and the acceptance (−) exist, mirrored between the same pair of
/// agents, and the accepted set is contained in the offered set.
pub fn observable(
    offer: &PromiseRecord,
    accept: Option<&PromiseRecord>,
) -> Result<ObservabilityResult, GraphError> {
    if offer.sign != Orientation::Plus {
        return Err(GraphError::MismatchedPromises(
            "offer must be a (+) promise".to_string(),
        ));
    }
    let Some(accept) = accept else {
        return Ok(ObservabilityResult {
            observable: false,
            overlap: BTreeSet::new(),
        });
    };
    if accept.sign != Orientation::Minus {
        return Err(GraphError::MismatchedPromises(
            "acceptance must be a (-) promise".to_string(),
        ));
    }
    if offer.giver != accept.receiver || offer.receiver != accept.giver {
        return Err(GraphError::MismatchedPromises(format!(
            "offer {} -> {} is not mirrored by acceptance {} -> {}",
            offer.giver, offer.receiver, accept.giver, accept.receiver
        )));
    }
    let overlap: BTreeSet<String> = offer.body.intersection(&accept.body).cloned().collect();
    let observable = accept.body.is_subset(&offer.body);
    Ok(ObservabilityResult {
        observable,
        overlap,
    })
}

/// The conditional contexts an alert depends on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextSet {
    pub alert: ConceptKey,
    pub contexts: BTreeSet<ConceptKey>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextReport {
    pub complete: bool,
    /// Contexts that were never promised into the graph; when any are
    /// missing the receiver has to treat the alert as a random variable.
    pub missing: Vec<ConceptKey>,
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct IngestReport {
    pub events: usize,
    pub observations: usize,
    pub skipped: usize,
    pub errors: Vec<String>,
}

#[derive(PartialEq, Eq, Hash)]
enum SeenLabel {
    Node(String, ConceptKey),
    Edge(String, ConceptKey, ConceptKey, RelationType),
}

/// The graph store. Single writer; reads may be concurrent on a snapshot.
#[derive(Default)]
pub struct ConceptGraph {
    nodes: BTreeMap<ConceptKey, ConceptNode>,
    edges: BTreeMap<(ConceptKey, ConceptKey, RelationType), ConceptEdge>,
    seen: HashSet<SeenLabel>,
    /// Declared inverse promises (`Inv(X)`) for forward causal edges.
    inverses: BTreeSet<(ConceptKey, ConceptKey)>,
}

impl ConceptGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &ConceptNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &ConceptEdge> {
        self.edges.values()
    }

    pub fn node(&self, key: &ConceptKey) -> Option<&ConceptNode> {
        self.nodes.get(key)
    }

    pub fn edge(
        &self,
        from: &ConceptKey,
        to: &ConceptKey,
        relation: RelationType,
    ) -> Option<&ConceptEdge> {
        self.edges.get(&(from.clone(), to.clone(), relation))
    }

    /// True when the concept was actually observed (not merely referenced
    /// by an edge).
    pub fn defined(&self, key: &ConceptKey) -> bool {
        self.nodes
            .get(key)
            .map(|n| n.frequency > 0)
            .unwrap_or(false)
    }

    fn ensure_node(&mut self, key: &ConceptKey) {
        self.nodes
            .entry(key.clone())
            .or_insert_with(|| ConceptNode {
                key: key.clone(),
                frequency: 0,
                first_seen: String::new(),
                last_seen: String::new(),
            });
    }

    /// Record one observation of a concept. With a label the count is
    /// idempotent: the same labelled interval is counted once. Returns true
    /// when the observation was applied.
    pub fn observe_concept(&mut self, key: &ConceptKey, label: Option<&str>) -> bool {
        if let Some(label) = label {
            if !self
                .seen
                .insert(SeenLabel::Node(label.to_string(), key.clone()))
            {
                return false;
            }
        }
        self.ensure_node(key);
        let node = self.nodes.get_mut(key).expect("just ensured");
        node.frequency += 1;
        if let Some(label) = label {
            if node.first_seen.is_empty() || label < node.first_seen.as_str() {
                node.first_seen = label.to_string();
            }
            if label > node.last_seen.as_str() {
                node.last_seen = label.to_string();
            }
        }
        true
    }

    /// Insert an edge or bump its weight. Enforces the selection rules: for
    /// an ordered pair at most one of CONTAINS/FOLLOWS/EXPRESSES may exist
    /// (the opposite direction is an independent pair); NEAR coexists with
    /// anything and keeps unit weight.
    pub fn add_edge(&mut self, obs: EdgeObservation) -> Result<(), GraphError> {
        if obs.relation.is_exclusive() {
            for other in [
                RelationType::Contains,
                RelationType::Follows,
                RelationType::Expresses,
            ] {
                if other == obs.relation {
                    continue;
                }
                if self
                    .edges
                    .contains_key(&(obs.from.clone(), obs.to.clone(), other))
                {
                    return Err(GraphError::IncompatibleRelation {
                        from: obs.from.display(),
                        to: obs.to.display(),
                        existing: other,
                        new: obs.relation,
                    });
                }
            }
        }
        if let Some(label) = &obs.label {
            if !self.seen.insert(SeenLabel::Edge(
                label.clone(),
                obs.from.clone(),
                obs.to.clone(),
                obs.relation,
            )) {
                return Ok(()); // already counted for this interval
            }
        }
        self.ensure_node(&obs.from);
        self.ensure_node(&obs.to);
        let key = (obs.from.clone(), obs.to.clone(), obs.relation);
        match self.edges.get_mut(&key) {
            Some(edge) => {
                if obs.relation != RelationType::Near {
                    edge.weight += 1;
                }
                if obs.confidence == Confidence::Definite {
                    edge.confidence = Confidence::Definite;
                }
            }
            None => {
                self.edges.insert(
                    key,
                    ConceptEdge {
                        from: obs.from,
                        to: obs.to,
                        relation: obs.relation,
                        orientation: obs.orientation,
                        confidence: obs.confidence,
                        weight: 1,
                    },
                );
            }
        }
        Ok(())
    }

    /// Merge one journal into the graph. Every signpost becomes a concept;
    /// back-links become implicit "precedes" edges; annotations become
    /// typed edges. Idempotent per journal (interval labels are
    /// journal id + counter position), and commutative across journals.
    pub fn ingest(&mut self, journal: &Journal) -> IngestReport {
        let jid = journal.id();
        let mut report = IngestReport::default();
        let mut now_to_key: HashMap<u64, ConceptKey> = HashMap::new();
        now_to_key.insert(
            crate::proper_time::PROGRAM_START_SIGNPOST,
            ConceptKey::program_start(),
        );
        let start_label = format!("{jid}@0,1");
        if self.observe_concept(&ConceptKey::program_start(), Some(&start_label)) {
            report.observations += 1;
        } else {
            report.skipped += 1;
        }

        for event in journal.events() {
            report.events += 1;
            let label = format!("{jid}@{},{}", event.now, event.delta);
            match event.kind {
                EventKind::Signpost | EventKind::Fork => {
                    let key = ConceptKey::signpost(journal.text(event));
                    if self.observe_concept(&key, Some(&label)) {
                        report.observations += 1;
                    } else {
                        report.skipped += 1;
                    }
                    let root = event.root.unwrap_or_default();
                    let root_key = match now_to_key.get(&root) {
                        Some(k) => k.clone(),
                        None => {
                            report
                                .errors
                                .push(format!("{label}: back-link {root} missing"));
                            now_to_key.insert(event.now, key);
                            continue;
                        }
                    };
                    now_to_key.insert(event.now, key.clone());
                    let edge =
                        EdgeObservation::new(root_key, key, RelationType::Follows).labelled(&label);
                    if let Err(e) = self.add_edge(edge) {
                        report.errors.push(format!("{label}: {e}"));
                    }
                }
                EventKind::Detail => {
                    let Some(owner) = now_to_key.get(&event.now).cloned() else {
                        report.errors.push(format!(
                            "{label}: detail for unknown signpost {}",
                            event.now
                        ));
                        continue;
                    };
                    let class = event
                        .detail_class
                        .as_ref()
                        .expect("details always carry a class");
                    let key = ConceptKey::new(&class.class, journal.text(event));
                    if self.observe_concept(&key, Some(&label)) {
                        report.observations += 1;
                    } else {
                        report.skipped += 1;
                    }
                    let edge = match class.relation {
                        AnnotationKind::Expresses => {
                            EdgeObservation::new(owner, key, RelationType::Expresses)
                        }
                        // a dependency is a potential cause of its signpost
                        AnnotationKind::Dependency => {
                            EdgeObservation::new(key, owner, RelationType::Follows)
                                .confidence(Confidence::May)
                        }
                        AnnotationKind::Containment => {
                            EdgeObservation::new(owner, key, RelationType::Contains)
                                .oriented(Orientation::Minus)
                        }
                    };
                    if let Err(e) = self.add_edge(edge.labelled(&label)) {
                        report.errors.push(format!("{label}: {e}"));
                    }
                }
            }
        }
        report
    }

    /// Which of an alert's conditional contexts were actually promised into
    /// the graph. Anything missing means the alert's context is lost.
    pub fn check_context(&self, alert: &ContextSet) -> Result<ContextReport, GraphError> {
        if !self.defined(&alert.alert) {
            return Err(GraphError::UnknownConcept(alert.alert.display()));
        }
        let missing: Vec<ConceptKey> = alert
            .contexts
            .iter()
            .filter(|c| !self.defined(c))
            .cloned()
            .collect();
        Ok(ContextReport {
            complete: missing.is_empty(),
            missing,
        })
    }

    /// Declare that the forward causal edge `from -> to` has a promised
    /// inverse (an `Inv(X)` promise). Journal ingestion never declares
    /// these.
    pub fn declare_inverse(&mut self, from: &ConceptKey, to: &ConceptKey) {
        self.inverses.insert((from.clone(), to.clone()));
    }

    /// Can the promised history of `from` be traced back to the boundary?
    /// True when every definite causal ancestor chain terminates at
    /// "program start" and never passes through a concept that was only
    /// referenced, never defined.
    pub fn is_traceable(&self, from: &ConceptKey) -> Result<bool, GraphError> {
        if self.node(from).is_none() {
            return Err(GraphError::UnknownConcept(from.display()));
        }
        let boundary = ConceptKey::program_start();
        let mut preds: HashMap<&ConceptKey, Vec<&ConceptKey>> = HashMap::new();
        for edge in self.edges.values() {
            if edge.relation == RelationType::Follows && edge.confidence == Confidence::Definite {
                preds.entry(&edge.to).or_default().push(&edge.from);
            }
        }
        let mut queue = VecDeque::from([from]);
        let mut visited: HashSet<&ConceptKey> = HashSet::from([from]);
        let mut reached_boundary = *from == boundary;
        while let Some(key) = queue.pop_front() {
            if !self.defined(key) {
                return Ok(false); // dangling root: referenced but never defined
            }
            if *key == boundary {
                reached_boundary = true;
                continue;
            }
            match preds.get(key) {
                None => return Ok(false), // chain stops short of the boundary
                Some(parents) => {
                    for parent in parents {
                        if visited.insert(parent) {
                            queue.push_back(parent);
                        }
                    }
                }
            }
        }
        Ok(reached_boundary)
    }

    /// Reversibility needs much more than traceability: a declared inverse
    /// promise for every forward causal edge. Expected false for every
    /// journal-built graph.
    pub fn is_reversible(&self) -> bool {
        self.edges.values().all(|edge| {
            edge.relation != RelationType::Follows
                || edge.confidence != Confidence::Definite
                || self
                    .inverses
                    .contains(&(edge.to.clone(), edge.from.clone()))
        })
    }

    /// Concepts with names closest to `name`, for error suggestions.
    pub fn nearest(&self, name: &str, limit: usize) -> Vec<ConceptKey> {
        let mut scored: Vec<(usize, &ConceptKey)> = self
            .nodes
            .keys()
            .map(|k| (edit_distance(&k.name, name), k))
            .collect();
        scored.sort();
        scored
            .into_iter()
            .take(limit)
            .map(|(_, k)| k.clone())
            .collect()
    }

    /// Serialize as a flat record list: one `N` record per node, one `E`
    /// record per edge, tab-separated, in canonical order. Byte-identical
    /// for equal graphs.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for node in self.nodes.values() {
            let _ = writeln!(
                out,
                "N\t{}\t{}\t{}",
                node.key.namespace, node.key.name, node.frequency
            );
        }
        for edge in self.edges.values() {
            let _ = writeln!(
                out,
                "E\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                edge.relation.tag(),
                edge.orientation.tag(),
                edge.confidence.tag(),
                edge.from.namespace,
                edge.from.name,
                edge.to.namespace,
                edge.to.name,
                edge.weight
            );
        }
        out
    }

    pub fn parse(input: &str) -> Result<ConceptGraph, GraphError> {
        let mut graph = ConceptGraph::new();
        for (idx, line) in input.lines().enumerate() {
            let lineno = idx + 1;
            let err = |message: String| GraphError::Parse {
                line: lineno,
                message,
            };
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields[0] {
                "N" if fields.len() == 4 => {
                    let key = ConceptKey::new(fields[1], fields[2]);
                    let frequency: u64 = fields[3]
                        .parse()
                        .map_err(|_| err(format!("bad frequency {:?}", fields[3])))?;
                    graph.ensure_node(&key);
                    graph.nodes.get_mut(&key).expect("ensured").frequency = frequency;
                }
                "E" if fields.len() == 9 => {
                    let relation = RelationType::from_tag(fields[1])
                        .ok_or_else(|| err(format!("bad relation {:?}", fields[1])))?;
                    let orientation = match fields[2] {
                        "+" => Orientation::Plus,
                        "-" => Orientation::Minus,
                        other => return Err(err(format!("bad sign {other:?}"))),
                    };
                    let confidence = match fields[3] {
                        "definite" => Confidence::Definite,
                        "may" => Confidence::May,
                        other => return Err(err(format!("bad confidence {other:?}"))),
                    };
                    let from = ConceptKey::new(fields[4], fields[5]);
                    let to = ConceptKey::new(fields[6], fields[7]);
                    let weight: u64 = fields[8]
                        .parse()
                        .map_err(|_| err(format!("bad weight {:?}", fields[8])))?;
                    graph.ensure_node(&from);
                    graph.ensure_node(&to);
                    graph.edges.insert(
                        (from.clone(), to.clone(), relation),
                        ConceptEdge {
                            from,
                            to,
                            relation,
                            orientation,
                            confidence,
                            weight,
                        },
                    );
                }
                other => return Err(err(format!("unknown record tag {other:?}"))),
            }
        }
        Ok(graph)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        fs::write(path, self.to_lines())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<ConceptGraph, GraphError> {
        let text = fs::read_to_string(path)?;
        ConceptGraph::parse(&text)
    }
}

fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            curr[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}
