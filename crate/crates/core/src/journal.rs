//! Append-only per-process event log with causal back-links.
//!
//! Each record carries the `root -> now,delta` counter triple from
//! [`crate::proper_time`], an interned text, and a wall-clock timestamp that
//! is display context only. The journal serializes to a line-oriented file
//! (header block with the intern table, then one tab-separated record per
//! line) and renders to a human-readable timeline. One writer per journal;
//! readers may share any immutable snapshot.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum JournalError {
    #[error("broken causal chain: root {root} not seen before event at now {now}")]
    BrokenChain { root: u64, now: u64 },
    #[error("invalid counters for {kind:?}: root {root:?}, now {now}, delta {delta}")]
    InvalidCounters {
        kind: EventKind,
        root: Option<u64>,
        now: u64,
        delta: u32,
    },
    #[error("unknown text id {0}")]
    UnknownText(u32),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("event index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for JournalError {
    fn from(e: std::io::Error) -> Self {
        JournalError::Io(e.to_string())
    }
}

/// Id of an interned format string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TextId(pub u32);

/// Bijection between invariant message texts and small integer ids.
/// Interning is idempotent; ids are assigned in first-use order.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct FormatIntern {
    ids: std::collections::HashMap<String, u32>,
    strings: Vec<String>,
}

impl FormatIntern {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, text: &str) -> TextId {
        if let Some(&id) = self.ids.get(text) {
            return TextId(id);
        }
        let id = self.strings.len() as u32;
        self.strings.push(text.to_string());
        self.ids.insert(text.to_string(), id);
        TextId(id)
    }

    pub fn resolve(&self, id: TextId) -> Option<&str> {
        self.strings.get(id.0 as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TextId, &str)> {
        self.strings
            .iter()
            .enumerate()
            .map(|(i, s)| (TextId(i as u32), s.as_str()))
    }
}

/// Wall-clock capture, stored verbatim and never used for ordering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Timestamp(String);

impl Timestamp {
    /// Current wall clock as `YYYY-MM-DD HH:MM:SS +0000 UTC`.
    pub fn now() -> Self {
        Timestamp(
            chrono::Utc::now()
                .format("%Y-%m-%d %H:%M:%S +0000 UTC")
                .to_string(),
        )
    }

    /// Fixed timestamp for reproducible journals.
    pub fn fixed() -> Self {
        Timestamp("1970-01-01 00:00:00 +0000 UTC".to_string())
    }

    pub fn from_display(s: impl Into<String>) -> Self {
        Timestamp(s.into())
    }

    pub fn display(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// A significant event; advances the lane's signpost counter.
    Signpost,
    /// A sub-event attached to the current signpost of its lane.
    Detail,
    /// The first signpost of a forked lane.
    Fork,
}

impl EventKind {
    fn letter(self) -> &'static str {
        match self {
            EventKind::Signpost => "S",
            EventKind::Detail => "D",
            EventKind::Fork => "F",
        }
    }
}

/// How a detail annotation relates its text to the signpost it decorates.
/// This is what lets the concept builder map details onto typed edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnotationKind {
    /// Scalar attribute of the signpost (intent, btw, remarked, ...).
    Expresses,
    /// A named dependency: a potential cause of the signpost.
    Dependency,
    /// The signpost belongs to the named scope (function, coroutine, ...).
    Containment,
}

impl AnnotationKind {
    fn letter(self) -> &'static str {
        match self {
            AnnotationKind::Expresses => "e",
            AnnotationKind::Dependency => "d",
            AnnotationKind::Containment => "c",
        }
    }

    fn from_letter(s: &str) -> Option<Self> {
        match s {
            "e" => Some(AnnotationKind::Expresses),
            "d" => Some(AnnotationKind::Dependency),
            "c" => Some(AnnotationKind::Containment),
            _ => None,
        }
    }
}

/// Detail tag: surface class plus the relation kind it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetailClass {
    pub class: String,
    pub relation: AnnotationKind,
}

impl DetailClass {
    pub fn new(class: impl Into<String>, relation: AnnotationKind) -> Self {
        DetailClass {
            class: class.into(),
            relation,
        }
    }

    /// Plain-text annotation classes carry an empty name slot and render
    /// with a doubled separator: `[intent: : open file X]`.
    fn plain_text(&self) -> bool {
        matches!(self.class.as_str(), "intent" | "remarked")
    }
}

/// One journal record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub kind: EventKind,
    /// Back-link for signposts and forks; absent for details (they belong
    /// to `now`).
    pub root: Option<u64>,
    pub now: u64,
    pub delta: u32,
    pub text: TextId,
    pub detail_class: Option<DetailClass>,
    pub timestamp: Timestamp,
}

impl Event {
    pub fn signpost(root: u64, now: u64, text: TextId, timestamp: Timestamp) -> Self {
        Event {
            kind: EventKind::Signpost,
            root: Some(root),
            now,
            delta: 1,
            text,
            detail_class: None,
            timestamp,
        }
    }

    pub fn fork(root: u64, now: u64, text: TextId, timestamp: Timestamp) -> Self {
        Event {
            kind: EventKind::Fork,
            ..Event::signpost(root, now, text, timestamp)
        }
    }

    pub fn detail(
        now: u64,
        delta: u32,
        class: DetailClass,
        text: TextId,
        timestamp: Timestamp,
    ) -> Self {
        Event {
            kind: EventKind::Detail,
            root: None,
            now,
            delta,
            text,
            detail_class: Some(class),
            timestamp,
        }
    }
}

/// Escape tab/newline structure out of a free-text field.
fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

/// Append-only event log for one process.
#[derive(Debug, Clone)]
pub struct Journal {
    process: String,
    pid: String,
    intern: FormatIntern,
    events: Vec<Event>,
    /// Signpost numbers already emitted, for back-link validation.
    seen_signposts: BTreeSet<u64>,
}

/// Journals compare by recorded history, not by intern-id assignment.
impl PartialEq for Journal {
    fn eq(&self, other: &Self) -> bool {
        self.process == other.process
            && self.pid == other.pid
            && self.events.len() == other.events.len()
            && self.events.iter().zip(&other.events).all(|(a, b)| {
                a.kind == b.kind
                    && a.root == b.root
                    && a.now == b.now
                    && a.delta == b.delta
                    && a.detail_class == b.detail_class
                    && a.timestamp == b.timestamp
                    && self.text(a) == other.text(b)
            })
    }
}

impl Eq for Journal {}

impl Journal {
    pub fn new(process: impl Into<String>, pid: impl Into<String>) -> Self {
        Journal {
            process: process.into(),
            pid: pid.into(),
            intern: FormatIntern::new(),
            events: Vec::new(),
            seen_signposts: BTreeSet::new(),
        }
    }

    pub fn process(&self) -> &str {
        &self.process
    }

    pub fn pid(&self) -> &str {
        &self.pid
    }

    /// Stable identity used as the interval-label prefix when building
    /// concept graphs.
    pub fn id(&self) -> String {
        format!("{}/{}", self.process, self.pid)
    }

    pub fn intern(&mut self, text: &str) -> TextId {
        self.intern.intern(text)
    }

    pub fn text(&self, event: &Event) -> &str {
        self.intern.resolve(event.text).unwrap_or("?")
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Append one event. The journal is raw history: duplicates are kept
    /// (deduplication happens at concept-graph merge). Counter shape and the
    /// causal back-link are validated; a root that was never emitted breaks
    /// the chain and is rejected.
    pub fn append(&mut self, event: Event) -> Result<(), JournalError> {
        if self.intern.resolve(event.text).is_none() {
            return Err(JournalError::UnknownText(event.text.0));
        }
        match event.kind {
            EventKind::Signpost | EventKind::Fork => {
                let root = event.root.ok_or(JournalError::InvalidCounters {
                    kind: event.kind,
                    root: event.root,
                    now: event.now,
                    delta: event.delta,
                })?;
                if event.delta != 1 || root >= event.now {
                    return Err(JournalError::InvalidCounters {
                        kind: event.kind,
                        root: event.root,
                        now: event.now,
                        delta: event.delta,
                    });
                }
                if root != crate::proper_time::PROGRAM_START_SIGNPOST
                    && !self.seen_signposts.contains(&root)
                {
                    return Err(JournalError::BrokenChain {
                        root,
                        now: event.now,
                    });
                }
                self.seen_signposts.insert(event.now);
            }
            EventKind::Detail => {
                if event.root.is_some() || event.delta < 2 || event.detail_class.is_none() {
                    return Err(JournalError::InvalidCounters {
                        kind: event.kind,
                        root: event.root,
                        now: event.now,
                        delta: event.delta,
                    });
                }
                if !self.seen_signposts.contains(&event.now) {
                    return Err(JournalError::BrokenChain {
                        root: event.now,
                        now: event.now,
                    });
                }
            }
        }
        self.events.push(event);
        Ok(())
    }

    /// Count of intervening records between two line indices; symmetric.
    pub fn distance(&self, a: usize, b: usize) -> Result<usize, JournalError> {
        let len = self.events.len();
        for index in [a, b] {
            if index >= len {
                return Err(JournalError::IndexOutOfRange { index, len });
            }
        }
        Ok(a.abs_diff(b))
    }

    /// Render the journal as a timeline, one line per event:
    /// timestamp column, `root --> NOW,delta` counters, then the text
    /// indented by subtime. Deterministic byte-for-byte.
    pub fn render_timeline(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "New process timeline for ( {} ) originally started as pid  {}",
            self.process, self.pid
        );
        out.push('\n');
        let _ = writeln!(
            out,
            "Unix clock context              | root --> NOW,delta  Comment indented by subtime"
        );
        let _ = writeln!(out, "{}", "-".repeat(90));
        for event in &self.events {
            let marker = match event.kind {
                EventKind::Signpost => "-->",
                EventKind::Detail => "->",
                EventKind::Fork => "go>",
            };
            let root = match event.root {
                Some(r) => r.to_string(),
                None => String::new(),
            };
            let indent = " ".repeat(2 * (event.delta as usize - 1));
            let text = self.render_text(event);
            let _ = writeln!(
                out,
                "{:<30}  |{:>5} {:>3}{:>4},{}      {}{}",
                event.timestamp.display(),
                root,
                marker,
                event.now,
                event.delta,
                indent,
                text
            );
        }
        out
    }

    /// Display form of one event's text: details are bracketed with their
    /// class, signposts are bare.
    pub fn render_text(&self, event: &Event) -> String {
        let text = self.text(event);
        match &event.detail_class {
            Some(class) if class.plain_text() => format!("[{}: : {}]", class.class, text),
            Some(class) => format!("[{}: {}]", class.class, text),
            None => text.to_string(),
        }
    }

    /// Serialize to the journal file format: header block (`process`,
    /// `pid`, intern table), then one tab-separated record per line. A
    /// format string goes into the table only when referencing it by id is
    /// smaller than repeating it inline, so the compressed form is never
    /// larger than [`Journal::to_lines_plain`].
    pub fn to_lines(&self) -> String {
        self.write_lines(true)
    }

    /// Baseline serialization with every text inline and no intern table.
    pub fn to_lines_plain(&self) -> String {
        self.write_lines(false)
    }

    fn write_lines(&self, compress: bool) -> String {
        let mut refs: std::collections::HashMap<u32, usize> = std::collections::HashMap::new();
        for event in &self.events {
            *refs.entry(event.text.0).or_default() += 1;
        }
        // match the serialized layout: table line costs len+d+6 bytes and
        // each reference 1+d, against 1+len inline; d conservatively 5
        let worthwhile = |len: usize, count: usize| -> bool {
            count >= 2 && len * (count - 1) >= 5 * (count + 1) + 6
        };
        let mut file_ids: std::collections::HashMap<u32, usize> = std::collections::HashMap::new();
        let mut table: Vec<String> = Vec::new();
        if compress {
            for event in &self.events {
                if file_ids.contains_key(&event.text.0) {
                    continue;
                }
                let escaped = escape(self.text(event));
                if worthwhile(escaped.len(), refs[&event.text.0]) {
                    file_ids.insert(event.text.0, table.len());
                    table.push(escaped);
                }
            }
        }

        let mut out = String::new();
        let _ = writeln!(out, "process\t{}", escape(&self.process));
        let _ = writeln!(out, "pid\t{}", escape(&self.pid));
        for (id, text) in table.iter().enumerate() {
            let _ = writeln!(out, "str\t{id}\t{text}");
        }
        for event in &self.events {
            let root = match event.root {
                Some(r) => r.to_string(),
                None => "-".to_string(),
            };
            let class = match &event.detail_class {
                Some(c) => format!("{}:{}", c.relation.letter(), escape(&c.class)),
                None => "-".to_string(),
            };
            let text = match file_ids.get(&event.text.0) {
                Some(id) => format!("#{id}"),
                None => format!("={}", escape(self.text(event))),
            };
            let _ = writeln!(
                out,
                "rec\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                escape(event.timestamp.display()),
                event.kind.letter(),
                root,
                event.now,
                event.delta,
                class,
                text
            );
        }
        out
    }

    /// Parse the journal file format. Records are re-appended, so causal
    /// chain validation applies on read as well.
    pub fn parse(input: &str) -> Result<Journal, JournalError> {
        let mut process: Option<String> = None;
        let mut pid: Option<String> = None;
        let mut table: Vec<String> = Vec::new();
        let mut journal: Option<Journal> = None;

        for (idx, line) in input.lines().enumerate() {
            let lineno = idx + 1;
            let err = |message: String| JournalError::Parse {
                line: lineno,
                message,
            };
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields[0] {
                "process" if fields.len() == 2 => process = Some(unescape(fields[1])),
                "pid" if fields.len() == 2 => pid = Some(unescape(fields[1])),
                "str" if fields.len() == 3 => {
                    let id: usize = fields[1]
                        .parse()
                        .map_err(|_| err(format!("bad intern id {:?}", fields[1])))?;
                    if id != table.len() {
                        return Err(err(format!("intern id {id} out of sequence")));
                    }
                    table.push(unescape(fields[2]));
                }
                "rec" => {
                    if fields.len() != 8 {
                        return Err(err(format!(
                            "record has {} fields, expected 8",
                            fields.len()
                        )));
                    }
                    let journal = journal.get_or_insert_with(|| {
                        Journal::new(
                            process.clone().unwrap_or_default(),
                            pid.clone().unwrap_or_default(),
                        )
                    });
                    let timestamp = Timestamp::from_display(unescape(fields[1]));
                    let kind = match fields[2] {
                        "S" => EventKind::Signpost,
                        "D" => EventKind::Detail,
                        "F" => EventKind::Fork,
                        other => return Err(err(format!("unknown kind {other:?}"))),
                    };
                    let root = match fields[3] {
                        "-" => None,
                        r => Some(
                            r.parse::<u64>()
                                .map_err(|_| err(format!("bad root {r:?}")))?,
                        ),
                    };
                    let now: u64 = fields[4]
                        .parse()
                        .map_err(|_| err(format!("bad now {:?}", fields[4])))?;
                    let delta: u32 = fields[5]
                        .parse()
                        .map_err(|_| err(format!("bad delta {:?}", fields[5])))?;
                    let detail_class = match fields[6] {
                        "-" => None,
                        tagged => {
                            let (rel, class) = tagged
                                .split_once(':')
                                .ok_or_else(|| err(format!("bad class {tagged:?}")))?;
                            let relation = AnnotationKind::from_letter(rel)
                                .ok_or_else(|| err(format!("bad relation tag {rel:?}")))?;
                            Some(DetailClass::new(unescape(class), relation))
                        }
                    };
                    let text = match fields[7].split_at_checked(1) {
                        Some(("#", id)) => {
                            let id: usize = id
                                .parse()
                                .map_err(|_| err(format!("bad text ref {:?}", fields[7])))?;
                            let resolved = table
                                .get(id)
                                .ok_or_else(|| err(format!("text ref {id} not in table")))?;
                            journal.intern.intern(resolved)
                        }
                        Some(("=", inline)) => journal.intern.intern(&unescape(inline)),
                        _ => return Err(err(format!("bad text field {:?}", fields[7]))),
                    };
                    let event = Event {
                        kind,
                        root,
                        now,
                        delta,
                        text,
                        detail_class,
                        timestamp,
                    };
                    journal.append(event).map_err(|e| match e {
                        JournalError::BrokenChain { .. } => e,
                        other => err(other.to_string()),
                    })?;
                }
                other => return Err(err(format!("unknown record tag {other:?}"))),
            }
        }

        if process.is_none() {
            return Err(JournalError::Parse {
                line: 0,
                message: "missing process header".to_string(),
            });
        }
        Ok(journal
            .unwrap_or_else(|| Journal::new(process.unwrap_or_default(), pid.unwrap_or_default())))
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<(), JournalError> {
        fs::write(path, self.to_lines())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Journal, JournalError> {
        let text = fs::read_to_string(path)?;
        Journal::parse(&text)
    }
}
