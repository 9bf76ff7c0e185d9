//! Browser bindings for the tracing toolkit: the demo timeline, story
//! searches over the demo concept graph, and the channel experiments,
//! exposed as plain string-returning functions for a static page.

use wasm_bindgen::prelude::*;

use hindsight::concept::{ConceptGraph, ConceptKey};
use hindsight::demo::record_demo;
use hindsight::metrics::{mixing_entropy, significance, CategorizedStream};
use hindsight::signpost::TimestampMode;
use hindsight::sim::{run_coupling_experiment, run_order_experiment, ChannelConfig, Reliability};
use hindsight::story::{render_map, search, SearchMode, StoryQuery};

fn demo_graph() -> ConceptGraph {
    let mut graph = ConceptGraph::new();
    graph.ingest(&record_demo(TimestampMode::Fixed));
    graph
}

/// The demo program's journal rendered as a timeline.
#[wasm_bindgen]
pub fn demo_timeline() -> String {
    record_demo(TimestampMode::Fixed).render_timeline()
}

/// Signpost concept names of the demo graph, one per line (for pickers).
#[wasm_bindgen]
pub fn demo_concepts() -> String {
    let graph = demo_graph();
    let mut names: Vec<String> = graph
        .nodes()
        .filter(|n| n.key.namespace == "signpost")
        .map(|n| n.key.name.clone())
        .collect();
    names.sort();
    names.join("\n")
}

/// Cone search over the demo graph; returns the rendered story map or an
/// error message prefixed with `error:`.
#[wasm_bindgen]
pub fn demo_story(mode: &str, from: &str, to: &str, max_depth: u32, definite_only: bool) -> String {
    let mode = match mode {
        "retarded" => SearchMode::Retarded,
        "advanced" => SearchMode::Advanced,
        _ => SearchMode::Causal,
    };
    let optional = |name: &str| {
        let name = name.trim();
        (!name.is_empty()).then(|| ConceptKey::signpost(name))
    };
    let mut query = StoryQuery {
        mode,
        start: optional(from),
        end: optional(to),
        max_depth: max_depth as usize,
        max_stories: 100,
        include_may: !definite_only,
    };
    if query.mode == SearchMode::Retarded && query.start.is_none() {
        query.start = Some(ConceptKey::program_start());
    }
    let graph = demo_graph();
    match search(&graph, &query) {
        Ok(stories) => render_map(&graph, &stories),
        Err(e) => format!("error: {e}"),
    }
}

/// Order experiment across `seeds` consecutive seeds: CSV rows of
/// `seed,inversions,recovered`.
#[wasm_bindgen]
pub fn order_sweep(latency_width: u32, messages: u32, reliable: bool, seeds: u32) -> String {
    let mut out = String::from("seed,inversions,recovered\n");
    for seed in 0..seeds.max(1) as u64 {
        let report = run_order_experiment(
            &ChannelConfig {
                reliability: if reliable {
                    Reliability::Reliable
                } else {
                    Reliability::Unreliable
                },
                latency_width: latency_width as u64,
                seed,
            },
            messages as u64,
        );
        out.push_str(&format!(
            "{seed},{},{}\n",
            report.inversions, report.recovered
        ));
    }
    out
}

/// Coupling sweep over aggregation factors 1,2,4,... up to `max_n`:
/// CSV rows of `n,coupling,t_receiver`.
#[wasm_bindgen]
pub fn coupling_sweep(max_n: u32) -> String {
    let mut out = String::from("n,coupling,t_receiver\n");
    let mut n = 1u64;
    while n <= max_n.max(1) as u64 {
        let report = run_coupling_experiment(1, n, 100 * n);
        out.push_str(&format!("{n},{},{}\n", report.coupling, report.t_receiver));
        n *= 2;
    }
    out
}

/// Entropy-of-mixing readout for a uniform stream over `alphabet`
/// categories: `entropy_bits,max_bits,significance`.
#[wasm_bindgen]
pub fn mixing_readout(alphabet: u32, labelled: bool) -> String {
    let names: Vec<String> = (1..=alphabet.max(1)).map(|i| format!("c{i}")).collect();
    let mut stream = CategorizedStream::new(names.clone());
    for name in &names {
        stream.push("item", labelled.then_some(name.as_str()));
    }
    match mixing_entropy(&stream, labelled) {
        Ok(report) => format!(
            "{},{},{}",
            report.entropy_bits,
            report.max_bits,
            significance(&report)
        ),
        Err(e) => format!("error: {e}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timeline_and_story_exports_render() {
        assert!(demo_timeline().contains("MainLoop start"));
        let map = demo_story("causal", "MainLoop start", "The end!", 8, false);
        assert!(map.contains("(Commence testing) --b(precedes)--> \"The end!\""));
        assert!(demo_concepts().contains("code signpost X"));
    }

    #[test]
    fn sweeps_emit_csv() {
        let order = order_sweep(10, 50, false, 4);
        assert_eq!(order.lines().count(), 5);
        let coupling = coupling_sweep(8);
        assert!(coupling.contains("\n8,0.125,"));
        assert!(mixing_readout(4, false).starts_with("2,2,"));
    }
}
