//! Acceptance suite: one test per promised behaviour, each printing a
//! PASS/FAIL line (visible with `cargo test --test acceptance -- --nocapture`).

use std::time::Instant;

use hindsight::concept::{ConceptGraph, ConceptKey, EdgeObservation, GraphError, RelationType};
use hindsight::demo::record_demo;
use hindsight::journal::EventKind;
use hindsight::metrics::{
    mixing_entropy, recommend_sampling, significance, BucketSeries, CategorizedStream,
    SampleSeries, Significance,
};
use hindsight::signpost::{TimestampMode, Tracer};
use hindsight::sim::{
    run_coupling_experiment, run_order_experiment, sample_series, ChannelConfig, Reliability,
};
use hindsight::story::{search, StoryQuery};

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($msg)+));
        }
    };
}

fn criterion(name: &str, check: impl FnOnce() -> Result<(), String>) {
    match check() {
        Ok(()) => println!("PASS {name}"),
        Err(e) => {
            println!("FAIL {name}: {e}");
            panic!("{name}: {e}");
        }
    }
}

/// Locked counter structure of the demo timeline:
/// (kind, root, now, delta, detail class).
type Row = (char, Option<u64>, u64, u32, Option<&'static str>);

const DEMO_STRUCTURE: &[Row] = &[
    ('S', Some(0), 1, 1, None),
    ('D', None, 1, 2, Some("function")),
    ('S', Some(1), 2, 1, None),
    ('D', None, 2, 2, Some("remarked")),
    ('D', None, 2, 3, Some("go package")),
    ('D', None, 2, 4, Some("btw")),
    ('D', None, 2, 5, Some("remarked")),
    ('S', Some(2), 3, 1, None),
    ('D', None, 3, 2, Some("intent")),
    ('D', None, 3, 3, Some("file")),
    ('D', None, 3, 4, Some("dns lookup")),
    ('D', None, 3, 5, Some("btw")),
    ('D', None, 3, 6, Some("coroutine")),
    ('S', Some(3), 4, 1, None),
    ('F', Some(3), 5, 1, None),
    ('D', None, 4, 2, Some("btw")),
    ('D', None, 5, 2, Some("btw")),
    ('D', None, 5, 3, Some("intent")),
    ('D', None, 5, 4, Some("file")),
    ('D', None, 5, 5, Some("remarked")),
    ('D', None, 5, 6, Some("system error message")),
    ('D', None, 4, 3, Some("remarked")),
    ('F', Some(3), 6, 1, None),
    ('D', None, 6, 2, Some("remarked")),
    ('D', None, 6, 3, Some("anomalous CPU spike")),
    ('S', Some(6), 7, 1, None),
    ('D', None, 7, 2, Some("btw")),
    ('S', Some(7), 8, 1, None),
    ('D', None, 8, 2, Some("btw")),
    ('F', Some(6), 9, 1, None),
    ('D', None, 9, 2, Some("btw")),
    ('D', None, 9, 3, Some("remarked")),
    ('D', None, 9, 4, Some("remarked")),
    ('D', None, 9, 5, Some("remarked")),
    ('D', None, 9, 6, Some("remarked")),
    ('F', Some(6), 10, 1, None),
    ('S', Some(10), 11, 1, None),
];

#[test]
fn criterion_1_demo_timeline_structure() {
    criterion(
        "demo timeline reproduces the locked counter structure",
        || {
            let started = Instant::now();
            let journal = record_demo(TimestampMode::Fixed);
            ensure!(
                journal.len() == DEMO_STRUCTURE.len(),
                "expected {} events, journal has {}",
                DEMO_STRUCTURE.len(),
                journal.len()
            );
            for (i, (event, row)) in journal.events().iter().zip(DEMO_STRUCTURE).enumerate() {
                let kind = match event.kind {
                    EventKind::Signpost => 'S',
                    EventKind::Detail => 'D',
                    EventKind::Fork => 'F',
                };
                let class = event.detail_class.as_ref().map(|c| c.class.as_str());
                let got = (kind, event.root, event.now, event.delta, class);
                let want = (row.0, row.1, row.2, row.3, row.4);
                ensure!(got == want, "event {i}: got {got:?}, want {want:?}");
            }
            let rendered = journal.render_timeline();
            for needle in [
                "0 -->   1,1      MainLoop start",
                "1 -->   2,1      Beginning of test code",
                "2 -->   3,1      code signpost X",
                "3 go>   5,1      TEST1---------",
                "3 go>   6,1      Commence testing",
            ] {
                ensure!(rendered.contains(needle), "timeline missing {needle:?}");
            }
            ensure!(
                started.elapsed().as_secs_f64() < 1.0,
                "took {:?}",
                started.elapsed()
            );
            Ok(())
        },
    );
}

#[test]
fn criterion_2_concept_map_and_causal_chain() {
    criterion("concept map and causal chain match the reference", || {
        let started = Instant::now();
        let journal = record_demo(TimestampMode::Fixed);
        let mut graph = ConceptGraph::new();
        let report = graph.ingest(&journal);
        ensure!(
            report.errors.is_empty(),
            "ingest errors: {:?}",
            report.errors
        );

        let stories = search(
            &graph,
            &StoryQuery::retarded(ConceptKey::program_start()).with_max_stories(1000),
        )
        .map_err(|e| e.to_string())?;
        let map = hindsight::story::render_map(&graph, &stories);
        for needle in [
            "(program start) --b(precedes)--> \"MainLoop start\"",
            "(code signpost X) --b(may determine)--> \"[dns lookup: 123.456.789.123]\"",
        ] {
            ensure!(map.contains(needle), "map missing {needle:?}");
        }

        let stories = search(
            &graph,
            &StoryQuery::causal(
                ConceptKey::signpost("MainLoop start"),
                ConceptKey::signpost("The end!"),
            ),
        )
        .map_err(|e| e.to_string())?;
        ensure!(!stories.is_empty(), "causal search returned no story");
        let names: Vec<&str> = stories[0]
            .concepts()
            .iter()
            .map(|k| k.name.as_str())
            .collect();
        let want = [
            "MainLoop start",
            "Beginning of test code",
            "code signpost X",
            "Commence testing",
            "The end!",
        ];
        ensure!(names == want, "chain was {names:?}");
        ensure!(
            started.elapsed().as_secs_f64() < 1.0,
            "took {:?}",
            started.elapsed()
        );
        Ok(())
    });
}

#[test]
fn criterion_3_entropy_of_mixing() {
    criterion(
        "unlabelled mixing maximizes entropy, labels preserve it",
        || {
            for k in [2usize, 4, 8] {
                let alphabet: Vec<String> = (1..=k).map(|i| format!("c{i}")).collect();
                let mut stream = CategorizedStream::new(alphabet.clone());
                for (i, category) in alphabet.iter().enumerate() {
                    for _ in 0..=i {
                        stream.push("payload", Some(category));
                    }
                }

                let mixed = mixing_entropy(&stream, false).map_err(|e| e.to_string())?;
                let max = (k as f64).log2();
                ensure!(
                    mixed.entropy_bits == max,
                    "k={k}: unlabelled entropy {} != {max}",
                    mixed.entropy_bits
                );
                let deviation = mixed
                    .posterior
                    .values()
                    .map(|p| (p - 1.0 / k as f64).abs())
                    .fold(0.0, f64::max);
                ensure!(deviation == 0.0, "k={k}: posterior deviates by {deviation}");
                ensure!(
                    significance(&mixed) == Significance::None,
                    "k={k}: mixed significance not none"
                );

                let labelled = mixing_entropy(&stream, true).map_err(|e| e.to_string())?;
                ensure!(
                    labelled.entropy_bits == 0.0,
                    "k={k}: labelled entropy {}",
                    labelled.entropy_bits
                );
                ensure!(
                    significance(&labelled) == Significance::Maximal,
                    "k={k}: labelled significance not maximal"
                );
            }
            Ok(())
        },
    );
}

#[test]
fn criterion_4_order_recovery_under_latency() {
    criterion(
        "sequence promises recover order, latency destroys it",
        || {
            let n = 100;
            for width in [2u64, 10] {
                let mut reordered_seeds = 0;
                for seed in 0..100 {
                    let reliable = run_order_experiment(
                        &ChannelConfig {
                            reliability: Reliability::Reliable,
                            latency_width: width,
                            seed,
                        },
                        n,
                    );
                    ensure!(
                        reliable.inversions == 0 && reliable.recovered,
                        "seed {seed} width {width}: reliable channel lost order"
                    );
                    let raw = run_order_experiment(
                        &ChannelConfig {
                            reliability: Reliability::Unreliable,
                            latency_width: width,
                            seed,
                        },
                        n,
                    );
                    if raw.inversions >= 1 {
                        reordered_seeds += 1;
                    }
                }
                ensure!(
                    reordered_seeds >= 90,
                    "width {width}: only {reordered_seeds}/100 seeds reordered"
                );
            }
            Ok(())
        },
    );
}

#[test]
fn criterion_5_coupling_falls_as_one_over_n() {
    criterion(
        "effective coupling ~ 1/n within 20%, monotone, <= 1",
        || {
            let mut previous = f64::INFINITY;
            for n in [1u64, 2, 10, 100] {
                let report = run_coupling_experiment(1, n, 100 * n);
                let expected = 1.0 / n as f64;
                let relative = (report.coupling - expected).abs() / expected;
                ensure!(
                    relative <= 0.20,
                    "n={n}: coupling {} is {relative:.3} away from {expected}",
                    report.coupling
                );
                ensure!(report.coupling <= 1.0, "n={n}: coupling above 1");
                ensure!(
                    report.coupling <= previous,
                    "n={n}: coupling increased ({} -> {})",
                    previous,
                    report.coupling
                );
                previous = report.coupling;
            }
            Ok(())
        },
    );
}

fn second_journal() -> hindsight::journal::Journal {
    let tracer = Tracer::with_mode("sidekick-2.0", "7", TimestampMode::Fixed);
    let main = tracer.main_lane();
    let h = tracer.signpost(main, "warmup").unwrap();
    h.part_of("sidekick", "function").unwrap();
    let h = tracer.signpost(main, "Commence testing").unwrap();
    h.relies_on("10.0.0.1", "dns lookup").unwrap();
    tracer.signpost(main, "cooldown").unwrap();
    tracer.into_journal()
}

#[test]
fn criterion_6_idempotent_and_commutative_merges() {
    criterion(
        "graph and bucket merges are idempotent and commutative",
        || {
            let a = record_demo(TimestampMode::Fixed);
            let b = second_journal();

            let mut once = ConceptGraph::new();
            once.ingest(&a);
            let file_once = once.to_lines();
            once.ingest(&a);
            ensure!(
                once.to_lines() == file_once,
                "re-ingesting the same journal changed the graph file"
            );

            let mut forward = ConceptGraph::new();
            forward.ingest(&a);
            forward.ingest(&b);
            let mut backward = ConceptGraph::new();
            backward.ingest(&b);
            backward.ingest(&a);
            ensure!(
                forward.to_lines() == backward.to_lines(),
                "ingestion order changed the graph file"
            );
            let mut noisy = ConceptGraph::new();
            for journal in [&b, &a, &b, &b, &a] {
                noisy.ingest(journal);
            }
            ensure!(
                noisy.to_lines() == forward.to_lines(),
                "duplicated ingestion changed the graph file"
            );

            let observations: Vec<(u64, f64)> = vec![
                (5, 1.0),
                (15, 8.0),
                (105, 2.0),
                (205, 4.0),
                (215, 16.0),
                (305, 3.0),
            ];
            let mut ordered = BucketSeries::new(100, 10, 0.5).map_err(|e| e.to_string())?;
            for (t, v) in &observations {
                ordered.update(*t, *v);
            }
            let mut scrambled = BucketSeries::new(100, 10, 0.5).map_err(|e| e.to_string())?;
            for (t, v) in [
                (305u64, 3.0),
                (15, 8.0),
                (215, 16.0),
                (5, 1.0),
                (105, 2.0),
                (205, 4.0),
            ] {
                scrambled.update(t, v);
                scrambled.update(t, v); // duplicates are no-ops
            }
            ensure!(
                ordered.to_lines() == scrambled.to_lines(),
                "bucket state depends on observation order"
            );
            Ok(())
        },
    );
}

#[test]
fn criterion_7_selection_rules() {
    criterion("exclusive relation types conflict, NEAR coexists", || {
        let exclusive = [
            RelationType::Contains,
            RelationType::Follows,
            RelationType::Expresses,
        ];
        let a = ConceptKey::signpost("first");
        let b = ConceptKey::signpost("second");
        for first in exclusive {
            for second in exclusive {
                let mut graph = ConceptGraph::new();
                graph
                    .add_edge(EdgeObservation::new(a.clone(), b.clone(), first))
                    .map_err(|e| e.to_string())?;
                let result = graph.add_edge(EdgeObservation::new(a.clone(), b.clone(), second));
                if first == second {
                    ensure!(result.is_ok(), "{first:?} twice should merge");
                } else {
                    ensure!(
                        matches!(result, Err(GraphError::IncompatibleRelation { .. })),
                        "{second:?} after {first:?} did not error"
                    );
                }
            }
        }
        for exclusive_type in exclusive {
            let mut graph = ConceptGraph::new();
            graph
                .add_edge(EdgeObservation::new(
                    a.clone(),
                    b.clone(),
                    RelationType::Near,
                ))
                .map_err(|e| e.to_string())?;
            graph
                .add_edge(EdgeObservation::new(a.clone(), b.clone(), exclusive_type))
                .map_err(|e| format!("{exclusive_type:?} after NEAR: {e}"))?;

            let mut graph = ConceptGraph::new();
            graph
                .add_edge(EdgeObservation::new(a.clone(), b.clone(), exclusive_type))
                .map_err(|e| e.to_string())?;
            graph
                .add_edge(EdgeObservation::new(
                    a.clone(),
                    b.clone(),
                    RelationType::Near,
                ))
                .map_err(|e| format!("NEAR after {exclusive_type:?}: {e}"))?;
        }
        Ok(())
    });
}

/// Brute-force oracle: every simple path from `start` to `end` with at most
/// `max_depth` edges, by plain recursive enumeration.
fn enumerate_paths(
    adjacency: &[Vec<usize>],
    at: usize,
    end: usize,
    max_depth: usize,
    path: &mut Vec<usize>,
    found: &mut Vec<Vec<usize>>,
) {
    if at == end {
        found.push(path.clone());
        return;
    }
    if max_depth == 0 {
        return;
    }
    for &next in &adjacency[at] {
        if path.contains(&next) {
            continue;
        }
        path.push(next);
        enumerate_paths(adjacency, next, end, max_depth - 1, path, found);
        path.pop();
    }
}

#[test]
fn criterion_8_search_matches_brute_force_on_small_dags() {
    criterion("causal search equals brute-force path enumeration", || {
        use rand::Rng;
        use rand::SeedableRng;
        for seed in 0..300u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let nodes = rng.random_range(2..=8usize);
            let density = rng.random_range(0.2..0.7f64);
            let max_depth = rng.random_range(1..=8usize);
            let mut adjacency = vec![Vec::new(); nodes];
            let mut graph = ConceptGraph::new();
            let keys: Vec<ConceptKey> = (0..nodes)
                .map(|i| ConceptKey::signpost(format!("n{i}")))
                .collect();
            for key in &keys {
                graph.observe_concept(key, None);
            }
            for i in 0..nodes {
                for j in i + 1..nodes {
                    if rng.random_bool(density) {
                        adjacency[i].push(j);
                        graph
                            .add_edge(EdgeObservation::new(
                                keys[i].clone(),
                                keys[j].clone(),
                                RelationType::Follows,
                            ))
                            .map_err(|e| e.to_string())?;
                    }
                }
            }
            let mut path = vec![0];
            let mut expected = Vec::new();
            enumerate_paths(
                &adjacency,
                0,
                nodes - 1,
                max_depth,
                &mut path,
                &mut expected,
            );
            let mut expected: Vec<Vec<String>> = expected
                .into_iter()
                .map(|p| p.into_iter().map(|i| keys[i].name.clone()).collect())
                .collect();
            expected.sort();

            let stories = search(
                &graph,
                &StoryQuery::causal(keys[0].clone(), keys[nodes - 1].clone())
                    .with_depth(max_depth)
                    .with_max_stories(usize::MAX),
            )
            .map_err(|e| e.to_string())?;
            let mut got: Vec<Vec<String>> = stories
                .iter()
                .map(|s| s.concepts().iter().map(|k| k.name.clone()).collect())
                .collect();
            got.sort();
            ensure!(
                got == expected,
                "seed {seed}: search found {} paths, oracle {}",
                got.len(),
                expected.len()
            );
        }
        Ok(())
    });
}

/// Independent autocorrelation-time oracle: direct evaluation of the
/// normalized autocorrelation at every lag, first crossing below 1/e.
fn autocorr_crossing_oracle(values: &[f64]) -> usize {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let denom: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    for lag in 1..n / 2 {
        let mut num = 0.0;
        for t in 0..n - lag {
            num += (values[t] - mean) * (values[t + lag] - mean);
        }
        if num / denom < 1.0 / std::f64::consts::E {
            return lag;
        }
    }
    n / 2
}

#[test]
fn criterion_9_sampling_recommendation() {
    criterion("sampling interval tracks the autocorrelation time", || {
        let sine = |period: f64| -> Vec<f64> {
            (0..1024)
                .map(|t| (2.0 * std::f64::consts::PI * t as f64 / period).sin())
                .collect()
        };

        let values = sine(64.0);
        let oracle = autocorr_crossing_oracle(&values);
        ensure!(
            (oracle as f64 - 12.4).abs() <= 2.0,
            "oracle crossing {oracle} is far from the analytic 12.4"
        );
        let advice =
            recommend_sampling(&SampleSeries::new(values.clone())).map_err(|e| e.to_string())?;
        ensure!(
            advice.autocorr_time.abs_diff(oracle) <= 2,
            "recommender {} vs oracle {oracle}",
            advice.autocorr_time
        );

        let constant = SampleSeries::new(vec![3.0; 256]);
        ensure!(
            recommend_sampling(&constant).is_err(),
            "constant series should have no signal"
        );

        // decimating by the recommended interval keeps the estimate stable
        for period in [16.0, 32.0, 64.0, 128.0] {
            let values = sine(period);
            let advice = recommend_sampling(&SampleSeries::new(values.clone()))
                .map_err(|e| e.to_string())?;
            let interval = advice.recommended_interval;
            let decimated = SampleSeries {
                values: sample_series(&values, interval),
                spacing: interval as u32,
            };
            let again = recommend_sampling(&decimated).map_err(|e| e.to_string())?;
            let ratio = again.autocorr_time as f64 / advice.autocorr_time as f64;
            ensure!(
                (0.5..=2.0).contains(&ratio),
                "period {period}: tau drifted from {} to {} ticks",
                advice.autocorr_time,
                again.autocorr_time
            );
        }
        Ok(())
    });
}
