//! Command-line surface for the tracing toolkit.
//!
//! Exit codes: 0 success, 1 usage error, 2 input/parse error, 3 invariant
//! violation detected (e.g. a journal with a broken causal chain).

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hindsight::concept::{observable, ConceptGraph, ConceptKey, ContextSet, PromiseRecord};
use hindsight::journal::{Journal, JournalError};
use hindsight::metrics::{
    mixing_entropy, parse_observations, parse_series, recommend_sampling, significance,
    BucketSeries, CategorizedStream, SampleSeries,
};
use hindsight::signpost::TimestampMode;
use hindsight::sim::{
    run_coupling_experiment, run_order_experiment, run_push_pull, sample_series, ChannelConfig,
    FlowConfig, FlowMode, Reliability,
};
use hindsight::story::{detect_loops, rank_paths, render_map, search, story_records, StoryQuery};

#[derive(Parser)]
#[command(
    name = "hindsight",
    version,
    about = "Causal-history tracing: journals, concept maps, stories, and channel experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scripted demo program and write its journal
    Demo {
        /// Journal file to write
        #[arg(long)]
        out: PathBuf,
        /// Stamp fixed timestamps so repeated runs are byte-identical
        #[arg(long)]
        seedless_timestamps: bool,
    },
    /// Render a journal file as a timeline
    Render {
        #[arg(long)]
        journal: PathBuf,
        /// Also report the metric distance between two line indices
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        distance: Option<Vec<usize>>,
    },
    /// Concept graph operations
    Concepts {
        #[command(subcommand)]
        command: ConceptsCommand,
    },
    /// Search the concept graph for stories and render the map
    Story(StoryArgs),
    /// Channel simulation experiments
    Sim {
        #[command(subcommand)]
        command: SimCommand,
    },
    /// Entropy, sampling, and bucket analyses
    Metrics {
        #[command(subcommand)]
        command: MetricsCommand,
    },
}

#[derive(Subcommand)]
enum ConceptsCommand {
    /// Build a concept graph file from one or more journals
    Build {
        /// Graph file to write
        #[arg(long)]
        out: PathBuf,
        /// Journal files to ingest
        #[arg(required = true)]
        journals: Vec<PathBuf>,
    },
    /// Check traceability of a concept and reversibility of the graph
    Trace {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        concept: String,
        #[arg(long, default_value = "signpost")]
        namespace: String,
    },
    /// Check whether an alert's conditional contexts were promised
    Context {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        alert: String,
        #[arg(long, default_value = "signpost")]
        alert_namespace: String,
        /// Comma-separated context concept names
        #[arg(long, value_delimiter = ',')]
        contexts: Vec<String>,
        #[arg(long, default_value = "signpost")]
        contexts_namespace: String,
    },
    /// Observability check between an offer and an acceptance promise
    Observe {
        #[arg(long, default_value = "S")]
        giver: String,
        #[arg(long, default_value = "R")]
        receiver: String,
        /// Offered body values, comma-separated
        #[arg(long, value_delimiter = ',', required = true)]
        offer: Vec<String>,
        /// Accepted body values; omit to model a missing acceptance
        #[arg(long, value_delimiter = ',')]
        accept: Option<Vec<String>>,
    },
}

#[derive(Args)]
struct StoryArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Causal)]
    mode: ModeArg,
    /// Start concept (retarded/causal)
    #[arg(long)]
    from: Option<String>,
    #[arg(long, default_value = "signpost")]
    from_namespace: String,
    /// End concept (advanced/causal)
    #[arg(long)]
    to: Option<String>,
    #[arg(long, default_value = "signpost")]
    to_namespace: String,
    #[arg(long, default_value_t = 8)]
    max_depth: usize,
    #[arg(long, default_value_t = 50)]
    max_stories: usize,
    /// Drop "may determine" dependency edges from the search
    #[arg(long)]
    definite_only: bool,
    /// Re-rank stories by observed transition weights (classical paths)
    #[arg(long)]
    classical: bool,
    /// Also emit structured step records
    #[arg(long)]
    steps: bool,
    /// Report causal loops instead of searching
    #[arg(long)]
    loops: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Retarded,
    Advanced,
    Causal,
}

#[derive(Subcommand)]
enum SimCommand {
    /// Message ordering under latency, with and without sequence promises
    Order {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        messages: u64,
        #[arg(long, default_value_t = 10)]
        latency_width: u64,
        /// Promise sequence numbers and recover source order
        #[arg(long)]
        reliable: bool,
        #[arg(long)]
        csv: bool,
    },
    /// Effective coupling under n-fold aggregation
    Coupling {
        /// Aggregation factor: events per assessment
        #[arg(long, default_value_t = 10)]
        n: u64,
        /// Ticks between source events
        #[arg(long, default_value_t = 1)]
        emit_interval: u64,
        /// Source events to run; default 100 * n
        #[arg(long)]
        events: Option<u64>,
        #[arg(long)]
        csv: bool,
    },
    /// Queue behaviour under push impositions or pull invitations
    Pushpull {
        #[arg(long, value_enum, default_value_t = FlowArg::Push)]
        mode: FlowArg,
        /// Source emissions per tick
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        /// Receiver samples per tick
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        /// Receiver queue capacity (push mode)
        #[arg(long)]
        capacity: Option<usize>,
        /// In-flight quota (pull mode)
        #[arg(long, default_value_t = 1)]
        quota: usize,
        #[arg(long, default_value_t = 1000)]
        duration: u64,
        /// Extra burst arrivals every this many ticks
        #[arg(long)]
        burst_period: Option<u64>,
        #[arg(long, default_value_t = 0)]
        burst_size: u64,
        #[arg(long)]
        csv: bool,
    },
    /// Decimate a series, keeping every interval-th sample
    Sample {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        interval: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FlowArg {
    Push,
    Pull,
}

#[derive(Subcommand)]
enum MetricsCommand {
    /// Entropy of mixing for a categorized stream
    Entropy {
        /// Alphabet size; categories are named c1..cN
        #[arg(long, default_value_t = 4)]
        alphabet: usize,
        /// Per-category item counts, comma-separated (default 1 each)
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<u64>>,
        /// Keep category labels on every item
        #[arg(long, conflicts_with = "unlabelled")]
        labelled: bool,
        /// Aggregate without labels (the default)
        #[arg(long)]
        unlabelled: bool,
        #[arg(long)]
        csv: bool,
    },
    /// Recommend a sampling interval from autocorrelation time
    Sampling {
        /// CSV series, one sample per line (last field is the value)
        #[arg(long)]
        input: PathBuf,
    },
    /// Fold timestamped observations into a cyclic bucket series
    Buckets {
        /// Cycle period, in the timestamp unit
        #[arg(long)]
        period: u64,
        /// Bucket width; must divide the period exactly
        #[arg(long)]
        width: u64,
        /// Forgetting factor applied per wrap
        #[arg(long, default_value_t = BucketSeries::DEFAULT_DECAY)]
        decay: f64,
        /// CSV observations: timestamp,value per line
        #[arg(long)]
        input: PathBuf,
        /// Bucket state file to create or update
        #[arg(long)]
        state: PathBuf,
    },
}

enum CliError {
    /// Bad or unreadable input data.
    Input(String),
    /// The data violates a promised invariant (broken causal chain).
    Invariant(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Invariant(m) => m,
        }
    }
}

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn read_journal(path: &PathBuf) -> Result<Journal, CliError> {
    Journal::read_file(path).map_err(|e| match e {
        JournalError::BrokenChain { .. } | JournalError::InvalidCounters { .. } => {
            CliError::Invariant(format!("{}: {e}", path.display()))
        }
        other => CliError::Input(format!("{}: {other}", path.display())),
    })
}

fn read_graph(path: &PathBuf) -> Result<ConceptGraph, CliError> {
    ConceptGraph::read_file(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders --help/--version through the error path too
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Demo {
            out,
            seedless_timestamps,
        } => {
            let mode = if seedless_timestamps {
                TimestampMode::Fixed
            } else {
                TimestampMode::Wall
            };
            let journal = hindsight::demo::record_demo(mode);
            journal
                .write_file(&out)
                .map_err(|e| CliError::Input(format!("{}: {e}", out.display())))?;
            println!("wrote {} ({} events)", out.display(), journal.len());
            Ok(())
        }
        Command::Render { journal, distance } => {
            let journal = read_journal(&journal)?;
            print!("{}", journal.render_timeline());
            if let Some(pair) = distance {
                let d = journal.distance(pair[0], pair[1]).map_err(input_err)?;
                println!("distance({},{}) = {d}", pair[0], pair[1]);
            }
            Ok(())
        }
        Command::Concepts { command } => run_concepts(command),
        Command::Story(args) => run_story(args),
        Command::Sim { command } => run_sim(command),
        Command::Metrics { command } => run_metrics(command),
    }
}

fn run_concepts(command: ConceptsCommand) -> Result<(), CliError> {
    match command {
        ConceptsCommand::Build { out, journals } => {
            let mut graph = ConceptGraph::new();
            for path in &journals {
                let journal = read_journal(path)?;
                let report = graph.ingest(&journal);
                for error in &report.errors {
                    eprintln!("warning: {}: {error}", path.display());
                }
                println!(
                    "ingested {}: {} events, {} observations, {} duplicates",
                    path.display(),
                    report.events,
                    report.observations,
                    report.skipped
                );
            }
            graph
                .write_file(&out)
                .map_err(|e| CliError::Input(format!("{}: {e}", out.display())))?;
            println!(
                "wrote {} ({} concepts, {} edges)",
                out.display(),
                graph.nodes().count(),
                graph.edges().count()
            );
            Ok(())
        }
        ConceptsCommand::Trace {
            graph,
            concept,
            namespace,
        } => {
            let graph = read_graph(&graph)?;
            let key = ConceptKey::new(namespace, concept);
            let traceable = graph.is_traceable(&key).map_err(input_err)?;
            println!("concept {}", key.display());
            println!("traceable {traceable}");
            println!("reversible {}", graph.is_reversible());
            Ok(())
        }
        ConceptsCommand::Context {
            graph,
            alert,
            alert_namespace,
            contexts,
            contexts_namespace,
        } => {
            let graph = read_graph(&graph)?;
            let set = ContextSet {
                alert: ConceptKey::new(alert_namespace, alert),
                contexts: contexts
                    .into_iter()
                    .filter(|c| !c.is_empty())
                    .map(|c| ConceptKey::new(contexts_namespace.clone(), c))
                    .collect(),
            };
            let report = graph.check_context(&set).map_err(input_err)?;
            if report.complete {
                println!("complete");
            } else {
                for key in &report.missing {
                    println!("lost {}", key.display());
                }
            }
            Ok(())
        }
        ConceptsCommand::Observe {
            giver,
            receiver,
            offer,
            accept,
        } => {
            let offer_record = PromiseRecord {
                giver: giver.clone(),
                receiver: receiver.clone(),
                sign: hindsight::concept::Orientation::Plus,
                body: offer.into_iter().collect::<BTreeSet<_>>(),
                condition: None,
            };
            let accept_record = accept.map(|body| PromiseRecord {
                giver: receiver,
                receiver: giver,
                sign: hindsight::concept::Orientation::Minus,
                body: body.into_iter().collect::<BTreeSet<_>>(),
                condition: None,
            });
            let result = observable(&offer_record, accept_record.as_ref()).map_err(input_err)?;
            println!("observable {}", result.observable);
            println!(
                "overlap {}",
                result.overlap.into_iter().collect::<Vec<_>>().join(",")
            );
            Ok(())
        }
    }
}

fn run_story(args: StoryArgs) -> Result<(), CliError> {
    let graph = read_graph(&args.graph)?;
    if args.loops {
        let cycles = detect_loops(&graph, args.max_depth);
        println!("loops {}", cycles.len());
        for cycle in cycles {
            let names: Vec<String> = cycle.iter().map(|k| k.display()).collect();
            println!("loop {}", names.join(" -> "));
        }
        return Ok(());
    }
    let mode = match args.mode {
        ModeArg::Retarded => hindsight::story::SearchMode::Retarded,
        ModeArg::Advanced => hindsight::story::SearchMode::Advanced,
        ModeArg::Causal => hindsight::story::SearchMode::Causal,
    };
    let query = StoryQuery {
        mode,
        start: args
            .from
            .map(|name| ConceptKey::new(args.from_namespace, name)),
        end: args.to.map(|name| ConceptKey::new(args.to_namespace, name)),
        max_depth: args.max_depth,
        max_stories: args.max_stories,
        include_may: !args.definite_only,
    };
    let mut stories = search(&graph, &query).map_err(input_err)?;
    if args.classical {
        let counts = graph
            .edges()
            .map(|e| ((e.from.clone(), e.to.clone()), e.weight))
            .collect();
        stories = rank_paths(stories, &counts);
    }
    print!("{}", render_map(&graph, &stories));
    if args.steps {
        print!("{}", story_records(&stories));
    }
    Ok(())
}

fn run_sim(command: SimCommand) -> Result<(), CliError> {
    match command {
        SimCommand::Order {
            seed,
            messages,
            latency_width,
            reliable,
            csv,
        } => {
            let config = ChannelConfig {
                reliability: if reliable {
                    Reliability::Reliable
                } else {
                    Reliability::Unreliable
                },
                latency_width,
                seed,
            };
            let report = run_order_experiment(&config, messages);
            if csv {
                println!("messages,inversions,recovered");
                println!(
                    "{},{},{}",
                    report.messages, report.inversions, report.recovered
                );
            } else {
                print!("{report}");
            }
            Ok(())
        }
        SimCommand::Coupling {
            n,
            emit_interval,
            events,
            csv,
        } => {
            if n == 0 || emit_interval == 0 {
                return Err(CliError::Input(
                    "aggregation and interval must be >= 1".into(),
                ));
            }
            let events = events.unwrap_or(100 * n);
            let duration = events * emit_interval;
            let report = run_coupling_experiment(emit_interval, n, duration);
            if csv {
                println!("messages_sent,assessments_emitted,t_source,t_receiver,coupling");
                println!(
                    "{},{},{},{},{}",
                    report.messages_sent,
                    report.assessments_emitted,
                    report.t_source,
                    report.t_receiver,
                    report.coupling
                );
            } else {
                print!("{report}");
            }
            Ok(())
        }
        SimCommand::Pushpull {
            mode,
            lambda,
            mu,
            capacity,
            quota,
            duration,
            burst_period,
            burst_size,
            csv,
        } => {
            let config = FlowConfig {
                mode: match mode {
                    FlowArg::Push => FlowMode::Push,
                    FlowArg::Pull => FlowMode::Pull,
                },
                lambda,
                mu,
                capacity,
                quota,
                duration,
                burst: burst_period.map(|p| (p, burst_size)),
            };
            let report = run_push_pull(&config);
            if csv {
                println!("messages_sent,sampled,dropped,in_flight,queue_max");
                println!(
                    "{},{},{},{},{}",
                    report.messages_sent,
                    report.sampled,
                    report.dropped,
                    report.in_flight,
                    report.queue_max
                );
            } else {
                print!("{report}");
            }
            Ok(())
        }
        SimCommand::Sample { input, interval } => {
            if interval == 0 {
                return Err(CliError::Input("interval must be >= 1".into()));
            }
            let text = std::fs::read_to_string(&input)
                .map_err(|e| CliError::Input(format!("{}: {e}", input.display())))?;
            let series = parse_series(&text).map_err(input_err)?;
            for value in sample_series(&series, interval) {
                println!("{value}");
            }
            Ok(())
        }
    }
}

fn run_metrics(command: MetricsCommand) -> Result<(), CliError> {
    match command {
        MetricsCommand::Entropy {
            alphabet,
            counts,
            labelled,
            unlabelled: _,
            csv,
        } => {
            let names: Vec<String> = (1..=alphabet).map(|i| format!("c{i}")).collect();
            let mut stream = CategorizedStream::new(names.clone());
            let counts = counts.unwrap_or_else(|| vec![1; alphabet]);
            if counts.len() != alphabet {
                return Err(CliError::Input(format!(
                    "got {} counts for alphabet size {alphabet}",
                    counts.len()
                )));
            }
            for (name, count) in names.iter().zip(&counts) {
                for _ in 0..*count {
                    stream.push("item", labelled.then_some(name.as_str()));
                }
            }
            let report = mixing_entropy(&stream, labelled).map_err(input_err)?;
            let verdict = significance(&report);
            if csv {
                println!("entropy_bits,max_bits,source_entropy_bits,significance");
                println!(
                    "{},{},{},{}",
                    report.entropy_bits,
                    report.max_bits,
                    report.source_entropy_bits(),
                    verdict
                );
            } else {
                println!("entropy_bits {}", report.entropy_bits);
                println!("max_bits {}", report.max_bits);
                println!("source_entropy_bits {}", report.source_entropy_bits());
                for (category, p) in &report.posterior {
                    println!("posterior {category} {p}");
                }
                println!("significance {verdict}");
            }
            Ok(())
        }
        MetricsCommand::Sampling { input } => {
            let text = std::fs::read_to_string(&input)
                .map_err(|e| CliError::Input(format!("{}: {e}", input.display())))?;
            let values = parse_series(&text).map_err(input_err)?;
            let advice = recommend_sampling(&SampleSeries::new(values)).map_err(input_err)?;
            println!("autocorr_time {}", advice.autocorr_time);
            println!("recommended_interval {}", advice.recommended_interval);
            Ok(())
        }
        MetricsCommand::Buckets {
            period,
            width,
            decay,
            input,
            state,
        } => {
            let mut series = if state.exists() {
                BucketSeries::read_file(&state).map_err(input_err)?
            } else {
                BucketSeries::new(period, width, decay).map_err(input_err)?
            };
            let text = std::fs::read_to_string(&input)
                .map_err(|e| CliError::Input(format!("{}: {e}", input.display())))?;
            for (ts, value) in parse_observations(&text).map_err(input_err)? {
                series.update(ts, value);
            }
            series.write_file(&state).map_err(input_err)?;
            println!(
                "updated {} ({} buckets)",
                state.display(),
                series.bucket_count()
            );
            Ok(())
        }
    }
}
