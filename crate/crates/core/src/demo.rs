//! Scripted instrumented program used by the CLI demo, the browser demo,
//! and the test suite.
//!
//! The script exercises the whole instrumentation surface: a main lane of
//! signposts with nested details, two concurrent test lanes forked while the
//! main lane is mid-flight (so their back-links point behind the parent's
//! latest signpost), dependency and containment annotations, and a failure
//! report. Replaying it is deterministic; with fixed timestamps the journal
//! is byte-identical across runs.

use crate::journal::Journal;
use crate::signpost::{TimestampMode, Tracer};

pub const DEMO_PROCESS: &str = "demo_app-1.0";
pub const DEMO_PID: &str = "4242";

/// Record the demo journal. `TimestampMode::Fixed` makes the output
/// byte-identical across runs; `Wall` stamps real clock context.
pub fn record_demo(mode: TimestampMode) -> Journal {
    try_record_demo(mode).expect("demo script is internally consistent")
}

fn try_record_demo(mode: TimestampMode) -> Result<Journal, crate::signpost::TraceError> {
    let tracer = Tracer::with_mode(DEMO_PROCESS, DEMO_PID, mode);
    let main = tracer.main_lane();

    let h = tracer.signpost(main, "MainLoop start")?;
    h.part_of("main", "function")?;

    let h = tracer.signpost(main, "Beginning of test code")?;
    h.remark("Start process")?
        .part_of("hindsight", "go package")?
        .note("example code")?
        .remark("look up a name")?;

    let h = tracer.signpost(main, "code signpost X")?;
    h.intent("open file X")?
        .relies_on("/etc/passed", "file")?
        .relies_on("123.456.789.123", "dns lookup")?
        .note("xxx")?
        .part_of("main", "coroutine")?;

    // Two test lanes fork here, while the main lane still sits on
    // "code signpost X"; their first signposts land after the next main
    // signpost has already claimed its number.
    let test1 = tracer.fork_lane(main)?;
    let test2 = tracer.fork_lane(main)?;

    let run_ps = tracer.signpost(main, "Run ps command")?;
    let t1 = tracer.signpost(test1, "TEST1---------")?;
    run_ps.note("/bin/ps -eo user,pcpu,pmem,vsz,stime,etime,time,args")?;
    t1.note("Testing suite 1")?
        .intent("read whole file of data")?
        .relies_on("file://URI", "file")?
        .failed_because("file read failed")?
        .attribute(
            "open file://URI: no such file or directory",
            "system error message",
        )?;
    run_ps.remark("Finished ps command")?;

    let t2 = tracer.signpost(test2, "Commence testing")?;
    t2.remark("Possibly anomalous CPU spike for this virtual CPU")?
        .attribute(
            "CPU 22117.000000 > average 22115.000000",
            "anomalous CPU spike",
        )?;

    let kube = tracer.fork_lane(test2)?;
    let tail = tracer.fork_lane(test2)?;

    let h = tracer.signpost(test2, "A sideline to test some raw concept mapping")?;
    h.note("Commence testing")?;
    let h = tracer.signpost(test2, "End of sideline concept test")?;
    h.note("Commence testing")?;

    let k = tracer.signpost(kube, "Starting Kubernetes deployment")?;
    k.note("Commence testing")?
        .remark("Starting kubernetes pod")?
        .remark("File drop in pipeline")?
        .remark("Querying data model")?
        .remark("Submit transformation result")?;

    tracer.signpost(tail, "The end!")?;
    tracer.signpost(tail, "Show the signposts")?;

    Ok(tracer.into_journal())
}
