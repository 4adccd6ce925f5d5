//! `episim`: assemble, disassemble, run and measure.
//!
//! Every failure exits nonzero after printing a single JSON object
//! (`{"error": ..., "message": ...}`) on stderr so scripts can parse it.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use episim_core::harness::{self, Pattern, TrafficParams};
use episim_core::isa::{assemble, disassemble, ProgramImage};
use episim_core::sim::{RunOutcome, Simulation, StopCondition};
use episim_core::trace::TraceWriter;
use episim_core::PlatformConfig;

#[derive(Parser)]
#[command(name = "episim", version, about = "Manycore platform simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Assemble a source file into a loadable image (+ .manifest sidecar)
    Asm {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Disassemble an image back into source text
    Disasm {
        input: PathBuf,
        /// Output file; stdout when omitted
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run programs on a simulated platform
    Run {
        /// Preset name (parallella, e16, e64) or a platform TOML file
        #[arg(long)]
        config: String,
        /// CORE=IMAGE pairs; core is the row-major index
        #[arg(long = "load", value_name = "CORE=IMAGE")]
        loads: Vec<String>,
        /// Stop condition: "halt", "core:N" or "cycles:N"
        #[arg(long, default_value = "halt")]
        until: String,
        /// Give up after this many cycles
        #[arg(long, default_value_t = 10_000_000)]
        max_cycles: u64,
        /// Write a network event trace (CSV) here
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the run report (JSON) here as well as stdout
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Drive synthetic traffic through the network model
    Traffic {
        #[arg(long, default_value = "e64")]
        config: String,
        /// uniform, neighbor, transpose, hotspot or corner
        #[arg(long)]
        pattern: String,
        /// Injection probability per node per cycle
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        cycles: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run a named memory-ordering litmus test
    Litmus {
        /// Test name, or "list" to enumerate
        name: String,
        #[arg(long, default_value_t = 100)]
        runs: u64,
    },
    /// Print the analytic performance model for a platform
    Perfmodel {
        #[arg(long)]
        preset: String,
    },
    /// Measure the streaming-write vs blocking-read bandwidth gap
    Rwratio {
        #[arg(long, default_value = "e16")]
        config: String,
        #[arg(long, default_value_t = 2000)]
        cycles: u64,
    },
}

struct Failure {
    kind: &'static str,
    message: String,
    code: u8,
}

impl Failure {
    fn new(kind: &'static str, message: impl ToString) -> Failure {
        Failure { kind, message: message.to_string(), code: 1 }
    }

    fn with_code(kind: &'static str, message: impl ToString, code: u8) -> Failure {
        Failure { kind, message: message.to_string(), code }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": f.kind, "message": f.message })
            );
            ExitCode::from(f.code)
        }
    }
}

fn load_config(name: &str) -> Result<PlatformConfig, Failure> {
    if let Some(cfg) = PlatformConfig::preset(name) {
        return Ok(cfg);
    }
    let text = fs::read_to_string(name)
        .map_err(|e| Failure::new("config", format!("{name}: {e}")))?;
    PlatformConfig::from_toml(&text).map_err(|e| Failure::new("config", e))
}

fn emit(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

fn dispatch(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Asm { input, output } => {
            let src = fs::read_to_string(&input)
                .map_err(|e| Failure::new("io", format!("{}: {e}", input.display())))?;
            let img = assemble(&src).map_err(|e| Failure::new("asm", e))?;
            img.save(&output).map_err(|e| Failure::new("io", e))?;
            Ok(())
        }
        Cmd::Disasm { input, output } => {
            let img = ProgramImage::load(&input).map_err(|e| Failure::new("image", e))?;
            let text = disassemble(&img);
            match output {
                Some(p) => fs::write(&p, text)
                    .map_err(|e| Failure::new("io", format!("{}: {e}", p.display())))?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Cmd::Run { config, loads, until, max_cycles, trace, report } => {
            run(config, loads, until, max_cycles, trace, report)
        }
        Cmd::Traffic { config, pattern, rate, cycles, seed } => {
            let cfg = load_config(&config)?;
            let pattern: Pattern =
                pattern.parse().map_err(|e: String| Failure::new("traffic", e))?;
            if !(0.0..=1.0).contains(&rate) {
                return Err(Failure::new("traffic", format!("rate {rate} outside 0..=1")));
            }
            let r = harness::run_traffic(&cfg, &TrafficParams { pattern, rate, cycles, seed });
            emit(&r);
            if !r.conserved {
                return Err(Failure::with_code("traffic", "packets lost or stuck", 3));
            }
            Ok(())
        }
        Cmd::Litmus { name, runs } => {
            if name == "list" {
                for n in harness::LITMUS_NAMES {
                    println!("{n}");
                }
                return Ok(());
            }
            let r = harness::run_litmus(&name, runs)
                .ok_or_else(|| Failure::new("litmus", format!("unknown test '{name}'")))?;
            emit(&r);
            if !r.pass {
                return Err(Failure::with_code(
                    "litmus",
                    format!("{name}: {} violations in {} runs", r.violations, r.runs),
                    4,
                ));
            }
            Ok(())
        }
        Cmd::Perfmodel { preset } => {
            let cfg = load_config(&preset)?;
            emit(&harness::perf_model(&cfg));
            Ok(())
        }
        Cmd::Rwratio { config, cycles } => {
            let cfg = load_config(&config)?;
            emit(&harness::measure_rw_ratio(&cfg, cycles));
            Ok(())
        }
    }
}

fn parse_until(s: &str) -> Result<StopCondition, Failure> {
    if s == "halt" {
        return Ok(StopCondition::AllHalted);
    }
    let num = |rest: &str| {
        rest.parse::<u64>()
            .map_err(|_| Failure::new("run", format!("bad --until value '{s}'")))
    };
    if let Some(rest) = s.strip_prefix("cycles:") {
        return Ok(StopCondition::Cycles(num(rest)?));
    }
    if let Some(rest) = s.strip_prefix("core:") {
        return Ok(StopCondition::CoreHalted(num(rest)? as usize));
    }
    Err(Failure::new("run", format!("--until must be halt, core:N or cycles:N (got '{s}')")))
}

fn run(
    config: String,
    loads: Vec<String>,
    until: String,
    max_cycles: u64,
    trace: Option<PathBuf>,
    report: Option<PathBuf>,
) -> Result<(), Failure> {
    let cfg = load_config(&config)?;
    let cond = parse_until(&until)?;
    let mut sim = Simulation::new(cfg);
    if loads.is_empty() {
        return Err(Failure::new("run", "nothing to run: pass at least one --load CORE=IMAGE"));
    }
    for spec in &loads {
        let (core, path) = spec
            .split_once('=')
            .ok_or_else(|| Failure::new("run", format!("--load '{spec}' is not CORE=IMAGE")))?;
        let core: usize = core
            .parse()
            .map_err(|_| Failure::new("run", format!("bad core index '{core}'")))?;
        if core >= sim.cfg.num_cores() {
            return Err(Failure::new(
                "run",
                format!("core {core} outside 0..{}", sim.cfg.num_cores()),
            ));
        }
        let img = ProgramImage::load(path.as_ref()).map_err(|e| Failure::new("image", e))?;
        sim.load_image(core, &img);
        sim.start_core(core, img.entry);
    }
    let mut tracer = match &trace {
        Some(p) => {
            sim.noc.tracing = true;
            let file = fs::File::create(p)
                .map_err(|e| Failure::new("io", format!("{}: {e}", p.display())))?;
            Some(TraceWriter::new(file).map_err(|e| Failure::new("io", e))?)
        }
        None => None,
    };
    // Step in slices so the trace buffer never grows unbounded.
    let outcome = loop {
        let budget = (sim.cycle + 65_536).min(max_cycles);
        let out = sim.run(cond, budget);
        if let Some(w) = tracer.as_mut() {
            for e in sim.noc.trace_buf.drain(..) {
                w.record(&e).map_err(|e| Failure::new("io", e))?;
            }
        }
        if out == RunOutcome::Satisfied || sim.cycle >= max_cycles {
            break out;
        }
    };
    if let Some(w) = tracer {
        w.finish().map_err(|e| Failure::new("io", e))?;
    }
    let rep = sim.report(outcome);
    emit(&rep);
    if let Some(p) = report {
        let text = serde_json::to_string_pretty(&rep).expect("report serializes");
        fs::write(&p, text).map_err(|e| Failure::new("io", format!("{}: {e}", p.display())))?;
    }
    if outcome == RunOutcome::Timeout {
        return Err(Failure::with_code(
            "run",
            format!("stop condition not reached within {max_cycles} cycles"),
            3,
        ));
    }
    Ok(())
}
