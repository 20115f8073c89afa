//! `swarmdraw`: analyze patterns, export drawing plans, run simulations and
//! render traces.
//!
//! Exit codes:
//!
//! | code | meaning                                              |
//! |------|------------------------------------------------------|
//! | 0    | success (`simulate`: pattern formed)                 |
//! | 1    | `simulate`: round limit reached or swarm stalled     |
//! | 2    | invalid input: unreadable or malformed file, bad flag |
//! | 3    | pattern is not connected                             |
//! | 4    | `simulate`: a model invariant broke and the run aborted |

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use swarmdraw::geometry::{diameter, mindist, unit_disc_connected};
use swarmdraw::io::{read_configuration, read_pattern, read_plan, PlanFile};
use swarmdraw::protocol::{branch_for, derive_plan, span_for, BranchKind, Protocol, ProtocolOptions, DEFAULT_C, DELTA};
use swarmdraw::render::write_frames;
use swarmdraw::simulator::{run_fsync, FrameMode, SimConfig, Trace, Verdict};
use swarmdraw::symmetry::{normalize, symmetricity, Pattern};
use swarmdraw::{Error, Point};

const EXIT_TIMEOUT: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_DISCONNECTED: u8 = 3;
const EXIT_ABORTED: u8 = 4;

#[derive(Parser)]
#[command(name = "swarmdraw", version, about = "Pattern formation by oblivious robots with viewing range 1")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report symmetricity, spacing, connectivity, parameters and branch.
    Analyze {
        pattern: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Build the drawing path of the first component and export it.
    Plan {
        pattern: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
        /// Output file (standard output when omitted).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run the FSYNC simulation.
    Simulate(SimArgs),
    /// Render a JSON-lines trace to SVG frames.
    Render {
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Draw every k-th round (the final round is always drawn).
        #[arg(long, default_value_t = 1)]
        every: usize,
    },
}

#[derive(Args)]
struct ParamArgs {
    /// Constant c in ε = c · min(1/s, mindist, 1/√n).
    #[arg(long = "params-c", default_value_t = DEFAULT_C)]
    c: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Frames {
    RandomPerRound,
    Fixed,
}

#[derive(Args)]
struct SimArgs {
    pattern: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, env = "SWARMDRAW_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    max_rounds: usize,
    /// Movement imprecision: each move lands uniformly within this radius.
    #[arg(long, default_value_t = 0.0)]
    noise_mu: f64,
    /// Verification tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// `initial-pattern`, or a configuration file of diameter at most 1.
    #[arg(long, default_value = "initial-pattern")]
    from: String,
    #[arg(long, value_enum, default_value_t = Frames::RandomPerRound)]
    frame_mode: Frames,
    /// Write the JSON-lines trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Refuse to run unless the derived path matches this exported plan.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Print the summary as JSON.
    #[arg(long)]
    json: bool,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Failure {
        Failure { code: EXIT_INPUT, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure::input(e.to_string())
    }
}

type CmdResult = Result<u8, Failure>;

fn load_pattern(path: &Path) -> Result<Pattern, Failure> {
    read_pattern(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn check_c(c: f64) -> Result<(), Failure> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Failure::input(format!("--params-c must be positive, got {c}")))
    }
}

fn connected(p: &Pattern) -> Result<bool, Failure> {
    Ok(unit_disc_connected(&p.points)?)
}

fn disconnected() -> Failure {
    Failure { code: EXIT_DISCONNECTED, message: "pattern is not connected under viewing range 1".into() }
}

fn analyze(path: &Path, c: f64, as_json: bool) -> CmdResult {
    check_c(c)?;
    let p = normalize(&load_pattern(path)?)?;
    let n = p.len();
    let sym = symmetricity(&p).sym;
    let md = if n >= 2 { Some(mindist(&p.points)?) } else { None };
    let conn = connected(&p)?;
    let branch = branch_for(n, sym);
    let derived = match (branch, conn) {
        (BranchKind::Main, true) => Some(derive_plan(&p, c).map(|(params, _, plan)| (params, plan.path.hops()))),
        _ => None,
    };
    let (eps, c_used, hops, note) = match &derived {
        Some(Ok((params, hops))) => (Some(params.epsilon), Some(params.c), Some(*hops), None),
        Some(Err(e)) => (None, None, None, Some(e.to_string())),
        None => (None, None, None, None),
    };
    let branch_name = match branch {
        BranchKind::Main => "main",
        BranchKind::Star => "star",
    };
    if as_json {
        let report = json!({
            "n": n,
            "sym": sym,
            "mindist": md,
            "connected": conn,
            "epsilon": eps,
            "delta": DELTA,
            "phi": span_for(sym),
            "c": c_used,
            "hops": hops,
            "branch": branch_name,
            "note": note,
        });
        println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
    } else {
        println!("n         {n}");
        println!("sym       {sym}");
        match md {
            Some(d) => println!("mindist   {d:.9}"),
            None => println!("mindist   -"),
        }
        println!("connected {conn}");
        println!("branch    {branch_name}");
        println!("delta     {DELTA}");
        println!("phi       {:.9}", span_for(sym));
        if let (Some(e), Some(cu), Some(h)) = (eps, c_used, hops) {
            println!("epsilon   {e:.6e}");
            println!("c         {cu}");
            println!("hops      {h}");
        }
        if let Some(msg) = &note {
            println!("note      {msg}");
        }
    }
    if !conn {
        eprintln!("warning: pattern is not connected; the drawing protocol needs a connected pattern");
        return Ok(EXIT_DISCONNECTED);
    }
    match note {
        Some(msg) => Err(Failure::input(msg)),
        None => Ok(0),
    }
}

fn plan(path: &Path, c: f64, out: Option<&Path>) -> CmdResult {
    check_c(c)?;
    let p = load_pattern(path)?;
    if !connected(&p)? {
        return Err(disconnected());
    }
    let np = normalize(&p)?;
    if branch_for(np.len(), symmetricity(&np).sym) == BranchKind::Star {
        return Err(Failure::input("star patterns are formed by radial scaling and have no drawing path"));
    }
    let (params, _, plan) = derive_plan(&np, c)?;
    let text = PlanFile::new(params, &plan).to_json()? + "\n";
    match out {
        Some(o) => std::fs::write(o, text).map_err(|e| Failure::input(format!("{}: {e}", o.display())))?,
        None => print!("{text}"),
    }
    Ok(0)
}

/// Near-gathering start read from a file, after the admissibility checks.
fn near_gathering(path: &Path, n: usize, target_sym: usize) -> Result<Vec<Point>, Failure> {
    let cfg = read_configuration(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    if cfg.len() != n {
        return Err(Failure::input(format!("configuration has {} robots, pattern has {n} points", cfg.len())));
    }
    let d = diameter(&cfg);
    if d > 1.0 + 1e-9 {
        return Err(Failure::input(format!("configuration diameter {d} exceeds 1")));
    }
    let s = symmetricity(&normalize(&Pattern::new(cfg.clone())?)?).sym;
    if target_sym % s != 0 {
        return Err(Failure::input(format!("sym(initial) = {s} does not divide sym(P) = {target_sym}")));
    }
    Ok(cfg)
}

fn simulate(a: &SimArgs) -> CmdResult {
    check_c(a.params.c)?;
    let p = load_pattern(&a.pattern)?;
    if !connected(&p)? {
        return Err(disconnected());
    }
    if !(a.noise_mu >= 0.0 && a.noise_mu.is_finite()) {
        return Err(Failure::input("--noise-mu must be a non-negative number"));
    }
    let proto = Protocol::with_options(&p, ProtocolOptions { c: a.params.c, noise_mu: a.noise_mu })?;
    if let Some(pf) = &a.plan {
        let expected = read_plan(pf).map_err(|e| Failure::input(format!("{}: {e}", pf.display())))?;
        let m = proto.main().ok_or_else(|| Failure::input("--plan given for a star pattern"))?;
        let ours = PlanFile::new(m.params, &m.plan);
        match expected.deviation(&ours) {
            Some(d) if d <= 1e-9 => {}
            _ => return Err(Failure::input("plan file does not match the plan derived from the pattern")),
        }
    }
    let initial = if a.from == "initial-pattern" {
        proto.initial_configuration().to_vec()
    } else {
        near_gathering(Path::new(&a.from), proto.pattern.len(), proto.sym)?
    };
    let cfg = SimConfig {
        seed: a.seed,
        max_rounds: a.max_rounds,
        tolerance: a.tolerance,
        noise_mu: a.noise_mu,
        frame_mode: match a.frame_mode {
            Frames::RandomPerRound => FrameMode::RandomPerRound,
            Frames::Fixed => FrameMode::Fixed,
        },
        emit_trace: a.trace.is_some(),
        parallel: true,
    };
    let run = run_fsync(&initial, &proto, &cfg)?;
    if let Some(t) = &a.trace {
        let f = File::create(t).map_err(|e| Failure::input(format!("{}: {e}", t.display())))?;
        run.trace.write_jsonl(BufWriter::new(f))?;
    }
    let s = &run.trace.summary;
    if a.json {
        let report = json!({
            "verdict": s.verdict.as_str(),
            "rounds": s.rounds,
            "max_error": s.max_error,
            "reason": s.reason,
            "max_displacement": run.stats.max_displacement,
            "phase_mismatches": run.stats.phase_mismatches,
        });
        println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
    } else {
        println!("verdict   {}", s.verdict.as_str());
        println!("rounds    {}", s.rounds);
        println!("max_error {:.3e}", s.max_error);
    }
    if let Some(r) = &s.reason {
        if s.verdict != Verdict::Formed {
            eprintln!("{}: {r}", s.verdict.as_str());
        }
    }
    Ok(match s.verdict {
        Verdict::Formed => 0,
        Verdict::Timeout => EXIT_TIMEOUT,
        Verdict::Aborted => EXIT_ABORTED,
    })
}

fn render(trace: &Path, out: &Path, every: usize) -> CmdResult {
    if every == 0 {
        return Err(Failure::input("--every must be at least 1"));
    }
    let f = File::open(trace).map_err(|e| Failure::input(format!("{}: {e}", trace.display())))?;
    let t = Trace::read_jsonl(BufReader::new(f)).map_err(|e| Failure::input(format!("{}: {e}", trace.display())))?;
    let frames = write_frames(&t, out, every)?;
    println!("wrote {} frames to {}", frames.len(), out.display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Analyze { pattern, params, json } => analyze(pattern, params.c, *json),
        Command::Plan { pattern, params, out } => plan(pattern, params.c, out.as_deref()),
        Command::Simulate(a) => simulate(a),
        Command::Render { trace, out, every } => render(trace, out, *every),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
