use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ising_repcode::experiment::{
    demo_fig1, sweep_encoded, sweep_unencoded, AuditReport, DemoOptions, SolverPolicy, SweepConfig, SweepTable,
};
use ising_repcode::solvers::wcnf::write_wcnf;
use ising_repcode::solvers::{qubo_to_max2sat, DEFAULT_SCALE};
use ising_repcode::{make_ladder_instance, Error, IsingModel};

const EXIT_INPUT: u8 = 2;
const EXIT_REFUSED: u8 = 3;
const EXIT_EXHAUSTED: u8 = 4;

#[derive(Parser)]
#[command(name = "repcode", version, about = "Ising ground states under control noise, with repetition encoding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact ground state of an instance JSON file.
    Solve {
        instance: PathBuf,
        /// auto, brute, frontier, bnb or anneal.
        #[arg(long, default_value = "auto")]
        solver: String,
        /// Also write the weighted MAX-2-SAT reduction in DIMACS WCNF.
        #[arg(long, value_name = "OUT")]
        wcnf: Option<PathBuf>,
        /// Scale used to quantize coefficients for --wcnf.
        #[arg(long, default_value_t = DEFAULT_SCALE)]
        scale: u64,
        /// Print the result as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Prints a ladder instance as JSON.
    Ladder {
        #[arg(long)]
        columns: usize,
        /// Column of the antiferromagnetic rung.
        #[arg(long, default_value_t = 0)]
        rung: usize,
    },
    /// Failure-rate sweep; writes CSV tables and manifest.json.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long, value_enum, default_value_t = Mode::Unencoded)]
        mode: Mode,
        /// Overrides master_seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Repeats the run recorded in a manifest.
    Rerun {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Searches for a noise draw that breaks the ladder and shows the encoded rescue.
    DemoFig1 {
        #[arg(long, default_value_t = 10_000)]
        budget: u64,
        /// First trial seed of the search.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.3)]
        eps: f64,
        #[arg(long, default_value_t = 8)]
        columns: usize,
        /// Directory for fig1.json and fig1.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Unencoded,
    Encoded,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn input(msg: impl Into<String>) -> Self {
        Failure { code: EXIT_INPUT, msg: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            e if e.is_refusal() => EXIT_REFUSED,
            Error::SearchExhausted { .. } => EXIT_EXHAUSTED,
            Error::Io(_) | Error::AuditFailed { .. } => 1,
            _ => EXIT_INPUT,
        };
        Failure { code, msg: e.to_string() }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure { code: 1, msg: format!("{}: {e}", path.display()) }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, Failure> {
    serde_json::from_str(text)
        .map_err(|e| Failure::input(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))
}

fn cmd_solve(instance: &Path, solver: &str, wcnf: Option<&Path>, scale: u64, json: bool) -> Result<(), Failure> {
    let text = read_input(instance)?;
    let file = parse_json(instance, &text)?;
    let model = IsingModel::from_file(&file).map_err(|e| Failure::input(format!("{}: {e}", instance.display())))?;
    let policy = SolverPolicy::try_from(solver.to_string())?;
    if let Some(out) = wcnf {
        if scale == 0 {
            return Err(Failure::input("--scale must be positive"));
        }
        let f = fs::File::create(out).map_err(io_err(out))?;
        write_wcnf(&qubo_to_max2sat(&model, scale), std::io::BufWriter::new(f)).map_err(io_err(out))?;
    }
    let r = policy.solve(&model)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&r).expect("serializable result"));
        return Ok(());
    }
    println!("value       {}", r.value);
    println!("config      {}", r.config);
    if let Some(d) = r.degeneracy {
        println!("degeneracy  {d}");
    }
    if let Some(s) = r.second_value {
        println!("second      {s}");
    }
    println!("solver      {}", r.solver_id);
    println!("exact       {}", r.exact);
    println!("work        {}", r.stats.work);
    println!("wall_time   {:.6}s", r.stats.wall_time.as_secs_f64());
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct OutputFile {
    path: String,
    bytes: u64,
    sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CellProvenance {
    table: String,
    n: usize,
    k: usize,
    code: String,
    eps_max: f64,
    seed: u64,
    mean_wall_time: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunManifest {
    tool: String,
    version: String,
    mode: Mode,
    /// Worker count used; results do not depend on it.
    threads: usize,
    /// Fully resolved configuration, defaults included.
    config: SweepConfig,
    config_sha256: String,
    started_unix: f64,
    finished_unix: f64,
    outputs: Vec<OutputFile>,
    cells: Vec<CellProvenance>,
    audit: AuditReport,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn provenance(name: &str, t: &SweepTable) -> Vec<CellProvenance> {
    t.cells.iter().map(|c| CellProvenance {
        table: name.to_string(),
        n: c.n,
        k: c.k,
        code: c.code.clone(),
        eps_max: c.eps_max,
        seed: c.seed,
        mean_wall_time: c.mean_wall_time,
    })
    .collect()
}

fn run_sweep(config: SweepConfig, mode: Mode, out: &Path, threads: usize) -> Result<(), Failure> {
    let problems = config.problems();
    if !problems.is_empty() {
        let mut msg = String::from("invalid sweep configuration:");
        for p in problems {
            msg.push_str("\n  - ");
            msg.push_str(&p);
        }
        return Err(Failure::input(msg));
    }
    let started_unix = unix_now();
    let mut tables: Vec<(&str, SweepTable, String)> = Vec::new();
    match mode {
        Mode::Unencoded => {
            let t = sweep_unencoded(&config, threads)?;
            let csv = t.to_csv();
            tables.push(("unencoded", t, csv));
        }
        Mode::Encoded => {
            let r = sweep_encoded(&config, threads)?;
            let csv = r.encoded.to_csv_extended();
            tables.push(("encoded", r.encoded, csv));
            if let Some(t) = r.rescaled {
                let csv = t.to_csv_extended();
                tables.push(("rescaled", t, csv));
            }
        }
    }
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut outputs = Vec::new();
    let mut cells = Vec::new();
    let mut audit = AuditReport::default();
    for (name, table, csv) in &tables {
        let file = format!("{name}.csv");
        let path = out.join(&file);
        fs::write(&path, csv).map_err(io_err(&path))?;
        outputs.push(OutputFile { path: file, bytes: csv.len() as u64, sha256: sha256_hex(csv.as_bytes()) });
        cells.extend(provenance(name, table));
        audit.checked += table.audit.checked;
        audit.mismatches += table.audit.mismatches;
        for c in &table.cells {
            eprintln!(
                "{name}: N={} {} eps={} failures {}/{}",
                c.n, c.code, c.eps_max, c.failures, c.trials
            );
        }
    }
    let config_json = serde_json::to_string(&config).expect("serializable config");
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        mode,
        threads,
        config_sha256: sha256_hex(config_json.as_bytes()),
        config,
        started_unix,
        finished_unix: unix_now(),
        outputs,
        cells,
        audit,
    };
    let path = out.join("manifest.json");
    let mut f = fs::File::create(&path).map_err(io_err(&path))?;
    serde_json::to_writer_pretty(&mut f, &manifest).expect("serializable manifest");
    writeln!(f).map_err(io_err(&path))?;
    Ok(())
}

fn cmd_sweep(config: &Path, out: &Path, threads: usize, mode: Mode, seed: Option<u64>) -> Result<(), Failure> {
    let text = read_input(config)?;
    let mut cfg: SweepConfig = parse_json(config, &text)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    run_sweep(cfg, mode, out, threads)
}

fn cmd_rerun(manifest: &Path, out: &Path, threads: usize) -> Result<(), Failure> {
    let text = read_input(manifest)?;
    let m: RunManifest = parse_json(manifest, &text)?;
    run_sweep(m.config, m.mode, out, threads)
}

fn cmd_demo(opts: DemoOptions, out: Option<&Path>) -> Result<(), Failure> {
    if !(opts.eps_max.is_finite() && opts.eps_max >= 0.0) {
        return Err(Failure::input(format!("--eps must be a non-negative number, got {}", opts.eps_max)));
    }
    let report = match demo_fig1(&opts) {
        Err(Error::SearchExhausted { first, scanned }) => {
            return Err(Failure {
                code: EXIT_EXHAUSTED,
                msg: format!("no failing seed rescued by the encoding among trials 0..{scanned} of base seed {first}"),
            })
        }
        other => other?,
    };
    let text = report.render_text();
    print!("{text}");
    let json = serde_json::to_string_pretty(&report).expect("serializable report");
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            let p = dir.join("fig1.json");
            fs::write(&p, json + "\n").map_err(io_err(&p))?;
            let p = dir.join("fig1.txt");
            fs::write(&p, text).map_err(io_err(&p))?;
        }
        None => println!("\n{json}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { instance, solver, wcnf, scale, json } => {
            cmd_solve(&instance, &solver, wcnf.as_deref(), scale, json)
        }
        Command::Ladder { columns, rung } => make_ladder_instance(columns, rung)
            .map(|m| println!("{}", m.to_json()))
            .map_err(Failure::from),
        Command::Sweep { config, out, threads, mode, seed } => cmd_sweep(&config, &out, threads, mode, seed),
        Command::Rerun { manifest, out, threads } => cmd_rerun(&manifest, &out, threads),
        Command::DemoFig1 { budget, seed, eps, columns, out } => cmd_demo(
            DemoOptions { budget, base_seed: seed, eps_max: eps, columns, ..Default::default() },
            out.as_deref(),
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
