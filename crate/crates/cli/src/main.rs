//! `tlv`: compile, emit, prove and report on transaction-level designs.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use tlv_core::gallina::{self, CoqGate, GallinaOptions};
use tlv_core::project::{Compiled, Project};
use tlv_core::proof::{generate_obligations, prove_all, CertStore, ProveOptions, ProveReport};
use tlv_core::rtl;
use tlv_core::sym::Verdict;

/// Exit code for compile and input errors.
const EXIT_COMPILE: u8 = 3;

#[derive(Parser)]
#[command(name = "tlv", version, about = "Transaction-level design compiler and prover")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse, resolve and elaborate.
    Compile {
        #[command(flatten)]
        input: Input,
        /// Print the elaborated design as JSON.
        #[arg(long)]
        dump_ir: bool,
    },
    /// Emit Verilog, one file per module.
    EmitSv {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "out")]
        outdir: PathBuf,
    },
    /// Emit Gallina under `<outdir>/coq/`.
    EmitGallina {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "out")]
        outdir: PathBuf,
        #[command(flatten)]
        prove: ProveFlags,
    },
    /// Discharge every coverage obligation.
    Prove {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        prove: ProveFlags,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
        /// Write a cycle-by-cycle state dump per root to this JSON file.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Execute called VTRs instead of reusing their summaries.
        #[arg(long)]
        no_summaries: bool,
    },
    /// Proved/total obligations per hierarchy level, from the certificate cache.
    Report {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct Input {
    /// A `tlv.toml`, a directory containing one, or source files.
    paths: Vec<PathBuf>,
    /// Certificate cache directory.
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Args, Clone, Copy)]
struct ProveFlags {
    /// Worker threads; 0 uses one per core.
    #[arg(long)]
    jobs: Option<usize>,
    /// Free bits enumerated before a verdict becomes Unknown.
    #[arg(long)]
    budget_bits: Option<u32>,
    /// Cycle budget per root VTR.
    #[arg(long)]
    cycles: Option<u32>,
}

/// An error that maps to a specific exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            code: EXIT_COMPILE,
            error: e.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn load(input: &Input) -> Result<Project> {
    let mut project = match input.paths.as_slice() {
        [] => Project::load(Path::new(".")),
        [p] if p.is_dir() || p.extension().is_some_and(|e| e == "toml") => Project::load(p),
        ps => Project::from_files(ps),
    }
    .context("cannot load the project")?;
    if let Some(c) = &input.cache {
        // Relative to the working directory, not the project.
        project.config.cache = Some(std::env::current_dir()?.join(c));
    }
    Ok(project)
}

fn compile(project: &Project) -> Result<Compiled, Failure> {
    project.compile().map_err(|e| Failure {
        code: EXIT_COMPILE,
        error: anyhow::anyhow!("{e}"),
    })
}

fn options(project: &Project, flags: ProveFlags) -> ProveOptions {
    ProveOptions {
        jobs: flags.jobs.unwrap_or(project.config.jobs),
        budget_bits: flags.budget_bits.unwrap_or(project.config.budget_bits),
        max_cycles: flags.cycles.unwrap_or(project.config.cycles),
        ..ProveOptions::default()
    }
}

fn prove(project: &Project, compiled: &Compiled, opts: &ProveOptions) -> Result<ProveReport, Failure> {
    let dir = project.cache_dir();
    let mut store = CertStore::load(&dir)?;
    let roots = project.roots(&compiled.ir);
    let report = prove_all(&compiled.ir, &roots, &mut store, opts)?;
    store.save(&dir)?;
    Ok(report)
}

fn run(cmd: Cmd) -> Result<u8, Failure> {
    match cmd {
        Cmd::Compile { input, dump_ir } => {
            let project = load(&input)?;
            let c = compile(&project)?;
            if dump_ir {
                println!("{}", serde_json::to_string_pretty(&c.ir.to_json())?);
            } else {
                println!(
                    "ok: {} instances, {} signals, {} conditions, {} transactions, {} VTRs",
                    c.ir.instances.len(),
                    c.ir.signals.len(),
                    c.ir.conditions.len(),
                    c.ir.transactions.len(),
                    c.ir.vtrs.len()
                );
            }
            Ok(0)
        }
        Cmd::EmitSv { input, outdir } => {
            let project = load(&input)?;
            let c = compile(&project)?;
            fs::create_dir_all(&outdir).with_context(|| format!("cannot create {}", outdir.display()))?;
            for f in rtl::emit_rtl(&c.ir) {
                let path = outdir.join(&f.name);
                fs::write(&path, &f.text).with_context(|| format!("cannot write {}", path.display()))?;
                println!("{}", path.display());
            }
            Ok(0)
        }
        Cmd::EmitGallina { input, outdir, prove: flags } => {
            let project = load(&input)?;
            let c = compile(&project)?;
            let opts = options(&project, flags);
            let report = prove(&project, &c, &opts)?;
            let verdicts: HashMap<String, Verdict> = report
                .results
                .iter()
                .map(|r| (r.name.clone(), r.verdict.clone()))
                .collect();
            let obligations = generate_obligations(&c.ir, &project.roots(&c.ir))?;
            let gopts = GallinaOptions {
                budget_bits: opts.budget_bits,
                max_cycles: opts.max_cycles,
            };
            let files = gallina::emit_all(&c.ir, &obligations, &verdicts, &gopts);
            if let Err(errors) = gallina::lint_files(&files) {
                for e in &errors {
                    eprintln!("lint: {e}");
                }
                return Err(Failure {
                    code: EXIT_COMPILE,
                    error: anyhow::anyhow!("emitted Gallina failed the lint ({} errors)", errors.len()),
                });
            }
            let dir = outdir.join("coq");
            fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
            for f in &files {
                let path = dir.join(&f.name);
                fs::write(&path, &f.text).with_context(|| format!("cannot write {}", path.display()))?;
                println!("{}", path.display());
            }
            let manifest = dir.join("_CoqProject");
            fs::write(&manifest, gallina::coq_project(&files))?;
            println!("{}", manifest.display());
            println!("lint: ok");
            match gallina::coq_gate(&dir, &files) {
                CoqGate::Skipped => println!("coq check: skipped (coqc not found)"),
                CoqGate::Passed => println!("coq check: ok"),
                CoqGate::Failed(out) => {
                    eprintln!("{out}");
                    println!("coq check: failed");
                }
            }
            Ok(0)
        }
        Cmd::Prove {
            input,
            prove: flags,
            json,
            trace,
            no_summaries,
        } => {
            let project = load(&input)?;
            let c = compile(&project)?;
            let mut opts = options(&project, flags);
            opts.summaries = !no_summaries;
            opts.trace = trace.is_some();
            let report = prove(&project, &c, &opts)?;
            if let Some(path) = trace {
                let doc: BTreeMap<&String, Vec<serde_json::Value>> = report
                    .traces
                    .iter()
                    .map(|(root, entries)| {
                        let rows = entries
                            .iter()
                            .map(|e| {
                                let state: BTreeMap<&String, &String> = e.state.iter().map(|(k, v)| (k, v)).collect();
                                json!({"path": e.path, "cycle": e.cycle, "state": state})
                            })
                            .collect();
                        (root, rows)
                    })
                    .collect();
                fs::write(&path, serde_json::to_string_pretty(&doc)?)
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
            if json {
                println!("{}", serde_json::to_string_pretty(&report.to_json())?);
            } else {
                print_report(&report);
            }
            Ok(report.exit_code() as u8)
        }
        Cmd::Report { input, json } => {
            let project = load(&input)?;
            let c = compile(&project)?;
            let opts = options(&project, ProveFlags {
                jobs: None,
                budget_bits: None,
                cycles: None,
            });
            let store = CertStore::load(&project.cache_dir())?;
            let roots = project.roots(&c.ir);
            let levels = coverage(&c, &roots, &store, &opts)?;
            if json {
                let rows: Vec<_> = levels
                    .iter()
                    .map(|(l, (p, t))| json!({"level": l, "proved": p, "total": t}))
                    .collect();
                let (p, t) = totals(&levels);
                println!(
                    "{}",
                    serde_json::to_string_pretty(&json!({"levels": rows, "proved": p, "total": t}))?
                );
            } else {
                for (l, (p, t)) in &levels {
                    println!("level {l}: {p}/{t} proved");
                }
                let (p, t) = totals(&levels);
                println!("total: {p}/{t} proved");
            }
            Ok(0)
        }
    }
}

fn totals(levels: &BTreeMap<u32, (usize, usize)>) -> (usize, usize) {
    levels.values().fold((0, 0), |(p, t), (a, b)| (p + a, t + b))
}

/// Proved and total obligations per level, counting only certificates
/// issued for the current dependency closure.
fn coverage(
    c: &Compiled,
    roots: &[String],
    store: &CertStore,
    opts: &ProveOptions,
) -> Result<BTreeMap<u32, (usize, usize)>, Failure> {
    let obligations = generate_obligations(&c.ir, roots)?;
    let graph = tlv_core::proof::DepGraph::new(&c.ir);
    let params = opts.hash_params();
    let mut hashes: HashMap<&str, String> = HashMap::new();
    let mut out: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for ob in &obligations {
        let h = hashes
            .entry(ob.root.as_str())
            .or_insert_with(|| graph.closure_hash(&ob.root, &params));
        let e = out.entry(ob.level).or_default();
        e.1 += 1;
        if store.lookup(&ob.name, h).is_some_and(|c| c.verdict.is_proved()) {
            e.0 += 1;
        }
    }
    Ok(out)
}

fn print_report(report: &ProveReport) {
    for r in &report.results {
        let cached = if r.cached { ", cached" } else { "" };
        println!("{:<10} {} ({:.1} ms{cached})", r.verdict.to_string().to_uppercase(), r.name, r.time_ms);
        match &r.verdict {
            Verdict::Disproved { witness } => {
                if witness.is_empty() {
                    println!("           witness: none needed (no free values)");
                }
                for (k, v) in witness {
                    println!("           witness: {k} = {v:#x}");
                }
            }
            Verdict::Unknown { reason } => println!("           reason: {reason}"),
            Verdict::Proved { .. } => {}
        }
    }
    let proved = report.count(Verdict::is_proved);
    let disproved = report.count(Verdict::is_disproved);
    println!(
        "{} obligations: {proved} proved, {disproved} disproved, {} unknown; {} reproved, {} summaries, {:.1} ms",
        report.results.len(),
        report.results.len() - proved - disproved,
        report.reproved,
        report.summaries,
        report.wall_ms
    );
}
