//! `seclink`: batch front end for validating, weaving, measuring and tracing
//! function block systems.
//!
//! Exit status is 0 on success, 1 when the input is well formed but violates
//! a rule (invalid model, compile failure, unknown node, strict coverage
//! gap) and 2 when a file cannot be read or parsed.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use seclink_core::compiler::{compile, CompileOptions};
use seclink_core::format::{
    edge_record, node_record, parse_repository, parse_system_unchecked, serialize_system,
};
use seclink_core::metrics::{AnnotationPolicy, MetricsReport, ReportFormat, Sections};
use seclink_core::model::SecureLinkAnnotation;
use seclink_core::trace::{apply_compile_events, coverage, trace_back, trace_forward};
use seclink_core::{load_library, SecurityLibrary, SystemDocument, TraceGraph};
use tempfile::NamedTempFile;

#[derive(Debug, Parser)]
#[command(
    name = "seclink",
    version,
    about = "Secure-link compiler and metrics for IEC 61499 systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct LibraryArg {
    /// Directory of `*.mech.xml` security mechanisms.
    #[arg(long = "lib", env = "SECLINK_LIBRARY", default_value = "library")]
    path: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a system against the network restrictions.
    Validate { system: PathBuf },
    /// Replace cross-device secure links by mechanism instances.
    Compile {
        system: PathBuf,
        #[command(flatten)]
        library: LibraryArg,
        /// Trace repository; new records are appended.
        #[arg(long)]
        repo: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Give every link its own key exchange.
        #[arg(long)]
        no_share_kx: bool,
    },
    /// Design and program complexity of a system.
    Metrics {
        system: PathBuf,
        #[arg(long)]
        design: bool,
        #[arg(long)]
        program: bool,
        #[arg(long, value_enum, default_value_t = Links::Count)]
        links: Links,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Nodes reachable from a node of the trace repository.
    Trace {
        node: String,
        #[arg(long, value_enum, default_value_t = Direction::Fwd)]
        direction: Direction,
        #[arg(long)]
        repo: PathBuf,
    },
    /// Requirement and clause coverage of a trace repository.
    Coverage {
        #[arg(long)]
        repo: PathBuf,
        /// Fail when any requirement is unimplemented.
        #[arg(long)]
        strict: bool,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Inspect the security library.
    Lib {
        #[command(subcommand)]
        command: LibCommand,
    },
}

#[derive(Debug, Subcommand)]
enum LibCommand {
    List {
        #[command(flatten)]
        library: LibraryArg,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Links {
    Count,
    Ignore,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Structured,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Direction {
    Fwd,
    Back,
}

enum Failure {
    /// Rule violation on readable input.
    Domain(String),
    /// Unreadable or unparsable input, or a failed write.
    Input(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Input(_) => 2,
        }
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_system(path: &Path) -> Result<SystemDocument, Failure> {
    let sys = parse_system_unchecked(&read(path)?)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let report = sys.validate();
    if !report.is_valid() {
        return Err(Failure::Domain(report.to_string().trim_end().to_string()));
    }
    Ok(sys)
}

fn load_repo(path: &Path) -> Result<TraceGraph, Failure> {
    parse_repository(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_lib(path: &Path) -> Result<SecurityLibrary, Failure> {
    load_library(path).map_err(|e| Failure::Input(e.to_string()))
}

/// Writes `contents` next to `target` without touching it yet.
fn stage(target: &Path, contents: &[u8]) -> Result<NamedTempFile, Failure> {
    let dir = match target.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| Failure::Input(format!("{}: {e}", target.display()));
    let mut tmp = NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    Ok(tmp)
}

fn commit(tmp: NamedTempFile, target: &Path) -> Outcome {
    tmp.persist(target)
        .map(|_| ())
        .map_err(|e| Failure::Input(format!("{}: {}", target.display(), e.error)))
}

fn validate(system: &Path) -> Outcome {
    let sys = parse_system_unchecked(&read(system)?)
        .map_err(|e| Failure::Input(format!("{}: {e}", system.display())))?;
    let report = sys.validate();
    for d in &report.diagnostics {
        eprintln!("{d}");
    }
    if report.is_valid() {
        Ok(())
    } else {
        Err(Failure::Domain(format!(
            "{} diagnostic(s)",
            report.diagnostics.len()
        )))
    }
}

fn run_compile(system: &Path, lib: &Path, repo: &Path, out: &Path, share: bool) -> Outcome {
    let sys = load_system(system)?;
    let lib = load_lib(lib)?;
    let raw_repo = read(repo)?;
    let graph = parse_repository(&raw_repo)
        .map_err(|e| Failure::Input(format!("{}: {e}", repo.display())))?;

    let outcome = compile(
        &sys,
        &lib,
        &graph,
        CompileOptions {
            share_key_exchanges: share,
        },
    )
    .map_err(|e| Failure::Domain(e.to_string()))?;
    let links: Vec<SecureLinkAnnotation> =
        sys.network.secure_links().map(|(_, l)| l.clone()).collect();
    let updated = apply_compile_events(&graph, &outcome, &links)
        .map_err(|e| Failure::Domain(e.to_string()))?;
    let text =
        serialize_system(&outcome.to_system(&sys)).map_err(|e| Failure::Domain(e.to_string()))?;

    // The graph only grows at the end, so the new records are its tail.
    let mut appended = raw_repo;
    if !appended.is_empty() && !appended.ends_with(b"\n") {
        appended.push(b'\n');
    }
    for n in &updated.nodes()[graph.nodes().len()..] {
        appended.extend_from_slice(node_record(n).as_bytes());
        appended.push(b'\n');
    }
    for e in &updated.edges()[graph.edges().len()..] {
        appended.extend_from_slice(edge_record(e).as_bytes());
        appended.push(b'\n');
    }

    let staged_out = stage(out, text.as_bytes())?;
    let staged_repo = stage(repo, &appended)?;
    commit(staged_out, out)?;
    commit(staged_repo, repo)?;
    println!("{}", outcome.summary());
    Ok(())
}

fn metrics(system: &Path, design: bool, program: bool, links: Links, format: Format) -> Outcome {
    let sys = load_system(system)?;
    let policy = match links {
        Links::Count => AnnotationPolicy::Count,
        Links::Ignore => AnnotationPolicy::Ignore,
    };
    let report = MetricsReport::for_network(&sys.name, &sys.network, policy)
        .map_err(|e| Failure::Domain(e.to_string()))?;
    let sections = if design || program {
        Sections { design, program }
    } else {
        Sections::default()
    };
    let format = match format {
        Format::Table => ReportFormat::Table,
        Format::Structured => ReportFormat::Structured,
        Format::Csv => ReportFormat::Csv,
    };
    print!("{}", report.render(format, sections));
    Ok(())
}

fn trace(node: &str, direction: Direction, repo: &Path) -> Outcome {
    let graph = load_repo(repo)?;
    let reached = match direction {
        Direction::Fwd => trace_forward(&graph, node),
        Direction::Back => trace_back(&graph, node),
    }
    .map_err(|e| Failure::Domain(e.to_string()))?;
    for id in reached {
        println!("{id}");
    }
    Ok(())
}

fn run_coverage(repo: &Path, strict: bool, format: Format) -> Outcome {
    let graph = load_repo(repo)?;
    let report = coverage(&graph);
    match format {
        Format::Structured => {
            let json = serde_json::to_string_pretty(&report).expect("coverage serializes");
            println!("{json}");
        }
        Format::Csv => {
            println!("requirements,implemented,requirement_coverage,spliced_clauses,clauses_reaching_instances,clause_coverage,uncovered");
            println!(
                "{},{},{:.4},{},{},{:.4},{}",
                report.requirements,
                report.implemented,
                report.requirement_coverage,
                report.spliced_clauses,
                report.clauses_reaching_instances,
                report.clause_coverage,
                report.uncovered.join(";")
            );
        }
        Format::Table => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "requirement coverage: {:.2} ({} of {})",
                report.requirement_coverage, report.implemented, report.requirements
            );
            let _ = writeln!(
                out,
                "clause coverage:      {:.2} ({} of {} spliced clauses reach an instance)",
                report.clause_coverage, report.clauses_reaching_instances, report.spliced_clauses
            );
            if report.uncovered.is_empty() {
                let _ = writeln!(out, "uncovered: none");
            } else {
                let _ = writeln!(out, "uncovered: {}", report.uncovered.join(", "));
            }
            if report.vacuous {
                let _ = writeln!(out, "note: the repository has no requirements");
            }
            print!("{out}");
        }
    }
    if strict && !report.uncovered.is_empty() {
        return Err(Failure::Domain(format!(
            "{} requirement(s) not implemented",
            report.uncovered.len()
        )));
    }
    Ok(())
}

fn lib_list(path: &Path) -> Outcome {
    let lib = load_lib(path)?;
    let rows: Vec<[String; 4]> = lib
        .mechanisms
        .values()
        .map(|m| {
            let kind = if m.is_key_exchange {
                "key-exchange".to_string()
            } else {
                m.kind().to_string()
            };
            [
                m.name.clone(),
                kind,
                m.key_exchange_ref.clone().unwrap_or_else(|| "-".into()),
                m.network.instances.len().to_string(),
            ]
        })
        .collect();
    let header = ["name", "kind", "key exchange", "instances"];
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: [&str; 4]| {
        format!(
            "{:<a$}  {:<b$}  {:<c$}  {:>d$}",
            cells[0],
            cells[1],
            cells[2],
            cells[3],
            a = widths[0],
            b = widths[1],
            c = widths[2],
            d = widths[3]
        )
    };
    println!("{}", line(header));
    for row in &rows {
        println!("{}", line([&row[0], &row[1], &row[2], &row[3]]));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Validate { system } => validate(system),
        Command::Compile {
            system,
            library,
            repo,
            out,
            no_share_kx,
        } => run_compile(system, &library.path, repo, out, !no_share_kx),
        Command::Metrics {
            system,
            design,
            program,
            links,
            format,
        } => metrics(system, *design, *program, *links, *format),
        Command::Trace {
            node,
            direction,
            repo,
        } => trace(node, *direction, repo),
        Command::Coverage {
            repo,
            strict,
            format,
        } => run_coverage(repo, *strict, *format),
        Command::Lib {
            command: LibCommand::List { library },
        } => lib_list(&library.path),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Domain(msg) | Failure::Input(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(failure.code())
        }
    }
}
