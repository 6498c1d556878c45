//! The `pilot` command line.
//!
//! Exit status: 0 on success, 1 on domain errors (bad policy, unknown label,
//! incomparable join, invalid scenario), 2 on usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{PilotError, Result};
use crate::hierarchy::Hierarchies;
use crate::policy::{DataCommunicationRule, JoinMode, PilotPolicy};
use crate::scenario::{load_scenario, to_canonical_json, AnalysisRecord, Scenario, Store};
use crate::service::{self, Respect, VerifyRequest};
use crate::text::{parse_document, parse_policy_unchecked, render_policy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "pilot",
    version,
    about = "PILOT privacy policies: parse, compare, join and analyze risks"
)]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a .pilot file and print its abstract form.
    Parse {
        file: PathBuf,
        /// Check labels against this scenario's hierarchies.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Is the first policy subsumed by (at least as restrictive as) the second?
    Check {
        left: PathBuf,
        right: PathBuf,
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Join two policies; conditions are printed normalized.
    Join {
        left: PathBuf,
        right: PathBuf,
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Pick the second label on incomparable components instead of failing.
        #[arg(long)]
        literal: bool,
    },
    /// Answer one scenario question.
    Verify {
        scenario: PathBuf,
        #[arg(long)]
        question: String,
        /// Risk assumption id to enable; repeatable.
        #[arg(long = "assume")]
        assume: Vec<String>,
        /// Policy variant; defaults to the scenario's first.
        #[arg(long)]
        variant: Option<String>,
    },
    /// Answer every question under every variant, without and with all assumptions.
    Table {
        scenario: PathBuf,
        /// Also save an analysis record in this directory.
        #[arg(long, env = "PILOT_STORE")]
        store: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "PILOT_STORE", default_value = "pilot-store")]
        store: PathBuf,
    },
}

/// Runs the CLI and returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| PilotError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn hierarchies(scenario: Option<&Path>, texts: &[&str]) -> Result<Hierarchies> {
    match scenario {
        Some(p) => Ok(load_scenario(p)?.hierarchies),
        None => {
            let ps = texts
                .iter()
                .map(|t| Ok(parse_policy_unchecked(t)?.policy))
                .collect::<Result<Vec<_>>>()?;
            Ok(Hierarchies::covering(&ps))
        }
    }
}

fn rule(r: &DataCommunicationRule) -> String {
    let ps: Vec<&str> = r.dur.purposes.iter().map(String::as_str).collect();
    format!(
        "<{}, {}, <{{{}}}, {}>>",
        r.condition,
        r.entity,
        ps.join(", "),
        r.dur.retention
    )
}

/// Tuple notation: `(datatype, <condition, entity, <{purposes}, retention>>, {transfers})`.
pub fn abstract_form(p: &PilotPolicy) -> String {
    let trs: Vec<String> = p.transfers.iter().map(rule).collect();
    format!("({}, {}, {{{}}})", p.datatype, rule(&p.dcr), trs.join(", "))
}

fn json_line(out: &mut dyn Write, v: &impl serde::Serialize) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let fmt = cli.format;
    match cli.command {
        Command::Parse { file, scenario } => {
            let text = read(&file)?;
            let hs = hierarchies(scenario.as_deref(), &[&text])?;
            let doc = parse_document(&text, &hs)?;
            match fmt {
                Format::Text => writeln!(out, "{}", abstract_form(&doc.policy))?,
                Format::Json => json_line(out, &doc.policy)?,
            }
        }
        Command::Check { left, right, scenario } => {
            let (lt, rt) = (read(&left)?, read(&right)?);
            let hs = hierarchies(scenario.as_deref(), &[&lt, &rt])?;
            let (l, r) = (parse_document(&lt, &hs)?.policy, parse_document(&rt, &hs)?.policy);
            let verdict = l.subsumes(&r, &hs)?;
            match fmt {
                Format::Text => writeln!(out, "{}", if verdict { "subsumed" } else { "not subsumed" })?,
                Format::Json => json_line(out, &serde_json::json!({ "subsumes": verdict }))?,
            }
        }
        Command::Join {
            left,
            right,
            scenario,
            literal,
        } => {
            let (lt, rt) = (read(&left)?, read(&right)?);
            let hs = hierarchies(scenario.as_deref(), &[&lt, &rt])?;
            let (l, r) = (parse_document(&lt, &hs)?.policy, parse_document(&rt, &hs)?.policy);
            let mode = if literal { JoinMode::Literal } else { JoinMode::Strict };
            let j = l.join_with(&r, &hs, mode)?.normalized();
            match fmt {
                Format::Text => writeln!(out, "{}", render_policy(&j))?,
                Format::Json => json_line(out, &j)?,
            }
        }
        Command::Verify {
            scenario,
            question,
            assume,
            variant,
        } => {
            let sc = load_scenario(&scenario)?;
            let req = VerifyRequest {
                variant,
                assumptions: assume,
                question: Some(question),
                ..VerifyRequest::default()
            };
            let resp = service::verify(&sc, &req)?;
            match fmt {
                Format::Json => json_line(out, &resp)?,
                Format::Text => {
                    let q = sc.question(req.question.as_deref().unwrap_or_default())?;
                    writeln!(out, "{}", q.text)?;
                    let variant = resp.variant.as_deref().unwrap_or("base");
                    let assumptions = if resp.assumptions.is_empty() {
                        "none".to_string()
                    } else {
                        resp.assumptions.join(", ")
                    };
                    writeln!(out, "variant: {variant}; assumptions: {assumptions}; now: {}", resp.now)?;
                    let note = match (resp.respected, resp.by_ownership) {
                        (Respect::Red, _) => " (contradicts the data owner's policy)",
                        (_, true) => " (owner)",
                        _ => "",
                    };
                    writeln!(out, "answer: {}{note}", resp.answer)?;
                    for (k, step) in resp.witness.iter().flatten().enumerate() {
                        writeln!(out, "  {}. {}", k + 1, step.text)?;
                    }
                    writeln!(out, "states explored: {}", resp.states_explored)?;
                }
            }
        }
        Command::Table { scenario, store } => {
            let sc: Scenario = load_scenario(&scenario)?;
            let record = AnalysisRecord::run(&sc, None)?;
            match fmt {
                Format::Text => write!(out, "{}", record.table)?,
                Format::Json => write!(out, "{}", to_canonical_json(&record.table)?)?,
            }
            if let Some(dir) = store {
                let (_, path) = Store::open(dir)?.put_record(&record)?;
                writeln!(err, "record: {}", path.display())?;
            }
        }
        Command::Serve { port, store } => {
            let store = Store::open(store)?;
            let addr = SocketAddr::from((Ipv4Addr::LOCALHOST, port));
            writeln!(err, "listening on http://{addr} (store: {})", store.dir().display())?;
            tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()?
                .block_on(service::serve(addr, store))?;
        }
    }
    Ok(())
}
