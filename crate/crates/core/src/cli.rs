//! Command-line front end. `run` parses arguments, executes one query and
//! returns the process exit status.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thiserror::Error;

use crate::bt::{bt, ApproxBT, NakedTree};
use crate::eta::{self, Theory, Tree};
use crate::godel::{decode_term, encode_term, TermCode};
use crate::reduce::{beta_nf_counted, head_normalize, Fuel, Outcome, Tri};
use crate::separation::{self, SeparationCertificate};
use crate::term::{parse, print, substitute_many, Name, Position, Term};
use crate::transform::{self, constant_policy, StreamSpec};
use crate::zoo;

/// Exit status for malformed command lines.
pub const EXIT_USAGE: i32 = 64;
/// Exit status for unparsable terms, codes, trees or certificates.
pub const EXIT_DATA: i32 = 65;
/// Exit status for unreadable files.
pub const EXIT_NOINPUT: i32 = 66;
/// Exit status for output files that cannot be written.
pub const EXIT_CANTCREAT: i32 = 73;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    NoInput(String),
    #[error("{0}")]
    CantCreate(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::NoInput(_) => EXIT_NOINPUT,
            CliError::CantCreate(_) => EXIT_CANTCREAT,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "bohmlab", version, about = "Böhm trees, η-expansions and separation for the untyped λ-calculus")]
struct Cli {
    #[command(flatten)]
    budget: BudgetArgs,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// File of `name = term` abbreviations available to every term argument.
    #[arg(long, global = true)]
    defs: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug, Clone, Copy)]
struct BudgetArgs {
    /// Levels of Böhm tree to explore.
    #[arg(long, global = true, env = "BOHMLAB_DEPTH", default_value_t = 6, value_parser = clap::value_parser!(u64).range(1..))]
    depth: u64,
    /// β-steps allowed per head-normal-form search.
    #[arg(long, global = true, env = "BOHMLAB_FUEL", default_value_t = 20000, value_parser = clap::value_parser!(u64).range(1..))]
    fuel: u64,
    /// Longest reduction cycle detected; 0 disables detection.
    #[arg(long, global = true, default_value_t = 64)]
    cycle_window: usize,
}

impl BudgetArgs {
    fn fuel(&self) -> Fuel {
        Fuel::new(self.fuel).with_window(self.cycle_window)
    }

    fn depth(&self) -> usize {
        self.depth as usize
    }

    fn to_json(self) -> Value {
        json!({"depth": self.depth, "fuel": self.fuel, "cycle_window": self.cycle_window})
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Text,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Relation {
    /// Finite η-expansion of the Böhm tree.
    LeEta,
    /// Possibly infinite η-expansion.
    LeEtaOmega,
    /// Finite η-expansion with at most p extra arguments per node, each of size below p.
    LeEtaP,
    /// Head comparison up to finite η-expansion.
    LeH,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and print a term.
    Fmt {
        term: String,
        /// Expand named constants before printing.
        #[arg(long)]
        expand: bool,
        /// Print the numeric code of the (expanded, closed) term instead.
        #[arg(long)]
        code: bool,
    },
    /// β-normalize (or head-normalize) a term.
    Reduce {
        term: String,
        #[arg(long)]
        head: bool,
    },
    /// Print the Böhm tree to the depth budget.
    Bt { term: String },
    /// Decide equality in a λ-theory: B, Beta:p, H+ or H*.
    Eq {
        m: String,
        n: String,
        #[arg(long, default_value = "B")]
        theory: String,
        /// Size bound for `--theory Beta`.
        #[arg(long)]
        p: Option<usize>,
    },
    /// Decide a preorder between Böhm trees.
    Rel {
        #[arg(value_enum)]
        relation: Relation,
        m: String,
        n: String,
        #[arg(long)]
        p: Option<usize>,
    },
    /// η-expansions of the identity.
    Eta {
        #[command(subcommand)]
        op: EtaOp,
    },
    /// The infinite η-expansion of the identity following a tree:
    /// `complete:K`, `path:N` or `bfs:C0,C1,...`.
    Jt { tree: String },
    /// Rebuild a Böhm tree from the code of a term.
    Phi { term: String },
    /// Rebuild a Böhm tree, wrapping each node in a stream element.
    Psi {
        term: String,
        #[arg(long, default_value = "eta")]
        stream: String,
        /// Stream index used at every position.
        #[arg(long, default_value_t = 0)]
        policy: u128,
        /// Starting position, comma separated.
        #[arg(long, default_value = "")]
        at: String,
    },
    /// The η-join of two terms' Böhm trees.
    Etamax {
        m: String,
        n: String,
        #[arg(long, default_value = "eta")]
        stream: String,
    },
    /// Build a context sending M to I and N to an infinite η-expansion of I.
    Separate {
        m: String,
        n: String,
        /// Extra trailing identity arguments.
        #[arg(long, default_value_t = 0)]
        pad: usize,
        /// Use this separator instead of searching, comma separated.
        #[arg(long)]
        at: Option<String>,
        /// Also write the certificate to this file, for `verify`.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Re-check a separation certificate (JSON file).
    Verify { certificate: PathBuf, m: String, n: String },
    /// Run each line of a file as a command; `=> CODE` suffixes are checked.
    Corpus { file: PathBuf },
}

#[derive(Subcommand, Debug)]
enum EtaOp {
    /// The n-th finite η-expansion of the identity.
    Nth { index: u128 },
    /// Index, tree and size of a finite η-expansion of the identity.
    Index { term: String },
    /// Largest index among expansions of size below p.
    Bound { p: usize },
    /// Is the term an η-expansion of the identity (finite or apparently infinite)?
    Check { term: String },
}

struct Report {
    verdict: Option<Tri>,
    exit: i32,
    text: String,
    json: Value,
}

impl Report {
    fn verdict(t: Tri, text: String, json: Value) -> Report {
        Report { verdict: Some(t), exit: t.exit_code(), text, json }
    }

    fn plain(text: String, json: Value) -> Report {
        Report { verdict: None, exit: 0, text, json }
    }
}

/// Runs one invocation, writing the report to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    return 0;
                }
                _ => EXIT_USAGE,
            };
            let _ = write!(err, "{e}");
            return code;
        }
    };
    let command = command_name(&cli.cmd);
    match execute(&cli, err) {
        Ok(r) => {
            let _ = match cli.format {
                Format::Text => write!(out, "{}", r.text),
                Format::Json => {
                    let doc = json!({
                        "command": command,
                        "budget": cli.budget.to_json(),
                        "verdict": r.verdict.map(|t| t.label()),
                        "result": r.json,
                    });
                    writeln!(out, "{doc}")
                }
            };
            r.exit
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Fmt { .. } => "fmt",
        Command::Reduce { .. } => "reduce",
        Command::Bt { .. } => "bt",
        Command::Eq { .. } => "eq",
        Command::Rel { .. } => "rel",
        Command::Eta { .. } => "eta",
        Command::Jt { .. } => "jt",
        Command::Phi { .. } => "phi",
        Command::Psi { .. } => "psi",
        Command::Etamax { .. } => "etamax",
        Command::Separate { .. } => "separate",
        Command::Verify { .. } => "verify",
        Command::Corpus { .. } => "corpus",
    }
}

// ------------------------------------------------------------ term input

type Defs = Vec<(Name, Term)>;

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::NoInput(format!("{}: {e}", path.display())))
}

fn parse_text(text: &str, defs: &Defs) -> Result<Term, CliError> {
    let t = parse(text).map_err(|e| CliError::Data(format!("{text:?}: {e}")))?;
    Ok(zoo::resolve_constants(&substitute_many(&t, defs)))
}

/// Reads `name = term` lines into `defs`; other non-comment lines are
/// returned joined.
fn absorb(text: &str, defs: &mut Defs) -> Result<String, CliError> {
    let mut rest = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((name, body)) if Name::is_valid(name.trim()) => {
                let t = parse_text(body.trim(), defs)?;
                defs.push((Name::new(name.trim()), t));
            }
            _ => rest.push(line),
        }
    }
    Ok(rest.join(" "))
}

struct Input {
    defs: Defs,
}

impl Input {
    fn new(cli: &Cli) -> Result<Input, CliError> {
        let mut defs = Vec::new();
        if let Some(p) = &cli.defs {
            let extra = absorb(&read(p)?, &mut defs)?;
            if !extra.is_empty() {
                return Err(CliError::Data(format!("{}: only definitions are allowed", p.display())));
            }
        }
        Ok(Input { defs })
    }

    /// A term literal, `@file`, or `#code`.
    fn term(&self, arg: &str) -> Result<Term, CliError> {
        if let Some(path) = arg.strip_prefix('@') {
            let mut defs = self.defs.clone();
            let body = absorb(&read(Path::new(path))?, &mut defs)?;
            return parse_text(&body, &defs);
        }
        if let Some(code) = arg.strip_prefix('#') {
            let c: TermCode = code.parse().map_err(|e| CliError::Data(format!("{e}")))?;
            return decode_term(&c).map_err(|e| CliError::Data(e.to_string()));
        }
        parse_text(arg, &self.defs)
    }

    fn closed(&self, arg: &str) -> Result<Term, CliError> {
        let t = self.term(arg)?;
        if !t.is_closed() {
            let fv: Vec<String> = t.free_vars().iter().map(|n| n.to_string()).collect();
            return Err(CliError::Data(format!("term must be closed; free: {}", fv.join(", "))));
        }
        Ok(t)
    }

    fn stream(&self, spec: &str) -> Result<StreamSpec, CliError> {
        match spec {
            "id" => Ok(StreamSpec::id()),
            "eta" => Ok(StreamSpec::eta()),
            "eta-object" => Ok(StreamSpec::eta_object()),
            _ => {
                if let Some(n) = spec.strip_prefix("trunc:") {
                    let n = n.parse().map_err(|_| CliError::Usage(format!("bad truncation {spec:?}")))?;
                    Ok(StreamSpec::eta_truncated(n))
                } else if let Some(t) = spec.strip_prefix("term:") {
                    Ok(StreamSpec::Object(self.closed(t)?))
                } else {
                    Err(CliError::Usage(format!("unknown stream {spec:?}; use id, eta, eta-object, trunc:N or term:T")))
                }
            }
        }
    }
}

fn position(s: &str) -> Result<Position, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|_| CliError::Usage(format!("bad position {s:?}"))))
        .collect()
}

fn naked_tree(spec: &str) -> Result<NakedTree, CliError> {
    let bad = || CliError::Data(format!("bad tree {spec:?}; use complete:K, path:N or bfs:C0,C1,..."));
    let (kind, arg) = spec.split_once(':').ok_or_else(bad)?;
    match kind {
        "complete" => Ok(NakedTree::complete(arg.parse().map_err(|_| bad())?)),
        "path" => Ok(Tree::path(arg.parse().map_err(|_| bad())?).to_naked()),
        "bfs" => {
            let code = position(arg).map_err(|_| bad())?;
            Ok(Tree::from_bfs(&code).ok_or_else(bad)?.to_naked())
        }
        _ => Err(bad()),
    }
}

fn godel_err(e: crate::godel::GodelError) -> CliError {
    CliError::Data(e.to_string())
}

// ------------------------------------------------------------- commands

fn tree_report(u: &ApproxBT) -> Report {
    let exit = if u.has_unresolved() { Tri::Unknown.exit_code() } else { 0 };
    Report { verdict: None, exit, text: u.render_text(), json: u.to_json() }
}

fn tri_report(t: Tri) -> Report {
    Report::verdict(t, format!("{t}\n"), json!(t.label()))
}

fn execute(cli: &Cli, err: &mut dyn Write) -> Result<Report, CliError> {
    let input = Input::new(cli)?;
    let fuel = cli.budget.fuel();
    let depth = cli.budget.depth();
    Ok(match &cli.cmd {
        Command::Fmt { term, code: true, .. } => {
            let c = encode_term(&input.closed(term)?).map_err(godel_err)?;
            Report::plain(format!("{c}\n"), json!(c.to_string()))
        }
        Command::Fmt { term, expand, .. } => {
            let t = if *expand || term.starts_with('#') {
                input.term(term)?
            } else {
                parse(term).map_err(|e| CliError::Data(format!("{term:?}: {e}")))?
            };
            let s = print(&t);
            Report::plain(format!("{s}\n"), json!(s))
        }
        Command::Reduce { term, head } => {
            let t = input.term(term)?;
            let (outcome, steps) = if *head {
                (head_normalize(&t, fuel), None)
            } else {
                let (o, s) = beta_nf_counted(&t, fuel);
                (o, Some(s))
            };
            match outcome {
                Outcome::Value(v) => {
                    let s = print(&v);
                    Report::verdict(Tri::Yes, format!("{s}\n"), json!({"term": s, "steps": steps}))
                }
                Outcome::Diverged => Report::verdict(Tri::No, "diverged\n".into(), json!({"outcome": "diverged"})),
                Outcome::Exhausted => {
                    Report::verdict(Tri::Unknown, "Unknown: fuel exhausted\n".into(), json!({"outcome": "exhausted"}))
                }
            }
        }
        Command::Bt { term } => tree_report(&bt(&input.term(term)?, depth, fuel)),
        Command::Eq { m, n, theory, p } => {
            let th = match (theory.as_str(), p) {
                ("Beta" | "BetaEta", Some(p)) => Theory::BetaEta(*p),
                ("Beta" | "BetaEta", None) => return Err(CliError::Usage("--theory Beta needs --p".into())),
                (s, _) => s.parse::<Theory>().map_err(CliError::Usage)?,
            };
            tri_report(eta::theory_eq(&input.term(m)?, &input.term(n)?, th, depth, fuel))
        }
        Command::Rel { relation, m, n, p } => {
            let (m, n) = (input.term(m)?, input.term(n)?);
            let t = match relation {
                Relation::LeEta => eta::le_eta(&m, &n, depth, fuel),
                Relation::LeEtaOmega => eta::le_eta_omega(&m, &n, depth, fuel),
                Relation::LeEtaP => {
                    let p = p.ok_or_else(|| CliError::Usage("le-eta-p needs --p".into()))?;
                    eta::le_eta_p(&m, &n, p, depth, fuel)
                }
                Relation::LeH => eta::le_h(&m, &n, fuel),
            };
            tri_report(t)
        }
        Command::Eta { op } => eta_command(&input, op, depth, fuel)?,
        Command::Jt { tree } => tree_report(&eta::jt(&naked_tree(tree)?, depth)),
        Command::Phi { term } => {
            let c = encode_term(&input.closed(term)?).map_err(godel_err)?;
            tree_report(&transform::phi(&c, depth, fuel).map_err(godel_err)?)
        }
        Command::Psi { term, stream, policy, at } => {
            let c = encode_term(&input.closed(term)?).map_err(godel_err)?;
            let s = input.stream(stream)?;
            let u = transform::psi(&constant_policy(*policy), &c, &position(at)?, &s, depth, fuel).map_err(godel_err)?;
            tree_report(&u)
        }
        Command::Etamax { m, n, stream } => {
            let (m, n) = (input.closed(m)?, input.closed(n)?);
            let s = input.stream(stream)?;
            let (cm, cn) = (encode_term(&m).map_err(godel_err)?, encode_term(&n).map_err(godel_err)?);
            let (u, trace) = transform::etamax_traced(&cm, &cn, &s, depth, fuel).map_err(godel_err)?;
            for d in &trace.diagnostics {
                let _ = writeln!(err, "note: {d}");
            }
            tree_report(&u)
        }
        Command::Separate { m, n, pad, at, save } => {
            let (m, n) = (input.term(m)?, input.term(n)?);
            let res = match at {
                Some(s) => separation::separate_at(&m, &n, &position(s)?, depth, fuel),
                None => separation::separate(&m, &n, depth, fuel),
            };
            match res {
                Ok(cert) => {
                    let cert = cert.padded(*pad);
                    if let Some(path) = save {
                        std::fs::write(path, cert.to_json() + "\n")
                            .map_err(|e| CliError::CantCreate(format!("{}: {e}", path.display())))?;
                    }
                    let text = format!(
                        "separator: {:?}\nk: {}\ncontext: {}\nC[M] reaches I in {} steps\nC[N]: {}\n",
                        cert.separator, cert.k, cert.context, cert.m_steps, cert.sketch
                    );
                    let json = serde_json::to_value(&cert).expect("certificate serializes");
                    Report::verdict(Tri::Yes, text, json)
                }
                Err(e) => {
                    let t = match e {
                        separation::SepError::NoSeparator(_) | separation::SepError::NoHeadNormalForm(_) => Tri::Unknown,
                        _ => Tri::No,
                    };
                    Report::verdict(t, format!("{t}: {e}\n"), json!({"error": e.to_string()}))
                }
            }
        }
        Command::Verify { certificate, m, n } => {
            let cert = SeparationCertificate::from_json(&read(certificate)?).map_err(|e| CliError::Data(e.to_string()))?;
            let (m, n) = (input.term(m)?, input.term(n)?);
            tri_report(separation::verify_separation(&cert, &m, &n, depth.max(cert.depth), fuel))
        }
        Command::Corpus { file } => corpus(&read(file)?, err)?,
    })
}

fn eta_command(input: &Input, op: &EtaOp, depth: usize, fuel: Fuel) -> Result<Report, CliError> {
    Ok(match op {
        EtaOp::Nth { index } => {
            let t = eta::enumerate_eta(*index);
            let s = print(&t);
            Report::plain(format!("{s}\n"), json!({"index": index.to_string(), "term": s}))
        }
        EtaOp::Index { term } => {
            let t = input.term(term)?;
            let nf = match crate::reduce::beta_nf(&t, fuel) {
                Outcome::Value(v) => v,
                _ => return Ok(tri_report(Tri::Unknown)),
            };
            match eta::eta_to_tree(&nf) {
                Ok(tree) => {
                    let idx = eta::eta_index(&tree).map_err(|e| CliError::Data(e.to_string()))?;
                    let text = format!("index {idx}\ntree {tree:?}\nsize {}\n", tree.size());
                    Report::verdict(
                        Tri::Yes,
                        text,
                        json!({"index": idx.to_string(), "bfs": tree.bfs_code(), "size": tree.size()}),
                    )
                }
                Err(e) => Report::verdict(Tri::No, format!("No: {e}\n"), json!({"error": e.to_string()})),
            }
        }
        EtaOp::Bound { p } => match eta::eta_bound_index(*p) {
            Some(i) => Report::plain(format!("{i}\n"), json!(i.to_string())),
            None => Report::plain("none\n".into(), Value::Null),
        },
        EtaOp::Check { term } => {
            let t = input.term(term)?;
            let finite = eta::is_finite_eta_id(&t, fuel);
            let (verdict, kind) = if finite == Tri::Yes {
                (Tri::Yes, "finite")
            } else if eta::looks_like_infinite_eta_id(&t, fuel) {
                (Tri::Yes, "infinite")
            } else if bt(&t, depth, fuel).has_unresolved() {
                (Tri::Unknown, "unknown")
            } else {
                (Tri::No, "none")
            };
            Report::verdict(verdict, format!("{verdict} ({kind})\n"), json!({"kind": kind}))
        }
    })
}

/// One command per line, optionally followed by `=> CODE`. Lines without
/// an expectation only need to avoid usage and data errors.
fn corpus(text: &str, err: &mut dyn Write) -> Result<Report, CliError> {
    let mut failures = 0;
    let mut lines = Vec::new();
    let mut report = String::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (cmd, expect) = match line.rsplit_once("=>") {
            Some((c, e)) => {
                let code: i32 = e.trim().parse().map_err(|_| CliError::Data(format!("line {}: bad expectation", no + 1)))?;
                (c.trim(), Some(code))
            }
            None => (line, None),
        };
        let words = shlex::split(cmd).ok_or_else(|| CliError::Data(format!("line {}: unbalanced quotes", no + 1)))?;
        let mut sink = Vec::new();
        let code = run(std::iter::once("bohmlab".to_string()).chain(words), &mut sink, err);
        let ok = match expect {
            Some(e) => code == e,
            None => code < EXIT_USAGE,
        };
        if !ok {
            failures += 1;
        }
        report.push_str(&format!("{} {cmd} => {code}\n", if ok { "ok  " } else { "FAIL" }));
        lines.push(json!({"line": no + 1, "command": cmd, "exit": code, "ok": ok}));
    }
    let t = Tri::from_bool(failures == 0);
    report.push_str(&format!("{failures} failures\n"));
    Ok(Report::verdict(t, report, json!(lines)))
}
