//! The `restproof` command line.
//!
//! [`dispatch`] parses an argument vector, runs one subcommand and returns the
//! process exit code: 0 on success, 1 when the answer is negative (no proof,
//! a violation, a failed execution), 2 on usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use indexmap::IndexMap;
use restproof::agent::{run, trace_to_n3, CompositionProblem, RunOptions, Status, Transport};
use restproof::benchmark::{generate_chain, run_benchmark, summarize, write_csv, ChainSpec};
use restproof::descgen::{cluster_responses, describe_generalizations, generate_skeletons, parse_trace, DEFAULT_THRESHOLD};
use restproof::n3::{formula_to_string, parse_document, serialize, Document};
use restproof::reason::{check_proof, prove, Budget, FilterRule, KnowledgeBase, Proof, SourceDoc};
use restproof::restdesc::{extract_requests, validate_description, ValidateError};
use restproof::simulator::http::{spawn, HttpTransport};
use restproof::simulator::{Api, ChainServer, Faults, ImageConfig, ImageServer};

/// Environment variable holding the default reasoning budget.
pub const BUDGET_ENV: &str = "RESTPROOF_BUDGET_STEPS";

#[derive(Parser, Debug)]
#[command(name = "restproof", version, about = "Compose and execute hypermedia APIs with N3 proofs")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// Extra diagnostics on standard error.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct BudgetArgs {
    /// Maximum number of rule applications per reasoning run.
    #[arg(long, env = BUDGET_ENV, value_name = "N")]
    pub budget_steps: Option<usize>,
}

impl BudgetArgs {
    fn budget(self) -> Budget {
        self.budget_steps.map_or_else(Budget::default, Budget::steps)
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse an N3 file and print it back in normalized form.
    Parse {
        file: PathBuf,
        /// Print full IRIs instead of prefixed names.
        #[arg(long)]
        expand: bool,
    },
    /// Find a proof of the goal and print it.
    Prove {
        /// Facts and free rules (files or directories).
        #[arg(long, num_args = 1.., required = true)]
        data: Vec<PathBuf>,
        /// Descriptions (files or directories).
        #[arg(long, num_args = 1..)]
        rules: Vec<PathBuf>,
        #[arg(long)]
        goal: PathBuf,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Point evidence at inferences instead of their extractions.
        #[arg(long)]
        elide_extractions: bool,
    },
    /// Check a proof against the documents it cites.
    Check {
        #[arg(long)]
        proof: PathBuf,
        /// Cited documents (files or directories), named by file stem.
        #[arg(long, num_args = 1.., required = true)]
        sources: Vec<PathBuf>,
    },
    /// Check that a file is a well-formed description.
    Validate { file: PathBuf },
    /// List the requests a proof depends on, dependencies first.
    Requests {
        #[arg(long)]
        proof: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        rules: Vec<PathBuf>,
    },
    /// Reach the goal by executing requests against a server.
    Execute {
        /// Initial state (files or directories).
        #[arg(long, num_args = 1.., required = true)]
        data: Vec<PathBuf>,
        #[arg(long, num_args = 1.., required = true)]
        rules: Vec<PathBuf>,
        #[arg(long)]
        goal: PathBuf,
        /// Ground facts and rules that hold in every state.
        #[arg(long, num_args = 1..)]
        background: Vec<PathBuf>,
        /// `simulator`, `simulator-image`, `simulator-walkthrough`,
        /// `simulator-chain` or an `http://` base URL.
        #[arg(long)]
        server: String,
        /// Chain parameters for the chain simulator.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Make the simulator misbehave.
        #[arg(long, value_enum)]
        fault: Vec<Fault>,
        /// Restrict faults to one method.
        #[arg(long, requires = "fault")]
        fault_method: Option<String>,
        /// Directory holding uploaded entities, for `http://` servers.
        #[arg(long)]
        entity_dir: Option<PathBuf>,
        /// Keep response facts after a description is retired.
        #[arg(long)]
        keep_learned: bool,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Write the execution trace as N3.
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
    },
    /// Serve a simulated API over HTTP until killed.
    Serve {
        #[arg(long, value_enum)]
        api: ApiKind,
        #[arg(long, required_if_eq("api", "chain"))]
        spec: Option<PathBuf>,
        /// Use the walkthrough ids and link shapes.
        #[arg(long, conflicts_with = "spec")]
        walkthrough: bool,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Generate a description chain.
    Benchgen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        dummies: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time proof generation over a grid of chains.
    Bench {
        /// JSON: a list of chain specs, or an object of value lists.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long)]
        csv: PathBuf,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Draft descriptions from a recorded interaction trace.
    Descgen {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    DropBody,
    WrongTriples,
    ServerError,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ApiKind {
    Image,
    Chain,
}

enum Failure {
    /// Exit 1.
    Domain(String),
    /// Exit 2.
    Usage(String),
}

type Outcome = Result<(), Failure>;

fn domain(e: impl std::fmt::Display) -> Failure {
    Failure::Domain(e.to_string())
}

/// Runs one subcommand. Data goes to `out`, diagnostics to `err`.
pub fn dispatch<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    2
                }
            };
        }
    };
    match execute(cli, out, err) {
        Ok(()) => 0,
        Err(Failure::Domain(m)) => {
            let _ = writeln!(err, "error: {m}");
            1
        }
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            2
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Files named directly, plus the `*.n3` files of named directories in name order.
fn expand_paths(paths: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut inner: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "n3"))
                .collect();
            inner.sort();
            files.extend(inner);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn parse_file(path: &Path) -> Result<Document, Failure> {
    parse_document(&read(path)?, None).map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))
}

/// One source per file, named by file stem.
fn load_sources(paths: &[PathBuf]) -> Result<Vec<SourceDoc>, Failure> {
    expand_paths(paths)?.iter().map(|p| Ok(SourceDoc::new(stem(p), parse_file(p)?))).collect()
}

fn load_goal(path: &Path) -> Result<FilterRule, Failure> {
    FilterRule::from_document(stem(path), parse_file(path)?).map_err(domain)
}

fn load_proof(path: &Path) -> Result<Proof, Failure> {
    Proof::from_document(&parse_file(path)?).map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))
}

/// Prefixes of all documents, first declaration wins.
fn merged_prefixes<'a>(docs: impl IntoIterator<Item = &'a Document>) -> IndexMap<String, String> {
    let mut out = IndexMap::new();
    for d in docs {
        for (k, v) in &d.prefixes {
            out.entry(k.clone()).or_insert_with(|| v.clone());
        }
    }
    out
}

fn emit(out: &mut dyn Write, text: &str) -> Outcome {
    out.write_all(text.as_bytes()).map_err(|e| Failure::Domain(format!("writing output: {e}")))
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let verbose = cli.verbose;
    match cli.command {
        Command::Parse { file, expand } => {
            let doc = parse_file(&file)?;
            if expand {
                emit(out, &formula_to_string(&doc.body, &IndexMap::new()))
            } else {
                emit(out, &serialize(&doc))
            }
        }
        Command::Prove { data, rules, goal, budget, elide_extractions } => {
            let kb = KnowledgeBase::new(load_sources(&data)?);
            let descs = load_sources(&rules)?;
            let goal = load_goal(&goal)?;
            let start = std::time::Instant::now();
            let proof = prove(&kb, &descs, &goal, budget.budget()).map_err(domain)?;
            if verbose {
                let _ = writeln!(err, "proved in {:?}", start.elapsed());
            }
            let docs = kb.sources.iter().chain(&descs).map(|s| &s.document).chain([&goal.document]);
            emit(out, &proof.to_n3(&merged_prefixes(docs), elide_extractions))
        }
        Command::Check { proof, sources } => {
            let proof = load_proof(&proof)?;
            let sources: IndexMap<String, _> =
                load_sources(&sources)?.into_iter().map(|s| (s.iri, s.document.body)).collect();
            match check_proof(&proof, &sources) {
                Ok(()) => emit(out, "valid\n"),
                Err(e) => {
                    for v in e.violations() {
                        let _ = writeln!(err, "{v}");
                    }
                    Err(Failure::Domain(format!("proof is not valid: {} violation(s)", e.violations().len())))
                }
            }
        }
        Command::Validate { file } => {
            let doc = parse_file(&file)?;
            match validate_description(stem(&file), &doc) {
                Ok(d) => emit(out, &format!("valid: {}\n", d.request)),
                Err(ValidateError::Violations(vs)) => {
                    for v in &vs {
                        let _ = writeln!(err, "{v}");
                    }
                    Err(Failure::Domain(format!("{} violation(s)", vs.len())))
                }
                Err(e) => Err(domain(e)),
            }
        }
        Command::Requests { proof, rules } => {
            let proof = load_proof(&proof)?;
            let rules = load_sources(&rules)?
                .iter()
                .map(|s| validate_description(s.iri.clone(), &s.document).map_err(|e| Failure::Domain(format!("{}: {e}", s.iri))))
                .collect::<Result<Vec<_>, _>>()?;
            let mut table = String::from("#\tready\trule\tlemma\trequest\n");
            for (i, r) in extract_requests(&proof, &rules).iter().enumerate() {
                let ready = if r.sufficiently_specified { "yes" } else { "no" };
                table.push_str(&format!("{}\t{ready}\t{}\t{}\t{}\n", i + 1, r.rule, proof.steps[r.step].name, r.request));
            }
            emit(out, &table)
        }
        Command::Execute {
            data,
            rules,
            goal,
            background,
            server,
            spec,
            fault,
            fault_method,
            entity_dir,
            keep_learned,
            budget,
            trace,
        } => {
            let problem = CompositionProblem::new(
                load_sources(&data)?,
                load_goal(&goal)?,
                load_sources(&rules)?,
                load_sources(&background)?,
            )
            .map_err(domain)?;
            let faults = Faults {
                drop_body: fault.contains(&Fault::DropBody),
                wrong_triples: fault.contains(&Fault::WrongTriples),
                server_error: fault.contains(&Fault::ServerError),
                only_method: fault_method,
            };
            let mut transport = transport(&server, spec.as_deref(), faults, entity_dir)?;
            let outcome = run(&problem, transport.as_mut(), budget.budget(), RunOptions { keep_learned });
            for w in &outcome.warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            let mut text = String::from("n_pre\tstatus\tn_post\tdecision\trule\trequest\n");
            for s in &outcome.trace {
                text.push_str(&format!("{}\t{}\t{}\t{}\t{}\t{}\n", s.n_pre, s.status, s.n_post, s.decision, s.rule, s.request));
            }
            for r in &outcome.retired {
                text.push_str(&format!("retired {r}\n"));
            }
            match (&outcome.status, &outcome.goal_instance) {
                (Status::Success, Some(g)) => {
                    let prefixes = merged_prefixes(problem.state.iter().map(|s| &s.document).chain([&problem.goal.document]));
                    text.push_str("success\n");
                    text.push_str(&formula_to_string(g, &prefixes));
                }
                (Status::Success, None) => text.push_str("success\n"),
                (Status::Failure(c), _) => text.push_str(&format!("failure: {c}\n")),
            }
            emit(out, &text)?;
            if let Some(path) = trace {
                std::fs::write(&path, trace_to_n3(&outcome)).map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))?;
            }
            match outcome.status {
                Status::Success => Ok(()),
                Status::Failure(c) => Err(domain(format!("execution failed: {c}"))),
            }
        }
        Command::Serve { api, spec, walkthrough, port, host } => {
            let api = match api {
                ApiKind::Image if walkthrough => Api::Image(ImageServer::new(ImageConfig::walkthrough())),
                ApiKind::Image => Api::Image(ImageServer::new(ImageConfig::default())),
                ApiKind::Chain => Api::Chain(ChainServer::new(load_spec(spec.as_deref())?)),
            };
            let running = spawn(api, &format!("{host}:{port}")).map_err(|e| Failure::Domain(format!("cannot listen: {e}")))?;
            emit(out, &format!("listening on {}\n", running.base_url()))?;
            let _ = out.flush();
            loop {
                std::thread::park();
            }
        }
        Command::Benchgen { n, d, dummies, seed, out: dir } => {
            let spec = ChainSpec { n, d, dummies, seed };
            spec.validate().map_err(Failure::Usage)?;
            let chain = generate_chain(spec);
            chain.write_to(&dir).map_err(|e| Failure::Domain(format!("{}: {e}", dir.display())))?;
            emit(out, &format!("{} descriptions, plan of {} steps\n", chain.descriptions.len(), chain.plan.len()))
        }
        Command::Bench { grid, trials, csv, budget } => {
            let grid = parse_grid(&read(&grid)?).map_err(Failure::Usage)?;
            if trials == 0 {
                return Err(Failure::Usage("--trials must be at least 1".into()));
            }
            let records = run_benchmark(&grid, trials, budget.budget());
            let file = std::fs::File::create(&csv).map_err(|e| Failure::Domain(format!("{}: {e}", csv.display())))?;
            write_csv(&records, file).map_err(domain)?;
            let mut text = String::from("n\td\tdummies\ttrials\tfailures\treason_mean_ms\treason_std_ms\n");
            let summaries = summarize(&records);
            for s in &summaries {
                text.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{:.3}\t{:.3}\n",
                    s.spec.n, s.spec.d, s.spec.dummies, s.trials, s.failures, s.reason_mean_ms, s.reason_std_ms
                ));
            }
            emit(out, &text)?;
            for r in records.iter().filter(|r| r.error.is_some()) {
                let _ = writeln!(err, "n={} d={} trial {}: {}", r.spec.n, r.spec.d, r.trial, r.error.as_deref().unwrap_or_default());
            }
            match summaries.iter().map(|s| s.failures).sum::<usize>() {
                0 => Ok(()),
                k => Err(domain(format!("{k} trial(s) failed"))),
            }
        }
        Command::Descgen { trace, threshold, out: dir } => {
            if !(0.0..=1.0).contains(&threshold) {
                return Err(Failure::Usage(format!("--threshold must lie in [0, 1], got {threshold}")));
            }
            let entries = parse_trace(&read(&trace)?).map_err(|e| Failure::Domain(format!("{}: {e}", trace.display())))?;
            let clusters = cluster_responses(&entries, threshold);
            let skeletons = generate_skeletons(&clusters, &entries).map_err(domain)?;
            std::fs::create_dir_all(&dir).map_err(|e| Failure::Domain(format!("{}: {e}", dir.display())))?;
            let mut text = String::new();
            for (k, (c, s)) in clusters.iter().zip(&skeletons).enumerate() {
                let name = format!("skeleton{}.n3", k + 1);
                std::fs::write(dir.join(&name), s.to_n3()).map_err(|e| Failure::Domain(format!("{name}: {e}")))?;
                let members: Vec<String> = c.members.iter().map(|m| (m + 1).to_string()).collect();
                text.push_str(&format!("{name}: {} {} from entries {}\n", c.method, c.uri_template, members.join(",")));
                for line in describe_generalizations(s).lines() {
                    text.push_str(&format!("  {line}\n"));
                }
            }
            emit(out, &text)
        }
    }
}

fn load_spec(path: Option<&Path>) -> Result<ChainSpec, Failure> {
    let path = path.ok_or_else(|| Failure::Usage("the chain API needs --spec".into()))?;
    let spec: ChainSpec =
        serde_json::from_str(&read(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    spec.validate().map_err(Failure::Usage)?;
    Ok(spec)
}

fn transport(
    server: &str,
    spec: Option<&Path>,
    faults: Faults,
    entity_dir: Option<PathBuf>,
) -> Result<Box<dyn Transport>, Failure> {
    let image = |config: ImageConfig| Box::new(ImageServer::new(ImageConfig { faults: faults.clone(), ..config }));
    let chain = || -> Result<Box<dyn Transport>, Failure> {
        Ok(Box::new(ChainServer { faults: faults.clone(), ..ChainServer::new(load_spec(spec)?) }))
    };
    Ok(match server {
        "simulator" if spec.is_some() => chain()?,
        "simulator" | "simulator-image" => image(ImageConfig::default()),
        "simulator-walkthrough" => image(ImageConfig::walkthrough()),
        "simulator-chain" => chain()?,
        url if url.starts_with("http://") || url.starts_with("https://") => {
            let mut t = HttpTransport::new(url);
            t.entity_dir = entity_dir;
            Box::new(t)
        }
        other => return Err(Failure::Usage(format!("unknown server {other:?}"))),
    })
}

/// A list of specs, or `{"n": [...], "d": [...], "dummies": [...], "seed": s}`.
pub fn parse_grid(text: &str) -> Result<Vec<ChainSpec>, String> {
    #[derive(serde::Deserialize)]
    #[serde(untagged)]
    enum Grid {
        List(Vec<ChainSpec>),
        Product {
            n: Vec<usize>,
            d: Vec<usize>,
            #[serde(default)]
            dummies: Vec<usize>,
            #[serde(default)]
            seed: u64,
        },
    }
    let grid: Grid = serde_json::from_str(text).map_err(|e| format!("grid: {e}"))?;
    let specs = match grid {
        Grid::List(l) => l,
        Grid::Product { n, d, dummies, seed } => {
            let dummies = if dummies.is_empty() { vec![0] } else { dummies };
            let mut out = Vec::new();
            for &n in &n {
                for &d in &d {
                    for &dummies in &dummies {
                        out.push(ChainSpec { n, d, dummies, seed });
                    }
                }
            }
            out
        }
    };
    for s in &specs {
        s.validate().map_err(|e| format!("grid: {e}"))?;
    }
    if specs.is_empty() {
        return Err("grid is empty".into());
    }
    Ok(specs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        let Ok(a) = parse_grid(r#"[{"n": 4, "d": 1}]"#) else { panic!() };
        assert_eq!(a, [ChainSpec::new(4, 1)]);
        let Ok(b) = parse_grid(r#"{"n": [4, 8], "d": [1, 2, 3]}"#) else { panic!() };
        assert_eq!(b.len(), 6);
        assert!(parse_grid(r#"{"n": [1], "d": [1]}"#).is_err());
        assert!(parse_grid("[]").is_err());
    }
}
