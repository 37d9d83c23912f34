//! Generated description chains and a timing harness.
//!
//! Description `i` of a chain turns `d` facts `?aj ex:rel{i} ?bj` into a GET
//! on `?b1` that yields `?bj ex:rel{i+1} _:cj`. The start state holds the
//! `rel1` facts and the goal asks for `rel{n+1}`, so only the full chain
//! reaches it. Dummies consume chain facts but produce predicates the goal
//! never asks for.

use std::fmt::Write as _;
use std::io;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::n3::parse_document;
use crate::reason::{count_rule_applications, prove, Budget, FilterRule, KnowledgeBase, ProveError, SourceDoc};

pub const CHAIN_NS: &str = "http://example.org/chain#";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n: usize,
    pub d: usize,
    #[serde(default)]
    pub dummies: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ChainSpec {
    pub fn new(n: usize, d: usize) -> Self {
        ChainSpec { n, d, dummies: 0, seed: 0 }
    }

    pub fn with_dummies(self, dummies: usize) -> Self {
        ChainSpec { dummies, ..self }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n < 2 {
            return Err(format!("n must be at least 2, got {}", self.n));
        }
        if self.d < 1 {
            return Err(format!("d must be at least 1, got {}", self.d));
        }
        Ok(())
    }
}

/// Generated files, as text, plus the intended plan.
#[derive(Clone, Debug)]
pub struct GeneratedChain {
    pub spec: ChainSpec,
    /// `(iri, text)` for every description, dummies included, in seed order.
    pub descriptions: Vec<(String, String)>,
    pub initial_state: String,
    pub goal: String,
    /// IRIs of the descriptions a correct plan applies, first to last.
    pub plan: Vec<String>,
}

pub fn chain_description_iri(i: usize) -> String {
    format!("chain_desc_{i}")
}

fn prefixes() -> String {
    format!("@prefix ex: <{CHAIN_NS}>.\n@prefix http: <http://www.w3.org/2011/http#>.\n\n")
}

fn description(d: usize, input: &str, output: &str) -> String {
    let mut s = prefixes();
    s.push_str("{\n");
    for j in 1..=d {
        let _ = writeln!(s, "  ?a{j} ex:{input} ?b{j}.");
    }
    s.push_str("}\n=>\n{\n");
    s.push_str("  _:request http:methodName \"GET\";\n            http:requestURI ?b1;\n            http:resp [ http:body ?b1 ].\n");
    for j in 1..=d {
        let _ = writeln!(s, "  ?b{j} ex:{output} _:c{j}.");
    }
    s.push_str("}.\n");
    s
}

pub fn chain_resource(level: usize, j: usize) -> String {
    format!("/chain/{level}/{j}")
}

pub fn generate_chain(spec: ChainSpec) -> GeneratedChain {
    let ChainSpec { n, d, dummies, seed } = spec;
    let mut descriptions: Vec<(String, String)> =
        (1..=n).map(|i| (chain_description_iri(i), description(d, &format!("rel{i}"), &format!("rel{}", i + 1)))).collect();
    for k in 0..dummies {
        let (family, level) = (k / n + 1, k % n + 1);
        descriptions.push((
            format!("dummy_desc_{family}_{level}"),
            description(d, &format!("rel{level}"), &format!("dummy{family}rel{}", level + 1)),
        ));
    }
    descriptions.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut initial_state = prefixes();
    for j in 1..=d {
        let _ = writeln!(initial_state, "</chain/start/{j}> ex:rel1 <{}>.", chain_resource(0, j));
    }
    let atoms: String = (1..=d).map(|j| format!("  ?a{j} ex:rel{} ?b{j}.\n", n + 1)).collect();
    let goal = format!("{}{{\n{atoms}}}\n=>\n{{\n{atoms}}}.\n", prefixes());

    GeneratedChain { spec, descriptions, initial_state, goal, plan: (1..=n).map(chain_description_iri).collect() }
}

/// Parsed form of a generated chain, ready for the reasoner.
pub struct LoadedChain {
    pub knowledge: KnowledgeBase,
    pub descriptions: Vec<SourceDoc>,
    pub goal: FilterRule,
}

impl GeneratedChain {
    pub fn load(&self) -> Result<LoadedChain, ProveError> {
        let parse = |iri: &str, text: &str| {
            SourceDoc::parse(iri, text).map_err(|e| ProveError::InvalidInput(format!("{iri}: {e}")))
        };
        let knowledge = KnowledgeBase::new(vec![parse("initial", &self.initial_state)?]);
        let descriptions = self.descriptions.iter().map(|(iri, t)| parse(iri, t)).collect::<Result<_, _>>()?;
        let goal = FilterRule::from_document("goal", parse_document(&self.goal, None).map_err(|e| ProveError::InvalidInput(e.to_string()))?)?;
        Ok(LoadedChain { knowledge, descriptions, goal })
    }

    /// Writes `<iri>.n3` per description, `initial.n3`, `goal.n3`,
    /// `plan.txt` and `chain.json`.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        let descs = dir.join("descriptions");
        std::fs::create_dir_all(&descs)?;
        for (iri, text) in &self.descriptions {
            std::fs::write(descs.join(format!("{iri}.n3")), text)?;
        }
        std::fs::write(dir.join("initial.n3"), &self.initial_state)?;
        std::fs::write(dir.join("goal.n3"), &self.goal)?;
        std::fs::write(dir.join("plan.txt"), self.plan.join("\n") + "\n")?;
        std::fs::write(dir.join("chain.json"), serde_json::to_string_pretty(&self.spec)? + "\n")?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingRecord {
    pub spec: ChainSpec,
    pub trial: usize,
    pub parse: Duration,
    pub reason: Duration,
    /// Number of description applications in the proof, if one was found.
    pub n_pre: Option<usize>,
    pub error: Option<String>,
}

impl TimingRecord {
    pub fn total(&self) -> Duration {
        self.parse + self.reason
    }
}

/// Times one parse plus prove.
pub fn measure(chain: &GeneratedChain, trial: usize, budget: Budget) -> TimingRecord {
    let start = Instant::now();
    let loaded = chain.load();
    let parse = start.elapsed();
    let mut record = TimingRecord { spec: chain.spec, trial, parse, reason: Duration::ZERO, n_pre: None, error: None };
    let loaded = match loaded {
        Ok(l) => l,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    let start = Instant::now();
    let result = prove(&loaded.knowledge, &loaded.descriptions, &loaded.goal, budget);
    record.reason = start.elapsed();
    match result {
        Ok(proof) => {
            let names: Vec<&str> = loaded.descriptions.iter().map(|d| d.iri.as_str()).collect();
            record.n_pre = Some(count_rule_applications(&proof, &names));
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

/// Runs `trials` measured trials per spec after one discarded warm-up.
pub fn run_benchmark(grid: &[ChainSpec], trials: usize, budget: Budget) -> Vec<TimingRecord> {
    let mut out = Vec::new();
    for spec in grid {
        let chain = generate_chain(*spec);
        let _ = measure(&chain, 0, budget);
        for trial in 1..=trials {
            out.push(measure(&chain, trial, budget));
        }
    }
    out
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

pub fn write_csv<W: io::Write>(records: &[TimingRecord], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["n", "d", "dummies", "trial", "parse_ms", "reason_ms", "total_ms", "n_pre"])?;
    for r in records {
        out.write_record([
            r.spec.n.to_string(),
            r.spec.d.to_string(),
            r.spec.dummies.to_string(),
            r.trial.to_string(),
            format!("{:.3}", ms(r.parse)),
            format!("{:.3}", ms(r.reason)),
            format!("{:.3}", ms(r.total())),
            r.n_pre.map_or_else(String::new, |n| n.to_string()),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Mean and standard deviation per spec, in grid order.
#[derive(Clone, Debug)]
pub struct Summary {
    pub spec: ChainSpec,
    pub trials: usize,
    pub failures: usize,
    pub reason_mean_ms: f64,
    pub reason_std_ms: f64,
    pub total_mean_ms: f64,
    pub total_std_ms: f64,
}

pub fn summarize(records: &[TimingRecord]) -> Vec<Summary> {
    let mut specs: Vec<ChainSpec> = Vec::new();
    for r in records {
        if !specs.contains(&r.spec) {
            specs.push(r.spec);
        }
    }
    let stats = |xs: &[f64]| {
        if xs.is_empty() {
            return (f64::NAN, f64::NAN);
        }
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        (mean, var.sqrt())
    };
    specs
        .into_iter()
        .map(|spec| {
            let rs: Vec<&TimingRecord> = records.iter().filter(|r| r.spec == spec).collect();
            let ok: Vec<&&TimingRecord> = rs.iter().filter(|r| r.error.is_none()).collect();
            let (reason_mean_ms, reason_std_ms) = stats(&ok.iter().map(|r| ms(r.reason)).collect::<Vec<_>>());
            let (total_mean_ms, total_std_ms) = stats(&ok.iter().map(|r| ms(r.total())).collect::<Vec<_>>());
            Summary { spec, trials: rs.len(), failures: rs.len() - ok.len(), reason_mean_ms, reason_std_ms, total_mean_ms, total_std_ms }
        })
        .collect()
}

/// Largest over smallest mean reasoning time.
pub fn flatness_ratio(summaries: &[Summary]) -> f64 {
    let means: Vec<f64> = summaries.iter().map(|s| s.reason_mean_ms).filter(|m| m.is_finite()).collect();
    let max = means.iter().cloned().fold(f64::MIN, f64::max);
    let min = means.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}
