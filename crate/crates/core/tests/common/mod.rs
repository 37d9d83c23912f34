//! Helpers shared by the oracle, mutation and acceptance targets.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use restproof::n3::{Formula, Statement, Term, Triple};
use indexmap::IndexMap;
use restproof::benchmark::{generate_chain, ChainSpec};
use restproof::reason::{prove, sources_map, Budget, FilterRule, KnowledgeBase, Proof, SourceDoc, StepKind};
use restproof::samples;

/// Atom over constants `c0..` and variables `x0..`; a variable is `Err(index)`.
pub type Slot = Result<usize, usize>;

#[derive(Clone, Debug)]
pub struct Atom {
    pub s: Slot,
    pub p: usize,
    pub o: Slot,
}

#[derive(Clone, Debug)]
pub struct Rule {
    pub body: Vec<Atom>,
    pub head: Vec<Atom>,
}

/// A random existential-free reasoning problem.
#[derive(Clone, Debug)]
pub struct Instance {
    pub facts: Vec<(usize, usize, usize)>,
    pub rules: Vec<Rule>,
    pub goal_body: Vec<Atom>,
    pub goal_head: Vec<Atom>,
}

const PREFIX: &str = "@prefix ex: <http://example.org/oracle#>.\n";
const CONSTANTS: usize = 4;
const PREDICATES: usize = 3;
const VARIABLES: usize = 3;

fn slot_text(s: Slot) -> String {
    match s {
        Ok(c) => format!("ex:c{c}"),
        Err(v) => format!("?x{v}"),
    }
}

fn atom_text(a: &Atom) -> String {
    format!("{} ex:p{} {}.", slot_text(a.s), a.p, slot_text(a.o))
}

fn random_slot(rng: &mut ChaCha8Rng, vars: bool) -> Slot {
    if vars && rng.gen_bool(0.6) {
        Err(rng.gen_range(0..VARIABLES))
    } else {
        Ok(rng.gen_range(0..CONSTANTS))
    }
}

fn random_atom(rng: &mut ChaCha8Rng) -> Atom {
    Atom { s: random_slot(rng, true), p: rng.gen_range(0..PREDICATES), o: random_slot(rng, true) }
}

fn vars_of(atoms: &[Atom]) -> BTreeSet<usize> {
    atoms.iter().flat_map(|a| [a.s, a.o]).filter_map(|s| s.err()).collect()
}

/// Head atoms only use variables bound by the body.
fn random_head(rng: &mut ChaCha8Rng, body: &[Atom], len: usize) -> Vec<Atom> {
    let bound: Vec<usize> = vars_of(body).into_iter().collect();
    let pick = |rng: &mut ChaCha8Rng| {
        if !bound.is_empty() && rng.gen_bool(0.7) {
            Err(*bound.choose(rng).unwrap())
        } else {
            Ok(rng.gen_range(0..CONSTANTS))
        }
    };
    (0..len).map(|_| Atom { s: pick(rng), p: rng.gen_range(0..PREDICATES), o: pick(rng) }).collect()
}

impl Instance {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let facts = (0..rng.gen_range(1..=8))
            .map(|_| (rng.gen_range(0..CONSTANTS), rng.gen_range(0..PREDICATES), rng.gen_range(0..CONSTANTS)))
            .collect();
        let rules = (0..rng.gen_range(0..=4))
            .map(|_| {
                let body: Vec<Atom> = (0..rng.gen_range(1..=2)).map(|_| random_atom(rng)).collect();
                let len = rng.gen_range(1..=2);
                let head = random_head(rng, &body, len);
                Rule { body, head }
            })
            .collect();
        let goal_body: Vec<Atom> = (0..rng.gen_range(1..=2)).map(|_| random_atom(rng)).collect();
        let goal_head = if rng.gen_bool(0.5) { goal_body.clone() } else { random_head(rng, &goal_body, 1) };
        Instance { facts, rules, goal_body, goal_head }
    }

    pub fn data_text(&self) -> String {
        self.facts_text() + &self.rules_text()[PREFIX.len()..]
    }

    pub fn facts_text(&self) -> String {
        let mut s = String::from(PREFIX);
        for (a, p, b) in &self.facts {
            s.push_str(&format!("ex:c{a} ex:p{p} ex:c{b}.\n"));
        }
        s
    }

    pub fn rules_text(&self) -> String {
        let mut s = String::from(PREFIX);
        for r in &self.rules {
            let body: Vec<String> = r.body.iter().map(atom_text).collect();
            let head: Vec<String> = r.head.iter().map(atom_text).collect();
            s.push_str(&format!("{{ {} }} => {{ {} }}.\n", body.join(" "), head.join(" ")));
        }
        s
    }

    pub fn goal_text(&self) -> String {
        let body: Vec<String> = self.goal_body.iter().map(atom_text).collect();
        let head: Vec<String> = self.goal_head.iter().map(atom_text).collect();
        format!("{PREFIX}{{ {} }} => {{ {} }}.\n", body.join(" "), head.join(" "))
    }

    /// Every assignment of the variables in `atoms` over the constants that
    /// puts all of them in `facts`.
    fn matches(atoms: &[Atom], facts: &BTreeSet<(usize, usize, usize)>) -> Vec<HashMap<usize, usize>> {
        let vars: Vec<usize> = vars_of(atoms).into_iter().collect();
        let mut out = Vec::new();
        let total = CONSTANTS.pow(vars.len() as u32);
        for code in 0..total {
            let mut env = HashMap::new();
            let mut c = code;
            for &v in &vars {
                env.insert(v, c % CONSTANTS);
                c /= CONSTANTS;
            }
            let val = |s: Slot| match s {
                Ok(k) => k,
                Err(v) => env[&v],
            };
            if atoms.iter().all(|a| facts.contains(&(val(a.s), a.p, val(a.o)))) {
                out.push(env);
            }
        }
        out
    }

    fn ground(atoms: &[Atom], env: &HashMap<usize, usize>) -> Vec<(usize, usize, usize)> {
        let val = |s: Slot| match s {
            Ok(k) => k,
            Err(v) => env[&v],
        };
        atoms.iter().map(|a| (val(a.s), a.p, val(a.o))).collect()
    }

    /// Naive forward closure to a fixpoint.
    pub fn closure(&self) -> BTreeSet<(usize, usize, usize)> {
        let mut facts: BTreeSet<_> = self.facts.iter().copied().collect();
        loop {
            let mut added = false;
            for r in &self.rules {
                for env in Self::matches(&r.body, &facts) {
                    for t in Self::ground(&r.head, &env) {
                        added |= facts.insert(t);
                    }
                }
            }
            if !added {
                return facts;
            }
        }
    }

    /// Goal consequent instances, each as a set of rendered triples.
    pub fn oracle_answers(&self) -> BTreeSet<BTreeSet<String>> {
        let closure = self.closure();
        Self::matches(&self.goal_body, &closure)
            .iter()
            .map(|env| {
                Self::ground(&self.goal_head, env)
                    .into_iter()
                    .map(|(a, p, b)| format!("c{a} p{p} c{b}"))
                    .collect()
            })
            .collect()
    }
}

/// Renders a ground formula the way [`Instance::oracle_answers`] does.
pub fn answer_of(f: &Formula) -> BTreeSet<String> {
    let local = |t: &Term| t.as_uri().map(|u| u.rsplit('#').next().unwrap().to_string()).unwrap_or_else(|| t.to_string());
    f.atoms().map(|t| format!("{} {} {}", local(&t.subject), local(&t.predicate), local(&t.object))).collect()
}

/// One changed field of a proof.
#[derive(Clone, Debug)]
pub struct Mutation {
    pub family: &'static str,
    pub step: String,
    pub proof: Proof,
}

fn mutant() -> Term {
    Term::uri("urn:mutant")
}

fn terms_of(proof: &Proof) -> Vec<Term> {
    let mut out = BTreeSet::new();
    for s in &proof.steps {
        if let Some(g) = &s.gives {
            for t in g.atoms() {
                out.extend([t.subject.clone(), t.object.clone()]);
            }
        }
        for b in &s.bindings {
            out.insert(b.value.clone());
        }
    }
    out.into_iter().filter(|t| !matches!(t, Term::Graph(_))).collect()
}

fn replace_in_triple(t: &Triple, position: usize, with: Term) -> Triple {
    let mut t = t.clone();
    match position {
        0 => t.subject = with,
        1 => t.predicate = with,
        _ => t.object = with,
    }
    t
}

/// Tries one random single-field mutation; `None` if the draw was a no-op.
pub fn mutate(proof: &Proof, source_iris: &[String], rng: &mut ChaCha8Rng) -> Option<Mutation> {
    let mut p = proof.clone();
    let family = *["binding", "gives", "evidence", "source"].choose(rng).unwrap();
    let candidates: Vec<usize> = (0..p.steps.len())
        .filter(|&i| {
            let s = &p.steps[i];
            match family {
                "binding" => !s.bindings.is_empty(),
                "gives" => s.gives.as_ref().is_some_and(|g| !g.is_empty()),
                "evidence" => s.evidence.len() >= 2,
                _ => s.kind == StepKind::Parsing,
            }
        })
        .collect();
    let &i = candidates.choose(rng)?;
    let step = &mut p.steps[i];
    match family {
        "binding" => {
            let k = rng.gen_range(0..step.bindings.len());
            match rng.gen_range(0..3) {
                0 => {
                    let pool = terms_of(proof);
                    let mut value = pool.choose(rng).cloned().unwrap_or_else(mutant);
                    if value == step.bindings[k].value {
                        value = mutant();
                    }
                    step.bindings[k].value = value;
                }
                1 => step.bindings[k].variable = rng.gen_range(0..step.bindings.len() + 2),
                _ => {
                    step.bindings.remove(k);
                }
            }
        }
        "gives" => {
            let g = step.gives.as_mut().unwrap();
            let mut statements: Vec<Statement> = g.statements().to_vec();
            let k = rng.gen_range(0..statements.len());
            match rng.gen_range(0..3) {
                0 => {
                    statements.remove(k);
                }
                1 => match &statements[k] {
                    Statement::Triple(t) => {
                        let pos = rng.gen_range(0..3);
                        statements[k] = Statement::Triple(replace_in_triple(t, pos, mutant()));
                    }
                    Statement::Implication { .. } => {
                        statements.push(Statement::Triple(Triple::new(mutant(), mutant(), mutant())));
                    }
                },
                _ => statements.push(Statement::Triple(Triple::new(mutant(), mutant(), mutant()))),
            }
            *g = Formula::from_statements(statements);
        }
        "evidence" => {
            let n = step.evidence.len();
            let a = rng.gen_range(0..n);
            let b = (a + rng.gen_range(1..n)) % n;
            step.evidence.swap(a, b);
        }
        _ => {
            let current = step.source.clone();
            let others: Vec<&String> = source_iris.iter().filter(|s| Some(*s) != current.as_ref()).collect();
            step.source = Some((*others.choose(rng)?).clone());
        }
    }
    let name = p.steps[i].name.clone();
    (p != *proof).then_some(Mutation { family, step: name, proof: p })
}

/// Reasoner proofs used as mutation targets, with their sources.
pub fn valid_proofs() -> Vec<(Proof, IndexMap<String, Formula>)> {
    let mut out = Vec::new();
    let (kb, descs, goal) = (samples::knowledge(), samples::descriptions(), samples::goal());
    out.push((prove(&kb, &descs, &goal, Budget::default()).unwrap(), sources_map(&kb, &descs, &goal)));
    for spec in [ChainSpec::new(3, 2), ChainSpec::new(2, 3)] {
        let l = generate_chain(spec).load().unwrap();
        let p = prove(&l.knowledge, &l.descriptions, &l.goal, Budget::default()).unwrap();
        out.push((p, sources_map(&l.knowledge, &l.descriptions, &l.goal)));
    }
    // a join over two distinct facts, so evidence order matters
    let kb = KnowledgeBase::new(vec![SourceDoc::parse(
        "join",
        "@prefix : <http://example.org/join#>.\n:a :p :b. :b :q :c.\n{ ?x :p ?y. ?y :q ?z. } => { ?x :r ?z. }.\n",
    )
    .unwrap()]);
    let goal = FilterRule::parse("join_goal", "@prefix : <http://example.org/join#>.\n{ ?x :r ?z. } => { ?x :r ?z. }.\n").unwrap();
    out.push((prove(&kb, &[], &goal, Budget::default()).unwrap(), sources_map(&kb, &[], &goal)));
    out
}
