//! Goal-directed search with iterative deepening.
//!
//! Goals are solved depth-first in continuation-passing style. Rule
//! applications are memoized per trigger (rule plus body values), so a rule
//! instance fires once and later uses see the same skolems. Derived facts are
//! kept across deepening rounds and are always tried before rules.

use std::collections::{HashMap, HashSet};
use std::rc::Rc;
use std::time::Instant;

use super::proof::{Binding, Proof, ProofStep, StepKind, StepRef};
use super::{Budget, FilterRule, ProveError, SourceDoc};
use crate::n3::{Formula, Statement, Term, Triple};

type Id = u32;
type Atom = [T; 3];

#[derive(Clone, Debug, PartialEq, Eq)]
enum T {
    C(Id),
    V(u32),
    L(Rc<[T]>),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Flow {
    Continue,
    Stop,
}

/// Where an answer came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Ev {
    Base { source: usize, statement: usize },
    Derived { trigger: usize, head: usize },
}

struct Fact {
    atom: [Id; 3],
    origin: Ev,
}

struct Rule {
    source: usize,
    statement: usize,
    body: Vec<Atom>,
    head: Vec<Atom>,
    nvars: u32,
    /// Variables occurring in the body, ascending.
    body_vars: Vec<u32>,
    /// Existentials occurring only in the head, ascending.
    head_existentials: Vec<u32>,
    free: bool,
}

struct Trigger {
    rule: usize,
    values: Vec<Id>,
    evidence: Vec<Ev>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum KeyPart {
    C(Id),
    V(u32),
    L(usize),
}

type Key = Vec<KeyPart>;

struct Anc {
    key: Key,
    next: Option<Rc<Anc>>,
}

fn anc_contains(mut a: &Option<Rc<Anc>>, key: &Key) -> bool {
    while let Some(node) = a {
        if &node.key == key {
            return true;
        }
        a = &node.next;
    }
    false
}

#[derive(Default)]
struct Interner {
    terms: Vec<Term>,
    ids: HashMap<Term, Id>,
}

impl Interner {
    fn intern(&mut self, t: &Term) -> Id {
        if let Some(&id) = self.ids.get(t) {
            return id;
        }
        let id = self.terms.len() as Id;
        self.terms.push(t.clone());
        self.ids.insert(t.clone(), id);
        id
    }
}

enum Cand {
    P(Id),
    PS(Id, Id),
    PO(Id, Id),
    All,
}

pub(super) struct Outcome {
    pub proof: Proof,
}

pub(super) struct Engine<'a> {
    sources: Vec<(&'a str, &'a Formula)>,
    filter: &'a FilterRule,
    filter_source: usize,
    terms: Interner,
    facts: Vec<Fact>,
    fact_ids: HashMap<[Id; 3], usize>,
    by_p: HashMap<Id, Vec<usize>>,
    by_ps: HashMap<(Id, Id), Vec<usize>>,
    by_po: HashMap<(Id, Id), Vec<usize>>,
    rules: Vec<Rule>,
    heads_by_p: HashMap<Id, Vec<(usize, usize)>>,
    heads_var_p: Vec<(usize, usize)>,
    triggers: Vec<Trigger>,
    trigger_ids: HashMap<(usize, Vec<Id>), usize>,
    bindings: Vec<Option<T>>,
    trail: Vec<u32>,
    next_skolem: usize,
    used_names: HashSet<String>,
    include_descriptions: bool,
    max_depth: usize,
    cutoff: bool,
    taint: u64,
    /// Goals known to fail with at most this many levels left to expand;
    /// `usize::MAX` when the failure did not depend on the depth bound.
    failed: HashMap<Key, usize>,
    /// Goal-relevant rules without and with descriptions.
    relevant: [Option<Rc<Vec<bool>>>; 2],
    budget: &'a Budget,
    started: Instant,
    inferences: usize,
    ticks: u64,
    exhausted: bool,
}

impl<'a> Engine<'a> {
    pub(super) fn new(
        free: &'a [SourceDoc],
        descriptions: &'a [SourceDoc],
        filter: &'a FilterRule,
        budget: &'a Budget,
    ) -> Result<Self, ProveError> {
        let mut sources: Vec<(&str, &Formula)> = Vec::new();
        for s in free.iter().chain(descriptions) {
            sources.push((&s.iri, &s.document.body));
        }
        let filter_source = sources.len();
        sources.push((&filter.source, &filter.document.body));

        let mut used_names = HashSet::new();
        for (_, f) in &sources {
            f.for_each_variable(&mut |v| {
                if let Term::Existential(n) = v {
                    used_names.insert(n.to_string());
                }
            });
        }

        let mut e = Engine {
            sources,
            filter,
            filter_source,
            terms: Interner::default(),
            facts: Vec::new(),
            fact_ids: HashMap::new(),
            by_p: HashMap::new(),
            by_ps: HashMap::new(),
            by_po: HashMap::new(),
            rules: Vec::new(),
            heads_by_p: HashMap::new(),
            heads_var_p: Vec::new(),
            triggers: Vec::new(),
            trigger_ids: HashMap::new(),
            bindings: Vec::new(),
            trail: Vec::new(),
            next_skolem: 0,
            used_names,
            include_descriptions: false,
            max_depth: 0,
            cutoff: false,
            taint: 0,
            failed: HashMap::new(),
            relevant: [None, None],
            budget,
            started: Instant::now(),
            inferences: 0,
            ticks: 0,
            exhausted: false,
        };
        for si in 0..filter_source {
            let (iri, formula) = e.sources[si];
            let free_source = si < free.len();
            for (k, st) in formula.statements().iter().enumerate() {
                match st {
                    Statement::Triple(t) => {
                        if !t.is_universal_free() {
                            return Err(ProveError::InvalidInput(format!(
                                "{iri}: fact {t} contains a universal variable"
                            )));
                        }
                        let atom = [e.terms.intern(&t.subject), e.terms.intern(&t.predicate), e.terms.intern(&t.object)];
                        e.add_fact(atom, Ev::Base { source: si, statement: k });
                    }
                    Statement::Implication { antecedent, consequent } => {
                        e.add_rule(si, k, antecedent, consequent, free_source, iri)?;
                    }
                }
            }
        }
        Ok(e)
    }

    // ---- setup -------------------------------------------------------------

    fn add_fact(&mut self, atom: [Id; 3], origin: Ev) -> bool {
        if self.fact_ids.contains_key(&atom) {
            return false;
        }
        let id = self.facts.len();
        self.facts.push(Fact { atom, origin });
        self.fact_ids.insert(atom, id);
        let [s, p, o] = atom;
        self.by_p.entry(p).or_default().push(id);
        self.by_ps.entry((p, s)).or_default().push(id);
        self.by_po.entry((p, o)).or_default().push(id);
        self.failed.clear();
        true
    }

    fn add_rule(
        &mut self,
        source: usize,
        statement: usize,
        antecedent: &Term,
        consequent: &Term,
        free: bool,
        iri: &str,
    ) -> Result<(), ProveError> {
        let (Term::Graph(ante), Term::Graph(cons)) = (antecedent, consequent) else {
            // rules with `false` on either side never contribute facts
            return Ok(());
        };
        let rule_formula = Formula::from_statements(vec![Statement::Implication {
            antecedent: antecedent.clone(),
            consequent: consequent.clone(),
        }]);
        if !rule_formula.is_simple() || ante.implications().next().is_some() || cons.implications().next().is_some() {
            return Err(ProveError::InvalidInput(format!("{iri}: rule is not simple")));
        }
        let vars = rule_formula.variables();
        let index: HashMap<&Term, u32> = vars.iter().enumerate().map(|(i, v)| (v, i as u32)).collect();
        let body: Vec<Atom> = ante.atoms().map(|t| self.convert(t, &index)).collect();
        let head: Vec<Atom> = cons.atoms().map(|t| self.convert(t, &index)).collect();
        let body_set: HashSet<&Term> = Formula::from_statements(ante.statements().to_vec())
            .variables()
            .into_iter()
            .filter_map(|v| vars.iter().find(|x| **x == v))
            .collect();
        let mut body_vars = Vec::new();
        let mut head_existentials = Vec::new();
        for (i, v) in vars.iter().enumerate() {
            if body_set.contains(v) {
                body_vars.push(i as u32);
            } else if v.is_existential() {
                head_existentials.push(i as u32);
            } else {
                return Err(ProveError::InvalidInput(format!(
                    "{iri}: universal {v} occurs in the consequent but not in the antecedent"
                )));
            }
        }
        let id = self.rules.len();
        for (h, atom) in head.iter().enumerate() {
            match &atom[1] {
                T::C(p) => self.heads_by_p.entry(*p).or_default().push((id, h)),
                _ => self.heads_var_p.push((id, h)),
            }
        }
        self.rules.push(Rule {
            source,
            statement,
            body,
            head,
            nvars: vars.len() as u32,
            body_vars,
            head_existentials,
            free,
        });
        Ok(())
    }

    fn convert(&mut self, t: &Triple, index: &HashMap<&Term, u32>) -> Atom {
        [self.convert_term(&t.subject, index), self.convert_term(&t.predicate, index), self.convert_term(&t.object, index)]
    }

    fn convert_term(&mut self, t: &Term, index: &HashMap<&Term, u32>) -> T {
        match t {
            Term::Existential(_) | Term::Universal(_) => T::V(index[t]),
            Term::List(items) if !items.iter().all(Term::is_ground) => {
                T::L(items.iter().map(|x| self.convert_term(x, index)).collect())
            }
            other => T::C(self.terms.intern(other)),
        }
    }

    // ---- bindings ----------------------------------------------------------

    fn alloc(&mut self, n: u32) -> u32 {
        let base = self.bindings.len() as u32;
        self.bindings.resize(self.bindings.len() + n as usize, None);
        base
    }

    fn mark(&self) -> (usize, usize) {
        (self.trail.len(), self.bindings.len())
    }

    fn undo(&mut self, (trail, vars): (usize, usize)) {
        while self.trail.len() > trail {
            let v = self.trail.pop().unwrap();
            self.bindings[v as usize] = None;
        }
        self.bindings.truncate(vars);
    }

    fn walk(&self, t: &T) -> T {
        let mut cur = t.clone();
        while let T::V(v) = cur {
            match &self.bindings[v as usize] {
                Some(next) => cur = next.clone(),
                None => return T::V(v),
            }
        }
        cur
    }

    fn bind(&mut self, v: u32, t: T) {
        self.bindings[v as usize] = Some(t);
        self.trail.push(v);
    }

    fn unify(&mut self, a: &T, b: &T) -> bool {
        let (a, b) = (self.walk(a), self.walk(b));
        match (&a, &b) {
            (T::V(x), T::V(y)) if x == y => true,
            (T::V(x), _) => {
                self.bind(*x, b);
                true
            }
            (_, T::V(y)) => {
                self.bind(*y, a);
                true
            }
            (T::C(x), T::C(y)) => x == y,
            (T::L(xs), T::L(ys)) => xs.len() == ys.len() && xs.iter().zip(ys.iter()).all(|(x, y)| self.unify(x, y)),
            (T::L(xs), T::C(c)) | (T::C(c), T::L(xs)) => {
                let Term::List(items) = self.terms.terms[*c as usize].clone() else { return false };
                if items.len() != xs.len() {
                    return false;
                }
                for (x, item) in xs.iter().zip(&items) {
                    let id = self.terms.intern(item);
                    if !self.unify(x, &T::C(id)) {
                        return false;
                    }
                }
                true
            }
        }
    }

    fn unify_atom(&mut self, a: &Atom, b: &Atom) -> bool {
        (0..3).all(|i| self.unify(&a[i], &b[i]))
    }

    fn to_const(&mut self, t: &T) -> Option<Id> {
        match self.walk(t) {
            T::C(c) => Some(c),
            T::V(_) => None,
            T::L(items) => {
                let mut terms = Vec::with_capacity(items.len());
                for i in items.iter() {
                    let c = self.to_const(i)?;
                    terms.push(self.terms.terms[c as usize].clone());
                }
                Some(self.terms.intern(&Term::List(terms)))
            }
        }
    }

    fn ground_atom(&mut self, a: &Atom) -> Option<[Id; 3]> {
        Some([self.to_const(&a[0])?, self.to_const(&a[1])?, self.to_const(&a[2])?])
    }

    fn key(&self, a: &Atom) -> Key {
        fn go(e: &Engine, t: &T, vars: &mut Vec<u32>, out: &mut Key) {
            match e.walk(t) {
                T::C(c) => out.push(KeyPart::C(c)),
                T::V(v) => {
                    let pos = vars.iter().position(|&x| x == v).unwrap_or_else(|| {
                        vars.push(v);
                        vars.len() - 1
                    });
                    out.push(KeyPart::V(pos as u32));
                }
                T::L(items) => {
                    out.push(KeyPart::L(items.len()));
                    for i in items.iter() {
                        go(e, i, vars, out);
                    }
                }
            }
        }
        let mut vars = Vec::new();
        let mut out = Vec::new();
        for t in a {
            go(self, t, &mut vars, &mut out);
        }
        out
    }

    fn rename(atom: &Atom, base: u32) -> Atom {
        fn r(t: &T, base: u32) -> T {
            match t {
                T::C(c) => T::C(*c),
                T::V(v) => T::V(v + base),
                T::L(items) => T::L(items.iter().map(|x| r(x, base)).collect()),
            }
        }
        [r(&atom[0], base), r(&atom[1], base), r(&atom[2], base)]
    }

    // ---- budget ------------------------------------------------------------

    fn over_budget(&mut self) -> bool {
        if self.exhausted {
            return true;
        }
        self.ticks += 1;
        if self.inferences > self.budget.max_inferences
            || (self.ticks % 256 == 0 && self.started.elapsed() > self.budget.max_time)
        {
            self.exhausted = true;
        }
        self.exhausted
    }

    fn budget_error(&self) -> ProveError {
        ProveError::BudgetExceeded { inferences: self.inferences, elapsed: self.started.elapsed() }
    }

    // ---- search ------------------------------------------------------------

    fn candidates(&self, goal: &Atom) -> Cand {
        let s = self.walk(&goal[0]);
        let p = self.walk(&goal[1]);
        let o = self.walk(&goal[2]);
        let T::C(p) = p else { return Cand::All };
        let len = |c: &Cand| self.cand_len(c);
        let mut best = Cand::P(p);
        if let T::C(s) = s {
            let c = Cand::PS(p, s);
            if len(&c) < len(&best) {
                best = c;
            }
        }
        if let T::C(o) = o {
            let c = Cand::PO(p, o);
            if len(&c) < len(&best) {
                best = c;
            }
        }
        best
    }

    fn cand_len(&self, c: &Cand) -> usize {
        match c {
            Cand::P(p) => self.by_p.get(p).map_or(0, Vec::len),
            Cand::PS(p, s) => self.by_ps.get(&(*p, *s)).map_or(0, Vec::len),
            Cand::PO(p, o) => self.by_po.get(&(*p, *o)).map_or(0, Vec::len),
            Cand::All => self.facts.len(),
        }
    }

    fn cand_get(&self, c: &Cand, i: usize) -> usize {
        match c {
            Cand::P(p) => self.by_p[p][i],
            Cand::PS(p, s) => self.by_ps[&(*p, *s)][i],
            Cand::PO(p, o) => self.by_po[&(*p, *o)][i],
            Cand::All => i,
        }
    }

    fn rule_candidates(&self, goal: &Atom) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = match self.walk(&goal[1]) {
            T::C(p) => {
                let mut v = self.heads_by_p.get(&p).cloned().unwrap_or_default();
                v.extend(&self.heads_var_p);
                v
            }
            _ => (0..self.rules.len()).flat_map(|r| (0..self.rules[r].head.len()).map(move |h| (r, h))).collect(),
        };
        out.retain(|&(r, _)| self.include_descriptions || self.rules[r].free);
        out.sort_unstable();
        out
    }

    fn solve_conj(
        &mut self,
        atoms: &[Atom],
        depth: usize,
        anc: &Option<Rc<Anc>>,
        evidence: &mut Vec<Ev>,
        k: &mut dyn FnMut(&mut Self, &[Ev]) -> Flow,
    ) -> Flow {
        let Some((first, rest)) = atoms.split_first() else {
            return k(self, evidence);
        };
        self.solve_atom(first, depth, anc, &mut |s, ev| {
            evidence.push(ev);
            let flow = s.solve_conj(rest, depth, anc, evidence, k);
            evidence.pop();
            flow
        })
    }

    fn solve_atom(
        &mut self,
        goal: &Atom,
        depth: usize,
        anc: &Option<Rc<Anc>>,
        k: &mut dyn FnMut(&mut Self, Ev) -> Flow,
    ) -> Flow {
        if self.over_budget() {
            return Flow::Stop;
        }
        let key = self.key(goal);
        let remaining = self.max_depth.saturating_sub(depth);
        if self.failed.get(&key).is_some_and(|&r| r >= remaining) {
            return Flow::Continue;
        }
        let taint_before = self.taint;
        let mut found = false;
        let mut answers: HashSet<[Id; 3]> = HashSet::new();

        let cand = self.candidates(goal);
        let mut i = 0;
        while i < self.cand_len(&cand) {
            let fid = self.cand_get(&cand, i);
            i += 1;
            let atom = self.facts[fid].atom;
            let mark = self.mark();
            if self.unify_atom(goal, &[T::C(atom[0]), T::C(atom[1]), T::C(atom[2])]) && answers.insert(atom) {
                found = true;
                let ev = self.facts[fid].origin;
                if k(self, ev) == Flow::Stop {
                    self.undo(mark);
                    return Flow::Stop;
                }
            }
            self.undo(mark);
        }

        let rules = self.rule_candidates(goal);
        if !rules.is_empty() {
            if depth >= self.max_depth {
                self.cutoff = true;
                self.taint += 1;
            } else if anc_contains(anc, &key) {
                self.taint += 1;
            } else {
                let anc2 = Some(Rc::new(Anc { key: key.clone(), next: anc.clone() }));
                for (r, h) in rules {
                    let mark = self.mark();
                    let base = self.alloc(self.rules[r].nvars);
                    let head = Self::rename(&self.rules[r].head[h], base);
                    let mut flow = Flow::Continue;
                    if self.unify_atom(goal, &head) {
                        let body: Vec<Atom> = self.rules[r].body.iter().map(|a| Self::rename(a, base)).collect();
                        let existentials = self.rules[r].head_existentials.clone();
                        let mut evidence = Vec::with_capacity(body.len());
                        flow = self.solve_conj(&body, depth + 1, &anc2, &mut evidence, &mut |s, evs| {
                            let Some(t) = s.fire(r, base, evs) else { return Flow::Stop };
                            let m = s.mark();
                            for &e in &existentials {
                                let value = T::C(s.triggers[t].values[e as usize]);
                                if !s.unify(&T::V(base + e), &value) {
                                    s.undo(m);
                                    return Flow::Continue;
                                }
                            }
                            let flow = match s.ground_atom(goal) {
                                Some(ans) if !answers.insert(ans) => Flow::Continue,
                                _ => {
                                    found = true;
                                    k(s, Ev::Derived { trigger: t, head: h })
                                }
                            };
                            s.undo(m);
                            flow
                        });
                    }
                    self.undo(mark);
                    if flow == Flow::Stop {
                        return Flow::Stop;
                    }
                }
            }
        }
        if !found {
            let r = if self.taint == taint_before { usize::MAX } else { remaining };
            let e = self.failed.entry(key).or_insert(r);
            *e = (*e).max(r);
        }
        Flow::Continue
    }

    /// Applies rule `r` whose body variables sit at `base`; returns the
    /// trigger, reusing an earlier application with the same body values.
    fn fire(&mut self, r: usize, base: u32, evidence: &[Ev]) -> Option<usize> {
        let mut key_values = Vec::with_capacity(self.rules[r].body_vars.len());
        for i in 0..self.rules[r].body_vars.len() {
            let v = self.rules[r].body_vars[i];
            key_values.push(self.to_const(&T::V(base + v))?);
        }
        if let Some(&t) = self.trigger_ids.get(&(r, key_values.clone())) {
            return Some(t);
        }
        self.inferences += 1;
        if self.over_budget() {
            return None;
        }
        let nvars = self.rules[r].nvars as usize;
        let mut values = vec![Id::MAX; nvars];
        for (i, &v) in self.rules[r].body_vars.iter().enumerate() {
            values[v as usize] = key_values[i];
        }
        for i in 0..self.rules[r].head_existentials.len() {
            let e = self.rules[r].head_existentials[i];
            let name = self.fresh_skolem();
            values[e as usize] = self.terms.intern(&Term::existential(name));
        }
        let t = self.triggers.len();
        self.triggers.push(Trigger { rule: r, values: values.clone(), evidence: evidence.to_vec() });
        self.trigger_ids.insert((r, key_values), t);
        let vars_base = self.alloc(nvars as u32);
        let mark_vars = vars_base as usize;
        for h in 0..self.rules[r].head.len() {
            let atom = Self::rename(&self.rules[r].head[h], vars_base);
            let m = self.mark();
            for (v, &val) in values.iter().enumerate() {
                self.bind(vars_base + v as u32, T::C(val));
            }
            let ground = self.ground_atom(&atom);
            self.undo((m.0, m.1));
            if let Some(g) = ground {
                self.add_fact(g, Ev::Derived { trigger: t, head: h });
            }
        }
        self.bindings.truncate(mark_vars);
        Some(t)
    }

    fn fresh_skolem(&mut self) -> String {
        loop {
            let name = format!("sk{}", self.next_skolem);
            self.next_skolem += 1;
            if !self.used_names.contains(&name) {
                return name;
            }
        }
    }

    /// Active rules whose heads can feed the goal, directly or through other
    /// relevant rules. Cached per phase.
    fn relevant_rules(&mut self) -> Rc<Vec<bool>> {
        let phase = usize::from(self.include_descriptions);
        if let Some(r) = &self.relevant[phase] {
            return Rc::clone(r);
        }
        let mut relevant = vec![false; self.rules.len()];
        let mut seen: HashSet<Id> = HashSet::new();
        let mut queue: Vec<Id> = Vec::new();
        let mut all = false;
        let mut pending: Vec<usize> = self.heads_var_p.iter().map(|&(r, _)| r).collect();
        for a in &self.filter_body() {
            match &a[1] {
                T::C(p) if seen.insert(*p) => queue.push(*p),
                T::C(_) => {}
                _ => all = true,
            }
        }
        loop {
            while let Some(r) = pending.pop() {
                if relevant[r] || !(self.include_descriptions || self.rules[r].free) {
                    continue;
                }
                relevant[r] = true;
                for a in &self.rules[r].body {
                    match &a[1] {
                        T::C(p) if seen.insert(*p) => queue.push(*p),
                        T::C(_) => {}
                        _ => all = true,
                    }
                }
            }
            match queue.pop() {
                Some(p) if !all => pending.extend(self.heads_by_p.get(&p).into_iter().flatten().map(|&(r, _)| r)),
                _ => break,
            }
        }
        if all {
            for (r, slot) in relevant.iter_mut().enumerate() {
                *slot = self.include_descriptions || self.rules[r].free;
            }
        }
        let relevant = Rc::new(relevant);
        self.relevant[phase] = Some(Rc::clone(&relevant));
        relevant
    }

    /// Forward closure over the rules that can contribute to the goal.
    /// Returns the number of new facts.
    fn saturate(&mut self) -> Result<usize, ProveError> {
        let before = self.facts.len();
        let relevant = self.relevant_rules();
        let active: Vec<usize> = (0..self.rules.len()).filter(|&r| relevant[r]).collect();
        let saved_depth = self.max_depth;
        self.max_depth = 0;
        loop {
            let round_start = self.facts.len();
            for &r in &active {
                let mark = self.mark();
                let base = self.alloc(self.rules[r].nvars);
                let body: Vec<Atom> = self.rules[r].body.iter().map(|a| Self::rename(a, base)).collect();
                let mut evidence = Vec::new();
                let flow = self.solve_conj(&body, 0, &None, &mut evidence, &mut |s, evs| match s.fire(r, base, evs) {
                    Some(_) => Flow::Continue,
                    None => Flow::Stop,
                });
                self.undo(mark);
                if flow == Flow::Stop || self.exhausted {
                    self.max_depth = saved_depth;
                    return Err(self.budget_error());
                }
            }
            if self.facts.len() == round_start {
                break;
            }
        }
        self.max_depth = saved_depth;
        Ok(self.facts.len() - before)
    }

    fn relevant_existential_free(&mut self) -> bool {
        let relevant = self.relevant_rules();
        (0..self.rules.len()).all(|r| !relevant[r] || self.rules[r].head_existentials.is_empty())
    }

    fn filter_body(&mut self) -> Vec<Atom> {
        let f = self.filter;
        let rule = f.implication();
        let vars = rule.variables();
        let index: HashMap<&Term, u32> = vars.iter().enumerate().map(|(i, v)| (v, i as u32)).collect();
        f.antecedent.atoms().map(|t| self.convert(t, &index)).collect()
    }

    /// Runs deepening rounds until `on_solution` stops the search or the
    /// rule set is exhausted. Returns whether a solution stopped it.
    fn search(&mut self, on_solution: &mut dyn FnMut(&mut Self, &[Ev], u32) -> Flow) -> Result<bool, ProveError> {
        let nvars = self.filter.implication().variables().len() as u32;
        let body_template = self.filter_body();
        self.max_depth = 0;
        loop {
            self.cutoff = false;
            self.failed.clear();
            let facts_before = self.facts.len();
            let mark = self.mark();
            let base = self.alloc(nvars);
            let body: Vec<Atom> = body_template.iter().map(|a| Self::rename(a, base)).collect();
            let mut evidence = Vec::new();
            let flow = self.solve_conj(&body, 0, &None, &mut evidence, &mut |s, evs| on_solution(s, evs, base));
            self.undo(mark);
            if self.exhausted {
                return Err(self.budget_error());
            }
            if flow == Flow::Stop {
                return Ok(true);
            }
            // Without head existentials the closure is finite, so a barren
            // round need not be followed by a deeper one.
            let barren = self.facts.len() == facts_before;
            if barren && (!self.cutoff || self.relevant_existential_free()) && self.saturate()? == 0 {
                return Ok(false);
            }
            self.max_depth += 1;
        }
    }

    /// First proof found, trying data and background rules before descriptions.
    pub(super) fn prove(mut self) -> Result<Outcome, ProveError> {
        for phase in [false, true] {
            self.include_descriptions = phase;
            let mut solution: Option<(Vec<Ev>, Vec<Id>)> = None;
            let nvars = self.filter.implication().variables().len();
            let found = self.search(&mut |s, evs, base| {
                let mut values = Vec::with_capacity(nvars);
                for v in 0..nvars as u32 {
                    match s.to_const(&T::V(base + v)) {
                        Some(c) => values.push(c),
                        None => return Flow::Continue,
                    }
                }
                solution = Some((evs.to_vec(), values));
                Flow::Stop
            })?;
            if found {
                let (evs, values) = solution.expect("solution recorded");
                return Ok(Outcome { proof: self.build_proof(&evs, &values) });
            }
            if !self.rules.iter().any(|r| !r.free) {
                break;
            }
        }
        Err(ProveError::Unprovable)
    }

    /// Every instance of the filter consequent that can be derived.
    pub(super) fn prove_all(mut self) -> Result<Vec<Formula>, ProveError> {
        self.include_descriptions = true;
        let mut out: Vec<Formula> = Vec::new();
        let mut seen: HashSet<Vec<Id>> = HashSet::new();
        let nvars = self.filter.implication().variables().len();
        self.search(&mut |s, _, base| {
            let mut values = Vec::with_capacity(nvars);
            for v in 0..nvars as u32 {
                match s.to_const(&T::V(base + v)) {
                    Some(c) => values.push(c),
                    None => return Flow::Continue,
                }
            }
            if seen.insert(values.clone()) {
                let sub = s.substitution(&s.filter.implication().variables(), &values);
                out.push(s.filter.consequent.apply(&sub, crate::n3::ApplyMode::Total));
            }
            Flow::Continue
        })?;
        out.sort();
        Ok(out)
    }

    fn substitution(&self, vars: &[Term], values: &[Id]) -> crate::n3::Substitution {
        let mut sub = crate::n3::Substitution::new();
        for (v, &c) in vars.iter().zip(values) {
            let value = self.terms.terms[c as usize].clone();
            if &value != v {
                sub.insert(v.clone(), value).expect("distinct variables");
            }
        }
        sub
    }

    // ---- proof assembly ----------------------------------------------------

    fn build_proof(&self, filter_evidence: &[Ev], filter_values: &[Id]) -> Proof {
        let mut b = Builder { engine: self, steps: Vec::new(), extractions: HashMap::new(), rule_steps: HashMap::new(), inferences: HashMap::new() };

        let filter_vars = self.filter.implication().variables();
        let sub = self.substitution(&filter_vars, filter_values);
        let conclusion = self.filter.consequent.apply(&sub, crate::n3::ApplyMode::Total);

        let root = b.push(ProofStep { gives: Some(conclusion.clone()), ..ProofStep::new("proof", StepKind::Proof) });
        let rule_step = b.rule_extraction(self.filter_source, self.filter.statement);
        let evidence: Vec<StepRef> = filter_evidence.iter().map(|e| b.evidence(*e)).collect();
        let bindings = filter_values
            .iter()
            .enumerate()
            .map(|(i, &c)| Binding { variable: i, value: self.terms.terms[c as usize].clone() })
            .collect();
        let filter_step = b.push(ProofStep {
            gives: Some(conclusion),
            rule: Some(rule_step),
            evidence,
            bindings,
            ..ProofStep::new("", StepKind::Inference)
        });
        b.steps[root].components.push(filter_step);
        let steps = b.steps;
        renumber(Proof { steps, root, skolem_counter: self.next_skolem })
    }
}

struct Builder<'e, 'a> {
    engine: &'e Engine<'a>,
    steps: Vec<ProofStep>,
    extractions: HashMap<Ev, StepRef>,
    rule_steps: HashMap<(usize, usize), StepRef>,
    inferences: HashMap<usize, StepRef>,
}

impl Builder<'_, '_> {
    fn push(&mut self, step: ProofStep) -> StepRef {
        self.steps.push(step);
        self.steps.len() - 1
    }

    fn parsing(&mut self, source: usize) -> StepRef {
        let (iri, formula) = self.engine.sources[source];
        self.push(ProofStep {
            source: Some(iri.to_string()),
            gives: Some(formula.clone()),
            ..ProofStep::new("", StepKind::Parsing)
        })
    }

    fn rule_extraction(&mut self, source: usize, statement: usize) -> StepRef {
        if let Some(&s) = self.rule_steps.get(&(source, statement)) {
            return s;
        }
        let parsing = self.parsing(source);
        let stmt = self.engine.sources[source].1.statements()[statement].clone();
        let s = self.push(ProofStep {
            gives: Some(Formula::from_statements(vec![stmt])),
            because: Some(parsing),
            ..ProofStep::new("", StepKind::Extraction)
        });
        self.rule_steps.insert((source, statement), s);
        s
    }

    fn evidence(&mut self, ev: Ev) -> StepRef {
        if let Some(&s) = self.extractions.get(&ev) {
            return s;
        }
        let s = match ev {
            Ev::Base { source, statement } => {
                let parsing = self.parsing(source);
                let stmt = self.engine.sources[source].1.statements()[statement].clone();
                self.push(ProofStep {
                    gives: Some(Formula::from_statements(vec![stmt])),
                    because: Some(parsing),
                    ..ProofStep::new("", StepKind::Extraction)
                })
            }
            Ev::Derived { trigger, head } => {
                let inference = self.inference(trigger);
                let atom = self.steps[inference].gives.as_ref().expect("inference gives").statements()[head].clone();
                self.push(ProofStep {
                    gives: Some(Formula::from_statements(vec![atom])),
                    because: Some(inference),
                    ..ProofStep::new("", StepKind::Extraction)
                })
            }
        };
        self.extractions.insert(ev, s);
        s
    }

    fn inference(&mut self, t: usize) -> StepRef {
        if let Some(&s) = self.inferences.get(&t) {
            return s;
        }
        let e = self.engine;
        let trig = &e.triggers[t];
        let rule = &e.rules[trig.rule];
        let rule_step = self.rule_extraction(rule.source, rule.statement);
        let evidence: Vec<StepRef> = trig.evidence.iter().map(|ev| self.evidence(*ev)).collect();
        let Statement::Implication { antecedent, consequent: Term::Graph(cons) } =
            &e.sources[rule.source].1.statements()[rule.statement]
        else {
            unreachable!("rules are implications with formula consequents")
        };
        let vars = Formula::from_statements(vec![Statement::Implication {
            antecedent: antecedent.clone(),
            consequent: Term::Graph(cons.clone()),
        }])
        .variables();
        let sub = e.substitution(&vars, &trig.values);
        let gives = cons.apply(&sub, crate::n3::ApplyMode::Total);
        let bindings = trig
            .values
            .iter()
            .enumerate()
            .map(|(i, &c)| Binding { variable: i, value: e.terms.terms[c as usize].clone() })
            .collect();
        let s = self.push(ProofStep {
            gives: Some(gives),
            rule: Some(rule_step),
            evidence,
            bindings,
            ..ProofStep::new("", StepKind::Inference)
        });
        self.inferences.insert(t, s);
        s
    }
}

/// Orders steps as root, inferences, then the rest (each group breadth-first
/// from the root) and names them `proof`, `lemma1`, `lemma2`, ...
fn renumber(proof: Proof) -> Proof {
    let n = proof.steps.len();
    let mut seen = vec![false; n];
    let mut bfs = Vec::with_capacity(n);
    let mut queue = std::collections::VecDeque::from([proof.root]);
    seen[proof.root] = true;
    while let Some(i) = queue.pop_front() {
        bfs.push(i);
        let s = &proof.steps[i];
        for r in s.components.iter().chain(&s.evidence).copied().chain(s.rule).chain(s.because) {
            if !seen[r] {
                seen[r] = true;
                queue.push_back(r);
            }
        }
    }
    let kind = |i: usize| proof.steps[i].kind;
    let mut order = vec![proof.root];
    order.extend(bfs.iter().copied().filter(|&i| kind(i) == StepKind::Inference));
    order.extend(bfs.iter().copied().filter(|&i| i != proof.root && kind(i) != StepKind::Inference && kind(i) != StepKind::Parsing));
    order.extend(bfs.iter().copied().filter(|&i| kind(i) == StepKind::Parsing));
    let mut new_index = vec![usize::MAX; n];
    for (k, &old) in order.iter().enumerate() {
        new_index[old] = k;
    }
    let mut steps: Vec<ProofStep> = order.iter().map(|&old| proof.steps[old].clone()).collect();
    for s in &mut steps {
        for r in s.components.iter_mut().chain(s.evidence.iter_mut()).chain(s.rule.iter_mut()).chain(s.because.iter_mut()) {
            *r = new_index[*r];
        }
    }
    let mut lemma = 0;
    for i in 0..steps.len() {
        if i == 0 {
            steps[i].name = "proof".into();
        } else if steps[i].kind != StepKind::Parsing {
            lemma += 1;
            steps[i].name = format!("lemma{lemma}");
        }
    }
    // parsing steps are named after the extraction that reads them
    for i in 0..steps.len() {
        if let Some(b) = steps[i].because {
            if steps[b].kind == StepKind::Parsing {
                steps[b].name = format!("{}.because", steps[i].name);
            }
        }
    }
    Proof { steps, root: 0, skolem_counter: proof.skolem_counter }
}
