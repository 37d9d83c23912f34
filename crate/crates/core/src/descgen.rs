//! Draft descriptions from recorded HTTP interactions.
//!
//! Responses are clustered by string similarity, each cluster is aligned
//! triple by triple, and values that differ between members become
//! variables. Request URIs seen in earlier responses pull the pattern that
//! mentioned them into the antecedent.

use std::fmt;

use indexmap::IndexMap;

use crate::agent::WireResponse;
use crate::n3::{parse_document, serialize, term_to_string, Document, Formula, Statement, Term, Triple};
use crate::restdesc::{http, WireBody, WireRequest, HTTP_NS};

/// Namespace of terms the generator invents, such as `:localFile`.
pub const DESCGEN_NS: &str = "http://example.org/descgen#";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    pub request: WireRequest,
    pub response: WireResponse,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid N3 trace: {0}")]
    N3(String),
    #[error("trace is empty")]
    Empty,
}

/// Reads either trace format; text traces start with `HTTP request`.
pub fn parse_trace(text: &str) -> Result<Vec<TraceEntry>, TraceError> {
    let entries = if text.trim_start().starts_with("HTTP request") { parse_text_trace(text)? } else { parse_n3_trace(text)? };
    if entries.is_empty() {
        return Err(TraceError::Empty);
    }
    Ok(entries)
}

/// `HTTP request N: METHOD to PATH [with X as body]` / `HTTP response N:`
/// headers, each response followed by its body.
pub fn parse_text_trace(text: &str) -> Result<Vec<TraceEntry>, TraceError> {
    let mut entries: Vec<TraceEntry> = Vec::new();
    let mut body: Option<String> = None;
    let flush = |entries: &mut Vec<TraceEntry>, body: &mut Option<String>| {
        if let (Some(b), Some(last)) = (body.take(), entries.last_mut()) {
            last.response.body = b.trim().to_string();
        }
    };
    for (i, line) in text.lines().enumerate() {
        let err = |message: &str| TraceError::Syntax { line: i + 1, message: message.into() };
        if let Some(rest) = line.strip_prefix("HTTP request") {
            flush(&mut entries, &mut body);
            let (_, rest) = rest.split_once(':').ok_or_else(|| err("missing ':' after request number"))?;
            let (method, rest) = rest.trim().split_once(" to ").ok_or_else(|| err("expected 'METHOD to PATH'"))?;
            let (target, payload) = match rest.split_once(" with ") {
                Some((t, p)) => (t, Some(p.strip_suffix(" as body").ok_or_else(|| err("expected 'with X as body'"))?)),
                None => (rest, None),
            };
            let mut req = WireRequest::new(method.trim(), target.trim());
            req.body = payload.map(|p| WireBody::Entity(p.trim().to_string()));
            entries.push(TraceEntry { request: req, response: WireResponse::n3(200, "") });
        } else if line.starts_with("HTTP response") {
            if entries.is_empty() {
                return Err(err("response before any request"));
            }
            flush(&mut entries, &mut body);
            body = Some(String::new());
        } else if let Some(b) = body.as_mut() {
            b.push_str(line);
            b.push('\n');
        } else if !line.trim().is_empty() {
            return Err(err("text outside a response"));
        }
    }
    flush(&mut entries, &mut body);
    Ok(entries)
}

/// One resource per request: `http:methodName`, `http:requestURI`,
/// optional `http:body`, and `http:resp [ http:body { ... } ]`.
pub fn parse_n3_trace(text: &str) -> Result<Vec<TraceEntry>, TraceError> {
    let doc = parse_document(text, None).map_err(|e| TraceError::N3(e.to_string()))?;
    let atoms: Vec<&Triple> = doc.body.atoms().collect();
    let value = |s: &Term, p: &Term| atoms.iter().find(|t| &t.subject == s && &t.predicate == p).map(|t| t.object.clone());
    let lexical = |t: &Term| match t {
        Term::Literal(l) => l.lexical.to_string(),
        Term::Uri(u) => u.to_string(),
        other => other.to_string(),
    };
    let mut entries = Vec::new();
    for t in atoms.iter().filter(|t| t.predicate == http("methodName")) {
        let target = value(&t.subject, &http("requestURI")).ok_or_else(|| TraceError::N3("request without http:requestURI".into()))?;
        let mut req = WireRequest::new(lexical(&t.object), lexical(&target));
        req.body = value(&t.subject, &http("body")).map(|b| match b {
            Term::Uri(u) => WireBody::Entity(u.to_string()),
            other => WireBody::Inline(lexical(&other)),
        });
        let body = value(&t.subject, &http("resp"))
            .and_then(|r| value(&r, &http("body")))
            .map(|b| match b {
                Term::Graph(g) => serialize(&Document { prefixes: doc.prefixes.clone(), base: None, body: g }),
                other => lexical(&other),
            })
            .unwrap_or_default();
        entries.push(TraceEntry { request: req, response: WireResponse::n3(200, body) });
    }
    Ok(entries)
}

/// The trace in the text format.
pub fn write_text_trace(entries: &[TraceEntry]) -> String {
    let mut s = String::new();
    for (i, e) in entries.iter().enumerate() {
        let n = i + 1;
        s.push_str(&format!("HTTP request {n}: {} to {}", e.request.method, e.request.target));
        match &e.request.body {
            Some(WireBody::Entity(x)) | Some(WireBody::Inline(x)) => s.push_str(&format!(" with {x} as body\n")),
            None => s.push('\n'),
        }
        s.push_str(&format!("HTTP response {n}:\n{}\n\n\n", e.response.body.trim_end()));
    }
    s
}

fn response_triples(entry: &TraceEntry) -> Vec<Triple> {
    parse_document(&entry.response.body, None).map(|d| d.body.atoms().cloned().collect()).unwrap_or_default()
}

/// Sorted triples with full IRIs; falls back to the raw body if it does not parse.
pub fn canonical_body(entry: &TraceEntry) -> String {
    match parse_document(&entry.response.body, None) {
        Ok(doc) => {
            let none = IndexMap::new();
            let mut lines: Vec<String> = doc.body.statements().iter().map(|s| crate::n3::statement_to_string(s, &none)).collect();
            lines.sort();
            lines.join("\n")
        }
        Err(_) => entry.response.body.trim().to_string(),
    }
}

pub fn similarity(a: &TraceEntry, b: &TraceEntry) -> f64 {
    strsim::normalized_levenshtein(&canonical_body(a), &canonical_body(b))
}

pub const DEFAULT_THRESHOLD: f64 = 0.6;

#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    /// Trace indices, ascending.
    pub members: Vec<usize>,
    pub method: String,
    /// The request URI, with the part that varies replaced by `{}`.
    pub uri_template: String,
    /// Predicates present in every member's response.
    pub common_predicates: Vec<Term>,
}

/// Single-linkage clustering; entries with different methods never join.
pub fn cluster_responses(trace: &[TraceEntry], threshold: f64) -> Vec<Cluster> {
    let n = trace.len();
    let canon: Vec<String> = trace.iter().map(canonical_body).collect();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if !trace[i].request.method.eq_ignore_ascii_case(&trace[j].request.method) {
                continue;
            }
            if strsim::normalized_levenshtein(&canon[i], &canon[j]) >= threshold {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: IndexMap<usize, Vec<usize>> = IndexMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    groups
        .into_values()
        .map(|members| {
            let uris: Vec<&str> = members.iter().map(|&m| trace[m].request.target.as_str()).collect();
            let triples: Vec<Vec<Triple>> = members.iter().map(|&m| response_triples(&trace[m])).collect();
            let mut common_predicates: Vec<Term> = Vec::new();
            for t in &triples[0] {
                if !common_predicates.contains(&t.predicate) && triples.iter().all(|ts| ts.iter().any(|x| x.predicate == t.predicate)) {
                    common_predicates.push(t.predicate.clone());
                }
            }
            Cluster { method: trace[members[0]].request.method.clone(), uri_template: template(&uris), members, common_predicates }
        })
        .collect()
}

fn template(uris: &[&str]) -> String {
    let first = uris[0];
    if uris.iter().all(|u| *u == first) {
        return first.to_string();
    }
    let b = first.as_bytes();
    let mut prefix = uris.iter().fold(b.len(), |n, u| b.iter().zip(u.bytes()).take(n).take_while(|(x, y)| **x == *y).count());
    let mut suffix = uris.iter().fold(b.len() - prefix, |n, u| {
        let n = n.min(u.len().saturating_sub(prefix));
        b.iter().rev().zip(u.bytes().rev()).take(n).take_while(|(x, y)| **x == *y).count()
    });
    // keep whole tokens on both sides
    while prefix > 0 && b[prefix - 1].is_ascii_alphanumeric() {
        prefix -= 1;
    }
    while suffix > 0 && b[b.len() - suffix].is_ascii_alphanumeric() {
        suffix -= 1;
    }
    format!("{}{{}}{}", &first[..prefix], &first[b.len() - suffix..])
}

/// A draft description for one cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    pub cluster: usize,
    pub method: String,
    pub document: Document,
    /// Each generated variable with the value it had in each member.
    pub generalized: Vec<(Term, Vec<Term>)>,
    /// Whether an earlier response supplied the antecedent.
    pub linked: bool,
}

impl Skeleton {
    pub fn implication(&self) -> &Formula {
        &self.document.body
    }

    pub fn to_n3(&self) -> String {
        serialize(&self.document)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DescgenError {
    #[error("cluster {0} has no members")]
    EmptyCluster(usize),
    #[error("cluster {cluster} refers to trace entry {index}, which does not exist")]
    UnknownEntry { cluster: usize, index: usize },
}

impl fmt::Display for Skeleton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_n3())
    }
}

/// Values per member for one position, and the variable they became.
struct Vars {
    slots: Vec<(Vec<Term>, usize)>,
    next: usize,
}

impl Vars {
    /// The variable number for `values`, or `None` if they agree.
    fn get(&mut self, values: &[Term]) -> Option<usize> {
        if values.iter().all(|v| v == &values[0]) {
            return None;
        }
        if let Some((_, k)) = self.slots.iter().find(|(v, _)| v == values) {
            return Some(*k);
        }
        self.next += 1;
        self.slots.push((values.to_vec(), self.next));
        Some(self.next)
    }

    fn lookup(&self, values: &[Term]) -> Option<usize> {
        self.slots.iter().find(|(v, _)| v == values).map(|(_, k)| *k)
    }
}

fn uri_term(target: &str) -> Term {
    Term::uri(target)
}

fn body_term(body: &Option<WireBody>) -> Option<Term> {
    body.as_ref().map(|b| match b {
        WireBody::Entity(e) => Term::uri(e.as_str()),
        WireBody::Inline(s) => Term::string(s.as_str()),
    })
}

/// Triples of each member aligned by predicate and occurrence; only
/// positions every member has are kept, in the first member's order.
fn align(members: &[Vec<Triple>]) -> Vec<Vec<Triple>> {
    let key = |ts: &[Triple], i: usize| {
        let p = &ts[i].predicate;
        (p.clone(), ts[..i].iter().filter(|t| &t.predicate == p).count())
    };
    let mut rows = Vec::new();
    for i in 0..members[0].len() {
        let k = key(&members[0], i);
        let row: Option<Vec<Triple>> =
            members.iter().map(|ts| (0..ts.len()).find(|&j| key(ts, j) == k).map(|j| ts[j].clone())).collect();
        if let Some(row) = row {
            rows.push(row);
        }
    }
    rows
}

pub fn generate_skeletons(clusters: &[Cluster], trace: &[TraceEntry]) -> Result<Vec<Skeleton>, DescgenError> {
    clusters.iter().enumerate().map(|(ci, c)| skeleton(ci, c, trace)).collect()
}

fn skeleton(ci: usize, cluster: &Cluster, trace: &[TraceEntry]) -> Result<Skeleton, DescgenError> {
    if cluster.members.is_empty() {
        return Err(DescgenError::EmptyCluster(ci));
    }
    if let Some(&index) = cluster.members.iter().find(|&&m| m >= trace.len()) {
        return Err(DescgenError::UnknownEntry { cluster: ci, index });
    }
    let entries: Vec<&TraceEntry> = cluster.members.iter().map(|&m| &trace[m]).collect();
    let is_get = cluster.method.eq_ignore_ascii_case("GET");
    let mut vars = Vars { slots: Vec::new(), next: 0 };
    let mut prefixes: IndexMap<String, String> = IndexMap::new();
    for e in trace {
        if let Ok(d) = parse_document(&e.response.body, None) {
            for (k, v) in d.prefixes {
                prefixes.entry(k).or_insert(v);
            }
        }
    }

    // request slots
    let uris: Vec<Term> = entries.iter().map(|e| uri_term(&e.request.target)).collect();
    let uri_var = vars.get(&uris);
    let bodies: Vec<Option<Term>> = entries.iter().map(|e| body_term(&e.request.body)).collect();
    let body_values: Option<Vec<Term>> = bodies.iter().cloned().collect();
    let body_var = body_values.as_ref().and_then(|b| vars.get(b));

    let member_triples: Vec<Vec<Triple>> = entries.iter().map(|e| response_triples(e)).collect();
    let rows = align(&member_triples);

    // the response body: the request URI for GET, else the first subject
    let resp_values: Option<Vec<Term>> = if is_get {
        Some(uris.clone())
    } else {
        rows.first().map(|row| row.iter().map(|t| t.subject.clone()).collect())
    };
    let resp_var = resp_values.as_ref().and_then(|v| vars.get(v));

    let mut pattern_rows = Vec::new();
    for row in &rows {
        let mut slot = |pick: fn(&Triple) -> &Term| {
            let values: Vec<Term> = row.iter().map(|t| pick(t).clone()).collect();
            (vars.get(&values), values[0].clone())
        };
        let s = slot(|t| &t.subject);
        let p = slot(|t| &t.predicate);
        let o = slot(|t| &t.object);
        pattern_rows.push([s, p, o]);
    }

    // linking: earlier responses that mention the request URI values
    let mut antecedent: Vec<[(Option<usize>, Term); 3]> = Vec::new();
    let mut linked = false;
    if let Some(uv) = uri_var {
        let mut lifted: Option<Vec<Triple>> = None;
        for (&m, uri) in cluster.members.iter().zip(&uris) {
            let found = trace[..m]
                .iter()
                .rev()
                .find_map(|e| response_triples(e).into_iter().find(|t| &t.subject == uri || &t.object == uri));
            match found {
                Some(t) => lifted.get_or_insert_with(Vec::new).push(t),
                None => {
                    lifted = None;
                    break;
                }
            }
        }
        if let Some(row) = lifted.filter(|row| row.iter().all(|t| t.predicate == row[0].predicate)) {
            let mut slot = |pick: fn(&Triple) -> &Term| {
                let values: Vec<Term> = row.iter().map(|t| pick(t).clone()).collect();
                (vars.lookup(&values).or_else(|| vars.get(&values)), values[0].clone())
            };
            let s = slot(|t| &t.subject);
            let p = slot(|t| &t.predicate);
            let o = slot(|t| &t.object);
            if s.0 == Some(uv) || o.0 == Some(uv) {
                antecedent.push([s, p, o]);
                linked = true;
            }
        }
    }

    // variables in the antecedent are universal, the rest existential
    let mut universal: Vec<usize> = antecedent.iter().flat_map(|a| a.iter().filter_map(|(v, _)| *v)).collect();
    let local_file = !is_get && body_var.is_some();
    if local_file {
        universal.extend(body_var);
    }
    let var_term = |k: usize| {
        if universal.contains(&k) {
            Term::universal(format!("object{k}"))
        } else {
            Term::existential(format!("object{k}"))
        }
    };
    let term = |(v, c): &(Option<usize>, Term)| v.map_or_else(|| c.clone(), var_term);

    let mut ante = Formula::new();
    if local_file {
        let b = body_var.expect("checked above");
        ante.push(Triple::new(var_term(b), Term::rdf_type(), Term::uri(format!("{DESCGEN_NS}localFile"))));
    }
    for a in &antecedent {
        ante.push(Triple::new(term(&a[0]), term(&a[1]), term(&a[2])));
    }

    let request = Term::existential("request");
    let mut cons = Formula::new();
    cons.push(Triple::new(request.clone(), http("methodName"), Term::string(cluster.method.as_str())));
    let uri_value = match uri_var {
        Some(k) => var_term(k),
        None => Term::string(entries[0].request.target.as_str()),
    };
    cons.push(Triple::new(request.clone(), http("requestURI"), uri_value));
    if let Some(b) = &bodies[0] {
        cons.push(Triple::new(request.clone(), http("body"), body_var.map_or_else(|| b.clone(), var_term)));
    }
    if let Some(values) = &resp_values {
        let response = Term::existential("response");
        cons.push(Triple::new(request.clone(), http("resp"), response.clone()));
        cons.push(Triple::new(response, http("body"), resp_var.map_or_else(|| values[0].clone(), var_term)));
    }
    for r in &pattern_rows {
        cons.push(Triple::new(term(&r[0]), term(&r[1]), term(&r[2])));
    }

    let body = Formula::from_statements(vec![Statement::Implication { antecedent: Term::Graph(ante), consequent: Term::Graph(cons) }]);
    prefixes.insert("http".into(), HTTP_NS.into());
    if local_file {
        prefixes.insert(String::new(), DESCGEN_NS.into());
    }
    let generalized = vars.slots.iter().map(|(values, k)| (var_term(*k), values.clone())).collect();
    Ok(Skeleton {
        cluster: ci,
        method: cluster.method.clone(),
        document: Document { prefixes, base: None, body },
        generalized,
        linked,
    })
}

/// A short report of what was generalized, one line per variable.
pub fn describe_generalizations(s: &Skeleton) -> String {
    let none = IndexMap::new();
    s.generalized
        .iter()
        .map(|(v, values)| {
            let shown: Vec<String> = values.iter().map(|t| term_to_string(t, &none)).collect();
            format!("{v}: {}\n", shown.join(", "))
        })
        .collect()
}
