//! In-process hypermedia servers: the image API and generated chains.

use std::collections::BTreeMap;

use crate::agent::{Transport, WireResponse};
use crate::benchmark::{chain_resource, ChainSpec, CHAIN_NS};
use crate::restdesc::{WireBody, WireRequest};

pub mod http;

/// Switches that make a server misbehave. All off by default.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Faults {
    /// Answer with an empty body.
    pub drop_body: bool,
    /// Answer with triples that match nothing.
    pub wrong_triples: bool,
    /// Answer 500.
    pub server_error: bool,
    /// Restrict the faults to one method, e.g. `POST`.
    pub only_method: Option<String>,
}

impl Faults {
    fn applies(&self, method: &str) -> bool {
        self.only_method.as_deref().map_or(true, |m| m.eq_ignore_ascii_case(method))
    }

    fn apply(&self, method: &str, resp: WireResponse) -> WireResponse {
        if !self.applies(method) {
            return resp;
        }
        if self.server_error {
            return WireResponse::empty(500);
        }
        if self.wrong_triples {
            return WireResponse::n3(resp.status, "<urn:unrelated> <urn:unrelated> <urn:unrelated>.\n");
        }
        if self.drop_body {
            return WireResponse { body: String::new(), ..resp };
        }
        resp
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageConfig {
    /// Id given to the first upload.
    pub first_id: u64,
    /// Path templates with an `{id}` placeholder.
    pub comments_template: String,
    pub thumbnail_template: String,
    pub faults: Faults,
}

impl Default for ImageConfig {
    fn default() -> Self {
        ImageConfig {
            first_id: 24,
            comments_template: "/images/{id}/comments".into(),
            thumbnail_template: "/images/{id}/thumbnail".into(),
            faults: Faults::default(),
        }
    }
}

impl ImageConfig {
    /// Ids and link shapes of the walkthrough run.
    pub fn walkthrough() -> Self {
        ImageConfig {
            first_id: 37,
            comments_template: "/comments/about/images/{id}".into(),
            thumbnail_template: "/images/{id}/thumb".into(),
            faults: Faults::default(),
        }
    }
}

const IMAGE_PREFIXES: &str = "@prefix ex: <http://example.org/image#>.\n@prefix dbpedia: <http://dbpedia.org/resource/>.\n@prefix dbpedia-owl: <http://dbpedia.org/ontology/>.\n\n";

/// The image upload and thumbnail API.
#[derive(Clone, Debug)]
pub struct ImageServer {
    pub config: ImageConfig,
    next_id: u64,
    /// Uploaded entity per id; `None` for inline uploads.
    images: BTreeMap<u64, Option<String>>,
}

fn fill(template: &str, id: u64) -> String {
    template.replace("{id}", &id.to_string())
}

fn match_template(template: &str, path: &str) -> Option<u64> {
    let (before, after) = template.split_once("{id}")?;
    let digits = path.strip_prefix(before)?.strip_suffix(after)?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

impl ImageServer {
    pub fn new(config: ImageConfig) -> Self {
        ImageServer { next_id: config.first_id, config, images: BTreeMap::new() }
    }

    fn subjects(&self, id: u64) -> Vec<String> {
        let mut s = vec![format!("/images/{id}")];
        if let Some(Some(entity)) = self.images.get(&id) {
            s.push(entity.clone());
        }
        s
    }

    fn describe_image(&self, id: u64) -> String {
        let mut body = String::from(IMAGE_PREFIXES);
        for subject in self.subjects(id) {
            body.push_str(&format!(
                "<{subject}> a dbpedia:Image;\n    ex:comments <{}>;\n    ex:smallThumbnail <{}>.\n",
                fill(&self.config.comments_template, id),
                fill(&self.config.thumbnail_template, id)
            ));
        }
        body
    }

    fn describe_thumbnail(&self, id: u64) -> String {
        let thumb = fill(&self.config.thumbnail_template, id);
        let mut body = String::from(IMAGE_PREFIXES);
        for subject in self.subjects(id) {
            body.push_str(&format!("<{subject}> dbpedia-owl:thumbnail <{thumb}>.\n"));
        }
        body.push_str(&format!("<{thumb}> a dbpedia:Image;\n    dbpedia-owl:height 80.0.\n"));
        body
    }

    pub fn handle(&mut self, req: &WireRequest) -> WireResponse {
        let resp = self.route(req);
        self.config.faults.apply(&req.method, resp)
    }

    fn route(&mut self, req: &WireRequest) -> WireResponse {
        let path = req.target.as_str();
        match req.method.to_ascii_uppercase().as_str() {
            "POST" if path == "/images/" || path == "/images" => {
                let id = self.next_id;
                self.next_id += 1;
                let entity = match &req.body {
                    Some(WireBody::Entity(e)) => Some(e.clone()),
                    _ => None,
                };
                self.images.insert(id, entity);
                let mut resp = WireResponse::n3(201, self.describe_image(id));
                resp.headers.push(("Location".into(), format!("/images/{id}")));
                resp
            }
            "GET" => {
                let known = |id: Option<u64>| id.filter(|i| self.images.contains_key(i));
                if let Some(id) = known(match_template(&self.config.thumbnail_template, path)) {
                    WireResponse::n3(200, self.describe_thumbnail(id))
                } else if let Some(id) = known(match_template("/images/{id}", path)) {
                    WireResponse::n3(200, self.describe_image(id))
                } else if let Some(id) = known(match_template(&self.config.comments_template, path)) {
                    let c = fill(&self.config.comments_template, id);
                    WireResponse::n3(200, format!("{IMAGE_PREFIXES}</images/{id}> ex:comments <{c}>.\n"))
                } else {
                    WireResponse::empty(404)
                }
            }
            _ => WireResponse::empty(if path.starts_with("/images") { 405 } else { 404 }),
        }
    }
}

impl Transport for ImageServer {
    fn send(&mut self, request: &WireRequest) -> WireResponse {
        self.handle(request)
    }
}

/// Serves the resources of a generated chain.
#[derive(Clone, Debug)]
pub struct ChainServer {
    pub spec: ChainSpec,
    pub faults: Faults,
}

impl ChainServer {
    pub fn new(spec: ChainSpec) -> Self {
        ChainServer { spec, faults: Faults::default() }
    }

    /// Triples served for resource `/chain/{level}/{j}`: the links into level + 1.
    pub fn successors(&self, level: usize) -> String {
        let mut body = format!("@prefix ex: <{CHAIN_NS}>.\n\n");
        for j in 1..=self.spec.d {
            body.push_str(&format!(
                "<{}> ex:rel{} <{}>.\n",
                chain_resource(level, j),
                level + 2,
                chain_resource(level + 1, j)
            ));
        }
        body
    }

    pub fn handle(&mut self, req: &WireRequest) -> WireResponse {
        let resp = self.route(req);
        self.faults.apply(&req.method, resp)
    }

    fn route(&self, req: &WireRequest) -> WireResponse {
        if !req.method.eq_ignore_ascii_case("GET") {
            return WireResponse::empty(405);
        }
        let parts: Vec<&str> = req.target.trim_start_matches('/').split('/').collect();
        let [ "chain", level, j ] = parts.as_slice() else { return WireResponse::empty(404) };
        match (level.parse::<usize>(), j.parse::<usize>()) {
            (Ok(level), Ok(j)) if level < self.spec.n && (1..=self.spec.d).contains(&j) => {
                WireResponse::n3(200, self.successors(level))
            }
            _ => WireResponse::empty(404),
        }
    }
}

impl Transport for ChainServer {
    fn send(&mut self, request: &WireRequest) -> WireResponse {
        self.handle(request)
    }
}

/// Either server behind one handler, for the socket adapter.
pub enum Api {
    Image(ImageServer),
    Chain(ChainServer),
}

impl Api {
    pub fn handle(&mut self, req: &WireRequest) -> WireResponse {
        match self {
            Api::Image(s) => s.handle(req),
            Api::Chain(s) => s.handle(req),
        }
    }
}

impl Transport for Api {
    fn send(&mut self, request: &WireRequest) -> WireResponse {
        self.handle(request)
    }
}

/// Wraps a transport and records every exchange.
pub struct Recording<T> {
    pub inner: T,
    pub log: Vec<(WireRequest, WireResponse)>,
}

impl<T: Transport> Recording<T> {
    pub fn new(inner: T) -> Self {
        Recording { inner, log: Vec::new() }
    }
}

impl<T: Transport> Transport for Recording<T> {
    fn send(&mut self, request: &WireRequest) -> WireResponse {
        let resp = self.inner.send(request);
        self.log.push((request.clone(), resp.clone()));
        resp
    }
}
