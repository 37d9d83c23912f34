//! Socket adapter: serve an [`Api`] over HTTP and talk to HTTP servers.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::thread::JoinHandle;

use super::Api;
use crate::agent::{Transport, WireResponse};
use crate::restdesc::{WireBody, WireRequest};

/// Header carrying the IRI of an uploaded entity.
pub const ENTITY_HEADER: &str = "Content-Location";

fn to_wire(req: &mut tiny_http::Request) -> WireRequest {
    let mut wire = WireRequest::new(req.method().as_str(), req.url().to_string());
    let entity = req
        .headers()
        .iter()
        .find(|h| h.field.equiv(ENTITY_HEADER))
        .map(|h| h.value.as_str().to_string());
    let mut body = String::new();
    let _ = req.as_reader().read_to_string(&mut body);
    wire.body = match entity {
        Some(e) => Some(WireBody::Entity(e)),
        None if !body.is_empty() => Some(WireBody::Inline(body)),
        None => None,
    };
    wire
}

fn respond(req: tiny_http::Request, resp: WireResponse) {
    let mut out = tiny_http::Response::from_string(resp.body).with_status_code(resp.status);
    let mut headers = resp.headers;
    headers.push(("Content-Type".into(), resp.media_type));
    for (k, v) in headers {
        if let Ok(h) = tiny_http::Header::from_bytes(k.as_bytes(), v.as_bytes()) {
            out.add_header(h);
        }
    }
    let _ = req.respond(out);
}

/// Serves requests one at a time until the server is dropped.
pub fn serve_forever(server: &tiny_http::Server, api: &mut Api) {
    for mut req in server.incoming_requests() {
        let wire = to_wire(&mut req);
        let resp = api.handle(&wire);
        respond(req, resp);
    }
}

/// A server running on a background thread.
pub struct RunningServer {
    server: Arc<tiny_http::Server>,
    thread: Option<JoinHandle<()>>,
    pub addr: SocketAddr,
}

impl RunningServer {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Binds `addr` (port 0 picks a free port) and serves `api` in the background.
pub fn spawn(mut api: Api, addr: &str) -> std::io::Result<RunningServer> {
    let server = Arc::new(tiny_http::Server::http(addr).map_err(std::io::Error::other)?);
    let addr = server
        .server_addr()
        .to_ip()
        .ok_or_else(|| std::io::Error::other("server is not bound to an IP address"))?;
    let s = Arc::clone(&server);
    let thread = std::thread::spawn(move || serve_forever(&s, &mut api));
    Ok(RunningServer { server, thread: Some(thread), addr })
}

/// Sends requests to a real server.
pub struct HttpTransport {
    pub base: String,
    /// Directory entity bodies are read from; missing files are sent empty.
    pub entity_dir: Option<PathBuf>,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(base: impl Into<String>) -> Self {
        HttpTransport { base: base.into().trim_end_matches('/').to_string(), entity_dir: None, agent: ureq::Agent::new() }
    }

    fn url(&self, target: &str) -> String {
        if target.starts_with("http://") || target.starts_with("https://") {
            target.to_string()
        } else if target.starts_with('/') {
            format!("{}{target}", self.base)
        } else {
            format!("{}/{target}", self.base)
        }
    }
}

impl Transport for HttpTransport {
    fn send(&mut self, request: &WireRequest) -> WireResponse {
        let mut req = self.agent.request(&request.method, &self.url(&request.target)).set("Accept", "text/n3, text/turtle");
        for (k, v) in &request.headers {
            req = req.set(k, v);
        }
        let result = match &request.body {
            None => req.call(),
            Some(WireBody::Inline(text)) => req.set("Content-Type", "text/plain").send_string(text),
            Some(WireBody::Entity(iri)) => {
                let bytes = self
                    .entity_dir
                    .as_ref()
                    .and_then(|d| std::fs::read(d.join(iri)).ok())
                    .unwrap_or_default();
                req.set(ENTITY_HEADER, iri).send_bytes(&bytes)
            }
        };
        let resp = match result {
            Ok(r) | Err(ureq::Error::Status(_, r)) => r,
            Err(e) => {
                return WireResponse { status: 599, media_type: String::new(), headers: Vec::new(), body: e.to_string() }
            }
        };
        let status = resp.status();
        let media_type = resp.content_type().to_string();
        let headers = resp
            .headers_names()
            .into_iter()
            .filter_map(|n| resp.header(&n).map(|v| (n.clone(), v.to_string())))
            .collect();
        let body = resp.into_string().unwrap_or_default();
        WireResponse { status, media_type, headers, body }
    }
}
