#![allow(dead_code)]

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use cadquery_core::fixtures::Fixture;
use cadquery_core::geometry::FaceId;
use cadquery_core::render::{RgbImage, Scene};
use cadquery_core::segcad::{PipelineConfig, ProviderError, ScoredMask, SegmentationProvider};

pub fn scene(fx: &Fixture) -> Scene {
    Scene::new(Arc::new(fx.to_model()))
}

/// Pipeline settings at a reduced resolution for fast tests.
pub fn small_config() -> PipelineConfig {
    PipelineConfig {
        render_width: 480,
        render_height: 270,
        ..PipelineConfig::default()
    }
}

pub fn ids(v: &[FaceId]) -> BTreeSet<FaceId> {
    v.iter().copied().collect()
}

#[derive(Debug, Clone)]
pub struct Request {
    pub method: String,
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl Request {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

type Handler = dyn Fn(&Request) -> (u16, String) + Send + Sync;

/// Minimal HTTP/1.1 server on an ephemeral port. Every connection is
/// answered once and closed.
pub struct MockServer {
    pub url: String,
    connections: Arc<AtomicUsize>,
    requests: Arc<Mutex<Vec<Request>>>,
}

fn read_request(stream: &mut TcpStream) -> Option<Request> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut line = String::new();
    reader.read_line(&mut line).ok()?;
    let mut parts = line.split_whitespace();
    let method = parts.next()?.to_string();
    let path = parts.next()?.to_string();
    let mut length = 0usize;
    let mut headers = Vec::new();
    loop {
        let mut header = String::new();
        reader.read_line(&mut header).ok()?;
        let header = header.trim_end();
        if header.is_empty() {
            break;
        }
        if let Some((k, v)) = header.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().ok()?;
            }
            headers.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body).ok()?;
    Some(Request {
        method,
        path,
        headers,
        body,
    })
}

impl MockServer {
    pub fn start(handler: impl Fn(&Request) -> (u16, String) + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock server");
        let url = format!("http://{}", listener.local_addr().unwrap());
        let connections = Arc::new(AtomicUsize::new(0));
        let requests = Arc::new(Mutex::new(Vec::new()));
        let handler: Arc<Handler> = Arc::new(handler);
        let (c, r) = (Arc::clone(&connections), Arc::clone(&requests));
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                c.fetch_add(1, Ordering::SeqCst);
                let Some(req) = read_request(&mut stream) else {
                    continue;
                };
                let (status, body) = handler(&req);
                r.lock().unwrap().push(req);
                let response = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(response.as_bytes());
                let _ = stream.flush();
            }
        });
        Self {
            url,
            connections,
            requests,
        }
    }

    pub fn connection_count(&self) -> usize {
        self.connections.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<Request> {
        self.requests.lock().unwrap().clone()
    }
}

/// Wraps a provider and records every call.
pub struct CountingProvider<P> {
    pub inner: P,
    pub calls: AtomicUsize,
    pub prompts: Mutex<Vec<String>>,
}

impl<P> CountingProvider<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
            prompts: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<P: SegmentationProvider> SegmentationProvider for CountingProvider<P> {
    fn segment(
        &self,
        image: &RgbImage,
        prompt: &str,
        box_threshold: f64,
    ) -> Result<Vec<ScoredMask>, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.prompts.lock().unwrap().push(prompt.to_string());
        self.inner.segment(image, prompt, box_threshold)
    }

    fn concurrent(&self) -> bool {
        self.inner.concurrent()
    }
}

/// Returns the same fixed masks for every call.
pub struct FixedProvider(pub Vec<ScoredMask>);

impl SegmentationProvider for FixedProvider {
    fn segment(&self, _: &RgbImage, _: &str, _: f64) -> Result<Vec<ScoredMask>, ProviderError> {
        Ok(self.0.clone())
    }
}
