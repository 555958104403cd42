//! Line-delimited JSON protocol for external line classifiers.
//!
//! The client opens a TCP connection per request, writes one
//! `{"id": <n>, "text": <line>}` record followed by a newline and reads back
//! one `{"id": <n>, "score": <p>}` record, where `p` in [0, 1] is the
//! probability that the line is benign. Requests carry no state, so calls may
//! be issued concurrently.

use std::io::{BufRead, BufReader, Write};
use std::net::{Shutdown, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdapterError {
    #[error("bad adapter endpoint `{0}`, expected tcp://host:port")]
    Endpoint(String),
    #[error("adapter {endpoint}: {message}")]
    Io { endpoint: String, message: String },
    #[error("adapter {endpoint} timed out")]
    Timeout { endpoint: String },
    #[error("adapter {endpoint} sent an invalid response: {raw:?}")]
    Protocol { endpoint: String, raw: String },
}

#[derive(Debug, Serialize, Deserialize)]
struct Request<'a> {
    id: u64,
    text: &'a str,
}

#[derive(Debug, Serialize, Deserialize)]
struct Response {
    id: u64,
    score: f64,
}

/// Strips the `tcp://` scheme from an endpoint.
pub fn parse_endpoint(endpoint: &str) -> Result<&str, AdapterError> {
    let addr = endpoint.strip_prefix("tcp://").unwrap_or(endpoint);
    match addr.rsplit_once(':') {
        Some((host, port)) if !host.is_empty() && port.parse::<u16>().is_ok() => Ok(addr),
        _ => Err(AdapterError::Endpoint(endpoint.into())),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterClient {
    pub endpoint: String,
    #[serde(with = "millis")]
    pub timeout: Duration,
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

impl AdapterClient {
    pub fn new(endpoint: impl Into<String>) -> Result<Self, AdapterError> {
        let endpoint = endpoint.into();
        parse_endpoint(&endpoint)?;
        Ok(Self { endpoint, timeout: DEFAULT_TIMEOUT })
    }

    fn io(&self, e: std::io::Error) -> AdapterError {
        use std::io::ErrorKind::*;
        match e.kind() {
            TimedOut | WouldBlock => AdapterError::Timeout { endpoint: self.endpoint.clone() },
            _ => AdapterError::Io { endpoint: self.endpoint.clone(), message: e.to_string() },
        }
    }

    pub fn score(&self, text: &str) -> Result<f64, AdapterError> {
        let addr = parse_endpoint(&self.endpoint)?;
        let sock = addr
            .to_socket_addrs()
            .map_err(|e| self.io(e))?
            .next()
            .ok_or_else(|| AdapterError::Endpoint(self.endpoint.clone()))?;
        let stream = TcpStream::connect_timeout(&sock, self.timeout).map_err(|e| self.io(e))?;
        stream.set_read_timeout(Some(self.timeout)).map_err(|e| self.io(e))?;
        stream.set_write_timeout(Some(self.timeout)).map_err(|e| self.io(e))?;
        let id = NEXT_ID.fetch_add(1, Ordering::Relaxed);
        let mut request = serde_json::to_string(&Request { id, text }).expect("requests always serialize");
        request.push('\n');
        (&stream).write_all(request.as_bytes()).map_err(|e| self.io(e))?;
        let mut raw = String::new();
        BufReader::new(&stream).read_line(&mut raw).map_err(|e| self.io(e))?;
        let _ = stream.shutdown(Shutdown::Both);
        let protocol = || AdapterError::Protocol { endpoint: self.endpoint.clone(), raw: raw.clone() };
        let response: Response = serde_json::from_str(raw.trim_end()).map_err(|_| protocol())?;
        if response.id != id || !(0.0..=1.0).contains(&response.score) {
            return Err(protocol());
        }
        Ok(response.score)
    }
}

/// In-process adapter server for tests and demos. Each request line is
/// answered by `respond`, which receives the request's `text` and `id` and
/// returns the raw response line.
pub struct StubServer {
    addr: String,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Serves well-formed responses scored by `score`.
    pub fn start<F>(score: F) -> std::io::Result<Self>
    where
        F: Fn(&str) -> f64 + Send + Sync + 'static,
    {
        Self::start_raw(move |text, id| {
            serde_json::to_string(&Response { id, score: score(text) }).expect("responses always serialize")
        })
    }

    pub fn start_raw<F>(respond: F) -> std::io::Result<Self>
    where
        F: Fn(&str, u64) -> String + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?.to_string();
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let respond = Arc::new(respond);
        let handle = thread::spawn(move || {
            for stream in listener.incoming() {
                if flag.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let respond = Arc::clone(&respond);
                thread::spawn(move || serve(stream, &*respond));
            }
        });
        Ok(Self { addr, stop, handle: Some(handle) })
    }

    pub fn endpoint(&self) -> String {
        format!("tcp://{}", self.addr)
    }
}

fn serve(stream: TcpStream, respond: &dyn Fn(&str, u64) -> String) {
    let mut reader = BufReader::new(&stream);
    let mut line = String::new();
    while matches!(reader.read_line(&mut line), Ok(n) if n > 0) {
        let reply = match serde_json::from_str::<Request>(line.trim_end()) {
            Ok(req) => respond(req.text, req.id),
            Err(_) => "{\"error\":\"bad request\"}".into(),
        };
        if (&stream).write_all(format!("{reply}\n").as_bytes()).is_err() {
            return;
        }
        line.clear();
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(&self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}
