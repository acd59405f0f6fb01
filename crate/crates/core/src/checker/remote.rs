use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::process::{Child, Command, Stdio};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{CheckOutcome, CheckRequest, CheckStatus, CheckerError, ProofBackend};

/// Where an external checker lives: `host:port`, or `exec:<command line>`
/// for a subprocess speaking the protocol on stdin/stdout.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Endpoint {
    Tcp(String),
    Exec(Vec<String>),
}

impl std::str::FromStr for Endpoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(cmd) = s.strip_prefix("exec:") {
            let argv: Vec<String> = cmd.split_whitespace().map(String::from).collect();
            if argv.is_empty() {
                return Err("empty exec: command".into());
            }
            return Ok(Endpoint::Exec(argv));
        }
        if s.trim().is_empty() {
            return Err("empty checker address".into());
        }
        Ok(Endpoint::Tcp(s.trim().to_string()))
    }
}

impl std::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Endpoint::Tcp(a) => write!(f, "{a}"),
            Endpoint::Exec(argv) => write!(f, "exec:{}", argv.join(" ")),
        }
    }
}

/// One response line of the wire protocol.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct WireResponse {
    pub status: String,
    #[serde(default)]
    pub message: String,
    #[serde(default)]
    pub line: Option<usize>,
}

impl WireResponse {
    fn from_outcome(o: &CheckOutcome) -> Self {
        let status = serde_json::to_value(o.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        WireResponse { status, message: o.message.clone(), line: o.line }
    }

    fn into_outcome(self) -> Result<CheckOutcome, CheckerError> {
        let status = match self.status.as_str() {
            "success" => CheckStatus::Success,
            "error" => CheckStatus::Error,
            "timeout" => CheckStatus::Timeout,
            "rejected_keyword" => CheckStatus::RejectedKeyword,
            other => return Err(CheckerError::Protocol(format!("unknown status `{other}`"))),
        };
        if status == CheckStatus::Success {
            return Ok(CheckOutcome::success());
        }
        if self.message.is_empty() {
            return Err(CheckerError::Protocol(format!("`{}` response without a message", self.status)));
        }
        Ok(CheckOutcome::failure(status, self.message, self.line))
    }
}

struct Conn {
    reader: BufReader<Box<dyn Read + Send>>,
    writer: Box<dyn Write + Send>,
    child: Option<Child>,
}

impl Drop for Conn {
    fn drop(&mut self) {
        if let Some(c) = &mut self.child {
            let _ = c.kill();
            let _ = c.wait();
        }
    }
}

impl Conn {
    fn open(ep: &Endpoint, timeout: Option<Duration>) -> io::Result<Conn> {
        match ep {
            Endpoint::Tcp(addr) => {
                let stream = TcpStream::connect(addr)?;
                stream.set_read_timeout(timeout)?;
                let _ = stream.set_nodelay(true);
                let w = stream.try_clone()?;
                Ok(Conn { reader: BufReader::new(Box::new(stream)), writer: Box::new(w), child: None })
            }
            Endpoint::Exec(argv) => {
                let mut child = Command::new(&argv[0])
                    .args(&argv[1..])
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::null())
                    .spawn()?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                Ok(Conn { reader: BufReader::new(Box::new(stdout)), writer: Box::new(stdin), child: Some(child) })
            }
        }
    }

    fn round_trip(&mut self, line: &str) -> io::Result<String> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        let mut resp = String::new();
        if self.reader.read_line(&mut resp)? == 0 {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "checker closed the connection"));
        }
        Ok(resp)
    }
}

/// Client for an external checker. Idle connections are kept for reuse, up
/// to `max_idle`.
pub struct RemoteChecker {
    endpoint: Endpoint,
    read_timeout: Option<Duration>,
    max_idle: usize,
    idle: Mutex<Vec<Conn>>,
}

impl RemoteChecker {
    pub fn new(endpoint: Endpoint, max_idle: usize) -> Self {
        RemoteChecker { endpoint, read_timeout: None, max_idle: max_idle.max(1), idle: Mutex::new(Vec::new()) }
    }

    /// Give up on a TCP response after `t` (transport failure, not a proof timeout).
    pub fn with_read_timeout(mut self, t: Duration) -> Self {
        self.read_timeout = Some(t);
        self
    }

    fn unavailable(&self, e: impl std::fmt::Display) -> CheckerError {
        CheckerError::BackendUnavailable(format!("{}: {e}", self.endpoint))
    }
}

impl ProofBackend for RemoteChecker {
    fn id(&self) -> String {
        format!("remote({})", self.endpoint)
    }

    fn check(&self, req: &CheckRequest) -> Result<CheckOutcome, CheckerError> {
        let line = serde_json::to_string(req).map_err(|e| CheckerError::InvalidRequest(e.to_string()))?;
        let pooled = self.idle.lock().expect("pool lock").pop();
        let (mut conn, resp) = match pooled {
            Some(mut c) => match c.round_trip(&line) {
                Ok(r) => (c, r),
                // stale pooled connection: retry once on a fresh one
                Err(_) => {
                    let mut c = Conn::open(&self.endpoint, self.read_timeout).map_err(|e| self.unavailable(e))?;
                    let r = c.round_trip(&line).map_err(|e| self.unavailable(e))?;
                    (c, r)
                }
            },
            None => {
                let mut c = Conn::open(&self.endpoint, self.read_timeout).map_err(|e| self.unavailable(e))?;
                let r = c.round_trip(&line).map_err(|e| self.unavailable(e))?;
                (c, r)
            }
        };
        let parsed: WireResponse = serde_json::from_str(resp.trim_end())
            .map_err(|e| CheckerError::Protocol(format!("bad response line: {e}")))?;
        {
            let mut idle = self.idle.lock().expect("pool lock");
            if idle.len() < self.max_idle {
                idle.push(conn);
            } else {
                conn.child.take().map(|mut c| c.kill());
            }
        }
        parsed.into_outcome()
    }
}

/// Serve the wire protocol on one byte stream until EOF. Malformed requests
/// get an `error` response; the connection stays usable.
pub fn serve_connection<R: BufRead, W: Write>(backend: &dyn ProofBackend, reader: R, mut writer: W) -> io::Result<()> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = match serde_json::from_str::<CheckRequest>(&line) {
            Err(e) => WireResponse { status: "error".into(), message: format!("invalid request: {e}"), line: None },
            Ok(req) => match backend.check(&req) {
                Ok(o) => WireResponse::from_outcome(&o),
                Err(e) => WireResponse { status: "error".into(), message: e.to_string(), line: None },
            },
        };
        serde_json::to_writer(&mut writer, &resp)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(())
}

/// Accept connections forever, one thread per connection.
pub fn serve_tcp(listener: TcpListener, backend: Arc<dyn ProofBackend>) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let backend = Arc::clone(&backend);
        std::thread::spawn(move || {
            let Ok(w) = stream.try_clone() else { return };
            let _ = serve_connection(backend.as_ref(), BufReader::new(stream), w);
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::{Checker, EmbeddedChecker};

    fn req(proof: &str) -> CheckRequest {
        CheckRequest {
            theorem_id: "t:1".into(),
            theory_context: "theory t\n\naxiom id0: f(x) = x\n".into(),
            statement: "lemma l: f(f(a)) = a".into(),
            candidate_proof: proof.into(),
            step_timeout_ms: 1000,
        }
    }

    #[test]
    fn endpoint_parsing() {
        assert_eq!("127.0.0.1:9".parse::<Endpoint>().unwrap(), Endpoint::Tcp("127.0.0.1:9".into()));
        assert_eq!(
            "exec:proofsynth serve-checker --stdio".parse::<Endpoint>().unwrap(),
            Endpoint::Exec(vec!["proofsynth".into(), "serve-checker".into(), "--stdio".into()])
        );
        assert!("exec:".parse::<Endpoint>().is_err());
    }

    #[test]
    fn server_loop_answers_each_line() {
        let input = format!(
            "{}\nnot json\n{}\n",
            serde_json::to_string(&req("rw id0\nrw id0\nrefl")).unwrap(),
            serde_json::to_string(&req("rw id1")).unwrap()
        );
        let mut out = Vec::new();
        serve_connection(&EmbeddedChecker::new(), input.as_bytes(), &mut out).unwrap();
        let lines: Vec<WireResponse> =
            String::from_utf8(out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].status, "success");
        assert!(lines[1].message.starts_with("invalid request"));
        assert_eq!(lines[2].line, Some(1));
    }

    #[test]
    fn tcp_round_trip_matches_embedded() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        std::thread::spawn(move || serve_tcp(listener, Arc::new(EmbeddedChecker::new())));
        let remote = Checker::new(Arc::new(RemoteChecker::new(Endpoint::Tcp(addr), 2)));
        let local = Checker::embedded();
        let reqs: Vec<_> = ["rw id0\nrw id0\nrefl", "rw id0\nrefl", "sorry", "frobnicate"].iter().map(|p| req(p)).collect();
        let a: Vec<_> = remote.check_batch(&reqs, 3).into_iter().map(Result::unwrap).collect();
        let b: Vec<_> = reqs.iter().map(|r| local.check(r).unwrap()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn unreachable_is_transport_error() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        drop(listener);
        let remote = RemoteChecker::new(Endpoint::Tcp(addr), 1);
        assert!(matches!(remote.check(&req("refl")), Err(CheckerError::BackendUnavailable(_))));
    }

    #[test]
    fn unknown_status_is_protocol_error() {
        let w = WireResponse { status: "maybe".into(), message: String::new(), line: None };
        assert!(matches!(w.into_outcome(), Err(CheckerError::Protocol(_))));
    }
}
