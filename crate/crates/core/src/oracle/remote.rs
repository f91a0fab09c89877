//! JSON-over-HTTP client: POST `{capability, payload}`, expect `{result, rationale}`.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde_json::{json, Value};

use super::{Capability, OracleBackend, OracleError};

pub const URL_ENV: &str = "SKILLPRIV_ORACLE_URL";
pub const TOKEN_ENV: &str = "SKILLPRIV_ORACLE_TOKEN";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteConfig {
    pub url: String,
    pub token: Option<String>,
    pub timeout: Duration,
    pub retries: u32,
    pub max_in_flight: usize,
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>) -> Self {
        RemoteConfig { url: url.into(), token: None, timeout: Duration::from_secs(60), retries: 2, max_in_flight: 4 }
    }

    pub fn from_env() -> Result<Self, OracleError> {
        let url = std::env::var(URL_ENV)
            .map_err(|_| OracleError::OracleUnavailable(format!("{URL_ENV} is not set")))?;
        let mut cfg = RemoteConfig::new(url);
        cfg.token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
        Ok(cfg)
    }
}

pub struct RemoteBackend {
    cfg: RemoteConfig,
    agent: ureq::Agent,
    in_flight: Mutex<usize>,
    slot_free: Condvar,
}

impl RemoteBackend {
    pub fn new(cfg: RemoteConfig) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(cfg.timeout).build();
        RemoteBackend { cfg, agent, in_flight: Mutex::new(0), slot_free: Condvar::new() }
    }

    fn acquire(&self) {
        let mut n = self.in_flight.lock().expect("in-flight lock");
        while *n >= self.cfg.max_in_flight.max(1) {
            n = self.slot_free.wait(n).expect("in-flight lock");
        }
        *n += 1;
    }

    fn release(&self) {
        *self.in_flight.lock().expect("in-flight lock") -= 1;
        self.slot_free.notify_one();
    }

    fn attempt(&self, body: &Value) -> Result<Value, OracleError> {
        let mut req = self.agent.post(&self.cfg.url).set("Content-Type", "application/json");
        if let Some(t) = &self.cfg.token {
            req = req.set("Authorization", &format!("Bearer {t}"));
        }
        let resp = req
            .send_json(body.clone())
            .map_err(|e| OracleError::OracleUnavailable(e.to_string()))?;
        let v: Value = resp.into_json().map_err(|e| OracleError::Malformed(e.to_string()))?;
        v.get("result")
            .cloned()
            .ok_or_else(|| OracleError::Malformed("response has no `result`".into()))
    }
}

impl OracleBackend for RemoteBackend {
    fn call(&self, capability: Capability, request: &Value) -> Result<Value, OracleError> {
        let body = json!({ "capability": capability, "payload": request });
        self.acquire();
        let mut last = OracleError::OracleUnavailable("no attempt made".into());
        for _ in 0..=self.cfg.retries {
            match self.attempt(&body) {
                Ok(v) => {
                    self.release();
                    return Ok(v);
                }
                Err(e @ OracleError::Malformed(_)) => {
                    self.release();
                    return Err(e);
                }
                Err(e) => last = e,
            }
        }
        self.release();
        Err(last)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// Serves one HTTP exchange and hands back the request body.
    fn serve_once(reply: &'static str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/oracle", listener.local_addr().unwrap());
        let h = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0u8; len];
            reader.read_exact(&mut body).unwrap();
            let mut s = stream;
            write!(s, "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}", reply.len(), reply).unwrap();
            String::from_utf8(body).unwrap()
        });
        (url, h)
    }

    #[test]
    fn wire_format() {
        let (url, h) = serve_once(r#"{"result": true, "rationale": "same flow"}"#);
        let b = RemoteBackend::new(RemoteConfig::new(url));
        let got = b.call(Capability::JudgeCoreEq, &json!({"task": "x"})).unwrap();
        assert_eq!(got, json!(true));
        let sent: Value = serde_json::from_str(&h.join().unwrap()).unwrap();
        assert_eq!(sent, json!({"capability": "judge_core_eq", "payload": {"task": "x"}}));
    }

    #[test]
    fn unreachable_endpoint_is_unavailable() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/", listener.local_addr().unwrap());
        drop(listener);
        let mut cfg = RemoteConfig::new(url);
        cfg.retries = 0;
        let err = RemoteBackend::new(cfg).call(Capability::JudgeOutEq, &json!({})).unwrap_err();
        assert!(matches!(err, OracleError::OracleUnavailable(_)));
    }
}
