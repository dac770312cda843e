//! Line-delimited JSON protocol over a subprocess's standard streams.
//!
//! Generation requests are `{"id": N, "source": "...", "original": "...",
//! "n": K}`, where `source` is the keyword skeleton to expand and `original`
//! the uncorrupted sentence, and answers are
//! `{"id": N, "candidates": ["...", ...]}`. Embedding requests are
//! `{"id": N, "text": "..."}` answered by `{"id": N, "embedding": [..]}`. A
//! response may instead carry `{"id": N, "error": "..."}`. One request is in
//! flight at a time; every response must arrive within the deadline.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{Error, Result};

pub const DEFAULT_DEADLINE: Duration = Duration::from_secs(30);

/// Program plus arguments for a backend process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoint {
    pub program: String,
    pub args: Vec<String>,
    #[serde(default = "default_deadline_ms")]
    pub deadline_ms: u64,
}

fn default_deadline_ms() -> u64 {
    DEFAULT_DEADLINE.as_millis() as u64
}

impl Endpoint {
    /// Splits a command line on whitespace: `"python3 serve.py --fast"`.
    pub fn parse(command: &str) -> Result<Self> {
        let mut parts = command.split_whitespace().map(str::to_string);
        let program = parts
            .next()
            .ok_or_else(|| Error::Config("empty backend command".into()))?;
        Ok(Endpoint {
            program,
            args: parts.collect(),
            deadline_ms: default_deadline_ms(),
        })
    }

    pub fn with_deadline(mut self, deadline: Duration) -> Self {
        self.deadline_ms = deadline.as_millis() as u64;
        self
    }

    pub fn deadline(&self) -> Duration {
        Duration::from_millis(self.deadline_ms)
    }
}

/// A running backend process.
pub struct BackendClient {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    deadline: Duration,
    next_id: u64,
    responses: usize,
}

impl BackendClient {
    pub fn spawn(endpoint: &Endpoint) -> Result<Self> {
        let mut child = Command::new(&endpoint.program)
            .args(&endpoint.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Backend(format!("cannot start `{}`: {e}", endpoint.program)))?;
        let stdout = child.stdout.take().expect("stdout is piped");
        let stdin = child.stdin.take();
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(BackendClient {
            child,
            stdin,
            lines: rx,
            deadline: endpoint.deadline(),
            next_id: 0,
            responses: 0,
        })
    }

    fn exit_detail(&mut self) -> String {
        match self.child.wait() {
            Ok(status) if !status.success() => format!("backend exited with {status}"),
            Ok(_) => "backend closed its output".to_string(),
            Err(e) => format!("backend wait failed: {e}"),
        }
    }

    /// Sends one request (an object without `id`) and returns the response
    /// object after checking its id.
    pub fn request(&mut self, mut body: Value) -> Result<Value> {
        let id = self.next_id;
        self.next_id += 1;
        body["id"] = json!(id);
        let mut line = serde_json::to_string(&body).expect("serializable request");
        line.push('\n');
        let write = self
            .stdin
            .as_mut()
            .ok_or_else(|| Error::Backend("backend input already closed".into()))
            .and_then(|s| {
                s.write_all(line.as_bytes())
                    .and_then(|_| s.flush())
                    .map_err(|e| Error::Backend(format!("write to backend failed: {e}")))
            });
        if let Err(e) = write {
            let detail = self.exit_detail();
            return Err(Error::Backend(format!("{e}; {detail}")));
        }

        let raw = match self.lines.recv_timeout(self.deadline) {
            Ok(Ok(raw)) => raw,
            Ok(Err(e)) => return Err(Error::Backend(format!("read from backend failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                let _ = self.child.kill();
                return Err(Error::BackendTimeout(self.deadline));
            }
            Err(RecvTimeoutError::Disconnected) => return Err(Error::Backend(self.exit_detail())),
        };
        self.responses += 1;
        let line_no = self.responses;
        let value: Value = serde_json::from_str(&raw).map_err(|e| Error::BackendProtocol {
            line: line_no,
            detail: format!("invalid JSON ({e})"),
        })?;
        if value.get("id").and_then(Value::as_u64) != Some(id) {
            return Err(Error::BackendProtocol {
                line: line_no,
                detail: format!("expected id {id}"),
            });
        }
        if let Some(err) = value.get("error") {
            return Err(Error::Backend(format!("backend reported: {err}")));
        }
        Ok(value)
    }

    /// Asks for `n` candidate expansions of `source`.
    pub fn generate(&mut self, source: &str, original: &str, n: usize) -> Result<Vec<String>> {
        let line = self.responses + 1;
        let resp = self.request(json!({ "source": source, "original": original, "n": n }))?;
        let cands = resp
            .get("candidates")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::BackendProtocol {
                line,
                detail: "missing `candidates` array".into(),
            })?;
        let out: Vec<String> = cands
            .iter()
            .map(|c| c.as_str().map(str::to_string))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::BackendProtocol {
                line,
                detail: "candidates must be strings".into(),
            })?;
        if out.len() != n {
            return Err(Error::BackendProtocol {
                line,
                detail: format!("asked for {n} candidates, got {}", out.len()),
            });
        }
        Ok(out)
    }

    pub fn embed(&mut self, text: &str) -> Result<Vec<f64>> {
        let line = self.responses + 1;
        let resp = self.request(json!({ "text": text }))?;
        resp.get("embedding")
            .and_then(Value::as_array)
            .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
            .ok_or_else(|| Error::BackendProtocol {
                line,
                detail: "missing numeric `embedding` array".into(),
            })
    }
}

impl Drop for BackendClient {
    fn drop(&mut self) {
        drop(self.stdin.take());
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Test double: answers every generation request with `n` copies of the
/// original sentence (or of the source when no original is sent) and every
/// embedding request with a letter-count vector.
pub fn serve_echo(input: impl BufRead, mut output: impl Write) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let req: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                writeln!(output, "{}", json!({ "id": null, "error": e.to_string() }))?;
                continue;
            }
        };
        let id = req.get("id").cloned().unwrap_or(Value::Null);
        let resp = if let Some(text) = req.get("text").and_then(Value::as_str) {
            let mut v = vec![0.0f64; 26];
            for c in text.to_lowercase().chars().filter(char::is_ascii_lowercase) {
                v[(c as u8 - b'a') as usize] += 1.0;
            }
            json!({ "id": id, "embedding": v })
        } else {
            let source = req
                .get("original")
                .or_else(|| req.get("source"))
                .and_then(Value::as_str)
                .unwrap_or("");
            let n = req.get("n").and_then(Value::as_u64).unwrap_or(1) as usize;
            json!({ "id": id, "candidates": vec![source; n] })
        };
        writeln!(output, "{resp}")?;
        output.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh(script: &str, deadline_ms: u64) -> Endpoint {
        Endpoint {
            program: "sh".into(),
            args: vec!["-c".into(), script.into()],
            deadline_ms,
        }
    }

    #[test]
    fn echo_double_answers_in_protocol() {
        let input = b"{\"id\":0,\"source\":\"hi there\",\"n\":3}\n{\"id\":1,\"text\":\"ab\"}\n";
        let mut out = Vec::new();
        serve_echo(&input[..], &mut out).unwrap();
        let lines: Vec<Value> = String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines[0]["candidates"], json!(["hi there", "hi there", "hi there"]));
        assert_eq!(lines[1]["embedding"][0], json!(1.0));
    }

    #[test]
    fn scripted_backend_round_trip() {
        let ep = sh(r#"read x; echo '{"id":0,"candidates":["a b","c"]}'"#, 5_000);
        let mut client = BackendClient::spawn(&ep).unwrap();
        assert_eq!(client.generate("src", "", 2).unwrap(), ["a b", "c"]);
    }

    #[test]
    fn malformed_line_names_line_number() {
        let ep = sh(
            r#"read x; echo '{"id":0,"candidates":["a"]}'; read y; echo 'not json'"#,
            5_000,
        );
        let mut client = BackendClient::spawn(&ep).unwrap();
        client.generate("s", "", 1).unwrap();
        match client.generate("s", "", 1) {
            Err(Error::BackendProtocol { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_candidate_count_is_protocol_error() {
        let ep = sh(r#"read x; echo '{"id":0,"candidates":["a"]}'"#, 5_000);
        let mut client = BackendClient::spawn(&ep).unwrap();
        assert!(matches!(client.generate("s", "", 3), Err(Error::BackendProtocol { line: 1, .. })));
    }

    #[test]
    fn slow_backend_times_out() {
        let ep = sh("read x; sleep 5", 200);
        let mut client = BackendClient::spawn(&ep).unwrap();
        let start = std::time::Instant::now();
        assert!(matches!(client.generate("s", "", 1), Err(Error::BackendTimeout(_))));
        assert!(start.elapsed() < Duration::from_secs(3));
    }

    #[test]
    fn failing_backend_reports_status() {
        let ep = sh("read x; exit 3", 5_000);
        let mut client = BackendClient::spawn(&ep).unwrap();
        match client.generate("s", "", 1) {
            Err(e @ Error::Backend(_)) => assert_eq!(e.exit_code(), 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(BackendClient::spawn(&Endpoint::parse("/definitely/missing/bin").unwrap()).is_err());
    }
}
