//! Generator backed by an external program speaking JSON lines on
//! stdin/stdout.

use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::generator::{GenRequest, GenResponse, Generator, GeneratorError};
use crate::codec::{detokenize_str, ParseMode, Vocabulary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireFrame {
    pub cx: f64,
    pub cy: f64,
    pub angle: f64,
    pub size: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WirePv {
    pub path: String,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub patch_id: usize,
    pub frame: WireFrame,
    pub bev_image: Option<String>,
    pub pv: Option<Vec<WirePv>>,
    pub prompt: String,
    pub context_tokens: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireResponse {
    pub tokens: String,
    #[serde(default)]
    pub class_logits: Option<Vec<Vec<f64>>>,
}

impl From<&GenRequest> for WireRequest {
    fn from(req: &GenRequest) -> Self {
        WireRequest {
            patch_id: req.patch_id,
            frame: WireFrame {
                cx: req.frame.center.x,
                cy: req.frame.center.y,
                angle: req.frame.angle_deg,
                size: req.frame.width_px,
            },
            bev_image: req.bev_image_ref.clone(),
            pv: req.pv_refs.as_ref().map(|pvs| {
                pvs.iter()
                    .map(|p| WirePv {
                        path: p.path.clone(),
                        x: p.pose.x,
                        y: p.pose.y,
                        heading: p.heading_deg,
                    })
                    .collect()
            }),
            prompt: req.prompt_text.clone(),
            context_tokens: req.context_tokens.clone(),
        }
    }
}

/// Checks a decoded response against the request: the logit table, when
/// present, has one non-empty finite row per parsed line.
pub(crate) fn validate_response(resp: &WireResponse, vocab: &Vocabulary) -> Result<GenResponse, GeneratorError> {
    if let Some(logits) = &resp.class_logits {
        let decoded = detokenize_str(&resp.tokens, vocab, ParseMode::Lenient)
            .map_err(|e| GeneratorError::MalformedResponse(e.to_string()))?;
        if logits.len() != decoded.map.len() {
            return Err(GeneratorError::InvariantViolation(format!(
                "{} logit rows for {} parsed lines",
                logits.len(),
                decoded.map.len()
            )));
        }
        if let Some(i) = logits.iter().position(|row| row.is_empty() || row.iter().any(|v| !v.is_finite())) {
            return Err(GeneratorError::InvariantViolation(format!(
                "logit row {i} is empty or not finite"
            )));
        }
    }
    Ok(GenResponse {
        token_string: resp.tokens.clone(),
        class_logits: resp.class_logits.clone(),
    })
}

struct Running {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    stderr: JoinHandle<String>,
}

/// Keeps one child process alive across requests. After a timeout or a
/// crash the process is discarded and restarted on the next request.
pub struct SubprocessGenerator {
    program: String,
    args: Vec<String>,
    timeout: Duration,
    running: Option<Running>,
}

impl SubprocessGenerator {
    pub fn new(program: impl Into<String>, args: Vec<String>, timeout: Duration) -> Self {
        SubprocessGenerator {
            program: program.into(),
            args,
            timeout,
            running: None,
        }
    }

    /// Runs `command` through `sh -c`.
    pub fn shell(command: &str, timeout: Duration) -> Self {
        Self::new("sh", vec!["-c".into(), command.into()], timeout)
    }

    fn spawn(&self) -> Result<Running, GeneratorError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| GeneratorError::Io(format!("cannot start {:?}: {e}", self.program)))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut err_pipe = child.stderr.take().expect("piped stderr");

        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let stderr = thread::spawn(move || {
            let mut buf = String::new();
            let _ = err_pipe.read_to_string(&mut buf);
            buf
        });
        Ok(Running {
            child,
            stdin,
            lines,
            stderr,
        })
    }

    fn exit_error(mut run: Running) -> GeneratorError {
        drop(run.stdin);
        let status = run.child.wait();
        let stderr = run.stderr.join().map(|s| s.trim().to_string()).unwrap_or_default();
        match status {
            Ok(s) if s.success() => {
                GeneratorError::MalformedResponse("generator closed its output without a response".into())
            }
            Ok(s) => GeneratorError::NonZeroExit { code: s.code(), stderr },
            Err(e) => GeneratorError::Io(e.to_string()),
        }
    }

    fn exchange(&mut self, req: &GenRequest) -> Result<String, GeneratorError> {
        let mut run = match self.running.take() {
            Some(r) => r,
            None => self.spawn()?,
        };
        let mut line = serde_json::to_string(&WireRequest::from(req))
            .map_err(|e| GeneratorError::Io(e.to_string()))?;
        line.push('\n');
        if run.stdin.write_all(line.as_bytes()).and_then(|_| run.stdin.flush()).is_err() {
            return Err(Self::exit_error(run));
        }
        match run.lines.recv_timeout(self.timeout) {
            Ok(Ok(out)) => {
                self.running = Some(run);
                Ok(out)
            }
            Ok(Err(e)) => {
                let _ = run.child.kill();
                let _ = run.child.wait();
                Err(GeneratorError::Io(e.to_string()))
            }
            Err(RecvTimeoutError::Disconnected) => Err(Self::exit_error(run)),
            Err(RecvTimeoutError::Timeout) => {
                let _ = run.child.kill();
                let _ = run.child.wait();
                Err(GeneratorError::Timeout(self.timeout.as_secs_f64()))
            }
        }
    }
}

impl Generator for SubprocessGenerator {
    fn generate(&mut self, req: &GenRequest) -> Result<GenResponse, GeneratorError> {
        let out = self.exchange(req)?;
        let resp: WireResponse =
            serde_json::from_str(&out).map_err(|e| GeneratorError::MalformedResponse(e.to_string()))?;
        let vocab = Vocabulary::new(req.frame.width_px.min(req.frame.height_px) - 1);
        validate_response(&resp, &vocab)
    }
}

impl Drop for SubprocessGenerator {
    fn drop(&mut self) {
        if let Some(mut run) = self.running.take() {
            let _ = run.child.kill();
            let _ = run.child.wait();
        }
    }
}
