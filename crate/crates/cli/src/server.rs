//! Remote environment over line-delimited JSON.
//!
//! Every request line gets exactly one response line, in order. A session
//! must open with `hello` carrying the protocol version. Malformed requests,
//! a missing handshake and version mismatches are answered with an `error`
//! and the connection is closed; stepping before `reset` or after the episode
//! ended is answered with an `error` and the session continues. `close` is
//! acknowledged with `bye`. Floats are written with 17 significant digits so
//! every `f64` crosses the wire unchanged.

use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;

use serde::{Deserialize, Serialize};
use vasonav::env::{Env, EnvError, StepResult, ACTION_DIM, OBS_DIM};
use vasonav::numfmt::to_json_line;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Request {
    Hello { version: u32 },
    Reset {},
    Step { action: [f64; ACTION_DIM] },
    Close {},
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireInfo {
    pub d_current: f64,
    pub event: String,
    pub step: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Response {
    HelloOk {
        version: u32,
        obs_dim: usize,
        action_bounds: [f64; ACTION_DIM],
    },
    State {
        obs: [f64; OBS_DIM],
        reward: f64,
        done: bool,
        info: WireInfo,
    },
    Error {
        code: String,
        message: String,
    },
    Bye {},
}

impl Response {
    fn error(code: &str, message: impl Into<String>) -> Self {
        Response::Error {
            code: code.to_string(),
            message: message.into(),
        }
    }

    /// The response an in-process `step` result maps to.
    pub fn from_step(r: &StepResult) -> Self {
        Response::State {
            obs: r.obs.to_array(),
            reward: r.reward,
            done: r.done,
            info: WireInfo {
                d_current: r.info.d_current,
                event: r.info.event.name().to_string(),
                step: r.info.step,
            },
        }
    }

    pub fn to_line(&self) -> String {
        to_json_line(self).expect("responses serialize")
    }
}

/// Protocol state of one connection.
pub struct Session {
    env: Env,
    greeted: bool,
}

impl Session {
    pub fn new(env: Env) -> Self {
        Self { env, greeted: false }
    }

    /// Handles one request line; the flag says whether to close afterwards.
    pub fn handle_line(&mut self, line: &str) -> (Response, bool) {
        let req: Request = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => return (Response::error("bad_request", e.to_string()), true),
        };
        match req {
            Request::Hello { version } if version == PROTOCOL_VERSION => {
                self.greeted = true;
                let response = Response::HelloOk {
                    version: PROTOCOL_VERSION,
                    obs_dim: OBS_DIM,
                    action_bounds: self.env.task().action_bounds(),
                };
                (response, false)
            }
            Request::Hello { version } => (
                Response::error(
                    "version_mismatch",
                    format!("server speaks version {PROTOCOL_VERSION}, client asked for {version}"),
                ),
                true,
            ),
            _ if !self.greeted => (Response::error("handshake_required", "send hello first"), true),
            Request::Close {} => (Response::Bye {}, true),
            Request::Reset {} => {
                let obs = self.env.reset();
                let response = Response::State {
                    obs: obs.to_array(),
                    reward: 0.0,
                    done: false,
                    info: WireInfo {
                        d_current: self.env.distance().expect("just reset"),
                        event: "none".to_string(),
                        step: 0,
                    },
                };
                (response, false)
            }
            Request::Step { action } => match self.env.step(action) {
                Ok(r) => (Response::from_step(&r), false),
                Err(EnvError::NotReset) => (Response::error("not_reset", "call reset before step"), false),
                Err(EnvError::EpisodeDone) => (Response::error("episode_done", "episode is done; call reset"), false),
                Err(e) => (Response::error("internal", e.to_string()), true),
            },
        }
    }
}

/// Runs one session until `close`, a fatal error or end of input.
pub fn serve_stream<R: BufRead, W: Write>(env: Env, reader: R, mut writer: W) -> io::Result<()> {
    let mut session = Session::new(env);
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (response, close) = session.handle_line(&line);
        writer.write_all(response.to_line().as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        if close {
            break;
        }
    }
    Ok(())
}

pub fn serve_stdio(env: Env) -> io::Result<()> {
    let stdin = io::stdin();
    let stdout = io::stdout();
    serve_stream(env, stdin.lock(), stdout.lock())
}

/// Accepts connections, each served on its own thread with an independent
/// environment forked from `template` with `seed`. With `once`, returns
/// after the first connection finishes.
pub fn serve_tcp(template: &Env, listener: TcpListener, seed: u64, once: bool) -> io::Result<()> {
    let handle = |stream: TcpStream, env: Env| -> io::Result<()> {
        let reader = BufReader::new(stream.try_clone()?);
        serve_stream(env, reader, BufWriter::new(stream))
    };
    for stream in listener.incoming() {
        let stream = stream?;
        let env = template.fork(seed);
        if once {
            return handle(stream, env);
        }
        thread::spawn(move || {
            if let Err(e) = handle(stream, env) {
                eprintln!("connection error: {e}");
            }
        });
    }
    Ok(())
}
