//! Line-delimited JSON step protocol for external controllers.
//!
//! Every line is one [`Envelope`]: `{"protocol_version":1,"type":...,"payload":{...}}`.
//!
//! Session flow, server to client unless marked:
//!
//! ```text
//! hello
//! (client) reset {seed}        -> observation
//! (client) action {values, scaled} -> step_result, then observation or episode_done
//! ... repeated for T periods, then another reset or disconnect
//! ```
//!
//! A malformed line, a wrong-length or non-finite action, or a version
//! mismatch produces `error` and ends the current episode with a failed
//! `episode_done`. A read timeout ends the session.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::Duration;

use invmgmt_core::env::{kpis, DemandContext, ObservationLayout, Segment};
use invmgmt_core::{
    Agent, CoreEnv, EpisodeConfig, EpisodeRecord, Fulfillment, InfoTier, Kpis, Observation, StepResult,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Scenario;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub protocol_version: u32,
    #[serde(flatten)]
    pub message: WireMessage,
}

impl Envelope {
    pub fn new(message: WireMessage) -> Self {
        Self {
            protocol_version: PROTOCOL_VERSION,
            message,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("wire messages serialize")
    }

    pub fn parse(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum WireMessage {
    Hello(Hello),
    Reset(Reset),
    Observation(ObservationMsg),
    Action(ActionMsg),
    StepResult(StepResultMsg),
    EpisodeDone(EpisodeDone),
    Error(ErrorMsg),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub topology: String,
    pub horizon: usize,
    pub fulfillment: Fulfillment,
    pub goodwill_enabled: bool,
    pub info_tier: InfoTier,
    pub action_dim: usize,
    /// Native upper bound per reorder edge for scaled actions.
    pub action_bounds: Vec<f64>,
    pub observation_dim: usize,
    pub layout: ObservationLayout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reset {
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationMsg {
    pub t: usize,
    pub vector: Vec<f64>,
    pub segments: Vec<Segment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<DemandContext>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionMsg {
    /// Non-finite components may be sent as `null` or as strings such as
    /// `"NaN"`; they are rejected with `non_finite_action`, not a parse error.
    #[serde(with = "lenient_values")]
    pub values: Vec<f64>,
    /// `true`: values are in `[-1, 1]` and are mapped onto `[0, bound]`.
    #[serde(default)]
    pub scaled: bool,
}

mod lenient_values {
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            if x.is_finite() {
                seq.serialize_element(x)?;
            } else {
                seq.serialize_element(&x.to_string())?;
            }
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
            Null(()),
        }
        Vec::<Repr>::deserialize(d)?
            .into_iter()
            .map(|r| match r {
                Repr::Num(v) => Ok(v),
                Repr::Null(()) => Ok(f64::NAN),
                Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResultMsg {
    #[serde(flatten)]
    pub result: StepResult,
    /// A scaled action component fell outside `[-1, 1]`.
    #[serde(default)]
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeDone {
    pub seed: u64,
    pub failed: bool,
    pub profit: Option<f64>,
    pub kpis: Option<Kpis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    MalformedJson,
    UnsupportedVersion,
    UnexpectedMessage,
    WrongLength,
    NonFiniteAction,
    Timeout,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMsg {
    pub code: ErrorCode,
    pub message: String,
}

/// Affine map of `[-1, 1]` onto `[0, bound]`; out-of-range inputs are clamped
/// and reported. Inputs must be finite.
pub fn rescale_action(scaled: &[f64], bounds: &[f64]) -> (Vec<f64>, bool) {
    let mut clamped = false;
    let native = scaled
        .iter()
        .zip(bounds)
        .map(|(&x, &b)| {
            if !(-1.0..=1.0).contains(&x) {
                clamped = true;
            }
            (x.clamp(-1.0, 1.0) + 1.0) * 0.5 * b
        })
        .collect();
    (native, clamped)
}

/// Default scaled-action bounds: twice the mean demand over the lead time
/// plus one review period, `2 · d̄ · (L_e + 1)`, where `d̄` is the mean total
/// exogenous retail demand per period. Never below 1.
pub fn default_action_bounds(cfg: &EpisodeConfig) -> Vec<f64> {
    let per_period: f64 = (0..cfg.horizon)
        .map(|t| cfg.demand.iter().filter_map(|m| m.exogenous_mean(t).ok()).sum::<f64>())
        .sum::<f64>()
        / cfg.horizon.max(1) as f64;
    cfg.topology
        .reorder_edges()
        .iter()
        .map(|e| (2.0 * per_period * (f64::from(e.lead_time) + 1.0)).max(1.0))
        .collect()
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("invalid episode configuration: {0}")]
    Config(String),
    #[error("transport: {0}")]
    Io(#[from] io::Error),
}

/// Outcome of one served episode.
#[derive(Debug, Clone)]
pub struct ServedEpisode {
    /// Seed as sent by the client.
    pub seed: u64,
    pub failed: bool,
    pub reason: Option<String>,
    pub record: EpisodeRecord,
}

/// Serves episodes of one fixed configuration.
#[derive(Debug, Clone)]
pub struct Server {
    cfg: EpisodeConfig,
    scenario: Option<Scenario>,
    bounds: Vec<f64>,
    timeout: Option<Duration>,
}

impl Server {
    pub fn new(cfg: EpisodeConfig) -> Result<Self, ServeError> {
        cfg.validate().map_err(|e| ServeError::Config(e.to_string()))?;
        let bounds = default_action_bounds(&cfg);
        Ok(Self {
            cfg,
            scenario: None,
            bounds,
            timeout: None,
        })
    }

    /// Serve a grid scenario. Client seeds are canonical seeds, mapped to
    /// stream seeds exactly as the batch runner does.
    pub fn for_scenario(scenario: &Scenario, tier: InfoTier) -> Result<Self, ServeError> {
        let mut cfg = scenario
            .episode_config()
            .map_err(|e| ServeError::Config(e.to_string()))?;
        cfg.info_tier = tier;
        let mut s = Self::new(cfg)?;
        s.scenario = Some(scenario.clone());
        Ok(s)
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = Some(timeout);
        self
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.cfg
    }

    pub fn stream_seed(&self, seed: u64) -> u64 {
        match &self.scenario {
            Some(sc) => sc.episode_seed(seed),
            None => seed,
        }
    }

    pub fn hello(&self) -> Hello {
        let layout = ObservationLayout::new(&self.cfg);
        Hello {
            scenario: self.scenario.as_ref().map(|s| s.id.clone()),
            topology: self.cfg.topology.name().to_owned(),
            horizon: self.cfg.horizon,
            fulfillment: self.cfg.fulfillment,
            goodwill_enabled: self.cfg.goodwill_enabled,
            info_tier: self.cfg.info_tier,
            action_dim: self.cfg.topology.num_reorder(),
            action_bounds: self.bounds.clone(),
            observation_dim: layout.dim,
            layout,
        }
    }

    /// Run one session: hello, then episodes until the client disconnects
    /// or goes silent for longer than the timeout.
    pub fn serve<R, W>(&self, reader: R, mut writer: W) -> Result<Vec<ServedEpisode>, ServeError>
    where
        R: BufRead + Send + 'static,
        W: Write,
    {
        let lines = spawn_line_reader(reader);
        send(&mut writer, WireMessage::Hello(self.hello()))?;
        let mut done = Vec::new();
        let mut live: Option<(u64, CoreEnv)> = None;

        loop {
            let line = match self.timeout {
                Some(d) => match lines.recv_timeout(d) {
                    Ok(l) => Some(l),
                    Err(mpsc::RecvTimeoutError::Timeout) => {
                        let msg = format!("no message within {:.3} s", d.as_secs_f64());
                        send_error(&mut writer, ErrorCode::Timeout, &msg)?;
                        if let Some((seed, env)) = live.take() {
                            done.push(fail(&mut writer, seed, env, msg)?);
                        }
                        return Ok(done);
                    }
                    Err(mpsc::RecvTimeoutError::Disconnected) => None,
                },
                None => lines.recv().ok(),
            };
            let line = match line {
                None | Some(Err(_)) => {
                    if let Some((seed, env)) = live.take() {
                        done.push(ServedEpisode {
                            seed,
                            failed: true,
                            reason: Some("client disconnected".into()),
                            record: env.into_record(),
                        });
                    }
                    return Ok(done);
                }
                Some(Ok(l)) => l,
            };
            if line.trim().is_empty() {
                continue;
            }

            let envelope = match Envelope::parse(&line) {
                Ok(e) => e,
                Err(e) => {
                    let msg = format!("malformed message: {e}");
                    send_error(&mut writer, ErrorCode::MalformedJson, &msg)?;
                    if let Some((seed, env)) = live.take() {
                        done.push(fail(&mut writer, seed, env, msg)?);
                    }
                    continue;
                }
            };
            if envelope.protocol_version != PROTOCOL_VERSION {
                let msg = format!(
                    "protocol version {} is not supported (server speaks {PROTOCOL_VERSION})",
                    envelope.protocol_version
                );
                send_error(&mut writer, ErrorCode::UnsupportedVersion, &msg)?;
                if let Some((seed, env)) = live.take() {
                    done.push(fail(&mut writer, seed, env, msg)?);
                }
                continue;
            }

            match envelope.message {
                WireMessage::Reset(Reset { seed }) => {
                    if let Some((old, env)) = live.take() {
                        done.push(fail(&mut writer, old, env, "reset before episode end".into())?);
                    }
                    let stream = self.stream_seed(seed);
                    let mut env =
                        CoreEnv::new(self.cfg.clone(), stream).map_err(|e| ServeError::Config(e.to_string()))?;
                    let obs = env.reset(stream);
                    send(&mut writer, WireMessage::Observation(observation_msg(&obs)))?;
                    live = Some((seed, env));
                }
                WireMessage::Action(action) => {
                    let Some((seed, mut env)) = live.take() else {
                        send_error(
                            &mut writer,
                            ErrorCode::UnexpectedMessage,
                            "action without an active episode",
                        )?;
                        continue;
                    };
                    let want = self.bounds.len();
                    if action.values.len() != want {
                        let msg = format!("expected {want} action values, got {}", action.values.len());
                        send_error(&mut writer, ErrorCode::WrongLength, &msg)?;
                        done.push(fail(&mut writer, seed, env, msg)?);
                        continue;
                    }
                    if let Some(i) = action.values.iter().position(|v| !v.is_finite()) {
                        let msg = format!("action component {i} is not finite");
                        send_error(&mut writer, ErrorCode::NonFiniteAction, &msg)?;
                        done.push(fail(&mut writer, seed, env, msg)?);
                        continue;
                    }
                    let (native, clamped) = if action.scaled {
                        rescale_action(&action.values, &self.bounds)
                    } else {
                        (action.values, false)
                    };
                    let (obs, result) = match env.step(&native) {
                        Ok(x) => x,
                        Err(e) => {
                            let msg = e.to_string();
                            send_error(&mut writer, ErrorCode::Internal, &msg)?;
                            done.push(fail(&mut writer, seed, env, msg)?);
                            continue;
                        }
                    };
                    send(&mut writer, WireMessage::StepResult(StepResultMsg { result, clamped }))?;
                    if env.is_done() {
                        let record = env.into_record();
                        let k = kpis(&record);
                        send(
                            &mut writer,
                            WireMessage::EpisodeDone(EpisodeDone {
                                seed,
                                failed: false,
                                profit: Some(k.profit),
                                kpis: Some(k),
                                reason: None,
                            }),
                        )?;
                        done.push(ServedEpisode {
                            seed,
                            failed: false,
                            reason: None,
                            record,
                        });
                    } else {
                        send(&mut writer, WireMessage::Observation(observation_msg(&obs)))?;
                        live = Some((seed, env));
                    }
                }
                other => {
                    let msg = format!("unexpected `{}` message from client", message_type(&other));
                    send_error(&mut writer, ErrorCode::UnexpectedMessage, &msg)?;
                }
            }
        }
    }
}

/// Accept connections on `listener`, one thread per client; stops after
/// `max_sessions` connections when given.
pub fn serve_tcp(server: Arc<Server>, listener: TcpListener, max_sessions: Option<usize>) -> io::Result<()> {
    let mut handles = Vec::new();
    for (n, stream) in listener.incoming().enumerate() {
        let stream = stream?;
        let server = server.clone();
        handles.push(std::thread::spawn(move || {
            let reader = BufReader::new(stream.try_clone()?);
            server.serve(reader, stream).map(|_| ()).map_err(io::Error::other)
        }));
        if max_sessions.is_some_and(|m| n + 1 >= m) {
            break;
        }
    }
    for h in handles {
        h.join().map_err(|_| io::Error::other("session thread panicked"))??;
    }
    Ok(())
}

pub fn message_type(m: &WireMessage) -> &'static str {
    match m {
        WireMessage::Hello(_) => "hello",
        WireMessage::Reset(_) => "reset",
        WireMessage::Observation(_) => "observation",
        WireMessage::Action(_) => "action",
        WireMessage::StepResult(_) => "step_result",
        WireMessage::EpisodeDone(_) => "episode_done",
        WireMessage::Error(_) => "error",
    }
}

fn observation_msg(obs: &Observation) -> ObservationMsg {
    ObservationMsg {
        t: obs.t,
        vector: obs.vector.clone(),
        segments: obs.layout.segments.clone(),
        context: obs.context.clone(),
    }
}

fn spawn_line_reader<R: BufRead + Send + 'static>(reader: R) -> mpsc::Receiver<io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        for line in reader.lines() {
            if tx.send(line).is_err() {
                break;
            }
        }
    });
    rx
}

fn send<W: Write>(w: &mut W, message: WireMessage) -> io::Result<()> {
    let mut line = Envelope::new(message).to_line();
    line.push('\n');
    w.write_all(line.as_bytes())?;
    w.flush()
}

fn send_error<W: Write>(w: &mut W, code: ErrorCode, message: &str) -> io::Result<()> {
    send(
        w,
        WireMessage::Error(ErrorMsg {
            code,
            message: message.to_owned(),
        }),
    )
}

fn fail<W: Write>(w: &mut W, seed: u64, env: CoreEnv, reason: String) -> io::Result<ServedEpisode> {
    send(
        w,
        WireMessage::EpisodeDone(EpisodeDone {
            seed,
            failed: true,
            profit: None,
            kpis: None,
            reason: Some(reason.clone()),
        }),
    )?;
    Ok(ServedEpisode {
        seed,
        failed: true,
        reason: Some(reason),
        record: env.into_record(),
    })
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Io(#[from] io::Error),
    #[error("bad message from server: {0}")]
    Json(#[from] serde_json::Error),
    #[error("server closed the connection")]
    Closed,
    #[error("server error {:?}: {}", .0.code, .0.message)]
    Server(ErrorMsg),
    #[error("unexpected `{0}` message")]
    Unexpected(&'static str),
    #[error("agent: {0}")]
    Agent(String),
}

/// Client side of a session.
pub struct Client<R, W> {
    reader: R,
    writer: W,
    hello: Hello,
    layout: Arc<ObservationLayout>,
}

impl Client<BufReader<TcpStream>, TcpStream> {
    pub fn connect_tcp(addr: impl std::net::ToSocketAddrs) -> Result<Self, ClientError> {
        let stream = TcpStream::connect(addr)?;
        Self::new(BufReader::new(stream.try_clone()?), stream)
    }
}

impl<R: BufRead, W: Write> Client<R, W> {
    /// Wrap a transport and read the server's hello.
    pub fn new(mut reader: R, writer: W) -> Result<Self, ClientError> {
        let hello = match read_message(&mut reader)? {
            WireMessage::Hello(h) => h,
            other => return Err(unexpected(other)),
        };
        let layout = Arc::new(hello.layout.clone());
        Ok(Self {
            reader,
            writer,
            hello,
            layout,
        })
    }

    pub fn hello(&self) -> &Hello {
        &self.hello
    }

    pub fn send(&mut self, message: WireMessage) -> Result<(), ClientError> {
        Ok(send(&mut self.writer, message)?)
    }

    pub fn recv(&mut self) -> Result<WireMessage, ClientError> {
        read_message(&mut self.reader)
    }

    /// Rebuild the in-process observation from a wire message.
    pub fn observation(&self, msg: ObservationMsg) -> Observation {
        Observation {
            t: msg.t,
            vector: msg.vector,
            layout: self.layout.clone(),
            context: msg.context,
        }
    }

    /// Play one episode with `agent` choosing native actions.
    pub fn run_episode(&mut self, agent: &mut dyn Agent, seed: u64) -> Result<EpisodeDone, ClientError> {
        agent.reset();
        self.send(WireMessage::Reset(Reset { seed }))?;
        let mut msg = self.recv()?;
        loop {
            let obs = match msg {
                WireMessage::Observation(o) => self.observation(o),
                other => return Err(unexpected(other)),
            };
            let values = agent.act(&obs).map_err(|e| ClientError::Agent(e.to_string()))?;
            self.send(WireMessage::Action(ActionMsg { values, scaled: false }))?;
            match self.recv()? {
                WireMessage::StepResult(_) => {}
                other => return Err(unexpected(other)),
            }
            msg = self.recv()?;
            if let WireMessage::EpisodeDone(d) = msg {
                return Ok(d);
            }
        }
    }
}

fn unexpected(m: WireMessage) -> ClientError {
    match m {
        WireMessage::Error(e) => ClientError::Server(e),
        other => ClientError::Unexpected(message_type(&other)),
    }
}

fn read_message<R: BufRead>(reader: &mut R) -> Result<WireMessage, ClientError> {
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(ClientError::Closed);
        }
        if !line.trim().is_empty() {
            return Ok(Envelope::parse(&line)?.message);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rescale_endpoints_and_clamp() {
        let (v, c) = rescale_action(&[-1.0, 0.0, 1.0], &[40.0, 40.0, 40.0]);
        assert_eq!(v, vec![0.0, 20.0, 40.0]);
        assert!(!c);
        let (v, c) = rescale_action(&[1.2, -3.0], &[40.0, 10.0]);
        assert_eq!(v, vec![40.0, 0.0]);
        assert!(c);
    }

    #[test]
    fn envelope_shape() {
        let line = Envelope::new(WireMessage::Reset(Reset { seed: 7 })).to_line();
        assert_eq!(line, r#"{"protocol_version":1,"type":"reset","payload":{"seed":7}}"#);
        assert_eq!(
            Envelope::parse(&line).unwrap().message,
            WireMessage::Reset(Reset { seed: 7 })
        );
    }
}
