//! Deterministic round-based simulation of `N` nodes, their clients and a
//! Byzantine adversary, for the coded protocol and the replication
//! baselines.
//!
//! Each round has a consensus phase (an ideal oracle picking one pending
//! command per machine) followed by an execution phase run on behalf of
//! every node under its own counting scope. The uncoded execution of the
//! agreed commands is the reference every delivered output is checked
//! against.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baseline::{Replication, ReplicationConfig, ReplicatedSystem};
use crate::csm::{self, client_decide, CodingConfig, Decoder, RoundResult, Setting};
use crate::error::{Error, Result};
use crate::field::counter::{self, OpCounts, Phase, Role, Scope};
use crate::field::{Fe, Field, P_NTT};
use crate::intermix::{
    self, AuditorBehavior, ClaimBasis, Corruption, Delegation, Fabrication, ReplyRule, Session, Worker, WorkerStrategy,
};
use crate::machine::{MachineKind, TransitionFunction};
use crate::poly::{DensePoly, EvalMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Csm,
    Full,
    Partial,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Csm => "csm",
            Protocol::Full => "full",
            Protocol::Partial => "partial",
        })
    }
}

impl FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csm" => Ok(Protocol::Csm),
            "full" => Ok(Protocol::Full),
            "partial" => Ok(Protocol::Partial),
            _ => Err(Error::Config(format!("unknown protocol {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelMode {
    /// Every message reaches all nodes identically.
    Broadcast,
    PointToPoint,
}

impl fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelMode::Broadcast => "broadcast",
            ChannelMode::PointToPoint => "point-to-point",
        })
    }
}

impl FromStr for ChannelMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "broadcast" => Ok(ChannelMode::Broadcast),
            "point-to-point" | "p2p" => Ok(ChannelMode::PointToPoint),
            _ => Err(Error::Config(format!("unknown channel mode {s:?}"))),
        }
    }
}

/// Delivery timing of one run. The stabilization round is fixed by the
/// seed; node logic never reads it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Timing {
    Sync,
    PartialSync { gst: u64 },
}

impl Timing {
    pub fn before_gst(&self, round: u64) -> bool {
        matches!(self, Timing::PartialSync { gst } if round < *gst)
    }
}

/// What a corrupted value becomes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValueRule {
    /// The true value plus a random nonzero offset.
    Random,
    Constant(u64),
    AddOffset(u64),
    /// All faulty nodes report evaluations of one alternative polynomial of
    /// admissible degree that also agrees with `D` honest results. Against
    /// replication: all faulty nodes report the same wrong value.
    Coordinated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    Honest,
    CorruptResult(ValueRule),
    Withhold,
    /// Different values to different receivers; a single value on a
    /// broadcast channel.
    Equivocate,
    /// Results and reports arrive after every deadline.
    Delay,
    /// Raises false alerts when elected auditor.
    FalseAudit,
    /// Corrupts delegated work when elected worker.
    DishonestWorker(ReplyRule),
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Honest => f.write_str("honest"),
            Strategy::CorruptResult(ValueRule::Random) => f.write_str("corrupt"),
            Strategy::CorruptResult(ValueRule::Constant(c)) => write!(f, "corrupt-constant:{c}"),
            Strategy::CorruptResult(ValueRule::AddOffset(c)) => write!(f, "corrupt-offset:{c}"),
            Strategy::CorruptResult(ValueRule::Coordinated) => f.write_str("coordinated"),
            Strategy::Withhold => f.write_str("withhold"),
            Strategy::Equivocate => f.write_str("equivocate"),
            Strategy::Delay => f.write_str("delay"),
            Strategy::FalseAudit => f.write_str("false-audit"),
            Strategy::DishonestWorker(r) => write!(f, "dishonest-worker:{}", reply_name(*r)),
        }
    }
}

fn reply_name(r: ReplyRule) -> &'static str {
    match r {
        ReplyRule::Truthful => "truthful",
        ReplyRule::ConsistentLeft => "consistent-left",
        ReplyRule::ConsistentRight => "consistent-right",
        ReplyRule::ConsistentSplit => "consistent-split",
        ReplyRule::Random => "random",
        ReplyRule::Nonresponsive => "nonresponsive",
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
        let num = || -> Result<u64> {
            arg.and_then(|a| a.parse().ok()).ok_or_else(|| Error::Config(format!("strategy {s:?} needs a number")))
        };
        Ok(match name {
            "honest" => Strategy::Honest,
            "corrupt" | "corrupt-random" => Strategy::CorruptResult(ValueRule::Random),
            "corrupt-constant" => Strategy::CorruptResult(ValueRule::Constant(num()?)),
            "corrupt-offset" => Strategy::CorruptResult(ValueRule::AddOffset(num()?)),
            "coordinated" => Strategy::CorruptResult(ValueRule::Coordinated),
            "withhold" => Strategy::Withhold,
            "equivocate" => Strategy::Equivocate,
            "delay" => Strategy::Delay,
            "false-audit" => Strategy::FalseAudit,
            "dishonest-worker" => {
                let rule = match arg.unwrap_or("consistent-split") {
                    "truthful" => ReplyRule::Truthful,
                    "consistent-left" => ReplyRule::ConsistentLeft,
                    "consistent-right" => ReplyRule::ConsistentRight,
                    "consistent-split" => ReplyRule::ConsistentSplit,
                    "random" => ReplyRule::Random,
                    "nonresponsive" => ReplyRule::Nonresponsive,
                    other => return Err(Error::Config(format!("unknown reply rule {other:?}"))),
                };
                Strategy::DishonestWorker(rule)
            }
            _ => return Err(Error::Config(format!("unknown adversary strategy {s:?}"))),
        })
    }
}

/// Which nodes the adversary controls.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Placement {
    Random,
    /// The lowest-numbered nodes; for partial replication, one group.
    Targeted,
    Explicit(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryModel {
    pub placement: Placement,
    /// Assigned to the faulty nodes in turn.
    pub strategies: Vec<Strategy>,
    /// Faulty nodes; defaults to the configured `b`.
    pub count: Option<usize>,
}

impl Default for AdversaryModel {
    fn default() -> Self {
        AdversaryModel { placement: Placement::Random, strategies: vec![Strategy::CorruptResult(ValueRule::Random)], count: None }
    }
}

impl AdversaryModel {
    pub fn none() -> Self {
        AdversaryModel { placement: Placement::Random, strategies: vec![Strategy::Honest], count: Some(0) }
    }

    pub fn uniform(strategy: Strategy) -> Self {
        AdversaryModel { strategies: vec![strategy], ..Self::default() }
    }

    pub fn mixed(strategies: Vec<Strategy>) -> Self {
        AdversaryModel { strategies, ..Self::default() }
    }

    pub fn with_count(mut self, count: usize) -> Self {
        self.count = Some(count);
        self
    }

    pub fn with_placement(mut self, placement: Placement) -> Self {
        self.placement = placement;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub n: usize,
    /// Machines; defaults to the most the coded protocol supports.
    pub k: Option<usize>,
    /// Degree used to pick a bundled machine when none is given.
    pub d: usize,
    pub machine: Option<MachineKind>,
    pub field: Option<Field>,
    pub fault_fraction: f64,
    /// Tolerated faults the protocol is configured for; defaults to
    /// `fault_fraction * N`.
    pub b: Option<usize>,
    pub setting: Setting,
    pub channel: ChannelMode,
    pub rounds: u64,
    pub seed: u64,
    /// Worker-based encoding, decoding and state update, verified by audits.
    pub delegated: bool,
    pub epsilon: f64,
    /// Committee membership is logged only after the audits.
    pub anonymous_auditors: bool,
    pub clients: Option<usize>,
    pub adversary: AdversaryModel,
    pub decoder: Decoder,
    /// Dense or subproduct-tree interpolation and evaluation.
    pub eval_mode: EvalMode,
    /// The consensus oracle picks the newest pending command, not the oldest.
    pub leader_influence: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            protocol: Protocol::Csm,
            n: 16,
            k: None,
            d: 1,
            machine: None,
            field: None,
            fault_fraction: 0.0,
            b: None,
            setting: Setting::Sync,
            channel: ChannelMode::Broadcast,
            rounds: 10,
            seed: 0,
            delegated: false,
            epsilon: 1e-3,
            anonymous_auditors: false,
            clients: None,
            adversary: AdversaryModel::default(),
            decoder: Decoder::Gao,
            eval_mode: EvalMode::Auto,
            leader_influence: false,
        }
    }
}

fn parse_bool(v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("expected a boolean, got {v:?}"))),
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("bad value {v:?} for {key}")))
}

impl ExperimentConfig {
    pub fn new(protocol: Protocol, n: usize) -> Self {
        ExperimentConfig { protocol, n, ..Self::default() }
    }

    /// Set one `key = value` entry of the text format.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "protocol" => self.protocol = v.parse()?,
            "n" => self.n = parse_num("n", v)?,
            "k" => self.k = Some(parse_num("k", v)?),
            "d" => self.d = parse_num("d", v)?,
            "machine" => self.machine = Some(v.parse()?),
            "field" => self.field = Some(v.parse()?),
            "fault_fraction" | "mu" => self.fault_fraction = parse_num("fault_fraction", v)?,
            "b" => self.b = Some(parse_num("b", v)?),
            "setting" | "timing" => self.setting = v.parse()?,
            "channel" => self.channel = v.parse()?,
            "rounds" | "t" => self.rounds = parse_num("rounds", v)?,
            "seed" => self.seed = parse_num("seed", v)?,
            "delegated" => self.delegated = parse_bool(v)?,
            "epsilon" => self.epsilon = parse_num("epsilon", v)?,
            "anonymous_auditors" => self.anonymous_auditors = parse_bool(v)?,
            "clients" => self.clients = Some(parse_num("clients", v)?),
            "adversary" => {
                self.adversary.strategies = v.split(',').map(str::parse).collect::<Result<_>>()?;
            }
            "faulty" => self.adversary.count = Some(parse_num("faulty", v)?),
            "placement" => {
                self.adversary.placement = match v {
                    "random" => Placement::Random,
                    "targeted" => Placement::Targeted,
                    list => Placement::Explicit(list.split(',').map(|x| parse_num("placement", x.trim())).collect::<Result<_>>()?),
                }
            }
            "decoder" => {
                self.decoder = match v {
                    "gao" => Decoder::Gao,
                    "berlekamp-welch" | "bw" => Decoder::BerlekampWelch,
                    _ => return Err(Error::Config(format!("unknown decoder {v:?}"))),
                }
            }
            "eval" | "eval_mode" => {
                self.eval_mode = match v {
                    "naive" => EvalMode::Naive,
                    "fast" => EvalMode::Fast,
                    "auto" => EvalMode::Auto,
                    t => EvalMode::AutoAt(parse_num("eval_mode", t)?),
                }
            }
            "leader_influence" => self.leader_influence = parse_bool(v)?,
            other => return Err(Error::Config(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    /// Parse the key-value text format: one `key = value` per line, `#`
    /// starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("expected key = value, got {line:?}") })?;
            cfg.set(k, v).map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::Io(e.to_string()))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("protocol = {}\nn = {}\n", self.protocol, self.n);
        if let Some(k) = self.k {
            out += &format!("k = {k}\n");
        }
        out += &format!("d = {}\n", self.d);
        if let Some(m) = self.machine {
            out += &format!("machine = {m}\n");
        }
        if let Some(f) = self.field {
            out += &format!("field = {}\n", field_spec(f));
        }
        out += &format!("fault_fraction = {}\n", self.fault_fraction);
        if let Some(b) = self.b {
            out += &format!("b = {b}\n");
        }
        out += &format!("setting = {}\nchannel = {}\nrounds = {}\nseed = {}\n", self.setting, self.channel, self.rounds, self.seed);
        out += &format!("delegated = {}\nepsilon = {}\n", self.delegated, self.epsilon);
        let strategies: Vec<String> = self.adversary.strategies.iter().map(ToString::to_string).collect();
        out += &format!("adversary = {}\n", strategies.join(","));
        out
    }
}

fn field_spec(f: Field) -> String {
    if f.is_binary() {
        format!("gf2^{}", f.characteristic_or_degree())
    } else {
        format!("prime:{}", f.characteristic_or_degree())
    }
}

/// Everything derived from a configuration before round 0.
#[derive(Clone, Debug)]
pub struct Plan {
    pub function: TransitionFunction,
    pub field: Field,
    pub n: usize,
    pub k: usize,
    pub d: usize,
    /// Faults the protocol is configured to tolerate.
    pub b: usize,
    pub byzantine: Vec<usize>,
    /// Per node; `Honest` outside the faulty set.
    pub strategies: Vec<Strategy>,
    pub timing: Timing,
}

impl ExperimentConfig {
    pub fn plan(&self) -> Result<Plan> {
        let n = self.n;
        if n == 0 || self.rounds == 0 {
            return Err(Error::Parameter("need N >= 1 and at least one round".into()));
        }
        let kind = match self.machine {
            Some(m) => m,
            None => MachineKind::for_degree(self.d)
                .ok_or_else(|| Error::Parameter(format!("no bundled machine of degree {}", self.d)))?,
        };
        let b = match self.b {
            Some(b) => b,
            None => csm::fault_count(n, self.fault_fraction)?,
        };
        // degree is fixed by the machine; the field may depend on K
        let d = kind.build(Field::prime(P_NTT)?.min_for(kind)?)?.total_degree();
        let used = match self.setting {
            Setting::Sync => 2 * b + 1,
            Setting::PartialSync => 3 * b + 1,
        };
        let k = match self.k {
            Some(k) => k,
            None => n.checked_sub(used).map(|room| room / d + 1).ok_or_else(|| {
                Error::Parameter(format!("b = {b} leaves no room for any machine at N = {n}"))
            })?,
        };
        if k == 0 {
            return Err(Error::Parameter("need K >= 1".into()));
        }
        let field = match self.field {
            Some(f) => f,
            None if kind.needs_binary_field() => {
                let m = (8..=32).find(|&m| (1u128 << m) > (n + k) as u128).expect("N is small");
                Field::binary(m)?
            }
            None => Field::prime(P_NTT)?,
        };
        let function = kind.build(field)?;
        match self.protocol {
            Protocol::Csm => csm::check_bounds(n, k, d, b, self.setting)?,
            Protocol::Partial if !n.is_multiple_of(k) => {
                return Err(Error::Parameter(format!("partial replication needs K | N, got N = {n}, K = {k}")))
            }
            _ => {}
        }
        if self.delegated {
            if self.protocol != Protocol::Csm || self.setting != Setting::Sync {
                return Err(Error::Config("delegated coding runs the coded protocol on a synchronous network".into()));
            }
            if self.channel != ChannelMode::Broadcast {
                return Err(Error::Config("audited delegation requires the broadcast channel".into()));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed_0001);
        let count = self.adversary.count.unwrap_or(b);
        if count > n {
            return Err(Error::Parameter(format!("{count} faulty nodes among {n}")));
        }
        let byzantine: Vec<usize> = match &self.adversary.placement {
            Placement::Random => {
                let mut v = sample(&mut rng, n, count).into_vec();
                v.sort_unstable();
                v
            }
            Placement::Targeted => (0..count).collect(),
            Placement::Explicit(list) => {
                if list.iter().any(|&i| i >= n) {
                    return Err(Error::Parameter("faulty node index out of range".into()));
                }
                list.clone()
            }
        };
        if self.adversary.strategies.is_empty() {
            return Err(Error::Config("adversary needs at least one strategy".into()));
        }
        let mut strategies = vec![Strategy::Honest; n];
        for (j, &i) in byzantine.iter().enumerate() {
            strategies[i] = self.adversary.strategies[j % self.adversary.strategies.len()];
        }
        let timing = match self.setting {
            Setting::Sync => Timing::Sync,
            Setting::PartialSync => Timing::PartialSync { gst: rng.gen_range(0..=self.rounds / 2) },
        };
        Ok(Plan { function, field, n, k, d, b, byzantine, strategies, timing })
    }
}

trait MinFor {
    fn min_for(self, kind: MachineKind) -> Result<Field>;
}

impl MinFor for Field {
    /// A field the machine can be built over, only to read off its degree.
    fn min_for(self, kind: MachineKind) -> Result<Field> {
        if kind.needs_binary_field() {
            Field::binary(8)
        } else {
            Ok(self)
        }
    }
}

// ---------------------------------------------------------------------------
// commands

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Submission {
    pub client: usize,
    pub round: u64,
    pub command: Vec<Fe>,
}

/// Pending commands per machine.
#[derive(Clone, Debug, Default)]
pub struct CommandPool {
    queues: Vec<VecDeque<Submission>>,
}

impl CommandPool {
    pub fn new(k: usize) -> Self {
        CommandPool { queues: vec![VecDeque::new(); k] }
    }

    pub fn submit(&mut self, machine: usize, s: Submission) {
        self.queues[machine].push_back(s);
    }

    pub fn pending(&self, machine: usize) -> &VecDeque<Submission> {
        &self.queues[machine]
    }

    pub fn machines(&self) -> usize {
        self.queues.len()
    }
}

/// Agree on one command per machine. `choose(k, pending)` lets the
/// adversary pick among the pending commands; without a pick the oldest
/// wins. Machines with nothing pending get `None` (a no-op).
pub fn consensus_oracle(
    pool: &mut CommandPool,
    mut choose: Option<&mut dyn FnMut(usize, &VecDeque<Submission>) -> usize>,
) -> Vec<Option<Submission>> {
    (0..pool.machines())
        .map(|k| {
            let q = &mut pool.queues[k];
            if q.is_empty() {
                return None;
            }
            let idx = choose.as_mut().map_or(0, |c| c(k, q)).min(q.len() - 1);
            q.remove(idx)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// event log

fn raw(v: &[Fe]) -> Vec<u64> {
    v.iter().map(Fe::value).collect()
}

fn raw2(v: &[Vec<Fe>]) -> Vec<Vec<u64>> {
    v.iter().map(|x| raw(x)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clause {
    Validity,
    Consistency,
    Correctness,
    Liveness,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub round: u64,
    pub clause: Clause,
    pub machine: Option<usize>,
    pub detail: String,
}

/// A result message as delivered; the channel stamps `sender` with the
/// origin, so the two never differ.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delivery {
    pub sender: usize,
    pub origin: usize,
    pub value: Option<Vec<u64>>,
    pub equivocated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    Header {
        protocol: Protocol,
        n: usize,
        k: usize,
        d: usize,
        b: usize,
        machine: String,
        field: String,
        setting: Setting,
        channel: ChannelMode,
        timing: Timing,
        delegated: bool,
        rounds: u64,
        seed: u64,
        byzantine: Vec<usize>,
        strategies: Vec<String>,
    },
    Submit { round: u64, machine: usize, client: usize, command: Vec<u64> },
    Consensus { round: u64, commands: Vec<Vec<u64>>, clients: Vec<Option<usize>> },
    Results { round: u64, deliveries: Vec<Delivery> },
    Worker { round: u64, phase: Phase, worker: usize, committee: Option<Vec<usize>> },
    Audit { round: u64, phase: Phase, worker: usize, accepted: bool, committee: Vec<usize>, alerts: usize },
    Reelection { round: u64, phase: Phase, banned: usize },
    Decode { round: u64, distinct_inputs: usize, tau: Vec<usize> },
    Execute { round: u64, outputs: Vec<Vec<u64>>, next_states: Vec<Vec<u64>> },
    ClientDecision { round: u64, machine: usize, client: Option<usize>, output: Option<Vec<u64>> },
    Violation(Violation),
    /// Closing record: execution-phase work per node and storage.
    Accounting { rounds_completed: u64, node_ops: Vec<PhaseOps>, state_bytes: usize, node_storage_bytes: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub events: Vec<Event>,
}

impl EventLog {
    pub fn push(&mut self, e: Event) {
        self.events.push(e);
    }

    pub fn to_json_lines(&self) -> String {
        let mut s = String::new();
        for e in &self.events {
            s += &serde_json::to_string(e).expect("event serializes");
            s.push('\n');
        }
        s
    }

    pub fn parse_json_lines(text: &str) -> Result<Self> {
        let events = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() }))
            .collect::<Result<_>>()?;
        Ok(EventLog { events })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_lines()).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn header(&self) -> Option<&Event> {
        self.events.iter().find(|e| matches!(e, Event::Header { .. }))
    }
}

// ---------------------------------------------------------------------------
// results

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseOps {
    pub rho: OpCounts,
    pub psi: OpCounts,
    pub chi: OpCounts,
}

impl PhaseOps {
    pub fn field_ops(&self) -> u64 {
        self.rho.field_ops() + self.psi.field_ops() + self.chi.field_ops()
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub plan: Plan,
    pub log: EventLog,
    pub rounds_completed: u64,
    pub violations: Vec<Violation>,
    /// Execution-phase work per node, summed over the run.
    pub node_ops: Vec<PhaseOps>,
    pub state_bytes: usize,
    pub node_storage_bytes: usize,
    /// Client-delivered outputs per completed round.
    pub outputs: Vec<Vec<Vec<Fe>>>,
    pub oracle_outputs: Vec<Vec<Vec<Fe>>>,
    pub states: Vec<Vec<Vec<Fe>>>,
    pub oracle_states: Vec<Vec<Vec<Fe>>>,
}

impl ExperimentResult {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

fn random_value<R: Rng>(f: &TransitionFunction, rng: &mut R) -> Fe {
    let field = f.field();
    if field.is_binary() {
        field.elem(rng.gen_range(0..2))
    } else {
        field.random(rng)
    }
}

fn snapshot_delta(
    before: &std::collections::BTreeMap<Scope, OpCounts>,
    after: &std::collections::BTreeMap<Scope, OpCounts>,
    n: usize,
) -> Vec<PhaseOps> {
    let mut out = vec![PhaseOps::default(); n];
    for (scope, &counts) in after {
        let Role::Node(i) = scope.role else { continue };
        if i >= n {
            continue;
        }
        let delta = counts - before.get(scope).copied().unwrap_or_default();
        match scope.phase {
            Phase::Rho => out[i].rho += delta,
            Phase::Psi => out[i].psi += delta,
            Phase::Chi => out[i].chi += delta,
            Phase::Other => out[i].rho += delta,
        }
    }
    out
}

/// Run one experiment. Deterministic in the configuration; field
/// operations of the run are read from this thread's tally.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let plan = cfg.plan()?;
    let before = counter::tally();
    let mut sim = Sim::new(cfg, plan.clone());
    let initial: Vec<Vec<Fe>> = counter::with_scope(Scope::UNSCOPED, || {
        (0..plan.k).map(|_| (0..plan.function.state_dim()).map(|_| random_value(&plan.function, &mut sim.rng)).collect()).collect()
    });
    sim.log.push(Event::Header {
        protocol: cfg.protocol,
        n: plan.n,
        k: plan.k,
        d: plan.d,
        b: plan.b,
        machine: plan.function.name().to_string(),
        field: field_spec(plan.field),
        setting: cfg.setting,
        channel: cfg.channel,
        timing: plan.timing,
        delegated: cfg.delegated,
        rounds: cfg.rounds,
        seed: cfg.seed,
        byzantine: plan.byzantine.clone(),
        strategies: plan.byzantine.iter().map(|&i| plan.strategies[i].to_string()).collect(),
    });
    let (state_bytes, node_bytes) = match cfg.protocol {
        Protocol::Csm => {
            let coding = CodingConfig::new(plan.function.clone(), plan.k, plan.n, cfg.setting, plan.b)?
                .with_decoder(cfg.decoder)
                .with_mode(cfg.eval_mode);
            let mut engine = CsmEngine::new(coding, &initial, cfg.delegated)?;
            sim.run(&initial, |sim, round, cmds| engine.round(sim, round, cmds))?;
            let bytes = plan.function.state_dim() * plan.field.element_bytes();
            (bytes, bytes)
        }
        Protocol::Full | Protocol::Partial => {
            let mode = if cfg.protocol == Protocol::Full { Replication::Full } else { Replication::Partial };
            let rc = ReplicationConfig::new(mode, plan.n, plan.k, cfg.setting, plan.function.clone())?;
            let mut sys = ReplicatedSystem::new(rc, &initial)?;
            let node_bytes = sys.node_storage_bytes();
            sim.run(&initial, |sim, round, cmds| replication_round(sim, &mut sys, round, cmds))?;
            (plan.function.state_dim() * plan.field.element_bytes(), node_bytes)
        }
    };
    let after = counter::tally();
    let node_ops = snapshot_delta(&before, &after, plan.n);
    sim.log.push(Event::Accounting {
        rounds_completed: sim.rounds_completed,
        node_ops: node_ops.clone(),
        state_bytes,
        node_storage_bytes: node_bytes,
    });
    Ok(ExperimentResult {
        config: cfg.clone(),
        plan,
        log: sim.log,
        rounds_completed: sim.rounds_completed,
        violations: sim.violations,
        node_ops,
        state_bytes,
        node_storage_bytes: node_bytes,
        outputs: sim.outputs,
        oracle_outputs: sim.oracle_outputs,
        states: sim.states,
        oracle_states: sim.oracle_states,
    })
}

/// What a round's execution phase produced.
struct Executed {
    /// Per machine, as decided by its client.
    delivered: Vec<Result<Vec<Fe>>>,
    /// Next states as held by the honest nodes.
    next_states: Vec<Vec<Fe>>,
}

struct Sim<'a> {
    cfg: &'a ExperimentConfig,
    plan: Plan,
    rng: ChaCha8Rng,
    log: EventLog,
    pool: CommandPool,
    banned: Vec<bool>,
    rounds_completed: u64,
    violations: Vec<Violation>,
    outputs: Vec<Vec<Vec<Fe>>>,
    oracle_outputs: Vec<Vec<Vec<Fe>>>,
    states: Vec<Vec<Vec<Fe>>>,
    oracle_states: Vec<Vec<Vec<Fe>>>,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a ExperimentConfig, plan: Plan) -> Self {
        let k = plan.k;
        let n = plan.n;
        Sim {
            cfg,
            plan,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            log: EventLog::default(),
            pool: CommandPool::new(k),
            banned: vec![false; n],
            rounds_completed: 0,
            violations: vec![],
            outputs: vec![],
            oracle_outputs: vec![],
            states: vec![],
            oracle_states: vec![],
        }
    }

    fn violation(&mut self, round: u64, clause: Clause, machine: Option<usize>, detail: String) {
        let v = Violation { round, clause, machine, detail };
        self.log.push(Event::Violation(v.clone()));
        self.violations.push(v);
    }

    fn is_byzantine(&self, i: usize) -> bool {
        self.plan.strategies[i] != Strategy::Honest
    }

    fn run(
        &mut self,
        initial: &[Vec<Fe>],
        mut execute: impl FnMut(&mut Self, u64, &[Vec<Fe>]) -> Result<std::result::Result<Executed, Violation>>,
    ) -> Result<()> {
        let f = self.plan.function.clone();
        let k = self.plan.k;
        let clients = self.cfg.clients.unwrap_or(k).max(1);
        let mut oracle = initial.to_vec();
        for round in 0..self.cfg.rounds {
            counter::with_scope(Scope::UNSCOPED, || {
                for m in 0..k {
                    let client = (round as usize + m) % clients;
                    let command: Vec<Fe> = (0..f.command_dim()).map(|_| random_value(&f, &mut self.rng)).collect();
                    self.log.push(Event::Submit { round, machine: m, client, command: raw(&command) });
                    self.pool.submit(m, Submission { client, round, command });
                }
            });
            let mut newest = |_: usize, q: &VecDeque<Submission>| q.len() - 1;
            let chosen =
                consensus_oracle(&mut self.pool, if self.cfg.leader_influence { Some(&mut newest) } else { None });
            let commands: Vec<Vec<Fe>> = chosen
                .iter()
                .map(|s| s.as_ref().map_or_else(|| vec![f.field().zero(); f.command_dim()], |s| s.command.clone()))
                .collect();
            self.log.push(Event::Consensus {
                round,
                commands: raw2(&commands),
                clients: chosen.iter().map(|s| s.as_ref().map(|s| s.client)).collect(),
            });
            if chosen.iter().flatten().any(|s| s.round > round) {
                self.violation(round, Clause::Validity, None, "command executed before submission".into());
                break;
            }
            let (oracle_next, oracle_out) = counter::with_scope(Scope::UNSCOPED, || csm::uncoded_round(&f, &oracle, &commands))?;
            let exec = match execute(self, round, &commands)? {
                Ok(e) => e,
                Err(v) => {
                    self.log.push(Event::Violation(v.clone()));
                    self.violations.push(v);
                    break;
                }
            };
            let mut delivered = Vec::with_capacity(k);
            for (m, d) in exec.delivered.iter().enumerate() {
                self.log.push(Event::ClientDecision {
                    round,
                    machine: m,
                    client: chosen[m].as_ref().map(|s| s.client),
                    output: d.as_ref().ok().map(|y| raw(y)),
                });
                match d {
                    Ok(y) if *y == oracle_out[m] => delivered.push(y.clone()),
                    Ok(y) => {
                        let detail = format!("delivered {:?}, expected {:?}", raw(y), raw(&oracle_out[m]));
                        self.violation(round, Clause::Correctness, Some(m), detail);
                    }
                    Err(e) => self.violation(round, Clause::Liveness, Some(m), e.to_string()),
                }
            }
            if let Some(m) = (0..k).find(|&m| exec.next_states[m] != oracle_next[m]) {
                self.violation(round, Clause::Correctness, Some(m), "stored state diverged from the reference".into());
            }
            if !self.violations.is_empty() {
                break;
            }
            self.outputs.push(delivered);
            self.oracle_outputs.push(oracle_out);
            self.states.push(exec.next_states);
            self.oracle_states.push(oracle_next.clone());
            oracle = oracle_next;
            self.rounds_completed += 1;
        }
        Ok(())
    }

    /// The value faulty node `i` sends in place of `g`, or `None`.
    fn tamper(&mut self, i: usize, g: &[Fe], alternative: Option<&[Fe]>) -> Option<Vec<Fe>> {
        let field = self.plan.field;
        counter::with_scope(Scope::UNSCOPED, || match self.plan.strategies[i] {
            Strategy::Withhold | Strategy::Delay => None,
            Strategy::CorruptResult(rule) => Some(match rule {
                ValueRule::Random => g.iter().map(|&v| v + field.random_nonzero(&mut self.rng)).collect(),
                ValueRule::Constant(c) => vec![field.elem(c); g.len()],
                ValueRule::AddOffset(c) => g.iter().map(|&v| v + field.elem(c)).collect(),
                ValueRule::Coordinated => match alternative {
                    Some(a) => a.to_vec(),
                    None => g.iter().map(|&v| v + field.one()).collect(),
                },
            }),
            Strategy::Equivocate => Some(g.iter().map(|&v| v + field.random_nonzero(&mut self.rng)).collect()),
            _ => Some(g.to_vec()),
        })
    }

    /// What client-facing report node `i` sends for a decoded output `y`.
    fn report(&mut self, i: usize, y: &[Fe]) -> Option<Vec<Fe>> {
        if !self.is_byzantine(i) {
            return Some(y.to_vec());
        }
        let coordinated = Strategy::CorruptResult(ValueRule::Coordinated);
        if self.plan.strategies[i] == coordinated {
            let one = self.plan.field.one();
            return counter::with_scope(Scope::UNSCOPED, || Some(y.iter().map(|&v| v + one).collect()));
        }
        self.tamper(i, y, None)
    }

    /// Elect a worker and committee and run `step`; on rejection ban the
    /// worker and retry, at most `N` times.
    fn with_worker<T>(
        &mut self,
        round: u64,
        phase: Phase,
        mut step: impl FnMut(&mut Worker, &Session, bool, &mut ChaCha8Rng) -> Result<Option<T>>,
    ) -> Result<Option<T>> {
        let n = self.plan.n;
        let mu = (self.plan.byzantine.len() as f64 / n as f64).min(0.49);
        for _ in 0..n {
            let eligible: Vec<usize> = (0..n).filter(|&i| !self.banned[i]).collect();
            let Some(&worker) = eligible.choose(&mut self.rng) else { break };
            let committee = intermix::elect_committee(n, mu, self.cfg.epsilon, worker, self.rng.gen())?;
            let mut session = Session::new(n, worker, &committee, phase);
            for a in &mut session.auditors {
                a.1 = match self.plan.strategies[a.0] {
                    Strategy::Honest => AuditorBehavior::Honest,
                    Strategy::FalseAudit => AuditorBehavior::FalseAlert,
                    _ => AuditorBehavior::Silent,
                };
            }
            let (strategy, dishonest) = match self.plan.strategies[worker] {
                Strategy::DishonestWorker(rule) => (WorkerStrategy::new(Corruption::Random { count: 1 }, rule), true),
                _ => (WorkerStrategy::honest(), false),
            };
            let mut w = Worker::new(strategy, self.rng.gen());
            let shown = (!self.cfg.anonymous_auditors).then(|| committee.members.clone());
            self.log.push(Event::Worker { round, phase, worker, committee: shown });
            let (result, alerts) = {
                let before = AUDIT_ALERTS.with(|c| c.replace(0));
                let r = step(&mut w, &session, dishonest, &mut self.rng)?;
                (r, AUDIT_ALERTS.with(|c| c.replace(before)))
            };
            let accepted = result.is_some();
            self.log.push(Event::Audit { round, phase, worker, accepted, committee: committee.members.clone(), alerts });
            if let Some(v) = result {
                return Ok(Some(v));
            }
            self.banned[worker] = true;
            self.log.push(Event::Reelection { round, phase, banned: worker });
        }
        Ok(None)
    }
}

thread_local! {
    static AUDIT_ALERTS: std::cell::Cell<usize> = const { std::cell::Cell::new(0) };
}

fn note_alerts(outs: &[intermix::IntermixOutcome]) {
    let raised = outs.iter().flat_map(|o| &o.transcripts).filter(|t| t.raised()).count();
    AUDIT_ALERTS.with(|c| c.set(c.get() + raised));
}

// ---------------------------------------------------------------------------
// coded protocol

struct CsmEngine {
    cfg: CodingConfig,
    deleg: Option<Delegation>,
    coded: Vec<Vec<Fe>>,
}

type RoundOutcome = Result<std::result::Result<Executed, Violation>>;

impl CsmEngine {
    fn new(cfg: CodingConfig, initial: &[Vec<Fe>], delegated: bool) -> Result<Self> {
        let coded = counter::with_scope(Scope::SETUP, || csm::encode_states(initial, &cfg))?;
        let deleg = if delegated {
            let d = Delegation::new(cfg.clone())?;
            Some(if cfg.domain().progressions().is_some() { d.with_basis(ClaimBasis::Evaluation)? } else { d })
        } else {
            None
        };
        Ok(CsmEngine { cfg, deleg, coded })
    }

    fn round(&mut self, sim: &mut Sim<'_>, round: u64, commands: &[Vec<Fe>]) -> RoundOutcome {
        let n = self.cfg.n();
        let f = self.cfg.function().clone();
        let liveness = |detail: String| Ok(Err(Violation { round, clause: Clause::Liveness, machine: None, detail }));

        // encode commands
        let coded_cmds: Vec<Vec<Fe>> = if f.command_dim() == 0 {
            vec![Vec::new(); n]
        } else if let Some(deleg) = &self.deleg {
            let got = sim.with_worker(round, Phase::Rho, |w, s, _, _| {
                let (coded, outs) = intermix::delegated_encode(deleg, commands, w, s)?;
                note_alerts(&outs);
                Ok(outs.iter().all(|o| o.accepted()).then_some(coded))
            })?;
            match got {
                Some(c) => c,
                None => return liveness("no worker produced verified coded commands".into()),
            }
        } else {
            (0..n)
                .map(|i| counter::with_scope(Scope::node(i, Phase::Rho), || csm::encode_for_node(i, commands, &self.cfg)))
                .collect()
        };

        // local execution
        let g: Vec<Vec<Fe>> = (0..n)
            .map(|i| counter::with_scope(Scope::node(i, Phase::Rho), || csm::execute_local(&self.coded[i], &coded_cmds[i], &self.cfg)))
            .collect::<Result<_>>()?;

        // adversary and network
        let alternative = self.coordinated_values(sim, &g);
        let received = self.deliver(sim, round, &g, alternative.as_deref());

        let (outputs, next_states) = match &self.deleg {
            Some(deleg) => match self.delegated_decode(sim, deleg, round, &received[0])? {
                Ok(v) => v,
                Err(detail) => return liveness(detail),
            },
            None => match self.local_decode(sim, round, &received)? {
                Ok(v) => v,
                Err(v) => return Ok(Err(v)),
            },
        };
        sim.log.push(Event::Execute { round, outputs: raw2(&outputs), next_states: raw2(&next_states) });

        // state update
        if let Some(deleg) = &self.deleg {
            let got = sim.with_worker(round, Phase::Chi, |w, s, _, _| {
                let (coded, outs) = intermix::delegated_encode(deleg, &next_states, w, s)?;
                note_alerts(&outs);
                Ok(outs.iter().all(|o| o.accepted()).then_some(coded))
            })?;
            match got {
                Some(c) => self.coded = c,
                None => return liveness("no worker produced verified coded states".into()),
            }
        } else {
            self.coded = (0..n)
                .map(|i| counter::with_scope(Scope::node(i, Phase::Chi), || csm::update_coded_state(i, &next_states, &self.cfg)))
                .collect();
        }

        let delivered = (0..self.cfg.k())
            .map(|m| {
                let reports: Vec<Vec<Fe>> = (0..n).filter_map(|i| sim.report(i, &outputs[m])).collect();
                client_decide(&reports, self.cfg.b())
            })
            .collect();
        Ok(Ok(Executed { delivered, next_states }))
    }

    /// Results of one alternative polynomial per coordinate, agreeing with
    /// the honest results on `D` honest nodes.
    fn coordinated_values(&self, sim: &mut Sim<'_>, g: &[Vec<Fe>]) -> Option<Vec<Vec<Fe>>> {
        let coordinated = Strategy::CorruptResult(ValueRule::Coordinated);
        if !sim.plan.strategies.contains(&coordinated) {
            return None;
        }
        let dom = self.cfg.domain();
        let field = self.cfg.field();
        let d = self.cfg.degree_bound();
        let honest: Vec<usize> = (0..self.cfg.n()).filter(|&i| !sim.is_byzantine(i)).take(d).collect();
        counter::with_scope(Scope::UNSCOPED, || {
            let mut vanish = DensePoly::constant(field.one());
            for &i in &honest {
                vanish = vanish.mul_naive(&DensePoly::linear_root(dom.alphas()[i]));
            }
            let mut per_node = vec![Vec::new(); self.cfg.n()];
            for c in 0..self.cfg.function().joint_dim() {
                let ys: Vec<Fe> = g.iter().map(|v| v[c]).collect();
                let h = dom.alpha_points().interpolate(&ys).ok()?;
                let alt = h.add(&vanish.scale(field.random_nonzero(&mut sim.rng)));
                for (i, y) in dom.alpha_points().evaluate(&alt).into_iter().enumerate() {
                    per_node[i].push(y);
                }
            }
            Some(per_node)
        })
    }

    /// Per receiver, the results it decodes from.
    fn deliver(&self, sim: &mut Sim<'_>, round: u64, g: &[Vec<Fe>], alt: Option<&[Vec<Fe>]>) -> Vec<Vec<Option<Vec<Fe>>>> {
        let n = self.cfg.n();
        let p2p = sim.cfg.channel == ChannelMode::PointToPoint;
        let receivers = if p2p { n } else { 1 };
        let mut per_receiver = vec![vec![None; n]; receivers];
        let mut deliveries = Vec::with_capacity(n);
        for i in 0..n {
            let equivocates = p2p && sim.plan.strategies[i] == Strategy::Equivocate;
            let first = sim.tamper(i, &g[i], alt.map(|a| a[i].as_slice()));
            for (r, slot) in per_receiver.iter_mut().enumerate() {
                slot[i] = if equivocates && r > 0 { sim.tamper(i, &g[i], None) } else { first.clone() };
            }
            deliveries.push(Delivery { sender: i, origin: i, value: first.as_ref().map(|v| raw(v)), equivocated: equivocates });
        }
        if self.cfg.setting() == Setting::PartialSync {
            // Nodes take the first N - b arrivals; faulty senders arrive
            // first, and before stabilization the adversary also picks
            // which honest results are late.
            let quorum = self.cfg.quorum();
            let (mut early, mut honest): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| sim.is_byzantine(i));
            early.retain(|&i| per_receiver[0][i].is_some());
            honest.shuffle(&mut sim.rng);
            if !sim.plan.timing.before_gst(round) {
                honest.sort_unstable();
            }
            let keep: Vec<usize> = early.into_iter().chain(honest).take(quorum).collect();
            for slot in &mut per_receiver {
                for (i, v) in slot.iter_mut().enumerate() {
                    if !keep.contains(&i) {
                        *v = None;
                    }
                }
            }
        }
        sim.log.push(Event::Results { round, deliveries });
        per_receiver
    }

    fn local_decode(
        &self,
        sim: &mut Sim<'_>,
        round: u64,
        received: &[Vec<Option<Vec<Fe>>>],
    ) -> Result<std::result::Result<(Vec<Vec<Fe>>, Vec<Vec<Fe>>), Violation>> {
        let n = self.cfg.n();
        // identical inputs decode identically; decode once and credit every
        // node holding those inputs
        let mut cache: HashMap<Vec<Option<Vec<u64>>>, (Result<RoundResult>, OpCounts)> = HashMap::new();
        let mut decoded: Vec<Option<Result<RoundResult>>> = vec![None; n];
        for i in 0..n {
            let view = &received[if received.len() == 1 { 0 } else { i }];
            let key: Vec<Option<Vec<u64>>> = view.iter().map(|v| v.as_ref().map(|x| raw(x))).collect();
            let scope = Scope::node(i, Phase::Psi);
            let res = match cache.get(&key) {
                Some((r, ops)) => {
                    counter::charge(scope, *ops);
                    r.clone()
                }
                None => {
                    let (r, ops) = counter::with_scope(scope, || counter::measure(|| csm::decode_round(view, &self.cfg)));
                    cache.insert(key, (r.clone(), ops));
                    r
                }
            };
            decoded[i] = Some(res);
        }
        let honest: Vec<usize> = (0..n).filter(|&i| !sim.is_byzantine(i)).collect();
        let Some(&first) = honest.first() else {
            return Ok(Err(Violation { round, clause: Clause::Liveness, machine: None, detail: "no honest node".into() }));
        };
        let reference = decoded[first].clone().expect("decoded");
        let reference = match reference {
            Ok(r) => r,
            Err(e) => return Ok(Err(Violation { round, clause: Clause::Liveness, machine: None, detail: e.to_string() })),
        };
        for &i in &honest {
            let same = matches!(&decoded[i], Some(Ok(r)) if r.outputs == reference.outputs && r.next_states == reference.next_states);
            if !same {
                let detail = format!("nodes {first} and {i} decoded different results");
                return Ok(Err(Violation { round, clause: Clause::Consistency, machine: None, detail }));
            }
        }
        sim.log.push(Event::Decode { round, distinct_inputs: cache.len(), tau: reference.agreement.clone() });
        Ok(Ok((reference.outputs, reference.next_states)))
    }

    fn delegated_decode(
        &self,
        sim: &mut Sim<'_>,
        deleg: &Delegation,
        round: u64,
        received: &[Option<Vec<Fe>>],
    ) -> Result<std::result::Result<(Vec<Vec<Fe>>, Vec<Vec<Fe>>), String>> {
        let jd = self.cfg.function().joint_dim();
        let k = self.cfg.k();
        let missing = received.iter().filter(|v| v.is_none()).count();
        if missing > self.cfg.b() {
            return Ok(Err(format!("{missing} results missing, more than b = {}", self.cfg.b())));
        }
        let got = sim.with_worker(round, Phase::Psi, |w, s, dishonest, rng| {
            let mut claims = Vec::with_capacity(jd);
            let mut outs = vec![];
            for c in 0..jd {
                let values: Vec<Option<Fe>> = received.iter().map(|v| v.as_ref().map(|x| x[c])).collect();
                let honest = counter::with_scope(Scope::node(s.worker, Phase::Psi), || intermix::honest_decode_claim(deleg, &values))?;
                let claim = if dishonest {
                    let fab = Fabrication::ALL[rng.gen_range(0..Fabrication::ALL.len())];
                    fab.apply(deleg, &values, &honest, rng).unwrap_or_else(|| honest.clone())
                } else {
                    honest
                };
                let v = intermix::delegated_decode(deleg, &values, &claim, w, s)?;
                outs.extend(v.checks.iter().cloned());
                if !v.accepted() {
                    note_alerts(&outs);
                    return Ok(None);
                }
                claims.push(claim);
            }
            note_alerts(&outs);
            Ok(Some(claims))
        })?;
        let Some(claims) = got else {
            return Ok(Err("no worker produced a verified decoding".into()));
        };
        let sd = self.cfg.function().state_dim();
        let mut next_states = vec![Vec::with_capacity(sd); k];
        let mut outputs = vec![Vec::with_capacity(jd - sd); k];
        for (c, claim) in claims.iter().enumerate() {
            for (m, &v) in claim.outputs.iter().enumerate() {
                if c < sd {
                    next_states[m].push(v);
                } else {
                    outputs[m].push(v);
                }
            }
        }
        sim.log.push(Event::Decode { round, distinct_inputs: 1, tau: claims.first().map(|c| c.tau.clone()).unwrap_or_default() });
        Ok(Ok((outputs, next_states)))
    }
}

// ---------------------------------------------------------------------------
// replication

fn replication_round(sim: &mut Sim<'_>, sys: &mut ReplicatedSystem, round: u64, commands: &[Vec<Fe>]) -> RoundOutcome {
    let cfg = sys.config().clone();
    let k = cfg.k();
    let mut reports: Vec<Vec<Vec<Fe>>> = vec![Vec::new(); k];
    let mut next: Vec<Option<Vec<Fe>>> = vec![None; k];
    for node in 0..cfg.n() {
        let work = counter::with_scope(Scope::node(node, Phase::Rho), || sys.node_execute(node, commands))?;
        let mut states = Vec::with_capacity(work.len());
        for (m, ns, y) in work {
            if let Some(r) = sim.report(node, &y) {
                reports[m].push(r);
            }
            if !sim.is_byzantine(node) && next[m].is_none() {
                next[m] = Some(ns.clone());
            }
            states.push(ns);
        }
        sys.node_commit(node, states);
    }
    let beta = cfg.security();
    let delivered = reports.iter().map(|r| client_decide(r, beta)).collect();
    let next_states: Vec<Vec<Fe>> = (0..k)
        .map(|m| next[m].clone().unwrap_or_else(|| sys.state_at(cfg.group(m).start, m).cloned().unwrap_or_default()))
        .collect();
    sim.log.push(Event::Execute { round, outputs: vec![], next_states: raw2(&next_states) });
    Ok(Ok(Executed { delivered, next_states }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(protocol: Protocol, n: usize) -> ExperimentConfig {
        ExperimentConfig { rounds: 6, ..ExperimentConfig::new(protocol, n) }
    }

    #[test]
    fn small_product_run_is_clean() {
        let cfg = ExperimentConfig {
            k: Some(2),
            d: 2,
            b: Some(1),
            field: Some(Field::prime(11).unwrap()),
            rounds: 10,
            ..ExperimentConfig::new(Protocol::Csm, 5)
        };
        let r = run_experiment(&cfg).unwrap();
        assert!(r.is_clean(), "{:?}", r.violations);
        assert_eq!(r.rounds_completed, 10);
        assert_eq!(r.outputs, r.oracle_outputs);
        assert_eq!(r.plan.byzantine.len(), 1);
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = ExperimentConfig { fault_fraction: 0.25, seed: 3, ..base(Protocol::Csm, 12) };
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.log.to_json_lines(), b.log.to_json_lines());
        assert_eq!(a.node_ops, b.node_ops);
        let parsed = EventLog::parse_json_lines(&a.log.to_json_lines()).unwrap();
        assert_eq!(parsed, a.log);
    }

    #[test]
    fn capacity_defaults() {
        let cfg = ExperimentConfig { fault_fraction: 0.1, d: 2, ..base(Protocol::Csm, 30) };
        let plan = cfg.plan().unwrap();
        assert_eq!((plan.k, plan.b, plan.d), (12, 3, 2));
        let cfg = ExperimentConfig { fault_fraction: 0.1, setting: Setting::PartialSync, ..base(Protocol::Csm, 30) };
        assert_eq!(cfg.plan().unwrap().k, 21);
    }

    #[test]
    fn configuration_errors() {
        let too_many = ExperimentConfig { k: Some(8), b: Some(3), ..base(Protocol::Csm, 10) };
        assert!(matches!(too_many.plan(), Err(Error::Parameter(_))));
        let p2p = ExperimentConfig { delegated: true, channel: ChannelMode::PointToPoint, ..base(Protocol::Csm, 8) };
        assert!(matches!(p2p.plan(), Err(Error::Config(_))));
        let uneven = ExperimentConfig { k: Some(3), ..base(Protocol::Partial, 8) };
        assert!(uneven.plan().is_err());
    }

    #[test]
    fn strategies_round_trip() {
        for s in [
            "honest",
            "corrupt",
            "corrupt-constant:4",
            "corrupt-offset:2",
            "coordinated",
            "withhold",
            "equivocate",
            "delay",
            "false-audit",
            "dishonest-worker:consistent-left",
        ] {
            assert_eq!(s.parse::<Strategy>().unwrap().to_string(), s);
        }
        assert!("bogus".parse::<Strategy>().is_err());
        assert!("corrupt-constant".parse::<Strategy>().is_err());
    }

    #[test]
    fn config_text_round_trip() {
        let text = "protocol = partial\nn = 12\nk = 3\nmu = 0.25 # faults\nsetting = sync\nrounds = 4\nseed = 9\nadversary = withhold,corrupt\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!((cfg.protocol, cfg.n, cfg.k, cfg.rounds), (Protocol::Partial, 12, Some(3), 4));
        assert_eq!(cfg.adversary.strategies, vec![Strategy::Withhold, Strategy::CorruptResult(ValueRule::Random)]);
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
        assert!(matches!(ExperimentConfig::parse("n = 3\nbogus = 1"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn consensus_picks() {
        let f = Field::prime(11).unwrap();
        let mut pool = CommandPool::new(2);
        pool.submit(0, Submission { client: 1, round: 0, command: vec![f.elem(3)] });
        pool.submit(0, Submission { client: 2, round: 0, command: vec![f.elem(4)] });
        let mut newest = |_: usize, q: &VecDeque<Submission>| q.len() - 1;
        let chosen = consensus_oracle(&mut pool, Some(&mut newest));
        assert_eq!(chosen[0].as_ref().unwrap().client, 2);
        assert!(chosen[1].is_none());
        assert_eq!(consensus_oracle(&mut pool, None)[0].as_ref().unwrap().client, 1);
    }

    #[test]
    fn equivocation_over_point_to_point() {
        let cfg = ExperimentConfig {
            fault_fraction: 0.2,
            channel: ChannelMode::PointToPoint,
            adversary: AdversaryModel::uniform(Strategy::Equivocate),
            ..base(Protocol::Csm, 10)
        };
        let r = run_experiment(&cfg).unwrap();
        assert!(r.is_clean(), "{:?}", r.violations);
        let distinct = r.log.events.iter().find_map(|e| match e {
            Event::Decode { distinct_inputs, .. } => Some(*distinct_inputs),
            _ => None,
        });
        assert!(distinct.unwrap() > 1);
    }

    #[test]
    fn withholding_under_partial_sync() {
        let cfg = ExperimentConfig {
            fault_fraction: 0.1,
            setting: Setting::PartialSync,
            adversary: AdversaryModel::mixed(vec![Strategy::Withhold, Strategy::CorruptResult(ValueRule::Random)]),
            ..base(Protocol::Csm, 20)
        };
        let r = run_experiment(&cfg).unwrap();
        assert!(r.is_clean(), "{:?}", r.violations);
        assert!(matches!(r.plan.timing, Timing::PartialSync { .. }));
    }

    #[test]
    fn exceeding_the_bound_is_caught() {
        // designed for b = 1 at N = 5, K = 2, d = 2, attacked by two
        let cfg = ExperimentConfig {
            k: Some(2),
            d: 2,
            b: Some(1),
            field: Some(Field::prime(97).unwrap()),
            adversary: AdversaryModel::uniform(Strategy::CorruptResult(ValueRule::Coordinated)).with_count(2),
            ..base(Protocol::Csm, 5)
        };
        let r = run_experiment(&cfg).unwrap();
        assert!(!r.is_clean());
    }

    #[test]
    fn delegated_run_with_dishonest_parties() {
        let cfg = ExperimentConfig {
            fault_fraction: 0.25,
            delegated: true,
            rounds: 4,
            adversary: AdversaryModel::mixed(vec![
                Strategy::DishonestWorker(ReplyRule::ConsistentSplit),
                Strategy::FalseAudit,
                Strategy::CorruptResult(ValueRule::Random),
            ]),
            ..base(Protocol::Csm, 16)
        };
        let r = run_experiment(&cfg).unwrap();
        assert!(r.is_clean(), "{:?}", r.violations);
        assert_eq!(r.rounds_completed, 4);
        let honest_rejected = r.log.events.iter().any(|e| {
            matches!(e, Event::Audit { worker, accepted: false, .. } if r.plan.strategies[*worker] == Strategy::Honest)
        });
        assert!(!honest_rejected);
        assert!(r.node_ops.iter().all(|o| o.field_ops() > 0));
    }

    #[test]
    fn replication_runs() {
        for p in [Protocol::Full, Protocol::Partial] {
            let cfg = ExperimentConfig { k: Some(3), fault_fraction: 0.25, ..base(p, 12) };
            let r = run_experiment(&cfg).unwrap();
            if p == Protocol::Full {
                assert!(r.is_clean(), "{:?}", r.violations);
            }
            assert_eq!(r.state_bytes * if p == Protocol::Full { 3 } else { 1 }, r.node_storage_bytes);
        }
        // a whole group of partial replication taken over
        let cfg = ExperimentConfig {
            k: Some(3),
            adversary: AdversaryModel::uniform(Strategy::CorruptResult(ValueRule::Coordinated))
                .with_count(2)
                .with_placement(Placement::Targeted),
            ..base(Protocol::Partial, 12)
        };
        assert!(!run_experiment(&cfg).unwrap().is_clean());
    }

    #[test]
    fn boolean_machine_over_binary_field() {
        let cfg = ExperimentConfig { machine: Some(MachineKind::Counter), fault_fraction: 0.125, ..base(Protocol::Csm, 16) };
        let r = run_experiment(&cfg).unwrap();
        assert!(r.plan.field.is_binary());
        assert!(r.is_clean(), "{:?}", r.violations);
    }
}
