//! Verifiable matrix-vector products.
//!
//! A *worker* computes `Y = AX` and broadcasts it. A small committee of
//! *auditors* recomputes the product; on a mismatch an auditor walks the
//! worker down one row by repeated halving until the worker either
//! contradicts itself or commits to a wrong length-one product. Everyone
//! else (the *commoners*) settles the dispute from the transcript with a
//! single field operation.
//!
//! The delegated encoding, state update and decoding steps of the coded
//! protocol are expressed as such products.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::csm::{CodingConfig, Setting};
use crate::error::{Error, Result};
use crate::field::counter::{self, Phase, Scope};
use crate::field::{Fe, Field};
use crate::linalg::Matrix;
use crate::poly::{DensePoly, EvalDomain, EvalMode, Extrapolation, PointSet};
use crate::rs::{self, NoisyCodeword};

/// A matrix known to every node. Entries must be available without field
/// arithmetic (they are tabulated during setup); `apply` may use any
/// algorithm that exploits the structure.
pub trait LinearMap {
    fn field(&self) -> Field;
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn entry(&self, r: usize, c: usize) -> Fe;

    fn apply(&self, x: &[Fe]) -> Vec<Fe> {
        (0..self.rows()).map(|r| self.partial_dot(r, 0, self.cols(), x)).collect()
    }

    /// `sum_{c in lo..hi} A[r][c] x[c]`, `2(hi - lo) - 1` operations.
    fn partial_dot(&self, r: usize, lo: usize, hi: usize, x: &[Fe]) -> Fe {
        let mut acc = self.entry(r, lo) * x[lo];
        for c in lo + 1..hi {
            acc += self.entry(r, c) * x[c];
        }
        acc
    }
}

impl LinearMap for Matrix {
    fn field(&self) -> Field {
        Matrix::field(self)
    }
    fn rows(&self) -> usize {
        Matrix::rows(self)
    }
    fn cols(&self) -> usize {
        Matrix::cols(self)
    }
    fn entry(&self, r: usize, c: usize) -> Fe {
        self.get(r, c)
    }
}

/// The Lagrange coefficient matrix `C` of a domain, applied by
/// interpolating at the `omega`s and evaluating at the `alpha`s.
#[derive(Clone, Copy)]
pub struct LagrangeMap<'a> {
    domain: &'a EvalDomain,
}

impl<'a> LagrangeMap<'a> {
    pub fn new(domain: &'a EvalDomain) -> Self {
        domain.lagrange_coeffs();
        LagrangeMap { domain }
    }
}

impl LinearMap for LagrangeMap<'_> {
    fn field(&self) -> Field {
        self.domain.field()
    }
    fn rows(&self) -> usize {
        self.domain.n()
    }
    fn cols(&self) -> usize {
        self.domain.k()
    }
    fn entry(&self, r: usize, c: usize) -> Fe {
        self.domain.lagrange_coeffs().get(r, c)
    }
    fn apply(&self, x: &[Fe]) -> Vec<Fe> {
        if let Some(e) = self.domain.extrapolation() {
            if e.has_fast_path() || self.domain.mode() != EvalMode::Fast {
                return e.apply(x, self.domain.mode());
            }
        }
        let u = self.domain.omega_points().interpolate(x).expect("one value per omega");
        self.domain.alpha_points().evaluate(&u)
    }
}

/// Rows of a Vandermonde matrix `[x_i^j]`, applied to a coefficient vector
/// by multipoint evaluation over the full point set.
pub struct PowerMap<'a> {
    table: &'a Matrix,
    points: &'a PointSet,
    rows: Option<Vec<usize>>,
}

impl LinearMap for PowerMap<'_> {
    fn field(&self) -> Field {
        self.table.field()
    }
    fn rows(&self) -> usize {
        self.rows.as_ref().map_or(self.table.rows(), Vec::len)
    }
    fn cols(&self) -> usize {
        self.table.cols()
    }
    fn entry(&self, r: usize, c: usize) -> Fe {
        let r = self.rows.as_ref().map_or(r, |idx| idx[r]);
        self.table.get(r, c)
    }
    fn apply(&self, x: &[Fe]) -> Vec<Fe> {
        let all = self.points.evaluate(&DensePoly::new(self.field(), x.to_vec()));
        match &self.rows {
            None => all,
            Some(idx) => idx.iter().map(|&i| all[i]).collect(),
        }
    }
}

/// Rows of an integer-progression extrapolation.
pub struct ProgressionMap<'a> {
    map: &'a Extrapolation,
    rows: Option<Vec<usize>>,
    mode: EvalMode,
}

impl LinearMap for ProgressionMap<'_> {
    fn field(&self) -> Field {
        self.map.field()
    }
    fn rows(&self) -> usize {
        self.rows.as_ref().map_or(self.map.targets(), Vec::len)
    }
    fn cols(&self) -> usize {
        self.map.sources()
    }
    fn entry(&self, r: usize, c: usize) -> Fe {
        let r = self.rows.as_ref().map_or(r, |idx| idx[r]);
        self.map.matrix().get(r, c)
    }
    fn apply(&self, x: &[Fe]) -> Vec<Fe> {
        match &self.rows {
            None => self.map.apply(x, self.mode),
            Some(idx) => self.map.apply_rows(x, idx, self.mode),
        }
    }
}

/// The maps a decode claim is checked against, in the claim's basis.
pub enum ClaimMap<'a> {
    Power(PowerMap<'a>),
    Progression(ProgressionMap<'a>),
}

impl LinearMap for ClaimMap<'_> {
    fn field(&self) -> Field {
        match self {
            ClaimMap::Power(m) => m.field(),
            ClaimMap::Progression(m) => m.field(),
        }
    }
    fn rows(&self) -> usize {
        match self {
            ClaimMap::Power(m) => m.rows(),
            ClaimMap::Progression(m) => m.rows(),
        }
    }
    fn cols(&self) -> usize {
        match self {
            ClaimMap::Power(m) => m.cols(),
            ClaimMap::Progression(m) => m.cols(),
        }
    }
    fn entry(&self, r: usize, c: usize) -> Fe {
        match self {
            ClaimMap::Power(m) => m.entry(r, c),
            ClaimMap::Progression(m) => m.entry(r, c),
        }
    }
    fn apply(&self, x: &[Fe]) -> Vec<Fe> {
        match self {
            ClaimMap::Power(m) => m.apply(x),
            ClaimMap::Progression(m) => m.apply(x),
        }
    }
}

// ---------------------------------------------------------------------------
// committee

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditCommittee {
    pub members: Vec<usize>,
    pub size: usize,
    pub seed: u64,
}

/// Smallest `J` with `mu^J <= eps`; 1 when `mu = 0`.
pub fn committee_size(mu: f64, eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Parameter(format!("committee failure probability {eps} outside (0, 1)")));
    }
    if !(0.0..0.5).contains(&mu) {
        return Err(Error::Parameter(format!("adversarial fraction {mu} outside [0, 1/2)")));
    }
    let (mut j, mut p) = (1, mu);
    while p > eps {
        j += 1;
        p *= mu;
    }
    Ok(j)
}

/// Draw `J` auditors uniformly without replacement from the nodes other
/// than `worker`, using the seeded beacon. Capped at `n - 1` members.
pub fn elect_committee(n: usize, mu: f64, eps: f64, worker: usize, seed: u64) -> Result<AuditCommittee> {
    let j = committee_size(mu, eps)?;
    if n < 2 || worker >= n {
        return Err(Error::Parameter(format!("cannot elect auditors among {n} nodes besides worker {worker}")));
    }
    let size = j.min(n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut members: Vec<usize> =
        sample(&mut rng, n - 1, size).into_iter().map(|i| if i >= worker { i + 1 } else { i }).collect();
    members.sort_unstable();
    Ok(AuditCommittee { members, size, seed })
}

// ---------------------------------------------------------------------------
// worker

/// How a worker tampers with the product it broadcasts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Corruption {
    None,
    /// Overwrite the listed rows.
    Entries(Vec<(usize, Fe)>),
    /// Add a random nonzero offset to this many random rows.
    Random { count: usize },
    OffByOne { row: usize },
}

/// How a worker answers the halving queries of an audit. `parent` is the
/// value the worker previously committed to for the queried range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReplyRule {
    Truthful,
    /// Lie on the left half so that the halves still sum to `parent`.
    ConsistentLeft,
    ConsistentRight,
    /// A random split of `parent`.
    ConsistentSplit,
    Random,
    Nonresponsive,
}

impl ReplyRule {
    pub const ALL: [ReplyRule; 6] = [
        ReplyRule::Truthful,
        ReplyRule::ConsistentLeft,
        ReplyRule::ConsistentRight,
        ReplyRule::ConsistentSplit,
        ReplyRule::Random,
        ReplyRule::Nonresponsive,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkerStrategy {
    pub corruption: Corruption,
    pub reply: ReplyRule,
}

impl WorkerStrategy {
    pub fn honest() -> Self {
        WorkerStrategy { corruption: Corruption::None, reply: ReplyRule::Truthful }
    }

    pub fn new(corruption: Corruption, reply: ReplyRule) -> Self {
        WorkerStrategy { corruption, reply }
    }

    pub fn is_honest(&self) -> bool {
        self.corruption == Corruption::None && self.reply == ReplyRule::Truthful
    }
}

/// Anything that answers halving queries: `row`, ranges `lo..mid` and
/// `mid..hi`.
pub trait Responder {
    #[allow(clippy::too_many_arguments)]
    fn split(&mut self, map: &dyn LinearMap, x: &[Fe], row: usize, lo: usize, mid: usize, hi: usize, parent: Fe)
        -> Option<(Fe, Fe)>;
}

pub struct Worker {
    pub strategy: WorkerStrategy,
    rng: ChaCha8Rng,
}

impl Worker {
    pub fn new(strategy: WorkerStrategy, seed: u64) -> Self {
        Worker { strategy, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn honest() -> Self {
        Self::new(WorkerStrategy::honest(), 0)
    }

    /// The product the worker broadcasts.
    pub fn compute(&mut self, map: &dyn LinearMap, x: &[Fe]) -> Vec<Fe> {
        let mut y = map.apply(x);
        let field = map.field();
        match &self.strategy.corruption {
            Corruption::None => {}
            Corruption::Entries(list) => {
                for &(r, v) in list {
                    if r < y.len() {
                        y[r] = v;
                    }
                }
            }
            Corruption::Random { count } => {
                let count = (*count).min(y.len());
                for r in sample(&mut self.rng, y.len(), count) {
                    let delta = field.random_nonzero(&mut self.rng);
                    y[r] = counter::with_scope(Scope::UNSCOPED, || y[r] + delta);
                }
            }
            Corruption::OffByOne { row } => {
                if *row < y.len() {
                    y[*row] = counter::with_scope(Scope::UNSCOPED, || y[*row] + field.one());
                }
            }
        }
        y
    }
}

impl Responder for Worker {
    fn split(&mut self, map: &dyn LinearMap, x: &[Fe], row: usize, lo: usize, mid: usize, hi: usize, parent: Fe)
        -> Option<(Fe, Fe)> {
        let field = map.field();
        Some(match self.strategy.reply {
            ReplyRule::Truthful => (map.partial_dot(row, lo, mid, x), map.partial_dot(row, mid, hi, x)),
            ReplyRule::ConsistentLeft => {
                let r = map.partial_dot(row, mid, hi, x);
                (parent - r, r)
            }
            ReplyRule::ConsistentRight => {
                let l = map.partial_dot(row, lo, mid, x);
                (l, parent - l)
            }
            ReplyRule::ConsistentSplit => {
                let l = field.random(&mut self.rng);
                (l, parent - l)
            }
            ReplyRule::Random => (field.random(&mut self.rng), field.random(&mut self.rng)),
            ReplyRule::Nonresponsive => return None,
        })
    }
}

/// The broadcast product of a worker following `strategy`.
pub fn worker_matvec<R: Rng>(map: &dyn LinearMap, x: &[Fe], strategy: &WorkerStrategy, rng: &mut R) -> Vec<Fe> {
    Worker::new(strategy.clone(), rng.gen()).compute(map, x)
}

// ---------------------------------------------------------------------------
// auditing

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AuditorBehavior {
    Honest,
    /// Reports success without checking anything.
    Silent,
    /// Raises an alert regardless of the product.
    FalseAlert,
    /// Raises an alert whose transcript does not follow the protocol.
    MalformedAlert,
    /// Interrogates the worker without cause, then reports success.
    UnnecessaryAudit,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditLevel {
    pub lo: usize,
    pub mid: usize,
    pub hi: usize,
    /// The worker's earlier commitment for `lo..hi`.
    pub claim: Fe,
    /// The worker's answers for `lo..mid` and `mid..hi`.
    pub reply: Option<(Fe, Fe)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Alert {
    None,
    Inconsistency,
    FinalMismatch,
    Nonresponsive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditTranscript {
    pub auditor: usize,
    pub row: Option<usize>,
    /// One-based row index followed by a 1 (left) or 2 (right) per level
    /// that was descended.
    pub path: Vec<usize>,
    pub levels: Vec<AuditLevel>,
    pub alert: Alert,
}

impl AuditTranscript {
    fn clean(auditor: usize) -> Self {
        AuditTranscript { auditor, row: None, path: vec![], levels: vec![], alert: Alert::None }
    }

    pub fn raised(&self) -> bool {
        self.alert != Alert::None
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })
    }
}

fn scoped<R>(scope: Option<Scope>, f: impl FnOnce() -> R) -> R {
    match scope {
        Some(s) => counter::with_scope(s, f),
        None => f(),
    }
}

/// Where the work of each party is charged. `None` leaves the current scope.
#[derive(Clone, Copy, Debug, Default)]
struct Charges {
    worker: Option<Scope>,
    auditor: Option<Scope>,
}

/// Audit `claimed` as an honest auditor.
pub fn audit(map: &dyn LinearMap, x: &[Fe], claimed: &[Fe], worker: &mut dyn Responder) -> Result<AuditTranscript> {
    check_dims(map, x, claimed)?;
    Ok(audit_as(map, x, claimed, worker, 0, AuditorBehavior::Honest, Charges::default()))
}

fn audit_as(
    map: &dyn LinearMap,
    x: &[Fe],
    claimed: &[Fe],
    worker: &mut dyn Responder,
    auditor: usize,
    behavior: AuditorBehavior,
    charges: Charges,
) -> AuditTranscript {
    let mut t = AuditTranscript::clean(auditor);
    let row = match behavior {
        AuditorBehavior::Silent => return t,
        AuditorBehavior::MalformedAlert => {
            t.row = Some(map.rows());
            t.path = vec![map.rows() + 1];
            t.alert = Alert::FinalMismatch;
            return t;
        }
        AuditorBehavior::FalseAlert => 0,
        AuditorBehavior::Honest | AuditorBehavior::UnnecessaryAudit => {
            let y = scoped(charges.auditor, || {
                let y = map.apply(x);
                counter::record_comparisons(y.len() as u64);
                y
            });
            match y.iter().zip(claimed).position(|(a, b)| a != b) {
                Some(i) => i,
                None if behavior == AuditorBehavior::Honest => return t,
                None => 0,
            }
        }
    };
    t.row = Some(row);
    t.path.push(row + 1);
    let (mut lo, mut hi, mut claim) = (0, map.cols(), claimed[row]);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let reply = scoped(charges.worker, || worker.split(map, x, row, lo, mid, hi, claim));
        t.levels.push(AuditLevel { lo, mid, hi, claim, reply });
        let Some((l, r)) = reply else {
            t.alert = Alert::Nonresponsive;
            return t;
        };
        match behavior {
            AuditorBehavior::FalseAlert => {
                t.alert = Alert::Inconsistency;
                return t;
            }
            AuditorBehavior::UnnecessaryAudit => {
                scoped(charges.auditor, || {
                    let _ = (map.partial_dot(row, lo, mid, x), map.partial_dot(row, mid, hi, x));
                });
                t.path.push(1);
                (hi, claim) = (mid, l);
                continue;
            }
            _ => {}
        }
        let step = scoped(charges.auditor, || {
            counter::record_comparisons(1);
            if l + r != claim {
                return None;
            }
            let (tl, tr) = (map.partial_dot(row, lo, mid, x), map.partial_dot(row, mid, hi, x));
            counter::record_comparisons(1);
            Some(if l != tl { 1 } else { 2 + usize::from(r == tr) })
        });
        match step {
            None => {
                t.alert = Alert::Inconsistency;
                return t;
            }
            Some(1) => (hi, claim) = (mid, l),
            Some(_) => (lo, claim) = (mid, r),
        }
        t.path.push(if lo == mid { 2 } else { 1 });
    }
    t.alert = match behavior {
        AuditorBehavior::UnnecessaryAudit => {
            t.path.clear();
            t.row = None;
            t.levels.clear();
            Alert::None
        }
        _ => Alert::FinalMismatch,
    };
    t
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerdictReason {
    AllAuditorsTrue,
    /// One-based level at which the worker's halves failed to add up.
    InconsistencyAtLevel(usize),
    FinalScalarMismatch,
    WorkerNonresponsive,
    AuditorAlertDismissed,
    TranscriptRejected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    /// Whether the worker's product stands.
    pub accepted: bool,
    pub reason: VerdictReason,
}

impl Verdict {
    fn accept(reason: VerdictReason) -> Self {
        Verdict { accepted: true, reason }
    }

    fn reject(reason: VerdictReason) -> Self {
        Verdict { accepted: false, reason }
    }
}

/// Settle one transcript. Only the equality at the last step is
/// re-evaluated, so at most one field operation is performed.
pub fn commoner_check(t: &AuditTranscript, map: &dyn LinearMap, x: &[Fe], claimed: &[Fe]) -> Verdict {
    if t.alert == Alert::None {
        return Verdict::accept(VerdictReason::AllAuditorsTrue);
    }
    let rejected = Verdict::accept(VerdictReason::TranscriptRejected);
    let Some(row) = t.row.filter(|&r| r < map.rows() && r < claimed.len()) else {
        return rejected;
    };
    let descended = match t.alert {
        Alert::FinalMismatch => t.levels.len(),
        _ if t.levels.is_empty() => return rejected,
        _ => t.levels.len() - 1,
    };
    if t.path.len() != descended + 1 || t.path[0] != row + 1 || x.len() != map.cols() {
        return rejected;
    }
    let (mut lo, mut hi, mut claim) = (0, map.cols(), claimed[row]);
    for (j, level) in t.levels.iter().enumerate() {
        counter::record_comparisons(1);
        if level.lo != lo || level.hi != hi || hi - lo < 2 || level.mid != lo + (hi - lo) / 2 || level.claim != claim {
            return rejected;
        }
        if j < descended {
            let Some((l, r)) = level.reply else { return rejected };
            match t.path[j + 1] {
                1 => (hi, claim) = (level.mid, l),
                2 => (lo, claim) = (level.mid, r),
                _ => return rejected,
            }
        }
    }
    counter::record_comparisons(1);
    let last = t.levels.last();
    match t.alert {
        Alert::Nonresponsive => match last.and_then(|l| l.reply) {
            None => Verdict::reject(VerdictReason::WorkerNonresponsive),
            Some(_) => rejected,
        },
        Alert::Inconsistency => match last.and_then(|l| l.reply) {
            Some((l, r)) if l + r != claim => Verdict::reject(VerdictReason::InconsistencyAtLevel(t.levels.len())),
            Some(_) => Verdict::accept(VerdictReason::AuditorAlertDismissed),
            None => rejected,
        },
        Alert::FinalMismatch => {
            if hi - lo != 1 {
                rejected
            } else if map.entry(row, lo) * x[lo] != claim {
                Verdict::reject(VerdictReason::FinalScalarMismatch)
            } else {
                Verdict::accept(VerdictReason::AuditorAlertDismissed)
            }
        }
        Alert::None => unreachable!(),
    }
}

/// A commoner's decision over all transcripts: reject on the first
/// convincing alert, otherwise accept.
pub fn commoner_decide(ts: &[AuditTranscript], map: &dyn LinearMap, x: &[Fe], claimed: &[Fe]) -> Verdict {
    let mut out = Verdict::accept(VerdictReason::AllAuditorsTrue);
    for t in ts.iter().filter(|t| t.raised()) {
        let v = commoner_check(t, map, x, claimed);
        if !v.accepted {
            return v;
        }
        if out.reason == VerdictReason::AllAuditorsTrue {
            out = v;
        }
    }
    out
}

/// Who takes part in one verification and under which phase their work is
/// counted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Session {
    pub worker: usize,
    pub auditors: Vec<(usize, AuditorBehavior)>,
    pub commoners: Vec<usize>,
    pub phase: Phase,
}

impl Session {
    /// All committee members honest; everyone else is a commoner.
    pub fn new(n: usize, worker: usize, committee: &AuditCommittee, phase: Phase) -> Self {
        let auditors = committee.members.iter().map(|&a| (a, AuditorBehavior::Honest)).collect();
        let commoners = (0..n).filter(|&i| i != worker && !committee.members.contains(&i)).collect();
        Session { worker, auditors, commoners, phase }
    }

    pub fn with_behavior(mut self, auditor: usize, behavior: AuditorBehavior) -> Self {
        for a in &mut self.auditors {
            if a.0 == auditor {
                a.1 = behavior;
            }
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntermixOutcome {
    pub claimed: Vec<Fe>,
    pub transcripts: Vec<AuditTranscript>,
    pub verdict: Verdict,
}

impl IntermixOutcome {
    pub fn accepted(&self) -> bool {
        self.verdict.accepted
    }
}

fn check_dims(map: &dyn LinearMap, x: &[Fe], claimed: &[Fe]) -> Result<()> {
    if x.len() != map.cols() || claimed.len() != map.rows() || map.cols() == 0 {
        return Err(Error::Parameter(format!(
            "{}x{} map with a {}-vector and a {}-entry claim",
            map.rows(),
            map.cols(),
            x.len(),
            claimed.len()
        )));
    }
    Ok(())
}

/// Verify a claimed `map * x`: every auditor audits, every commoner
/// decides. The returned verdict is the commoners' (all reach the same).
pub fn verify_claim(
    map: &dyn LinearMap,
    x: &[Fe],
    claimed: Vec<Fe>,
    worker: &mut dyn Responder,
    session: &Session,
) -> Result<IntermixOutcome> {
    check_dims(map, x, &claimed)?;
    let worker_scope = Some(Scope::node(session.worker, session.phase));
    let transcripts: Vec<AuditTranscript> = session
        .auditors
        .iter()
        .map(|&(a, behavior)| {
            let charges = Charges { worker: worker_scope, auditor: Some(Scope::node(a, session.phase)) };
            audit_as(map, x, &claimed, worker, a, behavior, charges)
        })
        .collect();
    let mut verdict = None;
    for &c in &session.commoners {
        let v = counter::with_scope(Scope::node(c, session.phase), || commoner_decide(&transcripts, map, x, &claimed));
        verdict.get_or_insert(v);
    }
    let verdict = verdict.unwrap_or_else(|| commoner_decide(&transcripts, map, x, &claimed));
    Ok(IntermixOutcome { claimed, transcripts, verdict })
}

/// The worker computes `map * x` and the session verifies it.
pub fn run_intermix(map: &dyn LinearMap, x: &[Fe], worker: &mut Worker, session: &Session) -> Result<IntermixOutcome> {
    check_dims(map, x, &vec![map.field().zero(); map.rows()])?;
    let claimed = counter::with_scope(Scope::node(session.worker, session.phase), || worker.compute(map, x));
    verify_claim(map, x, claimed, worker, session)
}

/// Worst-case operation counts, with `c(AX)` the cost of one product.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostBound {
    pub products: u64,
    pub localization: u64,
    pub commoners: u64,
    pub total: u64,
}

/// `N(2K - 1)`, a plain matrix-vector product.
pub fn matvec_cost(n: usize, k: usize) -> u64 {
    (n * (2 * k).saturating_sub(1)) as u64
}

/// `(J+1)c(AX) + 8·audits·K + 3·audits·log2 K + N - J - 1`; the worst case
/// has every one of the `J` auditors querying the worker.
pub fn intermix_cost(j: usize, k: usize, n: usize, audits: usize, c_ax: u64) -> CostBound {
    let log = k.next_power_of_two().trailing_zeros() as u64;
    let products = (j as u64 + 1) * c_ax;
    let localization = 8 * (audits * k) as u64 + 3 * audits as u64 * log;
    let commoners = n.saturating_sub(j + 1) as u64;
    CostBound { products, localization, commoners, total: products + localization + commoners }
}

// ---------------------------------------------------------------------------
// delegated coding

/// Tables the delegated steps verify against: the powers of every `alpha`
/// and `omega` up to the composite degree.
/// How a decode claim describes the decoded polynomial.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClaimBasis {
    /// Coefficients `b_0..b_D`.
    #[default]
    Monomial,
    /// Values at the first `D + 1` node points; needs integer-run points in
    /// a prime field, and makes every check an extrapolation.
    Evaluation,
}

pub struct Delegation {
    cfg: CodingConfig,
    basis: ClaimBasis,
    v_alpha: Matrix,
    v_omega: Matrix,
    /// Evaluation basis: first `D + 1` alphas to all alphas, and to omegas.
    to_alpha: Option<Extrapolation>,
    to_omega: Option<Extrapolation>,
}

impl Delegation {
    pub fn new(cfg: CodingConfig) -> Result<Self> {
        if cfg.setting() != Setting::Sync {
            return Err(Error::Config("delegated coding needs a synchronous network".into()));
        }
        let dom = cfg.domain();
        let cols = cfg.degree_bound() + 1;
        let (v_alpha, v_omega) = counter::with_scope(Scope::SETUP, || {
            dom.lagrange_coeffs();
            dom.omega_points();
            dom.alpha_points();
            (Matrix::vandermonde(dom.field(), dom.alphas(), cols), Matrix::vandermonde(dom.field(), dom.omegas(), cols))
        });
        Ok(Delegation { cfg, basis: ClaimBasis::Monomial, v_alpha, v_omega, to_alpha: None, to_omega: None })
    }

    pub fn with_basis(mut self, basis: ClaimBasis) -> Result<Self> {
        if basis == ClaimBasis::Evaluation {
            let dom = self.cfg.domain();
            let (w, a) = dom
                .progressions()
                .ok_or_else(|| Error::Config("evaluation-basis claims need integer-run points in a prime field".into()))?;
            let m = self.cfg.degree_bound() + 1;
            self.to_alpha = Some(Extrapolation::new(dom.field(), a, m, a, dom.n())?);
            self.to_omega = Some(Extrapolation::new(dom.field(), a, m, w, dom.k())?);
        }
        self.basis = basis;
        Ok(self)
    }

    pub fn basis(&self) -> ClaimBasis {
        self.basis
    }

    /// Claim coordinates of a polynomial of degree at most `D`.
    pub fn claim_coords(&self, p: &DensePoly) -> Vec<Fe> {
        let m = self.cfg.degree_bound() + 1;
        match self.basis {
            ClaimBasis::Monomial => {
                let mut c = p.coeffs().to_vec();
                c.resize(m, self.cfg.field().zero());
                c
            }
            ClaimBasis::Evaluation => self.cfg.domain().alphas()[..m].iter().map(|&x| p.eval(x)).collect(),
        }
    }

    /// The polynomial a claim describes.
    pub fn claim_poly(&self, coords: &[Fe]) -> Result<DensePoly> {
        match self.basis {
            ClaimBasis::Monomial => Ok(DensePoly::new(self.cfg.field(), coords.to_vec())),
            ClaimBasis::Evaluation => {
                let pts: Vec<(Fe, Fe)> = self.cfg.domain().alphas().iter().copied().zip(coords.iter().copied()).collect();
                crate::poly::interpolate(&pts, EvalMode::Naive)
            }
        }
    }

    pub fn config(&self) -> &CodingConfig {
        &self.cfg
    }

    pub fn encoding_map(&self) -> LagrangeMap<'_> {
        LagrangeMap::new(self.cfg.domain())
    }

    /// `V_tau`: claim coordinates to the values at the alphas listed in
    /// `tau`; the rows of `[alpha_i^j]` in the monomial basis.
    pub fn restricted_vandermonde(&self, tau: &[usize]) -> ClaimMap<'_> {
        match &self.to_alpha {
            Some(e) => ClaimMap::Progression(ProgressionMap { map: e, rows: Some(tau.to_vec()), mode: self.cfg.domain().mode() }),
            None => ClaimMap::Power(PowerMap {
                table: &self.v_alpha,
                points: self.cfg.domain().alpha_points(),
                rows: Some(tau.to_vec()),
            }),
        }
    }

    /// `Omega`: claim coordinates to per-machine values.
    pub fn output_map(&self) -> ClaimMap<'_> {
        match &self.to_omega {
            Some(e) => ClaimMap::Progression(ProgressionMap { map: e, rows: None, mode: self.cfg.domain().mode() }),
            None => ClaimMap::Power(PowerMap { table: &self.v_omega, points: self.cfg.domain().omega_points(), rows: None }),
        }
    }

    /// Smallest agreement set that certifies uniqueness among `present`
    /// received values: `ceil((present + D + 1) / 2)`.
    pub fn tau_bound(&self, present: usize) -> usize {
        (present + self.cfg.degree_bound() + 2) / 2
    }
}

/// Encode one coordinate of `K` vectors (states or commands) through the
/// worker; `vectors[k][c]`. Stops at the first rejected coordinate.
pub fn delegated_encode(
    deleg: &Delegation,
    vectors: &[Vec<Fe>],
    worker: &mut Worker,
    session: &Session,
) -> Result<(Vec<Vec<Fe>>, Vec<IntermixOutcome>)> {
    let cfg = deleg.config();
    if vectors.len() != cfg.k() {
        return Err(Error::Parameter(format!("expected {} vectors, got {}", cfg.k(), vectors.len())));
    }
    let dim = vectors[0].len();
    let map = deleg.encoding_map();
    let mut coded = vec![Vec::with_capacity(dim); cfg.n()];
    let mut outcomes = Vec::with_capacity(dim);
    for c in 0..dim {
        let x: Vec<Fe> = vectors.iter().map(|v| v[c]).collect();
        let out = run_intermix(&map, &x, worker, session)?;
        let ok = out.accepted();
        for (i, y) in out.claimed.iter().enumerate() {
            coded[i].push(*y);
        }
        outcomes.push(out);
        if !ok {
            break;
        }
    }
    Ok((coded, outcomes))
}

/// The worker's broadcast after decoding one coordinate: coordinates `b`
/// of the composite polynomial in the claim basis (length `D + 1`), an
/// agreement set `tau`, and the per-machine values `Omega * b`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeClaim {
    pub coeffs: Vec<Fe>,
    pub tau: Vec<usize>,
    pub outputs: Vec<Fe>,
}

/// What an honest worker broadcasts for one coordinate of the results.
pub fn honest_decode_claim(deleg: &Delegation, values: &[Option<Fe>]) -> Result<DecodeClaim> {
    let cfg = deleg.config();
    let dom = cfg.domain();
    let d = cfg.degree_bound();
    let missing = values.iter().filter(|v| v.is_none()).count();
    if missing > cfg.b() {
        return Err(Error::DecodeFailure(format!("{missing} results missing, budget {}", cfg.b())));
    }
    if let (Some(e), Some(window)) = (&deleg.to_alpha, values[..=d].iter().copied().collect::<Option<Vec<Fe>>>()) {
        // extend the first D + 1 values; if that already agrees with enough
        // results it is the unique decoding
        let ext = e.apply(&window, dom.mode());
        let tau: Vec<usize> = (0..values.len()).filter(|&i| values[i] == Some(ext[i])).collect();
        if tau.len() + cfg.b() >= cfg.n() {
            let outputs = deleg.output_map().apply(&window);
            return Ok(DecodeClaim { coeffs: window, tau, outputs });
        }
    }
    // Missing values enter as zeros and count against the error budget,
    // which keeps the precomputed tree over all alphas usable.
    let filled: Vec<Fe> = values.iter().map(|v| v.unwrap_or(cfg.field().zero())).collect();
    let cw = NoisyCodeword::complete(dom.alphas().to_vec(), filled, d, cfg.b())?;
    let res = rs::decode_gao_with(&cw, dom.alpha_points())?;
    let tau: Vec<usize> = res.agreement.into_iter().filter(|&i| values[i].is_some()).collect();
    let coeffs = deleg.claim_coords(&res.poly);
    let outputs = deleg.output_map().apply(&coeffs);
    Ok(DecodeClaim { coeffs, tau, outputs })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DecodeRejection {
    MalformedClaim,
    TauTooSmall { size: usize, bound: usize },
    Interpolation(Verdict),
    Outputs(Verdict),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeVerdict {
    pub rejection: Option<DecodeRejection>,
    pub checks: Vec<IntermixOutcome>,
}

impl DecodeVerdict {
    pub fn accepted(&self) -> bool {
        self.rejection.is_none()
    }
}

/// Verify a decode claim for one coordinate: shape and size of `tau`
/// without interaction, then `V_tau b = g_tau` and `outputs = Omega b`.
pub fn delegated_decode(
    deleg: &Delegation,
    values: &[Option<Fe>],
    claim: &DecodeClaim,
    worker: &mut dyn Responder,
    session: &Session,
) -> Result<DecodeVerdict> {
    let cfg = deleg.config();
    if values.len() != cfg.n() {
        return Err(Error::Parameter(format!("expected {} results, got {}", cfg.n(), values.len())));
    }
    let reject = |r| Ok(DecodeVerdict { rejection: Some(r), checks: vec![] });
    let mut seen = HashSet::new();
    let well_formed = claim.coeffs.len() == cfg.degree_bound() + 1
        && claim.outputs.len() == cfg.k()
        && claim.tau.iter().all(|&i| i < values.len() && values[i].is_some() && seen.insert(i));
    if !well_formed {
        return reject(DecodeRejection::MalformedClaim);
    }
    let present = values.iter().filter(|v| v.is_some()).count();
    let bound = deleg.tau_bound(present);
    if claim.tau.len() < bound {
        return reject(DecodeRejection::TauTooSmall { size: claim.tau.len(), bound });
    }
    let g_tau: Vec<Fe> = claim.tau.iter().map(|&i| values[i].expect("checked present")).collect();
    let first = verify_claim(&deleg.restricted_vandermonde(&claim.tau), &claim.coeffs, g_tau, worker, session)?;
    if !first.accepted() {
        let v = first.verdict;
        return Ok(DecodeVerdict { rejection: Some(DecodeRejection::Interpolation(v)), checks: vec![first] });
    }
    let second = verify_claim(&deleg.output_map(), &claim.coeffs, claim.outputs.clone(), worker, session)?;
    let rejection = (!second.accepted()).then_some(DecodeRejection::Outputs(second.verdict));
    Ok(DecodeVerdict { rejection, checks: vec![first, second] })
}

/// Ways a dishonest worker can misreport a decoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fabrication {
    /// Perturb one coefficient; outputs consistent with the wrong `b`.
    WrongCoefficients,
    /// A different polynomial fitted through `D + 1` received values,
    /// with `tau` padded up to the size bound.
    FittedTau,
    ShortTau,
    WrongOutputs,
    /// Every present index, corrupted ones included.
    CorruptIndicesInTau,
    DuplicateTau,
    OutOfRangeTau,
    ExcessDegree,
}

impl Fabrication {
    pub const ALL: [Fabrication; 8] = [
        Fabrication::WrongCoefficients,
        Fabrication::FittedTau,
        Fabrication::ShortTau,
        Fabrication::WrongOutputs,
        Fabrication::CorruptIndicesInTau,
        Fabrication::DuplicateTau,
        Fabrication::OutOfRangeTau,
        Fabrication::ExcessDegree,
    ];

    /// A fabricated claim derived from the honest one, or `None` when the
    /// instance leaves nothing to fabricate (e.g. no corrupted values).
    pub fn apply<R: Rng>(
        self,
        deleg: &Delegation,
        values: &[Option<Fe>],
        honest: &DecodeClaim,
        rng: &mut R,
    ) -> Option<DecodeClaim> {
        let cfg = deleg.config();
        let field = cfg.field();
        let bound = deleg.tau_bound(values.iter().filter(|v| v.is_some()).count());
        let mut c = honest.clone();
        counter::with_scope(Scope::UNSCOPED, || {
            match self {
                Fabrication::WrongCoefficients => {
                    let j = rng.gen_range(0..c.coeffs.len());
                    c.coeffs[j] += field.random_nonzero(rng);
                    c.outputs = deleg.output_map().apply(&c.coeffs);
                }
                Fabrication::FittedTau => {
                    let honest_poly = deleg.claim_poly(&honest.coeffs).ok()?;
                    let alphas = cfg.domain().alphas();
                    let mut order: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
                    order.shuffle(rng);
                    order.sort_by_key(|i| honest.tau.contains(i));
                    let mut pts: Vec<(Fe, Fe)> =
                        order[..cfg.degree_bound() + 1].iter().map(|&i| (alphas[i], values[i].unwrap())).collect();
                    let mut p = crate::poly::interpolate(&pts, cfg.domain().mode()).ok()?;
                    if p == honest_poly {
                        pts[0].1 += field.one();
                        p = crate::poly::interpolate(&pts, cfg.domain().mode()).ok()?;
                    }
                    let evals = cfg.domain().alpha_points().evaluate(&p);
                    let mut tau: Vec<usize> = order.iter().copied().filter(|&i| Some(evals[i]) == values[i]).collect();
                    for &i in &order {
                        if tau.len() >= bound {
                            break;
                        }
                        if !tau.contains(&i) {
                            tau.push(i);
                        }
                    }
                    tau.sort_unstable();
                    c.coeffs = deleg.claim_coords(&p);
                    c.outputs = deleg.output_map().apply(&c.coeffs);
                    c.tau = tau;
                }
                Fabrication::ShortTau => c.tau.truncate(bound.checked_sub(1)?),
                Fabrication::WrongOutputs => {
                    let j = rng.gen_range(0..c.outputs.len());
                    c.outputs[j] += field.random_nonzero(rng);
                }
                Fabrication::CorruptIndicesInTau => {
                    let all: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
                    if all.len() == c.tau.len() {
                        return None;
                    }
                    c.tau = all;
                }
                Fabrication::DuplicateTau => {
                    let first = *c.tau.first()?;
                    c.tau.truncate(bound.saturating_sub(1));
                    c.tau.push(first);
                }
                Fabrication::OutOfRangeTau => c.tau.push(values.len()),
                Fabrication::ExcessDegree => c.coeffs.push(field.random_nonzero(rng)),
            }
            Some(c)
        })
    }
}
