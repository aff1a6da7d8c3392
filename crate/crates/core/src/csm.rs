//! The coded round pipeline: encode states and commands with the Lagrange
//! coefficient matrix, execute `f` on coded data, decode the composite
//! polynomial, and re-encode the decoded next states.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Fe, Field};
use crate::linalg::dot;
use crate::machine::TransitionFunction;
use crate::poly::{DensePoly, EvalDomain, EvalMode};
use crate::rs::{self, NoisyCodeword};

/// Network timing assumption.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    #[default]
    Sync,
    PartialSync,
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::Sync => "sync",
            Setting::PartialSync => "partial-sync",
        })
    }
}

impl FromStr for Setting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sync" | "synchronous" => Ok(Setting::Sync),
            "partial-sync" | "partial_sync" | "psync" | "partially-synchronous" => Ok(Setting::PartialSync),
            _ => Err(Error::Config(format!("unknown setting {s:?} (expected sync or partial-sync)"))),
        }
    }
}

/// Largest `b` allowed by the consensus, decoding and delivery bounds:
/// sync `b + 1 <= N`, `2b + 1 <= N - D`, `2b + 1 <= N`;
/// partial sync `3b + 1 <= N`, `3b + 1 <= N - D`, `2b + 1 <= N`,
/// where `D = d (K - 1)`.
pub fn max_faults(n: usize, k: usize, d: usize, setting: Setting) -> Option<usize> {
    let dd = d * k.checked_sub(1)?;
    let room = n.checked_sub(dd + 1)?;
    Some(match setting {
        Setting::Sync => room / 2,
        Setting::PartialSync => room / 3,
    })
}

/// Check `b` against all three bounds for the setting.
pub fn check_bounds(n: usize, k: usize, d: usize, b: usize, setting: Setting) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("need 1 <= K <= N, got K = {k}, N = {n}")));
    }
    let dd = d * (k - 1);
    let (consensus, decoding, delivery) = match setting {
        Setting::Sync => (b < n, 2 * b + 1 + dd <= n, 2 * b < n),
        Setting::PartialSync => (3 * b < n, 3 * b + 1 + dd <= n, 2 * b < n),
    };
    let fail = |what: &str| Err(Error::Parameter(format!("b = {b} violates the {what} bound for N = {n}, K = {k}, d = {d} ({setting})")));
    if !consensus {
        return fail("consensus");
    }
    if !decoding {
        return fail("decoding");
    }
    if !delivery {
        return fail("delivery");
    }
    Ok(())
}

/// Fault count `fraction * N`, which must be an integer.
pub fn fault_count(n: usize, fraction: f64) -> Result<usize> {
    let b = fraction * n as f64;
    let r = b.round();
    if !(b - r).abs().le(&1e-9) {
        return Err(Error::Parameter(format!("fault fraction {fraction} times N = {n} is not an integer")));
    }
    Ok(r as usize)
}

/// Most machines supportable with `b = fraction * N` faults:
/// `floor((N - 2b - 1) / d) + 1` (sync) or `floor((N - 3b - 1) / d) + 1` (partial sync).
pub fn max_machines(n: usize, fraction: f64, d: usize, setting: Setting) -> Result<usize> {
    let limit = match setting {
        Setting::Sync => 0.5,
        Setting::PartialSync => 1.0 / 3.0,
    };
    if !(0.0..limit).contains(&fraction) || fraction.is_nan() {
        return Err(Error::Parameter(format!("fault fraction {fraction} outside [0, {limit:.4}) for {setting}")));
    }
    if d == 0 || n == 0 {
        return Err(Error::Parameter("need N >= 1 and d >= 1".into()));
    }
    let b = fault_count(n, fraction)?;
    let used = match setting {
        Setting::Sync => 2 * b + 1,
        Setting::PartialSync => 3 * b + 1,
    };
    let room = n.checked_sub(used).ok_or_else(|| Error::Parameter(format!("b = {b} leaves no room at N = {n}")))?;
    Ok(room / d + 1)
}

/// Which Reed-Solomon decoder nodes run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decoder {
    #[default]
    BerlekampWelch,
    Gao,
}

#[derive(Clone, Debug)]
pub struct CodingConfig {
    function: TransitionFunction,
    domain: Arc<EvalDomain>,
    setting: Setting,
    b: usize,
    decoder: Decoder,
}

impl CodingConfig {
    /// Standard points `omega_k = k`, `alpha_i = K + i`.
    pub fn new(function: TransitionFunction, k: usize, n: usize, setting: Setting, b: usize) -> Result<Self> {
        let domain = EvalDomain::standard(function.field(), k, n)?;
        Self::with_domain(function, domain, setting, b)
    }

    pub fn with_domain(function: TransitionFunction, domain: EvalDomain, setting: Setting, b: usize) -> Result<Self> {
        if domain.field() != function.field() {
            return Err(Error::MixedFields);
        }
        check_bounds(domain.n(), domain.k(), function.total_degree(), b, setting)?;
        Ok(CodingConfig { function, domain: Arc::new(domain), setting, b, decoder: Decoder::default() })
    }

    pub fn with_decoder(mut self, decoder: Decoder) -> Self {
        self.decoder = decoder;
        self
    }

    /// Changes the polynomial mode of the domain (fresh caches).
    pub fn with_mode(mut self, mode: EvalMode) -> Self {
        self.domain = Arc::new((*self.domain).clone().with_mode(mode));
        self
    }

    pub fn function(&self) -> &TransitionFunction {
        &self.function
    }

    pub fn domain(&self) -> &EvalDomain {
        &self.domain
    }

    pub fn field(&self) -> Field {
        self.function.field()
    }

    pub fn k(&self) -> usize {
        self.domain.k()
    }

    pub fn n(&self) -> usize {
        self.domain.n()
    }

    pub fn d(&self) -> usize {
        self.function.total_degree()
    }

    /// `D = d (K - 1)`.
    pub fn degree_bound(&self) -> usize {
        self.d() * (self.k() - 1)
    }

    pub fn setting(&self) -> Setting {
        self.setting
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn decoder(&self) -> Decoder {
        self.decoder
    }

    /// Values a node waits for before decoding.
    pub fn quorum(&self) -> usize {
        match self.setting {
            Setting::Sync => self.n(),
            Setting::PartialSync => self.n() - self.b,
        }
    }
}

fn check_vectors(vs: &[Vec<Fe>], k: usize, dim: usize, what: &str) -> Result<()> {
    if vs.len() != k {
        return Err(Error::Domain(format!("expected {k} {what}s, got {}", vs.len())));
    }
    if let Some(v) = vs.iter().find(|v| v.len() != dim) {
        return Err(Error::Domain(format!("{what} has {} coordinates, expected {dim}", v.len())));
    }
    Ok(())
}

/// `sum_k C[i][k] V_k`, coordinate by coordinate.
pub fn encode_for_node(i: usize, vectors: &[Vec<Fe>], cfg: &CodingConfig) -> Vec<Fe> {
    let row = cfg.domain.lagrange_coeffs().row(i);
    let dim = vectors[0].len();
    (0..dim)
        .map(|j| {
            let col: Vec<Fe> = vectors.iter().map(|v| v[j]).collect();
            dot(row, &col)
        })
        .collect()
}

fn encode_all(vectors: &[Vec<Fe>], cfg: &CodingConfig) -> Vec<Vec<Fe>> {
    (0..cfg.n()).map(|i| encode_for_node(i, vectors, cfg)).collect()
}

/// `S~_i = sum_k c_ik S_k` for every node.
pub fn encode_states(states: &[Vec<Fe>], cfg: &CodingConfig) -> Result<Vec<Vec<Fe>>> {
    check_vectors(states, cfg.k(), cfg.function.state_dim(), "state")?;
    Ok(encode_all(states, cfg))
}

/// `X~_i = sum_k c_ik X_k` for every node.
pub fn encode_commands(commands: &[Vec<Fe>], cfg: &CodingConfig) -> Result<Vec<Vec<Fe>>> {
    check_vectors(commands, cfg.k(), cfg.function.command_dim(), "command")?;
    if cfg.function.command_dim() == 0 {
        return Ok(vec![Vec::new(); cfg.n()]);
    }
    Ok(encode_all(commands, cfg))
}

/// `g_i = f(S~_i, X~_i)` as one joint vector (next state, then output).
pub fn execute_local(coded_state: &[Fe], coded_command: &[Fe], cfg: &CodingConfig) -> Result<Vec<Fe>> {
    cfg.function.eval_joint(coded_state, coded_command)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundResult {
    /// `h` for each joint coordinate.
    pub polys: Vec<DensePoly>,
    pub next_states: Vec<Vec<Fe>>,
    pub outputs: Vec<Vec<Fe>>,
    /// Nodes whose result matched the decoded polynomials in every coordinate.
    pub agreement: Vec<usize>,
    /// Error budget the decoder used.
    pub budget: usize,
}

/// Decode the per-node results (`None` = not received). Sync treats
/// missing values as erasures charged to the fault budget; partial sync
/// decodes any `N - b` received values with budget `b`.
pub fn decode_round(results: &[Option<Vec<Fe>>], cfg: &CodingConfig) -> Result<RoundResult> {
    let n = cfg.n();
    if results.len() != n {
        return Err(Error::Domain(format!("expected {n} result slots, got {}", results.len())));
    }
    let jd = cfg.function.joint_dim();
    if let Some(r) = results.iter().flatten().find(|r| r.len() != jd) {
        return Err(Error::Domain(format!("result with {} coordinates, expected {jd}", r.len())));
    }
    let present = results.iter().filter(|r| r.is_some()).count();
    let missing = n - present;
    let budget = match cfg.setting {
        Setting::Sync => {
            if missing > cfg.b {
                return Err(Error::DecodeFailure(format!("{missing} results missing, more than b = {}", cfg.b)));
            }
            cfg.b - missing
        }
        Setting::PartialSync => {
            if present < cfg.quorum() {
                return Err(Error::DecodeFailure(format!("only {present} of {} required results", cfg.quorum())));
            }
            cfg.b
        }
    };
    let points = cfg.domain.alphas().to_vec();
    let mut polys = Vec::with_capacity(jd);
    let mut agreement: Option<Vec<usize>> = None;
    for c in 0..jd {
        let values = results.iter().map(|r| r.as_ref().map(|v| v[c])).collect();
        let cw = NoisyCodeword::new(points.clone(), values, cfg.degree_bound(), budget)?;
        let res = match cfg.decoder {
            Decoder::BerlekampWelch => rs::decode(&cw)?,
            Decoder::Gao => rs::decode_gao(&cw, cfg.domain.mode())?,
        };
        agreement = Some(match agreement {
            None => res.agreement,
            Some(a) => a.into_iter().filter(|i| res.agreement.contains(i)).collect(),
        });
        polys.push(res.poly);
    }
    let k = cfg.k();
    let sd = cfg.function.state_dim();
    let mut next_states = vec![Vec::with_capacity(sd); k];
    let mut outputs = vec![Vec::with_capacity(jd - sd); k];
    let omegas = cfg.domain.omega_points();
    for (c, h) in polys.iter().enumerate() {
        let at = omegas.evaluate(h);
        for (kk, v) in at.into_iter().enumerate() {
            if c < sd {
                next_states[kk].push(v);
            } else {
                outputs[kk].push(v);
            }
        }
    }
    Ok(RoundResult { polys, next_states, outputs, agreement: agreement.unwrap_or_default(), budget })
}

/// Node `i`'s next coded state from the decoded next states.
pub fn update_coded_state(i: usize, next_states: &[Vec<Fe>], cfg: &CodingConfig) -> Vec<Fe> {
    encode_for_node(i, next_states, cfg)
}

pub fn update_coded_states(next_states: &[Vec<Fe>], cfg: &CodingConfig) -> Result<Vec<Vec<Fe>>> {
    encode_states(next_states, cfg)
}

/// The value reported by at least `b + 1` reports. Two such values is a
/// delivery failure.
pub fn client_decide<T: Clone + Eq + Hash>(reports: &[T], b: usize) -> Result<T> {
    let needed = b + 1;
    let mut counts: HashMap<&T, usize> = HashMap::new();
    for r in reports {
        *counts.entry(r).or_default() += 1;
    }
    let mut top = counts.iter().filter(|(_, &c)| c >= needed);
    match (top.next(), top.next()) {
        (Some((v, _)), None) => Ok((*v).clone()),
        _ => Err(Error::DeliveryFailure { needed }),
    }
}

/// Uncoded reference execution of one round for all machines.
pub fn uncoded_round(
    f: &TransitionFunction,
    states: &[Vec<Fe>],
    commands: &[Vec<Fe>],
) -> Result<(Vec<Vec<Fe>>, Vec<Vec<Fe>>)> {
    let mut next = Vec::with_capacity(states.len());
    let mut outs = Vec::with_capacity(states.len());
    for (s, x) in states.iter().zip(commands) {
        let (ns, y) = f.apply(s, x)?;
        next.push(ns);
        outs.push(y);
    }
    Ok((next, outs))
}

/// Coded storage of all `N` nodes driven round by round in process.
#[derive(Clone, Debug)]
pub struct CodedSystem {
    cfg: CodingConfig,
    coded: Vec<Vec<Fe>>,
    round: u64,
}

impl CodedSystem {
    pub fn new(cfg: CodingConfig, initial_states: &[Vec<Fe>]) -> Result<Self> {
        let coded = encode_states(initial_states, &cfg)?;
        Ok(CodedSystem { cfg, coded, round: 0 })
    }

    pub fn config(&self) -> &CodingConfig {
        &self.cfg
    }

    pub fn coded_states(&self) -> &[Vec<Fe>] {
        &self.coded
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    /// Honest `g_i` for every node.
    pub fn honest_results(&self, commands: &[Vec<Fe>]) -> Result<Vec<Vec<Fe>>> {
        let xs = encode_commands(commands, &self.cfg)?;
        self.coded.iter().zip(&xs).map(|(s, x)| execute_local(s, x, &self.cfg)).collect()
    }

    /// Decode the received results and, on success, advance every coded
    /// state. On failure nothing changes.
    pub fn finish_round(&mut self, results: &[Option<Vec<Fe>>]) -> Result<RoundResult> {
        let res = decode_round(results, &self.cfg)?;
        self.coded = update_coded_states(&res.next_states, &self.cfg)?;
        self.round += 1;
        Ok(res)
    }

    /// One round where `tamper(i, g_i)` may replace or drop node `i`'s result.
    pub fn step(
        &mut self,
        commands: &[Vec<Fe>],
        mut tamper: impl FnMut(usize, &[Fe]) -> Option<Vec<Fe>>,
    ) -> Result<RoundResult> {
        let honest = self.honest_results(commands)?;
        let received: Vec<Option<Vec<Fe>>> = honest.iter().enumerate().map(|(i, g)| tamper(i, g)).collect();
        self.finish_round(&received)
    }
}

/// One line of the round trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub commands: Vec<Vec<u64>>,
    pub results: Vec<Option<Vec<u64>>>,
    pub tau: Vec<usize>,
    pub outputs: Option<Vec<Vec<u64>>>,
    pub decoded: bool,
}

impl RoundRecord {
    pub fn new(round: u64, commands: &[Vec<Fe>], results: &[Option<Vec<Fe>>], res: Option<&RoundResult>) -> Self {
        let raw = |v: &Vec<Fe>| v.iter().map(Fe::value).collect::<Vec<u64>>();
        RoundRecord {
            round,
            commands: commands.iter().map(raw).collect(),
            results: results.iter().map(|r| r.as_ref().map(raw)).collect(),
            tau: res.map(|r| r.agreement.clone()).unwrap_or_default(),
            outputs: res.map(|r| r.outputs.iter().map(raw).collect()),
            decoded: res.is_some(),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::MachineKind;
    use crate::poly::interpolate;
    use rand::seq::index::sample;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn f11() -> Field {
        Field::prime(11).unwrap()
    }

    fn scalars(f: Field, v: &[u64]) -> Vec<Vec<Fe>> {
        v.iter().map(|&x| vec![f.elem(x)]).collect()
    }

    fn flat(v: &[Vec<Fe>]) -> Vec<u64> {
        v.iter().flatten().map(Fe::value).collect()
    }

    fn example_cfg() -> CodingConfig {
        CodingConfig::new(TransitionFunction::product(f11()), 2, 5, Setting::Sync, 1).unwrap()
    }

    #[test]
    fn running_example_round() {
        let f = f11();
        let cfg = example_cfg();
        let states = scalars(f, &[4, 7]);
        let cmds = scalars(f, &[2, 3]);
        let coded = encode_states(&states, &cfg).unwrap();
        assert_eq!(flat(&coded), vec![10, 2, 5, 8, 0]);
        // oracle: u(z) = 3z + 1 evaluated at 3..7
        let u = interpolate(&[(f.elem(1), f.elem(4)), (f.elem(2), f.elem(7))], EvalMode::Naive).unwrap();
        assert_eq!(flat(&coded), (3..=7).map(|a| u.eval(f.elem(a)).value()).collect::<Vec<_>>());
        let xs = encode_commands(&cmds, &cfg).unwrap();
        assert_eq!(flat(&xs), vec![4, 5, 6, 7, 8]);
        let g: Vec<Vec<Fe>> = coded.iter().zip(&xs).map(|(s, x)| execute_local(s, x, &cfg).unwrap()).collect();
        // joint vector is (next state, output), both S X
        assert_eq!(g.iter().map(|v| v[1].value()).collect::<Vec<_>>(), vec![7, 10, 8, 1, 0]);
        let mut received: Vec<Option<Vec<Fe>>> = g.into_iter().map(Some).collect();
        received[1] = Some(vec![f.zero(), f.zero()]);
        let res = decode_round(&received, &cfg).unwrap();
        assert_eq!(flat(&res.outputs), vec![8, 10]);
        assert_eq!(flat(&res.next_states), vec![8, 10]);
        assert_eq!(res.agreement, vec![0, 2, 3, 4]);
        assert_eq!(res.polys[1], DensePoly::from_u64(f, &[1, 4, 3]));
    }

    #[test]
    fn single_machine_is_replication() {
        let f = f11();
        let cfg = CodingConfig::new(TransitionFunction::bank(f), 1, 5, Setting::Sync, 2).unwrap();
        let coded = encode_states(&scalars(f, &[6]), &cfg).unwrap();
        assert_eq!(flat(&coded), vec![6; 5]);
        assert_eq!(flat(&encode_commands(&scalars(f, &[3]), &cfg).unwrap()), vec![3; 5]);
        assert_eq!(flat(&encode_states(&scalars(f, &[0]), &cfg).unwrap()), vec![0; 5]);
    }

    #[test]
    fn encoding_is_linear() {
        let f = Field::prime(97).unwrap();
        let cfg = CodingConfig::new(TransitionFunction::bank(f), 4, 12, Setting::Sync, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<Vec<Fe>> = (0..4).map(|_| vec![f.random(&mut rng)]).collect();
        let b: Vec<Vec<Fe>> = (0..4).map(|_| vec![f.random(&mut rng)]).collect();
        let sum: Vec<Vec<Fe>> = a.iter().zip(&b).map(|(x, y)| vec![x[0] + y[0]]).collect();
        let (ea, eb, es) = (encode_commands(&a, &cfg).unwrap(), encode_commands(&b, &cfg).unwrap(), encode_commands(&sum, &cfg).unwrap());
        for i in 0..12 {
            assert_eq!(es[i][0], ea[i][0] + eb[i][0]);
        }
    }

    #[test]
    fn bank_with_zero_command_returns_state() {
        let f = f11();
        let cfg = CodingConfig::new(TransitionFunction::bank(f), 2, 5, Setting::Sync, 1).unwrap();
        let coded = encode_states(&scalars(f, &[4, 7]), &cfg).unwrap();
        let xs = encode_commands(&scalars(f, &[0, 0]), &cfg).unwrap();
        for (s, x) in coded.iter().zip(&xs) {
            assert_eq!(execute_local(s, x, &cfg).unwrap(), vec![s[0], s[0]]);
        }
    }

    #[test]
    fn two_bank_rounds_match_uncoded() {
        let f = f11();
        let cfg = CodingConfig::new(TransitionFunction::bank(f), 2, 5, Setting::Sync, 1).unwrap();
        let mut states = scalars(f, &[4, 7]);
        let mut sys = CodedSystem::new(cfg.clone(), &states).unwrap();
        for cmds in [scalars(f, &[2, 3]), scalars(f, &[5, 9])] {
            let (next, outs) = uncoded_round(cfg.function(), &states, &cmds).unwrap();
            let res = sys.step(&cmds, |i, g| if i == 3 { Some(vec![g[0] + f.one(), g[1]]) } else { Some(g.to_vec()) }).unwrap();
            assert_eq!(res.outputs, outs);
            assert_eq!(res.next_states, next);
            assert_eq!(sys.coded_states(), &encode_states(&next, &cfg).unwrap()[..]);
            states = next;
        }
        assert_eq!(flat(&states), vec![0, 8]);
    }

    #[test]
    fn fixed_point_machine_keeps_coded_state() {
        let f = f11();
        let cfg = CodingConfig::new(TransitionFunction::fixed_point(f), 2, 5, Setting::Sync, 1).unwrap();
        let mut sys = CodedSystem::new(cfg, &scalars(f, &[4, 7])).unwrap();
        let before = sys.coded_states().to_vec();
        for _ in 0..3 {
            sys.step(&scalars(f, &[1, 2]), |_, g| Some(g.to_vec())).unwrap();
        }
        assert_eq!(sys.coded_states(), &before[..]);
    }

    #[test]
    fn failure_leaves_state_untouched() {
        let f = f11();
        let mut sys = CodedSystem::new(example_cfg(), &scalars(f, &[4, 7])).unwrap();
        let before = sys.coded_states().to_vec();
        // two arbitrary corruptions exceed b = 1
        let r = sys.step(&scalars(f, &[2, 3]), |i, g| if i < 2 { Some(vec![g[0] + f.elem(i as u64 + 1), g[1] + f.elem(5)]) } else { Some(g.to_vec()) });
        if r.is_err() {
            assert_eq!(sys.coded_states(), &before[..]);
            assert_eq!(sys.round(), 0);
        }
    }

    #[test]
    fn capacity_formulas() {
        assert_eq!(max_machines(30, 0.1, 2, Setting::Sync).unwrap(), 12);
        assert_eq!(max_machines(30, 0.1, 1, Setting::PartialSync).unwrap(), 21);
        for n in 1..40 {
            assert_eq!(max_machines(n, 0.0, 1, Setting::Sync).unwrap(), n);
        }
        assert!(check_bounds(30, 12, 2, 3, Setting::Sync).is_ok());
        assert!(check_bounds(30, 13, 2, 3, Setting::Sync).is_err());
        assert!(check_bounds(30, 21, 1, 3, Setting::PartialSync).is_ok());
        assert!(check_bounds(30, 22, 1, 3, Setting::PartialSync).is_err());
        assert!(max_machines(30, 0.5, 1, Setting::Sync).is_err());
        assert!(max_machines(30, 0.34, 1, Setting::PartialSync).is_err());
        assert!(max_machines(30, 0.15, 1, Setting::Sync).is_err());
        // returned K always satisfies the bounds with b = fraction * N
        for n in 1..=60usize {
            for b in 0..n {
                for d in 1..=3 {
                    for setting in [Setting::Sync, Setting::PartialSync] {
                        let frac = b as f64 / n as f64;
                        if let Ok(k) = max_machines(n, frac, d, setting) {
                            assert!(check_bounds(n, k, d, b, setting).is_ok(), "N={n} b={b} d={d} {setting}");
                            assert!(check_bounds(n, k + 1, d, b, setting).is_err() || k == n);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn config_rejects_excess_budget() {
        let f = f11();
        assert!(matches!(CodingConfig::new(TransitionFunction::product(f), 2, 5, Setting::Sync, 2), Err(Error::Parameter(_))));
        assert!(CodingConfig::new(TransitionFunction::product(f), 2, 5, Setting::PartialSync, 1).is_err());
        assert!(CodingConfig::new(TransitionFunction::bank(f), 2, 5, Setting::PartialSync, 1).is_ok());
    }

    #[test]
    fn client_decisions() {
        assert_eq!(client_decide(&[8, 8, 8, 8, 3], 1).unwrap(), 8);
        assert_eq!(client_decide(&[5, 5, 5], 1).unwrap(), 5);
        assert_eq!(client_decide(&[1, 2, 3], 1), Err(Error::DeliveryFailure { needed: 2 }));
        assert_eq!(client_decide(&[1, 1], 1).unwrap(), 1);
        assert_eq!(client_decide(&[1], 1), Err(Error::DeliveryFailure { needed: 2 }));
        assert_eq!(client_decide(&[1, 1, 2, 2, 3], 1), Err(Error::DeliveryFailure { needed: 2 }));
    }

    #[test]
    fn partial_sync_decodes_from_quorum() {
        let f = Field::prime(97).unwrap();
        let cfg = CodingConfig::new(TransitionFunction::bank(f), 3, 10, Setting::PartialSync, 2).unwrap();
        assert_eq!(cfg.quorum(), 8);
        let states = scalars(f, &[1, 2, 3]);
        let cmds = scalars(f, &[4, 5, 6]);
        let sys = CodedSystem::new(cfg.clone(), &states).unwrap();
        let honest = sys.honest_results(&cmds).unwrap();
        let mut rx: Vec<Option<Vec<Fe>>> = honest.into_iter().map(Some).collect();
        rx[0] = None;
        rx[9] = None;
        rx[4] = Some(vec![f.elem(1), f.elem(1)]);
        rx[5] = Some(vec![f.elem(2), f.elem(2)]);
        let res = decode_round(&rx, &cfg).unwrap();
        assert_eq!(flat(&res.outputs), vec![5, 7, 9]);
        rx[1] = None;
        assert!(matches!(decode_round(&rx, &cfg), Err(Error::DecodeFailure(_))));
    }

    #[test]
    fn random_corruptions_within_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for kind in MachineKind::ALL {
            let field = if kind.needs_binary_field() { Field::binary(8).unwrap() } else { Field::prime(crate::field::P31).unwrap() };
            let func = kind.build(field).unwrap();
            let d = func.total_degree();
            for (k, n) in [(2, 9), (3, 12), (4, 16)] {
                let b = max_faults(n, k, d, Setting::Sync).unwrap();
                let cfg = CodingConfig::new(func.clone(), k, n, Setting::Sync, b).unwrap();
                let rand_vec = |dim: usize, rng: &mut ChaCha8Rng| -> Vec<Fe> {
                    (0..dim).map(|_| if field.is_binary() { field.elem(rng.gen_range(0..2)) } else { field.random(rng) }).collect()
                };
                let mut states: Vec<Vec<Fe>> = (0..k).map(|_| rand_vec(func.state_dim(), &mut rng)).collect();
                let mut sys = CodedSystem::new(cfg.clone(), &states).unwrap();
                for _ in 0..5 {
                    let cmds: Vec<Vec<Fe>> = (0..k).map(|_| rand_vec(func.command_dim(), &mut rng)).collect();
                    let (next, outs) = uncoded_round(&func, &states, &cmds).unwrap();
                    let bad: Vec<usize> = sample(&mut rng, n, b).into_vec();
                    let res = sys
                        .step(&cmds, |i, g| {
                            if bad.contains(&i) {
                                Some(g.iter().map(|_| field.random(&mut ChaCha8Rng::seed_from_u64(i as u64))).collect())
                            } else {
                                Some(g.to_vec())
                            }
                        })
                        .unwrap();
                    assert_eq!(res.outputs, outs);
                    assert_eq!(res.next_states, next);
                    states = next;
                }
            }
        }
    }

    #[test]
    fn gao_and_fast_mode_agree_with_default() {
        let f = Field::prime(crate::field::P31).unwrap();
        let base = CodingConfig::new(TransitionFunction::quadratic_mix(f), 8, 40, Setting::Sync, 4).unwrap();
        let alt = base.clone().with_decoder(Decoder::Gao).with_mode(EvalMode::Fast);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let states: Vec<Vec<Fe>> = (0..8).map(|_| vec![f.random(&mut rng), f.random(&mut rng)]).collect();
        let cmds: Vec<Vec<Fe>> = (0..8).map(|_| vec![f.random(&mut rng)]).collect();
        let sys = CodedSystem::new(base.clone(), &states).unwrap();
        let mut rx: Vec<Option<Vec<Fe>>> = sys.honest_results(&cmds).unwrap().into_iter().map(Some).collect();
        for i in [3, 17, 22, 39] {
            rx[i] = Some(vec![f.elem(i as u64); 3]);
        }
        assert_eq!(decode_round(&rx, &base).unwrap(), decode_round(&rx, &alt).unwrap());
    }

    #[test]
    fn trace_line_is_json() {
        let f = f11();
        let cfg = example_cfg();
        let mut sys = CodedSystem::new(cfg, &scalars(f, &[4, 7])).unwrap();
        let cmds = scalars(f, &[2, 3]);
        let rx: Vec<Option<Vec<Fe>>> = sys.honest_results(&cmds).unwrap().into_iter().map(Some).collect();
        let res = sys.finish_round(&rx).unwrap();
        let line = RoundRecord::new(0, &cmds, &rx, Some(&res)).to_json_line();
        let back: RoundRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back.outputs, Some(vec![vec![8], vec![10]]));
        assert!(!line.contains('\n'));
    }
}
