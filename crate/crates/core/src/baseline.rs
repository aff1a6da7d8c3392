//! Full and partial replication, run with the same round interface as the
//! coded pipeline.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::csm::{client_decide, Setting};
use crate::error::{Error, Result};
use crate::field::Fe;
use crate::machine::TransitionFunction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Replication {
    /// Every node stores and executes every machine.
    Full,
    /// Machine `k` lives on its own group of `q = N / K` nodes.
    Partial,
}

impl fmt::Display for Replication {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Replication::Full => "full",
            Replication::Partial => "partial",
        })
    }
}

impl FromStr for Replication {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Replication::Full),
            "partial" => Ok(Replication::Partial),
            _ => Err(Error::Config(format!("unknown replication mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReplicationConfig {
    mode: Replication,
    n: usize,
    k: usize,
    setting: Setting,
    function: TransitionFunction,
}

impl ReplicationConfig {
    pub fn new(mode: Replication, n: usize, k: usize, setting: Setting, function: TransitionFunction) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::Parameter("need N >= 1 and K >= 1".into()));
        }
        if mode == Replication::Partial && !n.is_multiple_of(k) {
            return Err(Error::Parameter(format!("partial replication needs K | N, got N = {n}, K = {k}")));
        }
        Ok(ReplicationConfig { mode, n, k, setting, function })
    }

    pub fn mode(&self) -> Replication {
        self.mode
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn setting(&self) -> Setting {
        self.setting
    }

    pub fn function(&self) -> &TransitionFunction {
        &self.function
    }

    /// Nodes replicating one machine.
    pub fn group_size(&self) -> usize {
        match self.mode {
            Replication::Full => self.n,
            Replication::Partial => self.n / self.k,
        }
    }

    /// Nodes holding machine `k`.
    pub fn group(&self, k: usize) -> Range<usize> {
        match self.mode {
            Replication::Full => 0..self.n,
            Replication::Partial => {
                let q = self.group_size();
                k * q..(k + 1) * q
            }
        }
    }

    /// Machines stored on `node`.
    pub fn machines_of(&self, node: usize) -> Range<usize> {
        match self.mode {
            Replication::Full => 0..self.k,
            Replication::Partial => {
                let g = node / self.group_size();
                g..g + 1
            }
        }
    }

    /// Faults a single group survives: `floor((q - 1) / 2)` in sync,
    /// `floor((q - 1) / 3)` in partial sync.
    pub fn security(&self) -> usize {
        let q = self.group_size();
        match self.setting {
            Setting::Sync => (q - 1) / 2,
            Setting::PartialSync => (q - 1) / 3,
        }
    }

    /// States per unit of node storage: `1` (full) or `K` (partial).
    pub fn storage_efficiency(&self) -> f64 {
        let per_node = self.machines_of(0).len();
        self.k as f64 / per_node as f64
    }
}

/// Each node's copy of the states it replicates.
#[derive(Clone, Debug)]
pub struct ReplicatedSystem {
    cfg: ReplicationConfig,
    /// `stores[node][j]` is the state of machine `machines_of(node).start + j`.
    stores: Vec<Vec<Vec<Fe>>>,
    round: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaselineRoundResult {
    /// Client decision per machine.
    pub outputs: Vec<Result<Vec<Fe>>>,
    /// Next state of each machine as held by its honest replicas.
    pub next_states: Vec<Vec<Fe>>,
}

impl ReplicatedSystem {
    pub fn new(cfg: ReplicationConfig, initial: &[Vec<Fe>]) -> Result<Self> {
        if initial.len() != cfg.k {
            return Err(Error::Domain(format!("expected {} states, got {}", cfg.k, initial.len())));
        }
        let stores = (0..cfg.n).map(|node| cfg.machines_of(node).map(|k| initial[k].clone()).collect()).collect();
        Ok(ReplicatedSystem { cfg, stores, round: 0 })
    }

    pub fn config(&self) -> &ReplicationConfig {
        &self.cfg
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    /// Stored state of machine `k` at `node`.
    pub fn state_at(&self, node: usize, k: usize) -> Option<&Vec<Fe>> {
        let r = self.cfg.machines_of(node);
        r.contains(&k).then(|| &self.stores[node][k - r.start])
    }

    /// Bytes of state one node keeps.
    pub fn node_storage_bytes(&self) -> usize {
        self.cfg.machines_of(0).len() * self.cfg.function.state_dim() * self.cfg.function.field().element_bytes()
    }

    /// What an honest `node` computes this round: `(machine, (S', Y))` pairs.
    pub fn node_execute(&self, node: usize, commands: &[Vec<Fe>]) -> Result<Vec<(usize, Vec<Fe>, Vec<Fe>)>> {
        self.cfg
            .machines_of(node)
            .zip(&self.stores[node])
            .map(|(k, s)| {
                let (ns, y) = self.cfg.function.apply(s, &commands[k])?;
                Ok((k, ns, y))
            })
            .collect()
    }

    /// Store a node's next states.
    pub fn node_commit(&mut self, node: usize, next: Vec<Vec<Fe>>) {
        self.stores[node] = next;
    }

    /// Full round: every node executes its machines, `report(node, k, y)`
    /// decides what the client for machine `k` hears from `node` (`None` =
    /// nothing), and each client takes the value with `beta + 1` matches.
    /// Nodes in `faulty` do not update their stores.
    pub fn run_round(
        &mut self,
        commands: &[Vec<Fe>],
        faulty: &[usize],
        mut report: impl FnMut(usize, usize, &[Fe]) -> Option<Vec<Fe>>,
    ) -> Result<BaselineRoundResult> {
        if commands.len() != self.cfg.k {
            return Err(Error::Domain(format!("expected {} commands, got {}", self.cfg.k, commands.len())));
        }
        let mut heard: Vec<Vec<Vec<Fe>>> = vec![Vec::new(); self.cfg.k];
        let mut next_states: Vec<Option<Vec<Fe>>> = vec![None; self.cfg.k];
        for node in 0..self.cfg.n {
            let work = self.node_execute(node, commands)?;
            let mut next = Vec::with_capacity(work.len());
            for (k, ns, y) in work {
                if let Some(v) = report(node, k, &y) {
                    heard[k].push(v);
                }
                if !faulty.contains(&node) && next_states[k].is_none() {
                    next_states[k] = Some(ns.clone());
                }
                next.push(ns);
            }
            if !faulty.contains(&node) {
                self.node_commit(node, next);
            }
        }
        let beta = self.cfg.security();
        let outputs = heard.iter().map(|h| client_decide(h, beta)).collect();
        self.round += 1;
        let next_states = next_states
            .into_iter()
            .enumerate()
            .map(|(k, s)| s.unwrap_or_else(|| self.stores[self.cfg.group(k).start][0].clone()))
            .collect();
        Ok(BaselineRoundResult { outputs, next_states })
    }
}
