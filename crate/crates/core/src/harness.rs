//! Experiment runner: storage efficiency, throughput and security per
//! protocol, written as CSV rows plus JSON-lines event logs.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::csm::{self, Setting};
use crate::error::{Error, Result};
use crate::simnet::{
    run_experiment, AdversaryModel, ChannelMode, Event, EventLog, ExperimentConfig, ExperimentResult, PhaseOps,
    Placement, Protocol, Strategy, ValueRule,
};

pub const SCHEMA: &str = "# schema: csm-metrics/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub protocol: Protocol,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub d: usize,
    pub fault_fraction: f64,
    pub setting: Setting,
    pub beta: usize,
    pub gamma: f64,
    /// `NaN` for a run with violations.
    pub lambda: f64,
    /// Mean field operations per node per round, by phase.
    pub ops_rho: f64,
    pub ops_psi: f64,
    pub ops_chi: f64,
    pub seed: u64,
    pub violations: usize,
}

impl MetricsRecord {
    pub fn is_valid(&self) -> bool {
        self.violations == 0
    }
}

/// Metrics of one logged run. `beta` is the tolerance the run was
/// configured for; [`sweep_security`] replaces it with a searched value.
pub fn compute_metrics(log: &EventLog) -> Result<MetricsRecord> {
    let Some(Event::Header { protocol, n, k, d, b, setting, seed, .. }) = log.header().cloned() else {
        return Err(Error::Parse { line: 1, msg: "log has no header".into() });
    };
    let Some(Event::Accounting { rounds_completed, node_ops, state_bytes, node_storage_bytes }) =
        log.events.iter().rev().find(|e| matches!(e, Event::Accounting { .. })).cloned()
    else {
        return Err(Error::Parse { line: log.events.len(), msg: "log has no accounting record".into() });
    };
    let violations = log.events.iter().filter(|e| matches!(e, Event::Violation(_))).count();
    let per_node_round = |f: fn(&PhaseOps) -> u64| {
        let total: u64 = node_ops.iter().map(f).sum();
        total as f64 / (n as f64 * rounds_completed.max(1) as f64)
    };
    let ops_rho = per_node_round(|o| o.rho.field_ops());
    let ops_psi = per_node_round(|o| o.psi.field_ops());
    let ops_chi = per_node_round(|o| o.chi.field_ops());
    let per_round = ops_rho + ops_psi + ops_chi;
    let lambda = if violations > 0 || rounds_completed == 0 || per_round == 0.0 { f64::NAN } else { k as f64 / per_round };
    let beta = match protocol {
        Protocol::Csm => b,
        Protocol::Full | Protocol::Partial => {
            let q = if protocol == Protocol::Full { n } else { n / k };
            match setting {
                Setting::Sync => (q - 1) / 2,
                Setting::PartialSync => (q - 1) / 3,
            }
        }
    };
    Ok(MetricsRecord {
        protocol,
        n,
        k,
        d,
        fault_fraction: b as f64 / n as f64,
        setting,
        beta,
        gamma: k as f64 * state_bytes as f64 / node_storage_bytes as f64,
        lambda,
        ops_rho,
        ops_psi,
        ops_chi,
        seed,
        violations,
    })
}

/// The strategies the security search tries.
pub fn default_catalog() -> Vec<Strategy> {
    vec![
        Strategy::CorruptResult(ValueRule::Coordinated),
        Strategy::CorruptResult(ValueRule::Random),
        Strategy::Withhold,
        Strategy::Equivocate,
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct SecuritySweep {
    pub beta: usize,
    /// The first attack that succeeded: faulty count, strategy, placement.
    pub witness: Option<(usize, Strategy, Placement)>,
}

/// Largest `b` no catalog strategy breaks, searched upward from zero over
/// targeted and a few random placements. A lower-bound certificate: other
/// strategies might do better.
pub fn sweep_security(cfg: &ExperimentConfig, catalog: &[Strategy]) -> Result<SecuritySweep> {
    let mut base = cfg.clone();
    base.rounds = base.rounds.min(3);
    let plan = base.plan()?;
    base.k = Some(plan.k);
    if base.protocol == Protocol::Csm {
        // the best tolerance the coded system can be configured for
        base.b = Some(csm::max_faults(plan.n, plan.k, plan.d, base.setting).unwrap_or(0));
    }
    for count in 1..=plan.n / 2 + 1 {
        for &strategy in catalog {
            let mut placements = vec![Placement::Targeted];
            placements.extend((0..3u64).map(|_| Placement::Random));
            for (j, placement) in placements.into_iter().enumerate() {
                let mut c = base.clone();
                c.seed = cfg.seed.wrapping_add(j as u64 * 7919);
                c.adversary = AdversaryModel { placement: placement.clone(), strategies: vec![strategy], count: Some(count) };
                let broken = match run_experiment(&c) {
                    Ok(r) => !r.is_clean(),
                    Err(Error::Parameter(_) | Error::Config(_)) => continue,
                    Err(e) => return Err(e),
                };
                if broken {
                    return Ok(SecuritySweep { beta: count - 1, witness: Some((count, strategy, placement)) });
                }
            }
        }
    }
    Ok(SecuritySweep { beta: plan.n / 2, witness: None })
}

/// Run one experiment and summarize it.
pub fn measure(cfg: &ExperimentConfig, sweep: bool) -> Result<(MetricsRecord, ExperimentResult)> {
    let result = run_experiment(cfg)?;
    let mut record = compute_metrics(&result.log)?;
    record.fault_fraction = cfg.fault_fraction;
    if sweep {
        record.beta = sweep_security(cfg, &default_catalog())?.beta;
    }
    Ok((record, result))
}

pub fn write_csv(path: impl AsRef<Path>, records: &[MetricsRecord]) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(e.to_string());
    let mut file = std::fs::File::create(path.as_ref()).map_err(io)?;
    writeln!(file, "{SCHEMA}").map_err(io)?;
    let mut w = csv::Writer::from_writer(file);
    for r in records {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush().map_err(io)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<MetricsRecord>> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::Io(e.to_string()))?;
    let body = text
        .strip_prefix(SCHEMA)
        .ok_or_else(|| Error::Parse { line: 1, msg: format!("expected {SCHEMA:?}") })?
        .trim_start_matches(['\r', '\n']);
    csv::Reader::from_reader(body.as_bytes())
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::Parse { line: i + 3, msg: e.to_string() }))
        .collect()
}

#[derive(Parser, Debug)]
#[command(name = "csm", about = "Coded state machine experiments", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run experiments and write metrics.csv plus one event log per run.
    #[command(group(ArgGroup::new("what").required(true).multiple(true).args(["protocol", "compare", "config"])))]
    Run(RunArgs),
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    #[arg(long)]
    protocol: Option<Protocol>,
    /// Comma-separated protocols sharing one configuration.
    #[arg(long, value_delimiter = ',')]
    compare: Vec<Protocol>,
    /// Key-value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    b: Option<usize>,
    #[arg(long)]
    rounds: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    setting: Option<Setting>,
    #[arg(long)]
    channel: Option<ChannelMode>,
    #[arg(long)]
    field: Option<String>,
    #[arg(long)]
    machine: Option<String>,
    /// Comma-separated adversary strategies.
    #[arg(long)]
    adversary: Option<String>,
    #[arg(long)]
    delegated: bool,
    /// Search for the tolerated fault count instead of reporting the
    /// configured one.
    #[arg(long)]
    sweep: bool,
    #[arg(long)]
    out: PathBuf,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let flags: [(&str, Option<String>); 11] = [
            ("n", self.n.map(|v| v.to_string())),
            ("fault_fraction", self.mu.map(|v| v.to_string())),
            ("d", self.d.map(|v| v.to_string())),
            ("k", self.k.map(|v| v.to_string())),
            ("b", self.b.map(|v| v.to_string())),
            ("rounds", self.rounds.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("setting", self.setting.map(|v| v.to_string())),
            ("channel", self.channel.map(|v| v.to_string())),
            ("field", self.field.clone()),
            ("machine", self.machine.clone()),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        if let Some(a) = &self.adversary {
            cfg.set("adversary", a)?;
        }
        if self.delegated {
            cfg.delegated = true;
        }
        if let Some(p) = self.protocol {
            cfg.protocol = p;
        }
        Ok(cfg)
    }
}

fn execute(args: &RunArgs) -> Result<Vec<MetricsRecord>> {
    let base = args.config()?;
    let protocols = if args.compare.is_empty() { vec![base.protocol] } else { args.compare.clone() };
    // a comparison shares one K: the coded protocol's capacity unless given
    let shared_k = match (base.k, args.compare.is_empty()) {
        (Some(k), _) => Some(k),
        (None, false) => Some(ExperimentConfig { protocol: Protocol::Csm, ..base.clone() }.plan()?.k),
        (None, true) => None,
    };
    std::fs::create_dir_all(&args.out).map_err(|e| Error::Io(e.to_string()))?;
    let mut records = Vec::new();
    for p in protocols {
        // in a comparison, --delegated concerns the coded run only
        let delegated = base.delegated && (args.compare.is_empty() || p == Protocol::Csm);
        let cfg = ExperimentConfig { protocol: p, k: shared_k, delegated, ..base.clone() };
        let (record, result) = measure(&cfg, args.sweep)?;
        result.log.write(args.out.join(format!("{p}-n{}-seed{}.jsonl", cfg.n, cfg.seed)))?;
        records.push(record);
    }
    write_csv(args.out.join("metrics.csv"), &records)?;
    Ok(records)
}

/// Exit status: 0 clean, 1 runtime error, 2 usage error, 3 a run violated
/// a security clause.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let Command::Run(args) = cli.command;
    match execute(&args) {
        Ok(records) => {
            for r in &records {
                println!(
                    "{:<8} N={:<3} K={:<3} d={} beta={} gamma={:.3} lambda={:.3e} violations={}",
                    r.protocol, r.n, r.k, r.d, r.beta, r.gamma, r.lambda, r.violations
                );
            }
            if records.iter().all(MetricsRecord::is_valid) {
                0
            } else {
                3
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Parameter(_) | Error::Parse { .. } => 2,
                _ => 1,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(protocol: Protocol, n: usize, k: usize, d: usize) -> ExperimentConfig {
        ExperimentConfig { k: Some(k), d, rounds: 4, ..ExperimentConfig::new(protocol, n) }
    }

    #[test]
    fn gamma_per_protocol() {
        for (p, want) in [(Protocol::Full, 1.0), (Protocol::Partial, 4.0), (Protocol::Csm, 4.0)] {
            let c = ExperimentConfig { fault_fraction: 0.25, ..cfg(p, 16, 4, 1) };
            let r = run_experiment(&c).unwrap();
            let m = compute_metrics(&r.log).unwrap();
            assert_eq!(m.gamma, want, "{p}");
            assert!(m.gamma <= m.n as f64);
            assert!(m.lambda > 0.0);
        }
    }

    #[test]
    fn violated_run_is_invalid() {
        let mut c = cfg(Protocol::Full, 5, 1, 1);
        c.adversary = AdversaryModel::uniform(Strategy::CorruptResult(ValueRule::Coordinated)).with_count(3);
        let m = compute_metrics(&run_experiment(&c).unwrap().log).unwrap();
        assert!(!m.is_valid());
        assert!(m.lambda.is_nan());
    }

    #[test]
    fn security_sweeps() {
        let full = sweep_security(&cfg(Protocol::Full, 5, 1, 1), &default_catalog()).unwrap();
        assert_eq!(full.beta, 2);
        let partial = sweep_security(&cfg(Protocol::Partial, 6, 2, 1), &default_catalog()).unwrap();
        assert_eq!(partial.beta, 1);
        assert!(matches!(partial.witness, Some((2, _, Placement::Targeted))));
        let coded = sweep_security(&cfg(Protocol::Csm, 10, 3, 2), &default_catalog()).unwrap();
        assert_eq!(coded.beta, 2);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let r = run_experiment(&cfg(Protocol::Csm, 8, 2, 1)).unwrap();
        let m = compute_metrics(&r.log).unwrap();
        write_csv(&path, std::slice::from_ref(&m)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(SCHEMA));
        assert_eq!(
            lines.next(),
            Some("protocol,N,K,d,fault_fraction,setting,beta,gamma,lambda,ops_rho,ops_psi,ops_chi,seed,violations")
        );
        assert_eq!(read_csv(&path).unwrap(), vec![m]);
    }

    #[test]
    fn cli_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(run_cli(["csm", "run", "--out", out]), 2);
        assert_eq!(run_cli(["csm", "run", "--protocol", "csm"]), 2);
        assert_eq!(run_cli(["csm", "run", "--protocol", "nope", "--out", out]), 2);
        assert_eq!(run_cli(["csm", "run", "--protocol", "csm", "--n", "4", "--mu", "0.5", "--out", out]), 2);
    }

    #[test]
    fn cli_compare_writes_rows() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let code = run_cli(["csm", "run", "--compare", "full,partial,csm", "--n", "16", "--d", "1", "--mu", "0.25", "--rounds", "3", "--out", out]);
        // two nodes per group cannot absorb four faults
        assert_eq!(code, 3);
        let rows = read_csv(dir.path().join("metrics.csv")).unwrap();
        let gammas: Vec<f64> = rows.iter().map(|r| r.gamma).collect();
        assert_eq!(gammas, vec![1.0, 8.0, 8.0]);
        assert_eq!(rows.iter().map(|r| r.violations > 0).collect::<Vec<_>>(), vec![false, true, false]);
        assert!(dir.path().join("csm-n16-seed0.jsonl").exists());
    }
}
