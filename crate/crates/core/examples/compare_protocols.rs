//! Storage efficiency, security and throughput of full replication,
//! partial replication and coded execution on one configuration.

use codedsm::harness::{measure, MetricsRecord};
use codedsm::simnet::{ExperimentConfig, Protocol};

fn main() -> codedsm::Result<()> {
    println!("{:<8} {:>3} {:>3} {:>6} {:>5} {:>10}", "protocol", "N", "K", "gamma", "beta", "lambda");
    for p in [Protocol::Full, Protocol::Partial, Protocol::Csm] {
        let cfg = ExperimentConfig { k: Some(3), fault_fraction: 0.25, rounds: 5, ..ExperimentConfig::new(p, 12) };
        let (m, _): (MetricsRecord, _) = measure(&cfg, true)?;
        println!("{:<8} {:>3} {:>3} {:>6} {:>5} {:>10.3e}", m.protocol.to_string(), m.n, m.k, m.gamma, m.beta, m.lambda);
    }
    Ok(())
}
