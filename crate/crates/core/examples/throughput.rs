//! Throughput of delegated coded execution against full replication as N
//! grows at a fixed fault fraction.

use codedsm::harness::measure;
use codedsm::poly::EvalMode;
use codedsm::simnet::{ExperimentConfig, Protocol};

fn main() -> codedsm::Result<()> {
    println!("{:>4} {:>4} {:>12} {:>12} {:>10} {:>10} {:>10}", "N", "K", "lambda_csm", "lambda_full", "rho", "psi", "chi");
    for n in [16, 32, 64] {
        let base = ExperimentConfig {
            fault_fraction: 0.25,
            d: 1,
            rounds: 3,
            eval_mode: EvalMode::Fast,
            ..ExperimentConfig::new(Protocol::Csm, n)
        };
        let coded = ExperimentConfig { delegated: true, ..base.clone() };
        let (c, _) = measure(&coded, false)?;
        let full = ExperimentConfig { protocol: Protocol::Full, k: Some(c.k), ..base };
        let (f, _) = measure(&full, false)?;
        println!(
            "{:>4} {:>4} {:>12.4e} {:>12.4e} {:>10.0} {:>10.0} {:>10.0}",
            n, c.k, c.lambda, f.lambda, c.ops_rho, c.ops_psi, c.ops_chi
        );
    }
    Ok(())
}
