//! A full simulated run with a mixed adversary, written as a JSON-lines
//! event log.

use codedsm::csm::Setting;
use codedsm::simnet::{run_experiment, AdversaryModel, ExperimentConfig, Protocol, Strategy, ValueRule};

fn main() -> codedsm::Result<()> {
    let cfg = ExperimentConfig {
        fault_fraction: 0.1,
        d: 2,
        rounds: 20,
        seed: 11,
        setting: Setting::PartialSync,
        adversary: AdversaryModel::mixed(vec![Strategy::Withhold, Strategy::CorruptResult(ValueRule::Coordinated)]),
        ..ExperimentConfig::new(Protocol::Csm, 30)
    };
    let r = run_experiment(&cfg)?;
    println!("K = {}, b = {}, faulty {:?}, timing {:?}", r.plan.k, r.plan.b, r.plan.byzantine, r.plan.timing);
    println!("{} rounds, {} violations, {} events", r.rounds_completed, r.violations.len(), r.log.events.len());
    let path = std::env::temp_dir().join("codedsm-simulate.jsonl");
    r.log.write(&path)?;
    println!("log written to {}", path.display());
    Ok(())
}
