//! Simulator properties across protocols, seeds and adversaries.

use codedsm::csm::Setting;
use codedsm::harness::{default_catalog, sweep_security};
use codedsm::intermix::ReplyRule;
use codedsm::machine::MachineKind;
use codedsm::simnet::{
    run_experiment, AdversaryModel, Event, EventLog, ExperimentConfig, Placement, Protocol, Strategy, ValueRule,
};

#[test]
fn logs_are_deterministic_per_seed() {
    let cfg = ExperimentConfig {
        fault_fraction: 0.25,
        rounds: 5,
        seed: 17,
        adversary: AdversaryModel::mixed(default_catalog()),
        ..ExperimentConfig::new(Protocol::Csm, 12)
    };
    let a = run_experiment(&cfg).unwrap().log.to_json_lines();
    let b = run_experiment(&cfg).unwrap().log.to_json_lines();
    assert_eq!(a, b);
    let c = run_experiment(&ExperimentConfig { seed: 18, ..cfg }).unwrap().log.to_json_lines();
    assert_ne!(a, c);
    assert_eq!(EventLog::parse_json_lines(&a).unwrap().to_json_lines(), a);
}

#[test]
fn every_protocol_is_clean_within_its_tolerance() {
    for protocol in [Protocol::Full, Protocol::Partial, Protocol::Csm] {
        for seed in 0..10 {
            let cfg = ExperimentConfig {
                k: Some(3),
                fault_fraction: 0.25,
                rounds: 8,
                seed,
                adversary: AdversaryModel::uniform(default_catalog()[seed as usize % 4]).with_count(match protocol {
                    Protocol::Full => 5,
                    Protocol::Partial => 1,
                    Protocol::Csm => 3,
                }),
                ..ExperimentConfig::new(protocol, 12)
            };
            let r = run_experiment(&cfg).unwrap();
            assert!(r.is_clean(), "{protocol} seed {seed}: {:?}", r.violations);
            assert_eq!(r.outputs, r.oracle_outputs);
        }
    }
}

#[test]
fn partial_replication_breaks_past_its_group_bound() {
    let cfg = ExperimentConfig {
        k: Some(3),
        rounds: 3,
        adversary: AdversaryModel::uniform(Strategy::CorruptResult(ValueRule::Coordinated))
            .with_count(2)
            .with_placement(Placement::Targeted),
        ..ExperimentConfig::new(Protocol::Partial, 12)
    };
    let r = run_experiment(&cfg).unwrap();
    assert!(!r.is_clean());
    assert!(r.log.events.iter().any(|e| matches!(e, Event::Violation(_))));
}

#[test]
fn delegated_run_survives_dishonest_workers() {
    for rule in [ReplyRule::ConsistentLeft, ReplyRule::Random, ReplyRule::Nonresponsive] {
        let cfg = ExperimentConfig {
            fault_fraction: 0.25,
            rounds: 4,
            delegated: true,
            adversary: AdversaryModel::uniform(Strategy::DishonestWorker(rule)),
            ..ExperimentConfig::new(Protocol::Csm, 16)
        };
        let r = run_experiment(&cfg).unwrap();
        assert!(r.is_clean(), "{rule:?}: {:?}", r.violations);
        assert_eq!(r.states, r.oracle_states);
    }
}

#[test]
fn boolean_machine_over_binary_field() {
    let cfg = ExperimentConfig {
        machine: Some(MachineKind::Counter),
        d: 3,
        fault_fraction: 0.1,
        setting: Setting::PartialSync,
        rounds: 10,
        adversary: AdversaryModel::mixed(vec![Strategy::Withhold, Strategy::Equivocate]),
        ..ExperimentConfig::new(Protocol::Csm, 20)
    };
    let r = run_experiment(&cfg).unwrap();
    assert!(r.plan.field.is_binary());
    assert!(r.is_clean(), "{:?}", r.violations);
}

#[test]
fn sweep_finds_the_coded_bound() {
    let cfg = ExperimentConfig { k: Some(3), d: 2, rounds: 2, ..ExperimentConfig::new(Protocol::Csm, 10) };
    assert_eq!(sweep_security(&cfg, &default_catalog()).unwrap().beta, 2);
}
