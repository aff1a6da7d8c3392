//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line and then
//! asserts; run with `--nocapture` to see the lines.

#![allow(clippy::type_complexity)]

use std::time::Instant;

use codedsm::boolfunc::{boolean_to_polynomial, eval_embedded, input_bits, TruthTable};
use codedsm::csm::{
    decode_round, encode_commands, encode_states, execute_local, max_faults, max_machines, uncoded_round, CodingConfig,
    Decoder, Setting,
};
use codedsm::field::counter::{self, Phase};
use codedsm::field::P_NTT;
use codedsm::harness::{default_catalog, measure};
use codedsm::intermix::{
    delegated_decode, elect_committee, honest_decode_claim, intermix_cost, matvec_cost, run_intermix, ClaimBasis,
    Corruption, Delegation, Fabrication, ReplyRule, Session, Worker, WorkerStrategy,
};
use codedsm::linalg::Matrix;
use codedsm::machine::{MachineKind, TransitionFunction};
use codedsm::poly::{interpolate, EvalMode};
use codedsm::rs::{self, NoisyCodeword};
use codedsm::simnet::{
    run_experiment, AdversaryModel, ChannelMode, ExperimentConfig, Placement, Protocol, Strategy, ValueRule,
};
use codedsm::{Fe, Field};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, start: Instant, failures: &[String]) {
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    println!("criterion {id} [{status}] {name} ({:.1}s)", start.elapsed().as_secs_f64());
    for f in failures.iter().take(10) {
        println!("    {f}");
    }
    assert!(failures.is_empty(), "criterion {id}: {} failures, first: {}", failures.len(), failures[0]);
}

fn random_vecs(f: Field, k: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<Fe>> {
    (0..k).map(|_| (0..dim).map(|_| f.random(rng)).collect()).collect()
}

/// Honest results of one round of `cfg` from random states and commands,
/// plus the uncoded next states and outputs.
fn random_round(cfg: &CodingConfig, rng: &mut ChaCha8Rng) -> (Vec<Vec<Fe>>, Vec<Vec<Fe>>, Vec<Vec<Fe>>) {
    let func = cfg.function();
    let f = cfg.field();
    let states = random_vecs(f, cfg.k(), func.state_dim(), rng);
    let cmds = random_vecs(f, cfg.k(), func.command_dim(), rng);
    let s = encode_states(&states, cfg).unwrap();
    let x = encode_commands(&cmds, cfg).unwrap();
    let g = s.iter().zip(&x).map(|(s, x)| execute_local(s, x, cfg).unwrap()).collect();
    let (next, outs) = uncoded_round(func, &states, &cmds).unwrap();
    (g, next, outs)
}

#[test]
fn criterion_1_threshold_sharpness() {
    let start = Instant::now();
    let f = Field::prime(P_NTT).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut failures = vec![];
    let (mut rounds, mut attacks) = (0u64, 0u64);
    for d in [1usize, 2] {
        let func = if d == 1 { TransitionFunction::bank(f) } else { TransitionFunction::product(f) };
        for n in 1..=16usize {
            for k in (1..).take_while(|k| d * (k - 1) < n) {
                let dd = d * (k - 1);
                let b_max = (n - dd - 1) / 2;
                for b in 0..=b_max {
                    let decoder = if b % 2 == 0 { Decoder::Gao } else { Decoder::BerlekampWelch };
                    let cfg = CodingConfig::new(func.clone(), k, n, Setting::Sync, b).unwrap().with_decoder(decoder);
                    let alphas = cfg.domain().alphas().to_vec();
                    for _ in 0..1000 {
                        let (g, next, outs) = random_round(&cfg, &mut rng);
                        let faulty = sample(&mut rng, n, b).into_vec();
                        // shared shift so colluding nodes agree on one wrong polynomial
                        let anchors = sample(&mut rng, n, dd.min(n)).into_vec();
                        let received: Vec<Option<Vec<Fe>>> = g
                            .iter()
                            .enumerate()
                            .map(|(i, gi)| {
                                if !faulty.contains(&i) {
                                    return Some(gi.clone());
                                }
                                match rng.gen_range(0..3) {
                                    0 => None,
                                    1 => Some(gi.iter().map(|_| f.random(&mut rng)).collect()),
                                    _ => {
                                        let shift = anchors.iter().fold(f.one(), |acc, &s| acc * (alphas[i] - alphas[s]));
                                        Some(gi.iter().map(|&v| v + shift).collect())
                                    }
                                }
                            })
                            .collect();
                        rounds += 1;
                        match decode_round(&received, &cfg) {
                            Ok(r) if r.next_states == next && r.outputs == outs => {}
                            Ok(_) => failures.push(format!("N={n} d={d} K={k} b={b}: wrong output")),
                            Err(e) => failures.push(format!("N={n} d={d} K={k} b={b}: {e}")),
                        }
                    }
                }
                // b_max + 1 colluding nodes hold a second degree-D polynomial
                // that agrees with the true one at D honest nodes
                let cfg = CodingConfig::new(func.clone(), k, n, Setting::Sync, b_max).unwrap();
                let alphas = cfg.domain().alphas().to_vec();
                for t in 0..20 {
                    let (g, next, outs) = random_round(&cfg, &mut rng);
                    let perm = sample(&mut rng, n, n).into_vec();
                    let (faulty, rest) = perm.split_at(b_max + 1);
                    let anchors = &rest[..dd];
                    let deltas: Vec<Fe> = g[0].iter().map(|_| f.random_nonzero(&mut rng)).collect();
                    let received: Vec<Option<Vec<Fe>>> = g
                        .iter()
                        .enumerate()
                        .map(|(i, gi)| {
                            if !faulty.contains(&i) {
                                return Some(gi.clone());
                            }
                            let shift = anchors.iter().fold(f.one(), |acc, &s| acc * (alphas[i] - alphas[s]));
                            Some(gi.iter().zip(&deltas).map(|(&v, &dl)| v + dl * shift).collect())
                        })
                        .collect();
                    let cfg = cfg.clone().with_decoder(if t % 2 == 0 { Decoder::Gao } else { Decoder::BerlekampWelch });
                    attacks += 1;
                    if let Ok(r) = decode_round(&received, &cfg) {
                        if r.next_states == next && r.outputs == outs {
                            failures.push(format!("N={n} d={d} K={k}: attack with {} faults did not succeed", b_max + 1));
                        }
                    }
                }
            }
        }
    }
    println!("    {rounds} adversarial rounds within bounds, {attacks} attacks one past the bound");
    report(1, "threshold sharpness, sync", start, &failures);
}

#[test]
fn criterion_2_capacity() {
    let start = Instant::now();
    let mut failures = vec![];
    let k_sync = max_machines(30, 0.1, 2, Setting::Sync).unwrap();
    if k_sync != 12 {
        failures.push(format!("max_machines(30, 0.1, 2, sync) = {k_sync}"));
    }
    let k_psync = max_machines(30, 0.1, 1, Setting::PartialSync).unwrap();
    if k_psync != 21 {
        failures.push(format!("max_machines(30, 0.1, 1, partial-sync) = {k_psync}"));
    }
    let sync = ExperimentConfig {
        k: Some(12),
        d: 2,
        b: Some(3),
        fault_fraction: 0.1,
        rounds: 50,
        seed: 2,
        adversary: AdversaryModel::mixed(default_catalog()),
        ..ExperimentConfig::new(Protocol::Csm, 30)
    };
    let psync = ExperimentConfig {
        k: Some(21),
        d: 1,
        setting: Setting::PartialSync,
        adversary: AdversaryModel::mixed(vec![
            Strategy::Withhold,
            Strategy::CorruptResult(ValueRule::Coordinated),
            Strategy::CorruptResult(ValueRule::Random),
        ]),
        ..sync.clone()
    };
    for cfg in [sync, psync] {
        let r = run_experiment(&cfg).unwrap();
        if !r.is_clean() || r.rounds_completed != 50 || r.plan.byzantine.len() != 3 {
            failures.push(format!(
                "{} K={}: {} rounds, {} faulty, violations {:?}",
                cfg.setting,
                r.plan.k,
                r.rounds_completed,
                r.plan.byzantine.len(),
                r.violations.first()
            ));
        }
    }
    report(2, "capacity at N = 30, mu = 0.1", start, &failures);
}

#[test]
fn criterion_3_trajectory_equivalence() {
    let start = Instant::now();
    let mut catalog = default_catalog();
    catalog.extend([
        Strategy::CorruptResult(ValueRule::Constant(1)),
        Strategy::CorruptResult(ValueRule::AddOffset(1)),
        Strategy::Delay,
    ]);
    let mut failures = vec![];
    for kind in MachineKind::ALL {
        for seed in 0..100u64 {
            let strategy = catalog[seed as usize % catalog.len()];
            let adversary = if seed % 10 == 9 {
                AdversaryModel::mixed(catalog.clone())
            } else {
                AdversaryModel::uniform(strategy)
            };
            let cfg = ExperimentConfig {
                machine: Some(kind),
                d: kind.build(Field::binary(8).unwrap()).unwrap().total_degree(),
                fault_fraction: 0.25,
                rounds: 20,
                seed,
                channel: if seed % 2 == 0 { ChannelMode::Broadcast } else { ChannelMode::PointToPoint },
                adversary: adversary.with_placement(if seed % 3 == 0 { Placement::Targeted } else { Placement::Random }),
                ..ExperimentConfig::new(Protocol::Csm, 12)
            };
            // the most faults the chosen K tolerates, all of them used
            let plan = cfg.plan().unwrap();
            let b = max_faults(plan.n, plan.k, plan.d, cfg.setting).unwrap();
            let cfg = ExperimentConfig {
                k: Some(plan.k),
                b: Some(b),
                adversary: cfg.adversary.clone().with_count(b),
                ..cfg
            };
            let r = run_experiment(&cfg).unwrap();
            let at_capacity = max_faults(r.plan.n, r.plan.k, r.plan.d, cfg.setting) == Some(r.plan.b)
                && r.plan.byzantine.len() == r.plan.b;
            if !at_capacity
                || !r.is_clean()
                || r.rounds_completed != 20
                || r.outputs != r.oracle_outputs
                || r.states != r.oracle_states
            {
                failures.push(format!("{kind:?} seed {seed} {strategy}: b = {} K = {}, {:?}", r.plan.b, r.plan.k, r.violations.first()));
            }
        }
    }
    report(3, "trajectory equivalence", start, &failures);
}

#[test]
fn criterion_4_intermix_fuzz() {
    let start = Instant::now();
    let f = Field::prime(97).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = vec![];
    let (mut frauds, mut honest, mut transcripts) = (0, 0, 0);
    for inst in 0..10_000u64 {
        let k = rng.gen_range(2..=64usize);
        let rows = rng.gen_range(1..=16usize);
        let n = rng.gen_range(4..=24usize);
        let a = Matrix::from_rows(f, (0..rows).map(|_| (0..k).map(|_| f.random(&mut rng)).collect()).collect()).unwrap();
        let x: Vec<Fe> = (0..k).map(|_| f.random(&mut rng)).collect();
        let truth = a.mul_vec(&x).unwrap();
        let corruption = match rng.gen_range(0..4) {
            0 => Corruption::None,
            1 => Corruption::Random { count: rng.gen_range(1..=rows) },
            2 => Corruption::OffByOne { row: rng.gen_range(0..rows) },
            _ => Corruption::Entries(vec![(rng.gen_range(0..rows), f.random(&mut rng))]),
        };
        let reply = ReplyRule::ALL[rng.gen_range(0..ReplyRule::ALL.len())];
        let mut worker = Worker::new(WorkerStrategy::new(corruption, reply), inst);
        let committee = elect_committee(n, 0.25, 1e-2, 0, inst).unwrap();
        let session = Session::new(n, 0, &committee, Phase::Other);
        let out = run_intermix(&a, &x, &mut worker, &session).unwrap();
        let fraud = out.claimed != truth;
        if fraud {
            frauds += 1;
            if out.accepted() {
                failures.push(format!("instance {inst}: fraud accepted ({reply:?})"));
            }
        } else {
            honest += 1;
            if !out.accepted() {
                failures.push(format!("instance {inst}: correct product rejected ({reply:?})"));
            }
        }
        let depth = (k as f64).log2().ceil() as usize;
        for t in &out.transcripts {
            transcripts += 1;
            if t.levels.len() > depth || t.path.len() > depth + 1 {
                failures.push(format!("instance {inst}: path {:?} deeper than {depth} for K = {k}", t.path));
            }
            let (_, ops) = counter::measure(|| codedsm::intermix::commoner_check(t, &a, &x, &out.claimed));
            if ops.field_ops() > 4 {
                failures.push(format!("instance {inst}: commoner spent {} operations", ops.field_ops()));
            }
        }
    }
    println!("    {frauds} frauds, {honest} correct products, {transcripts} transcripts");
    report(4, "INTERMIX soundness and completeness", start, &failures);
}

#[test]
fn criterion_5_intermix_cost() {
    let start = Instant::now();
    let f = Field::prime(P_NTT).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = vec![];
    for n in [16usize, 64] {
        for k in [8usize, 32] {
            let a = Matrix::from_rows(f, (0..n).map(|_| (0..k).map(|_| f.random(&mut rng)).collect()).collect()).unwrap();
            let x: Vec<Fe> = (0..k).map(|_| f.random(&mut rng)).collect();
            let committee = elect_committee(n, 0.25, 1e-6, 0, 5).unwrap();
            let j = committee.size;
            let session = Session::new(n, 0, &committee, Phase::Other);
            for reply in [ReplyRule::ConsistentLeft, ReplyRule::ConsistentRight, ReplyRule::ConsistentSplit] {
                let mut w = Worker::new(WorkerStrategy::new(Corruption::OffByOne { row: n / 2 }, reply), 0);
                let (out, ops) = counter::measure(|| run_intermix(&a, &x, &mut w, &session).unwrap());
                let queried = out.transcripts.iter().filter(|t| !t.levels.is_empty()).count();
                let bound = intermix_cost(j, k, n, j, matvec_cost(n, k)).total;
                let measured = ops.field_ops();
                println!("    N={n:>2} K={k:>2} J={j} {reply:?}: {measured} <= {bound}");
                if queried != j || measured > bound {
                    failures.push(format!("N={n} K={k} {reply:?}: {queried} of {j} queried, {measured} > {bound}"));
                }
            }
        }
    }
    report(5, "INTERMIX cost bound", start, &failures);
}

#[test]
fn criterion_6_delegated_decoding() {
    let start = Instant::now();
    let f = Field::prime(P_NTT).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = vec![];
    let mut fabricated = 0;
    for inst in 0..1000u64 {
        let d = rng.gen_range(1..=2usize);
        let n = rng.gen_range(4..=24usize);
        let k = rng.gen_range(1..=(n - 1) / d + 1);
        let dd = d * (k - 1);
        let b = rng.gen_range(0..=(n - dd - 1) / 2);
        let func = if d == 1 { TransitionFunction::bank(f) } else { TransitionFunction::product(f) };
        let cfg = CodingConfig::new(func, k, n, Setting::Sync, b).unwrap();
        let basis = if inst % 2 == 0 { ClaimBasis::Monomial } else { ClaimBasis::Evaluation };
        let deleg = Delegation::new(cfg.clone()).unwrap().with_basis(basis).unwrap();
        let (g, _, _) = random_round(&cfg, &mut rng);
        let coord = rng.gen_range(0..g[0].len());
        let mut values: Vec<Option<Fe>> = g.iter().map(|gi| Some(gi[coord])).collect();
        for i in sample(&mut rng, n, b) {
            values[i] = if rng.gen_bool(0.3) { None } else { Some(f.random(&mut rng)) };
        }
        let cw = NoisyCodeword::new(cfg.domain().alphas().to_vec(), values.clone(), dd, b - values.iter().filter(|v| v.is_none()).count()).unwrap();
        let local = rs::decode(&cw).unwrap().poly;
        let claim = honest_decode_claim(&deleg, &values).unwrap();
        let committee = elect_committee(n, 0.25, 1e-2, 0, inst).unwrap();
        let session = Session::new(n, 0, &committee, Phase::Psi);
        let v = delegated_decode(&deleg, &values, &claim, &mut Worker::honest(), &session).unwrap();
        let local_outputs: Vec<Fe> = cfg.domain().omegas().iter().map(|&w| local.eval(w)).collect();
        if !v.accepted() || deleg.claim_poly(&claim.coeffs).unwrap() != local || claim.outputs != local_outputs {
            failures.push(format!("instance {inst}: honest claim {:?}", v.rejection));
        }
        for fab in Fabrication::ALL {
            let Some(bad) = fab.apply(&deleg, &values, &claim, &mut rng) else { continue };
            let reply = ReplyRule::ALL[rng.gen_range(0..ReplyRule::ALL.len())];
            let mut w = Worker::new(WorkerStrategy::new(Corruption::None, reply), inst);
            fabricated += 1;
            if delegated_decode(&deleg, &values, &bad, &mut w, &session).unwrap().accepted() {
                failures.push(format!("instance {inst}: {fab:?} accepted ({reply:?}, {basis:?})"));
            }
        }
    }
    println!("    1000 honest claims, {fabricated} fabricated claims");
    report(6, "delegated decoding", start, &failures);
}

#[test]
fn criterion_7_throughput_trend() {
    let start = Instant::now();
    let mut failures = vec![];
    let (mut csm, mut full) = (vec![], vec![]);
    for n in [16usize, 32, 64] {
        let base = ExperimentConfig {
            fault_fraction: 0.25,
            d: 1,
            rounds: 3,
            eval_mode: EvalMode::Fast,
            ..ExperimentConfig::new(Protocol::Csm, n)
        };
        let coded = ExperimentConfig { delegated: true, ..base.clone() };
        let (c, _) = measure(&coded, false).unwrap();
        let (r, _) = measure(&ExperimentConfig { protocol: Protocol::Full, k: Some(c.k), ..base }, false).unwrap();
        println!("    N={n:>2} K={:>2}: lambda_csm {:.4e}, lambda_full {:.4e}", c.k, c.lambda, r.lambda);
        csm.push(c.lambda);
        full.push(r.lambda);
    }
    if !csm.windows(2).all(|w| w[1] > w[0]) {
        failures.push(format!("lambda_csm not increasing: {csm:?}"));
    }
    let (lo, hi) = full.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(lo > 0.0 && hi / lo <= 1.05) {
        failures.push(format!("lambda_full varies: {full:?}"));
    }
    let f = Field::prime(P_NTT).unwrap();
    let interp_ops = |n: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let pts: Vec<(Fe, Fe)> = (0..n).map(|i| (f.elem(i as u64 + 1), f.random(&mut rng))).collect();
        counter::measure(|| interpolate(&pts, EvalMode::Fast).unwrap()).1.field_ops()
    };
    for n in [64usize, 128, 256] {
        let ratio = interp_ops(2 * n) as f64 / interp_ops(n) as f64;
        println!("    interpolation ops({})/ops({n}) = {ratio:.3}", 2 * n);
        if ratio > 3.8 {
            failures.push(format!("interpolation ratio {ratio:.3} at n = {n}"));
        }
    }
    report(7, "throughput trend", start, &failures);
}

#[test]
fn criterion_8_boolean_functions() {
    let start = Instant::now();
    let mut failures = vec![];
    let fields: Vec<Field> = [2, 4, 8].iter().map(|&m| Field::binary(m).unwrap()).collect();
    for arity in [2usize, 3] {
        for index in 0..1u64 << (1 << arity) {
            let t = TruthTable::nth(arity, index).unwrap();
            let p = boolean_to_polynomial(&t);
            for i in 0..1usize << arity {
                let bits = input_bits(arity, i);
                let want = t.output(&bits).unwrap();
                if p.eval_f2(&bits).unwrap() != want {
                    failures.push(format!("arity {arity} table {index} input {bits:?} over F_2"));
                }
                for &g in &fields {
                    if eval_embedded(&p, &bits, g).unwrap() != g.elem(want as u64) {
                        failures.push(format!("arity {arity} table {index} input {bits:?} over {g}"));
                    }
                }
            }
        }
    }
    report(8, "Boolean functions as polynomials", start, &failures);
}

#[test]
fn criterion_9_baseline_metrics() {
    let start = Instant::now();
    let mut failures = vec![];
    let (n, mu) = (12usize, 0.25);
    let k_csm = max_machines(n, mu, 1, Setting::Sync).unwrap();
    let q = n / 3;
    let cases = [
        (Protocol::Full, Some(3), 1.0, (n - 1) / 2),
        (Protocol::Partial, Some(3), 3.0, (q - 1) / 2),
        (Protocol::Csm, None, k_csm as f64, (mu * n as f64) as usize),
    ];
    for (protocol, k, gamma, beta) in cases {
        let cfg = ExperimentConfig { k, d: 1, fault_fraction: mu, rounds: 3, ..ExperimentConfig::new(protocol, n) };
        let (m, _) = measure(&cfg, false).unwrap();
        println!("    {protocol}: K = {}, gamma = {}, beta = {}", m.k, m.gamma, m.beta);
        if m.gamma != gamma || m.beta != beta {
            failures.push(format!("{protocol}: (gamma, beta) = ({}, {}), expected ({gamma}, {beta})", m.gamma, m.beta));
        }
    }
    report(9, "storage efficiency and security at N = 12", start, &failures);
}
