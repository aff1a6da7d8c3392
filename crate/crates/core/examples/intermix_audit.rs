//! A worker claims a matrix-vector product; auditors bisect any row they
//! disagree with and the commoners replay the transcripts.

use codedsm::field::counter::Phase;
use codedsm::intermix::{elect_committee, run_intermix, Corruption, ReplyRule, Session, Worker, WorkerStrategy};
use codedsm::linalg::Matrix;
use codedsm::Field;

fn main() -> codedsm::Result<()> {
    let f = Field::prime(97)?;
    let a = Matrix::from_u64(f, &[&[1, 2, 3, 4, 5, 6, 7, 8], &[8, 7, 6, 5, 4, 3, 2, 1], &[1, 0, 1, 0, 1, 0, 1, 0]])?;
    let x: Vec<_> = (1..=8).map(|v| f.elem(v)).collect();
    let committee = elect_committee(12, 0.25, 1e-3, 0, 42)?;
    println!("committee of {}: {:?}", committee.size, committee.members);
    let session = Session::new(12, 0, &committee, Phase::Other);

    let out = run_intermix(&a, &x, &mut Worker::honest(), &session)?;
    println!("honest worker: {:?}", out.verdict);

    for reply in [ReplyRule::ConsistentLeft, ReplyRule::ConsistentSplit, ReplyRule::Nonresponsive] {
        let mut w = Worker::new(WorkerStrategy::new(Corruption::OffByOne { row: 1 }, reply), 7);
        let out = run_intermix(&a, &x, &mut w, &session)?;
        let t = out.transcripts.iter().find(|t| t.raised()).expect("an alert");
        println!("{reply:?}: {:?}, path {:?}", out.verdict.reason, t.path);
    }
    Ok(())
}
