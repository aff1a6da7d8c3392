//! A handful of coded rounds of the product machine with one node lying
//! every round.

use codedsm::csm::{uncoded_round, CodedSystem, CodingConfig, Setting};
use codedsm::machine::TransitionFunction;
use codedsm::Field;

fn main() -> codedsm::Result<()> {
    let f = Field::prime(11)?;
    let func = TransitionFunction::product(f);
    let cfg = CodingConfig::new(func.clone(), 2, 5, Setting::Sync, 1)?;
    let mut states = vec![vec![f.elem(3)], vec![f.elem(6)]];
    let mut sys = CodedSystem::new(cfg, &states)?;
    for t in 0..4u64 {
        let cmds = vec![vec![f.elem(t + 2)], vec![f.elem(2 * t + 1)]];
        let liar = t as usize % 5;
        let res = sys.step(&cmds, |i, g| Some(if i == liar { g.iter().map(|&v| v + f.one()).collect() } else { g.to_vec() }))?;
        let (next, outs) = uncoded_round(&func, &states, &cmds)?;
        println!("round {t}: node {liar} lied, agreement {:?}, outputs {:?}", res.agreement, res.outputs);
        assert_eq!(res.outputs, outs);
        states = next;
    }
    Ok(())
}
