//! Encode two machine states with Lagrange coding and check that every
//! node's share lies on the same low-degree polynomial.

use codedsm::csm::{encode_states, CodingConfig, Setting};
use codedsm::machine::TransitionFunction;
use codedsm::poly::interpolate;
use codedsm::Field;

fn main() -> codedsm::Result<()> {
    let f = Field::prime(11)?;
    let cfg = CodingConfig::new(TransitionFunction::product(f), 2, 5, Setting::Sync, 1)?;
    let states = vec![vec![f.elem(3)], vec![f.elem(6)]];
    let coded = encode_states(&states, &cfg)?;
    let dom = cfg.domain();
    for (i, s) in coded.iter().enumerate() {
        println!("node {i} at alpha = {:>2}: coded state {}", dom.alphas()[i], s[0]);
    }
    let pts: Vec<_> = dom.alphas().iter().zip(&coded).map(|(&a, s)| (a, s[0])).collect();
    let u = interpolate(&pts, cfg.domain().mode())?;
    println!("u(z) = {u}, degree {:?} (K - 1 = 1)", u.degree());
    for (k, &w) in dom.omegas().iter().enumerate() {
        println!("u(omega_{}) = {} (state {})", k + 1, u.eval(w), states[k][0]);
    }
    Ok(())
}
