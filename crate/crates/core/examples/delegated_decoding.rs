//! One worker decodes the round's results for everyone; the claim is
//! checked with two audited products instead of N local decodings.

use codedsm::csm::{CodingConfig, Setting};
use codedsm::field::counter::Phase;
use codedsm::intermix::{
    delegated_decode, elect_committee, honest_decode_claim, Delegation, Fabrication, Session, Worker,
};
use codedsm::machine::TransitionFunction;
use codedsm::Field;
use rand::SeedableRng;

fn main() -> codedsm::Result<()> {
    let f = Field::prime(11)?;
    let cfg = CodingConfig::new(TransitionFunction::product(f), 2, 5, Setting::Sync, 1)?;
    let deleg = Delegation::new(cfg)?;
    // node 1 reported 0 instead of 10
    let values: Vec<_> = [7, 0, 8, 1, 0].iter().map(|&v| Some(f.elem(v))).collect();
    let claim = honest_decode_claim(&deleg, &values)?;
    println!("b = {:?}, tau = {:?}, outputs = {:?}", claim.coeffs, claim.tau, claim.outputs);

    let committee = elect_committee(5, 0.2, 0.1, 2, 3)?;
    let session = Session::new(5, 2, &committee, Phase::Psi);
    let v = delegated_decode(&deleg, &values, &claim, &mut Worker::honest(), &session)?;
    println!("honest claim accepted: {}", v.accepted());

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    for fab in Fabrication::ALL {
        let Some(bad) = fab.apply(&deleg, &values, &claim, &mut rng) else { continue };
        let v = delegated_decode(&deleg, &values, &bad, &mut Worker::honest(), &session)?;
        println!("{fab:?}: {:?}", v.rejection.expect("rejected"));
    }
    Ok(())
}
