//! Reed-Solomon decoding with errors and erasures, Berlekamp-Welch and Gao.

use codedsm::poly::{DensePoly, EvalMode};
use codedsm::rs::{self, NoisyCodeword};
use codedsm::Field;

fn main() -> codedsm::Result<()> {
    let f = Field::prime(97)?;
    let p = DensePoly::from_u64(f, &[5, 0, 3, 1]);
    let points: Vec<_> = (1..=12).map(|v| f.elem(v)).collect();
    let mut values: Vec<_> = points.iter().map(|&x| Some(p.eval(x))).collect();
    values[2] = Some(values[2].unwrap() + f.elem(9));
    values[7] = Some(f.elem(0));
    values[10] = None;
    // 11 values left, degree 3: up to 3 errors
    let cw = NoisyCodeword::new(points, values, 3, 3)?;
    let bw = rs::decode(&cw)?;
    let gao = rs::decode_gao(&cw, EvalMode::Auto)?;
    println!("sent      {p}");
    println!("BW        {} agreeing on {:?}", bw.poly, bw.agreement);
    println!("Gao       {}", gao.poly);
    assert_eq!(bw.poly, p);
    assert_eq!(gao.poly, p);
    Ok(())
}
