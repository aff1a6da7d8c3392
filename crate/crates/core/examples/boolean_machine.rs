//! Turn Boolean functions into polynomials over F_2 and evaluate them
//! inside GF(2^8).

use codedsm::boolfunc::{boolean_to_polynomial, eval_embedded, input_bits, TruthTable};
use codedsm::Field;

fn main() -> codedsm::Result<()> {
    let majority = TruthTable::from_fn(3, |b| u8::from(b.iter().map(|&x| x as u32).sum::<u32>() >= 2))?;
    let p = boolean_to_polynomial(&majority);
    println!("majority has {} monomials, degree {}", p.term_count(), p.total_degree());
    let g = Field::binary(8)?;
    for i in 0..8 {
        let bits = input_bits(3, i);
        let v = eval_embedded(&p, &bits, g)?;
        println!("{bits:?} -> {} (table {})", v.value(), majority.output(&bits)?);
    }
    Ok(())
}
