//! Prime and binary field arithmetic with operation counting.

use codedsm::field::counter;
use codedsm::Field;

fn main() -> codedsm::Result<()> {
    let f = Field::prime(11)?;
    let (a, b) = (f.elem(7), f.elem(5));
    println!("F_11: 7 + 5 = {}, 7 * 5 = {}, 7 / 5 = {}", a + b, a * b, a / b);

    let g: Field = "gf2^8".parse()?;
    let (x, y) = (g.elem(0x53), g.elem(0xca));
    println!("GF(2^8): 0x53 * 0xca = {:#04x}", (x * y).value());
    println!("GF(2^8): 0x53^-1 = {:#04x}", x.inv()?.value());

    // every arithmetic operation is tallied against the current scope
    let (_, ops) = counter::measure(|| {
        let mut acc = f.one();
        for v in 1..=10 {
            acc *= f.elem(v);
        }
        acc
    });
    println!("10! mod 11 took {} multiplications", ops.muls);
    Ok(())
}
