//! How many machines N nodes can carry for each fault fraction and degree.

use codedsm::csm::{max_machines, Setting};

fn main() {
    for setting in [Setting::Sync, Setting::PartialSync] {
        println!("{setting}");
        for (n, mu) in [(20, 0.1), (30, 0.1), (40, 0.2), (60, 0.25)] {
            let row: Vec<String> = (1..=3)
                .map(|d| max_machines(n, mu, d, setting).map_or("-".into(), |k| k.to_string()))
                .collect();
            println!("  N = {n:>2}, mu = {mu:<4}: K(d=1,2,3) = {}", row.join(", "));
        }
    }
}
