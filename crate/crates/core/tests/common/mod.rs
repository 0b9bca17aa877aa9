//! Seeded random square-free GCD graphs for integration tests.
#![allow(dead_code)]

use dsc_core::gcd_graph::GcdGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SMALL: [u64; 3] = [2, 3, 5];
pub const LARGE: [u64; 12] = [7, 11, 13, 17, 101, 103, 107, 211, 307, 401, 503, 997];

fn vertex(rng: &mut ChaCha8Rng, core: Option<u64>) -> u64 {
    let mut n = 1;
    for &p in &SMALL {
        if rng.gen_bool(0.3) {
            n *= p;
        }
    }
    let mut used = Vec::new();
    if let Some(c) = core {
        if rng.gen_bool(0.85) {
            used.push(c);
        }
    }
    let k = rng.gen_range(1..=2);
    while used.len() < k {
        let p = LARGE[rng.gen_range(0..LARGE.len())];
        if !used.contains(&p) {
            used.push(p);
        }
    }
    n * used.iter().product::<u64>()
}

/// A random graph with `P` empty and `a = b = 1`. Odd seeds cluster the
/// vertices around a common prime so that both lemma parts occur.
pub fn random_graph(seed: u64) -> GcdGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let core = (seed % 2 == 1).then(|| LARGE[rng.gen_range(0..4)]);
    let v: Vec<u64> = (0..rng.gen_range(2..8)).map(|_| vertex(&mut rng, core)).collect();
    let w: Vec<u64> = (0..rng.gen_range(2..8)).map(|_| vertex(&mut rng, core)).collect();
    let mut e = Vec::new();
    for &x in &v {
        for &y in &w {
            if rng.gen_bool(0.5) {
                e.push((x, y));
            }
        }
    }
    if e.is_empty() {
        e.push((v[0], w[0]));
    }
    GcdGraph::new(v, w, e, [], 1, 1).expect("small labels factor")
}
