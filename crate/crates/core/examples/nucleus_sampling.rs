//! Temperature scaling, nucleus filtering and seeded draws on a small
//! distribution.
//!
//! cargo run --example nucleus_sampling

use std::collections::BTreeMap;

use mdlfuzz::sampler::{apply_temperature, nucleus_filter, sample_token, TokenDistribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pmf = TokenDistribution::from_weights([("a", 0.5), ("b", 0.3), ("c", 0.15), ("d", 0.05)])?;
    for n in [0.5, 0.7, 0.9, 1.0] {
        println!("nucleus {n}: {:?}", nucleus_filter(&pmf, n)?.entries());
    }
    for t in [0.5, 1.0, 2.0] {
        println!("temperature {t}: {:?}", apply_temperature(&pmf, t)?.entries());
    }

    let kept = nucleus_filter(&pmf, 0.7)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut counts = BTreeMap::new();
    for _ in 0..10_000 {
        *counts.entry(sample_token(&kept, &mut rng)?).or_insert(0) += 1;
    }
    println!("10000 draws at nucleus 0.7: {counts:?}");
    Ok(())
}
