//! Deterministic seed derivation.
//!
//! Every source of randomness in this crate is a ChaCha stream seeded through
//! `mix_seed(master, stream)`, so independent components (oracle copies, hash
//! tables, environment noise, samplers) stay decorrelated while whole runs
//! remain reproducible from one master seed.

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

pub fn mix_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream))
}
