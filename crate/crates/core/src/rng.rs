use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mixes a master seed with a path of stream identifiers (splitmix64 finalizer).
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut state = mix(master ^ 0x5851_f42d_4c95_7f2d);
    for &p in path {
        state = mix(state ^ mix(p.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    state
}

pub fn stream(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
