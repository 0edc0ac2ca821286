//! Deterministic derivation of independent 32-bit seeds from a master seed.

/// One step of the splitmix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Named streams derived per repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Shuffle = 1,
    PseudoLayers = 2,
    SeedSearch = 3,
}

/// Seed for `stream` of repetition `repetition` under `master`.
pub fn derive_seed(master: u64, repetition: u64, stream: Stream) -> u32 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ repetition.wrapping_mul(0xd6e8_feb8_6659_fd93));
    let c = splitmix64(b ^ stream as u64);
    (c >> 32) as u32
}
