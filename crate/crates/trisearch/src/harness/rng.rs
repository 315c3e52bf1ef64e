//! Seed splitting.
//!
//! An episode seed comes from mixing the base seed with the team size and run index. Every
//! consumer then draws from its own ChaCha8 stream of that seed; the stream id packs the
//! subsystem in the high 32 bits and the robot index in the low 32 bits.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Subsystem {
    Placement = 1,
    Decision = 2,
    Formation = 3,
    Anonymous = 4,
    Lattice = 5,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn episode_seed(base: u64, team_size: usize, run: usize) -> u64 {
    splitmix(splitmix(splitmix(base) ^ team_size as u64) ^ run as u64)
}

pub fn stream(seed: u64, sub: Subsystem, robot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((sub as u64) << 32) | (robot as u64 & 0xffff_ffff));
    rng
}
