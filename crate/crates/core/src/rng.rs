//! Seeded random streams.
//!
//! All randomness in the crate flows through ChaCha8 generators so that runs
//! are reproducible and resumable: the training stream's word position is
//! saved in checkpoints and restored on resume. Samples are always drawn as
//! f64 and converted, so the f32 and f64 instantiations of a model consume
//! identical streams.

use crate::scalar::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Distinct sub-streams derived from one user seed.
#[derive(Clone, Copy)]
pub enum Stream {
    /// Parameter initialization.
    Init,
    /// Training-time draws: batch order, timesteps, noise.
    Train,
    /// Inference-time refinement noise.
    Sample,
}

pub fn seeded(seed: u64, stream: Stream) -> ChaCha8Rng {
    let salt = match stream {
        Stream::Init => 0,
        Stream::Train => 1,
        Stream::Sample => 2,
    };
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(salt))
}

/// Standard normal draw via Box-Muller. Two uniforms are consumed per call,
/// keeping the stream layout independent of the output count's parity.
pub fn normal<S: Scalar>(rng: &mut ChaCha8Rng) -> S {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    S::c((-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos())
}

pub fn normal_vec<S: Scalar>(rng: &mut ChaCha8Rng, n: usize) -> Vec<S> {
    (0..n).map(|_| normal(rng)).collect()
}
