//! Counter-based random streams.
//!
//! A stream is a ChaCha8 keystream selected by `(seed, stream_id)`. Large
//! sample requests are cut into fixed-size chunks; chunk `c` reads the
//! keystream starting at word `c << 40`, so chunks never overlap and any
//! chunk can be regenerated without touching the others. Results are
//! therefore identical for every worker count.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Number of draws per parallel work unit.
pub const CHUNK_SIZE: usize = 1 << 14;

const CHUNK_WORD_SHIFT: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// A sibling stream with the same seed and a different id.
    pub fn with_stream(self, stream_id: u64) -> Self {
        Self { stream_id, ..self }
    }

    pub fn chunk(&self, chunk: u64) -> Gaussians {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng.set_word_pos((chunk as u128) << CHUNK_WORD_SHIFT);
        Gaussians { rng, spare: None }
    }

    /// Generator positioned at the start of the stream.
    pub fn generator(&self) -> Gaussians {
        self.chunk(0)
    }
}

/// Uniform and standard normal variates drawn from one keystream position.
///
/// Normals use the Box-Muller transform, two per pair of uniforms.
pub struct Gaussians {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl Gaussians {
    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on (0, 1].
    pub fn uniform_open0(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        ((self.uniform() * bound as f64) as usize).min(bound - 1)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let radius = (-2.0 * self.uniform_open0().ln()).sqrt();
        let angle = std::f64::consts::TAU * self.uniform();
        let (s, c) = angle.sin_cos();
        self.spare = Some(radius * s);
        radius * c
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.normal();
        }
    }

    /// Uniform point on the unit sphere in `out.len()` dimensions.
    pub fn unit_vector(&mut self, out: &mut [f64]) {
        loop {
            self.fill_normal(out);
            let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-300 {
                out.iter_mut().for_each(|x| *x /= norm);
                return;
            }
        }
    }
}

/// Runs `work(generator, len)` over consecutive chunks covering `count`
/// draws and returns the per-chunk results in chunk order.
pub fn map_chunks<R, F>(count: usize, stream: RngStream, work: F) -> Vec<R>
where
    R: Send,
    F: Fn(&mut Gaussians, usize) -> R + Sync,
{
    let chunks = count.div_ceil(CHUNK_SIZE);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK_SIZE.min(count - c * CHUNK_SIZE);
            let mut g = stream.chunk(c as u64);
            work(&mut g, len)
        })
        .collect()
}
