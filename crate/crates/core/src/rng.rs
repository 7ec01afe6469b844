//! Counter-addressable innovation draws.
//!
//! Every innovation vector is located by `(master seed, seed stream,
//! replication, time index)`: the key comes from the seed pair, the ChaCha
//! stream is the replication, and the word position is a fixed function of
//! the time index. Each standard variate consumes exactly one `u64`, so any
//! time index can be regenerated without touching its neighbours.

use nalgebra::DMatrix;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::model::{InnovationLaw, InnovationModel};

/// Offset making negative time indices addressable.
const TIME_OFFSET: i128 = 1 << 40;

/// Stream bit reserved for auxiliary draws of a replication.
pub const AUX_STREAM_BIT: u64 = 1 << 63;

pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 256-bit ChaCha key derived from a master seed and a seed stream.
pub fn derive_key(seed: u64, seed_stream: u64) -> [u8; 32] {
    let mut state = seed;
    let mut mix = seed_stream ^ 0x5eed_5eed_5eed_5eed;
    let salt = splitmix64(&mut mix);
    state ^= salt;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Where a set of draws came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub seed_stream: u64,
    pub replication: u64,
}

/// Uniform on `(0, 1]` from the top 53 bits.
#[inline]
fn unit_open_closed(x: u64) -> f64 {
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Source of innovation vectors `ε_j` addressed by time index.
pub trait InnovationField: Sync {
    fn dim(&self) -> usize;

    /// Writes `ε_time` into `out` (length `dim`).
    fn fill(&self, time: i64, out: &mut [f64]);

    /// Writes `ε_first, …, ε_{first+count-1}` row after row into `out`.
    fn fill_block(&self, first: i64, count: usize, out: &mut [f64]) {
        let q = self.dim();
        for (i, row) in out.chunks_exact_mut(q).take(count).enumerate() {
            self.fill(first + i as i64, row);
        }
    }
}

/// Draws `F z` with `z` i.i.d. standardized under the model's law.
#[derive(Debug, Clone)]
pub struct SeededInnovations {
    key: [u8; 32],
    record: SeedRecord,
    stream: u64,
    factor: DMatrix<f64>,
    law: InnovationLaw,
    /// Variates reserved per time index (dimension rounded up to even).
    slots: usize,
    lomax_scale: f64,
}

impl SeededInnovations {
    pub fn new(model: &InnovationModel, seed: u64, replication: u64) -> Result<Self> {
        Self::on_stream(model, seed, replication, replication)
    }

    /// Auxiliary stream of a replication, disjoint from its innovations.
    pub fn auxiliary(
        model: &InnovationModel,
        factor: DMatrix<f64>,
        seed: u64,
        replication: u64,
    ) -> Self {
        let q = factor.nrows();
        let record = SeedRecord {
            seed,
            seed_stream: model.seed_stream(),
            replication,
        };
        Self {
            key: derive_key(seed, model.seed_stream()),
            record,
            stream: replication | AUX_STREAM_BIT,
            factor,
            law: InnovationLaw::Gaussian,
            slots: q + (q & 1),
            lomax_scale: 1.0,
        }
    }

    fn on_stream(
        model: &InnovationModel,
        seed: u64,
        replication: u64,
        stream: u64,
    ) -> Result<Self> {
        let factor = model.factor()?.clone();
        let q = factor.nrows();
        let lomax_scale = match model.law() {
            InnovationLaw::SymmetricLomax { alpha } => {
                (2.0 / ((alpha - 1.0) * (alpha - 2.0))).sqrt().recip()
            }
            InnovationLaw::Gaussian => 1.0,
        };
        Ok(Self {
            key: derive_key(seed, model.seed_stream()),
            record: SeedRecord {
                seed,
                seed_stream: model.seed_stream(),
                replication,
            },
            stream,
            factor,
            law: model.law(),
            slots: q + (q & 1),
            lomax_scale,
        })
    }

    pub fn record(&self) -> SeedRecord {
        self.record
    }

    fn generator_at(&self, time: i64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(self.stream);
        let slot = (time as i128 + TIME_OFFSET) as u128;
        rng.set_word_pos(slot * 2 * self.slots as u128);
        rng
    }

    /// Fills `z` (length `slots`) with standardized variates, one `u64` each.
    fn standard(&self, rng: &mut ChaCha8Rng, z: &mut [f64]) {
        match self.law {
            InnovationLaw::Gaussian => {
                for pair in z.chunks_mut(2) {
                    let u1 = unit_open_closed(rng.next_u64());
                    let u2 = unit_open_closed(rng.next_u64());
                    let r = (-2.0 * u1.ln()).sqrt();
                    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
                    pair[0] = r * c;
                    if pair.len() == 2 {
                        pair[1] = r * s;
                    }
                }
            }
            InnovationLaw::SymmetricLomax { alpha } => {
                for v in z.iter_mut() {
                    let x = rng.next_u64();
                    let magnitude = unit_open_closed(x).powf(-1.0 / alpha) - 1.0;
                    let sign = if x & 1 == 0 { 1.0 } else { -1.0 };
                    *v = sign * magnitude * self.lomax_scale;
                }
            }
        }
    }

    fn apply_factor(&self, z: &[f64], out: &mut [f64]) {
        // factor is lower triangular
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, zk) in z.iter().enumerate().take(i + 1) {
                acc += self.factor[(i, k)] * zk;
            }
            *o = acc;
        }
    }
}

impl InnovationField for SeededInnovations {
    fn dim(&self) -> usize {
        self.factor.nrows()
    }

    fn fill(&self, time: i64, out: &mut [f64]) {
        let mut rng = self.generator_at(time);
        let mut z = vec![0.0; self.slots];
        self.standard(&mut rng, &mut z);
        self.apply_factor(&z, out);
    }

    fn fill_block(&self, first: i64, count: usize, out: &mut [f64]) {
        if count == 0 {
            return;
        }
        let q = self.dim();
        let mut rng = self.generator_at(first);
        let mut z = vec![0.0; self.slots];
        for row in out.chunks_exact_mut(q).take(count) {
            self.standard(&mut rng, &mut z);
            self.apply_factor(&z, row);
        }
    }
}

/// Fixed innovations for `first, first+1, …`; zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct TableInnovations {
    first: i64,
    rows: Vec<Vec<f64>>,
    dim: usize,
}

impl TableInnovations {
    pub fn new(first: i64, rows: Vec<Vec<f64>>) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        assert!(
            rows.iter().all(|r| r.len() == dim),
            "ragged innovation table"
        );
        Self { first, rows, dim }
    }
}

impl InnovationField for TableInnovations {
    fn dim(&self) -> usize {
        self.dim
    }

    fn fill(&self, time: i64, out: &mut [f64]) {
        let idx = time - self.first;
        match usize::try_from(idx).ok().and_then(|i| self.rows.get(i)) {
            Some(row) => out.copy_from_slice(row),
            None => out.fill(0.0),
        }
    }
}

/// `count` innovation vectors for time indices `1..=count` as rows.
pub fn sample_innovations(
    model: &InnovationModel,
    count: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let field = SeededInnovations::new(model, seed, 0)?;
    let q = field.dim();
    let mut buf = vec![0.0; count * q];
    field.fill_block(1, count, &mut buf);
    Ok(DMatrix::from_row_slice(count, q, &buf))
}
