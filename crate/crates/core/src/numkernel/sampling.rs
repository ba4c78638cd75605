//! Seeded, order-independent random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{ChiSquared, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifies one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    pub fn with_stream(self, stream_index: u64) -> Self {
        Self {
            stream_index,
            ..self
        }
    }

    /// Stream seed: `splitmix64(master ^ splitmix64(stream + φ64))`.
    pub fn stream_seed(&self) -> u64 {
        splitmix64(
            self.master_seed ^ splitmix64(self.stream_index.wrapping_add(0x9E37_79B9_7F4A_7C15)),
        )
    }

    pub fn rng(&self) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(self.stream_seed())
    }
}

/// SplitMix64 output function (Steele, Lea & Flood 2014).
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `count` independent χ²_df draws from the stream named by `seed`.
pub fn sample_chi2(df: f64, seed: SeedSpec, count: usize) -> Result<Vec<f64>> {
    let dist =
        ChiSquared::new(df).map_err(|e| Error::domain("sample_chi2", format!("df={df}: {e}")))?;
    if !(df.is_finite() && df > 0.0) {
        return Err(Error::domain(
            "sample_chi2",
            format!("df must be finite and > 0, got {df}"),
        ));
    }
    let mut rng = seed.rng();
    Ok((0..count).map(|_| dist.sample(&mut rng)).collect())
}
