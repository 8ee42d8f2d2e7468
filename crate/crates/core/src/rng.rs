//! Seeded random streams.
//!
//! Every stream is a ChaCha8 keystream keyed by the master seed and selected
//! by a 64-bit stream id derived from `(path_index, tag)`. Distinct triples
//! never share keystream blocks, so paths can be generated on any worker in
//! any order and still reproduce bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Which random stream of a path is being drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamTag {
    Brownian,
    Levy,
    /// Reference samples, bootstrap resampling, probe points.
    Auxiliary,
}

impl StreamTag {
    fn code(self) -> u64 {
        match self {
            StreamTag::Brownian => 0,
            StreamTag::Levy => 1,
            StreamTag::Auxiliary => 2,
        }
    }
}

const TAG_BITS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedPolicy {
    pub master_seed: u64,
    pub path_index: u64,
    pub stream_tag: StreamTag,
}

impl SeedPolicy {
    pub fn new(master_seed: u64, path_index: u64, stream_tag: StreamTag) -> Self {
        Self {
            master_seed,
            path_index,
            stream_tag,
        }
    }

    pub fn with_tag(self, stream_tag: StreamTag) -> Self {
        Self { stream_tag, ..self }
    }

    pub fn with_path(self, path_index: u64) -> Self {
        Self { path_index, ..self }
    }

    /// The random generator for this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        assert!(
            self.path_index < (1u64 << (64 - TAG_BITS)),
            "path index out of range"
        );
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream((self.path_index << TAG_BITS) | self.stream_tag.code());
        rng
    }
}
