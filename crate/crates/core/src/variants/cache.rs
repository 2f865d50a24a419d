//! Direct-mapped constant-cache simulator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const LINE_BYTES: u64 = 64;
pub const DEFAULT_CACHE_BYTES: u64 = 16 * 1024;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CacheError {
    #[error("cache size {0} is not a power of two of at least one {LINE_BYTES}-byte line")]
    BadSize(u64),
    #[error("address {address} is outside the registered {region_bytes}-byte read-only region")]
    Unregistered { address: u64, region_bytes: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Access {
    Hit,
    Miss,
}

/// Direct-mapped, 64-byte lines, no prefetch. Addresses are byte offsets
/// into one registered read-only region.
#[derive(Debug, Clone)]
pub struct ConstCacheSim {
    size_bytes: u64,
    region_bytes: u64,
    tags: Vec<Option<u64>>,
    hits: u64,
    misses: u64,
}

pub fn valid_cache_size(size_bytes: u64) -> bool {
    size_bytes >= LINE_BYTES && size_bytes.is_power_of_two()
}

impl ConstCacheSim {
    pub fn new(size_bytes: u64, region_bytes: u64) -> Result<Self, CacheError> {
        if !valid_cache_size(size_bytes) {
            return Err(CacheError::BadSize(size_bytes));
        }
        Ok(Self {
            size_bytes,
            region_bytes,
            tags: vec![None; (size_bytes / LINE_BYTES) as usize],
            hits: 0,
            misses: 0,
        })
    }

    pub fn size_bytes(&self) -> u64 {
        self.size_bytes
    }

    pub fn lines(&self) -> u64 {
        self.tags.len() as u64
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn hit_rate(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            0.0
        } else {
            self.hits as f64 / total as f64
        }
    }

    #[inline]
    pub fn access(&mut self, address: u64) -> Result<Access, CacheError> {
        if address >= self.region_bytes {
            return Err(CacheError::Unregistered {
                address,
                region_bytes: self.region_bytes,
            });
        }
        let line = address / LINE_BYTES;
        // lines is a power of two
        let set = (line & (self.lines() - 1)) as usize;
        let slot = &mut self.tags[set];
        if *slot == Some(line) {
            self.hits += 1;
            Ok(Access::Hit)
        } else {
            *slot = Some(line);
            self.misses += 1;
            Ok(Access::Miss)
        }
    }
}
