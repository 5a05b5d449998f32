//! Block pool backing every temporary tensor.
//!
//! In reuse mode released blocks are kept, keyed by size, and handed back out
//! best-fit; nothing returns to the system until the pool is dropped. In
//! dealloc mode every release frees its block immediately.

use std::collections::BTreeMap;

use crate::error::{Result, RuntimeError};
use crate::tensor::{numel, Element, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PoolMode {
    /// Runtime efficient: released blocks are recycled.
    Reuse,
    /// Memory efficient: released blocks are freed at once.
    Dealloc,
}

impl PoolMode {
    pub fn name(self) -> &'static str {
        match self {
            PoolMode::Reuse => "reuse",
            PoolMode::Dealloc => "dealloc",
        }
    }
}

impl std::str::FromStr for PoolMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "reuse" => Ok(PoolMode::Reuse),
            "dealloc" => Ok(PoolMode::Dealloc),
            other => Err(format!("unknown mode `{other}` (expected reuse|dealloc)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PoolStats {
    pub allocs_from_os: u64,
    pub reuses: u64,
    pub releases: u64,
    pub frees: u64,
    /// Bytes of blocks currently handed out.
    pub live_bytes: usize,
    /// Bytes of blocks parked in the free list.
    pub pooled_bytes: usize,
    pub peak_live_bytes: usize,
    /// Peak of live + pooled bytes, i.e. everything obtained from the system.
    pub peak_footprint_bytes: usize,
}

#[derive(Debug)]
pub struct MemoryPool<T> {
    mode: PoolMode,
    free: BTreeMap<usize, Vec<Vec<T>>>,
    stats: PoolStats,
    cap_bytes: Option<usize>,
}

impl<T: Element> MemoryPool<T> {
    pub fn new(mode: PoolMode) -> Self {
        MemoryPool {
            mode,
            free: BTreeMap::new(),
            stats: PoolStats::default(),
            cap_bytes: None,
        }
    }

    /// Pool that refuses to grow its footprint beyond `cap` bytes.
    pub fn with_hard_cap(mode: PoolMode, cap: usize) -> Self {
        MemoryPool {
            cap_bytes: Some(cap),
            ..Self::new(mode)
        }
    }

    pub fn mode(&self) -> PoolMode {
        self.mode
    }

    pub fn stats(&self) -> PoolStats {
        self.stats
    }

    pub fn reset_peaks(&mut self) {
        self.stats.peak_live_bytes = self.stats.live_bytes;
        self.stats.peak_footprint_bytes = self.stats.live_bytes + self.stats.pooled_bytes;
    }

    /// Sizes of the parked blocks, smallest first.
    pub fn free_blocks(&self) -> Vec<usize> {
        self.free
            .iter()
            .flat_map(|(&size, blocks)| std::iter::repeat_n(size, blocks.len()))
            .collect()
    }

    /// Returns a tensor of `shape` backed by the smallest parked block that
    /// fits, or by a fresh allocation. Contents are unspecified.
    pub fn acquire(&mut self, shape: &[usize]) -> Result<Tensor<T>> {
        let n = numel(shape);
        let bytes = n * T::BYTES;
        if let Some((&size, _)) = self.free.range(bytes..).next() {
            let list = self.free.get_mut(&size).expect("key present");
            let mut buf = list.pop().expect("non-empty free list");
            if list.is_empty() {
                self.free.remove(&size);
            }
            buf.resize(n, T::zero());
            self.stats.reuses += 1;
            self.stats.pooled_bytes -= size;
            self.stats.live_bytes += size;
            self.bump_peaks();
            return Ok(Tensor::from_block(shape, buf, size));
        }

        let footprint = self.stats.live_bytes + self.stats.pooled_bytes;
        if let Some(cap) = self.cap_bytes {
            if footprint + bytes > cap {
                return Err(RuntimeError::PoolExhausted {
                    requested: bytes,
                    in_use: footprint,
                    cap,
                });
            }
        }
        let mut buf = Vec::with_capacity(n);
        buf.resize(n, T::zero());
        self.stats.allocs_from_os += 1;
        self.stats.live_bytes += bytes;
        self.bump_peaks();
        Ok(Tensor::from_block(shape, buf, bytes))
    }

    pub fn acquire_zeroed(&mut self, shape: &[usize]) -> Result<Tensor<T>> {
        let mut t = self.acquire(shape)?;
        t.data_mut().fill(T::zero());
        Ok(t)
    }

    pub fn release(&mut self, t: Tensor<T>) {
        let (buf, size) = t.into_block();
        self.stats.releases += 1;
        self.stats.live_bytes -= size;
        match self.mode {
            PoolMode::Reuse => {
                self.stats.pooled_bytes += size;
                self.free.entry(size).or_default().push(buf);
            }
            PoolMode::Dealloc => {
                self.stats.frees += 1;
                drop(buf);
            }
        }
    }

    fn bump_peaks(&mut self) {
        let s = &mut self.stats;
        s.peak_live_bytes = s.peak_live_bytes.max(s.live_bytes);
        s.peak_footprint_bytes = s.peak_footprint_bytes.max(s.live_bytes + s.pooled_bytes);
    }
}
