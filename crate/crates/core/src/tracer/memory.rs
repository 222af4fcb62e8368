//! Byte-addressed memory backing string data during a traced run.
//!
//! String values at the micro-op level are (base, length) references into
//! this space. The address layout is a fixed convention shared with the
//! lifter: argument regions sit at `ARG_BASE + i * ARG_STRIDE` with
//! capacity `ARG_CAPACITY` (so rebinding a symbolic argument with a longer
//! string stays in-region), the canonical empty string lives at
//! `EMPTY_BASE`, and every other string (interned literals, operation
//! results) is allocated from `HEAP_BASE` upward.

use std::collections::{BTreeMap, HashMap};

pub const EMPTY_BASE: u64 = 16;
pub const ARG_BASE: u64 = 0x1000;
pub const ARG_STRIDE: u64 = 0x2000;
pub const ARG_CAPACITY: usize = 4096;
pub const HEAP_BASE: u64 = 0x10_0000;

pub fn arg_region_base(index: usize) -> u64 {
    ARG_BASE + (index as u64) * ARG_STRIDE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RegionClass {
    StringData,
    Scratch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub base: u64,
    pub len: usize,
    pub class: RegionClass,
}

impl Region {
    pub fn contains(&self, addr: u64) -> bool {
        addr >= self.base && addr < self.base + self.len as u64
    }
}

#[derive(Debug, Clone, Default)]
pub struct TraceMemory {
    bytes: HashMap<u64, u8>,
    regions: BTreeMap<u64, Region>,
    next_heap: u64,
    interned: HashMap<Vec<u8>, u64>,
}

impl TraceMemory {
    pub fn new() -> Self {
        let mut mem = TraceMemory {
            bytes: HashMap::new(),
            regions: BTreeMap::new(),
            next_heap: HEAP_BASE,
            interned: HashMap::new(),
        };
        mem.add_region(Region { base: EMPTY_BASE, len: 0, class: RegionClass::StringData });
        mem
    }

    pub fn regions(&self) -> impl Iterator<Item = &Region> {
        self.regions.values()
    }

    pub fn add_region(&mut self, region: Region) {
        debug_assert!(
            !self
                .regions
                .values()
                .any(|r| region.base < r.base + r.len.max(1) as u64
                    && r.base < region.base + region.len.max(1) as u64),
            "overlapping region at {:#x}",
            region.base
        );
        self.regions.insert(region.base, region);
    }

    pub fn region_at(&self, addr: u64) -> Option<&Region> {
        self.regions.range(..=addr).next_back().map(|(_, r)| r).filter(|r| r.contains(addr))
    }

    /// Allocate a fresh heap region. Zero-length strings all share
    /// `EMPTY_BASE`.
    pub fn alloc(&mut self, len: usize) -> u64 {
        if len == 0 {
            return EMPTY_BASE;
        }
        let base = self.next_heap;
        self.next_heap += ((len as u64) + 15) & !15;
        self.add_region(Region { base, len, class: RegionClass::StringData });
        base
    }

    /// Return the interned base for this exact byte content, allocating on
    /// first use. The caller is responsible for emitting the
    /// materialization writes exactly when `newly_allocated` is true.
    pub fn intern(&mut self, content: &[u8]) -> (u64, bool) {
        if content.is_empty() {
            return (EMPTY_BASE, false);
        }
        if let Some(&base) = self.interned.get(content) {
            return (base, false);
        }
        let base = self.alloc(content.len());
        self.interned.insert(content.to_vec(), base);
        (base, true)
    }

    /// Install an argument region at its fixed base and write the bytes.
    pub fn install_arg(&mut self, index: usize, content: &[u8]) -> u64 {
        let base = arg_region_base(index);
        assert!(content.len() <= ARG_CAPACITY, "argument exceeds region capacity");
        self.add_region(Region { base, len: ARG_CAPACITY, class: RegionClass::StringData });
        for (k, &b) in content.iter().enumerate() {
            self.bytes.insert(base + k as u64, b);
        }
        base
    }

    pub fn read8(&self, addr: u64) -> Option<u8> {
        self.region_at(addr)?;
        Some(self.bytes.get(&addr).copied().unwrap_or(0))
    }

    pub fn write8(&mut self, addr: u64, value: u8) -> bool {
        if self.region_at(addr).is_none() {
            return false;
        }
        self.bytes.insert(addr, value);
        true
    }

    pub fn read_bytes(&self, base: u64, len: usize) -> Option<Vec<u8>> {
        (0..len).map(|k| self.read8(base + k as u64)).collect()
    }
}
