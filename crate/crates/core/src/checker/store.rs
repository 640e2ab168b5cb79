//! Visited-state set: encoded states packed in one arena, indexed by a hash
//! table of state numbers. Lookups hash the encoding and confirm candidates
//! by comparing the full bytes.

use std::hash::BuildHasher;

use hashbrown::HashTable;
use rustc_hash::FxBuildHasher;

use super::codec;
use crate::cluster::GlobalState;
use crate::types::Config;

const PAGE: usize = 1 << 24;

/// Encoded states packed into fixed-size pages, so growing the store never
/// copies what is already stored. A state never straddles two pages.
#[derive(Default)]
struct Arena {
    pages: Vec<Vec<u8>>,
    /// Start of each state as `page * PAGE + offset`, plus the end of the last.
    starts: Vec<u64>,
    ends: Vec<u32>,
}

impl Arena {
    fn len(&self) -> usize {
        self.starts.len()
    }

    fn get(&self, idx: u32) -> &[u8] {
        let i = idx as usize;
        let start = self.starts[i] as usize;
        let page = &self.pages[start / PAGE];
        &page[start % PAGE..self.ends[i] as usize]
    }

    fn push(&mut self, bytes: &[u8]) {
        let needs_page = self
            .pages
            .last()
            .is_none_or(|p| p.len() + bytes.len() > p.capacity());
        if needs_page {
            assert!(
                bytes.len() <= PAGE,
                "state encoding larger than an arena page"
            );
            self.pages.push(Vec::with_capacity(PAGE));
        }
        let page_no = self.pages.len() - 1;
        let page = self.pages.last_mut().expect("a page exists");
        self.starts.push((page_no * PAGE + page.len()) as u64);
        page.extend_from_slice(bytes);
        self.ends.push(page.len() as u32);
    }

    fn memory_bytes(&self) -> usize {
        self.pages.iter().map(Vec::capacity).sum::<usize>()
            + self.starts.capacity() * 8
            + self.ends.capacity() * 4
    }
}

#[derive(Default)]
pub struct StateStore {
    arena: Arena,
    table: HashTable<u32>,
    hasher: FxBuildHasher,
}

impl StateStore {
    pub fn new() -> StateStore {
        StateStore::default()
    }

    pub fn len(&self) -> usize {
        self.arena.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, idx: u32) -> &[u8] {
        self.arena.get(idx)
    }

    pub fn find(&self, bytes: &[u8]) -> Option<u32> {
        let hash = self.hasher.hash_one(bytes);
        self.table
            .find(hash, |&idx| self.get(idx) == bytes)
            .copied()
    }

    pub fn contains(&self, bytes: &[u8]) -> bool {
        self.find(bytes).is_some()
    }

    /// Looks `g` up by structure, ignoring its network model.
    pub fn contains_state(&self, g: &GlobalState, cfg: &Config) -> bool {
        self.contains(&codec::encode_to_vec(g, cfg))
    }

    /// Inserts `bytes` unless present. Returns the state number and whether it
    /// was new. `None` when absent and `allow_new` is false.
    pub fn insert(&mut self, bytes: &[u8], allow_new: bool) -> Option<(u32, bool)> {
        let hash = self.hasher.hash_one(bytes);
        let Self {
            arena,
            table,
            hasher,
        } = self;
        if let Some(&idx) = table.find(hash, |&idx| arena.get(idx) == bytes) {
            return Some((idx, false));
        }
        if !allow_new {
            return None;
        }
        let idx = u32::try_from(arena.len()).expect("state count fits in u32");
        arena.push(bytes);
        let arena = &*arena;
        table.insert_unique(hash, idx, |&i| hasher.hash_one(arena.get(i)));
        Some((idx, true))
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u8]> + '_ {
        (0..self.len() as u32).map(|i| self.get(i))
    }

    /// Approximate heap footprint in bytes.
    pub fn memory_bytes(&self) -> usize {
        self.arena.memory_bytes() + self.table.capacity() * 5
    }
}
