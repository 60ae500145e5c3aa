//! Skip lists whose tower heights follow predicted query frequencies.
//!
//! An item with predicted frequency `p` among `n` items is guaranteed to reach
//! level `max(0, 1 + floor(log2(n p)))`; above that floor it keeps climbing
//! while a fair coin lands heads, exactly like an ordinary skip list. With
//! uniform predictions the structure degenerates to a classic skip list with
//! one extra full level.
//!
//! ```text
//! L2: HEAD --------------> 17 ------------------>
//! L1: HEAD ------> 5 ----> 17 ----------> 40 --->
//! L0: HEAD -> 2 -> 5 -> 9 -> 17 -> 23 -> 40 -> 51
//! ```
//!
//! Storage is an arena of towers: `next[l]` of a node is its successor on
//! level `l`, so the nesting of levels holds by construction.

use std::cmp::Ordering;
use std::fmt::{self, Display};

use thiserror::Error;

use crate::oracle::ProbabilityVector;
use crate::rng::hash_unit;
use crate::Key;

/// Hard cap on tower height.
pub const MAX_LEVELS: usize = 64;

/// Relative slack when comparing `n * p` against a power of two, so that a
/// normalized `1/n` still meets the level-1 threshold after rounding.
const LEVEL_EPS: f64 = 1e-9;

const NIL: u32 = u32::MAX;

#[derive(Debug, Error, PartialEq)]
pub enum SkipListError {
    #[error("{items} items but {predictions} predictions")]
    Misaligned { items: usize, predictions: usize },
    #[error("items are not strictly increasing at index {0}")]
    Unsorted(usize),
    #[error("promotion probability {0} outside (0, 1)")]
    InvalidP(f64),
    #[error("prediction {value} at index {index} outside [0, 1]")]
    InvalidPrediction { index: usize, value: f64 },
    #[error("key already present")]
    DuplicateKey,
    #[error("key not found")]
    KeyNotFound,
    #[error("more than {} items", u32::MAX - 1)]
    TooLarge,
}

/// Lowest level an item is guaranteed to reach: the largest `l` with
/// `p >= 2^(l-1) / n`, or 0 when none qualifies.
pub fn deterministic_level(p: f64, n: usize) -> usize {
    if !(p > 0.0) || n == 0 {
        return 0;
    }
    let scaled = p * n as f64 * (1.0 + LEVEL_EPS);
    if scaled < 1.0 {
        0
    } else {
        (1 + scaled.log2().floor() as usize).min(MAX_LEVELS - 1)
    }
}

/// Source of promotion decisions.
pub trait CoinSource {
    /// Whether `item`, present on `level - 1`, is promoted to `level`.
    fn promote(&mut self, item: u64, level: usize, p: f64) -> bool;
}

/// Coins derived from `(seed, item, level)`.
///
/// Two lists built from the same seed over the same items see the same coin
/// for every item and level, regardless of their predictions.
#[derive(Debug, Clone, Copy)]
pub struct SeededCoins(pub u64);

impl CoinSource for SeededCoins {
    fn promote(&mut self, item: u64, level: usize, p: f64) -> bool {
        hash_unit(self.0, item, level as u64) < p
    }
}

/// Never promotes.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysTails;

impl CoinSource for AlwaysTails {
    fn promote(&mut self, _: u64, _: usize, _: f64) -> bool {
        false
    }
}

/// Outcome of one search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchResult {
    pub found: bool,
    /// Pointer moves: every step right and every step down. A miss ends with
    /// a step down off level 0.
    pub steps: u32,
    /// Key comparisons.
    pub comparisons: u32,
    /// Level on which the search ended.
    pub terminal_level: usize,
}

#[derive(Debug, Clone)]
struct Node<K> {
    key: K,
    prob: f64,
    next: Vec<u32>,
}

/// A skip list with prediction-driven tower heights.
#[derive(Debug, Clone)]
pub struct LearnedSkipList<K> {
    nodes: Vec<Node<K>>,
    /// successor of the head sentinel on each level
    head: Vec<u32>,
    seed: u64,
    next_id: u64,
}

fn tower_height<C: CoinSource>(floor: usize, id: u64, promote_p: f64, coins: &mut C) -> usize {
    let mut level = floor;
    while level + 1 < MAX_LEVELS && coins.promote(id, level + 1, promote_p) {
        level += 1;
    }
    level + 1
}

fn check_sorted<K: Ord>(items: &[K]) -> Result<(), SkipListError> {
    match items.windows(2).position(|w| w[0] >= w[1]) {
        Some(i) => Err(SkipListError::Unsorted(i + 1)),
        None => Ok(()),
    }
}

impl<K: Ord> LearnedSkipList<K> {
    /// An empty list; `rng_seed` drives the coins of later inserts.
    pub fn new(rng_seed: u64) -> Self {
        Self { nodes: Vec::new(), head: Vec::new(), seed: rng_seed, next_id: 0 }
    }

    /// Builds the list over strictly increasing `items`, `predictions[i]`
    /// being the predicted frequency of `items[i]`.
    pub fn build(items: Vec<K>, predictions: &[f64], rng_seed: u64) -> Result<Self, SkipListError> {
        Self::build_with_coins(items, predictions, rng_seed, &mut SeededCoins(rng_seed))
    }

    pub fn build_with_coins<C: CoinSource>(
        items: Vec<K>,
        predictions: &[f64],
        rng_seed: u64,
        coins: &mut C,
    ) -> Result<Self, SkipListError> {
        if items.len() != predictions.len() {
            return Err(SkipListError::Misaligned { items: items.len(), predictions: predictions.len() });
        }
        if let Some((index, &value)) =
            predictions.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(SkipListError::InvalidPrediction { index, value });
        }
        check_sorted(&items)?;
        let n = items.len();
        let heights = predictions
            .iter()
            .enumerate()
            .map(|(i, &p)| tower_height(deterministic_level(p, n), i as u64, 0.5, coins));
        Self::link(items, predictions.iter().copied(), heights.collect(), rng_seed)
    }

    /// Classic skip list: every item starts at level 0 and climbs one level
    /// per successful coin flip with probability `promote_p`.
    pub fn classic_build(items: Vec<K>, promote_p: f64, rng_seed: u64) -> Result<Self, SkipListError> {
        Self::classic_build_with_coins(items, promote_p, rng_seed, &mut SeededCoins(rng_seed))
    }

    pub fn classic_build_with_coins<C: CoinSource>(
        items: Vec<K>,
        promote_p: f64,
        rng_seed: u64,
        coins: &mut C,
    ) -> Result<Self, SkipListError> {
        if !(promote_p > 0.0 && promote_p < 1.0) {
            return Err(SkipListError::InvalidP(promote_p));
        }
        check_sorted(&items)?;
        let n = items.len();
        let heights = (0..n).map(|i| tower_height(0, i as u64, promote_p, coins)).collect();
        Self::link(items, std::iter::repeat_n(0.0, n), heights, rng_seed)
    }

    fn link(
        items: Vec<K>,
        probs: impl Iterator<Item = f64>,
        heights: Vec<usize>,
        seed: u64,
    ) -> Result<Self, SkipListError> {
        if items.len() >= NIL as usize {
            return Err(SkipListError::TooLarge);
        }
        let top = heights.iter().copied().max().unwrap_or(0);
        let mut head = vec![NIL; top];
        let mut last = vec![NIL; top];
        let mut nodes: Vec<Node<K>> = Vec::with_capacity(items.len());
        for (i, ((key, prob), h)) in items.into_iter().zip(probs).zip(heights).enumerate() {
            let idx = i as u32;
            for l in 0..h {
                match last[l] {
                    NIL => head[l] = idx,
                    prev => nodes[prev as usize].next[l] = idx,
                }
                last[l] = idx;
            }
            nodes.push(Node { key, prob, next: vec![NIL; h] });
        }
        let next_id = nodes.len() as u64;
        Ok(Self { nodes, head, seed, next_id })
    }

    #[inline]
    fn next_of(&self, at: u32, level: usize) -> u32 {
        match at {
            NIL => self.head[level],
            i => self.nodes[i as usize].next[level],
        }
    }

    /// Top-down search from the head sentinel on the highest level.
    pub fn search(&self, key: &K) -> SearchResult {
        let mut result = SearchResult { found: false, steps: 0, comparisons: 0, terminal_level: 0 };
        let Some(mut level) = self.head.len().checked_sub(1) else {
            return result;
        };
        let mut at = NIL;
        loop {
            let next = self.next_of(at, level);
            if next != NIL {
                result.comparisons += 1;
                match self.nodes[next as usize].key.cmp(key) {
                    Ordering::Less => {
                        at = next;
                        result.steps += 1;
                        continue;
                    }
                    Ordering::Equal => {
                        result.steps += 1;
                        result.found = true;
                        result.terminal_level = level;
                        return result;
                    }
                    Ordering::Greater => {}
                }
            }
            result.steps += 1;
            if level == 0 {
                return result;
            }
            level -= 1;
        }
    }

    pub fn contains(&self, key: &K) -> bool {
        self.search(key).found
    }

    /// Inserts `key` with predicted frequency `p_key`. Its floor is computed
    /// against the item count after insertion; existing towers are unchanged.
    pub fn insert(&mut self, key: K, p_key: f64) -> Result<(), SkipListError> {
        let mut coins = SeededCoins(self.seed);
        self.insert_with_coins(key, p_key, &mut coins)
    }

    pub fn insert_with_coins<C: CoinSource>(
        &mut self,
        key: K,
        p_key: f64,
        coins: &mut C,
    ) -> Result<(), SkipListError> {
        if !(0.0..=1.0).contains(&p_key) {
            return Err(SkipListError::InvalidPrediction { index: self.nodes.len(), value: p_key });
        }
        if self.nodes.len() + 1 >= NIL as usize {
            return Err(SkipListError::TooLarge);
        }
        // predecessor on every level, NIL meaning the head sentinel
        let mut update = vec![NIL; self.head.len()];
        let mut at = NIL;
        for level in (0..self.head.len()).rev() {
            loop {
                let next = self.next_of(at, level);
                if next == NIL {
                    break;
                }
                match self.nodes[next as usize].key.cmp(&key) {
                    Ordering::Less => at = next,
                    Ordering::Equal => return Err(SkipListError::DuplicateKey),
                    Ordering::Greater => break,
                }
            }
            update[level] = at;
        }

        let id = self.next_id;
        self.next_id += 1;
        let floor = deterministic_level(p_key, self.nodes.len() + 1);
        let height = tower_height(floor, id, 0.5, coins);
        if height > self.head.len() {
            self.head.resize(height, NIL);
            update.resize(height, NIL);
        }
        let idx = self.nodes.len() as u32;
        let next: Vec<u32> = (0..height).map(|l| self.next_of(update[l], l)).collect();
        self.nodes.push(Node { key, prob: p_key, next });
        for (l, &pred) in update.iter().enumerate().take(height) {
            match pred {
                NIL => self.head[l] = idx,
                p => self.nodes[p as usize].next[l] = idx,
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of the highest non-empty level plus one.
    pub fn num_levels(&self) -> usize {
        self.head.len()
    }

    pub fn rng_seed(&self) -> u64 {
        self.seed
    }

    fn find(&self, key: &K) -> Option<usize> {
        let mut at = NIL;
        for level in (0..self.head.len()).rev() {
            loop {
                let next = self.next_of(at, level);
                if next == NIL {
                    break;
                }
                match self.nodes[next as usize].key.cmp(key) {
                    Ordering::Less => at = next,
                    Ordering::Equal => return Some(next as usize),
                    Ordering::Greater => break,
                }
            }
        }
        None
    }

    /// Highest level containing `key`.
    pub fn level_of(&self, key: &K) -> Result<usize, SkipListError> {
        self.find(key)
            .map(|i| self.nodes[i].next.len() - 1)
            .ok_or(SkipListError::KeyNotFound)
    }

    /// Prediction the key was inserted with (0 for classic builds).
    pub fn prediction_of(&self, key: &K) -> Option<f64> {
        self.find(key).map(|i| self.nodes[i].prob)
    }

    /// Keys on `level`, in list order.
    pub fn level_keys(&self, level: usize) -> Vec<&K> {
        let mut out = Vec::new();
        if level >= self.head.len() {
            return out;
        }
        let mut at = self.head[level];
        while at != NIL {
            let node = &self.nodes[at as usize];
            out.push(&node.key);
            at = node.next[level];
        }
        out
    }

    /// Item count per level, level 0 first.
    pub fn level_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.head.len()];
        for node in &self.nodes {
            for s in sizes.iter_mut().take(node.next.len()) {
                *s += 1;
            }
        }
        sizes
    }

    /// Keys with their tower top and prediction, in key order.
    pub fn towers(&self) -> impl Iterator<Item = (&K, usize, f64)> + '_ {
        self.level_keys_idx(0)
            .into_iter()
            .map(move |i| (&self.nodes[i].key, self.nodes[i].next.len() - 1, self.nodes[i].prob))
    }

    fn level_keys_idx(&self, level: usize) -> Vec<usize> {
        let mut out = Vec::new();
        if level >= self.head.len() {
            return out;
        }
        let mut at = self.head[level];
        while at != NIL {
            out.push(at as usize);
            at = self.nodes[at as usize].next[level];
        }
        out
    }

    /// Verifies that level 0 holds every item, that every level is strictly
    /// increasing and that each level is a sublist of the one below.
    pub fn check_invariants(&self) -> Result<(), String> {
        let base = self.level_keys_idx(0);
        if base.len() != self.nodes.len() {
            return Err(format!("level 0 has {} of {} items", base.len(), self.nodes.len()));
        }
        for level in 0..self.head.len() {
            let keys = self.level_keys_idx(level);
            if keys.is_empty() {
                return Err(format!("level {level} is empty"));
            }
            if keys.windows(2).any(|w| self.nodes[w[0]].key >= self.nodes[w[1]].key) {
                return Err(format!("level {level} is not sorted"));
            }
            let expected = self.nodes.iter().filter(|n| n.next.len() > level).count();
            if keys.len() != expected {
                return Err(format!("level {level} links {} of {expected} towers", keys.len()));
            }
            if level > 0 {
                let below = self.level_keys_idx(level - 1);
                let mut it = below.iter();
                if !keys.iter().all(|k| it.any(|b| b == k)) {
                    return Err(format!("level {level} is not a sublist of level {}", level - 1));
                }
            }
        }
        Ok(())
    }
}

impl LearnedSkipList<Key> {
    /// Builds over the keys of `p`, sorting them first.
    pub fn from_predictions(p: &ProbabilityVector, rng_seed: u64) -> Result<Self, SkipListError> {
        let mut pairs: Vec<(Key, f64)> = p.iter().collect();
        pairs.sort_unstable_by_key(|&(k, _)| k);
        let (items, probs): (Vec<Key>, Vec<f64>) = pairs.into_iter().unzip();
        Self::build(items, &probs, rng_seed)
    }
}

impl<K: Ord + Display> LearnedSkipList<K> {
    /// One line per level, highest first, keys separated by spaces.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for level in (0..self.head.len()).rev() {
            let line: Vec<String> = self.level_keys(level).iter().map(|k| k.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

impl<K: Ord + Display> Display for LearnedSkipList<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Coins that are heads exactly for the listed (item, level) pairs.
    struct Scripted(Vec<(u64, usize)>);

    impl CoinSource for Scripted {
        fn promote(&mut self, item: u64, level: usize, _: f64) -> bool {
            self.0.contains(&(item, level))
        }
    }

    #[test]
    fn deterministic_level_examples() {
        assert_eq!(deterministic_level(0.5, 8), 3);
        assert_eq!(deterministic_level(1.0 / 16.0, 8), 0);
        assert_eq!(deterministic_level(0.0, 100), 0);
        assert_eq!(deterministic_level(1.0, 1), 1);
        assert_eq!(deterministic_level(0.25, 4), 1);
        // just under a power of two after normalization still counts
        assert_eq!(deterministic_level(1.0 / 1000.0, 1000), 1);
        assert_eq!(deterministic_level(0.1, 1000), 7); // log2(100) = 6.64
    }

    #[test]
    fn single_item_reaches_level_one() {
        let list = LearnedSkipList::build_with_coins(vec![7u32], &[1.0], 0, &mut AlwaysTails).unwrap();
        assert_eq!(list.level_of(&7).unwrap(), 1);
        assert_eq!(list.num_levels(), 2);
        let r = list.search(&7);
        assert!(r.found);
        assert!(r.steps as usize <= 1 + list.num_levels());
        assert_eq!(r.steps, 1);
        assert_eq!(list.dump(), "7\n7\n");
    }

    #[test]
    fn uniform_predictions_fill_level_one() {
        let items = vec![1u32, 2, 3, 4];
        let list = LearnedSkipList::build_with_coins(items, &[0.25; 4], 0, &mut AlwaysTails).unwrap();
        assert_eq!(list.num_levels(), 2);
        assert_eq!(list.level_sizes(), vec![4, 4]);
        let seeded = LearnedSkipList::build(vec![1u32, 2, 3, 4], &[0.25; 4], 9).unwrap();
        for k in 1..=4 {
            assert!(seeded.level_of(&k).unwrap() >= 1);
        }
    }

    #[test]
    fn scripted_coins_shape_towers() {
        // item 1 gets heads at level 1 and 2, item 3 at level 1 only
        let mut coins = Scripted(vec![(1, 1), (1, 2), (3, 1)]);
        let list =
            LearnedSkipList::build_with_coins(vec![10u32, 20, 30, 40], &[0.0; 4], 0, &mut coins).unwrap();
        assert_eq!(list.dump(), "20\n20 40\n10 20 30 40\n");
        // search 40: right to 20 on L2, down, right to 40 on L1
        let r = list.search(&40);
        assert_eq!((r.found, r.steps, r.terminal_level), (true, 3, 1));
        // search 30: right to 20, down, 40 > 30 so down, right to 30
        let r = list.search(&30);
        assert_eq!((r.found, r.steps, r.terminal_level), (true, 4, 0));
        // miss: right to 20, down, down, down off level 0
        let r = list.search(&25);
        assert_eq!((r.found, r.steps), (false, 4));
    }

    #[test]
    fn build_rejects_bad_input() {
        assert_eq!(
            LearnedSkipList::build(vec![1, 2], &[0.5], 0).unwrap_err(),
            SkipListError::Misaligned { items: 2, predictions: 1 }
        );
        assert_eq!(LearnedSkipList::build(vec![2, 1], &[0.5, 0.5], 0).unwrap_err(), SkipListError::Unsorted(1));
        assert_eq!(LearnedSkipList::build(vec![1, 1], &[0.5, 0.5], 0).unwrap_err(), SkipListError::Unsorted(1));
        assert!(matches!(
            LearnedSkipList::build(vec![1, 2], &[1.5, 0.5], 0),
            Err(SkipListError::InvalidPrediction { index: 0, .. })
        ));
        assert_eq!(LearnedSkipList::classic_build(vec![1, 2], 1.0, 0).unwrap_err(), SkipListError::InvalidP(1.0));
        assert_eq!(LearnedSkipList::classic_build(vec![1, 2], 0.0, 0).unwrap_err(), SkipListError::InvalidP(0.0));
        assert_eq!(LearnedSkipList::classic_build(vec![3, 2], 0.5, 0).unwrap_err(), SkipListError::Unsorted(1));
    }

    #[test]
    fn search_below_all_items_misses() {
        let list = LearnedSkipList::build(vec![10u32, 20, 30], &[0.2, 0.3, 0.5], 4).unwrap();
        let r = list.search(&5);
        assert!(!r.found);
        assert!(r.steps >= 1);
        assert_eq!(r.terminal_level, 0);
        assert_eq!(list.level_of(&5), Err(SkipListError::KeyNotFound));
    }

    #[test]
    fn empty_list_insert_and_search() {
        let mut list = LearnedSkipList::<u32>::new(3);
        assert_eq!(list.num_levels(), 0);
        assert!(!list.search(&1).found);
        list.insert(5, 1.0).unwrap();
        assert!(list.level_of(&5).unwrap() >= 1);
        list.insert(3, 0.0).unwrap();
        assert!(list.search(&3).found);
        assert_eq!(list.insert(5, 0.1), Err(SkipListError::DuplicateKey));
        list.check_invariants().unwrap();
    }

    #[test]
    fn insert_with_zero_prediction_only_climbs_by_coins() {
        let mut list = LearnedSkipList::<u32>::new(0);
        for k in 0..50 {
            list.insert_with_coins(k, 0.0, &mut AlwaysTails).unwrap();
        }
        assert_eq!(list.num_levels(), 1);
        list.insert_with_coins(100, 0.5, &mut AlwaysTails).unwrap();
        // 51 items, 0.5 * 51 = 25.5 -> floor level 1 + 4
        assert_eq!(list.level_of(&100).unwrap(), 5);
        list.check_invariants().unwrap();
    }

    #[test]
    fn classic_single_item_is_geometric() {
        let mut total = 0usize;
        for seed in 0..4000 {
            let l = LearnedSkipList::classic_build(vec![1u8], 0.5, seed).unwrap();
            total += l.level_of(&1).unwrap();
        }
        // mean of Geometric(1/2) failures is 1
        let mean = total as f64 / 4000.0;
        assert!((mean - 1.0).abs() < 0.1, "{mean}");
    }

    #[test]
    fn classic_level_count_median() {
        // brute-force oracle: simulate the max of 1024 geometric towers
        // independently of the skip list code
        use rand::Rng;
        let mut rng = crate::rng::rng_from_seed(99);
        let mut oracle: Vec<usize> = (0..1000)
            .map(|_| {
                (0..1024)
                    .map(|_| {
                        let mut h = 1;
                        while rng.random::<bool>() {
                            h += 1;
                        }
                        h
                    })
                    .max()
                    .unwrap()
            })
            .collect();
        oracle.sort_unstable();
        let oracle_median = oracle[500];

        let items: Vec<u32> = (0..1024).collect();
        let mut levels: Vec<usize> = (0..1000)
            .map(|s| LearnedSkipList::classic_build(items.clone(), 0.5, s).unwrap().num_levels())
            .collect();
        levels.sort_unstable();
        let median = levels[500];
        assert!(median.abs_diff(10) <= 3, "median {median}");
        assert!(median.abs_diff(oracle_median) <= 1, "{median} vs oracle {oracle_median}");
    }

    #[test]
    fn membership_matches_linear_scan_on_64_items() {
        let items: Vec<u64> = (0..64).map(|i| i * 3 + 1).collect();
        let w: Vec<f64> = (1..=64).map(|i| 1.0 / i as f64).collect();
        let p = crate::oracle::normalize(&w).unwrap();
        let list = LearnedSkipList::build(items.clone(), p.probs(), 11).unwrap();
        let base: Vec<u64> = list.level_keys(0).into_iter().copied().collect();
        for q in 0..200u64 {
            assert_eq!(list.search(&q).found, base.contains(&q), "key {q}");
        }
    }

    #[test]
    fn from_predictions_sorts_keys() {
        let p = ProbabilityVector::new(vec![9, 2, 5], vec![0.5, 0.25, 0.25]).unwrap();
        let list = LearnedSkipList::from_predictions(&p, 1).unwrap();
        assert_eq!(list.level_keys(0), vec![&2, &5, &9]);
        assert_eq!(list.prediction_of(&9), Some(0.5));
        assert!(list.level_of(&9).unwrap() >= deterministic_level(0.5, 3));
    }

    #[test]
    fn list_is_send_and_sync() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<LearnedSkipList<u64>>();
    }

    fn prediction_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, 1..300).prop_map(|w| {
            let s: f64 = w.iter().sum::<f64>().max(1e-12);
            w.iter().map(|x| (x / s).min(1.0)).collect()
        })
    }

    proptest! {
        #[test]
        fn built_lists_respect_floor_and_nesting(p in prediction_vec(), seed in any::<u64>()) {
            let n = p.len();
            let items: Vec<u64> = (0..n as u64).map(|i| i * 2).collect();
            let list = LearnedSkipList::build(items.clone(), &p, seed).unwrap();
            prop_assert!(list.check_invariants().is_ok());
            for (k, &pi) in items.iter().zip(&p) {
                prop_assert!(list.level_of(k).unwrap() >= deterministic_level(pi, n));
                prop_assert!(list.level_of(k).unwrap() < list.num_levels());
                prop_assert!(list.search(k).found);
                prop_assert!(!list.search(&(k + 1)).found);
            }
        }

        #[test]
        fn inserts_keep_invariants(keys in prop::collection::hash_set(0u32..10_000, 1..200), seed in any::<u64>()) {
            let mut list = LearnedSkipList::new(seed);
            let keys: Vec<u32> = keys.into_iter().collect();
            for (i, &k) in keys.iter().enumerate() {
                let p = if i % 7 == 0 { 0.3 } else { 0.001 };
                list.insert(k, p).unwrap();
                prop_assert!(list.search(&k).found);
                prop_assert!(list.level_of(&k).unwrap() >= deterministic_level(p, i + 1));
            }
            prop_assert!(list.check_invariants().is_ok());
            prop_assert_eq!(list.len(), keys.len());
        }
    }
}
