//! Discrete time base and piecewise-constant Boolean signal storage.
//!
//! Time runs on an integer tick grid with `resolution` ticks per day. A
//! signal is constant on `[k, k + 1)` in tick units, so a history is just one
//! bit per retained tick. Bit `lag` of a history holds the value at tick
//! `current - lag`.

use crate::error::{invalid, Error, Result};

/// Ticks per day used when nothing else is configured. Two ticks per day make
/// a half-day damage duration representable.
pub const DEFAULT_RESOLUTION: u32 = 2;

const EXACT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimeGrid {
    resolution: u32,
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid {
            resolution: DEFAULT_RESOLUTION,
        }
    }
}

impl TimeGrid {
    pub fn new(resolution: u32) -> Result<Self> {
        if resolution == 0 {
            return Err(invalid("resolution", "must be at least one tick per day"));
        }
        Ok(TimeGrid { resolution })
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    /// Converts a non-negative day count to ticks, failing unless the
    /// conversion is exact.
    pub fn ticks(&self, days: f64) -> Result<u64> {
        if !days.is_finite() || days < 0.0 {
            return Err(invalid("days", format!("{days} is not a non-negative duration")));
        }
        let scaled = days * self.resolution as f64;
        let rounded = scaled.round();
        if (scaled - rounded).abs() > EXACT_TOL * scaled.max(1.0) {
            return Err(Error::NotTickRepresentable {
                value: days,
                resolution: self.resolution,
            });
        }
        Ok(rounded as u64)
    }

    pub fn days(&self, tick: i64) -> f64 {
        tick as f64 / self.resolution as f64
    }

    /// History depth needed by a model whose delays never exceed `tau_max`
    /// days and whose forcing lasts `tau_c` days: the longest look-back, the
    /// forcing span, and one guard tick.
    pub fn history_depth(&self, tau_max: f64, tau_c: f64) -> Result<usize> {
        let lookback = self.ticks(tau_max)? as usize;
        let forcing = (tau_c * self.resolution as f64 - EXACT_TOL).ceil().max(0.0) as usize;
        Ok(lookback + forcing + 1)
    }
}

#[inline]
fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

#[inline]
fn top_mask(bits: usize) -> u64 {
    match bits % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

#[inline]
fn get_lag(words: &[u64], lag: usize) -> bool {
    (words[lag >> 6] >> (lag & 63)) & 1 == 1
}

#[inline]
fn shift_in(words: &mut [u64], bit: bool, mask: u64) {
    let last = words.len() - 1;
    for w in (1..=last).rev() {
        words[w] = (words[w] << 1) | (words[w - 1] >> 63);
    }
    words[0] = (words[0] << 1) | bit as u64;
    words[last] &= mask;
}

/// Copies lags `0..width` of a history into `out`, masking the tail.
fn extract_window(words: &[u64], width: usize, out: &mut Vec<u64>) {
    let n = words_for(width);
    out.extend_from_slice(&words[..n]);
    let last = out.len() - 1;
    *out.get_mut(last).unwrap() &= top_mask(width);
}

#[inline]
fn windows_equal(a: &[u64], b: &[u64], width: usize) -> bool {
    let full = width / 64;
    if a[..full] != b[..full] {
        return false;
    }
    let rem = width % 64;
    rem == 0 || (a[full] ^ b[full]) & ((1u64 << rem) - 1) == 0
}

/// One node's signal over a sliding window of retained ticks.
///
/// A fresh history sits at tick `-1` with every retained tick set to the
/// initial value, so `sample(t)` is defined on `[-1 - depth, -1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalHistory {
    depth: usize,
    current: i64,
    words: Vec<u64>,
    trace: Option<Vec<(i64, bool)>>,
}

impl SignalHistory {
    pub fn new(depth: usize, initial: bool, with_trace: bool) -> Self {
        let bits = depth + 1;
        let mut words = vec![if initial { u64::MAX } else { 0 }; words_for(bits)];
        let last = words.len() - 1;
        words[last] &= top_mask(bits);
        SignalHistory {
            depth,
            current: -1,
            words,
            trace: with_trace.then(Vec::new),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Latest tick written.
    pub fn current(&self) -> i64 {
        self.current
    }

    /// Oldest tick still retained.
    pub fn oldest(&self) -> i64 {
        self.current - self.depth as i64
    }

    /// Appends the value for tick `current + 1`.
    pub fn push(&mut self, value: bool) {
        let previous = get_lag(&self.words, 0);
        shift_in(&mut self.words, value, top_mask(self.depth + 1));
        self.current += 1;
        if let Some(trace) = self.trace.as_mut() {
            if previous != value {
                trace.push((self.current, value));
            }
        }
    }

    pub fn sample(&self, tick: i64) -> Result<bool> {
        if tick > self.current || tick < self.oldest() {
            return Err(Error::WindowUnderflow {
                tick,
                oldest: self.oldest(),
                newest: self.current,
            });
        }
        Ok(get_lag(&self.words, (self.current - tick) as usize))
    }

    /// Recorded `(tick, new_value)` transitions, when tracing was enabled.
    pub fn transitions(&self) -> Option<&[(i64, bool)]> {
        self.trace.as_deref()
    }
}

/// Canonical key for an `nodes x width` window of Boolean state.
///
/// Equality compares the hash first and then the full bit content, so two
/// keys are equal exactly when the windows are.
#[derive(Debug, Clone)]
pub struct StateKey {
    nodes: usize,
    width: usize,
    hash: u64,
    bits: Vec<u64>,
}

impl StateKey {
    fn from_bits(nodes: usize, width: usize, bits: Vec<u64>) -> Self {
        let mut hash = FNV_OFFSET;
        hash = fnv_word(hash, nodes as u64);
        hash = fnv_word(hash, width as u64);
        for &w in &bits {
            hash = fnv_word(hash, w);
        }
        StateKey {
            nodes,
            width,
            hash,
            bits,
        }
    }

    pub fn hash_value(&self) -> u64 {
        self.hash
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }
}

impl PartialEq for StateKey {
    fn eq(&self, other: &Self) -> bool {
        self.hash == other.hash && self.nodes == other.nodes && self.width == other.width && self.bits == other.bits
    }
}

impl Eq for StateKey {}

impl std::hash::Hash for StateKey {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        state.write_u64(self.hash);
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv_word(mut hash: u64, word: u64) -> u64 {
    for byte in word.to_le_bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// 64-bit FNV-1a over little-endian words. Stable across platforms.
pub fn fnv1a_words(words: impl IntoIterator<Item = u64>) -> u64 {
    words.into_iter().fold(FNV_OFFSET, fnv_word)
}

/// Encodes the last `width` ticks of every history into a [`StateKey`].
///
/// All histories must sit at the same current tick.
pub fn encode_state_window(histories: &[SignalHistory], width: usize) -> Result<StateKey> {
    let mut bits = Vec::with_capacity(histories.len() * words_for(width.max(1)));
    let current = histories.first().map(|h| h.current);
    for h in histories {
        if width > h.depth + 1 {
            return Err(Error::WindowTooWide { width, depth: h.depth });
        }
        if Some(h.current) != current {
            return Err(Error::Mismatch("histories are at different ticks".into()));
        }
        if width > 0 {
            extract_window(&h.words, width, &mut bits);
        }
    }
    Ok(StateKey::from_bits(histories.len(), width, bits))
}

/// Flat storage of all node histories of one simulation, advanced in
/// lock-step.
#[derive(Debug, Clone)]
pub struct HistoryBank {
    nodes: usize,
    depth: usize,
    words_per_node: usize,
    mask: u64,
    current: i64,
    words: Vec<u64>,
    traces: Option<Vec<Vec<(i64, bool)>>>,
}

impl HistoryBank {
    pub fn new(nodes: usize, depth: usize, initial: bool, with_trace: bool) -> Self {
        let bits = depth + 1;
        let wpn = words_for(bits);
        let mut proto = vec![if initial { u64::MAX } else { 0 }; wpn];
        proto[wpn - 1] &= top_mask(bits);
        let mut words = Vec::with_capacity(nodes * wpn);
        for _ in 0..nodes {
            words.extend_from_slice(&proto);
        }
        HistoryBank {
            nodes,
            depth,
            words_per_node: wpn,
            mask: top_mask(bits),
            current: -1,
            words,
            traces: with_trace.then(|| vec![Vec::new(); nodes]),
        }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn current(&self) -> i64 {
        self.current
    }

    #[inline]
    fn node_words(&self, node: usize) -> &[u64] {
        &self.words[node * self.words_per_node..(node + 1) * self.words_per_node]
    }

    /// Value of `node` at tick `current - lag`. `lag` must not exceed the depth.
    #[inline]
    pub fn bit(&self, node: usize, lag: usize) -> bool {
        debug_assert!(lag <= self.depth);
        (self.words[node * self.words_per_node + (lag >> 6)] >> (lag & 63)) & 1 == 1
    }

    pub fn sample(&self, node: usize, tick: i64) -> Result<bool> {
        let oldest = self.current - self.depth as i64;
        if tick > self.current || tick < oldest {
            return Err(Error::WindowUnderflow {
                tick,
                oldest,
                newest: self.current,
            });
        }
        Ok(self.bit(node, (self.current - tick) as usize))
    }

    /// Appends one tick for every node. Returns the number of nodes whose
    /// value changed.
    pub fn push_all(&mut self, values: &[bool]) -> usize {
        debug_assert_eq!(values.len(), self.nodes);
        self.current += 1;
        let mut changed = 0;
        if self.words_per_node == 1 {
            for (w, &v) in self.words.iter_mut().zip(values) {
                changed += ((*w & 1 == 1) != v) as usize;
                *w = ((*w << 1) | v as u64) & self.mask;
            }
        } else {
            let wpn = self.words_per_node;
            for (chunk, &v) in self.words.chunks_exact_mut(wpn).zip(values) {
                changed += ((chunk[0] & 1 == 1) != v) as usize;
                shift_in(chunk, v, self.mask);
            }
        }
        if let Some(traces) = self.traces.as_mut() {
            // values were already shifted in, so lag 1 holds the previous tick
            let wpn = self.words_per_node;
            for (node, trace) in traces.iter_mut().enumerate() {
                let w = &self.words[node * wpn..(node + 1) * wpn];
                if get_lag(w, 0) != get_lag(w, 1) {
                    trace.push((self.current, get_lag(w, 0)));
                }
            }
        }
        changed
    }

    /// Standalone copy of one node's history.
    pub fn snapshot(&self, node: usize) -> SignalHistory {
        SignalHistory {
            depth: self.depth,
            current: self.current,
            words: self.node_words(node).to_vec(),
            trace: self.traces.as_ref().map(|t| t[node].clone()),
        }
    }

    pub fn transitions(&self, node: usize) -> Option<&[(i64, bool)]> {
        self.traces.as_ref().map(|t| t[node].as_slice())
    }

    pub fn encode_window(&self, width: usize) -> Result<StateKey> {
        if width > self.depth + 1 {
            return Err(Error::WindowTooWide {
                width,
                depth: self.depth,
            });
        }
        let mut bits = Vec::with_capacity(self.nodes * words_for(width.max(1)));
        if width > 0 {
            for node in 0..self.nodes {
                extract_window(self.node_words(node), width, &mut bits);
            }
        }
        Ok(StateKey::from_bits(self.nodes, width, bits))
    }

    /// Whether the last `key.width()` ticks equal the window stored in `key`.
    pub fn matches_key(&self, key: &StateKey) -> bool {
        if key.nodes != self.nodes || key.width > self.depth + 1 {
            return false;
        }
        if key.width == 0 {
            return true;
        }
        let kw = words_for(key.width);
        (0..self.nodes)
            .all(|node| windows_equal(self.node_words(node), &key.bits[node * kw..(node + 1) * kw], key.width))
    }

    /// Whether the last `width` ticks of two banks agree, lag by lag.
    pub fn window_equals(&self, other: &HistoryBank, width: usize) -> bool {
        if self.nodes != other.nodes || width > self.depth + 1 || width > other.depth + 1 {
            return false;
        }
        if width == 0 {
            return true;
        }
        if self.words_per_node == 1 && other.words_per_node == 1 && width <= 64 {
            let mask = top_mask(width);
            return self.words.iter().zip(&other.words).all(|(a, b)| (a ^ b) & mask == 0);
        }
        (0..self.nodes).all(|node| windows_equal(self.node_words(node), other.node_words(node), width))
    }
}
