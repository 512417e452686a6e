//! Deterministic in-process message transport with per-link latency, drops and
//! FIFO delivery per (source, destination) pair.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::types::TimestampMs;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkModel {
    pub base_ms: u64,
    /// Uniform extra delay in `0..=jitter_ms`.
    pub jitter_ms: u64,
    pub drop_prob: f64,
}

impl Default for LinkModel {
    fn default() -> Self {
        LinkModel { base_ms: 10, jitter_ms: 0, drop_prob: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TransportStats {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
}

impl TransportStats {
    pub fn in_flight(&self) -> u64 {
        self.sent - self.delivered - self.dropped
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Envelope<A, M> {
    pub src: A,
    pub dst: A,
    pub sent_at: TimestampMs,
    pub deliver_at: TimestampMs,
    pub msg: M,
}

pub struct SimTransport<A, M> {
    link: LinkModel,
    overrides: BTreeMap<(A, A), LinkModel>,
    rng: ChaCha8Rng,
    seq: u64,
    queue: BinaryHeap<Reverse<(TimestampMs, u64)>>,
    pending: HashMap<u64, Envelope<A, M>>,
    last: BTreeMap<(A, A), TimestampMs>,
    stats: TransportStats,
    tap: Option<Vec<Envelope<A, M>>>,
}

impl<A: Ord + Clone, M: Clone> SimTransport<A, M> {
    pub fn new(link: LinkModel, seed: u64) -> Self {
        SimTransport {
            link,
            overrides: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            seq: 0,
            queue: BinaryHeap::new(),
            pending: HashMap::new(),
            last: BTreeMap::new(),
            stats: TransportStats::default(),
            tap: None,
        }
    }

    pub fn set_link(&mut self, src: A, dst: A, model: LinkModel) {
        self.overrides.insert((src, dst), model);
    }

    /// Starts recording every accepted message, as an on-path eavesdropper would.
    pub fn enable_tap(&mut self) {
        self.tap.get_or_insert_with(Vec::new);
    }

    pub fn tapped(&self) -> &[Envelope<A, M>] {
        self.tap.as_deref().unwrap_or(&[])
    }

    pub fn stats(&self) -> TransportStats {
        self.stats
    }

    /// Queues a message. Returns the delivery time, or `None` if the link dropped it.
    pub fn send(&mut self, now: TimestampMs, src: A, dst: A, msg: M) -> Option<TimestampMs> {
        self.stats.sent += 1;
        let key = (src, dst);
        let model = self.overrides.get(&key).copied().unwrap_or(self.link);
        if model.drop_prob > 0.0 && self.rng.gen_bool(model.drop_prob.min(1.0)) {
            self.stats.dropped += 1;
            return None;
        }
        let jitter = if model.jitter_ms > 0 { self.rng.gen_range(0..=model.jitter_ms) } else { 0 };
        let at = now + model.base_ms + jitter;
        let last = self.last.entry(key.clone()).or_insert(0);
        let deliver_at = at.max(*last);
        *last = deliver_at;
        let env = Envelope { src: key.0, dst: key.1, sent_at: now, deliver_at, msg };
        if let Some(tap) = &mut self.tap {
            tap.push(env.clone());
        }
        self.seq += 1;
        self.queue.push(Reverse((deliver_at, self.seq)));
        self.pending.insert(self.seq, env);
        Some(deliver_at)
    }

    pub fn next_delivery(&self) -> Option<TimestampMs> {
        self.queue.peek().map(|Reverse((t, _))| *t)
    }

    /// Pops the earliest message due at or before `until`.
    pub fn pop_due(&mut self, until: TimestampMs) -> Option<Envelope<A, M>> {
        let Reverse((t, seq)) = *self.queue.peek()?;
        if t > until {
            return None;
        }
        self.queue.pop();
        self.stats.delivered += 1;
        self.pending.remove(&seq)
    }

    pub fn drain_due(&mut self, until: TimestampMs) -> Vec<Envelope<A, M>> {
        std::iter::from_fn(|| self.pop_due(until)).collect()
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo_per_link_under_jitter() {
        let mut t: SimTransport<u8, u32> =
            SimTransport::new(LinkModel { base_ms: 10, jitter_ms: 50, drop_prob: 0.0 }, 7);
        for i in 0..500u32 {
            t.send(i as u64, 1, 2, i);
            t.send(i as u64, 2, 1, 1000 + i);
        }
        let out = t.drain_due(u64::MAX);
        let a: Vec<_> = out.iter().filter(|e| e.src == 1).map(|e| e.msg).collect();
        let b: Vec<_> = out.iter().filter(|e| e.src == 2).map(|e| e.msg).collect();
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(b.windows(2).all(|w| w[0] < w[1]));
        assert!(out.windows(2).all(|w| w[0].deliver_at <= w[1].deliver_at));
    }

    #[test]
    fn counters_balance() {
        let mut t: SimTransport<u8, ()> = SimTransport::new(LinkModel { base_ms: 1, jitter_ms: 0, drop_prob: 0.3 }, 1);
        for i in 0..1000 {
            t.send(i, 0, 1, ());
        }
        t.drain_due(500);
        let s = t.stats();
        assert_eq!(s.sent, s.delivered + s.dropped + s.in_flight());
        t.drain_due(u64::MAX);
        let s = t.stats();
        assert_eq!(s.sent, s.delivered + s.dropped);
        assert!(s.dropped > 200 && s.dropped < 400);
    }
}
