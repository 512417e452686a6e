//! Committee consensus among active nodes: a Tendermint-style round protocol
//! (propose, prevote, precommit, with locking) driven by a deterministic event
//! loop over [`SimTransport`]. Faulty members can be silent, vote randomly or
//! equivocate.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet, VecDeque};
use std::sync::Arc;

use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{
    build_private_block, build_public_block, commit_message, Block, BlockSignature, Ledger, TxKind, TxRecord,
};
use crate::transport::{LinkModel, SimTransport, TransportStats};
use crate::types::{put_bytes, sha256, Digest, NodeId, TimestampMs};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConsensusError {
    #[error("{node} is not the proposer for height {height} round {round}")]
    NotProposer { node: NodeId, height: u64, round: u32 },
    #[error("committee needs at least one member")]
    Empty,
    #[error("faulty count {faulty} exceeds committee size {n}")]
    TooManyFaulty { faulty: usize, n: usize },
}

/// More than two thirds of `n`.
pub fn quorum(n: usize) -> usize {
    2 * n / 3 + 1
}

/// Smallest set guaranteed to contain a correct member when quorum holds.
pub fn skip_threshold(n: usize) -> usize {
    n - quorum(n) + 1
}

/// The value with a quorum among `votes`, if any.
pub fn tally<'a, I>(votes: I, n: usize) -> Option<Option<Digest>>
where
    I: IntoIterator<Item = &'a Option<Digest>>,
{
    let mut counts: BTreeMap<Option<Digest>, usize> = BTreeMap::new();
    for v in votes {
        *counts.entry(*v).or_default() += 1;
    }
    counts.into_iter().find(|(_, c)| *c >= quorum(n)).map(|(v, _)| v)
}

pub fn tx_digest(tx: &TxRecord) -> Digest {
    sha256(&tx.encode())
}

#[derive(Clone, Debug)]
pub struct ActiveNodeSet {
    members: Vec<(NodeId, VerifyingKey)>,
}

impl ActiveNodeSet {
    pub fn new(members: Vec<(NodeId, VerifyingKey)>) -> Result<Self, ConsensusError> {
        if members.is_empty() {
            return Err(ConsensusError::Empty);
        }
        Ok(ActiveNodeSet { members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn ids(&self) -> BTreeSet<NodeId> {
        self.members.iter().map(|(id, _)| id.clone()).collect()
    }

    pub fn member(&self, idx: usize) -> &(NodeId, VerifyingKey) {
        &self.members[idx]
    }

    pub fn proposer(&self, height: u64, round: u32) -> usize {
        ((height + round as u64) % self.members.len() as u64) as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behaviour {
    Honest,
    Silent,
    /// Votes for random digests and never proposes.
    RandomVotes,
    /// Sends conflicting proposals and votes to the two halves of the committee.
    Equivocate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VoteKind {
    Prevote,
    Precommit,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vote {
    pub kind: VoteKind,
    pub height: u64,
    pub round: u32,
    pub value: Option<Digest>,
    pub voter: usize,
    /// Precommits for a value sign the commit message stored on the block;
    /// every other vote signs [`vote_message`].
    pub signature: [u8; 64],
}

const VOTE_DOMAIN: &[u8] = b"BSMD-VOTE";

pub fn vote_message(kind: VoteKind, height: u64, round: u32, value: Option<Digest>, signer: &NodeId) -> Vec<u8> {
    if let (VoteKind::Precommit, Some(d)) = (kind, value) {
        return commit_message(height, round, &d, signer);
    }
    let mut msg = VOTE_DOMAIN.to_vec();
    msg.push(kind as u8);
    msg.extend_from_slice(&height.to_be_bytes());
    msg.extend_from_slice(&round.to_be_bytes());
    msg.push(value.is_some() as u8);
    msg.extend_from_slice(&value.unwrap_or_default());
    put_bytes(&mut msg, signer.as_str().as_bytes());
    msg
}

impl Vote {
    pub fn signed(key: &SigningKey, signer: &NodeId, kind: VoteKind, height: u64, round: u32, value: Option<Digest>, voter: usize) -> Self {
        let signature = key.sign(&vote_message(kind, height, round, value, signer)).to_bytes();
        Vote { kind, height, round, value, voter, signature }
    }

    pub fn verify(&self, signer: &NodeId, key: &VerifyingKey) -> bool {
        let msg = vote_message(self.kind, self.height, self.round, self.value, signer);
        key.verify_strict(&msg, &Signature::from_bytes(&self.signature)).is_ok()
    }

    fn block_signature(&self, signer: &NodeId, key: &VerifyingKey) -> BlockSignature {
        BlockSignature { signer: signer.clone(), public_key: key.to_bytes(), round: self.round, signature: self.signature }
    }
}

/// Votes of one kind in one round. A faulty voter may appear under several values;
/// quorum intersection keeps that safe.
#[derive(Default)]
struct VoteBook {
    by_value: BTreeMap<Option<Digest>, BTreeSet<usize>>,
    voters: BTreeSet<usize>,
    signed: Vec<Vote>,
}

impl VoteBook {
    fn count(&self, value: Option<Digest>) -> usize {
        self.by_value.get(&value).map_or(0, |s| s.len())
    }

    fn has(&self, voter: usize, value: Option<Digest>) -> bool {
        self.by_value.get(&value).is_some_and(|s| s.contains(&voter))
    }

    fn insert(&mut self, v: Vote) {
        self.by_value.entry(v.value).or_default().insert(v.voter);
        self.voters.insert(v.voter);
        if v.value.is_some() {
            self.signed.push(v);
        }
    }
}

#[derive(Clone, Debug)]
pub enum Msg {
    Tx { tx: TxRecord, submitted_at: TimestampMs },
    Proposal { height: u64, round: u32, block: Arc<Block>, valid_round: Option<u32> },
    Vote(Vote),
    BlockRequest { height: u64, digest: Digest },
    BlockResponse { block: Arc<Block> },
    /// Asks a member that is ahead for the committed block at `height`.
    CommitRequest { height: u64 },
    /// A committed block carrying its quorum of precommit signatures.
    Commit { block: Arc<Block> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Timer {
    Activate(u64),
    Propose(u64, u32),
    Prevote(u64, u32),
    Precommit(u64, u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Step {
    Propose,
    Prevote,
    Precommit,
}

#[derive(Debug)]
pub enum Action {
    Broadcast(Msg),
    Send(usize, Msg),
    Schedule(TimestampMs, Timer),
    Decided { height: u64, block: Arc<Block> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// Base timeout for each step; doubles with every round.
    pub timeout_ms: u64,
    /// Minimum spacing between block timestamps.
    pub min_block_interval_ms: u64,
    /// Pending transactions older than this are discarded.
    pub tx_timeout_ms: u64,
    pub max_block_txs: usize,
}

impl Default for Timing {
    fn default() -> Self {
        Timing { timeout_ms: 500, min_block_interval_ms: 40, tx_timeout_ms: 300_000, max_block_txs: 512 }
    }
}

impl Timing {
    fn timeout(&self, round: u32) -> u64 {
        self.timeout_ms << round.min(16)
    }
}

/// Pending transactions, oldest first.
#[derive(Default)]
struct Mempool {
    queue: BTreeMap<(TimestampMs, Digest), TxRecord>,
    index: HashSet<Digest>,
}

impl Mempool {
    fn insert(&mut self, d: Digest, submitted_at: TimestampMs, tx: TxRecord) {
        if self.index.insert(d) {
            self.queue.insert((submitted_at, d), tx);
        }
    }

    fn remove(&mut self, d: &Digest) {
        if self.index.remove(d) {
            self.queue.retain(|(_, k), _| k != d);
        }
    }

    fn expire(&mut self, now: TimestampMs, timeout: u64) {
        while let Some(((t, d), _)) = self.queue.first_key_value() {
            if t + timeout >= now {
                break;
            }
            let d = *d;
            self.queue.pop_first();
            self.index.remove(&d);
        }
    }

    fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }
}

/// Per-height round state of one committee member.
pub struct Validator {
    idx: usize,
    key: SigningKey,
    set: Arc<ActiveNodeSet>,
    timing: Timing,
    ledger: Ledger,
    height: u64,
    round: u32,
    step: Step,
    active: bool,
    locked: Option<(u32, Arc<Block>)>,
    valid: Option<(u32, Arc<Block>)>,
    proposals: BTreeMap<u32, (Arc<Block>, Digest, Option<u32>)>,
    blocks: HashMap<Digest, Arc<Block>>,
    prevotes: BTreeMap<u32, VoteBook>,
    precommits: BTreeMap<u32, VoteBook>,
    precommit_sigs: BTreeMap<(u32, Digest), Vec<BlockSignature>>,
    prevote_timer: BTreeSet<u32>,
    precommit_timer: BTreeSet<u32>,
    lock_done: BTreeSet<u32>,
    requested: BTreeSet<Digest>,
    future: Vec<(usize, Msg)>,
    catchup: BTreeSet<(u64, usize)>,
    pool: Mempool,
    committed_txs: HashSet<Digest>,
    decided: BTreeMap<u64, (u32, Digest)>,
}

impl Validator {
    pub fn new(idx: usize, key: SigningKey, set: Arc<ActiveNodeSet>, timing: Timing) -> Self {
        Validator {
            idx,
            key,
            set,
            timing,
            ledger: Ledger::new(),
            height: 0,
            round: 0,
            step: Step::Propose,
            active: false,
            locked: None,
            valid: None,
            proposals: BTreeMap::new(),
            blocks: HashMap::new(),
            prevotes: BTreeMap::new(),
            precommits: BTreeMap::new(),
            precommit_sigs: BTreeMap::new(),
            prevote_timer: BTreeSet::new(),
            precommit_timer: BTreeSet::new(),
            lock_done: BTreeSet::new(),
            requested: BTreeSet::new(),
            future: Vec::new(),
            catchup: BTreeSet::new(),
            pool: Mempool::default(),
            committed_txs: HashSet::new(),
            decided: BTreeMap::new(),
        }
    }

    pub fn id(&self) -> &NodeId {
        &self.set.member(self.idx).0
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn height(&self) -> u64 {
        self.height
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn pending(&self) -> usize {
        self.pool.queue.len()
    }

    fn n(&self) -> usize {
        self.set.len()
    }

    fn earliest_proposal(&self) -> TimestampMs {
        self.ledger.block(self.height.wrapping_sub(1)).map_or(0, |b| b.timestamp + self.timing.min_block_interval_ms)
    }

    /// Builds this member's proposal for the current height and `round`.
    pub fn propose(&mut self, round: u32, now: TimestampMs) -> Result<Option<Block>, ConsensusError> {
        if self.set.proposer(self.height, round) != self.idx {
            return Err(ConsensusError::NotProposer { node: self.id().clone(), height: self.height, round });
        }
        self.pool.expire(now, self.timing.tx_timeout_ms);
        let Some(((_, _), first)) = self.pool.queue.first_key_value() else {
            return Ok(None);
        };
        let prev = self.ledger.tip_digest();
        let ts = now.max(self.earliest_proposal());
        let block = match first.kind {
            TxKind::Private => build_private_block(first.clone(), prev, self.height, ts),
            TxKind::Public => {
                let txs: Vec<TxRecord> = self
                    .pool
                    .queue
                    .values()
                    .take_while(|t| t.kind == TxKind::Public)
                    .take(self.timing.max_block_txs)
                    .cloned()
                    .collect();
                build_public_block(txs, prev, self.height, ts)
            }
        };
        Ok(block.ok())
    }

    fn is_valid(&self, block: &Block) -> bool {
        block.height == self.height
            && block.prev_hash == self.ledger.tip_digest()
            && block.signatures.is_empty()
            && block.timestamp >= self.earliest_proposal()
            && block.check_layout().is_ok()
            && block.transactions.iter().all(|t| !self.committed_txs.contains(&tx_digest(t)))
    }

    pub fn on_timer(&mut self, now: TimestampMs, timer: Timer) -> Vec<Action> {
        let mut out = Vec::new();
        match timer {
            Timer::Activate(h) if h == self.height => self.maybe_activate(now, &mut out),
            Timer::Propose(h, r) if h == self.height && r == self.round && self.step == Step::Propose => {
                if r > 0 {
                    // A stalled round may mean the others already decided this height.
                    out.push(Action::Broadcast(Msg::CommitRequest { height: h }));
                }
                self.cast(VoteKind::Prevote, None, &mut out);
                self.step = Step::Prevote;
            }
            Timer::Prevote(h, r) if h == self.height && r == self.round && self.step == Step::Prevote => {
                self.cast(VoteKind::Precommit, None, &mut out);
                self.step = Step::Precommit;
            }
            Timer::Precommit(h, r) if h == self.height && r == self.round => {
                self.relay_polka(&mut out);
                out.push(Action::Broadcast(Msg::CommitRequest { height: h }));
                self.start_round(now, r + 1, &mut out);
            }
            _ => return out,
        }
        self.run_rules(now, &mut out);
        out
    }

    pub fn on_message(&mut self, now: TimestampMs, from: usize, msg: Msg) -> Vec<Action> {
        let mut out = Vec::new();
        self.handle(now, from, msg, &mut out);
        out
    }

    fn handle(&mut self, now: TimestampMs, from: usize, msg: Msg, out: &mut Vec<Action>) {
        let height = match &msg {
            Msg::Tx { tx, submitted_at } => {
                let d = tx_digest(tx);
                if !self.committed_txs.contains(&d) && submitted_at + self.timing.tx_timeout_ms >= now {
                    self.pool.insert(d, *submitted_at, tx.clone());
                    self.maybe_activate(now, out);
                }
                return;
            }
            Msg::Proposal { height, .. } => *height,
            Msg::Vote(v) => v.height,
            Msg::BlockRequest { height, digest } => {
                let block = if *height < self.height {
                    self.ledger.block(*height).map(|b| {
                        let mut b = b.clone();
                        b.signatures.clear();
                        Arc::new(b)
                    })
                } else {
                    self.blocks.get(digest).cloned()
                };
                if let Some(block) = block.filter(|b| b.digest() == *digest) {
                    out.push(Action::Send(from, Msg::BlockResponse { block }));
                }
                return;
            }
            Msg::BlockResponse { block } => block.height,
            Msg::CommitRequest { height } => {
                if let Some(b) = self.ledger.block(*height) {
                    out.push(Action::Send(from, Msg::Commit { block: Arc::new(b.clone()) }));
                }
                return;
            }
            Msg::Commit { block } => {
                if block.height == self.height {
                    if let Some(round) = self.certified_round(block) {
                        let mut bare = (**block).clone();
                        let sigs = std::mem::take(&mut bare.signatures);
                        if self.is_valid(&bare) {
                            let d = bare.digest();
                            let entry = self.precommit_sigs.entry((round, d)).or_default();
                            entry.extend(sigs.into_iter().filter(|s| s.round == round));
                            self.decide(now, (round, Arc::new(bare)), out);
                        }
                    }
                }
                return;
            }
        };
        if height < self.height {
            if let Msg::Vote(v) = msg {
                self.late_precommit(v);
            }
            return;
        }
        if height > self.height {
            if from < self.n() && self.catchup.insert((self.height, from)) {
                out.push(Action::Send(from, Msg::CommitRequest { height: self.height }));
            }
            self.future.push((from, msg));
            return;
        }
        match msg {
            Msg::Proposal { round, block, valid_round, .. } => {
                if from != self.set.proposer(self.height, round) || self.proposals.contains_key(&round) {
                    return;
                }
                let d = block.digest();
                self.blocks.entry(d).or_insert_with(|| block.clone());
                self.proposals.insert(round, (block, d, valid_round));
            }
            Msg::Vote(v) => {
                let book = match v.kind {
                    VoteKind::Prevote => &self.prevotes,
                    VoteKind::Precommit => &self.precommits,
                };
                if v.voter >= self.n() || book.get(&v.round).is_some_and(|b| b.has(v.voter, v.value)) {
                    return;
                }
                let (id, vk) = self.set.member(v.voter).clone();
                // Direct messages ride an authenticated link; relayed ones and
                // anything that ends up on a block must carry a valid signature.
                let needs_sig = from != v.voter || (v.kind == VoteKind::Precommit && v.value.is_some());
                if needs_sig && !v.verify(&id, &vk) {
                    return;
                }
                if let (VoteKind::Precommit, Some(d)) = (v.kind, v.value) {
                    self.precommit_sigs.entry((v.round, d)).or_default().push(v.block_signature(&id, &vk));
                }
                let book = match v.kind {
                    VoteKind::Prevote => &mut self.prevotes,
                    VoteKind::Precommit => &mut self.precommits,
                };
                book.entry(v.round).or_default().insert(v);
            }
            Msg::BlockResponse { block } => {
                let d = block.digest();
                self.blocks.entry(d).or_insert(block);
            }
            _ => unreachable!("handled above"),
        }
        if !self.active {
            self.active = true;
            self.start_round(now, 0, out);
        }
        self.run_rules(now, out);
    }

    /// Round in which a quorum of members signed `block`, if any.
    fn certified_round(&self, block: &Block) -> Option<u32> {
        let d = block.digest();
        let mut by_round: BTreeMap<u32, BTreeSet<usize>> = BTreeMap::new();
        for sig in &block.signatures {
            let Some(idx) = (0..self.n()).find(|i| self.set.member(*i).0 == sig.signer) else { continue };
            if sig.public_key == self.set.member(idx).1.to_bytes() && sig.verify(block.height, &d) {
                by_round.entry(sig.round).or_default().insert(idx);
            }
        }
        by_round.into_iter().find(|(_, s)| s.len() >= quorum(self.n())).map(|(r, _)| r)
    }

    fn late_precommit(&mut self, v: Vote) {
        let Some(d) = v.value else { return };
        if v.kind != VoteKind::Precommit || v.voter >= self.n() || self.decided.get(&v.height) != Some(&(v.round, d)) {
            return;
        }
        let (id, vk) = self.set.member(v.voter).clone();
        let _ = self.ledger.attach_signature(v.height, v.block_signature(&id, &vk));
    }

    fn maybe_activate(&mut self, now: TimestampMs, out: &mut Vec<Action>) {
        if self.active {
            return;
        }
        self.pool.expire(now, self.timing.tx_timeout_ms);
        if self.pool.is_empty() {
            return;
        }
        let at = self.earliest_proposal();
        if now < at {
            out.push(Action::Schedule(at, Timer::Activate(self.height)));
            return;
        }
        self.active = true;
        self.start_round(now, 0, out);
        self.run_rules(now, out);
    }

    fn start_round(&mut self, now: TimestampMs, round: u32, out: &mut Vec<Action>) {
        self.round = round;
        self.step = Step::Propose;
        if self.set.proposer(self.height, round) == self.idx {
            let block = match &self.valid {
                Some((_, b)) => Some((**b).clone()),
                None => self.propose(round, now).expect("own turn"),
            };
            if let Some(block) = block {
                let valid_round = self.valid.as_ref().map(|(r, _)| *r);
                out.push(Action::Broadcast(Msg::Proposal {
                    height: self.height,
                    round,
                    block: Arc::new(block),
                    valid_round,
                }));
            }
        }
        out.push(Action::Schedule(now + self.timing.timeout(round), Timer::Propose(self.height, round)));
    }

    fn cast(&mut self, kind: VoteKind, value: Option<Digest>, out: &mut Vec<Action>) {
        let vote = Vote::signed(&self.key, self.id(), kind, self.height, self.round, value, self.idx);
        out.push(Action::Broadcast(Msg::Vote(vote)));
    }

    fn count(book: &BTreeMap<u32, VoteBook>, round: u32, value: Option<Digest>) -> usize {
        book.get(&round).map_or(0, |b| b.count(value))
    }

    fn total(book: &BTreeMap<u32, VoteBook>, round: u32) -> usize {
        book.get(&round).map_or(0, |b| b.voters.len())
    }

    /// Re-sends the prevotes that justify our valid value, so members that
    /// missed some of them can accept it in a later round.
    fn relay_polka(&self, out: &mut Vec<Action>) {
        let Some((vr, block)) = &self.valid else { return };
        let d = block.digest();
        if let Some(book) = self.prevotes.get(vr) {
            for v in book.signed.iter().filter(|v| v.value == Some(d)) {
                out.push(Action::Broadcast(Msg::Vote(v.clone())));
            }
        }
    }

    fn run_rules(&mut self, now: TimestampMs, out: &mut Vec<Action>) {
        let q = quorum(self.n());
        loop {
            let h = self.height;
            let r = self.round;
            if let Some(decision) = self.find_decision(out) {
                self.decide(now, decision, out);
                continue;
            }
            // Round skip on evidence that a correct member moved ahead.
            let ahead = self.prevotes.range(r + 1..).chain(self.precommits.range(r + 1..)).fold(
                BTreeMap::<u32, BTreeSet<usize>>::new(),
                |mut acc, (round, book)| {
                    acc.entry(*round).or_default().extend(book.voters.iter());
                    acc
                },
            );
            if let Some((&round, _)) = ahead.iter().rev().find(|(_, s)| s.len() >= skip_threshold(self.n())) {
                self.start_round(now, round, out);
                continue;
            }
            let proposal = self.proposals.get(&r).cloned();
            if self.step == Step::Propose {
                if let Some((block, d, vr)) = &proposal {
                    let ok = self.is_valid(block);
                    match vr {
                        None => {
                            let free = self.locked.as_ref().map_or(true, |(_, b)| b.digest() == *d);
                            self.cast(VoteKind::Prevote, (ok && free).then_some(*d), out);
                            self.step = Step::Prevote;
                            continue;
                        }
                        Some(vr) if *vr < r && Self::count(&self.prevotes, *vr, Some(*d)) >= q => {
                            let free = self.locked.as_ref().map_or(true, |(lr, b)| *lr <= *vr || b.digest() == *d);
                            self.cast(VoteKind::Prevote, (ok && free).then_some(*d), out);
                            self.step = Step::Prevote;
                            continue;
                        }
                        _ => {}
                    }
                }
            }
            if self.step == Step::Prevote && Self::total(&self.prevotes, r) >= q && self.prevote_timer.insert(r) {
                out.push(Action::Schedule(now + self.timing.timeout(r), Timer::Prevote(h, r)));
            }
            if self.step >= Step::Prevote && !self.lock_done.contains(&r) {
                if let Some((block, d, _)) = &proposal {
                    if Self::count(&self.prevotes, r, Some(*d)) >= q && self.is_valid(block) {
                        self.lock_done.insert(r);
                        if self.step == Step::Prevote {
                            self.locked = Some((r, block.clone()));
                            self.cast(VoteKind::Precommit, Some(*d), out);
                            self.step = Step::Precommit;
                        }
                        self.valid = Some((r, block.clone()));
                        continue;
                    }
                }
            }
            if self.step == Step::Prevote && Self::count(&self.prevotes, r, None) >= q {
                self.cast(VoteKind::Precommit, None, out);
                self.step = Step::Precommit;
                continue;
            }
            if Self::total(&self.precommits, r) >= q && self.precommit_timer.insert(r) {
                out.push(Action::Schedule(now + self.timing.timeout(r), Timer::Precommit(h, r)));
            }
            break;
        }
    }

    fn find_decision(&mut self, out: &mut Vec<Action>) -> Option<(u32, Arc<Block>)> {
        let q = quorum(self.n());
        let mut found = None;
        for (round, book) in &self.precommits {
            for (value, voters) in &book.by_value {
                let Some(d) = value.filter(|_| voters.len() >= q) else { continue };
                match self.blocks.get(&d) {
                    Some(b) if self.is_valid(b) => {
                        found = Some((*round, b.clone()));
                        break;
                    }
                    Some(_) => {}
                    None => {
                        if self.requested.insert(d) {
                            out.push(Action::Broadcast(Msg::BlockRequest { height: self.height, digest: d }));
                        }
                    }
                }
            }
            if found.is_some() {
                break;
            }
        }
        found
    }

    fn decide(&mut self, now: TimestampMs, (round, block): (u32, Arc<Block>), out: &mut Vec<Action>) {
        let d = block.digest();
        let mut committed = (*block).clone();
        for sig in self.precommit_sigs.get(&(round, d)).into_iter().flatten() {
            committed.add_signature(sig.clone());
        }
        self.ledger.append_block(committed).expect("decided block extends the local chain");
        self.decided.insert(self.height, (round, d));
        for tx in &block.transactions {
            let td = tx_digest(tx);
            self.pool.remove(&td);
            self.committed_txs.insert(td);
        }
        out.push(Action::Decided { height: self.height, block: self.ledger.block(self.height).map(|b| Arc::new(b.clone())).expect("just appended") });
        self.height += 1;
        self.round = 0;
        self.step = Step::Propose;
        self.active = false;
        self.locked = None;
        self.valid = None;
        self.proposals.clear();
        self.blocks.clear();
        self.prevotes.clear();
        self.precommits.clear();
        self.precommit_sigs.clear();
        self.prevote_timer.clear();
        self.precommit_timer.clear();
        self.lock_done.clear();
        self.requested.clear();
        let h = self.height;
        self.catchup.retain(|(ch, _)| *ch >= h);
        let future = std::mem::take(&mut self.future);
        for (from, msg) in future {
            self.handle(now, from, msg, out);
        }
        self.maybe_activate(now, out);
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CommitteeConfig {
    pub active_nodes: usize,
    pub faulty: usize,
    pub behaviour: Behaviour,
    /// Explicit faulty member indices; random positions when absent.
    #[serde(default)]
    pub faulty_members: Option<Vec<usize>>,
    pub link: LinkModel,
    pub timing: Timing,
    pub seed: u64,
}

impl Default for CommitteeConfig {
    fn default() -> Self {
        CommitteeConfig {
            active_nodes: 4,
            faulty: 0,
            behaviour: Behaviour::Silent,
            faulty_members: None,
            link: LinkModel::default(),
            timing: Timing::default(),
            seed: 0,
        }
    }
}

/// First honest decision for a height.
#[derive(Clone, Debug)]
pub struct CommitEvent {
    pub height: u64,
    pub at: TimestampMs,
    pub block: Arc<Block>,
}

const CLIENT: usize = usize::MAX;

/// All active nodes plus the event loop that connects them.
pub struct Committee {
    set: Arc<ActiveNodeSet>,
    validators: Vec<Validator>,
    behaviours: Vec<Behaviour>,
    transport: SimTransport<usize, Msg>,
    timers: BinaryHeap<Reverse<(TimestampMs, u64, usize, Timer)>>,
    timer_seq: u64,
    now: TimestampMs,
    rng: ChaCha8Rng,
    commits: Vec<CommitEvent>,
    decided_heights: BTreeMap<u64, Digest>,
    forks: Vec<u64>,
}

impl Committee {
    pub fn new(cfg: &CommitteeConfig) -> Result<Self, ConsensusError> {
        let n = cfg.active_nodes;
        if n == 0 {
            return Err(ConsensusError::Empty);
        }
        if cfg.faulty > n {
            return Err(ConsensusError::TooManyFaulty { faulty: cfg.faulty, n });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let keys: Vec<SigningKey> = (0..n).map(|_| SigningKey::generate(&mut rng)).collect();
        let set = Arc::new(ActiveNodeSet::new(
            keys.iter().enumerate().map(|(i, k)| (NodeId(format!("active-{i}")), k.verifying_key())).collect(),
        )?);
        let faulty: BTreeSet<usize> = match &cfg.faulty_members {
            Some(m) => m.iter().copied().filter(|i| *i < n).collect(),
            None => {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.shuffle(&mut rng);
                idx.into_iter().take(cfg.faulty).collect()
            }
        };
        let behaviours = (0..n).map(|i| if faulty.contains(&i) { cfg.behaviour } else { Behaviour::Honest }).collect();
        let validators =
            keys.into_iter().enumerate().map(|(i, k)| Validator::new(i, k, set.clone(), cfg.timing)).collect();
        Ok(Committee {
            set,
            validators,
            behaviours,
            transport: SimTransport::new(cfg.link, cfg.seed.wrapping_add(1)),
            timers: BinaryHeap::new(),
            timer_seq: 0,
            now: 0,
            rng,
            commits: Vec::new(),
            decided_heights: BTreeMap::new(),
            forks: Vec::new(),
        })
    }

    pub fn set(&self) -> &ActiveNodeSet {
        &self.set
    }

    pub fn now(&self) -> TimestampMs {
        self.now
    }

    pub fn validators(&self) -> &[Validator] {
        &self.validators
    }

    pub fn is_honest(&self, idx: usize) -> bool {
        self.behaviours[idx] == Behaviour::Honest
    }

    pub fn honest(&self) -> impl Iterator<Item = &Validator> {
        self.validators.iter().filter(|v| self.is_honest(v.idx))
    }

    pub fn transport_mut(&mut self) -> &mut SimTransport<usize, Msg> {
        &mut self.transport
    }

    pub fn transport_stats(&self) -> TransportStats {
        self.transport.stats()
    }

    /// Heights at which two honest members decided different blocks.
    pub fn forks(&self) -> &[u64] {
        &self.forks
    }

    pub fn take_commits(&mut self) -> Vec<CommitEvent> {
        std::mem::take(&mut self.commits)
    }

    /// A client hands a transaction to every active node.
    pub fn submit(&mut self, tx: TxRecord, at: TimestampMs) {
        self.run_until(at);
        for i in 0..self.validators.len() {
            self.transport.send(at, CLIENT, i, Msg::Tx { tx: tx.clone(), submitted_at: at });
        }
    }

    pub fn next_event(&self) -> Option<TimestampMs> {
        let t = self.transport.next_delivery();
        let u = self.timers.peek().map(|Reverse((t, ..))| *t);
        match (t, u) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Processes every event due at or before `until`.
    pub fn run_until(&mut self, until: TimestampMs) {
        while let Some(t) = self.next_event().filter(|t| *t <= until) {
            self.now = self.now.max(t);
            if self.transport.next_delivery() == Some(t) {
                let env = self.transport.pop_due(t).expect("peeked");
                self.dispatch(env.dst, env.src, env.msg);
            } else {
                let Reverse((_, _, node, timer)) = self.timers.pop().expect("peeked");
                let actions = self.validators[node].on_timer(self.now, timer);
                self.apply(node, actions);
            }
        }
        self.now = self.now.max(until);
    }

    /// Runs until no messages are in flight, or `limit` is reached.
    pub fn settle(&mut self, limit: TimestampMs) {
        while let Some(t) = self.next_event().filter(|t| *t <= limit) {
            if self.transport.is_idle() && self.validators.iter().all(|v| !v.active && v.pending() == 0) {
                break;
            }
            self.run_until(t);
        }
    }

    fn dispatch(&mut self, node: usize, from: usize, msg: Msg) {
        let mut queue = VecDeque::from([(node, from, msg)]);
        while let Some((node, from, msg)) = queue.pop_front() {
            let actions = self.validators[node].on_message(self.now, from, msg);
            for (to, m) in self.route(node, actions) {
                queue.push_back((to, node, m));
            }
        }
    }

    fn apply(&mut self, node: usize, actions: Vec<Action>) {
        let local = self.route(node, actions);
        for (to, m) in local {
            self.dispatch(to, node, m);
        }
    }

    /// Sends outbound messages, applying the member's fault behaviour. Returns
    /// messages addressed to the member itself for immediate processing.
    fn route(&mut self, node: usize, actions: Vec<Action>) -> Vec<(usize, Msg)> {
        let mut local = Vec::new();
        let n = self.validators.len();
        for a in actions {
            match a {
                Action::Schedule(at, timer) => {
                    self.timer_seq += 1;
                    self.timers.push(Reverse((at, self.timer_seq, node, timer)));
                }
                Action::Decided { height, block } => {
                    if self.is_honest(node) {
                        let d = block.digest();
                        match self.decided_heights.get(&height) {
                            Some(prev) if *prev != d => self.forks.push(height),
                            Some(_) => {}
                            None => {
                                self.decided_heights.insert(height, d);
                                self.commits.push(CommitEvent { height, at: self.now, block });
                            }
                        }
                    }
                }
                Action::Send(to, msg) => {
                    if let Some(msg) = self.distort(node, msg, to) {
                        self.transport.send(self.now, node, to, msg);
                    }
                }
                Action::Broadcast(msg) => {
                    local.push((node, msg.clone()));
                    for to in (0..n).filter(|to| *to != node) {
                        if let Some(m) = self.distort(node, msg.clone(), to) {
                            self.transport.send(self.now, node, to, m);
                        }
                    }
                }
            }
        }
        local
    }

    fn distort(&mut self, node: usize, msg: Msg, to: usize) -> Option<Msg> {
        let behaviour = self.behaviours[node];
        if behaviour == Behaviour::Honest {
            return Some(msg);
        }
        let second_half = to >= self.validators.len() / 2;
        match (behaviour, msg) {
            (Behaviour::Silent, _) => None,
            (Behaviour::RandomVotes, Msg::Vote(v)) => {
                let value = if self.rng.gen_bool(0.25) { None } else { Some(self.rng.gen::<Digest>()) };
                Some(Msg::Vote(self.revote(node, v, value)))
            }
            (Behaviour::RandomVotes, _) => None,
            (Behaviour::Equivocate, Msg::Proposal { height, round, block, valid_round }) if second_half => {
                let mut alt = (*block).clone();
                alt.timestamp += 1 + (height % 7);
                Some(Msg::Proposal { height, round, block: Arc::new(alt), valid_round })
            }
            (Behaviour::Equivocate, Msg::Vote(v)) if second_half => {
                let value = Some(sha256(&[&v.value.unwrap_or_default()[..], b"alt"].concat()));
                Some(Msg::Vote(self.revote(node, v, value)))
            }
            (_, msg) => Some(msg),
        }
    }

    fn revote(&self, node: usize, v: Vote, value: Option<Digest>) -> Vote {
        let val = &self.validators[node];
        Vote::signed(&val.key, val.id(), v.kind, v.height, v.round, value, v.voter)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ConsensusFamily {
    ProofOfWork,
    ProofOfStake,
    Pbft,
    Tendermint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ConsensusProfile {
    pub family: ConsensusFamily,
    pub name: &'static str,
    pub permission: &'static str,
    pub energy_saving: &'static str,
    pub adversary_tolerance: &'static str,
}

/// Reference characteristics of common consensus families. Only the
/// permissioned BFT row is implemented here.
pub fn consensus_reference_table() -> [ConsensusProfile; 4] {
    [
        ConsensusProfile {
            family: ConsensusFamily::ProofOfWork,
            name: "PoW",
            permission: "open",
            energy_saving: "no",
            adversary_tolerance: "<25% computing power",
        },
        ConsensusProfile {
            family: ConsensusFamily::ProofOfStake,
            name: "PoS",
            permission: "open",
            energy_saving: "partial",
            adversary_tolerance: "<51% stakes",
        },
        ConsensusProfile {
            family: ConsensusFamily::Pbft,
            name: "pBFT",
            permission: "permissioned",
            energy_saving: "yes",
            adversary_tolerance: "<33% faulty replicas",
        },
        ConsensusProfile {
            family: ConsensusFamily::Tendermint,
            name: "Tendermint",
            permission: "permissioned",
            energy_saving: "yes",
            adversary_tolerance: "<33% voting power",
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Did;

    fn tx(i: u64) -> TxRecord {
        TxRecord::private(i, Did(format!("did:r:{i}")), Did(format!("did:s:{i}")), None).unwrap()
    }

    fn committee(n: usize, faulty: usize, behaviour: Behaviour, seed: u64) -> Committee {
        Committee::new(&CommitteeConfig { active_nodes: n, faulty, behaviour, seed, ..Default::default() }).unwrap()
    }

    #[test]
    fn thresholds() {
        assert_eq!((quorum(3), quorum(4), quorum(7)), (3, 3, 5));
        assert_eq!((skip_threshold(4), skip_threshold(7)), (2, 3));
    }

    #[test]
    fn reference_table_lookups() {
        let t = consensus_reference_table();
        assert_eq!(t[0].adversary_tolerance, "<25% computing power");
        assert_eq!(t[2].energy_saving, "yes");
        assert_eq!(t[3].permission, "permissioned");
    }

    #[test]
    fn wrong_proposer_rejected() {
        let c = committee(4, 0, Behaviour::Silent, 0);
        let set = c.set.clone();
        let mut v = Validator::new(1, SigningKey::from_bytes(&[1; 32]), set, Timing::default());
        assert!(matches!(v.propose(0, 0), Err(ConsensusError::NotProposer { .. })));
        let mut p = Validator::new(0, SigningKey::from_bytes(&[1; 32]), c.set.clone(), Timing::default());
        assert_eq!(p.propose(0, 0).unwrap(), None);
        p.pool.insert(tx_digest(&tx(1)), 0, tx(1));
        let b = p.propose(0, 0).unwrap().unwrap();
        assert_eq!(b.transactions, vec![tx(1)]);
    }

    #[test]
    fn fault_free_ledgers_identical() {
        let mut c = committee(4, 0, Behaviour::Silent, 3);
        for i in 0..20 {
            c.submit(tx(i), i * 100);
        }
        c.settle(60_000);
        let first = c.validators[0].ledger().export_ndjson();
        assert_eq!(c.validators[0].ledger().len(), 20);
        for v in &c.validators {
            assert_eq!(v.ledger().export_ndjson(), first);
            assert!(v.ledger().verify_chain_with_members(&c.set.ids()));
        }
        assert!(c.validators[0].ledger().blocks().all(|b| b.signatures.len() == 4));
    }

    #[test]
    fn one_byzantine_of_four_commits() {
        for behaviour in [Behaviour::Silent, Behaviour::RandomVotes, Behaviour::Equivocate] {
            let mut c = committee(4, 1, behaviour, 11);
            for i in 0..10 {
                c.submit(tx(i), i * 1000);
            }
            c.settle(600_000);
            assert!(c.forks().is_empty());
            for v in c.honest() {
                assert_eq!(v.ledger().len(), 10, "{behaviour:?}");
            }
        }
    }

    #[test]
    fn three_members_with_one_equivocator_stay_consistent() {
        for seed in 0..20 {
            let mut c = committee(3, 1, Behaviour::Equivocate, seed);
            for i in 0..3 {
                c.submit(tx(i), i * 700);
            }
            c.settle(120_000);
            assert!(c.forks().is_empty());
        }
    }

    #[test]
    fn tally_enumeration_for_three() {
        let a = Some([1u8; 32]);
        let b = Some([2u8; 32]);
        let options = [a, b, None];
        for h1 in options {
            for h2 in options {
                for x in options {
                    for y in options {
                        // The faulty voter shows x to one receiver and y to the other.
                        let r1 = tally([h1, h2, x].iter(), 3);
                        let r2 = tally([h1, h2, y].iter(), 3);
                        if let (Some(Some(d1)), Some(Some(d2))) = (r1, r2) {
                            assert_eq!(d1, d2);
                        }
                    }
                }
            }
        }
    }
}
