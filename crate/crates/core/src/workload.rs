//! Daily mobility workload: per-individual GPS point counts, a time-of-day
//! mixture, and a scenario runner that pushes every point through contracts,
//! encrypted channels and committee consensus.

use std::collections::{BTreeMap, HashMap};

use ed25519_dalek::SigningKey;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{tx_digest, Behaviour, Committee, CommitteeConfig, ConsensusError, Timing};
use crate::contract::{
    disclosures, match_terms, ContractBook, ContractId, ExtendedPermissions, LedgerKeys, OwnerTerms, Parties, Party,
    RequesterTerms, Temporality, TransferPayload,
};
use crate::identity::{create_schema, issue_credential, ApplicationRequest, Holder, Issuer, NodeKind, TrustList};
use crate::ledger::Ledger;
use crate::p2p::{ChannelId, DidKind, Network};
use crate::privacy::{geoind_perturb, GeoPoint, PrivacyPolicy};
use crate::transport::LinkModel;
use crate::types::{Did, Digest, NodeId, TimestampMs};

pub const HOUR_MS: f64 = 3_600_000.0;
pub const MINUTE_MS: u64 = 60_000;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("population must be positive")]
    EmptyPopulation,
    #[error("mixture weights must be non-negative and sum to 1 (got {0})")]
    Weights(f64),
    #[error("{0} must be positive and finite")]
    NonPositive(&'static str),
    #[error("{0}")]
    Consensus(#[from] ConsensusError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    /// Hour of day.
    pub mean: f64,
    pub sd: f64,
    pub weight: f64,
}

/// Gaussian mixture over the hour of day, wrapped onto [0, 24).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mixture(pub Vec<MixtureComponent>);

impl Default for Mixture {
    fn default() -> Self {
        let w = 1.0 / 3.0;
        Mixture(vec![
            MixtureComponent { mean: 8.0, sd: 2.3, weight: w },
            MixtureComponent { mean: 13.0, sd: 3.5, weight: w },
            MixtureComponent { mean: 18.0, sd: 2.3, weight: w },
        ])
    }
}

fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

impl Mixture {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let sum: f64 = self.0.iter().map(|c| c.weight).sum();
        if self.0.is_empty() || self.0.iter().any(|c| c.weight < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(ConfigError::Weights(sum));
        }
        if self.0.iter().any(|c| !(c.sd > 0.0 && c.sd.is_finite())) {
            return Err(ConfigError::NonPositive("mixture sd"));
        }
        Ok(())
    }

    /// Density per hour of the wrapped mixture at hour `t`.
    pub fn density(&self, t: f64) -> f64 {
        self.0
            .iter()
            .map(|c| c.weight * (-3..=3).map(|k| normal_pdf(t + 24.0 * k as f64, c.mean, c.sd)).sum::<f64>())
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = self.0.last().expect("validated non-empty");
        for c in &self.0 {
            acc += c.weight;
            if u < acc {
                chosen = c;
                break;
            }
        }
        let x = Normal::new(chosen.mean, chosen.sd).expect("validated sd").sample(rng);
        x.rem_euclid(24.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub population: usize,
    pub active_nodes: usize,
    pub faulty: usize,
    pub behaviour: Behaviour,
    pub duration_hours: f64,
    pub points_mean: f64,
    pub points_sd: f64,
    pub points_max: u32,
    pub mixture: Mixture,
    /// Load-thinning factor for desk runs: point counts and committee
    /// capacity are both divided by it.
    pub time_compression: f64,
    /// Full-scale committee capacity in transactions per second.
    pub capacity_tps: f64,
    pub link: LinkModel,
    pub timeout_ms: u64,
    pub tx_timeout_s: f64,
    pub privacy: PrivacyPolicy,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            population: 100,
            active_nodes: 4,
            faulty: 0,
            behaviour: Behaviour::Silent,
            duration_hours: 24.0,
            points_mean: 9356.0,
            points_sd: 1902.0,
            points_max: 17_280,
            mixture: Mixture::default(),
            time_compression: 100.0,
            capacity_tps: 25.0,
            link: LinkModel { base_ms: 10, jitter_ms: 5, drop_prob: 0.0 },
            timeout_ms: 500,
            tx_timeout_s: 300.0,
            privacy: PrivacyPolicy::default(),
            seed: 7,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.population == 0 {
            return Err(ConfigError::EmptyPopulation);
        }
        if self.active_nodes == 0 {
            return Err(ConfigError::NonPositive("active_nodes"));
        }
        if self.faulty > self.active_nodes {
            return Err(ConsensusError::TooManyFaulty { faulty: self.faulty, n: self.active_nodes }.into());
        }
        for (name, v) in [
            ("duration_hours", self.duration_hours),
            ("time_compression", self.time_compression),
            ("capacity_tps", self.capacity_tps),
            ("tx_timeout_s", self.tx_timeout_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::NonPositive(name));
            }
        }
        if !(self.points_sd >= 0.0 && self.points_mean.is_finite()) {
            return Err(ConfigError::NonPositive("points_sd"));
        }
        self.mixture.validate()?;
        self.privacy.validate().map_err(|_| ConfigError::NonPositive("privacy parameters"))
    }

    pub fn min_block_interval_ms(&self) -> u64 {
        (1000.0 * self.time_compression / self.capacity_tps).round() as u64
    }

    /// Blocks per minute the committee may produce at this compression.
    pub fn capacity_per_minute(&self) -> u64 {
        MINUTE_MS.div_ceil(self.min_block_interval_ms())
    }
}

/// Daily point counts, one per individual: rounded normal draws clamped to `[0, points_max]`.
pub fn gen_individual_counts<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Vec<u32> {
    let normal = Normal::new(cfg.points_mean, cfg.points_sd).expect("validated");
    (0..cfg.population)
        .map(|_| {
            let x = if cfg.points_sd == 0.0 { cfg.points_mean } else { normal.sample(rng) };
            x.round().clamp(0.0, cfg.points_max as f64) as u32
        })
        .collect()
}

/// Sorted hours of day in [0, 24).
pub fn gen_timestamps<R: Rng + ?Sized>(count: usize, mixture: &Mixture, rng: &mut R) -> Vec<f64> {
    let mut t: Vec<f64> = (0..count).map(|_| mixture.sample(rng)).collect();
    t.sort_by(f64::total_cmp);
    t
}

/// Counts per minute of day.
pub fn per_minute_load(hours: &[f64]) -> Vec<u64> {
    let mut out = vec![0u64; 1440];
    for h in hours {
        out[((h * 60.0) as usize).min(1439)] += 1;
    }
    out
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Correlation between generated per-minute load (full population, no thinning)
/// and the mixture density.
pub fn load_shape_correlation(cfg: &ScenarioConfig) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let counts = gen_individual_counts(cfg, &mut rng);
    let mut all = Vec::new();
    for c in counts {
        all.extend(gen_timestamps(c as usize, &cfg.mixture, &mut rng));
    }
    let load: Vec<f64> = per_minute_load(&all).into_iter().map(|c| c as f64).collect();
    let density: Vec<f64> = (0..1440).map(|m| cfg.mixture.density((m as f64 + 0.5) / 60.0)).collect();
    pearson(&load, &density)
}

/// Trailing mean over the last `min(window, t + 1)` samples.
pub fn moving_average(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be at least 1");
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for (t, x) in series.iter().enumerate() {
        sum += x;
        if t >= window {
            sum -= series[t - window];
        }
        out.push(sum / (t + 1).min(window) as f64);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinuteRecord {
    pub minute: u64,
    pub sent: u64,
    pub served: u64,
    /// Mean submit-to-commit latency of the minute's served messages; `None` when nothing was served.
    pub mean_latency_s: Option<f64>,
    /// `served / sent`; `None` for idle minutes.
    pub throughput: Option<f64>,
    /// Blocks whose timestamp falls in this minute.
    pub committed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub population: usize,
    pub total_messages: u64,
    pub served: u64,
    pub dropped: u64,
    pub pending: u64,
    pub avg_latency_s: f64,
    pub sd_latency_s: f64,
    pub avg_throughput: f64,
    pub sd_throughput: f64,
    pub max_sent_per_minute: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricSeries {
    pub minutes: Vec<MinuteRecord>,
    pub summary: Summary,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
    (m, v.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Fate {
    Pending,
    Served(TimestampMs),
    Dropped,
}

struct Message {
    sent_at: TimestampMs,
    fate: Fate,
}

/// Counts at one instant; `sent == served + dropped + pending` always holds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Snapshot {
    pub at: TimestampMs,
    pub sent: u64,
    pub served: u64,
    pub dropped: u64,
    pub pending: u64,
}

pub struct ScenarioResult {
    pub series: MetricSeries,
    pub ledger: Ledger,
    pub snapshots: Vec<Snapshot>,
    /// Start of the simulated day, after identity and contract setup.
    pub day_start: TimestampMs,
    pub contracts: Vec<ContractId>,
    pub book: ContractBook,
    pub network_frames: u64,
    pub received_frames: u64,
}

struct Individual {
    contract: ContractId,
    channel: ChannelId,
    did_i: Did,
    home: GeoPoint,
}

/// Runs one simulated day through the whole stack.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult, ConfigError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut committee = Committee::new(&CommitteeConfig {
        active_nodes: cfg.active_nodes,
        faulty: cfg.faulty,
        behaviour: cfg.behaviour,
        faulty_members: None,
        link: cfg.link,
        timing: Timing {
            timeout_ms: cfg.timeout_ms,
            min_block_interval_ms: cfg.min_block_interval_ms(),
            tx_timeout_ms: (cfg.tx_timeout_s * 1000.0) as u64,
            ..Timing::default()
        },
        seed: cfg.seed ^ 0xc0ff_ee,
    })?;
    let mut net = Network::new(cfg.link, cfg.seed ^ 0x0bad_cafe);
    let mut book = ContractBook::new();

    // Identity setup: a trusted issuer vouches for the requesting university.
    let gov = Issuer::generate(NodeId::new("gov"), Did::from("did:bsmd:gov"), NodeKind::Government, &mut rng);
    let mut trust = TrustList::new();
    trust.trust(&gov);
    let mut shadow = Ledger::new();
    let (_, schema_tx) =
        create_schema(&gov, &trust, &shadow, "org-id", &["kind", "sector"], 0).expect("fresh schema");
    let uni_node = NodeId::new("university");
    let uni_public = net.create_did(&uni_node, DidKind::Public, BTreeMap::from([("kind".into(), "university".into())]));
    let mut uni = Holder::generate(uni_public.clone(), &mut rng);
    committee.submit(schema_tx, 0);
    settle(&mut committee, &mut shadow);
    let values = BTreeMap::from([("kind".to_string(), "university".to_string()), ("sector".into(), "research".into())]);
    let (cred, cred_tx) = issue_credential(&gov, &shadow, "org-id", &uni_public, &uni.verifying_key(), &values, committee.now(), &mut rng)
        .expect("schema committed");
    uni.store(cred);
    committee.submit(cred_tx, committee.now());
    settle(&mut committee, &mut shadow);

    // Contracts: one per individual, each with fresh pairwise DIDs on both sides.
    let counts = gen_individual_counts(cfg, &mut rng);
    let duration_ms = (cfg.duration_hours * HOUR_MS) as u64;
    let setup_guess = committee.now() + (cfg.population as u64 + 2) * cfg.min_block_interval_ms() + MINUTE_MS;
    let day_start = setup_guess.div_ceil(MINUTE_MS) * MINUTE_MS;
    let uni_key = SigningKey::generate(&mut rng);
    let mut people = Vec::with_capacity(cfg.population);
    let mut requests = Vec::with_capacity(cfg.population);
    let mut proofs = Vec::with_capacity(cfg.population);
    for i in 0..cfg.population {
        let node = NodeId(format!("individual-{i}"));
        let public = net.create_did(&node, DidKind::Public, BTreeMap::from([("kind".into(), "individual".into())]));
        let req = ApplicationRequest::new(public.clone(), &mut rng).claim("kind", "university");
        let proof = uni.build_proof(&req, &shadow).expect("university credential is registered");
        requests.push(req);
        proofs.push(proof);
    }
    let mut keys = LedgerKeys::new(&shadow, &trust);
    let mut activations = Vec::new();
    for i in 0..cfg.population {
        let node = NodeId(format!("individual-{i}"));
        let owner_key = SigningKey::generate(&mut rng);
        let did_i = net.create_did(&node, DidKind::Pairwise, BTreeMap::new());
        let did_n = net.create_did(&uni_node, DidKind::Pairwise, BTreeMap::new());
        let owner_terms = OwnerTerms {
            service_requested: "mobility_research".into(),
            monetary_reward: 1,
            privacy_level: disclosures(&["geoind"]),
            temporality: Temporality::window(day_start, day_start + duration_ms).expect("positive duration"),
            extended_permissions: ExtendedPermissions::default(),
            require_identity_key: true,
        };
        let requester_terms = RequesterTerms {
            service_provided: "mobility_research".into(),
            monetary_reward: 1,
            accuracy: disclosures(&["geoind", "exact_location"]),
            temporality: Temporality::window(0, day_start + duration_ms + HOUR_MS as u64).expect("positive"),
            extended_permissions: ExtendedPermissions::default(),
            require_identity_key: false,
        };
        keys.requester_proof = Some((&requests[i], &proofs[i]));
        let outcome = match_terms(&owner_terms, &requester_terms, &keys);
        let parties = Parties {
            owner_public: Did(format!("did:bsmd:individual-{i}")),
            owner_pairwise: did_i.clone(),
            owner_key: owner_key.verifying_key(),
            requester_public: uni_public.clone(),
            requester_pairwise: did_n,
            requester_key: uni_key.verifying_key(),
        };
        let id = book.propose(parties, owner_terms, requester_terms, None, outcome);
        let now = committee.now();
        book.sign(id, Party::Owner, &owner_key, now).expect("accepted terms");
        if let Some(tx) = book.sign(id, Party::Requester, &uni_key, now).expect("accepted terms") {
            activations.push(tx);
        }
        let home = GeoPoint { x: rng.gen_range(0.0..10_000.0), y: rng.gen_range(0.0..10_000.0) };
        people.push(Individual { contract: id, channel: 0, did_i, home });
    }
    for tx in activations {
        let at = committee.now();
        committee.submit(tx, at);
    }
    settle(&mut committee, &mut shadow);
    let day_start = day_start.max(committee.now().div_ceil(MINUTE_MS) * MINUTE_MS);
    for p in people.iter_mut() {
        p.channel = net.open_channel(&book, p.contract, day_start).expect("contract active at day start");
    }

    // The day's messages, thinned by the compression factor.
    let mut schedule: Vec<(TimestampMs, usize)> = Vec::new();
    for (i, c) in counts.iter().enumerate() {
        let thinned = (*c as f64 / cfg.time_compression).round() as usize;
        let mut last = 0;
        for h in gen_timestamps(thinned, &cfg.mixture, &mut rng) {
            let h = h.min(cfg.duration_hours);
            let t = (day_start + (h * HOUR_MS) as u64).max(last + 1);
            last = t;
            schedule.push((t, i));
        }
    }
    schedule.sort();

    committee.take_commits();
    let tx_timeout = (cfg.tx_timeout_s * 1000.0) as u64;
    // Expiry grace covers a few consensus rounds after the pool deadline.
    let deadline = tx_timeout + 64 * cfg.timeout_ms + cfg.min_block_interval_ms();
    let mut tracker = Tracker { messages: Vec::with_capacity(schedule.len()), by_digest: HashMap::new(), expire_from: 0, day_start, committed_per_minute: BTreeMap::new(), deadline };
    let mut snapshots = Vec::new();
    let mut next_snapshot = day_start + HOUR_MS as u64;
    let payload = TransferPayload::new(disclosures(&["geoind"]));

    for (t, i) in schedule {
        committee.run_until(t);
        tracker.absorb(&mut committee, t);
        while t >= next_snapshot {
            snapshots.push(snapshot(&tracker.messages, next_snapshot));
            next_snapshot += HOUR_MS as u64;
        }
        let p = &people[i];
        let idx = tracker.messages.len();
        tracker.messages.push(Message { sent_at: t, fate: Fate::Pending });
        if !book.enforce_transfer(p.contract, t, &payload).is_allow() {
            tracker.messages[idx].fate = Fate::Dropped;
            continue;
        }
        let loc = GeoPoint { x: p.home.x + rng.gen_range(-2000.0..2000.0), y: p.home.y + rng.gen_range(-2000.0..2000.0) };
        let reported = geoind_perturb(loc, cfg.privacy.geoind_epsilon, &mut rng).expect("validated epsilon");
        let body = format!("{{\"t\":{t},\"x\":{:.2},\"y\":{:.2}}}", reported.x, reported.y);
        if net.send_encrypted(&book, p.channel, &p.did_i, body.as_bytes(), t).is_err() {
            tracker.messages[idx].fate = Fate::Dropped;
            continue;
        }
        let tx = book.get(p.contract).expect("known contract").transfer_tx(t);
        tracker.by_digest.insert(tx_digest(&tx), idx);
        committee.submit(tx, t);
    }
    let end = tracker.messages.last().map_or(day_start, |m| m.sent_at) + deadline + 1;
    committee.run_until(end);
    tracker.absorb(&mut committee, end);
    snapshots.push(snapshot(&tracker.messages, end));
    net.deliver(end);
    let mut received = 0u64;
    let peers: Vec<Did> = net.channels().map(|c| c.requester_did.clone()).collect();
    for peer in peers {
        while net.recv(&peer).is_some() {
            received += 1;
        }
    }

    let series = metric_series(cfg, &tracker.messages, day_start, &tracker.committed_per_minute);
    let ledger = committee.honest().next().expect("at least one honest member").ledger().clone();
    Ok(ScenarioResult {
        series,
        ledger,
        snapshots,
        day_start,
        contracts: people.iter().map(|p| p.contract).collect(),
        book,
        network_frames: net.stats().sent,
        received_frames: received,
    })
}

struct Tracker {
    messages: Vec<Message>,
    by_digest: HashMap<Digest, usize>,
    /// Messages before this index are past their deadline.
    expire_from: usize,
    day_start: TimestampMs,
    committed_per_minute: BTreeMap<u64, u64>,
    deadline: u64,
}

impl Tracker {
    fn absorb(&mut self, committee: &mut Committee, now: TimestampMs) {
        for ev in committee.take_commits() {
            if ev.block.timestamp >= self.day_start {
                *self.committed_per_minute.entry((ev.block.timestamp - self.day_start) / MINUTE_MS).or_default() += 1;
            }
            for tx in &ev.block.transactions {
                if let Some(&m) = self.by_digest.get(&tx_digest(tx)) {
                    if self.messages[m].fate == Fate::Pending {
                        self.messages[m].fate = Fate::Served(ev.at);
                    }
                }
            }
        }
        while let Some(m) = self.messages.get_mut(self.expire_from) {
            if now <= m.sent_at + self.deadline {
                break;
            }
            if m.fate == Fate::Pending {
                m.fate = Fate::Dropped;
            }
            self.expire_from += 1;
        }
    }
}

/// Runs the committee until it is idle and copies the decided chain.
fn settle(committee: &mut Committee, shadow: &mut Ledger) {
    let limit = committee.now() + 3_600_000 * 24;
    committee.settle(limit);
    if let Some(v) = committee.honest().next() {
        *shadow = v.ledger().clone();
    }
}

fn snapshot(messages: &[Message], at: TimestampMs) -> Snapshot {
    let mut s = Snapshot { at, sent: messages.len() as u64, ..Default::default() };
    for m in messages {
        match m.fate {
            Fate::Pending => s.pending += 1,
            Fate::Served(_) => s.served += 1,
            Fate::Dropped => s.dropped += 1,
        }
    }
    s
}

fn metric_series(
    cfg: &ScenarioConfig,
    messages: &[Message],
    day_start: TimestampMs,
    committed: &BTreeMap<u64, u64>,
) -> MetricSeries {
    let minutes = (cfg.duration_hours * 60.0).ceil() as u64;
    let mut sent = vec![0u64; minutes as usize];
    let mut served = vec![0u64; minutes as usize];
    let mut latency = vec![0.0f64; minutes as usize];
    let last = minutes as usize - 1;
    for m in messages {
        let k = (((m.sent_at - day_start) / MINUTE_MS) as usize).min(last);
        sent[k] += 1;
        if let Fate::Served(at) = m.fate {
            served[k] += 1;
            latency[k] += (at - m.sent_at) as f64 / 1000.0;
        }
    }
    let rows: Vec<MinuteRecord> = (0..minutes as usize)
        .map(|k| MinuteRecord {
            minute: k as u64,
            sent: sent[k],
            served: served[k],
            mean_latency_s: (served[k] > 0).then(|| latency[k] / served[k] as f64),
            throughput: (sent[k] > 0).then(|| served[k] as f64 / sent[k] as f64),
            committed: committed.get(&(k as u64)).copied().unwrap_or(0),
        })
        .collect();
    let lat: Vec<f64> = rows.iter().filter_map(|r| r.mean_latency_s).collect();
    let thr: Vec<f64> = rows.iter().filter_map(|r| r.throughput).collect();
    let (avg_latency_s, sd_latency_s) = mean_sd(&lat);
    let (avg_throughput, sd_throughput) = mean_sd(&thr);
    let snap = snapshot(messages, u64::MAX);
    MetricSeries {
        summary: Summary {
            population: cfg.population,
            total_messages: snap.sent,
            served: snap.served,
            dropped: snap.dropped,
            pending: snap.pending,
            avg_latency_s,
            sd_latency_s,
            avg_throughput,
            sd_throughput,
            max_sent_per_minute: sent.iter().copied().max().unwrap_or(0),
        },
        minutes: rows,
    }
}

pub fn ledger_fingerprint(ledger: &Ledger) -> String {
    hex::encode(ledger.tip_digest())
}
