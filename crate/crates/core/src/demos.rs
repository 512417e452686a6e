//! Scripted scenarios exercising the security properties end to end. Each
//! returns a report of named checks plus tabular rows for export.

use std::collections::BTreeMap;

use ed25519_dalek::SigningKey;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use x25519_dalek::StaticSecret;

use crate::broker::{discover, metadata_doc, Broker, DiscoveryFilter, Solicitation};
use crate::consensus::{Committee, CommitteeConfig};
use crate::contract::{
    disclosures, match_terms, ContractBook, ContractId, DenyReason, FeeRate, KnownKeys, LedgerKeys, OwnerTerms,
    Parties, Party, RequesterTerms, Temporality, TransferDecision, TransferPayload,
};
use crate::identity::{
    create_schema, issue_credential, two_step_handshake, verify_proof, ApplicationRequest, Handshake, Holder, Issuer,
    Metadata, NodeKind, TrustList,
};
use crate::ledger::{Ledger, TxRecord};
use crate::p2p::{open, DidKind, Frame, Network};
use crate::privacy::{annulus_mean, geoind_perturb, geomask_donut, planar_laplace_cdf, GeoPoint};
use crate::transport::LinkModel;
use crate::types::{Did, NodeId, TimestampMs};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DemoReport {
    pub demo: &'static str,
    pub checks: Vec<Check>,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl DemoReport {
    fn new(demo: &'static str, header: &[&'static str]) -> Self {
        DemoReport { demo, checks: Vec::new(), header: header.to_vec(), rows: Vec::new() }
    }

    fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.to_string(), passed, detail: detail.into() });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Commits transactions through a small honest committee and returns its chain.
fn commit_all(committee: &mut Committee, txs: Vec<TxRecord>) -> Ledger {
    let at = committee.now();
    for tx in txs {
        committee.submit(tx, at);
    }
    let limit = committee.now() + 600_000;
    committee.settle(limit);
    committee.honest().next().expect("honest member").ledger().clone()
}

/// A trusted government issuer with one schema on a committee-built chain.
pub struct IdentityWorld {
    pub rng: ChaCha8Rng,
    pub committee: Committee,
    pub ledger: Ledger,
    pub trust: TrustList,
    pub gov: Issuer,
}

impl IdentityWorld {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut committee =
            Committee::new(&CommitteeConfig { active_nodes: 3, seed, ..Default::default() }).expect("valid committee");
        let gov = Issuer::generate(NodeId::new("government"), Did::from("did:bsmd:gov"), NodeKind::Government, &mut rng);
        let mut trust = TrustList::new();
        trust.trust(&gov);
        let (_, tx) = create_schema(&gov, &trust, &Ledger::new(), "org-id", &["kind", "sector"], 0).expect("trusted");
        let ledger = commit_all(&mut committee, vec![tx]);
        IdentityWorld { rng, committee, ledger, trust, gov }
    }

    /// Issues an `org-id` credential to `holder` and commits its registry entry.
    pub fn credential(&mut self, holder: &mut Holder, kind: &str, sector: &str) {
        let values = BTreeMap::from([("kind".to_string(), kind.to_string()), ("sector".into(), sector.into())]);
        let did = holder.did.clone();
        let (cred, tx) = issue_credential(
            &self.gov,
            &self.ledger,
            "org-id",
            &did,
            &holder.verifying_key(),
            &values,
            self.committee.now(),
            &mut self.rng,
        )
        .expect("schema is registered");
        holder.store(cred);
        self.ledger = commit_all(&mut self.committee, vec![tx]);
    }
}

/// An individual asks a node claiming to be a university for an application
/// proof. Without a registered credential no proof exists; a proof whose
/// disclosed attribute was edited fails verification against the registry.
pub fn spoofing(seed: u64) -> DemoReport {
    let mut r = DemoReport::new("spoofing", &["attempt", "proof_built", "proof_verified", "outcome"]);
    let mut w = IdentityWorld::new(seed);
    let individual = Did::from("did:bsmd:individual");

    let mut university = Holder::generate(Did::from("did:bsmd:university"), &mut w.rng);
    w.credential(&mut university, "university", "education");
    let mut forger = Holder::generate(Did::from("did:bsmd:forger"), &mut w.rng);
    w.credential(&mut forger, "company", "advertising");
    let spoofer = Holder::generate(Did::from("did:bsmd:spoofer"), &mut w.rng);

    let row = |r: &mut DemoReport, who: &str, built: bool, verified: bool, outcome: Handshake| {
        r.rows.push(vec![who.into(), built.to_string(), verified.to_string(), format!("{outcome:?}")]);
    };

    let req = ApplicationRequest::new(individual.clone(), &mut w.rng).claim("kind", "university");
    let (outcome, proof) = two_step_handshake(&university, &req, &w.ledger, &w.trust);
    row(&mut r, "registered university", proof.is_some(), outcome == Handshake::Connected, outcome);
    r.check("registered credential connects", outcome == Handshake::Connected, format!("{outcome:?}"));

    let req = ApplicationRequest::new(individual.clone(), &mut w.rng).claim("kind", "university");
    let (outcome, proof) = two_step_handshake(&spoofer, &req, &w.ledger, &w.trust);
    row(&mut r, "no credential", proof.is_some(), false, outcome);
    r.check(
        "no credential stops at the proof step",
        outcome == Handshake::RejectedNoProof && proof.is_none(),
        format!("{outcome:?}"),
    );

    // The forger answers the same nonce with its own credential, then edits the value.
    let req = ApplicationRequest::new(individual.clone(), &mut w.rng).claim("kind", "university");
    let (outcome, _) = two_step_handshake(&forger, &req, &w.ledger, &w.trust);
    let mut loose = req.clone();
    loose.claims.clear();
    loose.reveal.insert("kind".into());
    let forged = forger.build_proof(&loose, &w.ledger).map(|mut p| {
        if let Some(a) = p.disclosed.get_mut("kind") {
            a.value = "university".into();
        }
        p
    });
    let built = forged.is_ok();
    let verified = forged.as_ref().is_ok_and(|p| verify_proof(&req, p, &w.ledger, &w.trust));
    let step6 = if built && !verified { Handshake::RejectedMismatch } else { Handshake::Connected };
    row(&mut r, "forged attribute", built, verified, step6);
    r.check("company credential cannot prove a university claim", outcome == Handshake::RejectedNoProof, format!("{outcome:?}"));
    r.check("forged attribute is built but fails verification", built && !verified, format!("built={built} verified={verified}"));

    // Replay of the genuine proof to a different verifier fails the nonce binding.
    let req = ApplicationRequest::new(individual.clone(), &mut w.rng).claim("kind", "university");
    let genuine = university.build_proof(&req, &w.ledger).expect("registered");
    let other = ApplicationRequest::new(Did::from("did:bsmd:someone-else"), &mut w.rng).claim("kind", "university");
    let replayed = verify_proof(&other, &genuine, &w.ledger, &w.trust);
    row(&mut r, "replayed proof", true, replayed, if replayed { Handshake::Connected } else { Handshake::RejectedMismatch });
    r.check("replayed proof is rejected", !replayed, "");
    r
}

/// Parties and keys of a two-node contract, with channel DIDs registered on `net`.
pub struct Pairing {
    pub contract: ContractId,
    pub owner_did: Did,
    pub requester_did: Did,
    pub owner_key: SigningKey,
    pub requester_key: SigningKey,
}

pub fn pair(
    net: &mut Network,
    book: &mut ContractBook,
    owner: &str,
    requester: &str,
    owner_terms: OwnerTerms,
    requester_terms: RequesterTerms,
    rng: &mut (impl RngCore + rand::CryptoRng),
) -> Pairing {
    let owner_key = SigningKey::generate(rng);
    let requester_key = SigningKey::generate(rng);
    let owner_did = net.create_did(&NodeId::new(owner), DidKind::Pairwise, BTreeMap::new());
    let requester_did = net.create_did(&NodeId::new(requester), DidKind::Pairwise, BTreeMap::new());
    let outcome = match_terms(&owner_terms, &requester_terms, &KnownKeys { owner: true, requester: true });
    let parties = Parties {
        owner_public: Did(format!("did:bsmd:{owner}")),
        owner_pairwise: owner_did.clone(),
        owner_key: owner_key.verifying_key(),
        requester_public: Did(format!("did:bsmd:{requester}")),
        requester_pairwise: requester_did.clone(),
        requester_key: requester_key.verifying_key(),
    };
    let contract = book.propose(parties, owner_terms, requester_terms, None, outcome);
    Pairing { contract, owner_did, requester_did, owner_key, requester_key }
}

fn sharing_terms(start: TimestampMs, end: TimestampMs, reward: u64) -> (OwnerTerms, RequesterTerms) {
    let window = Temporality::window(start, end).expect("start before end");
    (
        OwnerTerms {
            service_requested: "none".into(),
            monetary_reward: reward,
            privacy_level: disclosures(&["geoind", "gender"]),
            temporality: window,
            extended_permissions: Default::default(),
            require_identity_key: false,
        },
        RequesterTerms {
            service_provided: "none".into(),
            monetary_reward: reward,
            accuracy: disclosures(&["geoind", "gender"]),
            temporality: window,
            extended_permissions: Default::default(),
            require_identity_key: false,
        },
    )
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// A passive observer taps every frame between two contract parties and tries
/// to read them: searching for plaintext and decrypting with its own key.
pub fn interception(seed: u64, frames: usize) -> DemoReport {
    let mut r = DemoReport::new("interception", &["frame", "payload_len", "frame_len", "plaintext_visible", "opened_by_tap"]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::new(LinkModel { base_ms: 5, jitter_ms: 20, drop_prob: 0.0 }, seed);
    net.transport_mut().enable_tap();
    let mut book = ContractBook::new();
    let (o, q) = sharing_terms(0, u64::MAX / 2, 0);
    let p = pair(&mut net, &mut book, "individual", "university", o, q, &mut rng);
    book.sign(p.contract, Party::Owner, &p.owner_key, 0).expect("accepted");
    book.sign(p.contract, Party::Requester, &p.requester_key, 0).expect("accepted");
    let ch = net.open_channel(&book, p.contract, 0).expect("active");

    let mut sent = Vec::with_capacity(frames);
    for i in 0..frames {
        let mut payload = vec![0u8; rng.gen_range(16..512)];
        rng.fill_bytes(&mut payload);
        net.send_encrypted(&book, ch, &p.owner_did, &payload, i as u64).expect("open channel");
        sent.push(payload);
    }
    net.deliver(u64::MAX);
    let mut received = Vec::new();
    while let Some(m) = net.recv(&p.requester_did) {
        received.push(m.plaintext);
    }

    let attacker = StaticSecret::random_from_rng(&mut rng);
    let (mut visible, mut opened) = (0, 0);
    for (i, env) in net.transport().tapped().iter().enumerate() {
        let pt = &sent[i];
        let seen = contains(&env.msg, pt);
        let broke = Frame::decode(&env.msg).is_ok_and(|f| open(&attacker, &f.header(), &f.body).is_ok());
        visible += seen as usize;
        opened += broke as usize;
        r.rows.push(vec![i.to_string(), pt.len().to_string(), env.msg.len().to_string(), seen.to_string(), broke.to_string()]);
    }
    let tapped = net.transport().tapped().len();
    r.check("every frame was tapped", tapped == frames, format!("{tapped}/{frames}"));
    r.check("no plaintext in captured bytes", visible == 0, format!("{visible} frames leaked"));
    r.check("tap cannot decrypt", opened == 0, format!("{opened} frames opened"));
    r.check("recipient reads every payload", received == sent, format!("{}/{frames}", received.len()));
    r
}

/// Walks two contracts through their lifecycle: one revoked by the owner's
/// DID revocation mid-window, one that simply expires.
pub fn revocation(seed: u64) -> DemoReport {
    let mut r = DemoReport::new("revocation", &["contract", "time", "phase", "decision"]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::new(LinkModel::default(), seed);
    let mut book = ContractBook::new();
    let payload = TransferPayload::new(disclosures(&["geoind"]));
    let (start, end) = (1_000, 10_000);

    let phase = |r: &mut DemoReport, book: &mut ContractBook, id, label: &str, times: &[TimestampMs]| {
        times
            .iter()
            .map(|&t| {
                let d = book.enforce_transfer(id, t, &payload);
                r.rows.push(vec![id.to_string(), t.to_string(), label.into(), format!("{d:?}")]);
                d
            })
            .collect::<Vec<_>>()
    };
    let all = |ds: &[TransferDecision], want: &TransferDecision| ds.iter().all(|d| d == want);
    let deny = |reason| TransferDecision::Deny(reason);

    let (o, q) = sharing_terms(start, end, 2);
    let a = pair(&mut net, &mut book, "individual", "university", o.clone(), q.clone(), &mut rng);
    let ds = phase(&mut r, &mut book, a.contract, "proposed", &[0, 2_000]);
    r.check("unsigned contract denies", all(&ds, &deny(DenyReason::NotActive)), "");
    book.sign(a.contract, Party::Owner, &a.owner_key, 0).expect("accepted");
    let ds = phase(&mut r, &mut book, a.contract, "owner signed", &[2_000]);
    r.check("half-signed contract denies", all(&ds, &deny(DenyReason::NotActive)), "");
    book.sign(a.contract, Party::Requester, &a.requester_key, 0).expect("accepted");
    let ds = phase(&mut r, &mut book, a.contract, "before window", &[0, 999]);
    r.check("signed contract denies before its window", all(&ds, &deny(DenyReason::NotYetOpen)), "");
    let ch = net.open_channel(&book, a.contract, start).expect("active");
    let ds = phase(&mut r, &mut book, a.contract, "active", &[1_000, 3_000, 4_999]);
    r.check("active contract allows", all(&ds, &TransferDecision::Allow), "");
    let sent = net.send_encrypted(&book, ch, &a.owner_did, b"trip", 4_999).is_ok();
    r.check("channel carries data while active", sent, "");

    let revoked = net.revoke_did(&NodeId::new("individual"), &a.owner_did, &mut book).expect("owner revokes");
    let ds = phase(&mut r, &mut book, a.contract, "revoked", &[5_000, 6_000, 9_999, 20_000]);
    r.check("revocation reaches the contract", revoked == vec![a.contract], format!("{revoked:?}"));
    r.check("revoked contract denies", all(&ds, &deny(DenyReason::Revoked)), "");
    let closed = net.send_encrypted(&book, ch, &a.owner_did, b"trip", 5_000).is_err();
    r.check("channel closed after revocation", closed, "");
    let resign = book.sign(a.contract, Party::Owner, &a.owner_key, 5_000);
    r.check("revoked contract cannot be re-signed", resign.is_err(), format!("{resign:?}"));

    let b = pair(&mut net, &mut book, "individual", "university", o, q, &mut rng);
    book.sign(b.contract, Party::Owner, &b.owner_key, 0).expect("accepted");
    book.sign(b.contract, Party::Requester, &b.requester_key, 0).expect("accepted");
    r.check("re-matching yields a new contract id", b.contract != a.contract, "");
    let ds = phase(&mut r, &mut book, b.contract, "active", &[1_000, 9_999, 10_000]);
    r.check("window is inclusive", all(&ds, &TransferDecision::Allow), "");
    let ds = phase(&mut r, &mut book, b.contract, "expired", &[10_001, 50_000]);
    r.check("expired contract denies", all(&ds, &deny(DenyReason::Expired)), "");
    let exact = book.enforce_transfer(b.contract, 5_000, &TransferPayload::new(disclosures(&["exact_location"])));
    r.check("after expiry even a disallowed payload reports expiry", exact == deny(DenyReason::Expired), format!("{exact:?}"));
    r
}

/// Samples both obfuscation mechanisms and compares them to their analytic laws.
pub fn privacy(seed: u64, samples: usize, epsilons: &[f64], inner: f64, outer: f64) -> DemoReport {
    let mut r = DemoReport::new("privacy", &["sample_id", "mechanism", "parameter", "dx", "dy", "d"]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let origin = GeoPoint { x: 0.0, y: 0.0 };
    for &eps in epsilons {
        let mut radii: Vec<f64> = (0..samples)
            .map(|i| {
                let p = geoind_perturb(origin, eps, &mut rng).expect("positive epsilon");
                let d = p.distance(&origin);
                r.rows.push(vec![i.to_string(), "geoind".into(), eps.to_string(), format!("{:.3}", p.x), format!("{:.3}", p.y), format!("{d:.3}")]);
                d
            })
            .collect();
        radii.sort_by(f64::total_cmp);
        let n = radii.len() as f64;
        let ks = radii
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = planar_laplace_cdf(eps, x);
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        r.check(&format!("geoind radius law at eps={eps}"), ks < 0.01, format!("KS distance {ks:.5}"));
    }
    let mut total = 0.0;
    let mut inside = 0usize;
    for i in 0..samples {
        let p = geomask_donut(origin, inner, outer, &mut rng).expect("valid radii");
        let d = p.distance(&origin);
        total += d;
        inside += (inner..=outer).contains(&d) as usize;
        r.rows.push(vec![i.to_string(), "geomask".into(), format!("{inner}-{outer}"), format!("{:.3}", p.x), format!("{:.3}", p.y), format!("{d:.3}")]);
    }
    let mean = total / samples as f64;
    let expected = annulus_mean(inner, outer);
    r.check("geomask stays in the annulus", inside == samples, format!("{inside}/{samples}"));
    r.check(
        "geomask mean displacement",
        ((mean - expected) / expected).abs() < 0.01,
        format!("mean {mean:.3} vs {expected:.3}"),
    );
    r
}

/// Outcome of the brokered university/individual arrangement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BrokeredOutcome {
    pub contract: ContractId,
    pub active: bool,
    pub reward: u64,
    pub transfers: u64,
    pub broker_credit: u64,
    pub owner_credit: u64,
    pub requester_debit: u64,
    pub broker_frames_received: usize,
}

/// A university recruits an individual through a broker charging `fee` of the
/// reward, then collects a day of mobility patterns per night for four months.
pub fn brokered_example(seed: u64, fee: FeeRate, reward: u64, nights: u64) -> (DemoReport, BrokeredOutcome) {
    let mut r = DemoReport::new("brokered", &["night", "decision", "owner_credit", "broker_credit"]);
    let mut w = IdentityWorld::new(seed);
    const DAY: u64 = 86_400_000;
    let (march, july) = (60 * DAY, 181 * DAY);

    let mut net = Network::new(LinkModel::default(), seed);
    net.transport_mut().enable_tap();
    let mut broker_holder = Holder::generate(Did::from("did:bsmd:broker"), &mut w.rng);
    w.credential(&mut broker_holder, "company", "brokerage");
    let mut university = Holder::generate(Did::from("did:bsmd:university"), &mut w.rng);
    w.credential(&mut university, "university", "education");
    let mut broker = Broker::new(broker_holder, fee, &mut w.rng);

    let meta = |kind, tags: &[&str]| Metadata {
        kind,
        did: Did::from(""),
        identity_key: None,
        tags: tags.iter().map(|t| t.to_string()).collect(),
    };
    let ind_public = net.create_did(&NodeId::new("individual"), DidKind::Public, metadata_doc(&meta(NodeKind::Individual, &["mobility"])));
    let uni_public = net.create_did(&NodeId::new("university"), DidKind::Public, metadata_doc(&meta(NodeKind::University, &["research"])));
    let ind_key = SigningKey::generate(&mut w.rng);
    let uni_key = SigningKey::generate(&mut w.rng);
    let mut solicited = 0;
    for c in discover(net.resolver(), &DiscoveryFilter::default()) {
        let key = if c.did == ind_public { &ind_key } else { &uni_key };
        solicited += (broker.solicit(&c, key, &w.ledger, &w.trust, &mut w.rng) == Solicitation::Accepted) as usize;
    }
    r.check("both parties accept the broker", solicited == 2 && broker.wallet().len() == 2, format!("{solicited}"));

    let owner_terms = OwnerTerms {
        service_requested: "none".into(),
        monetary_reward: reward,
        privacy_level: disclosures(&["differential_privacy", "gender"]),
        temporality: Temporality::window(march, july).expect("ordered"),
        extended_permissions: Default::default(),
        require_identity_key: true,
    };
    let requester_terms = RequesterTerms {
        service_provided: "none".into(),
        monetary_reward: reward,
        accuracy: disclosures(&["low_geo_accuracy", "gender"]),
        temporality: Temporality::window(march, march + 122 * DAY).expect("ordered"),
        extended_permissions: Default::default(),
        require_identity_key: false,
    };
    let req = ApplicationRequest::new(ind_public.clone(), &mut w.rng).claim("kind", "university");
    let proof = university.build_proof(&req, &w.ledger).expect("registered");
    let mut keys = LedgerKeys::new(&w.ledger, &w.trust);
    keys.requester_proof = Some((&req, &proof));
    let did_i = net.create_did(&NodeId::new("individual"), DidKind::Pairwise, BTreeMap::new());
    let did_n = net.create_did(&NodeId::new("university"), DidKind::Pairwise, BTreeMap::new());
    let parties = Parties {
        owner_public: ind_public.clone(),
        owner_pairwise: did_i.clone(),
        owner_key: ind_key.verifying_key(),
        requester_public: uni_public.clone(),
        requester_pairwise: did_n.clone(),
        requester_key: uni_key.verifying_key(),
    };
    let broker_verified = broker.wallet().contains(&ind_public);
    let mut book = ContractBook::new();
    let id = broker
        .arrange(&mut book, parties, owner_terms, requester_terms, broker_verified, &keys)
        .expect("terms match");
    book.sign(id, Party::Owner, &ind_key, march).expect("accepted");
    let activation = book.sign(id, Party::Requester, &uni_key, march).expect("accepted");
    let active = activation.is_some();
    if let Some(tx) = activation {
        w.ledger = commit_all(&mut w.committee, vec![tx]);
    }
    r.check("contract active and on the ledger", active && w.ledger.transactions().count() >= 4, "");

    let ch = net.open_channel(&book, id, march).expect("active");
    let payload = TransferPayload::new(disclosures(&["geoind", "gender"]));
    for night in 0..nights {
        let t = march + night * DAY + 23 * 3_600_000;
        let d = book.enforce_transfer(id, t, &payload);
        if d.is_allow() {
            let body = format!("{{\"night\":{night},\"trips\":[]}}");
            net.send_encrypted(&book, ch, &did_i, body.as_bytes(), t).expect("open channel");
        }
        let acc = book.accounts();
        r.rows.push(vec![night.to_string(), format!("{d:?}"), acc.credited(&ind_public).to_string(), acc.fees_earned(&broker.did).to_string()]);
    }
    net.deliver(u64::MAX);
    let acc = book.accounts();
    let transfers = book.get(id).expect("known").transfers();
    let outcome = BrokeredOutcome {
        contract: id,
        active,
        reward,
        transfers,
        broker_credit: broker.earned_fees(&book),
        owner_credit: acc.credited(&ind_public),
        requester_debit: acc.debited(&uni_public),
        broker_frames_received: net.transport().tapped().iter().filter(|e| e.dst == broker.did).count(),
    };
    let per = fee.split(reward);
    r.check(
        "broker collects its fee on every transfer",
        outcome.broker_credit == per.1 * transfers,
        format!("{} over {transfers} transfers", outcome.broker_credit),
    );
    r.check(
        "owner and broker split the reward exactly",
        outcome.owner_credit + outcome.broker_credit == outcome.requester_debit && outcome.requester_debit == reward * transfers,
        "",
    );
    r.check("broker never receives payload frames", outcome.broker_frames_received == 0, "");
    (r, outcome)
}
