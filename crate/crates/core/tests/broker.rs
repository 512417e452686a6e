use std::collections::{BTreeMap, BTreeSet};

use bsmd_core::broker::{discover, metadata_doc, Broker, BrokerError, DiscoveryFilter, Solicitation};
use bsmd_core::contract::{
    disclosures, ContractBook, ContractError, ExtendedPermissions, FeeRate, Gate, KnownKeys, OwnerTerms, Parties,
    Party, RequesterTerms, Temporality, TransferPayload,
};
use bsmd_core::demos::{brokered_example, IdentityWorld};
use bsmd_core::identity::{Holder, Metadata, NodeKind};
use bsmd_core::p2p::{DidKind, Network};
use bsmd_core::transport::LinkModel;
use bsmd_core::{Did, NodeId};
use ed25519_dalek::SigningKey;
use proptest::prelude::*;

fn meta(kind: NodeKind, tags: &[&str], key: Option<&str>) -> Metadata {
    Metadata {
        kind,
        did: Did::from(""),
        identity_key: key.map(str::to_string),
        tags: tags.iter().map(|t| t.to_string()).collect(),
    }
}

fn populated() -> (Network, Vec<Did>, Did) {
    let mut net = Network::new(LinkModel::default(), 1);
    let individuals = (0..3)
        .map(|i| {
            let tags: &[&str] = if i == 0 { &["mobility", "health"] } else { &["mobility"] };
            net.create_did(&NodeId(format!("ind-{i}")), DidKind::Public, metadata_doc(&meta(NodeKind::Individual, tags, None)))
        })
        .collect();
    let company = net.create_did(
        &NodeId::new("acme"),
        DidKind::Public,
        metadata_doc(&meta(NodeKind::Company, &["retail"], Some("did:bsmd:gov#acme"))),
    );
    net.create_did(&NodeId::new("ind-0"), DidKind::Pairwise, BTreeMap::new());
    (net, individuals, company)
}

#[test]
fn discovery_filters() {
    let (net, individuals, company) = populated();
    let all = discover(net.resolver(), &DiscoveryFilter::default());
    assert_eq!(all.len(), 4, "pairwise DIDs are not discoverable");
    let people = discover(net.resolver(), &DiscoveryFilter { kind: Some(NodeKind::Individual), ..Default::default() });
    let found: BTreeSet<Did> = people.iter().map(|c| c.did.clone()).collect();
    assert_eq!(found, individuals.into_iter().collect());
    let health = DiscoveryFilter { any_tag: ["health".to_string()].into(), ..Default::default() };
    assert_eq!(discover(net.resolver(), &health).len(), 1);
    let keyed = discover(net.resolver(), &DiscoveryFilter { require_identity_key: true, ..Default::default() });
    assert_eq!(keyed.iter().map(|c| &c.did).collect::<Vec<_>>(), vec![&company]);
    let nobody = DiscoveryFilter { kind: Some(NodeKind::University), ..Default::default() };
    assert!(discover(net.resolver(), &nobody).is_empty());
    assert!(discover(Network::new(LinkModel::default(), 2).resolver(), &DiscoveryFilter::default()).is_empty());
}

struct Market {
    world: IdentityWorld,
    net: Network,
    broker: Broker,
    customers: Vec<(Did, SigningKey)>,
}

fn market(credentialed_broker: bool) -> Market {
    let mut world = IdentityWorld::new(5);
    let mut holder = Holder::generate(Did::from("did:bsmd:broker"), &mut world.rng);
    if credentialed_broker {
        world.credential(&mut holder, "company", "brokerage");
    }
    let broker = Broker::new(holder, FeeRate::from_fraction(0.1).unwrap(), &mut world.rng);
    let mut net = Network::new(LinkModel::default(), 5);
    let customers = ["owner", "requester"]
        .iter()
        .map(|n| {
            let did = net.create_did(&NodeId::new(*n), DidKind::Public, metadata_doc(&meta(NodeKind::Individual, &[], None)));
            (did, SigningKey::generate(&mut world.rng))
        })
        .collect();
    Market { world, net, broker, customers }
}

fn solicit_all(m: &mut Market) -> Vec<Solicitation> {
    let candidates = discover(m.net.resolver(), &DiscoveryFilter::default());
    candidates
        .iter()
        .map(|c| {
            let key = &m.customers.iter().find(|(d, _)| *d == c.did).unwrap().1;
            m.broker.solicit(c, key, &m.world.ledger, &m.world.trust, &mut m.world.rng)
        })
        .collect()
}

#[test]
fn solicitation_requires_a_verified_broker() {
    let mut m = market(false);
    assert_eq!(solicit_all(&mut m), vec![Solicitation::Rejected; 2]);
    assert!(m.broker.wallet().is_empty());
    let mut m = market(true);
    assert_eq!(solicit_all(&mut m), vec![Solicitation::Accepted; 2]);
    assert_eq!(solicit_all(&mut m), vec![Solicitation::Accepted; 2]);
    assert_eq!(m.broker.wallet().len(), 2);
}

fn terms(owner_reward: u64, requester_reward: u64) -> (OwnerTerms, RequesterTerms) {
    let w = Temporality::window(0, 1_000_000).unwrap();
    (
        OwnerTerms {
            service_requested: "none".into(),
            monetary_reward: owner_reward,
            privacy_level: disclosures(&["geoind"]),
            temporality: w,
            extended_permissions: ExtendedPermissions::default(),
            require_identity_key: false,
        },
        RequesterTerms {
            service_provided: "none".into(),
            monetary_reward: requester_reward,
            accuracy: disclosures(&["geoind"]),
            temporality: w,
            extended_permissions: ExtendedPermissions::default(),
            require_identity_key: false,
        },
    )
}

fn parties(m: &mut Market) -> Parties {
    let did_i = m.net.create_did(&NodeId::new("owner"), DidKind::Pairwise, BTreeMap::new());
    let did_n = m.net.create_did(&NodeId::new("requester"), DidKind::Pairwise, BTreeMap::new());
    Parties {
        owner_public: m.customers[0].0.clone(),
        owner_pairwise: did_i,
        owner_key: m.customers[0].1.verifying_key(),
        requester_public: m.customers[1].0.clone(),
        requester_pairwise: did_n,
        requester_key: m.customers[1].1.verifying_key(),
    }
}

const KEYS: KnownKeys = KnownKeys { owner: true, requester: true };

#[test]
fn arrangement_refusals() {
    let mut m = market(true);
    let mut book = ContractBook::new();
    let (o, r) = terms(1, 1);
    let p = parties(&mut m);
    let stranger = p.owner_public.clone();
    assert_eq!(m.broker.arrange(&mut book, p, o.clone(), r.clone(), true, &KEYS), Err(BrokerError::NotCustomer(stranger)));
    solicit_all(&mut m);
    let p = parties(&mut m);
    assert_eq!(
        m.broker.arrange(&mut book, p, o, r, false, &KEYS),
        Err(BrokerError::Contract(ContractError::UnverifiedBroker))
    );
    let (o, r) = terms(5, 1);
    let p = parties(&mut m);
    assert_eq!(m.broker.arrange(&mut book, p, o, r, true, &KEYS), Err(BrokerError::Refused(Gate::Reward)));
    assert_eq!(book.contracts().count(), 0);
}

#[test]
fn brokered_example_pays_ten_percent() {
    let (report, out) = brokered_example(3, FeeRate::from_fraction(0.1).unwrap(), 10, 10);
    assert!(report.passed(), "{:?}", report.checks);
    assert!(out.active);
    assert_eq!(out.transfers, 10);
    assert_eq!(out.broker_credit * 10, out.reward * out.transfers);
    assert_eq!(out.broker_credit, 10);
    assert_eq!(out.owner_credit, 90);
    assert_eq!(out.requester_debit, 100);
    assert_eq!(out.broker_frames_received, 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fees_follow_the_rate(reward in 0u64..100_000, bp in 0u32..=10_000, n in 0usize..12) {
        let mut m = market(true);
        m.broker.fee = FeeRate::from_fraction(bp as f64 / 1e4).unwrap();
        solicit_all(&mut m);
        let mut book = ContractBook::new();
        let (o, r) = terms(0, reward);
        let p = parties(&mut m);
        let id = m.broker.arrange(&mut book, p, o, r, true, &KEYS).unwrap();
        book.sign(id, Party::Owner, &m.customers[0].1, 0).unwrap();
        book.sign(id, Party::Requester, &m.customers[1].1, 0).unwrap();
        for t in 0..n {
            prop_assert!(book.enforce_transfer(id, t as u64 * 10, &TransferPayload::new(disclosures(&["geoind"]))).is_allow());
        }
        let per = reward * bp as u64 / 10_000;
        prop_assert_eq!(m.broker.earned_fees(&book), per * n as u64);
        prop_assert_eq!(book.accounts().credited(&m.customers[0].0), (reward - per) * n as u64);
    }
}
