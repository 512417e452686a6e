use std::collections::BTreeMap;

use bsmd_core::identity::{
    connection_permitted, create_schema, issue_credential, rotate_credential, two_step_handshake, verify_proof,
    verify_proof_with, ApplicationRequest, CredentialRegistry, Handshake, Holder, Identification, Issuer, Metadata,
    NodeKind, TrustList,
};
use bsmd_core::ledger::{build_public_block, BlockSignature, Ledger, TxRecord};
use bsmd_core::{Did, NodeId};
use ed25519_dalek::SigningKey;
use proptest::prelude::*;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn commit(ledger: &mut Ledger, txs: Vec<TxRecord>) {
    let h = ledger.next_height();
    let mut b = build_public_block(txs, ledger.tip_digest(), h, h).unwrap();
    let d = b.digest();
    b.add_signature(BlockSignature::sign(&SigningKey::from_bytes(&[9; 32]), &NodeId::new("active-0"), h, 0, &d));
    ledger.append_block(b).unwrap();
}

struct World {
    rng: ChaCha8Rng,
    ledger: Ledger,
    trust: TrustList,
    gov: Issuer,
}

fn world(seed: u64) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gov = Issuer::generate("government".into(), "did:bsmd:gov".into(), NodeKind::Government, &mut rng);
    let mut trust = TrustList::new();
    trust.trust(&gov);
    let mut ledger = Ledger::new();
    let (_, tx) = create_schema(&gov, &trust, &ledger, "person", &["age_range", "gender", "kind"], 0).unwrap();
    commit(&mut ledger, vec![tx]);
    World { rng, ledger, trust, gov }
}

fn credentialed(w: &mut World, did: &str, values: &[(&str, &str)]) -> Holder {
    let mut h = Holder::generate(Did::from(did), &mut w.rng);
    let values: BTreeMap<String, String> = values.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    let hd = h.did.clone();
    let (cred, tx) = issue_credential(&w.gov, &w.ledger, "person", &hd, &h.verifying_key(), &values, 1, &mut w.rng).unwrap();
    h.store(cred);
    commit(&mut w.ledger, vec![tx]);
    h
}

#[test]
fn empty_ledger_verifies_nothing() {
    let mut w = world(1);
    let alice = credentialed(&mut w, "did:alice", &[("age_range", "30-39"), ("gender", "f"), ("kind", "individual")]);
    let req = ApplicationRequest::new("did:uni".into(), &mut w.rng).claim("kind", "individual");
    let proof = alice.build_proof(&req, &w.ledger).unwrap();
    assert!(verify_proof(&req, &proof, &w.ledger, &w.trust));
    assert!(!verify_proof(&req, &proof, &Ledger::new(), &w.trust));
    assert!(!verify_proof(&req, &proof, &w.ledger, &TrustList::new()));
}

#[test]
fn two_step_gate_connects_only_when_both_pass() {
    for (built, verified) in [(false, false), (false, true), (true, false), (true, true)] {
        assert_eq!(connection_permitted(built, verified), built && verified);
    }
}

#[test]
fn rotated_credential_supersedes_old_proofs() {
    let mut w = world(2);
    let mut alice = credentialed(&mut w, "did:alice", &[("age_range", "30-39"), ("gender", "f"), ("kind", "individual")]);
    let req = ApplicationRequest::new("did:uni".into(), &mut w.rng).claim("kind", "individual");
    let old_proof = alice.build_proof(&req, &w.ledger).unwrap();
    let old = alice.credentials()[0].clone();
    let (new, tx) = rotate_credential(&w.gov, &w.ledger, &old, 5, &mut w.rng).unwrap();
    alice.store(new);
    commit(&mut w.ledger, vec![tx]);
    assert!(!verify_proof(&req, &old_proof, &w.ledger, &w.trust));
    assert_eq!(two_step_handshake(&alice, &req, &w.ledger, &w.trust).0, Handshake::Connected);
}

#[test]
fn random_guesses_never_verify() {
    let mut w = world(3);
    let alice = credentialed(&mut w, "did:alice", &[("age_range", "30-39"), ("gender", "f"), ("kind", "individual")]);
    let registry = CredentialRegistry::from_ledger(&w.ledger);
    let req = ApplicationRequest::new("did:uni".into(), &mut w.rng).claim("kind", "individual");
    let genuine = alice.build_proof(&req, &w.ledger).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for i in 0..100_000 {
        let mut forged = genuine.clone();
        match i % 4 {
            0 => rng.fill_bytes(&mut forged.registry_digest),
            1 => rng.fill_bytes(&mut forged.holder_signature),
            2 => rng.fill_bytes(&mut forged.issuer_signature),
            _ => {
                let salt = &mut forged.disclosed.get_mut("kind").unwrap().salt;
                rng.fill_bytes(salt);
            }
        }
        assert!(!verify_proof_with(&req, &forged, &registry, &w.trust), "guess {i} verified");
    }
}

#[test]
fn identification_metadata_is_public_only() {
    let meta = Metadata {
        kind: NodeKind::Individual,
        did: "did:bsmd:alice".into(),
        identity_key: None,
        tags: ["mobility".to_string()].into(),
    };
    let statics = BTreeMap::from([("name".to_string(), "Alice".to_string()), ("birthday".into(), "1990-01-01".into())]);
    let id = Identification::new(meta, statics).unwrap();
    let back = Identification::from_json(&id.to_json()).unwrap();
    assert_eq!(back.to_json(), id.to_json());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn proofs_disclose_only_requested_attributes(
        age in "[0-9]{2}-[0-9]{2}",
        gender in "[a-z]{3,12}",
        seed in any::<u64>(),
    ) {
        let mut w = world(seed);
        let alice = credentialed(&mut w, "did:alice", &[("age_range", &age), ("gender", &gender), ("kind", "individual")]);
        let req = ApplicationRequest::new("did:uni".into(), &mut w.rng).claim("kind", "individual");
        let proof = alice.build_proof(&req, &w.ledger).unwrap();
        let json = proof.to_json();
        prop_assert!(verify_proof(&req, &proof, &w.ledger, &w.trust));
        let quoted = format!("\"{}\"", gender);
        prop_assert!(!json.contains(&quoted));
        prop_assert!(!json.contains(&age));
        prop_assert_eq!(proof.disclosed.keys().collect::<Vec<_>>(), vec!["kind"]);
    }

    #[test]
    fn altered_disclosures_fail(value in "[a-z]{1,16}", seed in any::<u64>()) {
        let mut w = world(seed);
        let alice = credentialed(&mut w, "did:alice", &[("age_range", "20-29"), ("gender", "m"), ("kind", "individual")]);
        let mut req = ApplicationRequest::new("did:uni".into(), &mut w.rng);
        req.reveal.insert("gender".into());
        let mut proof = alice.build_proof(&req, &w.ledger).unwrap();
        prop_assume!(value != "m");
        proof.disclosed.get_mut("gender").unwrap().value = value;
        prop_assert!(!verify_proof(&req, &proof, &w.ledger, &w.trust));
    }
}
