//! Broker node: finds customers through public metadata, keeps them in a
//! wallet once they accept its identity proof, and arranges contracts for a fee.

use std::collections::{BTreeMap, BTreeSet};

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::contract::{
    match_with_broker, BrokerTerms, ContractBook, ContractError, ContractId, Credits, FeeRate, Gate, KeyVerifier,
    MatchOutcome, OwnerTerms, Parties, RequesterTerms,
};
use crate::identity::{two_step_handshake, ApplicationRequest, Handshake, Holder, Metadata, NodeKind, TrustList};
use crate::ledger::Ledger;
use crate::p2p::Resolver;
use crate::types::{sha256, Did};

#[derive(Debug, Error, PartialEq)]
pub enum BrokerError {
    #[error("{0} is not a customer of this broker")]
    NotCustomer(Did),
    #[error("terms refused at the {0:?} gate")]
    Refused(Gate),
    #[error(transparent)]
    Contract(#[from] ContractError),
}

/// Flattens identification metadata into a public DID document.
pub fn metadata_doc(meta: &Metadata) -> BTreeMap<String, String> {
    let mut doc = BTreeMap::from([("kind".to_string(), meta.kind.as_str().to_string())]);
    if !meta.tags.is_empty() {
        doc.insert("tags".into(), meta.tags.iter().cloned().collect::<Vec<_>>().join(","));
    }
    if let Some(k) = &meta.identity_key {
        doc.insert("identity_key".into(), k.clone());
    }
    doc
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub did: Did,
    pub kind: String,
    pub tags: BTreeSet<String>,
    pub identity_key: Option<String>,
}

#[derive(Clone, Debug, Default)]
pub struct DiscoveryFilter {
    pub kind: Option<NodeKind>,
    /// Candidates must carry at least one of these tags (when non-empty).
    pub any_tag: BTreeSet<String>,
    pub require_identity_key: bool,
}

/// Reads only public documents; identification contents are never touched.
pub fn discover(resolver: &Resolver, filter: &DiscoveryFilter) -> Vec<Candidate> {
    resolver
        .documents()
        .map(|d| Candidate {
            did: d.did.clone(),
            kind: d.doc.get("kind").cloned().unwrap_or_default(),
            tags: d.doc.get("tags").map(|t| t.split(',').map(str::to_string).collect()).unwrap_or_default(),
            identity_key: d.doc.get("identity_key").cloned(),
        })
        .filter(|c| filter.kind.is_none_or(|k| c.kind == k.as_str()))
        .filter(|c| filter.any_tag.is_empty() || !c.tags.is_disjoint(&filter.any_tag))
        .filter(|c| !filter.require_identity_key || c.identity_key.is_some())
        .collect()
}

/// Agreement between a broker and one customer, signed by both.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CustomerAgreement {
    pub customer: Did,
    pub interests: BTreeSet<String>,
    pub broker_signature: Signature,
    pub customer_signature: Signature,
}

fn agreement_bytes(broker: &Did, customer: &Did, fee: FeeRate) -> Vec<u8> {
    let mut v = b"BSMD-BROKER".to_vec();
    v.extend_from_slice(&sha256(format!("{broker}|{customer}|{}", fee.basis_points()).as_bytes()));
    v
}

#[derive(Clone, Debug, Default)]
pub struct BrokerWallet {
    customers: BTreeMap<Did, CustomerAgreement>,
}

impl BrokerWallet {
    pub fn contains(&self, did: &Did) -> bool {
        self.customers.contains_key(did)
    }

    pub fn len(&self) -> usize {
        self.customers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.customers.is_empty()
    }

    pub fn customers(&self) -> impl Iterator<Item = &CustomerAgreement> {
        self.customers.values()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solicitation {
    Accepted,
    Rejected,
}

pub struct Broker {
    pub did: Did,
    pub fee: FeeRate,
    holder: Holder,
    key: SigningKey,
    wallet: BrokerWallet,
}

impl Broker {
    /// `holder` carries the broker's identity credentials.
    pub fn new(holder: Holder, fee: FeeRate, rng: &mut (impl RngCore + CryptoRng)) -> Self {
        Broker { did: holder.did.clone(), fee, holder, key: SigningKey::generate(rng), wallet: BrokerWallet::default() }
    }

    pub fn wallet(&self) -> &BrokerWallet {
        &self.wallet
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        self.key.verifying_key()
    }

    /// The candidate checks the broker's identity key; on success both sign
    /// the agreement and the candidate enters the wallet.
    pub fn solicit(
        &mut self,
        candidate: &Candidate,
        customer_key: &SigningKey,
        ledger: &Ledger,
        trust: &TrustList,
        rng: &mut impl RngCore,
    ) -> Solicitation {
        if self.wallet.contains(&candidate.did) {
            return Solicitation::Accepted;
        }
        let request = ApplicationRequest::new(candidate.did.clone(), rng);
        if two_step_handshake(&self.holder, &request, ledger, trust).0 != Handshake::Connected {
            return Solicitation::Rejected;
        }
        let msg = agreement_bytes(&self.did, &candidate.did, self.fee);
        let agreement = CustomerAgreement {
            customer: candidate.did.clone(),
            interests: candidate.tags.clone(),
            broker_signature: self.key.sign(&msg),
            customer_signature: customer_key.sign(&msg),
        };
        debug_assert!(customer_key.verifying_key().verify(&msg, &agreement.customer_signature).is_ok());
        self.wallet.customers.insert(candidate.did.clone(), agreement);
        Solicitation::Accepted
    }

    /// Proposes a brokered contract between two wallet customers. The broker
    /// only learns the terms; payload frames flow between the parties' pairwise DIDs.
    pub fn arrange(
        &self,
        book: &mut ContractBook,
        parties: Parties,
        owner_terms: OwnerTerms,
        requester_terms: RequesterTerms,
        broker_verified: bool,
        keys: &dyn KeyVerifier,
    ) -> Result<ContractId, BrokerError> {
        for did in [&parties.owner_public, &parties.requester_public] {
            if !self.wallet.contains(did) {
                return Err(BrokerError::NotCustomer(did.clone()));
            }
        }
        let outcome = match_with_broker(&owner_terms, &requester_terms, broker_verified, keys)?;
        if let MatchOutcome::Refuse(g) = outcome {
            return Err(BrokerError::Refused(g));
        }
        let terms = BrokerTerms { broker: self.did.clone(), fee: self.fee };
        Ok(book.propose(parties, owner_terms, requester_terms, Some(terms), outcome))
    }

    pub fn earned_fees(&self, book: &ContractBook) -> Credits {
        book.accounts().fees_earned(&self.did)
    }
}
