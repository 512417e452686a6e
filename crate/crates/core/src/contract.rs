//! Owner/requester terms, the gate-ordered matching procedure, brokered fee
//! routing and the contract lifecycle (proposed -> active -> expired | revoked).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identity::{verify_proof_with, ApplicationRequest, CredentialRegistry, ProofApplication, TrustList};
use crate::ledger::{Ledger, TxRecord};
use crate::types::{sha256, Did, TimestampMs};

pub type ContractId = u64;
/// Ledger-internal currency units.
pub type Credits = u64;

#[derive(Debug, Error, PartialEq)]
pub enum ContractError {
    #[error("broker identity key did not verify")]
    UnverifiedBroker,
    #[error("contract terms were not accepted")]
    NotMatched,
    #[error("signing key does not belong to the {0:?}")]
    WrongKey(Party),
    #[error("contract {0} is revoked")]
    Revoked(ContractId),
    #[error("{0} is not a party to the contract")]
    NotParty(Did),
    #[error("fee fraction must lie in [0, 1], got {0}")]
    BadFee(f64),
    #[error("time window start must precede its end")]
    BadWindow,
    #[error("unknown contract {0}")]
    Unknown(ContractId),
    #[error("unknown disclosure {0:?}")]
    UnknownDisclosure(String),
}

/// One item a party may disclose. Location items name the accuracy level.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Disclosure {
    ExactLocation,
    /// Perturbed location, "low geographic accuracy".
    GeoInd,
    /// Donut-masked location.
    Geomask,
    Attribute(String),
}

impl FromStr for Disclosure {
    type Err = ContractError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        Ok(match norm.as_str() {
            "exact_location" | "raw_location" | "exact_coordinates" => Disclosure::ExactLocation,
            "geoind" | "low_geo_accuracy" | "low_geographic_accuracy" | "differential_privacy" => Disclosure::GeoInd,
            "geomask" | "donut" => Disclosure::Geomask,
            "" => return Err(ContractError::UnknownDisclosure(s.to_string())),
            other => Disclosure::Attribute(other.to_string()),
        })
    }
}

impl fmt::Display for Disclosure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Disclosure::ExactLocation => f.write_str("exact_location"),
            Disclosure::GeoInd => f.write_str("geoind"),
            Disclosure::Geomask => f.write_str("geomask"),
            Disclosure::Attribute(a) => f.write_str(a),
        }
    }
}

impl Serialize for Disclosure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Disclosure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn disclosures(items: &[&str]) -> BTreeSet<Disclosure> {
    items.iter().map(|s| s.parse().expect("non-empty disclosure")).collect()
}

/// Sharing period. `one_time` limits the contract to a single transfer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Temporality {
    pub start: TimestampMs,
    pub end: TimestampMs,
    #[serde(default)]
    pub one_time: bool,
}

impl Temporality {
    pub fn window(start: TimestampMs, end: TimestampMs) -> Result<Self, ContractError> {
        if start >= end {
            return Err(ContractError::BadWindow);
        }
        Ok(Temporality { start, end, one_time: false })
    }

    pub fn one_time(start: TimestampMs, end: TimestampMs) -> Result<Self, ContractError> {
        Ok(Temporality { one_time: true, ..Self::window(start, end)? })
    }

    /// Non-strict containment of `self` in `other`.
    pub fn within(&self, other: &Temporality) -> bool {
        other.start <= self.start && self.end <= other.end && (self.one_time || !other.one_time)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtendedPermissions {
    #[serde(default)]
    pub redistribute: bool,
    #[serde(default)]
    pub whitelist: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OwnerTerms {
    pub service_requested: String,
    pub monetary_reward: Credits,
    #[serde(rename = "level_of_privacy")]
    pub privacy_level: BTreeSet<Disclosure>,
    pub temporality: Temporality,
    #[serde(default)]
    pub extended_permissions: ExtendedPermissions,
    #[serde(rename = "identity_key")]
    pub require_identity_key: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequesterTerms {
    pub service_provided: String,
    pub monetary_reward: Credits,
    #[serde(rename = "accuracy_of_information")]
    pub accuracy: BTreeSet<Disclosure>,
    pub temporality: Temporality,
    #[serde(default)]
    pub extended_permissions: ExtendedPermissions,
    #[serde(rename = "identity_key")]
    pub require_identity_key: bool,
}

/// Matching gates in evaluation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    Service,
    Reward,
    Privacy,
    Temporality,
    IdentityKey,
}

impl Gate {
    pub const ALL: [Gate; 5] = [Gate::Service, Gate::Reward, Gate::Privacy, Gate::Temporality, Gate::IdentityKey];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchOutcome {
    Accept,
    Refuse(Gate),
}

impl MatchOutcome {
    pub fn is_accept(self) -> bool {
        self == MatchOutcome::Accept
    }
}

/// Answers whether each side's identity key verified.
pub trait KeyVerifier {
    fn requester_verified(&self) -> bool;
    fn owner_verified(&self) -> bool;
}

/// Fixed answers, for callers that checked keys elsewhere.
#[derive(Clone, Copy, Debug, Default)]
pub struct KnownKeys {
    pub owner: bool,
    pub requester: bool,
}

impl KeyVerifier for KnownKeys {
    fn requester_verified(&self) -> bool {
        self.requester
    }

    fn owner_verified(&self) -> bool {
        self.owner
    }
}

/// Verifies submitted application proofs against the ledger registry.
pub struct LedgerKeys<'a> {
    registry: CredentialRegistry,
    trust: &'a TrustList,
    pub owner_proof: Option<(&'a ApplicationRequest, &'a ProofApplication)>,
    pub requester_proof: Option<(&'a ApplicationRequest, &'a ProofApplication)>,
}

impl<'a> LedgerKeys<'a> {
    pub fn new(ledger: &Ledger, trust: &'a TrustList) -> Self {
        LedgerKeys { registry: CredentialRegistry::from_ledger(ledger), trust, owner_proof: None, requester_proof: None }
    }

    fn check(&self, p: Option<(&ApplicationRequest, &ProofApplication)>) -> bool {
        p.is_some_and(|(req, proof)| verify_proof_with(req, proof, &self.registry, self.trust))
    }
}

impl KeyVerifier for LedgerKeys<'_> {
    fn requester_verified(&self) -> bool {
        self.check(self.requester_proof)
    }

    fn owner_verified(&self) -> bool {
        self.check(self.owner_proof)
    }
}

/// Evaluates the gates in order and reports the first one that fails.
pub fn match_terms(owner: &OwnerTerms, requester: &RequesterTerms, keys: &dyn KeyVerifier) -> MatchOutcome {
    if owner.service_requested != requester.service_provided {
        return MatchOutcome::Refuse(Gate::Service);
    }
    if owner.monetary_reward > requester.monetary_reward {
        return MatchOutcome::Refuse(Gate::Reward);
    }
    if !owner.privacy_level.is_subset(&requester.accuracy) {
        return MatchOutcome::Refuse(Gate::Privacy);
    }
    if !owner.temporality.within(&requester.temporality) {
        return MatchOutcome::Refuse(Gate::Temporality);
    }
    let requester_ok = !owner.require_identity_key || keys.requester_verified();
    let owner_ok = !requester.require_identity_key || keys.owner_verified();
    if !(requester_ok && owner_ok) {
        return MatchOutcome::Refuse(Gate::IdentityKey);
    }
    MatchOutcome::Accept
}

/// Broker fee in basis points of the requester's reward.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeeRate(u32);

impl FeeRate {
    pub const ZERO: FeeRate = FeeRate(0);

    pub fn from_fraction(f: f64) -> Result<Self, ContractError> {
        if !(0.0..=1.0).contains(&f) {
            return Err(ContractError::BadFee(f));
        }
        Ok(FeeRate((f * 10_000.0).round() as u32))
    }

    pub fn basis_points(self) -> u32 {
        self.0
    }

    pub fn fraction(self) -> f64 {
        self.0 as f64 / 10_000.0
    }

    /// Splits an amount into (owner share, broker share); shares always sum to `amount`.
    pub fn split(self, amount: Credits) -> (Credits, Credits) {
        let fee = (amount as u128 * self.0 as u128 / 10_000) as Credits;
        (amount - fee, fee)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrokerTerms {
    pub broker: Did,
    pub fee: FeeRate,
}

/// Brokered matching: the broker's key is checked before the parties' gates.
pub fn match_with_broker(
    owner: &OwnerTerms,
    requester: &RequesterTerms,
    broker_verified: bool,
    keys: &dyn KeyVerifier,
) -> Result<MatchOutcome, ContractError> {
    if !broker_verified {
        return Err(ContractError::UnverifiedBroker);
    }
    Ok(match_terms(owner, requester, keys))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractStatus {
    Proposed,
    Active,
    Expired,
    Revoked,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Party {
    Owner,
    Requester,
    Broker,
}

/// Identities and keys of the two parties. Pairwise DIDs are what reach the ledger.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Parties {
    pub owner_public: Did,
    pub owner_pairwise: Did,
    pub owner_key: VerifyingKey,
    pub requester_public: Did,
    pub requester_pairwise: Did,
    pub requester_key: VerifyingKey,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DenyReason {
    NotActive,
    NotYetOpen,
    Expired,
    Revoked,
    Privacy,
    Exhausted,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TransferDecision {
    Allow,
    Deny(DenyReason),
}

impl TransferDecision {
    pub fn is_allow(&self) -> bool {
        *self == TransferDecision::Allow
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmartContract {
    pub id: ContractId,
    pub owner_public: Did,
    pub requester_public: Did,
    /// DID_I: the owner's pairwise identifier for this contract.
    pub owner_did: Did,
    /// DID_N: the requester's pairwise identifier for this contract.
    pub requester_did: Did,
    owner_key: VerifyingKey,
    requester_key: VerifyingKey,
    pub owner_terms: OwnerTerms,
    pub requester_terms: RequesterTerms,
    pub broker: Option<BrokerTerms>,
    pub outcome: MatchOutcome,
    owner_signature: Option<Signature>,
    requester_signature: Option<Signature>,
    status: ContractStatus,
    transfers: u64,
}

impl SmartContract {
    pub fn status(&self) -> ContractStatus {
        self.status
    }

    pub fn status_at(&self, now: TimestampMs) -> ContractStatus {
        match self.status {
            ContractStatus::Active if now > self.end() => ContractStatus::Expired,
            s => s,
        }
    }

    pub fn start(&self) -> TimestampMs {
        self.owner_terms.temporality.start.max(self.requester_terms.temporality.start)
    }

    pub fn end(&self) -> TimestampMs {
        self.owner_terms.temporality.end.min(self.requester_terms.temporality.end)
    }

    pub fn is_active_at(&self, now: TimestampMs) -> bool {
        self.status_at(now) == ContractStatus::Active && now >= self.start()
    }

    pub fn is_signed_by(&self, party: Party) -> bool {
        match party {
            Party::Owner => self.owner_signature.is_some(),
            Party::Requester => self.requester_signature.is_some(),
            Party::Broker => self.broker.is_some(),
        }
    }

    pub fn transfers(&self) -> u64 {
        self.transfers
    }

    /// Bytes both parties sign.
    pub fn signing_bytes(&self) -> Vec<u8> {
        #[derive(Serialize)]
        struct Body<'a> {
            id: ContractId,
            owner: &'a Did,
            requester: &'a Did,
            owner_did: &'a Did,
            requester_did: &'a Did,
            owner_terms: &'a OwnerTerms,
            requester_terms: &'a RequesterTerms,
            broker: &'a Option<BrokerTerms>,
        }
        let body = Body {
            id: self.id,
            owner: &self.owner_public,
            requester: &self.requester_public,
            owner_did: &self.owner_did,
            requester_did: &self.requester_did,
            owner_terms: &self.owner_terms,
            requester_terms: &self.requester_terms,
            broker: &self.broker,
        };
        let mut out = b"BSMD-CONTRACT".to_vec();
        out.extend_from_slice(&sha256(&serde_json::to_vec(&body).expect("contract serializes")));
        out
    }

    fn activation_tx(&self, now: TimestampMs) -> TxRecord {
        TxRecord::private(
            now,
            self.requester_did.clone(),
            self.owner_did.clone(),
            self.broker.as_ref().map(|b| b.broker.clone()),
        )
        .expect("pairwise DIDs are distinct")
    }

    /// Private ledger record of one data transfer under this contract.
    pub fn transfer_tx(&self, now: TimestampMs) -> TxRecord {
        self.activation_tx(now)
    }

    fn involves(&self, did: &Did) -> bool {
        [&self.owner_public, &self.owner_did, &self.requester_public, &self.requester_did].contains(&did)
    }
}

/// Payload descriptor checked against the owner's disclosure set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransferPayload {
    pub disclosures: BTreeSet<Disclosure>,
}

impl TransferPayload {
    pub fn new(disclosures: BTreeSet<Disclosure>) -> Self {
        TransferPayload { disclosures }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Reward,
    BrokerFee,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardEntry {
    pub contract: ContractId,
    pub at: TimestampMs,
    pub payer: Did,
    pub payee: Did,
    pub amount: Credits,
    pub kind: EntryKind,
}

/// Ledger-internal reward accounting.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RewardLedger {
    entries: Vec<RewardEntry>,
    credited: BTreeMap<Did, Credits>,
    debited: BTreeMap<Did, Credits>,
}

impl RewardLedger {
    fn record(&mut self, e: RewardEntry) {
        *self.credited.entry(e.payee.clone()).or_default() += e.amount;
        *self.debited.entry(e.payer.clone()).or_default() += e.amount;
        self.entries.push(e);
    }

    pub fn entries(&self) -> &[RewardEntry] {
        &self.entries
    }

    pub fn credited(&self, did: &Did) -> Credits {
        self.credited.get(did).copied().unwrap_or(0)
    }

    pub fn debited(&self, did: &Did) -> Credits {
        self.debited.get(did).copied().unwrap_or(0)
    }

    pub fn fees_earned(&self, broker: &Did) -> Credits {
        self.entries.iter().filter(|e| e.kind == EntryKind::BrokerFee && e.payee == *broker).map(|e| e.amount).sum()
    }
}

/// Registry of contracts plus the reward accounting they drive.
#[derive(Clone, Debug, Default)]
pub struct ContractBook {
    next_id: ContractId,
    contracts: BTreeMap<ContractId, SmartContract>,
    accounts: RewardLedger,
}

impl ContractBook {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a proposal with its (already evaluated) match outcome; ids are never reused.
    pub fn propose(
        &mut self,
        parties: Parties,
        owner_terms: OwnerTerms,
        requester_terms: RequesterTerms,
        broker: Option<BrokerTerms>,
        outcome: MatchOutcome,
    ) -> ContractId {
        let id = self.next_id;
        self.next_id += 1;
        let c = SmartContract {
            id,
            owner_public: parties.owner_public,
            requester_public: parties.requester_public,
            owner_did: parties.owner_pairwise,
            requester_did: parties.requester_pairwise,
            owner_key: parties.owner_key,
            requester_key: parties.requester_key,
            owner_terms,
            requester_terms,
            broker,
            outcome,
            owner_signature: None,
            requester_signature: None,
            status: ContractStatus::Proposed,
            transfers: 0,
        };
        self.contracts.insert(id, c);
        id
    }

    pub fn get(&self, id: ContractId) -> Option<&SmartContract> {
        self.contracts.get(&id)
    }

    pub fn contracts(&self) -> impl Iterator<Item = &SmartContract> {
        self.contracts.values()
    }

    pub fn accounts(&self) -> &RewardLedger {
        &self.accounts
    }

    fn contract_mut(&mut self, id: ContractId) -> Result<&mut SmartContract, ContractError> {
        self.contracts.get_mut(&id).ok_or(ContractError::Unknown(id))
    }

    /// Records a party signature. Returns the activation record once both parties signed.
    pub fn sign(
        &mut self,
        id: ContractId,
        party: Party,
        key: &SigningKey,
        now: TimestampMs,
    ) -> Result<Option<TxRecord>, ContractError> {
        let c = self.contract_mut(id)?;
        if !c.outcome.is_accept() {
            return Err(ContractError::NotMatched);
        }
        if c.status == ContractStatus::Revoked {
            return Err(ContractError::Revoked(id));
        }
        let expected = match party {
            Party::Owner => &c.owner_key,
            Party::Requester => &c.requester_key,
            Party::Broker => return Err(ContractError::WrongKey(party)),
        };
        if key.verifying_key() != *expected {
            return Err(ContractError::WrongKey(party));
        }
        let sig = key.sign(&c.signing_bytes());
        match party {
            Party::Owner => c.owner_signature = Some(sig),
            _ => c.requester_signature = Some(sig),
        }
        if c.status == ContractStatus::Proposed && c.owner_signature.is_some() && c.requester_signature.is_some() {
            let msg = c.signing_bytes();
            let valid = [(&c.owner_key, &c.owner_signature), (&c.requester_key, &c.requester_signature)]
                .iter()
                .all(|(k, s)| s.is_some_and(|s| k.verify_strict(&msg, &s).is_ok()));
            if valid {
                c.status = ContractStatus::Active;
                return Ok(Some(c.activation_tx(now)));
            }
        }
        Ok(None)
    }

    /// Gatekeeper for every data transfer; allowed transfers settle the reward.
    pub fn enforce_transfer(&mut self, id: ContractId, now: TimestampMs, payload: &TransferPayload) -> TransferDecision {
        let Ok(c) = self.contract_mut(id) else {
            return TransferDecision::Deny(DenyReason::NotActive);
        };
        let decision = match c.status_at(now) {
            ContractStatus::Proposed => TransferDecision::Deny(DenyReason::NotActive),
            ContractStatus::Revoked => TransferDecision::Deny(DenyReason::Revoked),
            ContractStatus::Expired => {
                c.status = ContractStatus::Expired;
                TransferDecision::Deny(DenyReason::Expired)
            }
            ContractStatus::Active if now < c.start() => TransferDecision::Deny(DenyReason::NotYetOpen),
            ContractStatus::Active if !payload.disclosures.is_subset(&c.owner_terms.privacy_level) => {
                TransferDecision::Deny(DenyReason::Privacy)
            }
            ContractStatus::Active
                if c.transfers >= 1 && (c.owner_terms.temporality.one_time || c.requester_terms.temporality.one_time) =>
            {
                TransferDecision::Deny(DenyReason::Exhausted)
            }
            ContractStatus::Active => TransferDecision::Allow,
        };
        if decision.is_allow() {
            c.transfers += 1;
            let amount = c.requester_terms.monetary_reward;
            let (owner_share, broker_share) = c.broker.as_ref().map_or((amount, 0), |b| b.fee.split(amount));
            let mut entries = vec![RewardEntry {
                contract: id,
                at: now,
                payer: c.requester_public.clone(),
                payee: c.owner_public.clone(),
                amount: owner_share,
                kind: EntryKind::Reward,
            }];
            if let Some(b) = &c.broker {
                entries.push(RewardEntry {
                    contract: id,
                    at: now,
                    payer: c.requester_public.clone(),
                    payee: b.broker.clone(),
                    amount: broker_share,
                    kind: EntryKind::BrokerFee,
                });
            }
            for e in entries {
                self.accounts.record(e);
            }
        }
        decision
    }

    /// Terminal and idempotent.
    pub fn revoke(&mut self, id: ContractId, party: &Did) -> Result<(), ContractError> {
        let c = self.contract_mut(id)?;
        if !c.involves(party) {
            return Err(ContractError::NotParty(party.clone()));
        }
        c.status = ContractStatus::Revoked;
        Ok(())
    }

    /// Contracts in which `did` appears as a pairwise identifier.
    pub fn by_pairwise(&self, did: &Did) -> Vec<ContractId> {
        self.contracts.values().filter(|c| c.owner_did == *did || c.requester_did == *did).map(|c| c.id).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const DAY: u64 = 86_400_000;

    fn restaurant_terms() -> (OwnerTerms, RequesterTerms) {
        let once = Temporality::one_time(0, DAY).unwrap();
        (
            OwnerTerms {
                service_requested: "nearby_restaurants".into(),
                monetary_reward: 0,
                privacy_level: disclosures(&["geoind", "age_range"]),
                temporality: once,
                extended_permissions: ExtendedPermissions::default(),
                require_identity_key: true,
            },
            RequesterTerms {
                service_provided: "nearby_restaurants".into(),
                monetary_reward: 0,
                accuracy: disclosures(&["low_geo_accuracy", "age_range"]),
                temporality: once,
                extended_permissions: ExtendedPermissions::default(),
                require_identity_key: true,
            },
        )
    }

    const BOTH: KnownKeys = KnownKeys { owner: true, requester: true };

    #[test]
    fn restaurant_example_accepts() {
        let (o, r) = restaurant_terms();
        assert_eq!(match_terms(&o, &r, &BOTH), MatchOutcome::Accept);
    }

    #[test]
    fn first_gates_refuse() {
        let (o, mut r) = restaurant_terms();
        r.service_provided = "transit".into();
        assert_eq!(match_terms(&o, &r, &BOTH), MatchOutcome::Refuse(Gate::Service));
        let (mut o, mut r) = restaurant_terms();
        o.monetary_reward = 5;
        r.monetary_reward = 3;
        assert_eq!(match_terms(&o, &r, &BOTH), MatchOutcome::Refuse(Gate::Reward));
    }

    #[test]
    fn march_to_june_inside_four_months() {
        let (mut o, mut r) = restaurant_terms();
        let march = 59 * DAY;
        o.temporality = Temporality::window(march, march + 122 * DAY).unwrap();
        r.temporality = Temporality::window(march - 2 * DAY, march + 124 * DAY).unwrap();
        assert_eq!(match_terms(&o, &r, &BOTH), MatchOutcome::Accept);
        r.temporality = Temporality::window(march + DAY, march + 124 * DAY).unwrap();
        assert_eq!(match_terms(&o, &r, &BOTH), MatchOutcome::Refuse(Gate::Temporality));
    }

    #[test]
    fn identity_gate_checks_the_right_side() {
        let (o, mut r) = restaurant_terms();
        r.require_identity_key = false;
        let only_requester = KnownKeys { owner: false, requester: true };
        assert_eq!(match_terms(&o, &r, &only_requester), MatchOutcome::Accept);
        let only_owner = KnownKeys { owner: true, requester: false };
        assert_eq!(match_terms(&o, &r, &only_owner), MatchOutcome::Refuse(Gate::IdentityKey));
    }

    #[test]
    fn fee_split_conserves() {
        let fee = FeeRate::from_fraction(0.10).unwrap();
        assert_eq!(fee.split(10), (9, 1));
        assert_eq!(FeeRate::ZERO.split(10), (10, 0));
        assert!(FeeRate::from_fraction(1.5).is_err());
        assert!(FeeRate::from_fraction(-0.1).is_err());
    }

    #[test]
    fn broker_without_key_is_rejected() {
        let (o, r) = restaurant_terms();
        assert_eq!(match_with_broker(&o, &r, false, &BOTH), Err(ContractError::UnverifiedBroker));
        assert_eq!(match_with_broker(&o, &r, true, &BOTH), Ok(match_terms(&o, &r, &BOTH)));
    }

    struct Fixture {
        book: ContractBook,
        owner_key: SigningKey,
        requester_key: SigningKey,
        parties: Parties,
    }

    fn fixture() -> Fixture {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let owner_key = SigningKey::generate(&mut rng);
        let requester_key = SigningKey::generate(&mut rng);
        let parties = Parties {
            owner_public: "did:p:alice".into(),
            owner_pairwise: "did:i:alice-1".into(),
            owner_key: owner_key.verifying_key(),
            requester_public: "did:p:uni".into(),
            requester_pairwise: "did:i:uni-1".into(),
            requester_key: requester_key.verifying_key(),
        };
        Fixture { book: ContractBook::new(), owner_key, requester_key, parties }
    }

    fn windowed_terms(reward: Credits) -> (OwnerTerms, RequesterTerms) {
        let (mut o, mut r) = restaurant_terms();
        o.temporality = Temporality::window(100, 1000).unwrap();
        r.temporality = Temporality::window(0, 2000).unwrap();
        r.monetary_reward = reward;
        (o, r)
    }

    #[test]
    fn signing_lifecycle() {
        let mut f = fixture();
        let (o, r) = windowed_terms(10);
        let out = match_terms(&o, &r, &BOTH);
        let id = f.book.propose(f.parties.clone(), o, r, None, out);
        assert_eq!(f.book.sign(id, Party::Owner, &f.owner_key, 100).unwrap(), None);
        assert_eq!(f.book.get(id).unwrap().status(), ContractStatus::Proposed);
        assert_eq!(
            f.book.sign(id, Party::Requester, &f.owner_key, 100),
            Err(ContractError::WrongKey(Party::Requester))
        );
        let tx = f.book.sign(id, Party::Requester, &f.requester_key, 101).unwrap().unwrap();
        assert_eq!(tx.did_requester.as_str(), "did:i:uni-1");
        assert_eq!(tx.did_sender.as_str(), "did:i:alice-1");
        assert_eq!(f.book.get(id).unwrap().status(), ContractStatus::Active);
    }

    #[test]
    fn refused_match_cannot_be_signed() {
        let mut f = fixture();
        let (o, mut r) = windowed_terms(0);
        r.service_provided = "other".into();
        let out = match_terms(&o, &r, &BOTH);
        let id = f.book.propose(f.parties.clone(), o, r, None, out);
        assert_eq!(f.book.sign(id, Party::Owner, &f.owner_key, 0), Err(ContractError::NotMatched));
    }

    fn active(f: &mut Fixture, broker: Option<BrokerTerms>, reward: Credits) -> ContractId {
        let (o, r) = windowed_terms(reward);
        let out = match_terms(&o, &r, &BOTH);
        let id = f.book.propose(f.parties.clone(), o, r, broker, out);
        f.book.sign(id, Party::Owner, &f.owner_key, 0).unwrap();
        f.book.sign(id, Party::Requester, &f.requester_key, 0).unwrap();
        id
    }

    #[test]
    fn transfers_follow_window_and_privacy() {
        let mut f = fixture();
        let id = active(&mut f, None, 0);
        let ok = TransferPayload::new(disclosures(&["geoind"]));
        assert_eq!(f.book.enforce_transfer(id, 50, &ok), TransferDecision::Deny(DenyReason::NotYetOpen));
        let exact = TransferPayload::new(disclosures(&["exact_location"]));
        assert_eq!(f.book.enforce_transfer(id, 500, &exact), TransferDecision::Deny(DenyReason::Privacy));
        assert_eq!(f.book.enforce_transfer(id, 500, &ok), TransferDecision::Allow);
        assert_eq!(f.book.enforce_transfer(id, 1000, &ok), TransferDecision::Allow);
        assert_eq!(f.book.enforce_transfer(id, 1001, &ok), TransferDecision::Deny(DenyReason::Expired));
        assert_eq!(f.book.get(id).unwrap().status(), ContractStatus::Expired);
    }

    #[test]
    fn revoke_is_terminal_and_idempotent() {
        let mut f = fixture();
        let id = active(&mut f, None, 0);
        let ok = TransferPayload::new(disclosures(&["geoind"]));
        assert!(f.book.enforce_transfer(id, 200, &ok).is_allow());
        f.book.revoke(id, &"did:p:alice".into()).unwrap();
        f.book.revoke(id, &"did:p:alice".into()).unwrap();
        assert_eq!(f.book.enforce_transfer(id, 300, &ok), TransferDecision::Deny(DenyReason::Revoked));
        assert_eq!(f.book.revoke(id, &"did:p:mallory".into()), Err(ContractError::NotParty("did:p:mallory".into())));
        assert_eq!(f.book.sign(id, Party::Owner, &f.owner_key, 300), Err(ContractError::Revoked(id)));
        let again = active(&mut f, None, 0);
        assert_ne!(again, id);
        assert!(f.book.enforce_transfer(again, 300, &ok).is_allow());
    }

    #[test]
    fn one_time_contract_allows_a_single_transfer() {
        let mut f = fixture();
        let (o, r) = restaurant_terms();
        let id = f.book.propose(f.parties.clone(), o, r, None, MatchOutcome::Accept);
        f.book.sign(id, Party::Owner, &f.owner_key, 0).unwrap();
        f.book.sign(id, Party::Requester, &f.requester_key, 0).unwrap();
        let p = TransferPayload::new(disclosures(&["geoind", "age_range"]));
        assert!(f.book.enforce_transfer(id, 10, &p).is_allow());
        assert_eq!(f.book.enforce_transfer(id, 11, &p), TransferDecision::Deny(DenyReason::Exhausted));
    }

    #[test]
    fn brokered_transfer_splits_reward() {
        let mut f = fixture();
        let broker = BrokerTerms { broker: "did:p:broker".into(), fee: FeeRate::from_fraction(0.10).unwrap() };
        let id = active(&mut f, Some(broker), 10);
        let p = TransferPayload::new(disclosures(&["geoind"]));
        assert!(f.book.enforce_transfer(id, 200, &p).is_allow());
        let acc = f.book.accounts();
        assert_eq!(acc.credited(&"did:p:broker".into()), 1);
        assert_eq!(acc.credited(&"did:p:alice".into()), 9);
        assert_eq!(acc.debited(&"did:p:uni".into()), 10);
        assert_eq!(acc.fees_earned(&"did:p:broker".into()), 1);
    }

    #[test]
    fn terms_roundtrip_with_long_field_names() {
        let (o, r) = restaurant_terms();
        let js = serde_json::to_value(&o).unwrap();
        for k in ["service_requested", "monetary_reward", "level_of_privacy", "temporality", "extended_permissions", "identity_key"] {
            assert!(js.get(k).is_some(), "{k}");
        }
        let js = serde_json::to_value(&r).unwrap();
        assert!(js.get("accuracy_of_information").is_some());
        assert_eq!(serde_json::from_value::<RequesterTerms>(js).unwrap(), r);
    }
}
