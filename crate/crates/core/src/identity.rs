//! Identification files and identity-key credentials.
//!
//! A trusted issuer publishes a schema, then issues credentials whose
//! registry entry (a digest plus issuer signature) is written to the ledger.
//! Each attribute is committed separately as `H(name | value | salt)` so a
//! holder can disclose a subset; the registry digest binds the schema,
//! issuer, holder key and all commitments.

use std::collections::{BTreeMap, BTreeSet};

use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contract::SmartContract;
use crate::ledger::{Ledger, TxKind, TxRecord};
use crate::types::{put_bytes, sha256, Did, Digest, NodeId, TimestampMs};

/// Pseudo-DID used as counterparty of schema registrations.
pub const REGISTRY_DID: &str = "did:bsmd:registry";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdentityError {
    #[error("{0} is not a trusted issuer")]
    Untrusted(NodeId),
    #[error("schema {0} already registered")]
    DuplicateSchema(String),
    #[error("schema {0} not found on the ledger")]
    UnknownSchema(String),
    #[error("attribute values do not match the schema")]
    BadAttributes,
    #[error("no ledger-registered credential satisfies the application")]
    NoProof,
    #[error("dynamic records must have non-decreasing timestamps")]
    NonMonotoneDynamic,
    #[error("metadata leaks a static or dynamic value")]
    MetadataLeak,
    #[error("access requires an active contract")]
    AccessDenied,
    #[error("identification file: {0}")]
    Format(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Individual,
    Company,
    University,
    Government,
    NonProfit,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Individual => "individual",
            NodeKind::Company => "company",
            NodeKind::University => "university",
            NodeKind::Government => "government",
            NodeKind::NonProfit => "non_profit",
        }
    }
}

/// Public part of an identification file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub kind: NodeKind,
    pub did: Did,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity_key: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub tags: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobilityRecord {
    pub timestamp: TimestampMs,
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
}

/// A node's data vault: public metadata plus consent-gated static and dynamic data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Identification {
    pub metadata: Metadata,
    #[serde(rename = "static")]
    static_data: BTreeMap<String, String>,
    #[serde(rename = "dynamic")]
    dynamic_data: Vec<MobilityRecord>,
}

impl Identification {
    pub fn new(metadata: Metadata, static_data: BTreeMap<String, String>) -> Result<Self, IdentityError> {
        let id = Identification { metadata, static_data, dynamic_data: Vec::new() };
        id.validate()?;
        Ok(id)
    }

    pub fn validate(&self) -> Result<(), IdentityError> {
        let m = &self.metadata;
        let mut public: Vec<&str> = vec![m.did.as_str()];
        public.extend(m.identity_key.as_deref());
        public.extend(m.tags.iter().map(String::as_str));
        if self.static_data.values().any(|v| !v.is_empty() && public.contains(&v.as_str())) {
            return Err(IdentityError::MetadataLeak);
        }
        if self.dynamic_data.windows(2).any(|w| w[1].timestamp < w[0].timestamp) {
            return Err(IdentityError::NonMonotoneDynamic);
        }
        Ok(())
    }

    pub fn push_dynamic(&mut self, rec: MobilityRecord) -> Result<(), IdentityError> {
        if self.dynamic_data.last().is_some_and(|last| rec.timestamp < last.timestamp) {
            return Err(IdentityError::NonMonotoneDynamic);
        }
        self.dynamic_data.push(rec);
        Ok(())
    }

    pub fn dynamic_len(&self) -> usize {
        self.dynamic_data.len()
    }

    /// Static section, readable only under an active contract with this node as owner.
    pub fn read_static(
        &self,
        contract: &SmartContract,
        now: TimestampMs,
    ) -> Result<&BTreeMap<String, String>, IdentityError> {
        self.check_access(contract, now)?;
        Ok(&self.static_data)
    }

    pub fn read_dynamic(&self, contract: &SmartContract, now: TimestampMs) -> Result<&[MobilityRecord], IdentityError> {
        self.check_access(contract, now)?;
        Ok(&self.dynamic_data)
    }

    fn check_access(&self, contract: &SmartContract, now: TimestampMs) -> Result<(), IdentityError> {
        if contract.owner_public == self.metadata.did && contract.is_active_at(now) {
            Ok(())
        } else {
            Err(IdentityError::AccessDenied)
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("identification serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, IdentityError> {
        let id: Identification = serde_json::from_str(text).map_err(|e| IdentityError::Format(e.to_string()))?;
        id.validate()?;
        Ok(id)
    }
}

/// Trusted issuers and their registered verifying keys.
#[derive(Clone, Debug, Default)]
pub struct TrustList {
    keys: BTreeMap<NodeId, [u8; 32]>,
}

impl TrustList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn trust(&mut self, issuer: &Issuer) {
        self.keys.insert(issuer.node.clone(), issuer.public_key());
    }

    pub fn key_of(&self, node: &NodeId) -> Option<&[u8; 32]> {
        self.keys.get(node)
    }

    pub fn contains(&self, node: &NodeId) -> bool {
        self.keys.contains_key(node)
    }
}

pub struct Issuer {
    pub node: NodeId,
    pub did: Did,
    pub kind: NodeKind,
    key: SigningKey,
}

impl Issuer {
    pub fn new(node: NodeId, did: Did, kind: NodeKind, key: SigningKey) -> Self {
        Issuer { node, did, kind, key }
    }

    pub fn generate(node: NodeId, did: Did, kind: NodeKind, rng: &mut (impl RngCore + CryptoRng)) -> Self {
        Self::new(node, did, kind, SigningKey::generate(rng))
    }

    pub fn public_key(&self) -> [u8; 32] {
        self.key.verifying_key().to_bytes()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CredentialSchema {
    pub schema_id: String,
    pub issuer: NodeId,
    pub attributes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "registry", rename_all = "snake_case")]
enum RegistryEntry {
    Schema { schema_id: String, issuer: NodeId, attributes: Vec<String> },
    Credential {
        schema_id: String,
        issuer: NodeId,
        digest: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        supersedes: Option<String>,
        signature: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct CredentialEntry {
    schema_id: String,
    issuer: NodeId,
    signature: [u8; 64],
    supersedes: Option<Digest>,
}

/// Index of schema and credential registrations found in public ledger transactions.
#[derive(Clone, Debug, Default)]
pub struct CredentialRegistry {
    schemas: BTreeMap<String, CredentialSchema>,
    credentials: BTreeMap<Digest, CredentialEntry>,
    successors: BTreeMap<Digest, Vec<Digest>>,
}

impl CredentialRegistry {
    pub fn from_ledger(ledger: &Ledger) -> Self {
        let mut reg = CredentialRegistry::default();
        for (_, tx) in ledger.transactions() {
            if tx.kind != TxKind::Public {
                continue;
            }
            let Some(entry) = tx.payload.as_deref().and_then(|p| serde_json::from_slice::<RegistryEntry>(p).ok()) else {
                continue;
            };
            match entry {
                RegistryEntry::Schema { schema_id, issuer, attributes } => {
                    reg.schemas.entry(schema_id.clone()).or_insert(CredentialSchema { schema_id, issuer, attributes });
                }
                RegistryEntry::Credential { schema_id, issuer, digest, supersedes, signature } => {
                    let (Some(digest), Some(signature)) = (decode_hex::<32>(&digest), decode_hex::<64>(&signature)) else {
                        continue;
                    };
                    let supersedes = match supersedes.map(|s| decode_hex::<32>(&s)) {
                        Some(None) => continue,
                        Some(Some(d)) => Some(d),
                        None => None,
                    };
                    reg.credentials.entry(digest).or_insert(CredentialEntry { schema_id, issuer, signature, supersedes });
                }
            }
        }
        for (digest, e) in &reg.credentials {
            if let Some(old) = e.supersedes {
                reg.successors.entry(old).or_default().push(*digest);
            }
        }
        reg
    }

    pub fn schema(&self, schema_id: &str) -> Option<&CredentialSchema> {
        self.schemas.get(schema_id)
    }

    pub fn is_registered(&self, digest: &Digest) -> bool {
        self.credentials.contains_key(digest)
    }

    /// Registered and not retired by any rotation entry (holder-side view).
    pub fn is_current(&self, digest: &Digest) -> bool {
        self.is_registered(digest) && !self.successors.contains_key(digest)
    }

    /// Retired by a rotation entry that the same trusted issuer signed.
    fn is_retired(&self, digest: &Digest, trust: &TrustList) -> bool {
        let Some(old) = self.credentials.get(digest) else {
            return false;
        };
        let Some(key) = trust.key_of(&old.issuer).and_then(|k| VerifyingKey::from_bytes(k).ok()) else {
            return false;
        };
        self.successors.get(digest).into_iter().flatten().any(|new| {
            let e = &self.credentials[new];
            e.issuer == old.issuer
                && e.schema_id == old.schema_id
                && key.verify_strict(&registry_message(new, Some(digest)), &Signature::from_bytes(&e.signature)).is_ok()
        })
    }
}

fn decode_hex<const N: usize>(s: &str) -> Option<[u8; N]> {
    hex::decode(s).ok()?.try_into().ok()
}

fn attribute_commitment(name: &str, value: &str, salt: &[u8; 16]) -> Digest {
    let mut buf = b"BSMD-ATTR".to_vec();
    put_bytes(&mut buf, name.as_bytes());
    put_bytes(&mut buf, value.as_bytes());
    buf.extend_from_slice(salt);
    sha256(&buf)
}

fn credential_digest(
    schema_id: &str,
    issuer: &NodeId,
    holder: &Did,
    holder_key: &[u8; 32],
    commitments: &BTreeMap<String, Digest>,
) -> Digest {
    let mut buf = b"BSMD-CRED".to_vec();
    put_bytes(&mut buf, schema_id.as_bytes());
    put_bytes(&mut buf, issuer.as_str().as_bytes());
    put_bytes(&mut buf, holder.as_str().as_bytes());
    buf.extend_from_slice(holder_key);
    buf.extend_from_slice(&(commitments.len() as u32).to_be_bytes());
    for (name, c) in commitments {
        put_bytes(&mut buf, name.as_bytes());
        buf.extend_from_slice(c);
    }
    sha256(&buf)
}

fn registry_message(digest: &Digest, supersedes: Option<&Digest>) -> Vec<u8> {
    let mut msg = b"BSMD-REG".to_vec();
    msg.extend_from_slice(digest);
    msg.extend_from_slice(supersedes.unwrap_or(&[0u8; 32]));
    msg
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeValue {
    pub value: String,
    pub salt: [u8; 16],
}

/// Credential held in the holder's wallet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Credential {
    pub schema_id: String,
    pub issuer: NodeId,
    pub holder: Did,
    pub holder_key: [u8; 32],
    pub attributes: BTreeMap<String, AttributeValue>,
    pub supersedes: Option<Digest>,
    pub issuer_signature: [u8; 64],
    pub registry_digest: Digest,
}

impl Credential {
    fn commitments(&self) -> BTreeMap<String, Digest> {
        self.attributes.iter().map(|(n, a)| (n.clone(), attribute_commitment(n, &a.value, &a.salt))).collect()
    }

    pub fn value(&self, name: &str) -> Option<&str> {
        self.attributes.get(name).map(|a| a.value.as_str())
    }

    /// Public transaction carrying the registry entry for this credential.
    pub fn registry_tx(&self, issuer_did: &Did, timestamp: TimestampMs) -> TxRecord {
        let entry = RegistryEntry::Credential {
            schema_id: self.schema_id.clone(),
            issuer: self.issuer.clone(),
            digest: hex::encode(self.registry_digest),
            supersedes: self.supersedes.map(hex::encode),
            signature: hex::encode(self.issuer_signature),
        };
        let payload = serde_json::to_vec(&entry).expect("registry entry serializes");
        TxRecord::public(timestamp, self.holder.clone(), issuer_did.clone(), None, payload)
            .expect("registry tx is well-formed")
    }
}

/// Creates a schema; the returned public transaction must be committed before issuing.
pub fn create_schema(
    issuer: &Issuer,
    trust: &TrustList,
    ledger: &Ledger,
    schema_id: &str,
    attributes: &[&str],
    timestamp: TimestampMs,
) -> Result<(CredentialSchema, TxRecord), IdentityError> {
    if trust.key_of(&issuer.node) != Some(&issuer.public_key()) {
        return Err(IdentityError::Untrusted(issuer.node.clone()));
    }
    if CredentialRegistry::from_ledger(ledger).schema(schema_id).is_some() {
        return Err(IdentityError::DuplicateSchema(schema_id.to_string()));
    }
    let mut attrs: Vec<String> = attributes.iter().map(|a| a.to_string()).collect();
    attrs.sort();
    attrs.dedup();
    let schema = CredentialSchema { schema_id: schema_id.to_string(), issuer: issuer.node.clone(), attributes: attrs };
    let entry = RegistryEntry::Schema {
        schema_id: schema.schema_id.clone(),
        issuer: schema.issuer.clone(),
        attributes: schema.attributes.clone(),
    };
    let payload = serde_json::to_vec(&entry).expect("schema serializes");
    let tx = TxRecord::public(timestamp, Did::from(REGISTRY_DID), issuer.did.clone(), None, payload)
        .map_err(|_| IdentityError::Format("issuer DID collides with registry".into()))?;
    Ok((schema, tx))
}

/// Issues a credential. Commit the returned registry transaction before any proof will verify.
pub fn issue_credential(
    issuer: &Issuer,
    ledger: &Ledger,
    schema_id: &str,
    holder: &Did,
    holder_key: &VerifyingKey,
    values: &BTreeMap<String, String>,
    timestamp: TimestampMs,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<(Credential, TxRecord), IdentityError> {
    issue_inner(issuer, ledger, schema_id, holder, holder_key.to_bytes(), values, None, timestamp, rng)
}

/// Re-issues with fresh salts; the new registry entry retires the old one.
pub fn rotate_credential(
    issuer: &Issuer,
    ledger: &Ledger,
    old: &Credential,
    timestamp: TimestampMs,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<(Credential, TxRecord), IdentityError> {
    let values = old.attributes.iter().map(|(k, v)| (k.clone(), v.value.clone())).collect();
    issue_inner(
        issuer,
        ledger,
        &old.schema_id,
        &old.holder,
        old.holder_key,
        &values,
        Some(old.registry_digest),
        timestamp,
        rng,
    )
}

#[allow(clippy::too_many_arguments)]
fn issue_inner(
    issuer: &Issuer,
    ledger: &Ledger,
    schema_id: &str,
    holder: &Did,
    holder_key: [u8; 32],
    values: &BTreeMap<String, String>,
    supersedes: Option<Digest>,
    timestamp: TimestampMs,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<(Credential, TxRecord), IdentityError> {
    let registry = CredentialRegistry::from_ledger(ledger);
    let schema = registry.schema(schema_id).ok_or_else(|| IdentityError::UnknownSchema(schema_id.to_string()))?;
    if schema.issuer != issuer.node {
        return Err(IdentityError::Untrusted(issuer.node.clone()));
    }
    if !values.keys().eq(schema.attributes.iter()) {
        return Err(IdentityError::BadAttributes);
    }
    let attributes: BTreeMap<String, AttributeValue> = values
        .iter()
        .map(|(k, v)| {
            let mut salt = [0u8; 16];
            rng.fill_bytes(&mut salt);
            (k.clone(), AttributeValue { value: v.clone(), salt })
        })
        .collect();
    let mut cred = Credential {
        schema_id: schema_id.to_string(),
        issuer: issuer.node.clone(),
        holder: holder.clone(),
        holder_key,
        attributes,
        supersedes,
        issuer_signature: [0u8; 64],
        registry_digest: [0u8; 32],
    };
    cred.registry_digest = credential_digest(schema_id, &cred.issuer, holder, &holder_key, &cred.commitments());
    cred.issuer_signature = issuer.key.sign(&registry_message(&cred.registry_digest, supersedes.as_ref())).to_bytes();
    let tx = cred.registry_tx(&issuer.did, timestamp);
    Ok((cred, tx))
}

/// Credential wallet of a node that has to prove claims.
pub struct Holder {
    pub did: Did,
    key: SigningKey,
    credentials: Vec<Credential>,
}

impl Holder {
    pub fn new(did: Did, key: SigningKey) -> Self {
        Holder { did, key, credentials: Vec::new() }
    }

    pub fn generate(did: Did, rng: &mut (impl RngCore + CryptoRng)) -> Self {
        Self::new(did, SigningKey::generate(rng))
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        self.key.verifying_key()
    }

    pub fn store(&mut self, cred: Credential) {
        self.credentials.push(cred);
    }

    pub fn credentials(&self) -> &[Credential] {
        &self.credentials
    }

    /// Fills a sharing application with a ledger-registered credential.
    pub fn build_proof(&self, request: &ApplicationRequest, ledger: &Ledger) -> Result<ProofApplication, IdentityError> {
        let registry = CredentialRegistry::from_ledger(ledger);
        let cred = self
            .credentials
            .iter()
            .rev()
            .filter(|c| c.holder == self.did)
            .filter(|c| request.schema_id.as_ref().is_none_or(|s| *s == c.schema_id))
            .filter(|c| request.claims.iter().all(|(k, v)| c.value(k) == Some(v.as_str())))
            .filter(|c| request.reveal.iter().all(|k| c.attributes.contains_key(k)))
            .find(|c| registry.is_current(&c.registry_digest))
            .ok_or(IdentityError::NoProof)?;

        let wanted: BTreeSet<&String> = request.claims.keys().chain(request.reveal.iter()).collect();
        let mut disclosed = BTreeMap::new();
        let mut hidden = BTreeMap::new();
        for (name, attr) in &cred.attributes {
            if wanted.contains(name) {
                disclosed.insert(name.clone(), attr.clone());
            } else {
                hidden.insert(name.clone(), attribute_commitment(name, &attr.value, &attr.salt));
            }
        }
        let mut proof = ProofApplication {
            schema_id: cred.schema_id.clone(),
            issuer: cred.issuer.clone(),
            holder: cred.holder.clone(),
            holder_key: cred.holder_key,
            disclosed,
            hidden,
            registry_digest: cred.registry_digest,
            supersedes: cred.supersedes,
            issuer_signature: cred.issuer_signature,
            nonce: request.nonce,
            holder_signature: [0u8; 64],
        };
        proof.holder_signature = self.key.sign(&proof.binding_message(&request.verifier)).to_bytes();
        Ok(proof)
    }
}

/// Sharing application sent by the verifying node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApplicationRequest {
    pub verifier: Did,
    pub nonce: [u8; 16],
    pub schema_id: Option<String>,
    /// Attributes that must be disclosed with exactly these values.
    pub claims: BTreeMap<String, String>,
    /// Attributes to disclose without a value constraint.
    pub reveal: BTreeSet<String>,
}

impl ApplicationRequest {
    pub fn new(verifier: Did, rng: &mut impl RngCore) -> Self {
        let mut nonce = [0u8; 16];
        rng.fill_bytes(&mut nonce);
        ApplicationRequest { verifier, nonce, schema_id: None, claims: BTreeMap::new(), reveal: BTreeSet::new() }
    }

    pub fn claim(mut self, name: &str, value: &str) -> Self {
        self.claims.insert(name.to_string(), value.to_string());
        self
    }

    pub fn with_schema(mut self, schema_id: &str) -> Self {
        self.schema_id = Some(schema_id.to_string());
        self
    }
}

/// Filled application: disclosed attributes are opened, the rest stay as commitments.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofApplication {
    pub schema_id: String,
    pub issuer: NodeId,
    pub holder: Did,
    pub holder_key: [u8; 32],
    pub disclosed: BTreeMap<String, AttributeValue>,
    pub hidden: BTreeMap<String, Digest>,
    pub registry_digest: Digest,
    pub supersedes: Option<Digest>,
    #[serde(with = "sig_hex")]
    pub issuer_signature: [u8; 64],
    pub nonce: [u8; 16],
    #[serde(with = "sig_hex")]
    pub holder_signature: [u8; 64],
}

mod sig_hex {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8; 64], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 64], D::Error> {
        let s = String::deserialize(d)?;
        super::decode_hex::<64>(&s).ok_or_else(|| serde::de::Error::custom("bad signature hex"))
    }
}

impl ProofApplication {
    fn binding_message(&self, verifier: &Did) -> Vec<u8> {
        let mut msg = b"BSMD-PROOF".to_vec();
        msg.extend_from_slice(&self.nonce);
        put_bytes(&mut msg, verifier.as_str().as_bytes());
        msg.extend_from_slice(&self.registry_digest);
        for (name, a) in &self.disclosed {
            put_bytes(&mut msg, name.as_bytes());
            put_bytes(&mut msg, a.value.as_bytes());
        }
        msg
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("proof serializes")
    }
}

/// Checks a proof against the ledger registry and the trust list.
pub fn verify_proof(request: &ApplicationRequest, proof: &ProofApplication, ledger: &Ledger, trust: &TrustList) -> bool {
    verify_proof_with(request, proof, &CredentialRegistry::from_ledger(ledger), trust)
}

pub fn verify_proof_with(
    request: &ApplicationRequest,
    proof: &ProofApplication,
    registry: &CredentialRegistry,
    trust: &TrustList,
) -> bool {
    if proof.nonce != request.nonce {
        return false;
    }
    if request.schema_id.as_ref().is_some_and(|s| *s != proof.schema_id) {
        return false;
    }
    if !request.claims.iter().all(|(k, v)| proof.disclosed.get(k).is_some_and(|a| a.value == *v)) {
        return false;
    }
    if !request.reveal.iter().all(|k| proof.disclosed.contains_key(k)) {
        return false;
    }
    let Some(schema) = registry.schema(&proof.schema_id) else {
        return false;
    };
    if schema.issuer != proof.issuer {
        return false;
    }
    let Some(issuer_key) = trust.key_of(&proof.issuer).and_then(|k| VerifyingKey::from_bytes(k).ok()) else {
        return false;
    };

    let mut commitments = proof.hidden.clone();
    for (name, a) in &proof.disclosed {
        if commitments.insert(name.clone(), attribute_commitment(name, &a.value, &a.salt)).is_some() {
            return false;
        }
    }
    if !commitments.keys().eq(schema.attributes.iter()) {
        return false;
    }
    let digest = credential_digest(&proof.schema_id, &proof.issuer, &proof.holder, &proof.holder_key, &commitments);
    if digest != proof.registry_digest || !registry.is_registered(&digest) || registry.is_retired(&digest, trust) {
        return false;
    }
    let entry = &registry.credentials[&digest];
    if entry.issuer != proof.issuer || entry.schema_id != proof.schema_id || entry.supersedes != proof.supersedes {
        return false;
    }
    let reg_msg = registry_message(&digest, entry.supersedes.as_ref());
    if proof.issuer_signature != entry.signature
        || issuer_key.verify_strict(&reg_msg, &Signature::from_bytes(&proof.issuer_signature)).is_err()
    {
        return false;
    }
    let Ok(holder_key) = VerifyingKey::from_bytes(&proof.holder_key) else {
        return false;
    };
    holder_key
        .verify_strict(&proof.binding_message(&request.verifier), &Signature::from_bytes(&proof.holder_signature))
        .is_ok()
}

/// Outcome of the two-step identity check performed before a connection opens.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Handshake {
    Connected,
    /// The requester could not obtain an application proof from the ledger.
    RejectedNoProof,
    /// The verifier compared the application with the registry and it did not match.
    RejectedMismatch,
}

/// Only a built proof that also verifies opens a connection.
pub fn connection_permitted(proof_built: bool, verified: bool) -> bool {
    proof_built && verified
}

pub fn two_step_handshake(
    holder: &Holder,
    request: &ApplicationRequest,
    ledger: &Ledger,
    trust: &TrustList,
) -> (Handshake, Option<ProofApplication>) {
    match holder.build_proof(request, ledger) {
        Err(_) => (Handshake::RejectedNoProof, None),
        Ok(proof) => {
            let ok = verify_proof(request, &proof, ledger, trust);
            let outcome = if connection_permitted(true, ok) { Handshake::Connected } else { Handshake::RejectedMismatch };
            (outcome, Some(proof))
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::ledger::{build_public_block, BlockSignature};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Appends public txs as a block signed by a single test validator.
    pub(crate) fn commit(ledger: &mut Ledger, txs: Vec<TxRecord>) {
        let h = ledger.next_height();
        let mut b = build_public_block(txs, ledger.tip_digest(), h, h * 10).unwrap();
        let key = SigningKey::from_bytes(&[42; 32]);
        let d = b.digest();
        b.add_signature(BlockSignature::sign(&key, &NodeId::new("active-0"), h, 0, &d));
        ledger.append_block(b).unwrap();
    }

    pub(crate) struct World {
        pub rng: ChaCha8Rng,
        pub ledger: Ledger,
        pub trust: TrustList,
        pub gov: Issuer,
        pub university: Holder,
    }

    pub(crate) fn world() -> World {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let gov = Issuer::generate("government".into(), "did:bsmd:gov".into(), NodeKind::Government, &mut rng);
        let mut trust = TrustList::new();
        trust.trust(&gov);
        let mut ledger = Ledger::new();
        let (_, tx) = create_schema(&gov, &trust, &ledger, "org-id", &["kind", "sector"], 1).unwrap();
        commit(&mut ledger, vec![tx]);
        let mut university = Holder::generate("did:bsmd:uni".into(), &mut rng);
        let values = BTreeMap::from([("kind".into(), "university".into()), ("sector".into(), "education".into())]);
        let (cred, tx) =
            issue_credential(&gov, &ledger, "org-id", &university.did.clone(), &university.verifying_key(), &values, 2, &mut rng)
                .unwrap();
        university.store(cred);
        commit(&mut ledger, vec![tx]);
        World { rng, ledger, trust, gov, university }
    }

    #[test]
    fn schema_rules() {
        let mut w = world();
        assert!(CredentialRegistry::from_ledger(&w.ledger).schema("org-id").is_some());
        let err = create_schema(&w.gov, &w.trust, &w.ledger, "org-id", &["kind"], 3).unwrap_err();
        assert_eq!(err, IdentityError::DuplicateSchema("org-id".into()));
        let individual = Issuer::generate("alice".into(), "did:bsmd:alice".into(), NodeKind::Individual, &mut w.rng);
        let err = create_schema(&individual, &w.trust, &w.ledger, "fake", &["kind"], 3).unwrap_err();
        assert_eq!(err, IdentityError::Untrusted("alice".into()));
    }

    #[test]
    fn unknown_schema_rejected() {
        let mut w = world();
        let vals = BTreeMap::from([("kind".into(), "university".into())]);
        let vk = w.university.verifying_key();
        let err = issue_credential(&w.gov, &w.ledger, "nope", &w.university.did, &vk, &vals, 3, &mut w.rng).unwrap_err();
        assert_eq!(err, IdentityError::UnknownSchema("nope".into()));
    }

    #[test]
    fn valid_proof_connects() {
        let mut w = world();
        let req = ApplicationRequest::new("did:bsmd:alice".into(), &mut w.rng).claim("kind", "university");
        let proof = w.university.build_proof(&req, &w.ledger).unwrap();
        assert!(verify_proof(&req, &proof, &w.ledger, &w.trust));
        assert_eq!(two_step_handshake(&w.university, &req, &w.ledger, &w.trust).0, Handshake::Connected);
        // Only the requested attribute is opened.
        assert!(proof.disclosed.contains_key("kind"));
        assert!(!proof.to_json().contains("education"));
    }

    #[test]
    fn proofless_node_rejected_at_step_five() {
        let mut w = world();
        let spoofer = Holder::generate("did:bsmd:spoof".into(), &mut w.rng);
        let req = ApplicationRequest::new("did:bsmd:alice".into(), &mut w.rng).claim("kind", "university");
        assert_eq!(spoofer.build_proof(&req, &w.ledger), Err(IdentityError::NoProof));
        assert_eq!(two_step_handshake(&spoofer, &req, &w.ledger, &w.trust).0, Handshake::RejectedNoProof);
    }

    #[test]
    fn unregistered_credential_yields_no_proof() {
        let mut w = world();
        let mut holder = Holder::generate("did:bsmd:company".into(), &mut w.rng);
        let vals = BTreeMap::from([("kind".into(), "company".into()), ("sector".into(), "transport".into())]);
        let (cred, _tx_never_committed) =
            issue_credential(&w.gov, &w.ledger, "org-id", &holder.did.clone(), &holder.verifying_key(), &vals, 3, &mut w.rng)
                .unwrap();
        holder.store(cred);
        let req = ApplicationRequest::new("did:bsmd:alice".into(), &mut w.rng).claim("kind", "company");
        assert_eq!(holder.build_proof(&req, &w.ledger), Err(IdentityError::NoProof));
    }

    #[test]
    fn altered_attribute_fails_verification() {
        let mut w = world();
        let req = ApplicationRequest::new("did:bsmd:alice".into(), &mut w.rng).claim("kind", "university");
        let mut proof = w.university.build_proof(&req, &w.ledger).unwrap();
        proof.disclosed.get_mut("kind").unwrap().value = "government".into();
        let req2 = ApplicationRequest { claims: BTreeMap::from([("kind".into(), "government".into())]), ..req };
        assert!(!verify_proof(&req2, &proof, &w.ledger, &w.trust));
        assert!(!verify_proof(&req2, &proof, &Ledger::new(), &w.trust));
    }

    #[test]
    fn two_credentials_verify_independently() {
        let mut w = world();
        let vals = BTreeMap::from([("kind".into(), "university".into()), ("sector".into(), "research".into())]);
        let (c2, tx) =
            issue_credential(&w.gov, &w.ledger, "org-id", &w.university.did.clone(), &w.university.verifying_key(), &vals, 5, &mut w.rng)
                .unwrap();
        w.university.store(c2);
        commit(&mut w.ledger, vec![tx]);
        for sector in ["education", "research"] {
            let req = ApplicationRequest::new("did:v".into(), &mut w.rng).claim("sector", sector);
            let p = w.university.build_proof(&req, &w.ledger).unwrap();
            assert!(verify_proof(&req, &p, &w.ledger, &w.trust), "{sector}");
        }
    }

    #[test]
    fn replayed_proof_fails_on_new_nonce() {
        let mut w = world();
        let req = ApplicationRequest::new("did:v".into(), &mut w.rng).claim("kind", "university");
        let proof = w.university.build_proof(&req, &w.ledger).unwrap();
        let req2 = ApplicationRequest::new("did:v".into(), &mut w.rng).claim("kind", "university");
        assert!(!verify_proof(&req2, &proof, &w.ledger, &w.trust));
    }

    #[test]
    fn rotation_retires_old_entry() {
        let mut w = world();
        let old = w.university.credentials()[0].clone();
        let req = ApplicationRequest::new("did:v".into(), &mut w.rng).claim("kind", "university");
        let old_proof = w.university.build_proof(&req, &w.ledger).unwrap();
        let (new, tx) = rotate_credential(&w.gov, &w.ledger, &old, 9, &mut w.rng).unwrap();
        commit(&mut w.ledger, vec![tx]);
        w.university.store(new);
        assert!(!verify_proof(&req, &old_proof, &w.ledger, &w.trust));
        let fresh = w.university.build_proof(&req, &w.ledger).unwrap();
        assert!(verify_proof(&req, &fresh, &w.ledger, &w.trust));
    }

    #[test]
    fn gate_truth_table() {
        for built in [false, true] {
            for verified in [false, true] {
                assert_eq!(connection_permitted(built, verified), built && verified);
            }
        }
    }

    #[test]
    fn identification_json_layout() {
        let meta = Metadata {
            kind: NodeKind::Individual,
            did: "did:bsmd:alice".into(),
            identity_key: None,
            tags: BTreeSet::from(["mobility".to_string()]),
        };
        let mut id = Identification::new(meta, BTreeMap::from([("name".into(), "Alice".into())])).unwrap();
        id.push_dynamic(MobilityRecord { timestamp: 5, x: 1.0, y: 2.0, mode: Some("bike".into()) }).unwrap();
        assert_eq!(
            id.push_dynamic(MobilityRecord { timestamp: 4, x: 0.0, y: 0.0, mode: None }),
            Err(IdentityError::NonMonotoneDynamic)
        );
        let json = id.to_json();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(v.get("metadata").is_some() && v.get("static").is_some() && v.get("dynamic").is_some());
        assert!(!v["metadata"].to_string().contains("Alice"));
        assert_eq!(Identification::from_json(&json).unwrap(), id);
    }

    #[test]
    fn metadata_must_not_leak() {
        let meta = Metadata { kind: NodeKind::Individual, did: "did:x".into(), identity_key: None, tags: BTreeSet::from(["Alice".to_string()]) };
        assert_eq!(
            Identification::new(meta, BTreeMap::from([("name".into(), "Alice".into())])),
            Err(IdentityError::MetadataLeak)
        );
    }
}
