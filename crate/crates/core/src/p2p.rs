//! Self-created DIDs, a local resolver for public DIDs, and encrypted
//! per-contract channels over [`SimTransport`].
//!
//! Frame layout (all integers big-endian):
//!
//! ```text
//! u32 len | sender DID_i
//! u32 len | receiver DID_i
//! u64     | contract id
//! u32 len | body = ephemeral x25519 public key (32) | nonce (12) | ciphertext+tag
//! ```
//!
//! The header bytes are bound as associated data.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use hkdf::Hkdf;
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::Sha256;
use thiserror::Error;
use x25519_dalek::{PublicKey, StaticSecret};

use crate::contract::{ContractBook, ContractId};
use crate::transport::{LinkModel, SimTransport, TransportStats};
use crate::types::{put_bytes, sha256, Did, NodeId, TimestampMs};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum P2pError {
    #[error("contract {0} is not active")]
    InactiveContract(ContractId),
    #[error("channel is closed")]
    ChannelClosed,
    #[error("message dropped by the link")]
    Dropped,
    #[error("{node} does not own {did}")]
    NotOwner { node: NodeId, did: Did },
    #[error("unknown DID {0}")]
    UnknownDid(Did),
    #[error("pairwise DID {0} is already bound to a connection")]
    DidReused(Did),
    #[error("{0} is not a pairwise DID")]
    NotPairwise(Did),
    #[error("{0} is not an endpoint of the channel")]
    NotOnChannel(Did),
    #[error("malformed frame")]
    Frame,
    #[error("decryption failed")]
    Decrypt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DidKind {
    /// DID_p: resolvable, carries a non-personal document.
    Public,
    /// DID_i: one per connection, known only to the two peers.
    Pairwise,
}

/// Resolvable part of a public DID.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DidDocument {
    pub did: Did,
    pub public_key: [u8; 32],
    pub endpoint: String,
    pub doc: BTreeMap<String, String>,
}

pub struct DidRecord {
    pub did: Did,
    pub kind: DidKind,
    pub owner: NodeId,
    pub public_key: PublicKey,
    secret: Option<StaticSecret>,
    pub endpoint: String,
    pub doc: BTreeMap<String, String>,
}

impl DidRecord {
    pub fn is_revoked(&self) -> bool {
        self.secret.is_none()
    }
}

/// Identifier derived from the public key; no registry involved.
pub fn did_for_key(key: &PublicKey) -> Did {
    Did(format!("did:bsmd:{}", hex::encode(&sha256(key.as_bytes())[..16])))
}

#[derive(Default)]
pub struct Resolver {
    docs: BTreeMap<Did, DidDocument>,
}

impl Resolver {
    pub fn resolve(&self, did: &Did) -> Option<&DidDocument> {
        self.docs.get(did)
    }

    pub fn documents(&self) -> impl Iterator<Item = &DidDocument> {
        self.docs.values()
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

fn derive_key(shared: &[u8; 32], eph: &[u8; 32], recipient: &[u8; 32]) -> [u8; 32] {
    let mut salt = [0u8; 64];
    salt[..32].copy_from_slice(eph);
    salt[32..].copy_from_slice(recipient);
    let hk = Hkdf::<Sha256>::new(Some(&salt), shared);
    let mut okm = [0u8; 32];
    hk.expand(b"bsmd channel v1", &mut okm).expect("32 bytes is a valid length");
    okm
}

/// Encrypts to `recipient` with a fresh ephemeral key.
pub fn seal<R: RngCore + CryptoRng>(recipient: &PublicKey, aad: &[u8], plaintext: &[u8], rng: &mut R) -> Vec<u8> {
    let eph = StaticSecret::random_from_rng(&mut *rng);
    let eph_pub = PublicKey::from(&eph);
    let shared = eph.diffie_hellman(recipient);
    let key = derive_key(shared.as_bytes(), eph_pub.as_bytes(), recipient.as_bytes());
    let mut nonce = [0u8; 12];
    rng.fill_bytes(&mut nonce);
    let ct = ChaCha20Poly1305::new(Key::from_slice(&key))
        .encrypt(Nonce::from_slice(&nonce), Payload { msg: plaintext, aad })
        .expect("encryption does not fail for in-memory buffers");
    let mut body = Vec::with_capacity(44 + ct.len());
    body.extend_from_slice(eph_pub.as_bytes());
    body.extend_from_slice(&nonce);
    body.extend_from_slice(&ct);
    body
}

pub fn open(secret: &StaticSecret, aad: &[u8], body: &[u8]) -> Result<Vec<u8>, P2pError> {
    if body.len() < 44 + 16 {
        return Err(P2pError::Frame);
    }
    let eph: [u8; 32] = body[..32].try_into().expect("length checked");
    let eph_pub = PublicKey::from(eph);
    let shared = secret.diffie_hellman(&eph_pub);
    let key = derive_key(shared.as_bytes(), &eph, PublicKey::from(secret).as_bytes());
    ChaCha20Poly1305::new(Key::from_slice(&key))
        .decrypt(Nonce::from_slice(&body[32..44]), Payload { msg: &body[44..], aad })
        .map_err(|_| P2pError::Decrypt)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub sender: Did,
    pub receiver: Did,
    pub contract_id: ContractId,
    pub body: Vec<u8>,
}

impl Frame {
    pub fn header(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_bytes(&mut out, self.sender.as_str().as_bytes());
        put_bytes(&mut out, self.receiver.as_str().as_bytes());
        out.extend_from_slice(&self.contract_id.to_be_bytes());
        out
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.header();
        put_bytes(&mut out, &self.body);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Frame, P2pError> {
        let mut cur = Cursor(bytes);
        let sender = cur.did()?;
        let receiver = cur.did()?;
        let contract_id = u64::from_be_bytes(cur.take(8)?.try_into().expect("8 bytes"));
        let body = cur.field()?.to_vec();
        if !cur.0.is_empty() {
            return Err(P2pError::Frame);
        }
        Ok(Frame { sender, receiver, contract_id, body })
    }
}

struct Cursor<'a>(&'a [u8]);

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], P2pError> {
        if self.0.len() < n {
            return Err(P2pError::Frame);
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    fn field(&mut self) -> Result<&'a [u8], P2pError> {
        let len = u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize;
        self.take(len)
    }

    fn did(&mut self) -> Result<Did, P2pError> {
        let raw = self.field()?;
        std::str::from_utf8(raw).map(|s| Did(s.to_string())).map_err(|_| P2pError::Frame)
    }
}

pub type ChannelId = u64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Channel {
    pub id: ChannelId,
    /// Owner-side DID_i.
    pub owner_did: Did,
    /// Requester-side DID_i.
    pub requester_did: Did,
    pub contract_id: ContractId,
    pub open: bool,
}

impl Channel {
    fn peer_of(&self, did: &Did) -> Option<&Did> {
        if *did == self.owner_did {
            Some(&self.requester_did)
        } else if *did == self.requester_did {
            Some(&self.owner_did)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Received {
    pub from: Did,
    pub contract_id: ContractId,
    pub plaintext: Vec<u8>,
    pub sent_at: TimestampMs,
    pub delivered_at: TimestampMs,
}

/// All nodes' DIDs, the resolver and the channels between them.
pub struct Network {
    rng: ChaCha8Rng,
    records: BTreeMap<Did, DidRecord>,
    resolver: Resolver,
    channels: BTreeMap<ChannelId, Channel>,
    bound: BTreeSet<Did>,
    transport: SimTransport<Did, Vec<u8>>,
    inbox: BTreeMap<Did, VecDeque<Received>>,
    undecryptable: u64,
}

impl Network {
    pub fn new(link: LinkModel, seed: u64) -> Self {
        Network {
            rng: ChaCha8Rng::seed_from_u64(seed),
            records: BTreeMap::new(),
            resolver: Resolver::default(),
            channels: BTreeMap::new(),
            bound: BTreeSet::new(),
            transport: SimTransport::new(link, seed ^ 0x7472_616e),
            inbox: BTreeMap::new(),
            undecryptable: 0,
        }
    }

    pub fn resolver(&self) -> &Resolver {
        &self.resolver
    }

    pub fn record(&self, did: &Did) -> Option<&DidRecord> {
        self.records.get(did)
    }

    pub fn transport(&self) -> &SimTransport<Did, Vec<u8>> {
        &self.transport
    }

    pub fn transport_mut(&mut self) -> &mut SimTransport<Did, Vec<u8>> {
        &mut self.transport
    }

    pub fn stats(&self) -> TransportStats {
        self.transport.stats()
    }

    pub fn undecryptable(&self) -> u64 {
        self.undecryptable
    }

    pub fn create_did(&mut self, node: &NodeId, kind: DidKind, doc: BTreeMap<String, String>) -> Did {
        let secret = StaticSecret::random_from_rng(&mut self.rng);
        let public_key = PublicKey::from(&secret);
        let did = did_for_key(&public_key);
        let endpoint = format!("sim://{}/{}", node, &did.as_str()[9..]);
        let doc = if kind == DidKind::Public { doc } else { BTreeMap::new() };
        if kind == DidKind::Public {
            self.resolver.docs.insert(
                did.clone(),
                DidDocument { did: did.clone(), public_key: *public_key.as_bytes(), endpoint: endpoint.clone(), doc: doc.clone() },
            );
        }
        self.records.insert(
            did.clone(),
            DidRecord { did: did.clone(), kind, owner: node.clone(), public_key, secret: Some(secret), endpoint, doc },
        );
        did
    }

    fn live_pairwise(&self, did: &Did) -> Result<&DidRecord, P2pError> {
        let r = self.records.get(did).ok_or_else(|| P2pError::UnknownDid(did.clone()))?;
        if r.kind != DidKind::Pairwise {
            return Err(P2pError::NotPairwise(did.clone()));
        }
        if r.is_revoked() {
            return Err(P2pError::ChannelClosed);
        }
        Ok(r)
    }

    /// Opens the channel between the contract's two pairwise DIDs.
    pub fn open_channel(&mut self, book: &ContractBook, contract_id: ContractId, now: TimestampMs) -> Result<ChannelId, P2pError> {
        let c = book.get(contract_id).ok_or(P2pError::InactiveContract(contract_id))?;
        if !c.is_active_at(now) {
            return Err(P2pError::InactiveContract(contract_id));
        }
        for did in [&c.owner_did, &c.requester_did] {
            self.live_pairwise(did)?;
            if self.bound.contains(did) {
                return Err(P2pError::DidReused(did.clone()));
            }
        }
        self.bound.insert(c.owner_did.clone());
        self.bound.insert(c.requester_did.clone());
        let id = self.channels.len() as ChannelId;
        self.channels.insert(
            id,
            Channel {
                id,
                owner_did: c.owner_did.clone(),
                requester_did: c.requester_did.clone(),
                contract_id,
                open: true,
            },
        );
        Ok(id)
    }

    pub fn channel(&self, id: ChannelId) -> Option<&Channel> {
        self.channels.get(&id)
    }

    pub fn channels(&self) -> impl Iterator<Item = &Channel> {
        self.channels.values()
    }

    /// Encrypts to the peer's DID_i key and hands the frame to the transport.
    pub fn send_encrypted(
        &mut self,
        book: &ContractBook,
        channel: ChannelId,
        from: &Did,
        plaintext: &[u8],
        now: TimestampMs,
    ) -> Result<TimestampMs, P2pError> {
        let ch = self.channels.get_mut(&channel).ok_or(P2pError::ChannelClosed)?;
        let active = book.get(ch.contract_id).is_some_and(|c| c.is_active_at(now));
        if !active {
            ch.open = false;
        }
        if !ch.open {
            return Err(P2pError::ChannelClosed);
        }
        let to = ch.peer_of(from).ok_or_else(|| P2pError::NotOnChannel(from.clone()))?.clone();
        let contract_id = ch.contract_id;
        self.live_pairwise(from)?;
        let recipient = self.live_pairwise(&to)?.public_key;
        let mut frame = Frame { sender: from.clone(), receiver: to.clone(), contract_id, body: Vec::new() };
        frame.body = seal(&recipient, &frame.header(), plaintext, &mut self.rng);
        self.transport.send(now, from.clone(), to, frame.encode()).ok_or(P2pError::Dropped)
    }

    /// Delivers due frames into inboxes; frames to erased keys are discarded.
    pub fn deliver(&mut self, until: TimestampMs) -> usize {
        let mut n = 0;
        while let Some(env) = self.transport.pop_due(until) {
            let opened = Frame::decode(&env.msg).and_then(|f| {
                let rec = self.records.get(&f.receiver).ok_or(P2pError::Decrypt)?;
                let sk = rec.secret.as_ref().ok_or(P2pError::Decrypt)?;
                open(sk, &f.header(), &f.body).map(|pt| (f, pt))
            });
            match opened {
                Ok((f, plaintext)) => {
                    self.inbox.entry(f.receiver).or_default().push_back(Received {
                        from: f.sender,
                        contract_id: f.contract_id,
                        plaintext,
                        sent_at: env.sent_at,
                        delivered_at: env.deliver_at,
                    });
                    n += 1;
                }
                Err(_) => self.undecryptable += 1,
            }
        }
        n
    }

    pub fn recv(&mut self, did: &Did) -> Option<Received> {
        self.inbox.get_mut(did)?.pop_front()
    }

    /// Erases the DID's key. Pairwise revocation also closes its channels and
    /// revokes the contracts it was bound to; public revocation only unpublishes.
    pub fn revoke_did(&mut self, node: &NodeId, did: &Did, book: &mut ContractBook) -> Result<Vec<ContractId>, P2pError> {
        let rec = self.records.get_mut(did).ok_or_else(|| P2pError::UnknownDid(did.clone()))?;
        if rec.owner != *node {
            return Err(P2pError::NotOwner { node: node.clone(), did: did.clone() });
        }
        rec.secret = None;
        if rec.kind == DidKind::Public {
            self.resolver.docs.remove(did);
            return Ok(Vec::new());
        }
        let mut revoked = Vec::new();
        for ch in self.channels.values_mut().filter(|c| c.peer_of(did).is_some()) {
            ch.open = false;
        }
        for id in book.by_pairwise(did) {
            book.revoke(id, did).expect("pairwise DID is a party");
            revoked.push(id);
        }
        Ok(revoked)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn frame_roundtrip_and_truncation() {
        let f = Frame { sender: "did:a".into(), receiver: "did:b".into(), contract_id: 9, body: vec![1, 2, 3] };
        let bytes = f.encode();
        assert_eq!(Frame::decode(&bytes).unwrap(), f);
        assert_eq!(Frame::decode(&bytes[..bytes.len() - 1]), Err(P2pError::Frame));
        let mut extra = bytes.clone();
        extra.push(0);
        assert_eq!(Frame::decode(&extra), Err(P2pError::Frame));
    }

    #[test]
    fn seal_open_and_wrong_key() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sk = StaticSecret::random_from_rng(&mut rng);
        let other = StaticSecret::random_from_rng(&mut rng);
        let mut msg = vec![0u8; 1024];
        rng.fill_bytes(&mut msg);
        let body = seal(&PublicKey::from(&sk), b"hdr", &msg, &mut rng);
        assert_eq!(open(&sk, b"hdr", &body).unwrap(), msg);
        assert_eq!(open(&other, b"hdr", &body), Err(P2pError::Decrypt));
        assert_eq!(open(&sk, b"HDR", &body), Err(P2pError::Decrypt));
    }

    #[test]
    fn public_and_pairwise_resolution() {
        let mut net = Network::new(LinkModel::default(), 1);
        let alice = NodeId::new("alice");
        let doc = BTreeMap::from([("kind".to_string(), "individual".to_string())]);
        let p = net.create_did(&alice, DidKind::Public, doc);
        assert_eq!(net.resolver().resolve(&p).unwrap().doc["kind"], "individual");
        let i1 = net.create_did(&alice, DidKind::Pairwise, BTreeMap::new());
        let i2 = net.create_did(&alice, DidKind::Pairwise, BTreeMap::new());
        assert_ne!(i1, i2);
        assert_ne!(net.record(&i1).unwrap().public_key, net.record(&i2).unwrap().public_key);
        assert!(net.resolver().resolve(&i1).is_none());
    }

    #[test]
    fn revoke_requires_ownership() {
        let mut net = Network::new(LinkModel::default(), 1);
        let mut book = ContractBook::new();
        let d = net.create_did(&NodeId::new("alice"), DidKind::Public, BTreeMap::new());
        let err = net.revoke_did(&NodeId::new("mallory"), &d, &mut book).unwrap_err();
        assert!(matches!(err, P2pError::NotOwner { .. }));
        net.revoke_did(&NodeId::new("alice"), &d, &mut book).unwrap();
        assert!(net.resolver().resolve(&d).is_none());
    }
}
