//! One PIC round across user, shuffler and server roles, plus the bulletin
//! board and signed post-computation messaging.
//!
//! Roles share no memory: everything that crosses a role boundary is passed as
//! wire bytes and decoded on the other side.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::{CryptoRng, RngCore};

use crate::envelope::{
    decode_report, decrypt, encode_report, encrypt, keygen, shuffle, sign, verify, Envelope,
    KeyPair, PublicKey, Reader, FORMAT_VERSION,
};
use crate::envelope::{put_u16_len, put_u32_len};
use crate::error::{invalid, Error, Result};
use crate::geometry::Vector;
use crate::randomizers::LocalRandomizer;
use crate::tasks::{Submission, Task, TaskId, TaskOutput};

/// Parameters the server publishes before a round.
#[derive(Debug, Clone)]
pub struct ServerParams {
    pub server_public_key: PublicKey,
    pub groups: Vec<GroupSpec>,
    pub task_id: TaskId,
}

#[derive(Debug, Clone)]
pub struct GroupSpec {
    pub name: String,
    pub randomizer: LocalRandomizer,
}

impl GroupSpec {
    pub fn dim(&self) -> usize {
        self.randomizer.domain().dim
    }
}

/// Publishes one randomizer per named group and creates the server key pair.
pub fn server_setup<R: RngCore + CryptoRng>(
    group_names: &[&str],
    randomizers: &[LocalRandomizer],
    task: TaskId,
    rng: &mut R,
) -> Result<(ServerParams, KeyPair)> {
    if group_names.is_empty() {
        return Err(Error::Config("at least one group is required".into()));
    }
    if let Some(missing) = group_names.get(randomizers.len()) {
        return Err(Error::Config(format!("group `{missing}` has no randomizer spec")));
    }
    if randomizers.len() > group_names.len() {
        return Err(Error::Config("more randomizer specs than groups".into()));
    }
    if let Some(n) = task.group_count() {
        if n != group_names.len() {
            return Err(Error::Config(format!(
                "task `{task}` needs {n} group(s), got {}",
                group_names.len()
            )));
        }
    }
    let keys = keygen(rng);
    let groups = group_names
        .iter()
        .zip(randomizers)
        .map(|(name, r)| GroupSpec { name: (*name).to_string(), randomizer: r.clone() })
        .collect();
    Ok((ServerParams { server_public_key: *keys.public_key(), groups, task_id: task }, keys))
}

/// A user's private state across one round.
#[derive(Debug, Clone)]
pub struct UserState {
    pub group_index: usize,
    pub data: Vector,
    /// Replaced by a fresh pair on every [`user_prepare`].
    pub one_time_keys: Option<KeyPair>,
    /// Raw report sent in the current round.
    pub submitted: Option<Vector>,
    pub received_output: Option<TaskOutput>,
}

impl UserState {
    pub fn new(group_index: usize, data: Vector) -> Self {
        Self { group_index, data, one_time_keys: None, submitted: None, received_output: None }
    }

    pub fn public_key(&self) -> Option<&PublicKey> {
        self.one_time_keys.as_ref().map(KeyPair::public_key)
    }
}

/// Randomizes the user's data and seals it with a fresh one-time key for the server.
pub fn user_prepare<R: RngCore + CryptoRng>(
    state: &mut UserState,
    params: &ServerParams,
    rng: &mut R,
) -> Result<Envelope> {
    let group = params
        .groups
        .get(state.group_index)
        .ok_or_else(|| invalid(format!("unknown group {}", state.group_index)))?;
    let report = group.randomizer.sample(&state.data, rng)?;
    let keys = keygen(rng);
    let plaintext = encode_report(keys.public_key().as_bytes(), &report.raw)?;
    let ciphertext = encrypt(&params.server_public_key, &plaintext, rng)?;
    state.one_time_keys = Some(keys);
    state.submitted = Some(report.raw);
    state.received_output = None;
    Ok(Envelope { ciphertext })
}

/// `(public key, encrypted output)` posted for one anonymous position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BulletinEntry {
    pub public_key: Vec<u8>,
    pub encrypted_output: Vec<u8>,
}

impl BulletinEntry {
    /// `0x01 || u16 pk len || pk || u32 ct len || ct`.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = vec![FORMAT_VERSION];
        put_u16_len(&mut out, self.public_key.len(), "public key length")?;
        out.extend_from_slice(&self.public_key);
        put_u32_len(&mut out, self.encrypted_output.len(), "ciphertext")?;
        out.extend_from_slice(&self.encrypted_output);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.version()?;
        let n = r.u16()? as usize;
        let public_key = r.take(n)?.to_vec();
        let n = r.u32()? as usize;
        let encrypted_output = r.take(n)?.to_vec();
        r.finish()?;
        Ok(Self { public_key, encrypted_output })
    }
}

/// Published results, one list per group in shuffled order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bulletin {
    pub groups: Vec<Vec<BulletinEntry>>,
}

impl Bulletin {
    pub fn entry_count(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// Concatenated binary entries, groups in order.
    pub fn export(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for e in self.groups.iter().flatten() {
            out.extend(e.to_bytes()?);
        }
        Ok(out)
    }
}

/// Aggregate counters for one group; always retained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupCounters {
    pub envelopes: usize,
    pub corrupted: usize,
    pub entries: usize,
}

/// What the server is allowed to see: the anonymous lists, the task outputs,
/// and the shuffler leakage for corrupted senders.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerView {
    pub lists: Vec<Vec<Submission>>,
    pub outputs: Vec<Vec<TaskOutput>>,
    /// `(submission index, shuffled index)` pairs of corrupted senders per group.
    pub leakage: Vec<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub counters: Vec<GroupCounters>,
    /// Present only when requested through [`RoundOptions::retain_view`].
    pub view: Option<ServerView>,
}

impl Transcript {
    /// One line per event: `event=<kind> group=<g> count=<n>`.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for (g, c) in self.counters.iter().enumerate() {
            let _ = writeln!(out, "event=shuffle group={g} count={}", c.envelopes);
            let _ = writeln!(out, "event=leak group={g} count={}", c.corrupted);
            let _ = writeln!(out, "event=publish group={g} count={}", c.entries);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RoundOptions {
    pub retain_view: bool,
}

/// Shuffles, opens, computes and publishes one round.
///
/// `envelopes[g]` lists group `g`'s envelopes in submission order and
/// `corrupted[g]` the submission indices whose position leaks (missing entries
/// mean no corruption).
pub fn run_round<R: RngCore + CryptoRng>(
    envelopes: &[Vec<Envelope>],
    params: &ServerParams,
    server_keys: &KeyPair,
    task: &dyn Task,
    corrupted: &[BTreeSet<usize>],
    options: RoundOptions,
    rng: &mut R,
) -> Result<(Bulletin, Transcript)> {
    if envelopes.len() != params.groups.len() {
        return Err(invalid(format!(
            "expected {} groups of envelopes, got {}",
            params.groups.len(),
            envelopes.len()
        )));
    }
    if task.id() != params.task_id {
        return Err(Error::Config(format!("task `{}` was not published", task.id())));
    }
    let none = BTreeSet::new();
    let mut lists = Vec::with_capacity(envelopes.len());
    let mut leakage = Vec::with_capacity(envelopes.len());
    let mut counters = Vec::with_capacity(envelopes.len());
    for (g, batch) in envelopes.iter().enumerate() {
        let bad = corrupted.get(g).unwrap_or(&none);
        // shuffler: wire bytes in, wire bytes out
        let wire = batch.iter().map(Envelope::to_bytes).collect::<Result<Vec<_>>>()?;
        let shuffled = shuffle(wire, bad, rng)?;
        let list = open_batch(&shuffled.permuted, &params.groups[g], server_keys)?;
        counters.push(GroupCounters { envelopes: list.len(), corrupted: shuffled.leakage.len(), entries: 0 });
        lists.push(list);
        leakage.push(shuffled.leakage);
    }

    let outputs = task.compute(&lists)?;
    if outputs.len() != lists.len() || outputs.iter().zip(&lists).any(|(o, l)| o.len() != l.len()) {
        return Err(invalid("task output shape does not match its input"));
    }

    let mut bulletin = Bulletin::default();
    for (g, (list, outs)) in lists.iter().zip(&outputs).enumerate() {
        let mut entries = Vec::with_capacity(list.len());
        for (sub, out) in list.iter().zip(outs) {
            let pk = PublicKey::from_bytes(&sub.public_key)?;
            entries.push(BulletinEntry {
                public_key: sub.public_key.clone(),
                encrypted_output: encrypt(&pk, &out.encode()?, rng)?,
            });
        }
        counters[g].entries = entries.len();
        bulletin.groups.push(entries);
    }

    let view = options.retain_view.then_some(ServerView { lists, outputs, leakage });
    Ok((bulletin, Transcript { counters, view }))
}

fn open_batch(wire: &[Vec<u8>], spec: &GroupSpec, keys: &KeyPair) -> Result<Vec<Submission>> {
    let mut failures = 0;
    let mut out = Vec::with_capacity(wire.len());
    for bytes in wire {
        let opened = Envelope::from_bytes(bytes)
            .and_then(|env| decrypt(keys, &env.ciphertext))
            .and_then(|pt| decode_report(&pt));
        match opened {
            Ok((public_key, raw)) => out.push((public_key, raw)),
            Err(_) => failures += 1,
        }
    }
    if failures > 0 {
        return Err(Error::RoundAborted { failures });
    }
    if out.iter().any(|(_, raw)| raw.dim() != spec.dim()) {
        return Err(invalid(format!(
            "group `{}` mixes report dimensions; expected {}",
            spec.name,
            spec.dim()
        )));
    }
    out.into_iter()
        .map(|(public_key, raw)| {
            let estimate = spec.randomizer.debias(&raw)?;
            Ok(Submission { public_key, raw, estimate })
        })
        .collect()
}

/// Finds the entry addressed to the user's one-time key and opens it.
pub fn user_retrieve(bulletin: &Bulletin, state: &mut UserState) -> Result<TaskOutput> {
    let keys = state.one_time_keys.as_ref().ok_or(Error::Delivery)?;
    let pk = keys.public_key().as_bytes();
    let entry = bulletin
        .groups
        .get(state.group_index)
        .and_then(|g| g.iter().find(|e| e.public_key == pk))
        .ok_or(Error::Delivery)?;
    let plaintext = decrypt(keys, &entry.encrypted_output)?;
    let out = TaskOutput::decode(&plaintext)?;
    state.received_output = Some(out.clone());
    Ok(out)
}

/// A signed, encrypted note from one pseudonym to another.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectMessage {
    pub recipient_public_key: Vec<u8>,
    pub ciphertext: Vec<u8>,
    pub signature: Vec<u8>,
    pub sender_public_key: Vec<u8>,
}

/// Append-only public board for post-computation messages.
#[derive(Debug, Clone, Default)]
pub struct MessageBoard {
    pub messages: Vec<DirectMessage>,
}

/// Verified messages for one recipient plus the count of rejected ones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Inbox {
    /// `(sender public key, plaintext)` in board order.
    pub messages: Vec<(Vec<u8>, Vec<u8>)>,
    pub dropped: usize,
}

pub fn post_message_send<R: RngCore + CryptoRng>(
    sender: &UserState,
    recipient_pk: &[u8],
    plaintext: &[u8],
    board: &mut MessageBoard,
    rng: &mut R,
) -> Result<()> {
    let keys = sender
        .one_time_keys
        .as_ref()
        .ok_or_else(|| invalid("sender has no one-time key"))?;
    let recipient = PublicKey::from_bytes(recipient_pk)?;
    let ciphertext = encrypt(&recipient, plaintext, rng)?;
    let signature = sign(keys, &ciphertext).to_vec();
    board.messages.push(DirectMessage {
        recipient_public_key: recipient_pk.to_vec(),
        ciphertext,
        signature,
        sender_public_key: keys.public_key().as_bytes().to_vec(),
    });
    Ok(())
}

/// Collects messages addressed to the recipient; bad signatures or
/// undecryptable payloads are dropped and counted.
pub fn post_message_receive(board: &MessageBoard, recipient: &UserState) -> Result<Inbox> {
    let keys = recipient
        .one_time_keys
        .as_ref()
        .ok_or_else(|| invalid("recipient has no one-time key"))?;
    let own = keys.public_key().as_bytes();
    let mut inbox = Inbox::default();
    for m in board.messages.iter().filter(|m| m.recipient_public_key == own) {
        let verified = PublicKey::from_bytes(&m.sender_public_key)
            .map(|pk| verify(&pk, &m.ciphertext, &m.signature))
            .unwrap_or(false);
        match (verified, decrypt(keys, &m.ciphertext)) {
            (true, Ok(pt)) => inbox.messages.push((m.sender_public_key.clone(), pt)),
            _ => inbox.dropped += 1,
        }
    }
    Ok(inbox)
}
