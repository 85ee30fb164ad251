//! A simulated blockchain node: append-only replicated hot storage for
//! proofs, transactions, and contract registrations; node-local cold
//! storage for device payloads; and the token escrow backing the
//! data-exchange protocol.
//!
//! Consensus is abstracted to one deterministic sequencer. Records
//! accumulate in an open block that is sealed and replicated to every
//! node at the end of each simulation tick. Cold data never enters a
//! block.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fc::ProofBundle;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("account {account} holds {balance}, needs {needed}")]
    InsufficientFunds { account: String, balance: u64, needed: u64 },
    #[error("escrow amount must be positive")]
    InvalidAmount,
    #[error("session {0} already has an escrow")]
    DuplicateSession(String),
    #[error("no escrow for session {0}")]
    UnknownSession(String),
    #[error("escrow for session {session} is {state}, cannot {action}")]
    StateError { session: String, state: EscrowState, action: &'static str },
    #[error("{caller} is not the beneficiary of session {session}")]
    Unauthorized { session: String, caller: String },
    #[error("proof bytes rejected: {0}")]
    EncodingError(String),
    #[error("no record at height {height}, index {index}")]
    NotFound { height: u64, index: u32 },
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("unknown account {0}")]
    UnknownAccount(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EscrowState {
    Open,
    Releasable,
    Withdrawn,
    Refunded,
}

impl std::fmt::Display for EscrowState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EscrowState::Open => "OPEN",
            EscrowState::Releasable => "RELEASABLE",
            EscrowState::Withdrawn => "WITHDRAWN",
            EscrowState::Refunded => "REFUNDED",
        };
        write!(f, "{s}")
    }
}

/// Tokens reserved for one session. The amount is fixed at deposit; the
/// state walks OPEN -> RELEASABLE -> WITHDRAWN, or OPEN -> REFUNDED.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EscrowAccount {
    pub session: String,
    pub depositor: String,
    pub beneficiary: String,
    pub amount: u64,
    pub state: EscrowState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Proof,
    EscrowTx,
    Contract,
}

impl std::fmt::Display for RecordKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RecordKind::Proof => "proof",
            RecordKind::EscrowTx => "escrow",
            RecordKind::Contract => "contract",
        };
        write!(f, "{s}")
    }
}

/// One hot-storage record; the digest is over the payload bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub kind: RecordKind,
    pub payload: Vec<u8>,
    pub digest: [u8; 32],
}

impl Record {
    fn new(kind: RecordKind, payload: Vec<u8>) -> Self {
        let digest = Sha256::digest(&payload).into();
        Self { kind, payload, digest }
    }
}

/// One sealed block of the hash chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub height: u64,
    pub prev_digest: [u8; 32],
    pub records: Vec<Record>,
}

impl Block {
    /// Chain digest: height, previous digest, then each record digest.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.height.to_be_bytes());
        h.update(self.prev_digest);
        for r in &self.records {
            h.update(r.digest);
        }
        h.finalize().into()
    }
}

/// Per-node storage: the replicated chain copy plus local cold data.
#[derive(Debug, Clone, Default)]
struct NodeStore {
    replicated: Vec<Block>,
    cold: BTreeMap<String, Vec<u8>>,
}

/// The sequencer plus every node replica, token balances, and escrows.
#[derive(Debug, Clone)]
pub struct Ledger {
    modulus: u64,
    balances: BTreeMap<String, u64>,
    escrows: BTreeMap<String, EscrowAccount>,
    chain: Vec<Block>,
    pending: Vec<Record>,
    nodes: BTreeMap<String, NodeStore>,
}

impl Ledger {
    /// A fresh ledger with a genesis block at height 0. `modulus` is the
    /// field proofs are decoded against when validating submissions.
    pub fn new(modulus: u64) -> Self {
        let genesis = Block { height: 0, prev_digest: [0u8; 32], records: Vec::new() };
        Self {
            modulus,
            balances: BTreeMap::new(),
            escrows: BTreeMap::new(),
            chain: vec![genesis],
            pending: Vec::new(),
            nodes: BTreeMap::new(),
        }
    }

    pub fn register_node(&mut self, id: impl Into<String>) {
        let id = id.into();
        let store = NodeStore { replicated: self.chain.clone(), cold: BTreeMap::new() };
        self.nodes.insert(id, store);
    }

    pub fn open_account(&mut self, id: impl Into<String>, balance: u64) {
        self.balances.insert(id.into(), balance);
    }

    pub fn balance(&self, id: &str) -> Result<u64, LedgerError> {
        self.balances.get(id).copied().ok_or_else(|| LedgerError::UnknownAccount(id.into()))
    }

    pub fn escrow(&self, session: &str) -> Result<&EscrowAccount, LedgerError> {
        self.escrows.get(session).ok_or_else(|| LedgerError::UnknownSession(session.into()))
    }

    pub fn escrows(&self) -> impl Iterator<Item = &EscrowAccount> {
        self.escrows.values()
    }

    fn record_escrow_tx(&mut self, line: String) {
        self.pending.push(Record::new(RecordKind::EscrowTx, line.into_bytes()));
    }

    /// Locks `amount` from the depositor for the beneficiary.
    pub fn deposit(
        &mut self,
        session: impl Into<String>,
        depositor: &str,
        beneficiary: &str,
        amount: u64,
    ) -> Result<EscrowAccount, LedgerError> {
        let session = session.into();
        if amount == 0 {
            return Err(LedgerError::InvalidAmount);
        }
        if self.escrows.contains_key(&session) {
            return Err(LedgerError::DuplicateSession(session));
        }
        let balance = self.balance(depositor)?;
        if balance < amount {
            return Err(LedgerError::InsufficientFunds {
                account: depositor.into(),
                balance,
                needed: amount,
            });
        }
        self.balances.insert(depositor.into(), balance - amount);
        let escrow = EscrowAccount {
            session: session.clone(),
            depositor: depositor.into(),
            beneficiary: beneficiary.into(),
            amount,
            state: EscrowState::Open,
        };
        self.escrows.insert(session.clone(), escrow.clone());
        self.record_escrow_tx(format!("deposit|{session}|{depositor}|{beneficiary}|{amount}"));
        Ok(escrow)
    }

    /// Whether the escrow can cover `required`. Inclusive: an exact match
    /// is sufficient.
    pub fn verify_funds(&self, session: &str, required: u64) -> Result<bool, LedgerError> {
        let escrow = self.escrow(session)?;
        Ok(escrow.state == EscrowState::Open && escrow.amount >= required)
    }

    /// OPEN -> RELEASABLE, on the relayer's release command.
    pub fn release(&mut self, session: &str) -> Result<EscrowAccount, LedgerError> {
        let escrow = self
            .escrows
            .get_mut(session)
            .ok_or_else(|| LedgerError::UnknownSession(session.into()))?;
        if escrow.state != EscrowState::Open {
            return Err(LedgerError::StateError {
                session: session.into(),
                state: escrow.state,
                action: "release",
            });
        }
        escrow.state = EscrowState::Releasable;
        let snapshot = escrow.clone();
        self.record_escrow_tx(format!("release|{session}"));
        Ok(snapshot)
    }

    /// RELEASABLE -> WITHDRAWN; only the beneficiary may withdraw.
    pub fn withdraw(&mut self, session: &str, caller: &str) -> Result<EscrowAccount, LedgerError> {
        let escrow = self
            .escrows
            .get_mut(session)
            .ok_or_else(|| LedgerError::UnknownSession(session.into()))?;
        if escrow.beneficiary != caller {
            return Err(LedgerError::Unauthorized { session: session.into(), caller: caller.into() });
        }
        if escrow.state != EscrowState::Releasable {
            return Err(LedgerError::StateError {
                session: session.into(),
                state: escrow.state,
                action: "withdraw",
            });
        }
        escrow.state = EscrowState::Withdrawn;
        let amount = escrow.amount;
        let snapshot = escrow.clone();
        *self.balances.entry(caller.into()).or_insert(0) += amount;
        self.record_escrow_tx(format!("withdraw|{session}|{caller}|{amount}"));
        Ok(snapshot)
    }

    /// OPEN -> REFUNDED, the failure path: the depositor gets the tokens
    /// back.
    pub fn refund(&mut self, session: &str) -> Result<EscrowAccount, LedgerError> {
        let escrow = self
            .escrows
            .get_mut(session)
            .ok_or_else(|| LedgerError::UnknownSession(session.into()))?;
        if escrow.state != EscrowState::Open {
            return Err(LedgerError::StateError {
                session: session.into(),
                state: escrow.state,
                action: "refund",
            });
        }
        escrow.state = EscrowState::Refunded;
        let amount = escrow.amount;
        let depositor = escrow.depositor.clone();
        let snapshot = escrow.clone();
        *self.balances.entry(depositor.clone()).or_insert(0) += amount;
        self.record_escrow_tx(format!("refund|{session}|{depositor}|{amount}"));
        Ok(snapshot)
    }

    /// Validates and queues proof bytes; returns where the record will sit
    /// once the open block seals.
    pub fn append_proof(
        &mut self,
        node: &str,
        proof_bytes: Vec<u8>,
    ) -> Result<(u64, u32), LedgerError> {
        if !self.nodes.contains_key(node) {
            return Err(LedgerError::UnknownNode(node.into()));
        }
        ProofBundle::from_bytes(&proof_bytes, self.modulus)
            .map_err(|e| LedgerError::EncodingError(e.to_string()))?;
        let height = self.chain.len() as u64;
        let index = self.pending.len() as u32;
        self.pending.push(Record::new(RecordKind::Proof, proof_bytes));
        Ok((height, index))
    }

    pub fn register_contract(&mut self, contract_id: &str, node: &str) {
        self.pending
            .push(Record::new(RecordKind::Contract, format!("{contract_id}@{node}").into_bytes()));
    }

    /// Reads a proof record from a node's replica.
    pub fn read_proof(&self, node: &str, height: u64, index: u32) -> Result<&[u8], LedgerError> {
        let store = self.nodes.get(node).ok_or_else(|| LedgerError::UnknownNode(node.into()))?;
        store
            .replicated
            .get(height as usize)
            .and_then(|b| b.records.get(index as usize))
            .filter(|r| r.kind == RecordKind::Proof)
            .map(|r| r.payload.as_slice())
            .ok_or(LedgerError::NotFound { height, index })
    }

    /// Reads any record straight from the sequencer (sealed or pending).
    pub fn read_record(&self, height: u64, index: u32) -> Result<&Record, LedgerError> {
        if height == self.chain.len() as u64 {
            return self
                .pending
                .get(index as usize)
                .ok_or(LedgerError::NotFound { height, index });
        }
        self.chain
            .get(height as usize)
            .and_then(|b| b.records.get(index as usize))
            .ok_or(LedgerError::NotFound { height, index })
    }

    pub fn store_cold(&mut self, node: &str, device: &str, payload: Vec<u8>) -> Result<(), LedgerError> {
        let store = self.nodes.get_mut(node).ok_or_else(|| LedgerError::UnknownNode(node.into()))?;
        store.cold.insert(device.into(), payload);
        Ok(())
    }

    pub fn read_cold(&self, node: &str, device: &str) -> Option<&[u8]> {
        self.nodes.get(node)?.cold.get(device).map(|v| v.as_slice())
    }

    /// Seals the open block (if any records are pending) and replicates the
    /// chain to every node. Returns true when a block was sealed.
    pub fn seal_tick(&mut self) -> bool {
        if self.pending.is_empty() {
            return false;
        }
        let prev_digest = self.chain.last().expect("genesis").digest();
        let block = Block {
            height: self.chain.len() as u64,
            prev_digest,
            records: std::mem::take(&mut self.pending),
        };
        self.chain.push(block);
        for store in self.nodes.values_mut() {
            store.replicated = self.chain.clone();
        }
        true
    }

    pub fn chain(&self) -> &[Block] {
        &self.chain
    }

    /// Recomputes the digest links over the whole chain.
    pub fn chain_is_consistent(&self) -> bool {
        self.chain.iter().enumerate().all(|(k, block)| {
            block.height == k as u64
                && if k == 0 {
                    block.prev_digest == [0u8; 32]
                } else {
                    block.prev_digest == self.chain[k - 1].digest()
                }
        })
    }

    /// Total tokens visible to conservation checks: every balance plus
    /// every escrow still holding funds.
    pub fn conservation_total(&self) -> u64 {
        let balances: u64 = self.balances.values().sum();
        let held: u64 = self
            .escrows
            .values()
            .filter(|e| matches!(e.state, EscrowState::Open | EscrowState::Releasable))
            .map(|e| e.amount)
            .sum();
        balances + held
    }

    /// Line-delimited dump of the sealed records and the escrow table.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        out.push_str("records\n");
        for block in &self.chain {
            for (index, record) in block.records.iter().enumerate() {
                out.push_str(&format!(
                    "{}|{}|{}|{}\n",
                    block.height,
                    index,
                    record.kind,
                    hex::encode(record.digest)
                ));
            }
        }
        out.push_str("escrows\n");
        for escrow in self.escrows.values() {
            out.push_str(&format!(
                "{}|{}|{}|{}|{}\n",
                escrow.session, escrow.state, escrow.amount, escrow.depositor, escrow.beneficiary
            ));
        }
        out.push_str("balances\n");
        for (account, balance) in &self.balances {
            out.push_str(&format!("{account}|{balance}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fc::{prove_execution, prove_structure, setup, ProofBundle};
    use crate::field::FieldElement;
    use crate::r1cs::{build_program, Assignment, GateProgram};

    const P: u64 = 17;

    fn proof_bytes() -> Vec<u8> {
        let prog = GateProgram::parse("inputs 1\nw2 = mul w1 w1\noutput w2").unwrap();
        let compiled = build_program(&prog, P).unwrap();
        let (_, pk, _) = setup(128, compiled.instance()).unwrap();
        let (pi_a, pi_b, pi_c) = prove_structure(&pk).unwrap();
        let z = Assignment::new(vec![
            FieldElement::one(P),
            FieldElement::new(3, P),
            FieldElement::new(9, P),
        ])
        .unwrap();
        let execution = prove_execution(&pk, &z).unwrap();
        ProofBundle { pi_a, pi_b, pi_c, execution }.to_bytes()
    }

    fn funded_ledger() -> Ledger {
        let mut ledger = Ledger::new(P);
        ledger.register_node("node-x");
        ledger.register_node("node-y");
        ledger.open_account("dev-a", 0);
        ledger.open_account("dev-b", 500);
        ledger
    }

    #[test]
    fn deposit_debits_and_opens() {
        let mut ledger = funded_ledger();
        let escrow = ledger.deposit("s1", "dev-b", "dev-a", 100).unwrap();
        assert_eq!(escrow.state, EscrowState::Open);
        assert_eq!(ledger.balance("dev-b").unwrap(), 400);
        assert_eq!(ledger.deposit("s2", "dev-b", "dev-a", 0), Err(LedgerError::InvalidAmount));
        assert_eq!(
            ledger.deposit("s1", "dev-b", "dev-a", 10),
            Err(LedgerError::DuplicateSession("s1".into()))
        );
        assert!(matches!(
            ledger.deposit("s3", "dev-b", "dev-a", 1000),
            Err(LedgerError::InsufficientFunds { .. })
        ));
    }

    #[test]
    fn verify_funds_boundary() {
        let mut ledger = funded_ledger();
        ledger.deposit("s1", "dev-b", "dev-a", 100).unwrap();
        assert_eq!(ledger.verify_funds("s1", 80), Ok(true));
        assert_eq!(ledger.verify_funds("s1", 120), Ok(false));
        assert_eq!(ledger.verify_funds("s1", 100), Ok(true));
        assert!(matches!(
            ledger.verify_funds("nope", 1),
            Err(LedgerError::UnknownSession(_))
        ));
    }

    #[test]
    fn release_withdraw_path() {
        let mut ledger = funded_ledger();
        assert!(matches!(
            ledger.release("missing"),
            Err(LedgerError::UnknownSession(_))
        ));
        ledger.deposit("s1", "dev-b", "dev-a", 100).unwrap();
        assert_eq!(ledger.release("s1").unwrap().state, EscrowState::Releasable);
        assert!(matches!(
            ledger.release("s1"),
            Err(LedgerError::StateError { action: "release", .. })
        ));
        assert!(matches!(
            ledger.withdraw("s1", "dev-b"),
            Err(LedgerError::Unauthorized { .. })
        ));
        let done = ledger.withdraw("s1", "dev-a").unwrap();
        assert_eq!(done.state, EscrowState::Withdrawn);
        assert_eq!(ledger.balance("dev-a").unwrap(), 100);
    }

    #[test]
    fn withdraw_requires_release() {
        let mut ledger = funded_ledger();
        ledger.deposit("s1", "dev-b", "dev-a", 100).unwrap();
        assert!(matches!(
            ledger.withdraw("s1", "dev-a"),
            Err(LedgerError::StateError { action: "withdraw", .. })
        ));
    }

    #[test]
    fn refund_path() {
        let mut ledger = funded_ledger();
        ledger.deposit("s1", "dev-b", "dev-a", 100).unwrap();
        let refunded = ledger.refund("s1").unwrap();
        assert_eq!(refunded.state, EscrowState::Refunded);
        assert_eq!(ledger.balance("dev-b").unwrap(), 500);
        assert!(matches!(ledger.refund("s1"), Err(LedgerError::StateError { .. })));
        ledger.deposit("s2", "dev-b", "dev-a", 50).unwrap();
        ledger.release("s2").unwrap();
        assert!(matches!(
            ledger.refund("s2"),
            Err(LedgerError::StateError { action: "refund", .. })
        ));
    }

    #[test]
    fn append_and_read_proof() {
        let mut ledger = funded_ledger();
        let bytes = proof_bytes();
        let (height, index) = ledger.append_proof("node-x", bytes.clone()).unwrap();
        assert_eq!((height, index), (1, 0));
        let (h2, i2) = ledger.append_proof("node-x", bytes.clone()).unwrap();
        assert_eq!((h2, i2), (1, 1));
        assert!(ledger.seal_tick());
        assert_eq!(ledger.read_proof("node-x", 1, 0).unwrap(), bytes.as_slice());
        // replicated to the other node verbatim
        assert_eq!(ledger.read_proof("node-y", 1, 1).unwrap(), bytes.as_slice());
        assert!(matches!(
            ledger.read_proof("node-x", 9, 0),
            Err(LedgerError::NotFound { .. })
        ));
    }

    #[test]
    fn corrupted_proof_bytes_rejected() {
        let mut ledger = funded_ledger();
        let mut bytes = proof_bytes();
        bytes[0] ^= 0xff;
        assert!(matches!(
            ledger.append_proof("node-x", bytes),
            Err(LedgerError::EncodingError(_))
        ));
    }

    #[test]
    fn hash_chain_links() {
        let mut ledger = funded_ledger();
        for _ in 0..3 {
            ledger.append_proof("node-x", proof_bytes()).unwrap();
            ledger.seal_tick();
        }
        assert!(ledger.chain_is_consistent());
        assert_eq!(ledger.chain().len(), 4);
        // no cold data inside any block
        ledger.store_cold("node-x", "dev-a", b"sensor payload".to_vec()).unwrap();
        for block in ledger.chain() {
            for record in &block.records {
                assert_ne!(record.payload.as_slice(), b"sensor payload");
            }
        }
        assert_eq!(ledger.read_cold("node-x", "dev-a"), Some(b"sensor payload".as_slice()));
        assert_eq!(ledger.read_cold("node-y", "dev-a"), None);
    }

    #[test]
    fn conservation_across_lifecycles() {
        let mut ledger = funded_ledger();
        let total = ledger.conservation_total();
        ledger.deposit("s1", "dev-b", "dev-a", 100).unwrap();
        assert_eq!(ledger.conservation_total(), total);
        ledger.release("s1").unwrap();
        assert_eq!(ledger.conservation_total(), total);
        ledger.withdraw("s1", "dev-a").unwrap();
        assert_eq!(ledger.conservation_total(), total);
        ledger.deposit("s2", "dev-b", "dev-a", 77).unwrap();
        ledger.refund("s2").unwrap();
        assert_eq!(ledger.conservation_total(), total);
    }

    #[test]
    fn dump_is_stable() {
        let mut ledger = funded_ledger();
        ledger.deposit("s1", "dev-b", "dev-a", 100).unwrap();
        ledger.append_proof("node-x", proof_bytes()).unwrap();
        ledger.seal_tick();
        let d1 = ledger.dump();
        let d2 = ledger.dump();
        assert_eq!(d1, d2);
        assert!(d1.contains("proof"));
        assert!(d1.contains("s1|OPEN|100|dev-b|dev-a"));
    }
}
