//! The escrowed data-exchange protocol as an explicit state machine.
//!
//! One session moves tokens from the data receiver (device B) to the data
//! producer (device A) across two blockchain nodes and a relayer. The
//! numbered flow: deposit, proof submission with the new-data signal,
//! funds verification, data transfer to the relayer, data delivery to the
//! far contract, proof verification, acknowledgment, received notice,
//! release authorization, fund release, withdrawal. `FAILED` is reachable
//! from every non-terminal state; failures refund the depositor.
//!
//! [`step_session`] is the pure transition function. [`World`] drives whole
//! sessions through a single-threaded discrete-event loop with logical
//! ticks and FIFO delivery: deterministic transcripts for a fixed scenario.
//! [`model`] exhaustively enumerates the interleavings the loop could ever
//! produce and checks the safety and conservation properties on every
//! reachable state.

use std::collections::BTreeMap;
use std::time::Instant;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::contract::{evaluate_contract, ComplianceRegistry, ContractSpec, Decision};
use crate::device::{DataBundle, Device};
use crate::fc::{ProofBundle, VerificationKey};
use crate::field::FieldElement;
use crate::ledger::{Ledger, LedgerError};

pub const RELAYER: &str = "relayer";
pub const LEDGER: &str = "ledger";
pub const TIMER: &str = "timer";

/// Default per-state timeout in ticks.
pub const DEFAULT_TIMEOUT: u64 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FailReason {
    Funds,
    Proof,
    Timeout,
}

impl std::fmt::Display for FailReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FailReason::Funds => "funds",
            FailReason::Proof => "proof",
            FailReason::Timeout => "timeout",
        };
        write!(f, "{s}")
    }
}

/// One state per protocol step, `INIT` before the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SessionState {
    Init,
    Funded,
    ProofSubmitted,
    FundsVerified,
    DataAtRelayer,
    DataDelivered,
    ProofVerified,
    Acked,
    ReleaseAuthorized,
    FundsReleased,
    Withdrawn,
    Failed(FailReason),
}

impl SessionState {
    pub fn is_terminal(&self) -> bool {
        matches!(self, SessionState::Withdrawn | SessionState::Failed(_))
    }

    /// The eleven states of a successful session, in visit order.
    pub fn happy_path() -> [SessionState; 11] {
        use SessionState::*;
        [
            Init,
            Funded,
            ProofSubmitted,
            FundsVerified,
            DataAtRelayer,
            DataDelivered,
            ProofVerified,
            Acked,
            ReleaseAuthorized,
            FundsReleased,
            Withdrawn,
        ]
    }
}

impl std::fmt::Display for SessionState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SessionState::Init => write!(f, "INIT"),
            SessionState::Funded => write!(f, "FUNDED"),
            SessionState::ProofSubmitted => write!(f, "PROOF_SUBMITTED"),
            SessionState::FundsVerified => write!(f, "FUNDS_VERIFIED"),
            SessionState::DataAtRelayer => write!(f, "DATA_AT_RELAYER"),
            SessionState::DataDelivered => write!(f, "DATA_DELIVERED"),
            SessionState::ProofVerified => write!(f, "PROOF_VERIFIED"),
            SessionState::Acked => write!(f, "ACKED"),
            SessionState::ReleaseAuthorized => write!(f, "RELEASE_AUTHORIZED"),
            SessionState::FundsReleased => write!(f, "FUNDS_RELEASED"),
            SessionState::Withdrawn => write!(f, "WITHDRAWN"),
            SessionState::Failed(reason) => write!(f, "FAILED({reason})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageKind {
    Deposit,
    NewDataNotice,
    ProofSubmitted,
    FundsQuery,
    FundsOk,
    FundsShort,
    DataTransfer,
    DataDelivery,
    VerifyResult { accept: bool },
    Ack,
    ReceivedNotice,
    ReleaseCmd,
    ReleaseDone,
    WithdrawDone,
    Timeout,
}

impl MessageKind {
    /// Stable name used in transcripts and drop directives.
    pub fn name(&self) -> &'static str {
        match self {
            MessageKind::Deposit => "deposit",
            MessageKind::NewDataNotice => "new-data-notice",
            MessageKind::ProofSubmitted => "proof-submitted",
            MessageKind::FundsQuery => "funds-query",
            MessageKind::FundsOk => "funds-ok",
            MessageKind::FundsShort => "funds-short",
            MessageKind::DataTransfer => "data-transfer",
            MessageKind::DataDelivery => "data-delivery",
            MessageKind::VerifyResult { .. } => "verify-result",
            MessageKind::Ack => "ack",
            MessageKind::ReceivedNotice => "received-notice",
            MessageKind::ReleaseCmd => "release-cmd",
            MessageKind::ReleaseDone => "release-done",
            MessageKind::WithdrawDone => "withdraw-done",
            MessageKind::Timeout => "timeout",
        }
    }
}

impl std::fmt::Display for MessageKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MessageKind::VerifyResult { accept: true } => write!(f, "verify-result(accept)"),
            MessageKind::VerifyResult { accept: false } => write!(f, "verify-result(reject)"),
            other => write!(f, "{}", other.name()),
        }
    }
}

/// A protocol message between actors, carrying the digest of whatever
/// payload it refers to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolMessage {
    pub kind: MessageKind,
    pub session: String,
    pub sender: String,
    pub recipient: String,
    pub payload_digest: [u8; 32],
}

/// One data-exchange session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub id: String,
    pub device_a: String,
    pub device_b: String,
    pub node_x: String,
    pub node_y: String,
    pub contract_x: String,
    pub contract_y: String,
    pub required_amount: u64,
    pub state: SessionState,
    pub timeout_ticks: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("event {kind} is not legal in state {state}")]
pub struct ProtocolViolation {
    pub state: SessionState,
    pub kind: MessageKind,
}

/// Ledger commands the relayer must execute after a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LedgerOp {
    Release,
    Refund,
}

/// Result of one transition: the updated session, the messages the relayer
/// sends, and the ledger commands it must execute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    pub session: Session,
    pub emits: Vec<ProtocolMessage>,
    pub ledger_ops: Vec<LedgerOp>,
}

/// The deterministic transition table. Illegal (state, kind) pairs leave
/// the session unchanged and surface as violations.
pub fn step_session(
    session: &Session,
    event: &ProtocolMessage,
) -> Result<StepOutcome, ProtocolViolation> {
    use MessageKind as K;
    use SessionState as S;

    let mut next = session.clone();
    let mut emits = Vec::new();
    let mut ledger_ops = Vec::new();
    let say = |kind: MessageKind, recipient: &str| ProtocolMessage {
        kind,
        session: session.id.clone(),
        sender: RELAYER.into(),
        recipient: recipient.into(),
        payload_digest: event.payload_digest,
    };

    match (session.state, event.kind) {
        (S::Init, K::Deposit) => next.state = S::Funded,
        (S::Funded, K::ProofSubmitted) => {
            next.state = S::ProofSubmitted;
            emits.push(say(K::FundsQuery, LEDGER));
        }
        (S::ProofSubmitted, K::FundsOk) => {
            next.state = S::FundsVerified;
            emits.push(say(K::DataTransfer, &session.node_x));
        }
        (S::ProofSubmitted, K::FundsShort) => {
            next.state = S::Failed(FailReason::Funds);
            ledger_ops.push(LedgerOp::Refund);
        }
        (S::FundsVerified, K::DataTransfer) => {
            next.state = S::DataAtRelayer;
            emits.push(say(K::DataDelivery, &session.node_y));
        }
        (S::DataAtRelayer, K::DataDelivery) => next.state = S::DataDelivered,
        (S::DataDelivered, K::VerifyResult { accept: true }) => {
            next.state = S::ProofVerified;
            emits.push(say(K::Ack, &session.node_y));
        }
        (S::DataDelivered, K::VerifyResult { accept: false }) => {
            next.state = S::Failed(FailReason::Proof);
            ledger_ops.push(LedgerOp::Refund);
        }
        (S::ProofVerified, K::Ack) => {
            next.state = S::Acked;
            emits.push(say(K::ReceivedNotice, &session.node_x));
        }
        (S::Acked, K::ReleaseCmd) => {
            next.state = S::ReleaseAuthorized;
            ledger_ops.push(LedgerOp::Release);
        }
        (S::ReleaseAuthorized, K::ReleaseDone) => next.state = S::FundsReleased,
        (S::FundsReleased, K::WithdrawDone) => next.state = S::Withdrawn,
        (state, K::Timeout) if !state.is_terminal() => {
            next.state = S::Failed(FailReason::Timeout);
            ledger_ops.push(LedgerOp::Refund);
        }
        (state, kind) => return Err(ProtocolViolation { state, kind }),
    }
    Ok(StepOutcome { session: next, emits, ledger_ops })
}

// ---------------------------------------------------------------------------
// Discrete-event runner.

/// Everything a scenario wires together before sessions run.
pub struct World {
    pub ledger: Ledger,
    pub devices: BTreeMap<String, Device>,
    pub contracts: BTreeMap<String, ContractSpec>,
    /// Which node hosts each contract.
    pub contract_nodes: BTreeMap<String, String>,
    pub registry: ComplianceRegistry,
    pub keys: BTreeMap<[u8; 32], VerificationKey>,
}

/// Per-session inputs to the runner.
#[derive(Debug, Clone)]
pub struct SessionSpec {
    pub id: String,
    /// Data producer (device A, the beneficiary).
    pub producer: String,
    /// Data receiver (device B, the depositor).
    pub consumer: String,
    /// Amount the session requires.
    pub amount: u64,
    /// Amount B actually deposits.
    pub deposit: u64,
    pub contract_x: String,
    pub contract_y: String,
    /// Payload inputs for A's firmware (metadata slot excluded).
    pub payload: Vec<FieldElement>,
    pub metadata: BTreeMap<String, String>,
    /// Tick at which A emits its data.
    pub emit_tick: u64,
    pub timeout: u64,
    /// Message kinds (by name) to silently drop, first occurrence each.
    pub drops: Vec<String>,
}

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("unknown device {0}")]
    UnknownDevice(String),
    #[error("unknown contract {0}")]
    UnknownContract(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Device(#[from] crate::device::DeviceError),
}

/// Wall-clock phase timings for one session, in microseconds.
#[derive(Debug, Clone, Default)]
pub struct SessionMetrics {
    pub prove_us: u128,
    pub verify_us: u128,
    pub write_us: u128,
    pub confirm_us: u128,
    pub read_us: u128,
    pub end_to_end_us: u128,
}

/// What one session run produced.
#[derive(Debug, Clone)]
pub struct SessionReport {
    pub session_id: String,
    pub final_state: SessionState,
    pub transcript: Vec<String>,
    pub states_visited: Vec<SessionState>,
    pub decision: Option<Decision>,
    pub violations: u32,
    pub metrics: SessionMetrics,
}

enum Event {
    DepositAction,
    EmitAction,
    WithdrawAction,
    Deliver(ProtocolMessage),
}

struct SessionCtx {
    session: Session,
    spec: SessionSpec,
    state_entered: u64,
    timeout_armed: bool,
    withdraw_scheduled: bool,
    bundle: Option<DataBundle>,
    proof_loc: Option<(u64, u32)>,
    decision: Option<Decision>,
    drops: Vec<String>,
    metrics: SessionMetrics,
    report_states: Vec<SessionState>,
    transcript: Vec<String>,
    violations: u32,
    confirm_timer: Option<Instant>,
}

fn digest_of(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

impl World {
    /// Runs one session to a terminal state. Deterministic for a fixed
    /// world and spec: logical ticks, FIFO delivery, one seal per tick.
    pub fn run_session(&mut self, spec: &SessionSpec) -> Result<SessionReport, WorldError> {
        let node_x = self
            .contract_nodes
            .get(&spec.contract_x)
            .ok_or_else(|| WorldError::UnknownContract(spec.contract_x.clone()))?
            .clone();
        let node_y = self
            .contract_nodes
            .get(&spec.contract_y)
            .ok_or_else(|| WorldError::UnknownContract(spec.contract_y.clone()))?
            .clone();
        if !self.devices.contains_key(&spec.producer) {
            return Err(WorldError::UnknownDevice(spec.producer.clone()));
        }
        if !self.devices.contains_key(&spec.consumer) {
            return Err(WorldError::UnknownDevice(spec.consumer.clone()));
        }

        let session = Session {
            id: spec.id.clone(),
            device_a: spec.producer.clone(),
            device_b: spec.consumer.clone(),
            node_x,
            node_y,
            contract_x: spec.contract_x.clone(),
            contract_y: spec.contract_y.clone(),
            required_amount: spec.amount,
            state: SessionState::Init,
            timeout_ticks: spec.timeout,
        };
        let mut ctx = SessionCtx {
            session,
            spec: spec.clone(),
            state_entered: 0,
            timeout_armed: false,
            withdraw_scheduled: false,
            bundle: None,
            proof_loc: None,
            decision: None,
            drops: spec.drops.clone(),
            metrics: SessionMetrics::default(),
            report_states: vec![SessionState::Init],
            transcript: Vec::new(),
            violations: 0,
            confirm_timer: None,
        };

        let started = Instant::now();
        let mut queue: BTreeMap<u64, Vec<Event>> = BTreeMap::new();
        queue.entry(1).or_default().push(Event::DepositAction);
        queue.entry(spec.emit_tick.max(2)).or_default().push(Event::EmitAction);

        let budget = spec.timeout.saturating_mul(20).max(500);
        let mut tick = 1u64;
        while tick <= budget {
            let events = queue.remove(&tick).unwrap_or_default();
            for event in events {
                self.handle_event(&mut ctx, event, tick, &mut queue)?;
            }

            if self.ledger.seal_tick() {
                if let Some(timer) = ctx.confirm_timer.take() {
                    ctx.metrics.confirm_us = timer.elapsed().as_micros();
                }
            }

            let state = ctx.session.state;
            if !state.is_terminal()
                && !ctx.timeout_armed
                && tick.saturating_sub(ctx.state_entered) >= ctx.session.timeout_ticks
            {
                ctx.timeout_armed = true;
                let msg = ProtocolMessage {
                    kind: MessageKind::Timeout,
                    session: ctx.session.id.clone(),
                    sender: TIMER.into(),
                    recipient: RELAYER.into(),
                    payload_digest: [0u8; 32],
                };
                queue.entry(tick + 1).or_default().push(Event::Deliver(msg));
            }

            if state.is_terminal() && queue.is_empty() {
                break;
            }
            tick += 1;
        }

        ctx.metrics.end_to_end_us = started.elapsed().as_micros();
        Ok(SessionReport {
            session_id: ctx.session.id.clone(),
            final_state: ctx.session.state,
            transcript: ctx.transcript,
            states_visited: ctx.report_states,
            decision: ctx.decision,
            violations: ctx.violations,
            metrics: ctx.metrics,
        })
    }

    fn enqueue(
        ctx: &mut SessionCtx,
        queue: &mut BTreeMap<u64, Vec<Event>>,
        tick: u64,
        msg: ProtocolMessage,
    ) {
        Self::enqueue_after(ctx, queue, tick, 1, msg);
    }

    fn enqueue_after(
        ctx: &mut SessionCtx,
        queue: &mut BTreeMap<u64, Vec<Event>>,
        tick: u64,
        delay: u64,
        msg: ProtocolMessage,
    ) {
        if let Some(pos) = ctx.drops.iter().position(|d| d == msg.kind.name()) {
            ctx.drops.remove(pos);
            return;
        }
        queue.entry(tick + delay).or_default().push(Event::Deliver(msg));
    }

    fn handle_event(
        &mut self,
        ctx: &mut SessionCtx,
        event: Event,
        tick: u64,
        queue: &mut BTreeMap<u64, Vec<Event>>,
    ) -> Result<(), WorldError> {
        match event {
            Event::DepositAction => {
                let escrow = self.ledger.deposit(
                    &ctx.spec.id,
                    &ctx.spec.consumer,
                    &ctx.spec.producer,
                    ctx.spec.deposit,
                )?;
                let msg = ProtocolMessage {
                    kind: MessageKind::Deposit,
                    session: ctx.spec.id.clone(),
                    sender: LEDGER.into(),
                    recipient: RELAYER.into(),
                    payload_digest: digest_of(
                        format!("deposit|{}|{}", escrow.session, escrow.amount).as_bytes(),
                    ),
                };
                Self::enqueue(ctx, queue, tick, msg);
            }
            Event::EmitAction => {
                let device = self
                    .devices
                    .get(&ctx.spec.producer)
                    .ok_or_else(|| WorldError::UnknownDevice(ctx.spec.producer.clone()))?;
                let timer = Instant::now();
                let bundle = device.emit_bundle(&ctx.spec.payload, ctx.spec.metadata.clone())?;
                ctx.metrics.prove_us = timer.elapsed().as_micros();
                let digest = bundle.proofs.digest();
                ctx.bundle = Some(bundle);
                let msg = ProtocolMessage {
                    kind: MessageKind::NewDataNotice,
                    session: ctx.spec.id.clone(),
                    sender: ctx.spec.producer.clone(),
                    recipient: ctx.session.node_x.clone(),
                    payload_digest: digest,
                };
                Self::enqueue(ctx, queue, tick, msg);
            }
            Event::WithdrawAction => {
                match self.ledger.withdraw(&ctx.spec.id, &ctx.spec.producer) {
                    Ok(escrow) => {
                        let msg = ProtocolMessage {
                            kind: MessageKind::WithdrawDone,
                            session: ctx.spec.id.clone(),
                            sender: LEDGER.into(),
                            recipient: RELAYER.into(),
                            payload_digest: digest_of(
                                format!("withdraw|{}|{}", escrow.session, escrow.amount)
                                    .as_bytes(),
                            ),
                        };
                        Self::enqueue(ctx, queue, tick, msg);
                    }
                    Err(_) => {
                        // nothing to withdraw; the timeout path will close
                        // the session
                    }
                }
            }
            Event::Deliver(msg) => self.deliver(ctx, msg, tick, queue)?,
        }
        Ok(())
    }

    fn deliver(
        &mut self,
        ctx: &mut SessionCtx,
        msg: ProtocolMessage,
        tick: u64,
        queue: &mut BTreeMap<u64, Vec<Event>>,
    ) -> Result<(), WorldError> {
        if msg.recipient == RELAYER {
            self.relayer_step(ctx, &msg, tick, queue);
        } else if msg.recipient == LEDGER {
            self.ledger_actor(ctx, &msg, tick, queue);
        } else if msg.recipient == ctx.session.node_x && msg.sender != RELAYER {
            self.node_x_notice(ctx, &msg, tick, queue)?;
        } else if msg.recipient == ctx.session.node_x {
            self.node_x_from_relayer(ctx, &msg, tick, queue);
        } else if msg.recipient == ctx.session.node_y {
            self.node_y_from_relayer(ctx, &msg, tick, queue);
        }
        ctx.transcript.push(format!(
            "{tick}|{}|{}|{}|{}>{}|{}",
            msg.session,
            ctx.session.state,
            msg.kind,
            msg.sender,
            msg.recipient,
            hex::encode(msg.payload_digest)
        ));
        Ok(())
    }

    fn relayer_step(
        &mut self,
        ctx: &mut SessionCtx,
        msg: &ProtocolMessage,
        tick: u64,
        queue: &mut BTreeMap<u64, Vec<Event>>,
    ) {
        match step_session(&ctx.session, msg) {
            Ok(outcome) => {
                let changed = outcome.session.state != ctx.session.state;
                ctx.session = outcome.session;
                if changed {
                    ctx.state_entered = tick;
                    ctx.timeout_armed = false;
                    ctx.report_states.push(ctx.session.state);
                }
                for emitted in outcome.emits {
                    Self::enqueue(ctx, queue, tick, emitted);
                }
                for op in outcome.ledger_ops {
                    self.ledger_op(ctx, op, tick, queue);
                }
                if ctx.session.state == SessionState::FundsReleased && !ctx.withdraw_scheduled {
                    ctx.withdraw_scheduled = true;
                    queue.entry(tick + 1).or_default().push(Event::WithdrawAction);
                }
            }
            Err(_violation) => {
                ctx.violations += 1;
            }
        }
    }

    fn ledger_op(
        &mut self,
        ctx: &mut SessionCtx,
        op: LedgerOp,
        tick: u64,
        queue: &mut BTreeMap<u64, Vec<Event>>,
    ) {
        match op {
            LedgerOp::Release => {
                if let Ok(escrow) = self.ledger.release(&ctx.spec.id) {
                    let msg = ProtocolMessage {
                        kind: MessageKind::ReleaseDone,
                        session: ctx.spec.id.clone(),
                        sender: LEDGER.into(),
                        recipient: RELAYER.into(),
                        payload_digest: digest_of(
                            format!("release|{}|{}", escrow.session, escrow.amount).as_bytes(),
                        ),
                    };
                    Self::enqueue(ctx, queue, tick, msg);
                }
            }
            LedgerOp::Refund => {
                // refund only applies while the escrow still holds funds
                let _ = self.ledger.refund(&ctx.spec.id);
            }
        }
    }

    fn ledger_actor(
        &mut self,
        ctx: &mut SessionCtx,
        msg: &ProtocolMessage,
        tick: u64,
        queue: &mut BTreeMap<u64, Vec<Event>>,
    ) {
        if msg.kind != MessageKind::FundsQuery {
            return;
        }
        let sufficient = self
            .ledger
            .verify_funds(&ctx.spec.id, ctx.session.required_amount)
            .unwrap_or(false);
        let kind = if sufficient { MessageKind::FundsOk } else { MessageKind::FundsShort };
        let reply = ProtocolMessage {
            kind,
            session: ctx.spec.id.clone(),
            sender: LEDGER.into(),
            recipient: RELAYER.into(),
            payload_digest: msg.payload_digest,
        };
        Self::enqueue(ctx, queue, tick, reply);
    }

    /// Device A's new-data signal: the node stores the payload cold,
    /// appends the proof to hot storage, and signals the relayer. One
    /// handler, both writes.
    fn node_x_notice(
        &mut self,
        ctx: &mut SessionCtx,
        msg: &ProtocolMessage,
        tick: u64,
        queue: &mut BTreeMap<u64, Vec<Event>>,
    ) -> Result<(), WorldError> {
        let Some(bundle) = ctx.bundle.as_ref() else {
            return Ok(());
        };
        let node = ctx.session.node_x.clone();
        self.ledger.store_cold(&node, &bundle.producer, bundle_data_bytes(bundle))?;
        let proof_bytes = bundle.proofs.to_bytes();
        let timer = Instant::now();
        match self.ledger.append_proof(&node, proof_bytes) {
            Ok(loc) => {
                ctx.metrics.write_us = timer.elapsed().as_micros();
                ctx.confirm_timer = Some(timer);
                ctx.proof_loc = Some(loc);
                let reply = ProtocolMessage {
                    kind: MessageKind::ProofSubmitted,
                    session: ctx.spec.id.clone(),
                    sender: node,
                    recipient: RELAYER.into(),
                    payload_digest: msg.payload_digest,
                };
                Self::enqueue(ctx, queue, tick, reply);
            }
            Err(_) => {
                // malformed proof bytes never reach the relayer; the
                // session times out and refunds
            }
        }
        Ok(())
    }

    fn node_x_from_relayer(
        &mut self,
        ctx: &mut SessionCtx,
        msg: &ProtocolMessage,
        tick: u64,
        queue: &mut BTreeMap<u64, Vec<Event>>,
    ) {
        match msg.kind {
            MessageKind::DataTransfer => {
                let reply = ProtocolMessage {
                    kind: MessageKind::DataTransfer,
                    session: ctx.spec.id.clone(),
                    sender: ctx.session.node_x.clone(),
                    recipient: RELAYER.into(),
                    payload_digest: msg.payload_digest,
                };
                Self::enqueue(ctx, queue, tick, reply);
            }
            MessageKind::ReceivedNotice => {}
            _ => {}
        }
    }

    fn node_y_from_relayer(
        &mut self,
        ctx: &mut SessionCtx,
        msg: &ProtocolMessage,
        tick: u64,
        queue: &mut BTreeMap<u64, Vec<Event>>,
    ) {
        let node = ctx.session.node_y.clone();
        match msg.kind {
            MessageKind::DataDelivery => {
                let receipt = ProtocolMessage {
                    kind: MessageKind::DataDelivery,
                    session: ctx.spec.id.clone(),
                    sender: node.clone(),
                    recipient: RELAYER.into(),
                    payload_digest: msg.payload_digest,
                };
                Self::enqueue(ctx, queue, tick, receipt);

                let decision = self.evaluate_at_y(ctx);
                let accept = decision.is_forward();
                ctx.decision = Some(decision);
                let verdict = ProtocolMessage {
                    kind: MessageKind::VerifyResult { accept },
                    session: ctx.spec.id.clone(),
                    sender: node,
                    recipient: RELAYER.into(),
                    payload_digest: msg.payload_digest,
                };
                Self::enqueue(ctx, queue, tick, verdict);
            }
            MessageKind::Ack => {
                let ack = ProtocolMessage {
                    kind: MessageKind::Ack,
                    session: ctx.spec.id.clone(),
                    sender: node.clone(),
                    recipient: RELAYER.into(),
                    payload_digest: msg.payload_digest,
                };
                Self::enqueue(ctx, queue, tick, ack);
                // the release instruction follows the data processing; the
                // extra delay keeps it behind the received notice to X
                let release = ProtocolMessage {
                    kind: MessageKind::ReleaseCmd,
                    session: ctx.spec.id.clone(),
                    sender: node,
                    recipient: RELAYER.into(),
                    payload_digest: msg.payload_digest,
                };
                Self::enqueue_after(ctx, queue, tick, 3, release);
            }
            _ => {}
        }
    }

    /// Contract Y's evaluation: the proof is read back from the node's
    /// replicated hot storage, the data from the relayer-carried bundle.
    fn evaluate_at_y(&mut self, ctx: &mut SessionCtx) -> Decision {
        use crate::contract::RejectReason;
        let Some(bundle) = ctx.bundle.as_ref() else {
            return Decision::Reject(RejectReason::Proof("no data at relayer".into()));
        };
        let Some((height, index)) = ctx.proof_loc else {
            return Decision::Reject(RejectReason::Proof("proof location unknown".into()));
        };
        let node = ctx.session.node_y.clone();
        let timer = Instant::now();
        let proof_bytes = match self.ledger.read_proof(&node, height, index) {
            Ok(bytes) => bytes.to_vec(),
            Err(e) => return Decision::Reject(RejectReason::Proof(format!("read: {e}"))),
        };
        ctx.metrics.read_us = timer.elapsed().as_micros();
        let modulus = bundle.output.modulus();
        let proofs = match ProofBundle::from_bytes(&proof_bytes, modulus) {
            Ok(p) => p,
            Err(e) => return Decision::Reject(RejectReason::Proof(format!("decode: {e}"))),
        };
        let evaluated = DataBundle { proofs, ..bundle.clone() };
        let Some(contract) = self.contracts.get(&ctx.session.contract_y) else {
            return Decision::Reject(RejectReason::Proof("unknown contract".into()));
        };
        let Some(vk) = self.keys.get(&evaluated.vk_digest) else {
            return Decision::Reject(RejectReason::Proof("unknown verification key".into()));
        };
        let timer = Instant::now();
        let decision = evaluate_contract(contract, &self.registry, &evaluated, vk);
        ctx.metrics.verify_us = timer.elapsed().as_micros();
        decision
    }
}

/// The data half of a bundle as stored cold: everything but the proofs.
fn bundle_data_bytes(bundle: &DataBundle) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(bundle.producer.as_bytes());
    out.push(b'\n');
    for v in &bundle.inputs {
        out.extend_from_slice(&v.to_bytes());
    }
    out.extend_from_slice(&bundle.output.to_bytes());
    for (k, v) in &bundle.metadata {
        out.extend_from_slice(k.as_bytes());
        out.push(b'=');
        out.extend_from_slice(v.as_bytes());
        out.push(b'\n');
    }
    out.extend_from_slice(&bundle.vk_digest);
    out.extend_from_slice(&bundle.instance_digest);
    out
}

pub mod model {
    //! Exhaustive enumeration of one session's reachable states.
    //!
    //! Message order is the only nondeterminism the runner has, so the
    //! model explores every FIFO-legal delivery interleaving (plus optional
    //! timeout injection) over abstract actors that mirror the runner's
    //! choreography exactly — the relayer transitions through the real
    //! [`step_session`]. Checked on every reachable state: token
    //! conservation, and that `WITHDRAWN` is only reachable through
    //! `PROOF_VERIFIED` and `ACKED`.

    use std::collections::{HashSet, VecDeque};

    use super::{
        step_session, FailReason, LedgerOp, MessageKind, ProtocolMessage, Session, SessionState,
        LEDGER, RELAYER,
    };
    use crate::ledger::EscrowState;

    /// Model parameters: how much is deposited versus required, whether
    /// the proof verifies, and whether timeouts may fire.
    #[derive(Debug, Clone, Copy)]
    pub struct ModelConfig {
        pub deposit: u64,
        pub required: u64,
        pub proof_valid: bool,
        pub allow_timeout: bool,
        pub initial_balance_b: u64,
    }

    impl Default for ModelConfig {
        fn default() -> Self {
            Self {
                deposit: 100,
                required: 100,
                proof_valid: true,
                allow_timeout: false,
                initial_balance_b: 100,
            }
        }
    }

    /// Channels between the actors, FIFO each.
    const CHAN_A_TO_X: usize = 0;
    const CHAN_X_TO_R: usize = 1;
    const CHAN_R_TO_LEDGER: usize = 2;
    const CHAN_LEDGER_TO_R: usize = 3;
    const CHAN_R_TO_X: usize = 4;
    const CHAN_R_TO_Y: usize = 5;
    const CHAN_Y_TO_R: usize = 6;
    const CHANNELS: usize = 7;

    #[derive(Clone, PartialEq, Eq, Hash)]
    struct ModelState {
        session: SessionState,
        escrow: Option<EscrowState>,
        bal_a: u64,
        bal_b: u64,
        chans: [VecDeque<MessageKind>; CHANNELS],
        b_deposited: bool,
        a_emitted: bool,
        a_withdrew: bool,
        timeout_fired: bool,
        saw_proof_verified: bool,
        saw_acked: bool,
    }

    #[derive(Debug, Clone)]
    pub struct ModelReport {
        pub states_explored: usize,
        pub reached_withdrawn: bool,
        pub reached_failed: bool,
        pub terminal_dead_ends: usize,
        pub non_terminal_dead_ends: usize,
        pub violations: Vec<String>,
    }

    fn held(escrow: &Option<EscrowState>, amount: u64) -> u64 {
        match escrow {
            Some(EscrowState::Open) | Some(EscrowState::Releasable) => amount,
            _ => 0,
        }
    }

    fn mk_session(state: SessionState, required: u64) -> Session {
        Session {
            id: "model".into(),
            device_a: "a".into(),
            device_b: "b".into(),
            node_x: "x".into(),
            node_y: "y".into(),
            contract_x: "cx".into(),
            contract_y: "cy".into(),
            required_amount: required,
            state,
            timeout_ticks: 0,
        }
    }

    fn mk_msg(kind: MessageKind) -> ProtocolMessage {
        ProtocolMessage {
            kind,
            session: "model".into(),
            sender: LEDGER.into(),
            recipient: RELAYER.into(),
            payload_digest: [0u8; 32],
        }
    }

    /// Feeds one event through the real transition function and mirrors
    /// the runner's ledger-op handling.
    fn relayer_apply(cfg: &ModelConfig, state: &mut ModelState, kind: MessageKind) {
        let session = mk_session(state.session, cfg.required);
        match step_session(&session, &mk_msg(kind)) {
            Ok(outcome) => {
                state.session = outcome.session.state;
                match state.session {
                    SessionState::ProofVerified => state.saw_proof_verified = true,
                    SessionState::Acked => state.saw_acked = true,
                    _ => {}
                }
                for emitted in outcome.emits {
                    let chan = match emitted.kind {
                        MessageKind::FundsQuery => CHAN_R_TO_LEDGER,
                        MessageKind::DataTransfer => CHAN_R_TO_X,
                        MessageKind::DataDelivery | MessageKind::Ack => CHAN_R_TO_Y,
                        MessageKind::ReceivedNotice => CHAN_R_TO_X,
                        _ => continue,
                    };
                    state.chans[chan].push_back(emitted.kind);
                }
                for op in outcome.ledger_ops {
                    match op {
                        LedgerOp::Release => {
                            if state.escrow == Some(EscrowState::Open) {
                                state.escrow = Some(EscrowState::Releasable);
                                state.chans[CHAN_LEDGER_TO_R].push_back(MessageKind::ReleaseDone);
                            }
                        }
                        LedgerOp::Refund => {
                            if state.escrow == Some(EscrowState::Open) {
                                state.escrow = Some(EscrowState::Refunded);
                                state.bal_b += cfg.deposit;
                            }
                        }
                    }
                }
            }
            Err(_) => {
                // violation: event consumed, session unchanged
            }
        }
    }

    fn successors(cfg: &ModelConfig, state: &ModelState) -> Vec<ModelState> {
        let mut out = Vec::new();

        // B deposits (once, any time).
        if !state.b_deposited && state.bal_b >= cfg.deposit {
            let mut s = state.clone();
            s.b_deposited = true;
            s.bal_b -= cfg.deposit;
            s.escrow = Some(EscrowState::Open);
            s.chans[CHAN_LEDGER_TO_R].push_back(MessageKind::Deposit);
            out.push(s);
        }
        // A emits its data once the session is funded.
        if !state.a_emitted && state.session == SessionState::Funded {
            let mut s = state.clone();
            s.a_emitted = true;
            s.chans[CHAN_A_TO_X].push_back(MessageKind::NewDataNotice);
            out.push(s);
        }
        // A withdraws released funds.
        if !state.a_withdrew && state.escrow == Some(EscrowState::Releasable) {
            let mut s = state.clone();
            s.a_withdrew = true;
            s.escrow = Some(EscrowState::Withdrawn);
            s.bal_a += cfg.deposit;
            s.chans[CHAN_LEDGER_TO_R].push_back(MessageKind::WithdrawDone);
            out.push(s);
        }
        // A timeout may fire in any non-terminal state.
        if cfg.allow_timeout && !state.timeout_fired && !state.session.is_terminal() {
            let mut s = state.clone();
            s.timeout_fired = true;
            relayer_apply(cfg, &mut s, MessageKind::Timeout);
            out.push(s);
        }

        // Deliver the head of any nonempty channel.
        for chan in 0..CHANNELS {
            let Some(&kind) = state.chans[chan].front() else {
                continue;
            };
            let mut s = state.clone();
            s.chans[chan].pop_front();
            match chan {
                CHAN_A_TO_X => {
                    s.chans[CHAN_X_TO_R].push_back(MessageKind::ProofSubmitted);
                }
                CHAN_R_TO_LEDGER => {
                    let sufficient =
                        s.escrow == Some(EscrowState::Open) && cfg.deposit >= cfg.required;
                    let reply = if sufficient {
                        MessageKind::FundsOk
                    } else {
                        MessageKind::FundsShort
                    };
                    s.chans[CHAN_LEDGER_TO_R].push_back(reply);
                }
                CHAN_R_TO_X => match kind {
                    MessageKind::DataTransfer => {
                        s.chans[CHAN_X_TO_R].push_back(MessageKind::DataTransfer);
                    }
                    _ => {}
                },
                CHAN_R_TO_Y => match kind {
                    MessageKind::DataDelivery => {
                        s.chans[CHAN_Y_TO_R].push_back(MessageKind::DataDelivery);
                        s.chans[CHAN_Y_TO_R]
                            .push_back(MessageKind::VerifyResult { accept: cfg.proof_valid });
                    }
                    MessageKind::Ack => {
                        s.chans[CHAN_Y_TO_R].push_back(MessageKind::Ack);
                        s.chans[CHAN_Y_TO_R].push_back(MessageKind::ReleaseCmd);
                    }
                    _ => {}
                },
                CHAN_X_TO_R | CHAN_LEDGER_TO_R | CHAN_Y_TO_R => {
                    relayer_apply(cfg, &mut s, kind);
                }
                _ => {}
            }
            out.push(s);
        }
        out
    }

    /// Breadth-first exploration of every reachable state under FIFO
    /// delivery, with per-state invariant checks.
    pub fn explore(cfg: &ModelConfig) -> ModelReport {
        let initial = ModelState {
            session: SessionState::Init,
            escrow: None,
            bal_a: 0,
            bal_b: cfg.initial_balance_b,
            chans: Default::default(),
            b_deposited: false,
            a_emitted: false,
            a_withdrew: false,
            timeout_fired: false,
            saw_proof_verified: false,
            saw_acked: false,
        };
        let total = initial.bal_a + initial.bal_b;

        let mut seen: HashSet<ModelState> = HashSet::new();
        let mut frontier = VecDeque::new();
        seen.insert(initial.clone());
        frontier.push_back(initial);

        let mut report = ModelReport {
            states_explored: 0,
            reached_withdrawn: false,
            reached_failed: false,
            terminal_dead_ends: 0,
            non_terminal_dead_ends: 0,
            violations: Vec::new(),
        };

        while let Some(state) = frontier.pop_front() {
            report.states_explored += 1;

            let conserved = state.bal_a + state.bal_b + held(&state.escrow, cfg.deposit);
            if conserved != total {
                report.violations.push(format!(
                    "conservation broken in {}: {conserved} != {total}",
                    state.session
                ));
            }
            match state.session {
                SessionState::Withdrawn => {
                    report.reached_withdrawn = true;
                    if !state.saw_proof_verified || !state.saw_acked {
                        report.violations.push(
                            "WITHDRAWN reached without PROOF_VERIFIED and ACKED".into(),
                        );
                    }
                }
                SessionState::Failed(_) => report.reached_failed = true,
                _ => {}
            }

            let next = successors(cfg, &state);
            if next.is_empty() {
                if state.session.is_terminal() {
                    report.terminal_dead_ends += 1;
                } else {
                    report.non_terminal_dead_ends += 1;
                }
            }
            for s in next {
                if seen.insert(s.clone()) {
                    frontier.push_back(s);
                }
            }
        }
        report
    }

    /// The configurations the acceptance suite sweeps: happy, underfunded,
    /// invalid proof, and each with timeouts allowed.
    pub fn standard_configs() -> Vec<ModelConfig> {
        let mut out = Vec::new();
        for (deposit, required) in [(100u64, 100u64), (50, 100)] {
            for proof_valid in [true, false] {
                for allow_timeout in [false, true] {
                    out.push(ModelConfig {
                        deposit,
                        required,
                        proof_valid,
                        allow_timeout,
                        initial_balance_b: 100,
                    });
                }
            }
        }
        out
    }

    /// Convenience: a failure reason the model can reach, for tests.
    pub fn failed(reason: FailReason) -> SessionState {
        SessionState::Failed(reason)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_session(state: SessionState) -> Session {
        Session {
            id: "s1".into(),
            device_a: "dev-a".into(),
            device_b: "dev-b".into(),
            node_x: "node-x".into(),
            node_y: "node-y".into(),
            contract_x: "cx".into(),
            contract_y: "cy".into(),
            required_amount: 100,
            state,
            timeout_ticks: DEFAULT_TIMEOUT,
        }
    }

    fn msg(kind: MessageKind) -> ProtocolMessage {
        ProtocolMessage {
            kind,
            session: "s1".into(),
            sender: "x".into(),
            recipient: RELAYER.into(),
            payload_digest: [0u8; 32],
        }
    }

    #[test]
    fn proof_submission_queries_funds() {
        let s = test_session(SessionState::Funded);
        let out = step_session(&s, &msg(MessageKind::ProofSubmitted)).unwrap();
        assert_eq!(out.session.state, SessionState::ProofSubmitted);
        assert_eq!(out.emits.len(), 1);
        assert_eq!(out.emits[0].kind, MessageKind::FundsQuery);
        assert_eq!(out.emits[0].recipient, LEDGER);
    }

    #[test]
    fn rejected_verification_fails_and_refunds() {
        let s = test_session(SessionState::DataDelivered);
        let out = step_session(&s, &msg(MessageKind::VerifyResult { accept: false })).unwrap();
        assert_eq!(out.session.state, SessionState::Failed(FailReason::Proof));
        assert_eq!(out.ledger_ops, vec![LedgerOp::Refund]);
    }

    #[test]
    fn terminal_state_rejects_everything() {
        let s = test_session(SessionState::Withdrawn);
        for kind in [
            MessageKind::Deposit,
            MessageKind::ProofSubmitted,
            MessageKind::Timeout,
            MessageKind::WithdrawDone,
        ] {
            let err = step_session(&s, &msg(kind)).unwrap_err();
            assert_eq!(err.state, SessionState::Withdrawn);
        }
    }

    #[test]
    fn full_happy_sequence_via_step() {
        use MessageKind as K;
        use SessionState as S;
        let mut s = test_session(S::Init);
        let script = [
            (K::Deposit, S::Funded),
            (K::ProofSubmitted, S::ProofSubmitted),
            (K::FundsOk, S::FundsVerified),
            (K::DataTransfer, S::DataAtRelayer),
            (K::DataDelivery, S::DataDelivered),
            (K::VerifyResult { accept: true }, S::ProofVerified),
            (K::Ack, S::Acked),
            (K::ReleaseCmd, S::ReleaseAuthorized),
            (K::ReleaseDone, S::FundsReleased),
            (K::WithdrawDone, S::Withdrawn),
        ];
        for (kind, expect) in script {
            let out = step_session(&s, &msg(kind)).unwrap();
            s = out.session;
            assert_eq!(s.state, expect);
        }
        assert!(s.state.is_terminal());
    }

    #[test]
    fn timeout_fails_from_any_live_state() {
        for state in [
            SessionState::Init,
            SessionState::Funded,
            SessionState::DataAtRelayer,
            SessionState::FundsReleased,
        ] {
            let s = test_session(state);
            let out = step_session(&s, &msg(MessageKind::Timeout)).unwrap();
            assert_eq!(out.session.state, SessionState::Failed(FailReason::Timeout));
        }
    }

    #[test]
    fn model_happy_config_safe() {
        let report = model::explore(&model::ModelConfig::default());
        assert!(report.violations.is_empty(), "{:?}", report.violations);
        assert!(report.reached_withdrawn);
        assert_eq!(report.non_terminal_dead_ends, 0);
        assert!(report.states_explored < 10_000, "{}", report.states_explored);
    }

    #[test]
    fn model_underfunded_fails_and_refunds() {
        let cfg = model::ModelConfig {
            deposit: 50,
            required: 100,
            ..model::ModelConfig::default()
        };
        let report = model::explore(&cfg);
        assert!(report.violations.is_empty(), "{:?}", report.violations);
        assert!(!report.reached_withdrawn);
        assert!(report.reached_failed);
    }

    #[test]
    fn model_bad_proof_never_pays() {
        let cfg = model::ModelConfig { proof_valid: false, ..model::ModelConfig::default() };
        let report = model::explore(&cfg);
        assert!(report.violations.is_empty(), "{:?}", report.violations);
        assert!(!report.reached_withdrawn);
        assert!(report.reached_failed);
    }

    #[test]
    fn model_timeouts_stay_safe() {
        let cfg = model::ModelConfig { allow_timeout: true, ..model::ModelConfig::default() };
        let report = model::explore(&cfg);
        assert!(report.violations.is_empty(), "{:?}", report.violations);
        assert!(report.reached_withdrawn);
        assert!(report.reached_failed);
    }
}
