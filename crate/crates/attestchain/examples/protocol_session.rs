//! The session state machine step by step, and the exhaustive model check
//! behind the protocol's safety argument.
//!
//! ```bash
//! cargo run -p attestchain --example protocol_session
//! ```

use attestchain::protocol::{
    model, step_session, MessageKind, ProtocolMessage, Session, SessionState, DEFAULT_TIMEOUT,
    RELAYER,
};

fn main() {
    let mut session = Session {
        id: "s1".into(),
        device_a: "car-a".into(),
        device_b: "hub-b".into(),
        node_x: "node-x".into(),
        node_y: "node-y".into(),
        contract_x: "contract-x".into(),
        contract_y: "contract-y".into(),
        required_amount: 100,
        state: SessionState::Init,
        timeout_ticks: DEFAULT_TIMEOUT,
    };
    let msg = |kind: MessageKind| ProtocolMessage {
        kind,
        session: "s1".into(),
        sender: "example".into(),
        recipient: RELAYER.into(),
        payload_digest: [0u8; 32],
    };

    println!("happy path, one event per step:");
    let script = [
        MessageKind::Deposit,
        MessageKind::ProofSubmitted,
        MessageKind::FundsOk,
        MessageKind::DataTransfer,
        MessageKind::DataDelivery,
        MessageKind::VerifyResult { accept: true },
        MessageKind::Ack,
        MessageKind::ReleaseCmd,
        MessageKind::ReleaseDone,
        MessageKind::WithdrawDone,
    ];
    for kind in script {
        let outcome = step_session(&session, &msg(kind)).unwrap();
        session = outcome.session;
        let emitted: Vec<String> = outcome
            .emits
            .iter()
            .map(|m| format!("{} -> {}", m.kind, m.recipient))
            .collect();
        println!(
            "  {:<24} => {:<19} emits [{}] ledger {:?}",
            kind.to_string(),
            session.state.to_string(),
            emitted.join(", "),
            outcome.ledger_ops
        );
    }

    // a withdrawn session accepts nothing further
    let err = step_session(&session, &msg(MessageKind::Deposit)).unwrap_err();
    println!("  after WITHDRAWN: {err}");

    println!("\nexhaustive interleaving check over the standard configs:");
    for cfg in model::standard_configs() {
        let report = model::explore(&cfg);
        println!(
            "  deposit {:>3}/{:>3}, proof {:>5}, timeout {:>5}: {:>4} states, withdrawn {}, failed {}, violations {}",
            cfg.deposit,
            cfg.required,
            cfg.proof_valid,
            cfg.allow_timeout,
            report.states_explored,
            report.reached_withdrawn,
            report.reached_failed,
            report.violations.len()
        );
    }
}
