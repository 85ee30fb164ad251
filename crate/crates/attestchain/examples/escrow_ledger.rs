//! The simulated blockchain node: replicated hot storage with a hash
//! chain, node-local cold storage, and the token escrow lifecycle.
//!
//! ```bash
//! cargo run -p attestchain --example escrow_ledger
//! ```

use attestchain::fc::{prove_execution, prove_structure, setup, ProofBundle};
use attestchain::field::FieldElement;
use attestchain::ledger::Ledger;
use attestchain::r1cs::{build_program, GateProgram};

fn main() {
    let p = 17;
    let mut ledger = Ledger::new(p);
    ledger.register_node("node-x");
    ledger.register_node("node-y");
    ledger.open_account("dev-a", 0);
    ledger.open_account("dev-b", 500);
    let total = ledger.conservation_total();
    println!("accounts opened; total tokens: {total}");

    // escrow lifecycle: deposit, verify, release, withdraw
    ledger.deposit("s1", "dev-b", "dev-a", 100).unwrap();
    println!(
        "deposited 100 for s1; b = {}, funds sufficient for 80: {:?}",
        ledger.balance("dev-b").unwrap(),
        ledger.verify_funds("s1", 80).unwrap()
    );
    ledger.release("s1").unwrap();
    ledger.withdraw("s1", "dev-a").unwrap();
    println!(
        "released + withdrawn; a = {}, conserved: {}",
        ledger.balance("dev-a").unwrap(),
        ledger.conservation_total() == total
    );

    // a failed session refunds instead
    ledger.deposit("s2", "dev-b", "dev-a", 50).unwrap();
    ledger.refund("s2").unwrap();
    println!(
        "s2 refunded; b = {}, conserved: {}",
        ledger.balance("dev-b").unwrap(),
        ledger.conservation_total() == total
    );

    // proofs live in hot storage, sealed per tick, replicated to all nodes
    let program = GateProgram::parse("inputs 1\nw2 = mul w1 w1\noutput w2").unwrap();
    let compiled = build_program(&program, p).unwrap();
    let (_, pk, _) = setup(128, compiled.instance()).unwrap();
    let (pi_a, pi_b, pi_c) = prove_structure(&pk).unwrap();
    let (_, z) = compiled.assignment(&[FieldElement::new(3, p)]).unwrap();
    let execution = prove_execution(&pk, &z).unwrap();
    let proof_bytes = ProofBundle { pi_a, pi_b, pi_c, execution }.to_bytes();

    let (height, index) = ledger.append_proof("node-x", proof_bytes.clone()).unwrap();
    ledger.seal_tick();
    println!("\nproof stored at height {height}, index {index}");
    let read_back = ledger.read_proof("node-y", height, index).unwrap();
    println!(
        "read from the other node after replication: {} bytes, identical: {}",
        read_back.len(),
        read_back == proof_bytes.as_slice()
    );

    // cold data stays node-local and never enters a block
    ledger.store_cold("node-x", "dev-a", b"sensor payload".to_vec()).unwrap();
    println!(
        "cold data on node-x: {:?}, on node-y: {:?}",
        ledger.read_cold("node-x", "dev-a").map(|b| b.len()),
        ledger.read_cold("node-y", "dev-a")
    );

    println!("hash chain consistent: {}", ledger.chain_is_consistent());
    println!("\nledger dump:\n{}", ledger.dump());
}
