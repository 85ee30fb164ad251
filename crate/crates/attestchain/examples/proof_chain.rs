//! Chaining device executions: each step's output feeds the next step's
//! input, and the whole chain verifies end to end.
//!
//! ```bash
//! cargo run -p attestchain --example proof_chain
//! ```

use std::collections::BTreeMap;

use attestchain::chain::{ChainProof, ChainStep};
use attestchain::fc::{prove_execution, prove_structure, setup};
use attestchain::field::FieldElement;
use attestchain::r1cs::{build_program, GateProgram};

fn main() {
    let p = 17;
    let program = GateProgram::parse("inputs 1\nw2 = mul w1 w1\noutput w2").unwrap();
    let compiled = build_program(&program, p).unwrap();
    let (_, pk, vk) = setup(128, compiled.instance()).unwrap();
    let mut registry = BTreeMap::new();
    registry.insert(*vk.digest(), vk.clone());

    // three squaring devices in a row: 3 -> 9 -> 13 -> 16 mod 17
    let mut chain = ChainProof::new();
    let mut cur = FieldElement::new(3, p);
    for index in 1..=3 {
        let (y, z) = compiled.assignment(&[cur]).unwrap();
        let (pi_a, pi_b, pi_c) = prove_structure(&pk).unwrap();
        let execution = prove_execution(&pk, &z).unwrap();
        chain
            .extend(ChainStep {
                index,
                vk_digest: *vk.digest(),
                inputs: vec![cur],
                output: y,
                pi_a,
                pi_b,
                pi_c,
                execution,
                link_position: 1,
            })
            .unwrap();
        println!("step {index}: {cur} -> {y}");
        cur = y;
    }

    println!("final claim: {:?}", chain.final_claim());
    println!("chain digest: {}", hex::encode(chain.digest()));
    println!("verify: {:?}", chain.verify(&registry).unwrap());

    // tamper with the middle output: the chain no longer verifies
    let mut tampered = chain.clone();
    tampered.steps_mut()[1].output = FieldElement::new(12, p);
    println!("\ntampered y_2 = 12:");
    println!("verify: {:?}", tampered.verify(&registry).unwrap());

    // the serialized form round-trips and keeps the same digest
    let bytes = chain.to_bytes();
    let back = ChainProof::from_bytes(&bytes, p).unwrap();
    println!("\nserialized {} bytes, digest stable: {}", bytes.len(), back.digest() == chain.digest());
}
