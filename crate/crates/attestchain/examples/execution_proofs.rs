//! Proving that committed firmware accepted a concrete input/output pair.
//!
//! The prover commits to the assignment over the wire domain and opens
//! every position the constraint rows touch; the verifier rebuilds the
//! matrices from the committed entry openings and replays each row
//! equation on the opened values.
//!
//! ```bash
//! cargo run -p attestchain --example execution_proofs
//! ```

use attestchain::fc::{prove_execution, setup, verify_execution};
use attestchain::field::FieldElement;
use attestchain::r1cs::{build_program, GateProgram};

fn main() {
    let p = 17;
    let program = GateProgram::parse("inputs 1\nw2 = mul w1 w1\noutput w2").unwrap();
    let compiled = build_program(&program, p).unwrap();
    let (_, pk, vk) = setup(128, compiled.instance()).unwrap();
    let digest = compiled.instance().digest();

    let x = FieldElement::new(3, p);
    let (y, z) = compiled.assignment(&[x]).unwrap();
    println!("firmware: y = x^2, executed on x = {x}: y = {y}");

    let proof = prove_execution(&pk, &z).unwrap();
    println!(
        "execution proof: {} assignment openings, claimed publics {:?}",
        proof.claimed_public().len() + 1,
        proof.claimed_public()
    );

    let verdict = verify_execution(&vk, &digest, &proof, &[x, y]);
    println!("verify (x=3, y=9): {verdict:?}");

    // claiming a different output is rejected
    let verdict = verify_execution(&vk, &digest, &proof, &[x, FieldElement::new(10, p)]);
    println!("verify (x=3, y=10): {verdict:?}");

    // an unsatisfying assignment is refused at proving time
    let bad = attestchain::r1cs::Assignment::new(vec![
        FieldElement::one(p),
        FieldElement::new(3, p),
        FieldElement::new(10, p),
    ])
    .unwrap();
    println!("prove on forged z: {:?}", prove_execution(&pk, &bad).unwrap_err());

    // binding: the proof names its key; a foreign key rejects
    let other_program = GateProgram::parse("inputs 1\nw2 = mul w1 w1\nw3 = mul w2 w1\noutput w3").unwrap();
    let other = build_program(&other_program, p).unwrap();
    let (_, _, other_vk) = setup(128, other.instance()).unwrap();
    let verdict = verify_execution(&other_vk, &digest, &proof, &[x, y]);
    println!("verify against a different key: {verdict:?}");
}
