//! Committing to a circuit's matrices and proving their shape: the first
//! two strictly lower triangular, the third diagonal.
//!
//! Each matrix becomes three polynomials over the entry domain — row, col,
//! val — with row(gamma^j) = omega^(r_j) and so on. The verifier opens
//! every entry triple against the commitments and compares discrete logs.
//!
//! ```bash
//! cargo run -p attestchain --example structure_proofs
//! ```

use attestchain::fc::{prove_structure, setup, verify_structure};
use attestchain::field::FieldElement;
use attestchain::r1cs::{MatrixEntry, R1csInstance, SparseMatrix};

fn single_entry(p: u64, row: u32, col: u32) -> R1csInstance {
    let m = SparseMatrix::new(
        4,
        vec![MatrixEntry { row, col, value: FieldElement::new(5, p) }],
    )
    .unwrap();
    R1csInstance::new(p, 4, 0, 1, m, SparseMatrix::empty(4), SparseMatrix::empty(4)).unwrap()
}

fn main() {
    let p = 17;

    // honest case: entry (3, 2) sits strictly below the diagonal
    let inst = single_entry(p, 3, 2);
    let (pp, pk, vk) = setup(128, &inst).unwrap();
    println!(
        "setup: wire domain order {} (omega = {}), entry domain order {} (gamma = {})",
        pp.n_hat(),
        pp.wire_domain().generator(),
        pp.m_hat(),
        pp.entry_domain().generator()
    );
    let (pi_a, pi_b, pi_c) = prove_structure(&pk).unwrap();
    let first = &pi_a.openings()[0];
    println!(
        "first entry opens to row {} = omega^3, col {} = omega^2, val {}",
        first.row.value(),
        first.col.value(),
        first.val.value()
    );
    println!("verdict: {:?}", verify_structure(&vk, &pi_a, &pi_b, &pi_c));

    // entry above the diagonal: honest proving still ends in rejection
    let bad = single_entry(p, 2, 3);
    let (_, pk, vk) = setup(128, &bad).unwrap();
    let (pi_a, pi_b, pi_c) = prove_structure(&pk).unwrap();
    println!("\nupper-triangular entry (2,3):");
    println!("verdict: {:?}", verify_structure(&vk, &pi_a, &pi_b, &pi_c));

    // a diagonal entry fails the strictly-lower claim too
    let diag = single_entry(p, 3, 3);
    let (_, pk, vk) = setup(128, &diag).unwrap();
    let (pi_a, pi_b, pi_c) = prove_structure(&pk).unwrap();
    println!("\ndiagonal entry (3,3) under a strictly-lower claim:");
    println!("verdict: {:?}", verify_structure(&vk, &pi_a, &pi_b, &pi_c));
}
