//! Merkle commitments to polynomial evaluations, with per-point openings.
//!
//! ```bash
//! cargo run -p attestchain --example commitments
//! ```

use attestchain::commit::{commit, open, verify_opening, Opening};
use attestchain::field::{FieldElement, Polynomial, SubgroupDomain};

fn main() {
    let p = 17;
    let domain = SubgroupDomain::new(p, 8).unwrap();
    // q(X) = X^2 + 1
    let poly = Polynomial::new(vec![
        FieldElement::one(p),
        FieldElement::zero(p),
        FieldElement::one(p),
    ]);

    let com = commit(&poly, &domain).unwrap();
    println!("committed to {poly:?} over an order-8 domain");
    println!("root: {}", hex::encode(com.root()));

    // open a few points and verify them against the root
    for j in [1u64, 4, 8] {
        let opening = open(&poly, &domain, j).unwrap();
        println!(
            "open j={j}: value {}, path {} digests, verifies: {}",
            opening.value(),
            opening.path().len(),
            verify_opening(&com, &opening)
        );
    }

    // a forged value cannot reproduce the root
    let honest = open(&poly, &domain, 3).unwrap();
    let forged = Opening::from_parts(
        honest.index(),
        honest.value().add(FieldElement::one(p)),
        honest.path().to_vec(),
    );
    println!("forged value verifies: {}", verify_opening(&com, &forged));

    // neither can an opening moved to a different leaf
    let moved = Opening::from_parts(5, honest.value(), honest.path().to_vec());
    println!("relocated opening verifies: {}", verify_opening(&com, &moved));

    // the commitment is to evaluations: representation does not matter
    let same_on_domain = Polynomial::new(vec![
        FieldElement::one(p),
        FieldElement::zero(p),
        FieldElement::one(p),
        FieldElement::zero(p),
    ]);
    let again = commit(&same_on_domain, &domain).unwrap();
    println!("same evaluations, same root: {}", again == com);
}
