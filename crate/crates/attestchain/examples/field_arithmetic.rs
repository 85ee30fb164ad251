//! Prime-field arithmetic, subgroup domains, and interpolation.
//!
//! ```bash
//! cargo run -p attestchain --example field_arithmetic
//! ```

use attestchain::field::{
    dlog_in_subgroup, interpolate, subgroup_generator, FieldElement, Polynomial, SubgroupDomain,
    DEFAULT_MODULUS,
};

fn main() {
    // Everything hand-checkable happens in F_17.
    let p = 17;
    let a = FieldElement::new(12, p);
    let b = FieldElement::new(9, p);
    println!("in F_{p}: {a} + {b} = {}", a.add(b));
    println!("          {a} * {b} = {}", a.mul(b));
    println!("          {a}^-1    = {} (check: {})", a.inv(), a.mul(a.inv()));

    // The smallest generator of each subgroup order, deterministically.
    for order in [1u64, 2, 4, 8, 16] {
        let g = subgroup_generator(p, order).unwrap();
        println!("subgroup of order {order:2}: generator {g}");
    }

    // A domain is the point set g^1..g^order; interpolation is exact on it.
    let domain = SubgroupDomain::new(p, 4).unwrap();
    let values: Vec<FieldElement> = [3u64, 14, 15, 9]
        .into_iter()
        .map(|v| FieldElement::new(v, p))
        .collect();
    let poly = interpolate(&domain, &values).unwrap();
    println!("interpolated {poly:?} through {values:?}");
    for (j, expect) in values.iter().enumerate() {
        let x = domain.element(j as u64 + 1);
        assert_eq!(poly.evaluate(x), *expect);
        println!("  q({x}) = {}", poly.evaluate(x));
    }

    // Discrete logs in a small subgroup come from a power table.
    let base = FieldElement::new(2, p);
    for k in [1u64, 3, 8] {
        let elem = base.pow(k);
        println!("dlog_2({elem}) = {} in the order-8 subgroup", dlog_in_subgroup(base, elem, 8).unwrap());
    }

    // The runtime field: 2^64 - 2^32 + 1, power-of-two subgroups to 2^32.
    let big = SubgroupDomain::new(DEFAULT_MODULUS, 1 << 10).unwrap();
    println!(
        "runtime field 2^64-2^32+1: order-{} domain generated by {}",
        big.order(),
        big.generator()
    );
    let _ = Polynomial::zero();
}
