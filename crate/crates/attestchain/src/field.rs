//! Prime-field arithmetic, multiplicative-subgroup domains, and dense
//! polynomials with Lagrange interpolation.
//!
//! Elements carry their modulus at runtime so that small hand-checkable
//! fields (`p = 17` throughout the unit tests) and the default runtime
//! field coexist. The default modulus is `p = 2^64 - 2^32 + 1`, whose
//! multiplicative group has order `2^32 * (2^32 - 1)`: subgroups of every
//! power-of-two order up to `2^32` exist.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Default runtime modulus, `2^64 - 2^32 + 1`.
pub const DEFAULT_MODULUS: u64 = 0xffff_ffff_0000_0001;

/// Largest subgroup order for which we build power tables. Domains beyond
/// this are outside the intended scale of this crate.
pub const MAX_SUBGROUP_ORDER: u64 = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    /// No usable subgroup of the requested order exists in this field.
    #[error("no subgroup of order {order} available in F_{modulus}")]
    DomainUnavailable { modulus: u64, order: u64 },
    /// A value vector did not match the domain it was paired with.
    #[error("expected {expected} values, got {got}")]
    ArityError { expected: usize, got: usize },
    /// The element is not a power of the given base.
    #[error("element {elem} is not in the subgroup generated by {base}")]
    NotInSubgroup { base: u64, elem: u64 },
}

/// An element of the prime field `F_p`. The modulus travels with the value;
/// mixing elements of different fields in one operation panics.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u64,
    modulus: u64,
}

impl FieldElement {
    pub fn new(value: u64, modulus: u64) -> Self {
        debug_assert!(modulus >= 2);
        Self { value: value % modulus, modulus }
    }

    pub fn zero(modulus: u64) -> Self {
        Self { value: 0, modulus }
    }

    pub fn one(modulus: u64) -> Self {
        Self::new(1, modulus)
    }

    /// Maps a signed integer into the field (negative values wrap mod p).
    pub fn from_i64(value: i64, modulus: u64) -> Self {
        Self::new((value as i128).rem_euclid(modulus as i128) as u64, modulus)
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    fn same_field(&self, other: &Self) {
        assert_eq!(
            self.modulus, other.modulus,
            "field elements from different moduli"
        );
    }

    pub fn add(self, rhs: Self) -> Self {
        self.same_field(&rhs);
        let s = (self.value as u128 + rhs.value as u128) % self.modulus as u128;
        Self { value: s as u64, modulus: self.modulus }
    }

    pub fn sub(self, rhs: Self) -> Self {
        self.same_field(&rhs);
        let m = self.modulus as u128;
        let s = (self.value as u128 + m - rhs.value as u128) % m;
        Self { value: s as u64, modulus: self.modulus }
    }

    pub fn mul(self, rhs: Self) -> Self {
        self.same_field(&rhs);
        let p = (self.value as u128 * rhs.value as u128) % self.modulus as u128;
        Self { value: p as u64, modulus: self.modulus }
    }

    pub fn neg(self) -> Self {
        if self.value == 0 {
            self
        } else {
            Self { value: self.modulus - self.value, modulus: self.modulus }
        }
    }

    /// Exponentiation by squaring.
    pub fn pow(self, mut exp: u64) -> Self {
        let mut base = self;
        let mut acc = Self::one(self.modulus);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat.
    ///
    /// # Panics
    /// Panics on zero.
    pub fn inv(self) -> Self {
        assert!(self.value != 0, "cannot invert zero");
        self.pow(self.modulus - 2)
    }

    /// Canonical encoding: 8-byte big-endian value.
    pub fn to_bytes(&self) -> [u8; 8] {
        self.value.to_be_bytes()
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl std::ops::Add for FieldElement {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        FieldElement::add(self, rhs)
    }
}

impl std::ops::Sub for FieldElement {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        FieldElement::sub(self, rhs)
    }
}

impl std::ops::Mul for FieldElement {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        FieldElement::mul(self, rhs)
    }
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut q = 2u64;
    while q * q <= n {
        if n % q == 0 {
            out.push(q);
            while n % q == 0 {
                n /= q;
            }
        }
        q += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

fn has_exact_order(elem: FieldElement, order: u64, order_factors: &[u64]) -> bool {
    if elem.pow(order).value() != 1 {
        return false;
    }
    order_factors
        .iter()
        .all(|&q| elem.pow(order / q).value() != 1)
}

/// Returns the generator of the order-`order` multiplicative subgroup of
/// `F_p` that is smallest by integer value. Deterministic for fixed
/// `(p, order)`.
pub fn subgroup_generator(modulus: u64, order: u64) -> Result<FieldElement, FieldError> {
    let unavailable = FieldError::DomainUnavailable { modulus, order };
    if order == 0 || (modulus - 1) % order != 0 || order > MAX_SUBGROUP_ORDER {
        return Err(unavailable);
    }
    if order == 1 {
        return Ok(FieldElement::one(modulus));
    }
    let factors = prime_factors(order);
    // Find any element of exact order, then walk the (unique) subgroup it
    // generates and take the smallest element of exact order.
    let cofactor = (modulus - 1) / order;
    let mut seed = None;
    for cand in 2..modulus {
        let e = FieldElement::new(cand, modulus).pow(cofactor);
        if has_exact_order(e, order, &factors) {
            seed = Some(e);
            break;
        }
    }
    let seed = seed.ok_or(unavailable)?;
    let mut best: Option<FieldElement> = None;
    let mut cur = seed;
    for j in 1..=order {
        let coprime = factors.iter().all(|&q| j % q != 0);
        if coprime && best.map_or(true, |b| cur.value() < b.value()) {
            best = Some(cur);
        }
        cur = cur.mul(seed);
    }
    // j = 1 is always coprime to order, so best is set.
    Ok(best.expect("subgroup walk found no generator"))
}

/// The points `g^1, g^2, ..., g^order` of a multiplicative subgroup, used as
/// interpolation and commitment domains. Indexing is 1-based throughout:
/// `element(j)` is `g^j`.
#[derive(Clone, PartialEq, Eq)]
pub struct SubgroupDomain {
    generator: FieldElement,
    order: u64,
    elements: Vec<FieldElement>,
}

impl SubgroupDomain {
    pub fn new(modulus: u64, order: u64) -> Result<Self, FieldError> {
        let generator = subgroup_generator(modulus, order)?;
        Ok(Self::from_generator(generator, order))
    }

    /// Builds a domain from a caller-supplied generator of exact order
    /// `order` (not re-verified beyond a debug check).
    pub fn from_generator(generator: FieldElement, order: u64) -> Self {
        let mut elements = Vec::with_capacity(order as usize);
        let mut cur = generator;
        for _ in 0..order {
            elements.push(cur);
            cur = cur.mul(generator);
        }
        debug_assert_eq!(elements.last().map(|e| e.value()), Some(1));
        Self { generator, order, elements }
    }

    pub fn generator(&self) -> FieldElement {
        self.generator
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn modulus(&self) -> u64 {
        self.generator.modulus()
    }

    /// `g^j` for `j` in `[1, order]`.
    pub fn element(&self, j: u64) -> FieldElement {
        assert!(j >= 1 && j <= self.order, "domain index out of range");
        self.elements[(j - 1) as usize]
    }

    pub fn elements(&self) -> &[FieldElement] {
        &self.elements
    }
}

impl fmt::Debug for SubgroupDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SubgroupDomain(g={}, order={}, p={})",
            self.generator.value(),
            self.order,
            self.modulus()
        )
    }
}

/// Discrete logarithm in a small subgroup via a power table: returns the
/// `k` in `[1, order]` with `base^k = elem`.
pub fn dlog_in_subgroup(
    base: FieldElement,
    elem: FieldElement,
    order: u64,
) -> Result<u64, FieldError> {
    DlogTable::new(base, order).lookup(elem)
}

/// Precomputed power table for repeated discrete-log queries against one
/// base.
pub struct DlogTable {
    base: FieldElement,
    table: HashMap<u64, u64>,
}

impl DlogTable {
    pub fn new(base: FieldElement, order: u64) -> Self {
        assert!(order >= 1 && order <= MAX_SUBGROUP_ORDER, "order out of range");
        let mut table = HashMap::with_capacity(order as usize);
        let mut cur = base;
        for k in 1..=order {
            table.entry(cur.value()).or_insert(k);
            cur = cur.mul(base);
        }
        Self { base, table }
    }

    pub fn lookup(&self, elem: FieldElement) -> Result<u64, FieldError> {
        self.table.get(&elem.value()).copied().ok_or(FieldError::NotInSubgroup {
            base: self.base.value(),
            elem: elem.value(),
        })
    }
}

/// Dense polynomial, coefficients low-degree first. The representation is
/// normalized: no trailing zero coefficients, and the zero polynomial is
/// the empty vector.
#[derive(Clone, PartialEq, Eq)]
pub struct Polynomial {
    coeffs: Vec<FieldElement>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<FieldElement>) -> Self {
        while coeffs.last().map_or(false, |c| c.is_zero()) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: FieldElement) -> Self {
        Self::new(vec![c])
    }

    pub fn coeffs(&self) -> &[FieldElement] {
        &self.coeffs
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Horner evaluation.
    pub fn evaluate(&self, x: FieldElement) -> FieldElement {
        let mut acc = FieldElement::zero(x.modulus());
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(x).add(*c);
        }
        acc
    }

    /// Canonical encoding: 4-byte big-endian coefficient count, then each
    /// coefficient as 8 big-endian bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 8 * self.coeffs.len());
        out.extend_from_slice(&(self.coeffs.len() as u32).to_be_bytes());
        for c in &self.coeffs {
            out.extend_from_slice(&c.to_bytes());
        }
        out
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| match i {
                0 => format!("{}", c),
                1 => format!("{}*X", c),
                _ => format!("{}*X^{}", c, i),
            })
            .collect();
        write!(f, "{}", terms.join(" + "))
    }
}

/// Lagrange interpolation over a subgroup domain: the unique polynomial of
/// degree `< order` with `q(g^j) = values[j-1]`.
pub fn interpolate(
    domain: &SubgroupDomain,
    values: &[FieldElement],
) -> Result<Polynomial, FieldError> {
    let d = domain.order() as usize;
    if values.len() != d {
        return Err(FieldError::ArityError { expected: d, got: values.len() });
    }
    let p = domain.modulus();
    let zero = FieldElement::zero(p);
    let one = FieldElement::one(p);

    // Master product M(X) = prod_j (X - x_j), degree d.
    let mut master = vec![zero; d + 1];
    master[0] = one;
    let mut len = 1;
    for x in domain.elements() {
        master[len] = master[len - 1];
        for k in (1..len).rev() {
            master[k] = master[k - 1].sub(master[k].mul(*x));
        }
        master[0] = zero.sub(master[0].mul(*x));
        len += 1;
    }

    let mut acc = vec![zero; d];
    let mut quotient = vec![zero; d];
    for (j, x_j) in domain.elements().iter().enumerate() {
        // Synthetic division: M(X) / (X - x_j), degree d - 1.
        let mut carry = master[d];
        for k in (0..d).rev() {
            quotient[k] = carry;
            carry = master[k].add(carry.mul(*x_j));
        }
        // quotient(x_j) = prod_{k != j} (x_j - x_k)
        let mut denom = zero;
        for c in quotient.iter().rev() {
            denom = denom.mul(*x_j).add(*c);
        }
        let scale = values[j].mul(denom.inv());
        for k in 0..d {
            acc[k] = acc[k].add(scale.mul(quotient[k]));
        }
    }
    Ok(Polynomial::new(acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const P: u64 = 17;

    fn fe(v: u64) -> FieldElement {
        FieldElement::new(v, P)
    }

    #[test]
    fn generator_order_four() {
        // 4, 16, 13, 1 cycles with period 4
        assert_eq!(subgroup_generator(P, 4).unwrap().value(), 4);
    }

    #[test]
    fn generator_order_eight() {
        // 2, 4, 8, 16, 15, 13, 9, 1 has period 8
        assert_eq!(subgroup_generator(P, 8).unwrap().value(), 2);
    }

    #[test]
    fn generator_identity_subgroup() {
        assert_eq!(subgroup_generator(P, 1).unwrap().value(), 1);
    }

    #[test]
    fn generator_rejects_bad_order() {
        assert_eq!(
            subgroup_generator(P, 3),
            Err(FieldError::DomainUnavailable { modulus: P, order: 3 })
        );
    }

    #[test]
    fn generator_has_exact_order() {
        for order in [1u64, 2, 4, 8, 16] {
            let g = subgroup_generator(P, order).unwrap();
            assert_eq!(g.pow(order).value(), 1);
            for k in 1..order {
                assert_ne!(g.pow(k).value(), 1, "order {order}, k {k}");
            }
        }
    }

    #[test]
    fn goldilocks_power_of_two_domains() {
        for log in [1u32, 2, 3, 5, 10] {
            let order = 1u64 << log;
            let d = SubgroupDomain::new(DEFAULT_MODULUS, order).unwrap();
            assert_eq!(d.generator().pow(order).value(), 1);
            assert_eq!(d.elements().len(), order as usize);
            let mut seen: std::collections::HashSet<u64> =
                d.elements().iter().map(|e| e.value()).collect();
            assert_eq!(seen.len(), order as usize, "elements pairwise distinct");
            assert!(seen.remove(&1));
        }
    }

    #[test]
    fn interpolate_constant() {
        let k = SubgroupDomain::new(P, 4).unwrap();
        let q = interpolate(&k, &[fe(5), fe(5), fe(5), fe(5)]).unwrap();
        assert_eq!(q, Polynomial::constant(fe(5)));
    }

    #[test]
    fn interpolate_order_one() {
        let d = SubgroupDomain::new(P, 1).unwrap();
        let q = interpolate(&d, &[fe(8)]).unwrap();
        assert_eq!(q, Polynomial::constant(fe(8)));
    }

    #[test]
    fn interpolate_identity_on_domain() {
        let k = SubgroupDomain::new(P, 4).unwrap();
        let values: Vec<_> = k.elements().to_vec();
        assert_eq!(values.iter().map(|e| e.value()).collect::<Vec<_>>(), [4, 16, 13, 1]);
        let q = interpolate(&k, &values).unwrap();
        for j in 1..=4 {
            assert_eq!(q.evaluate(k.element(j)), k.element(j));
        }
        // identity on the domain is literally X
        assert_eq!(q, Polynomial::new(vec![fe(0), fe(1)]));
    }

    #[test]
    fn interpolate_arity_mismatch() {
        let k = SubgroupDomain::new(P, 4).unwrap();
        assert_eq!(
            interpolate(&k, &[fe(1)]),
            Err(FieldError::ArityError { expected: 4, got: 1 })
        );
    }

    #[test]
    fn evaluate_examples() {
        // X^2 + 1 at 4 -> 16 + 1 = 0 mod 17
        let q = Polynomial::new(vec![fe(1), fe(0), fe(1)]);
        assert_eq!(q.evaluate(fe(4)), fe(0));
        assert_eq!(Polynomial::zero().evaluate(fe(9)), fe(0));
        assert_eq!(Polynomial::constant(fe(5)).evaluate(fe(13)), fe(5));
    }

    #[test]
    fn dlog_examples() {
        let base = fe(2);
        assert_eq!(dlog_in_subgroup(base, fe(8), 8), Ok(3));
        assert_eq!(dlog_in_subgroup(base, fe(1), 8), Ok(8));
        assert_eq!(
            dlog_in_subgroup(base, fe(3), 8),
            Err(FieldError::NotInSubgroup { base: 2, elem: 3 })
        );
    }

    #[test]
    fn dlog_wraps_past_order() {
        let base = fe(2);
        for k in 1..=16u64 {
            let expect = ((k - 1) % 8) + 1;
            assert_eq!(dlog_in_subgroup(base, base.pow(k), 8), Ok(expect));
        }
    }

    #[test]
    fn normalization_trims_leading_zeros() {
        let a = Polynomial::new(vec![fe(5), fe(0), fe(0)]);
        assert_eq!(a, Polynomial::constant(fe(5)));
        assert_eq!(a.degree(), Some(0));
        assert_eq!(Polynomial::zero().degree(), None);
    }

    proptest! {
        #[test]
        fn field_axioms_hold(a in 0u64..P, b in 0u64..P, c in 0u64..P) {
            let (a, b, c) = (fe(a), fe(b), fe(c));
            prop_assert_eq!(a.add(b), b.add(a));
            prop_assert_eq!(a.mul(b), b.mul(a));
            prop_assert_eq!(a.add(b).add(c), a.add(b.add(c)));
            prop_assert_eq!(a.mul(b).mul(c), a.mul(b.mul(c)));
            prop_assert_eq!(a.mul(b.add(c)), a.mul(b).add(a.mul(c)));
        }

        #[test]
        fn fermat_and_inverse(a in 1u64..P) {
            let a = fe(a);
            prop_assert_eq!(a.pow(P - 1).value(), 1);
            prop_assert_eq!(a.mul(a.inv()).value(), 1);
        }

        #[test]
        fn interpolation_round_trip(coeffs in proptest::collection::vec(0u64..P, 0..8)) {
            let q = Polynomial::new(coeffs.into_iter().map(fe).collect());
            let domain = SubgroupDomain::new(P, 8).unwrap();
            let values: Vec<_> = domain.elements().iter().map(|x| q.evaluate(*x)).collect();
            let back = interpolate(&domain, &values).unwrap();
            prop_assert_eq!(back, q);
        }

        #[test]
        fn goldilocks_inverse(a in 1u64..DEFAULT_MODULUS) {
            let a = FieldElement::new(a, DEFAULT_MODULUS);
            if !a.is_zero() {
                prop_assert_eq!(a.mul(a.inv()).value(), 1);
            }
        }
    }
}
