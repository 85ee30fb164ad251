//! Sparse constraint systems in a triangular normal form, plus a
//! gate-program builder that compiles straight-line firmware arithmetic
//! into that form.
//!
//! The satisfaction relation is `(A z) o (B z) = C z` with `o` the
//! component-wise product. Systems produced by [`build_program`] keep `A`
//! and `B` strictly lower triangular and `C` diagonal: every gate reads
//! only earlier wires, row 1 is a constant-one wire, and linear gates
//! (add, const-mul) fold into the rows that consume them instead of
//! allocating wires of their own.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::field::FieldElement;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum R1csError {
    #[error("gate {gate} references wire {wire}, which is not defined yet")]
    NonCausalGate { gate: usize, wire: u32 },
    #[error("expected {expected} values, got {got}")]
    ArityError { expected: usize, got: usize },
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("assignment must start with the constant 1")]
    MissingConstantWire,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// One nonzero entry of a sparse matrix. Row and column are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixEntry {
    pub row: u32,
    pub col: u32,
    pub value: FieldElement,
}

/// Sparse square matrix over the field, entries sorted by `(row, col)` —
/// the canonical order used for hashing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseMatrix {
    dim: u32,
    entries: Vec<MatrixEntry>,
}

impl SparseMatrix {
    pub fn new(dim: u32, mut entries: Vec<MatrixEntry>) -> Result<Self, R1csError> {
        for e in &entries {
            if e.row < 1 || e.row > dim || e.col < 1 || e.col > dim {
                return Err(R1csError::InvalidMatrix(format!(
                    "entry ({}, {}) out of bounds for dim {}",
                    e.row, e.col, dim
                )));
            }
            if e.value.is_zero() {
                return Err(R1csError::InvalidMatrix(format!(
                    "zero value stored at ({}, {})",
                    e.row, e.col
                )));
            }
        }
        entries.sort_by_key(|e| (e.row, e.col));
        for pair in entries.windows(2) {
            if pair[0].row == pair[1].row && pair[0].col == pair[1].col {
                return Err(R1csError::InvalidMatrix(format!(
                    "duplicate entry at ({}, {})",
                    pair[0].row, pair[0].col
                )));
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn empty(dim: u32) -> Self {
        Self { dim, entries: Vec::new() }
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    /// Canonical `(row, col)`-sorted entry list.
    pub fn nonzero_entries(&self) -> &[MatrixEntry] {
        &self.entries
    }

    pub fn is_strictly_lower_triangular(&self) -> bool {
        self.entries.iter().all(|e| e.row > e.col)
    }

    pub fn is_diagonal(&self) -> bool {
        self.entries.iter().all(|e| e.row == e.col)
    }

    /// Entries of one row, in column order.
    pub fn row(&self, row: u32) -> impl Iterator<Item = &MatrixEntry> {
        self.entries.iter().filter(move |e| e.row == row)
    }

    /// Canonical encoding: dim and entry count as 4 big-endian bytes each,
    /// then each entry as row (4) | col (4) | value (8).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 16 * self.entries.len());
        out.extend_from_slice(&self.dim.to_be_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_be_bytes());
        for e in &self.entries {
            out.extend_from_slice(&e.row.to_be_bytes());
            out.extend_from_slice(&e.col.to_be_bytes());
            out.extend_from_slice(&e.value.to_bytes());
        }
        out
    }
}

/// A constraint system instance: three `n x n` sparse matrices plus the
/// layout of the assignment vector. Position 1 of `z` is the constant-one
/// wire, positions `2..=num_inputs+1` hold the public inputs, and
/// `output_wire` holds the declared output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct R1csInstance {
    modulus: u64,
    n: u32,
    num_inputs: u32,
    output_wire: u32,
    a: SparseMatrix,
    b: SparseMatrix,
    c: SparseMatrix,
}

impl R1csInstance {
    pub fn new(
        modulus: u64,
        n: u32,
        num_inputs: u32,
        output_wire: u32,
        a: SparseMatrix,
        b: SparseMatrix,
        c: SparseMatrix,
    ) -> Result<Self, R1csError> {
        if a.dim() != n || b.dim() != n || c.dim() != n {
            return Err(R1csError::InvalidMatrix("matrix dim differs from n".into()));
        }
        if n < 1 || num_inputs + 1 > n || output_wire < 1 || output_wire > n {
            return Err(R1csError::InvalidMatrix("inconsistent wire layout".into()));
        }
        Ok(Self { modulus, n, num_inputs, output_wire, a, b, c })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn num_inputs(&self) -> u32 {
        self.num_inputs
    }

    pub fn output_wire(&self) -> u32 {
        self.output_wire
    }

    /// Count of public positions excluding the constant wire: the inputs
    /// plus the declared output.
    pub fn num_public(&self) -> u32 {
        self.num_inputs + 1
    }

    pub fn a(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn b(&self) -> &SparseMatrix {
        &self.b
    }

    pub fn c(&self) -> &SparseMatrix {
        &self.c
    }

    /// All public positions of `z`, sorted: the constant wire, the inputs,
    /// and the output wire.
    pub fn public_positions(&self) -> Vec<u32> {
        let mut out: Vec<u32> = (1..=self.num_inputs + 1).collect();
        if !out.contains(&self.output_wire) {
            out.push(self.output_wire);
        }
        out.sort_unstable();
        out
    }

    /// Largest per-matrix nonzero-entry count.
    pub fn max_nonzero(&self) -> usize {
        self.a
            .nonzero_entries()
            .len()
            .max(self.b.nonzero_entries().len())
            .max(self.c.nonzero_entries().len())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.modulus.to_be_bytes());
        out.extend_from_slice(&self.n.to_be_bytes());
        out.extend_from_slice(&self.num_inputs.to_be_bytes());
        out.extend_from_slice(&self.output_wire.to_be_bytes());
        out.extend_from_slice(&self.a.to_bytes());
        out.extend_from_slice(&self.b.to_bytes());
        out.extend_from_slice(&self.c.to_bytes());
        out
    }

    /// Digest of the canonical encoding, used to pin a circuit identity.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.to_bytes());
        h.finalize().into()
    }
}

/// A full assignment `z`. Position 1 (index 0) must be the constant 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    values: Vec<FieldElement>,
}

impl Assignment {
    pub fn new(values: Vec<FieldElement>) -> Result<Self, R1csError> {
        match values.first() {
            Some(v) if v.value() == 1 => Ok(Self { values }),
            _ => Err(R1csError::MissingConstantWire),
        }
    }

    pub fn values(&self) -> &[FieldElement] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// 1-based access matching the row/column indexing.
    pub fn get(&self, position: u32) -> FieldElement {
        self.values[(position - 1) as usize]
    }
}

/// The brute-force satisfaction oracle on a raw value vector: checks
/// `(sum_c A[i,c] z_c) * (sum_c B[i,c] z_c) = sum_c C[i,c] z_c` row by
/// row, no shortcuts.
pub fn rows_satisfied(inst: &R1csInstance, z: &[FieldElement]) -> bool {
    let zero = FieldElement::zero(inst.modulus());
    let dot = |m: &SparseMatrix, row: u32| {
        m.row(row)
            .fold(zero, |acc, e| acc.add(e.value.mul(z[(e.col - 1) as usize])))
    };
    (1..=inst.n()).all(|i| {
        let a = dot(inst.a(), i);
        let b = dot(inst.b(), i);
        let c = dot(inst.c(), i);
        a.mul(b) == c
    })
}

/// Satisfaction check for a well-formed assignment.
pub fn is_satisfied(inst: &R1csInstance, z: &Assignment) -> Result<bool, R1csError> {
    if z.len() != inst.n() as usize {
        return Err(R1csError::ArityError { expected: inst.n() as usize, got: z.len() });
    }
    Ok(rows_satisfied(inst, z.values()))
}

/// One gate of a straight-line program. Wire 0 is the constant-one wire,
/// wires `1..=num_inputs` are the inputs, and gate `k` defines wire
/// `num_inputs + k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Mul { lhs: u32, rhs: u32 },
    Add { lhs: u32, rhs: u32 },
    /// Multiply a wire by a program constant.
    CMul { scalar: u64, src: u32 },
}

/// Straight-line firmware arithmetic: a fixed input arity, a gate list in
/// topological order, and one declared output wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateProgram {
    num_inputs: u32,
    gates: Vec<Gate>,
    output: u32,
}

impl GateProgram {
    pub fn new(num_inputs: u32, gates: Vec<Gate>, output: u32) -> Result<Self, R1csError> {
        for (k, gate) in gates.iter().enumerate() {
            let own = num_inputs + k as u32 + 1;
            let check = |wire: u32| {
                if wire >= own {
                    Err(R1csError::NonCausalGate { gate: k + 1, wire })
                } else {
                    Ok(())
                }
            };
            match gate {
                Gate::Mul { lhs, rhs } | Gate::Add { lhs, rhs } => {
                    check(*lhs)?;
                    check(*rhs)?;
                }
                Gate::CMul { src, .. } => check(*src)?,
            }
        }
        let last = num_inputs + gates.len() as u32;
        if output > last {
            return Err(R1csError::NonCausalGate { gate: gates.len(), wire: output });
        }
        Ok(Self { num_inputs, gates, output })
    }

    pub fn num_inputs(&self) -> u32 {
        self.num_inputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn output(&self) -> u32 {
        self.output
    }

    /// Forward execution: returns the value of every program wire
    /// (constant wire at index 0, then inputs, then gate outputs).
    pub fn execute(
        &self,
        inputs: &[FieldElement],
        modulus: u64,
    ) -> Result<Vec<FieldElement>, R1csError> {
        if inputs.len() != self.num_inputs as usize {
            return Err(R1csError::ArityError {
                expected: self.num_inputs as usize,
                got: inputs.len(),
            });
        }
        let mut wires = Vec::with_capacity(1 + self.num_inputs as usize + self.gates.len());
        wires.push(FieldElement::one(modulus));
        wires.extend_from_slice(inputs);
        for gate in &self.gates {
            let v = match gate {
                Gate::Mul { lhs, rhs } => wires[*lhs as usize].mul(wires[*rhs as usize]),
                Gate::Add { lhs, rhs } => wires[*lhs as usize].add(wires[*rhs as usize]),
                Gate::CMul { scalar, src } => {
                    FieldElement::new(*scalar, modulus).mul(wires[*src as usize])
                }
            };
            wires.push(v);
        }
        Ok(wires)
    }

    /// Parses the one-gate-per-line text format:
    ///
    /// ```text
    /// inputs 2
    /// w3 = mul w1 w2
    /// w4 = add w3 w0
    /// w5 = cmul 7 w4
    /// output w5
    /// ```
    ///
    /// `w0` is the constant-one wire. Blank lines and `#` comments are
    /// ignored.
    pub fn parse(text: &str) -> Result<Self, R1csError> {
        let err = |line: usize, msg: &str| R1csError::Parse { line, msg: msg.into() };
        let wire = |line: usize, tok: &str| -> Result<u32, R1csError> {
            tok.strip_prefix('w')
                .and_then(|t| t.parse::<u32>().ok())
                .ok_or_else(|| err(line, &format!("expected wire, got `{tok}`")))
        };
        let mut num_inputs: Option<u32> = None;
        let mut gates = Vec::new();
        let mut output: Option<u32> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = raw.split('#').next().unwrap_or("").trim();
            if stripped.is_empty() {
                continue;
            }
            let toks: Vec<&str> = stripped.split_whitespace().collect();
            match toks.as_slice() {
                ["inputs", count] => {
                    if num_inputs.is_some() {
                        return Err(err(line, "duplicate inputs header"));
                    }
                    num_inputs =
                        Some(count.parse().map_err(|_| err(line, "bad input count"))?);
                }
                ["output", w] => {
                    if output.is_some() {
                        return Err(err(line, "duplicate output footer"));
                    }
                    output = Some(wire(line, w)?);
                }
                [dst, "=", op, rest @ ..] => {
                    let ni = num_inputs.ok_or_else(|| err(line, "gate before inputs header"))?;
                    let expected = ni + gates.len() as u32 + 1;
                    let dst = wire(line, dst)?;
                    if dst != expected {
                        return Err(err(line, &format!("expected w{expected} on the left")));
                    }
                    let gate = match (*op, rest) {
                        ("mul", [l, r]) => Gate::Mul { lhs: wire(line, l)?, rhs: wire(line, r)? },
                        ("add", [l, r]) => Gate::Add { lhs: wire(line, l)?, rhs: wire(line, r)? },
                        ("cmul", [c, s]) => Gate::CMul {
                            scalar: c.parse().map_err(|_| err(line, "bad constant"))?,
                            src: wire(line, s)?,
                        },
                        _ => return Err(err(line, &format!("unknown gate `{stripped}`"))),
                    };
                    gates.push(gate);
                }
                _ => return Err(err(line, &format!("unrecognized line `{stripped}`"))),
            }
        }
        let num_inputs = num_inputs.ok_or_else(|| err(0, "missing inputs header"))?;
        let output = output.ok_or_else(|| err(0, "missing output footer"))?;
        GateProgram::new(num_inputs, gates, output)
    }
}

/// Linear combination over z positions: `position -> coefficient`.
type Combination = BTreeMap<u32, FieldElement>;

fn combine(into: &mut Combination, from: &Combination, scale: FieldElement) {
    for (pos, coeff) in from {
        let v = match into.get(pos) {
            Some(old) => old.add(scale.mul(*coeff)),
            None => scale.mul(*coeff),
        };
        if v.is_zero() {
            into.remove(pos);
        } else {
            into.insert(*pos, v);
        }
    }
}

/// A gate program compiled to a constraint system, retaining the wire
/// layout needed to turn a forward execution into a full assignment.
#[derive(Debug, Clone)]
pub struct CompiledProgram {
    program: GateProgram,
    instance: R1csInstance,
    /// Program wires (by id) that own a z position, in z order after the
    /// inputs: the mul-gate wires, then the materialized output if any.
    mul_wires: Vec<u32>,
    materialized_output: bool,
}

/// Compiles a gate program into the triangular normal form. Each mul gate
/// takes one constraint row; linear gates fold into the rows that consume
/// them. A declared output that is not a plain wire is materialized through
/// one pass-through row so it always has a z position.
pub fn build_program(program: &GateProgram, modulus: u64) -> Result<CompiledProgram, R1csError> {
    let one = FieldElement::one(modulus);
    let num_inputs = program.num_inputs();

    // The linear combination over z positions that reproduces each program
    // wire's value. w0 and the inputs are singletons.
    let mut combos: Vec<Combination> = Vec::new();
    combos.push(Combination::from([(1u32, one)]));
    for k in 0..num_inputs {
        combos.push(Combination::from([(k + 2, one)]));
    }

    let mut next_pos = num_inputs + 2;
    let mut mul_wires = Vec::new();
    let mut a_entries = Vec::new();
    let mut b_entries = Vec::new();
    let mut c_entries = Vec::new();

    let push_row = |row: u32,
                    lhs: &Combination,
                    rhs: &Combination,
                        a: &mut Vec<MatrixEntry>,
                        b: &mut Vec<MatrixEntry>,
                        c: &mut Vec<MatrixEntry>| {
        for (col, value) in lhs {
            a.push(MatrixEntry { row, col: *col, value: *value });
        }
        for (col, value) in rhs {
            b.push(MatrixEntry { row, col: *col, value: *value });
        }
        c.push(MatrixEntry { row, col: row, value: one });
    };

    for (k, gate) in program.gates().iter().enumerate() {
        let combo = match gate {
            Gate::Mul { lhs, rhs } => {
                let row = next_pos;
                next_pos += 1;
                mul_wires.push(num_inputs + k as u32 + 1);
                push_row(
                    row,
                    &combos[*lhs as usize].clone(),
                    &combos[*rhs as usize].clone(),
                    &mut a_entries,
                    &mut b_entries,
                    &mut c_entries,
                );
                Combination::from([(row, one)])
            }
            Gate::Add { lhs, rhs } => {
                let mut acc = combos[*lhs as usize].clone();
                let rhs = combos[*rhs as usize].clone();
                combine(&mut acc, &rhs, one);
                acc
            }
            Gate::CMul { scalar, src } => {
                let mut acc = Combination::new();
                combine(
                    &mut acc,
                    &combos[*src as usize].clone(),
                    FieldElement::new(*scalar, modulus),
                );
                acc
            }
        };
        combos.push(combo);
    }

    let out_combo = combos[program.output() as usize].clone();
    let plain_wire =
        out_combo.len() == 1 && out_combo.values().next().map_or(false, |v| v.value() == 1);
    let (output_wire, materialized_output) = if plain_wire {
        (*out_combo.keys().next().expect("nonempty combination"), false)
    } else {
        // Pass-through row: (combination) * (1 * z_1) = z_out.
        let row = next_pos;
        next_pos += 1;
        push_row(
            row,
            &out_combo,
            &Combination::from([(1u32, one)]),
            &mut a_entries,
            &mut b_entries,
            &mut c_entries,
        );
        (row, true)
    };

    let n = next_pos - 1;
    let instance = R1csInstance::new(
        modulus,
        n,
        num_inputs,
        output_wire,
        SparseMatrix::new(n, a_entries)?,
        SparseMatrix::new(n, b_entries)?,
        SparseMatrix::new(n, c_entries)?,
    )?;
    debug_assert!(instance.a().is_strictly_lower_triangular());
    debug_assert!(instance.b().is_strictly_lower_triangular());
    debug_assert!(instance.c().is_diagonal());
    Ok(CompiledProgram { program: program.clone(), instance, mul_wires, materialized_output })
}

impl CompiledProgram {
    pub fn instance(&self) -> &R1csInstance {
        &self.instance
    }

    pub fn program(&self) -> &GateProgram {
        &self.program
    }

    /// Runs the program and lays the wire values out as a satisfying
    /// assignment. Returns the declared output value alongside.
    pub fn assignment(
        &self,
        inputs: &[FieldElement],
    ) -> Result<(FieldElement, Assignment), R1csError> {
        let modulus = self.instance.modulus();
        let wires = self.program.execute(inputs, modulus)?;
        let mut z = Vec::with_capacity(self.instance.n() as usize);
        z.push(FieldElement::one(modulus));
        z.extend_from_slice(inputs);
        for w in &self.mul_wires {
            z.push(wires[*w as usize]);
        }
        let y = wires[self.program.output() as usize];
        if self.materialized_output {
            z.push(y);
        }
        let assignment = Assignment::new(z)?;
        debug_assert_eq!(is_satisfied(&self.instance, &assignment), Ok(true));
        Ok((y, assignment))
    }
}
