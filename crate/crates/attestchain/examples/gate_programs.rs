//! Firmware as straight-line gate programs, compiled to sparse constraint
//! systems with triangular structure.
//!
//! ```bash
//! cargo run -p attestchain --example gate_programs
//! ```

use attestchain::field::FieldElement;
use attestchain::r1cs::{build_program, is_satisfied, Assignment, GateProgram};

fn main() {
    let p = 17;
    // (x1 + x2)^2 + 3*x1: linear gates fold away, mul gates take rows
    let source = "\
inputs 2
w3 = add w1 w2
w4 = mul w3 w3
w5 = cmul 3 w1
w6 = add w4 w5
output w6
";
    let program = GateProgram::parse(source).unwrap();
    let compiled = build_program(&program, p).unwrap();
    let inst = compiled.instance();

    println!("program:\n{source}");
    println!(
        "compiled to n = {} wires ({} inputs, output wire {})",
        inst.n(),
        inst.num_inputs(),
        inst.output_wire()
    );
    for (name, m) in [("A", inst.a()), ("B", inst.b()), ("C", inst.c())] {
        let entries: Vec<String> = m
            .nonzero_entries()
            .iter()
            .map(|e| format!("({},{},{})", e.row, e.col, e.value))
            .collect();
        println!("  {name}: {}", entries.join(" "));
    }
    println!(
        "  A strictly lower: {}, B strictly lower: {}, C diagonal: {}",
        inst.a().is_strictly_lower_triangular(),
        inst.b().is_strictly_lower_triangular(),
        inst.c().is_diagonal()
    );

    // forward execution produces a satisfying assignment
    let x1 = FieldElement::new(4, p);
    let x2 = FieldElement::new(6, p);
    let (y, z) = compiled.assignment(&[x1, x2]).unwrap();
    println!("\nexecute({x1}, {x2}) = {y}; z = {:?}", z.values());
    println!("satisfied: {:?}", is_satisfied(inst, &z));

    // and a wrong claim fails the row equations
    let mut forged = z.values().to_vec();
    let last = forged.len() - 1;
    forged[last] = forged[last].add(FieldElement::one(p));
    let forged = Assignment::new(forged).unwrap();
    println!("forged output satisfied: {:?}", is_satisfied(inst, &forged));
}
