//! The whole stack at once: load the reference scenario, run every
//! session through the protocol, and print the transcript, ledger dump,
//! and metrics.
//!
//! ```bash
//! cargo run -p attestchain --example full_scenario
//! ```

use std::path::Path;

use attestchain::scenario::Scenario;

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenarios/reference.toml");
    let scenario = Scenario::load(&path).expect("reference scenario loads");
    let outcome = scenario.run().expect("scenario runs");

    println!("sessions:");
    print!("{}", outcome.sessions_summary());

    println!("\ntranscript:");
    print!("{}", outcome.transcript);

    println!("\nledger dump:");
    print!("{}", outcome.ledger_dump);

    println!("\nmetrics:");
    print!("{}", outcome.metrics.to_text());

    println!("\nchain consistent: {}", outcome.chain_consistent);
    println!("all expectations met: {}", outcome.all_expected());

    // the same scenario with a tampered device fails exactly as declared
    let tamper = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenarios/tamper.toml");
    let outcome = Scenario::load(&tamper).unwrap().run().unwrap();
    println!("\ntamper scenario sessions:");
    print!("{}", outcome.sessions_summary());
    println!("escrow after failure:");
    for line in outcome.ledger_dump.lines().filter(|l| l.contains("REFUNDED")) {
        println!("  {line}");
    }
}
