//! The `attestchain` command-line front end.
//!
//! Subcommands: `keygen`, `prove`, `verify`, `run`, `inspect`. Exit codes
//! are stable: 0 success (or expectations met), 1 verification rejection
//! (or unmet expectations), 2 usage and configuration errors.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::fc::{
    prove_execution, prove_structure, setup, ProofBundle, Verdict, VerificationKey,
};
use crate::field::FieldElement;
use crate::r1cs::{build_program, GateProgram};
use crate::scenario::Scenario;

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const USAGE: &str = "\
attestchain — attested firmware execution over a simulated device network

USAGE:
    attestchain keygen <firmware.prog> --out <DIR>
    attestchain prove --keys <DIR> --input <N>[,<N>...] [--out <FILE>]
    attestchain verify --keys <DIR> --proof <FILE> [--public <N>[,<N>...]]
    attestchain run --scenario <PATH> [--out <DIR>] [--seed <N>] [--format text|machine]
    attestchain inspect --out <DIR> <escrow|proofs|sessions>

Keys directories hold firmware.prog, pp.bin, pk.bin, vk.bin, vk.digest,
and instance.digest. `run` writes transcript.log, ledger.dump,
sessions.txt, and the metrics report into the output directory.
";

/// Parses and dispatches; returns the process exit code.
pub fn main_with_args(args: &[String]) -> i32 {
    match dispatch(args) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
    }
}

fn dispatch(args: &[String]) -> Result<i32, String> {
    let Some(command) = args.first() else {
        print!("{USAGE}");
        return Ok(EXIT_USAGE);
    };
    let rest = &args[1..];
    match command.as_str() {
        "keygen" => cmd_keygen(rest),
        "prove" => cmd_prove(rest),
        "verify" => cmd_verify(rest),
        "run" => cmd_run(rest),
        "inspect" => cmd_inspect(rest),
        "help" | "--help" | "-h" => {
            print!("{USAGE}");
            Ok(EXIT_OK)
        }
        other => Err(format!("unknown command `{other}`")),
    }
}

struct Flags {
    positional: Vec<String>,
    named: BTreeMap<String, String>,
}

fn parse_flags(args: &[String], allowed: &[&str]) -> Result<Flags, String> {
    let mut positional = Vec::new();
    let mut named = BTreeMap::new();
    let mut iter = args.iter();
    while let Some(arg) = iter.next() {
        if let Some(name) = arg.strip_prefix("--") {
            if !allowed.contains(&name) {
                return Err(format!("unknown flag --{name}"));
            }
            let value = iter.next().ok_or_else(|| format!("--{name} needs a value"))?;
            named.insert(name.to_string(), value.clone());
        } else {
            positional.push(arg.clone());
        }
    }
    Ok(Flags { positional, named })
}

fn parse_field_list(text: &str, modulus: u64) -> Result<Vec<FieldElement>, String> {
    text.split(',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            let v: u64 = t.trim().parse().map_err(|_| format!("bad field value `{t}`"))?;
            if v >= modulus {
                return Err(format!("value {v} not below the modulus"));
            }
            Ok(FieldElement::new(v, modulus))
        })
        .collect()
}

// -- key material on disk ----------------------------------------------------

fn keys_from_firmware(
    source: &str,
    modulus: u64,
) -> Result<(crate::r1cs::CompiledProgram, crate::fc::ProvingKey, VerificationKey), String> {
    let program = GateProgram::parse(source).map_err(|e| e.to_string())?;
    let compiled = build_program(&program, modulus).map_err(|e| e.to_string())?;
    let (_, pk, vk) = setup(128, compiled.instance()).map_err(|e| e.to_string())?;
    Ok((compiled, pk, vk))
}

fn pk_file_bytes(pk: &crate::fc::ProvingKey) -> Vec<u8> {
    // pp, instance, then the nine encoding polynomials in matrix order
    let mut out = pk.pp().to_bytes();
    let instance_bytes = pk.instance().to_bytes();
    out.extend_from_slice(&(instance_bytes.len() as u32).to_be_bytes());
    out.extend_from_slice(&instance_bytes);
    for tag in [crate::fc::MatrixTag::A, crate::fc::MatrixTag::B, crate::fc::MatrixTag::C] {
        let enc = pk.encoding(tag);
        for poly in [&enc.row, &enc.col, &enc.val] {
            out.extend_from_slice(&poly.to_bytes());
        }
    }
    out
}

fn cmd_keygen(args: &[String]) -> Result<i32, String> {
    let flags = parse_flags(args, &["out", "modulus"])?;
    let [firmware_path] = flags.positional.as_slice() else {
        return Err("keygen needs exactly one firmware path".into());
    };
    let out_dir = PathBuf::from(
        flags.named.get("out").map(String::as_str).unwrap_or("keys"),
    );
    let modulus = match flags.named.get("modulus") {
        Some(m) => m.parse().map_err(|_| "bad modulus".to_string())?,
        None => crate::field::DEFAULT_MODULUS,
    };
    let source = fs::read_to_string(firmware_path)
        .map_err(|e| format!("cannot read {firmware_path}: {e}"))?;
    let (compiled, pk, vk) = keys_from_firmware(&source, modulus)?;

    fs::create_dir_all(&out_dir).map_err(|e| e.to_string())?;
    let write = |name: &str, bytes: &[u8]| -> Result<(), String> {
        fs::write(out_dir.join(name), bytes).map_err(|e| format!("write {name}: {e}"))
    };
    write("firmware.prog", source.as_bytes())?;
    write("pp.bin", &pk.pp().to_bytes())?;
    write("pk.bin", &pk_file_bytes(&pk))?;
    write("vk.bin", &vk.to_bytes())?;
    write("vk.digest", hex::encode(vk.digest()).as_bytes())?;
    write("instance.digest", hex::encode(compiled.instance().digest()).as_bytes())?;
    println!("vk digest: {}", hex::encode(vk.digest()));
    Ok(EXIT_OK)
}

struct LoadedKeys {
    compiled: crate::r1cs::CompiledProgram,
    pk: crate::fc::ProvingKey,
    vk: VerificationKey,
}

fn load_keys(dir: &Path) -> Result<LoadedKeys, String> {
    let read = |name: &str| -> Result<Vec<u8>, String> {
        fs::read(dir.join(name)).map_err(|e| format!("cannot read {}: {e}", name))
    };
    let vk_bytes = read("vk.bin")?;
    let vk = VerificationKey::from_bytes(&vk_bytes).map_err(|e| e.to_string())?;
    let source = String::from_utf8(read("firmware.prog")?)
        .map_err(|_| "firmware.prog is not text".to_string())?;
    let (compiled, pk, rebuilt_vk) = keys_from_firmware(&source, vk.pp().modulus())?;
    if rebuilt_vk.digest() != vk.digest() {
        return Err("keys directory is inconsistent: firmware does not match vk".into());
    }
    let digest_hex = String::from_utf8(read("instance.digest")?)
        .map_err(|_| "instance.digest is not text".to_string())?;
    let mut instance_digest = [0u8; 32];
    hex::decode_to_slice(digest_hex.trim(), &mut instance_digest)
        .map_err(|_| "instance.digest is not a digest".to_string())?;
    if instance_digest != compiled.instance().digest() {
        return Err("keys directory is inconsistent: instance digest mismatch".into());
    }
    Ok(LoadedKeys { compiled, pk, vk })
}

fn cmd_prove(args: &[String]) -> Result<i32, String> {
    let flags = parse_flags(args, &["keys", "input", "out"])?;
    let keys_dir = PathBuf::from(
        flags.named.get("keys").map(String::as_str).unwrap_or("keys"),
    );
    let keys = load_keys(&keys_dir)?;
    let modulus = keys.vk.pp().modulus();
    let inputs = parse_field_list(
        flags.named.get("input").map(String::as_str).unwrap_or(""),
        modulus,
    )?;
    let (y, z) = keys.compiled.assignment(&inputs).map_err(|e| e.to_string())?;
    let (pi_a, pi_b, pi_c) = prove_structure(&keys.pk).map_err(|e| e.to_string())?;
    let execution = prove_execution(&keys.pk, &z).map_err(|e| e.to_string())?;
    let bundle = ProofBundle { pi_a, pi_b, pi_c, execution };
    let out_path = PathBuf::from(
        flags.named.get("out").map(String::as_str).unwrap_or("proof.bin"),
    );
    fs::write(&out_path, bundle.to_bytes()).map_err(|e| e.to_string())?;
    println!("output: {y}");
    println!("proof: {} ({} bytes)", out_path.display(), bundle.to_bytes().len());
    Ok(EXIT_OK)
}

fn cmd_verify(args: &[String]) -> Result<i32, String> {
    let flags = parse_flags(args, &["keys", "proof", "public"])?;
    let keys_dir = PathBuf::from(
        flags.named.get("keys").map(String::as_str).unwrap_or("keys"),
    );
    let read = |name: &Path| -> Result<Vec<u8>, String> {
        fs::read(name).map_err(|e| format!("cannot read {}: {e}", name.display()))
    };
    let vk = VerificationKey::from_bytes(&read(&keys_dir.join("vk.bin"))?)
        .map_err(|e| e.to_string())?;
    let digest_hex = fs::read_to_string(keys_dir.join("instance.digest"))
        .map_err(|e| e.to_string())?;
    let mut instance_digest = [0u8; 32];
    hex::decode_to_slice(digest_hex.trim(), &mut instance_digest)
        .map_err(|_| "instance.digest is not a digest".to_string())?;

    let proof_path = flags.named.get("proof").ok_or("verify needs --proof")?;
    let proof_bytes = read(Path::new(proof_path))?;
    let modulus = vk.pp().modulus();
    // A file that does not even parse as a bundle is a usage error; a
    // parseable bundle that fails verification is a rejection.
    let bundle = ProofBundle::from_bytes(&proof_bytes, modulus)
        .map_err(|e| format!("malformed proof: {e}"))?;

    let public = match flags.named.get("public") {
        Some(list) => parse_field_list(list, modulus)?,
        None => bundle.execution.claimed_public().to_vec(),
    };

    if let Verdict::Reject(reason) =
        crate::fc::verify_structure(&vk, &bundle.pi_a, &bundle.pi_b, &bundle.pi_c)
    {
        println!("reject: {reason}");
        return Ok(EXIT_REJECT);
    }
    if let Verdict::Reject(reason) =
        crate::fc::verify_execution(&vk, &instance_digest, &bundle.execution, &public)
    {
        println!("reject: {reason}");
        return Ok(EXIT_REJECT);
    }
    println!("accept");
    Ok(EXIT_OK)
}

fn cmd_run(args: &[String]) -> Result<i32, String> {
    let flags = parse_flags(args, &["scenario", "out", "seed", "format"])?;
    let scenario_path = flags.named.get("scenario").ok_or("run needs --scenario")?;
    let mut scenario = Scenario::load(Path::new(scenario_path)).map_err(|e| e.to_string())?;
    if let Some(seed) = flags.named.get("seed") {
        scenario.config.seed = seed.parse().map_err(|_| "bad --seed".to_string())?;
    }
    let machine = match flags.named.get("format").map(String::as_str) {
        None | Some("text") => false,
        Some("machine") => true,
        Some(other) => return Err(format!("unknown format `{other}`")),
    };
    let out_dir = PathBuf::from(
        flags.named.get("out").map(String::as_str).unwrap_or("attestchain-out"),
    );

    let outcome = scenario.run().map_err(|e| e.to_string())?;
    outcome.write_artifacts(&out_dir, machine).map_err(|e| e.to_string())?;

    print!("{}", outcome.sessions_summary());
    println!("artifacts: {}", out_dir.display());
    if outcome.all_expected() {
        Ok(EXIT_OK)
    } else {
        for failure in &outcome.expectation_failures {
            println!("unexpected: {failure}");
        }
        Ok(EXIT_REJECT)
    }
}

fn cmd_inspect(args: &[String]) -> Result<i32, String> {
    let flags = parse_flags(args, &["out"])?;
    let out_dir = PathBuf::from(
        flags.named.get("out").map(String::as_str).unwrap_or("attestchain-out"),
    );
    let [query] = flags.positional.as_slice() else {
        return Err("inspect needs exactly one query: escrow, proofs, or sessions".into());
    };
    let ledger_dump = || {
        fs::read_to_string(out_dir.join("ledger.dump"))
            .map_err(|e| format!("cannot read ledger.dump: {e}"))
    };
    match query.as_str() {
        "escrow" => {
            let dump = ledger_dump()?;
            let table = dump
                .split("escrows\n")
                .nth(1)
                .and_then(|s| s.split("balances\n").next())
                .unwrap_or("");
            print!("{table}");
            Ok(EXIT_OK)
        }
        "proofs" => {
            let dump = ledger_dump()?;
            for line in dump.lines() {
                if line.split('|').nth(2) == Some("proof") {
                    println!("{line}");
                }
            }
            Ok(EXIT_OK)
        }
        "sessions" => {
            let text = fs::read_to_string(out_dir.join("sessions.txt"))
                .map_err(|e| format!("cannot read sessions.txt: {e}"))?;
            print!("{text}");
            Ok(EXIT_OK)
        }
        other => Err(format!("unknown query `{other}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(path: &str) -> String {
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("fixtures")
            .join(path)
            .to_string_lossy()
            .into_owned()
    }

    fn args(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn keygen_prove_verify_round_trip() {
        let tmp = std::env::temp_dir().join("attestchain-cli-test");
        let _ = fs::remove_dir_all(&tmp);
        let keys = tmp.join("keys").to_string_lossy().into_owned();
        let proof = tmp.join("proof.bin").to_string_lossy().into_owned();

        let code = main_with_args(&args(&[
            "keygen",
            &fixture("firmware/square.prog"),
            "--out",
            &keys,
        ]));
        assert_eq!(code, EXIT_OK);

        let code = main_with_args(&args(&[
            "prove", "--keys", &keys, "--input", "3", "--out", &proof,
        ]));
        assert_eq!(code, EXIT_OK);

        let code = main_with_args(&args(&["verify", "--keys", &keys, "--proof", &proof]));
        assert_eq!(code, EXIT_OK);

        // wrong public input
        let code = main_with_args(&args(&[
            "verify", "--keys", &keys, "--proof", &proof, "--public", "3,10",
        ]));
        assert_eq!(code, EXIT_REJECT);

        // flipped content byte inside the proof body
        let mut bytes = fs::read(&proof).unwrap();
        let target = bytes.len() / 2;
        bytes[target] ^= 0x01;
        let flipped = tmp.join("flipped.bin").to_string_lossy().into_owned();
        fs::write(&flipped, &bytes).unwrap();
        let code = main_with_args(&args(&["verify", "--keys", &keys, "--proof", &flipped]));
        assert!(code == EXIT_REJECT || code == EXIT_USAGE);

        // verifying against a different circuit's keys rejects on binding
        let other_keys = tmp.join("other-keys").to_string_lossy().into_owned();
        let code = main_with_args(&args(&[
            "keygen",
            &fixture("firmware/alert.prog"),
            "--out",
            &other_keys,
        ]));
        assert_eq!(code, EXIT_OK);
        let code = main_with_args(&args(&[
            "verify", "--keys", &other_keys, "--proof", &proof,
        ]));
        assert_eq!(code, EXIT_REJECT);

        let _ = fs::remove_dir_all(&tmp);
    }

    #[test]
    fn run_meets_declared_failure_expectation() {
        let tmp = std::env::temp_dir().join("attestchain-run-tamper");
        let _ = fs::remove_dir_all(&tmp);
        let out = tmp.to_string_lossy().into_owned();
        let code = main_with_args(&args(&[
            "run",
            "--scenario",
            &fixture("scenarios/tamper.toml"),
            "--out",
            &out,
        ]));
        // the scenario declares FAILED(proof); meeting it is success
        assert_eq!(code, EXIT_OK);
        let _ = fs::remove_dir_all(&tmp);
    }

    #[test]
    fn keygen_deterministic() {
        let tmp = std::env::temp_dir().join("attestchain-keygen-det");
        let _ = fs::remove_dir_all(&tmp);
        let k1 = tmp.join("k1").to_string_lossy().into_owned();
        let k2 = tmp.join("k2").to_string_lossy().into_owned();
        for k in [&k1, &k2] {
            let code = main_with_args(&args(&[
                "keygen",
                &fixture("firmware/square.prog"),
                "--out",
                k,
            ]));
            assert_eq!(code, EXIT_OK);
        }
        for name in ["pp.bin", "pk.bin", "vk.bin", "vk.digest", "instance.digest"] {
            assert_eq!(
                fs::read(Path::new(&k1).join(name)).unwrap(),
                fs::read(Path::new(&k2).join(name)).unwrap(),
                "{name} differs between runs"
            );
        }
        let _ = fs::remove_dir_all(&tmp);
    }

    #[test]
    fn missing_firmware_is_usage_error() {
        let code = main_with_args(&args(&["keygen", "/nonexistent/fw.prog", "--out", "/tmp/x"]));
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn run_and_inspect() {
        let tmp = std::env::temp_dir().join("attestchain-run-test");
        let _ = fs::remove_dir_all(&tmp);
        let out = tmp.to_string_lossy().into_owned();
        let code = main_with_args(&args(&[
            "run",
            "--scenario",
            &fixture("scenarios/reference.toml"),
            "--out",
            &out,
        ]));
        assert_eq!(code, EXIT_OK);
        assert!(tmp.join("transcript.log").exists());
        assert!(tmp.join("ledger.dump").exists());
        assert!(tmp.join("metrics.txt").exists());

        let code = main_with_args(&args(&["inspect", "--out", &out, "escrow"]));
        assert_eq!(code, EXIT_OK);
        let code = main_with_args(&args(&["inspect", "--out", &out, "bogus"]));
        assert_eq!(code, EXIT_USAGE);
        let code =
            main_with_args(&args(&["inspect", "--out", "/nonexistent-dir", "escrow"]));
        assert_eq!(code, EXIT_USAGE);
        let _ = fs::remove_dir_all(&tmp);
    }

    #[test]
    fn run_config_error_exits_two() {
        let code = main_with_args(&args(&["run", "--scenario", "/nonexistent.toml"]));
        assert_eq!(code, EXIT_USAGE);
    }
}
