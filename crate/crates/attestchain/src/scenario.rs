//! Scenario files: a self-contained description of devices, contracts,
//! nodes, sessions, and expectations, loaded from TOML and driven to
//! completion deterministically.
//!
//! Identical scenario plus identical seed yields byte-identical transcript
//! and ledger dump; the metrics report carries wall-clock timings and is
//! excluded from that guarantee.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contract::{ComplianceRegistry, ContractSpec, Decision, GeoBox, Guard, GuardPredicate};
use crate::device::{encode_reading, Device, SensorReading, TamperMode};
use crate::field::{FieldElement, DEFAULT_MODULUS};
use crate::ledger::Ledger;
use crate::protocol::{SessionReport, SessionSpec, World, WorldError, DEFAULT_TIMEOUT};
use crate::r1cs::GateProgram;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("scenario field `{field}`: {msg}")]
    Config { field: String, msg: String },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Device(#[from] crate::device::DeviceError),
    #[error(transparent)]
    R1cs(#[from] crate::r1cs::R1csError),
}

fn config_err(field: &str, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Config { field: field.into(), msg: msg.into() }
}

// -- raw TOML schema ---------------------------------------------------------

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    #[serde(default = "default_modulus")]
    pub modulus: u64,
    #[serde(default = "default_lambda")]
    pub lambda: u32,
    #[serde(default = "default_timeout")]
    pub timeout: u64,
    pub nodes: Vec<NodeCfg>,
    pub devices: Vec<DeviceCfg>,
    pub contracts: Vec<ContractCfg>,
    #[serde(default)]
    pub geo: BTreeMap<String, [i64; 4]>,
    /// device type -> device ids whose keys are authorized
    #[serde(default)]
    pub compliance: BTreeMap<String, Vec<String>>,
    pub sessions: Vec<SessionCfg>,
}

fn default_modulus() -> u64 {
    DEFAULT_MODULUS
}

fn default_lambda() -> u32 {
    128
}

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeCfg {
    pub id: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceCfg {
    pub id: String,
    pub device_type: String,
    /// Path to the gate-program file, relative to the scenario file.
    pub firmware: String,
    pub node: String,
    #[serde(default)]
    pub balance: u64,
    #[serde(default = "default_true")]
    pub bind_metadata: bool,
    #[serde(default = "default_emit_tick")]
    pub emit_tick: u64,
    #[serde(default)]
    pub tamper: Option<String>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
    #[serde(default)]
    pub readings: Vec<ReadingCfg>,
}

fn default_true() -> bool {
    true
}

fn default_emit_tick() -> u64 {
    3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadingCfg {
    pub channel: String,
    pub raw: i64,
    #[serde(default)]
    pub timestamp: u64,
    #[serde(default = "default_scale")]
    pub scale: u64,
}

fn default_scale() -> u64 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractCfg {
    pub id: String,
    pub node: String,
    #[serde(default)]
    pub required_device_type: String,
    #[serde(default)]
    pub next_hop: String,
    #[serde(default)]
    pub guards: Vec<GuardCfg>,
    #[serde(default)]
    pub forward: Vec<ForwardCfg>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuardCfg {
    #[serde(default)]
    pub name: Option<String>,
    pub field: String,
    pub predicate: String,
    pub value: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardCfg {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionCfg {
    pub id: String,
    pub producer: String,
    pub consumer: String,
    pub amount: u64,
    #[serde(default)]
    pub deposit: Option<u64>,
    pub contract_x: String,
    pub contract_y: String,
    /// Expected terminal state, e.g. `WITHDRAWN` or `FAILED(proof)`.
    pub expect: String,
    #[serde(default)]
    pub drops: Vec<String>,
}

// -- loaded scenario ---------------------------------------------------------

/// A parsed, validated scenario with firmware sources resolved.
#[derive(Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    firmware: BTreeMap<String, GateProgram>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.into(), source })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_str(&text, base)
    }

    pub fn from_str(text: &str, base: &Path) -> Result<Self, ScenarioError> {
        let config: ScenarioConfig = toml::from_str(text)?;
        let mut firmware = BTreeMap::new();
        for dev in &config.devices {
            let path = base.join(&dev.firmware);
            let source = fs::read_to_string(&path)
                .map_err(|source| ScenarioError::Io { path, source })?;
            firmware.insert(dev.id.clone(), GateProgram::parse(&source)?);
        }
        let scenario = Self { config, firmware };
        scenario.validate()?;
        Ok(scenario)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let cfg = &self.config;
        let node_ids: Vec<&str> = cfg.nodes.iter().map(|n| n.id.as_str()).collect();
        let device_ids: Vec<&str> = cfg.devices.iter().map(|d| d.id.as_str()).collect();
        let contract_ids: Vec<&str> = cfg.contracts.iter().map(|c| c.id.as_str()).collect();

        for dev in &cfg.devices {
            if !node_ids.contains(&dev.node.as_str()) {
                return Err(config_err("devices.node", format!("unknown node {}", dev.node)));
            }
            if let Some(t) = &dev.tamper {
                parse_tamper(t)?;
            }
        }
        for contract in &cfg.contracts {
            if !node_ids.contains(&contract.node.as_str()) {
                return Err(config_err(
                    "contracts.node",
                    format!("unknown node {}", contract.node),
                ));
            }
            for guard in &contract.guards {
                parse_predicate(&guard.predicate)?;
            }
        }
        for (city, bbox) in &cfg.geo {
            if bbox[0] > bbox[1] || bbox[2] > bbox[3] {
                return Err(config_err("geo", format!("degenerate box for {city}")));
            }
        }
        for (device_type, ids) in &cfg.compliance {
            for id in ids {
                if !device_ids.contains(&id.as_str()) {
                    return Err(config_err(
                        "compliance",
                        format!("unknown device {id} under type {device_type}"),
                    ));
                }
            }
        }
        let mut session_ids = Vec::new();
        for session in &cfg.sessions {
            if session_ids.contains(&session.id.as_str()) {
                return Err(config_err("sessions.id", format!("duplicate id {}", session.id)));
            }
            session_ids.push(session.id.as_str());
            if !device_ids.contains(&session.producer.as_str()) {
                return Err(config_err(
                    "sessions.producer",
                    format!("unknown device {}", session.producer),
                ));
            }
            if !device_ids.contains(&session.consumer.as_str()) {
                return Err(config_err(
                    "sessions.consumer",
                    format!("unknown device {}", session.consumer),
                ));
            }
            for c in [&session.contract_x, &session.contract_y] {
                if !contract_ids.contains(&c.as_str()) {
                    return Err(config_err("sessions.contract", format!("unknown contract {c}")));
                }
            }
            parse_expectation(&session.expect)?;
        }
        Ok(())
    }

    /// Builds the world: ledger with nodes and balances, devices with keys,
    /// contracts, compliance registry.
    pub fn build_world(&self) -> Result<World, ScenarioError> {
        let cfg = &self.config;
        let mut ledger = Ledger::new(cfg.modulus);
        for node in &cfg.nodes {
            ledger.register_node(&node.id);
        }

        let mut devices = BTreeMap::new();
        let mut keys = BTreeMap::new();
        for dev_cfg in &cfg.devices {
            ledger.open_account(&dev_cfg.id, dev_cfg.balance);
            let program = self.firmware[&dev_cfg.id].clone();
            let mut device = Device::new(
                &dev_cfg.id,
                &dev_cfg.device_type,
                program,
                cfg.modulus,
                cfg.lambda,
                dev_cfg.bind_metadata,
            )?;
            if let Some(t) = &dev_cfg.tamper {
                device = device.with_tamper(parse_tamper(t)?);
            }
            keys.insert(device.vk_digest(), device.vk().clone());
            devices.insert(dev_cfg.id.clone(), device);
        }

        let mut registry = ComplianceRegistry::new();
        for (device_type, ids) in &cfg.compliance {
            for id in ids {
                registry.authorize(device_type, devices[id].vk_digest());
            }
        }

        let geo: Vec<(String, GeoBox)> = cfg
            .geo
            .iter()
            .map(|(name, b)| {
                (name.clone(), GeoBox { lat_min: b[0], lat_max: b[1], lon_min: b[2], lon_max: b[3] })
            })
            .collect();

        let mut contracts = BTreeMap::new();
        let mut contract_nodes = BTreeMap::new();
        for c in &cfg.contracts {
            let guards = c
                .guards
                .iter()
                .map(|g| {
                    Ok(Guard {
                        name: g.name.clone().unwrap_or_else(|| g.field.clone()),
                        field: g.field.clone(),
                        predicate: parse_predicate(&g.predicate)?,
                        value: g.value.clone(),
                    })
                })
                .collect::<Result<Vec<_>, ScenarioError>>()?;
            let spec = ContractSpec {
                id: c.id.clone(),
                required_device_type: c.required_device_type.clone(),
                guards,
                forward: c.forward.iter().map(|f| (f.from.clone(), f.to.clone())).collect(),
                next_hop: c.next_hop.clone(),
                geo: geo.clone(),
            };
            ledger.register_contract(&c.id, &c.node);
            contract_nodes.insert(c.id.clone(), c.node.clone());
            contracts.insert(c.id.clone(), spec);
        }
        ledger.seal_tick();

        Ok(World { ledger, devices, contracts, contract_nodes, registry, keys })
    }

    /// The runner inputs for one configured session.
    pub fn session_spec(&self, session: &SessionCfg) -> Result<SessionSpec, ScenarioError> {
        let cfg = &self.config;
        let dev_cfg = cfg
            .devices
            .iter()
            .find(|d| d.id == session.producer)
            .ok_or_else(|| config_err("sessions.producer", "unknown device"))?;
        let mut payload = Vec::with_capacity(dev_cfg.readings.len());
        for reading in &dev_cfg.readings {
            let r = SensorReading::new(&reading.channel, reading.raw, reading.timestamp);
            payload.push(encode_reading(&r, reading.scale, cfg.modulus)?);
        }
        let mut metadata = dev_cfg.metadata.clone();
        metadata
            .entry("device_type".into())
            .or_insert_with(|| dev_cfg.device_type.clone());
        Ok(SessionSpec {
            id: session.id.clone(),
            producer: session.producer.clone(),
            consumer: session.consumer.clone(),
            amount: session.amount,
            deposit: session.deposit.unwrap_or(session.amount),
            contract_x: session.contract_x.clone(),
            contract_y: session.contract_y.clone(),
            payload,
            metadata,
            emit_tick: dev_cfg.emit_tick,
            timeout: cfg.timeout,
            drops: session.drops.clone(),
        })
    }

    /// Runs every session in order against one shared world.
    pub fn run(&self) -> Result<RunOutcome, ScenarioError> {
        let mut world = self.build_world()?;
        let mut reports = Vec::new();
        let mut expectation_failures = Vec::new();
        for session in &self.config.sessions {
            let spec = self.session_spec(session)?;
            let report = world.run_session(&spec)?;
            let got = report.final_state.to_string();
            if got != session.expect {
                expectation_failures
                    .push(format!("{}: expected {}, got {got}", session.id, session.expect));
            }
            reports.push((session.clone(), report));
        }

        let mut transcript = String::new();
        transcript.push_str(&format!("seed|{}\n", self.config.seed));
        for (_, report) in &reports {
            for line in &report.transcript {
                transcript.push_str(line);
                transcript.push('\n');
            }
        }

        let metrics = MetricsReport::from_reports(reports.iter().map(|(_, r)| r));
        Ok(RunOutcome {
            ledger_dump: world.ledger.dump(),
            chain_consistent: world.ledger.chain_is_consistent(),
            transcript,
            metrics,
            reports,
            expectation_failures,
        })
    }
}

fn parse_tamper(text: &str) -> Result<TamperMode, ScenarioError> {
    match text {
        "none" => Ok(TamperMode::None),
        "forge-output" => Ok(TamperMode::ForgeOutput),
        "corrupt-proof" => Ok(TamperMode::CorruptProof),
        other => Err(config_err("devices.tamper", format!("unknown mode {other}"))),
    }
}

fn parse_predicate(text: &str) -> Result<GuardPredicate, ScenarioError> {
    match text {
        "equals" => Ok(GuardPredicate::Equals),
        "in-bbox" => Ok(GuardPredicate::InBbox),
        other => Err(config_err("contracts.guards.predicate", format!("unknown predicate {other}"))),
    }
}

fn parse_expectation(text: &str) -> Result<(), ScenarioError> {
    const KNOWN: [&str; 5] = [
        "WITHDRAWN",
        "FAILED(funds)",
        "FAILED(proof)",
        "FAILED(timeout)",
        "INIT",
    ];
    if KNOWN.contains(&text) {
        Ok(())
    } else {
        Err(config_err("sessions.expect", format!("unknown terminal state {text}")))
    }
}

/// Everything one scenario run produced.
pub struct RunOutcome {
    pub reports: Vec<(SessionCfg, SessionReport)>,
    pub transcript: String,
    pub ledger_dump: String,
    pub chain_consistent: bool,
    pub metrics: MetricsReport,
    pub expectation_failures: Vec<String>,
}

impl RunOutcome {
    pub fn all_expected(&self) -> bool {
        self.expectation_failures.is_empty()
    }

    /// Session summary lines: `session|final-state|expected|ok`.
    pub fn sessions_summary(&self) -> String {
        let mut out = String::new();
        for (cfg, report) in &self.reports {
            let ok = report.final_state.to_string() == cfg.expect;
            out.push_str(&format!(
                "{}|{}|{}|{}\n",
                cfg.id,
                report.final_state,
                cfg.expect,
                if ok { "ok" } else { "MISMATCH" }
            ));
        }
        out
    }

    /// Writes transcript.log, ledger.dump, sessions.txt, and the metrics
    /// report into `dir`.
    pub fn write_artifacts(&self, dir: &Path, machine: bool) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("transcript.log"), &self.transcript)?;
        fs::write(dir.join("ledger.dump"), &self.ledger_dump)?;
        fs::write(dir.join("sessions.txt"), self.sessions_summary())?;
        if machine {
            fs::write(dir.join("metrics.json"), self.metrics.to_json())?;
        } else {
            fs::write(dir.join("metrics.txt"), self.metrics.to_text())?;
        }
        Ok(())
    }
}

/// Aggregated wall-clock timings per phase, plus accept/reject counts.
#[derive(Debug, Clone, Default, Serialize)]
pub struct MetricsReport {
    pub phases: BTreeMap<String, PhaseStat>,
    pub accepts: u32,
    pub rejects: u32,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct PhaseStat {
    pub count: u32,
    pub total_us: u128,
}

impl MetricsReport {
    pub fn from_reports<'a>(reports: impl Iterator<Item = &'a SessionReport>) -> Self {
        let mut out = Self::default();
        for report in reports {
            let m = &report.metrics;
            for (phase, us) in [
                ("prove", m.prove_us),
                ("verify", m.verify_us),
                ("write", m.write_us),
                ("confirm", m.confirm_us),
                ("read", m.read_us),
                ("end_to_end", m.end_to_end_us),
            ] {
                let stat = out.phases.entry(phase.into()).or_default();
                stat.count += 1;
                stat.total_us += us;
            }
            match &report.decision {
                Some(Decision::Forward { .. }) => out.accepts += 1,
                Some(Decision::Reject(_)) => out.rejects += 1,
                None => {}
            }
        }
        out
    }

    pub fn phase(&self, name: &str) -> Option<PhaseStat> {
        self.phases.get(name).copied()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("phase|count|total_us|mean_us\n");
        for (name, stat) in &self.phases {
            let mean = if stat.count == 0 { 0 } else { stat.total_us / stat.count as u128 };
            out.push_str(&format!("{name}|{}|{}|{mean}\n", stat.count, stat.total_us));
        }
        out.push_str(&format!("accepts|{}\n", self.accepts));
        out.push_str(&format!("rejects|{}\n", self.rejects));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

/// Encodes a reading list through the device fixture path (used by
/// examples).
pub fn encode_payload(
    readings: &[(String, i64, u64)],
    modulus: u64,
) -> Result<Vec<FieldElement>, ScenarioError> {
    readings
        .iter()
        .map(|(channel, raw, scale)| {
            let r = SensorReading::new(channel, *raw, 0);
            Ok(encode_reading(&r, *scale, modulus)?)
        })
        .collect()
}
