//! Per-subcommand experiment configuration.

use crate::attacks::{probe_preset, AttackSpec, ProbeCircuit, Side};
use crate::cipher::Signature;
use crate::qcore::{QuantumState, C64};
use crate::{Error, Result};
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;
use std::path::PathBuf;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// A named payload or explicit amplitudes `[[re, im], ...]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PayloadSpec {
    Named(String),
    Amplitudes(Vec<[f64; 2]>),
}

impl Default for PayloadSpec {
    fn default() -> Self {
        Self::Named("zero".into())
    }
}

impl PayloadSpec {
    pub const NAMES: [&'static str; 7] = ["zero", "one", "plus", "minus", "plus_i", "bell", "ghz"];

    /// The payload on `n` qubits. `haar` draws from `rng`.
    pub fn build<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<QuantumState> {
        let amps = match self {
            Self::Amplitudes(a) => a.iter().map(|c| C64::new(c[0], c[1])).collect::<Vec<_>>(),
            Self::Named(name) => {
                let one_qubit = |a: C64, b: C64| -> Result<QuantumState> {
                    let q = QuantumState::from_amplitudes(vec![a, b])?;
                    let mut s = QuantumState::scalar();
                    for _ in 0..n {
                        s = s.tensor(&q)?;
                    }
                    Ok(s)
                };
                let h = C64::new(FRAC_1_SQRT_2, 0.0);
                let (one, zero) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
                return match name.as_str() {
                    "zero" => one_qubit(one, zero),
                    "one" => one_qubit(zero, one),
                    "plus" => one_qubit(h, h),
                    "minus" => one_qubit(h, -h),
                    "plus_i" => one_qubit(h, C64::new(0.0, FRAC_1_SQRT_2)),
                    "bell" | "ghz" => {
                        if n < 2 || (name == "bell" && n != 2) {
                            return Err(Error::InvalidArgument(format!("payload '{name}' needs n_qubits = 2")));
                        }
                        let mut a = vec![zero; 1 << n];
                        a[0] = h;
                        a[(1 << n) - 1] = h;
                        QuantumState::from_amplitudes(a)
                    }
                    "haar" => QuantumState::haar_random(n, rng),
                    other => Err(Error::InvalidArgument(format!(
                        "unknown payload '{other}'; expected one of {:?}, haar, or amplitudes",
                        Self::NAMES
                    ))),
                };
            }
        };
        if amps.len() != 1 << n {
            return Err(Error::LengthMismatch {
                what: "payload amplitudes",
                expected: 1 << n,
                found: amps.len(),
            });
        }
        QuantumState::from_amplitudes(amps)
    }

    pub fn is_random(&self) -> bool {
        matches!(self, Self::Named(n) if n == "haar")
    }
}

fn one() -> usize {
    1
}
fn two() -> usize {
    2
}
fn twenty() -> u32 {
    20
}
fn ten_thousand() -> u64 {
    10_000
}
fn default_rounds() -> usize {
    3
}
fn default_starts() -> usize {
    256
}
fn default_grid_evals() -> usize {
    200_000
}
fn default_max_points() -> u64 {
    1_000_000
}
fn no_attack() -> AttackSpec {
    AttackSpec::None
}
fn default_side() -> Side {
    Side::S
}
fn yes() -> bool {
    true
}
fn computational_pair() -> AttackSpec {
    let z = crate::qcore::BlochVector::plus_z();
    AttackSpec::ir_pair(z, z, z, z)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundtripConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    #[serde(default = "one")]
    pub n_qubits: usize,
    #[serde(default)]
    pub payload: PayloadSpec,
    /// Where the full transcript JSON is written.
    pub transcript: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepFamily {
    /// One intercept/resend on one side: measure and resend vectors.
    SingleSide,
    /// Intercept/resend on both sides: four vectors.
    Pair,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSweepConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub family: SweepFamily,
    /// Polar-angle points per vector over `[0, pi]`.
    #[serde(default = "twenty")]
    pub grid: u32,
    /// Azimuth points per vector over `[0, 2 pi)`; 1 keeps vectors in the x-z plane.
    #[serde(default = "one_u32")]
    pub phi_points: u32,
    #[serde(default = "default_side")]
    pub side: Side,
    /// One-qubit payload.
    #[serde(default)]
    pub payload: PayloadSpec,
    /// Monte Carlo trials per point; 0 disables sampling.
    #[serde(default)]
    pub trials: u64,
    #[serde(default = "default_max_points")]
    pub max_points: u64,
}

fn one_u32() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSearchConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub objective: String,
    #[serde(default = "twenty")]
    pub grid: u32,
    #[serde(default = "default_rounds")]
    pub refine_rounds: usize,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_grid_evals")]
    pub max_grid_evals: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacyAmpConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    #[serde(default = "two")]
    pub levels: usize,
    #[serde(default)]
    pub payload: PayloadSpec,
    /// Attack checked against the `(3/4)^(N/2)` bound.
    #[serde(default = "computational_pair")]
    pub attack: AttackSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    /// `honest`, `premature_disclosure` or `baseline_check`.
    pub scenario: String,
    #[serde(default = "one")]
    pub n_qubits: usize,
    #[serde(default)]
    pub payload: PayloadSpec,
    /// Premature disclosure: Bob reports before the ciphertext arrives.
    #[serde(default = "yes")]
    pub early_report: bool,
    /// Sampled runs for the baseline scheme.
    #[serde(default = "ten_thousand")]
    pub trials: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McEstimateConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    #[serde(default = "one")]
    pub n_qubits: usize,
    #[serde(default)]
    pub payload: PayloadSpec,
    #[serde(default = "no_attack")]
    pub attack: AttackSpec,
    /// Probe-circuit attack on every pair; replaces `attack`.
    pub probe: Option<ProbeConfig>,
    /// Fixed signature bits; sampled per run when absent.
    pub signature: Option<Signature>,
    #[serde(default = "ten_thousand")]
    pub trials: u64,
}

/// A probe circuit by preset name or by gate tokens such as `"U1 C12 U1"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ProbeConfig {
    Preset { preset: String },
    Tokens { tokens: String, ancillas: usize },
}

impl ProbeConfig {
    pub fn attack(&self) -> Result<AttackSpec> {
        let circuit = match self {
            Self::Preset { preset } => probe_preset(preset)?,
            Self::Tokens { tokens, ancillas } => ProbeCircuit::from_tokens(tokens, *ancillas)?,
        };
        Ok(AttackSpec::probe(circuit))
    }
}

/// Parses a config file body for `subcommand`. A `subcommand` key in the
/// file, when present, must match.
pub fn parse_config<T: DeserializeOwned>(text: &str, subcommand: &str) -> Result<T> {
    let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Parse("config must be a JSON object".into()))?;
    if let Some(name) = obj.remove("subcommand") {
        if name.as_str() != Some(subcommand) {
            return Err(Error::Parse(format!(
                "config is for subcommand {name}, not '{subcommand}'"
            )));
        }
    }
    serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))
}
