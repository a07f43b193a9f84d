//! Sampled estimates over full protocol runs.

use super::exact::{closed_form, pass_probability, per_pair_kraus, MAX_EXACT_QUBITS};
use super::{PassProbabilityReport, PayloadDescriptor};
use crate::attacks::AttackSpec;
use crate::cipher::{PauliKey, Signature};
use crate::protocol::{run_protocol, ProtocolConfig, Verdict, MAX_PROTOCOL_QUBITS};
use crate::qcore::{fidelity, QuantumState};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
}

impl McSummary {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n.max(1) as f64;
        let stderr = if n > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            stderr,
            trials: n as u64,
        }
    }

    /// `|mean - target| <= k * stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

/// Seed of trial `index` in an experiment seeded with `seed`. Trials draw
/// from disjoint ChaCha streams, so results do not depend on scheduling.
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.random()
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    Ok(())
}

/// Fraction of full protocol runs (trajectory-mode attack, identity key,
/// random masks) that Bob accepts. The exact value and closed form are
/// attached when the payload is small enough for exact averaging.
pub fn mc_estimate(
    payload: &QuantumState,
    sig: Option<&Signature>,
    spec: &AttackSpec,
    trials: u64,
    seed: u64,
) -> Result<PassProbabilityReport> {
    check_trials(trials)?;
    let n = payload.n_qubits();
    if n == 0 || n > MAX_PROTOCOL_QUBITS {
        return Err(Error::TooManyQubits {
            n,
            max: MAX_PROTOCOL_QUBITS,
        });
    }
    let base = ProtocolConfig {
        fixed_key: Some(PauliKey::identity(n)),
        fixed_signature: sig.cloned(),
        ..ProtocolConfig::new(n, seed).with_adversary(spec.clone())
    };
    base.validate()?;
    let passes = (0..trials)
        .into_par_iter()
        .map(|i| {
            let config = ProtocolConfig {
                seed: trial_seed(seed, i),
                ..base.clone()
            };
            run_protocol(payload, &config).map(|t| if t.verdict == Verdict::Delivered { 1.0 } else { 0.0 })
        })
        .collect::<Result<Vec<f64>>>()?;
    let summary = McSummary::from_samples(&passes);
    let (exact, closed) = if n <= MAX_EXACT_QUBITS {
        let per_pair = per_pair_kraus(spec, n)?;
        (pass_probability(payload, sig, &per_pair)?, closed_form(payload, spec)?)
    } else {
        (summary.mean, None)
    };
    Ok(PassProbabilityReport {
        exact,
        closed_form: closed,
        mc_estimate: Some(summary),
        attack: spec.clone(),
        payload: PayloadDescriptor::of(payload),
    })
}

/// Eve's stand-in for a payload she never saw.
#[derive(Clone, Debug)]
pub enum BlindGuess {
    /// The same state every trial.
    Fixed(QuantumState),
    /// The payload itself, an upper reference.
    Oracle,
}

/// Mean fidelity between Haar-random payload qubits and Eve's guess.
pub fn blind_eve_fidelity(trials: u64, seed: u64, guess: &BlindGuess) -> Result<McSummary> {
    check_trials(trials)?;
    if let BlindGuess::Fixed(g) = guess {
        if g.n_qubits() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: g.n_qubits(),
            });
        }
    }
    let samples = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, i));
            let psi = QuantumState::haar_qubit(&mut rng);
            match guess {
                BlindGuess::Fixed(g) => fidelity(&psi, g),
                BlindGuess::Oracle => fidelity(&psi, &psi),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(McSummary::from_samples(&samples))
}
