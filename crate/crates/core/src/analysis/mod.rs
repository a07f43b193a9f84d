//! Detection probabilities: closed forms, exact mask averages, bound
//! searches, Monte Carlo estimates, privacy amplification and the
//! check-qubit baseline.

mod amplification;
mod baseline;
mod closed_form;
mod exact;
mod montecarlo;
mod optimize;

pub use amplification::{privacy_amplification, AmplificationChain, AmplificationLevel, MAX_AMPLIFICATION_LEVELS};
pub use baseline::{baseline_check_scheme, BaselineReport, BaselineTarget};
pub use closed_form::{
    ab_vectors, coherence, entangled_coherences, f_value, pair_g, pair_h, pb_entangled_closed_form, pb_pair,
    pb_single_side,
};
pub use exact::{pb_entangled_pairs, pb_exact, MAX_EXACT_QUBITS};
pub use montecarlo::{blind_eve_fidelity, mc_estimate, trial_seed, BlindGuess, McSummary};
pub use optimize::{maximize_pb, BoundSearchResult, Objective, SearchBudget};

use crate::attacks::AttackSpec;
use crate::qcore::QuantumState;
use serde::{Deserialize, Serialize};

/// Maximum allowed gap between an exact value and its closed form.
pub const AGREEMENT_TOL: f64 = 1e-9;

/// Slack allowed above a claimed bound in searches.
pub const BOUND_TOL: f64 = 1e-6;

/// Short description of a payload state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayloadDescriptor {
    pub n_qubits: usize,
    pub pure: bool,
    pub purity: f64,
}

impl PayloadDescriptor {
    pub fn of(state: &QuantumState) -> Self {
        let purity = state.purity();
        Self {
            n_qubits: state.n_qubits(),
            pure: (purity - 1.0).abs() <= crate::qcore::STATE_TOL,
            purity,
        }
    }
}

/// Bob's pass probability for one attack on one payload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassProbabilityReport {
    pub exact: f64,
    pub closed_form: Option<f64>,
    pub mc_estimate: Option<McSummary>,
    pub attack: AttackSpec,
    pub payload: PayloadDescriptor,
}

impl PassProbabilityReport {
    /// Column order of [`Self::csv_record`].
    pub const CSV_COLUMNS: [&'static str; 8] = [
        "attack",
        "payload_qubits",
        "exact",
        "closed_form",
        "mc_mean",
        "mc_stderr",
        "mc_trials",
        "mc_within_3se",
    ];

    /// One CSV row; absent values are empty cells.
    pub fn csv_record(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(format_real).unwrap_or_default();
        let mc = self.mc_estimate.as_ref();
        vec![
            self.attack.variant_name().to_string(),
            self.payload.n_qubits.to_string(),
            format_real(self.exact),
            opt(self.closed_form),
            opt(mc.map(|m| m.mean)),
            opt(mc.map(|m| m.stderr)),
            mc.map(|m| m.trials.to_string()).unwrap_or_default(),
            mc.map(|m| m.within(self.exact, 3.0).to_string()).unwrap_or_default(),
        ]
    }
}

/// Fixed 12-significant-digit decimal rendering.
pub fn format_real(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0.00000000000".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (11 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding can carry into a new leading digit; one digit fewer then.
    let digits = s.chars().filter(char::is_ascii_digit).skip_while(|&c| c == '0').count();
    if digits > 12 && decimals > 0 {
        format!("{x:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}
