use super::config::*;
use super::output::{to_csv, to_json};
use super::{CliError, Command, CommonArgs, Outcome};
use crate::analysis::{
    baseline_check_scheme, format_real, maximize_pb, mc_estimate, pb_exact, privacy_amplification, trial_seed,
    BaselineTarget, Objective, PassProbabilityReport, SearchBudget, BOUND_TOL,
};
use crate::attacks::{AttackSpec, InterceptResendMap};
use crate::protocol::{premature_disclosure_scenario, run_protocol, ProtocolConfig, Verdict, MAX_PROTOCOL_QUBITS};
use crate::qcore::{fidelity, BlochVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use std::f64::consts::{PI, TAU};
use std::path::PathBuf;

type CmdResult = Result<Outcome, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn load<T: DeserializeOwned>(args: &CommonArgs, name: &str) -> Result<T, CliError> {
    let text = match &args.config {
        Some(path) => {
            std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?
        }
        None => "{}".to_string(),
    };
    parse_config(&text, name).map_err(|e| usage(format!("invalid config: {e}")))
}

fn reject_flags(args: &CommonArgs, trials: bool, grid: bool) -> Result<(), CliError> {
    if !trials && args.trials.is_some() {
        return Err(usage("--trials does not apply to this subcommand"));
    }
    if !grid && args.grid.is_some() {
        return Err(usage("--grid does not apply to this subcommand"));
    }
    Ok(())
}

fn require_seed(config: Option<u64>, args: &CommonArgs) -> Result<u64, CliError> {
    args.seed
        .or(config)
        .ok_or_else(|| usage("a seed is required (config field \"seed\" or --seed)"))
}

/// Seeded generator for payload preparation, independent of protocol streams.
fn payload_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trial_seed(seed, u64::MAX))
}

fn json_only(format: Option<Format>) -> Result<(), CliError> {
    match format {
        Some(Format::Csv) => Err(usage("this subcommand emits JSON only")),
        _ => Ok(()),
    }
}

fn value<T: serde::Serialize>(x: &T) -> Result<Value, CliError> {
    serde_json::to_value(x).map_err(|e| usage(e.to_string()))
}

fn outcome(body: String, summary: String, violation: Option<String>, out: Option<PathBuf>) -> CmdResult {
    Ok(Outcome {
        body,
        summary,
        violation,
        out,
    })
}

pub(super) fn execute(command: &Command) -> CmdResult {
    match command {
        Command::Roundtrip(a) => roundtrip(a),
        Command::AttackSweep(a) => attack_sweep(a),
        Command::BoundSearch(a) => bound_search(a),
        Command::PrivacyAmp(a) => privacy_amp(a),
        Command::Scenario(a) => scenario(a),
        Command::McEstimate(a) => mc(a),
    }
}

fn check_protocol_size(n: usize) -> Result<(), CliError> {
    if n == 0 || n > MAX_PROTOCOL_QUBITS {
        return Err(usage(format!(
            "n_qubits must be in 1..={MAX_PROTOCOL_QUBITS}, found {n}"
        )));
    }
    Ok(())
}

fn roundtrip(args: &CommonArgs) -> CmdResult {
    reject_flags(args, false, false)?;
    let cfg: RoundtripConfig = load(args, "roundtrip")?;
    let seed = require_seed(cfg.seed, args)?;
    json_only(args.format.or(cfg.format))?;
    check_protocol_size(cfg.n_qubits)?;
    let psi = cfg.payload.build(cfg.n_qubits, &mut payload_rng(seed))?;
    let transcript = run_protocol(&psi, &ProtocolConfig::new(cfg.n_qubits, seed))?;
    let fid = transcript.fidelity.unwrap_or(0.0);
    let transcript_json = to_json(&value(&transcript)?);
    let mut report = json!({
        "subcommand": "roundtrip",
        "seed": seed,
        "n_qubits": cfg.n_qubits,
        "verdict": transcript.verdict,
        "fidelity": fid,
        "transcript_path": cfg.transcript.as_ref().map(|p| p.display().to_string()),
    });
    match &cfg.transcript {
        Some(path) => std::fs::write(path, &transcript_json)
            .map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?,
        None => {
            report["transcript"] = value(&transcript)?;
        }
    }
    let ok = transcript.verdict == Verdict::Delivered && fid >= 1.0 - 1e-10;
    let path = cfg
        .transcript
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "inline".into());
    outcome(
        to_json(&report),
        format!("fidelity {} transcript {path}", format_real(fid)),
        (!ok).then(|| format!("fidelity {fid} below 1 - 1e-10")),
        args.out.clone().or(cfg.out),
    )
}

/// Bloch vectors on a `grid x phi_points` angular lattice.
fn lattice(grid: u32, phi_points: u32) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 0..grid {
        let theta = if grid > 1 {
            PI * i as f64 / (grid - 1) as f64
        } else {
            0.0
        };
        for j in 0..phi_points {
            out.push((theta, TAU * j as f64 / phi_points as f64));
        }
    }
    out
}

fn attack_sweep(args: &CommonArgs) -> CmdResult {
    reject_flags(args, true, true)?;
    let mut cfg: AttackSweepConfig = load(args, "attack-sweep")?;
    cfg.grid = args.grid.unwrap_or(cfg.grid);
    cfg.trials = args.trials.unwrap_or(cfg.trials);
    let seed = match (cfg.trials, args.seed.or(cfg.seed)) {
        (0, s) => s,
        (_, None) => return Err(usage("a seed is required when trials > 0")),
        (_, s) => s,
    };
    if cfg.payload.is_random() && seed.is_none() {
        return Err(usage("a seed is required for a haar payload"));
    }
    if cfg.phi_points == 0 {
        return Err(usage("phi_points must be at least 1"));
    }
    let format = args.format.or(cfg.format).unwrap_or(Format::Csv);
    let names: &[&str] = match cfg.family {
        SweepFamily::SingleSide => &["measure", "resend"],
        SweepFamily::Pair => &["x1", "x2", "x3", "x4"],
    };
    let axis = lattice(cfg.grid, cfg.phi_points);
    let total = (axis.len() as u128).pow(names.len() as u32);
    if total > cfg.max_points as u128 {
        return Err(usage(format!(
            "grid has {total} points, above max_points {}",
            cfg.max_points
        )));
    }
    let psi = cfg.payload.build(1, &mut payload_rng(seed.unwrap_or(0)))?;
    let k = names.len();
    let points: Vec<Vec<(f64, f64)>> = (0..total as usize)
        .map(|mut i| {
            let mut p = vec![(0.0, 0.0); k];
            for slot in p.iter_mut().rev() {
                *slot = axis[i % axis.len()];
                i /= axis.len();
            }
            p
        })
        .collect();
    let reports = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let v: Vec<BlochVector> = p.iter().map(|&(t, f)| BlochVector::from_angles(t, f)).collect();
            let spec = match cfg.family {
                SweepFamily::SingleSide => AttackSpec::ir_single(cfg.side, v[0], v[1]),
                SweepFamily::Pair => AttackSpec::ir_pair(v[0], v[1], v[2], v[3]),
            };
            match (cfg.trials, seed) {
                (t, Some(s)) if t > 0 => mc_estimate(&psi, None, &spec, t, trial_seed(s, i as u64)),
                _ => pb_exact(&psi, None, &spec),
            }
        })
        .collect::<crate::Result<Vec<PassProbabilityReport>>>()?;

    let mut header: Vec<String> = vec!["index".into()];
    for n in names {
        header.push(format!("{n}_theta"));
        header.push(format!("{n}_phi"));
    }
    for c in ["closed_form", "exact", "mc_mean", "mc_stderr", "mc_trials"] {
        header.push(c.into());
    }
    let opt = |x: Option<f64>| x.map(format_real).unwrap_or_default();
    let mut rows: Vec<Vec<String>> = Vec::with_capacity(reports.len() + 1);
    for (i, (p, r)) in points.iter().zip(&reports).enumerate() {
        let mut row = vec![i.to_string()];
        for &(t, f) in p {
            row.push(format_real(t));
            row.push(format_real(f));
        }
        let mc = r.mc_estimate.as_ref();
        row.extend([
            opt(r.closed_form),
            format_real(r.exact),
            opt(mc.map(|m| m.mean)),
            opt(mc.map(|m| m.stderr)),
            mc.map(|m| m.trials.to_string()).unwrap_or_default(),
        ]);
        rows.push(row);
    }
    let max_exact = reports
        .iter()
        .map(|r| r.exact)
        .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
    let max_closed = reports
        .iter()
        .filter_map(|r| r.closed_form)
        .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
    if max_exact.is_some() {
        let mut row = vec!["max".to_string()];
        row.extend(std::iter::repeat_n(String::new(), 2 * k));
        row.extend([
            opt(max_closed),
            opt(max_exact),
            String::new(),
            String::new(),
            String::new(),
        ]);
        rows.push(row);
    }
    let bound = 0.75;
    let ok = max_exact.is_none_or(|m| m <= bound + BOUND_TOL);
    let body = match format {
        Format::Csv => to_csv(&header, &rows).map_err(usage)?,
        Format::Json => {
            let points: Vec<Value> = points
                .iter()
                .zip(&reports)
                .enumerate()
                .map(|(i, (p, r))| {
                    let mut obj = serde_json::Map::new();
                    obj.insert("index".into(), json!(i));
                    for (n, &(t, f)) in names.iter().zip(p) {
                        obj.insert(format!("{n}_theta"), json!(t));
                        obj.insert(format!("{n}_phi"), json!(f));
                    }
                    obj.insert("closed_form".into(), json!(r.closed_form));
                    obj.insert("exact".into(), json!(r.exact));
                    obj.insert("mc_estimate".into(), json!(r.mc_estimate));
                    Value::Object(obj)
                })
                .collect();
            to_json(&json!({
                "subcommand": "attack-sweep",
                "family": cfg.family,
                "grid": cfg.grid,
                "phi_points": cfg.phi_points,
                "points": points,
                "max_closed_form": max_closed,
                "max_exact": max_exact,
                "bound": bound,
                "pass": ok,
            }))
        }
    };
    outcome(
        body,
        format!(
            "{} points, max exact {}",
            reports.len(),
            max_exact.map(format_real).unwrap_or_else(|| "n/a".into())
        ),
        (!ok).then(|| format!("max {max_exact:?} exceeds {bound}")),
        args.out.clone().or(cfg.out),
    )
}

fn bound_search(args: &CommonArgs) -> CmdResult {
    reject_flags(args, false, true)?;
    let mut cfg: BoundSearchConfig = load(args, "bound-search")?;
    cfg.grid = args.grid.unwrap_or(cfg.grid);
    let seed = require_seed(cfg.seed, args)?;
    json_only(args.format.or(cfg.format))?;
    let objective: Objective = cfg.objective.parse().map_err(|e: crate::Error| usage(e.to_string()))?;
    let budget = SearchBudget {
        grid_points: cfg.grid as usize,
        refine_rounds: cfg.refine_rounds,
        max_grid_evals: cfg.max_grid_evals,
        starts: cfg.starts,
        seed,
    };
    if budget.grid_points < 2 || budget.starts == 0 || budget.max_grid_evals == 0 {
        return Err(usage("grid must be at least 2, starts and max_grid_evals at least 1"));
    }
    let result = maximize_pb(objective, &budget)?;
    let mut report = value(&result)?;
    report["pass"] = json!(result.within_bound);
    outcome(
        to_json(&report),
        format!(
            "{objective}: max {} bound {}",
            format_real(result.max_found),
            format_real(result.claimed_bound)
        ),
        (!result.within_bound).then(|| format!("max {} exceeds bound {}", result.max_found, result.claimed_bound)),
        args.out.clone().or(cfg.out),
    )
}

fn privacy_amp(args: &CommonArgs) -> CmdResult {
    reject_flags(args, false, false)?;
    let cfg: PrivacyAmpConfig = load(args, "privacy-amp")?;
    let seed = require_seed(cfg.seed, args)?;
    json_only(args.format.or(cfg.format))?;
    if cfg.levels == 0 || cfg.levels > crate::analysis::MAX_AMPLIFICATION_LEVELS {
        return Err(usage(format!(
            "levels must be in 1..={}, found {}",
            crate::analysis::MAX_AMPLIFICATION_LEVELS,
            cfg.levels
        )));
    }
    cfg.attack.validate(1 << (cfg.levels - 1))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let psi = cfg.payload.build(1, &mut payload_rng(seed))?;
    let chain = privacy_amplification(&psi, cfg.levels, &mut rng)?;
    let replacement = chain.pass_probability(&AttackSpec::replace_random())?;
    let expected = 0.5f64.powi((chain.total_qubits - 1) as i32);
    let attack_p = chain.pass_probability(&cfg.attack)?;
    let bound = 0.75f64.powi((chain.total_qubits / 2) as i32);
    let (recovered, _) = chain.decrypt(chain.ciphertext())?;
    let fid = fidelity(&psi, &recovered)?;
    let mut failures = Vec::new();
    if (replacement - expected).abs() > 1e-12 {
        failures.push(format!("replacement pass {replacement} != {expected}"));
    }
    if attack_p > bound + 1e-9 {
        failures.push(format!("attack pass {attack_p} exceeds {bound}"));
    }
    if fid < 1.0 - 1e-10 {
        failures.push(format!("round-trip fidelity {fid}"));
    }
    let report = json!({
        "subcommand": "privacy-amp",
        "seed": seed,
        "levels": cfg.levels,
        "total_qubits": chain.total_qubits,
        "signatures_per_level": chain.signatures_per_level(),
        "chain": value(&chain.levels)?,
        "replacement_pass_probability": replacement,
        "replacement_expected": expected,
        "attack": value(&cfg.attack)?,
        "attack_pass_probability": attack_p,
        "attack_bound": bound,
        "attack_within_bound": attack_p <= bound + 1e-9,
        "round_trip_fidelity": fid,
        "pass": failures.is_empty(),
    });
    outcome(
        to_json(&report),
        format!(
            "levels {}: replacement {} attack {} bound {}",
            cfg.levels,
            format_real(replacement),
            format_real(attack_p),
            format_real(bound)
        ),
        (!failures.is_empty()).then(|| failures.join("; ")),
        args.out.clone().or(cfg.out),
    )
}

fn scenario(args: &CommonArgs) -> CmdResult {
    reject_flags(args, true, false)?;
    let mut cfg: ScenarioConfig = load(args, "scenario")?;
    cfg.trials = args.trials.unwrap_or(cfg.trials);
    let seed = require_seed(cfg.seed, args)?;
    json_only(args.format.or(cfg.format))?;
    let out = args.out.clone().or(cfg.out.clone());
    match cfg.scenario.as_str() {
        "honest" | "premature_disclosure" => check_protocol_size(cfg.n_qubits)?,
        "baseline_check" => {
            if cfg.trials == 0 {
                return Err(usage("trials must be at least 1"));
            }
        }
        other => {
            return Err(usage(format!(
                "unknown scenario '{other}'; expected honest, premature_disclosure or baseline_check"
            )))
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match cfg.scenario.as_str() {
        "honest" => {
            let psi = cfg.payload.build(cfg.n_qubits, &mut payload_rng(seed))?;
            let t = run_protocol(&psi, &ProtocolConfig::new(cfg.n_qubits, seed))?;
            let ok = t.verdict == Verdict::Delivered;
            let report = json!({
                "subcommand": "scenario",
                "scenario": "honest",
                "seed": seed,
                "verdict": t.verdict,
                "fidelity": t.fidelity,
                "transcript": value(&t)?,
            });
            outcome(
                to_json(&report),
                format!("honest: verdict {:?}", t.verdict),
                (!ok).then(|| "honest run was not delivered".to_string()),
                out,
            )
        }
        "premature_disclosure" => {
            let psi = cfg.payload.build(cfg.n_qubits, &mut payload_rng(seed))?;
            let s = premature_disclosure_scenario(&psi, cfg.early_report, None, &mut rng)?;
            let report = json!({
                "subcommand": "scenario",
                "scenario": "premature_disclosure",
                "seed": seed,
                "early_report": cfg.early_report,
                "eve_fidelity": s.eve_fidelity,
                "bob_fidelity": s.bob_fidelity,
                "verdict": s.transcript.verdict,
                "transcript": value(&s.transcript)?,
            });
            outcome(
                to_json(&report),
                format!(
                    "premature_disclosure: eve fidelity {}",
                    s.eve_fidelity.map(format_real).unwrap_or_else(|| "none".into())
                ),
                None,
                out,
            )
        }
        _ => {
            let map = InterceptResendMap::computational();
            let r = baseline_check_scheme(cfg.n_qubits, &map, BaselineTarget::Uniform, cfg.trials, &mut rng)?;
            let report = json!({
                "subcommand": "scenario",
                "scenario": "baseline_check",
                "seed": seed,
                "n": r.n,
                "attack": "computational intercept/resend on one uniformly chosen position",
                "detection_failure_probability": r.exact,
                "detection_probability": 1.0 - r.exact,
                "estimate": value(&r.estimate)?,
            });
            outcome(
                to_json(&report),
                format!("baseline_check: detection failure {}", format_real(r.exact)),
                None,
                out,
            )
        }
    }
}

fn mc(args: &CommonArgs) -> CmdResult {
    reject_flags(args, true, false)?;
    let mut cfg: McEstimateConfig = load(args, "mc-estimate")?;
    cfg.trials = args.trials.unwrap_or(cfg.trials);
    let seed = require_seed(cfg.seed, args)?;
    check_protocol_size(cfg.n_qubits)?;
    if cfg.trials == 0 {
        return Err(usage("trials must be at least 1"));
    }
    if let Some(p) = &cfg.probe {
        if cfg.attack != AttackSpec::None {
            return Err(usage("give either attack or probe, not both"));
        }
        cfg.attack = p.attack()?;
    }
    cfg.attack.validate(cfg.n_qubits)?;
    if let Some(s) = &cfg.signature {
        if s.len() != cfg.n_qubits {
            return Err(usage("signature length must equal n_qubits"));
        }
    }
    let psi = cfg.payload.build(cfg.n_qubits, &mut payload_rng(seed))?;
    let r = mc_estimate(&psi, cfg.signature.as_ref(), &cfg.attack, cfg.trials, seed)?;
    let m = r.mc_estimate.expect("mc_estimate attaches a summary");
    let body = match args.format.or(cfg.format).unwrap_or(Format::Json) {
        Format::Csv => {
            let header: Vec<String> = PassProbabilityReport::CSV_COLUMNS
                .iter()
                .map(|s| s.to_string())
                .collect();
            to_csv(&header, &[r.csv_record()]).map_err(usage)?
        }
        Format::Json => {
            let mut v = value(&r)?;
            v["within_3se"] = json!(m.within(r.exact, 3.0));
            v["seed"] = json!(seed);
            to_json(&v)
        }
    };
    outcome(
        body,
        format!(
            "mc {} +- {} over {} trials, exact {}",
            format_real(m.mean),
            format_real(m.stderr),
            m.trials,
            format_real(r.exact)
        ),
        None,
        args.out.clone().or(cfg.out),
    )
}
