//! Runs every experiment once at the default scale and reports the
//! thirteen acceptance criteria, one PASS/FAIL line each.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use achronal_cli::{run, write_outputs, Check, Command, ExperimentConfig, Report};

struct Criterion {
    id: usize,
    title: &'static str,
    command: Command,
    /// Selects the checks of the command report that make up the criterion.
    select: fn(&Check) -> bool,
    /// Timed stage the runtime refers to; the whole command when `None`.
    stage: Option<&'static str>,
}

const CRITERIA: [Criterion; 13] = [
    Criterion { id: 1, title: "normalization", command: Command::Normalize, select: |_| true, stage: None },
    Criterion {
        id: 2,
        title: "flux invariance",
        command: Command::Invariance,
        select: |c| c.name == "max_pairwise_deviation",
        stage: Some("surfaces"),
    },
    Criterion { id: 3, title: "conservation", command: Command::Conservation, select: |c| c.name == "continuity_order", stage: None },
    Criterion { id: 4, title: "causal positivity", command: Command::Conservation, select: |c| c.name == "positivity", stage: None },
    Criterion { id: 5, title: "covariance", command: Command::Covariance, select: |c| c.name.starts_with("covariance["), stage: None },
    Criterion {
        id: 6,
        title: "boost Jacobian identity",
        command: Command::Covariance,
        select: |c| c.name.starts_with("jacobian_"),
        stage: None,
    },
    Criterion { id: 7, title: "kernel positive definiteness", command: Command::KernelPd, select: |_| true, stage: None },
    Criterion { id: 8, title: "oracle equivalence", command: Command::Oracle, select: |_| true, stage: None },
    Criterion {
        id: 9,
        title: "RCL well-definedness",
        command: Command::Logic,
        select: |c| c.name.starts_with("rcl[") || c.name == "determinacy_agreement",
        stage: None,
    },
    Criterion { id: 10, title: "causal condition", command: Command::Logic, select: |c| c.name == "causal_condition", stage: None },
    Criterion { id: 11, title: "polarization consistency", command: Command::Polarization, select: |_| true, stage: None },
    Criterion { id: 12, title: "unitarity", command: Command::Covariance, select: |c| c.name.starts_with("unitarity["), stage: None },
    Criterion { id: 13, title: "stress-energy variant", command: Command::Variants, select: |_| true, stage: None },
];

fn main() -> ExitCode {
    let out = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let cfg = ExperimentConfig { output_dir: out.clone(), ..ExperimentConfig::default() };

    let mut reports: BTreeMap<&'static str, (Result<Report, String>, f64)> = BTreeMap::new();
    for crit in &CRITERIA {
        let name = crit.command.name();
        if reports.contains_key(name) {
            continue;
        }
        let start = Instant::now();
        let rep = run(crit.command, &cfg).map_err(|e| format!("{e:#}"));
        let secs = start.elapsed().as_secs_f64();
        if let Ok(r) = &rep {
            if let Err(e) = write_outputs(r, &cfg, &out) {
                eprintln!("warning: could not write {name} outputs: {e:#}");
            }
        }
        eprintln!("ran {name} in {secs:.1}s");
        reports.insert(name, (rep, secs));
    }

    let mut failed = 0;
    for crit in &CRITERIA {
        let (rep, total) = &reports[crit.command.name()];
        let (label, secs) = match (crit.stage, rep) {
            (Some(st), Ok(r)) => match r.timings.iter().find(|(k, _)| k == st) {
                Some((_, t)) => (format!("{} {st}", crit.command.name()), *t),
                None => (crit.command.name().to_string(), *total),
            },
            _ => (crit.command.name().to_string(), *total),
        };
        let (ok, summary) = match rep {
            Err(e) => (false, format!("error: {e}")),
            Ok(r) => {
                let checks: Vec<&Check> = r.checks.iter().filter(|c| (crit.select)(c)).collect();
                let ok = !checks.is_empty() && checks.iter().all(|c| c.passed);
                let parts: Vec<String> = checks
                    .iter()
                    .map(|c| {
                        let mut s = format!("{}={:.3e} (tol {:.1e})", c.name, c.value, c.tolerance);
                        if !c.detail.is_empty() && crit.id == 13 {
                            s.push_str(&format!(": {}", c.detail));
                        }
                        s
                    })
                    .collect();
                (ok, if parts.is_empty() { "no checks found".into() } else { parts.join(", ") })
            }
        };
        if !ok {
            failed += 1;
        }
        println!("{} criterion {:>2} {}: {} [{} {:.0}s]", if ok { "PASS" } else { "FAIL" }, crit.id, crit.title, summary, label, secs);
    }
    println!("acceptance: {} of {} criteria pass; outputs in {}", CRITERIA.len() - failed, CRITERIA.len(), out.display());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
