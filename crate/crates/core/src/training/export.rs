//! Plot-ready CSV and text renderings of evaluation results.

use std::fmt::Write as _;

use super::eval::{EvalReport, RobustnessReport};
use super::Objective;

pub const HISTORY_HEADER: &str = "step,objective,split,noise_sigma,param,mu,sigma";
pub const ROBUSTNESS_HEADER: &str = "objective,noise_sigma,param,mu,sigma";

/// One row per report and parameter.
pub fn history_csv(objective: Objective, history: &[EvalReport]) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in history {
        for (i, d) in r.params().iter().enumerate() {
            writeln!(out, "{},{objective},{},{},p{},{},{}", r.step, r.split, r.noise_sigma, i + 1, d.mu, d.sigma).unwrap();
        }
    }
    out
}

pub fn robustness_csv(report: &RobustnessReport) -> String {
    let mut out = String::from(ROBUSTNESS_HEADER);
    out.push('\n');
    for r in &report.rows {
        writeln!(out, "{},{},p{},{},{}", r.objective, r.noise_sigma, r.param, r.mu, r.sigma).unwrap();
    }
    out
}

pub fn robustness_summary(report: &RobustnessReport) -> String {
    let mut out = String::new();
    writeln!(out, "test-set relative deviation, noise sigma = {}", report.noise_sigma).unwrap();
    writeln!(out, "{:<12} {:<6} {:>10} {:>10} {:>10} {:>10}", "objective", "param", "clean mu", "clean sd", "noisy mu", "noisy sd")
        .unwrap();
    for objective in [Objective::Labelled, Objective::Unlabelled] {
        for p in 1..=2 {
            let c = report.get(objective, false, p);
            let n = report.get(objective, true, p);
            writeln!(
                out,
                "{:<12} p{:<5} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
                objective.to_string(),
                p,
                c.mu,
                c.sigma,
                n.mu,
                n.sigma
            )
            .unwrap();
        }
    }
    for p in 0..2 {
        writeln!(
            out,
            "p{}: noisy mu lower for unlabelled: {}; noisy/clean ratio labelled {:.3} vs unlabelled {:.3}",
            p + 1,
            report.unlabelled_lower_noisy[p],
            report.degradation[p][0],
            report.degradation[p][1]
        )
        .unwrap();
    }
    writeln!(out, "verdict: {}", report.verdict()).unwrap();
    out
}
