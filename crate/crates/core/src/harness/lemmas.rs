//! The numerical checks behind `verify-lemmas`, grouped into one report.

use crate::analysis::{
    lemma1_chain, lemma3_check, quantization_error_report, sm_discrepancy_report, ChainReport, Lemma3Report,
    QuantizationReport, SmDiscrepancyReport,
};
use crate::error::Result;
use crate::optim::SmFormula;
use crate::rng::Rng;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaSuiteConfig {
    pub seed: u64,
    pub chain_steps: usize,
    pub chain_dims: Vec<usize>,
    pub gammas: Vec<f64>,
    pub epsilon_norm: f64,
    pub zeta: f64,
    pub sm_trials: usize,
    pub sm_max_d: usize,
    pub quant_dims: Vec<usize>,
    pub quant_trials: usize,
    pub lemma3_trials: usize,
    pub lemma3_max_d: usize,
}

impl Default for LemmaSuiteConfig {
    fn default() -> Self {
        LemmaSuiteConfig {
            seed: 0,
            chain_steps: 10_000,
            chain_dims: vec![4, 16, 64],
            gammas: vec![0.9, 0.99],
            epsilon_norm: 100.0,
            zeta: 0.95,
            sm_trials: 1000,
            sm_max_d: 32,
            quant_dims: vec![8, 16, 32],
            quant_trials: 50,
            lemma3_trials: 100,
            lemma3_max_d: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaSuiteReport {
    pub chains_mkor: Vec<ChainReport>,
    pub chains_exact: Vec<ChainReport>,
    pub sm: Vec<SmDiscrepancyReport>,
    pub quantization: Vec<QuantizationReport>,
    pub quantization_exact_arith: Vec<QuantizationReport>,
    pub lemma3: Lemma3Report,
    pub checks: Vec<Check>,
}

impl LemmaSuiteReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn chain_check(name: &str, chains: &[ChainReport]) -> Check {
    let failures: Vec<String> = chains
        .iter()
        .filter_map(|c| {
            c.first_failure
                .map(|s| format!("d={} γ={} fails at step {s}", c.d, c.gamma))
        })
        .collect();
    Check {
        name: name.into(),
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("{} chains positive-definite throughout", chains.len())
        } else {
            failures.join("; ")
        },
    }
}

pub fn run_lemma_suite(cfg: &LemmaSuiteConfig) -> Result<LemmaSuiteReport> {
    let root = Rng::new(cfg.seed);
    let mut stream = 0u64;
    let mut next_rng = || {
        stream += 1;
        root.fork(stream)
    };

    let mut chains_mkor = Vec::new();
    let mut chains_exact = Vec::new();
    for &d in &cfg.chain_dims {
        for &g in &cfg.gammas {
            chains_mkor.push(lemma1_chain(
                d,
                cfg.chain_steps,
                g,
                SmFormula::Mkor,
                cfg.epsilon_norm,
                cfg.zeta,
                &mut next_rng(),
            )?);
            chains_exact.push(lemma1_chain(
                d,
                cfg.chain_steps,
                g,
                SmFormula::Exact,
                cfg.epsilon_norm,
                cfg.zeta,
                &mut next_rng(),
            )?);
        }
    }

    let mut sm = Vec::new();
    for &g in &cfg.gammas {
        sm.push(sm_discrepancy_report(cfg.sm_max_d, cfg.sm_trials, g, &mut next_rng())?);
    }

    let mut quantization = Vec::new();
    let mut quantization_exact_arith = Vec::new();
    for &d in &cfg.quant_dims {
        for &g in &cfg.gammas {
            quantization.push(quantization_error_report(
                d,
                g,
                cfg.quant_trials,
                true,
                &mut next_rng(),
            )?);
            quantization_exact_arith.push(quantization_error_report(
                d,
                g,
                cfg.quant_trials,
                false,
                &mut next_rng(),
            )?);
        }
    }

    let mut rng = next_rng();
    let mut lemma3 = None::<Lemma3Report>;
    let per_shape = cfg.lemma3_trials.div_ceil(cfg.lemma3_max_d * cfg.lemma3_max_d).max(1);
    let mut remaining = cfg.lemma3_trials;
    'outer: for dl in 1..=cfg.lemma3_max_d {
        for dr in 1..=cfg.lemma3_max_d {
            if remaining == 0 {
                break 'outer;
            }
            let n = per_shape.min(remaining);
            remaining -= n;
            let r = lemma3_check(dl, dr, cfg.zeta, n, &mut rng)?;
            lemma3 = Some(match lemma3 {
                None => r,
                Some(acc) => Lemma3Report {
                    trials: acc.trials + r.trials,
                    descent: acc.descent + r.descent,
                    min_descent: acc.min_descent.min(r.min_descent),
                    max_expansion_error: acc.max_expansion_error.max(r.max_expansion_error),
                },
            });
        }
    }
    let lemma3 = lemma3.expect("at least one Lemma 3 trial");

    let mut checks = vec![
        chain_check("factor inverses stay positive-definite (mkor update)", &chains_mkor),
        chain_check("factor inverses stay positive-definite (exact update)", &chains_exact),
    ];
    let sm_worst = sm.iter().map(|r| r.exact_max_error_per_d).fold(0.0, f64::max);
    checks.push(Check {
        name: "exact update matches direct inverse".into(),
        passed: sm_worst < 1e-9,
        detail: format!("max ‖diff‖∞/d = {sm_worst:.3e}"),
    });
    let c_worst = quantization.iter().map(|r| r.fitted_constant).fold(0.0, f64::max);
    checks.push(Check {
        name: "binary16 quantization error constant ≤ 16".into(),
        passed: c_worst <= 16.0,
        detail: format!("max fitted C = {c_worst:.3}"),
    });
    let e0 = quantization_exact_arith.iter().map(|r| r.max_error).fold(0.0, f64::max);
    checks.push(Check {
        name: "quantization error vanishes at ε = 0".into(),
        passed: e0 == 0.0,
        detail: format!("max error = {e0:e}"),
    });
    checks.push(Check {
        name: "blended preconditioner gives strict descent".into(),
        passed: lemma3.passed(1e-10),
        detail: format!(
            "{}/{} descent, min ∇ℒᵀΔw = {:.3e}, max expansion error = {:.3e}",
            lemma3.descent, lemma3.trials, lemma3.min_descent, lemma3.max_expansion_error
        ),
    });

    Ok(LemmaSuiteReport {
        chains_mkor,
        chains_exact,
        sm,
        quantization,
        quantization_exact_arith,
        lemma3,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_runs() {
        let cfg = LemmaSuiteConfig {
            chain_steps: 50,
            chain_dims: vec![3],
            sm_trials: 20,
            sm_max_d: 5,
            quant_dims: vec![4],
            quant_trials: 5,
            lemma3_trials: 10,
            lemma3_max_d: 2,
            ..Default::default()
        };
        let r = run_lemma_suite(&cfg).unwrap();
        assert_eq!(r.checks.len(), 6);
        assert_eq!(r.lemma3.trials, 10);
        assert!(r.checks[1].passed);
    }
}
