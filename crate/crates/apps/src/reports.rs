//! Seeded agreement runs between the solvers and their brute-force
//! references. A report is a deterministic function of its seed and trial
//! count (no timings are recorded), so two runs can be compared byte for
//! byte.

use nfold::oracle::{oracle_solve, OracleBudget, OracleError};
use nfold::random::{random_instance, RandomParams};
use nfold::{solve_validated, verify_solution, InstanceError, Mode, SolveError, SolverConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::scheduling::{self, Objective, SchedulingConfig, SchedulingError};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Scheduling(#[from] SchedulingError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub seed: u64,
    pub trials: usize,
    pub agreements: usize,
    /// Trials the oracle refused because of its budget.
    pub skipped: usize,
    pub records: Vec<serde_json::Value>,
}

impl CheckReport {
    fn new(check: &str, seed: u64, trials: usize) -> Self {
        Self {
            check: check.to_string(),
            seed,
            trials,
            agreements: 0,
            skipped: 0,
            records: Vec::with_capacity(trials),
        }
    }

    pub fn mismatches(&self) -> usize {
        self.trials - self.agreements - self.skipped
    }

    /// One summary line followed by one line per trial.
    pub fn to_jsonl(&self) -> String {
        let head = json!({
            "check": self.check,
            "seed": self.seed,
            "trials": self.trials,
            "agreements": self.agreements,
            "skipped": self.skipped,
            "mismatches": self.mismatches(),
        });
        let mut out = head.to_string();
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out
    }
}

/// Parameters of the random core instances used for `mode`.
pub fn core_params(mode: Mode) -> RandomParams {
    match mode {
        Mode::Feasibility => RandomParams::default(),
        // planted right-hand sides keep every instance feasible
        Mode::Optimization => RandomParams {
            c_max: Some(5),
            planted: 1.0,
            ..RandomParams::default()
        },
    }
}

/// Doubling solver against the exhaustive oracle on random instances.
pub fn core_check(
    seed: u64,
    trials: usize,
    mode: Mode,
    budget: &OracleBudget,
    cfg: &SolverConfig,
) -> Result<CheckReport, ReportError> {
    let name = match mode {
        Mode::Feasibility => "core-feasibility",
        Mode::Optimization => "core-optimization",
    };
    let mut report = CheckReport::new(name, seed, trials);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = core_params(mode);
    for trial in 0..trials {
        let inst = random_instance(&mut rng, &params);
        let v = inst.clone().validate()?;
        let (out, _) = solve_validated(&v, mode, cfg)?;
        let verified = match &out.solution {
            Some(sol) => verify_solution(&v, sol)?,
            None => true,
        };
        let expected = match oracle_solve(&inst, mode, budget) {
            Ok(e) => Some(e),
            Err(OracleError::BudgetExceeded { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        let agree = expected
            .as_ref()
            .map(|e| e.status == out.status && e.objective() == out.objective() && verified);
        match agree {
            Some(true) => report.agreements += 1,
            None => report.skipped += 1,
            Some(false) => {}
        }
        report.records.push(json!({
            "trial": trial,
            "n": v.n(),
            "r": v.r(),
            "delta": v.delta(),
            "b_low": v.b_low(),
            "status": out.status,
            "objective": out.objective(),
            "oracle_status": expected.as_ref().map(|e| e.status),
            "oracle_objective": expected.as_ref().and_then(|e| e.objective()),
            "iterations": out.stats.iterations,
            "verified": verified,
            "agree": agree,
        }));
    }
    Ok(report)
}

/// Cmax and Cmin against full enumeration on random scheduling instances
/// (`N ≤ 10`, `M ≤ 4`, `p_max ≤ 7`, speeds `≤ 3`). Each trial checks both
/// objectives and counts as one agreement only if both match.
pub fn scheduling_check(
    seed: u64,
    trials: usize,
    cfg: &SchedulingConfig,
) -> Result<CheckReport, ReportError> {
    let mut report = CheckReport::new("scheduling", seed, trials);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials {
        let inst = scheduling::random_instance(&mut rng, 10, 4, 7, 3);
        let mut all = true;
        let mut results = Vec::new();
        for objective in [Objective::Cmax, Objective::Cmin] {
            let s = scheduling::solve_objective(&inst, objective, cfg)?;
            let best = scheduling::brute_force(&inst, objective);
            let ok = s.objective == best && s.verify(&inst, objective);
            all &= ok;
            results.push(json!({
                "objective": objective,
                "value": s.objective.to_string(),
                "oracle": best.to_string(),
                "loads": s.loads,
                "agree": ok,
            }));
        }
        if all {
            report.agreements += 1;
        }
        report.records.push(json!({
            "trial": trial,
            "instance": inst,
            "results": results,
        }));
    }
    Ok(report)
}
