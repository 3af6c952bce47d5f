//! Constraint audit over logged runs.

use std::fmt;
use std::path::Path;

use safelimit_core::Variant;

use crate::error::Result;
use crate::records::{self, IterationRecord, RECORDS_FILE};

/// Slack allowed on the constructive bound for rounding in the division.
pub const CONSTRUCTIVE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RunAudit {
    pub run_id: String,
    pub variant: Variant,
    pub d_safe: f64,
    pub iterations: usize,
    /// Iterations whose empirical `p_u · t_lim` stayed within the budget.
    pub within_budget: usize,
    /// Iterations where `p_u_pred · t_lim_next ≤ d_safe`.
    pub constructive_ok: usize,
    pub max_growth: f64,
    pub kl_violations: usize,
    pub stalled: usize,
}

impl RunAudit {
    pub fn from_records(records: &[IterationRecord], d_safe: Option<f64>) -> Option<Self> {
        let first = records.first()?;
        let d_safe = d_safe.unwrap_or(first.d_safe);
        Some(Self {
            run_id: first.run_id.clone(),
            variant: first.variant,
            d_safe,
            iterations: records.len(),
            within_budget: records.iter().filter(|r| r.expected_damage <= d_safe).count(),
            constructive_ok: records
                .iter()
                .filter(|r| r.p_u_pred * r.t_lim_next <= d_safe + CONSTRUCTIVE_TOL)
                .count(),
            max_growth: records.iter().map(|r| r.t_lim_next / r.t_lim).fold(0.0, f64::max),
            kl_violations: records.iter().filter(|r| r.achieved_kl > r.delta_kl).count(),
            stalled: records.iter().filter(|r| r.stalled).count(),
        })
    }

    pub fn budget_fraction(&self) -> f64 {
        self.within_budget as f64 / self.iterations as f64
    }

    /// The fixed baseline never adapts, so only the bound's holders count.
    pub fn enforces_bound(&self) -> bool {
        self.variant != Variant::FixedLimit
    }

    pub fn passes(&self) -> bool {
        self.kl_violations == 0 && (!self.enforces_bound() || self.constructive_ok == self.iterations)
    }
}

impl fmt::Display for RunAudit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let constructive = if self.enforces_bound() {
            format!("{}/{}", self.constructive_ok, self.iterations)
        } else {
            "n/a".to_string()
        };
        write!(
            f,
            "{:<28} within-budget {:>6.1}%  constructive {:>9}  max-growth {:.6}  kl-violations {}  stalled {}  {}",
            self.run_id,
            100.0 * self.budget_fraction(),
            constructive,
            self.max_growth,
            self.kl_violations,
            self.stalled,
            if self.passes() { "ok" } else { "FAIL" },
        )
    }
}

/// Audits every run below `root`; `d_safe` overrides the logged budget.
pub fn verify(root: &Path, d_safe: Option<f64>) -> Result<Vec<RunAudit>> {
    let mut out = Vec::new();
    for dir in records::run_dirs(root)? {
        let records = records::read_records(&dir.join(RECORDS_FILE))?;
        out.extend(RunAudit::from_records(&records, d_safe));
    }
    Ok(out)
}
