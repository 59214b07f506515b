//! AP duplex-mode selection for NAFD under per-UE SE requirements.
//!
//! Power control is a fixed fractional rule, so a mode vector fully determines
//! the operating point. The objective orders assignments by feasibility
//! first, then EE (feasible) or worst-UE slack (infeasible).

use std::cmp::Ordering;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::channel::LargeScaleModel;
use crate::energy::{cf_total_power, energy_efficiency, CfActivity, PowerModelParams};
use crate::error::{Error, Result};
use crate::performance::{self, DuplexAssignment, PowerAllocation, SeReport};
use crate::precoding::GroupingAssignment;

/// Default enumeration limit for [`exhaustive_mode_select`].
pub const EXHAUSTIVE_M_MAX: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosSpec {
    pub dl: f64,
    pub ul: f64,
}

impl QosSpec {
    pub fn uniform(level: f64) -> Self {
        QosSpec { dl: level, ul: level }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosCheck {
    pub feasible: bool,
    /// min over UEs of SE − requirement; +∞ when there are no UEs.
    pub slack: f64,
}

pub fn check_qos(report: &SeReport, qos: QosSpec) -> QosCheck {
    let dl = report.dl_se.iter().map(|s| s - qos.dl);
    let ul = report.ul_se.iter().map(|s| s - qos.ul);
    let slack = dl.chain(ul).fold(f64::INFINITY, f64::min);
    QosCheck {
        feasible: slack >= 0.0,
        slack,
    }
}

/// θ_mk ∝ γ_mk^exponent with Σ_k θ²_mk E‖v_mk‖² = 1 at every DL-mode AP;
/// ς = 1; α_mℓ = b_m.
pub fn power_rule_fractional(
    ls: &LargeScaleModel,
    grouping: &GroupingAssignment,
    duplex: &DuplexAssignment,
    exponent: f64,
    rho_d: f64,
    rho_u: f64,
) -> Result<PowerAllocation> {
    let theta = fractional_theta(ls, grouping, exponent)?;
    Ok(allocation_for(&theta, ls, duplex, rho_d, rho_u))
}

fn fractional_theta(ls: &LargeScaleModel, grouping: &GroupingAssignment, exponent: f64) -> Result<DMatrix<f64>> {
    if !(-1.0..=1.0).contains(&exponent) {
        return Err(Error::InvalidInput(format!("power exponent must lie in [-1, 1], got {exponent}")));
    }
    let (m, k_d) = (ls.m(), ls.k_d());
    let mut theta = DMatrix::zeros(m, k_d);
    for a in 0..m {
        // Work relative to the AP's largest γ to keep powf in range.
        let g_max = (0..k_d).map(|k| ls.gamma_dl[(a, k)]).fold(0.0, f64::max);
        let w: Vec<f64> = (0..k_d).map(|k| (ls.gamma_dl[(a, k)] / g_max).powf(exponent)).collect();
        let norm: f64 = (0..k_d)
            .map(|k| w[k] * w[k] * grouping.expected_norm_sq_dl(ls, a, k))
            .sum();
        for k in 0..k_d {
            theta[(a, k)] = w[k] / norm.sqrt();
        }
    }
    Ok(theta)
}

fn allocation_for(
    theta_full: &DMatrix<f64>,
    ls: &LargeScaleModel,
    duplex: &DuplexAssignment,
    rho_d: f64,
    rho_u: f64,
) -> PowerAllocation {
    let theta = DMatrix::from_fn(theta_full.nrows(), theta_full.ncols(), |m, k| {
        if duplex.dl_mode[m] {
            theta_full[(m, k)]
        } else {
            0.0
        }
    });
    let alpha = DMatrix::from_fn(ls.m(), ls.k_u(), |m, _| if duplex.ul_mode[m] { 1.0 } else { 0.0 });
    PowerAllocation {
        theta,
        varsigma: vec![1.0; ls.k_u()],
        alpha,
        rho_d,
        rho_u,
    }
}

/// Comparison key of an operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub feasible: bool,
    /// EE when feasible, worst-UE slack otherwise.
    pub value: f64,
}

impl Objective {
    pub fn cmp(&self, other: &Objective) -> Ordering {
        self.feasible
            .cmp(&other.feasible)
            .then(self.value.total_cmp(&other.value))
    }
}

#[derive(Debug, Clone)]
pub struct AssignmentSolution {
    pub duplex: DuplexAssignment,
    pub power: PowerAllocation,
    pub feasible: bool,
    pub slack: f64,
    /// Sum SE over total power (bits/s/Hz per W).
    pub ee: f64,
    pub total_power: f64,
    pub report: SeReport,
}

impl AssignmentSolution {
    pub fn objective(&self) -> Objective {
        Objective {
            feasible: self.feasible,
            value: if self.feasible { self.ee } else { self.slack },
        }
    }
}

/// Everything needed to score a mode vector.
#[derive(Debug, Clone)]
pub struct ModeProblem<'a> {
    pub ls: &'a LargeScaleModel,
    pub grouping: &'a GroupingAssignment,
    pub qos: QosSpec,
    pub params: &'a PowerModelParams,
    pub rho_d: f64,
    pub rho_u: f64,
    theta_full: DMatrix<f64>,
}

impl<'a> ModeProblem<'a> {
    pub fn new(
        ls: &'a LargeScaleModel,
        grouping: &'a GroupingAssignment,
        qos: QosSpec,
        params: &'a PowerModelParams,
        exponent: f64,
        rho_d: f64,
        rho_u: f64,
    ) -> Result<Self> {
        ls.validate()?;
        params.validate()?;
        if grouping.m() != ls.m() {
            return Err(Error::contract("grouping", format!("expected {} APs", ls.m())));
        }
        Ok(ModeProblem {
            ls,
            grouping,
            qos,
            params,
            rho_d,
            rho_u,
            theta_full: fractional_theta(ls, grouping, exponent)?,
        })
    }

    pub fn with_qos(&self, qos: QosSpec) -> Self {
        ModeProblem { qos, ..self.clone() }
    }

    /// SE, power and EE of `duplex` under the fractional power rule.
    pub fn evaluate(&self, duplex: &DuplexAssignment) -> Result<AssignmentSolution> {
        let power = allocation_for(&self.theta_full, self.ls, duplex, self.rho_d, self.rho_u);
        let report = performance::evaluate(self.ls, self.grouping, duplex, &power)?;
        let activity = CfActivity::from_allocation(self.ls, self.grouping, duplex, &power);
        let total_power = cf_total_power(&report, duplex, &activity, self.params)?;
        let ee = energy_efficiency(report.sum_se(), total_power)?;
        let q = check_qos(&report, self.qos);
        Ok(AssignmentSolution {
            duplex: duplex.clone(),
            power,
            feasible: q.feasible,
            slack: q.slack,
            ee,
            total_power,
            report,
        })
    }

    fn evaluate_nafd(&self, dl_mode: Vec<bool>) -> Result<AssignmentSolution> {
        self.evaluate(&DuplexAssignment::nafd(dl_mode))
    }
}

/// Mode vector for enumeration index `idx`; AP 0 is the most significant bit
/// so increasing `idx` walks the vectors in lexicographic order.
fn mode_vector(idx: u64, m: usize) -> Vec<bool> {
    (0..m).map(|a| (idx >> (m - 1 - a)) & 1 == 1).collect()
}

/// Best NAFD assignment over all 2^M mode vectors. Ties resolve to the
/// lexicographically smallest `a`.
pub fn exhaustive_mode_select(problem: &ModeProblem<'_>, m_max: usize) -> Result<AssignmentSolution> {
    let m = problem.ls.m();
    if m > m_max || m >= 63 {
        return Err(Error::Scale { m, limit: m_max.min(62) });
    }
    let best = (0..1u64 << m)
        .into_par_iter()
        .map(|idx| problem.evaluate_nafd(mode_vector(idx, m)).map(|s| (idx, s)))
        .try_reduce_with(|a, b| {
            // Strictly better wins; on ties the smaller index is kept.
            let keep_b = match b.1.objective().cmp(&a.1.objective()) {
                Ordering::Greater => true,
                Ordering::Equal => b.0 < a.0,
                Ordering::Less => false,
            };
            Ok(if keep_b { b } else { a })
        })
        .expect("at least one mode vector")?;
    Ok(best.1)
}

/// Outcome of [`greedy_mode_select`] with the objective after each accepted flip.
#[derive(Debug, Clone)]
pub struct GreedyOutcome {
    pub solution: AssignmentSolution,
    pub trace: Vec<Objective>,
}

/// Starts each AP in the direction with the larger aggregate gain, then
/// repeatedly applies the single flip that improves the objective most
/// (lowest AP index on ties) until no flip improves it.
pub fn greedy_mode_select(problem: &ModeProblem<'_>) -> Result<GreedyOutcome> {
    let (ls, m) = (problem.ls, problem.ls.m());
    let start: Vec<bool> = (0..m)
        .map(|a| {
            let dl: f64 = ls.beta_dl.row(a).iter().sum();
            let ul: f64 = ls.beta_ul.row(a).iter().sum();
            ls.k_u() == 0 || (ls.k_d() > 0 && dl >= ul)
        })
        .collect();
    let mut current = problem.evaluate_nafd(start)?;
    let mut trace = vec![current.objective()];
    loop {
        let base = current.duplex.dl_mode.clone();
        let candidates: Vec<AssignmentSolution> = (0..m)
            .into_par_iter()
            .map(|a| {
                let mut v = base.clone();
                v[a] = !v[a];
                problem.evaluate_nafd(v)
            })
            .collect::<Result<_>>()?;
        let mut best: Option<AssignmentSolution> = None;
        for cand in candidates {
            let beats_best = best
                .as_ref()
                .is_none_or(|b| cand.objective().cmp(&b.objective()) == Ordering::Greater);
            if beats_best {
                best = Some(cand);
            }
        }
        match best {
            Some(b) if b.objective().cmp(&current.objective()) == Ordering::Greater => {
                current = b;
                trace.push(current.objective());
            }
            _ => break,
        }
    }
    Ok(GreedyOutcome { solution: current, trace })
}
