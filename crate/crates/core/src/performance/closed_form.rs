//! Closed-form use-and-then-forget SINR terms.
//!
//! Every term is the exact second-order statistic of the signal model for
//! local PZF with MMSE estimates. With ZF precoder norm E‖v‖² = γ/(N−|S|) and
//! MRT norm N·γ:
//!
//! * a ZF precoder of AP m leaks (β − γ) toward UEs in S_m (only the
//!   estimation error survives the nulling) and the full β toward UEs in W_m;
//! * an MRT precoder leaks β toward every UE; its own UE sees variance N·γ·β.
//!
//! When an AP's group is homogeneous (S_m empty or all UEs) these reduce to the
//! familiar pure-MRT and full-ZF expressions.

use crate::channel::LargeScaleModel;
use crate::error::Result;
use crate::precoding::GroupingAssignment;

use super::{check_inputs, DlTerms, DuplexAssignment, PowerAllocation, SeReport, UlTerms};

pub(crate) fn dl_terms(
    ls: &LargeScaleModel,
    grouping: &GroupingAssignment,
    duplex: &DuplexAssignment,
    power: &PowerAllocation,
) -> Vec<DlTerms> {
    let (m_aps, k_d) = (ls.m(), ls.k_d());
    let n = grouping.n as f64;
    let cross_link = duplex.structure.has_cross_link();
    (0..k_d)
        .map(|k| {
            let mut t = DlTerms::default();
            for m in (0..m_aps).filter(|&m| duplex.dl_mode[m]) {
                let beta = ls.beta_dl[(m, k)];
                let gamma = ls.gamma_dl[(m, k)];
                let k_strong = grouping.is_strong_dl(m, k);
                let dof = grouping.zf_dof_dl(m);
                let theta = power.theta[(m, k)];
                t.desired += theta * gamma * if k_strong { 1.0 } else { n };
                for kp in 0..k_d {
                    let th2 = power.theta[(m, kp)].powi(2);
                    let gp = ls.gamma_dl[(m, kp)];
                    let (term, leak) = if grouping.is_strong_dl(m, kp) {
                        if k_strong {
                            let v = th2 * gp / dof * (beta - gamma);
                            (v, v)
                        } else {
                            (th2 * gp / dof * beta, 0.0)
                        }
                    } else {
                        (th2 * n * gp * beta, 0.0)
                    };
                    if kp == k {
                        t.beamforming_uncertainty += term;
                    } else {
                        t.inter_ue += term;
                    }
                    t.estimation_leakage += leak;
                }
            }
            t.desired *= power.rho_d.sqrt();
            t.beamforming_uncertainty *= power.rho_d;
            t.inter_ue *= power.rho_d;
            t.estimation_leakage *= power.rho_d;
            if cross_link {
                t.ul_to_dl = power.rho_u
                    * (0..ls.k_u())
                        .map(|l| power.varsigma[l] * ls.beta_du[(k, l)])
                        .sum::<f64>();
            }
            t
        })
        .collect()
}

pub(crate) fn ul_terms(
    ls: &LargeScaleModel,
    grouping: &GroupingAssignment,
    duplex: &DuplexAssignment,
    power: &PowerAllocation,
) -> Vec<UlTerms> {
    let (m_aps, k_u) = (ls.m(), ls.k_u());
    let n = grouping.n as f64;
    let cross_link = duplex.structure.has_cross_link();
    let load: Vec<f64> = (0..m_aps)
        .map(|i| {
            if duplex.dl_mode[i] {
                power.ap_load(ls, grouping, i)
            } else {
                0.0
            }
        })
        .collect();
    (0..k_u)
        .map(|l| {
            let mut t = UlTerms::default();
            for m in (0..m_aps).filter(|&m| duplex.ul_mode[m]) {
                let alpha = power.alpha[(m, l)];
                let a2 = alpha * alpha;
                let gamma = ls.gamma_ul[(m, l)];
                let l_strong = grouping.is_strong_ul(m, l);
                let norm_u = grouping.expected_norm_sq_ul(ls, m, l);
                t.desired += alpha * gamma * if l_strong { 1.0 } else { n };
                for lp in 0..k_u {
                    let bp = ls.beta_ul[(m, lp)];
                    let both_strong = l_strong && grouping.is_strong_ul(m, lp);
                    let residual = if both_strong { bp - ls.gamma_ul[(m, lp)] } else { bp };
                    let term = power.rho_u * power.varsigma[lp] * a2 * norm_u * residual;
                    if lp == l {
                        t.beamforming_uncertainty += term;
                    } else {
                        t.inter_ue += term;
                    }
                    if both_strong {
                        t.estimation_leakage += term;
                    }
                }
                t.noise += a2 * norm_u;
                if cross_link {
                    for i in (0..m_aps).filter(|&i| duplex.dl_mode[i]) {
                        let term = power.rho_d * a2 * norm_u * ls.beta_ap[(m, i)] * load[i];
                        if i == m {
                            t.self_interference += term;
                        } else {
                            t.inter_ap += term;
                        }
                    }
                }
            }
            t.desired *= (power.rho_u * power.varsigma[l]).sqrt();
            t
        })
        .collect()
}

/// Per-DL-UE SE and Ξ/Ω breakdown.
pub fn dl_se_closed_form(
    ls: &LargeScaleModel,
    grouping: &GroupingAssignment,
    duplex: &DuplexAssignment,
    power: &PowerAllocation,
) -> Result<(Vec<f64>, Vec<DlTerms>)> {
    check_inputs(ls, grouping, duplex, power)?;
    let terms = dl_terms(ls, grouping, duplex, power);
    let pre = duplex.dl_prelog() * ls.payload_fraction();
    Ok((terms.iter().map(|t| pre * (1.0 + t.sinr()).log2()).collect(), terms))
}

/// Per-UL-UE SE and Ψ/Λ/Φ breakdown.
pub fn ul_se_closed_form(
    ls: &LargeScaleModel,
    grouping: &GroupingAssignment,
    duplex: &DuplexAssignment,
    power: &PowerAllocation,
) -> Result<(Vec<f64>, Vec<UlTerms>)> {
    check_inputs(ls, grouping, duplex, power)?;
    let terms = ul_terms(ls, grouping, duplex, power);
    let pre = duplex.ul_prelog() * ls.payload_fraction();
    Ok((terms.iter().map(|t| pre * (1.0 + t.sinr()).log2()).collect(), terms))
}

/// Both directions as one report.
pub fn evaluate(
    ls: &LargeScaleModel,
    grouping: &GroupingAssignment,
    duplex: &DuplexAssignment,
    power: &PowerAllocation,
) -> Result<SeReport> {
    check_inputs(ls, grouping, duplex, power)?;
    Ok(evaluate_unchecked(ls, grouping, duplex, power))
}

pub(crate) fn evaluate_unchecked(
    ls: &LargeScaleModel,
    grouping: &GroupingAssignment,
    duplex: &DuplexAssignment,
    power: &PowerAllocation,
) -> SeReport {
    SeReport::from_terms(
        duplex.structure,
        duplex.dl_prelog(),
        duplex.ul_prelog(),
        ls.payload_fraction(),
        dl_terms(ls, grouping, duplex, power),
        ul_terms(ls, grouping, duplex, power),
    )
}
