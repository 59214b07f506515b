#![allow(dead_code)]

use cellfree::channel::{draw_large_scale, pathloss_db, ChannelConfig, LargeScaleModel};
use cellfree::config::ExperimentConfig;
use cellfree::performance::{DuplexAssignment, PowerAllocation};
use cellfree::topology::{generate_topology, NetworkTopology};
use nalgebra::DMatrix;

/// Channel settings of the default experiment for the given UE counts.
pub fn channel_config(k_d: usize, k_u: usize) -> ChannelConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.topology.k_d = k_d;
    cfg.topology.k_u = k_u;
    cfg.channel_config().unwrap()
}

/// Random network drawn exactly like an experiment instance.
pub fn random_model(m: usize, k_d: usize, k_u: usize, side: f64, seed: u64) -> LargeScaleModel {
    let topo = generate_topology(m, k_d, k_u, side, 20.0, seed).unwrap();
    draw_large_scale(&topo, &channel_config(k_d, k_u), seed).unwrap()
}

pub fn rel_eq(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Arbitrary admissible power coefficients: θ scaled so every AP sits at
/// `load` of its budget, UL weights in [0, 1].
pub fn scaled_power(
    ls: &LargeScaleModel,
    grouping: &cellfree::precoding::GroupingAssignment,
    duplex: &DuplexAssignment,
    load: f64,
    varsigma: f64,
) -> PowerAllocation {
    let ch = channel_config(ls.k_d(), ls.k_u());
    let mut p = cellfree::assignment::power_rule_fractional(ls, grouping, duplex, 0.5, ch.rho_d, ch.rho_u).unwrap();
    p.theta *= load.sqrt();
    p.varsigma = vec![varsigma; ls.k_u()];
    p.alpha = DMatrix::from_fn(ls.m(), ls.k_u(), |m, l| {
        if duplex.ul_mode[m] {
            0.5 + 0.5 * ((m + 2 * l) % 3) as f64 / 2.0
        } else {
            0.0
        }
    });
    p
}

/// Textbook SINR pieces of one UE, written out per link independently of
/// the library's term bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct Reference {
    pub desired: f64,
    pub interference: f64,
    /// UL only: cross-link part.
    pub cross: f64,
}

fn si_gain(ls: &LargeScaleModel, m: usize, i: usize) -> f64 {
    ls.beta_ap[(m, i)]
}

/// Pure-MRT DL: every AP conjugate-beamforms to every UE.
pub fn mrt_dl(ls: &LargeScaleModel, d: &DuplexAssignment, p: &PowerAllocation, n: usize, k: usize) -> Reference {
    let n = n as f64;
    let mut xi = 0.0;
    let mut omega = 0.0;
    for m in (0..ls.m()).filter(|&m| d.dl_mode[m]) {
        xi += p.theta[(m, k)] * n * ls.gamma_dl[(m, k)];
        for kp in 0..ls.k_d() {
            omega += p.theta[(m, kp)].powi(2) * n * ls.gamma_dl[(m, kp)] * ls.beta_dl[(m, k)];
        }
    }
    let cross = if d.structure.has_cross_link() {
        p.rho_u * (0..ls.k_u()).map(|l| p.varsigma[l] * ls.beta_du[(k, l)]).sum::<f64>()
    } else {
        0.0
    };
    Reference {
        desired: p.rho_d.sqrt() * xi,
        interference: p.rho_d * omega + cross,
        cross,
    }
}

/// Pure-MRT UL with large-scale weights α.
pub fn mrt_ul(ls: &LargeScaleModel, d: &DuplexAssignment, p: &PowerAllocation, n: usize, l: usize) -> Reference {
    let n = n as f64;
    let (mut psi, mut lambda, mut phi) = (0.0, 0.0, 0.0);
    for m in (0..ls.m()).filter(|&m| d.ul_mode[m]) {
        let a2g = p.alpha[(m, l)].powi(2) * n * ls.gamma_ul[(m, l)];
        psi += p.alpha[(m, l)] * n * ls.gamma_ul[(m, l)];
        lambda += a2g * (1.0 + p.rho_u * (0..ls.k_u()).map(|lp| p.varsigma[lp] * ls.beta_ul[(m, lp)]).sum::<f64>());
        if d.structure.has_cross_link() {
            for i in (0..ls.m()).filter(|&i| d.dl_mode[i]) {
                let radiated: f64 = (0..ls.k_d())
                    .map(|q| p.theta[(i, q)].powi(2) * n * ls.gamma_dl[(i, q)])
                    .sum();
                phi += p.rho_d * a2g * si_gain(ls, m, i) * radiated;
            }
        }
    }
    Reference {
        desired: (p.rho_u * p.varsigma[l]).sqrt() * psi,
        interference: lambda + phi,
        cross: phi,
    }
}

/// Full ZF toward all K UEs of the direction (K < N).
pub fn fzf_dl(ls: &LargeScaleModel, d: &DuplexAssignment, p: &PowerAllocation, n: usize, k: usize) -> Reference {
    let dof = (n - ls.k_d()) as f64;
    let mut xi = 0.0;
    let mut omega = 0.0;
    for m in (0..ls.m()).filter(|&m| d.dl_mode[m]) {
        xi += p.theta[(m, k)] * ls.gamma_dl[(m, k)];
        let err = ls.beta_dl[(m, k)] - ls.gamma_dl[(m, k)];
        for kp in 0..ls.k_d() {
            omega += p.theta[(m, kp)].powi(2) * ls.gamma_dl[(m, kp)] / dof * err;
        }
    }
    let cross = if d.structure.has_cross_link() {
        p.rho_u * (0..ls.k_u()).map(|l| p.varsigma[l] * ls.beta_du[(k, l)]).sum::<f64>()
    } else {
        0.0
    };
    Reference {
        desired: p.rho_d.sqrt() * xi,
        interference: p.rho_d * omega + cross,
        cross,
    }
}

pub fn fzf_ul(ls: &LargeScaleModel, d: &DuplexAssignment, p: &PowerAllocation, n: usize, l: usize) -> Reference {
    let dof_ul = (n - ls.k_u()) as f64;
    let dof_dl = (n - ls.k_d()) as f64;
    let (mut psi, mut lambda, mut phi) = (0.0, 0.0, 0.0);
    for m in (0..ls.m()).filter(|&m| d.ul_mode[m]) {
        let a2g = p.alpha[(m, l)].powi(2) * ls.gamma_ul[(m, l)] / dof_ul;
        psi += p.alpha[(m, l)] * ls.gamma_ul[(m, l)];
        let residual: f64 = (0..ls.k_u())
            .map(|lp| p.varsigma[lp] * (ls.beta_ul[(m, lp)] - ls.gamma_ul[(m, lp)]))
            .sum();
        lambda += a2g * (1.0 + p.rho_u * residual);
        if d.structure.has_cross_link() {
            for i in (0..ls.m()).filter(|&i| d.dl_mode[i]) {
                let radiated: f64 = (0..ls.k_d())
                    .map(|q| p.theta[(i, q)].powi(2) * ls.gamma_dl[(i, q)] / dof_dl)
                    .sum();
                phi += p.rho_d * a2g * si_gain(ls, m, i) * radiated;
            }
        }
    }
    Reference {
        desired: (p.rho_u * p.varsigma[l]).sqrt() * psi,
        interference: lambda + phi,
        cross: phi,
    }
}

/// Shadowing (dB) of every UE at AP `m`, recovered from β and the path loss.
pub fn shadowing_db(topo: &NetworkTopology, ls: &LargeScaleModel, m: usize) -> Vec<f64> {
    let ap = topo.aps[m];
    topo.dl_ues
        .iter()
        .enumerate()
        .map(|(k, &ue)| 10.0 * ls.beta_dl[(m, k)].log10() - pathloss_db(topo.distance(ap, ue)).unwrap())
        .collect()
}
