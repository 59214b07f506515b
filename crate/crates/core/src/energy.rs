//! Power consumption and energy efficiency.
//!
//! Cell-free totals are built from three parts: UL UE power, AP power of the
//! APs that transmit (plus SIC for APs that also receive), and one affine
//! fronthaul term per AP driven by the aggregate network rate.

use serde::Deserialize;

use crate::channel::LargeScaleModel;
use crate::error::{Error, Result};
use crate::performance::{DuplexAssignment, PowerAllocation, SeReport, Structure};
use crate::precoding::GroupingAssignment;

/// All powers in W, `fh_traffic` in W per bit/s, `bandwidth` in Hz.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerModelParams {
    pub fh_fixed: f64,
    pub fh_traffic: f64,
    pub eps_ap: f64,
    pub eps_ue: f64,
    /// Maximum radiated power of an AP; scaled by its normalized load.
    pub p_ap_max: f64,
    /// Maximum radiated power of a UL UE; scaled by ς.
    pub p_ue_max: f64,
    pub p_ue_circuit: f64,
    pub p_ap_tx_fixed: f64,
    /// Per active transmit RF chain.
    pub p_ap_dyn_tx: f64,
    /// Per active receive RF chain.
    pub p_ap_dyn_rx: f64,
    pub p_ap_static: f64,
    /// Per receive chain of a full-duplex transceiver.
    pub p_sic: f64,
    pub bandwidth: f64,
}

impl Default for PowerModelParams {
    fn default() -> Self {
        PowerModelParams {
            fh_fixed: 0.825,
            fh_traffic: 0.25e-9,
            eps_ap: 0.4,
            eps_ue: 0.3,
            p_ap_max: 0.2,
            p_ue_max: 0.1,
            p_ue_circuit: 0.1,
            p_ap_tx_fixed: 0.1,
            p_ap_dyn_tx: 0.2,
            p_ap_dyn_rx: 0.2,
            p_ap_static: 0.1,
            p_sic: 1.0,
            bandwidth: 20e6,
        }
    }
}

impl PowerModelParams {
    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            ("fh_fixed", self.fh_fixed),
            ("fh_traffic", self.fh_traffic),
            ("p_ap_max", self.p_ap_max),
            ("p_ue_max", self.p_ue_max),
            ("p_ue_circuit", self.p_ue_circuit),
            ("p_ap_tx_fixed", self.p_ap_tx_fixed),
            ("p_ap_dyn_tx", self.p_ap_dyn_tx),
            ("p_ap_dyn_rx", self.p_ap_dyn_rx),
            ("p_ap_static", self.p_ap_static),
            ("p_sic", self.p_sic),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("power.{name}"), format!("must be >= 0, got {v}")));
            }
        }
        for (name, v) in [("eps_ap", self.eps_ap), ("eps_ue", self.eps_ue)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::config(format!("power.{name}"), format!("must lie in (0, 1), got {v}")));
            }
        }
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(Error::config("power.bandwidth", "must be positive"));
        }
        Ok(())
    }

    /// Circuit power of an AP or BS with the given RF chain counts.
    pub fn ap_circuit(&self, n_tx: usize, n_rx: usize) -> f64 {
        self.p_ap_tx_fixed + n_tx as f64 * self.p_ap_dyn_tx + n_rx as f64 * self.p_ap_dyn_rx + self.p_ap_static
    }

    /// Power drawn by one UL UE transmitting at fraction `varsigma` of its maximum.
    pub fn ue_power(&self, varsigma: f64) -> f64 {
        varsigma * self.p_ue_max / self.eps_ue + self.p_ue_circuit
    }
}

/// Affine fronthaul power of one AP at `rate_bps`.
pub fn fronthaul_power(rate_bps: f64, params: &PowerModelParams) -> Result<f64> {
    if !(rate_bps.is_finite() && rate_bps >= 0.0) {
        return Err(Error::InvalidInput(format!("rate must be >= 0, got {rate_bps}")));
    }
    Ok(params.fh_fixed + rate_bps * params.fh_traffic)
}

/// Per-node transmit activity of a cell-free configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CfActivity {
    pub n_antennas: usize,
    /// Normalized expected transmit power per AP (0 for APs not in DL mode).
    pub ap_load: Vec<f64>,
    pub varsigma: Vec<f64>,
}

impl CfActivity {
    pub fn from_allocation(
        ls: &LargeScaleModel,
        grouping: &GroupingAssignment,
        duplex: &DuplexAssignment,
        power: &PowerAllocation,
    ) -> Self {
        CfActivity {
            n_antennas: grouping.n,
            ap_load: (0..ls.m())
                .map(|m| {
                    if duplex.dl_mode[m] {
                        power.ap_load(ls, grouping, m)
                    } else {
                        0.0
                    }
                })
                .collect(),
            varsigma: power.varsigma.clone(),
        }
    }
}

/// Total power of a cell-free network: NAFD (including hybrid APs), FD
/// (every AP transmits and receives with SIC) or HD (time-shared).
pub fn cf_total_power(
    report: &SeReport,
    duplex: &DuplexAssignment,
    activity: &CfActivity,
    params: &PowerModelParams,
) -> Result<f64> {
    if report.structure != duplex.structure {
        return Err(Error::contract(
            "energy.structure",
            format!("report is {} but assignment is {}", report.structure, duplex.structure),
        ));
    }
    let m = duplex.m();
    if activity.ap_load.len() != m {
        return Err(Error::contract("energy.ap_load", format!("length must be {m}")));
    }
    let n = activity.n_antennas;
    let ap_tx = |a: usize| activity.ap_load[a] * params.p_ap_max / params.eps_ap + params.ap_circuit(n, n);
    let sic = n as f64 * params.p_sic;
    let ues: f64 = activity.varsigma.iter().map(|&s| params.ue_power(s)).sum();
    let rate = params.bandwidth * report.sum_se();
    let fronthaul = m as f64 * fronthaul_power(rate, params)?;

    let total = match duplex.structure {
        Structure::Nafd => {
            let aps: f64 = (0..m)
                .filter(|&a| duplex.dl_mode[a])
                .map(|a| ap_tx(a) + if duplex.ul_mode[a] { sic } else { 0.0 })
                .sum();
            ues + aps + fronthaul
        }
        Structure::Fd => ues + (0..m).map(|a| ap_tx(a) + sic).sum::<f64>() + fronthaul,
        Structure::Hd => {
            let mu = duplex.hd_split;
            mu * (0..m).map(ap_tx).sum::<f64>() + (1.0 - mu) * ues + fronthaul
        }
    };
    Ok(total)
}

/// Inputs of the single-BS cellular models.
#[derive(Debug, Clone, PartialEq)]
pub struct CellularLoad {
    /// UL UE transmit fractions.
    pub varsigma: Vec<f64>,
    /// BS radiated power (W).
    pub bs_tx_power: f64,
    pub n_tx: usize,
    pub n_rx: usize,
}

pub fn hd_cellular_power(load: &CellularLoad, params: &PowerModelParams) -> f64 {
    let ues: f64 = load.varsigma.iter().map(|&s| params.ue_power(s)).sum();
    ues + load.bs_tx_power / params.eps_ap + params.ap_circuit(load.n_tx, load.n_rx)
}

/// Full-duplex cell: both directions over the whole frame plus SIC.
pub fn fd_cellular_power(load: &CellularLoad, params: &PowerModelParams) -> f64 {
    fd_from_hd_power(hd_cellular_power(load, params), load.n_rx, params.p_sic)
}

pub fn fd_from_hd_power(p_hd: f64, n_rx: usize, p_sic: f64) -> f64 {
    2.0 * p_hd + n_rx as f64 * p_sic
}

/// Bits/s/Hz per W.
pub fn energy_efficiency(se_sum: f64, p_tot: f64) -> Result<f64> {
    if !(p_tot.is_finite() && p_tot > 0.0) {
        return Err(Error::contract("energy.p_tot", format!("must be positive, got {p_tot}")));
    }
    Ok(se_sum / p_tot)
}

/// Bits per Joule.
pub fn energy_efficiency_bits_per_joule(se_sum: f64, p_tot: f64, bandwidth: f64) -> Result<f64> {
    Ok(bandwidth * energy_efficiency(se_sum, p_tot)?)
}
