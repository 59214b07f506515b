//! Per-UE spectral efficiency of NAFD, in-band full-duplex and half-duplex
//! cell-free networks: closed-form evaluation, a signal-level Monte-Carlo
//! oracle estimating the same terms, and the small-cell reduction.

mod closed_form;
mod oracle;
mod smallcell;

pub use closed_form::{dl_se_closed_form, evaluate, ul_se_closed_form};
pub use oracle::{mc_estimate_terms, OracleReport};
pub use smallcell::{serving_aps, smallcell_se, SmallCellAssignment};

use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;

use crate::channel::LargeScaleModel;
use crate::error::{Error, Result};
use crate::precoding::GroupingAssignment;

/// Tolerance on the per-AP DL power constraint.
pub const POWER_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Structure {
    Nafd,
    Fd,
    Hd,
}

impl Structure {
    pub fn label(self) -> &'static str {
        match self {
            Structure::Nafd => "NAFD",
            Structure::Fd => "FD",
            Structure::Hd => "HD",
        }
    }

    pub fn has_cross_link(self) -> bool {
        !matches!(self, Structure::Hd)
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// AP operating modes: `dl_mode[m]` is a_m, `ul_mode[m]` is b_m.
#[derive(Debug, Clone, PartialEq)]
pub struct DuplexAssignment {
    pub structure: Structure,
    pub dl_mode: Vec<bool>,
    pub ul_mode: Vec<bool>,
    /// DL share of the frame for HD; unused otherwise.
    pub hd_split: f64,
    /// NAFD with some APs in both modes (hybrid duplex).
    pub hybrid: bool,
}

impl DuplexAssignment {
    /// Flexible-duplex NAFD: AP m transmits iff `dl_mode[m]`, receives otherwise.
    pub fn nafd(dl_mode: Vec<bool>) -> Self {
        let ul_mode = dl_mode.iter().map(|a| !a).collect();
        DuplexAssignment {
            structure: Structure::Nafd,
            dl_mode,
            ul_mode,
            hd_split: 1.0,
            hybrid: false,
        }
    }

    /// NAFD with arbitrary (a, b), including FD APs.
    pub fn hybrid(dl_mode: Vec<bool>, ul_mode: Vec<bool>) -> Self {
        DuplexAssignment {
            structure: Structure::Nafd,
            dl_mode,
            ul_mode,
            hd_split: 1.0,
            hybrid: true,
        }
    }

    pub fn full_duplex(m: usize) -> Self {
        DuplexAssignment {
            structure: Structure::Fd,
            dl_mode: vec![true; m],
            ul_mode: vec![true; m],
            hd_split: 1.0,
            hybrid: false,
        }
    }

    pub fn half_duplex(m: usize, hd_split: f64) -> Self {
        DuplexAssignment {
            structure: Structure::Hd,
            dl_mode: vec![true; m],
            ul_mode: vec![true; m],
            hd_split,
            hybrid: false,
        }
    }

    pub fn m(&self) -> usize {
        self.dl_mode.len()
    }

    pub fn dl_prelog(&self) -> f64 {
        match self.structure {
            Structure::Hd => self.hd_split,
            _ => 1.0,
        }
    }

    pub fn ul_prelog(&self) -> f64 {
        match self.structure {
            Structure::Hd => 1.0 - self.hd_split,
            _ => 1.0,
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.dl_mode.len() != m || self.ul_mode.len() != m {
            return Err(Error::contract("duplex", format!("mode vectors must have length {m}")));
        }
        match self.structure {
            Structure::Nafd if !self.hybrid => {
                if let Some(i) = (0..m).find(|&i| self.dl_mode[i] == self.ul_mode[i]) {
                    return Err(Error::contract(format!("duplex.a[{i}]"), "NAFD requires a_m + b_m = 1"));
                }
            }
            Structure::Fd | Structure::Hd => {
                if let Some(i) = (0..m).find(|&i| !(self.dl_mode[i] && self.ul_mode[i])) {
                    return Err(Error::contract(
                        format!("duplex.a[{i}]"),
                        format!("{} requires a_m = b_m = 1", self.structure),
                    ));
                }
                if self.structure == Structure::Hd && !(0.0..=1.0).contains(&self.hd_split) {
                    return Err(Error::contract("duplex.hd_split", "must lie in [0, 1]"));
                }
            }
            Structure::Nafd => {}
        }
        Ok(())
    }
}

/// Power-control and decoding coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    /// θ_mk (M×K_d).
    pub theta: DMatrix<f64>,
    /// ς_ℓ.
    pub varsigma: Vec<f64>,
    /// α_mℓ (M×K_u).
    pub alpha: DMatrix<f64>,
    pub rho_d: f64,
    pub rho_u: f64,
}

impl PowerAllocation {
    /// Normalized transmit power of AP m: Σ_k θ²_mk E‖v_mk‖².
    pub fn ap_load(&self, ls: &LargeScaleModel, grouping: &GroupingAssignment, m: usize) -> f64 {
        (0..ls.k_d())
            .map(|k| self.theta[(m, k)].powi(2) * grouping.expected_norm_sq_dl(ls, m, k))
            .sum()
    }

    pub fn validate(&self, ls: &LargeScaleModel, grouping: &GroupingAssignment, duplex: &DuplexAssignment) -> Result<()> {
        let (m, k_d, k_u) = (ls.m(), ls.k_d(), ls.k_u());
        if self.theta.shape() != (m, k_d) {
            return Err(Error::contract("power.theta", format!("shape must be {m}x{k_d}")));
        }
        if self.alpha.shape() != (m, k_u) {
            return Err(Error::contract("power.alpha", format!("shape must be {m}x{k_u}")));
        }
        if self.varsigma.len() != k_u {
            return Err(Error::contract("power.varsigma", format!("length must be {k_u}")));
        }
        // θ is bounded by the per-AP budget below, not by 1: precoders are not
        // unit-norm, so θ scales like 1/sqrt(E‖v‖²).
        if let Some(t) = self.theta.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::contract("power.theta", format!("{t} must be finite and >= 0")));
        }
        if let Some(s) = self.varsigma.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::contract("power.varsigma", format!("{s} outside [0, 1]")));
        }
        if let Some(a) = self.alpha.iter().find(|a| !(a.abs() <= 1.0)) {
            return Err(Error::contract("power.alpha", format!("|{a}| exceeds 1")));
        }
        for (name, v) in [("rho_d", self.rho_d), ("rho_u", self.rho_u)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::contract(format!("power.{name}"), "must be positive"));
            }
        }
        if grouping.m() != m {
            return Err(Error::contract("grouping", format!("expected {m} APs")));
        }
        for a in (0..m).filter(|&a| duplex.dl_mode[a]) {
            let load = self.ap_load(ls, grouping, a);
            if load > 1.0 + POWER_SLACK {
                return Err(Error::contract(
                    format!("power.theta[{a}]"),
                    format!("expected AP transmit power {load} exceeds the normalized budget 1"),
                ));
            }
        }
        Ok(())
    }
}

/// Effective-SINR terms of one DL UE. `desired` is the coherent gain (Ξ), the
/// three interference fields sum to Ω.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DlTerms {
    pub desired: f64,
    /// Variance of the UE's own effective channel.
    pub beamforming_uncertainty: f64,
    /// Leakage of the other DL UEs' precoders.
    pub inter_ue: f64,
    /// UL UE → DL UE cross-link interference.
    pub ul_to_dl: f64,
    /// Part of the first two terms caused by channel-estimation error at ZF APs.
    pub estimation_leakage: f64,
}

impl DlTerms {
    pub fn interference(&self) -> f64 {
        self.beamforming_uncertainty + self.inter_ue + self.ul_to_dl
    }

    pub fn sinr(&self) -> f64 {
        self.desired * self.desired / (self.interference() + 1.0)
    }
}

/// Effective-SINR terms of one UL UE: Ψ = `desired`, Λ = uncertainty +
/// inter-UE + noise, Φ = inter-AP + self-interference.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UlTerms {
    pub desired: f64,
    pub beamforming_uncertainty: f64,
    pub inter_ue: f64,
    pub noise: f64,
    pub inter_ap: f64,
    pub self_interference: f64,
    pub estimation_leakage: f64,
}

impl UlTerms {
    pub fn lambda(&self) -> f64 {
        self.beamforming_uncertainty + self.inter_ue + self.noise
    }

    pub fn phi(&self) -> f64 {
        self.inter_ap + self.self_interference
    }

    pub fn sinr(&self) -> f64 {
        let den = self.lambda() + self.phi();
        if den > 0.0 {
            self.desired * self.desired / den
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeReport {
    pub structure: Structure,
    pub dl_prelog: f64,
    pub ul_prelog: f64,
    /// 1 − τ_t/τ_c.
    pub payload_fraction: f64,
    pub dl: Vec<DlTerms>,
    pub ul: Vec<UlTerms>,
    pub dl_se: Vec<f64>,
    pub ul_se: Vec<f64>,
}

impl SeReport {
    pub fn from_terms(
        structure: Structure,
        dl_prelog: f64,
        ul_prelog: f64,
        payload_fraction: f64,
        dl: Vec<DlTerms>,
        ul: Vec<UlTerms>,
    ) -> Self {
        let dl_se = dl
            .iter()
            .map(|t| dl_prelog * payload_fraction * (1.0 + t.sinr()).log2())
            .collect();
        let ul_se = ul
            .iter()
            .map(|t| ul_prelog * payload_fraction * (1.0 + t.sinr()).log2())
            .collect();
        SeReport {
            structure,
            dl_prelog,
            ul_prelog,
            payload_fraction,
            dl,
            ul,
            dl_se,
            ul_se,
        }
    }

    pub fn sum_se(&self) -> f64 {
        self.dl_se.iter().sum::<f64>() + self.ul_se.iter().sum::<f64>()
    }

    pub fn min_dl_se(&self) -> Option<f64> {
        self.dl_se.iter().copied().reduce(f64::min)
    }

    pub fn min_ul_se(&self) -> Option<f64> {
        self.ul_se.iter().copied().reduce(f64::min)
    }

    pub const CSV_HEADER: [&'static str; 14] = [
        "structure",
        "ue_kind",
        "ue_index",
        "se",
        "desired_power",
        "beamforming_uncertainty",
        "inter_ue",
        "ul_to_dl",
        "noise",
        "inter_ap",
        "self_interference",
        "estimation_leakage",
        "prelog",
        "payload_fraction",
    ];

    /// One CSV row per UE; terms that do not apply to a direction are written as 0.
    pub fn write_csv<W: Write>(&self, label: &str, writer: &mut csv::Writer<W>) -> Result<()> {
        let f = |v: f64| format!("{v:e}");
        for (k, (t, se)) in self.dl.iter().zip(&self.dl_se).enumerate() {
            writer.write_record([
                label.to_string(),
                "dl".into(),
                k.to_string(),
                f(*se),
                f(t.desired * t.desired),
                f(t.beamforming_uncertainty),
                f(t.inter_ue),
                f(t.ul_to_dl),
                f(1.0),
                f(0.0),
                f(0.0),
                f(t.estimation_leakage),
                f(self.dl_prelog),
                f(self.payload_fraction),
            ])?;
        }
        for (l, (t, se)) in self.ul.iter().zip(&self.ul_se).enumerate() {
            writer.write_record([
                label.to_string(),
                "ul".into(),
                l.to_string(),
                f(*se),
                f(t.desired * t.desired),
                f(t.beamforming_uncertainty),
                f(t.inter_ue),
                f(0.0),
                f(t.noise),
                f(t.inter_ap),
                f(t.self_interference),
                f(t.estimation_leakage),
                f(self.ul_prelog),
                f(self.payload_fraction),
            ])?;
        }
        Ok(())
    }
}

pub(crate) fn check_inputs(
    ls: &LargeScaleModel,
    grouping: &GroupingAssignment,
    duplex: &DuplexAssignment,
    power: &PowerAllocation,
) -> Result<()> {
    ls.validate()?;
    duplex.validate(ls.m())?;
    power.validate(ls, grouping, duplex)
}
