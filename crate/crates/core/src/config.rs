//! Experiment configuration, read from TOML with one table per stage. Every
//! field has a default; see `configs/SCHEMA.md` for units and meaning.

use std::path::Path;

use serde::Deserialize;

use crate::channel::{normalized_snr, ChannelConfig};
use crate::energy::PowerModelParams;
use crate::error::{Error, Result};
use crate::precoding::PrecodingMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureKind {
    Nafd,
    Fd,
    Hd,
    Smallcell,
}

impl StructureKind {
    pub fn label(self) -> &'static str {
        match self {
            StructureKind::Nafd => "NAFD",
            StructureKind::Fd => "FD",
            StructureKind::Hd => "HD",
            StructureKind::Smallcell => "smallcell",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nafd" => Ok(StructureKind::Nafd),
            "fd" => Ok(StructureKind::Fd),
            "hd" => Ok(StructureKind::Hd),
            "smallcell" => Ok(StructureKind::Smallcell),
            other => Err(Error::config("experiment.structures", format!("unknown structure `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Greedy,
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologySection {
    pub m: usize,
    pub k_d: usize,
    pub k_u: usize,
    pub side: f64,
    pub min_ap_dist: f64,
}

impl Default for TopologySection {
    fn default() -> Self {
        TopologySection {
            m: 40,
            k_d: 4,
            k_u: 4,
            side: 500.0,
            min_ap_dist: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    /// Defaults to K_d + K_u.
    pub tau_t: Option<usize>,
    pub tau_c: usize,
    /// Normalized SNRs; derived from power.p_*_max, power.bandwidth and
    /// noise_figure_db when absent.
    pub rho_d: Option<f64>,
    pub rho_u: Option<f64>,
    /// Defaults to rho_u.
    pub rho_t: Option<f64>,
    pub noise_figure_db: f64,
    pub si_ratio_db: f64,
    pub shadowing: bool,
    pub perfect_csi: bool,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            tau_t: None,
            tau_c: 200,
            rho_d: None,
            rho_u: None,
            rho_t: None,
            noise_figure_db: 9.0,
            si_ratio_db: 50.0,
            shadowing: true,
            perfect_csi: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrecodingSection {
    pub n_antennas: usize,
    pub upsilon: f64,
    pub mode: PrecodingModeName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecodingModeName {
    Pzf,
    Fzf,
    Mrt,
}

impl From<PrecodingModeName> for PrecodingMode {
    fn from(m: PrecodingModeName) -> Self {
        match m {
            PrecodingModeName::Pzf => PrecodingMode::Pzf,
            PrecodingModeName::Fzf => PrecodingMode::Fzf,
            PrecodingModeName::Mrt => PrecodingMode::Mrt,
        }
    }
}

impl Default for PrecodingSection {
    fn default() -> Self {
        PrecodingSection {
            n_antennas: 8,
            upsilon: 50.0,
            mode: PrecodingModeName::Pzf,
        }
    }
}

impl PrecodingSection {
    pub fn effective_upsilon(&self) -> f64 {
        PrecodingMode::from(self.mode).effective_upsilon(self.upsilon)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub structures: Vec<StructureKind>,
    /// DL share of the frame for HD.
    pub hd_split: f64,
    /// Explicit QoS grid (bits/s/Hz); overrides the start/stop/step triple.
    pub qos_levels: Option<Vec<f64>>,
    pub qos_start: f64,
    pub qos_stop: f64,
    pub qos_step: f64,
    pub solver: Solver,
    pub exhaustive_m_max: usize,
    /// Exponent of the fractional DL power rule.
    pub power_exponent: f64,
    pub n_topologies: usize,
    pub seed: u64,
    pub output: String,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            structures: vec![StructureKind::Nafd, StructureKind::Fd, StructureKind::Hd],
            hd_split: 0.5,
            qos_levels: None,
            qos_start: 0.0,
            qos_stop: 3.0,
            qos_step: 0.2,
            solver: Solver::Greedy,
            exhaustive_m_max: crate::assignment::EXHAUSTIVE_M_MAX,
            power_exponent: 0.0,
            n_topologies: 50,
            seed: 1,
            output: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationSection {
    pub n_fading_draws: usize,
    pub upsilons: Vec<f64>,
    pub structures: Vec<StructureKind>,
    /// DL-mode vector for the NAFD case; alternating DL/UL when absent.
    pub nafd_dl_mode: Option<Vec<bool>>,
    pub desired_tolerance: f64,
    pub interference_tolerance: f64,
}

impl Default for ValidationSection {
    fn default() -> Self {
        ValidationSection {
            n_fading_draws: 10_000,
            upsilons: vec![0.0, 50.0, 100.0],
            structures: vec![StructureKind::Nafd, StructureKind::Fd, StructureKind::Hd],
            nafd_dl_mode: None,
            desired_tolerance: 0.02,
            interference_tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub topology: TopologySection,
    pub channel: ChannelSection,
    pub precoding: PrecodingSection,
    pub power: PowerModelParams,
    pub experiment: ExperimentSection,
    pub validation: ValidationSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let field = e
                .span()
                .and_then(|s| text.get(s))
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty() && s.len() < 64)
                .unwrap_or_else(|| "<document>".into());
            Error::config(field, msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.topology;
        if t.m == 0 {
            return Err(Error::config("topology.m", "must be at least 1"));
        }
        if t.k_d + t.k_u == 0 {
            return Err(Error::config("topology.k_d", "K_d + K_u must be at least 1"));
        }
        if !(t.side.is_finite() && t.side > 0.0) {
            return Err(Error::config("topology.side", "must be positive"));
        }
        if !(t.min_ap_dist.is_finite() && t.min_ap_dist >= 0.0) {
            return Err(Error::config("topology.min_ap_dist", "must be >= 0"));
        }
        let p = &self.precoding;
        if p.n_antennas == 0 {
            return Err(Error::config("precoding.n_antennas", "must be at least 1"));
        }
        if !(0.0..=100.0).contains(&p.upsilon) {
            return Err(Error::config("precoding.upsilon", format!("{} outside [0, 100]", p.upsilon)));
        }
        self.power.validate()?;
        self.channel_config()?.validate(t.k_d, t.k_u)?;

        let e = &self.experiment;
        if e.structures.is_empty() {
            return Err(Error::config("experiment.structures", "must not be empty"));
        }
        if !(0.0..=1.0).contains(&e.hd_split) {
            return Err(Error::config("experiment.hd_split", "must lie in [0, 1]"));
        }
        if !(-1.0..=1.0).contains(&e.power_exponent) {
            return Err(Error::config("experiment.power_exponent", "must lie in [-1, 1]"));
        }
        if e.n_topologies == 0 {
            return Err(Error::config("experiment.n_topologies", "must be at least 1"));
        }
        if e.qos_levels.is_none() && !(e.qos_step > 0.0 && e.qos_stop >= e.qos_start && e.qos_start >= 0.0) {
            return Err(Error::config(
                "experiment.qos_step",
                "need qos_step > 0 and 0 <= qos_start <= qos_stop",
            ));
        }
        if self.qos_grid().iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
            return Err(Error::config("experiment.qos_levels", "levels must be finite and >= 0"));
        }
        if e.solver == Solver::Exhaustive && t.m > e.exhaustive_m_max {
            return Err(Error::config(
                "experiment.solver",
                format!("exhaustive search over M = {} exceeds exhaustive_m_max = {}", t.m, e.exhaustive_m_max),
            ));
        }

        let v = &self.validation;
        if v.n_fading_draws == 0 {
            return Err(Error::config("validation.n_fading_draws", "must be at least 1"));
        }
        if let Some(u) = v.upsilons.iter().find(|u| !(0.0..=100.0).contains(*u)) {
            return Err(Error::config("validation.upsilons", format!("{u} outside [0, 100]")));
        }
        if v.structures.contains(&StructureKind::Smallcell) {
            return Err(Error::config("validation.structures", "smallcell has no oracle case"));
        }
        if let Some(a) = &v.nafd_dl_mode {
            if a.len() != t.m {
                return Err(Error::config("validation.nafd_dl_mode", format!("length must be M = {}", t.m)));
            }
        }
        Ok(())
    }

    pub fn channel_config(&self) -> Result<ChannelConfig> {
        let c = &self.channel;
        let rho = |given: Option<f64>, p: f64| given.unwrap_or_else(|| normalized_snr(p, self.power.bandwidth, c.noise_figure_db));
        let rho_u = rho(c.rho_u, self.power.p_ue_max);
        Ok(ChannelConfig {
            tau_t: c.tau_t.unwrap_or(self.topology.k_d + self.topology.k_u),
            tau_c: c.tau_c,
            rho_d: rho(c.rho_d, self.power.p_ap_max),
            rho_u,
            rho_t: c.rho_t.unwrap_or(rho_u),
            si_ratio_db: c.si_ratio_db,
            shadowing: c.shadowing,
            perfect_csi: c.perfect_csi,
        })
    }

    /// QoS levels of the sweep, in ascending order.
    pub fn qos_grid(&self) -> Vec<f64> {
        let e = &self.experiment;
        if let Some(levels) = &e.qos_levels {
            return levels.clone();
        }
        let steps = ((e.qos_stop - e.qos_start) / e.qos_step + 1e-9).floor() as usize;
        (0..=steps)
            .map(|i| {
                let q = e.qos_start + i as f64 * e.qos_step;
                // Strip accumulated binary noise so 0.6 prints as 0.6.
                (q * 1e9).round() / 1e9
            })
            .collect()
    }
}
