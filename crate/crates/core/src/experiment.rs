//! Parameter sweeps over random topologies and the closed-form vs
//! Monte-Carlo validation run.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::assignment::{exhaustive_mode_select, greedy_mode_select, AssignmentSolution, ModeProblem, QosSpec};
use crate::channel::{draw_large_scale, LargeScaleModel};
use crate::config::{ExperimentConfig, Solver, StructureKind};
use crate::energy::{cf_total_power, energy_efficiency, CfActivity};
use crate::error::{Error, Result};
use crate::performance::{
    self, mc_estimate_terms, smallcell_se, DuplexAssignment, PowerAllocation, SeReport, SmallCellAssignment,
    Structure,
};
use crate::precoding::GroupingAssignment;
use crate::rng::{derive_seed, Purpose};
use crate::topology::generate_topology;

/// Outcome of one structure on one topology at one QoS level.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub feasible: bool,
    pub ee: f64,
    pub total_power: f64,
    pub sum_se: f64,
    pub mean_dl_se: f64,
    pub mean_ul_se: f64,
    /// NAFD only: number of DL-mode APs.
    pub dl_aps: usize,
}

impl Outcome {
    fn from_solution(s: &AssignmentSolution) -> Self {
        Outcome {
            feasible: s.feasible,
            ee: s.ee,
            total_power: s.total_power,
            sum_se: s.report.sum_se(),
            mean_dl_se: mean(&s.report.dl_se).unwrap_or(0.0),
            mean_ul_se: mean(&s.report.ul_se).unwrap_or(0.0),
            dl_aps: s.duplex.dl_mode.iter().filter(|a| **a).count(),
        }
    }
}

/// Outcomes of one topology, indexed `[structure][qos]` in config order.
#[derive(Debug, Clone)]
pub struct TopologyOutcome {
    pub index: usize,
    pub seed: u64,
    pub outcomes: Vec<Vec<Outcome>>,
}

/// Aggregate over topologies for one (structure, QoS) point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub structure: StructureKind,
    pub qos: f64,
    pub n_topologies: usize,
    pub feasible_rate: f64,
    /// Mean EE over all topologies, feasible or not.
    pub mean_ee: f64,
    pub mean_ee_feasible: Option<f64>,
    /// Topologies on which every compared cell-free structure is feasible.
    pub common_feasible: usize,
    pub mean_ee_common: Option<f64>,
    pub mean_dl_se: f64,
    pub mean_ul_se: f64,
    pub mean_sum_se: f64,
    pub mean_power: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub structures: Vec<StructureKind>,
    pub qos: Vec<f64>,
    pub topologies: Vec<TopologyOutcome>,
    pub rows: Vec<ResultRow>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Seed of topology `t` under master seed `seed`.
pub fn topology_seed(seed: u64, t: usize) -> u64 {
    derive_seed(seed, Purpose::Topology, t as u64)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let qos = cfg.qos_grid();
    let structures = cfg.experiment.structures.clone();
    let topologies: Vec<TopologyOutcome> = (0..cfg.experiment.n_topologies)
        .into_par_iter()
        .map(|t| run_topology(cfg, &structures, &qos, t))
        .collect::<Result<_>>()?;
    let rows = aggregate(&structures, &qos, &topologies);
    Ok(ExperimentResult {
        structures,
        qos,
        topologies,
        rows,
    })
}

/// Large-scale model of topology `t`, also used by the tests.
pub fn instance(cfg: &ExperimentConfig, t: usize) -> Result<LargeScaleModel> {
    let seed = topology_seed(cfg.experiment.seed, t);
    let tp = &cfg.topology;
    let topo = generate_topology(tp.m, tp.k_d, tp.k_u, tp.side, tp.min_ap_dist, seed).map_err(|e| match e {
        Error::Placement { attempts, constraint } => Error::Placement {
            attempts,
            constraint: format!("topology {t} (seed {seed}): {constraint}"),
        },
        other => other,
    })?;
    draw_large_scale(&topo, &cfg.channel_config()?, seed)
}

fn run_topology(cfg: &ExperimentConfig, structures: &[StructureKind], qos: &[f64], t: usize) -> Result<TopologyOutcome> {
    let ls = instance(cfg, t)?;
    let ch = cfg.channel_config()?;
    let n = cfg.precoding.n_antennas;
    let grouping = GroupingAssignment::from_large_scale(&ls, cfg.precoding.effective_upsilon(), n)?;
    let problem = ModeProblem::new(
        &ls,
        &grouping,
        QosSpec::uniform(0.0),
        &cfg.power,
        cfg.experiment.power_exponent,
        ch.rho_d,
        ch.rho_u,
    )?;
    let m = ls.m();
    let mut outcomes = Vec::with_capacity(structures.len());
    for &s in structures {
        let per_qos = match s {
            StructureKind::Nafd => qos
                .iter()
                .map(|&q| {
                    let p = problem.with_qos(QosSpec::uniform(q));
                    let sol = match cfg.experiment.solver {
                        Solver::Greedy => greedy_mode_select(&p)?.solution,
                        Solver::Exhaustive => exhaustive_mode_select(&p, cfg.experiment.exhaustive_m_max)?,
                    };
                    Ok(Outcome::from_solution(&sol))
                })
                .collect::<Result<Vec<_>>>()?,
            StructureKind::Fd | StructureKind::Hd => {
                let duplex = if s == StructureKind::Fd {
                    DuplexAssignment::full_duplex(m)
                } else {
                    DuplexAssignment::half_duplex(m, cfg.experiment.hd_split)
                };
                let sol = problem.evaluate(&duplex)?;
                qos.iter()
                    .map(|&q| {
                        let mut o = Outcome::from_solution(&sol);
                        o.feasible = crate::assignment::check_qos(&sol.report, QosSpec::uniform(q)).feasible;
                        o
                    })
                    .collect()
            }
            StructureKind::Smallcell => {
                let (report, total_power) = smallcell_point(cfg, &ls)?;
                let ee = energy_efficiency(report.sum_se(), total_power)?;
                qos.iter()
                    .map(|&q| Outcome {
                        feasible: crate::assignment::check_qos(&report, QosSpec::uniform(q)).feasible,
                        ee,
                        total_power,
                        sum_se: report.sum_se(),
                        mean_dl_se: mean(&report.dl_se).unwrap_or(0.0),
                        mean_ul_se: mean(&report.ul_se).unwrap_or(0.0),
                        dl_aps: m,
                    })
                    .collect()
            }
        };
        outcomes.push(per_qos);
    }
    Ok(TopologyOutcome {
        index: t,
        seed: topology_seed(cfg.experiment.seed, t),
        outcomes,
    })
}

/// Full-duplex small cells: each AP serves the UEs for which it is the
/// strongest AP, with the fractional power rule applied over its own UEs.
fn smallcell_point(cfg: &ExperimentConfig, ls: &LargeScaleModel) -> Result<(SeReport, f64)> {
    let ch = cfg.channel_config()?;
    let m = ls.m();
    let assignment = SmallCellAssignment::strongest(ls);
    let (served_dl, served_ul) = assignment.served_sets(m);
    let grouping = GroupingAssignment::from_served_sets(
        ls,
        cfg.precoding.effective_upsilon(),
        cfg.precoding.n_antennas,
        &served_dl,
        &served_ul,
    )?;
    let duplex = DuplexAssignment::full_duplex(m);
    let e = cfg.experiment.power_exponent;
    let mut theta = nalgebra::DMatrix::zeros(m, ls.k_d());
    for (a, ues) in served_dl.iter().enumerate() {
        let g_max = ues.iter().map(|&k| ls.gamma_dl[(a, k)]).fold(0.0, f64::max);
        let w: Vec<f64> = ues.iter().map(|&k| (ls.gamma_dl[(a, k)] / g_max).powf(e)).collect();
        let norm: f64 = ues
            .iter()
            .zip(&w)
            .map(|(&k, w)| w * w * grouping.expected_norm_sq_dl(ls, a, k))
            .sum();
        for (&k, w) in ues.iter().zip(&w) {
            theta[(a, k)] = w / norm.sqrt();
        }
    }
    let power = PowerAllocation {
        theta,
        varsigma: vec![1.0; ls.k_u()],
        alpha: nalgebra::DMatrix::from_element(m, ls.k_u(), 1.0),
        rho_d: ch.rho_d,
        rho_u: ch.rho_u,
    };
    let report = smallcell_se(ls, &assignment, &grouping, &duplex, &power)?;
    let activity = CfActivity::from_allocation(ls, &grouping, &duplex, &assignment.restrict(&power));
    let total = cf_total_power(&report, &duplex, &activity, &cfg.power)?;
    Ok((report, total))
}

fn aggregate(structures: &[StructureKind], qos: &[f64], topos: &[TopologyOutcome]) -> Vec<ResultRow> {
    let compared: Vec<usize> = structures
        .iter()
        .enumerate()
        .filter(|(_, s)| **s != StructureKind::Smallcell)
        .map(|(i, _)| i)
        .collect();
    let n = topos.len() as f64;
    let mut rows = Vec::new();
    for (si, &s) in structures.iter().enumerate() {
        for (qi, &q) in qos.iter().enumerate() {
            let all: Vec<&Outcome> = topos.iter().map(|t| &t.outcomes[si][qi]).collect();
            let feasible: Vec<f64> = all.iter().filter(|o| o.feasible).map(|o| o.ee).collect();
            let common: Vec<f64> = topos
                .iter()
                .filter(|t| compared.iter().all(|&c| t.outcomes[c][qi].feasible))
                .map(|t| t.outcomes[si][qi].ee)
                .collect();
            let avg = |f: fn(&Outcome) -> f64| all.iter().map(|o| f(o)).sum::<f64>() / n;
            rows.push(ResultRow {
                structure: s,
                qos: q,
                n_topologies: topos.len(),
                feasible_rate: feasible.len() as f64 / n,
                mean_ee: avg(|o| o.ee),
                mean_ee_feasible: mean(&feasible),
                common_feasible: common.len(),
                mean_ee_common: mean(&common),
                mean_dl_se: avg(|o| o.mean_dl_se),
                mean_ul_se: avg(|o| o.mean_ul_se),
                mean_sum_se: avg(|o| o.sum_se),
                mean_power: avg(|o| o.total_power),
            });
        }
    }
    rows
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ExperimentResult {
    pub fn row(&self, s: StructureKind, qos_index: usize) -> Option<&ResultRow> {
        let si = self.structures.iter().position(|x| *x == s)?;
        self.rows.get(si * self.qos.len() + qos_index)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "structure",
            "qos",
            "n_topologies",
            "feasible_rate",
            "mean_ee",
            "mean_ee_feasible",
            "common_feasible",
            "mean_ee_common",
            "mean_dl_se",
            "mean_ul_se",
            "mean_sum_se",
            "mean_power_w",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.structure.label().to_string(),
                r.qos.to_string(),
                r.n_topologies.to_string(),
                r.feasible_rate.to_string(),
                r.mean_ee.to_string(),
                opt(r.mean_ee_feasible),
                r.common_feasible.to_string(),
                opt(r.mean_ee_common),
                r.mean_dl_se.to_string(),
                r.mean_ul_se.to_string(),
                r.mean_sum_se.to_string(),
                r.mean_power.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Long-format series for plotting: one (series, x, y) row per point.
    pub fn write_plot_data<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["series", "x", "y"])?;
        for metric in ["ee", "feasible_rate"] {
            for r in &self.rows {
                let y = match metric {
                    "ee" => r.mean_ee,
                    _ => r.feasible_rate,
                };
                w.write_record([format!("{}/{metric}", r.structure.label()), r.qos.to_string(), y.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_topology_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["topology", "seed", "structure", "qos", "feasible", "ee", "sum_se", "power_w", "dl_aps"])?;
        for t in &self.topologies {
            for (si, s) in self.structures.iter().enumerate() {
                for (qi, q) in self.qos.iter().enumerate() {
                    let o = &t.outcomes[si][qi];
                    w.write_record([
                        t.index.to_string(),
                        t.seed.to_string(),
                        s.label().to_string(),
                        q.to_string(),
                        o.feasible.to_string(),
                        o.ee.to_string(),
                        o.sum_se.to_string(),
                        o.total_power.to_string(),
                        o.dl_aps.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `results.csv`, `plot_data.csv` and `topologies.csv` into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.write_csv(fs::File::create(dir.join("results.csv"))?)?;
        self.write_plot_data(fs::File::create(dir.join("plot_data.csv"))?)?;
        self.write_topology_csv(fs::File::create(dir.join("topologies.csv"))?)?;
        Ok(())
    }

    /// Smallest QoS at which NAFD is feasible on more than half of the
    /// topologies while every other cell-free structure is feasible on fewer
    /// than half.
    pub fn crossover_qos(&self) -> Option<f64> {
        (0..self.qos.len())
            .find(|&qi| {
                let rate = |s| self.row(s, qi).map(|r| r.feasible_rate);
                rate(StructureKind::Nafd).is_some_and(|r| r > 0.5)
                    && [StructureKind::Fd, StructureKind::Hd]
                        .iter()
                        .all(|&s| rate(s).is_none_or(|r| r < 0.5))
            })
            .map(|qi| self.qos[qi])
    }

    /// NAFD's feasibility rate is at least that of FD and HD at every level.
    pub fn nafd_feasibility_dominates(&self) -> bool {
        (0..self.qos.len()).all(|qi| {
            let nafd = match self.row(StructureKind::Nafd, qi) {
                Some(r) => r.feasible_rate,
                None => return false,
            };
            [StructureKind::Fd, StructureKind::Hd]
                .iter()
                .filter_map(|&s| self.row(s, qi))
                .all(|r| nafd >= r.feasible_rate)
        })
    }
}

/// One compared term in the validation report.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub structure: Structure,
    pub upsilon: f64,
    pub direction: &'static str,
    pub ue_index: usize,
    pub term: &'static str,
    pub closed_form: f64,
    pub monte_carlo: f64,
    pub rel_error: f64,
    pub tolerance: f64,
}

impl ValidationRow {
    pub fn pass(&self) -> bool {
        self.rel_error <= self.tolerance
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub draws: usize,
    pub rows: Vec<ValidationRow>,
}

/// |mc − cf| / |cf|; zero when both are exactly zero.
pub fn relative_error(closed_form: f64, monte_carlo: f64) -> f64 {
    if closed_form == monte_carlo {
        0.0
    } else if closed_form == 0.0 {
        f64::INFINITY
    } else {
        ((monte_carlo - closed_form) / closed_form).abs()
    }
}

/// The duplex assignment used for `s` in validation runs.
pub fn validation_duplex(cfg: &ExperimentConfig, s: StructureKind, m: usize) -> Result<DuplexAssignment> {
    Ok(match s {
        StructureKind::Nafd => DuplexAssignment::nafd(
            cfg.validation
                .nafd_dl_mode
                .clone()
                .unwrap_or_else(|| (0..m).map(|a| a % 2 == 0).collect()),
        ),
        StructureKind::Fd => DuplexAssignment::full_duplex(m),
        StructureKind::Hd => DuplexAssignment::half_duplex(m, cfg.experiment.hd_split),
        StructureKind::Smallcell => {
            return Err(Error::config("validation.structures", "smallcell has no oracle case"));
        }
    })
}

pub fn run_validation(cfg: &ExperimentConfig) -> Result<ValidationReport> {
    cfg.validate()?;
    let ls = instance(cfg, 0)?;
    let ch = cfg.channel_config()?;
    let n = cfg.precoding.n_antennas;
    let v = &cfg.validation;
    let mut rows = Vec::new();
    for &s in &v.structures {
        let duplex = validation_duplex(cfg, s, ls.m())?;
        for (ui, &upsilon) in v.upsilons.iter().enumerate() {
            let grouping = GroupingAssignment::from_large_scale(&ls, upsilon, n)?;
            let power = crate::assignment::power_rule_fractional(
                &ls,
                &grouping,
                &duplex,
                cfg.experiment.power_exponent,
                ch.rho_d,
                ch.rho_u,
            )?;
            let cf = performance::evaluate(&ls, &grouping, &duplex, &power)?;
            let mc_seed = derive_seed(cfg.experiment.seed, Purpose::Instance, (s as u64) << 8 | ui as u64);
            let mc = mc_estimate_terms(&ls, &grouping, &duplex, &power, v.n_fading_draws, mc_seed)?.report;
            rows.extend(compare_reports(&cf, &mc, upsilon, v.desired_tolerance, v.interference_tolerance));
        }
    }
    Ok(ValidationReport {
        draws: v.n_fading_draws,
        rows,
    })
}

/// Term-by-term comparison of a closed-form and an empirical report.
pub fn compare_reports(cf: &SeReport, mc: &SeReport, upsilon: f64, tol_desired: f64, tol_interf: f64) -> Vec<ValidationRow> {
    let mut rows = Vec::new();
    let mut push = |direction, ue_index, term, a: f64, b: f64, tolerance| {
        rows.push(ValidationRow {
            structure: cf.structure,
            upsilon,
            direction,
            ue_index,
            term,
            closed_form: a,
            monte_carlo: b,
            rel_error: relative_error(a, b),
            tolerance,
        })
    };
    for (k, (a, b)) in cf.dl.iter().zip(&mc.dl).enumerate() {
        push("dl", k, "desired", a.desired, b.desired, tol_desired);
        push("dl", k, "beamforming_uncertainty", a.beamforming_uncertainty, b.beamforming_uncertainty, tol_interf);
        push("dl", k, "inter_ue", a.inter_ue, b.inter_ue, tol_interf);
        push("dl", k, "ul_to_dl", a.ul_to_dl, b.ul_to_dl, tol_interf);
        push("dl", k, "estimation_leakage", a.estimation_leakage, b.estimation_leakage, tol_interf);
    }
    for (l, (a, b)) in cf.ul.iter().zip(&mc.ul).enumerate() {
        push("ul", l, "desired", a.desired, b.desired, tol_desired);
        push("ul", l, "beamforming_uncertainty", a.beamforming_uncertainty, b.beamforming_uncertainty, tol_interf);
        push("ul", l, "inter_ue", a.inter_ue, b.inter_ue, tol_interf);
        push("ul", l, "noise", a.noise, b.noise, tol_interf);
        push("ul", l, "inter_ap", a.inter_ap, b.inter_ap, tol_interf);
        push("ul", l, "self_interference", a.self_interference, b.self_interference, tol_interf);
        push("ul", l, "estimation_leakage", a.estimation_leakage, b.estimation_leakage, tol_interf);
    }
    rows
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(ValidationRow::pass)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "structure",
            "upsilon",
            "direction",
            "ue_index",
            "term",
            "closed_form",
            "monte_carlo",
            "rel_error",
            "tolerance",
            "pass",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.structure.label().to_string(),
                r.upsilon.to_string(),
                r.direction.to_string(),
                r.ue_index.to_string(),
                r.term.to_string(),
                r.closed_form.to_string(),
                r.monte_carlo.to_string(),
                r.rel_error.to_string(),
                r.tolerance.to_string(),
                r.pass().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
