//! Monte-Carlo estimate of the same SINR terms from simulated signals.
//!
//! Every draw samples channels, estimates, cross-link and inter-AP channels
//! and receiver noise, builds the actual precoders and combiners, and records
//! the effective coefficients. Terms are then formed with the
//! use-and-then-forget split: desired = |E c|, uncertainty = sample variance
//! of c, all other contributions as second moments.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::channel::{complex_normal_vector, draw_small_scale_with, LargeScaleModel};
use crate::error::{Error, Result};
use crate::precoding::{build_precoders, GroupingAssignment};
use crate::rng::{self, Purpose};
use crate::Complex;

use super::{check_inputs, DlTerms, DuplexAssignment, PowerAllocation, SeReport, UlTerms};

/// Draws per parallel work unit; fixed so results do not depend on the thread count.
const CHUNK: usize = 64;

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub draws: usize,
    pub report: SeReport,
}

/// Running mean and centered second moment of the coherent coefficient.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: Complex,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: Complex) {
        self.n += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta.norm_sqr() * (1.0 - 1.0 / self.n);
    }

    fn merge(&mut self, o: &Moments) {
        if o.n == 0.0 {
            return;
        }
        let n = self.n + o.n;
        let delta = o.mean - self.mean;
        self.mean += delta * (o.n / n);
        self.m2 += o.m2 + delta.norm_sqr() * self.n * o.n / n;
        self.n = n;
    }

    fn variance(&self) -> f64 {
        if self.n > 1.0 {
            self.m2 / (self.n - 1.0)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Default)]
struct DlAcc {
    c: Moments,
    iui: f64,
    du: f64,
    leak: f64,
}

#[derive(Debug, Clone, Default)]
struct UlAcc {
    c: Moments,
    iui: f64,
    noise: f64,
    inter_ap: f64,
    self_si: f64,
    leak: f64,
}

#[derive(Debug, Clone)]
struct Acc {
    dl: Vec<DlAcc>,
    ul: Vec<UlAcc>,
}

impl Acc {
    fn new(k_d: usize, k_u: usize) -> Self {
        Acc {
            dl: vec![DlAcc::default(); k_d],
            ul: vec![UlAcc::default(); k_u],
        }
    }

    fn merge(mut self, other: &Acc) -> Self {
        for (a, b) in self.dl.iter_mut().zip(&other.dl) {
            a.c.merge(&b.c);
            a.iui += b.iui;
            a.du += b.du;
            a.leak += b.leak;
        }
        for (a, b) in self.ul.iter_mut().zip(&other.ul) {
            a.c.merge(&b.c);
            a.iui += b.iui;
            a.noise += b.noise;
            a.inter_ap += b.inter_ap;
            a.self_si += b.self_si;
            a.leak += b.leak;
        }
        self
    }
}

/// Estimates every DL/UL term with `draws` independent realizations.
/// Deterministic in `seed` regardless of the rayon pool size.
pub fn mc_estimate_terms(
    ls: &LargeScaleModel,
    grouping: &GroupingAssignment,
    duplex: &DuplexAssignment,
    power: &PowerAllocation,
    draws: usize,
    seed: u64,
) -> Result<OracleReport> {
    check_inputs(ls, grouping, duplex, power)?;
    if draws == 0 {
        return Err(Error::InvalidInput("at least one Monte-Carlo draw is required".into()));
    }
    let (k_d, k_u) = (ls.k_d(), ls.k_u());
    let chunks: Vec<(usize, usize)> = (0..draws)
        .step_by(CHUNK)
        .map(|s| (s, (s + CHUNK).min(draws)))
        .collect();
    let partials: Vec<Acc> = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut acc = Acc::new(k_d, k_u);
            for d in lo..hi {
                accumulate(ls, grouping, duplex, power, seed, d, &mut acc)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let total = partials.iter().fold(Acc::new(k_d, k_u), |a, b| a.merge(b));

    let nd = draws as f64;
    let dl = total
        .dl
        .iter()
        .map(|a| {
            DlTerms {
                desired: a.c.mean.norm(),
                beamforming_uncertainty: a.c.variance(),
                inter_ue: a.iui / nd,
                ul_to_dl: a.du / nd,
                estimation_leakage: a.leak / nd,
            }
        })
        .collect();
    let ul = total
        .ul
        .iter()
        .map(|a| {
            UlTerms {
                desired: a.c.mean.norm(),
                beamforming_uncertainty: a.c.variance(),
                inter_ue: a.iui / nd,
                noise: a.noise / nd,
                inter_ap: a.inter_ap / nd,
                self_interference: a.self_si / nd,
                estimation_leakage: a.leak / nd,
            }
        })
        .collect();
    Ok(OracleReport {
        draws,
        report: SeReport::from_terms(
            duplex.structure,
            duplex.dl_prelog(),
            duplex.ul_prelog(),
            ls.payload_fraction(),
            dl,
            ul,
        ),
    })
}

fn accumulate(
    ls: &LargeScaleModel,
    grouping: &GroupingAssignment,
    duplex: &DuplexAssignment,
    power: &PowerAllocation,
    seed: u64,
    draw_idx: usize,
    acc: &mut Acc,
) -> Result<()> {
    let (m_aps, k_d, k_u, n) = (ls.m(), ls.k_d(), ls.k_u(), grouping.n);
    let mut rng = rng::stream(seed, Purpose::SmallScale, draw_idx as u64);
    let draw = draw_small_scale_with(ls, n, &mut rng);
    let pre = build_precoders(ls, &draw, grouping, &duplex.dl_mode, &duplex.ul_mode)?;
    let cross_link = duplex.structure.has_cross_link();
    let sqrt_rd = power.rho_d.sqrt();

    for k in 0..k_d {
        let a = &mut acc.dl[k];
        for kp in 0..k_d {
            let mut coef = Complex::new(0.0, 0.0);
            for m in (0..m_aps).filter(|&m| duplex.dl_mode[m]) {
                let v = pre.dl(m, kp).expect("active AP has precoders");
                let g = draw.g_dl(m, k);
                let th = power.theta[(m, kp)];
                coef += g.dotc(v) * th;
                if grouping.is_strong_dl(m, k) && grouping.is_strong_dl(m, kp) {
                    let err = g - draw.ghat_dl(m, k);
                    a.leak += power.rho_d * th * th * err.dotc(v).norm_sqr();
                }
            }
            coef *= sqrt_rd;
            if kp == k {
                a.c.push(coef);
            } else {
                a.iui += coef.norm_sqr();
            }
        }
        if cross_link {
            a.du += power.rho_u
                * (0..k_u)
                    .map(|l| power.varsigma[l] * draw.h_du[(k, l)].norm_sqr())
                    .sum::<f64>();
        }
    }

    let noise: Vec<DVector<Complex>> = (0..m_aps)
        .map(|m| {
            if duplex.ul_mode[m] {
                complex_normal_vector(&mut rng, n, 1.0)
            } else {
                DVector::zeros(n)
            }
        })
        .collect();
    // Z_mi v_iq for every receiving m, transmitting i and DL UE q.
    let leaked: Vec<Option<DVector<Complex>>> = if cross_link {
        let mut out = vec![None; m_aps * m_aps * k_d];
        for m in (0..m_aps).filter(|&m| duplex.ul_mode[m]) {
            for i in (0..m_aps).filter(|&i| duplex.dl_mode[i]) {
                for q in 0..k_d {
                    let v = pre.dl(i, q).expect("active AP has precoders");
                    out[(m * m_aps + i) * k_d + q] = Some(draw.z(m, i) * v * Complex::new(power.theta[(i, q)], 0.0));
                }
            }
        }
        out
    } else {
        Vec::new()
    };

    let sqrt_ru = power.rho_u.sqrt();
    for l in 0..k_u {
        let a = &mut acc.ul[l];
        let active: Vec<usize> = (0..m_aps).filter(|&m| duplex.ul_mode[m]).collect();
        for lp in 0..k_u {
            let mut coef = Complex::new(0.0, 0.0);
            for &m in &active {
                let u = pre.ul(m, l).expect("active AP has combiners");
                let al = power.alpha[(m, l)];
                coef += u.dotc(draw.g_ul(m, lp)) * al;
                if grouping.is_strong_ul(m, l) && grouping.is_strong_ul(m, lp) {
                    let err = draw.g_ul(m, lp) - draw.ghat_ul(m, lp);
                    a.leak += power.rho_u * power.varsigma[lp] * al * al * u.dotc(&err).norm_sqr();
                }
            }
            coef *= sqrt_ru * power.varsigma[lp].sqrt();
            if lp == l {
                a.c.push(coef);
            } else {
                a.iui += coef.norm_sqr();
            }
        }
        let w: Complex = active
            .iter()
            .map(|&m| pre.ul(m, l).unwrap().dotc(&noise[m]) * power.alpha[(m, l)])
            .sum();
        a.noise += w.norm_sqr();
        if cross_link {
            for q in 0..k_d {
                let (mut own, mut other) = (Complex::new(0.0, 0.0), Complex::new(0.0, 0.0));
                for &m in &active {
                    let u = pre.ul(m, l).unwrap();
                    let al = power.alpha[(m, l)];
                    for i in (0..m_aps).filter(|&i| duplex.dl_mode[i]) {
                        let z = leaked[(m * m_aps + i) * k_d + q].as_ref().unwrap();
                        let c = u.dotc(z) * al * sqrt_rd;
                        if i == m {
                            own += c;
                        } else {
                            other += c;
                        }
                    }
                }
                a.self_si += own.norm_sqr();
                a.inter_ap += other.norm_sqr();
            }
        }
    }
    Ok(())
}
