//! Small-cell baseline: every UE is served by exactly one AP, the one with the
//! largest long-term gain. SE uses the cell-free expressions with the
//! coefficients of all non-serving APs zeroed, so each UE's desired signal
//! comes from its own cell while interference from every active node remains.

use nalgebra::DMatrix;

use crate::channel::LargeScaleModel;
use crate::error::{Error, Result};
use crate::precoding::GroupingAssignment;

use super::{closed_form, DuplexAssignment, PowerAllocation, SeReport};

/// Serving AP per UE.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmallCellAssignment {
    pub dl_serving: Vec<usize>,
    pub ul_serving: Vec<usize>,
}

impl SmallCellAssignment {
    pub fn strongest(ls: &LargeScaleModel) -> Self {
        SmallCellAssignment {
            dl_serving: serving_aps(&ls.beta_dl),
            ul_serving: serving_aps(&ls.beta_ul),
        }
    }

    /// UEs of each AP, per direction.
    pub fn served_sets(&self, m: usize) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let collect = |serving: &[usize]| {
            let mut sets = vec![Vec::new(); m];
            for (u, &a) in serving.iter().enumerate() {
                sets[a].push(u);
            }
            sets
        };
        (collect(&self.dl_serving), collect(&self.ul_serving))
    }

    pub fn validate(&self, ls: &LargeScaleModel) -> Result<()> {
        for (name, serving, k) in [
            ("dl_serving", &self.dl_serving, ls.k_d()),
            ("ul_serving", &self.ul_serving, ls.k_u()),
        ] {
            if serving.len() != k {
                return Err(Error::contract(
                    format!("smallcell.{name}"),
                    format!("{} UEs mapped, expected {k}", serving.len()),
                ));
            }
            if let Some(u) = serving.iter().position(|&a| a >= ls.m()) {
                return Err(Error::contract(
                    format!("smallcell.{name}[{u}]"),
                    format!("AP index {} out of range", serving[u]),
                ));
            }
        }
        Ok(())
    }

    /// Copy of `power` with θ and α zeroed outside the serving AP of each UE.
    pub fn restrict(&self, power: &PowerAllocation) -> PowerAllocation {
        let mut out = power.clone();
        out.theta = DMatrix::from_fn(power.theta.nrows(), power.theta.ncols(), |m, k| {
            if self.dl_serving[k] == m {
                power.theta[(m, k)]
            } else {
                0.0
            }
        });
        out.alpha = DMatrix::from_fn(power.alpha.nrows(), power.alpha.ncols(), |m, l| {
            if self.ul_serving[l] == m {
                power.alpha[(m, l)]
            } else {
                0.0
            }
        });
        out
    }
}

/// argmax over rows for every column; ties go to the lower AP index.
pub fn serving_aps(beta: &DMatrix<f64>) -> Vec<usize> {
    (0..beta.ncols())
        .map(|u| {
            let col = beta.column(u);
            (0..beta.nrows()).fold(0, |best, m| if col[m] > col[best] { m } else { best })
        })
        .collect()
}

/// Per-UE SE of the small-cell network. `grouping` should be built over the
/// served sets (see [`GroupingAssignment::from_served_sets`]).
pub fn smallcell_se(
    ls: &LargeScaleModel,
    assignment: &SmallCellAssignment,
    grouping: &GroupingAssignment,
    duplex: &DuplexAssignment,
    power: &PowerAllocation,
) -> Result<SeReport> {
    assignment.validate(ls)?;
    let restricted = assignment.restrict(power);
    closed_form::evaluate(ls, grouping, duplex, &restricted)
}
