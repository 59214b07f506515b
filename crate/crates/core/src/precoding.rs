//! Local partial zero-forcing.
//!
//! Each AP splits the UEs of a direction into a strong set S (served with ZF,
//! interference toward S is nulled) and a weak set W (served with MRT). The
//! split uses long-term gains only.

use nalgebra::{DMatrix, DVector};

use crate::channel::{LargeScaleModel, SmallScaleDraw};
use crate::error::{Error, Result};
use crate::Complex;

/// Gram matrices whose smallest Cholesky pivot falls below this fraction of
/// the largest diagonal entry are treated as singular.
const GRAM_RCOND_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecodingMode {
    /// Strong/weak split at the configured υ.
    Pzf,
    /// Full ZF (υ = 100).
    Fzf,
    /// Pure MRT (υ = 0).
    Mrt,
}

impl PrecodingMode {
    pub fn effective_upsilon(self, upsilon: f64) -> f64 {
        match self {
            PrecodingMode::Pzf => upsilon,
            PrecodingMode::Fzf => 100.0,
            PrecodingMode::Mrt => 0.0,
        }
    }
}

/// Splits UEs by their long-term gains toward one AP. The strong set is the
/// shortest prefix of the descending-gain order whose share of the total gain
/// reaches `upsilon` percent, truncated to `n - 1` members. Ties go to the
/// lower index. Both returned sets are in ascending index order.
pub fn group_ues(betas: &[f64], upsilon: f64, n: usize) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..betas.len()).collect();
    order.sort_by(|&a, &b| betas[b].total_cmp(&betas[a]).then(a.cmp(&b)));
    let total: f64 = order.iter().map(|&i| betas[i]).sum();
    let target = upsilon / 100.0 * total;

    let mut len = 0;
    let mut acc = 0.0;
    if upsilon > 0.0 {
        for &i in &order {
            acc += betas[i];
            len += 1;
            if acc >= target {
                break;
            }
        }
    }
    len = len.min(n.saturating_sub(1));

    let mut strong: Vec<usize> = order[..len].to_vec();
    let mut weak: Vec<usize> = order[len..].to_vec();
    strong.sort_unstable();
    weak.sort_unstable();
    (strong, weak)
}

/// Per-AP strong/weak partitions for both directions.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupingAssignment {
    pub n: usize,
    pub strong_dl: Vec<Vec<usize>>,
    pub strong_ul: Vec<Vec<usize>>,
    is_strong_dl: Vec<Vec<bool>>,
    is_strong_ul: Vec<Vec<bool>>,
}

impl GroupingAssignment {
    pub fn from_strong_sets(
        n: usize,
        k_d: usize,
        k_u: usize,
        strong_dl: Vec<Vec<usize>>,
        strong_ul: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if strong_dl.len() != strong_ul.len() {
            return Err(Error::contract("grouping", "DL and UL AP counts differ"));
        }
        let flags = |sets: &[Vec<usize>], k: usize, dir: &str| -> Result<Vec<Vec<bool>>> {
            sets.iter()
                .enumerate()
                .map(|(m, set)| {
                    if !set.is_empty() && set.len() >= n {
                        return Err(Error::contract(
                            format!("grouping.strong_{dir}[{m}]"),
                            format!("|S| = {} must be below N = {n}", set.len()),
                        ));
                    }
                    let mut f = vec![false; k];
                    for &u in set {
                        if u >= k || f[u] {
                            return Err(Error::contract(
                                format!("grouping.strong_{dir}[{m}]"),
                                format!("invalid or repeated UE index {u}"),
                            ));
                        }
                        f[u] = true;
                    }
                    Ok(f)
                })
                .collect()
        };
        Ok(GroupingAssignment {
            n,
            is_strong_dl: flags(&strong_dl, k_d, "dl")?,
            is_strong_ul: flags(&strong_ul, k_u, "ul")?,
            strong_dl: strong_dl.into_iter().map(sorted).collect(),
            strong_ul: strong_ul.into_iter().map(sorted).collect(),
        })
    }

    /// Applies [`group_ues`] at every AP, separately per direction.
    pub fn from_large_scale(ls: &LargeScaleModel, upsilon: f64, n: usize) -> Result<Self> {
        if !(0.0..=100.0).contains(&upsilon) {
            return Err(Error::InvalidInput(format!("upsilon must lie in [0, 100], got {upsilon}")));
        }
        if n == 0 {
            return Err(Error::InvalidInput("N must be at least 1".into()));
        }
        let m = ls.m();
        let row = |b: &DMatrix<f64>, a: usize| b.row(a).iter().copied().collect::<Vec<_>>();
        let strong_dl = (0..m).map(|a| group_ues(&row(&ls.beta_dl, a), upsilon, n).0).collect();
        let strong_ul = (0..m).map(|a| group_ues(&row(&ls.beta_ul, a), upsilon, n).0).collect();
        Self::from_strong_sets(n, ls.k_d(), ls.k_u(), strong_dl, strong_ul)
    }

    /// Grouping where AP m only considers the UEs it serves; unserved UEs are weak.
    pub fn from_served_sets(
        ls: &LargeScaleModel,
        upsilon: f64,
        n: usize,
        served_dl: &[Vec<usize>],
        served_ul: &[Vec<usize>],
    ) -> Result<Self> {
        let pick = |b: &DMatrix<f64>, a: usize, served: &[usize]| -> Vec<usize> {
            let gains: Vec<f64> = served.iter().map(|&u| b[(a, u)]).collect();
            group_ues(&gains, upsilon, n).0.into_iter().map(|j| served[j]).collect()
        };
        let strong_dl = (0..ls.m()).map(|a| pick(&ls.beta_dl, a, &served_dl[a])).collect();
        let strong_ul = (0..ls.m()).map(|a| pick(&ls.beta_ul, a, &served_ul[a])).collect();
        Self::from_strong_sets(n, ls.k_d(), ls.k_u(), strong_dl, strong_ul)
    }

    pub fn m(&self) -> usize {
        self.strong_dl.len()
    }

    pub fn is_strong_dl(&self, m: usize, k: usize) -> bool {
        self.is_strong_dl[m][k]
    }

    pub fn is_strong_ul(&self, m: usize, l: usize) -> bool {
        self.is_strong_ul[m][l]
    }

    /// Free spatial dimensions N − |S_m| left after nulling the strong DL set.
    pub fn zf_dof_dl(&self, m: usize) -> f64 {
        (self.n - self.strong_dl[m].len()) as f64
    }

    pub fn zf_dof_ul(&self, m: usize) -> f64 {
        (self.n - self.strong_ul[m].len()) as f64
    }

    /// (δ^Z, δ^T) for DL UE k at AP m; both zero when AP m does not transmit.
    pub fn delta_dl(&self, m: usize, k: usize, dl_active: bool) -> (u8, u8) {
        delta(dl_active, self.is_strong_dl[m][k])
    }

    pub fn delta_ul(&self, m: usize, l: usize, ul_active: bool) -> (u8, u8) {
        delta(ul_active, self.is_strong_ul[m][l])
    }

    /// E‖v_mk‖²: γ/(N−|S_m|) for ZF, N·γ for MRT.
    pub fn expected_norm_sq_dl(&self, ls: &LargeScaleModel, m: usize, k: usize) -> f64 {
        let g = ls.gamma_dl[(m, k)];
        if self.is_strong_dl[m][k] {
            g / self.zf_dof_dl(m)
        } else {
            self.n as f64 * g
        }
    }

    pub fn expected_norm_sq_ul(&self, ls: &LargeScaleModel, m: usize, l: usize) -> f64 {
        let g = ls.gamma_ul[(m, l)];
        if self.is_strong_ul[m][l] {
            g / self.zf_dof_ul(m)
        } else {
            self.n as f64 * g
        }
    }
}

fn delta(active: bool, strong: bool) -> (u8, u8) {
    match (active, strong) {
        (false, _) => (0, 0),
        (true, true) => (1, 0),
        (true, false) => (0, 1),
    }
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// γ_j · Ĝ(ĜᴴĜ)⁻¹ e_j for every column j of `ghat_strong`.
pub fn zf_precoders(ghat_strong: &DMatrix<Complex>, gammas: &[f64]) -> Result<DMatrix<Complex>> {
    let (n, s) = ghat_strong.shape();
    if s == 0 {
        return Ok(DMatrix::zeros(n, 0));
    }
    if s > n {
        return Err(Error::Precoder(format!("{s} strong UEs exceed {n} antennas")));
    }
    if gammas.len() != s {
        return Err(Error::Precoder("one gamma per strong UE is required".into()));
    }
    let gram = ghat_strong.adjoint() * ghat_strong;
    let max_diag = (0..s).map(|i| gram[(i, i)].re).fold(0.0, f64::max);
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Precoder("Gram matrix of strong estimates is singular".into()))?;
    let min_pivot = (0..s).map(|i| chol.l_dirty()[(i, i)].re.powi(2)).fold(f64::INFINITY, f64::min);
    if !(max_diag > 0.0) || min_pivot < GRAM_RCOND_FLOOR * max_diag {
        return Err(Error::Precoder("Gram matrix of strong estimates is rank deficient".into()));
    }
    let scale = DMatrix::from_diagonal(&DVector::from_iterator(s, gammas.iter().map(|&g| Complex::new(g, 0.0))));
    Ok(ghat_strong * chol.inverse() * scale)
}

/// ZF vector for column `k_col` of the strong-set estimate matrix.
pub fn zf_precoder(ghat_strong: &DMatrix<Complex>, k_col: usize, gamma_k: f64) -> Result<DVector<Complex>> {
    let s = ghat_strong.ncols();
    if k_col >= s {
        return Err(Error::Precoder(format!("column {k_col} out of range for |S| = {s}")));
    }
    let mut gammas = vec![1.0; s];
    gammas[k_col] = gamma_k;
    Ok(zf_precoders(ghat_strong, &gammas)?.column(k_col).into_owned())
}

pub fn mrt_precoder(ghat_k: &DVector<Complex>) -> DVector<Complex> {
    ghat_k.clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinerMode {
    Zf,
    Mr,
}

/// UL combiner for column `col` of `ghat`. In ZF mode `ghat` is the strong-set
/// estimate matrix; in MR mode the column is returned as is.
pub fn ul_combiner(ghat: &DMatrix<Complex>, col: usize, gamma: f64, mode: CombinerMode) -> Result<DVector<Complex>> {
    match mode {
        CombinerMode::Zf => zf_precoder(ghat, col, gamma),
        CombinerMode::Mr => {
            if col >= ghat.ncols() {
                return Err(Error::Precoder(format!("column {col} out of range")));
            }
            Ok(mrt_precoder(&ghat.column(col).into_owned()))
        }
    }
}

/// DL precoders (indexed `m * K_d + k`) and UL combiners (`m * K_u + l`) of a
/// realization. Entries of APs not active in a direction are `None`.
#[derive(Debug, Clone)]
pub struct PrecoderSet {
    pub k_d: usize,
    pub k_u: usize,
    pub v_dl: Vec<Option<DVector<Complex>>>,
    pub v_ul: Vec<Option<DVector<Complex>>>,
}

impl PrecoderSet {
    pub fn dl(&self, m: usize, k: usize) -> Option<&DVector<Complex>> {
        self.v_dl[m * self.k_d + k].as_ref()
    }

    pub fn ul(&self, m: usize, l: usize) -> Option<&DVector<Complex>> {
        self.v_ul[m * self.k_u + l].as_ref()
    }
}

fn stack(cols: &[&DVector<Complex>], n: usize) -> DMatrix<Complex> {
    DMatrix::from_fn(n, cols.len(), |r, c| cols[c][r])
}

fn direction_vectors(
    n: usize,
    k: usize,
    strong: &[usize],
    is_strong: impl Fn(usize) -> bool,
    ghat: impl Fn(usize) -> DVector<Complex>,
    gamma: impl Fn(usize) -> f64,
) -> Result<Vec<DVector<Complex>>> {
    let strong_est: Vec<DVector<Complex>> = strong.iter().map(|&u| ghat(u)).collect();
    let refs: Vec<&DVector<Complex>> = strong_est.iter().collect();
    let gammas: Vec<f64> = strong.iter().map(|&u| gamma(u)).collect();
    let zf = zf_precoders(&stack(&refs, n), &gammas)?;
    Ok((0..k)
        .map(|u| match strong.iter().position(|&s| s == u) {
            Some(col) if is_strong(u) => zf.column(col).into_owned(),
            _ => mrt_precoder(&ghat(u)),
        })
        .collect())
}

pub fn build_precoders(
    ls: &LargeScaleModel,
    draw: &SmallScaleDraw,
    grouping: &GroupingAssignment,
    dl_active: &[bool],
    ul_active: &[bool],
) -> Result<PrecoderSet> {
    let (m_aps, k_d, k_u, n) = (ls.m(), ls.k_d(), ls.k_u(), draw.n);
    let mut v_dl = vec![None; m_aps * k_d];
    let mut v_ul = vec![None; m_aps * k_u];
    for m in 0..m_aps {
        if dl_active[m] {
            let vs = direction_vectors(
                n,
                k_d,
                &grouping.strong_dl[m],
                |k| grouping.is_strong_dl(m, k),
                |k| draw.ghat_dl(m, k).clone(),
                |k| ls.gamma_dl[(m, k)],
            )?;
            for (k, v) in vs.into_iter().enumerate() {
                v_dl[m * k_d + k] = Some(v);
            }
        }
        if ul_active[m] {
            let vs = direction_vectors(
                n,
                k_u,
                &grouping.strong_ul[m],
                |l| grouping.is_strong_ul(m, l),
                |l| draw.ghat_ul(m, l).clone(),
                |l| ls.gamma_ul[(m, l)],
            )?;
            for (l, v) in vs.into_iter().enumerate() {
                v_ul[m * k_u + l] = Some(v);
            }
        }
    }
    Ok(PrecoderSet { k_d, k_u, v_dl, v_ul })
}
