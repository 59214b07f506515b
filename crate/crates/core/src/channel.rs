//! Propagation: path loss, spatially correlated log-normal shadowing, MMSE
//! estimate variances and Rayleigh small-scale draws.
//!
//! Every gain is expressed relative to the receiver noise power through the
//! normalized SNRs (`rho_*`), so a β of 1e-10 together with ρ = 3e11 means a
//! received SNR of 30 per unit transmit-power fraction.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::topology::{NetworkTopology, Point};
use crate::Complex;

/// Shadowing standard deviation (dB).
pub const SHADOW_STD_DB: f64 = 4.0;
/// Distance over which the shadowing correlation halves (m).
pub const SHADOW_DECORRELATION_M: f64 = 9.0;
/// Distances are clamped to this before the path-loss law.
pub const MIN_DISTANCE_M: f64 = 1.0;
/// Diagonal loading applied once if the shadowing covariance is not numerically PD.
pub const COVARIANCE_JITTER: f64 = 1e-12;

const BOLTZMANN: f64 = 1.380_649e-23;
const NOISE_TEMPERATURE_K: f64 = 290.0;

/// Path loss in dB at distance `d` meters.
pub fn pathloss_db(d: f64) -> Result<f64> {
    if !d.is_finite() || d <= 0.0 {
        return Err(Error::InvalidInput(format!("distance must be positive, got {d}")));
    }
    Ok(pathloss_db_clamped(d))
}

#[inline]
fn pathloss_db_clamped(d: f64) -> f64 {
    -30.5 - 36.7 * d.max(MIN_DISTANCE_M).log10()
}

/// Shadowing covariance (dB²) between two links of the same AP whose UEs are
/// `delta` meters apart. Links of different APs are uncorrelated.
pub fn shadowing_covariance(delta: f64, same_ap: bool) -> Result<f64> {
    if !delta.is_finite() || delta < 0.0 {
        return Err(Error::InvalidInput(format!("UE separation must be >= 0, got {delta}")));
    }
    Ok(if same_ap {
        SHADOW_STD_DB * SHADOW_STD_DB * 2f64.powf(-delta / SHADOW_DECORRELATION_M)
    } else {
        0.0
    })
}

/// Variance of the MMSE channel estimate with orthogonal pilots.
pub fn mmse_gamma(beta: f64, tau_t: usize, rho_t: f64) -> f64 {
    let snr = tau_t as f64 * rho_t;
    snr * beta * beta / (snr * beta + 1.0)
}

/// Transmit power normalized by thermal noise over `bandwidth_hz`.
pub fn normalized_snr(power_w: f64, bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    let noise_w = BOLTZMANN * NOISE_TEMPERATURE_K * bandwidth_hz * 10f64.powf(noise_figure_db / 10.0);
    power_w / noise_w
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    /// Pilot length τ_t (symbols).
    pub tau_t: usize,
    /// Coherence interval τ_c (symbols).
    pub tau_c: usize,
    pub rho_d: f64,
    pub rho_u: f64,
    /// Normalized pilot SNR.
    pub rho_t: f64,
    /// Residual SI power over noise at full AP transmit power (dB).
    pub si_ratio_db: f64,
    pub shadowing: bool,
    /// Force γ = β (no estimation error).
    pub perfect_csi: bool,
}

impl ChannelConfig {
    pub fn validate(&self, k_d: usize, k_u: usize) -> Result<()> {
        if self.tau_t < k_d.max(k_u).max(1) {
            return Err(Error::config(
                "channel.tau_t",
                format!("{} is shorter than max(K_d, K_u) = {}", self.tau_t, k_d.max(k_u)),
            ));
        }
        if self.tau_t >= self.tau_c {
            return Err(Error::config(
                "channel.tau_t",
                format!("pilot length {} must be below tau_c {}", self.tau_t, self.tau_c),
            ));
        }
        for (name, v) in [("rho_d", self.rho_d), ("rho_u", self.rho_u), ("rho_t", self.rho_t)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("channel.{name}"), format!("must be positive, got {v}")));
            }
        }
        if !self.si_ratio_db.is_finite() {
            return Err(Error::config("channel.si_ratio_db", "must be finite"));
        }
        Ok(())
    }
}

/// Long-term statistics of every link in the network.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScaleModel {
    /// AP m ↔ DL UE k (M×K_d).
    pub beta_dl: DMatrix<f64>,
    /// AP m ↔ UL UE ℓ (M×K_u).
    pub beta_ul: DMatrix<f64>,
    /// UL UE ℓ → DL UE k (K_d×K_u).
    pub beta_du: DMatrix<f64>,
    /// AP i → AP m (M×M); the diagonal holds the SI channel gain.
    pub beta_ap: DMatrix<f64>,
    /// Residual SI over noise at full transmit power, per AP (linear).
    pub si_variance: Vec<f64>,
    pub tau_t: usize,
    pub tau_c: usize,
    pub gamma_dl: DMatrix<f64>,
    pub gamma_ul: DMatrix<f64>,
}

impl LargeScaleModel {
    /// Assembles a model from explicit gains. `beta_ap`'s diagonal is ignored
    /// and replaced by `si_variance / rho_d`.
    pub fn from_gains(
        beta_dl: DMatrix<f64>,
        beta_ul: DMatrix<f64>,
        beta_du: DMatrix<f64>,
        mut beta_ap: DMatrix<f64>,
        si_variance: Vec<f64>,
        cfg: &ChannelConfig,
    ) -> Result<Self> {
        let m = beta_ap.nrows();
        let (k_d, k_u) = (beta_dl.ncols(), beta_ul.ncols());
        let shape_ok = beta_ap.ncols() == m
            && beta_dl.nrows() == m
            && beta_ul.nrows() == m
            && beta_du.shape() == (k_d, k_u)
            && si_variance.len() == m;
        if !shape_ok {
            return Err(Error::Model("inconsistent gain matrix shapes".into()));
        }
        cfg.validate(k_d, k_u)?;
        for (m_idx, &s) in si_variance.iter().enumerate() {
            beta_ap[(m_idx, m_idx)] = s / cfg.rho_d;
        }
        let gamma = |b: &DMatrix<f64>| {
            if cfg.perfect_csi {
                b.clone()
            } else {
                b.map(|v| mmse_gamma(v, cfg.tau_t, cfg.rho_t))
            }
        };
        let model = LargeScaleModel {
            gamma_dl: gamma(&beta_dl),
            gamma_ul: gamma(&beta_ul),
            beta_dl,
            beta_ul,
            beta_du,
            beta_ap,
            si_variance,
            tau_t: cfg.tau_t,
            tau_c: cfg.tau_c,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn m(&self) -> usize {
        self.beta_ap.nrows()
    }

    pub fn k_d(&self) -> usize {
        self.beta_dl.ncols()
    }

    pub fn k_u(&self) -> usize {
        self.beta_ul.ncols()
    }

    /// Fraction of the coherence interval left for payload.
    pub fn payload_fraction(&self) -> f64 {
        1.0 - self.tau_t as f64 / self.tau_c as f64
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, b: &DMatrix<f64>| -> Result<()> {
            if b.iter().all(|v| v.is_finite() && *v > 0.0) {
                Ok(())
            } else {
                Err(Error::Model(format!("{name} must be positive and finite")))
            }
        };
        positive("beta_dl", &self.beta_dl)?;
        positive("beta_ul", &self.beta_ul)?;
        positive("beta_du", &self.beta_du)?;
        positive("beta_ap", &self.beta_ap)?;
        for (gamma, beta, name) in [
            (&self.gamma_dl, &self.beta_dl, "gamma_dl"),
            (&self.gamma_ul, &self.beta_ul, "gamma_ul"),
        ] {
            if gamma.shape() != beta.shape() || gamma.iter().zip(beta.iter()).any(|(g, b)| !(*g > 0.0 && g <= b)) {
                return Err(Error::Model(format!("{name} must satisfy 0 < gamma <= beta")));
            }
        }
        let m = self.m();
        for i in 0..m {
            for j in i + 1..m {
                if self.beta_ap[(i, j)] != self.beta_ap[(j, i)] {
                    return Err(Error::Model("inter-AP gains must be symmetric".into()));
                }
            }
        }
        if self.tau_t < self.k_d().max(self.k_u()) || self.tau_t >= self.tau_c {
            return Err(Error::Model(format!(
                "pilot length {} incompatible with K_d={}, K_u={}, tau_c={}",
                self.tau_t,
                self.k_d(),
                self.k_u(),
                self.tau_c
            )));
        }
        Ok(())
    }
}

fn db_gain(pl_db: f64, shadow_db: f64) -> f64 {
    10f64.powf(pl_db / 10.0) * 10f64.powf(shadow_db / 10.0)
}

/// Lower-triangular factor of the per-AP shadowing covariance across `ues`.
pub fn shadowing_factor(ues: &[Point], side: f64) -> Result<DMatrix<f64>> {
    let k = ues.len();
    let cov = DMatrix::from_fn(k, k, |a, b| {
        let d = crate::topology::wrap_distance_unchecked(ues[a], ues[b], side);
        SHADOW_STD_DB * SHADOW_STD_DB * 2f64.powf(-d / SHADOW_DECORRELATION_M)
    });
    if let Some(ch) = Cholesky::new(cov.clone()) {
        return Ok(ch.l());
    }
    let loaded = cov + DMatrix::identity(k, k) * COVARIANCE_JITTER;
    Cholesky::new(loaded)
        .map(|ch| ch.l())
        .ok_or_else(|| Error::Model("shadowing covariance is not positive semidefinite".into()))
}

/// Draws path loss and shadowing for every link of `topo`.
pub fn draw_large_scale(topo: &NetworkTopology, cfg: &ChannelConfig, seed: u64) -> Result<LargeScaleModel> {
    let (m, k_d, k_u) = (topo.m(), topo.k_d(), topo.k_u());
    let mut rng = rng::stream(seed, Purpose::Shadowing, 0);
    let ues: Vec<Point> = topo.dl_ues.iter().chain(&topo.ul_ues).copied().collect();
    let factor = if cfg.shadowing && !ues.is_empty() {
        Some(shadowing_factor(&ues, topo.side)?)
    } else {
        None
    };
    let normal = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };

    let mut beta_dl = DMatrix::zeros(m, k_d);
    let mut beta_ul = DMatrix::zeros(m, k_u);
    for (a, &ap) in topo.aps.iter().enumerate() {
        let shadow = match &factor {
            Some(l) => l * DVector::from_fn(ues.len(), |_, _| normal(&mut rng)),
            None => DVector::zeros(ues.len()),
        };
        for (u, &ue) in ues.iter().enumerate() {
            let g = db_gain(pathloss_db_clamped(topo.distance(ap, ue)), shadow[u]);
            if u < k_d {
                beta_dl[(a, u)] = g;
            } else {
                beta_ul[(a, u - k_d)] = g;
            }
        }
    }

    let shadow_std = if cfg.shadowing { SHADOW_STD_DB } else { 0.0 };
    let mut beta_du = DMatrix::zeros(k_d, k_u);
    for (k, &dl) in topo.dl_ues.iter().enumerate() {
        for (l, &ul) in topo.ul_ues.iter().enumerate() {
            let f = shadow_std * normal(&mut rng);
            beta_du[(k, l)] = db_gain(pathloss_db_clamped(topo.distance(dl, ul)), f);
        }
    }

    let mut beta_ap = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i + 1..m {
            let f = shadow_std * normal(&mut rng);
            let g = db_gain(pathloss_db_clamped(topo.distance(topo.aps[i], topo.aps[j])), f);
            beta_ap[(i, j)] = g;
            beta_ap[(j, i)] = g;
        }
    }
    let si_variance = vec![db_to_linear(cfg.si_ratio_db); m];
    LargeScaleModel::from_gains(beta_dl, beta_ul, beta_du, beta_ap, si_variance, cfg)
}

/// One realization of every small-scale channel plus the MMSE estimates.
#[derive(Debug, Clone)]
pub struct SmallScaleDraw {
    pub n: usize,
    pub m: usize,
    pub k_d: usize,
    pub k_u: usize,
    /// Indexed `m * K_d + k`.
    pub g_dl: Vec<DVector<Complex>>,
    pub ghat_dl: Vec<DVector<Complex>>,
    /// Indexed `m * K_u + l`.
    pub g_ul: Vec<DVector<Complex>>,
    pub ghat_ul: Vec<DVector<Complex>>,
    /// UL UE ℓ → DL UE k.
    pub h_du: DMatrix<Complex>,
    /// Indexed `m * M + i`: channel from AP i into AP m (i = m is the SI channel).
    pub z_ap: Vec<DMatrix<Complex>>,
}

impl SmallScaleDraw {
    pub fn g_dl(&self, m: usize, k: usize) -> &DVector<Complex> {
        &self.g_dl[m * self.k_d + k]
    }
    pub fn ghat_dl(&self, m: usize, k: usize) -> &DVector<Complex> {
        &self.ghat_dl[m * self.k_d + k]
    }
    pub fn g_ul(&self, m: usize, l: usize) -> &DVector<Complex> {
        &self.g_ul[m * self.k_u + l]
    }
    pub fn ghat_ul(&self, m: usize, l: usize) -> &DVector<Complex> {
        &self.ghat_ul[m * self.k_u + l]
    }
    pub fn z(&self, m: usize, i: usize) -> &DMatrix<Complex> {
        &self.z_ap[m * self.m + i]
    }
}

/// CN(0, `variance`) sample.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(s * re, s * im)
}

pub fn complex_normal_vector<R: Rng + ?Sized>(rng: &mut R, n: usize, variance: f64) -> DVector<Complex> {
    DVector::from_fn(n, |_, _| complex_normal(rng, variance))
}

/// Channel and its MMSE estimate: ĝ ~ CN(0, γI), g − ĝ ~ CN(0, (β−γ)I), independent.
fn channel_with_estimate<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    beta: f64,
    gamma: f64,
) -> (DVector<Complex>, DVector<Complex>) {
    let ghat = complex_normal_vector(rng, n, gamma);
    let err_var = (beta - gamma).max(0.0);
    let g = if err_var == 0.0 {
        ghat.clone()
    } else {
        &ghat + complex_normal_vector(rng, n, err_var)
    };
    (g, ghat)
}

/// Pilot-based MMSE estimate of `g` (variance `beta`) from a length-`tau_t`
/// orthogonal pilot at normalized SNR `rho_t`.
pub fn estimate_from_pilot<R: Rng + ?Sized>(
    rng: &mut R,
    g: &DVector<Complex>,
    beta: f64,
    tau_t: usize,
    rho_t: f64,
) -> DVector<Complex> {
    let amp = (tau_t as f64 * rho_t).sqrt();
    let received = g * Complex::new(amp, 0.0) + complex_normal_vector(rng, g.len(), 1.0);
    let c = amp * beta / (amp * amp * beta + 1.0);
    received * Complex::new(c, 0.0)
}

pub fn draw_small_scale_with<R: Rng + ?Sized>(ls: &LargeScaleModel, n: usize, rng: &mut R) -> SmallScaleDraw {
    let (m, k_d, k_u) = (ls.m(), ls.k_d(), ls.k_u());
    let mut g_dl = Vec::with_capacity(m * k_d);
    let mut ghat_dl = Vec::with_capacity(m * k_d);
    let mut g_ul = Vec::with_capacity(m * k_u);
    let mut ghat_ul = Vec::with_capacity(m * k_u);
    for a in 0..m {
        for k in 0..k_d {
            let (g, gh) = channel_with_estimate(rng, n, ls.beta_dl[(a, k)], ls.gamma_dl[(a, k)]);
            g_dl.push(g);
            ghat_dl.push(gh);
        }
        for l in 0..k_u {
            let (g, gh) = channel_with_estimate(rng, n, ls.beta_ul[(a, l)], ls.gamma_ul[(a, l)]);
            g_ul.push(g);
            ghat_ul.push(gh);
        }
    }
    let h_du = DMatrix::from_fn(k_d, k_u, |k, l| complex_normal(rng, ls.beta_du[(k, l)]));
    let mut z_ap = Vec::with_capacity(m * m);
    for a in 0..m {
        for i in 0..m {
            let var = ls.beta_ap[(a, i)];
            z_ap.push(DMatrix::from_fn(n, n, |_, _| complex_normal(rng, var)));
        }
    }
    SmallScaleDraw {
        n,
        m,
        k_d,
        k_u,
        g_dl,
        ghat_dl,
        g_ul,
        ghat_ul,
        h_du,
        z_ap,
    }
}

/// Small-scale realization, deterministic in `seed`.
pub fn draw_small_scale(ls: &LargeScaleModel, n: usize, seed: u64) -> Result<SmallScaleDraw> {
    if n == 0 {
        return Err(Error::InvalidInput("N must be at least 1".into()));
    }
    let mut rng = rng::stream(seed, Purpose::SmallScale, 0);
    Ok(draw_small_scale_with(ls, n, &mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::generate_topology;

    pub(crate) fn cfg() -> ChannelConfig {
        ChannelConfig {
            tau_t: 4,
            tau_c: 200,
            rho_d: 3e11,
            rho_u: 1.5e11,
            rho_t: 1.5e11,
            si_ratio_db: 50.0,
            shadowing: true,
            perfect_csi: false,
        }
    }

    #[test]
    fn pathloss_examples() {
        assert!((pathloss_db(1.0).unwrap() + 30.5).abs() < 1e-12);
        assert!((pathloss_db(10.0).unwrap() + 67.2).abs() < 1e-12);
        assert!((pathloss_db(100.0).unwrap() + 103.9).abs() < 1e-12);
        assert!(pathloss_db(0.0).is_err());
        assert!(pathloss_db(-3.0).is_err());
    }

    #[test]
    fn shadowing_covariance_examples() {
        assert_eq!(shadowing_covariance(0.0, true).unwrap(), 16.0);
        assert!((shadowing_covariance(9.0, true).unwrap() - 8.0).abs() < 1e-12);
        assert_eq!(shadowing_covariance(9.0, false).unwrap(), 0.0);
        assert!(shadowing_covariance(f64::NAN, true).is_err());
    }

    #[test]
    fn mmse_gamma_examples() {
        assert_eq!(mmse_gamma(0.0, 4, 10.0), 0.0);
        assert!((mmse_gamma(1.0, 1, 1.0) - 0.5).abs() < 1e-15);
        let b = 2e-9;
        assert!((mmse_gamma(b, 10, 1e30) / b - 1.0).abs() < 1e-12);
        assert!(mmse_gamma(b, 10, 1e9) < b);
    }

    #[test]
    fn si_ratio_maps_to_noise_normalized_variance() {
        let topo = generate_topology(3, 1, 1, 500.0, 50.0, 1).unwrap();
        let ls = draw_large_scale(&topo, &cfg(), 2).unwrap();
        for m in 0..3 {
            assert!((ls.si_variance[m] - 1e5).abs() < 1e-6);
            assert!((ls.beta_ap[(m, m)] * cfg().rho_d - 1e5).abs() < 1e-6);
        }
    }

    #[test]
    fn co_located_ues_share_shadowing() {
        let p = Point::new(10.0, 10.0);
        let topo = NetworkTopology::new(500.0, vec![Point::new(200.0, 200.0)], vec![p, p], vec![]).unwrap();
        let ls = draw_large_scale(&topo, &cfg(), 4).unwrap();
        let ratio = ls.beta_dl[(0, 0)] / ls.beta_dl[(0, 1)];
        assert!((ratio - 1.0).abs() < 1e-5, "ratio {ratio}");
    }

    #[test]
    fn large_scale_invariants_hold() {
        let topo = generate_topology(10, 3, 3, 500.0, 50.0, 8).unwrap();
        let ls = draw_large_scale(&topo, &cfg(), 9).unwrap();
        ls.validate().unwrap();
        for (g, b) in ls.gamma_dl.iter().zip(ls.beta_dl.iter()) {
            assert!(*g > 0.0 && g < b);
        }
    }

    #[test]
    fn perfect_csi_error_vanishes() {
        let topo = generate_topology(2, 1, 1, 500.0, 50.0, 8).unwrap();
        let mut c = cfg();
        c.perfect_csi = true;
        let ls = draw_large_scale(&topo, &c, 9).unwrap();
        let d = draw_small_scale(&ls, 4, 3).unwrap();
        for (g, gh) in d.g_dl.iter().zip(&d.ghat_dl) {
            assert_eq!(g, gh);
        }
    }

    #[test]
    fn short_pilot_rejected() {
        let mut c = cfg();
        c.tau_t = 1;
        let topo = generate_topology(2, 2, 1, 500.0, 50.0, 8).unwrap();
        assert!(matches!(draw_large_scale(&topo, &c, 1), Err(Error::Config { .. })));
    }
}
