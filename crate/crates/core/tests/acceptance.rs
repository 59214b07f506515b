//! Acceptance suite. Every test prints one `criterion N: PASS|FAIL ...` line
//! (straight to stderr, so it shows even when output is captured) and then
//! asserts on the same outcome.

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use cellfree::assignment::{exhaustive_mode_select, greedy_mode_select, ModeProblem, QosSpec};
use cellfree::channel::{complex_normal_vector, draw_large_scale, shadowing_covariance};
use cellfree::config::{ExperimentConfig, StructureKind};
use cellfree::energy::{
    energy_efficiency, energy_efficiency_bits_per_joule, fd_cellular_power, fd_from_hd_power, fronthaul_power,
    hd_cellular_power, CellularLoad, PowerModelParams,
};
use cellfree::experiment::{instance, run_experiment, run_validation, ExperimentResult};
use cellfree::performance::{evaluate, DuplexAssignment, Structure};
use cellfree::precoding::{zf_precoders, GroupingAssignment};
use cellfree::rng::{stream, Purpose};
use cellfree::topology::{NetworkTopology, Point};
use nalgebra::DMatrix;
use rand::Rng;

fn report(n: usize, pass: bool, detail: String) {
    let line = format!("criterion {n}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{}", line.trim_end());
}

fn load(path: &str) -> ExperimentConfig {
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../");
    ExperimentConfig::load(std::path::Path::new(&format!("{root}{path}"))).unwrap()
}

#[test]
fn criterion_1_zf_orthogonality() {
    let start = Instant::now();
    let mut rng = stream(2024, Purpose::SmallScale, 0);
    let mut worst: f64 = 0.0;
    for c in 0..1000u64 {
        let n = rng.random_range(2..=16usize);
        let s = rng.random_range(1..n);
        let gammas: Vec<f64> = (0..s).map(|_| 10f64.powf(rng.random_range(-14.0..-6.0))).collect();
        let cols: Vec<_> = gammas.iter().map(|&g| complex_normal_vector(&mut rng, n, g)).collect();
        let v = zf_precoders(&DMatrix::from_columns(&cols), &gammas)
            .unwrap_or_else(|e| panic!("construction {c} (N={n}, |S|={s}): {e}"));
        for k in 0..s {
            for kp in 0..s {
                let target = if k == kp { gammas[k] } else { 0.0 };
                let dev = (cols[kp].dotc(&v.column(k)) - target).norm() / gammas[k];
                worst = worst.max(dev);
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        1,
        worst < 1e-9 && elapsed < Duration::from_secs(10),
        format!("max normalized deviation {worst:.2e} over 1000 constructions in {elapsed:.2?}"),
    );
}

#[test]
fn criterion_2_closed_form_vs_monte_carlo() {
    let start = Instant::now();
    let cfg = load("configs/validation.toml");
    assert_eq!((cfg.topology.m, cfg.precoding.n_antennas, cfg.topology.k_d, cfg.topology.k_u), (4, 8, 2, 2));
    let rep = run_validation(&cfg).unwrap();
    let worst = |desired: bool| {
        rep.rows
            .iter()
            .filter(|r| (r.term == "desired") == desired)
            .map(|r| r.rel_error)
            .fold(0.0, f64::max)
    };
    let elapsed = start.elapsed();
    let failed = rep.rows.iter().filter(|r| !r.pass()).count();
    report(
        2,
        rep.all_pass() && rep.draws == 10_000 && elapsed < Duration::from_secs(300),
        format!(
            "{} terms, {failed} outside tolerance; worst desired {:.4}, worst interference {:.4}; {elapsed:.2?}",
            rep.rows.len(),
            worst(true),
            worst(false)
        ),
    );
}

#[test]
fn criterion_3_reduction_identities() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut check = |what: &str, a: f64, b: f64| {
        if !common::rel_eq(a, b, 1e-12) {
            failures.push(format!("{what}: {a} vs {b}"));
        }
    };
    for seed in 0..5 {
        let ls = common::random_model(6, 3, 2, 300.0, 300 + seed);
        let n = 8;

        // all-on NAFD against FD
        let g = GroupingAssignment::from_large_scale(&ls, 50.0, n).unwrap();
        let fd = DuplexAssignment::full_duplex(6);
        let hybrid = DuplexAssignment::hybrid(vec![true; 6], vec![true; 6]);
        let p = common::scaled_power(&ls, &g, &fd, 0.7, 0.9);
        let a = evaluate(&ls, &g, &hybrid, &p).unwrap();
        let b = evaluate(&ls, &g, &fd, &p).unwrap();
        for (x, y) in a.dl.iter().zip(&b.dl) {
            check("nafd/fd dl desired", x.desired, y.desired);
            check("nafd/fd dl uncertainty", x.beamforming_uncertainty, y.beamforming_uncertainty);
            check("nafd/fd dl inter-UE", x.inter_ue, y.inter_ue);
            check("nafd/fd dl cross-link", x.ul_to_dl, y.ul_to_dl);
        }
        for (x, y) in a.ul.iter().zip(&b.ul) {
            check("nafd/fd ul desired", x.desired, y.desired);
            check("nafd/fd ul lambda", x.lambda(), y.lambda());
            check("nafd/fd ul inter-AP", x.inter_ap, y.inter_ap);
            check("nafd/fd ul SI", x.self_interference, y.self_interference);
        }

        for d in [
            DuplexAssignment::full_duplex(6),
            DuplexAssignment::nafd(vec![true, false, false, true, true, false]),
            DuplexAssignment::half_duplex(6, 0.5),
        ] {
            // δ^T ≡ 1: pure MRT; δ^Z ≡ 1 with |S| = K < N: full ZF
            for (upsilon, mrt) in [(0.0, true), (100.0, false)] {
                let g = GroupingAssignment::from_large_scale(&ls, upsilon, n).unwrap();
                for m in 0..6 {
                    let expected = if mrt { 0 } else { 3 };
                    assert_eq!(g.strong_dl[m].len(), expected);
                }
                let p = common::scaled_power(&ls, &g, &d, 0.6, 0.5);
                let r = evaluate(&ls, &g, &d, &p).unwrap();
                for (k, t) in r.dl.iter().enumerate() {
                    let w = if mrt { common::mrt_dl(&ls, &d, &p, n, k) } else { common::fzf_dl(&ls, &d, &p, n, k) };
                    check("dl desired", t.desired, w.desired);
                    check("dl interference", t.interference(), w.interference);
                }
                for (l, t) in r.ul.iter().enumerate() {
                    let w = if mrt { common::mrt_ul(&ls, &d, &p, n, l) } else { common::fzf_ul(&ls, &d, &p, n, l) };
                    check("ul desired", t.desired, w.desired);
                    check("ul lambda+phi", t.lambda() + t.phi(), w.interference);
                    check("ul phi", t.phi(), w.cross);
                    if d.structure == Structure::Hd {
                        check("HD phi", t.phi(), 0.0);
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        3,
        failures.is_empty() && elapsed < Duration::from_secs(1),
        format!("{} mismatches over 5 networks in {elapsed:.2?} {:?}", failures.len(), failures.first()),
    );
}

#[test]
fn criterion_4_power_model_identities() {
    let start = Instant::now();
    let params = PowerModelParams::default();
    let mut ok = fd_from_hd_power(1.0, 4, 0.1) == 2.4;
    let mut worst_gap: f64 = 0.0;
    for (n_rx, p_sic) in [(1, 0.5), (4, 1.0), (8, 0.1), (64, 2.0)] {
        let p = PowerModelParams { p_sic, ..params.clone() };
        let load = CellularLoad {
            varsigma: vec![1.0, 0.5, 0.25],
            bs_tx_power: 0.2 * n_rx as f64,
            n_tx: n_rx,
            n_rx,
        };
        let gap = fd_cellular_power(&load, &p) - 2.0 * hd_cellular_power(&load, &p) - n_rx as f64 * p_sic;
        worst_gap = worst_gap.max(gap.abs());
    }
    ok &= worst_gap <= 1e-12;
    // 0.25 W per Gbit/s on top of the fixed part
    let slope = fronthaul_power(1e9, &params).unwrap() - fronthaul_power(0.0, &params).unwrap();
    ok &= (slope - 0.25).abs() <= 1e-12 && fronthaul_power(0.0, &params).unwrap() == params.fh_fixed;
    let r1 = fronthaul_power(3e8, &params).unwrap() - params.fh_fixed;
    let r2 = fronthaul_power(6e8, &params).unwrap() - params.fh_fixed;
    ok &= (r2 - 2.0 * r1).abs() <= 1e-15;
    let ee = energy_efficiency(7.3, 41.0).unwrap();
    let scaled = [1e-3, 0.5, 2.0, 1e4].iter().all(|&c| common::rel_eq(energy_efficiency(c * 7.3, c * 41.0).unwrap(), ee, 1e-15));
    ok &= scaled && energy_efficiency(2.0, 1.0).unwrap() == 2.0 && energy_efficiency(0.0, 3.0).unwrap() == 0.0;
    ok &= energy_efficiency_bits_per_joule(2.0, 1.0, 20e6).unwrap() == 40e6;
    let elapsed = start.elapsed();
    report(
        4,
        ok && elapsed < Duration::from_secs(1),
        format!("FD-cell gap residual {worst_gap:.1e}, fronthaul slope {slope} W per Gbit/s, EE scale-invariant {scaled}; {elapsed:.2?}"),
    );
}

#[test]
fn criterion_5_shadowing_statistics() {
    let start = Instant::now();
    let ues = vec![
        Point::new(100.0, 100.0),
        Point::new(100.0, 100.0),
        Point::new(109.0, 100.0),
        Point::new(118.0, 100.0),
    ];
    let aps = vec![Point::new(300.0, 300.0), Point::new(150.0, 400.0)];
    let topo = NetworkTopology::new(500.0, aps, ues, vec![]).unwrap();
    let cfg = common::channel_config(4, 0);
    let draws = 100_000u64;
    // pairs (0,1), (0,2), (0,3) at the same AP; UE 0 across the two APs
    let mut s = [0.0f64; 4];
    let mut sxy = [0.0f64; 4];
    let mut sx = [[0.0f64; 2]; 4];
    for seed in 0..draws {
        let ls = draw_large_scale(&topo, &cfg, seed).unwrap();
        let f0 = common::shadowing_db(&topo, &ls, 0);
        let f1 = common::shadowing_db(&topo, &ls, 1);
        let pairs = [(f0[0], f0[1]), (f0[0], f0[2]), (f0[0], f0[3]), (f0[0], f1[0])];
        for (i, (x, y)) in pairs.iter().enumerate() {
            s[i] += 1.0;
            sxy[i] += x * y;
            sx[i][0] += x;
            sx[i][1] += y;
        }
    }
    let cov: Vec<f64> = (0..4).map(|i| sxy[i] / s[i] - sx[i][0] * sx[i][1] / (s[i] * s[i])).collect();
    let mut ok = true;
    let mut detail = Vec::new();
    for (i, delta) in [0.0, 9.0, 18.0].into_iter().enumerate() {
        let target = shadowing_covariance(delta, true).unwrap();
        let err = (cov[i] - target).abs() / target;
        ok &= err < 0.05;
        detail.push(format!("delta {delta} m: {:.3} vs {target} ({:.2}%)", cov[i], 100.0 * err));
    }
    ok &= cov[3].abs() <= 0.5;
    let elapsed = start.elapsed();
    report(
        5,
        ok && elapsed < Duration::from_secs(30),
        format!("{}; cross-AP {:.3}; {elapsed:.2?}", detail.join(", "), cov[3]),
    );
}

/// Outcome of the EE and feasibility claims for one sweep.
fn sweep_claims(res: &ExperimentResult) -> (bool, bool, String) {
    let mut ee_ok = true;
    let mut compared = 0;
    for qi in 0..res.qos.len() {
        let ee = |s| res.row(s, qi).and_then(|r| r.mean_ee_common);
        if let (Some(n), Some(f), Some(h)) = (ee(StructureKind::Nafd), ee(StructureKind::Fd), ee(StructureKind::Hd)) {
            compared += 1;
            ee_ok &= n >= f && n >= h;
        }
    }
    let target = res.qos.iter().position(|q| (q - 1.8).abs() < 1e-9);
    let rate = |s, qi| res.row(s, qi).map(|r| r.feasible_rate).unwrap_or(0.0);
    let target_met = target.is_some_and(|qi| {
        rate(StructureKind::Nafd, qi) > 0.5 && rate(StructureKind::Fd, qi) < 0.5 && rate(StructureKind::Hd, qi) < 0.5
    });
    let dominates = res.nafd_feasibility_dominates();
    let rates_at_target = target
        .map(|qi| {
            format!(
                "rates at 1.8: NAFD {:.2} FD {:.2} HD {:.2}",
                rate(StructureKind::Nafd, qi),
                rate(StructureKind::Fd, qi),
                rate(StructureKind::Hd, qi)
            )
        })
        .unwrap_or_default();
    let crossover = res
        .crossover_qos()
        .map(|q| format!("{q:.1}"))
        .unwrap_or_else(|| "none".into());
    let feas_ok = target_met || dominates;
    let detail = format!(
        "EE order holds at {compared} jointly feasible levels: {ee_ok}; {rates_at_target}; crossover {crossover}; dominance {dominates}"
    );
    (ee_ok && compared > 0, feas_ok, detail)
}

#[test]
fn criterion_6_nafd_vs_fd_hd_sweeps() {
    let start = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    for path in ["configs/m16.toml", "configs/default.toml"] {
        let cfg = load(path);
        assert!(cfg.experiment.n_topologies >= 50);
        assert_eq!(cfg.channel.si_ratio_db, 50.0);
        let res = run_experiment(&cfg).unwrap();
        let (ee_ok, feas_ok, d) = sweep_claims(&res);
        ok &= ee_ok && feas_ok;
        detail.push(format!("M={}: {d}", cfg.topology.m));
    }
    let elapsed = start.elapsed();
    report(
        6,
        ok && elapsed < Duration::from_secs(1800),
        format!("{}; {elapsed:.2?}", detail.join(" | ")),
    );
}

#[test]
fn criterion_7_greedy_vs_exhaustive() {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::default();
    cfg.topology.m = 8;
    let ch = cfg.channel_config().unwrap();
    let levels = [0.0, 0.4, 0.8, 1.2];
    let (mut dominated, mut matched, mut feasible, mut matched_feasible) = (0, 0, 0, 0);
    for t in 0..100 {
        let ls = instance(&cfg, t).unwrap();
        let g = GroupingAssignment::from_large_scale(&ls, cfg.precoding.effective_upsilon(), 8).unwrap();
        let qos = QosSpec::uniform(levels[t % levels.len()]);
        let p = ModeProblem::new(&ls, &g, qos, &cfg.power, cfg.experiment.power_exponent, ch.rho_d, ch.rho_u).unwrap();
        let greedy = greedy_mode_select(&p).unwrap().solution;
        let best = exhaustive_mode_select(&p, 16).unwrap();
        // exhaustive wins on the search objective: feasibility first, then EE
        let ge = best.objective().cmp(&greedy.objective()) != std::cmp::Ordering::Less;
        let ee_ge = !greedy.feasible || best.ee >= greedy.ee;
        if ge && ee_ge {
            dominated += 1;
        }
        if best.feasible {
            feasible += 1;
        }
        let same = greedy.feasible == best.feasible
            && (!best.feasible || (best.ee - greedy.ee) <= 0.05 * best.ee);
        if same {
            matched += 1;
            if best.feasible {
                matched_feasible += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        7,
        dominated == 100 && matched >= 80 && elapsed < Duration::from_secs(600),
        format!("exhaustive >= greedy on {dominated}/100, greedy within 5% on {matched}/100 ({matched_feasible} of {feasible} feasible); {elapsed:.2?}"),
    );
}

#[test]
fn criterion_8_determinism_across_thread_counts() {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::default();
    cfg.topology.m = 10;
    cfg.experiment.n_topologies = 6;
    cfg.experiment.qos_step = 0.5;
    cfg.experiment.structures = vec![
        StructureKind::Nafd,
        StructureKind::Fd,
        StructureKind::Hd,
        StructureKind::Smallcell,
    ];
    let mut vcfg = load("configs/validation.toml");
    vcfg.validation.n_fading_draws = 700;
    let bytes = || {
        let mut out = Vec::new();
        let res = run_experiment(&cfg).unwrap();
        res.write_csv(&mut out).unwrap();
        res.write_topology_csv(&mut out).unwrap();
        run_validation(&vcfg).unwrap().write_csv(&mut out).unwrap();
        out
    };
    let runs: Vec<Vec<u8>> = [1, 4, 8, 1, 4, 8]
        .iter()
        .map(|&t| rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap().install(bytes))
        .collect();
    let identical = runs.windows(2).all(|w| w[0] == w[1]);
    let elapsed = start.elapsed();
    report(
        8,
        identical && elapsed < Duration::from_secs(60),
        format!("{} runs at 1/4/8 threads, {} bytes each, identical {identical}; {elapsed:.2?}", runs.len(), runs[0].len()),
    );
}
