mod common;

use std::cmp::Ordering;

use cellfree::assignment::{exhaustive_mode_select, greedy_mode_select, power_rule_fractional, ModeProblem, QosSpec};
use cellfree::energy::{cf_total_power, CfActivity, PowerModelParams};
use cellfree::performance::{evaluate, DuplexAssignment};
use cellfree::precoding::GroupingAssignment;

fn problem_parts(m: usize, seed: u64) -> (cellfree::channel::LargeScaleModel, GroupingAssignment) {
    let ls = common::random_model(m, 3, 3, 300.0, seed);
    let g = GroupingAssignment::from_large_scale(&ls, 50.0, 8).unwrap();
    (ls, g)
}

#[test]
fn exhaustive_result_is_the_enumerated_optimum() {
    let params = PowerModelParams::default();
    let ch = common::channel_config(3, 3);
    for seed in 0..4 {
        let (ls, g) = problem_parts(6, seed);
        for q in [0.0, 0.5, 1.5] {
            let p = ModeProblem::new(&ls, &g, QosSpec::uniform(q), &params, 0.0, ch.rho_d, ch.rho_u).unwrap();
            let best = exhaustive_mode_select(&p, 16).unwrap();
            assert_eq!(best.feasible, best.slack >= 0.0);
            for idx in 0..64u32 {
                let a: Vec<bool> = (0..6).map(|i| idx >> (5 - i) & 1 == 1).collect();
                let s = p.evaluate(&DuplexAssignment::nafd(a.clone())).unwrap();
                match s.objective().cmp(&best.objective()) {
                    Ordering::Greater => panic!("{a:?} beats the exhaustive optimum"),
                    Ordering::Equal => assert!(a >= best.duplex.dl_mode, "tie not broken lexicographically"),
                    Ordering::Less => {}
                }
                if best.feasible && s.feasible {
                    assert!(s.ee <= best.ee);
                }
            }
        }
    }
}

#[test]
fn greedy_trace_is_monotone_and_never_beats_exhaustive() {
    let params = PowerModelParams::default();
    let ch = common::channel_config(3, 3);
    for seed in 10..16 {
        let (ls, g) = problem_parts(7, seed);
        for q in [0.0, 0.8, 2.0] {
            let p = ModeProblem::new(&ls, &g, QosSpec::uniform(q), &params, 0.0, ch.rho_d, ch.rho_u).unwrap();
            let greedy = greedy_mode_select(&p).unwrap();
            for w in greedy.trace.windows(2) {
                assert_eq!(w[1].cmp(&w[0]), Ordering::Greater);
            }
            assert_eq!(greedy.trace.last().copied(), Some(greedy.solution.objective()));
            let best = exhaustive_mode_select(&p, 16).unwrap();
            assert_ne!(greedy.solution.objective().cmp(&best.objective()), Ordering::Greater);
        }
    }
}

#[test]
fn solutions_satisfy_mode_and_power_constraints() {
    let params = PowerModelParams::default();
    let ch = common::channel_config(3, 3);
    let (ls, g) = problem_parts(6, 21);
    let p = ModeProblem::new(&ls, &g, QosSpec::uniform(0.6), &params, -0.5, ch.rho_d, ch.rho_u).unwrap();
    for sol in [greedy_mode_select(&p).unwrap().solution, exhaustive_mode_select(&p, 16).unwrap()] {
        let d = &sol.duplex;
        assert!(d.dl_mode.iter().zip(&d.ul_mode).all(|(a, b)| a != b));
        sol.power.validate(&ls, &g, d).unwrap();
        for m in (0..6).filter(|&m| d.dl_mode[m]) {
            assert!((sol.power.ap_load(&ls, &g, m) - 1.0).abs() < 1e-12);
        }
        if sol.feasible {
            assert!(sol.report.dl_se.iter().chain(&sol.report.ul_se).all(|&s| s >= 0.6));
        }
    }
}

#[test]
fn without_ul_users_exhaustive_is_at_least_as_good_as_all_downlink() {
    let params = PowerModelParams::default();
    let ls = common::random_model(5, 3, 0, 300.0, 31);
    let g = GroupingAssignment::from_large_scale(&ls, 50.0, 8).unwrap();
    let ch = common::channel_config(3, 0);
    for q in [0.0, 1.0, 3.0] {
        let p = ModeProblem::new(&ls, &g, QosSpec::uniform(q), &params, 0.0, ch.rho_d, ch.rho_u).unwrap();
        let all_dl = p.evaluate(&DuplexAssignment::nafd(vec![true; 5])).unwrap();
        let best = exhaustive_mode_select(&p, 16).unwrap();
        assert!(best.feasible || !all_dl.feasible);
        if all_dl.feasible {
            assert!(best.ee >= all_dl.ee);
        }
    }
}

/// θ ∝ γ^-1 equalizes θ·γ across the UEs of an AP. Network-wide this
/// does not raise the weakest UE's SE: every AP then spends most of its
/// budget on UEs it barely reaches (see the measured comparison below).
#[test]
fn inverse_exponent_equalizes_per_ap_coherent_gain() {
    let (ls, g) = problem_parts(5, 41);
    let d = DuplexAssignment::full_duplex(5);
    let ch = common::channel_config(3, 3);
    let p = power_rule_fractional(&ls, &g, &d, -1.0, ch.rho_d, ch.rho_u).unwrap();
    for m in 0..5 {
        let x0 = p.theta[(m, 0)] * ls.gamma_dl[(m, 0)];
        for k in 1..3 {
            assert!(common::rel_eq(p.theta[(m, k)] * ls.gamma_dl[(m, k)], x0, 1e-12));
        }
    }
}

#[test]
fn inverse_exponent_lowers_min_dl_se_on_sampled_networks() {
    let ch = common::channel_config(4, 4);
    let mut worse = 0;
    for seed in 0..50 {
        let ls = common::random_model(16, 4, 4, 500.0, 500 + seed);
        let g = GroupingAssignment::from_large_scale(&ls, 50.0, 8).unwrap();
        let d = DuplexAssignment::half_duplex(16, 0.5);
        let min_se = |e: f64| {
            let p = power_rule_fractional(&ls, &g, &d, e, ch.rho_d, ch.rho_u).unwrap();
            evaluate(&ls, &g, &d, &p).unwrap().min_dl_se().unwrap()
        };
        if min_se(-1.0) < min_se(0.0) {
            worse += 1;
        }
    }
    assert!(worse >= 45, "exponent -1 lowered min SE on only {worse}/50 networks");
}

#[test]
fn nafd_without_dl_aps_pays_only_for_ues_and_fronthaul() {
    let params = PowerModelParams::default();
    let (ls, g) = problem_parts(4, 51);
    let d = DuplexAssignment::nafd(vec![false; 4]);
    let ch = common::channel_config(3, 3);
    let p = power_rule_fractional(&ls, &g, &d, 0.0, ch.rho_d, ch.rho_u).unwrap();
    let r = evaluate(&ls, &g, &d, &p).unwrap();
    let act = CfActivity::from_allocation(&ls, &g, &d, &p);
    let total = cf_total_power(&r, &d, &act, &params).unwrap();
    let ues = 3.0 * params.ue_power(1.0);
    let fh = 4.0 * (params.fh_fixed + params.fh_traffic * params.bandwidth * r.sum_se());
    assert!(common::rel_eq(total, ues + fh, 1e-12));
}

#[test]
fn nafd_consumes_less_than_full_duplex_on_the_default_network() {
    let params = PowerModelParams::default();
    let ch = common::channel_config(4, 4);
    let ls = common::random_model(40, 4, 4, 500.0, 61);
    let g = GroupingAssignment::from_large_scale(&ls, 50.0, 8).unwrap();
    let total = |d: DuplexAssignment| {
        let p = power_rule_fractional(&ls, &g, &d, 0.0, ch.rho_d, ch.rho_u).unwrap();
        let r = evaluate(&ls, &g, &d, &p).unwrap();
        cf_total_power(&r, &d, &CfActivity::from_allocation(&ls, &g, &d, &p), &params).unwrap()
    };
    let nafd = total(DuplexAssignment::nafd((0..40).map(|m| m % 2 == 0).collect()));
    let fd = total(DuplexAssignment::full_duplex(40));
    assert!(nafd < fd, "NAFD {nafd} W vs FD {fd} W");
}

#[test]
fn structure_mismatch_is_a_contract_error() {
    let params = PowerModelParams::default();
    let (ls, g) = problem_parts(3, 71);
    let fd = DuplexAssignment::full_duplex(3);
    let ch = common::channel_config(3, 3);
    let p = power_rule_fractional(&ls, &g, &fd, 0.0, ch.rho_d, ch.rho_u).unwrap();
    let r = evaluate(&ls, &g, &fd, &p).unwrap();
    let hd = DuplexAssignment::half_duplex(3, 0.5);
    let act = CfActivity::from_allocation(&ls, &g, &hd, &p);
    assert!(matches!(cf_total_power(&r, &hd, &act, &params), Err(cellfree::Error::Contract { .. })));
}
