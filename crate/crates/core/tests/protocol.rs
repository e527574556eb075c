use nalgebra::DMatrix;
use num_complex::Complex64;
use softqec::code513::{logical_block, recovery_errors};
use softqec::evolution::ReducedEvolution;
use softqec::protocol::*;
use softqec::sequences::Axis;

fn quick(mode: Mode, noise: Vec<NoiseComponent>, n_cycles: usize, seed: u64) -> RunConfig {
    let mut c = RunConfig::new(mode, noise, n_cycles, seed);
    c.steps_per_tau_p = 32;
    c
}

fn noisy() -> Vec<NoiseComponent> {
    vec![NoiseComponent { sigma: 50e-3, tau_n: 32.0 }]
}

fn dense_fidelity(v: &DMatrix<Complex64>, v0: &DMatrix<Complex64>) -> f64 {
    let m = v.ncols() as f64;
    let a = v0.adjoint() * v;
    ((&a * a.adjoint()).trace().re + a.trace().norm_sqr()) / (m * (m + 1.0))
}

#[test]
fn fidelity_formula() {
    let v0 = logical_block(6);
    assert!((fidelity(&v0, &v0) - 1.0).abs() < 1e-14);
    let rotated = ReducedEvolution::from_matrix(6, &(v0.to_matrix() * Complex64::from_polar(1.0, 0.7))).unwrap();
    assert!((fidelity(&rotated, &v0) - 1.0).abs() < 1e-14);
    let mut flipped = v0.clone();
    flipped.apply_pauli(2, Axis::X);
    let dense = dense_fidelity(&flipped.to_matrix(), &v0.to_matrix());
    assert!((fidelity(&flipped, &v0) - dense).abs() < 1e-14);
    // X on one data qubit leaves the code space: only the Frobenius part can survive
    assert!(fidelity(&flipped, &v0) < 1e-12);
}

#[test]
fn recovery_fidelity_bounds() {
    let v0 = logical_block(6);
    let f = recovery_fidelity(&v0, &v0);
    assert!(f >= fidelity(&v0, &v0));
    assert!((f - 1.0).abs() < 1e-12, "single-qubit errors map the code space to orthogonal spaces: {f}");
    for e in recovery_errors() {
        let mut v = v0.clone();
        e.apply(&mut v);
        assert!(recovery_fidelity(&v, &v0) >= 1.0 - 1e-12);
        assert!(fidelity(&v, &v0) < 1e-12);
    }
}

#[test]
fn noiseless_runs_stay_clean() {
    let cfg = quick(Mode::Zeno, vec![], 1, 3);
    let z = run_zeno(&cfg).unwrap();
    for r in &z.records {
        assert!(r.sp >= 1.0 - 1e-4 && r.f_succ >= 1.0 - 1e-4, "{r:?}");
    }
    assert!(z.final_metrics.f_succ >= 1.0 - 1e-4);
    let q = run_qec(&RunConfig { mode: Mode::Qec, ..cfg.clone() }).unwrap();
    assert!(q.records.iter().all(|r| r.outcome == Some(0) && !r.trigger && 1.0 - r.p0 <= 1e-4));
    assert!(q.final_metrics.f_full >= 1.0 - 1e-4);
    assert!(run_qec(&cfg).is_err());
}

#[test]
fn injected_fault_is_corrected() {
    let mut cfg = quick(Mode::Qec, vec![], 2, 5);
    let setup = Setup::for_config(&cfg).unwrap();
    let fault_slot = 2784 + 700;
    cfg.faults = vec![Fault { slot: fault_slot, qubit: 3, axis: Axis::X }];
    let noise = setup.noise_trace(&cfg, 0).unwrap();
    let tr = simulate(&setup, &cfg, Mode::Qec, &noise, 0).unwrap();
    let after: Vec<&Record> = tr.records.iter().filter(|r| r.t > fault_slot as f64).collect();
    let first_trigger = after.iter().position(|r| r.trigger).expect("trigger fired");
    assert!(first_trigger < 4);
    let fix = after.iter().position(|r| r.correction.is_some()).unwrap();
    assert_eq!(after[fix].correction, Some(0b0011), "X on qubit 3 flips G1 and G2");
    let next = after.get(fix + 1).expect("record after the correction");
    assert!(next.f_b > 1.0 - 1e-3, "{}", next.f_b);
    assert!(tr.final_metrics.f_full > 1.0 - 1e-3);
}

#[test]
fn noisy_qec_invariants() {
    let cfg = quick(Mode::Qec, vec![NoiseComponent { sigma: 0.3, tau_n: 16.0 }], 2, 11);
    let setup = Setup::for_config(&cfg).unwrap();
    let mut windows = 0;
    for r in 0..3 {
        let res = run_realization(&setup, &cfg, r).unwrap();
        let tr = &res.main;
        assert!(tr.records.windows(2).all(|w| w[1].t > w[0].t));
        for rec in &tr.records {
            assert!(rec.fp_b >= rec.f_b - 1e-12 && rec.fp_a >= rec.f_a - 1e-12);
            assert!((0.0..=1.0 + 1e-12).contains(&rec.p0));
        }
        // every window: trigger, then three more generators, all distinct
        let mut i = 0;
        while i < tr.records.len() {
            if tr.records[i].trigger {
                let w = &tr.records[i..];
                if w.len() < 4 {
                    assert!(w.iter().all(|x| x.trigger && x.correction.is_none()), "open window at the end");
                    break;
                }
                let mut gens: Vec<usize> = w[..4].iter().map(|x| x.generator.unwrap()).collect();
                gens.sort();
                assert_eq!(gens, vec![0, 1, 2, 3]);
                assert!(w[..3].iter().all(|x| x.correction.is_none()));
                assert!(w[..4].iter().all(|x| x.trigger));
                assert!(w[3].correction.is_some());
                windows += 1;
                i += 4;
            } else {
                assert!(tr.records[i].correction.is_none());
                i += 1;
            }
        }
        let dd = res.dd_only.unwrap();
        assert!(dd.records.iter().all(|x| x.outcome.is_none() && (x.f_a - x.f_b).abs() < 1e-15));
    }
    assert!(windows > 0, "expected at least one trigger at this noise level");
}

#[test]
fn zeno_success_probability_decreases() {
    let cfg = quick(Mode::Zeno, noisy(), 1, 2);
    let setup = Setup::for_config(&cfg).unwrap();
    let res = run_realization(&setup, &cfg, 0).unwrap();
    let sp: Vec<f64> = res.main.records.iter().map(|r| r.sp).collect();
    assert!(sp.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{sp:?}");
    assert!(sp[0] < 1.0 && sp[0] > 0.5);
    let free = res.free.unwrap();
    let dd = res.dd_only.unwrap();
    // without any control the coupling alone scrambles the code
    assert!(free.final_metrics.f_full < dd.final_metrics.f_full);
}

#[test]
fn companions_share_noise_and_agree_without_projections() {
    let zc = quick(Mode::Zeno, noisy(), 1, 9);
    let qc = RunConfig { mode: Mode::Qec, ..zc.clone() };
    let setup = Setup::for_config(&zc).unwrap();
    let a = run_realization(&setup, &zc, 0).unwrap().dd_only.unwrap();
    let b = run_realization(&setup, &qc, 0).unwrap().dd_only.unwrap();
    for (x, y) in a.records.iter().zip(&b.records) {
        assert!((x.f_b - y.f_b).abs() < 1e-12 && (x.fp_a - y.fp_a).abs() < 1e-12);
    }
}

#[test]
fn seeding_is_deterministic() {
    let cfg = quick(Mode::Qec, noisy(), 1, 21);
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a, b);
    let c = run(&RunConfig { seed: 22, ..cfg }).unwrap();
    assert_ne!(a.records[0].f_b, c.records[0].f_b);
}

#[test]
fn ensemble_of_one_and_csv() {
    let cfg = quick(Mode::Qec, noisy(), 1, 4);
    let e = run_ensemble(&cfg, 1, false).unwrap();
    let single = run(&cfg).unwrap();
    assert_eq!(e.realizations[0].main, single);
    for (s, r) in e.main.f_b.iter().zip(&single.records) {
        assert_eq!(s.mean, r.f_b);
        assert_eq!(s.count, 1);
    }
    let mut buf = Vec::new();
    e.write_records_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("realization,t/tau_p,kind,generator,F_b,F_a,Fp_b,Fp_a,p0,outcome,sp,f_succ,trigger"));
    assert_eq!(text.lines().count(), 1 + 2 * single.records.len());
    let mut buf = Vec::new();
    e.write_summary_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.lines().any(|l| l.starts_with("qec,final,")));
    assert!(text.lines().any(|l| l.starts_with("dd_only,final,")));
}

#[test]
fn averages_ignore_realization_order() {
    let cfg = quick(Mode::Qec, noisy(), 1, 8);
    let setup = Setup::for_config(&cfg).unwrap();
    let rs: Vec<_> = (0..3).map(|r| run_realization(&setup, &cfg, r).unwrap()).collect();
    let mut rev = rs.clone();
    rev.reverse();
    let a = summarize(cfg.clone(), rs, true).unwrap();
    let b = summarize(cfg, rev, true).unwrap();
    for (x, y) in a.main.fp_a.iter().zip(&b.main.fp_a) {
        assert_eq!(x.count, y.count);
        assert!(x.count == 0 || (x.mean - y.mean).abs() < 1e-14, "{x:?} {y:?}");
    }
}
