use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use softqec::evolution::{fidelity, single_qubit_fidelity, Frame, Propagator, ReducedEvolution};
use softqec::gates::{apply_ideal_circuit, compile, gate_unitary, Circuit, CompileOptions, GateSpec};
use softqec::network::{design_coupling, hamiltonian_apply, star_graph, HamiltonianContext, QubitGraph};
use softqec::noise::{sample_trace, NoiseSpec, NoiseTrace};
use softqec::sequences::{Axis, PulsePlacement, PulseRole, PulseSchedule, ZMode};
use softqec::shapes::{PulseShape, ShapeLibrary};

fn full_basis(n: usize) -> ReducedEvolution {
    ReducedEvolution::from_basis(n, &(0..1 << n).collect::<Vec<_>>()).unwrap()
}

fn evolve(g: &QubitGraph, s: &PulseSchedule, noise: Option<&NoiseTrace>, steps: usize, frame: Frame) -> ReducedEvolution {
    let mut v = full_basis(g.n_qubits());
    Propagator::new(g, s, noise, steps, frame).unwrap().advance_to(&mut v, s.total_duration()).unwrap();
    v
}

fn gate_error(c: &Circuit, g: &QubitGraph, steps: usize) -> f64 {
    let s = compile(c, g, ShapeLibrary::standard(), CompileOptions::default()).unwrap();
    let v = evolve(g, &s, None, steps, Frame::Interaction);
    let mut ideal = full_basis(g.n_qubits());
    apply_ideal_circuit(&mut ideal, c);
    1.0 - fidelity(&v, &ideal)
}

fn max_diff(a: &ReducedEvolution, b: &ReducedEvolution) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn idle(slots: usize) -> PulseSchedule {
    PulseSchedule { total_slots: slots, ..PulseSchedule::empty("idle") }
}

#[test]
fn zero_hamiltonian_leaves_block_unchanged() {
    let g = QubitGraph::new(2, &[]).unwrap();
    let s = idle(3);
    for frame in [Frame::Interaction, Frame::Lab] {
        let v = evolve(&g, &s, None, 16, frame);
        assert!(max_diff(&v, &full_basis(2)) < 1e-15);
        assert_eq!(v.t, 3.0);
    }
}

#[test]
fn constant_drive_rotates_exactly() {
    let g = QubitGraph::new(1, &[]).unwrap();
    let theta = 1.3;
    let mut s = idle(2);
    s.placements.push(PulsePlacement {
        qubit: 1,
        axis: Axis::X,
        shape: Arc::new(PulseShape::rectangular(theta)),
        sign: 1,
        start: 0,
        role: PulseRole::Rotation,
    });
    for frame in [Frame::Interaction, Frame::Lab] {
        for (t, angle) in [(0.5, theta / 2.0), (1.0, theta), (2.0, theta)] {
            let mut v = full_basis(1);
            Propagator::new(&g, &s, None, 64, frame).unwrap().advance_to(&mut v, t).unwrap();
            let mut exact = full_basis(1);
            exact.apply_rotation(1, Axis::X, angle);
            assert!(max_diff(&v, &exact) < 1e-10, "{frame:?} t={t}: {}", max_diff(&v, &exact));
        }
    }
}

#[test]
fn free_ising_pair_matches_closed_form() {
    let j = 0.3;
    let g = QubitGraph::new(2, &[(1, 2, j)]).unwrap();
    let t = 4.0;
    for frame in [Frame::Interaction, Frame::Lab] {
        let v = evolve(&g, &idle(4), None, 64, frame);
        for b in 0..4usize {
            let zz = if (b & 1) ^ (b >> 1) == 0 { 1.0 } else { -1.0 };
            let want = Complex64::from_polar(1.0, -0.5 * j * zz * t);
            assert!((v.column(b)[b] - want).norm() < 1e-10, "{frame:?}");
        }
    }
}

#[test]
fn hamiltonian_is_hermitian_and_matches_dense_oracle() {
    let g = star_graph(2, 0.7).unwrap();
    let mut s = idle(2);
    s.placements.push(PulsePlacement {
        qubit: 3,
        axis: Axis::Y,
        shape: Arc::new(PulseShape::rectangular(0.9)),
        sign: -1,
        start: 0,
        role: PulseRole::Rotation,
    });
    let noise = NoiseTrace::from_samples(0.5, vec![vec![0.2; 5], vec![-0.1; 5], vec![0.05; 5]]).unwrap();
    let ctx = HamiltonianContext::new(&g, Some(&noise), &s).unwrap();
    let id: Vec<Complex64> = DMatrix::<Complex64>::identity(8, 8).iter().copied().collect();
    let h = DMatrix::from_column_slice(8, 8, &hamiltonian_apply(&ctx, 0.5, &id).unwrap());
    assert!((&h - h.adjoint()).norm() < 1e-15);
    // dense oracle: ½[J(z1z3 + z2z3) + Σ A_q z_q − 0.9 σʸ_3]
    let z = |b: usize, q: usize| if b >> (q - 1) & 1 == 0 { 1.0 } else { -1.0 };
    let y3 = gate_unitary(&GateSpec::rot(3, Axis::Y, PI), 3) * Complex64::new(0.0, 1.0);
    let mut want = y3 * Complex64::new(-0.45, 0.0);
    for b in 0..8 {
        want[(b, b)] += 0.5 * (0.7 * (z(b, 1) * z(b, 3) + z(b, 2) * z(b, 3)) + 0.2 * z(b, 1) - 0.1 * z(b, 2) + 0.05 * z(b, 3));
    }
    let err = (&h - &want).norm();
    assert!(err < 1e-14, "{err}");
}

#[test]
fn frames_agree_on_noisy_cnot() {
    let g = star_graph(2, design_coupling(5)).unwrap();
    let c = Circuit::parse("cnot(1,3)", 5).unwrap();
    let s = compile(&c, &g, ShapeLibrary::standard(), CompileOptions::default()).unwrap();
    let spec = NoiseSpec::new(20e-3, 32.0, 7).unwrap();
    let noise = sample_trace(&spec, 3, s.total_duration(), spec.default_dt()).unwrap();
    let a = evolve(&g, &s, Some(&noise), 256, Frame::Interaction);
    let b = evolve(&g, &s, Some(&noise), 1024, Frame::Lab);
    assert!(max_diff(&a, &b) < 1e-7, "{}", max_diff(&a, &b));
}

#[test]
fn step_halving_converges() {
    let g = star_graph(2, design_coupling(5)).unwrap();
    let c = Circuit::parse("h(1) | h(2)\ncnot(1,3)\nrot(3,z,pi/2)", 5).unwrap();
    let s = compile(&c, &g, ShapeLibrary::standard(), CompileOptions::default()).unwrap();
    let spec = NoiseSpec::new(50e-3, 32.0, 11).unwrap();
    let noise = sample_trace(&spec, 3, s.total_duration(), spec.default_dt()).unwrap();
    let a = evolve(&g, &s, Some(&noise), 512, Frame::Interaction);
    let b = evolve(&g, &s, Some(&noise), 1024, Frame::Interaction);
    assert!(max_diff(&a, &b) < 1e-9, "{}", max_diff(&a, &b));
}

#[test]
fn noiseless_gates_on_star_network() {
    let g = star_graph(5, design_coupling(5)).unwrap();
    for text in ["rot(1,x,pi)", "rot(6,y,pi/2)", "rot(2,z,-pi/2)", "h(3) | h(4)"] {
        let err = gate_error(&Circuit::parse(text, 5).unwrap(), &g, 256);
        assert!(err < 1e-6, "{text}: {err:e}");
    }
    for text in ["cnot(2,6)", "cz(1,6)", "cy(6,4)"] {
        let err = gate_error(&Circuit::parse(text, 5).unwrap(), &g, 256);
        assert!(err < 1e-5, "{text}: {err:e}");
    }
}

#[test]
fn frame_z_mode_matches_pulsed_z() {
    let g = star_graph(5, design_coupling(5)).unwrap();
    let c = Circuit::parse("rot(3,z,pi/2) | rot(5,z,pi)", 5).unwrap();
    let s = compile(&c, &g, ShapeLibrary::standard(), CompileOptions { z_mode: ZMode::Frame }).unwrap();
    let v = evolve(&g, &s, None, 128, Frame::Interaction);
    let mut ideal = full_basis(6);
    apply_ideal_circuit(&mut ideal, &c);
    assert!(1.0 - fidelity(&v, &ideal) < 1e-6);
}

#[test]
fn single_qubit_fidelity_of_isolated_rotation() {
    let g = star_graph(5, design_coupling(5)).unwrap();
    let c = Circuit::parse("rot(6,x,pi/2)", 5).unwrap();
    let s = compile(&c, &g, ShapeLibrary::standard(), CompileOptions::default()).unwrap();
    let spec = NoiseSpec::new(20e-3, 32.0, 3).unwrap();
    let noise = sample_trace(&spec, 6, s.total_duration(), spec.default_dt()).unwrap();
    let mut v = ReducedEvolution::from_basis(6, &[0, 32]).unwrap();
    Propagator::new(&g, &s, Some(&noise), 256, Frame::Interaction).unwrap().advance_to(&mut v, 16.0).unwrap();
    let mut ideal = ReducedEvolution::from_basis(6, &[0, 32]).unwrap();
    ideal.apply_rotation(6, Axis::X, FRAC_PI_2);
    let f = single_qubit_fidelity(&v, &ideal, 6);
    assert!(f > 0.999 && f <= 1.0 + 1e-12, "{f}");
}
