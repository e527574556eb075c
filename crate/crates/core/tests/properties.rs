use std::f64::consts::PI;

use proptest::prelude::*;
use softqec::code513::{syndrome_of, Pauli, PauliString};
use softqec::evolution::{fidelity, ReducedEvolution};
use softqec::gates::{apply_ideal_circuit, Circuit, GateSpec};
use softqec::sequences::Axis;

fn pauli() -> impl Strategy<Value = Pauli> {
    prop_oneof![Just(Pauli::I), Just(Pauli::X), Just(Pauli::Y), Just(Pauli::Z)]
}

fn pauli_string() -> impl Strategy<Value = PauliString> {
    (0u8..4, prop::collection::vec(pauli(), 5)).prop_map(|(phase, symbols)| PauliString { phase, symbols })
}

fn axis() -> impl Strategy<Value = Axis> {
    prop_oneof![Just(Axis::X), Just(Axis::Y), Just(Axis::Z)]
}

/// Layers of single-qubit rotations, or a CNOT/CZ/CY between the center and a leaf.
fn circuit() -> impl Strategy<Value = Circuit> {
    let rot_layer = prop::collection::btree_map(1usize..=6, (axis(), -8i32..=8), 1..4).prop_map(|m| {
        m.into_iter()
            .filter(|(_, (_, k))| *k != 0)
            .map(|(q, (a, k))| GateSpec::rot(q, a, k as f64 * PI / 8.0))
            .collect::<Vec<_>>()
    });
    let two = (0usize..3, 1usize..=5, any::<bool>()).prop_map(|(kind, leaf, flip)| {
        let (a, b) = if flip { (leaf, 6) } else { (6, leaf) };
        vec![match kind {
            0 => GateSpec::cnot(a, b, 5),
            1 => GateSpec::cz(a, b, 5),
            _ => GateSpec::cy(a, b, 5),
        }]
    });
    prop::collection::vec(prop_oneof![rot_layer, two], 1..6).prop_map(|layers| {
        let mut c = Circuit::new();
        for l in layers.into_iter().filter(|l| !l.is_empty()) {
            c.push(l);
        }
        c
    })
}

proptest! {
    #[test]
    fn pauli_product_is_associative(a in pauli_string(), b in pauli_string(), c in pauli_string()) {
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
    }

    #[test]
    fn commutation_matches_products(a in pauli_string(), b in pauli_string()) {
        let ab = a.mul(&b);
        let ba = b.mul(&a);
        prop_assert_eq!(a.commutes_with(&b), ab == ba);
        if !a.commutes_with(&b) {
            prop_assert_eq!(ab, ba.negated());
        }
    }

    #[test]
    fn syndrome_is_linear(a in pauli_string(), b in pauli_string()) {
        prop_assert_eq!(syndrome_of(&a.mul(&b)), syndrome_of(&a) ^ syndrome_of(&b));
    }

    #[test]
    fn pauli_text_round_trip(a in pauli_string()) {
        prop_assert_eq!(a.to_string().parse::<PauliString>().unwrap(), a);
    }

    #[test]
    fn circuit_text_round_trip(c in circuit()) {
        prop_assert_eq!(Circuit::parse(&c.to_text(), 5).unwrap(), c);
    }

    #[test]
    fn circuit_then_inverse_is_identity(c in circuit()) {
        let start = ReducedEvolution::from_basis(6, &[0, 5, 42, 63]).unwrap();
        let mut v = start.clone();
        apply_ideal_circuit(&mut v, &c);
        apply_ideal_circuit(&mut v, &c.inverse());
        prop_assert!(1.0 - fidelity(&v, &start) < 1e-12);
    }
}
