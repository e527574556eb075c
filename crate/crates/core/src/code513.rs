//! The perfect five-qubit code: stabilizers, logical states, syndrome decoding,
//! encoding circuits (all-to-all and star layouts) and the measurement cycle.
//!
//! Code qubit `k` lives on network qubit `k`; on the star network the center
//! (qubit 6) is the measurement ancilla.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evolution::{project, reset_ancilla, outcome_probability, ProjectionMode, Projector, ReducedEvolution};
use crate::gates::{apply_ideal, Circuit, GateSpec, Layer};
use crate::sequences::Axis;

pub const N_DATA: usize = 5;
pub const CENTER: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn axis(self) -> Option<Axis> {
        match self {
            Pauli::I => None,
            Pauli::X => Some(Axis::X),
            Pauli::Y => Some(Axis::Y),
            Pauli::Z => Some(Axis::Z),
        }
    }

    fn from_axis(a: Axis) -> Self {
        match a {
            Axis::X => Pauli::X,
            Axis::Y => Pauli::Y,
            Axis::Z => Pauli::Z,
        }
    }

    /// `a·b = i^k c`.
    fn mul(a: Pauli, b: Pauli) -> (u8, Pauli) {
        use Pauli::*;
        match (a, b) {
            (I, p) | (p, I) => (0, p),
            (p, q) if p == q => (0, I),
            (X, Y) => (1, Z),
            (Y, Z) => (1, X),
            (Z, X) => (1, Y),
            (Y, X) => (3, Z),
            (Z, Y) => (3, X),
            (X, Z) => (3, Y),
            _ => unreachable!(),
        }
    }
}

/// `i^phase · P₁ ⊗ P₂ ⊗ …`, symbol `k-1` acting on qubit `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    pub phase: u8,
    pub symbols: Vec<Pauli>,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        Self { phase: 0, symbols: vec![Pauli::I; n] }
    }

    /// Single-qubit Pauli on qubit `q` of an `n`-qubit register.
    pub fn single(n: usize, q: usize, p: Pauli) -> Self {
        let mut s = Self::identity(n);
        s.symbols[q - 1] = p;
        s
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn weight(&self) -> usize {
        self.symbols.iter().filter(|&&p| p != Pauli::I).count()
    }

    pub fn negated(&self) -> Self {
        Self { phase: (self.phase + 2) % 4, symbols: self.symbols.clone() }
    }

    pub fn mul(&self, other: &PauliString) -> PauliString {
        assert_eq!(self.len(), other.len(), "Pauli strings of different length");
        let mut phase = self.phase + other.phase;
        let symbols = self
            .symbols
            .iter()
            .zip(&other.symbols)
            .map(|(&a, &b)| {
                let (k, c) = Pauli::mul(a, b);
                phase += k;
                c
            })
            .collect();
        PauliString { phase: phase % 4, symbols }
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        self.symbols
            .iter()
            .zip(&other.symbols)
            .filter(|(&a, &b)| a != Pauli::I && b != Pauli::I && a != b)
            .count()
            % 2
            == 0
    }

    /// Applies the operator to every column; symbol `k-1` acts on network qubit `k`.
    pub fn apply(&self, v: &mut ReducedEvolution) {
        for (k, p) in self.symbols.iter().enumerate() {
            if let Some(a) = p.axis() {
                v.apply_pauli(k + 1, a);
            }
        }
        if self.phase != 0 {
            let f = Complex64::i().powu(self.phase as u32);
            let data: Vec<Complex64> = v.data().iter().map(|c| c * f).collect();
            let mat = nalgebra::DMatrix::from_column_slice(v.dim(), v.m(), &data);
            let mut out = ReducedEvolution::from_matrix(v.n_qubits(), &mat).expect("shape preserved");
            out.t = v.t;
            out.norm_log = v.norm_log;
            *v = out;
        }
    }

    /// The single non-identity factor of a weight-1 string.
    pub fn as_single(&self) -> Option<(usize, Axis)> {
        if self.weight() != 1 {
            return None;
        }
        let k = self.symbols.iter().position(|&p| p != Pauli::I)?;
        Some((k + 1, self.symbols[k].axis()?))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(["", "i", "-", "-i"][self.phase as usize])?;
        for p in &self.symbols {
            write!(f, "{p:?}")?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (phase, body) = if let Some(r) = s.strip_prefix("-i") {
            (3, r)
        } else if let Some(r) = s.strip_prefix('-') {
            (2, r)
        } else if let Some(r) = s.strip_prefix('i') {
            (1, r)
        } else {
            (0, s.strip_prefix('+').unwrap_or(s))
        };
        let symbols = body
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::Parameter(format!("invalid Pauli symbol {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PauliString { phase, symbols })
    }
}

fn ps(s: &str) -> PauliString {
    s.parse().expect("valid literal")
}

pub fn generators() -> [PauliString; 4] {
    [ps("XZZXI"), ps("IXZZX"), ps("XIXZZ"), ps("ZXIXZ")]
}

pub fn logical_x() -> PauliString {
    ps("-XXXXX")
}

pub fn logical_z() -> PauliString {
    ps("ZZZZZ")
}

/// Bit `i` is set when `e` anticommutes with generator `i+1`.
pub fn syndrome_of(e: &PauliString) -> u8 {
    generators()
        .iter()
        .enumerate()
        .filter(|(_, g)| !g.commutes_with(e))
        .fold(0, |acc, (i, _)| acc | 1 << i)
}

/// Syndrome bits as `(G₁, G₂, G₃, G₄)`.
pub fn syndrome_bits(s: u8) -> [u8; 4] {
    [s & 1, s >> 1 & 1, s >> 2 & 1, s >> 3 & 1]
}

/// The fifteen weight-1 Paulis on the data qubits, ordered by qubit then X, Y, Z.
pub fn recovery_errors() -> Vec<PauliString> {
    let mut out = Vec::with_capacity(15);
    for q in 1..=N_DATA {
        for p in [Pauli::X, Pauli::Y, Pauli::Z] {
            out.push(PauliString::single(N_DATA, q, p));
        }
    }
    out
}

/// Lookup from a 4-bit syndrome to the single-qubit correction.
#[derive(Debug, Clone, PartialEq)]
pub struct SyndromeTable {
    entries: [Option<(usize, Axis)>; 16],
}

impl SyndromeTable {
    pub fn new() -> Result<Self> {
        Self::from_generators(&generators())
    }

    /// Brute-force table; fails unless the 15 weight-1 errors map one-to-one
    /// onto the 15 nonzero syndromes.
    pub fn from_generators(gens: &[PauliString]) -> Result<Self> {
        if gens.len() != 4 {
            return Err(Error::Construction(format!("need 4 generators, got {}", gens.len())));
        }
        let mut entries = [None; 16];
        for e in recovery_errors() {
            let s = gens.iter().enumerate().filter(|(_, g)| !g.commutes_with(&e)).fold(0usize, |a, (i, _)| a | 1 << i);
            if s == 0 {
                return Err(Error::Construction(format!("error {e} is undetectable")));
            }
            if let Some(prev) = entries[s] {
                return Err(Error::Construction(format!(
                    "errors {e} and {:?} share syndrome {:?}",
                    prev,
                    syndrome_bits(s as u8)
                )));
            }
            entries[s] = e.as_single();
        }
        Ok(Self { entries })
    }

    pub fn lookup(&self, syndrome: u8) -> Option<(usize, Axis)> {
        self.entries[syndrome as usize & 15]
    }

    /// Correction as a Pauli string (identity for the zero syndrome).
    pub fn correction(&self, syndrome: u8) -> PauliString {
        match self.lookup(syndrome) {
            Some((q, a)) => PauliString::single(N_DATA, q, Pauli::from_axis(a)),
            None => PauliString::identity(N_DATA),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Basis index of code qubits `bits[0..5]` (qubit k ↔ bit k-1).
fn index(bits: &str) -> usize {
    bits.bytes().enumerate().fold(0, |acc, (k, b)| acc | ((b - b'0') as usize) << k)
}

/// `|Ψ₀⟩, |Ψ₁⟩` on the five data qubits (32 amplitudes each).
pub fn logical_states() -> [Vec<Complex64>; 2] {
    let build = |m: u8| {
        let (ms, mb) = (if m == 0 { "0" } else { "1" }, if m == 0 { "1" } else { "0" });
        let s = if m == 0 { -1.0 } else { 1.0 };
        let mut v = vec![Complex64::new(0.0, 0.0); 32];
        let terms: [(&str, &str, f64); 16] = [
            ("0000", ms, 1.0),
            ("0110", ms, -1.0),
            ("1001", ms, 1.0),
            ("1111", ms, -1.0),
            ("0010", mb, 1.0),
            ("0100", mb, 1.0),
            ("1101", mb, -1.0),
            ("1011", mb, -1.0),
            ("0001", mb, s),
            ("1110", mb, s),
            ("0111", mb, s),
            ("1000", mb, s),
            ("0011", ms, s),
            ("0101", ms, -s),
            ("1010", ms, -s),
            ("1100", ms, s),
        ];
        for (x, last, c) in terms {
            v[index(&format!("{x}{last}"))] += c * 0.25;
        }
        v
    };
    [build(0), build(1)]
}

/// `|Ψ_m⟩` on the data qubits with every further qubit in `|0⟩`, as an
/// `2ⁿ × 2` block.
pub fn logical_block(n_qubits: usize) -> ReducedEvolution {
    assert!(n_qubits >= N_DATA);
    let dim = 1usize << n_qubits;
    let cols: Vec<Vec<Complex64>> = logical_states()
        .into_iter()
        .map(|s| {
            let mut c = vec![Complex64::new(0.0, 0.0); dim];
            c[..32].copy_from_slice(&s);
            c
        })
        .collect();
    ReducedEvolution::new(n_qubits, &cols).expect("orthonormal logical states")
}

/// Input block for encoding on the star: `|0⟩` leaves, center in `|0⟩` or `|1⟩`.
pub fn star_input_block() -> ReducedEvolution {
    ReducedEvolution::from_basis(CENTER, &[0, 1 << (CENTER - 1)]).expect("basis")
}

/// Encoder needing all-to-all couplings; the information starts on qubit 5.
pub fn conceptual_encoder(n_rep: usize) -> Circuit {
    let mut c = Circuit::new();
    c.push((1..=4).map(GateSpec::hadamard).collect());
    for q in [1, 3, 4] {
        c.gate(GateSpec::cz(q, 5, n_rep));
    }
    for q in 1..=4 {
        c.gate(GateSpec::cnot(q, 5, n_rep));
    }
    for (a, b) in [(2, 4), (3, 4), (3, 5)] {
        c.gate(GateSpec::cz(a, b, n_rep));
    }
    c.push([1, 3, 4].into_iter().map(|q| GateSpec::rot(q, Axis::Z, std::f64::consts::PI)).collect());
    c
}

/// Encoder on the star network. The information starts on the center; the
/// code ends up on leaves 1–5 with the center back in `|0⟩`.
pub fn star_encoder(n_rep: usize) -> Circuit {
    use std::f64::consts::PI;
    let c6 = CENTER;
    let mut c = Circuit::new();
    c.push([2, 3, 4, 5].into_iter().map(GateSpec::hadamard).collect());
    c.push([3, 4, 5].into_iter().map(|q| GateSpec::rot(q, Axis::Z, PI)).collect());
    for q in [4, 3, 5] {
        c.gate(GateSpec::cz(q, c6, n_rep));
    }
    for q in [4, 2, 3, 5] {
        c.gate(GateSpec::cnot(q, c6, n_rep));
    }
    c.gate(GateSpec::cz(3, c6, n_rep));
    c.gate(GateSpec::swap(c6, 5, n_rep));
    c.gate(GateSpec::cz(2, c6, n_rep));
    c.gate(GateSpec::cz(3, c6, n_rep));
    c.gate(GateSpec::swap(c6, 4, n_rep));
    c.gate(GateSpec::swap(c6, 1, n_rep));
    c
}

pub fn star_decoder(n_rep: usize) -> Circuit {
    star_encoder(n_rep).inverse()
}

/// One round of syndrome extraction for `G₁..G₄` through the center ancilla.
pub fn measurement_cycle(n_rep: usize) -> Circuit {
    let mut c = Circuit::new();
    for (i, g) in generators().iter().enumerate() {
        let x_support: Vec<usize> = (1..=N_DATA).filter(|&q| g.symbols[q - 1] == Pauli::X).collect();
        let support: Vec<usize> = (1..=N_DATA).filter(|&q| g.symbols[q - 1] != Pauli::I).collect();
        c.push(x_support.iter().map(|&q| GateSpec::hadamard(q)).collect());
        for &q in &support {
            c.gate(GateSpec::cnot(q, CENTER, n_rep));
        }
        c.push(x_support.iter().map(|&q| GateSpec::hadamard(q)).collect());
        c.measure(CENTER, Some(i));
    }
    c
}

/// Runs a circuit with ideal gates; every measurement must have a
/// deterministic outcome, which is recorded per label.
pub fn ideal_syndrome(v: &mut ReducedEvolution, cycle: &Circuit) -> Result<u8> {
    let mut s = 0u8;
    for layer in &cycle.layers {
        match layer {
            Layer::Gates(gs) => gs.iter().for_each(|g| apply_ideal(v, g)),
            Layer::Measure { qubit, label } => {
                let p1 = outcome_probability(v, Projector { qubit: *qubit, outcome: 1 });
                if p1 > 1e-9 && p1 < 1.0 - 1e-9 {
                    return Err(Error::Usage(format!("non-deterministic outcome (p₁ = {p1}) on qubit {qubit}")));
                }
                let outcome = u8::from(p1 > 0.5);
                project(v, Projector { qubit: *qubit, outcome }, ProjectionMode::Renormalize)?;
                reset_ancilla(v, *qubit)?;
                if let Some(l) = label {
                    s |= outcome << l;
                }
            }
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::fidelity;
    use crate::gates::apply_ideal_circuit;

    #[test]
    fn pauli_algebra() {
        let gs = generators();
        for a in &gs {
            for b in &gs {
                assert!(a.commutes_with(b));
            }
            assert!(a.commutes_with(&logical_x()) && a.commutes_with(&logical_z()));
        }
        assert!(!logical_x().commutes_with(&logical_z()));
        let prod = gs[0].mul(&gs[1]).mul(&gs[2]).mul(&gs[3]);
        assert_eq!(prod.weight(), 4);
        assert_eq!(ps("X").mul(&ps("Y")), ps("iZ"));
        assert_eq!(ps("-iXY").to_string(), "-iXY");
        for e in recovery_errors() {
            assert_eq!(e.mul(&e), PauliString::identity(5));
        }
        assert!("XQ".parse::<PauliString>().is_err());
    }

    #[test]
    fn table_is_bijective() {
        let t = SyndromeTable::new().unwrap();
        assert_eq!(t.len(), 15);
        assert_eq!(t.lookup(0), None);
        assert_eq!(syndrome_bits(syndrome_of(&ps("ZIIII"))), [1, 0, 1, 0]);
        assert_eq!(t.lookup(syndrome_of(&ps("ZIIII"))), Some((1, Axis::Z)));
        let mut bad = generators();
        bad[3] = ps("XZZXI");
        assert!(SyndromeTable::from_generators(&bad).is_err());
    }

    #[test]
    fn logical_states_are_stabilized() {
        let v = logical_block(5);
        for g in generators() {
            let mut w = v.clone();
            g.apply(&mut w);
            assert!(w.data().iter().zip(v.data()).all(|(a, b)| (a - b).norm() < 1e-12), "{g}");
        }
        let mut z = v.clone();
        logical_z().apply(&mut z);
        assert!((z.column(0)[0] - v.column(0)[0]).norm() < 1e-15);
        assert!(z.column(1).iter().zip(v.column(1)).all(|(a, b)| (a + b).norm() < 1e-12));
        let mut x = v.clone();
        logical_x().apply(&mut x);
        assert!(x.column(0).iter().zip(v.column(1)).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn encoders_reproduce_logical_states() {
        let target = logical_block(5);
        let mut v = ReducedEvolution::from_basis(5, &[0, 16]).unwrap();
        apply_ideal_circuit(&mut v, &conceptual_encoder(5));
        assert!(1.0 - fidelity(&v, &target) < 1e-12);
        // per-column overlap, not only the block fidelity
        for m in 0..2 {
            let o: Complex64 = v.column(m).iter().zip(target.column(m)).map(|(a, b)| a.conj() * b).sum();
            assert!(o.norm() > 1.0 - 1e-12);
        }

        let target = logical_block(6);
        let mut v = star_input_block();
        apply_ideal_circuit(&mut v, &star_encoder(5));
        let o: Vec<Complex64> =
            (0..2).map(|m| v.column(m).iter().zip(target.column(m)).map(|(a, b)| a.conj() * b).sum()).collect();
        assert!(o.iter().all(|x| x.norm() > 1.0 - 1e-10));
        assert!((o[0] - o[1]).norm() < 1e-10, "relative phase between logical states");
        apply_ideal_circuit(&mut v, &star_decoder(5));
        assert!(1.0 - fidelity(&v, &star_input_block()) < 1e-12);
    }

    #[test]
    fn star_circuits_respect_adjacency() {
        for c in [star_encoder(5), star_decoder(5), measurement_cycle(5)] {
            for g in c.gates().filter(|g| g.is_two_qubit()) {
                assert!(g.operands.contains(&CENTER) && g.operands.iter().any(|&q| q <= N_DATA));
            }
        }
        let cyc = measurement_cycle(5);
        assert_eq!(cyc.duration(), 2560);
        let text = cyc.to_text();
        assert_eq!(Circuit::parse(&text, 5).unwrap(), cyc);
        assert_eq!(star_decoder(5).duration(), star_encoder(5).duration());
    }

    #[test]
    fn syndrome_extraction_and_correction() {
        let table = SyndromeTable::new().unwrap();
        let cycle = measurement_cycle(5);
        let mut clean = logical_block(6);
        assert_eq!(ideal_syndrome(&mut clean, &cycle).unwrap(), 0);
        for e in recovery_errors() {
            let mut v = logical_block(6);
            e.apply(&mut v);
            let s = ideal_syndrome(&mut v, &cycle).unwrap();
            assert_eq!(s, syndrome_of(&e), "{e}");
            table.correction(s).apply(&mut v);
            assert!(1.0 - fidelity(&v, &logical_block(6)) < 1e-12, "{e}");
        }
    }
}
