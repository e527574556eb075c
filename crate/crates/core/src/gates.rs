//! Gate set built from decoupling sequences, circuits and their compilation
//! into a single pulse schedule.
//!
//! Two-qubit gates are dressed ZZ rotations. With `R_μ(θ) = exp(-iθσ^μ/2)` and
//! `ZZ = exp(-iπ/4 σᶻ_jσᶻ_k)` (operators act right to left):
//!
//! * CNOT(j→k) ∝ `R_z,j(π/2) R_x,k(π/2) R_y,k(-π/2) ZZ R_y,k(π/2)`
//! * CZ(j,k)   ∝ `R_z,j(-π/2) R_z,k(-π/2) ZZ`
//! * CY(j→k)   ∝ `R_x,k(-π/2) R_z,j(-π/2) R_z,k(-π/2) ZZ R_x,k(π/2)`
//!
//! Each dressing occupies one 16τ_p single-qubit window (neighbors cannot
//! rotate together), so every controlled gate lasts `(64 + 16 n_rep) τ_p`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evolution::ReducedEvolution;
use crate::network::{design_coupling, QubitGraph};
use crate::sequences::{
    build_single_qubit_gate, build_zz_sequence, Axis, Marker, PulseSchedule, Rotation, ZMode, WINDOW_SLOTS,
};
use crate::shapes::ShapeLibrary;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateKind {
    Rot { axis: Axis, angle: f64 },
    Hadamard,
    Cnot,
    Cy,
    Cz,
    Swap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateSpec {
    pub kind: GateKind,
    pub operands: Vec<usize>,
    /// Repetitions of the ZZ sequence in two-qubit gates.
    pub n_rep: usize,
}

impl GateSpec {
    pub fn rot(q: usize, axis: Axis, angle: f64) -> Self {
        Self { kind: GateKind::Rot { axis, angle }, operands: vec![q], n_rep: 0 }
    }

    pub fn hadamard(q: usize) -> Self {
        Self { kind: GateKind::Hadamard, operands: vec![q], n_rep: 0 }
    }

    pub fn cnot(control: usize, target: usize, n_rep: usize) -> Self {
        Self { kind: GateKind::Cnot, operands: vec![control, target], n_rep }
    }

    pub fn cy(control: usize, target: usize, n_rep: usize) -> Self {
        Self { kind: GateKind::Cy, operands: vec![control, target], n_rep }
    }

    pub fn cz(a: usize, b: usize, n_rep: usize) -> Self {
        Self { kind: GateKind::Cz, operands: vec![a, b], n_rep }
    }

    pub fn swap(a: usize, b: usize, n_rep: usize) -> Self {
        Self { kind: GateKind::Swap, operands: vec![a, b], n_rep }
    }

    pub fn is_two_qubit(&self) -> bool {
        !matches!(self.kind, GateKind::Rot { .. } | GateKind::Hadamard)
    }

    /// Duration in units of τ_p.
    pub fn duration(&self) -> usize {
        let controlled = 4 * WINDOW_SLOTS + WINDOW_SLOTS * self.n_rep;
        match self.kind {
            GateKind::Rot { .. } => WINDOW_SLOTS,
            GateKind::Hadamard => 2 * WINDOW_SLOTS,
            GateKind::Cnot | GateKind::Cy | GateKind::Cz => controlled,
            GateKind::Swap => 3 * controlled,
        }
    }

    pub fn inverse(&self) -> Self {
        match self.kind {
            GateKind::Rot { axis, angle } => Self { kind: GateKind::Rot { axis, angle: -angle }, ..self.clone() },
            _ => self.clone(),
        }
    }

    /// Rotation windows of a single-qubit gate, in time order.
    fn rotations(&self) -> Vec<Rotation> {
        let q = self.operands[0];
        match self.kind {
            GateKind::Rot { axis, angle } => vec![Rotation::new(q, axis, angle)],
            // R_x(π) after R_y(π/2) equals H up to a global phase
            GateKind::Hadamard => vec![Rotation::new(q, Axis::Y, FRAC_PI_2), Rotation::new(q, Axis::X, PI)],
            _ => Vec::new(),
        }
    }

    /// Controlled-gate units (one per ZZ core) for two-qubit gates.
    fn units(&self) -> Vec<Unit> {
        let (j, k) = (self.operands[0], self.operands[1]);
        match self.kind {
            GateKind::Cnot => vec![Unit::cnot(j, k)],
            GateKind::Cz => vec![Unit {
                pair: Some((j, k)),
                windows: [vec![], vec![Rotation::new(j, Axis::Z, -FRAC_PI_2)], vec![Rotation::new(k, Axis::Z, -FRAC_PI_2)], vec![]],
            }],
            GateKind::Cy => vec![Unit {
                pair: Some((j, k)),
                windows: [
                    vec![Rotation::new(k, Axis::X, FRAC_PI_2)],
                    vec![Rotation::new(k, Axis::Z, -FRAC_PI_2)],
                    vec![Rotation::new(j, Axis::Z, -FRAC_PI_2)],
                    vec![Rotation::new(k, Axis::X, -FRAC_PI_2)],
                ],
            }],
            GateKind::Swap => vec![Unit::cnot(j, k), Unit::cnot(k, j), Unit::cnot(j, k)],
            _ => Vec::new(),
        }
    }

    fn check(&self, graph: &QubitGraph) -> Result<()> {
        let want = if self.is_two_qubit() { 2 } else { 1 };
        if self.operands.len() != want {
            return Err(Error::Compile(format!("{self} needs {want} operand(s)")));
        }
        if let Some(q) = self.operands.iter().find(|&&q| !graph.contains(q)) {
            return Err(Error::Compile(format!("{self}: qubit {q} not in graph")));
        }
        if self.is_two_qubit() {
            let (a, b) = (self.operands[0], self.operands[1]);
            if !graph.are_adjacent(a, b) {
                return Err(Error::Compile(format!("{self}: qubits {a} and {b} are not coupled")));
            }
            if self.n_rep == 0 {
                return Err(Error::Compile(format!("{self}: n_rep must be positive")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for GateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ops = |f: &mut fmt::Formatter<'_>, name: &str| write!(f, "{name}({},{})", self.operands[0], self.operands[1]);
        match self.kind {
            GateKind::Rot { axis, angle } => write!(f, "rot({},{axis},{})", self.operands[0], format_angle(angle)),
            GateKind::Hadamard => write!(f, "h({})", self.operands[0]),
            GateKind::Cnot => ops(f, "cnot"),
            GateKind::Cy => ops(f, "cy"),
            GateKind::Cz => ops(f, "cz"),
            GateKind::Swap => ops(f, "swap"),
        }
    }
}

/// W0, then the ZZ core, then W1..W3.
#[derive(Debug, Clone)]
struct Unit {
    pair: Option<(usize, usize)>,
    windows: [Vec<Rotation>; 4],
}

impl Unit {
    fn cnot(j: usize, k: usize) -> Self {
        Unit {
            pair: Some((j, k)),
            windows: [
                vec![Rotation::new(k, Axis::Y, FRAC_PI_2)],
                vec![Rotation::new(k, Axis::Y, -FRAC_PI_2)],
                vec![Rotation::new(k, Axis::X, FRAC_PI_2)],
                vec![Rotation::new(j, Axis::Z, FRAC_PI_2)],
            ],
        }
    }

    fn idle() -> Self {
        Unit { pair: None, windows: Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Gates(Vec<GateSpec>),
    /// Projective measurement of `qubit` in the z basis followed by reset to `|0⟩`.
    Measure { qubit: usize, label: Option<usize> },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    pub layers: Vec<Layer>,
}

impl Circuit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, gates: Vec<GateSpec>) -> &mut Self {
        self.layers.push(Layer::Gates(gates));
        self
    }

    pub fn gate(&mut self, g: GateSpec) -> &mut Self {
        self.push(vec![g])
    }

    pub fn measure(&mut self, qubit: usize, label: Option<usize>) -> &mut Self {
        self.layers.push(Layer::Measure { qubit, label });
        self
    }

    pub fn extend(&mut self, other: &Circuit) -> &mut Self {
        self.layers.extend(other.layers.iter().cloned());
        self
    }

    /// Layer-reversed circuit with every gate inverted.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            layers: self
                .layers
                .iter()
                .rev()
                .map(|l| match l {
                    Layer::Gates(g) => Layer::Gates(g.iter().map(GateSpec::inverse).collect()),
                    m => m.clone(),
                })
                .collect(),
        }
    }

    pub fn layer_duration(layer: &Layer) -> usize {
        match layer {
            Layer::Gates(g) => g.iter().map(GateSpec::duration).max().unwrap_or(0),
            Layer::Measure { .. } => 0,
        }
    }

    /// Duration in units of τ_p.
    pub fn duration(&self) -> usize {
        self.layers.iter().map(Self::layer_duration).sum()
    }

    pub fn gates(&self) -> impl Iterator<Item = &GateSpec> {
        self.layers.iter().flat_map(|l| match l {
            Layer::Gates(g) => g.as_slice(),
            Layer::Measure { .. } => &[],
        })
    }

    /// One layer per line, gates separated by `|`, measurements as `M(q)` or `M(q,label)`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for l in &self.layers {
            match l {
                Layer::Gates(g) => {
                    out.push_str(&g.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" | "));
                }
                Layer::Measure { qubit, label: None } => out.push_str(&format!("M({qubit})")),
                Layer::Measure { qubit, label: Some(l) } => out.push_str(&format!("M({qubit},{l})")),
            }
            out.push('\n');
        }
        out
    }

    /// Parses the text format; two-qubit gates get `n_rep` repetitions.
    pub fn parse(text: &str, n_rep: usize) -> Result<Circuit> {
        let mut c = Circuit::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| Error::Parse { line: i + 1, message: m };
            let mut gates = Vec::new();
            let mut measure = None;
            for tok in line.split('|').map(str::trim) {
                let open = tok.find('(').ok_or_else(|| err(format!("expected name(args), got {tok:?}")))?;
                if !tok.ends_with(')') {
                    return Err(err(format!("missing ')' in {tok:?}")));
                }
                let name = tok[..open].trim().to_ascii_lowercase();
                let args: Vec<&str> = tok[open + 1..tok.len() - 1].split(',').map(str::trim).collect();
                let qubit = |s: &str| s.parse::<usize>().map_err(|_| err(format!("bad qubit index {s:?}")));
                let nargs = |n: usize| {
                    if args.len() == n {
                        Ok(())
                    } else {
                        Err(err(format!("{name} takes {n} argument(s), got {}", args.len())))
                    }
                };
                match name.as_str() {
                    "m" => {
                        if args.is_empty() || args.len() > 2 {
                            return Err(err("M takes a qubit and an optional label".into()));
                        }
                        let label = match args.get(1) {
                            Some(s) => Some(s.parse::<usize>().map_err(|_| err(format!("bad label {s:?}")))?),
                            None => None,
                        };
                        measure = Some(Layer::Measure { qubit: qubit(args[0])?, label });
                    }
                    "rot" => {
                        nargs(3)?;
                        let axis: Axis = args[1].parse().map_err(|e: Error| err(e.to_string()))?;
                        let angle = parse_angle(args[2]).ok_or_else(|| err(format!("bad angle {:?}", args[2])))?;
                        gates.push(GateSpec::rot(qubit(args[0])?, axis, angle));
                    }
                    "h" | "hadamard" => {
                        nargs(1)?;
                        gates.push(GateSpec::hadamard(qubit(args[0])?));
                    }
                    "cnot" | "cx" | "cy" | "cz" | "swap" => {
                        nargs(2)?;
                        let (a, b) = (qubit(args[0])?, qubit(args[1])?);
                        gates.push(match name.as_str() {
                            "cnot" | "cx" => GateSpec::cnot(a, b, n_rep),
                            "cy" => GateSpec::cy(a, b, n_rep),
                            "cz" => GateSpec::cz(a, b, n_rep),
                            _ => GateSpec::swap(a, b, n_rep),
                        });
                    }
                    other => return Err(err(format!("unknown gate {other:?}"))),
                }
            }
            match measure {
                Some(m) if gates.is_empty() && !line.contains('|') => c.layers.push(m),
                Some(_) => return Err(err("a measurement must be alone on its line".into())),
                None => c.layers.push(Layer::Gates(gates)),
            }
        }
        Ok(c)
    }
}

/// Accepts `pi`, `-pi/2`, `3pi/4`, `3*pi/4`, `2*pi` and plain numbers.
pub fn parse_angle(s: &str) -> Option<f64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s.strip_prefix('+').unwrap_or(&s)),
    };
    let (num, den) = match body.split_once('/') {
        Some((a, b)) => (a, b.parse::<f64>().ok()?),
        None => (body, 1.0),
    };
    let k = num.strip_suffix("pi")?;
    let k = k.strip_suffix('*').unwrap_or(k);
    let k = if k.is_empty() { 1.0 } else { k.parse::<f64>().ok()? };
    let v = k * PI / den;
    Some(if neg { -v } else { v })
}

pub fn format_angle(a: f64) -> String {
    for den in [1i64, 2, 3, 4, 6, 8, 16] {
        let k = a * den as f64 / PI;
        if (k - k.round()).abs() < 1e-12 && k.round() != 0.0 {
            let k = k.round() as i64;
            let num = match k {
                1 => "pi".to_string(),
                -1 => "-pi".to_string(),
                _ => format!("{k}pi"),
            };
            return if den == 1 { num } else { format!("{num}/{den}") };
        }
    }
    format!("{a:?}")
}

/// Checks `n_rep · J · τ_p = π/16` for the graph's coupling.
pub fn check_design(graph: &QubitGraph, n_rep: usize) -> Result<()> {
    let j = graph
        .uniform_coupling()
        .ok_or_else(|| Error::Config("two-qubit gates need a uniform coupling".into()))?;
    let want = design_coupling(n_rep);
    if ((j - want) / want).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "coupling {j} violates n_rep·J·τ_p = π/16 for n_rep = {n_rep} (needs J = {want})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CompileOptions {
    pub z_mode: ZMode,
}

/// Where each layer landed in the compiled schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpan {
    pub layer: usize,
    pub start: usize,
    pub end: usize,
}

/// Compiles a circuit into one schedule; also returns the slot span of every layer.
pub fn compile_with_spans(
    circuit: &Circuit,
    graph: &QubitGraph,
    lib: &ShapeLibrary,
    opts: CompileOptions,
) -> Result<(PulseSchedule, Vec<LayerSpan>)> {
    let mut sched = PulseSchedule::empty("circuit");
    sched.z_mode = opts.z_mode;
    let mut spans = Vec::with_capacity(circuit.layers.len());
    for (li, layer) in circuit.layers.iter().enumerate() {
        let start = sched.total_slots;
        match layer {
            Layer::Measure { qubit, label } => {
                if !graph.contains(*qubit) {
                    return Err(Error::Compile(format!("layer {li}: measurement of unknown qubit {qubit}")));
                }
                sched.markers.push(Marker { slot: sched.total_slots, qubit: *qubit, label: *label });
            }
            Layer::Gates(gates) => {
                let part = compile_layer(gates, graph, lib, opts).map_err(|e| match e {
                    Error::Compile(m) => Error::Compile(format!("layer {li}: {m}")),
                    Error::Construction(m) => Error::Compile(format!("layer {li}: {m}")),
                    other => other,
                })?;
                sched.append(&part);
            }
        }
        spans.push(LayerSpan { layer: li, start, end: sched.total_slots });
    }
    Ok((sched, spans))
}

pub fn compile(circuit: &Circuit, graph: &QubitGraph, lib: &ShapeLibrary, opts: CompileOptions) -> Result<PulseSchedule> {
    compile_with_spans(circuit, graph, lib, opts).map(|(s, _)| s)
}

fn compile_layer(gates: &[GateSpec], graph: &QubitGraph, lib: &ShapeLibrary, opts: CompileOptions) -> Result<PulseSchedule> {
    let mut used: Vec<usize> = Vec::new();
    for g in gates {
        g.check(graph)?;
        for &q in &g.operands {
            if used.contains(&q) {
                return Err(Error::Compile(format!("qubit {q} used twice in one layer")));
            }
        }
        used.extend(&g.operands);
    }
    let two: Vec<&GateSpec> = gates.iter().filter(|g| g.is_two_qubit()).collect();
    if two.is_empty() {
        return compile_single_layer(gates, graph, lib, opts);
    }
    if two.len() != gates.len() {
        return Err(Error::Compile("single- and two-qubit gates cannot share a layer".into()));
    }
    let n_rep = two[0].n_rep;
    if two.iter().any(|g| g.n_rep != n_rep) {
        return Err(Error::Compile("two-qubit gates in one layer must use the same n_rep".into()));
    }
    check_design(graph, n_rep)?;
    let per_gate: Vec<Vec<Unit>> = two.iter().map(|g| g.units()).collect();
    let n_units = per_gate.iter().map(Vec::len).max().unwrap_or(0);
    let mut sched = PulseSchedule::empty("layer");
    sched.z_mode = opts.z_mode;
    for u in 0..n_units {
        let units: Vec<Unit> = per_gate.iter().map(|v| v.get(u).cloned().unwrap_or_else(Unit::idle)).collect();
        let window = |w: usize| -> Vec<Rotation> { units.iter().flat_map(|x| x.windows[w].clone()).collect() };
        let pairs: Vec<(usize, usize)> = units.iter().filter_map(|x| x.pair).collect();
        sched.append(&build_single_qubit_gate(graph, &window(0), lib, opts.z_mode)?);
        let core = build_zz_sequence(graph, &pairs, 0.5, lib)?;
        for _ in 0..n_rep {
            sched.append(&core);
        }
        for w in 1..4 {
            sched.append(&build_single_qubit_gate(graph, &window(w), lib, opts.z_mode)?);
        }
    }
    Ok(sched)
}

fn compile_single_layer(gates: &[GateSpec], graph: &QubitGraph, lib: &ShapeLibrary, opts: CompileOptions) -> Result<PulseSchedule> {
    let qubits: Vec<usize> = gates.iter().map(|g| g.operands[0]).collect();
    if !graph.is_independent(&qubits) {
        return Err(Error::Compile(format!("single-qubit gates on neighboring qubits {qubits:?}")));
    }
    let plans: Vec<Vec<Rotation>> = gates.iter().map(GateSpec::rotations).collect();
    let n_windows = plans.iter().map(Vec::len).max().unwrap_or(0);
    let mut sched = PulseSchedule::empty("layer");
    sched.z_mode = opts.z_mode;
    for w in 0..n_windows {
        let rots: Vec<Rotation> = plans.iter().filter_map(|p| p.get(w).copied()).collect();
        sched.append(&build_single_qubit_gate(graph, &rots, lib, opts.z_mode)?);
    }
    Ok(sched)
}

/// Applies the textbook unitary of `gate` to every column of `v`.
pub fn apply_ideal(v: &mut ReducedEvolution, gate: &GateSpec) {
    let ops = &gate.operands;
    match gate.kind {
        GateKind::Rot { axis, angle } => v.apply_rotation(ops[0], axis, angle),
        GateKind::Hadamard => apply_hadamard(v, ops[0]),
        GateKind::Cnot => apply_controlled(v, ops[0], ops[1], Axis::X),
        GateKind::Cy => apply_controlled(v, ops[0], ops[1], Axis::Y),
        GateKind::Cz => apply_controlled(v, ops[0], ops[1], Axis::Z),
        GateKind::Swap => {
            apply_controlled(v, ops[0], ops[1], Axis::X);
            apply_controlled(v, ops[1], ops[0], Axis::X);
            apply_controlled(v, ops[0], ops[1], Axis::X);
        }
    }
}

fn apply_hadamard(v: &mut ReducedEvolution, q: usize) {
    let mut x = v.clone();
    x.apply_pauli(q, Axis::X);
    v.apply_pauli(q, Axis::Z);
    let data: Vec<Complex64> = v.data().iter().zip(x.data()).map(|(z, x)| (z + x) * FRAC_1_SQRT_2).collect();
    *v = rebuild(v, data);
}

fn apply_controlled(v: &mut ReducedEvolution, control: usize, target: usize, axis: Axis) {
    let mut flipped = v.clone();
    flipped.apply_pauli(target, axis);
    let cbit = 1usize << (control - 1);
    let dim = v.dim();
    let data: Vec<Complex64> = v
        .data()
        .iter()
        .zip(flipped.data())
        .enumerate()
        .map(|(i, (a, b))| if (i % dim) & cbit != 0 { *b } else { *a })
        .collect();
    *v = rebuild(v, data);
}

fn rebuild(v: &ReducedEvolution, data: Vec<Complex64>) -> ReducedEvolution {
    let mat = DMatrix::from_column_slice(v.dim(), v.m(), &data);
    let mut out = ReducedEvolution::from_matrix(v.n_qubits(), &mat).expect("shape preserved");
    out.t = v.t;
    out.norm_log = v.norm_log;
    out
}

/// Applies every gate of the circuit ideally; measurements are skipped.
pub fn apply_ideal_circuit(v: &mut ReducedEvolution, circuit: &Circuit) {
    for g in circuit.gates() {
        apply_ideal(v, g);
    }
}

fn identity_block(n: usize) -> ReducedEvolution {
    let dim = 1usize << n;
    ReducedEvolution::from_matrix(n, &DMatrix::identity(dim, dim)).expect("square identity")
}

/// Textbook unitary of one gate on `n` qubits.
pub fn gate_unitary(gate: &GateSpec, n: usize) -> DMatrix<Complex64> {
    let mut v = identity_block(n);
    apply_ideal(&mut v, gate);
    v.to_matrix()
}

/// Product of the textbook unitaries of the circuit's gates on `n` qubits.
pub fn ideal_unitary(circuit: &Circuit, n: usize) -> DMatrix<Complex64> {
    let mut v = identity_block(n);
    apply_ideal_circuit(&mut v, circuit);
    v.to_matrix()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::star_graph;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn equal_up_to_phase(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>, tol: f64) -> bool {
        let tr = (a.adjoint() * b).trace();
        let n = a.nrows() as f64;
        (tr.norm() / n - 1.0).abs() < tol
    }

    fn rz(q: usize, a: f64) -> GateSpec {
        GateSpec::rot(q, Axis::Z, a)
    }

    fn zz_quarter() -> DMatrix<Complex64> {
        // exp(-iπ/4 σᶻσᶻ) on qubits 1, 2
        DMatrix::from_fn(4, 4, |i, j| {
            if i != j {
                return c(0.0, 0.0);
            }
            let s = if (i & 1) ^ (i >> 1 & 1) == 0 { 1.0 } else { -1.0 };
            Complex64::from_polar(1.0, -PI / 4.0 * s)
        })
    }

    #[test]
    fn cnot_matrix_standard_form() {
        let u = gate_unitary(&GateSpec::cnot(1, 2, 1), 2);
        // control is bit 0, target bit 1
        let expect = DMatrix::from_fn(4, 4, |i, j| {
            let img = if j & 1 == 1 { j ^ 2 } else { j };
            if i == img {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        assert_eq!(u, expect);
    }

    #[test]
    fn dressing_identities_hold() {
        let zz = zz_quarter();
        let dressed = |windows: &[Vec<GateSpec>], pre: &[GateSpec]| {
            let mut u = DMatrix::identity(4, 4);
            for g in pre {
                u = gate_unitary(g, 2) * u;
            }
            u = &zz * u;
            for w in windows {
                for g in w {
                    u = gate_unitary(g, 2) * u;
                }
            }
            u
        };
        let cnot = dressed(
            &[vec![GateSpec::rot(2, Axis::Y, -FRAC_PI_2)], vec![GateSpec::rot(2, Axis::X, FRAC_PI_2)], vec![rz(1, FRAC_PI_2)]],
            &[GateSpec::rot(2, Axis::Y, FRAC_PI_2)],
        );
        assert!(equal_up_to_phase(&cnot, &gate_unitary(&GateSpec::cnot(1, 2, 1), 2), 1e-13));
        let cz = dressed(&[vec![rz(1, -FRAC_PI_2)], vec![rz(2, -FRAC_PI_2)]], &[]);
        assert!(equal_up_to_phase(&cz, &gate_unitary(&GateSpec::cz(1, 2, 1), 2), 1e-13));
        let cy = dressed(
            &[vec![rz(2, -FRAC_PI_2)], vec![rz(1, -FRAC_PI_2)], vec![GateSpec::rot(2, Axis::X, -FRAC_PI_2)]],
            &[GateSpec::rot(2, Axis::X, FRAC_PI_2)],
        );
        assert!(equal_up_to_phase(&cy, &gate_unitary(&GateSpec::cy(1, 2, 1), 2), 1e-13));
    }

    #[test]
    fn cz_symmetric_and_diagonal() {
        let a = gate_unitary(&GateSpec::cz(1, 2, 1), 2);
        let b = gate_unitary(&GateSpec::cz(2, 1, 1), 2);
        assert_eq!(a, b);
        assert_eq!(a[(3, 3)], c(-1.0, 0.0));
        assert_eq!(a[(0, 0)], c(1.0, 0.0));
    }

    #[test]
    fn hadamard_decomposition() {
        let mut u = DMatrix::identity(2, 2);
        for r in GateSpec::hadamard(1).rotations() {
            u = gate_unitary(&GateSpec::rot(1, r.axis, r.angle), 1) * u;
        }
        assert!(equal_up_to_phase(&u, &gate_unitary(&GateSpec::hadamard(1), 1), 1e-14));
        let rz = gate_unitary(&GateSpec::rot(1, Axis::Z, FRAC_PI_2), 1);
        assert!((rz[(0, 0)] - Complex64::from_polar(1.0, -PI / 4.0)).norm() < 1e-15);
        assert!((rz[(1, 1)] - Complex64::from_polar(1.0, PI / 4.0)).norm() < 1e-15);
    }

    #[test]
    fn swap_from_three_cnots() {
        let u = gate_unitary(&GateSpec::swap(1, 2, 1), 2);
        for j in 0..4 {
            let img = ((j & 1) << 1) | (j >> 1);
            assert_eq!(u[(img, j)], c(1.0, 0.0));
        }
    }

    #[test]
    fn durations() {
        assert_eq!(GateSpec::rot(1, Axis::X, PI).duration(), 16);
        assert_eq!(GateSpec::hadamard(1).duration(), 32);
        assert_eq!(GateSpec::cnot(1, 6, 5).duration(), 144);
        assert_eq!(GateSpec::cnot(1, 6, 1).duration(), 80);
        assert_eq!(GateSpec::swap(1, 6, 5).duration(), 432);
    }

    #[test]
    fn angles_parse_and_format() {
        for (s, v) in [("pi", PI), ("-pi/2", -FRAC_PI_2), ("3pi/4", 0.75 * PI), ("2*pi", 2.0 * PI), ("0.25", 0.25)] {
            assert!((parse_angle(s).unwrap() - v).abs() < 1e-15, "{s}");
            assert!((parse_angle(&format_angle(v)).unwrap() - v).abs() < 1e-15);
        }
        assert!(parse_angle("tau").is_none());
    }

    #[test]
    fn text_round_trip_and_errors() {
        let text = "h(2) | h(3)\nrot(1,z,-pi/2)\ncnot(4,6)\nM(6,2)\nswap(6,5)\n";
        let c = Circuit::parse(text, 5).unwrap();
        assert_eq!(c.layers.len(), 5);
        assert_eq!(Circuit::parse(&c.to_text(), 5).unwrap(), c);
        assert!(matches!(Circuit::parse("h(1)\nfoo(2)", 5), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(Circuit::parse("rot(1,q,pi)", 5), Err(Error::Parse { line: 1, .. })));
        assert!(Circuit::parse("M(6) | h(1)", 5).is_err());
    }

    #[test]
    fn inverse_circuit_is_identity() {
        let c = Circuit::parse("h(2) | h(3)\nrot(1,x,0.3)\ncy(4,6)\ncz(3,6)\nswap(6,5)\n", 5).unwrap();
        let mut both = c.clone();
        both.extend(&c.inverse());
        let u = ideal_unitary(&both, 6);
        assert!(equal_up_to_phase(&u, &DMatrix::identity(64, 64), 1e-12));
        assert_eq!(c.inverse().inverse(), c);
        assert_eq!(c.inverse().duration(), c.duration());
    }

    #[test]
    fn compile_checks() {
        let lib = ShapeLibrary::new(2, 3);
        lib.insert(crate::shapes::PulseShape::rectangular(PI));
        lib.insert(crate::shapes::PulseShape::rectangular(FRAC_PI_2));
        let g = star_graph(5, design_coupling(5)).unwrap();
        let opts = CompileOptions::default();
        assert_eq!(compile(&Circuit::new(), &g, &lib, opts).unwrap().total_slots, 0);
        let c = Circuit::parse("h(1) | h(3)\ncnot(2,6)\nM(6)\n", 5).unwrap();
        let s = compile(&c, &g, &lib, opts).unwrap();
        assert_eq!(s.total_slots, 32 + 144);
        assert_eq!(s.markers, vec![Marker { slot: 176, qubit: 6, label: None }]);
        assert!(crate::sequences::validate_windows(&s, &g).passed());
        let bad = |t: &str| compile(&Circuit::parse(t, 5).unwrap(), &g, &lib, opts).unwrap_err();
        assert!(matches!(bad("h(1) | h(6)"), Error::Compile(_)));
        assert!(matches!(bad("cnot(1,2)"), Error::Compile(_)));
        assert!(matches!(bad("cnot(1,6) | h(2)"), Error::Compile(_)));
        let wrong_j = star_graph(5, 0.1).unwrap();
        assert!(matches!(compile(&Circuit::parse("cz(1,6)", 5).unwrap(), &wrong_j, &lib, opts), Err(Error::Config(_))));
    }
}
