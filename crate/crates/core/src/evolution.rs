//! Time evolution of the reduced `N × M` evolution matrix.
//!
//! The default integrator works in the interaction frame of the control
//! pulses: inside each τ_p slot the pulsed qubits' rotations are factored
//! out, fourth-order Runge–Kutta integrates the slowly varying remainder, and
//! the accumulated rotation of the slot is applied exactly at its end. Slots
//! without x/y pulses are diagonal and are propagated exactly.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::network::{z_sign, HamiltonianContext, QubitGraph};
use crate::noise::NoiseTrace;
use crate::sequences::{Axis, PulsePlacement, PulseSchedule};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Column-major `2ⁿ × M` block of evolved input states.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedEvolution {
    n_qubits: usize,
    m: usize,
    data: Vec<Complex64>,
    /// Current time in units of τ_p.
    pub t: f64,
    /// Sum of `ln p` over renormalized projections.
    pub norm_log: f64,
    last_projection: Option<(usize, u8)>,
}

impl ReducedEvolution {
    /// Columns must be orthonormal.
    pub fn new(n_qubits: usize, columns: &[Vec<Complex64>]) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if columns.is_empty() || columns.iter().any(|c| c.len() != dim) {
            return Err(Error::Parameter(format!("expected nonempty columns of length {dim}")));
        }
        let v = Self {
            n_qubits,
            m: columns.len(),
            data: columns.concat(),
            t: 0.0,
            norm_log: 0.0,
            last_projection: None,
        };
        let g = v.gram();
        for i in 0..v.m {
            for j in 0..v.m {
                let target = if i == j { 1.0 } else { 0.0 };
                if (g[(i, j)] - target).norm() > 1e-10 {
                    return Err(Error::Parameter("initial columns are not orthonormal".into()));
                }
            }
        }
        Ok(v)
    }

    /// Computational basis states `indices` as columns.
    pub fn from_basis(n_qubits: usize, indices: &[usize]) -> Result<Self> {
        let dim = 1usize << n_qubits;
        let cols: Vec<Vec<Complex64>> = indices
            .iter()
            .map(|&i| {
                let mut c = vec![ZERO; dim];
                if i < dim {
                    c[i] = Complex64::new(1.0, 0.0);
                }
                c
            })
            .collect();
        if indices.iter().any(|&i| i >= dim) {
            return Err(Error::Parameter("basis index out of range".into()));
        }
        Self::new(n_qubits, &cols)
    }

    /// Wraps an arbitrary matrix without the orthonormality check.
    pub fn from_matrix(n_qubits: usize, mat: &DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() != 1 << n_qubits || mat.ncols() == 0 {
            return Err(Error::Parameter("matrix shape does not match qubit count".into()));
        }
        Ok(Self {
            n_qubits,
            m: mat.ncols(),
            data: mat.as_slice().to_vec(),
            t: 0.0,
            norm_log: 0.0,
            last_projection: None,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn column(&self, k: usize) -> &[Complex64] {
        let n = self.dim();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_column_slice(self.dim(), self.m, &self.data)
    }

    pub fn gram(&self) -> DMatrix<Complex64> {
        let v = self.to_matrix();
        v.adjoint() * v
    }

    /// `(1/M) Tr V†V`.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.m as f64
    }

    pub fn scale(&mut self, f: f64) {
        for c in &mut self.data {
            *c *= f;
        }
    }

    /// Applies `σ^axis` on qubit `q`.
    pub fn apply_pauli(&mut self, q: usize, axis: Axis) {
        let n = self.dim();
        let bit = 1usize << (q - 1);
        for col in self.data.chunks_mut(n) {
            for b in 0..n {
                if b & bit != 0 {
                    continue;
                }
                let (lo, hi) = (col[b], col[b | bit]);
                match axis {
                    Axis::X => {
                        col[b] = hi;
                        col[b | bit] = lo;
                    }
                    Axis::Y => {
                        col[b] = Complex64::new(hi.im, -hi.re);
                        col[b | bit] = Complex64::new(-lo.im, lo.re);
                    }
                    Axis::Z => col[b | bit] = -hi,
                }
            }
        }
    }

    /// Applies `exp(-i θ σ^axis / 2)` on qubit `q`.
    pub fn apply_rotation(&mut self, q: usize, axis: Axis, theta: f64) {
        let n = self.dim();
        let bit = 1usize << (q - 1);
        let (s, c) = (0.5 * theta).sin_cos();
        let mis = Complex64::new(0.0, -s);
        for col in self.data.chunks_mut(n) {
            for b in 0..n {
                if b & bit != 0 {
                    continue;
                }
                let (lo, hi) = (col[b], col[b | bit]);
                match axis {
                    Axis::X => {
                        col[b] = c * lo + mis * hi;
                        col[b | bit] = mis * lo + c * hi;
                    }
                    Axis::Y => {
                        col[b] = c * lo - s * hi;
                        col[b | bit] = s * lo + c * hi;
                    }
                    Axis::Z => {
                        col[b] = Complex64::new(c, -s) * lo;
                        col[b | bit] = Complex64::new(c, s) * hi;
                    }
                }
            }
        }
    }

    /// Left-multiplies by an `N × N` operator.
    pub fn apply_operator(&mut self, op: &DMatrix<Complex64>) -> Result<()> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return Err(Error::Parameter("operator dimension mismatch".into()));
        }
        let v = op * self.to_matrix();
        self.data.copy_from_slice(v.as_slice());
        Ok(())
    }
}

/// `(1 ± σᶻ_q)/2`: outcome 0 keeps `|0⟩` on the qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Projector {
    pub qubit: usize,
    pub outcome: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionMode {
    /// Keep `P·V` unnormalized.
    Postselect,
    /// Replace `V` by `P·V/√p`.
    Renormalize,
}

/// `(1/M) Tr V†PV`.
pub fn outcome_probability(v: &ReducedEvolution, p: Projector) -> f64 {
    let n = v.dim();
    let bit = 1usize << (p.qubit - 1);
    let want = if p.outcome == 0 { 0 } else { bit };
    let mut acc = 0.0;
    for col in v.data.chunks(n) {
        for (b, c) in col.iter().enumerate() {
            if b & bit == want {
                acc += c.norm_sqr();
            }
        }
    }
    acc / v.m as f64
}

/// Applies the projector and returns the probability computed beforehand.
pub fn project(v: &mut ReducedEvolution, p: Projector, mode: ProjectionMode) -> Result<f64> {
    if p.qubit == 0 || p.qubit > v.n_qubits || p.outcome > 1 {
        return Err(Error::Parameter(format!("invalid projector {p:?}")));
    }
    let prob = outcome_probability(v, p);
    if mode == ProjectionMode::Renormalize && prob <= 1e-15 {
        return Err(Error::DegenerateBranch(prob));
    }
    let n = v.dim();
    let bit = 1usize << (p.qubit - 1);
    let want = if p.outcome == 0 { 0 } else { bit };
    let f = match mode {
        ProjectionMode::Postselect => 1.0,
        ProjectionMode::Renormalize => 1.0 / prob.sqrt(),
    };
    for col in v.data.chunks_mut(n) {
        for (b, c) in col.iter_mut().enumerate() {
            *c = if b & bit == want { *c * f } else { ZERO };
        }
    }
    if mode == ProjectionMode::Renormalize {
        v.norm_log += prob.ln();
    }
    v.last_projection = Some((p.qubit, p.outcome));
    Ok(prob)
}

/// Draws a measurement outcome for `qubit` with the input-averaged
/// probabilities and collapses `V` onto it (renormalized).
pub fn sample_outcome<R: Rng + ?Sized>(v: &mut ReducedEvolution, qubit: usize, rng: &mut R) -> Result<u8> {
    let p0 = outcome_probability(v, Projector { qubit, outcome: 0 });
    let p1 = outcome_probability(v, Projector { qubit, outcome: 1 });
    let total = p0 + p1;
    if !(total > 0.0) {
        return Err(Error::DegenerateBranch(total));
    }
    let u: f64 = rng.gen();
    let outcome = if u * total < p0 { 0 } else { 1 };
    project(v, Projector { qubit, outcome }, ProjectionMode::Renormalize)?;
    Ok(outcome)
}

/// Flips a qubit just projected onto `|1⟩` back to `|0⟩`.
pub fn reset_ancilla(v: &mut ReducedEvolution, qubit: usize) -> Result<()> {
    match v.last_projection {
        Some((q, outcome)) if q == qubit => {
            if outcome == 1 {
                v.apply_pauli(qubit, Axis::X);
                v.last_projection = Some((qubit, 0));
            }
            Ok(())
        }
        _ => Err(Error::Usage(format!("reset of qubit {qubit} without a preceding projection on it"))),
    }
}

/// Largest network the integrator accepts.
pub const MAX_QUBITS: usize = 12;

/// Which frame the Runge–Kutta steps are taken in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Frame {
    /// Control rotations factored out (default).
    #[default]
    Interaction,
    /// Plain RK4 on the full Hamiltonian; slow, used as a cross-check.
    Lab,
}

/// Integrator bound to a graph, schedule and noise trace.
pub struct Propagator<'a> {
    graph: &'a QubitGraph,
    schedule: &'a PulseSchedule,
    noise: Option<&'a NoiseTrace>,
    steps: usize,
    frame: Frame,
    /// `σᶻ_i σᶻ_j` per edge on the basis.
    zz: Vec<Vec<f64>>,
    /// `σᶻ_q` per qubit.
    z: Vec<Vec<f64>>,
    /// `½ Σ_{k∈N(q)} J_qk σᶻ_k` per qubit.
    neighbor_field: Vec<Vec<f64>>,
    /// `½ Σ_e J_e σᶻσᶻ`.
    ising: Vec<f64>,
    /// Placement indices starting in each slot, sorted.
    by_slot: Vec<Vec<usize>>,
}

struct Pulsed<'p> {
    placement: &'p PulsePlacement,
    qubit: usize,
    bit: usize,
    axis: Axis,
}

impl<'a> Propagator<'a> {
    pub fn new(
        graph: &'a QubitGraph,
        schedule: &'a PulseSchedule,
        noise: Option<&'a NoiseTrace>,
        steps_per_tau_p: usize,
        frame: Frame,
    ) -> Result<Self> {
        if steps_per_tau_p == 0 || !steps_per_tau_p.is_power_of_two() {
            return Err(Error::Parameter(format!("steps per τ_p must be a power of two, got {steps_per_tau_p}")));
        }
        HamiltonianContext::new(graph, noise, schedule)?;
        if graph.n_qubits() > MAX_QUBITS {
            return Err(Error::Parameter(format!("at most {MAX_QUBITS} qubits supported, got {}", graph.n_qubits())));
        }
        let dim = graph.dim();
        let n = graph.n_qubits();
        let zz = graph.edges().iter().map(|e| (0..dim).map(|b| z_sign(b, e.i) * z_sign(b, e.j)).collect()).collect();
        let z: Vec<Vec<f64>> = (1..=n).map(|q| (0..dim).map(|b| z_sign(b, q)).collect()).collect();
        let neighbor_field = (1..=n)
            .map(|q| {
                (0..dim)
                    .map(|b| {
                        0.5 * graph
                            .neighbors(q)
                            .iter()
                            .map(|&k| graph.coupling(q, k).unwrap() * z_sign(b, k))
                            .sum::<f64>()
                    })
                    .collect()
            })
            .collect();
        let ising = (0..dim)
            .map(|b| 0.5 * graph.edges().iter().map(|e| e.coupling * z_sign(b, e.i) * z_sign(b, e.j)).sum::<f64>())
            .collect();
        let mut by_slot = vec![Vec::new(); schedule.total_slots];
        for (k, p) in schedule.placements.iter().enumerate() {
            if p.shape.is_zero() {
                continue;
            }
            if p.qubit == 0 || p.qubit > n {
                return Err(Error::Schedule(format!("placement on unknown qubit {}", p.qubit)));
            }
            for s in p.start..p.end().min(schedule.total_slots) {
                by_slot[s].push(k);
            }
        }
        for (s, list) in by_slot.iter().enumerate() {
            for (i, &a) in list.iter().enumerate() {
                for &b in &list[i + 1..] {
                    let (pa, pb) = (&schedule.placements[a], &schedule.placements[b]);
                    if pa.qubit == pb.qubit || graph.are_adjacent(pa.qubit, pb.qubit) {
                        return Err(Error::Schedule(format!(
                            "qubits {} and {} pulsed simultaneously in slot {s}",
                            pa.qubit, pb.qubit
                        )));
                    }
                }
            }
        }
        Ok(Self {
            graph,
            schedule,
            noise,
            steps: steps_per_tau_p,
            frame,
            zz,
            z,
            neighbor_field,
            ising,
            by_slot,
        })
    }

    pub fn steps_per_tau_p(&self) -> usize {
        self.steps
    }

    fn grid_index(&self, t: f64) -> Result<usize> {
        let x = t * self.steps as f64;
        let k = x.round();
        if (x - k).abs() > 1e-6 || k < 0.0 {
            return Err(Error::Parameter(format!("t = {t} is not on the integration grid")));
        }
        Ok(k as usize)
    }

    /// Integrates `v` from `v.t` to `t_end`, applying frame rotations at the
    /// slot boundaries crossed on the way (including one landing on `t_end`).
    pub fn advance_to(&self, v: &mut ReducedEvolution, t_end: f64) -> Result<()> {
        if v.n_qubits != self.graph.n_qubits() {
            return Err(Error::Parameter("state and graph qubit counts differ".into()));
        }
        if t_end > self.schedule.total_duration() + 1e-12 {
            return Err(Error::Parameter(format!(
                "t_end = {t_end} beyond schedule end {}",
                self.schedule.total_duration()
            )));
        }
        let mut k = self.grid_index(v.t)?;
        let k_end = self.grid_index(t_end)?;
        if k_end < k {
            return Err(Error::Parameter(format!("cannot integrate backwards from {} to {t_end}", v.t)));
        }
        let mut scratch = Scratch::new(v.data.len());
        while k < k_end {
            let slot = k / self.steps;
            let seg_end = k_end.min((slot + 1) * self.steps);
            self.segment(v, slot, k, seg_end, &mut scratch);
            k = seg_end;
            if k % self.steps == 0 {
                let boundary = k / self.steps;
                for r in self.schedule.frame_rotations.iter().filter(|r| r.slot == boundary) {
                    v.apply_rotation(r.qubit, Axis::Z, r.angle);
                }
            }
            v.last_projection = None;
        }
        v.t = t_end;
        Ok(())
    }

    fn field(&self, q: usize, t: f64) -> f64 {
        self.noise.map_or(0.0, |tr| tr.value(q, t))
    }

    fn segment(&self, v: &mut ReducedEvolution, slot: usize, k0: usize, k1: usize, sc: &mut Scratch) {
        let h = 1.0 / self.steps as f64;
        let t0 = k0 as f64 * h;
        let t1 = k1 as f64 * h;
        let active: Vec<Pulsed> = self.by_slot[slot]
            .iter()
            .map(|&i| {
                let p = &self.schedule.placements[i];
                Pulsed { placement: p, qubit: p.qubit, bit: 1 << (p.qubit - 1), axis: p.axis }
            })
            .collect();
        match self.frame {
            Frame::Lab => {
                for k in k0..k1 {
                    let t = k as f64 * h;
                    self.rk4_step(v, t, h, sc, |s, tt, psi, out| s.lab_derivative(&active, tt, psi, out));
                }
            }
            Frame::Interaction => {
                let xy: Vec<&Pulsed> = active.iter().filter(|p| p.axis != Axis::Z).collect();
                if xy.is_empty() {
                    self.diagonal_exact(v, t0, t1);
                } else {
                    // sin/cos of the accumulated pulse angles at every half step
                    let n_pts = 2 * (k1 - k0) + 1;
                    sc.trig.clear();
                    for j in 0..n_pts {
                        let t = t0 + 0.5 * h * j as f64;
                        for p in &xy {
                            let start = p.placement.start as f64;
                            let dphi = p.placement.phase(t - start) - p.placement.phase(t0 - start);
                            sc.trig.push(dphi.sin_cos());
                        }
                    }
                    let trig = std::mem::take(&mut sc.trig);
                    let stride = xy.len();
                    for k in k0..k1 {
                        let t = k as f64 * h;
                        self.rk4_step(v, t, h, sc, |s, tt, psi, out| {
                            let j = ((tt - t0) / (0.5 * h)).round() as usize;
                            s.frame_derivative(&xy, &trig[j * stride..(j + 1) * stride], tt, psi, out)
                        });
                    }
                    sc.trig = trig;
                }
                for p in &active {
                    let start = p.placement.start as f64;
                    let dphi = p.placement.phase(t1 - start) - p.placement.phase(t0 - start);
                    v.apply_rotation(p.qubit, p.axis, dphi);
                }
            }
        }
    }

    fn diagonal_exact(&self, v: &mut ReducedEvolution, t0: f64, t1: f64) {
        let dim = v.dim();
        let dt = t1 - t0;
        let integrals: Vec<f64> = match self.noise {
            Some(tr) => (1..=self.graph.n_qubits()).map(|q| 0.5 * tr.integral(q, t0, t1)).collect(),
            None => vec![0.0; self.graph.n_qubits()],
        };
        let phases: Vec<Complex64> = (0..dim)
            .map(|b| {
                let mut e = self.ising[b] * dt;
                for (q, a) in integrals.iter().enumerate() {
                    e += a * self.z[q][b];
                }
                Complex64::from_polar(1.0, -e)
            })
            .collect();
        for col in v.data.chunks_mut(dim) {
            for (c, p) in col.iter_mut().zip(&phases) {
                *c *= p;
            }
        }
    }

    fn rk4_step<F>(&self, v: &mut ReducedEvolution, t: f64, h: f64, sc: &mut Scratch, f: F)
    where
        F: Fn(&Self, f64, &[Complex64], &mut [Complex64]),
    {
        let Scratch { k1, k2, k3, k4, tmp, .. } = sc;
        let y = &mut v.data;
        f(self, t, y, k1);
        for i in 0..y.len() {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        f(self, t + 0.5 * h, tmp, k2);
        for i in 0..y.len() {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        f(self, t + 0.5 * h, tmp, k3);
        for i in 0..y.len() {
            tmp[i] = y[i] + h * k3[i];
        }
        f(self, t + h, tmp, k4);
        let w = h / 6.0;
        for i in 0..y.len() {
            y[i] += w * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
    }

    /// `-i H̃(t) ψ` in the frame rotating with the pulses in `xy`.
    fn frame_derivative(&self, xy: &[&Pulsed], trig: &[(f64, f64)], t: f64, psi: &[Complex64], out: &mut [Complex64]) {
        let n = self.graph.n_qubits();
        let dim = self.graph.dim();
        let mut c = [1.0f64; MAX_QUBITS];
        for (p, &(_, co)) in xy.iter().zip(trig) {
            c[p.qubit - 1] = co;
        }
        let mut fields = [0.0f64; MAX_QUBITS];
        for (q, f) in fields.iter_mut().enumerate().take(n) {
            *f = self.field(q + 1, t);
        }
        let mut diag_buf = [0.0f64; 1 << MAX_QUBITS];
        let diag = &mut diag_buf[..dim];
        for (e, pat) in self.graph.edges().iter().zip(&self.zz) {
            let coef = 0.5 * e.coupling * c[e.i - 1] * c[e.j - 1];
            for (d, z) in diag.iter_mut().zip(pat) {
                *d += coef * z;
            }
        }
        for q in 0..n {
            let coef = 0.5 * fields[q] * c[q];
            if coef != 0.0 {
                for (d, z) in diag.iter_mut().zip(&self.z[q]) {
                    *d += coef * z;
                }
            }
        }
        for (src, dst) in psi.chunks(dim).zip(out.chunks_mut(dim)) {
            for b in 0..dim {
                // -i d ψ
                let x = diag[b] * src[b];
                dst[b] = Complex64::new(x.im, -x.re);
            }
            for (i, p) in xy.iter().enumerate() {
                let s = trig[i].0;
                let a_half = 0.5 * fields[p.qubit - 1];
                let nf = &self.neighbor_field[p.qubit - 1];
                for b in 0..dim {
                    let g = s * (a_half + nf[b]);
                    let other = src[b ^ p.bit];
                    // -i g σ⊥ ψ with σ⊥ = σʸ (x pulse) or -σˣ (y pulse)
                    let term = match p.axis {
                        Axis::X => {
                            if b & p.bit == 0 {
                                -other
                            } else {
                                other
                            }
                        }
                        _ => Complex64::new(-other.im, other.re),
                    };
                    dst[b] += g * term;
                }
            }
        }
    }

    /// `-i H(t) ψ` with the full control Hamiltonian.
    fn lab_derivative(&self, active: &[Pulsed], t: f64, psi: &[Complex64], out: &mut [Complex64]) {
        let n = self.graph.n_qubits();
        let dim = self.graph.dim();
        let fields: Vec<f64> = (1..=n).map(|q| self.field(q, t)).collect();
        let mut diag = self.ising.clone();
        for q in 0..n {
            let coef = 0.5 * fields[q];
            for (d, z) in diag.iter_mut().zip(&self.z[q]) {
                *d += coef * z;
            }
        }
        let amps: Vec<f64> =
            active.iter().map(|p| 0.5 * p.placement.amplitude(t - p.placement.start as f64)).collect();
        for (src, dst) in psi.chunks(dim).zip(out.chunks_mut(dim)) {
            for b in 0..dim {
                let mut x = diag[b] * src[b];
                for (p, &a) in active.iter().zip(&amps) {
                    let up = b & p.bit == 0;
                    let other = src[b ^ p.bit];
                    x += a * match p.axis {
                        Axis::X => other,
                        Axis::Y => {
                            if up {
                                Complex64::new(other.im, -other.re)
                            } else {
                                Complex64::new(-other.im, other.re)
                            }
                        }
                        Axis::Z => {
                            if up {
                                src[b]
                            } else {
                                -src[b]
                            }
                        }
                    };
                }
                dst[b] = Complex64::new(x.im, -x.re);
            }
        }
    }
}

struct Scratch {
    trig: Vec<(f64, f64)>,
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Scratch {
    fn new(len: usize) -> Self {
        Self { trig: Vec::new(), k1: vec![ZERO; len], k2: vec![ZERO; len], k3: vec![ZERO; len], k4: vec![ZERO; len], tmp: vec![ZERO; len] }
    }
}

/// Integrates `v` to `t_end` under the context's Hamiltonian.
pub fn integrate(v: &mut ReducedEvolution, ctx: &HamiltonianContext, t_end: f64, steps_per_tau_p: usize) -> Result<()> {
    Propagator::new(ctx.graph, ctx.schedule, ctx.noise, steps_per_tau_p, Frame::Interaction)?.advance_to(v, t_end)
}

/// Splits `V₀ ≈ |e⟩ ⊗ U₀` with `U₀` acting on `keep` (2 × M).
fn factor_reference(v0: &ReducedEvolution, keep: usize) -> DMatrix<Complex64> {
    let dim = v0.dim();
    let m = v0.m;
    let env_dim = dim / 2;
    let bit = 1usize << (keep - 1);
    let env_index = |b: usize| {
        let low = b & (bit - 1);
        let high = (b >> 1) & !(bit - 1);
        low | high
    };
    let mut r = DMatrix::<Complex64>::zeros(env_dim, 2 * m);
    for col in 0..m {
        for (b, c) in v0.column(col).iter().enumerate() {
            let s = if b & bit == 0 { 0 } else { 1 };
            r[(env_index(b), s * m + col)] = *c;
        }
    }
    let svd = r.svd(false, true);
    let k = svd.singular_values.imax();
    let sv = svd.singular_values[k];
    let row = svd.v_t.unwrap().row(k).into_owned();
    let mut u0 = DMatrix::<Complex64>::zeros(2, m);
    for s in 0..2 {
        for col in 0..m {
            u0[(s, col)] = row[s * m + col] * sv;
        }
    }
    u0
}

/// Phase-insensitive fidelity `[Tr(V₀†V V†V₀) + |Tr V₀†V|²] / (M(M+1))`.
pub fn fidelity(v: &ReducedEvolution, v0: &ReducedEvolution) -> f64 {
    assert_eq!((v.dim(), v.m), (v0.dim(), v0.m), "fidelity of mismatched blocks");
    let m = v.m;
    // O = V₀†V is M×M
    let mut o = DMatrix::<Complex64>::zeros(m, m);
    for i in 0..m {
        let a = v0.column(i);
        for j in 0..m {
            o[(i, j)] = a.iter().zip(v.column(j)).map(|(x, y)| x.conj() * y).sum();
        }
    }
    let tr = o.trace();
    let frob: f64 = o.iter().map(|x| x.norm_sqr()).sum();
    (frob + tr.norm_sqr()) / (m * (m + 1)) as f64
}

/// Average fidelity of the channel on `keep_qubit` obtained by tracing out all
/// other qubits of `V`, relative to the single-qubit operation contained in
/// the product reference `V₀`:
/// `[Σ_e Tr K_e†K_e + Σ_e |Tr U₀†K_e|²] / (M(M+1))`, with Kraus operators
/// `K_e = ⟨e|V`.
pub fn single_qubit_fidelity(v: &ReducedEvolution, v0: &ReducedEvolution, keep_qubit: usize) -> f64 {
    let u0 = factor_reference(v0, keep_qubit);
    let dim = v.dim();
    let m = v.m;
    let bit = 1usize << (keep_qubit - 1);
    let mut overlaps = vec![ZERO; dim / 2];
    let mut norm = 0.0;
    for col in 0..m {
        for (b, c) in v.column(col).iter().enumerate() {
            let s = if b & bit == 0 { 0 } else { 1 };
            let low = b & (bit - 1);
            let high = (b >> 1) & !(bit - 1);
            overlaps[low | high] += u0[(s, col)].conj() * c;
            norm += c.norm_sqr();
        }
    }
    let cross: f64 = overlaps.iter().map(|o| o.norm_sqr()).sum();
    (norm + cross) / (m * (m + 1)) as f64
}

/// Input-averaged reduced density matrix of one qubit, normalized.
pub fn reduced_density(v: &ReducedEvolution, keep_qubit: usize) -> [[Complex64; 2]; 2] {
    let bit = 1usize << (keep_qubit - 1);
    let mut rho = [[ZERO; 2]; 2];
    for col in 0..v.m {
        let c = v.column(col);
        for b in 0..c.len() {
            if b & bit != 0 {
                continue;
            }
            let (a0, a1) = (c[b], c[b | bit]);
            rho[0][0] += a0 * a0.conj();
            rho[0][1] += a0 * a1.conj();
            rho[1][0] += a1 * a0.conj();
            rho[1][1] += a1 * a1.conj();
        }
    }
    let tr = (rho[0][0] + rho[1][1]).re;
    if tr > 0.0 {
        for row in &mut rho {
            for x in row.iter_mut() {
                *x /= tr;
            }
        }
    }
    rho
}

/// Uhlmann fidelity between the input-averaged reduced states of `V` and `V₀`.
/// Note that for the maximally mixed average over a basis this is blind to
/// dephasing; [`single_qubit_fidelity`] is the channel-level measure.
pub fn reduced_state_fidelity(v: &ReducedEvolution, v0: &ReducedEvolution, keep_qubit: usize) -> f64 {
    let r = reduced_density(v, keep_qubit);
    let s = reduced_density(v0, keep_qubit);
    let mut tr = ZERO;
    for i in 0..2 {
        for j in 0..2 {
            tr += r[i][j] * s[j][i];
        }
    }
    let det = |m: &[[Complex64; 2]; 2]| (m[0][0] * m[1][1] - m[0][1] * m[1][0]).re.max(0.0);
    (tr.re + 2.0 * (det(&r) * det(&s)).sqrt()).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plus_ancilla(n: usize, q: usize) -> ReducedEvolution {
        let mut v = ReducedEvolution::from_basis(n, &[0, 1 << ((q % n) as u32)]).unwrap();
        v.apply_rotation(q, Axis::Y, std::f64::consts::FRAC_PI_2);
        v
    }

    #[test]
    fn projection_probabilities() {
        let mut v = ReducedEvolution::from_basis(3, &[0, 1]).unwrap();
        let p = project(&mut v, Projector { qubit: 3, outcome: 0 }, ProjectionMode::Postselect).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        let w = plus_ancilla(3, 3);
        let p0 = outcome_probability(&w, Projector { qubit: 3, outcome: 0 });
        let p1 = outcome_probability(&w, Projector { qubit: 3, outcome: 1 });
        assert!((p0 - 0.5).abs() < 1e-12);
        assert!((p0 + p1 - 1.0).abs() < 1e-12);
        let mut z = w.clone();
        project(&mut z, Projector { qubit: 3, outcome: 1 }, ProjectionMode::Postselect).unwrap();
        assert!(z.norm() <= w.norm());
    }

    #[test]
    fn degenerate_branch_is_an_error() {
        let mut v = ReducedEvolution::from_basis(2, &[0]).unwrap();
        let e = project(&mut v, Projector { qubit: 1, outcome: 1 }, ProjectionMode::Renormalize).unwrap_err();
        assert!(matches!(e, Error::DegenerateBranch(_)));
    }

    #[test]
    fn sampling_and_reset() {
        let mut v = ReducedEvolution::from_basis(2, &[2, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_outcome(&mut v, 2, &mut rng).unwrap(), 1);
        reset_ancilla(&mut v, 2).unwrap();
        assert!((outcome_probability(&v, Projector { qubit: 2, outcome: 0 }) - 1.0).abs() < 1e-15);
        let once = v.clone();
        reset_ancilla(&mut v, 2).unwrap();
        assert_eq!(v, once);
        let mut fresh = ReducedEvolution::from_basis(2, &[0]).unwrap();
        assert!(matches!(reset_ancilla(&mut fresh, 2), Err(Error::Usage(_))));

        let mut ones = 0;
        for _ in 0..10_000 {
            let mut w = plus_ancilla(2, 2);
            ones += sample_outcome(&mut w, 2, &mut rng).unwrap() as usize;
        }
        assert!((ones as f64 / 1e4 - 0.5).abs() < 0.02);
        let draw = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            (0..20).map(|_| sample_outcome(&mut plus_ancilla(2, 2), 2, &mut r).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
    }

    #[test]
    fn pauli_and_rotation_consistency() {
        let mut a = ReducedEvolution::from_basis(2, &[0, 3]).unwrap();
        let mut b = a.clone();
        a.apply_pauli(2, Axis::Y);
        b.apply_rotation(2, Axis::Y, std::f64::consts::PI);
        // exp(-iπσ/2) = -iσ
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((Complex64::new(0.0, -1.0) * x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn single_qubit_fidelity_checks() {
        let v0 = ReducedEvolution::from_basis(6, &[0, 1 << 5]).unwrap();
        assert!((single_qubit_fidelity(&v0, &v0, 6) - 1.0).abs() < 1e-12);
        let mut zflip = v0.clone();
        zflip.apply_pauli(2, Axis::Z);
        assert!((single_qubit_fidelity(&zflip, &v0, 6) - 1.0).abs() < 1e-12);
        assert!((reduced_state_fidelity(&zflip, &v0, 6) - 1.0).abs() < 1e-12);
        let mut zc = v0.clone();
        zc.apply_pauli(6, Axis::Z);
        // a Pauli error on the kept qubit has channel fidelity 1/3
        assert!((single_qubit_fidelity(&zc, &v0, 6) - 1.0 / 3.0).abs() < 1e-12);
    }
}
