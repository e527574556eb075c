//! Decoupling pulse schedules on bipartite networks.
//!
//! Time is slotted in units of τ_p. Single-qubit gates and the ZZ-coupling
//! sequence each occupy 16 slots; their decoupling properties are checked in
//! the δ-pulse idealization, where a π pulse about x or y flips the sign of
//! `σᶻ` at the midpoint of its slot.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{z_sign, QubitGraph, Sublattice};
use crate::shapes::{PulseShape, ShapeLibrary};

/// Slots in one single-qubit gate or one ZZ-sequence repetition.
pub const WINDOW_SLOTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn symbol(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::Parameter(format!("unknown axis {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseRole {
    /// π pulse belonging to the decoupling skeleton.
    Decoupling,
    /// Part of the rotation being implemented (`P` or the composite identities).
    Rotation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulsePlacement {
    pub qubit: usize,
    pub axis: Axis,
    pub shape: Arc<PulseShape>,
    pub sign: i8,
    /// First slot occupied.
    pub start: usize,
    pub role: PulseRole,
}

impl PulsePlacement {
    pub fn slots(&self) -> usize {
        self.shape.duration.round() as usize
    }

    pub fn end(&self) -> usize {
        self.start + self.slots()
    }

    pub fn angle(&self) -> f64 {
        self.sign as f64 * self.shape.nominal_angle
    }

    /// Signed accumulated angle `t` into the pulse.
    pub fn phase(&self, t: f64) -> f64 {
        self.sign as f64 * self.shape.unit_phase(t / self.shape.duration)
    }

    pub fn amplitude(&self, t: f64) -> f64 {
        self.sign as f64 * self.shape.unit_amplitude(t / self.shape.duration) / self.shape.duration
    }
}

/// Instantaneous z rotation applied at a slot boundary (virtual-z mode).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRotation {
    pub slot: usize,
    pub qubit: usize,
    pub angle: f64,
}

/// Measure-and-reset of `qubit` at the boundary before `slot`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Marker {
    pub slot: usize,
    pub qubit: usize,
    /// Stabilizer generator index (0-based) the outcome belongs to, if any.
    pub label: Option<usize>,
}

/// 16-slot block with its decoupling contract.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecouplingWindow {
    pub start: usize,
    pub coupled: Vec<(usize, usize)>,
}

/// How z rotations are realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZMode {
    /// Shaped z-field pulses in the rotation slots.
    #[default]
    Pulse,
    /// Instantaneous frame updates at the end of the gate window.
    Frame,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PulseSchedule {
    pub label: String,
    pub total_slots: usize,
    pub placements: Vec<PulsePlacement>,
    pub frame_rotations: Vec<FrameRotation>,
    pub markers: Vec<Marker>,
    pub windows: Vec<DecouplingWindow>,
    pub z_mode: ZMode,
}

impl PulseSchedule {
    pub fn empty(label: &str) -> Self {
        Self { label: label.to_string(), ..Default::default() }
    }

    pub fn total_duration(&self) -> f64 {
        self.total_slots as f64
    }

    /// Appends `other`, shifted to start at the current end.
    pub fn append(&mut self, other: &PulseSchedule) {
        let off = self.total_slots;
        self.placements.extend(other.placements.iter().map(|p| PulsePlacement { start: p.start + off, ..p.clone() }));
        self.frame_rotations
            .extend(other.frame_rotations.iter().map(|r| FrameRotation { slot: r.slot + off, ..*r }));
        self.markers.extend(other.markers.iter().map(|m| Marker { slot: m.slot + off, ..*m }));
        self.windows.extend(
            other.windows.iter().map(|w| DecouplingWindow { start: w.start + off, coupled: w.coupled.clone() }),
        );
        self.total_slots += other.total_slots;
    }

    /// Nonzero placements overlapping slot `s`.
    pub fn active_in_slot(&self, s: usize) -> impl Iterator<Item = &PulsePlacement> {
        self.placements.iter().filter(move |p| p.start <= s && s < p.end() && !p.shape.is_zero())
    }

    /// `(qubit, axis, V(t))` for every pulse playing at time `t`.
    pub fn amplitudes_at(&self, t: f64) -> Vec<(usize, Axis, f64)> {
        if self.total_slots == 0 {
            return Vec::new();
        }
        let s = (t.floor().max(0.0) as usize).min(self.total_slots - 1);
        self.active_in_slot(s).map(|p| (p.qubit, p.axis, p.amplitude(t - p.start as f64))).collect()
    }

    /// One line per placement: `qubit axis sign shape start duration`.
    pub fn timeline(&self) -> String {
        let mut out = String::new();
        let mut items: Vec<_> = self.placements.iter().collect();
        items.sort_by_key(|p| (p.start, p.qubit));
        for p in items {
            writeln!(
                out,
                "{} {} {} {} {} {}",
                p.qubit,
                p.axis,
                if p.sign > 0 { '+' } else { '-' },
                p.shape.name,
                p.start,
                p.slots()
            )
            .unwrap();
        }
        for r in &self.frame_rotations {
            writeln!(out, "{} z-frame {:+.12} @ {}", r.qubit, r.angle, r.slot).unwrap();
        }
        for m in &self.markers {
            writeln!(out, "M {} @ {}", m.qubit, m.slot).unwrap();
        }
        out
    }
}

/// A single-qubit rotation request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    pub qubit: usize,
    pub axis: Axis,
    pub angle: f64,
}

impl Rotation {
    pub fn new(qubit: usize, axis: Axis, angle: f64) -> Self {
        Self { qubit, axis, angle }
    }
}

const SUBLATTICE_A_PI: [usize; 4] = [0, 6, 11, 13];
const SUBLATTICE_B_PI: [usize; 4] = [3, 9, 10, 12];
const IDENTITY_SLOTS: [usize; 3] = [1, 4, 7];
const ROTATION_SLOT: usize = 14;

fn pi_placement(lib: &ShapeLibrary, qubit: usize, start: usize) -> Result<PulsePlacement> {
    Ok(PulsePlacement {
        qubit,
        axis: Axis::X,
        shape: lib.for_angle(PI)?,
        sign: 1,
        start,
        role: PulseRole::Decoupling,
    })
}

/// 16τ_p dynamically protected single-qubit gate on every qubit of `graph`:
/// `(X)(I)(Y)(I)(X)(I)(Y)(Y)(X)(Y)(X)(P)` with the X slots on sublattice A and
/// the Y slots, realized as x pulses, on sublattice B. Rotation targets must be
/// mutually non-adjacent; all other qubits idle (zero-amplitude `P`).
pub fn build_single_qubit_gate(
    graph: &QubitGraph,
    rotations: &[Rotation],
    lib: &ShapeLibrary,
    z_mode: ZMode,
) -> Result<PulseSchedule> {
    let mut targets = Vec::new();
    for r in rotations {
        if !graph.contains(r.qubit) {
            return Err(Error::Construction(format!("rotation on unknown qubit {}", r.qubit)));
        }
        if !(r.angle > -2.0 * PI - 1e-12 && r.angle <= 2.0 * PI + 1e-12) {
            return Err(Error::Parameter(format!("rotation angle {} outside (-2π, 2π]", r.angle)));
        }
        if r.angle != 0.0 {
            targets.push(r.qubit);
        }
    }
    if !graph.is_independent(&targets) {
        return Err(Error::Construction(format!("rotation targets {targets:?} are not mutually non-adjacent")));
    }
    let mut s = PulseSchedule::empty("rot");
    s.total_slots = WINDOW_SLOTS;
    s.z_mode = z_mode;
    s.windows.push(DecouplingWindow { start: 0, coupled: Vec::new() });
    for q in 1..=graph.n_qubits() {
        let slots = match graph.sublattice(q) {
            Sublattice::A => SUBLATTICE_A_PI,
            Sublattice::B => SUBLATTICE_B_PI,
        };
        for &slot in &slots {
            s.placements.push(pi_placement(lib, q, slot)?);
        }
    }
    for r in rotations.iter().filter(|r| r.angle != 0.0) {
        let sign: i8 = if r.angle < 0.0 { -1 } else { 1 };
        if r.axis == Axis::Z && z_mode == ZMode::Frame {
            s.frame_rotations.push(FrameRotation { slot: WINDOW_SLOTS, qubit: r.qubit, angle: r.angle });
            continue;
        }
        let shape = lib.for_angle(r.angle)?;
        let rot = |start, sign, shape: Arc<PulseShape>| PulsePlacement {
            qubit: r.qubit,
            axis: r.axis,
            shape,
            sign,
            start,
            role: PulseRole::Rotation,
        };
        for &slot in &IDENTITY_SLOTS {
            s.placements.push(rot(slot, sign, shape.clone()));
            s.placements.push(rot(slot + 1, -sign, shape.clone()));
        }
        s.placements.push(rot(ROTATION_SLOT, sign, Arc::new(shape.stretched(2.0))));
    }
    s.placements.sort_by_key(|p| (p.start, p.qubit));
    Ok(s)
}

/// Pulse slots of the four sequence roles for `f = 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ZzPattern {
    pub a: u16,
    pub b: u16,
    pub a_coupled: u16,
    pub b_coupled: u16,
}

impl ZzPattern {
    pub fn total_pulses(&self) -> u32 {
        self.a.count_ones() + self.b.count_ones() + self.a_coupled.count_ones() + self.b_coupled.count_ones()
    }

    pub fn slots(mask: u16) -> Vec<usize> {
        (0..16).filter(|s| mask >> s & 1 == 1).collect()
    }
}

/// The shipped 10-pulse solution.
pub const ZZ_PATTERN: ZzPattern = ZzPattern {
    a: 0b0000_0001_0000_0001,
    b: 0b0010_0010_0010_0010,
    a_coupled: 0b0000_0100_0000_0100,
    b_coupled: 0b0001_0000_0001_0000,
};

/// Integral of the δ-pulse sign function of `mask` in units of τ_p/2.
fn sign_vector(mask: u16) -> [i8; 32] {
    let mut v = [0i8; 32];
    let mut s = 1;
    for (h, x) in v.iter_mut().enumerate() {
        if h % 2 == 1 && mask >> (h / 2) & 1 == 1 {
            s = -s;
        }
        *x = s;
    }
    v
}

fn dot(a: &[i8; 32], b: &[i8; 32]) -> i32 {
    a.iter().zip(b).map(|(x, y)| (*x as i32) * (*y as i32)).sum()
}

/// Exhaustive search for 16-slot patterns satisfying the ZZ-sequence contract
/// with `f = 1/2` and at most `max_total` pulses in total. Every role uses an
/// even number of pulses, and the A-family and B-family slots are disjoint so
/// that no two neighbors ever pulse together.
pub fn search_zz_patterns(max_total: u32) -> Vec<ZzPattern> {
    let ones = [1i8; 32];
    let singles: Vec<(u16, [i8; 32])> = (1..=u16::MAX)
        .filter(|m| m.count_ones() % 2 == 0 && m.count_ones() + 6 <= max_total)
        .map(|m| (m, sign_vector(m)))
        .filter(|(_, v)| dot(v, &ones) == 0)
        .collect();
    let mut out = Vec::new();
    for (ac, vac) in &singles {
        for (bc, vbc) in &singles {
            if ac & bc != 0 || dot(vac, vbc) != 16 || ac.count_ones() + bc.count_ones() + 4 > max_total {
                continue;
            }
            for (b, vb) in &singles {
                if b & ac != 0 || dot(vac, vb) != 0 {
                    continue;
                }
                let used = ac.count_ones() + bc.count_ones() + b.count_ones();
                if used + 2 > max_total {
                    continue;
                }
                for (a, va) in &singles {
                    if a & (b | bc) != 0
                        || used + a.count_ones() > max_total
                        || dot(va, vb) != 0
                        || dot(va, vbc) != 0
                    {
                        continue;
                    }
                    out.push(ZzPattern { a: *a, b: *b, a_coupled: *ac, b_coupled: *bc });
                }
            }
        }
    }
    out
}

/// One 16τ_p repetition of the ZZ-preserving sequence: every edge in
/// `coupled_pairs` keeps the fraction `f` of its coupling, everything else is
/// decoupled.
pub fn build_zz_sequence(
    graph: &QubitGraph,
    coupled_pairs: &[(usize, usize)],
    f: f64,
    lib: &ShapeLibrary,
) -> Result<PulseSchedule> {
    if f != 0.5 {
        return Err(Error::Construction(format!("only f = 1/2 is supported, got {f}")));
    }
    if graph.uniform_coupling().is_none() && !graph.edges().is_empty() {
        return Err(Error::Construction("ZZ sequences need uniform couplings".into()));
    }
    let mut coupled = HashSet::new();
    for &(i, j) in coupled_pairs {
        if !graph.are_adjacent(i, j) {
            return Err(Error::Construction(format!("pair ({i},{j}) is not an edge")));
        }
        if !coupled.insert(i) || !coupled.insert(j) {
            return Err(Error::Construction(format!("pair ({i},{j}) overlaps another coupled pair")));
        }
    }
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    let pair_set: HashSet<_> = coupled_pairs.iter().map(|&(a, b)| key(a, b)).collect();
    for e in graph.edges() {
        if coupled.contains(&e.i) && coupled.contains(&e.j) && !pair_set.contains(&(e.i, e.j)) {
            return Err(Error::Construction(format!(
                "edge ({},{}) joins two coupled pairs and cannot be decoupled",
                e.i, e.j
            )));
        }
    }
    let mut s = PulseSchedule::empty("zz");
    s.total_slots = WINDOW_SLOTS;
    s.windows.push(DecouplingWindow {
        start: 0,
        coupled: {
            let mut v: Vec<_> = pair_set.iter().copied().collect();
            v.sort_unstable();
            v
        },
    });
    for q in 1..=graph.n_qubits() {
        let mask = match (graph.sublattice(q), coupled.contains(&q)) {
            (Sublattice::A, false) => ZZ_PATTERN.a,
            (Sublattice::A, true) => ZZ_PATTERN.a_coupled,
            (Sublattice::B, false) => ZZ_PATTERN.b,
            (Sublattice::B, true) => ZZ_PATTERN.b_coupled,
        };
        for slot in ZzPattern::slots(mask) {
            s.placements.push(pi_placement(lib, q, slot)?);
        }
    }
    s.placements.sort_by_key(|p| (p.start, p.qubit));
    Ok(s)
}

/// δ-pulse sign functions, sampled on half-slots.
#[derive(Debug, Clone, PartialEq)]
pub struct TogglingProfile {
    pub total_slots: usize,
    /// `signs[q-1][h]` on `[h, h+1)·τ_p/2`.
    pub signs: Vec<Vec<i8>>,
}

impl TogglingProfile {
    pub fn average(&self, q: usize) -> Rational64 {
        let s: i64 = self.signs[q - 1].iter().map(|&x| x as i64).sum();
        Rational64::new(s, self.len() as i64)
    }

    pub fn correlation(&self, a: usize, b: usize) -> Rational64 {
        let s: i64 = self.signs[a - 1].iter().zip(&self.signs[b - 1]).map(|(x, y)| (*x as i64) * (*y as i64)).sum();
        Rational64::new(s, self.len() as i64)
    }

    fn len(&self) -> usize {
        (2 * self.total_slots).max(1)
    }

    pub fn flips(&self, q: usize) -> usize {
        self.signs[q - 1].windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// Restriction to `len` slots starting at `start`, renormalized to +1 at the start.
    pub fn window(&self, start: usize, len: usize) -> TogglingProfile {
        let signs = self
            .signs
            .iter()
            .map(|v| {
                let seg = &v[2 * start..2 * (start + len)];
                let first = if start == 0 { 1 } else { v[2 * start - 1] };
                seg.iter().map(|&x| x * first).collect()
            })
            .collect();
        TogglingProfile { total_slots: len, signs }
    }
}

pub fn toggling_profile(schedule: &PulseSchedule, n_qubits: usize) -> Result<TogglingProfile> {
    let half = 2 * schedule.total_slots;
    let mut flip_at = vec![vec![false; half + 1]; n_qubits];
    for p in &schedule.placements {
        if p.role != PulseRole::Decoupling || p.shape.is_zero() {
            continue;
        }
        if p.qubit == 0 || p.qubit > n_qubits {
            return Err(Error::Profile(format!("placement on unknown qubit {}", p.qubit)));
        }
        if p.axis == Axis::Z || (p.shape.nominal_angle.abs() - PI).abs() > 1e-12 {
            return Err(Error::Profile(format!(
                "qubit {} carries a non-π or z-axis decoupling pulse at slot {}",
                p.qubit, p.start
            )));
        }
        let mid = 2 * p.start + p.slots();
        let f = &mut flip_at[p.qubit - 1][mid];
        *f = !*f;
    }
    let signs = flip_at
        .iter()
        .map(|flips| {
            let mut s = 1i8;
            (0..half)
                .map(|h| {
                    if flips[h] {
                        s = -s;
                    }
                    s
                })
                .collect()
        })
        .collect();
    Ok(TogglingProfile { total_slots: schedule.total_slots, signs })
}

/// Decoupling targets of a window.
#[derive(Debug, Clone, PartialEq)]
pub struct DecouplingTargets {
    pub coupled: Vec<(usize, usize)>,
    pub f: Rational64,
}

impl DecouplingTargets {
    pub fn decouple_all() -> Self {
        Self { coupled: Vec::new(), f: Rational64::new(1, 2) }
    }

    pub fn coupled(pairs: &[(usize, usize)], f: Rational64) -> Self {
        Self { coupled: pairs.to_vec(), f }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCheck {
    pub label: String,
    pub value: Rational64,
    pub target: Rational64,
}

impl ConditionCheck {
    pub fn residual(&self) -> f64 {
        let d = self.value - self.target;
        (*d.numer() as f64 / *d.denom() as f64).abs()
    }

    pub fn passed(&self) -> bool {
        self.value == self.target
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub adjacency: Vec<String>,
    pub alignment: Vec<String>,
    pub profile: Vec<String>,
    pub conditions: Vec<ConditionCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.adjacency.is_empty()
            && self.alignment.is_empty()
            && self.profile.is_empty()
            && self.conditions.iter().all(ConditionCheck::passed)
    }

    pub fn failures(&self) -> Vec<String> {
        let mut v: Vec<String> = self.adjacency.iter().chain(&self.alignment).chain(&self.profile).cloned().collect();
        v.extend(
            self.conditions
                .iter()
                .filter(|c| !c.passed())
                .map(|c| format!("{}: {} != {} (residual {:.3e})", c.label, c.value, c.target, c.residual())),
        );
        v
    }

    fn merge(&mut self, other: ValidationReport) {
        self.adjacency.extend(other.adjacency);
        self.alignment.extend(other.alignment);
        self.profile.extend(other.profile);
        self.conditions.extend(other.conditions);
    }
}

fn structural_checks(schedule: &PulseSchedule, graph: &QubitGraph, report: &mut ValidationReport) {
    let live: Vec<&PulsePlacement> = schedule.placements.iter().filter(|p| !p.shape.is_zero()).collect();
    for p in &live {
        let d = p.shape.duration;
        if (d - d.round()).abs() > 1e-12 || !(d.round() == 1.0 || d.round() == 2.0) {
            report.alignment.push(format!("qubit {} slot {}: duration {d} is not 1 or 2 τ_p", p.qubit, p.start));
        }
        if p.end() > schedule.total_slots {
            report.alignment.push(format!("qubit {} slot {}: pulse runs past the schedule end", p.qubit, p.start));
        }
        if !graph.contains(p.qubit) {
            report.alignment.push(format!("pulse on unknown qubit {}", p.qubit));
        }
    }
    for (k, p) in live.iter().enumerate() {
        for q in &live[k + 1..] {
            let overlap = p.start < q.end() && q.start < p.end();
            if !overlap {
                continue;
            }
            if p.qubit == q.qubit {
                report.alignment.push(format!("overlapping pulses on qubit {} at slots {} and {}", p.qubit, p.start, q.start));
            } else if graph.are_adjacent(p.qubit, q.qubit) {
                report.adjacency.push(format!(
                    "neighbors {} and {} pulsed simultaneously (slots {} and {})",
                    p.qubit, q.qubit, p.start, q.start
                ));
            }
        }
    }
}

fn toggling_checks(profile: &TogglingProfile, graph: &QubitGraph, targets: &DecouplingTargets, offset: usize) -> Vec<ConditionCheck> {
    let zero = Rational64::from_integer(0);
    let mut out = Vec::new();
    for q in 1..=graph.n_qubits() {
        out.push(ConditionCheck { label: format!("<s_{q}> @{offset}"), value: profile.average(q), target: zero });
    }
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    let coupled: HashSet<_> = targets.coupled.iter().map(|&(a, b)| key(a, b)).collect();
    for e in graph.edges() {
        let target = if coupled.contains(&(e.i, e.j)) { targets.f } else { zero };
        out.push(ConditionCheck {
            label: format!("<s_{} s_{}> @{offset}", e.i, e.j),
            value: profile.correlation(e.i, e.j),
            target,
        });
    }
    out
}

/// Checks adjacency, slot alignment and the toggling conditions of the whole
/// schedule against `targets`.
pub fn validate_schedule(schedule: &PulseSchedule, graph: &QubitGraph, targets: &DecouplingTargets) -> ValidationReport {
    let mut report = ValidationReport::default();
    structural_checks(schedule, graph, &mut report);
    match toggling_profile(schedule, graph.n_qubits()) {
        Ok(p) => report.conditions = toggling_checks(&p, graph, targets, 0),
        Err(e) => report.profile.push(e.to_string()),
    }
    report
}

/// Validates each recorded 16-slot window against its own contract.
pub fn validate_windows(schedule: &PulseSchedule, graph: &QubitGraph) -> ValidationReport {
    let mut report = ValidationReport::default();
    structural_checks(schedule, graph, &mut report);
    let profile = match toggling_profile(schedule, graph.n_qubits()) {
        Ok(p) => p,
        Err(e) => {
            report.profile.push(e.to_string());
            return report;
        }
    };
    let mut covered = 0;
    for w in &schedule.windows {
        if w.start + WINDOW_SLOTS > schedule.total_slots {
            report.alignment.push(format!("window at slot {} runs past the schedule end", w.start));
            continue;
        }
        let targets = DecouplingTargets::coupled(&w.coupled, Rational64::new(1, 2));
        let mut sub = ValidationReport::default();
        sub.conditions = toggling_checks(&profile.window(w.start, WINDOW_SLOTS), graph, &targets, w.start);
        report.merge(sub);
        covered += WINDOW_SLOTS;
    }
    if covered != schedule.total_slots {
        report.alignment.push(format!("windows cover {covered} of {} slots", schedule.total_slots));
    }
    report
}

/// Exact propagator of the Ising network under the schedule with every π
/// pulse replaced by an instantaneous flip at its midpoint.
pub fn delta_pulse_propagator(schedule: &PulseSchedule, graph: &QubitGraph) -> Result<DMatrix<Complex64>> {
    let dim = graph.dim();
    let mut flips: Vec<Vec<&PulsePlacement>> = vec![Vec::new(); 2 * schedule.total_slots + 1];
    for p in &schedule.placements {
        if p.shape.is_zero() {
            continue;
        }
        if p.role != PulseRole::Decoupling || p.axis == Axis::Z || (p.shape.nominal_angle.abs() - PI).abs() > 1e-12 {
            return Err(Error::Profile(format!("qubit {} slot {}: not an x/y π pulse", p.qubit, p.start)));
        }
        flips[2 * p.start + p.slots()].push(p);
    }
    let energy: Vec<f64> = (0..dim)
        .map(|b| 0.5 * graph.edges().iter().map(|e| e.coupling * z_sign(b, e.i) * z_sign(b, e.j)).sum::<f64>())
        .collect();
    let half_phase: Vec<Complex64> = energy.iter().map(|e| Complex64::from_polar(1.0, -0.5 * e)).collect();
    let mut u = DMatrix::<Complex64>::identity(dim, dim);
    for (h, fl) in flips.iter().enumerate() {
        for p in fl {
            let bit = 1usize << (p.qubit - 1);
            let mut next = u.clone();
            for b in 0..dim {
                // (−i σ) for a +π pulse about x or y
                let c = match p.axis {
                    Axis::X => Complex64::new(0.0, -1.0),
                    _ => {
                        if b & bit == 0 {
                            Complex64::new(-1.0, 0.0)
                        } else {
                            Complex64::new(1.0, 0.0)
                        }
                    }
                } * p.sign as f64;
                for col in 0..dim {
                    next[(b, col)] = c * u[(b ^ bit, col)];
                }
            }
            u = next;
        }
        if h < 2 * schedule.total_slots {
            for b in 0..dim {
                for col in 0..dim {
                    u[(b, col)] *= half_phase[b];
                }
            }
        }
    }
    Ok(u)
}
