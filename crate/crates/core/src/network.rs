//! Coupling graphs and matrix-free application of the network Hamiltonian.

use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::noise::NoiseTrace;
use crate::sequences::{Axis, PulseSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sublattice {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub coupling: f64,
}

/// Bipartite Ising network. Qubits are numbered from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitGraph {
    n: usize,
    edges: Vec<Edge>,
    sublattice: Vec<Sublattice>,
    neighbors: Vec<Vec<usize>>,
}

/// Coupling satisfying `n_rep · J · τ_p = π/16`.
pub fn design_coupling(n_rep: usize) -> f64 {
    PI / (16.0 * n_rep as f64)
}

/// Star with leaves `1..=n_leaves` on sublattice A and the center `n_leaves + 1` on B.
pub fn star_graph(n_leaves: usize, coupling: f64) -> Result<QubitGraph> {
    if n_leaves == 0 {
        return Err(Error::Parameter("star graph needs at least one leaf".into()));
    }
    let center = n_leaves + 1;
    let edges: Vec<_> = (1..=n_leaves).map(|l| (l, center, coupling)).collect();
    QubitGraph::new(center, &edges)
}

impl QubitGraph {
    /// Builds a graph from `(i, j, J_ij)` triples, assigning sublattices by
    /// breadth-first two-coloring (the lowest-numbered qubit of each component
    /// goes to A). Odd cycles are rejected.
    pub fn new(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::Graph("graph must have at least one qubit".into()));
        }
        let mut neighbors = vec![Vec::new(); n];
        let mut list = Vec::with_capacity(edges.len());
        for &(i, j, c) in edges {
            if i == 0 || j == 0 || i > n || j > n {
                return Err(Error::Graph(format!("edge ({i},{j}) outside qubits 1..={n}")));
            }
            if i == j {
                return Err(Error::Graph(format!("self-loop on qubit {i}")));
            }
            if neighbors[i - 1].contains(&j) {
                return Err(Error::Graph(format!("duplicate edge ({i},{j})")));
            }
            if !c.is_finite() {
                return Err(Error::Graph(format!("non-finite coupling on ({i},{j})")));
            }
            neighbors[i - 1].push(j);
            neighbors[j - 1].push(i);
            list.push(Edge { i: i.min(j), j: i.max(j), coupling: c });
        }
        let mut color: Vec<Option<Sublattice>> = vec![None; n];
        for root in 0..n {
            if color[root].is_some() {
                continue;
            }
            color[root] = Some(Sublattice::A);
            let mut queue = VecDeque::from([root]);
            while let Some(q) = queue.pop_front() {
                let c = color[q].unwrap();
                let other = if c == Sublattice::A { Sublattice::B } else { Sublattice::A };
                for &nb in &neighbors[q] {
                    match color[nb - 1] {
                        None => {
                            color[nb - 1] = Some(other);
                            queue.push_back(nb - 1);
                        }
                        Some(x) if x == c => {
                            return Err(Error::Graph(format!(
                                "odd cycle through qubits {} and {nb}: graph is not bipartite",
                                q + 1
                            )))
                        }
                        _ => {}
                    }
                }
            }
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        Ok(Self { n, edges: list, sublattice: color.into_iter().map(Option::unwrap).collect(), neighbors })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn sublattice(&self, q: usize) -> Sublattice {
        self.sublattice[q - 1]
    }

    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.neighbors[q - 1]
    }

    pub fn degree(&self, q: usize) -> usize {
        self.neighbors[q - 1].len()
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        a >= 1 && a <= self.n && self.neighbors[a - 1].binary_search(&b).is_ok()
    }

    pub fn contains(&self, q: usize) -> bool {
        q >= 1 && q <= self.n
    }

    pub fn coupling(&self, a: usize, b: usize) -> Option<f64> {
        let (i, j) = (a.min(b), a.max(b));
        self.edges.iter().find(|e| e.i == i && e.j == j).map(|e| e.coupling)
    }

    /// Common coupling if every edge carries the same `J`.
    pub fn uniform_coupling(&self) -> Option<f64> {
        let first = self.edges.first()?.coupling;
        self.edges.iter().all(|e| e.coupling == first).then_some(first)
    }

    pub fn is_independent(&self, qubits: &[usize]) -> bool {
        qubits.iter().enumerate().all(|(k, &a)| qubits[k + 1..].iter().all(|&b| a != b && !self.are_adjacent(a, b)))
    }
}

/// `z_q(b) = ±1` for basis index `b`.
#[inline]
pub(crate) fn z_sign(b: usize, q: usize) -> f64 {
    if b >> (q - 1) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Everything needed to evaluate `H(t)` in the lab frame.
#[derive(Clone, Copy)]
pub struct HamiltonianContext<'a> {
    pub graph: &'a QubitGraph,
    pub noise: Option<&'a NoiseTrace>,
    pub schedule: &'a PulseSchedule,
}

impl<'a> HamiltonianContext<'a> {
    pub fn new(graph: &'a QubitGraph, noise: Option<&'a NoiseTrace>, schedule: &'a PulseSchedule) -> Result<Self> {
        if let Some(tr) = noise {
            if tr.n_qubits() != graph.n_qubits() {
                return Err(Error::Parameter(format!(
                    "noise trace has {} qubits, graph has {}",
                    tr.n_qubits(),
                    graph.n_qubits()
                )));
            }
            if tr.duration() + 1e-9 < schedule.total_duration() {
                return Err(Error::Parameter(format!(
                    "noise trace covers {} τ_p, schedule lasts {}",
                    tr.duration(),
                    schedule.total_duration()
                )));
            }
        }
        Ok(Self { graph, noise, schedule })
    }

    fn field(&self, q: usize, t: f64) -> f64 {
        self.noise.map_or(0.0, |tr| tr.value(q, t))
    }
}

/// Computes `H(t)·cols` for a column-major `2ⁿ × M` block, term by term.
pub fn hamiltonian_apply(ctx: &HamiltonianContext, t: f64, cols: &[Complex64]) -> Result<Vec<Complex64>> {
    let g = ctx.graph;
    let dim = g.dim();
    if cols.len() % dim != 0 {
        return Err(Error::Parameter(format!("column block length {} is not a multiple of {dim}", cols.len())));
    }
    if t < 0.0 || t > ctx.schedule.total_duration() + 1e-12 {
        return Err(Error::Parameter(format!("t = {t} outside schedule support")));
    }
    let active = ctx.schedule.amplitudes_at(t);
    for (k, a) in active.iter().enumerate() {
        for b in &active[k + 1..] {
            if g.are_adjacent(a.0, b.0) {
                return Err(Error::Schedule(format!("qubits {} and {} pulsed simultaneously at t = {t}", a.0, b.0)));
            }
        }
    }
    let fields: Vec<f64> = (1..=g.n_qubits()).map(|q| ctx.field(q, t)).collect();
    let diag: Vec<f64> = (0..dim)
        .map(|b| {
            let mut d = 0.0;
            for e in g.edges() {
                d += e.coupling * z_sign(b, e.i) * z_sign(b, e.j);
            }
            for (q, a) in fields.iter().enumerate() {
                d += a * z_sign(b, q + 1);
            }
            0.5 * d
        })
        .collect();
    let mut out = vec![Complex64::new(0.0, 0.0); cols.len()];
    for (c, o) in cols.chunks(dim).zip(out.chunks_mut(dim)) {
        for b in 0..dim {
            o[b] = c[b] * diag[b];
        }
        for &(q, axis, v) in &active {
            let bit = 1usize << (q - 1);
            let half = 0.5 * v;
            for b in 0..dim {
                let src = c[b ^ bit];
                let up = b & bit == 0;
                o[b] += half
                    * match axis {
                        Axis::X => src,
                        Axis::Y => {
                            if up {
                                Complex64::new(src.im, -src.re)
                            } else {
                                Complex64::new(-src.im, src.re)
                            }
                        }
                        Axis::Z => {
                            let s = c[b];
                            if up {
                                s
                            } else {
                                -s
                            }
                        }
                    };
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_graph_shape() {
        let g = star_graph(5, design_coupling(5)).unwrap();
        assert_eq!(g.n_qubits(), 6);
        assert_eq!(g.edges().len(), 5);
        assert_eq!(g.max_degree(), 5);
        assert_eq!(g.degree(6), 5);
        assert_eq!(g.sublattice(6), Sublattice::B);
        assert!((1..=5).all(|l| g.sublattice(l) == Sublattice::A));
        assert!((g.uniform_coupling().unwrap() - PI / 80.0).abs() < 1e-15);
        let chain = star_graph(1, 0.1).unwrap();
        assert_eq!(chain.n_qubits(), 2);
        assert!(chain.are_adjacent(1, 2));
        assert!(star_graph(0, 0.1).is_err());
    }

    #[test]
    fn odd_cycle_rejected() {
        let err = QubitGraph::new(3, &[(1, 2, 1.0), (2, 3, 1.0), (3, 1, 1.0)]).unwrap_err();
        assert!(matches!(err, Error::Graph(_)));
        assert!(QubitGraph::new(4, &[(1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 1, 1.0)]).is_ok());
    }

    #[test]
    fn independence() {
        let g = star_graph(5, 1.0).unwrap();
        assert!(g.is_independent(&[1, 3, 5]));
        assert!(!g.is_independent(&[1, 6]));
        assert!(!g.is_independent(&[2, 2]));
    }
}
