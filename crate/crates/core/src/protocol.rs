//! End-to-end protected-memory runs: encode on the star network, repeat
//! syndrome-extraction cycles, decode, and track fidelities throughout.
//!
//! Four modes share one compiled schedule and, within a realization, one
//! noise trace:
//! * `Zeno` — every measurement is replaced by postselection on outcome 0,
//!   without renormalization;
//! * `Qec` — outcomes are sampled, the ancilla is reset, and corrections are
//!   applied after a trigger window has gathered all four syndrome bits;
//! * `DdOnly` — the same pulses with the measurements dropped;
//! * `Free` — no pulses at all; encoding and decoding are ideal and instantaneous.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code513::{self, SyndromeTable, CENTER};
use crate::error::{Error, Result};
pub use crate::evolution::fidelity;
use crate::evolution::{
    outcome_probability, project, reset_ancilla, sample_outcome, single_qubit_fidelity, Frame,
    ProjectionMode, Projector, Propagator, ReducedEvolution,
};
use crate::gates::{apply_ideal, compile_with_spans, Circuit, CompileOptions, Layer, LayerSpan};
use crate::network::{design_coupling, star_graph, QubitGraph};
use crate::noise::{derive_seed, sample_composite, NoiseSpec, NoiseTrace};
use crate::sequences::{Axis, PulseSchedule, ZMode};
use crate::shapes::ShapeLibrary;

/// `F(V,V₀) + Σ_E F(V, E·V₀)` over the fifteen weight-1 errors on the data qubits.
pub fn recovery_fidelity(v: &ReducedEvolution, v0: &ReducedEvolution) -> f64 {
    let mut f = fidelity(v, v0);
    for e in code513::recovery_errors() {
        let mut w = v0.clone();
        e.apply(&mut w);
        f += fidelity(v, &w);
    }
    f
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Zeno,
    Qec,
    DdOnly,
    Free,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Zeno => "zeno",
            Mode::Qec => "qec",
            Mode::DdOnly => "dd_only",
            Mode::Free => "free",
        }
    }
}

/// One Gaussian component of the dephasing field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseComponent {
    pub sigma: f64,
    pub tau_n: f64,
}

/// Instantaneous Pauli error applied at the start of `slot`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fault {
    pub slot: usize,
    pub qubit: usize,
    pub axis: Axis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default)]
    pub noise: Vec<NoiseComponent>,
    #[serde(default = "default_cycles")]
    pub n_cycles: usize,
    #[serde(default = "default_n_rep")]
    pub n_rep: usize,
    #[serde(default = "default_steps")]
    pub steps_per_tau_p: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub z_mode: ZMode,
    /// Noise sampling step; the finest component's default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub faults: Vec<Fault>,
}

fn default_cycles() -> usize {
    3
}

fn default_n_rep() -> usize {
    5
}

fn default_steps() -> usize {
    1024
}

impl RunConfig {
    pub fn new(mode: Mode, noise: Vec<NoiseComponent>, n_cycles: usize, seed: u64) -> Self {
        Self {
            mode,
            noise,
            n_cycles,
            n_rep: default_n_rep(),
            steps_per_tau_p: default_steps(),
            seed,
            z_mode: ZMode::default(),
            noise_dt: None,
            faults: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rep == 0 {
            return Err(Error::Config("n_rep must be positive".into()));
        }
        if self.steps_per_tau_p == 0 || !self.steps_per_tau_p.is_power_of_two() {
            return Err(Error::Config(format!("steps_per_tau_p must be a power of two, got {}", self.steps_per_tau_p)));
        }
        for c in &self.noise {
            NoiseSpec::new(c.sigma, c.tau_n, 0).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(dt) = self.noise_dt {
            if !(dt > 0.0) {
                return Err(Error::Config(format!("noise_dt must be positive, got {dt}")));
            }
        }
        for f in &self.faults {
            if f.qubit == 0 || f.qubit > CENTER {
                return Err(Error::Config(format!("fault on unknown qubit {}", f.qubit)));
            }
        }
        Ok(())
    }

    fn noise_specs(&self, realization: u64) -> Vec<NoiseSpec> {
        let base = derive_seed(self.seed, realization);
        self.noise
            .iter()
            .enumerate()
            .map(|(i, c)| NoiseSpec { sigma: c.sigma, tau_n: c.tau_n, seed: derive_seed(base, 1 + i as u64) })
            .collect()
    }

    fn outcome_rng(&self, realization: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(self.seed, realization), 0))
    }

    fn noise_dt(&self) -> f64 {
        self.noise_dt.unwrap_or_else(|| {
            self.noise
                .iter()
                .map(|c| NoiseSpec { sigma: c.sigma, tau_n: c.tau_n, seed: 0 }.default_dt())
                .fold(1.0 / 16.0, f64::min)
        })
    }
}

/// Everything observed at one measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub index: usize,
    pub t: f64,
    pub generator: Option<usize>,
    pub f_b: f64,
    pub f_a: f64,
    pub fp_b: f64,
    pub fp_a: f64,
    /// Probability of outcome 0 just before the measurement.
    pub p0: f64,
    pub outcome: Option<u8>,
    /// `(1/M) Tr V†V` after the measurement (the cumulative success probability in Zeno mode).
    pub sp: f64,
    /// `F_a / sp`.
    pub f_succ: f64,
    /// Inside a trigger window (from the triggering outcome up to and including the correction).
    pub trigger: bool,
    /// Syndrome corrected right after this record.
    pub correction: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub t: f64,
    pub f_full: f64,
    pub f_single: f64,
    pub sp: f64,
    pub f_succ: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTrace {
    pub mode: Mode,
    pub realization: u64,
    pub records: Vec<Record>,
    pub final_metrics: FinalMetrics,
}

/// Compiled circuit shared by every run with the same gate parameters.
pub struct Setup {
    pub graph: QubitGraph,
    pub circuit: Circuit,
    pub schedule: PulseSchedule,
    pub spans: Vec<LayerSpan>,
    pub table: SyndromeTable,
}

impl Setup {
    pub fn new(n_cycles: usize, n_rep: usize, z_mode: ZMode, lib: &ShapeLibrary) -> Result<Self> {
        let graph = star_graph(5, design_coupling(n_rep))?;
        let mut circuit = code513::star_encoder(n_rep);
        let cycle = code513::measurement_cycle(n_rep);
        for _ in 0..n_cycles {
            circuit.extend(&cycle);
        }
        circuit.extend(&code513::star_decoder(n_rep));
        let (schedule, spans) = compile_with_spans(&circuit, &graph, lib, CompileOptions { z_mode })?;
        Ok(Self { graph, circuit, schedule, spans, table: SyndromeTable::new()? })
    }

    pub fn for_config(cfg: &RunConfig) -> Result<Self> {
        Self::new(cfg.n_cycles, cfg.n_rep, cfg.z_mode, ShapeLibrary::standard())
    }

    pub fn duration(&self) -> f64 {
        self.schedule.total_duration()
    }

    pub fn noise_trace(&self, cfg: &RunConfig, realization: u64) -> Result<NoiseTrace> {
        sample_composite(&cfg.noise_specs(realization), self.graph.n_qubits(), self.duration(), cfg.noise_dt())
    }
}

struct Window {
    syndrome: u8,
    remaining: usize,
}

/// Runs one realization in `mode` on a given noise trace.
pub fn simulate(setup: &Setup, cfg: &RunConfig, mode: Mode, noise: &NoiseTrace, realization: u64) -> Result<MetricsTrace> {
    cfg.validate()?;
    let idle = PulseSchedule { total_slots: setup.schedule.total_slots, ..PulseSchedule::empty("free") };
    let schedule = if mode == Mode::Free { &idle } else { &setup.schedule };
    let prop = Propagator::new(&setup.graph, schedule, Some(noise), cfg.steps_per_tau_p, Frame::Interaction)?;
    let mut rng = cfg.outcome_rng(realization);
    let input = code513::star_input_block();
    let mut v = input.clone();
    let mut ideal = input.clone();
    let mut faults = cfg.faults.clone();
    faults.sort_by_key(|f| f.slot);
    let mut faults = faults.into_iter().peekable();
    let mut records = Vec::new();
    let mut window: Option<Window> = None;
    let encoder_layers = code513::star_encoder(cfg.n_rep).layers.len();
    let decoder_start = setup.circuit.layers.len() - code513::star_decoder(cfg.n_rep).layers.len();

    if mode == Mode::Free {
        for layer in &setup.circuit.layers[..encoder_layers] {
            apply_layer(&mut v, layer);
        }
    }
    for (layer, span) in setup.circuit.layers.iter().zip(&setup.spans) {
        // pulses (or free evolution) through this layer, with faults on the way
        while let Some(f) = faults.next_if(|f| f.slot < span.end || (f.slot == span.start && span.start == span.end)) {
            prop.advance_to(&mut v, (f.slot.max(span.start)) as f64)?;
            v.apply_pauli(f.qubit, f.axis);
        }
        prop.advance_to(&mut v, span.end as f64)?;
        apply_layer(&mut ideal, layer);
        let Layer::Measure { qubit, label } = layer else { continue };
        let f_b = fidelity(&v, &ideal);
        let fp_b = recovery_fidelity(&v, &ideal);
        let p0 = outcome_probability(&v, Projector { qubit: *qubit, outcome: 0 });
        let p_total = p0 + outcome_probability(&v, Projector { qubit: *qubit, outcome: 1 });
        let mut outcome = None;
        let mut trigger = window.is_some();
        let mut correction = None;
        match mode {
            Mode::Zeno => {
                project(&mut v, Projector { qubit: *qubit, outcome: 0 }, ProjectionMode::Postselect)?;
                reset_ancilla(&mut v, *qubit)?;
                outcome = Some(0);
            }
            Mode::Qec => {
                let o = sample_outcome(&mut v, *qubit, &mut rng)?;
                reset_ancilla(&mut v, *qubit)?;
                outcome = Some(o);
                let g = label.ok_or_else(|| Error::Usage("unlabeled measurement in a QEC run".into()))?;
                match window.as_mut() {
                    Some(w) => {
                        w.syndrome |= o << g;
                        w.remaining -= 1;
                    }
                    None if o == 1 => {
                        window = Some(Window { syndrome: 1 << g, remaining: 3 });
                        trigger = true;
                    }
                    None => {}
                }
            }
            Mode::DdOnly | Mode::Free => {}
        }
        let f_a = fidelity(&v, &ideal);
        let fp_a = recovery_fidelity(&v, &ideal);
        let sp = v.norm();
        if window.as_ref().is_some_and(|w| w.remaining == 0) {
            let s = window.take().unwrap().syndrome;
            setup.table.correction(s).apply(&mut v);
            correction = Some(s);
        }
        records.push(Record {
            index: records.len(),
            t: span.end as f64,
            generator: *label,
            f_b,
            f_a,
            fp_b,
            fp_a,
            p0: if p_total > 0.0 { p0 / p_total } else { f64::NAN },
            outcome,
            sp,
            f_succ: if sp > 0.0 { f_a / sp } else { f64::NAN },
            trigger,
            correction,
        });
    }
    if mode == Mode::Free {
        for layer in &setup.circuit.layers[decoder_start..] {
            apply_layer(&mut v, layer);
        }
    }
    let sp = v.norm();
    let f_full = fidelity(&v, &ideal);
    let final_metrics = FinalMetrics {
        t: setup.duration(),
        f_full,
        f_single: single_qubit_fidelity(&v, &ideal, CENTER) / if mode == Mode::Zeno && sp > 0.0 { sp } else { 1.0 },
        sp,
        f_succ: if sp > 0.0 { f_full / sp } else { f64::NAN },
    };
    Ok(MetricsTrace { mode, realization, records, final_metrics })
}

fn apply_layer(v: &mut ReducedEvolution, layer: &Layer) {
    if let Layer::Gates(gs) = layer {
        for g in gs {
            apply_ideal(v, g);
        }
    }
}

/// One realization of `cfg.mode` plus its baselines on the same noise:
/// DD-only for QEC and Zeno, and the unprotected run for Zeno.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationResult {
    pub main: MetricsTrace,
    pub dd_only: Option<MetricsTrace>,
    pub free: Option<MetricsTrace>,
}

pub fn run_realization(setup: &Setup, cfg: &RunConfig, realization: u64) -> Result<RealizationResult> {
    let noise = setup.noise_trace(cfg, realization)?;
    let main = simulate(setup, cfg, cfg.mode, &noise, realization)?;
    let dd_only = match cfg.mode {
        Mode::Zeno | Mode::Qec => Some(simulate(setup, cfg, Mode::DdOnly, &noise, realization)?),
        _ => None,
    };
    let free = match cfg.mode {
        Mode::Zeno => Some(simulate(setup, cfg, Mode::Free, &noise, realization)?),
        _ => None,
    };
    Ok(RealizationResult { main, dd_only, free })
}

/// Single run of `cfg.mode` for realization 0.
pub fn run(cfg: &RunConfig) -> Result<MetricsTrace> {
    let setup = Setup::for_config(cfg)?;
    let noise = setup.noise_trace(cfg, 0)?;
    simulate(&setup, cfg, cfg.mode, &noise, 0)
}

pub fn run_zeno(cfg: &RunConfig) -> Result<MetricsTrace> {
    if cfg.mode != Mode::Zeno {
        return Err(Error::Config(format!("run_zeno called with mode {}", cfg.mode.name())));
    }
    run(cfg)
}

pub fn run_qec(cfg: &RunConfig) -> Result<MetricsTrace> {
    if cfg.mode != Mode::Qec {
        return Err(Error::Config(format!("run_qec called with mode {}", cfg.mode.name())));
    }
    run(cfg)
}

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Stat {
        let n = xs.len();
        if n == 0 {
            return Stat { mean: f64::NAN, stderr: f64::NAN, count: 0 };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / ((n - 1) * n) as f64).sqrt()
        } else {
            0.0
        };
        Stat { mean, stderr, count: n }
    }
}

/// Pointwise averages over realizations, indexed by measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub t: Vec<f64>,
    pub f_b: Vec<Stat>,
    pub f_a: Vec<Stat>,
    pub fp_b: Vec<Stat>,
    pub fp_a: Vec<Stat>,
    pub sp: Vec<Stat>,
    pub f_succ: Vec<Stat>,
    pub f_full: Stat,
    pub f_single: Stat,
    pub final_sp: Stat,
    pub final_f_succ: Stat,
}

impl TraceSummary {
    pub fn from_traces(traces: &[&MetricsTrace], exclusion: bool) -> Result<TraceSummary> {
        let n_rec = traces.first().map_or(0, |t| t.records.len());
        if traces.iter().any(|t| t.records.len() != n_rec) {
            return Err(Error::Usage("traces with different record counts".into()));
        }
        let col = |i: usize, f: fn(&Record) -> f64| -> Stat {
            let xs: Vec<f64> =
                traces.iter().map(|t| &t.records[i]).filter(|r| !(exclusion && r.trigger)).map(f).collect();
            Stat::of(&xs)
        };
        let fin = |f: fn(&FinalMetrics) -> f64| Stat::of(&traces.iter().map(|t| f(&t.final_metrics)).collect::<Vec<_>>());
        Ok(TraceSummary {
            t: (0..n_rec).map(|i| traces[0].records[i].t).collect(),
            f_b: (0..n_rec).map(|i| col(i, |r| r.f_b)).collect(),
            f_a: (0..n_rec).map(|i| col(i, |r| r.f_a)).collect(),
            fp_b: (0..n_rec).map(|i| col(i, |r| r.fp_b)).collect(),
            fp_a: (0..n_rec).map(|i| col(i, |r| r.fp_a)).collect(),
            sp: (0..n_rec).map(|i| col(i, |r| r.sp)).collect(),
            f_succ: (0..n_rec).map(|i| col(i, |r| r.f_succ)).collect(),
            f_full: fin(|f| f.f_full),
            f_single: fin(|f| f.f_single),
            final_sp: fin(|f| f.sp),
            final_f_succ: fin(|f| f.f_succ),
        })
    }

    /// Mean of `1 − F_a` (right after each projection) over all measurements;
    /// points where every realization was excluded are skipped.
    pub fn mean_infidelity(&self) -> f64 {
        mean_of(self.f_a.iter().map(|s| 1.0 - s.mean))
    }

    /// Mean of `1 − F′_a` over all measurements.
    pub fn mean_recovery_infidelity(&self) -> f64 {
        mean_of(self.fp_a.iter().map(|s| 1.0 - s.mean))
    }
}

fn mean_of(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.filter(|x| x.is_finite()).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub config: RunConfig,
    pub exclusion: bool,
    pub realizations: Vec<RealizationResult>,
    pub main: TraceSummary,
    pub dd_only: Option<TraceSummary>,
    pub free: Option<TraceSummary>,
}

impl EnsembleResult {
    /// `(1 − F_single,DD) / (1 − F_single)` at the end of decoding.
    pub fn single_qubit_ratio(&self) -> Option<f64> {
        let dd = self.dd_only.as_ref()?;
        Some((1.0 - dd.f_single.mean) / (1.0 - self.main.f_single.mean))
    }

    pub fn write_records_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.realizations {
            for tr in std::iter::once(&r.main).chain(&r.dd_only).chain(&r.free) {
                for rec in &tr.records {
                    out.serialize(RecordRow::new(tr, rec)).map_err(csv_err)?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let series = std::iter::once((self.config.mode, &self.main))
            .chain(self.dd_only.iter().map(|s| (Mode::DdOnly, s)))
            .chain(self.free.iter().map(|s| (Mode::Free, s)));
        for (mode, s) in series {
            for i in 0..s.t.len() {
                out.serialize(SummaryRow {
                    mode: mode.name(),
                    index: i.to_string(),
                    t: s.t[i],
                    f_b: s.f_b[i].mean,
                    f_b_se: s.f_b[i].stderr,
                    f_a: s.f_a[i].mean,
                    f_a_se: s.f_a[i].stderr,
                    fp_b: s.fp_b[i].mean,
                    fp_b_se: s.fp_b[i].stderr,
                    fp_a: s.fp_a[i].mean,
                    fp_a_se: s.fp_a[i].stderr,
                    sp: s.sp[i].mean,
                    f_succ: s.f_succ[i].mean,
                    count: s.f_b[i].count,
                })
                .map_err(csv_err)?;
            }
            let t_end = s.t.last().copied().unwrap_or(0.0).max(self.realizations[0].main.final_metrics.t);
            out.serialize(SummaryRow {
                mode: mode.name(),
                index: "final".into(),
                t: t_end,
                f_b: s.f_full.mean,
                f_b_se: s.f_full.stderr,
                f_a: s.f_single.mean,
                f_a_se: s.f_single.stderr,
                fp_b: f64::NAN,
                fp_b_se: f64::NAN,
                fp_a: f64::NAN,
                fp_a_se: f64::NAN,
                sp: s.final_sp.mean,
                f_succ: s.final_f_succ.mean,
                count: s.f_full.count,
            })
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

#[derive(Serialize)]
struct RecordRow {
    realization: u64,
    #[serde(rename = "t/tau_p")]
    t: f64,
    kind: &'static str,
    generator: Option<usize>,
    #[serde(rename = "F_b")]
    f_b: f64,
    #[serde(rename = "F_a")]
    f_a: f64,
    #[serde(rename = "Fp_b")]
    fp_b: f64,
    #[serde(rename = "Fp_a")]
    fp_a: f64,
    p0: f64,
    outcome: Option<u8>,
    sp: f64,
    f_succ: f64,
    trigger: u8,
}

impl RecordRow {
    fn new(tr: &MetricsTrace, r: &Record) -> Self {
        Self {
            realization: tr.realization,
            t: r.t,
            kind: tr.mode.name(),
            generator: r.generator.map(|g| g + 1),
            f_b: r.f_b,
            f_a: r.f_a,
            fp_b: r.fp_b,
            fp_a: r.fp_a,
            p0: r.p0,
            outcome: r.outcome,
            sp: r.sp,
            f_succ: r.f_succ,
            trigger: u8::from(r.trigger),
        }
    }
}

/// For the `final` row, `F_b` holds the full-block fidelity and `F_a` the single-qubit one.
#[derive(Serialize)]
struct SummaryRow {
    mode: &'static str,
    index: String,
    #[serde(rename = "t/tau_p")]
    t: f64,
    #[serde(rename = "F_b")]
    f_b: f64,
    #[serde(rename = "F_b_se")]
    f_b_se: f64,
    #[serde(rename = "F_a")]
    f_a: f64,
    #[serde(rename = "F_a_se")]
    f_a_se: f64,
    #[serde(rename = "Fp_b")]
    fp_b: f64,
    #[serde(rename = "Fp_b_se")]
    fp_b_se: f64,
    #[serde(rename = "Fp_a")]
    fp_a: f64,
    #[serde(rename = "Fp_a_se")]
    fp_a_se: f64,
    sp: f64,
    f_succ: f64,
    count: usize,
}

/// Runs realizations `0..n` on the current rayon pool and averages them.
pub fn run_ensemble(cfg: &RunConfig, n_realizations: usize, exclusion: bool) -> Result<EnsembleResult> {
    if n_realizations == 0 {
        return Err(Error::Config("need at least one realization".into()));
    }
    cfg.validate()?;
    let setup = Setup::for_config(cfg)?;
    let realizations = (0..n_realizations as u64)
        .into_par_iter()
        .map(|r| run_realization(&setup, cfg, r))
        .collect::<Result<Vec<_>>>()?;
    summarize(cfg.clone(), realizations, exclusion)
}

pub fn summarize(config: RunConfig, realizations: Vec<RealizationResult>, exclusion: bool) -> Result<EnsembleResult> {
    let main = TraceSummary::from_traces(&realizations.iter().map(|r| &r.main).collect::<Vec<_>>(), exclusion)?;
    let companion = |pick: fn(&RealizationResult) -> Option<&MetricsTrace>| -> Result<Option<TraceSummary>> {
        let v: Option<Vec<&MetricsTrace>> = realizations.iter().map(pick).collect();
        v.map(|v| TraceSummary::from_traces(&v, false)).transpose()
    };
    let dd_only = companion(|r| r.dd_only.as_ref())?;
    let free = companion(|r| r.free.as_ref())?;
    Ok(EnsembleResult { config, exclusion, realizations, main, dd_only, free })
}
