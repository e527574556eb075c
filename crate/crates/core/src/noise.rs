//! Classical dephasing fields: stationary zero-mean Gaussian processes with a
//! Gaussian autocorrelation `σ² exp(-Δt²/τ_n²)`.
//!
//! Traces are synthesized by circulant embedding: the target covariance is
//! laid out on a periodic grid long enough that wrap-around correlations
//! vanish, its spectrum is obtained by one FFT, and white complex noise shaped
//! by the square root of that spectrum is transformed back. The real part of
//! the result has exactly the target covariance on the grid.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Amplitude, correlation time and seed of one Gaussian noise component.
/// Times are in units of the nominal pulse length, amplitudes in its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub tau_n: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, tau_n: f64, seed: u64) -> Result<Self> {
        let spec = Self { sigma, tau_n, seed };
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::Parameter(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.tau_n > 0.0) || !self.tau_n.is_finite() {
            return Err(Error::Parameter(format!("tau_n must be > 0, got {}", self.tau_n)));
        }
        Ok(())
    }

    /// Asymptotic dephasing rate of an uncontrolled qubit, `(√π/2) σ² τ_n`.
    pub fn dephasing_rate(&self) -> f64 {
        0.5 * std::f64::consts::PI.sqrt() * self.sigma * self.sigma * self.tau_n
    }

    pub fn covariance(&self, lag: f64) -> f64 {
        self.sigma * self.sigma * (-(lag * lag) / (self.tau_n * self.tau_n)).exp()
    }

    /// Default sampling step: about `τ_n/64`, rounded down to a power-of-two
    /// fraction of the pulse length, never coarser than `1/16`.
    pub fn default_dt(&self) -> f64 {
        let mut dt = 1.0 / 16.0;
        while dt > self.tau_n / 64.0 && dt > 1.0 / 4096.0 {
            dt *= 0.5;
        }
        dt
    }
}

/// Field values `A_i(t_k)` for every qubit on a uniform grid starting at `t=0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrace {
    dt: f64,
    n_samples: usize,
    samples: Vec<Vec<f64>>,
}

impl NoiseTrace {
    /// All-zero trace covering `duration`.
    pub fn zeros(n_qubits: usize, duration: f64, dt: f64) -> Result<Self> {
        let n_samples = sample_count(duration, dt)?;
        Ok(Self { dt, n_samples, samples: vec![vec![0.0; n_samples]; n_qubits] })
    }

    pub fn from_samples(dt: f64, samples: Vec<Vec<f64>>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Parameter("trace dt must be positive".into()));
        }
        let n_samples = samples.first().map_or(0, Vec::len);
        if samples.iter().any(|s| s.len() != n_samples) {
            return Err(Error::Parameter("ragged trace".into()));
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("non-finite trace value".into()));
        }
        Ok(Self { dt, n_samples, samples })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_qubits(&self) -> usize {
        self.samples.len()
    }

    /// Time covered by the grid.
    pub fn duration(&self) -> f64 {
        self.n_samples.saturating_sub(1) as f64 * self.dt
    }

    /// Samples for qubit `q` (1-based).
    pub fn samples(&self, q: usize) -> &[f64] {
        &self.samples[q - 1]
    }

    /// Field on qubit `q` (1-based) at time `t`, linearly interpolated between
    /// grid points. Times past the end of the grid hold the last value.
    #[inline]
    pub fn value(&self, q: usize, t: f64) -> f64 {
        let s = &self.samples[q - 1];
        let x = t / self.dt;
        let k = x.floor();
        if k < 0.0 {
            return s[0];
        }
        let k = k as usize;
        if k + 1 >= s.len() {
            return s[s.len() - 1];
        }
        let w = x - k as f64;
        s[k] + w * (s[k + 1] - s[k])
    }

    /// Exact integral of the interpolated field over `[t0, t1]`.
    pub fn integral(&self, q: usize, t0: f64, t1: f64) -> f64 {
        if t1 <= t0 {
            return 0.0;
        }
        // split at grid points; the interpolant is linear in between
        let mut acc = 0.0;
        let mut k = (t0 / self.dt).floor().max(0.0) as usize;
        loop {
            let a = (k as f64 * self.dt).max(t0);
            let b = ((k + 1) as f64 * self.dt).min(t1);
            if b > a {
                acc += 0.5 * (b - a) * (self.value(q, a) + self.value(q, b));
            }
            if (k + 1) as f64 * self.dt >= t1 {
                break;
            }
            k += 1;
        }
        acc
    }

    /// Writes the trace as `n_qubits: u64, n_samples: u64, dt: f64` followed by
    /// the samples of each qubit in order, all little-endian.
    pub fn dump<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        w.write_all(&(self.n_samples as u64).to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        for s in &self.samples {
            for v in s {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        let nq = u64::from_le_bytes(b) as usize;
        r.read_exact(&mut b)?;
        let ns = u64::from_le_bytes(b) as usize;
        r.read_exact(&mut b)?;
        let dt = f64::from_le_bytes(b);
        let mut samples = vec![vec![0.0; ns]; nq];
        for s in &mut samples {
            for v in s.iter_mut() {
                r.read_exact(&mut b)?;
                *v = f64::from_le_bytes(b);
            }
        }
        Self::from_samples(dt, samples)
    }

    pub fn dump_to_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.dump(std::io::BufWriter::new(f))
    }
}

fn sample_count(duration: f64, dt: f64) -> Result<usize> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::Parameter(format!("duration must be > 0, got {duration}")));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Parameter(format!("dt must be > 0, got {dt}")));
    }
    // tolerate round-off when duration is an exact multiple of dt
    let ratio = duration / dt;
    let steps = if (ratio - ratio.round()).abs() < 1e-9 { ratio.round() } else { ratio.ceil() };
    Ok(steps as usize + 1)
}

/// SplitMix64 finalizer; derives well-separated seeds from `(base, index)`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for repeated traces of one length; holds the embedded spectrum.
struct Synthesizer {
    n: usize,
    sqrt_eig: Vec<f64>,
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl Synthesizer {
    fn new(spec: &NoiseSpec, n: usize, dt: f64) -> Self {
        let pad = (8.0 * spec.tau_n / dt).ceil() as usize;
        let m = (2 * n.max(2) - 2).max(n + pad).next_power_of_two();
        let mut c: Vec<Complex64> = (0..m)
            .map(|k| {
                let lag = k.min(m - k) as f64 * dt;
                Complex64::new(spec.covariance(lag), 0.0)
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        fft.process(&mut c);
        // the Gaussian kernel is positive definite; negative eigenvalues are round-off
        let sqrt_eig = c.iter().map(|z| (z.re.max(0.0) / m as f64).sqrt()).collect();
        Self { n, sqrt_eig, fft }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut buf: Vec<Complex64> = self
            .sqrt_eig
            .iter()
            .map(|&s| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(s * re, s * im)
            })
            .collect();
        self.fft.process(&mut buf);
        buf.truncate(self.n);
        buf.into_iter().map(|z| z.re).collect()
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Samples independent traces for `n_qubits` qubits over `[0, duration]`.
/// Qubit `q` draws from stream `q` of the spec's seed.
pub fn sample_trace(spec: &NoiseSpec, n_qubits: usize, duration: f64, dt: f64) -> Result<NoiseTrace> {
    spec.check()?;
    let n = sample_count(duration, dt)?;
    if spec.sigma == 0.0 {
        return NoiseTrace::zeros(n_qubits, duration, dt);
    }
    let synth = Synthesizer::new(spec, n, dt);
    let samples = (0..n_qubits)
        .map(|q| synth.sample(&mut stream_rng(spec.seed, q as u64)))
        .collect();
    Ok(NoiseTrace { dt, n_samples: n, samples })
}

/// Pointwise sum of two traces on the same grid.
pub fn compose_traces(a: &NoiseTrace, b: &NoiseTrace) -> Result<NoiseTrace> {
    if a.n_samples != b.n_samples || a.samples.len() != b.samples.len() || (a.dt - b.dt).abs() > 1e-15 * a.dt
    {
        return Err(Error::Parameter(format!(
            "trace grids differ: ({} qubits, {} samples, dt {}) vs ({} qubits, {} samples, dt {})",
            a.samples.len(),
            a.n_samples,
            a.dt,
            b.samples.len(),
            b.n_samples,
            b.dt
        )));
    }
    let samples = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u + v).collect())
        .collect();
    Ok(NoiseTrace { dt: a.dt, n_samples: a.n_samples, samples })
}

/// Sum of several independent components sampled on a common grid.
pub fn sample_composite(specs: &[NoiseSpec], n_qubits: usize, duration: f64, dt: f64) -> Result<NoiseTrace> {
    let mut acc = NoiseTrace::zeros(n_qubits, duration, dt)?;
    for s in specs {
        acc = compose_traces(&acc, &sample_trace(s, n_qubits, duration, dt)?)?;
    }
    Ok(acc)
}

/// Outcome of a coherence-time estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum T2Estimate {
    Finite(f64),
    NoDecay,
}

impl T2Estimate {
    pub fn value(&self) -> f64 {
        match self {
            T2Estimate::Finite(t) => *t,
            T2Estimate::NoDecay => f64::INFINITY,
        }
    }
}

/// Relative phase `∫₀ᵗ A dt'` accumulated by an uncontrolled qubit with
/// `H = A(t) σᶻ/2`, by the trapezoid rule on the trace grid.
pub fn free_precession_phase(samples: &[f64], dt: f64) -> Vec<f64> {
    let mut phi = Vec::with_capacity(samples.len());
    let mut acc = 0.0;
    phi.push(0.0);
    for w in samples.windows(2) {
        acc += 0.5 * dt * (w[0] + w[1]);
        phi.push(acc);
    }
    phi
}

/// Estimates T₂ of a single uncontrolled qubit from `n_realizations`
/// simulated noise histories.
///
/// For Gaussian noise `|⟨e^{-iΔφ}⟩| = exp(-⟨Δφ²⟩/2)` exactly, so the
/// exponential tail is fitted through the ensemble mean of `Δφ²/2` over lags
/// from `3τ_n` to `12τ_n`, where it grows linearly with slope `1/T₂`. Lags are
/// taken between all window positions of a stationary history.
pub fn estimate_t2(spec: &NoiseSpec, n_realizations: usize) -> Result<T2Estimate> {
    spec.check()?;
    if n_realizations < 100 {
        return Err(Error::Parameter(format!("need at least 100 realizations, got {n_realizations}")));
    }
    if spec.sigma == 0.0 {
        return Ok(T2Estimate::NoDecay);
    }
    let dt = spec.default_dt();
    let duration = 120.0 * spec.tau_n;
    let n = sample_count(duration, dt)?;
    let synth = Synthesizer::new(spec, n, dt);

    let lag_steps: Vec<usize> = (0..=18)
        .map(|j| ((3.0 + 0.5 * j as f64) * spec.tau_n / dt).round() as usize)
        .collect();
    let stride = ((spec.tau_n / 4.0) / dt).round().max(1.0) as usize;
    let mut sums = vec![0.0; lag_steps.len()];
    let mut counts = vec![0usize; lag_steps.len()];
    for r in 0..n_realizations {
        let mut rng = stream_rng(derive_seed(spec.seed, r as u64), 0);
        let a = synth.sample(&mut rng);
        let phi = free_precession_phase(&a, dt);
        for (j, &lag) in lag_steps.iter().enumerate() {
            let mut start = 0;
            while start + lag < phi.len() {
                let d = phi[start + lag] - phi[start];
                sums[j] += 0.5 * d * d;
                counts[j] += 1;
                start += stride;
            }
        }
    }
    let xs: Vec<f64> = lag_steps.iter().map(|&l| l as f64 * dt).collect();
    let ys: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let slope = linear_fit(&xs, &ys).0;
    if !(slope.is_finite() && slope > 0.0) {
        return Err(Error::Fit(format!(
            "no decay within {duration} τ_p: fitted rate {slope:.3e}, -ln|coherence| at lags {:?}",
            ys
        )));
    }
    Ok(T2Estimate::Finite(1.0 / slope))
}

/// Least-squares line; returns `(slope, intercept)`.
pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_gives_zero_trace() {
        let spec = NoiseSpec::new(0.0, 5.0, 3).unwrap();
        let tr = sample_trace(&spec, 2, 10.0, 0.5).unwrap();
        assert_eq!(tr.n_samples(), 21);
        assert!(tr.samples(1).iter().chain(tr.samples(2)).all(|&v| v == 0.0));
    }

    #[test]
    fn sample_count_matches_grid() {
        let spec = NoiseSpec::new(1.0, 4.0, 1).unwrap();
        let tr = sample_trace(&spec, 1, 10.3, 0.5).unwrap();
        assert_eq!(tr.n_samples(), 22);
    }

    #[test]
    fn rejects_bad_grid() {
        let spec = NoiseSpec::new(1.0, 4.0, 1).unwrap();
        assert!(matches!(sample_trace(&spec, 1, 0.0, 0.5), Err(Error::Parameter(_))));
        assert!(matches!(sample_trace(&spec, 1, 1.0, -0.5), Err(Error::Parameter(_))));
        assert!(NoiseSpec::new(-1.0, 1.0, 0).is_err());
        assert!(NoiseSpec::new(1.0, 0.0, 0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = NoiseSpec::new(0.02, 16.0, 77).unwrap();
        let a = sample_trace(&spec, 3, 100.0, 0.25).unwrap();
        let b = sample_trace(&spec, 3, 100.0, 0.25).unwrap();
        assert_eq!(a, b);
        let c = sample_trace(&NoiseSpec { seed: 78, ..spec }, 3, 100.0, 0.25).unwrap();
        assert_ne!(a, c);
        assert_ne!(a.samples(1), a.samples(2));
    }

    #[test]
    fn compose_checks_grid_and_adds() {
        let spec = NoiseSpec::new(0.5, 2.0, 5).unwrap();
        let a = sample_trace(&spec, 2, 20.0, 0.1).unwrap();
        let z = NoiseTrace::zeros(2, 20.0, 0.1).unwrap();
        assert_eq!(compose_traces(&a, &z).unwrap(), a);
        let aa = compose_traces(&a, &a).unwrap();
        assert!((aa.samples(1)[7] - 2.0 * a.samples(1)[7]).abs() < 1e-15);
        let other = NoiseTrace::zeros(2, 20.0, 0.2).unwrap();
        assert!(matches!(compose_traces(&a, &other), Err(Error::Parameter(_))));
    }

    #[test]
    fn interpolation_is_linear_between_samples() {
        let tr = NoiseTrace::from_samples(0.5, vec![vec![0.0, 1.0, 3.0]]).unwrap();
        assert_eq!(tr.value(1, 0.25), 0.5);
        assert_eq!(tr.value(1, 0.75), 2.0);
        assert_eq!(tr.value(1, 5.0), 3.0);
    }

    #[test]
    fn dump_and_load_round_trip() {
        let spec = NoiseSpec::new(0.1, 3.0, 9).unwrap();
        let a = sample_trace(&spec, 2, 5.0, 0.25).unwrap();
        let mut buf = Vec::new();
        a.dump(&mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 8 * 2 * a.n_samples());
        assert_eq!(NoiseTrace::load(&buf[..]).unwrap(), a);
    }

    #[test]
    fn no_decay_for_zero_sigma() {
        let spec = NoiseSpec::new(0.0, 10.0, 0).unwrap();
        assert_eq!(estimate_t2(&spec, 100).unwrap(), T2Estimate::NoDecay);
        assert!(estimate_t2(&spec, 10).is_err());
    }
}
