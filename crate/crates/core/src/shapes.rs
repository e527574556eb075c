//! Symmetric one-axis pulse profiles and self-refocusing calibration.
//!
//! A shape is stored on the unit interval as
//! `V(u) = a₀ + Σ_k a_k (1 − cos 2πku)`, `0 ≤ u ≤ 1`, which is symmetric about
//! `u = 1/2` for any coefficients. A pulse of duration `d` plays
//! `V(t/d)/d`, so its accumulated angle `φ(t) = φ₁(t/d)` is independent of `d`.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, CompositeRule};

#[derive(Debug, Clone, PartialEq)]
pub struct PulseShape {
    pub name: String,
    pub nominal_angle: f64,
    /// Pulse length in units of τ_p.
    pub duration: f64,
    pub order: u8,
    pub constant: f64,
    pub harmonics: Vec<f64>,
}

/// Time averages controlling the leading orders of a pulse's error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeResiduals {
    /// `⟨cos φ⟩` over the pulse.
    pub c1: f64,
    /// `⟨sin φ⟩` over the pulse.
    pub s1: f64,
    /// `∫₀¹du₁∫₀^{u₁}du₂ sin(φ(u₁) − φ(u₂))` on the unit interval; the static-field
    /// second-order term of a pulse of length `d` scales as `d²` times this.
    pub k2: f64,
}

impl ShapeResiduals {
    pub fn max_abs(&self, order: u8) -> f64 {
        match order {
            0 => 0.0,
            1 => self.c1.abs().max(self.s1.abs()),
            _ => self.c1.abs().max(self.s1.abs()).max(self.k2.abs()),
        }
    }
}

impl PulseShape {
    /// Zero-amplitude slot.
    pub fn zero(duration: f64) -> Self {
        Self {
            name: "zero".into(),
            nominal_angle: 0.0,
            duration,
            order: 0,
            constant: 0.0,
            harmonics: Vec::new(),
        }
    }

    pub fn rectangular(angle: f64) -> Self {
        Self {
            name: format!("rect_{angle:.6}"),
            nominal_angle: angle,
            duration: 1.0,
            order: 0,
            constant: angle,
            harmonics: Vec::new(),
        }
    }

    /// `V(u) = θ(1 − cos 2πu)`: a smooth single-lobe pulse.
    pub fn single_harmonic(angle: f64) -> Self {
        Self {
            name: format!("cos1_{angle:.6}"),
            nominal_angle: angle,
            duration: 1.0,
            order: 0,
            constant: 0.0,
            harmonics: vec![angle],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.harmonics.iter().all(|&a| a == 0.0)
    }

    /// Same profile played over `duration` with the same total angle.
    pub fn stretched(&self, duration: f64) -> Self {
        Self { duration, ..self.clone() }
    }

    /// Profile negated: rotation by the opposite angle.
    pub fn reversed(&self) -> Self {
        Self {
            name: format!("{}-", self.name),
            nominal_angle: -self.nominal_angle,
            constant: -self.constant,
            harmonics: self.harmonics.iter().map(|a| -a).collect(),
            ..self.clone()
        }
    }

    /// Amplitude on the unit interval.
    #[inline]
    pub fn unit_amplitude(&self, u: f64) -> f64 {
        let mut v = self.constant;
        for (k, a) in self.harmonics.iter().enumerate() {
            v += a * (1.0 - (TAU * (k + 1) as f64 * u).cos());
        }
        v
    }

    /// Accumulated angle on the unit interval (exact antiderivative).
    #[inline]
    pub fn unit_phase(&self, u: f64) -> f64 {
        let mut p = self.constant * u;
        for (k, a) in self.harmonics.iter().enumerate() {
            let w = TAU * (k + 1) as f64;
            p += a * (u - (w * u).sin() / w);
        }
        p
    }

    /// `V(t)` for `0 ≤ t ≤ duration`.
    pub fn amplitude(&self, t: f64) -> Result<f64> {
        self.check_support(t)?;
        Ok(self.unit_amplitude(t / self.duration) / self.duration)
    }

    /// `φ(t) = ∫₀ᵗ V`.
    pub fn phase_profile(&self, t: f64) -> Result<f64> {
        self.check_support(t)?;
        Ok(self.unit_phase(t / self.duration))
    }

    fn check_support(&self, t: f64) -> Result<()> {
        let eps = 1e-12 * self.duration.max(1.0);
        if !(t >= -eps && t <= self.duration + eps) {
            return Err(Error::Parameter(format!("t = {t} outside pulse support [0, {}]", self.duration)));
        }
        Ok(())
    }

    /// Largest `|V|` on the unit interval, sampled.
    pub fn peak_unit_amplitude(&self) -> f64 {
        (0..=2000).map(|i| self.unit_amplitude(i as f64 / 2000.0).abs()).fold(0.0, f64::max)
    }

    pub fn residuals(&self) -> ShapeResiduals {
        residuals_of(self.constant, &self.harmonics)
    }
}

struct ResidualRule {
    outer: CompositeRule,
    inner_x: Vec<f64>,
    inner_w: Vec<f64>,
}

fn residual_rule() -> &'static ResidualRule {
    static RULE: OnceLock<ResidualRule> = OnceLock::new();
    RULE.get_or_init(|| {
        let (x, w) = gauss_legendre(20);
        ResidualRule { outer: CompositeRule::new(0.0, 1.0, 32, 20), inner_x: x, inner_w: w }
    })
}

fn phase_of(constant: f64, harmonics: &[f64], u: f64) -> f64 {
    let mut p = constant * u;
    for (k, a) in harmonics.iter().enumerate() {
        let w = TAU * (k + 1) as f64;
        p += a * (u - (w * u).sin() / w);
    }
    p
}

fn residuals_of(constant: f64, harmonics: &[f64]) -> ShapeResiduals {
    let rule = residual_rule();
    let h = 1.0 / rule.outer.panels as f64;
    let q = rule.outer.order;
    let (mut c1, mut s1) = (0.0, 0.0);
    let mut k2 = 0.0;
    // G(u) = ∫₀ᵘ e^{-iφ}, accumulated panel by panel
    let mut g_start = Complex64::new(0.0, 0.0);
    for p in 0..rule.outer.panels {
        let lo = p as f64 * h;
        let mut g_panel = Complex64::new(0.0, 0.0);
        for j in 0..q {
            let idx = p * q + j;
            let u = rule.outer.nodes[idx];
            let w = rule.outer.weights[idx];
            let phi = phase_of(constant, harmonics, u);
            let (s, c) = phi.sin_cos();
            c1 += w * c;
            s1 += w * s;
            g_panel += w * Complex64::new(c, -s);
            // ∫_{lo}^{u} e^{-iφ}
            let half = 0.5 * (u - lo);
            let mut g_part = Complex64::new(0.0, 0.0);
            for (xi, wi) in rule.inner_x.iter().zip(&rule.inner_w) {
                let v = lo + half * (xi + 1.0);
                let ph = phase_of(constant, harmonics, v);
                g_part += half * wi * Complex64::new(ph.cos(), -ph.sin());
            }
            let g = g_start + g_part;
            k2 += w * (Complex64::new(c, s) * g).im;
        }
        g_start += g_panel;
    }
    ShapeResiduals { c1, s1, k2 }
}

fn condition_vector(angle: f64, order: u8, x: &[f64]) -> Vec<f64> {
    let r = residuals_of(0.0, x);
    let mut e = vec![x.iter().sum::<f64>() - angle, r.s1];
    // φ(1) ≡ 0 mod 2π leaves ⟨cos φ⟩ unconstrained by symmetry
    if (1.0 - angle.cos()).abs() < 1e-6 {
        e.push(r.c1);
    }
    if order >= 2 {
        e.push(r.k2);
    }
    e
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn newton_solve(angle: f64, order: u8, mut x: Vec<f64>) -> Option<(Vec<f64>, f64)> {
    let mut e = condition_vector(angle, order, &x);
    for _ in 0..80 {
        let err = norm_inf(&e);
        if err < 1e-13 {
            break;
        }
        let n = x.len();
        let m = e.len();
        let mut jac = DMatrix::<f64>::zeros(m, n);
        for j in 0..n {
            let h = 1e-6 * (1.0 + x[j].abs());
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm = x.clone();
            xm[j] -= h;
            let ep = condition_vector(angle, order, &xp);
            let em = condition_vector(angle, order, &xm);
            for i in 0..m {
                jac[(i, j)] = (ep[i] - em[i]) / (2.0 * h);
            }
        }
        let rhs = DVector::from_vec(e.iter().map(|v| -v).collect());
        let step = jac.svd(true, true).solve(&rhs, 1e-12).ok()?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + lambda * d).collect();
            let et = condition_vector(angle, order, &trial);
            if norm_inf(&et) < err {
                x = trial;
                e = et;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted || x.iter().any(|v| !v.is_finite() || v.abs() > 1e3) {
            return None;
        }
    }
    let err = norm_inf(&e);
    Some((x, err))
}

/// Finds a symmetric shape rotating by `nominal_angle` whose first-order (and,
/// for `order = 2`, static second-order) error terms vanish.
///
/// Damped Newton iterations with minimum-norm steps are started from a fixed
/// set of pseudo-random coefficient vectors; among the converged solutions the
/// one with the smallest peak amplitude is returned.
pub fn calibrate(nominal_angle: f64, order: u8, n_harmonics: usize) -> Result<PulseShape> {
    if !(1..=2).contains(&order) {
        return Err(Error::Parameter(format!("calibration order must be 1 or 2, got {order}")));
    }
    if n_harmonics < order as usize + 1 {
        return Err(Error::Parameter(format!(
            "order {order} needs at least {} harmonics, got {n_harmonics}",
            order + 1
        )));
    }
    if nominal_angle == 0.0 {
        return Ok(PulseShape::zero(1.0));
    }
    let angle = nominal_angle.abs();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f5a_9e5);
    let spread = Normal::new(0.0, 8.0).unwrap();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut best_residual = f64::INFINITY;
    for _ in 0..24 {
        let x0: Vec<f64> = (0..n_harmonics).map(|_| spread.sample(&mut rng)).collect();
        let Some((x, err)) = newton_solve(angle, order, x0) else { continue };
        best_residual = best_residual.min(err);
        if err > 1e-12 {
            continue;
        }
        let peak = peak_of(&x);
        if best.as_ref().map_or(true, |(_, p)| peak < *p) {
            best = Some((x, peak));
        }
    }
    let (x, _) = best.ok_or_else(|| Error::Calibration {
        message: format!("no converged shape for angle {nominal_angle}, order {order}"),
        residual: best_residual,
    })?;
    let shape = PulseShape {
        name: shape_name(angle, order),
        nominal_angle: angle,
        duration: 1.0,
        order,
        constant: 0.0,
        harmonics: x,
    };
    Ok(if nominal_angle < 0.0 { shape.reversed() } else { shape })
}

fn peak_of(x: &[f64]) -> f64 {
    (0..=2000)
        .map(|i| {
            let u = i as f64 / 2000.0;
            x.iter().enumerate().map(|(k, a)| a * (1.0 - (TAU * (k + 1) as f64 * u).cos())).sum::<f64>().abs()
        })
        .fold(0.0, f64::max)
}

fn shape_name(angle: f64, order: u8) -> String {
    if (angle - PI).abs() < 1e-12 {
        format!("sr{order}_pi")
    } else if (angle - PI / 2.0).abs() < 1e-12 {
        format!("sr{order}_pi2")
    } else {
        format!("sr{order}_{angle:.9}")
    }
}

/// Calibrated shapes keyed by angle, filled on demand.
#[derive(Debug, Default)]
pub struct ShapeLibrary {
    order: u8,
    n_harmonics: usize,
    shapes: Mutex<HashMap<u64, Arc<PulseShape>>>,
}

impl ShapeLibrary {
    pub fn new(order: u8, n_harmonics: usize) -> Self {
        Self { order, n_harmonics, shapes: Mutex::new(HashMap::new()) }
    }

    /// Process-wide second-order library with three harmonics.
    pub fn standard() -> &'static ShapeLibrary {
        static LIB: OnceLock<ShapeLibrary> = OnceLock::new();
        LIB.get_or_init(|| ShapeLibrary::new(2, 3))
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    /// Unit-duration shape rotating by `|angle|`.
    pub fn for_angle(&self, angle: f64) -> Result<Arc<PulseShape>> {
        let angle = angle.abs();
        let key = angle.to_bits();
        if let Some(s) = self.shapes.lock().unwrap().get(&key) {
            return Ok(s.clone());
        }
        let shape = Arc::new(calibrate(angle, self.order, self.n_harmonics)?);
        self.shapes.lock().unwrap().insert(key, shape.clone());
        Ok(shape)
    }

    pub fn insert(&self, shape: PulseShape) {
        let key = shape.nominal_angle.abs().to_bits();
        self.shapes.lock().unwrap().insert(key, Arc::new(shape));
    }

    pub fn shapes(&self) -> Vec<Arc<PulseShape>> {
        let mut v: Vec<_> = self.shapes.lock().unwrap().values().cloned().collect();
        v.sort_by(|a, b| a.nominal_angle.total_cmp(&b.nominal_angle));
        v
    }

    /// Text table, one shape per line: `name angle order a0 a1 a2 ...`.
    pub fn to_table(&self) -> String {
        let mut out = String::from("# name angle order constant harmonics...\n");
        for s in self.shapes() {
            write!(out, "{} {:.17e} {} {:.17e}", s.name, s.nominal_angle, s.order, s.constant).unwrap();
            for a in &s.harmonics {
                write!(out, " {a:.17e}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_table(text: &str, order: u8, n_harmonics: usize) -> Result<Self> {
        let lib = Self::new(order, n_harmonics);
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |m: &str| Error::Parse { line: i + 1, message: m.to_string() };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() < 4 {
                return Err(parse_err("expected name, angle, order, constant"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| parse_err(&format!("bad number {s:?}")));
            let shape = PulseShape {
                name: f[0].to_string(),
                nominal_angle: num(f[1])?,
                duration: 1.0,
                order: f[2].parse().map_err(|_| parse_err("bad order"))?,
                constant: num(f[3])?,
                harmonics: f[4..].iter().map(|s| num(s)).collect::<Result<_>>()?,
            };
            lib.insert(shape);
        }
        Ok(lib)
    }

    /// Checks normalization and order conditions of every stored shape.
    pub fn audit(&self, tol: f64) -> Result<()> {
        for s in self.shapes() {
            let angle_err = (s.unit_phase(1.0) - s.nominal_angle).abs();
            let res = s.residuals().max_abs(s.order);
            if angle_err > tol || res > tol {
                return Err(Error::Calibration {
                    message: format!("shape {} fails its defining conditions", s.name),
                    residual: angle_err.max(res),
                });
            }
        }
        Ok(())
    }
}
