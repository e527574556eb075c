use std::fs;
use std::path::PathBuf;

use softqec::code513::{generators, logical_block, recovery_errors, PauliString, SyndromeTable};
use softqec::evolution::{fidelity, Frame, Propagator, ReducedEvolution};
use softqec::gates::{compile, Circuit, CompileOptions};
use softqec::network::{design_coupling, star_graph};
use softqec::noise::{sample_trace, NoiseSpec};
use softqec::protocol::Setup;
use softqec::sequences::{validate_windows, ZMode};
use softqec::shapes::ShapeLibrary;

use crate::CliError;

const SHAPE_TOL: f64 = 1e-8;
const RK4_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default)]
pub struct SelftestOptions {
    /// Shape table to audit instead of freshly calibrated shapes.
    pub shapes: Option<PathBuf>,
    /// Replacement stabilizer generators, e.g. `XZZXI`.
    pub generators: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Check { name, passed, detail: detail.into() }
    }
}

pub fn selftest(opts: &SelftestOptions) -> Result<Vec<Check>, CliError> {
    let lib = match &opts.shapes {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            ShapeLibrary::from_table(&text, 2, 3)
                .map_err(|e| CliError::Parse { path: p.display().to_string(), message: e.to_string() })?
        }
        None => ShapeLibrary::new(2, 3),
    };
    let gens = match &opts.generators {
        Some(list) => list
            .iter()
            .map(|s| s.parse::<PauliString>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Unresolved(e.to_string()))?,
        None => generators().to_vec(),
    };
    let mut checks = Vec::new();

    // compiling one full encode/measure/decode pass fills the library
    let setup = Setup::new(1, 5, ZMode::default(), &lib)?;
    checks.push(match lib.audit(SHAPE_TOL) {
        Ok(()) => Check::new("shape residuals", true, format!("{} shapes within {SHAPE_TOL:e}", lib.shapes().len())),
        Err(e) => Check::new("shape residuals", false, e.to_string()),
    });

    let report = validate_windows(&setup.schedule, &setup.graph);
    checks.push(Check::new(
        "toggling validation",
        report.passed(),
        if report.passed() {
            format!("{} window conditions exact", report.conditions.len())
        } else {
            report.failures().into_iter().take(3).collect::<Vec<_>>().join("; ")
        },
    ));

    checks.push(code_algebra(&gens));
    checks.push(rk4_probe(&lib)?);
    Ok(checks)
}

fn code_algebra(gens: &[PauliString]) -> Check {
    const NAME: &str = "code algebra";
    for (i, a) in gens.iter().enumerate() {
        for b in &gens[i + 1..] {
            if !a.commutes_with(b) {
                return Check::new(NAME, false, format!("generators {a} and {b} anticommute"));
            }
        }
    }
    let table = match SyndromeTable::from_generators(gens) {
        Ok(t) => t,
        Err(e) => return Check::new(NAME, false, format!("syndrome map not bijective: {e}")),
    };
    let v0 = logical_block(5);
    for e in recovery_errors() {
        let s = gens.iter().enumerate().filter(|(_, g)| !g.commutes_with(&e)).fold(0u8, |a, (i, _)| a | 1 << i);
        let mut v = v0.clone();
        e.apply(&mut v);
        table.correction(s).apply(&mut v);
        let f = fidelity(&v, &v0);
        if f < 1.0 - 1e-12 {
            return Check::new(NAME, false, format!("{e} not corrected (F = {f})"));
        }
    }
    Check::new(NAME, true, format!("{} syndromes, all weight-1 errors corrected", table.len()))
}

fn rk4_probe(lib: &ShapeLibrary) -> Result<Check, CliError> {
    let g = star_graph(2, design_coupling(5))?;
    let c = Circuit::parse("h(1) | h(2)\ncnot(1,3)", 5)?;
    let s = compile(&c, &g, lib, CompileOptions::default())?;
    let spec = NoiseSpec::new(50e-3, 32.0, 7)?;
    let noise = sample_trace(&spec, 3, s.total_duration(), spec.default_dt())?;
    let evolve = |steps| -> Result<ReducedEvolution, CliError> {
        let mut v = ReducedEvolution::from_basis(3, &(0..8).collect::<Vec<_>>())?;
        Propagator::new(&g, &s, Some(&noise), steps, Frame::Interaction)?.advance_to(&mut v, s.total_duration())?;
        Ok(v)
    };
    let (a, b) = (evolve(512)?, evolve(1024)?);
    let diff = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    Ok(Check::new("rk4 convergence", diff < RK4_TOL, format!("step halving changes V by {diff:.2e}")))
}
