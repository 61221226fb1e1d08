use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{
    coherent_state, AtomSite, CompositeState, FockCutoff, Level, C64, INPUT_NORM_TOL,
};
use crate::protocols::{bob_correction, ClassicalMessage, InjectionSign, SEPARATION_TOL};
use crate::qops::{
    apply_gate, dispersive_gate, displace, edge_mass, jc_evolve, measure_atom,
    postselect_with_threshold, Gate2, GatePreset, DEFAULT_POSTSELECT_MIN,
};

use super::ast::{Expr, FidelityTarget, GateSpec, ProtocolScript, Statement};

pub const DEFAULT_N_MAX: usize = 64;
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Something observable that a statement produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Postselect {
        line: usize,
        atom: String,
        level: Level,
        probability: f64,
    },
    Measure {
        line: usize,
        atom: String,
        var: String,
        level: Level,
        probability: f64,
    },
    Expect {
        line: usize,
        target: String,
        threshold: f64,
        achieved: f64,
        passed: bool,
    },
    Correct {
        line: usize,
        atom: String,
        gate: GatePreset,
    },
    Reset {
        line: usize,
        alpha: C64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateSummary {
    pub atoms: Vec<String>,
    pub n_max: usize,
    pub dim: usize,
    pub norm: f64,
    pub mean_photon_number: f64,
    /// Population of the two highest Fock levels.
    pub edge_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    /// Every `expect` held.
    pub passed: bool,
    pub seed: u64,
    pub params: BTreeMap<String, f64>,
    pub events: Vec<Event>,
    /// Values of the variables listed in `report`.
    pub variables: BTreeMap<String, Level>,
    pub final_state: StateSummary,
}

struct Run<'a> {
    params: &'a BTreeMap<String, f64>,
    cutoff: FockCutoff,
    tail_tol: f64,
    postselect_min: f64,
    rng: ChaCha8Rng,
    state: Option<CompositeState>,
    vars: BTreeMap<String, Level>,
    events: Vec<Event>,
    reported: BTreeMap<String, Level>,
    passed: bool,
}

impl Run<'_> {
    fn eval(&self, e: &Expr) -> Result<C64> {
        e.eval(self.params)
            .map_err(|name| Error::Usage(format!("unbound parameter `${{{name}}}`")))
    }

    fn real(&self, e: &Expr, what: &str) -> Result<f64> {
        let v = self.eval(e)?;
        if v.im.abs() > 1e-12 || !v.re.is_finite() {
            return Err(Error::InvalidParams(format!(
                "{what} must be a finite real number, got {v}"
            )));
        }
        Ok(v.re)
    }

    fn field(&self, alpha: C64) -> Result<Vec<C64>> {
        let ket = coherent_state(alpha, self.cutoff);
        if ket.tail_mass > self.tail_tol {
            return Err(Error::Truncation {
                what: "coherent-state tail mass",
                mass: ket.tail_mass,
                tol: self.tail_tol,
            });
        }
        Ok(ket.amps)
    }

    fn state(&self) -> &CompositeState {
        self.state
            .as_ref()
            .expect("parser guarantees the cavity comes first")
    }

    fn fidelity(&self, target: &FidelityTarget) -> Result<(String, f64)> {
        let s = self.state();
        let (labels, amps, text): (Vec<&str>, Vec<C64>, String) = match target {
            FidelityTarget::Bell {
                kind,
                first,
                second,
            } => (
                vec![first, second],
                kind.amplitudes().to_vec(),
                format!("bell {kind} {first} {second}"),
            ),
            FidelityTarget::Ket { atom, amps } => {
                let v = vec![self.eval(&amps[0])?, self.eval(&amps[1])?];
                let n = v.iter().map(|a| a.norm_sqr()).sum::<f64>();
                if (n - 1.0).abs() > INPUT_NORM_TOL {
                    return Err(Error::NotNormalized { norm_sqr: n });
                }
                (vec![atom], v, format!("ket {atom}"))
            }
        };
        let rho = s.reduced_density(&labels)?;
        let trace = rho.trace().re;
        let mut f = C64::new(0.0, 0.0);
        for (i, a) in amps.iter().enumerate() {
            for (j, b) in amps.iter().enumerate() {
                f += a.conj() * rho[(i, j)] * b;
            }
        }
        Ok((text, f.re / trace))
    }

    fn step(&mut self, stmt: &Statement, line: usize) -> Result<()> {
        match stmt {
            Statement::Cavity { alpha } => {
                let v = self.field(self.eval(alpha)?)?;
                self.state = Some(CompositeState::from_amplitudes(Vec::new(), self.cutoff, v)?);
            }
            Statement::Atom { label, basis, init } => {
                let site = AtomSite::new(label.clone(), *basis);
                let ket = site.basis_ket(*init)?;
                self.state = Some(self.state().with_atom(site, ket)?);
            }
            Statement::Rotate { atom, gate } => {
                let g = match gate {
                    GateSpec::Preset(p) => Gate2::preset(*p),
                    GateSpec::Matrix(m) => Gate2::new([
                        [self.eval(&m[0][0])?, self.eval(&m[0][1])?],
                        [self.eval(&m[1][0])?, self.eval(&m[1][1])?],
                    ])?,
                };
                self.state = Some(apply_gate(self.state(), atom, &g)?);
            }
            Statement::Dispersive { atom, phi } => {
                let phi = self.real(phi, "phi")?;
                self.state = Some(dispersive_gate(self.state(), atom, phi)?);
            }
            Statement::Inject { beta } => {
                let beta = self.eval(beta)?;
                self.state = Some(displace(self.state(), beta, self.tail_tol)?);
            }
            Statement::Jc { atom, gt } => {
                let gt = self.real(gt, "gt")?;
                self.state = Some(jc_evolve(self.state(), atom, gt)?);
            }
            Statement::Measure { atom, var } => {
                let state = self
                    .state
                    .as_ref()
                    .expect("parser guarantees the cavity comes first");
                let m = measure_atom(state, atom, &mut self.rng)?;
                self.vars.insert(var.clone(), m.level);
                self.events.push(Event::Measure {
                    line,
                    atom: atom.clone(),
                    var: var.clone(),
                    level: m.level,
                    probability: m.probability,
                });
                self.state = Some(m.post_state);
            }
            Statement::Postselect { atom, level } => {
                let (p, s) =
                    postselect_with_threshold(self.state(), atom, *level, self.postselect_min)?;
                self.events.push(Event::Postselect {
                    line,
                    atom: atom.clone(),
                    level: *level,
                    probability: p,
                });
                self.state = Some(s);
            }
            Statement::Expect { target, threshold } => {
                let threshold = self.real(threshold, "threshold")?;
                let (text, achieved) = self.fidelity(target)?;
                let passed = achieved >= threshold;
                self.passed &= passed;
                self.events.push(Event::Expect {
                    line,
                    target: text,
                    threshold,
                    achieved,
                    passed,
                });
            }
            Statement::Correct {
                atom,
                first,
                second,
                sign,
            } => {
                let s = self.real(sign, "injection sign")?;
                let injected = if s > 0.0 {
                    InjectionSign::Plus
                } else if s < 0.0 {
                    InjectionSign::Minus
                } else {
                    return Err(Error::InvalidParams(
                        "injection sign must be non-zero".into(),
                    ));
                };
                let gate = bob_correction(&ClassicalMessage {
                    injected,
                    outcome1: self.vars[first],
                    outcome2: self.vars[second],
                });
                self.state = Some(apply_gate(self.state(), atom, &gate)?);
                self.events.push(Event::Correct {
                    line,
                    atom: atom.clone(),
                    gate: gate.preset_name().expect("corrections are presets"),
                });
            }
            Statement::Reset { alpha } => {
                let alpha = self.eval(alpha)?;
                let (reg, _) = self.state().split_cavity(SEPARATION_TOL)?;
                let field = self.field(alpha)?;
                self.state = Some(CompositeState::from_register(&reg, &field, self.cutoff)?);
                // `-x` of a real parameter carries a -0.0 imaginary part
                let alpha = C64::new(alpha.re + 0.0, alpha.im + 0.0);
                self.events.push(Event::Reset { line, alpha });
            }
            Statement::Report { vars } => {
                for v in vars {
                    self.reported.insert(v.clone(), self.vars[v]);
                }
            }
        }
        Ok(())
    }
}

fn run_param(params: &BTreeMap<String, f64>, name: &str, default: f64) -> Result<f64> {
    let v = params.get(name).copied().unwrap_or(default);
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "{name} must be a non-negative number, got {v}"
        )));
    }
    Ok(v)
}

/// Runs `script` and also returns the final state.
///
/// `params` binds `${name}` references; the reserved names `n_max`,
/// `tail_tol` and `postselect_min` configure the run itself.
pub fn execute_script_with_state(
    script: &ProtocolScript,
    params: &BTreeMap<String, f64>,
    seed: u64,
) -> Result<(RunReport, CompositeState)> {
    let n_max = run_param(params, "n_max", DEFAULT_N_MAX as f64)?;
    if n_max.fract() != 0.0 {
        return Err(Error::InvalidParams(format!(
            "n_max must be an integer, got {n_max}"
        )));
    }
    let mut run = Run {
        params,
        cutoff: FockCutoff::new(n_max as usize)?,
        tail_tol: run_param(params, "tail_tol", DEFAULT_TAIL_TOL)?,
        postselect_min: run_param(params, "postselect_min", DEFAULT_POSTSELECT_MIN)?,
        rng: ChaCha8Rng::seed_from_u64(seed),
        state: None,
        vars: BTreeMap::new(),
        events: Vec::new(),
        reported: BTreeMap::new(),
        passed: true,
    };
    // refuse to start with unbound parameters rather than fail halfway
    for (stmt, span) in script.statements.iter().zip(&script.source_map) {
        for e in stmt.expressions() {
            let mut names = Vec::new();
            e.params(&mut names);
            if let Some(missing) = names.iter().find(|n| !params.contains_key(*n)) {
                return Err(Error::Runtime {
                    line: span.line,
                    source: Box::new(Error::Usage(format!("unbound parameter `${{{missing}}}`"))),
                });
            }
        }
    }
    for (stmt, span) in script.statements.iter().zip(&script.source_map) {
        run.step(stmt, span.line).map_err(|e| Error::Runtime {
            line: span.line,
            source: Box::new(e),
        })?;
    }
    let state = run.state.take().expect("parser guarantees a cavity");
    let report = RunReport {
        passed: run.passed,
        seed,
        params: params.clone(),
        events: run.events,
        variables: run.reported,
        final_state: StateSummary {
            atoms: state
                .sites()
                .iter()
                .map(|s| s.label().to_string())
                .collect(),
            n_max: state.cutoff().n_max(),
            dim: state.dim(),
            norm: state.norm(),
            mean_photon_number: state.mean_photon_number(),
            edge_mass: edge_mass(&state),
        },
    };
    Ok((report, state))
}

pub fn execute_script(
    script: &ProtocolScript,
    params: &BTreeMap<String, f64>,
    seed: u64,
) -> Result<RunReport> {
    execute_script_with_state(script, params, seed).map(|(r, _)| r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::script::parse_script;

    fn run(text: &str, params: &[(&str, f64)]) -> Result<RunReport> {
        let p = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        execute_script(&parse_script(text)?, &p, 1)
    }

    #[test]
    fn impossible_postselection_reports_line() {
        let text = "cavity coherent 0\natom P levels (f,e) init f\njc P gt=1\npostselect P e";
        match run(text, &[]).unwrap_err() {
            Error::Runtime { line, source } => {
                assert_eq!(line, 4);
                assert!(matches!(*source, Error::ImpossiblePostselection { .. }));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unbound_parameter_is_reported_before_running() {
        let err = run("cavity coherent 1\ninject ${beta}", &[]).unwrap_err();
        assert!(matches!(err, Error::Runtime { line: 2, .. }));
        assert!(err.to_string().contains("${beta}"));
    }

    #[test]
    fn failed_expectation_marks_run() {
        let text =
            "cavity coherent 0\natom A levels (f,g) init g\nexpect fidelity ket A (1, 0) >= 0.5";
        let r = run(text, &[("n_max", 4.0)]).unwrap();
        assert!(!r.passed);
        match &r.events[0] {
            Event::Expect {
                achieved, passed, ..
            } => {
                assert_eq!(*achieved, 0.0);
                assert!(!passed);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn measurement_is_seeded() {
        let text =
            "cavity coherent 0\natom A levels (f,g) init g\nrotate A R_H\nmeasure A as m\nreport m";
        let p: BTreeMap<String, f64> = [("n_max".to_string(), 2.0)].into();
        let s = parse_script(text).unwrap();
        let a = execute_script(&s, &p, 42).unwrap();
        let b = execute_script(&s, &p, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.variables.contains_key("m"));
    }

    #[test]
    fn reset_needs_a_disentangled_cavity() {
        let text = "cavity coherent -1\natom A levels (f,g) init g\nrotate A R_H\ndispersive A phi=pi\nreset coherent 1";
        let err = run(text, &[("n_max", 30.0)]).unwrap_err();
        assert!(matches!(err, Error::Runtime { line: 5, .. }));
    }

    #[test]
    fn complex_rotation_and_bad_matrix() {
        let text = "cavity coherent 0\natom A levels (f,g) init f\nrotate A [[${z}, 0], [0, ${z}]]";
        assert!(run(text, &[("z", 1.0), ("n_max", 2.0)]).is_ok());
        let err = run(text, &[("z", 2.0), ("n_max", 2.0)]).unwrap_err();
        assert!(matches!(err, Error::Runtime { line: 3, .. }));
    }
}
