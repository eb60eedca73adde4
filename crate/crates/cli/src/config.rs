//! Gate-family configuration files.
//!
//! A family file is a JSON document with the register width and one gate
//! program per family member. Each program is a list of primitive
//! applications `{name, qubits, param?, matrix?}` applied in order. A string
//! `param` marks the gate as parametrized; the parameter is bound at run
//! time and probed over fixed values for the subspace analysis.

use blindgate_core::gates;
use blindgate_core::pauli::CMat;
use blindgate_core::subspaces::{FamilyGate, GateFamily};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Number of probe values substituted for a symbolic parameter.
pub const PROBE_COUNT: usize = 8;

pub const RAW_MATRIX_TOL: f64 = 1e-8;

#[derive(Debug)]
pub enum ConfigError {
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    UnknownGate {
        path: String,
        name: String,
    },
    BadArity {
        path: String,
        name: String,
        expected: usize,
        got: usize,
    },
    BadIndex {
        path: String,
        index: usize,
        n: usize,
    },
    NonUnitaryMatrix {
        path: String,
        deviation: f64,
    },
    BadParam {
        path: String,
        message: String,
    },
    BadFamily {
        message: String,
    },
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::Syntax { .. } => "E_SYNTAX",
            ConfigError::UnknownGate { .. } => "E_UNKNOWN_GATE",
            ConfigError::BadArity { .. } => "E_BAD_ARITY",
            ConfigError::BadIndex { .. } => "E_BAD_INDEX",
            ConfigError::NonUnitaryMatrix { .. } => "E_NON_UNITARY",
            ConfigError::BadParam { .. } => "E_BAD_PARAM",
            ConfigError::BadFamily { .. } => "E_BAD_FAMILY",
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax {
                line,
                column,
                message,
            } => write!(f, "{} at line {line}, column {column}: {message}", self.code()),
            ConfigError::UnknownGate { path, name } => {
                write!(f, "{} at {path}: unknown gate {name:?}", self.code())
            }
            ConfigError::BadArity {
                path,
                name,
                expected,
                got,
            } => write!(
                f,
                "{} at {path}: {name} takes {expected} qubit(s), got {got}",
                self.code()
            ),
            ConfigError::BadIndex { path, index, n } => write!(
                f,
                "{} at {path}: qubit {index} out of range for n={n}",
                self.code()
            ),
            ConfigError::NonUnitaryMatrix { path, deviation } => write!(
                f,
                "{} at {path}: raw matrix deviates from unitary by {deviation:.2e}",
                self.code()
            ),
            ConfigError::BadParam { path, message } => {
                write!(f, "{} at {path}: {message}", self.code())
            }
            ConfigError::BadFamily { message } => write!(f, "{}: {message}", self.code()),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Symbol(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GateApp {
    pub name: String,
    #[serde(default)]
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<ParamValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<[f64; 2]>>>,
}

/// The on-disk document shape.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyDocument {
    pub n: usize,
    pub gates: Vec<Vec<GateApp>>,
}

#[derive(Clone, Debug)]
enum AppOp {
    Fixed(CMat),
    /// One-parameter rotation bound at run time.
    Symbolic { kind: RotationKind },
}

#[derive(Clone, Copy, Debug)]
enum RotationKind {
    Rz,
    Rx,
}

#[derive(Clone, Debug)]
struct App {
    op: AppOp,
    qubits: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct GateProgram {
    apps: Vec<App>,
    parametric: bool,
}

impl GateProgram {
    pub fn is_parametric(&self) -> bool {
        self.parametric
    }

    /// Dense unitary of the program; `theta` binds the symbolic parameter.
    pub fn build(&self, n: usize, theta: Option<f64>) -> Result<CMat, ConfigError> {
        let mut acc = gates::identity(1 << n);
        for app in &self.apps {
            let local = match &app.op {
                AppOp::Fixed(m) => m.clone(),
                AppOp::Symbolic { kind } => {
                    let t = theta.ok_or_else(|| ConfigError::BadParam {
                        path: "run".into(),
                        message: "parametrized gate needs --theta".into(),
                    })?;
                    match kind {
                        RotationKind::Rz => gates::rz(t),
                        RotationKind::Rx => gates::rx(t),
                    }
                }
            };
            acc = gates::embed(n, &app.qubits, &local) * acc;
        }
        Ok(acc)
    }
}

/// A validated family configuration.
#[derive(Clone, Debug)]
pub struct FamilyConfig {
    pub n: usize,
    pub programs: Vec<GateProgram>,
    pub document: FamilyDocument,
}

impl FamilyConfig {
    /// Probe values for the symbolic parameter: Halton-spaced points of
    /// [0, 2pi).
    pub fn probe_values() -> Vec<f64> {
        (1..=PROBE_COUNT)
            .map(|i| halton(i, 2) * std::f64::consts::TAU)
            .collect()
    }

    pub fn to_gate_family(&self) -> Result<GateFamily, ConfigError> {
        let mut members = Vec::new();
        for (d, program) in self.programs.iter().enumerate() {
            if program.is_parametric() {
                let probes = Self::probe_values()
                    .into_iter()
                    .map(|t| Ok((t, program.build(self.n, Some(t))?)))
                    .collect::<Result<Vec<_>, ConfigError>>()?;
                members.push(FamilyGate::Parametric(probes));
            } else {
                let m = program.build(self.n, None)?;
                let _ = d;
                members.push(FamilyGate::Fixed(m));
            }
        }
        GateFamily::new(self.n, members).map_err(|e| ConfigError::BadFamily {
            message: e.to_string(),
        })
    }
}

fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn catalog_arity(name: &str) -> Option<usize> {
    match name {
        "I" | "X" | "Y" | "Z" | "H" | "S" | "Sdg" | "T" | "Rz" | "Rx" => Some(1),
        "CX" | "CZ" | "SWAP" => Some(2),
        _ => None,
    }
}

pub fn parse_family(text: &str) -> Result<FamilyConfig, ConfigError> {
    let document: FamilyDocument =
        serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    let n = document.n;
    if n == 0 || n > 5 {
        return Err(ConfigError::BadFamily {
            message: format!("register width n={n} outside 1..=5"),
        });
    }
    let mut programs = Vec::new();
    for (d, apps) in document.gates.iter().enumerate() {
        let mut validated = Vec::new();
        let mut parametric = false;
        for (j, app) in apps.iter().enumerate() {
            let path = format!("gates[{d}][{j}]");
            for &q in &app.qubits {
                if q >= n {
                    return Err(ConfigError::BadIndex {
                        path: format!("{path}.qubits"),
                        index: q,
                        n,
                    });
                }
            }
            let mut seen = app.qubits.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != app.qubits.len() {
                return Err(ConfigError::BadArity {
                    path: format!("{path}.qubits"),
                    name: app.name.clone(),
                    expected: app.qubits.len(),
                    got: seen.len(),
                });
            }
            let op = if app.name == "raw" {
                let rows = app.matrix.as_ref().ok_or_else(|| ConfigError::BadParam {
                    path: format!("{path}.matrix"),
                    message: "raw gate needs a matrix".into(),
                })?;
                if app.qubits.is_empty() {
                    return Err(ConfigError::BadArity {
                        path: format!("{path}.qubits"),
                        name: app.name.clone(),
                        expected: 1,
                        got: 0,
                    });
                }
                let dim = 1usize << app.qubits.len();
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(ConfigError::BadArity {
                        path: format!("{path}.matrix"),
                        name: app.name.clone(),
                        expected: dim,
                        got: rows.len(),
                    });
                }
                let mut m = CMat::zeros(dim, dim);
                for (r, row) in rows.iter().enumerate() {
                    for (c, &[re, im]) in row.iter().enumerate() {
                        m[(r, c)] = Complex64::new(re, im);
                    }
                }
                if !gates::is_unitary(&m, RAW_MATRIX_TOL) {
                    let dev = gates::max_norm_diff(
                        &(m.adjoint() * &m),
                        &gates::identity(dim),
                    );
                    return Err(ConfigError::NonUnitaryMatrix {
                        path: format!("{path}.matrix"),
                        deviation: dev,
                    });
                }
                AppOp::Fixed(m)
            } else {
                let Some(arity) = catalog_arity(&app.name) else {
                    return Err(ConfigError::UnknownGate {
                        path: format!("{path}.name"),
                        name: app.name.clone(),
                    });
                };
                if app.qubits.len() != arity {
                    return Err(ConfigError::BadArity {
                        path: format!("{path}.qubits"),
                        name: app.name.clone(),
                        expected: arity,
                        got: app.qubits.len(),
                    });
                }
                if app.matrix.is_some() {
                    return Err(ConfigError::BadParam {
                        path: format!("{path}.matrix"),
                        message: "matrix is only valid for raw gates".into(),
                    });
                }
                let rotation = matches!(app.name.as_str(), "Rz" | "Rx");
                match (&app.param, rotation) {
                    (None, false) => AppOp::Fixed(match app.name.as_str() {
                        "I" => gates::identity(2),
                        "X" => gates::pauli_x(),
                        "Y" => gates::pauli_y(),
                        "Z" => gates::pauli_z(),
                        "H" => gates::hadamard(),
                        "S" => gates::s_gate(),
                        "Sdg" => gates::sdg_gate(),
                        "T" => gates::t_gate(),
                        "CX" => gates::cx(),
                        "CZ" => gates::cz(),
                        "SWAP" => gates::swap(),
                        _ => unreachable!("arity table covers the catalog"),
                    }),
                    (None, true) => {
                        return Err(ConfigError::BadParam {
                            path: format!("{path}.param"),
                            message: format!("{} needs a parameter", app.name),
                        })
                    }
                    (Some(ParamValue::Number(t)), true) => AppOp::Fixed(match app.name.as_str() {
                        "Rz" => gates::rz(*t),
                        _ => gates::rx(*t),
                    }),
                    (Some(ParamValue::Symbol(_)), true) => {
                        parametric = true;
                        AppOp::Symbolic {
                            kind: if app.name == "Rz" {
                                RotationKind::Rz
                            } else {
                                RotationKind::Rx
                            },
                        }
                    }
                    (Some(_), false) => {
                        return Err(ConfigError::BadParam {
                            path: format!("{path}.param"),
                            message: format!("{} takes no parameter", app.name),
                        })
                    }
                }
            };
            validated.push(App {
                op,
                qubits: app.qubits.clone(),
            });
        }
        programs.push(GateProgram {
            apps: validated,
            parametric,
        });
    }
    if programs.is_empty() {
        return Err(ConfigError::BadFamily {
            message: "family has no gates".into(),
        });
    }
    Ok(FamilyConfig {
        n,
        programs,
        document,
    })
}
