//! Binding for an external conic solver.
//!
//! The adapter runs a configured command once per problem, writes the
//! problem as JSON to its stdin and reads a solution from its stdout. The
//! configuration is a TOML file:
//!
//! ```toml
//! [solver]
//! adapter = "process"
//! command = "/usr/local/bin/nclab"
//! args = ["solve-sdp"]
//! ```
//!
//! `nclab solve-sdp` speaks the same protocol with the built-in engine and
//! doubles as a reference implementation of the contract.

use crate::error::{CliError, Result};
use crate::specfile::{matrix_from_raw, raw_from_matrix, RawMatrix};
use nclab::conic::{Lmi, SdpOptions, SdpProblem, SdpSolution, SdpStatus, SolverAdapter};
use nclab::linalg::CMatrix;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use std::process::{Command, Stdio};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireTerm {
    pub var: usize,
    pub matrix: RawMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireBlock {
    pub size: usize,
    pub constant: RawMatrix,
    pub terms: Vec<WireTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireEquality {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// minimize `objective·y` s.t. equalities and `constant + Σ y_v M_v ⪰ 0`
/// for every block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireProblem {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub equalities: Vec<WireEquality>,
    pub blocks: Vec<WireBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireSolution {
    pub status: SdpStatus,
    pub objective: f64,
    #[serde(default)]
    pub dual_objective: Option<f64>,
    pub y: Vec<f64>,
    /// Dual matrices per block; certificates need them.
    #[serde(default)]
    pub duals: Option<Vec<RawMatrix>>,
    #[serde(default)]
    pub iterations: usize,
}

impl WireProblem {
    pub fn from_problem(p: &SdpProblem) -> Self {
        Self {
            num_vars: p.num_vars(),
            objective: p.objective().to_vec(),
            equalities: p.equalities().iter().map(|e| WireEquality { terms: e.terms.clone(), rhs: e.rhs }).collect(),
            blocks: p
                .blocks()
                .iter()
                .map(|b| WireBlock {
                    size: b.size(),
                    constant: raw_from_matrix(b.constant()),
                    terms: b.terms().iter().map(|(v, m)| WireTerm { var: *v, matrix: raw_from_matrix(m) }).collect(),
                })
                .collect(),
        }
    }

    pub fn to_problem(&self) -> Result<SdpProblem> {
        let mut p = SdpProblem::new();
        p.add_vars(self.num_vars);
        if self.objective.len() > self.num_vars {
            return Err(CliError::InvalidArgument("objective longer than the variable list".into()));
        }
        for (v, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                p.minimize(v, c);
            }
        }
        let check = |v: usize| {
            if v < self.num_vars {
                Ok(())
            } else {
                Err(CliError::InvalidArgument(format!("variable {v} out of range")))
            }
        };
        for e in &self.equalities {
            for &(v, _) in &e.terms {
                check(v)?;
            }
            p.add_eq(e.terms.clone(), e.rhs);
        }
        for b in &self.blocks {
            let mut lmi = Lmi::new(b.size);
            lmi.add_constant(&block_matrix(b.size, &b.constant)?);
            for t in &b.terms {
                check(t.var)?;
                lmi.add_term(t.var, block_matrix(b.size, &t.matrix)?);
            }
            p.add_lmi(lmi);
        }
        Ok(p)
    }
}

fn block_matrix(size: usize, raw: &RawMatrix) -> Result<CMatrix> {
    if raw.len() != size * size {
        return Err(CliError::InvalidArgument(format!("block entry count {} for size {size}", raw.len())));
    }
    Ok(matrix_from_raw(size, raw))
}

impl WireSolution {
    pub fn from_solution(s: &SdpSolution) -> Self {
        Self {
            status: s.status,
            objective: s.objective,
            dual_objective: s.dual_objective.is_finite().then_some(s.dual_objective),
            y: s.y.clone(),
            duals: Some(s.duals.iter().map(raw_from_matrix).collect()),
            iterations: s.iterations,
        }
    }

    /// Rebuild a solution for `p`; the violation is recomputed locally.
    pub fn into_solution(self, p: &SdpProblem) -> SdpSolution {
        let mut y = self.y;
        y.resize(p.num_vars(), 0.0);
        let duals = match self.duals {
            Some(d) if d.len() == p.blocks().len() => {
                d.iter().zip(p.blocks()).map(|(raw, b)| block_matrix(b.size(), raw).unwrap_or_else(|_| CMatrix::zeros(b.size(), b.size()))).collect()
            }
            _ => p.blocks().iter().map(|b| CMatrix::zeros(b.size(), b.size())).collect(),
        };
        let violation = p.violation(&y);
        SdpSolution {
            status: self.status,
            objective: p.objective_value(&y),
            dual_objective: self.dual_objective.unwrap_or(f64::NEG_INFINITY),
            y,
            duals,
            iterations: self.iterations,
            violation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SolverConfig {
    pub solver: SolverSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SolverSection {
    pub adapter: String,
    pub command: String,
    #[serde(default)]
    pub args: Vec<String>,
}

impl SolverConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SolverConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.solver.adapter != "process" {
            return Err(CliError::Config(format!("unknown adapter `{}` (expected \"process\")", cfg.solver.adapter)));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }
}

/// Solver adapter that shells out to a configured command.
#[derive(Debug, Clone)]
pub struct ProcessAdapter {
    name: String,
    command: String,
    args: Vec<String>,
}

impl ProcessAdapter {
    pub fn new(cfg: &SolverConfig) -> Self {
        Self {
            name: format!("process:{}", cfg.solver.command),
            command: cfg.solver.command.clone(),
            args: cfg.solver.args.clone(),
        }
    }

    fn run(&self, p: &SdpProblem) -> std::result::Result<SdpSolution, String> {
        let input = serde_json::to_vec(&WireProblem::from_problem(p)).map_err(|e| e.to_string())?;
        let mut child = Command::new(&self.command)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| format!("cannot start {}: {e}", self.command))?;
        child.stdin.take().expect("piped stdin").write_all(&input).map_err(|e| e.to_string())?;
        let out = child.wait_with_output().map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{} exited with {}: {}", self.command, out.status, String::from_utf8_lossy(&out.stderr).trim()));
        }
        let sol: WireSolution = serde_json::from_slice(&out.stdout).map_err(|e| format!("bad solution: {e}"))?;
        Ok(sol.into_solution(p))
    }
}

impl SolverAdapter for ProcessAdapter {
    fn name(&self) -> &str {
        &self.name
    }

    fn solve(&self, problem: &SdpProblem) -> SdpSolution {
        self.run(problem).unwrap_or_else(|_| SdpSolution {
            status: SdpStatus::NumericalFailure,
            objective: f64::NAN,
            dual_objective: f64::NEG_INFINITY,
            y: vec![0.0; problem.num_vars()],
            duals: problem.blocks().iter().map(|b| CMatrix::zeros(b.size(), b.size())).collect(),
            iterations: 0,
            violation: f64::INFINITY,
        })
    }
}

/// Solve one wire problem with the built-in engine.
pub fn serve(input: &str) -> Result<String> {
    let wire: WireProblem = serde_json::from_str(input)?;
    let p = wire.to_problem()?;
    let sol = nclab::conic::sdp::solve(&p, &SdpOptions::default());
    Ok(serde_json::to_string(&WireSolution::from_solution(&sol))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nclab::linalg::{identity, unit};

    fn small_problem() -> SdpProblem {
        // minimize t s.t. [[t, 1], [1, t]] ⪰ 0
        let mut p = SdpProblem::new();
        let t = p.add_var();
        let mut lmi = Lmi::new(2);
        lmi.add_term(t, identity(2));
        lmi.add_constant(&(unit(2, 0, 1) + unit(2, 1, 0)));
        p.add_lmi(lmi);
        p.minimize(t, 1.0);
        p
    }

    #[test]
    fn wire_round_trip_preserves_the_problem() {
        let p = small_problem();
        let w = WireProblem::from_problem(&p);
        let back = WireProblem::from_problem(&w.to_problem().unwrap());
        assert_eq!(w, back);
    }

    #[test]
    fn serve_solves() {
        let p = small_problem();
        let out = serve(&serde_json::to_string(&WireProblem::from_problem(&p)).unwrap()).unwrap();
        let sol: WireSolution = serde_json::from_str(&out).unwrap();
        let sol = sol.into_solution(&p);
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.y[0] - 1.0).abs() < 1e-7);
        assert!(sol.violation < 1e-8);
    }

    #[test]
    fn config_names_the_adapter() {
        let cfg = SolverConfig::from_toml("[solver]\nadapter = \"process\"\ncommand = \"nclab\"\nargs = [\"solve-sdp\"]\n").unwrap();
        assert_eq!(cfg.solver.args, vec!["solve-sdp"]);
        assert!(SolverConfig::from_toml("[solver]\nadapter = \"mosek\"\ncommand = \"x\"\n").is_err());
    }
}
