//! A small owned LP representation with named rows and columns, solved by the
//! statically linked HiGHS simplex, single-threaded so pivoting is repeatable.

use std::fmt::Write as _;

use highs::{HighsModelStatus, RowProblem, Sense};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cmp {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("solver failure: {0}")]
    Solver(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    /// Objective including the constant term, evaluated at `values`.
    pub objective: f64,
    pub values: Vec<f64>,
    /// Largest bound or constraint violation of `values`.
    pub max_residual: f64,
}

impl LpSolution {
    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }
}

/// Maximization problem `max c·x + c0` subject to linear rows and bounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective_constant: f64,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, objective: f64) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            objective,
        });
        VarId(self.variables.len() - 1)
    }

    pub fn add_objective(&mut self, v: VarId, coeff: f64) {
        self.variables[v.0].objective += coeff;
    }

    pub fn add_constraint(&mut self, name: impl Into<String>, terms: Vec<(VarId, f64)>, cmp: Cmp, rhs: f64) {
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            cmp,
            rhs,
        });
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        for v in &self.variables {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper || !v.objective.is_finite() {
                return Err(LpError::Malformed(format!("variable `{}`", v.name)));
            }
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(LpError::Malformed(format!("rhs of `{}`", c.name)));
            }
            for (v, a) in &c.terms {
                if v.0 >= self.variables.len() || !a.is_finite() {
                    return Err(LpError::Malformed(format!("term in `{}`", c.name)));
                }
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.objective_constant
            + self
                .variables
                .iter()
                .zip(values)
                .map(|(v, x)| v.objective * x)
                .sum::<f64>()
    }

    /// Largest violation of any bound or row by `values`.
    pub fn max_residual(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &x) in self.variables.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        for c in &self.constraints {
            let lhs: f64 = c.terms.iter().map(|(v, a)| a * values[v.0]).sum();
            let gap = match c.cmp {
                Cmp::Le => lhs - c.rhs,
                Cmp::Ge => c.rhs - lhs,
                Cmp::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(gap);
        }
        worst
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        self.validate()?;
        if self.variables.is_empty() {
            if self.max_residual(&[]) > 0.0 {
                return Err(LpError::Infeasible);
            }
            return Ok(LpSolution {
                objective: self.objective_constant,
                values: Vec::new(),
                max_residual: 0.0,
            });
        }
        match self.run_highs(true)? {
            Ok(values) => Ok(LpSolution {
                objective: self.evaluate(&values),
                max_residual: self.max_residual(&values),
                values,
            }),
            // Presolve cannot always tell these apart; the plain simplex can.
            Err(HighsModelStatus::UnboundedOrInfeasible) => match self.run_highs(false)? {
                Ok(_) => Err(LpError::Solver("inconsistent status after presolve".into())),
                Err(HighsModelStatus::Unbounded) => Err(LpError::Unbounded),
                Err(_) => Err(LpError::Infeasible),
            },
            Err(HighsModelStatus::Infeasible) => Err(LpError::Infeasible),
            Err(HighsModelStatus::Unbounded) => Err(LpError::Unbounded),
            Err(status) => Err(LpError::Solver(format!("{status:?}"))),
        }
    }

    fn run_highs(&self, presolve: bool) -> Result<Result<Vec<f64>, HighsModelStatus>, LpError> {
        let mut problem = RowProblem::default();
        let cols: Vec<_> = self
            .variables
            .iter()
            .map(|v| problem.add_column(v.objective, v.lower..=v.upper))
            .collect();
        for c in &self.constraints {
            let terms: Vec<_> = c.terms.iter().map(|(v, a)| (cols[v.0], *a)).collect();
            match c.cmp {
                Cmp::Le => problem.add_row(..=c.rhs, terms),
                Cmp::Ge => problem.add_row(c.rhs.., terms),
                Cmp::Eq => problem.add_row(c.rhs..=c.rhs, terms),
            }
        }
        let mut model = problem
            .try_optimise(Sense::Maximise)
            .map_err(|e| LpError::Solver(format!("{e:?}")))?;
        model.make_quiet();
        model.set_option("threads", 1);
        model.set_option("parallel", "off");
        model.set_option("presolve", if presolve { "choose" } else { "off" });
        let solved = model.try_solve().map_err(|e| LpError::Solver(format!("{e:?}")))?;
        Ok(match solved.status() {
            HighsModelStatus::Optimal => Ok(solved.get_solution().columns().to_vec()),
            other => Err(other),
        })
    }

    /// CPLEX LP text format, for cross-checking with external solvers.
    pub fn to_lp_format(&self) -> String {
        let col = |i: usize| format!("{}_{}", sanitize(&self.variables[i].name), i);
        let mut out = String::new();
        if self.objective_constant != 0.0 {
            let _ = writeln!(out, "\\ objective constant {}", self.objective_constant);
        }
        out.push_str("Maximize\n obj:");
        let mut any = false;
        for (i, v) in self.variables.iter().enumerate() {
            if v.objective != 0.0 {
                let _ = write!(out, " {} {}", signed(v.objective), col(i));
                any = true;
            }
        }
        if !any {
            out.push_str(" 0 ");
            out.push_str(&col(0));
        }
        out.push_str("\nSubject To\n");
        for (r, c) in self.constraints.iter().enumerate() {
            let _ = write!(out, " {}_{}:", sanitize(&c.name), r);
            if c.terms.is_empty() {
                out.push_str(" 0 ");
                out.push_str(&col(0));
            }
            for (v, a) in &c.terms {
                let _ = write!(out, " {} {}", signed(*a), col(v.0));
            }
            let op = match c.cmp {
                Cmp::Le => "<=",
                Cmp::Eq => "=",
                Cmp::Ge => ">=",
            };
            let _ = writeln!(out, " {op} {}", c.rhs);
        }
        out.push_str("Bounds\n");
        for (i, v) in self.variables.iter().enumerate() {
            let name = col(i);
            match (v.lower.is_finite(), v.upper.is_finite()) {
                (false, false) => {
                    let _ = writeln!(out, " {name} free");
                }
                (true, true) => {
                    let _ = writeln!(out, " {} <= {name} <= {}", v.lower, v.upper);
                }
                (true, false) => {
                    let _ = writeln!(out, " {name} >= {}", v.lower);
                }
                (false, true) => {
                    let _ = writeln!(out, " -inf <= {name} <= {}", v.upper);
                }
            }
        }
        out.push_str("End\n");
        out
    }
}

fn signed(a: f64) -> String {
    if a < 0.0 {
        format!("- {}", -a)
    } else {
        format!("+ {a}")
    }
}

fn sanitize(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if s.starts_with(|c: char| c.is_ascii_digit()) || s.is_empty() {
        format!("v{s}")
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bound() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, f64::INFINITY, 1.0);
        lp.add_constraint("cap", vec![(x, 1.0)], Cmp::Le, 5.0);
        let s = lp.solve().unwrap();
        assert!((s.objective - 5.0).abs() < 1e-9);
        assert!(s.max_residual < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, f64::INFINITY, 1.0);
        lp.add_constraint("neg", vec![(x, 1.0)], Cmp::Le, -1.0);
        assert_eq!(lp.solve().unwrap_err(), LpError::Infeasible);

        let mut lp = LinearProgram::new();
        lp.add_var("x", 0.0, f64::INFINITY, 1.0);
        assert_eq!(lp.solve().unwrap_err(), LpError::Unbounded);
    }

    #[test]
    fn constant_is_included() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, 2.0, -1.0);
        lp.objective_constant = 3.0;
        let s = lp.solve().unwrap();
        assert_eq!(s.value(x), 0.0);
        assert_eq!(s.objective, 3.0);
    }

    #[test]
    fn malformed_rejected() {
        let mut lp = LinearProgram::new();
        lp.add_var("x", 1.0, 0.0, 1.0);
        assert!(matches!(lp.solve(), Err(LpError::Malformed(_))));
    }

    #[test]
    fn lp_format_dump() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("R[a->b]", 0.0, f64::INFINITY, 2.0);
        let y = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, -1.0);
        lp.add_constraint("bal", vec![(x, 1.0), (y, -1.0)], Cmp::Eq, 0.0);
        let text = lp.to_lp_format();
        assert!(text.starts_with("Maximize\n obj: + 2 R_a__b__0 - 1 x_1\n"));
        assert!(text.contains(" bal_0: + 1 R_a__b__0 - 1 x_1 = 0\n"));
        assert!(text.contains(" x_1 free\n"));
        assert!(text.ends_with("End\n"));
    }
}
