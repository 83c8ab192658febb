//! Sparse mixed-integer conic program IR.
//!
//! A program maximizes an affine objective subject to blocks of affine rows
//! constrained to lie in a cone:
//!
//! * [`Cone::Zero`]: every row equals zero,
//! * [`Cone::Nonnegative`]: every row is nonnegative,
//! * [`Cone::SecondOrder`]: `rows[0] >= ||rows[1..]||`.
//!
//! Variables carry optional box bounds; binary variables are bounded to
//! `[0, 1]` and relaxed to that interval by continuous solves.

mod backend;
mod expr;
pub mod reform;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

pub use backend::{solve_relaxation, ClarabelBackend, ConicBackend};
pub use expr::LinExpr;
pub use reform::{
    add_exp_upper_bound, add_geometric_mean_tree, add_hyperbolic, add_qol_taylor_bound, add_shifted_exp_upper_bound,
    add_soc_quadratic_le_linear, taylor_rhs, TaylorPoint,
};

use crate::error::{Error, Result};

pub type VarId = usize;

/// Binary fixings: `true` pins a variable to 1, `false` to 0.
pub type Fixing = BTreeMap<VarId, bool>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cone {
    Zero,
    Nonnegative,
    SecondOrder,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub rows: Vec<LinExpr>,
    pub cone: Cone,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Bounds {
    pub const FREE: Bounds = Bounds {
        lower: None,
        upper: None,
    };

    pub fn fixed_value(&self) -> Option<f64> {
        match (self.lower, self.upper) {
            (Some(l), Some(u)) if l == u => Some(l),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConicProgram {
    names: Vec<String>,
    bounds: Vec<Bounds>,
    objective: LinExpr,
    constraints: Vec<Constraint>,
    binaries: BTreeSet<VarId>,
    one_hot: Vec<Vec<VarId>>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> VarId {
        self.names.push(name.into());
        self.bounds.push(Bounds::FREE);
        self.names.len() - 1
    }

    pub fn add_var_bounded(&mut self, name: impl Into<String>, lower: Option<f64>, upper: Option<f64>) -> VarId {
        let v = self.add_var(name);
        self.bounds[v] = Bounds { lower, upper };
        v
    }

    pub fn add_nonneg_var(&mut self, name: impl Into<String>) -> VarId {
        self.add_var_bounded(name, Some(0.0), None)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        let v = self.add_var_bounded(name, Some(0.0), Some(1.0));
        self.binaries.insert(v);
        v
    }

    /// Declares that exactly one of `vars` is 1. Adds the equality row and
    /// records the group so branching can fix the whole group at once.
    pub fn add_one_hot(&mut self, vars: Vec<VarId>) -> Result<()> {
        if vars.is_empty() || vars.iter().any(|v| !self.binaries.contains(v)) {
            return Err(Error::Program(
                "one-hot group must be a nonempty set of binaries".into(),
            ));
        }
        let sum = vars.iter().fold(LinExpr::constant(-1.0), |e, &v| e + LinExpr::var(v));
        self.add_constraint(vec![sum], Cone::Zero)?;
        self.one_hot.push(vars);
        Ok(())
    }

    pub fn set_bounds(&mut self, v: VarId, lower: Option<f64>, upper: Option<f64>) -> Result<()> {
        self.check_var(v)?;
        if let (Some(l), Some(u)) = (lower, upper) {
            if l > u {
                return Err(Error::Program(format!("empty bounds [{l}, {u}] for {}", self.names[v])));
            }
        }
        if self.binaries.contains(&v) && !(lower.unwrap_or(f64::NAN) >= 0.0 && upper.unwrap_or(f64::NAN) <= 1.0) {
            return Err(Error::Program(format!(
                "binary {} must stay within [0, 1]",
                self.names[v]
            )));
        }
        self.bounds[v] = Bounds { lower, upper };
        Ok(())
    }

    /// Pins a variable to a constant through its bounds.
    pub fn fix(&mut self, v: VarId, value: f64) -> Result<()> {
        self.set_bounds(v, Some(value), Some(value))
    }

    fn check_var(&self, v: VarId) -> Result<()> {
        if v >= self.names.len() {
            return Err(Error::Program(format!("variable index {v} out of range")));
        }
        Ok(())
    }

    pub fn add_constraint(&mut self, rows: Vec<LinExpr>, cone: Cone) -> Result<()> {
        if rows.is_empty() {
            return Err(Error::Program("constraint with no rows".into()));
        }
        if cone == Cone::SecondOrder && rows.len() < 2 {
            return Err(Error::Program("second-order cone needs dimension >= 2".into()));
        }
        for r in &rows {
            for &(v, c) in r.terms() {
                self.check_var(v)?;
                if !c.is_finite() {
                    return Err(Error::Program(format!("non-finite coefficient on {}", self.names[v])));
                }
            }
            if !r.constant_term().is_finite() {
                return Err(Error::Program("non-finite constant".into()));
            }
        }
        self.constraints.push(Constraint { rows, cone });
        Ok(())
    }

    /// `lhs <= rhs`.
    pub fn add_le(&mut self, lhs: LinExpr, rhs: LinExpr) -> Result<()> {
        self.add_constraint(vec![rhs - lhs], Cone::Nonnegative)
    }

    pub fn add_eq(&mut self, lhs: LinExpr, rhs: LinExpr) -> Result<()> {
        self.add_constraint(vec![lhs - rhs], Cone::Zero)
    }

    /// `||tail|| <= head`.
    pub fn add_soc(&mut self, head: LinExpr, tail: Vec<LinExpr>) -> Result<()> {
        let mut rows = Vec::with_capacity(tail.len() + 1);
        rows.push(head);
        rows.extend(tail);
        self.add_constraint(rows, Cone::SecondOrder)
    }

    pub fn maximize(&mut self, objective: LinExpr) -> Result<()> {
        for &(v, _) in objective.terms() {
            self.check_var(v)?;
        }
        self.objective = objective;
        Ok(())
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn bounds(&self) -> &[Bounds] {
        &self.bounds
    }

    pub fn binaries(&self) -> &BTreeSet<VarId> {
        &self.binaries
    }

    pub fn one_hot_groups(&self) -> &[Vec<VarId>] {
        &self.one_hot
    }

    pub fn name(&self, v: VarId) -> &str {
        &self.names[v]
    }

    /// Binaries whose bounds already pin them to 0 or 1.
    pub fn bound_fixing(&self) -> Fixing {
        self.binaries
            .iter()
            .filter_map(|&v| self.bounds[v].fixed_value().map(|x| (v, x >= 0.5)))
            .collect()
    }

    /// Writes the program in a line-oriented text format:
    ///
    /// ```text
    /// vars <n>
    /// var <id> <name> <lower|-inf> <upper|inf> [binary]
    /// objective max <const> <id>:<coef> ...
    /// cone <zero|nonneg|soc> <dim>
    /// row <const> <id>:<coef> ...
    /// onehot <id> <id> ...
    /// ```
    pub fn to_text(&self) -> String {
        let fmt_expr = |e: &LinExpr| {
            let mut s = format!("{:e}", e.constant_term());
            for &(v, c) in e.terms() {
                let _ = write!(s, " {v}:{c:e}");
            }
            s
        };
        let mut out = String::new();
        let _ = writeln!(out, "vars {}", self.num_vars());
        for (i, (name, b)) in self.names.iter().zip(&self.bounds).enumerate() {
            let lo = b.lower.map_or("-inf".to_string(), |x| format!("{x:e}"));
            let hi = b.upper.map_or("inf".to_string(), |x| format!("{x:e}"));
            let bin = if self.binaries.contains(&i) { " binary" } else { "" };
            let _ = writeln!(out, "var {i} {name} {lo} {hi}{bin}");
        }
        let _ = writeln!(out, "objective max {}", fmt_expr(&self.objective));
        for c in &self.constraints {
            let tag = match c.cone {
                Cone::Zero => "zero",
                Cone::Nonnegative => "nonneg",
                Cone::SecondOrder => "soc",
            };
            let _ = writeln!(out, "cone {tag} {}", c.rows.len());
            for r in &c.rows {
                let _ = writeln!(out, "row {}", fmt_expr(r));
            }
        }
        for g in &self.one_hot {
            let ids: Vec<String> = g.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "onehot {}", ids.join(" "));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub values: Vec<f64>,
    pub objective_value: f64,
    pub status: SolveStatus,
}

impl Solution {
    pub fn failed(status: SolveStatus, num_vars: usize) -> Self {
        Self {
            values: vec![f64::NAN; num_vars],
            objective_value: f64::NAN,
            status,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Violation of each constraint block at `point`, in program order.
pub fn residuals(prog: &ConicProgram, point: &[f64]) -> Result<Vec<f64>> {
    if point.len() != prog.num_vars() {
        return Err(Error::Shape(format!(
            "point has {} entries, program has {} variables",
            point.len(),
            prog.num_vars()
        )));
    }
    Ok(prog
        .constraints
        .iter()
        .map(|c| {
            let vals: Vec<f64> = c.rows.iter().map(|r| r.eval(point)).collect();
            match c.cone {
                Cone::Zero => vals.iter().fold(0.0f64, |m, x| m.max(x.abs())),
                Cone::Nonnegative => vals.iter().fold(0.0f64, |m, x| m.max(-x)),
                Cone::SecondOrder => {
                    let tail = vals[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
                    (tail - vals[0]).max(0.0)
                }
            }
        })
        .collect())
}

/// Bound violation per variable at `point`, honoring `fixing`.
pub fn bound_residuals(prog: &ConicProgram, point: &[f64], fixing: &Fixing) -> Vec<f64> {
    prog.bounds
        .iter()
        .enumerate()
        .map(|(v, b)| {
            let x = point[v];
            if let Some(&f) = fixing.get(&v) {
                return (x - if f { 1.0 } else { 0.0 }).abs();
            }
            let lo = b.lower.map_or(0.0, |l| (l - x).max(0.0));
            let hi = b.upper.map_or(0.0, |u| (x - u).max(0.0));
            lo.max(hi)
        })
        .collect()
}

/// Largest constraint or bound violation.
pub fn max_violation(prog: &ConicProgram, point: &[f64], fixing: &Fixing) -> Result<f64> {
    let r = residuals(prog, point)?;
    let b = bound_residuals(prog, point, fixing);
    Ok(r.into_iter().chain(b).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_kinds() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        let y = p.add_var("y");
        let z = p.add_var("z");
        p.add_le(LinExpr::var(x), LinExpr::constant(3.0)).unwrap();
        p.add_eq(LinExpr::var(y), LinExpr::constant(1.0)).unwrap();
        p.add_soc(LinExpr::var(z), vec![LinExpr::var(x), LinExpr::var(y)])
            .unwrap();
        let r = residuals(&p, &[4.0, 1.0, 5.0]).unwrap();
        assert_eq!(r[0], 1.0);
        assert_eq!(r[1], 0.0);
        assert_eq!(r[2], 0.0);
        let r = residuals(&p, &[3.0, 1.5, 1.0]).unwrap();
        assert!(r.iter().take(1).all(|&v| v <= 1e-9));
        assert_eq!(r[1], 0.5);
        assert!((r[2] - ((9.0f64 + 2.25).sqrt() - 1.0)).abs() < 1e-12);
        assert!(residuals(&p, &[1.0]).is_err());
    }

    #[test]
    fn malformed_constraints_rejected() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        assert!(p.add_constraint(vec![LinExpr::var(x)], Cone::SecondOrder).is_err());
        assert!(p.add_constraint(vec![LinExpr::var(7)], Cone::Nonnegative).is_err());
        assert!(p.add_constraint(vec![], Cone::Zero).is_err());
        let b = p.add_binary("a");
        assert!(p.set_bounds(b, Some(0.0), Some(2.0)).is_err());
        assert!(p.add_one_hot(vec![x]).is_err());
        assert!(p.add_one_hot(vec![b]).is_ok());
        assert_eq!(p.one_hot_groups().len(), 1);
    }

    #[test]
    fn text_dump_lists_everything() {
        let mut p = ConicProgram::new();
        let x = p.add_nonneg_var("x");
        let a = p.add_binary("a");
        p.add_one_hot(vec![a]).unwrap();
        p.add_soc(LinExpr::constant(1.0), vec![LinExpr::var(x)]).unwrap();
        p.maximize(LinExpr::var(x)).unwrap();
        let t = p.to_text();
        assert!(t.starts_with("vars 2\n"));
        assert!(t.contains("var 1 a 0e0 1e0 binary"));
        assert!(t.contains("cone soc 2"));
        assert!(t.contains("onehot 1"));
        assert!(t.contains("objective max 0e0 0:1e0"));
    }
}
