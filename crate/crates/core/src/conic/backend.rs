use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use super::{max_violation, Cone, ConicProgram, Fixing, Solution, SolveStatus};

/// A continuous conic solver.
///
/// Implementations solve the relaxation of `prog` in which binaries listed in
/// `fixing` are pinned and every other variable keeps its declared bounds.
/// An `Optimal` answer must be primal feasible to about `1e-7` and have a
/// relative duality gap of about `1e-7`; anything else is reported through
/// [`SolveStatus`], never by panicking.
pub trait ConicBackend: Send + Sync {
    fn solve(&self, prog: &ConicProgram, fixing: &Fixing) -> Solution;
}

/// Solves the continuous relaxation of `prog` with `fixing` applied.
pub fn solve_relaxation(prog: &ConicProgram, fixing: &Fixing, backend: &dyn ConicBackend) -> Solution {
    backend.solve(prog, fixing)
}

/// Interior-point backend built on Clarabel.
#[derive(Clone, Debug)]
pub struct ClarabelBackend {
    pub tolerance: f64,
    pub max_iter: u32,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iter: 200,
        }
    }
}

struct Assembled {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

impl Assembled {
    fn push_cone(&mut self, cone: Cone, dim: usize) {
        let merged = match (self.cones.last_mut(), cone) {
            (Some(SupportedConeT::ZeroConeT(d)), Cone::Zero) => {
                *d += dim;
                true
            }
            (Some(SupportedConeT::NonnegativeConeT(d)), Cone::Nonnegative) => {
                *d += dim;
                true
            }
            _ => false,
        };
        if !merged {
            self.cones.push(match cone {
                Cone::Zero => SupportedConeT::ZeroConeT(dim),
                Cone::Nonnegative => SupportedConeT::NonnegativeConeT(dim),
                Cone::SecondOrder => SupportedConeT::SecondOrderConeT(dim),
            });
        }
    }

    // row expression a.x + c in K  <=>  s = c - (-a).x
    fn push_row(&mut self, terms: &[(usize, f64)], constant: f64) {
        let r = self.b.len();
        for &(v, c) in terms {
            self.rows.push(r);
            self.cols.push(v);
            self.vals.push(-c);
        }
        self.b.push(constant);
    }
}

/// Values of variables pinned by `fixing` or by equal bounds.
fn fixed_values(prog: &ConicProgram, fixing: &Fixing) -> Vec<Option<f64>> {
    let mut fixed: Vec<Option<f64>> = prog.bounds().iter().map(|b| b.fixed_value()).collect();
    for (&v, &val) in fixing {
        fixed[v] = Some(if val { 1.0 } else { 0.0 });
    }
    fixed
}

/// Fixed variables are substituted into every constraint row, so couplings
/// such as `x <= M a` hold exactly at `a = 0`. Each keeps a single equality
/// row of its own.
fn assemble(prog: &ConicProgram, fixing: &Fixing) -> Assembled {
    let fixed = fixed_values(prog, fixing);
    let mut a = Assembled {
        rows: Vec::new(),
        cols: Vec::new(),
        vals: Vec::new(),
        b: Vec::new(),
        cones: Vec::new(),
    };
    let mut free = Vec::new();
    for c in prog.constraints() {
        for r in &c.rows {
            free.clear();
            let mut constant = r.constant_term();
            for &(v, coef) in r.terms() {
                match fixed[v] {
                    Some(val) => constant += coef * val,
                    None => free.push((v, coef)),
                }
            }
            a.push_row(&free, constant);
        }
        a.push_cone(c.cone, c.rows.len());
    }
    let mut fixed_rows = 0;
    for (&v, &val) in fixing {
        a.push_row(&[(v, 1.0)], -if val { 1.0 } else { 0.0 });
        fixed_rows += 1;
    }
    if fixed_rows > 0 {
        a.push_cone(Cone::Zero, fixed_rows);
    }
    let mut bound_rows = 0;
    for (v, bd) in prog.bounds().iter().enumerate() {
        if fixing.contains_key(&v) {
            continue;
        }
        if let Some(fixed) = bd.fixed_value() {
            a.push_row(&[(v, 1.0)], -fixed);
            a.push_cone(Cone::Zero, 1);
            continue;
        }
        if let Some(l) = bd.lower {
            a.push_row(&[(v, 1.0)], -l);
            bound_rows += 1;
        }
        if let Some(u) = bd.upper {
            a.push_row(&[(v, -1.0)], u);
            bound_rows += 1;
        }
        if bound_rows > 0 {
            a.push_cone(Cone::Nonnegative, bound_rows);
            bound_rows = 0;
        }
    }
    a
}

/// Outcome of one Clarabel run, before acceptance.
enum Attempt {
    Done(Solution),
    Retry(Solution),
}

impl ClarabelBackend {
    fn attempt(
        &self,
        prog: &ConicProgram,
        fixing: &Fixing,
        asm: &Assembled,
        fixed: &[Option<f64>],
        settings: DefaultSettings<f64>,
    ) -> Attempt {
        let n = prog.num_vars();
        let m = asm.b.len();
        let a = CscMatrix::new_from_triplets(m, n, asm.rows.clone(), asm.cols.clone(), asm.vals.clone());
        let p = CscMatrix::zeros((n, n));
        let mut q = vec![0.0; n];
        for &(v, c) in prog.objective().terms() {
            q[v] -= c;
        }
        // unit-scale cost; the reported objective is re-evaluated below
        let cost_scale = q.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if cost_scale > 0.0 {
            q.iter_mut().for_each(|c| *c /= cost_scale);
        }
        let mut solver = match DefaultSolver::new(&p, &q, &a, &asm.b, &asm.cones, settings) {
            Ok(s) => s,
            Err(_) => return Attempt::Done(Solution::failed(SolveStatus::NumericalFailure, n)),
        };
        solver.solve();
        let sol = &solver.solution;
        if sol.x.iter().any(|x| !x.is_finite()) {
            return Attempt::Retry(Solution::failed(SolveStatus::NumericalFailure, n));
        }
        let mut x = sol.x.clone();
        for (xi, f) in x.iter_mut().zip(fixed) {
            if let Some(val) = f {
                *xi = *val;
            }
        }
        let accepted = Solution {
            objective_value: prog.objective().eval(&x),
            values: x,
            status: SolveStatus::Optimal,
        };
        match sol.status {
            SolverStatus::Solved => Attempt::Done(accepted),
            SolverStatus::AlmostSolved => {
                let scale = 1.0 + accepted.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                match max_violation(prog, &accepted.values, fixing) {
                    Ok(v) if v <= 1e-7 * scale => Attempt::Retry(accepted),
                    _ => Attempt::Retry(Solution::failed(SolveStatus::NumericalFailure, n)),
                }
            }
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                Attempt::Done(Solution::failed(SolveStatus::Infeasible, n))
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                Attempt::Done(Solution::failed(SolveStatus::Unbounded, n))
            }
            _ => Attempt::Retry(Solution::failed(SolveStatus::NumericalFailure, n)),
        }
    }
}

impl ConicBackend for ClarabelBackend {
    /// Runs Clarabel at the configured tolerance; a reduced-accuracy or
    /// stalled run is retried without equilibration and then at a tenfold
    /// looser tolerance. The best acceptable attempt wins.
    fn solve(&self, prog: &ConicProgram, fixing: &Fixing) -> Solution {
        let asm = assemble(prog, fixing);
        let fixed = fixed_values(prog, fixing);
        let base = |tol: f64, equilibrate: bool| DefaultSettings {
            verbose: false,
            presolve_enable: false,
            max_iter: self.max_iter,
            tol_gap_abs: tol,
            tol_gap_rel: tol,
            tol_feas: tol,
            equilibrate_enable: equilibrate,
            ..DefaultSettings::default()
        };
        let ladder = [
            base(self.tolerance, true),
            base(self.tolerance, false),
            base(self.tolerance * 10.0, true),
        ];
        let mut fallback = None;
        for settings in ladder {
            match self.attempt(prog, fixing, &asm, &fixed, settings) {
                Attempt::Done(s) => return s,
                Attempt::Retry(s) => {
                    if fallback
                        .as_ref()
                        .map_or(true, |f: &Solution| f.status != SolveStatus::Optimal)
                    {
                        fallback = Some(s);
                    }
                }
            }
        }
        fallback.unwrap_or_else(|| Solution::failed(SolveStatus::NumericalFailure, prog.num_vars()))
    }
}
