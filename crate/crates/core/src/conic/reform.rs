//! Second-order-cone reformulations used by the JUBD subproblems.

use super::{ConicProgram, LinExpr, VarId};
use crate::error::{Error, Result};

/// `z^2 <= x y` with `x, y >= 0`, encoded as `||[2z, x - y]|| <= x + y`.
pub fn add_hyperbolic(prog: &mut ConicProgram, z: LinExpr, x: LinExpr, y: LinExpr) -> Result<()> {
    prog.add_soc(x.clone() + y.clone(), vec![z * 2.0, x - y])
}

/// Builds the binary tree of hyperbolic constraints whose root is bounded by
/// the geometric mean of `leaves`.
///
/// For `2^Q` leaves this adds `2^Q - 1` variables `z[q][i]` with
/// `z[Q][i]^2 <= t[2i-1] t[2i]` and `z[q][i]^2 <= z[q+1][2i-1] z[q+1][2i]`,
/// and returns the root `z[1][1]`. Maximizing the root therefore maximizes
/// `(prod t)^(1/2^Q)`. A single leaf is its own root.
pub fn add_geometric_mean_tree(prog: &mut ConicProgram, leaves: &[VarId]) -> Result<VarId> {
    let n = leaves.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Program(format!(
            "geometric-mean tree needs a power-of-two leaf count, got {n}"
        )));
    }
    let depth = n.trailing_zeros() as usize;
    let mut level: Vec<VarId> = leaves.to_vec();
    for q in (1..=depth).rev() {
        let mut parents = Vec::with_capacity(level.len() / 2);
        for (i, pair) in level.chunks_exact(2).enumerate() {
            let z = prog.add_var(format!("z[{q}][{}]", i + 1));
            add_hyperbolic(prog, LinExpr::var(z), LinExpr::var(pair[0]), LinExpr::var(pair[1]))?;
            parents.push(z);
        }
        level = parents;
    }
    Ok(level[0])
}

/// Constrains `exp(t) <= bound` through the second-order-cone approximation
/// of accuracy `m`:
///
/// ```text
/// k[m+4] <= bound
/// ||[2 + t/2^(m-1), 1 - k1]|| <= 1 + k1      (k1 >= (1 + t/2^m)^2)
/// ||[5/3 + t/2^m,   1 - k2]|| <= 1 + k2      (k2 >= (5/6 + t/2^(m+1))^2)
/// ||[2 k1,          1 - k3]|| <= 1 + k3      (k3 >= k1^2)
/// 19/72 + k2 + k3/24 <= k4                   (4th-order Taylor of exp(t/2^m))
/// ||[2 k(i-1),      1 - ki]|| <= 1 + ki,  i = 5..m+4   (m squarings)
/// ```
///
/// Returns the slack variables `k1..k(m+4)`. The chain evaluates
/// `T4(t/2^m)^(2^m)` with `T4` the quartic Taylor polynomial, so the bound
/// over-estimates `exp(t)` for `t < 0` and slightly under-estimates it for
/// `t > 0`. Relative error stays below 1% on `[-3, 3]` for `m >= 6`.
pub fn add_exp_upper_bound(prog: &mut ConicProgram, t: VarId, bound: LinExpr, m: u32) -> Result<Vec<VarId>> {
    add_shifted_exp_upper_bound(prog, t, 0.0, bound, m)
}

/// [`add_exp_upper_bound`] applied to `exp(t - shift) <= bound`. Centering
/// `t` near zero keeps the squaring chain close to one when `exp(t)` is large.
pub fn add_shifted_exp_upper_bound(
    prog: &mut ConicProgram,
    t: VarId,
    shift: f64,
    bound: LinExpr,
    m: u32,
) -> Result<Vec<VarId>> {
    if !shift.is_finite() {
        return Err(Error::Program(format!("exponential shift must be finite, got {shift}")));
    }
    if m == 0 {
        return Err(Error::Program("exponential approximation needs m >= 1".into()));
    }
    let name = prog.name(t).to_string();
    let k: Vec<VarId> = (1..=m as usize + 4)
        .map(|i| prog.add_var(format!("k[{name}][{i}]")))
        .collect();
    let kv = |i: usize| LinExpr::var(k[i - 1]);
    let scale = 2f64.powi(m as i32);
    let one = || LinExpr::constant(1.0);
    let ts = LinExpr::var(t) - shift;

    prog.add_le(kv(m as usize + 4), bound)?;
    prog.add_soc(one() + kv(1), vec![ts.clone() * (2.0 / scale) + 2.0, one() - kv(1)])?;
    prog.add_soc(one() + kv(2), vec![ts * (1.0 / scale) + 5.0 / 3.0, one() - kv(2)])?;
    prog.add_soc(one() + kv(3), vec![kv(1) * 2.0, one() - kv(3)])?;
    prog.add_le(kv(2) + kv(3) * (1.0 / 24.0) + 19.0 / 72.0, kv(4))?;
    for i in 5..=m as usize + 4 {
        prog.add_soc(one() + kv(i), vec![kv(i - 1) * 2.0, one() - kv(i)])?;
    }
    Ok(k)
}

/// Expansion point of the quadratic-over-linear bound.
#[derive(Clone, Debug, PartialEq)]
pub struct TaylorPoint {
    pub p0: Vec<f64>,
    pub q0: Vec<f64>,
    pub beta0: f64,
}

impl TaylorPoint {
    fn check(&self, slots: usize) -> Result<()> {
        if !(self.beta0 > 0.0 && self.beta0.is_finite()) {
            return Err(Error::Domain(format!(
                "expansion beta0 must be positive, got {}",
                self.beta0
            )));
        }
        if self.p0.len() != slots || self.q0.len() != slots {
            return Err(Error::Shape(format!(
                "expansion has {}/{} entries for {slots} slots",
                self.p0.len(),
                self.q0.len()
            )));
        }
        Ok(())
    }
}

/// First-order expansion of `sum_b (p_b^2 + q_b^2) / beta` at `point`,
/// evaluated at `(p, q, beta)`. Being a tangent plane of a jointly convex
/// function, it never exceeds the function for `beta > 0`.
pub fn taylor_rhs(point: &TaylorPoint, p: &[f64], q: &[f64], beta: f64) -> f64 {
    let b0 = point.beta0;
    point
        .p0
        .iter()
        .zip(&point.q0)
        .zip(p.iter().zip(q))
        .map(|((&p0, &q0), (&pb, &qb))| {
            2.0 * p0 / b0 * (pb - p0) + 2.0 * q0 / b0 * (qb - q0) + (p0 * p0 + q0 * q0) / b0 * (1.0 - (beta - b0) / b0)
        })
        .sum()
}

/// Adds `alpha <= taylor_rhs(point; p, q, beta)` as one linear row.
pub fn add_qol_taylor_bound(
    prog: &mut ConicProgram,
    alpha: LinExpr,
    p: &[LinExpr],
    q: &[LinExpr],
    beta: VarId,
    point: &TaylorPoint,
) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::Shape("p and q slot counts differ".into()));
    }
    point.check(p.len())?;
    let b0 = point.beta0;
    let mut rhs = LinExpr::zero();
    for ((pb, qb), (&p0, &q0)) in p.iter().zip(q).zip(point.p0.iter().zip(&point.q0)) {
        let energy = p0 * p0 + q0 * q0;
        rhs += (pb.clone() - p0) * (2.0 * p0 / b0);
        rhs += (qb.clone() - q0) * (2.0 * q0 / b0);
        rhs += (LinExpr::constant(1.0) - (LinExpr::var(beta) - b0) * (1.0 / b0)) * (energy / b0);
    }
    prog.add_le(alpha, rhs)
}

/// `sum_i terms_i^2 <= rhs` via `||[2 terms, rhs - 1]|| <= rhs + 1`.
/// With no terms this reduces to `rhs >= 0`.
pub fn add_soc_quadratic_le_linear(prog: &mut ConicProgram, terms: Vec<LinExpr>, rhs: LinExpr) -> Result<()> {
    if terms.is_empty() {
        return prog.add_le(LinExpr::zero(), rhs);
    }
    let mut tail: Vec<LinExpr> = terms.into_iter().map(|t| t * 2.0).collect();
    tail.push(rhs.clone() - 1.0);
    prog.add_soc(rhs + 1.0, tail)
}
