//! Search over the binary association variables of a conic program.
//!
//! The binaries of a program are expected to come in one-hot groups (one
//! group per UE, one member per candidate station), registered through
//! [`ConicProgram::add_one_hot`]. Three strategies are provided: exhaustive
//! enumeration of every fixing, best-first branch-and-bound over continuous
//! relaxations, and a single solve with all binaries fixed by the caller.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::conic::{solve_relaxation, ConicBackend, ConicProgram, Fixing, Solution, SolveStatus, VarId};
use crate::error::{Error, Result};
use crate::metrics::Association;
use crate::scenario::ChannelSet;

/// Default ceiling on the number of fixings exhaustive mode may enumerate.
pub const DEFAULT_ENUMERATION_CAP: u128 = 4096;

/// A relaxed binary within this distance of 0 or 1 counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

/// Objectives within this relative distance are ties; every mode resolves
/// ties towards the lexicographically smallest serving vector.
pub const TIE_TOL: f64 = 1e-8;

fn tie_tol(value: f64) -> f64 {
    TIE_TOL * value.abs().max(1.0)
}

/// Serving station of every group at `x`.
fn serving_key(groups: &[Vec<VarId>], x: &[f64]) -> Vec<usize> {
    groups
        .iter()
        .map(|g| {
            (0..g.len())
                .max_by(|&i, &j| x[g[i]].total_cmp(&x[g[j]]).then(j.cmp(&i)))
                .unwrap_or(0)
        })
        .collect()
}

/// Whether `cand` should replace `inc`: strictly better, or tied with a
/// smaller serving vector.
fn better(groups: &[Vec<VarId>], cand: &Solution, inc: Option<&Solution>) -> bool {
    let Some(inc) = inc else { return true };
    let tol = tie_tol(inc.objective_value);
    cand.objective_value > inc.objective_value + tol
        || (cand.objective_value >= inc.objective_value - tol
            && serving_key(groups, &cand.values) < serving_key(groups, &inc.values))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssociationMode {
    Exhaustive,
    #[serde(rename = "bnb")]
    BranchAndBound,
    #[serde(rename = "heuristic")]
    HeuristicFixed,
}

impl FromStr for AssociationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(Self::Exhaustive),
            "bnb" => Ok(Self::BranchAndBound),
            "heuristic" => Ok(Self::HeuristicFixed),
            other => Err(Error::Config(format!("unknown association mode {other:?}"))),
        }
    }
}

/// Outcome of [`solve_misocp`].
#[derive(Clone, Debug, PartialEq)]
pub struct MipSolution {
    pub solution: Solution,
    /// Continuous relaxations solved.
    pub relaxations: usize,
    /// Terminal nodes of the search: integral, infeasible or pruned.
    /// Exhaustive mode reports one leaf per fixing.
    pub leaves: usize,
    /// Relaxations that ended in a numerical failure. Such nodes are split
    /// further while binaries remain open and dropped otherwise.
    pub failures: usize,
    /// `(best discarded bound - incumbent) / max(1, |incumbent|)`, floored at 0.
    pub bound_gap: f64,
}

/// Iterator over every association of `num_ues` UEs to `num_stations`
/// stations, in lexicographic order of the serving vector.
#[derive(Clone, Debug)]
pub struct AssociationIter {
    num_stations: usize,
    next: Option<Vec<usize>>,
}

impl Iterator for AssociationIter {
    type Item = Association;

    fn next(&mut self) -> Option<Association> {
        let cur = self.next.take()?;
        let mut succ = cur.clone();
        let mut advanced = false;
        for slot in succ.iter_mut().rev() {
            if *slot + 1 < self.num_stations {
                *slot += 1;
                advanced = true;
                break;
            }
            *slot = 0;
        }
        if advanced {
            self.next = Some(succ);
        }
        Some(Association::new(self.num_stations, cur).expect("indices in range"))
    }
}

/// All `num_stations^num_ues` associations, or an error when that exceeds `cap`.
pub fn enumerate_associations(num_stations: usize, num_ues: usize, cap: u128) -> Result<AssociationIter> {
    let needed = (num_stations as u128).checked_pow(num_ues as u32).unwrap_or(u128::MAX);
    if needed > cap {
        return Err(Error::EnumerationCap { needed, cap });
    }
    let next = if num_stations == 0 {
        None
    } else {
        Some(vec![0; num_ues])
    };
    Ok(AssociationIter { num_stations, next })
}

/// Assigns every UE to `argmax_b powers[b] * ||h_u^b||^2`; ties go to the
/// lowest station index.
pub fn heuristic_association(channels: &ChannelSet, powers: &[f64]) -> Result<Association> {
    let nb = channels.num_stations();
    if nb == 0 {
        return Err(Error::Shape("no stations".into()));
    }
    if powers.len() != nb {
        return Err(Error::Shape(format!("{} powers for {nb} stations", powers.len())));
    }
    let serving = (0..channels.num_ues)
        .map(|u| {
            let mut best = (0, f64::NEG_INFINITY);
            for (b, &p) in powers.iter().enumerate() {
                let gain = p * channels.h(b, u).iter().map(|z| z.norm_sqr()).sum::<f64>();
                if gain > best.1 {
                    best = (b, gain);
                }
            }
            best.0
        })
        .collect();
    Association::new(nb, serving)
}

/// Open members of each one-hot group under `fixing`.
fn open_options(groups: &[Vec<VarId>], fixing: &Fixing) -> Vec<Vec<VarId>> {
    groups
        .iter()
        .map(|g| {
            if let Some(&one) = g.iter().find(|v| fixing.get(v) == Some(&true)) {
                vec![one]
            } else {
                g.iter().copied().filter(|v| fixing.get(v) != Some(&false)).collect()
            }
        })
        .collect()
}

/// Fixes every group that has a single open member; `None` when a group has
/// no open member left.
fn propagate(groups: &[Vec<VarId>], mut fixing: Fixing) -> Option<Fixing> {
    for (g, open) in groups.iter().zip(open_options(groups, &fixing)) {
        match open.len() {
            0 => return None,
            1 => {
                for &v in g {
                    fixing.insert(v, v == open[0]);
                }
            }
            _ => {}
        }
    }
    Some(fixing)
}

fn check_groups(prog: &ConicProgram) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for g in prog.one_hot_groups() {
        for &v in g {
            if !prog.binaries().contains(&v) || !seen.insert(v) {
                return Err(Error::Program(format!(
                    "variable {} is not a binary of exactly one group",
                    prog.name(v)
                )));
            }
        }
    }
    if seen.len() != prog.binaries().len() {
        return Err(Error::Program("every binary must belong to a one-hot group".into()));
    }
    Ok(())
}

fn relative_gap(bound: f64, incumbent: f64) -> f64 {
    ((bound - incumbent) / incumbent.abs().max(1.0)).max(0.0)
}

fn finish(
    best: Option<Solution>,
    n: usize,
    relaxations: usize,
    leaves: usize,
    failures: usize,
    gap: f64,
) -> MipSolution {
    let solution = best.unwrap_or_else(|| {
        let status = if failures > 0 {
            SolveStatus::NumericalFailure
        } else {
            SolveStatus::Infeasible
        };
        Solution::failed(status, n)
    });
    MipSolution {
        solution,
        relaxations,
        leaves,
        failures,
        bound_gap: gap,
    }
}

/// Solves a program whose binaries are one-hot association indicators.
///
/// Bounds that pin a binary are honoured in every mode. An `Unbounded`
/// relaxation is returned immediately.
pub fn solve_misocp(
    prog: &ConicProgram,
    mode: AssociationMode,
    cap: u128,
    backend: &dyn ConicBackend,
) -> Result<MipSolution> {
    check_groups(prog)?;
    let groups = prog.one_hot_groups();
    let n = prog.num_vars();
    let Some(root) = propagate(groups, prog.bound_fixing()) else {
        return Ok(finish(None, n, 0, 1, 0, 0.0));
    };
    match mode {
        AssociationMode::HeuristicFixed => {
            if root.len() != prog.binaries().len() {
                return Err(Error::Program("heuristic mode needs every binary fixed".into()));
            }
            let s = solve_relaxation(prog, &root, backend);
            let failures = usize::from(s.status == SolveStatus::NumericalFailure);
            Ok(MipSolution {
                solution: s,
                relaxations: 1,
                leaves: 1,
                failures,
                bound_gap: 0.0,
            })
        }
        AssociationMode::Exhaustive => exhaustive(prog, groups, root, cap, backend),
        AssociationMode::BranchAndBound => branch_and_bound(prog, groups, root, backend),
    }
}

fn exhaustive(
    prog: &ConicProgram,
    groups: &[Vec<VarId>],
    root: Fixing,
    cap: u128,
    backend: &dyn ConicBackend,
) -> Result<MipSolution> {
    let open = open_options(groups, &root);
    let needed = open.iter().fold(1u128, |acc, o| acc.saturating_mul(o.len() as u128));
    if needed > cap {
        return Err(Error::EnumerationCap { needed, cap });
    }
    let mut best: Option<Solution> = None;
    let (mut relaxations, mut failures) = (0, 0);
    let mut choice = vec![0usize; open.len()];
    loop {
        let mut fixing = root.clone();
        for (g, (o, &c)) in groups.iter().zip(open.iter().zip(&choice)) {
            for &v in g {
                fixing.insert(v, v == o[c]);
            }
        }
        let s = solve_relaxation(prog, &fixing, backend);
        relaxations += 1;
        match s.status {
            SolveStatus::Optimal => {
                if better(groups, &s, best.as_ref()) {
                    best = Some(s);
                }
            }
            SolveStatus::Unbounded => {
                return Ok(finish(
                    Some(s),
                    prog.num_vars(),
                    relaxations,
                    relaxations,
                    failures,
                    0.0,
                ))
            }
            SolveStatus::NumericalFailure => failures += 1,
            SolveStatus::Infeasible => {}
        }
        // odometer, last group fastest
        let mut i = choice.len();
        loop {
            if i == 0 {
                return Ok(finish(best, prog.num_vars(), relaxations, relaxations, failures, 0.0));
            }
            i -= 1;
            choice[i] += 1;
            if choice[i] < open[i].len() {
                break;
            }
            choice[i] = 0;
        }
    }
}

struct Node {
    bound: f64,
    seq: usize,
    fixing: Fixing,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // max-heap: larger bound first, then earlier creation
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Most fractional free binary, ties to the lowest index.
fn branching_var(prog: &ConicProgram, fixing: &Fixing, x: &[f64]) -> Option<VarId> {
    let mut best: Option<(VarId, f64)> = None;
    for &v in prog.binaries() {
        if fixing.contains_key(&v) {
            continue;
        }
        let frac = x[v].clamp(0.0, 1.0);
        let dist = frac.min(1.0 - frac);
        if dist > INTEGRALITY_TOL && best.map_or(true, |(_, d)| dist > d) {
            best = Some((v, dist));
        }
    }
    best.map(|(v, _)| v)
}

/// Children of a node branched on `v`: `v = 1` (fixing its group) and the
/// propagated `v = 0`, the latter omitted when it leaves a group empty.
fn split(groups: &[Vec<VarId>], fixing: Fixing, v: VarId) -> Vec<Fixing> {
    let group = groups.iter().find(|g| g.contains(&v)).expect("grouped binary");
    let mut one = fixing.clone();
    for &w in group {
        one.insert(w, w == v);
    }
    let mut zero = fixing;
    zero.insert(v, false);
    [Some(one), propagate(groups, zero)].into_iter().flatten().collect()
}

fn branch_and_bound(
    prog: &ConicProgram,
    groups: &[Vec<VarId>],
    root: Fixing,
    backend: &dyn ConicBackend,
) -> Result<MipSolution> {
    let n = prog.num_vars();
    let mut incumbent: Option<Solution> = None;
    let (mut relaxations, mut leaves, mut failures, mut seq) = (0, 0, 0, 0);
    let mut worst_pruned = f64::NEG_INFINITY;
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::INFINITY,
        seq,
        fixing: root,
    });

    // a node survives while it could still beat or tie the incumbent
    let open = |bound: f64, inc: &Option<Solution>| {
        inc.as_ref()
            .map_or(true, |s| bound >= s.objective_value - tie_tol(s.objective_value))
    };

    while let Some(node) = heap.pop() {
        if !open(node.bound, &incumbent) {
            leaves += 1;
            worst_pruned = worst_pruned.max(node.bound);
            continue;
        }
        let s = solve_relaxation(prog, &node.fixing, backend);
        relaxations += 1;
        match s.status {
            SolveStatus::Optimal => {}
            SolveStatus::Unbounded => return Ok(finish(Some(s), n, relaxations, leaves + 1, failures, 0.0)),
            SolveStatus::NumericalFailure => {
                failures += 1;
                // no bound from this node: split it and let the children try
                match prog.binaries().iter().find(|v| !node.fixing.contains_key(v)) {
                    Some(&v) => {
                        for child in split(groups, node.fixing, v) {
                            seq += 1;
                            heap.push(Node {
                                bound: node.bound,
                                seq,
                                fixing: child,
                            });
                        }
                    }
                    None => leaves += 1,
                }
                continue;
            }
            SolveStatus::Infeasible => {
                leaves += 1;
                continue;
            }
        }
        if !open(s.objective_value, &incumbent) {
            leaves += 1;
            worst_pruned = worst_pruned.max(s.objective_value);
            continue;
        }
        match branching_var(prog, &node.fixing, &s.values) {
            None => {
                leaves += 1;
                let full = node.fixing.len() == prog.binaries().len();
                let candidate = if full {
                    s
                } else {
                    // re-solve at the rounded point so the result matches a
                    // fully fixed solve
                    let mut fixing = node.fixing.clone();
                    for &v in prog.binaries() {
                        fixing.entry(v).or_insert(s.values[v] >= 0.5);
                    }
                    let r = solve_relaxation(prog, &fixing, backend);
                    relaxations += 1;
                    if !r.is_optimal() {
                        failures += usize::from(r.status == SolveStatus::NumericalFailure);
                        continue;
                    }
                    r
                };
                if better(groups, &candidate, incumbent.as_ref()) {
                    if let Some(old) = incumbent.take() {
                        worst_pruned = worst_pruned.max(old.objective_value);
                    }
                    incumbent = Some(candidate);
                }
            }
            Some(v) => {
                for child in split(groups, node.fixing, v) {
                    seq += 1;
                    heap.push(Node {
                        bound: s.objective_value,
                        seq,
                        fixing: child,
                    });
                }
            }
        }
    }
    let gap = incumbent
        .as_ref()
        .map_or(0.0, |s| relative_gap(worst_pruned, s.objective_value));
    Ok(finish(incumbent, n, relaxations, leaves, failures, gap))
}
