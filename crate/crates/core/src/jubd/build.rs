use std::ops::Range;

use num_complex::Complex64;

use super::{ObjectiveKind, ScaOptions, ScaState};
use crate::conic::{
    add_geometric_mean_tree, add_hyperbolic, add_qol_taylor_bound, add_shifted_exp_upper_bound,
    add_soc_quadratic_le_linear, ConicProgram, LinExpr, TaylorPoint, VarId,
};
use crate::error::{Error, Result};
use crate::scenario::{ChannelSet, ScenarioConfig};

/// Above this many bits per channel use the backhaul constraint is dropped.
pub const BACKHAUL_INACTIVE_BITS: f64 = 60.0;

/// Big-M bound on the SINR of UE `u`: `gamma_max`, or twice the best
/// single-link SNR `max_b P_b ||h_u^b||^2 / sigma_n^2` when that is smaller.
/// No beamformer can exceed the SNR; the factor two keeps the bound away from
/// the optimum of single-UE subproblems, where a tight box stalls the solver.
pub fn sinr_ceiling(channels: &ChannelSet, config: &ScenarioConfig, u: usize) -> f64 {
    let snr = (0..channels.num_stations())
        .map(|b| {
            effective_channel(channels, config, b, u)
                .iter()
                .map(|z| z.norm_sqr())
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    (2.0 * snr).min(config.gamma_max)
}

/// Whether the backhaul row `sum eta_u <= 2^(R/F) - 1` can never bind: each
/// `eta_u <= alpha_u <=` [`sinr_ceiling`], so a threshold of at least the sum
/// of the ceilings is slack, as is anything beyond [`BACKHAUL_INACTIVE_BITS`].
pub fn backhaul_inactive(channels: &ChannelSet, config: &ScenarioConfig) -> bool {
    let bits = config.backhaul_bps / config.bandwidth_hz;
    let total: f64 = (0..channels.num_ues).map(|u| sinr_ceiling(channels, config, u)).sum();
    bits > BACKHAUL_INACTIVE_BITS || bits.exp2() - 1.0 >= total
}

/// Relative back-off of the per-station budget inside the subproblems, so
/// that beams returned within solver tolerance still meet the true budget
/// without rescaling.
pub const POWER_BACKOFF: f64 = 1e-6;

/// Relative back-off of each SINR slack against its Taylor bound. The bound
/// equals the slack SINR at the expansion point, so the previous iterate
/// stays feasible and the SCA remains monotone, while `alpha_u` keeps a
/// margin over the achieved SINR larger than the solver tolerance.
pub const SINR_BACKOFF: f64 = 1e-8;

/// Serving amplitudes below this (noise-normalized) value trigger the
/// expansion-point safeguard.
pub const MIN_EXPANSION_AMPLITUDE: f64 = 1e-8;

/// Variable indices of one subproblem.
///
/// Beamformers are stored in normalized form `v = w / sqrt(P_b)` against the
/// effective channel `g = sqrt(P_b) h / sigma_n`, so that per-beam and
/// per-station powers are bounded by `a` and 1, the noise power is 1, and the
/// slacks `p, q, beta` are the physical ones divided by `sigma_n` (resp.
/// `sigma_n^2`). The slack variables are further divided per UE by
/// `amp_scale` (for `p, q`) and `beta_scale` (for `beta`) taken from the
/// expansion point, which keeps the Taylor rows well scaled when SINRs span
/// several decades; read them back through [`SubproblemVariables::p_value`]
/// and friends.
#[derive(Clone, Debug, PartialEq)]
pub struct SubproblemVariables {
    pub num_stations: usize,
    pub num_ues: usize,
    /// `[b][u][n]`
    pub w_re: Vec<Vec<Vec<VarId>>>,
    pub w_im: Vec<Vec<Vec<VarId>>>,
    /// `[b][u]`
    pub p: Vec<Vec<VarId>>,
    pub q: Vec<Vec<VarId>>,
    pub a: Vec<Vec<VarId>>,
    /// SINR slacks divided by `alpha_scale`.
    pub alpha: Vec<VarId>,
    pub beta: Vec<VarId>,
    /// Present only while the backhaul constraint is active.
    pub eta: Option<Vec<VarId>>,
    /// Per-UE rate slacks (WSR, NW-PF).
    pub t: Vec<VarId>,
    /// Constant-one leaves padding the tree to a power of two.
    pub padding: Vec<VarId>,
    /// Square-root chains of dyadic WSR weights, `[u][i]`.
    pub weight_chain: Vec<Vec<VarId>>,
    /// Exponential-approximation slacks `[u][i]` (NW-PF).
    pub exp_slacks: Vec<Vec<VarId>>,
    /// Tree slacks; the root is the objective.
    pub tree: Range<VarId>,
    pub tree_root: Option<VarId>,
    pub gamma_m: Option<VarId>,
    /// Per-UE divisor of the `p, q` variables.
    pub amp_scale: Vec<f64>,
    /// Per-UE divisor of the `alpha` variables: the expansion-point SINR,
    /// at least 1.
    pub alpha_scale: Vec<f64>,
    /// Per-UE divisor of the `beta` variables.
    pub beta_scale: Vec<f64>,
    /// `sqrt(P_b)` per station.
    pub power_scale: Vec<f64>,
    pub noise_std: f64,
}

impl SubproblemVariables {
    /// Noise-normalized `p[b][u]` from a solution vector.
    pub fn p_value(&self, x: &[f64], b: usize, u: usize) -> f64 {
        x[self.p[b][u]] * self.amp_scale[u]
    }

    pub fn q_value(&self, x: &[f64], b: usize, u: usize) -> f64 {
        x[self.q[b][u]] * self.amp_scale[u]
    }

    /// SINR slack `alpha_u` as a linear form.
    pub fn alpha_expr(&self, u: usize) -> LinExpr {
        LinExpr::term(self.alpha[u], self.alpha_scale[u])
    }

    pub fn alpha_value(&self, x: &[f64], u: usize) -> f64 {
        x[self.alpha[u]] * self.alpha_scale[u]
    }

    pub fn beta_value(&self, x: &[f64], u: usize) -> f64 {
        x[self.beta[u]] * self.beta_scale[u]
    }

    /// Every index held, in a fixed order.
    pub fn all_indices(&self) -> Vec<VarId> {
        let mut v = Vec::new();
        for b in 0..self.num_stations {
            for u in 0..self.num_ues {
                v.extend(&self.w_re[b][u]);
                v.extend(&self.w_im[b][u]);
            }
            v.extend(&self.p[b]);
            v.extend(&self.q[b]);
            v.extend(&self.a[b]);
        }
        v.extend(&self.alpha);
        v.extend(&self.beta);
        if let Some(eta) = &self.eta {
            v.extend(eta);
        }
        v.extend(&self.t);
        v.extend(&self.padding);
        v.extend(self.weight_chain.iter().flatten());
        v.extend(self.exp_slacks.iter().flatten());
        v.extend(self.tree.clone());
        v.extend(self.gamma_m);
        v
    }
}

/// Real and imaginary parts of `g^H v` as linear forms in `(v_re, v_im)`.
fn inner_forms(g: &[Complex64], re: &[VarId], im: &[VarId]) -> (LinExpr, LinExpr) {
    let mut r = LinExpr::zero();
    let mut i = LinExpr::zero();
    for (n, gn) in g.iter().enumerate() {
        r.add_term(re[n], gn.re);
        r.add_term(im[n], gn.im);
        i.add_term(im[n], gn.re);
        i.add_term(re[n], -gn.im);
    }
    (r, i)
}

/// Exponent `j` of a weight `2^-j`, or an error.
pub fn dyadic_exponent(xi: f64) -> Result<u32> {
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(Error::UnsupportedWeight(xi));
    }
    let j = -xi.log2();
    let jr = j.round();
    if jr <= 30.0 && 2f64.powi(-(jr as i32)) == xi {
        Ok(jr as u32)
    } else {
        Err(Error::UnsupportedWeight(xi))
    }
}

/// Normalized effective channel `sqrt(P_b) h_u^b / sigma_n`.
pub fn effective_channel(channels: &ChannelSet, config: &ScenarioConfig, b: usize, u: usize) -> Vec<Complex64> {
    let s = config.p_max_watts(b).sqrt() / config.noise_watts().sqrt();
    channels.h(b, u).iter().map(|z| z * s).collect()
}

/// Constraints shared by all three objectives: beam definitions, the SINR
/// inner approximation, power, association and backhaul.
fn build_common(
    channels: &ChannelSet,
    config: &ScenarioConfig,
    state: &ScaState,
) -> Result<(ConicProgram, SubproblemVariables)> {
    let nb = channels.num_stations();
    let nu = channels.num_ues;
    if state.p0.dim() != (nb, nu) || state.q0.dim() != (nb, nu) || state.beta0.len() != nu {
        return Err(Error::Shape("expansion point does not match the channel set".into()));
    }
    let noise = config.noise_watts();
    let sigma = noise.sqrt();
    let ceiling: Vec<f64> = (0..nu).map(|u| sinr_ceiling(channels, config, u)).collect();
    let mut prog = ConicProgram::new();

    let mut w_re = Vec::with_capacity(nb);
    let mut w_im = Vec::with_capacity(nb);
    let mut p = Vec::with_capacity(nb);
    let mut q = Vec::with_capacity(nb);
    let mut a = Vec::with_capacity(nb);
    for b in 0..nb {
        let n = channels.stations[b].antennas();
        let (mut re_b, mut im_b, mut p_b, mut q_b, mut a_b) = (vec![], vec![], vec![], vec![], vec![]);
        for u in 0..nu {
            re_b.push(
                (0..n)
                    .map(|i| prog.add_var(format!("wr[{b}][{u}][{i}]")))
                    .collect::<Vec<_>>(),
            );
            im_b.push(
                (0..n)
                    .map(|i| prog.add_var(format!("wi[{b}][{u}][{i}]")))
                    .collect::<Vec<_>>(),
            );
            p_b.push(prog.add_nonneg_var(format!("p[{b}][{u}]")));
            q_b.push(prog.add_nonneg_var(format!("q[{b}][{u}]")));
            a_b.push(prog.add_binary(format!("a[{b}][{u}]")));
        }
        w_re.push(re_b);
        w_im.push(im_b);
        p.push(p_b);
        q.push(q_b);
        a.push(a_b);
    }
    let mut amp_scale = Vec::with_capacity(nu);
    let mut beta_scale = Vec::with_capacity(nu);
    let mut alpha_scale = Vec::with_capacity(nu);
    for u in 0..nu {
        let (pu, qu) = (state.p0.column(u).sum() / sigma, state.q0.column(u).sum() / sigma);
        let b0 = state.beta0[u] / noise;
        let e0 = pu * pu + qu * qu;
        beta_scale.push(b0);
        amp_scale.push(e0.sqrt().max(b0.sqrt()));
        alpha_scale.push((e0 / b0).max(1.0));
    }
    let alpha: Vec<VarId> = (0..nu)
        .map(|u| prog.add_var_bounded(format!("alpha[{u}]"), Some(0.0), Some(ceiling[u] / alpha_scale[u])))
        .collect();
    let alpha_expr = |u: usize| LinExpr::term(alpha[u], alpha_scale[u]);
    let beta: Vec<VarId> = (0..nu)
        .map(|u| prog.add_var_bounded(format!("beta[{u}]"), Some(1.0 / beta_scale[u]), None))
        .collect();

    for u in 0..nu {
        prog.add_one_hot((0..nb).map(|b| a[b][u]).collect())?;
    }
    if let Some(fixed) = &state.fixed_association {
        for b in 0..nb {
            for u in 0..nu {
                prog.fix(a[b][u], if fixed.is_associated(b, u) { 1.0 } else { 0.0 })?;
            }
        }
    }

    for b in 0..nb {
        // per-beam big-M and per-station power
        let mut all = Vec::new();
        for u in 0..nu {
            let terms: Vec<LinExpr> = w_re[b][u].iter().chain(&w_im[b][u]).map(|&v| LinExpr::var(v)).collect();
            all.extend(terms.iter().cloned());
            for t in &terms {
                prog.add_le(t.clone(), LinExpr::var(a[b][u]))?;
                prog.add_le(-t.clone(), LinExpr::var(a[b][u]))?;
            }
            add_soc_quadratic_le_linear(&mut prog, terms, LinExpr::var(a[b][u]))?;
        }
        add_soc_quadratic_le_linear(&mut prog, all, LinExpr::constant(1.0 - POWER_BACKOFF))?;
    }

    for u in 0..nu {
        let (ku, bu) = (amp_scale[u], beta_scale[u]);
        let mut interference = Vec::new();
        for b in 0..nb {
            let g = effective_channel(channels, config, b, u);
            for k in 0..nu {
                let (re, im) = inner_forms(&g, &w_re[b][k], &w_im[b][k]);
                if k == u {
                    prog.add_le(LinExpr::var(p[b][u]), re * (1.0 / ku))?;
                    prog.add_le(LinExpr::var(q[b][u]), im * (1.0 / ku))?;
                    // valid at integral a; keeps p, q of excluded pairs at
                    // zero to linear rather than conic accuracy
                    let gn = g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    prog.add_le(LinExpr::var(p[b][u]), LinExpr::term(a[b][u], gn / ku))?;
                    prog.add_le(LinExpr::var(q[b][u]), LinExpr::term(a[b][u], gn / ku))?;
                } else {
                    let s = 1.0 / bu.sqrt();
                    interference.push(re * s);
                    interference.push(im * s);
                }
            }
        }
        add_soc_quadratic_le_linear(&mut prog, interference, LinExpr::var(beta[u]) - 1.0 / bu)?;

        // SINR = (ku^2 / bu) (P^2 + Q^2) / beta in scaled variables
        let r = ku / bu.sqrt();
        let pu: LinExpr = (0..nb).fold(LinExpr::zero(), |acc, b| acc + LinExpr::term(p[b][u], r));
        let qu: LinExpr = (0..nb).fold(LinExpr::zero(), |acc, b| acc + LinExpr::term(q[b][u], r));
        let point = TaylorPoint {
            p0: vec![state.p0.column(u).sum() / sigma / bu.sqrt()],
            q0: vec![state.q0.column(u).sum() / sigma / bu.sqrt()],
            beta0: 1.0,
        };
        add_qol_taylor_bound(
            &mut prog,
            alpha_expr(u) * (1.0 + SINR_BACKOFF),
            &[pu],
            &[qu],
            beta[u],
            &point,
        )?;
    }

    let mut eta = None;
    if let Some(h) = channels.haps_index() {
        let bits = config.backhaul_bps / config.bandwidth_hz;
        if !backhaul_inactive(channels, config) {
            let e: Vec<VarId> = (0..nu).map(|u| prog.add_nonneg_var(format!("eta[{u}]"))).collect();
            let mut total = LinExpr::zero();
            for u in 0..nu {
                let m = ceiling[u];
                prog.add_le(LinExpr::var(e[u]), LinExpr::term(a[h][u], m))?;
                prog.add_le(LinExpr::var(e[u]), alpha_expr(u))?;
                prog.add_le(
                    alpha_expr(u) - LinExpr::var(e[u]),
                    LinExpr::constant(m) - LinExpr::term(a[h][u], m),
                )?;
                total += LinExpr::var(e[u]);
            }
            prog.add_le(total, LinExpr::constant(bits.exp2() - 1.0))?;
            eta = Some(e);
        }
    }

    let power_scale = (0..nb).map(|b| config.p_max_watts(b).sqrt()).collect();
    let vars = SubproblemVariables {
        num_stations: nb,
        num_ues: nu,
        w_re,
        w_im,
        p,
        q,
        a,
        alpha,
        beta,
        eta,
        t: Vec::new(),
        padding: Vec::new(),
        weight_chain: Vec::new(),
        exp_slacks: Vec::new(),
        tree: 0..0,
        tree_root: None,
        gamma_m: None,
        amp_scale,
        alpha_scale,
        beta_scale,
        power_scale,
        noise_std: sigma,
    };
    Ok((prog, vars))
}

fn add_gamma_min(prog: &mut ConicProgram, vars: &SubproblemVariables, config: &ScenarioConfig) -> Result<()> {
    for u in 0..vars.num_ues {
        prog.add_le(LinExpr::constant(config.gamma_min), vars.alpha_expr(u))?;
    }
    Ok(())
}

/// Adds the padded geometric-mean tree over the rate slacks `t_u` and
/// maximizes it. Leaf `u` stands for `leaf_scale[u] * t_u`, so the objective
/// is the root times the geometric mean of the scales.
fn add_tree_objective(prog: &mut ConicProgram, vars: &mut SubproblemVariables, leaf_scale: &[f64]) -> Result<()> {
    let slots = vars.num_ues.next_power_of_two();
    vars.padding = (vars.num_ues..slots)
        .map(|i| prog.add_var_bounded(format!("t[{i}]"), Some(1.0), Some(1.0)))
        .collect();
    let leaves: Vec<VarId> = vars.t.iter().chain(&vars.padding).copied().collect();
    let start = prog.num_vars();
    let root = add_geometric_mean_tree(prog, &leaves)?;
    vars.tree = start..prog.num_vars();
    vars.tree_root = Some(root);
    let log_scale: f64 = leaf_scale.iter().map(|c| c.ln()).sum::<f64>() / slots as f64;
    prog.maximize(LinExpr::term(root, log_scale.exp()))
}

/// Weighted sum rate: maximize `prod_u t_u` with `t_u^(1/xi_u) <= 1 + alpha_u`.
///
/// Each `t_u` and its square-root chain are stored divided by the matching
/// power of `1 + alpha_scale[u]`, keeping them near one.
pub fn build_wsr_subproblem(
    channels: &ChannelSet,
    config: &ScenarioConfig,
    state: &ScaState,
    options: &ScaOptions,
    weights: &[f64],
) -> Result<(ConicProgram, SubproblemVariables)> {
    if weights.len() != channels.num_ues {
        return Err(Error::Shape(format!(
            "{} weights for {} UEs",
            weights.len(),
            channels.num_ues
        )));
    }
    let exponents: Vec<u32> = weights.iter().map(|&w| dyadic_exponent(w)).collect::<Result<_>>()?;
    let (mut prog, mut vars) = build_common(channels, config, state)?;
    if options.enforce_gamma_min {
        add_gamma_min(&mut prog, &vars, config)?;
    }
    let mut leaf_scale = Vec::with_capacity(exponents.len());
    for (u, &j) in exponents.iter().enumerate() {
        let c = 1.0 + vars.alpha_scale[u];
        let t = prog.add_var(format!("t[{u}]"));
        let mut prev = (vars.alpha_expr(u) + 1.0) * (1.0 / c);
        let mut chain = Vec::new();
        for i in 1..=j {
            let s = prog.add_var(format!("s[{u}][{i}]"));
            add_hyperbolic(&mut prog, LinExpr::var(s), prev, LinExpr::constant(1.0))?;
            prev = LinExpr::var(s);
            chain.push(s);
        }
        prog.add_le(LinExpr::var(t), prev)?;
        vars.t.push(t);
        vars.weight_chain.push(chain);
        leaf_scale.push(c.powf(2f64.powi(-(j as i32))));
    }
    add_tree_objective(&mut prog, &mut vars, &leaf_scale)?;
    Ok((prog, vars))
}

/// Network-wide proportional fairness: maximize `prod_u t_u` with
/// `exp(t_u) <= 1 + alpha_u`.
pub fn build_pf_subproblem(
    channels: &ChannelSet,
    config: &ScenarioConfig,
    state: &ScaState,
    options: &ScaOptions,
) -> Result<(ConicProgram, SubproblemVariables)> {
    let (mut prog, mut vars) = build_common(channels, config, state)?;
    if options.enforce_gamma_min {
        add_gamma_min(&mut prog, &vars, config)?;
    }
    for u in 0..channels.num_ues {
        let t = prog.add_nonneg_var(format!("t[{u}]"));
        // centre the chain at the rate of the expansion point
        let e0 = state.p0.column(u).sum().powi(2) + state.q0.column(u).sum().powi(2);
        let c = (1.0 + e0 / state.beta0[u]).ln();
        let bound = (vars.alpha_expr(u) + 1.0) * (-c).exp();
        let k = add_shifted_exp_upper_bound(&mut prog, t, c, bound, options.m_exp)?;
        vars.t.push(t);
        vars.exp_slacks.push(k);
    }
    add_tree_objective(&mut prog, &mut vars, &vec![1.0; channels.num_ues])?;
    Ok((prog, vars))
}

/// Network-wide max-min fairness: maximize `gamma_m` with `alpha_u >= gamma_m`.
/// The variable holds `gamma_m` divided by the smallest `alpha_scale`.
pub fn build_mmf_subproblem(
    channels: &ChannelSet,
    config: &ScenarioConfig,
    state: &ScaState,
    options: &ScaOptions,
) -> Result<(ConicProgram, SubproblemVariables)> {
    let (mut prog, mut vars) = build_common(channels, config, state)?;
    if options.enforce_gamma_min {
        add_gamma_min(&mut prog, &vars, config)?;
    }
    let gm = prog.add_var("gamma_m");
    let scale = vars.alpha_scale.iter().copied().fold(f64::INFINITY, f64::min);
    for u in 0..vars.num_ues {
        prog.add_le(LinExpr::term(gm, scale), vars.alpha_expr(u))?;
    }
    vars.gamma_m = Some(gm);
    prog.maximize(LinExpr::term(gm, scale))?;
    Ok((prog, vars))
}

/// Dispatches on the objective.
pub fn build_subproblem(
    objective: &ObjectiveKind,
    channels: &ChannelSet,
    config: &ScenarioConfig,
    state: &ScaState,
    options: &ScaOptions,
) -> Result<(ConicProgram, SubproblemVariables)> {
    match objective {
        ObjectiveKind::Wsr { weights } => build_wsr_subproblem(channels, config, state, options, weights),
        ObjectiveKind::Pf => build_pf_subproblem(channels, config, state, options),
        ObjectiveKind::Mmf => build_mmf_subproblem(channels, config, state, options),
    }
}
