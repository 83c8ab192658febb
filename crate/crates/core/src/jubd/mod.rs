//! Joint user association and beamforming by successive convex approximation.
//!
//! Each iteration builds a mixed-integer second-order-cone inner
//! approximation of the chosen objective around the current expansion point,
//! solves it with [`crate::mip::solve_misocp`], and moves the expansion point
//! to the new optimum. Any optimum of an inner approximation is feasible for
//! the original problem, and the previous optimum stays feasible for the next
//! approximation, so the objective sequence is nondecreasing.

mod build;
mod extract;

use std::time::Instant;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use build::{
    backhaul_inactive, build_mmf_subproblem, build_pf_subproblem, build_subproblem, build_wsr_subproblem,
    dyadic_exponent, effective_channel, sinr_ceiling, SubproblemVariables, BACKHAUL_INACTIVE_BITS,
    MIN_EXPANSION_AMPLITUDE, POWER_BACKOFF, SINR_BACKOFF,
};
pub use extract::{extract_solution, validate_solution, FeasibilityReport, INTEGRALITY_BAND};

use crate::conic::{ClarabelBackend, ConicBackend, SolveStatus};
use crate::error::{Error, Result};
use crate::metrics::{all_sinr, inner, Association, Beamforming, SeReport};
use crate::mip::{heuristic_association, solve_misocp, AssociationMode, DEFAULT_ENUMERATION_CAP};
use crate::scenario::{ChannelSet, ScenarioConfig};

#[derive(Clone, Debug, PartialEq)]
pub enum ObjectiveKind {
    /// Weighted sum rate. Weights must be `1` or `2^-j`.
    Wsr { weights: Vec<f64> },
    /// Network-wide proportional fairness.
    Pf,
    /// Network-wide max-min fairness.
    Mmf,
}

impl ObjectiveKind {
    pub fn equal_wsr(num_ues: usize) -> Self {
        Self::Wsr {
            weights: vec![1.0; num_ues],
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Wsr { .. } => "wsr",
            Self::Pf => "pf",
            Self::Mmf => "mmf",
        }
    }

    fn se_weights(&self, num_ues: usize) -> Vec<f64> {
        match self {
            Self::Wsr { weights } => weights.clone(),
            _ => vec![1.0; num_ues],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScaOptions {
    /// Relative objective change below which the loop stops.
    pub epsilon: f64,
    pub max_iter: usize,
    pub association_mode: AssociationMode,
    /// Freeze the association found at this iteration for the rest of the run.
    pub refreeze_association_after_iter: Option<usize>,
    /// Add `alpha_u >= gamma_min`. Off by default: the approximated problems
    /// carry no minimum-SINR constraint and the floor makes many random
    /// instances infeasible.
    pub enforce_gamma_min: bool,
    /// Accuracy level of the exponential approximation (NW-PF).
    pub m_exp: u32,
    pub enumeration_cap: u128,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            max_iter: 10,
            association_mode: AssociationMode::BranchAndBound,
            refreeze_association_after_iter: None,
            enforce_gamma_min: false,
            m_exp: 6,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl ScaOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || self.max_iter == 0 || self.m_exp == 0 {
            return Err(Error::Config("need epsilon > 0, max_iter >= 1 and m_exp >= 1".into()));
        }
        Ok(())
    }
}

/// Expansion point and history of an SCA run, in physical units.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaState {
    /// `Re(h_u^bH w_u^b)` per `(b, u)`, sqrt(W).
    pub p0: Array2<f64>,
    pub q0: Array2<f64>,
    /// Interference plus noise per UE, W.
    pub beta0: Vec<f64>,
    pub iteration: usize,
    pub trace: Vec<f64>,
    pub association: Association,
    pub beamforming: Beamforming,
    /// When set, the subproblems pin the association to this value.
    pub fixed_association: Option<Association>,
}

/// Matched-filter beamformers for association `a0` with each station's power
/// split evenly over its UEs, and the expansion point they induce.
pub fn initialize_state(channels: &ChannelSet, a0: &Association, config: &ScenarioConfig) -> Result<ScaState> {
    let nb = channels.num_stations();
    let nu = channels.num_ues;
    if a0.num_stations() != nb || a0.num_ues() != nu {
        return Err(Error::Shape(
            "initial association does not match the channel set".into(),
        ));
    }
    let mut w = Beamforming::zeros(channels);
    for u in 0..nu {
        let b = a0.serving(u);
        let h = channels.h(b, u);
        let norm = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::ZeroChannel(u));
        }
        let amp = (config.p_max_watts(b) / a0.load(b) as f64).sqrt() / norm;
        for (i, z) in h.iter().enumerate() {
            w.stations[b][(i, u)] = z * amp;
        }
    }
    let noise = config.noise_watts();
    let mut p0 = Array2::zeros((nb, nu));
    let mut q0 = Array2::zeros((nb, nu));
    let mut beta0 = vec![noise; nu];
    for u in 0..nu {
        for b in 0..nb {
            let h = channels.h(b, u);
            for k in 0..nu {
                let s: Complex64 = inner(h, w.stations[b].column(k));
                if k == u {
                    p0[(b, u)] = s.re;
                    q0[(b, u)] = s.im;
                } else {
                    beta0[u] += s.norm_sqr();
                }
            }
        }
    }
    Ok(ScaState {
        p0,
        q0,
        beta0,
        iteration: 0,
        trace: Vec::new(),
        association: a0.clone(),
        beamforming: w,
        fixed_association: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ScaStatus {
    Converged,
    MaxIterations,
    /// The first subproblem had no feasible point.
    Infeasible,
    /// A subproblem failed; the report holds the last accepted iterate, or
    /// the initialization when none was accepted.
    NumericalFailure,
}

/// One accepted SCA iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub objective: f64,
    /// SINR slacks of the subproblem optimum.
    pub alpha: Vec<f64>,
    /// SINRs achieved by the extracted design.
    pub achieved_sinr: Vec<f64>,
    pub association: Vec<usize>,
    pub relaxations: usize,
    pub wall_clock_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolutionReport {
    pub objective: ObjectiveKind,
    pub status: ScaStatus,
    pub association: Association,
    pub beamforming: Beamforming,
    /// Subproblem optimum of every accepted iterate.
    pub trace: Vec<f64>,
    pub iterations: Vec<IterationRecord>,
    pub se: SeReport,
    pub feasibility: FeasibilityReport,
}

impl SolutionReport {
    pub fn converged(&self) -> bool {
        self.status == ScaStatus::Converged
    }

    /// At least one subproblem optimum was accepted.
    pub fn has_iterate(&self) -> bool {
        !self.iterations.is_empty()
    }
}

/// Runs the SCA loop with the reference conic backend.
pub fn sca_solve(
    objective: &ObjectiveKind,
    channels: &ChannelSet,
    config: &ScenarioConfig,
    options: &ScaOptions,
) -> Result<SolutionReport> {
    sca_solve_with(objective, channels, config, options, &ClarabelBackend::default())
}

fn station_powers(config: &ScenarioConfig, nb: usize) -> Vec<f64> {
    (0..nb).map(|b| config.p_max_watts(b)).collect()
}

pub fn sca_solve_with(
    objective: &ObjectiveKind,
    channels: &ChannelSet,
    config: &ScenarioConfig,
    options: &ScaOptions,
    backend: &dyn ConicBackend,
) -> Result<SolutionReport> {
    let a0 = heuristic_association(channels, &station_powers(config, channels.num_stations()))?;
    let fixed = options.association_mode == AssociationMode::HeuristicFixed;
    run(objective, channels, config, options, backend, a0, fixed)
}

/// Runs the SCA loop with the association pinned to `assoc` throughout.
pub fn sca_solve_fixed(
    objective: &ObjectiveKind,
    channels: &ChannelSet,
    config: &ScenarioConfig,
    options: &ScaOptions,
    assoc: &Association,
    backend: &dyn ConicBackend,
) -> Result<SolutionReport> {
    run(objective, channels, config, options, backend, assoc.clone(), true)
}

fn run(
    objective: &ObjectiveKind,
    channels: &ChannelSet,
    config: &ScenarioConfig,
    options: &ScaOptions,
    backend: &dyn ConicBackend,
    a0: Association,
    fixed: bool,
) -> Result<SolutionReport> {
    options.validate()?;
    config.validate()?;
    let nb = channels.num_stations();
    let nu = channels.num_ues;
    let mut state = initialize_state(channels, &a0, config)?;
    if fixed {
        state.fixed_association = Some(a0);
    }
    let noise = config.noise_watts();
    let sigma = noise.sqrt();
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut status = ScaStatus::MaxIterations;

    for n in 1..=options.max_iter {
        let started = Instant::now();
        let (prog, vars) = build_subproblem(objective, channels, config, &state, options)?;
        let mip = solve_misocp(&prog, options.association_mode, options.enumeration_cap, backend)?;
        let sol = mip.solution;
        if !sol.is_optimal() {
            status = if n == 1 && sol.status == SolveStatus::Infeasible {
                ScaStatus::Infeasible
            } else {
                ScaStatus::NumericalFailure
            };
            log::warn!("SCA iteration {n}: subproblem {:?}", sol.status);
            break;
        }
        let Ok((assoc, w)) = extract_solution(&vars, &sol) else {
            status = ScaStatus::NumericalFailure;
            log::warn!("SCA iteration {n}: non-integral association");
            break;
        };
        let obj = sol.objective_value;
        let mut stop = false;
        if let Some(&prev) = state.trace.last() {
            let scale = prev.abs().max(1.0);
            if obj < prev && prev - obj <= 1e-6 * scale {
                // no progress beyond solver accuracy
                status = ScaStatus::Converged;
                break;
            }
            stop = (obj - prev).abs() < options.epsilon * scale;
        }

        let x = &sol.values;
        for u in 0..nu {
            let mut amp = 0.0;
            for b in 0..nb {
                state.p0[(b, u)] = vars.p_value(x, b, u) * sigma;
                state.q0[(b, u)] = vars.q_value(x, b, u) * sigma;
                amp += vars.p_value(x, b, u);
            }
            let beta = vars.beta_value(x, u).max(1.0);
            state.beta0[u] = beta * noise;
            if amp < MIN_EXPANSION_AMPLITUDE {
                let b = assoc.serving(u);
                let g = effective_channel(channels, config, b, u);
                let mf = g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / (assoc.load(b) as f64).sqrt();
                for bb in 0..nb {
                    state.p0[(bb, u)] = 0.0;
                    state.q0[(bb, u)] = 0.0;
                }
                state.p0[(b, u)] = mf * sigma;
                state.beta0[u] = beta.max(mf * (beta / 1e-9).sqrt()) * noise;
            }
        }
        let achieved_sinr = all_sinr(channels, &w, noise)?;
        iterations.push(IterationRecord {
            objective: obj,
            alpha: (0..nu).map(|u| vars.alpha_value(x, u)).collect(),
            achieved_sinr,
            association: assoc.serving_all().to_vec(),
            relaxations: mip.relaxations,
            wall_clock_s: started.elapsed().as_secs_f64(),
        });
        state.iteration = n;
        state.trace.push(obj);
        if options.refreeze_association_after_iter == Some(n) {
            state.fixed_association = Some(assoc.clone());
        }
        state.association = assoc;
        state.beamforming = w;
        if stop {
            status = ScaStatus::Converged;
            break;
        }
    }

    let se = SeReport::from_sinr(
        all_sinr(channels, &state.beamforming, noise)?,
        &objective.se_weights(nu),
    )?;
    let feasibility = validate_solution(
        channels,
        &state.association,
        &state.beamforming,
        config,
        options.enforce_gamma_min,
    )?;
    Ok(SolutionReport {
        objective: objective.clone(),
        status,
        association: state.association,
        beamforming: state.beamforming,
        trace: state.trace,
        iterations,
        se,
        feasibility,
    })
}
