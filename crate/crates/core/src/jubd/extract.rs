use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;

use super::build::{backhaul_inactive, SubproblemVariables};
use crate::conic::Solution;
use crate::error::{Error, Result};
use crate::metrics::{all_sinr, Association, Beamforming};
use crate::scenario::{ChannelSet, ScenarioConfig};

/// Binaries strictly inside this band are rejected as non-integral.
pub const INTEGRALITY_BAND: (f64, f64) = (0.01, 0.99);

/// Reads the association and physical beamformers out of a subproblem
/// solution. Beams of non-associated pairs are set to exactly zero and each
/// station's beams are scaled down if rounding left them above the power
/// budget.
pub fn extract_solution(vars: &SubproblemVariables, sol: &Solution) -> Result<(Association, Beamforming)> {
    let x = &sol.values;
    let mut serving = vec![None; vars.num_ues];
    for b in 0..vars.num_stations {
        for u in 0..vars.num_ues {
            let v = x[vars.a[b][u]];
            if v > INTEGRALITY_BAND.0 && v < INTEGRALITY_BAND.1 || !v.is_finite() {
                return Err(Error::Integrality {
                    name: format!("a[{b}][{u}]"),
                    value: v,
                });
            }
            if v >= 0.5 {
                if serving[u].is_some() {
                    return Err(Error::Integrality {
                        name: format!("a[{b}][{u}]"),
                        value: v,
                    });
                }
                serving[u] = Some(b);
            }
        }
    }
    let serving: Vec<usize> = serving
        .into_iter()
        .enumerate()
        .map(|(u, s)| {
            s.ok_or_else(|| Error::Integrality {
                name: format!("a[*][{u}]"),
                value: 0.0,
            })
        })
        .collect::<Result<_>>()?;
    let assoc = Association::new(vars.num_stations, serving)?;

    let mut stations = Vec::with_capacity(vars.num_stations);
    for b in 0..vars.num_stations {
        let n = vars.w_re[b].first().map_or(0, |v| v.len());
        let scale = vars.power_scale[b];
        let mut w = Array2::<Complex64>::zeros((n, vars.num_ues));
        let mut norm2 = 0.0;
        for u in 0..vars.num_ues {
            if !assoc.is_associated(b, u) {
                continue;
            }
            for i in 0..n {
                let z = Complex64::new(x[vars.w_re[b][u][i]], x[vars.w_im[b][u][i]]);
                norm2 += z.norm_sqr();
                w[(i, u)] = z * scale;
            }
        }
        if norm2 > 1.0 {
            w.mapv_inplace(|z| z / norm2.sqrt());
        }
        stations.push(w);
    }
    Ok((assoc, Beamforming { stations }))
}

/// Constraint margins of a design against the original problem, all
/// evaluated with achieved SINRs. Nonnegative margins mean satisfied.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityReport {
    /// `1 - |column sum - 1|` minimum over UEs; 1 for any valid association.
    pub association_margin: f64,
    /// Minus the largest beam power of a non-associated pair, relative to its
    /// station budget.
    pub zero_beam_margin: f64,
    /// `(P_b - ||W^b||^2) / P_b` per station.
    pub power_margins: Vec<f64>,
    /// `R_BH / F - sum log2(1 + gamma_u)` over HAPS-served UEs; `None` without a HAPS.
    pub backhaul_margin: Option<f64>,
    /// The backhaul row is dropped from the subproblems: its threshold exceeds
    /// anything slacks below the big-M ceiling can reach.
    pub backhaul_vacuous: bool,
    /// `(gamma_u - gamma_min) / gamma_min` per UE, when the floor is enforced.
    pub gamma_min_margins: Option<Vec<f64>>,
}

impl FeasibilityReport {
    /// Smallest margin over the checks in scope.
    pub fn worst_margin(&self) -> f64 {
        let mut m = self.association_margin.min(self.zero_beam_margin);
        m = self.power_margins.iter().fold(m, |acc, &x| acc.min(x));
        if let Some(bh) = self.backhaul_margin {
            m = m.min(bh);
        }
        if let Some(g) = &self.gamma_min_margins {
            m = g.iter().fold(m, |acc, &x| acc.min(x));
        }
        m
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.worst_margin() >= -tol
    }
}

/// Checks power, association, zero-beam, backhaul and (optionally) minimum
/// SINR constraints of `(assoc, w)`.
pub fn validate_solution(
    channels: &ChannelSet,
    assoc: &Association,
    w: &Beamforming,
    config: &ScenarioConfig,
    enforce_gamma_min: bool,
) -> Result<FeasibilityReport> {
    let nb = channels.num_stations();
    if assoc.num_stations() != nb || assoc.num_ues() != channels.num_ues {
        return Err(Error::Shape("association does not match the channel set".into()));
    }
    let sinr = all_sinr(channels, w, config.noise_watts())?;
    let a = assoc.matrix();
    let association_margin = a
        .columns()
        .into_iter()
        .map(|c| 1.0 - (c.iter().map(|&x| f64::from(x)).sum::<f64>() - 1.0).abs())
        .fold(1.0, f64::min);
    let mut zero_beam_margin = 0.0f64;
    let mut power_margins = Vec::with_capacity(nb);
    for b in 0..nb {
        let pmax = config.p_max_watts(b);
        for u in 0..channels.num_ues {
            if !assoc.is_associated(b, u) {
                zero_beam_margin = zero_beam_margin.min(-w.beam_power(b, u) / pmax);
            }
        }
        power_margins.push((pmax - w.station_power(b)) / pmax);
    }
    let bits = config.backhaul_bps / config.bandwidth_hz;
    let backhaul_margin = channels.haps_index().map(|h| {
        let used: f64 = (0..channels.num_ues)
            .filter(|&u| assoc.is_associated(h, u))
            .map(|u| (1.0 + sinr[u]).log2())
            .sum();
        bits - used
    });
    let backhaul_vacuous = channels.haps_index().is_none() || backhaul_inactive(channels, config);
    let gamma_min_margins = enforce_gamma_min.then(|| {
        sinr.iter()
            .map(|g| (g - config.gamma_min) / config.gamma_min.max(f64::MIN_POSITIVE))
            .collect()
    });
    Ok(FeasibilityReport {
        association_margin,
        zero_beam_margin,
        power_margins,
        backhaul_margin,
        backhaul_vacuous,
        gamma_min_margins,
    })
}
