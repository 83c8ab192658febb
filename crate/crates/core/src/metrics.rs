//! SINR, spectral efficiency and empirical distributions.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scenario::ChannelSet;

/// Binary user association with exactly one serving station per UE.
///
/// Stored as the serving-station index of every UE, which makes the
/// column-sum invariant hold by construction.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Association {
    num_stations: usize,
    serving: Vec<usize>,
}

impl Association {
    pub fn new(num_stations: usize, serving: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = serving.iter().find(|&&b| b >= num_stations) {
            return Err(Error::Shape(format!(
                "station {bad} out of range (have {num_stations})"
            )));
        }
        Ok(Self { num_stations, serving })
    }

    /// Builds an association from a 0/1 matrix (stations x UEs).
    pub fn from_matrix(a: &Array2<u8>) -> Result<Self> {
        let mut serving = Vec::with_capacity(a.ncols());
        for (u, col) in a.columns().into_iter().enumerate() {
            let ones: Vec<usize> = col
                .iter()
                .enumerate()
                .filter(|(_, &v)| v == 1)
                .map(|(b, _)| b)
                .collect();
            if ones.len() != 1 || col.iter().any(|&v| v > 1) {
                return Err(Error::Shape(format!("UE {u} column does not sum to one")));
            }
            serving.push(ones[0]);
        }
        Ok(Self {
            num_stations: a.nrows(),
            serving,
        })
    }

    pub fn num_stations(&self) -> usize {
        self.num_stations
    }

    pub fn num_ues(&self) -> usize {
        self.serving.len()
    }

    pub fn serving(&self, u: usize) -> usize {
        self.serving[u]
    }

    pub fn serving_all(&self) -> &[usize] {
        &self.serving
    }

    pub fn is_associated(&self, b: usize, u: usize) -> bool {
        self.serving[u] == b
    }

    /// Number of UEs served by station `b`.
    pub fn load(&self, b: usize) -> usize {
        self.serving.iter().filter(|&&s| s == b).count()
    }

    pub fn matrix(&self) -> Array2<u8> {
        let mut a = Array2::zeros((self.num_stations, self.serving.len()));
        for (u, &b) in self.serving.iter().enumerate() {
            a[(b, u)] = 1;
        }
        a
    }
}

/// Beamforming matrices `W^b` (antennas x UEs), one per station.
#[derive(Clone, Debug, PartialEq)]
pub struct Beamforming {
    pub stations: Vec<Array2<Complex64>>,
}

impl Beamforming {
    pub fn zeros(channels: &ChannelSet) -> Self {
        Self {
            stations: channels
                .stations
                .iter()
                .map(|s| Array2::zeros((s.antennas(), channels.num_ues)))
                .collect(),
        }
    }

    pub fn station_power(&self, b: usize) -> f64 {
        self.stations[b].iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn beam_power(&self, b: usize, u: usize) -> f64 {
        self.stations[b].column(u).iter().map(|z| z.norm_sqr()).sum()
    }

    fn check_shape(&self, channels: &ChannelSet) -> Result<()> {
        if self.stations.len() != channels.num_stations() {
            return Err(Error::Shape(format!(
                "{} beamforming matrices for {} stations",
                self.stations.len(),
                channels.num_stations()
            )));
        }
        for (b, (w, s)) in self.stations.iter().zip(&channels.stations).enumerate() {
            if w.dim() != s.h.dim() {
                return Err(Error::Shape(format!(
                    "station {b}: W is {:?}, H is {:?}",
                    w.dim(),
                    s.h.dim()
                )));
            }
        }
        Ok(())
    }
}

/// `h^H w`.
pub fn inner(h: ndarray::ArrayView1<'_, Complex64>, w: ndarray::ArrayView1<'_, Complex64>) -> Complex64 {
    h.iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// Received desired power and interference-plus-noise power of UE `u`.
pub fn signal_and_interference(channels: &ChannelSet, w: &Beamforming, u: usize, noise_var: f64) -> Result<(f64, f64)> {
    w.check_shape(channels)?;
    if u >= channels.num_ues {
        return Err(Error::Shape(format!("UE {u} out of range")));
    }
    if !(noise_var > 0.0) {
        return Err(Error::Domain(format!(
            "noise variance must be positive, got {noise_var}"
        )));
    }
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (b, st) in channels.stations.iter().enumerate() {
        let h = st.column(u);
        for k in 0..channels.num_ues {
            let g = inner(h, w.stations[b].column(k)).norm_sqr();
            if k == u {
                signal += g;
            } else {
                interference += g;
            }
        }
    }
    Ok((signal, interference + noise_var))
}

/// Linear SINR of UE `u`: desired power over interference plus noise, with
/// the desired term summed over all stations.
pub fn sinr(channels: &ChannelSet, w: &Beamforming, u: usize, noise_var: f64) -> Result<f64> {
    let (s, i) = signal_and_interference(channels, w, u, noise_var)?;
    Ok(s / i)
}

pub fn all_sinr(channels: &ChannelSet, w: &Beamforming, noise_var: f64) -> Result<Vec<f64>> {
    (0..channels.num_ues).map(|u| sinr(channels, w, u, noise_var)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeReport {
    pub per_ue_sinr: Vec<f64>,
    /// `log2(1 + sinr)` per UE, bits/s/Hz.
    pub per_ue_se: Vec<f64>,
    pub sum_se: f64,
    pub min_se: f64,
    pub weighted_sum_se: f64,
}

impl SeReport {
    pub fn from_sinr(per_ue_sinr: Vec<f64>, weights: &[f64]) -> Result<Self> {
        if weights.len() != per_ue_sinr.len() {
            return Err(Error::Shape(format!(
                "{} weights for {} UEs",
                weights.len(),
                per_ue_sinr.len()
            )));
        }
        let per_ue_se: Vec<f64> = per_ue_sinr.iter().map(|g| (1.0 + g).log2()).collect();
        let sum_se = per_ue_se.iter().sum();
        let min_se = per_ue_se.iter().copied().fold(f64::INFINITY, f64::min);
        let weighted_sum_se = per_ue_se.iter().zip(weights).map(|(s, w)| s * w).sum();
        Ok(Self {
            per_ue_sinr,
            per_ue_se,
            sum_se,
            min_se,
            weighted_sum_se,
        })
    }
}

/// SINR and spectral-efficiency summary of a design. The association is
/// checked against `W` only for shape; zero beams of non-associated pairs are
/// validated separately by the feasibility checks.
pub fn se_report(
    channels: &ChannelSet,
    assoc: &Association,
    w: &Beamforming,
    noise_var: f64,
    weights: &[f64],
) -> Result<SeReport> {
    if assoc.num_ues() != channels.num_ues || assoc.num_stations() != channels.num_stations() {
        return Err(Error::Shape("association does not match the channel set".into()));
    }
    SeReport::from_sinr(all_sinr(channels, w, noise_var)?, weights)
}

/// Right-continuous empirical CDF over sorted samples.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Domain("empirical CDF of an empty sample".into()));
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(Error::Domain("empirical CDF sample contains NaN".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    /// `(value, P[X <= value])` at every sample point.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        self.sorted
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, (i + 1) as f64 / n))
            .collect()
    }

    /// Nearest-rank percentile, `q` in `(0, 1]`.
    pub fn percentile(&self, q: f64) -> f64 {
        let n = self.sorted.len();
        let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
        self.sorted[rank - 1]
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }

    /// Sample standard deviation (zero for a single sample).
    pub fn std(&self) -> f64 {
        let n = self.sorted.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        (self.sorted.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }
}

pub fn empirical_cdf(samples: &[f64]) -> Result<EmpiricalCdf> {
    EmpiricalCdf::new(samples)
}
