//! Network geometry and channel realizations.
//!
//! Station indices follow one convention throughout the crate: terrestrial
//! macro base stations occupy `0..num_mbs` and the HAPS, when present, is the
//! last station (`num_mbs`).

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Largest number of macro base stations the grid layout accepts.
pub const MAX_GRID_MBS: usize = 64;

pub type Point3 = [f64; 3];

/// Planar array dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayGrid {
    pub rows: usize,
    pub cols: usize,
}

impl ArrayGrid {
    pub const fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub fn elements(&self) -> usize {
        self.rows * self.cols
    }
}

/// Physical and geometric parameters of one network.
///
/// Defaults are the full-scale values (16 UEs, four 4x4 MBSs and an 8x8 HAPS
/// over a 4 km square). [`ScenarioConfig::desk`] gives the small variant used
/// by the test-suite and the desk-scale experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub area_side_m: f64,
    pub num_mbs: usize,
    pub has_haps: bool,
    /// Place the last MBS at the area center instead of on the grid.
    pub center_mbs: bool,
    pub num_ues: usize,
    pub carrier_hz: f64,
    pub haps_altitude_m: f64,
    pub mbs_height_m: f64,
    pub ue_height_m: f64,
    pub mbs_antennas: ArrayGrid,
    pub haps_antennas: ArrayGrid,
    pub rician_k: f64,
    /// Interpret `rician_k` in dB rather than as a linear ratio.
    pub rician_k_is_db: bool,
    pub shadow_sigma_db: f64,
    pub noise_dbm: f64,
    pub p_max_mbs_dbm: f64,
    pub p_max_haps_dbm: f64,
    pub bandwidth_hz: f64,
    pub backhaul_bps: f64,
    pub gamma_min: f64,
    /// Cap on the SINR slack. The subproblems use the smaller of this and
    /// each UE's best single-link SNR as the big-M constant.
    pub gamma_max: f64,
    pub element_spacing_wavelengths: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            area_side_m: 4000.0,
            num_mbs: 4,
            has_haps: true,
            center_mbs: false,
            num_ues: 16,
            carrier_hz: 2.545e9,
            haps_altitude_m: 20_000.0,
            mbs_height_m: 25.0,
            ue_height_m: 1.5,
            mbs_antennas: ArrayGrid::new(4, 4),
            haps_antennas: ArrayGrid::new(8, 8),
            rician_k: 10.0,
            rician_k_is_db: false,
            shadow_sigma_db: 8.0,
            noise_dbm: -100.0,
            p_max_mbs_dbm: 43.0,
            p_max_haps_dbm: 52.0,
            bandwidth_hz: 1e6,
            backhaul_bps: 20e9,
            gamma_min: 1000.0,
            gamma_max: 1e12,
            element_spacing_wavelengths: 0.5,
            seed: 0,
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl ScenarioConfig {
    /// Desk-scale vHetNet: 4 UEs, two 2x2 MBSs and a 4x4 HAPS.
    pub fn desk() -> Self {
        Self {
            num_mbs: 2,
            num_ues: 4,
            mbs_antennas: ArrayGrid::new(2, 2),
            haps_antennas: ArrayGrid::new(4, 4),
            ..Self::default()
        }
    }

    /// The standalone terrestrial counterpart of a vHetNet: the HAPS is
    /// replaced by one extra MBS at the area center.
    pub fn terrestrial_counterpart(&self) -> Self {
        Self {
            num_mbs: self.num_mbs + 1,
            has_haps: false,
            center_mbs: true,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("area_side_m", self.area_side_m),
            ("carrier_hz", self.carrier_hz),
            ("mbs_height_m", self.mbs_height_m),
            ("ue_height_m", self.ue_height_m),
            ("bandwidth_hz", self.bandwidth_hz),
            ("backhaul_bps", self.backhaul_bps),
            ("element_spacing_wavelengths", self.element_spacing_wavelengths),
            ("gamma_max", self.gamma_max),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.num_ues == 0 {
            return Err(Error::Config("num_ues must be at least 1".into()));
        }
        if self.num_stations() == 0 {
            return Err(Error::Config("network has no base station".into()));
        }
        if self.num_mbs > MAX_GRID_MBS {
            return Err(Error::Config(format!(
                "{} MBSs exceed the grid capacity of {MAX_GRID_MBS}",
                self.num_mbs
            )));
        }
        if self.center_mbs && self.num_mbs == 0 {
            return Err(Error::Config("center_mbs requires at least one MBS".into()));
        }
        if self.mbs_antennas.elements() == 0 && self.num_mbs > 0 {
            return Err(Error::Config("MBS array has no elements".into()));
        }
        if self.has_haps {
            if self.haps_antennas.elements() == 0 {
                return Err(Error::Config("HAPS array has no elements".into()));
            }
            if !(self.haps_altitude_m > 0.0) {
                return Err(Error::Config("haps_altitude_m must be positive".into()));
            }
            if !(self.rician_k_linear() >= 0.0) {
                return Err(Error::Config("Rician K must be nonnegative".into()));
            }
        }
        if !(self.shadow_sigma_db >= 0.0) {
            return Err(Error::Config("shadow_sigma_db must be nonnegative".into()));
        }
        if !(self.gamma_min >= 0.0 && self.gamma_max > self.gamma_min) {
            return Err(Error::Config(format!(
                "need gamma_max > gamma_min >= 0, got gamma_min={} gamma_max={}",
                self.gamma_min, self.gamma_max
            )));
        }
        for (name, dbm) in [
            ("noise_dbm", self.noise_dbm),
            ("p_max_mbs_dbm", self.p_max_mbs_dbm),
            ("p_max_haps_dbm", self.p_max_haps_dbm),
        ] {
            if !dbm.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    pub fn num_stations(&self) -> usize {
        self.num_mbs + usize::from(self.has_haps)
    }

    pub fn haps_index(&self) -> Option<usize> {
        self.has_haps.then_some(self.num_mbs)
    }

    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    pub fn rician_k_linear(&self) -> f64 {
        if self.rician_k_is_db {
            10f64.powf(self.rician_k / 10.0)
        } else {
            self.rician_k
        }
    }

    /// Maximum transmit power of station `b`, in watts.
    pub fn p_max_watts(&self, b: usize) -> f64 {
        if Some(b) == self.haps_index() {
            dbm_to_watts(self.p_max_haps_dbm)
        } else {
            dbm_to_watts(self.p_max_mbs_dbm)
        }
    }

    pub fn station_antennas(&self, b: usize) -> ArrayGrid {
        if Some(b) == self.haps_index() {
            self.haps_antennas
        } else {
            self.mbs_antennas
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Placement {
    pub mbs_positions: Vec<Point3>,
    pub haps_position: Option<Point3>,
    pub ue_positions: Vec<Point3>,
}

impl Placement {
    pub fn station_position(&self, b: usize) -> Point3 {
        if b < self.mbs_positions.len() {
            self.mbs_positions[b]
        } else {
            self.haps_position
                .expect("station index past the MBS list requires a HAPS")
        }
    }
}

fn grid_positions(n: usize, side: f64, height: f64) -> Vec<Point3> {
    if n == 0 {
        return Vec::new();
    }
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let dx = side / cols as f64;
    let dy = side / rows as f64;
    (0..n)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            [(c as f64 + 0.5) * dx, (r as f64 + 0.5) * dy, height]
        })
        .collect()
}

/// Lays out MBSs on a regular grid over the square `[0, side]^2`, puts the
/// HAPS above the center and drops UEs uniformly at random.
pub fn build_placement<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<Placement> {
    config.validate()?;
    let side = config.area_side_m;
    let center = [side / 2.0, side / 2.0];
    let on_grid = config.num_mbs - usize::from(config.center_mbs);
    let mut mbs_positions = grid_positions(on_grid, side, config.mbs_height_m);
    if config.center_mbs {
        mbs_positions.push([center[0], center[1], config.mbs_height_m]);
    }
    let haps_position = config
        .has_haps
        .then_some([center[0], center[1], config.haps_altitude_m]);
    let coord = Uniform::new_inclusive(0.0, side);
    let ue_positions = (0..config.num_ues)
        .map(|_| [coord.sample(rng), coord.sample(rng), config.ue_height_m])
        .collect();
    Ok(Placement {
        mbs_positions,
        haps_position,
        ue_positions,
    })
}

/// Free-space path loss `(4 pi f d / c)^2` as a linear power ratio.
pub fn fspl(carrier_hz: f64, distance_m: f64) -> Result<f64> {
    if !(carrier_hz > 0.0 && distance_m > 0.0) {
        return Err(Error::Domain(format!(
            "fspl needs positive frequency and distance, got f={carrier_hz} d={distance_m}"
        )));
    }
    let a = 4.0 * PI * carrier_hz * distance_m / SPEED_OF_LIGHT;
    Ok(a * a)
}

/// Steering vector of a uniform planar array.
///
/// `polar` is measured from the array normal (boresight at 0), `azimuth` in
/// the array plane from the row axis. Element `(rx, ry)` sits at index
/// `rx * cols + ry` and carries phase
/// `2 pi spacing (rx sin(polar) cos(azimuth) + ry sin(polar) sin(azimuth))`.
pub fn upa_steering(grid: ArrayGrid, spacing_wavelengths: f64, azimuth: f64, polar: f64) -> Array1<Complex64> {
    let ux = polar.sin() * azimuth.cos();
    let uy = polar.sin() * azimuth.sin();
    let k = 2.0 * PI * spacing_wavelengths;
    Array1::from_iter(
        (0..grid.rows).flat_map(|rx| {
            (0..grid.cols).map(move |ry| Complex64::from_polar(1.0, k * (rx as f64 * ux + ry as f64 * uy)))
        }),
    )
}

fn distance(a: Point3, b: Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let n = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid std");
    Complex64::new(n.sample(rng), n.sample(rng))
}

/// Rician HAPS-to-UE channel with a LoS component from a downward-facing UPA.
pub fn sample_haps_channel<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    placement: &Placement,
    u: usize,
    rng: &mut R,
) -> Result<Array1<Complex64>> {
    let haps = placement
        .haps_position
        .ok_or_else(|| Error::Config("HAPS channel requested for a network without HAPS".into()))?;
    let ue = placement.ue_positions[u];
    let d = distance(haps, ue);
    let pl = fspl(config.carrier_hz, d)?;
    let dir = [(ue[0] - haps[0]) / d, (ue[1] - haps[1]) / d, (ue[2] - haps[2]) / d];
    // array normal points straight down
    let polar = (-dir[2]).clamp(-1.0, 1.0).acos();
    let azimuth = dir[1].atan2(dir[0]);
    let los = upa_steering(config.haps_antennas, config.element_spacing_wavelengths, azimuth, polar);
    let k = config.rician_k_linear();
    let w_nlos = (1.0 / (1.0 + k)).sqrt();
    let w_los = (k / (1.0 + k)).sqrt();
    let scale = 1.0 / pl.sqrt();
    Ok(los.mapv(|l| (complex_normal(rng) * w_nlos + l * w_los) * scale))
}

/// Draws the per-link shadowing amplitude `10^(xi'/10)` with `xi' ~ N(0, sigma^2)`.
pub fn sample_shadowing<R: Rng + ?Sized>(sigma_db: f64, rng: &mut R) -> f64 {
    if sigma_db == 0.0 {
        return 1.0;
    }
    let xi = Normal::new(0.0, sigma_db).expect("valid std").sample(rng);
    10f64.powf(xi / 10.0)
}

/// Rayleigh MBS-to-UE channel with one log-normal shadowing draw per link.
pub fn sample_mbs_channel<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    placement: &Placement,
    b: usize,
    u: usize,
    rng: &mut R,
) -> Result<Array1<Complex64>> {
    if b >= placement.mbs_positions.len() {
        return Err(Error::Config(format!("MBS index {b} out of range")));
    }
    let d = distance(placement.mbs_positions[b], placement.ue_positions[u]);
    let pl = fspl(config.carrier_hz, d)?;
    let shadow = sample_shadowing(config.shadow_sigma_db, rng);
    let scale = shadow / pl.sqrt();
    let n = config.mbs_antennas.elements();
    Ok(Array1::from_iter((0..n).map(|_| complex_normal(rng) * scale)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StationKind {
    Mbs,
    Haps,
}

/// Channel matrix `H^b` (antennas x UEs) of one station.
#[derive(Clone, Debug, PartialEq)]
pub struct StationChannel {
    pub kind: StationKind,
    pub h: Array2<Complex64>,
}

impl StationChannel {
    pub fn antennas(&self) -> usize {
        self.h.nrows()
    }

    pub fn column(&self, u: usize) -> ndarray::ArrayView1<'_, Complex64> {
        self.h.column(u)
    }
}

/// One Monte-Carlo realization of every station-to-UE channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    pub stations: Vec<StationChannel>,
    pub num_ues: usize,
}

impl ChannelSet {
    pub fn new(stations: Vec<StationChannel>) -> Result<Self> {
        let num_ues = stations.first().map(|s| s.h.ncols()).unwrap_or(0);
        if stations.iter().any(|s| s.h.ncols() != num_ues) {
            return Err(Error::Shape("stations disagree on the number of UEs".into()));
        }
        if stations
            .iter()
            .any(|s| s.h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()))
        {
            return Err(Error::Domain("channel contains non-finite entries".into()));
        }
        Ok(Self { stations, num_ues })
    }

    pub fn num_stations(&self) -> usize {
        self.stations.len()
    }

    pub fn haps_index(&self) -> Option<usize> {
        self.stations.iter().position(|s| s.kind == StationKind::Haps)
    }

    pub fn h(&self, b: usize, u: usize) -> ndarray::ArrayView1<'_, Complex64> {
        self.stations[b].h.column(u)
    }
}

/// Stream id of station `b`'s channel generator. MBS `b` uses `b + 1` and the
/// HAPS uses 0, so MBSs shared between two networks see the same fading.
fn station_stream(kind: StationKind, b: usize) -> u64 {
    match kind {
        StationKind::Haps => 0,
        StationKind::Mbs => b as u64 + 1,
    }
}

/// Draws every channel of the network. One `u64` is taken from `rng`; each
/// station then uses its own ChaCha stream keyed by that value.
pub fn sample_channel_set<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    placement: &Placement,
    rng: &mut R,
) -> Result<ChannelSet> {
    let key: u64 = rng.gen();
    let u_count = placement.ue_positions.len();
    let mut stations = Vec::with_capacity(config.num_stations());
    for b in 0..placement.mbs_positions.len() {
        let mut srng = ChaCha8Rng::seed_from_u64(key);
        srng.set_stream(station_stream(StationKind::Mbs, b));
        let n = config.mbs_antennas.elements();
        let mut h = Array2::zeros((n, u_count));
        for u in 0..u_count {
            h.column_mut(u)
                .assign(&sample_mbs_channel(config, placement, b, u, &mut srng)?);
        }
        stations.push(StationChannel {
            kind: StationKind::Mbs,
            h,
        });
    }
    if placement.haps_position.is_some() {
        let mut srng = ChaCha8Rng::seed_from_u64(key);
        srng.set_stream(station_stream(StationKind::Haps, 0));
        let n = config.haps_antennas.elements();
        let mut h = Array2::zeros((n, u_count));
        for u in 0..u_count {
            h.column_mut(u)
                .assign(&sample_haps_channel(config, placement, u, &mut srng)?);
        }
        stations.push(StationChannel {
            kind: StationKind::Haps,
            h,
        });
    }
    ChannelSet::new(stations)
}

/// Convenience: placement and channels from a single seed.
pub fn draw_network(config: &ScenarioConfig, seed: u64) -> Result<(Placement, ChannelSet)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let placement = build_placement(config, &mut rng)?;
    let channels = sample_channel_set(config, &placement, &mut rng)?;
    Ok((placement, channels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn fspl_reference_value() {
        // (4 pi 2.545e9 2e4 / c)^2 evaluated by hand
        let a = 4.0 * PI * 2.545e9 * 2.0e4 / 299_792_458.0;
        let got = fspl(2.545e9, 20_000.0).unwrap();
        assert_eq!(got, a * a);
        assert!((got / 4.55e12 - 1.0).abs() < 0.01, "{got}");
        assert!((10.0 * got.log10() - 126.6).abs() < 0.1);
    }

    #[test]
    fn fspl_unit_distance_and_square_law() {
        let f = 2.545e9;
        let d0 = SPEED_OF_LIGHT / (4.0 * PI * f);
        assert!((fspl(f, d0).unwrap() - 1.0).abs() < 1e-12);
        let l1 = fspl(f, 123.0).unwrap();
        let l2 = fspl(f, 246.0).unwrap();
        assert!((l2 / l1 - 4.0).abs() < 1e-12);
        assert!(fspl(f, 0.0).is_err());
        assert!(fspl(-1.0, 10.0).is_err());
    }

    #[test]
    fn steering_boresight_and_trivial_array() {
        let v = upa_steering(ArrayGrid::new(4, 4), 0.5, 1.234, 0.0);
        assert!(v.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-12));
        let one = upa_steering(ArrayGrid::new(1, 1), 0.5, 0.7, 1.1);
        assert_eq!(one.len(), 1);
        assert!((one[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn steering_endfire_half_wavelength() {
        let v = upa_steering(ArrayGrid::new(2, 1), 0.5, 0.0, PI / 2.0);
        let dphi = (v[1] / v[0]).arg().abs();
        assert!((dphi - PI).abs() < 1e-12);
        let w = upa_steering(ArrayGrid::new(3, 5), 0.5, 0.3, 0.9);
        assert!(w.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn placement_grid_and_haps() {
        let cfg = ScenarioConfig::default();
        let p = build_placement(&cfg, &mut rng(1)).unwrap();
        let mut got: Vec<(i64, i64)> = p
            .mbs_positions
            .iter()
            .map(|m| ((m[0] - 2000.0) as i64, (m[1] - 2000.0) as i64))
            .collect();
        got.sort();
        assert_eq!(got, vec![(-1000, -1000), (-1000, 1000), (1000, -1000), (1000, 1000)]);
        assert_eq!(p.haps_position, Some([2000.0, 2000.0, 20_000.0]));
        assert!(p
            .ue_positions
            .iter()
            .all(|u| (0.0..=4000.0).contains(&u[0]) && (0.0..=4000.0).contains(&u[1]) && u[2] == 1.5));

        let terr = cfg.terrestrial_counterpart();
        let t = build_placement(&terr, &mut rng(1)).unwrap();
        assert_eq!(t.mbs_positions.len(), 5);
        assert_eq!(t.mbs_positions[4], [2000.0, 2000.0, 25.0]);
        assert_eq!(t.haps_position, None);
        // same seed, same UE drop in both networks
        assert_eq!(t.ue_positions, p.ue_positions);
    }

    #[test]
    fn placement_is_deterministic_and_capped() {
        let cfg = ScenarioConfig::default();
        let a = build_placement(&cfg, &mut rng(9)).unwrap();
        let b = build_placement(&cfg, &mut rng(9)).unwrap();
        assert_eq!(a, b);
        let big = ScenarioConfig {
            num_mbs: MAX_GRID_MBS + 1,
            ..cfg
        };
        assert!(matches!(build_placement(&big, &mut rng(0)), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = ScenarioConfig::default();
        assert!(ScenarioConfig {
            num_ues: 0,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(ScenarioConfig {
            gamma_max: 10.0,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(ScenarioConfig {
            bandwidth_hz: 0.0,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(ScenarioConfig {
            num_mbs: 0,
            has_haps: false,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(base.validate().is_ok());
    }

    #[test]
    fn haps_channel_pure_los_limit() {
        let cfg = ScenarioConfig {
            rician_k: 1e12,
            ..ScenarioConfig::default()
        };
        let p = build_placement(&cfg, &mut rng(3)).unwrap();
        let h = sample_haps_channel(&cfg, &p, 0, &mut rng(4)).unwrap();
        let pl = fspl(cfg.carrier_hz, distance(p.haps_position.unwrap(), p.ue_positions[0])).unwrap();
        let e: f64 = h.iter().map(|z| z.norm_sqr()).sum::<f64>() * pl;
        assert!((e - 64.0).abs() < 1e-4, "{e}");
    }

    fn mean_haps_energy(k: f64, draws: usize) -> f64 {
        let cfg = ScenarioConfig {
            rician_k: k,
            ..ScenarioConfig::default()
        };
        let p = build_placement(&cfg, &mut rng(5)).unwrap();
        let pl = fspl(cfg.carrier_hz, distance(p.haps_position.unwrap(), p.ue_positions[0])).unwrap();
        let mut r = rng(6);
        (0..draws)
            .map(|_| {
                let h = sample_haps_channel(&cfg, &p, 0, &mut r).unwrap();
                h.iter().map(|z| z.norm_sqr()).sum::<f64>() * pl
            })
            .sum::<f64>()
            / draws as f64
    }

    #[test]
    fn haps_channel_energy_matches_array_size() {
        // N = 64; per-element second moment 1 for both components
        for k in [0.0, 10.0] {
            let m = mean_haps_energy(k, 10_000);
            assert!((m / 64.0 - 1.0).abs() < 0.03, "K={k}: {m}");
        }
    }

    #[test]
    fn mbs_channel_without_shadowing_is_standard_normal() {
        let cfg = ScenarioConfig {
            shadow_sigma_db: 0.0,
            ..ScenarioConfig::default()
        };
        let mut p = build_placement(&cfg, &mut rng(1)).unwrap();
        // put the UE at the unit-loss distance
        let d0 = SPEED_OF_LIGHT / (4.0 * PI * cfg.carrier_hz);
        let m = p.mbs_positions[0];
        p.ue_positions[0] = [m[0] + d0, m[1], m[2]];
        let mut r = rng(2);
        let n = 20_000;
        let (mut power, mut mean_re) = (0.0, 0.0);
        for _ in 0..n / 16 {
            let h = sample_mbs_channel(&cfg, &p, 0, 0, &mut r).unwrap();
            power += h.iter().map(|z| z.norm_sqr()).sum::<f64>();
            mean_re += h.iter().map(|z| z.re).sum::<f64>();
        }
        let cnt = (n / 16 * 16) as f64;
        assert!((power / cnt - 1.0).abs() < 0.03);
        assert!((mean_re / cnt).abs() < 0.02);
    }

    #[test]
    fn shadowing_statistics() {
        let mut r = rng(11);
        let draws: Vec<f64> = (0..10_000)
            .map(|_| 10.0 * sample_shadowing(8.0, &mut r).log10())
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!((var.sqrt() - 8.0).abs() < 0.3, "{}", var.sqrt());
        let mut sorted = draws.clone();
        sorted.sort_by(f64::total_cmp);
        // log-normal median is 1 (0 dB)
        assert!(sorted[sorted.len() / 2].abs() < 0.3);
    }

    #[test]
    fn shadowing_is_shared_within_a_link() {
        // with sigma > 0, the per-link factor cancels in element power ratios:
        // identical Rayleigh draws with and without shadowing differ by one scalar
        let cfg = ScenarioConfig::default();
        let p = build_placement(&cfg, &mut rng(1)).unwrap();
        let shadowed = sample_mbs_channel(&cfg, &p, 1, 2, &mut rng(77)).unwrap();
        let mut r = rng(77);
        let _ = sample_shadowing(8.0, &mut r);
        let n = cfg.mbs_antennas.elements();
        let d = distance(p.mbs_positions[1], p.ue_positions[2]);
        let pl = fspl(cfg.carrier_hz, d).unwrap();
        let raw: Vec<Complex64> = (0..n).map(|_| complex_normal(&mut r) / pl.sqrt()).collect();
        let ratio: Vec<f64> = shadowed.iter().zip(&raw).map(|(s, r)| (s / r).re).collect();
        assert!(ratio.iter().all(|x| (x / ratio[0] - 1.0).abs() < 1e-9));
    }

    #[test]
    fn channel_set_shapes_and_determinism() {
        let cfg = ScenarioConfig::default();
        let (_, a) = draw_network(&cfg, 42).unwrap();
        let (_, b) = draw_network(&cfg, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.num_stations(), 5);
        for s in &a.stations[..4] {
            assert_eq!(s.h.dim(), (16, 16));
            assert_eq!(s.kind, StationKind::Mbs);
        }
        assert_eq!(a.stations[4].h.dim(), (64, 16));
        assert_eq!(a.haps_index(), Some(4));

        let terr = cfg.terrestrial_counterpart();
        let (_, t) = draw_network(&terr, 42).unwrap();
        assert_eq!(t.haps_index(), None);
        assert_eq!(t.num_stations(), 5);
        // grid MBSs shared with the vHetNet see identical fading
        assert_eq!(t.stations[0], a.stations[0]);
    }
}
