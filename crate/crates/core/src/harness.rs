//! Monte-Carlo experiment runner.
//!
//! Every drop draws one placement per network from a drop-specific seed and
//! runs each requested objective on it, so objectives (and, through the shared
//! UE placement and grid MBS channels, networks) are compared on paired data.
//! Output is long-format CSV (`drop,seed,ue,metric,value`) plus a text summary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jubd::{sca_solve, FeasibilityReport, ObjectiveKind, ScaOptions, ScaStatus};
use crate::metrics::{empirical_cdf, SeReport};
use crate::mip::AssociationMode;
use crate::scenario::{draw_network, ScenarioConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Wsr,
    Pf,
    Mmf,
}

impl Objective {
    pub const ALL: [Objective; 3] = [Objective::Wsr, Objective::Pf, Objective::Mmf];

    pub fn label(self) -> &'static str {
        match self {
            Self::Wsr => "wsr",
            Self::Pf => "pf",
            Self::Mmf => "mmf",
        }
    }

    /// WSR uses equal weights.
    pub fn kind(self, num_ues: usize) -> ObjectiveKind {
        match self {
            Self::Wsr => ObjectiveKind::equal_wsr(num_ues),
            Self::Pf => ObjectiveKind::Pf,
            Self::Mmf => ObjectiveKind::Mmf,
        }
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|o| o.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown objective {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Network {
    /// The configured scenario: MBSs plus the HAPS.
    Vhetnet,
    /// The HAPS replaced by a center MBS.
    Terrestrial,
}

impl Network {
    pub fn label(self) -> &'static str {
        match self {
            Self::Vhetnet => "vhetnet",
            Self::Terrestrial => "terrestrial",
        }
    }

    /// Scenario of this network derived from the (vHetNet) experiment scenario.
    pub fn scenario(self, base: &ScenarioConfig) -> ScenarioConfig {
        match self {
            Self::Vhetnet => base.clone(),
            Self::Terrestrial => base.terrestrial_counterpart(),
        }
    }
}

impl FromStr for Network {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::Vhetnet, Self::Terrestrial]
            .into_iter()
            .find(|n| n.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown network {s:?}")))
    }
}

/// One Monte-Carlo experiment. `scenario` describes the vHetNet; its `seed`
/// is the base seed and drop `d` uses `seed + d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub objectives: Vec<Objective>,
    pub networks: Vec<Network>,
    pub drops: usize,
    pub sca: ScaOptions,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    /// Full-scale scenario with the fixed heuristic association, since exact
    /// association search is out of reach at 16 UEs.
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            objectives: Objective::ALL.to_vec(),
            networks: vec![Network::Vhetnet, Network::Terrestrial],
            drops: 1000,
            sca: ScaOptions {
                association_mode: AssociationMode::HeuristicFixed,
                ..ScaOptions::default()
            },
            output_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    /// Desk-scale experiment: 4 UEs, exact branch-and-bound association.
    pub fn desk() -> Self {
        Self {
            scenario: ScenarioConfig::desk(),
            drops: 50,
            sca: ScaOptions::default(),
            ..Self::default()
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.into(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.drops == 0 {
            return Err(Error::Config("drops must be at least 1".into()));
        }
        if self.objectives.is_empty() || self.networks.is_empty() {
            return Err(Error::Config("need at least one objective and one network".into()));
        }
        if self.networks.contains(&Network::Vhetnet) && !self.scenario.has_haps {
            return Err(Error::Config("the vhetnet network needs a scenario with a HAPS".into()));
        }
        self.scenario.validate()?;
        self.sca.validate()
    }

    pub fn drop_seed(&self, drop: usize) -> u64 {
        self.scenario.seed.wrapping_add(drop as u64)
    }

    fn objectives_sorted(&self) -> Vec<Objective> {
        let mut v = self.objectives.clone();
        v.sort();
        v.dedup();
        v
    }

    fn networks_sorted(&self) -> Vec<Network> {
        let mut v = self.networks.clone();
        v.sort();
        v.dedup();
        v
    }
}

/// Outcome of one (drop, network, objective) run.
#[derive(Clone, Debug, PartialEq)]
pub struct DropResult {
    pub drop: usize,
    pub seed: u64,
    pub objective: Objective,
    pub network: Network,
    pub se: SeReport,
    pub iterations: usize,
    pub converged: bool,
    pub status: ScaStatus,
    pub wall_clock_s: f64,
    /// Objective of every accepted SCA iterate.
    pub trace: Vec<f64>,
    /// Smallest `achieved SINR - alpha` over all iterates and UEs.
    pub inner_margin: f64,
    pub feasibility: FeasibilityReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DropFailure {
    pub drop: usize,
    pub seed: u64,
    pub objective: Objective,
    pub network: Network,
    pub reason: String,
}

/// Paired vHetNet-minus-terrestrial differences for one objective.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkComparison {
    pub objective: Objective,
    pub pairs: usize,
    pub mean_min_se_delta: f64,
    /// 5th percentile of vHetNet min SE minus that of the terrestrial network.
    pub p5_min_se_delta: f64,
    pub mean_sum_se_delta: f64,
    pub p5_sum_se_delta: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    /// Ordered by drop, then network, then objective.
    pub results: Vec<DropResult>,
    pub failures: Vec<DropFailure>,
    pub comparisons: Vec<NetworkComparison>,
    pub files: Vec<PathBuf>,
}

fn run_drop(
    config: &ExperimentConfig,
    drop: usize,
    network: Network,
) -> Vec<std::result::Result<DropResult, DropFailure>> {
    let seed = config.drop_seed(drop);
    let scenario = network.scenario(&config.scenario);
    let fail = |objective: Objective, reason: String| {
        log::warn!("drop {drop} ({network:?}, {objective:?}) failed: {reason}");
        Err(DropFailure {
            drop,
            seed,
            objective,
            network,
            reason,
        })
    };
    let channels = match draw_network(&scenario, seed) {
        Ok((_, ch)) => ch,
        Err(e) => {
            return config
                .objectives_sorted()
                .into_iter()
                .map(|o| fail(o, e.to_string()))
                .collect()
        }
    };
    let mut out = Vec::new();
    for objective in config.objectives_sorted() {
        let started = std::time::Instant::now();
        let report = match sca_solve(&objective.kind(scenario.num_ues), &channels, &scenario, &config.sca) {
            Ok(r) => r,
            Err(e) => {
                out.push(fail(objective, e.to_string()));
                continue;
            }
        };
        if !report.has_iterate() {
            out.push(fail(objective, format!("no accepted iterate ({:?})", report.status)));
            continue;
        }
        let inner_margin = report
            .iterations
            .iter()
            .flat_map(|it| it.achieved_sinr.iter().zip(&it.alpha).map(|(g, a)| g - a))
            .fold(f64::INFINITY, f64::min);
        out.push(Ok(DropResult {
            drop,
            seed,
            objective,
            network,
            se: report.se.clone(),
            iterations: report.iterations.len(),
            converged: report.converged(),
            status: report.status,
            wall_clock_s: started.elapsed().as_secs_f64(),
            trace: report.trace.clone(),
            inner_margin,
            feasibility: report.feasibility.clone(),
        }));
    }
    out
}

/// Runs every (drop, network, objective) combination, writes the CSV files
/// and the summary into `config.output_dir` and returns everything in drop
/// order. Failed runs are logged, excluded and counted.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.clone(),
        source,
    })?;

    let networks = config.networks_sorted();
    let units: Vec<(usize, Network)> = (0..config.drops)
        .flat_map(|d| networks.iter().map(move |&n| (d, n)))
        .collect();
    let runs: Vec<_> = units.par_iter().map(|&(d, n)| run_drop(config, d, n)).collect();

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for r in runs.into_iter().flatten() {
        match r {
            Ok(x) => results.push(x),
            Err(f) => failures.push(f),
        }
    }

    let comparisons = if networks.len() == 2 {
        compare_networks(&paired_subset(&results))?
    } else {
        Vec::new()
    };
    let files = write_outputs(config, &results, &failures, &comparisons)?;
    Ok(ExperimentOutcome {
        results,
        failures,
        comparisons,
        files,
    })
}

/// Keeps the results whose (seed, objective) succeeded on both networks.
fn paired_subset(results: &[DropResult]) -> Vec<DropResult> {
    let has = |r: &DropResult, n: Network| {
        results
            .iter()
            .any(|x| x.seed == r.seed && x.objective == r.objective && x.network == n)
    };
    results
        .iter()
        .filter(|r| has(r, Network::Vhetnet) && has(r, Network::Terrestrial))
        .cloned()
        .collect()
}

/// Paired vHetNet-minus-terrestrial statistics per objective. Every
/// (seed, objective) must appear exactly once for each network.
pub fn compare_networks(results: &[DropResult]) -> Result<Vec<NetworkComparison>> {
    let mut objectives: Vec<Objective> = results.iter().map(|r| r.objective).collect();
    objectives.sort();
    objectives.dedup();
    let mut out = Vec::new();
    for objective in objectives {
        let side = |n: Network| {
            let mut v: Vec<&DropResult> = results
                .iter()
                .filter(|r| r.objective == objective && r.network == n)
                .collect();
            v.sort_by_key(|r| r.seed);
            v
        };
        let (v, t) = (side(Network::Vhetnet), side(Network::Terrestrial));
        let seeds = |s: &[&DropResult]| s.iter().map(|r| r.seed).collect::<Vec<_>>();
        let (sv, st) = (seeds(&v), seeds(&t));
        if sv != st || sv.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Unpaired(format!(
                "{}: {} vhetnet and {} terrestrial results with different seed sets",
                objective.label(),
                v.len(),
                t.len()
            )));
        }
        if v.is_empty() {
            continue;
        }
        let min_v: Vec<f64> = v.iter().map(|r| r.se.min_se).collect();
        let min_t: Vec<f64> = t.iter().map(|r| r.se.min_se).collect();
        let sum_v: Vec<f64> = v.iter().map(|r| r.se.sum_se).collect();
        let sum_t: Vec<f64> = t.iter().map(|r| r.se.sum_se).collect();
        let mean_delta = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).sum::<f64>() / a.len() as f64;
        let p5 = |a: &[f64]| empirical_cdf(a).map(|c| c.percentile(0.05));
        out.push(NetworkComparison {
            objective,
            pairs: v.len(),
            mean_min_se_delta: mean_delta(&min_v, &min_t),
            p5_min_se_delta: p5(&min_v)? - p5(&min_t)?,
            mean_sum_se_delta: mean_delta(&sum_v, &sum_t),
            p5_sum_se_delta: p5(&sum_v)? - p5(&sum_t)?,
        });
    }
    Ok(out)
}

fn metric(r: &DropResult) -> String {
    format!("{}/{}", r.objective.label(), r.network.label())
}

/// Results grouped by metric (objective, then network), drops ascending.
fn grouped(results: &[DropResult]) -> Vec<&DropResult> {
    let mut v: Vec<&DropResult> = results.iter().collect();
    v.sort_by_key(|r| (r.objective, r.network, r.drop));
    v
}

const CSV_HEADER: &str = "drop,seed,ue,metric,value\n";

pub fn per_ue_csv(results: &[DropResult]) -> String {
    let mut s = String::from(CSV_HEADER);
    for r in grouped(results) {
        for (u, se) in r.se.per_ue_se.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{},{}", r.drop, r.seed, u, metric(r), se);
        }
    }
    s
}

/// Per-drop scalar metric; the `ue` column is left empty.
pub fn scalar_csv(results: &[DropResult], value: impl Fn(&SeReport) -> f64) -> String {
    let mut s = String::from(CSV_HEADER);
    for r in grouped(results) {
        let _ = writeln!(s, "{},{},,{},{}", r.drop, r.seed, metric(r), value(&r.se));
    }
    s
}

fn stats_line(name: &str, samples: &[f64]) -> String {
    match empirical_cdf(samples) {
        Ok(c) => format!(
            "  {name:<8} mean {:>9.4}  std {:>8.4}  p5 {:>9.4}\n",
            c.mean(),
            c.std(),
            c.percentile(0.05)
        ),
        Err(_) => format!("  {name:<8} no samples\n"),
    }
}

/// Plain-text summary. Contains no timing so that reruns are byte-identical.
pub fn summary_text(
    config: &ExperimentConfig,
    results: &[DropResult],
    failures: &[DropFailure],
    comparisons: &[NetworkComparison],
) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "drops {}  base seed {}  UEs {}  association {:?}\n",
        config.drops, config.scenario.seed, config.scenario.num_ues, config.sca.association_mode
    );
    for objective in config.objectives_sorted() {
        for network in config.networks_sorted() {
            let rs: Vec<&DropResult> = results
                .iter()
                .filter(|r| r.objective == objective && r.network == network)
                .collect();
            let failed = failures
                .iter()
                .filter(|f| f.objective == objective && f.network == network)
                .count();
            let converged = rs.iter().filter(|r| r.converged).count();
            let _ = writeln!(
                s,
                "{}/{}: {} accepted, {} failed, {} converged",
                objective.label(),
                network.label(),
                rs.len(),
                failed,
                converged
            );
            let per_ue: Vec<f64> = rs.iter().flat_map(|r| r.se.per_ue_se.iter().copied()).collect();
            let sums: Vec<f64> = rs.iter().map(|r| r.se.sum_se).collect();
            let mins: Vec<f64> = rs.iter().map(|r| r.se.min_se).collect();
            s.push_str(&stats_line("per-UE", &per_ue));
            s.push_str(&stats_line("sum", &sums));
            s.push_str(&stats_line("min", &mins));
        }
    }
    if !comparisons.is_empty() {
        s.push_str("\nvhetnet - terrestrial (paired)\n");
        for c in comparisons {
            let _ = writeln!(
                s,
                "  {:<4} pairs {:>4}  min SE: mean {:+.4} p5 {:+.4}  sum SE: mean {:+.4} p5 {:+.4}",
                c.objective.label(),
                c.pairs,
                c.mean_min_se_delta,
                c.p5_min_se_delta,
                c.mean_sum_se_delta,
                c.p5_sum_se_delta
            );
        }
    }
    s
}

fn write_outputs(
    config: &ExperimentConfig,
    results: &[DropResult],
    failures: &[DropFailure],
    comparisons: &[NetworkComparison],
) -> Result<Vec<PathBuf>> {
    let files = [
        ("per_ue_se.csv", per_ue_csv(results)),
        ("sum_se.csv", scalar_csv(results, |se| se.sum_se)),
        ("min_se.csv", scalar_csv(results, |se| se.min_se)),
        ("summary.txt", summary_text(config, results, failures, comparisons)),
    ];
    let mut paths = Vec::new();
    for (name, body) in files {
        let path = config.output_dir.join(name);
        std::fs::write(&path, body).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        paths.push(path);
    }
    Ok(paths)
}

/// Command-line flags. Anything given here overrides the config file.
#[derive(Debug, Parser)]
#[command(
    name = "vhetnet-jubd",
    about = "Monte-Carlo joint association and beamforming experiments"
)]
pub struct Cli {
    /// JSON experiment file; built-in full-scale defaults otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Objective to run; repeat for several.
    #[arg(long = "objective", value_enum)]
    pub objectives: Vec<Objective>,
    /// Network to run; repeat for both.
    #[arg(long = "network", value_enum)]
    pub networks: Vec<Network>,
    #[arg(long)]
    pub drops: Option<usize>,
    /// Base seed; drop d uses seed + d.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "assoc-mode", value_parser = parse_assoc_mode)]
    pub assoc_mode: Option<AssociationMode>,
    #[arg(long = "out")]
    pub out: Option<PathBuf>,
}

fn parse_assoc_mode(s: &str) -> std::result::Result<AssociationMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Cli {
    pub fn into_config(self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => ExperimentConfig::default(),
        };
        if !self.objectives.is_empty() {
            config.objectives = self.objectives;
        }
        if !self.networks.is_empty() {
            config.networks = self.networks;
        }
        if let Some(d) = self.drops {
            config.drops = d;
        }
        if let Some(s) = self.seed {
            config.scenario.seed = s;
        }
        if let Some(m) = self.assoc_mode {
            config.sca.association_mode = m;
        }
        if let Some(o) = self.out {
            config.output_dir = o;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Parses `argv` (program name first) into a validated experiment.
pub fn parse_cli<I, T>(argv: I) -> Result<ExperimentConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(argv)?.into_config()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake(drop: usize, objective: Objective, network: Network, per_ue: Vec<f64>) -> DropResult {
        let sinr: Vec<f64> = per_ue.iter().map(|se| se.exp2() - 1.0).collect();
        let se = SeReport::from_sinr(sinr, &vec![1.0; per_ue.len()]).unwrap();
        DropResult {
            drop,
            seed: 100 + drop as u64,
            objective,
            network,
            se,
            iterations: 1,
            converged: true,
            status: ScaStatus::Converged,
            wall_clock_s: 0.5,
            trace: vec![1.0],
            inner_margin: 0.0,
            feasibility: FeasibilityReport {
                association_margin: 1.0,
                zero_beam_margin: 0.0,
                power_margins: vec![0.0],
                backhaul_margin: None,
                backhaul_vacuous: true,
                gamma_min_margins: None,
            },
        }
    }

    #[test]
    fn identical_networks_have_zero_deltas() {
        let mut rs = Vec::new();
        for d in 0..5 {
            for n in [Network::Vhetnet, Network::Terrestrial] {
                rs.push(fake(d, Objective::Pf, n, vec![1.0 + d as f64, 2.0]));
            }
        }
        let c = compare_networks(&rs).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].pairs, 5);
        for x in [
            c[0].mean_min_se_delta,
            c[0].p5_min_se_delta,
            c[0].mean_sum_se_delta,
            c[0].p5_sum_se_delta,
        ] {
            assert!(x.abs() < 1e-12);
        }
    }

    #[test]
    fn dominating_network_has_positive_deltas() {
        let mut rs = Vec::new();
        for d in 0..20 {
            rs.push(fake(
                d,
                Objective::Mmf,
                Network::Vhetnet,
                vec![2.0 + d as f64, 3.0 + d as f64],
            ));
            rs.push(fake(
                d,
                Objective::Mmf,
                Network::Terrestrial,
                vec![1.0 + d as f64, 3.0 + d as f64],
            ));
        }
        let c = &compare_networks(&rs).unwrap()[0];
        assert!((c.mean_min_se_delta - 1.0).abs() < 1e-9);
        assert!((c.p5_min_se_delta - 1.0).abs() < 1e-9);
        assert!((c.mean_sum_se_delta - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unpaired_results_are_rejected() {
        let rs = vec![
            fake(0, Objective::Wsr, Network::Vhetnet, vec![1.0]),
            fake(1, Objective::Wsr, Network::Terrestrial, vec![1.0]),
        ];
        assert!(matches!(compare_networks(&rs), Err(Error::Unpaired(_))));
        let rs = vec![fake(0, Objective::Wsr, Network::Vhetnet, vec![1.0])];
        assert!(matches!(compare_networks(&rs), Err(Error::Unpaired(_))));
    }

    #[test]
    fn csv_layout() {
        let rs = vec![
            fake(1, Objective::Wsr, Network::Vhetnet, vec![1.0, 2.5]),
            fake(0, Objective::Wsr, Network::Vhetnet, vec![3.0, 4.0]),
        ];
        let per_ue = per_ue_csv(&rs);
        let lines: Vec<&str> = per_ue.lines().collect();
        assert_eq!(lines[0], "drop,seed,ue,metric,value");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1], "0,100,0,wsr/vhetnet,3");
        assert_eq!(lines[4], "1,101,1,wsr/vhetnet,2.5");
        let sum = scalar_csv(&rs, |se| se.sum_se);
        assert_eq!(sum.lines().nth(1), Some("0,100,,wsr/vhetnet,7"));
    }

    #[test]
    fn cli_flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.json");
        let file = ExperimentConfig {
            drops: 7,
            ..ExperimentConfig::desk()
        };
        std::fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
        let p = path.to_str().unwrap();
        let c = parse_cli(["x", "--config", p]).unwrap();
        assert_eq!(c, file);
        let c = parse_cli([
            "x",
            "--config",
            p,
            "--drops",
            "50",
            "--objective",
            "wsr",
            "--assoc-mode",
            "heuristic",
        ])
        .unwrap();
        assert_eq!(c.drops, 50);
        assert_eq!(c.objectives, vec![Objective::Wsr]);
        assert_eq!(c.sca.association_mode, AssociationMode::HeuristicFixed);
        assert_eq!(c.scenario, file.scenario);
    }

    #[test]
    fn cli_defaults_and_errors() {
        let c = parse_cli(["x"]).unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.scenario.num_ues, 16);
        let c = parse_cli([
            "x",
            "--objective",
            "pf",
            "--objective",
            "mmf",
            "--network",
            "terrestrial",
            "--seed",
            "9",
        ])
        .unwrap();
        assert_eq!(c.objectives, vec![Objective::Pf, Objective::Mmf]);
        assert_eq!(c.networks, vec![Network::Terrestrial]);
        assert_eq!(c.scenario.seed, 9);
        assert!(matches!(parse_cli(["x", "--bogus"]), Err(Error::Usage(_))));
        assert!(matches!(parse_cli(["x", "--objective", "sum"]), Err(Error::Usage(_))));
        assert!(matches!(parse_cli(["x", "--drops", "0"]), Err(Error::Config(_))));
    }

    #[test]
    fn config_json_rejects_unknown_fields() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"drops": 3, "nope": 1}"#).is_err());
        let c: ExperimentConfig = serde_json::from_str(r#"{"drops": 3, "objectives": ["mmf"]}"#).unwrap();
        assert_eq!(c.drops, 3);
        assert_eq!(c.objectives, vec![Objective::Mmf]);
    }
}
