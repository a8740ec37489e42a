//! Experiment configuration: a TOML (or JSON) file with dotted sections.
//!
//! Powers are given in dBm, the decoding threshold in dB and the relay
//! beamwidth in degrees; everything is converted to SI units here.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use relaylab::analytic::{AnalyticOptions, EnergyAccounting};
use relaylab::model::{db_to_linear, dbm_to_watts, AntennaPattern, NetworkParams, Protocol, Receiver, SchemeSpec, ScMode};
use relaylab::quad::Tolerance;
use relaylab::simulator::{DeploymentModel, McConfig, ScCounting};
use serde::{Deserialize, Serialize};

use crate::{CliError, SIDECAR_HASH_KEY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkSection,
    /// Scheme labels such as `selection`, `baseline/nosic-lower` or
    /// `feedback/sc-opt-select`.
    pub schemes: Vec<String>,
    pub engine: Engine,
    /// Fixed UE position; the cell average is used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<PositionSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    pub mc: McSection,
    pub analytic: AnalyticSection,
    pub cdf: CdfSection,
    pub validate: ValidateSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            network: NetworkSection::default(),
            schemes: Protocol::ALL.iter().map(|p| p.name().to_string()).collect(),
            engine: Engine::Analytic,
            position: None,
            sweep: None,
            mc: McSection::default(),
            analytic: AnalyticSection::default(),
            cdf: CdfSection::default(),
            validate: ValidateSection::default(),
            output: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    /// UE density [m⁻²].
    pub lambda: f64,
    pub path_loss: f64,
    pub alpha: f64,
    pub noise_dbm: f64,
    pub pt_dbm: f64,
    /// Relay effective power as a multiple of the UE power.
    pub pr_over_pt: f64,
    pub eta: f64,
    pub theta_db: f64,
    pub kr: u32,
    /// Relay-BS distance [m].
    pub d_rb: f64,
    /// Slot duration [s].
    pub slot_s: f64,
    /// 3 dB beamwidth of the relay receive antenna [deg]; omnidirectional
    /// when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relay_beamwidth_deg: Option<f64>,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            lambda: 4.6e-6,
            path_loss: 1e-3,
            alpha: 3.7,
            noise_dbm: -103.0,
            pt_dbm: 23.0,
            pr_over_pt: 2.0,
            eta: 10.0,
            theta_db: 3.0,
            kr: 3,
            d_rb: 150.0,
            slot_s: 1e-3,
            relay_beamwidth_deg: None,
        }
    }
}

impl NetworkSection {
    pub fn to_params(&self) -> Result<NetworkParams<f64>, CliError> {
        let pt = dbm_to_watts(self.pt_dbm);
        let rx_pattern_relay = match self.relay_beamwidth_deg {
            None => AntennaPattern::omni(),
            Some(deg) => AntennaPattern::from_beamwidth(deg.to_radians())?,
        };
        let p = NetworkParams {
            lambda: self.lambda,
            path_loss_const: self.path_loss,
            alpha: self.alpha,
            noise: dbm_to_watts(self.noise_dbm),
            pt,
            pr: self.pr_over_pt * pt,
            eta: self.eta,
            theta: db_to_linear(self.theta_db),
            kr: self.kr,
            d_rb: self.d_rb,
            slot_t: self.slot_s,
            rx_pattern_relay,
            rx_pattern_bs: AntennaPattern::omni(),
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    #[default]
    Analytic,
    #[serde(alias = "montecarlo")]
    #[value(alias = "montecarlo")]
    Mc,
    Both,
}

impl Engine {
    pub fn analytic(self) -> bool {
        self != Engine::Mc
    }

    pub fn mc(self) -> bool {
        self != Engine::Analytic
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionSection {
    pub d_ub: f64,
    /// Angle from the serving relay's axis [rad].
    #[serde(default)]
    pub theta_u: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "d_rb")]
    DRb,
    #[serde(rename = "kr")]
    Kr,
    #[serde(rename = "Pr_over_Pt")]
    PrOverPt,
    /// Relay 3 dB beamwidth [deg].
    #[serde(rename = "beamwidth_3db")]
    Beamwidth,
    /// Power split of every fixed-β SC scheme.
    #[serde(rename = "beta")]
    Beta,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::DRb => "d_rb",
            SweepAxis::Kr => "kr",
            SweepAxis::PrOverPt => "Pr_over_Pt",
            SweepAxis::Beamwidth => "beamwidth_3db",
            SweepAxis::Beta => "beta",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Deployment {
    #[default]
    UePpp,
    BsVoronoi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Counting {
    #[default]
    AsPrinted,
    PerPacket,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Energy {
    #[default]
    AsPrinted,
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub trials: u64,
    pub seed: u64,
    pub deployment: Deployment,
    pub sc_counting: Counting,
    /// One network realization for the whole run instead of one per trial.
    pub frozen: bool,
}

impl Default for McSection {
    fn default() -> Self {
        Self { trials: 100_000, seed: 1, deployment: Deployment::UePpp, sc_counting: Counting::AsPrinted, frozen: false }
    }
}

impl McSection {
    pub fn to_config(&self) -> McConfig {
        let model = match self.deployment {
            Deployment::UePpp => DeploymentModel::UePpp,
            Deployment::BsVoronoi => DeploymentModel::BsVoronoi,
        };
        let counting = match self.sc_counting {
            Counting::AsPrinted => ScCounting::AsPrinted,
            Counting::PerPacket => ScCounting::PerPacket,
        };
        McConfig::new(self.trials, self.seed).with_model(model).with_counting(counting).with_frozen(self.frozen)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticSection {
    pub energy: Energy,
    /// Relative tolerance of the cell-average integrals.
    pub cell_rel_tol: f64,
    /// Relative tolerance of the Laplace-functional integrals.
    pub laplace_rel_tol: f64,
}

impl Default for AnalyticSection {
    fn default() -> Self {
        let d = AnalyticOptions::<f64>::default();
        Self { energy: Energy::AsPrinted, cell_rel_tol: d.cell_tol.rel, laplace_rel_tol: d.laplace_tol.rel }
    }
}

impl AnalyticSection {
    pub fn to_options(&self) -> Result<AnalyticOptions<f64>, CliError> {
        let d = AnalyticOptions::<f64>::default();
        let cell_tol = Tolerance::new(self.cell_rel_tol, d.cell_tol.abs, d.cell_tol.max_evals)?;
        let laplace_tol = Tolerance::new(self.laplace_rel_tol, d.laplace_tol.abs, d.laplace_tol.max_evals)?;
        let energy = match self.energy {
            Energy::AsPrinted => EnergyAccounting::AsPrinted,
            Energy::Joint => EnergyAccounting::Joint,
        };
        Ok(AnalyticOptions { laplace_tol, cell_tol, energy })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CdfSection {
    /// Throughput thresholds [packets per slot pair], increasing.
    pub thresholds: Vec<f64>,
    /// Monte Carlo: UE positions and trials at each.
    pub positions: usize,
    pub trials_per_position: u64,
}

impl Default for CdfSection {
    fn default() -> Self {
        Self { thresholds: (0..=200).map(|i| i as f64 * 0.02).collect(), positions: 1000, trials_per_position: 2000 }
    }
}

/// Budgets and tolerances of the acceptance checks run by `validate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    /// Checks to run, by number; all when empty.
    pub checks: Vec<u32>,
    pub seed: u64,
    pub hypergeometric_rel_tol: f64,
    pub laplace_rel_tol: f64,
    /// Largest admissible |z| between an analytic value and its MC estimate.
    pub z_max: f64,
    pub cross_trials: u64,
    pub sic_samples: u64,
    pub ordering_slack: f64,
    pub ordering_geometries: usize,
    pub ordering_trials: u64,
    pub deployment_rel_tol: f64,
    pub deployment_trials: u64,
    /// Relative tolerance of the cell averages behind the curve-shape checks.
    pub sweep_cell_rel_tol: f64,
    /// Trials per run of the determinism check.
    pub determinism_trials: u64,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            checks: Vec::new(),
            seed: 1,
            hypergeometric_rel_tol: 1e-8,
            laplace_rel_tol: 1e-8,
            z_max: 3.0,
            cross_trials: 1_000_000,
            sic_samples: 10_000_000,
            ordering_slack: 1e-9,
            ordering_geometries: 1000,
            ordering_trials: 100_000,
            deployment_rel_tol: 0.05,
            deployment_trials: 1_000_000,
            sweep_cell_rel_tol: 1e-4,
            determinism_trials: 20_000,
        }
    }
}

impl ExperimentConfig {
    /// Reads a TOML file, or JSON when the extension is `.json`. A sidecar
    /// written by `run` is accepted too; its `config` member is used.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if value.get(SIDECAR_HASH_KEY).is_some() {
            value = value["config"].take();
        }
        serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn params(&self) -> Result<NetworkParams<f64>, CliError> {
        self.network.to_params()
    }

    pub fn scheme_specs(&self) -> Result<Vec<SchemeSpec<f64>>, CliError> {
        if self.schemes.is_empty() {
            return Err(CliError::Config("`schemes` is empty".into()));
        }
        self.schemes.iter().map(|s| parse_scheme(s)).collect()
    }

    /// Checks everything that can be checked without running an engine.
    pub fn validate(&self) -> Result<(), CliError> {
        self.params()?;
        self.analytic.to_options()?;
        for s in self.scheme_specs()? {
            s.validate()?;
        }
        if let Some(pos) = self.position {
            if !(pos.d_ub > 0.0) || !pos.d_ub.is_finite() || !pos.theta_u.is_finite() {
                return Err(CliError::Config("position.d_ub must be positive and theta_u finite".into()));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(CliError::Config("sweep.values is empty".into()));
            }
            if sweep.values.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(CliError::Config("sweep.values must be strictly increasing".into()));
            }
            if sweep.axis == SweepAxis::Beta
                && !self.scheme_specs()?.iter().any(|s| matches!(s.sc, ScMode::FixedBeta(_)))
            {
                return Err(CliError::Config("a beta sweep needs at least one fixed-beta SC scheme".into()));
            }
            for &v in &sweep.values {
                let (p, schemes) = self.at(sweep.axis, v)?;
                p.validate()?;
                for s in &schemes {
                    s.validate()?;
                }
            }
        }
        if self.cdf.thresholds.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(CliError::Config("cdf.thresholds must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Parameters and schemes with the sweep axis set to `value`.
    pub fn at(&self, axis: SweepAxis, value: f64) -> Result<(NetworkParams<f64>, Vec<SchemeSpec<f64>>), CliError> {
        let mut net = self.network.clone();
        let mut schemes = self.scheme_specs()?;
        match axis {
            SweepAxis::DRb => net.d_rb = value,
            SweepAxis::Kr => {
                if value.fract() != 0.0 || !(1.0..=u32::MAX as f64).contains(&value) {
                    return Err(CliError::Config(format!("kr sweep value {value} is not a positive integer")));
                }
                net.kr = value as u32;
            }
            SweepAxis::PrOverPt => net.pr_over_pt = value,
            SweepAxis::Beamwidth => net.relay_beamwidth_deg = Some(value),
            SweepAxis::Beta => {
                for s in &mut schemes {
                    if let ScMode::FixedBeta(b) = &mut s.sc {
                        *b = value;
                    }
                }
            }
        }
        Ok((net.to_params()?, schemes))
    }
}

/// Parses `protocol[/receiver][/sc-mode]`, the format [`SchemeSpec`]'s
/// `Display` produces.
pub fn parse_scheme(label: &str) -> Result<SchemeSpec<f64>, CliError> {
    let bad = |why: &str| CliError::Config(format!("scheme `{label}`: {why}"));
    let mut parts = label.split('/');
    let protocol = match parts.next().unwrap_or("") {
        "basic" => Protocol::Basic,
        "baseline" => Protocol::BaselineRelay,
        "selection" => Protocol::SelectionRelay,
        "feedback" => Protocol::FeedbackRelay,
        other => return Err(bad(&format!("unknown protocol `{other}`"))),
    };
    let mut spec = SchemeSpec::new(protocol);
    for part in parts {
        match part {
            "sic" => spec.receiver = Receiver::Sic,
            "nosic-lower" => spec.receiver = Receiver::NoSicLowerBound,
            "nosic-upper" => spec.receiver = Receiver::NoSicUpperBound,
            "sc-opt-relay" => spec.sc = ScMode::OptimalBetaRelay,
            "sc-opt-select" => spec.sc = ScMode::OptimalBetaSelect,
            p if p.starts_with("sc-") => {
                let beta = f64::from_str(&p[3..]).map_err(|_| bad(&format!("bad power split `{p}`")))?;
                spec.sc = ScMode::FixedBeta(beta);
            }
            other => return Err(bad(&format!("unknown qualifier `{other}`"))),
        }
    }
    spec.validate()?;
    Ok(spec)
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Analytic => "analytic",
            Engine::Mc => "mc",
            Engine::Both => "both",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_reference_scenario() {
        let p = ExperimentConfig::default().params().unwrap();
        let r = NetworkParams::<f64>::reference();
        for (a, b) in [(p.noise, r.noise), (p.pt, r.pt), (p.pr, r.pr), (p.theta, r.theta)] {
            assert!((a / b - 1.0).abs() < 1e-12);
        }
        assert_eq!((p.lambda, p.alpha, p.kr, p.d_rb), (r.lambda, r.alpha, r.kr, r.d_rb));
    }

    #[test]
    fn dotted_keys_and_sections_parse() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            engine = "both"
            schemes = ["basic", "feedback/sc-opt-select"]
            network.theta_db = 6.0
            mc.trials = 5000
            [sweep]
            axis = "Pr_over_Pt"
            values = [1, 2, 4]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.engine, Engine::Both);
        assert_eq!(cfg.network.theta_db, 6.0);
        assert_eq!(cfg.mc.trials, 5000);
        assert_eq!(cfg.sweep.as_ref().unwrap().axis, SweepAxis::PrOverPt);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("network.lamda = 1e-6").is_err());
        assert!(ExperimentConfig::from_toml("engin = \"mc\"").is_err());
        assert!(ExperimentConfig::from_json(r#"{"mc": {"trails": 10}}"#).is_err());
    }

    #[test]
    fn sweep_values_must_increase_and_be_present() {
        let mut cfg =
            ExperimentConfig { sweep: Some(SweepSection { axis: SweepAxis::DRb, values: vec![] }), ..Default::default() };
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
        cfg.sweep = Some(SweepSection { axis: SweepAxis::DRb, values: vec![100.0, 100.0] });
        assert!(cfg.validate().is_err());
        cfg.sweep = Some(SweepSection { axis: SweepAxis::Kr, values: vec![2.0, 2.5] });
        assert!(cfg.validate().is_err());
        cfg.sweep = Some(SweepSection { axis: SweepAxis::Kr, values: vec![2.0, 3.0] });
        cfg.validate().unwrap();
    }

    #[test]
    fn threshold_below_zero_db_is_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.network.theta_db = 0.5f64.log10() * 10.0;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains(">= 1"), "{err}");
    }

    #[test]
    fn scheme_labels_round_trip_through_display() {
        for label in [
            "basic",
            "baseline/nosic-lower",
            "selection/nosic-upper",
            "feedback/sc-0.75",
            "feedback/sc-opt-relay",
            "basic/sc-opt-select",
        ] {
            assert_eq!(parse_scheme(label).unwrap().to_string(), label);
        }
        assert!(parse_scheme("relay").is_err());
        assert!(parse_scheme("basic/nosic-lower").is_err());
        assert!(parse_scheme("basic/sc-0.3").is_err());
    }

    #[test]
    fn beta_axis_overrides_fixed_splits_only() {
        let cfg = ExperimentConfig {
            schemes: vec!["basic/sc-0.6".into(), "feedback/sc-opt-relay".into()],
            ..Default::default()
        };
        let (_, s) = cfg.at(SweepAxis::Beta, 0.8).unwrap();
        assert_eq!(s[0].sc, ScMode::FixedBeta(0.8));
        assert_eq!(s[1].sc, ScMode::OptimalBetaRelay);
    }

    #[test]
    fn json_round_trip() {
        let cfg = ExperimentConfig {
            sweep: Some(SweepSection { axis: SweepAxis::Beamwidth, values: vec![30.0, 60.0] }),
            position: Some(PositionSection { d_ub: 210.0, theta_u: 0.1 }),
            ..Default::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }
}
