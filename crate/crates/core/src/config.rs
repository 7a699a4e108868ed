//! Run configuration in TOML.
//!
//! Top-level keys pick the experiment and its Monte Carlo settings; the
//! `[scenario]`, `[qos]`, `[cmt]`, `[ts]` and `[sweep]` tables override the
//! defaults of that experiment key by key. Unknown keys are rejected.
//!
//! ```toml
//! experiment = "case_a"
//! seed = 7
//! n_setups = 100
//!
//! [sweep]
//! gamma_db = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0]
//!
//! [scenario]
//! service_radius = 150.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{IsacError, Result};
use crate::experiments::{CaseA, CaseB};
use crate::metrics::QosTargets;
use crate::scene::ScenarioSpec;
use crate::techniques::{CmtOptions, CmtScheme, TsOptions, TsScheme};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Infeasibility versus SINR target in a coordinated cellular network.
    #[default]
    CaseA,
    /// Energy versus antenna count in a distributed antenna network.
    CaseB,
    /// A single technique on one random setup.
    Demo,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    Cmt,
    Ia,
    #[default]
    Hdbf,
    Ts,
    Sa,
}

impl Technique {
    pub fn name(self) -> &'static str {
        match self {
            Technique::Cmt => "cmt",
            Technique::Ia => "ia",
            Technique::Hdbf => "hdbf",
            Technique::Ts => "ts",
            Technique::Sa => "sa",
        }
    }
}

impl std::str::FromStr for Technique {
    type Err = IsacError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "cmt" => Technique::Cmt,
            "ia" => Technique::Ia,
            "hdbf" => Technique::Hdbf,
            "ts" => Technique::Ts,
            "sa" => Technique::Sa,
            _ => return Err(field("demo.technique", format!("unknown technique `{s}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    /// SINR targets of case A in dB.
    pub gamma_db: Vec<f64>,
    /// Total antenna counts of case B.
    pub antennas: Vec<usize>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            gamma_db: (0..8).map(|i| 2.0 * i as f64).collect(),
            antennas: vec![8, 12, 16, 20],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemoSpec {
    pub technique: Technique,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    /// Master seed; every setup seed is derived from it.
    pub seed: u64,
    pub n_setups: usize,
    pub out_dir: PathBuf,
    /// Schemes to report, by name; empty means all schemes of the experiment.
    pub schemes: Vec<String>,
    /// Case-B RRHs sit evenly on a circle of this radius, as a fraction of
    /// the service radius; a negative value draws them at random.
    pub rrh_ring: f64,
    pub sweep: SweepGrid,
    pub scenario: ScenarioSpec,
    pub qos: QosTargets,
    pub cmt: CmtOptions,
    pub ts: TsOptions,
    pub demo: DemoSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::defaults(ExperimentKind::CaseA)
    }
}

fn field(name: &str, message: impl Into<String>) -> IsacError {
    IsacError::ConfigField { field: name.into(), message: message.into() }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn parse_error(text: &str, e: toml::de::Error) -> IsacError {
    let line = e.span().map_or(0, |s| line_of(text, s.start));
    IsacError::ConfigParse { line, message: e.message().to_string() }
}

/// Overlays `over` onto `base`, recursing into tables.
fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl RunConfig {
    /// Documented defaults of one experiment.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let b = CaseB::default();
        let (scenario, qos) = match kind {
            ExperimentKind::CaseB => (b.scenario, b.qos),
            _ => (ScenarioSpec::default(), QosTargets::default()),
        };
        Self {
            experiment: kind,
            seed: 1,
            n_setups: if kind == ExperimentKind::CaseB { 50 } else { 100 },
            out_dir: PathBuf::from("results"),
            schemes: Vec::new(),
            rrh_ring: b.rrh_ring.unwrap_or(-1.0),
            sweep: SweepGrid::default(),
            scenario,
            qos,
            cmt: CmtOptions::default(),
            ts: TsOptions::default(),
            demo: DemoSpec::default(),
        }
    }

    /// Parses and validates a configuration. Keys absent from `text` take
    /// the defaults of the selected experiment.
    pub fn from_toml(text: &str) -> Result<Self> {
        // Schema pass: syntax errors, unknown keys and type errors with lines.
        let first: RunConfig = toml::from_str(text).map_err(|e| parse_error(text, e))?;
        let user: toml::Value = toml::from_str(text).map_err(|e| parse_error(text, e))?;
        let mut merged = toml::Value::try_from(Self::defaults(first.experiment))
            .map_err(|e| IsacError::ConfigParse { line: 0, message: e.to_string() })?;
        merge(&mut merged, user);
        let cfg: RunConfig = merged.try_into().map_err(|e: toml::de::Error| IsacError::ConfigParse { line: 0, message: e.message().to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Every field written out explicitly.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| field("config", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_setups == 0 {
            return Err(field("n_setups", "must be at least 1"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(field("seed", "must fit in a signed 64-bit integer"));
        }
        self.scenario.validate()?;
        self.qos.validate()?;
        match self.experiment {
            ExperimentKind::CaseA => {
                crate::experiments::check_grid("sweep.gamma_db", &self.sweep.gamma_db)?;
                self.cmt_schemes()?;
            }
            ExperimentKind::CaseB => {
                let grid: Vec<f64> = self.sweep.antennas.iter().map(|&n| n as f64).collect();
                crate::experiments::check_grid("sweep.antennas", &grid)?;
                if self.qos.rate_min.is_none() {
                    return Err(field("qos.rate_min", "case B needs a rate target"));
                }
                let nb = self.scenario.n_bs;
                if let Some(n) = self.sweep.antennas.iter().find(|&&n| nb == 0 || n % nb != 0) {
                    return Err(field("sweep.antennas", format!("{n} antennas cannot be split evenly over {nb} RRHs")));
                }
                if self.rrh_ring > 1.0 || !self.rrh_ring.is_finite() {
                    return Err(field("rrh_ring", "must be at most 1 (negative for random placement)"));
                }
                self.ts_schemes()?;
            }
            ExperimentKind::Demo => {}
        }
        Ok(())
    }

    pub fn cmt_schemes(&self) -> Result<Vec<CmtScheme>> {
        if self.schemes.is_empty() {
            return Ok(CmtScheme::ALL.to_vec());
        }
        self.schemes
            .iter()
            .map(|s| CmtScheme::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| field("schemes", format!("unknown case-A scheme `{s}`"))))
            .collect()
    }

    pub fn ts_schemes(&self) -> Result<Vec<TsScheme>> {
        if self.schemes.is_empty() {
            return Ok(TsScheme::ALL.to_vec());
        }
        self.schemes
            .iter()
            .map(|s| TsScheme::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| field("schemes", format!("unknown case-B scheme `{s}`"))))
            .collect()
    }

    pub fn case_a(&self) -> CaseA {
        CaseA { scenario: self.scenario.clone(), qos: self.qos.clone(), opts: self.cmt.clone() }
    }

    pub fn case_b(&self) -> CaseB {
        CaseB {
            scenario: self.scenario.clone(),
            qos: self.qos.clone(),
            opts: self.ts.clone(),
            rrh_ring: (self.rrh_ring >= 0.0).then_some(self.rrh_ring),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_case_a_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::defaults(ExperimentKind::CaseA));
    }

    #[test]
    fn case_b_tables_fill_from_case_b_defaults() {
        let c = RunConfig::from_toml("experiment = \"case_b\"\n[scenario]\nservice_radius = 200.0\n").unwrap();
        let d = RunConfig::defaults(ExperimentKind::CaseB);
        assert_eq!(c.scenario.service_radius, 200.0);
        assert_eq!(c.scenario.n_cu, d.scenario.n_cu);
        assert_eq!(c.qos, d.qos);
    }

    #[test]
    fn errors_name_line_and_field() {
        match RunConfig::from_toml("seed = 3\n\n[scenario]\nbogus = 1\n") {
            Err(IsacError::ConfigParse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        match RunConfig::from_toml("[scenario]\nservice_radius = -5.0\n") {
            Err(IsacError::ConfigField { field, .. }) => assert_eq!(field, "service_radius"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(RunConfig::from_toml("n_setups = 0"), Err(IsacError::ConfigField { .. })));
        assert!(matches!(RunConfig::from_toml("[sweep]\ngamma_db = [2.0, 1.0]"), Err(IsacError::ConfigField { .. })));
    }

    #[test]
    fn round_trip() {
        for kind in [ExperimentKind::CaseA, ExperimentKind::CaseB, ExperimentKind::Demo] {
            let c = RunConfig::defaults(kind);
            assert_eq!(RunConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
        }
    }
}
