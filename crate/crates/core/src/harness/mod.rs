//! Experiment presets, their configuration and report emission.
//!
//! A configuration is a flat `key=value` record. Parsing starts from the
//! defaults of the chosen preset, so a file only needs the keys it changes,
//! and [`ExperimentConfig::to_record`] writes every key back out.

mod presets;
mod report;

pub use presets::run_preset;
pub use report::{emit, Check, ExperimentReport, Outcome, Table};

use sha2::{Digest, Sha256};

use crate::hits::SubsequenceKind;
use crate::measure::{check_hypotheses, BallSchedule, Center, CenterRule, HypothesisReport, MeasureModel, MeasureRule, Rounding};
use crate::orbit::MapKind;
use crate::record::Record;
use crate::{Error, Result};

pub const UNIT_CENTER: f64 = 0.707_106_781_186_547_6;
pub const TORUS_CENTER: (f64, f64) = (0.707_106_781_186_547_6, 0.577_215_664_901_532_9);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    Bv1,
    Bv2,
    Holder1,
    Holder2,
    Corollary,
    Correlation,
}

impl Preset {
    pub const ALL: [Preset; 6] = [Preset::Bv1, Preset::Bv2, Preset::Holder1, Preset::Holder2, Preset::Corollary, Preset::Correlation];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Bv1 => "bv1",
            Preset::Bv2 => "bv2",
            Preset::Holder1 => "holder1",
            Preset::Holder2 => "holder2",
            Preset::Corollary => "corollary",
            Preset::Correlation => "correlation",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset `{s}`")))
    }
}

/// Every knob of a preset run.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub map: MapKind,
    /// Target center; ignored by the corollary, whose targets sit at 0.
    pub center: Center,
    /// Explicit schedule overriding the one derived from the parameters.
    pub measure: Option<MeasureRule>,
    pub epsilon: f64,
    pub t: f64,
    pub c: f64,
    pub beta: f64,
    pub alpha: f64,
    pub m_lo: u64,
    pub max_m: u64,
    pub ensemble: usize,
    pub seed: u64,
    /// Seed payload bits; 0 picks the map's budgeting rule.
    pub bits: u64,
    pub subsequence: SubsequenceKind,
    pub block_lo: u64,
    pub block_hi: u64,
    /// Level of the second dyadic interval in the correlation preset.
    pub level: u32,
    pub max_lag: u64,
    pub out_dir: String,
    pub tol_y: f64,
    pub pass_fraction: f64,
    pub rel_tol: f64,
    pub slope_tol: f64,
    pub agree_tol: f64,
    pub max_indeterminate: f64,
    pub max_censored: f64,
    pub coverage: f64,
}

pub fn default_center(map: MapKind) -> Center {
    match map {
        MapKind::Cat => Center::Torus(TORUS_CENTER.0, TORUS_CENTER.1),
        _ => Center::Unit(UNIT_CENTER),
    }
}

impl ExperimentConfig {
    pub fn for_preset(preset: Preset) -> Self {
        let map = match preset {
            Preset::Bv1 | Preset::Bv2 => MapKind::Doubling,
            Preset::Holder1 | Preset::Holder2 | Preset::Correlation => MapKind::Cat,
            Preset::Corollary => MapKind::Gauss,
        };
        let mut cfg = ExperimentConfig {
            preset,
            map,
            center: default_center(map),
            measure: None,
            epsilon: 0.5,
            t: 0.5,
            c: 1.0,
            beta: 1.0,
            alpha: 1.0,
            m_lo: 2,
            max_m: 100_000,
            ensemble: 50,
            seed: 1,
            bits: 0,
            subsequence: SubsequenceKind::CeilPow,
            block_lo: 20,
            block_hi: 60,
            level: 6,
            max_lag: 12,
            out_dir: format!("out/{}", preset.name()),
            tol_y: 0.05,
            pass_fraction: 0.9,
            rel_tol: 0.2,
            slope_tol: 0.2,
            agree_tol: 0.02,
            max_indeterminate: 0.01,
            max_censored: 0.05,
            coverage: 0.75,
        };
        match preset {
            Preset::Bv1 => {
                cfg.epsilon = 1.0;
                cfg.ensemble = 100;
                cfg.subsequence = SubsequenceKind::Dyadic;
            }
            Preset::Bv2 => cfg.max_m = 1_000_000,
            Preset::Holder1 | Preset::Holder2 => {
                cfg.tol_y = 0.1;
                cfg.pass_fraction = 0.8;
            }
            Preset::Corollary => {
                cfg.ensemble = 100;
                cfg.rel_tol = 0.05;
            }
            Preset::Correlation => cfg.ensemble = 20_000,
        }
        cfg
    }

    /// The schedule rule in force: the explicit one, else the preset's.
    pub fn rule(&self) -> MeasureRule {
        self.measure.unwrap_or(match self.preset {
            Preset::Bv1 => MeasureRule::LogPower1 { eps: self.epsilon, c: self.c },
            Preset::Holder1 => MeasureRule::LogPower2 { eps: self.epsilon, c: self.c },
            Preset::Bv2 | Preset::Holder2 | Preset::Correlation => MeasureRule::Power { eps: self.epsilon },
            Preset::Corollary => MeasureRule::CfThreshold { t: self.t, rounding: Rounding::Floor },
        })
    }

    pub fn model(&self) -> MeasureModel {
        match self.map {
            MapKind::Doubling => MeasureModel::LebesgueUnit,
            MapKind::Gauss => MeasureModel::Gauss,
            MapKind::Cat => MeasureModel::LebesgueTorus,
        }
    }

    pub fn schedule(&self) -> Result<BallSchedule> {
        let centers = if self.preset == Preset::Corollary { CenterRule::LeftEndpointZero } else { CenterRule::Fixed(self.center) };
        BallSchedule::new(self.model(), centers, self.rule(), self.m_lo, self.max_m)
    }

    /// The `epsilon` of the lower-bound conditions the preset relies on.
    fn gate_epsilon(&self) -> f64 {
        match self.preset {
            Preset::Corollary => 1.0 - self.t,
            _ => self.epsilon,
        }
    }

    /// Hypothesis report over `[m_lo, max_m]` and whether the preset's
    /// theorem applies.
    pub fn gate(&self) -> Result<(HypothesisReport, bool)> {
        let report = check_hypotheses(&self.schedule()?, self.m_lo, self.max_m, self.gate_epsilon())?;
        let ok = match self.preset {
            Preset::Bv1 => report.bv1(),
            Preset::Bv2 => report.bv2(),
            Preset::Holder1 => report.holder1(),
            Preset::Holder2 => report.holder2(),
            Preset::Corollary => report.measure_nonincreasing.passed && report.lower_bound_power.passed,
            Preset::Correlation => true,
        };
        Ok((report, ok))
    }

    pub fn validate(&self) -> Result<()> {
        if self.ensemble == 0 {
            return Err(Error::Config("ensemble must be at least 1".into()));
        }
        if self.max_m < self.m_lo || self.m_lo == 0 {
            return Err(Error::Config(format!("need 1 <= m_lo <= max_m, got {} and {}", self.m_lo, self.max_m)));
        }
        if self.preset == Preset::Corollary && self.map != MapKind::Gauss {
            return Err(Error::Config("the corollary preset needs the gauss map".into()));
        }
        if self.preset != Preset::Corollary && self.model().is_torus() != matches!(self.center, Center::Torus(..)) {
            return Err(Error::Config(format!("center {} does not fit the {} map", self.center, self.map.name())));
        }
        if self.block_lo == 0 || self.block_lo > self.block_hi {
            return Err(Error::Config(format!("bad block range [{}, {}]", self.block_lo, self.block_hi)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) || !(self.beta > 0.0) {
            return Err(Error::Config(format!("need 0 < alpha <= 1 and beta > 0, got {} and {}", self.alpha, self.beta)));
        }
        self.schedule()?;
        Ok(())
    }

    pub fn to_record(&self) -> Record {
        let mut r = Record::new();
        r.push("preset", self.preset.name());
        r.push("map", self.map.name());
        r.push("center", self.center);
        r.push("measure", self.measure.map_or_else(|| "auto".to_string(), |m| rule_to_text(&m)));
        r.push("epsilon", self.epsilon);
        r.push("t", self.t);
        r.push("c", self.c);
        r.push("beta", self.beta);
        r.push("alpha", self.alpha);
        r.push("m_lo", self.m_lo);
        r.push("max_m", self.max_m);
        r.push("ensemble", self.ensemble);
        r.push("seed", self.seed);
        r.push("bits", self.bits);
        r.push("subsequence", self.subsequence.name());
        r.push("block_lo", self.block_lo);
        r.push("block_hi", self.block_hi);
        r.push("level", self.level);
        r.push("max_lag", self.max_lag);
        r.push("out_dir", &self.out_dir);
        r.push("tol_y", self.tol_y);
        r.push("pass_fraction", self.pass_fraction);
        r.push("rel_tol", self.rel_tol);
        r.push("slope_tol", self.slope_tol);
        r.push("agree_tol", self.agree_tol);
        r.push("max_indeterminate", self.max_indeterminate);
        r.push("max_censored", self.max_censored);
        r.push("coverage", self.coverage);
        r
    }

    /// Reads a record on top of the defaults of its `preset` (or of
    /// `fallback` when the record names none). Unknown keys are errors.
    pub fn from_record(rec: &Record, fallback: Preset) -> Result<Self> {
        let preset = rec.get("preset").map(Preset::from_name).transpose()?.unwrap_or(fallback);
        let mut cfg = Self::for_preset(preset);
        for key in rec.keys() {
            if !cfg.to_record().keys().any(|k| k == key) {
                return Err(Error::Config(format!("unknown key `{key}`")));
            }
        }
        if let Some(m) = rec.get("map") {
            cfg.map = MapKind::from_name(m)?;
            cfg.center = default_center(cfg.map);
        }
        if let Some(c) = rec.get("center") {
            cfg.center = Center::parse(c)?;
        }
        if let Some(m) = rec.get("measure") {
            cfg.measure = if m == "auto" { None } else { Some(rule_from_text(m)?) };
        }
        cfg.epsilon = rec.parse_or("epsilon", cfg.epsilon)?;
        cfg.t = rec.parse_or("t", cfg.t)?;
        cfg.c = rec.parse_or("c", cfg.c)?;
        cfg.beta = rec.parse_or("beta", cfg.beta)?;
        cfg.alpha = rec.parse_or("alpha", cfg.alpha)?;
        cfg.m_lo = rec.parse_or("m_lo", cfg.m_lo)?;
        cfg.max_m = rec.parse_or("max_m", cfg.max_m)?;
        cfg.ensemble = rec.parse_or("ensemble", cfg.ensemble)?;
        cfg.seed = rec.parse_or("seed", cfg.seed)?;
        cfg.bits = rec.parse_or("bits", cfg.bits)?;
        if let Some(s) = rec.get("subsequence") {
            cfg.subsequence = SubsequenceKind::from_name(s)?;
        }
        cfg.block_lo = rec.parse_or("block_lo", cfg.block_lo)?;
        cfg.block_hi = rec.parse_or("block_hi", cfg.block_hi)?;
        cfg.level = rec.parse_or("level", cfg.level)?;
        cfg.max_lag = rec.parse_or("max_lag", cfg.max_lag)?;
        if let Some(d) = rec.get("out_dir") {
            cfg.out_dir = d.to_string();
        }
        cfg.tol_y = rec.parse_or("tol_y", cfg.tol_y)?;
        cfg.pass_fraction = rec.parse_or("pass_fraction", cfg.pass_fraction)?;
        cfg.rel_tol = rec.parse_or("rel_tol", cfg.rel_tol)?;
        cfg.slope_tol = rec.parse_or("slope_tol", cfg.slope_tol)?;
        cfg.agree_tol = rec.parse_or("agree_tol", cfg.agree_tol)?;
        cfg.max_indeterminate = rec.parse_or("max_indeterminate", cfg.max_indeterminate)?;
        cfg.max_censored = rec.parse_or("max_censored", cfg.max_censored)?;
        cfg.coverage = rec.parse_or("coverage", cfg.coverage)?;
        Ok(cfg)
    }

    /// SHA-256 of the serialized configuration.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_record().to_text().as_bytes()))
    }
}

/// `kind:arg:arg`, e.g. `reciprocal:0.5`, `logpower1:1:1` (epsilon, c) or
/// `cf-threshold:0.5:floor`.
pub fn rule_to_text(rule: &MeasureRule) -> String {
    match *rule {
        MeasureRule::Constant { value } => format!("constant:{value}"),
        MeasureRule::Reciprocal { c } => format!("reciprocal:{c}"),
        MeasureRule::Power { eps } => format!("power:{eps}"),
        MeasureRule::LogPower1 { eps, c } => format!("logpower1:{eps}:{c}"),
        MeasureRule::LogPower2 { eps, c } => format!("logpower2:{eps}:{c}"),
        MeasureRule::CfThreshold { t, rounding } => format!("cf-threshold:{t}:{}", rounding.name()),
    }
}

pub fn rule_from_text(text: &str) -> Result<MeasureRule> {
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    let num = |i: usize, default: Option<f64>| -> Result<f64> {
        match parts.get(i) {
            Some(s) => s.parse().map_err(|_| Error::Config(format!("bad number `{s}` in `{text}`"))),
            None => default.ok_or_else(|| Error::Config(format!("`{text}` lacks argument {i}"))),
        }
    };
    let rule = match parts[0] {
        "constant" => MeasureRule::Constant { value: num(1, None)? },
        "reciprocal" => MeasureRule::Reciprocal { c: num(1, Some(1.0))? },
        "power" => MeasureRule::Power { eps: num(1, None)? },
        "logpower1" => MeasureRule::LogPower1 { eps: num(1, None)?, c: num(2, Some(1.0))? },
        "logpower2" => MeasureRule::LogPower2 { eps: num(1, None)?, c: num(2, Some(1.0))? },
        "cf-threshold" => MeasureRule::CfThreshold {
            t: num(1, None)?,
            rounding: Rounding::from_name(parts.get(2).copied().unwrap_or("floor"))?,
        },
        other => return Err(Error::Config(format!("unknown schedule `{other}`"))),
    };
    let max_args = match rule {
        MeasureRule::LogPower1 { .. } | MeasureRule::LogPower2 { .. } | MeasureRule::CfThreshold { .. } => 3,
        _ => 2,
    };
    if parts.len() > max_args {
        return Err(Error::Config(format!("too many arguments in `{text}`")));
    }
    Ok(rule)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips() {
        for p in Preset::ALL {
            let mut cfg = ExperimentConfig::for_preset(p);
            cfg.validate().unwrap();
            assert_eq!(ExperimentConfig::from_record(&cfg.to_record(), Preset::Bv1).unwrap(), cfg);
            cfg.measure = Some(MeasureRule::Reciprocal { c: 0.5 });
            cfg.tol_y = 0.123;
            let text = cfg.to_record().to_text();
            let back = ExperimentConfig::from_record(&Record::from_text(&text).unwrap(), Preset::Bv1).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.hash(), cfg.hash());
        }
    }

    #[test]
    fn partial_records_use_preset_defaults() {
        let rec = Record::from_text("preset=holder2\nmax_m=500\n").unwrap();
        let cfg = ExperimentConfig::from_record(&rec, Preset::Bv1).unwrap();
        assert_eq!(cfg.map, MapKind::Cat);
        assert_eq!(cfg.max_m, 500);
        assert!(ExperimentConfig::from_record(&Record::from_text("bogus=1").unwrap(), Preset::Bv1).is_err());
        let rec = Record::from_text("map=cat").unwrap();
        let cfg = ExperimentConfig::from_record(&rec, Preset::Bv2).unwrap();
        assert!(matches!(cfg.center, Center::Torus(..)));
    }

    #[test]
    fn rule_text() {
        for text in ["constant:0.25", "reciprocal:0.5", "power:0.5", "logpower1:1:1", "logpower2:0.5:2", "cf-threshold:0.5:ceil"] {
            assert_eq!(rule_to_text(&rule_from_text(text).unwrap()), text);
        }
        assert!(rule_from_text("power").is_err());
        assert!(rule_from_text("power:0.5:1").is_err());
        assert!(rule_from_text("cubic:1").is_err());
    }

    #[test]
    fn gates() {
        for p in Preset::ALL {
            let mut cfg = ExperimentConfig::for_preset(p);
            cfg.max_m = 10_000;
            assert!(cfg.gate().unwrap().1, "{}", p.name());
        }
        let mut cfg = ExperimentConfig::for_preset(Preset::Bv1);
        cfg.measure = Some(MeasureRule::Reciprocal { c: 0.5 });
        assert!(!cfg.gate().unwrap().1);
    }
}
