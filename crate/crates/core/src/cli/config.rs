//! Plain-text `dotted.key = value` configuration.
//!
//! Files are lexed as TOML and flattened into dotted keys, so both
//! `filter.gamma = 0.01` and a `[filter]` table with `gamma = 0.01` work.
//! Unknown keys are rejected. Every key not given keeps its default.

use std::path::Path;

use nalgebra::Matrix2;
use thiserror::Error;
use toml::{Table, Value};

use crate::filters::{AdaptiveConfig, FilterKind, HinfConfig, NoiseConfig};
use crate::ident::{PolyFitOptions, DEFAULT_COV0};
use crate::model::{OcvCurve, TheveninParams};
use crate::pipeline::{ReferenceMode, RunConfig};
use crate::sim::{CycleKind, DriveCycleSpec, NoiseSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {msg}")]
    Read { path: String, msg: String },
    #[error("config syntax error: {0}")]
    Syntax(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {msg}")]
    InvalidValue { key: String, msg: String },
}

fn invalid(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_string(),
        msg: msg.into(),
    }
}

/// Rint-based OCV extraction and polynomial fitting settings.
#[derive(Debug, Clone, PartialEq)]
pub struct OcvFitConfig {
    pub lambda: f64,
    pub ocv_init: f64,
    pub r0_init: f64,
    pub cov0: f64,
    /// SOC at the start of the input file.
    pub soc_init: f64,
    pub poly: PolyFitOptions,
}

impl Default for OcvFitConfig {
    fn default() -> Self {
        Self {
            lambda: 0.996,
            ocv_init: 4.0,
            r0_init: 0.01,
            cov0: DEFAULT_COV0,
            soc_init: 1.0,
            poly: PolyFitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub soc_init: f64,
    pub params: TheveninParams,
    pub cycle: DriveCycleSpec,
    pub noise: NoiseSpec,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            soc_init: 0.9,
            params: TheveninParams::default(),
            cycle: DriveCycleSpec::default(),
            noise: NoiseSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub run: RunConfig,
    pub ocv_band: (f64, f64),
    pub ocv_fit: OcvFitConfig,
    pub sim: SimConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            run: RunConfig::default(),
            ocv_band: (1.0, 5.5),
            ocv_fit: OcvFitConfig::default(),
            sim: SimConfig::default(),
        }
    }
}

/// Every accepted key, in the order the reference documents them.
pub const KEYS: &[&str] = &[
    "battery.capacity_ah",
    "battery.coulombic_efficiency",
    "battery.v_max",
    "battery.v_min",
    "battery.dt_s",
    "ocv.coeffs",
    "ocv.band_min_v",
    "ocv.band_max_v",
    "params.r0_ohm",
    "params.rp_ohm",
    "params.cp_f",
    "filter.soc_init",
    "filter.up_init",
    "filter.rx",
    "filter.qx",
    "filter.p0",
    "filter.sx",
    "filter.lx",
    "filter.gamma",
    "filter.window_len",
    "filter.b",
    "ident.enabled",
    "ident.lambda",
    "ident.warmup_steps",
    "ident.cov0",
    "ident.theta0",
    "run.filters",
    "run.reference_mode",
    "run.reference_soc_init",
    "ocv_fit.lambda",
    "ocv_fit.ocv_init",
    "ocv_fit.r0_init",
    "ocv_fit.cov0",
    "ocv_fit.soc_init",
    "ocv_fit.fit_lambda",
    "ocv_fit.fit_cov0",
    "ocv_fit.min_soc_range",
    "ocv_fit.max_condition",
    "sim.soc_init",
    "sim.r0_ohm",
    "sim.rp_ohm",
    "sim.cp_f",
    "cycle.kind",
    "cycle.duration_s",
    "cycle.peak_a",
    "cycle.repeat_period_s",
    "cycle.segments",
    "noise.v_sigma",
    "noise.i_sigma",
    "noise.seed",
];

fn flatten(prefix: &str, table: &Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64, ConfigError> {
    let x = match v {
        Value::Float(f) => *f,
        Value::Integer(i) => *i as f64,
        _ => return Err(invalid(key, "expected a number")),
    };
    if !x.is_finite() {
        return Err(invalid(key, "expected a finite number"));
    }
    Ok(x)
}

fn as_u64(key: &str, v: &Value) -> Result<u64, ConfigError> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(invalid(key, "expected a non-negative integer")),
    }
}

fn as_bool(key: &str, v: &Value) -> Result<bool, ConfigError> {
    v.as_bool()
        .ok_or_else(|| invalid(key, "expected true or false"))
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str, ConfigError> {
    v.as_str()
        .ok_or_else(|| invalid(key, "expected a quoted string"))
}

fn as_vec(key: &str, v: &Value) -> Result<Vec<f64>, ConfigError> {
    let arr = v
        .as_array()
        .ok_or_else(|| invalid(key, "expected an array"))?;
    arr.iter().map(|x| as_f64(key, x)).collect()
}

fn as_array<const N: usize>(key: &str, v: &Value) -> Result<[f64; N], ConfigError> {
    let vec = as_vec(key, v)?;
    vec.try_into()
        .map_err(|v: Vec<f64>| invalid(key, format!("expected {N} numbers, got {}", v.len())))
}

/// Two numbers form a diagonal, four a row-major 2x2 matrix.
fn as_mat2(key: &str, v: &Value) -> Result<Matrix2<f64>, ConfigError> {
    let vec = as_vec(key, v)?;
    match vec.as_slice() {
        [a, d] => Ok(Matrix2::new(*a, 0.0, 0.0, *d)),
        [a, b, c, d] => Ok(Matrix2::new(*a, *b, *c, *d)),
        _ => Err(invalid(
            key,
            "expected 2 (diagonal) or 4 (row-major) numbers",
        )),
    }
}

fn parse_kinds(key: &str, v: &Value) -> Result<Vec<FilterKind>, ConfigError> {
    let names: Vec<&str> = match v {
        Value::String(s) => vec![s.as_str()],
        Value::Array(a) => a.iter().map(|x| as_str(key, x)).collect::<Result<_, _>>()?,
        _ => return Err(invalid(key, "expected a filter name or an array of names")),
    };
    let mut kinds = Vec::new();
    for name in names {
        if name.eq_ignore_ascii_case("all") {
            kinds.extend(FilterKind::ALL);
        } else {
            kinds.push(name.parse().map_err(|_| {
                invalid(
                    key,
                    format!("unknown filter `{name}` (ekf|hiekf|ahiekf|iahiekf|all)"),
                )
            })?);
        }
    }
    kinds.sort();
    kinds.dedup();
    Ok(kinds)
}

impl Config {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Loads `path` when given, defaults otherwise.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        match path {
            Some(p) => Self::from_path(p),
            None => Ok(Self::default()),
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        let mut entries = Vec::new();
        flatten("", &table, &mut entries);
        let mut cfg = Self::default();
        for (key, value) in &entries {
            cfg.apply(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key from its textual value (`"0.01"`, `"[1e-5, 1e-5]"`, `"\"dst\""`).
    /// Bare words are accepted for string-valued keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let parsed: Result<Table, _> = format!("v = {value}").parse();
        let v = match parsed {
            Ok(mut t) => t.remove("v").expect("key present"),
            Err(_) => Value::String(value.trim().to_string()),
        };
        let mut next = self.clone();
        next.apply(key, &v)?;
        next.validate()?;
        *self = next;
        Ok(())
    }

    fn apply(&mut self, key: &str, v: &Value) -> Result<(), ConfigError> {
        let run = &mut self.run;
        match key {
            "battery.capacity_ah" => run.spec.capacity_as = as_f64(key, v)? * 3600.0,
            "battery.coulombic_efficiency" => run.spec.coulombic_efficiency = as_f64(key, v)?,
            "battery.v_max" => run.spec.v_max = as_f64(key, v)?,
            "battery.v_min" => run.spec.v_min = as_f64(key, v)?,
            "battery.dt_s" => run.spec.dt_s = as_f64(key, v)?,
            "ocv.coeffs" => {
                run.curve = OcvCurve {
                    coeffs: as_array::<7>(key, v)?,
                }
            }
            "ocv.band_min_v" => self.ocv_band.0 = as_f64(key, v)?,
            "ocv.band_max_v" => self.ocv_band.1 = as_f64(key, v)?,
            "params.r0_ohm" => run.initial_params.r0_ohm = as_f64(key, v)?,
            "params.rp_ohm" => run.initial_params.rp_ohm = as_f64(key, v)?,
            "params.cp_f" => run.initial_params.cp_f = as_f64(key, v)?,
            "filter.soc_init" => run.soc_init_estimator = as_f64(key, v)?,
            "filter.up_init" => run.up_init_estimator = as_f64(key, v)?,
            "filter.rx" => run.noise.rx = as_f64(key, v)?,
            "filter.qx" => run.noise.qx = as_mat2(key, v)?,
            "filter.p0" => run.noise.p0 = as_mat2(key, v)?,
            "filter.sx" => run.hinf.sx = as_mat2(key, v)?,
            "filter.lx" => run.hinf.lx = as_mat2(key, v)?,
            "filter.gamma" => run.hinf.gamma = as_f64(key, v)?,
            "filter.window_len" => run.adaptive.window_len = as_u64(key, v)? as usize,
            "filter.b" => run.adaptive.b = as_f64(key, v)?,
            "ident.enabled" => {
                if !as_bool(key, v)? {
                    run.ident_warmup_steps = u64::MAX;
                }
            }
            "ident.lambda" => run.ident_lambda = as_f64(key, v)?,
            "ident.warmup_steps" => run.ident_warmup_steps = as_u64(key, v)?,
            "ident.cov0" => run.ident_cov0 = as_f64(key, v)?,
            "ident.theta0" => run.ident_theta0 = Some(as_array::<3>(key, v)?),
            "run.filters" => run.kinds = parse_kinds(key, v)?,
            "run.reference_mode" => {
                run.reference_mode = match as_str(key, v)? {
                    "sim_truth" => ReferenceMode::SimTruth,
                    "provided" => ReferenceMode::ProvidedColumn,
                    "coulomb" => ReferenceMode::CoulombFromTrueInit,
                    other => {
                        return Err(invalid(
                            key,
                            format!("unknown mode `{other}` (sim_truth|provided|coulomb)"),
                        ))
                    }
                }
            }
            "run.reference_soc_init" => run.reference_soc_init = Some(as_f64(key, v)?),
            "ocv_fit.lambda" => self.ocv_fit.lambda = as_f64(key, v)?,
            "ocv_fit.ocv_init" => self.ocv_fit.ocv_init = as_f64(key, v)?,
            "ocv_fit.r0_init" => self.ocv_fit.r0_init = as_f64(key, v)?,
            "ocv_fit.cov0" => self.ocv_fit.cov0 = as_f64(key, v)?,
            "ocv_fit.soc_init" => self.ocv_fit.soc_init = as_f64(key, v)?,
            "ocv_fit.fit_lambda" => self.ocv_fit.poly.lambda = as_f64(key, v)?,
            "ocv_fit.fit_cov0" => self.ocv_fit.poly.cov0 = as_f64(key, v)?,
            "ocv_fit.min_soc_range" => self.ocv_fit.poly.min_soc_range = as_f64(key, v)?,
            "ocv_fit.max_condition" => self.ocv_fit.poly.max_condition = as_f64(key, v)?,
            "sim.soc_init" => self.sim.soc_init = as_f64(key, v)?,
            "sim.r0_ohm" => self.sim.params.r0_ohm = as_f64(key, v)?,
            "sim.rp_ohm" => self.sim.params.rp_ohm = as_f64(key, v)?,
            "sim.cp_f" => self.sim.params.cp_f = as_f64(key, v)?,
            "cycle.kind" => {
                self.sim.cycle.kind = match as_str(key, v)? {
                    "dst" => CycleKind::DstLike,
                    "fuds" => CycleKind::FudsLike,
                    "constant" => CycleKind::ConstantCurrent,
                    "custom" => CycleKind::Custom,
                    other => {
                        return Err(invalid(
                            key,
                            format!("unknown cycle `{other}` (dst|fuds|constant|custom)"),
                        ))
                    }
                }
            }
            "cycle.duration_s" => self.sim.cycle.duration_s = as_f64(key, v)?,
            "cycle.peak_a" => self.sim.cycle.peak_a = as_f64(key, v)?,
            "cycle.repeat_period_s" => self.sim.cycle.repeat_period_s = as_f64(key, v)?,
            "cycle.segments" => {
                let arr = v
                    .as_array()
                    .ok_or_else(|| invalid(key, "expected an array of [duration_s, current_a]"))?;
                self.sim.cycle.segments = arr
                    .iter()
                    .map(|seg| as_array::<2>(key, seg).map(|[d, i]| (d, i)))
                    .collect::<Result<_, _>>()?;
            }
            "noise.v_sigma" => self.sim.noise.v_sigma = as_f64(key, v)?,
            "noise.i_sigma" => self.sim.noise.i_sigma = as_f64(key, v)?,
            "noise.seed" => self.sim.noise.seed = as_u64(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Checks every value before any computation starts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let run = &self.run;
        let positive = |key: &str, x: f64| {
            if x > 0.0 {
                Ok(())
            } else {
                Err(invalid(key, "must be positive"))
            }
        };
        let unit = |key: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(invalid(key, "must lie in [0, 1]"))
            }
        };
        let lambda = |key: &str, x: f64| {
            if x > 0.0 && x <= 1.0 {
                Ok(())
            } else {
                Err(invalid(key, "must lie in (0, 1]"))
            }
        };

        positive("battery.capacity_ah", run.spec.capacity_as)?;
        if !(run.spec.coulombic_efficiency > 0.0 && run.spec.coulombic_efficiency <= 1.0) {
            return Err(invalid(
                "battery.coulombic_efficiency",
                "must lie in (0, 1]",
            ));
        }
        if run.spec.v_min >= run.spec.v_max {
            return Err(invalid("battery.v_min", "must be below battery.v_max"));
        }
        positive("battery.dt_s", run.spec.dt_s)?;

        if self.ocv_band.0 >= self.ocv_band.1 {
            return Err(invalid("ocv.band_min_v", "must be below ocv.band_max_v"));
        }
        run.curve
            .check_band(self.ocv_band.0, self.ocv_band.1)
            .map_err(|e| invalid("ocv.coeffs", e.to_string()))?;

        positive("params.r0_ohm", run.initial_params.r0_ohm)?;
        positive("params.rp_ohm", run.initial_params.rp_ohm)?;
        positive("params.cp_f", run.initial_params.cp_f)?;

        unit("filter.soc_init", run.soc_init_estimator)?;
        let probe =
            |key: &str, n: NoiseConfig| n.validate().map_err(|e| invalid(key, e.to_string()));
        probe(
            "filter.rx",
            NoiseConfig {
                qx: Matrix2::zeros(),
                p0: Matrix2::identity(),
                ..run.noise
            },
        )?;
        probe(
            "filter.qx",
            NoiseConfig {
                rx: 1.0,
                p0: Matrix2::identity(),
                ..run.noise
            },
        )?;
        probe("filter.p0", run.noise)?;
        HinfConfig {
            gamma: 0.0,
            ..run.hinf
        }
        .validate()
        .map_err(|e| invalid("filter.sx", e.to_string()))?;
        if !(run.hinf.gamma >= 0.0) {
            return Err(invalid("filter.gamma", "must be non-negative"));
        }
        if run.adaptive.window_len < 1 {
            return Err(invalid("filter.window_len", "must be at least 1"));
        }
        AdaptiveConfig {
            window_len: 1,
            ..run.adaptive
        }
        .validate()
        .map_err(|e| invalid("filter.b", e.to_string()))?;

        lambda("ident.lambda", run.ident_lambda)?;
        positive("ident.cov0", run.ident_cov0)?;
        if run.kinds.is_empty() {
            return Err(invalid("run.filters", "select at least one filter"));
        }
        if let Some(s) = run.reference_soc_init {
            unit("run.reference_soc_init", s)?;
        }

        lambda("ocv_fit.lambda", self.ocv_fit.lambda)?;
        positive("ocv_fit.cov0", self.ocv_fit.cov0)?;
        positive("ocv_fit.r0_init", self.ocv_fit.r0_init)?;
        unit("ocv_fit.soc_init", self.ocv_fit.soc_init)?;
        lambda("ocv_fit.fit_lambda", self.ocv_fit.poly.lambda)?;
        positive("ocv_fit.fit_cov0", self.ocv_fit.poly.cov0)?;
        positive("ocv_fit.max_condition", self.ocv_fit.poly.max_condition)?;

        unit("sim.soc_init", self.sim.soc_init)?;
        positive("sim.r0_ohm", self.sim.params.r0_ohm)?;
        positive("sim.rp_ohm", self.sim.params.rp_ohm)?;
        positive("sim.cp_f", self.sim.params.cp_f)?;
        positive("cycle.duration_s", self.sim.cycle.duration_s)?;
        if !(self.sim.cycle.peak_a >= 0.0) {
            return Err(invalid("cycle.peak_a", "must be non-negative"));
        }
        positive("cycle.repeat_period_s", self.sim.cycle.repeat_period_s)?;
        if self.sim.cycle.kind == CycleKind::Custom {
            self.sim
                .cycle
                .validate()
                .map_err(|e| invalid("cycle.segments", e.to_string()))?;
        }
        if !(self.sim.noise.v_sigma >= 0.0) {
            return Err(invalid("noise.v_sigma", "must be non-negative"));
        }
        if !(self.sim.noise.i_sigma >= 0.0) {
            return Err(invalid("noise.i_sigma", "must be non-negative"));
        }
        // the library validators are the final word
        run.validate().map_err(|e| invalid("run", e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let cfg = Config::parse("").unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!(cfg.run.noise.rx, 0.8);
        assert_eq!(cfg.run.hinf.gamma, 0.005);
        assert_eq!(cfg.run.adaptive.window_len, 5);
        assert_eq!(cfg.run.adaptive.b, 0.96);
        assert_eq!(cfg.run.soc_init_estimator, 0.8);
        assert_eq!(cfg.run.ident_lambda, 0.999);
        assert_eq!(cfg.ocv_fit.lambda, 0.996);
        assert_eq!(cfg.ocv_fit.ocv_init, 4.0);
        assert_eq!(cfg.run.curve.coeffs, crate::model::DEFAULT_OCV_COEFFS);
    }

    #[test]
    fn dotted_and_table_forms_agree() {
        let a = Config::parse("filter.gamma = 0.01\nfilter.qx = [1e-6, 2e-6]\n").unwrap();
        let b = Config::parse("[filter]\ngamma = 0.01\nqx = [1e-6, 0, 0, 2e-6]\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.run.hinf.gamma, 0.01);
        assert_eq!(a.run.noise.qx, Matrix2::new(1e-6, 0.0, 0.0, 2e-6));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = Config::parse("filterz.gamma = 0.005").unwrap_err();
        assert_eq!(err, ConfigError::UnknownKey("filterz.gamma".into()));
        assert!(err.to_string().contains("filterz.gamma"));
    }

    #[test]
    fn invalid_values_are_named() {
        let cases = [
            ("filter.rx = -1", "filter.rx"),
            ("filter.b = 0.5", "filter.b"),
            ("filter.p0 = [1, 2, 2, 1]", "filter.p0"),
            ("battery.v_min = 5.0", "battery.v_min"),
            ("run.filters = [\"ukf\"]", "run.filters"),
            ("ocv.coeffs = [1, 2, 3]", "ocv.coeffs"),
            ("ocv.coeffs = [0, 0, 0, 0, 0, 0, 9]", "ocv.coeffs"),
            ("cycle.kind = \"wltp\"", "cycle.kind"),
            ("noise.seed = -4", "noise.seed"),
            ("ident.lambda = 0", "ident.lambda"),
            ("filter.window_len = 0", "filter.window_len"),
        ];
        for (text, key) in cases {
            match Config::parse(text) {
                Err(ConfigError::InvalidValue { key: k, .. }) => assert_eq!(k, key, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(matches!(
            Config::parse("filter.gamma = "),
            Err(ConfigError::Syntax(_))
        ));
    }

    #[test]
    fn filters_and_modes() {
        let cfg = Config::parse(
            "run.filters = [\"iahiekf\", \"ekf\"]\nrun.reference_mode = \"coulomb\"\nrun.reference_soc_init = 0.9",
        )
        .unwrap();
        assert_eq!(cfg.run.kinds, vec![FilterKind::Ekf, FilterKind::Iahiekf]);
        assert_eq!(cfg.run.reference_mode, ReferenceMode::CoulombFromTrueInit);
        let all = Config::parse("run.filters = \"all\"").unwrap();
        assert_eq!(all.run.kinds, FilterKind::ALL.to_vec());
        let off = Config::parse("ident.enabled = false").unwrap();
        assert_eq!(off.run.ident_warmup_steps, u64::MAX);
    }

    #[test]
    fn cycle_segments() {
        let cfg = Config::parse("cycle.kind = \"custom\"\ncycle.segments = [[10, 1.5], [5, -0.5]]")
            .unwrap();
        assert_eq!(cfg.sim.cycle.segments, vec![(10.0, 1.5), (5.0, -0.5)]);
        assert!(Config::parse("cycle.kind = \"custom\"").is_err());
    }

    #[test]
    fn set_single_keys() {
        let mut cfg = Config::default();
        cfg.set("filter.gamma", "0.02").unwrap();
        cfg.set("cycle.kind", "fuds").unwrap();
        cfg.set("run.filters", "[\"ekf\"]").unwrap();
        assert_eq!(cfg.run.hinf.gamma, 0.02);
        assert_eq!(cfg.sim.cycle.kind, CycleKind::FudsLike);
        assert_eq!(cfg.run.kinds, vec![FilterKind::Ekf]);
        let before = cfg.clone();
        assert!(cfg.set("filter.rx", "-3").is_err());
        assert_eq!(cfg, before);
        assert!(matches!(
            cfg.set("nope", "1"),
            Err(ConfigError::UnknownKey(_))
        ));
    }

    #[test]
    fn every_documented_key_is_accepted() {
        let sample = |key: &str| -> &str {
            match key {
                "ocv.coeffs" => "[-0.5061, 11.1208, -27.5840, 25.9496, -10.4888, 2.3296, 3.3398]",
                "filter.qx" | "filter.p0" | "filter.sx" | "filter.lx" => "[1, 1]",
                "ident.theta0" => "[0.001, 0.001, 0.5]",
                "ident.enabled" => "true",
                "run.filters" => "\"all\"",
                "run.reference_mode" => "\"sim_truth\"",
                "cycle.kind" => "\"dst\"",
                "cycle.segments" => "[[1, 1]]",
                "filter.window_len" | "ident.warmup_steps" | "noise.seed" => "3",
                "filter.b" => "0.95",
                "battery.v_max" => "4.3",
                "battery.v_min" => "2.5",
                "ocv.band_min_v" => "0.5",
                "ocv.band_max_v" => "6",
                "ocv_fit.ocv_init" => "4",
                "ocv_fit.max_condition" => "1e12",
                _ => "0.5",
            }
        };
        for key in KEYS {
            let mut cfg = Config::default();
            cfg.set(key, sample(key))
                .unwrap_or_else(|e| panic!("{key}: {e}"));
        }
    }
}
