//! Flat `key = value` run configuration with `#` comments.
//!
//! Missing keys take the reference-design defaults; each fallback is logged.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cavity::{CavityGeometry, Param};
use crate::gaussian::DEFAULT_WAVELENGTH_MM;
use crate::power::{GainSpec, LossBudget, DEFAULT_I_SAT_W_PER_M2};
use crate::tolerance::ToleranceSpec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("format must be csv or json, got `{s}`")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub geometry: CavityGeometry,
    pub gain: GainSpec,
    pub loss: LossBudget,
    pub tolerance: ToleranceSpec,
    /// Wavelength (mm).
    pub wavelength: f64,
    pub format: Format,
    pub path: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let geometry = CavityGeometry::default();
        RunConfig {
            geometry,
            gain: GainSpec::default(),
            loss: LossBudget::default(),
            tolerance: ToleranceSpec::one_percent_of_max_focal(&geometry, 0),
            wavelength: DEFAULT_WAVELENGTH_MM,
            format: Format::Csv,
            path: None,
        }
    }
}

const GAIN_KEYS: [&str; 7] = ["i_sat", "a_g", "l_g", "eta_c", "p_in", "m_squared", "z_g"];
const LOSS_KEYS: [&str; 7] = ["t_ar", "r_m1", "r_m2", "alpha_air", "n_ar_2o", "n_ar_1", "n_ar_2"];
const TOL_KEYS: [&str; 6] = ["tau_f_star", "n", "i", "seed", "lo", "hi"];
const OTHER_KEYS: [&str; 4] = ["delta_dg", "wavelength_nm", "format", "path"];

fn known(key: &str) -> bool {
    Param::ALL.iter().any(|p| p.name() == key)
        || GAIN_KEYS.contains(&key)
        || LOSS_KEYS.contains(&key)
        || TOL_KEYS.contains(&key)
        || OTHER_KEYS.contains(&key)
}

struct Entry {
    line: usize,
    value: String,
}

fn parse_entries(text: &str) -> Result<BTreeMap<String, Entry>, ConfigError> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line, message: format!("expected `key = value`, got `{content}`") })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(ConfigError::Syntax { line, message: format!("empty key or value in `{content}`") });
        }
        if !known(k) {
            return Err(ConfigError::Syntax { line, message: format!("unknown key `{k}`") });
        }
        if let Some(prev) = out.insert(k.to_string(), Entry { line, value: v.to_string() }) {
            return Err(ConfigError::Syntax {
                line,
                message: format!("duplicate key `{k}` (first on line {})", prev.line),
            });
        }
    }
    Ok(out)
}

struct Reader {
    entries: BTreeMap<String, Entry>,
}

impl Reader {
    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|err| ConfigError::Syntax { line: e.line, message: format!("bad value for `{key}`: {err}") }),
        }
    }

    fn or_default<T: FromStr + fmt::Debug>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.parse(key)? {
            Some(v) => Ok(v),
            None => {
                log::info!("{key} not set, using default {default:?}");
                Ok(default)
            }
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), reason: e.to_string() })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let r = Reader { entries: parse_entries(text)? };
        let d = RunConfig::default();

        let mut geometry = d.geometry;
        for p in Param::ALL {
            if p == Param::Dg {
                continue;
            }
            geometry.set(p, r.or_default(p.name(), d.geometry.get(p))?);
        }
        let dg: Option<f64> = r.parse("dg")?;
        let delta: Option<f64> = r.parse("delta_dg")?;
        geometry.dg = match (dg, delta) {
            (Some(_), Some(_)) => {
                let line = r.entries["delta_dg"].line.max(r.entries["dg"].line);
                return Err(ConfigError::Syntax { line, message: "`dg` and `delta_dg` are mutually exclusive".into() });
            }
            (Some(v), None) => v,
            (None, Some(dd)) => geometry.f1 + geometry.f3 + dd,
            (None, None) => {
                log::info!("dg not set, using default {:?}", d.geometry.dg);
                d.geometry.dg
            }
        };
        geometry.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let i_sat_si: f64 = r.or_default("i_sat", DEFAULT_I_SAT_W_PER_M2)?;
        let mut gain = GainSpec::from_si_saturation(
            i_sat_si,
            r.or_default("a_g", d.gain.a_g)?,
            r.or_default("l_g", d.gain.l_g)?,
            r.or_default("eta_c", d.gain.eta_c)?,
            r.or_default("p_in", d.gain.p_in)?,
        );
        gain.m_squared = r.or_default("m_squared", d.gain.m_squared)?;
        gain.z_g = r.parse("z_g")?;
        gain.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let mut loss = d.loss;
        loss.t_ar = r.or_default("t_ar", loss.t_ar)?;
        loss.r_m1 = r.or_default("r_m1", loss.r_m1)?;
        loss.r_m2 = r.or_default("r_m2", loss.r_m2)?;
        loss.alpha_air = r.or_default("alpha_air", loss.alpha_air)?;
        loss.ar_counts.n_2o = r.or_default("n_ar_2o", loss.ar_counts.n_2o)?;
        loss.ar_counts.n_1 = r.or_default("n_ar_1", loss.ar_counts.n_1)?;
        loss.ar_counts.n_2 = r.or_default("n_ar_2", loss.ar_counts.n_2)?;
        loss.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let td = ToleranceSpec::one_percent_of_max_focal(&geometry, 0);
        let tolerance = ToleranceSpec {
            tau_f_star: r.or_default("tau_f_star", td.tau_f_star)?,
            lower: r.or_default("lo", td.lower)?,
            upper: r.or_default("hi", td.upper)?,
            samples_n: r.or_default("n", td.samples_n)?,
            iterations_i: r.or_default("i", td.iterations_i)?,
            seed: r.or_default("seed", td.seed)?,
        };
        tolerance.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let wavelength = match r.parse::<f64>("wavelength_nm")? {
            Some(nm) if nm > 0.0 => nm / 1e6,
            Some(nm) => return Err(ConfigError::Invalid(format!("wavelength_nm must be positive, got {nm}"))),
            None => d.wavelength,
        };
        let format = r.or_default("format", d.format)?;
        let path = r.parse("path")?;

        Ok(RunConfig { geometry, gain, loss, tolerance, wavelength, format, path })
    }
}
