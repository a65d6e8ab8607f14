//! Experiment configuration: one JSON document.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use infoloss::density::{builtin, BuiltinDensity, Density};
use infoloss::estimators::{HistogramConfig, McConfig};
use infoloss::function_model::{catalog, from_pieces, from_polynomial, Orientation, PwmFunction};
use infoloss::loss::QuadratureConfig;
use infoloss::tight::{build_cdf_piecewise, build_tight};
use infoloss::Interval;

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<FunctionSpec>,
    pub density: DensitySpec,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<HistogramConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cascade: Option<CascadeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tight: Option<TightSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Catalog {
        name: String,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        params: BTreeMap<String, f64>,
    },
    /// Polynomial on `[lo, hi]`; missing ends are infinite.
    Polynomial {
        coeffs: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lo: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hi: Option<f64>,
    },
    /// Consecutive polynomial pieces on `[lo, hi)`.
    Piecewise { pieces: Vec<PieceSpec> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    /// `[-a, a]`, or `[lo, hi]`.
    Uniform {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lo: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hi: Option<f64>,
    },
    Normal {
        sigma: f64,
        #[serde(default)]
        mean: f64,
    },
    /// Piecewise-linear pdf from `(x, pdf)` points, inline or from a CSV file
    /// with a header row and columns `x,pdf`.
    Table {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        points: Option<Vec<(f64, f64)>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        csv: Option<String>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "one")]
    pub n_workers: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Dotted path of the numeric field to vary, e.g. `density.sigma`.
    pub param: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lin_grid: Option<Grid>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeSpec {
    pub stages: Vec<FunctionSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TightSpec {
    #[serde(rename = "L")]
    pub l: usize,
    /// `+1` or `-1` per branch; all `+1` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signs: Option<Vec<i8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundaries: Option<Vec<f64>>,
    /// Explicit offsets `c_l`; the subdomains are then the `k/L` quantiles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<Vec<f64>>,
    #[serde(default = "default_table_points")]
    pub table_points: usize,
}

fn default_table_points() -> usize {
    257
}

/// Reads a config file as raw JSON.
pub fn read_value(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Sets the number at a dotted path. Missing leaf keys are created; missing
/// intermediate objects are an error.
pub fn set_path(root: &mut Value, path: &str, v: f64) -> Result<(), CliError> {
    let mut keys: Vec<&str> = path.split('.').collect();
    let leaf = keys.pop().filter(|k| !k.is_empty()).ok_or_else(|| CliError::config("empty parameter path"))?;
    let mut node = root;
    for k in keys {
        node = node.get_mut(k).ok_or_else(|| CliError::config(format!("parameter path `{path}`: no `{k}` section")))?;
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| CliError::config(format!("parameter path `{path}` does not lead into an object")))?;
    if let Some(old) = obj.get(leaf) {
        if !old.is_number() {
            return Err(CliError::config(format!("parameter `{path}` is not numeric")));
        }
    }
    let num = serde_json::Number::from_f64(v).ok_or_else(|| CliError::config(format!("non-finite value {v}")))?;
    // Keep integer-typed fields integral so they still deserialize.
    let num = if v.fract() == 0.0 && v.abs() < 9e15 { serde_json::Number::from(v as i64) } else { num };
    obj.insert(leaf.to_string(), Value::Number(num));
    Ok(())
}

/// Ensures an object exists at `key` of the root object.
pub fn section<'a>(root: &'a mut Value, key: &str) -> Result<&'a mut serde_json::Map<String, Value>, CliError> {
    let obj = root.as_object_mut().ok_or_else(|| CliError::config("config must be a JSON object"))?;
    obj.entry(key)
        .or_insert_with(|| Value::Object(Default::default()))
        .as_object_mut()
        .ok_or_else(|| CliError::config(format!("`{key}` must be an object")))
}

impl Config {
    /// Parses a config; relative table paths are resolved against `base`.
    pub fn from_value(v: Value, base: &Path) -> Result<Config, CliError> {
        let mut cfg: Config = serde_json::from_value(v).map_err(|e| CliError::config(e.to_string()))?;
        if let DensitySpec::Table { csv: Some(p), .. } = &mut cfg.density {
            let path = Path::new(p.as_str());
            if path.is_relative() {
                *p = base.join(path).to_string_lossy().into_owned();
            }
        }
        cfg.quadrature.check()?;
        Ok(cfg)
    }

    pub fn function(&self) -> Result<PwmFunction, CliError> {
        self.function.as_ref().ok_or_else(|| CliError::config("this command needs a `function` section"))?.build()
    }

    pub fn density(&self) -> Result<Arc<dyn Density>, CliError> {
        self.density.build()
    }

    pub fn mc(&self) -> Result<McConfig, CliError> {
        let mc = self.mc.as_ref().ok_or_else(|| CliError::config("this command needs an `mc` section"))?;
        let seed = mc.seed.ok_or_else(|| CliError::config("randomized commands need a seed (`mc.seed` or --seed)"))?;
        Ok(McConfig::new(mc.n_samples, seed).with_workers(mc.n_workers))
    }

    pub fn sweep_values(&self) -> Result<(String, Vec<f64>), CliError> {
        let s = self.sweep.as_ref().ok_or_else(|| CliError::config("this command needs a `sweep` section"))?;
        let given = [s.values.is_some(), s.log_grid.is_some(), s.lin_grid.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(CliError::config("sweep needs exactly one of `values`, `log_grid`, `lin_grid`"));
        }
        let grid = |g: &Grid, log: bool| -> Result<Vec<f64>, CliError> {
            if g.n == 0 || !(g.lo.is_finite() && g.hi.is_finite()) || (log && !(g.lo > 0.0 && g.hi > 0.0)) {
                return Err(CliError::config("sweep grid needs n >= 1 and finite (positive for log) ends"));
            }
            if g.n == 1 {
                return Ok(vec![g.lo]);
            }
            let t = |i: usize| i as f64 / (g.n - 1) as f64;
            Ok((0..g.n)
                .map(|i| {
                    if i + 1 == g.n {
                        g.hi
                    } else if log {
                        g.lo * (g.hi / g.lo).powf(t(i))
                    } else {
                        g.lo + (g.hi - g.lo) * t(i)
                    }
                })
                .collect())
        };
        let values = match (&s.values, &s.log_grid, &s.lin_grid) {
            (Some(v), _, _) => v.clone(),
            (_, Some(g), _) => grid(g, true)?,
            (_, _, Some(g)) => grid(g, false)?,
            _ => unreachable!(),
        };
        if values.is_empty() {
            return Err(CliError::config("sweep has no values"));
        }
        Ok((s.param.clone(), values))
    }

    pub fn tight_function(&self, d: Arc<dyn Density>) -> Result<PwmFunction, CliError> {
        let t = self.tight.as_ref().ok_or_else(|| CliError::config("this command needs a `tight` section"))?;
        let signs = match &t.signs {
            None => vec![Orientation::Increasing; t.l],
            Some(s) => s
                .iter()
                .map(|&b| match b {
                    1 => Ok(Orientation::Increasing),
                    -1 => Ok(Orientation::Decreasing),
                    other => Err(CliError::config(format!("tight sign must be 1 or -1, got {other}"))),
                })
                .collect::<Result<_, _>>()?,
        };
        Ok(match (&t.boundaries, &t.offsets) {
            (Some(_), Some(_)) => return Err(CliError::config("tight: give `boundaries` or `offsets`, not both")),
            (_, Some(c)) => build_cdf_piecewise(d, t.l, &signs, c)?,
            (b, None) => build_tight(d, t.l, &signs, b.as_deref())?,
        })
    }
}

fn end(v: Option<f64>, default: f64) -> f64 {
    v.unwrap_or(default)
}

impl FunctionSpec {
    pub fn build(&self) -> Result<PwmFunction, CliError> {
        Ok(match self {
            FunctionSpec::Catalog { name, params } => catalog(name, params)?,
            FunctionSpec::Polynomial { coeffs, lo, hi } => {
                from_polynomial(coeffs, Interval::closed(end(*lo, f64::NEG_INFINITY), end(*hi, f64::INFINITY))?)?
            }
            FunctionSpec::Piecewise { pieces } => {
                if pieces.is_empty() {
                    return Err(CliError::config("piecewise function needs at least one piece"));
                }
                let n = pieces.len();
                let parts = pieces
                    .iter()
                    .enumerate()
                    .map(|(k, p)| {
                        let iv =
                            Interval::new(end(p.lo, f64::NEG_INFINITY), end(p.hi, f64::INFINITY), true, k + 1 == n)?;
                        Ok((iv, p.coeffs.clone()))
                    })
                    .collect::<infoloss::Result<Vec<_>>>()?;
                from_pieces(&parts)?
            }
        })
    }
}

impl DensitySpec {
    pub fn build(&self) -> Result<Arc<dyn Density>, CliError> {
        let spec = match self {
            DensitySpec::Uniform { a, lo, hi } => match (a, lo, hi) {
                (Some(a), None, None) => BuiltinDensity::Uniform { lo: -a, hi: *a },
                (None, Some(lo), Some(hi)) => BuiltinDensity::Uniform { lo: *lo, hi: *hi },
                _ => return Err(CliError::config("uniform density needs either `a` or both `lo` and `hi`")),
            },
            DensitySpec::Normal { sigma, mean } => BuiltinDensity::Normal { mean: *mean, sigma: *sigma },
            DensitySpec::Table { points, csv } => match (points, csv) {
                (Some(p), None) => BuiltinDensity::CustomPiecewisePdf { points: p.clone() },
                (None, Some(path)) => BuiltinDensity::CustomPiecewisePdf { points: read_table(Path::new(path))? },
                _ => return Err(CliError::config("table density needs exactly one of `points` and `csv`")),
            },
        };
        Ok(builtin(&spec)?)
    }
}

fn read_table(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let bad = |e: &dyn std::fmt::Display| CliError::config(format!("{}: {e}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(&e))?;
    rdr.deserialize::<(f64, f64)>().map(|r| r.map_err(|e| bad(&e))).collect()
}
