//! Scenario files: `key value...` lines, `#` comments. Relative paths are
//! resolved against the scenario file's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaMode {
    /// `alpha` is the attenuation itself.
    Explicit(f64),
    /// `alpha` multiplies `1 / sqrt(‖W‖₁‖W‖∞)`.
    BoundFraction(f64),
    /// `alpha` multiplies `1 / ‖W‖₂`.
    SpectralFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonMode {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialEstimate {
    Seed,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    /// Use `rho*` from the control file.
    File,
    Ones,
    Uniform(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    File(PathBuf),
    /// Random connected graph with `n` agents from the scenario seed.
    Random(usize),
}

/// Everything a command needs, after merging the scenario file and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub protocol: Option<String>,
    pub graph: Option<GraphSource>,
    pub alpha: Option<AlphaMode>,
    pub z: Option<Vec<f64>>,
    pub x0: Option<Vec<f64>>,
    pub c0: InitialEstimate,
    pub epsilon: EpsilonMode,
    pub tol: Option<f64>,
    pub max_rounds: Option<usize>,
    pub solver: Option<String>,
    pub target: Target,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            protocol: None,
            graph: None,
            alpha: None,
            z: None,
            x0: None,
            c0: InitialEstimate::Seed,
            epsilon: EpsilonMode::Auto,
            tol: None,
            max_rounds: None,
            solver: None,
            target: Target::File,
            seed: 0,
        }
    }
}

fn numbers(line: usize, vals: &[&str]) -> Result<Vec<f64>> {
    vals.iter()
        .map(|v| {
            v.parse::<f64>()
                .with_context(|| format!("line {line}: invalid number `{v}`"))
        })
        .collect()
}

fn one<'a>(line: usize, key: &str, vals: &[&'a str]) -> Result<&'a str> {
    match vals {
        [v] => Ok(v),
        _ => bail!("line {line}: `{key}` takes exactly one value"),
    }
}

pub fn parse(text: &str, base: &Path) -> Result<Scenario> {
    let mut scn = Scenario::default();
    let mut raw: BTreeMap<String, (usize, Vec<String>)> = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        let body = line.split_once('#').map_or(line, |(h, _)| h).trim();
        if body.is_empty() {
            continue;
        }
        let mut toks = body.split_whitespace();
        let key = toks.next().expect("non-empty line has a token").to_string();
        let vals: Vec<String> = toks.map(str::to_string).collect();
        if raw.insert(key.clone(), (k + 1, vals)).is_some() {
            bail!("line {}: duplicate key `{key}`", k + 1);
        }
    }
    let mut alpha_mode = "explicit".to_string();
    let mut alpha_value = None;
    for (key, (line, vals)) in &raw {
        let line = *line;
        let vals: Vec<&str> = vals.iter().map(String::as_str).collect();
        match key.as_str() {
            "protocol" => scn.protocol = Some(one(line, key, &vals)?.to_string()),
            "graph" => scn.graph = Some(GraphSource::File(base.join(one(line, key, &vals)?))),
            "random-graph" => {
                let n = one(line, key, &vals)?
                    .parse()
                    .with_context(|| format!("line {line}: invalid agent count"))?;
                scn.graph = Some(GraphSource::Random(n));
            }
            "seed" => {
                scn.seed = one(line, key, &vals)?
                    .parse()
                    .with_context(|| format!("line {line}: invalid seed"))?
            }
            "alpha-mode" => alpha_mode = one(line, key, &vals)?.to_string(),
            "alpha" => alpha_value = Some(numbers(line, &[one(line, key, &vals)?])?[0]),
            "z" => scn.z = Some(numbers(line, &vals)?),
            "x0" => scn.x0 = Some(numbers(line, &vals)?),
            "c0" => {
                scn.c0 = match one(line, key, &vals)? {
                    "zero" => InitialEstimate::Zero,
                    "seed" => InitialEstimate::Seed,
                    other => bail!("line {line}: `c0` must be `zero` or `seed`, got `{other}`"),
                }
            }
            "epsilon" => {
                scn.epsilon = match one(line, key, &vals)? {
                    "auto" => EpsilonMode::Auto,
                    v => EpsilonMode::Fixed(numbers(line, &[v])?[0]),
                }
            }
            "tol" => scn.tol = Some(numbers(line, &[one(line, key, &vals)?])?[0]),
            "max-rounds" => {
                scn.max_rounds = Some(
                    one(line, key, &vals)?
                        .parse()
                        .with_context(|| format!("line {line}: invalid round count"))?,
                )
            }
            "solver" => scn.solver = Some(one(line, key, &vals)?.to_string()),
            "target" => {
                scn.target = match vals.as_slice() {
                    ["file"] => Target::File,
                    ["ones"] => Target::Ones,
                    ["uniform", r] => Target::Uniform(numbers(line, &[r])?[0]),
                    _ => bail!("line {line}: `target` must be `file`, `ones` or `uniform <r>`"),
                }
            }
            other => bail!("line {line}: unknown key `{other}`"),
        }
    }
    if let Some(v) = alpha_value {
        scn.alpha = Some(match alpha_mode.as_str() {
            "explicit" => AlphaMode::Explicit(v),
            "bound-fraction" => AlphaMode::BoundFraction(v),
            "spectral-fraction" => AlphaMode::SpectralFraction(v),
            other => bail!("unknown alpha-mode `{other}`"),
        });
    }
    Ok(scn)
}

pub fn load(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("reading scenario {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse(&text, base).with_context(|| format!("in scenario {}", path.display()))
}
