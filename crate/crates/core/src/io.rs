//! Text formats for graphs and control instances, and the solution CSV.
//!
//! Graph file, one record per line, 1-based agent ids, `#` starts a comment:
//!
//! ```text
//! n 4
//! e 1 2 0.5 1.5     # w_12 = 0.5, w_21 = 1.5
//! e 2 3             # both weights 1
//! s 3 0.25          # self-loop with w_33 = 0.25
//! ```
//!
//! A control file adds bounds and the target:
//!
//! ```text
//! L 0               # default lower bound on every supported entry
//! U 5
//! l 1 2 0.4         # w̲_12
//! u 1 2 2           # w̄_12
//! ls 3 0.1          # w̲_33
//! us 3 1            # w̄_33
//! rho* 1 1 1 1
//! z 0.5 0.5 0.5 0.5
//! alpha 0.1         # or `alpha fit` with `fit-rho` and `fit-z` vectors
//! ```
//!
//! Entries without any bound are pinned to their current weight.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::control::{ControlInstance, ControlSolution};
use crate::error::{Error, Result};
use crate::estimation::fit_alpha_least_squares;
use crate::graph::InfluenceGraph;
use crate::trace::format_sig;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn strip_comment(raw: &str) -> &str {
    raw.split_once('#').map_or(raw, |(head, _)| head).trim()
}

fn parse_f64(line: usize, tok: &str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| parse_err(line, format!("invalid number `{tok}`")))
}

fn parse_vec(line: usize, toks: &[&str]) -> Result<Vec<f64>> {
    toks.iter().map(|t| parse_f64(line, t)).collect()
}

/// Builds an [`InfluenceGraph`] line by line and keeps unknown directives
/// for an outer format.
#[derive(Debug, Default)]
struct GraphBuilder {
    n: Option<usize>,
    edges: Vec<(usize, usize)>,
    loops: Vec<usize>,
    weights: Vec<(usize, usize, f64)>,
}

impl GraphBuilder {
    fn n(&self, line: usize) -> Result<usize> {
        self.n.ok_or_else(|| parse_err(line, "`n` must come first"))
    }

    fn agent(&self, line: usize, tok: &str) -> Result<usize> {
        let n = self.n(line)?;
        let id: usize = tok
            .parse()
            .map_err(|_| parse_err(line, format!("invalid agent id `{tok}`")))?;
        if id == 0 || id > n {
            return Err(parse_err(line, format!("agent id {id} outside 1..={n}")));
        }
        Ok(id - 1)
    }

    /// Returns false when the directive is not a graph record.
    fn accept(&mut self, line: usize, toks: &[&str]) -> Result<bool> {
        match toks[0] {
            "n" => {
                if self.n.is_some() {
                    return Err(parse_err(line, "duplicate `n`"));
                }
                let [_, v] = toks else {
                    return Err(parse_err(line, "expected `n <N>`"));
                };
                let n: usize = v
                    .parse()
                    .map_err(|_| parse_err(line, format!("invalid agent count `{v}`")))?;
                self.n = Some(n);
            }
            "e" => {
                if !(3..=5).contains(&toks.len()) {
                    return Err(parse_err(line, "expected `e <i> <j> [w_ij] [w_ji]`"));
                }
                let i = self.agent(line, toks[1])?;
                let j = self.agent(line, toks[2])?;
                let w_ij = toks.get(3).map_or(Ok(1.0), |t| parse_f64(line, t))?;
                let w_ji = toks.get(4).map_or(Ok(1.0), |t| parse_f64(line, t))?;
                self.edges.push((i, j));
                self.weights.push((i, j, w_ij));
                self.weights.push((j, i, w_ji));
            }
            "s" => {
                if !(2..=3).contains(&toks.len()) {
                    return Err(parse_err(line, "expected `s <i> [w_ii]`"));
                }
                let i = self.agent(line, toks[1])?;
                let w = toks.get(2).map_or(Ok(1.0), |t| parse_f64(line, t))?;
                self.loops.push(i);
                self.weights.push((i, i, w));
            }
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn build(self) -> Result<InfluenceGraph> {
        let n = self.n.ok_or_else(|| parse_err(0, "missing `n` record"))?;
        InfluenceGraph::from_assignments(n, &self.edges, &self.loops, &self.weights)
    }
}

fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(k, raw)| {
        let body = strip_comment(raw);
        (!body.is_empty()).then(|| (k + 1, body.split_whitespace().collect()))
    })
}

pub fn parse_graph(text: &str) -> Result<InfluenceGraph> {
    let mut b = GraphBuilder::default();
    for (line, toks) in records(text) {
        if !b.accept(line, &toks)? {
            return Err(parse_err(line, format!("unknown record `{}`", toks[0])));
        }
    }
    b.build()
}

pub fn read_graph(path: &Path) -> Result<InfluenceGraph> {
    parse_graph(&fs::read_to_string(path)?)
}

/// Writes a graph in the text format. Output parses back to the same graph.
pub fn format_graph(g: &InfluenceGraph) -> String {
    let mut out = format!("n {}\n", g.n());
    for (i, j) in g.edges() {
        out.push_str(&format!(
            "e {} {} {} {}\n",
            i + 1,
            j + 1,
            format_sig(g.weight(i, j)),
            format_sig(g.weight(j, i))
        ));
    }
    for i in g.self_loops() {
        out.push_str(&format!("s {} {}\n", i + 1, format_sig(g.weight(i, i))));
    }
    out
}

/// How the control file sets the attenuation.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaSetting {
    Value(f64),
    /// Least-squares fit of `(I − αWᵀ) ρ = z` on the current weights.
    Fit { rho: Vec<f64>, z: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlFile {
    pub instance: ControlInstance,
    pub alpha: AlphaSetting,
}

pub fn parse_control(text: &str) -> Result<ControlFile> {
    let mut b = GraphBuilder::default();
    let mut default_lo: Option<f64> = None;
    let mut default_hi: Option<f64> = None;
    let mut lo_entries = Vec::new();
    let mut hi_entries = Vec::new();
    let mut rho_star = None;
    let mut z = None;
    let mut alpha = None;
    let mut fit_rho = None;
    let mut fit_z = None;
    for (line, toks) in records(text) {
        if b.accept(line, &toks)? {
            continue;
        }
        let arity = |k: usize, usage: &str| -> Result<()> {
            if toks.len() == k {
                Ok(())
            } else {
                Err(parse_err(line, format!("expected `{usage}`")))
            }
        };
        match toks[0] {
            "L" => {
                arity(2, "L <value>")?;
                default_lo = Some(parse_f64(line, toks[1])?);
            }
            "U" => {
                arity(2, "U <value>")?;
                default_hi = Some(parse_f64(line, toks[1])?);
            }
            "l" | "u" => {
                arity(4, "l|u <i> <j> <value>")?;
                let e = (b.agent(line, toks[1])?, b.agent(line, toks[2])?, parse_f64(line, toks[3])?);
                if toks[0] == "l" { &mut lo_entries } else { &mut hi_entries }.push(e);
            }
            "ls" | "us" => {
                arity(3, "ls|us <i> <value>")?;
                let i = b.agent(line, toks[1])?;
                let e = (i, i, parse_f64(line, toks[2])?);
                if toks[0] == "ls" { &mut lo_entries } else { &mut hi_entries }.push(e);
            }
            "rho*" => rho_star = Some(parse_vec(line, &toks[1..])?),
            "z" => z = Some(parse_vec(line, &toks[1..])?),
            "fit-rho" => fit_rho = Some(parse_vec(line, &toks[1..])?),
            "fit-z" => fit_z = Some(parse_vec(line, &toks[1..])?),
            "alpha" => {
                arity(2, "alpha <value>|fit")?;
                alpha = Some(if toks[1] == "fit" {
                    None
                } else {
                    Some(parse_f64(line, toks[1])?)
                });
            }
            other => return Err(parse_err(line, format!("unknown record `{other}`"))),
        }
    }
    let g = b.build()?;
    let n = g.n();
    let w = g.weights();
    let mut lower = DMatrix::zeros(n, n);
    let mut upper = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in g.extended_neighborhood(i) {
            lower[(i, j)] = default_lo.unwrap_or(w[(i, j)]);
            upper[(i, j)] = default_hi.unwrap_or(w[(i, j)]);
        }
    }
    for (m, entries) in [(&mut lower, lo_entries), (&mut upper, hi_entries)] {
        for (i, j, v) in entries {
            if !g.supports(i, j) {
                return Err(Error::WeightOutsideEdgeSet { i, j });
            }
            m[(i, j)] = v;
        }
    }
    let rho_star = rho_star.ok_or_else(|| parse_err(0, "missing `rho*` record"))?;
    let z = z.ok_or_else(|| parse_err(0, "missing `z` record"))?;
    let setting = match alpha.ok_or_else(|| parse_err(0, "missing `alpha` record"))? {
        Some(v) => AlphaSetting::Value(v),
        None => AlphaSetting::Fit {
            rho: fit_rho.ok_or_else(|| parse_err(0, "`alpha fit` needs a `fit-rho` record"))?,
            z: fit_z.ok_or_else(|| parse_err(0, "`alpha fit` needs a `fit-z` record"))?,
        },
    };
    let alpha_value = match &setting {
        AlphaSetting::Value(v) => *v,
        AlphaSetting::Fit { rho, z } => fit_alpha_least_squares(&g, rho, z)?,
    };
    let instance = ControlInstance::new(g, lower, upper, rho_star, z, alpha_value)?;
    Ok(ControlFile {
        instance,
        alpha: setting,
    })
}

pub fn read_control(path: &Path) -> Result<ControlFile> {
    parse_control(&fs::read_to_string(path)?)
}

/// `i,j,w_old,x_star,w_new` over the supported entries, 1-based.
pub fn write_solution_csv<W: Write>(out: &mut W, inst: &ControlInstance, sol: &ControlSolution) -> Result<()> {
    writeln!(out, "i,j,w_old,x_star,w_new")?;
    let g = inst.graph();
    for i in 0..g.n() {
        for j in g.extended_neighborhood(i) {
            let old = g.weight(i, j);
            let x = sol.x_star[(i, j)];
            writeln!(
                out,
                "{},{},{},{},{}",
                i + 1,
                j + 1,
                format_sig(old),
                format_sig(x),
                format_sig(old + x)
            )?;
        }
    }
    Ok(())
}
