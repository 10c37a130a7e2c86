use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use alphacent::consensus::weighted_average_oracle;
use alphacent::control::{feasibility_check, solve, ControlInstance, SolverKind};
use alphacent::estimation::{
    error_bound, oracle_alpha_centrality, CentralityConfig, ErrorBoundParams, StopRule, VectorNorm,
};
use alphacent::graph::{alpha_from_norms, perron_matrix, Epsilon};
use alphacent::io::{read_control, read_graph, write_solution_csv};
use alphacent::random::{random_graph, seeded, GraphParams};
use alphacent::simnet::{locality_audit, simulate_consensus, simulate_control_exchange, simulate_estimation, Engine};
use alphacent::trace::{format_sig, RoundTrace};
use alphacent::InfluenceGraph;
use anyhow::{anyhow, bail, Context, Result};

use crate::scenario::{self, AlphaMode, EpsilonMode, GraphSource, InitialEstimate, Scenario, Target};
use crate::{CommonArgs, ConsensusArgs, ControlArgs, EstimateArgs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;
pub const EXIT_INFEASIBLE: u8 = 4;

const DEFAULT_ALPHA_MARGIN: f64 = 0.9;

pub struct Outcome {
    pub code: u8,
    pub message: Option<String>,
}

impl Outcome {
    fn finished(converged: bool, rounds: usize, residual: f64) -> Self {
        if converged {
            Self { code: EXIT_OK, message: None }
        } else {
            Self {
                code: EXIT_NOT_CONVERGED,
                message: Some(format!(
                    "not converged: {rounds} rounds, residual {}",
                    format_sig(residual)
                )),
            }
        }
    }
}

fn load_scenario(common: &CommonArgs, protocol: &str) -> Result<Scenario> {
    let mut scn = match &common.scenario {
        Some(p) => scenario::load(p)?,
        None => Scenario::default(),
    };
    if let Some(p) = &scn.protocol {
        if p != protocol {
            bail!("scenario is for protocol `{p}`, not `{protocol}`");
        }
    }
    if let Some(g) = &common.graph {
        scn.graph = Some(GraphSource::File(g.clone()));
    }
    if let Some(a) = common.alpha {
        scn.alpha = Some(AlphaMode::Explicit(a));
    }
    if let Some(m) = common.alpha_margin {
        scn.alpha = Some(AlphaMode::BoundFraction(m));
    }
    if let Some(t) = common.tol {
        scn.tol = Some(t);
    }
    if let Some(r) = common.max_rounds {
        scn.max_rounds = Some(r);
    }
    if let Some(s) = common.seed {
        scn.seed = s;
    }
    Ok(scn)
}

fn load_graph(scn: &Scenario) -> Result<InfluenceGraph> {
    match &scn.graph {
        Some(GraphSource::File(p)) => read_graph(p).with_context(|| format!("reading graph {}", p.display())),
        Some(GraphSource::Random(n)) => {
            if *n == 0 {
                bail!("random graph needs at least one agent");
            }
            Ok(random_graph(&mut seeded(scn.seed), *n, GraphParams::default()))
        }
        None => bail!("no graph given (use --graph or a scenario)"),
    }
}

fn resolve_alpha(g: &InfluenceGraph, mode: Option<AlphaMode>) -> Result<f64> {
    let alpha = match mode.unwrap_or(AlphaMode::BoundFraction(DEFAULT_ALPHA_MARGIN)) {
        AlphaMode::Explicit(a) => a,
        AlphaMode::BoundFraction(m) => alpha_from_norms(m, g.norm_one(), g.norm_inf()),
        AlphaMode::SpectralFraction(m) => m / g.norm_two(),
    };
    if !(alpha > 0.0 && alpha.is_finite()) {
        bail!("attenuation resolves to {alpha}; the influence matrix may be zero");
    }
    Ok(alpha)
}

fn vector_or_ones(v: Option<Vec<f64>>, n: usize, what: &str) -> Result<Vec<f64>> {
    let v = v.unwrap_or_else(|| vec![1.0; n]);
    if v.len() != n {
        bail!("{what} has {} entries for {n} agents", v.len());
    }
    Ok(v)
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path: PathBuf = dir.join(name);
    Ok(BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn join(v: &[f64]) -> String {
    v.iter().map(|&x| format_sig(x)).collect::<Vec<_>>().join(" ")
}

fn write_audit(dir: &Path, trace: &RoundTrace, g: &InfluenceGraph) -> Result<usize> {
    let violations = locality_audit(trace, g);
    let mut text = format!("violations {}\n", violations.len());
    for v in &violations {
        writeln!(text, "{v}").expect("writing to a String");
    }
    write_text(dir, "audit.txt", &text)?;
    Ok(violations.len())
}

fn norm_name(n: VectorNorm) -> &'static str {
    match n {
        VectorNorm::L1 => "l1",
        VectorNorm::L2 => "l2",
        VectorNorm::LInf => "linf",
    }
}

pub fn estimate(args: &EstimateArgs) -> Result<Outcome> {
    let common = &args.common;
    let mut scn = load_scenario(common, "estimate")?;
    if args.z.is_some() {
        scn.z = args.z.clone();
    }
    if args.zero_start {
        scn.c0 = InitialEstimate::Zero;
    }
    let g = load_graph(&scn)?;
    let n = g.n();
    let alpha = resolve_alpha(&g, scn.alpha)?;
    let cfg = CentralityConfig::new(&g, alpha, vector_or_ones(scn.z.clone(), n, "z")?)?;
    let c0 = match scn.c0 {
        InitialEstimate::Zero => vec![0.0; n],
        InitialEstimate::Seed => cfg.z().to_vec(),
    };
    let bound = ErrorBoundParams::for_run(&g, &cfg, &c0);
    let tol = scn.tol.unwrap_or(StopRule::DEFAULT_TOL);
    let mut stop = StopRule::for_estimation(bound.as_ref(), tol);
    if let Some(r) = scn.max_rounds {
        stop.max_rounds = r;
    }
    let engine = Engine::new(&g).with_audit(common.audit_locality).with_parallel(common.parallel);
    let started = Instant::now();
    let run = simulate_estimation(&engine, &cfg, &c0, stop)?;
    let elapsed = started.elapsed();
    let rounds = run.trace.len() - 1;
    let c: Vec<f64> = run.states.iter().map(|s| s.c).collect();
    let exact = oracle_alpha_centrality(&g, &cfg).ok();

    prepare_out(&common.out)?;
    let mut out = create(&common.out, "trace.csv")?;
    run.trace.write_csv(&mut out, &["c"])?;
    out.flush()?;

    let mut out = create(&common.out, "bound.csv")?;
    writeln!(out, "t,bound,error")?;
    for t in 0..=rounds {
        let b = match &bound {
            Some(p) => format_sig(error_bound(p, t)?),
            None => String::new(),
        };
        let e = match &exact {
            Some(rho) => {
                let ct = run.trace.series("c", t).expect("recorded round");
                let diff: Vec<f64> = ct.iter().zip(rho).map(|(a, b)| a - b).collect();
                format_sig(VectorNorm::L2.of(&diff))
            }
            None => String::new(),
        };
        writeln!(out, "{t},{b},{e}")?;
    }
    out.flush()?;

    let mut kv = String::new();
    writeln!(kv, "protocol estimate")?;
    writeln!(kv, "agents {n}")?;
    writeln!(kv, "alpha {}", format_sig(alpha))?;
    writeln!(kv, "rounds {rounds}")?;
    writeln!(kv, "converged {}", run.converged)?;
    writeln!(kv, "residual {}", format_sig(run.residual))?;
    if let Some(p) = &bound {
        writeln!(kv, "kappa {}", format_sig(p.kappa))?;
        writeln!(kv, "norm {}", norm_name(p.norm))?;
    }
    writeln!(kv, "c {}", join(&c))?;
    if let Some(rho) = &exact {
        writeln!(kv, "exact {}", join(rho))?;
    }
    write_text(&common.out, "summary.kv", &kv)?;

    let mut txt = format!(
        "estimation on {n} agents, alpha = {}\n{} after {rounds} rounds (residual {})\n",
        format_sig(alpha),
        if run.converged { "converged" } else { "did not converge" },
        format_sig(run.residual)
    );
    match &bound {
        Some(p) => writeln!(
            txt,
            "error bound: kappa = {} in the {} norm, gamma = {}, m0 = {}",
            format_sig(p.kappa),
            norm_name(p.norm),
            format_sig(p.gamma),
            format_sig(p.m0)
        )?,
        None => writeln!(txt, "error bound: no contracting norm")?,
    }
    writeln!(txt, "agent,estimate")?;
    for (i, v) in c.iter().enumerate() {
        writeln!(txt, "{},{}", i + 1, format_sig(*v))?;
    }
    write_text(&common.out, "summary.txt", &txt)?;

    if common.audit_locality {
        write_audit(&common.out, &run.trace, &g)?;
    }
    eprintln!("estimate: {rounds} rounds in {elapsed:?}");
    Ok(Outcome::finished(run.converged, rounds, run.residual))
}

pub fn consensus(args: &ConsensusArgs) -> Result<Outcome> {
    let common = &args.common;
    let mut scn = load_scenario(common, "consensus")?;
    if args.z.is_some() {
        scn.z = args.z.clone();
    }
    if args.x0.is_some() {
        scn.x0 = args.x0.clone();
    }
    if let Some(e) = args.epsilon {
        scn.epsilon = EpsilonMode::Fixed(e);
    }
    let g = load_graph(&scn)?;
    let n = g.n();
    let alpha = resolve_alpha(&g, scn.alpha)?;
    let cfg = CentralityConfig::new(&g, alpha, vector_or_ones(scn.z.clone(), n, "z")?)?;
    let x0 = scn.x0.clone().ok_or_else(|| anyhow!("no initial values given (use --x0 or a scenario)"))?;
    if x0.len() != n {
        bail!("x0 has {} entries for {n} agents", x0.len());
    }
    let q = perron_matrix(
        &g,
        match scn.epsilon {
            EpsilonMode::Auto => Epsilon::Auto,
            EpsilonMode::Fixed(e) => Epsilon::Fixed(e),
        },
    )?;
    let stop = StopRule::new(
        scn.max_rounds.unwrap_or(100_000),
        scn.tol.unwrap_or(StopRule::DEFAULT_TOL),
    );
    let correction = !args.no_correction;
    let engine = Engine::new(&g).with_audit(common.audit_locality).with_parallel(common.parallel);
    let started = Instant::now();
    let run = simulate_consensus(&engine, &cfg, q.epsilon(), &x0, correction, stop)?;
    let elapsed = started.elapsed();
    let rounds = run.trace.len() - 1;
    let x: Vec<f64> = run.states.iter().map(|s| s.x).collect();
    let c: Vec<f64> = run.states.iter().map(|s| s.c).collect();
    let mean_x = x.iter().sum::<f64>() / n as f64;
    let plain = x0.iter().sum::<f64>() / n as f64;
    let weighted = oracle_alpha_centrality(&g, &cfg)
        .ok()
        .and_then(|rho| weighted_average_oracle(&rho, &x0).ok());

    prepare_out(&common.out)?;
    let mut out = create(&common.out, "trace.csv")?;
    run.trace.write_csv(&mut out, &["c", "cbar", "y", "x"])?;
    out.flush()?;

    let mut kv = String::new();
    writeln!(kv, "protocol consensus")?;
    writeln!(kv, "agents {n}")?;
    writeln!(kv, "alpha {}", format_sig(alpha))?;
    writeln!(kv, "epsilon {}", format_sig(q.epsilon()))?;
    writeln!(kv, "lambda2 {}", format_sig(q.lambda2()))?;
    writeln!(kv, "correction {correction}")?;
    writeln!(kv, "rounds {rounds}")?;
    writeln!(kv, "converged {}", run.converged)?;
    writeln!(kv, "residual {}", format_sig(run.residual))?;
    writeln!(kv, "consensus {}", format_sig(mean_x))?;
    writeln!(kv, "plain-mean {}", format_sig(plain))?;
    if let Some(w) = weighted {
        writeln!(kv, "weighted-mean {}", format_sig(w))?;
    }
    writeln!(kv, "x {}", join(&x))?;
    writeln!(kv, "c {}", join(&c))?;
    write_text(&common.out, "summary.kv", &kv)?;

    let mut txt = format!(
        "consensus on {n} agents, alpha = {}, epsilon = {}{}\n{} after {rounds} rounds (residual {})\n",
        format_sig(alpha),
        format_sig(q.epsilon()),
        if correction { "" } else { ", no correction" },
        if run.converged { "converged" } else { "did not converge" },
        format_sig(run.residual)
    );
    writeln!(txt, "agreement value {} (plain mean {})", format_sig(mean_x), format_sig(plain))?;
    if let Some(w) = weighted {
        writeln!(txt, "centrality-weighted mean {}", format_sig(w))?;
    }
    write_text(&common.out, "summary.txt", &txt)?;

    if common.audit_locality {
        write_audit(&common.out, &run.trace, &g)?;
    }
    eprintln!("consensus: {rounds} rounds in {elapsed:?}");
    Ok(Outcome::finished(run.converged, rounds, run.residual))
}

fn parse_target(s: &str) -> Result<Target> {
    match s.split_once(':') {
        None if s == "file" => Ok(Target::File),
        None if s == "ones" => Ok(Target::Ones),
        Some(("uniform", r)) => Ok(Target::Uniform(r.parse().with_context(|| format!("invalid target level `{r}`"))?)),
        _ => bail!("target must be `file`, `ones` or `uniform:<r>`, got `{s}`"),
    }
}

fn parse_solver(s: Option<&str>) -> Result<SolverKind> {
    match s {
        None | Some("breakpoints") => Ok(SolverKind::Breakpoints),
        Some("enumeration") => Ok(SolverKind::Enumeration),
        Some(other) => bail!("solver must be `enumeration` or `breakpoints`, got `{other}`"),
    }
}

pub fn control(args: &ControlArgs) -> Result<Outcome> {
    let common = &args.common;
    let mut scn = load_scenario(common, "control")?;
    if let Some(s) = &args.solver {
        scn.solver = Some(s.clone());
    }
    if let Some(t) = &args.target {
        scn.target = parse_target(t)?;
    }
    let kind = parse_solver(scn.solver.as_deref())?;
    let path = match &scn.graph {
        Some(GraphSource::File(p)) => p.clone(),
        Some(GraphSource::Random(_)) => bail!("control needs a control file, not a random graph"),
        None => bail!("no control file given (use --graph or a scenario)"),
    };
    let mut inst = read_control(&path)
        .with_context(|| format!("reading control file {}", path.display()))?
        .instance;
    if let Some(mode) = scn.alpha {
        let alpha = resolve_alpha(inst.graph(), Some(mode))?;
        inst = ControlInstance::new(
            inst.graph().clone(),
            inst.w_lower().clone(),
            inst.w_upper().clone(),
            inst.rho_star().to_vec(),
            inst.z().to_vec(),
            alpha,
        )?;
    }
    let n = inst.n();
    inst = match scn.target {
        Target::File => inst,
        Target::Ones => inst.with_target(vec![1.0; n])?,
        Target::Uniform(r) => inst.with_target(vec![r; n])?,
    };

    prepare_out(&common.out)?;
    let report = feasibility_check(&inst);
    if !report.is_feasible() {
        let mut text = String::from("verdict infeasible\n");
        for r in report.violations() {
            writeln!(
                text,
                "row {} lower {} upper {} required {}",
                r.node + 1,
                format_sig(r.lower),
                format_sig(r.upper),
                format_sig(r.target)
            )?;
        }
        write_text(&common.out, "summary.kv", &text)?;
        return Ok(Outcome {
            code: EXIT_INFEASIBLE,
            message: Some(text.trim_end().to_string()),
        });
    }

    let started = Instant::now();
    let engine = Engine::new(inst.graph()).with_audit(common.audit_locality).with_parallel(common.parallel);
    let (sol, trace) = match kind {
        SolverKind::Breakpoints => {
            let ex = simulate_control_exchange(&engine, &inst)?;
            (ex.solution, Some(ex.trace))
        }
        SolverKind::Enumeration => (solve(&inst, kind, common.parallel)?, None),
    };
    let elapsed = started.elapsed();

    let mut out = create(&common.out, "solution.csv")?;
    write_solution_csv(&mut out, &inst, &sol)?;
    out.flush()?;

    let mut kv = String::new();
    writeln!(kv, "verdict feasible")?;
    writeln!(kv, "agents {n}")?;
    writeln!(kv, "alpha {}", format_sig(inst.alpha()))?;
    writeln!(
        kv,
        "solver {}",
        match kind {
            SolverKind::Breakpoints => "breakpoints",
            SolverKind::Enumeration => "enumeration",
        }
    )?;
    writeln!(kv, "objective {}", format_sig(sol.objective))?;
    writeln!(kv, "residual {}", format_sig(sol.residual))?;
    writeln!(kv, "lambda {}", join(&sol.lambda_star))?;
    writeln!(kv, "target {}", join(inst.rho_star()))?;
    if let Some(c) = &sol.centrality {
        writeln!(kv, "centrality {}", join(c))?;
    }
    write_text(&common.out, "summary.kv", &kv)?;

    let mut txt = format!(
        "target feasible on {n} agents, alpha = {}\nobjective 0.5 ||X*||_F^2 = {}, constraint residual {}\n",
        format_sig(inst.alpha()),
        format_sig(sol.objective),
        format_sig(sol.residual)
    );
    writeln!(txt, "agent,lambda,lower,interior,upper")?;
    for (i, (l, p)) in sol.lambda_star.iter().zip(&sol.partitions).enumerate() {
        writeln!(
            txt,
            "{},{},{},{},{}",
            i + 1,
            format_sig(*l),
            p.lower.len(),
            p.interior.len(),
            p.upper.len()
        )?;
    }
    write_text(&common.out, "summary.txt", &txt)?;

    if common.audit_locality {
        let trace = match trace {
            Some(t) => t,
            None => simulate_control_exchange(&engine, &inst)?.trace,
        };
        write_audit(&common.out, &trace, inst.graph())?;
    }
    eprintln!("control: solved in {elapsed:?}");
    Ok(Outcome { code: EXIT_OK, message: None })
}
