use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use agres_core::approx::{
    boundary_resistance_check, level_form, level_samples, measure_weights, r_bound_scan, resistance_envelope,
    resistance_metric, resolvent_kernel, scaling_exponent, vertex_masses, LevelGeometry, MeasureScheme,
};
use agres_core::converge::{
    convergence_report, dyadic_schedule, gamma_diagnostic, hausdorff_check, parse_pairs, ReportOptions, Target,
};
use agres_core::geometry::{
    approximation_graph, make_ifs, parse_rational, rational_string, BoundarySet, Ifs, Label,
};
use agres_core::renorm::{
    enumerate_preserved_relations, solve_r, EigenOptions, RenormContext, Solution, SolveOptions,
};
use agres_core::scalar::{format_float, ratio, Point};
use serde_json::{json, Value};

use crate::config::{parse_range, Command, MeasureArg, RunConfig};
use crate::{Failure, Outcome};

const SCALING_LEVELS: std::ops::RangeInclusive<usize> = 4..=9;
const ENVELOPE_LEVEL: usize = 3;
const R_BOUND_S: [f64; 6] = [0.2, 0.35, 0.5, 0.65, 0.8, 0.95];

struct Writer<'a> {
    cfg: &'a RunConfig,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), Failure> {
        fs::create_dir_all(&self.cfg.out)?;
        let path = self.cfg.out.join(name);
        fs::write(&path, contents)?;
        self.files.push(path);
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &Value) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(value).expect("json serializes");
        self.write(name, &(text + "\n"))
    }

    fn finish(mut self, summary: String, extra: Value) -> Result<Outcome, Failure> {
        let mut outputs: Vec<String> =
            self.files.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect();
        outputs.push("manifest.json".into());
        let manifest = json!({
            "tool": "agres",
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.cfg,
            "resolved": extra,
            "outputs": outputs,
        });
        self.write_json("manifest.json", &manifest)?;
        Ok(Outcome { files: self.files, summary })
    }
}

fn solve_options(cfg: &RunConfig) -> SolveOptions {
    SolveOptions {
        eigen: EigenOptions { tol: cfg.eigen_tol, max_iters: cfg.max_iters },
        bisect_tol: cfg.bisect_tol,
        ..SolveOptions::default()
    }
}

fn measure_scheme(cfg: &RunConfig) -> MeasureScheme {
    match cfg.measure {
        MeasureArg::Hausdorff => MeasureScheme::Hausdorff,
        MeasureArg::Uniform => MeasureScheme::Uniform,
    }
}

/// Everything that influenced a run beyond the flags themselves.
fn solve_defaults(opts: &SolveOptions) -> Value {
    json!({
        "eigen_tol": opts.eigen.tol,
        "eigen_max_iters": opts.eigen.max_iters,
        "bisect_tol": opts.bisect_tol,
        "max_expansions": opts.max_expansions,
    })
}

fn ifs(lambda: &Option<String>) -> Result<Ifs, Failure> {
    let l = parse_rational(lambda.as_deref().expect("validated"))?;
    Ok(make_ifs(&l)?)
}

fn solved(cfg: &RunConfig) -> Result<(RenormContext, Solution), Failure> {
    let ctx = RenormContext::new(&ifs(&cfg.lambda)?)?;
    let sol = solve_r(&ctx, cfg.s, &solve_options(cfg))?;
    Ok((ctx, sol))
}

fn label_string(l: &Label) -> String {
    match l {
        Label::Corner(i) => format!("p{i}"),
        Label::EdgeOrbit { edge, t } => format!("{edge:?}({t})").to_lowercase(),
    }
}

fn point_fields(p: &Point) -> String {
    p.serialize_fields().join(",")
}

fn boundary_csv(b: &BoundarySet) -> String {
    let mut out = String::from("index,label,x,y,x_exact,y_exact\n");
    for (k, (p, l)) in b.points.iter().zip(&b.labels).enumerate() {
        let _ = writeln!(out, "{k},{},{}", label_string(l), point_fields(p));
    }
    out
}

fn vertices_csv(points: &[Point], masses: Option<&[f64]>) -> String {
    let mut out = String::from("id,x,y,x_exact,y_exact");
    out.push_str(if masses.is_some() { ",mass\n" } else { "\n" });
    for (k, p) in points.iter().enumerate() {
        let _ = write!(out, "{k},{}", point_fields(p));
        if let Some(m) = masses {
            let _ = write!(out, ",{}", format_float(m[k]));
        }
        out.push('\n');
    }
    out
}

pub fn dispatch(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let w = Writer { cfg, files: Vec::new() };
    match cfg.command {
        Command::Solve => solve(cfg, w),
        Command::Boundary => boundary(cfg, w),
        Command::Graph => graph(cfg, w),
        Command::Resistance => resistance(cfg, w),
        Command::Resolvent => resolvent(cfg, w),
        Command::Relations => relations(cfg, w),
        Command::Estimates => estimates(cfg, w),
        Command::Converge => converge(cfg, w),
        Command::Hausdorff => hausdorff(cfg, w),
    }
}

fn solve(cfg: &RunConfig, mut w: Writer) -> Result<Outcome, Failure> {
    let (ctx, sol) = solved(cfg)?;
    let mut doc = sol.to_json();
    doc["measure"] = serde_json::to_value(measure_weights(ctx.ifs(), &measure_scheme(cfg))?).expect("serializes");
    w.write_json("solution.json", &doc)?;
    let summary = format!(
        "lambda={} s={} r={} C={} theta={} residual={:e}",
        rational_string(&sol.lambda),
        sol.s,
        sol.r,
        sol.c,
        sol.theta,
        sol.residual
    );
    w.finish(summary, solve_defaults(&solve_options(cfg)))
}

fn boundary(cfg: &RunConfig, mut w: Writer) -> Result<Outcome, Failure> {
    let ctx = RenormContext::new(&ifs(&cfg.lambda)?)?;
    let b = ctx.boundary();
    w.write("boundary.csv", &boundary_csv(b))?;
    let params: Vec<String> = b.params().iter().map(rational_string).collect();
    let summary = format!("{} boundary points; edge parameters {{{}}}", b.size(), params.join(", "));
    w.finish(summary, json!({"size": b.size(), "params": params}))
}

fn graph(cfg: &RunConfig, mut w: Writer) -> Result<Outcome, Failure> {
    let g = approximation_graph(&ifs(&cfg.lambda)?, cfg.level)?;
    w.write("graph_vertices.csv", &vertices_csv(&g.vertices, None))?;
    w.write("graph_edges.csv", &g.to_edge_csv())?;
    let summary = format!("level {}: {} vertices, {} edges", cfg.level, g.vertices.len(), g.edges.len());
    w.finish(summary, json!({"vertices": g.vertices.len(), "edges": g.edges.len()}))
}

fn resistance(cfg: &RunConfig, mut w: Writer) -> Result<Outcome, Failure> {
    let (ctx, sol) = solved(cfg)?;
    let geom = LevelGeometry::new(&ctx, cfg.level)?;
    let lf = level_form(&geom, &sol)?;
    let pairs = parse_pairs(&cfg.pairs)?;
    let ids: Vec<(usize, usize)> = pairs
        .iter()
        .map(|p| Ok((geom.address_id(&p.a.word, p.a.corner)?, geom.address_id(&p.b.word, p.b.corner)?)))
        .collect::<Result<_, agres_core::Error>>()?;
    let values = resistance_metric(&lf, &ids)?;
    let mut csv = String::from("pair,id1,x1,y1,x1_exact,y1_exact,id2,x2,y2,x2_exact,y2_exact,resistance\n");
    let mut summary = String::new();
    for ((p, &(a, b)), r) in pairs.iter().zip(&ids).zip(&values) {
        let (pa, pb) = (point_fields(&geom.vertices[a]), point_fields(&geom.vertices[b]));
        let _ = writeln!(csv, "\"{p}\",{a},{pa},{b},{pb},{}", format_float(*r));
        let _ = writeln!(summary, "R{p} = {r}");
    }
    w.write("resistance.csv", &csv)?;
    let mut extra = solve_defaults(&solve_options(cfg));
    extra["r"] = json!(sol.r);
    w.finish(summary, extra)
}

fn resolvent(cfg: &RunConfig, mut w: Writer) -> Result<Outcome, Failure> {
    let (ctx, sol) = solved(cfg)?;
    let geom = LevelGeometry::new(&ctx, cfg.level)?;
    let lf = level_form(&geom, &sol)?;
    let spec = measure_weights(ctx.ifs(), &measure_scheme(cfg))?;
    let alpha = cfg.alpha.expect("validated");
    let k = resolvent_kernel(&geom, &lf, &spec, alpha)?;
    w.write("kernel.csv", &k.to_csv())?;
    w.write("vertices.csv", &vertices_csv(&geom.vertices, Some(&vertex_masses(&geom, &spec))))?;
    let summary = format!(
        "level {}: {} vertices, alpha={alpha}, max row-mass error {:e}",
        cfg.level,
        geom.size(),
        (0..geom.size()).map(|x| (k.row_mass(x) - 1.0 / alpha).abs()).fold(0.0, f64::max)
    );
    let mut extra = solve_defaults(&solve_options(cfg));
    extra["measure"] = serde_json::to_value(&spec).expect("serializes");
    w.finish(summary, extra)
}

fn relations(cfg: &RunConfig, mut w: Writer) -> Result<Outcome, Failure> {
    let ctx = RenormContext::new(&ifs(&cfg.lambda)?)?;
    let rel = enumerate_preserved_relations(&ctx, cfg.depth, cfg.guard)?;
    let labels: Vec<String> = ctx.boundary().labels.iter().map(label_string).collect();
    let nontrivial = rel.iter().filter(|r| !r.is_trivial()).count();
    w.write_json(
        "relations.json",
        &json!({
            "lambda": cfg.lambda,
            "boundary_size": ctx.boundary_size(),
            "labels": labels,
            "depth": cfg.depth,
            "relations": rel,
            "nontrivial": nontrivial,
        }),
    )?;
    let summary = format!("{} preserved relations, {} nontrivial", rel.len(), nontrivial);
    w.finish(summary, json!({"depth": cfg.depth, "guard": cfg.guard}))
}

fn estimates(cfg: &RunConfig, mut w: Writer) -> Result<Outcome, Failure> {
    let (ctx, sol) = solved(cfg)?;
    let opts = solve_options(cfg);
    let mut checks = Vec::new();
    let mut envelope = None;
    for m in 1..=cfg.level {
        let geom = LevelGeometry::new(&ctx, m)?;
        let lf = level_form(&geom, &sol)?;
        checks.push(boundary_resistance_check(&geom, &lf, &sol)?);
        if m == ENVELOPE_LEVEL.min(cfg.level) {
            let samples = level_samples(&geom, &lf)?;
            envelope = Some(resistance_envelope(&samples, sol.theta, sol.s, ctx.ifs().rho())?);
        }
    }
    let fit = scaling_exponent(&ctx, &sol, SCALING_LEVELS)?;
    let lambdas: Vec<_> = (4..=12).map(|k| ratio(k, 32)).collect();
    let bound = r_bound_scan(&lambdas, &R_BOUND_S, &opts)?;
    let boundary_pass = checks.iter().all(|c| c.pass);
    let fit_pass = (fit.theta_fit - fit.theta).abs() <= 0.15 && fit.spread <= 50.0;
    let bound_pass = bound.max_r < 1.0 - 1e-3;
    w.write_json(
        "estimates.json",
        &json!({
            "lambda": rational_string(&sol.lambda),
            "s": sol.s,
            "r": sol.r,
            "boundary_resistance": {"checks": checks, "pass": boundary_pass},
            "scaling": {"fit": fit, "pass": fit_pass},
            "level_envelope": {"level": ENVELOPE_LEVEL.min(cfg.level), "envelope": envelope},
            "r_bound": {"bound": bound, "pass": bound_pass},
        }),
    )?;
    let verdict = |b: bool| if b { "pass" } else { "fail" };
    let summary = format!(
        "boundary resistance bound: {}\nscaling exponent: theta={} fit={} spread={} {}\nmax r over grid: {} {}",
        verdict(boundary_pass),
        fit.theta,
        fit.theta_fit,
        fit.spread,
        verdict(fit_pass),
        bound.max_r,
        verdict(bound_pass)
    );
    let mut extra = solve_defaults(&opts);
    extra["scaling_levels"] = json!([SCALING_LEVELS.start(), SCALING_LEVELS.end()]);
    extra["r_bound_lambdas"] = json!(lambdas.iter().map(rational_string).collect::<Vec<_>>());
    extra["r_bound_s"] = json!(R_BOUND_S);
    w.finish(summary, extra)
}

fn converge(cfg: &RunConfig, mut w: Writer) -> Result<Outcome, Failure> {
    let target: Target = cfg.target.as_deref().expect("validated").parse()?;
    let (a, b) = parse_range(&cfg.n).expect("validated");
    let pairs = parse_pairs(&cfg.pairs)?;
    let opts = ReportOptions { solve: solve_options(cfg), measure: measure_scheme(cfg), threshold: cfg.threshold };
    let schedule = dyadic_schedule(target.value, a..=b)?;
    let report = convergence_report(target.value, cfg.s, a..=b, &pairs, cfg.alpha, cfg.level, &opts)?;
    let gamma = gamma_diagnostic(target.value, cfg.s, a..=b, [1.0, 0.0, 0.0], cfg.level, &opts)?;
    w.write("report.csv", &report.to_csv())?;
    w.write_json("report.json", &json!({"target": target, "schedule": schedule, "report": report}))?;
    w.write("gamma.csv", &gamma.to_csv())?;
    let mut summary = String::new();
    for v in &report.verdicts {
        let _ = writeln!(
            summary,
            "{}: final gap {:e}, trend {}, {}",
            v.quantity,
            v.final_gap,
            v.trend,
            if v.pass { "pass" } else { "fail" }
        );
    }
    let _ = writeln!(summary, "r in range: {}; harmonic minimality: {}", report.r_in_range, gamma.all_minimal());
    let mut extra = solve_defaults(&opts.solve);
    extra["gamma_data"] = json!(gamma.data);
    w.finish(summary, extra)
}

fn hausdorff(cfg: &RunConfig, mut w: Writer) -> Result<Outcome, Failure> {
    let l1 = parse_rational(cfg.lambda.as_deref().expect("validated"))?;
    let l2 = parse_rational(cfg.lambda2.as_deref().expect("validated"))?;
    let c = hausdorff_check(&l1, &l2, cfg.depth)?;
    w.write_json(
        "hausdorff.json",
        &json!({"lambda1": rational_string(&l1), "lambda2": rational_string(&l2), "depth": cfg.depth, "check": c}),
    )?;
    let summary = format!(
        "estimate {} <= bound {} + slack {}: {}",
        c.estimate,
        c.bound,
        c.slack,
        if c.pass { "pass" } else { "fail" }
    );
    w.finish(summary, json!({}))
}
