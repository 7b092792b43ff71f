use std::fmt;
use std::path::{Path, PathBuf};

use agres_core::converge::{parse_pairs, Target};
use agres_core::geometry::{boundary_set, make_ifs, parse_rational, BoundaryMode, DEFAULT_LEVEL_CAP};
use agres_core::renorm::DEFAULT_RELATION_GUARD;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Level cap for commands that build dense matrices over `V_m`.
pub const DENSE_LEVEL_CAP: usize = 5;
/// Level cap for commands that only eliminate onto a few vertices.
pub const SPARSE_LEVEL_CAP: usize = 8;
pub const SCHEDULE_CAP: u32 = 20;

#[derive(Parser, Debug)]
#[command(name = "agres", version, about = "Self-similar resistance forms on gaskets with an added rotated triangle")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Solve for r and the self-similar boundary form.
    Solve,
    /// List the cell-boundary set.
    Boundary,
    /// Level-m approximating graph.
    Graph,
    /// Effective resistances of tracked pairs.
    Resistance,
    /// Resolvent kernel at level m.
    Resolvent,
    /// Preserved rotation-invariant relations.
    Relations,
    /// Resistance estimates: boundary bound, scaling exponent, uniform bound on r.
    Estimates,
    /// Convergence report along a dyadic schedule.
    Converge,
    /// Hausdorff distance bound between two parameters.
    Hausdorff,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("serializes");
        write!(f, "{}", s.as_str().expect("string"))
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureArg {
    Hausdorff,
    Uniform,
}

/// Flags, all optional so that a config file can supply them.
#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    /// Flat TOML file with keys mirroring the flags.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Rational parameter "p/q" in (0, 1/2).
    #[arg(long, global = true)]
    pub lambda: Option<String>,
    /// Second parameter for `hausdorff`.
    #[arg(long, global = true)]
    pub lambda2: Option<String>,
    /// Schedule target: "1/sqrtN", "p/q" or a decimal.
    #[arg(long, global = true)]
    pub target: Option<String>,
    /// Weight of the added cell, in (0, 1).
    #[arg(long, global = true)]
    pub s: Option<f64>,
    #[arg(long, global = true)]
    pub level: Option<usize>,
    /// Schedule range "a..b".
    #[arg(long, global = true)]
    pub n: Option<String>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Tracked pairs "(w,i):(w',i')", separated by ';'.
    #[arg(long, global = true)]
    pub pairs: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub measure: Option<MeasureArg>,
    #[arg(long, global = true)]
    pub eigen_tol: Option<f64>,
    #[arg(long, global = true)]
    pub bisect_tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    /// Depth for `hausdorff` clouds and `relations` refinement.
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    #[arg(long, global = true)]
    pub guard: Option<usize>,
    /// Convergence verdict threshold.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

impl Flags {
    /// Fields set here win over `base`.
    pub fn over(self, base: Flags) -> Flags {
        Flags {
            config: self.config.or(base.config),
            lambda: self.lambda.or(base.lambda),
            lambda2: self.lambda2.or(base.lambda2),
            target: self.target.or(base.target),
            s: self.s.or(base.s),
            level: self.level.or(base.level),
            n: self.n.or(base.n),
            alpha: self.alpha.or(base.alpha),
            pairs: self.pairs.or(base.pairs),
            measure: self.measure.or(base.measure),
            eigen_tol: self.eigen_tol.or(base.eigen_tol),
            bisect_tol: self.bisect_tol.or(base.bisect_tol),
            max_iters: self.max_iters.or(base.max_iters),
            depth: self.depth.or(base.depth),
            guard: self.guard.or(base.guard),
            threshold: self.threshold.or(base.threshold),
            out: self.out.or(base.out),
            threads: self.threads.or(base.threads),
        }
    }
}

pub fn read_config_file(path: &Path) -> Result<Flags, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))
}

/// The fully resolved configuration; echoed verbatim into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub lambda: Option<String>,
    pub lambda2: Option<String>,
    pub target: Option<String>,
    pub s: f64,
    pub level: usize,
    pub n: String,
    pub alpha: Option<f64>,
    pub pairs: String,
    pub measure: MeasureArg,
    pub eigen_tol: f64,
    pub bisect_tol: f64,
    pub max_iters: usize,
    pub depth: usize,
    pub guard: usize,
    pub threshold: f64,
    pub out: PathBuf,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn resolve(command: Command, f: Flags) -> RunConfig {
        let default_level = match command {
            Command::Estimates | Command::Converge => 4,
            Command::Resolvent => 3,
            _ => 2,
        };
        let default_depth = match command {
            Command::Hausdorff => 8,
            _ => 1,
        };
        let default_alpha = match command {
            Command::Resolvent | Command::Converge => Some(1.0),
            _ => None,
        };
        RunConfig {
            command,
            lambda: f.lambda,
            lambda2: f.lambda2,
            target: f.target,
            s: f.s.unwrap_or(0.5),
            level: f.level.unwrap_or(default_level),
            n: f.n.unwrap_or_else(|| "4..10".into()),
            alpha: f.alpha.or(default_alpha),
            pairs: f.pairs.unwrap_or_else(|| "(,1):(,2)".into()),
            measure: f.measure.unwrap_or(MeasureArg::Hausdorff),
            eigen_tol: f.eigen_tol.unwrap_or(1e-12),
            bisect_tol: f.bisect_tol.unwrap_or(1e-10),
            max_iters: f.max_iters.unwrap_or(10_000),
            depth: f.depth.unwrap_or(default_depth),
            guard: f.guard.unwrap_or(DEFAULT_RELATION_GUARD),
            threshold: f.threshold.unwrap_or(agres_core::converge::DEFAULT_THRESHOLD),
            out: f.out.unwrap_or_else(|| PathBuf::from("out")),
            threads: f.threads,
        }
    }
}

/// `a..b` or `a..=b`, inclusive.
pub fn parse_range(s: &str) -> Option<(u32, u32)> {
    let (a, b) = s.split_once("..")?;
    let b = b.strip_prefix('=').unwrap_or(b);
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn needs_lambda(c: Command) -> bool {
    !matches!(c, Command::Converge)
}

fn needs_s(c: Command) -> bool {
    matches!(c, Command::Solve | Command::Resistance | Command::Resolvent | Command::Estimates | Command::Converge)
}

/// Every violated constraint, naming the field; empty iff dispatchable.
pub fn validate(c: &RunConfig) -> Vec<String> {
    let mut v = Vec::new();
    let cmd = c.command;
    if needs_lambda(cmd) {
        check_lambda(&mut v, "lambda", c.lambda.as_deref());
    }
    if cmd == Command::Hausdorff {
        check_lambda(&mut v, "lambda2", c.lambda2.as_deref());
        if c.depth > agres_core::geometry::HAUSDORFF_DEPTH_CAP {
            v.push(format!("depth must be at most {}", agres_core::geometry::HAUSDORFF_DEPTH_CAP));
        }
    }
    if needs_s(cmd) && !(c.s > 0.0 && c.s < 1.0) {
        v.push("s must lie in (0,1); irregular cases s ≥ 1 are out of scope".into());
    }
    let cap = match cmd {
        Command::Resolvent | Command::Converge => DENSE_LEVEL_CAP,
        Command::Resistance | Command::Estimates => SPARSE_LEVEL_CAP,
        Command::Graph => DEFAULT_LEVEL_CAP,
        _ => usize::MAX,
    };
    if c.level > cap {
        v.push(format!("level must be at most {cap} for {cmd}"));
    }
    if matches!(cmd, Command::Estimates) && c.level < 1 {
        v.push("level must be at least 1 for estimates".into());
    }
    for (name, x) in [("eigen_tol", c.eigen_tol), ("bisect_tol", c.bisect_tol), ("threshold", c.threshold)] {
        if !(x > 0.0) || !x.is_finite() {
            v.push(format!("{name} must be positive"));
        }
    }
    if c.max_iters == 0 {
        v.push("max_iters must be positive".into());
    }
    if c.threads == Some(0) {
        v.push("threads must be positive".into());
    }
    if let Some(a) = c.alpha {
        if matches!(cmd, Command::Resolvent | Command::Converge) && !(a > 0.0 && a.is_finite()) {
            v.push("alpha must be positive".into());
        }
    } else if cmd == Command::Resolvent {
        v.push("alpha is required for resolvent".into());
    }
    if matches!(cmd, Command::Resistance | Command::Converge) {
        match parse_pairs(&c.pairs) {
            Ok(p) if p.is_empty() => v.push("pairs must name at least one pair".into()),
            Ok(p) => {
                if p.iter().flat_map(|q| [&q.a, &q.b]).any(|a| a.word.len() > c.level) {
                    v.push(format!("pairs: every address word must have length ≤ level {}", c.level));
                }
            }
            Err(e) => v.push(format!("pairs: {e}")),
        }
    }
    if cmd == Command::Converge {
        match c.target.as_deref().map(str::parse::<Target>) {
            None => v.push("target is required for converge".into()),
            Some(Err(e)) => v.push(format!("target: {e}")),
            Some(Ok(t)) if !(t.value > 0.0 && t.value < 0.5) => v.push("target must lie in (0,1/2)".into()),
            Some(Ok(_)) => {}
        }
        match parse_range(&c.n) {
            Some((a, b)) if a > b => v.push(format!("n range {} is empty", c.n)),
            Some((a, b)) if a < 1 || b > SCHEDULE_CAP => {
                v.push(format!("n range must lie within 1..{SCHEDULE_CAP}"))
            }
            Some(_) => {}
            None => v.push(format!("n range {:?} is not of the form a..b", c.n)),
        }
    }
    if cmd == Command::Relations && v.is_empty() {
        let size = c
            .lambda
            .as_deref()
            .and_then(|l| parse_rational(l).ok())
            .and_then(|l| make_ifs(&l).ok())
            .map(|ifs| boundary_set(&ifs, BoundaryMode::default()).map(|b| b.size()));
        match size {
            Some(Ok(n)) if n > c.guard => {
                v.push(format!("guard: boundary set has {n} points, more than guard {}", c.guard))
            }
            Some(Err(e)) => v.push(format!("lambda: {e}")),
            _ => {}
        }
    }
    v
}

fn check_lambda(v: &mut Vec<String>, field: &str, value: Option<&str>) {
    match value.map(parse_rational) {
        None => v.push(format!("{field} is required")),
        Some(Err(e)) => v.push(format!("{field}: {e}")),
        Some(Ok(l)) => {
            if make_ifs(&l).is_err() {
                v.push(format!("{field} must lie in (0,1/2)"));
            }
        }
    }
}
