//! Dyadic approximation experiments: schedules `λ_n → λ`, convergence reports
//! for `r`, resistances and resolvent entries, Hausdorff bounds and a
//! finite-level Γ-convergence proxy.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use num::rational::BigRational;
use num::BigInt;
use rayon::prelude::*;
use serde::Serialize;

use crate::approx::{
    level_form, measure_weights, resistance_metric, resolvent_kernel, LevelForm, LevelGeometry, MeasureScheme,
};
use crate::error::{Error, Result};
use crate::geometry::{hausdorff_distance, make_ifs, rational_string, track_point, Word};
use crate::network::harmonic_extension;
use crate::renorm::{solve_r, RenormContext, Solution, SolveOptions, SG_EIGENVALUE};
use crate::scalar::format_float;

mod gamma;

pub use gamma::{gamma_diagnostic, GammaRow, GammaTable};

pub const DEFAULT_THRESHOLD: f64 = 1e-2;
const TREND_WINDOW: usize = 3;
/// Differences below this are solver noise, not trend.
const TREND_SLACK: f64 = 1e-9;

/// A real target for a dyadic schedule, kept with the expression it came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Target {
    pub expr: String,
    pub value: f64,
}

impl FromStr for Target {
    type Err = Error;

    /// Accepts `1/sqrtN`, `p/q` and decimal literals.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::Domain(format!("cannot parse target {s:?}"));
        let value = if let Some(rest) = t.strip_prefix("1/sqrt") {
            let n: f64 = rest.trim_matches(|c| c == '(' || c == ')').parse().map_err(|_| bad())?;
            if !(n > 0.0) {
                return Err(bad());
            }
            1.0 / n.sqrt()
        } else if let Some((p, q)) = t.split_once('/') {
            let p: f64 = p.trim().parse().map_err(|_| bad())?;
            let q: f64 = q.trim().parse().map_err(|_| bad())?;
            p / q
        } else {
            t.parse().map_err(|_| bad())?
        };
        if !value.is_finite() {
            return Err(bad());
        }
        Ok(Target { expr: t.to_string(), value })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScheduleEntry {
    pub n: u32,
    #[serde(serialize_with = "ser_rational")]
    pub lambda: BigRational,
}

fn ser_rational<S: serde::Serializer>(q: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&rational_string(q))
}

#[derive(Clone, Debug, Serialize)]
pub struct DyadicSchedule {
    pub target: f64,
    pub entries: Vec<ScheduleEntry>,
}

/// `λ_n = round(2ⁿ·target)/2ⁿ`.
pub fn dyadic_schedule(target: f64, n_range: RangeInclusive<u32>) -> Result<DyadicSchedule> {
    if !(target > 0.0 && target < 0.5) {
        return Err(Error::Domain(format!("target {target} must lie in (0, 1/2)")));
    }
    if n_range.is_empty() {
        return Err(Error::Domain("empty schedule range".into()));
    }
    if *n_range.end() > 60 {
        return Err(Error::CapExceeded { what: format!("schedule index {}", n_range.end()), cap: 60 });
    }
    let mut entries = Vec::new();
    for n in n_range {
        let den = 1u64 << n;
        let num = (target * den as f64).round() as u64;
        if num == 0 || 2 * num >= den {
            return Err(Error::Domain(format!("λ_{n} = {num}/{den} leaves (0, 1/2)")));
        }
        entries.push(ScheduleEntry { n, lambda: BigRational::new(BigInt::from(num), BigInt::from(den)) });
    }
    Ok(DyadicSchedule { target, entries })
}

/// `F_w(p_i)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Address {
    #[serde(serialize_with = "ser_display")]
    pub word: Word,
    pub corner: usize,
}

fn ser_display<T: fmt::Display, S: serde::Serializer>(t: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&t.to_string())
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w: String = self.word.letters().iter().map(|l| l.to_string()).collect();
        write!(f, "({w},{})", self.corner)
    }
}

impl FromStr for Address {
    type Err = Error;

    /// `(w,i)` with `w` a string of digits `1..4`; the empty word may be
    /// written as nothing, `e` or `∅`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Domain(format!("cannot parse address {s:?}; expected (w,i)"));
        let inner = s.trim().strip_prefix('(').and_then(|t| t.strip_suffix(')')).ok_or_else(bad)?;
        let (w, i) = inner.split_once(',').ok_or_else(bad)?;
        let w = w.trim();
        let word = if w.is_empty() || w == "e" || w == "∅" {
            Word::empty()
        } else {
            let letters = w.chars().map(|c| c.to_digit(10).map(|d| d as u8)).collect::<Option<Vec<u8>>>();
            Word::new(letters.ok_or_else(bad)?)?
        };
        let corner: usize = i.trim().parse().map_err(|_| bad())?;
        if !(1..=3).contains(&corner) {
            return Err(Error::Domain(format!("corner {corner} not in 1..=3")));
        }
        Ok(Address { word, corner })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TrackedPair {
    pub a: Address,
    pub b: Address,
}

impl fmt::Display for TrackedPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.a, self.b)
    }
}

impl FromStr for TrackedPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::Domain(format!("cannot parse pair {s:?}; expected (w,i):(w',i')")))?;
        Ok(TrackedPair { a: a.parse()?, b: b.parse()? })
    }
}

/// Parses a `;`-separated list of tracked pairs.
pub fn parse_pairs(s: &str) -> Result<Vec<TrackedPair>> {
    s.split(';').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
}

#[derive(Clone, Debug)]
pub struct ReportOptions {
    pub solve: SolveOptions,
    pub measure: MeasureScheme,
    pub threshold: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { solve: SolveOptions::default(), measure: MeasureScheme::Hausdorff, threshold: DEFAULT_THRESHOLD }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportRow {
    pub n: u32,
    #[serde(serialize_with = "ser_rational")]
    pub lambda: BigRational,
    pub r: f64,
    pub residual: f64,
    pub resistances: Vec<f64>,
    pub kernel: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub quantity: String,
    pub trend: bool,
    pub final_gap: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub target: f64,
    pub s: f64,
    pub level: usize,
    pub alpha: Option<f64>,
    pub pairs: Vec<String>,
    pub rows: Vec<ReportRow>,
    /// `|q_{n+1} − q_n|` per quantity, in verdict order.
    pub differences: Vec<Vec<f64>>,
    pub verdicts: Vec<Verdict>,
    pub r_in_range: bool,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.r_in_range && self.verdicts.iter().all(|v| v.pass)
    }

    /// One row per `n`; differences start on the second row, verdicts fill the last.
    pub fn to_csv(&self) -> String {
        let names = self.quantity_names();
        let mut out = String::from("n,lambda_num,lambda_den,r");
        for p in &self.pairs {
            out.push_str(&format!(",\"R {p}\""));
        }
        if self.alpha.is_some() {
            for p in &self.pairs {
                out.push_str(&format!(",\"u_alpha {p}\""));
            }
        }
        for q in &names {
            out.push_str(&format!(",\"diff {q}\""));
        }
        for q in &names {
            out.push_str(&format!(",\"verdict {q}\""));
        }
        out.push('\n');
        for (k, row) in self.rows.iter().enumerate() {
            out.push_str(&format!("{},{},{},{}", row.n, row.lambda.numer(), row.lambda.denom(), format_float(row.r)));
            for v in row.resistances.iter().chain(&row.kernel) {
                out.push_str(&format!(",{}", format_float(*v)));
            }
            for d in &self.differences {
                out.push(',');
                if k > 0 {
                    out.push_str(&format_float(d[k - 1]));
                }
            }
            let last = k + 1 == self.rows.len();
            for v in &self.verdicts {
                out.push(',');
                if last {
                    out.push_str(if v.pass { "pass" } else { "fail" });
                }
            }
            out.push('\n');
        }
        out
    }

    fn quantity_names(&self) -> Vec<String> {
        self.verdicts.iter().map(|v| v.quantity.clone()).collect()
    }
}

fn verdict(quantity: String, diffs: &[f64], threshold: f64) -> Verdict {
    let tail = &diffs[diffs.len().saturating_sub(TREND_WINDOW)..];
    let trend = tail.windows(2).all(|w| w[1] <= w[0] + TREND_SLACK);
    let final_gap = diffs.last().copied().unwrap_or(0.0);
    Verdict { quantity, trend, final_gap, pass: trend && final_gap <= threshold }
}

struct Level {
    ctx: RenormContext,
    sol: Solution,
    geom: LevelGeometry,
    form: LevelForm,
}

fn solve_level(lambda: &BigRational, s: f64, m: usize, opts: &SolveOptions) -> Result<Level> {
    let ctx = RenormContext::new(&make_ifs(lambda)?)?;
    let sol = solve_r(&ctx, s, opts)?;
    let geom = LevelGeometry::new(&ctx, m)?;
    let form = level_form(&geom, &sol)?;
    Ok(Level { ctx, sol, geom, form })
}

fn pair_ids(geom: &LevelGeometry, pairs: &[TrackedPair]) -> Result<Vec<(usize, usize)>> {
    pairs
        .iter()
        .map(|p| Ok((geom.address_id(&p.a.word, p.a.corner)?, geom.address_id(&p.b.word, p.b.corner)?)))
        .collect()
}

/// Checks `d(F_{w,λ_n}(p_i), F_{w,λ_n'}(p_i)) ≤ 2|λ_n − λ_n'|` for every tracked
/// address and every pair of schedule entries.
pub fn check_tracking(schedule: &DyadicSchedule, pairs: &[TrackedPair]) -> Result<()> {
    for (k, e1) in schedule.entries.iter().enumerate() {
        for e2 in &schedule.entries[k + 1..] {
            for p in pairs {
                for a in [&p.a, &p.b] {
                    track_point(&a.word, a.corner, &e1.lambda, &e2.lambda)?;
                }
            }
        }
    }
    Ok(())
}

pub fn convergence_report(
    target: f64,
    s: f64,
    n_range: RangeInclusive<u32>,
    pairs: &[TrackedPair],
    alpha: Option<f64>,
    m: usize,
    opts: &ReportOptions,
) -> Result<ConvergenceReport> {
    let schedule = dyadic_schedule(target, n_range)?;
    if let Some(a) = pairs.iter().flat_map(|p| [&p.a, &p.b]).find(|a| a.word.len() > m) {
        return Err(Error::TrackingError(format!("address {a} is deeper than level {m}")));
    }
    check_tracking(&schedule, pairs)?;
    let rows: Vec<ReportRow> = schedule
        .entries
        .par_iter()
        .map(|e| {
            let lv = solve_level(&e.lambda, s, m, &opts.solve)?;
            let ids = pair_ids(&lv.geom, pairs)?;
            let resistances = resistance_metric(&lv.form, &ids)?;
            let kernel = match alpha {
                Some(a) => {
                    let spec = measure_weights(lv.ctx.ifs(), &opts.measure)?;
                    let k = resolvent_kernel(&lv.geom, &lv.form, &spec, a)?;
                    ids.iter().map(|&(x, y)| k.get(x, y)).collect()
                }
                None => Vec::new(),
            };
            Ok(ReportRow { n: e.n, lambda: e.lambda.clone(), r: lv.sol.r, residual: lv.sol.residual, resistances, kernel })
        })
        .collect::<Result<_>>()?;

    let mut columns: Vec<(String, Vec<f64>)> = vec![("r".into(), rows.iter().map(|r| r.r).collect())];
    for (k, p) in pairs.iter().enumerate() {
        columns.push((format!("R {p}"), rows.iter().map(|r| r.resistances[k]).collect()));
    }
    if alpha.is_some() {
        for (k, p) in pairs.iter().enumerate() {
            columns.push((format!("u_alpha {p}"), rows.iter().map(|r| r.kernel[k]).collect()));
        }
    }
    let differences: Vec<Vec<f64>> =
        columns.iter().map(|(_, c)| c.windows(2).map(|w| (w[1] - w[0]).abs()).collect()).collect();
    let verdicts = columns
        .into_iter()
        .zip(&differences)
        .map(|((name, _), d)| verdict(name, d, opts.threshold))
        .collect();
    let r_in_range = rows.iter().all(|r| r.r >= SG_EIGENVALUE - 1e-9 && r.r < 1.0);
    Ok(ConvergenceReport {
        target,
        s,
        level: m,
        alpha,
        pairs: pairs.iter().map(ToString::to_string).collect(),
        rows,
        differences,
        verdicts,
        r_in_range,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HausdorffCheck {
    pub estimate: f64,
    pub bound: f64,
    pub slack: f64,
    pub pass: bool,
}

/// Cloud Hausdorff distance against `2|λ1 − λ2|` plus the depth-`k` slack `2·2^{-k}`.
pub fn hausdorff_check(lambda1: &BigRational, lambda2: &BigRational, depth: usize) -> Result<HausdorffCheck> {
    let (estimate, bound) = hausdorff_distance(&make_ifs(lambda1)?, &make_ifs(lambda2)?, depth)?;
    let slack = 2.0 * 0.5f64.powi(depth as i32);
    Ok(HausdorffCheck { estimate, bound, slack, pass: estimate <= bound + slack })
}

/// Energy of the level-`m` harmonic extension of corner data.
fn harmonic_energy(lv: &Level, f: [f64; 3]) -> Result<(Vec<f64>, f64)> {
    let h = harmonic_extension(&lv.form.form, &lv.geom.corner_ids(), &f)?;
    let e = lv.form.form.energy(&h);
    Ok((h, e))
}

#[cfg(test)]
mod tests {
    use num::ToPrimitive;

    use super::*;
    use crate::scalar::ratio;

    fn lambda_f64(q: &BigRational) -> f64 {
        q.to_f64().unwrap()
    }

    #[test]
    fn schedule_examples() {
        let t: Target = "1/sqrt8".parse().unwrap();
        let s = dyadic_schedule(t.value, 4..=6).unwrap();
        assert_eq!(s.entries[0].lambda, ratio(3, 8));
        assert_eq!(s.entries[2].lambda, ratio(23, 64));
        let q = dyadic_schedule(0.25, 2..=9).unwrap();
        assert!(q.entries.iter().all(|e| e.lambda == ratio(1, 4)));
        for e in dyadic_schedule(t.value, 2..=30).unwrap().entries {
            assert!((lambda_f64(&e.lambda) - t.value).abs() <= 0.5f64.powi(e.n as i32 + 1));
        }
        assert!(dyadic_schedule(0.6, 4..=6).is_err());
        assert!(dyadic_schedule(0.01, 2..=4).is_err());
        #[allow(clippy::reversed_empty_ranges)]
        let empty = 5..=4;
        assert!(dyadic_schedule(0.3, empty).is_err());
    }

    #[test]
    fn target_grammar() {
        assert_eq!("3/8".parse::<Target>().unwrap().value, 0.375);
        assert_eq!("0.3".parse::<Target>().unwrap().value, 0.3);
        assert!(("1/sqrt(8)".parse::<Target>().unwrap().value - 8f64.sqrt().recip()).abs() < 1e-16);
        assert!("sqrt8".parse::<Target>().is_err());
        assert!("1/sqrt-2".parse::<Target>().is_err());
    }

    #[test]
    fn pair_grammar() {
        let p = parse_pairs("(4,1):(4,2);(,1):(e,2)").unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].a.word, Word::new(vec![4]).unwrap());
        assert_eq!(p[1].a.word, Word::empty());
        assert_eq!(p[0].to_string(), "(4,1):(4,2)");
        assert!(parse_pairs("(4,0):(4,2)").is_err());
        assert!(parse_pairs("(5,1):(4,2)").is_err());
        assert!(parse_pairs("4,1:4,2").is_err());
    }

    #[test]
    fn constant_schedule_has_zero_differences() {
        let pairs = parse_pairs("(,1):(,2);(4,1):(4,2)").unwrap();
        let rep = convergence_report(0.25, 0.5, 2..=4, &pairs, Some(1.0), 2, &ReportOptions::default()).unwrap();
        assert!(rep.differences.iter().flatten().all(|&d| d == 0.0));
        assert!(rep.passed());
        for row in &rep.rows {
            assert!((row.resistances[0] - 2.0 / 3.0).abs() < 1e-10);
        }
        let csv = rep.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("n,lambda_num,lambda_den,r,"));
    }

    #[test]
    fn deep_address_rejected() {
        let pairs = parse_pairs("(444,1):(4,2)").unwrap();
        let err = convergence_report(0.25, 0.5, 2..=3, &pairs, None, 2, &ReportOptions::default()).unwrap_err();
        assert!(matches!(err, Error::TrackingError(_)));
    }

    #[test]
    fn verdict_trend() {
        assert!(verdict("q".into(), &[0.5, 0.1, 0.05, 0.01], 0.02).pass);
        assert!(!verdict("q".into(), &[0.5, 0.01, 0.05, 0.01], 0.02).pass);
        assert!(!verdict("q".into(), &[0.5, 0.1, 0.05, 0.03], 0.02).pass);
    }

    #[test]
    fn hausdorff_examples() {
        let same = hausdorff_check(&ratio(1, 4), &ratio(1, 4), 6).unwrap();
        assert_eq!(same.estimate, 0.0);
        assert!(same.pass);
        let c = hausdorff_check(&ratio(1, 8), &ratio(3, 8), 8).unwrap();
        assert_eq!(c.bound, 0.5);
        assert!(c.estimate <= 0.5 + 0.5f64.powi(7));
    }
}
