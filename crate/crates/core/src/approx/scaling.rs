use std::collections::HashMap;

use num::rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;

use super::{dyadic_bottom_points, LevelForm, LevelGeometry};
use crate::error::{Error, Result};
use crate::geometry::{corners, rational_string, Ifs};
use crate::network::{resistance_matrix, trace, FiniteForm};
use crate::renorm::{solve_r, RenormContext, Solution, SolveOptions};
use crate::scalar::Point;

const MIN_SCALES: usize = 4;

/// Two-sided power envelope `c1·d^{η*} ≤ R ≤ c2·d^{η_*}`.
#[derive(Clone, Debug, Serialize)]
pub struct ResistanceEnvelope {
    pub theta: f64,
    pub eta_star: f64,
    pub eta_sub: f64,
    pub c1: f64,
    pub c2: f64,
}

impl ResistanceEnvelope {
    pub fn contains(&self, d: f64, r: f64) -> bool {
        let slack = 1e-12 * r;
        self.c1 * d.powf(self.eta_star) <= r + slack && r <= self.c2 * d.powf(self.eta_sub) + slack
    }
}

/// Fits the constants of the envelope to `(distance, resistance)` samples.
pub fn resistance_envelope(samples: &[(f64, f64)], theta: f64, s: f64, rho: f64) -> Result<ResistanceEnvelope> {
    if samples.is_empty() || samples.iter().any(|&(d, r)| !(d > 0.0) || !(r > 0.0)) {
        return Err(Error::InsufficientScales("envelope needs positive distances and resistances".into()));
    }
    let added = s.ln() / rho.ln();
    let (eta_sub, eta_star) = (added.min(theta), added.max(theta));
    let c1 = samples.iter().map(|&(d, r)| r / d.powf(eta_star)).fold(f64::INFINITY, f64::min);
    let c2 = samples.iter().map(|&(d, r)| r / d.powf(eta_sub)).fold(0.0, f64::max);
    Ok(ResistanceEnvelope { theta, eta_star, eta_sub, c1, c2 })
}

/// All-pairs `(distance, resistance)` samples of a level form.
pub fn level_samples(geom: &LevelGeometry, lf: &LevelForm) -> Result<Vec<(f64, f64)>> {
    let r = resistance_matrix(&lf.form)?;
    let mut out = Vec::new();
    for x in 0..geom.size() {
        for y in x + 1..geom.size() {
            out.push((geom.vertices[x].dist(&geom.vertices[y]), r[(x, y)]));
        }
    }
    Ok(out)
}

/// The trace of the form onto the boundary set together with the bottom-edge
/// points `x_j = (2^{-j}, 0)` and `y_j = (1 − 2^{-j}, 0)`, `j ≤ k`.
#[derive(Clone, Debug)]
pub struct NestedBoundary {
    pub points: Vec<Point>,
    pub form: FiniteForm,
    /// `x[j]` is the index of `x_j`; `x[0]` is `p2`.
    pub x: Vec<usize>,
    /// `y[j]` is the index of `y_j`; `y[0]` is `p3`.
    pub y: Vec<usize>,
}

/// Glues copies `(points, form, weight)` under `F_1..F_4` and traces onto `keep`.
fn glue_and_trace(ifs: &Ifs, copies: [(&[Point], &FiniteForm, f64); 4], keep: &[Point]) -> Result<FiniteForm> {
    let mut ids: HashMap<Point, usize> = HashMap::new();
    let mut edges = Vec::new();
    for (i, (pts, form, weight)) in copies.into_iter().enumerate() {
        let f = ifs.map(i as u8 + 1);
        let local: Vec<usize> = pts
            .iter()
            .map(|p| {
                let next = ids.len();
                *ids.entry(f.apply(p)).or_insert(next)
            })
            .collect();
        for (a, b, c) in form.edges() {
            edges.push((local[a], local[b], c / weight));
        }
    }
    let mut glued = FiniteForm::new(ids.len());
    for (a, b, c) in edges {
        glued.add(a, b, c)?;
    }
    let keep: Vec<usize> = keep
        .iter()
        .map(|p| ids.get(p).copied().ok_or_else(|| Error::IdentificationMismatch(format!("{p} is not glued"))))
        .collect::<Result<_>>()?;
    trace(&glued, &keep)
}

pub fn nested_boundary_form(ctx: &RenormContext, sol: &Solution, k: usize) -> Result<NestedBoundary> {
    let base: Vec<Point> = ctx.boundary().points.clone();
    let d = &sol.form.base;
    let w = sol.weights();
    let mut pts = base.clone();
    let mut form = d.clone();
    for j in 1..=k as u32 {
        let mut keep = pts.clone();
        let (x, y) = dyadic_bottom_points(j);
        for p in [x, y] {
            if !keep.contains(&p) {
                keep.push(p);
            }
        }
        form = glue_and_trace(
            ctx.ifs(),
            [(&base, d, w[0]), (&pts, &form, w[1]), (&pts, &form, w[2]), (&base, d, w[3])],
            &keep,
        )?;
        pts = keep;
    }
    let index = |p: &Point| pts.iter().position(|q| q == p).expect("kept");
    let [_, p2, p3] = corners();
    let mut x = vec![index(&p2)];
    let mut y = vec![index(&p3)];
    for j in 1..=k as u32 {
        let (xj, yj) = dyadic_bottom_points(j);
        x.push(index(&xj));
        y.push(index(&yj));
    }
    Ok(NestedBoundary { points: pts, form, x, y })
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingSample {
    pub distance: f64,
    pub resistance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingFit {
    pub theta_fit: f64,
    pub theta: f64,
    /// `min R/d^θ` and `max R/d^θ` over the samples.
    pub c1: f64,
    pub c2: f64,
    pub spread: f64,
    pub envelope: ResistanceEnvelope,
    pub samples: Vec<ScalingSample>,
}

/// Fits `R ≈ c·d^θ` on bottom-edge pairs `(p2, x_j)`, `(x_j, x_{j+1})`,
/// `(x_j, x_{j+2})` and their mirror images at `p3`, for `j ∈ levels`.
pub fn scaling_exponent(
    ctx: &RenormContext,
    sol: &Solution,
    levels: std::ops::RangeInclusive<usize>,
) -> Result<ScalingFit> {
    let (a, b) = (*levels.start(), *levels.end());
    if a == 0 || b < a || b - a + 1 < MIN_SCALES {
        return Err(Error::InsufficientScales(format!("levels {a}..{b} span fewer than {MIN_SCALES} scales")));
    }
    let nb = nested_boundary_form(ctx, sol, b + 2)?;
    let r = resistance_matrix(&nb.form)?;
    let mut samples = Vec::new();
    for chain in [&nb.x, &nb.y] {
        for j in a..=b {
            for (u, v) in [(chain[0], chain[j]), (chain[j], chain[j + 1]), (chain[j], chain[j + 2])] {
                let distance = nb.points[u].dist(&nb.points[v]);
                samples.push(ScalingSample { distance, resistance: r[(u, v)] });
            }
        }
    }
    let xs: Vec<f64> = samples.iter().map(|p| p.distance.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|p| p.resistance.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let theta_fit = sxy / sxx;
    let ratios = samples.iter().map(|p| p.resistance / p.distance.powf(sol.theta));
    let c1 = ratios.clone().fold(f64::INFINITY, f64::min);
    let c2 = ratios.fold(0.0, f64::max);
    let pairs: Vec<(f64, f64)> = samples.iter().map(|p| (p.distance, p.resistance)).collect();
    let envelope = resistance_envelope(&pairs, sol.theta, sol.s, ctx.ifs().rho())?;
    Ok(ScalingFit { theta_fit, theta: sol.theta, c1, c2, spread: c2 / c1, envelope, samples })
}

#[derive(Clone, Debug, Serialize)]
pub struct RBoundSample {
    pub lambda: String,
    pub s: f64,
    pub r: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RBound {
    pub max_r: f64,
    pub argmax: RBoundSample,
    pub samples: Vec<RBoundSample>,
}

/// `max r(λ, s)` over a parameter grid; rows for distinct `λ` run in parallel.
pub fn r_bound_scan(lambdas: &[BigRational], ss: &[f64], opts: &SolveOptions) -> Result<RBound> {
    if lambdas.is_empty() || ss.is_empty() {
        return Err(Error::Domain("empty parameter grid".into()));
    }
    let rows: Vec<Vec<RBoundSample>> = lambdas
        .par_iter()
        .map(|l| {
            let ctx = RenormContext::new(&crate::geometry::make_ifs(l)?)?;
            ss.iter()
                .map(|&s| Ok(RBoundSample { lambda: rational_string(l), s, r: solve_r(&ctx, s, opts)?.r }))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let samples: Vec<RBoundSample> = rows.into_iter().flatten().collect();
    let argmax = samples.iter().max_by(|a, b| a.r.total_cmp(&b.r)).cloned().expect("nonempty");
    Ok(RBound { max_r: argmax.r, argmax, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::{level_form, resistance_metric};
    use crate::geometry::make_ifs;
    use crate::scalar::ratio;

    fn setup(a: i64, b: i64, s: f64) -> (RenormContext, Solution) {
        let ctx = RenormContext::new(&make_ifs(&ratio(a, b)).unwrap()).unwrap();
        let sol = solve_r(&ctx, s, &SolveOptions::default()).unwrap();
        (ctx, sol)
    }

    #[test]
    fn nested_traces_match_level_forms() {
        for (a, b) in [(1, 4), (3, 16)] {
            let (ctx, sol) = setup(a, b, 0.5);
            let k = 4;
            let nb = nested_boundary_form(&ctx, &sol, k).unwrap();
            let geom = LevelGeometry::new(&ctx, k + 1).unwrap();
            let lf = level_form(&geom, &sol).unwrap();
            let ids: Vec<usize> = nb.points.iter().map(|p| geom.vertex_id(p).unwrap()).collect();
            let expected = trace(&lf.form, &ids).unwrap();
            assert!(expected.relative_difference(&nb.form) < 1e-9, "lambda {a}/{b}");
        }
    }

    #[test]
    fn quarter_exponent() {
        let (ctx, sol) = setup(1, 4, 0.5);
        let fit = scaling_exponent(&ctx, &sol, 4..=9).unwrap();
        assert_eq!(fit.samples.len(), 36);
        assert!((fit.theta_fit - fit.theta).abs() <= 0.15, "{} vs {}", fit.theta_fit, fit.theta);
        assert!(fit.spread <= 50.0);
        for p in &fit.samples {
            assert!(fit.envelope.contains(p.distance, p.resistance));
        }
        assert!(matches!(scaling_exponent(&ctx, &sol, 4..=6), Err(Error::InsufficientScales(_))));
    }

    #[test]
    fn envelope_on_level_samples() {
        let (ctx, sol) = setup(1, 8, 0.3);
        let geom = LevelGeometry::new(&ctx, 3).unwrap();
        let lf = level_form(&geom, &sol).unwrap();
        let samples = level_samples(&geom, &lf).unwrap();
        let env = resistance_envelope(&samples, sol.theta, sol.s, ctx.ifs().rho()).unwrap();
        assert!(env.eta_sub <= env.eta_star);
        assert!(env.c1 > 0.0 && env.c2.is_finite());
        assert!(samples.iter().all(|&(d, r)| env.contains(d, r)));
        let [p1, p2, _] = geom.corner_ids();
        let direct = resistance_metric(&lf, &[(p1, p2)]).unwrap()[0];
        assert!((direct - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn r_bound_small_grid() {
        let bound = r_bound_scan(&[ratio(1, 4), ratio(3, 8)], &[0.3, 0.9], &SolveOptions::default()).unwrap();
        assert_eq!(bound.samples.len(), 4);
        assert!(bound.max_r < 1.0 - 1e-3);
        assert!(bound.samples.iter().all(|x| x.r <= bound.max_r));
    }
}
