//! Renormalization of boundary forms: the glue-and-trace map, its
//! eigenproblem, and the bisection for the corner-cell weight.

use std::collections::HashMap;

use num::rational::BigRational;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{boundary_set, corners, rational_string, BoundaryMode, BoundarySet, Edge, Ifs, Label};
use crate::network::{effective_resistance, trace, FiniteForm};
use crate::scalar::{ratio, Point};

mod relations;

pub use relations::{enumerate_preserved_relations, preserved_closure, Relation, DEFAULT_RELATION_GUARD};

/// Resistance between `p1` and `p2` in a normalized boundary form.
pub const NORMALIZED_RESISTANCE: f64 = 2.0 / 3.0;

/// Lower end of the admissible eigenvalue range.
pub const SG_EIGENVALUE: f64 = 0.6;

const RANGE_SLACK: f64 = 1e-9;

/// Copy weights `(r_1, r_2, r_3, r_4)`; an infinite `r_4` drops the added cell.
pub type Weights = [f64; 4];

/// A form on the boundary set, with a flag recording that it was verified
/// invariant under the rotation group.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryForm {
    pub base: FiniteForm,
    pub symmetric: bool,
}

/// The glued level-one vertex set of one IFS, built once and reused by every
/// application of the renormalization map.
#[derive(Clone, Debug)]
pub struct RenormContext {
    ifs: Ifs,
    boundary: BoundarySet,
    points: Vec<Point>,
    copies: [Vec<usize>; 4],
    corner_cells: usize,
    group: Vec<Vec<usize>>,
}

impl RenormContext {
    pub fn new(ifs: &Ifs) -> Result<Self> {
        let boundary = boundary_set(ifs, BoundaryMode::default())?;
        Self::with_boundary(ifs, boundary)
    }

    pub fn with_boundary(ifs: &Ifs, boundary: BoundarySet) -> Result<Self> {
        let n0 = boundary.size();
        let mut points: Vec<Point> = boundary.points.clone();
        let mut index: HashMap<Point, usize> =
            points.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        let mut copies: [Vec<usize>; 4] = Default::default();
        let mut corner_cells = 0;
        for i in 1..=4u8 {
            let f = ifs.map(i);
            copies[i as usize - 1] = boundary
                .points
                .iter()
                .map(|p| {
                    let q = f.apply(p);
                    *index.entry(q.clone()).or_insert_with(|| {
                        points.push(q);
                        points.len() - 1
                    })
                })
                .collect();
            if i == 3 {
                corner_cells = points.len();
            }
        }
        let expected = 4 * n0 - 6;
        if points.len() != expected || corner_cells != 3 * n0 - 3 {
            return Err(Error::IdentificationMismatch(format!(
                "glued {} points, expected {expected}",
                points.len()
            )));
        }
        for k in 0..n0 {
            if !copies[..3].iter().any(|c| c.contains(&k)) {
                return Err(Error::IdentificationMismatch(format!(
                    "boundary point {} is not covered by the corner cells",
                    boundary.points[k]
                )));
            }
        }
        let rot = boundary.rotation();
        let rot2: Vec<usize> = rot.iter().map(|&i| rot[i]).collect();
        let group = vec![(0..n0).collect(), rot, rot2];
        Ok(RenormContext { ifs: ifs.clone(), boundary, points, copies, corner_cells, group })
    }

    /// Context on the corners alone with the three corner cells only: the
    /// plain gasket, where only an infinite `r_4` is meaningful.
    pub fn gasket(ifs: &Ifs) -> Result<Self> {
        let boundary = BoundarySet::from_points(corners().iter())?;
        let mut points: Vec<Point> = boundary.points.clone();
        let mut index: HashMap<Point, usize> =
            points.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        let mut copies: [Vec<usize>; 4] = Default::default();
        for i in 1..=3u8 {
            copies[i as usize - 1] = corners()
                .iter()
                .map(|p| {
                    let q = ifs.map(i).apply(p);
                    *index.entry(q.clone()).or_insert_with(|| {
                        points.push(q);
                        points.len() - 1
                    })
                })
                .collect();
        }
        let corner_cells = points.len();
        let rot = boundary.rotation();
        let rot2: Vec<usize> = rot.iter().map(|&i| rot[i]).collect();
        let group = vec![(0..3).collect(), rot, rot2];
        Ok(RenormContext { ifs: ifs.clone(), boundary, points, copies, corner_cells, group })
    }

    pub fn ifs(&self) -> &Ifs {
        &self.ifs
    }

    pub fn boundary(&self) -> &BoundarySet {
        &self.boundary
    }

    pub fn boundary_size(&self) -> usize {
        self.boundary.size()
    }

    /// Points of the glued vertex set; the boundary set comes first.
    pub fn glued_points(&self) -> &[Point] {
        &self.points
    }

    /// Glued index of `F_i(x)` for boundary index `x`.
    pub fn copy_index(&self, i: u8, x: usize) -> usize {
        self.copies[i as usize - 1][x]
    }

    /// The rotation group as permutations of boundary indices.
    pub fn group(&self) -> &[Vec<usize>] {
        &self.group
    }

    /// Unit conductances between neighbours along `∂▲`.
    pub fn boundary_cycle(&self) -> FiniteForm {
        let n = self.boundary_size();
        let params = self.boundary.params();
        let mut f = FiniteForm::new(n);
        // walk each edge from its start corner: Bottom p2→p3, Right p3→p1, Left p1→p2
        for (e, start, end) in [(0usize, 1usize, 2usize), (1, 2, 0), (2, 0, 1)] {
            let mut prev = start;
            for k in 0..params.len() {
                let v = 3 + 3 * k + e;
                f.set(prev, v, 1.0).expect("indices in range");
                prev = v;
            }
            f.set(prev, end, 1.0).expect("indices in range");
        }
        f
    }

    /// A rotation-symmetric random complete form.
    pub fn random_symmetric<R: Rng>(&self, rng: &mut R) -> FiniteForm {
        let n = self.boundary_size();
        let mut f = FiniteForm::new(n);
        for x in 0..n {
            for y in x + 1..n {
                f.set(x, y, rng.gen_range(0.1..2.0)).expect("positive");
            }
        }
        f.symmetrized(&self.group)
    }

    pub fn symmetrize(&self, form: &FiniteForm) -> FiniteForm {
        form.symmetrized(&self.group)
    }

    pub fn asymmetry(&self, form: &FiniteForm) -> f64 {
        form.asymmetry(&self.group)
    }

    pub fn certify(&self, form: FiniteForm) -> BoundaryForm {
        let symmetric = self.asymmetry(&form) <= 1e-12;
        BoundaryForm { base: form, symmetric }
    }
}

fn check_weights(weights: &Weights) -> Result<()> {
    for (i, &w) in weights.iter().enumerate() {
        let ok = if i == 3 { w > 0.0 } else { w > 0.0 && w.is_finite() };
        if !ok {
            return Err(Error::BadWeights(format!("r_{} = {w}", i + 1)));
        }
    }
    Ok(())
}

/// Four copies of `d`, the `i`-th multiplied by `1/r_i`, on the glued vertex set.
pub fn glue_level_one(ctx: &RenormContext, d: &FiniteForm, weights: &Weights) -> Result<FiniteForm> {
    check_weights(weights)?;
    if d.size() != ctx.boundary_size() {
        return Err(Error::MismatchedVertexSets);
    }
    let with_added = weights[3].is_finite();
    if with_added && ctx.copies[3].is_empty() {
        return Err(Error::BadWeights("this context has no added cell; r_4 must be infinite".into()));
    }
    let n = if with_added { ctx.points.len() } else { ctx.corner_cells };
    let mut g = FiniteForm::new(n);
    for i in 0..if with_added { 4 } else { 3 } {
        let map = &ctx.copies[i];
        let w = 1.0 / weights[i];
        for (x, y, c) in d.edges() {
            g.add(map[x], map[y], w * c)?;
        }
    }
    Ok(g)
}

/// `Λ_r D`: the glued form traced back onto the boundary set.
pub fn renorm_map(ctx: &RenormContext, d: &FiniteForm, weights: &Weights) -> Result<FiniteForm> {
    let keep: Vec<usize> = (0..ctx.boundary_size()).collect();
    trace(&glue_level_one(ctx, d, weights)?, &keep)
}

/// `R_D(p1, p2)`.
pub fn corner_resistance(d: &FiniteForm) -> Result<f64> {
    effective_resistance(d, 0, 1)
}

/// Scales `d` so that `R(p1, p2) = 2/3`.
pub fn normalize(d: &FiniteForm) -> Result<FiniteForm> {
    let r = corner_resistance(d)?;
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::DegenerateLimit(format!("R(p1,p2) = {r}")));
    }
    Ok(d.scaled(r / NORMALIZED_RESISTANCE))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { tol: 1e-12, max_iters: 10_000 }
    }
}

/// Fixed point of the normalized map `D ↦ normalize(Λ_w D)`.
#[derive(Clone, Debug)]
pub struct PowerLimit {
    /// Scale factor `Λ_w D = factor · D` at the limit.
    pub factor: f64,
    pub form: FiniteForm,
    pub iterations: usize,
    pub last_change: f64,
}

/// Iterates `D ← normalize(Λ_w D)`, symmetrizing after every step.
pub fn power_iterate(
    ctx: &RenormContext,
    weights: &Weights,
    start: &FiniteForm,
    opts: &EigenOptions,
) -> Result<PowerLimit> {
    let mut d = normalize(&ctx.symmetrize(start))?;
    let mut change = f64::INFINITY;
    for it in 1..=opts.max_iters {
        let image = renorm_map(ctx, &d, weights)?;
        let next = normalize(&ctx.symmetrize(&image))?;
        change = next.relative_difference(&d);
        d = next;
        if change < opts.tol {
            let image = renorm_map(ctx, &d, weights)?;
            let factor = corner_resistance(&d)? / corner_resistance(&image)?;
            check_nondegenerate(&d)?;
            return Ok(PowerLimit { factor, form: d, iterations: it, last_change: change });
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iters, last_change: change })
}

fn check_nondegenerate(d: &FiniteForm) -> Result<()> {
    let max = d.edges().map(|(_, _, c)| c).fold(0.0, f64::max);
    let significant =
        FiniteForm::from_edges(d.size(), d.edges().filter(|&(_, _, c)| c > 1e-10 * max))?;
    if significant.is_connected() {
        Ok(())
    } else {
        Err(Error::DegenerateLimit("limit form is disconnected".into()))
    }
}

/// Eigenpair of `Λ_(1,1,1,r̃4)`.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub c: f64,
    pub form: BoundaryForm,
    pub iterations: usize,
}

pub fn eigen_solve(ctx: &RenormContext, rtilde4: f64, opts: &EigenOptions) -> Result<Eigen> {
    eigen_solve_from(ctx, rtilde4, &ctx.boundary_cycle(), opts)
}

pub fn eigen_solve_from(
    ctx: &RenormContext,
    rtilde4: f64,
    start: &FiniteForm,
    opts: &EigenOptions,
) -> Result<Eigen> {
    let lim = power_iterate(ctx, &[1.0, 1.0, 1.0, rtilde4], start, opts)?;
    let c = lim.factor;
    if !(SG_EIGENVALUE - RANGE_SLACK..1.0).contains(&c) {
        return Err(Error::BoundViolation(format!("eigenvalue {c} outside [3/5, 1)")));
    }
    Ok(Eigen { c, form: ctx.certify(lim.form), iterations: lim.iterations })
}

/// `inf` and `sup` of `ΛD(f)/D(f)` over random non-constant `f`.
pub fn rayleigh_range<R: Rng>(
    ctx: &RenormContext,
    d: &FiniteForm,
    weights: &Weights,
    samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let image = renorm_map(ctx, d, weights)?;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..samples {
        let f: Vec<f64> = (0..d.size()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let q = image.energy(&f) / d.energy(&f);
        lo = lo.min(q);
        hi = hi.max(q);
    }
    Ok((lo, hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolveOptions {
    pub eigen: EigenOptions,
    pub bisect_tol: f64,
    pub max_expansions: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { eigen: EigenOptions::default(), bisect_tol: 1e-10, max_expansions: 60 }
    }
}

/// The solved self-similar structure for one `(λ, s)`.
#[derive(Clone, Debug)]
pub struct Solution {
    pub lambda: BigRational,
    pub s: f64,
    pub r: f64,
    pub c: f64,
    pub rtilde4: f64,
    pub theta: f64,
    pub residual: f64,
    pub form: BoundaryForm,
    pub boundary: BoundarySet,
    /// Non-dyadic `λ`, where uniqueness of the eigenform is not guaranteed.
    pub experimental: bool,
}

#[derive(Serialize)]
struct SolutionRecord<'a> {
    lambda: String,
    s: f64,
    r: f64,
    #[serde(rename = "C")]
    c: f64,
    rtilde4: f64,
    theta: f64,
    residual: f64,
    experimental: bool,
    boundary_labels: &'a [Label],
    boundary_form: serde_json::Value,
}

impl Solution {
    /// Copy weights `(r, r, r, s)`.
    pub fn weights(&self) -> Weights {
        [self.r, self.r, self.r, self.s]
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rec = SolutionRecord {
            lambda: rational_string(&self.lambda),
            s: self.s,
            r: self.r,
            c: self.c,
            rtilde4: self.rtilde4,
            theta: self.theta,
            residual: self.residual,
            experimental: self.experimental,
            boundary_labels: &self.boundary.labels,
            boundary_form: self.form.base.to_json(),
        };
        serde_json::to_value(rec).expect("solution record serializes")
    }
}

pub fn theta_of(r: f64) -> f64 {
    -r.ln() / 2f64.ln()
}

/// Solves `r̃·C(r̃) = s` by bisection and returns the normalized fixed point of
/// `Λ_(r,r,r,s)` with `r = C(r̃)`.
pub fn solve_r(ctx: &RenormContext, s: f64, opts: &SolveOptions) -> Result<Solution> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("s must lie in (0,1), got {s}")));
    }
    let mut warm = ctx.boundary_cycle();
    let eval = |rt: f64, warm: &mut FiniteForm| -> Result<Eigen> {
        let e = eigen_solve_from(ctx, rt, warm, &opts.eigen)?;
        *warm = e.form.base.clone();
        Ok(e)
    };
    // C ∈ [3/5, 1) places the root in (s, s/0.6]
    let (mut lo, mut hi) = (s, s / SG_EIGENVALUE);
    let mut e_lo = eval(lo, &mut warm)?;
    let mut expansions = 0;
    while lo * e_lo.c > s {
        expansions += 1;
        if expansions > opts.max_expansions {
            return Err(Error::BracketFailure(format!("no lower bracket below {lo}")));
        }
        lo /= 2.0;
        e_lo = eval(lo, &mut warm)?;
    }
    let mut e_hi = eval(hi, &mut warm)?;
    while hi * e_hi.c < s {
        expansions += 1;
        if expansions > opts.max_expansions {
            return Err(Error::BracketFailure(format!("no upper bracket above {hi}")));
        }
        hi *= 2.0;
        e_hi = eval(hi, &mut warm)?;
    }
    let (mut best_rt, mut best) = if (lo * e_lo.c - s).abs() <= (hi * e_hi.c - s).abs() {
        (lo, e_lo)
    } else {
        (hi, e_hi)
    };
    while (best_rt * best.c - s).abs() > opts.bisect_tol && hi - lo > f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        let e = eval(mid, &mut warm)?;
        let g = mid * e.c;
        if g < s {
            lo = mid;
        } else {
            hi = mid;
        }
        if (g - s).abs() < (best_rt * best.c - s).abs() {
            best_rt = mid;
            best = e;
        }
    }
    if (best_rt * best.c - s).abs() > opts.bisect_tol {
        return Err(Error::BracketFailure(format!(
            "bisection stalled at |g - s| = {:e}",
            (best_rt * best.c - s).abs()
        )));
    }
    let r = best.c;
    let d = best.form.base.clone();
    let residual = renorm_map(ctx, &d, &[r, r, r, s])?.relative_difference(&d);
    Ok(Solution {
        lambda: ctx.ifs.lambda().clone(),
        s,
        r,
        c: best.c,
        rtilde4: best_rt,
        theta: theta_of(r),
        residual,
        form: best.form,
        boundary: ctx.boundary.clone(),
        experimental: !ctx.ifs.is_dyadic(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanEntry {
    pub r_prime: f64,
    pub factor: f64,
}

/// Per-step energy scale of `D ↦ normalize(Λ_(r',r',r',s) D)` at its limit,
/// for each `r'` on the grid.
pub fn uniqueness_scan(
    ctx: &RenormContext,
    sol: &Solution,
    grid: &[f64],
    opts: &EigenOptions,
) -> Result<Vec<ScanEntry>> {
    grid.iter()
        .map(|&rp| {
            if !(rp > 0.0) {
                return Err(Error::BadWeights(format!("r' = {rp}")));
            }
            let lim = power_iterate(ctx, &[rp, rp, rp, sol.s], &sol.form.base, opts)?;
            Ok(ScanEntry { r_prime: rp, factor: lim.factor })
        })
        .collect()
}

/// Index of `Edge::Bottom` point with parameter `t` in the boundary set.
pub fn bottom_index(ctx: &RenormContext, t: &BigRational) -> Option<usize> {
    ctx.boundary.index_of(&Edge::Bottom.point(t))
}

/// `q_1 = (2λ, 0)`, the boundary point glued to `F_4(p_1)`.
pub fn contact_parameter(ctx: &RenormContext) -> BigRational {
    ctx.ifs.lambda() * ratio(2, 1)
}
