//! Level-`m` realizations of a solved self-similar form, measures, and the
//! resistance estimates.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{corners, Edge, Ifs, Similarity, Word, DEFAULT_LEVEL_CAP};
use crate::network::{
    effective_resistance_to_set, harmonic_extension, reduce, resistance_matrix, resolvent, trace,
    FiniteForm, ResolventKernel,
};
use crate::renorm::{RenormContext, Solution};
use crate::scalar::Point;

mod measure;
mod scaling;

pub use measure::{hausdorff_dimension, measure_weights, vertex_masses, MeasureScheme, MeasureSpec};
pub use scaling::{
    level_samples, nested_boundary_form, r_bound_scan, resistance_envelope, scaling_exponent, NestedBoundary,
    RBound, RBoundSample, ResistanceEnvelope, ScalingFit, ScalingSample,
};

/// One level-`m` cell: `F_w`, its boundary-set points that are level-`m`
/// vertices (as a bitmask over boundary indices) and their vertex ids.
#[derive(Clone, Debug)]
pub struct LevelCell {
    pub word: Word,
    pub mask: u64,
    pub ids: Vec<usize>,
    pub corners: [usize; 3],
}

/// The vertex set `V_m` together with the cell structure needed to realize
/// forms on it. Vertex ids follow the ordering of the approximation graph.
#[derive(Clone, Debug)]
pub struct LevelGeometry {
    pub level: usize,
    pub vertices: Vec<Point>,
    pub cells: Vec<LevelCell>,
    ifs: Ifs,
    index: HashMap<Point, usize>,
}

impl LevelGeometry {
    pub fn new(ctx: &RenormContext, m: usize) -> Result<Self> {
        if m > DEFAULT_LEVEL_CAP {
            return Err(Error::CapExceeded { what: format!("level {m}"), cap: DEFAULT_LEVEL_CAP });
        }
        let ifs = ctx.ifs();
        let boundary = ctx.boundary();
        if boundary.size() > 64 {
            return Err(Error::CapExceeded { what: "boundary set size".into(), cap: 64 });
        }
        let mut words = vec![Word::empty()];
        let mut maps = vec![Similarity::identity()];
        for _ in 0..m {
            let mut nw = Vec::with_capacity(words.len() * 4);
            let mut nm = Vec::with_capacity(maps.len() * 4);
            for (w, f) in words.iter().zip(&maps) {
                for l in 1..=4u8 {
                    nw.push(w.child(l));
                    nm.push(f.compose(ifs.map(l)));
                }
            }
            words = nw;
            maps = nm;
        }
        let base = corners();
        let mut vertices = Vec::new();
        let mut index: HashMap<Point, usize> = HashMap::new();
        let mut cell_corners = Vec::with_capacity(maps.len());
        for f in &maps {
            cell_corners.push([0, 1, 2].map(|i| {
                let p = f.apply(&base[i]);
                *index.entry(p.clone()).or_insert_with(|| {
                    vertices.push(p);
                    vertices.len() - 1
                })
            }));
        }
        let mut cells = Vec::with_capacity(maps.len());
        for ((word, f), corners) in words.into_iter().zip(&maps).zip(cell_corners) {
            let mut mask = 0u64;
            let mut ids = Vec::new();
            for (k, p) in boundary.points.iter().enumerate() {
                let id = if k < 3 { Some(corners[k]) } else { index.get(&f.apply(p)).copied() };
                if let Some(id) = id {
                    mask |= 1 << k;
                    ids.push(id);
                }
            }
            cells.push(LevelCell { word, mask, ids, corners });
        }
        Ok(LevelGeometry { level: m, vertices, cells, ifs: ifs.clone(), index })
    }

    pub fn size(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_id(&self, p: &Point) -> Option<usize> {
        self.index.get(p).copied()
    }

    /// Id of `F_w(p_i)`, `i ∈ 1..=3`.
    pub fn address_id(&self, w: &Word, corner: usize) -> Result<usize> {
        if !(1..=3).contains(&corner) {
            return Err(Error::UnknownVertex(format!("corner {corner}")));
        }
        if w.len() > self.level {
            return Err(Error::TrackingError(format!("word {w} is deeper than level {}", self.level)));
        }
        let p = self.ifs.apply_word(w, &corners()[corner - 1]);
        self.vertex_id(&p).ok_or_else(|| Error::TrackingError(format!("F_{w}(p{corner}) not in V_{}", self.level)))
    }

    pub fn corner_ids(&self) -> [usize; 3] {
        corners().map(|c| self.index[&c])
    }

    /// Ids of the vertices on the bottom edge `[p2, p3]`.
    pub fn bottom_edge(&self) -> Vec<usize> {
        (0..self.size()).filter(|&v| self.vertices[v].y.is_zero()).collect()
    }

    pub fn contains_all(&self, pts: &[Point]) -> bool {
        pts.iter().all(|p| self.index.contains_key(p))
    }
}

/// `E^(m)` on `V_m`.
#[derive(Clone, Debug)]
pub struct LevelForm {
    pub level: usize,
    pub form: FiniteForm,
}

/// Sums `r_w⁻¹ [D]_{P_w}` over the level-`m` cells, where `P_w` are the
/// boundary-set points of the cell that are level-`m` vertices; every other
/// cell point belongs to that cell alone, so this is the trace onto `V_m`.
pub fn level_form(geom: &LevelGeometry, sol: &Solution) -> Result<LevelForm> {
    let d = &sol.form.base;
    let mut traced: HashMap<u64, FiniteForm> = HashMap::new();
    let mut form = FiniteForm::new(geom.size());
    for cell in &geom.cells {
        let part = match traced.get(&cell.mask) {
            Some(p) => p,
            None => {
                let keep: Vec<usize> = (0..d.size()).filter(|k| cell.mask >> k & 1 == 1).collect();
                traced.entry(cell.mask).or_insert(trace(d, &keep)?)
            }
        };
        let w = 1.0 / cell.word.weight(sol.r, sol.s);
        for (a, b, c) in part.edges() {
            form.add(cell.ids[a], cell.ids[b], w * c)?;
        }
    }
    Ok(LevelForm { level: geom.level, form })
}

/// Effective resistances of `pairs` of level vertex ids.
pub fn resistance_metric(lf: &LevelForm, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    let n = lf.form.size();
    let mut keep: Vec<usize> = Vec::new();
    for &(x, y) in pairs {
        for v in [x, y] {
            if v >= n {
                return Err(Error::UnknownVertex(v.to_string()));
            }
            if !keep.contains(&v) {
                keep.push(v);
            }
        }
    }
    if keep.is_empty() {
        return Ok(Vec::new());
    }
    let r = resistance_matrix(reduce(&lf.form, &keep)?.form())?;
    let pos = |v: usize| keep.iter().position(|&k| k == v).expect("kept");
    Ok(pairs.iter().map(|&(x, y)| r[(pos(x), pos(y))]).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryCheck {
    pub level: usize,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `R(p1, V_m ∩ ∂↓▲)` against `(1/2)·s·r/(s + r)`.
pub fn boundary_resistance_check(geom: &LevelGeometry, lf: &LevelForm, sol: &Solution) -> Result<BoundaryCheck> {
    if geom.level == 0 {
        return Err(Error::Domain("the boundary check needs m ≥ 1".into()));
    }
    let p1 = geom.corner_ids()[0];
    let value = effective_resistance_to_set(&lf.form, p1, &geom.bottom_edge())?;
    let bound = 0.5 * sol.s * sol.r / (sol.s + sol.r);
    Ok(BoundaryCheck { level: geom.level, value, bound, pass: value >= bound })
}

pub fn resolvent_kernel(
    geom: &LevelGeometry,
    lf: &LevelForm,
    spec: &MeasureSpec,
    alpha: f64,
) -> Result<ResolventKernel> {
    resolvent(&lf.form, &vertex_masses(geom, spec), alpha)
}

/// Harmonic extension of corner data over `V_m`.
pub fn harmonic_from_corners(geom: &LevelGeometry, lf: &LevelForm, data: [f64; 3]) -> Result<Vec<f64>> {
    harmonic_extension(&lf.form, &geom.corner_ids(), &data)
}

#[derive(Clone, Debug, Serialize)]
pub struct DecimationCheck {
    pub level: usize,
    pub depth: usize,
    /// `E^(m)(h)`.
    pub energy: f64,
    /// `Σ_i r_i⁻¹ E^(m+d−1)(h∘F_i)`.
    pub decimated: f64,
    pub relative_error: f64,
}

/// Self-similarity of the level forms on a harmonic function: `h` is the
/// harmonic extension of `data` on `V_{m+d}`, `d` the depth at which the
/// boundary set is contained in `V_d`.
///
/// `geoms[k]` must be the level-`k` geometry for `k ≤ m + d`.
pub fn decimation_check(
    ctx: &RenormContext,
    geoms: &[LevelGeometry],
    sol: &Solution,
    m: usize,
    data: [f64; 3],
) -> Result<DecimationCheck> {
    let top = geoms.last().ok_or_else(|| Error::Domain("no geometries".into()))?;
    let pts = &ctx.boundary().points;
    let depth = geoms
        .iter()
        .position(|g| g.contains_all(pts))
        .ok_or_else(|| Error::Domain(format!("boundary set is not contained in V_{}", top.level)))?
        .max(1);
    let fine_level = m + depth;
    if fine_level >= geoms.len() {
        return Err(Error::CapExceeded { what: format!("level {fine_level}"), cap: geoms.len() - 1 });
    }
    let fine = &geoms[fine_level];
    let coarse = &geoms[fine_level - 1];
    let base = &geoms[m];
    let h = harmonic_from_corners(fine, &level_form(fine, sol)?, data)?;
    let restrict = |g: &LevelGeometry, map: Option<&Similarity>| -> Result<Vec<f64>> {
        g.vertices
            .iter()
            .map(|p| {
                let q = map.map_or_else(|| p.clone(), |f| f.apply(p));
                fine.vertex_id(&q).map(|id| h[id]).ok_or_else(|| Error::TrackingError(q.to_string()))
            })
            .collect()
    };
    let energy = level_form(base, sol)?.form.energy(&restrict(base, None)?);
    let coarse_form = level_form(coarse, sol)?;
    let weights = sol.weights();
    let mut decimated = 0.0;
    for i in 1..=4u8 {
        let hi = restrict(coarse, Some(ctx.ifs().map(i)))?;
        decimated += coarse_form.form.energy(&hi) / weights[i as usize - 1];
    }
    let relative_error = (decimated - energy).abs() / energy.abs().max(f64::MIN_POSITIVE);
    Ok(DecimationCheck { level: m, depth, energy, decimated, relative_error })
}

/// Unit-triangle corner data helper: `1` at `p_i`, `0` elsewhere.
pub fn corner_indicator(i: usize) -> [f64; 3] {
    let mut d = [0.0; 3];
    d[i - 1] = 1.0;
    d
}

/// Points `(2^{-j}, 0)` and `(1 − 2^{-j}, 0)` on the bottom edge.
pub fn dyadic_bottom_points(j: u32) -> (Point, Point) {
    let t = num::rational::BigRational::new(1.into(), num::BigInt::from(2).pow(j));
    let one = num::rational::BigRational::from_integer(1.into());
    (Edge::Bottom.point(&t), Edge::Bottom.point(&(one - t)))
}
