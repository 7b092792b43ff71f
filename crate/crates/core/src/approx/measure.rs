use serde::Serialize;

use super::LevelGeometry;
use crate::error::{Error, Result};
use crate::geometry::Ifs;

const WEIGHT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum MeasureScheme {
    /// `μ_i = ratio_i^d` with `d` the similarity dimension.
    Hausdorff,
    Uniform,
    Custom([f64; 4]),
}

#[derive(Clone, Debug, Serialize)]
pub struct MeasureSpec {
    pub scheme: String,
    pub weights: [f64; 4],
    pub dimension: Option<f64>,
}

/// Root of `3·2^{-d} + ρ^d = 1`.
pub fn hausdorff_dimension(rho: f64) -> f64 {
    let g = |d: f64| 3.0 * 0.5f64.powf(d) + rho.powf(d) - 1.0;
    let (mut lo, mut hi) = (1.0, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn measure_weights(ifs: &Ifs, scheme: &MeasureScheme) -> Result<MeasureSpec> {
    match scheme {
        MeasureScheme::Hausdorff => {
            let d = hausdorff_dimension(ifs.rho());
            let h = 0.5f64.powf(d);
            Ok(MeasureSpec { scheme: "hausdorff".into(), weights: [h, h, h, ifs.rho().powf(d)], dimension: Some(d) })
        }
        MeasureScheme::Uniform => Ok(MeasureSpec { scheme: "uniform".into(), weights: [0.25; 4], dimension: None }),
        MeasureScheme::Custom(w) => {
            if w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(Error::BadWeights("measure weights must be positive".into()));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > WEIGHT_TOLERANCE {
                return Err(Error::BadWeights(format!("measure weights sum to {total}")));
            }
            Ok(MeasureSpec { scheme: "custom".into(), weights: *w, dimension: None })
        }
    }
}

/// Each cell spreads `μ_w` equally over its three corners.
pub fn vertex_masses(geom: &LevelGeometry, spec: &MeasureSpec) -> Vec<f64> {
    let mut m = vec![0.0; geom.size()];
    for cell in &geom.cells {
        let mu: f64 = cell.word.letters().iter().map(|&l| spec.weights[l as usize - 1]).product();
        for &c in &cell.corners {
            m[c] += mu / 3.0;
        }
    }
    let total: f64 = m.iter().sum();
    m.iter().map(|x| x / total).collect()
}
