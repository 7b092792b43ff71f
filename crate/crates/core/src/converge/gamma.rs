use std::ops::RangeInclusive;

use num::rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;

use super::{dyadic_schedule, harmonic_energy, ser_rational, solve_level, ReportOptions};
use crate::approx::LevelGeometry;
use crate::error::Result;
use crate::scalar::format_float;

const MINIMALITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct GammaRow {
    pub n: u32,
    #[serde(serialize_with = "ser_rational")]
    pub lambda: BigRational,
    /// Energy of the harmonic extension at `λ_n`.
    pub energy: f64,
    /// Energy at `λ_n` of the final harmonic extension transplanted by address.
    pub transplanted: f64,
    pub minimal: bool,
}

/// Finite-level proxy for Γ-convergence along a dyadic schedule.
#[derive(Clone, Debug, Serialize)]
pub struct GammaTable {
    pub level: usize,
    pub data: [f64; 3],
    pub rows: Vec<GammaRow>,
    pub differences: Vec<f64>,
}

impl GammaTable {
    pub fn all_minimal(&self) -> bool {
        self.rows.iter().all(|r| r.minimal)
    }

    pub fn final_difference(&self) -> f64 {
        self.differences.last().copied().unwrap_or(0.0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,lambda_num,lambda_den,energy,transplanted,minimal,diff_energy\n");
        for (k, r) in self.rows.iter().enumerate() {
            let diff = if k > 0 { format_float(self.differences[k - 1]) } else { String::new() };
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.n,
                r.lambda.numer(),
                r.lambda.denom(),
                format_float(r.energy),
                format_float(r.transplanted),
                r.minimal,
                diff
            ));
        }
        out
    }
}

/// First `(cell, corner)` address of every vertex.
fn addresses(geom: &LevelGeometry) -> Vec<(usize, usize)> {
    let mut out = vec![(usize::MAX, 0); geom.size()];
    for (k, cell) in geom.cells.iter().enumerate() {
        for (j, &v) in cell.corners.iter().enumerate() {
            if out[v].0 == usize::MAX {
                out[v] = (k, j);
            }
        }
    }
    out
}

/// Harmonic energies of corner data `f` along the schedule, and the energy at
/// each `λ_n` of the last step's harmonic extension moved over by
/// `(word, corner)` addresses, which can never undercut the harmonic energy.
pub fn gamma_diagnostic(
    target: f64,
    s: f64,
    n_range: RangeInclusive<u32>,
    f: [f64; 3],
    m: usize,
    opts: &ReportOptions,
) -> Result<GammaTable> {
    let schedule = dyadic_schedule(target, n_range)?;
    let levels = schedule
        .entries
        .par_iter()
        .map(|e| solve_level(&e.lambda, s, m, &opts.solve))
        .collect::<Result<Vec<_>>>()?;
    let last = levels.last().expect("nonempty schedule");
    let (h_last, _) = harmonic_energy(last, f)?;
    let rows = schedule
        .entries
        .iter()
        .zip(&levels)
        .map(|(e, lv)| {
            let (_, energy) = harmonic_energy(lv, f)?;
            let g: Vec<f64> = addresses(&lv.geom)
                .into_iter()
                .map(|(k, j)| h_last[last.geom.cells[k].corners[j]])
                .collect();
            let transplanted = lv.form.form.energy(&g);
            let minimal = transplanted >= energy - MINIMALITY_TOL * energy.max(1.0);
            Ok(GammaRow { n: e.n, lambda: e.lambda.clone(), energy, transplanted, minimal })
        })
        .collect::<Result<Vec<_>>>()?;
    let differences = rows.windows(2).map(|w| (w[1].energy - w[0].energy).abs()).collect();
    Ok(GammaTable { level: m, data: f, rows, differences })
}
