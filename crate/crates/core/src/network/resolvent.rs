use nalgebra::{DMatrix, DVector};

use super::FiniteForm;
use crate::error::{Error, Result};
use crate::scalar::format_float;

const MASS_TOLERANCE: f64 = 1e-12;

/// `u(x, ·)` solves `(L + α M) u = e_x` with `M = diag(masses)`.
#[derive(Clone, Debug)]
pub struct ResolventKernel {
    pub alpha: f64,
    pub masses: Vec<f64>,
    pub matrix: DMatrix<f64>,
}

impl ResolventKernel {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.matrix[(x, y)]
    }

    /// `Σ_y u(x, y) m_y`, which equals `1/α`.
    pub fn row_mass(&self, x: usize) -> f64 {
        (0..self.masses.len()).map(|y| self.matrix[(x, y)] * self.masses[y]).sum()
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    pub fn to_csv(&self) -> String {
        let n = self.masses.len();
        let mut out = String::from("x_id,y_id,u_alpha\n");
        for x in 0..n {
            for y in 0..n {
                out.push_str(&format!("{x},{y},{}\n", format_float(self.matrix[(x, y)])));
            }
        }
        out
    }
}

pub fn resolvent(form: &FiniteForm, masses: &[f64], alpha: f64) -> Result<ResolventKernel> {
    let n = form.size();
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    if masses.len() != n {
        return Err(Error::BadMeasure(format!("{} masses for {n} vertices", masses.len())));
    }
    if masses.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::BadMeasure("masses must be positive".into()));
    }
    let total: f64 = masses.iter().sum();
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::BadMeasure(format!("masses sum to {total}")));
    }
    if !form.is_connected() {
        return Err(Error::Disconnected);
    }
    let a = form.laplacian() + DMatrix::from_diagonal(&DVector::from_column_slice(masses)) * alpha;
    let mut u = a.cholesky().ok_or(Error::SingularInterior)?.inverse();
    // the exact inverse is symmetric; remove rounding asymmetry
    u = (&u + u.transpose()) * 0.5;
    Ok(ResolventKernel { alpha, masses: masses.to_vec(), matrix: u })
}

#[cfg(test)]
mod tests {
    use super::super::resistance_matrix;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_masses(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let s: f64 = raw.iter().sum();
        raw.iter().map(|m| m / s).collect()
    }

    #[test]
    fn small_examples() {
        let single = resolvent(&FiniteForm::new(1), &[1.0], 4.0).unwrap();
        assert!((single.get(0, 0) - 0.25).abs() < 1e-15);
        let pair = FiniteForm::from_edges(2, [(0, 1, 1.0)]).unwrap();
        let k = resolvent(&pair, &[0.5, 0.5], 2.0).unwrap();
        assert!((k.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((k.get(0, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((k.row_mass(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn identities_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..30 {
            let n = rng.gen_range(2..12);
            let f = FiniteForm::random_connected(n, &mut rng);
            let m = random_masses(&mut rng, n);
            let alpha = rng.gen_range(0.1..10.0);
            let k = resolvent(&f, &m, alpha).unwrap();
            let r = resistance_matrix(&f).unwrap();
            assert!(k.asymmetry() <= 1e-12);
            for x in 0..n {
                assert!((k.row_mass(x) - 1.0 / alpha).abs() < 1e-10);
                for y1 in 0..n {
                    for y2 in 0..n {
                        let d = k.get(x, y1) - k.get(x, y2);
                        assert!(d * d <= r[(y1, y2)] * k.get(x, x) + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_bad_measures() {
        let f = FiniteForm::complete(3, 1.0);
        assert!(matches!(resolvent(&f, &[0.5, 0.5, 0.1], 1.0), Err(Error::BadMeasure(_))));
        assert!(matches!(resolvent(&f, &[1.0, 0.0, 0.0], 1.0), Err(Error::BadMeasure(_))));
        assert!(resolvent(&f, &[0.2, 0.3, 0.5], 0.0).is_err());
    }
}
