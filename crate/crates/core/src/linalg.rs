//! Singular-value spectra with multiplicities and the small dense helpers
//! used to cross-check them.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

/// Singular values of an operator, each with its multiplicity.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SingularValues {
    entries: Vec<(f64, u64)>,
}

impl SingularValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, value: f64, multiplicity: u64) {
        debug_assert!(value >= 0.0, "singular values are non-negative");
        if multiplicity > 0 {
            self.entries.push((value, multiplicity));
        }
    }

    pub fn entries(&self) -> &[(f64, u64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total count including multiplicities.
    pub fn dimension(&self) -> u64 {
        self.entries.iter().map(|&(_, m)| m).sum()
    }

    /// Every value repeated by its multiplicity, sorted descending.
    pub fn expanded(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .entries
            .iter()
            .flat_map(|&(s, m)| std::iter::repeat_n(s, m as usize))
            .collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }
}

impl FromIterator<(f64, u64)> for SingularValues {
    fn from_iter<I: IntoIterator<Item = (f64, u64)>>(iter: I) -> Self {
        let mut s = SingularValues::new();
        for (v, m) in iter {
            s.push(v, m);
        }
        s
    }
}

/// Singular values of the Hermitian block `[[x, z], [z̄, y]]`, i.e. the
/// absolute values of its eigenvalues.
pub fn hermitian_2x2_singular_values(x: f64, y: f64, z: Complex64) -> [f64; 2] {
    let mean = 0.5 * (x + y);
    let radius = (0.5 * (x - y)).hypot(z.norm());
    // The eigenvalue without cancellation comes first; the other follows
    // from the determinant.
    let det = x * y - z.norm_sqr();
    let (first, second) = if mean >= 0.0 {
        let e = mean + radius;
        (e, if e != 0.0 { det / e } else { 0.0 })
    } else {
        let e = mean - radius;
        (e, det / e)
    };
    [first.abs(), second.abs()]
}

pub fn dense_singular_values(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

pub fn is_hermitian(m: &Matrix2<Complex64>, tol: f64) -> bool {
    (m - m.adjoint()).iter().all(|z| z.norm() <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn two_by_two_matches_dense(x in -1.0f64..1.0, y in -1.0f64..1.0, zr in -1.0f64..1.0, zi in -1.0f64..1.0) {
            let z = Complex64::new(zr, zi);
            let mut s = hermitian_2x2_singular_values(x, y, z).to_vec();
            s.sort_by(|a, b| b.total_cmp(a));
            let m = DMatrix::from_row_slice(2, 2, &[
                Complex64::new(x, 0.0), z, z.conj(), Complex64::new(y, 0.0),
            ]);
            let d = dense_singular_values(&m);
            prop_assert!((s[0] - d[0]).abs() < 1e-12);
            prop_assert!((s[1] - d[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn expansion_respects_multiplicity() {
        let s: SingularValues = [(1.0, 2), (3.0, 1), (0.5, 0)].into_iter().collect();
        assert_eq!(s.expanded(), vec![3.0, 1.0, 1.0]);
        assert_eq!(s.dimension(), 3);
        assert_eq!(s.entries().len(), 2);
    }

    #[test]
    fn zero_block() {
        assert_eq!(
            hermitian_2x2_singular_values(0.0, 0.0, Complex64::new(0.0, 0.0)),
            [0.0, 0.0]
        );
    }
}
