use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::network::{dot, NetworkParams};

/// Absolute tolerance on symmetry of `Q` and `T`.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Smallest eigenvalue of the block Gram matrix tolerated before it is
/// declared non-PSD.
pub const PSD_TOL: f64 = 1e-9;

/// Order parameters of a teacher-student pair.
///
/// `r` is `K x M` (student-teacher overlaps), `q` is `K x K`, `t` is `M x M`
/// (constant during training), `v` and `v_star` are the second layers.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroState {
    pub r: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub v: DVector<f64>,
    pub v_star: DVector<f64>,
}

impl MacroState {
    pub fn new(
        r: DMatrix<f64>,
        q: DMatrix<f64>,
        t: DMatrix<f64>,
        v: DVector<f64>,
        v_star: DVector<f64>,
    ) -> Result<Self> {
        let m = Self { r, q, t, v, v_star };
        m.check_shapes()?;
        Ok(m)
    }

    /// Student units.
    pub fn k(&self) -> usize {
        self.q.nrows()
    }

    /// Teacher units.
    pub fn m(&self) -> usize {
        self.t.nrows()
    }

    fn check_shapes(&self) -> Result<()> {
        let (k, m) = (self.k(), self.m());
        check_dim("Q columns", k, self.q.ncols())?;
        check_dim("T columns", m, self.t.ncols())?;
        check_dim("R rows", k, self.r.nrows())?;
        check_dim("R columns", m, self.r.ncols())?;
        check_dim("student second layer", k, self.v.len())?;
        check_dim("teacher second layer", m, self.v_star.len())?;
        Ok(())
    }

    /// The `(K+M) x (K+M)` covariance of all local fields, students first.
    pub fn gram(&self) -> DMatrix<f64> {
        let (k, m) = (self.k(), self.m());
        let mut g = DMatrix::zeros(k + m, k + m);
        g.view_mut((0, 0), (k, k)).copy_from(&self.q);
        g.view_mut((0, k), (k, m)).copy_from(&self.r);
        g.view_mut((k, 0), (m, k)).copy_from(&self.r.transpose());
        g.view_mut((k, k), (m, m)).copy_from(&self.t);
        g
    }

    pub fn min_gram_eigenvalue(&self) -> f64 {
        let g = self.gram();
        g.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Shapes, finiteness, symmetry and positive semi-definiteness.
    pub fn validate(&self) -> Result<()> {
        self.check_shapes()?;
        let all = self
            .r
            .iter()
            .chain(self.q.iter())
            .chain(self.t.iter())
            .chain(self.v.iter())
            .chain(self.v_star.iter());
        if !all.clone().all(|x| x.is_finite()) {
            return Err(Error::NonFinite {
                context: "order parameters",
            });
        }
        for (name, mat) in [("Q", &self.q), ("T", &self.t)] {
            let asym = (mat - mat.transpose()).amax();
            if asym > SYMMETRY_TOL * mat.amax().max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} is not symmetric (max asymmetry {asym:e})"
                )));
            }
        }
        let min_eig = self.min_gram_eigenvalue();
        if min_eig < -PSD_TOL {
            return Err(Error::NotPositiveSemiDefinite {
                min_eigenvalue: min_eig,
            });
        }
        Ok(())
    }

    /// Number of time-dependent scalars: `R`, the upper triangle of `Q`, `v`.
    pub fn dynamic_len(&self) -> usize {
        let (k, m) = (self.k(), self.m());
        k * m + k * (k + 1) / 2 + k
    }

    /// Packs `R` (row-major), the upper triangle of `Q` (row-major) and `v`.
    pub fn pack_dynamic(&self) -> Vec<f64> {
        let (k, m) = (self.k(), self.m());
        let mut out = Vec::with_capacity(self.dynamic_len());
        for i in 0..k {
            for n in 0..m {
                out.push(self.r[(i, n)]);
            }
        }
        for i in 0..k {
            for j in i..k {
                out.push(self.q[(i, j)]);
            }
        }
        out.extend(self.v.iter());
        out
    }

    /// Inverse of [`MacroState::pack_dynamic`]; `T` and `v_star` are kept.
    pub fn unpack_dynamic(&mut self, x: &[f64]) {
        let (k, m) = (self.k(), self.m());
        debug_assert_eq!(x.len(), self.dynamic_len());
        let mut idx = 0;
        for i in 0..k {
            for n in 0..m {
                self.r[(i, n)] = x[idx];
                idx += 1;
            }
        }
        for i in 0..k {
            for j in i..k {
                self.q[(i, j)] = x[idx];
                self.q[(j, i)] = x[idx];
                idx += 1;
            }
        }
        for i in 0..k {
            self.v[i] = x[idx];
            idx += 1;
        }
    }

    /// Euclidean distance between the time-dependent parts of two states.
    pub fn distance(&self, other: &MacroState) -> f64 {
        self.pack_dynamic()
            .iter()
            .zip(other.pack_dynamic())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Same state with student units reordered: unit `i` becomes old unit `perm[i]`.
    pub fn permute_students(&self, perm: &[usize]) -> MacroState {
        let k = self.k();
        let r = DMatrix::from_fn(k, self.m(), |i, n| self.r[(perm[i], n)]);
        let q = DMatrix::from_fn(k, k, |i, j| self.q[(perm[i], perm[j])]);
        let v = DVector::from_fn(k, |i, _| self.v[perm[i]]);
        MacroState {
            r,
            q,
            t: self.t.clone(),
            v,
            v_star: self.v_star.clone(),
        }
    }
}

/// Measures `R = w w*^T / N`, `Q = w w^T / N`, `T = w* w*^T / N` and copies
/// the second layers.
pub fn measure_macro(student: &NetworkParams, teacher: &NetworkParams) -> Result<MacroState> {
    check_dim("input dimension", teacher.input_dim(), student.input_dim())?;
    let n = student.input_dim() as f64;
    let (k, m) = (student.hidden_units(), teacher.hidden_units());
    let mut q = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let val = dot(student.row(i), student.row(j)) / n;
            q[(i, j)] = val;
            q[(j, i)] = val;
        }
    }
    let mut t = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let val = dot(teacher.row(a), teacher.row(b)) / n;
            t[(a, b)] = val;
            t[(b, a)] = val;
        }
    }
    let r = DMatrix::from_fn(k, m, |i, a| dot(student.row(i), teacher.row(a)) / n);
    Ok(MacroState {
        r,
        q,
        t,
        v: DVector::from_column_slice(student.second_layer()),
        v_star: DVector::from_column_slice(teacher.second_layer()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_networks_give_equal_overlaps() {
        let rows = vec![vec![1.0, 2.0, 0.5, -1.0], vec![0.0, 1.0, -1.0, 3.0]];
        let net = NetworkParams::from_rows(&rows, vec![1.0, 1.0]).unwrap();
        let m = measure_macro(&net, &net).unwrap();
        assert_eq!(m.r, m.q);
        assert_eq!(m.q, m.t);
        m.validate().unwrap();
    }

    #[test]
    fn orthogonal_rows_have_zero_overlap() {
        let s = NetworkParams::from_rows(&[vec![1.0, 1.0, 1.0, 1.0]], vec![1.0]).unwrap();
        let t = NetworkParams::from_rows(&[vec![1.0, -1.0, 1.0, -1.0]], vec![1.0]).unwrap();
        let m = measure_macro(&s, &t).unwrap();
        assert_eq!(m.r[(0, 0)], 0.0);
        assert_eq!(m.q[(0, 0)], 1.0);
        assert_eq!(m.t[(0, 0)], 1.0);
    }

    #[test]
    fn duplicated_row_gives_rank_one_q() {
        let row = vec![0.3, -0.7, 1.1];
        let s = NetworkParams::from_rows(&[row.clone(), row.clone()], vec![1.0, 1.0]).unwrap();
        let t = NetworkParams::from_rows(&[vec![1.0, 0.0, 0.0]], vec![1.0]).unwrap();
        let m = measure_macro(&s, &t).unwrap();
        assert_eq!(m.q[(0, 0)], m.q[(0, 1)]);
        assert_eq!(m.q[(1, 1)], m.q[(0, 1)]);
        assert!(m.q.determinant().abs() < 1e-14);
    }

    #[test]
    fn non_psd_is_rejected() {
        let m = MacroState::new(
            DMatrix::from_element(1, 1, 2.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 1.0),
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        assert!(matches!(
            m.validate(),
            Err(Error::NotPositiveSemiDefinite { .. })
        ));
    }

    #[test]
    fn pack_roundtrip() {
        let s =
            NetworkParams::from_rows(&[vec![1.0, 2.0], vec![0.5, -1.0]], vec![0.3, 0.7]).unwrap();
        let t = NetworkParams::from_rows(&[vec![1.0, 0.0]], vec![1.0]).unwrap();
        let m = measure_macro(&s, &t).unwrap();
        let mut other = m.clone();
        other.r.fill(0.0);
        other.q.fill(0.0);
        other.v.fill(0.0);
        other.unpack_dynamic(&m.pack_dynamic());
        assert_eq!(other, m);
        assert_eq!(m.distance(&other), 0.0);
    }
}
