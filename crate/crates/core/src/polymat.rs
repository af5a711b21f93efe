//! Matrices with polynomial entries.

use std::ops::Index;

use nalgebra::DMatrix;

use crate::linalg::RatMatrix;
use num_traits::One;

use crate::poly::{power_table, PolyError, PolyExpr, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    nvars: usize,
    data: Vec<PolyExpr>,
}

impl PolyMatrix {
    pub fn zeros(rows: usize, cols: usize, nvars: usize) -> Self {
        PolyMatrix {
            rows,
            cols,
            nvars,
            data: vec![PolyExpr::zero(nvars); rows * cols],
        }
    }

    pub fn identity(n: usize, nvars: usize) -> Self {
        Self::from_fn(n, n, nvars, |i, j| {
            if i == j {
                PolyExpr::one(nvars)
            } else {
                PolyExpr::zero(nvars)
            }
        })
    }

    pub fn from_fn(rows: usize, cols: usize, nvars: usize, mut f: impl FnMut(usize, usize) -> PolyExpr) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let p = f(i, j);
                assert_eq!(p.nvars(), nvars, "entry ({i},{j}) has wrong nvars");
                data.push(p);
            }
        }
        PolyMatrix {
            rows,
            cols,
            nvars,
            data,
        }
    }

    /// Builds from rows; all entries must share `nvars`.
    pub fn from_rows(nvars: usize, rows: Vec<Vec<PolyExpr>>) -> Result<Self, PolyError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            for p in row {
                if p.nvars() != nvars {
                    return Err(PolyError::NvarsMismatch {
                        left: nvars,
                        right: p.nvars(),
                    });
                }
                data.push(p);
            }
        }
        Ok(PolyMatrix {
            rows: r,
            cols: c,
            nvars,
            data,
        })
    }

    pub fn from_rational(m: &RatMatrix, nvars: usize) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), nvars, |i, j| {
            PolyExpr::constant(nvars, m[(i, j)].clone())
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, self.nvars, |i, j| self[(j, i)].clone())
    }

    /// Panics on incompatible shapes or nvars.
    pub fn mul(&self, rhs: &PolyMatrix) -> PolyMatrix {
        assert_eq!(self.cols, rhs.rows, "shape mismatch in product");
        let mut out = PolyMatrix::zeros(self.rows, rhs.cols, self.nvars);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = &rhs[(k, j)];
                    if b.is_zero() {
                        continue;
                    }
                    let idx = i * out.cols + j;
                    out.data[idx] = &out.data[idx] + &(a * b);
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &PolyMatrix) -> PolyMatrix {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch");
        Self::from_fn(self.rows, self.cols, self.nvars, |i, j| &self[(i, j)] + &rhs[(i, j)])
    }

    pub fn sub(&self, rhs: &PolyMatrix) -> PolyMatrix {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch");
        Self::from_fn(self.rows, self.cols, self.nvars, |i, j| &self[(i, j)] - &rhs[(i, j)])
    }

    pub fn neg(&self) -> PolyMatrix {
        Self::from_fn(self.rows, self.cols, self.nvars, |i, j| -&self[(i, j)])
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(PolyExpr::is_zero)
    }

    /// First nonzero entry in row-major order.
    pub fn first_nonzero(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|p| !p.is_zero())
            .map(|k| (k / self.cols, k % self.cols))
    }

    /// First `(i, j)` with `a_ij ≠ −a_ji`, if any.
    pub fn antisymmetry_violation(&self) -> Option<(usize, usize)> {
        if self.rows != self.cols {
            return Some((0, 0));
        }
        for i in 0..self.rows {
            for j in i..self.cols {
                if self[(i, j)] != -&self[(j, i)] {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// True when every entry is a constant polynomial.
    pub fn is_constant(&self) -> bool {
        self.data.iter().all(PolyExpr::is_constant)
    }

    pub fn eval_f64(&self, point: &[f64]) -> Result<DMatrix<f64>, PolyError> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(i, j)].eval_f64(point)?;
            }
        }
        Ok(out)
    }

    pub fn eval_exact(&self, point: &[Rational]) -> Result<RatMatrix, PolyError> {
        if point.len() != self.nvars {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars,
                got: point.len(),
            });
        }
        let mut max_exp = vec![0; self.nvars];
        for p in &self.data {
            for (m, e) in max_exp.iter_mut().zip(p.max_exponents()) {
                *m = (*m).max(e);
            }
        }
        let powers = power_table(point, max_exp, Rational::one());
        let mut out = RatMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(i, j)].eval_with_powers(&powers);
            }
        }
        Ok(out)
    }

    pub fn to_strings<S: AsRef<str>>(&self, names: &[S]) -> Vec<Vec<String>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)].to_string_with(names)).collect())
            .collect()
    }
}

impl Index<(usize, usize)> for PolyMatrix {
    type Output = PolyExpr;
    fn index(&self, (i, j): (usize, usize)) -> &PolyExpr {
        &self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_poly;

    #[test]
    fn product_and_transpose() {
        let vars = ["x", "y"];
        let p = |s: &str| parse_poly(s, &vars).unwrap();
        let a = PolyMatrix::from_rows(2, vec![vec![p("x"), p("1")], vec![p("0"), p("y")]]).unwrap();
        let b = a.mul(&a.transpose());
        assert_eq!(b[(0, 0)], p("x^2 + 1"));
        assert_eq!(b[(0, 1)], p("y"));
        assert_eq!(b[(1, 1)], p("y^2"));
        assert_eq!(b.antisymmetry_violation(), Some((0, 0)));
        assert_eq!(a.first_nonzero(), Some((0, 0)));
        let v = b.eval_f64(&[2.0, 3.0]).unwrap();
        assert_eq!(v[(0, 0)], 5.0);
    }
}
