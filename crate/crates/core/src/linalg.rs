//! Small dense linear algebra: row-major matrices, Householder QR with column
//! pivoting (rank-revealing least squares), and a Cholesky solve for the SPD
//! Newton systems.
//!
//! The problems in this crate are tall-and-skinny (n points, a handful of
//! coefficients), so hand-rolled O(n d^2) kernels generic over the scalar type
//! are plenty.

use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, T::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Ok(Self {
            rows: nrows,
            cols: ncols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    /// Borrow row `i` as a slice.
    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols, "matvec dimension");
        (0..self.rows)
            .map(|i| dot(self.row(i), v))
            .collect()
    }

    pub fn matmul(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, other.rows, "matmul dimension");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix<T> {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols))
            .map(|i| self.get(i, i))
            .sum()
    }
}

impl<T: Scalar> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Householder QR factorization with column pivoting of an n x d matrix
/// (n >= 1, d >= 1). Rank-revealing: least-squares solves return a basic
/// solution with zeros in the columns beyond the numerical rank.
#[derive(Clone, Debug)]
pub struct PivotedQr<T> {
    /// Reflector vectors below (and on) the diagonal, R strictly above it.
    work: Matrix<T>,
    /// Diagonal of R (the reflector occupies the diagonal slot of `work`).
    rdiag: Vec<T>,
    /// Scale factor 2 / v'v per reflector (zero for a skipped column).
    beta: Vec<T>,
    /// Column permutation: factored column `j` is original column `perm[j]`.
    perm: Vec<usize>,
    rank: usize,
}

impl<T: Scalar> PivotedQr<T> {
    pub fn factor(a: &Matrix<T>) -> Self {
        let n = a.rows();
        let d = a.cols();
        let k = n.min(d);
        let mut work = a.clone();
        let mut perm: Vec<usize> = (0..d).collect();
        let mut rdiag = vec![T::zero(); k];
        let mut beta = vec![T::zero(); k];

        let mut colnorm2: Vec<T> = (0..d)
            .map(|j| (0..n).map(|i| work.get(i, j) * work.get(i, j)).sum())
            .collect();
        let orig_norm2 = colnorm2.clone();

        for j in 0..k {
            // Pivot on the largest remaining column norm.
            let jp = (j..d)
                .max_by(|&x, &y| {
                    colnorm2[x]
                        .partial_cmp(&colnorm2[y])
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap();
            if jp != j {
                for i in 0..n {
                    let tmp = work.get(i, j);
                    work.set(i, j, work.get(i, jp));
                    work.set(i, jp, tmp);
                }
                perm.swap(j, jp);
                colnorm2.swap(j, jp);
            }

            let normx = (j..n)
                .map(|i| work.get(i, j) * work.get(i, j))
                .sum::<T>()
                .sqrt();
            if normx == T::zero() {
                rdiag[j] = T::zero();
                continue;
            }
            let x0 = work.get(j, j);
            let alpha = if x0 > T::zero() { -normx } else { normx };
            let v0 = x0 - alpha;
            rdiag[j] = alpha;
            beta[j] = -T::one() / (alpha * v0);
            work.set(j, j, v0);

            for c in (j + 1)..d {
                let mut w = T::zero();
                for i in j..n {
                    w = w + work.get(i, j) * work.get(i, c);
                }
                w = w * beta[j];
                for i in j..n {
                    let v = work.get(i, c) - w * work.get(i, j);
                    work.set(i, c, v);
                }
                // Downdate the trailing norm; recompute when cancellation bites.
                let r_jc = work.get(j, c);
                let updated = colnorm2[c] - r_jc * r_jc;
                colnorm2[c] = if updated > cast::<T>(1e-10) * orig_norm2[perm[c]] {
                    updated.max(T::zero())
                } else {
                    ((j + 1)..n)
                        .map(|i| work.get(i, c) * work.get(i, c))
                        .sum()
                };
            }
        }

        let threshold = rdiag[0].abs() * T::epsilon() * cast::<T>(n.max(d) as f64);
        let mut rank = 0;
        while rank < k && rdiag[rank].abs() > threshold {
            rank += 1;
        }

        Self {
            work,
            rdiag,
            beta,
            perm,
            rank,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Ratio of the largest to smallest retained |R| diagonal, a cheap
    /// conditioning proxy.
    pub fn diag_ratio(&self) -> T {
        if self.rank == 0 {
            return T::infinity();
        }
        let first = self.rdiag[0].abs();
        let last = self.rdiag[self.rank - 1].abs();
        if last == T::zero() {
            T::infinity()
        } else {
            first / last
        }
    }

    fn apply_qt(&self, b: &mut [T]) {
        let n = self.work.rows();
        for j in 0..self.rdiag.len() {
            if self.beta[j] == T::zero() {
                continue;
            }
            let mut w = T::zero();
            for i in j..n {
                w = w + self.work.get(i, j) * b[i];
            }
            w = w * self.beta[j];
            for i in j..n {
                b[i] = b[i] - w * self.work.get(i, j);
            }
        }
    }

    /// Minimizes ||A x - b||_2, returning a basic solution (zeros in the
    /// columns beyond the numerical rank when A is rank-deficient).
    pub fn solve_least_squares(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.work.rows();
        let d = self.work.cols();
        if b.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "rhs length {} != {n} rows",
                b.len()
            )));
        }
        let mut y = b.to_vec();
        self.apply_qt(&mut y);

        let r = self.rank;
        let mut z = vec![T::zero(); r];
        for i in (0..r).rev() {
            let mut s = y[i];
            for c in (i + 1)..r {
                s = s - self.work.get(i, c) * z[c];
            }
            z[i] = s / self.rdiag[i];
        }

        let mut x = vec![T::zero(); d];
        for (j, &zj) in z.iter().enumerate() {
            x[self.perm[j]] = zj;
        }
        Ok(x)
    }

    /// First `k` columns of Q (n x k).
    pub fn thin_q(&self, k: usize) -> Matrix<T> {
        let n = self.work.rows();
        let nref = self.rdiag.len();
        assert!(k <= nref, "thin_q: k exceeds reflector count");
        let mut q = Matrix::zeros(n, k);
        for c in 0..k {
            let mut col = vec![T::zero(); n];
            col[c] = T::one();
            for j in (0..nref).rev() {
                if self.beta[j] == T::zero() {
                    continue;
                }
                let mut w = T::zero();
                for i in j..n {
                    w = w + self.work.get(i, j) * col[i];
                }
                w = w * self.beta[j];
                for i in j..n {
                    col[i] = col[i] - w * self.work.get(i, j);
                }
            }
            for i in 0..n {
                q.set(i, c, col[i]);
            }
        }
        q
    }

    /// Orthogonal projector onto the column space (Q1 Q1' with the first
    /// `rank` columns of Q).
    pub fn projection(&self) -> Matrix<T> {
        let q = self.thin_q(self.rank);
        let n = q.rows();
        let mut p = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = T::zero();
                for c in 0..self.rank {
                    s = s + q.get(i, c) * q.get(j, c);
                }
                p.set(i, j, s);
            }
        }
        p
    }
}

/// Solution of a symmetric positive-definite system with a conditioning proxy.
pub struct SpdSolution<T> {
    pub x: Vec<T>,
    /// (max diag(L) / min diag(L))^2 — a rough kappa_2 estimate.
    pub condition_estimate: T,
}

/// Cholesky solve of `a x = b` for SPD `a`. Returns `None` when a pivot is
/// non-positive (matrix not numerically positive definite).
pub fn solve_spd<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Option<SpdSolution<T>> {
    let d = a.rows();
    assert_eq!(a.cols(), d, "solve_spd: square matrix required");
    assert_eq!(b.len(), d, "solve_spd: rhs length");

    let mut l = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s = s - l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= T::zero() {
                    return None;
                }
                l.set(i, j, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }

    let mut y = vec![T::zero(); d];
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s = s - l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    let mut x = vec![T::zero(); d];
    for i in (0..d).rev() {
        let mut s = y[i];
        for k in (i + 1)..d {
            s = s - l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }

    let mut dmax = l.get(0, 0);
    let mut dmin = l.get(0, 0);
    for i in 1..d {
        dmax = dmax.max(l.get(i, i));
        dmin = dmin.min(l.get(i, i));
    }
    let ratio = dmax / dmin;
    Some(SpdSolution {
        x,
        condition_estimate: ratio * ratio,
    })
}
