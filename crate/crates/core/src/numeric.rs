//! Small dense linear algebra over exact scalars and complex floats, plus the
//! Runge-Kutta integrator used for chart construction.
//!
//! Problem sizes here are tiny (tens of rows), so everything is hand-rolled
//! Gaussian elimination / Householder QR rather than an external solver.

use crate::scalar::Scalar;
use num::complex::Complex64;

/// Solution of a linear system together with a kernel basis.
pub struct SolveResult<S> {
    pub particular: Vec<S>,
    pub kernel: Vec<Vec<S>>,
}

/// Solve A·x = b exactly where A is given by columns (sparse row indices).
///
/// Returns `None` when the system is inconsistent. Free variables are set to
/// zero in the particular solution; the kernel basis has one vector per free
/// variable.
pub fn exact_solve_with_kernel<S: Scalar>(
    rows: usize,
    cols: &[Vec<(usize, S)>],
    rhs: &[S],
) -> Option<SolveResult<S>> {
    let n = cols.len();
    let mut a: Vec<Vec<S>> = vec![vec![S::zero(); n + 1]; rows];
    for (j, col) in cols.iter().enumerate() {
        for (i, v) in col {
            a[*i][j] = a[*i][j].add(v);
        }
    }
    for (i, v) in rhs.iter().enumerate() {
        a[i][n] = v.clone();
    }

    let mut pivot_col_of_row = Vec::new();
    let mut pivot_row_of_col = vec![usize::MAX; n];
    let mut row = 0;
    for col in 0..n {
        // Pick the best pivot in this column at or below `row`.
        let mut best: Option<(usize, f64)> = None;
        for r in row..rows {
            let size = a[r][col].pivot_size();
            if size > 0.0 {
                let better = match best {
                    None => true,
                    Some((_, s)) => size > s,
                };
                if better {
                    best = Some((r, size));
                }
            }
        }
        let Some((prow, _)) = best else { continue };
        a.swap(row, prow);
        let inv = a[row][col].try_inv().expect("nonzero pivot");
        for j in col..=n {
            a[row][j] = a[row][j].mul(&inv);
        }
        for r in 0..rows {
            if r != row && !a[r][col].is_zero() {
                let factor = a[r][col].clone();
                for j in col..=n {
                    let delta = factor.mul(&a[row][j]);
                    a[r][j] = a[r][j].sub(&delta);
                }
            }
        }
        pivot_col_of_row.push(col);
        pivot_row_of_col[col] = row;
        row += 1;
        if row == rows {
            break;
        }
    }

    // Consistency: remaining rows must have zero RHS.
    for r in row..rows {
        if !a[r][n].is_zero() {
            if S::exact() || a[r][n].pivot_size() > 1e-9 {
                return None;
            }
        }
    }

    let mut particular = vec![S::zero(); n];
    for (r, &col) in pivot_col_of_row.iter().enumerate() {
        particular[col] = a[r][n].clone();
    }

    let mut kernel = Vec::new();
    for free in 0..n {
        if pivot_row_of_col[free] != usize::MAX {
            continue;
        }
        let mut v = vec![S::zero(); n];
        v[free] = S::one();
        for (r, &col) in pivot_col_of_row.iter().enumerate() {
            v[col] = a[r][free].neg();
        }
        kernel.push(v);
    }
    Some(SolveResult { particular, kernel })
}

// ---------------------------------------------------------------------------
// Complex f64 dense helpers.
// ---------------------------------------------------------------------------

/// Dense complex matrix in row-major order.
#[derive(Clone, Debug)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            *m.at_mut(i, i) = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }

    pub fn matmul(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.rows);
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let v = self.at(i, k);
                if v.norm() == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    *out.at_mut(i, j) += v * other.at(k, j);
                }
            }
        }
        out
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.at(i, j) * x[j]).sum())
            .collect()
    }

    pub fn transpose(&self) -> CMat {
        let mut out = CMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                *out.at_mut(j, i) = self.at(i, j);
            }
        }
        out
    }
}

/// LU solve with partial pivoting; `None` when the matrix is singular.
pub fn lu_solve(a: &CMat, b: &[Complex64]) -> Option<Vec<Complex64>> {
    assert_eq!(a.rows, a.cols);
    assert_eq!(a.rows, b.len());
    let n = a.rows;
    let mut m = a.clone();
    let mut x: Vec<Complex64> = b.to_vec();
    for col in 0..n {
        let (pivot, size) = (col..n)
            .map(|r| (r, m.at(r, col).norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1))?;
        if size < 1e-300 {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                let tmp = m.at(col, j);
                *m.at_mut(col, j) = m.at(pivot, j);
                *m.at_mut(pivot, j) = tmp;
            }
            x.swap(col, pivot);
        }
        let inv = m.at(col, col).inv();
        for r in col + 1..n {
            let f = m.at(r, col) * inv;
            if f.norm() == 0.0 {
                continue;
            }
            for j in col..n {
                let v = m.at(col, j);
                *m.at_mut(r, j) -= f * v;
            }
            let delta = f * x[col];
            x[r] -= delta;
        }
    }
    for col in (0..n).rev() {
        x[col] /= m.at(col, col);
        for r in 0..col {
            let f = m.at(r, col);
            let delta = f * x[col];
            x[r] -= delta;
        }
    }
    Some(x)
}

pub fn invert(a: &CMat) -> Option<CMat> {
    let n = a.rows;
    let mut out = CMat::zeros(n, n);
    for j in 0..n {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[j] = Complex64::new(1.0, 0.0);
        let col = lu_solve(a, &e)?;
        for i in 0..n {
            *out.at_mut(i, j) = col[i];
        }
    }
    Some(out)
}

/// Numeric rank via column-pivoted elimination with a relative threshold.
pub fn rank(a: &CMat, tol: f64) -> usize {
    let mut m = a.clone();
    let scale = m.data.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0;
    }
    let threshold = scale * tol;
    let mut rank = 0;
    let mut row = 0;
    for col in 0..m.cols {
        let (pivot, size) = (row..m.rows)
            .map(|r| (r, m.at(r, col).norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((row, 0.0));
        if size <= threshold {
            continue;
        }
        for j in 0..m.cols {
            let tmp = m.at(row, j);
            *m.at_mut(row, j) = m.at(pivot, j);
            *m.at_mut(pivot, j) = tmp;
        }
        let inv = m.at(row, col).inv();
        for r in row + 1..m.rows {
            let f = m.at(r, col) * inv;
            for j in col..m.cols {
                let v = m.at(row, j);
                *m.at_mut(r, j) -= f * v;
            }
        }
        rank += 1;
        row += 1;
        if row == m.rows {
            break;
        }
    }
    rank
}

/// Least squares via Householder QR; returns (solution, residual norm).
pub fn lstsq(a: &CMat, b: &[Complex64]) -> (Vec<Complex64>, f64) {
    let m = a.rows;
    let n = a.cols;
    assert!(m >= n, "lstsq needs rows >= cols");
    let mut r = a.clone();
    let mut y: Vec<Complex64> = b.to_vec();
    for k in 0..n {
        // Householder vector for column k.
        let mut norm2 = 0.0;
        for i in k..m {
            norm2 += r.at(i, k).norm_sqr();
        }
        let norm = norm2.sqrt();
        if norm < 1e-300 {
            continue;
        }
        let akk = r.at(k, k);
        let phase = if akk.norm() > 0.0 {
            akk / akk.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let alpha = -phase * norm;
        let mut v: Vec<Complex64> = (k..m).map(|i| r.at(i, k)).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        if vnorm2 < 1e-300 {
            continue;
        }
        // Apply H = I - 2 v v* / |v|² to R and y.
        for j in k..n {
            let mut dot = Complex64::new(0.0, 0.0);
            for (idx, i) in (k..m).enumerate() {
                dot += v[idx].conj() * r.at(i, j);
            }
            let f = dot * 2.0 / vnorm2;
            for (idx, i) in (k..m).enumerate() {
                let delta = f * v[idx];
                *r.at_mut(i, j) -= delta;
            }
        }
        let mut dot = Complex64::new(0.0, 0.0);
        for (idx, i) in (k..m).enumerate() {
            dot += v[idx].conj() * y[i];
        }
        let f = dot * 2.0 / vnorm2;
        for (idx, i) in (k..m).enumerate() {
            y[i] -= f * v[idx];
        }
    }
    // Back substitution on the upper-triangular block.
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut acc = y[i];
        for j in i + 1..n {
            acc -= r.at(i, j) * x[j];
        }
        let d = r.at(i, i);
        x[i] = if d.norm() > 1e-300 { acc / d } else { Complex64::new(0.0, 0.0) };
    }
    let residual: f64 = (n..m).map(|i| y[i].norm_sqr()).sum::<f64>().sqrt();
    (x, residual)
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(g: &[Vec<f64>]) -> Vec<f64> {
    let n = g.len();
    let mut a: Vec<Vec<f64>> = g.to_vec();
    for _ in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

// ---------------------------------------------------------------------------
// Real RK4 with optional variational (tangent) propagation.
// ---------------------------------------------------------------------------

/// One RK4 step of x' = f(x).
pub fn rk4_step<F: Fn(&[f64]) -> Vec<f64>>(f: &F, x: &[f64], h: f64) -> Vec<f64> {
    let add = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + s * y).collect()
    };
    let k1 = f(x);
    let k2 = f(&add(x, &k1, h / 2.0));
    let k3 = f(&add(x, &k2, h / 2.0));
    let k4 = f(&add(x, &k3, h));
    x.iter()
        .enumerate()
        .map(|(i, &v)| v + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// RK4 on the augmented system (x, J) with J' = Df(x)·J.
///
/// `f` returns the vector field, `df` its Jacobian (row-major d×d). `tangents`
/// is a d×k matrix of tangent columns propagated alongside the base point.
pub fn rk4_step_with_tangents<F, G>(
    f: &F,
    df: &G,
    x: &[f64],
    tangents: &mut [Vec<f64>],
    h: f64,
) -> Vec<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
    G: Fn(&[f64]) -> Vec<Vec<f64>>,
{
    let d = x.len();
    let add = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + s * y).collect()
    };
    let matvec = |m: &[Vec<f64>], v: &[f64]| -> Vec<f64> {
        (0..d).map(|i| (0..d).map(|j| m[i][j] * v[j]).sum()).collect()
    };

    let k1 = f(x);
    let x2 = add(x, &k1, h / 2.0);
    let k2 = f(&x2);
    let x3 = add(x, &k2, h / 2.0);
    let k3 = f(&x3);
    let x4 = add(x, &k3, h);
    let k4 = f(&x4);

    let j1 = df(x);
    let j2 = df(&x2);
    let j3 = df(&x3);
    let j4 = df(&x4);

    for t in tangents.iter_mut() {
        let m1 = matvec(&j1, t);
        let t2 = add(t, &m1, h / 2.0);
        let m2 = matvec(&j2, &t2);
        let t3 = add(t, &m2, h / 2.0);
        let m3 = matvec(&j3, &t3);
        let t4 = add(t, &m3, h);
        let m4 = matvec(&j4, &t4);
        for i in 0..d {
            t[i] += h / 6.0 * (m1[i] + 2.0 * m2[i] + 2.0 * m3[i] + m4[i]);
        }
    }

    x.iter()
        .enumerate()
        .map(|(i, &v)| v + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;

    #[test]
    fn exact_solver_finds_particular_and_kernel() {
        // x + y = 2 with a free variable: kernel dim 1.
        let cols = vec![vec![(0usize, Exact::from_i64(1))], vec![(0usize, Exact::from_i64(1))]];
        let rhs = vec![Exact::from_i64(2)];
        let sol = exact_solve_with_kernel(1, &cols, &rhs).unwrap();
        assert_eq!(sol.kernel.len(), 1);
        let x = &sol.particular;
        assert_eq!(x[0].add(&x[1]), Exact::from_i64(2));
    }

    #[test]
    fn exact_solver_detects_inconsistency() {
        // 0·x = 1
        let cols = vec![vec![]];
        let rhs = vec![Exact::from_i64(1)];
        assert!(exact_solve_with_kernel::<Exact>(1, &cols, &rhs).is_none());
    }

    #[test]
    fn lu_and_lstsq_agree_on_square_systems() {
        let mut a = CMat::zeros(3, 3);
        let vals = [
            [2.0, 1.0, 0.5],
            [0.1, 3.0, -1.0],
            [1.0, -0.5, 2.5],
        ];
        for i in 0..3 {
            for j in 0..3 {
                *a.at_mut(i, j) = Complex64::new(vals[i][j], 0.1 * (i as f64 - j as f64));
            }
        }
        let b = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(2.0, -1.0),
        ];
        let x1 = lu_solve(&a, &b).unwrap();
        let (x2, res) = lstsq(&a, &b);
        assert!(res < 1e-10);
        for i in 0..3 {
            assert!((x1[i] - x2[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn rank_detects_dependent_columns() {
        let mut a = CMat::zeros(3, 3);
        for i in 0..3 {
            *a.at_mut(i, 0) = Complex64::new(i as f64 + 1.0, 0.0);
            *a.at_mut(i, 1) = Complex64::new(2.0 * (i as f64 + 1.0), 0.0);
            *a.at_mut(i, 2) = Complex64::new(i as f64, 1.0);
        }
        assert_eq!(rank(&a, 1e-10), 2);
    }

    #[test]
    fn rk4_integrates_linear_system() {
        // x' = -x, exact solution e^{-t}.
        let f = |x: &[f64]| vec![-x[0]];
        let mut x = vec![1.0];
        let h = 0.01;
        for _ in 0..100 {
            x = rk4_step(&f, &x, h);
        }
        assert!((x[0] - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn variational_propagation_matches_linear_flow() {
        // x' = A x with A = [[0,1],[-1,0]]: tangents rotate like the flow.
        let f = |x: &[f64]| vec![x[1], -x[0]];
        let df = |_x: &[f64]| vec![vec![0.0, 1.0], vec![-1.0, 0.0]];
        let mut x = vec![1.0, 0.0];
        let mut tangents = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let h = 0.01;
        for _ in 0..157 {
            x = rk4_step_with_tangents(&f, &df, &x, &mut tangents, h);
        }
        // After t = 1.57 ≈ π/2 the tangent frame has rotated by ~90°.
        assert!((tangents[0][0] - 1.57f64.cos()).abs() < 1e-6);
        assert!((tangents[0][1] + 1.57f64.sin()).abs() < 1e-6);
    }
}
