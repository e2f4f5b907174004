//! Small dense linear algebra (d ≤ 16): LU solves, inverse, matrix
//! exponential by scaling and squaring, and eigenvalues by Hessenberg
//! reduction followed by shifted QR.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense real vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Self {
        Vector(entries)
    }

    pub fn zeros(n: usize) -> Self {
        Vector(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        norm2(&self.0)
    }

    pub fn scaled(&self, s: f64) -> Vector {
        Vector(self.0.iter().map(|v| v * s).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Sub for &Vector {
    type Output = Vector;
    fn sub(self, rhs: &Vector) -> Vector {
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Add for &Vector {
    type Output = Vector;
    fn add(self, rhs: &Vector) -> Vector {
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

/// Euclidean norm of a slice, scaled to avoid overflow.
pub fn norm2(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
}

/// Dense real matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    /// Builds a matrix from row-major entries.
    ///
    /// Panics if `data.len() != rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "entry count must equal rows*cols");
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix::from_row_major(r, c, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vector {
        Vector((0..self.rows).map(|i| self[(i, j)]).collect())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_frobenius(&self) -> f64 {
        norm2(&self.data)
    }

    /// Spectral norm (largest singular value), via the eigenvalues of MᵀM.
    pub fn norm_2(&self) -> Result<f64> {
        let gram = &self.transpose() * self;
        let lmax = eigenvalues(&gram)?
            .iter()
            .map(|z| z.re)
            .fold(0.0f64, f64::max);
        Ok(lmax.max(0.0).sqrt())
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "dimension mismatch in mat-vec");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Writes `self * v` into `out` without allocating.
    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(self.cols, v.len());
        debug_assert_eq!(self.rows, out.len());
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in product");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        out
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scaled(-1.0)
    }
}

/// LU factorisation with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

/// Pivots below this fraction of ‖A‖∞ are treated as zero.
const PIVOT_THRESHOLD: f64 = 1e-13;

impl Lu {
    pub fn new(a: &Matrix) -> Result<Lu> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                expected: a.rows(),
                got: a.cols(),
            });
        }
        let n = a.rows();
        let tol = PIVOT_THRESHOLD * a.norm_inf();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax <= tol || pmax == 0.0 {
                return Err(Error::SingularMatrix);
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu.data[i * n + j] -= f * lu.data[k * n + j];
                    }
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.lu.rows();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        Ok(x)
    }

    pub fn solve_matrix(&self, b: &Matrix) -> Result<Matrix> {
        let n = self.lu.rows();
        let mut out = Matrix::zeros(n, b.cols());
        for j in 0..b.cols() {
            let col = self.solve(b.column(j).as_slice())?;
            for i in 0..n {
                out[(i, j)] = col[i];
            }
        }
        Ok(out)
    }
}

/// Solves `A w = b`.
pub fn solve(a: &Matrix, b: &Vector) -> Result<Vector> {
    Lu::new(a)?.solve(b.as_slice()).map(Vector::new)
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    Lu::new(a)?.solve_matrix(&Matrix::identity(a.rows()))
}

// [13/13] Padé coefficients and the scaling threshold for the 1-norm.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring around a degree-13 Padé
/// approximant.
pub fn mat_exp(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            got: m.cols(),
        });
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("mat_exp input"));
    }
    let n = m.rows();
    let norm = m.norm_1();
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = m.scaled(0.5f64.powi(squarings));
    let id = Matrix::identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;

    let u_inner = &(&(&a6.scaled(b[13]) + &a4.scaled(b[11])) + &a2.scaled(b[9]));
    let u_tail = &(&(&(&a6.scaled(b[7]) + &a4.scaled(b[5])) + &a2.scaled(b[3])) + &id.scaled(b[1]));
    let u = &a * &(&(&a6 * u_inner) + u_tail);

    let v_inner = &(&(&a6.scaled(b[12]) + &a4.scaled(b[10])) + &a2.scaled(b[8]));
    let v_tail = &(&(&(&a6.scaled(b[6]) + &a4.scaled(b[4])) + &a2.scaled(b[2])) + &id.scaled(b[0]));
    let v = &(&a6 * v_inner) + v_tail;

    let p = &v + &u;
    let q = &v - &u;
    let mut r = Lu::new(&q)?.solve_matrix(&p)?;
    for _ in 0..squarings {
        r = &r * &r;
        if !r.is_finite() {
            return Err(Error::Overflow);
        }
    }
    if !r.is_finite() {
        return Err(Error::Overflow);
    }
    Ok(r)
}

const QR_MAX_ITS: usize = 60;

/// Eigenvalues of a real square matrix. Complex pairs come out adjacent,
/// the order is otherwise unspecified.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            got: m.cols(),
        });
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("eigenvalue input"));
    }
    let mut h = m.clone();
    hessenberg(&mut h);
    hqr(&mut h)
}

/// Reduction to upper Hessenberg form by stabilised elementary
/// similarity transforms. Entries below the subdiagonal are zeroed.
fn hessenberg(a: &mut Matrix) {
    let n = a.rows();
    if n < 3 {
        return;
    }
    for m in 1..n - 1 {
        let mut x = 0.0f64;
        let mut i = m;
        for j in m..n {
            if a[(j, m - 1)].abs() > x.abs() {
                x = a[(j, m - 1)];
                i = j;
            }
        }
        if i != m {
            for j in m - 1..n {
                a.data.swap(i * n + j, m * n + j);
            }
            for j in 0..n {
                a.data.swap(j * n + i, j * n + m);
            }
        }
        if x != 0.0 {
            for i in m + 1..n {
                let mut y = a[(i, m - 1)];
                if y != 0.0 {
                    y /= x;
                    a[(i, m - 1)] = 0.0;
                    for j in m..n {
                        let amj = a[(m, j)];
                        a[(i, j)] -= y * amj;
                    }
                    for j in 0..n {
                        let aji = a[(j, i)];
                        a[(j, m)] += y * aji;
                    }
                }
            }
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix.
fn hqr(a: &mut Matrix) -> Result<Vec<Complex64>> {
    let n = a.rows() as isize;
    let mut wr = vec![Complex64::new(0.0, 0.0); n as usize];
    if n == 0 {
        return Ok(wr);
    }
    let eps = f64::EPSILON;
    let at = |a: &Matrix, i: isize, j: isize| a[(i as usize, j as usize)];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in (i - 1).max(0)..n {
            anorm += at(a, i, j).abs();
        }
    }
    let mut nn = n - 1;
    let mut t = 0.0;
    let (mut p, mut q, mut r) = (0.0f64, 0.0f64, 0.0f64);
    let (mut x, mut y, mut z, mut w);
    let mut s;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l > 0 {
                s = at(a, l - 1, l - 1).abs() + at(a, l, l).abs();
                if s == 0.0 {
                    s = anorm;
                }
                if at(a, l, l - 1).abs() <= eps * s {
                    a[(l as usize, (l - 1) as usize)] = 0.0;
                    break;
                }
                l -= 1;
            }
            x = at(a, nn, nn);
            if l == nn {
                wr[nn as usize] = Complex64::new(x + t, 0.0);
                nn -= 1;
            } else {
                y = at(a, nn - 1, nn - 1);
                w = at(a, nn, nn - 1) * at(a, nn - 1, nn);
                if l == nn - 1 {
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + sign(z, p);
                        let hi = x + z;
                        let lo = if z != 0.0 { x - w / z } else { hi };
                        wr[(nn - 1) as usize] = Complex64::new(hi, 0.0);
                        wr[nn as usize] = Complex64::new(lo, 0.0);
                    } else {
                        wr[nn as usize] = Complex64::new(x + p, -z);
                        wr[(nn - 1) as usize] = Complex64::new(x + p, z);
                    }
                    nn -= 2;
                } else {
                    if its == QR_MAX_ITS {
                        return Err(Error::NoConvergence);
                    }
                    if its == 10 || its == 20 {
                        // exceptional shift
                        t += x;
                        for i in 0..=nn {
                            a[(i as usize, i as usize)] -= x;
                        }
                        s = at(a, nn, nn - 1).abs() + at(a, nn - 1, nn - 2).abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    let mut m = nn - 2;
                    while m >= l {
                        z = at(a, m, m);
                        r = x - z;
                        s = y - z;
                        p = (r * s - w) / at(a, m + 1, m) + at(a, m, m + 1);
                        q = at(a, m + 1, m + 1) - z - r - s;
                        r = at(a, m + 2, m + 1);
                        s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = at(a, m, m - 1).abs() * (q.abs() + r.abs());
                        let v = p.abs()
                            * (at(a, m - 1, m - 1).abs() + z.abs() + at(a, m + 1, m + 1).abs());
                        if u <= eps * v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m..nn - 1 {
                        a[((i + 2) as usize, i as usize)] = 0.0;
                        if i != m {
                            a[((i + 2) as usize, (i - 1) as usize)] = 0.0;
                        }
                    }
                    let mut k = m;
                    while k < nn {
                        if k != m {
                            p = at(a, k, k - 1);
                            q = at(a, k + 1, k - 1);
                            r = 0.0;
                            if k + 1 != nn {
                                r = at(a, k + 2, k - 1);
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        s = sign((p * p + q * q + r * r).sqrt(), p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    let v = -at(a, k, k - 1);
                                    a[(k as usize, (k - 1) as usize)] = v;
                                }
                            } else {
                                a[(k as usize, (k - 1) as usize)] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                p = at(a, k, j) + q * at(a, k + 1, j);
                                if k + 1 != nn {
                                    p += r * at(a, k + 2, j);
                                    a[((k + 2) as usize, j as usize)] -= p * z;
                                }
                                a[((k + 1) as usize, j as usize)] -= p * y;
                                a[(k as usize, j as usize)] -= p * x;
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for i in l..=mmin {
                                p = x * at(a, i, k) + y * at(a, i, k + 1);
                                if k + 1 != nn {
                                    p += z * at(a, i, k + 2);
                                    a[(i as usize, (k + 2) as usize)] -= p * r;
                                }
                                a[(i as usize, (k + 1) as usize)] -= p * q;
                                a[(i as usize, k as usize)] -= p;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if l + 1 >= nn {
                break;
            }
        }
    }
    Ok(wr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy_a() -> Matrix {
        Matrix::from_rows(&[&[0.5, 0.5], &[0.0, 1.0 / 3.0]])
    }

    fn sorted_re(mut z: Vec<Complex64>) -> Vec<Complex64> {
        z.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        z
    }

    #[test]
    fn solve_toy_system() {
        // Hand elimination: y2 = 1/(1/3) = 3, y1 = (1 - 3/2)/(1/2) = -1.
        let w = solve(&toy_a(), &Vector::new(vec![1.0, 1.0])).unwrap();
        assert_relative_eq!(w[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(w[1], 3.0, epsilon = 1e-14);
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let v = Vector::new(vec![0.3, -2.0, 7.5]);
        assert_eq!(solve(&Matrix::identity(3), &v).unwrap(), v);
        let d = Matrix::from_diagonal(&[2.0, 4.0]);
        let w = solve(&d, &Vector::new(vec![2.0, 4.0])).unwrap();
        assert_eq!(w.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn singular_is_rejected() {
        let s = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert_eq!(Lu::new(&s).unwrap_err(), Error::SingularMatrix);
        assert_eq!(inverse(&Matrix::zeros(2, 2)).unwrap_err(), Error::SingularMatrix);
    }

    #[test]
    fn inverse_toy_matrix() {
        let inv = inverse(&toy_a()).unwrap();
        let expected = Matrix::from_rows(&[&[2.0, -3.0], &[0.0, 3.0]]);
        for (a, b) in inv.as_slice().iter().zip(expected.as_slice()) {
            assert_relative_eq!(a, b, epsilon = 1e-13);
        }
        // direct multiplication oracle
        let prod = &toy_a() * &inv;
        for i in 0..2 {
            for j in 0..2 {
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - id).abs() < 1e-12);
            }
        }
        assert_eq!(inverse(&Matrix::identity(3)).unwrap(), Matrix::identity(3));
        let d = inverse(&Matrix::from_diagonal(&[2.0, 4.0])).unwrap();
        assert_eq!(d, Matrix::from_diagonal(&[0.5, 0.25]));
    }

    #[test]
    fn exp_of_zero_and_diagonal() {
        assert_eq!(mat_exp(&Matrix::zeros(3, 3)).unwrap(), Matrix::identity(3));
        let e = mat_exp(&Matrix::from_diagonal(&[-1.0, -2.0])).unwrap();
        assert_relative_eq!(e[(0, 0)], (-1.0f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(e[(1, 1)], (-2.0f64).exp(), max_relative = 1e-14);
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn exp_of_rotation_generator() {
        let theta = 2.3;
        let m = Matrix::from_rows(&[&[0.0, -theta], &[theta, 0.0]]);
        let e = mat_exp(&m).unwrap();
        assert_relative_eq!(e[(0, 0)], theta.cos(), epsilon = 1e-14);
        assert_relative_eq!(e[(1, 0)], theta.sin(), epsilon = 1e-14);
    }

    #[test]
    fn exp_large_norm_uses_squaring() {
        let e = mat_exp(&Matrix::from_diagonal(&[-300.0, 5.0])).unwrap();
        assert_relative_eq!(e[(1, 1)], 5.0f64.exp(), max_relative = 1e-12);
        assert!(e[(0, 0)] >= 0.0 && e[(0, 0)] < 1e-100);
    }

    #[test]
    fn exp_overflow_is_signalled() {
        let err = mat_exp(&Matrix::from_diagonal(&[800.0])).unwrap_err();
        assert_eq!(err, Error::Overflow);
    }

    #[test]
    fn eigenvalues_small_cases() {
        let ev = sorted_re(eigenvalues(&toy_a()).unwrap());
        assert_relative_eq!(ev[0].re, 1.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(ev[1].re, 0.5, epsilon = 1e-14);
        assert!(ev.iter().all(|z| z.im == 0.0));

        let ev = eigenvalues(&Matrix::identity(2)).unwrap();
        assert!(ev.iter().all(|z| (z.re - 1.0).abs() < 1e-14 && z.im == 0.0));

        let rot = Matrix::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]]);
        let ev = sorted_re(eigenvalues(&rot).unwrap());
        assert!(ev[0].re.abs() < 1e-14 && (ev[0].im + 1.0).abs() < 1e-14);
        assert!(ev[1].re.abs() < 1e-14 && (ev[1].im - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigenvalues_of_companion_matrix() {
        // roots 1, 2, 3, 4 of (x-1)(x-2)(x-3)(x-4) = x^4 - 10x^3 + 35x^2 - 50x + 24
        let c = Matrix::from_rows(&[
            &[10.0, -35.0, 50.0, -24.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
        ]);
        let ev = sorted_re(eigenvalues(&c).unwrap());
        for (z, root) in ev.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert_relative_eq!(z.re, root, max_relative = 1e-10);
            assert!(z.im.abs() < 1e-10);
        }
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let d = Matrix::from_diagonal(&[-3.0, 2.0, 0.5]);
        assert_relative_eq!(d.norm_2().unwrap(), 3.0, max_relative = 1e-12);
    }
}
