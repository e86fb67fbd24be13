//! Symmetric matrix storage (banded or dense) and the factorizations the
//! solvers need: Cholesky for SPD systems, LU with partial pivoting for the
//! indefinite Helmholtz system, and a Hager 1-norm condition estimate.
//!
//! Band storage keeps the upper triangle row by row: `data[i*(bw+1) + d]`
//! holds `A[i][i+d]`. Dense matrices delegate to `nalgebra`.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        let bw = bw.min(n.saturating_sub(1));
        BandedSym { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.bw
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        if j - i > self.bw {
            0.0
        } else {
            self.data[i * (self.bw + 1) + (j - i)]
        }
    }

    /// Sets `A[i][j]` and `A[j][i]`. Panics outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        assert!(j - i <= self.bw, "({i}, {j}) outside half-bandwidth {}", self.bw);
        self.data[i * (self.bw + 1) + (j - i)] = v;
    }

    /// Row `i` of the upper triangle: `A[i][i..=i+bw]` (trailing entries past
    /// `n` are zero).
    pub fn upper_row_mut(&mut self, i: usize) -> &mut [f64] {
        let w = self.bw + 1;
        &mut self.data[i * w..(i + 1) * w]
    }
}

/// A real symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum SymMatrix {
    Banded(BandedSym),
    Dense(DMatrix<f64>),
}

/// Banded storage pays off only while the band is a small fraction of `n`.
pub fn prefers_banded(n: usize, bw: usize) -> bool {
    4 * bw < n
}

impl SymMatrix {
    /// Zero matrix stored banded or dense according to [`prefers_banded`].
    pub fn zeros(n: usize, bw: usize) -> Self {
        if prefers_banded(n, bw) {
            SymMatrix::Banded(BandedSym::zeros(n, bw))
        } else {
            SymMatrix::Dense(DMatrix::zeros(n, n))
        }
    }

    pub fn from_tridiagonal(diag: &[f64], off: &[f64]) -> Self {
        let n = diag.len();
        assert_eq!(off.len(), n.saturating_sub(1));
        let mut b = BandedSym::zeros(n, 1);
        for i in 0..n {
            b.set(i, i, diag[i]);
            if i + 1 < n {
                b.set(i, i + 1, off[i]);
            }
        }
        SymMatrix::Banded(b)
    }

    pub fn from_dense(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(invalid("matrix", format!("not square: {}x{}", m.nrows(), m.ncols())));
        }
        Ok(SymMatrix::Dense(m))
    }

    pub fn n(&self) -> usize {
        match self {
            SymMatrix::Banded(b) => b.n,
            SymMatrix::Dense(d) => d.nrows(),
        }
    }

    pub fn is_banded(&self) -> bool {
        matches!(self, SymMatrix::Banded(_))
    }

    /// Stored half-bandwidth; for dense storage the actual bandwidth of the
    /// nonzero pattern.
    pub fn half_bandwidth(&self) -> usize {
        match self {
            SymMatrix::Banded(b) => b.bw,
            SymMatrix::Dense(d) => {
                let n = d.nrows();
                let mut bw = 0;
                for i in 0..n {
                    for j in (i + bw + 1)..n {
                        if d[(i, j)] != 0.0 {
                            bw = j - i;
                        }
                    }
                }
                bw
            }
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            SymMatrix::Banded(b) => b.get(i, j),
            SymMatrix::Dense(d) => d[(i, j)],
        }
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        match self {
            SymMatrix::Banded(b) => b.set(i, j, v),
            SymMatrix::Dense(d) => {
                d[(i, j)] = v;
                d[(j, i)] = v;
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            SymMatrix::Dense(d) => d.clone(),
            SymMatrix::Banded(b) => {
                let mut d = DMatrix::zeros(b.n, b.n);
                for i in 0..b.n {
                    for j in i..(i + b.bw + 1).min(b.n) {
                        let v = b.get(i, j);
                        d[(i, j)] = v;
                        d[(j, i)] = v;
                    }
                }
                d
            }
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(x.len(), n);
        match self {
            SymMatrix::Dense(d) => (d * DVector::from_column_slice(x)).as_slice().to_vec(),
            SymMatrix::Banded(b) => {
                let mut y = vec![0.0; n];
                let w = b.bw + 1;
                for i in 0..n {
                    let row = &b.data[i * w..(i + 1) * w];
                    y[i] += row[0] * x[i];
                    for d in 1..w {
                        let j = i + d;
                        if j >= n {
                            break;
                        }
                        y[i] += row[d] * x[j];
                        y[j] += row[d] * x[i];
                    }
                }
                y
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            SymMatrix::Dense(d) => d.amax(),
            SymMatrix::Banded(b) => b.data.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// Induced 1-norm (equal to the infinity norm by symmetry).
    pub fn norm1(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|i| {
                let (lo, hi) = self.row_range(i);
                (lo..hi).map(|j| self.get(i, j).abs()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Column range `[lo, hi)` that can hold nonzeros in row `i`.
    pub fn row_range(&self, i: usize) -> (usize, usize) {
        match self {
            SymMatrix::Banded(b) => (i.saturating_sub(b.bw), (i + b.bw + 1).min(b.n)),
            SymMatrix::Dense(d) => (0, d.nrows()),
        }
    }

    /// `alpha * self + beta * other`, banded only if both operands are.
    pub fn combine(&self, alpha: f64, other: &SymMatrix, beta: f64) -> Result<SymMatrix> {
        let n = self.n();
        if other.n() != n {
            return Err(Error::MeshMismatch(format!("matrix sizes {n} and {}", other.n())));
        }
        match (self, other) {
            (SymMatrix::Banded(a), SymMatrix::Banded(b)) => {
                let mut out = BandedSym::zeros(n, a.bw.max(b.bw));
                for i in 0..n {
                    for j in i..(i + out.bw + 1).min(n) {
                        out.set(i, j, alpha * a.get(i, j) + beta * b.get(i, j));
                    }
                }
                Ok(SymMatrix::Banded(out))
            }
            _ => Ok(SymMatrix::Dense(self.to_dense() * alpha + other.to_dense() * beta)),
        }
    }

    pub fn cholesky(&self) -> Result<CholeskyFactor> {
        match self {
            SymMatrix::Banded(b) => band_cholesky(b).map(CholeskyFactor::Banded),
            SymMatrix::Dense(d) => {
                let ch = nalgebra::Cholesky::new(d.clone()).ok_or_else(|| Error::Factorization {
                    pivot: 0,
                    reason: "matrix is not positive definite".into(),
                })?;
                Ok(CholeskyFactor::Dense(ch))
            }
        }
    }

    pub fn lu(&self) -> Result<LuFactor> {
        match self {
            SymMatrix::Banded(b) => band_lu(b).map(LuFactor::Banded),
            SymMatrix::Dense(d) => {
                let lu = d.clone().lu();
                if (0..d.nrows()).any(|i| lu.u()[(i, i)] == 0.0) {
                    return Err(Error::Factorization { pivot: 0, reason: "exactly singular".into() });
                }
                Ok(LuFactor::Dense(lu))
            }
        }
    }

    /// Coordinate dump, one `i j value` line per stored entry, 1-based,
    /// both triangles.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.n();
        for i in 0..n {
            let (lo, hi) = self.row_range(i);
            for j in lo..hi {
                let v = self.get(i, j);
                if v != 0.0 || i == j {
                    writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
                }
            }
        }
        Ok(())
    }

    /// Reads a coordinate dump of an `n x n` matrix, symmetrizing as
    /// `(A + A^T) / 2`.
    pub fn read_coordinate<R: BufRead>(r: R, n: usize) -> Result<SymMatrix> {
        let mut entries = Vec::new();
        let mut bw = 0usize;
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| invalid("matrix", e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parse_err = || invalid("matrix", format!("line {}: expected `i j value`", lineno + 1));
            if parts.len() != 3 {
                return Err(parse_err());
            }
            let i: usize = parts[0].parse().map_err(|_| parse_err())?;
            let j: usize = parts[1].parse().map_err(|_| parse_err())?;
            let v: f64 = parts[2].parse().map_err(|_| parse_err())?;
            if i == 0 || j == 0 || i > n || j > n {
                return Err(Error::IndexOutOfRange(format!("({i}, {j}) in a {n}x{n} matrix")));
            }
            bw = bw.max(i.abs_diff(j));
            entries.push((i - 1, j - 1, v));
        }
        let mut full = DMatrix::zeros(n, n);
        for (i, j, v) in entries {
            full[(i, j)] = v;
        }
        let mut m = SymMatrix::zeros(n, bw);
        for i in 0..n {
            for j in i..(i + bw + 1).min(n) {
                m.set(i, j, 0.5 * (full[(i, j)] + full[(j, i)]));
            }
        }
        Ok(m)
    }
}

/// Lower Cholesky factor in band form: `l[i*(bw+1) + d] = L[i][i-d]`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

fn band_cholesky(a: &BandedSym) -> Result<BandCholesky> {
    let (n, bw) = (a.n, a.bw);
    let w = bw + 1;
    let mut l = vec![0.0; n * w];
    for i in 0..n {
        let k0 = i.saturating_sub(bw);
        for j in k0..=i {
            // L[i][j] = (A[i][j] - sum_k L[i][k] L[j][k]) / L[j][j]
            let mut s = a.get(j, i);
            let kk = k0.max(j.saturating_sub(bw));
            for k in kk..j {
                s -= l[i * w + (i - k)] * l[j * w + (j - k)];
            }
            if j == i {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::Factorization {
                        pivot: i,
                        reason: format!("nonpositive pivot {s:e}; matrix is not positive definite"),
                    });
                }
                l[i * w] = s.sqrt();
            } else {
                l[i * w + (i - j)] = s / l[j * w];
            }
        }
    }
    Ok(BandCholesky { n, bw, l })
}

impl BandCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * w + (i - k)] * y[k];
            }
            y[i] = s / self.l[i * w];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..(i + w).min(n) {
                s -= self.l[k * w + (k - i)] * y[k];
            }
            y[i] = s / self.l[i * w];
        }
        y
    }
}

#[derive(Debug, Clone)]
pub enum CholeskyFactor {
    Banded(BandCholesky),
    Dense(nalgebra::Cholesky<f64, nalgebra::Dyn>),
}

impl CholeskyFactor {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            CholeskyFactor::Banded(f) => f.solve(b),
            CholeskyFactor::Dense(f) => f.solve(&DVector::from_column_slice(b)).as_slice().to_vec(),
        }
    }
}

/// Band LU with partial pivoting. Row `i` stores columns
/// `i-kl ..= i+kl+ku`; pivoting fills at most `kl` extra superdiagonals.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    width: usize,
    ab: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn hi(&self, i: usize) -> usize {
        (i + self.width - self.kl).min(self.n)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            for i in (k + 1)..(k + self.kl + 1).min(n) {
                x[i] -= self.ab[self.idx(i, k)] * x[k];
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..self.hi(i) {
                s -= self.ab[self.idx(i, j)] * x[j];
            }
            x[i] = s / self.ab[self.idx(i, i)];
        }
        x
    }
}

fn band_lu(a: &BandedSym) -> Result<BandLu> {
    let n = a.n;
    let kl = a.bw;
    let width = 3 * kl + 1;
    let mut f = BandLu { n, kl, width, ab: vec![0.0; n * width], piv: vec![0; n] };
    for i in 0..n {
        for j in i.saturating_sub(kl)..(i + kl + 1).min(n) {
            let id = f.idx(i, j);
            f.ab[id] = a.get(i, j);
        }
    }
    let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for k in 0..n {
        let last = (k + kl).min(n - 1);
        let mut p = k;
        let mut best = f.ab[f.idx(k, k)].abs();
        for i in (k + 1)..=last {
            let v = f.ab[f.idx(i, k)].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 || best <= f64::EPSILON * 1e-6 * scale {
            return Err(Error::Factorization { pivot: k, reason: "matrix is singular to working precision".into() });
        }
        f.piv[k] = p;
        let hi = f.hi(k);
        if p != k {
            for j in k..hi {
                let (ik, ip) = (f.idx(k, j), f.idx(p, j));
                f.ab.swap(ik, ip);
            }
        }
        let pivot = f.ab[f.idx(k, k)];
        for i in (k + 1)..=last {
            let id = f.idx(i, k);
            let m = f.ab[id] / pivot;
            f.ab[id] = m;
            if m != 0.0 {
                for j in (k + 1)..hi {
                    let (ij, kj) = (f.idx(i, j), f.idx(k, j));
                    f.ab[ij] -= m * f.ab[kj];
                }
            }
        }
    }
    Ok(f)
}

#[derive(Debug, Clone)]
pub enum LuFactor {
    Banded(BandLu),
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl LuFactor {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            LuFactor::Banded(f) => f.solve(b),
            LuFactor::Dense(f) => f
                .solve(&DVector::from_column_slice(b))
                .map(|v| v.as_slice().to_vec())
                .unwrap_or_else(|| vec![f64::NAN; b.len()]),
        }
    }
}

/// Hager's estimate of `||A^{-1}||_1` for symmetric `A`, given any solver
/// for `A x = b`.
pub fn inverse_norm1_estimate(n: usize, solve: impl Fn(&[f64]) -> Vec<f64>) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut x = vec![1.0 / n as f64; n];
    let mut est = 0.0;
    for _ in 0..5 {
        let y = solve(&x);
        let new_est: f64 = y.iter().map(|v| v.abs()).sum();
        if !new_est.is_finite() {
            return f64::INFINITY;
        }
        let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
        let z = solve(&xi);
        let (jmax, zmax) = z
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
        if new_est <= est || zmax <= ztx {
            est = est.max(new_est);
            break;
        }
        est = new_est;
        x = vec![0.0; n];
        x[jmax] = 1.0;
    }
    est
}

/// 1-norm condition estimate of a symmetric matrix with a computed LU.
pub fn condition_estimate(a: &SymMatrix, f: &LuFactor) -> f64 {
    a.norm1() * inverse_norm1_estimate(a.n(), |b| f.solve(b))
}

pub fn max_abs_vec(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn laplacian(n: usize) -> SymMatrix {
        SymMatrix::from_tridiagonal(&vec![2.0; n], &vec![-1.0; n - 1])
    }

    fn residual(a: &SymMatrix, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.matvec(x);
        ax.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn storage_rule() {
        assert!(SymMatrix::zeros(100, 5).is_banded());
        assert!(!SymMatrix::zeros(100, 25).is_banded());
    }

    #[test]
    fn banded_cholesky_solves_laplacian() {
        let a = laplacian(50);
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let x = a.cholesky().unwrap().solve(&b);
        assert!(residual(&a, &x, &b) < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = SymMatrix::from_tridiagonal(&[1.0, 1.0], &[2.0]);
        assert!(matches!(a.cholesky(), Err(Error::Factorization { .. })));
    }

    #[test]
    fn band_lu_handles_indefinite() {
        let n = 40;
        let diag: Vec<f64> = (0..n).map(|i| if i % 3 == 0 { -0.5 } else { 2.0 }).collect();
        let a = SymMatrix::from_tridiagonal(&diag, &vec![-1.0; n - 1]);
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let x = a.lu().unwrap().solve(&b);
        let xd = a.to_dense().lu().solve(&DVector::from_column_slice(&b)).unwrap();
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() < 1e-10 * xd.amax());
        }
    }

    #[test]
    fn condition_estimate_of_diagonal() {
        let a = SymMatrix::from_tridiagonal(&(1..=10).map(|i| i as f64).collect::<Vec<_>>(), &[0.0; 9]);
        let f = a.lu().unwrap();
        assert!((condition_estimate(&a, &f) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn coordinate_roundtrip_is_idempotent() {
        let a = laplacian(6);
        let mut buf = Vec::new();
        a.write_coordinate(&mut buf).unwrap();
        let back = SymMatrix::read_coordinate(&buf[..], 6).unwrap();
        let mut buf2 = Vec::new();
        back.write_coordinate(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
        assert_eq!(back.to_dense(), a.to_dense());
    }

    fn random_banded(n: usize, bw: usize, seed: &[f64]) -> BandedSym {
        let mut b = BandedSym::zeros(n, bw);
        let mut k = 0;
        for i in 0..n {
            for j in i..(i + bw + 1).min(n) {
                b.set(i, j, seed[k % seed.len()]);
                k += 1;
            }
        }
        b
    }

    proptest! {
        #[test]
        fn banded_ops_match_dense(n in 2usize..30, bw in 0usize..6, seed in prop::collection::vec(-1.0f64..1.0, 1..40), shift in 0.0f64..3.0) {
            let mut b = random_banded(n, bw, &seed);
            // diagonal dominance makes it SPD
            for i in 0..n {
                let v = b.get(i, i);
                b.set(i, i, v.abs() + 2.0 * (b.bw as f64) + 1.0 + shift);
            }
            let a = SymMatrix::Banded(b);
            let d = a.to_dense();
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
            let y1 = a.matvec(&x);
            let y2 = &d * DVector::from_column_slice(&x);
            for i in 0..n {
                prop_assert!((y1[i] - y2[i]).abs() < 1e-12);
            }
            let sol = a.cholesky().unwrap().solve(&x);
            prop_assert!(residual(&a, &sol, &x) < 1e-11);
            let sol2 = a.lu().unwrap().solve(&x);
            prop_assert!(residual(&a, &sol2, &x) < 1e-11);
            let dense = SymMatrix::Dense(d);
            let sol3 = dense.cholesky().unwrap().solve(&x);
            prop_assert!(residual(&dense, &sol3, &x) < 1e-11);
        }
    }
}
