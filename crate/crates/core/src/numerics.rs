//! Dense small-matrix kernels: matrix exponential, zero-order-hold
//! discretization, Lyapunov solve, single-input pole placement, induced
//! norms and spectral checks.
//!
//! Everything here is a pure function of its inputs. Matrices are
//! `nalgebra` dynamic matrices; nalgebra supplies LU, Cholesky, SVD and the
//! real Schur form, the algorithms on top are implemented here.

use nalgebra::{Cholesky, Complex, DMatrix, DVector, Schur, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Matrix norm used for every distance and bound in the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    /// Induced 2-norm (largest singular value).
    #[default]
    Spectral,
    Frobenius,
}

impl std::fmt::Display for NormKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NormKind::Spectral => f.write_str("spectral"),
            NormKind::Frobenius => f.write_str("frobenius"),
        }
    }
}

/// Largest Lyapunov problem solved through the Kronecker form.
pub const LYAPUNOV_MAX_DIM: usize = 32;

// Padé(13) coefficients and the 1-norm threshold below which no scaling is
// needed (Higham 2005).
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371_920_351_148_152;

pub(crate) fn ensure_square(m: &Matrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub(crate) fn ensure_finite(m: &Matrix) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn one_norm(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring around a fixed Padé(13) core.
pub fn expm(m: &Matrix) -> Result<Matrix> {
    let n = ensure_square(m)?;
    ensure_finite(m)?;
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let norm = one_norm(m);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m / 2f64.powi(squarings);
    let mut e = pade13(&scaled)?;
    for _ in 0..squarings {
        e = &e * &e;
    }
    Ok(e)
}

fn pade13(a: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    let b = &PADE13;
    let ident = Matrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let inner_u = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = a * (&a6 * inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1]);
    let inner_v = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];

    let denom = &v - &u;
    let numer = v + u;
    denom.lu().solve(&numer).ok_or(Error::Singular)
}

/// Exact discretization of `x' = A x + B u` under a held input:
/// `Ad = e^{A dt}`, `Bd = (int_0^dt e^{A s} ds) B`.
///
/// Uses the exponential of the augmented block `[[A, B], [0, 0]] dt`, so `A`
/// may be singular.
pub fn zoh_discretize(a: &Matrix, b: &Matrix, dt: f64) -> Result<(Matrix, Matrix)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::NonPositiveStep(dt));
    }
    let n = ensure_square(a)?;
    if b.nrows() != n {
        return Err(Error::Dimension(format!(
            "B has {} rows, A is {n}x{n}",
            b.nrows()
        )));
    }
    let m = b.ncols();
    let mut block = Matrix::zeros(n + m, n + m);
    block.view_mut((0, 0), (n, n)).copy_from(&(a * dt));
    block.view_mut((0, n), (n, m)).copy_from(&(b * dt));
    let e = expm(&block)?;
    let ad = e.view((0, 0), (n, n)).into_owned();
    let bd = e.view((0, n), (n, m)).into_owned();
    Ok((ad, bd))
}

/// All eigenvalues of a square real matrix (real Schur form).
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex<f64>>> {
    ensure_square(m)?;
    ensure_finite(m)?;
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000).ok_or(Error::EigenNoConvergence)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Returns whether every eigenvalue has negative real part, together with
/// the spectral abscissa (largest real part).
pub fn is_hurwitz(m: &Matrix) -> Result<(bool, f64)> {
    let abscissa = eigenvalues(m)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((abscissa < 0.0, abscissa))
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn symmetric_eigen_range(m: &Matrix) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

pub fn is_symmetric(m: &Matrix, tol: f64) -> bool {
    m.nrows() == m.ncols() && (m - m.transpose()).amax() <= tol * m.amax().max(1.0)
}

pub fn is_positive_definite(m: &Matrix) -> bool {
    is_symmetric(m, 1e-10) && Cholesky::new(m.clone()).is_some()
}

/// Solves `Hᵀ S + S H = -Q` for symmetric positive-definite `S`.
///
/// Vectorizes the equation as `(I ⊗ Hᵀ + Hᵀ ⊗ I) vec(S) = -vec(Q)`; the
/// dimension is capped at [`LYAPUNOV_MAX_DIM`].
pub fn solve_lyapunov(h: &Matrix, q: &Matrix) -> Result<Matrix> {
    let n = ensure_square(h)?;
    ensure_finite(h)?;
    ensure_finite(q)?;
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::Dimension(format!("Q must be {n}x{n}")));
    }
    if n > LYAPUNOV_MAX_DIM {
        return Err(Error::TooLarge {
            n,
            max: LYAPUNOV_MAX_DIM,
        });
    }
    let (stable, abscissa) = is_hurwitz(h)?;
    if !stable {
        return Err(Error::NotHurwitz(abscissa));
    }
    if !is_positive_definite(q) {
        return Err(Error::NotPositiveDefinite);
    }

    let ht = h.transpose();
    let ident = Matrix::identity(n, n);
    let lhs = ident.kronecker(&ht) + ht.kronecker(&ident);
    // nalgebra storage is column-major, so the raw slice is vec(Q).
    let rhs = -DVector::from_column_slice(q.as_slice());
    let vec_s = lhs.lu().solve(&rhs).ok_or(Error::Singular)?;
    let s = Matrix::from_column_slice(n, n, vec_s.as_slice());
    Ok((&s + s.transpose()) * 0.5)
}

/// Real coefficients (ascending degree, monic) of `prod (s - p)`.
fn characteristic_polynomial(poles: &[Complex<f64>]) -> Result<Vec<f64>> {
    let scale = poles.iter().map(|p| p.norm()).fold(1.0, f64::max);
    let tol = 1e-9 * scale;

    let mut remaining: Vec<Complex<f64>> = poles.to_vec();
    while let Some(p) = remaining.pop() {
        if p.im.abs() <= tol {
            continue;
        }
        let conj = p.conj();
        let partner = remaining
            .iter()
            .position(|z| (z - conj).norm() <= tol)
            .ok_or_else(|| Error::InvalidPoles(format!("{p} has no conjugate partner")))?;
        remaining.swap_remove(partner);
    }

    let mut coeffs = vec![Complex::new(1.0, 0.0)];
    for p in poles {
        let mut next = vec![Complex::new(0.0, 0.0); coeffs.len() + 1];
        for (k, c) in coeffs.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= c * p;
        }
        coeffs = next;
    }
    Ok(coeffs.iter().map(|c| c.re).collect())
}

/// Single-input pole placement by Ackermann's formula.
///
/// Returns the row gain `K` such that the eigenvalues of `A + B K` are the
/// requested poles.
pub fn pole_place(a: &Matrix, b: &Matrix, poles: &[Complex<f64>]) -> Result<Matrix> {
    let n = ensure_square(a)?;
    ensure_finite(a)?;
    ensure_finite(b)?;
    if b.nrows() != n || b.ncols() != 1 {
        return Err(Error::Dimension(format!(
            "B must be a {n}x1 column, got {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    if poles.len() != n {
        return Err(Error::InvalidPoles(format!(
            "expected {n} poles, got {}",
            poles.len()
        )));
    }
    if poles.iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
        return Err(Error::InvalidPoles("non-finite pole".into()));
    }
    let coeffs = characteristic_polynomial(poles)?;

    let mut ctrb = Matrix::zeros(n, n);
    let mut col = b.clone();
    for k in 0..n {
        ctrb.set_column(k, &col.column(0));
        col = a * col;
    }
    let sv = ctrb.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if smax == 0.0 || smin <= 1e-12 * smax {
        return Err(Error::Uncontrollable);
    }

    // phi(A) by Horner's rule.
    let ident = Matrix::identity(n, n);
    let mut phi = ident.clone();
    for k in (0..n).rev() {
        phi = a * phi + &ident * coeffs[k];
    }

    let mut last = Vector::zeros(n);
    last[n - 1] = 1.0;
    let y = ctrb
        .transpose()
        .lu()
        .solve(&last)
        .ok_or(Error::Uncontrollable)?;
    let k = -(y.transpose() * phi);
    Ok(Matrix::from_row_slice(1, n, k.as_slice()))
}

/// Induced 2-norm as the largest singular value.
///
/// Power iteration on the Gram matrix stalls far from the answer when the
/// top singular values are clustered, so a full SVD is used instead.
fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn induced_norm(m: &Matrix, kind: NormKind) -> f64 {
    match kind {
        NormKind::Spectral => spectral_norm(m),
        NormKind::Frobenius => m.norm(),
    }
}

/// Top singular pair `(u, v)` of `m`, used for spectral-norm subgradients.
pub(crate) fn top_singular_pair(m: &Matrix) -> (Vector, Vector) {
    let svd = m.clone().svd(true, true);
    let idx = svd.singular_values.imax();
    let u = svd.u.as_ref().unwrap().column(idx).into_owned();
    let v = svd.v_t.as_ref().unwrap().row(idx).transpose();
    (u, v)
}

/// Row-major nested rows of `m`.
pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Matrix from row-major nested rows; all rows must have equal length.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    let m = Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]);
    ensure_finite(&m)?;
    Ok(m)
}

/// Serde adapter storing a matrix as row-major nested arrays.
pub mod rows_serde {
    use super::{from_rows, to_rows, Matrix};
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(D::Error::custom)
    }
}

/// Serde adapter for a list of matrices, each as row-major nested arrays.
pub mod rows_list_serde {
    use super::{from_rows, to_rows, Matrix};
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(ms: &[Matrix], s: S) -> std::result::Result<S::Ok, S::Error> {
        ms.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<Matrix>, D::Error> {
        let lists = Vec::<Vec<Vec<f64>>>::deserialize(d)?;
        lists
            .iter()
            .map(|r| from_rows(r).map_err(D::Error::custom))
            .collect()
    }
}
