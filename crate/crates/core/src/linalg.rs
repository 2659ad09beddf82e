//! Dense kernels: SVD rank and null spaces, eigenvalues, polynomial roots and
//! least squares. Storage is nalgebra; singular value decompositions run in faer.

use nalgebra::{Complex, ComplexField, DMatrix, DVector, Schur};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{lit, real_c, Real};

pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

pub(crate) fn complexify<T: Real>(m: &DMatrix<T>) -> CMatrix<T> {
    m.map(real_c)
}

pub(crate) fn ensure_finite_c<T: Real>(m: &CMatrix<T>, what: &str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

pub(crate) fn ensure_finite<T: Real>(m: &DMatrix<T>, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Deterministic generator for one randomized step. `stream` separates the
/// draws of independent steps that share a seed.
pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn random_matrix<T: Real>(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<T> {
    DMatrix::from_fn(rows, cols, |_, _| lit(rng.gen_range(-1.0..1.0)))
}

/// Singular values in descending order.
pub fn singular_values<T: Real>(m: &CMatrix<T>) -> Result<Vec<T>> {
    ensure_finite_c(m, "SVD argument")?;
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    Ok(T::svd_complex(m, false)?.s)
}

/// Singular value decomposition with singular values in descending order and
/// singular vectors as columns of `u` and `v`, so `m = u diag(s) v^H`.
/// Thin unless requested `full`, in which case `u` and `v` are square.
#[derive(Debug, Clone)]
pub struct Svd<R, S: nalgebra::Scalar> {
    pub u: DMatrix<S>,
    pub s: Vec<R>,
    pub v: DMatrix<S>,
}

fn rank_cutoff<T: Real>(sigma_max: T, rows: usize, cols: usize, rtol: f64) -> T {
    lit::<T>(rtol) * sigma_max * lit::<T>(rows.max(cols) as f64)
}

/// Numerical rank: the number of singular values above
/// `rtol * sigma_max * max(rows, cols)`.
pub fn numerical_rank<T: Real>(m: &CMatrix<T>, rtol: f64) -> Result<usize> {
    ensure_finite_c(m, "rank argument")?;
    let sv = singular_values(m)?;
    Ok(count_above(&sv, m.nrows(), m.ncols(), rtol))
}

fn count_above<T: Real>(sv: &[T], rows: usize, cols: usize, rtol: f64) -> usize {
    let Some(&smax) = sv.first() else { return 0 };
    if smax <= T::zero() {
        return 0;
    }
    let cut = rank_cutoff(smax, rows, cols, rtol);
    sv.iter().filter(|&&s| s > cut).count()
}

pub fn real_rank<T: Real>(m: &DMatrix<T>, rtol: f64) -> Result<usize> {
    ensure_finite(m, "rank argument")?;
    numerical_rank(&complexify(m), rtol)
}

/// Numerical rank together with an orthonormal basis (as columns) of the
/// right null space.
pub fn null_space<T: Real>(m: &CMatrix<T>, rtol: f64) -> Result<(usize, CMatrix<T>)> {
    ensure_finite_c(m, "null space argument")?;
    let (rows, cols) = m.shape();
    if cols == 0 {
        return Ok((0, CMatrix::zeros(0, 0)));
    }
    if rows == 0 {
        return Ok((0, CMatrix::identity(cols, cols)));
    }
    let svd = T::svd_complex(m, true)?;
    let null_idx = null_indices(&svd.s, rows, cols, rtol);
    let basis = CMatrix::from_fn(cols, null_idx.len(), |r, c| svd.v[(r, null_idx[c])]);
    Ok((cols - null_idx.len(), basis))
}

/// Columns of the full `V` outside the numerical range: indices at or beyond
/// the rank.
fn null_indices<T: Real>(sv: &[T], rows: usize, cols: usize, rtol: f64) -> Vec<usize> {
    let rank = count_above(sv, rows, cols, rtol);
    (rank..cols).collect()
}

/// Real counterpart of [`null_space`].
pub fn real_null_space<T: Real>(m: &DMatrix<T>, rtol: f64) -> Result<(usize, DMatrix<T>)> {
    ensure_finite(m, "null space argument")?;
    let (rows, cols) = m.shape();
    if cols == 0 {
        return Ok((0, DMatrix::zeros(0, 0)));
    }
    if rows == 0 {
        return Ok((0, DMatrix::identity(cols, cols)));
    }
    let svd = T::svd_real(m, true)?;
    let null_idx = null_indices(&svd.s, rows, cols, rtol);
    let basis = DMatrix::from_fn(cols, null_idx.len(), |r, c| svd.v[(r, null_idx[c])]);
    Ok((cols - null_idx.len(), basis))
}

/// Eigenvalues of a real square matrix through its real Schur form.
pub fn eigenvalues<T: Real>(a: &DMatrix<T>) -> Result<Vec<Complex<T>>> {
    ensure_finite(a, "eigenvalue argument")?;
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![real_c(a[(0, 0)])]);
    }
    let schur = Schur::try_new(a.clone(), T::default_epsilon(), 100_000)
        .ok_or_else(|| Error::Numeric("Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

pub fn spectral_radius<T: Real>(eigs: &[Complex<T>]) -> T {
    eigs.iter().map(|z| z.modulus()).fold(T::zero(), |a, b| if b > a { b } else { a })
}

/// Roots of `c[0] + c[1] z + ... + c[d] z^d` with `c[d] != 0`, via companion
/// matrix eigenvalues.
pub fn poly_roots<T: Real>(coeffs: &[T]) -> Result<Vec<Complex<T>>> {
    let d = coeffs.len().saturating_sub(1);
    if d == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[d];
    if lead == T::zero() {
        return Err(Error::Numeric("leading polynomial coefficient is zero".into()));
    }
    if d == 1 {
        return Ok(vec![real_c(-coeffs[0] / lead)]);
    }
    let mut comp = DMatrix::<T>::zeros(d, d);
    for i in 1..d {
        comp[(i, i - 1)] = T::one();
    }
    for i in 0..d {
        comp[(i, d - 1)] = -coeffs[i] / lead;
    }
    eigenvalues(&comp)
}

/// Solution of a real least-squares problem.
#[derive(Debug, Clone)]
pub struct LeastSquares<T: Real> {
    pub x: DVector<T>,
    pub rank: usize,
    /// Ratio of extreme retained singular values of the column-scaled matrix.
    pub condition: T,
}

/// Minimum-norm least squares `min ||A x - b||` with column equilibration and
/// relative singular-value truncation.
pub fn lstsq<T: Real>(a: &DMatrix<T>, b: &DVector<T>, rtol: f64) -> Result<LeastSquares<T>> {
    ensure_finite(a, "least-squares matrix")?;
    ensure_finite(&DMatrix::from_column_slice(b.len(), 1, b.as_slice()), "least-squares rhs")?;
    let (rows, cols) = a.shape();
    if cols == 0 {
        return Ok(LeastSquares { x: DVector::zeros(0), rank: 0, condition: T::one() });
    }
    if rows == 0 {
        return Ok(LeastSquares { x: DVector::zeros(cols), rank: 0, condition: T::one() });
    }
    let scales: Vec<T> = (0..cols)
        .map(|j| {
            let s = a.column(j).norm();
            if s > T::zero() { s } else { T::one() }
        })
        .collect();
    let mut scaled = a.clone();
    for (j, s) in scales.iter().enumerate() {
        scaled.column_mut(j).unscale_mut(*s);
    }
    let svd = T::svd_real(&scaled, false)?;
    let (u, sv) = (&svd.u, &svd.s);
    let smax = sv.first().copied().unwrap_or(T::zero());
    let mut rank = 0;
    let mut smin = smax;
    let mut y = DVector::<T>::zeros(sv.len());
    if smax > T::zero() {
        let cut = rank_cutoff(smax, rows, cols, rtol);
        let utb = u.transpose() * b;
        for j in 0..sv.len() {
            if sv[j] > cut {
                y[j] = utb[j] / sv[j];
                rank += 1;
                if sv[j] < smin {
                    smin = sv[j];
                }
            }
        }
    }
    let mut x = &svd.v * y;
    for (j, s) in scales.iter().enumerate() {
        x[j] /= *s;
    }
    let condition = if rank == 0 { T::one() } else { smax / smin };
    Ok(LeastSquares { x, rank, condition })
}

/// Orthonormal basis (columns) for the range of `m`.
pub fn range_basis<T: Real>(m: &DMatrix<T>, rtol: f64) -> Result<DMatrix<T>> {
    ensure_finite(m, "range argument")?;
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(DMatrix::zeros(rows, 0));
    }
    let svd = T::svd_real(m, false)?;
    let rank = count_above(&svd.s, rows, cols, rtol);
    Ok(svd.u.columns(0, rank).into_owned())
}
