//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All analysis code is written against [`Real`], so the same algorithms run in
//! `f64` (the default, and the precision the tolerances are tuned for) or in
//! `f32` with a correspondingly relaxed [`Tolerances`] set.

use std::fmt::{Debug, Display};

use nalgebra::{Complex, DMatrix, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

use crate::error::{Error, Result};
use crate::linalg::Svd;

/// Floating point scalar usable by the analysis routines.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Default + Display + Debug + Send + Sync
{
    /// Tolerance set matched to the precision of this type.
    fn default_tolerances() -> Tolerances;

    /// Singular value decomposition of a real matrix.
    fn svd_real(m: &DMatrix<Self>, full: bool) -> Result<Svd<Self, Self>>;

    /// Singular value decomposition of a complex matrix.
    fn svd_complex(m: &DMatrix<Complex<Self>>, full: bool) -> Result<Svd<Self, Complex<Self>>>;
}

macro_rules! impl_real {
    ($t:ty, $tol:expr) => {
        impl Real for $t {
            fn default_tolerances() -> Tolerances {
                $tol
            }

            fn svd_real(m: &DMatrix<Self>, full: bool) -> Result<Svd<Self, Self>> {
                faer_svd(m, full)
            }

            fn svd_complex(m: &DMatrix<Complex<Self>>, full: bool) -> Result<Svd<Self, Complex<Self>>> {
                faer_svd(m, full)
            }
        }
    };
}

impl_real!(f64, Tolerances::F64);
impl_real!(f32, Tolerances::F32);

fn faer_svd<S, R>(m: &DMatrix<S>, full: bool) -> Result<Svd<R, S>>
where
    S: faer::traits::ComplexField<Real = R> + nalgebra::Scalar + Copy,
    R: faer::traits::RealField + Copy,
{
    let (rows, cols) = m.shape();
    let a = faer::Mat::<S>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let svd = if full { a.svd() } else { a.thin_svd() }.map_err(|e| Error::Numeric(format!("SVD did not converge: {e:?}")))?;
    let (u, v) = (svd.U(), svd.V());
    let s = svd.S().column_vector();
    Ok(Svd {
        u: DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)]),
        s: (0..s.nrows()).map(|j| faer::traits::math_utils::real(&s[j])).collect(),
        v: DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)]),
    })
}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in working scalar")
}

#[inline]
pub(crate) fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn real_c<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

#[inline]
pub(crate) fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Numerical thresholds used throughout the analysis.
///
/// Values are stored as `f64` and converted to the working scalar at the point
/// of use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative rank threshold: singular values at or below
    /// `rank_rtol * sigma_max * max(rows, cols)` count as zero.
    pub rank_rtol: f64,
    /// Band around the unit circle treated as the circle itself.
    pub boundary_tol: f64,
    /// Minimum relative distance between an evaluation point and an eigenvalue of `A`.
    pub pole_tol: f64,
    /// Residual bound for unit-norm null vectors of a pencil.
    pub null_tol: f64,
    /// Relative magnitude below which an attack coordinate does not target its channel.
    pub target_tol: f64,
    /// Relative magnitude below which an attack coordinate is outside the support.
    pub support_tol: f64,
    /// Conjugate pairing tolerance for zeros of real pencils.
    pub pairing_tol: f64,
    /// Clustering radius for zeros found by different compressions.
    pub zero_merge_tol: f64,
    /// Relative residual accepted by the identification consistency test.
    pub consistency_tol: f64,
    /// Relative residual energy below which a trace carries no attack evidence.
    pub noise_floor: f64,
}

impl Tolerances {
    pub const F64: Tolerances = Tolerances {
        rank_rtol: 1e-10,
        boundary_tol: 1e-9,
        pole_tol: 1e-6,
        null_tol: 1e-8,
        target_tol: 1e-9,
        support_tol: 1e-9,
        pairing_tol: 1e-8,
        zero_merge_tol: 1e-7,
        consistency_tol: 1e-6,
        noise_floor: 1e-10,
    };

    pub const F32: Tolerances = Tolerances {
        rank_rtol: 1e-5,
        boundary_tol: 1e-4,
        pole_tol: 1e-3,
        null_tol: 1e-3,
        target_tol: 1e-4,
        support_tol: 1e-4,
        pairing_tol: 1e-3,
        zero_merge_tol: 1e-3,
        consistency_tol: 1e-3,
        noise_floor: 1e-5,
    };

    /// Returns the first non-positive or non-finite field, if any.
    pub fn invalid_field(&self) -> Option<&'static str> {
        let fields = [
            ("rank_rtol", self.rank_rtol),
            ("boundary_tol", self.boundary_tol),
            ("pole_tol", self.pole_tol),
            ("null_tol", self.null_tol),
            ("target_tol", self.target_tol),
            ("support_tol", self.support_tol),
            ("pairing_tol", self.pairing_tol),
            ("zero_merge_tol", self.zero_merge_tol),
            ("consistency_tol", self.consistency_tol),
            ("noise_floor", self.noise_floor),
        ];
        fields
            .iter()
            .find(|(_, v)| !(v.is_finite() && *v > 0.0))
            .map(|(name, _)| *name)
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances::F64
    }
}

/// Tolerances plus the seed that drives every randomized step (sample points,
/// compressions, completion rows). Two runs with equal settings produce
/// identical results.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub tol: Tolerances,
    pub seed: u64,
}

impl Settings {
    pub const DEFAULT_SEED: u64 = 0x5eed_2016;

    pub fn for_scalar<T: Real>() -> Self {
        Settings { tol: T::default_tolerances(), seed: Self::DEFAULT_SEED }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

impl Default for Settings {
    fn default() -> Self {
        Settings::for_scalar::<f64>()
    }
}
