//! Disturbance decoupling: a polynomial left annihilator `N(z)` of the
//! disturbance transfer matrix `G_d(z)` and the residual `r = Delta a` it
//! leaves, with `Delta(z) = z^-delta N(z) G_a(z)`.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::linalg::{self, complexify, CMatrix};
use crate::model::{transfer_eval_with_poles, Block, Realization};
use crate::pencil::{sample_points_avoiding, sampled_normalrank, NORMALRANK_SAMPLES};
use crate::scalar::{lit, real_c, Real, Settings};
use crate::sim::Trace;

const STREAM_COMPLETION: u64 = 300;
const COMPLETION_ATTEMPTS: u64 = 5;

/// `N(z) = sum_j N_j z^j` with real coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialMatrix<T: Real> {
    coeffs: Vec<DMatrix<T>>,
}

impl<T: Real> PolynomialMatrix<T> {
    /// Drops trailing zero coefficients; keeps at least one.
    pub fn new(mut coeffs: Vec<DMatrix<T>>) -> Result<Self> {
        let Some(first) = coeffs.first() else {
            return Err(Error::Input("polynomial matrix needs at least one coefficient".into()));
        };
        let shape = first.shape();
        if let Some(bad) = coeffs.iter().find(|c| c.shape() != shape) {
            return Err(Error::Dimension { matrix: "polynomial coefficient".into(), expected: shape, found: bad.shape() });
        }
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.iter().all(|x| *x == T::zero())) {
            coeffs.pop();
        }
        Ok(PolynomialMatrix { coeffs })
    }

    pub fn constant(m: DMatrix<T>) -> Self {
        PolynomialMatrix { coeffs: vec![m] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn rows(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn cols(&self) -> usize {
        self.coeffs[0].ncols()
    }

    pub fn coeffs(&self) -> &[DMatrix<T>] {
        &self.coeffs
    }

    /// Coefficient of `z^j`, zero beyond the degree.
    pub fn coeff(&self, j: usize) -> DMatrix<T> {
        self.coeffs.get(j).cloned().unwrap_or_else(|| DMatrix::zeros(self.rows(), self.cols()))
    }

    pub fn eval(&self, z: Complex<T>) -> CMatrix<T> {
        let mut acc = CMatrix::zeros(self.rows(), self.cols());
        for c in self.coeffs.iter().rev() {
            acc = acc * z + complexify(c);
        }
        acc
    }
}

/// `det(zI - A) = sum_k c_k z^k` by the Faddeev-LeVerrier recursion.
pub fn characteristic_polynomial<T: Real>(a: &DMatrix<T>) -> Vec<T> {
    let n = a.nrows();
    let mut c = vec![T::zero(); n + 1];
    c[n] = T::one();
    let mut mk = DMatrix::<T>::zeros(n, n);
    for k in 1..=n {
        mk = a * &mk + DMatrix::identity(n, n) * c[n - k + 1];
        c[n - k] = -(a * &mk).trace() / lit::<T>(k as f64);
    }
    c
}

/// Coefficients of the polynomial matrix `det(zI - A) G(z)`, degree `<= n`.
fn polynomial_numerator<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, c: &DMatrix<T>, d: &DMatrix<T>) -> Vec<DMatrix<T>> {
    let n = a.nrows();
    let chi = characteristic_polynomial(a);
    let mut cab = Vec::with_capacity(n);
    let mut ak_b = b.clone();
    for _ in 0..n {
        cab.push(c * &ak_b);
        ak_b = a * ak_b;
    }
    (0..=n)
        .map(|j| {
            let mut g = d * chi[j];
            for k in (j + 1)..=n {
                g += &cab[k - j - 1] * chi[k];
            }
            g
        })
        .collect()
}

/// Normal rank of `G_d` from transfer evaluations at the sample points.
fn transfer_normalrank<T: Real>(model: &Realization<T>, block: Option<Block>, settings: &Settings) -> Result<usize> {
    let eigs = model.eigenvalues()?;
    let samples = sample_points_avoiding(&eigs, settings, NORMALRANK_SAMPLES);
    sampled_normalrank(&samples, &settings.tol, |z| match block {
        Some(b) => transfer_eval_with_poles(model, z, b, &eigs, &settings.tol),
        None => {
            let gd = transfer_eval_with_poles(model, z, Block::Disturbance, &eigs, &settings.tol)?;
            let ga = transfer_eval_with_poles(model, z, Block::Attack, &eigs, &settings.tol)?;
            let mut both = CMatrix::zeros(model.p(), model.o() + model.m());
            both.columns_mut(0, model.o()).copy_from(&gd);
            both.columns_mut(model.o(), model.m()).copy_from(&ga);
            Ok(both)
        }
    })
}

/// Minimal polynomial basis of the left null space of `G_d(z)`, built degree
/// by degree from block Toeplitz null spaces. A row found at degree `delta`
/// is never replaced, and rows already found are shifted into the
/// higher-degree problems so that only genuinely new rows are added.
pub fn left_nullspace<T: Real>(model: &Realization<T>, settings: &Settings) -> Result<PolynomialMatrix<T>> {
    let p = model.p();
    if model.o() == 0 {
        return Ok(PolynomialMatrix::constant(DMatrix::identity(p, p)));
    }
    let m_prime = transfer_normalrank(model, Some(Block::Disturbance), settings)?;
    left_nullspace_with_rank(model, p - m_prime, settings)
}

fn left_nullspace_with_rank<T: Real>(model: &Realization<T>, wanted: usize, settings: &Settings) -> Result<PolynomialMatrix<T>> {
    let (n, o, p) = (model.n(), model.o(), model.p());
    if wanted == 0 {
        return Ok(PolynomialMatrix::constant(DMatrix::zeros(0, p)));
    }
    let g = polynomial_numerator(model.a(), model.bd(), model.c(), model.dd());
    let rtol = settings.tol.rank_rtol;
    // Found rows as (degree, stacked coefficients [N_0 .. N_deg]).
    let mut rows: Vec<(usize, Vec<T>)> = Vec::new();
    for delta in 0..=n {
        let (tr, tc) = ((delta + 1) * p, (delta + n + 1) * o);
        let mut t = DMatrix::<T>::zeros(tr, tc);
        for j in 0..=delta {
            for (k, gk) in g.iter().enumerate() {
                t.view_mut((j * p, (j + k) * o), (p, o)).copy_from(gk);
            }
        }
        // Columns at rounding level relative to the largest are zeroed rather
        // than normalized, which would turn noise into a unit direction.
        let cmax = t.column_iter().map(|c| c.norm()).fold(T::zero(), |a, b| a.max(b));
        let negligible = lit::<T>(rtol) * cmax;
        for mut col in t.column_iter_mut() {
            let s = col.norm();
            if s > negligible {
                col.unscale_mut(s);
            } else {
                col.fill(T::zero());
            }
        }
        let (_, null) = linalg::real_null_space(&t.transpose(), rtol)?;
        // Shifts z^s * row of every row found so far.
        let mut shifts: Vec<Vec<T>> = Vec::new();
        for (deg, coeffs) in &rows {
            for s in 0..=(delta - deg) {
                let mut v = vec![T::zero(); tr];
                v[s * p..s * p + coeffs.len()].copy_from_slice(coeffs);
                shifts.push(v);
            }
        }
        let fresh = null.ncols().saturating_sub(shifts.len());
        if fresh == 0 {
            continue;
        }
        let mut cand = null.clone();
        if !shifts.is_empty() {
            let s = DMatrix::from_fn(tr, shifts.len(), |r, c| shifts[c][r]);
            let q = linalg::range_basis(&s, rtol)?;
            cand -= &q * (q.transpose() * &cand);
        }
        let u = T::svd_real(&cand, false)?.u;
        for j in 0..fresh.min(wanted - rows.len()).min(u.ncols()) {
            rows.push((delta, u.column(j).iter().copied().collect()));
        }
        if rows.len() >= wanted {
            break;
        }
    }
    if rows.len() < wanted {
        return Err(Error::Numeric(format!(
            "left null space of G_d: found {} of {} rows up to degree {n}",
            rows.len(),
            wanted
        )));
    }
    let delta = rows.iter().map(|r| r.0).max().unwrap_or(0);
    let coeffs = (0..=delta)
        .map(|j| {
            DMatrix::from_fn(rows.len(), p, |r, c| {
                let (deg, v) = &rows[r];
                if j <= *deg {
                    v[j * p + c]
                } else {
                    T::zero()
                }
            })
        })
        .collect();
    PolynomialMatrix::new(coeffs)
}

/// Residual generator `r(k) = sum_j N_j y(k - delta + j)` together with the
/// attack-to-residual system it leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualGenerator<T: Real> {
    model: Realization<T>,
    pub annihilator: PolynomialMatrix<T>,
    /// Causality delay: the filter applies `z^-delta N(z)`.
    pub delay: usize,
    /// `normalrank G_d`.
    pub m_prime: usize,
    /// `normalrank [G_d G_a] - m'`.
    pub m_dprime: usize,
    /// Markov parameters `Delta_0 .. Delta_{L-1}`.
    pub delta_impulse: Vec<DMatrix<T>>,
    /// Constant rows completing `N` to a square filter of full normal rank.
    pub completion: PolynomialMatrix<T>,
}

impl<T: Real> ResidualGenerator<T> {
    pub fn model(&self) -> &Realization<T> {
        &self.model
    }

    /// Number of residual channels, `p - m'`.
    pub fn residual_channels(&self) -> usize {
        self.annihilator.rows()
    }

    /// `Delta_0 .. Delta_{len-1}`, exact for any length.
    pub fn delta_markov(&self, len: usize) -> Vec<DMatrix<T>> {
        let model = &self.model;
        let (m, delay) = (model.m(), self.delay);
        let rr = self.residual_channels();
        // h_0 = Da, h_k = C A^{k-1} Ba.
        let mut h = Vec::with_capacity(len + delay);
        h.push(model.da().clone());
        let mut ak_b = model.ba().clone();
        for _ in 1..(len + delay) {
            h.push(model.c() * &ak_b);
            ak_b = model.a() * ak_b;
        }
        (0..len)
            .map(|t| {
                let mut acc = DMatrix::zeros(rr, m);
                for (j, nj) in self.annihilator.coeffs().iter().enumerate() {
                    if t + j >= delay {
                        acc += nj * &h[t + j - delay];
                    }
                }
                acc
            })
            .collect()
    }

    /// `Delta(z)` restricted to the attack channels in `support`.
    pub fn delta_eval(&self, z: Complex<T>, support: &[usize], settings: &Settings) -> Result<CMatrix<T>> {
        let eigs = self.model.eigenvalues()?;
        self.delta_eval_with_poles(z, support, &eigs, settings)
    }

    fn delta_eval_with_poles(
        &self,
        z: Complex<T>,
        support: &[usize],
        eigs: &[Complex<T>],
        settings: &Settings,
    ) -> Result<CMatrix<T>> {
        let ga = transfer_eval_with_poles(&self.model, z, Block::Attack, eigs, &settings.tol)?;
        let sel = CMatrix::from_fn(ga.nrows(), support.len(), |r, c| ga[(r, support[c])]);
        let mut shift = real_c(T::one());
        for _ in 0..self.delay {
            shift /= z;
        }
        Ok(self.annihilator.eval(z) * sel * shift)
    }

    /// Sampled normal rank of `Delta` on the given attack channels.
    pub fn delta_normalrank(&self, support: &[usize], settings: &Settings) -> Result<usize> {
        let eigs = self.model.eigenvalues()?;
        let samples = sample_points_avoiding(&eigs, settings, NORMALRANK_SAMPLES);
        sampled_normalrank(&samples, &settings.tol, |z| self.delta_eval_with_poles(z, support, &eigs, settings))
    }

    /// Left invertibility of `Delta_I`, i.e. `normalrank Delta_I = |I|`.
    pub fn delta_left_invertible(&self, support: &[usize], settings: &Settings) -> Result<bool> {
        Ok(self.residual_channels() > 0 && self.delta_normalrank(support, settings)? == support.len())
    }

    /// The square filter `[N(z); completion]`.
    pub fn full_filter(&self) -> PolynomialMatrix<T> {
        let p = self.model.p();
        let rr = self.residual_channels();
        let deg = self.annihilator.degree();
        let coeffs = (0..=deg)
            .map(|j| {
                let mut c = DMatrix::zeros(p, p);
                c.rows_mut(0, rr).copy_from(&self.annihilator.coeff(j));
                if j == 0 {
                    c.rows_mut(rr, p - rr).copy_from(&self.completion.coeff(0));
                }
                c
            })
            .collect();
        PolynomialMatrix::new(coeffs).expect("conformant coefficients")
    }
}

/// Default impulse truncation length `4 (n + delta) + 8`.
pub fn default_truncation(n: usize, delay: usize) -> usize {
    4 * (n + delay) + 8
}

/// Builds `N`, the ranks `m'` and `m''`, `L_imp` Markov parameters of `Delta`
/// and completion rows.
pub fn design_residual_generator<T: Real>(
    model: &Realization<T>,
    l_imp: Option<usize>,
    settings: &Settings,
) -> Result<ResidualGenerator<T>> {
    let p = model.p();
    let m_prime = if model.o() == 0 { 0 } else { transfer_normalrank(model, Some(Block::Disturbance), settings)? };
    let annihilator = if model.o() == 0 {
        PolynomialMatrix::constant(DMatrix::identity(p, p))
    } else {
        left_nullspace_with_rank(model, p - m_prime, settings)?
    };
    let delay = annihilator.degree();
    let required = delay + model.n() + 1;
    let l_imp = l_imp.unwrap_or_else(|| default_truncation(model.n(), delay));
    if l_imp < required {
        return Err(Error::TruncationTooShort { given: l_imp, required });
    }
    let m_dprime = transfer_normalrank(model, None, settings)? - m_prime;
    let mut gen = ResidualGenerator {
        model: model.clone(),
        annihilator,
        delay,
        m_prime,
        m_dprime,
        delta_impulse: Vec::new(),
        completion: PolynomialMatrix::constant(DMatrix::zeros(m_prime, p)),
    };
    gen.delta_impulse = gen.delta_markov(l_imp);
    gen.completion = completion_rows(&gen, settings)?;
    Ok(gen)
}

fn completion_rows<T: Real>(gen: &ResidualGenerator<T>, settings: &Settings) -> Result<PolynomialMatrix<T>> {
    let p = gen.model.p();
    let extra = gen.m_prime;
    if extra == 0 {
        return Ok(PolynomialMatrix::constant(DMatrix::zeros(0, p)));
    }
    let eigs = gen.model.eigenvalues()?;
    let samples = sample_points_avoiding(&eigs, settings, NORMALRANK_SAMPLES);
    let anchor = real_c(lit::<T>(1.5) * linalg::spectral_radius(&eigs).max(T::one()));
    let n_at = gen.annihilator.eval(anchor);
    // Real row space of N at a real point.
    let basis = linalg::range_basis(&n_at.map(|c| c.re).transpose(), settings.tol.rank_rtol)?;
    for attempt in 0..COMPLETION_ATTEMPTS {
        let mut rng = linalg::rng_for(settings.seed, STREAM_COMPLETION + attempt);
        let raw: DMatrix<T> = linalg::random_matrix(&mut rng, p, extra);
        let ortho = &raw - &basis * (basis.transpose() * &raw);
        let rows = ortho.transpose();
        let candidate = PolynomialMatrix::constant(rows);
        let trial = ResidualGenerator { completion: candidate.clone(), ..gen.clone() };
        let full = trial.full_filter();
        if sampled_normalrank(&samples, &settings.tol, |z| Ok(full.eval(z)))? == p {
            return Ok(candidate);
        }
    }
    Err(Error::Numeric(format!("no full-rank filter completion after {COMPLETION_ATTEMPTS} draws")))
}

/// Lemma-2 test for the block of `model`: its transfer matrix has a left
/// inverse iff its normal rank equals its number of inputs.
pub fn left_invertible<T: Real>(model: &Realization<T>, block: Block, settings: &Settings) -> Result<bool> {
    let inputs = model.block(block).0.ncols();
    if inputs == 0 {
        return Ok(true);
    }
    Ok(transfer_normalrank(model, Some(block), settings)? == inputs)
}

/// Output of [`apply_filter`]; the first `warmup` samples depend on the zero
/// prehistory of `y` and are excluded from downstream scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual<T: Real> {
    pub r: Trace<T>,
    pub warmup: usize,
}

/// `r(k) = sum_j N_j y(k - delta + j)` with `y(k) = 0` for `k < 0`.
pub fn apply_filter<T: Real>(gen: &ResidualGenerator<T>, y: &Trace<T>) -> Result<Residual<T>> {
    let p = gen.model.p();
    if y.channels() != p {
        return Err(Error::Dimension { matrix: "y".into(), expected: (p, y.len()), found: (y.channels(), y.len()) });
    }
    let len = y.len();
    let rr = gen.residual_channels();
    let delay = gen.delay;
    let mut r = DMatrix::zeros(rr, len);
    for k in 0..len {
        let mut acc = nalgebra::DVector::zeros(rr);
        for (j, nj) in gen.annihilator.coeffs().iter().enumerate() {
            if k + j >= delay && k + j - delay < len {
                acc += nj * y.data().column(k + j - delay);
            }
        }
        r.set_column(k, &acc);
    }
    Ok(Residual { r: Trace::new(r)?, warmup: delay.min(len) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;

    fn settings() -> Settings {
        Settings::default()
    }

    #[test]
    fn no_disturbance_gives_identity() {
        let model = examples::redundant_sensors();
        let n = left_nullspace(&model, &settings()).unwrap();
        assert_eq!(n.degree(), 0);
        assert_eq!(n.coeff(0), DMatrix::identity(3, 3));
        let gen = design_residual_generator(&model, None, &settings()).unwrap();
        assert_eq!(gen.delta_impulse.len(), 4 * 3 + 8);
        assert_eq!(gen.delta_impulse[0], DMatrix::identity(3, 3));
        assert!(gen.delta_impulse[1..].iter().all(|h| h.iter().all(|x| *x == 0.0)));
        assert_eq!(gen.m_dprime, 3);
    }

    #[test]
    fn static_sensor_disturbance_selector() {
        let model = Realization::new(
            DMatrix::from_diagonal_element(2, 2, 0.5),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(2, 1),
            DMatrix::identity(2, 2),
            DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
        )
        .unwrap();
        let n: PolynomialMatrix<f64> = left_nullspace(&model, &settings()).unwrap();
        assert_eq!(n.degree(), 0);
        assert_eq!(n.rows(), 1);
        let row = n.coeff(0);
        assert!(row[(0, 0)].abs() < 1e-12 && (row[(0, 1)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn masked_channels_leave_no_residual() {
        let model = examples::masked_channels();
        let gen = design_residual_generator(&model, None, &settings()).unwrap();
        assert_eq!((gen.m_prime, gen.m_dprime, gen.residual_channels()), (1, 0, 0));
        assert!(gen.delta_impulse.iter().all(|h| h.nrows() == 0));
        assert_eq!(gen.completion.rows(), 1);
    }

    #[test]
    fn dynamic_annihilator() {
        // Disturbance through the state, one output unaffected only after filtering.
        let model = Realization::new(
            DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, 0.3]),
            DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(2, 1),
        )
        .unwrap();
        let s = settings();
        let n = left_nullspace(&model, &s).unwrap();
        assert_eq!(n.rows(), 1);
        assert_eq!(n.degree(), 1);
        for z in [1.7, -2.3, 0.9] {
            let z = Complex::new(z, 0.4);
            let gd = crate::model::transfer_eval(&model, z, Block::Disturbance, &s.tol).unwrap();
            let prod = n.eval(z) * &gd;
            assert!(prod.norm() <= 1e-12 * n.eval(z).norm() * gd.norm());
        }
    }

    #[test]
    fn truncation_too_short() {
        let model = examples::redundant_sensors();
        assert_eq!(
            design_residual_generator(&model, Some(3), &settings()).unwrap_err(),
            Error::TruncationTooShort { given: 3, required: 4 }
        );
    }

    #[test]
    fn left_invertibility_examples() {
        let s = settings();
        let delay = Realization::new(
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 0),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        assert!(left_invertible(&delay, Block::Attack, &s).unwrap());
        let twin = Realization::new(
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 0),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 0),
            DMatrix::zeros(1, 2),
        )
        .unwrap();
        assert!(!left_invertible(&twin, Block::Attack, &s).unwrap());
        let gen = design_residual_generator(&examples::redundant_sensors(), None, &s).unwrap();
        assert!(gen.delta_left_invertible(&[0, 1], &s).unwrap());
    }

    #[test]
    fn filter_identity_and_zero() {
        let model = examples::redundant_sensors();
        let gen = design_residual_generator(&model, None, &settings()).unwrap();
        let y = Trace::from_fn(3, 5, |c, k| (c * 10 + k) as f64);
        assert_eq!(apply_filter(&gen, &y).unwrap().r, y);
        let z = Trace::zeros(3, 5);
        assert_eq!(apply_filter(&gen, &z).unwrap().r, z);
        assert!(apply_filter(&gen, &Trace::zeros(2, 5)).is_err());
    }

    #[test]
    fn characteristic_polynomial_of_diagonal() {
        let c = characteristic_polynomial(&DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[2.0, 3.0, 4.0])));
        assert_eq!(c, vec![-24.0, 26.0, -9.0, 1.0]);
    }
}
