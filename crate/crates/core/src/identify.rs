//! Sparse attack reconstruction from residual traces: transient removal,
//! left inversion of `Delta_I` on candidate supports, and a consistency test.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use crate::decouple::{apply_filter, ResidualGenerator};
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{to_f64, Real, Settings};
use crate::sim::Trace;

/// Samples required beyond `n + delta` for transient fitting.
pub const TRANSIENT_MARGIN: usize = 10;
/// Stacked inversion problems above this condition number carry a warning.
pub const CONDITION_WARNING: f64 = 1e12;
/// Minimal supports whose estimates differ by more than this are ambiguous.
pub const AGREEMENT_TOL: f64 = 1e-3;

/// Filtered free responses `C A^k v` for a basis of initial states, with
/// linearly dependent signals pruned.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientModel<T: Real> {
    pub mode_basis: Vec<Trace<T>>,
    pub horizon: usize,
}

impl<T: Real> TransientModel<T> {
    pub fn build(gen: &ResidualGenerator<T>, horizon: usize, settings: &Settings) -> Result<Self> {
        let model = gen.model();
        let n = model.n();
        let required = n + gen.delay + TRANSIENT_MARGIN;
        if horizon < required {
            return Err(Error::Input(format!("trace of {horizon} samples is too short for transient removal, need {required}")));
        }
        let mut kept: Vec<Trace<T>> = Vec::new();
        let mut stacked: Vec<DVector<T>> = Vec::new();
        for v in 0..n {
            let mut x = DVector::<T>::zeros(n);
            x[v] = T::one();
            let mut y = DMatrix::zeros(model.p(), horizon);
            for k in 0..horizon {
                y.set_column(k, &(model.c() * &x));
                x = model.a() * x;
            }
            let r = apply_filter(gen, &Trace::new(y)?)?.r;
            let s = r.stacked();
            let sn = s.norm();
            if sn == T::zero() || !sn.is_finite() {
                continue;
            }
            let mut trial = stacked.clone();
            trial.push(s.unscale(sn));
            let m = DMatrix::from_columns(&trial);
            if linalg::real_rank(&m, settings.tol.rank_rtol)? == trial.len() {
                stacked = trial;
                kept.push(r);
            }
        }
        Ok(TransientModel { mode_basis: kept, horizon })
    }

    /// Column-normalized stacked basis signals.
    fn matrix(&self) -> DMatrix<T> {
        let rows = self.mode_basis.first().map_or(0, |t| t.channels() * t.len());
        let mut m = DMatrix::zeros(rows, self.mode_basis.len());
        for (j, t) in self.mode_basis.iter().enumerate() {
            let s = t.stacked();
            let n = s.norm();
            m.set_column(j, &s.unscale(n));
        }
        m
    }
}

/// `r' = r - (least-squares transient fit)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientRemoval<T: Real> {
    pub residual: Trace<T>,
    /// Norm of the fitted transient part.
    pub fitted_energy: f64,
    /// Norm of the input trace.
    pub raw_norm: f64,
    pub transient: TransientModel<T>,
}

pub fn remove_transient<T: Real>(gen: &ResidualGenerator<T>, r: &Trace<T>, settings: &Settings) -> Result<TransientRemoval<T>> {
    check_residual(gen, r)?;
    let transient = TransientModel::build(gen, r.len(), settings)?;
    let b = transient.matrix();
    let rs = r.stacked();
    let fit = linalg::lstsq(&b, &rs, settings.tol.rank_rtol)?;
    let fitted = &b * &fit.x;
    let residual = Trace::from_stacked(r.channels(), &(&rs - &fitted));
    Ok(TransientRemoval {
        residual,
        fitted_energy: to_f64(fitted.norm()),
        raw_norm: to_f64(rs.norm()),
        transient,
    })
}

fn check_residual<T: Real>(gen: &ResidualGenerator<T>, r: &Trace<T>) -> Result<()> {
    let rr = gen.residual_channels();
    if r.channels() != rr {
        return Err(Error::Dimension { matrix: "residual".into(), expected: (rr, r.len()), found: (r.channels(), r.len()) });
    }
    Ok(())
}

/// Block lower-triangular convolution matrix of `Delta_I` over `len` samples.
fn toeplitz<T: Real>(markov: &[DMatrix<T>], support: &[usize], len: usize) -> DMatrix<T> {
    let rr = markov.first().map_or(0, |h| h.nrows());
    let w = support.len();
    let mut t = DMatrix::zeros(rr * len, w * len);
    for row in 0..len {
        for col in 0..=row {
            let h = &markov[row - col];
            for (c, &j) in support.iter().enumerate() {
                for r in 0..rr {
                    t[(row * rr + r, col * w + c)] = h[(r, j)];
                }
            }
        }
    }
    t
}

/// Estimate of the attack on one support.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetInversion<T: Real> {
    pub support: Vec<usize>,
    /// `|I|` channels over the trace horizon.
    pub estimate: Trace<T>,
    /// `||r' - Delta_I a_I - transient|| / ||r'||` over the scoring window.
    pub residual: f64,
    pub condition: f64,
    pub ill_conditioned: bool,
}

/// Least-squares inversion of `Delta_I` jointly with the transient span, so
/// that attack components overlapping a transient are not lost.
pub fn subset_inversion<T: Real>(
    gen: &ResidualGenerator<T>,
    support: &[usize],
    r: &Trace<T>,
    settings: &Settings,
) -> Result<SubsetInversion<T>> {
    check_residual(gen, r)?;
    let transient = TransientModel::build(gen, r.len(), settings)?;
    let markov = gen.delta_markov(r.len());
    invert_on(gen, support, r, &markov, &transient, settings)
}

fn invert_on<T: Real>(
    gen: &ResidualGenerator<T>,
    support: &[usize],
    r: &Trace<T>,
    markov: &[DMatrix<T>],
    transient: &TransientModel<T>,
    settings: &Settings,
) -> Result<SubsetInversion<T>> {
    let m = gen.model().m();
    if support.is_empty() || support.iter().any(|&j| j >= m) || support.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSupport { support: support.to_vec(), reason: "need distinct increasing channels".into() });
    }
    if !gen.delta_left_invertible(support, settings)? {
        return Err(Error::NotLeftInvertible { support: support.to_vec() });
    }
    let len = r.len();
    let t = toeplitz(markov, support, len);
    let b = transient.matrix();
    let mut joint = DMatrix::zeros(t.nrows(), t.ncols() + b.ncols());
    joint.columns_mut(0, t.ncols()).copy_from(&t);
    joint.columns_mut(t.ncols(), b.ncols()).copy_from(&b);
    let rs = r.stacked();
    let fit = linalg::lstsq(&joint, &rs, settings.tol.rank_rtol)?;
    let resid = &rs - &joint * &fit.x;
    let transient_fit = &b * fit.x.rows(t.ncols(), b.ncols());
    let (from, to) = scoring_window(gen, len);
    let rr = gen.residual_channels();
    let window = |v: &DVector<T>| to_f64(v.rows(from * rr, (to - from) * rr).norm());
    let reference = window(&(&rs - &transient_fit));
    let residual = if reference > 0.0 { window(&resid) / reference } else { 0.0 };
    let est = fit.x.rows(0, t.ncols()).into_owned();
    let condition = to_f64(fit.condition);
    Ok(SubsetInversion {
        support: support.to_vec(),
        estimate: Trace::from_stacked(support.len(), &est),
        residual,
        condition,
        ill_conditioned: condition > CONDITION_WARNING,
    })
}

/// Samples used for scoring: after the filter warm-up and, when the trace is
/// long enough, before the last `L_imp` samples.
pub fn scoring_window<T: Real>(gen: &ResidualGenerator<T>, len: usize) -> (usize, usize) {
    let l_imp = gen.delta_impulse.len();
    let from = gen.delay.min(len);
    let to = if len > from + 2 * l_imp { len - l_imp } else { len };
    (from, to)
}

/// One support that passed the consistency test.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSupport {
    pub support: Vec<usize>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationResult<T: Real> {
    pub accepted: bool,
    pub support: Vec<usize>,
    /// All `m` channels, zero off the support.
    pub estimate: Trace<T>,
    pub consistency_residual: f64,
    pub subsets_tried: usize,
    /// Minimal supports passing the consistency test, in search order.
    pub passing: Vec<CandidateSupport>,
    /// Several minimal supports pass with different estimates.
    pub ambiguous: bool,
    pub ill_conditioned: bool,
    /// Norm of the transient fitted and removed before inversion.
    pub transient_energy: f64,
}

/// Searches supports of size `1..=q` in lexicographic order, skipping
/// supersets of passing ones, and accepts when the passing supports agree.
pub fn identify<T: Real>(
    gen: &ResidualGenerator<T>,
    r: &Trace<T>,
    q: usize,
    settings: &Settings,
) -> Result<IdentificationResult<T>> {
    if q == 0 {
        return Err(Error::Input("identification budget q must be at least 1".into()));
    }
    check_residual(gen, r)?;
    let m = gen.model().m();
    let len = r.len();
    let empty = |tried: usize, transient_energy: f64| IdentificationResult {
        accepted: false,
        support: Vec::new(),
        estimate: Trace::zeros(m, len),
        consistency_residual: 0.0,
        subsets_tried: tried,
        passing: Vec::new(),
        ambiguous: false,
        ill_conditioned: false,
        transient_energy,
    };
    if gen.residual_channels() == 0 {
        return Ok(empty(0, 0.0));
    }
    let removal = remove_transient(gen, r, settings)?;
    let scale = removal.raw_norm;
    if to_f64(removal.residual.energy_norm()) <= settings.tol.noise_floor * scale || scale == 0.0 {
        return Ok(empty(0, removal.fitted_energy));
    }
    let markov = gen.delta_markov(len);
    let mut tried = 0;
    let mut passing: Vec<SubsetInversion<T>> = Vec::new();
    let mut ill = false;
    for size in 1..=q.min(m) {
        for support in (0..m).combinations(size) {
            if passing.iter().any(|p| p.support.iter().all(|j| support.contains(j))) {
                continue;
            }
            tried += 1;
            let inv = match invert_on(gen, &support, r, &markov, &removal.transient, settings) {
                Ok(inv) => inv,
                Err(Error::NotLeftInvertible { .. }) => continue,
                Err(e) => return Err(e),
            };
            if inv.residual <= settings.tol.consistency_tol {
                ill |= inv.ill_conditioned;
                passing.push(inv);
            }
        }
    }
    let Some(first) = passing.first() else {
        let mut out = empty(tried, removal.fitted_energy);
        out.consistency_residual = f64::INFINITY;
        return Ok(out);
    };
    let (from, to) = scoring_window(gen, len);
    let full = |inv: &SubsetInversion<T>| {
        let mut e = DMatrix::zeros(m, len);
        for (c, &j) in inv.support.iter().enumerate() {
            e.row_mut(j).copy_from(&inv.estimate.data().row(c));
        }
        e
    };
    let reference = full(first);
    let ref_norm = to_f64(reference.columns(from, to - from).norm());
    let ambiguous = passing.iter().skip(1).any(|p| {
        let diff = to_f64((full(p) - &reference).columns(from, to - from).norm());
        diff > AGREEMENT_TOL * ref_norm.max(f64::MIN_POSITIVE)
    });
    Ok(IdentificationResult {
        accepted: !ambiguous,
        support: if ambiguous { Vec::new() } else { first.support.clone() },
        estimate: if ambiguous { Trace::zeros(m, len) } else { Trace::new(reference)? },
        consistency_residual: first.residual,
        subsets_tried: tried,
        passing: passing.iter().map(|p| CandidateSupport { support: p.support.clone(), residual: p.residual }).collect(),
        ambiguous,
        ill_conditioned: ill,
        transient_energy: removal.fitted_energy,
    })
}

/// Filters a raw output trace and identifies the attack in its residual.
pub fn identify_output<T: Real>(
    gen: &ResidualGenerator<T>,
    y: &Trace<T>,
    q: usize,
    settings: &Settings,
) -> Result<IdentificationResult<T>> {
    let res = apply_filter(gen, y)?;
    identify(gen, &res.r, q, settings)
}

/// Relative error `||a_hat - a|| / ||a||` over samples `from..to`.
pub fn relative_error<T: Real>(estimate: &Trace<T>, truth: &Trace<T>, from: usize, to: usize) -> Result<f64> {
    if estimate.channels() != truth.channels() || estimate.len() != truth.len() {
        return Err(Error::Input("estimate and truth traces differ in shape".into()));
    }
    if from >= to || to > truth.len() {
        return Err(Error::Input(format!("error window {from}..{to} is empty or exceeds {} samples", truth.len())));
    }
    let diff = (estimate.data() - truth.data()).columns(from, to - from).norm();
    let base = truth.data().columns(from, to - from).norm();
    Ok(if base == T::zero() { to_f64(diff) } else { to_f64(diff / base) })
}
