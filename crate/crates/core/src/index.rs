//! Security index `alpha_i`: the smallest number of attack channels that must
//! be corrupted together so that a persistent attack involving channel `i`
//! produces identically zero output for some disturbance and initial state.

use std::time::{Duration, Instant};

use itertools::Itertools;
use nalgebra::{Complex, ComplexField, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::pencil::{self, null_basis, rank_drop_points, PencilSelection};
use crate::scalar::{lit, real_c, Real, Settings, Tolerances};
use crate::sim::Trace;

/// Value of the security index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alpha {
    Finite(usize),
    /// No support of any size admits an undetectable attack on the channel.
    Infinite,
    /// The search stopped at this budget: `alpha > k`.
    LowerBound(usize),
}

impl Alpha {
    pub fn finite(self) -> Option<usize> {
        match self {
            Alpha::Finite(k) => Some(k),
            _ => None,
        }
    }
}

impl std::fmt::Display for Alpha {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Alpha::Finite(k) => write!(f, "{k}"),
            Alpha::Infinite => write!(f, "inf"),
            Alpha::LowerBound(k) => write!(f, ">{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    GreedyUpperBound,
}

/// Exponential attack `a(k) = z0^k a0` with masking disturbance `z0^k d0` and
/// initial state `x0`, satisfying `P(z0) [x0; d0; a0] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackPattern<T: Real> {
    pub z0: Complex<T>,
    pub x0: CVector<T>,
    pub d0: CVector<T>,
    /// Full attack vector over all `m` channels.
    pub a0: CVector<T>,
    /// Channels with `|a0_j| > support_tol * ||a0||`.
    pub support: Vec<usize>,
    pub target: usize,
}

impl<T: Real> AttackPattern<T> {
    /// Checks the null-vector residual and the target entry, and derives the
    /// support from `a0`.
    pub fn new(
        model: &crate::model::Realization<T>,
        z0: Complex<T>,
        x0: CVector<T>,
        d0: CVector<T>,
        a0: CVector<T>,
        target: usize,
        tol: &Tolerances,
    ) -> Result<Self> {
        if x0.len() != model.n() || d0.len() != model.o() || a0.len() != model.m() {
            return Err(Error::Contract(format!(
                "pattern blocks have lengths ({}, {}, {}), expected ({}, {}, {})",
                x0.len(),
                d0.len(),
                a0.len(),
                model.n(),
                model.o(),
                model.m()
            )));
        }
        if target >= model.m() {
            return Err(Error::InvalidChannel { channel: target, m: model.m() });
        }
        let an = a0.norm();
        let support: Vec<usize> =
            (0..a0.len()).filter(|&j| a0[j].modulus() > lit::<T>(tol.support_tol) * an).collect();
        if an == T::zero() || a0[target].modulus() < lit::<T>(tol.target_tol) * an {
            return Err(Error::Contract(format!("attack vector does not target channel {target}")));
        }
        let pattern = AttackPattern { z0, x0, d0, a0, support, target };
        let res = pattern.residual(model);
        if res > lit::<T>(tol.null_tol) {
            return Err(Error::Contract(format!("pattern residual {res} exceeds null tolerance")));
        }
        Ok(pattern)
    }

    pub fn stacked(&self) -> CVector<T> {
        let (n, o, m) = (self.x0.len(), self.d0.len(), self.a0.len());
        let mut v = CVector::zeros(n + o + m);
        v.rows_mut(0, n).copy_from(&self.x0);
        v.rows_mut(n, o).copy_from(&self.d0);
        v.rows_mut(n + o, m).copy_from(&self.a0);
        v
    }

    /// `||P(z0) [x0; d0; a0]|| / ||[x0; d0; a0]||` on the full pencil.
    pub fn residual(&self, model: &crate::model::Realization<T>) -> T {
        pencil::relative_residual(&PencilSelection::full(model), self.z0, &self.stacked())
    }

    pub fn is_persistent(&self, tol: &Tolerances) -> bool {
        self.z0.modulus() >= T::one() - lit::<T>(tol.boundary_tol)
    }

    /// The same pattern multiplied by a real factor.
    pub fn scaled(&self, s: T) -> Self {
        let c = real_c(s);
        AttackPattern {
            z0: self.z0,
            x0: self.x0.map(|v| v * c),
            d0: self.d0.map(|v| v * c),
            a0: self.a0.map(|v| v * c),
            support: self.support.clone(),
            target: self.target,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecurityIndexResult<T: Real> {
    pub channel: usize,
    pub alpha: Alpha,
    pub witness: Option<AttackPattern<T>>,
    pub method: Method,
    pub subsets_examined: usize,
    pub elapsed: Duration,
    /// `normalrank P_d = normalrank P_i`, in which case `alpha = 1`.
    pub normalrank_equality: bool,
}

fn check_channel<T: Real>(model: &crate::model::Realization<T>, i: usize) -> Result<()> {
    if i >= model.m() {
        return Err(Error::InvalidChannel { channel: i, m: model.m() });
    }
    Ok(())
}

/// Real evaluation points outside the spectrum of `A`, tried first so that
/// generic witnesses are real and dominate every free mode of the plant.
fn generic_points<T: Real>(model: &crate::model::Realization<T>) -> Result<Vec<Complex<T>>> {
    let rho = linalg::spectral_radius(&model.eigenvalues()?).max(T::one());
    Ok([1.5, -1.5, 2.5, -2.5].iter().map(|&s| real_c(rho * lit::<T>(s))).collect())
}

/// An undetectable pattern on `support` that involves channel `i`, if one
/// exists with `|z0| >= 1 - boundary_tol`.
pub fn feasible_on_support<T: Real>(
    model: &crate::model::Realization<T>,
    i: usize,
    support: &[usize],
    settings: &Settings,
) -> Result<Option<AttackPattern<T>>> {
    check_channel(model, i)?;
    let sel = PencilSelection::new(model, support.to_vec())?;
    let Some(idx) = sel.column_of(i) else {
        return Err(Error::InvalidSupport { support: support.to_vec(), reason: format!("does not contain channel {i}") });
    };
    let r = pencil::normalrank(&sel, settings)?;
    let r_without = pencil::normalrank(&sel.without(i), settings)?;
    let tol = &settings.tol;
    if r_without == r {
        // Column i lies in the span of the others at every generic point.
        let mut points = generic_points(model)?;
        points.extend(pencil::sample_points(model, settings)?);
        for z in points {
            if let Some(p) = extract(&sel, z, idx, i, tol)? {
                return Ok(Some(p));
            }
        }
        return Ok(None);
    }
    // Otherwise only points where P_S loses rank can help.
    for rec in rank_drop_points(&sel, r, settings)? {
        if !rec.persistent {
            continue;
        }
        if let Some(p) = extract(&sel, rec.z, idx, i, tol)? {
            return Ok(Some(p));
        }
    }
    Ok(None)
}

/// Projects the unit vector on column `idx` onto the null space of `P_S(z)`.
fn extract<T: Real>(
    sel: &PencilSelection<'_, T>,
    z: Complex<T>,
    idx: usize,
    channel: usize,
    tol: &Tolerances,
) -> Result<Option<AttackPattern<T>>> {
    let basis = match null_basis(sel, z, tol) {
        Ok(b) => b,
        Err(Error::NoNullSpace) => return Ok(None),
        Err(e) => return Err(e),
    };
    let w: CVector<T> = basis.row(idx).transpose().map(|c| c.conj());
    let wn = w.norm();
    if wn < lit::<T>(tol.target_tol) {
        return Ok(None);
    }
    let mut v = &basis * w.unscale(wn);
    if z.im == T::zero() {
        // Real pencil at a real point: the projection of a real vector is real.
        v.iter_mut().for_each(|c| c.im = T::zero());
    }
    let model = sel.model();
    let (n, o) = (model.n(), model.o());
    let mut a0 = CVector::zeros(model.m());
    for (k, &j) in sel.support().iter().enumerate() {
        a0[j] = v[n + o + k];
    }
    let x0 = v.rows(0, n).into_owned();
    let d0 = v.rows(n, o).into_owned();
    match AttackPattern::new(model, z, x0, d0, a0, channel, tol) {
        Ok(p) => Ok(Some(p)),
        Err(Error::Contract(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn eq8_flag<T: Real>(model: &crate::model::Realization<T>, i: usize, settings: &Settings) -> Result<bool> {
    let rd = pencil::normalrank(&PencilSelection::disturbance_only(model), settings)?;
    let ri = pencil::normalrank(&PencilSelection::new(model, vec![i])?, settings)?;
    Ok(rd == ri)
}

/// Exact `alpha_i` by enumerating supports that contain `i`, smallest first
/// and lexicographically within a size, up to `q_max` channels.
pub fn security_index<T: Real>(
    model: &crate::model::Realization<T>,
    i: usize,
    q_max: usize,
    settings: &Settings,
) -> Result<SecurityIndexResult<T>> {
    check_channel(model, i)?;
    let m = model.m();
    if q_max > m {
        return Err(Error::Input(format!("budget {q_max} exceeds the number of attack channels {m}")));
    }
    let start = Instant::now();
    let normalrank_equality = eq8_flag(model, i, settings)?;
    let mut examined = 0;
    for size in 1..=q_max {
        for support in (0..m).combinations(size).filter(|s| s.contains(&i)) {
            examined += 1;
            if let Some(w) = feasible_on_support(model, i, &support, settings)? {
                return Ok(SecurityIndexResult {
                    channel: i,
                    alpha: Alpha::Finite(size),
                    witness: Some(w),
                    method: Method::Exact,
                    subsets_examined: examined,
                    elapsed: start.elapsed(),
                    normalrank_equality,
                });
            }
        }
    }
    Ok(SecurityIndexResult {
        channel: i,
        alpha: if q_max == m { Alpha::Infinite } else { Alpha::LowerBound(q_max) },
        witness: None,
        method: Method::Exact,
        subsets_examined: examined,
        elapsed: start.elapsed(),
        normalrank_equality,
    })
}

/// [`security_index`] for every channel.
pub fn security_indices<T: Real>(
    model: &crate::model::Realization<T>,
    q_max: usize,
    settings: &Settings,
) -> Result<Vec<SecurityIndexResult<T>>> {
    (0..model.m()).map(|i| security_index(model, i, q_max, settings)).collect()
}

/// Upper bound on `alpha_i`: grows the support from `{i}`, each time adding
/// the column that best explains column `i` at the candidate points. A channel
/// for which even the full support fails is reported as `LowerBound(m)`.
pub fn security_index_greedy<T: Real>(
    model: &crate::model::Realization<T>,
    i: usize,
    settings: &Settings,
) -> Result<SecurityIndexResult<T>> {
    check_channel(model, i)?;
    let start = Instant::now();
    let normalrank_equality = eq8_flag(model, i, settings)?;
    let m = model.m();
    let full = PencilSelection::full(model);
    let full_rank = pencil::normalrank(&full, settings)?;
    let mut points: Vec<Complex<T>> =
        rank_drop_points(&full, full_rank, settings)?.into_iter().filter(|r| r.persistent).map(|r| r.z).collect();
    points.extend(pencil::sample_points(model, settings)?);

    let mut support = vec![i];
    let mut examined = 0;
    loop {
        examined += 1;
        if let Some(w) = feasible_on_support(model, i, &support, settings)? {
            let alpha = Alpha::Finite(w.support.len());
            return Ok(SecurityIndexResult {
                channel: i,
                alpha,
                witness: Some(w),
                method: Method::GreedyUpperBound,
                subsets_examined: examined,
                elapsed: start.elapsed(),
                normalrank_equality,
            });
        }
        if support.len() == m {
            return Ok(SecurityIndexResult {
                channel: i,
                alpha: Alpha::LowerBound(m),
                witness: None,
                method: Method::GreedyUpperBound,
                subsets_examined: examined,
                elapsed: start.elapsed(),
                normalrank_equality,
            });
        }
        let mut best: Option<(usize, T)> = None;
        for j in (0..m).filter(|j| !support.contains(j)) {
            let mut trial = support.clone();
            trial.push(j);
            trial.sort_unstable();
            let sel = PencilSelection::new(model, trial)?;
            let idx = sel.column_of(i).expect("channel in support");
            let mut score: Option<T> = None;
            for &z in &points {
                let r = projection_residual(&sel.assemble(z), idx, &settings.tol)?;
                score = Some(score.map_or(r, |s: T| s.min(r)));
            }
            let score = score.unwrap_or_else(T::one);
            if best.is_none_or(|(_, b)| score < b) {
                best = Some((j, score));
            }
        }
        let (j, _) = best.expect("a channel outside the support");
        support.push(j);
        support.sort_unstable();
    }
}

/// Relative distance of column `idx` from the span of the other columns.
fn projection_residual<T: Real>(p: &CMatrix<T>, idx: usize, tol: &Tolerances) -> Result<T> {
    let col = p.column(idx).into_owned();
    let cn = col.norm();
    if cn == T::zero() {
        return Ok(T::zero());
    }
    let others = p.clone().remove_column(idx);
    if others.ncols() == 0 {
        return Ok(T::one());
    }
    let svd = T::svd_complex(&others, false)?;
    let smax = svd.s.first().copied().unwrap_or(T::zero());
    let cut = lit::<T>(tol.rank_rtol) * smax * lit::<T>(others.nrows().max(others.ncols()) as f64);
    let mut rem = col.clone();
    for (j, &s) in svd.s.iter().enumerate() {
        if s > cut {
            let uj = svd.u.column(j);
            let c = uj.dotc(&col);
            rem -= uj * c;
        }
    }
    Ok(rem.norm() / cn)
}

/// Real signals realizing a pattern over a finite horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedAttack<T: Real> {
    pub x0: DVector<T>,
    pub d: Trace<T>,
    pub a: Trace<T>,
}

/// `a(k) = z0^k a0`, `d(k) = z0^k d0`, `x(0) = x0` for real `z0`; for complex
/// `z0` the real part of the pattern plus its conjugate, `2 Re(z0^k v)`.
pub fn synthesize_attack<T: Real>(pattern: &AttackPattern<T>, horizon: usize) -> Result<SynthesizedAttack<T>> {
    if horizon == 0 {
        return Err(Error::Input("horizon must be at least 1".into()));
    }
    let gain = if pattern.z0.im == T::zero() { T::one() } else { lit::<T>(2.0) };
    let (o, m) = (pattern.d0.len(), pattern.a0.len());
    let mut d = nalgebra::DMatrix::zeros(o, horizon);
    let mut a = nalgebra::DMatrix::zeros(m, horizon);
    let mut zk = real_c(T::one());
    for k in 0..horizon {
        for j in 0..o {
            d[(j, k)] = (pattern.d0[j] * zk).re * gain;
        }
        for j in 0..m {
            a[(j, k)] = (pattern.a0[j] * zk).re * gain;
        }
        zk *= pattern.z0;
    }
    let x0 = pattern.x0.map(|c| c.re * gain);
    Ok(SynthesizedAttack { x0, d: Trace::new(d)?, a: Trace::new(a)? })
}
