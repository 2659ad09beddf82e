//! Simulation of `x(k+1) = A x + Bd d + Ba a`, `y = C x + Dd d + Da a`, and
//! the harnesses that check undetectability of synthesized attacks.

use nalgebra::{ComplexField, DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::index::{synthesize_attack, AttackPattern};
use crate::linalg::{self, ensure_finite};
use crate::model::{validate, Realization};
use crate::scalar::{lit, to_f64, Real, Tolerances};

/// Relative output bound for exact undetectability.
pub const OUTPUT_TOL: f64 = 1e-6;
/// Largest tolerated growth of rounding errors relative to the witness scale.
pub const MAX_AMPLIFICATION: f64 = 1e8;
const ENVELOPE_FLOOR: f64 = 1e-12;
const STREAM_INSTANCE: u64 = 7;
const INSTANCE_RETRIES: usize = 500;

/// Uniformly sampled multichannel signal starting at `k = 0`. Stored as a
/// `channels x len` matrix, one column per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T: Real> {
    data: DMatrix<T>,
}

impl<T: Real> Trace<T> {
    pub fn new(data: DMatrix<T>) -> Result<Self> {
        ensure_finite(&data, "trace")?;
        Ok(Trace { data })
    }

    pub fn zeros(channels: usize, len: usize) -> Self {
        Trace { data: DMatrix::zeros(channels, len) }
    }

    /// Builds a trace from per-sample rows.
    pub fn from_samples(channels: usize, samples: &[Vec<T>]) -> Result<Self> {
        if let Some((k, s)) = samples.iter().enumerate().find(|(_, s)| s.len() != channels) {
            return Err(Error::Input(format!("sample {k} has {} channels, expected {channels}", s.len())));
        }
        Self::new(DMatrix::from_fn(channels, samples.len(), |c, k| samples[k][c]))
    }

    pub fn from_fn(channels: usize, len: usize, f: impl FnMut(usize, usize) -> T) -> Self {
        Trace { data: DMatrix::from_fn(channels, len, f) }
    }

    pub fn channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn data(&self) -> &DMatrix<T> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<T> {
        self.data
    }

    pub fn sample(&self, k: usize) -> DVector<T> {
        self.data.column(k).into_owned()
    }

    pub fn get(&self, channel: usize, k: usize) -> T {
        self.data[(channel, k)]
    }

    /// Samples as rows, for serialization.
    pub fn samples(&self) -> Vec<Vec<T>> {
        (0..self.len()).map(|k| self.data.column(k).iter().copied().collect()).collect()
    }

    /// Samples `start..start + len`.
    pub fn window(&self, start: usize, len: usize) -> Self {
        Trace { data: self.data.columns(start, len).into_owned() }
    }

    /// `max_k ||sample(k)||`.
    pub fn max_norm(&self) -> T {
        (0..self.len()).map(|k| self.data.column(k).norm()).fold(T::zero(), |a, b| a.max(b))
    }

    /// Frobenius norm over all samples.
    pub fn energy_norm(&self) -> T {
        self.data.norm()
    }

    /// The signal stacked sample by sample.
    pub fn stacked(&self) -> DVector<T> {
        DVector::from_column_slice(self.data.as_slice())
    }

    pub fn from_stacked(channels: usize, v: &DVector<T>) -> Self {
        let len = v.len().checked_div(channels).unwrap_or(0);
        Trace { data: DMatrix::from_column_slice(channels, len, v.as_slice()) }
    }

    pub fn cast<U: Real>(&self) -> Trace<U> {
        Trace { data: self.data.map(|x| lit::<U>(to_f64(x))) }
    }
}

impl<T: Real> std::ops::Sub for &Trace<T> {
    type Output = Trace<T>;
    fn sub(self, rhs: Self) -> Trace<T> {
        Trace { data: &self.data - &rhs.data }
    }
}

impl<T: Real> std::ops::Add for &Trace<T> {
    type Output = Trace<T>;
    fn add(self, rhs: Self) -> Trace<T> {
        Trace { data: &self.data + &rhs.data }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation<T: Real> {
    pub y: Trace<T>,
    pub x_final: DVector<T>,
}

fn check_input<T: Real>(name: &str, t: &Trace<T>, channels: usize, horizon: usize) -> Result<()> {
    if t.channels() != channels || t.len() < horizon {
        return Err(Error::Dimension {
            matrix: name.into(),
            expected: (channels, horizon),
            found: (t.channels(), t.len()),
        });
    }
    ensure_finite(&t.data, name)
}

/// Runs the plant recursion for `horizon` samples.
pub fn simulate<T: Real>(
    model: &Realization<T>,
    x0: &DVector<T>,
    d: &Trace<T>,
    a: &Trace<T>,
    horizon: usize,
) -> Result<Simulation<T>> {
    if x0.len() != model.n() {
        return Err(Error::Dimension { matrix: "x0".into(), expected: (model.n(), 1), found: (x0.len(), 1) });
    }
    ensure_finite(&DMatrix::from_column_slice(x0.len(), 1, x0.as_slice()), "x0")?;
    check_input("d", d, model.o(), horizon)?;
    check_input("a", a, model.m(), horizon)?;
    let mut x = x0.clone();
    let mut y = DMatrix::zeros(model.p(), horizon);
    for k in 0..horizon {
        let dk = d.data.column(k);
        let ak = a.data.column(k);
        let yk = model.c() * &x + model.dd() * dk + model.da() * ak;
        if yk.iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow { k });
        }
        y.set_column(k, &yk);
        x = model.a() * &x + model.bd() * dk + model.ba() * ak;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow { k: k + 1 });
        }
    }
    Ok(Simulation { y: Trace { data: y }, x_final: x })
}

/// Exact (`y = 0` from `x(0) = x0`) or asymptotic (`y -> 0` from `x(0) = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Undetectability {
    Exact,
    Asymptotic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UndetectabilityCheck {
    pub undetectable: bool,
    pub max_output: f64,
    /// `max_k ||(a(k), d(k), x(0))||` of the injected signals.
    pub scale: f64,
    /// Horizon actually simulated after the rounding-growth cap.
    pub horizon: usize,
    /// Fitted per-sample log decay of `||y(k)||` (asymptotic mode only).
    pub decay_rate: Option<f64>,
}

/// Largest horizon `N <= requested` with `||A^k|| / max(|z0|, 1)^k <= 1e8` for
/// every `k <= N`. Rounding errors of a forward simulation grow like `A^k`
/// (including the polynomial factor of defective eigenvalues) while the
/// witness itself grows like `|z0|^k`.
pub fn horizon_cap<T: Real>(model: &Realization<T>, z0_modulus: f64, requested: usize) -> Result<usize> {
    let scale = z0_modulus.max(1.0);
    let rho = to_f64(linalg::spectral_radius(&model.eigenvalues()?));
    if rho / scale < 1.0 - 1e-9 {
        return Ok(requested);
    }
    let step = model.a().unscale(lit::<T>(scale));
    let mut power = step.clone();
    for k in 1..=requested {
        let gain = T::svd_real(&power, false)?.s.first().map_or(0.0, |&g| to_f64(g));
        if gain > MAX_AMPLIFICATION {
            return Ok((k - 1).max(1));
        }
        power = &step * power;
    }
    Ok(requested)
}

/// Injects the synthesized attack and its masking disturbance and checks the
/// output.
pub fn verify_undetectable<T: Real>(
    model: &Realization<T>,
    pattern: &AttackPattern<T>,
    horizon: usize,
    mode: Undetectability,
    tol: &Tolerances,
) -> Result<UndetectabilityCheck> {
    match mode {
        Undetectability::Exact => {
            let n = horizon_cap(model, to_f64(pattern.z0.modulus()), horizon)?;
            let signals = synthesize_attack(pattern, n)?;
            let x0 = signals.x0.clone();
            check_from(model, &signals, &x0, n)
        }
        Undetectability::Asymptotic => {
            let report = validate(model, tol)?;
            if !report.is_schur {
                return Err(Error::Hypothesis(format!(
                    "asymptotic undetectability requires a Schur state matrix (spectral radius {})",
                    report.spectral_radius
                )));
            }
            let signals = synthesize_attack(pattern, horizon)?;
            let x0 = DVector::zeros(model.n());
            let sim = simulate(model, &x0, &signals.d, &signals.a, horizon)?;
            let scale = signal_scale(&signals.d, &signals.a, &signals.x0);
            let norms: Vec<f64> = (0..horizon).map(|k| to_f64(sim.y.data.column(k).norm())).collect();
            let max_output = norms.iter().copied().fold(0.0, f64::max);
            let floor = ENVELOPE_FLOOR * scale.max(f64::MIN_POSITIVE);
            let rate = envelope_slope(&norms[horizon / 2..], floor);
            let undetectable = match rate {
                Some(s) => s < (1.0 - 1e-6f64).ln(),
                // Everything in the fitting window has already vanished.
                None => true,
            };
            Ok(UndetectabilityCheck { undetectable, max_output, scale, horizon, decay_rate: rate })
        }
    }
}

/// Exact-mode check with an arbitrary initial state, e.g. a perturbed `x0`.
pub fn verify_undetectable_from<T: Real>(
    model: &Realization<T>,
    pattern: &AttackPattern<T>,
    x_init: &DVector<T>,
    horizon: usize,
) -> Result<UndetectabilityCheck> {
    let n = horizon_cap(model, to_f64(pattern.z0.modulus()), horizon)?;
    let signals = synthesize_attack(pattern, n)?;
    check_from(model, &signals, x_init, n)
}

fn signal_scale<T: Real>(d: &Trace<T>, a: &Trace<T>, x0: &DVector<T>) -> f64 {
    let mut s = to_f64(x0.norm());
    for k in 0..a.len() {
        let dk = to_f64(d.data.column(k).norm_squared());
        let ak = to_f64(a.data.column(k).norm_squared());
        s = s.max((dk + ak).sqrt());
    }
    s
}

fn check_from<T: Real>(
    model: &Realization<T>,
    signals: &crate::index::SynthesizedAttack<T>,
    x_init: &DVector<T>,
    horizon: usize,
) -> Result<UndetectabilityCheck> {
    let sim = simulate(model, x_init, &signals.d, &signals.a, horizon)?;
    let scale = signal_scale(&signals.d, &signals.a, &signals.x0);
    let max_output = to_f64(sim.y.max_norm());
    Ok(UndetectabilityCheck {
        undetectable: max_output <= OUTPUT_TOL * scale,
        max_output,
        scale,
        horizon,
        decay_rate: None,
    })
}

/// Least-squares slope of `ln ||y(k)||` over the samples above `floor`.
fn envelope_slope(norms: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        norms.iter().enumerate().filter(|(_, &v)| v > floor).map(|(k, &v)| (k as f64, v.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Plant dimensions `(n, o, m, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub n: usize,
    pub o: usize,
    pub m: usize,
    pub p: usize,
}

impl Dims {
    pub fn new(n: usize, o: usize, m: usize, p: usize) -> Self {
        Dims { n, o, m, p }
    }
}

/// Random plant with integer entries in `[-2, 2]` that passes [`validate`].
/// With a target, `A` is rescaled to that spectral radius.
pub fn generate_random_instance<T: Real>(dims: Dims, seed: u64, spectral_radius_target: Option<f64>) -> Result<Realization<T>> {
    let Dims { n, o, m, p } = dims;
    if n == 0 || m == 0 || p == 0 || p > n || m > n + p || o > n + p {
        return Err(Error::Input(format!("dimensions {dims:?} need n, m, p >= 1, p <= n and m, o <= n + p")));
    }
    if let Some(r) = spectral_radius_target {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Input(format!("spectral radius target {r} must be positive")));
        }
    }
    let mut rng = linalg::rng_for(seed, STREAM_INSTANCE);
    let tol = T::default_tolerances();
    for _ in 0..INSTANCE_RETRIES {
        let mut draw = |r: usize, c: usize| DMatrix::<T>::from_fn(r, c, |_, _| lit(rng.gen_range(-2i32..=2) as f64));
        let mut a = draw(n, n);
        let bd = draw(n, o);
        let ba = draw(n, m);
        let c = draw(p, n);
        let dd = draw(p, o);
        let da = draw(p, m);
        if let Some(target) = spectral_radius_target {
            let rho = to_f64(linalg::spectral_radius(&linalg::eigenvalues(&a)?));
            if rho < 1e-3 {
                continue;
            }
            a *= lit::<T>(target / rho);
        }
        let model = Realization::new(a, bd, ba, c, dd, da)?;
        if validate(&model, &tol)?.passed {
            return Ok(model);
        }
    }
    Err(Error::Numeric(format!("no valid random instance with dimensions {dims:?} after {INSTANCE_RETRIES} draws")))
}
