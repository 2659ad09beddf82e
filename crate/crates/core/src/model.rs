//! The discrete-time plant
//!
//! ```text
//! x(k+1) = A x(k) + Bd d(k) + Ba a(k)
//! y(k)   = C x(k) + Dd d(k) + Da a(k)
//! ```
//!
//! with `n` states, `o` disturbances, `m` attack channels and `p` outputs.

use nalgebra::{Complex, ComplexField, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, complexify, CMatrix};
use crate::scalar::{lit, Real, Tolerances};

#[derive(Debug, Clone, PartialEq)]
pub struct Realization<T: Real> {
    a: DMatrix<T>,
    bd: DMatrix<T>,
    ba: DMatrix<T>,
    c: DMatrix<T>,
    dd: DMatrix<T>,
    da: DMatrix<T>,
    labels: Option<Vec<String>>,
}

fn check_shape<T: Real>(name: &str, m: &DMatrix<T>, expected: (usize, usize)) -> Result<()> {
    if m.shape() != expected {
        return Err(Error::Dimension { matrix: name.to_string(), expected, found: m.shape() });
    }
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite(format!("matrix `{name}`")));
    }
    Ok(())
}

impl<T: Real> Realization<T> {
    /// Builds a realization, checking that the six matrices conform and are finite.
    ///
    /// Dimensions are read from `A` (n), `Bd` (o), `Ba` (m) and `C` (p).
    pub fn new(
        a: DMatrix<T>,
        bd: DMatrix<T>,
        ba: DMatrix<T>,
        c: DMatrix<T>,
        dd: DMatrix<T>,
        da: DMatrix<T>,
    ) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::Dimension { matrix: "A".into(), expected: (1, 1), found: a.shape() });
        }
        check_shape("A", &a, (n, n))?;
        let o = bd.ncols();
        let m = ba.ncols();
        let p = c.nrows();
        if m == 0 {
            return Err(Error::Input("at least one attack channel is required (m >= 1)".into()));
        }
        if p == 0 {
            return Err(Error::Input("at least one output is required (p >= 1)".into()));
        }
        check_shape("Bd", &bd, (n, o))?;
        check_shape("Ba", &ba, (n, m))?;
        check_shape("C", &c, (p, n))?;
        check_shape("Dd", &dd, (p, o))?;
        check_shape("Da", &da, (p, m))?;
        Ok(Realization { a, bd, ba, c, dd, da, labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.m() {
            return Err(Error::Input(format!(
                "{} channel labels given for {} attack channels",
                labels.len(),
                self.m()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn o(&self) -> usize {
        self.bd.ncols()
    }
    pub fn m(&self) -> usize {
        self.ba.ncols()
    }
    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }
    pub fn bd(&self) -> &DMatrix<T> {
        &self.bd
    }
    pub fn ba(&self) -> &DMatrix<T> {
        &self.ba
    }
    pub fn c(&self) -> &DMatrix<T> {
        &self.c
    }
    pub fn dd(&self) -> &DMatrix<T> {
        &self.dd
    }
    pub fn da(&self) -> &DMatrix<T> {
        &self.da
    }
    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Label of channel `i` (0-based), defaulting to `a{i+1}`.
    pub fn channel_label(&self, i: usize) -> String {
        self.labels
            .as_ref()
            .and_then(|l| l.get(i).cloned())
            .unwrap_or_else(|| format!("a{}", i + 1))
    }

    /// Input and feedthrough matrices of the selected block.
    pub fn block(&self, block: Block) -> (&DMatrix<T>, &DMatrix<T>) {
        match block {
            Block::Disturbance => (&self.bd, &self.dd),
            Block::Attack => (&self.ba, &self.da),
        }
    }

    /// Same plant with only the listed attack columns (in the given order).
    pub fn restrict_attacks(&self, channels: &[usize]) -> Result<Self> {
        if let Some(&bad) = channels.iter().find(|&&j| j >= self.m()) {
            return Err(Error::InvalidChannel { channel: bad, m: self.m() });
        }
        let ba = self.ba.select_columns(channels);
        let da = self.da.select_columns(channels);
        let mut r = Realization::new(self.a.clone(), self.bd.clone(), ba, self.c.clone(), self.dd.clone(), da)?;
        if let Some(l) = &self.labels {
            r.labels = Some(channels.iter().map(|&j| l[j].clone()).collect());
        }
        Ok(r)
    }

    /// Converts every matrix to another scalar type.
    pub fn cast<U: Real>(&self) -> Realization<U> {
        let conv = |m: &DMatrix<T>| m.map(|x| lit::<U>(crate::scalar::to_f64(x)));
        Realization {
            a: conv(&self.a),
            bd: conv(&self.bd),
            ba: conv(&self.ba),
            c: conv(&self.c),
            dd: conv(&self.dd),
            da: conv(&self.da),
            labels: self.labels.clone(),
        }
    }

    pub fn eigenvalues(&self) -> Result<Vec<Complex<T>>> {
        linalg::eigenvalues(&self.a)
    }
}

/// Which input block of the plant a transfer matrix refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Disturbance,
    Attack,
}

/// Outcome of one named rank assumption.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub passed: bool,
    pub measured_rank: usize,
    pub required_rank: usize,
    pub rtol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport<T: Real> {
    pub passed: bool,
    pub checks: Vec<AssumptionCheck>,
    pub violated_assumptions: Vec<AssumptionCheck>,
    pub spectral_radius: T,
    pub is_schur: bool,
    pub eigenvalues: Vec<Complex<T>>,
}

fn stacked<T: Real>(top: &DMatrix<T>, bottom: &DMatrix<T>) -> DMatrix<T> {
    let mut s = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    s.rows_mut(0, top.nrows()).copy_from(top);
    s.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    s
}

/// Checks the rank assumptions on the signature matrices and classifies the
/// spectrum of `A`.
pub fn validate<T: Real>(model: &Realization<T>, tol: &Tolerances) -> Result<ValidationReport<T>> {
    let rtol = tol.rank_rtol;
    let mut checks = Vec::with_capacity(3);
    let o = model.o();
    let rd = if o == 0 { 0 } else { linalg::real_rank(&stacked(&model.bd, &model.dd), rtol)? };
    checks.push(AssumptionCheck {
        name: "rank [Bd; Dd] = o",
        passed: rd == o,
        measured_rank: rd,
        required_rank: o,
        rtol,
    });
    let ra = linalg::real_rank(&stacked(&model.ba, &model.da), rtol)?;
    checks.push(AssumptionCheck {
        name: "rank [Ba; Da] = m",
        passed: ra == model.m(),
        measured_rank: ra,
        required_rank: model.m(),
        rtol,
    });
    let rc = linalg::real_rank(&model.c, rtol)?;
    checks.push(AssumptionCheck {
        name: "rank C = p",
        passed: rc == model.p(),
        measured_rank: rc,
        required_rank: model.p(),
        rtol,
    });
    let eigenvalues = model.eigenvalues()?;
    let spectral_radius = linalg::spectral_radius(&eigenvalues);
    let edge = T::one() - lit::<T>(tol.boundary_tol);
    let is_schur = eigenvalues.iter().all(|z| z.modulus() < edge);
    let violated: Vec<AssumptionCheck> = checks.iter().filter(|c| !c.passed).cloned().collect();
    Ok(ValidationReport {
        passed: violated.is_empty(),
        checks,
        violated_assumptions: violated,
        spectral_radius,
        is_schur,
        eigenvalues,
    })
}

/// `C (zI - A)^{-1} B + D` for the selected block, through an LU solve.
pub fn transfer_eval<T: Real>(
    model: &Realization<T>,
    z: Complex<T>,
    block: Block,
    tol: &Tolerances,
) -> Result<CMatrix<T>> {
    let eigs = model.eigenvalues()?;
    transfer_eval_with_poles(model, z, block, &eigs, tol)
}

pub(crate) fn transfer_eval_with_poles<T: Real>(
    model: &Realization<T>,
    z: Complex<T>,
    block: Block,
    poles: &[Complex<T>],
    tol: &Tolerances,
) -> Result<CMatrix<T>> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::NonFinite("evaluation point".into()));
    }
    if let Some(p) = nearest_pole(z, poles) {
        let scale = T::one().max(p.modulus());
        if (z - p).modulus() <= lit::<T>(tol.pole_tol) * scale {
            return Err(Error::PoleProximity {
                z_re: crate::scalar::to_f64(z.re),
                z_im: crate::scalar::to_f64(z.im),
                pole_re: crate::scalar::to_f64(p.re),
                pole_im: crate::scalar::to_f64(p.im),
            });
        }
    }
    let (b, d) = model.block(block);
    transfer_at(model.a(), b, model.c(), d, z)
}

pub(crate) fn nearest_pole<T: Real>(z: Complex<T>, poles: &[Complex<T>]) -> Option<Complex<T>> {
    poles
        .iter()
        .copied()
        .min_by(|a, b| (z - a).modulus().partial_cmp(&(z - b).modulus()).unwrap_or(std::cmp::Ordering::Equal))
}

/// Unchecked `C (zI - A)^{-1} B + D`.
pub(crate) fn transfer_at<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    c: &DMatrix<T>,
    d: &DMatrix<T>,
    z: Complex<T>,
) -> Result<CMatrix<T>> {
    let n = a.nrows();
    let mut shifted = -complexify(a);
    for i in 0..n {
        shifted[(i, i)] += z;
    }
    let rhs = complexify(b);
    let x = shifted
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("singular resolvent at evaluation point".into()))?;
    Ok(complexify(c) * x + complexify(d))
}

/// Plain row-major JSON layout of a model file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "Bd", default)]
    pub bd: Vec<Vec<f64>>,
    #[serde(rename = "Ba")]
    pub ba: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "Dd", default)]
    pub dd: Vec<Vec<f64>>,
    #[serde(rename = "Da")]
    pub da: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

fn to_matrix(name: &str, rows: &[Vec<f64>], expected_rows: usize) -> Result<DMatrix<f64>> {
    // `[]` and `[[], [], ...]` both denote a matrix with zero columns.
    if rows.is_empty() || rows.iter().all(|r| r.is_empty()) {
        if !rows.is_empty() && rows.len() != expected_rows {
            return Err(Error::Dimension {
                matrix: name.into(),
                expected: (expected_rows, 0),
                found: (rows.len(), 0),
            });
        }
        return Ok(DMatrix::zeros(expected_rows, 0));
    }
    let cols = rows[0].len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(Error::Input(format!(
            "matrix `{name}` is ragged: row {i} has {} entries, row 0 has {cols}",
            r.len()
        )));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("matrix `{name}`")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    if m.ncols() == 0 {
        return Vec::new();
    }
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl ModelFile {
    pub fn into_realization(self) -> Result<Realization<f64>> {
        let a = to_matrix("A", &self.a, 0)?;
        let n = a.nrows();
        let c = to_matrix("C", &self.c, 0)?;
        let p = c.nrows();
        let real = Realization::new(
            a,
            to_matrix("Bd", &self.bd, n)?,
            to_matrix("Ba", &self.ba, n)?,
            c,
            to_matrix("Dd", &self.dd, p)?,
            to_matrix("Da", &self.da, p)?,
        )?;
        match self.labels {
            Some(l) => real.with_labels(l),
            None => Ok(real),
        }
    }

    pub fn from_realization<T: Real>(model: &Realization<T>) -> Self {
        let m64 = model.cast::<f64>();
        ModelFile {
            a: to_rows(&m64.a),
            bd: to_rows(&m64.bd),
            ba: to_rows(&m64.ba),
            c: to_rows(&m64.c),
            dd: to_rows(&m64.dd),
            da: to_rows(&m64.da),
            labels: m64.labels,
        }
    }
}

impl Realization<f64> {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Input(format!("model JSON: {e}")))?;
        file.into_realization()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from_realization(self)).expect("model serializes")
    }
}
