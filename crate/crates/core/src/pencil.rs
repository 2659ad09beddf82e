//! Rosenbrock system matrix pencils
//!
//! ```text
//! P_S(z) = [ A - zI   Bd   Ba[:, S] ]
//!          [ C        Dd   Da[:, S] ]
//! ```
//!
//! for an attack support `S` (empty for the disturbance-only pencil), together
//! with normal rank, invariant zeros and null directions.
//!
//! Zeros are located by compressing the pencil to a square matrix polynomial
//! with random real matrices, interpolating its determinant on a circle,
//! taking companion roots and then keeping only the roots at which the
//! original pencil demonstrably loses rank.

use nalgebra::{Complex, ComplexField, DMatrix};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, complexify, CMatrix, CVector};
use crate::model::{nearest_pole, Realization};
use crate::scalar::{cplx, lit, real_c, Real, Settings, Tolerances};

pub(crate) const STREAM_SAMPLES: u64 = 1;
const STREAM_COMPRESSION: u64 = 100;

/// Number of normal-rank sample points.
pub const NORMALRANK_SAMPLES: usize = 8;
const SAMPLE_RADII: [f64; 2] = [1.3, 1.7];

/// A pencil restricted to the disturbance columns plus the attack columns in
/// `support` (0-based, strictly increasing).
#[derive(Debug, Clone)]
pub struct PencilSelection<'a, T: Real> {
    model: &'a Realization<T>,
    support: Vec<usize>,
}

impl<'a, T: Real> PencilSelection<'a, T> {
    pub fn new(model: &'a Realization<T>, support: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = support.iter().find(|&&j| j >= model.m()) {
            return Err(Error::InvalidSupport {
                support,
                reason: format!("index {bad} out of range for m = {}", model.m()),
            });
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSupport {
                support,
                reason: "indices must be strictly increasing".into(),
            });
        }
        Ok(PencilSelection { model, support })
    }

    /// Disturbance-only pencil `P_d`.
    pub fn disturbance_only(model: &'a Realization<T>) -> Self {
        PencilSelection { model, support: Vec::new() }
    }

    /// Pencil with every attack column.
    pub fn full(model: &'a Realization<T>) -> Self {
        PencilSelection { model, support: (0..model.m()).collect() }
    }

    pub fn model(&self) -> &'a Realization<T> {
        self.model
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn rows(&self) -> usize {
        self.model.n() + self.model.p()
    }

    pub fn cols(&self) -> usize {
        self.model.n() + self.model.o() + self.support.len()
    }

    /// Column index of attack channel `i` inside the pencil, if selected.
    pub fn column_of(&self, channel: usize) -> Option<usize> {
        self.support
            .iter()
            .position(|&j| j == channel)
            .map(|pos| self.model.n() + self.model.o() + pos)
    }

    /// The selection with `channel` removed.
    pub fn without(&self, channel: usize) -> Self {
        PencilSelection {
            model: self.model,
            support: self.support.iter().copied().filter(|&j| j != channel).collect(),
        }
    }

    /// Real matrices `M0`, `E` with `P(z) = M0 - z E`.
    pub fn parts(&self) -> (DMatrix<T>, DMatrix<T>) {
        let m = self.model;
        let (n, o, p) = (m.n(), m.o(), m.p());
        let mut m0 = DMatrix::zeros(self.rows(), self.cols());
        m0.view_mut((0, 0), (n, n)).copy_from(m.a());
        m0.view_mut((n, 0), (p, n)).copy_from(m.c());
        if o > 0 {
            m0.view_mut((0, n), (n, o)).copy_from(m.bd());
            m0.view_mut((n, n), (p, o)).copy_from(m.dd());
        }
        for (pos, &j) in self.support.iter().enumerate() {
            let col = n + o + pos;
            m0.view_mut((0, col), (n, 1)).copy_from(&m.ba().column(j));
            m0.view_mut((n, col), (p, 1)).copy_from(&m.da().column(j));
        }
        let mut e = DMatrix::zeros(self.rows(), self.cols());
        for i in 0..n {
            e[(i, i)] = T::one();
        }
        (m0, e)
    }

    /// `P_S(z)`, entry for entry, without balancing.
    pub fn assemble(&self, z: Complex<T>) -> CMatrix<T> {
        let (m0, _) = self.parts();
        let mut p = complexify(&m0);
        for i in 0..self.model.n() {
            p[(i, i)] -= z;
        }
        p
    }
}

/// SVD-based numerical rank of an arbitrary complex matrix.
pub fn rank_at<T: Real>(m: &CMatrix<T>, tol: &Tolerances) -> Result<usize> {
    linalg::numerical_rank(m, tol.rank_rtol)
}

/// Deterministic sample points for normal-rank evaluation: half on a circle of
/// radius 1.3, half on radius 1.7, at random angles, away from eigenvalues of `A`.
pub fn sample_points<T: Real>(model: &Realization<T>, settings: &Settings) -> Result<Vec<Complex<T>>> {
    let eigs = model.eigenvalues()?;
    Ok(sample_points_avoiding(&eigs, settings, NORMALRANK_SAMPLES))
}

pub(crate) fn sample_points_avoiding<T: Real>(
    poles: &[Complex<T>],
    settings: &Settings,
    count: usize,
) -> Vec<Complex<T>> {
    let mut rng = linalg::rng_for(settings.seed, STREAM_SAMPLES);
    let mut out = Vec::with_capacity(count);
    let per = count.div_ceil(SAMPLE_RADII.len());
    let sep = lit::<T>(settings.tol.pole_tol.max(1e-3));
    for &radius in &SAMPLE_RADII {
        let mut taken = 0;
        while taken < per && out.len() < count {
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let z = cplx(lit::<T>(radius * theta.cos()), lit::<T>(radius * theta.sin()));
            let clear = nearest_pole(z, poles).is_none_or(|p| (z - p).modulus() > sep * T::one().max(p.modulus()));
            if clear {
                out.push(z);
                taken += 1;
            }
        }
    }
    out
}

/// Maximum numerical rank of `eval(z)` over the sample points.
pub(crate) fn sampled_normalrank<T, F>(samples: &[Complex<T>], tol: &Tolerances, mut eval: F) -> Result<usize>
where
    T: Real,
    F: FnMut(Complex<T>) -> Result<CMatrix<T>>,
{
    let mut best = 0;
    for &z in samples {
        best = best.max(rank_at(&eval(z)?, tol)?);
    }
    Ok(best)
}

/// Normal rank of the selected pencil, estimated over [`sample_points`].
pub fn normalrank<T: Real>(sel: &PencilSelection<'_, T>, settings: &Settings) -> Result<usize> {
    let samples = sample_points(sel.model, settings)?;
    sampled_normalrank(&samples, &settings.tol, |z| Ok(sel.assemble(z)))
}

/// One verified zero of a pencil.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroRecord<T: Real> {
    pub z: Complex<T>,
    pub rank_at_z: usize,
    /// `|z| >= 1 - boundary_tol`.
    pub persistent: bool,
    pub verified: bool,
    /// Number of compressed-determinant roots clustered into this zero.
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroSet<T: Real> {
    pub normalrank: usize,
    pub zeros: Vec<ZeroRecord<T>>,
    /// The pencil lacks full column normal rank, so every `z` admits a null vector.
    pub generically_rank_deficient: bool,
}

impl<T: Real> ZeroSet<T> {
    pub fn persistent(&self) -> impl Iterator<Item = &ZeroRecord<T>> {
        self.zeros.iter().filter(|z| z.persistent)
    }
}

/// Parameters of the determinant-interpolation zero search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroSearch {
    /// Radius of the interpolation circle.
    pub node_radius: f64,
    /// Number of independent random compressions.
    pub compressions: usize,
    /// Nodes beyond the degree bound `n + 1`.
    pub extra_nodes: usize,
}

impl Default for ZeroSearch {
    fn default() -> Self {
        ZeroSearch { node_radius: 2.0, compressions: 3, extra_nodes: 2 }
    }
}

/// Finite invariant zeros of a pencil with full column normal rank. For a
/// generically rank-deficient pencil the zero list is empty and the flag is set.
pub fn invariant_zeros<T: Real>(sel: &PencilSelection<'_, T>, settings: &Settings) -> Result<ZeroSet<T>> {
    invariant_zeros_with(sel, settings, &ZeroSearch::default())
}

pub fn invariant_zeros_with<T: Real>(
    sel: &PencilSelection<'_, T>,
    settings: &Settings,
    search: &ZeroSearch,
) -> Result<ZeroSet<T>> {
    let nr = normalrank(sel, settings)?;
    if nr < sel.cols() {
        return Ok(ZeroSet { normalrank: nr, zeros: Vec::new(), generically_rank_deficient: true });
    }
    let zeros = rank_drop_points_with(sel, nr, settings, search)?;
    Ok(ZeroSet { normalrank: nr, zeros, generically_rank_deficient: false })
}

/// Finite points where the pencil's rank falls below `normalrank`. Unlike
/// [`invariant_zeros`] this also works for generically rank-deficient
/// pencils, by compressing on both sides to an `r x r` matrix polynomial.
pub fn rank_drop_points<T: Real>(
    sel: &PencilSelection<'_, T>,
    normalrank: usize,
    settings: &Settings,
) -> Result<Vec<ZeroRecord<T>>> {
    rank_drop_points_with(sel, normalrank, settings, &ZeroSearch::default())
}

struct Candidate<T: Real> {
    z: Complex<T>,
    multiplicity: usize,
}

fn rank_drop_points_with<T: Real>(
    sel: &PencilSelection<'_, T>,
    r: usize,
    settings: &Settings,
    search: &ZeroSearch,
) -> Result<Vec<ZeroRecord<T>>> {
    if r == 0 {
        return Ok(Vec::new());
    }
    let tol = &settings.tol;
    let n = sel.model.n();
    let (m0, e) = sel.parts();
    let (rows, cols) = (sel.rows(), sel.cols());
    let degree_bound = n.min(r);
    let nodes = degree_bound + 1 + search.extra_nodes;
    let radius = lit::<T>(search.node_radius);

    let mut verified: Vec<(ZeroRecord<T>, T)> = Vec::new();
    let mut usable = 0;
    let mut last_failure = String::new();
    for k in 0..search.compressions.max(1) {
        let mut rng = linalg::rng_for(settings.seed, STREAM_COMPRESSION + k as u64);
        let w: DMatrix<T> = if r == rows { DMatrix::identity(r, r) } else { linalg::random_matrix(&mut rng, r, rows) };
        let v: DMatrix<T> = if r == cols { DMatrix::identity(r, r) } else { linalg::random_matrix(&mut rng, cols, r) };
        // Random mixing even when no compression is needed, so that the
        // compressions differ and spurious roots do not repeat.
        let mix: DMatrix<T> = linalg::random_matrix(&mut rng, r, r);
        let q0 = &mix * &w * &m0 * &v;
        let q1 = &mix * &w * &e * &v;
        let coeffs = match interpolate_det(&q0, &q1, nodes, radius, degree_bound) {
            Ok(c) => c,
            Err(msg) => {
                last_failure = msg;
                continue;
            }
        };
        usable += 1;
        let roots = linalg::poly_roots(&coeffs)?;
        let polished: Vec<Complex<T>> = roots.iter().map(|&z| polish(&q0, &q1, z)).collect();
        for cand in cluster_candidates(&roots, &polished) {
            if let Some(rec) = verify_candidate(sel, cand, r, tol)? {
                verified.push(rec);
            }
        }
    }
    if usable == 0 {
        return Err(Error::Interpolation(last_failure));
    }

    let mut merged = merge(verified, tol);
    close_under_conjugation(sel, &mut merged, r, tol)?;
    merged.sort_by(|a, b| {
        let ka = (a.z.modulus(), a.z.im.atan2(a.z.re));
        let kb = (b.z.modulus(), b.z.im.atan2(b.z.re));
        ka.partial_cmp(&kb).unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(merged)
}

/// Coefficients (ascending) of `det(Q0 - z Q1)`, trimmed to the effective degree.
fn interpolate_det<T: Real>(
    q0: &DMatrix<T>,
    q1: &DMatrix<T>,
    nodes: usize,
    radius: T,
    degree_bound: usize,
) -> std::result::Result<Vec<T>, String> {
    let tau = lit::<T>(std::f64::consts::TAU);
    let nodes_t = lit::<T>(nodes as f64);
    let omega = |j: usize| {
        let ang = tau * lit::<T>(j as f64) / nodes_t;
        cplx(ang.cos(), ang.sin())
    };
    let c0 = complexify(q0);
    let c1 = complexify(q1);
    let mut values = Vec::with_capacity(nodes);
    for j in 0..nodes {
        let z = omega(j) * radius;
        let det = (&c0 - &c1 * z).determinant();
        if !(det.re.is_finite() && det.im.is_finite()) {
            return Err("non-finite determinant sample".into());
        }
        values.push(det);
    }
    // Discrete Fourier inversion on the scaled roots of unity.
    let mut scaled = Vec::with_capacity(nodes);
    for k in 0..nodes {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (j, f) in values.iter().enumerate() {
            acc += *f * omega((j * k) % nodes).conj();
        }
        scaled.push(acc / nodes_t); // coefficient times radius^k
    }
    let max_s = scaled.iter().map(|c| c.modulus()).fold(T::zero(), |a, b| if b > a { b } else { a });
    if max_s <= T::zero() {
        return Err("compressed determinant vanishes identically".into());
    }
    let noise = T::default_epsilon() * lit::<T>(1e4) * max_s;
    if scaled[degree_bound + 1..].iter().any(|c| c.modulus() > lit::<T>(1e-6) * max_s) {
        return Err("determinant samples exceed the degree bound".into());
    }
    let mut degree = 0;
    for k in 0..=degree_bound {
        if scaled[k].modulus() > noise {
            degree = k;
        }
    }
    let mut coeffs = Vec::with_capacity(degree + 1);
    let mut rk = T::one();
    for s in scaled.iter().take(degree + 1) {
        // Real pencil data give real determinant coefficients.
        coeffs.push(s.re / rk);
        rk *= radius;
    }
    Ok(coeffs)
}

/// A few Newton steps on `det(Q0 - z Q1)`; keeps the input when a step would
/// wander off (clustered roots).
fn polish<T: Real>(q0: &DMatrix<T>, q1: &DMatrix<T>, z: Complex<T>) -> Complex<T> {
    let c0 = complexify(q0);
    let c1 = complexify(q1);
    let mut cur = z;
    let limit = lit::<T>(1e-3) * T::one().max(z.modulus());
    for _ in 0..3 {
        let q = &c0 - &c1 * cur;
        let Some(inv_q1) = q.lu().solve(&c1) else { break };
        let tr = inv_q1.trace();
        if tr.modulus() == T::zero() || !(tr.re.is_finite() && tr.im.is_finite()) {
            break;
        }
        let next = cur + Complex::new(T::one(), T::zero()) / tr;
        if (next - z).modulus() > limit {
            break;
        }
        let done = (next - cur).modulus() <= T::default_epsilon() * T::one().max(cur.modulus());
        cur = next;
        if done {
            break;
        }
    }
    cur
}

/// Polished individual roots plus centroids of raw root clusters at several
/// radii. Roots of a multiple zero split by roughly `eps^(1/k)` around it, so
/// the centroid of the unpolished cluster is accurate while Newton steps would
/// pull its members in unevenly.
fn cluster_candidates<T: Real>(roots: &[Complex<T>], polished: &[Complex<T>]) -> Vec<Candidate<T>> {
    let mut out: Vec<Candidate<T>> = polished.iter().map(|&z| Candidate { z, multiplicity: 1 }).collect();
    for level in [1e-6, 1e-4, 1e-2] {
        let lvl = lit::<T>(level);
        let mut label: Vec<usize> = (0..roots.len()).collect();
        for i in 0..roots.len() {
            for j in (i + 1)..roots.len() {
                let scale = T::one().max(roots[i].modulus());
                if (roots[i] - roots[j]).modulus() <= lvl * scale {
                    let (a, b) = (label[i], label[j]);
                    if a != b {
                        for l in label.iter_mut() {
                            if *l == b {
                                *l = a;
                            }
                        }
                    }
                }
            }
        }
        let mut seen = Vec::new();
        for &l in &label {
            if seen.contains(&l) {
                continue;
            }
            seen.push(l);
            let members: Vec<Complex<T>> =
                label.iter().zip(roots).filter(|(m, _)| **m == l).map(|(_, z)| *z).collect();
            if members.len() > 1 {
                let count = lit::<T>(members.len() as f64);
                let sum = members.iter().fold(Complex::new(T::zero(), T::zero()), |a, b| a + b);
                out.push(Candidate { z: sum / count, multiplicity: members.len() });
            }
        }
    }
    out
}

/// Ratio `sigma_r / sigma_1` of the pencil at `z` along with its rank.
fn deficiency<T: Real>(sel: &PencilSelection<'_, T>, z: Complex<T>, r: usize, tol: &Tolerances) -> Result<(usize, T)> {
    let p = sel.assemble(z);
    let sv = linalg::singular_values(&p)?;
    let rank = rank_at(&p, tol)?;
    let score = match (sv.first(), sv.get(r - 1)) {
        (Some(&s1), Some(&sr)) if s1 > T::zero() => sr / s1,
        _ => T::zero(),
    };
    Ok((rank, score))
}

fn verify_candidate<T: Real>(
    sel: &PencilSelection<'_, T>,
    cand: Candidate<T>,
    r: usize,
    tol: &Tolerances,
) -> Result<Option<(ZeroRecord<T>, T)>> {
    let z = cand.z;
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Ok(None);
    }
    let mut tries = Vec::with_capacity(2);
    if z.im.abs() <= lit::<T>(tol.pairing_tol) * T::one().max(z.modulus()) {
        tries.push(real_c(z.re));
    }
    tries.push(z);
    for zz in tries {
        let (rank, score) = deficiency(sel, zz, r, tol)?;
        if rank < r {
            let persistent = zz.modulus() >= T::one() - lit::<T>(tol.boundary_tol);
            let rec = ZeroRecord { z: zz, rank_at_z: rank, persistent, verified: true, multiplicity: cand.multiplicity };
            return Ok(Some((rec, score)));
        }
    }
    Ok(None)
}

fn merge<T: Real>(mut found: Vec<(ZeroRecord<T>, T)>, tol: &Tolerances) -> Vec<ZeroRecord<T>> {
    // Cluster centroids first (near a defective zero every point within
    // sqrt(eps) looks singular, so scores cannot rank them), then the most
    // deficient representative.
    found.sort_by(|a, b| {
        b.0.multiplicity
            .cmp(&a.0.multiplicity)
            .then(a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
    });
    let merge_tol = lit::<T>(tol.zero_merge_tol);
    let mut out: Vec<ZeroRecord<T>> = Vec::new();
    for (rec, _) in found {
        let scale = T::one().max(rec.z.modulus());
        // Cluster centroids of a multiple zero may land slightly apart; a
        // representative within the loosest cluster radius is the same zero.
        let same = out.iter_mut().find(|o| {
            let d = (o.z - rec.z).modulus();
            d <= merge_tol * scale || (o.rank_at_z == rec.rank_at_z && d <= lit::<T>(1e-2) * scale && near_same(o, &rec))
        });
        match same {
            Some(o) => o.multiplicity = o.multiplicity.max(rec.multiplicity),
            None => out.push(rec),
        }
    }
    out
}

// Two verified points within a cluster radius are only merged when one of
// them carries multiplicity (i.e. came from a split multiple root).
fn near_same<T: Real>(a: &ZeroRecord<T>, b: &ZeroRecord<T>) -> bool {
    a.multiplicity > 1 || b.multiplicity > 1
}

fn close_under_conjugation<T: Real>(
    sel: &PencilSelection<'_, T>,
    zeros: &mut Vec<ZeroRecord<T>>,
    r: usize,
    tol: &Tolerances,
) -> Result<()> {
    let pair = lit::<T>(tol.pairing_tol);
    let mut extra = Vec::new();
    for z in zeros.iter() {
        let scale = T::one().max(z.z.modulus());
        if z.z.im.abs() <= pair * scale {
            continue;
        }
        let conj = z.z.conj();
        if zeros.iter().chain(extra.iter()).any(|o: &ZeroRecord<T>| (o.z - conj).modulus() <= pair * scale) {
            continue;
        }
        if let Some((rec, _)) = verify_candidate(sel, Candidate { z: conj, multiplicity: z.multiplicity }, r, tol)? {
            extra.push(rec);
        }
    }
    zeros.extend(extra);
    Ok(())
}

/// One basis vector of the null space of `P_S(z)`, split into blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct NullDirection<T: Real> {
    pub z: Complex<T>,
    pub x0: CVector<T>,
    pub d0: CVector<T>,
    /// Coordinates of the selected attack columns, in support order.
    pub a0: CVector<T>,
    pub basis_dim: usize,
}

impl<T: Real> NullDirection<T> {
    pub fn stacked(&self) -> CVector<T> {
        let mut v = CVector::zeros(self.x0.len() + self.d0.len() + self.a0.len());
        v.rows_mut(0, self.x0.len()).copy_from(&self.x0);
        v.rows_mut(self.x0.len(), self.d0.len()).copy_from(&self.d0);
        v.rows_mut(self.x0.len() + self.d0.len(), self.a0.len()).copy_from(&self.a0);
        v
    }
}

/// Orthonormal basis of the numerical null space of `P_S(z)`.
pub fn null_direction<T: Real>(
    sel: &PencilSelection<'_, T>,
    z: Complex<T>,
    tol: &Tolerances,
) -> Result<Vec<NullDirection<T>>> {
    let basis = null_basis(sel, z, tol)?;
    let (n, o) = (sel.model.n(), sel.model.o());
    let k = sel.support.len();
    let dim = basis.ncols();
    Ok((0..dim)
        .map(|j| {
            let col = basis.column(j);
            NullDirection {
                z,
                x0: col.rows(0, n).into_owned(),
                d0: col.rows(n, o).into_owned(),
                a0: col.rows(n + o, k).into_owned(),
                basis_dim: dim,
            }
        })
        .collect())
}

/// Null space basis as matrix columns; errors when the pencil has full column rank.
pub(crate) fn null_basis<T: Real>(sel: &PencilSelection<'_, T>, z: Complex<T>, tol: &Tolerances) -> Result<CMatrix<T>> {
    let (rank, basis) = linalg::null_space(&sel.assemble(z), tol.rank_rtol)?;
    if rank == sel.cols() {
        return Err(Error::NoNullSpace);
    }
    Ok(basis)
}

/// `||P_S(z) v|| / ||v||`.
pub fn relative_residual<T: Real>(sel: &PencilSelection<'_, T>, z: Complex<T>, v: &CVector<T>) -> T {
    let nv = v.norm();
    if nv == T::zero() {
        return T::zero();
    }
    (sel.assemble(z) * v).norm() / nv
}
