//! Exact-arithmetic reference implementations used as test oracles.
#![allow(dead_code)]

use dynsec::model::Realization;
use itertools::Itertools;
use nalgebra::{Complex, DMatrix};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qf(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Integer copy of a model whose entries are all integers.
pub struct IntModel {
    pub n: usize,
    pub o: usize,
    pub m: usize,
    pub p: usize,
    pub a: Vec<Vec<i64>>,
    pub bd: Vec<Vec<i64>>,
    pub ba: Vec<Vec<i64>>,
    pub c: Vec<Vec<i64>>,
    pub dd: Vec<Vec<i64>>,
    pub da: Vec<Vec<i64>>,
}

fn ints(m: &DMatrix<f64>) -> Vec<Vec<i64>> {
    (0..m.nrows())
        .map(|r| {
            (0..m.ncols())
                .map(|c| {
                    let v = m[(r, c)];
                    assert_eq!(v, v.round(), "oracle needs integer entries");
                    v as i64
                })
                .collect()
        })
        .collect()
}

impl IntModel {
    pub fn from(model: &Realization<f64>) -> Self {
        IntModel {
            n: model.n(),
            o: model.o(),
            m: model.m(),
            p: model.p(),
            a: ints(model.a()),
            bd: ints(model.bd()),
            ba: ints(model.ba()),
            c: ints(model.c()),
            dd: ints(model.dd()),
            da: ints(model.da()),
        }
    }

    /// Pencil on the disturbance columns plus `support`, evaluated at rational `z`.
    pub fn pencil_at(&self, support: &[usize], z: &Q) -> Vec<Vec<Q>> {
        let (n, o) = (self.n, self.o);
        let cols = n + o + support.len();
        let mut out = vec![vec![Q::zero(); cols]; n + self.p];
        for r in 0..n {
            for c in 0..n {
                out[r][c] = q(self.a[r][c]) - if r == c { z.clone() } else { Q::zero() };
            }
            for c in 0..o {
                out[r][n + c] = q(self.bd[r][c]);
            }
            for (k, &j) in support.iter().enumerate() {
                out[r][n + o + k] = q(self.ba[r][j]);
            }
        }
        for r in 0..self.p {
            for c in 0..n {
                out[n + r][c] = q(self.c[r][c]);
            }
            for c in 0..o {
                out[n + r][n + c] = q(self.dd[r][c]);
            }
            for (k, &j) in support.iter().enumerate() {
                out[n + r][n + o + k] = q(self.da[r][j]);
            }
        }
        out
    }

    fn pencil_int(&self, support: &[usize], t: i64) -> Vec<Vec<i64>> {
        self.pencil_at(support, &q(t))
            .into_iter()
            .map(|row| row.into_iter().map(|x| x.to_integer().to_i64().unwrap()).collect())
            .collect()
    }

    /// Exact normal rank: the largest rank over rational points with `|z| > 1`.
    /// Every nonzero minor has degree at most `n <= 3` in `z`, so five
    /// distinct points always include one where it does not vanish.
    pub fn normalrank(&self, support: &[usize]) -> usize {
        oracle_points().iter().map(|z| rank_q(self.pencil_at(support, z))).max().unwrap()
    }

    /// gcd of all `k`-minors of the selected pencil, as a polynomial in `z`.
    pub fn minor_gcd(&self, support: &[usize], k: usize) -> Poly {
        if k == 0 {
            return Poly::one();
        }
        let rows = self.n + self.p;
        let cols = self.n + self.o + support.len();
        if k > rows.min(cols) {
            return Poly::zero();
        }
        let deg = k.min(self.n);
        let nodes: Vec<i64> = (0..=deg as i64).collect();
        let mats: Vec<Vec<Vec<i64>>> = nodes.iter().map(|&t| self.pencil_int(support, t)).collect();
        let mut g = Poly::zero();
        for rs in (0..rows).combinations(k) {
            for cs in (0..cols).combinations(k) {
                let vals: Vec<Q> = mats
                    .iter()
                    .map(|m| {
                        let sub: Vec<Vec<i128>> =
                            rs.iter().map(|&r| cs.iter().map(|&c| m[r][c] as i128).collect()).collect();
                        Q::from_integer(BigInt::from(bareiss(sub)))
                    })
                    .collect();
                let minor = Poly::interpolate(&nodes, &vals);
                g = Poly::gcd(&g, &minor);
                if g.degree() == Some(0) {
                    return g;
                }
            }
        }
        g
    }

    /// Whether some `z` with `|z| >= 1` admits a null vector of the pencil on
    /// `support` whose attack entry for `channel` is nonzero.
    pub fn feasible(&self, channel: usize, support: &[usize]) -> bool {
        let without: Vec<usize> = support.iter().copied().filter(|&j| j != channel).collect();
        let r = self.normalrank(support);
        let r_without = self.normalrank(&without);
        if r_without == r {
            return true;
        }
        // rank P_S(z) = rank P_{S\i}(z) = k  <=>  G_{k+1}(z) = 0 and H_k(z) != 0.
        for k in 0..r {
            let g = self.minor_gcd(support, k + 1);
            if g.degree().unwrap_or(0) == 0 {
                continue;
            }
            let h = self.minor_gcd(&without, k);
            let mut rest = g;
            if !h.is_zero() {
                loop {
                    let common = Poly::gcd(&rest, &h);
                    if common.degree().unwrap_or(0) == 0 {
                        break;
                    }
                    rest = rest.div_exact(&common);
                }
            } else {
                continue;
            }
            if rest.has_persistent_root() {
                return true;
            }
        }
        false
    }

    /// Minimum over all supports containing `channel` of the feasible sizes.
    pub fn alpha(&self, channel: usize) -> Option<usize> {
        let mut best: Option<usize> = None;
        for size in 1..=self.m {
            for s in (0..self.m).combinations(size).filter(|s| s.contains(&channel)) {
                if self.feasible(channel, &s) {
                    best = Some(best.map_or(size, |b: usize| b.min(size)));
                }
            }
        }
        best
    }
}

pub fn oracle_points() -> Vec<Q> {
    vec![q(2), q(-3), qf(5, 4), qf(-7, 3), qf(11, 2)]
}

/// Integer determinant by fraction-free elimination.
pub fn bareiss(mut a: Vec<Vec<i128>>) -> i128 {
    let n = a.len();
    if n == 0 {
        return 1;
    }
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&r| a[r][k] != 0) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

/// Exact rank by Gaussian elimination over the rationals.
pub fn rank_q(mut a: Vec<Vec<Q>>) -> usize {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..rows).find(|&r| !a[r][c].is_zero()) else { continue };
        a.swap(rank, piv);
        for r in 0..rows {
            if r != rank && !a[r][c].is_zero() {
                let f = &a[r][c] / &a[rank][c];
                for cc in c..cols {
                    let v = &f * &a[rank][cc];
                    a[r][cc] -= v;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Dense univariate polynomial with rational coefficients, ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<Q>);

impl Poly {
    pub fn zero() -> Self {
        Poly(Vec::new())
    }

    pub fn one() -> Self {
        Poly(vec![Q::one()])
    }

    fn trim(mut self) -> Self {
        while self.0.last().is_some_and(|c| c.is_zero()) {
            self.0.pop();
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn eval(&self, z: &Q) -> Q {
        self.0.iter().rev().fold(Q::zero(), |acc, c| acc * z + c)
    }

    pub fn interpolate(nodes: &[i64], vals: &[Q]) -> Self {
        let mut out = vec![Q::zero(); nodes.len()];
        for (j, (&tj, vj)) in nodes.iter().zip(vals).enumerate() {
            if vj.is_zero() {
                continue;
            }
            let mut basis = vec![Q::one()];
            let mut denom = Q::one();
            for (l, &tl) in nodes.iter().enumerate() {
                if l == j {
                    continue;
                }
                let mut next = vec![Q::zero(); basis.len() + 1];
                for (d, b) in basis.iter().enumerate() {
                    next[d + 1] += b;
                    next[d] -= b * q(tl);
                }
                basis = next;
                denom *= q(tj - tl);
            }
            let f = vj / denom;
            for (d, b) in basis.iter().enumerate() {
                out[d] += b * &f;
            }
        }
        Poly(out).trim()
    }

    fn monic(self) -> Self {
        match self.0.last().cloned() {
            Some(lead) => Poly(self.0.into_iter().map(|c| c / &lead).collect()),
            None => self,
        }
    }

    fn rem(&self, d: &Poly) -> Poly {
        let mut r = self.0.clone();
        let dd = d.degree().expect("nonzero divisor");
        let lead = d.0[dd].clone();
        while r.len() > dd {
            let f = r.last().unwrap() / &lead;
            let shift = r.len() - 1 - dd;
            for (k, c) in d.0.iter().enumerate() {
                r[shift + k] -= &f * c;
            }
            r.pop();
            while r.last().is_some_and(|c| c.is_zero()) {
                r.pop();
            }
        }
        Poly(r).trim()
    }

    pub fn gcd(a: &Poly, b: &Poly) -> Poly {
        let (mut x, mut y) = (a.clone(), b.clone());
        while !y.is_zero() {
            let r = x.rem(&y);
            x = y;
            y = r;
        }
        x.monic()
    }

    pub fn div_exact(&self, d: &Poly) -> Poly {
        let dd = d.degree().expect("nonzero divisor");
        let mut r = self.0.clone();
        let mut quot = vec![Q::zero(); r.len().saturating_sub(dd)];
        while r.len() > dd && !r.is_empty() {
            let f = r.last().unwrap() / &d.0[dd];
            let shift = r.len() - 1 - dd;
            for (k, c) in d.0.iter().enumerate() {
                r[shift + k] -= &f * c;
            }
            quot[shift] = f;
            r.pop();
        }
        assert!(r.iter().all(|c| c.is_zero()), "inexact polynomial division");
        Poly(quot).trim()
    }

    fn derivative(&self) -> Poly {
        Poly(self.0.iter().enumerate().skip(1).map(|(k, c)| c * q(k as i64)).collect()).trim()
    }

    pub fn square_free(&self) -> Poly {
        let g = Poly::gcd(self, &self.derivative());
        if g.degree().unwrap_or(0) == 0 {
            self.clone()
        } else {
            self.div_exact(&g)
        }
    }

    /// Whether a root lies on or outside the unit circle (within 1e-9).
    pub fn has_persistent_root(&self) -> bool {
        let p = self.square_free();
        if p.eval(&q(1)).is_zero() || p.eval(&q(-1)).is_zero() {
            return true;
        }
        p.roots().iter().any(|z| z.norm() >= 1.0 - 1e-9)
    }

    /// Numerical roots of a square-free polynomial (Durand-Kerner).
    pub fn roots(&self) -> Vec<Complex<f64>> {
        let Some(deg) = self.degree() else { return Vec::new() };
        if deg == 0 {
            return Vec::new();
        }
        let c: Vec<f64> = self.clone().monic().0.iter().map(|x| x.to_f64().unwrap()).collect();
        let eval = |z: Complex<f64>| c.iter().rev().fold(Complex::new(0.0, 0.0), |acc, &k| acc * z + k);
        let mut z: Vec<Complex<f64>> = (0..deg).map(|k| Complex::new(0.4, 0.9).powu(k as u32)).collect();
        for _ in 0..2000 {
            let prev = z.clone();
            for i in 0..deg {
                let mut den = Complex::new(1.0, 0.0);
                for j in 0..deg {
                    if j != i {
                        den *= z[i] - z[j];
                    }
                }
                let step = eval(z[i]) / den;
                z[i] -= step;
            }
            if z.iter().zip(&prev).all(|(a, b)| (a - b).norm() <= 1e-16 * a.norm().max(1.0)) {
                break;
            }
        }
        z
    }
}

/// Exact rank of a block matrix whose blocks are given as integer matrices.
pub fn rank_int(m: &[Vec<i64>]) -> usize {
    rank_q(m.iter().map(|row| row.iter().map(|&x| q(x)).collect()).collect())
}

/// Block lower-triangular Toeplitz matrix of the Markov parameters
/// `D, CB, CAB, ...` of `(A, B, C, D)` over `len` steps, computed exactly.
pub fn markov_toeplitz(a: &[Vec<i64>], b: &[Vec<i64>], c: &[Vec<i64>], d: &[Vec<i64>], len: usize) -> Vec<Vec<i64>> {
    let n = a.len();
    let p = c.len();
    let m = d.first().map_or(0, |r| r.len());
    let mul = |x: &[Vec<i64>], y: &[Vec<i64>]| -> Vec<Vec<i64>> {
        let inner = y.len();
        let cols = y.first().map_or(0, |r| r.len());
        x.iter().map(|row| (0..cols).map(|j| (0..inner).map(|k| row[k] * y[k][j]).sum()).collect()).collect()
    };
    let mut markov = vec![d.to_vec()];
    let mut ak_b = b.to_vec();
    for _ in 1..len {
        markov.push(if n == 0 { vec![vec![0; m]; p] } else { mul(c, &ak_b) });
        ak_b = mul(a, &ak_b);
    }
    let mut t = vec![vec![0i64; len * m]; len * p];
    for bi in 0..len {
        for bj in 0..=bi {
            let h = &markov[bi - bj];
            for r in 0..p {
                for cc in 0..m {
                    t[bi * p + r][bj * m + cc] = h[r][cc];
                }
            }
        }
    }
    t
}

impl IntModel {
    /// The attack transfer matrix has a left inverse iff, over a long enough
    /// window, the first input sample is determined by the output: the first
    /// block column of the Markov-parameter Toeplitz stack is independent of
    /// the remaining ones.
    pub fn attack_left_invertible(&self) -> bool {
        if self.m == 0 {
            return true;
        }
        let len = 2 * self.n + 2;
        let t = markov_toeplitz(&self.a, &self.ba, &self.c, &self.da, len);
        let rest: Vec<Vec<i64>> = t.iter().map(|row| row[self.m..].to_vec()).collect();
        rank_int(&t) == rank_int(&rest) + self.m
    }
}

/// Schur plant with three states and three attackable sensors (`Ba = 0`,
/// `Da = I`); odd seeds add one process disturbance. Returns `None` when the
/// draw fails validation.
pub fn sensor_family(seed: u64) -> Option<Realization<f64>> {
    use dynsec::model::validate;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let o = (seed % 2) as usize;
    let mut draw = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.gen_range(-2i32..=2) as f64);
    let a = draw(3, 3);
    let bd = draw(3, o);
    let c = draw(3, 3);
    let rho = a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if rho < 1e-3 {
        return None;
    }
    let model = Realization::new(a * (0.9 / rho), bd, DMatrix::zeros(3, 3), c, DMatrix::zeros(3, o), DMatrix::identity(3, 3)).ok()?;
    validate(&model, &dynsec::scalar::Tolerances::default()).ok()?.passed.then_some(model)
}

/// Sparse attack on `channel`: a constant offset plus a unit-circle sinusoid.
pub fn mixed_attack(m: usize, channel: usize, len: usize, rng: &mut impl rand::Rng) -> dynsec::sim::Trace<f64> {
    let offset = rng.gen_range(-2.0..2.0);
    let amp = rng.gen_range(0.5..2.0);
    let theta = rng.gen_range(0.05..3.0);
    let phase = rng.gen_range(0.0..6.28);
    dynsec::sim::Trace::from_fn(m, len, |c, k| if c == channel { offset + amp * (theta * k as f64 + phase).cos() } else { 0.0 })
}

/// First sample after which every decaying mode that could hide in an
/// estimate on `q` channels has shrunk by `1e-6`: the non-persistent invariant
/// zeros of the pencils on at most `2q` channels. A zero at the origin hides
/// at most `n` samples.
pub fn decay_horizon(model: &Realization<f64>, q: usize, settings: &dynsec::scalar::Settings) -> usize {
    use dynsec::pencil::{invariant_zeros, PencilSelection};
    let mut rho: Option<f64> = None;
    for k in 1..=(2 * q).min(model.m()) {
        for u in (0..model.m()).combinations(k) {
            let sel = PencilSelection::new(model, u).unwrap();
            for z in invariant_zeros(&sel, settings).unwrap().zeros.iter().filter(|z| !z.persistent) {
                rho = Some(rho.unwrap_or(0.0).max(z.z.norm()));
            }
        }
    }
    match rho {
        None => 0,
        Some(r) if r < 1e-12 => model.n(),
        Some(r) => (1e-6f64.ln() / r.ln()).ceil() as usize + model.n(),
    }
}
