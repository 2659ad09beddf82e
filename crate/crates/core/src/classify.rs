//! Detectability and identifiability of attacks against an attacker that
//! controls at most `q` channels, read off from the security indices.

use crate::error::{Error, Result};
use crate::index::{synthesize_attack, Alpha, AttackPattern, SecurityIndexResult, SynthesizedAttack};
use crate::model::Realization;
use crate::scalar::{real_c, Real};
use crate::sim::Trace;

/// Answer to a threshold question; `Unknown` when only a lower bound on
/// `alpha` is available and it does not settle the question.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Yes,
    No,
    Unknown,
}

impl Decision {
    fn from_bool(b: bool) -> Self {
        if b {
            Decision::Yes
        } else {
            Decision::No
        }
    }
}

/// Exact undetectability (`y = 0`) or, for Schur `A` and a known initial
/// state, asymptotic undetectability (`y -> 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Semantics {
    Exact,
    Asymptotic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelClassification {
    pub channel: usize,
    pub alpha: Alpha,
    /// `q >= alpha_i`.
    pub undetectable_attack_exists: Decision,
    /// `q < alpha_i / 2`.
    pub all_attacks_i_identifiable: Decision,
    pub asymptotic_variant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemClassification {
    pub channels: Vec<ChannelClassification>,
    /// `q < min_i alpha_i / 2`.
    pub all_attacks_identifiable: Decision,
    pub q: usize,
    pub semantics: Semantics,
}

/// `q >= alpha`.
pub fn undetectable_within(alpha: Alpha, q: usize) -> Decision {
    match alpha {
        Alpha::Finite(a) => Decision::from_bool(q >= a),
        Alpha::Infinite => Decision::No,
        Alpha::LowerBound(k) if q <= k => Decision::No,
        Alpha::LowerBound(_) => Decision::Unknown,
    }
}

/// `2q < alpha`.
pub fn identifiable_within(alpha: Alpha, q: usize) -> Decision {
    match alpha {
        Alpha::Finite(a) => Decision::from_bool(2 * q < a),
        Alpha::Infinite => Decision::Yes,
        Alpha::LowerBound(k) if 2 * q < k + 1 => Decision::Yes,
        Alpha::LowerBound(_) => Decision::Unknown,
    }
}

/// Classifies every channel from its index. `results` must hold one entry per
/// channel `0..m`, in any order.
pub fn classify<T: Real>(
    results: &[SecurityIndexResult<T>],
    q: usize,
    semantics: Semantics,
    is_schur: bool,
) -> Result<SystemClassification> {
    let mut alphas = vec![None; results.len()];
    for r in results {
        match alphas.get_mut(r.channel) {
            Some(slot @ None) => *slot = Some(r.alpha),
            _ => return Err(Error::Input(format!("index results do not cover channels 0..{} exactly once", results.len()))),
        }
    }
    let alphas: Vec<Alpha> = alphas.into_iter().map(|a| a.expect("filled above")).collect();
    classify_alphas(&alphas, q, semantics, is_schur)
}

/// [`classify`] on bare index values, channel `i` at position `i`.
pub fn classify_alphas(alphas: &[Alpha], q: usize, semantics: Semantics, is_schur: bool) -> Result<SystemClassification> {
    if semantics == Semantics::Asymptotic && !is_schur {
        return Err(Error::Hypothesis("asymptotic semantics require a Schur state matrix".into()));
    }
    let channels: Vec<ChannelClassification> = alphas
        .iter()
        .enumerate()
        .map(|(channel, &alpha)| ChannelClassification {
            channel,
            alpha,
            undetectable_attack_exists: undetectable_within(alpha, q),
            all_attacks_i_identifiable: identifiable_within(alpha, q),
            asymptotic_variant: semantics == Semantics::Asymptotic,
        })
        .collect();
    let all = if channels.iter().all(|c| c.all_attacks_i_identifiable == Decision::Yes) {
        Decision::Yes
    } else if channels.iter().any(|c| c.all_attacks_i_identifiable == Decision::No) {
        Decision::No
    } else {
        Decision::Unknown
    };
    Ok(SystemClassification { channels, all_attacks_identifiable: all, q, semantics })
}

/// Two attack scenarios with identical outputs that differ on channel `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterexamplePair<T: Real> {
    /// Part of the witness support kept by the first attacker; contains `i`.
    pub j: Vec<usize>,
    /// Remaining support, attacked with opposite sign by the second attacker.
    pub k: Vec<usize>,
    /// Attack on `J`, the masking disturbance and `x(0) = x0`.
    pub first: SynthesizedAttack<T>,
    /// Negated attack on `K`, no disturbance, `x(0) = 0`.
    pub second: SynthesizedAttack<T>,
}

fn restricted<T: Real>(w: &AttackPattern<T>, keep: &[usize], sign: T, with_state: bool) -> AttackPattern<T> {
    let mut p = w.clone();
    for j in 0..p.a0.len() {
        p.a0[j] = if keep.contains(&j) { p.a0[j] * real_c(sign) } else { real_c(T::zero()) };
    }
    if !with_state {
        p.x0.fill(real_c(T::zero()));
        p.d0.fill(real_c(T::zero()));
    }
    p.support = keep.to_vec();
    p
}

/// Splits the witness support into `J` (holding `i` and the first
/// `ceil(alpha/2) - 1` other channels) and `K`, so that either part fits a
/// budget `q >= ceil(alpha/2)`.
pub fn counterexample_pair<T: Real>(
    model: &Realization<T>,
    i: usize,
    witness: &AttackPattern<T>,
    q: usize,
    horizon: usize,
) -> Result<CounterexamplePair<T>> {
    if witness.a0.len() != model.m() || witness.x0.len() != model.n() || witness.d0.len() != model.o() {
        return Err(Error::Contract("witness does not match the model dimensions".into()));
    }
    if !witness.support.contains(&i) {
        return Err(Error::Contract(format!("witness support {:?} does not contain channel {i}", witness.support)));
    }
    let alpha = witness.support.len();
    let half = alpha.div_ceil(2);
    if q < half {
        return Err(Error::Contract(format!("budget {q} is below ceil(alpha/2) = {half}")));
    }
    let mut j = vec![i];
    j.extend(witness.support.iter().copied().filter(|&c| c != i).take(half - 1));
    j.sort_unstable();
    let k: Vec<usize> = witness.support.iter().copied().filter(|c| !j.contains(c)).collect();
    let first = synthesize_attack(&restricted(witness, &j, T::one(), true), horizon)?;
    let mut second = synthesize_attack(&restricted(witness, &k, -T::one(), false), horizon)?;
    second.d = Trace::zeros(model.o(), horizon);
    Ok(CounterexamplePair { j, k, first, second })
}
