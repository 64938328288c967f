//! Cost functions and structural-property estimators, in exact rationals.

use std::fmt;

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::folding::{all_profiles, degree_profile, fold, DegreeProfile, FoldError};
use crate::machine::{log2_exact, Trace};

pub type Q = BigRational;

/// Integer as a rational.
pub fn q(x: i64) -> Q {
    Q::from_integer(BigInt::from(x))
}

/// `a / b` as a rational.
pub fn ratio(a: i64, b: i64) -> Q {
    Q::new(BigInt::from(a), BigInt::from(b))
}

fn qu(x: u64) -> Q {
    Q::from_integer(BigInt::from(x))
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("profile is for p = {profile} but parameters are for p = {params}")]
    PMismatch { profile: usize, params: usize },
    #[error("parameter vectors must have length {expected}, got {got}")]
    BadLength { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error("no communication at any folding")]
    NoCommunication,
    #[error("no supersteps below the folding level")]
    NoSupersteps,
    #[error("f must be non-negative and non-increasing")]
    BadWeights,
    #[error("candidate cost is zero")]
    ZeroCost,
    #[error(transparent)]
    Fold(#[from] FoldError),
}

pub(crate) fn ser_q<S: Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

pub(crate) fn ser_oq<S: Serializer>(x: &Option<Q>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_some(&v.to_string()),
        None => s.serialize_none(),
    }
}

fn ser_vq<S: Serializer>(x: &[Q], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(x.iter().map(|v| v.to_string()))
}

/// Parameters of M(p, sigma).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvalParams {
    pub p: usize,
    #[serde(serialize_with = "ser_q")]
    pub sigma: Q,
}

impl EvalParams {
    pub fn new(p: usize, sigma: Q) -> Result<Self, MetricsError> {
        if !p.is_power_of_two() {
            return Err(MetricsError::BadParam(format!("p = {p} is not a power of two")));
        }
        if sigma.is_negative() {
            return Err(MetricsError::BadParam("sigma < 0".into()));
        }
        Ok(EvalParams { p, sigma })
    }
}

/// Parameters of D-BSP(p, g, l); vectors indexed by cluster level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DbspParams {
    pub p: usize,
    #[serde(serialize_with = "ser_vq")]
    pub g: Vec<Q>,
    #[serde(serialize_with = "ser_vq")]
    pub l: Vec<Q>,
}

impl DbspParams {
    pub fn new(p: usize, g: Vec<Q>, l: Vec<Q>) -> Result<Self, MetricsError> {
        if !p.is_power_of_two() {
            return Err(MetricsError::BadParam(format!("p = {p} is not a power of two")));
        }
        let len = levels(p);
        for v in [&g, &l] {
            if v.len() != len {
                return Err(MetricsError::BadLength { expected: len, got: v.len() });
            }
        }
        if g.iter().any(|x| !x.is_positive()) {
            return Err(MetricsError::BadParam("every g_i must be positive".into()));
        }
        if l.iter().any(|x| x.is_negative()) {
            return Err(MetricsError::BadParam("every l_i must be non-negative".into()));
        }
        Ok(DbspParams { p, g, l })
    }

    /// `g_i = 1`, `l_i = sigma`: the BSP special case.
    pub fn flat(p: usize, sigma: Q) -> Result<Self, MetricsError> {
        let len = levels(p);
        Self::new(p, vec![q(1); len], vec![sigma; len])
    }

    /// `g_i = r^(log p - 1 - i)`, `l_i = l0_per_g * g_i`: cost falls by `r`
    /// per level.
    pub fn geometric(p: usize, r: Q, l_per_g: Q) -> Result<Self, MetricsError> {
        let len = levels(p);
        let g: Vec<Q> = (0..len)
            .map(|i| num::pow::pow(r.clone(), len - 1 - i))
            .collect();
        let l = g.iter().map(|x| x * &l_per_g).collect();
        Self::new(p, g, l)
    }

    /// `g` non-increasing and `l/g` non-increasing.
    pub fn theorem_ready(&self) -> bool {
        let ratios: Vec<Q> = self.g.iter().zip(&self.l).map(|(g, l)| l / g).collect();
        self.g.windows(2).all(|w| w[0] >= w[1]) && ratios.windows(2).all(|w| w[0] >= w[1])
    }
}

/// Number of profile slots at `p`: `max(1, log2 p)`.
pub fn levels(p: usize) -> usize {
    (log2_exact(p) as usize).max(1)
}

/// Communication complexity `H = sum_i (F^i + S^i sigma)`.
pub fn comm_complexity(profile: &DegreeProfile, params: &EvalParams) -> Result<Q, MetricsError> {
    if profile.p != params.p {
        return Err(MetricsError::PMismatch { profile: profile.p, params: params.p });
    }
    let mut h = Q::zero();
    for i in 0..profile.levels() {
        h += qu(profile.f[i]) + qu(profile.s[i]) * &params.sigma;
    }
    Ok(h)
}

/// Communication time `D = sum_i (F^i g_i + S^i l_i)`.
pub fn comm_time(profile: &DegreeProfile, params: &DbspParams) -> Result<Q, MetricsError> {
    if profile.p != params.p {
        return Err(MetricsError::PMismatch { profile: profile.p, params: params.p });
    }
    let mut d = Q::zero();
    for i in 0..profile.levels() {
        d += qu(profile.f[i]) * &params.g[i] + qu(profile.s[i]) * &params.l[i];
    }
    Ok(d)
}

fn prefix_f(prof: &DegreeProfile, j: usize) -> u64 {
    prof.f.iter().take(j).sum()
}

fn prefix_s(prof: &DegreeProfile, j: usize) -> u64 {
    prof.s.iter().take(j).sum()
}

fn check_p(trace: &Trace, p: usize) -> Result<(), MetricsError> {
    if p == 0 || !p.is_power_of_two() || p > trace.v {
        return Err(FoldError::BadP { p, v: trace.v }.into());
    }
    Ok(())
}

/// Wiseness from precomputed profiles, `profiles[j]` being the profile at
/// `2^j` for `j <= log p`.
pub fn wiseness_from_profiles(profiles: &[DegreeProfile], p: usize) -> Result<Q, MetricsError> {
    let log_p = log2_exact(p) as usize;
    let at_p = &profiles[log_p];
    let mut best: Option<Q> = None;
    for j in 1..=log_p {
        let den = prefix_f(at_p, j) as u128 * (p >> j) as u128;
        if den == 0 {
            continue;
        }
        let num = prefix_f(&profiles[j], j);
        let a = Q::new(BigInt::from(num), BigInt::from(den));
        if best.as_ref().is_none_or(|b| a < *b) {
            best = Some(a);
        }
    }
    best.ok_or(MetricsError::NoCommunication)
}

/// Empirical wiseness `alpha` of `trace` at `p`.
pub fn estimate_wiseness(trace: &Trace, p: usize) -> Result<Q, MetricsError> {
    check_p(trace, p)?;
    let profiles: Vec<DegreeProfile> = all_profiles(trace).into_iter().take(log2_exact(p) as usize + 1).collect();
    wiseness_from_profiles(&profiles, p)
}

pub fn fullness_from_profiles(profiles: &[DegreeProfile], p: usize) -> Result<Q, MetricsError> {
    let log_p = log2_exact(p) as usize;
    let at_p = &profiles[log_p];
    if at_p.f.iter().all(|&f| f == 0) {
        return Err(MetricsError::NoCommunication);
    }
    let mut best: Option<Q> = None;
    for j in 1..=log_p {
        let den = prefix_s(at_p, j) as u128 * (p >> j) as u128;
        if den == 0 {
            return Err(MetricsError::NoSupersteps);
        }
        let num = prefix_f(&profiles[j], j);
        let g = Q::new(BigInt::from(num), BigInt::from(den));
        if best.as_ref().is_none_or(|b| g < *b) {
            best = Some(g);
        }
    }
    best.ok_or(MetricsError::NoSupersteps)
}

/// Empirical fullness `gamma` of `trace` at `p`.
pub fn estimate_fullness(trace: &Trace, p: usize) -> Result<Q, MetricsError> {
    check_p(trace, p)?;
    let profiles: Vec<DegreeProfile> = all_profiles(trace).into_iter().take(log2_exact(p) as usize + 1).collect();
    fullness_from_profiles(&profiles, p)
}

pub fn lemma1_from_profiles(profiles: &[DegreeProfile], p: usize) -> bool {
    let log_p = log2_exact(p) as usize;
    (1..=log_p).all(|j| {
        prefix_f(&profiles[j], j) as u128 <= (p >> j) as u128 * prefix_f(&profiles[log_p], j) as u128
    })
}

/// Folding inequality for every `1 <= j <= log p`. False means a simulator bug.
pub fn check_lemma1(trace: &Trace, p: usize) -> Result<bool, MetricsError> {
    check_p(trace, p)?;
    let profiles = all_profiles(trace);
    Ok(lemma1_from_profiles(&profiles, p))
}

/// Outcome of [`check_dominance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Dominance {
    Holds,
    NotApplicable,
    Fails,
}

/// If every prefix sum of `x` is at most that of `y`, tests
/// `sum x_i f_i <= sum y_i f_i`.
pub fn check_dominance(x: &[Q], y: &[Q], f: &[Q]) -> Result<Dominance, MetricsError> {
    if x.len() != y.len() || x.len() != f.len() {
        return Err(MetricsError::BadLength { expected: x.len(), got: y.len().max(f.len()) });
    }
    if f.iter().any(|v| v.is_negative()) || f.windows(2).any(|w| w[0] < w[1]) {
        return Err(MetricsError::BadWeights);
    }
    let (mut sx, mut sy) = (Q::zero(), Q::zero());
    for (a, b) in x.iter().zip(y) {
        sx += a;
        sy += b;
        if sx > sy {
            return Ok(Dominance::NotApplicable);
        }
    }
    let lhs: Q = x.iter().zip(f).map(|(a, w)| a * w).sum();
    let rhs: Q = y.iter().zip(f).map(|(a, w)| a * w).sum();
    Ok(if lhs <= rhs { Dominance::Holds } else { Dominance::Fails })
}

/// Upper end of a sigma range; may be unbounded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SigmaBound {
    Finite(Q),
    Infinite,
}

impl fmt::Display for SigmaBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaBound::Finite(x) => write!(f, "{x}"),
            SigmaBound::Infinite => write!(f, "inf"),
        }
    }
}

/// Per-level `sigma^m_j <= sigma^M_j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigmaRange {
    pub min: Vec<Q>,
    pub max: Vec<SigmaBound>,
}

impl SigmaRange {
    pub fn new(min: Vec<Q>, max: Vec<SigmaBound>) -> Result<Self, MetricsError> {
        if min.len() != max.len() {
            return Err(MetricsError::BadLength { expected: min.len(), got: max.len() });
        }
        for (a, b) in min.iter().zip(&max) {
            if let SigmaBound::Finite(b) = b {
                if a > b {
                    return Err(MetricsError::BadParam(format!("sigma^m {a} > sigma^M {b}")));
                }
            }
        }
        Ok(SigmaRange { min, max })
    }

    /// `[0, inf)` on `len` levels.
    pub fn unbounded(len: usize) -> Self {
        SigmaRange { min: vec![Q::zero(); len], max: vec![SigmaBound::Infinite; len] }
    }

    /// `sigma^m = 0`, `sigma^M_i = n / ((i+1) 2^(2i/3))` for `i < log pstar`,
    /// with `2^(2i/3)` rounded up to a multiple of 1/1024 so the bound is
    /// never overstated.
    pub fn matmul_corollary(n: usize, pstar: usize) -> Self {
        let len = levels(pstar);
        let max = (0..len)
            .map(|i| {
                let t = (2f64).powf(2.0 * i as f64 / 3.0) * 1024.0;
                let mut c = t.ceil() as i64;
                // Guard the float: c/1024 must not fall below 2^(2i/3).
                while (c as f64) < t {
                    c += 1;
                }
                let den = Q::new(BigInt::from(c), BigInt::from(1024)) * q(i as i64 + 1);
                SigmaBound::Finite(q(n as i64) / den)
            })
            .collect();
        SigmaRange { min: vec![Q::zero(); len], max }
    }
}

/// Outcome of [`check_theorem1_preconditions`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Theorem1Check {
    pub ok: bool,
    pub g_non_increasing: bool,
    pub ratio_non_increasing: bool,
    pub range_nonempty: bool,
    pub lower: Q,
    pub upper: SigmaBound,
}

impl Theorem1Check {
    /// Optimality factor `alpha beta / (1 + alpha)`.
    pub fn factor(alpha: &Q, beta: &Q) -> Q {
        alpha * beta / (q(1) + alpha)
    }
}

pub fn check_theorem1_preconditions(params: &DbspParams, range: &SigmaRange) -> Result<Theorem1Check, MetricsError> {
    let log_p = log2_exact(params.p) as usize;
    if range.min.len() < log_p {
        return Err(MetricsError::BadLength { expected: log_p, got: range.min.len() });
    }
    let p = q(params.p as i64);
    let mut lower = Q::zero();
    let mut upper = SigmaBound::Infinite;
    for k in 1..=log_p {
        let scale = q(1i64 << k) / &p;
        let lo = &range.min[k - 1] * &scale;
        if lo > lower {
            lower = lo;
        }
        if let SigmaBound::Finite(m) = &range.max[k - 1] {
            let hi = m * &scale;
            upper = match upper {
                SigmaBound::Finite(u) if u <= hi => SigmaBound::Finite(u),
                _ => SigmaBound::Finite(hi),
            };
        }
    }
    let ratios: Vec<Q> = params.g.iter().zip(&params.l).map(|(g, l)| l / g).collect();
    let g_non_increasing = params.g.windows(2).all(|w| w[0] >= w[1]);
    let ratio_non_increasing = ratios.windows(2).all(|w| w[0] >= w[1]);
    let within = |x: &Q| {
        *x >= lower
            && match &upper {
                SigmaBound::Finite(u) => x <= u,
                SigmaBound::Infinite => true,
            }
    };
    let range_nonempty = match &upper {
        SigmaBound::Finite(u) => lower <= *u,
        SigmaBound::Infinite => true,
    };
    let ok = g_non_increasing && ratio_non_increasing && range_nonempty && ratios.iter().all(within);
    Ok(Theorem1Check { ok, g_non_increasing, ratio_non_increasing, range_nonempty, lower, upper })
}

/// Metrics of one trace at one parameter point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MetricsReport {
    pub n: usize,
    pub profile: DegreeProfile,
    #[serde(serialize_with = "ser_q", rename = "H")]
    pub h: Q,
    #[serde(serialize_with = "ser_q", rename = "D")]
    pub d: Q,
    #[serde(serialize_with = "ser_oq")]
    pub alpha: Option<Q>,
    #[serde(serialize_with = "ser_oq")]
    pub gamma: Option<Q>,
}

/// Folds `trace` to `eval.p` and evaluates everything. `D` uses `dbsp` when
/// given, the flat parameters at `eval.sigma` otherwise.
pub fn report(trace: &Trace, eval: &EvalParams, dbsp: Option<&DbspParams>) -> Result<MetricsReport, MetricsError> {
    check_p(trace, eval.p)?;
    let log_p = log2_exact(eval.p) as usize;
    let mut profiles = Vec::with_capacity(log_p + 1);
    let mut pp = 1;
    while pp <= eval.p {
        profiles.push(degree_profile(&fold(trace, pp)?));
        pp *= 2;
    }
    let profile = profiles[log_p].clone();
    let h = comm_complexity(&profile, eval)?;
    let flat;
    let dbsp = match dbsp {
        Some(d) => d,
        None => {
            flat = DbspParams::flat(eval.p, eval.sigma.clone())?;
            &flat
        }
    };
    let d = comm_time(&profile, dbsp)?;
    let alpha = wiseness_from_profiles(&profiles, eval.p).ok();
    let gamma = fullness_from_profiles(&profiles, eval.p).ok();
    Ok(MetricsReport { n: trace.n, profile, h, d, alpha, gamma })
}

/// Empirical `beta`: `baseline.H / candidate.H`.
pub fn optimality_ratio(candidate: &MetricsReport, baseline: &MetricsReport) -> Result<Q, MetricsError> {
    if candidate.h.is_zero() {
        return Err(MetricsError::ZeroCost);
    }
    Ok(&baseline.h / &candidate.h)
}

/// Same ratio on communication time.
pub fn optimality_ratio_d(candidate: &MetricsReport, baseline: &MetricsReport) -> Result<Q, MetricsError> {
    if candidate.d.is_zero() {
        return Err(MetricsError::ZeroCost);
    }
    Ok(&baseline.d / &candidate.d)
}

/// Measured cost over a closed-form bound evaluated with constant 1.
pub fn bound_ratio(measured: &Q, bound: f64) -> f64 {
    to_f64(measured) / bound
}

/// `1` as a rational; handy in tests.
pub fn one() -> Q {
    Q::one()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prof() -> DegreeProfile {
        DegreeProfile { p: 4, s: vec![2, 1], f: vec![4, 5] }
    }

    #[test]
    fn h_direct() {
        let e = EvalParams::new(4, q(3)).unwrap();
        assert_eq!(comm_complexity(&prof(), &e).unwrap(), q(18));
    }

    #[test]
    fn d_direct() {
        let pr = DegreeProfile { p: 4, s: vec![1, 1], f: vec![2, 3] };
        let d = DbspParams::new(4, vec![q(2), q(1)], vec![q(4), q(1)]).unwrap();
        assert_eq!(comm_time(&pr, &d).unwrap(), q(12));
    }

    #[test]
    fn flat_d_equals_h() {
        let d = DbspParams::flat(4, q(7)).unwrap();
        let e = EvalParams::new(4, q(7)).unwrap();
        assert_eq!(comm_time(&prof(), &d).unwrap(), comm_complexity(&prof(), &e).unwrap());
    }

    #[test]
    fn p_mismatch() {
        let e = EvalParams::new(8, q(0)).unwrap();
        assert!(matches!(comm_complexity(&prof(), &e), Err(MetricsError::PMismatch { .. })));
    }

    #[test]
    fn dominance_small() {
        let x = [q(1), q(3)];
        let y = [q(2), q(2)];
        assert_eq!(check_dominance(&x, &y, &[q(2), q(1)]).unwrap(), Dominance::Holds);
        assert_eq!(check_dominance(&y, &x, &[q(2), q(1)]).unwrap(), Dominance::NotApplicable);
        assert!(check_dominance(&x, &y, &[q(1), q(2)]).is_err());
    }

    #[test]
    fn preconditions_degenerate_and_increasing() {
        let r = SigmaRange::unbounded(1);
        let ok = DbspParams::new(4, vec![q(1), q(1)], vec![q(0), q(0)]).unwrap();
        assert!(check_theorem1_preconditions(&ok, &SigmaRange::unbounded(2)).unwrap().ok);
        let bad = DbspParams::new(4, vec![q(1), q(2)], vec![q(0), q(0)]).unwrap();
        assert!(!check_theorem1_preconditions(&bad, &SigmaRange::unbounded(2)).unwrap().ok);
        assert!(check_theorem1_preconditions(&ok, &r).is_err());
    }

    #[test]
    fn factor_formula() {
        assert_eq!(Theorem1Check::factor(&q(1), &q(1)), ratio(1, 2));
    }

    #[test]
    fn geometric_params() {
        let d = DbspParams::geometric(8, q(2), q(0)).unwrap();
        assert_eq!(d.g, vec![q(4), q(2), q(1)]);
        assert!(d.theorem_ready());
    }
}
