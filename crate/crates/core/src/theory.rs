//! Closed-form limits and combinatorial counts for threshold 2.
//!
//! At amplitude `a` and density `p = a * n^-(d/(j+1) + j)` the number of
//! internally spanned `2j`-dimensional subtori is asymptotically Poisson with
//! mean `lambda(j, d, a) = C(d, 2j) * (2j)! * 2^-(j+1) * a^(j+1)`.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::span::{self, MergeOrder, SeedSet};
use crate::torus::{vertex_distance, Dimensions, Vertex};

/// Largest `j` with `j(j+1) < d`.
pub fn j_of(d: usize) -> Result<usize> {
    if d <= 2 {
        return Err(Error::Domain(format!("J_d needs d > 2, got {d}")));
    }
    let mut j = 1;
    while (j + 1) * (j + 2) < d {
        j += 1;
    }
    Ok(j)
}

fn big_factorial(k: u64) -> BigUint {
    (1..=k).fold(BigUint::one(), |acc, i| acc * i)
}

fn big_binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::ZERO;
    }
    big_factorial(n) / (big_factorial(k) * big_factorial(n - k))
}

fn check_scaling(j: usize, d: usize, a: f64) -> Result<()> {
    if j < 1 || 2 * j > d {
        return Err(Error::Domain(format!(
            "need 1 <= j and 2j <= d, got j={j}, d={d}"
        )));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!(
            "amplitude must be positive, got {a}"
        )));
    }
    Ok(())
}

/// `C(d,2j) * (2j)! * 2^-(j+1) * a^(j+1)`.
pub fn lambda(j: usize, d: usize, a: f64) -> Result<f64> {
    check_scaling(j, d, a)?;
    let combinatorial = big_binomial(d as u64, 2 * j as u64) * big_factorial(2 * j as u64);
    let c = combinatorial
        .to_f64()
        .ok_or_else(|| Error::Domain("lambda prefactor overflows f64".into()))?;
    Ok(c * 0.5f64.powi(j as i32 + 1) * a.powi(j as i32 + 1))
}

/// `1 - exp(-lambda(j, d, a))`.
pub fn predicted_i_limit(j: usize, d: usize, a: f64) -> Result<f64> {
    Ok(-(-lambda(j, d, a)?).exp_m1())
}

/// A positive rational `num / den`, kept in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rational {
    pub num: u64,
    pub den: u64,
}

impl Rational {
    pub fn new(num: u64, den: u64) -> Rational {
        let g = gcd(num, den).max(1);
        Rational {
            num: num / g,
            den: den / g,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Density scaling `p(n) = a * n^-(d/(j+1) + j)` at which `P(I_2j)` has a
/// non-degenerate limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalScaling {
    pub j: usize,
    pub d: usize,
    pub a: f64,
}

impl CriticalScaling {
    pub fn new(j: usize, d: usize, a: f64) -> Result<CriticalScaling> {
        check_scaling(j, d, a)?;
        Ok(CriticalScaling { j, d, a })
    }

    /// `d/(j+1) + j` exactly.
    pub fn exponent(&self) -> Rational {
        let den = self.j as u64 + 1;
        Rational::new(self.d as u64 + self.j as u64 * den, den)
    }

    pub fn p(&self, n: u32) -> Result<f64> {
        let p = self.a * (n as f64).powf(-self.exponent().to_f64());
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::Domain(format!(
                "p = {p} outside (0, 1] for a={}, n={n}",
                self.a
            )));
        }
        Ok(p)
    }

    pub fn lambda(&self) -> f64 {
        lambda(self.j, self.d, self.a).expect("validated on construction")
    }

    pub fn prediction(&self) -> PoissonPrediction {
        PoissonPrediction::new(self.lambda())
    }
}

pub fn critical_p(j: usize, d: usize, a: f64, n: u32) -> Result<f64> {
    CriticalScaling::new(j, d, a)?.p(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonPrediction {
    pub lambda: f64,
    pub limit_prob: f64,
}

impl PoissonPrediction {
    pub fn new(lambda: f64) -> PoissonPrediction {
        PoissonPrediction {
            lambda,
            limit_prob: -(-lambda).exp_m1(),
        }
    }
}

/// Leading-order probability that a fixed `2i`-dimensional subtorus is
/// internally spanned: `(2i)! 2^-(i+1) n^(i(i+3)) p^(i+1)`.
pub fn m2i_leading(n: u32, p: f64, i: usize) -> f64 {
    if p == 0.0 {
        return 0.0;
    }
    let i_f = i as f64;
    let log = ln_factorial(2 * i as u64) - (i_f + 1.0) * std::f64::consts::LN_2
        + i_f * (i_f + 3.0) * (n as f64).ln()
        + (i_f + 1.0) * p.ln();
    log.exp()
}

/// Exponent pair `(n_exp, p_exp)` of the odd-dimension bound
/// `M_(2i+1) = O(n^((i+1)(i+4)-2) p^(i+2))`. No constant is known.
pub fn m_odd_bound_exponents(i: usize) -> (usize, usize) {
    ((i + 1) * (i + 4) - 2, i + 2)
}

/// `P(Bin(n, p) >= 2)`: a fixed line is internally spanned.
pub fn line_span_prob(n: u32, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return if n >= 2 { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    let log_q = (-p).ln_1p();
    let none = (nf * log_q).exp();
    let one = nf * p * ((nf - 1.0) * log_q).exp();
    (1.0 - none - one).max(0.0)
}

/// Exact probability that a fixed plane (`n x n`) is internally spanned: at
/// least two seeds, not all on one line.
///
/// `sum_(k>=2) P(Bin(n^2, p) = k) (1 - 2n C(n,k) / C(n^2,k))`.
pub fn plane_span_prob(n: u32, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let nf = n as f64;
    let cells = nf * nf;
    let ln_choose = |m: f64, k: f64| ln_gamma(m + 1.0) - ln_gamma(k + 1.0) - ln_gamma(m - k + 1.0);
    let (ln_p, ln_q) = (p.ln(), (-p).ln_1p());
    let mean = cells * p;
    let last = (mean + 40.0 * mean.sqrt() + 40.0).min(cells) as u64;
    let mut total = 0.0;
    for k in 2..=last {
        let kf = k as f64;
        let pmf = (ln_choose(cells, kf) + kf * ln_p + (cells - kf) * ln_q).exp();
        let collinear = if kf <= nf {
            (2.0 * nf).ln() + ln_choose(nf, kf) - ln_choose(cells, kf)
        } else {
            f64::NEG_INFINITY
        };
        total += pmf * -collinear.exp_m1();
    }
    total.min(1.0)
}

/// Non-collinear vertex pairs in an `n x n` plane: `C(n^2,2) - 2n C(n,2)`.
pub fn perfect_count_plane(n: u32) -> u128 {
    let n = n as u128;
    let pairs = n * n * (n * n - 1) / 2;
    pairs - 2 * n * (n * (n - 1) / 2)
}

/// Lower bound `(2i)! 2^-(i+1) n^(i(i+3)) (1 - 2^i/n)` on the number of
/// perfect collections in a `2i`-torus. May be non-positive for small `n`.
pub fn perfect_lower_bound(n: u32, i: usize) -> f64 {
    let i_f = i as f64;
    let lead = ln_factorial(2 * i as u64) - (i_f + 1.0) * std::f64::consts::LN_2
        + i_f * (i_f + 3.0) * (n as f64).ln();
    lead.exp() * (1.0 - 2f64.powi(i as i32) / n as f64)
}

/// Counts unordered `(i+1)`-subsets of the `2i`-torus `[0,n)^(2i)` that admit a
/// perfect ordering `v_1, ..., v_(i+1)`: the points span the whole torus,
/// `dis(v_a, v_b) = 2(b-1)` for every `a < b`, and `v_1 < v_2` lexicographically.
///
/// Enumerates ordered sequences depth-first, pruning on the distance rule, and
/// counts each set once through its lexicographically least perfect ordering.
pub fn perfect_bruteforce(n: u32, i: usize, budget: u128) -> Result<u128> {
    if i == 0 {
        return Err(Error::Domain("perfect collections need i >= 1".into()));
    }
    let dims = Dimensions::new(2 * i, n)?;
    let size = dims.pow_checked(2 * i).unwrap_or(u128::MAX);
    let needed = crate::torus::binomial_u128(size.min(u64::MAX as u128) as u64, i as u64 + 1);
    if needed > budget || size > usize::MAX as u128 {
        return Err(Error::BudgetExceeded {
            what: "perfect-collection enumeration",
            needed,
            budget,
        });
    }
    let all: Vec<Vertex> = dims.whole().vertices(size)?.collect();
    let mut seq: Vec<usize> = Vec::with_capacity(i + 1);
    let mut count = 0u128;
    extend_perfect(dims, &all, i, &mut seq, &mut count);
    Ok(count)
}

fn extend_perfect(
    dims: Dimensions,
    all: &[Vertex],
    i: usize,
    seq: &mut Vec<usize>,
    count: &mut u128,
) {
    let k = seq.len();
    if k == i + 1 {
        let pts: Vec<Vertex> = seq.iter().map(|&s| all[s].clone()).collect();
        if is_canonical_perfect(&pts) && spans_whole(dims, &pts) {
            *count += 1;
        }
        return;
    }
    let required = 2 * k;
    for (idx, v) in all.iter().enumerate() {
        if k == 1 && idx <= seq[0] {
            continue;
        }
        if seq
            .iter()
            .all(|&s| vertex_distance(&all[s], v).expect("same arity") == required)
        {
            seq.push(idx);
            extend_perfect(dims, all, i, seq, count);
            seq.pop();
        }
    }
}

fn is_perfect_order(pts: &[&Vertex]) -> bool {
    if pts.len() >= 2 && pts[0] >= pts[1] {
        return false;
    }
    (0..pts.len())
        .all(|b| (0..b).all(|a| vertex_distance(pts[a], pts[b]).expect("same arity") == 2 * b))
}

/// True when `pts` is perfect and no lexicographically smaller reordering is.
fn is_canonical_perfect(pts: &[Vertex]) -> bool {
    let refs: Vec<&Vertex> = pts.iter().collect();
    if !is_perfect_order(&refs) {
        return false;
    }
    let mut perm: Vec<usize> = (0..pts.len()).collect();
    while next_permutation(&mut perm) {
        let candidate: Vec<&Vertex> = perm.iter().map(|&p| &pts[p]).collect();
        if is_perfect_order(&candidate) && candidate < refs {
            return false;
        }
    }
    true
}

fn next_permutation(perm: &mut [usize]) -> bool {
    let Some(i) = (1..perm.len()).rev().find(|&i| perm[i - 1] < perm[i]) else {
        return false;
    };
    let j = (i..perm.len())
        .rev()
        .find(|&j| perm[j] > perm[i - 1])
        .expect("exists");
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

fn spans_whole(dims: Dimensions, pts: &[Vertex]) -> bool {
    let s = SeedSet::new(dims, pts.iter().cloned()).expect("valid vertices");
    span::closure_with(&s, MergeOrder::Sorted, usize::MAX)
        .map(|c| c.tori() == [dims.whole()])
        .unwrap_or(false)
}

/// Exponent table entry for the probability that a `t`-torus is internally
/// spanned given an `r`-subtorus inside it is already open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExponentEntry {
    pub t: usize,
    pub r: usize,
    /// Extra power of `n`.
    pub big_e: usize,
    /// Extra power of `p`.
    pub small_e: usize,
}

/// `x mod 2`.
pub fn sigma(x: usize) -> usize {
    x % 2
}

/// With `i = ceil(t/2)` and `l = ceil(r/2)` the bound is
/// `O(n^(i^2 - l^2 + E) p^(i - l + e))`.
pub fn exponent_table(t: usize, r: usize) -> Result<ExponentEntry> {
    if r >= t {
        return Err(Error::Domain(format!("need r < t, got t={t}, r={r}")));
    }
    let i = t.div_ceil(2);
    let l = r.div_ceil(2);
    let (big_e, small_e) = match (sigma(t), sigma(r)) {
        (0, 0) => (i - l, 0),
        (1, 0) => (i - l - 1, 0),
        (0, 1) => (2 * i, 1),
        _ => (0, 0),
    };
    Ok(ExponentEntry {
        t,
        r,
        big_e,
        small_e,
    })
}

/// Poisson probability mass, evaluated in log space.
pub fn poisson_pmf(lambda: f64, k: u64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * lambda.ln() - lambda - ln_factorial(k)).exp()
}

const NORMALIZATION_TOL: f64 = 1e-9;

/// Total variation distance `1/2 * sum |P(k) - Q(k)|` between two
/// distributions on `0, 1, 2, ...` given as probability vectors.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    for (name, dist) in [("first", p), ("second", q)] {
        if dist.iter().any(|&x| x.is_nan() || x < 0.0) {
            return Err(Error::Domain(format!(
                "{name} distribution has a negative or NaN entry"
            )));
        }
        let total: f64 = dist.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Domain(format!(
                "{name} distribution sums to {total}, not 1"
            )));
        }
    }
    let len = p.len().max(q.len());
    let at = |d: &[f64], k: usize| d.get(k).copied().unwrap_or(0.0);
    let sum: f64 = (0..len).map(|k| (at(p, k) - at(q, k)).abs()).sum();
    Ok((0.5 * sum).clamp(0.0, 1.0))
}

/// Poisson(`lambda`) on `0..=last`, with the upper tail folded into `last`.
pub fn poisson_truncated(lambda: f64, last: usize) -> Vec<f64> {
    let mut out: Vec<f64> = (0..last as u64).map(|k| poisson_pmf(lambda, k)).collect();
    let head: f64 = out.iter().sum();
    out.push((1.0 - head).max(0.0));
    out
}

/// Empirical distribution of `counts` against Poisson(`lambda`), both on
/// `0..=max_observed + 10` with the Poisson tail folded into the last bin.
pub fn tv_empirical_vs_poisson(counts: &[u64], lambda: f64) -> Result<f64> {
    let (empirical, poisson) = empirical_and_poisson(counts, lambda)?;
    tv_distance(&empirical, &poisson)
}

/// Delta-method standard error of [`tv_empirical_vs_poisson`]:
/// `sqrt((sum s_k^2 f_k - (sum s_k f_k)^2) / N) / 2` with `s_k = sign(f_k - q_k)`.
pub fn tv_empirical_se(counts: &[u64], lambda: f64) -> Result<f64> {
    let (empirical, poisson) = empirical_and_poisson(counts, lambda)?;
    let sign = |k: usize| match empirical[k].partial_cmp(&poisson[k]) {
        Some(std::cmp::Ordering::Greater) => 1.0,
        Some(std::cmp::Ordering::Less) => -1.0,
        _ => 0.0,
    };
    let (mut m1, mut m2) = (0.0, 0.0);
    for (k, &f) in empirical.iter().enumerate() {
        let s = sign(k);
        m1 += s * f;
        m2 += s * s * f;
    }
    Ok(0.5 * ((m2 - m1 * m1).max(0.0) / counts.len() as f64).sqrt())
}

fn empirical_and_poisson(counts: &[u64], lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if counts.is_empty() {
        return Err(Error::Domain("no observations".into()));
    }
    let last = *counts.iter().max().expect("non-empty") as usize + 10;
    let mut empirical = vec![0.0; last + 1];
    for &c in counts {
        empirical[c as usize] += 1.0;
    }
    let total = counts.len() as f64;
    empirical.iter_mut().for_each(|x| *x /= total);
    Ok((empirical, poisson_truncated(lambda, last)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn j_of_examples() {
        assert_eq!(j_of(3).unwrap(), 1);
        assert_eq!(j_of(6).unwrap(), 1);
        assert_eq!(j_of(7).unwrap(), 2);
        assert_eq!(j_of(12).unwrap(), 2);
        assert_eq!(j_of(13).unwrap(), 3);
        assert!(j_of(2).is_err());
    }

    #[test]
    fn j_of_matches_definition() {
        for d in 3..200usize {
            let brute = (1..d).filter(|j| j * (j + 1) < d).max().unwrap();
            assert_eq!(j_of(d).unwrap(), brute, "d={d}");
        }
    }

    #[test]
    fn lambda_examples() {
        assert!(close(lambda(1, 3, 1.0).unwrap(), 1.5, 1e-12));
        assert!(close(lambda(1, 6, 1.0).unwrap(), 7.5, 1e-12));
        assert!(close(lambda(2, 7, 1.0).unwrap(), 105.0, 1e-9));
        assert!(close(lambda(1, 6, 0.5).unwrap(), 1.875, 1e-12));
        assert!(lambda(0, 3, 1.0).is_err());
        assert!(lambda(2, 3, 1.0).is_err());
        assert!(lambda(1, 3, 0.0).is_err());
    }

    #[test]
    fn critical_p_examples() {
        assert_eq!(
            CriticalScaling::new(1, 3, 1.0).unwrap().exponent(),
            Rational::new(5, 2)
        );
        assert_eq!(
            CriticalScaling::new(1, 6, 1.0).unwrap().exponent(),
            Rational { num: 4, den: 1 }
        );
        assert!(close(critical_p(1, 3, 1.0, 100).unwrap(), 1e-5, 1e-18));
        assert!(critical_p(1, 3, 1e6, 2).is_err());
    }

    #[test]
    fn predicted_limit_examples() {
        assert!(close(predicted_i_limit(1, 3, 1.0).unwrap(), 0.776870, 1e-6));
        assert!(close(predicted_i_limit(1, 6, 0.5).unwrap(), 0.846645, 1e-6));
        assert!(predicted_i_limit(1, 3, 1e-9).unwrap() < 1e-15);
    }

    #[test]
    fn m2i_examples() {
        let (n, p) = (37u32, 1e-4);
        assert!(close(
            m2i_leading(n, p, 1),
            (n as f64).powi(4) * p * p / 2.0,
            1e-15
        ));
        assert_eq!(m2i_leading(10, 0.0, 1), 0.0);
        assert!(close(m2i_leading(10, 1e-4, 2), 0.03, 1e-12));
        assert_eq!(m_odd_bound_exponents(1), (8, 3));
    }

    #[test]
    fn line_span_examples() {
        assert_eq!(line_span_prob(10, 0.0), 0.0);
        assert_eq!(line_span_prob(10, 1.0), 1.0);
        for p in [0.1, 0.37, 0.9] {
            assert!(close(line_span_prob(2, p), p * p, 1e-12));
        }
        assert!(close(line_span_prob(3, 0.5), 0.5, 1e-12));
    }

    /// Non-collinear pairs of an n x n plane by direct enumeration.
    fn plane_pairs_brute(n: u32) -> u128 {
        let pts: Vec<(u32, u32)> = (0..n).flat_map(|x| (0..n).map(move |y| (x, y))).collect();
        let mut c = 0;
        for a in 0..pts.len() {
            for b in a + 1..pts.len() {
                if pts[a].0 != pts[b].0 && pts[a].1 != pts[b].1 {
                    c += 1;
                }
            }
        }
        c
    }

    #[test]
    fn perfect_plane_count() {
        assert_eq!(perfect_count_plane(3), 18);
        assert_eq!(perfect_count_plane(2), 2);
        for n in 2..=8 {
            assert_eq!(perfect_count_plane(n), plane_pairs_brute(n));
            let all = (n * n) as u128 * (n * n - 1) as u128 / 2;
            assert!(perfect_count_plane(n) < all);
        }
    }

    #[test]
    fn perfect_bruteforce_planes() {
        for n in 2..=5 {
            assert_eq!(
                perfect_bruteforce(n, 1, 1 << 40).unwrap(),
                perfect_count_plane(n)
            );
        }
        assert!(perfect_bruteforce(5, 1, 10).unwrap_err().is_budget());
    }

    #[test]
    fn perfect_bruteforce_four_torus_small() {
        // three points: v1, v2 at distance 2, v3 at distance 4 from both
        // gives n^4 * C(4,2)(n-1)^2/2 * (n-2)^2 (n-1)^2
        for n in [2u32, 3, 4] {
            let n128 = n as u128;
            let expected = n128.pow(4) * 3 * (n128 - 1).pow(4) * (n128 - 2).pow(2);
            assert_eq!(perfect_bruteforce(n, 2, 1 << 40).unwrap(), expected);
        }
    }

    #[test]
    fn lower_bound_vacuous_when_small() {
        assert!(perfect_lower_bound(2, 1) <= 0.0);
        assert!(perfect_lower_bound(4, 2) <= 0.0);
        assert!(close(perfect_lower_bound(5, 2), 5_859_375.0, 1e-3));
    }

    #[test]
    fn exponent_table_examples() {
        assert_eq!(
            exponent_table(4, 2).unwrap(),
            ExponentEntry {
                t: 4,
                r: 2,
                big_e: 1,
                small_e: 0
            }
        );
        assert_eq!(
            exponent_table(4, 1).unwrap(),
            ExponentEntry {
                t: 4,
                r: 1,
                big_e: 4,
                small_e: 1
            }
        );
        assert_eq!(
            exponent_table(3, 1).unwrap(),
            ExponentEntry {
                t: 3,
                r: 1,
                big_e: 0,
                small_e: 0
            }
        );
        // t = 2i-1 = 3, r = 2l = 0: i=2, l=0
        assert_eq!(exponent_table(3, 0).unwrap().big_e, 1);
        assert!(exponent_table(2, 2).is_err());
    }

    #[test]
    fn exponent_table_total_and_consistent_with_sigma() {
        for t in 1..40 {
            for r in 0..t {
                let e = exponent_table(t, r).unwrap();
                assert_eq!(
                    e.small_e == 1,
                    sigma(t) == 0 && sigma(r) == 1,
                    "t={t} r={r}"
                );
            }
        }
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma(4), 0);
        assert_eq!(sigma(5), 1);
        assert_eq!(sigma(0), 0);
    }

    #[test]
    fn poisson_and_tv_examples() {
        assert!(close(poisson_pmf(1.5, 0), (-1.5f64).exp(), 1e-15));
        assert!(close(poisson_pmf(1.5, 0), 0.22313, 1e-5));
        let q = poisson_truncated(2.0, 30);
        assert!(close(q.iter().sum::<f64>(), 1.0, 1e-12));
        assert_eq!(tv_distance(&q, &q).unwrap(), 0.0);

        let lam: f64 = 1.5;
        let point_mass = [1.0];
        let tv = tv_distance(&point_mass, &poisson_truncated(lam, 40)).unwrap();
        assert!(close(tv, 1.0 - (-lam).exp(), 1e-12));

        assert!(tv_distance(&[0.5, 0.4], &[1.0]).is_err());
        assert!(tv_distance(&[1.5, -0.5], &[1.0]).is_err());
    }

    #[test]
    fn tv_empirical_all_zero_counts() {
        let tv = tv_empirical_vs_poisson(&[0, 0, 0, 0], 1.5).unwrap();
        assert!(close(tv, 1.0 - (-1.5f64).exp(), 1e-12));
    }

    #[test]
    fn tv_se_vanishes_for_degenerate_sample() {
        let se = tv_empirical_se(&[0, 0, 1, 1], 5.0).unwrap();
        assert!((0.0..0.5).contains(&se));
        let same = vec![0u64; 100];
        assert_eq!(tv_empirical_se(&same, 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn plane_span_prob_matches_enumeration() {
        // n = 2: four cells, every pair except the two diagonals is collinear
        let p: f64 = 0.3;
        let q = 1.0 - p;
        let expected = 2.0 * p * p * q * q + 4.0 * p.powi(3) * q + p.powi(4);
        assert!(close(plane_span_prob(2, p), expected, 1e-12));
        assert_eq!(plane_span_prob(5, 0.0), 0.0);
        assert_eq!(plane_span_prob(5, 1.0), 1.0);
    }

    #[test]
    fn plane_span_prob_below_leading_term_at_moderate_n() {
        let n = 50u32;
        let p = (n as f64).powf(-2.5);
        let exact = plane_span_prob(n, p);
        assert!(close(exact, 0.0087617, 1e-6), "{exact}");
        assert!(exact < 0.9 * m2i_leading(n, p, 1));
    }
}
