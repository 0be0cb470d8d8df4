//! Self-checks of the closure against the dense engine, plus perfect-collection counts.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ca::{self, Configuration, Threshold, DEFAULT_VISIT_BUDGET};
use crate::error::Result;
use crate::montecarlo::trial_rng;
use crate::span::{self, CountMode, MergeOrder, SeedSet, DEFAULT_FAMILY_CAP, DEFAULT_MERGE_BUDGET};
use crate::theory;
use crate::torus::{Dimensions, Subtorus, Vertex};

/// Cases for [`verify_oracle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSuite {
    /// Every pair of distinct seeds at d=3, n=3.
    pub exhaustive_pairs: bool,
    /// `(d, n)` shapes for randomized cases.
    pub sizes: Vec<(usize, u32)>,
    pub random_cases: usize,
    /// Random cases draw between 1 and this many seeds.
    pub max_seeds: usize,
    pub master_seed: u64,
}

impl OracleSuite {
    pub fn standard(master_seed: u64) -> OracleSuite {
        OracleSuite {
            exhaustive_pairs: true,
            sizes: vec![(3, 3), (3, 4), (3, 5), (4, 3), (4, 4), (4, 5)],
            random_cases: 1000,
            max_seeds: 8,
            master_seed,
        }
    }

    pub fn empty() -> OracleSuite {
        OracleSuite {
            exhaustive_pairs: false,
            sizes: Vec::new(),
            random_cases: 0,
            max_seeds: 0,
            master_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub dims: Dimensions,
    /// A minimal seed list still showing the disagreement.
    pub seeds: Vec<Vertex>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleReport {
    pub cases: usize,
    pub mismatches: Vec<Mismatch>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn closure_matches_dense(dims: Dimensions, seeds: &[Vertex]) -> Result<bool> {
    let s = SeedSet::new(dims, seeds.iter().cloned())?;
    let fast = span::closure(&s)?.to_configuration(DEFAULT_VISIT_BUDGET)?;
    let dense = ca::span_dense(dims, s.points(), Threshold::TWO, DEFAULT_VISIT_BUDGET)?;
    Ok(fast == dense)
}

/// Greedily drops seeds while the disagreement persists.
fn shrink(dims: Dimensions, mut seeds: Vec<Vertex>) -> Result<Vec<Vertex>> {
    let mut i = 0;
    while i < seeds.len() {
        let mut fewer = seeds.clone();
        fewer.remove(i);
        if !closure_matches_dense(dims, &fewer)? {
            seeds = fewer;
        } else {
            i += 1;
        }
    }
    Ok(seeds)
}

fn random_vertex(dims: Dimensions, rng: &mut impl Rng) -> Vertex {
    let coords: Vec<u32> = (0..dims.d())
        .map(|_| rng.random_range(0..dims.n()))
        .collect();
    dims.vertex(coords).expect("in range")
}

/// Compares the union of the subtorus closure with the dense threshold-2
/// evolution on every case of `suite`.
pub fn verify_oracle(suite: &OracleSuite) -> Result<OracleReport> {
    let mut cases = 0;
    let mut mismatches = Vec::new();
    let mut check = |dims: Dimensions, seeds: Vec<Vertex>| -> Result<()> {
        cases += 1;
        if !closure_matches_dense(dims, &seeds)? {
            mismatches.push(Mismatch {
                dims,
                seeds: shrink(dims, seeds)?,
            });
        }
        Ok(())
    };

    if suite.exhaustive_pairs {
        let dims = Dimensions::new(3, 3)?;
        let all: Vec<Vertex> = dims.whole().vertices(27)?.collect();
        for a in 0..all.len() {
            for b in a + 1..all.len() {
                check(dims, vec![all[a].clone(), all[b].clone()])?;
            }
        }
    }
    if !suite.sizes.is_empty() && suite.max_seeds > 0 {
        let mut rng = trial_rng(suite.master_seed, 0);
        for _ in 0..suite.random_cases {
            let &(d, n) = suite.sizes.choose(&mut rng).expect("non-empty");
            let dims = Dimensions::new(d, n)?;
            let k = rng.random_range(1..=suite.max_seeds);
            let seeds = (0..k).map(|_| random_vertex(dims, &mut rng)).collect();
            check(dims, seeds)?;
        }
    }
    Ok(OracleReport { cases, mismatches })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub cases: usize,
    /// Human-readable reproducers, capped at a few per check.
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub checks: Vec<PropertyCheck>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.failures.is_empty())
    }
}

struct Tally {
    check: PropertyCheck,
}

impl Tally {
    fn new(name: &str) -> Tally {
        Tally {
            check: PropertyCheck {
                name: name.into(),
                cases: 0,
                failures: Vec::new(),
            },
        }
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.check.cases += 1;
        if !ok && self.check.failures.len() < 5 {
            self.check.failures.push(what());
        }
    }
}

fn random_subtorus(dims: Dimensions, rng: &mut impl Rng) -> Subtorus {
    let mut fixed = Vec::new();
    for i in 0..dims.d() {
        if rng.random_bool(0.5) {
            fixed.push((i, rng.random_range(0..dims.n())));
        }
    }
    dims.subtorus(&fixed).expect("in range")
}

fn fmt_seeds(seeds: &[Vertex]) -> String {
    seeds
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn dense_of(tori: &[&Subtorus]) -> Result<Configuration> {
    let dims = tori[0].dims();
    let mut c = Configuration::empty(dims, DEFAULT_VISIT_BUDGET)?;
    for t in tori {
        for v in t.vertices(DEFAULT_VISIT_BUDGET as u128)? {
            c.insert(&v)?;
        }
    }
    Ok(c)
}

/// Randomized structural checks of the closure on small tori.
pub fn verify_properties(cases: usize, master_seed: u64) -> Result<PropertyReport> {
    let sizes = [(2usize, 3u32), (2, 4), (3, 3), (3, 4), (4, 3)];
    let mut rng = trial_rng(master_seed, 1);

    let mut confluence = Tally::new("closure is independent of merge order");
    let mut idempotence = Tally::new("closure of its own output is unchanged");
    let mut separation = Tally::new("maximal tori pairwise at distance > 2, none nested");
    let mut maximal_spanned = Tally::new("every maximal torus is internally spanned");
    let mut monotone = Tally::new("closure is monotone in the seed set");
    let mut exact_ge_maximal = Tally::new("exact count >= maximal count");
    let mut pair_merge = Tally::new("two subtori within distance 2 fill their enclosing subtorus");
    let mut stable = Tally::new("an open subtorus alone does not grow");
    let mut completeness = Tally::new("exact count equals brute force over all subtori");
    let mut open_event = Tally::new("C_i from closure equals brute force over all subtori");

    for _ in 0..cases {
        let &(d, n) = sizes.choose(&mut rng).expect("non-empty");
        let dims = Dimensions::new(d, n)?;
        let k = rng.random_range(1..=6);
        let pts: Vec<Vertex> = (0..k).map(|_| random_vertex(dims, &mut rng)).collect();
        let s = SeedSet::new(dims, pts.clone())?;
        let base = span::closure(&s)?;
        let repro = || format!("{dims} seeds {}", fmt_seeds(&pts));

        let orders = [
            MergeOrder::Reversed,
            MergeOrder::Shuffled(rng.random()),
            MergeOrder::Shuffled(rng.random()),
        ];
        let all_same = orders
            .iter()
            .map(|&o| span::closure_with(&s, o, DEFAULT_MERGE_BUDGET))
            .collect::<Result<Vec<_>>>()?
            .iter()
            .all(|c| *c == base);
        confluence.record(all_same, repro);

        let again =
            span::closure(&SeedSet::empty(dims).with_pre_open(base.tori().iter().cloned())?)?;
        idempotence.record(again == base, repro);

        let tori = base.tori();
        let separated = tori.iter().enumerate().all(|(a, x)| {
            tori.iter().skip(a + 1).all(|y| {
                x.distance_unchecked(y) > 2 && !x.contains_unchecked(y) && !y.contains_unchecked(x)
            })
        });
        separation.record(separated, repro);

        maximal_spanned.record(
            tori.iter().all(|t| span::is_internally_spanned(t, &s)),
            repro,
        );

        let extra: Vec<Vertex> = (0..rng.random_range(1..=3))
            .map(|_| random_vertex(dims, &mut rng))
            .collect();
        let bigger = span::closure(&SeedSet::new(dims, pts.iter().chain(&extra).cloned())?)?;
        let contained = tori
            .iter()
            .all(|t| bigger.tori().iter().any(|b| b.contains_unchecked(t)));
        monotone.record(contained, repro);

        let exact = span::spanned_profile(&s, &base, CountMode::Exact, DEFAULT_FAMILY_CAP);
        let maximal = span::spanned_profile(&s, &base, CountMode::Maximal, 0);
        exact_ge_maximal.record((0..=d).all(|i| exact.count(i) >= maximal.count(i)), repro);

        let v = random_subtorus(dims, &mut rng);
        let w = random_subtorus(dims, &mut rng);
        if v.distance_unchecked(&w) <= 2 {
            let (fin, _) = ca::evolve_incremental(
                &dense_of(&[&v, &w])?,
                Threshold::TWO,
                DEFAULT_VISIT_BUDGET,
            )?;
            let target = v.enclosing_unchecked(&w);
            pair_merge.record(fin.equals_subtorus(&target)?, || {
                format!("{dims} {v} + {w}")
            });
        }
        let (fin, _) =
            ca::evolve_incremental(&dense_of(&[&v])?, Threshold::TWO, DEFAULT_VISIT_BUDGET)?;
        stable.record(fin.equals_subtorus(&v)?, || format!("{dims} {v}"));

        let dense = ca::span_dense(dims, s.points(), Threshold::TWO, DEFAULT_VISIT_BUDGET)?;
        let mut counts_ok = true;
        let mut open_ok = true;
        for i in 0..=d {
            let mut brute_count = 0;
            let mut brute_open = false;
            for sub in dims.subtori_of_dim(i, u128::MAX)? {
                if dense.fully_open(&sub)? {
                    brute_open = true;
                    if ca::internally_spanned_dense(
                        &sub,
                        s.points(),
                        Threshold::TWO,
                        DEFAULT_VISIT_BUDGET,
                    )? {
                        brute_count += 1;
                    }
                }
            }
            counts_ok &= exact.count(i) == brute_count;
            open_ok &= span::event_c(&s, i)? == brute_open;
        }
        completeness.record(counts_ok, repro);
        open_event.record(open_ok, repro);
    }

    Ok(PropertyReport {
        checks: [
            confluence,
            idempotence,
            separation,
            maximal_spanned,
            monotone,
            exact_ge_maximal,
            pair_merge,
            stable,
            completeness,
            open_event,
        ]
        .into_iter()
        .map(|t| t.check)
        .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfectCase {
    pub n: u32,
    pub i: usize,
    pub count: u128,
    /// `C(n^2,2) - 2n C(n,2)`, for `i = 1` only.
    pub closed_form: Option<u128>,
    pub lower_bound: f64,
}

impl PerfectCase {
    pub fn matches_closed_form(&self) -> bool {
        self.closed_form.is_none_or(|c| c == self.count)
    }

    pub fn meets_lower_bound(&self) -> bool {
        self.count as f64 >= self.lower_bound
    }

    pub fn passed(&self) -> bool {
        self.matches_closed_form() && self.meets_lower_bound()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfectReport {
    pub cases: Vec<PerfectCase>,
}

impl PerfectReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(PerfectCase::passed)
    }
}

/// Brute-force perfect-collection counts for each `(n, i)` in `cases`.
pub fn verify_perfect(cases: &[(u32, usize)], budget: u128) -> Result<PerfectReport> {
    let mut out = Vec::with_capacity(cases.len());
    for &(n, i) in cases {
        out.push(PerfectCase {
            n,
            i,
            count: theory::perfect_bruteforce(n, i, budget)?,
            closed_form: (i == 1).then(|| theory::perfect_count_plane(n)),
            lower_bound: theory::perfect_lower_bound(n, i),
        });
    }
    Ok(PerfectReport { cases: out })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_suite_gives_empty_report() {
        let r = verify_oracle(&OracleSuite::empty()).unwrap();
        assert_eq!(r.cases, 0);
        assert!(r.passed());
    }

    #[test]
    fn small_property_run_passes() {
        let r = verify_properties(40, 3).unwrap();
        for c in &r.checks {
            assert!(c.failures.is_empty(), "{}: {:?}", c.name, c.failures);
        }
    }

    #[test]
    fn shrink_keeps_failing_core() {
        // every subset agrees, so shrinking a passing list removes nothing it shouldn't
        let dims = Dimensions::new(3, 3).unwrap();
        let seeds = vec![dims.vertex(vec![0, 0, 0]).unwrap()];
        assert!(closure_matches_dense(dims, &seeds).unwrap());
    }
}
