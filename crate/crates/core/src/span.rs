//! Exact threshold-2 closure by subtorus merging.
//!
//! At threshold 2 the final open set is always a union of subtori that are
//! pairwise more than distance 2 apart, and two open subtori within distance 2
//! of each other fill exactly their enclosing subtorus. The closure therefore
//! only ever manipulates subtori and never touches the `n^d` grid.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{Dimensions, Subtorus, Vertex};

/// Maximum number of initial tori accepted by [`closure`].
pub const DEFAULT_MERGE_BUDGET: usize = 1_000_000;
/// Default member cap for [`generated_family`].
pub const DEFAULT_FAMILY_CAP: usize = 1_000_000;

/// Initially open vertices, plus optional subtori that start fully open.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedSet {
    dims: Dimensions,
    points: Vec<Vertex>,
    pre_open: Vec<Subtorus>,
}

impl SeedSet {
    pub fn new(dims: Dimensions, points: impl IntoIterator<Item = Vertex>) -> Result<SeedSet> {
        let mut pts = Vec::new();
        for p in points {
            pts.push(dims.vertex(p.coords().to_vec())?);
        }
        pts.sort();
        pts.dedup();
        Ok(SeedSet {
            dims,
            points: pts,
            pre_open: Vec::new(),
        })
    }

    pub fn empty(dims: Dimensions) -> SeedSet {
        SeedSet {
            dims,
            points: Vec::new(),
            pre_open: Vec::new(),
        }
    }

    /// Adds subtori that are open from the start.
    pub fn with_pre_open(mut self, tori: impl IntoIterator<Item = Subtorus>) -> Result<SeedSet> {
        for t in tori {
            self.dims.check_same(&t.dims())?;
            self.pre_open.push(t);
        }
        self.pre_open.sort();
        self.pre_open.dedup();
        Ok(self)
    }

    pub fn dims(&self) -> Dimensions {
        self.dims
    }

    pub fn points(&self) -> &[Vertex] {
        &self.points
    }

    pub fn pre_open(&self) -> &[Subtorus] {
        &self.pre_open
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty() && self.pre_open.is_empty()
    }

    fn initial_tori(&self) -> Vec<Subtorus> {
        let mut tori: Vec<Subtorus> = self
            .points
            .iter()
            .map(|p| Subtorus::point(self.dims, p).expect("validated on construction"))
            .chain(self.pre_open.iter().cloned())
            .collect();
        tori.sort();
        tori.dedup();
        tori
    }

    /// Seeds and pre-open tori lying inside `v`.
    fn restricted_to(&self, v: &Subtorus) -> Vec<Subtorus> {
        self.points
            .iter()
            .filter(|p| v.point_distance_unchecked(p) == 0)
            .map(|p| Subtorus::point(self.dims, p).expect("validated on construction"))
            .chain(
                self.pre_open
                    .iter()
                    .filter(|t| v.contains_unchecked(t))
                    .cloned(),
            )
            .collect()
    }
}

/// The final open set as its maximal subtori, which are pairwise more than
/// distance 2 apart.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MaximalDecomposition {
    dims: Dimensions,
    tori: Vec<Subtorus>,
}

impl MaximalDecomposition {
    pub fn dims(&self) -> Dimensions {
        self.dims
    }

    /// Members in canonical order.
    pub fn tori(&self) -> &[Subtorus] {
        &self.tori
    }

    pub fn is_empty(&self) -> bool {
        self.tori.is_empty()
    }

    /// Largest member dimension, or `None` when nothing is open.
    pub fn max_dim(&self) -> Option<usize> {
        self.tori.iter().map(Subtorus::dim).max()
    }

    pub fn count_dim(&self, dim: usize) -> usize {
        self.tori.iter().filter(|t| t.dim() == dim).count()
    }

    pub fn covers(&self, u: &Vertex) -> bool {
        self.tori.iter().any(|t| t.point_distance_unchecked(u) == 0)
    }

    /// Materializes the union as a dense configuration.
    pub fn to_configuration(&self, budget: u64) -> Result<crate::ca::Configuration> {
        let mut c = crate::ca::Configuration::empty(self.dims, budget)?;
        for t in &self.tori {
            for v in t.vertices(budget as u128)? {
                c.insert(&v)?;
            }
        }
        Ok(c)
    }
}

/// Order in which initial tori are fed to the merger. The result does not
/// depend on it; the variants exist to exercise that.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeOrder {
    Sorted,
    Reversed,
    Shuffled(u64),
}

fn merge_all(mut tori: Vec<Subtorus>, order: MergeOrder) -> Vec<Subtorus> {
    match order {
        MergeOrder::Sorted => {}
        MergeOrder::Reversed => tori.reverse(),
        MergeOrder::Shuffled(seed) => tori.shuffle(&mut ChaCha8Rng::seed_from_u64(seed)),
    }
    let mut active: Vec<Subtorus> = Vec::with_capacity(tori.len());
    for mut t in tori {
        while let Some(pos) = active.iter().position(|a| a.distance_unchecked(&t) <= 2) {
            let a = active.swap_remove(pos);
            t = a.enclosing_unchecked(&t);
        }
        active.push(t);
    }
    active.sort();
    active
}

/// Threshold-2 closure of `s` as its maximal subtori.
pub fn closure(s: &SeedSet) -> Result<MaximalDecomposition> {
    closure_with(s, MergeOrder::Sorted, DEFAULT_MERGE_BUDGET)
}

pub fn closure_with(s: &SeedSet, order: MergeOrder, budget: usize) -> Result<MaximalDecomposition> {
    let inputs = s.points.len() + s.pre_open.len();
    if inputs > budget {
        return Err(Error::BudgetExceeded {
            what: "closure inputs",
            needed: inputs as u128,
            budget: budget as u128,
        });
    }
    Ok(MaximalDecomposition {
        dims: s.dims,
        tori: merge_all(s.initial_tori(), order),
    })
}

/// Closure of `s` with `u` additionally open from the start.
pub fn conditional_closure(u: &Subtorus, s: &SeedSet) -> Result<MaximalDecomposition> {
    let conditioned = s.clone().with_pre_open([u.clone()])?;
    closure(&conditioned)
}

/// Every subtorus reachable from the seed tori by repeatedly enclosing two
/// members at distance at most 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedFamily {
    pub tori: Vec<Subtorus>,
    /// Set when saturation stopped at the member cap.
    pub truncated: bool,
}

pub fn generated_family(s: &SeedSet, cap: usize) -> GeneratedFamily {
    let mut members = s.initial_tori();
    if members.len() > cap {
        return GeneratedFamily {
            tori: members,
            truncated: true,
        };
    }
    let mut index: HashSet<Subtorus> = members.iter().cloned().collect();
    let mut truncated = false;
    let mut i = 0;
    'outer: while i < members.len() {
        for j in 0..i {
            if members[i].distance_unchecked(&members[j]) > 2 {
                continue;
            }
            let e = members[i].enclosing_unchecked(&members[j]);
            if !index.contains(&e) {
                index.insert(e.clone());
                members.push(e);
                if members.len() > cap {
                    truncated = true;
                    break 'outer;
                }
            }
        }
        i += 1;
    }
    members.sort();
    GeneratedFamily {
        tori: members,
        truncated,
    }
}

/// Whether `v` is the closure of the seeds (and pre-open tori) lying inside it.
pub fn is_internally_spanned(v: &Subtorus, s: &SeedSet) -> bool {
    if v.dims() != s.dims {
        return false;
    }
    let inside = s.restricted_to(v);
    if inside.is_empty() {
        return false;
    }
    let merged = merge_all(inside, MergeOrder::Sorted);
    merged.len() == 1 && merged[0] == *v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CountMode {
    /// Every internally spanned subtorus, found through the generated family.
    #[default]
    Exact,
    /// Only maximal subtori of the closure; a lower bound on `Exact`.
    Maximal,
}

/// Internally spanned subtori of `s`, per dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpannedProfile {
    /// `counts[i]` = number of internally spanned `i`-dimensional subtori.
    pub counts: Vec<u64>,
    pub truncated: bool,
}

impl SpannedProfile {
    pub fn count(&self, dim: usize) -> u64 {
        self.counts.get(dim).copied().unwrap_or(0)
    }
}

/// Counts internally spanned subtori by dimension.
///
/// In exact mode this tests every generated-family member; if the family was
/// truncated the counts are lower bounds and `truncated` is set. Maximal mode
/// counts the members of `decomposition`.
pub fn spanned_profile(
    s: &SeedSet,
    decomposition: &MaximalDecomposition,
    mode: CountMode,
    cap: usize,
) -> SpannedProfile {
    let d = s.dims.d();
    let mut counts = vec![0u64; d + 1];
    match mode {
        CountMode::Maximal => {
            for t in decomposition.tori() {
                counts[t.dim()] += 1;
            }
            SpannedProfile {
                counts,
                truncated: false,
            }
        }
        CountMode::Exact => {
            let family = generated_family(s, cap);
            for t in &family.tori {
                if is_internally_spanned(t, s) {
                    counts[t.dim()] += 1;
                }
            }
            SpannedProfile {
                counts,
                truncated: family.truncated,
            }
        }
    }
}

fn check_dim(s: &SeedSet, dim: usize) -> Result<()> {
    if dim > s.dims.d() {
        return Err(Error::Domain(format!(
            "dimension {dim} outside [0, {}]",
            s.dims.d()
        )));
    }
    Ok(())
}

/// Number of internally spanned subtori of dimension `dim`.
pub fn spanned_count(s: &SeedSet, dim: usize, mode: CountMode) -> Result<u64> {
    check_dim(s, dim)?;
    let decomposition = closure(s)?;
    let profile = spanned_profile(s, &decomposition, mode, DEFAULT_FAMILY_CAP);
    if profile.truncated {
        return Err(Error::Truncated {
            cap: DEFAULT_FAMILY_CAP,
        });
    }
    Ok(profile.count(dim))
}

/// Some `i`-dimensional subtorus is internally spanned.
pub fn event_i(s: &SeedSet, i: usize, mode: CountMode) -> Result<bool> {
    Ok(spanned_count(s, i, mode)? > 0)
}

/// Some `i`-dimensional subtorus ends up fully open.
pub fn event_c(s: &SeedSet, i: usize) -> Result<bool> {
    check_dim(s, i)?;
    Ok(closure(s)?.max_dim().is_some_and(|m| m >= i))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(d: usize, n: u32) -> Dimensions {
        Dimensions::new(d, n).unwrap()
    }

    fn seeds(dims: Dimensions, pts: &[&[u32]]) -> SeedSet {
        SeedSet::new(dims, pts.iter().map(|p| dims.vertex(p.to_vec()).unwrap())).unwrap()
    }

    #[test]
    fn closure_examples() {
        let d = dims(3, 3);
        let plane = closure(&seeds(d, &[&[0, 0, 0], &[1, 1, 0]])).unwrap();
        assert_eq!(plane.tori(), &[d.subtorus(&[(2, 0)]).unwrap()]);

        let single = closure(&seeds(d, &[&[0, 0, 0]])).unwrap();
        assert_eq!(single.tori().len(), 1);
        assert_eq!(single.max_dim(), Some(0));

        let far = closure(&seeds(d, &[&[0, 0, 0], &[1, 1, 1]])).unwrap();
        assert_eq!(far.tori().len(), 2);
        assert!(far.tori().iter().all(|t| t.dim() == 0));

        assert!(closure(&SeedSet::empty(d)).unwrap().is_empty());
    }

    #[test]
    fn duplicate_seeds_are_merged() {
        let d = dims(3, 3);
        let s = seeds(d, &[&[0, 0, 0], &[0, 0, 0]]);
        assert_eq!(s.points().len(), 1);
    }

    #[test]
    fn closure_budget() {
        let d = dims(3, 3);
        let s = seeds(d, &[&[0, 0, 0], &[1, 1, 1], &[2, 2, 2]]);
        assert!(closure_with(&s, MergeOrder::Sorted, 2)
            .unwrap_err()
            .is_budget());
    }

    #[test]
    fn generated_family_examples() {
        let d = dims(3, 3);
        let fam = generated_family(&seeds(d, &[&[0, 0, 0], &[1, 1, 0]]), 100);
        assert!(!fam.truncated);
        assert_eq!(fam.tori.len(), 3);
        assert!(fam.tori.contains(&d.subtorus(&[(2, 0)]).unwrap()));

        let one = generated_family(&seeds(d, &[&[2, 2, 2]]), 100);
        assert_eq!((one.tori.len(), one.truncated), (1, false));

        let none = generated_family(&SeedSet::empty(d), 100);
        assert!(none.tori.is_empty());
    }

    #[test]
    fn generated_family_truncates() {
        let d = dims(3, 3);
        let fam = generated_family(&seeds(d, &[&[0, 0, 0], &[1, 1, 0]]), 2);
        assert!(fam.truncated);
    }

    #[test]
    fn internal_spanning_examples() {
        let d = dims(3, 3);
        let line = d.subtorus(&[(1, 0), (2, 0)]).unwrap();
        assert!(is_internally_spanned(
            &line,
            &seeds(d, &[&[0, 0, 0], &[2, 0, 0], &[1, 2, 2]])
        ));

        let plane = d.subtorus(&[(2, 0)]).unwrap();
        assert!(!is_internally_spanned(
            &plane,
            &seeds(d, &[&[0, 0, 0], &[1, 0, 0]])
        ));

        assert!(!is_internally_spanned(&d.whole(), &seeds(d, &[&[1, 1, 1]])));
    }

    #[test]
    fn internal_spanning_ignores_outside_help() {
        // plane z=0 only gets one seed of its own; the rest of the help is outside
        let d = dims(3, 4);
        let s = seeds(d, &[&[0, 0, 0], &[1, 1, 1], &[1, 0, 1]]);
        let plane = d.subtorus(&[(2, 0)]).unwrap();
        assert!(!is_internally_spanned(&plane, &s));
        assert!(event_c(&s, 3).unwrap());
    }

    #[test]
    fn counts_and_events() {
        let d = dims(3, 3);
        let s = seeds(d, &[&[0, 0, 0], &[1, 1, 0]]);
        assert_eq!(spanned_count(&s, 2, CountMode::Exact).unwrap(), 1);
        assert_eq!(spanned_count(&s, 2, CountMode::Maximal).unwrap(), 1);
        assert!(event_i(&s, 2, CountMode::Exact).unwrap());
        assert!(!event_i(&s, 3, CountMode::Exact).unwrap());
        assert!(event_c(&s, 2).unwrap());
        assert!(!event_c(&s, 3).unwrap());

        let empty = SeedSet::empty(d);
        for i in 0..=3 {
            assert_eq!(spanned_count(&empty, i, CountMode::Exact).unwrap(), 0);
            assert!(!event_i(&empty, i, CountMode::Maximal).unwrap());
            assert!(!event_c(&empty, i).unwrap());
        }
        let one = seeds(d, &[&[2, 1, 0]]);
        assert!(event_i(&one, 0, CountMode::Exact).unwrap());
        assert!(event_c(&one, 0).unwrap());
        assert!(spanned_count(&one, 4, CountMode::Exact).is_err());
    }

    #[test]
    fn exact_sees_subtori_that_maximal_misses() {
        // a plane that later merges into the whole torus
        let d = dims(3, 5);
        let s = seeds(d, &[&[0, 0, 0], &[1, 1, 0], &[3, 3, 3]]);
        assert_eq!(closure(&s).unwrap().tori(), &[d.whole()]);
        assert_eq!(spanned_count(&s, 2, CountMode::Maximal).unwrap(), 0);
        assert_eq!(spanned_count(&s, 2, CountMode::Exact).unwrap(), 1);
        assert_eq!(spanned_count(&s, 3, CountMode::Exact).unwrap(), 1);
    }

    #[test]
    fn conditional_closure_examples() {
        let d = dims(3, 4);
        let line = d.subtorus(&[(1, 0), (2, 0)]).unwrap();
        let u = d.vertex(vec![2, 1, 1]).unwrap();
        let out = conditional_closure(&line, &SeedSet::new(d, [u.clone()]).unwrap()).unwrap();
        let expected = line.enclosing(&Subtorus::point(d, &u).unwrap()).unwrap();
        assert_eq!(out.tori(), &[expected]);

        let out = conditional_closure(&line, &SeedSet::empty(d)).unwrap();
        assert_eq!(out.tori(), &[line]);

        let out = conditional_closure(&d.whole(), &seeds(d, &[&[1, 2, 3]])).unwrap();
        assert_eq!(out.tori(), &[d.whole()]);
    }

    #[test]
    fn pre_open_inside_target_counts_toward_spanning() {
        let d = dims(4, 3);
        let v = d.subtorus(&[(3, 0)]).unwrap();
        let u = d.subtorus(&[(0, 0), (3, 0)]).unwrap();
        let s = seeds(d, &[&[1, 1, 1, 0]]).with_pre_open([u]).unwrap();
        // u is a plane inside v, the seed is at distance 1 from it
        assert!(is_internally_spanned(&v, &s));
        assert!(!is_internally_spanned(&d.whole(), &s));
    }
}
