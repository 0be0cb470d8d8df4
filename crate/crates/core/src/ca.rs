//! Dense bootstrap percolation on the full vertex grid, for any threshold.
//!
//! This is the reference engine: it materializes all `n^d` cells and applies
//! the synchronous update rule until nothing changes. [`crate::span`] is
//! checked against it.

use crate::error::{Error, Result};
use crate::torus::{Dimensions, Subtorus, Vertex};

/// Default cap on vertex visits for a single evolution.
pub const DEFAULT_VISIT_BUDGET: u64 = 100_000_000;

/// Number of open neighbours a closed vertex needs in order to open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Threshold(u32);

impl Threshold {
    pub const TWO: Threshold = Threshold(2);

    pub fn new(theta: u32) -> Result<Threshold> {
        if theta == 0 {
            return Err(Error::Domain("threshold must be >= 1".into()));
        }
        Ok(Threshold(theta))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

/// Row-major rank layout of `[0, n)^d`.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Grid {
    dims: Dimensions,
    size: usize,
    /// `strides[k] = n^(d-1-k)`
    strides: Vec<usize>,
}

impl Grid {
    fn new(dims: Dimensions, budget: u64) -> Result<Grid> {
        let size = dims.pow_checked(dims.d()).unwrap_or(u128::MAX);
        if size > budget as u128 {
            return Err(Error::BudgetExceeded {
                what: "dense grid",
                needed: size,
                budget: budget as u128,
            });
        }
        let n = dims.n() as usize;
        let mut strides = vec![1usize; dims.d()];
        for k in (0..dims.d().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * n;
        }
        Ok(Grid {
            dims,
            size: size as usize,
            strides,
        })
    }

    fn rank(&self, v: &Vertex) -> usize {
        v.coords()
            .iter()
            .zip(&self.strides)
            .map(|(&c, &s)| c as usize * s)
            .sum()
    }

    fn coord(&self, rank: usize, k: usize) -> usize {
        (rank / self.strides[k]) % self.dims.n() as usize
    }

    fn unrank(&self, rank: usize) -> Vertex {
        let coords = (0..self.dims.d())
            .map(|k| self.coord(rank, k) as u32)
            .collect();
        Vertex::from_coords_unchecked(coords)
    }

    /// Identifier of the line through `rank` in direction `k`, in `[0, d * n^(d-1))`.
    fn line_id(&self, rank: usize, k: usize) -> usize {
        let stride = self.strides[k];
        let high = rank / (stride * self.dims.n() as usize);
        let low = rank % stride;
        k * (self.size / self.dims.n() as usize) + high * stride + low
    }

    /// First rank on the line through `rank` in direction `k`.
    fn line_base(&self, rank: usize, k: usize) -> usize {
        rank - self.coord(rank, k) * self.strides[k]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    fn new(len: usize) -> BitSet {
        BitSet {
            words: vec![0; len.div_ceil(64)],
        }
    }

    #[inline]
    fn get(&self, i: usize) -> bool {
        self.words[i >> 6] >> (i & 63) & 1 == 1
    }

    #[inline]
    fn set(&mut self, i: usize) -> bool {
        let w = &mut self.words[i >> 6];
        let mask = 1u64 << (i & 63);
        let was = *w & mask != 0;
        *w |= mask;
        !was
    }

    fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// A set of open vertices over the whole grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    grid: Grid,
    open: BitSet,
}

impl Configuration {
    /// All-closed configuration. Fails if `n^d` exceeds `budget`.
    pub fn empty(dims: Dimensions, budget: u64) -> Result<Configuration> {
        let grid = Grid::new(dims, budget)?;
        let open = BitSet::new(grid.size);
        Ok(Configuration { grid, open })
    }

    pub fn from_vertices<'a>(
        dims: Dimensions,
        vertices: impl IntoIterator<Item = &'a Vertex>,
        budget: u64,
    ) -> Result<Configuration> {
        let mut c = Configuration::empty(dims, budget)?;
        for v in vertices {
            c.insert(v)?;
        }
        Ok(c)
    }

    /// Every vertex open.
    pub fn full(dims: Dimensions, budget: u64) -> Result<Configuration> {
        let mut c = Configuration::empty(dims, budget)?;
        for r in 0..c.grid.size {
            c.open.set(r);
        }
        Ok(c)
    }

    pub fn dims(&self) -> Dimensions {
        self.grid.dims
    }

    fn check(&self, v: &Vertex) -> Result<()> {
        self.grid.dims.vertex(v.coords().to_vec()).map(|_| ())
    }

    /// Opens `v`; returns whether it was closed before.
    pub fn insert(&mut self, v: &Vertex) -> Result<bool> {
        self.check(v)?;
        Ok(self.open.set(self.grid.rank(v)))
    }

    pub fn is_open(&self, v: &Vertex) -> Result<bool> {
        self.check(v)?;
        Ok(self.open.get(self.grid.rank(v)))
    }

    pub fn open_count(&self) -> usize {
        self.open.count()
    }

    /// Open vertices in lexicographic order.
    pub fn open_vertices(&self) -> Vec<Vertex> {
        (0..self.grid.size)
            .filter(|&r| self.open.get(r))
            .map(|r| self.grid.unrank(r))
            .collect()
    }

    /// Whether every vertex of `v` is open.
    pub fn fully_open(&self, v: &Subtorus) -> Result<bool> {
        self.grid.dims.check_same(&v.dims())?;
        let mut members = v.vertices(u128::MAX)?;
        Ok(members.all(|u| self.open.get(self.grid.rank(&u))))
    }

    /// Whether the open set is exactly the vertex set of `v`.
    pub fn equals_subtorus(&self, v: &Subtorus) -> Result<bool> {
        let expected = self.grid.dims.pow_checked(v.dim()).unwrap_or(u128::MAX);
        Ok(self.open_count() as u128 == expected && self.fully_open(v)?)
    }
}

/// The `d(n-1)` vertices that differ from `u` in exactly one coordinate.
pub fn neighbors(dims: Dimensions, u: &Vertex) -> impl Iterator<Item = Vertex> + '_ {
    let n = dims.n();
    (0..u.len()).flat_map(move |k| {
        (0..n).filter(move |&t| t != u.coords()[k]).map(move |t| {
            let mut coords = u.coords().to_vec();
            coords[k] = t;
            Vertex::from_coords_unchecked(coords)
        })
    })
}

fn charge(visits: &mut u64, amount: u64, budget: u64) -> Result<()> {
    *visits = visits.saturating_add(amount);
    if *visits > budget {
        return Err(Error::BudgetExceeded {
            what: "vertex visits",
            needed: *visits as u128,
            budget: budget as u128,
        });
    }
    Ok(())
}

/// Closed vertices of `c` with at least `theta` open neighbours, in rank order.
fn newly_open(c: &Configuration, theta: Threshold) -> Vec<usize> {
    let grid = &c.grid;
    let n = grid.dims.n() as usize;
    let mut out = Vec::new();
    for r in 0..grid.size {
        if c.open.get(r) {
            continue;
        }
        let mut count = 0u32;
        'dirs: for k in 0..grid.dims.d() {
            let base = grid.line_base(r, k);
            for t in 0..n {
                let s = base + t * grid.strides[k];
                if s != r && c.open.get(s) {
                    count += 1;
                    if count >= theta.0 {
                        break 'dirs;
                    }
                }
            }
        }
        if count >= theta.0 {
            out.push(r);
        }
    }
    out
}

/// One synchronous update.
pub fn step(c: &Configuration, theta: Threshold, budget: u64) -> Result<Configuration> {
    let mut visits = 0;
    charge(&mut visits, c.grid.size as u64, budget)?;
    let mut next = c.clone();
    for r in newly_open(c, theta) {
        next.open.set(r);
    }
    Ok(next)
}

/// Iterates [`step`] to the fixpoint. Returns the final configuration and the
/// number of rounds that opened at least one vertex.
pub fn evolve(c: &Configuration, theta: Threshold, budget: u64) -> Result<(Configuration, usize)> {
    let mut current = c.clone();
    let mut rounds = 0;
    let mut visits = 0;
    loop {
        charge(&mut visits, current.grid.size as u64, budget)?;
        let fresh = newly_open(&current, theta);
        if fresh.is_empty() {
            return Ok((current, rounds));
        }
        for r in fresh {
            current.open.set(r);
        }
        rounds += 1;
    }
}

/// Same result as [`evolve`], but only re-examines vertices on lines whose
/// open count changed in the previous round.
///
/// A closed vertex's open-neighbour count is the sum of the open counts of
/// the `d` lines through it.
pub fn evolve_incremental(
    c: &Configuration,
    theta: Threshold,
    budget: u64,
) -> Result<(Configuration, usize)> {
    let grid = c.grid.clone();
    let d = grid.dims.d();
    let n = grid.dims.n() as usize;
    let mut current = c.clone();
    let mut line_counts = vec![0u32; d * (grid.size / n)];
    let mut dirty = Vec::new();
    let mut dirty_mark = vec![false; line_counts.len()];
    let mut visits = 0;

    let touch =
        |r: usize, counts: &mut [u32], dirty: &mut Vec<(usize, usize)>, mark: &mut [bool]| {
            for k in 0..d {
                let id = grid.line_id(r, k);
                counts[id] += 1;
                if !mark[id] {
                    mark[id] = true;
                    dirty.push((id, grid.line_base(r, k) + k * grid.size));
                }
            }
        };

    for r in (0..grid.size).filter(|&r| current.open.get(r)) {
        touch(r, &mut line_counts, &mut dirty, &mut dirty_mark);
    }

    let mut seen = vec![0u32; grid.size];
    let mut epoch = 0u32;
    let mut rounds = 0;
    loop {
        epoch += 1;
        let mut fresh = Vec::new();
        for &(id, tagged_base) in &dirty {
            dirty_mark[id] = false;
            let k = tagged_base / grid.size;
            let base = tagged_base % grid.size;
            charge(&mut visits, n as u64, budget)?;
            for t in 0..n {
                let r = base + t * grid.strides[k];
                if current.open.get(r) || seen[r] == epoch {
                    continue;
                }
                seen[r] = epoch;
                let count: u32 = (0..d).map(|k2| line_counts[grid.line_id(r, k2)]).sum();
                if count >= theta.0 {
                    fresh.push(r);
                }
            }
        }
        dirty.clear();
        if fresh.is_empty() {
            return Ok((current, rounds));
        }
        rounds += 1;
        for r in fresh {
            current.open.set(r);
            touch(r, &mut line_counts, &mut dirty, &mut dirty_mark);
        }
    }
}

/// Final open set starting from exactly `seeds`.
pub fn span_dense(
    dims: Dimensions,
    seeds: &[Vertex],
    theta: Threshold,
    budget: u64,
) -> Result<Configuration> {
    let start = Configuration::from_vertices(dims, seeds, budget)?;
    Ok(evolve_incremental(&start, theta, budget)?.0)
}

/// Whether `v` equals the span of the seeds lying inside it.
pub fn internally_spanned_dense(
    v: &Subtorus,
    seeds: &[Vertex],
    theta: Threshold,
    budget: u64,
) -> Result<bool> {
    let inside: Vec<Vertex> = seeds
        .iter()
        .filter(|u| v.point_distance_unchecked(u) == 0)
        .cloned()
        .collect();
    if inside.is_empty() {
        return Ok(false);
    }
    span_dense(v.dims(), &inside, theta, budget)?.equals_subtorus(v)
}
