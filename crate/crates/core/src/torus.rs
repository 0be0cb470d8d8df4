//! Vertices and subtori of the Hamming torus `[0, n)^d`.
//!
//! Two vertices are adjacent when they differ in exactly one coordinate, so
//! every axis-parallel line is a clique. A subtorus fixes some coordinates to
//! constants and leaves the rest free; its dimension is the number of free
//! coordinates.

use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ambient dimension `d` and side length `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawDimensions")]
pub struct Dimensions {
    d: usize,
    n: u32,
}

#[derive(Deserialize)]
struct RawDimensions {
    d: usize,
    n: u32,
}

impl TryFrom<RawDimensions> for Dimensions {
    type Error = Error;
    fn try_from(raw: RawDimensions) -> Result<Self> {
        Dimensions::new(raw.d, raw.n)
    }
}

impl fmt::Display for Dimensions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]^{}", self.n, self.d)
    }
}

impl Dimensions {
    pub fn new(d: usize, n: u32) -> Result<Self> {
        // u32::MAX is the free-slot marker inside Subtorus
        if d < 2 || n < 2 || n == u32::MAX {
            return Err(Error::InvalidDimensions { d, n });
        }
        Ok(Dimensions { d, n })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// `n^d` as an exact big integer.
    pub fn vertex_count(&self) -> BigUint {
        BigUint::from(self.n).pow(self.d as u32)
    }

    /// `n^k` if it fits in 128 bits.
    pub fn pow_checked(&self, k: usize) -> Option<u128> {
        (self.n as u128).checked_pow(k as u32)
    }

    pub fn check_same(&self, other: &Dimensions) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                left: *self,
                right: *other,
            })
        }
    }

    pub fn vertex(&self, coords: impl Into<Vec<u32>>) -> Result<Vertex> {
        let coords = coords.into();
        if coords.len() != self.d {
            return Err(Error::WrongArity {
                expected: self.d,
                got: coords.len(),
            });
        }
        if let Some((index, &value)) = coords.iter().enumerate().find(|(_, &c)| c >= self.n) {
            return Err(Error::CoordinateOutOfRange {
                index,
                value,
                n: self.n,
            });
        }
        Ok(Vertex { coords })
    }

    pub fn whole(&self) -> Subtorus {
        Subtorus {
            dims: *self,
            slots: vec![FREE; self.d].into_boxed_slice(),
        }
    }

    /// Subtorus fixing each `(index, value)` pair. Later duplicates of an index win.
    pub fn subtorus(&self, fixed: &[(usize, u32)]) -> Result<Subtorus> {
        let mut slots = vec![FREE; self.d];
        for &(index, value) in fixed {
            if index >= self.d {
                return Err(Error::WrongArity {
                    expected: self.d,
                    got: index + 1,
                });
            }
            if value >= self.n {
                return Err(Error::CoordinateOutOfRange {
                    index,
                    value,
                    n: self.n,
                });
            }
            slots[index] = value;
        }
        Ok(Subtorus {
            dims: *self,
            slots: slots.into_boxed_slice(),
        })
    }

    /// Every subtorus of dimension `dim`, in canonical order.
    pub fn subtori_of_dim(&self, dim: usize, budget: u128) -> Result<Vec<Subtorus>> {
        if dim > self.d {
            return Err(Error::Domain(format!(
                "dimension {dim} exceeds d={}",
                self.d
            )));
        }
        let fixed_count = self.d - dim;
        let per_choice = self.pow_checked(fixed_count).unwrap_or(u128::MAX);
        let total = binomial_u128(self.d as u64, fixed_count as u64).saturating_mul(per_choice);
        if total > budget {
            return Err(Error::BudgetExceeded {
                what: "subtorus enumeration",
                needed: total,
                budget,
            });
        }
        let mut out = Vec::with_capacity(total as usize);
        for mask in index_subsets(self.d, fixed_count) {
            let mut values = vec![0u32; fixed_count];
            loop {
                let fixed: Vec<(usize, u32)> =
                    mask.iter().copied().zip(values.iter().copied()).collect();
                out.push(self.subtorus(&fixed)?);
                if !odometer(&mut values, self.n) {
                    break;
                }
            }
        }
        out.sort();
        Ok(out)
    }
}

/// Advances `digits` as a base-`n` counter; false once it wraps to zero.
pub(crate) fn odometer(digits: &mut [u32], n: u32) -> bool {
    for digit in digits.iter_mut().rev() {
        *digit += 1;
        if *digit < n {
            return true;
        }
        *digit = 0;
    }
    false
}

/// All `k`-subsets of `0..d` as ascending index lists.
pub(crate) fn index_subsets(d: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, d: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            rec(i + 1, d, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, d, k, &mut Vec::new(), &mut out);
    out
}

pub(crate) fn binomial_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// A vertex of the torus. Validate through [`Dimensions::vertex`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vertex {
    coords: Vec<u32>,
}

impl Vertex {
    pub fn coords(&self) -> &[u32] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub(crate) fn from_coords_unchecked(coords: Vec<u32>) -> Vertex {
        Vertex { coords }
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Number of coordinates where `u` and `v` differ.
pub fn vertex_distance(u: &Vertex, v: &Vertex) -> Result<usize> {
    if u.len() != v.len() {
        return Err(Error::WrongArity {
            expected: u.len(),
            got: v.len(),
        });
    }
    Ok(u.coords
        .iter()
        .zip(&v.coords)
        .filter(|(a, b)| a != b)
        .count())
}

pub(crate) const FREE: u32 = u32::MAX;

/// Axis-aligned subtorus: coordinates in `fixed()` are pinned, the rest range freely.
///
/// Stored as one slot per coordinate holding either the fixed value or a free
/// marker, which is a canonical form: equal subtori have equal slots.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawSubtorus", into = "RawSubtorus")]
pub struct Subtorus {
    dims: Dimensions,
    slots: Box<[u32]>,
}

#[derive(Serialize, Deserialize)]
struct RawSubtorus {
    d: usize,
    n: u32,
    fixed: Vec<(usize, u32)>,
}

impl TryFrom<RawSubtorus> for Subtorus {
    type Error = Error;
    fn try_from(raw: RawSubtorus) -> Result<Self> {
        let dims = Dimensions::new(raw.d, raw.n)?;
        let mut seen = vec![false; dims.d];
        for &(index, _) in &raw.fixed {
            if index < dims.d && std::mem::replace(&mut seen[index], true) {
                return Err(Error::Domain(format!("index {index} fixed twice")));
            }
        }
        dims.subtorus(&raw.fixed)
    }
}

impl From<Subtorus> for RawSubtorus {
    fn from(s: Subtorus) -> Self {
        RawSubtorus {
            d: s.dims.d,
            n: s.dims.n,
            fixed: s.fixed().collect(),
        }
    }
}

impl fmt::Debug for Subtorus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Subtorus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, &s) in self.slots.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            if s == FREE {
                write!(f, "*")?;
            } else {
                write!(f, "{s}")?;
            }
        }
        write!(f, ")")
    }
}

impl Subtorus {
    /// The 0-dimensional subtorus `{u}`.
    pub fn point(dims: Dimensions, u: &Vertex) -> Result<Subtorus> {
        if u.len() != dims.d {
            return Err(Error::WrongArity {
                expected: dims.d,
                got: u.len(),
            });
        }
        Ok(Subtorus {
            dims,
            slots: u.coords.clone().into_boxed_slice(),
        })
    }

    pub fn dims(&self) -> Dimensions {
        self.dims
    }

    pub fn dim(&self) -> usize {
        self.slots.iter().filter(|&&s| s == FREE).count()
    }

    /// Fixed `(index, value)` pairs in ascending index order.
    pub fn fixed(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, &s)| s != FREE)
            .map(|(i, &s)| (i, s))
    }

    pub fn free_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == FREE)
            .map(|(i, _)| i)
    }

    pub fn is_whole(&self) -> bool {
        self.slots.iter().all(|&s| s == FREE)
    }

    /// Minimum Hamming distance between a vertex of `self` and a vertex of `other`.
    pub fn distance(&self, other: &Subtorus) -> Result<usize> {
        self.dims.check_same(&other.dims)?;
        Ok(self.distance_unchecked(other))
    }

    pub(crate) fn distance_unchecked(&self, other: &Subtorus) -> usize {
        self.slots
            .iter()
            .zip(other.slots.iter())
            .filter(|(&a, &b)| a != FREE && b != FREE && a != b)
            .count()
    }

    /// Hamming distance from the nearest vertex of `self` to `u`.
    pub fn point_distance(&self, u: &Vertex) -> Result<usize> {
        self.check_vertex(u)?;
        Ok(self.point_distance_unchecked(u))
    }

    pub(crate) fn point_distance_unchecked(&self, u: &Vertex) -> usize {
        self.slots
            .iter()
            .zip(&u.coords)
            .filter(|(&a, &c)| a != FREE && a != c)
            .count()
    }

    /// Smallest subtorus containing both `self` and `other`.
    pub fn enclosing(&self, other: &Subtorus) -> Result<Subtorus> {
        self.dims.check_same(&other.dims)?;
        Ok(self.enclosing_unchecked(other))
    }

    pub(crate) fn enclosing_unchecked(&self, other: &Subtorus) -> Subtorus {
        let slots = self
            .slots
            .iter()
            .zip(other.slots.iter())
            .map(|(&a, &b)| if a == b { a } else { FREE })
            .collect();
        Subtorus {
            dims: self.dims,
            slots,
        }
    }

    pub fn contains_vertex(&self, u: &Vertex) -> Result<bool> {
        self.check_vertex(u)?;
        Ok(self.point_distance_unchecked(u) == 0)
    }

    /// `self ⊇ other`.
    pub fn contains(&self, other: &Subtorus) -> Result<bool> {
        self.dims.check_same(&other.dims)?;
        Ok(self.contains_unchecked(other))
    }

    pub(crate) fn contains_unchecked(&self, other: &Subtorus) -> bool {
        self.slots
            .iter()
            .zip(other.slots.iter())
            .all(|(&a, &b)| a == FREE || a == b)
    }

    /// Member vertices in lexicographic order; fails if `n^dim` exceeds `budget`.
    pub fn vertices(&self, budget: u128) -> Result<VertexIter> {
        let needed = self.dims.pow_checked(self.dim()).unwrap_or(u128::MAX);
        if needed > budget {
            return Err(Error::BudgetExceeded {
                what: "subtorus vertex enumeration",
                needed,
                budget,
            });
        }
        let free: Vec<usize> = self.free_indices().collect();
        let current: Vec<u32> = self
            .slots
            .iter()
            .map(|&s| if s == FREE { 0 } else { s })
            .collect();
        Ok(VertexIter {
            n: self.dims.n,
            free,
            current,
            done: false,
        })
    }

    fn check_vertex(&self, u: &Vertex) -> Result<()> {
        if u.len() != self.dims.d {
            return Err(Error::WrongArity {
                expected: self.dims.d,
                got: u.len(),
            });
        }
        Ok(())
    }
}

pub struct VertexIter {
    n: u32,
    free: Vec<usize>,
    current: Vec<u32>,
    done: bool,
}

impl Iterator for VertexIter {
    type Item = Vertex;

    fn next(&mut self) -> Option<Vertex> {
        if self.done {
            return None;
        }
        let out = Vertex::from_coords_unchecked(self.current.clone());
        self.done = true;
        for &i in self.free.iter().rev() {
            self.current[i] += 1;
            if self.current[i] < self.n {
                self.done = false;
                break;
            }
            self.current[i] = 0;
        }
        Some(out)
    }
}
