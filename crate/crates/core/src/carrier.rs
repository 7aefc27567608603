//! Discretized carrier spaces: a uniform lattice window in R^1 or R^2, plus
//! the product space (lattice x ordinate lattice) under the max metric.
//!
//! Every set-level computation in this crate happens on finite lattices, so
//! closed and bounded coincide with finite and every infimum is attained.
//! Points are stored as lattice indices and are only meaningful relative to
//! the grid that created them; operations combining two sets check grid
//! equality, point-level operations check window containment.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Maximum base dimension supported by the lattice window.
pub const MAX_DIM: usize = 2;

/// Relative slack used when snapping window extents to whole lattice steps.
const SNAP_REL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum CarrierError {
    #[error("dim must be 1 or 2, got {0}")]
    BadDim(usize),
    #[error("axis {axis}: hi ({hi}) must exceed lo ({lo})")]
    EmptyAxis { axis: usize, lo: f64, hi: f64 },
    #[error("spacing must be positive and finite, got {0}")]
    BadSpacing(f64),
    #[error("axis {axis}: extent {extent} is not a positive whole number of steps of {h}")]
    ExtentNotWholeSteps { axis: usize, extent: f64, h: f64 },
    #[error("lattice would have {0} points, exceeding the supported maximum")]
    TooManyPoints(u64),
    #[error("coordinate {value} on axis {axis} is not a lattice value of this grid")]
    OffLattice { axis: usize, value: f64 },
    #[error("expected {expected} coordinates, got {got}")]
    WrongArity { expected: usize, got: usize },
}

/// A point of the base lattice, stored as per-axis indices.
///
/// `ix[1]` is always 0 on one-dimensional grids. Ordering is lexicographic
/// by index, which matches both the row-major id order and coordinate-wise
/// lexicographic order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Point {
    ix: [u32; 2],
}

impl Point {
    pub fn ix(&self) -> [u32; 2] {
        self.ix
    }
}

/// A point of the product lattice: a base point plus an ordinate level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProductPoint {
    pub base: Point,
    pub level: u32,
}

/// Uniform lattice window standing in for the carrier space, together with
/// the ordinate axis used to build product-space sets (epigraphs).
///
/// The point set `{lo + k*h}` is finite on every axis; all subsets of it are
/// treated as closed and compact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    dim: usize,
    lo: [f64; 2],
    hi: [f64; 2],
    h: f64,
    n: [u32; 2],
    value_lo: f64,
    value_hi: f64,
    h_v: f64,
    n_v: u32,
}

fn steps_for_extent(axis: usize, lo: f64, hi: f64, h: f64) -> Result<u32, CarrierError> {
    if !lo.is_finite() || !hi.is_finite() || hi <= lo {
        return Err(CarrierError::EmptyAxis { axis, lo, hi });
    }
    let extent = hi - lo;
    let k = (extent / h).round();
    if k < 1.0 || k > u32::MAX as f64 || (k * h - extent).abs() > SNAP_REL * extent.max(1.0) {
        return Err(CarrierError::ExtentNotWholeSteps { axis, extent, h });
    }
    Ok(k as u32)
}

impl GridSpec {
    pub fn new(
        dim: usize,
        lo: &[f64],
        hi: &[f64],
        h: f64,
        value_lo: f64,
        value_hi: f64,
        h_v: f64,
    ) -> Result<Self, CarrierError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(CarrierError::BadDim(dim));
        }
        if lo.len() != dim {
            return Err(CarrierError::WrongArity {
                expected: dim,
                got: lo.len(),
            });
        }
        if hi.len() != dim {
            return Err(CarrierError::WrongArity {
                expected: dim,
                got: hi.len(),
            });
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(CarrierError::BadSpacing(h));
        }
        if !(h_v.is_finite() && h_v > 0.0) {
            return Err(CarrierError::BadSpacing(h_v));
        }
        let mut lo2 = [0.0; 2];
        let mut hi2 = [0.0; 2];
        let mut n = [1u32; 2];
        for a in 0..dim {
            lo2[a] = lo[a];
            hi2[a] = hi[a];
            n[a] = steps_for_extent(a, lo[a], hi[a], h)? + 1;
        }
        let n_v = steps_for_extent(dim, value_lo, value_hi, h_v)? + 1;
        let base_points = n[0] as u64 * n[1] as u64;
        let product_points = base_points * n_v as u64;
        if product_points > (1 << 31) {
            return Err(CarrierError::TooManyPoints(product_points));
        }
        Ok(GridSpec {
            dim,
            lo: lo2,
            hi: hi2,
            h,
            n,
            value_lo,
            value_hi,
            h_v,
            n_v,
        })
    }

    /// One-dimensional grid with matching ordinate window, the common case in
    /// packaged experiments.
    pub fn line(lo: f64, hi: f64, h: f64, value_lo: f64, value_hi: f64, h_v: f64) -> Result<Self, CarrierError> {
        GridSpec::new(1, &[lo], &[hi], h, value_lo, value_hi, h_v)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn ordinate_spacing(&self) -> f64 {
        self.h_v
    }

    pub fn axis_bounds(&self, axis: usize) -> (f64, f64) {
        (self.lo[axis], self.hi[axis])
    }

    pub fn ordinate_bounds(&self) -> (f64, f64) {
        (self.value_lo, self.value_hi)
    }

    pub fn axis_len(&self, axis: usize) -> u32 {
        self.n[axis]
    }

    pub fn ordinate_len(&self) -> u32 {
        self.n_v
    }

    pub fn coord(&self, p: Point) -> [f64; 2] {
        let mut c = [0.0; 2];
        for (a, slot) in c.iter_mut().enumerate().take(self.dim) {
            *slot = self.lo[a] + p.ix[a] as f64 * self.h;
        }
        c
    }

    /// Nearest lattice point, clamped to the window. Halfway ties round away
    /// from zero in index space, which keeps the rule deterministic.
    pub fn nearest(&self, x: &[f64]) -> Point {
        assert_eq!(x.len(), self.dim, "nearest: coordinate arity mismatch");
        let mut ix = [0u32; 2];
        for a in 0..self.dim {
            let k = ((x[a] - self.lo[a]) / self.h).round();
            ix[a] = k.clamp(0.0, (self.n[a] - 1) as f64) as u32;
        }
        Point { ix }
    }

    /// Point at exactly the given coordinates; errors if they are off-lattice
    /// or outside the window.
    pub fn point_at(&self, x: &[f64]) -> Result<Point, CarrierError> {
        if x.len() != self.dim {
            return Err(CarrierError::WrongArity {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut ix = [0u32; 2];
        for a in 0..self.dim {
            let t = (x[a] - self.lo[a]) / self.h;
            let k = t.round();
            let snapped = self.lo[a] + k * self.h;
            if k < 0.0
                || k > (self.n[a] - 1) as f64
                || (snapped - x[a]).abs() > SNAP_REL * x[a].abs().max(1.0)
            {
                return Err(CarrierError::OffLattice {
                    axis: a,
                    value: x[a],
                });
            }
            ix[a] = k as u32;
        }
        Ok(Point { ix })
    }

    /// Nearest product-grid point to `(x, a)`.
    pub fn nearest_product(&self, x: &[f64], a: f64) -> ProductPoint {
        let base = self.nearest(x);
        let k = ((a - self.value_lo) / self.h_v).round();
        let level = k.clamp(0.0, (self.n_v - 1) as f64) as u32;
        ProductPoint { base, level }
    }

    pub fn ordinate(&self, level: u32) -> f64 {
        self.value_lo + level as f64 * self.h_v
    }

    /// Smallest level whose ordinate is >= `a`, or `None` if `a` lies above
    /// the ordinate window. Values below the window clamp to level 0.
    pub fn level_at_or_above(&self, a: f64) -> Option<u32> {
        if a <= self.value_lo {
            return Some(0);
        }
        let mut k = (((a - self.value_lo) / self.h_v).ceil() as i64).clamp(0, self.n_v as i64);
        // exact fix-up against rounding in the division
        while k > 0 && self.ordinate((k - 1) as u32) >= a {
            k -= 1;
        }
        while k < self.n_v as i64 && self.ordinate(k as u32) < a {
            k += 1;
        }
        if k >= self.n_v as i64 {
            None
        } else {
            Some(k as u32)
        }
    }

    /// Largest level whose ordinate is <= `a`, or `None` if `a` lies below
    /// the ordinate window. Values above the window clamp to the top level.
    /// Comparisons run against actual lattice ordinates, which can drift a
    /// few ulps from `value_hi`.
    pub fn level_at_or_below(&self, a: f64) -> Option<u32> {
        if a >= self.ordinate(self.n_v - 1) {
            return Some(self.n_v - 1);
        }
        if a < self.value_lo {
            return None;
        }
        let mut k = (((a - self.value_lo) / self.h_v).floor() as i64).clamp(-1, self.n_v as i64 - 1);
        while k + 1 < self.n_v as i64 && self.ordinate((k + 1) as u32) <= a {
            k += 1;
        }
        while k >= 0 && self.ordinate(k as u32) > a {
            k -= 1;
        }
        if k < 0 {
            None
        } else {
            Some(k as u32)
        }
    }

    /// Largest whole number of steps `k` with `k * step <= r` (0 when r < step).
    /// Capped well above any representable lattice extent.
    pub(crate) fn steps_within(r: f64, step: f64) -> i64 {
        if r < 0.0 {
            return -1;
        }
        let mut k = (r / step).min(4.0e9).floor() as i64;
        while (k + 1) as f64 * step <= r {
            k += 1;
        }
        while k > 0 && k as f64 * step > r {
            k -= 1;
        }
        k
    }

    /// Largest whole number of steps `k` with `k * step < r` (-1 when r <= 0).
    pub(crate) fn steps_strictly_within(r: f64, step: f64) -> i64 {
        if r <= 0.0 {
            return -1;
        }
        let mut k = (r / step).min(4.0e9).floor() as i64;
        while (k + 1) as f64 * step < r {
            k += 1;
        }
        while k >= 0 && k as f64 * step >= r {
            k -= 1;
        }
        k.max(-1)
    }

    pub fn product(&self) -> ProductGrid {
        ProductGrid { base: *self }
    }

    fn dist_ix(&self, p: Point, q: Point) -> f64 {
        let di = p.ix[0] as f64 - q.ix[0] as f64;
        if self.dim == 1 {
            self.h * di.abs()
        } else {
            let dj = p.ix[1] as f64 - q.ix[1] as f64;
            self.h * di.hypot(dj)
        }
    }
}

/// Serialized form: `lo`/`hi` accept a scalar (1-d) or per-axis array.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum AxisSpec {
    Scalar(f64),
    PerAxis(Vec<f64>),
}

impl AxisSpec {
    fn to_vec(&self) -> Vec<f64> {
        match self {
            AxisSpec::Scalar(x) => vec![*x],
            AxisSpec::PerAxis(v) => v.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct GridSpecRepr {
    dim: usize,
    lo: AxisSpec,
    hi: AxisSpec,
    h: f64,
    value_lo: f64,
    value_hi: f64,
    h_v: f64,
}

impl Serialize for GridSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let axis = |v: &[f64; 2]| {
            if self.dim == 1 {
                AxisSpec::Scalar(v[0])
            } else {
                AxisSpec::PerAxis(v[..self.dim].to_vec())
            }
        };
        GridSpecRepr {
            dim: self.dim,
            lo: axis(&self.lo),
            hi: axis(&self.hi),
            h: self.h,
            value_lo: self.value_lo,
            value_hi: self.value_hi,
            h_v: self.h_v,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GridSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = GridSpecRepr::deserialize(deserializer)?;
        let expand = |spec: &AxisSpec| -> Vec<f64> {
            let v = spec.to_vec();
            if v.len() == 1 && repr.dim == 2 {
                vec![v[0], v[0]]
            } else {
                v
            }
        };
        GridSpec::new(
            repr.dim,
            &expand(&repr.lo),
            &expand(&repr.hi),
            repr.h,
            repr.value_lo,
            repr.value_hi,
            repr.h_v,
        )
        .map_err(D::Error::custom)
    }
}

/// The product space (base lattice x ordinate lattice) under the max metric
/// `max{d(x,y), |alpha-beta|}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProductGrid {
    base: GridSpec,
}

impl ProductGrid {
    pub fn base(&self) -> &GridSpec {
        &self.base
    }
}

/// Common surface of the base and product lattices: canonical point ids,
/// metric evaluation, and the bulk primitives (balls, dilation, farthest
/// nearest-neighbor) the hyperspace operations are built on.
///
/// Canonical ids enumerate points in row-major order, so sorted id slices
/// are sorted by point as well.
pub trait Carrier: Clone + PartialEq + Send + Sync + std::fmt::Debug {
    type Point: Copy + Eq + Ord + std::hash::Hash + std::fmt::Debug + Send + Sync;

    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn id_of(&self, p: Self::Point) -> u32;
    fn point(&self, id: u32) -> Self::Point;
    fn contains(&self, p: Self::Point) -> bool;
    fn dist(&self, p: Self::Point, q: Self::Point) -> f64;
    /// Coarsest lattice step; tolerances below this are rejected by the
    /// set-limit operations.
    fn resolution(&self) -> f64;
    fn coords_of(&self, p: Self::Point) -> Vec<f64>;

    /// Sorted ids of the ball around `center`; `strict` selects the open
    /// ball (dist < r) instead of the closed one (dist <= r).
    fn ball_ids(&self, center: Self::Point, r: f64, strict: bool) -> Vec<u32>;

    /// Sorted ids within distance `r` of the sorted id set `ids`.
    fn dilate_ids(&self, ids: &[u32], r: f64) -> Vec<u32>;

    /// `max over p in from` of `min over q in to` of dist(p, q), with the
    /// attaining `from` id. Both slices must be nonempty and sorted.
    fn max_min_dist(&self, from: &[u32], to: &[u32]) -> (f64, u32);
}

impl Carrier for GridSpec {
    type Point = Point;

    fn len(&self) -> usize {
        self.n[0] as usize * self.n[1] as usize
    }

    fn id_of(&self, p: Point) -> u32 {
        p.ix[0] * self.n[1] + p.ix[1]
    }

    fn point(&self, id: u32) -> Point {
        Point {
            ix: [id / self.n[1], id % self.n[1]],
        }
    }

    fn contains(&self, p: Point) -> bool {
        p.ix[0] < self.n[0] && p.ix[1] < self.n[1]
    }

    fn dist(&self, p: Point, q: Point) -> f64 {
        assert!(
            self.contains(p) && self.contains(q),
            "dist: point does not belong to this grid"
        );
        self.dist_ix(p, q)
    }

    fn resolution(&self) -> f64 {
        self.h
    }

    fn coords_of(&self, p: Point) -> Vec<f64> {
        self.coord(p)[..self.dim].to_vec()
    }

    fn ball_ids(&self, center: Point, r: f64, strict: bool) -> Vec<u32> {
        if r < 0.0 || (strict && r <= 0.0) {
            return Vec::new();
        }
        let reach = GridSpec::steps_within(r, self.h) + 1;
        let lo0 = (center.ix[0] as i64 - reach).max(0) as u32;
        let hi0 = (center.ix[0] as i64 + reach).min(self.n[0] as i64 - 1) as u32;
        let mut out = Vec::new();
        if self.dim == 1 {
            for i in lo0..=hi0 {
                let p = Point { ix: [i, 0] };
                let d = self.dist_ix(center, p);
                if if strict { d < r } else { d <= r } {
                    out.push(self.id_of(p));
                }
            }
        } else {
            let lo1 = (center.ix[1] as i64 - reach).max(0) as u32;
            let hi1 = (center.ix[1] as i64 + reach).min(self.n[1] as i64 - 1) as u32;
            for i in lo0..=hi0 {
                for j in lo1..=hi1 {
                    let p = Point { ix: [i, j] };
                    let d = self.dist_ix(center, p);
                    if if strict { d < r } else { d <= r } {
                        out.push(self.id_of(p));
                    }
                }
            }
        }
        out
    }

    fn dilate_ids(&self, ids: &[u32], r: f64) -> Vec<u32> {
        if ids.is_empty() || r < 0.0 {
            return Vec::new();
        }
        if self.dim == 1 {
            // ids are axis indices; sweep merged intervals [i-k, i+k]
            let k = GridSpec::steps_within(r, self.h).max(0);
            let mut out = Vec::new();
            let mut next: i64 = -1;
            for &i in ids {
                let lo = (i as i64 - k).max(0);
                let hi = (i as i64 + k).min(self.n[0] as i64 - 1);
                let start = lo.max(next);
                for j in start..=hi {
                    out.push(j as u32);
                }
                next = next.max(hi + 1);
            }
            out
        } else {
            let mut mask = vec![false; self.len()];
            for &id in ids {
                for b in self.ball_ids(self.point(id), r, false) {
                    mask[b as usize] = true;
                }
            }
            mask.iter()
                .enumerate()
                .filter_map(|(i, &m)| if m { Some(i as u32) } else { None })
                .collect()
        }
    }

    fn max_min_dist(&self, from: &[u32], to: &[u32]) -> (f64, u32) {
        assert!(!from.is_empty() && !to.is_empty());
        if self.dim == 1 {
            // both slices sorted by coordinate: one forward sweep
            let mut j = 0usize;
            let mut worst = (-1.0, from[0]);
            for &f in from {
                while j + 1 < to.len()
                    && (to[j + 1] as i64 - f as i64).abs() <= (to[j] as i64 - f as i64).abs()
                {
                    j += 1;
                }
                let d = (to[j] as i64 - f as i64).abs() as f64 * self.h;
                if d > worst.0 {
                    worst = (d, f);
                }
            }
            worst
        } else {
            // group targets by row, scan rows outward with pruning
            let ny = self.n[1];
            let mut rows: Vec<Vec<u32>> = vec![Vec::new(); self.n[0] as usize];
            for &t in to {
                rows[(t / ny) as usize].push(t % ny);
            }
            let mut worst = (-1.0, from[0]);
            for &f in from {
                let (fi, fj) = ((f / ny) as i64, (f % ny) as i64);
                let mut best = f64::INFINITY;
                for radius in 0..self.n[0] as i64 {
                    if radius > 0 && radius as f64 * self.h >= best {
                        break;
                    }
                    let probe = |ri: i64, best: &mut f64| {
                        if ri < 0 || ri >= self.n[0] as i64 {
                            return;
                        }
                        let row = &rows[ri as usize];
                        if row.is_empty() {
                            return;
                        }
                        let di = ri - fi;
                        let pos = row.partition_point(|&c| (c as i64) < fj);
                        // widen around the insertion point until the column
                        // offset alone already exceeds the best distance
                        let mut l = pos;
                        while l > 0 {
                            l -= 1;
                            let dj = row[l] as i64 - fj;
                            if (dj.abs() as f64) * self.h >= *best {
                                break;
                            }
                            let d = self.h * ((di * di + dj * dj) as f64).sqrt();
                            if d < *best {
                                *best = d;
                            }
                        }
                        let mut u = pos;
                        while u < row.len() {
                            let dj = row[u] as i64 - fj;
                            if (dj.abs() as f64) * self.h >= *best {
                                break;
                            }
                            let d = self.h * ((di * di + dj * dj) as f64).sqrt();
                            if d < *best {
                                *best = d;
                            }
                            u += 1;
                        }
                    };
                    if radius == 0 {
                        probe(fi, &mut best);
                    } else {
                        probe(fi - radius, &mut best);
                        probe(fi + radius, &mut best);
                    }
                }
                if best > worst.0 {
                    worst = (best, f);
                }
            }
            worst
        }
    }
}

impl ProductGrid {
    fn n_v(&self) -> u32 {
        self.base.n_v
    }

    /// Per-column interval dilation: every member contributes its base ball
    /// times an ordinate interval, merged column by column.
    fn dilate_by_columns(&self, ids: &[u32], r: f64) -> Vec<u32> {
        let nv = self.n_v() as i64;
        let kv = GridSpec::steps_within(r, self.base.h_v).max(0);
        let ncols = self.base.len();
        let mut intervals: Vec<Vec<(u32, u32)>> = vec![Vec::new(); ncols];
        for &id in ids {
            let col = id / self.n_v();
            let level = (id % self.n_v()) as i64;
            let lo = (level - kv).max(0) as u32;
            let hi = ((level + kv).min(nv - 1)) as u32;
            if self.base.dim == 1 {
                let kb = GridSpec::steps_within(r, self.base.h).max(0);
                let c0 = (col as i64 - kb).max(0) as u32;
                let c1 = ((col as i64 + kb).min(self.base.n[0] as i64 - 1)) as u32;
                for c in c0..=c1 {
                    intervals[c as usize].push((lo, hi));
                }
            } else {
                for b in self
                    .base
                    .ball_ids(self.base.point(col), r, false)
                {
                    intervals[b as usize].push((lo, hi));
                }
            }
        }
        let mut out = Vec::new();
        for (c, ivs) in intervals.iter_mut().enumerate() {
            if ivs.is_empty() {
                continue;
            }
            ivs.sort_unstable();
            let colbase = c as u32 * self.n_v();
            let mut cur = ivs[0];
            for &(lo, hi) in ivs.iter().skip(1) {
                if lo <= cur.1 + 1 {
                    cur.1 = cur.1.max(hi);
                } else {
                    for l in cur.0..=cur.1 {
                        out.push(colbase + l);
                    }
                    cur = (lo, hi);
                }
            }
            for l in cur.0..=cur.1 {
                out.push(colbase + l);
            }
        }
        out
    }
}

impl Carrier for ProductGrid {
    type Point = ProductPoint;

    fn len(&self) -> usize {
        self.base.len() * self.n_v() as usize
    }

    fn id_of(&self, p: ProductPoint) -> u32 {
        self.base.id_of(p.base) * self.n_v() + p.level
    }

    fn point(&self, id: u32) -> ProductPoint {
        ProductPoint {
            base: self.base.point(id / self.n_v()),
            level: id % self.n_v(),
        }
    }

    fn contains(&self, p: ProductPoint) -> bool {
        self.base.contains(p.base) && p.level < self.n_v()
    }

    fn dist(&self, p: ProductPoint, q: ProductPoint) -> f64 {
        assert!(
            self.contains(p) && self.contains(q),
            "dist: point does not belong to this product grid"
        );
        let dv = (p.level as f64 - q.level as f64).abs() * self.base.h_v;
        self.base.dist_ix(p.base, q.base).max(dv)
    }

    fn resolution(&self) -> f64 {
        self.base.h.max(self.base.h_v)
    }

    fn coords_of(&self, p: ProductPoint) -> Vec<f64> {
        let mut c = self.base.coords_of(p.base);
        c.push(self.base.ordinate(p.level));
        c
    }

    fn ball_ids(&self, center: ProductPoint, r: f64, strict: bool) -> Vec<u32> {
        if r < 0.0 || (strict && r <= 0.0) {
            return Vec::new();
        }
        // max-metric ball = base ball x ordinate interval, exactly. The
        // level range is computed in step counts so that membership is
        // bit-consistent with the metric |dk| * h_v.
        let reach = if strict {
            GridSpec::steps_strictly_within(r, self.base.h_v)
        } else {
            GridSpec::steps_within(r, self.base.h_v)
        };
        if reach < 0 {
            return Vec::new();
        }
        let lo = (center.level as i64 - reach).max(0) as u32;
        let hi = ((center.level as i64 + reach).min(self.n_v() as i64 - 1)) as u32;
        if lo > hi {
            return Vec::new();
        }
        let mut out = Vec::new();
        for b in self.base.ball_ids(center.base, r, strict) {
            let colbase = b * self.n_v();
            for l in lo..=hi {
                out.push(colbase + l);
            }
        }
        out
    }

    fn dilate_ids(&self, ids: &[u32], r: f64) -> Vec<u32> {
        if ids.is_empty() || r < 0.0 {
            return Vec::new();
        }
        self.dilate_by_columns(ids, r)
    }

    fn max_min_dist(&self, from: &[u32], to: &[u32]) -> (f64, u32) {
        assert!(!from.is_empty() && !to.is_empty());
        let nv = self.n_v();
        let ncols = self.base.len();
        let mut cols: Vec<Vec<u32>> = vec![Vec::new(); ncols];
        for &t in to {
            cols[(t / nv) as usize].push(t % nv);
        }
        let one_d = self.base.dim == 1;
        let mut worst = (-1.0, from[0]);
        for &f in from {
            let (fc, fl) = ((f / nv) as i64, (f % nv) as i64);
            let mut best = f64::INFINITY;
            let consider = |c: i64, base_d: f64, best: &mut f64| {
                let col = &cols[c as usize];
                if col.is_empty() {
                    return;
                }
                let pos = col.partition_point(|&l| (l as i64) < fl);
                for &cand in &col[pos.saturating_sub(1)..(pos + 1).min(col.len())] {
                    let dv = (cand as i64 - fl).abs() as f64 * self.base.h_v;
                    let d = base_d.max(dv);
                    if d < *best {
                        *best = d;
                    }
                }
            };
            if one_d {
                // scan columns outward; base distance grows monotonically
                for radius in 0..self.base.n[0] as i64 {
                    let base_d = radius as f64 * self.base.h;
                    if base_d >= best {
                        break;
                    }
                    if radius == 0 {
                        consider(fc, 0.0, &mut best);
                    } else {
                        if fc - radius >= 0 {
                            consider(fc - radius, base_d, &mut best);
                        }
                        if fc + radius < ncols as i64 {
                            consider(fc + radius, base_d, &mut best);
                        }
                    }
                }
            } else {
                let fp = self.base.point(fc as u32);
                for c in 0..ncols as i64 {
                    if cols[c as usize].is_empty() {
                        continue;
                    }
                    let base_d = self.base.dist_ix(fp, self.base.point(c as u32));
                    if base_d >= best {
                        continue;
                    }
                    consider(c, base_d, &mut best);
                }
            }
            if best > worst.0 {
                worst = (best, f);
            }
        }
        worst
    }
}

/// Euclidean distance between two base lattice points.
pub fn dist(grid: &GridSpec, p: Point, q: Point) -> f64 {
    grid.dist(p, q)
}

/// Max metric on the product space: `max{d(x,y), |alpha-beta|}`.
pub fn product_dist(grid: &ProductGrid, p: ProductPoint, q: ProductPoint) -> f64 {
    grid.dist(p, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_line() -> GridSpec {
        GridSpec::line(-1.0, 1.0, 0.5, -1.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn grid_rejects_bad_extents() {
        assert!(GridSpec::line(0.0, 0.0, 0.1, 0.0, 1.0, 0.1).is_err());
        assert!(GridSpec::line(0.0, 1.0, 0.3, 0.0, 1.0, 0.1).is_err());
        assert!(GridSpec::line(1.0, 0.0, 0.1, 0.0, 1.0, 0.1).is_err());
        assert!(GridSpec::new(3, &[0.0; 3], &[1.0; 3], 0.1, 0.0, 1.0, 0.1).is_err());
        assert!(GridSpec::line(0.0, 1.0, -0.1, 0.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn dist_examples() {
        let g = GridSpec::line(0.0, 1.0, 0.1, 0.0, 1.0, 0.1).unwrap();
        let p = g.point_at(&[0.0]).unwrap();
        let q = g.point_at(&[0.3]).unwrap();
        assert_relative_eq!(g.dist(p, q), 0.3, max_relative = 1e-12);
        assert_eq!(g.dist(p, p), 0.0);
        assert_relative_eq!(g.dist(p, q), g.dist(q, p));
    }

    #[test]
    fn dist_2d_pythagorean() {
        let g = GridSpec::new(2, &[0.0, 0.0], &[6.0, 6.0], 1.0, 0.0, 1.0, 1.0).unwrap();
        let p = g.point_at(&[0.0, 0.0]).unwrap();
        let q = g.point_at(&[3.0, 4.0]).unwrap();
        assert_eq!(g.dist(p, q), 5.0);
    }

    #[test]
    fn product_dist_examples() {
        let g = GridSpec::line(0.0, 1.0, 0.1, -1.0, 1.0, 0.1).unwrap();
        let pg = g.product();
        let p = pg.id_of(ProductPoint {
            base: g.point_at(&[0.0]).unwrap(),
            level: g.level_at_or_above(0.5).unwrap(),
        });
        let q = pg.id_of(ProductPoint {
            base: g.point_at(&[0.3]).unwrap(),
            level: g.level_at_or_above(0.0).unwrap(),
        });
        let d = pg.dist(pg.point(p), pg.point(q));
        assert_relative_eq!(d, 0.5, max_relative = 1e-12);
        assert_eq!(pg.dist(pg.point(p), pg.point(p)), 0.0);

        let g2 = GridSpec::new(2, &[0.0, 0.0], &[6.0, 6.0], 1.0, 0.0, 2.0, 1.0).unwrap();
        let pg2 = g2.product();
        let a = ProductPoint {
            base: g2.point_at(&[3.0, 0.0]).unwrap(),
            level: 1,
        };
        let b = ProductPoint {
            base: g2.point_at(&[0.0, 4.0]).unwrap(),
            level: 1,
        };
        assert_eq!(pg2.dist(a, b), 5.0);
    }

    #[test]
    fn ids_roundtrip_in_order() {
        let g = GridSpec::new(2, &[0.0, 0.0], &[1.0, 2.0], 0.5, 0.0, 1.0, 0.5).unwrap();
        let mut prev = None;
        for id in 0..g.len() as u32 {
            let p = g.point(id);
            assert_eq!(g.id_of(p), id);
            if let Some(pp) = prev {
                assert!(pp < p, "id order must match point order");
            }
            prev = Some(p);
        }
    }

    #[test]
    fn nearest_clamps_and_rounds() {
        let g = unit_line();
        assert_eq!(g.coord(g.nearest(&[0.6]))[0], 0.5);
        assert_eq!(g.coord(g.nearest(&[10.0]))[0], 1.0);
        assert_eq!(g.coord(g.nearest(&[-10.0]))[0], -1.0);
    }

    #[test]
    fn point_at_rejects_off_lattice() {
        let g = unit_line();
        assert!(g.point_at(&[0.25]).is_err());
        assert!(g.point_at(&[1.5]).is_err());
        assert!(g.point_at(&[0.5]).is_ok());
    }

    #[test]
    fn level_helpers_are_exact() {
        let g = unit_line();
        assert_eq!(g.level_at_or_above(-1.0), Some(0));
        assert_eq!(g.level_at_or_above(-0.75), Some(1));
        assert_eq!(g.level_at_or_above(-0.5), Some(1));
        assert_eq!(g.level_at_or_above(1.25), None);
        assert_eq!(g.level_at_or_below(1.25), Some(4));
        assert_eq!(g.level_at_or_below(-1.25), None);
        assert_eq!(g.level_at_or_below(0.25), Some(2));
    }

    #[test]
    fn steps_within_is_exact_at_boundaries() {
        assert_eq!(GridSpec::steps_within(0.5, 0.5), 1);
        assert_eq!(GridSpec::steps_within(0.49, 0.5), 0);
        assert_eq!(GridSpec::steps_within(1.0, 0.1), 10);
        assert_eq!(GridSpec::steps_within(-0.1, 0.5), -1);
    }

    #[test]
    fn grid_spec_serde_roundtrip() {
        let g = GridSpec::new(2, &[-1.0, 0.0], &[1.0, 2.0], 0.5, -1.0, 1.0, 0.25).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        let back: GridSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(g, back);

        let one: GridSpec =
            serde_json::from_str(r#"{"dim":1,"lo":-1.0,"hi":1.0,"h":0.5,"value_lo":-1.0,"value_hi":1.0,"h_v":0.5}"#)
                .unwrap();
        assert_eq!(one, unit_line());
    }
}
