//! Closed sets as sorted id vectors over a carrier lattice, hit-or-miss
//! predicates, excess (one-sided Hausdorff) discrepancies, and numerical
//! Painleve-Kuratowski limits with the derived Fell convergence checks.
//!
//! The outer limit of a sequence is realized as "within tol of some tail
//! element", the inner limit as "within tol of every tail element"; on
//! convergent sequences both coincide with the tol-dilated limit set. The
//! tail window length is a report parameter so studies can show when the
//! surrogate stabilizes.

use crate::carrier::{Carrier, GridSpec, Point};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HyperspaceError {
    #[error("sequence of sets is empty")]
    EmptySequence,
    #[error("tail_start {tail_start} is out of range for a sequence of length {len}")]
    TailOutOfRange { tail_start: usize, len: usize },
    #[error("tolerance {tol} is below the lattice resolution {resolution}")]
    TolBelowResolution { tol: f64, resolution: f64 },
    #[error("sets live on different grids")]
    CarrierMismatch,
    #[error("id {0} is out of range for this carrier")]
    IdOutOfRange(u32),
    #[error("a base element needs at least one missing ball")]
    NoMissingBalls,
    #[error("ball radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("cannot parse serialized set data: {0}")]
    BadSerialization(String),
}

/// Finite closed set over a carrier lattice, stored as sorted canonical ids.
///
/// Set equality, union and intersection are exact at the member level; no
/// tolerance is involved anywhere in this type.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedSet<C: Carrier> {
    carrier: C,
    ids: Vec<u32>,
}

impl<C: Carrier> ClosedSet<C> {
    pub fn empty(carrier: &C) -> Self {
        ClosedSet {
            carrier: carrier.clone(),
            ids: Vec::new(),
        }
    }

    pub fn full(carrier: &C) -> Self {
        ClosedSet {
            carrier: carrier.clone(),
            ids: (0..carrier.len() as u32).collect(),
        }
    }

    pub fn from_ids(carrier: &C, mut ids: Vec<u32>) -> Result<Self, HyperspaceError> {
        ids.sort_unstable();
        ids.dedup();
        if let Some(&last) = ids.last() {
            if last as usize >= carrier.len() {
                return Err(HyperspaceError::IdOutOfRange(last));
            }
        }
        Ok(ClosedSet {
            carrier: carrier.clone(),
            ids,
        })
    }

    /// Caller guarantees `ids` sorted, deduplicated, and in range.
    pub(crate) fn from_sorted_ids(carrier: &C, ids: Vec<u32>) -> Self {
        debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(ids.last().is_none_or(|&l| (l as usize) < carrier.len()));
        ClosedSet {
            carrier: carrier.clone(),
            ids,
        }
    }

    pub fn from_points(
        carrier: &C,
        points: impl IntoIterator<Item = C::Point>,
    ) -> Result<Self, HyperspaceError> {
        let mut ids = Vec::new();
        for p in points {
            if !carrier.contains(p) {
                return Err(HyperspaceError::CarrierMismatch);
            }
            ids.push(carrier.id_of(p));
        }
        Self::from_ids(carrier, ids)
    }

    pub fn carrier(&self) -> &C {
        &self.carrier
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains_id(&self, id: u32) -> bool {
        self.ids.binary_search(&id).is_ok()
    }

    pub fn contains(&self, p: C::Point) -> bool {
        self.carrier.contains(p) && self.contains_id(self.carrier.id_of(p))
    }

    pub fn points(&self) -> Vec<C::Point> {
        self.ids.iter().map(|&i| self.carrier.point(i)).collect()
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        assert_eq!(self.carrier, other.carrier, "is_subset_of: grid mismatch");
        let mut j = 0usize;
        for &id in &self.ids {
            while j < other.ids.len() && other.ids[j] < id {
                j += 1;
            }
            if j >= other.ids.len() || other.ids[j] != id {
                return false;
            }
        }
        true
    }

    pub fn union(&self, other: &Self) -> Self {
        assert_eq!(self.carrier, other.carrier, "union: grid mismatch");
        let mut ids = Vec::with_capacity(self.ids.len() + other.ids.len());
        let (mut i, mut j) = (0, 0);
        while i < self.ids.len() && j < other.ids.len() {
            match self.ids[i].cmp(&other.ids[j]) {
                std::cmp::Ordering::Less => {
                    ids.push(self.ids[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    ids.push(other.ids[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    ids.push(self.ids[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        ids.extend_from_slice(&self.ids[i..]);
        ids.extend_from_slice(&other.ids[j..]);
        ClosedSet {
            carrier: self.carrier.clone(),
            ids,
        }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        assert_eq!(self.carrier, other.carrier, "intersection: grid mismatch");
        let mut ids = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.ids.len() && j < other.ids.len() {
            match self.ids[i].cmp(&other.ids[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    ids.push(self.ids[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        ClosedSet {
            carrier: self.carrier.clone(),
            ids,
        }
    }

    /// Serialized form: the sorted list of lattice indices as a JSON array.
    pub fn to_index_json(&self) -> String {
        serde_json::to_string(&self.ids).expect("id vector serializes")
    }

    pub fn from_index_json(carrier: &C, s: &str) -> Result<Self, HyperspaceError> {
        let ids: Vec<u32> = serde_json::from_str(s)
            .map_err(|e| HyperspaceError::BadSerialization(e.to_string()))?;
        Self::from_ids(carrier, ids)
    }

    /// One lattice index per line, sorted; the CSV twin of `to_index_json`.
    pub fn to_index_csv(&self) -> String {
        let mut out = String::from("index\n");
        for id in &self.ids {
            out.push_str(&id.to_string());
            out.push('\n');
        }
        out
    }
}

/// Closed ball around `center` as a set: all lattice points within `r`.
/// Empty when `r < 0`.
pub fn closed_ball<C: Carrier>(carrier: &C, center: C::Point, r: f64) -> ClosedSet<C> {
    assert!(carrier.contains(center), "ball center off grid");
    ClosedSet::from_sorted_ids(carrier, carrier.ball_ids(center, r, false))
}

/// Open ball on the lattice: strict inequality `dist < r`. This keeps the
/// combinatorial distinction between a ball and its closure.
pub fn open_ball<C: Carrier>(carrier: &C, center: C::Point, r: f64) -> ClosedSet<C> {
    assert!(carrier.contains(center), "ball center off grid");
    ClosedSet::from_sorted_ids(carrier, carrier.ball_ids(center, r, true))
}

/// True iff `f` and `a` intersect.
pub fn hits<C: Carrier>(f: &ClosedSet<C>, a: &ClosedSet<C>) -> bool {
    assert_eq!(f.carrier, a.carrier, "hits: grid mismatch");
    let (mut i, mut j) = (0, 0);
    while i < f.ids.len() && j < a.ids.len() {
        match f.ids[i].cmp(&a.ids[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// True iff `f` and `a` are disjoint.
pub fn misses<C: Carrier>(f: &ClosedSet<C>, a: &ClosedSet<C>) -> bool {
    !hits(f, a)
}

/// One-sided discrepancy `sup_{x in F} dist(x, G)`, the numerical surrogate
/// for inclusion of F in G up to a tolerance.
///
/// Conventions: 0 when `F` is empty, infinite when `F` is nonempty and `G`
/// is empty.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Excess {
    Finite(f64),
    Infinite,
}

impl Excess {
    pub fn within(self, tol: f64) -> bool {
        match self {
            Excess::Finite(v) => v <= tol,
            Excess::Infinite => false,
        }
    }

    pub fn as_finite(self) -> Option<f64> {
        match self {
            Excess::Finite(v) => Some(v),
            Excess::Infinite => None,
        }
    }
}

impl Serialize for Excess {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Excess::Finite(v) => serializer.serialize_f64(*v),
            Excess::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Excess {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Tag(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Num(v) => Ok(Excess::Finite(v)),
            Repr::Tag(s) if s == "inf" => Ok(Excess::Infinite),
            Repr::Tag(s) => Err(D::Error::custom(format!("bad excess value {s:?}"))),
        }
    }
}

pub fn excess<C: Carrier>(f: &ClosedSet<C>, g: &ClosedSet<C>) -> Excess {
    excess_with_witness(f, g).0
}

/// Excess together with the farthest offending point of `f`, when one exists.
pub fn excess_with_witness<C: Carrier>(
    f: &ClosedSet<C>,
    g: &ClosedSet<C>,
) -> (Excess, Option<C::Point>) {
    assert_eq!(f.carrier, g.carrier, "excess: grid mismatch");
    if f.is_empty() {
        return (Excess::Finite(0.0), None);
    }
    if g.is_empty() {
        return (
            Excess::Infinite,
            Some(f.carrier.point(f.ids[0])),
        );
    }
    let (d, id) = f.carrier.max_min_dist(&f.ids, &g.ids);
    (Excess::Finite(d), Some(f.carrier.point(id)))
}

/// All lattice points within `r` of `s` (closed dilation).
pub fn dilate<C: Carrier>(s: &ClosedSet<C>, r: f64) -> ClosedSet<C> {
    ClosedSet::from_sorted_ids(&s.carrier, s.carrier.dilate_ids(&s.ids, r))
}

fn check_sequence<C: Carrier>(
    seq: &[ClosedSet<C>],
    tail_start: usize,
    tol: f64,
) -> Result<(), HyperspaceError> {
    if seq.is_empty() {
        return Err(HyperspaceError::EmptySequence);
    }
    if tail_start >= seq.len() {
        return Err(HyperspaceError::TailOutOfRange {
            tail_start,
            len: seq.len(),
        });
    }
    let carrier = &seq[0].carrier;
    if seq.iter().any(|s| &s.carrier != carrier) {
        return Err(HyperspaceError::CarrierMismatch);
    }
    let resolution = carrier.resolution();
    if tol < resolution {
        return Err(HyperspaceError::TolBelowResolution { tol, resolution });
    }
    Ok(())
}

/// Numerical outer limit over the tail window: every lattice point within
/// `tol` of at least one tail element. Empty tail elements are skipped; an
/// all-empty tail gives the empty set.
pub fn pk_limsup<C: Carrier>(
    seq: &[ClosedSet<C>],
    tail_start: usize,
    tol: f64,
) -> Result<ClosedSet<C>, HyperspaceError> {
    check_sequence(seq, tail_start, tol)?;
    let carrier = &seq[0].carrier;
    // min over n of dist(x, S_n) equals dist(x, union of the tail)
    let mut words = vec![0u64; carrier.len().div_ceil(64)];
    for s in &seq[tail_start..] {
        for &id in &s.ids {
            words[(id / 64) as usize] |= 1u64 << (id % 64);
        }
    }
    let mut union = Vec::new();
    for (w, &bits) in words.iter().enumerate() {
        let mut b = bits;
        while b != 0 {
            let t = b.trailing_zeros();
            union.push(w as u32 * 64 + t);
            b &= b - 1;
        }
    }
    Ok(ClosedSet::from_sorted_ids(
        carrier,
        carrier.dilate_ids(&union, tol),
    ))
}

/// Numerical inner limit over the tail window: every lattice point within
/// `tol` of every tail element. Any empty tail element forces the empty set.
pub fn pk_liminf<C: Carrier>(
    seq: &[ClosedSet<C>],
    tail_start: usize,
    tol: f64,
) -> Result<ClosedSet<C>, HyperspaceError> {
    check_sequence(seq, tail_start, tol)?;
    let carrier = &seq[0].carrier;
    let mut acc: Option<Vec<u32>> = None;
    for s in &seq[tail_start..] {
        let dilated = carrier.dilate_ids(&s.ids, tol);
        acc = Some(match acc {
            None => dilated,
            Some(prev) => {
                let mut out = Vec::with_capacity(prev.len().min(dilated.len()));
                let (mut i, mut j) = (0, 0);
                while i < prev.len() && j < dilated.len() {
                    match prev[i].cmp(&dilated[j]) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            out.push(prev[i]);
                            i += 1;
                            j += 1;
                        }
                    }
                }
                out
            }
        });
        if acc.as_ref().is_some_and(|a| a.is_empty()) {
            break;
        }
    }
    Ok(ClosedSet::from_sorted_ids(carrier, acc.unwrap_or_default()))
}

/// Verdict of a one-sided (upper) convergence check.
#[derive(Clone, Debug, PartialEq)]
pub struct UpperFellReport<C: Carrier> {
    pub converged: bool,
    /// excess(outer limit, limit set)
    pub excess: Excess,
    /// worst offending point of the outer limit when the check fails
    pub witness: Option<C::Point>,
    pub tol: f64,
}

/// Convergence in the upper topology: the numerical outer limit must be
/// contained in `limit` up to `tol`.
pub fn upper_fell_converges<C: Carrier>(
    seq: &[ClosedSet<C>],
    limit: &ClosedSet<C>,
    tail_start: usize,
    tol: f64,
) -> Result<UpperFellReport<C>, HyperspaceError> {
    if !seq.is_empty() && seq.first().map(|s| &s.carrier) != Some(&limit.carrier) {
        return Err(HyperspaceError::CarrierMismatch);
    }
    let outer = pk_limsup(seq, tail_start, tol)?;
    let (ex, witness) = excess_with_witness(&outer, limit);
    let converged = ex.within(tol);
    Ok(UpperFellReport {
        converged,
        excess: ex,
        witness: if converged { None } else { witness },
        tol,
    })
}

/// Two-sided convergence report: outer limit inside the limit set and the
/// limit set inside the inner limit, both up to `tol`.
#[derive(Clone, Debug, PartialEq)]
pub struct FellReport<C: Carrier> {
    pub converged: bool,
    pub outer_excess: Excess,
    pub outer_witness: Option<C::Point>,
    pub inner_excess: Excess,
    pub inner_witness: Option<C::Point>,
    pub tol: f64,
}

pub fn fell_converges<C: Carrier>(
    seq: &[ClosedSet<C>],
    limit: &ClosedSet<C>,
    tail_start: usize,
    tol: f64,
) -> Result<FellReport<C>, HyperspaceError> {
    if !seq.is_empty() && seq.first().map(|s| &s.carrier) != Some(&limit.carrier) {
        return Err(HyperspaceError::CarrierMismatch);
    }
    let outer = pk_limsup(seq, tail_start, tol)?;
    let inner = pk_liminf(seq, tail_start, tol)?;
    let (outer_excess, ow) = excess_with_witness(&outer, limit);
    let (inner_excess, iw) = excess_with_witness(limit, &inner);
    let converged = outer_excess.within(tol) && inner_excess.within(tol);
    Ok(FellReport {
        converged,
        outer_excess,
        outer_witness: ow.filter(|_| !outer_excess.within(tol)),
        inner_excess,
        inner_witness: iw.filter(|_| !inner_excess.within(tol)),
        tol,
    })
}

/// A ball of the countable hit-or-miss base, kept as center plus radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

/// Element of the countable base for the hit-or-miss topology: a set belongs
/// to it iff it misses every closed ball of `missing` and hits every open
/// ball of `hitting`.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseElement {
    missing: Vec<Ball>,
    hitting: Vec<Ball>,
}

impl BaseElement {
    pub fn new(missing: Vec<Ball>, hitting: Vec<Ball>) -> Result<Self, HyperspaceError> {
        if missing.is_empty() {
            return Err(HyperspaceError::NoMissingBalls);
        }
        for b in missing.iter().chain(hitting.iter()) {
            if b.radius.is_nan() || b.radius <= 0.0 {
                return Err(HyperspaceError::NonPositiveRadius(b.radius));
            }
        }
        Ok(BaseElement { missing, hitting })
    }

    pub fn missing(&self) -> &[Ball] {
        &self.missing
    }

    pub fn hitting(&self) -> &[Ball] {
        &self.hitting
    }

    pub fn to_json(&self, grid: &GridSpec) -> String {
        let ball = |b: &Ball| {
            serde_json::json!({
                "center": grid.coords_of(b.center),
                "radius": b.radius,
            })
        };
        serde_json::json!({
            "missing": self.missing.iter().map(ball).collect::<Vec<_>>(),
            "hitting": self.hitting.iter().map(ball).collect::<Vec<_>>(),
        })
        .to_string()
    }

    pub fn from_json(grid: &GridSpec, s: &str) -> Result<Self, HyperspaceError> {
        #[derive(Deserialize)]
        struct BallRepr {
            center: Vec<f64>,
            radius: f64,
        }
        #[derive(Deserialize)]
        struct Repr {
            missing: Vec<BallRepr>,
            hitting: Vec<BallRepr>,
        }
        let repr: Repr = serde_json::from_str(s)
            .map_err(|e| HyperspaceError::BadSerialization(e.to_string()))?;
        let conv = |v: Vec<BallRepr>| -> Result<Vec<Ball>, HyperspaceError> {
            v.into_iter()
                .map(|b| {
                    grid.point_at(&b.center)
                        .map(|center| Ball {
                            center,
                            radius: b.radius,
                        })
                        .map_err(|e| HyperspaceError::BadSerialization(e.to_string()))
                })
                .collect()
        };
        BaseElement::new(conv(repr.missing)?, conv(repr.hitting)?)
    }
}

/// Membership of `f` in the base element: miss all closed balls, hit all
/// open balls (strict inequality).
pub fn in_base_element(f: &ClosedSet<GridSpec>, b: &BaseElement) -> bool {
    let grid = f.carrier();
    let min_dist = |center: Point| -> Option<f64> {
        f.ids
            .iter()
            .map(|&id| grid.dist(grid.point(id), center))
            .min_by(f64::total_cmp)
    };
    for ball in &b.missing {
        match min_dist(ball.center) {
            Some(d) if d <= ball.radius => return false,
            _ => {}
        }
    }
    for ball in &b.hitting {
        match min_dist(ball.center) {
            Some(d) if d < ball.radius => {}
            _ => return false,
        }
    }
    true
}
