//! Extended-real-valued grid functions, infimum functionals, epigraphs in
//! the product lattice, and epigraph-based convergence of function
//! sequences.
//!
//! On a finite lattice every function is trivially lower semicontinuous;
//! the type stands for a sample of an lsc function on the continuous
//! window. Epigraphs are clipped to the ordinate window: values below it
//! fill the column from the bottom, values above it leave the column
//! empty. The clipping is harmless for hit tests against balls inside the
//! window, which is the only use.

use crate::carrier::{Carrier, GridSpec, Point, ProductGrid};
use crate::hyperspace::{closed_ball, fell_converges, ClosedSet, FellReport, HyperspaceError};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LscError {
    #[error("expected {expected} lattice values, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("value at lattice index {0} is missing or repeated")]
    BadIndex(u32),
    #[error("cannot parse {0:?} as an extended real")]
    BadValue(String),
    #[error("malformed csv line {0:?}")]
    BadLine(String),
}

/// Extended real: a finite double, `+inf`, or `-inf`. NaN is excluded by
/// construction, which makes the order total.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtReal(f64);

impl ExtReal {
    pub const POS_INF: ExtReal = ExtReal(f64::INFINITY);
    pub const NEG_INF: ExtReal = ExtReal(f64::NEG_INFINITY);

    pub fn new(x: f64) -> Self {
        assert!(!x.is_nan(), "extended real cannot be NaN");
        // normalize -0.0 so equality and total order agree
        ExtReal(if x == 0.0 { 0.0 } else { x })
    }

    pub fn finite(x: f64) -> Self {
        assert!(x.is_finite(), "finite() requires a finite value");
        ExtReal::new(x)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn is_pos_inf(self) -> bool {
        self.0 == f64::INFINITY
    }

    pub fn is_neg_inf(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// Translation by a finite constant; infinities absorb.
    pub fn offset(self, c: f64) -> Self {
        assert!(c.is_finite());
        if self.is_finite() {
            ExtReal::new(self.0 + c)
        } else {
            self
        }
    }
}

impl Eq for ExtReal {}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtReal {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl std::fmt::Display for ExtReal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_pos_inf() {
            f.write_str("+inf")
        } else if self.is_neg_inf() {
            f.write_str("-inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl std::str::FromStr for ExtReal {
    type Err = LscError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "+inf" | "inf" => Ok(ExtReal::POS_INF),
            "-inf" => Ok(ExtReal::NEG_INF),
            t => t
                .parse::<f64>()
                .ok()
                .filter(|v| !v.is_nan())
                .map(ExtReal::new)
                .ok_or_else(|| LscError::BadValue(s.to_string())),
        }
    }
}

/// Total extended-real function on the lattice, indexed by canonical ids.
#[derive(Clone, Debug, PartialEq)]
pub struct LscFunction {
    grid: GridSpec,
    values: Vec<ExtReal>,
}

impl LscFunction {
    pub fn from_fn(grid: &GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len() as u32)
            .map(|id| ExtReal::new(f(&grid.coords_of(grid.point(id)))))
            .collect();
        LscFunction {
            grid: *grid,
            values,
        }
    }

    pub fn from_values(grid: &GridSpec, values: Vec<ExtReal>) -> Result<Self, LscError> {
        if values.len() != grid.len() {
            return Err(LscError::WrongLength {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(LscFunction {
            grid: *grid,
            values,
        })
    }

    pub fn constant(grid: &GridSpec, v: ExtReal) -> Self {
        LscFunction {
            grid: *grid,
            values: vec![v; grid.len()],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn value(&self, p: Point) -> ExtReal {
        assert!(self.grid.contains(p), "value: point off grid");
        self.values[self.grid.id_of(p) as usize]
    }

    pub fn value_id(&self, id: u32) -> ExtReal {
        self.values[id as usize]
    }

    pub fn values(&self) -> &[ExtReal] {
        &self.values
    }

    pub fn set_value(&mut self, p: Point, v: ExtReal) {
        assert!(self.grid.contains(p), "set_value: point off grid");
        let id = self.grid.id_of(p);
        self.values[id as usize] = v;
    }

    /// CSV form `index,value` with `+inf`/`-inf` sentinels, one lattice
    /// point per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,value\n");
        for (id, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{id},{v}\n"));
        }
        out
    }

    pub fn from_csv(grid: &GridSpec, s: &str) -> Result<Self, LscError> {
        let mut values = vec![None; grid.len()];
        for line in s.lines().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let (idx, val) = line
                .split_once(',')
                .ok_or_else(|| LscError::BadLine(line.to_string()))?;
            let id: u32 = idx
                .trim()
                .parse()
                .map_err(|_| LscError::BadLine(line.to_string()))?;
            if id as usize >= grid.len() || values[id as usize].is_some() {
                return Err(LscError::BadIndex(id));
            }
            values[id as usize] = Some(val.parse::<ExtReal>()?);
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or(LscError::BadIndex(i as u32)))
            .collect::<Result<Vec<_>, _>>()?;
        LscFunction::from_values(grid, values)
    }
}

/// Infimum of `f` over `a`, attained when `a` is nonempty; `+inf` over the
/// empty set.
pub fn inf_over(f: &LscFunction, a: &ClosedSet<GridSpec>) -> ExtReal {
    assert_eq!(f.grid, *a.carrier(), "inf_over: grid mismatch");
    a.ids()
        .iter()
        .map(|&id| f.values[id as usize])
        .min()
        .unwrap_or(ExtReal::POS_INF)
}

/// Infimum over the whole lattice window.
pub fn global_inf(f: &LscFunction) -> ExtReal {
    f.values.iter().copied().min().unwrap_or(ExtReal::POS_INF)
}

/// Epigraph of `f` as a product-lattice set: all `(x, a)` with `f(x) <= a`,
/// clipped to the ordinate window.
pub fn epigraph(f: &LscFunction) -> ClosedSet<ProductGrid> {
    let grid = &f.grid;
    let product = grid.product();
    let n_v = grid.ordinate_len();
    let mut ids = Vec::new();
    for (col, v) in f.values.iter().enumerate() {
        let floor = if v.is_neg_inf() {
            Some(0)
        } else {
            grid.level_at_or_above(v.value())
        };
        if let Some(floor) = floor {
            let colbase = col as u32 * n_v;
            for level in floor..n_v {
                ids.push(colbase + level);
            }
        }
    }
    ClosedSet::from_sorted_ids(&product, ids)
}

/// Does the epigraph of `f` hit the closed product ball with base center
/// `x`, radius `r`, and ordinate center `alpha`? Evaluated through the
/// infimum functional: `inf over ball(x, r) of f <= r + alpha`.
pub fn epi_hits_product_ball(f: &LscFunction, x: Point, r: f64, alpha: f64) -> bool {
    assert!(r >= 0.0, "product ball radius must be nonnegative");
    let ball = closed_ball(&f.grid, x, r);
    inf_over(f, &ball) <= ExtReal::new(r + alpha)
}

/// Negation of [`epi_hits_product_ball`].
pub fn epi_misses_product_ball(f: &LscFunction, x: Point, r: f64, alpha: f64) -> bool {
    !epi_hits_product_ball(f, x, r, alpha)
}

/// Epigraph convergence of a function sequence, decided by the two-sided
/// set-convergence check on the product lattice.
pub fn epi_converges(
    seq: &[LscFunction],
    f: &LscFunction,
    tail_start: usize,
    tol: f64,
) -> Result<FellReport<ProductGrid>, HyperspaceError> {
    if seq.iter().any(|g| g.grid != f.grid) {
        return Err(HyperspaceError::CarrierMismatch);
    }
    let epis: Vec<_> = seq.iter().map(epigraph).collect();
    fell_converges(&epis, &epigraph(f), tail_start, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperspace::hits;

    fn grid() -> GridSpec {
        GridSpec::line(-1.0, 1.0, 0.5, -1.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn ext_real_total_order() {
        let vals = [
            ExtReal::NEG_INF,
            ExtReal::finite(-3.0),
            ExtReal::finite(0.0),
            ExtReal::finite(2.5),
            ExtReal::POS_INF,
        ];
        for w in vals.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert_eq!(ExtReal::new(-0.0), ExtReal::new(0.0));
        assert_eq!(ExtReal::new(-0.0).cmp(&ExtReal::new(0.0)), std::cmp::Ordering::Equal);
    }

    #[test]
    fn ext_real_parse_display_roundtrip() {
        for s in ["+inf", "-inf", "1.25", "-0.5"] {
            let v: ExtReal = s.parse().unwrap();
            let back: ExtReal = v.to_string().parse().unwrap();
            assert_eq!(v, back);
        }
        assert!("nan".parse::<ExtReal>().is_err());
    }

    #[test]
    fn inf_over_examples() {
        let g = grid();
        let f = LscFunction::from_fn(&g, |x| x[0] * x[0]);
        let ball = closed_ball(&g, g.point_at(&[0.0]).unwrap(), 1.0);
        assert_eq!(inf_over(&f, &ball), ExtReal::finite(0.0));
        assert_eq!(inf_over(&f, &ClosedSet::empty(&g)), ExtReal::POS_INF);

        let mut with_hole = f.clone();
        with_hole.set_value(g.point_at(&[0.0]).unwrap(), ExtReal::NEG_INF);
        assert_eq!(inf_over(&with_hole, &ball), ExtReal::NEG_INF);
    }

    #[test]
    fn inf_over_is_antitone_and_splits_unions() {
        let g = grid();
        let f = LscFunction::from_fn(&g, |x| (x[0] - 0.3) * (x[0] - 0.3));
        let small = closed_ball(&g, g.point_at(&[-1.0]).unwrap(), 0.5);
        let big = closed_ball(&g, g.point_at(&[-1.0]).unwrap(), 1.5);
        assert!(inf_over(&f, &small) >= inf_over(&f, &big));
        let other = closed_ball(&g, g.point_at(&[0.5]).unwrap(), 0.5);
        let both = small.union(&other);
        assert_eq!(
            inf_over(&f, &both),
            inf_over(&f, &small).min(inf_over(&f, &other))
        );
    }

    #[test]
    fn epigraph_of_zero_function() {
        let g = grid();
        let f = LscFunction::constant(&g, ExtReal::finite(0.0));
        let epi = epigraph(&f);
        let pg = g.product();
        // levels at ordinates 0.0, 0.5, 1.0 in every column
        assert_eq!(epi.len(), g.len() * 3);
        for col in 0..g.len() as u32 {
            for level in 0..g.ordinate_len() {
                let id = col * g.ordinate_len() + level;
                assert_eq!(epi.contains_id(id), g.ordinate(level) >= 0.0, "col {col} level {level}");
            }
        }
        assert_eq!(epi.carrier(), &pg);
    }

    #[test]
    fn epigraph_of_pos_inf_is_empty_and_neg_inf_fills() {
        let g = grid();
        assert!(epigraph(&LscFunction::constant(&g, ExtReal::POS_INF)).is_empty());
        let full = epigraph(&LscFunction::constant(&g, ExtReal::NEG_INF));
        assert_eq!(full.len(), g.product().len());
    }

    #[test]
    fn epigraph_is_antitone_in_the_function() {
        let g = grid();
        let f = LscFunction::from_fn(&g, |x| x[0]);
        let hi = LscFunction::from_fn(&g, |x| x[0] + 0.5);
        let epi_f = epigraph(&f);
        let epi_hi = epigraph(&hi);
        assert!(epi_hi.ids().iter().all(|id| epi_f.contains_id(*id)));
    }

    #[test]
    fn epi_hit_examples() {
        let g = GridSpec::line(-1.0, 1.0, 0.5, 0.0, 1.0, 0.5).unwrap();
        let sq = LscFunction::from_fn(&g, |x| x[0] * x[0]);
        assert!(epi_hits_product_ball(&sq, g.point_at(&[0.0]).unwrap(), 1.0, -0.75));
        assert!(epi_misses_product_ball(&sq, g.point_at(&[0.0]).unwrap(), 1.0, -2.0));
        let top = LscFunction::constant(&g, ExtReal::POS_INF);
        assert!(!epi_hits_product_ball(&top, g.point_at(&[0.0]).unwrap(), 1.0, 10.0));
        let c = LscFunction::constant(&g, ExtReal::finite(0.5));
        assert!(epi_hits_product_ball(&c, g.point_at(&[0.0]).unwrap(), 0.5, 0.0));
        // r = 0 keeps the ball a singleton; threshold sits below the value
        let z = LscFunction::constant(&g, ExtReal::finite(0.0));
        assert!(epi_misses_product_ball(&z, g.point_at(&[0.0]).unwrap(), 0.0, -0.5));
    }

    #[test]
    fn epi_hit_agrees_with_direct_epigraph_test() {
        let g = GridSpec::line(-1.0, 1.0, 0.25, -1.0, 1.0, 0.25).unwrap();
        let f = LscFunction::from_fn(&g, |x| x[0].sin());
        let pg = g.product();
        let epi = epigraph(&f);
        for (xc, rk, ak) in [
            (0.0, 0.5, 0.0),
            (0.5, 0.25, -0.5),
            (-0.75, 0.75, 0.25),
            (0.0, 0.0, 0.0),
        ] {
            let x = g.point_at(&[xc]).unwrap();
            let center = g.nearest_product(&[xc], ak);
            let ball = closed_ball(&pg, center, rk);
            assert_eq!(
                epi_hits_product_ball(&f, x, rk, ak),
                hits(&epi, &ball),
                "x={xc} r={rk} alpha={ak}"
            );
        }
    }

    #[test]
    fn epi_converges_examples() {
        let g = GridSpec::line(-2.0, 2.0, 0.1, -2.0, 4.0, 0.1).unwrap();
        let f = LscFunction::from_fn(&g, |x| x[0] * x[0]);
        let seq: Vec<_> = (1..=40)
            .map(|n| LscFunction::from_fn(&g, |x| x[0] * x[0] + 1.0 / n as f64))
            .collect();
        assert!(epi_converges(&seq, &f, 20, 0.2).unwrap().converged);

        let constant = vec![f.clone(); 10];
        assert!(epi_converges(&constant, &f, 5, 0.1).unwrap().converged);
    }

    #[test]
    fn epi_converges_localized_dip() {
        let g = GridSpec::line(-2.0, 2.0, 0.1, -2.0, 4.0, 0.1).unwrap();
        let seq: Vec<_> = (1..=40)
            .map(|n| {
                let mut f = LscFunction::constant(&g, ExtReal::finite(0.0));
                f.set_value(g.nearest(&[1.0 / n as f64]), ExtReal::finite(-1.0));
                f
            })
            .collect();
        let mut dip_limit = LscFunction::constant(&g, ExtReal::finite(0.0));
        dip_limit.set_value(g.nearest(&[0.0]), ExtReal::finite(-1.0));
        let flat = LscFunction::constant(&g, ExtReal::finite(0.0));
        assert!(epi_converges(&seq, &dip_limit, 20, 0.2).unwrap().converged);
        let bad = epi_converges(&seq, &flat, 20, 0.2).unwrap();
        assert!(!bad.converged, "dip sequence must not epi-converge to the flat limit");
    }

    #[test]
    fn csv_roundtrip_with_sentinels() {
        let g = grid();
        let mut f = LscFunction::from_fn(&g, |x| x[0]);
        f.set_value(g.point_at(&[0.0]).unwrap(), ExtReal::POS_INF);
        f.set_value(g.point_at(&[0.5]).unwrap(), ExtReal::NEG_INF);
        let back = LscFunction::from_csv(&g, &f.to_csv()).unwrap();
        assert_eq!(f, back);
        assert!(LscFunction::from_csv(&g, "index,value\n0,1.0\n").is_err());
    }
}
