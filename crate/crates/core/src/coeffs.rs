//! Piecewise-constant coefficient approximations `a^d`, `g^d`, `p0^d` built
//! from user-supplied piecewise expressions.
//!
//! Discretization samples at cell midpoints, inserts every declared jump as an
//! exact breakpoint, and never increases total variation: midpoint samples of
//! a piecewise-monotone function are a subsequence of its values. The BV bound
//! is asserted against a dense sampling rather than enforced by clamping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expression;

/// A piecewise-constant function on a bounded interval, extended by its
/// boundary values outside.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstantFn {
    /// Strictly increasing interior breakpoints.
    breakpoints: Vec<f64>,
    /// One value per interval; `values.len() == breakpoints.len() + 1`.
    values: Vec<f64>,
    domain: (f64, f64),
}

impl PiecewiseConstantFn {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>, domain: (f64, f64)) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::Input(format!(
                "value count {} does not match breakpoint count {} + 1",
                values.len(),
                breakpoints.len()
            )));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Input("breakpoints not strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite value".into()));
        }
        Ok(PiecewiseConstantFn {
            breakpoints,
            values,
            domain,
        })
    }

    pub fn constant(value: f64, domain: (f64, f64)) -> Self {
        PiecewiseConstantFn {
            breakpoints: Vec::new(),
            values: vec![value],
            domain,
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// Right-continuous evaluation: the value on `[b_i, b_{i+1})`.
    pub fn value_at(&self, x: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&b| b <= x);
        self.values[idx]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sum of |jumps|.
    pub fn total_variation(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    /// Jump positions together with (left, right) values, zero jumps skipped.
    pub fn jumps(&self) -> Vec<(f64, f64, f64)> {
        self.breakpoints
            .iter()
            .enumerate()
            .filter(|&(i, _)| self.values[i] != self.values[i + 1])
            .map(|(i, &b)| (b, self.values[i], self.values[i + 1]))
            .collect()
    }

    /// Exact L1 distance to `other` over `window`.
    pub fn l1_distance(&self, other: &PiecewiseConstantFn, window: (f64, f64)) -> f64 {
        let mut cuts: Vec<f64> = vec![window.0, window.1];
        cuts.extend(self.breakpoints.iter().filter(|&&b| b > window.0 && b < window.1));
        cuts.extend(other.breakpoints.iter().filter(|&&b| b > window.0 && b < window.1));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                (self.value_at(mid) - other.value_at(mid)).abs() * (w[1] - w[0])
            })
            .sum()
    }

    /// Exact integral over `window`.
    pub fn integral(&self, window: (f64, f64)) -> f64 {
        let mut cuts: Vec<f64> = vec![window.0, window.1];
        cuts.extend(self.breakpoints.iter().filter(|&&b| b > window.0 && b < window.1));
        cuts.sort_by(f64::total_cmp);
        cuts.windows(2)
            .map(|w| self.value_at(0.5 * (w[0] + w[1])) * (w[1] - w[0]))
            .sum()
    }

    /// Merge adjacent intervals with bitwise-equal values.
    pub fn simplified(&self) -> PiecewiseConstantFn {
        let mut breakpoints = Vec::new();
        let mut values = vec![self.values[0]];
        for (i, &b) in self.breakpoints.iter().enumerate() {
            if self.values[i + 1] != *values.last().unwrap() {
                breakpoints.push(b);
                values.push(self.values[i + 1]);
            }
        }
        PiecewiseConstantFn {
            breakpoints,
            values,
            domain: self.domain,
        }
    }
}

/// One piece of a piecewise definition: `expr` applies up to `up_to` (the next
/// declared jump), the last piece has `up_to = None`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Piece {
    pub expr: String,
    #[serde(default)]
    pub up_to: Option<f64>,
}

/// A coefficient description: expressions between declared jump points.
#[derive(Debug, Clone)]
pub struct CoefficientSpec {
    pieces: Vec<(Expression, Option<f64>)>,
    var: &'static str,
}

impl CoefficientSpec {
    /// Parse pieces with `var` ("x" or "t") as the free variable. Jump points
    /// must be strictly increasing.
    pub fn parse(pieces: &[Piece], var: &'static str) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::Input("coefficient needs at least one piece".into()));
        }
        let mut parsed = Vec::with_capacity(pieces.len());
        let mut last_jump = f64::NEG_INFINITY;
        for (i, piece) in pieces.iter().enumerate() {
            let expr = Expression::parse(&piece.expr, var)?;
            if let Some(j) = piece.up_to {
                if !j.is_finite() || j <= last_jump {
                    return Err(Error::Input(format!(
                        "piece {i}: jump point {j} not increasing"
                    )));
                }
                last_jump = j;
            } else if i + 1 != pieces.len() {
                return Err(Error::Input(format!(
                    "piece {i}: only the last piece may omit `up_to`"
                )));
            }
            parsed.push((expr, piece.up_to));
        }
        Ok(CoefficientSpec {
            pieces: parsed,
            var,
        })
    }

    pub fn constant(value: f64) -> Self {
        CoefficientSpec {
            pieces: vec![(
                Expression::parse(&format!("{value:e}"), "x").expect("literal"),
                None,
            )],
            var: "x",
        }
    }

    pub fn var(&self) -> &'static str {
        self.var
    }

    /// Declared jump points inside `domain`.
    pub fn jump_points(&self, domain: (f64, f64)) -> Vec<f64> {
        self.pieces
            .iter()
            .filter_map(|(_, j)| *j)
            .filter(|&j| j > domain.0 && j < domain.1)
            .collect()
    }

    /// Evaluate the underlying (possibly discontinuous) function; the piece
    /// owning `x` is the first one with `x < up_to`.
    pub fn eval(&self, x: f64) -> f64 {
        for (expr, up_to) in &self.pieces {
            match up_to {
                Some(j) if x < *j => return expr.eval(x),
                None => return expr.eval(x),
                _ => {}
            }
        }
        self.pieces.last().unwrap().0.eval(x)
    }

    /// Discretize onto a uniform mesh of width `h` with declared jumps
    /// inserted exactly.
    pub fn discretize(&self, domain: (f64, f64), h: f64) -> Result<PiecewiseConstantFn> {
        if !(h > 0.0) {
            return Err(Error::Input(format!("mesh width must be positive, got {h}")));
        }
        if !(domain.0.is_finite() && domain.1.is_finite() && domain.0 < domain.1) {
            return Err(Error::Input(format!("bad domain {domain:?}")));
        }
        let mut cuts: Vec<f64> = Vec::new();
        let n = ((domain.1 - domain.0) / h).ceil() as usize;
        for i in 1..n {
            cuts.push(domain.0 + h * i as f64);
        }
        cuts.extend(self.jump_points(domain));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
        cuts.retain(|&c| c > domain.0 + 1e-12 && c < domain.1 - 1e-12);

        let mut edges = vec![domain.0];
        edges.extend(cuts.iter());
        edges.push(domain.1);
        let mut values = Vec::with_capacity(edges.len() - 1);
        for w in edges.windows(2) {
            let v = self.eval(0.5 * (w[0] + w[1]));
            if !v.is_finite() {
                return Err(Error::Expr(format!(
                    "coefficient evaluates to {v} at {}",
                    0.5 * (w[0] + w[1])
                )));
            }
            values.push(v);
        }
        let pcf = PiecewiseConstantFn::new(edges[1..edges.len() - 1].to_vec(), values, domain)?
            .simplified();

        // BV bound check: variation of the sampled function may not exceed the
        // variation of a dense sampling that refines it.
        debug_assert!(
            pcf.total_variation() <= self.dense_variation(domain, h) + 1e-12,
            "midpoint sampling increased variation"
        );
        Ok(pcf)
    }

    /// Variation estimate from a dense sampling refined against the mesh.
    pub fn dense_variation(&self, domain: (f64, f64), h: f64) -> f64 {
        let fine = (h / 64.0).max((domain.1 - domain.0) / 65536.0);
        let mut xs: Vec<f64> = Vec::new();
        let mut x = domain.0 + fine * 0.5;
        while x < domain.1 {
            xs.push(x);
            x += fine;
        }
        for j in self.jump_points(domain) {
            xs.push(j - 1e-12);
            xs.push(j + 1e-12);
        }
        xs.sort_by(f64::total_cmp);
        let mut var = 0.0;
        for w in xs.windows(2) {
            var += (self.eval(w[1]) - self.eval(w[0])).abs();
        }
        var
    }
}

/// Build `p0` as forward differences of `u0` samples on the mesh: one slope
/// value per cell, jumps of `u0`'s derivative captured at the declared kinks.
pub fn p0_from_u0(u0: &CoefficientSpec, domain: (f64, f64), h: f64) -> Result<PiecewiseConstantFn> {
    if !(h > 0.0) {
        return Err(Error::Input(format!("mesh width must be positive, got {h}")));
    }
    let mut edges: Vec<f64> = vec![domain.0];
    let n = ((domain.1 - domain.0) / h).ceil() as usize;
    for i in 1..n {
        edges.push(domain.0 + h * i as f64);
    }
    edges.extend(u0.jump_points(domain));
    edges.push(domain.1);
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);

    let mut values = Vec::with_capacity(edges.len() - 1);
    for w in edges.windows(2) {
        values.push((u0.eval(w[1] - 1e-12) - u0.eval(w[0] + 1e-12)) / (w[1] - w[0]));
    }
    Ok(
        PiecewiseConstantFn::new(edges[1..edges.len() - 1].to_vec(), values, domain)?
            .simplified(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(pieces: &[(&str, Option<f64>)], var: &'static str) -> CoefficientSpec {
        let pieces: Vec<Piece> = pieces
            .iter()
            .map(|&(e, j)| Piece {
                expr: e.to_owned(),
                up_to: j,
            })
            .collect();
        CoefficientSpec::parse(&pieces, var).unwrap()
    }

    #[test]
    fn constant_discretizes_to_single_value() {
        let s = spec(&[("1.0", None)], "x");
        let f = s.discretize((0.0, 1.0), 0.3).unwrap();
        assert_eq!(f.values(), &[1.0]);
        assert_eq!(f.total_variation(), 0.0);
    }

    #[test]
    fn step_jump_captured_exactly() {
        let s = spec(&[("1.0", Some(0.5)), ("2.0", None)], "t");
        let f = s.discretize((0.0, 1.0), 0.3).unwrap();
        assert!(f.breakpoints().contains(&0.5));
        assert_eq!(f.value_at(0.49), 1.0);
        assert_eq!(f.value_at(0.5), 2.0);
        assert!((f.total_variation() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sine_l1_error_halves_with_mesh() {
        let s = spec(&[("1 + 0.25*sin(x)", None)], "x");
        let domain = (0.0, 2.0 * std::f64::consts::PI);
        let h = 0.4;
        let coarse = s.discretize(domain, h).unwrap();
        let fine = s.discretize(domain, h / 2.0).unwrap();
        // L1 error against a near-exact reference
        let reference = s.discretize(domain, h / 64.0).unwrap();
        let e_coarse = coarse.l1_distance(&reference, domain);
        let e_fine = fine.l1_distance(&reference, domain);
        let ratio = e_fine / e_coarse;
        assert!(
            (0.3..0.7).contains(&ratio),
            "expected ~0.5 reduction, got {ratio}"
        );
    }

    #[test]
    fn l1_consistency_bound() {
        let s = spec(&[("1 + 0.25*sin(x)", None)], "x");
        let domain = (0.0, 2.0 * std::f64::consts::PI);
        for &h in &[0.5, 0.25, 0.1] {
            let f = s.discretize(domain, h).unwrap();
            let reference = s.discretize(domain, h / 128.0).unwrap();
            let err = f.l1_distance(&reference, domain);
            let bv = s.dense_variation(domain, h);
            assert!(
                err <= bv * h + 1e-6,
                "h={h}: L1 error {err} exceeds BV*h = {}",
                bv * h
            );
        }
    }

    #[test]
    fn bv_bound_respected() {
        let s = spec(
            &[("1 + 0.25*sin(3*x)", Some(2.0)), ("1.8", None)],
            "x",
        );
        let exact_var = s.dense_variation((0.0, 4.0), 0.01);
        for &h in &[0.5, 0.17, 0.05] {
            let f = s.discretize((0.0, 4.0), h).unwrap();
            assert!(
                f.total_variation() <= exact_var + 1e-12,
                "h={h}: {} > {exact_var}",
                f.total_variation()
            );
        }
    }

    #[test]
    fn jump_one_sided_values_match() {
        let s = spec(&[("x", Some(1.0)), ("x + 3", None)], "x");
        let f = s.discretize((0.0, 2.0), 0.25).unwrap();
        let (pos, left, right) = f
            .jumps()
            .into_iter()
            .find(|&(b, _, _)| (b - 1.0).abs() < 1e-12)
            .expect("declared jump present");
        assert_eq!(pos, 1.0);
        // midpoint samples of x on the adjacent cells
        assert!((left - 0.875).abs() < 1e-12);
        assert!((right - (1.125 + 3.0)).abs() < 1e-12);
    }

    #[test]
    fn p0_from_linear_u0_is_constant_slope() {
        let u0 = spec(&[("0.5*x", None)], "x");
        let p0 = p0_from_u0(&u0, (-1.0, 1.0), 0.3).unwrap();
        for v in p0.values() {
            assert!((v - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn p0_from_kinked_u0_captures_slope_jump() {
        // |x|-like kink at 0 declared as a piece boundary
        let u0 = spec(&[("-x", Some(0.0)), ("x", None)], "x");
        let p0 = p0_from_u0(&u0, (-1.0, 1.0), 0.4).unwrap();
        assert!((p0.value_at(-0.5) + 1.0).abs() < 1e-9);
        assert!((p0.value_at(0.5) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn value_at_is_right_continuous() {
        let f = PiecewiseConstantFn::new(vec![0.0], vec![1.0, 2.0], (-1.0, 1.0)).unwrap();
        assert_eq!(f.value_at(-1e-15), 1.0);
        assert_eq!(f.value_at(0.0), 2.0);
    }
}
