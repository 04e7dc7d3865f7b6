//! The Hamiltonian flux family: evaluation, derivatives, the local inverses
//! `G+`/`G-`, and structural-assumption validation.
//!
//! Two families are built in:
//!
//! * `offset-eikonal`: `H(p, a, g) = w_a*a + w_g*g - sqrt(1 + p^2)`. Globally
//!   Lipschitz in `p`, even, strictly unimodal, concave; passes every
//!   structural check on any box with `w_a*a + w_g*g > 1`.
//! * `quadratic-cap`: `H(p, a, g) = a*g - p^2`, restricted to `|p| <= p_guard`.
//!   Lipschitz only on the guarded range; validation reports the restriction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for box-membership checks on coefficients.
const BOX_TOL: f64 = 1e-9;
/// Bisection tolerance for the generic inverse.
const BISECT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum FluxFamily {
    /// `H = w_a*a + w_g*g - sqrt(1 + p^2)`; `weights = (w_a, w_g)`.
    OffsetEikonal { weights: (f64, f64) },
    /// `H = a*g - p^2` on `|p| <= p_guard`.
    QuadraticCap,
}

#[derive(Debug, Clone, Copy)]
pub enum Branch {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianModel {
    family: FluxFamily,
    a_range: (f64, f64),
    g_range: (f64, f64),
    p_guard: f64,
}

impl HamiltonianModel {
    pub fn new(
        family: FluxFamily,
        a_range: (f64, f64),
        g_range: (f64, f64),
        p_guard: Option<f64>,
    ) -> Result<Self> {
        if !(a_range.0.is_finite() && a_range.1.is_finite() && a_range.0 <= a_range.1) {
            return Err(Error::Input(format!("bad a-range {a_range:?}")));
        }
        if !(g_range.0.is_finite() && g_range.1.is_finite() && g_range.0 <= g_range.1) {
            return Err(Error::Input(format!("bad g-range {g_range:?}")));
        }
        let p_guard = p_guard.unwrap_or(match family {
            // globally well behaved; the guard only bounds searches
            FluxFamily::OffsetEikonal { .. } => 1e6,
            FluxFamily::QuadraticCap => 10.0,
        });
        if !(p_guard > 0.0) {
            return Err(Error::Input(format!("p_guard must be positive, got {p_guard}")));
        }
        Ok(HamiltonianModel {
            family,
            a_range,
            g_range,
            p_guard,
        })
    }

    /// The standard offset-eikonal model on the given coefficient box.
    pub fn offset_eikonal(a_range: (f64, f64), g_range: (f64, f64)) -> Self {
        Self::new(
            FluxFamily::OffsetEikonal { weights: (1.0, 1.0) },
            a_range,
            g_range,
            None,
        )
        .expect("valid ranges")
    }

    pub fn quadratic_cap(a_range: (f64, f64), g_range: (f64, f64), p_guard: f64) -> Result<Self> {
        Self::new(FluxFamily::QuadraticCap, a_range, g_range, Some(p_guard))
    }

    pub fn family(&self) -> FluxFamily {
        self.family
    }

    pub fn a_range(&self) -> (f64, f64) {
        self.a_range
    }

    pub fn g_range(&self) -> (f64, f64) {
        self.g_range
    }

    /// The guarded `p`-range half-width.
    pub fn p_guard(&self) -> f64 {
        self.p_guard
    }

    fn check_box(&self, a: f64, g: f64) -> Result<()> {
        if !a.is_finite() || !g.is_finite() {
            return Err(Error::Input(format!("non-finite coefficient a={a}, g={g}")));
        }
        if a < self.a_range.0 - BOX_TOL || a > self.a_range.1 + BOX_TOL {
            return Err(Error::Domain(format!(
                "a={a} outside [{}, {}]",
                self.a_range.0, self.a_range.1
            )));
        }
        if g < self.g_range.0 - BOX_TOL || g > self.g_range.1 + BOX_TOL {
            return Err(Error::Domain(format!(
                "g={g} outside [{}, {}]",
                self.g_range.0, self.g_range.1
            )));
        }
        Ok(())
    }

    /// `H(p, a, g)` without box checks; used by inner loops that have already
    /// validated their coefficients.
    pub fn flux(&self, p: f64, a: f64, g: f64) -> f64 {
        match self.family {
            FluxFamily::OffsetEikonal { weights: (wa, wg) } => {
                wa * a + wg * g - (1.0 + p * p).sqrt()
            }
            FluxFamily::QuadraticCap => a * g - p * p,
        }
    }

    /// `H(p, a, g)` with input checks.
    pub fn eval(&self, p: f64, a: f64, g: f64) -> Result<f64> {
        if !p.is_finite() {
            return Err(Error::Input(format!("non-finite p={p}")));
        }
        self.check_box(a, g)?;
        Ok(self.flux(p, a, g))
    }

    /// `H(0, a, g)`, the peak of the unimodal flux.
    pub fn peak(&self, a: f64, g: f64) -> f64 {
        self.flux(0.0, a, g)
    }

    /// `dH/dp`.
    pub fn dh_dp(&self, p: f64, _a: f64, _g: f64) -> f64 {
        match self.family {
            FluxFamily::OffsetEikonal { .. } => -p / (1.0 + p * p).sqrt(),
            FluxFamily::QuadraticCap => -2.0 * p,
        }
    }

    /// `d2H/dp2`.
    pub fn d2h_dp2(&self, p: f64, _a: f64, _g: f64) -> f64 {
        match self.family {
            FluxFamily::OffsetEikonal { .. } => -(1.0 + p * p).powf(-1.5),
            FluxFamily::QuadraticCap => -2.0,
        }
    }

    /// `dH/da` and `dH/dg` by central differences (used by validation only).
    fn dh_da(&self, p: f64, a: f64, g: f64) -> f64 {
        let h = 1e-6;
        (self.flux(p, a + h, g) - self.flux(p, a - h, g)) / (2.0 * h)
    }

    fn dh_dg(&self, p: f64, a: f64, g: f64) -> f64 {
        let h = 1e-6;
        (self.flux(p, a, g + h) - self.flux(p, a, g - h)) / (2.0 * h)
    }

    /// A global bound on `|dH/dp|` over the guarded range, used for CFL
    /// conditions and domain-of-influence estimates.
    pub fn max_wave_speed(&self, p_cap: f64) -> f64 {
        let p = p_cap.abs().min(self.p_guard);
        match self.family {
            FluxFamily::OffsetEikonal { .. } => p / (1.0 + p * p).sqrt(),
            FluxFamily::QuadraticCap => 2.0 * p,
        }
    }

    /// The local inverse `G+`/`G-` of the flux: the `p >= 0` (resp. `p <= 0`)
    /// solution of `H(p, a, g) = h`.
    pub fn inverse(&self, h: f64, a: f64, g: f64, branch: Branch) -> Result<f64> {
        if !h.is_finite() {
            return Err(Error::Input(format!("non-finite flux value h={h}")));
        }
        self.check_box(a, g)?;
        let peak = self.peak(a, g);
        if h > peak + 1e-12 {
            return Err(Error::NoPreimage { h, peak, a, g });
        }
        let floor = self.flux(self.p_guard, a, g);
        if h < floor - 1e-12 {
            return Err(Error::Range {
                h,
                floor,
                p_guard: self.p_guard,
                a,
                g,
            });
        }
        let h = h.min(peak);
        let p = match self.family {
            FluxFamily::OffsetEikonal { .. } => {
                // peak + 1 - h = sqrt(1 + p^2)
                let s = peak + 1.0 - h;
                (s * s - 1.0).max(0.0).sqrt()
            }
            FluxFamily::QuadraticCap => (peak - h).max(0.0).sqrt(),
        };
        Ok(match branch {
            Branch::Plus => p,
            Branch::Minus => -p,
        })
    }

    /// Monotone bisection fallback for the inverse, on `[0, p_guard]` to
    /// tolerance 1e-12 in `p`. Kept as an independent route against the
    /// closed forms.
    pub fn inverse_bisect(&self, h: f64, a: f64, g: f64, branch: Branch) -> Result<f64> {
        self.check_box(a, g)?;
        let peak = self.peak(a, g);
        if h > peak + 1e-12 {
            return Err(Error::NoPreimage { h, peak, a, g });
        }
        let floor = self.flux(self.p_guard, a, g);
        if h < floor - 1e-12 {
            return Err(Error::Range {
                h,
                floor,
                p_guard: self.p_guard,
                a,
                g,
            });
        }
        let h = h.min(peak);
        let (mut lo, mut hi) = (0.0_f64, self.p_guard);
        // H is decreasing on [0, p_guard]: H(lo) >= h >= H(hi)
        for _ in 0..200 {
            if hi - lo <= BISECT_TOL {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.flux(mid, a, g) >= h {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p = 0.5 * (lo + hi);
        Ok(match branch {
            Branch::Plus => p,
            Branch::Minus => -p,
        })
    }

    /// Invert `a -> H(0, a, g)` on the model box by bisection.
    /// `H(0, ., g)` is non-decreasing; ties resolve to the lower `a`.
    pub fn alpha_inverse(&self, alpha: f64, g: f64) -> f64 {
        let (mut lo, mut hi) = self.a_range;
        if self.peak(lo, g) >= alpha {
            return lo;
        }
        if self.peak(hi, g) <= alpha {
            return hi;
        }
        for _ in 0..200 {
            if hi - lo <= BISECT_TOL * 0.01 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.peak(mid, g) < alpha {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Sampled validation of the structural assumptions; see
    /// [`AssumptionReport`].
    pub fn validate(&self, samples_per_axis: usize) -> Result<AssumptionReport> {
        if samples_per_axis < 2 {
            return Err(Error::Input(format!(
                "need at least 2 samples per axis, got {samples_per_axis}"
            )));
        }
        Ok(validate_model(self, samples_per_axis))
    }
}

/// One sampled check: pass flag, estimated constant where meaningful, and
/// witness points for failures.
#[derive(Debug, Clone)]
pub struct AssumptionCheck {
    pub passed: bool,
    pub constant: Option<f64>,
    pub witnesses: Vec<Witness>,
}

impl AssumptionCheck {
    fn pass(constant: Option<f64>) -> Self {
        AssumptionCheck {
            passed: true,
            constant,
            witnesses: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Witness {
    pub p: f64,
    pub a: f64,
    pub g: f64,
    pub detail: String,
}

/// Estimated curvature constants: on `|p| <= p_split` the flux has
/// `c0 <= -Hpp <= c_big`; outside it `c0 <= |Hp| <= c_big`.
#[derive(Debug, Clone, Copy)]
pub struct CurvatureConstants {
    pub c0: f64,
    pub c_big: f64,
    pub p_split: f64,
}

#[derive(Debug, Clone)]
pub struct AssumptionReport {
    /// Lipschitz continuity in the coefficients, weighted by `1 + |p|`.
    pub coeff_lipschitz: AssumptionCheck,
    /// Global Lipschitz continuity in `p` over the guarded range.
    pub p_lipschitz: AssumptionCheck,
    /// Monotonicity of the flux in `a` and in `g`.
    pub coeff_monotone: AssumptionCheck,
    /// Strict concavity at `p = 0` (and critical point there).
    pub concave_at_zero: AssumptionCheck,
    /// Evenness in `p` and strict unimodality.
    pub even_unimodal: AssumptionCheck,
    /// Linear growth of `|H|/p` at the far end of the range.
    pub growth: AssumptionCheck,
    /// `H(0, a, g)` bounded away from zero on the box (the singular mapping
    /// needs this).
    pub psi_guard: AssumptionCheck,
    pub curvature: CurvatureConstants,
    /// The `p`-range the checks were run on.
    pub guarded_range: (f64, f64),
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.coeff_lipschitz.passed
            && self.p_lipschitz.passed
            && self.coeff_monotone.passed
            && self.concave_at_zero.passed
            && self.even_unimodal.passed
            && self.growth.passed
            && self.psi_guard.passed
    }

    pub fn checks(&self) -> Vec<(&'static str, &AssumptionCheck)> {
        vec![
            ("coeff-lipschitz", &self.coeff_lipschitz),
            ("p-lipschitz", &self.p_lipschitz),
            ("coeff-monotone", &self.coeff_monotone),
            ("concave-at-zero", &self.concave_at_zero),
            ("even-unimodal", &self.even_unimodal),
            ("growth", &self.growth),
            ("psi-guard", &self.psi_guard),
        ]
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn validate_model(model: &HamiltonianModel, n: usize) -> AssumptionReport {
    let (a_lo, a_hi) = model.a_range;
    let (g_lo, g_hi) = model.g_range;
    let a_samples = linspace(a_lo, a_hi, n);
    let g_samples = linspace(g_lo, g_hi, n);

    // Base linear p-grid on [-p0, p0], plus a geometric tail out to the guard
    // so unbounded divided differences show up.
    let p0 = model.p_guard.min(10.0);
    let mut p_samples = linspace(-p0, p0, (2 * n + 1).max(5));
    let mut tail = p0 * 2.0;
    while tail <= model.p_guard {
        p_samples.push(tail);
        p_samples.push(-tail);
        tail *= 2.0;
    }
    if *p_samples.last().unwrap() < model.p_guard {
        p_samples.push(model.p_guard);
        p_samples.push(-model.p_guard);
    }
    p_samples.sort_by(f64::total_cmp);
    p_samples.dedup();

    // (1.5): |H(p,a,g) - H(p,a',g')| <= C (|a-a'| + |g-g'|)(1 + |p|)
    let mut c15: f64 = 0.0;
    let mut coeff_lip = AssumptionCheck::pass(None);
    for &p in &p_samples {
        for (i, &a) in a_samples.iter().enumerate() {
            for (j, &g) in g_samples.iter().enumerate() {
                let a2 = a_samples[(i + 1) % a_samples.len()];
                let g2 = g_samples[(j + 1) % g_samples.len()];
                let num = (model.flux(p, a, g) - model.flux(p, a2, g2)).abs();
                let den = ((a - a2).abs() + (g - g2).abs()) * (1.0 + p.abs());
                if den > 0.0 {
                    c15 = c15.max(num / den);
                }
            }
        }
    }
    coeff_lip.constant = Some(c15);

    // (1.6): divided differences in p; flag growth between the inner half of
    // the range and the full range.
    let mid_a = 0.5 * (a_lo + a_hi);
    let mid_g = 0.5 * (g_lo + g_hi);
    let mut c16_full: f64 = 0.0;
    let mut c16_half: f64 = 0.0;
    let mut worst_p = 0.0;
    for w in p_samples.windows(2) {
        let (p, q) = (w[0], w[1]);
        if q - p <= 0.0 {
            continue;
        }
        let slope = ((model.flux(q, mid_a, mid_g) - model.flux(p, mid_a, mid_g)) / (q - p)).abs();
        if slope > c16_full {
            c16_full = slope;
            worst_p = q;
        }
        if p.abs() <= 0.5 * model.p_guard && q.abs() <= 0.5 * model.p_guard {
            c16_half = c16_half.max(slope);
        }
    }
    let growth_ratio = if c16_half > 0.0 { c16_full / c16_half } else { 1.0 };
    let p_lipschitz = if growth_ratio > 1.2 {
        AssumptionCheck {
            passed: false,
            constant: Some(c16_full),
            witnesses: vec![Witness {
                p: worst_p,
                a: mid_a,
                g: mid_g,
                detail: format!(
                    "divided difference grows from {c16_half:.6e} on half range to {c16_full:.6e} on full range"
                ),
            }],
        }
    } else {
        AssumptionCheck::pass(Some(c16_full))
    };

    // (1.7): one-sided differences in a and g.
    let mut coeff_monotone = AssumptionCheck::pass(None);
    for &p in &p_samples {
        for &a in &a_samples {
            for &g in &g_samples {
                let da = model.dh_da(p, a.clamp(a_lo + 1e-6, a_hi - 1e-6), g);
                let dg = model.dh_dg(p, a, g.clamp(g_lo + 1e-6, g_hi - 1e-6));
                if da < -1e-10 || dg < -1e-10 {
                    coeff_monotone.passed = false;
                    coeff_monotone.witnesses.push(Witness {
                        p,
                        a,
                        g,
                        detail: format!("dH/da={da:.3e}, dH/dg={dg:.3e}"),
                    });
                }
            }
        }
    }

    // (1.8): second difference at p = 0, and critical point there.
    let mut concave = AssumptionCheck::pass(None);
    let eps = 1e-3;
    for &a in &a_samples {
        for &g in &g_samples {
            let d2 = (model.flux(eps, a, g) - 2.0 * model.flux(0.0, a, g)
                + model.flux(-eps, a, g))
                / (eps * eps);
            let d1 = (model.flux(eps, a, g) - model.flux(-eps, a, g)) / (2.0 * eps);
            if d2 >= -1e-8 || d1.abs() > 1e-8 {
                concave.passed = false;
                concave.witnesses.push(Witness {
                    p: 0.0,
                    a,
                    g,
                    detail: format!("second difference {d2:.3e}, first difference {d1:.3e}"),
                });
            }
        }
    }

    // (A.4): evenness and strict unimodality on samples.
    let mut even_unimodal = AssumptionCheck::pass(None);
    for &a in &a_samples {
        for &g in &g_samples {
            for &p in &p_samples {
                let gap = (model.flux(p, a, g) - model.flux(-p, a, g)).abs();
                if gap > 1e-12 {
                    even_unimodal.passed = false;
                    even_unimodal.witnesses.push(Witness {
                        p,
                        a,
                        g,
                        detail: format!("evenness violated by {gap:.3e}"),
                    });
                }
            }
            for w in p_samples.windows(2) {
                let (p, q) = (w[0], w[1]);
                if p < 0.0 && q <= 0.0 {
                    if model.flux(q, a, g) < model.flux(p, a, g) - 1e-12 {
                        even_unimodal.passed = false;
                        even_unimodal.witnesses.push(Witness {
                            p,
                            a,
                            g,
                            detail: "not increasing on the negative axis".into(),
                        });
                    }
                } else if p >= 0.0 && model.flux(q, a, g) > model.flux(p, a, g) + 1e-12 {
                    even_unimodal.passed = false;
                    even_unimodal.witnesses.push(Witness {
                        p,
                        a,
                        g,
                        detail: "not decreasing on the positive axis".into(),
                    });
                }
                // strictness away from the peak
                if p >= 1e-3 && q - p >= 1e-6 && model.flux(q, a, g) >= model.flux(p, a, g) {
                    even_unimodal.passed = false;
                    even_unimodal.witnesses.push(Witness {
                        p,
                        a,
                        g,
                        detail: "not strictly decreasing away from p = 0".into(),
                    });
                }
            }
        }
    }

    // (A.5): |H|/p at the largest sampled p.
    let p_max = model.p_guard;
    let mut growth_c = f64::INFINITY;
    for &a in &a_samples {
        for &g in &g_samples {
            growth_c = growth_c.min(model.flux(p_max, a, g).abs() / p_max);
        }
    }
    let growth = if growth_c > 1e-6 {
        AssumptionCheck::pass(Some(growth_c))
    } else {
        AssumptionCheck {
            passed: false,
            constant: Some(growth_c),
            witnesses: vec![Witness {
                p: p_max,
                a: a_lo,
                g: g_lo,
                detail: format!("|H|/p = {growth_c:.3e} at the end of the range"),
            }],
        }
    };

    // Singular-mapping guard: H(0, a, g) bounded away from 0.
    let mut psi_guard = AssumptionCheck::pass(None);
    let mut min_peak = f64::INFINITY;
    for &a in &a_samples {
        for &g in &g_samples {
            let peak = model.peak(a, g);
            min_peak = min_peak.min(peak.abs());
            if peak <= 1e-9 {
                psi_guard.passed = false;
                psi_guard.witnesses.push(Witness {
                    p: 0.0,
                    a,
                    g,
                    detail: format!("H(0, a, g) = {peak:.6e}"),
                });
            }
        }
    }
    psi_guard.constant = Some(min_peak);

    // Curvature constants: split the range at min(1, p_guard/2).
    let p_split = model.p_guard.min(1.0).min(0.5 * model.p_guard);
    let mut c0 = f64::INFINITY;
    let mut c_big: f64 = 0.0;
    for &a in &a_samples {
        for &g in &g_samples {
            for &p in &p_samples {
                if p.abs() <= p_split {
                    let k = -model.d2h_dp2(p, a, g);
                    c0 = c0.min(k);
                    c_big = c_big.max(k);
                } else {
                    let s = model.dh_dp(p, a, g).abs();
                    c0 = c0.min(s);
                    c_big = c_big.max(s);
                }
            }
        }
    }

    AssumptionReport {
        coeff_lipschitz: coeff_lip,
        p_lipschitz,
        coeff_monotone,
        concave_at_zero: concave,
        even_unimodal,
        growth,
        psi_guard,
        curvature: CurvatureConstants { c0, c_big, p_split },
        guarded_range: (-model.p_guard, model.p_guard),
    }
}
