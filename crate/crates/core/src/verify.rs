//! Independent verification of completed runs: Kruzkov entropy and weak-form
//! residuals (exact cell-wise integration over the front tessellation),
//! interface viscosity inequalities, a monotone finite-difference oracle, and
//! the contraction/comparison harness.

use std::collections::HashMap;
use std::sync::Arc;

use crate::coeffs::{CoefficientSpec, PiecewiseConstantFn};
use crate::error::{Error, Result};
use crate::grid::FluxGrid;
use crate::hj::HjSolution;
use crate::model::HamiltonianModel;
use crate::riemann::{self, WaveKind};
use crate::tracker::{EventLog, InitOptions, TrackerState};

/// A smooth compactly supported tensor-product bump
/// `phi(x, t) = B((x-x_c)/r_x) B((t-t_c)/r_t)` with
/// `B(s) = exp(1 - 1/(1-s^2))` on `|s| < 1`.
#[derive(Debug, Clone, Copy)]
pub struct BumpTestFn {
    pub x_c: f64,
    pub t_c: f64,
    pub r_x: f64,
    pub r_t: f64,
}

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

fn bump_deriv(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        let d = 1.0 - s * s;
        bump(s) * (-2.0 * s / (d * d))
    }
}

impl BumpTestFn {
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        bump((x - self.x_c) / self.r_x) * bump((t - self.t_c) / self.r_t)
    }

    pub fn dx(&self, x: f64, t: f64) -> f64 {
        bump_deriv((x - self.x_c) / self.r_x) / self.r_x * bump((t - self.t_c) / self.r_t)
    }

    pub fn dt(&self, x: f64, t: f64) -> f64 {
        bump((x - self.x_c) / self.r_x) * bump_deriv((t - self.t_c) / self.r_t) / self.r_t
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.x_c - self.r_x, self.x_c + self.r_x)
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.t_c - self.r_t, self.t_c + self.r_t)
    }

    /// Support contained in the open space-time window.
    pub fn supported_in(&self, window: (f64, f64), horizon: f64) -> bool {
        self.x_c - self.r_x > window.0
            && self.x_c + self.r_x < window.1
            && self.t_c + self.r_t < horizon
            && self.t_c - self.r_t > -horizon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadRule {
    /// Composite 10-point Gauss-Legendre panels.
    Gauss,
    /// Composite midpoint panels (cross-check rule).
    Midpoint,
}

// 10-point Gauss-Legendre nodes/weights on [-1, 1].
const GL_X: [f64; 10] = [
    -0.9739065285171717,
    -0.8650633666889845,
    -0.6794095682990244,
    -0.4333953941292472,
    -0.1488743389816312,
    0.1488743389816312,
    0.4333953941292472,
    0.6794095682990244,
    0.8650633666889845,
    0.9739065285171717,
];
const GL_W: [f64; 10] = [
    0.0666713443086881,
    0.1494513491505806,
    0.2190863625159820,
    0.2692667193099963,
    0.2955242247147529,
    0.2955242247147529,
    0.2692667193099963,
    0.2190863625159820,
    0.1494513491505806,
    0.0666713443086881,
];

/// Integrate `f` over `[lo, hi]` with panels no wider than `max_panel`.
fn line_integral(lo: f64, hi: f64, max_panel: f64, rule: QuadRule, mut f: impl FnMut(f64) -> f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let n = ((hi - lo) / max_panel).ceil().max(1.0) as usize;
    let h = (hi - lo) / n as f64;
    let mut total = 0.0;
    match rule {
        QuadRule::Gauss => {
            for i in 0..n {
                let a = lo + h * i as f64;
                let mid = a + 0.5 * h;
                for (xi, wi) in GL_X.iter().zip(GL_W.iter()) {
                    total += wi * f(mid + 0.5 * h * xi);
                }
            }
            total * 0.5 * h
        }
        QuadRule::Midpoint => {
            // many panels compensate the low order
            let m = n * 800;
            let h = (hi - lo) / m as f64;
            for i in 0..m {
                total += f(lo + h * (i as f64 + 0.5));
            }
            total * h
        }
    }
}

/// One trapezoidal space-time cell of the front tessellation: constant state,
/// bounded by two front trajectories (or the support clip) and two times.
struct Cell {
    t0: f64,
    t1: f64,
    xl0: f64,
    xl_speed: f64,
    xr0: f64,
    xr_speed: f64,
    state: (usize, usize),
}

impl Cell {
    fn xl(&self, t: f64) -> f64 {
        self.xl0 + self.xl_speed * (t - self.t0)
    }

    fn xr(&self, t: f64) -> f64 {
        self.xr0 + self.xr_speed * (t - self.t0)
    }
}

/// Enumerate the cells of one epoch clipped to the support box of `phi`.
fn epoch_cells(
    epoch: &crate::tracker::Epoch,
    phi: &BumpTestFn,
    horizon: f64,
    mut visit: impl FnMut(&Cell),
) {
    let (tp0, tp1) = phi.t_range();
    let t0 = epoch.t0.max(tp0).max(0.0);
    let t1 = epoch.t1.min(tp1).min(horizon);
    if t1 <= t0 {
        return;
    }
    let (xp0, xp1) = phi.x_range();
    let n = epoch.fronts.len();
    for i in 0..=n {
        let (xl0, xl_speed) = if i == 0 {
            (xp0, 0.0)
        } else {
            let f = &epoch.fronts[i - 1];
            (f.position(t0), f.speed)
        };
        let (xr0, xr_speed) = if i == n {
            (xp1, 0.0)
        } else {
            let f = &epoch.fronts[i];
            (f.position(t0), f.speed)
        };
        // skip cells that never meet the support
        let min_l = xl0.min(xl0 + xl_speed * (t1 - t0));
        let max_r = xr0.max(xr0 + xr_speed * (t1 - t0));
        if max_r < xp0 || min_l > xp1 {
            continue;
        }
        let state = if i == 0 {
            epoch.left_state
        } else {
            epoch.fronts[i - 1].right
        };
        visit(&Cell {
            t0,
            t1,
            xl0,
            xl_speed,
            xr0,
            xr_speed,
            state,
        });
    }
}

/// Boundary-reduced integral of `A phi_t + B phi_x` over one cell with
/// constant `A`, `B`: by Green's theorem it equals the counterclockwise
/// boundary integral of `phi (B dt - A dx)`.
fn cell_divergence(cell: &Cell, a_coef: f64, b_coef: f64, phi: &BumpTestFn, rule: QuadRule) -> f64 {
    // the bump is smooth but not analytic at its support edge; panels must be
    // fine for Gauss to resolve it
    let panel_x = phi.r_x * 0.1;
    let panel_t = phi.r_t * 0.1;
    let mut total = 0.0;
    // bottom, left to right: -A phi dx
    total += line_integral(cell.xl(cell.t0), cell.xr(cell.t0), panel_x, rule, |x| {
        -a_coef * phi.eval(x, cell.t0)
    });
    // right trajectory, upward: phi (B - A s) dt
    total += line_integral(cell.t0, cell.t1, panel_t, rule, |t| {
        phi.eval(cell.xr(t), t) * (b_coef - a_coef * cell.xr_speed)
    });
    // top, right to left: +A phi dx
    total += line_integral(cell.xl(cell.t1), cell.xr(cell.t1), panel_x, rule, |x| {
        a_coef * phi.eval(x, cell.t1)
    });
    // left trajectory, downward: -phi (B - A s) dt
    total -= line_integral(cell.t0, cell.t1, panel_t, rule, |t| {
        phi.eval(cell.xl(t), t) * (b_coef - a_coef * cell.xl_speed)
    });
    total
}

/// 2-D integral of `f(x, t) phi_x(x, t)` over a cell (used for the smooth
/// coefficient-error remainder of the weak form).
fn cell_area_integral(
    cell: &Cell,
    phi: &BumpTestFn,
    rule: QuadRule,
    mut f: impl FnMut(f64, f64) -> f64,
) -> f64 {
    line_integral(cell.t0, cell.t1, phi.r_t * 0.1, rule, |t| {
        let (lo, hi) = (cell.xl(t), cell.xr(t));
        line_integral(lo, hi, phi.r_x * 0.1, rule, |x| f(x, t) * phi.dx(x, t))
    })
}

/// Kruzkov constants to test: every state value occurring in the log, plus
/// midpoints of consecutive values.
pub fn entropy_c_values(log: &EventLog) -> Vec<f64> {
    let mut values: Vec<f64> = Vec::new();
    for epoch in &log.epochs {
        values.push(epoch.grid.state_p(epoch.left_state.0, epoch.left_state.1));
        for f in &epoch.fronts {
            values.push(epoch.grid.state_p(f.right.0, f.right.1));
        }
    }
    values.sort_by(f64::total_cmp);
    values.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    let mut out = values.clone();
    for w in values.windows(2) {
        out.push(0.5 * (w[0] + w[1]));
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Left side of the Kruzkov inequality for the discretized problem: expected
/// nonnegative (up to quadrature noise) for entropy solutions, negative for
/// forged inadmissible profiles.
pub fn entropy_residual(log: &EventLog, c: f64, phi: &BumpTestFn, rule: QuadRule) -> Result<f64> {
    if !phi.supported_in(log.window, log.horizon) {
        return Err(Error::Input("test function support leaves the window".into()));
    }
    let mut total = 0.0;
    for epoch in &log.epochs {
        let model = epoch.grid.model().clone();
        let g = epoch.g;
        epoch_cells(epoch, phi, log.horizon, |cell| {
            let (lvl, k) = cell.state;
            let p = epoch.grid.state_p(lvl, k);
            let h_p = epoch.grid.state_h(lvl, k);
            let a = epoch.grid.level(lvl).a;
            let a_coef = (p - c).abs();
            let b_coef = (p - c).signum() * (h_p - model.flux(c, a, g));
            total += cell_divergence(cell, a_coef, b_coef, phi, rule);
        });
        // coefficient jump terms at the stationary fronts
        let (tp0, tp1) = phi.t_range();
        let t0 = epoch.t0.max(tp0).max(0.0);
        let t1 = epoch.t1.min(tp1).min(log.horizon);
        if t1 <= t0 {
            continue;
        }
        for f in &epoch.fronts {
            if f.kind != WaveKind::A {
                continue;
            }
            let x_m = f.birth_x;
            let a_l = epoch.grid.level(f.left.0).a;
            let a_r = epoch.grid.level(f.right.0).a;
            let jump = (model.flux(c, a_r, g) - model.flux(c, a_l, g)).abs();
            total += jump
                * line_integral(t0, t1, phi.r_t * 0.1, rule, |t| phi.eval(x_m, t));
        }
    }
    Ok(total)
}

/// Absolute weak-form residual of the log against the original (possibly
/// smooth) coefficients; `O(delta + h)` by construction, and zero to
/// quadrature precision when the coefficients are already piecewise constant.
pub fn weak_residual(
    log: &EventLog,
    phi: &BumpTestFn,
    a_orig: &CoefficientSpec,
    g_orig: &CoefficientSpec,
    p0_orig: &CoefficientSpec,
    rule: QuadRule,
) -> Result<f64> {
    if !phi.supported_in(log.window, log.horizon) {
        return Err(Error::Input("test function support leaves the window".into()));
    }
    let mut total = 0.0;
    for epoch in &log.epochs {
        let model = epoch.grid.model().clone();
        let g_d = epoch.g;
        epoch_cells(epoch, phi, log.horizon, |cell| {
            let (lvl, k) = cell.state;
            let p = epoch.grid.state_p(lvl, k);
            let h_exact = epoch.grid.state_h(lvl, k);
            total += cell_divergence(cell, p, h_exact, phi, rule);
            // remainder against the original coefficients
            total += cell_area_integral(cell, phi, rule, |x, t| {
                model.flux(p, a_orig.eval(x), g_orig.eval(t)) - h_exact * 1.0
                    + (h_exact - model.flux(p, epoch.grid.level(lvl).a, g_d))
            });
        });
    }
    // initial trace, when the support reaches t = 0
    if phi.t_c - phi.r_t < 0.0 {
        let (x0, x1) = phi.x_range();
        total += line_integral(x0, x1, phi.r_x * 0.1, rule, |x| {
            phi.eval(x, 0.0) * p0_orig.eval(x)
        });
    }
    Ok(total.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KinkKind {
    /// `p'_r <= p'_l`: concave kink, subsolution inequality active.
    Concave,
    /// `p'_r > p'_l`: convex kink (pass-through), supersolution active.
    Convex,
}

#[derive(Debug, Clone)]
pub struct ViscosityViolation {
    pub time: f64,
    pub x: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct ViscosityReport {
    pub fronts_checked: usize,
    pub sub_checks: usize,
    pub sup_checks: usize,
    /// a-fronts whose states sit on the side facing the lower level.
    pub pass_through: usize,
    pub violations: Vec<ViscosityViolation>,
}

impl ViscosityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check the interface trace structure and the sub/supersolution inequalities
/// at every a-front epoch.
///
/// Traces must sit on one side of the flux peak (same-signed). For concave
/// kinks (`p'_r <= p'_l`) the subsolution inequality
/// `-H* + min{H(s, a_l), H(s, a_r)} <= 0` is checked for slopes `s` between
/// the traces; for convex kinks the supersolution counterpart with `max >= 0`.
pub fn interface_viscosity_check(log: &EventLog, slope_samples: usize) -> ViscosityReport {
    let mut report = ViscosityReport::default();
    let tol = 1e-9;
    for epoch in &log.epochs {
        let model = epoch.grid.model().clone();
        let g = epoch.g;
        for f in &epoch.fronts {
            if f.kind != WaveKind::A {
                continue;
            }
            report.fronts_checked += 1;
            let a_l = epoch.grid.level(f.left.0).a;
            let a_r = epoch.grid.level(f.right.0).a;
            let p_l = epoch.grid.state_p(f.left.0, f.left.1);
            let p_r = epoch.grid.state_p(f.right.0, f.right.1);
            let h_l = epoch.grid.state_h(f.left.0, f.left.1);
            let h_r = epoch.grid.state_h(f.right.0, f.right.1);
            if (h_l - h_r).abs() > riemann::FLUX_TOL {
                report.violations.push(ViscosityViolation {
                    time: epoch.t0,
                    x: f.birth_x,
                    detail: format!("flux mismatch {h_l} vs {h_r}"),
                });
                continue;
            }
            // same-sign trace structure (the solver invariant)
            if p_l * p_r < -1e-7 {
                report.violations.push(ViscosityViolation {
                    time: epoch.t0,
                    x: f.birth_x,
                    detail: format!("traces {p_l}, {p_r} straddle the peak"),
                });
                continue;
            }
            let kink = if p_r <= p_l + 1e-12 {
                KinkKind::Concave
            } else {
                report.pass_through += 1;
                KinkKind::Convex
            };
            let h_star = h_l;
            let (lo, hi) = (p_l.min(p_r), p_l.max(p_r));
            for i in 0..=slope_samples {
                let s = lo + (hi - lo) * i as f64 / slope_samples.max(1) as f64;
                let hl = model.flux(s, a_l, g);
                let hr = model.flux(s, a_r, g);
                match kink {
                    KinkKind::Concave => {
                        report.sub_checks += 1;
                        if -h_star + hl.min(hr) > tol {
                            report.violations.push(ViscosityViolation {
                                time: epoch.t0,
                                x: f.birth_x,
                                detail: format!(
                                    "subsolution: min flux at slope {s} exceeds {h_star}"
                                ),
                            });
                        }
                    }
                    KinkKind::Convex => {
                        report.sup_checks += 1;
                        if -h_star + hl.max(hr) < -tol {
                            report.violations.push(ViscosityViolation {
                                time: epoch.t0,
                                x: f.birth_x,
                                detail: format!(
                                    "supersolution: max flux at slope {s} below {h_star}"
                                ),
                            });
                        }
                    }
                }
            }
        }
    }
    report
}

/// Godunov flux for the unimodal (peak at zero) flux family.
pub fn godunov_flux(model: &HamiltonianModel, ul: f64, ur: f64, a: f64, g: f64) -> f64 {
    if ul <= ur {
        model.flux(ul, a, g).min(model.flux(ur, a, g))
    } else if ul >= 0.0 && ur <= 0.0 {
        model.flux(0.0, a, g)
    } else {
        model.flux(ul, a, g).max(model.flux(ur, a, g))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FdOracleConfig {
    pub dx: f64,
    pub cfl: f64,
}

impl FdOracleConfig {
    pub fn new(dx: f64) -> Self {
        FdOracleConfig { dx, cfl: 0.45 }
    }
}

#[derive(Debug, Clone)]
pub struct FdSolution {
    pub centers: Vec<f64>,
    pub values: Vec<f64>,
    pub dx: f64,
    pub steps: usize,
}

impl FdSolution {
    /// L1 distance to a tracked solution at time `t`.
    pub fn l1_distance_to_log(&self, log: &EventLog, t: f64) -> Result<f64> {
        let tracked = log.sample(t, &self.centers)?;
        Ok(self
            .values
            .iter()
            .zip(tracked.iter())
            .map(|(a, b)| (a - b).abs() * self.dx)
            .sum())
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs() * self.dx).sum()
    }
}

/// Explicit conservative monotone scheme: Godunov flux in the interior, the
/// exact interface Riemann flux at coefficient jumps, `g^d` sampled per step.
pub fn fd_oracle(
    p0: &PiecewiseConstantFn,
    a_fn: &PiecewiseConstantFn,
    g_fn: &PiecewiseConstantFn,
    model: &Arc<HamiltonianModel>,
    cfg: FdOracleConfig,
    window: (f64, f64),
    t_end: f64,
) -> Result<FdSolution> {
    if !(cfg.dx > 0.0) || !(cfg.cfl > 0.0) {
        return Err(Error::Config {
            path: "fd.dx/cfl".into(),
            reason: "must be positive".into(),
        });
    }
    let n = ((window.1 - window.0) / cfg.dx).round().max(2.0) as usize;
    let dx = (window.1 - window.0) / n as f64;
    let centers: Vec<f64> = (0..n).map(|i| window.0 + (i as f64 + 0.5) * dx).collect();
    let mut u: Vec<f64> = centers.iter().map(|&x| p0.value_at(x)).collect();
    let a: Vec<f64> = centers.iter().map(|&x| a_fn.value_at(x)).collect();

    // wave-speed bound over the guarded range: keeps the step independent of
    // the data, so the update is one fixed monotone scheme
    let lambda = model.max_wave_speed(model.p_guard()).max(1e-12);
    let dt_max = cfg.cfl * dx / lambda;
    if dt_max <= 0.0 {
        return Err(Error::Config {
            path: "fd.cfl".into(),
            reason: format!("CFL condition gives non-positive step (lambda = {lambda})"),
        });
    }

    let mut cache: HashMap<(u64, u64, u64, u64, u64), f64> = HashMap::new();
    let mut interface_flux = |ul: f64, ur: f64, al: f64, ar: f64, g: f64| -> Result<f64> {
        let key = (
            ul.to_bits(),
            ur.to_bits(),
            al.to_bits(),
            ar.to_bits(),
            g.to_bits(),
        );
        if let Some(&h) = cache.get(&key) {
            return Ok(h);
        }
        let bounds = riemann::riemann_bounds(model, ul, ur, al, ar, g)?;
        let cap = bounds.symmetric.max(ul.abs()).max(ur.abs()) + 0.5;
        let grid = FluxGrid::build(model, 0.1, &[al, ar], g, &[ul, ur], cap)?;
        let ll = grid.level_for_a(al)?;
        let lr = grid.level_for_a(ar)?;
        let kl = grid
            .find_state(ll, ul)
            .ok_or_else(|| Error::Input("oracle state missing".into()))?;
        let kr = grid
            .find_state(lr, ur)
            .ok_or_else(|| Error::Input("oracle state missing".into()))?;
        let fan = riemann::solve_interface(&grid, ll, lr, kl, kr)?;
        let wave = fan
            .waves
            .iter()
            .find(|w| w.kind == WaveKind::A)
            .ok_or_else(|| Error::Input("interface fan lost its a-wave".into()))?;
        let h = grid.state_h(wave.left.0, wave.left.1);
        cache.insert(key, h);
        Ok(h)
    };

    let mut t = 0.0;
    let mut steps = 0;
    let mut flux = vec![0.0; n + 1];
    while t < t_end - 1e-14 {
        let dt = dt_max.min(t_end - t);
        let g = g_fn.value_at(t);
        for i in 0..=n {
            let (ul, al) = if i == 0 { (u[0], a[0]) } else { (u[i - 1], a[i - 1]) };
            let (ur, ar) = if i == n { (u[n - 1], a[n - 1]) } else { (u[i], a[i]) };
            flux[i] = if al == ar {
                godunov_flux(model, ul, ur, al, g)
            } else {
                interface_flux(ul, ur, al, ar, g)?
            };
        }
        for i in 0..n {
            u[i] -= dt / dx * (flux[i + 1] - flux[i]);
        }
        t += dt;
        steps += 1;
    }
    Ok(FdSolution {
        centers,
        values: u,
        dx,
        steps,
    })
}

#[derive(Debug, Clone)]
pub struct ContractionReport {
    /// Max over sampled times of `sup |u - v|(t) - sup |u0 - v0|`.
    pub linf_gap_growth: f64,
    /// Max over sampled times of `||p - q||_1(t) - ||p0 - q0||_1`.
    pub l1_gap_growth: f64,
    /// `max (u - v)` over samples, for ordered pairs (`u0 <= v0`).
    pub comparison_excess: f64,
    pub initial_linf_gap: f64,
    pub initial_l1_gap: f64,
}

/// Run two initial data on a shared grid and measure contraction gaps.
#[allow(clippy::too_many_arguments)]
pub fn contraction_pair(
    model: &Arc<HamiltonianModel>,
    p0_u: &PiecewiseConstantFn,
    u0_ref_u: f64,
    p0_v: &PiecewiseConstantFn,
    u0_ref_v: f64,
    a_fn: &PiecewiseConstantFn,
    g_fn: &PiecewiseConstantFn,
    delta: f64,
    opts: &InitOptions,
    t_samples: &[f64],
) -> Result<ContractionReport> {
    let mut opts_u = opts.clone();
    opts_u.extra_p.extend_from_slice(p0_v.values());
    let mut opts_v = opts.clone();
    opts_v.extra_p.extend_from_slice(p0_u.values());

    let mut st_u = TrackerState::init(model, p0_u, a_fn, g_fn, delta, opts_u)?;
    st_u.run()?;
    let log_u = st_u.log().clone();
    let mut st_v = TrackerState::init(model, p0_v, a_fn, g_fn, delta, opts_v)?;
    st_v.run()?;
    let log_v = st_v.log().clone();

    let hj_u = HjSolution::new(&log_u, u0_ref_u)?;
    let hj_v = HjSolution::with_reference(&log_v, hj_u.x_ref(), u0_ref_v)?;

    let window = opts.window;
    let margin = 0.05 * (window.1 - window.0);
    let inner = (window.0 + margin, window.1 - margin);
    let gap_at = |t: f64| -> Result<(f64, f64, f64)> {
        // kinks of u - v: fronts of both runs, plus the window边 ends
        let mut xs = log_u.front_positions(t, inner);
        xs.extend(log_v.front_positions(t, inner));
        xs.push(inner.0);
        xs.push(inner.1);
        xs.push(hj_u.x_ref());
        let mut sup: f64 = 0.0;
        let mut signed_max = f64::NEG_INFINITY;
        for &x in &xs {
            let du = hj_u.eval(x, t)? - hj_v.eval(x, t)?;
            sup = sup.max(du.abs());
            signed_max = signed_max.max(du);
        }
        let l1 = log_u.l1_distance(&log_v, t, inner);
        Ok((sup, signed_max, l1))
    };

    let (sup0, _, l10) = gap_at(0.0)?;
    let mut report = ContractionReport {
        linf_gap_growth: 0.0,
        l1_gap_growth: 0.0,
        comparison_excess: f64::NEG_INFINITY,
        initial_linf_gap: sup0,
        initial_l1_gap: l10,
    };
    for &t in t_samples {
        let (sup, signed_max, l1) = gap_at(t)?;
        report.linf_gap_growth = report.linf_gap_growth.max(sup - sup0);
        report.l1_gap_growth = report.l1_gap_growth.max(l1 - l10);
        report.comparison_excess = report.comparison_excess.max(signed_max);
    }
    Ok(report)
}

/// Sampled interaction-estimate constant: the smallest `C` with
/// `|dPsi(g+)| - |dPsi(g-)| <= C |g+ - g-| |dPsi(g-)|` over `n` random
/// samples.
pub fn interaction_constant(model: &HamiltonianModel, p_cap: f64, n: usize, seed: u64) -> f64 {
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (a_lo, a_hi) = model.a_range();
    let (g_lo, g_hi) = model.g_range();
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < n {
        let a = rng.random_range(a_lo..=a_hi);
        let gm = rng.random_range(g_lo..=g_hi);
        let gp = rng.random_range(g_lo..=g_hi);
        let pl = rng.random_range(-p_cap..=p_cap);
        let pr = rng.random_range(-p_cap..=p_cap);
        if (gp - gm).abs() < 1e-6 {
            continue;
        }
        let dm = (crate::grid::psi(model, pr, a, gm) - crate::grid::psi(model, pl, a, gm)).abs();
        if dm < 1e-6 {
            continue;
        }
        let dp = (crate::grid::psi(model, pr, a, gp) - crate::grid::psi(model, pl, a, gp)).abs();
        worst = worst.max((dp - dm) / ((gp - gm).abs() * dm));
        done += 1;
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracker::{Epoch, Front};

    fn model() -> Arc<HamiltonianModel> {
        Arc::new(HamiltonianModel::offset_eikonal((1.0, 2.0), (1.0, 2.0)))
    }

    fn window() -> (f64, f64) {
        (-2.0, 2.0)
    }

    fn run_log(
        p0: &PiecewiseConstantFn,
        a: &PiecewiseConstantFn,
        g: &PiecewiseConstantFn,
        delta: f64,
        horizon: f64,
    ) -> EventLog {
        let m = model();
        let mut st =
            TrackerState::init(&m, p0, a, g, delta, InitOptions::new(window(), horizon)).unwrap();
        st.run().unwrap();
        st.log().clone()
    }

    fn interface_log() -> EventLog {
        run_log(
            &PiecewiseConstantFn::constant(0.0, window()),
            &PiecewiseConstantFn::new(vec![0.0], vec![1.0, 1.5], window()).unwrap(),
            &PiecewiseConstantFn::constant(1.0, (0.0, 1.0)),
            0.05,
            1.0,
        )
    }

    #[test]
    fn entropy_zero_for_constant_state_equal_to_c() {
        let log = run_log(
            &PiecewiseConstantFn::constant(0.3, window()),
            &PiecewiseConstantFn::constant(1.2, window()),
            &PiecewiseConstantFn::constant(1.0, (0.0, 1.0)),
            0.1,
            1.0,
        );
        let phi = BumpTestFn {
            x_c: 0.0,
            t_c: 0.5,
            r_x: 0.8,
            r_t: 0.3,
        };
        let r = entropy_residual(&log, 0.3, &phi, QuadRule::Gauss).unwrap();
        assert!(r.abs() < 1e-12, "residual {r}");
    }

    #[test]
    fn entropy_nonnegative_for_admissible_stationary_shock() {
        let log = run_log(
            &PiecewiseConstantFn::new(vec![0.0], vec![-1.0, 1.0], window()).unwrap(),
            &PiecewiseConstantFn::constant(1.0, window()),
            &PiecewiseConstantFn::constant(1.0, (0.0, 1.0)),
            0.1,
            1.0,
        );
        let phi = BumpTestFn {
            x_c: 0.0,
            t_c: 0.5,
            r_x: 0.6,
            r_t: 0.3,
        };
        let r = entropy_residual(&log, 0.0, &phi, QuadRule::Gauss).unwrap();
        assert!(r > 1e-3, "expected strictly positive production, got {r}");
        for c in entropy_c_values(&log) {
            let r = entropy_residual(&log, c, &phi, QuadRule::Gauss).unwrap();
            assert!(r >= -1e-10, "c = {c}: residual {r}");
        }
    }

    /// Forged inadmissible stationary jump, bypassing the solver.
    fn forged_log() -> EventLog {
        let m = model();
        let grid = Arc::new(FluxGrid::build(&m, 0.1, &[1.0], 1.0, &[-1.0, 1.0], 1.0).unwrap());
        let lvl = grid.level_for_a(1.0).unwrap();
        let k_minus = grid.find_state(lvl, -1.0).unwrap();
        let k_plus = grid.find_state(lvl, 1.0).unwrap();
        let front = Front {
            id: 0,
            kind: WaveKind::P,
            birth_x: 0.0,
            birth_t: 0.0,
            speed: 0.0,
            left: (lvl, k_plus),
            right: (lvl, k_minus),
        };
        EventLog {
            epochs: vec![Epoch {
                t0: 0.0,
                t1: 1.0,
                left_state: (lvl, k_plus),
                fronts: vec![front],
                grid,
                g: 1.0,
                interval: 0,
            }],
            events: Vec::new(),
            monitors: Vec::new(),
            retired: Vec::new(),
            window: window(),
            horizon: 1.0,
            glimm_c: 1.0,
            p_bar: vec![1.0],
            tie_breaks: 0,
            peak_cap_hits: 0,
        }
    }

    #[test]
    fn entropy_detects_forged_inadmissible_jump() {
        let log = forged_log();
        let phi = BumpTestFn {
            x_c: 0.0,
            t_c: 0.5,
            r_x: 0.6,
            r_t: 0.3,
        };
        let r = entropy_residual(&log, 0.0, &phi, QuadRule::Gauss).unwrap();
        assert!(r < -1e-3, "forged jump not detected: residual {r}");
    }

    #[test]
    fn gauss_and_midpoint_integrators_agree() {
        let log = interface_log();
        let phi = BumpTestFn {
            x_c: 0.1,
            t_c: 0.5,
            r_x: 0.7,
            r_t: 0.35,
        };
        for &c in &[0.0, -0.5, 0.8] {
            let a = entropy_residual(&log, c, &phi, QuadRule::Gauss).unwrap();
            let b = entropy_residual(&log, c, &phi, QuadRule::Midpoint).unwrap();
            assert!((a - b).abs() < 1e-8, "c={c}: {a} vs {b}");
        }
    }

    #[test]
    fn weak_residual_zero_for_exact_coefficients() {
        let log = interface_log();
        let phi = BumpTestFn {
            x_c: 0.1,
            t_c: 0.5,
            r_x: 0.7,
            r_t: 0.35,
        };
        let a = CoefficientSpec::parse(
            &[
                crate::coeffs::Piece {
                    expr: "1.0".into(),
                    up_to: Some(0.0),
                },
                crate::coeffs::Piece {
                    expr: "1.5".into(),
                    up_to: None,
                },
            ],
            "x",
        )
        .unwrap();
        let g = CoefficientSpec::constant(1.0);
        let p0 = CoefficientSpec::constant(0.0);
        let r = weak_residual(&log, &phi, &a, &g, &p0, QuadRule::Gauss).unwrap();
        assert!(r < 1e-10, "residual {r}");
    }

    #[test]
    fn weak_residual_with_initial_trace() {
        // support straddles t = 0: the initial term must close the balance
        let log = interface_log();
        let phi = BumpTestFn {
            x_c: -1.0,
            t_c: 0.1,
            r_x: 0.5,
            r_t: 0.3,
        };
        let a = CoefficientSpec::parse(
            &[
                crate::coeffs::Piece {
                    expr: "1.0".into(),
                    up_to: Some(0.0),
                },
                crate::coeffs::Piece {
                    expr: "1.5".into(),
                    up_to: None,
                },
            ],
            "x",
        )
        .unwrap();
        let g = CoefficientSpec::constant(1.0);
        let p0 = CoefficientSpec::constant(0.0);
        let r = weak_residual(&log, &phi, &a, &g, &p0, QuadRule::Gauss).unwrap();
        assert!(r < 1e-10, "residual {r}");
    }

    #[test]
    fn viscosity_check_on_interface_example() {
        let log = interface_log();
        let report = interface_viscosity_check(&log, 16);
        assert!(report.fronts_checked > 0);
        assert!(report.passed(), "{:?}", report.violations);
    }

    #[test]
    fn godunov_flux_cases() {
        let m = model();
        // rarefaction span including the peak: minimum of the endpoints
        assert_eq!(godunov_flux(&m, -1.0, 1.0, 1.0, 1.0), m.flux(1.0, 1.0, 1.0));
        // compression spanning the peak: the peak value
        assert_eq!(godunov_flux(&m, 1.0, -1.0, 1.0, 1.0), m.flux(0.0, 1.0, 1.0));
        // one-sided
        assert_eq!(godunov_flux(&m, 0.2, 0.7, 1.0, 1.0), m.flux(0.7, 1.0, 1.0));
        assert_eq!(godunov_flux(&m, 0.7, 0.2, 1.0, 1.0), m.flux(0.2, 1.0, 1.0));
    }

    #[test]
    fn fd_oracle_constant_data_exact() {
        let m = model();
        let p0 = PiecewiseConstantFn::constant(0.4, window());
        let a = PiecewiseConstantFn::constant(1.2, window());
        let g = PiecewiseConstantFn::constant(1.0, (0.0, 1.0));
        let sol = fd_oracle(&p0, &a, &g, &m, FdOracleConfig::new(0.05), window(), 0.7).unwrap();
        for v in &sol.values {
            assert_eq!(*v, 0.4);
        }
    }

    #[test]
    fn fd_oracle_stationary_shock_preserved() {
        let m = model();
        let p0 = PiecewiseConstantFn::new(vec![0.0], vec![-1.0, 1.0], window()).unwrap();
        let a = PiecewiseConstantFn::constant(1.0, window());
        let g = PiecewiseConstantFn::constant(1.0, (0.0, 1.0));
        let log = run_log(&p0, &a, &g, 0.05, 1.0);
        let sol = fd_oracle(&p0, &a, &g, &m, FdOracleConfig::new(0.01), window(), 1.0).unwrap();
        let d = sol.l1_distance_to_log(&log, 1.0).unwrap();
        assert!(d <= 3.0 * sol.dx, "L1 distance {d} vs dx {}", sol.dx);
    }

    #[test]
    fn fd_oracle_interface_example_converges() {
        let m = model();
        let p0 = PiecewiseConstantFn::constant(0.0, window());
        let a = PiecewiseConstantFn::new(vec![0.0], vec![1.0, 1.5], window()).unwrap();
        let g = PiecewiseConstantFn::constant(1.0, (0.0, 1.0));
        let log = run_log(&p0, &a, &g, 0.05, 1.0);
        let sol = fd_oracle(&p0, &a, &g, &m, FdOracleConfig::new(0.005), window(), 1.0).unwrap();
        let d = sol.l1_distance_to_log(&log, 1.0).unwrap();
        assert!(d < 0.06, "L1 distance {d}");
    }

    #[test]
    fn fd_oracle_is_monotone() {
        let m = model();
        let a = PiecewiseConstantFn::new(vec![0.0], vec![1.1, 1.4], (-0.5, 0.5)).unwrap();
        let g = PiecewiseConstantFn::constant(1.0, (0.0, 0.2));
        let base_p0 =
            PiecewiseConstantFn::new(vec![-0.2, 0.1], vec![0.3, -0.4, 0.1], (-0.5, 0.5)).unwrap();
        let base = fd_oracle(&base_p0, &a, &g, &m, FdOracleConfig::new(0.05), (-0.5, 0.5), 0.2)
            .unwrap();
        // bump one cell up by perturbing the middle piece
        let bumped_p0 =
            PiecewiseConstantFn::new(vec![-0.2, 0.1], vec![0.3, -0.35, 0.1], (-0.5, 0.5)).unwrap();
        let bumped =
            fd_oracle(&bumped_p0, &a, &g, &m, FdOracleConfig::new(0.05), (-0.5, 0.5), 0.2)
                .unwrap();
        for (b, p) in base.values.iter().zip(bumped.values.iter()) {
            assert!(p + 1e-12 >= *b, "monotonicity violated: {b} -> {p}");
        }
    }

    #[test]
    fn contraction_identical_data_zero_gaps() {
        let m = model();
        let p0 = PiecewiseConstantFn::new(vec![0.0], vec![0.4, -0.2], window()).unwrap();
        let a = PiecewiseConstantFn::constant(1.2, window());
        let g = PiecewiseConstantFn::constant(1.0, (0.0, 1.0));
        let report = contraction_pair(
            &m,
            &p0,
            0.0,
            &p0,
            0.0,
            &a,
            &g,
            0.1,
            &InitOptions::new(window(), 1.0),
            &[0.5, 1.0],
        )
        .unwrap();
        assert!(report.linf_gap_growth.abs() < 1e-12);
        assert!(report.l1_gap_growth.abs() < 1e-12);
    }

    #[test]
    fn contraction_constant_shift() {
        // v0 = u0 + 1: same slopes, shifted reference
        let m = model();
        let p0 = PiecewiseConstantFn::new(vec![0.0], vec![0.4, -0.2], window()).unwrap();
        let a = PiecewiseConstantFn::constant(1.2, window());
        let g = PiecewiseConstantFn::constant(1.0, (0.0, 1.0));
        let report = contraction_pair(
            &m,
            &p0,
            0.0,
            &p0,
            1.0,
            &a,
            &g,
            0.1,
            &InitOptions::new(window(), 1.0),
            &[0.5, 1.0],
        )
        .unwrap();
        assert!(report.linf_gap_growth.abs() < 1e-12);
        // u - v = -1 everywhere: comparison margin 1
        assert!((report.comparison_excess + 1.0).abs() < 1e-12);
    }

    #[test]
    fn interaction_constant_finite_and_seed_stable() {
        let m = model();
        let c1 = interaction_constant(&m, 1.5, 500, 7);
        let c2 = interaction_constant(&m, 1.5, 500, 8);
        assert!(c1.is_finite() && c1 > 0.0);
        assert!(c2.is_finite() && c2 > 0.0);
        let ratio = c1.max(c2) / c1.min(c2);
        assert!(ratio < 2.0, "constants {c1} vs {c2}");
    }
}
