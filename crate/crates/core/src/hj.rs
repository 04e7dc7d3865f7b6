//! Reconstruction of the Hamilton-Jacobi approximation `u^d` from a tracked
//! conservation-law solution: `u^d(x, t) = u0(x_ref) - int_0^t H-trace ds +
//! int_{x_ref}^x p^d(z, t) dz`, plus the closed-form Riemann solution used to
//! cross-check it.
//!
//! Both integrals are exact sums over the piecewise-constant structure, so no
//! quadrature error enters the reconstruction.

use crate::error::{Error, Result};
use crate::grid::FluxGrid;
use crate::model::HamiltonianModel;
use crate::riemann::{self, WaveFan, WaveKind};
use crate::tracker::EventLog;
use std::sync::Arc;

/// The continuous solution of the Hamilton-Jacobi problem associated with a
/// completed tracker run.
#[derive(Debug, Clone)]
pub struct HjSolution<'a> {
    log: &'a EventLog,
    x_ref: f64,
    u0_ref: f64,
    /// Flux trace at `x_ref`: piece start times, values, and running integral.
    trace_t: Vec<f64>,
    trace_h: Vec<f64>,
    trace_cum: Vec<f64>,
}

/// Reference point for the time integral: the origin when it is inside the
/// window, else the leftmost coefficient jump, else the window midpoint.
pub fn reference_point(log: &EventLog) -> f64 {
    let (lo, hi) = log.window;
    if lo < 0.0 && 0.0 < hi {
        return 0.0;
    }
    log.epochs
        .first()
        .and_then(|e| {
            e.fronts
                .iter()
                .find(|f| f.kind == WaveKind::A)
                .map(|f| f.birth_x)
        })
        .unwrap_or(0.5 * (lo + hi))
}

impl<'a> HjSolution<'a> {
    /// Build the reconstruction with `u0_ref = u0(x_ref)`.
    pub fn new(log: &'a EventLog, u0_ref: f64) -> Result<Self> {
        Self::with_reference(log, reference_point(log), u0_ref)
    }

    pub fn with_reference(log: &'a EventLog, x_ref: f64, u0_ref: f64) -> Result<Self> {
        let pieces = log.flux_trace(x_ref, log.horizon)?;
        let mut trace_t = Vec::with_capacity(pieces.len() + 1);
        let mut trace_h = Vec::with_capacity(pieces.len());
        let mut trace_cum = Vec::with_capacity(pieces.len() + 1);
        let mut acc = 0.0;
        for &(t0, t1, h) in &pieces {
            trace_t.push(t0);
            trace_h.push(h);
            trace_cum.push(acc);
            acc += h * (t1 - t0);
        }
        trace_t.push(pieces.last().map(|&(_, t1, _)| t1).unwrap_or(0.0));
        trace_cum.push(acc);
        Ok(HjSolution {
            log,
            x_ref,
            u0_ref,
            trace_t,
            trace_h,
            trace_cum,
        })
    }

    pub fn x_ref(&self) -> f64 {
        self.x_ref
    }

    pub fn u0_ref(&self) -> f64 {
        self.u0_ref
    }

    pub fn log(&self) -> &EventLog {
        self.log
    }

    /// `int_0^t` of the flux trace at the reference point.
    pub fn trace_integral(&self, t: f64) -> f64 {
        if self.trace_h.is_empty() {
            return 0.0;
        }
        let idx = self
            .trace_t
            .partition_point(|&s| s <= t)
            .clamp(1, self.trace_t.len() - 1)
            - 1;
        self.trace_cum[idx] + self.trace_h[idx] * (t - self.trace_t[idx])
    }

    /// Evaluate `u^d(x, t)`.
    pub fn eval(&self, x: f64, t: f64) -> Result<f64> {
        if t < 0.0 || t > self.log.horizon + 1e-12 {
            return Err(Error::Input(format!("t = {t} outside the simulated range")));
        }
        let epoch = self.log.epoch_at(t);
        let profile = epoch.profile_at(t);
        // exact integral of the profile from x_ref to x
        let (lo, hi, sign) = if x >= self.x_ref {
            (self.x_ref, x, 1.0)
        } else {
            (x, self.x_ref, -1.0)
        };
        let mut integral = 0.0;
        let mut pos = lo;
        for (i, &c) in profile.cuts.iter().enumerate() {
            if c <= lo {
                continue;
            }
            let end = c.min(hi);
            if end > pos {
                let (lvl, k) = profile.states[i];
                integral += epoch.grid.state_p(lvl, k) * (end - pos);
                pos = end;
            }
            if c >= hi {
                break;
            }
        }
        if pos < hi {
            let (lvl, k) = *profile.states.last().unwrap();
            integral += epoch.grid.state_p(lvl, k) * (hi - pos);
        }
        Ok(self.u0_ref - self.trace_integral(t) + sign * integral)
    }

    /// Max deviation between central finite differences of the reconstruction
    /// and the tracked slopes, over sample points `xs` at time `t`.
    pub fn gradient_check(&self, t: f64, xs: &[f64], step: f64) -> Result<f64> {
        let p = self.log.sample(t, xs)?;
        let mut worst: f64 = 0.0;
        for (&x, &slope) in xs.iter().zip(p.iter()) {
            let fd = (self.eval(x + step, t)? - self.eval(x - step, t)?) / (2.0 * step);
            worst = worst.max((fd - slope).abs());
        }
        Ok(worst)
    }

    /// Max deviation between the front-wise update formula and the
    /// reconstruction along every front trajectory, sampled at `n` times per
    /// epoch. Both one-sided state/flux pairs are checked.
    pub fn front_consistency(&self, n: usize) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for epoch in &self.log.epochs {
            let t1 = epoch.t1.min(self.log.horizon);
            if t1 <= epoch.t0 {
                continue;
            }
            for f in &epoch.fronts {
                let x0 = f.position(epoch.t0);
                let u0 = self.eval(x0, epoch.t0)?;
                for i in 1..=n {
                    let t = epoch.t0 + (t1 - epoch.t0) * i as f64 / n as f64;
                    let x = f.position(t);
                    if x < self.log.window.0 || x > self.log.window.1 {
                        continue;
                    }
                    let want = self.eval(x, t)?;
                    for &(lvl, k) in &[f.left, f.right] {
                        let p = epoch.grid.state_p(lvl, k);
                        let h = epoch.grid.state_h(lvl, k);
                        let got = u0 + (x - x0) * p - (t - epoch.t0) * h;
                        worst = worst.max((got - want).abs());
                    }
                }
            }
        }
        Ok(worst)
    }
}

/// The closed-form solution of the Hamilton-Jacobi Riemann problem on the
/// discretized flux: piecewise linear in `x` at fixed `t`, built from the
/// exact conservation-law fan.
#[derive(Debug)]
pub struct RiemannHjSolution {
    grid: FluxGrid,
    fan: WaveFan,
    level_l: usize,
    level_r: usize,
    kl: usize,
    kr: usize,
    u0: f64,
}

impl RiemannHjSolution {
    #[allow(clippy::too_many_arguments)]
    pub fn solve(
        model: &Arc<HamiltonianModel>,
        delta: f64,
        a_l: f64,
        a_r: f64,
        g: f64,
        p_l: f64,
        p_r: f64,
        u0: f64,
    ) -> Result<Self> {
        let bounds = riemann::riemann_bounds(model, p_l, p_r, a_l, a_r, g)?;
        let cap = bounds
            .symmetric
            .max(p_l.abs())
            .max(p_r.abs())
            .max(bounds.upper.abs())
            + 1.0;
        let grid = FluxGrid::build(model, delta, &[a_l, a_r], g, &[p_l, p_r], cap)?;
        let level_l = grid.level_for_a(a_l)?;
        let level_r = grid.level_for_a(a_r)?;
        let kl = grid
            .find_state(level_l, p_l)
            .ok_or_else(|| Error::Input("p_l not on grid".into()))?;
        let kr = grid
            .find_state(level_r, p_r)
            .ok_or_else(|| Error::Input("p_r not on grid".into()))?;
        let fan = riemann::solve_interface(&grid, level_l, level_r, kl, kr)?;
        Ok(RiemannHjSolution {
            grid,
            fan,
            level_l,
            level_r,
            kl,
            kr,
            u0,
        })
    }

    pub fn fan(&self) -> &WaveFan {
        &self.fan
    }

    pub fn grid(&self) -> &FluxGrid {
        &self.grid
    }

    /// The self-similar state at `xi = x/t`; exact wave positions take the
    /// right state.
    pub fn state_at(&self, xi: f64) -> (usize, usize) {
        let mut state = if self.fan.waves.is_empty() {
            (self.level_l, self.kl)
        } else {
            self.fan.waves[0].left
        };
        for w in &self.fan.waves {
            if w.speed <= xi {
                state = w.right;
            } else {
                break;
            }
        }
        let _ = (self.level_r, self.kr);
        state
    }

    /// Pointwise formula: `u = u0 + x p(x,t) - t H(p(x,t), a(x))`.
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        let (lvl, k) = self.state_at(x / t);
        self.u0 + x * self.grid.state_p(lvl, k) - t * self.grid.state_h(lvl, k)
    }

    /// Integral formula: `u = u0 - t H0 + int_0^x p(z, t) dz` with `H0` the
    /// interface flux.
    pub fn eval_integral(&self, x: f64, t: f64) -> f64 {
        let h0 = {
            let (lvl, k) = self.state_at(0.0);
            self.grid.state_h(lvl, k)
        };
        // integrate the self-similar profile between 0 and x
        let (lo, hi, sign) = if x >= 0.0 { (0.0, x, 1.0) } else { (x, 0.0, -1.0) };
        let mut integral = 0.0;
        let mut pos = lo;
        let mut state = if self.fan.waves.is_empty() {
            (self.level_l, self.kl)
        } else {
            self.fan.waves[0].left
        };
        for w in &self.fan.waves {
            let c = w.speed * t;
            if c <= lo {
                state = w.right;
                continue;
            }
            let end = c.min(hi);
            if end > pos {
                integral += self.grid.state_p(state.0, state.1) * (end - pos);
                pos = end;
            }
            state = w.right;
            if c >= hi {
                break;
            }
        }
        if pos < hi {
            integral += self.grid.state_p(state.0, state.1) * (hi - pos);
        }
        self.u0 - t * h0 + sign * integral
    }
}
