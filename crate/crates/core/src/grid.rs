//! The `(z, alpha)`-plane grid and the piecewise-linear flux interpolant.
//!
//! Coordinates: `z(p, a, g) = -sign(p) (H(p,a,g) - H(0,a,g))` and
//! `alpha(a) = H(0, a, g)`. A level is one `alpha` value (one `a` value); its
//! breakpoints are `z`-values with the corresponding `p` and `H` stored.
//!
//! Breakpoints per level are the union of
//! * the uniform lattice `{j*delta}` covering `[-z(P), z(P)]`, with the exact
//!   endpoints `p = +-P` included,
//! * the transformed data values `z(p_i, a_j, g)` for every data value `p_i`,
//! * on data levels (levels that carry an actual value of `a^d`): the two
//!   flux-matched images `+-(alpha_j - h)` of every flux value `h` attained at
//!   breakpoints of the other data levels.
//!
//! The third set makes the Rankine-Hugoniot matching across interfaces exact
//! on the grid: whenever a state exists on one side with flux `h`, the other
//! side has a breakpoint with the same stored flux (up to rounding), for any
//! `delta`. Without it, matching pairs only exist when `delta` divides the
//! peak-flux gaps between adjacent `a`-levels.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{Branch, HamiltonianModel};

/// Duplicate-breakpoint merge tolerance (in `z`).
pub const MERGE_TOL: f64 = 1e-12;

/// `z(p, a, g) = -sign(p) (H(p, a, g) - H(0, a, g))`. Odd and non-decreasing
/// in `p`, zero at `p = 0`.
pub fn z_transform(model: &HamiltonianModel, p: f64, a: f64, g: f64) -> f64 {
    let dh = model.flux(p, a, g) - model.flux(0.0, a, g);
    -p.signum() * dh
}

/// The singular mapping `Psi(p, a, g) = sign(p) (H(p,a,g) - H(0,a,g)) / H(0,a,g)`.
pub fn psi(model: &HamiltonianModel, p: f64, a: f64, g: f64) -> f64 {
    let peak = model.flux(0.0, a, g);
    p.signum() * (model.flux(p, a, g) - peak) / peak
}

/// Invert `z` on one level: the `p` with `z(p, a, g) = z`.
fn z_inverse(model: &HamiltonianModel, z: f64, a: f64, g: f64) -> Result<f64> {
    let peak = model.flux(0.0, a, g);
    let p = model.inverse(peak - z.abs(), a, g, Branch::Plus)?;
    Ok(if z < 0.0 { -p } else { p })
}

#[derive(Debug, Clone)]
pub struct Level {
    /// `H(0, a_j, g)`.
    pub alpha: f64,
    /// Representative `a` for this level.
    pub a: f64,
    /// Whether `a` is an actual value of `a^d` (only such levels carry states).
    pub is_data: bool,
    /// Strictly increasing `z`-breakpoints.
    pub z: Vec<f64>,
    /// `p_k = z^{-1}(z_k)`, strictly increasing.
    pub p: Vec<f64>,
    /// `h_k = H(p_k, a_j, g)`.
    pub h: Vec<f64>,
}

impl Level {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Index of the peak breakpoint `z = 0`.
    pub fn peak_index(&self) -> usize {
        self.z
            .iter()
            .position(|&z| z.abs() <= MERGE_TOL)
            .expect("every level contains z = 0")
    }
}

#[derive(Debug, Clone)]
pub struct FluxGrid {
    model: Arc<HamiltonianModel>,
    delta: f64,
    g: f64,
    cap: f64,
    levels: Vec<Level>,
    /// Data `p`-values accumulated over builds and regrids.
    seed_p: Vec<f64>,
    /// Data `a`-values, one per data level.
    seed_a: Vec<f64>,
}

/// Breakpoint candidate with a provenance rank: data values beat flux images
/// beat lattice points when merging duplicates, so exact values survive.
#[derive(Clone, Copy)]
struct Candidate {
    z: f64,
    p: Option<f64>,
    h: Option<f64>,
    rank: u8,
}

impl FluxGrid {
    pub fn build(
        model: &Arc<HamiltonianModel>,
        delta: f64,
        a_values: &[f64],
        g: f64,
        p_data: &[f64],
        cap: f64,
    ) -> Result<FluxGrid> {
        if !(delta > 0.0) {
            return Err(Error::Input(format!("delta must be positive, got {delta}")));
        }
        if a_values.is_empty() || p_data.is_empty() {
            return Err(Error::Input("empty coefficient or data value list".into()));
        }
        if !(cap >= 0.0) || !cap.is_finite() {
            return Err(Error::Input(format!("bad cap {cap}")));
        }
        let max_p = p_data.iter().fold(0.0_f64, |m, &p| m.max(p.abs()));
        if max_p > cap + 1e-12 {
            return Err(Error::Input(format!(
                "cap {cap} does not cover data values up to {max_p}"
            )));
        }
        if cap > model.p_guard() {
            return Err(Error::Input(format!(
                "cap {cap} exceeds the model p-guard {}",
                model.p_guard()
            )));
        }
        for &a in a_values {
            model.eval(0.0, a, g)?;
        }

        let mut seed_a: Vec<f64> = a_values.to_vec();
        seed_a.sort_by(f64::total_cmp);
        seed_a.dedup_by(|x, y| (*x - *y).abs() <= MERGE_TOL);
        let mut seed_p: Vec<f64> = p_data.to_vec();
        seed_p.sort_by(f64::total_cmp);
        seed_p.dedup_by(|x, y| (*x - *y).abs() <= MERGE_TOL);

        Self::assemble(model, delta, g, cap, seed_a, seed_p)
    }

    fn assemble(
        model: &Arc<HamiltonianModel>,
        delta: f64,
        g: f64,
        cap: f64,
        seed_a: Vec<f64>,
        seed_p: Vec<f64>,
    ) -> Result<FluxGrid> {
        // alpha levels: lattice within the data range, union data alphas.
        let data_alphas: Vec<f64> = seed_a.iter().map(|&a| model.peak(a, g)).collect();
        let alpha_min = data_alphas.iter().cloned().fold(f64::INFINITY, f64::min);
        let alpha_max = data_alphas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

        // (alpha, data a value or None)
        let mut level_seeds: Vec<(f64, Option<f64>)> = Vec::new();
        let i_lo = (alpha_min / delta).ceil() as i64;
        let i_hi = (alpha_max / delta).floor() as i64;
        for i in i_lo..=i_hi {
            level_seeds.push((i as f64 * delta, None));
        }
        for (&alpha, &a) in data_alphas.iter().zip(seed_a.iter()) {
            level_seeds.push((alpha, Some(a)));
        }
        level_seeds.sort_by(|x, y| x.0.total_cmp(&y.0));
        // merge equal alphas; a data representative wins
        let mut merged: Vec<(f64, Option<f64>)> = Vec::new();
        for (alpha, a) in level_seeds {
            match merged.last_mut() {
                Some((la, some_a)) if (alpha - *la).abs() <= MERGE_TOL => {
                    if some_a.is_none() {
                        *la = alpha;
                        *some_a = a;
                    }
                }
                _ => merged.push((alpha, a)),
            }
        }

        // The common flux-value set attained at breakpoints of data levels.
        let mut flux_values: Vec<f64> = Vec::new();
        for (&a, &alpha) in seed_a.iter().zip(data_alphas.iter()) {
            let z_cap = alpha - model.flux(cap, a, g);
            let j_hi = (z_cap / delta).floor() as i64;
            for j in 0..=j_hi {
                flux_values.push(alpha - j as f64 * delta);
            }
            flux_values.push(alpha - z_cap);
            for &p in &seed_p {
                flux_values.push(model.flux(p, a, g));
            }
        }
        flux_values.sort_by(f64::total_cmp);
        flux_values.dedup_by(|x, y| (*x - *y).abs() <= MERGE_TOL);

        let mut levels = Vec::with_capacity(merged.len());
        for (alpha, data_a) in merged {
            let is_data = data_a.is_some();
            let a = match data_a {
                Some(a) => a,
                None => model.alpha_inverse(alpha, g),
            };
            let z_cap = alpha - model.flux(cap, a, g);

            let mut cands: Vec<Candidate> = Vec::new();
            // lattice, including the exact +-z(P) endpoints
            let j_hi = (z_cap / delta).floor() as i64;
            for j in -j_hi..=j_hi {
                cands.push(Candidate {
                    z: j as f64 * delta,
                    p: None,
                    h: None,
                    rank: 2,
                });
            }
            if z_cap > 0.0 {
                for &s in &[-1.0, 1.0] {
                    cands.push(Candidate {
                        z: s * z_cap,
                        p: Some(s * cap),
                        h: None,
                        rank: 1,
                    });
                }
            }
            // transformed data values
            for &p in &seed_p {
                cands.push(Candidate {
                    z: z_transform(model, p, a, g),
                    p: Some(p),
                    h: None,
                    rank: 0,
                });
            }
            // flux images (data levels only)
            if is_data {
                for &h in &flux_values {
                    let dz = alpha - h;
                    if dz < -MERGE_TOL || dz > z_cap + MERGE_TOL {
                        continue;
                    }
                    let dz = dz.clamp(0.0, z_cap);
                    for &s in &[-1.0, 1.0] {
                        cands.push(Candidate {
                            z: s * dz,
                            p: None,
                            h: Some(h),
                            rank: 1,
                        });
                    }
                }
            }

            // snap to the exact peak: z-rounding of order 1e-16 inflates to
            // p-errors of order 1e-8 there (z ~ p^2/2)
            for c in &mut cands {
                if c.z.abs() <= MERGE_TOL {
                    c.z = 0.0;
                    c.p = Some(0.0);
                    c.h = None;
                }
            }
            cands.sort_by(|x, y| x.z.total_cmp(&y.z).then(x.rank.cmp(&y.rank)));
            let mut z = Vec::with_capacity(cands.len());
            let mut p = Vec::with_capacity(cands.len());
            let mut h = Vec::with_capacity(cands.len());
            for c in cands {
                if let Some(&last) = z.last() {
                    if c.z - last <= MERGE_TOL {
                        continue;
                    }
                }
                let pk = match c.p {
                    Some(pk) => pk,
                    None => match c.h {
                        Some(hk) => {
                            let mag = model.inverse(hk, a, g, Branch::Plus)?;
                            if c.z < 0.0 {
                                -mag
                            } else {
                                mag
                            }
                        }
                        None => z_inverse(model, c.z, a, g)?,
                    },
                };
                z.push(c.z);
                p.push(pk);
                h.push(model.flux(pk, a, g));
            }
            debug_assert!(z.windows(2).all(|w| w[0] < w[1]));
            debug_assert!(p.windows(2).all(|w| w[0] < w[1]), "p not increasing on level");
            levels.push(Level {
                alpha,
                a,
                is_data,
                z,
                p,
                h,
            });
        }

        Ok(FluxGrid {
            model: Arc::clone(model),
            delta,
            g,
            cap,
            levels,
            seed_p,
            seed_a,
        })
    }

    /// Rebuild for a new `g`, keeping all previously seeded data values plus
    /// the current solution values as grid points.
    pub fn regrid_for_g(
        &self,
        new_g: f64,
        current_p: &[f64],
        new_cap: Option<f64>,
    ) -> Result<FluxGrid> {
        for &a in &self.seed_a {
            self.model.eval(0.0, a, new_g)?;
        }
        let mut seed_p = self.seed_p.clone();
        seed_p.extend_from_slice(current_p);
        seed_p.sort_by(f64::total_cmp);
        seed_p.dedup_by(|x, y| (*x - *y).abs() <= MERGE_TOL);
        let cap = new_cap.unwrap_or(self.cap).max(
            seed_p.iter().fold(0.0_f64, |m, &p| m.max(p.abs())),
        );
        Self::assemble(
            &self.model,
            self.delta,
            new_g,
            cap,
            self.seed_a.clone(),
            seed_p,
        )
    }

    pub fn model(&self) -> &Arc<HamiltonianModel> {
        &self.model
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn level(&self, j: usize) -> &Level {
        &self.levels[j]
    }

    pub fn breakpoint_count(&self) -> usize {
        self.levels.iter().map(Level::len).sum()
    }

    /// The data level carrying coefficient value `a`.
    pub fn level_for_a(&self, a: f64) -> Result<usize> {
        self.levels
            .iter()
            .position(|l| l.is_data && (l.a - a).abs() <= 1e-9)
            .ok_or_else(|| Error::Input(format!("no data level for a = {a}")))
    }

    /// State value `p` of breakpoint `k` on level `j`.
    pub fn state_p(&self, j: usize, k: usize) -> f64 {
        self.levels[j].p[k]
    }

    /// Stored flux of breakpoint `k` on level `j`.
    pub fn state_h(&self, j: usize, k: usize) -> f64 {
        self.levels[j].h[k]
    }

    /// Piecewise-linear flux interpolant on level `j`.
    pub fn flux_interp(&self, j: usize, p: f64) -> Result<f64> {
        let level = &self.levels[j];
        let (p_lo, p_hi) = (level.p[0], *level.p.last().unwrap());
        if p < p_lo - 1e-9 || p > p_hi + 1e-9 {
            return Err(Error::Input(format!(
                "p = {p} outside covered range [{p_lo}, {p_hi}] on level {j}"
            )));
        }
        let p = p.clamp(p_lo, p_hi);
        let k = level.p.partition_point(|&q| q <= p).saturating_sub(1);
        let k = k.min(level.len() - 2);
        if p == level.p[k] {
            return Ok(level.h[k]);
        }
        if p == level.p[k + 1] {
            return Ok(level.h[k + 1]);
        }
        let t = (p - level.p[k]) / (level.p[k + 1] - level.p[k]);
        Ok(level.h[k] + t * (level.h[k + 1] - level.h[k]))
    }

    /// Nearest breakpoint in `z`-distance; ties resolve toward `z = 0`.
    pub fn project(&self, j: usize, p: f64) -> usize {
        let level = &self.levels[j];
        let z = z_transform(&self.model, p, level.a, self.g);
        let idx = level.z.partition_point(|&q| q < z);
        let mut best = idx.min(level.len() - 1);
        let mut best_d = (level.z[best] - z).abs();
        if idx > 0 {
            let d = (level.z[idx - 1] - z).abs();
            let tie = (d - best_d).abs() <= MERGE_TOL;
            if d < best_d - MERGE_TOL
                || (tie && level.z[idx - 1].abs() < level.z[best].abs())
            {
                best = idx - 1;
                best_d = d;
            }
        }
        let _ = best_d;
        best
    }

    /// Exact breakpoint lookup (within merge tolerance in `z`).
    pub fn find_state(&self, j: usize, p: f64) -> Option<usize> {
        let level = &self.levels[j];
        let k = self.project(j, p);
        let z = z_transform(&self.model, p, level.a, self.g);
        if (level.z[k] - z).abs() <= 10.0 * MERGE_TOL {
            Some(k)
        } else {
            None
        }
    }

    /// Columnar debug dump: `level k z p H` per line.
    pub fn dump(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "level k z p H")?;
        for (j, level) in self.levels.iter().enumerate() {
            for k in 0..level.len() {
                writeln!(
                    out,
                    "{j} {k} {:.16e} {:.16e} {:.16e}",
                    level.z[k], level.p[k], level.h[k]
                )?;
            }
        }
        Ok(())
    }
}
