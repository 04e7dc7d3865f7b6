// quadratic-cap stress: Temple monotonicity within intervals, growth at
// restarts, Glimm monotonicity with the calibrated constant
use fronttrack::coeffs::PiecewiseConstantFn;
use fronttrack::model::HamiltonianModel;
use fronttrack::tracker::{temple_value, InitOptions, TrackerState};
use rand::prelude::*;
use std::sync::Arc;

fn main() {
    let m = Arc::new(HamiltonianModel::quadratic_cap((1.0, 2.0), (1.0, 2.0), 10.0).unwrap());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4242);
    let window = (-2.5, 2.5);
    let mut t_viol = 0usize;
    let mut worst_t: f64 = 0.0;
    let mut g_viol = 0usize;
    let mut growth_max: f64 = 0.0;
    let mut needed_c: f64 = 0.0;
    let (mut runs, mut fails, mut events) = (0usize, 0usize, 0usize);
    let mut bound_viol = 0usize;
    for _ in 0..100 {
        let nj = rng.random_range(3..9);
        let mut xs: Vec<f64> = (0..nj).map(|_| rng.random_range(-1.5..1.5)).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| (*a - *b).abs() < 0.05);
        let vals: Vec<f64> = (0..=xs.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p0 = PiecewiseConstantFn::new(xs, vals, window).unwrap();
        let ax = rng.random_range(-0.5..0.5);
        let a = PiecewiseConstantFn::new(vec![ax], vec![rng.random_range(1.0..1.6), rng.random_range(1.0..1.6)], window).unwrap();
        let mut ts: Vec<f64> = vec![rng.random_range(0.15..0.5), rng.random_range(0.5..0.85)];
        ts.sort_by(f64::total_cmp);
        ts.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        let gv: Vec<f64> = (0..=ts.len()).map(|_| rng.random_range(1.0..1.3)).collect();
        let g = PiecewiseConstantFn::new(ts, gv, (0.0, 1.0)).unwrap();
        let mut st = match TrackerState::init(&m, &p0, &a, &g, 0.05, InitOptions::new(window, 1.0)) {
            Ok(s) => s, Err(e) => { println!("init failed: {e}"); fails += 1; continue }
        };
        if let Err(e) = st.run() { println!("run failed: {}", e.to_string().lines().next().unwrap()); fails += 1; continue }
        runs += 1;
        events += st.event_count() as usize;
        let log = st.log();
        // T monotone within intervals; growth across restarts
        let mut prev: Option<(usize, f64)> = None;
        for ep in &log.epochs {
            let t = temple_value(&ep.grid, &ep.fronts, ep.g, true);
            if let Some((pi, pt)) = prev {
                if pi == ep.interval && t > pt + 1e-10 {
                    t_viol += 1;
                    worst_t = worst_t.max(t - pt);
                }
                if pi + 1 == ep.interval && pt > 1e-12 {
                    growth_max = growth_max.max(t / pt);
                }
            }
            prev = Some((ep.interval, t));
        }
        // Glimm with the default calibrated C
        let mut prev_g: Option<f64> = None;
        for s in &log.monitors {
            if let Some(pg) = prev_g {
                if s.glimm > pg + 1e-10 { g_viol += 1; }
            }
            prev_g = Some(s.glimm);
        }
        let ec = log.empirical_glimm_c();
        if ec.is_finite() { needed_c = needed_c.max(ec); } else { println!("infeasible C in a run"); }
        // initial bound: T(0+) vs z-BV + 4 sum |dAlpha|
        let first = &log.epochs[0];
        let g0 = first.g;
        let mut zbv = 0.0;
        // composite z-BV of the projected initial profile
        let prof = first.profile_at(0.0);
        let model = first.grid.model();
        let mut prev_z: Option<f64> = None;
        let mut alpha_sum = 0.0;
        for (i, &(lvl, k)) in prof.states.iter().enumerate() {
            let a_here = first.grid.level(lvl).a;
            let z = fronttrack::grid::z_transform(model, first.grid.state_p(lvl, k), a_here, g0);
            if let Some(pz) = prev_z { zbv += (z - pz).abs(); }
            prev_z = Some(z);
            if i > 0 {
                let (plvl, _) = prof.states[i-1];
                let pa = first.grid.level(plvl).a;
                if (pa - a_here).abs() > 1e-12 {
                    alpha_sum += (model.flux(0.0, a_here, g0) - model.flux(0.0, pa, g0)).abs();
                }
            }
        }
        let t0 = temple_value(&first.grid, &first.fronts, g0, true);
        let prefactor = zbv + 4.0 * alpha_sum;
        if t0 > prefactor + 1e-8 { bound_viol += 1; println!("T(0+) {t0} > prefactor {prefactor}"); }
    }
    println!("runs {runs} fails {fails} events {events}");
    println!("T violations {t_viol} worst {worst_t:.3e}; restart growth max factor {growth_max:.6}");
    println!("G violations {g_viol}; empirical needed C {needed_c:.4}");
    println!("initial-bound violations {bound_viol}");
}
