use driftfront::discretize::build_grid;
use driftfront::freeboundary::{run, Classification, RunOptions};
use driftfront::spectral::{critical_domain, principal_eigen};
use driftfront::steady::{spatial_steady, SteadyOutcome};
use driftfront::thresholds::{dichotomy_table, find_mu_hat, ThresholdOptions};
use driftfront::{Grid, InitialData, ModelParams, NonlinearitySpec};

fn grid(h0: f64, dx: f64, factor: f64) -> Grid {
    build_grid(h0, dx, factor).unwrap()
}

fn critical(p: &ModelParams, g: &Grid) -> f64 {
    critical_domain(p, g, (g.spacing(), 5.0)).unwrap().critical().unwrap()
}

#[test]
fn supercritical_start_spreads_to_coexistence() {
    let p = ModelParams::reference();
    let g = grid(1.0, 0.1, 80.0);
    let zstar = critical(&p, &g);
    assert!(1.0 > zstar);
    let mut options = RunOptions::new(150.0, 1.0);
    options.stop_on_classification = false;
    options.context.critical_half_length = Some(zstar);
    options.context.coexistence = Some((1.0, 1.0));
    let trace = run(&p, &g, &InitialData::cosine_bumps(0.5), &options).unwrap();
    assert_eq!(trace.classification(), Classification::Spreading, "{}", trace.verdict.evidence);
    let (u, v) = trace.final_state.midpoint_values(&g);
    let st = &trace.final_state;
    assert!((u - 1.0).abs() < 1e-2 && (v - 1.0).abs() < 1e-2, "({u}, {v}) on ({}, {})", st.g, st.h);
    let h = trace.samples.iter().map(|s| s.h).collect::<Vec<_>>();
    assert!(h.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn subthreshold_mass_never_increases() {
    let lin = NonlinearitySpec::linear(0.5);
    let p = ModelParams::reference().with_sources(lin, lin);
    let g = grid(1.0, 0.05, 8.0);
    let mut options = RunOptions::new(30.0, 1.0);
    options.sample_every = 0.25;
    options.stop_on_classification = false;
    let trace = run(&p, &g, &InitialData::cosine_bumps(1.0), &options).unwrap();
    for w in trace.samples[1..].windows(2) {
        assert!(w[1].phi <= w[0].phi * (1.0 + 1e-12), "{} -> {}", w[0].phi, w[1].phi);
    }
    assert!(trace.samples.last().unwrap().phi < 1e-3 * trace.samples[0].phi);
}

#[test]
fn fixed_interval_steady_state_is_unique() {
    let p = ModelParams::reference();
    let g = grid(1.0, 0.1, 8.0);
    let hi = spatial_steady(&p, &g, 4.0, 4000.0, [2.0, 2.0]).unwrap();
    let lo = spatial_steady(&p, &g, 4.0, 4000.0, [0.5, 0.5]).unwrap();
    assert_eq!(hi.outcome, SteadyOutcome::Positive);
    assert_eq!(lo.outcome, SteadyOutcome::Positive);
    let gap = hi.u.iter().zip(&lo.u).chain(hi.v.iter().zip(&lo.v)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-6, "{gap}");
}

#[test]
fn interior_approaches_coexistence_as_the_domain_grows() {
    let p = ModelParams::reference();
    let g = grid(1.0, 0.1, 12.0);
    let distances: Vec<f64> = [1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|&z| {
            let s = spatial_steady(&p, &g, z, 4000.0, [1.0, 1.0]).unwrap();
            assert_eq!(s.outcome, SteadyOutcome::Positive);
            let (u, v) = s.centre();
            (u - 1.0).abs().max((v - 1.0).abs())
        })
        .collect();
    assert!(distances.windows(2).all(|w| w[1] < w[0]), "{distances:?}");
}

#[test]
fn steady_state_is_even_without_drift() {
    let p = ModelParams::reference().with_drifts(0.0, 0.0);
    let g = grid(1.0, 0.1, 8.0);
    let s = spatial_steady(&p, &g, 3.0, 4000.0, [1.0, 1.0]).unwrap();
    let n = s.u.len();
    for i in 0..n {
        assert!((s.u[i] - s.u[n - 1 - i]).abs() < 1e-6 && (s.v[i] - s.v[n - 1 - i]).abs() < 1e-6);
    }
}

#[test]
fn subcritical_interval_relaxes_to_zero() {
    let p = ModelParams::reference();
    let g = grid(1.0, 0.05, 8.0);
    assert!(principal_eigen(&p, &g, 0.3).unwrap().lambda < 0.0);
    let s = spatial_steady(&p, &g, 0.3, 4000.0, [1.0, 1.0]).unwrap();
    assert_eq!(s.outcome, SteadyOutcome::Extinct);
}

#[test]
fn small_dichotomy_table() {
    let p = ModelParams::reference();
    let mus = [1e-4, 0.3, 3.0, 30.0];
    let table = dichotomy_table(&p, 0.05, 16.0, &mus, &[0.2, 1.0], 100.0, &InitialData::cosine_bumps(1.0), 2).unwrap();
    let small = &table.rows[0];
    let large = &table.rows[1];
    let zstar = large.critical_half_length.unwrap();
    assert!(small.h0 < zstar && large.h0 > zstar);
    assert!(large.cells.iter().all(|c| c.class == Classification::Spreading), "{large:?}");
    assert_eq!(small.cells[0].class, Classification::Vanishing);
    assert!(small.lambda_h0 < 0.0 && large.lambda_h0 > 0.0);
    assert!(table.is_monotone());
}

#[test]
fn threshold_search_is_deterministic() {
    let p = ModelParams::reference();
    let g = grid(0.2, 0.05, 16.0);
    let mut options = ThresholdOptions::new(g.snapped_h0());
    options.horizon = 100.0;
    let init = InitialData::cosine_bumps(1.0);
    let a = find_mu_hat(&p, &g, &init, &options).unwrap();
    let b = find_mu_hat(&p, &g, &init, &options).unwrap();
    assert_eq!(a, b);
    assert!(a.mu_lo < a.mu_hi && a.relative_width <= 0.05);
    assert!(a.verified && a.monotone);
}
