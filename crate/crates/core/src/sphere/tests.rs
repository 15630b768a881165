use super::*;
use crate::curve::{flat_family_density, FlatFamilyParams};
use crate::dynamics::{effective_sigma, MarketPriceOfRisk, VolatilitySpec};

fn flat(r: f64, kappa: f64, g: &MaturityGrid) -> TermStructureDensity {
    flat_family_density(FlatFamilyParams::new(r, kappa).unwrap(), g).unwrap()
}

fn two_factor() -> VolatilitySpec {
    VolatilitySpec::Exponential {
        amplitudes: vec![0.3, 0.15],
        decays: vec![0.1, 0.02],
    }
}

#[test]
fn embedding() {
    let g = MaturityGrid::default();
    let rho = flat(0.05, f64::INFINITY, &g);
    let s = embed(&rho).unwrap();
    for (v, &x) in s.xi.iter().zip(g.nodes()) {
        assert!((v - 0.05f64.sqrt() * (-0.025 * x).exp()).abs() < 1e-15);
    }
    for (a, b) in s.density().iter().zip(rho.values()) {
        assert!((a - b).abs() <= 2.0 * f64::EPSILON * b);
    }
    assert!((s.norm - 1.0).abs() < 1e-5);
    let other = embed(&flat(0.09, f64::INFINITY, &g)).unwrap();
    let phi =
        crate::geometry::bhattacharyya_distance(&rho, &flat(0.09, f64::INFINITY, &g)).unwrap();
    assert!((g.inner(&s.xi, &other.xi) - phi.cos()).abs() < 1e-5);
    let bad = embed_values(&g, &vec![-1.0; g.len()], 0.0, 0.0);
    assert!(matches!(bad, Err(Error::NegativeDensity { index: 0, .. })));
}

#[test]
fn short_rate_operator() {
    let g = MaturityGrid::default();
    let op = DiscretizedOperator::new(&g);
    for kappa in [f64::INFINITY, 1.0] {
        let s = embed(&flat(0.05, kappa, &g)).unwrap();
        assert!(
            (short_rate_from_state(&op, &s) - 0.05).abs() < 1e-6,
            "κ = {kappa}"
        );
    }
    let gap = |n: usize| {
        let g = MaturityGrid::uniform(100.0, n).unwrap();
        let s = embed(&flat(0.05, 2.0, &g)).unwrap();
        (short_rate_from_state(&DiscretizedOperator::new(&g), &s) - s.xi[0] * s.xi[0]).abs()
    };
    let ratio = gap(1001) / gap(2001);
    assert!((ratio - 4.0).abs() < 0.3, "{ratio}");
}

#[test]
fn centering_matches_density_module() {
    let g = MaturityGrid::uniform(100.0, 512).unwrap();
    let rho = flat(0.04, 3.0, &g);
    let s = embed(&rho).unwrap();
    let nu = two_factor().evaluate(
        g.nodes(),
        &crate::dynamics::StateSummary {
            t: 0.0,
            short_rate: 0.04,
        },
        5.0,
    );
    let a = center_sigma(&g, &nu, &s.xi);
    let b = effective_sigma(&g, &nu, rho.values());
    for (p, q) in a.iter().flatten().zip(b.iter().flatten()) {
        assert!((p - q).abs() < 1e-14);
    }
}

#[test]
fn exponential_state_is_stationary_without_noise() {
    let g = MaturityGrid::default();
    let op = DiscretizedOperator::new(&g);
    let s = embed(&flat(0.05, f64::INFINITY, &g)).unwrap();
    let zero = vec![vec![0.0; g.len()]; 2];
    let (n, _) = step_sphere(
        &op,
        &s,
        &zero,
        &[0.0, 0.0],
        0.05,
        0.01,
        &[0.2, 0.1],
        &StepOptions::default(),
    )
    .unwrap();
    let worst =
        n.xi.iter()
            .zip(&s.xi)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn norm_drift_is_second_order_without_noise() {
    let g = MaturityGrid::uniform(200.0, 8192).unwrap();
    let op = DiscretizedOperator::new(&g);
    let rho = flat(0.05, 2.0, &g);
    let start = DensityPathState::initial(&rho, 1);
    let s = embed_values(&g, &start.rho, start.tail_mass, 0.0).unwrap();
    let zero = vec![vec![0.0; g.len()]];
    let opts = StepOptions {
        renormalize: false,
        ..StepOptions::default()
    };
    let err = |dt: f64| {
        step_sphere(&op, &s, &zero, &[0.0], s.xi[0] * s.xi[0], dt, &[0.0], &opts)
            .unwrap()
            .1
            .norm_err_pre
    };
    let ratio = err(0.04) / err(0.02);
    assert!((ratio - 4.0).abs() < 0.4, "{ratio}");
}

#[test]
fn squared_step_matches_density_step_in_mean() {
    // averaged over a cubature of dW that matches its first two moments, the
    // two schemes differ only at O(dt²)
    let g = MaturityGrid::uniform(200.0, 2048).unwrap();
    let op = DiscretizedOperator::new(&g);
    let rho0 = flat(0.05, 3.0, &g);
    let vol = two_factor();
    let mpr = MarketPriceOfRisk::Constant {
        values: vec![0.2, -0.1],
    };
    let opts = StepOptions {
        renormalize: false,
        ..StepOptions::default()
    };
    let dynamics = Dynamics::new(&g, &vol, &mpr, opts).unwrap();
    let start = DensityPathState::initial(&rho0, 2);
    let s = embed_values(&g, &start.rho, start.tail_mass, 0.0).unwrap();
    let sigma = dynamics.sigma(&start);
    let lambda = dynamics.lambda(&start);
    let diff = |dt: f64| {
        let a = (2.0 * dt).sqrt();
        let mut diff = vec![0.0; g.len()];
        for dw in [[a, 0.0], [-a, 0.0], [0.0, a], [0.0, -a]] {
            let (x, _) = step_sphere(&op, &s, &sigma, &lambda, start.r, dt, &dw, &opts).unwrap();
            let (p, _) = dynamics.step(&start, dt, &dw).unwrap();
            for i in 0..g.len() {
                diff[i] += 0.25 * (x.xi[i] * x.xi[i] - p.rho[i]);
            }
        }
        diff
    };
    // a spatial O(h²·dt) term survives; the Richardson difference removes it
    let quadratic = |dt: f64| {
        let (a, b) = (diff(dt), diff(dt / 2.0));
        a.iter()
            .zip(&b)
            .map(|(p, q)| (p - 2.0 * q).abs())
            .fold(0.0_f64, f64::max)
    };
    let ratio = quadratic(0.008) / quadratic(0.004);
    assert!((ratio - 4.0).abs() < 0.4, "{ratio}");
}

#[test]
fn decomposition() {
    let g = MaturityGrid::default();
    let op = DiscretizedOperator::new(&g);
    let s = embed(&flat(0.05, f64::INFINITY, &g)).unwrap();
    let d = drift_decomposition(&op, &s);
    assert!(d.tangency_residual.abs() < 1e-14);
    assert!(d.antisymmetric_residual.abs() < 1e-14);
    assert!((d.r - 0.05).abs() < 1e-6);
    assert!(d.gradient_dot_r <= 0.0, "{}", d.gradient_dot_r);
    for i in 0..g.len() {
        let full = op.apply(&s.xi)[i];
        assert!(
            (d.gradient_part[i] + d.symmetry_part[i] - full).abs() < 1e-12 * (1.0 + full.abs())
        );
    }
    let rep = serde_json::to_value(d.report()).unwrap();
    assert!(rep.get("gradient_dot_r").is_some());
}

#[test]
fn paired_paths_stay_close() {
    let g = MaturityGrid::uniform(100.0, 1024).unwrap();
    let rho0 = flat(0.05, f64::INFINITY, &g);
    let mut cfg = SimConfig::new(g, 0.01, 50, 1, 3, two_factor());
    cfg.mpr = MarketPriceOfRisk::Constant {
        values: vec![0.2, -0.1],
    };
    let inc = refined_increments(cfg.seed, 0, 2, cfg.dt, cfg.n_steps, 1);
    let run = paired_run(&rho0, &cfg, &inc).unwrap();
    assert_eq!(run.sup_gap.len(), 50);
    assert!(run.tangency.iter().all(|t| *t < 1e-12));
    let last = *run.sup_gap.last().unwrap();
    assert!(last < 1e-3, "{last}");
    let c = coarsen(&refined_increments(1, 0, 2, 0.02, 3, 2), 2);
    assert_eq!(c.len(), 3);
}
