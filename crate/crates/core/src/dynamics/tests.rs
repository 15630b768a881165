use super::*;
use crate::curve::{flat_family_density, FlatFamilyParams};

fn exp_density(r: f64, grid: &MaturityGrid) -> TermStructureDensity {
    flat_family_density(FlatFamilyParams::continuous(r).unwrap(), grid).unwrap()
}

fn two_factor() -> VolatilitySpec {
    VolatilitySpec::Exponential {
        amplitudes: vec![0.3, 0.15],
        decays: vec![0.1, 0.02],
    }
}

fn mpr() -> MarketPriceOfRisk {
    MarketPriceOfRisk::Constant {
        values: vec![0.2, -0.1],
    }
}

#[test]
fn centering() {
    let g = MaturityGrid::uniform(400.0, 8001).unwrap();
    let rho = exp_density(0.1, &g);
    let c = effective_sigma(&g, &[vec![0.7; g.len()]], rho.values());
    assert!(c[0].iter().all(|v| v.abs() < 1e-14));
    let x = effective_sigma(&g, &[g.nodes().to_vec()], rho.values());
    // E_ρ[x] = 1/R, up to the trapezoid error h²R/12
    for (s, &xi) in x[0].iter().zip(g.nodes()) {
        assert!((s - (xi - 10.0)).abs() < 1e-4);
    }
    let again = effective_sigma(&g, &x, rho.values());
    for (a, b) in again[0].iter().zip(&x[0]) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn constraint_residual() {
    let g = MaturityGrid::uniform(300.0, 4001).unwrap();
    let rho = exp_density(0.05, &g);
    let s0 = DensityPathState::initial(&rho, 2);
    let vol = two_factor();
    let nu = vol.evaluate(g.nodes(), &s0.summary(), 5.0);
    let sigma = effective_sigma(&g, &nu, rho.values());
    let res = volatility_constraint_residual(&g, rho.values(), &sigma);
    assert_eq!(res.len(), 2);
    assert!(res.iter().all(|v| v.abs() < 1e-10));
    // uncentered ν: the residual is ∫ρν = 0.3·0.05/0.15 for the first factor
    let raw = volatility_constraint_residual(&g, rho.values(), &nu);
    assert!((raw[0] - 0.1).abs() < 1e-4);
    assert!((raw[1] - 0.15 * 0.05 / 0.07).abs() < 1e-4);
}

#[test]
fn exponential_is_a_fixed_point_without_noise() {
    let g = MaturityGrid::uniform(200.0, 4096).unwrap();
    let rho = exp_density(0.05, &g);
    let s0 = DensityPathState::initial(&rho, 2);
    let vol = VolatilitySpec::Zero { factors: 2 };
    let m = MarketPriceOfRisk::Zero;
    let (s1, d) = step_density(
        &g,
        &s0,
        &vol,
        &m,
        0.01,
        &[0.3, -0.2],
        StepOptions::default(),
    )
    .unwrap();
    let worst = s1
        .rho
        .iter()
        .zip(&s0.rho)
        .map(|(a, b)| ((a - b) / b).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
    assert!(d.norm_err_pre < 1e-8);
    assert_eq!(s1.r, s1.rho[0]);
    assert!((s1.numeraire - (s0.r * 0.01).exp()).abs() < 1e-15);
}

#[test]
fn euler_step_conserves_mass_to_spatial_error() {
    let g = MaturityGrid::uniform(300.0, 4096).unwrap();
    let rho = exp_density(0.05, &g);
    let s0 = DensityPathState::initial(&rho, 2);
    let opts = StepOptions {
        scheme: Scheme::EulerClamped,
        renormalize: false,
        ..StepOptions::default()
    };
    let (_, d) = step_density(&g, &s0, &two_factor(), &mpr(), 0.01, &[0.1, -0.05], opts).unwrap();
    // what remains is the O(h²) mismatch between the upwind stencil and the
    // trapezoid rule
    assert!(d.norm_err_pre < 1e-8, "{}", d.norm_err_pre);
}

#[test]
fn log_euler_mass_error_is_first_order() {
    let g = MaturityGrid::uniform(300.0, 4096).unwrap();
    let rho = exp_density(0.05, &g);
    let s0 = DensityPathState::initial(&rho, 2);
    let opts = StepOptions {
        renormalize: false,
        ..StepOptions::default()
    };
    let z = [1.3, -0.4];
    let err = |dt: f64| {
        let dw: Vec<f64> = z.iter().map(|v| v * dt.sqrt()).collect();
        step_density(&g, &s0, &two_factor(), &mpr(), dt, &dw, opts)
            .unwrap()
            .1
            .norm_err_pre
    };
    let ratio = err(0.02) / err(0.01);
    assert!((ratio - 2.0).abs() < 0.15, "{ratio}");
}

#[test]
fn antithetic_increment_converges_to_drift() {
    let g = MaturityGrid::uniform(200.0, 2048).unwrap();
    let rho = flat_family_density(FlatFamilyParams::new(0.05, 2.0).unwrap(), &g).unwrap();
    let s0 = DensityPathState::initial(&rho, 2);
    let opts = StepOptions {
        renormalize: false,
        ..StepOptions::default()
    };
    let dynamics = Dynamics::new(&g, two_factor_static(), mpr_static(), opts).unwrap();
    let sigma = dynamics.sigma(&s0);
    let lambda = dynamics.lambda(&s0);
    let deriv = g.derivative_upwind(&s0.rho);
    let want: Vec<f64> = (0..g.len())
        .map(|i| {
            let tilt: f64 = (0..2).map(|k| sigma[k][i] * lambda[k]).sum();
            deriv[i] + s0.r * s0.rho[i] + s0.rho[i] * tilt
        })
        .collect();
    // the four points ±√(2dt)e_k reproduce the first two moments of dW
    let err = |dt: f64| {
        let a = (2.0 * dt).sqrt();
        let mut mean = vec![0.0; g.len()];
        for dw in [[a, 0.0], [-a, 0.0], [0.0, a], [0.0, -a]] {
            let (s, _) = dynamics.step(&s0, dt, &dw).unwrap();
            mean.iter_mut()
                .zip(&s.rho)
                .for_each(|(m, v)| *m += 0.25 * v);
        }
        (0..g.len())
            .map(|i| ((mean[i] - s0.rho[i]) / dt - want[i]).abs())
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(1e-3), err(5e-4));
    assert!(e1 < 1e-3, "{e1}");
    assert!((e1 / e2 - 2.0).abs() < 0.2, "{}", e1 / e2);
}

fn two_factor_static() -> &'static VolatilitySpec {
    static V: std::sync::OnceLock<VolatilitySpec> = std::sync::OnceLock::new();
    V.get_or_init(two_factor)
}

fn mpr_static() -> &'static MarketPriceOfRisk {
    static M: std::sync::OnceLock<MarketPriceOfRisk> = std::sync::OnceLock::new();
    M.get_or_init(mpr)
}

#[test]
fn drift_forms_agree() {
    let g = MaturityGrid::uniform(200.0, 1024).unwrap();
    let rho = flat_family_density(FlatFamilyParams::new(0.04, 3.0).unwrap(), &g).unwrap();
    let s0 = DensityPathState::initial(&rho, 2);
    for scheme in [Scheme::LogEuler, Scheme::EulerClamped] {
        let a = StepOptions {
            scheme,
            ..StepOptions::default()
        };
        let b = StepOptions {
            drift_form: DriftForm::Centered,
            ..a
        };
        let dw = [0.05, -0.02];
        let (x, _) = step_density(&g, &s0, &two_factor(), &mpr(), 0.01, &dw, a).unwrap();
        let (y, _) = step_density(&g, &s0, &two_factor(), &mpr(), 0.01, &dw, b).unwrap();
        for (p, q) in x.rho.iter().zip(&y.rho) {
            assert!((p - q).abs() <= 1e-14 * p.abs().max(1e-300), "{scheme:?}");
        }
    }
}

#[test]
fn short_rate_identity_is_second_order() {
    let gap = |n: usize| {
        let g = MaturityGrid::uniform(100.0, n).unwrap();
        let rho = flat_family_density(FlatFamilyParams::new(0.05, 1.0).unwrap(), &g).unwrap();
        short_rate_fd_gap(&g, rho.values())
    };
    let ratio = gap(1001) / gap(2001);
    assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
}

#[test]
fn bond_prices() {
    let g = MaturityGrid::uniform(200.0, 4096).unwrap();
    let rho = flat_family_density(FlatFamilyParams::new(0.05, 2.0).unwrap(), &g).unwrap();
    let s = DensityPathState::initial(&rho, 1);
    assert_eq!(bond_price_from_state(&g, &s, 0.0).unwrap(), 1.0);
    let curve = crate::curve::DiscountCurve::flat(0.05, 2.0).unwrap();
    for x in [0.5, 3.3, 10.0, 30.0] {
        assert!((bond_price_from_state(&g, &s, x).unwrap() - curve.discount(x)).abs() < 1e-5);
    }
    let end = bond_price_from_state(&g, &s, 200.0).unwrap();
    assert!((end - rho.tail_mass()).abs() < 1e-4);
    assert!(matches!(
        bond_price_from_state(&g, &s, 201.0),
        Err(Error::OutOfGrid { .. })
    ));
}

#[test]
fn bond_volatility_vanishes_at_both_ends() {
    let g = MaturityGrid::uniform(300.0, 4096).unwrap();
    let rho = exp_density(0.05, &g);
    let s0 = DensityPathState::initial(&rho, 2);
    let vol = two_factor();
    let dynamics =
        Dynamics::new(&g, &vol, &MarketPriceOfRisk::Zero, StepOptions::default()).unwrap();
    let sig = bond_volatility(&g, &s0.rho, &dynamics.sigma(&s0));
    for s in &sig {
        assert_eq!(s[0], 0.0);
        assert!(s[g.len() - 1].abs() < 1e-14);
        assert!(s.iter().any(|v| v.abs() > 1e-3));
    }
}

fn config(
    grid: MaturityGrid,
    dt: f64,
    n_steps: usize,
    n_paths: usize,
    vol: VolatilitySpec,
) -> SimConfig {
    let mut c = SimConfig::new(grid, dt, n_steps, n_paths, 11, vol);
    c.snapshots = vec![n_steps / 2];
    c
}

#[test]
fn deterministic_roll_matches_shifted_curve() {
    // with σ = 0, ρ_t(x) = ρ₀(x + t)/P₀(t)
    let g = MaturityGrid::uniform(200.0, 4096).unwrap();
    let params = FlatFamilyParams::new(0.05, 2.0).unwrap();
    let rho = flat_family_density(params, &g).unwrap();
    let mut cfg = config(
        g.clone(),
        0.005,
        200,
        1,
        VolatilitySpec::Zero { factors: 2 },
    );
    cfg.track_maturities = vec![5.0];
    let ens = simulate(&rho, &cfg).unwrap();
    let term = &ens.paths[0].terminal;
    let t = term.t;
    let p0t = params.discount(t);
    for (i, &x) in g.nodes().iter().enumerate().take(2000) {
        let want = params.density(x + t) / p0t;
        let e = (term.rho[i] - want).abs() / want;
        assert!(e < 2e-4, "x = {x}: {e}");
    }
    // P(t,T) accrues at the short rate, so P(t,T)/N_t stays at P(0,T)
    let first = ens.paths[0].snapshots[0].deflated_prices[0];
    let last = ens.paths[0].snapshots.last().unwrap().deflated_prices[0];
    assert!((first - params.discount(5.0)).abs() < 1e-5);
    assert!((last - first).abs() < 1e-4, "{first} {last}");
}

#[test]
fn fixed_seed_is_reproducible() {
    let g = MaturityGrid::uniform(100.0, 512).unwrap();
    let rho = exp_density(0.05, &g);
    let mut cfg = config(g, 0.01, 20, 8, two_factor());
    cfg.mpr = mpr();
    let a = simulate(&rho, &cfg).unwrap();
    let b = simulate(&rho, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.snapshot_steps, vec![0, 10, 20]);
    cfg.seed = 12;
    let c = simulate(&rho, &cfg).unwrap();
    assert_ne!(a.paths[0].terminal, c.paths[0].terminal);
    assert_ne!(a.paths[0].terminal, a.paths[1].terminal);
}

#[test]
fn diagnostics_are_recorded() {
    let g = MaturityGrid::uniform(100.0, 512).unwrap();
    let rho = exp_density(0.05, &g);
    let mut cfg = config(g, 0.01, 30, 4, two_factor());
    cfg.keep_trajectories = true;
    let ens = simulate(&rho, &cfg).unwrap();
    assert_eq!(ens.diagnostics.len(), 30);
    for d in &ens.diagnostics {
        assert_eq!(d.constraint_resid.len(), 2);
        assert!(d.max_constraint_resid() < 1e-12);
        assert!(d.min_rho > 0.0);
        assert!(d.norm_err_pre.is_finite() && d.norm_err_pre > 0.0);
    }
    let p = &ens.paths[0];
    assert_eq!(p.trajectory.as_ref().unwrap().len(), 31);
    assert_eq!(p.increments.as_ref().unwrap().len(), 30);
    let w: f64 = p.increments.as_ref().unwrap().iter().map(|v| v[0]).sum();
    assert!((w - p.terminal.w[0]).abs() < 1e-12);
    for s in p.trajectory.as_ref().unwrap() {
        assert_eq!(s.r, s.rho[0]);
        assert!((s.total_mass(ens.grid()) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn martingale_statistics() {
    let g = MaturityGrid::uniform(100.0, 512).unwrap();
    let rho = exp_density(0.05, &g);
    let mut cfg = config(g.clone(), 0.02, 25, 400, two_factor());
    cfg.mpr = mpr();
    cfg.track_maturities = vec![2.0, 5.0];
    let ens = simulate(&rho, &cfg).unwrap();
    let rep = martingale_check(&ens, &[2.0, 5.0, 10.0]).unwrap();
    assert_eq!(rep.rows.len(), 9);
    let s0 = DensityPathState::initial(&rho, 2);
    for row in rep.rows.iter().filter(|r| r.step == 0) {
        assert_eq!(row.drift, 0.0);
        assert!((row.mean - bond_price_from_state(&g, &s0, row.maturity).unwrap()).abs() < 1e-14);
    }
    assert!(rep.max_abs_z() < 3.5, "{rep:?}");
    cfg.keep_snapshot_densities = false;
    let ens = simulate(&rho, &cfg).unwrap();
    assert!(martingale_check(&ens, &[10.0]).is_err());
}

#[test]
fn failures_carry_path_and_step() {
    let g = MaturityGrid::uniform(100.0, 256).unwrap();
    let rho = exp_density(0.05, &g);
    let mut cfg = config(
        g.clone(),
        0.05,
        20,
        3,
        VolatilitySpec::Linear { slopes: vec![2.0] },
    );
    cfg.d = 1;
    cfg.scheme = Scheme::EulerClamped;
    cfg.clamp_budget = 0;
    match simulate(&rho, &cfg) {
        Err(Error::Simulation { path, step, source }) => {
            assert_eq!(path, 0);
            assert!(step >= 1);
            assert!(matches!(*source, Error::PositivityLoss(_)));
        }
        other => panic!("{other:?}"),
    }
    let mut cfg = config(g, 0.05, 20, 2, VolatilitySpec::Linear { slopes: vec![2.0] });
    cfg.d = 1;
    cfg.blowup_cap = 0.06;
    assert!(matches!(
        simulate(&rho, &cfg),
        Err(Error::Simulation { source, .. }) if matches!(*source, Error::BlowUp(_))
    ));
}

#[test]
fn brownian_streams_are_standard_normal() {
    let mut s = BrownianStream::new(3, 0, 1);
    let n = 20000;
    let z: Vec<f64> = (0..n).map(|_| s.next_normal()).collect();
    let mean = z.iter().sum::<f64>() / n as f64;
    let var = z.iter().map(|v| v * v).sum::<f64>() / n as f64;
    assert!(mean.abs() < 0.03 && (var - 1.0).abs() < 0.04);
    let mut t = BrownianStream::new(3, 1, 1);
    assert_ne!(t.next_normal(), z[0]);
}
