use std::path::Path;

use serde::Serialize;
use serde_json::json;
use termgeom::curve::{
    curve_from_density, density_from_curve, AnalyticDensity, DiscountCurve, TermStructureDensity,
    Tolerances,
};
use termgeom::dynamics::{martingale_check, simulate, InitialCurve, SimConfig};
use termgeom::geometry::{
    bhattacharyya_distance, flat_family_fr_distance, geodesic_bvp, normal_fr_distance,
    FlatRateFamily, GeodesicOptions, NormalFamily, RateCoordinate,
};
use termgeom::io::{self, FamilySpec, DENSITY_HEADER};
use termgeom::moments::{
    max_entropy_law, moment_path, moments, scaling_exponent, validate_mean_sde,
    validate_variance_sde, MomentConstraint, SdeValidation, MAX_ORDER,
};
use termgeom::sphere::{drift_decomposition, paired_run, refined_increments, DiscretizedOperator};
use termgeom::MaturityGrid;

use crate::output::{header, OutDir};
use crate::profile::ResolvedTolerances;
use crate::{
    CalibrateArgs, Cli, Command, DistanceArgs, Failure, GeodesicArgs, GridArgs, Method,
    MomentsArgs, SimulateArgs, ValidateArgs,
};

/// Maps a geodesic point to its output columns.
type ToOutput = dyn Fn(&[f64]) -> Vec<f64>;

pub fn run(cli: &Cli) -> Result<(), Failure> {
    let tol = ResolvedTolerances::new(cli.tolerance_profile, cli.norm_tol, cli.tail_tol);
    let mut out = OutDir::create(&cli.out)?;
    let resolved = match &cli.command {
        Command::Distance(a) => distance(a, &tol, &mut out)?,
        Command::Geodesic(a) => geodesic(a, &tol, &mut out)?,
        Command::Simulate(a) => json!(simulate_cmd(a, &tol, &mut out)?),
        Command::Calibrate(a) => calibrate(a, &tol, &mut out)?,
        Command::Moments(a) => moments_cmd(a, &tol, &mut out)?,
        Command::Validate(a) => json!(validate(a, &tol, &mut out)?),
    };
    out.finish(cli, &tol, &resolved)
}

fn grid_of(g: &GridArgs) -> Result<MaturityGrid, Failure> {
    Ok(MaturityGrid::uniform(g.x_max, g.nodes)?)
}

/// What a curve argument resolved to.
enum Source {
    Curve(DiscountCurve),
    Density(TermStructureDensity),
}

fn read_source(spec: &str, tol: &Tolerances) -> Result<Source, Failure> {
    if spec.starts_with("flat:") {
        let p = io::parse_flat_spec(spec)?;
        return Ok(Source::Curve(DiscountCurve::ClosedForm(
            AnalyticDensity::Flat(p),
        )));
    }
    let text = std::fs::read_to_string(spec).map_err(|e| Failure::input(format!("{spec}: {e}")))?;
    let first = text.lines().next().unwrap_or("").trim();
    if first.replace(' ', "") == DENSITY_HEADER.join(",") {
        Ok(Source::Density(io::load_density(
            text.as_bytes(),
            tol.grid_norm,
        )?))
    } else {
        Ok(Source::Curve(io::load_curve(text.as_bytes())?))
    }
}

fn density_on(
    spec: &str,
    grid: &MaturityGrid,
    tol: &Tolerances,
) -> Result<TermStructureDensity, Failure> {
    match read_source(spec, tol)? {
        Source::Curve(c) => Ok(density_from_curve(&c, grid, tol)?),
        Source::Density(d) => Ok(d),
    }
}

fn label(spec: &str) -> String {
    if spec.starts_with("flat:") {
        return spec.to_string();
    }
    Path::new(spec)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| spec.to_string())
}

fn flat_family(spec: Option<&str>) -> Result<f64, Failure> {
    let spec = spec.ok_or_else(|| Failure::input("fisher-rao needs --family flat-kappa:K"))?;
    match io::parse_family_spec(spec)? {
        FamilySpec::FlatKappa(k) => Ok(k),
        FamilySpec::Normal => Err(Failure::input(
            "curves are densities on maturities; fisher-rao between curves needs --family flat-kappa:K",
        )),
    }
}

/// Least-squares fit of a flat rate at compounding frequency `kappa` to
/// `ln P` over the grid nodes where the curve is above `floor`.
fn fit_flat_rate(
    curve: &DiscountCurve,
    kappa: f64,
    grid: &MaturityGrid,
    floor: f64,
) -> Result<(f64, f64), Failure> {
    if let DiscountCurve::ClosedForm(AnalyticDensity::Flat(p)) = curve {
        if p.kappa == kappa {
            return Ok((p.rate, 0.0));
        }
    }
    let pts: Vec<(f64, f64)> = grid
        .nodes()
        .iter()
        .skip(1)
        .map(|&t| (t, curve.discount(t)))
        .take_while(|&(_, p)| p > floor)
        .map(|(t, p)| (t, p.ln()))
        .collect();
    if pts.is_empty() {
        return Err(Failure::input(
            "curve has no usable points for a flat-rate fit",
        ));
    }
    let model = |r: f64, t: f64| {
        if kappa.is_infinite() {
            -r * t
        } else {
            -kappa * (r * t / kappa).ln_1p()
        }
    };
    let sse = |lr: f64| -> f64 {
        pts.iter()
            .map(|&(t, lp)| (model(lr.exp(), t) - lp).powi(2))
            .sum()
    };
    // golden section on ln R
    let (mut a, mut b) = (1e-6_f64.ln(), 10.0_f64.ln());
    let g = 0.5 * (5.0_f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    while b - a > 1e-14 {
        if sse(c) < sse(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    let lr = 0.5 * (a + b);
    Ok((lr.exp(), (sse(lr) / pts.len() as f64).sqrt()))
}

fn distance(
    a: &DistanceArgs,
    tol: &ResolvedTolerances,
    out: &mut OutDir,
) -> Result<serde_json::Value, Failure> {
    let grid = grid_of(&a.grid)?;
    let labels: Vec<String> = a.curves.iter().map(|s| label(s)).collect();
    let n = a.curves.len();
    let mut matrix = vec![vec![0.0; n]; n];
    let mut diagnostics = Vec::new();
    match a.method {
        Method::Bhattacharyya => {
            let dens = a
                .curves
                .iter()
                .map(|s| density_on(s, &grid, &tol.curve))
                .collect::<Result<Vec<_>, _>>()?;
            for i in 0..n {
                for j in i + 1..n {
                    let v = bhattacharyya_distance(&dens[i], &dens[j])?;
                    matrix[i][j] = v;
                    matrix[j][i] = v;
                }
            }
            for (l, d) in labels.iter().zip(&dens) {
                diagnostics.push(json!({
                    "curve": l,
                    "closed_form": d.analytic().is_some(),
                    "grid_mass": d.total_mass() - d.tail_mass(),
                    "tail_mass": d.tail_mass(),
                }));
            }
        }
        Method::FisherRao => {
            let kappa = flat_family(a.family.as_deref())?;
            let mut rates = Vec::with_capacity(n);
            for (s, l) in a.curves.iter().zip(&labels) {
                let curve = match read_source(s, &tol.curve)? {
                    Source::Curve(c) => c,
                    Source::Density(d) => curve_from_density(&d, &tol.curve)?,
                };
                curve.check_admissible(&grid)?;
                let (rate, rms) = fit_flat_rate(&curve, kappa, &grid, tol.curve.tail)?;
                diagnostics
                    .push(json!({"curve": l, "fitted_rate": rate, "fit_rms_log_discount": rms}));
                rates.push(rate);
            }
            let family = FlatRateFamily::new(kappa, RateCoordinate::LogRate);
            let opts = GeodesicOptions {
                tol: tol.geodesic,
                ..GeodesicOptions::default()
            };
            for i in 0..n {
                for j in i + 1..n {
                    let path = geodesic_bvp(&family, &[rates[i].ln()], &[rates[j].ln()], &opts)?;
                    let closed = flat_family_fr_distance(rates[i], rates[j], kappa)?;
                    diagnostics.push(json!({
                        "pair": [labels[i], labels[j]],
                        "closed_form": closed,
                        "endpoint_error": path.endpoint_error,
                        "newton_iterations": path.newton_iterations,
                    }));
                    matrix[i][j] = path.fisher_information_length;
                    matrix[j][i] = path.fisher_information_length;
                }
            }
        }
    }
    let method = match a.method {
        Method::Bhattacharyya => "bhattacharyya",
        Method::FisherRao => "fisher-rao",
    };
    if n == 2 {
        println!("{}", io::fmt_sig(matrix[0][1]));
    } else {
        for (l, row) in labels.iter().zip(&matrix) {
            let cells: Vec<String> = row.iter().map(|v| io::fmt_sig(*v)).collect();
            println!("{l}: {}", cells.join(" "));
        }
    }
    let w = csv_matrix(&labels, &matrix);
    out.with_file("distance_matrix.csv", |f| {
        use std::io::Write;
        f.write_all(w.as_bytes()).map_err(termgeom::Error::from)
    })?;
    let value = if n == 2 {
        json!(matrix[0][1])
    } else {
        json!(matrix)
    };
    out.json(
        "distance.json",
        &json!({"method": method, "curves": labels, "value": value, "diagnostics": diagnostics}),
    )?;
    Ok(json!({"grid": a.grid, "family": a.family}))
}

fn csv_matrix(labels: &[String], m: &[Vec<f64>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head = vec![String::new()];
    head.extend(labels.iter().cloned());
    w.write_record(&head).expect("in-memory write");
    for (l, row) in labels.iter().zip(m) {
        let mut rec = vec![l.clone()];
        rec.extend(row.iter().map(|v| io::fmt_sig(*v)));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn geodesic(
    a: &GeodesicArgs,
    tol: &ResolvedTolerances,
    out: &mut OutDir,
) -> Result<serde_json::Value, Failure> {
    let opts = GeodesicOptions {
        steps: a.steps,
        samples: a.samples,
        tol: tol.geodesic,
        ..GeodesicOptions::default()
    };
    let (path, columns, to_output): (_, Vec<&str>, Box<ToOutput>) =
        match io::parse_family_spec(&a.family)? {
            FamilySpec::Normal => {
                let from = io::parse_point(&a.from, 2)?;
                let to = io::parse_point(&a.to, 2)?;
                if from[1] <= 0.0 || to[1] <= 0.0 {
                    return Err(Failure::input("σ must be positive"));
                }
                let p = geodesic_bvp(&NormalFamily, &from, &to, &opts)?;
                (
                    p,
                    vec!["u", "theta_1", "theta_2"],
                    Box::new(|t: &[f64]| t.to_vec()),
                )
            }
            FamilySpec::FlatKappa(kappa) => {
                let from = io::parse_point(&a.from, 1)?[0];
                let to = io::parse_point(&a.to, 1)?[0];
                if from <= 0.0 || to <= 0.0 {
                    return Err(Failure::input("rates must be positive"));
                }
                let fam = FlatRateFamily::new(kappa, RateCoordinate::LogRate);
                let p = geodesic_bvp(&fam, &[from.ln()], &[to.ln()], &opts)?;
                (
                    p,
                    vec!["u", "theta_1"],
                    Box::new(|t: &[f64]| vec![t[0].exp()]),
                )
            }
        };
    println!("{}", io::fmt_sig(path.length));
    let rows = path.u.iter().zip(&path.theta).map(|(u, t)| {
        let mut r = vec![*u];
        r.extend(to_output(t));
        r
    });
    out.csv("geodesic.csv", &header(&columns), rows)?;
    let closed = match io::parse_family_spec(&a.family)? {
        FamilySpec::Normal => {
            let (f, t) = (io::parse_point(&a.from, 2)?, io::parse_point(&a.to, 2)?);
            normal_fr_distance(f[0], f[1], t[0], t[1])?
        }
        FamilySpec::FlatKappa(k) => {
            0.5 * flat_family_fr_distance(
                io::parse_point(&a.from, 1)?[0],
                io::parse_point(&a.to, 1)?[0],
                k,
            )?
        }
    };
    out.json(
        "geodesic.json",
        &json!({
            "family": a.family,
            "length": path.length,
            "fisher_information_length": path.fisher_information_length,
            "closed_form_length": closed,
            "endpoint_error": path.endpoint_error,
            "residual": path.residual,
            "newton_iterations": path.newton_iterations,
            "samples": path.u.len(),
        }),
    )?;
    Ok(
        json!({"steps": opts.steps, "samples": opts.samples, "tol": opts.tol, "max_newton": opts.max_newton, "fd_step": opts.fd_step}),
    )
}

fn load_config(path: &Path, seed: Option<u64>, paths: Option<usize>) -> Result<SimConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let mut cfg = SimConfig::from_json(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(p) = paths {
        cfg.n_paths = p;
    }
    if let InitialCurve::Csv { path: p } = &cfg.initial_curve {
        let base = path.parent().unwrap_or(Path::new("."));
        let resolved = base.join(p);
        cfg.initial_curve = InitialCurve::Csv {
            path: resolved.to_string_lossy().into_owned(),
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn initial_density(cfg: &SimConfig, tol: &Tolerances) -> Result<TermStructureDensity, Failure> {
    match &cfg.initial_curve {
        InitialCurve::Flat(p) => Ok(TermStructureDensity::from_analytic(
            AnalyticDensity::Flat(*p),
            &cfg.grid,
        )),
        InitialCurve::Csv { path } => density_on(path, &cfg.grid, tol),
    }
}

fn simulate_cmd(
    a: &SimulateArgs,
    tol: &ResolvedTolerances,
    out: &mut OutDir,
) -> Result<SimConfig, Failure> {
    let cfg = load_config(&a.config, a.seed, a.paths)?;
    let rho0 = initial_density(&cfg, &tol.curve)?;
    let ens = simulate(&rho0, &cfg)?;
    let nodes = cfg.grid.nodes();
    if cfg.keep_snapshot_densities {
        for (k, &step) in ens.snapshot_steps.iter().enumerate() {
            let rows = ens.paths.iter().flat_map(|p| {
                let s = p.snapshots[k].state.as_ref().expect("densities kept");
                nodes
                    .iter()
                    .zip(&s.rho)
                    .map(move |(x, r)| [p.path_id as f64, *x, *r])
            });
            out.csv(
                &format!("snapshot_{step:05}.csv"),
                &header(&["path_id", "x", "rho"]),
                rows,
            )?;
        }
    }
    let mut cols = header(&["step", "norm_err", "min_rho"]);
    cols.extend((1..=cfg.d).map(|k| format!("constraint_resid_{k}")));
    let rows = ens.diagnostics.iter().enumerate().map(|(n, d)| {
        let mut r = vec![(n + 1) as f64, d.norm_err_pre, d.min_rho];
        r.extend(&d.constraint_resid);
        r
    });
    out.csv("diagnostics.csv", &cols, rows)?;

    let have_states = cfg.keep_trajectories || cfg.keep_snapshot_densities;
    if have_states {
        let rec = moment_path(&ens, a.moment_path)?;
        let rows = rec
            .rows
            .iter()
            .map(|r| [r.t, r.mean, r.variance, r.sigma_bar_norm, r.xbar_star]);
        out.csv(
            "moment_path.csv",
            &header(&["t", "mean", "variance", "sigma_bar_norm", "xbar_star"]),
            rows,
        )?;
    }
    let martingale = if cfg.track_maturities.is_empty() {
        None
    } else {
        let rep = martingale_check(&ens, &cfg.track_maturities)?;
        let rows = rep.rows.iter().map(|r| {
            [
                r.maturity,
                r.step as f64,
                r.t,
                r.mean,
                r.drift,
                r.std_err,
                r.z_score(),
            ]
        });
        out.csv(
            "martingale.csv",
            &header(&["maturity", "step", "t", "mean", "drift", "std_err", "z"]),
            rows,
        )?;
        Some(rep.max_abs_z())
    };

    let worst = ens
        .diagnostics
        .iter()
        .skip(1)
        .fold(ens.diagnostics[0].clone(), |a, b| a.merge(b));
    let rates: Vec<f64> = ens.paths.iter().map(|p| p.terminal.r).collect();
    let mean_r = rates.iter().sum::<f64>() / rates.len() as f64;
    let summary = json!({
        "n_paths": cfg.n_paths,
        "n_steps": cfg.n_steps,
        "snapshot_steps": ens.snapshot_steps,
        "max_norm_err_pre": worst.norm_err_pre,
        "min_rho": worst.min_rho,
        "max_constraint_resid": worst.max_constraint_resid(),
        "clamp_events": worst.clamp_events,
        "max_short_rate_fd_gap": worst.short_rate_fd_gap,
        "terminal_short_rate_mean": mean_r,
        "martingale_max_abs_z": martingale,
    });
    println!(
        "{} paths × {} steps; max pre-projection norm error {}",
        cfg.n_paths,
        cfg.n_steps,
        io::fmt_sig(worst.norm_err_pre)
    );
    out.json("summary.json", &summary)?;
    Ok(cfg)
}

fn calibrate(
    a: &CalibrateArgs,
    _tol: &ResolvedTolerances,
    out: &mut OutDir,
) -> Result<serde_json::Value, Failure> {
    let grid = grid_of(&a.grid)?;
    let m = a.mean;
    let mut raw = vec![m];
    // raw moments from central ones
    if let Some(c2) = a.central2 {
        raw.push(c2 + m * m);
    }
    if let Some(c3) = a.central3 {
        raw.push(c3 + 3.0 * m * raw[1] - 2.0 * m.powi(3));
    }
    if let Some(c4) = a.central4 {
        raw.push(c4 + 4.0 * m * raw[2] - 6.0 * m * m * raw[1] + 3.0 * m.powi(4));
    }
    let constraints: Vec<MomentConstraint> = raw
        .iter()
        .enumerate()
        .map(|(i, &value)| MomentConstraint {
            order: i + 1,
            value,
        })
        .collect();
    let law = max_entropy_law(&constraints)?;
    let density = TermStructureDensity::from_analytic(law.clone(), &grid);
    let report = moments(&density, MAX_ORDER)?;
    out.with_file("density.csv", |f| io::write_density(f, &density))?;
    out.with_file("curve.csv", |f| {
        io::write_curve(f, &DiscountCurve::ClosedForm(law.clone()), &grid)
    })?;
    out.json(
        "calibration.json",
        &json!({"constraints": constraints, "law": law, "moments": report}),
    )?;
    match &law {
        AnalyticDensity::Flat(p) => println!("exponential, R = {}", io::fmt_sig(p.rate)),
        _ => println!("polynomial-exponential, {} coefficients", constraints.len()),
    }
    Ok(json!({"grid": a.grid, "constraints": constraints}))
}

fn moments_cmd(
    a: &MomentsArgs,
    tol: &ResolvedTolerances,
    out: &mut OutDir,
) -> Result<serde_json::Value, Failure> {
    let grid = grid_of(&a.grid)?;
    let density = density_on(&a.curve, &grid, &tol.curve)?;
    let report = moments(&density, MAX_ORDER)?;
    match report.mean {
        Some(m) => println!("mean {}", io::fmt_sig(m)),
        None => println!("mean does not exist"),
    }
    out.json("moments.json", &report)?;
    Ok(json!({"grid": density.grid().clone()}))
}

#[derive(Serialize)]
struct SdeSummary {
    max_residual: f64,
    max_residual_half_step: f64,
    rms_residual: f64,
    rms_residual_half_step: f64,
    /// Observed order of the rms residual under halving.
    scaling_exponent: f64,
    max_increment: f64,
    within_tolerance: bool,
}

#[derive(Serialize)]
struct PairingSummary {
    path_id: usize,
    final_sup_gap: f64,
    final_sup_gap_half_step: f64,
    max_tangency: f64,
    terminal_decomposition: termgeom::sphere::DecompositionReport,
}

fn validate(
    a: &ValidateArgs,
    tol: &ResolvedTolerances,
    out: &mut OutDir,
) -> Result<SimConfig, Failure> {
    let mut cfg = load_config(&a.config, a.seed, a.paths)?;
    cfg.keep_trajectories = true;
    cfg.keep_snapshot_densities = false;
    let rho0 = initial_density(&cfg, &tol.curve)?;
    let mut half = cfg.clone();
    half.dt *= 0.5;
    half.n_steps *= 2;

    let opts = SdeValidation {
        max_residual: tol.moment_residual,
        ..SdeValidation::default()
    };
    let ens = simulate(&rho0, &cfg)?;
    let ens_half = simulate(&rho0, &half)?;
    let sde = |f: fn(
        &termgeom::dynamics::Ensemble,
        &SdeValidation,
    ) -> termgeom::Result<termgeom::moments::MomentSdeReport>|
     -> Result<SdeSummary, Failure> {
        let c = f(&ens, &opts)?;
        let h = f(&ens_half, &opts)?;
        Ok(SdeSummary {
            max_residual: c.max_residual,
            max_residual_half_step: h.max_residual,
            rms_residual: c.rms_residual(),
            rms_residual_half_step: h.rms_residual(),
            scaling_exponent: scaling_exponent(c.rms_residual(), h.rms_residual(), 2.0),
            max_increment: c.max_increment,
            within_tolerance: c.within_tolerance,
        })
    };
    let mean = sde(validate_mean_sde)?;
    let variance = sde(validate_variance_sde)?;

    let op = DiscretizedOperator::new(&cfg.grid);
    let op_cfg = cfg.clone();
    let mut pairing = Vec::with_capacity(cfg.n_paths);
    let mut sphere_rows = Vec::new();
    for p in 0..cfg.n_paths {
        let fine = refined_increments(cfg.seed, p as u64, cfg.d, cfg.dt, cfg.n_steps, 2);
        let coarse = termgeom::sphere::coarsen(&fine, 2);
        let run = paired_run(&rho0, &op_cfg, &coarse)?;
        let run_half = paired_run(&rho0, &half, &fine)?;
        let dec = drift_decomposition(&op, &run.sphere);
        pairing.push(PairingSummary {
            path_id: p,
            final_sup_gap: *run.sup_gap.last().expect("at least one step"),
            final_sup_gap_half_step: *run_half.sup_gap.last().expect("at least one step"),
            max_tangency: run.tangency.iter().copied().fold(0.0, f64::max),
            terminal_decomposition: dec.report(),
        });
        for (x, xi) in cfg.grid.nodes().iter().zip(&run.sphere.xi) {
            sphere_rows.push([p as f64, *x, *xi]);
        }
    }
    out.csv("sphere.csv", &header(&["path_id", "x", "xi"]), sphere_rows)?;
    for (name, s) in [("mean", &mean), ("variance", &variance)] {
        println!(
            "{name} SDE: rms residual {} (half step {}), max {}, exponent {:.3}",
            io::fmt_sig(s.rms_residual),
            io::fmt_sig(s.rms_residual_half_step),
            io::fmt_sig(s.max_residual),
            s.scaling_exponent
        );
    }
    let gap = pairing.iter().map(|p| p.final_sup_gap).fold(0.0, f64::max);
    println!("sphere pairing: largest final sup gap {}", io::fmt_sig(gap));
    out.json(
        "validate.json",
        &json!({"mean_sde": mean, "variance_sde": variance, "sphere_pairing": pairing}),
    )?;
    Ok(cfg)
}
