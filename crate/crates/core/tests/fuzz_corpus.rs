//! Replays the checked-in fuzz seeds through the parsers with the same
//! invariants the fuzz targets assert.

use std::fs;
use std::path::PathBuf;

use termgeom::curve::{curve_from_density, Tolerances};
use termgeom::dynamics::SimConfig;
use termgeom::io::{
    fmt_sig, load_curve, load_density, parse_family_spec, parse_flat_spec, parse_point, FamilySpec,
};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn curve_seeds() {
    let mut accepted = 0;
    for (name, data) in seeds("load_curve") {
        if let Ok(curve) = load_curve(data.as_slice()) {
            accepted += 1;
            for x in [0.0, 0.5, 1.0, 10.0, 1e6] {
                let p = curve.discount(x);
                assert!(p.is_nan() || p >= 0.0, "{name}: discount {p} at {x}");
            }
        }
    }
    assert!(accepted >= 1);
}

#[test]
fn density_seeds() {
    let mut accepted = 0;
    for (name, data) in seeds("load_density") {
        let Ok(density) = load_density(data.as_slice(), 1e-4) else {
            continue;
        };
        accepted += 1;
        assert!(density.tail_mass() >= 0.0, "{name}");
        let tol = Tolerances {
            grid_norm: 1e-2,
            tail: 1.0,
            ..Tolerances::default()
        };
        if let Ok(curve) = curve_from_density(&density, &tol) {
            let _ = curve.discount(density.grid().x_max() * 0.5);
        }
    }
    assert!(accepted >= 1);
}

#[test]
fn spec_seeds() {
    for (name, data) in seeds("cli_specs") {
        let Ok(s) = std::str::from_utf8(&data) else {
            continue;
        };
        if let Ok(p) = parse_flat_spec(s) {
            assert!(p.rate > 0.0 && p.kappa > 0.0, "{name}");
        }
        if let Ok(FamilySpec::FlatKappa(k)) = parse_family_spec(s) {
            assert!(k > 0.0, "{name}");
        }
        for n in 1..=3 {
            if let Ok(v) = parse_point(s, n) {
                assert_eq!(v.len(), n, "{name}");
            }
        }
    }
}

#[test]
fn config_seeds() {
    let mut accepted = 0;
    for (name, data) in seeds("sim_config") {
        let Ok(s) = std::str::from_utf8(&data) else {
            continue;
        };
        if let Ok(cfg) = SimConfig::from_json(s) {
            accepted += 1;
            assert_eq!(SimConfig::from_json(&cfg.to_json()).unwrap(), cfg, "{name}");
        }
    }
    assert!(accepted >= 1);
}

#[test]
fn number_format_seeds() {
    for (name, data) in seeds("fmt_sig") {
        let v = f64::from_le_bytes(data[..8].try_into().unwrap());
        let back: f64 = fmt_sig(v).parse().unwrap();
        if v.is_nan() {
            assert!(back.is_nan(), "{name}");
        } else if v.is_infinite() || v == 0.0 {
            assert_eq!(back, v, "{name}");
        } else {
            assert!(((back - v) / v).abs() < 1e-11, "{name}: {v} → {back}");
        }
    }
}
