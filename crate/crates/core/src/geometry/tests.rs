use super::*;
use crate::curve::{flat_family_density, FlatFamilyParams};
use crate::grid::MaturityGrid;

fn flat(r: f64, kappa: f64, g: &MaturityGrid) -> TermStructureDensity {
    flat_family_density(FlatFamilyParams::new(r, kappa).unwrap(), g).unwrap()
}

#[test]
fn bhattacharyya_closed_forms() {
    let g = MaturityGrid::default();
    let (r1, r2) = (0.04_f64, 0.09_f64);
    let exp =
        bhattacharyya_distance(&flat(r1, f64::INFINITY, &g), &flat(r2, f64::INFINITY, &g)).unwrap();
    assert!((exp - (12.0f64 / 13.0).acos()).abs() < 1e-12);
    let simple = bhattacharyya_distance(&flat(r1, 1.0, &g), &flat(r2, 1.0, &g)).unwrap();
    let want = ((r1 * r2).sqrt() / (r1 - r2) * (r1 / r2).ln()).acos();
    assert!((simple - want).abs() < 1e-10);
    let same = flat(0.05, 3.0, &g);
    assert_eq!(bhattacharyya_distance(&same, &same).unwrap(), 0.0);
    let sampled = same.clone().into_sampled();
    assert_eq!(bhattacharyya_distance(&sampled, &sampled).unwrap(), 0.0);
}

#[test]
fn gridded_bhattacharyya_is_close_to_closed_form() {
    let g = MaturityGrid::default();
    let a = flat(0.04, f64::INFINITY, &g).into_sampled();
    let b = flat(0.09, f64::INFINITY, &g).into_sampled();
    let phi = bhattacharyya_distance(&a, &b).unwrap();
    assert!((phi - (12.0f64 / 13.0).acos()).abs() < 1e-5);
    let other = flat(
        0.04,
        f64::INFINITY,
        &MaturityGrid::uniform(100.0, 100).unwrap(),
    );
    assert!(matches!(
        bhattacharyya_distance(&a, &other),
        Err(Error::GridMismatch)
    ));
}

#[test]
fn normal_distance_formulas() {
    assert_eq!(normal_fr_distance(0.0, 1.0, 0.0, 1.0).unwrap(), 0.0);
    let d = normal_fr_distance(0.0, 1.0, 0.0, 2.0).unwrap();
    assert!((d - std::f64::consts::LN_2 / 2f64.sqrt()).abs() < 1e-14);
    let a = normal_fr_distance(0.3, 1.1, -0.4, 0.6).unwrap();
    let b = normal_fr_distance(-0.4, 0.6, 0.3, 1.1).unwrap();
    assert!((a - b).abs() < 1e-15);
    assert!(normal_fr_distance(0.0, 0.0, 0.0, 1.0).is_err());
}

#[test]
fn flat_distance_formula() {
    let d = flat_family_fr_distance(0.04, 0.09, 1.0).unwrap();
    assert!((d - (1.0f64 / 3.0).sqrt() * 2.25f64.ln()).abs() < 1e-14);
    let s = flat_family_fr_distance(0.4, 0.9, 1.0).unwrap();
    assert!((d - s).abs() < 1e-14);
    assert_eq!(flat_family_fr_distance(0.05, 0.05, 2.0).unwrap(), 0.0);
    assert!(flat_family_fr_distance(0.0, 0.05, 2.0).is_err());
}

#[test]
fn vertical_normal_geodesic() {
    let p = geodesic_bvp(
        &NormalFamily,
        &[0.0, 1.0],
        &[0.0, 2.0],
        &GeodesicOptions::default(),
    )
    .unwrap();
    assert!((p.length - std::f64::consts::LN_2 / 2f64.sqrt()).abs() < 1e-8);
    assert!(p.theta.iter().all(|t| t[0].abs() < 1e-9));
    assert!(p.residual < 1e-4);
}

#[test]
fn horizontal_normal_geodesic_is_semicircle() {
    let opts = GeodesicOptions::default();
    let p = geodesic_bvp(&NormalFamily, &[-1.0, 1.0], &[1.0, 1.0], &opts).unwrap();
    let want = normal_fr_distance(-1.0, 1.0, 1.0, 1.0).unwrap();
    assert!((p.length - want).abs() < 1e-6, "{} vs {want}", p.length);
    // centre on σ = 0 at μ = 0 by symmetry; radius² = 1 + 2
    for t in &p.theta {
        assert!((t[0] * t[0] + 2.0 * t[1] * t[1] - 3.0).abs() < 1e-6);
    }
}

#[test]
fn degenerate_geodesic() {
    let p = geodesic_bvp(
        &NormalFamily,
        &[0.5, 2.0],
        &[0.5, 2.0],
        &GeodesicOptions::default(),
    )
    .unwrap();
    assert_eq!(p.length, 0.0);
    assert_eq!(p.theta.len(), 1);
}

#[test]
fn flat_geodesic_in_both_coordinates() {
    let opts = GeodesicOptions {
        samples: 11,
        ..GeodesicOptions::default()
    };
    let want = flat_family_fr_distance(0.04, 0.09, 1.0).unwrap();
    let by_rate = geodesic_bvp(
        &FlatRateFamily::new(1.0, RateCoordinate::Rate),
        &[0.04],
        &[0.09],
        &opts,
    )
    .unwrap();
    let lf = FlatRateFamily::new(1.0, RateCoordinate::LogRate);
    let by_log = geodesic_bvp(&lf, &[0.04f64.ln()], &[0.09f64.ln()], &opts).unwrap();
    assert!((by_rate.fisher_information_length - want).abs() < 1e-6);
    assert!((by_rate.fisher_information_length - by_log.fisher_information_length).abs() < 1e-8);
}

#[test]
fn domain_exit_is_reported() {
    let r = geodesic_bvp(
        &NormalFamily,
        &[0.0, -1.0],
        &[0.0, 1.0],
        &GeodesicOptions::default(),
    );
    assert!(matches!(r, Err(Error::DomainExit(_))));
}
