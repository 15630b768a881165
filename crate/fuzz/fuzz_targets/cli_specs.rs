#![no_main]

use libfuzzer_sys::fuzz_target;
use termgeom::io::{parse_family_spec, parse_flat_spec, parse_point, FamilySpec};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(p) = parse_flat_spec(s) {
        assert!(p.rate > 0.0 && p.kappa > 0.0);
    }
    if let Ok(FamilySpec::FlatKappa(k)) = parse_family_spec(s) {
        assert!(k > 0.0);
    }
    for n in 1..=3 {
        if let Ok(v) = parse_point(s, n) {
            assert_eq!(v.len(), n);
            assert!(v.iter().all(|x| x.is_finite()));
        }
    }
});
