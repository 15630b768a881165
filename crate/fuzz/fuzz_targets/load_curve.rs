#![no_main]

use libfuzzer_sys::fuzz_target;
use termgeom::io::load_curve;

fuzz_target!(|data: &[u8]| {
    if let Ok(curve) = load_curve(data) {
        for x in [0.0, 0.5, 1.0, 10.0, 1e6] {
            let p = curve.discount(x);
            assert!(p.is_nan() || p >= 0.0, "negative discount factor {p} at {x}");
        }
    }
});
