#![no_main]

use libfuzzer_sys::fuzz_target;
use termgeom::io::fmt_sig;

fuzz_target!(|bits: u64| {
    let v = f64::from_bits(bits);
    let s = fmt_sig(v);
    let back: f64 = s.parse().unwrap();
    if v.is_nan() {
        assert!(back.is_nan());
    } else if v.is_infinite() || v == 0.0 {
        assert_eq!(back, v);
    } else {
        assert!(((back - v) / v).abs() < 1e-11, "{v} printed as {s}");
    }
});
