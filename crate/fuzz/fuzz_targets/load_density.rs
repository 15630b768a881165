#![no_main]

use libfuzzer_sys::fuzz_target;
use termgeom::curve::{curve_from_density, Tolerances};
use termgeom::io::load_density;

fuzz_target!(|data: &[u8]| {
    let Ok(density) = load_density(data, 1e-4) else {
        return;
    };
    assert!(density.tail_mass() >= 0.0);
    let tol = Tolerances {
        grid_norm: 1e-2,
        tail: 1.0,
        ..Tolerances::default()
    };
    if let Ok(curve) = curve_from_density(&density, &tol) {
        let _ = curve.discount(density.grid().x_max() * 0.5);
    }
});
