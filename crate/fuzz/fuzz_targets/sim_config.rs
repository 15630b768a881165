#![no_main]

use libfuzzer_sys::fuzz_target;
use termgeom::dynamics::SimConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = SimConfig::from_json(s) {
        // an accepted config serializes and reads back unchanged
        let again = SimConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
    }
});
