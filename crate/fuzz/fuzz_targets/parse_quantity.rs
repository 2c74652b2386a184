#![no_main]

use libfuzzer_sys::fuzz_target;
use mixroute::io::units::{parse_quantity, Dimension};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    for dim in [Dimension::Length, Dimension::Speed, Dimension::Time, Dimension::Flow] {
        if let Ok(x) = parse_quantity(text, dim) {
            assert!(x.is_finite());
        }
    }
});
