#![no_main]

use libfuzzer_sys::fuzz_target;
use mixroute::io::commands::parse_plan;

fuzz_target!(|data: &[u8]| {
    if let Ok(record) = parse_plan(data) {
        let _ = record.plan.menu();
    }
});
