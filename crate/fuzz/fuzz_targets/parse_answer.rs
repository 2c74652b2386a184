#![no_main]

use libfuzzer_sys::fuzz_target;
use mixroute::io::records::parse_answer;

fuzz_target!(|data: &[u8]| {
    if let Ok(line) = std::str::from_utf8(data) {
        if let Ok(answer) = parse_answer(line) {
            assert!(answer < 2);
        }
    }
});
