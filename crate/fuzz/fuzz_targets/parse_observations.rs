#![no_main]

use libfuzzer_sys::fuzz_target;
use mixroute::io::records::{parse_observations, write_observations};

fuzz_target!(|data: &[u8]| {
    if let Ok(obs) = parse_observations(data) {
        let mut buf = Vec::new();
        write_observations(&mut buf, None, &obs).unwrap();
        assert_eq!(parse_observations(buf.as_slice()).unwrap(), obs);
    }
});
