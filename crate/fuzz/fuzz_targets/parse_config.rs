#![no_main]

use libfuzzer_sys::fuzz_target;
use mixroute::io::config::parse_config;

fuzz_target!(|data: &[u8]| {
    if let Ok(config) = parse_config(data) {
        // Anything accepted must survive a round trip.
        let again = parse_config(config.to_json().as_bytes()).expect("serialized config reparses");
        assert_eq!(config, again);
        let _ = config.scenario(config.seed);
    }
});
