#![no_main]

use libfuzzer_sys::fuzz_target;
use mixroute::choice::{aggregate_q, ChoiceNoise, Menu};
use mixroute::io::commands::parse_model;

fuzz_target!(|data: &[u8]| {
    if let Ok(record) = parse_model(data) {
        let menu = Menu::from_pairs(&[(50.0, 4.0), (70.0, 1.0)]).unwrap();
        let q = aggregate_q(&record.model, &menu, &ChoiceNoise::deterministic());
        assert!((q.0.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
});
