#![no_main]

use libfuzzer_sys::fuzz_target;
use twoarm::bandit::parse_path_csv;
use twoarm::stopping::monitor;
use twoarm::StepSchedule;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = parse_path_csv(text) {
        assert!(rows.windows(2).all(|w| w[0].0 < w[1].0));
        assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.1)));
        if rows.last().map_or(true, |r| r.0 <= 100_000) {
            let s = StepSchedule::power_i(1.0, 1.0).unwrap();
            let _ = monitor(&rows, &s, 0.05);
        }
    }
});
