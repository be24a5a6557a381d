#![no_main]

use libfuzzer_sys::fuzz_target;
use twoarm::StepSchedule;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    for parsed in [StepSchedule::from_json(text), text.parse::<StepSchedule>()] {
        if let Ok(s) = parsed {
            let again = StepSchedule::from_json(&s.to_json()).expect("round trip");
            assert_eq!(again, s);
            if let Some(g) = s.gammas().next() {
                assert!(g > 0.0 && g < 1.0);
            }
            let _ = s.tail_sq_sum_ub(1);
        }
    }
});
