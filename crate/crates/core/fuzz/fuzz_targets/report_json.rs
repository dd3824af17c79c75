#![no_main]

use crtlab::report::StatReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(report) = StatReport::from_json(text) else {
        return;
    };
    let _ = report.passed();
    let _ = report.to_string();
    let mut csv = Vec::new();
    let _ = report.write_csv(&mut csv);
    if let Ok(json) = report.to_json() {
        let _ = StatReport::from_json(&json);
    }
});
