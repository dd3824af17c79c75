#![no_main]

use crtlab::config::{ConfigFile, ExperimentConfig, EXPERIMENTS};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(file) = ConfigFile::parse(text) else {
        return;
    };
    for name in EXPERIMENTS {
        if let Ok(cfg) = ExperimentConfig::from_file(&file, name) {
            let p = cfg.params();
            for key in cfg.params.keys() {
                let _ = p.real(key, 0.0);
                let _ = p.count(key, 0);
                let _ = p.reals(key, &[]);
            }
            let _ = p.finish();
            let _ = cfg.summary();
        }
    }
});
