#![no_main]

use crtlab::codec;
use crtlab::geometry::TreeIndex;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(exc) = codec::read_csv(data) else {
        return;
    };
    let mut out = Vec::new();
    codec::write_csv(&exc, &mut out).expect("writing to memory");
    let again = codec::read_csv(out.as_slice()).expect("own output parses");
    assert_eq!(again.heights(), exc.heights());

    let idx = TreeIndex::new(&exc);
    let top = exc.heights().iter().copied().max().unwrap_or(0);
    for level in 1..=top.min(8) {
        let a = f64::from(level) * exc.step();
        let _ = idx.ball_decomposition(a, 2.0 * exc.step());
    }
});
