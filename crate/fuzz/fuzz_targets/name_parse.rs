#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = s.parse::<ehlc_cli::Mode>();
        let _ = s.parse::<ehlc_core::Strategy>();
    }
});
