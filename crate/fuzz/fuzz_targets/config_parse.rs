#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = decaybound_cli::Config::parse(text) {
            // A parsed config must survive its own serialization.
            let again = decaybound_cli::Config::parse(&cfg.to_toml()).expect("reparse");
            assert_eq!(cfg.to_toml(), again.to_toml());
        }
    }
});
