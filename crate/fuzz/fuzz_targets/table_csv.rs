#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = cqed::tables::SteadyTables::read_csv(data);
});
