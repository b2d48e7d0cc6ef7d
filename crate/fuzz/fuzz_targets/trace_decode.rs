#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(trace) = cqed::heterodyne::decode_trace(data) {
        let bytes = cqed::heterodyne::encode_trace(&trace).expect("a decoded trace re-encodes");
        cqed::heterodyne::decode_trace(&bytes).expect("re-encoded trace decodes");
    }
});
