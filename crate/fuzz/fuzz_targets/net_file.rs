#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(net) = parafact::SemanticNet::parse(text) {
            let words: Vec<&str> = net.words().take(4).collect();
            for a in &words {
                for b in &words {
                    assert_eq!(net.proximity(a, b), net.proximity(b, a));
                }
            }
        }
    }
});
