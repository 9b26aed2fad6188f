#![no_main]

use libfuzzer_sys::fuzz_target;

use parafact::CompiledGraph;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(g) = CompiledGraph::deserialize(text) {
            assert_eq!(CompiledGraph::deserialize(&g.serialize()).expect("round trip"), g);
        }
    }
});
