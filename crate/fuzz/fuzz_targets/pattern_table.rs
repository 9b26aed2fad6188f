#![no_main]

use libfuzzer_sys::fuzz_target;

use parafact::PatternTable;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(t) = PatternTable::parse(text) {
            let again = PatternTable::parse(&t.to_tsv()).expect("round trip");
            assert_eq!(again.to_tsv(), t.to_tsv());
        }
    }
});
