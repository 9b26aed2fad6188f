#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(r) = parafact::extraction::parse_records(text) {
            let again =
                parafact::extraction::parse_records(&parafact::extraction::records_to_tsv(&r)).expect("round trip");
            assert_eq!(again, r);
        }
    }
});
