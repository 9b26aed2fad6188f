#![no_main]

use libfuzzer_sys::fuzz_target;

use std::sync::OnceLock;

use parafact::{Analyzer, Gazetteer, Lexicon};

fn analyzer() -> &'static Analyzer {
    static A: OnceLock<Analyzer> = OnceLock::new();
    A.get_or_init(|| {
        let lexicon =
            Lexicon::parse("reprise\treprise\tN\tpred\ndes\tdes\tD\ndes\tde\tP\nactivités\tactivité\tN\n").unwrap();
        let gazetteer = Gazetteer::parse("Vivendi\tcompany\n").unwrap();
        Analyzer::new(lexicon, gazetteer, ["le".to_string(), "la".to_string()].into())
    })
}

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        for s in analyzer().analyze("f", text) {
            for c in &s.chunks {
                assert!(c.start < c.end && c.end <= s.tokens.len());
            }
        }
    }
});
