#![allow(dead_code)]

use std::path::Path;

use parafact::corpus::{parse_stopwords, read_corpus_dir, Analyzer, Gazetteer, Lexicon};
use parafact::SemanticNet;
use parafact_workbench::{Resources, Store};

pub fn fixtures() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn read(name: &str) -> String {
    std::fs::read_to_string(fixtures().join(name)).unwrap()
}

pub fn resources() -> Resources {
    let net = SemanticNet::parse(&read("acq-net.txt")).unwrap();
    let analyzer = Analyzer::new(
        Lexicon::parse(&read("lexicon.tsv")).unwrap(),
        Gazetteer::parse(&read("gazetteer.tsv")).unwrap(),
        parse_stopwords(&read("stopwords.txt")),
    );
    let docs = read_corpus_dir(&fixtures().join("corpus-train")).unwrap();
    Resources::new(net, analyzer, &docs)
}

pub fn open(dir: &Path) -> Store {
    Store::open(dir, Some(resources())).unwrap()
}

pub const SEED: &str = "cession/société/entreprise_achetee/$2";
