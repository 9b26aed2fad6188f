mod support;

use std::collections::BTreeMap;
use std::io::Write;

use parafact::table::RowStatus;
use parafact::SeedPattern;
use parafact_workbench::store::{per_seed_display, DECISIONS_LOG, PROPOSALS_LOG};
use parafact_workbench::{Store, StoreError, Verdict};
use serde_json::Value;
use support::{open, SEED};

fn seed() -> Vec<SeedPattern> {
    vec![SEED.parse().unwrap()]
}

#[test]
fn first_round_proposes_five() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    let r = store.start_round(seed(), 2.0).unwrap();
    assert_eq!((r.id, r.stats.proposed), (1, 5));
    let again = store.start_round(seed(), 2.0).unwrap();
    assert_eq!((again.id, again.stats.proposed), (2, 0));
}

#[test]
fn round_validation() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    assert!(matches!(store.start_round(vec![], 2.0), Err(StoreError::Validation(_))));
    assert!(matches!(store.start_round(seed(), -1.0), Err(StoreError::Validation(_))));
    let bare = Store::open(dir.path().join("bare"), None).unwrap();
    assert!(matches!(bare.start_round(seed(), 2.0), Err(StoreError::Unavailable(_))));
}

#[test]
fn decisions_and_idempotency() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    store.start_round(seed(), 2.0).unwrap();
    let id = store.read(|s| s.candidates(None, None)[0].id.clone());
    let c = store.record_decision(&id, Verdict::Accept, "ann").unwrap();
    assert_eq!(c.row.status, RowStatus::Accepted);
    store.record_decision(&id, Verdict::Accept, "ann").unwrap();
    assert_eq!(store.read(|s| s.decisions().len()), 1);
    // last write wins, history kept
    store.record_decision(&id, Verdict::Reject, "other").unwrap();
    assert_eq!(store.read(|s| s.decisions().len()), 2);
    assert_eq!(store.read(|s| s.candidate(&id).unwrap().row.status), RowStatus::Rejected);
    assert!(matches!(store.record_decision("nope", Verdict::Accept, "a"), Err(StoreError::NotFound(_))));
    assert!(matches!(store.record_decision(&id, Verdict::Accept, " "), Err(StoreError::Validation(_))));
}

#[test]
fn promote_closes_round() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    store.start_round(seed(), 2.0).unwrap();
    assert!(matches!(store.promote(1), Err(StoreError::Validation(_))));
    assert!(matches!(store.promote(9), Err(StoreError::NotFound(_))));
    let ids: Vec<String> = store.read(|s| s.candidates(None, Some(1)).into_iter().map(|c| c.id).collect());
    for id in &ids[..3] {
        store.record_decision(id, Verdict::Accept, "a").unwrap();
    }
    store.record_decision(&ids[3], Verdict::Reject, "a").unwrap();
    let p = store.promote(1).unwrap();
    assert_eq!((p.rows.len(), p.seeds.len()), (3, 3));
    for (row, seed) in p.rows.iter().zip(&p.seeds) {
        assert_eq!((seed.head.as_str(), seed.expansion.as_str()), (row.elt1.as_str(), row.elt2.as_str()));
    }
    assert!(store.read(|s| s.round(1).unwrap().closed));
    assert_eq!(store.promote(1).unwrap(), p);
    assert!(matches!(store.record_decision(&ids[4], Verdict::Accept, "a"), Err(StoreError::Conflict(_))));
    // the undecided row of the closed round can be proposed again
    let r2 = store.start_round(seed(), 2.0).unwrap();
    assert_eq!(r2.stats.proposed, 1);
}

#[test]
fn concordance_marks_pair() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    store.start_round(seed(), 2.0).unwrap();
    let c = store.read(|s| s.candidates(None, None).into_iter().find(|c| c.row.elt1 == "reprise").unwrap());
    let snips = store.concordance(&c.id, 10).unwrap();
    assert_eq!(snips.len(), 1);
    assert!(snips[0].text.contains("reprise des activités charter"), "{}", snips[0].text);
    assert!(snips[0].marked.contains("[reprise] des [activités] charter"), "{}", snips[0].marked);
    assert!(store.concordance(&c.id, 0).unwrap().is_empty());
    assert!(matches!(store.concordance("zz", 3), Err(StoreError::NotFound(_))));
}

fn random_session(store: &Store, rng_seed: u64) {
    let ids: Vec<String> = store.read(|s| s.candidates(None, None).into_iter().map(|c| c.id).collect());
    let mut x = rng_seed;
    for _ in 0..12 {
        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let id = &ids[(x >> 33) as usize % ids.len()];
        let verdict = if (x >> 20) & 1 == 0 { Verdict::Accept } else { Verdict::Reject };
        let _ = store.record_decision(id, verdict, "a");
    }
}

#[test]
fn replay_reconstructs_state() {
    for rng_seed in 0..20 {
        let dir = tempfile::tempdir().unwrap();
        let store = open(dir.path());
        store.start_round(seed(), 2.0).unwrap();
        random_session(&store, rng_seed);
        let live = store.read(|s| (s.statuses(), s.rounds(), s.decisions().to_vec()));
        drop(store);
        let replayed = Store::load(dir.path()).unwrap();
        assert_eq!((replayed.statuses(), replayed.rounds(), replayed.decisions().to_vec()), live);
    }
}

#[test]
fn truncated_final_line_is_ignored() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    store.start_round(seed(), 2.0).unwrap();
    random_session(&store, 7);
    let before = store.read(|s| (s.statuses(), s.rounds(), s.decisions().to_vec()));
    drop(store);

    for name in [DECISIONS_LOG, PROPOSALS_LOG] {
        let mut f = std::fs::OpenOptions::new().append(true).open(dir.path().join(name)).unwrap();
        f.write_all(br#"{"candidate_id":"abc","verd"#).unwrap();
    }
    let store = open(dir.path());
    assert_eq!(store.read(|s| (s.statuses(), s.rounds(), s.decisions().to_vec())), before);
    // the torn bytes are gone, so new writes land on a clean line
    let id = store.read(|s| s.candidates(None, None)[0].id.clone());
    let flip = match store.read(|s| s.candidate(&id).unwrap().row.status) {
        RowStatus::Accepted => Verdict::Reject,
        _ => Verdict::Accept,
    };
    store.record_decision(&id, flip, "a").unwrap();
    drop(store);
    assert!(Store::load(dir.path()).is_ok());
    for name in [DECISIONS_LOG, PROPOSALS_LOG] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.ends_with('\n'));
    }
}

#[test]
fn corrupt_middle_line_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join(DECISIONS_LOG), "garbage\n{}\n").unwrap();
    assert!(matches!(Store::load(dir.path()), Err(StoreError::Corrupt { line: 1, .. })));
}

/// Round statistics straight from the log files.
fn stats_from_logs(dir: &std::path::Path) -> BTreeMap<u64, (usize, usize, usize, String)> {
    let lines = |name: &str| -> Vec<Value> {
        std::fs::read_to_string(dir.join(name)).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
    };
    let mut seeds = BTreeMap::new();
    let mut owner: BTreeMap<String, u64> = BTreeMap::new();
    for ev in lines(PROPOSALS_LOG) {
        match ev["event"].as_str().unwrap() {
            "round" => {
                seeds.insert(ev["id"].as_u64().unwrap(), ev["seeds"].as_array().unwrap().len());
            }
            "proposal" => {
                let r = &ev["row"];
                let key = format!("{}\t{}\t{}\t{}\t{}", r["elt1"], r["cat1"], r["elt2"], r["cat2"], r["etq"]);
                owner.insert(key, ev["round"].as_u64().unwrap());
            }
            _ => {}
        }
    }
    let mut verdict: BTreeMap<String, String> = BTreeMap::new();
    for d in lines(DECISIONS_LOG) {
        verdict.insert(d["candidate_id"].as_str().unwrap().into(), d["verdict"].as_str().unwrap().into());
    }
    let id_of = |key: &str| {
        let f: Vec<String> = key.split('\t').map(|s| s.trim_matches('"').to_string()).collect();
        parafact::table::row_id(&f[0], f[1].parse().unwrap(), &f[2], f[3].parse().unwrap(), &f[4])
    };
    let mut out = BTreeMap::new();
    for (round, n) in &seeds {
        let ids: Vec<String> = owner.iter().filter(|(_, r)| *r == round).map(|(k, _)| id_of(k)).collect();
        let acc = ids.iter().filter(|i| verdict.get(*i).map(String::as_str) == Some("accept")).count();
        let rej = ids.iter().filter(|i| verdict.get(*i).map(String::as_str) == Some("reject")).count();
        out.insert(*round, (ids.len(), acc, rej, per_seed_display(acc, *n)));
    }
    out
}

#[test]
fn stats_match_log_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    let seeds: Vec<SeedPattern> = ["cession/société/entreprise_achetee/$2", "rachat/activité/entreprise_achetee/$2"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    store.start_round(seeds, 2.0).unwrap();
    random_session(&store, 3);
    let from_store: BTreeMap<u64, (usize, usize, usize, String)> = store.read(|s| {
        s.rounds()
            .into_iter()
            .map(|r| {
                let st = r.stats;
                (r.id, (st.proposed, st.accepted, st.rejected, st.new_patterns_per_seed_display))
            })
            .collect()
    });
    assert_eq!(from_store, stats_from_logs(dir.path()));
}
