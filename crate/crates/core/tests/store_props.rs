mod common;

use common::Gen;
use mvseq::store::{read_corpus, validate_corpus, write_corpus, EMBEDDINGS_FILE};
use mvseq::DocumentRecord;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn write_read_round_trip(seed in any::<u64>(), n in 1usize..12, dim in 1usize..9,
                             with_extras in any::<bool>()) {
        let mut g = Gen::new(seed);
        let records: Vec<DocumentRecord> = (0..n)
            .map(|i| {
                let d = g.document_in(&format!("doc-{i}"), 1, 20, dim);
                if with_extras { d } else { DocumentRecord::new(d.doc_id, d.embeddings) }
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_corpus(&records, dir.path()).unwrap();
        let corpus = read_corpus(dir.path()).unwrap();
        prop_assert_eq!(corpus.manifest(), &manifest);

        let all = corpus.load_all().unwrap();
        prop_assert_eq!(&all, &records);
        for (i, r) in records.iter().enumerate() {
            prop_assert_eq!(&corpus.get_at(i).unwrap(), r);
            prop_assert_eq!(&corpus.get(&r.doc_id).unwrap(), r);
        }

        let span: u64 = manifest.docs.iter().map(|d| d.length * manifest.dim * 4).sum();
        let size = std::fs::metadata(dir.path().join(EMBEDDINGS_FILE)).unwrap().len();
        prop_assert_eq!(span, size);
        prop_assert!(validate_corpus(dir.path()).is_valid());
    }
}

#[test]
fn handle_is_shareable_across_threads() {
    let mut g = Gen::new(7);
    let records: Vec<_> = (0..16).map(|i| g.document(&format!("d{i}"), 5, 4)).collect();
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&records, dir.path()).unwrap();
    let corpus = read_corpus(dir.path()).unwrap();
    std::thread::scope(|s| {
        for t in 0..4 {
            let corpus = &corpus;
            let records = &records;
            s.spawn(move || {
                for i in (t..16).step_by(4) {
                    assert_eq!(&corpus.get_at(i).unwrap(), &records[i]);
                }
            });
        }
    });
}

#[test]
fn missing_binary_is_reported() {
    let mut g = Gen::new(8);
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&[g.document("a", 3, 2)], dir.path()).unwrap();
    std::fs::remove_file(dir.path().join("attention.bin")).unwrap();
    let err = read_corpus(dir.path()).unwrap_err();
    assert!(err.to_string().contains("attention.bin"), "{err}");
    assert!(!validate_corpus(dir.path()).is_valid());
}
