use gar_core::lexical::{tokenize, Bm25Params, DenseVectors, InvertedIndex};
use gar_core::DocMap;
use proptest::prelude::*;

fn corpus() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::collection::vec(0u8..25, 0..10), 1..60).prop_map(|docs| {
        docs.into_iter()
            .map(|words| {
                words
                    .iter()
                    .map(|w| format!("w{w}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect()
    })
}

proptest! {
    /// Retrieval agrees with scoring every document one at a time.
    #[test]
    fn retrieve_matches_exhaustive_scoring(texts in corpus(), query in prop::collection::vec(0u8..30, 1..5), top in 1usize..20) {
        let index = InvertedIndex::from_corpus(texts.iter().enumerate().map(|(i, t)| (format!("d{i}"), t.clone()))).unwrap();
        let params = Bm25Params::default();
        let q = query.iter().map(|w| format!("w{w}")).collect::<Vec<_>>().join(" ");
        let q_terms = tokenize(&q);

        let mut expected: Vec<(f64, u32)> = (0..texts.len() as u32)
            .filter(|&d| {
                let doc_terms = index.doc_terms(d).unwrap();
                q_terms.iter().any(|t| doc_terms.contains(&t.as_str()))
            })
            .map(|d| (index.score(&params, q_terms.iter().map(String::as_str), d).unwrap(), d))
            .collect();
        expected.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        expected.truncate(top);

        let got: Vec<(f64, u32)> = index.retrieve(&params, &q, top).iter().map(|h| (h.score, h.doc)).collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn dense_topk_is_a_prefix_of_the_full_order(rows in prop::collection::vec(prop::collection::vec(-3i8..=3, 3), 2..40), k in 1usize..10) {
        let rows: Vec<Vec<f32>> = rows
            .into_iter()
            .map(|r| if r.iter().all(|&x| x == 0) { vec![1.0, 0.0, 0.0] } else { r.into_iter().map(f32::from).collect() })
            .collect();
        let n = rows.len();
        let v = DenseVectors::from_rows(DocMap::new((0..n).map(|i| format!("d{i}"))).unwrap(), &rows).unwrap();
        for d in 0..n as u32 {
            let all = v.topk(d, n).unwrap();
            let some = v.topk(d, k).unwrap();
            prop_assert_eq!(all.len(), n - 1);
            prop_assert_eq!(&all[..k.min(n - 1)], &some[..]);
        }
    }
}

#[test]
fn bm25_defaults_and_hand_computed_score() {
    let p = Bm25Params::default();
    assert_eq!((p.k1, p.b), (0.9, 0.4));
    let index = InvertedIndex::from_corpus([("a", "x y"), ("b", "y y z z"), ("c", "z")]).unwrap();
    // "y" in doc b: N=3, df=2, tf=2, len=4, avgdl=7/3.
    let idf = ((3.0f64 - 2.0 + 0.5) / (2.0 + 0.5) + 1.0).ln();
    let norm = 1.0 - 0.4 + 0.4 * 4.0 / (7.0 / 3.0);
    let expected = idf * (2.0 * 1.9) / (2.0 + 0.9 * norm);
    let got = index.score(&p, ["y"], 1).unwrap();
    assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    assert!(Bm25Params::new(-1.0, 0.4).is_err());
    assert!(Bm25Params::new(0.9, 1.5).is_err());
}
