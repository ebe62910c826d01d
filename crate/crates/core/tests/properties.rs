mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use slimrag::index::{from_bytes, to_bytes};
use slimrag::retrieval::dual_factor_score;
use slimrag::{
    build_index, retrieve, Corpus, Execution, LocalEmbedder, LocalExtractor, Pipeline, RetrievalParams,
    SegmentationPolicy, SentenceSplitter, Tokenizer,
};

fn reorder(corpus: &Corpus, rng: &mut ChaCha8Rng) -> Corpus {
    let mut docs: Vec<(String, String)> =
        corpus.documents.iter().map(|d| (d.doc_id.clone(), d.text.clone())).collect();
    docs.shuffle(rng);
    Corpus::from_documents(
        docs,
        SegmentationPolicy::SentencePerChunk,
        &SentenceSplitter::default(),
        Tokenizer::default(),
    )
    .unwrap()
}

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 24,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn document_order_does_not_change_the_index(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus = common::random_corpus(&mut rng, 30, 10);
        let shuffled = reorder(&corpus, &mut rng);
        let (x, e) = (LocalExtractor::default(), LocalEmbedder::default());
        let p = Pipeline::new(&x, &e);
        let a = build_index(&corpus, &p).unwrap();
        let b = build_index(&shuffled, &p).unwrap();
        prop_assert_eq!(to_bytes(&a).unwrap(), to_bytes(&b).unwrap());
    }

    #[test]
    fn sequential_and_parallel_agree(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus = common::random_corpus(&mut rng, 40, 12);
        let (x, e) = (LocalExtractor::default(), LocalEmbedder::default());
        let seq = Pipeline::new(&x, &e).with_execution(Execution::Sequential);
        let par = Pipeline::new(&x, &e).with_execution(Execution::Parallel);
        let a = build_index(&corpus, &seq).unwrap();
        let b = build_index(&corpus, &par).unwrap();
        prop_assert_eq!(to_bytes(&a).unwrap(), to_bytes(&b).unwrap());
        for _ in 0..5 {
            let q = common::random_query(&mut rng);
            let params = common::random_params(&mut rng);
            prop_assert_eq!(retrieve(&a, &q, &params, &seq).unwrap(), retrieve(&b, &q, &params, &par).unwrap());
        }
    }

    #[test]
    fn retrieval_replays_identically_after_reload(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus = common::random_corpus(&mut rng, 30, 10);
        let (x, e) = (LocalExtractor::default(), LocalEmbedder::default());
        let p = Pipeline::new(&x, &e);
        let index = build_index(&corpus, &p).unwrap();
        let reloaded = from_bytes(&to_bytes(&index).unwrap()).unwrap();
        for _ in 0..5 {
            let q = common::random_query(&mut rng);
            let params = common::random_params(&mut rng);
            let first = retrieve(&index, &q, &params, &p).unwrap();
            prop_assert_eq!(&first, &retrieve(&index, &q, &params, &p).unwrap());
            prop_assert_eq!(&first, &retrieve(&reloaded, &q, &params, &p).unwrap());
        }
    }

    #[test]
    fn larger_budget_or_h_never_drops_a_chunk(seed in any::<u64>(), extra in 1u64..200, more_h in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus = common::random_corpus(&mut rng, 30, 10);
        let (x, e) = (LocalExtractor::default(), LocalEmbedder::default());
        let p = Pipeline::new(&x, &e);
        let index = build_index(&corpus, &p).unwrap();
        let q = common::random_query(&mut rng);
        let base = common::random_params(&mut rng);
        let ids = |params: &RetrievalParams| -> Vec<String> {
            retrieve(&index, &q, params, &p).unwrap().chunk_ids().map(str::to_owned).collect()
        };
        let small = ids(&base);
        let roomier = ids(&RetrievalParams { token_limit: base.token_limit + extra, ..base.clone() });
        prop_assert!(small.iter().all(|id| roomier.contains(id)), "{small:?} vs {roomier:?}");

        let unlimited = RetrievalParams { token_limit: u64::MAX / 2, ..base.clone() };
        let narrow = ids(&unlimited);
        let wide = ids(&RetrievalParams { h: base.h + more_h, ..unlimited });
        prop_assert!(narrow.iter().all(|id| wide.contains(id)), "{narrow:?} vs {wide:?}");
    }

    #[test]
    fn score_is_monotone_in_both_factors(phi in 0.0f64..1.0, dphi in 0.0f64..1.0, n in 0u32..50, dn in 0u32..50) {
        let (n, m) = (f64::from(n), f64::from(n + dn));
        prop_assert!(dual_factor_score(phi, m) >= dual_factor_score(phi, n));
        prop_assert!(dual_factor_score(phi + dphi, n) >= dual_factor_score(phi, n));
    }
}
