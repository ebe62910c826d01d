#![allow(dead_code)]

pub mod oracle;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use slimrag::{Corpus, RetrievalParams, SegmentationPolicy, SentenceSplitter, Tokenizer};

pub const NAMES: &[&str] = &[
    "Ada Lovelace", "Alan Turing", "Grace Hopper", "Marie Curie", "Niels Bohr", "Lise Meitner",
    "Emmy Noether", "Carl Gauss", "Rosalind Franklin", "Enrico Fermi", "Warsaw", "Vienna",
    "Lisbon", "Oslo", "Kyoto", "Lima", "Quito", "Dakar", "Perth", "Tromso", "Halden", "Ostrava",
    "Bergamo", "Granada", "Tartu", "Bruges", "Aarhus", "Cusco", "Mombasa", "Hobart", "Sputnik",
    "Voyager", "Hubble", "Kepler", "Apollo", "Rosetta", "Cassini", "Juno", "Gemini", "Mariner",
];

const PRONOUNS: &[&str] = &["He", "She", "It"];

fn sentence(rng: &mut ChaCha8Rng, names: &[&str]) -> String {
    let mut pick = || *names.choose(rng).expect("names");
    let (a, b, c) = (pick(), pick(), pick());
    match rng.gen_range(0..7) {
        0 => format!("{a} visited {b} in the spring."),
        1 => format!("{a} wrote to {b} and {c} about the harvest."),
        2 => format!("{} admired the old bridge near {b}.", PRONOUNS[rng.gen_range(0..3)]),
        3 => "The river was quiet that year.".to_owned(),
        4 => format!("{a}'s garden grew near {b}."),
        5 => format!("{} kept notes on the weather.", PRONOUNS[rng.gen_range(0..3)]),
        _ => format!("Travellers from {a} praised {b} and {c} at length."),
    }
}

/// A random corpus of at most `max_chunks` sentences mentioning at most
/// `max_names` distinct names.
pub fn random_corpus(rng: &mut ChaCha8Rng, max_chunks: usize, max_names: usize) -> Corpus {
    let mut pool: Vec<&str> = NAMES.to_vec();
    pool.shuffle(rng);
    pool.truncate(rng.gen_range(2..=max_names.min(NAMES.len())));
    let total = rng.gen_range(1..=max_chunks);
    let docs = rng.gen_range(1..=6usize).min(total);
    let mut counts = vec![1usize; docs];
    for _ in docs..total {
        counts[rng.gen_range(0..docs)] += 1;
    }
    let texts: Vec<(String, String)> = counts
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let body: Vec<String> = (0..n).map(|_| sentence(rng, &pool)).collect();
            (format!("doc{i}"), body.join(" "))
        })
        .collect();
    Corpus::from_documents(
        texts,
        SegmentationPolicy::SentencePerChunk,
        &SentenceSplitter::default(),
        Tokenizer::default(),
    )
    .expect("generated corpus is valid")
}

pub fn random_query(rng: &mut ChaCha8Rng) -> String {
    let a = NAMES[rng.gen_range(0..NAMES.len())];
    let b = NAMES[rng.gen_range(0..NAMES.len())];
    match rng.gen_range(0..5) {
        0 => format!("Where did {a} meet {b}?"),
        1 => format!("Who visited {a} and when did {b} arrive?"),
        2 => "what grew in the garden near the river?".to_owned(),
        3 => format!("What did {a} write about the harvest?"),
        _ => format!("Why was {a} praised and what did it say about {b}?"),
    }
}

pub fn random_params(rng: &mut ChaCha8Rng) -> RetrievalParams {
    RetrievalParams {
        k: rng.gen_range(1..=6),
        h: rng.gen_range(1..=12),
        token_limit: if rng.gen_bool(0.5) { 4096 } else { rng.gen_range(1..=80) },
        use_entity_weights: rng.gen_bool(0.25),
        ..RetrievalParams::default()
    }
}
