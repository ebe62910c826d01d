//! Offline, deterministic entity extraction and query decomposition.
//!
//! Entities are maximal runs of capitalized words, optionally joined by the
//! particles "of", "the" and "de" ("Bank of the West"), plus any gazetteer
//! entry found case-insensitively. Leading function words are stripped from
//! spans that open a sentence, so "The" or "Who" never become entities.
//!
//! With coreference on, the extractor walks the context texts and then the
//! target text, keeping a history of mentions:
//!
//! * a person pronoun (he, she, ...) resolves to the nearest preceding
//!   person-like mention, "it"/"its" to the nearest other mention;
//! * a one-word mention that repeats the surname of an earlier person
//!   ("Obama" after "Barack Obama") or the head word of an earlier
//!   multi-word name ("Harvard" after "Harvard University") resolves to
//!   that earlier name.
//!
//! Only entities mentioned in the target text are returned.

use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::Path;

use crate::canonical::sha256_hex;
use crate::error::{Error, Result};

use super::normalize::{normalize_entity, CanonicalEntity};

const PARTICLES: &[&str] = &["of", "the", "de"];

const PERSON_PRONOUNS: &[&str] = &["he", "him", "his", "himself", "she", "her", "hers", "herself"];
const THING_PRONOUNS: &[&str] = &["it", "its", "itself"];

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "i", "me", "my", "we", "us", "our", "you",
    "your", "he", "him", "his", "himself", "she", "her", "hers", "herself", "it", "its", "itself",
    "they", "them", "their", "there", "here", "who", "whom", "whose", "what", "which", "when",
    "where", "why", "how", "is", "are", "was", "were", "be", "been", "being", "do", "does", "did",
    "has", "have", "had", "can", "could", "will", "would", "should", "may", "might", "in", "on",
    "at", "by", "for", "from", "to", "of", "with", "as", "and", "or", "but", "nor", "so", "yet",
    "if", "then", "than", "after", "before", "during", "since", "until", "while", "although",
    "though", "because", "also", "not", "no", "yes", "all", "any", "some", "many", "much", "more",
    "most", "other", "such", "each", "every", "both", "either", "neither", "mr", "mrs", "ms", "dr",
    "name", "list", "tell", "give", "find", "later", "however", "meanwhile", "today",
    "finally", "afterwards", "initially", "eventually", "subsequently", "additionally",
    "moreover", "furthermore", "instead", "now", "soon", "once", "currently", "originally",
];

/// Words that mark a multi-word name as a place, organization or work
/// rather than a person.
const NON_PERSON_MARKERS: &[&str] = &[
    "university", "college", "school", "academy", "institute", "city", "county", "state",
    "states", "river", "lake", "sea", "ocean", "mountain", "mountains", "island", "islands",
    "valley", "company", "corporation", "inc", "records", "band", "church", "cathedral",
    "street", "road", "avenue", "park", "hospital", "airport", "station", "museum", "hotel",
    "party", "club", "team", "airlines", "bank", "group", "kingdom", "republic", "empire",
    "film", "festival", "award", "awards", "prize", "war", "battle", "league", "cup", "bridge",
    "tower", "palace", "castle", "theatre", "theater", "studios", "studio", "press", "times",
    "news", "magazine", "county", "district", "province", "bay", "national", "international",
];

const INTERROGATIVES: &[&str] = &[
    "who", "whom", "whose", "what", "which", "when", "where", "why", "how", "is", "are", "was",
    "were", "did", "does", "do", "has", "have", "had", "can", "could", "will", "would",
];

const CONJUNCTIONS: &[&str] = &["and", "but", "or"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Person,
    Other,
}

#[derive(Debug)]
struct Word {
    start: usize,
    end: usize,
    lower: String,
    capitalized: bool,
    /// Punctuation other than whitespace separates this word from the previous one.
    break_before: bool,
    sentence_start: bool,
    /// Ends in a possessive `'s`, which closes a name span.
    possessive: bool,
}

fn scan_words(text: &str) -> Vec<Word> {
    let mut words = Vec::new();
    let mut chars = text.char_indices().peekable();
    let mut pending_break = false;
    let mut pending_sentence = true;
    while let Some((i, ch)) = chars.next() {
        if ch.is_alphanumeric() {
            let start = i;
            let mut end = i + ch.len_utf8();
            while let Some(&(j, c)) = chars.peek() {
                if c.is_alphanumeric() {
                    end = j + c.len_utf8();
                    chars.next();
                } else if matches!(c, '-' | '\'' | '\u{2019}') {
                    let mut ahead = chars.clone();
                    ahead.next();
                    match ahead.peek() {
                        Some(&(_, n)) if n.is_alphanumeric() => {
                            chars.next();
                        }
                        _ => break,
                    }
                } else {
                    break;
                }
            }
            let raw = &text[start..end];
            let (stem, possessive) = match raw
                .strip_suffix("'s")
                .or_else(|| raw.strip_suffix("\u{2019}s"))
            {
                Some(s) if !s.is_empty() => (s, true),
                _ => (raw, false),
            };
            words.push(Word {
                start,
                end: start + stem.len(),
                lower: stem.to_lowercase(),
                capitalized: stem.chars().next().is_some_and(char::is_uppercase),
                break_before: pending_break,
                sentence_start: pending_sentence,
                possessive,
            });
            pending_break = false;
            pending_sentence = false;
        } else if !ch.is_whitespace() {
            pending_break = true;
            if matches!(ch, '.' | '!' | '?') {
                pending_sentence = true;
            }
        }
    }
    words
}

/// Gazetteer entries as lowercase word sequences.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Gazetteer {
    entries: Vec<Vec<String>>,
}

impl Gazetteer {
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut entries: Vec<Vec<String>> = entries
            .into_iter()
            .map(|e| scan_words(e.as_ref()).into_iter().map(|w| w.lower).collect::<Vec<_>>())
            .filter(|w: &Vec<String>| !w.is_empty())
            .collect();
        entries.sort();
        entries.dedup();
        // longest first so the greedy match prefers "new york city" over "new york"
        entries.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        Gazetteer { entries }
    }

    /// One entity per line, UTF-8; blank lines and `#` comments are ignored.
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = Vec::new();
        for line in std::io::BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            if !line.is_empty() && !line.starts_with('#') {
                lines.push(line.to_owned());
            }
        }
        Ok(Gazetteer::new(lines))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Content digest, stable under reordering and duplicate lines.
    pub fn digest(&self) -> String {
        let mut flat: Vec<String> = self.entries.iter().map(|e| e.join(" ")).collect();
        flat.sort();
        sha256_hex(flat.join("\n").as_bytes())
    }

    fn match_at(&self, words: &[Word], i: usize) -> Option<usize> {
        self.entries
            .iter()
            .find(|e| {
                i + e.len() <= words.len()
                    && e.iter().zip(&words[i..]).all(|(a, w)| *a == w.lower)
                    && words[i + 1..i + e.len()].iter().all(|w| !w.break_before)
            })
            .map(Vec::len)
    }
}

#[derive(Debug, Clone)]
struct Mention {
    entity: CanonicalEntity,
    words: Vec<String>,
    class: Class,
}

#[derive(Debug)]
enum Event {
    Mention(Mention),
    Pronoun(Class),
}

fn is_stopword(w: &str) -> bool {
    STOPWORDS.contains(&w)
}

fn classify(words: &[String], has_particle: bool) -> Class {
    let person = words.len() >= 2
        && !has_particle
        && words.iter().all(|w| !w.chars().any(|c| c.is_ascii_digit()))
        && words.iter().all(|w| !NON_PERSON_MARKERS.contains(&w.as_str()));
    if person {
        Class::Person
    } else {
        Class::Other
    }
}

/// Mentions and pronouns of one text, in reading order.
fn events(text: &str, gazetteer: &Gazetteer) -> Vec<Event> {
    let words = scan_words(text);
    let mut out = Vec::new();
    let mut i = 0;
    while i < words.len() {
        if let Some(len) = gazetteer.match_at(&words, i) {
            let span = &words[i..i + len];
            if let Ok(entity) = normalize_entity(&text[span[0].start..span[len - 1].end]) {
                let lower: Vec<String> = span.iter().map(|w| w.lower.clone()).collect();
                let particle = lower.iter().any(|w| PARTICLES.contains(&w.as_str()));
                out.push(Event::Mention(Mention {
                    class: classify(&lower, particle),
                    words: lower,
                    entity,
                }));
            }
            i += len;
            continue;
        }
        let w = &words[i];
        if PERSON_PRONOUNS.contains(&w.lower.as_str()) {
            out.push(Event::Pronoun(Class::Person));
            i += 1;
            continue;
        }
        if THING_PRONOUNS.contains(&w.lower.as_str()) {
            out.push(Event::Pronoun(Class::Other));
            i += 1;
            continue;
        }
        if !w.capitalized {
            i += 1;
            continue;
        }
        // grow a capitalized span
        let mut span = vec![i];
        let mut j = i + 1;
        while j < words.len() && !words[j].break_before && !words[*span.last().unwrap()].possessive {
            if words[j].capitalized {
                span.push(j);
                j += 1;
                continue;
            }
            let mut k = j;
            while k < words.len()
                && !words[k].break_before
                && !words[k].capitalized
                && PARTICLES.contains(&words[k].lower.as_str())
            {
                k += 1;
            }
            if k > j && k < words.len() && !words[k].break_before && words[k].capitalized {
                span.extend(j..=k);
                j = k + 1;
                continue;
            }
            break;
        }
        let next = j;
        if words[span[0]].sentence_start {
            while span.first().is_some_and(|&s| is_stopword(&words[s].lower)) {
                span.remove(0);
            }
            // a particle cannot open a name
            while span.first().is_some_and(|&s| !words[s].capitalized) {
                span.remove(0);
            }
        }
        let keep = match span.as_slice() {
            [] => false,
            [only] => !is_stopword(&words[*only].lower),
            _ => true,
        };
        if keep {
            let (first, last) = (&words[span[0]], &words[*span.last().unwrap()]);
            if let Ok(entity) = normalize_entity(&text[first.start..last.end]) {
                let lower: Vec<String> = span.iter().map(|&s| words[s].lower.clone()).collect();
                let particle = span.iter().any(|&s| !words[s].capitalized);
                out.push(Event::Mention(Mention {
                    class: classify(&lower, particle),
                    words: lower,
                    entity,
                }));
            }
        }
        i = next;
    }
    out
}

/// Earlier name that a one-word mention abbreviates.
fn alias_of<'m>(mention: &Mention, history: &'m [Mention]) -> Option<&'m Mention> {
    let [word] = mention.words.as_slice() else {
        return None;
    };
    history.iter().rev().find(|h| {
        h.words.len() >= 2
            && match h.class {
                Class::Person => h.words.last() == Some(word),
                Class::Other => h.words.first() == Some(word),
            }
    })
}

pub(crate) fn extract(
    text: &str,
    context: &[&str],
    gazetteer: &Gazetteer,
    coreference: bool,
) -> BTreeSet<CanonicalEntity> {
    let mut found = BTreeSet::new();
    if !coreference {
        for ev in events(text, gazetteer) {
            if let Event::Mention(m) = ev {
                found.insert(m.entity);
            }
        }
        return found;
    }
    let mut history: Vec<Mention> = Vec::new();
    let last = context.len();
    for (idx, t) in context.iter().copied().chain(std::iter::once(text)).enumerate() {
        let target = idx == last;
        for ev in events(t, gazetteer) {
            match ev {
                Event::Mention(m) => {
                    let resolved = alias_of(&m, &history).cloned().unwrap_or(m);
                    if target {
                        found.insert(resolved.entity.clone());
                    }
                    history.push(resolved);
                }
                Event::Pronoun(class) => {
                    if !target {
                        continue;
                    }
                    if let Some(ante) = history.iter().rev().find(|h| h.class == class) {
                        found.insert(ante.entity.clone());
                    }
                }
            }
        }
    }
    found
}

/// Split a question at question marks and at "and"/"but"/"or" when the next
/// word opens a new interrogative clause.
pub(crate) fn decompose(query: &str) -> Vec<String> {
    let query = query.trim();
    let mut questions = Vec::new();
    let mut start = 0;
    let bytes: Vec<(usize, char)> = query.char_indices().collect();
    for (n, &(i, c)) in bytes.iter().enumerate() {
        if c == '?' && bytes.get(n + 1).is_some_and(|&(_, next)| next.is_whitespace()) {
            questions.push(&query[start..i + 1]);
            start = i + 1;
        }
    }
    questions.push(&query[start..]);

    let mut out = Vec::new();
    for q in questions {
        split_clauses(q.trim(), &mut out);
    }
    out.retain(|s| s.chars().any(char::is_alphanumeric));
    if out.is_empty() {
        vec![query.to_owned()]
    } else {
        out
    }
}

fn split_clauses(text: &str, out: &mut Vec<String>) {
    // whitespace-delimited tokens with byte offsets
    let mut tokens: Vec<(usize, &str)> = Vec::new();
    let mut pos = 0;
    for piece in text.split_whitespace() {
        let at = pos + text[pos..].find(piece).unwrap_or(0);
        tokens.push((at, piece));
        pos = at + piece.len();
    }
    let mut start = 0;
    for n in 0..tokens.len().saturating_sub(1) {
        let (at, tok) = tokens[n];
        let next = tokens[n + 1].1.to_lowercase();
        let next = next.trim_matches(|c: char| !c.is_alphanumeric());
        if at > start
            && CONJUNCTIONS.contains(&tok.to_lowercase().as_str())
            && INTERROGATIVES.contains(&next)
        {
            let left = text[start..at].trim().trim_end_matches(',').trim_end();
            if !left.is_empty() {
                out.push(left.to_owned());
            }
            start = tokens[n + 1].0;
        }
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest.to_owned());
    }
}
