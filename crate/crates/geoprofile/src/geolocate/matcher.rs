//! Gazetteer string matching over captions.
//!
//! The matcher scans the normalized caption for every index key of up to
//! four tokens with a multi-pattern automaton, keeps hits that sit on token
//! boundaries, and resolves overlaps longest-match-first. It is deliberately
//! naive: a place name that doubles as an everyday word still matches unless
//! it is one of the 1,000 most common English words, because this method is
//! the cheap, imprecise baseline the provider-backed methods are judged
//! against.

use std::collections::HashSet;

use aho_corasick::AhoCorasick;

use super::{LocationMention, MentionSource};
use crate::assets::STOPWORDS_EN_1000;
use crate::gazetteer::{normalize_name_spans, GazetteerIndex};

/// Longest key, in tokens, considered by [`StringMatcher::extract`]. Longer
/// index keys exist (long-winded official names) but never show up verbatim
/// in captions, and capping the pattern set keeps the automaton small.
pub const MAX_MATCH_TOKENS: usize = 4;

/// Multi-pattern scanner for gazetteer names in caption text.
///
/// Construction walks the whole index, so build one per index and reuse it
/// across captions; extraction itself is a single automaton pass.
pub struct StringMatcher {
    automaton: AhoCorasick,
    keys: Vec<String>,
    stoplist: HashSet<&'static str>,
}

impl StringMatcher {
    pub fn new(index: &GazetteerIndex) -> Self {
        let mut keys: Vec<String> = index
            .index_keys()
            .filter(|k| !k.is_empty() && k.split(' ').count() <= MAX_MATCH_TOKENS)
            .map(str::to_owned)
            .collect();
        keys.sort_unstable();
        let automaton = AhoCorasick::new(&keys).expect("index keys form a valid pattern set");
        let stoplist = STOPWORDS_EN_1000
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        Self { automaton, keys, stoplist }
    }

    /// Number of index keys the automaton scans for.
    pub fn pattern_count(&self) -> usize {
        self.keys.len()
    }

    /// Extract location mentions, in caption order.
    ///
    /// Matching runs over the normalized caption, so case, diacritics and
    /// punctuation don't matter; the returned mentions slice the *original*
    /// caption. Matches must start and end on token boundaries. Overlaps are
    /// resolved longest-match-first, then leftmost. Single-token matches on
    /// stop-list words are suppressed; everything else is reported, false
    /// friends included.
    pub fn extract(&self, caption: &str) -> Vec<LocationMention> {
        let (normalized, spans) = normalize_name_spans(caption);
        if normalized.is_empty() {
            return Vec::new();
        }
        let bytes = normalized.as_bytes();

        let mut hits: Vec<(usize, usize)> = Vec::new();
        for m in self.automaton.find_overlapping_iter(&normalized) {
            let (start, end) = (m.start(), m.end());
            let starts_token = start == 0 || bytes[start - 1] == b' ';
            let ends_token = end == bytes.len() || bytes[end] == b' ';
            if !starts_token || !ends_token {
                continue;
            }
            let key = self.keys[m.pattern().as_usize()].as_str();
            if !key.contains(' ') && self.stoplist.contains(key) {
                continue;
            }
            hits.push((start, end));
        }

        // Longest match first, then leftmost; later entries are kept only if
        // they don't overlap an already-chosen span.
        hits.sort_unstable_by(|a, b| (b.1 - b.0).cmp(&(a.1 - a.0)).then(a.0.cmp(&b.0)));
        let mut chosen: Vec<(usize, usize)> = Vec::new();
        for &(start, end) in &hits {
            if chosen.iter().all(|&(s, e)| end <= s || start >= e) {
                chosen.push((start, end));
            }
        }
        chosen.sort_unstable();

        chosen
            .into_iter()
            .map(|(start, end)| {
                let source_span = (spans[start].0, spans[end - 1].1);
                LocationMention {
                    text: caption[source_span.0..source_span.1].to_string(),
                    span: Some(source_span),
                    source: MentionSource::StringMatch,
                }
            })
            .collect()
    }
}
