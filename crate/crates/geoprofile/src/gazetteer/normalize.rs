//! Name normalization and bounded edit distance.
//!
//! Every string that enters the gazetteer index — entry names, alternate
//! names, and query mentions — goes through [`normalize_name`] first, so
//! lookups are insensitive to case, diacritics, surrounding punctuation and
//! whitespace shape.

use unicode_normalization::char::{decompose_canonical, is_combining_mark};

/// Normalize a place or country name for index lookups.
///
/// Casefolds, strips diacritics (canonical decomposition with combining
/// marks removed), collapses whitespace runs to single spaces, and drops
/// punctuation — except hyphens and apostrophes sitting between two
/// alphanumeric characters, which are part of many place names.
///
/// ```
/// use geoprofile::gazetteer::normalize_name;
/// assert_eq!(normalize_name("São Paulo"), "sao paulo");
/// assert_eq!(normalize_name("Saint-Étienne"), "saint-etienne");
/// assert_eq!(normalize_name("  NICE,  "), "nice");
/// ```
pub fn normalize_name(raw: &str) -> String {
    normalize_core(raw).0
}

/// [`normalize_name`] plus a source map: element `i` of the second return
/// value is the byte range of `raw` that produced byte `i` of the normalized
/// string. The caption matcher uses this to slice mentions out of the
/// original text after matching against normalized index keys.
pub(crate) fn normalize_name_spans(raw: &str) -> (String, Vec<(usize, usize)>) {
    normalize_core(raw)
}

fn normalize_core(raw: &str) -> (String, Vec<(usize, usize)>) {
    // Decompose, drop combining marks, lowercase. U+2019 is folded to an
    // ASCII apostrophe so typed and typeset quotes compare equal. Every
    // produced char remembers the source char's byte range.
    let mut stripped: Vec<(char, (usize, usize))> = Vec::with_capacity(raw.len());
    for (start, ch) in raw.char_indices() {
        let span = (start, start + ch.len_utf8());
        decompose_canonical(ch, |d| {
            if !is_combining_mark(d) {
                for lc in d.to_lowercase() {
                    let folded = if lc == '\u{2019}' { '\'' } else { lc };
                    stripped.push((folded, span));
                }
            }
        });
    }

    let mut kept: Vec<(char, (usize, usize))> = Vec::with_capacity(stripped.len());
    for (i, &(c, span)) in stripped.iter().enumerate() {
        if c.is_alphanumeric() {
            kept.push((c, span));
        } else if c == '-' || c == '\'' {
            // Keep joiners only when flanked by alphanumerics on both sides.
            let prev_ok = kept.last().is_some_and(|&(p, _)| p.is_alphanumeric());
            let next_ok = stripped.get(i + 1).is_some_and(|&(n, _)| n.is_alphanumeric());
            kept.push((if prev_ok && next_ok { c } else { ' ' }, span));
        } else {
            // Whitespace and all other punctuation become separators.
            kept.push((' ', span));
        }
    }

    // Collapse separator runs and trim the ends.
    let mut out = String::with_capacity(kept.len());
    let mut spans = Vec::with_capacity(kept.len());
    let mut last_space = true;
    for (c, span) in kept {
        if c == ' ' {
            if !last_space {
                out.push(' ');
                spans.push(span);
            }
            last_space = true;
        } else {
            out.push(c);
            for _ in 0..c.len_utf8() {
                spans.push(span);
            }
            last_space = false;
        }
    }
    while out.ends_with(' ') {
        out.pop();
        spans.pop();
    }
    (out, spans)
}

/// Levenshtein distance between two strings, counted in characters, with an
/// inclusive upper bound. Returns `None` when the distance exceeds `max`,
/// allowing the fuzzy-lookup scan to bail out early on hopeless rows.
pub fn levenshtein_bounded(a: &str, b: &str, max: usize) -> Option<usize> {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.len().abs_diff(b.len()) > max {
        return None;
    }
    if a.is_empty() {
        return (b.len() <= max).then_some(b.len());
    }
    if b.is_empty() {
        return (a.len() <= max).then_some(a.len());
    }

    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        let mut row_min = cur[0];
        for (j, &cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            cur[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(cur[j] + 1);
            row_min = row_min.min(cur[j + 1]);
        }
        if row_min > max {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    (prev[b.len()] <= max).then_some(prev[b.len()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_diacritics_and_case() {
        assert_eq!(normalize_name("São Paulo"), "sao paulo");
        assert_eq!(normalize_name("Tōkyō"), "tokyo");
        assert_eq!(normalize_name("MÜNCHEN"), "munchen");
        assert_eq!(normalize_name("Soči"), "soci");
    }

    #[test]
    fn keeps_internal_joiners_only() {
        assert_eq!(normalize_name("Saint-Étienne"), "saint-etienne");
        assert_eq!(normalize_name("Côte d'Ivoire"), "cote d'ivoire");
        assert_eq!(normalize_name("'s-Hertogenbosch"), "s-hertogenbosch");
        assert_eq!(normalize_name("--Paris--"), "paris");
        assert_eq!(normalize_name("O’Hare"), "o'hare");
    }

    #[test]
    fn collapses_whitespace_and_punctuation() {
        assert_eq!(normalize_name("  New   York , "), "new york");
        assert_eq!(normalize_name("Rio de Janeiro."), "rio de janeiro");
        assert_eq!(normalize_name("?!;"), "");
        assert_eq!(normalize_name(""), "");
    }

    #[test]
    fn span_map_points_back_at_source_bytes() {
        let raw = "São Paulo,";
        let (norm, spans) = normalize_name_spans(raw);
        assert_eq!(norm, "sao paulo");
        assert_eq!(spans.len(), norm.len());
        // 'ã' occupies bytes 1..3 of the source and produced the 'a' at
        // normalized byte 1; the trailing comma was trimmed away.
        assert_eq!(spans[1], (1, 3));
        assert_eq!((spans[0].0, spans[norm.len() - 1].1), (0, 10));
        assert_eq!(&raw[spans[0].0..spans[norm.len() - 1].1], "São Paulo");
    }

    proptest! {
        #[test]
        fn span_map_is_monotone_and_in_bounds(s in "\\PC{0,40}") {
            let (norm, spans) = normalize_name_spans(&s);
            prop_assert_eq!(spans.len(), norm.len());
            let mut prev_start = 0usize;
            for &(start, end) in &spans {
                prop_assert!(start < end);
                prop_assert!(end <= s.len());
                prop_assert!(start >= prev_start);
                prop_assert!(s.is_char_boundary(start) && s.is_char_boundary(end));
                prev_start = start;
            }
        }
    }

    #[test]
    fn levenshtein_basics() {
        assert_eq!(levenshtein_bounded("kitten", "sitting", 10), Some(3));
        assert_eq!(levenshtein_bounded("cambrige", "cambridge", 2), Some(1));
        assert_eq!(levenshtein_bounded("", "", 0), Some(0));
        assert_eq!(levenshtein_bounded("abc", "abc", 0), Some(0));
        assert_eq!(levenshtein_bounded("abc", "xyz", 2), None);
        assert_eq!(levenshtein_bounded("short", "muchlongerstring", 3), None);
    }

    #[test]
    fn levenshtein_counts_chars_not_bytes() {
        assert_eq!(levenshtein_bounded("münchen", "munchen", 2), Some(1));
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in "\\PC{0,40}") {
            let once = normalize_name(&s);
            prop_assert_eq!(normalize_name(&once), once);
        }

        #[test]
        fn normalized_has_no_leading_trailing_or_double_spaces(s in "\\PC{0,40}") {
            let n = normalize_name(&s);
            prop_assert!(!n.starts_with(' '));
            prop_assert!(!n.ends_with(' '));
            prop_assert!(!n.contains("  "));
        }

        #[test]
        fn bounded_matches_unbounded(a in "[a-c]{0,8}", b in "[a-c]{0,8}") {
            // Reference: textbook full-matrix DP.
            let av: Vec<char> = a.chars().collect();
            let bv: Vec<char> = b.chars().collect();
            let mut dp = vec![vec![0usize; bv.len() + 1]; av.len() + 1];
            for i in 0..=av.len() { dp[i][0] = i; }
            for j in 0..=bv.len() { dp[0][j] = j; }
            for i in 1..=av.len() {
                for j in 1..=bv.len() {
                    let cost = usize::from(av[i - 1] != bv[j - 1]);
                    dp[i][j] = (dp[i - 1][j - 1] + cost)
                        .min(dp[i - 1][j] + 1)
                        .min(dp[i][j - 1] + 1);
                }
            }
            let want = dp[av.len()][bv.len()];
            for max in 0..=8usize {
                let got = levenshtein_bounded(&a, &b, max);
                if want <= max {
                    prop_assert_eq!(got, Some(want));
                } else {
                    prop_assert_eq!(got, None);
                }
            }
        }
    }
}
