use std::ops::Range;

const TITLES: &[&str] = &["Dr", "Fig", "Jr", "Mr", "Mrs", "Ms", "Prof", "Sr", "St", "e.g", "i.e", "vs"];

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '}' | '\u{201d}' | '\u{2019}')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '{' | '\u{201c}' | '\u{2018}')
}

fn skip_ws(chars: &[char], mut i: usize) -> usize {
    while i < chars.len() && chars[i].is_whitespace() {
        i += 1;
    }
    i
}

/// Whether the period at `dot` closes an abbreviation: a lone capital letter
/// ("J.") or a common title ("Dr.").
fn is_abbreviation(chars: &[char], dot: usize) -> bool {
    let mut start = dot;
    while start > 0 && !chars[start - 1].is_whitespace() {
        start -= 1;
    }
    let word: String = chars[start..dot].iter().collect();
    let mut it = word.chars();
    let single_cap = matches!((it.next(), it.next()), (Some(c), None) if c.is_uppercase());
    single_cap || TITLES.contains(&word.as_str())
}

/// Splits text into sentence intervals (character offsets).
///
/// A sentence ends after a run of `.`, `!` or `?` (plus any closing quotes
/// or brackets) that is followed by the end of text, or by whitespace and
/// then an uppercase letter or digit (optionally behind an opening quote or
/// bracket). A period after a lone capital letter
/// or a common title never ends a sentence. Intervals are ordered, disjoint,
/// and cover all non-whitespace text; whitespace between sentences belongs to
/// none of them.
pub fn segment_sentences(text: &str) -> Vec<Range<usize>> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut out = Vec::new();
    let mut start = skip_ws(&chars, 0);
    let mut i = start;
    while i < n {
        if !is_terminator(chars[i]) {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < n && (is_terminator(chars[j]) || is_closer(chars[j])) {
            j += 1;
        }
        let boundary = if j == n {
            true
        } else if chars[j].is_whitespace() {
            let mut k = skip_ws(&chars, j);
            while k < n && is_opener(chars[k]) {
                k += 1;
            }
            k == n || chars[k].is_uppercase() || chars[k].is_ascii_digit()
        } else {
            false
        };
        let guarded = j < n && chars[i] == '.' && j == i + 1 && is_abbreviation(&chars, i);
        if boundary && !guarded {
            out.push(start..j);
            start = skip_ws(&chars, j);
            i = start;
        } else {
            i = j;
        }
    }
    if start < n {
        let mut end = n;
        while end > start && chars[end - 1].is_whitespace() {
            end -= 1;
        }
        out.push(start..end);
    }
    out
}

/// Smallest run of whole sentences enclosing `[begin, end)`. A span that
/// touches no sentence (it sits in inter-sentence whitespace) snaps to the
/// nearest sentence. The result always contains the span itself.
pub fn enclosing_sentences(sentences: &[Range<usize>], begin: usize, end: usize) -> Range<usize> {
    let touches = |s: &Range<usize>| {
        if begin == end {
            s.start <= begin && begin <= s.end
        } else {
            s.start < end && s.end > begin
        }
    };
    let first = sentences.iter().position(touches);
    let last = sentences.iter().rposition(touches);
    let (lo, hi) = match (first, last) {
        (Some(f), Some(l)) => (sentences[f].start, sentences[l].end),
        _ => {
            let dist = |s: &Range<usize>| {
                if s.end <= begin {
                    begin - s.end
                } else {
                    s.start.saturating_sub(end)
                }
            };
            match sentences.iter().min_by_key(|s| dist(s)) {
                Some(s) => (s.start, s.end),
                None => (begin, end),
            }
        }
    };
    lo.min(begin)..hi.max(end)
}
