//! Phrase matching over case-folded, whitespace-normalized text.
//!
//! Positions reported by [`Matcher::find`] are char indices into the text
//! that was searched, not into its folded form.

use std::collections::HashMap;

/// Text folded for matching, with a map back to source char indices.
#[derive(Debug, Clone)]
pub struct Folded {
    pub chars: Vec<char>,
    pub origin: Vec<usize>,
}

fn fold_char(c: char, out: &mut Vec<char>) {
    match c {
        '\u{2019}' | '\u{2018}' | '\u{02bc}' | '`' => out.push('\''),
        '\u{2010}' | '\u{2011}' => out.push('-'),
        c if c.is_ascii() => out.push(c.to_ascii_lowercase()),
        c => out.extend(c.to_lowercase()),
    }
}

pub fn fold(text: &str) -> Folded {
    let mut chars = Vec::with_capacity(text.len());
    let mut origin = Vec::with_capacity(text.len());
    let mut buf = Vec::with_capacity(2);
    for (i, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            if chars.last() != Some(&' ') {
                chars.push(' ');
                origin.push(i);
            }
            continue;
        }
        buf.clear();
        fold_char(c, &mut buf);
        for f in &buf {
            chars.push(*f);
            origin.push(i);
        }
    }
    Folded { chars, origin }
}

/// Case-folded, whitespace-normalized form of a phrase.
pub fn fold_phrase(phrase: &str) -> String {
    fold(phrase.trim()).chars.into_iter().collect()
}

pub(crate) fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x2E80..=0x2FDF | 0x3040..=0x30FF | 0x3100..=0x312F | 0x3400..=0x4DBF
        | 0x4E00..=0x9FFF | 0xAC00..=0xD7AF | 0xF900..=0xFAFF | 0x20000..=0x2FA1F)
}

/// Letters and digits of space-delimited scripts; CJK text has no word
/// boundaries, so its characters never count.
pub(crate) fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() && !is_cjk(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Match {
    /// Char range in the searched text.
    pub start: usize,
    pub end: usize,
    /// Index of the pattern in authoring order.
    pub pattern: usize,
}

#[derive(Debug, Clone)]
pub struct Matcher {
    patterns: Vec<Vec<char>>,
    /// Pattern indices by first char.
    by_first: HashMap<char, Vec<usize>>,
}

impl Matcher {
    /// Patterns are matched in the order given, which is their tie-break
    /// priority.
    pub fn new<'a>(phrases: impl IntoIterator<Item = &'a str>) -> Matcher {
        let patterns: Vec<Vec<char>> = phrases.into_iter().map(|p| fold_phrase(p).chars().collect()).collect();
        let mut by_first: HashMap<char, Vec<usize>> = HashMap::new();
        for (i, p) in patterns.iter().enumerate() {
            if let Some(&c) = p.first() {
                by_first.entry(c).or_default().push(i);
            }
        }
        Matcher { patterns, by_first }
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.iter().all(|p| p.is_empty())
    }

    fn candidates(&self, folded: &Folded) -> Vec<(usize, usize, usize)> {
        let text = &folded.chars;
        let mut found = Vec::new();
        for s in 0..text.len() {
            let Some(pis) = self.by_first.get(&text[s]) else {
                continue;
            };
            for &pi in pis {
                let pat = &self.patterns[pi];
                if s + pat.len() > text.len() || text[s..s + pat.len()] != pat[..] {
                    continue;
                }
                let first_word = is_word_char(pat[0]);
                let last_word = is_word_char(pat[pat.len() - 1]);
                if first_word && s > 0 && is_word_char(text[s - 1]) {
                    continue;
                }
                let mut e = s + pat.len();
                if last_word && e < text.len() && is_word_char(text[e]) {
                    // simple English plurals
                    let rest = &text[e..];
                    let sibilant = matches!(pat[pat.len() - 1], 's' | 'x' | 'z')
                        || pat.ends_with(&['c', 'h'])
                        || pat.ends_with(&['s', 'h']);
                    let ext = if sibilant && rest.starts_with(&['e', 's']) {
                        2
                    } else if !sibilant && rest[0] == 's' {
                        1
                    } else {
                        0
                    };
                    if ext == 0 || (e + ext < text.len() && is_word_char(text[e + ext])) {
                        continue;
                    }
                    e += ext;
                }
                found.push((s, e, pi));
            }
        }
        found
    }

    /// Non-overlapping matches, longest first with ties broken by pattern
    /// order, returned in text order.
    pub fn find(&self, text: &str) -> Vec<Match> {
        let folded = fold(text);
        let mut cands = self.candidates(&folded);
        cands.sort_by(|a, b| (b.1 - b.0).cmp(&(a.1 - a.0)).then(a.2.cmp(&b.2)).then(a.0.cmp(&b.0)));
        let mut taken: Vec<(usize, usize, usize)> = Vec::new();
        for c in cands {
            if taken.iter().all(|t| c.1 <= t.0 || c.0 >= t.1) {
                taken.push(c);
            }
        }
        taken.sort_by_key(|t| t.0);
        taken
            .into_iter()
            .map(|(s, e, pattern)| Match {
                start: folded.origin[s],
                end: folded.origin[e - 1] + 1,
                pattern,
            })
            .collect()
    }
}
