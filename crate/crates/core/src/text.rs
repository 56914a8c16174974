//! Character-level text helpers shared by the metrics, gateway and dataset
//! code. All text measures in this crate are character based; there is no
//! word segmentation.

use unicode_normalization::UnicodeNormalization;

/// NFC-normalizes `text`, drops every whitespace character, and returns the
/// remaining characters one per token. Punctuation is kept.
pub fn char_tokens(text: &str) -> Vec<char> {
    text.nfc().filter(|c| !c.is_whitespace()).collect()
}

/// Number of characters in `text` excluding whitespace.
pub fn char_count(text: &str) -> usize {
    text.nfc().filter(|c| !c.is_whitespace()).count()
}

pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x20000..=0x2FA1F)
}

pub fn contains_cjk(text: &str) -> bool {
    text.chars().any(is_cjk)
}

fn is_hard_terminator(c: char) -> bool {
    matches!(c, '。' | '！' | '？' | '!' | '?' | '\n')
}

/// Splits `text` into sentences, each keeping its terminator. A `.` ends a
/// sentence only when followed by whitespace or the end of text, so decimals
/// survive. Empty (whitespace-only) pieces are dropped.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        let end_here = if is_hard_terminator(c) {
            true
        } else if c == '.' {
            iter.peek().is_none_or(|&(_, n)| n.is_whitespace())
        } else {
            false
        };
        if end_here {
            let end = i + c.len_utf8();
            push_piece(&mut out, &text[start..end]);
            start = end;
        }
    }
    push_piece(&mut out, &text[start..]);
    out
}

fn push_piece<'a>(out: &mut Vec<&'a str>, piece: &'a str) {
    let trimmed = piece.trim();
    if !trimmed.is_empty() && trimmed != "\n" {
        out.push(trimmed);
    }
}

/// Byte offsets just past each sentence terminator in `text`, in order.
pub(crate) fn sentence_ends(text: &str) -> Vec<usize> {
    let mut ends = Vec::new();
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        let hit = is_hard_terminator(c) || (c == '.' && iter.peek().is_none_or(|&(_, n)| n.is_whitespace()));
        if hit {
            ends.push(i + c.len_utf8());
        }
    }
    ends
}

/// Lowercases and strips whitespace and punctuation; used for keyword and
/// phrase matching, never for metrics.
pub fn fold(text: &str) -> String {
    text.nfc().filter(|c| !c.is_whitespace() && !is_punct(*c)).flat_map(char::to_lowercase).collect()
}

pub fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '，' | '。'
                | '！'
                | '？'
                | '、'
                | '；'
                | '：'
                | '“'
                | '”'
                | '‘'
                | '’'
                | '（'
                | '）'
                | '《'
                | '》'
                | '…'
                | '～'
                | '·'
        )
}
