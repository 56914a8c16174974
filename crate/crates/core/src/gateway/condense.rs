use crate::text::sentence_ends;

/// Default cap on knowledge text, in characters.
pub const DEFAULT_CAP: usize = 400;

/// Shortens `text` to at most `cap` characters, cutting at the last sentence
/// boundary that fits; hard-truncates when no boundary fits. Idempotent.
pub fn condense(text: &str, cap: usize) -> String {
    if text.chars().count() <= cap {
        return text.to_string();
    }
    // byte offset of the cap-th character
    let limit = text.char_indices().nth(cap).map_or(text.len(), |(i, _)| i);
    let cut = sentence_ends(text).into_iter().take_while(|&e| e <= limit).last();
    match cut {
        Some(end) if !text[..end].trim().is_empty() => text[..end].trim_end().to_string(),
        _ => text[..limit].to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_text_unchanged() {
        let t = "x".repeat(100);
        assert_eq!(condense(&t, 400), t);
    }

    #[test]
    fn cuts_at_sentence_boundary() {
        let t = "First one. Second sentence is much longer than the cap. Third.";
        // cap lands inside sentence two
        assert_eq!(condense(t, 25), "First one.");
        let zh = "北京明天多云。后天有小雨并且风力较大。大后天晴。";
        assert_eq!(condense(zh, 10), "北京明天多云。");
    }

    #[test]
    fn hard_truncates_without_boundary() {
        assert_eq!(condense("abcdefghij", 4), "abcd");
        assert_eq!(condense("北京明天多云后天小雨", 3), "北京明");
    }

    #[test]
    fn idempotent() {
        let t = "One. Two two two. Three three three three.".repeat(20);
        for cap in [1, 5, 17, 40, 400] {
            let once = condense(&t, cap);
            assert!(once.chars().count() <= cap);
            assert_eq!(condense(&once, cap), once);
        }
    }
}
