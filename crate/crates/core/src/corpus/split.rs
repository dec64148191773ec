/// Full-width sentence terminators plus newline.
pub const DEFAULT_DELIMITERS: [char; 5] = ['。', '！', '？', '；', '\n'];

/// Splits `text` after every delimiter. Each sentence keeps its terminator
/// (except a newline) and is trimmed; fragments that are empty or consist
/// only of delimiters are dropped.
pub fn split_sentences(text: &str, delimiters: &[char]) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, ch) in text.char_indices() {
        if delimiters.contains(&ch) {
            let end = i + ch.len_utf8();
            push_fragment(&mut out, &text[start..end], delimiters);
            start = end;
        }
    }
    push_fragment(&mut out, &text[start..], delimiters);
    out
}

fn push_fragment(out: &mut Vec<String>, fragment: &str, delimiters: &[char]) {
    let trimmed = fragment.trim();
    if trimmed.chars().all(|c| delimiters.contains(&c) || c.is_whitespace()) {
        return;
    }
    out.push(trimmed.to_string());
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_terminators() {
        assert_eq!(split_sentences("甲盗窃。乙销赃。", &DEFAULT_DELIMITERS), vec!["甲盗窃。", "乙销赃。"]);
    }

    #[test]
    fn no_delimiter_gives_one_sentence() {
        assert_eq!(split_sentences("no terminator here", &DEFAULT_DELIMITERS), vec!["no terminator here"]);
    }

    #[test]
    fn empty_fragments_dropped() {
        assert_eq!(split_sentences("A。。B！", &DEFAULT_DELIMITERS), vec!["A。", "B！"]);
    }

    #[test]
    fn whitespace_only_is_empty() {
        assert!(split_sentences(" \n\t ", &DEFAULT_DELIMITERS).is_empty());
        assert!(split_sentences("", &DEFAULT_DELIMITERS).is_empty());
    }

    #[test]
    fn newline_splits_and_is_trimmed() {
        assert_eq!(split_sentences("first line\nsecond。", &DEFAULT_DELIMITERS), vec!["first line", "second。"]);
    }

    fn content(s: &str) -> String {
        s.chars()
            .filter(|c| !DEFAULT_DELIMITERS.contains(c) && !c.is_whitespace())
            .collect()
    }

    proptest! {
        #[test]
        fn splitting_is_a_partition(text in "[a-c 。！？；\n]{0,40}") {
            let sentences = split_sentences(&text, &DEFAULT_DELIMITERS);
            prop_assert_eq!(content(&sentences.concat()), content(&text));
            for s in &sentences {
                prop_assert!(!s.is_empty());
                prop_assert!(text.contains(s.as_str()));
            }
        }
    }
}
