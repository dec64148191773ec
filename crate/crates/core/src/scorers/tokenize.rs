use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tokenizer {
    /// CJK characters become unigrams; other alphanumeric runs become
    /// lowercased words; everything else separates.
    #[default]
    Mixed,
    /// Whitespace-separated runs, verbatim.
    Whitespace,
    /// Every non-whitespace character.
    Chars,
}

pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF       // kana
        | 0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xAC00..=0xD7AF     // hangul syllables
        | 0xF900..=0xFAFF
        | 0x20000..=0x2FA1F)
}

impl Tokenizer {
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        match self {
            Tokenizer::Whitespace => text.split_whitespace().map(str::to_string).collect(),
            Tokenizer::Chars => text.chars().filter(|c| !c.is_whitespace()).map(String::from).collect(),
            Tokenizer::Mixed => {
                let mut out = Vec::new();
                let mut word = String::new();
                for c in text.chars() {
                    if is_cjk(c) {
                        if !word.is_empty() {
                            out.push(std::mem::take(&mut word));
                        }
                        out.push(c.to_string());
                    } else if c.is_alphanumeric() {
                        word.extend(c.to_lowercase());
                    } else if !word.is_empty() {
                        out.push(std::mem::take(&mut word));
                    }
                }
                if !word.is_empty() {
                    out.push(word);
                }
                out
            }
        }
    }
}

impl std::str::FromStr for Tokenizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mixed" => Ok(Tokenizer::Mixed),
            "whitespace" => Ok(Tokenizer::Whitespace),
            "chars" => Ok(Tokenizer::Chars),
            other => Err(format!("unknown tokenizer `{other}` (expected mixed, whitespace or chars)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_splits_cjk_into_unigrams() {
        assert_eq!(
            Tokenizer::Mixed.tokenize("甲盗窃 Car-Theft 2次。"),
            vec!["甲", "盗", "窃", "car", "theft", "2", "次"]
        );
    }

    #[test]
    fn other_modes() {
        assert_eq!(Tokenizer::Whitespace.tokenize(" a  B,c "), vec!["a", "B,c"]);
        assert_eq!(Tokenizer::Chars.tokenize("a b。"), vec!["a", "b", "。"]);
    }
}
