use serde::{Deserialize, Serialize};

/// Lowercase word tokens in source order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub tokens: Vec<String>,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }
}

/// Splits on anything that is not alphanumeric or a hyphen. Apostrophes are
/// dropped so possessives stay one token; leading and trailing hyphens are
/// trimmed so only intra-token hyphens survive.
pub fn tokenize(text: &str) -> TokenStream {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut flush = |cur: &mut String| {
        let t = cur.trim_matches('-');
        if !t.is_empty() {
            tokens.push(t.to_string());
        }
        cur.clear();
    };
    for ch in text.chars() {
        if ch == '\'' || ch == '\u{2019}' {
            continue;
        }
        if ch.is_alphanumeric() || ch == '-' {
            cur.extend(ch.to_lowercase());
        } else {
            flush(&mut cur);
        }
    }
    flush(&mut cur);
    TokenStream { tokens }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s).tokens
    }

    #[test]
    fn basic_split() {
        assert_eq!(toks("Driver was distracted."), ["driver", "was", "distracted"]);
        assert_eq!(toks("4-way intersection"), ["4-way", "intersection"]);
        assert!(toks("").is_empty());
    }

    #[test]
    fn rule_fixture() {
        assert_eq!(toks("V1 rear-ended V2 -- at 35mph."), ["v1", "rear-ended", "v2", "at", "35mph"]);
        assert_eq!(toks("driver's  side; (north)"), ["drivers", "side", "north"]);
        assert_eq!(toks("-lead trail- mid-dle"), ["lead", "trail", "mid-dle"]);
        assert_eq!(toks("150 FEET East"), ["150", "feet", "east"]);
    }
}
