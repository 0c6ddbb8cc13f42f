/// Case-folds `text`, turns every non-alphanumeric character into a space,
/// collapses runs of whitespace and trims.
///
/// This is the single surface-form normalization used for entity matching,
/// triple ranking, lexical indexing and title matching.
pub fn normalize_surface(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.extend(ch.to_lowercase());
        } else {
            pending_space = true;
        }
    }
    out
}

/// Normalized tokens of `text`.
pub fn surface_tokens(text: &str) -> Vec<String> {
    normalize_surface(text)
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_fold() {
        assert_eq!(normalize_surface("Avatar"), "avatar");
    }

    #[test]
    fn punctuation_and_whitespace() {
        assert_eq!(
            normalize_surface("  Postcolonial   Love-Poem! "),
            "postcolonial love poem"
        );
        assert_eq!(normalize_surface("a|b || c"), "a b c");
    }

    #[test]
    fn empty_and_symbols_only() {
        assert_eq!(normalize_surface(""), "");
        assert_eq!(normalize_surface(" -- !! "), "");
        assert!(surface_tokens("...").is_empty());
    }

    #[test]
    fn unicode_letters_survive() {
        assert_eq!(normalize_surface("Éire (Ireland)"), "éire ireland");
    }
}
