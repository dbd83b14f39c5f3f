//! Name normalization shared by ingest, enrichment and spatial matching.

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Case-folded, diacritic-free search key for a display name.
///
/// `ß` folds to `ss` and runs of whitespace collapse to a single space, so
/// `"Jägerstraße "` and `"JAGERSTRASSE"` share the key `"jagerstrasse"`.
pub fn search_key(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    let mut pending_space = false;
    for c in name.nfkd() {
        if is_combining_mark(c) {
            continue;
        }
        if c.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        match c {
            'ß' | 'ẞ' => out.push_str("ss"),
            'æ' | 'Æ' => out.push_str("ae"),
            'œ' | 'Œ' => out.push_str("oe"),
            'ø' | 'Ø' => out.push('o'),
            'ł' | 'Ł' => out.push('l'),
            'đ' | 'Đ' => out.push('d'),
            _ => out.extend(c.to_lowercase()),
        }
    }
    out
}

/// Splits a search key into alphanumeric tokens.
pub fn tokens(key: &str) -> Vec<&str> {
    key.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .collect()
}

/// True if `name` contains any Unicode decimal digit.
pub fn has_decimal_digit(name: &str) -> bool {
    name.chars().any(is_decimal_digit)
}

fn is_decimal_digit(c: char) -> bool {
    if c.is_ascii_digit() {
        return true;
    }
    // Non-ASCII decimal digits (general category Nd) all have a numeric value
    // 0..=9 in their block; `to_digit` only knows ASCII, so probe the common
    // Nd blocks instead.
    matches!(c as u32,
        0x0660..=0x0669 | 0x06F0..=0x06F9 | 0x07C0..=0x07C9 | 0x0966..=0x096F
        | 0x09E6..=0x09EF | 0x0A66..=0x0A6F | 0x0AE6..=0x0AEF | 0x0B66..=0x0B6F
        | 0x0BE6..=0x0BEF | 0x0C66..=0x0C6F | 0x0CE6..=0x0CEF | 0x0D66..=0x0D6F
        | 0x0DE6..=0x0DEF | 0x0E50..=0x0E59 | 0x0ED0..=0x0ED9 | 0x0F20..=0x0F29
        | 0x1040..=0x1049 | 0x1090..=0x1099 | 0x17E0..=0x17E9 | 0x1810..=0x1819
        | 0x1946..=0x194F | 0x19D0..=0x19D9 | 0x1A80..=0x1A89 | 0x1A90..=0x1A99
        | 0x1B50..=0x1B59 | 0x1BB0..=0x1BB9 | 0x1C40..=0x1C49 | 0x1C50..=0x1C59
        | 0xA620..=0xA629 | 0xA8D0..=0xA8D9 | 0xA900..=0xA909 | 0xA9D0..=0xA9D9
        | 0xA9F0..=0xA9F9 | 0xAA50..=0xAA59 | 0xABF0..=0xABF9 | 0xFF10..=0xFF19
        | 0x104A0..=0x104A9 | 0x11066..=0x1106F | 0x1D7CE..=0x1D7FF)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn search_key_folds_case_and_diacritics() {
        assert_eq!(search_key("Jägerstraße"), "jagerstrasse");
        assert_eq!(search_key("  Rue   de  l'Élysée "), "rue de l'elysee");
        assert_eq!(search_key("ÖSTERREICH"), "osterreich");
    }

    #[test]
    fn digit_rule_covers_non_ascii_digits() {
        assert!(has_decimal_digit("42nd trk"));
        assert!(has_decimal_digit("Street ٣"));
        assert!(has_decimal_digit("Ｓｔ１"));
        assert!(!has_decimal_digit("Rue de Rivoli"));
        // Roman numerals are letters, not decimal digits.
        assert!(!has_decimal_digit("Rue Henri IV"));
        assert!(!has_decimal_digit("Ⅻ"));
    }

    #[test]
    fn tokens_split_on_punctuation() {
        assert_eq!(tokens("poet, playwright"), vec!["poet", "playwright"]);
    }
}
