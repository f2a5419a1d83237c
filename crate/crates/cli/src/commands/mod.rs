pub mod judge;
pub mod report;
pub mod score;
pub mod segment;
pub mod simulate;
pub mod vote;

use capo_core::voting::VoteMode;

use crate::error::CliError;

/// Parses a vote-mode flag value.
pub fn parse_vote_mode(value: &str) -> Result<VoteMode, CliError> {
    value.parse().map_err(CliError::Validation)
}

/// Interprets backslash escapes in delimiter flags, so shell users can
/// pass "\n\n" literally.
pub fn unescape_delimiter(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delimiter_escapes_are_interpreted() {
        assert_eq!(unescape_delimiter("\\n\\n"), "\n\n");
        assert_eq!(unescape_delimiter("--"), "--");
        assert_eq!(unescape_delimiter("\\\\n"), "\\n");
    }

    #[test]
    fn vote_modes_parse_case_insensitively() {
        assert_eq!(parse_vote_mode("Majority").unwrap(), VoteMode::Majority);
        assert!(parse_vote_mode("plurality").is_err());
    }
}
