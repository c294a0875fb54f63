/// Words never treated as keywords. Merge vocabulary ("merge", "branch",
/// "pull", "request") is intentionally absent.
pub const STOPWORDS: [&str; 19] = [
    "the", "a", "an", "and", "or", "of", "in", "on", "to", "for", "is", "this", "that", "with", "from", "into", "are",
    "was", "were",
];

const MIN_TOKEN_CHARS: usize = 3;

/// Alphanumeric, excluding uppercase characters that have no lowercase form
/// (mathematical alphanumerics and the like).
fn is_token_char(c: char) -> bool {
    c.is_alphanumeric() && !(c.is_uppercase() && c.to_lowercase().all(char::is_uppercase))
}

/// Splits a commit message into lowercase keyword tokens, in first-occurrence
/// order without duplicates.
pub fn tokenize_keywords(message: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for raw in message.split(|c: char| !is_token_char(c)) {
        if raw.chars().count() < MIN_TOKEN_CHARS || raw.chars().all(char::is_numeric) {
            continue;
        }
        let token = raw.to_lowercase();
        if STOPWORDS.contains(&token.as_str()) || out.contains(&token) {
            continue;
        }
        out.push(token);
    }
    out
}
