/// A lowercase token with its character span `[start, end)` in the source
/// sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Lowercases, splits on whitespace, and emits every punctuation character
/// as its own token. Alphanumeric runs form word tokens. Offsets count
/// Unicode scalar values, which is how the review XML annotates targets.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut word = String::new();
    let mut word_start = 0;
    for (i, c) in text.chars().enumerate() {
        if c.is_alphanumeric() {
            if word.is_empty() {
                word_start = i;
            }
            word.extend(c.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            out.push(Token { text: std::mem::take(&mut word), start: word_start, end: i });
        }
        if !c.is_whitespace() {
            out.push(Token { text: c.to_lowercase().collect(), start: i, end: i + 1 });
        }
    }
    if !word.is_empty() {
        let end = text.chars().count();
        out.push(Token { text: word, start: word_start, end });
    }
    out
}

/// Token indices `[begin, end)` of every token overlapping the character
/// range `[from, to)`, or `None` when no token overlaps it.
pub fn align(tokens: &[Token], from: usize, to: usize) -> Option<(usize, usize)> {
    if from >= to {
        return None;
    }
    let mut covered = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.start < to && t.end > from)
        .map(|(i, _)| i);
    let first = covered.next()?;
    let last = covered.next_back().unwrap_or(first);
    Some((first, last + 1))
}
