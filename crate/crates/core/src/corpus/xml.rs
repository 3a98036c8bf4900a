use super::tokenize::{align, tokenize};
use super::{CorpusError, Polarity, ReviewInstance, Span};

/// Parses a SemEval review document into one instance per explicit-target
/// opinion. Opinions whose target is `NULL` or empty are dropped.
pub fn parse_semeval(document: &str) -> Result<Vec<ReviewInstance>, CorpusError> {
    let doc = roxmltree::Document::parse(document).map_err(|e| CorpusError::Xml(e.to_string()))?;
    let mut out = Vec::new();
    for sentence in doc.descendants().filter(|n| n.has_tag_name("sentence")) {
        let sentence_id = sentence
            .attribute("id")
            .ok_or_else(|| CorpusError::Xml("sentence without id".into()))?
            .to_string();
        let schema = |detail: &str| CorpusError::Schema {
            sentence_id: sentence_id.clone(),
            detail: detail.to_string(),
        };
        let text = sentence
            .children()
            .find(|n| n.has_tag_name("text"))
            .and_then(|n| n.text())
            .ok_or_else(|| schema("missing <text>"))?;
        let tokens = tokenize(text);
        let words: Vec<String> = tokens.iter().map(|t| t.text.clone()).collect();

        let opinions = sentence
            .children()
            .filter(|n| n.has_tag_name("Opinions"))
            .flat_map(|n| n.children().filter(|c| c.has_tag_name("Opinion")));
        for op in opinions {
            let target = op.attribute("target").unwrap_or("");
            if target.is_empty() || target == "NULL" {
                continue;
            }
            let category = op.attribute("category").ok_or_else(|| schema("opinion without category"))?;
            let polarity: Polarity =
                op.attribute("polarity").ok_or_else(|| schema("opinion without polarity"))?.parse()?;
            let offset = |name: &str| -> Result<usize, CorpusError> {
                op.attribute(name)
                    .ok_or_else(|| schema(&format!("opinion without {name}")))?
                    .parse()
                    .map_err(|_| schema(&format!("non-numeric {name}")))
            };
            let (from, to) = (offset("from")?, offset("to")?);
            let (begin, end) = align(&tokens, from, to).ok_or_else(|| CorpusError::Alignment {
                sentence_id: sentence_id.clone(),
                from,
                to,
            })?;
            let mut inst = ReviewInstance::new(
                sentence_id.clone(),
                words.clone(),
                Span { begin, end },
                category.to_string(),
                polarity,
            )?;
            inst.target_text = target.to_string();
            out.push(inst);
        }
    }
    Ok(out)
}

/// Reads the line format
/// `sentence_id \t category \t polarity \t begin \t end \t tokens`, where
/// tokens are space separated and `[begin, end)` indexes them.
pub fn parse_pretokenized(text: &str) -> Result<Vec<ReviewInstance>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fmt_err = |detail: String| CorpusError::Format { line: line_no, detail };
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, category, polarity, begin, end, tokens] = fields[..] else {
            return Err(fmt_err(format!("expected 6 tab-separated fields, got {}", fields.len())));
        };
        let index = |s: &str| s.trim().parse::<usize>().map_err(|_| fmt_err(format!("bad index {s:?}")));
        let span = Span { begin: index(begin)?, end: index(end)? };
        let tokens = tokens.split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect();
        out.push(ReviewInstance::new(
            id.to_string(),
            tokens,
            span,
            category.to_string(),
            polarity.trim().parse()?,
        )?);
    }
    Ok(out)
}
