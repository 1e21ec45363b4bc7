//! Parsing and rendering of python-style lists of strings.
//!
//! Completions are requested in the shape `["answer 1", "answer 2"]` but
//! models wrap that in prose, code fences, or both. The parser scans for the
//! first bracketed run that actually is a list of quoted strings and ignores
//! everything around it.

use super::ExtractError;

/// Extract the first well-formed bracketed list of quoted strings from raw
/// model output. Both quote styles are accepted, escape sequences inside
/// strings are honored, and a trailing comma is tolerated. Unquoted items
/// disqualify a candidate list, so `[1, 2]` or a prose aside in brackets is
/// skipped rather than misread.
pub fn parse_label_list(raw: &str) -> Result<Vec<String>, ExtractError> {
    let chars: Vec<char> = raw.chars().collect();
    let mut from = 0;
    while let Some(open) = chars[from..].iter().position(|&c| c == '[') {
        let open = from + open;
        if let Some(items) = try_parse_at(&chars, open) {
            return Ok(items);
        }
        from = open + 1;
    }
    let snippet: String = raw.chars().take(80).collect();
    Err(ExtractError::ParseFailure { snippet })
}

/// Attempt to parse a list of quoted strings starting at the `[` at `open`.
fn try_parse_at(chars: &[char], open: usize) -> Option<Vec<String>> {
    let mut i = open + 1;
    let mut items = Vec::new();
    loop {
        skip_ws(chars, &mut i);
        match *chars.get(i)? {
            ']' => return Some(items),
            quote @ ('"' | '\'') => {
                i += 1;
                let mut s = String::new();
                loop {
                    let c = *chars.get(i)?;
                    i += 1;
                    if c == '\\' {
                        let next = *chars.get(i)?;
                        i += 1;
                        match next {
                            'n' => s.push('\n'),
                            't' => s.push('\t'),
                            'r' => s.push('\r'),
                            '\\' | '"' | '\'' => s.push(next),
                            other => {
                                // python keeps unrecognized escapes literally
                                s.push('\\');
                                s.push(other);
                            }
                        }
                    } else if c == quote {
                        break;
                    } else {
                        s.push(c);
                    }
                }
                items.push(s);
                skip_ws(chars, &mut i);
                match *chars.get(i)? {
                    ',' => i += 1,
                    ']' => return Some(items),
                    _ => return None,
                }
            }
            _ => return None,
        }
    }
}

fn skip_ws(chars: &[char], i: &mut usize) {
    while chars.get(*i).is_some_and(|c| c.is_whitespace()) {
        *i += 1;
    }
}

/// Render labels as a double-quoted python-style list. The inverse of
/// [`parse_label_list`] for labels without exotic content: parsing the
/// rendered text yields the labels back verbatim.
pub fn render_label_list<S: AsRef<str>>(labels: &[S]) -> String {
    let mut out = String::from("[");
    for (idx, label) in labels.iter().enumerate() {
        if idx > 0 {
            out.push_str(", ");
        }
        out.push('"');
        for c in label.as_ref().chars() {
            match c {
                '"' => out.push_str("\\\""),
                '\\' => out.push_str("\\\\"),
                '\n' => out.push_str("\\n"),
                '\t' => out.push_str("\\t"),
                '\r' => out.push_str("\\r"),
                _ => out.push(c),
            }
        }
        out.push('"');
    }
    out.push(']');
    out
}
