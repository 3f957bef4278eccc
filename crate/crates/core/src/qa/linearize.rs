use serde::{Deserialize, Serialize};

use crate::chart::{flatten_table, DataTable};

/// Maximum linearized sequence length, special tokens included.
pub const MAX_SEQ_LEN: usize = 256;

pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Segment {
    Question,
    Table,
}

impl Segment {
    pub fn index(self) -> usize {
        match self {
            Segment::Question => 0,
            Segment::Table => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputToken {
    pub text: String,
    pub segment: Segment,
    pub row: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linearized {
    pub tokens: Vec<InputToken>,
    pub truncated: bool,
}

/// Splits on whitespace and punctuation. Digit groups joined by `.` or `,`
/// stay one token, so "40.14" and "1,200" survive intact.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            cur.push(c);
            continue;
        }
        let joins_digits = (c == '.' || c == ',')
            && cur.chars().last().is_some_and(|p| p.is_ascii_digit())
            && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
        if joins_digits {
            cur.push(c);
            continue;
        }
        if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
        if !c.is_whitespace() {
            out.push(c.to_string());
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

pub fn linearize(question: &str, table: &DataTable) -> Linearized {
    linearize_with_limit(question, table, MAX_SEQ_LEN)
}

/// `[CLS] question [SEP] flattened-table`, question tokens at `(0, 0)` and
/// table tokens at their flattened coordinates.
pub fn linearize_with_limit(question: &str, table: &DataTable, max_len: usize) -> Linearized {
    let q = |text: String| InputToken {
        text,
        segment: Segment::Question,
        row: 0,
        col: 0,
    };
    let mut tokens = vec![q(CLS.to_string())];
    tokens.extend(tokenize(question).into_iter().map(q));
    tokens.push(q(SEP.to_string()));
    for cell in flatten_table(table) {
        for word in tokenize(&cell.text) {
            tokens.push(InputToken {
                text: word,
                segment: Segment::Table,
                row: cell.row,
                col: cell.col,
            });
        }
    }
    let truncated = tokens.len() > max_len;
    tokens.truncate(max_len);
    Linearized { tokens, truncated }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_keeps_numbers() {
        assert_eq!(tokenize("sum?"), vec!["sum", "?"]);
        assert_eq!(
            tokenize("What's 40.14, 1,200 and -3?"),
            vec!["What", "'", "s", "40.14", ",", "1,200", "and", "-", "3", "?"]
        );
        assert_eq!(tokenize("12.44%"), vec!["12.44", "%"]);
        assert_eq!(tokenize("end."), vec!["end", "."]);
    }

    #[test]
    fn one_by_one_table() {
        let t = DataTable::single_column("A", vec![("r".into(), 5.0)]);
        let lin = linearize("sum?", &t);
        let texts: Vec<_> = lin.tokens.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, vec!["[CLS]", "sum", "?", "[SEP]", "A", "r", "5"]);
        let coords: Vec<_> = lin.tokens.iter().map(|t| (t.segment.index(), t.row, t.col)).collect();
        assert_eq!(
            coords,
            vec![(0, 0, 0), (0, 0, 0), (0, 0, 0), (0, 0, 0), (1, 0, 1), (1, 1, 0), (1, 1, 1)]
        );
        assert!(!lin.truncated);
    }

    #[test]
    fn empty_table() {
        let lin = linearize("how many?", &DataTable::empty());
        assert_eq!(lin.tokens.len(), 5);
        assert_eq!(lin.tokens.last().unwrap().text, SEP);
    }

    #[test]
    fn long_tables_are_truncated() {
        // 1 header + 149 rows x (label + cell) = 299 table tokens + 3 = 302
        let rows: Vec<(String, f64)> = (0..149).map(|i| (format!("r{i}"), i as f64)).collect();
        let t = DataTable::single_column("v", rows);
        let lin = linearize("q", &t);
        assert!(lin.truncated);
        assert_eq!(lin.tokens.len(), MAX_SEQ_LEN);
        let short = linearize_with_limit("q", &t, 400);
        assert_eq!(short.tokens.len(), 302);
        assert!(!short.truncated);
    }
}
