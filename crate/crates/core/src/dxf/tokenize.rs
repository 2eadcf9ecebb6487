use crate::error::{Error, Result};

/// One `(group code, value)` pair of an ASCII DXF stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DxfTag {
    pub code: i32,
    pub value: String,
}

impl DxfTag {
    pub fn new(code: i32, value: impl Into<String>) -> Self {
        Self {
            code,
            value: value.into(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        self.value.trim().parse::<f64>().ok().filter(|v| v.is_finite())
    }

    pub fn as_i64(&self) -> Option<i64> {
        self.value.trim().parse::<i64>().ok()
    }
}

const BINARY_SENTINEL: &str = "AutoCAD Binary DXF";

/// Splits ASCII DXF text into group-code/value pairs.
///
/// Codes are trimmed and parsed as non-negative integers. Values keep their
/// inner whitespace; only a trailing carriage return is stripped. A dangling
/// code line without its value is an error reported at the (missing) value
/// line.
pub fn tokenize_dxf(text: &str) -> Result<Vec<DxfTag>> {
    if text.starts_with(BINARY_SENTINEL) {
        return Err(Error::UnsupportedFormat(
            "binary DXF is not supported; export the drawing as ASCII DXF".into(),
        ));
    }
    if text.starts_with("AC10") {
        return Err(Error::UnsupportedFormat(
            "DWG input is not supported; convert the drawing to ASCII DXF first".into(),
        ));
    }

    let mut lines: Vec<&str> = text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .collect();
    // `split` yields a final empty piece for newline-terminated input.
    if lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    // Tolerate blank padding after EOF.
    while lines.len() % 2 == 1 && lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }

    let mut tags = Vec::with_capacity(lines.len() / 2);
    let mut chunks = lines.chunks(2).enumerate();
    for (pair_idx, chunk) in &mut chunks {
        let code_line = 2 * pair_idx + 1;
        let raw_code = chunk[0].trim();
        let code: i32 = raw_code.parse().map_err(|_| Error::Parse {
            line: code_line,
            message: format!("expected integer group code, found {raw_code:?}"),
        })?;
        if code < 0 {
            return Err(Error::Parse {
                line: code_line,
                message: format!("negative group code {code}"),
            });
        }
        let Some(value) = chunk.get(1) else {
            return Err(Error::Parse {
                line: code_line + 1,
                message: format!("group code {code} has no value line"),
            });
        };
        tags.push(DxfTag::new(code, *value));
    }
    Ok(tags)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_codes_with_values() {
        let tags = tokenize_dxf("0\nLINE\n10\n0.0\n").unwrap();
        assert_eq!(tags, vec![DxfTag::new(0, "LINE"), DxfTag::new(10, "0.0")]);
    }

    #[test]
    fn empty_input_is_empty() {
        assert!(tokenize_dxf("").unwrap().is_empty());
    }

    #[test]
    fn odd_trailing_line_reports_missing_value_line() {
        match tokenize_dxf("0\nLINE\n10\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_integer_code_reports_its_line() {
        match tokenize_dxf("0\nLINE\nxx\n1.0\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn crlf_and_padded_codes() {
        let tags = tokenize_dxf("  0\r\nCIRCLE\r\n 40\r\n 2.5\r\n").unwrap();
        assert_eq!(tags[1].code, 40);
        assert_eq!(tags[1].as_f64(), Some(2.5));
        assert_eq!(tags[0].value, "CIRCLE");
    }

    #[test]
    fn rejects_binary_dxf() {
        let err = tokenize_dxf("AutoCAD Binary DXF\r\n\x1a\0").unwrap_err();
        assert!(matches!(err, Error::UnsupportedFormat(_)));
    }
}
