use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Sample;

/// Read a one-column file of numbers, optionally skipping a header line.
pub fn load_csv(path: impl AsRef<Path>, header: bool) -> Result<Sample> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_csv(file, header)
}

/// Parse one value per line. Blank lines are ignored; anything else that is
/// not a finite decimal number is an error naming its 1-based line.
pub fn parse_csv(reader: impl Read, header: bool) -> Result<Sample> {
    let mut values = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if header && i == 0 {
            continue;
        }
        let field = line.trim();
        if field.is_empty() {
            continue;
        }
        let v: f64 = field.parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("not a number: {field:?}"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse { line: lineno, message: format!("value is not finite: {field:?}") });
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::invalid("input contains no values"));
    }
    Sample::new(values)
}
