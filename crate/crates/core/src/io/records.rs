//! Observation records: one answered query per line,
//! `user_id,ell_a,price_a,ell_b,price_b,answer` with the answer `A` or `B`.
//! Lines starting with `#` are comments and a leading header row is skipped.

use std::io::{Read, Write};

use thiserror::Error;

use crate::learning::{Observation, Query};

pub const HEADER: [&str; 6] = ["user_id", "ell_a", "price_a", "ell_b", "price_b", "answer"];

#[derive(Debug, Error)]
pub enum RecordsError {
    #[error("invalid answer `{0}`: expected A or B")]
    InvalidAnswer(String),
    #[error("line {line}: {reason}")]
    Line { line: u64, reason: String },
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

/// `A`/`a` selects the first option, `B`/`b` the second.
pub fn parse_answer(line: &str) -> Result<usize, RecordsError> {
    match line.trim() {
        "A" | "a" => Ok(0),
        "B" | "b" => Ok(1),
        other => Err(RecordsError::InvalidAnswer(other.to_string())),
    }
}

pub fn answer_label(answer: usize) -> &'static str {
    if answer == 0 {
        "A"
    } else {
        "B"
    }
}

pub fn parse_observations<R: Read>(reader: R) -> Result<Vec<Observation>, RecordsError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if i == 0 && record.get(0) == Some(HEADER[0]) {
            continue;
        }
        let bad = |reason: String| RecordsError::Line { line, reason };
        if record.len() != HEADER.len() {
            return Err(bad(format!("expected {} fields, found {}", HEADER.len(), record.len())));
        }
        let user_id: u64 = record[0]
            .parse()
            .map_err(|_| bad(format!("bad user_id `{}`", &record[0])))?;
        let mut nums = [0.0; 4];
        for (k, x) in nums.iter_mut().enumerate() {
            let field = &record[k + 1];
            *x = field
                .parse()
                .map_err(|_| bad(format!("bad {} `{field}`", HEADER[k + 1])))?;
        }
        let answer = parse_answer(&record[5]).map_err(|e| bad(e.to_string()))?;
        let query = Query::from_pairs((nums[0], nums[1]), (nums[2], nums[3])).map_err(|e| bad(e.to_string()))?;
        let obs = Observation::new(user_id, query, answer).map_err(|e| bad(e.to_string()))?;
        out.push(obs);
    }
    Ok(out)
}

/// Writes `observations` with a header row, preceded by an optional `#` line.
pub fn write_observations<W: Write>(
    mut writer: W,
    comment: Option<&str>,
    observations: &[Observation],
) -> Result<(), RecordsError> {
    if let Some(c) = comment {
        writeln!(writer, "# {c}").map_err(csv::Error::from)?;
    }
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(HEADER)?;
    for o in observations {
        wtr.write_record([
            o.user_id.to_string(),
            o.query.a.ell.to_string(),
            o.query.a.price.to_string(),
            o.query.b.ell.to_string(),
            o.query.b.price.to_string(),
            answer_label(o.answer).to_string(),
        ])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn answers() {
        assert_eq!(parse_answer("A\n").unwrap(), 0);
        assert_eq!(parse_answer("b").unwrap(), 1);
        assert!(matches!(parse_answer("C"), Err(RecordsError::InvalidAnswer(_))));
        assert!(matches!(parse_answer(""), Err(RecordsError::InvalidAnswer(_))));
    }

    #[test]
    fn round_trip() {
        let text = "# seed 1\nuser_id,ell_a,price_a,ell_b,price_b,answer\n0,40,5,60,0,A\n3, 45.5, 2, 70, 1, b\n";
        let obs = parse_observations(text.as_bytes()).unwrap();
        assert_eq!(obs.len(), 2);
        assert_eq!(obs[1].user_id, 3);
        assert_eq!(obs[1].answer, 1);
        assert_eq!(obs[1].query.a.ell, 45.5);
        let mut buf = Vec::new();
        write_observations(&mut buf, Some("x"), &obs).unwrap();
        assert_eq!(parse_observations(buf.as_slice()).unwrap(), obs);
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_observations("0,40,5,60,0,A\n1,40,5,60,0,Z\n".as_bytes()).unwrap_err();
        match err {
            RecordsError::Line { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_observations("0,40,5,60\n".as_bytes()).is_err());
        assert!(parse_observations("0,40,5,40,5,A\n".as_bytes()).is_err());
    }
}
