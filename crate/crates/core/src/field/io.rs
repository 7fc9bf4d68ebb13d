//! CSV serialization: header `w,value`, one row per breakpoint, then a
//! footer row `#masses,<x_pos_inf>,<x_neg_inf>,<mode>`.

use std::io::{Read, Write};

use super::{Mode, TailField};
use crate::error::{Error, Result};

const FOOTER_TAG: &str = "#masses";

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

pub fn write_csv<W: Write>(field: &TailField, out: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().flexible(true).from_writer(out);
    wtr.write_record(["w", "value"]).map_err(csv_err)?;
    for (w, v) in field.grid.iter().zip(&field.values) {
        wtr.write_record([w.to_string(), v.to_string()])
            .map_err(csv_err)?;
    }
    wtr.write_record([
        FOOTER_TAG.to_string(),
        field.x_pos_inf().to_string(),
        field.x_neg_inf.to_string(),
        field.mode.as_str().to_string(),
    ])
    .map_err(csv_err)?;
    wtr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<TailField> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let mut grid = Vec::new();
    let mut values = Vec::new();
    let mut footer = None;
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("bad number {s:?}: {e}")))
    };
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        if footer.is_some() {
            return Err(Error::Parse("rows after the footer".into()));
        }
        if rec.get(0) == Some(FOOTER_TAG) {
            if rec.len() != 4 {
                return Err(Error::Parse(
                    "footer needs x_pos_inf, x_neg_inf, mode".into(),
                ));
            }
            let mode = match &rec[3] {
                "step" => Mode::Step,
                "linear" => Mode::Linear,
                m => return Err(Error::Parse(format!("unknown mode {m:?}"))),
            };
            footer = Some((num(&rec[1])?, num(&rec[2])?, mode));
            continue;
        }
        if rec.len() != 2 {
            return Err(Error::Parse(format!(
                "expected 2 columns, got {}",
                rec.len()
            )));
        }
        grid.push(num(&rec[0])?);
        values.push(num(&rec[1])?);
    }
    let (x_pos_inf, x_neg_inf, mode) =
        footer.ok_or_else(|| Error::Parse("missing footer row".into()))?;
    let field = TailField::new(grid, values, mode, x_neg_inf)?;
    if field.x_pos_inf() != x_pos_inf {
        return Err(Error::Parse(
            "footer x_pos_inf disagrees with the last value".into(),
        ));
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_round_trip_is_bit_exact() {
        let f = TailField::from_samples(&[0.1, 1.0 / 3.0, 2.0f64.sqrt(), f64::INFINITY]).unwrap();
        let mut buf = Vec::new();
        write_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("w,value\n"));
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn missing_footer_rejected() {
        assert!(read_csv("w,value\n0,0\n".as_bytes()).is_err());
    }
}
