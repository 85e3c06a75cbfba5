//! Portable CSV image / feature format: one row per sample holding a class
//! label and the pixel (or feature) values in row-major order.
//!
//! A header row is optional. When present, the column named `label` holds the
//! class id; without a header the first column does. Precomputed feature files
//! use the same layout and load with `shape = None`, which yields `1 × D × 1`
//! "images".

use std::path::Path;

use super::{ImageSet, ImageShape};
use crate::{Error, Result};

pub fn load_csv_images(path: impl AsRef<Path>, shape: Option<ImageShape>) -> Result<ImageSet> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Format(format!("{}: {other:?}", path.display())),
        })?;

    let mut label_col = 0;
    let mut width = None;
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if line == 0 && record.iter().any(|f| f.parse::<f64>().is_err()) {
            label_col = record
                .iter()
                .position(|f| f.eq_ignore_ascii_case("label"))
                .ok_or_else(|| Error::Format(format!("{}: header has no `label` column", path.display())))?;
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::Format(format!(
                "{}: row {} has {} fields, expected {w}",
                path.display(),
                line + 1,
                record.len()
            )));
        }
        for (col, field) in record.iter().enumerate() {
            if col == label_col {
                let label = field.parse::<u8>().map_err(|_| {
                    Error::Format(format!("{}: row {}: bad label {field:?}", path.display(), line + 1))
                })?;
                labels.push(label);
            } else {
                let v = field.parse::<f64>().map_err(|_| {
                    Error::Format(format!("{}: row {}: bad value {field:?}", path.display(), line + 1))
                })?;
                pixels.push(v);
            }
        }
    }
    let values = width.map_or(0, |w| w.saturating_sub(1));
    if values == 0 {
        return Err(Error::Empty(format!("{}: no data rows", path.display())));
    }
    let shape = shape.unwrap_or(ImageShape::new(1, values, 1));
    if shape.pixels() != values {
        return Err(Error::Shape(format!(
            "{}: rows hold {values} values, shape {shape} needs {}",
            path.display(),
            shape.pixels()
        )));
    }
    ImageSet::new(shape, pixels, labels)
}

/// Write `label,p0,p1,...` rows with a header.
pub fn write_csv_images(path: impl AsRef<Path>, set: &ImageSet) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{other:?}")),
    })?;
    let mut header = vec!["label".to_string()];
    header.extend((0..set.shape().pixels()).map(|i| format!("p{i}")));
    w.write_record(&header)?;
    for i in 0..set.len() {
        let mut row = vec![set.labels()[i].to_string()];
        row.extend(set.image(i).iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let set = ImageSet::new(
            ImageShape::new(2, 2, 1),
            vec![0.0, 1.5, 2.0, 255.0, 3.0, 4.0, 5.0, 6.25],
            vec![4, 9],
        )
        .unwrap();
        write_csv_images(&path, &set).unwrap();
        let back = load_csv_images(&path, Some(ImageShape::new(2, 2, 1))).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn headerless_rows_use_first_column_as_label() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "1,0.5,0.25\n2,1,0\n").unwrap();
        let set = load_csv_images(&path, None).unwrap();
        assert_eq!(set.labels(), &[1, 2]);
        assert_eq!(set.shape(), ImageShape::new(1, 2, 1));
        assert_eq!(set.image(0), &[0.5, 0.25]);
    }

    #[test]
    fn label_column_found_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        std::fs::write(&path, "f0,f1,label\n0.1,0.2,3\n").unwrap();
        let set = load_csv_images(&path, None).unwrap();
        assert_eq!(set.labels(), &[3]);
        assert_eq!(set.image(0), &[0.1, 0.2]);
    }

    #[test]
    fn ragged_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "1,0.5,0.25\n2,1\n").unwrap();
        assert!(load_csv_images(&path, None).is_err());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "1,0.5,0.25\n").unwrap();
        assert!(matches!(
            load_csv_images(&path, Some(ImageShape::MNIST)),
            Err(Error::Shape(_))
        ));
    }
}
