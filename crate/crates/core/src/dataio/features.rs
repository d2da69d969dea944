use std::path::Path;

use ndarray::Array2;

use super::matrix::format_f64;
use crate::cohort::{Diagnosis, LabeledCohort};
use crate::connectome::Measure;
use crate::error::{Error, Result};

/// File names of a feature store directory, ordered as [`Measure::SINGLE`].
pub const FEATURE_FILES: [&str; 3] = ["weights.csv", "shortest_path.csv", "communicability.csv"];

/// One CSV per measure with header `subject_id,label,f0,f1,...`.
pub fn write_feature_store(dir: &Path, cohort: &LabeledCohort) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (measure, file) in Measure::SINGLE.into_iter().zip(FEATURE_FILES) {
        let x = cohort.feature_view(measure).expect("single measure");
        let mut w = csv::Writer::from_path(dir.join(file))?;
        let mut header = vec!["subject_id".to_string(), "label".to_string()];
        header.extend((0..x.ncols()).map(|j| format!("f{j}")));
        w.write_record(&header)?;
        for (i, row) in x.rows().into_iter().enumerate() {
            let mut rec = vec![
                cohort.subject_ids()[i].clone(),
                cohort.labels()[i].to_string(),
            ];
            rec.extend(row.iter().map(|&v| format_f64(v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn load_feature_store(dir: &Path) -> Result<LabeledCohort> {
    let mut ids: Option<Vec<String>> = None;
    let mut labels: Vec<Diagnosis> = Vec::new();
    let mut features: Vec<Array2<f64>> = Vec::with_capacity(3);
    for file in FEATURE_FILES {
        let path = dir.join(file);
        if !path.is_file() {
            return Err(Error::FileNotFound {
                path,
                subject: "-".into(),
            });
        }
        let mut reader = csv::Reader::from_path(&path)?;
        let dim = reader.headers()?.len().saturating_sub(2);
        let mut these_ids = Vec::new();
        let mut these_labels = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let parse_error = |message: String| Error::Parse {
                path: path.clone(),
                line,
                message,
            };
            if rec.len() != dim + 2 {
                return Err(parse_error(format!(
                    "expected {} fields, found {}",
                    dim + 2,
                    rec.len()
                )));
            }
            these_ids.push(rec[0].to_string());
            these_labels.push(rec[1].parse::<Diagnosis>()?);
            for field in rec.iter().skip(2) {
                values.push(
                    field
                        .parse::<f64>()
                        .map_err(|_| parse_error(format!("not a number: {field:?}")))?,
                );
            }
        }
        match &ids {
            None => {
                ids = Some(these_ids.clone());
                labels = these_labels;
            }
            Some(prev) if *prev != these_ids || labels != these_labels => {
                return Err(Error::Parse {
                    path,
                    line: 0,
                    message: "subjects or labels differ from the other measures".into(),
                })
            }
            _ => {}
        }
        let n = these_ids.len();
        features.push(Array2::from_shape_vec((n, dim), values).expect("row lengths checked"));
    }
    let features: [Array2<f64>; 3] = features.try_into().expect("three measures");
    LabeledCohort::new(ids.unwrap_or_default(), labels, features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn feature_store_round_trip() {
        let cohort = LabeledCohort::new(
            vec!["a".into(), "b".into()],
            vec![Diagnosis::Hc, Diagnosis::Mci],
            [
                array![[0.1, 0.2], [0.3, 0.4]],
                array![[1.0 / 3.0, 2.0], [3.0, 4.0]],
                array![[5.0, 6.0], [7.0, 8e-200]],
            ],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_feature_store(dir.path(), &cohort).unwrap();
        assert_eq!(load_feature_store(dir.path()).unwrap(), cohort);
    }
}
