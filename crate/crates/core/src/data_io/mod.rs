//! File formats: CSV inputs, JSON documents and the synthetic generator.

mod csv_files;
pub mod synthetic;

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub use csv_files::{
    load_activation_records, load_historical_studies, load_predictions, write_activation_records,
    write_historical_studies, write_predictions, PredictionRecord,
};
pub use synthetic::{
    draw_trial_schedule, generate_synthetic_history, SyntheticConfig, SyntheticCountry, SyntheticHistory,
    SyntheticTruth,
};

/// Pretty JSON with object keys sorted, terminated by a newline.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json::Value keeps objects in a BTreeMap, which sorts the keys.
    let value = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&value)?;
    s.push('\n');
    Ok(s)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    fs::write(path, to_sorted_json(value)?).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a generated history as `studies.csv`, `study_site_groups.csv`,
/// `activations.csv` and `truth.json` under `dir`.
pub fn write_synthetic_history(history: &SyntheticHistory, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_historical_studies(
        &history.studies,
        &dir.join("studies.csv"),
        &dir.join("study_site_groups.csv"),
    )?;
    write_activation_records(&history.records, &dir.join("activations.csv"))?;
    write_json(&history.truth, &dir.join("truth.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_keys() {
        #[derive(Serialize)]
        struct T {
            zeta: u8,
            alpha: u8,
        }
        let s = to_sorted_json(&T { zeta: 1, alpha: 2 }).unwrap();
        assert!(s.find("alpha").unwrap() < s.find("zeta").unwrap());
        assert!(s.ends_with("}\n"));
    }
}
