//! Load-and-fit once: the accrual model and activation profiles that every
//! forecast against a given history shares.

use std::path::PathBuf;

use serde::Serialize;

use crate::accrual::{fit_accrual_with, FitOptions};
use crate::activation::{estimate_profiles_with, ProfileOptions};
use crate::data_io::{load_activation_records, load_historical_studies};
use crate::domain::{AccrualModel, ActivationRecord, CountryActivationProfile, HistoricalStudy};
use crate::error::Result;

/// Locations of the three history tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistoryPaths {
    pub studies: PathBuf,
    pub site_groups: PathBuf,
    pub activations: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedHistory {
    accrual_model: AccrualModel,
    profiles: Vec<CountryActivationProfile>,
}

impl FittedHistory {
    pub fn fit(
        studies: &[HistoricalStudy],
        records: &[ActivationRecord],
        fit: FitOptions,
        profile: &ProfileOptions,
    ) -> Result<Self> {
        Ok(Self {
            accrual_model: fit_accrual_with(studies, fit)?,
            profiles: estimate_profiles_with(records, profile)?,
        })
    }

    pub fn load(paths: &HistoryPaths, fit: FitOptions, profile: &ProfileOptions) -> Result<Self> {
        let studies = load_historical_studies(&paths.studies, &paths.site_groups)?;
        let records = load_activation_records(&paths.activations)?;
        log::info!(
            "loaded {} studies and {} activation records",
            studies.len(),
            records.len()
        );
        Self::fit(&studies, &records, fit, profile)
    }

    pub fn model(&self) -> &AccrualModel {
        &self.accrual_model
    }

    /// Sorted by country.
    pub fn profiles(&self) -> &[CountryActivationProfile] {
        &self.profiles
    }
}
