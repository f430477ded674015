//! On-disk formats. Every file is TOML; complex numbers are `[re, im]` pairs
//! and floats carry 17 significant digits so that values round-trip exactly.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sfot::eval::{Hyper, Method};
use sfot::simulate::{GroundTruth, MeasurementSet, ScenarioConfig};
use sfot::{CoefficientVector, PlaneWaveDictionary};
use toml_edit::visit_mut::{visit_value_mut, VisitMut};
use toml_edit::{Item, Table, Value};

use crate::error::{CliError, CliResult};

/// Serializable form of a plane-wave dictionary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionaryRecord {
    pub frequency_hz: f64,
    pub speed_of_sound_mps: f64,
    pub directions_rad: Vec<f64>,
}

impl From<&PlaneWaveDictionary<f64>> for DictionaryRecord {
    fn from(d: &PlaneWaveDictionary<f64>) -> Self {
        Self {
            frequency_hz: d.frequency_hz(),
            speed_of_sound_mps: d.speed_of_sound_mps(),
            directions_rad: d.directions().to_vec(),
        }
    }
}

impl DictionaryRecord {
    pub fn build(&self) -> CliResult<PlaneWaveDictionary<f64>> {
        PlaneWaveDictionary::new(
            self.frequency_hz,
            self.speed_of_sound_mps,
            self.directions_rad.clone(),
        )
        .map_err(|e| CliError::Config(format!("dictionary: {e}")))
    }
}

/// Written by `simulate`: everything needed to score an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub config: ScenarioConfig,
    pub dictionary: DictionaryRecord,
    pub truth: GroundTruth,
}

/// Written by `simulate`, read by `estimate` and `cv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementsFile {
    pub dictionary: DictionaryRecord,
    pub measurements: MeasurementSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateFile {
    pub method: Method,
    pub hyper: Hyper,
    /// `K` for the transport estimator.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_grid: Option<usize>,
    pub dictionary: DictionaryRecord,
    pub coefficients: CoefficientVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvCandidate {
    pub hyper: Hyper,
    /// Mean held-out squared prediction error.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvFile {
    pub method: Method,
    pub folds: usize,
    pub best: Hyper,
    pub candidates: Vec<CvCandidate>,
}

/// Rewrites every float with `{:.16e}`.
struct SeventeenDigits;

impl VisitMut for SeventeenDigits {
    fn visit_value_mut(&mut self, node: &mut Value) {
        if let Value::Float(f) = node {
            let x = *f.value();
            let text = if x.is_nan() {
                "nan".to_string()
            } else {
                format!("{x:.16e}")
            };
            let mut v: Value = text.parse().expect("formatted float is valid TOML");
            *v.decor_mut() = f.decor().clone();
            *node = v;
        }
        visit_value_mut(self, node);
    }
}

/// Turns nested inline tables into `[section]` tables.
fn expand_tables(table: &mut Table) {
    for (_, item) in table.iter_mut() {
        if item.is_inline_table() {
            let t = std::mem::take(item)
                .into_table()
                .expect("checked inline table");
            *item = Item::Table(t);
        }
        if let Some(t) = item.as_table_mut() {
            expand_tables(t);
        }
    }
}

pub fn to_toml_string<T: Serialize>(value: &T) -> CliResult<String> {
    let mut doc =
        toml_edit::ser::to_document(value).map_err(|e| CliError::Io(format!("serialize: {e}")))?;
    SeventeenDigits.visit_document_mut(&mut doc);
    expand_tables(doc.as_table_mut());
    Ok(doc.to_string())
}

pub fn from_toml_str<T: DeserializeOwned>(text: &str, origin: &str) -> CliResult<T> {
    toml_edit::de::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = to_toml_string(value)?;
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Missing or unreadable files are IO errors; malformed contents are config errors.
pub fn read_toml<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    from_toml_str(&text, &path.display().to_string())
}
