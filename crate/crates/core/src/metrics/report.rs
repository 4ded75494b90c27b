use serde::{Deserialize, Serialize};

use super::{
    controlled_synthesis_report, diversity_score, edit_consistency_report, id_score, Diversity, EditReport, MeanStd,
    Pair, StdReport, DIVERSITY_CENTERS,
};
use crate::control::DEFAULT_BETA;
use crate::error::{Error, Result};
use crate::personalize::PersonalizedModel;
use crate::scalar::Scalar;
use crate::toyface::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub std_samples: usize,
    pub id_samples: usize,
    pub diversity_samples: usize,
    pub beta: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            std_samples: 100,
            id_samples: 100,
            diversity_samples: 1000,
            beta: DEFAULT_BETA,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProvenance {
    pub digest: String,
    pub config_hash: String,
    pub anchor_count: usize,
}

impl ModelProvenance {
    fn of<T: Scalar>(model: &PersonalizedModel<T>) -> Result<Self> {
        Ok(Self {
            digest: model.digest(),
            config_hash: model.provenance.config_hash.clone(),
            anchor_count: model.provenance.anchor_count,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub provenance: Pair<ModelProvenance>,
    pub controlled_synthesis: StdReport,
    pub edit_consistency: EditReport,
    pub id: Pair<MeanStd>,
    pub diversity: Pair<Diversity>,
}

/// Runs every protocol on `ours` against `baseline`. The first ten training
/// images serve as diversity cluster centers.
pub fn evaluate<T: Scalar>(
    ours: &PersonalizedModel<T>,
    baseline: &PersonalizedModel<T>,
    training: &Dataset,
    config: &EvalConfig,
) -> Result<EvalReport> {
    if training.len() < DIVERSITY_CENTERS {
        return Err(Error::Metric(format!(
            "evaluation needs at least {DIVERSITY_CENTERS} training images, got {}",
            training.len()
        )));
    }
    let centers = training.subset(DIVERSITY_CENTERS);
    let EvalConfig { beta, seed, .. } = *config;
    Ok(EvalReport {
        config: config.clone(),
        provenance: Pair {
            ours: ModelProvenance::of(ours)?,
            baseline: ModelProvenance::of(baseline)?,
        },
        controlled_synthesis: controlled_synthesis_report(ours, baseline, config.std_samples, beta, seed)?,
        edit_consistency: edit_consistency_report(ours, baseline, training, beta, seed)?,
        id: Pair {
            ours: id_score(ours, training, config.id_samples, beta, seed)?,
            baseline: id_score(baseline, training, config.id_samples, beta, seed)?,
        },
        diversity: Pair {
            ours: diversity_score(ours, &centers, config.diversity_samples, beta, seed)?,
            baseline: diversity_score(baseline, &centers, config.diversity_samples, beta, seed)?,
        },
    })
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Controlled-synthesis table, one row per attribute and method with
    /// one column per fixed value.
    pub fn synthesis_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["attribute".to_string(), "method".to_string()];
        header.extend(super::FIXED_VALUES.iter().map(|v| v.to_string()));
        w.write_record(&header).map_err(csv_err)?;
        let cells = &self.controlled_synthesis.cells;
        let mut names: Vec<&str> = Vec::new();
        for c in cells {
            if !names.contains(&c.attribute.as_str()) {
                names.push(&c.attribute);
            }
        }
        for name in names {
            for (method, pick) in [("baseline", false), ("ours", true)] {
                let mut row = vec![name.to_string(), method.to_string()];
                row.extend(
                    cells
                        .iter()
                        .filter(|c| c.attribute == name)
                        .map(|c| format!("{:.6}", if pick { c.std.ours } else { c.std.baseline })),
                );
                w.write_record(&row).map_err(csv_err)?;
            }
        }
        finish(w)
    }

    /// Edit table, one row per edited attribute and method. The edited
    /// attribute's own column holds its consistency std.
    pub fn edit_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let names: Vec<&str> = self
            .edit_consistency
            .rows
            .iter()
            .map(|r| r.attribute.as_str())
            .collect();
        let mut header = vec!["edited", "method"];
        header.extend(&names);
        header.extend(["monotone_fraction", "id_mean", "id_std"]);
        w.write_record(&header).map_err(csv_err)?;
        for row in &self.edit_consistency.rows {
            for (method, s) in [("baseline", &row.stats.baseline), ("ours", &row.stats.ours)] {
                let mut rec = vec![row.attribute.clone(), method.to_string()];
                rec.extend(
                    s.unedited_std
                        .iter()
                        .map(|v| format!("{:.6}", v.unwrap_or(s.edited_std))),
                );
                rec.push(format!("{:.6}", s.monotone_fraction));
                rec.push(format!("{:.6}", s.id.mean));
                rec.push(format!("{:.6}", s.id.std));
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
        finish(w)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Format(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}
