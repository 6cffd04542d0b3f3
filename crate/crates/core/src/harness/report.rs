//! Re-rendering of stored reports.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::{read_json, write_csv_rows};

use super::lemma::LemmaReport;
use super::longtime::LongtimeReport;
use super::mms::{mms_rows, MmsReport};
use super::roundtrip::RoundtripReport;
use super::sweep::{write_dimension_outputs, LayerCampaign, SweepReport};
use super::CriterionOutcome;

/// Any `report.json` written by the harness.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StoredReport {
    Layer(Box<LayerCampaign>),
    Sweep(Box<SweepReport>),
    Longtime(Box<LongtimeReport>),
    Roundtrip(Box<RoundtripReport>),
    Mms(Box<MmsReport>),
    Lemma(Box<LemmaReport>),
}

impl StoredReport {
    pub fn criteria(&self) -> &[CriterionOutcome] {
        match self {
            StoredReport::Layer(r) => &r.criteria,
            StoredReport::Sweep(r) => &r.criteria,
            StoredReport::Longtime(r) => &r.criteria,
            StoredReport::Roundtrip(r) => &r.criteria,
            StoredReport::Mms(r) => &r.criteria,
            StoredReport::Lemma(r) => &r.criteria,
        }
    }
}

pub fn load_report(dir: &Path) -> Result<StoredReport> {
    read_json(&dir.join("report.json"))
}

fn render_sweep(dir: &Path, report: &SweepReport) -> Result<()> {
    for d in &report.dims {
        write_dimension_outputs(&dir.join(format!("n{}", d.n)), d, &[], &[], &[])?;
    }
    Ok(())
}

/// Rewrites the CSV tables and plot data derivable from `dir/report.json`
/// and returns the stored criteria.
pub fn render(dir: &Path) -> Result<StoredReport> {
    let report = load_report(dir)?;
    match &report {
        StoredReport::Sweep(r) => render_sweep(dir, r)?,
        StoredReport::Layer(r) => {
            render_sweep(&dir.join("matched"), &r.matched)?;
            render_sweep(&dir.join("mismatch"), &r.mismatch)?;
        }
        StoredReport::Mms(r) => write_csv_rows(&dir.join("mms.csv"), &mms_rows(&r.studies))?,
        StoredReport::Longtime(_) | StoredReport::Roundtrip(_) | StoredReport::Lemma(_) => {}
    }
    Ok(report)
}
