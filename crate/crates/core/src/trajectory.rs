//! Time-sampled solver output and its on-disk format.
//!
//! A trajectory directory holds one `sample_NNNNN.csv` per saved instant with
//! columns `r,u,v` (or `r,u,c`) and a `manifest.json` carrying the parameters,
//! step controls, sample times and diagnostics. Floats are written in shortest
//! round-trip form, so coordinates and values reload bit-exactly.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};
use crate::grid::{GridKind, RadialGrid, ScalarField};
use crate::io::{atomic_write, read_json, write_json};
use crate::model::ModelParams;
use crate::solver::StepControls;

/// Which system produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveKind {
    /// Transformed `(u, v)` system with `eps > 0`.
    Transformed,
    /// Transformed system at `eps = 0`; no boundary condition on `v`.
    Limit,
    /// Original `(u, c)` chemotaxis system.
    Original,
}

impl std::str::FromStr for SolveKind {
    type Err = KsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transformed" => Ok(SolveKind::Transformed),
            "limit" => Ok(SolveKind::Limit),
            "original" => Ok(SolveKind::Original),
            other => Err(KsError::Config(format!("unknown solve kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariableSet {
    Transformed,
    Original,
}

impl SolveKind {
    pub fn variable_set(self) -> VariableSet {
        match self {
            SolveKind::Transformed | SolveKind::Limit => VariableSet::Transformed,
            SolveKind::Original => VariableSet::Original,
        }
    }

    fn second_name(self) -> &'static str {
        match self.variable_set() {
            VariableSet::Transformed => "v",
            VariableSet::Original => "c",
        }
    }
}

/// Solution at one instant: the density `u` and either `v` or `c`.
#[derive(Debug, Clone)]
pub struct State {
    pub u: ScalarField,
    pub second: ScalarField,
}

/// Per-step diagnostics recorded by the solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub t: f64,
    pub min_u: f64,
    pub min_c: Option<f64>,
    pub cfl: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub steps: usize,
    pub min_u: f64,
    pub min_c: Option<f64>,
    pub max_cfl: f64,
    pub all_finite: bool,
}

impl DiagnosticsSummary {
    pub fn from_steps(steps: &[StepDiagnostics]) -> Self {
        let min_u = steps.iter().map(|d| d.min_u).fold(f64::INFINITY, f64::min);
        let min_c = steps.iter().filter_map(|d| d.min_c).reduce(f64::min);
        let max_cfl = steps.iter().map(|d| d.cfl).fold(0.0, f64::max);
        let all_finite = steps.iter().all(|d| {
            d.min_u.is_finite() && d.cfl.is_finite() && d.min_c.is_none_or(f64::is_finite)
        });
        DiagnosticsSummary {
            steps: steps.len(),
            min_u,
            min_c,
            max_cfl,
            all_finite,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: ModelParams,
    pub controls: StepControls,
    pub kind: SolveKind,
    pub grid: Arc<RadialGrid>,
    pub times: Vec<f64>,
    pub states: Vec<State>,
    /// Full per-step record; empty for trajectories loaded from disk.
    pub diagnostics: Vec<StepDiagnostics>,
    pub summary: DiagnosticsSummary,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    kind: SolveKind,
    variable_set: VariableSet,
    params: ModelParams,
    controls: StepControls,
    grid_kind: GridKind,
    times: Vec<f64>,
    files: Vec<String>,
    summary: DiagnosticsSummary,
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleRow {
    r: f64,
    u: f64,
    #[serde(alias = "v", alias = "c")]
    second: f64,
}

impl Trajectory {
    pub fn variable_set(&self) -> VariableSet {
        self.kind.variable_set()
    }

    pub fn final_state(&self) -> &State {
        self.states
            .last()
            .expect("trajectory holds at least the initial state")
    }

    /// Checks the structural invariants: first time 0, strictly increasing
    /// times, one state per time, every field on the trajectory grid.
    pub fn validate(&self) -> Result<()> {
        if self.times.is_empty() || self.times[0] != 0.0 {
            return Err(KsError::SamplingMismatch(
                "first sample time must be 0".into(),
            ));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(KsError::SamplingMismatch(
                "sample times not increasing".into(),
            ));
        }
        if self.times.len() != self.states.len() {
            return Err(KsError::SamplingMismatch(format!(
                "{} times but {} states",
                self.times.len(),
                self.states.len()
            )));
        }
        for s in &self.states {
            if !(s.u.grid().same_nodes(&self.grid) && s.second.grid().same_nodes(&self.grid)) {
                return Err(KsError::GridMismatch);
            }
        }
        Ok(())
    }

    /// Same grid and same sample times (bitwise) as `other`.
    pub fn ensure_same_sampling(&self, other: &Trajectory) -> Result<()> {
        if !self.grid.same_nodes(&other.grid) {
            return Err(KsError::SamplingMismatch("grids differ".into()));
        }
        if self.times.len() != other.times.len()
            || self
                .times
                .iter()
                .zip(&other.times)
                .any(|(x, y)| x.to_bits() != y.to_bits())
        {
            return Err(KsError::SamplingMismatch("sample times differ".into()));
        }
        Ok(())
    }

    /// Writes the trajectory directory (created if missing).
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| KsError::io(dir, e))?;
        let name = self.kind.second_name();
        let mut files = Vec::with_capacity(self.states.len());
        for (idx, state) in self.states.iter().enumerate() {
            let file = format!("sample_{idx:05}.csv");
            let mut wtr = csv::Writer::from_writer(Vec::new());
            wtr.write_record(["r", "u", name])?;
            for ((r, u), s) in self
                .grid
                .nodes()
                .iter()
                .zip(state.u.values())
                .zip(state.second.values())
            {
                wtr.serialize((r, u, s))?;
            }
            let bytes = wtr
                .into_inner()
                .map_err(|e| KsError::io(dir.join(&file), e.into_error()))?;
            atomic_write(&dir.join(&file), &bytes)?;
            files.push(file);
        }
        let manifest = Manifest {
            kind: self.kind,
            variable_set: self.variable_set(),
            params: self.params,
            controls: self.controls,
            grid_kind: self.grid.spec().kind,
            times: self.times.clone(),
            files,
            summary: self.summary,
        };
        write_json(&dir.join("manifest.json"), &manifest)
    }

    pub fn read_dir(dir: &Path) -> Result<Trajectory> {
        let manifest: Manifest = read_json(&dir.join("manifest.json"))?;
        let mut grid: Option<Arc<RadialGrid>> = None;
        let mut states = Vec::with_capacity(manifest.files.len());
        for file in &manifest.files {
            let path = dir.join(file);
            let mut rdr = csv::Reader::from_path(&path)?;
            let rows: Vec<SampleRow> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
            let r: Vec<f64> = rows.iter().map(|row| row.r).collect();
            let g = match &grid {
                Some(g) if g.nodes() == r.as_slice() => g.clone(),
                Some(_) => return Err(KsError::GridMismatch),
                None => {
                    let g = Arc::new(RadialGrid::from_coordinates(r, manifest.grid_kind)?);
                    grid = Some(g.clone());
                    g
                }
            };
            let u = ScalarField::new(g.clone(), rows.iter().map(|row| row.u).collect())?;
            let second = ScalarField::new(g, rows.iter().map(|row| row.second).collect())?;
            states.push(State { u, second });
        }
        let grid = grid.ok_or_else(|| KsError::SamplingMismatch("no samples".into()))?;
        let traj = Trajectory {
            params: manifest.params,
            controls: manifest.controls,
            kind: manifest.kind,
            grid,
            times: manifest.times,
            states,
            diagnostics: Vec::new(),
            summary: manifest.summary,
        };
        traj.validate()?;
        Ok(traj)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct FieldSidecar {
    params: ModelParams,
    grid_kind: GridKind,
    name: String,
}

/// Writes a single field as `r,value` CSV plus a `.json` sidecar with the parameters.
pub fn write_field(
    path: &Path,
    name: &str,
    field: &ScalarField,
    params: &ModelParams,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["r", "value"])?;
    for (r, v) in field.grid().nodes().iter().zip(field.values()) {
        wtr.serialize((r, v))?;
    }
    let bytes = wtr
        .into_inner()
        .map_err(|e| KsError::io(path, e.into_error()))?;
    atomic_write(path, &bytes)?;
    let sidecar = FieldSidecar {
        params: *params,
        grid_kind: field.grid().spec().kind,
        name: name.to_string(),
    };
    write_json(&path.with_extension("json"), &sidecar)
}

/// Reads a field written by [`write_field`], returning it with its parameters.
pub fn read_field(path: &Path) -> Result<(ScalarField, ModelParams)> {
    let sidecar: FieldSidecar = read_json(&path.with_extension("json"))?;
    let mut rdr = csv::Reader::from_path(path)?;
    let mut r = Vec::new();
    let mut values = Vec::new();
    for row in rdr.deserialize() {
        let (ri, vi): (f64, f64) = row?;
        r.push(ri);
        values.push(vi);
    }
    let grid = Arc::new(RadialGrid::from_coordinates(r, sidecar.grid_kind)?);
    Ok((ScalarField::new(grid, values)?, sidecar.params))
}
