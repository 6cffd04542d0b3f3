//! Radial grids on the annulus `a <= r <= b` and the nodal fields that live on them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};

/// Node distribution of a [`RadialGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum GridKind {
    Uniform,
    /// Geometric stretching toward both endpoints. The spacing next to `a`
    /// and `b` is the interior spacing divided by `ratio`.
    BoundaryGraded {
        ratio: f64,
    },
}

/// Serializable description of a grid; [`GridSpec::build`] produces the nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub a: f64,
    pub b: f64,
    pub m: usize,
    pub kind: GridKind,
}

impl GridSpec {
    pub fn uniform(a: f64, b: f64, m: usize) -> Self {
        GridSpec {
            a,
            b,
            m,
            kind: GridKind::Uniform,
        }
    }

    pub fn build(&self) -> Result<Arc<RadialGrid>> {
        make_grid(self.a, self.b, self.m, self.kind).map(Arc::new)
    }
}

/// Node-centered grid on `[a, b]` with `r[0] = a` and `r[m-1] = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    spec: GridSpec,
    r: Vec<f64>,
}

/// Builds a grid. Rejects `a <= 0`, `b <= a` and `m < 3`.
pub fn make_grid(a: f64, b: f64, m: usize, kind: GridKind) -> Result<RadialGrid> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(KsError::InvalidGrid("non-finite radius".into()));
    }
    if a <= 0.0 {
        return Err(KsError::InvalidGrid(format!(
            "inner radius a = {a} must be > 0"
        )));
    }
    if b <= a {
        return Err(KsError::InvalidGrid(format!(
            "outer radius b = {b} must exceed a = {a}"
        )));
    }
    if m < 3 {
        return Err(KsError::InvalidGrid(format!(
            "node count m = {m} must be >= 3"
        )));
    }
    let intervals = m - 1;
    let r = match kind {
        GridKind::Uniform => {
            let h = (b - a) / intervals as f64;
            let mut r: Vec<f64> = (0..m).map(|i| a + i as f64 * h).collect();
            r[intervals] = b;
            r
        }
        GridKind::BoundaryGraded { ratio } => {
            if !(ratio.is_finite() && ratio >= 1.0) {
                return Err(KsError::InvalidGrid(format!(
                    "grading ratio {ratio} must be finite and >= 1"
                )));
            }
            let ramp = (intervals / 4).max(1);
            let growth = ratio.powf(1.0 / ramp as f64);
            let weights: Vec<f64> = (0..intervals)
                .map(|i| {
                    let from_end = i.min(intervals - 1 - i);
                    growth.powi(from_end as i32).min(ratio)
                })
                .collect();
            let total: f64 = weights.iter().sum();
            let mut r = Vec::with_capacity(m);
            let mut acc = 0.0;
            r.push(a);
            for w in &weights[..intervals - 1] {
                acc += w;
                r.push(a + (b - a) * acc / total);
            }
            r.push(b);
            r
        }
    };
    Ok(RadialGrid {
        spec: GridSpec { a, b, m, kind },
        r,
    })
}

impl RadialGrid {
    /// Rebuilds a grid from stored coordinates (used when loading persisted fields).
    pub fn from_coordinates(r: Vec<f64>, kind: GridKind) -> Result<Self> {
        let m = r.len();
        if m < 3 {
            return Err(KsError::InvalidGrid(format!(
                "node count m = {m} must be >= 3"
            )));
        }
        if r[0] <= 0.0 {
            return Err(KsError::InvalidGrid("inner radius must be > 0".into()));
        }
        if r.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(KsError::InvalidGrid(
                "coordinates not strictly increasing".into(),
            ));
        }
        let spec = GridSpec {
            a: r[0],
            b: r[m - 1],
            m,
            kind,
        };
        Ok(RadialGrid { spec, r })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn a(&self) -> f64 {
        self.spec.a
    }

    pub fn b(&self) -> f64 {
        self.spec.b
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.r
    }

    /// Spacings `r[i+1] - r[i]`, one per interval.
    pub fn spacings(&self) -> Vec<f64> {
        self.r.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacings().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacings().into_iter().fold(0.0, f64::max)
    }

    /// Control-volume widths: half-intervals at the ends, `(r[i+1]-r[i-1])/2` inside.
    /// These are the trapezoidal quadrature weights.
    pub fn cell_widths(&self) -> Vec<f64> {
        let m = self.r.len();
        (0..m)
            .map(|i| {
                let left = if i > 0 {
                    self.r[i] - self.r[i - 1]
                } else {
                    0.0
                };
                let right = if i + 1 < m {
                    self.r[i + 1] - self.r[i]
                } else {
                    0.0
                };
                0.5 * (left + right)
            })
            .collect()
    }

    /// Same nodes (bitwise) as `other`.
    pub fn same_nodes(&self, other: &RadialGrid) -> bool {
        self.r.len() == other.r.len()
            && self
                .r
                .iter()
                .zip(&other.r)
                .all(|(x, y)| x.to_bits() == y.to_bits())
    }
}

/// One real value per grid node.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(KsError::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(KsError::NonFinite { node });
        }
        Ok(ScalarField { grid, values })
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        ScalarField::new(grid, values)
    }

    pub fn constant(grid: Arc<RadialGrid>, value: f64) -> Result<Self> {
        let m = grid.len();
        ScalarField::new(grid, vec![value; m])
    }

    /// Internal constructor for operator outputs whose length is correct by construction.
    pub(crate) fn from_parts(grid: Arc<RadialGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Index and value of the smallest entry.
    pub fn argmin(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |best, (i, v)| if v < best.1 { (i, v) } else { best },
            )
    }

    pub fn same_grid(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_nodes(&other.grid)
    }

    pub fn ensure_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(KsError::GridMismatch)
        }
    }

    /// `self - other`, nodewise.
    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.ensure_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x - y)
            .collect();
        Ok(ScalarField::from_parts(self.grid.clone(), values))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField::from_parts(
            self.grid.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Combines two fields nodewise, passing the radius as well.
    pub fn zip_with(
        &self,
        other: &ScalarField,
        f: impl Fn(f64, f64, f64) -> f64,
    ) -> Result<ScalarField> {
        self.ensure_same_grid(other)?;
        let values = self
            .grid
            .nodes()
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(&r, (&x, &y))| f(r, x, y))
            .collect();
        Ok(ScalarField::from_parts(self.grid.clone(), values))
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_three_nodes() {
        let g = make_grid(1.0, 2.0, 3, GridKind::Uniform).unwrap();
        assert_eq!(g.nodes(), &[1.0, 1.5, 2.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(make_grid(1.0, 2.0, 2, GridKind::Uniform).is_err());
        assert!(make_grid(0.0, 2.0, 10, GridKind::Uniform).is_err());
        assert!(make_grid(-1.0, 2.0, 10, GridKind::Uniform).is_err());
        assert!(make_grid(2.0, 2.0, 10, GridKind::Uniform).is_err());
        assert!(make_grid(2.0, 1.0, 10, GridKind::Uniform).is_err());
        assert!(make_grid(1.0, 2.0, 10, GridKind::BoundaryGraded { ratio: 0.5 }).is_err());
    }

    #[test]
    fn graded_grid_spacing_ratio() {
        let g = make_grid(1.0, 3.0, 101, GridKind::BoundaryGraded { ratio: 4.0 }).unwrap();
        let h = g.spacings();
        assert_eq!(g.nodes()[0], 1.0);
        assert_eq!(*g.nodes().last().unwrap(), 3.0);
        assert!(h.iter().all(|&x| x > 0.0));
        let interior = h[h.len() / 2];
        // endpoint spacings are the smallest and a quarter of the interior one
        assert!((h[0] - interior / 4.0).abs() < 1e-12);
        assert!((h[h.len() - 1] - interior / 4.0).abs() < 1e-12);
        assert!((g.min_spacing() - interior / 4.0).abs() < 1e-12);
        assert!((g.max_spacing() - interior).abs() < 1e-12);
    }

    #[test]
    fn cell_widths_sum_to_length() {
        let g = make_grid(1.0, 3.0, 37, GridKind::BoundaryGraded { ratio: 3.0 }).unwrap();
        let s: f64 = g.cell_widths().iter().sum();
        assert!((s - 2.0).abs() < 1e-13);
    }

    #[test]
    fn field_rejects_wrong_length_and_nan() {
        let g = GridSpec::uniform(1.0, 2.0, 5).build().unwrap();
        assert!(ScalarField::new(g.clone(), vec![0.0; 4]).is_err());
        assert!(ScalarField::new(g, vec![0.0, 1.0, f64::NAN, 0.0, 0.0]).is_err());
    }
}
