//! Emergent self-organizing maps: online training on a (usually toroidal)
//! grid, U-matrix terrain, and projection of labelled objects.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::context::FormalContext;
use crate::corpus::{Document, InvertedIndex};
use crate::ontology::{EvalError, Ontology};

/// Paper-scale grid: 4100 units.
pub const EMERGENT_ROWS: usize = 50;
pub const EMERGENT_COLS: usize = 82;
/// Default desk-scale grid.
pub const DEFAULT_ROWS: usize = 20;
pub const DEFAULT_COLS: usize = 30;
pub const DEFAULT_EPOCHS: usize = 50;

pub const CHECKPOINT_FORMAT: &str = "esom-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum EsomError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: grid has {expected}, vector {object} has {found}")]
    Dimension { object: String, expected: usize, found: usize },
    #[error("vector {0} has a non-finite entry")]
    NonFinite(String),
    #[error("no training vectors")]
    NoVectors,
    #[error("{0} vectors but {1} labels")]
    LabelCount(usize, usize),
    #[error("attribute evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    #[default]
    Toroid,
    Planar,
}

impl std::str::FromStr for Topology {
    type Err = EsomError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "toroid" => Ok(Topology::Toroid),
            "planar" => Ok(Topology::Planar),
            _ => Err(EsomError::Config(format!("unknown topology {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub object_id: String,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(object_id: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            object_id: object_id.into(),
            values,
        }
    }
}

/// 0/1 vectors from the context rows.
pub fn vectors_from_context(ctx: &FormalContext) -> Vec<FeatureVector> {
    ctx.objects()
        .iter()
        .enumerate()
        .map(|(g, o)| {
            let values = (0..ctx.attribute_count())
                .map(|m| if ctx.incidence(g, m) { 1.0 } else { 0.0 })
                .collect();
            FeatureVector::new(o.id.clone(), values)
        })
        .collect()
}

/// Term-frequency vectors: for each attribute, how often its terms occur in
/// the document (compound and temporal attributes contribute 0/1).
pub fn vectors_from_term_frequencies<S: AsRef<str>>(
    documents: &[Document],
    attributes: &[S],
    ontology: &Ontology,
    index: &InvertedIndex,
) -> Result<Vec<FeatureVector>, EsomError> {
    documents
        .iter()
        .map(|d| {
            let values = attributes
                .iter()
                .map(|a| ontology.attribute_frequency(a.as_ref(), d, index).map(|n| n as f64))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(FeatureVector::new(d.id.clone(), values))
        })
        .collect()
}

/// Per-dimension (min, max) over the vectors.
pub fn data_bounds(vectors: &[FeatureVector]) -> Option<Vec<(f64, f64)>> {
    let first = vectors.first()?;
    let mut bounds: Vec<(f64, f64)> = first.values.iter().map(|&v| (v, v)).collect();
    for v in &vectors[1..] {
        for (b, &x) in bounds.iter_mut().zip(&v.values) {
            b.0 = b.0.min(x);
            b.1 = b.1.max(x);
        }
    }
    Some(bounds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSchedule {
    pub epochs: usize,
    pub rate_start: f64,
    pub rate_end: f64,
    pub radius_start: f64,
    pub radius_end: f64,
}

impl TrainingSchedule {
    /// Radius starts at half the longer grid side.
    pub fn for_grid(rows: usize, cols: usize, epochs: usize) -> Self {
        Self {
            epochs,
            rate_start: 0.5,
            rate_end: 0.01,
            radius_start: (rows.max(cols) as f64 / 2.0).max(1.0),
            radius_end: 0.5,
        }
    }

    pub fn validate(&self, rows: usize, cols: usize) -> Result<(), EsomError> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !(ok(self.rate_end) && self.rate_start >= self.rate_end && self.rate_start.is_finite()) {
            return Err(EsomError::Config("learning rate needs start >= end > 0".into()));
        }
        if !(ok(self.radius_end) && self.radius_start >= self.radius_end && self.radius_start.is_finite()) {
            return Err(EsomError::Config("radius needs start >= end > 0".into()));
        }
        if self.radius_start > rows.max(cols) as f64 {
            return Err(EsomError::Config(format!(
                "radius {} exceeds the longer grid side {}",
                self.radius_start,
                rows.max(cols)
            )));
        }
        Ok(())
    }

    /// Linear interpolation at `step` of `total` steps.
    fn at(&self, step: usize, total: usize) -> (f64, f64) {
        let f = if total <= 1 { 0.0 } else { step as f64 / (total - 1) as f64 };
        (
            self.rate_start + (self.rate_end - self.rate_start) * f,
            self.radius_start + (self.radius_end - self.radius_start) * f,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsomGrid {
    pub rows: usize,
    pub cols: usize,
    pub topology: Topology,
    pub dim: usize,
    /// Row-major, `dim` values per unit.
    weights: Vec<f64>,
    pub trained: bool,
    pub seed: u64,
    /// Schedules applied so far, in order.
    #[serde(default)]
    pub history: Vec<TrainingSchedule>,
}

/// Grid with weights drawn uniformly from [0, 1].
pub fn init_grid(rows: usize, cols: usize, topology: Topology, dim: usize, seed: u64) -> Result<EsomGrid, EsomError> {
    init_grid_within(rows, cols, topology, &vec![(0.0, 1.0); dim], seed)
}

/// Grid with weights drawn uniformly within per-dimension bounds.
pub fn init_grid_within(
    rows: usize,
    cols: usize,
    topology: Topology,
    bounds: &[(f64, f64)],
    seed: u64,
) -> Result<EsomGrid, EsomError> {
    if rows == 0 || cols == 0 || bounds.is_empty() {
        return Err(EsomError::Config(format!(
            "grid needs positive rows, cols and dimension (got {rows}x{cols}, dim {})",
            bounds.len()
        )));
    }
    if bounds.iter().any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
        return Err(EsomError::Config("bounds must be finite with lo <= hi".into()));
    }
    let dim = bounds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(rows * cols * dim);
    for _ in 0..rows * cols {
        for &(lo, hi) in bounds {
            let u: f64 = rng.random();
            weights.push(lo + (hi - lo) * u);
        }
    }
    Ok(EsomGrid {
        rows,
        cols,
        topology,
        dim,
        weights,
        trained: false,
        seed,
        history: Vec::new(),
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl EsomGrid {
    pub fn units(&self) -> usize {
        self.rows * self.cols
    }

    pub fn weight(&self, row: usize, col: usize) -> &[f64] {
        let u = row * self.cols + col;
        &self.weights[u * self.dim..(u + 1) * self.dim]
    }

    pub fn set_weight(&mut self, row: usize, col: usize, values: &[f64]) -> Result<(), EsomError> {
        self.check(&FeatureVector::new(format!("({row},{col})"), values.to_vec()))?;
        let u = row * self.cols + col;
        self.weights[u * self.dim..(u + 1) * self.dim].copy_from_slice(values);
        Ok(())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn check(&self, v: &FeatureVector) -> Result<(), EsomError> {
        if v.values.len() != self.dim {
            return Err(EsomError::Dimension {
                object: v.object_id.clone(),
                expected: self.dim,
                found: v.values.len(),
            });
        }
        if v.values.iter().any(|x| !x.is_finite()) {
            return Err(EsomError::NonFinite(v.object_id.clone()));
        }
        Ok(())
    }

    /// Grid offset along one axis, wrapped on a toroid.
    fn axis_offset(&self, a: usize, b: usize, len: usize) -> usize {
        let d = a.abs_diff(b);
        match self.topology {
            Topology::Toroid => d.min(len - d),
            Topology::Planar => d,
        }
    }

    /// Squared lattice distance between two units.
    pub fn grid_distance_sq(&self, a: (usize, usize), b: (usize, usize)) -> f64 {
        let dr = self.axis_offset(a.0, b.0, self.rows) as f64;
        let dc = self.axis_offset(a.1, b.1, self.cols) as f64;
        dr * dr + dc * dc
    }

    fn bmu_index(&self, v: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for u in 0..self.units() {
            let d = sq_dist(&self.weights[u * self.dim..(u + 1) * self.dim], v);
            if d < best_d {
                best_d = d;
                best = u;
            }
        }
        best
    }

    /// Distinct 4-neighbours other than the unit itself.
    pub fn neighbors(&self, row: usize, col: usize) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::with_capacity(4);
        let (r, c) = (row as isize, col as isize);
        for (dr, dc) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
            let (mut nr, mut nc) = (r + dr, c + dc);
            match self.topology {
                Topology::Toroid => {
                    nr = nr.rem_euclid(self.rows as isize);
                    nc = nc.rem_euclid(self.cols as isize);
                }
                Topology::Planar => {
                    if nr < 0 || nc < 0 || nr >= self.rows as isize || nc >= self.cols as isize {
                        continue;
                    }
                }
            }
            let n = (nr as usize, nc as usize);
            if n != (row, col) && !out.contains(&n) {
                out.push(n);
            }
        }
        out
    }
}

/// Unit with the smallest Euclidean distance; ties go to the first unit in
/// row-major order.
pub fn best_matching_unit(grid: &EsomGrid, v: &[f64]) -> Result<(usize, usize), EsomError> {
    grid.check(&FeatureVector::new("query", v.to_vec()))?;
    let u = grid.bmu_index(v);
    Ok((u / grid.cols, u % grid.cols))
}

/// Mean distance from each vector to its best-matching unit.
pub fn quantization_error(grid: &EsomGrid, vectors: &[FeatureVector]) -> Result<f64, EsomError> {
    if vectors.is_empty() {
        return Err(EsomError::NoVectors);
    }
    let mut total = 0.0;
    for v in vectors {
        grid.check(v)?;
        let u = grid.bmu_index(&v.values);
        total += sq_dist(&grid.weights[u * grid.dim..(u + 1) * grid.dim], &v.values).sqrt();
    }
    Ok(total / vectors.len() as f64)
}

pub fn train(grid: &EsomGrid, vectors: &[FeatureVector], schedule: &TrainingSchedule) -> Result<EsomGrid, EsomError> {
    Ok(train_with_trace(grid, vectors, schedule)?.0)
}

/// Online training. Returns the trained grid and the quantization error
/// before training followed by its value after each epoch.
pub fn train_with_trace(
    grid: &EsomGrid,
    vectors: &[FeatureVector],
    schedule: &TrainingSchedule,
) -> Result<(EsomGrid, Vec<f64>), EsomError> {
    if vectors.is_empty() {
        return Err(EsomError::NoVectors);
    }
    for v in vectors {
        grid.check(v)?;
    }
    schedule.validate(grid.rows, grid.cols)?;

    let mut out = grid.clone();
    let mut trace = vec![quantization_error(&out, vectors)?];
    if schedule.epochs == 0 {
        return Ok((out, trace));
    }

    // Separate stream from the one used for initialisation.
    let mut rng = ChaCha8Rng::seed_from_u64(grid.seed);
    rng.set_stream(1 + grid.history.len() as u64);
    let total = schedule.epochs * vectors.len();
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    let dim = out.dim;
    let mut step = 0;
    for _ in 0..schedule.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (rate, radius) = schedule.at(step, total);
            step += 1;
            let v = &vectors[i].values;
            let b = out.bmu_index(v);
            let bpos = (b / out.cols, b % out.cols);
            let two_sigma_sq = 2.0 * radius * radius;
            let cutoff = (3.0 * radius) * (3.0 * radius);
            for u in 0..out.units() {
                let d2 = out.grid_distance_sq(bpos, (u / out.cols, u % out.cols));
                if d2 > cutoff {
                    continue;
                }
                let h = rate * (-d2 / two_sigma_sq).exp();
                for (w, x) in out.weights[u * dim..(u + 1) * dim].iter_mut().zip(v) {
                    *w += h * (x - *w);
                }
            }
        }
        trace.push(quantization_error(&out, vectors)?);
    }
    out.trained = true;
    out.history.push(schedule.clone());
    Ok((out, trace))
}

/// Per unit: mean Euclidean distance to its distinct 4-neighbours.
pub fn compute_umatrix(grid: &EsomGrid) -> Vec<Vec<f64>> {
    (0..grid.rows)
        .map(|r| {
            (0..grid.cols)
                .map(|c| {
                    let ns = grid.neighbors(r, c);
                    if ns.is_empty() {
                        return 0.0;
                    }
                    let w = grid.weight(r, c);
                    ns.iter().map(|&(nr, nc)| sq_dist(w, grid.weight(nr, nc)).sqrt()).sum::<f64>() / ns.len() as f64
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapLabel {
    pub label: String,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Projection {
    pub object_id: String,
    pub row: usize,
    pub col: usize,
    pub label: String,
    pub url: String,
}

pub fn project(grid: &EsomGrid, vectors: &[FeatureVector], labels: &[MapLabel]) -> Result<Vec<Projection>, EsomError> {
    if vectors.len() != labels.len() {
        return Err(EsomError::LabelCount(vectors.len(), labels.len()));
    }
    vectors
        .iter()
        .zip(labels)
        .map(|(v, l)| {
            grid.check(v)?;
            let u = grid.bmu_index(&v.values);
            Ok(Projection {
                object_id: v.object_id.clone(),
                row: u / grid.cols,
                col: u % grid.cols,
                label: l.label.clone(),
                url: l.url.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapJson {
    pub format: String,
    pub version: u32,
    pub rows: usize,
    pub cols: usize,
    pub topology: Topology,
    pub umatrix: Vec<Vec<f64>>,
    pub labels: Vec<Projection>,
}

/// Map export consumed by the map view.
pub fn export_map(grid: &EsomGrid, projections: &[Projection]) -> String {
    let json = MapJson {
        format: "esom-map".into(),
        version: 1,
        rows: grid.rows,
        cols: grid.cols,
        topology: grid.topology,
        umatrix: compute_umatrix(grid),
        labels: projections.to_vec(),
    };
    let mut s = serde_json::to_string_pretty(&json).expect("map serializes");
    s.push('\n');
    s
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    grid: EsomGrid,
}

impl EsomGrid {
    pub fn to_checkpoint(&self) -> String {
        serde_json::to_string(&Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            grid: self.clone(),
        })
        .expect("grid serializes")
    }

    pub fn from_checkpoint(text: &str) -> Result<Self, EsomError> {
        let cp: Checkpoint = serde_json::from_str(text).map_err(|e| EsomError::Checkpoint(e.to_string()))?;
        if cp.format != CHECKPOINT_FORMAT || cp.version != CHECKPOINT_VERSION {
            return Err(EsomError::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                cp.format, cp.version
            )));
        }
        let g = cp.grid;
        if g.rows == 0 || g.cols == 0 || g.dim == 0 || g.weights.len() != g.rows * g.cols * g.dim {
            return Err(EsomError::Checkpoint("weight array does not match grid shape".into()));
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_seeded_and_validated() {
        let a = init_grid(4, 5, Topology::Toroid, 3, 7).unwrap();
        let b = init_grid(4, 5, Topology::Toroid, 3, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_grid(4, 5, Topology::Toroid, 3, 8).unwrap());
        assert!(a.weights().iter().all(|&w| (0.0..=1.0).contains(&w)));
        assert!(init_grid(0, 5, Topology::Toroid, 3, 7).is_err());
        assert!(init_grid(2, 5, Topology::Toroid, 0, 7).is_err());
        assert_eq!(init_grid(EMERGENT_ROWS, EMERGENT_COLS, Topology::Toroid, 2, 1).unwrap().units(), 4100);
    }

    #[test]
    fn bmu_exact_and_ties() {
        let mut g = init_grid(3, 4, Topology::Planar, 2, 1).unwrap();
        let w = g.weight(2, 3).to_vec();
        assert_eq!(best_matching_unit(&g, &w).unwrap(), (2, 3));

        let mut g2 = init_grid(2, 2, Topology::Planar, 1, 1).unwrap();
        g2.set_weight(0, 0, &[10.0]).unwrap();
        g2.set_weight(0, 1, &[1.0]).unwrap();
        g2.set_weight(1, 0, &[-1.0]).unwrap();
        g2.set_weight(1, 1, &[10.0]).unwrap();
        assert_eq!(best_matching_unit(&g2, &[0.0]).unwrap(), (0, 1));
        assert!(best_matching_unit(&g2, &[1e9]).is_ok());
        assert!(best_matching_unit(&g2, &[0.0, 1.0]).is_err());
        g.set_weight(0, 0, &[0.0, 0.0]).unwrap();
    }

    #[test]
    fn umatrix_cases() {
        let mut g = init_grid(1, 2, Topology::Planar, 2, 1).unwrap();
        g.set_weight(0, 0, &[0.0, 0.0]).unwrap();
        g.set_weight(0, 1, &[3.0, 4.0]).unwrap();
        assert_eq!(compute_umatrix(&g), vec![vec![5.0, 5.0]]);
        g.topology = Topology::Toroid;
        assert_eq!(compute_umatrix(&g), vec![vec![5.0, 5.0]]);

        let mut flat = init_grid(3, 3, Topology::Toroid, 2, 1).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                flat.set_weight(r, c, &[0.25, 0.5]).unwrap();
            }
        }
        assert!(compute_umatrix(&flat).iter().flatten().all(|&x| x == 0.0));
        assert_eq!(flat.neighbors(0, 0).len(), 4);
        flat.topology = Topology::Planar;
        assert_eq!(flat.neighbors(0, 0).len(), 2);
    }

    #[test]
    fn toroidal_distance_is_symmetric_and_bounded() {
        let g = init_grid(5, 8, Topology::Toroid, 1, 1).unwrap();
        for a in 0..40 {
            for b in 0..40 {
                let (pa, pb) = ((a / 8, a % 8), (b / 8, b % 8));
                assert_eq!(g.grid_distance_sq(pa, pb), g.grid_distance_sq(pb, pa));
                assert!(g.axis_offset(pa.0, pb.0, 5) <= 2 && g.axis_offset(pa.1, pb.1, 8) <= 4);
            }
        }
    }

    #[test]
    fn single_vector_fixpoint() {
        let g = init_grid(4, 4, Topology::Toroid, 3, 3).unwrap();
        let v = vec![FeatureVector::new("v", vec![0.2, 0.9, 0.4])];
        let s = TrainingSchedule {
            epochs: 200,
            rate_start: 0.5,
            rate_end: 0.1,
            radius_start: 2.0,
            radius_end: 0.5,
        };
        let t = train(&g, &v, &s).unwrap();
        let (r, c) = best_matching_unit(&t, &v[0].values).unwrap();
        assert!(sq_dist(t.weight(r, c), &v[0].values).sqrt() < 1e-3);
        assert!(t.trained);
    }

    #[test]
    fn zero_epochs_and_bad_input() {
        let g = init_grid(3, 3, Topology::Toroid, 2, 3).unwrap();
        let v = vec![FeatureVector::new("v", vec![0.2, 0.9])];
        let mut s = TrainingSchedule::for_grid(3, 3, 0);
        let t = train(&g, &v, &s).unwrap();
        assert_eq!(t.weights(), g.weights());
        s.epochs = 1;
        assert!(matches!(
            train(&g, &[FeatureVector::new("x", vec![1.0])], &s),
            Err(EsomError::Dimension { .. })
        ));
        assert!(matches!(
            train(&g, &[FeatureVector::new("x", vec![f64::NAN, 1.0])], &s),
            Err(EsomError::NonFinite(_))
        ));
        assert!(matches!(train(&g, &[], &s), Err(EsomError::NoVectors)));
        s.radius_start = 10.0;
        assert!(train(&g, &v, &s).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let g = init_grid(3, 2, Topology::Planar, 2, 9).unwrap();
        let v = vec![FeatureVector::new("v", vec![0.2, 0.9])];
        let t = train(&g, &v, &TrainingSchedule::for_grid(3, 2, 3)).unwrap();
        let back = EsomGrid::from_checkpoint(&t.to_checkpoint()).unwrap();
        assert_eq!(back, t);
        assert!(EsomGrid::from_checkpoint("{}").is_err());
    }

    #[test]
    fn projection_and_export() {
        let g = init_grid(3, 3, Topology::Toroid, 2, 4).unwrap();
        let w = g.weight(1, 2).to_vec();
        let vs = vec![FeatureVector::new("a", w.clone()), FeatureVector::new("b", w)];
        let labels = vec![
            MapLabel { label: "A".into(), url: "http://a".into() },
            MapLabel { label: "B".into(), url: "http://b".into() },
        ];
        let p = project(&g, &vs, &labels).unwrap();
        assert_eq!((p[0].row, p[0].col), (1, 2));
        assert_eq!((p[1].row, p[1].col), (1, 2));
        let json: serde_json::Value = serde_json::from_str(&export_map(&g, &p)).unwrap();
        assert_eq!(json["labels"][1]["url"], "http://b");
        assert_eq!(json["umatrix"].as_array().unwrap().len(), 3);
        assert!(project(&g, &vs, &labels[..1]).is_err());
    }
}
