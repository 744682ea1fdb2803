//! Dataset ingestion, standardization, splitting, K-Means clustering and
//! synthetic generators.

use std::path::Path;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::Instance;
use crate::error::{DissError, Result};

/// A labeled supervised dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub feature_names: Vec<String>,
    pub instances: Vec<Instance>,
}

impl Dataset {
    /// Builds a dataset after checking shape, finiteness and labels.
    pub fn new(name: impl Into<String>, feature_names: Vec<String>, instances: Vec<Instance>) -> Result<Self> {
        let d = feature_names.len();
        if d == 0 {
            return Err(DissError::config("dataset", "dimensionality must be at least 1"));
        }
        for (i, inst) in instances.iter().enumerate() {
            if inst.dim() != d {
                return Err(DissError::MalformedRow {
                    line: i as u64 + 1,
                    message: format!("expected {d} features, found {}", inst.dim()),
                });
            }
            if !inst.is_finite() {
                return Err(DissError::MalformedRow { line: i as u64 + 1, message: "non-finite feature".into() });
            }
            match inst.label {
                Some(0) | Some(1) => {}
                other => {
                    return Err(DissError::NonBinaryLabel { line: i as u64 + 1, value: format!("{other:?}") })
                }
            }
        }
        Ok(Dataset { name: name.into(), feature_names, instances })
    }

    /// Default feature names `x0 .. x{d-1}`.
    pub fn default_names(d: usize) -> Vec<String> {
        (0..d).map(|j| format!("x{j}")).collect()
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.instances[i].features
    }

    pub fn label(&self, i: usize) -> u8 {
        self.instances[i].label.expect("dataset instances are labeled")
    }

    pub fn labels(&self) -> Vec<u8> {
        (0..self.len()).map(|i| self.label(i)).collect()
    }

    /// Copy holding only the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            instances: rows.iter().map(|&i| self.instances[i].clone()).collect(),
        }
    }

    /// Seeded uniform row sample without replacement, keeping dataset order.
    pub fn subsample(&self, cap: usize, seed: u64) -> Dataset {
        if self.len() <= cap {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = index::sample(&mut rng, self.len(), cap).into_vec();
        rows.sort_unstable();
        self.select(&rows)
    }
}

/// How the label column is identified in a CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

fn parse_label(raw: &str, line: u64) -> Result<u8> {
    let t = raw.trim();
    let v: f64 = t.parse().map_err(|_| DissError::NonBinaryLabel { line, value: t.to_owned() })?;
    if v == 0.0 {
        Ok(0)
    } else if v == 1.0 {
        Ok(1)
    } else {
        Err(DissError::NonBinaryLabel { line, value: t.to_owned() })
    }
}

/// Reads a comma-separated file. Features keep column order minus the label column.
pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn, has_header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| DissError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(has_header).from_reader(file);

    let headers: Option<Vec<String>> = if has_header {
        let h = reader.headers().map_err(|e| DissError::MalformedRow { line: 1, message: e.to_string() })?;
        Some(h.iter().map(|s| s.trim().to_owned()).collect())
    } else {
        None
    };

    let label_idx = match (label, &headers) {
        (LabelColumn::Index(i), _) => *i,
        (LabelColumn::Name(name), Some(h)) => h
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| DissError::MissingLabelColumn(name.clone()))?,
        (LabelColumn::Name(name), None) => return Err(DissError::MissingLabelColumn(name.clone())),
    };

    let mut instances = Vec::new();
    let mut width = headers.as_ref().map(|h| h.len());
    for record in reader.records() {
        let record = record.map_err(|e| DissError::MalformedRow {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(DissError::MalformedRow { line, message: format!("expected {w} fields, found {}", record.len()) });
        }
        if label_idx >= w {
            return Err(DissError::MissingLabelColumn(label_idx.to_string()));
        }
        let mut features = Vec::with_capacity(w - 1);
        let mut y = 0;
        for (c, cell) in record.iter().enumerate() {
            if c == label_idx {
                y = parse_label(cell, line)?;
                continue;
            }
            let v: f64 = cell.trim().parse().map_err(|_| DissError::MalformedRow {
                line,
                message: format!("column {c}: cannot parse {cell:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(DissError::MalformedRow { line, message: format!("column {c}: non-finite value") });
            }
            features.push(v);
        }
        instances.push(Instance::new(features, Some(y)));
    }
    let w = width.ok_or(DissError::EmptyDataset)?;
    let feature_names = match headers {
        Some(h) => h.into_iter().enumerate().filter(|(c, _)| *c != label_idx).map(|(_, n)| n).collect(),
        None => Dataset::default_names(w - 1),
    };
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Dataset::new(name, feature_names, instances)
}

/// Per-feature affine transform (x − mean) / std, population std.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(ds: &Dataset) -> Self {
        let d = ds.dim();
        let n = ds.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for inst in &ds.instances {
            for (m, v) in mean.iter_mut().zip(&inst.features) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for inst in &ds.instances {
            for j in 0..d {
                let z = inst.features[j] - mean[j];
                var[j] += z * z;
            }
        }
        let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
        Standardizer { mean, std }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, &v)| if self.std[j] > 0.0 { (v - self.mean[j]) / self.std[j] } else { 0.0 })
            .collect()
    }

    pub fn apply(&self, ds: &Dataset) -> Dataset {
        Dataset {
            name: ds.name.clone(),
            feature_names: ds.feature_names.clone(),
            instances: ds
                .instances
                .iter()
                .map(|inst| Instance::new(self.transform(&inst.features), inst.label))
                .collect(),
        }
    }
}

/// Standardizes every column to mean 0 and unit population std; constant
/// columns map to zeros.
pub fn standardize(ds: &Dataset) -> (Dataset, Standardizer) {
    let t = Standardizer::fit(ds);
    (t.apply(ds), t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

/// Seeded random partition into (train, test). Both keep dataset order.
pub fn split(ds: &Dataset, spec: SplitSpec) -> (Dataset, Dataset) {
    let n = ds.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);
    let n_test = ((n as f64) * spec.test_fraction).round() as usize;
    let n_test = n_test.min(n);
    let (test, train) = order.split_at(n_test);
    let mut train = train.to_vec();
    let mut test = test.to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (ds.select(&train), ds.select(&test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Objective after each assignment step, then after the final centroid update.
    pub objective_history: Vec<f64>,
}

impl Clustering {
    pub fn nearest(&self, x: &[f64]) -> usize {
        nearest_centroid(&self.centroids, x).0
    }

    pub fn members(&self, c: usize) -> Vec<usize> {
        self.assignments.iter().enumerate().filter(|(_, &a)| a == c).map(|(i, _)| i).collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest_centroid(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, cen) in centroids.iter().enumerate() {
        let dist = sq_dist(cen, x);
        if dist < best.1 {
            best = (c, dist);
        }
    }
    best
}

fn objective(points: &[&[f64]], centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    points.iter().zip(assignments).map(|(p, &a)| sq_dist(p, &centroids[a])).sum()
}

fn kmeans_pp_init(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.random_range(0..n)
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        };
        centroids.push(points[next].to_vec());
        let c = centroids.last().unwrap();
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, c));
        }
    }
    centroids
}

/// Lloyd's algorithm with k-means++ seeding. Empty clusters take the point
/// farthest from its current centroid.
pub fn kmeans(ds: &Dataset, k: usize, seed: u64, max_iter: usize) -> Result<Clustering> {
    let points: Vec<&[f64]> = ds.instances.iter().map(|i| i.features.as_slice()).collect();
    kmeans_points(&points, k, seed, max_iter)
}

pub fn kmeans_points(points: &[&[f64]], k: usize, seed: u64, max_iter: usize) -> Result<Clustering> {
    let n = points.len();
    if k == 0 || n < k {
        return Err(DissError::config("k", format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    let d = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_pp_init(points, k, &mut rng);
    let mut assignments: Vec<usize> = vec![usize::MAX; n];
    let mut history = Vec::new();

    for _ in 0..max_iter.max(1) {
        let mut next: Vec<usize> = points.iter().map(|p| nearest_centroid(&centroids, p).0).collect();

        // repair empty clusters
        loop {
            let mut counts = vec![0usize; k];
            next.iter().for_each(|&a| counts[a] += 1);
            let Some(empty) = counts.iter().position(|&c| c == 0) else { break };
            let (far, _) = next
                .iter()
                .enumerate()
                .filter(|(_, &a)| counts[a] > 1)
                .map(|(i, &a)| (i, sq_dist(points[i], &centroids[a])))
                .fold((usize::MAX, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            next[far] = empty;
            centroids[empty] = points[far].to_vec();
        }

        history.push(objective(points, &centroids, &next));
        let changed = next != assignments;
        assignments = next;

        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p.iter()) {
                *s += v;
            }
        }
        for c in 0..k {
            for j in 0..d {
                centroids[c][j] = sums[c][j] / counts[c] as f64;
            }
        }
        if !changed {
            break;
        }
    }
    history.push(objective(points, &centroids, &assignments));
    Ok(Clustering { k, assignments, centroids, objective_history: history })
}

/// Two-class Gaussian data: features iid N(0,1); P(y=1|x) = σ(steepness · Σ_{j∈informative} x_j).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub informative: Vec<usize>,
    #[serde(default = "default_steepness")]
    pub steepness: f64,
}

fn default_steepness() -> f64 {
    2.0
}

impl SyntheticSpec {
    pub fn new(n: usize, d: usize, seed: u64, informative: Vec<usize>) -> Self {
        SyntheticSpec { n, d, seed, informative, steepness: default_steepness() }
    }

    /// True P(y = 1 | x) of the generator.
    pub fn prob_positive(&self, x: &[f64]) -> f64 {
        let z: f64 = self.informative.iter().map(|&j| x[j]).sum::<f64>() * self.steepness;
        1.0 / (1.0 + (-z).exp())
    }
}

pub fn make_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if let Some(&bad) = spec.informative.iter().find(|&&j| j >= spec.d) {
        return Err(DissError::config("informative", format!("feature {bad} out of range for d={}", spec.d)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let instances = (0..spec.n)
        .map(|_| {
            let x: Vec<f64> = (0..spec.d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let p = spec.prob_positive(&x);
            let y = u8::from(rng.random::<f64>() < p);
            Instance::new(x, Some(y))
        })
        .collect();
    Dataset::new(format!("synthetic_d{}_n{}", spec.d, spec.n), Dataset::default_names(spec.d), instances)
}

/// Well-separated clusters whose label rule flips between neighbours.
///
/// Cluster `c` is centred at `separation · c` along feature 0. Within a
/// cluster, y = [x₁ > 0] for even `c` and y = [x₁ < 0] for odd `c`, with
/// |x₁| ≥ `margin`. Remaining features are N(0,1) noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub n: usize,
    pub d: usize,
    pub clusters: usize,
    pub seed: u64,
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_separation() -> f64 {
    10.0
}

fn default_margin() -> f64 {
    1.0
}

impl MixtureSpec {
    pub fn new(n: usize, d: usize, clusters: usize, seed: u64) -> Self {
        MixtureSpec { n, d, clusters, seed, separation: default_separation(), margin: default_margin() }
    }
}

/// Returns the dataset and the generating cluster id of every row.
pub fn make_cluster_mixture(spec: &MixtureSpec) -> Result<(Dataset, Vec<usize>)> {
    if spec.d < 2 || spec.clusters == 0 {
        return Err(DissError::config("mixture", "need d >= 2 and at least one cluster"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut instances = Vec::with_capacity(spec.n);
    let mut ids = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let c = rng.random_range(0..spec.clusters);
        let mut x: Vec<f64> = (0..spec.d).map(|_| StandardNormal.sample(&mut rng)).collect();
        x[0] = x[0] * 0.5 + spec.separation * c as f64;
        let side = rng.random_bool(0.5);
        let mag: f64 = spec.margin + 0.25 * rng.random::<f64>();
        x[1] = if side { mag } else { -mag };
        let positive = if c % 2 == 0 { side } else { !side };
        instances.push(Instance::new(x, Some(u8::from(positive))));
        ids.push(c);
    }
    let ds = Dataset::new(format!("mixture_k{}_d{}", spec.clusters, spec.d), Dataset::default_names(spec.d), instances)?;
    Ok((ds, ids))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn ds_from(rows: &[&[f64]], labels: &[u8]) -> Dataset {
        let inst = rows.iter().zip(labels).map(|(r, &y)| Instance::new(r.to_vec(), Some(y))).collect();
        Dataset::new("t", Dataset::default_names(rows[0].len()), inst).unwrap()
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_shape() {
        let f = write_tmp("a,b,y\n1,2,0\n3,4,1\n5,6,1\n7,8,0\n");
        let ds = load_csv(f.path(), &LabelColumn::Index(2), true).unwrap();
        assert_eq!((ds.dim(), ds.len()), (2, 4));
        assert_eq!(ds.feature_names, vec!["a", "b"]);
        let ds = load_csv(f.path(), &LabelColumn::Name("y".into()), true).unwrap();
        assert_eq!(ds.labels(), vec![0, 1, 1, 0]);
    }

    #[test]
    fn csv_label_in_middle_without_header() {
        let f = write_tmp("1,0,2\n3,1,4\n");
        let ds = load_csv(f.path(), &LabelColumn::Index(1), false).unwrap();
        assert_eq!(ds.features(1), &[3.0, 4.0]);
        assert_eq!(ds.feature_names, vec!["x0", "x1"]);
    }

    #[test]
    fn csv_errors() {
        let f = write_tmp("a,b,y\n1,2,0\n3,4,2\n");
        assert!(matches!(
            load_csv(f.path(), &LabelColumn::Index(2), true),
            Err(DissError::NonBinaryLabel { line: 3, .. })
        ));
        let f = write_tmp("a,b,y\n1,2,0\n3,oops,1\n");
        assert!(matches!(
            load_csv(f.path(), &LabelColumn::Index(2), true),
            Err(DissError::MalformedRow { line: 3, .. })
        ));
        let f = write_tmp("a,b,y\n1,2,0\n3,1\n");
        assert!(matches!(load_csv(f.path(), &LabelColumn::Index(2), true), Err(DissError::MalformedRow { .. })));
        assert!(matches!(
            load_csv("/nonexistent/file.csv", &LabelColumn::Index(0), false),
            Err(DissError::Io { .. })
        ));
    }

    #[test]
    fn standardize_closed_form() {
        let ds = ds_from(&[&[1.0, 5.0], &[2.0, 5.0], &[3.0, 5.0]], &[0, 1, 0]);
        let (s, t) = standardize(&ds);
        let col: Vec<f64> = (0..3).map(|i| s.features(i)[0]).collect();
        let e = 1.224744871391589;
        for (a, b) in col.iter().zip([-e, 0.0, e]) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((0..3).all(|i| s.features(i)[1] == 0.0));
        assert_eq!(t.apply(&ds), s);
    }

    #[test]
    fn split_is_partition() {
        let ds = make_synthetic(&SyntheticSpec::new(101, 3, 1, vec![0])).unwrap();
        let (tr, te) = split(&ds, SplitSpec { test_fraction: 0.2, seed: 4 });
        assert_eq!(tr.len() + te.len(), 101);
        let mut all: Vec<_> = tr.instances.iter().chain(&te.instances).map(|i| i.features[0].to_bits()).collect();
        all.sort_unstable();
        let mut orig: Vec<_> = ds.instances.iter().map(|i| i.features[0].to_bits()).collect();
        orig.sort_unstable();
        assert_eq!(all, orig);
    }

    #[test]
    fn kmeans_single_cluster_is_mean() {
        let ds = ds_from(&[&[0.0, 0.0], &[2.0, 4.0], &[4.0, 2.0]], &[0, 1, 0]);
        let c = kmeans(&ds, 1, 0, 50).unwrap();
        assert!((c.centroids[0][0] - 2.0).abs() < 1e-12);
        assert!((c.centroids[0][1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn kmeans_separated_and_monotone() {
        let (ds, ids) = make_cluster_mixture(&MixtureSpec::new(300, 3, 2, 9)).unwrap();
        let c = kmeans(&ds, 2, 1, 100).unwrap();
        let agree = c.assignments.iter().zip(&ids).filter(|(a, b)| a == b).count();
        assert!(agree == 300 || agree == 0);
        assert!(c.objective_history.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn kmeans_repairs_empty_clusters() {
        // duplicated points make k-means++ pick coincident seeds
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![if i < 5 { 0.0 } else { 1.0 }]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let c = kmeans_points(&refs, 3, 0, 20).unwrap();
        for k in 0..3 {
            assert!(!c.members(k).is_empty());
        }
        assert!(kmeans_points(&refs, 7, 0, 20).is_err());
    }

    #[test]
    fn synthetic_determinism_and_range_check() {
        let s = SyntheticSpec::new(50, 4, 11, vec![0, 2]);
        assert_eq!(make_synthetic(&s).unwrap(), make_synthetic(&s).unwrap());
        assert!(make_synthetic(&SyntheticSpec::new(5, 2, 0, vec![2])).is_err());
    }

    #[test]
    fn subsample_caps_rows() {
        let ds = make_synthetic(&SyntheticSpec::new(100, 2, 1, vec![0])).unwrap();
        assert_eq!(ds.subsample(30, 5).len(), 30);
        assert_eq!(ds.subsample(30, 5), ds.subsample(30, 5));
        assert_eq!(ds.subsample(200, 5).len(), 100);
    }
}
