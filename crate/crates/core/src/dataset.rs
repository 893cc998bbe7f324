//! Node-classification datasets: LINQS `.content`/`.cites` ingestion, train/
//! validation/test split construction, node downsampling and a binary cache.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{GlnnError, Result};
use crate::gcn::{read_matrix, read_u64};
use crate::graph::{preprocess_ground_truth, GroundTruthGraph};
use crate::matrix::{Matrix, Rng};

/// Leading bytes of a dataset cache file.
pub const CACHE_MAGIC: &[u8; 8] = b"GLNNDATA";

/// Counts gathered while loading.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// Citation lines naming a node absent from the content file.
    pub dropped_edges: usize,
    pub self_loops: usize,
    /// Undirected edges after deduplication.
    pub edges: usize,
    pub zero_feature_rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    /// Node features, `N x C`.
    pub x: Matrix,
    /// One-hot labels, `N x F`.
    pub y: Matrix,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub node_ids: Vec<String>,
    pub gt: Option<GroundTruthGraph>,
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub report: LoadReport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitKind {
    /// `per_class` training nodes of every class, then `val` validation nodes
    /// and `test` test nodes from the far end of a seeded node order.
    Planetoid {
        per_class: usize,
        val: usize,
        test: usize,
    },
    /// Seeded random disjoint draws of the given sizes.
    Counts {
        train: usize,
        val: usize,
        test: usize,
    },
    /// A fixed test set (and validation set) drawn first, then
    /// `ceil(rate * N)` stratified training nodes from the remainder.
    LabelRate { rate: f64, val: usize, test: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub kind: SplitKind,
    pub seed: u64,
}

impl SplitSpec {
    pub fn planetoid(seed: u64) -> Self {
        SplitSpec {
            kind: SplitKind::Planetoid {
                per_class: 20,
                val: 500,
                test: 1000,
            },
            seed,
        }
    }

    pub fn counts(train: usize, val: usize, test: usize, seed: u64) -> Self {
        SplitSpec {
            kind: SplitKind::Counts { train, val, test },
            seed,
        }
    }

    pub fn label_rate(rate: f64, test: usize, seed: u64) -> Self {
        SplitSpec {
            kind: SplitKind::LabelRate { rate, val: 0, test },
            seed,
        }
    }
}

/// Number of training nodes a label rate asks for on `n` nodes.
pub fn label_budget(rate: f64, n: usize) -> usize {
    // The small slack stops products such as 0.01 * 2700 = 27.000000000000004
    // from rounding up.
    (rate * n as f64 - 1e-9).ceil().max(0.0) as usize
}

impl Dataset {
    /// Assembles a dataset from dense labels and an optional edge list.
    pub fn from_parts(
        name: impl Into<String>,
        x: Matrix,
        labels: Vec<usize>,
        class_names: Vec<String>,
        edges: Option<&[(usize, usize)]>,
    ) -> Result<Dataset> {
        let n = x.rows();
        if labels.len() != n {
            return Err(GlnnError::invalid(format!(
                "{} labels for {n} nodes",
                labels.len()
            )));
        }
        let classes = class_names.len();
        let mut y = Matrix::zeros(n, classes);
        for (i, &l) in labels.iter().enumerate() {
            if l >= classes {
                return Err(GlnnError::invalid(format!("label {l} of node {i} out of range")));
            }
            y.set(i, l, 1.0);
        }
        let gt = edges.map(|e| preprocess_ground_truth(e, n)).transpose()?;
        let zero_feature_rows = (0..n).filter(|&i| x.row(i).iter().all(|&v| v == 0.0)).count();
        let report = LoadReport {
            edges: gt.as_ref().map_or(0, |g| g.edges.len()),
            zero_feature_rows,
            ..LoadReport::default()
        };
        Ok(Dataset {
            name: name.into(),
            x,
            y,
            labels,
            class_names,
            node_ids: (0..n).map(|i| i.to_string()).collect(),
            gt,
            train_idx: Vec::new(),
            val_idx: Vec::new(),
            test_idx: Vec::new(),
            report,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.x.rows()
    }

    pub fn num_features(&self) -> usize {
        self.x.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.y.cols()
    }

    pub fn class_counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &i in idx {
            counts[self.labels[i]] += 1;
        }
        counts
    }

    /// Scales every nonzero feature row to sum to one.
    pub fn normalize_feature_rows(&mut self) {
        for r in 0..self.x.rows() {
            let row = self.x.row_mut(r);
            let s: f64 = row.iter().sum();
            if s != 0.0 {
                for v in row {
                    *v /= s;
                }
            }
        }
    }

    /// Checks the split invariants: in-range, pairwise disjoint, non-empty
    /// training set.
    pub fn validate_splits(&self) -> Result<()> {
        let n = self.num_nodes();
        let mut seen = vec![false; n];
        for idx in [&self.train_idx, &self.val_idx, &self.test_idx] {
            for &i in idx.iter() {
                if i >= n {
                    return Err(GlnnError::InfeasibleSplit(format!("index {i} >= {n}")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(GlnnError::InfeasibleSplit(format!(
                        "node {i} appears in more than one split"
                    )));
                }
            }
        }
        if self.train_idx.is_empty() {
            return Err(GlnnError::InfeasibleSplit("training set is empty".into()));
        }
        Ok(())
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> GlnnError {
    GlnnError::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Loads a LINQS dataset. Content lines are `id feature... label`; cites
/// lines are `id id`. Nodes are indexed in content-file order and classes in
/// lexicographic order of their label strings.
pub fn load_linqs(content_path: impl AsRef<Path>, cites_path: impl AsRef<Path>) -> Result<Dataset> {
    let content_path = content_path.as_ref();
    let cites_path = cites_path.as_ref();

    let mut node_ids = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut features: Vec<f64> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut width: Option<usize> = None;

    let reader = BufReader::new(File::open(content_path)?);
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() < 3 {
            return Err(parse_err(content_path, lineno, "expected id, features and label"));
        }
        let c = tokens.len() - 2;
        match width {
            None => width = Some(c),
            Some(w) if w != c => {
                return Err(parse_err(
                    content_path,
                    lineno,
                    format!("{c} features, expected {w}"),
                ))
            }
            _ => {}
        }
        let id = tokens[0].to_string();
        if index.contains_key(&id) {
            return Err(parse_err(content_path, lineno, format!("duplicate node id {id}")));
        }
        for tok in &tokens[1..tokens.len() - 1] {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(content_path, lineno, format!("bad feature value {tok:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(content_path, lineno, "non-finite feature value"));
            }
            features.push(v);
        }
        index.insert(id.clone(), node_ids.len());
        node_ids.push(id);
        raw_labels.push(tokens[tokens.len() - 1].to_string());
    }
    let n = node_ids.len();
    let c = width.ok_or_else(|| parse_err(content_path, 0, "no nodes"))?;

    let class_names: Vec<String> = raw_labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let class_index: HashMap<&str, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let labels: Vec<usize> = raw_labels.iter().map(|l| class_index[l.as_str()]).collect();

    let mut edges = Vec::new();
    let mut dropped = 0;
    let mut self_loops = 0;
    let reader = BufReader::new(File::open(cites_path)?);
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 2 {
            return Err(parse_err(cites_path, lineno + 1, "expected two node ids"));
        }
        match (index.get(tokens[0]), index.get(tokens[1])) {
            (Some(&u), Some(&v)) => {
                if u == v {
                    self_loops += 1;
                }
                edges.push((u, v));
            }
            _ => dropped += 1,
        }
    }

    let name = content_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let x = Matrix::from_vec(n, c, features)?;
    let mut ds = Dataset::from_parts(name, x, labels, class_names, Some(&edges))?;
    ds.node_ids = node_ids;
    ds.report.dropped_edges = dropped;
    ds.report.self_loops = self_loops;
    Ok(ds)
}

/// Largest-remainder allocation of `budget` over classes proportional to
/// `counts`, giving every non-empty class at least one slot when the budget
/// allows and never more slots than a class has nodes.
pub fn stratified_allocation(counts: &[usize], budget: usize) -> Vec<usize> {
    let total: usize = counts.iter().sum();
    let budget = budget.min(total);
    if total == 0 {
        return vec![0; counts.len()];
    }
    let quota: Vec<f64> = counts
        .iter()
        .map(|&k| budget as f64 * k as f64 / total as f64)
        .collect();
    let nonempty = counts.iter().filter(|&&k| k > 0).count();
    let mut alloc: Vec<usize> = counts
        .iter()
        .zip(&quota)
        .map(|(&k, &q)| {
            let base = (q.floor() as usize).min(k);
            if budget >= nonempty && k > 0 {
                base.max(1)
            } else {
                base
            }
        })
        .collect();
    let mut sum: usize = alloc.iter().sum();
    while sum < budget {
        let pick = (0..counts.len())
            .filter(|&k| alloc[k] < counts[k])
            .max_by(|&a, &b| {
                let ra = quota[a] - alloc[a] as f64;
                let rb = quota[b] - alloc[b] as f64;
                ra.total_cmp(&rb).then(b.cmp(&a))
            })
            .expect("budget <= total");
        alloc[pick] += 1;
        sum += 1;
    }
    while sum > budget {
        let pick = (0..counts.len())
            .filter(|&k| alloc[k] > 1)
            .min_by(|&a, &b| {
                let ra = quota[a] - alloc[a] as f64;
                let rb = quota[b] - alloc[b] as f64;
                ra.total_cmp(&rb).then(a.cmp(&b))
            })
            .expect("over-allocation comes from classes with more than one slot");
        alloc[pick] -= 1;
        sum -= 1;
    }
    alloc
}

fn seeded_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut order);
    order
}

/// Returns a copy of `ds` with train/validation/test indices assigned.
pub fn make_split(ds: &Dataset, spec: &SplitSpec) -> Result<Dataset> {
    let n = ds.num_nodes();
    let order = seeded_order(n, spec.seed);
    let infeasible = |msg: String| Err(GlnnError::InfeasibleSplit(msg));

    let (mut train, mut val, mut test) = match spec.kind {
        SplitKind::Planetoid {
            per_class,
            val,
            test,
        } => {
            let counts = ds.class_counts(&order);
            if let Some(k) = counts.iter().position(|&c| c < per_class) {
                return infeasible(format!(
                    "class {k} has {} nodes, fewer than {per_class}",
                    counts[k]
                ));
            }
            let train_total = per_class * ds.num_classes();
            if train_total + val + test > n {
                return infeasible(format!(
                    "{train_total} train + {val} val + {test} test exceeds {n} nodes"
                ));
            }
            let mut taken = vec![0; ds.num_classes()];
            let mut in_train = vec![false; n];
            let mut train_idx = Vec::with_capacity(train_total);
            for &i in &order {
                let k = ds.labels[i];
                if taken[k] < per_class {
                    taken[k] += 1;
                    in_train[i] = true;
                    train_idx.push(i);
                }
            }
            let rest: Vec<usize> = order.iter().copied().filter(|&i| !in_train[i]).collect();
            let val_idx = rest[..val].to_vec();
            let test_idx = rest[rest.len() - test..].to_vec();
            (train_idx, val_idx, test_idx)
        }
        SplitKind::Counts { train, val, test } => {
            if train == 0 {
                return infeasible("training count is zero".into());
            }
            if train + val + test > n {
                return infeasible(format!(
                    "{train} train + {val} val + {test} test exceeds {n} nodes"
                ));
            }
            (
                order[..train].to_vec(),
                order[train..train + val].to_vec(),
                order[train + val..train + val + test].to_vec(),
            )
        }
        SplitKind::LabelRate { rate, val, test } => {
            if !(rate > 0.0 && rate < 1.0) {
                return infeasible(format!("label rate {rate} outside (0, 1)"));
            }
            let budget = label_budget(rate, n);
            if budget + val + test > n {
                return infeasible(format!(
                    "{budget} train + {val} val + {test} test exceeds {n} nodes"
                ));
            }
            let test_idx = order[..test].to_vec();
            let val_idx = order[test..test + val].to_vec();
            let pool = &order[test + val..];
            let alloc = stratified_allocation(&ds.class_counts(pool), budget);
            let mut taken = vec![0; ds.num_classes()];
            let mut train_idx = Vec::with_capacity(budget);
            for &i in pool {
                let k = ds.labels[i];
                if taken[k] < alloc[k] {
                    taken[k] += 1;
                    train_idx.push(i);
                }
            }
            (train_idx, val_idx, test_idx)
        }
    };
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    let mut out = ds.clone();
    out.train_idx = train;
    out.val_idx = val;
    out.test_idx = test;
    out.validate_splits()?;
    Ok(out)
}

/// Keeps a uniformly random subset of `n` nodes (kept in their original
/// relative order) and the subgraph they induce. Splits are cleared.
pub fn downsample(ds: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    let total = ds.num_nodes();
    if n > total {
        return Err(GlnnError::invalid(format!(
            "cannot sample {n} nodes from {total}"
        )));
    }
    let mut keep = seeded_order(total, seed);
    keep.truncate(n);
    keep.sort_unstable();
    let mut remap = vec![usize::MAX; total];
    for (new, &old) in keep.iter().enumerate() {
        remap[old] = new;
    }

    let c = ds.num_features();
    let mut x = Matrix::zeros(n, c);
    for (new, &old) in keep.iter().enumerate() {
        x.row_mut(new).copy_from_slice(ds.x.row(old));
    }
    let labels = keep.iter().map(|&i| ds.labels[i]).collect();
    let edges: Option<Vec<(usize, usize)>> = ds.gt.as_ref().map(|g| {
        g.edges
            .iter()
            .filter(|&&(u, v)| remap[u] != usize::MAX && remap[v] != usize::MAX)
            .map(|&(u, v)| (remap[u], remap[v]))
            .collect()
    });
    let mut out = Dataset::from_parts(
        ds.name.clone(),
        x,
        labels,
        ds.class_names.clone(),
        edges.as_deref(),
    )?;
    out.node_ids = keep.iter().map(|&i| ds.node_ids[i].clone()).collect();
    Ok(out)
}

/// Writes the binary cache:
///
/// ```text
/// magic "GLNNDATA"
/// u64 N, u64 C, u64 F, u64 E, u8 has_graph
/// N*C f64 features (row-major)
/// N   u32 class ids
/// E   (u32, u32) undirected edges
/// u32-length-prefixed UTF-8: name, F class names, N node ids
/// ```
///
/// All integers and reals are little-endian.
pub fn write_cache<W: Write>(ds: &Dataset, w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    let edges: &[(usize, usize)] = ds.gt.as_ref().map_or(&[], |g| &g.edges);
    w.write_all(CACHE_MAGIC)?;
    for d in [ds.num_nodes(), ds.num_features(), ds.num_classes(), edges.len()] {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    w.write_all(&[u8::from(ds.gt.is_some())])?;
    for v in ds.x.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    for &l in &ds.labels {
        w.write_all(&(l as u32).to_le_bytes())?;
    }
    for &(u, v) in edges {
        w.write_all(&(u as u32).to_le_bytes())?;
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    let strings = std::iter::once(&ds.name)
        .chain(&ds.class_names)
        .chain(&ds.node_ids);
    for s in strings {
        w.write_all(&(s.len() as u32).to_le_bytes())?;
        w.write_all(s.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| GlnnError::Format("unexpected end of cache".into()))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_string<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)
        .map_err(|_| GlnnError::Format("unexpected end of cache".into()))?;
    String::from_utf8(buf).map_err(|_| GlnnError::Format("invalid UTF-8 in cache".into()))
}

pub fn read_cache<R: Read>(r: R) -> Result<Dataset> {
    let mut r = BufReader::new(r);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| GlnnError::Format("truncated cache header".into()))?;
    if &magic != CACHE_MAGIC {
        return Err(GlnnError::Format("not a dataset cache".into()));
    }
    let n = read_u64(&mut r)? as usize;
    let c = read_u64(&mut r)? as usize;
    let f = read_u64(&mut r)? as usize;
    let e = read_u64(&mut r)? as usize;
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let x = read_matrix(&mut r, n, c)?;
    let labels = (0..n)
        .map(|_| read_u32(&mut r).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let mut edges = Vec::with_capacity(e);
    for _ in 0..e {
        let u = read_u32(&mut r)? as usize;
        let v = read_u32(&mut r)? as usize;
        edges.push((u, v));
    }
    let name = read_string(&mut r)?;
    let class_names = (0..f).map(|_| read_string(&mut r)).collect::<Result<Vec<_>>>()?;
    let node_ids = (0..n).map(|_| read_string(&mut r)).collect::<Result<Vec<_>>>()?;
    let graph = (flag[0] != 0).then_some(edges.as_slice());
    let mut ds = Dataset::from_parts(name, x, labels, class_names, graph)?;
    ds.node_ids = node_ids;
    Ok(ds)
}

pub fn save_cache(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_cache(ds, File::create(path)?)
}

pub fn load_cache(path: impl AsRef<Path>) -> Result<Dataset> {
    read_cache(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_files(dir: &Path, content: &str, cites: &str) -> (std::path::PathBuf, std::path::PathBuf) {
        let c = dir.join("toy.content");
        let e = dir.join("toy.cites");
        File::create(&c).unwrap().write_all(content.as_bytes()).unwrap();
        File::create(&e).unwrap().write_all(cites.as_bytes()).unwrap();
        (c, e)
    }

    fn toy(n: usize, classes: usize) -> Dataset {
        let x = Matrix::filled(n, 2, 1.0);
        let labels = (0..n).map(|i| i % classes).collect();
        let names = (0..classes).map(|k| format!("c{k}")).collect();
        Dataset::from_parts("toy", x, labels, names, None).unwrap()
    }

    #[test]
    fn loads_two_node_file() {
        let dir = tempfile::tempdir().unwrap();
        let (c, e) = write_files(dir.path(), "a\t1\t0\tB\nb\t0\t0\tA\n", "a\tb\n");
        let ds = load_linqs(&c, &e).unwrap();
        assert_eq!(ds.num_nodes(), 2);
        assert_eq!(ds.num_features(), 2);
        assert_eq!(ds.class_names, vec!["A", "B"]);
        assert_eq!(ds.labels, vec![1, 0]);
        let gt = ds.gt.as_ref().unwrap();
        assert_eq!(gt.binary, Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]));
        assert_eq!(ds.report.zero_feature_rows, 1);
        assert_eq!(ds.name, "toy");
    }

    #[test]
    fn duplicate_and_unknown_edges() {
        let dir = tempfile::tempdir().unwrap();
        let (c, e) = write_files(
            dir.path(),
            "a 1 X\nb 0 Y\nc 1 X\n",
            "a b\nb a\na b\nc zz\nc c\n",
        );
        let ds = load_linqs(&c, &e).unwrap();
        let gt = ds.gt.as_ref().unwrap();
        assert_eq!(gt.edges, vec![(0, 1)]);
        assert_eq!(ds.report.dropped_edges, 1);
        assert_eq!(ds.report.self_loops, 1);
        assert_eq!(ds.report.edges, 1);
    }

    #[test]
    fn malformed_lines_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let (c, e) = write_files(dir.path(), "a 1 0 X\nb 1 Y\n", "");
        match load_linqs(&c, &e) {
            Err(GlnnError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let (c, e) = write_files(dir.path(), "a 1 q X\n", "");
        assert!(matches!(load_linqs(&c, &e), Err(GlnnError::Parse { line: 1, .. })));
        let (c, e) = write_files(dir.path(), "a 1 X\nb 0 Y\n", "a b c\n");
        assert!(matches!(load_linqs(&c, &e), Err(GlnnError::Parse { line: 1, .. })));
    }

    #[test]
    fn loading_twice_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (c, e) = write_files(dir.path(), "n1 0.5 1 X\nn2 0 1 Y\nn3 1 1 X\n", "n1 n3\nn2 n3\n");
        assert_eq!(load_linqs(&c, &e).unwrap(), load_linqs(&c, &e).unwrap());
    }

    #[test]
    fn label_rate_budget_arithmetic() {
        assert_eq!(label_budget(0.005, 2708), 14);
        assert_eq!(label_budget(0.01, 2700), 27);
        assert_eq!(label_budget(0.025, 3327), 84);
    }

    #[test]
    fn planetoid_split() {
        let ds = toy(200, 4);
        let spec = SplitSpec {
            kind: SplitKind::Planetoid {
                per_class: 5,
                val: 30,
                test: 50,
            },
            seed: 3,
        };
        let s = make_split(&ds, &spec).unwrap();
        assert_eq!(s.class_counts(&s.train_idx), vec![5; 4]);
        assert_eq!(s.val_idx.len(), 30);
        assert_eq!(s.test_idx.len(), 50);
        assert_eq!(make_split(&ds, &spec).unwrap(), s);

        let too_many = SplitSpec {
            kind: SplitKind::Planetoid {
                per_class: 60,
                val: 0,
                test: 0,
            },
            seed: 3,
        };
        assert!(matches!(make_split(&ds, &too_many), Err(GlnnError::InfeasibleSplit(_))));
    }

    #[test]
    fn count_split_sizes() {
        let ds = toy(310, 3);
        let s = make_split(&ds, &SplitSpec::counts(160, 0, 150, 1)).unwrap();
        assert_eq!((s.train_idx.len(), s.val_idx.len(), s.test_idx.len()), (160, 0, 150));
        assert!(make_split(&ds, &SplitSpec::counts(200, 0, 150, 1)).is_err());
        assert!(make_split(&ds, &SplitSpec::counts(0, 0, 150, 1)).is_err());
    }

    #[test]
    fn label_rate_keeps_test_set_fixed() {
        let ds = toy(2708, 7);
        let a = make_split(&ds, &SplitSpec::label_rate(0.005, 1000, 9)).unwrap();
        let b = make_split(&ds, &SplitSpec::label_rate(0.025, 1000, 9)).unwrap();
        assert_eq!(a.train_idx.len(), 14);
        assert_eq!(a.test_idx, b.test_idx);
        assert!(a.class_counts(&a.train_idx).iter().all(|&c| c >= 1));
        assert!(make_split(&ds, &SplitSpec::label_rate(1.5, 10, 9)).is_err());
    }

    #[test]
    fn allocation_edge_cases() {
        assert_eq!(stratified_allocation(&[10, 10], 4), vec![2, 2]);
        assert_eq!(stratified_allocation(&[100, 1, 1], 3), vec![1, 1, 1]);
        assert_eq!(stratified_allocation(&[100, 1, 1], 2), vec![2, 0, 0]);
        assert_eq!(stratified_allocation(&[0, 5], 3), vec![0, 3]);
        assert_eq!(stratified_allocation(&[2, 2], 10), vec![2, 2]);
    }

    #[test]
    fn downsample_induced_subgraph() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0], [4.0]]);
        let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)];
        let names = vec!["a".to_string(), "b".to_string()];
        let ds = Dataset::from_parts("g", x, vec![0, 1, 0, 1, 0], names, Some(&edges)).unwrap();
        assert_eq!(downsample(&ds, 5, 1).unwrap(), ds);
        let sub = downsample(&ds, 3, 4).unwrap();
        assert_eq!(sub.num_nodes(), 3);
        let kept: Vec<usize> = sub.x.as_slice().iter().map(|&v| v as usize).collect();
        let gt = sub.gt.as_ref().unwrap();
        for &(u, v) in &gt.edges {
            let (a, b) = (kept[u].min(kept[v]), kept[u].max(kept[v]));
            assert!(edges.contains(&(a, b)));
        }
        let expected = edges
            .iter()
            .filter(|(a, b)| kept.contains(a) && kept.contains(b))
            .count();
        assert_eq!(gt.edges.len(), expected);
        assert!(downsample(&ds, 6, 1).is_err());
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (c, e) = write_files(dir.path(), "a 0.25 0 B\nb 0 1e-3 A\nc 1 1 B\n", "a b\nc b\n");
        let ds = load_linqs(&c, &e).unwrap();
        let mut buf = Vec::new();
        write_cache(&ds, &mut buf).unwrap();
        assert_eq!(&buf[..8], CACHE_MAGIC);
        let back = read_cache(&buf[..]).unwrap();
        assert_eq!(back.x, ds.x);
        assert_eq!(back.labels, ds.labels);
        assert_eq!(back.gt, ds.gt);
        assert_eq!(back.node_ids, ds.node_ids);
        assert_eq!(back.class_names, ds.class_names);
        assert!(read_cache(&buf[..20]).is_err());
    }

    #[test]
    fn feature_row_normalization() {
        let x = Matrix::from_rows(&[[1.0, 3.0], [0.0, 0.0]]);
        let mut ds = Dataset::from_parts("f", x, vec![0, 0], vec!["a".into()], None).unwrap();
        ds.normalize_feature_rows();
        assert_eq!(ds.x, Matrix::from_rows(&[[0.25, 0.75], [0.0, 0.0]]));
    }

    proptest! {
        #[test]
        fn splits_are_disjoint(seed in any::<u64>(), kind in 0usize..3) {
            let ds = toy(300, 5);
            let spec = match kind {
                0 => SplitSpec { kind: SplitKind::Planetoid { per_class: 4, val: 50, test: 100 }, seed },
                1 => SplitSpec::counts(40, 30, 100, seed),
                _ => SplitSpec { kind: SplitKind::LabelRate { rate: 0.07, val: 20, test: 100 }, seed },
            };
            let s = make_split(&ds, &spec).unwrap();
            let mut all: Vec<usize> = s.train_idx.iter().chain(&s.val_idx).chain(&s.test_idx).copied().collect();
            let total = all.len();
            all.sort_unstable();
            all.dedup();
            prop_assert_eq!(all.len(), total);
        }

        #[test]
        fn allocation_is_near_proportional(counts in proptest::collection::vec(0usize..200, 1..8), frac in 0.0f64..1.0) {
            let total: usize = counts.iter().sum();
            prop_assume!(total > 0);
            let budget = ((total as f64) * frac) as usize;
            let alloc = stratified_allocation(&counts, budget);
            prop_assert_eq!(alloc.iter().sum::<usize>(), budget);
            let quota = |c: usize| budget as f64 * c as f64 / total as f64;
            let nonempty = counts.iter().filter(|&&c| c > 0).count();
            // Raising tiny classes to one slot can push a large class past
            // the +-1 band; the band is only promised when that rule is idle.
            let forcing = budget >= nonempty && counts.iter().any(|&c| c > 0 && quota(c) < 1.0);
            for (k, (&a, &c)) in alloc.iter().zip(&counts).enumerate() {
                prop_assert!(a <= c);
                if budget >= nonempty && c > 0 {
                    prop_assert!(a >= 1);
                }
                if !forcing {
                    prop_assert!((a as f64 - quota(c)).abs() <= 1.0 + 1e-9, "class {} alloc {} quota {}", k, a, quota(c));
                }
            }
        }
    }
}
