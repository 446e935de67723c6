use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;

use crate::base::{Batch, RngStream};
use crate::error::{Error, Result};
use crate::io::fmt17;

/// In-memory dataset with scalar targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::Data(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        if let Some(first) = inputs.first() {
            let p = first.len();
            if let Some(i) = inputs.iter().position(|x| x.len() != p) {
                return Err(Error::Data(format!(
                    "row {i} has {} features, expected {p}",
                    inputs[i].len()
                )));
            }
        }
        Ok(Self { inputs, targets })
    }

    pub fn empty() -> Self {
        Self {
            inputs: Vec::new(),
            targets: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Every datum, in storage order.
    pub fn full_batch(&self) -> Batch {
        Batch::new(self.inputs.clone(), self.targets.clone(), self.len())
            .expect("consistent dataset")
    }

    pub fn subset(&self, indices: &[usize]) -> Batch {
        Batch::new(
            indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            indices.iter().map(|&i| self.targets[i]).collect(),
            self.len(),
        )
        .expect("subset of a consistent dataset")
    }

    /// CSV with header `x0,..,x{p-1},y`; floats at 17 significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (0..self.feature_dim()).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for (x, y) in self.inputs.iter().zip(&self.targets) {
            let mut row: Vec<String> = x.iter().map(|&v| fmt17(v)).collect();
            row.push(fmt17(*y));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        let p = header.len().saturating_sub(1);
        let expected: Vec<String> = (0..p)
            .map(|j| format!("x{j}"))
            .chain(["y".to_string()])
            .collect();
        if header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(Error::Data(format!("unexpected CSV header {header:?}")));
        }
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Data(format!("bad float {s:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            targets.push(vals[p]);
            inputs.push(vals[..p].to_vec());
        }
        Dataset::new(inputs, targets)
    }
}

/// Two interleaved half circles with Gaussian feature noise; a fraction
/// `label_flip` of labels is flipped.
pub fn two_moons(n: usize, noise: f64, label_flip: f64, seed: u64) -> Dataset {
    let mut rng = RngStream::new(seed, 0);
    let mut inputs = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let t = std::f64::consts::PI * rng.uniform();
        let (x, y) = if class == 0 {
            (t.cos(), t.sin())
        } else {
            (1.0 - t.cos(), 0.5 - t.sin())
        };
        let x = x + noise * rng.standard_normal();
        let y = y + noise * rng.standard_normal();
        let label = if rng.uniform() < label_flip {
            1 - class
        } else {
            class
        };
        inputs.push(vec![x, y]);
        targets.push(label as f64);
    }
    Dataset { inputs, targets }
}

/// One epoch: a seeded permutation of the data cut into consecutive batches;
/// the last one may be short.
pub fn epoch_batches(ds: &Dataset, batch_size: usize, epoch_seed: u64) -> Result<Vec<Batch>> {
    if batch_size < 1 {
        return Err(Error::InvalidHyper("batch size must be at least 1".into()));
    }
    let order = permutation(ds.len(), epoch_seed, 0);
    Ok(order.chunks(batch_size).map(|idx| ds.subset(idx)).collect())
}

fn permutation(n: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = RngStream::new(seed, epoch);
    idx.shuffle(rng.inner());
    idx
}

/// Endless batch source. Value-typed: cloning it forks the position.
#[derive(Debug, Clone)]
pub struct BatchCursor {
    source: Source,
    epoch: u64,
    position: usize,
}

#[derive(Debug, Clone)]
enum Source {
    /// Densities without data; yields empty batches of nominal size `n`.
    Target { n: usize },
    Data {
        data: Arc<Dataset>,
        batch_size: usize,
        shuffle_seed: u64,
        order: Vec<usize>,
    },
}

impl BatchCursor {
    pub fn target(n: usize) -> Self {
        Self {
            source: Source::Target { n },
            epoch: 0,
            position: 0,
        }
    }

    /// Epoch `e` uses the permutation `epoch_batches(data, batch_size, ..)`
    /// would produce for stream `(shuffle_seed, e)`.
    pub fn new(data: Arc<Dataset>, batch_size: usize, shuffle_seed: u64) -> Result<Self> {
        if batch_size < 1 {
            return Err(Error::InvalidHyper("batch size must be at least 1".into()));
        }
        if data.is_empty() {
            return Ok(Self::target(0));
        }
        let batch_size = batch_size.min(data.len());
        let order = permutation(data.len(), shuffle_seed, 0);
        Ok(Self {
            source: Source::Data {
                data,
                batch_size,
                shuffle_seed,
                order,
            },
            epoch: 0,
            position: 0,
        })
    }

    /// Same data and batch size with a different shuffle seed, rewound to
    /// the start.
    pub fn reseeded(&self, shuffle_seed: u64) -> Self {
        match &self.source {
            Source::Target { n } => Self::target(*n),
            Source::Data {
                data, batch_size, ..
            } => Self::new(Arc::clone(data), *batch_size, shuffle_seed)
                .expect("validated at construction"),
        }
    }

    pub fn total_size(&self) -> usize {
        match &self.source {
            Source::Target { n } => *n,
            Source::Data { data, .. } => data.len(),
        }
    }

    pub fn batches_per_epoch(&self) -> usize {
        match &self.source {
            Source::Target { .. } => 1,
            Source::Data {
                data, batch_size, ..
            } => data.len().div_ceil(*batch_size),
        }
    }

    pub fn next_batch(&mut self) -> Batch {
        match &mut self.source {
            Source::Target { n } => Batch::empty(*n),
            Source::Data {
                data,
                batch_size,
                shuffle_seed,
                order,
            } => {
                if self.position >= order.len() {
                    self.epoch += 1;
                    self.position = 0;
                    *order = permutation(data.len(), *shuffle_seed, self.epoch);
                }
                let end = (self.position + *batch_size).min(order.len());
                let b = data.subset(&order[self.position..end]);
                self.position = end;
                b
            }
        }
    }
}
