use crate::error::{Error, Result};

/// A minibatch plus the size of the dataset it was drawn from.
///
/// Targets are scalars: a regression value or a class index stored as `f64`.
/// An empty batch carries no likelihood terms and is used for densities that
/// are not driven by data.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    total_size: usize,
}

impl Batch {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>, total_size: usize) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::Data(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        if inputs.len() > total_size {
            return Err(Error::Data(format!(
                "batch of {} exceeds dataset size {total_size}",
                inputs.len()
            )));
        }
        Ok(Self {
            inputs,
            targets,
            total_size,
        })
    }

    /// No data; the log density is normalized by `total_size` (at least 1).
    pub fn empty(total_size: usize) -> Self {
        Self {
            inputs: Vec::new(),
            targets: Vec::new(),
            total_size,
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn total_size(&self) -> usize {
        self.total_size
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.inputs
            .iter()
            .map(Vec::as_slice)
            .zip(self.targets.iter().copied())
    }

    /// Restriction to a single datum, keeping `total_size`.
    pub fn single(&self, i: usize) -> Batch {
        Batch {
            inputs: vec![self.inputs[i].clone()],
            targets: vec![self.targets[i]],
            total_size: self.total_size,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_oversized_and_ragged() {
        assert!(Batch::new(vec![vec![0.0]; 3], vec![0.0; 3], 2).is_err());
        assert!(Batch::new(vec![vec![0.0]; 2], vec![0.0; 3], 5).is_err());
        assert_eq!(
            Batch::new(vec![vec![1.0]], vec![2.0], 4)
                .unwrap()
                .single(0)
                .total_size(),
            4
        );
    }
}
