use crate::{Error, Result, Tensor};

/// One unit vector per class.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSet {
    pub names: Vec<String>,
    /// `[K, D]`, rows of unit L2 norm.
    pub centroids: Tensor,
}

impl CentroidSet {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.centroids.shape()[1]
    }

    pub fn centroid(&self, c: usize) -> &[f64] {
        let d = self.dim();
        &self.centroids.data()[c * d..(c + 1) * d]
    }
}

/// Per-class mean of unit descriptors, re-normalized onto the sphere.
pub fn compute_centroids(descriptors: &Tensor, labels: &[usize], names: Vec<String>) -> Result<CentroidSet> {
    let (n, d) = descriptors.dims2()?;
    if labels.len() != n {
        return Err(Error::InvalidArgument(format!("{n} descriptors, {} labels", labels.len())));
    }
    let k = names.len();
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for (i, (row, &l)) in descriptors.data().chunks_exact(d).zip(labels).enumerate() {
        if l >= k {
            return Err(Error::Data(format!("descriptor {i} has label {l}, only {k} classes")));
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!("descriptor {i} has norm {norm}, expected 1")));
        }
        counts[l] += 1;
        for (s, v) in sums[l * d..(l + 1) * d].iter_mut().zip(row) {
            *s += v;
        }
    }
    let missing: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
    if !missing.is_empty() {
        return Err(Error::MissingClass(missing));
    }
    for c in 0..k {
        let row = &mut sums[c * d..(c + 1) * d];
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-12 * counts[c] as f64 {
            return Err(Error::DegenerateCentroid(c));
        }
        row.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(CentroidSet {
        names,
        centroids: Tensor::new(vec![k, d], sums)?,
    })
}

/// Class with the largest dot product (cosine for unit inputs), lowest
/// index on ties.
pub fn nearest_centroid(descriptor: &[f64], set: &CentroidSet) -> Result<(usize, f64)> {
    if descriptor.len() != set.dim() {
        return Err(Error::Tensor(crate::TensorError::Shape(format!(
            "descriptor of length {} against {}-dimensional centroids",
            descriptor.len(),
            set.dim()
        ))));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for c in 0..set.len() {
        let score: f64 = set.centroid(c).iter().zip(descriptor).map(|(a, b)| a * b).sum();
        if score > best.1 {
            best = (c, score);
        }
    }
    Ok(best)
}
