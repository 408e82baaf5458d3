use super::tensor::{Matrix, Tensor3};
use crate::error::{Error, Result};

pub fn relu(x: &Tensor3) -> Tensor3 {
    let mut out = x.clone();
    for v in out.as_mut_slice() {
        *v = v.max(0.0);
    }
    out
}

/// Per-channel mean over all `T * N` positions.
pub fn global_avg_pool(x: &Tensor3) -> Vec<f64> {
    let (_, t, n) = x.dims();
    let p = (t * n) as f64;
    x.as_slice().chunks(t * n).map(|c| c.iter().sum::<f64>() / p).collect()
}

/// `weights^T v + bias` for a `features x classes` weight matrix.
pub fn linear_head(v: &[f64], weights: &Matrix, bias: &[f64]) -> Result<Vec<f64>> {
    if v.len() != weights.rows() || bias.len() != weights.cols() {
        return Err(Error::ShapeMismatch(format!(
            "head is {}x{} with {} biases, input has {} features",
            weights.rows(),
            weights.cols(),
            bias.len(),
            v.len()
        )));
    }
    let mut out = bias.to_vec();
    for (f, &x) in v.iter().enumerate() {
        for (k, o) in out.iter_mut().enumerate() {
            *o += x * weights.get(f, k);
        }
    }
    Ok(out)
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `-ln p[label]`, with probabilities floored at the smallest positive f64.
pub fn cross_entropy(probabilities: &[f64], label: usize) -> Result<f64> {
    let p = probabilities.get(label).ok_or(Error::IndexOutOfRange { index: label, len: probabilities.len() })?;
    Ok(-p.max(f64::MIN_POSITIVE).ln())
}

/// Cross-entropy computed from logits through log-sum-exp.
pub fn cross_entropy_logits(logits: &[f64], label: usize) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_and_loss() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        let ce = cross_entropy(&[0.5, 0.5], 0).unwrap();
        assert!((ce - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(cross_entropy(&[0.0, 1.0], 1).unwrap(), 0.0);
        assert!(cross_entropy(&[1.0], 3).is_err());
        let p = softmax(&[1000.0, -3.0, 2.5]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12 && p.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn pooling_constant() {
        let mut x = Tensor3::zeros(2, 3, 4);
        x.as_mut_slice()[..12].fill(1.5);
        x.as_mut_slice()[12..].fill(-2.0);
        assert_eq!(global_avg_pool(&x), vec![1.5, -2.0]);
    }

    #[test]
    fn head_and_argmax() {
        let w = Matrix::from_vec(2, 3, vec![1.0, 0.0, 2.0, 0.0, 1.0, -1.0]).unwrap();
        assert_eq!(linear_head(&[1.0, 2.0], &w, &[0.0, 0.5, 0.0]).unwrap(), vec![1.0, 2.5, 0.0]);
        assert!(linear_head(&[1.0], &w, &[0.0; 3]).is_err());
        assert_eq!(argmax(&[0.2, 0.5, 0.5]), 1);
    }
}
