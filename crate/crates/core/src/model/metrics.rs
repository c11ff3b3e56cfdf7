use serde::{Deserialize, Serialize};

use super::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
}

/// Element-mean squared and absolute error over every patch and dimension.
pub fn metrics(forecast: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<Metrics> {
    if forecast.len() != truth.len() || forecast.is_empty() {
        return Err(ModelError::DimensionMismatch { expected: truth.len(), found: forecast.len() });
    }
    let (mut se, mut ae, mut n) = (0.0, 0.0, 0usize);
    for (f, t) in forecast.iter().zip(truth) {
        if f.len() != t.len() {
            return Err(ModelError::DimensionMismatch { expected: t.len(), found: f.len() });
        }
        for (a, b) in f.iter().zip(t) {
            let e = a - b;
            se += e * e;
            ae += e.abs();
        }
        n += f.len();
    }
    Ok(Metrics { mse: se / n as f64, mae: ae / n as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn exact_and_offset() {
        let t = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert_eq!(metrics(&t, &t).unwrap(), Metrics { mse: 0.0, mae: 0.0 });
        let f: Vec<Vec<f64>> = t.iter().map(|p| p.iter().map(|v| v + 1.0).collect()).collect();
        let m = metrics(&f, &t).unwrap();
        assert!((m.mse - 1.0).abs() < 1e-15 && (m.mae - 1.0).abs() < 1e-15);
    }

    #[test]
    fn agrees_with_flattened_accumulation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let f: Vec<Vec<f64>> = (0..7).map(|_| (0..5).map(|_| rng.random::<f64>()).collect()).collect();
        let t: Vec<Vec<f64>> = (0..7).map(|_| (0..5).map(|_| rng.random::<f64>()).collect()).collect();
        let flat: Vec<(f64, f64)> = f.concat().into_iter().zip(t.concat()).collect();
        let mse = flat.iter().map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / flat.len() as f64;
        let mae = flat.iter().map(|(a, b)| (a - b).abs()).sum::<f64>() / flat.len() as f64;
        let m = metrics(&f, &t).unwrap();
        assert!((m.mse - mse).abs() < 1e-14 && (m.mae - mae).abs() < 1e-14);
    }

    #[test]
    fn shape_mismatch() {
        assert!(metrics(&[vec![1.0]], &[vec![1.0, 2.0]]).is_err());
        assert!(metrics(&[vec![1.0]], &[vec![1.0], vec![2.0]]).is_err());
    }
}
