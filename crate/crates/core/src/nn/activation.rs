use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

pub fn relu_forward(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor::new(x.shape(), data).expect("same shape")
}

/// Passes the gradient where the forward output was positive; the kink gets 0.
pub fn relu_backward(output: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    if output.shape() != upstream.shape() {
        return Err(Error::Dimension(
            "relu upstream shape differs from output".into(),
        ));
    }
    let data = output
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&o, &u)| if o > 0.0 { u } else { 0.0 })
        .collect();
    Tensor::new(output.shape(), data)
}

/// Inverted dropout: kept units are scaled by `1 / (1 - rate)` while
/// training, and evaluation is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    rate: f64,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!(
                "dropout rate must be in [0, 1), got {rate}"
            )));
        }
        Ok(Self { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Draws a mask of `0` or `1 / (1 - rate)` per element.
    pub fn sample_mask<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<f64> {
        let scale = 1.0 / (1.0 - self.rate);
        (0..len)
            .map(|_| {
                if rng.random::<f64>() < self.rate {
                    0.0
                } else {
                    scale
                }
            })
            .collect()
    }

    /// Returns the output and the mask used, if any.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        x: &Tensor,
        mode: Mode,
        rng: &mut R,
    ) -> (Tensor, Option<Vec<f64>>) {
        if mode == Mode::Eval || self.rate == 0.0 {
            return (x.clone(), None);
        }
        let mask = self.sample_mask(x.len(), rng);
        (apply_mask(x, &mask), Some(mask))
    }

    pub fn backward(&self, mask: Option<&[f64]>, upstream: &Tensor) -> Tensor {
        match mask {
            Some(mask) => apply_mask(upstream, mask),
            None => upstream.clone(),
        }
    }
}

pub fn apply_mask(x: &Tensor, mask: &[f64]) -> Tensor {
    let data = x.data().iter().zip(mask).map(|(v, m)| v * m).collect();
    Tensor::new(x.shape(), data).expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn relu_clamps_and_gates() {
        let x = Tensor::new(&[4], vec![-1.0, 0.0, 2.0, -0.5]).unwrap();
        let y = relu_forward(&x);
        assert_eq!(y.data(), &[0.0, 0.0, 2.0, 0.0]);
        let g = relu_backward(&y, &Tensor::new(&[4], vec![1.0; 4]).unwrap()).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn zero_rate_is_identity() {
        let x = Tensor::new(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = Dropout::new(0.0).unwrap();
        for mode in [Mode::Train, Mode::Eval] {
            let (y, mask) = d.forward(&x, mode, &mut rng);
            assert_eq!(y, x);
            assert!(mask.is_none());
        }
    }

    #[test]
    fn eval_is_identity_and_train_rescales() {
        let x = Tensor::new(&[10_000], vec![1.0; 10_000]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = Dropout::new(0.2).unwrap();
        assert_eq!(d.forward(&x, Mode::Eval, &mut rng).0, x);
        let (y, mask) = d.forward(&x, Mode::Train, &mut rng);
        let mask = mask.unwrap();
        assert!(mask.iter().all(|&m| m == 0.0 || (m - 1.25).abs() < 1e-15));
        let mean = y.data().iter().sum::<f64>() / 10_000.0;
        assert!((mean - 1.0).abs() < 0.05);
    }

    #[test]
    fn rate_must_be_below_one() {
        assert!(Dropout::new(1.0).is_err());
        assert!(Dropout::new(-0.1).is_err());
        assert!(Dropout::new(0.99).is_ok());
    }
}
