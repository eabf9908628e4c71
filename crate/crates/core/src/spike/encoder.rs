use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{lif_step, LifParams, LifState, SpikeError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeEncoderConfig {
    pub in_dim: usize,
    pub out_dim: usize,
    pub lif: LifParams,
    pub surrogate_alpha: f64,
}

impl SpikeEncoderConfig {
    pub fn new(in_dim: usize, out_dim: usize, lif: LifParams, surrogate_alpha: f64) -> Result<Self, SpikeError> {
        if in_dim == 0 || out_dim == 0 {
            return Err(SpikeError::InvalidParams("encoder dimensions must be positive".into()));
        }
        if !(surrogate_alpha > 0.0) {
            return Err(SpikeError::InvalidParams(format!("surrogate alpha must be positive, got {surrogate_alpha}")));
        }
        Ok(Self { in_dim, out_dim, lif, surrogate_alpha })
    }
}

/// Linear projection followed by a LIF layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeEncoder {
    pub cfg: SpikeEncoderConfig,
    pub weight: Tensor,
    pub bias: Vec<f64>,
}

impl SpikeEncoder {
    pub fn new(cfg: SpikeEncoderConfig, weight: Tensor, bias: Vec<f64>) -> Result<Self, SpikeError> {
        if weight.dims != [cfg.out_dim, cfg.in_dim] {
            return Err(SpikeError::DimensionMismatch { expected: cfg.out_dim * cfg.in_dim, got: weight.data.len() });
        }
        if bias.len() != cfg.out_dim {
            return Err(SpikeError::DimensionMismatch { expected: cfg.out_dim, got: bias.len() });
        }
        Ok(Self { cfg, weight, bias })
    }

    /// Gaussian weights with standard deviation `1/sqrt(in_dim)`, zero bias.
    pub fn random(cfg: SpikeEncoderConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0 / (cfg.in_dim as f64).sqrt()).unwrap();
        let mut weight = Tensor::zeros("encoder.weight", &[cfg.out_dim, cfg.in_dim]);
        weight.data.iter_mut().for_each(|w| *w = normal.sample(&mut rng));
        Self { cfg, weight, bias: vec![0.0; cfg.out_dim] }
    }

    /// Runs the sequence through projection and LIF, carrying membrane
    /// state across steps. Returns one binary spike vector per step.
    pub fn encode(&self, embeddings: &[Vec<f64>]) -> Result<Vec<Vec<u8>>, SpikeError> {
        let mut state = LifState::new(self.cfg.out_dim, &self.cfg.lif);
        let mut out = Vec::with_capacity(embeddings.len());
        for e in embeddings {
            if e.len() != self.cfg.in_dim {
                return Err(SpikeError::DimensionMismatch { expected: self.cfg.in_dim, got: e.len() });
            }
            let mut current = self.bias.clone();
            self.weight.matvec_acc(e, &mut current);
            let (next, spikes) = lif_step(&state, &current, &self.cfg.lif)?;
            debug_assert!(next
                .v
                .iter()
                .zip(&spikes)
                .all(|(v, s)| *s == 0 || *v == self.cfg.lif.v_reset));
            state = next;
            out.push(spikes);
        }
        Ok(out)
    }
}

pub fn spike_encode(embeddings: &[Vec<f64>], encoder: &SpikeEncoder) -> Result<Vec<Vec<u8>>, SpikeError> {
    encoder.encode(embeddings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_zero_spikes() {
        let cfg = SpikeEncoderConfig::new(4, 3, LifParams::encoder_default(), 2.0).unwrap();
        let enc = SpikeEncoder::new(cfg, Tensor::zeros("w", &[3, 4]), vec![0.0; 3]).unwrap();
        let out = enc.encode(&vec![vec![0.0; 4]; 5]).unwrap();
        assert!(out.iter().flatten().all(|&s| s == 0));
    }

    #[test]
    fn identity_single_neuron_matches_hand_trace() {
        let lif = LifParams::new(2.0, 0.6, 0.0, 1.0).unwrap();
        let cfg = SpikeEncoderConfig::new(1, 1, lif, 2.0).unwrap();
        let mut w = Tensor::zeros("w", &[1, 1]);
        w.data[0] = 1.0;
        let enc = SpikeEncoder::new(cfg, w, vec![0.0]).unwrap();
        let out = enc.encode(&vec![vec![1.0]; 6]).unwrap();
        // 0.5, 0.75 -> spike, reset, repeat.
        assert_eq!(out, vec![vec![0], vec![1], vec![0], vec![1], vec![0], vec![1]]);
    }

    #[test]
    fn default_parameters_give_sparse_binary_output() {
        let cfg = SpikeEncoderConfig::new(112, 256, LifParams::encoder_default(), 2.0).unwrap();
        let enc = SpikeEncoder::random(cfg, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let inputs: Vec<Vec<f64>> = (0..32).map(|_| (0..112).map(|_| normal.sample(&mut rng)).collect()).collect();
        let out = enc.encode(&inputs).unwrap();
        let total: usize = out.iter().map(Vec::len).sum();
        let ones: usize = out.iter().flatten().filter(|&&s| s == 1).count();
        assert!(out.iter().flatten().all(|&s| s <= 1));
        let sparsity = ones as f64 / total as f64;
        assert!(sparsity > 0.0 && sparsity < 1.0, "firing rate {sparsity}");
    }

    #[test]
    fn rejects_wrong_embedding_width() {
        let cfg = SpikeEncoderConfig::new(4, 3, LifParams::encoder_default(), 2.0).unwrap();
        let enc = SpikeEncoder::random(cfg, 1);
        assert!(matches!(enc.encode(&[vec![0.0; 5]]), Err(SpikeError::DimensionMismatch { .. })));
        assert!(SpikeEncoderConfig::new(0, 3, LifParams::encoder_default(), 2.0).is_err());
        assert!(SpikeEncoderConfig::new(4, 3, LifParams::encoder_default(), 0.0).is_err());
    }
}
