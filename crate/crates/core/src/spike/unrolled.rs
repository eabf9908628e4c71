//! Small fully-spiking recurrent net with a squared-error readout, used to
//! check surrogate gradients end to end.

use rand::Rng;

use super::{lif_backward, lif_forward, LifParams, LifTrace, SpikeFn, Tensor};

#[derive(Debug, Clone)]
pub struct RecurrentLifNet {
    pub lif: LifParams,
    pub spike_fn: SpikeFn,
    /// `w_in` (n×m), `w_rec` (n×n), `bias` (n), `w_out` (1×n).
    pub params: Vec<Tensor>,
}

impl RecurrentLifNet {
    pub fn random<R: Rng>(n: usize, m: usize, lif: LifParams, spike_fn: SpikeFn, rng: &mut R) -> Self {
        let mut params = vec![
            Tensor::zeros("w_in", &[n, m]),
            Tensor::zeros("w_rec", &[n, n]),
            Tensor::zeros("bias", &[n]),
            Tensor::zeros("w_out", &[1, n]),
        ];
        for t in &mut params {
            t.data.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        }
        Self { lif, spike_fn, params }
    }

    fn n(&self) -> usize {
        self.params[0].rows()
    }

    /// `0.5 Σ_t (w_out · s_t − y_t)²` and the per-parameter gradients.
    pub fn loss_and_grad(&self, inputs: &[Vec<f64>], targets: &[f64]) -> (f64, Vec<Tensor>) {
        let n = self.n();
        let [w_in, w_rec, bias, w_out] = [&self.params[0], &self.params[1], &self.params[2], &self.params[3]];
        let mut v = vec![self.lif.v_reset; n];
        let mut s_prev = vec![0.0; n];
        let mut traces: Vec<(LifTrace, Vec<f64>)> = Vec::new();
        let mut errs = Vec::new();
        let mut loss = 0.0;
        for (x, y) in inputs.iter().zip(targets) {
            let mut cur = bias.data.clone();
            w_in.matvec_acc(x, &mut cur);
            w_rec.matvec_acc(&s_prev, &mut cur);
            let tr = lif_forward(&mut v, &cur, &self.lif, self.spike_fn);
            let out: f64 = w_out.data.iter().zip(&tr.s).map(|(a, b)| a * b).sum();
            let e = out - y;
            loss += 0.5 * e * e;
            errs.push(e);
            let s = tr.s.clone();
            traces.push((tr, std::mem::replace(&mut s_prev, s)));
        }

        let mut grads: Vec<Tensor> = self.params.iter().map(|p| Tensor::zeros(p.name.clone(), &p.dims)).collect();
        let mut dv = vec![0.0; n];
        let mut ds_next = vec![0.0; n];
        for t in (0..traces.len()).rev() {
            let (tr, s_prev) = &traces[t];
            let e = errs[t];
            grads[3].outer_acc(&[e], &tr.s);
            let mut ds: Vec<f64> = w_out.data.iter().map(|w| w * e).collect();
            for (a, b) in ds.iter_mut().zip(&ds_next) {
                *a += b;
            }
            let dcur = lif_backward(tr, &mut dv, &ds, &self.lif, self.spike_fn);
            grads[0].outer_acc(&dcur, &inputs[t]);
            grads[1].outer_acc(&dcur, s_prev);
            grads[2].add_acc(&dcur);
            ds_next = vec![0.0; n];
            w_rec.matvec_t_acc(&dcur, &mut ds_next);
        }
        (loss, grads)
    }

    pub fn loss(&self, inputs: &[Vec<f64>], targets: &[f64]) -> f64 {
        self.loss_and_grad(inputs, targets).0
    }
}
