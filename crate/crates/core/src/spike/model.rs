//! Desk-scale spiking recurrent sequence model over compound-word tokens.
//!
//! Per step: the seven field embeddings are concatenated, projected and fed
//! through a LIF encoder; a recurrent unit (input from encoder spikes and
//! its own previous spikes) drives a second LIF layer. The type head reads
//! the recurrent spikes; the six attribute heads read a linear mix of the
//! spikes and an embedding of the token type, so attributes are predicted
//! conditioned on the type.

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use super::{lif_backward, lif_forward, LifParams, LifTrace, SpikeError, SpikeFn, Tensor};
use crate::tokenizer::{CompoundToken, Field, TokenType, MAX_BAR_POSITIONS, MAX_BEATS_PER_BAR};

const N_FIELDS: usize = 7;
const EMB: usize = 0;
const ENC_W: usize = 7;
const ENC_B: usize = 8;
const RNN_W_IN: usize = 9;
const RNN_W_REC: usize = 10;
const RNN_B: usize = 11;
const TYPE_EMB: usize = 12;
const DEC_W: usize = 13;
const DEC_B: usize = 14;
/// Head weight for field f is at `HEAD + 2f`, bias at `HEAD + 2f + 1`.
const HEAD: usize = 15;
const N_PARAMS: usize = HEAD + 2 * N_FIELDS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Embedding width per field; the encoder input is seven times this.
    pub emb_dim: usize,
    pub hidden: usize,
    pub encoder_lif: LifParams,
    pub recurrent_lif: LifParams,
    pub surrogate_alpha: f64,
    pub learning_rate: f64,
    /// Truncated BPTT window in steps.
    pub bptt: usize,
    pub clip_norm: f64,
    pub seed: u64,
    /// Grid cells per beat of the token corpus.
    pub resolution: u32,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            emb_dim: 16,
            hidden: 256,
            encoder_lif: LifParams::encoder_default(),
            recurrent_lif: LifParams::recurrent_default(),
            surrogate_alpha: 2.0,
            learning_rate: 0.5,
            bptt: 16,
            clip_norm: 1.0,
            seed: 0,
            resolution: 4,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), SpikeError> {
        if self.emb_dim == 0 || self.hidden == 0 || self.bptt == 0 {
            return Err(SpikeError::InvalidParams("emb_dim, hidden and bptt must be positive".into()));
        }
        if !(self.surrogate_alpha > 0.0) || !(self.learning_rate > 0.0) || !(self.clip_norm > 0.0) {
            return Err(SpikeError::InvalidParams("alpha, learning rate and clip norm must be positive".into()));
        }
        if !crate::midi::VALID_RESOLUTIONS.contains(&self.resolution) {
            return Err(SpikeError::InvalidParams(format!("resolution {}", self.resolution)));
        }
        LifParams::new(self.encoder_lif.tau_m, self.encoder_lif.v_th, self.encoder_lif.v_reset, self.encoder_lif.r)?;
        LifParams::new(
            self.recurrent_lif.tau_m,
            self.recurrent_lif.v_th,
            self.recurrent_lif.v_reset,
            self.recurrent_lif.r,
        )?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToySrnn {
    pub config: ModelConfig,
    pub params: Vec<Tensor>,
}

#[derive(Debug, Clone)]
struct State {
    v_enc: Vec<f64>,
    v_rec: Vec<f64>,
    z: Vec<f64>,
}

struct StepCache {
    input: CompoundToken,
    emb: Vec<f64>,
    enc: LifTrace,
    rec: LifTrace,
    z_prev: Vec<f64>,
    dec_in: Vec<f64>,
    type_target: usize,
    probs: Vec<Vec<f64>>,
    target: [u16; 7],
}

/// Training result: the updated model and the mean per-step loss before
/// training followed by one value per epoch.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ToySrnn,
    pub loss_curve: Vec<f64>,
}

fn softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut out: Vec<f64> = logits.iter().map(|&l| ((l - m) / temperature).exp()).collect();
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= s);
    out
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

impl ToySrnn {
    pub fn new(config: ModelConfig) -> Result<Self, SpikeError> {
        config.validate()?;
        let (e, h) = (config.emb_dim, config.hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut gauss = |t: &mut Tensor, std: f64| {
            let d = Normal::new(0.0, std).unwrap();
            t.data.iter_mut().for_each(|x| *x = d.sample(&mut rng));
        };
        let mut params = Vec::with_capacity(N_PARAMS);
        for f in Field::ALL {
            let mut t = Tensor::zeros(format!("emb.{}", f.name()), &[f.size(), e]);
            gauss(&mut t, 1.0);
            params.push(t);
        }
        let mut enc_w = Tensor::zeros("enc.w", &[h, N_FIELDS * e]);
        gauss(&mut enc_w, 1.5 / ((N_FIELDS * e) as f64).sqrt());
        params.push(enc_w);
        params.push(Tensor::zeros("enc.b", &[h]));
        let mut w_in = Tensor::zeros("rnn.w_in", &[h, h]);
        gauss(&mut w_in, 2.0 / (h as f64).sqrt());
        params.push(w_in);
        let mut w_rec = Tensor::zeros("rnn.w_rec", &[h, h]);
        gauss(&mut w_rec, 1.0 / (h as f64).sqrt());
        params.push(w_rec);
        params.push(Tensor::zeros("rnn.b", &[h]));
        let mut type_emb = Tensor::zeros("dec.type_emb", &[Field::Type.size(), e]);
        gauss(&mut type_emb, 1.0);
        params.push(type_emb);
        let mut dec_w = Tensor::zeros("dec.w", &[h, e + h]);
        gauss(&mut dec_w, 1.0 / ((e + h) as f64).sqrt());
        params.push(dec_w);
        params.push(Tensor::zeros("dec.b", &[h]));
        for f in Field::ALL {
            let mut w = Tensor::zeros(format!("head.{}.w", f.name()), &[f.size(), h]);
            gauss(&mut w, 1.0 / (h as f64).sqrt());
            params.push(w);
            params.push(Tensor::zeros(format!("head.{}.b", f.name()), &[f.size()]));
        }
        Ok(Self { config, params })
    }

    /// Rebuilds a model from named tensors (checkpoint loading).
    pub fn from_parts(config: ModelConfig, params: Vec<Tensor>) -> Result<Self, SpikeError> {
        config.validate()?;
        let reference = Self::new(ModelConfig { seed: 0, ..config })?;
        if params.len() != reference.params.len() {
            return Err(SpikeError::Checkpoint(format!("expected {} tensors, got {}", reference.params.len(), params.len())));
        }
        for (a, b) in params.iter().zip(&reference.params) {
            if a.name != b.name || a.dims != b.dims {
                return Err(SpikeError::Checkpoint(format!("tensor {} has unexpected shape {:?}", a.name, a.dims)));
            }
            if !a.is_finite() {
                return Err(SpikeError::Checkpoint(format!("tensor {} contains non-finite values", a.name)));
            }
        }
        Ok(Self { config, params })
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|t| t.data.len()).sum()
    }

    fn spike_fn(&self, smooth: bool) -> SpikeFn {
        let f = SpikeFn::Heaviside { alpha: self.config.surrogate_alpha };
        if smooth {
            f.smoothed()
        } else {
            f
        }
    }

    fn fresh_state(&self) -> State {
        let h = self.config.hidden;
        State {
            v_enc: vec![self.config.encoder_lif.v_reset; h],
            v_rec: vec![self.config.recurrent_lif.v_reset; h],
            z: vec![0.0; h],
        }
    }

    fn check_token(&self, t: &CompoundToken) -> Result<(), SpikeError> {
        for f in Field::ALL {
            if t.get(f) as usize >= f.size() {
                return Err(SpikeError::InvalidToken(format!("{} index {} out of range", f, t.get(f))));
            }
        }
        Ok(())
    }

    /// Encoder and recurrent layer for one input token.
    fn core_step(&self, st: &mut State, x: &CompoundToken, f: SpikeFn) -> (Vec<f64>, LifTrace, LifTrace, Vec<f64>) {
        let e = self.config.emb_dim;
        let mut emb = Vec::with_capacity(N_FIELDS * e);
        for (k, idx) in x.to_array().iter().enumerate() {
            emb.extend_from_slice(self.params[EMB + k].row(*idx as usize));
        }
        let mut a = self.params[ENC_B].data.clone();
        self.params[ENC_W].matvec_acc(&emb, &mut a);
        let enc = lif_forward(&mut st.v_enc, &a, &self.config.encoder_lif, f);
        let mut g = self.params[RNN_B].data.clone();
        self.params[RNN_W_IN].matvec_acc(&enc.s, &mut g);
        self.params[RNN_W_REC].matvec_acc(&st.z, &mut g);
        let rec = lif_forward(&mut st.v_rec, &g, &self.config.recurrent_lif, f);
        let z_prev = std::mem::replace(&mut st.z, rec.s.clone());
        (emb, enc, rec, z_prev)
    }

    fn type_logits(&self, z: &[f64]) -> Vec<f64> {
        let mut l = self.params[HEAD + 1].data.clone();
        self.params[HEAD].matvec_acc(z, &mut l);
        l
    }

    /// Decoder input `[type embedding; z]` and its projection.
    fn decoder(&self, z: &[f64], ttype: usize) -> (Vec<f64>, Vec<f64>) {
        let mut dec_in = self.params[TYPE_EMB].row(ttype).to_vec();
        dec_in.extend_from_slice(z);
        let mut y = self.params[DEC_B].data.clone();
        self.params[DEC_W].matvec_acc(&dec_in, &mut y);
        (dec_in, y)
    }

    fn attr_logits(&self, y: &[f64], field: usize) -> Vec<f64> {
        let mut l = self.params[HEAD + 2 * field + 1].data.clone();
        self.params[HEAD + 2 * field].matvec_acc(y, &mut l);
        l
    }

    /// Mean per-step loss of one chunk and, when `grads` is given, its
    /// gradient accumulated into `grads`.
    fn chunk(
        &self,
        st: &mut State,
        inputs: &[CompoundToken],
        targets: &[CompoundToken],
        f: SpikeFn,
        grads: Option<&mut Vec<Tensor>>,
    ) -> f64 {
        let n = inputs.len() as f64;
        let mut caches: Vec<StepCache> = Vec::with_capacity(inputs.len());
        let mut loss = 0.0;
        for (x, tgt) in inputs.iter().zip(targets) {
            let (emb, enc, rec, z_prev) = self.core_step(st, x, f);
            let target = tgt.to_array();
            let mut probs = Vec::with_capacity(N_FIELDS);
            let p_type = softmax(&self.type_logits(&rec.s), 1.0);
            loss -= p_type[target[0] as usize].ln();
            probs.push(p_type);
            let type_target = target[0] as usize;
            let (dec_in, y) = self.decoder(&rec.s, type_target);
            for k in 1..N_FIELDS {
                let p = softmax(&self.attr_logits(&y, k), 1.0);
                loss -= p[target[k] as usize].ln();
                probs.push(p);
            }
            caches.push(StepCache { input: *x, emb, enc, rec, z_prev, dec_in, type_target, probs, target });
        }
        let Some(grads) = grads else {
            return loss / n;
        };

        let h = self.config.hidden;
        let e = self.config.emb_dim;
        let mut dv_enc = vec![0.0; h];
        let mut dv_rec = vec![0.0; h];
        let mut dz_next = vec![0.0; h];
        for c in caches.iter().rev() {
            let z = &c.rec.s;
            let mut dz = std::mem::replace(&mut dz_next, vec![0.0; h]);
            // Type head.
            let mut dl: Vec<f64> = c.probs[0].iter().map(|p| p / n).collect();
            dl[c.target[0] as usize] -= 1.0 / n;
            grads[HEAD].outer_acc(&dl, z);
            grads[HEAD + 1].add_acc(&dl);
            self.params[HEAD].matvec_t_acc(&dl, &mut dz);
            // Attribute heads through the decoder projection.
            let mut dy = vec![0.0; h];
            // Recompute y for the weight gradient.
            let mut y = self.params[DEC_B].data.clone();
            self.params[DEC_W].matvec_acc(&c.dec_in, &mut y);
            for k in 1..N_FIELDS {
                let mut dl: Vec<f64> = c.probs[k].iter().map(|p| p / n).collect();
                dl[c.target[k] as usize] -= 1.0 / n;
                grads[HEAD + 2 * k].outer_acc(&dl, &y);
                grads[HEAD + 2 * k + 1].add_acc(&dl);
                self.params[HEAD + 2 * k].matvec_t_acc(&dl, &mut dy);
            }
            grads[DEC_W].outer_acc(&dy, &c.dec_in);
            grads[DEC_B].add_acc(&dy);
            let mut d_dec_in = vec![0.0; e + h];
            self.params[DEC_W].matvec_t_acc(&dy, &mut d_dec_in);
            let row = grads[TYPE_EMB].row_mut(c.type_target);
            for (g, d) in row.iter_mut().zip(&d_dec_in[..e]) {
                *g += d;
            }
            for (a, b) in dz.iter_mut().zip(&d_dec_in[e..]) {
                *a += b;
            }
            // Recurrent LIF layer.
            let dg = lif_backward(&c.rec, &mut dv_rec, &dz, &self.config.recurrent_lif, f);
            grads[RNN_W_IN].outer_acc(&dg, &c.enc.s);
            grads[RNN_W_REC].outer_acc(&dg, &c.z_prev);
            grads[RNN_B].add_acc(&dg);
            self.params[RNN_W_REC].matvec_t_acc(&dg, &mut dz_next);
            let mut ds = vec![0.0; h];
            self.params[RNN_W_IN].matvec_t_acc(&dg, &mut ds);
            // Encoder LIF layer and projection.
            let da = lif_backward(&c.enc, &mut dv_enc, &ds, &self.config.encoder_lif, f);
            grads[ENC_W].outer_acc(&da, &c.emb);
            grads[ENC_B].add_acc(&da);
            let mut demb = vec![0.0; N_FIELDS * e];
            self.params[ENC_W].matvec_t_acc(&da, &mut demb);
            for (k, idx) in c.input.to_array().iter().enumerate() {
                let row = grads[EMB + k].row_mut(*idx as usize);
                for (g, d) in row.iter_mut().zip(&demb[k * e..(k + 1) * e]) {
                    *g += d;
                }
            }
        }
        loss / n
    }

    pub fn zero_grads(&self) -> Vec<Tensor> {
        self.params.iter().map(|p| Tensor::zeros(p.name.clone(), &p.dims)).collect()
    }

    /// Loss and gradient of a whole sequence as one BPTT chunk.
    /// `smooth` replaces the hard threshold with the ATan primitive.
    pub fn loss_and_grad(&self, seq: &[CompoundToken], smooth: bool) -> (f64, Vec<Tensor>) {
        let mut grads = self.zero_grads();
        let mut st = self.fresh_state();
        let loss = self.chunk(&mut st, &seq[..seq.len() - 1], &seq[1..], self.spike_fn(smooth), Some(&mut grads));
        (loss, grads)
    }

    pub fn sequence_loss(&self, seq: &[CompoundToken], smooth: bool) -> f64 {
        let mut st = self.fresh_state();
        self.chunk(&mut st, &seq[..seq.len() - 1], &seq[1..], self.spike_fn(smooth), None)
    }

    /// Mean next-token loss over all steps of a corpus.
    pub fn corpus_loss(&self, corpus: &[Vec<CompoundToken>]) -> f64 {
        let mut total = 0.0;
        let mut steps = 0usize;
        for seq in corpus.iter().filter(|s| s.len() >= 2) {
            let n = seq.len() - 1;
            total += self.sequence_loss(seq, false) * n as f64;
            steps += n;
        }
        total / steps.max(1) as f64
    }

    /// Fraction of (step, field) next-token predictions that are correct
    /// under greedy decoding with the predicted type.
    pub fn field_accuracy(&self, corpus: &[Vec<CompoundToken>]) -> f64 {
        let (mut hit, mut total) = (0usize, 0usize);
        let f = self.spike_fn(false);
        for seq in corpus {
            let mut st = self.fresh_state();
            for w in seq.windows(2) {
                let (_, _, rec, _) = self.core_step(&mut st, &w[0], f);
                let target = w[1].to_array();
                let ttype = argmax(&self.type_logits(&rec.s));
                hit += usize::from(ttype == target[0] as usize);
                let (_, y) = self.decoder(&rec.s, ttype);
                for k in 1..N_FIELDS {
                    hit += usize::from(argmax(&self.attr_logits(&y, k)) == target[k] as usize);
                }
                total += N_FIELDS;
            }
        }
        hit as f64 / total.max(1) as f64
    }

    fn sgd_step(&mut self, grads: &[Tensor]) {
        let norm = grads.iter().flat_map(|g| g.data.iter()).map(|x| x * x).sum::<f64>().sqrt();
        let scale = if norm > self.config.clip_norm { self.config.clip_norm / norm } else { 1.0 };
        let lr = self.config.learning_rate * scale;
        for (p, g) in self.params.iter_mut().zip(grads) {
            for (w, d) in p.data.iter_mut().zip(&g.data) {
                *w -= lr * d;
            }
        }
    }

    /// Samples a continuation of `prompt`. The result is the prompt
    /// followed by at most `length` generated tokens ending in EOS; field
    /// combinations that the tokenizer would reject are masked out.
    pub fn generate(
        &self,
        prompt: &[CompoundToken],
        length: usize,
        temperature: f64,
        seed: u64,
    ) -> Result<Vec<CompoundToken>, SpikeError> {
        if length == 0 || !(temperature > 0.0) {
            return Err(SpikeError::InvalidParams("length must be >= 1 and temperature > 0".into()));
        }
        if prompt.first().and_then(CompoundToken::kind) != Some(TokenType::Metric) {
            return Err(SpikeError::InvalidPrompt("prompt must start with a Metric token".into()));
        }
        let res = self.config.resolution as usize;
        let mut metric_pos = 0usize;
        for t in prompt {
            self.check_token(t)?;
            if !t.is_valid() || t.kind() == Some(TokenType::Eos) {
                return Err(SpikeError::InvalidPrompt(format!("invalid prompt token {t:?}")));
            }
            if t.kind() == Some(TokenType::Metric) {
                metric_pos = t.bar_beat.saturating_sub(1) as usize;
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = self.spike_fn(false);
        let mut st = self.fresh_state();
        let mut out = prompt.to_vec();
        let mut rec_s = Vec::new();
        for t in prompt {
            rec_s = self.core_step(&mut st, t, f).2.s;
        }
        let sample = |logits: &[f64], allowed: &dyn Fn(usize) -> bool, rng: &mut ChaCha8Rng| -> usize {
            let masked: Vec<f64> =
                logits.iter().enumerate().map(|(i, &l)| if allowed(i) { l } else { f64::NEG_INFINITY }).collect();
            let p = softmax(&masked, temperature);
            if p.iter().any(|x| !x.is_finite()) || p.iter().sum::<f64>() <= 0.0 {
                return argmax(&masked);
            }
            WeightedIndex::new(&p).map(|d| d.sample(rng)).unwrap_or_else(|_| argmax(&masked))
        };

        for step in 0..length {
            let last = step + 1 == length;
            let ttype = if last {
                TokenType::Eos.index() as usize
            } else {
                sample(&self.type_logits(&rec_s), &|i| i != 0, &mut rng)
            };
            let (_, y) = self.decoder(&rec_s, ttype);
            let mut tok = CompoundToken { ttype: ttype as u16, ..CompoundToken::default() };
            match TokenType::from_index(ttype as u16) {
                Some(TokenType::Metric) => {
                    tok.tempo = sample(&self.attr_logits(&y, Field::Tempo.position()), &|i| i != 0, &mut rng) as u16;
                    tok.chord = sample(&self.attr_logits(&y, Field::Chord.position()), &|_| true, &mut rng) as u16;
                    let beat_start = |i: usize| i > 0 && (i - 1) % res == 0 && (i - 1) / res < MAX_BEATS_PER_BAR;
                    tok.bar_beat = sample(&self.attr_logits(&y, Field::BarBeat.position()), &beat_start, &mut rng) as u16;
                    metric_pos = tok.bar_beat as usize - 1;
                }
                Some(TokenType::Note) => {
                    let lo = metric_pos + 1;
                    let hi = (metric_pos + res).min(MAX_BAR_POSITIONS);
                    let in_beat = |i: usize| i >= lo && i <= hi;
                    tok.bar_beat = sample(&self.attr_logits(&y, Field::BarBeat.position()), &in_beat, &mut rng) as u16;
                    tok.pitch = sample(&self.attr_logits(&y, Field::Pitch.position()), &|i| i != 0, &mut rng) as u16;
                    tok.duration = sample(&self.attr_logits(&y, Field::Duration.position()), &|i| i != 0, &mut rng) as u16;
                    tok.velocity = sample(&self.attr_logits(&y, Field::Velocity.position()), &|i| i != 0, &mut rng) as u16;
                }
                _ => {
                    out.push(CompoundToken::eos());
                    break;
                }
            }
            debug_assert!(tok.is_valid());
            out.push(tok);
            rec_s = self.core_step(&mut st, &tok, f).2.s;
        }
        Ok(out)
    }
}

/// Trains with truncated BPTT and clipped SGD. Deterministic for a given
/// model and corpus.
pub fn train_toy(model: &ToySrnn, corpus: &[Vec<CompoundToken>], epochs: usize) -> Result<TrainOutcome, SpikeError> {
    if corpus.iter().all(|s| s.len() < 2) {
        return Err(SpikeError::EmptyCorpus);
    }
    for t in corpus.iter().flatten() {
        model.check_token(t)?;
    }
    let mut model = model.clone();
    if epochs == 0 {
        return Ok(TrainOutcome { loss_curve: vec![model.corpus_loss(corpus)], model });
    }
    let f = model.spike_fn(false);
    let window = model.config.bptt;
    let mut curve = vec![model.corpus_loss(corpus)];
    for epoch in 0..epochs {
        for seq in corpus.iter().filter(|s| s.len() >= 2) {
            let mut st = model.fresh_state();
            let steps = seq.len() - 1;
            let mut start = 0;
            while start < steps {
                let end = (start + window).min(steps);
                let mut grads = model.zero_grads();
                let loss = model.chunk(&mut st, &seq[start..end], &seq[start + 1..end + 1], f, Some(&mut grads));
                if !loss.is_finite() {
                    return Err(SpikeError::NonFiniteLoss { epoch });
                }
                model.sgd_step(&grads);
                start = end;
            }
        }
        let loss = model.corpus_loss(corpus);
        if !loss.is_finite() || !model.params.iter().all(Tensor::is_finite) {
            return Err(SpikeError::NonFiniteLoss { epoch });
        }
        curve.push(loss);
    }
    Ok(TrainOutcome { model, loss_curve: curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn tiny_config() -> ModelConfig {
        ModelConfig { emb_dim: 2, hidden: 4, seed: 3, ..ModelConfig::default() }
    }

    fn seq() -> Vec<CompoundToken> {
        vec![
            CompoundToken::metric(0, Some(9), None),
            CompoundToken::note(0, 60, 3, 5),
            CompoundToken::note(2, 64, 1, 4),
            CompoundToken::metric(4, Some(9), Some(0)),
            CompoundToken::note(5, 67, 3, 5),
            CompoundToken::eos(),
        ]
    }

    #[test]
    fn zero_epochs_leaves_model_unchanged() {
        let m = ToySrnn::new(tiny_config()).unwrap();
        let out = train_toy(&m, &[seq()], 0).unwrap();
        assert_eq!(out.model, m);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let m = ToySrnn::new(tiny_config()).unwrap();
        let s = seq();
        let (_, grads) = m.loss_and_grad(&s, true);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-5;
        let mut checked = 0;
        for (ti, g) in grads.iter().enumerate() {
            // Every entry with a non-vanishing gradient in small tensors,
            // a random sample in large ones.
            let picks: Vec<usize> = if g.data.len() <= 64 {
                (0..g.data.len()).collect()
            } else {
                let nz: Vec<usize> = (0..g.data.len()).filter(|&i| g.data[i] != 0.0).collect();
                (0..16.min(nz.len())).map(|_| nz[rng.gen_range(0..nz.len())]).collect()
            };
            for i in picks {
                let mut plus = m.clone();
                plus.params[ti].data[i] += h;
                let mut minus = m.clone();
                minus.params[ti].data[i] -= h;
                let fd = (plus.sequence_loss(&s, true) - minus.sequence_loss(&s, true)) / (2.0 * h);
                let an = g.data[i];
                let scale = an.abs().max(fd.abs());
                if scale < 1e-8 {
                    continue;
                }
                assert!((an - fd).abs() / scale < 1e-4, "{}[{i}]: analytic {an} vs fd {fd}", g.name);
                checked += 1;
            }
        }
        assert!(checked > 100, "only {checked} entries checked");
    }

    #[test]
    fn generate_is_deterministic_and_valid() {
        let m = ToySrnn::new(tiny_config()).unwrap();
        let a = m.generate(&seq()[..1], 40, 1.0, 9).unwrap();
        let b = m.generate(&seq()[..1], 40, 1.0, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(CompoundToken::is_valid));
        assert_eq!(a.last().unwrap().kind(), Some(TokenType::Eos));
        assert!(m.generate(&[CompoundToken::note(0, 60, 1, 1)], 4, 1.0, 0).is_err());
        assert!(m.generate(&seq()[..1], 0, 1.0, 0).is_err());
        assert!(m.generate(&seq()[..1], 4, 0.0, 0).is_err());
    }
}
