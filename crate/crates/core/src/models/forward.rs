use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{PadMode, Tape, Tensor, VarId};
use crate::corpus::{EncodedSample, PAD_ID};
use crate::error::{Error, Result};

use super::{ModelConfig, ModelHandle, CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// One recorded forward pass over a batch. Parameters enter the tape as
/// leaves, so after `tape.backward` their gradients are available per name.
pub struct ForwardPass {
    pub tape: Tape,
    pub param_ids: BTreeMap<String, VarId>,
    /// Per-sample logit vector ids ([CLASSES]).
    pub logit_ids: Vec<VarId>,
    /// Per-sample embedding matrix ids, for saliency.
    pub embed_ids: Vec<VarId>,
    /// Eval-mode activation captures, per probe name, one tensor per sample.
    pub probes: BTreeMap<String, Vec<Tensor>>,
}

impl ForwardPass {
    pub fn logits(&self) -> Vec<[f64; CLASSES]> {
        self.logit_ids
            .iter()
            .map(|&id| {
                let d = &self.tape.value(id).data;
                [d[0], d[1]]
            })
            .collect()
    }

    pub fn probabilities(&self) -> Vec<[f64; CLASSES]> {
        self.logits()
            .into_iter()
            .map(|l| {
                let m = l[0].max(l[1]);
                let e0 = (l[0] - m).exp();
                let e1 = (l[1] - m).exp();
                [e0 / (e0 + e1), e1 / (e0 + e1)]
            })
            .collect()
    }
}

/// A forward pass extended with the batch's mean cross-entropy.
pub struct BatchLoss {
    pub pass: ForwardPass,
    pub loss_id: VarId,
    pub loss: f64,
}

fn dropout_mask(rng: &mut ChaCha8Rng, len: usize, keep: f64) -> Vec<f64> {
    let scale = 1.0 / keep;
    (0..len)
        .map(|_| if rng.gen_bool(keep) { scale } else { 0.0 })
        .collect()
}

struct Ctx<'a> {
    mode: Mode,
    rng: Option<&'a mut ChaCha8Rng>,
    capture: bool,
}

impl Ctx<'_> {
    fn mask(&mut self, len: usize, keep: f64) -> Result<Option<Vec<f64>>> {
        if self.mode == Mode::Eval || keep >= 1.0 {
            return Ok(None);
        }
        let rng = self.rng.as_deref_mut().ok_or_else(|| {
            Error::Config("train-mode forward with dropout requires an RNG".into())
        })?;
        Ok(Some(dropout_mask(rng, len, keep)))
    }
}

fn maybe_mask(tape: &mut Tape, x: VarId, mask: Option<Vec<f64>>) -> Result<VarId> {
    match mask {
        Some(m) => tape.apply_mask(x, &m),
        None => Ok(x),
    }
}

fn capture(probes: &mut BTreeMap<String, Vec<Tensor>>, ctx: &Ctx, name: &str, t: &Tape, id: VarId) {
    if ctx.capture {
        probes.entry(name.to_string()).or_default().push(t.value(id).clone());
    }
}

/// Run the stacked-LSTM recurrence over timestep input ids. `var_masks`
/// holds one variational mask per layer, applied to h_prev at every step.
#[allow(clippy::too_many_arguments)]
fn run_lstm_stack(
    tape: &mut Tape,
    inputs: &[VarId],
    layers: usize,
    hidden: usize,
    param_ids: &BTreeMap<String, VarId>,
    var_masks: &[Option<Vec<f64>>],
) -> Result<VarId> {
    let mut layer_inputs: Vec<VarId> = inputs.to_vec();
    let mut h_final = None;
    for l in 0..layers {
        let wx = param_ids[&format!("lstm{l}.wx")];
        let wh = param_ids[&format!("lstm{l}.wh")];
        let b = param_ids[&format!("lstm{l}.b")];
        let mut h = tape.leaf(Tensor::zeros(&[hidden]));
        let mut c = tape.leaf(Tensor::zeros(&[hidden]));
        let mut outputs = Vec::with_capacity(layer_inputs.len());
        for &x in &layer_inputs {
            let h_in = maybe_mask(tape, h, var_masks[l].clone())?;
            let hc = tape.lstm_cell(x, h_in, c, wx, wh, b)?;
            h = tape.slice_vec(hc, 0, hidden)?;
            c = tape.slice_vec(hc, hidden, hidden)?;
            outputs.push(h);
        }
        h_final = Some(h);
        layer_inputs = outputs;
    }
    Ok(h_final.expect("layers >= 1"))
}

impl ModelHandle {
    /// Record a forward pass for a batch. Eval mode is deterministic and
    /// captures activation probes; train mode applies dropout from `rng`.
    pub fn forward(
        &self,
        batch: &[EncodedSample],
        mode: Mode,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<ForwardPass> {
        if batch.is_empty() {
            return Err(Error::Precondition("forward on an empty batch".into()));
        }
        let mut tape = Tape::new();
        let mut param_ids = BTreeMap::new();
        for (name, t) in self.params.iter() {
            param_ids.insert(name.clone(), tape.leaf(t.clone()));
        }
        let mut probes: BTreeMap<String, Vec<Tensor>> = BTreeMap::new();
        let mut logit_ids = Vec::with_capacity(batch.len());
        let mut embed_ids = Vec::with_capacity(batch.len());
        let mut ctx = Ctx {
            mode,
            rng: rng.as_deref_mut(),
            capture: mode == Mode::Eval,
        };
        for sample in batch {
            let (logits, embed) = match &self.config {
                ModelConfig::Cnn(c) => {
                    self.cnn_sample(&mut tape, &param_ids, &mut probes, &mut ctx, sample, c)?
                }
                ModelConfig::Lstm(c) => {
                    self.lstm_sample(&mut tape, &param_ids, &mut probes, &mut ctx, sample, c)?
                }
                ModelConfig::CnnLstm(c) => {
                    self.cnn_lstm_sample(&mut tape, &param_ids, &mut probes, &mut ctx, sample, c)?
                }
            };
            logit_ids.push(logits);
            embed_ids.push(embed);
        }
        Ok(ForwardPass { tape, param_ids, logit_ids, embed_ids, probes })
    }

    fn cnn_sample(
        &self,
        tape: &mut Tape,
        param_ids: &BTreeMap<String, VarId>,
        probes: &mut BTreeMap<String, Vec<Tensor>>,
        ctx: &mut Ctx,
        sample: &EncodedSample,
        c: &super::CnnConfig,
    ) -> Result<(VarId, VarId)> {
        // short samples are padded up to the widest filter with PAD
        let wmax = *c.filter_sizes.last().unwrap();
        let take = sample.true_length.max(wmax).min(sample.ids.len());
        let mut ids = sample.ids[..take].to_vec();
        ids.resize(take.max(wmax), PAD_ID);
        let embed = tape.embed_lookup(param_ids["embed"], &ids)?;
        capture(probes, ctx, "embed", tape, embed);
        let mut pooled_parts = Vec::new();
        for &w in &c.filter_sizes {
            let conv = tape.conv1d(
                embed,
                param_ids[&format!("conv{w}.w")],
                param_ids[&format!("conv{w}.b")],
                PadMode::Valid,
            )?;
            let act = tape.relu(conv);
            capture(probes, ctx, &format!("conv{w}"), tape, act);
            pooled_parts.push(tape.max_over_time(act)?);
        }
        let pooled = tape.concat_vec(&pooled_parts)?;
        capture(probes, ctx, "pooled", tape, pooled);
        let mask = ctx.mask(tape.value(pooled).len(), c.keep_prob)?;
        let dropped = maybe_mask(tape, pooled, mask)?;
        let logits = tape.dense(dropped, param_ids["out.w"], param_ids["out.b"])?;
        capture(probes, ctx, "pre_softmax", tape, logits);
        Ok((logits, embed))
    }

    fn lstm_sample(
        &self,
        tape: &mut Tape,
        param_ids: &BTreeMap<String, VarId>,
        probes: &mut BTreeMap<String, Vec<Tensor>>,
        ctx: &mut Ctx,
        sample: &EncodedSample,
        c: &super::LstmConfig,
    ) -> Result<(VarId, VarId)> {
        // PAD steps are skipped entirely
        let ids = &sample.ids[..sample.true_length.max(1)];
        let embed = tape.embed_lookup(param_ids["embed"], ids)?;
        capture(probes, ctx, "embed", tape, embed);
        let mut steps = Vec::with_capacity(ids.len());
        for t in 0..ids.len() {
            steps.push(tape.row_of(embed, t)?);
        }
        let var_masks = vec![None; c.layers];
        let h_final = run_lstm_stack(tape, &steps, c.layers, c.hidden, param_ids, &var_masks)?;
        capture(probes, ctx, "h_final", tape, h_final);
        let mask = ctx.mask(c.hidden, c.keep_prob)?;
        let dropped = maybe_mask(tape, h_final, mask)?;
        let logits = tape.dense(dropped, param_ids["out.w"], param_ids["out.b"])?;
        capture(probes, ctx, "pre_softmax", tape, logits);
        Ok((logits, embed))
    }

    fn cnn_lstm_sample(
        &self,
        tape: &mut Tape,
        param_ids: &BTreeMap<String, VarId>,
        probes: &mut BTreeMap<String, Vec<Tensor>>,
        ctx: &mut Ctx,
        sample: &EncodedSample,
        c: &super::CnnLstmConfig,
    ) -> Result<(VarId, VarId)> {
        let ids = &sample.ids[..sample.true_length.max(1)];
        let embed = tape.embed_lookup(param_ids["embed"], ids)?;
        capture(probes, ctx, "embed", tape, embed);
        // same-padded conv keeps every map at length L so the per-timestep
        // feature concatenation lines up across filter sizes
        let mut maps = Vec::new();
        for &w in &c.filter_sizes {
            let conv = tape.conv1d(
                embed,
                param_ids[&format!("conv{w}.w")],
                param_ids[&format!("conv{w}.b")],
                PadMode::Same,
            )?;
            let act = tape.relu(conv);
            capture(probes, ctx, &format!("conv{w}"), tape, act);
            maps.push(act);
        }
        let features = tape.concat_cols(&maps)?;
        let mut steps = Vec::with_capacity(ids.len());
        for t in 0..ids.len() {
            steps.push(tape.row_of(features, t)?);
        }
        let var_masks = vec![ctx.mask(c.lstm_hidden, c.keep_prob)?];
        let h_final = run_lstm_stack(tape, &steps, 1, c.lstm_hidden, param_ids, &var_masks)?;
        capture(probes, ctx, "h_final", tape, h_final);
        let mask = ctx.mask(c.lstm_hidden, c.keep_prob)?;
        let dropped = maybe_mask(tape, h_final, mask)?;
        let logits = tape.dense(dropped, param_ids["out.w"], param_ids["out.b"])?;
        capture(probes, ctx, "pre_softmax", tape, logits);
        Ok((logits, embed))
    }

    /// Forward plus mean cross-entropy over the batch.
    pub fn batch_loss(
        &self,
        batch: &[EncodedSample],
        mode: Mode,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<BatchLoss> {
        let mut pass = self.forward(batch, mode, rng)?;
        let mut losses = Vec::with_capacity(batch.len());
        for (i, sample) in batch.iter().enumerate() {
            losses.push(
                pass.tape
                    .softmax_xent(pass.logit_ids[i], sample.label.class_index())?,
            );
        }
        let loss_id = pass.tape.mean_of(&losses)?;
        let loss = pass.tape.value(loss_id).data[0];
        Ok(BatchLoss { pass, loss_id, loss })
    }

    /// Eval-mode activation matrix for a registered probe: one row per
    /// batch item.
    pub fn probe_activations(&self, batch: &[EncodedSample], probe_name: &str) -> Result<Tensor> {
        let valid = self.probe_names();
        if !valid.iter().any(|n| n == probe_name) {
            return Err(Error::Lookup(format!(
                "unknown probe `{probe_name}` for {}; valid probes: {}",
                self.arch().as_str(),
                valid.join(", ")
            )));
        }
        let pass = self.forward(batch, Mode::Eval, None)?;
        let captured = &pass.probes[probe_name];
        let n = captured[0].len();
        if captured.iter().any(|t| t.len() != n) {
            return Err(Error::Lookup(format!(
                "probe `{probe_name}` varies in size across samples; use a fixed-size probe \
                 such as `{}` or `pre_softmax`",
                self.default_probe()
            )));
        }
        let mut out = Tensor::zeros(&[captured.len(), n]);
        for (i, t) in captured.iter().enumerate() {
            out.row_mut(i).copy_from_slice(&t.data);
        }
        Ok(out)
    }
}
