//! The ordinal embedding neural network (OENN).
//!
//! Items carry no features, so each item enters the network as the binary
//! code of its index. One embedding network (EmbNet) — three
//! fully-connected ReLU hidden layers of equal width plus a linear output
//! layer — maps a code to a d-dimensional point. A triplet is scored by
//! running its three items through the *same* parameters and applying the
//! squared-distance hinge loss with margin 1, averaged over the batch.
//!
//! Out-of-sample extension trains a freshly initialized EmbNet on mixed
//! triplets while the original network stays frozen: branches that receive
//! training items evaluate the frozen network, branches that receive new
//! items evaluate (and backpropagate through) the new one.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::eval::triplet_error_coords;
use crate::optim::{adam_update, convergence_monitor, convergence_subset, ConvergenceDecision, TrainResult};
use crate::rng::seed_stream;
use crate::types::{Embedding, Triplet, TripletSet, OENN_BATCH_CAP};
use crate::{Error, Result};

/// Hidden width default: `max(120, ceil(2 d ln n))`.
pub fn default_width(n: usize, d: usize) -> usize {
    120usize.max((2.0 * d as f64 * (n as f64).ln()).ceil() as usize)
}

/// Input-code length default: `ceil(log2 n)`, minimum 1.
pub fn default_encoding_length(n: usize) -> usize {
    if n <= 2 {
        1
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// OENN training configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct OennConfig {
    pub n: usize,
    pub d: usize,
    pub width: usize,
    pub encoding_length: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl OennConfig {
    pub fn new(n: usize, d: usize, seed: u64) -> Self {
        Self {
            n,
            d,
            width: default_width(n, d),
            encoding_length: default_encoding_length(n),
            learning_rate: 0.005,
            batch_size: OENN_BATCH_CAP,
            max_epochs: 500,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.d < 1 {
            return Err(Error::InvalidConfig("OENN needs n >= 1 and d >= 1".into()));
        }
        if self.width < self.d {
            return Err(Error::InvalidConfig(format!(
                "width {} below embedding dimension {}",
                self.width, self.d
            )));
        }
        if self.encoding_length < default_encoding_length(self.n) {
            return Err(Error::InvalidConfig(format!(
                "encoding length {} cannot address {} items",
                self.encoding_length, self.n
            )));
        }
        if !(self.learning_rate > 0.0) || self.batch_size == 0 {
            return Err(Error::InvalidConfig("learning rate and batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Most-significant-bit-first binary code of `index`, zero-padded to
/// `length` entries of 0.0/1.0.
pub fn binary_encode(index: usize, length: usize) -> Result<Vec<f64>> {
    if length == 0 {
        return Err(Error::InvalidConfig("encoding length must be >= 1".into()));
    }
    if length < usize::BITS as usize && index >= (1usize << length) {
        return Err(Error::IndexOutOfRange {
            index,
            len: 1usize << length,
        });
    }
    Ok((0..length)
        .map(|bit| f64::from((index >> (length - 1 - bit)) & 1 == 1))
        .collect())
}

/// EmbNet parameters in one flat buffer: `w1 (width x enc), b1, w2
/// (width x width), b2, w3 (width x width), b3, w4 (d x width), b4`, all
/// weight blocks row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbNetParams {
    encoding_length: usize,
    width: usize,
    d: usize,
    data: Vec<f64>,
}

impl EmbNetParams {
    fn layout(encoding_length: usize, width: usize, d: usize) -> [usize; 8] {
        [
            width * encoding_length,
            width,
            width * width,
            width,
            width * width,
            width,
            d * width,
            d,
        ]
    }

    pub fn param_count(encoding_length: usize, width: usize, d: usize) -> usize {
        Self::layout(encoding_length, width, d).iter().sum()
    }

    /// Seeded initialization, uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`
    /// per layer, sampled in buffer order.
    pub fn init(encoding_length: usize, width: usize, d: usize, rng: &mut impl rand::Rng) -> Self {
        let sizes = Self::layout(encoding_length, width, d);
        let fan_in = [
            encoding_length,
            encoding_length,
            width,
            width,
            width,
            width,
            width,
            width,
        ];
        let mut data = Vec::with_capacity(sizes.iter().sum());
        for (size, fan) in sizes.iter().zip(fan_in) {
            let bound = 1.0 / (fan as f64).sqrt();
            for _ in 0..*size {
                data.push(rng.gen_range(-bound..=bound));
            }
        }
        Self {
            encoding_length,
            width,
            d,
            data,
        }
    }

    pub fn from_data(encoding_length: usize, width: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        let expected = Self::param_count(encoding_length, width, d);
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "EmbNet needs {expected} parameters, got {}",
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidValue("EmbNet parameters must be finite".into()));
        }
        Ok(Self {
            encoding_length,
            width,
            d,
            data,
        })
    }

    pub fn encoding_length(&self) -> usize {
        self.encoding_length
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// The eight parameter blocks in buffer order:
    /// `[w1, b1, w2, b2, w3, b3, w4, b4]`.
    pub fn blocks(&self) -> [&[f64]; 8] {
        let sizes = Self::layout(self.encoding_length, self.width, self.d);
        let mut out: [&[f64]; 8] = [&[]; 8];
        let mut offset = 0;
        for (slot, size) in out.iter_mut().zip(sizes) {
            *slot = &self.data[offset..offset + size];
            offset += size;
        }
        out
    }
}

/// Pre-ReLU inputs are recoverable from the post-activation values, so the
/// cache keeps the input, the three hidden activations, and the output.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub input: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub h3: Vec<f64>,
    pub output: Vec<f64>,
}

fn affine(weights: &[f64], bias: &[f64], input: &[f64], out: &mut [f64]) {
    let cols = input.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &weights[r * cols..(r + 1) * cols];
        let mut acc = bias[r];
        for (w, x) in row.iter().zip(input) {
            acc += w * x;
        }
        *o = acc;
    }
}

fn relu_inplace(v: &mut [f64]) {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Forward pass of one input code through the network, keeping the
/// activations needed for backpropagation.
pub fn embnet_forward(params: &EmbNetParams, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
    if input.len() != params.encoding_length {
        return Err(Error::ShapeMismatch(format!(
            "input length {} != encoding length {}",
            input.len(),
            params.encoding_length
        )));
    }
    let [w1, b1, w2, b2, w3, b3, w4, b4] = params.blocks();
    let width = params.width;
    let mut h1 = vec![0.0; width];
    affine(w1, b1, input, &mut h1);
    relu_inplace(&mut h1);
    let mut h2 = vec![0.0; width];
    affine(w2, b2, &h1, &mut h2);
    relu_inplace(&mut h2);
    let mut h3 = vec![0.0; width];
    affine(w3, b3, &h2, &mut h3);
    relu_inplace(&mut h3);
    let mut output = vec![0.0; params.d];
    affine(w4, b4, &h3, &mut output);
    let cache = ForwardCache {
        input: input.to_vec(),
        h1,
        h2,
        h3,
        output: output.clone(),
    };
    Ok((output, cache))
}

/// `W^T dz` accumulated column-contiguously, then masked by the ReLU
/// subgradient (0 at 0).
fn backprop_hidden(weights: &[f64], dz_next: &[f64], activations: &[f64], dz_out: &mut [f64]) {
    dz_out.iter_mut().for_each(|v| *v = 0.0);
    let cols = activations.len();
    for (r, &s) in dz_next.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        let row = &weights[r * cols..(r + 1) * cols];
        for (o, w) in dz_out.iter_mut().zip(row) {
            *o += s * w;
        }
    }
    for (o, &h) in dz_out.iter_mut().zip(activations) {
        if h <= 0.0 {
            *o = 0.0;
        }
    }
}

fn accumulate_layer_grads(grad: &mut [f64], offset_w: usize, offset_b: usize, dz: &[f64], input: &[f64]) {
    let cols = input.len();
    for (r, &s) in dz.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        let row = &mut grad[offset_w + r * cols..offset_w + (r + 1) * cols];
        for (g, x) in row.iter_mut().zip(input) {
            *g += s * x;
        }
        grad[offset_b + r] += s;
    }
}

/// Backpropagate `d loss / d output` of one item into the parameter
/// gradient buffer.
fn backward_into(params: &EmbNetParams, cache: &ForwardCache, dy: &[f64], grad: &mut [f64]) {
    let width = params.width;
    let enc = params.encoding_length;
    let sizes = EmbNetParams::layout(enc, width, params.d);
    let mut offsets = [0usize; 8];
    let mut acc = 0;
    for (o, s) in offsets.iter_mut().zip(sizes) {
        *o = acc;
        acc += s;
    }
    let [w1o, b1o, w2o, b2o, w3o, b3o, w4o, b4o] = offsets;
    let [_, _, w2, _, w3, _, w4, _] = params.blocks();

    accumulate_layer_grads(grad, w4o, b4o, dy, &cache.h3);
    let mut dz3 = vec![0.0; width];
    backprop_hidden(w4, dy, &cache.h3, &mut dz3);
    accumulate_layer_grads(grad, w3o, b3o, &dz3, &cache.h2);
    let mut dz2 = vec![0.0; width];
    backprop_hidden(w3, &dz3, &cache.h2, &mut dz2);
    accumulate_layer_grads(grad, w2o, b2o, &dz2, &cache.h1);
    let mut dz1 = vec![0.0; width];
    backprop_hidden(w2, &dz2, &cache.h1, &mut dz1);
    accumulate_layer_grads(grad, w1o, b1o, &dz1, &cache.input);
}

fn chunk_len(total: usize) -> usize {
    // A fixed chunk count keeps parallel reductions deterministic
    // regardless of thread count.
    total.div_ceil(16).max(1)
}

/// Forward every distinct item of `items` in parallel, deterministic
/// ordering.
fn forward_items(params: &EmbNetParams, items: &[usize], enc: usize) -> Result<Vec<ForwardCache>> {
    let chunks: Vec<Result<Vec<ForwardCache>>> = items
        .par_chunks(chunk_len(items.len()))
        .map(|chunk| {
            chunk
                .iter()
                .map(|&item| {
                    let code = binary_encode(item, enc)?;
                    Ok(embnet_forward(params, &code)?.1)
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(items.len());
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

/// Batch-mean hinge loss and full parameter gradient.
///
/// The three branches of each triplet share `params`; gradients from all
/// branches are summed. If every batch triplet clears the margin the loss
/// and every gradient entry are exactly zero.
pub fn oenn_loss_grad(params: &EmbNetParams, batch: &TripletSet, cfg: &OennConfig) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::InvalidValue("OENN loss needs a nonempty batch".into()));
    }
    if batch.n() > (1usize << cfg.encoding_length.min(63)) {
        return Err(Error::InvalidConfig(format!(
            "{} items cannot be encoded in {} bits",
            batch.n(),
            cfg.encoding_length
        )));
    }

    // Distinct items, ascending; slot map for O(1) lookup.
    let mut present = vec![usize::MAX; batch.n()];
    let mut items = Vec::new();
    for t in batch.triplets() {
        for idx in [t.i(), t.j(), t.k()] {
            if present[idx] == usize::MAX {
                present[idx] = 0;
                items.push(idx);
            }
        }
    }
    items.sort_unstable();
    for (slot, &item) in items.iter().enumerate() {
        present[item] = slot;
    }

    let caches = forward_items(params, &items, cfg.encoding_length)?;

    // d loss / d output per distinct item.
    let d = params.d;
    let scale = 1.0 / batch.len() as f64;
    let mut dy = vec![0.0; items.len() * d];
    let mut term_sum = 0.0;
    for t in batch.triplets() {
        let (si, sj, sk) = (present[t.i()], present[t.j()], present[t.k()]);
        let yi = &caches[si].output;
        let yj = &caches[sj].output;
        let yk = &caches[sk].output;
        let mut near_sq = 0.0;
        let mut far_sq = 0.0;
        for c in 0..d {
            near_sq += (yi[c] - yj[c]).powi(2);
            far_sq += (yi[c] - yk[c]).powi(2);
        }
        let term = near_sq - far_sq + 1.0;
        if term > 0.0 {
            term_sum += term;
            for c in 0..d {
                let gj = 2.0 * (yi[c] - yj[c]);
                let gk = 2.0 * (yi[c] - yk[c]);
                dy[si * d + c] += scale * (gj - gk);
                dy[sj * d + c] -= scale * gj;
                dy[sk * d + c] += scale * gk;
            }
        }
    }

    // Parameter gradient, parallel over fixed item chunks combined in
    // chunk order.
    let len = params.data.len();
    let chunk = chunk_len(items.len());
    let partials: Vec<Vec<f64>> = caches
        .par_chunks(chunk)
        .zip(dy.par_chunks(chunk * d))
        .map(|(cache_chunk, dy_chunk)| {
            let mut partial = vec![0.0; len];
            for (cache, dyi) in cache_chunk.iter().zip(dy_chunk.chunks(d)) {
                if dyi.iter().any(|&v| v != 0.0) {
                    backward_into(params, cache, dyi, &mut partial);
                }
            }
            partial
        })
        .collect();
    let mut grad = vec![0.0; len];
    for partial in partials {
        for (g, p) in grad.iter_mut().zip(partial) {
            *g += p;
        }
    }
    Ok((term_sum / batch.len() as f64, grad))
}

/// Forward every index `0..n` through the network.
pub fn embnet_embed_all(params: &EmbNetParams, n: usize) -> Result<Embedding> {
    let items: Vec<usize> = (0..n).collect();
    let caches = forward_items(params, &items, params.encoding_length)?;
    let mut coords = DMatrix::zeros(n, params.d);
    for (r, cache) in caches.iter().enumerate() {
        for c in 0..params.d {
            coords[(r, c)] = cache.output[c];
        }
    }
    Embedding::new(coords)
}

/// Train OENN on a triplet set. Same epoch/convergence semantics as the
/// classical training loop; the final embedding is the forward pass of
/// every index. Returns the trained parameters alongside the result so
/// the network can be serialized and extended to new items.
pub fn oenn_train(triplets: &TripletSet, cfg: &OennConfig) -> Result<(TrainResult, EmbNetParams)> {
    cfg.validate()?;
    if triplets.n() != cfg.n {
        return Err(Error::ShapeMismatch(format!(
            "triplets cover {} items, config says {}",
            triplets.n(),
            cfg.n
        )));
    }
    if triplets.is_empty() {
        return Err(Error::InvalidValue("cannot train on an empty triplet set".into()));
    }

    let start = Instant::now();
    let mut init_rng = seed_stream(cfg.seed, "init");
    let mut params = EmbNetParams::init(cfg.encoding_length, cfg.width, cfg.d, &mut init_rng);
    let mut first = vec![0.0; params.data.len()];
    let mut second = vec![0.0; params.data.len()];
    let mut step_count = 0usize;

    let subset = convergence_subset(triplets, cfg.seed);
    let all = triplets.triplets();
    let effective_batch = cfg.batch_size.min(all.len()).max(1);
    let mut order: Vec<usize> = (0..all.len()).collect();
    let mut shuffle_rng = seed_stream(cfg.seed, "shuffle");
    let mut history = Vec::new();
    let mut errors = Vec::new();
    let mut converged_epoch: Option<usize> = None;
    let mut converged_time = 0.0;

    for epoch in 1..=cfg.max_epochs {
        for chunk in crate::optim::shuffled_batches(&mut order, &mut shuffle_rng, effective_batch) {
            let batch_triplets: Vec<Triplet> = chunk.iter().map(|&i| all[i]).collect();
            let batch = triplets.with_triplets(batch_triplets)?;
            let (_, grad) = oenn_loss_grad(&params, &batch, cfg)?;
            step_count += 1;
            adam_update(
                &mut first,
                &mut second,
                step_count,
                &mut params.data,
                &grad,
                cfg.learning_rate,
                0.9,
                0.999,
                1e-8,
            );
        }
        let emb = embnet_embed_all(&params, cfg.n)?;
        let err = triplet_error_coords(emb.coords(), &subset);
        history.push((epoch, err));
        errors.push(err);
        if converged_epoch.is_none()
            && convergence_monitor(&errors, cfg.max_epochs) == ConvergenceDecision::Stop
        {
            converged_epoch = Some(epoch);
            converged_time = start.elapsed().as_secs_f64();
        }
    }

    let embedding = embnet_embed_all(&params, cfg.n)?;
    Ok((
        TrainResult {
            embedding,
            epochs_run: history.len(),
            converged_epoch,
            error_history: history,
            wall_time_seconds: if converged_epoch.is_some() {
                converged_time
            } else {
                start.elapsed().as_secs_f64()
            },
        },
        params,
    ))
}

/// Extend a trained network to `k_new` unseen items.
///
/// `test_triplets` index a combined item space: indices below the frozen
/// network's training count refer to training items, indices from
/// `n_train` up to `n_train + k_new` refer to new items (new item `t` has
/// combined index `n_train + t` and is encoded as the binary code of `t`).
/// Every triplet must reference at least one new item. Only the fresh
/// network receives gradients; `frozen` is never modified.
pub fn oenn_extend(
    frozen: &EmbNetParams,
    test_triplets: &TripletSet,
    k_new: usize,
    cfg: &OennConfig,
) -> Result<Embedding> {
    cfg.validate()?;
    if k_new == 0 {
        return Err(Error::InvalidConfig("extension needs k_new >= 1".into()));
    }
    let n_train = cfg.n;
    let combined = n_train + k_new;
    if test_triplets.n() != combined {
        return Err(Error::ShapeMismatch(format!(
            "extension triplets cover {} items, expected {n_train} train + {k_new} new",
            test_triplets.n()
        )));
    }
    if k_new > (1usize << frozen.encoding_length.min(63)) {
        return Err(Error::InvalidConfig(format!(
            "{k_new} new items cannot be encoded in {} bits",
            frozen.encoding_length
        )));
    }
    for t in test_triplets.triplets() {
        if [t.i(), t.j(), t.k()].iter().all(|&idx| idx < n_train) {
            return Err(Error::InvalidTriplet {
                i: t.i(),
                j: t.j(),
                k: t.k(),
                reason: "extension triplets must reference at least one new item",
            });
        }
    }

    // Frozen outputs never change; compute them once for all train items.
    let train_items: Vec<usize> = (0..n_train).collect();
    let frozen_out: Vec<Vec<f64>> = forward_items(frozen, &train_items, frozen.encoding_length)?
        .into_iter()
        .map(|c| c.output)
        .collect();

    let mut init_rng = seed_stream(cfg.seed, "extend-init");
    let mut params = EmbNetParams::init(frozen.encoding_length, cfg.width, cfg.d, &mut init_rng);

    if test_triplets.is_empty() {
        return embnet_embed_all(&params, k_new);
    }

    let mut first = vec![0.0; params.data.len()];
    let mut second = vec![0.0; params.data.len()];
    let mut step_count = 0usize;
    let d = cfg.d;

    let all = test_triplets.triplets();
    let effective_batch = cfg.batch_size.min(all.len()).max(1);
    let mut order: Vec<usize> = (0..all.len()).collect();
    let mut shuffle_rng = seed_stream(cfg.seed, "shuffle");

    for _epoch in 1..=cfg.max_epochs {
        for chunk in crate::optim::shuffled_batches(&mut order, &mut shuffle_rng, effective_batch) {
            let batch: Vec<Triplet> = chunk.iter().map(|&i| all[i]).collect();

            // Distinct new items in this batch.
            let mut present = vec![usize::MAX; k_new];
            let mut items = Vec::new();
            for t in &batch {
                for idx in [t.i(), t.j(), t.k()] {
                    if idx >= n_train && present[idx - n_train] == usize::MAX {
                        present[idx - n_train] = 0;
                        items.push(idx - n_train);
                    }
                }
            }
            items.sort_unstable();
            for (slot, &item) in items.iter().enumerate() {
                present[item] = slot;
            }
            let caches = forward_items(&params, &items, frozen.encoding_length)?;

            let output = |idx: usize| -> &[f64] {
                if idx < n_train {
                    &frozen_out[idx]
                } else {
                    &caches[present[idx - n_train]].output
                }
            };

            let scale = 1.0 / batch.len() as f64;
            let mut dy = vec![0.0; items.len() * d];
            for t in &batch {
                let (yi, yj, yk) = (output(t.i()), output(t.j()), output(t.k()));
                let mut near_sq = 0.0;
                let mut far_sq = 0.0;
                for c in 0..d {
                    near_sq += (yi[c] - yj[c]).powi(2);
                    far_sq += (yi[c] - yk[c]).powi(2);
                }
                if near_sq - far_sq + 1.0 > 0.0 {
                    for c in 0..d {
                        let gj = 2.0 * (yi[c] - yj[c]);
                        let gk = 2.0 * (yi[c] - yk[c]);
                        // Only new-item branches receive gradient.
                        if t.i() >= n_train {
                            dy[present[t.i() - n_train] * d + c] += scale * (gj - gk);
                        }
                        if t.j() >= n_train {
                            dy[present[t.j() - n_train] * d + c] -= scale * gj;
                        }
                        if t.k() >= n_train {
                            dy[present[t.k() - n_train] * d + c] += scale * gk;
                        }
                    }
                }
            }

            let chunk_items = chunk_len(items.len());
            let partials: Vec<Vec<f64>> = caches
                .par_chunks(chunk_items)
                .zip(dy.par_chunks(chunk_items * d))
                .map(|(cache_chunk, dy_chunk)| {
                    let mut partial = vec![0.0; params.data.len()];
                    for (cache, dyi) in cache_chunk.iter().zip(dy_chunk.chunks(d)) {
                        if dyi.iter().any(|&v| v != 0.0) {
                            backward_into(&params, cache, dyi, &mut partial);
                        }
                    }
                    partial
                })
                .collect();
            let mut grad = vec![0.0; params.data.len()];
            for partial in partials {
                for (g, p) in grad.iter_mut().zip(partial) {
                    *g += p;
                }
            }

            step_count += 1;
            adam_update(
                &mut first,
                &mut second,
                step_count,
                &mut params.data,
                &grad,
                cfg.learning_rate,
                0.9,
                0.999,
                1e-8,
            );
        }
    }

    embnet_embed_all(&params, k_new)
}

/// Write trained parameters as text: a header line `embnet v1`, a sizes
/// line `encoding_length width d`, then one value per line in the flat
/// buffer's (row-major) order.
pub fn write_embnet_params(path: impl AsRef<Path>, params: &EmbNetParams) -> Result<()> {
    let mut out = String::with_capacity(params.data.len() * 12);
    out.push_str("embnet v1\n");
    out.push_str(&format!("{} {} {}\n", params.encoding_length, params.width, params.d));
    for v in &params.data {
        out.push_str(&format!("{v}\n"));
    }
    let tmp = path.as_ref().with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(out.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path.as_ref())?;
    Ok(())
}

/// Read parameters written by [`write_embnet_params`].
pub fn read_embnet_params(path: impl AsRef<Path>) -> Result<EmbNetParams> {
    let path = path.as_ref();
    let contents = fs::read_to_string(path)?;
    let err = |line: usize, msg: &str| Error::Parse {
        path: path.display().to_string(),
        line,
        message: msg.into(),
    };
    let mut lines = contents.lines();
    if lines.next() != Some("embnet v1") {
        return Err(err(1, "expected header 'embnet v1'"));
    }
    let sizes: Vec<usize> = lines
        .next()
        .ok_or_else(|| err(2, "missing sizes line"))?
        .split_whitespace()
        .map(|f| f.parse().map_err(|_| err(2, "invalid size")))
        .collect::<Result<_>>()?;
    let [enc, width, d] = sizes[..] else {
        return Err(err(2, "expected 'encoding_length width d'"));
    };
    let mut data = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| err(idx + 3, "invalid parameter value"))?;
        data.push(v);
    }
    EmbNetParams::from_data(enc, width, d, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triplets::generate_triplets;
    use crate::types::Dataset;
    use rand::Rng;
    use tempfile::tempdir;

    #[test]
    fn binary_encode_hand_cases() {
        assert_eq!(binary_encode(5, 4).unwrap(), vec![0.0, 1.0, 0.0, 1.0]);
        assert_eq!(binary_encode(0, 3).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(binary_encode(7, 3).unwrap(), vec![1.0, 1.0, 1.0]);
        assert!(binary_encode(8, 3).is_err());
    }

    #[test]
    fn binary_encode_is_injective() {
        let len = 6;
        let codes: Vec<Vec<f64>> = (0..(1 << len)).map(|i| binary_encode(i, len).unwrap()).collect();
        for a in 0..codes.len() {
            for b in (a + 1)..codes.len() {
                assert_ne!(codes[a], codes[b], "codes of {a} and {b} collide");
            }
        }
    }

    #[test]
    fn width_and_encoding_defaults() {
        // Floor of 120 dominates small problems.
        assert_eq!(default_width(788, 2), 120);
        // 2 * 50 * ln(7291) = 889.45... -> 890.
        assert_eq!(default_width(7291, 50), 890);
        assert_eq!(default_encoding_length(2), 1);
        assert_eq!(default_encoding_length(4), 2);
        assert_eq!(default_encoding_length(5), 3);
        assert_eq!(default_encoding_length(1024), 10);
    }

    #[test]
    fn forward_zero_params_outputs_zero() {
        let count = EmbNetParams::param_count(3, 4, 2);
        let params = EmbNetParams::from_data(3, 4, 2, vec![0.0; count]).unwrap();
        let (out, _) = embnet_forward(&params, &[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn forward_unit_net_passes_positive_input_through() {
        // Width-1 net with all weights 1 and biases 0 is the identity on
        // positive scalars; layout is [w1, b1, w2, b2, w3, b3, w4, b4].
        let params =
            EmbNetParams::from_data(1, 1, 1, vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let (out, _) = embnet_forward(&params, &[2.0]).unwrap();
        assert_eq!(out, vec![2.0]);
    }

    #[test]
    fn forward_matches_straight_line_oracle() {
        let mut rng = seed_stream(81, "oenn-forward");
        let (enc, width, d) = (4, 5, 3);
        let params = EmbNetParams::init(enc, width, d, &mut rng);
        let input: Vec<f64> = (0..enc).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (out, _) = embnet_forward(&params, &input).unwrap();

        // Independent evaluation straight from the blocks.
        let [w1, b1, w2, b2, w3, b3, w4, b4] = params.blocks();
        let dense = |w: &[f64], b: &[f64], x: &[f64], rows: usize| -> Vec<f64> {
            (0..rows)
                .map(|r| {
                    let mut acc = b[r];
                    for (c, xv) in x.iter().enumerate() {
                        acc += w[r * x.len() + c] * xv;
                    }
                    acc
                })
                .collect()
        };
        let relu = |v: Vec<f64>| v.into_iter().map(|x| x.max(0.0)).collect::<Vec<_>>();
        let h1 = relu(dense(w1, b1, &input, width));
        let h2 = relu(dense(w2, b2, &h1, width));
        let h3 = relu(dense(w3, b3, &h2, width));
        let expect = dense(w4, b4, &h3, d);
        for (a, b) in out.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(embnet_forward(&params, &[0.0; 3]).is_err());
    }

    fn tiny_cfg(n: usize, d: usize, width: usize, seed: u64) -> OennConfig {
        let mut cfg = OennConfig::new(n, d, seed);
        cfg.width = width;
        cfg
    }

    #[test]
    fn loss_is_one_for_zero_network_and_zero_when_margins_clear() {
        let cfg = tiny_cfg(6, 2, 4, 0);
        let count = EmbNetParams::param_count(cfg.encoding_length, cfg.width, cfg.d);
        let zero = EmbNetParams::from_data(cfg.encoding_length, cfg.width, cfg.d, vec![0.0; count]).unwrap();
        let ds = Dataset::new(nalgebra::DMatrix::from_fn(6, 2, |r, c| (r * 2 + c) as f64), None, "t").unwrap();
        let batch = generate_triplets(&ds, 20, 1).unwrap();
        let (loss, grad) = oenn_loss_grad(&zero, &batch, &cfg).unwrap();
        assert_eq!(loss, 1.0);
        assert!(grad.iter().all(|&g| g == 0.0), "zero outputs sit exactly on the hinge");
    }

    #[test]
    fn cleared_margins_give_exact_zero_loss_and_grads() {
        // Train a tiny instance until the margin clears, then check.
        let ds = Dataset::new(
            nalgebra::DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]),
            None,
            "line4",
        )
        .unwrap();
        let triplets = all_consistent_triplets(&ds);
        let mut cfg = tiny_cfg(4, 1, 16, 3);
        cfg.max_epochs = 400;
        cfg.learning_rate = 0.05;
        let (result, params) = oenn_train(&triplets, &cfg).unwrap();
        let emb = result.embedding;
        // The hinge demands a gap of 1 in squared distances.
        let satisfied = triplets.triplets().iter().all(|t| {
            let near = (emb.coords()[(t.i(), 0)] - emb.coords()[(t.j(), 0)]).powi(2);
            let far = (emb.coords()[(t.i(), 0)] - emb.coords()[(t.k(), 0)]).powi(2);
            far - near >= 1.0
        });
        if satisfied {
            let (loss, grad) = oenn_loss_grad(&params, &triplets, &cfg).unwrap();
            assert_eq!(loss, 0.0);
            assert!(grad.iter().all(|&g| g == 0.0));
        }
        assert_eq!(
            crate::eval::triplet_error(&emb, &triplets).unwrap(),
            0.0,
            "4-point line with every consistent triplet must be memorized"
        );
    }

    fn all_consistent_triplets(ds: &Dataset) -> TripletSet {
        let n = ds.n();
        let mut trips = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if i != j && i != k && j < k {
                        trips.push(crate::triplets::answer_triplet(ds, i, j, k).unwrap());
                    }
                }
            }
        }
        TripletSet::new(n, trips).unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences_over_every_parameter() {
        let mut rng = seed_stream(82, "oenn-fd");
        let cfg = tiny_cfg(6, 2, 4, 0);
        let params = EmbNetParams::init(cfg.encoding_length, cfg.width, cfg.d, &mut rng);
        let ds = Dataset::new(
            nalgebra::DMatrix::from_fn(6, 2, |_, _| rng.gen_range(-1.0..1.0)),
            None,
            "fd",
        )
        .unwrap();
        let batch = generate_triplets(&ds, 12, 2).unwrap();
        let (_, grad) = oenn_loss_grad(&params, &batch, &cfg).unwrap();
        let h = 1e-6;
        for idx in 0..params.data().len() {
            let mut plus = params.clone();
            plus.data_mut()[idx] += h;
            let mut minus = params.clone();
            minus.data_mut()[idx] -= h;
            let lp = oenn_loss_grad(&plus, &batch, &cfg).unwrap().0;
            let lm = oenn_loss_grad(&minus, &batch, &cfg).unwrap().0;
            let numeric = (lp - lm) / (2.0 * h);
            let analytic = grad[idx];
            let rel = (numeric - analytic).abs() / (numeric.abs() + analytic.abs()).max(1e-8);
            assert!(rel < 1e-4, "param {idx}: numeric {numeric} vs analytic {analytic}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let ds = gen_line(8);
        let triplets = generate_triplets(&ds, 60, 5).unwrap();
        let mut cfg = tiny_cfg(8, 1, 8, 5);
        cfg.max_epochs = 20;
        let (a, pa) = oenn_train(&triplets, &cfg).unwrap();
        let (b, pb) = oenn_train(&triplets, &cfg).unwrap();
        assert_eq!(a.embedding.coords(), b.embedding.coords());
        assert_eq!(pa.data(), pb.data());
    }

    fn gen_line(n: usize) -> Dataset {
        Dataset::new(
            nalgebra::DMatrix::from_fn(n, 1, |r, _| r as f64),
            None,
            "line",
        )
        .unwrap()
    }

    #[test]
    fn train_rejects_mismatched_item_count() {
        let ds = gen_line(8);
        let triplets = generate_triplets(&ds, 10, 5).unwrap();
        let cfg = tiny_cfg(9, 1, 8, 5);
        assert!(oenn_train(&triplets, &cfg).is_err());
    }

    #[test]
    fn extend_with_no_triplets_returns_initialization_outputs() {
        let mut rng = seed_stream(83, "extend-empty");
        let cfg = tiny_cfg(6, 2, 6, 9);
        let frozen = EmbNetParams::init(cfg.encoding_length, cfg.width, cfg.d, &mut rng);
        let empty = TripletSet::new(8, vec![]).unwrap();
        let out = oenn_extend(&frozen, &empty, 2, &cfg).unwrap();
        let mut init_rng = seed_stream(cfg.seed, "extend-init");
        let expected = EmbNetParams::init(cfg.encoding_length, cfg.width, cfg.d, &mut init_rng);
        let expected_emb = embnet_embed_all(&expected, 2).unwrap();
        assert_eq!(out.coords(), expected_emb.coords());
    }

    #[test]
    fn extend_satisfies_constraints_and_leaves_frozen_untouched() {
        // Train on a 6-point line, then insert one new point constrained
        // to sit nearer point 0 than point 5.
        let ds = gen_line(6);
        let train_triplets = all_consistent_triplets(&ds);
        let mut cfg = tiny_cfg(6, 1, 16, 7);
        cfg.max_epochs = 300;
        cfg.learning_rate = 0.05;
        let (_, frozen) = oenn_train(&train_triplets, &cfg).unwrap();
        let frozen_before = frozen.clone();

        // New item has combined index 6; (6, 0, 5) says "6 is closer to 0".
        let ext = TripletSet::new(7, vec![Triplet::new(6, 0, 5).unwrap()]).unwrap();
        let mut ext_cfg = cfg.clone();
        ext_cfg.max_epochs = 200;
        let new_emb = oenn_extend(&frozen, &ext, 1, &ext_cfg).unwrap();
        assert_eq!(frozen.data(), frozen_before.data(), "frozen parameters must not move");

        let train_emb = embnet_embed_all(&frozen, 6).unwrap();
        let y = new_emb.coords()[(0, 0)];
        let d0 = (y - train_emb.coords()[(0, 0)]).abs();
        let d5 = (y - train_emb.coords()[(5, 0)]).abs();
        assert!(d0 < d5, "extension violated its only constraint: {d0} vs {d5}");
    }

    #[test]
    fn extend_rejects_train_only_triplets() {
        let mut rng = seed_stream(84, "extend-reject");
        let cfg = tiny_cfg(6, 2, 6, 9);
        let frozen = EmbNetParams::init(cfg.encoding_length, cfg.width, cfg.d, &mut rng);
        let bad = TripletSet::new(8, vec![Triplet::new(0, 1, 2).unwrap()]).unwrap();
        assert!(oenn_extend(&frozen, &bad, 2, &cfg).is_err());
    }

    #[test]
    fn params_file_round_trip() {
        let dir = tempdir().unwrap();
        let mut rng = seed_stream(85, "params-io");
        let params = EmbNetParams::init(5, 7, 3, &mut rng);
        let path = dir.path().join("net.txt");
        write_embnet_params(&path, &params).unwrap();
        let back = read_embnet_params(&path).unwrap();
        assert_eq!(back, params);
    }
}
