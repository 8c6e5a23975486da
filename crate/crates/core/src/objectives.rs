//! Loss values and analytic gradients for the seven classical algorithms.
//!
//! Four methods optimize the embedding coordinates directly (SOE, STE,
//! t-STE, CKLx); three optimize the Gram matrix (GNMDS, CKL, FORTE). All
//! objectives are expressed as minimizations: the probabilistic models
//! contribute negated log-likelihoods, so one optimizer interface serves
//! everything.
//!
//! Every batch is reduced in its given order, so results are reproducible
//! bit-for-bit. Exponentials go through log-sum-exp/softplus stabilized
//! forms; squared distances can reach the hundreds during optimization
//! without overflowing any of the losses.

use nalgebra::DMatrix;

use crate::types::{Embedding, GramMatrix, Triplet, TripletSet};
use crate::{Error, Result};

/// A loss value with its gradient, shaped like the optimized variable:
/// `n x d` for coordinate methods, symmetric `n x n` for Gram methods.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: DMatrix<f64>,
}

/// Numerically stable logistic function.
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `ln(1 + exp(z))`.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// STE probability that the triplet is satisfied, from the two squared
/// distances: `exp(-d_near) / (exp(-d_near) + exp(-d_far))`.
pub fn ste_probability(near_sq: f64, far_sq: f64) -> f64 {
    sigmoid(far_sq - near_sq)
}

/// t-STE probability under the Student-t kernel with `alpha` degrees of
/// freedom: both kernel values are `(1 + delta/alpha)^(-(alpha+1)/2)`.
pub fn tste_probability(near_sq: f64, far_sq: f64, alpha: f64) -> f64 {
    let beta = (alpha + 1.0) / 2.0;
    let z = beta * ((1.0 + far_sq / alpha).ln() - (1.0 + near_sq / alpha).ln());
    sigmoid(z)
}

/// CKL probability that the triplet is satisfied:
/// `(mu + d_far) / (2 mu + d_near + d_far)`.
pub fn ckl_probability(near_sq: f64, far_sq: f64, mu: f64) -> f64 {
    (mu + far_sq) / (2.0 * mu + (near_sq + far_sq))
}

fn check_batch(n: usize, batch: &TripletSet) -> Result<()> {
    if batch.n() != n {
        return Err(Error::ShapeMismatch(format!(
            "batch indexes {} items but the variable has {}",
            batch.n(),
            n
        )));
    }
    Ok(())
}

/// Per-triplet loss terms for embedding-space methods, expressed through
/// the two squared distances. Returns `(term, d term / d near_sq,
/// d term / d far_sq)`.
type XTerm = dyn Fn(f64, f64) -> (f64, f64, f64);

fn x_method_loss_grad(emb: &Embedding, batch: &TripletSet, term: &XTerm) -> Result<LossGrad> {
    check_batch(emb.n(), batch)?;
    let x = emb.coords();
    let (n, d) = (x.nrows(), x.ncols());
    let mut grad = DMatrix::zeros(n, d);
    let mut loss = 0.0;
    for t in batch.triplets() {
        let (i, j, k) = (t.i(), t.j(), t.k());
        let mut near_sq = 0.0;
        let mut far_sq = 0.0;
        for c in 0..d {
            let dj = x[(i, c)] - x[(j, c)];
            let dk = x[(i, c)] - x[(k, c)];
            near_sq += dj * dj;
            far_sq += dk * dk;
        }
        let (value, dnear, dfar) = term(near_sq, far_sq);
        loss += value;
        if dnear != 0.0 || dfar != 0.0 {
            for c in 0..d {
                let dj = x[(i, c)] - x[(j, c)];
                let dk = x[(i, c)] - x[(k, c)];
                let gj = 2.0 * dnear * dj;
                let gk = 2.0 * dfar * dk;
                grad[(i, c)] += gj + gk;
                grad[(j, c)] -= gj;
                grad[(k, c)] -= gk;
            }
        }
    }
    Ok(LossGrad { loss, grad })
}

/// SOE hinge loss: sum of `max(0, margin + sqrt(d_near) - sqrt(d_far))`.
///
/// The gradient is the exact subgradient choosing 0 on inactive and
/// exactly-boundary terms, and 0 for the square-root factor at coincident
/// points.
pub fn soe_loss_grad(emb: &Embedding, batch: &TripletSet, margin: f64) -> Result<LossGrad> {
    if !(margin > 0.0) {
        return Err(Error::InvalidConfig("SOE margin must be positive".into()));
    }
    x_method_loss_grad(emb, batch, &move |near_sq: f64, far_sq: f64| {
        let near = near_sq.sqrt();
        let far = far_sq.sqrt();
        let value = margin + near - far;
        if value > 0.0 {
            let dnear = if near_sq > 0.0 { 0.5 / near } else { 0.0 };
            let dfar = if far_sq > 0.0 { -0.5 / far } else { 0.0 };
            (value, dnear, dfar)
        } else {
            (0.0, 0.0, 0.0)
        }
    })
}

/// STE negated log-likelihood: `-sum log p` with the Gaussian-kernel
/// probability of [`ste_probability`].
pub fn ste_loss_grad(emb: &Embedding, batch: &TripletSet) -> Result<LossGrad> {
    x_method_loss_grad(emb, batch, &|near_sq: f64, far_sq: f64| {
        let z = near_sq - far_sq;
        let s = sigmoid(z);
        (softplus(z), s, -s)
    })
}

/// t-STE negated log-likelihood with Student-t kernels of `alpha` degrees
/// of freedom.
pub fn tste_loss_grad(emb: &Embedding, batch: &TripletSet, alpha: f64) -> Result<LossGrad> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig("t-STE alpha must be positive".into()));
    }
    let beta = (alpha + 1.0) / 2.0;
    x_method_loss_grad(emb, batch, &move |near_sq: f64, far_sq: f64| {
        let u = 1.0 + near_sq / alpha;
        let v = 1.0 + far_sq / alpha;
        let z = beta * (u.ln() - v.ln());
        let s = sigmoid(z);
        (softplus(z), s * beta / (alpha * u), -s * beta / (alpha * v))
    })
}

/// CKLx negated log-likelihood: the CKL probability model evaluated on
/// embedding-space distances.
pub fn cklx_loss_grad(emb: &Embedding, batch: &TripletSet, mu: f64) -> Result<LossGrad> {
    if !(mu > 0.0) {
        return Err(Error::InvalidConfig("CKL mu must be positive".into()));
    }
    x_method_loss_grad(emb, batch, &move |near_sq: f64, far_sq: f64| {
        let denom = 2.0 * mu + (near_sq + far_sq);
        let num = mu + far_sq;
        // -ln p = ln(denom) - ln(num)
        (denom.ln() - num.ln(), 1.0 / denom, 1.0 / denom - 1.0 / num)
    })
}

fn k_method_loss_grad(gram: &GramMatrix, batch: &TripletSet, trace_reg: f64, term: &XTerm) -> Result<LossGrad> {
    check_batch(gram.n(), batch)?;
    let k = gram.values();
    let n = k.nrows();
    let mut grad = DMatrix::zeros(n, n);
    let mut loss = 0.0;
    for t in batch.triplets() {
        let (i, j, kk) = (t.i(), t.j(), t.k());
        let near_sq = k[(i, i)] + k[(j, j)] - 2.0 * k[(i, j)];
        let far_sq = k[(i, i)] + k[(kk, kk)] - 2.0 * k[(i, kk)];
        let (value, dnear, dfar) = term(near_sq, far_sq);
        loss += value;
        if dnear != 0.0 {
            grad[(i, i)] += dnear;
            grad[(j, j)] += dnear;
            grad[(i, j)] -= 2.0 * dnear;
        }
        if dfar != 0.0 {
            grad[(i, i)] += dfar;
            grad[(kk, kk)] += dfar;
            grad[(i, kk)] -= 2.0 * dfar;
        }
    }
    // The variable is constrained symmetric: report the symmetrized
    // gradient, then add the trace term (once per gradient evaluation).
    for r in 0..n {
        for c in 0..r {
            let avg = 0.5 * (grad[(r, c)] + grad[(c, r)]);
            grad[(r, c)] = avg;
            grad[(c, r)] = avg;
        }
    }
    if trace_reg != 0.0 {
        let mut trace = 0.0;
        for i in 0..n {
            trace += k[(i, i)];
            grad[(i, i)] += trace_reg;
        }
        loss += trace_reg * trace;
    }
    Ok(LossGrad { loss, grad })
}

/// GNMDS hinge loss over the Gram matrix:
/// `sum max(0, 1 + d_near - d_far) + trace_reg * Trace(K)` with the
/// squared distances read off the Gram entries.
pub fn gnmds_loss_grad(gram: &GramMatrix, batch: &TripletSet, trace_reg: f64) -> Result<LossGrad> {
    if !(trace_reg >= 0.0) {
        return Err(Error::InvalidConfig("trace_reg must be nonnegative".into()));
    }
    k_method_loss_grad(gram, batch, trace_reg, &|near_sq: f64, far_sq: f64| {
        let value = 1.0 + near_sq - far_sq;
        if value > 0.0 {
            (value, 1.0, -1.0)
        } else {
            (0.0, 0.0, 0.0)
        }
    })
}

/// CKL negated log-likelihood over the Gram matrix plus
/// `trace_reg * Trace(K)`.
pub fn ckl_loss_grad(gram: &GramMatrix, batch: &TripletSet, mu: f64, trace_reg: f64) -> Result<LossGrad> {
    if !(mu > 0.0) {
        return Err(Error::InvalidConfig("CKL mu must be positive".into()));
    }
    if !(trace_reg >= 0.0) {
        return Err(Error::InvalidConfig("trace_reg must be nonnegative".into()));
    }
    k_method_loss_grad(gram, batch, trace_reg, &move |near_sq: f64, far_sq: f64| {
        let denom = 2.0 * mu + (near_sq + far_sq);
        let num = mu + far_sq;
        (denom.ln() - num.ln(), 1.0 / denom, 1.0 / denom - 1.0 / num)
    })
}

/// FORTE logistic loss over the Gram matrix:
/// `sum log(1 + exp(d_near - d_far))`.
pub fn forte_loss_grad(gram: &GramMatrix, batch: &TripletSet) -> Result<LossGrad> {
    k_method_loss_grad(gram, batch, 0.0, &|near_sq: f64, far_sq: f64| {
        let z = near_sq - far_sq;
        let s = sigmoid(z);
        (softplus(z), s, -s)
    })
}

/// Convenience wrapper mapping a triplet to its two squared distances in
/// an embedding; used by tests and by the probability helpers above.
pub fn triplet_distances(emb: &Embedding, t: &Triplet) -> (f64, f64) {
    let x = emb.coords();
    let mut near_sq = 0.0;
    let mut far_sq = 0.0;
    for c in 0..x.ncols() {
        let dj = x[(t.i(), c)] - x[(t.j(), c)];
        let dk = x[(t.i(), c)] - x[(t.k(), c)];
        near_sq += dj * dj;
        far_sq += dk * dk;
    }
    (near_sq, far_sq)
}
