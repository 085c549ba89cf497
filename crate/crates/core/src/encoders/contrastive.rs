use numcore::{Tape, Tensor, Var};

use crate::{Error, Result};

/// Rows scaled to unit length; zero rows are rejected.
pub fn normalize_rows(tape: &mut Tape, x: Var) -> Result<Var> {
    let rows = tape.value(x).rows();
    let sq = tape.square(x)?;
    let norm2 = tape.sum_cols(sq)?;
    if tape.value(norm2).data().iter().any(|&v| v <= 0.0) {
        return Err(Error::invalid("zero-norm vector has no cosine similarity"));
    }
    let norm = tape.sqrt(norm2)?;
    let ones = tape.constant(Tensor::full(&[rows, 1], 1.0));
    let inv = tape.div(ones, norm)?;
    Ok(tape.mul_col(x, inv)?)
}

/// Graph-to-text InfoNCE over cosine similarities with temperature `tau`:
/// `-(1/B) Σ_i log softmax_j(cos(z_i, c_j)/τ)[i]`. With `symmetric` the
/// text-to-graph direction is averaged in.
pub fn contrastive_loss(tape: &mut Tape, z: Var, c: Var, tau: f64, symmetric: bool) -> Result<Var> {
    let (bz, bc) = (tape.value(z).shape().to_vec(), tape.value(c).shape().to_vec());
    if bz != bc || bz.len() != 2 || bz[0] == 0 {
        return Err(Error::invalid(format!("contrastive batch shapes {bz:?} and {bc:?} differ")));
    }
    if tau <= 0.0 {
        return Err(Error::invalid("temperature must be positive"));
    }
    let b = bz[0];
    let zn = normalize_rows(tape, z)?;
    let cn = normalize_rows(tape, c)?;
    let ct = tape.transpose(cn)?;
    let sim = tape.matmul(zn, ct)?;
    let logits = tape.scale(sim, 1.0 / tau)?;
    let diag: Vec<usize> = (0..b).collect();
    let one_way = |tape: &mut Tape, l: Var| -> Result<Var> {
        let lse = tape.log_sum_exp_rows(l)?;
        let pos = tape.pick_cols(l, &diag)?;
        let per = tape.sub(lse, pos)?;
        Ok(tape.mean(per)?)
    };
    let forward = one_way(tape, logits)?;
    if !symmetric {
        return Ok(forward);
    }
    let lt = tape.transpose(logits)?;
    let backward = one_way(tape, lt)?;
    let both = tape.add(forward, backward)?;
    Ok(tape.scale(both, 0.5)?)
}

/// Plain cosine similarity of two vectors.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}
