use super::EncoderError;

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EncoderError> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(EncoderError::ZeroVector);
    }
    Ok(dot(a, b) / (na * nb))
}

/// InfoNCE value and gradients with respect to every input embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoNceGrad {
    pub loss: f64,
    pub d_anchor: Vec<f64>,
    pub d_positive: Vec<f64>,
    pub d_negatives: Vec<Vec<f64>>,
}

/// `-log softmax_0` over cosine logits scaled by `1/t`. Written as
/// `(m - l0) + ln(1 + Σ_{j≠argmax} exp(l_j - m))` so that tiny losses keep
/// full relative precision.
fn loss_from_logits(logits: &[f64]) -> (f64, Vec<f64>) {
    let (arg, m) = logits
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bm), (i, l)| if l > bm { (i, l) } else { (bi, bm) });
    let exps: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let rest: f64 = exps.iter().enumerate().filter(|&(i, _)| i != arg).map(|(_, e)| e).sum();
    let loss = (m - logits[0]) + rest.ln_1p();
    let z = 1.0 + rest;
    let mut dlogits: Vec<f64> = exps.iter().map(|e| e / z).collect();
    dlogits[0] -= 1.0;
    (loss, dlogits)
}

pub fn infonce_loss<V: AsRef<[f64]>>(
    anchor: &[f64],
    positive: &[f64],
    negatives: &[V],
    temperature: f64,
) -> Result<f64, EncoderError> {
    Ok(infonce_with_grad(anchor, positive, negatives, temperature)?.loss)
}

pub fn infonce_with_grad<V: AsRef<[f64]>>(
    anchor: &[f64],
    positive: &[f64],
    negatives: &[V],
    temperature: f64,
) -> Result<InfoNceGrad, EncoderError> {
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(EncoderError::InvalidConfig(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let d = anchor.len();
    let others: Vec<&[f64]> = std::iter::once(positive)
        .chain(negatives.iter().map(AsRef::as_ref))
        .collect();
    for o in &others {
        if o.len() != d {
            return Err(EncoderError::DimensionMismatch { expected: d, got: o.len() });
        }
    }
    let na = norm(anchor);
    if na == 0.0 {
        return Err(EncoderError::ZeroVector);
    }
    let mut cos = Vec::with_capacity(others.len());
    let mut norms = Vec::with_capacity(others.len());
    for o in &others {
        let no = norm(o);
        if no == 0.0 {
            return Err(EncoderError::ZeroVector);
        }
        norms.push(no);
        cos.push(dot(anchor, o) / (na * no));
    }
    let logits: Vec<f64> = cos.iter().map(|c| c / temperature).collect();
    let (loss, dlogits) = loss_from_logits(&logits);

    // d cos(a, c) / da = c / (|a||c|) - cos · a / |a|²
    let mut d_anchor = vec![0.0; d];
    let mut d_others = Vec::with_capacity(others.len());
    for (j, o) in others.iter().enumerate() {
        let g = dlogits[j] / temperature;
        let (c, no) = (cos[j], norms[j]);
        let mut d_o = vec![0.0; d];
        for k in 0..d {
            d_anchor[k] += g * (o[k] / (na * no) - c * anchor[k] / (na * na));
            d_o[k] = g * (anchor[k] / (na * no) - c * o[k] / (no * no));
        }
        d_others.push(d_o);
    }
    let d_positive = d_others.remove(0);
    Ok(InfoNceGrad {
        loss,
        d_anchor,
        d_positive,
        d_negatives: d_others,
    })
}
