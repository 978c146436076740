use ndarray::{Array1, ArrayView2};

use super::{InjectionDirection, MliError, Probe};
use crate::hashing::SplitMix64;

const TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerIteration {
    /// Unit top right-singular vector, first nonzero component positive.
    pub u: Vec<f64>,
    pub sigma: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sign_normalize(v: &mut Array1<f64>) {
    let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * scale) {
        if *first < 0.0 {
            v.mapv_inplace(|x| -x);
        }
    }
}

/// Top right-singular vector of `w` by power iteration on `WᵀW`, stopping
/// when successive iterates move less than 1e-10 or after `10·d` steps.
pub fn power_iteration(w: ArrayView2<f64>) -> Result<PowerIteration, MliError> {
    if w.iter().any(|v| !v.is_finite()) || w.iter().all(|&v| v == 0.0) {
        return Err(MliError::ZeroMatrix);
    }
    let d = w.ncols();
    let gram = w.t().dot(&w);
    let mut rng = SplitMix64::new(0x5eed);
    let mut v = Array1::from_iter((0..d).map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5));
    v /= v.dot(&v).sqrt();
    let max_iter = 10 * d;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut next = gram.dot(&v);
        let norm = next.dot(&next).sqrt();
        if norm == 0.0 {
            // Start vector fell in the null space; restart along the largest row.
            let row = (0..w.nrows())
                .max_by(|&a, &b| w.row(a).dot(&w.row(a)).total_cmp(&w.row(b).dot(&w.row(b))))
                .unwrap();
            next = w.row(row).to_owned();
            let n = next.dot(&next).sqrt();
            next /= n;
        } else {
            next /= norm;
        }
        sign_normalize(&mut next);
        let delta = (&next - &v).iter().map(|x| x * x).sum::<f64>().sqrt();
        v = next;
        if delta < TOL {
            converged = true;
            break;
        }
    }
    let sigma = w.dot(&v).iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(PowerIteration { u: v.to_vec(), sigma, iterations, converged })
}

/// Dominant direction of a probe's weight matrix, with λ left at zero.
/// Non-convergence is logged and the last iterate returned.
pub fn extract_direction(probe: &Probe) -> Result<InjectionDirection, MliError> {
    let pi = power_iteration(probe.w.view())?;
    if !pi.converged {
        log::warn!(
            "power iteration for {} at layer {} stopped after {} steps without converging",
            probe.property,
            probe.layer,
            pi.iterations
        );
    }
    Ok(InjectionDirection { property: probe.property, layer: probe.layer, lambda: 0.0, u: pi.u })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rank_one() {
        let w = array![[0.0, 0.0, 0.0], [-3.0, 4.0, 0.0]];
        let pi = power_iteration(w.view()).unwrap();
        assert!((pi.u[0] - 0.6).abs() < 1e-9 && (pi.u[1] + 0.8).abs() < 1e-9);
        assert!((pi.sigma - 5.0).abs() < 1e-9);
    }

    #[test]
    fn diagonal() {
        let w = array![[3.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let pi = power_iteration(w.view()).unwrap();
        assert!(pi.converged);
        assert!((pi.u[0] - 1.0).abs() < 1e-9 && pi.u[1].abs() < 1e-9);
    }

    #[test]
    fn zero_matrix() {
        assert_eq!(power_iteration(ndarray::Array2::zeros((2, 2)).view()), Err(MliError::ZeroMatrix));
    }
}
