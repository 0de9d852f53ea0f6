//! Mutual-information and objective metrics for designed precoders.

use std::f64::consts::LN_2;

use crate::channel::FreqChannel;
use crate::error::Result;
use crate::precoder_full::{gram_inv_sqrt, PrecoderSet};
use crate::spectral::singular_values_sq;
use crate::CMatrix;

/// Mutual information of a precoded link, in bits.
#[derive(Debug, Clone, Copy)]
pub struct MutualInformation {
    /// Sum over subcarriers of `log2 det(I + (1/sigma2) H F F^H H^H)`.
    pub total_bits: f64,
    /// `total_bits / K`; the spectral-efficiency figure reported per
    /// subcarrier (bps/Hz), with no cyclic-prefix deduction.
    pub per_subcarrier: f64,
}

fn log2_det_eye_plus_gram(m: &CMatrix, scale: f64) -> f64 {
    let n = m.nrows();
    let a = CMatrix::identity(n, n) + (m * m.adjoint()).scale(scale);
    let chol = a
        .cholesky()
        .expect("I + scaled Gram matrix is positive definite");
    2.0 * chol.l().diagonal().iter().map(|z| z.re.ln()).sum::<f64>() / LN_2
}

/// Gaussian-input mutual information achieved by a precoder set over a
/// channel: `sum_k log2 det(I + (1/sigma2) H[k] F[k] F[k]^H H[k]^H)` with
/// `F[k] = F_RF * F_BB[k]` (log base 2).
pub fn mutual_information(ch: &FreqChannel, pre: &PrecoderSet, sigma2: f64) -> MutualInformation {
    assert_eq!(
        ch.subcarriers(),
        pre.subcarriers(),
        "precoder and channel must cover the same subcarriers"
    );
    assert_eq!(
        ch.n_tx(),
        pre.rf.nrows(),
        "precoder rows must match transmit antennas"
    );
    let total: f64 = ch
        .matrices()
        .iter()
        .zip(pre.baseband.iter())
        .map(|(h, bb)| {
            let fused = h * (&pre.rf * bb);
            log2_det_eye_plus_gram(&fused, 1.0 / sigma2)
        })
        .sum();
    MutualInformation {
        total_bits: total,
        per_subcarrier: total / ch.subcarriers() as f64,
    }
}

/// The relaxed RF design objective: the summed squared singular values of the
/// effective channels, `sum_k ||H[k] F_RF (F_RF^H F_RF)^{-1/2}||_F^2`.
pub fn relaxed_objective(ch: &FreqChannel, f_rf: &CMatrix) -> Result<f64> {
    let normalizer = f_rf * gram_inv_sqrt(f_rf)?;
    Ok(ch
        .matrices()
        .iter()
        .map(|h| (h * &normalizer).norm_squared())
        .sum())
}

/// Per-stream spectral efficiency of the raw channel and its concave upper
/// bound: averaging the SNR-scaled squared singular values inside the log
/// rather than outside. The second value always dominates the first.
pub fn jensen_pair(ch: &FreqChannel, sigma2: f64) -> (f64, f64) {
    let streams = ch.n_rx().min(ch.n_tx());
    let count = (streams * ch.subcarriers()) as f64;
    let mut exact = 0.0;
    let mut mean_gain = 0.0;
    for h in ch.matrices() {
        let sv2 = singular_values_sq(h);
        for &g in sv2.iter().take(streams) {
            exact += (1.0 + g / sigma2).log2();
            mean_gain += g / sigma2;
        }
    }
    exact /= count;
    mean_gain /= count;
    (exact, (1.0 + mean_gain).log2())
}
