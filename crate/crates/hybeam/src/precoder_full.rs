//! Fully-connected hybrid precoding: covariance-eigenvector RF design,
//! effective-channel SVD baseband design, and the constant-modulus projection.
//!
//! The RF precoder spans the dominant eigenvectors of the transmit sample
//! covariance. The baseband stage works on the effective channel
//! `H[k] * F_RF * (F_RF^H F_RF)^{-1/2}`, taking the right singular vectors per
//! subcarrier and water-filling the stream powers jointly across subcarriers.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::FreqChannel;
use crate::error::{Error, Result};
use crate::spectral::{hermitian_eig, right_singular_pairs, water_fill, Covariance};
use crate::CMatrix;

/// A full hybrid precoder: one wideband RF matrix plus per-subcarrier
/// baseband matrices. Stream powers are already folded into the baseband
/// matrices; they are kept separately for reporting.
#[derive(Debug, Clone)]
pub struct PrecoderSet {
    /// N_TX x N_RF analog precoder, shared by all subcarriers.
    pub rf: CMatrix,
    /// N_RF x S digital precoder per subcarrier.
    pub baseband: Vec<CMatrix>,
    /// Allocated power per (stream, subcarrier).
    pub stream_powers: DMatrix<f64>,
    /// Water level of the joint allocation.
    pub water_level: f64,
}

impl PrecoderSet {
    pub fn subcarriers(&self) -> usize {
        self.baseband.len()
    }

    pub fn streams(&self) -> usize {
        self.stream_powers.nrows()
    }

    /// Transmit power actually spent: `sum_k ||F_RF F_BB[k]||_F^2`.
    pub fn total_power(&self) -> f64 {
        self.baseband
            .iter()
            .map(|bb| (&self.rf * bb).norm_squared())
            .sum()
    }
}

/// Inverse square root of the RF Gram matrix `(F^H F)^{-1/2}`.
///
/// Fails with [`Error::SingularGram`] when the smallest singular value of `F`
/// falls below 1e-9 of the largest (rank-deficient precoder).
pub fn gram_inv_sqrt(f_rf: &CMatrix) -> Result<CMatrix> {
    let gram = f_rf.adjoint() * f_rf;
    let gram = (&gram + gram.adjoint()).scale(0.5);
    let cov = Covariance::new(gram).expect("Gram matrix is Hermitian");
    let eig = hermitian_eig(&cov);
    let s_max = eig.values[0].max(0.0).sqrt();
    let s_min = eig.values.last().unwrap().max(0.0).sqrt();
    if s_min <= 1e-9 * s_max || s_max == 0.0 {
        return Err(Error::SingularGram);
    }
    let n = cov.dim();
    let inv_sqrt = CMatrix::from_fn(n, n, |r, c| {
        if r == c {
            Complex64::new(1.0 / eig.values[r].sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Ok(&eig.vectors * inv_sqrt * eig.vectors.adjoint())
}

/// Unconstrained fully-connected RF precoder: the `n_rf` dominant
/// eigenvectors of the sample covariance (orthonormal columns).
pub fn design_rf_fully(cov: &Covariance, n_rf: usize) -> Result<CMatrix> {
    let n_tx = cov.dim();
    if n_rf < 1 || n_rf > n_tx {
        return Err(Error::invalid(format!(
            "n_rf must be in 1..={n_tx}, got {n_rf}"
        )));
    }
    let eig = hermitian_eig(cov);
    Ok(eig.vectors.columns(0, n_rf).into_owned())
}

/// Effective channel seen by the baseband stage:
/// `H_eff[k] = H[k] * F_RF * (F_RF^H F_RF)^{-1/2}`.
pub fn effective_channel(ch: &FreqChannel, f_rf: &CMatrix) -> Result<FreqChannel> {
    if f_rf.nrows() != ch.n_tx() {
        return Err(Error::invalid(format!(
            "RF precoder has {} rows but the channel has {} transmit antennas",
            f_rf.nrows(),
            ch.n_tx()
        )));
    }
    let normalizer = f_rf * gram_inv_sqrt(f_rf)?;
    let matrices = ch.matrices().iter().map(|h| h * &normalizer).collect();
    FreqChannel::new(matrices)
}

/// Baseband precoders for a given RF precoder: per-subcarrier right singular
/// vectors of the effective channel, scaled by jointly water-filled stream
/// powers, then mapped back through the Gram normalization.
pub fn design_bb(
    h_eff: &FreqChannel,
    p_tot: f64,
    sigma2: f64,
    f_rf: &CMatrix,
) -> Result<PrecoderSet> {
    let n_rf = f_rf.ncols();
    if h_eff.n_tx() != n_rf {
        return Err(Error::invalid(format!(
            "effective channel has {} columns but the RF precoder has {} chains",
            h_eff.n_tx(),
            n_rf
        )));
    }
    let k_total = h_eff.subcarriers();
    let streams = n_rf.min(h_eff.n_rx());

    let mut gains = DMatrix::<f64>::zeros(streams, k_total);
    let mut right_vecs = Vec::with_capacity(k_total);
    for (i, h) in h_eff.matrices().iter().enumerate() {
        let (v, g) = right_singular_pairs(h);
        for s in 0..streams {
            gains[(s, i)] = g[s];
        }
        right_vecs.push(v.columns(0, streams).into_owned());
    }

    let alloc = water_fill(&gains, p_tot, sigma2)?;
    let inv_sqrt = gram_inv_sqrt(f_rf)?;
    let mut baseband = Vec::with_capacity(k_total);
    for (i, v) in right_vecs.iter().enumerate() {
        let mut scaled = v.clone();
        for s in 0..streams {
            let a = Complex64::new(alloc.powers[(s, i)].sqrt(), 0.0);
            for r in 0..n_rf {
                scaled[(r, s)] *= a;
            }
        }
        baseband.push(&inv_sqrt * scaled);
    }
    Ok(PrecoderSet {
        rf: f_rf.clone(),
        baseband,
        stream_powers: alloc.powers,
        water_level: alloc.water_level,
    })
}

/// Fully-digital benchmark: identity RF stage, per-subcarrier SVD precoding
/// with the same joint water-filling.
pub fn design_fully_digital(ch: &FreqChannel, p_tot: f64, sigma2: f64) -> Result<PrecoderSet> {
    let identity = CMatrix::identity(ch.n_tx(), ch.n_tx());
    design_bb(ch, p_tot, sigma2, &identity)
}

/// Project onto constant-modulus entries: each entry keeps its phase at unit
/// magnitude; exact zeros map to 1. This is the Frobenius-nearest
/// unit-modulus matrix.
pub fn phase_project(f_rf: &CMatrix) -> CMatrix {
    f_rf.map(|z| {
        if z.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::from_polar(1.0, z.arg())
        }
    })
}
