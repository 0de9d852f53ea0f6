//! Transmit-side sample covariance, Hermitian eigendecomposition, and joint
//! water-filling over all (stream, subcarrier) pairs.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::FreqChannel;
use crate::error::{Error, Result};
use crate::CMatrix;

/// A validated Hermitian matrix, typically `R = (1/K) sum_k H[k]^H H[k]`.
///
/// `n_subcarriers` records how many subcarriers the average ran over; it is 1
/// for covariances built directly from a matrix and scales the relaxed
/// precoding objectives.
#[derive(Debug, Clone)]
pub struct Covariance {
    matrix: CMatrix,
    n_subcarriers: usize,
}

impl Covariance {
    /// Wrap a Hermitian matrix (`n_subcarriers = 1`).
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::with_subcarriers(matrix, 1)
    }

    pub fn with_subcarriers(matrix: CMatrix, n_subcarriers: usize) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::invalid("covariance must be square and non-empty"));
        }
        if n_subcarriers == 0 {
            return Err(Error::invalid("subcarrier count must be at least 1"));
        }
        let scale = matrix.camax().max(1.0);
        let dev = (&matrix - matrix.adjoint()).camax();
        if dev > 1e-10 * scale {
            return Err(Error::invalid(format!(
                "matrix is not Hermitian: max deviation {dev:.3e}"
            )));
        }
        Ok(Covariance {
            matrix,
            n_subcarriers,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    /// Principal submatrix on `indices` (0-based), in the given order.
    pub fn principal_submatrix(&self, indices: &[usize]) -> Result<Covariance> {
        if indices.is_empty() {
            return Err(Error::invalid("index set must be non-empty"));
        }
        let n = self.dim();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::invalid(format!(
                "index {bad} out of range for dimension {n}"
            )));
        }
        let m = CMatrix::from_fn(indices.len(), indices.len(), |r, c| {
            self.matrix[(indices[r], indices[c])]
        });
        Ok(Covariance {
            matrix: m,
            n_subcarriers: self.n_subcarriers,
        })
    }
}

fn hermitize(m: CMatrix) -> CMatrix {
    let adj = m.adjoint();
    (m + adj).scale(0.5)
}

/// Sample covariance of the transmit-side channel vectors,
/// `R = (1/K) sum_k H[k]^H H[k]`, explicitly symmetrized.
pub fn sample_covariance(ch: &FreqChannel) -> Covariance {
    let n_tx = ch.n_tx();
    let mut acc = CMatrix::zeros(n_tx, n_tx);
    for m in ch.matrices() {
        acc += m.adjoint() * m;
    }
    let r = hermitize(acc.unscale(ch.subcarriers() as f64));
    Covariance::with_subcarriers(r, ch.subcarriers()).expect("symmetrized product is Hermitian")
}

/// Eigendecomposition of a Hermitian matrix with a fixed output convention.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Real eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Unit-norm eigenvectors as columns, aligned with `values`. The first
    /// entry of each vector with modulus above 1e-12 is made real positive.
    pub vectors: CMatrix,
}

pub fn hermitian_eig(cov: &Covariance) -> EigenDecomposition {
    let n = cov.dim();
    let eig = cov.matrix().clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    let mut vectors = CMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let col = eig.eigenvectors.column(src);
        let rot = col
            .iter()
            .find(|z| z.norm() > 1e-12)
            .map(|z| z.conj() / z.norm())
            .unwrap_or_else(|| Complex64::new(1.0, 0.0));
        for r in 0..n {
            vectors[(r, dst)] = col[r] * rot;
        }
    }
    EigenDecomposition { values, vectors }
}

/// Squared singular values of `m`, descending, clamped at zero. Computed as
/// the eigenvalues of the smaller of the two Gram products.
pub fn singular_values_sq(m: &CMatrix) -> Vec<f64> {
    let gram = if m.nrows() <= m.ncols() {
        hermitize(m * m.adjoint())
    } else {
        hermitize(m.adjoint() * m)
    };
    let mut ev: Vec<f64> = gram
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|x| x.max(0.0))
        .collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ev
}

/// Right singular vectors of `m` (columns, descending singular values) with
/// the squared singular values, via the eigendecomposition of `m^H m`.
pub(crate) fn right_singular_pairs(m: &CMatrix) -> (CMatrix, Vec<f64>) {
    let gram = hermitize(m.adjoint() * m);
    let cov = Covariance::new(gram).expect("Gram matrix is Hermitian");
    let eig = hermitian_eig(&cov);
    let values = eig.values.iter().map(|v| v.max(0.0)).collect();
    (eig.vectors, values)
}

/// Joint water-filling power allocation.
#[derive(Debug, Clone)]
pub struct PowerAllocation {
    /// Power per (stream, subcarrier) entry, aligned with the gain matrix.
    pub powers: DMatrix<f64>,
    /// The common water level `mu`.
    pub water_level: f64,
}

impl PowerAllocation {
    pub fn total(&self) -> f64 {
        self.powers.iter().sum()
    }
}

/// Solve `p[s,k] = max(mu - sigma2/gains[s,k], 0)` with the water level `mu`
/// chosen by bisection so the powers sum to `p_tot`. Entries with zero gain
/// receive zero power; if every gain is zero the allocation is infeasible.
pub fn water_fill(gains: &DMatrix<f64>, p_tot: f64, sigma2: f64) -> Result<PowerAllocation> {
    if !(p_tot > 0.0) {
        return Err(Error::invalid("total power must be positive"));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("noise power must be positive"));
    }
    if gains.iter().any(|&g| g < 0.0 || !g.is_finite()) {
        return Err(Error::invalid("gains must be finite and nonnegative"));
    }
    let min_pos = gains
        .iter()
        .copied()
        .filter(|&g| g > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !min_pos.is_finite() {
        return Err(Error::NoUsableDimensions);
    }

    let total_at = |mu: f64| -> f64 {
        gains
            .iter()
            .filter(|&&g| g > 0.0)
            .map(|&g| (mu - sigma2 / g).max(0.0))
            .sum()
    };

    let mut lo = 0.0_f64;
    let mut hi = sigma2 / min_pos + p_tot;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total_at(mid) >= p_tot {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    let powers = gains.map(|g| {
        if g > 0.0 {
            (mu - sigma2 / g).max(0.0)
        } else {
            0.0
        }
    });
    Ok(PowerAllocation {
        powers,
        water_level: mu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{steering_vector, ArrayGeometry};
    use crate::channel::{
        freq_response, generate_clustered, ClusterConfig, OfdmGrid, Path, PathSet,
    };
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = CMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        hermitize(&a * a.adjoint())
    }

    #[test]
    fn covariance_rejects_non_hermitian() {
        let mut m = random_hermitian(4, 1);
        m[(0, 1)] += Complex64::new(1e-6, 0.0);
        assert!(matches!(Covariance::new(m), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn single_subcarrier_covariance_is_plain_gram() {
        let ps = PathSet {
            paths: vec![Path {
                gain: Complex64::new(1.0, 0.5),
                delay: 0.0,
                aod_az: 0.3,
                aod_el: 0.0,
                aoa_az: -0.2,
                aoa_el: 0.0,
            }],
        };
        let grid = OfdmGrid::new(1, 1, 1.0).unwrap();
        let ch = freq_response(
            &ps,
            &ArrayGeometry::ula(3),
            &ArrayGeometry::ula(2),
            &grid,
            1.0,
        )
        .unwrap();
        let r = sample_covariance(&ch);
        let h = &ch.matrices()[0];
        let expect = h.adjoint() * h;
        assert!((r.matrix() - expect).camax() < 1e-12);
    }

    #[test]
    fn rank_one_covariance_closed_form() {
        // Single zero-delay path: R = |gain|^2 * ||a_R||^2 * a_T a_T^H.
        let tx = ArrayGeometry::ula(4);
        let rx = ArrayGeometry::ula(3);
        let grid = OfdmGrid::new(8, 2, 1.0).unwrap();
        let gain = Complex64::new(0.8, -0.6);
        let ps = PathSet {
            paths: vec![Path {
                gain,
                delay: 0.0,
                aod_az: 0.7,
                aod_el: 0.0,
                aoa_az: 0.1,
                aoa_el: 0.0,
            }],
        };
        let ch = freq_response(&ps, &tx, &rx, &grid, 1.0).unwrap();
        let r = sample_covariance(&ch);
        let a_t = steering_vector(&tx, 0.7, 0.0).unwrap();
        let expect = (&a_t * a_t.adjoint()).scale(gain.norm_sqr() * 3.0);
        assert!((r.matrix() - expect).camax() < 1e-10);
        let eig = hermitian_eig(&r);
        assert!(eig.values[0] > 1e-6);
        for v in &eig.values[1..] {
            assert!(v.abs() < 1e-8 * eig.values[0], "rank must be 1");
        }
    }

    #[test]
    fn covariance_trace_matches_channel_energy() {
        let grid = OfdmGrid::new(16, 4, 1.0).unwrap();
        let ps = generate_clustered(&ClusterConfig::default(), &grid, 5);
        let ch = freq_response(
            &ps,
            &ArrayGeometry::ula(6),
            &ArrayGeometry::ula(2),
            &grid,
            1.0,
        )
        .unwrap();
        let r = sample_covariance(&ch);
        let trace: f64 = r.matrix().diagonal().iter().map(|z| z.re).sum();
        let energy: f64 = ch.matrices().iter().map(|m| m.norm_squared()).sum::<f64>() / 16.0;
        assert_abs_diff_eq!(trace, energy, epsilon = 1e-9 * energy.abs());
    }

    #[test]
    fn covariance_rank_is_bounded_by_path_count() {
        let grid = OfdmGrid::new(16, 4, 1.0).unwrap();
        let cfg = ClusterConfig {
            n_cluster: 3,
            n_subray: 1,
            ..ClusterConfig::default()
        };
        let ps = generate_clustered(&cfg, &grid, 23);
        let ch = freq_response(
            &ps,
            &ArrayGeometry::ula(7),
            &ArrayGeometry::ula(3),
            &grid,
            1.0,
        )
        .unwrap();
        let eig = hermitian_eig(&sample_covariance(&ch));
        for v in eig.values.iter().skip(3) {
            assert!(
                *v <= 1e-8 * eig.values[0],
                "covariance rank exceeds path count"
            );
        }
    }

    #[test]
    fn covariance_is_psd() {
        let grid = OfdmGrid::new(16, 4, 1.0).unwrap();
        let ps = generate_clustered(&ClusterConfig::default(), &grid, 17);
        let ch = freq_response(
            &ps,
            &ArrayGeometry::ula(5),
            &ArrayGeometry::ula(2),
            &grid,
            1.0,
        )
        .unwrap();
        let r = sample_covariance(&ch);
        let eig = hermitian_eig(&r);
        let scale = eig.values[0].abs().max(1.0);
        for v in &eig.values {
            assert!(*v >= -1e-9 * scale, "eigenvalue {v} below PSD tolerance");
        }
    }

    #[test]
    fn eig_identity() {
        let cov = Covariance::new(CMatrix::identity(3, 3)).unwrap();
        let eig = hermitian_eig(&cov);
        for v in &eig.values {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn eig_diagonal_sorts_descending() {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(3.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
        ]));
        let eig = hermitian_eig(&Covariance::new(m).unwrap());
        assert_eq!(eig.values, vec![3.0, 2.0, 1.0]);
        // Eigenvectors are permuted standard basis vectors with the phase
        // convention making the nonzero entry +1.
        let expected_positions = [0usize, 2, 1];
        for (col, &pos) in expected_positions.iter().enumerate() {
            for r in 0..3 {
                let want = if r == pos { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(eig.vectors[(r, col)].re, want, epsilon = 1e-12);
                assert_abs_diff_eq!(eig.vectors[(r, col)].im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn eig_reconstructs_and_is_deterministic() {
        let r = random_hermitian(6, 42);
        let cov = Covariance::new(r.clone()).unwrap();
        let eig = hermitian_eig(&cov);
        let lam = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            6,
            eig.values.iter().map(|&v| Complex64::new(v, 0.0)),
        ));
        let rec = &eig.vectors * lam * eig.vectors.adjoint();
        assert!((rec - &r).norm() <= 1e-8 * r.norm());
        for i in 0..6 {
            let v = eig.vectors.column(i);
            let rv = &r * v;
            let lv = v * Complex64::new(eig.values[i], 0.0);
            assert!((rv - lv).norm() <= 1e-8 * r.norm());
            // Phase convention: first non-tiny entry is real positive.
            let first = v.iter().find(|z| z.norm() > 1e-12).unwrap();
            assert!(first.im.abs() < 1e-10 && first.re > 0.0);
        }
        let again = hermitian_eig(&cov);
        assert_eq!(eig.values, again.values);
        assert_eq!(eig.vectors, again.vectors);
    }

    #[test]
    fn water_fill_single_gain_takes_everything() {
        let gains = DMatrix::from_row_slice(1, 1, &[2.5]);
        let alloc = water_fill(&gains, 3.0, 1.0).unwrap();
        assert_abs_diff_eq!(alloc.powers[(0, 0)], 3.0, epsilon = 1e-9 * 3.0);
    }

    #[test]
    fn water_fill_symmetric_split() {
        let gains = DMatrix::from_row_slice(2, 1, &[1.7, 1.7]);
        let alloc = water_fill(&gains, 4.0, 0.5).unwrap();
        assert_abs_diff_eq!(alloc.powers[(0, 0)], 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(alloc.powers[(1, 0)], 2.0, epsilon = 1e-8);
    }

    #[test]
    fn water_fill_deactivates_weak_stream() {
        // sigma2 = 1, gains [1, 0.01], P = 1: a shared level would need
        // p2 = mu - 100 < 0, so stream 2 must be off and stream 1 takes P.
        let gains = DMatrix::from_row_slice(2, 1, &[1.0, 0.01]);
        let alloc = water_fill(&gains, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(alloc.powers[(0, 0)], 1.0, epsilon = 1e-8);
        assert_eq!(alloc.powers[(1, 0)], 0.0);
        assert_abs_diff_eq!(alloc.water_level, 2.0, epsilon = 1e-8);
    }

    #[test]
    fn water_fill_zero_gains_is_error() {
        let gains = DMatrix::from_row_slice(2, 2, &[0.0; 4]);
        assert!(matches!(
            water_fill(&gains, 1.0, 1.0),
            Err(Error::NoUsableDimensions)
        ));
    }

    #[test]
    fn water_fill_kkt_conditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let gains = DMatrix::from_fn(3, 8, |_, _| {
                if rng.random::<f64>() < 0.2 {
                    0.0
                } else {
                    rng.random::<f64>() * 4.0
                }
            });
            if gains.iter().all(|&g| g == 0.0) {
                continue;
            }
            let p_tot = 1.0 + rng.random::<f64>() * 20.0;
            let sigma2 = 0.1 + rng.random::<f64>();
            let alloc = water_fill(&gains, p_tot, sigma2).unwrap();
            assert!((alloc.total() - p_tot).abs() <= 1e-9 * p_tot);
            for (g, p) in gains.iter().zip(alloc.powers.iter()) {
                if *p > 0.0 {
                    assert_abs_diff_eq!(
                        alloc.water_level - sigma2 / g,
                        *p,
                        epsilon = 1e-12 * alloc.water_level
                    );
                } else if *g > 0.0 {
                    assert!(alloc.water_level <= sigma2 / g + 1e-12 * alloc.water_level);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn water_fill_monotone_in_budget(
            seed in 0u64..500,
            p1 in 0.5f64..10.0,
            extra in 0.1f64..10.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gains = DMatrix::from_fn(2, 5, |_, _| rng.random::<f64>() * 3.0);
            let a = water_fill(&gains, p1, 1.0).unwrap();
            let b = water_fill(&gains, p1 + extra, 1.0).unwrap();
            for (x, y) in a.powers.iter().zip(b.powers.iter()) {
                prop_assert!(y + 1e-12 >= *x);
            }
        }
    }

    #[test]
    fn singular_values_match_between_gram_sides() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = CMatrix::from_fn(3, 7, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let a = singular_values_sq(&m);
        let b = {
            let gram = hermitize(m.adjoint() * &m);
            let mut ev: Vec<f64> = gram
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .map(|x| x.max(0.0))
                .collect();
            ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
            ev.truncate(3);
            ev
        };
        for (x, y) in a.iter().zip(b.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9 * (1.0 + x.abs()));
        }
    }
}
