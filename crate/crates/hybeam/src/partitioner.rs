//! Dynamic antenna-to-RF-chain partitioning.
//!
//! Searching all partitions of the transmit antennas for the one maximizing
//! the sum of per-subarray dominant eigenvalues is combinatorial (Stirling
//! numbers of the second kind), and the eigenvalues themselves have no closed
//! form. This module provides the machinery that makes the search tractable:
//!
//! - `approx_lambda1`: a normalized Minkowski l1-norm surrogate for the
//!   largest eigenvalue of a principal covariance submatrix,
//! - `lambda1_bounds`: trace-based lower/upper bounds that sandwich both the
//!   exact eigenvalue and the surrogate (for unit-diagonal Hermitian input),
//! - `exp_corr_lb`: the closed form the surrogate collapses to on
//!   exponential-correlation matrices,
//! - `greedy_partition`: a pair-driven greedy builder over the surrogate,
//! - `exhaustive_partition`: the enumeration oracle (restricted growth
//!   strings), guarded by partition counts,
//! - `stirling2` / `equal_size_count`: exact search-space sizes.

use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::precoder_subarray::Partition;
use crate::spectral::{hermitian_eig, Covariance};
use crate::CMatrix;

/// Default cap on the number of partitions an exhaustive search will visit.
pub const DEFAULT_EXHAUSTIVE_LIMIT: u64 = 10_000_000;

/// Compensated sum; the surrogate is compared against closed forms at 1e-12,
/// which naive summation over n^2 terms does not reliably reach.
fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

fn abs_matrix(cov: &Covariance) -> nalgebra::DMatrix<f64> {
    cov.matrix().map(|z| z.norm())
}

fn lambda_hat(abs: &nalgebra::DMatrix<f64>, subset: &[usize]) -> f64 {
    let total = kahan_sum(
        subset
            .iter()
            .flat_map(|&i| subset.iter().map(move |&j| abs[(i, j)])),
    );
    total / subset.len() as f64
}

/// Surrogate for the largest eigenvalue of the principal submatrix on `s`:
/// the mean absolute entry sum `(1/|S|) * sum_{i,j in S} |R_ij|`.
pub fn approx_lambda1(cov: &Covariance, s: &[usize]) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::invalid("index set must be non-empty"));
    }
    let n = cov.dim();
    if let Some(&bad) = s.iter().find(|&&i| i >= n) {
        return Err(Error::invalid(format!(
            "index {bad} out of range for dimension {n}"
        )));
    }
    Ok(lambda_hat(&abs_matrix(cov), s))
}

/// Trace-based bounds on the largest eigenvalue of a Hermitian matrix:
/// `m + s/sqrt(n-1) <= lambda_1 <= m + s*sqrt(n-1)` with `m = tr(R)/n` and
/// `s^2 = tr(R^2)/n - m^2`. A 1x1 matrix returns its sole entry twice.
pub fn lambda1_bounds(cov_s: &Covariance) -> (f64, f64) {
    let n = cov_s.dim();
    let mean: f64 = cov_s.matrix().diagonal().iter().map(|z| z.re).sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, mean);
    }
    // tr(R^2) = ||R||_F^2 for Hermitian R.
    let tr_sq = cov_s.matrix().norm_squared();
    let spread = (tr_sq / n as f64 - mean * mean).max(0.0).sqrt();
    let root = ((n - 1) as f64).sqrt();
    (mean + spread / root, mean + spread * root)
}

/// Exponential-correlation matrix with unit diagonal: entry (i, j) equals
/// `rho^(j-i)` above the diagonal and its conjugate below.
pub fn exp_corr(rho: Complex64, n: usize) -> Covariance {
    assert!(rho.norm() < 1.0, "correlation magnitude must be below 1");
    assert!(n >= 1);
    // Build powers in polar form so magnitudes stay accurate for large n.
    let (mag, arg) = (rho.norm(), rho.arg());
    let powers: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(mag.powi(k as i32), arg * k as f64))
        .collect();
    let m = CMatrix::from_fn(n, n, |i, j| {
        if j >= i {
            powers[j - i]
        } else {
            powers[i - j].conj()
        }
    });
    Covariance::new(m).expect("exponential correlation matrix is Hermitian")
}

/// Closed form of the surrogate on an exponential-correlation matrix:
/// `(1+r)/(1-r) - 2r(1-r^n)/(n(1-r)^2)` with `r = |rho|`.
pub fn exp_corr_lb(rho_abs: f64, n: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&rho_abs) {
        return Err(Error::invalid(format!(
            "correlation magnitude must be in [0, 1), got {rho_abs}"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    if rho_abs == 0.0 {
        return Ok(1.0);
    }
    let one_minus = 1.0 - rho_abs;
    let head = (1.0 + rho_abs) / one_minus;
    let tail = 2.0 * rho_abs * (1.0 - rho_abs.powi(n as i32)) / (n as f64 * one_minus * one_minus);
    Ok(head - tail)
}

/// Stirling number of the second kind: partitions of `n` items into exactly
/// `k` non-empty blocks. `k > n` yields 0.
pub fn stirling2(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    if n == 0 {
        return BigUint::one(); // k == 0 here
    }
    if k == 0 {
        return BigUint::zero();
    }
    // S(i, j) = j*S(i-1, j) + S(i-1, j-1); row-by-row over j = 0..=k.
    let mut row = vec![BigUint::zero(); k + 1];
    row[0] = BigUint::one();
    for i in 1..=n {
        let mut next = vec![BigUint::zero(); k + 1];
        for j in 1..=k.min(i) {
            next[j] = &row[j] * BigUint::from(j) + &row[j - 1];
        }
        row = next;
    }
    row[k].clone()
}

fn factorial(n: usize) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * BigUint::from(i))
}

/// Number of partitions of `n_tx` antennas into `n_rf` equal-size unlabeled
/// blocks: `n_tx! / ((n_tx/n_rf)!^n_rf * n_rf!)`.
pub fn equal_size_count(n_tx: usize, n_rf: usize) -> Result<BigUint> {
    if n_rf == 0 || !n_tx.is_multiple_of(n_rf) {
        return Err(Error::invalid(format!(
            "{n_tx} antennas cannot be split into {n_rf} equal subsets"
        )));
    }
    let block = n_tx / n_rf;
    let denom = factorial(block).pow(n_rf as u32) * factorial(n_rf);
    Ok(factorial(n_tx) / denom)
}

/// Random Hermitian positive semidefinite matrix with an exactly-unit
/// diagonal, seeded and portable. Used by the bound-validation sweeps; the
/// sandwich property assumes identical diagonal entries.
pub fn random_unit_diagonal_psd(n: usize, seed: u64) -> Covariance {
    use rand::{Rng, SeedableRng};
    assert!(n >= 1);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let a = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let r = &a * a.adjoint();
    let d: Vec<f64> = r.diagonal().iter().map(|z| z.re.max(1e-9)).collect();
    let m = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            let scaled = r[(i, j)] / (d[i] * d[j]).sqrt();
            let mirrored = r[(j, i)] / (d[j] * d[i]).sqrt();
            (scaled + mirrored.conj()) * 0.5
        }
    });
    Covariance::new(m).expect("normalized Gram matrix is Hermitian")
}

/// The greedy metric: 0 for the empty set, 0 for the unassigned pool
/// (`r == 0`) once all `n_rf` groups are seeded (`n_sel == n_rf`), the
/// surrogate `approx_lambda1` otherwise.
pub fn f_metric(cov: &Covariance, s: &[usize], n_rf: usize, n_sel: usize, r: usize) -> f64 {
    if s.is_empty() || (n_sel == n_rf && r == 0) {
        return 0.0;
    }
    approx_lambda1(cov, s).expect("f_metric requires in-range indices")
}

fn with_item(set: &[usize], item: usize) -> Vec<usize> {
    let mut v = set.to_vec();
    v.push(item);
    v
}

fn without_item(set: &[usize], item: usize) -> Vec<usize> {
    set.iter().copied().filter(|&x| x != item).collect()
}

/// Greedy dynamic partitioning over the `approx_lambda1` surrogate.
///
/// Off-diagonal covariance magnitudes are visited in descending order (ties
/// by ascending index pair). A pair of unassigned antennas seeds a new group
/// while fewer than `n_rf` exist, or joins the group with the best metric
/// gain afterwards. A pair straddling two sets triggers a single-antenna
/// relocation when it improves the two affected set metrics, with two
/// feasibility guards: no relocation may empty a group, and the unassigned
/// pool always keeps two antennas per group still to be seeded. Antennas
/// remaining in the pool afterwards are attached one by one to the group with
/// the largest metric gain (ties to the lowest group index).
pub fn greedy_partition(cov: &Covariance, n_rf: usize) -> Result<Partition> {
    let n = cov.dim();
    if n_rf == 0 {
        return Err(Error::invalid("n_rf must be at least 1"));
    }
    if n < 2 * n_rf {
        return Err(Error::invalid(format!(
            "need at least 2*n_rf = {} antennas to seed {n_rf} groups, got {n}",
            2 * n_rf
        )));
    }
    let abs = abs_matrix(cov);

    let mut pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    pairs.sort_by(|&a, &b| {
        abs[(b.0, b.1)]
            .partial_cmp(&abs[(a.0, a.1)])
            .unwrap()
            .then(a.cmp(&b))
    });

    // sets[0] is the unassigned pool; sets[1..=n_rf] are the groups.
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); n_rf + 1];
    sets[0] = (0..n).collect();
    let mut assign = vec![0usize; n];
    let mut n_sel = 0usize;

    let f = |set: &[usize], n_sel: usize, r: usize| -> f64 {
        if set.is_empty() || (n_sel == n_rf && r == 0) {
            0.0
        } else {
            lambda_hat(&abs, set)
        }
    };

    let move_item =
        |sets: &mut Vec<Vec<usize>>, assign: &mut Vec<usize>, item: usize, dst: usize| {
            let src = assign[item];
            sets[src].retain(|&x| x != item);
            let pos = sets[dst].partition_point(|&x| x < item);
            sets[dst].insert(pos, item);
            assign[item] = dst;
        };

    for &(i, j) in &pairs {
        let (m, l) = (assign[i], assign[j]);
        if m == 0 && l == 0 {
            if n_sel < n_rf {
                n_sel += 1;
                move_item(&mut sets, &mut assign, i, n_sel);
                move_item(&mut sets, &mut assign, j, n_sel);
            } else {
                let mut best = (f64::NEG_INFINITY, 1usize);
                for r in 1..=n_rf {
                    let mut joined = sets[r].clone();
                    joined.push(i);
                    joined.push(j);
                    let gain = f(&joined, n_sel, r) - f(&sets[r], n_sel, r);
                    if gain > best.0 {
                        best = (gain, r);
                    }
                }
                move_item(&mut sets, &mut assign, i, best.1);
                move_item(&mut sets, &mut assign, j, best.1);
            }
        } else if m != l {
            let mu_current = f(&sets[m], n_sel, m) + f(&sets[l], n_sel, l);
            let mu_new_j =
                f(&with_item(&sets[m], j), n_sel, m) + f(&without_item(&sets[l], j), n_sel, l);
            let mu_new_i =
                f(&without_item(&sets[m], i), n_sel, m) + f(&with_item(&sets[l], i), n_sel, l);
            // A removal is feasible if it neither empties a group nor starves
            // the pool of the two antennas each unseeded group still needs.
            let removal_ok = |src: usize, sets: &[Vec<usize>]| -> bool {
                if src == 0 {
                    n_sel == n_rf || sets[0].len() > 2 * (n_rf - n_sel)
                } else {
                    sets[src].len() > 1
                }
            };
            if mu_new_j > mu_new_i && mu_new_j > mu_current && m != 0 && removal_ok(l, &sets) {
                move_item(&mut sets, &mut assign, j, m);
            } else if mu_new_i > mu_new_j && mu_new_i > mu_current && l != 0 && removal_ok(m, &sets)
            {
                move_item(&mut sets, &mut assign, i, l);
            }
        }
    }

    // The pool reserve guarantees every group got pair-seeded; this loop only
    // exists so the covering contract survives any future guard change.
    while n_sel < n_rf {
        n_sel += 1;
        let seed = sets[0][0];
        move_item(&mut sets, &mut assign, seed, n_sel);
    }

    // Attach leftover pool antennas by best metric gain, lowest index first.
    while let Some(&item) = sets[0].first() {
        let mut best = (f64::NEG_INFINITY, 1usize);
        for r in 1..=n_rf {
            let gain = f(&with_item(&sets[r], item), n_sel, r) - f(&sets[r], n_sel, r);
            if gain > best.0 {
                best = (gain, r);
            }
        }
        move_item(&mut sets, &mut assign, item, best.1);
    }

    Partition::new(sets[1..].to_vec(), n)
}

/// Which per-subarray score the exhaustive search maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionScore {
    /// Dominant eigenvalue of each principal submatrix.
    ExactLambda1,
    /// The `approx_lambda1` surrogate.
    ApproxLambda1,
}

/// Exhaustively enumerate partitions of the antennas into exactly `n_rf`
/// non-empty blocks (restricted growth strings) and return the one
/// maximizing the summed per-block score, together with that score. With
/// `equal_size_only` the enumeration is restricted to equal block sizes.
///
/// Refuses instances whose partition count exceeds `limit`.
pub fn exhaustive_partition(
    cov: &Covariance,
    n_rf: usize,
    score: PartitionScore,
    equal_size_only: bool,
    limit: u64,
) -> Result<(Partition, f64)> {
    let n = cov.dim();
    if n_rf == 0 || n_rf > n {
        return Err(Error::invalid(format!(
            "n_rf must be in 1..={n}, got {n_rf}"
        )));
    }
    let count = if equal_size_only {
        equal_size_count(n, n_rf)?
    } else {
        stirling2(n, n_rf)
    };
    if count > BigUint::from(limit) {
        return Err(Error::ExhaustiveGuard(format!(
            "{count} candidate partitions exceed the limit of {limit}"
        )));
    }

    let abs = abs_matrix(cov);
    let block_score = |s: &[usize]| -> f64 {
        match score {
            PartitionScore::ApproxLambda1 => lambda_hat(&abs, s),
            PartitionScore::ExactLambda1 => {
                let sub = cov
                    .principal_submatrix(s)
                    .expect("enumerated indices are in range");
                hermitian_eig(&sub).values[0]
            }
        }
    };

    let mut best: Option<(Vec<Vec<usize>>, f64)> = None;
    let mut consider = |blocks: &[Vec<usize>]| {
        let total: f64 = blocks.iter().map(|b| block_score(b)).sum();
        if best.as_ref().map_or(true, |(_, s)| total > *s) {
            best = Some((blocks.to_vec(), total));
        }
    };

    if equal_size_only {
        let block = n / n_rf;
        let mut remaining: Vec<usize> = (0..n).collect();
        let mut blocks: Vec<Vec<usize>> = Vec::with_capacity(n_rf);
        enumerate_equal(&mut remaining, block, &mut blocks, &mut consider);
    } else {
        let mut assign = vec![0usize; n];
        enumerate_rgs(&mut assign, 1, 0, n_rf, &mut consider);
    }

    let (blocks, value) = best.expect("at least one partition exists");
    Ok((Partition::new(blocks, n)?, value))
}

/// Restricted-growth-string enumeration of partitions into exactly `k`
/// blocks; item 0 is pinned to block 0.
fn enumerate_rgs(
    assign: &mut Vec<usize>,
    i: usize,
    max_used: usize,
    k: usize,
    consider: &mut impl FnMut(&[Vec<usize>]),
) {
    let n = assign.len();
    if i == n {
        if max_used + 1 == k {
            let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); k];
            for (item, &b) in assign.iter().enumerate() {
                blocks[b].push(item);
            }
            consider(&blocks);
        }
        return;
    }
    let upper = (max_used + 1).min(k - 1);
    for v in 0..=upper {
        // Remaining items must still be able to open blocks up to k-1.
        if max_used.max(v) + (n - i - 1) + 1 < k {
            continue;
        }
        assign[i] = v;
        enumerate_rgs(assign, i + 1, max_used.max(v), k, consider);
    }
}

/// Enumerate equal-size partitions: the smallest remaining item leads the
/// next block, companions chosen lexicographically.
fn enumerate_equal(
    remaining: &mut Vec<usize>,
    block: usize,
    blocks: &mut Vec<Vec<usize>>,
    consider: &mut impl FnMut(&[Vec<usize>]),
) {
    if remaining.is_empty() {
        consider(blocks);
        return;
    }
    let leader = remaining[0];
    let rest: Vec<usize> = remaining[1..].to_vec();
    let mut combo = vec![0usize; block - 1];
    choose_rec(&rest, 0, 0, &mut combo, &mut |companions: &[usize]| {
        let mut members = Vec::with_capacity(block);
        members.push(leader);
        members.extend(companions.iter().map(|&idx| rest[idx]));
        let mut next: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|x| !members.contains(x))
            .collect();
        blocks.push(members);
        enumerate_equal(&mut next, block, blocks, consider);
        blocks.pop();
    });
}

fn choose_rec(
    items: &[usize],
    start: usize,
    depth: usize,
    combo: &mut Vec<usize>,
    cb: &mut impl FnMut(&[usize]),
) {
    if depth == combo.len() {
        cb(combo);
        return;
    }
    let need = combo.len() - depth;
    for idx in start..=(items.len().saturating_sub(need)) {
        combo[depth] = idx;
        choose_rec(items, idx + 1, depth + 1, combo, cb);
    }
}
