//! Block-structured RF precoding for antenna subarrays.
//!
//! Each RF chain drives a disjoint subset of the transmit antennas, so the RF
//! precoder is block-sparse: column r is nonzero only on the rows of subset r,
//! where it carries the dominant eigenvector of the corresponding principal
//! covariance submatrix. Canonical fixed partitions (adjacent, interlaced,
//! and the planar row/column/tile splits) are generated here; dynamic
//! partitions come from [`crate::partitioner`].

use std::fmt;
use std::str::FromStr;

use crate::array::{ArrayGeometry, ArrayKind};
use crate::error::{Error, Result};
use crate::spectral::{hermitian_eig, Covariance};
use crate::CMatrix;

/// An ordered family of disjoint, non-empty antenna-index subsets covering
/// the whole array. Indices are 0-based internally; the text form is 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    subsets: Vec<Vec<usize>>,
    n_antennas: usize,
}

impl Partition {
    /// Validate and canonicalize (each subset sorted ascending; subset order
    /// preserved).
    pub fn new(subsets: Vec<Vec<usize>>, n_antennas: usize) -> Result<Self> {
        if subsets.is_empty() {
            return Err(Error::invalid("partition needs at least one subset"));
        }
        let mut seen = vec![false; n_antennas];
        let mut count = 0usize;
        for s in &subsets {
            if s.is_empty() {
                return Err(Error::invalid("partition subsets must be non-empty"));
            }
            for &i in s {
                if i >= n_antennas {
                    return Err(Error::invalid(format!(
                        "antenna index {i} out of range for {n_antennas} antennas"
                    )));
                }
                if seen[i] {
                    return Err(Error::invalid(format!(
                        "antenna index {i} appears in more than one subset"
                    )));
                }
                seen[i] = true;
                count += 1;
            }
        }
        if count != n_antennas {
            return Err(Error::invalid(format!(
                "partition covers {count} of {n_antennas} antennas"
            )));
        }
        let mut subsets = subsets;
        for s in &mut subsets {
            s.sort_unstable();
        }
        Ok(Partition {
            subsets,
            n_antennas,
        })
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn n_subsets(&self) -> usize {
        self.subsets.len()
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    /// Text form: one line per subset, comma-separated 1-based indices.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.subsets {
            let line: Vec<String> = s.iter().map(|i| (i + 1).to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// Parse the [`to_text`](Self::to_text) format.
    pub fn from_text(text: &str, n_antennas: usize) -> Result<Self> {
        let mut subsets = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut subset = Vec::new();
            for field in line.split(',') {
                let idx: usize = field.trim().parse().map_err(|_| {
                    Error::invalid(format!(
                        "partition line {}: bad index {:?}",
                        lineno + 1,
                        field
                    ))
                })?;
                if idx == 0 {
                    return Err(Error::invalid(format!(
                        "partition line {}: indices are 1-based",
                        lineno + 1
                    )));
                }
                subset.push(idx - 1);
            }
            subsets.push(subset);
        }
        Partition::new(subsets, n_antennas)
    }

    /// Single-field form for CSV cells: subsets joined by `|`, 1-based
    /// indices joined by spaces, e.g. `1 2 3|4 5 6`.
    pub fn csv_cell(&self) -> String {
        self.subsets
            .iter()
            .map(|s| {
                s.iter()
                    .map(|i| (i + 1).to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect::<Vec<_>>()
            .join("|")
    }
}

/// The canonical fixed subarray layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedKind {
    /// Consecutive blocks of `n_tx / n_rf` antennas.
    Adjacent,
    /// Stride-`n_rf` combs: subset r holds antennas r, r + n_rf, ...
    Interlaced,
    /// Whole-row groups of a planar array.
    Horizontal,
    /// Whole-column groups of a planar array.
    Vertical,
    /// Rectangular tiles, as close to square as the dimensions allow.
    Squared,
}

impl FixedKind {
    pub const ALL: [FixedKind; 5] = [
        FixedKind::Adjacent,
        FixedKind::Interlaced,
        FixedKind::Horizontal,
        FixedKind::Vertical,
        FixedKind::Squared,
    ];
}

impl fmt::Display for FixedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FixedKind::Adjacent => "adjacent",
            FixedKind::Interlaced => "interlaced",
            FixedKind::Horizontal => "horizontal",
            FixedKind::Vertical => "vertical",
            FixedKind::Squared => "squared",
        };
        f.write_str(s)
    }
}

impl FromStr for FixedKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adjacent" => Ok(FixedKind::Adjacent),
            "interlaced" => Ok(FixedKind::Interlaced),
            "horizontal" => Ok(FixedKind::Horizontal),
            "vertical" => Ok(FixedKind::Vertical),
            "squared" => Ok(FixedKind::Squared),
            other => Err(Error::invalid(format!(
                "unknown fixed subarray kind {other:?}"
            ))),
        }
    }
}

/// Build a fixed partition of `geom` into `n_rf` equal subarrays.
///
/// Planar kinds require a UPA; all kinds require the relevant dimension to be
/// divisible. UPA antennas are indexed row-major, matching
/// [`crate::array::steering_vector`].
pub fn fixed_partition(kind: FixedKind, geom: &ArrayGeometry, n_rf: usize) -> Result<Partition> {
    let n_tx = geom.n_elements();
    if n_rf == 0 || n_rf > n_tx {
        return Err(Error::invalid(format!(
            "n_rf must be in 1..={n_tx}, got {n_rf}"
        )));
    }
    let require_divisible = |num: usize, what: &str| -> Result<usize> {
        if !num.is_multiple_of(n_rf) {
            Err(Error::invalid(format!(
                "{what} ({num}) is not divisible by n_rf ({n_rf})"
            )))
        } else {
            Ok(num / n_rf)
        }
    };
    let upa_dims = || -> Result<(usize, usize)> {
        match geom.kind {
            ArrayKind::Upa { rows, cols } => Ok((rows, cols)),
            ArrayKind::Ula { .. } => Err(Error::invalid(format!(
                "{kind} subarrays require a planar array"
            ))),
        }
    };

    let subsets: Vec<Vec<usize>> = match kind {
        FixedKind::Adjacent => {
            let n_sub = require_divisible(n_tx, "antenna count")?;
            (0..n_rf)
                .map(|r| (r * n_sub..(r + 1) * n_sub).collect())
                .collect()
        }
        FixedKind::Interlaced => {
            require_divisible(n_tx, "antenna count")?;
            (0..n_rf)
                .map(|r| (r..n_tx).step_by(n_rf).collect())
                .collect()
        }
        FixedKind::Horizontal => {
            let (rows, cols) = upa_dims()?;
            let rows_per = require_divisible(rows, "row count")?;
            (0..n_rf)
                .map(|g| {
                    (g * rows_per..(g + 1) * rows_per)
                        .flat_map(|r| (0..cols).map(move |c| r * cols + c))
                        .collect()
                })
                .collect()
        }
        FixedKind::Vertical => {
            let (rows, cols) = upa_dims()?;
            let cols_per = require_divisible(cols, "column count")?;
            (0..n_rf)
                .map(|g| {
                    (0..rows)
                        .flat_map(|r| (g * cols_per..(g + 1) * cols_per).map(move |c| r * cols + c))
                        .collect()
                })
                .collect()
        }
        FixedKind::Squared => {
            let (rows, cols) = upa_dims()?;
            // Pick the factorization n_rf = gr * gc with gr | rows and
            // gc | cols whose tiles are closest to square; ties resolved by
            // the smallest gr.
            let mut best: Option<(usize, usize, usize)> = None;
            for gr in 1..=n_rf {
                if !n_rf.is_multiple_of(gr) {
                    continue;
                }
                let gc = n_rf / gr;
                if !rows.is_multiple_of(gr) || !cols.is_multiple_of(gc) {
                    continue;
                }
                let (tr, tc) = (rows / gr, cols / gc);
                let skew = tr.abs_diff(tc);
                if best.map_or(true, |(s, _, _)| skew < s) {
                    best = Some((skew, gr, gc));
                }
            }
            let (_, gr, gc) = best.ok_or_else(|| {
                Error::invalid(format!(
                    "no tiling of a {rows}x{cols} array into {n_rf} rectangular subarrays"
                ))
            })?;
            let (tr, tc) = (rows / gr, cols / gc);
            (0..gr)
                .flat_map(|gi| {
                    (0..gc).map(move |gj| {
                        (gi * tr..(gi + 1) * tr)
                            .flat_map(|r| (gj * tc..(gj + 1) * tc).map(move |c| r * cols + c))
                            .collect()
                    })
                })
                .collect()
        }
    };
    Partition::new(subsets, n_tx)
}

/// Principal covariance submatrices for each subset, in subset order.
pub fn subarray_covariances(cov: &Covariance, part: &Partition) -> Result<Vec<Covariance>> {
    if part.n_antennas() != cov.dim() {
        return Err(Error::invalid(format!(
            "partition over {} antennas does not match covariance dimension {}",
            part.n_antennas(),
            cov.dim()
        )));
    }
    part.subsets()
        .iter()
        .map(|s| cov.principal_submatrix(s))
        .collect()
}

/// Block-sparse RF precoder: column r is the dominant eigenvector of the
/// subset-r covariance, placed on the rows of subset r.
pub fn design_rf_subarray(cov: &Covariance, part: &Partition) -> Result<CMatrix> {
    let subs = subarray_covariances(cov, part)?;
    let mut f = CMatrix::zeros(cov.dim(), part.n_subsets());
    for (r, (subset, sub_cov)) in part.subsets().iter().zip(subs.iter()).enumerate() {
        let eig = hermitian_eig(sub_cov);
        for (local, &antenna) in subset.iter().enumerate() {
            f[(antenna, r)] = eig.vectors[(local, 0)];
        }
    }
    Ok(f)
}

/// The relaxed precoding objective achieved by a partition:
/// `K * sum_r lambda_1(R_{S_r})` with `K` taken from the covariance.
pub fn subarray_objective(cov: &Covariance, part: &Partition) -> Result<f64> {
    let subs = subarray_covariances(cov, part)?;
    let sum: f64 = subs
        .iter()
        .map(|sub| hermitian_eig(sub).values[0].max(0.0))
        .sum();
    Ok(cov.n_subcarriers() as f64 * sum)
}
