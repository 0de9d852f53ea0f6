//! Python bindings for the hybeam hybrid precoding simulator.
//!
//! Matrices cross the boundary as nested lists of Python complex numbers;
//! antenna indices are 1-based on the Python side, matching the partition
//! text format.

use num_bigint::BigUint;
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use hybeam::array;
use hybeam::channel;
use hybeam::cli;
use hybeam::evaluator;
use hybeam::partitioner;
use hybeam::precoder_full;
use hybeam::precoder_subarray;
use hybeam::spectral;
use hybeam::CMatrix;

fn to_py_err(e: hybeam::Error) -> PyErr {
    match e {
        hybeam::Error::InvalidArgument(_) | hybeam::Error::Config(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn matrix_to_rows(m: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

fn one_based(subsets: &[Vec<usize>]) -> Vec<Vec<usize>> {
    subsets
        .iter()
        .map(|s| s.iter().map(|i| i + 1).collect())
        .collect()
}

fn zero_based(subset: &[usize]) -> PyResult<Vec<usize>> {
    subset
        .iter()
        .map(|&i| {
            i.checked_sub(1)
                .ok_or_else(|| PyValueError::new_err("antenna indices are 1-based"))
        })
        .collect()
}

#[pyclass(name = "ArrayGeometry", frozen)]
struct PyArrayGeometry {
    inner: array::ArrayGeometry,
}

#[pymethods]
impl PyArrayGeometry {
    /// Uniform linear array with `elements` antennas.
    #[staticmethod]
    #[pyo3(signature = (elements, spacing=0.5))]
    fn ula(elements: usize, spacing: f64) -> Self {
        PyArrayGeometry {
            inner: array::ArrayGeometry::ula(elements).with_spacing(spacing),
        }
    }

    /// Uniform planar array, flattened row-major.
    #[staticmethod]
    #[pyo3(signature = (rows, cols, spacing=0.5))]
    fn upa(rows: usize, cols: usize, spacing: f64) -> Self {
        PyArrayGeometry {
            inner: array::ArrayGeometry::upa(rows, cols).with_spacing(spacing),
        }
    }

    #[getter]
    fn n_elements(&self) -> usize {
        self.inner.n_elements()
    }

    /// Unit-modulus array response vector at (azimuth, elevation) radians.
    fn steering_vector(&self, azimuth: f64, elevation: f64) -> PyResult<Vec<Complex64>> {
        let v = array::steering_vector(&self.inner, azimuth, elevation).map_err(to_py_err)?;
        Ok(v.iter().copied().collect())
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pyclass(name = "OfdmGrid", frozen)]
struct PyOfdmGrid {
    inner: channel::OfdmGrid,
}

#[pymethods]
impl PyOfdmGrid {
    #[new]
    #[pyo3(signature = (subcarriers=64, cyclic_prefix=16, sample_period=1.0))]
    fn new(subcarriers: usize, cyclic_prefix: usize, sample_period: f64) -> PyResult<Self> {
        Ok(PyOfdmGrid {
            inner: channel::OfdmGrid::new(subcarriers, cyclic_prefix, sample_period)
                .map_err(to_py_err)?,
        })
    }

    #[getter]
    fn subcarriers(&self) -> usize {
        self.inner.subcarriers
    }

    #[getter]
    fn cyclic_prefix(&self) -> usize {
        self.inner.cp_len
    }
}

#[pyclass(name = "ClusterConfig", frozen)]
struct PyClusterConfig {
    inner: channel::ClusterConfig,
}

#[pymethods]
impl PyClusterConfig {
    #[new]
    #[pyo3(signature = (clusters=8, subrays=10, angle_spread_deg=5.0, az_range_deg=180.0, el_range_deg=90.0))]
    fn new(
        clusters: usize,
        subrays: usize,
        angle_spread_deg: f64,
        az_range_deg: f64,
        el_range_deg: f64,
    ) -> Self {
        PyClusterConfig {
            inner: channel::ClusterConfig {
                n_cluster: clusters,
                n_subray: subrays,
                angle_spread_deg,
                az_range_deg,
                el_range_deg,
            },
        }
    }
}

#[pyclass(name = "FreqChannel", frozen)]
struct PyFreqChannel {
    inner: channel::FreqChannel,
}

#[pymethods]
impl PyFreqChannel {
    #[getter]
    fn subcarriers(&self) -> usize {
        self.inner.subcarriers()
    }

    #[getter]
    fn n_rx(&self) -> usize {
        self.inner.n_rx()
    }

    #[getter]
    fn n_tx(&self) -> usize {
        self.inner.n_tx()
    }

    /// Channel matrix at subcarrier `k` (1-based) as nested lists.
    fn matrix(&self, k: usize) -> PyResult<Vec<Vec<Complex64>>> {
        if k == 0 || k > self.inner.subcarriers() {
            return Err(PyValueError::new_err("subcarrier index is 1-based"));
        }
        Ok(matrix_to_rows(&self.inner.matrices()[k - 1]))
    }
}

#[pyclass(name = "Covariance", frozen)]
struct PyCovariance {
    inner: spectral::Covariance,
}

#[pymethods]
impl PyCovariance {
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn matrix(&self) -> Vec<Vec<Complex64>> {
        matrix_to_rows(self.inner.matrix())
    }
}

#[pyclass(name = "Partition", frozen)]
struct PyPartition {
    inner: precoder_subarray::Partition,
}

#[pymethods]
impl PyPartition {
    /// Subsets as lists of 1-based antenna indices.
    fn subsets(&self) -> Vec<Vec<usize>> {
        one_based(self.inner.subsets())
    }

    /// One line per subset, comma-separated 1-based indices.
    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[staticmethod]
    fn from_text(text: &str, n_antennas: usize) -> PyResult<Self> {
        Ok(PyPartition {
            inner: precoder_subarray::Partition::from_text(text, n_antennas).map_err(to_py_err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("Partition({:?})", one_based(self.inner.subsets()))
    }
}

#[pyclass(name = "PrecoderSet", frozen)]
struct PyPrecoderSet {
    inner: precoder_full::PrecoderSet,
}

#[pymethods]
impl PyPrecoderSet {
    /// The wideband RF precoder (n_tx x n_rf).
    fn rf(&self) -> Vec<Vec<Complex64>> {
        matrix_to_rows(&self.inner.rf)
    }

    /// Baseband precoder at subcarrier `k` (1-based).
    fn baseband(&self, k: usize) -> PyResult<Vec<Vec<Complex64>>> {
        if k == 0 || k > self.inner.subcarriers() {
            return Err(PyValueError::new_err("subcarrier index is 1-based"));
        }
        Ok(matrix_to_rows(&self.inner.baseband[k - 1]))
    }

    /// Water-filled power per (stream, subcarrier).
    fn stream_powers(&self) -> Vec<Vec<f64>> {
        let p = &self.inner.stream_powers;
        (0..p.nrows())
            .map(|s| (0..p.ncols()).map(|k| p[(s, k)]).collect())
            .collect()
    }

    fn total_power(&self) -> f64 {
        self.inner.total_power()
    }

    #[getter]
    fn water_level(&self) -> f64 {
        self.inner.water_level
    }
}

/// Draw a clustered channel and return its per-subcarrier responses.
#[pyfunction]
#[pyo3(signature = (cfg, tx, rx, grid, seed, rolloff=1.0))]
fn generate_channel(
    cfg: &PyClusterConfig,
    tx: &PyArrayGeometry,
    rx: &PyArrayGeometry,
    grid: &PyOfdmGrid,
    seed: u64,
    rolloff: f64,
) -> PyResult<PyFreqChannel> {
    let paths = channel::generate_clustered(&cfg.inner, &grid.inner, seed);
    let ch = channel::freq_response(&paths, &tx.inner, &rx.inner, &grid.inner, rolloff)
        .map_err(to_py_err)?;
    Ok(PyFreqChannel { inner: ch })
}

/// Transmit-side sample covariance `(1/K) sum_k H[k]^H H[k]`.
#[pyfunction]
fn sample_covariance(ch: &PyFreqChannel) -> PyCovariance {
    PyCovariance {
        inner: spectral::sample_covariance(&ch.inner),
    }
}

/// Eigenvalues (descending) and eigenvector columns of a covariance.
#[pyfunction]
fn hermitian_eig(cov: &PyCovariance) -> (Vec<f64>, Vec<Vec<Complex64>>) {
    let eig = spectral::hermitian_eig(&cov.inner);
    (eig.values, matrix_to_rows(&eig.vectors))
}

/// Joint water-filling over a gains matrix; returns (powers, water_level).
#[pyfunction]
fn water_fill(gains: Vec<Vec<f64>>, p_tot: f64, sigma2: f64) -> PyResult<(Vec<Vec<f64>>, f64)> {
    let rows = gains.len();
    let cols = gains.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 || gains.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err(
            "gains must be a non-empty rectangular matrix",
        ));
    }
    let m = nalgebra::DMatrix::from_fn(rows, cols, |r, c| gains[r][c]);
    let alloc = spectral::water_fill(&m, p_tot, sigma2).map_err(to_py_err)?;
    let powers = (0..rows)
        .map(|r| (0..cols).map(|c| alloc.powers[(r, c)]).collect())
        .collect();
    Ok((powers, alloc.water_level))
}

/// Fully-connected hybrid design (eigenvector RF + SVD/water-filling BB).
#[pyfunction]
#[pyo3(signature = (ch, n_rf, p_tot, sigma2, constrained=false))]
fn design_fully_connected(
    ch: &PyFreqChannel,
    n_rf: usize,
    p_tot: f64,
    sigma2: f64,
    constrained: bool,
) -> PyResult<PyPrecoderSet> {
    let cov = spectral::sample_covariance(&ch.inner);
    let mut f = precoder_full::design_rf_fully(&cov, n_rf).map_err(to_py_err)?;
    if constrained {
        f = precoder_full::phase_project(&f);
    }
    let eff = precoder_full::effective_channel(&ch.inner, &f).map_err(to_py_err)?;
    let pre = precoder_full::design_bb(&eff, p_tot, sigma2, &f).map_err(to_py_err)?;
    Ok(PyPrecoderSet { inner: pre })
}

/// Fully-digital SVD + water-filling benchmark.
#[pyfunction]
fn design_fully_digital(ch: &PyFreqChannel, p_tot: f64, sigma2: f64) -> PyResult<PyPrecoderSet> {
    Ok(PyPrecoderSet {
        inner: precoder_full::design_fully_digital(&ch.inner, p_tot, sigma2).map_err(to_py_err)?,
    })
}

/// Block-sparse subarray design for a given partition.
#[pyfunction]
fn design_subarray(
    ch: &PyFreqChannel,
    part: &PyPartition,
    p_tot: f64,
    sigma2: f64,
) -> PyResult<PyPrecoderSet> {
    let cov = spectral::sample_covariance(&ch.inner);
    let f = precoder_subarray::design_rf_subarray(&cov, &part.inner).map_err(to_py_err)?;
    let eff = precoder_full::effective_channel(&ch.inner, &f).map_err(to_py_err)?;
    let pre = precoder_full::design_bb(&eff, p_tot, sigma2, &f).map_err(to_py_err)?;
    Ok(PyPrecoderSet { inner: pre })
}

/// (total bits, per-subcarrier bps/Hz) of a designed link.
#[pyfunction]
fn mutual_information(ch: &PyFreqChannel, pre: &PyPrecoderSet, sigma2: f64) -> (f64, f64) {
    let mi = evaluator::mutual_information(&ch.inner, &pre.inner, sigma2);
    (mi.total_bits, mi.per_subcarrier)
}

/// Relaxed RF objective: summed squared singular values of the effective
/// channels for the precoder's RF matrix.
#[pyfunction]
fn relaxed_objective(ch: &PyFreqChannel, pre: &PyPrecoderSet) -> PyResult<f64> {
    evaluator::relaxed_objective(&ch.inner, &pre.inner.rf).map_err(to_py_err)
}

/// (exact, upper) per-stream spectral efficiency pair of the raw channel.
#[pyfunction]
fn jensen_pair(ch: &PyFreqChannel, sigma2: f64) -> (f64, f64) {
    evaluator::jensen_pair(&ch.inner, sigma2)
}

/// Canonical fixed partition: adjacent | interlaced | horizontal | vertical
/// | squared.
#[pyfunction]
fn fixed_partition(kind: &str, geom: &PyArrayGeometry, n_rf: usize) -> PyResult<PyPartition> {
    let kind: precoder_subarray::FixedKind = kind.parse().map_err(to_py_err)?;
    Ok(PyPartition {
        inner: precoder_subarray::fixed_partition(kind, &geom.inner, n_rf).map_err(to_py_err)?,
    })
}

/// Greedy dynamic partition over the covariance surrogate.
#[pyfunction]
fn greedy_partition(cov: &PyCovariance, n_rf: usize) -> PyResult<PyPartition> {
    Ok(PyPartition {
        inner: partitioner::greedy_partition(&cov.inner, n_rf).map_err(to_py_err)?,
    })
}

/// Exhaustive partition search; score is "approx" or "exact".
#[pyfunction]
#[pyo3(signature = (cov, n_rf, score="approx", equal_size_only=false, limit=partitioner::DEFAULT_EXHAUSTIVE_LIMIT))]
fn exhaustive_partition(
    cov: &PyCovariance,
    n_rf: usize,
    score: &str,
    equal_size_only: bool,
    limit: u64,
) -> PyResult<(PyPartition, f64)> {
    let score = match score {
        "approx" => partitioner::PartitionScore::ApproxLambda1,
        "exact" => partitioner::PartitionScore::ExactLambda1,
        other => {
            return Err(PyValueError::new_err(format!(
                "score must be \"approx\" or \"exact\", got {other:?}"
            )))
        }
    };
    let (part, value) =
        partitioner::exhaustive_partition(&cov.inner, n_rf, score, equal_size_only, limit)
            .map_err(to_py_err)?;
    Ok((PyPartition { inner: part }, value))
}

/// Partition objective `K * sum_r lambda_1(R_{S_r})`.
#[pyfunction]
fn subarray_objective(cov: &PyCovariance, part: &PyPartition) -> PyResult<f64> {
    precoder_subarray::subarray_objective(&cov.inner, &part.inner).map_err(to_py_err)
}

/// Largest-eigenvalue surrogate of a principal submatrix (1-based indices).
#[pyfunction]
fn approx_lambda1(cov: &PyCovariance, subset: Vec<usize>) -> PyResult<f64> {
    partitioner::approx_lambda1(&cov.inner, &zero_based(&subset)?).map_err(to_py_err)
}

/// Trace-based (lower, upper) bounds on the largest eigenvalue of a
/// principal submatrix (1-based indices).
#[pyfunction]
fn lambda1_bounds(cov: &PyCovariance, subset: Vec<usize>) -> PyResult<(f64, f64)> {
    let sub = cov
        .inner
        .principal_submatrix(&zero_based(&subset)?)
        .map_err(to_py_err)?;
    Ok(partitioner::lambda1_bounds(&sub))
}

/// Closed-form surrogate value on an exponential-correlation matrix.
#[pyfunction]
fn exp_corr_lb(rho_abs: f64, n: usize) -> PyResult<f64> {
    partitioner::exp_corr_lb(rho_abs, n).map_err(to_py_err)
}

/// Stirling number of the second kind (exact integer).
#[pyfunction]
fn stirling2(n: usize, k: usize) -> BigUint {
    partitioner::stirling2(n, k)
}

/// Number of equal-size partitions (exact integer).
#[pyfunction]
fn equal_size_count(n_tx: usize, n_rf: usize) -> PyResult<BigUint> {
    partitioner::equal_size_count(n_tx, n_rf).map_err(to_py_err)
}

/// Run a scenario config file end to end; returns (rows_written,
/// scheme_errors).
#[pyfunction]
#[pyo3(signature = (config_path, out=None))]
fn run_scenario(config_path: &str, out: Option<&str>) -> PyResult<(usize, Vec<String>)> {
    let mut scenario =
        cli::scenario_from_file(std::path::Path::new(config_path)).map_err(to_py_err)?;
    if let Some(out) = out {
        scenario.output = out.into();
    }
    let run = cli::execute(&scenario).map_err(to_py_err)?;
    Ok((run.rows.len(), run.scheme_errors))
}

#[pymodule]
fn hybeam_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyArrayGeometry>()?;
    m.add_class::<PyOfdmGrid>()?;
    m.add_class::<PyClusterConfig>()?;
    m.add_class::<PyFreqChannel>()?;
    m.add_class::<PyCovariance>()?;
    m.add_class::<PyPartition>()?;
    m.add_class::<PyPrecoderSet>()?;
    m.add_function(wrap_pyfunction!(generate_channel, m)?)?;
    m.add_function(wrap_pyfunction!(sample_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(hermitian_eig, m)?)?;
    m.add_function(wrap_pyfunction!(water_fill, m)?)?;
    m.add_function(wrap_pyfunction!(design_fully_connected, m)?)?;
    m.add_function(wrap_pyfunction!(design_fully_digital, m)?)?;
    m.add_function(wrap_pyfunction!(design_subarray, m)?)?;
    m.add_function(wrap_pyfunction!(mutual_information, m)?)?;
    m.add_function(wrap_pyfunction!(relaxed_objective, m)?)?;
    m.add_function(wrap_pyfunction!(jensen_pair, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_partition, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_partition, m)?)?;
    m.add_function(wrap_pyfunction!(exhaustive_partition, m)?)?;
    m.add_function(wrap_pyfunction!(subarray_objective, m)?)?;
    m.add_function(wrap_pyfunction!(approx_lambda1, m)?)?;
    m.add_function(wrap_pyfunction!(lambda1_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(exp_corr_lb, m)?)?;
    m.add_function(wrap_pyfunction!(stirling2, m)?)?;
    m.add_function(wrap_pyfunction!(equal_size_count, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
