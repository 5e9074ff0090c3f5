//! Python bindings: the generalized Gaussian family, the sign-sequence
//! statistics, exact p-values, detection boundaries, and the power-study
//! engine.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use mixdetect::calibration;
use mixdetect::distributions::MixtureModel;
use mixdetect::rngstream::{substream, TAG_TRIAL};
use mixdetect::sign_sequence::build_sign_sequence;
use mixdetect::simulation::{self, ExperimentConfig};
use mixdetect::statistics::{self, HcVariant, StatKind};
use mixdetect::theory;

fn value_err(e: mixdetect::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Symmetric generalized Gaussian with density exp(-|x/scale|^gamma/gamma),
/// normalized; gamma=2 is the standard normal, gamma=1 the double
/// exponential.
#[pyclass]
struct GeneralizedGaussian {
    inner: mixdetect::distributions::GeneralizedGaussian,
}

#[pymethods]
impl GeneralizedGaussian {
    #[new]
    #[pyo3(signature = (gamma, scale = 1.0))]
    fn new(gamma: f64, scale: f64) -> PyResult<Self> {
        Ok(Self {
            inner: mixdetect::distributions::GeneralizedGaussian::new(gamma, scale)
                .map_err(value_err)?,
        })
    }

    fn density(&self, x: f64) -> f64 {
        self.inner.density(x)
    }

    fn cdf(&self, x: f64) -> f64 {
        self.inner.cdf(x)
    }

    fn sf(&self, x: f64) -> f64 {
        self.inner.sf(x)
    }

    fn quantile(&self, u: f64) -> PyResult<f64> {
        self.inner.quantile(u).map_err(value_err)
    }

    /// n i.i.d. draws using the given seed.
    fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = substream(seed, TAG_TRIAL, 0, 0);
        self.inner.sample_n(n, &mut rng)
    }

    fn __repr__(&self) -> String {
        format!(
            "GeneralizedGaussian(gamma={}, scale={})",
            self.inner.shape(),
            self.inner.scale()
        )
    }
}

/// Signs of the sample ordered by decreasing |x| (ties and zeros broken by
/// the seeded stream), as a list of +1/-1.
#[pyfunction]
#[pyo3(signature = (x, seed = 0))]
fn sign_sequence(x: Vec<f64>, seed: u64) -> PyResult<Vec<i8>> {
    let mut rng = substream(seed, TAG_TRIAL, 0, 0);
    let seq = build_sign_sequence(&x, &mut rng).map_err(value_err)?;
    Ok(seq.signs().to_vec())
}

/// All seven sign-sequence statistics of a sample, as a dict.
#[pyfunction]
#[pyo3(signature = (x, seed = 0))]
fn rank_statistics(py: Python<'_>, x: Vec<f64>, seed: u64) -> PyResult<Py<pyo3::types::PyDict>> {
    use pyo3::types::PyDictMethods;
    let mut rng = substream(seed, TAG_TRIAL, 0, 0);
    let seq = build_sign_sequence(&x, &mut rng).map_err(value_err)?;
    let st = statistics::sign_sequence_stats(&seq);
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("sign", st.sign)?;
    dict.set_item("signed_rank", st.signed_rank)?;
    dict.set_item("smirnov", st.smirnov)?;
    dict.set_item("cusum", st.cusum)?;
    dict.set_item("tail_run", st.tail_run)?;
    dict.set_item("longest_run", st.longest_run)?;
    dict.set_item("num_runs_changes", st.num_runs_changes)?;
    Ok(dict.unbind())
}

#[pyfunction]
fn t_statistic(x: Vec<f64>) -> PyResult<f64> {
    statistics::t_statistic(&x).map_err(value_err)
}

fn parse_variant(variant: &str) -> PyResult<HcVariant> {
    match variant {
        "plus" => Ok(HcVariant::Plus),
        "full" => Ok(HcVariant::Full),
        other => Err(PyValueError::new_err(format!(
            "variant must be 'plus' or 'full', got '{other}'"
        ))),
    }
}

/// Higher criticism of the sample against a known generalized Gaussian null.
#[pyfunction]
#[pyo3(signature = (x, gamma, scale = 1.0, variant = "plus"))]
fn hc_statistic(x: Vec<f64>, gamma: f64, scale: f64, variant: &str) -> PyResult<f64> {
    let null =
        mixdetect::distributions::GeneralizedGaussian::new(gamma, scale).map_err(value_err)?;
    statistics::hc_statistic(&x, &null, parse_variant(variant)?).map_err(value_err)
}

/// Log likelihood ratio of the sample for a fully specified mixture.
#[pyfunction]
#[pyo3(signature = (x, gamma, epsilon, mu, scale = 1.0))]
fn lrt_statistic(x: Vec<f64>, gamma: f64, epsilon: f64, mu: f64, scale: f64) -> PyResult<f64> {
    let d = mixdetect::distributions::GeneralizedGaussian::new(gamma, scale).map_err(value_err)?;
    let m = MixtureModel::new(d, d, epsilon, mu).map_err(value_err)?;
    Ok(statistics::lrt_statistic(&x, &m))
}

#[pyfunction]
fn pvalue_sign(s: i64, n: usize) -> PyResult<f64> {
    calibration::pvalue_sign(s, n).map_err(value_err)
}

#[pyfunction]
fn pvalue_runs(r: i64, n: usize) -> PyResult<f64> {
    calibration::pvalue_runs(r, n).map_err(value_err)
}

#[pyfunction]
fn pvalue_tail_run(l: i64) -> PyResult<f64> {
    calibration::pvalue_tail_run(l).map_err(value_err)
}

#[pyfunction]
fn pvalue_smirnov(s_star: i64, n: usize) -> f64 {
    calibration::pvalue_smirnov(s_star, n)
}

#[pyfunction]
fn rho_star(gamma: f64, beta: f64) -> PyResult<f64> {
    theory::rho_star(gamma, beta).map_err(value_err)
}

#[pyfunction]
fn rho_tail(gamma: f64, beta: f64) -> PyResult<f64> {
    theory::rho_tail(gamma, beta).map_err(value_err)
}

#[pyfunction]
fn rho_long(gamma: f64, beta: f64) -> PyResult<f64> {
    theory::rho_long(gamma, beta).map_err(value_err)
}

#[pyfunction]
fn dense_threshold_s(gamma: f64, beta: f64) -> PyResult<f64> {
    theory::dense_threshold_s(gamma, beta).map_err(value_err)
}

/// Run a power study from a JSON config string; returns the CSV text.
#[pyfunction]
fn power_study(config_json: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(value_err)?;
    let table = simulation::estimate_power(cfg).map_err(value_err)?;
    Ok(simulation::power_csv(&table))
}

/// Names of all available tests.
#[pyfunction]
fn test_names() -> Vec<&'static str> {
    StatKind::ALL.iter().map(|k| k.name()).collect()
}

#[pymodule]
fn mixdetect_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<GeneralizedGaussian>()?;
    m.add_function(wrap_pyfunction!(sign_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(rank_statistics, m)?)?;
    m.add_function(wrap_pyfunction!(t_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(hc_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(lrt_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(pvalue_sign, m)?)?;
    m.add_function(wrap_pyfunction!(pvalue_runs, m)?)?;
    m.add_function(wrap_pyfunction!(pvalue_tail_run, m)?)?;
    m.add_function(wrap_pyfunction!(pvalue_smirnov, m)?)?;
    m.add_function(wrap_pyfunction!(rho_star, m)?)?;
    m.add_function(wrap_pyfunction!(rho_tail, m)?)?;
    m.add_function(wrap_pyfunction!(rho_long, m)?)?;
    m.add_function(wrap_pyfunction!(dense_threshold_s, m)?)?;
    m.add_function(wrap_pyfunction!(power_study, m)?)?;
    m.add_function(wrap_pyfunction!(test_names, m)?)?;
    Ok(())
}
