//! Python bindings: configuration, simulated or loaded panels, the scoring
//! stages and the inference entry points. Structured results come back as
//! plain dicts and lists.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use pfp_core::awards::award_ledger;
use pfp_core::data::Panel;
use pfp_core::estimators::specs::{Labels, PreparedSpec, SpecName, Tier};
use pfp_core::inference::{joint_permute, ks_statistic, ri_pvalue, Dimension, JointSet, PermutationSet, StatKind};
use pfp_core::io::{load_panel, row_counts, write_panel, RunConfig};
use pfp_core::irt::{eap_score, fit_2pl, score_panel, ResponseMatrix};
use pfp_core::metric::bn_scores;
use pfp_core::pipeline::{run_pipeline, tva_obs};
use pfp_core::rng::Seeder;
use pfp_core::theory::{decompose_effects, selection_boundary, TeachArm};
use pfp_core::tva::{eb_value_added, fit_tva_model};
use pfp_core::world::{gen_world, simulate_outcomes};
use pfp_core::Error;

create_exception!(pfp, ValidationError, PyValueError, "Bad configuration or input data.");
create_exception!(pfp, NumericalError, PyArithmeticError, "A fit or statistic failed numerically.");

fn raise(e: Error) -> PyErr {
    if e.exit_code() == 2 {
        ValidationError::new_err(e.to_string())
    } else {
        NumericalError::new_err(e.to_string())
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn config_or_default(config: Option<PyRef<'_, Config>>) -> RunConfig {
    config.map(|c| c.inner.clone()).unwrap_or_default()
}

/// Run configuration. Build from TOML text, or take the defaults.
#[pyclass(module = "pfp", skip_from_py_object)]
#[derive(Clone)]
struct Config {
    inner: RunConfig,
}

#[pymethods]
impl Config {
    #[new]
    #[pyo3(signature = (toml=None))]
    fn new(toml: Option<&str>) -> PyResult<Self> {
        let inner = match toml {
            Some(t) => RunConfig::from_toml(t).map_err(raise)?,
            None => RunConfig::default(),
        };
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: RunConfig::load(&path).map_err(raise)?,
        })
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn out(&self) -> PathBuf {
        self.inner.out.clone()
    }

    #[setter]
    fn set_out(&mut self, out: PathBuf) {
        self.inner.out = out;
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml().map_err(raise)
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(raise)
    }

    fn __repr__(&self) -> String {
        format!("Config(seed={}, out={:?})", self.inner.seed, self.inner.out)
    }
}

/// Experiment panel: design units, rosters, outcomes and applicants.
#[pyclass(module = "pfp", name = "Panel")]
struct PanelData {
    inner: Panel,
}

fn parse_spec(name: &str) -> PyResult<SpecName> {
    SpecName::parse(name).ok_or_else(|| ValidationError::new_err(format!("unknown spec `{name}`")))
}

#[pymethods]
impl PanelData {
    /// Simulate a world and its outcomes from the configuration.
    #[staticmethod]
    #[pyo3(signature = (config=None))]
    fn simulate(config: Option<PyRef<'_, Config>>) -> PyResult<Self> {
        let cfg = config_or_default(config);
        cfg.validate().map_err(raise)?;
        let s = Seeder::new(cfg.seed);
        let world = gen_world(&cfg.world, &cfg.menu, &cfg.distribution, s.child("world", 0).master()).map_err(raise)?;
        let inner = simulate_outcomes(&world, &cfg.effects, &cfg.menu, s.child("outcomes", 0).master()).map_err(raise)?;
        Ok(Self { inner })
    }

    /// Load a panel directory written by `write` or by the `simulate` stage.
    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: load_panel(&dir).map_err(raise)?,
        })
    }

    fn write(&self, dir: PathBuf) -> PyResult<()> {
        std::fs::create_dir_all(&dir)?;
        write_panel(&self.inner, &dir).map_err(raise)
    }

    /// Rows per CSV file.
    fn row_counts<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &row_counts(&self.inner))
    }

    /// Replace pupil scores by standardized IRT ability estimates; returns
    /// one fit summary per subject-grade-round test.
    #[pyo3(signature = (config=None))]
    fn score_irt<'py>(&mut self, py: Python<'py>, config: Option<PyRef<'_, Config>>) -> PyResult<Bound<'py, PyAny>> {
        let cfg = config_or_default(config);
        let fits = score_panel(&mut self.inner, &cfg.irt).map_err(raise)?;
        to_py(py, &fits)
    }

    /// Seeded-tournament pupil ranks and teacher learning scores.
    #[pyo3(signature = (round, config=None))]
    fn bn_scores<'py>(&self, py: Python<'py>, round: u8, config: Option<PyRef<'_, Config>>) -> PyResult<Bound<'py, PyAny>> {
        let cfg = config_or_default(config);
        to_py(py, &bn_scores(&self.inner, round, &cfg.metric).map_err(raise)?)
    }

    /// Composite scores, awards and payouts for one round.
    #[pyo3(signature = (round, config=None))]
    fn awards<'py>(&self, py: Python<'py>, round: u8, config: Option<PyRef<'_, Config>>) -> PyResult<Bound<'py, PyAny>> {
        let cfg = config_or_default(config);
        let learning = bn_scores(&self.inner, round, &cfg.metric).map_err(raise)?;
        let ledger = award_ledger(&self.inner, round, &learning.teachers, cfg.awards.share, &cfg.menu).map_err(raise)?;
        to_py(py, &ledger)
    }

    /// Fit one pre-specified regression under the observed assignment.
    #[pyo3(signature = (spec, config=None))]
    fn fit<'py>(&self, py: Python<'py>, spec: &str, config: Option<PyRef<'_, Config>>) -> PyResult<Bound<'py, PyAny>> {
        let cfg = config_or_default(config);
        let prepared = PreparedSpec::new(parse_spec(spec)?, &self.inner, &cfg.estimator.options).map_err(raise)?;
        to_py(py, &prepared.fit(&Labels::observed(&self.inner)).map_err(raise)?)
    }

    /// Randomization p-value of a spec's headline coefficient.
    #[pyo3(signature = (spec, draws=199, seed=0, config=None))]
    fn randomization_test<'py>(
        &self,
        py: Python<'py>,
        spec: &str,
        draws: usize,
        seed: u64,
        config: Option<PyRef<'_, Config>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let cfg = config_or_default(config);
        let name = parse_spec(spec)?;
        let prepared = PreparedSpec::new(name, &self.inner, &cfg.estimator.options).map_err(raise)?;
        let observed = Labels::observed(&self.inner);
        let first = prepared.fit(&observed).map_err(raise)?;
        let kind = match first.stat_kind {
            pfp_core::estimators::StatKind::T => StatKind::StudentizedT,
            pfp_core::estimators::StatKind::Z => StatKind::StudentizedZ,
        };
        let (coef, tier) = name.headline();
        let s = Seeder::new(seed);
        let adv = PermutationSet::new(Dimension::Advertised, &observed.advertised, draws, s.child("advertised", 0).master());
        let exp = PermutationSet::new(Dimension::Experienced, &observed.experienced, draws, s.child("experienced", 0).master());
        let result = match tier {
            Tier::Advertised => ri_pvalue(|l| prepared.fit(&observed.with_advertised(l))?.stat(coef), &adv.map_err(raise)?, kind),
            Tier::Experienced => ri_pvalue(|l| prepared.fit(&observed.with_experienced(l))?.stat(coef), &exp.map_err(raise)?, kind),
            Tier::Joint => {
                let joint = JointSet::new(adv.map_err(raise)?, exp.map_err(raise)?, draws, s.child("joint", 0).master());
                let stat = |a: &[u8], e: &[u8]| {
                    let labels = Labels {
                        advertised: a.to_vec(),
                        experienced: e.to_vec(),
                    };
                    prepared.fit(&labels)?.stat(coef)
                };
                joint_permute(stat, &joint, kind)
            }
        }
        .map_err(raise)?;
        to_py(py, &result)
    }

    /// Empirical-Bayes teacher value added from the panel's pupil scores.
    #[pyo3(signature = (config=None))]
    fn value_added<'py>(&self, py: Python<'py>, config: Option<PyRef<'_, Config>>) -> PyResult<Bound<'py, PyAny>> {
        let cfg = config_or_default(config);
        let fit = fit_tva_model(&tva_obs(&self.inner), &cfg.tva.options).map_err(raise)?;
        let estimates = eb_value_added(&fit.components);
        to_py(
            py,
            &serde_json::json!({"components": fit.components, "estimates": estimates}),
        )
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "Panel(markets={}, schools={}, teachers={}, observations={})",
            p.markets.len(),
            p.schools.len(),
            p.teachers.len(),
            p.observations.len()
        )
    }
}

/// Run the configured stages and return their manifests.
#[pyfunction]
fn run(py: Python<'_>, config: PyRef<'_, Config>) -> PyResult<Py<PyAny>> {
    let report = run_pipeline(&config.inner).map_err(raise)?;
    Ok(to_py(py, &report.manifests)?.unbind())
}

/// Lowest motivation at which a type of ability `theta` teaches under `arm`
/// ("fw" or "p4p").
#[pyfunction]
#[pyo3(signature = (arm, theta, config=None))]
fn boundary(arm: &str, theta: f64, config: Option<PyRef<'_, Config>>) -> PyResult<f64> {
    let cfg = config_or_default(config);
    let arm = match arm.to_ascii_lowercase().as_str() {
        "fw" => TeachArm::Fw,
        "p4p" => TeachArm::P4p,
        other => return Err(ValidationError::new_err(format!("unknown arm `{other}`"))),
    };
    selection_boundary(arm, theta, &cfg.menu, &cfg.distribution).map_err(raise)
}

/// Monte Carlo selection and incentive decomposition of expected performance.
#[pyfunction]
#[pyo3(signature = (draws=100_000, seed=0, config=None))]
fn decomposition<'py>(py: Python<'py>, draws: usize, seed: u64, config: Option<PyRef<'_, Config>>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config_or_default(config);
    to_py(py, &decompose_effects(&cfg.menu, &cfg.distribution, draws, seed).map_err(raise)?)
}

/// Fit a 2PL model to a respondents-by-items matrix of True/False/None and
/// return item parameters plus EAP abilities.
#[pyfunction]
#[pyo3(signature = (responses, config=None))]
fn irt<'py>(py: Python<'py>, responses: Vec<Vec<Option<bool>>>, config: Option<PyRef<'_, Config>>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config_or_default(config);
    let n = responses.len();
    let m = responses.first().map_or(0, |r| r.len());
    if responses.iter().any(|r| r.len() != m) {
        return Err(ValidationError::new_err("response rows differ in length"));
    }
    let matrix = ResponseMatrix::new(
        (0..n).map(|i| i.to_string()).collect(),
        (0..m).map(|j| format!("item{j}")).collect(),
        responses.into_iter().flatten().collect(),
    )
    .map_err(raise)?;
    let items = fit_2pl(&matrix, &cfg.irt).map_err(raise)?;
    let abilities = eap_score(&matrix, &items);
    to_py(py, &serde_json::json!({"items": items, "abilities": abilities}))
}

/// Two-sample Kolmogorov–Smirnov distance.
#[pyfunction]
fn ks(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    ks_statistic(&a, &b).map_err(raise)
}

/// Randomization p-value of the difference in means between units labelled
/// 1 and 0.
#[pyfunction]
#[pyo3(signature = (y, labels, draws=999, seed=0))]
fn permutation_test<'py>(py: Python<'py>, y: Vec<f64>, labels: Vec<u8>, draws: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    if y.len() != labels.len() {
        return Err(ValidationError::new_err("y and labels differ in length"));
    }
    let perms = PermutationSet::new(Dimension::Experienced, &labels, draws, seed).map_err(raise)?;
    let diff = |l: &[u8]| -> pfp_core::Result<f64> {
        let (mut s, mut n) = ([0.0; 2], [0.0; 2]);
        for (v, g) in y.iter().zip(l) {
            if *g <= 1 {
                s[*g as usize] += v;
                n[*g as usize] += 1.0;
            }
        }
        if n[0] == 0.0 || n[1] == 0.0 {
            return Err(Error::Invalid("both groups need units".into()));
        }
        Ok(s[1] / n[1] - s[0] / n[0])
    };
    to_py(py, &ri_pvalue(diff, &perms, StatKind::Raw).map_err(raise)?)
}

#[pymodule]
fn pfp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("ValidationError", m.py().get_type::<ValidationError>())?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<Config>()?;
    m.add_class::<PanelData>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(boundary, m)?)?;
    m.add_function(wrap_pyfunction!(decomposition, m)?)?;
    m.add_function(wrap_pyfunction!(irt, m)?)?;
    m.add_function(wrap_pyfunction!(ks, m)?)?;
    m.add_function(wrap_pyfunction!(permutation_test, m)?)?;
    Ok(())
}
