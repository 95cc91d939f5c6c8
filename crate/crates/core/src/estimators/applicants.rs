//! Applicant-pool regressions: TTC scores under three hiring-weight rules and
//! application volume at the market level.
//!
//! Weights are fitted on the pools whose label is FW, so they are recomputed
//! for every relabelling.

use serde::{Deserialize, Serialize};

use super::specs::{Labels, T_A, T_A_MIXED};
use super::{fit_ols, Design, EstimateReport, SeKind};
use crate::data::Panel;
use crate::error::{Error, Result};

const FW: u8 = 0;
const P4P: u8 = 1;
const MIXED: u8 = 2;
/// Degree of the TTC polynomial in the hiring-probability model.
pub const HIRING_POLY_DEGREE: i32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    /// Every applicant weighted equally (random hiring).
    #[default]
    Unweighted,
    /// Weights are predicted hiring probabilities from FW pools.
    EmpiricalP,
    /// Weight 1 for the top predicted-hires applicants in each pool.
    TopH,
    /// Log application counts per market.
    Volume,
}

/// Applicant rows.
#[derive(Debug, Clone)]
pub struct PoolFrame {
    pub mode: PoolMode,
    pub y: Vec<f64>,
    pub market: Vec<usize>,
    pub hired: Vec<bool>,
    family: Vec<usize>,
    district: Vec<usize>,
    n_markets: usize,
}

impl PoolFrame {
    pub fn build(panel: &Panel, mode: PoolMode) -> Result<Self> {
        if mode == PoolMode::Volume {
            return Err(Error::Config("volume mode is a market-level regression".into()));
        }
        if panel.applicants.is_empty() {
            return Err(Error::EmptyPool("no applicants".into()));
        }
        let mut f = PoolFrame {
            mode,
            y: vec![],
            market: vec![],
            hired: vec![],
            family: vec![],
            district: vec![],
            n_markets: panel.markets.len(),
        };
        for a in &panel.applicants {
            let m = &panel.markets[a.market];
            f.y.push(a.ttc_score);
            f.market.push(a.market);
            f.hired.push(a.hired);
            f.family.push(m.family.index());
            f.district.push(m.district);
        }
        Ok(f)
    }

    fn base(&self, labels: &Labels) -> Design {
        let ta = self.market.iter().map(|m| f64::from(labels.advertised[*m] == P4P)).collect();
        let tm = self.market.iter().map(|m| f64::from(labels.advertised[*m] == MIXED)).collect();
        Design::new(self.y.clone())
            .interest(T_A, ta)
            .control(T_A_MIXED, tm)
            .fixed_effect("family", &self.family)
            .fixed_effect("district", &self.district)
            .clusters(self.market.clone())
    }

    /// Design with hiring weights computed under `labels`. Weight fitting
    /// failures fall back to equal weights only when there is no FW pool.
    pub fn design(&self, labels: &Labels) -> Design {
        let d = self.base(labels);
        match self.mode {
            PoolMode::Unweighted | PoolMode::Volume => d,
            PoolMode::EmpiricalP => match self.hiring_probabilities(labels) {
                Ok(w) => d.weights(w),
                Err(_) => d,
            },
            PoolMode::TopH => match self.top_h_weights(labels) {
                Ok(w) => d.weights(w),
                Err(_) => d,
            },
        }
    }

    fn fw_rows(&self, labels: &Labels) -> Result<Vec<bool>> {
        let keep: Vec<bool> = self.market.iter().map(|m| labels.advertised[*m] == FW).collect();
        if !keep.iter().any(|k| *k) {
            return Err(Error::EmptyPool("no FW pool to fit hiring weights".into()));
        }
        Ok(keep)
    }

    /// Linear-probability hiring model on FW pools: a degree-5 polynomial in
    /// the standardized TTC score plus family and district indicators.
    /// Predictions are clipped to [0, 1].
    pub fn hiring_probabilities(&self, labels: &Labels) -> Result<Vec<f64>> {
        let keep = self.fw_rows(labels)?;
        let m = crate::stats::mean(&self.y);
        let s = crate::stats::sd_sample(&self.y).max(1e-12);
        let z: Vec<f64> = self.y.iter().map(|v| (v - m) / s).collect();
        let hired: Vec<f64> = self.hired.iter().map(|h| f64::from(*h)).collect();
        let mut d = Design::new(hired);
        for k in 1..=HIRING_POLY_DEGREE {
            d = d.control(&format!("ttc^{k}"), z.iter().map(|v| v.powi(k)).collect());
        }
        let d = d.fixed_effect("family", &self.family).fixed_effect("district", &self.district);
        let fit = fit_ols(&d.filter_rows(&keep), SeKind::Classical)?;
        Ok((0..self.y.len())
            .map(|i| {
                let p: f64 = fit.columns.iter().zip(&fit.beta).map(|(&c, b)| b * d.cols[c][i]).sum();
                p.clamp(0.0, 1.0)
            })
            .collect())
    }

    /// Predicted hires per market: the pooled FW hire rate times the pool
    /// size, rounded, at least one for a non-empty pool.
    pub fn predicted_hires(&self, labels: &Labels) -> Result<Vec<usize>> {
        let keep = self.fw_rows(labels)?;
        let (mut apps, mut hires) = (0.0, 0.0);
        for (i, k) in keep.iter().enumerate() {
            if *k {
                apps += 1.0;
                hires += f64::from(self.hired[i]);
            }
        }
        let rate = hires / apps;
        let mut size = vec![0usize; self.n_markets];
        for m in &self.market {
            size[*m] += 1;
        }
        Ok(size
            .iter()
            .map(|&n| if n == 0 { 0 } else { ((rate * n as f64).round() as usize).clamp(1, n) })
            .collect())
    }

    /// Weight 1 for the top `H` applicants by TTC score in each pool (ties to
    /// the earlier applicant), else 0.
    pub fn top_h_weights(&self, labels: &Labels) -> Result<Vec<f64>> {
        let h = self.predicted_hires(labels)?;
        let mut pools: Vec<Vec<usize>> = vec![vec![]; self.n_markets];
        for (i, m) in self.market.iter().enumerate() {
            pools[*m].push(i);
        }
        let mut w = vec![0.0; self.y.len()];
        for (m, pool) in pools.iter_mut().enumerate() {
            pool.sort_by(|&a, &b| self.y[b].total_cmp(&self.y[a]).then(a.cmp(&b)));
            for &i in pool.iter().take(h[m]) {
                w[i] = 1.0;
            }
        }
        Ok(w)
    }
}

/// Market rows with log application counts.
#[derive(Debug, Clone)]
pub struct VolumeFrame {
    pub y: Vec<f64>,
    family: Vec<usize>,
    district: Vec<usize>,
}

impl VolumeFrame {
    pub fn build(panel: &Panel) -> Result<Self> {
        let mut n = vec![0usize; panel.markets.len()];
        for a in &panel.applicants {
            n[a.market] += 1;
        }
        if let Some(m) = n.iter().position(|c| *c == 0) {
            return Err(Error::EmptyPool(format!("market {m} has no applications")));
        }
        Ok(Self {
            y: n.iter().map(|c| (*c as f64).ln()).collect(),
            family: panel.markets.iter().map(|m| m.family.index()).collect(),
            district: panel.markets.iter().map(|m| m.district).collect(),
        })
    }

    pub fn design(&self, labels: &Labels) -> Design {
        let ta = labels.advertised.iter().map(|c| f64::from(*c == P4P)).collect();
        let tm = labels.advertised.iter().map(|c| f64::from(*c == MIXED)).collect();
        Design::new(self.y.clone())
            .interest(T_A, ta)
            .control(T_A_MIXED, tm)
            .fixed_effect("family", &self.family)
            .fixed_effect("district", &self.district)
            .clusters((0..self.y.len()).collect())
    }
}

/// Applicant-pool test on the observed labels.
pub fn applicant_pool_tests(panel: &Panel, mode: PoolMode) -> Result<EstimateReport> {
    let labels = Labels::observed(panel);
    let (design, outcome) = match mode {
        PoolMode::Volume => (VolumeFrame::build(panel)?.design(&labels), "log_applications"),
        m => (PoolFrame::build(panel, m)?.design(&labels), "ttc_score"),
    };
    let mut rep = fit_ols(&design, SeKind::Cluster)?.report;
    rep.spec = if mode == PoolMode::Volume { "application_volume" } else { "applicant_scores" }.to_string();
    rep.outcome = outcome.to_string();
    Ok(rep)
}
