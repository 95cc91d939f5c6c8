//! Occupational-choice model of a teacher-training graduate choosing between a
//! teaching post (fixed wage or pay-for-performance) and an outside job.
//!
//! Payoffs are `w - (e^2 - tau e)` in teaching and `w - e^2` outside, with the
//! performance metric `m = theta e + eps`, `eps ~ U[eps_lo, eps_hi]`.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Seeder;

/// Count of effort evaluations that had to be clamped at zero.
static CLAMPED_EFFORT: AtomicU64 = AtomicU64::new(0);

pub fn clamped_effort_count() -> u64 {
    CLAMPED_EFFORT.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeacherType {
    pub tau: f64,
    pub theta: f64,
}

impl TeacherType {
    pub fn new(tau: f64, theta: f64) -> Result<Self> {
        if !(tau >= 0.0) || !(theta >= 1.0) {
            return Err(Error::Invalid(format!(
                "teacher type needs tau >= 0 and theta >= 1 (got tau={tau}, theta={theta})"
            )));
        }
        Ok(Self { tau, theta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "FW")]
    Fw,
    #[serde(rename = "P4P")]
    P4p,
    #[serde(rename = "OUTSIDE")]
    Outside,
}

/// Teaching contract offered in an advertised arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TeachArm {
    #[serde(rename = "FW")]
    Fw,
    #[serde(rename = "P4P")]
    P4p,
}

impl TeachArm {
    pub fn scheme(self) -> Scheme {
        match self {
            TeachArm::Fw => Scheme::Fw,
            TeachArm::P4p => Scheme::P4p,
        }
    }
}

/// Compensation parameters in model units plus the real-contract amounts in RWF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContractMenu {
    pub w_outside: f64,
    pub bonus: f64,
    pub w_guaranteed: f64,
    pub w_fixed: f64,
    pub m_bar: f64,
    pub m_under: f64,
    pub eps_lo: f64,
    pub eps_hi: f64,
    pub payout_p4p_rwf: f64,
    pub payout_fw_rwf: f64,
    pub retention_bonus_rwf: f64,
}

impl Default for ContractMenu {
    /// The numerical example menu; `w_fixed` sits 2 units above the guaranteed base.
    fn default() -> Self {
        Self {
            w_outside: 50.0,
            bonus: 40.0,
            w_guaranteed: 15.0,
            w_fixed: 17.0,
            m_bar: 4.5,
            m_under: 1.0,
            eps_lo: -5.0,
            eps_hi: 5.0,
            payout_p4p_rwf: 100_000.0,
            payout_fw_rwf: 20_000.0,
            retention_bonus_rwf: 80_000.0,
        }
    }
}

impl ContractMenu {
    /// The same menu with P4P made identical to FW: no bonus and a guaranteed
    /// wage equal to the fixed wage. Selection then cannot differ by arm.
    pub fn without_incentive(&self) -> Self {
        Self {
            bonus: 0.0,
            w_guaranteed: self.w_fixed,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let wages = [
            self.w_outside,
            self.bonus,
            self.w_guaranteed,
            self.w_fixed,
            self.payout_p4p_rwf,
            self.payout_fw_rwf,
            self.retention_bonus_rwf,
        ];
        if wages.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Config("contract menu wages must be finite and >= 0".into()));
        }
        if !(self.eps_lo < self.eps_hi) {
            return Err(Error::Config("contract menu needs eps_lo < eps_hi".into()));
        }
        if !(self.m_under <= self.m_bar) {
            return Err(Error::Config("contract menu needs m_under <= m_bar".into()));
        }
        Ok(())
    }

    fn noise_width(&self) -> f64 {
        self.eps_hi - self.eps_lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TypeDistribution {
    pub tau_lo: f64,
    pub tau_hi: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
}

impl Default for TypeDistribution {
    fn default() -> Self {
        Self {
            tau_lo: 0.0,
            tau_hi: 10.0,
            theta_lo: 1.0,
            theta_hi: 5.0,
        }
    }
}

impl TypeDistribution {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_lo < self.tau_hi) || !(self.theta_lo < self.theta_hi) {
            return Err(Error::Config("type distribution bounds must satisfy lo < hi".into()));
        }
        if self.tau_lo < 0.0 || self.theta_lo < 1.0 {
            return Err(Error::Config("type distribution needs tau >= 0 and theta >= 1".into()));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TeacherType {
        TeacherType {
            tau: self.tau_lo + (self.tau_hi - self.tau_lo) * rng.random::<f64>(),
            theta: self.theta_lo + (self.theta_hi - self.theta_lo) * rng.random::<f64>(),
        }
    }
}

pub fn effort(ty: TeacherType, scheme: Scheme, menu: &ContractMenu) -> f64 {
    let width = menu.noise_width();
    let e = match scheme {
        Scheme::Fw => ty.tau / 2.0,
        Scheme::P4p => ty.theta * menu.bonus / (2.0 * width) + ty.tau / 2.0,
        Scheme::Outside => ty.theta * menu.w_outside / (2.0 * width),
    };
    if e < 0.0 {
        CLAMPED_EFFORT.fetch_add(1, Ordering::Relaxed);
        0.0
    } else {
        e
    }
}

/// `Pr[theta e + eps > threshold]` under uniform noise.
pub fn win_prob(e: f64, theta: f64, threshold: f64, menu: &ContractMenu) -> f64 {
    ((menu.eps_hi - (threshold - theta * e)) / menu.noise_width()).clamp(0.0, 1.0)
}

pub fn expected_payoff(ty: TeacherType, scheme: Scheme, menu: &ContractMenu) -> f64 {
    let e = effort(ty, scheme, menu);
    match scheme {
        Scheme::Fw => menu.w_fixed - e * e + ty.tau * e,
        Scheme::P4p => {
            win_prob(e, ty.theta, menu.m_bar, menu) * menu.bonus + menu.w_guaranteed - e * e
                + ty.tau * e
        }
        Scheme::Outside => win_prob(e, ty.theta, menu.m_under, menu) * menu.w_outside - e * e,
    }
}

/// Teaching payoff under `arm` minus the outside payoff.
pub fn payoff_gap(ty: TeacherType, arm: TeachArm, menu: &ContractMenu) -> f64 {
    expected_payoff(ty, arm.scheme(), menu) - expected_payoff(ty, Scheme::Outside, menu)
}

/// Whether a type applies to a teaching post advertised under `arm`.
/// Indifferent types apply.
pub fn applies(ty: TeacherType, arm: TeachArm, menu: &ContractMenu) -> bool {
    payoff_gap(ty, arm, menu) >= 0.0
}

const BISECTION_TOL: f64 = 1e-8;
const BISECTION_MAX_ITER: usize = 200;
const SIGN_SCAN_POINTS: usize = 201;

/// Motivation level at which a type of ability `theta` is indifferent between
/// teaching under `arm` and the outside sector, restricted to the support of `dist`.
pub fn selection_boundary(
    arm: TeachArm,
    theta: f64,
    menu: &ContractMenu,
    dist: &TypeDistribution,
) -> Result<f64> {
    let gap = |tau: f64| payoff_gap(TeacherType { tau, theta }, arm, menu);

    let mut crossings = 0;
    let mut prev = gap(dist.tau_lo) >= 0.0;
    for i in 1..SIGN_SCAN_POINTS {
        let tau = dist.tau_lo + (dist.tau_hi - dist.tau_lo) * i as f64 / (SIGN_SCAN_POINTS - 1) as f64;
        let cur = gap(tau) >= 0.0;
        if cur != prev {
            crossings += 1;
        }
        prev = cur;
    }
    if crossings > 1 {
        return Err(Error::NonMonotoneIndifference { theta, crossings });
    }

    if gap(dist.tau_lo) >= 0.0 {
        return Ok(dist.tau_lo);
    }
    if gap(dist.tau_hi) < 0.0 {
        return Ok(dist.tau_hi);
    }
    let (mut lo, mut hi) = (dist.tau_lo, dist.tau_hi);
    for _ in 0..BISECTION_MAX_ITER {
        if hi - lo < BISECTION_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if gap(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
}

/// Monte Carlo estimates of the selection/incentive decomposition of expected
/// performance for the four contract cells (a: FW/FW, b: P4P/FW, c: FW/P4P,
/// d: P4P/P4P as advertised/experienced).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// E[m^a] - E[m^b]
    pub selection_fw: McEstimate,
    /// E[m^c] - E[m^d]
    pub selection_p4p: McEstimate,
    /// E[m^a] - E[m^c]
    pub incentive_fw_applicants: McEstimate,
    /// E[m^b] - E[m^d]
    pub incentive_p4p_applicants: McEstimate,
    /// E[tau 1{FW}] - E[tau 1{P4P}]
    pub application_tau_diff: McEstimate,
    /// E[theta 1{FW}] - E[theta 1{P4P}]
    pub application_theta_diff: McEstimate,
    pub share_apply_fw: f64,
    pub share_apply_p4p: f64,
    pub n_draws: usize,
}

const CHUNK: usize = 4096;
const N_TERMS: usize = 6;

#[derive(Clone, Copy)]
struct Acc {
    n: f64,
    apply_fw: f64,
    apply_p4p: f64,
    sum: [f64; N_TERMS],
    sumsq: [f64; N_TERMS],
}

impl Acc {
    fn zero() -> Self {
        Acc {
            n: 0.0,
            apply_fw: 0.0,
            apply_p4p: 0.0,
            sum: [0.0; N_TERMS],
            sumsq: [0.0; N_TERMS],
        }
    }

    fn merge(mut self, o: &Acc) -> Acc {
        self.n += o.n;
        self.apply_fw += o.apply_fw;
        self.apply_p4p += o.apply_p4p;
        for t in 0..N_TERMS {
            self.sum[t] += o.sum[t];
            self.sumsq[t] += o.sumsq[t];
        }
        self
    }
}

pub fn decompose_effects(
    menu: &ContractMenu,
    dist: &TypeDistribution,
    n_draws: usize,
    seed: u64,
) -> Result<Decomposition> {
    menu.validate()?;
    dist.validate()?;
    if n_draws == 0 {
        return Err(Error::Invalid("n_draws must be positive".into()));
    }
    let seeder = Seeder::new(seed);
    let n_chunks = n_draws.div_ceil(CHUNK);
    let partials: Vec<Acc> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seeder.indexed("theory-decomposition", c as u64);
            let len = CHUNK.min(n_draws - c * CHUNK);
            let mut acc = Acc::zero();
            for _ in 0..len {
                let ty = dist.sample(&mut rng);
                let in_fw = if applies(ty, TeachArm::Fw, menu) { 1.0 } else { 0.0 };
                let in_p4p = if applies(ty, TeachArm::P4p, menu) { 1.0 } else { 0.0 };
                let perf_fw = ty.theta * effort(ty, Scheme::Fw, menu);
                let perf_p4p = ty.theta * effort(ty, Scheme::P4p, menu);
                let terms = [
                    perf_fw * (in_fw - in_p4p),
                    perf_p4p * (in_fw - in_p4p),
                    (perf_fw - perf_p4p) * in_fw,
                    (perf_fw - perf_p4p) * in_p4p,
                    ty.tau * (in_fw - in_p4p),
                    ty.theta * (in_fw - in_p4p),
                ];
                acc.n += 1.0;
                acc.apply_fw += in_fw;
                acc.apply_p4p += in_p4p;
                for (t, v) in terms.iter().enumerate() {
                    acc.sum[t] += v;
                    acc.sumsq[t] += v * v;
                }
            }
            acc
        })
        .collect();
    let total = partials.iter().fold(Acc::zero(), |a, b| a.merge(b));

    if total.apply_fw == 0.0 {
        return Err(Error::EmptyApplicantSet { arm: "FW".into() });
    }
    if total.apply_p4p == 0.0 {
        return Err(Error::EmptyApplicantSet { arm: "P4P".into() });
    }
    let est = |t: usize| {
        let m = total.sum[t] / total.n;
        let v = (total.sumsq[t] / total.n - m * m).max(0.0) * total.n / (total.n - 1.0).max(1.0);
        McEstimate {
            mean: m,
            se: (v / total.n).sqrt(),
        }
    };
    Ok(Decomposition {
        selection_fw: est(0),
        selection_p4p: est(1),
        incentive_fw_applicants: est(2),
        incentive_p4p_applicants: est(3),
        application_tau_diff: est(4),
        application_theta_diff: est(5),
        share_apply_fw: total.apply_fw / total.n,
        share_apply_p4p: total.apply_p4p / total.n,
        n_draws,
    })
}
