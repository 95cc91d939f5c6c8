//! Named model specifications over a panel.
//!
//! Each spec builds a frame once; the treatment columns are then rebuilt from
//! a [`Labels`] value, so permutation tests can re-fit under any feasible
//! assignment without touching the rest of the design.

use serde::{Deserialize, Serialize};

use super::{fit_ols, fit_random_intercept, Design, EstimateReport, SeKind};
use crate::data::{Arm, Panel, Subject};
use crate::error::{Error, Result};
use crate::world::{arm_code, saturation_with};

pub const T_A: &str = "T_A";
pub const T_A_MIXED: &str = "T_A_mixed";
pub const T_E: &str = "T_E";
pub const T_AE: &str = "T_A_x_T_E";
pub const INCUMBENT: &str = "incumbent";
pub const T_E_INCUMBENT: &str = "T_E_x_incumbent";
pub const COVARIATE: &str = "covariate";
pub const T_E_COVARIATE: &str = "T_E_x_covariate";
pub const LAGGED: &str = "lagged_outcome";
pub const ADJ_P4P: &str = "adjacent_p4p";
pub const ADJ_MIXED: &str = "adjacent_mixed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecName {
    RecruitTrait,
    PupilLearning,
    PupilLearningInteracted,
    TeacherInputs,
    TeacherInputsInteracted,
    Retention,
    RetentionModerated,
    TraitAncova,
    ApplicantScores,
    ApplicationVolume,
    Adjacency,
}

pub const ALL_SPECS: [SpecName; 11] = [
    SpecName::RecruitTrait,
    SpecName::PupilLearning,
    SpecName::PupilLearningInteracted,
    SpecName::TeacherInputs,
    SpecName::TeacherInputsInteracted,
    SpecName::Retention,
    SpecName::RetentionModerated,
    SpecName::TraitAncova,
    SpecName::ApplicantScores,
    SpecName::ApplicationVolume,
    SpecName::Adjacency,
];

impl SpecName {
    pub fn as_str(self) -> &'static str {
        match self {
            SpecName::RecruitTrait => "recruit_trait",
            SpecName::PupilLearning => "pupil_learning",
            SpecName::PupilLearningInteracted => "pupil_learning_interacted",
            SpecName::TeacherInputs => "teacher_inputs",
            SpecName::TeacherInputsInteracted => "teacher_inputs_interacted",
            SpecName::Retention => "retention",
            SpecName::RetentionModerated => "retention_moderated",
            SpecName::TraitAncova => "trait_ancova",
            SpecName::ApplicantScores => "applicant_scores",
            SpecName::ApplicationVolume => "application_volume",
            SpecName::Adjacency => "adjacency",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ALL_SPECS.into_iter().find(|n| n.as_str() == s)
    }

    /// Coefficient tested by default and the treatment dimension it permutes.
    pub fn headline(self) -> (&'static str, Tier) {
        match self {
            SpecName::RecruitTrait | SpecName::ApplicantScores | SpecName::ApplicationVolume | SpecName::Adjacency => (T_A, Tier::Advertised),
            SpecName::PupilLearningInteracted | SpecName::TeacherInputsInteracted => (T_AE, Tier::Joint),
            _ => (T_E, Tier::Experienced),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Advertised,
    Experienced,
    Joint,
}

/// Treatment labels: arm codes per market (advertised) and per school
/// (experienced), as produced by [`arm_code`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub advertised: Vec<u8>,
    pub experienced: Vec<u8>,
}

impl Labels {
    pub fn observed(panel: &Panel) -> Self {
        Self {
            advertised: panel.markets.iter().map(|m| arm_code(m.arm)).collect(),
            experienced: panel.schools.iter().map(|s| arm_code(s.arm)).collect(),
        }
    }

    pub fn with_advertised(&self, a: &[u8]) -> Self {
        Self {
            advertised: a.to_vec(),
            experienced: self.experienced.clone(),
        }
    }

    pub fn with_experienced(&self, e: &[u8]) -> Self {
        Self {
            advertised: self.advertised.clone(),
            experienced: e.to_vec(),
        }
    }
}

const P4P: u8 = 1;
const MIXED: u8 = 2;

fn ind(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Whether lag slopes vary by subject and round only, or also by grade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LagSlopes {
    SubjectRound,
    #[default]
    SubjectGradeRound,
}

/// Baseline teacher covariates used as outcomes or moderators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TeacherTrait {
    #[default]
    Grading,
    Dictator,
}

impl TeacherTrait {
    pub fn as_str(self) -> &'static str {
        match self {
            TeacherTrait::Grading => "grading_z",
            TeacherTrait::Dictator => "dictator_x",
        }
    }
}

/// Pupil-subject-round rows for the learning models.
#[derive(Debug, Clone)]
pub struct PupilFrame {
    pub y: Vec<f64>,
    pub market: Vec<Option<usize>>,
    pub school: Vec<usize>,
    pub incumbent: Vec<bool>,
    district: Vec<usize>,
    round: Vec<u8>,
    lag: Vec<f64>,
    lag_imputed: Vec<f64>,
    cell: Vec<String>,
    /// Pupil-round random-effect groups.
    pub group: Vec<usize>,
}

impl PupilFrame {
    /// Rows are the endline pupil-subject scores with a known teacher. Scores
    /// come from `score` (normally the observation's own score field).
    pub fn build(panel: &Panel, slopes: LagSlopes) -> Result<Self> {
        let lookup = panel.teacher_lookup();
        let lags = [panel.lagged_means(1), panel.lagged_means(2)];
        let mut f = PupilFrame {
            y: vec![],
            market: vec![],
            school: vec![],
            incumbent: vec![],
            district: vec![],
            round: vec![],
            lag: vec![],
            lag_imputed: vec![],
            cell: vec![],
            group: vec![],
        };
        let mut groups = std::collections::HashMap::new();
        for o in panel.observations.iter().filter(|o| o.round > 0 && !o.absent) {
            let Some(y) = o.score else { continue };
            let Some(&j) = lookup.get(&(o.stream, o.subject, o.round)) else {
                continue;
            };
            let t = &panel.teachers[j];
            let st = &panel.streams[o.stream];
            let (lag, imputed) = lags[o.round as usize - 1]
                .get(&(o.stream, o.subject))
                .copied()
                .unwrap_or((0.0, true));
            let n = groups.len();
            let g = *groups.entry((o.pupil, o.round)).or_insert(n);
            f.y.push(y);
            f.market.push(t.market);
            f.school.push(t.school);
            f.incumbent.push(t.incumbent());
            f.district.push(panel.schools[t.school].district);
            f.round.push(o.round);
            f.lag.push(lag);
            f.lag_imputed.push(ind(imputed));
            f.cell.push(lag_cell(o.subject, st.grade, o.round, slopes));
            f.group.push(g);
        }
        if f.y.is_empty() {
            return Err(Error::EmptySample);
        }
        Ok(f)
    }

    pub fn design(&self, labels: &Labels, interacted: bool) -> Design {
        let ta: Vec<f64> = self.market.iter().map(|m| ind(m.is_some_and(|m| labels.advertised[m] == P4P))).collect();
        let tm: Vec<f64> = self.market.iter().map(|m| ind(m.is_some_and(|m| labels.advertised[m] == MIXED))).collect();
        let te: Vec<f64> = self.school.iter().map(|s| ind(labels.experienced[*s] == P4P)).collect();
        let inc: Vec<f64> = self.incumbent.iter().map(|b| ind(*b)).collect();
        let mut d = Design::new(self.y.clone()).interest(T_A, ta.clone()).control(T_A_MIXED, tm).interest(T_E, te.clone());
        if interacted {
            d = d.interest(T_AE, ta.iter().zip(&te).map(|(a, e)| a * e).collect());
        }
        d.control(INCUMBENT, inc.clone())
            .control(T_E_INCUMBENT, te.iter().zip(&inc).map(|(e, i)| e * i).collect())
            .slopes_by("lag", &self.lag, &self.cell)
            .control("lag_imputed", self.lag_imputed.clone())
            .fixed_effect("district", &self.district)
            .fixed_effect("round", &self.round)
            .groups(self.group.clone())
            .clusters(self.school.clone())
    }
}

fn lag_cell(subject: Subject, grade: u8, round: u8, slopes: LagSlopes) -> String {
    match slopes {
        LagSlopes::SubjectRound => format!("{}-r{round}", subject.as_str()),
        LagSlopes::SubjectGradeRound => format!("{}-g{grade}-r{round}", subject.as_str()),
    }
}

/// Teacher-round rows for the input and metric models.
#[derive(Debug, Clone)]
pub struct TeacherFrame {
    pub y: Vec<f64>,
    pub market: Vec<Option<usize>>,
    pub school: Vec<usize>,
    pub incumbent: Vec<bool>,
    family: Vec<usize>,
    district: Vec<usize>,
    round: Vec<u8>,
    /// School-round random-effect groups.
    pub group: Vec<usize>,
}

impl TeacherFrame {
    /// Rows from `(teacher, round, value)` triples.
    pub fn build(panel: &Panel, rows: &[(usize, u8, f64)]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptySample);
        }
        let mut f = TeacherFrame {
            y: vec![],
            market: vec![],
            school: vec![],
            incumbent: vec![],
            family: vec![],
            district: vec![],
            round: vec![],
            group: vec![],
        };
        for &(j, r, v) in rows {
            let t = &panel.teachers[j];
            f.y.push(v);
            f.market.push(t.market);
            f.school.push(t.school);
            f.incumbent.push(t.incumbent());
            f.family.push(t.family.index());
            f.district.push(panel.schools[t.school].district);
            f.round.push(r);
            f.group.push(t.school * 3 + r as usize);
        }
        Ok(f)
    }

    pub fn design(&self, labels: &Labels, interacted: bool) -> Design {
        let ta: Vec<f64> = self.market.iter().map(|m| ind(m.is_some_and(|m| labels.advertised[m] == P4P))).collect();
        let tm: Vec<f64> = self.market.iter().map(|m| ind(m.is_some_and(|m| labels.advertised[m] == MIXED))).collect();
        let te: Vec<f64> = self.school.iter().map(|s| ind(labels.experienced[*s] == P4P)).collect();
        let inc: Vec<f64> = self.incumbent.iter().map(|b| ind(*b)).collect();
        let mut d = Design::new(self.y.clone()).interest(T_A, ta.clone()).control(T_A_MIXED, tm).interest(T_E, te.clone());
        if interacted {
            d = d.interest(T_AE, ta.iter().zip(&te).map(|(a, e)| a * e).collect());
        }
        d.control(INCUMBENT, inc.clone())
            .control(T_E_INCUMBENT, te.iter().zip(&inc).map(|(e, i)| e * i).collect())
            .fixed_effect("family", &self.family)
            .fixed_effect("district", &self.district)
            .fixed_effect("round", &self.round)
            .groups(self.group.clone())
            .clusters(self.school.clone())
    }
}

/// Spot-check outcomes available for the teacher-input models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InputOutcome {
    #[default]
    Presence,
    Preparation,
    Pedagogy,
}

impl InputOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            InputOutcome::Presence => "presence",
            InputOutcome::Preparation => "preparation",
            InputOutcome::Pedagogy => "pedagogy",
        }
    }
}

/// Teacher-round spot-check averages over both post-treatment rounds.
pub fn input_rows(panel: &Panel, outcome: InputOutcome) -> Vec<(usize, u8, f64)> {
    [1u8, 2]
        .iter()
        .flat_map(|&r| crate::awards::input_measures(panel, r))
        .map(|m| {
            let v = match outcome {
                InputOutcome::Presence => m.presence,
                InputOutcome::Preparation => m.preparation,
                InputOutcome::Pedagogy => m.pedagogy,
            };
            (m.teacher, m.round, v)
        })
        .collect()
}

/// Recruit-level rows for the characteristic and retention models.
#[derive(Debug, Clone)]
pub struct RecruitFrame {
    pub teacher: Vec<usize>,
    pub market: Vec<usize>,
    pub school: Vec<usize>,
    family: Vec<usize>,
    district: Vec<usize>,
}

impl RecruitFrame {
    /// Recruits satisfying `keep`.
    pub fn build(panel: &Panel, keep: impl Fn(&crate::data::Teacher) -> bool) -> Result<Self> {
        let mut f = RecruitFrame {
            teacher: vec![],
            market: vec![],
            school: vec![],
            family: vec![],
            district: vec![],
        };
        for t in panel.teachers.iter().filter(|t| t.recruit && keep(t)) {
            let Some(m) = t.market else { continue };
            f.teacher.push(t.id);
            f.market.push(m);
            f.school.push(t.school);
            f.family.push(t.family.index());
            f.district.push(panel.markets[m].district);
        }
        if f.teacher.is_empty() {
            return Err(Error::EmptySample);
        }
        Ok(f)
    }

    fn base(&self, y: Vec<f64>) -> Design {
        Design::new(y)
    }

    fn finish(&self, d: Design, cluster_market: bool) -> Design {
        let c = if cluster_market { self.market.clone() } else { self.school.clone() };
        d.fixed_effect("family", &self.family).fixed_effect("district", &self.district).clusters(c)
    }

    /// Placed-recruit baseline characteristic on advertised arm.
    pub fn characteristic_design(&self, y: &[f64], labels: &Labels) -> Design {
        let ta = self.market.iter().map(|m| ind(labels.advertised[*m] == P4P)).collect();
        let tm = self.market.iter().map(|m| ind(labels.advertised[*m] == MIXED)).collect();
        self.finish(self.base(y.to_vec()).interest(T_A, ta).control(T_A_MIXED, tm), true)
    }

    fn te(&self, labels: &Labels) -> Vec<f64> {
        self.school.iter().map(|s| ind(labels.experienced[*s] == P4P)).collect()
    }

    /// Retention on experienced arm, optionally moderated by a covariate.
    pub fn retention_design(&self, y: &[f64], covariate: Option<&[f64]>, labels: &Labels) -> Design {
        let te = self.te(labels);
        let mut d = self.base(y.to_vec()).interest(T_E, te.clone());
        if let Some(z) = covariate {
            d = d
                .interest(T_E_COVARIATE, te.iter().zip(z).map(|(a, b)| a * b).collect())
                .control(COVARIATE, z.to_vec());
        }
        self.finish(d, false)
    }

    /// Endline characteristic on experienced arm with the baseline value.
    pub fn ancova_design(&self, y: &[f64], lagged: &[f64], labels: &Labels) -> Design {
        let d = self.base(y.to_vec()).interest(T_E, self.te(labels)).control(LAGGED, lagged.to_vec());
        self.finish(d, false)
    }
}

fn trait_of(t: &crate::data::Teacher, which: TeacherTrait, endline: bool) -> Option<f64> {
    match (which, endline) {
        (TeacherTrait::Grading, false) => Some(t.grading_z),
        (TeacherTrait::Dictator, false) => Some(t.dictator_x),
        (TeacherTrait::Grading, true) => t.grading_z_endline,
        (TeacherTrait::Dictator, true) => t.dictator_x_endline,
    }
}

/// Options shared by the named specs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpecOptions {
    pub lag_slopes: LagSlopes,
    /// Outcome of the recruit-trait and trait-ANCOVA specs, and the retention moderator.
    pub teacher_trait: TeacherTrait,
    pub input: InputOutcome,
    pub pool: super::applicants::PoolMode,
    /// Estimate the learning models by OLS with school-clustered errors.
    pub learning_ols: bool,
    /// Standard errors of the random-intercept fits.
    pub mixed_se: MixedSe,
}

/// Covariance reported by the random-intercept specs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixedSe {
    /// Sandwich clustered by school, robust to school-level shocks the
    /// random intercept does not model.
    #[default]
    School,
    /// Inverse information under the random-intercept model.
    Model,
}

impl Default for SpecOptions {
    fn default() -> Self {
        Self {
            lag_slopes: LagSlopes::default(),
            teacher_trait: TeacherTrait::default(),
            input: InputOutcome::default(),
            pool: super::applicants::PoolMode::Unweighted,
            learning_ols: false,
            mixed_se: MixedSe::School,
        }
    }
}

/// A prepared spec: fit it under any labels.
pub enum Prepared {
    Pupil { frame: PupilFrame, interacted: bool, ols: bool },
    Teacher { frame: TeacherFrame, interacted: bool },
    Characteristic { frame: RecruitFrame, y: Vec<f64> },
    Retention { frame: RecruitFrame, y: Vec<f64>, covariate: Option<Vec<f64>> },
    Ancova { frame: RecruitFrame, y: Vec<f64>, lagged: Vec<f64> },
    Applicants(super::applicants::PoolFrame),
    Volume(super::applicants::VolumeFrame),
    Adjacency { frame: super::applicants::PoolFrame, markets: Vec<crate::data::Market> },
}

pub struct PreparedSpec {
    pub name: SpecName,
    pub outcome: String,
    pub body: Prepared,
    pub mixed_se: MixedSe,
}

impl PreparedSpec {
    pub fn new(name: SpecName, panel: &Panel, opts: &SpecOptions) -> Result<Self> {
        use super::applicants::{PoolFrame, VolumeFrame};
        let tr = opts.teacher_trait;
        let (outcome, body) = match name {
            SpecName::RecruitTrait => {
                let frame = RecruitFrame::build(panel, |_| true)?;
                let y = frame.teacher.iter().map(|&j| trait_of(&panel.teachers[j], tr, false).unwrap()).collect();
                (tr.as_str().to_string(), Prepared::Characteristic { frame, y })
            }
            SpecName::PupilLearning | SpecName::PupilLearningInteracted => (
                "pupil_score".to_string(),
                Prepared::Pupil {
                    frame: PupilFrame::build(panel, opts.lag_slopes)?,
                    interacted: name == SpecName::PupilLearningInteracted,
                    ols: opts.learning_ols,
                },
            ),
            SpecName::TeacherInputs | SpecName::TeacherInputsInteracted => (
                opts.input.as_str().to_string(),
                Prepared::Teacher {
                    frame: TeacherFrame::build(panel, &input_rows(panel, opts.input))?,
                    interacted: name == SpecName::TeacherInputsInteracted,
                },
            ),
            SpecName::Retention | SpecName::RetentionModerated => {
                let frame = RecruitFrame::build(panel, |t| t.active[0])?;
                let y = frame.teacher.iter().map(|&j| ind(panel.teachers[j].retained)).collect();
                let covariate = (name == SpecName::RetentionModerated)
                    .then(|| frame.teacher.iter().map(|&j| trait_of(&panel.teachers[j], tr, false).unwrap()).collect());
                ("retained".to_string(), Prepared::Retention { frame, y, covariate })
            }
            SpecName::TraitAncova => {
                let frame = RecruitFrame::build(panel, |t| t.retained && trait_of(t, tr, true).is_some())?;
                let y = frame.teacher.iter().map(|&j| trait_of(&panel.teachers[j], tr, true).unwrap()).collect();
                let lagged = frame.teacher.iter().map(|&j| trait_of(&panel.teachers[j], tr, false).unwrap()).collect();
                (format!("{}_endline", tr.as_str()), Prepared::Ancova { frame, y, lagged })
            }
            SpecName::ApplicantScores => ("ttc_score".to_string(), Prepared::Applicants(PoolFrame::build(panel, opts.pool)?)),
            SpecName::ApplicationVolume => ("log_applications".to_string(), Prepared::Volume(VolumeFrame::build(panel)?)),
            SpecName::Adjacency => (
                "ttc_score".to_string(),
                Prepared::Adjacency {
                    frame: PoolFrame::build(panel, opts.pool)?,
                    markets: panel.markets.clone(),
                },
            ),
        };
        Ok(Self {
            name,
            outcome,
            body,
            mixed_se: opts.mixed_se,
        })
    }

    /// The regression design under the given labels.
    pub fn design(&self, labels: &Labels) -> Design {
        match &self.body {
            Prepared::Pupil { frame, interacted, .. } => frame.design(labels, *interacted),
            Prepared::Teacher { frame, interacted } => frame.design(labels, *interacted),
            Prepared::Characteristic { frame, y } => frame.characteristic_design(y, labels),
            Prepared::Retention { frame, y, covariate } => frame.retention_design(y, covariate.as_deref(), labels),
            Prepared::Ancova { frame, y, lagged } => frame.ancova_design(y, lagged, labels),
            Prepared::Applicants(frame) => frame.design(labels),
            Prepared::Volume(frame) => frame.design(labels),
            Prepared::Adjacency { frame, markets } => {
                let arms: Vec<Arm> = labels.advertised.iter().map(|c| crate::world::arm_from_code(*c)).collect();
                let sat = saturation_with(markets, &arms);
                let col = |f: fn(&crate::world::Saturation) -> usize| -> Vec<f64> {
                    frame.market.iter().map(|m| f(&sat[*m]) as f64).collect()
                };
                frame
                    .design(labels)
                    .interest(ADJ_P4P, col(|s| s.adjacent_p4p))
                    .control(ADJ_MIXED, col(|s| s.adjacent_mixed))
                    .fixed_effect("adjacent_total", &col(|s| s.adjacent_total).iter().map(|v| *v as usize).collect::<Vec<_>>())
            }
        }
    }

    /// Fit under the given labels.
    pub fn fit(&self, labels: &Labels) -> Result<EstimateReport> {
        self.fit_design(self.design(labels))
    }

    /// Statistic for `coef` under `labels` after removing an additive effect
    /// `delta` of the observed treatment column: the outcome the sharp null
    /// "effect equals delta" implies for every unit.
    pub fn shifted_stat(&self, coef: &str, observed: &Labels, delta: f64, labels: &Labels) -> Result<f64> {
        let obs = self.design(observed);
        let k = obs
            .position(coef)
            .ok_or_else(|| Error::Invalid(format!("{} has no column {coef}", self.name.as_str())))?;
        let mut d = self.design(labels);
        for (y, t) in d.y.iter_mut().zip(&obs.cols[k]) {
            *y -= delta * t;
        }
        self.fit_design(d)?.stat(coef)
    }

    /// Fit a design produced by [`Self::design`], possibly with an edited outcome.
    pub fn fit_design(&self, d: Design) -> Result<EstimateReport> {
        let mut rep = match &self.body {
            Prepared::Pupil { ols: false, .. } | Prepared::Teacher { .. } => {
                let mut d = d;
                if self.mixed_se == MixedSe::Model {
                    d.clusters = None;
                }
                fit_random_intercept(&d)?
            }
            _ => {
                let mut d = d;
                d.groups = None;
                fit_ols(&d, SeKind::Cluster)?.report
            }
        };
        rep.spec = self.name.as_str().to_string();
        rep.outcome = self.outcome.clone();
        Ok(rep)
    }
}

/// Fit every named spec on the observed labels. Specs whose sample is empty
/// or whose tested column is unidentified are skipped and listed.
pub fn fit_all(panel: &Panel, names: &[SpecName], opts: &SpecOptions) -> Result<(Vec<EstimateReport>, Vec<(SpecName, String)>)> {
    let labels = Labels::observed(panel);
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    for &n in names {
        match PreparedSpec::new(n, panel, opts).and_then(|p| p.fit(&labels)) {
            Ok(r) => out.push(r),
            Err(e @ (Error::EmptySample | Error::EmptyPool(_) | Error::RankDeficient { .. })) => skipped.push((n, e.to_string())),
            Err(e) => return Err(e),
        }
    }
    Ok((out, skipped))
}

/// Retention linear probability model on any recruit sample.
pub fn fit_retention(panel: &Panel, covariate: Option<TeacherTrait>) -> Result<EstimateReport> {
    let opts = SpecOptions {
        teacher_trait: covariate.unwrap_or_default(),
        ..Default::default()
    };
    let name = if covariate.is_some() { SpecName::RetentionModerated } else { SpecName::Retention };
    PreparedSpec::new(name, panel, &opts)?.fit(&Labels::observed(panel))
}

/// Endline characteristic of retained recruits with the baseline value.
pub fn fit_ancova(panel: &Panel, which: TeacherTrait) -> Result<EstimateReport> {
    let opts = SpecOptions {
        teacher_trait: which,
        ..Default::default()
    };
    PreparedSpec::new(SpecName::TraitAncova, panel, &opts)?.fit(&Labels::observed(panel))
}

/// Pupil learning by random intercepts at the pupil-round level.
pub fn fit_lmm_pupil(panel: &Panel, interacted: bool, slopes: LagSlopes) -> Result<EstimateReport> {
    let opts = SpecOptions {
        lag_slopes: slopes,
        ..Default::default()
    };
    let name = if interacted { SpecName::PupilLearningInteracted } else { SpecName::PupilLearning };
    PreparedSpec::new(name, panel, &opts)?.fit(&Labels::observed(panel))
}

/// Teacher-round metric by random intercepts at the school-round level.
pub fn fit_re_teacher(panel: &Panel, rows: &[(usize, u8, f64)], interacted: bool) -> Result<EstimateReport> {
    let frame = TeacherFrame::build(panel, rows)?;
    let d = frame.design(&Labels::observed(panel), interacted);
    let mut rep = fit_random_intercept(&d)?;
    rep.spec = if interacted { "teacher_inputs_interacted" } else { "teacher_inputs" }.to_string();
    rep.outcome = "teacher_metric".to_string();
    Ok(rep)
}
