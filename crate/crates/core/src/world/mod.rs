//! Synthetic two-tier experiment: labor markets with advertised contracts,
//! applicants choosing by the occupational-choice model, random hiring,
//! schools re-randomized to experienced contracts, and pupil/teacher outcomes.

pub mod assign;
pub mod outcomes;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::data::{Applicant, Arm, Market, Panel, School, Stream, Teacher, FAMILIES, GRADES};
use crate::error::{Error, Result};
use crate::rng::Seeder;
use crate::theory::{applies, ContractMenu, TeachArm, TeacherType, TypeDistribution};

pub use assign::{arm_code, arm_from_code, assign_advertised, assign_experienced, AdvertisedCounts, ExperiencedCounts};
pub use outcomes::{simulate_outcomes, EffectSpec};

/// How pupil scores reach the panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Scores are the simulated learning levels.
    #[default]
    Latent,
    /// Item responses are simulated; scores come from IRT scoring.
    Irt,
}

/// Distribution of the noise in applicants' exam scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ExamNoise {
    #[default]
    Normal,
    StudentT {
        df: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    pub districts: usize,
    pub schools: usize,
    pub advertised_counts: AdvertisedCounts,
    pub experienced_counts: ExperiencedCounts,
    pub stratified_experienced: bool,
    /// Probability that two districts share a border.
    pub border_prob: f64,
    /// Inclusive range of streams per school-grade.
    pub streams_per_grade: [usize; 2],
    /// Inclusive range of stream enrollment.
    pub enrollment: [u32; 2],
    pub baseline_sample: usize,
    pub endline_sample: usize,
    /// Potential applicants per labor market before the application decision.
    pub potential_applicants: usize,
    pub recruits_per_school: f64,
    /// Streams one teacher covers for the subjects of their family.
    pub streams_per_teacher: usize,
    pub pupil_dropout: f64,
    pub pupil_continue: f64,
    pub absence: f64,
    /// Loading of the exam score on standardized ability.
    pub exam_ability_loading: f64,
    pub exam_noise: ExamNoise,
    pub exam_noise_sd: f64,
    pub score_mode: ScoreMode,
    pub items_per_test: usize,
    /// Spot-check visits per round (year 1, year 2) for P4P and FW schools.
    pub visits_p4p: [u8; 2],
    pub visits_fw: [u8; 2],
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            districts: 6,
            schools: 164,
            advertised_counts: AdvertisedCounts::default(),
            experienced_counts: ExperiencedCounts::default(),
            stratified_experienced: false,
            border_prob: 0.5,
            streams_per_grade: [1, 2],
            enrollment: [25, 60],
            baseline_sample: 5,
            endline_sample: 10,
            potential_applicants: 250,
            recruits_per_school: 2.0,
            streams_per_teacher: 2,
            pupil_dropout: 0.03,
            pupil_continue: 0.85,
            absence: 0.05,
            exam_ability_loading: 0.5,
            exam_noise: ExamNoise::Normal,
            exam_noise_sd: 1.0,
            score_mode: ScoreMode::Latent,
            items_per_test: 20,
            visits_p4p: [2, 1],
            visits_fw: [0, 1],
        }
    }
}

impl WorldConfig {
    pub fn markets(&self) -> usize {
        self.districts * FAMILIES.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("world: {m}")));
        if self.districts == 0 || self.schools == 0 {
            return bad("need at least one district and one school");
        }
        if self.schools < self.districts {
            return bad("every district needs a school");
        }
        let c = self.advertised_counts;
        if c.p4p + c.fw + c.mixed != self.markets() {
            return Err(Error::CountMismatch {
                units: self.markets(),
                counts: vec![c.p4p, c.fw, c.mixed],
            });
        }
        let e = self.experienced_counts;
        if e.p4p + e.fw != self.schools {
            return Err(Error::CountMismatch {
                units: self.schools,
                counts: vec![e.p4p, e.fw],
            });
        }
        if self.streams_per_grade[0] == 0 || self.streams_per_grade[0] > self.streams_per_grade[1] {
            return bad("streams_per_grade must be a non-empty range starting at >= 1");
        }
        if self.enrollment[0] == 0 || self.enrollment[0] > self.enrollment[1] {
            return bad("enrollment must be a non-empty positive range");
        }
        if self.baseline_sample == 0 || self.endline_sample == 0 {
            return bad("sample sizes must be positive");
        }
        if self.streams_per_teacher == 0 {
            return bad("streams_per_teacher must be positive");
        }
        for (name, p) in [
            ("border_prob", self.border_prob),
            ("pupil_dropout", self.pupil_dropout),
            ("pupil_continue", self.pupil_continue),
            ("absence", self.absence),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(&format!("{name} must be a probability"));
            }
        }
        if !(self.recruits_per_school >= 0.0) || !(self.exam_noise_sd >= 0.0) {
            return bad("recruits_per_school and exam_noise_sd must be >= 0");
        }
        if let ExamNoise::StudentT { df } = self.exam_noise {
            if !(df > 2.0) {
                return bad("student-t exam noise needs df > 2");
            }
        }
        if self.score_mode == ScoreMode::Irt && self.items_per_test < 2 {
            return bad("IRT scoring needs at least two items");
        }
        Ok(())
    }
}

/// A generated world before outcomes: design units, rosters and applicants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub config: WorldConfig,
    /// Type distribution for replacement hires.
    pub types: TypeDistribution,
    pub panel: Panel,
    /// Pairs of districts sharing a border.
    pub borders: Vec<(usize, usize)>,
    /// Non-fatal problems, such as unfilled vacancies.
    pub warnings: Vec<String>,
}

pub(crate) fn exam_noise<R: Rng + ?Sized>(cfg: &WorldConfig, rng: &mut R) -> f64 {
    let z: f64 = match cfg.exam_noise {
        ExamNoise::Normal => StandardNormal.sample(rng),
        ExamNoise::StudentT { df } => {
            // unit variance
            let t: f64 = StudentT::new(df).unwrap().sample(rng);
            t * ((df - 2.0) / df).sqrt()
        }
    };
    cfg.exam_noise_sd * z
}

/// Whether a type applies to a post in a market of the given arm. Applicants in
/// a mixed market take the better of the two pure contracts.
pub fn applies_in(ty: TeacherType, arm: Arm, menu: &ContractMenu) -> bool {
    match arm {
        Arm::Fw => applies(ty, TeachArm::Fw, menu),
        Arm::P4p => applies(ty, TeachArm::P4p, menu),
        Arm::Mixed => applies(ty, TeachArm::Fw, menu) || applies(ty, TeachArm::P4p, menu),
    }
}

fn standardized_theta(theta: f64, dist: &TypeDistribution) -> f64 {
    let mid = 0.5 * (dist.theta_lo + dist.theta_hi);
    let sd = (dist.theta_hi - dist.theta_lo) / 12f64.sqrt();
    (theta - mid) / sd
}

/// Draw one market's applicant pool.
pub fn draw_applicants<R: Rng + ?Sized>(
    cfg: &WorldConfig,
    menu: &ContractMenu,
    dist: &TypeDistribution,
    market: usize,
    arm: Arm,
    shift: f64,
    next_id: &mut usize,
    rng: &mut R,
) -> Vec<Applicant> {
    let mut out = Vec::new();
    for _ in 0..cfg.potential_applicants {
        let ty = dist.sample(rng);
        let noise = exam_noise(cfg, rng);
        if !applies_in(ty, arm, menu) {
            continue;
        }
        let shifted = if arm == Arm::P4p { shift } else { 0.0 };
        out.push(Applicant {
            id: *next_id,
            market,
            ttc_score: cfg.exam_ability_loading * standardized_theta(ty.theta, dist) + noise + shifted,
            tau: ty.tau,
            theta: ty.theta,
            hired: false,
        });
        *next_id += 1;
    }
    out
}

fn teacher_covariates<R: Rng + ?Sized>(ty: TeacherType, dist: &TypeDistribution, rng: &mut R) -> (f64, f64) {
    let z1: f64 = StandardNormal.sample(rng);
    let z2: f64 = StandardNormal.sample(rng);
    let grading = 0.5 * standardized_theta(ty.theta, dist) + 0.75f64.sqrt() * z1;
    let share = ((ty.tau - dist.tau_lo) / (dist.tau_hi - dist.tau_lo) * 0.5 + 0.15 * z2).clamp(0.0, 1.0);
    (grading, share)
}

/// Generate markets, applicants, hiring, schools, streams and teachers.
pub fn gen_world(cfg: &WorldConfig, menu: &ContractMenu, dist: &TypeDistribution, seed: u64) -> Result<World> {
    gen_world_with_shift(cfg, menu, dist, 0.0, seed)
}

/// As [`gen_world`], adding `shift` to the exam score of applicants in P4P
/// markets (an additive advertised effect on applicant quality).
pub fn gen_world_with_shift(
    cfg: &WorldConfig,
    menu: &ContractMenu,
    dist: &TypeDistribution,
    shift: f64,
    seed: u64,
) -> Result<World> {
    cfg.validate()?;
    menu.validate()?;
    dist.validate()?;
    let seeder = Seeder::new(seed);
    let mut warnings = Vec::new();

    // districts and borders
    let mut rng = seeder.stream("world-borders");
    let mut borders = Vec::new();
    for a in 0..cfg.districts {
        for b in a + 1..cfg.districts {
            if rng.random::<f64>() < cfg.border_prob {
                borders.push((a, b));
            }
        }
    }
    let arms = assign_advertised(cfg.markets(), cfg.advertised_counts, seeder.child("advertised", 0).master())?;
    let mut markets: Vec<Market> = Vec::with_capacity(cfg.markets());
    for d in 0..cfg.districts {
        for f in FAMILIES {
            let id = markets.len();
            markets.push(Market {
                id,
                district: d,
                family: f,
                arm: arms[id],
                adjacent: Vec::new(),
                vacancies: 0,
            });
        }
    }
    for &(a, b) in &borders {
        for f in 0..FAMILIES.len() {
            let (x, y) = (a * FAMILIES.len() + f, b * FAMILIES.len() + f);
            markets[x].adjacent.push(y);
            markets[y].adjacent.push(x);
        }
    }
    for m in &mut markets {
        m.adjacent.sort_unstable();
    }

    // schools and streams
    let district_of: Vec<usize> = (0..cfg.schools).map(|i| i * cfg.districts / cfg.schools).collect();
    let exp = assign_experienced(
        cfg.schools,
        cfg.experienced_counts,
        cfg.stratified_experienced.then_some(&district_of[..]),
        seeder.child("experienced", 0).master(),
    )?;
    let schools: Vec<School> = (0..cfg.schools)
        .map(|i| School {
            id: i,
            district: district_of[i],
            arm: exp[i],
        })
        .collect();
    let mut rng = seeder.stream("world-streams");
    let mut streams = Vec::new();
    for s in &schools {
        for g in GRADES {
            let n = rng.random_range(cfg.streams_per_grade[0]..=cfg.streams_per_grade[1]);
            for _ in 0..n {
                let e = rng.random_range(cfg.enrollment[0]..=cfg.enrollment[1]);
                streams.push(Stream {
                    id: streams.len(),
                    school: s.id,
                    grade: g,
                    enrolled: [e, e, e],
                });
            }
        }
    }
    let mut per_school = vec![0usize; cfg.schools];
    for st in &streams {
        per_school[st.school] += 1;
    }
    let slots_of = |school: usize| per_school[school].div_ceil(cfg.streams_per_teacher);

    // applicants and hiring
    let mut applicants = Vec::new();
    let mut next_id = 0;
    let mut hires: Vec<Vec<usize>> = vec![Vec::new(); markets.len()];
    for m in markets.iter_mut() {
        let in_district: Vec<usize> = schools.iter().filter(|s| s.district == m.district).map(|s| s.id).collect();
        let slots: usize = in_district.iter().map(|&s| slots_of(s)).sum();
        let want = (cfg.recruits_per_school * in_district.len() as f64 / FAMILIES.len() as f64).round() as usize;
        m.vacancies = want.min(slots);
        let mut rng = seeder.indexed("world-applicants", m.id as u64);
        let mut pool = draw_applicants(cfg, menu, dist, m.id, m.arm, shift, &mut next_id, &mut rng);
        let n_hire = m.vacancies.min(pool.len());
        if n_hire < m.vacancies {
            warnings.push(format!(
                "insufficient applicants in market {}: {} vacancies, {} applicants; {} left unfilled",
                m.id,
                m.vacancies,
                pool.len(),
                m.vacancies - n_hire
            ));
        }
        let mut idx: Vec<usize> = (0..pool.len()).collect();
        idx.shuffle(&mut rng);
        for &k in &idx[..n_hire] {
            pool[k].hired = true;
            hires[m.id].push(pool[k].id);
        }
        applicants.extend(pool);
    }

    // teachers: recruits into random slots of their district-family, incumbents fill the rest
    let mut rng = seeder.stream("world-teachers");
    let mut teachers = Vec::new();
    for m in &markets {
        let mut slots: Vec<usize> = schools
            .iter()
            .filter(|s| s.district == m.district)
            .flat_map(|s| std::iter::repeat_n(s.id, slots_of(s.id)))
            .collect();
        slots.shuffle(&mut rng);
        let hired = &hires[m.id];
        for (k, &school) in slots.iter().enumerate() {
            let (ty, recruit) = match hired.get(k) {
                Some(&a) => {
                    let ap = &applicants[a];
                    (TeacherType { tau: ap.tau, theta: ap.theta }, true)
                }
                None => (dist.sample(&mut rng), false),
            };
            let (grading_z, dictator_x) = teacher_covariates(ty, dist, &mut rng);
            teachers.push(Teacher {
                id: teachers.len(),
                school,
                recruit,
                family: m.family,
                market: recruit.then_some(m.id),
                tau: ty.tau,
                theta: ty.theta,
                grading_z,
                dictator_x,
                grading_z_endline: None,
                dictator_x_endline: None,
                retained: true,
                active: [true, false],
            });
        }
    }
    // stable order by school then family
    teachers.sort_by_key(|t| (t.school, t.family, t.id));
    for (i, t) in teachers.iter_mut().enumerate() {
        t.id = i;
    }

    Ok(World {
        config: *cfg,
        types: *dist,
        panel: Panel {
            markets,
            schools,
            streams,
            teachers,
            applicants,
            ..Default::default()
        },
        borders,
        warnings,
    })
}

/// Per-market counts of adjacent P4P markets, adjacent mixed markets and all
/// adjacent markets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Saturation {
    pub adjacent_p4p: usize,
    pub adjacent_mixed: usize,
    pub adjacent_total: usize,
}

pub fn saturation_covariates(markets: &[Market]) -> Vec<Saturation> {
    let arms: Vec<Arm> = markets.iter().map(|m| m.arm).collect();
    saturation_with(markets, &arms)
}

/// Saturation under an alternative arm labelling (for permutation tests).
pub fn saturation_with(markets: &[Market], arms: &[Arm]) -> Vec<Saturation> {
    markets
        .iter()
        .map(|m| Saturation {
            adjacent_p4p: m.adjacent.iter().filter(|&&a| arms[a] == Arm::P4p).count(),
            adjacent_mixed: m.adjacent.iter().filter(|&&a| arms[a] == Arm::Mixed).count(),
            adjacent_total: m.adjacent.len(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::ks_statistic;

    fn small() -> WorldConfig {
        WorldConfig {
            districts: 3,
            schools: 12,
            advertised_counts: AdvertisedCounts { p4p: 4, fw: 3, mixed: 2 },
            experienced_counts: ExperiencedCounts { p4p: 6, fw: 6 },
            potential_applicants: 60,
            ..Default::default()
        }
    }

    #[test]
    fn default_world_echoes_config() {
        let w = gen_world(&WorldConfig::default(), &ContractMenu::default(), &TypeDistribution::default(), 1).unwrap();
        assert_eq!(w.panel.markets.len(), 18);
        assert_eq!(w.panel.schools.len(), 164);
        assert_eq!(w.panel.schools.iter().filter(|s| s.arm == Arm::P4p).count(), 85);
        let recruits = w.panel.teachers.iter().filter(|t| t.recruit).count();
        assert!(recruits > 250 && recruits <= 330, "{recruits}");
        for st in &w.panel.streams {
            assert!((25..=60).contains(&st.enrolled[0]));
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = gen_world(&small(), &ContractMenu::default(), &TypeDistribution::default(), 9).unwrap();
        let b = gen_world(&small(), &ContractMenu::default(), &TypeDistribution::default(), 9).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let back: World = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn recruits_carry_their_market_arm() {
        let w = gen_world(&small(), &ContractMenu::default(), &TypeDistribution::default(), 4).unwrap();
        for t in &w.panel.teachers {
            if let Some(m) = t.market {
                let mk = &w.panel.markets[m];
                assert_eq!(mk.district, w.panel.schools[t.school].district);
                assert_eq!(mk.family, t.family);
                assert_eq!(w.panel.advertised_arm(t), Some(mk.arm));
            } else {
                assert!(!t.recruit);
            }
        }
        for m in &w.panel.markets {
            assert!(!m.adjacent.contains(&m.id));
            for a in &m.adjacent {
                assert!(w.panel.markets[*a].adjacent.contains(&m.id));
            }
        }
    }

    #[test]
    fn unfilled_vacancies_are_reported() {
        let cfg = WorldConfig {
            potential_applicants: 1,
            ..small()
        };
        let w = gen_world(&cfg, &ContractMenu::default(), &TypeDistribution::default(), 5).unwrap();
        assert!(!w.warnings.is_empty());
    }

    #[test]
    fn identical_schemes_give_identical_recruit_types_across_arms() {
        // With the two contracts made identical, selection cannot differ by arm.
        let menu = ContractMenu {
            bonus: 0.0,
            w_fixed: 15.0,
            ..Default::default()
        };
        let dist = TypeDistribution::default();
        let mut rejections = 0;
        for s in 0..200 {
            let w = gen_world(&small(), &menu, &dist, 1000 + s).unwrap();
            let by = |a: Arm| -> Vec<f64> {
                w.panel.teachers.iter().filter(|t| w.panel.advertised_arm(t) == Some(a)).map(|t| t.tau).collect()
            };
            let (p, f) = (by(Arm::P4p), by(Arm::Fw));
            if p.is_empty() || f.is_empty() {
                continue;
            }
            let d = ks_statistic(&p, &f).unwrap();
            let ne = (p.len() * f.len()) as f64 / (p.len() + f.len()) as f64;
            if crate::stats::kolmogorov_tail(ne.sqrt() * d) < 0.05 {
                rejections += 1;
            }
        }
        // nominal 5%, asymptotic test is conservative in small samples
        assert!(rejections <= 20, "{rejections}");
    }

    #[test]
    fn saturation_examples_and_matrix_oracle() {
        let mk = |id, adjacent: Vec<usize>, arm| Market {
            id,
            district: id,
            family: crate::data::SubjectFamily::Tms,
            arm,
            adjacent,
            vacancies: 0,
        };
        let lonely = [mk(0, vec![], Arm::P4p)];
        assert_eq!(
            saturation_covariates(&lonely)[0],
            Saturation { adjacent_p4p: 0, adjacent_mixed: 0, adjacent_total: 0 }
        );
        let tri = [mk(0, vec![1, 2], Arm::P4p), mk(1, vec![0, 2], Arm::Fw), mk(2, vec![0, 1], Arm::Mixed)];
        assert_eq!(
            saturation_covariates(&tri)[1],
            Saturation { adjacent_p4p: 1, adjacent_mixed: 1, adjacent_total: 2 }
        );
        for s in 0..20 {
            let w = gen_world(&small(), &ContractMenu::default(), &TypeDistribution::default(), 300 + s).unwrap();
            let ms = &w.panel.markets;
            let n = ms.len();
            let mut adj = vec![0.0; n * n];
            for m in ms {
                for &a in &m.adjacent {
                    adj[m.id * n + a] = 1.0;
                }
            }
            let ind = |arm: Arm| -> Vec<f64> { ms.iter().map(|m| f64::from(m.arm == arm)).collect() };
            let (p, x) = (ind(Arm::P4p), ind(Arm::Mixed));
            let sat = saturation_covariates(ms);
            for i in 0..n {
                let row = &adj[i * n..(i + 1) * n];
                let dot = |v: &[f64]| row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
                assert_eq!(sat[i].adjacent_p4p as f64, dot(&p));
                assert_eq!(sat[i].adjacent_mixed as f64, dot(&x));
                assert_eq!(sat[i].adjacent_total as f64, row.iter().sum::<f64>());
            }
        }
    }
}
