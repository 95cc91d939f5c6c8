//! Pupil learning, teacher inputs, retention and item responses for a world.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ScoreMode, World};
use crate::data::{Arm, Panel, Pupil, PupilObs, Response, SpotCheck, Subject, Teacher, Teaching};
use crate::error::{Error, Result};
use crate::irt::Item;
use crate::rng::Seeder;
use crate::theory::{effort, ContractMenu, Scheme, TeacherType};

/// Effect sizes and noise scales of the outcome model. Learning effects are in
/// pupil-score units; input effects in probability (presence, plan) or rubric
/// points (pedagogy). The default is a null world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EffectSpec {
    pub experienced: f64,
    pub advertised: f64,
    pub interaction: f64,
    /// Extra experienced effect for incumbents.
    pub incumbent_experienced: f64,
    /// Loading on performance `e * theta / 10` under the experienced contract.
    pub effort_loading: f64,
    pub teacher_sd: f64,
    pub teacher_year_sd: f64,
    pub school_sd: f64,
    pub stream_sd: f64,
    pub ability_sd: f64,
    pub ability_persistence: f64,
    pub pupil_round_sd: f64,
    pub noise_sd: f64,
    pub lag_coef: f64,
    pub presence_base: f64,
    pub presence_experienced: f64,
    pub presence_advertised: f64,
    pub presence_teacher_sd: f64,
    pub plan_base: f64,
    pub plan_experienced: f64,
    pub pedagogy_base: f64,
    pub pedagogy_experienced: f64,
    pub retention_base: f64,
    pub retention_experienced: f64,
    /// Slope of retention on the baseline grading score in P4P schools.
    pub retention_covariate: f64,
    pub grading_experienced: f64,
}

impl Default for EffectSpec {
    fn default() -> Self {
        Self {
            experienced: 0.0,
            advertised: 0.0,
            interaction: 0.0,
            incumbent_experienced: 0.0,
            effort_loading: 0.0,
            teacher_sd: 0.2,
            teacher_year_sd: 0.1,
            school_sd: 0.2,
            stream_sd: 0.3,
            ability_sd: 0.6,
            ability_persistence: 0.7,
            pupil_round_sd: 0.3,
            noise_sd: 0.6,
            lag_coef: 0.6,
            presence_base: 0.8,
            presence_experienced: 0.0,
            presence_advertised: 0.0,
            presence_teacher_sd: 0.1,
            plan_base: 0.5,
            plan_experienced: 0.0,
            pedagogy_base: 1.5,
            pedagogy_experienced: 0.0,
            retention_base: 0.8,
            retention_experienced: 0.0,
            retention_covariate: 0.0,
            grading_experienced: 0.0,
        }
    }
}

impl EffectSpec {
    pub fn validate(&self) -> Result<()> {
        let sds = [
            self.teacher_sd,
            self.teacher_year_sd,
            self.school_sd,
            self.stream_sd,
            self.ability_sd,
            self.pupil_round_sd,
            self.noise_sd,
            self.presence_teacher_sd,
        ];
        if sds.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Config("effects: standard deviations must be >= 0".into()));
        }
        if !(-1.0..=1.0).contains(&self.ability_persistence) {
            return Err(Error::Config("effects: ability_persistence must lie in [-1, 1]".into()));
        }
        for (n, p) in [
            ("presence_base", self.presence_base),
            ("plan_base", self.plan_base),
            ("retention_base", self.retention_base),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("effects: {n} must be a probability")));
            }
        }
        if !(0.0..=3.0).contains(&self.pedagogy_base) {
            return Err(Error::Config("effects: pedagogy_base must lie in [0, 3]".into()));
        }
        Ok(())
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.random::<f64>() < p.clamp(0.0, 1.0)
}

struct Sampled {
    pupil: usize,
    absent: bool,
}

/// Simulate all outcomes of a generated world. The returned panel adds pupils,
/// assessments, teaching assignments, spot-checks, retention and (in IRT mode)
/// item responses to the world's design units.
pub fn simulate_outcomes(world: &World, effects: &EffectSpec, menu: &ContractMenu, seed: u64) -> Result<Panel> {
    effects.validate()?;
    let cfg = &world.config;
    let mut p = world.panel.clone();
    let seeder = Seeder::new(seed);

    // rosters and test samples
    let mut rng = seeder.stream("outcomes-rosters");
    let mut samples: Vec<[Vec<Sampled>; 3]> = Vec::with_capacity(p.streams.len());
    let mut pupils: Vec<Pupil> = Vec::new();
    for st in p.streams.iter_mut() {
        let e = st.enrolled[0] as usize;
        let dropped: Vec<bool> = (0..e).map(|_| bernoulli(&mut rng, cfg.pupil_dropout)).collect();
        let stay: Vec<bool> = dropped.iter().map(|d| !d && bernoulli(&mut rng, cfg.pupil_continue)).collect();
        let n_stay = stay.iter().filter(|s| **s).count();
        let e1 = e - dropped.iter().filter(|d| **d).count();
        st.enrolled = [e as u32, e1 as u32, e as u32];
        // year-2 register: continuing pupils, then newcomers (positions >= e)
        let register2: Vec<usize> = (0..e).filter(|&k| stay[k]).chain(e..e + (e - n_stay)).collect();
        let mut ids: HashMap<usize, usize> = HashMap::new();
        let mut id_of = |pos: usize, pupils: &mut Vec<Pupil>| -> usize {
            *ids.entry(pos).or_insert_with(|| {
                let id = pupils.len();
                let enrolled = if pos < e { [true, !dropped[pos], stay[pos]] } else { [false, false, true] };
                pupils.push(Pupil {
                    id,
                    stream: st.id,
                    enrolled,
                });
                id
            })
        };
        let mut draw = |round: usize, n: usize, register: &[usize], rng: &mut crate::rng::StreamRng, pupils: &mut Vec<Pupil>| {
            let mut chosen: Vec<usize> = sample(rng, register.len(), n.min(register.len())).into_vec();
            chosen.sort_unstable();
            chosen
                .into_iter()
                .map(|k| {
                    let pos = register[k];
                    let gone = round == 1 && pos < e && dropped[pos];
                    Sampled {
                        pupil: id_of(pos, pupils),
                        absent: gone || bernoulli(rng, cfg.absence),
                    }
                })
                .collect::<Vec<_>>()
        };
        let register1: Vec<usize> = (0..e).collect();
        let s0 = draw(0, cfg.baseline_sample, &register1, &mut rng, &mut pupils);
        let s1 = draw(1, cfg.endline_sample, &register1, &mut rng, &mut pupils);
        let s2 = draw(2, cfg.endline_sample, &register2, &mut rng, &mut pupils);
        samples.push([s0, s1, s2]);
    }
    p.pupils = pupils;

    // year-1 teaching, retention and replacements, year-2 teaching
    let mut rng = seeder.stream("outcomes-teachers");
    let mut slots: HashMap<(usize, crate::data::SubjectFamily), Vec<usize>> = HashMap::new();
    for t in &p.teachers {
        slots.entry((t.school, t.family)).or_default().push(t.id);
    }
    let n_original = p.teachers.len();
    for j in 0..n_original {
        let t = &p.teachers[j];
        let te = f64::from(p.schools[t.school].arm == Arm::P4p);
        let prob = effects.retention_base + te * (effects.retention_experienced + effects.retention_covariate * t.grading_z);
        let kept = bernoulli(&mut rng, prob);
        let (g, x) = (normal(&mut rng), normal(&mut rng));
        let t = &mut p.teachers[j];
        t.retained = kept;
        t.active = [true, kept];
        if kept {
            t.grading_z_endline = Some(t.grading_z + effects.grading_experienced * te + 0.5 * g);
            t.dictator_x_endline = Some((t.dictator_x + 0.1 * x).clamp(0.0, 1.0));
        }
    }
    for j in 0..n_original {
        if p.teachers[j].retained {
            continue;
        }
        let old = p.teachers[j].clone();
        let ty = world.types.sample(&mut rng);
        let (g, x) = (normal(&mut rng), normal(&mut rng));
        let id = p.teachers.len();
        p.teachers.push(Teacher {
            id,
            school: old.school,
            recruit: false,
            family: old.family,
            market: None,
            tau: ty.tau,
            theta: ty.theta,
            grading_z: g,
            dictator_x: (0.5 * (ty.tau / 10.0) + 0.15 * x).clamp(0.0, 1.0),
            grading_z_endline: None,
            dictator_x_endline: None,
            retained: true,
            active: [false, true],
        });
        for v in slots.get_mut(&(old.school, old.family)).unwrap().iter_mut() {
            if *v == j {
                *v = id;
            }
        }
    }
    let mut school_streams: HashMap<usize, Vec<usize>> = HashMap::new();
    for st in &p.streams {
        school_streams.entry(st.school).or_default().push(st.id);
    }
    let mut teaching = Vec::new();
    for round in [1u8, 2] {
        let mut keys: Vec<_> = slots.keys().copied().collect();
        keys.sort();
        for key in keys {
            let holders: Vec<usize> = if round == 2 {
                slots[&key].clone()
            } else {
                // year-1 holders: original teachers in slot order
                let mut v: Vec<usize> = p
                    .teachers
                    .iter()
                    .filter(|t| t.school == key.0 && t.family == key.1 && t.active[0])
                    .map(|t| t.id)
                    .collect();
                v.sort_unstable();
                v
            };
            let streams = &school_streams[&key.0];
            for (k, &s) in streams.iter().enumerate() {
                let teacher = holders[(k / cfg.streams_per_teacher).min(holders.len() - 1)];
                for &subject in key.1.subjects() {
                    teaching.push(Teaching {
                        teacher,
                        stream: s,
                        subject,
                        round,
                    });
                }
            }
        }
    }
    teaching.sort_by_key(|t| (t.round, t.stream, t.subject));
    p.teaching = teaching;
    let lookup = p.teacher_lookup();

    // learning
    let mut rng = seeder.stream("outcomes-learning");
    let school_fx: Vec<f64> = (0..p.schools.len()).map(|_| effects.school_sd * normal(&mut rng)).collect();
    let teacher_fx: Vec<f64> = (0..p.teachers.len()).map(|_| effects.teacher_sd * normal(&mut rng)).collect();
    let contribution = |t: &Teacher, rng: &mut crate::rng::StreamRng| -> f64 {
        let arm = p.schools[t.school].arm;
        let te = f64::from(arm == Arm::P4p);
        let ta = f64::from(t.market.map(|m| p.markets[m].arm) == Some(Arm::P4p));
        let inc = f64::from(!t.recruit);
        let scheme = if arm == Arm::P4p { Scheme::P4p } else { Scheme::Fw };
        let perf = effort(TeacherType { tau: t.tau, theta: t.theta }, scheme, menu) * t.theta / 10.0;
        effects.experienced * te
            + effects.incumbent_experienced * te * inc
            + effects.advertised * ta
            + effects.interaction * ta * te
            + effects.effort_loading * perf
            + teacher_fx[t.id]
            + effects.teacher_year_sd * normal(rng)
    };
    let mut ability: HashMap<(usize, Subject), (u8, f64)> = HashMap::new();
    let phi = effects.ability_persistence;
    let subjects = crate::data::SUBJECTS;
    for round in [0u8, 1, 2] {
        let lag = if round > 0 {
            Some(p.lagged_means_by(round, |o| o.score.or(Some(o.latent))))
        } else {
            None
        };
        let mut contrib: HashMap<(usize, u8), f64> = HashMap::new();
        if round > 0 {
            let mut ids: Vec<usize> = p.teaching.iter().filter(|t| t.round == round).map(|t| t.teacher).collect();
            ids.sort_unstable();
            ids.dedup();
            for j in ids {
                let c = contribution(&p.teachers[j], &mut rng);
                contrib.insert((j, round), c);
            }
        }
        let mut new_obs = Vec::new();
        for st in &p.streams {
            let stream_level: Vec<f64> = subjects.iter().map(|_| effects.stream_sd * normal(&mut rng)).collect();
            for s in &samples[st.id][round as usize] {
                let u = effects.pupil_round_sd * normal(&mut rng);
                for (b, &subject) in subjects.iter().enumerate() {
                    let a = match ability.get(&(s.pupil, subject)) {
                        Some(&(r0, prev)) => {
                            let k = (round - r0) as i32;
                            phi.powi(k) * prev + (1.0 - phi.powi(2 * k)).max(0.0).sqrt() * effects.ability_sd * normal(&mut rng)
                        }
                        None => effects.ability_sd * normal(&mut rng),
                    };
                    ability.insert((s.pupil, subject), (round, a));
                    let base = match &lag {
                        None => stream_level[b],
                        Some(l) => {
                            let teacher = lookup[&(st.id, subject, round)];
                            effects.lag_coef * l[&(st.id, subject)].0 + contrib[&(teacher, round)]
                        }
                    };
                    let latent = base + a + u + school_fx[st.school] + effects.noise_sd * normal(&mut rng);
                    new_obs.push(PupilObs {
                        pupil: s.pupil,
                        stream: st.id,
                        subject,
                        round,
                        absent: s.absent,
                        score: (!s.absent && cfg.score_mode == ScoreMode::Latent).then_some(latent),
                        latent,
                    });
                }
            }
        }
        p.observations.extend(new_obs);
    }

    // item responses
    if cfg.score_mode == ScoreMode::Irt {
        let mut rng = seeder.stream("outcomes-responses");
        let mut banks: HashMap<(Subject, u8, u8), Vec<Item>> = HashMap::new();
        for o in &p.observations {
            if o.absent {
                continue;
            }
            let grade = p.streams[o.stream].grade;
            let bank = banks.entry((o.subject, grade, o.round)).or_insert_with(|| {
                let mut r = seeder.stream(&format!("item-bank-{}-{grade}-{}", o.subject.as_str(), o.round));
                (0..cfg.items_per_test)
                    .map(|_| Item {
                        discrimination: r.random_range(0.5..2.0),
                        difficulty: r.random_range(-2.0..2.0),
                    })
                    .collect()
            });
            for (k, it) in bank.iter().enumerate() {
                p.responses.push(Response {
                    pupil: o.pupil,
                    subject: o.subject,
                    round: o.round,
                    item: k as u16,
                    correct: Some(rng.random::<f64>() < it.p_correct(o.latent)),
                });
            }
        }
    }

    // spot-checks
    let mut rng = seeder.stream("outcomes-spotchecks");
    let presence_fx: Vec<f64> = (0..p.teachers.len()).map(|_| effects.presence_teacher_sd * normal(&mut rng)).collect();
    let mut checks = Vec::new();
    for round in [1u8, 2] {
        for t in p.teachers.iter().filter(|t| t.active[round as usize - 1]) {
            let arm = p.schools[t.school].arm;
            let te = f64::from(arm == Arm::P4p);
            let ta = f64::from(t.market.map(|m| p.markets[m].arm) == Some(Arm::P4p));
            let visits = if arm == Arm::P4p { cfg.visits_p4p } else { cfg.visits_fw }[round as usize - 1];
            for visit in 0..visits {
                let pres = effects.presence_base + effects.presence_experienced * te + effects.presence_advertised * ta + presence_fx[t.id];
                let presence = f64::from(bernoulli(&mut rng, pres));
                let lesson_plan = f64::from(bernoulli(&mut rng, effects.plan_base + effects.plan_experienced * te));
                let mut pedagogy = [0.0; 4];
                for c in pedagogy.iter_mut() {
                    let v = effects.pedagogy_base + effects.pedagogy_experienced * te + 0.6 * normal(&mut rng);
                    *c = v.round().clamp(0.0, 3.0);
                }
                checks.push(SpotCheck {
                    teacher: t.id,
                    round,
                    visit,
                    presence,
                    lesson_plan,
                    pedagogy,
                });
            }
        }
    }
    p.spotchecks = checks;
    Ok(p)
}
