//! Stage orchestration. Each stage writes into its own directory under the
//! output root together with a manifest of input and output digests, so a
//! stage run on its own picks up earlier outputs from disk and any edit to
//! them shows up as a digest mismatch.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::awards::award_ledger;
use crate::data::{Arm, Panel, Subject, GRADES};
use crate::error::{Error, Result};
use crate::estimators::applicants::{PoolFrame, PoolMode};
use crate::estimators::specs::{fit_all, Labels, PreparedSpec, SpecName, Tier, T_A};
use crate::estimators::{fit_ols, SeKind};
use crate::inference::power::power_harness;
use crate::inference::{
    ci_invert, joint_permute, ri_pvalue, Dimension, GridSpec, GroupedKs, Interval, JointSet, PermutationSet, StatKind,
    TestResult,
};
use crate::io::{digest, file_digest, load_panel, panel as tables, write_json, MixedMarkets, RunConfig, Stage};
use crate::irt::{score_panel, TestFit};
use crate::metric::{bn_scores, TeacherLearningScore};
use crate::rng::Seeder;
use crate::tva::{eb_value_added, fit_tva_model, fosd_check, rank_corr, simulate_tva_panel, TvaObs};
use crate::world::{arm_code, gen_world, simulate_outcomes};

pub const MANIFEST: &str = "manifest.json";
pub const IRT_SCORES: &str = "scores.csv";
pub const TEACHER_SCORES: &str = "teacher_scores.csv";

const PANEL_FILES: [&str; 8] = [
    tables::ASSIGNMENTS,
    tables::STREAMS,
    tables::PUPILS,
    tables::TEACHERS,
    tables::TEACHING,
    tables::SPOTCHECKS,
    tables::APPLICANTS,
    tables::RESPONSES,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: Stage,
    pub seed: u64,
    pub config_digest: String,
    /// Files read, relative to the output root, with their SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl StageManifest {
    /// One digest over all inputs and the configuration.
    pub fn input_digest(&self) -> String {
        combined(&self.config_digest, &self.inputs)
    }
}

fn combined(config: &str, inputs: &BTreeMap<String, String>) -> String {
    let mut s = format!("config={config}\n");
    for (k, v) in inputs {
        s.push_str(&format!("{k}={v}\n"));
    }
    digest(s.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub out: PathBuf,
    pub manifests: Vec<StageManifest>,
}

/// Digest of the configuration with the run-local fields (output directory,
/// stage list) blanked, so that the same analysis hashes the same wherever
/// it is written.
pub fn config_digest(cfg: &RunConfig) -> Result<String> {
    let mut c = cfg.clone();
    c.out = PathBuf::new();
    c.stages.clear();
    Ok(digest(c.to_toml()?.as_bytes()))
}

fn rel(root: &Path, p: &Path) -> String {
    p.strip_prefix(root)
        .unwrap_or(p)
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

fn csv_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ScoreRow {
    pupil: usize,
    subject: Subject,
    round: u8,
    score: f64,
}

#[derive(Serialize)]
struct ItemRow<'a> {
    subject: Subject,
    grade: u8,
    round: u8,
    item: &'a str,
    discrimination: Option<f64>,
    difficulty: Option<f64>,
}

#[derive(Serialize)]
struct TestRow {
    subject: Subject,
    grade: u8,
    round: u8,
    respondents: usize,
    blank: usize,
    dropped: usize,
    iterations: usize,
    log_likelihood: f64,
}

#[derive(Serialize)]
struct AwardCsvRow {
    teacher: usize,
    district: usize,
    round: u8,
    arm: Arm,
    recruit: bool,
    learning: Option<f64>,
    presence: Option<f64>,
    preparation: Option<f64>,
    pedagogy: Option<f64>,
    learning_pct: Option<f64>,
    inputs_pct: Option<f64>,
    summary: Option<f64>,
    award: bool,
    payout_rwf: f64,
}

#[derive(Serialize)]
struct ValueAddedRow {
    teacher: usize,
    school: usize,
    recruit: bool,
    advertised: Option<Arm>,
    experienced: Arm,
    value_added: f64,
    mean_residual: f64,
    reliability: f64,
    years: usize,
    clamped: bool,
}

#[derive(Debug, Clone, Serialize)]
struct SpecTest {
    spec: SpecName,
    coefficient: &'static str,
    tier: Tier,
    estimate: f64,
    test: TestResult,
    interval: Option<Interval>,
}

/// Runs stages in order against one output root.
pub struct Pipeline<'a> {
    cfg: &'a RunConfig,
    out: PathBuf,
    seeder: Seeder,
    config_digest: String,
    panel: Option<Panel>,
    learning: Option<Vec<TeacherLearningScore>>,
}

impl<'a> Pipeline<'a> {
    pub fn new(cfg: &'a RunConfig) -> Result<Self> {
        cfg.validate()?;
        std::fs::create_dir_all(&cfg.out)?;
        Ok(Self {
            cfg,
            out: cfg.out.clone(),
            seeder: Seeder::new(cfg.seed),
            config_digest: config_digest(cfg)?,
            panel: None,
            learning: None,
        })
    }

    fn dir(&self, stage: Stage) -> PathBuf {
        self.out.join(stage.as_str())
    }

    fn stage_seed(&self, stage: Stage) -> u64 {
        self.seeder.child(stage.as_str(), 0).master()
    }

    /// Files an earlier stage left behind that `stage` reads.
    fn inputs(&self, stage: Stage) -> Vec<PathBuf> {
        let sim = self.dir(Stage::Simulate);
        let panel: Vec<PathBuf> = PANEL_FILES.iter().map(|f| sim.join(f)).collect();
        let irt = self.dir(Stage::ScoreIrt).join(IRT_SCORES);
        let mut v = match stage {
            Stage::Simulate => match &self.cfg.input {
                Some(dir) => PANEL_FILES.iter().map(|f| dir.join(f)).collect(),
                None => Vec::new(),
            },
            Stage::Power => Vec::new(),
            Stage::ScoreIrt => panel,
            Stage::Award => {
                let mut v = panel;
                v.push(irt);
                v.push(self.dir(Stage::ScoreBn).join(TEACHER_SCORES));
                v
            }
            Stage::ScoreBn | Stage::Infer | Stage::Tva => {
                let mut v = panel;
                v.push(irt);
                v
            }
        };
        v.retain(|p| p.exists());
        v
    }

    fn panel(&mut self) -> Result<&Panel> {
        if self.panel.is_none() {
            let sim = self.dir(Stage::Simulate);
            if !sim.join(tables::ASSIGNMENTS).exists() {
                return Err(Error::Config(format!(
                    "no panel in {}; run the simulate stage first",
                    sim.display()
                )));
            }
            let mut p = load_panel(&sim)?;
            let irt = self.dir(Stage::ScoreIrt).join(IRT_SCORES);
            if irt.exists() {
                self.check_fresh(Stage::ScoreIrt)?;
                apply_scores(&mut p, &irt)?;
            }
            self.panel = Some(p);
        }
        Ok(self.panel.as_ref().unwrap())
    }

    fn learning(&mut self) -> Result<Vec<TeacherLearningScore>> {
        if let Some(l) = &self.learning {
            return Ok(l.clone());
        }
        let path = self.dir(Stage::ScoreBn).join(TEACHER_SCORES);
        if !path.exists() {
            return Err(Error::Config("no teacher learning scores; run the score-bn stage first".into()));
        }
        self.check_fresh(Stage::ScoreBn)?;
        let mut rd = csv::Reader::from_path(&path)?;
        let rows = rd.deserialize().collect::<std::result::Result<Vec<TeacherLearningScore>, _>>()?;
        self.learning = Some(rows.clone());
        Ok(rows)
    }

    /// Refuse to reuse an earlier stage's outputs if they, or the files they
    /// were computed from, have changed since.
    fn check_fresh(&self, stage: Stage) -> Result<()> {
        let path = self.dir(stage).join(MANIFEST);
        let stale = |why: String| Error::Integrity(vec![format!("{} outputs are stale: {why}", stage.as_str())]);
        let text = std::fs::read_to_string(&path).map_err(|_| stale("manifest missing".into()))?;
        let m: StageManifest = serde_json::from_str(&text)?;
        for (f, want) in m.inputs.iter().chain(&m.outputs) {
            match file_digest(&self.out.join(f)) {
                Ok(got) if &got == want => {}
                _ => return Err(stale(format!("{f} changed"))),
            }
        }
        Ok(())
    }

    /// Run one stage and write its manifest.
    pub fn run_stage(&mut self, stage: Stage) -> Result<StageManifest> {
        let dir = self.dir(stage);
        let inputs: BTreeMap<String, String> = self
            .inputs(stage)
            .iter()
            .map(|p| Ok((rel(&self.out, p), file_digest(p)?)))
            .collect::<Result<_>>()?;
        let wrap = |e: Error| Error::Stage {
            stage: stage.as_str().to_string(),
            digest: combined(&self.config_digest, &inputs),
            source: Box::new(e),
        };
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(|e| wrap(e.into()))?;
        }
        std::fs::create_dir_all(&dir).map_err(|e| wrap(e.into()))?;
        let written = self.execute(stage, &dir).map_err(|e| Error::Stage {
            stage: stage.as_str().to_string(),
            digest: combined(&self.config_digest, &inputs),
            source: Box::new(e),
        })?;
        let mut outputs = BTreeMap::new();
        for f in written {
            let p = dir.join(&f);
            outputs.insert(rel(&self.out, &p), file_digest(&p)?);
        }
        let m = StageManifest {
            stage,
            seed: self.stage_seed(stage),
            config_digest: self.config_digest.clone(),
            inputs,
            outputs,
        };
        write_json(&dir.join(MANIFEST), &m)?;
        Ok(m)
    }

    fn execute(&mut self, stage: Stage, dir: &Path) -> Result<Vec<String>> {
        match stage {
            Stage::Simulate => self.simulate(dir),
            Stage::ScoreIrt => self.score_irt(dir),
            Stage::ScoreBn => self.score_bn(dir),
            Stage::Award => self.award(dir),
            Stage::Infer => self.infer(dir),
            Stage::Tva => self.tva(dir),
            Stage::Power => self.power(dir),
        }
    }

    fn simulate(&mut self, dir: &Path) -> Result<Vec<String>> {
        let cfg = self.cfg;
        let mut files: Vec<String> = PANEL_FILES.iter().map(|s| s.to_string()).collect();
        let panel = match &cfg.input {
            Some(input) => load_panel(input)?,
            None => {
                let seeder = Seeder::new(self.stage_seed(Stage::Simulate));
                let world = gen_world(&cfg.world, &cfg.menu, &cfg.distribution, seeder.child("world", 0).master())?;
                let panel = simulate_outcomes(&world, &cfg.effects, &cfg.menu, seeder.child("outcomes", 0).master())?;
                #[derive(Serialize)]
                struct WorldNotes<'a> {
                    borders: &'a [(usize, usize)],
                    warnings: &'a [String],
                }
                write_json(
                    &dir.join("world.json"),
                    &WorldNotes {
                        borders: &world.borders,
                        warnings: &world.warnings,
                    },
                )?;
                files.push("world.json".into());
                panel
            }
        };
        tables::write_panel(&panel, dir)?;
        self.panel = Some(panel);
        self.learning = None;
        Ok(files)
    }

    fn score_irt(&mut self, dir: &Path) -> Result<Vec<String>> {
        let opts = self.cfg.irt;
        self.panel()?;
        let panel = self.panel.as_mut().unwrap();
        let fits: Vec<TestFit> = score_panel(panel, &opts)?;
        let mut items = Vec::new();
        for f in &fits {
            for (name, it) in f.params.items.iter().zip(&f.params.params) {
                items.push(ItemRow {
                    subject: f.subject,
                    grade: f.grade,
                    round: f.round,
                    item: name,
                    discrimination: it.map(|i| i.discrimination),
                    difficulty: it.map(|i| i.difficulty),
                });
            }
        }
        csv_rows(&dir.join("items.csv"), items)?;
        csv_rows(
            &dir.join("tests.csv"),
            fits.iter().map(|f| TestRow {
                subject: f.subject,
                grade: f.grade,
                round: f.round,
                respondents: f.respondents,
                blank: f.blank,
                dropped: f.params.dropped.len(),
                iterations: f.params.iterations,
                log_likelihood: f.params.log_likelihood,
            }),
        )?;
        csv_rows(
            &dir.join(IRT_SCORES),
            panel.observations.iter().filter_map(|o| {
                Some(ScoreRow {
                    pupil: o.pupil,
                    subject: o.subject,
                    round: o.round,
                    score: o.score?,
                })
            }),
        )?;
        Ok(vec!["items.csv".into(), "tests.csv".into(), IRT_SCORES.into()])
    }

    fn score_bn(&mut self, dir: &Path) -> Result<Vec<String>> {
        let metric = self.cfg.metric;
        let panel = self.panel()?;
        let mut pupils = Vec::new();
        let mut teachers = Vec::new();
        let mut summary = BTreeMap::new();
        for round in [1u8, 2] {
            let out = bn_scores(panel, round, &metric)?;
            summary.insert(
                format!("round_{round}"),
                serde_json::json!({
                    "imputed_cells": out.imputed_cells,
                    "teachers_without_pupils": out.teachers_without_pupils,
                    "teachers_scored": out.teachers.len(),
                    "pupils_ranked": out.pupils.len(),
                }),
            );
            pupils.extend(out.pupils);
            teachers.extend(out.teachers);
        }
        csv_rows(&dir.join("pupil_ranks.csv"), &pupils)?;
        csv_rows(&dir.join(TEACHER_SCORES), &teachers)?;
        write_json(&dir.join("summary.json"), &summary)?;
        self.learning = Some(teachers);
        Ok(vec!["pupil_ranks.csv".into(), TEACHER_SCORES.into(), "summary.json".into()])
    }

    fn award(&mut self, dir: &Path) -> Result<Vec<String>> {
        let learning = self.learning()?;
        let (share, menu) = (self.cfg.awards.share, self.cfg.menu);
        let panel = self.panel()?;
        let mut rows = Vec::new();
        let mut excluded = Vec::new();
        for round in [1u8, 2] {
            let ledger = award_ledger(panel, round, &learning, share, &menu)?;
            for r in ledger.rows {
                let s = r.score.as_ref();
                rows.push(AwardCsvRow {
                    teacher: r.teacher,
                    district: r.district,
                    round: r.round,
                    arm: r.arm,
                    recruit: r.recruit,
                    learning: s.map(|s| s.learning),
                    presence: s.map(|s| s.presence),
                    preparation: s.map(|s| s.preparation),
                    pedagogy: s.map(|s| s.pedagogy),
                    learning_pct: s.map(|s| s.learning_pct),
                    inputs_pct: s.map(|s| s.inputs_pct),
                    summary: s.map(|s| s.summary),
                    award: r.award,
                    payout_rwf: r.payout_rwf,
                });
            }
            excluded.extend(ledger.excluded.into_iter().map(|(t, why)| (round, t, why)));
        }
        csv_rows(&dir.join("awards.csv"), rows)?;
        write_json(&dir.join("excluded.json"), &excluded)?;
        Ok(vec!["awards.csv".into(), "excluded.json".into()])
    }

    fn infer(&mut self, dir: &Path) -> Result<Vec<String>> {
        let cfg = self.cfg;
        let seeder = Seeder::new(self.stage_seed(Stage::Infer));
        let panel = self.panel()?;
        let opts = cfg.estimator.options;
        let (reports, skipped) = fit_all(panel, &cfg.estimator.specs, &opts)?;
        write_json(
            &dir.join("estimates.json"),
            &serde_json::json!({
                "estimates": reports,
                "skipped": skipped.iter().map(|(n, why)| serde_json::json!({"spec": n, "reason": why})).collect::<Vec<_>>(),
            }),
        )?;

        let inf = &cfg.inference;
        let observed = Labels::observed(panel);
        let adv = match inf.mixed_markets {
            MixedMarkets::ShuffleAll => PermutationSet::new(
                Dimension::Advertised,
                &observed.advertised,
                inf.draws,
                seeder.child("advertised", 0).master(),
            )?,
            MixedMarkets::HoldMixed => {
                let strata: Vec<usize> = panel.markets.iter().map(|m| usize::from(m.arm == Arm::Mixed)).collect();
                PermutationSet::stratified(
                    Dimension::Advertised,
                    &observed.advertised,
                    &strata,
                    inf.draws,
                    seeder.child("advertised", 0).master(),
                )?
            }
        };
        let exp = if cfg.world.stratified_experienced {
            let strata: Vec<usize> = panel.schools.iter().map(|s| s.district).collect();
            PermutationSet::stratified(
                Dimension::Experienced,
                &observed.experienced,
                &strata,
                inf.draws,
                seeder.child("experienced", 0).master(),
            )?
        } else {
            PermutationSet::new(
                Dimension::Experienced,
                &observed.experienced,
                inf.draws,
                seeder.child("experienced", 0).master(),
            )?
        };
        let joint = JointSet::new(adv.clone(), exp.clone(), inf.draws, seeder.child("joint", 0).master());

        let mut tests = Vec::new();
        let mut skipped_tests = Vec::new();
        for &name in &inf.specs {
            let spec = match PreparedSpec::new(name, panel, &opts) {
                Ok(s) => s,
                Err(e @ (Error::EmptySample | Error::EmptyPool(_))) => {
                    skipped_tests.push(serde_json::json!({"spec": name, "reason": e.to_string()}));
                    continue;
                }
                Err(e) => return Err(e),
            };
            let (coef, tier) = name.headline();
            let fit = match spec.fit(&observed) {
                Ok(f) => f,
                Err(e @ Error::RankDeficient { .. }) => {
                    skipped_tests.push(serde_json::json!({"spec": name, "reason": e.to_string()}));
                    continue;
                }
                Err(e) => return Err(e),
            };
            let estimate = fit.estimate(coef)?;
            let kind = match fit.stat_kind {
                crate::estimators::StatKind::T => StatKind::StudentizedT,
                crate::estimators::StatKind::Z => StatKind::StudentizedZ,
            };
            let (test, set) = match tier {
                Tier::Advertised => (
                    ri_pvalue(|l| spec.fit(&observed.with_advertised(l))?.stat(coef), &adv, kind)?,
                    Some((&adv, true)),
                ),
                Tier::Experienced => (
                    ri_pvalue(|l| spec.fit(&observed.with_experienced(l))?.stat(coef), &exp, kind)?,
                    Some((&exp, false)),
                ),
                Tier::Joint => (
                    joint_permute(
                        |a, e| {
                            spec.fit(&Labels {
                                advertised: a.to_vec(),
                                experienced: e.to_vec(),
                            })?
                            .stat(coef)
                        },
                        &joint,
                        kind,
                    )?,
                    None,
                ),
            };
            let interval = match (inf.ci, set) {
                (true, Some((perms, advertised))) => {
                    let relabel = |l: &[u8]| {
                        if advertised {
                            observed.with_advertised(l)
                        } else {
                            observed.with_experienced(l)
                        }
                    };
                    let mut grid = GridSpec::new(estimate - inf.ci_half_width, estimate + inf.ci_half_width);
                    grid.alpha = inf.alpha;
                    Some(ci_invert(
                        |delta, l| spec.shifted_stat(coef, &observed, delta, &relabel(l)),
                        perms,
                        estimate,
                        grid,
                    )?)
                }
                _ => None,
            };
            tests.push(SpecTest {
                spec: name,
                coefficient: coef,
                tier,
                estimate,
                test,
                interval,
            });
        }
        let mut out = serde_json::json!({
            "alpha": inf.alpha,
            "advertised_assignments": adv.draws(),
            "experienced_assignments": exp.draws(),
            "tests": tests,
            "skipped": skipped_tests,
        });
        if inf.applicant_tests && !panel.applicants.is_empty() {
            let values: Vec<f64> = panel.applicants.iter().map(|a| a.ttc_score).collect();
            let groups: Vec<usize> = panel.applicants.iter().map(|a| a.market).collect();
            let ks = GroupedKs::new(&values, &groups, panel.markets.len());
            let (p4p, fw) = (arm_code(Arm::P4p), arm_code(Arm::Fw));
            let ks_test = ri_pvalue(|l| ks.statistic(l, p4p, fw), &adv, StatKind::Ks);
            let ols_test = PoolFrame::build(panel, PoolMode::Unweighted).and_then(|frame| {
                ri_pvalue(
                    |l| fit_ols(&frame.design(&observed.with_advertised(l)), SeKind::Cluster)?.report.stat(T_A),
                    &adv,
                    StatKind::StudentizedT,
                )
            });
            // a small design can leave the arm unidentified; report, do not abort
            let show = |r: Result<TestResult>| match r {
                Ok(t) => serde_json::to_value(t).unwrap_or_default(),
                Err(e) => serde_json::json!({ "error": e.to_string() }),
            };
            out["applicant_scores"] = serde_json::json!({ "ks": show(ks_test), "ols": show(ols_test) });
        }
        write_json(&dir.join("inference.json"), &out)?;
        Ok(vec!["estimates.json".into(), "inference.json".into()])
    }

    fn tva(&mut self, dir: &Path) -> Result<Vec<String>> {
        let cfg = self.cfg;
        let seed = self.stage_seed(Stage::Tva);
        let opts = cfg.tva.options;
        if let Some(sim) = &cfg.tva.simulate {
            let (obs, theta) = simulate_tva_panel(sim, Seeder::new(seed).child("panel", 0).master());
            let fit = fit_tva_model(&obs, &opts)?;
            let est = eb_value_added(&fit.components);
            let truth: Vec<f64> = est.iter().map(|e| theta[e.teacher]).collect();
            let va: Vec<f64> = est.iter().map(|e| e.value_added).collect();
            let rc = rank_corr(&va, &truth, cfg.tva.shuffles, Seeder::new(seed).child("rank", 0).master())?;
            write_json(
                &dir.join("components.json"),
                &serde_json::json!({
                    "theta_var": fit.components.theta_var,
                    "eta_var": fit.components.eta_var,
                    "eps_var": fit.components.eps_var,
                    "total_var": fit.components.total_var,
                    "theta_from_config": fit.components.theta_from_config,
                    "truth": { "theta_var": sim.theta_var, "eta_var": sim.eta_var, "eps_var": sim.eps_var },
                    "rank_corr_with_truth": rc,
                }),
            )?;
            csv_rows(&dir.join("value_added.csv"), &est)?;
            return Ok(vec!["components.json".into(), "value_added.csv".into()]);
        }

        let panel = self.panel()?;
        let obs = tva_obs(panel);
        let fit = fit_tva_model(&obs, &opts)?;
        let est = eb_value_added(&fit.components);
        let rows: Vec<ValueAddedRow> = est
            .iter()
            .map(|e| {
                let t = &panel.teachers[e.teacher];
                ValueAddedRow {
                    teacher: t.id,
                    school: t.school,
                    recruit: t.recruit,
                    advertised: panel.advertised_arm(t),
                    experienced: panel.experienced_arm(t),
                    value_added: e.value_added,
                    mean_residual: e.mean_residual,
                    reliability: e.reliability,
                    years: e.years,
                    clamped: e.clamped,
                }
            })
            .collect();
        let by_adv = |arm: Arm| -> Vec<f64> {
            rows.iter()
                .filter(|r| r.recruit && r.advertised == Some(arm))
                .map(|r| r.value_added)
                .collect()
        };
        let (va_p4p, va_fw) = (by_adv(Arm::P4p), by_adv(Arm::Fw));
        let dominance = fosd_check(&va_p4p, &va_fw).ok();
        let va: Vec<f64> = rows.iter().map(|r| r.value_added).collect();
        let skill: Vec<f64> = rows.iter().map(|r| panel.teachers[r.teacher].grading_z).collect();
        let rc = rank_corr(&va, &skill, cfg.tva.shuffles, Seeder::new(seed).child("rank", 0).master()).ok();
        write_json(
            &dir.join("components.json"),
            &serde_json::json!({
                "theta_var": fit.components.theta_var,
                "eta_var": fit.components.eta_var,
                "eps_var": fit.components.eps_var,
                "total_var": fit.components.total_var,
                "theta_from_config": fit.components.theta_from_config,
                "observations": obs.len(),
                "p4p_recruits_dominate_fw_recruits": dominance,
                "rank_corr_with_grading": rc,
            }),
        )?;
        csv_rows(&dir.join("value_added.csv"), rows)?;
        Ok(vec!["components.json".into(), "value_added.csv".into()])
    }

    fn power(&mut self, dir: &Path) -> Result<Vec<String>> {
        let cfg = self.cfg;
        let table = power_harness(&cfg.power, &cfg.menu, &cfg.distribution, self.stage_seed(Stage::Power))?;
        csv_rows(&dir.join("power.csv"), &table.rows)?;
        Ok(vec!["power.csv".into()])
    }
}

/// Endline pupil scores with their teacher, for value-added estimation.
pub fn tva_obs(panel: &Panel) -> Vec<TvaObs> {
    let lookup = panel.teacher_lookup();
    let mut out = Vec::new();
    for round in [1u8, 2] {
        let lags = panel.lagged_means(round);
        for o in panel.observations.iter().filter(|o| o.round == round && !o.absent) {
            let (Some(score), Some(&teacher)) = (o.score, lookup.get(&(o.stream, o.subject, round))) else {
                continue;
            };
            let st = &panel.streams[o.stream];
            let grade = GRADES.iter().position(|g| *g == st.grade).unwrap_or(0);
            out.push(TvaObs {
                teacher,
                round,
                school: st.school,
                cell: o.subject.index() * GRADES.len() + grade,
                lag_mean: lags[&(o.stream, o.subject)].0,
                score,
            });
        }
    }
    out
}

/// Overwrite observation scores with those in an IRT score file.
fn apply_scores(panel: &mut Panel, path: &Path) -> Result<()> {
    let mut rd = csv::Reader::from_path(path)?;
    let mut scores: HashMap<(usize, Subject, u8), f64> = HashMap::new();
    for row in rd.deserialize() {
        let r: ScoreRow = row?;
        scores.insert((r.pupil, r.subject, r.round), r.score);
    }
    for o in panel.observations.iter_mut() {
        if let Some(s) = scores.get(&(o.pupil, o.subject, o.round)) {
            o.score = Some(*s);
        }
    }
    Ok(())
}

/// Execute the configured stages in pipeline order.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunReport> {
    let mut p = Pipeline::new(cfg)?;
    let mut stages = cfg.stages.clone();
    stages.sort();
    stages.dedup();
    let mut manifests = Vec::new();
    for s in stages {
        manifests.push(p.run_stage(s)?);
    }
    std::fs::write(cfg.out.join("config.toml"), cfg.to_toml()?)?;
    Ok(RunReport {
        out: cfg.out.clone(),
        manifests,
    })
}

/// Re-digest every stage's recorded inputs and outputs under `out` and list
/// the files that changed or disappeared since the stage wrote its manifest.
pub fn verify_outputs(out: &Path) -> Result<Vec<String>> {
    let mut problems = Vec::new();
    for stage in crate::io::STAGES {
        let m = out.join(stage.as_str()).join(MANIFEST);
        if !m.exists() {
            continue;
        }
        let manifest: StageManifest = serde_json::from_str(&std::fs::read_to_string(&m)?)?;
        for (kind, files) in [("output", &manifest.outputs), ("input", &manifest.inputs)] {
            for (f, want) in files {
                // inputs given as absolute or outside paths are checked too
                let p = if Path::new(f).is_absolute() { PathBuf::from(f) } else { out.join(f) };
                match file_digest(&p) {
                    Ok(got) if &got == want => {}
                    Ok(_) => problems.push(format!("{}: {kind} {f} changed", stage.as_str())),
                    Err(_) => problems.push(format!("{}: {kind} {f} is missing", stage.as_str())),
                }
            }
        }
    }
    Ok(problems)
}
