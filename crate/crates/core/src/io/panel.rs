//! CSV form of a [`Panel`]: one file per table, header row mandatory, missing
//! numbers as empty cells. Loading collects every schema violation across all
//! files before giving up, then every integrity violation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Writer};

use crate::data::{
    Applicant, Arm, Market, Panel, Pupil, PupilObs, Response, School, SpotCheck, Stream, Subject, SubjectFamily,
    Teacher, Teaching, GRADES, ROUNDS,
};
use crate::error::{Error, Result, Violation};

pub const ASSIGNMENTS: &str = "assignments.csv";
pub const STREAMS: &str = "streams.csv";
pub const PUPILS: &str = "pupils.csv";
pub const TEACHERS: &str = "teachers.csv";
pub const TEACHING: &str = "teaching.csv";
pub const SPOTCHECKS: &str = "spotchecks.csv";
pub const APPLICANTS: &str = "applicants.csv";
pub const RESPONSES: &str = "responses.csv";

const ASSIGNMENT_COLS: &[&str] = &["unit", "level", "arm", "district", "family", "adjacent", "vacancies"];
const STREAM_COLS: &[&str] = &["stream", "school", "grade", "enrolled_r0", "enrolled_r1", "enrolled_r2"];
const PUPIL_COLS: &[&str] = &[
    "pupil", "stream", "school", "district", "grade", "round", "subject", "score", "sampled", "absent", "latent",
    "enrolled_r0", "enrolled_r1", "enrolled_r2",
];
const TEACHER_COLS: &[&str] = &[
    "teacher", "school", "recruit", "family", "market", "tau", "theta", "grading_z", "dictator_x",
    "grading_z_endline", "dictator_x_endline", "retained", "active_r1", "active_r2",
];
const TEACHING_COLS: &[&str] = &["teacher", "stream", "subject", "round"];
const SPOTCHECK_COLS: &[&str] = &[
    "teacher", "round", "visit", "presence", "lesson_plan", "objective", "activities", "assessment", "engagement",
];
const APPLICANT_COLS: &[&str] = &["applicant", "market", "ttc_score", "tau", "theta", "hired"];
const RESPONSE_COLS: &[&str] = &["pupil", "subject", "round", "item", "correct"];

/// Codes commonly used for "missing" in survey exports. A real cell holding
/// one of these is rejected so a forgotten code never reads as a score.
const SENTINELS: &[f64] = &[-9.0, -99.0, -999.0, -9999.0, 999.0, 9999.0];

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn writer(dir: &Path, name: &str, cols: &[&str]) -> Result<Writer<File>> {
    let mut w = Writer::from_path(dir.join(name))?;
    w.write_record(cols)?;
    Ok(w)
}

/// Write every table of `panel` into `dir`, which must exist.
pub fn write_panel(panel: &Panel, dir: &Path) -> Result<()> {
    let mut w = writer(dir, ASSIGNMENTS, ASSIGNMENT_COLS)?;
    for m in &panel.markets {
        let adj: Vec<String> = m.adjacent.iter().map(|a| a.to_string()).collect();
        w.write_record([
            m.id.to_string(),
            "market".into(),
            m.arm.as_str().into(),
            m.district.to_string(),
            m.family.as_str().into(),
            adj.join(";"),
            m.vacancies.to_string(),
        ])?;
    }
    for s in &panel.schools {
        w.write_record([
            s.id.to_string(),
            "school".into(),
            s.arm.as_str().into(),
            s.district.to_string(),
            String::new(),
            String::new(),
            String::new(),
        ])?;
    }
    w.flush()?;

    let mut w = writer(dir, STREAMS, STREAM_COLS)?;
    for s in &panel.streams {
        w.write_record([
            s.id.to_string(),
            s.school.to_string(),
            s.grade.to_string(),
            s.enrolled[0].to_string(),
            s.enrolled[1].to_string(),
            s.enrolled[2].to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = writer(dir, PUPILS, PUPIL_COLS)?;
    let mut sampled = vec![false; panel.pupils.len()];
    let pupil_row = |p: &Pupil| -> [String; 5] {
        let st = &panel.streams[p.stream];
        [
            p.id.to_string(),
            p.stream.to_string(),
            st.school.to_string(),
            panel.schools[st.school].district.to_string(),
            st.grade.to_string(),
        ]
    };
    for o in &panel.observations {
        sampled[o.pupil] = true;
        let p = &panel.pupils[o.pupil];
        let [id, stream, school, district, grade] = pupil_row(p);
        w.write_record([
            id,
            stream,
            school,
            district,
            grade,
            o.round.to_string(),
            o.subject.as_str().into(),
            opt_num(o.score),
            "1".into(),
            flag(o.absent).into(),
            num(o.latent),
            flag(p.enrolled[0]).into(),
            flag(p.enrolled[1]).into(),
            flag(p.enrolled[2]).into(),
        ])?;
    }
    for p in panel.pupils.iter().filter(|p| !sampled[p.id]) {
        let [id, stream, school, district, grade] = pupil_row(p);
        w.write_record([
            id,
            stream,
            school,
            district,
            grade,
            String::new(),
            String::new(),
            String::new(),
            "0".into(),
            String::new(),
            String::new(),
            flag(p.enrolled[0]).into(),
            flag(p.enrolled[1]).into(),
            flag(p.enrolled[2]).into(),
        ])?;
    }
    w.flush()?;

    let mut w = writer(dir, TEACHERS, TEACHER_COLS)?;
    for t in &panel.teachers {
        w.write_record([
            t.id.to_string(),
            t.school.to_string(),
            flag(t.recruit).into(),
            t.family.as_str().into(),
            t.market.map(|m| m.to_string()).unwrap_or_default(),
            num(t.tau),
            num(t.theta),
            num(t.grading_z),
            num(t.dictator_x),
            opt_num(t.grading_z_endline),
            opt_num(t.dictator_x_endline),
            flag(t.retained).into(),
            flag(t.active[0]).into(),
            flag(t.active[1]).into(),
        ])?;
    }
    w.flush()?;

    let mut w = writer(dir, TEACHING, TEACHING_COLS)?;
    for t in &panel.teaching {
        w.write_record([
            t.teacher.to_string(),
            t.stream.to_string(),
            t.subject.as_str().into(),
            t.round.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = writer(dir, SPOTCHECKS, SPOTCHECK_COLS)?;
    for s in &panel.spotchecks {
        w.write_record([
            s.teacher.to_string(),
            s.round.to_string(),
            s.visit.to_string(),
            num(s.presence),
            num(s.lesson_plan),
            num(s.pedagogy[0]),
            num(s.pedagogy[1]),
            num(s.pedagogy[2]),
            num(s.pedagogy[3]),
        ])?;
    }
    w.flush()?;

    let mut w = writer(dir, APPLICANTS, APPLICANT_COLS)?;
    for a in &panel.applicants {
        w.write_record([
            a.id.to_string(),
            a.market.to_string(),
            num(a.ttc_score),
            num(a.tau),
            num(a.theta),
            flag(a.hired).into(),
        ])?;
    }
    w.flush()?;

    let mut w = writer(dir, RESPONSES, RESPONSE_COLS)?;
    for r in &panel.responses {
        w.write_record([
            r.pupil.to_string(),
            r.subject.as_str().into(),
            r.round.to_string(),
            r.item.to_string(),
            r.correct.map(|c| flag(c).to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A parsed CSV file: header positions and records with their line numbers.
struct Sheet {
    file: &'static str,
    cols: HashMap<String, usize>,
    rows: Vec<(u64, StringRecord)>,
}

fn read_sheet(dir: &Path, file: &'static str, expected: &[&str], required: bool, v: &mut Vec<Violation>) -> Result<Option<Sheet>> {
    let path = dir.join(file);
    let at = |line: Option<u64>, message: String| Violation {
        file: file.to_string(),
        line,
        message,
    };
    if !path.exists() {
        if required {
            v.push(at(None, "file is missing".into()));
        }
        return Ok(None);
    }
    let bytes = std::fs::read(&path)?;
    if std::str::from_utf8(&bytes).is_err() {
        v.push(at(None, "file is not valid UTF-8".into()));
        return Ok(None);
    }
    let mut rd = ReaderBuilder::new().has_headers(true).from_reader(bytes.as_slice());
    let headers = match rd.headers() {
        Ok(h) => h.clone(),
        Err(e) => {
            v.push(at(None, format!("unreadable header: {e}")));
            return Ok(None);
        }
    };
    let cols: HashMap<String, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim().to_string(), i)).collect();
    let before = v.len();
    for c in expected {
        if !cols.contains_key(*c) {
            v.push(at(None, format!("column `{c}` is missing")));
        }
    }
    for h in headers.iter() {
        if !expected.contains(&h.trim()) {
            v.push(at(None, format!("unknown column `{}`", h.trim())));
        }
    }
    if v.len() > before {
        return Ok(None);
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        match rec {
            Ok(r) => {
                let line = r.position().map(|p| p.line()).unwrap_or(0);
                rows.push((line, r));
            }
            Err(e) => v.push(at(e.position().map(|p| p.line()), format!("malformed record: {e}"))),
        }
    }
    if rows.is_empty() && required {
        return Err(Error::EmptyFile(file.to_string()));
    }
    Ok(Some(Sheet { file, cols, rows }))
}

/// Cell accessor for one record; parse failures are recorded and a default
/// returned, so one pass reports every bad cell of the row.
struct Row<'a> {
    sheet: &'a Sheet,
    line: u64,
    rec: &'a StringRecord,
    errors: Vec<String>,
}

impl<'a> Row<'a> {
    fn raw(&self, col: &str) -> &'a str {
        self.rec.get(self.sheet.cols[col]).unwrap_or("").trim()
    }

    fn get<T: Default>(&mut self, col: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> T {
        let s = self.raw(col);
        if s.is_empty() {
            self.errors.push(format!("`{col}` is empty"));
            return T::default();
        }
        match parse(s) {
            Some(v) => v,
            None => {
                self.errors.push(format!("`{col}` = {s:?} is not {what}"));
                T::default()
            }
        }
    }

    fn opt<T>(&mut self, col: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Option<T> {
        let s = self.raw(col);
        if s.is_empty() {
            return None;
        }
        let v = parse(s);
        if v.is_none() {
            self.errors.push(format!("`{col}` = {s:?} is not {what}"));
        }
        v
    }

    fn index(&mut self, col: &str) -> usize {
        self.get(col, "a non-negative integer", |s| s.parse().ok())
    }

    fn real(&mut self, col: &str) -> f64 {
        self.get(col, "a finite number", real)
    }

    fn opt_real(&mut self, col: &str) -> Option<f64> {
        self.opt(col, "a finite number", real)
    }

    fn flag(&mut self, col: &str) -> bool {
        self.get(col, "0 or 1", flag_of)
    }

    fn round(&mut self, col: &str) -> u8 {
        self.get(col, "a round (0, 1 or 2)", |s| s.parse().ok().filter(|r| ROUNDS.contains(r)))
    }

    fn subject(&mut self, col: &str) -> Subject {
        self.get(col, "a subject", |s| Subject::parse(s).map(Some)).unwrap_or(Subject::English)
    }
}

fn real(s: &str) -> Option<f64> {
    let x: f64 = s.parse().ok()?;
    (x.is_finite() && !SENTINELS.contains(&x)).then_some(x)
}

fn flag_of(s: &str) -> Option<bool> {
    match s {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    }
}

/// Run `f` over every record, keeping rows that parsed cleanly.
fn parse_rows<T>(sheet: &Option<Sheet>, v: &mut Vec<Violation>, mut f: impl FnMut(&mut Row) -> T) -> Vec<(u64, T)> {
    let Some(sheet) = sheet else {
        return Vec::new();
    };
    let mut out = Vec::with_capacity(sheet.rows.len());
    for (line, rec) in &sheet.rows {
        let mut row = Row {
            sheet,
            line: *line,
            rec,
            errors: Vec::new(),
        };
        let value = f(&mut row);
        if row.errors.is_empty() {
            out.push((*line, value));
        } else {
            for e in row.errors {
                v.push(Violation {
                    file: sheet.file.to_string(),
                    line: Some(row.line),
                    message: e,
                });
            }
        }
    }
    out
}

/// Row counts of a loaded panel, keyed by file name.
pub fn row_counts(panel: &Panel) -> BTreeMap<&'static str, usize> {
    BTreeMap::from([
        (ASSIGNMENTS, panel.markets.len() + panel.schools.len()),
        (STREAMS, panel.streams.len()),
        (PUPILS, panel.observations.len()),
        (TEACHERS, panel.teachers.len()),
        (TEACHING, panel.teaching.len()),
        (SPOTCHECKS, panel.spotchecks.len()),
        (APPLICANTS, panel.applicants.len()),
        (RESPONSES, panel.responses.len()),
    ])
}

enum Unit {
    Market(Market),
    School(School),
}

struct PupilRow {
    pupil: Pupil,
    school: usize,
    district: usize,
    grade: u8,
    obs: Option<PupilObs>,
}

/// Ids must be exactly 0..n once sorted; returns the sorted values.
fn dense<T>(what: &str, mut items: Vec<(usize, T)>, issues: &mut Vec<String>) -> Vec<T> {
    items.sort_by_key(|(id, _)| *id);
    for (k, (id, _)) in items.iter().enumerate() {
        if *id != k {
            issues.push(format!("{what} ids are not 0..{} (found {id} at position {k})", items.len()));
            break;
        }
    }
    items.into_iter().map(|(_, t)| t).collect()
}

/// Load and validate a panel directory written by [`write_panel`] or by hand.
pub fn load_panel(dir: &Path) -> Result<Panel> {
    let mut v = Vec::new();
    let assignments = read_sheet(dir, ASSIGNMENTS, ASSIGNMENT_COLS, true, &mut v)?;
    let streams = read_sheet(dir, STREAMS, STREAM_COLS, true, &mut v)?;
    let pupils = read_sheet(dir, PUPILS, PUPIL_COLS, true, &mut v)?;
    let teachers = read_sheet(dir, TEACHERS, TEACHER_COLS, true, &mut v)?;
    let teaching = read_sheet(dir, TEACHING, TEACHING_COLS, false, &mut v)?;
    let spotchecks = read_sheet(dir, SPOTCHECKS, SPOTCHECK_COLS, false, &mut v)?;
    let applicants = read_sheet(dir, APPLICANTS, APPLICANT_COLS, false, &mut v)?;
    let responses = read_sheet(dir, RESPONSES, RESPONSE_COLS, false, &mut v)?;

    let units = parse_rows(&assignments, &mut v, |r| {
        let id = r.index("unit");
        let arm = r.get("arm", "FW, P4P or MIXED", |s| Arm::parse(s).map(Some)).unwrap_or(Arm::Fw);
        let district = r.index("district");
        match r.raw("level") {
            "market" => {
                let family = r.get("family", "TMS, TML or TSS", |s| SubjectFamily::parse(s).map(Some)).unwrap_or(SubjectFamily::Tms);
                let adjacent = r
                    .opt("adjacent", "a ;-separated id list", |s| {
                        s.split(';').map(|x| x.trim().parse::<usize>().ok()).collect::<Option<Vec<_>>>()
                    })
                    .unwrap_or_default();
                let vacancies = r.index("vacancies");
                Unit::Market(Market {
                    id,
                    district,
                    family,
                    arm,
                    adjacent,
                    vacancies,
                })
            }
            "school" => {
                for c in ["family", "adjacent", "vacancies"] {
                    if !r.raw(c).is_empty() {
                        r.errors.push(format!("`{c}` must be empty for a school"));
                    }
                }
                if arm == Arm::Mixed {
                    r.errors.push("schools cannot be MIXED".into());
                }
                Unit::School(School { id, district, arm })
            }
            other => {
                r.errors.push(format!("`level` = {other:?} is not market or school"));
                Unit::School(School { id, district, arm })
            }
        }
    });
    let stream_rows = parse_rows(&streams, &mut v, |r| Stream {
        id: r.index("stream"),
        school: r.index("school"),
        grade: r.get("grade", "a grade (4, 5 or 6)", |s| s.parse().ok().filter(|g| GRADES.contains(g))),
        enrolled: [
            r.get("enrolled_r0", "a count", |s| s.parse().ok()),
            r.get("enrolled_r1", "a count", |s| s.parse().ok()),
            r.get("enrolled_r2", "a count", |s| s.parse().ok()),
        ],
    });
    let pupil_rows = parse_rows(&pupils, &mut v, |r| {
        let pupil = Pupil {
            id: r.index("pupil"),
            stream: r.index("stream"),
            enrolled: [r.flag("enrolled_r0"), r.flag("enrolled_r1"), r.flag("enrolled_r2")],
        };
        let school = r.index("school");
        let district = r.index("district");
        let grade = r.get("grade", "a grade", |s| s.parse().ok());
        let obs = if r.flag("sampled") {
            let absent = r.flag("absent");
            let score = r.opt_real("score");
            if absent && score.is_some() {
                r.errors.push("absent pupil has a score".into());
            }
            Some(PupilObs {
                pupil: pupil.id,
                stream: pupil.stream,
                subject: r.subject("subject"),
                round: r.round("round"),
                absent,
                score,
                latent: r.real("latent"),
            })
        } else {
            for c in ["round", "subject", "score", "absent", "latent"] {
                if !r.raw(c).is_empty() {
                    r.errors.push(format!("`{c}` must be empty for an unsampled pupil"));
                }
            }
            None
        };
        PupilRow {
            pupil,
            school,
            district,
            grade,
            obs,
        }
    });
    let teacher_rows = parse_rows(&teachers, &mut v, |r| Teacher {
        id: r.index("teacher"),
        school: r.index("school"),
        recruit: r.flag("recruit"),
        family: r.get("family", "TMS, TML or TSS", |s| SubjectFamily::parse(s).map(Some)).unwrap_or(SubjectFamily::Tms),
        market: r.opt("market", "a market id", |s| s.parse().ok()),
        tau: r.real("tau"),
        theta: r.real("theta"),
        grading_z: r.real("grading_z"),
        dictator_x: r.real("dictator_x"),
        grading_z_endline: r.opt_real("grading_z_endline"),
        dictator_x_endline: r.opt_real("dictator_x_endline"),
        retained: r.flag("retained"),
        active: [r.flag("active_r1"), r.flag("active_r2")],
    });
    let teaching_rows = parse_rows(&teaching, &mut v, |r| Teaching {
        teacher: r.index("teacher"),
        stream: r.index("stream"),
        subject: r.subject("subject"),
        round: r.round("round"),
    });
    let spot_rows = parse_rows(&spotchecks, &mut v, |r| SpotCheck {
        teacher: r.index("teacher"),
        round: r.round("round"),
        visit: r.get("visit", "a visit number", |s| s.parse().ok()),
        presence: r.real("presence"),
        lesson_plan: r.real("lesson_plan"),
        pedagogy: [
            r.real("objective"),
            r.real("activities"),
            r.real("assessment"),
            r.real("engagement"),
        ],
    });
    let applicant_rows = parse_rows(&applicants, &mut v, |r| Applicant {
        id: r.index("applicant"),
        market: r.index("market"),
        ttc_score: r.real("ttc_score"),
        tau: r.real("tau"),
        theta: r.real("theta"),
        hired: r.flag("hired"),
    });
    let response_rows = parse_rows(&responses, &mut v, |r| Response {
        pupil: r.index("pupil"),
        subject: r.subject("subject"),
        round: r.round("round"),
        item: r.get("item", "an item number", |s| s.parse().ok()),
        correct: r.opt("correct", "0 or 1", flag_of),
    });
    if !v.is_empty() {
        return Err(Error::Schema(v));
    }

    // integrity
    let mut issues = Vec::new();
    let mut markets = Vec::new();
    let mut schools = Vec::new();
    for (_, u) in units {
        match u {
            Unit::Market(m) => markets.push((m.id, m)),
            Unit::School(s) => schools.push((s.id, s)),
        }
    }
    let markets = dense("market", markets, &mut issues);
    let schools = dense("school", schools, &mut issues);
    let streams = dense("stream", stream_rows.into_iter().map(|(_, s)| (s.id, s)).collect(), &mut issues);
    let teachers = dense("teacher", teacher_rows.into_iter().map(|(_, t)| (t.id, t)).collect(), &mut issues);
    let applicants = dense("applicant", applicant_rows.into_iter().map(|(_, a)| (a.id, a)).collect(), &mut issues);
    let districts = schools.iter().map(|s| s.district + 1).max().unwrap_or(0);

    let mut cells = HashSet::new();
    for m in &markets {
        if m.district >= districts {
            issues.push(format!("market {} is in district {} which has no schools", m.id, m.district));
        }
        if !cells.insert((m.district, m.family)) {
            issues.push(format!("market {} duplicates district {} family {}", m.id, m.district, m.family.as_str()));
        }
        for a in &m.adjacent {
            if *a >= markets.len() {
                issues.push(format!("market {} lists unknown adjacent market {a}", m.id));
            }
        }
    }
    for s in &streams {
        if s.school >= schools.len() {
            issues.push(format!("stream {} references unknown school {}", s.id, s.school));
        }
    }

    let mut roster: BTreeMap<usize, Pupil> = BTreeMap::new();
    let mut observations = Vec::new();
    let mut seen_obs = HashSet::new();
    for (line, row) in pupil_rows {
        let p = &row.pupil;
        match streams.get(p.stream) {
            None => issues.push(format!("pupil {} (line {line}) references unknown stream {}", p.id, p.stream)),
            Some(st) => {
                let district = schools.get(st.school).map(|s| s.district);
                if st.school != row.school || district != Some(row.district) || st.grade != row.grade {
                    issues.push(format!(
                        "pupil {} (line {line}): school/district/grade disagree with stream {}",
                        p.id, p.stream
                    ));
                }
            }
        }
        match roster.get(&p.id) {
            Some(prev) if prev != p => issues.push(format!("pupil {} (line {line}) disagrees with an earlier row", p.id)),
            Some(_) => {}
            None => {
                roster.insert(p.id, p.clone());
            }
        }
        if let Some(o) = row.obs {
            if !seen_obs.insert((o.pupil, o.subject, o.round)) {
                issues.push(format!(
                    "pupil {} has two rows for {} round {}",
                    o.pupil,
                    o.subject.as_str(),
                    o.round
                ));
            }
            observations.push(o);
        }
    }
    let pupils = dense("pupil", roster.into_iter().collect(), &mut issues);

    for t in &teachers {
        if t.school >= schools.len() {
            issues.push(format!("teacher {} references unknown school {}", t.id, t.school));
        }
        match (t.recruit, t.market) {
            (true, None) => issues.push(format!("recruit {} has no market", t.id)),
            (false, Some(_)) => issues.push(format!("incumbent {} has a market", t.id)),
            (_, Some(m)) if m >= markets.len() => issues.push(format!("teacher {} references unknown market {m}", t.id)),
            _ => {}
        }
    }
    let teaching: Vec<Teaching> = teaching_rows.into_iter().map(|(_, t)| t).collect();
    let mut slots = HashSet::new();
    for t in &teaching {
        if t.teacher >= teachers.len() {
            issues.push(format!("teaching row references unknown teacher {}", t.teacher));
        }
        if t.stream >= streams.len() {
            issues.push(format!("teaching row references unknown stream {}", t.stream));
        }
        if !slots.insert((t.stream, t.subject, t.round)) {
            issues.push(format!(
                "stream {} {} round {} has two teachers",
                t.stream,
                t.subject.as_str(),
                t.round
            ));
        }
    }
    let spotchecks: Vec<SpotCheck> = spot_rows.into_iter().map(|(_, s)| s).collect();
    for s in &spotchecks {
        if s.teacher >= teachers.len() {
            issues.push(format!("spot-check references unknown teacher {}", s.teacher));
        }
    }
    for a in &applicants {
        if a.market >= markets.len() {
            issues.push(format!("applicant {} references unknown market {}", a.id, a.market));
        }
    }
    let responses: Vec<Response> = response_rows.into_iter().map(|(_, r)| r).collect();
    for r in &responses {
        if r.pupil >= pupils.len() {
            issues.push(format!("response references unknown pupil {}", r.pupil));
        }
    }
    if !issues.is_empty() {
        return Err(Error::Integrity(issues));
    }
    Ok(Panel {
        markets,
        schools,
        streams,
        pupils,
        teachers,
        teaching,
        observations,
        spotchecks,
        applicants,
        responses,
    })
}
