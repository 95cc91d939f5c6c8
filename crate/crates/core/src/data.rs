//! In-memory view of one experiment: design units, rosters, assessments,
//! spot-checks and applications. Produced by the simulator, written to and read
//! back from the CSV panel.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::theory::TeachArm;

/// Contract arm of a labor market (advertised) or school (experienced).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    #[serde(rename = "FW")]
    Fw,
    #[serde(rename = "P4P")]
    P4p,
    #[serde(rename = "MIXED")]
    Mixed,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Fw => "FW",
            Arm::P4p => "P4P",
            Arm::Mixed => "MIXED",
        }
    }

    pub fn parse(s: &str) -> Option<Arm> {
        match s {
            "FW" => Some(Arm::Fw),
            "P4P" => Some(Arm::P4p),
            "MIXED" => Some(Arm::Mixed),
            _ => None,
        }
    }

    pub fn teach_arm(self) -> Option<TeachArm> {
        match self {
            Arm::Fw => Some(TeachArm::Fw),
            Arm::P4p => Some(TeachArm::P4p),
            Arm::Mixed => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SubjectFamily {
    /// Mathematics and science.
    #[serde(rename = "TMS")]
    Tms,
    /// Languages.
    #[serde(rename = "TML")]
    Tml,
    /// Social studies.
    #[serde(rename = "TSS")]
    Tss,
}

pub const FAMILIES: [SubjectFamily; 3] = [SubjectFamily::Tms, SubjectFamily::Tml, SubjectFamily::Tss];

impl SubjectFamily {
    pub fn index(self) -> usize {
        match self {
            SubjectFamily::Tms => 0,
            SubjectFamily::Tml => 1,
            SubjectFamily::Tss => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SubjectFamily::Tms => "TMS",
            SubjectFamily::Tml => "TML",
            SubjectFamily::Tss => "TSS",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        FAMILIES.into_iter().find(|f| f.as_str() == s)
    }

    pub fn subjects(self) -> &'static [Subject] {
        match self {
            SubjectFamily::Tms => &[Subject::Mathematics, Subject::Science],
            SubjectFamily::Tml => &[Subject::English, Subject::Kinyarwanda],
            SubjectFamily::Tss => &[Subject::Social],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Subject {
    #[serde(rename = "english")]
    English,
    #[serde(rename = "kinyarwanda")]
    Kinyarwanda,
    #[serde(rename = "mathematics")]
    Mathematics,
    #[serde(rename = "science")]
    Science,
    #[serde(rename = "social")]
    Social,
}

pub const SUBJECTS: [Subject; 5] = [
    Subject::English,
    Subject::Kinyarwanda,
    Subject::Mathematics,
    Subject::Science,
    Subject::Social,
];

pub const GRADES: [u8; 3] = [4, 5, 6];

/// Assessment rounds: 0 is the baseline, 1 and 2 the two endlines.
pub const ROUNDS: [u8; 3] = [0, 1, 2];

impl Subject {
    pub fn index(self) -> usize {
        SUBJECTS.iter().position(|s| *s == self).unwrap()
    }

    pub fn family(self) -> SubjectFamily {
        match self {
            Subject::Mathematics | Subject::Science => SubjectFamily::Tms,
            Subject::English | Subject::Kinyarwanda => SubjectFamily::Tml,
            Subject::Social => SubjectFamily::Tss,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Subject::English => "english",
            Subject::Kinyarwanda => "kinyarwanda",
            Subject::Mathematics => "mathematics",
            Subject::Science => "science",
            Subject::Social => "social",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        SUBJECTS.into_iter().find(|x| x.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Market {
    pub id: usize,
    pub district: usize,
    pub family: SubjectFamily,
    pub arm: Arm,
    pub adjacent: Vec<usize>,
    pub vacancies: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct School {
    pub id: usize,
    pub district: usize,
    pub arm: Arm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stream {
    pub id: usize,
    pub school: usize,
    pub grade: u8,
    /// Enrollment on the register at each round.
    pub enrolled: [u32; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pupil {
    pub id: usize,
    pub stream: usize,
    pub enrolled: [bool; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Teacher {
    pub id: usize,
    pub school: usize,
    pub recruit: bool,
    pub family: SubjectFamily,
    /// Labor market the recruit was hired from.
    pub market: Option<usize>,
    pub tau: f64,
    pub theta: f64,
    /// Baseline grading-task ability.
    pub grading_z: f64,
    /// Baseline dictator-game share sent.
    pub dictator_x: f64,
    pub grading_z_endline: Option<f64>,
    pub dictator_x_endline: Option<f64>,
    /// Still employed at the start of year 2.
    pub retained: bool,
    /// Rounds (1, 2) in which the teacher taught.
    pub active: [bool; 2],
}

impl Teacher {
    pub fn incumbent(&self) -> bool {
        !self.recruit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Teaching {
    pub teacher: usize,
    pub stream: usize,
    pub subject: Subject,
    pub round: u8,
}

/// One sampled pupil-subject-round. Absent pupils were sampled but did not sit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PupilObs {
    pub pupil: usize,
    pub stream: usize,
    pub subject: Subject,
    pub round: u8,
    pub absent: bool,
    pub score: Option<f64>,
    /// Simulated latent learning level (ground truth, not used by estimators).
    pub latent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub teacher: usize,
    pub round: u8,
    pub visit: u8,
    pub presence: f64,
    pub lesson_plan: f64,
    /// Lesson objective, teaching activities, assessment, engagement; each 0..=3.
    pub pedagogy: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Applicant {
    pub id: usize,
    pub market: usize,
    pub ttc_score: f64,
    pub tau: f64,
    pub theta: f64,
    pub hired: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub pupil: usize,
    pub subject: Subject,
    pub round: u8,
    pub item: u16,
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub markets: Vec<Market>,
    pub schools: Vec<School>,
    pub streams: Vec<Stream>,
    pub pupils: Vec<Pupil>,
    pub teachers: Vec<Teacher>,
    pub teaching: Vec<Teaching>,
    pub observations: Vec<PupilObs>,
    pub spotchecks: Vec<SpotCheck>,
    pub applicants: Vec<Applicant>,
    pub responses: Vec<Response>,
}

impl Panel {
    pub fn districts(&self) -> usize {
        self.schools.iter().map(|s| s.district + 1).max().unwrap_or(0)
    }

    pub fn market_of(&self, district: usize, family: SubjectFamily) -> Option<usize> {
        self.markets
            .iter()
            .find(|m| m.district == district && m.family == family)
            .map(|m| m.id)
    }

    /// Advertised arm of a teacher: defined only for recruits.
    pub fn advertised_arm(&self, teacher: &Teacher) -> Option<Arm> {
        teacher.market.map(|m| self.markets[m].arm)
    }

    pub fn experienced_arm(&self, teacher: &Teacher) -> Arm {
        self.schools[teacher.school].arm
    }

    /// Teacher responsible for (stream, subject, round), if any.
    pub fn teacher_lookup(&self) -> HashMap<(usize, Subject, u8), usize> {
        self.teaching
            .iter()
            .map(|t| ((t.stream, t.subject, t.round), t.teacher))
            .collect()
    }

    /// Lagged stream-subject means for endline round `round`: the mean score of
    /// pupils who sat round `round - 1` in the same stream and subject. Streams
    /// with no takers get the mean of their school-grade's stream means, else
    /// 0, and are flagged as imputed.
    pub fn lagged_means(&self, round: u8) -> HashMap<(usize, Subject), (f64, bool)> {
        self.lagged_means_by(round, |o| o.score)
    }

    pub fn lagged_means_by<F: Fn(&PupilObs) -> Option<f64>>(&self, round: u8, value: F) -> HashMap<(usize, Subject), (f64, bool)> {
        let mut sums: BTreeMap<(usize, Subject), (f64, usize)> = BTreeMap::new();
        if round > 0 {
            for o in self.observations.iter().filter(|o| o.round + 1 == round && !o.absent) {
                if let Some(v) = value(o) {
                    let e = sums.entry((o.stream, o.subject)).or_insert((0.0, 0));
                    e.0 += v;
                    e.1 += 1;
                }
            }
        }
        let means: BTreeMap<(usize, Subject), f64> = sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();
        let mut by_school_grade: BTreeMap<(usize, u8, Subject), (f64, usize)> = BTreeMap::new();
        for ((stream, subject), m) in &means {
            let st = &self.streams[*stream];
            let e = by_school_grade.entry((st.school, st.grade, *subject)).or_insert((0.0, 0));
            e.0 += m;
            e.1 += 1;
        }
        let mut out = HashMap::new();
        for st in &self.streams {
            for subject in SUBJECTS {
                let v = match means.get(&(st.id, subject)) {
                    Some(m) => (*m, false),
                    None => match by_school_grade.get(&(st.school, st.grade, subject)) {
                        Some((s, n)) => (s / *n as f64, true),
                        None => (0.0, true),
                    },
                };
                out.insert((st.id, subject), v);
            }
        }
        out
    }
}
