use crate::error::{Error, Result};

/// Part-of-speech tag from the %mor tier. The closed core set used by the
/// analyses is {v, n, pro, adv, det, aux, prep, co, part, presp, adj};
/// anything else lowercase and whitespace-free is carried through as-is.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PosTag(String);

pub const CORE_POS_TAGS: &[&str] = &[
    "v", "n", "pro", "adv", "det", "aux", "prep", "co", "part", "presp", "adj",
];

impl PosTag {
    pub fn new(tag: &str) -> Result<Self> {
        if tag.is_empty() {
            return Err(Error::Format("empty POS tag".into()));
        }
        if tag.chars().any(|c| c.is_whitespace() || c.is_uppercase()) {
            return Err(Error::Format(format!("POS tag must be lowercase, no whitespace: `{tag}`")));
        }
        Ok(PosTag(tag.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_core(&self) -> bool {
        CORE_POS_TAGS.contains(&self.0.as_str())
    }
}

impl std::fmt::Display for PosTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    /// Class index 0.
    Control,
    /// Class index 1.
    Ad,
}

impl Label {
    pub fn class_index(self) -> usize {
        match self {
            Label::Control => 0,
            Label::Ad => 1,
        }
    }

    pub fn from_class_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Label::Control),
            1 => Ok(Label::Ad),
            _ => Err(Error::Bounds(format!("class index {i} out of range"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Control => "Control",
            Label::Ad => "AD",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "AD" => Ok(Label::Ad),
            "Control" => Ok(Label::Control),
            _ => Err(Error::Format(format!("unknown diagnosis `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "male" => Ok(Gender::Male),
            "female" => Ok(Gender::Female),
            "unknown" => Ok(Gender::Unknown),
            _ => Err(Error::Format(format!("unknown gender `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Cookie,
    Recall,
    Other,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Cookie => "Cookie",
            Task::Recall => "Recall",
            Task::Other => "Other",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "Cookie" => Ok(Task::Cookie),
            "Recall" => Ok(Task::Recall),
            "Other" => Ok(Task::Other),
            _ => Err(Error::Format(format!("unknown task `{s}`"))),
        }
    }
}

/// One patient speech segment, the unit of classification.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub transcript_id: String,
    pub index: usize,
    pub words: Vec<String>,
    /// Aligned POS tags; absent when the %mor tier was missing or misaligned.
    pub pos: Option<Vec<PosTag>>,
    pub label: Label,
    pub task: Task,
    pub gender: Gender,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub id: String,
    pub diagnosis: Label,
    pub gender: Gender,
    pub task: Task,
    pub utterances: Vec<Utterance>,
}
