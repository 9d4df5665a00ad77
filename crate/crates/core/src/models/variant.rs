use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::join_keys;
use crate::error::{MctnError, Result};

/// The nine translator topologies, `a` through `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantId {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
    I,
}

impl VariantId {
    pub const ALL: [VariantId; 9] = [
        VariantId::A,
        VariantId::B,
        VariantId::C,
        VariantId::D,
        VariantId::E,
        VariantId::F,
        VariantId::G,
        VariantId::H,
        VariantId::I,
    ];

    pub fn letter(self) -> char {
        (b'a' + self as u8) as char
    }

    pub fn is_trimodal(self) -> bool {
        self >= VariantId::E
    }

    pub fn description(self) -> &'static str {
        match self {
            VariantId::A => "bimodal with cyclic translation",
            VariantId::B => "bimodal translation without cycle",
            VariantId::C => "bimodal, shared model translating both directions independently",
            VariantId::D => "double bimodal, two translators with concatenated embeddings",
            VariantId::E => "hierarchical trimodal with level-1 cycle",
            VariantId::F => "hierarchical trimodal without cycle",
            VariantId::G => "double trimodal, variant d feeding a level-2 translator",
            VariantId::H => "concatenated modality pair as a single translator",
            VariantId::I => "paired trimodal, one encoder and two decoders",
        }
    }
}

impl fmt::Display for VariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for VariantId {
    type Err = MctnError;

    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.trim().chars();
        match (chars.next().map(|c| c.to_ascii_lowercase()), chars.next()) {
            (Some(c @ 'a'..='i'), None) => Ok(VariantId::ALL[(c as u8 - b'a') as usize]),
            _ => Err(MctnError::Variant(format!("unknown variant id '{s}' (expected a-i)"))),
        }
    }
}

/// Input/output layout of the concatenation variant `h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcatForm {
    /// `[S, T1] -> T2`
    PairToTarget,
    /// `S -> [T1, T2]`
    SourceToPair,
    /// `[S, T1] -> [S, T2]`
    PairToPair,
}

impl ConcatForm {
    pub const ALL: [ConcatForm; 3] = [ConcatForm::PairToTarget, ConcatForm::SourceToPair, ConcatForm::PairToPair];
}

impl FromStr for ConcatForm {
    type Err = MctnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pair_to_target" => Ok(ConcatForm::PairToTarget),
            "source_to_pair" => Ok(ConcatForm::SourceToPair),
            "pair_to_pair" => Ok(ConcatForm::PairToPair),
            _ => Err(MctnError::Variant(format!(
                "unknown concat form '{s}' (expected pair_to_target, source_to_pair or pair_to_pair)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roles {
    pub source: String,
    pub target1: String,
    #[serde(default)]
    pub target2: Option<String>,
}

impl Roles {
    pub fn bimodal(source: &str, target: &str) -> Self {
        Roles { source: source.into(), target1: target.into(), target2: None }
    }

    pub fn trimodal(source: &str, target1: &str, target2: &str) -> Self {
        Roles { source: source.into(), target1: target1.into(), target2: Some(target2.into()) }
    }

    pub fn target2(&self) -> Result<&str> {
        self.target2.as_deref().ok_or_else(|| MctnError::Variant("trimodal variant needs a second target".into()))
    }

    pub fn names(&self) -> Vec<&str> {
        let mut v = vec![self.source.as_str(), self.target1.as_str()];
        v.extend(self.target2.as_deref());
        v
    }
}

/// One-letter table symbol for a modality name.
pub fn modality_symbol(name: &str) -> String {
    match name {
        "language" | "text" => "T".into(),
        "visual" | "vision" => "V".into(),
        "acoustic" | "audio" => "A".into(),
        other => other.chars().next().map(|c| c.to_uppercase().collect()).unwrap_or_default(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub id: VariantId,
    pub roles: Roles,
    pub cyclic: bool,
    pub shared_model: bool,
    pub concat_input: bool,
    pub paired_decoders: bool,
    #[serde(default)]
    pub concat_form: Option<ConcatForm>,
}

fn flags(id: VariantId) -> (bool, bool, bool, bool) {
    use VariantId::*;
    // (cyclic, shared_model, concat_input, paired_decoders)
    match id {
        A | E => (true, true, false, false),
        B | C | F => (false, true, false, false),
        D | G => (false, false, false, false),
        H => (false, true, true, false),
        I => (false, true, false, true),
    }
}

impl VariantSpec {
    pub fn new(id: VariantId, roles: Roles) -> Result<Self> {
        let (cyclic, shared_model, concat_input, paired_decoders) = flags(id);
        let concat_form = (id == VariantId::H).then_some(ConcatForm::PairToTarget);
        let spec = VariantSpec { id, roles, cyclic, shared_model, concat_input, paired_decoders, concat_form };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_concat_form(mut self, form: ConcatForm) -> Result<Self> {
        if self.id != VariantId::H {
            return Err(MctnError::Variant(format!("concat form given for variant {}", self.id)));
        }
        self.concat_form = Some(form);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let expected = flags(self.id);
        let actual = (self.cyclic, self.shared_model, self.concat_input, self.paired_decoders);
        if expected != actual {
            return Err(MctnError::Variant(format!(
                "variant {} requires cyclic={}, shared_model={}, concat_input={}, paired_decoders={}",
                self.id, expected.0, expected.1, expected.2, expected.3
            )));
        }
        if (self.id == VariantId::H) != self.concat_form.is_some() {
            return Err(MctnError::Variant("a concat form is required for variant h and only for it".into()));
        }
        let names = self.roles.names();
        if names.iter().any(|n| n.is_empty() || n.contains(crate::data::CONCAT_SEP)) {
            return Err(MctnError::Variant(format!("invalid modality roles {names:?}")));
        }
        for (i, a) in names.iter().enumerate() {
            if names[i + 1..].contains(a) {
                return Err(MctnError::Variant(format!("modality '{a}' appears in two roles")));
            }
        }
        match (self.id.is_trimodal(), self.roles.target2.is_some()) {
            (true, false) => Err(MctnError::Variant(format!("variant {} needs a second target modality", self.id))),
            (false, true) => Err(MctnError::Variant(format!("variant {} is bimodal but a second target was given", self.id))),
            _ => Ok(()),
        }
    }

    pub fn is_trimodal(&self) -> bool {
        self.id.is_trimodal()
    }

    /// Source and target feature keys of the concatenation variant.
    pub fn concat_keys(&self) -> Result<(String, String)> {
        let (s, t1) = (self.roles.source.as_str(), self.roles.target1.as_str());
        let t2 = self.roles.target2()?;
        match self.concat_form.ok_or_else(|| MctnError::Variant("no concat form".into()))? {
            ConcatForm::PairToTarget => Ok((join_keys(&[s, t1]), t2.to_string())),
            ConcatForm::SourceToPair => Ok((s.to_string(), join_keys(&[t1, t2]))),
            ConcatForm::PairToPair => Ok((join_keys(&[s, t1]), join_keys(&[s, t2]))),
        }
    }

    /// Row label in the ablation tables, e.g. `T⇄V` or `(T⇄V)→A`.
    pub fn direction_label(&self) -> String {
        let s = modality_symbol(&self.roles.source);
        let t1 = modality_symbol(&self.roles.target1);
        let t2 = self.roles.target2.as_deref().map(modality_symbol).unwrap_or_default();
        match self.id {
            VariantId::A => format!("{s}⇄{t1}"),
            VariantId::B => format!("{s}→{t1}"),
            VariantId::C => format!("{s}→{t1}, {t1}→{s}"),
            VariantId::D => format!("[{s}→{t1}, {t1}→{s}]"),
            VariantId::E => format!("({s}⇄{t1})→{t2}"),
            VariantId::F => format!("({s}→{t1})→{t2}"),
            VariantId::G => format!("[{s}→{t1}, {t1}→{s}]→{t2}"),
            VariantId::H => match self.concat_form.unwrap_or(ConcatForm::PairToTarget) {
                ConcatForm::PairToTarget => format!("[{s}, {t1}]→{t2}"),
                ConcatForm::SourceToPair => format!("{s}→[{t1}, {t2}]"),
                ConcatForm::PairToPair => format!("[{s}, {t1}]→[{s}, {t2}]"),
            },
            VariantId::I => format!("[{s}→{t1}, {s}→{t2}]"),
        }
    }
}
