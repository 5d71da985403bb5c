//! Domain vocabulary shared by every other module: emotions, dialogue acts,
//! laughter, turns, phases, and the deterministic feature encoding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of levels on each emotion scale (-3..=+3).
pub const EMOTION_LEVELS: usize = 7;
/// Number of dialogue-act tags.
pub const DA_COUNT: usize = 12;
/// Feature layout: bias(1) | valence one-hot(7) | arousal one-hot(7) | DA one-hot(12).
pub const FEATURE_LEN: usize = 1 + EMOTION_LEVELS + EMOTION_LEVELS + DA_COUNT;

/// An integer valence/arousal pair on the 7-point annotation scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EmotionLabel {
    valence: i8,
    arousal: i8,
}

impl EmotionLabel {
    pub fn new(valence: i8, arousal: i8) -> Result<Self> {
        if !(-3..=3).contains(&valence) {
            return Err(Error::invalid(format!("valence {valence} out of range [-3, 3]")));
        }
        if !(-3..=3).contains(&arousal) {
            return Err(Error::invalid(format!("arousal {arousal} out of range [-3, 3]")));
        }
        Ok(Self { valence, arousal })
    }

    pub fn valence(&self) -> i8 {
        self.valence
    }

    pub fn arousal(&self) -> i8 {
        self.arousal
    }

    /// One-hot index for the valence level (0..7).
    pub fn valence_index(&self) -> usize {
        (self.valence + 3) as usize
    }

    /// One-hot index for the arousal level (0..7).
    pub fn arousal_index(&self) -> usize {
        (self.arousal + 3) as usize
    }

    pub fn from_indices(valence_index: usize, arousal_index: usize) -> Result<Self> {
        if valence_index >= EMOTION_LEVELS || arousal_index >= EMOTION_LEVELS {
            return Err(Error::invalid("emotion index out of range"));
        }
        Ok(Self {
            valence: valence_index as i8 - 3,
            arousal: arousal_index as i8 - 3,
        })
    }

    pub fn all() -> impl Iterator<Item = EmotionLabel> {
        (-3..=3).flat_map(|v| (-3..=3).map(move |a| EmotionLabel { valence: v, arousal: a }))
    }
}

/// Dialogue-act tag set, closed at 12 entries so the feature dimension stays fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DialogueAct {
    #[serde(rename = "statement")]
    Statement,
    #[serde(rename = "wh-question")]
    WhQuestion,
    #[serde(rename = "yes-no-question")]
    YesNoQuestion,
    #[serde(rename = "signal-non-understanding")]
    SignalNonUnderstanding,
    #[serde(rename = "reject")]
    Reject,
    #[serde(rename = "apology")]
    Apology,
    #[serde(rename = "appreciation")]
    Appreciation,
    #[serde(rename = "backchannel")]
    Backchannel,
    #[serde(rename = "conventional-opening")]
    ConventionalOpening,
    #[serde(rename = "conventional-closing")]
    ConventionalClosing,
    #[serde(rename = "praise")]
    Praise,
    #[serde(rename = "other")]
    Other,
}

impl DialogueAct {
    pub const ALL: [DialogueAct; DA_COUNT] = [
        DialogueAct::Statement,
        DialogueAct::WhQuestion,
        DialogueAct::YesNoQuestion,
        DialogueAct::SignalNonUnderstanding,
        DialogueAct::Reject,
        DialogueAct::Apology,
        DialogueAct::Appreciation,
        DialogueAct::Backchannel,
        DialogueAct::ConventionalOpening,
        DialogueAct::ConventionalClosing,
        DialogueAct::Praise,
        DialogueAct::Other,
    ];

    /// Position in the feature one-hot block.
    pub fn index(&self) -> usize {
        Self::ALL.iter().position(|d| d == self).unwrap()
    }

    pub fn name(&self) -> &'static str {
        match self {
            DialogueAct::Statement => "statement",
            DialogueAct::WhQuestion => "wh-question",
            DialogueAct::YesNoQuestion => "yes-no-question",
            DialogueAct::SignalNonUnderstanding => "signal-non-understanding",
            DialogueAct::Reject => "reject",
            DialogueAct::Apology => "apology",
            DialogueAct::Appreciation => "appreciation",
            DialogueAct::Backchannel => "backchannel",
            DialogueAct::ConventionalOpening => "conventional-opening",
            DialogueAct::ConventionalClosing => "conventional-closing",
            DialogueAct::Praise => "praise",
            DialogueAct::Other => "other",
        }
    }

    /// Strict parse: unknown tags are errors.
    pub fn parse(tag: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|d| d.name() == tag)
            .ok_or_else(|| Error::invalid(format!("unknown dialogue act {tag:?}")))
    }

    /// Lenient parse: unknown tags map to `other`.
    pub fn parse_lenient(tag: &str) -> Self {
        Self::parse(tag).unwrap_or(DialogueAct::Other)
    }
}

/// Laughter reciprocation category; `none` means no laughter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaughterType {
    None,
    Social,
    Mirthful,
}

impl LaughterType {
    pub const ALL: [LaughterType; 3] = [LaughterType::None, LaughterType::Social, LaughterType::Mirthful];

    /// Row/column index in count tables (order: none, social, mirthful).
    pub fn index(&self) -> usize {
        match self {
            LaughterType::None => 0,
            LaughterType::Social => 1,
            LaughterType::Mirthful => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LaughterType::None => "none",
            LaughterType::Social => "social",
            LaughterType::Mirthful => "mirthful",
        }
    }

    pub fn parse(tag: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|t| t.name() == tag)
            .ok_or_else(|| Error::invalid(format!("unknown laughter type {tag:?}")))
    }
}

/// Character of an observed user laugh. Distinct from [`LaughterType`]:
/// this classifies the laugh itself, not a reciprocation decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UserLaughKind {
    Social,
    Mirthful,
    Embarrassment,
}

/// Scalar acoustic summary of one laugh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaughterAcoustics {
    /// 1.0 = perfectly flat pitch.
    pub f0_flatness: f64,
    /// Normalized loudness in [0, 1].
    pub power_norm: f64,
    pub duration_s: f64,
    pub jitter_pct: f64,
    pub shimmer_pct: f64,
}

impl LaughterAcoustics {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("f0_flatness", self.f0_flatness),
            ("power_norm", self.power_norm),
            ("duration_s", self.duration_s),
            ("jitter_pct", self.jitter_pct),
            ("shimmer_pct", self.shimmer_pct),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} is not finite")));
            }
        }
        if !(0.0..=1.0).contains(&self.f0_flatness) {
            return Err(Error::invalid("f0_flatness out of [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.power_norm) {
            return Err(Error::invalid("power_norm out of [0, 1]"));
        }
        if self.duration_s <= 0.0 {
            return Err(Error::invalid("duration_s must be > 0"));
        }
        if self.jitter_pct < 0.0 || self.shimmer_pct < 0.0 {
            return Err(Error::invalid("jitter/shimmer must be >= 0"));
        }
        Ok(())
    }
}

/// Dialogue segment with distinct mimicry strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DialoguePhase {
    IceBreaking,
    Spontaneous,
    Ending,
}

impl DialoguePhase {
    pub const ALL: [DialoguePhase; 3] = [
        DialoguePhase::IceBreaking,
        DialoguePhase::Spontaneous,
        DialoguePhase::Ending,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DialoguePhase::IceBreaking => "ice_breaking",
            DialoguePhase::Spontaneous => "spontaneous",
            DialoguePhase::Ending => "ending",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    System,
    User,
}

/// One annotated dialogue turn.
#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub session_id: String,
    pub turn_index: u32,
    pub speaker: Speaker,
    pub phase: DialoguePhase,
    pub emotion: EmotionLabel,
    pub da: DialogueAct,
    pub laughter_type: Option<LaughterType>,
    pub laughter_acoustics: Option<LaughterAcoustics>,
    pub transcript: Option<String>,
}

impl Turn {
    /// True when the turn carries an actual laugh (social or mirthful).
    pub fn laughed(&self) -> bool {
        matches!(self.laughter_type, Some(LaughterType::Social) | Some(LaughterType::Mirthful))
    }
}

/// Fixed-layout input encoding for the emotion predictor.
pub type FeatureVector = [f64; FEATURE_LEN];

/// Deterministic one-hot encoding: bias, valence level, arousal level, DA tag.
pub fn encode_features(emotion: EmotionLabel, da: DialogueAct) -> FeatureVector {
    let mut x = [0.0; FEATURE_LEN];
    x[0] = 1.0;
    x[1 + emotion.valence_index()] = 1.0;
    x[1 + EMOTION_LEVELS + emotion.arousal_index()] = 1.0;
    x[1 + 2 * EMOTION_LEVELS + da.index()] = 1.0;
    x
}

/// Everything wrong with a turn; ok iff empty. Violations are data, not faults.
pub fn validate_turn(turn: &Turn) -> Vec<String> {
    let mut violations = Vec::new();
    // EmotionLabel is range-checked at construction; revalidate anyway so
    // turns deserialized through lenient paths are caught.
    if !(-3..=3).contains(&turn.emotion.valence()) {
        violations.push("valence out of range".to_string());
    }
    if !(-3..=3).contains(&turn.emotion.arousal()) {
        violations.push("arousal out of range".to_string());
    }
    if let Some(ac) = &turn.laughter_acoustics {
        match turn.laughter_type {
            None | Some(LaughterType::None) => {
                violations.push("acoustics without laugh".to_string());
            }
            _ => {}
        }
        if let Err(e) = ac.validate() {
            violations.push(format!("bad acoustics: {e}"));
        }
    }
    violations
}
