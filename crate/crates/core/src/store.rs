//! Serialization for dialogue corpora (JSON Lines), run configuration,
//! models, and reports, so real annotated corpora can be ingested in place
//! of the simulator.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::{DaShiftTable, PhasePccReport};
use crate::controller::{AnticipationConfig, SessionMetrics, TurnRecord};
use crate::error::{Error, Result};
use crate::laughter::DEFAULT_PRIOR_ALPHA;
use crate::perception::{LaughDetectorRules, NoisyRecognizerConfig};
use crate::predictor::DEFAULT_LEARNING_RATE;
use crate::types::{
    DialogueAct, DialoguePhase, EmotionLabel, LaughterAcoustics, LaughterType, Speaker, Turn,
};
use crate::user::UserBehaviorModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadMode {
    Strict,
    Lenient,
}

/// One corpus line. Field order here is the on-disk key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusLine {
    pub session_id: String,
    pub turn_index: u32,
    pub speaker: Speaker,
    pub phase: DialoguePhase,
    pub valence: i32,
    pub arousal: i32,
    pub da: String,
    pub laughter_type: Option<LaughterType>,
    pub laughter_acoustics: Option<AcousticsLine>,
    pub transcript: Option<String>,
    pub prediction: Option<PredictionLine>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcousticsLine {
    pub f0_flatness: f64,
    pub power_norm: f64,
    pub duration_s: f64,
    pub jitter_pct: f64,
    pub shimmer_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionLine {
    pub valence_dist: Vec<f64>,
    pub arousal_dist: Vec<f64>,
    pub confidence: f64,
    pub accepted: bool,
}

impl CorpusLine {
    pub fn from_turn(turn: &Turn) -> Self {
        Self {
            session_id: turn.session_id.clone(),
            turn_index: turn.turn_index,
            speaker: turn.speaker,
            phase: turn.phase,
            valence: turn.emotion.valence() as i32,
            arousal: turn.emotion.arousal() as i32,
            da: turn.da.name().to_string(),
            laughter_type: turn.laughter_type,
            laughter_acoustics: turn.laughter_acoustics.map(|a| AcousticsLine {
                f0_flatness: a.f0_flatness,
                power_norm: a.power_norm,
                duration_s: a.duration_s,
                jitter_pct: a.jitter_pct,
                shimmer_pct: a.shimmer_pct,
            }),
            transcript: turn.transcript.clone(),
            prediction: None,
        }
    }

    pub fn into_turn(self, mode: LoadMode) -> Result<Turn> {
        let valence = i8::try_from(self.valence)
            .ok()
            .filter(|v| (-3..=3).contains(v))
            .ok_or_else(|| Error::invalid("valence out of range"))?;
        let arousal = i8::try_from(self.arousal)
            .ok()
            .filter(|a| (-3..=3).contains(a))
            .ok_or_else(|| Error::invalid("arousal out of range"))?;
        let da = match mode {
            LoadMode::Strict => DialogueAct::parse(&self.da)?,
            LoadMode::Lenient => DialogueAct::parse_lenient(&self.da),
        };
        let turn = Turn {
            session_id: self.session_id,
            turn_index: self.turn_index,
            speaker: self.speaker,
            phase: self.phase,
            emotion: EmotionLabel::new(valence, arousal)?,
            da,
            laughter_type: self.laughter_type,
            laughter_acoustics: self.laughter_acoustics.map(|a| LaughterAcoustics {
                f0_flatness: a.f0_flatness,
                power_norm: a.power_norm,
                duration_s: a.duration_s,
                jitter_pct: a.jitter_pct,
                shimmer_pct: a.shimmer_pct,
            }),
            transcript: self.transcript,
        };
        let violations = crate::types::validate_turn(&turn);
        if !violations.is_empty() {
            return Err(Error::invalid(violations.join("; ")));
        }
        Ok(turn)
    }
}

/// Round to at most 9 significant digits so logs stay compact and diff-able.
fn round_sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let magnitude = x.abs().log10().floor() as i32;
    let factor = 10f64.powi(8 - magnitude);
    (x * factor).round() / factor
}

fn round_line(line: &mut CorpusLine) {
    if let Some(a) = &mut line.laughter_acoustics {
        a.f0_flatness = round_sig9(a.f0_flatness);
        a.power_norm = round_sig9(a.power_norm);
        a.duration_s = round_sig9(a.duration_s);
        a.jitter_pct = round_sig9(a.jitter_pct);
        a.shimmer_pct = round_sig9(a.shimmer_pct);
    }
    if let Some(p) = &mut line.prediction {
        for v in p.valence_dist.iter_mut().chain(p.arousal_dist.iter_mut()) {
            *v = round_sig9(*v);
        }
        p.confidence = round_sig9(p.confidence);
    }
}

#[derive(Debug)]
pub struct LoadedCorpus {
    pub turns: Vec<Turn>,
    /// Lines skipped in lenient mode.
    pub skipped: usize,
}

pub fn load_corpus(path: &Path, mode: LoadMode) -> Result<LoadedCorpus> {
    let text = fs::read_to_string(path)?;
    load_corpus_str(&text, mode)
}

pub fn load_corpus_str(text: &str, mode: LoadMode) -> Result<LoadedCorpus> {
    let mut turns = Vec::new();
    let mut skipped = 0usize;
    let mut last_index: BTreeMap<String, u32> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parsed: Result<Turn> = parse_line(raw, mode);
        let turn = match (parsed, mode) {
            (Ok(t), _) => t,
            (Err(e), LoadMode::Strict) => {
                return Err(Error::Corpus { line: lineno, message: e.to_string() });
            }
            (Err(_), LoadMode::Lenient) => {
                skipped += 1;
                continue;
            }
        };
        // turn_index must strictly increase within a session
        if let Some(prev) = last_index.get(&turn.session_id) {
            if turn.turn_index <= *prev {
                match mode {
                    LoadMode::Strict => {
                        return Err(Error::Corpus {
                            line: lineno,
                            message: format!(
                                "turn_index {} does not increase within session {:?}",
                                turn.turn_index, turn.session_id
                            ),
                        });
                    }
                    LoadMode::Lenient => {
                        skipped += 1;
                        continue;
                    }
                }
            }
        }
        last_index.insert(turn.session_id.clone(), turn.turn_index);
        turns.push(turn);
    }
    Ok(LoadedCorpus { turns, skipped })
}

/// Strict raw-line loading, predictions included, for reconstructing
/// controller records from session logs.
pub fn load_corpus_lines(path: &Path) -> Result<Vec<CorpusLine>> {
    let text = fs::read_to_string(path)?;
    let mut lines = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line: CorpusLine = serde_json::from_str(raw).map_err(|e| Error::Corpus {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        lines.push(line);
    }
    Ok(lines)
}

fn parse_line(raw: &str, mode: LoadMode) -> Result<Turn> {
    let line: CorpusLine = match mode {
        LoadMode::Strict => serde_json::from_str(raw)?,
        LoadMode::Lenient => {
            // drop unknown keys, then parse
            let mut value: Value = serde_json::from_str(raw)?;
            if let Value::Object(map) = &mut value {
                const KNOWN: [&str; 11] = [
                    "session_id",
                    "turn_index",
                    "speaker",
                    "phase",
                    "valence",
                    "arousal",
                    "da",
                    "laughter_type",
                    "laughter_acoustics",
                    "transcript",
                    "prediction",
                ];
                map.retain(|k, _| KNOWN.contains(&k.as_str()));
            }
            serde_json::from_value(value)?
        }
    };
    line.into_turn(mode)
}

/// One line per turn, fixed key order, floats at up to 9 significant digits.
/// Byte-stable for identical input.
pub fn save_corpus(turns: &[Turn], path: &Path) -> Result<()> {
    let lines: Vec<CorpusLine> = turns.iter().map(CorpusLine::from_turn).collect();
    write_lines(&lines, path)
}

/// Session log: system and user lines per record, the user line carrying the
/// prediction block.
pub fn save_records(records: &[TurnRecord], path: &Path) -> Result<()> {
    let mut lines = Vec::with_capacity(records.len() * 2);
    for r in records {
        lines.push(CorpusLine::from_turn(&r.system_turn));
        let mut user = CorpusLine::from_turn(&r.user_turn);
        user.prediction = Some(PredictionLine {
            valence_dist: r.emotion_prediction.valence_dist.to_vec(),
            arousal_dist: r.emotion_prediction.arousal_dist.to_vec(),
            confidence: r.emotion_prediction.confidence,
            accepted: r.emotion_accepted,
        });
        lines.push(user);
    }
    write_lines(&lines, path)
}

fn write_lines(lines: &[CorpusLine], path: &Path) -> Result<()> {
    let mut out = String::new();
    for line in lines {
        let mut line = line.clone();
        round_line(&mut line);
        out.push_str(&serde_json::to_string(&line)?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Parameters for generating synthetic system-turn plans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionPlanConfig {
    /// Fraction of turns in the opening ice-breaking phase.
    pub ice_breaking_fraction: f64,
    /// Fraction of turns in the closing phase.
    pub ending_fraction: f64,
    /// Per-turn probability the system laughs.
    pub laugh_probability: f64,
    /// Probability the emotion walk jumps to a uniform level instead of
    /// stepping by at most one.
    pub jump_probability: f64,
    /// When set, every system turn uses exactly this emotion and DA
    /// (stationary plans for convergence and interactive scenarios).
    pub fixed_turn: Option<FixedTurnConfig>,
}

impl Default for SessionPlanConfig {
    fn default() -> Self {
        Self {
            ice_breaking_fraction: 0.1,
            ending_fraction: 0.1,
            laugh_probability: 0.25,
            jump_probability: 0.25,
            fixed_turn: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedTurnConfig {
    pub valence: i8,
    pub arousal: i8,
    pub da: DialogueAct,
}

impl SessionPlanConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("ice_breaking_fraction", self.ice_breaking_fraction),
            ("ending_fraction", self.ending_fraction),
            ("laugh_probability", self.laugh_probability),
            ("jump_probability", self.jump_probability),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must be in [0, 1]")));
            }
        }
        if self.ice_breaking_fraction + self.ending_fraction > 1.0 {
            return Err(Error::invalid("phase fractions must sum to <= 1"));
        }
        if let Some(f) = &self.fixed_turn {
            EmotionLabel::new(f.valence, f.arousal)?;
        }
        Ok(())
    }
}

/// Full run configuration. Every field is optional in the JSON document and
/// defaults as documented on each component; unknown keys are errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub p_thr1: f64,
    pub p_thr2: f64,
    pub latency_recognition: f64,
    pub latency_anticipation: f64,
    pub learn_on_accept: bool,
    pub learning_rate: f64,
    pub prior_alpha: f64,
    pub user: UserBehaviorModel,
    pub recognizer: NoisyRecognizerConfig,
    pub detector: LaughDetectorRules,
    pub session: SessionPlanConfig,
    pub seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let anticipation = AnticipationConfig::default();
        Self {
            p_thr1: anticipation.p_thr1,
            p_thr2: anticipation.p_thr2,
            latency_recognition: anticipation.latency_recognition,
            latency_anticipation: anticipation.latency_anticipation,
            learn_on_accept: anticipation.learn_on_accept,
            learning_rate: DEFAULT_LEARNING_RATE,
            prior_alpha: DEFAULT_PRIOR_ALPHA,
            user: UserBehaviorModel::default(),
            recognizer: NoisyRecognizerConfig::default(),
            detector: LaughDetectorRules::default(),
            session: SessionPlanConfig::default(),
            seed: None,
        }
    }
}

impl RunConfig {
    pub fn anticipation(&self) -> AnticipationConfig {
        AnticipationConfig {
            p_thr1: self.p_thr1,
            p_thr2: self.p_thr2,
            latency_recognition: self.latency_recognition,
            latency_anticipation: self.latency_anticipation,
            learn_on_accept: self.learn_on_accept,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let at = |path: &str, e: Error| Error::Config { path: path.to_string(), message: e.to_string() };
        if !(0.0..=1.0).contains(&self.p_thr1) {
            return Err(at("$.p_thr1", Error::invalid("must be in [0, 1]")));
        }
        if !(0.0..=1.0).contains(&self.p_thr2) {
            return Err(at("$.p_thr2", Error::invalid("must be in [0, 1]")));
        }
        if self.latency_recognition < 0.0 {
            return Err(at("$.latency_recognition", Error::invalid("must be >= 0")));
        }
        if self.latency_anticipation < 0.0 {
            return Err(at("$.latency_anticipation", Error::invalid("must be >= 0")));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(at("$.learning_rate", Error::invalid("must be finite and > 0")));
        }
        if !(self.prior_alpha > 0.0) || !self.prior_alpha.is_finite() {
            return Err(at("$.prior_alpha", Error::invalid("must be finite and > 0")));
        }
        self.user.validate().map_err(|e| at("$.user", e))?;
        self.recognizer.validate().map_err(|e| at("$.recognizer", e))?;
        self.detector.validate().map_err(|e| at("$.detector", e))?;
        self.session.validate().map_err(|e| at("$.session", e))?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config {
            path: format!("$ (line {}, column {})", e.line(), e.column()),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    RunConfig::from_json(&fs::read_to_string(path)?)
}

/// Aggregate run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub pcc: PhasePccReport,
    pub da_shifts: DaShiftTable,
    pub metrics: SessionMetrics,
    pub config_echo: RunConfig,
    pub seed: u64,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_turn(i: u32) -> Turn {
        Turn {
            session_id: "s1".into(),
            turn_index: i,
            speaker: if i % 2 == 0 { Speaker::System } else { Speaker::User },
            phase: DialoguePhase::Spontaneous,
            emotion: EmotionLabel::new(((i % 7) as i8) - 3, 1).unwrap(),
            da: DialogueAct::ALL[(i % 12) as usize],
            laughter_type: None,
            laughter_acoustics: None,
            transcript: Some(format!("turn {i}")),
        }
    }

    #[test]
    fn empty_corpus_loads_empty() {
        let loaded = load_corpus_str("", LoadMode::Strict).unwrap();
        assert!(loaded.turns.is_empty());
        assert_eq!(loaded.skipped, 0);
    }

    #[test]
    fn out_of_range_valence_strict_vs_lenient() {
        let line = r#"{"session_id":"s","turn_index":0,"speaker":"system","phase":"spontaneous","valence":5,"arousal":0,"da":"statement","laughter_type":null,"laughter_acoustics":null,"transcript":null,"prediction":null}"#;
        match load_corpus_str(line, LoadMode::Strict) {
            Err(Error::Corpus { line: 1, message }) => assert!(message.contains("valence"), "{message}"),
            other => panic!("expected corpus error, got {other:?}"),
        }
        let loaded = load_corpus_str(line, LoadMode::Lenient).unwrap();
        assert!(loaded.turns.is_empty());
        assert_eq!(loaded.skipped, 1);
    }

    #[test]
    fn unknown_key_strict_vs_lenient() {
        let line = r#"{"session_id":"s","turn_index":0,"speaker":"system","phase":"spontaneous","valence":0,"arousal":0,"da":"statement","laughter_type":null,"laughter_acoustics":null,"transcript":null,"prediction":null,"extra":1}"#;
        assert!(load_corpus_str(line, LoadMode::Strict).is_err());
        let loaded = load_corpus_str(line, LoadMode::Lenient).unwrap();
        assert_eq!(loaded.turns.len(), 1);
        assert_eq!(loaded.skipped, 0);
    }

    #[test]
    fn non_increasing_turn_index_rejected() {
        let turns = vec![sample_turn(3), sample_turn(2)];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        save_corpus(&turns, &path).unwrap();
        assert!(load_corpus(&path, LoadMode::Strict).is_err());
    }

    #[test]
    fn save_is_byte_stable() {
        let turns: Vec<Turn> = (0..50).map(sample_turn).collect();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.jsonl");
        let p2 = dir.path().join("b.jsonl");
        save_corpus(&turns, &p1).unwrap();
        save_corpus(&turns, &p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn laughter_free_turn_renders_nulls() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        save_corpus(&[sample_turn(0)], &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"laughter_type\":null"));
        assert!(text.contains("\"laughter_acoustics\":null"));
    }

    #[test]
    fn config_empty_object_is_defaults() {
        let config = RunConfig::from_json("{}").unwrap();
        assert_eq!(config, RunConfig::default());
    }

    #[test]
    fn config_range_error_has_path() {
        match RunConfig::from_json(r#"{"p_thr1": 1.5}"#) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "$.p_thr1"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn config_unknown_key_rejected() {
        assert!(RunConfig::from_json(r#"{"p_thrX": 0.5}"#).is_err());
    }

    #[test]
    fn config_round_trip() {
        let config = RunConfig::default();
        let loaded = RunConfig::from_json(&config.to_json()).unwrap();
        assert_eq!(config, loaded);
    }
}
