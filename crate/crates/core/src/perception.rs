//! Stand-ins for the recognition components: a noisy emotion recognizer and
//! a rule-based laughter detector, both behind pluggable traits so real
//! models can replace them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{EmotionLabel, LaughterAcoustics, LaughterType, UserLaughKind};

/// Source of recognized user emotion (EM values taken as ground truth by the
/// self-correction loop).
pub trait EmotionRecognizer {
    fn recognize(&self, true_emotion: EmotionLabel, rng: &mut dyn rand::RngCore) -> EmotionLabel;
}

/// Classifies an observed laugh from its acoustic summary.
pub trait LaughterDetector {
    fn detect(&self, acoustics: &LaughterAcoustics) -> UserLaughKind;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoisyRecognizerConfig {
    pub error_rate: f64,
    /// Magnitude of per-dimension integer perturbation on error.
    pub max_perturbation: u8,
}

impl Default for NoisyRecognizerConfig {
    fn default() -> Self {
        Self { error_rate: 0.0, max_perturbation: 1 }
    }
}

impl NoisyRecognizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.error_rate) {
            return Err(Error::invalid("error_rate must be in [0, 1]"));
        }
        if self.max_perturbation == 0 {
            return Err(Error::invalid("max_perturbation must be >= 1"));
        }
        Ok(())
    }
}

impl EmotionRecognizer for NoisyRecognizerConfig {
    /// With probability `1 - error_rate` returns the true emotion; otherwise
    /// perturbs each dimension independently by a uniform integer in
    /// [-max_perturbation, +max_perturbation], clamped to the scale.
    fn recognize(&self, true_emotion: EmotionLabel, rng: &mut dyn rand::RngCore) -> EmotionLabel {
        if self.error_rate == 0.0 || rng.gen::<f64>() >= self.error_rate {
            return true_emotion;
        }
        let m = self.max_perturbation as i16;
        let perturb = |value: i8, rng: &mut dyn rand::RngCore| -> i8 {
            let delta = rng.gen_range(-m..=m);
            (value as i16 + delta).clamp(-3, 3) as i8
        };
        let v = perturb(true_emotion.valence(), rng);
        let a = perturb(true_emotion.arousal(), rng);
        EmotionLabel::new(v, a).unwrap()
    }
}

/// Identity recognizer: the provided label IS the ground truth. Used in
/// interactive mode where a human enters their own reaction.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityRecognizer;

impl EmotionRecognizer for IdentityRecognizer {
    fn recognize(&self, true_emotion: EmotionLabel, _rng: &mut dyn rand::RngCore) -> EmotionLabel {
        true_emotion
    }
}

/// Threshold rules mapping laugh acoustics to a laugh kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaughDetectorRules {
    pub flat_pitch_min: f64,
    pub long_duration_min_s: f64,
    pub jitter_shimmer_min_pct: f64,
    pub low_power_max: f64,
}

impl Default for LaughDetectorRules {
    fn default() -> Self {
        Self {
            flat_pitch_min: 0.7,
            long_duration_min_s: 1.0,
            jitter_shimmer_min_pct: 5.0,
            low_power_max: 0.3,
        }
    }
}

impl LaughDetectorRules {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("flat_pitch_min", self.flat_pitch_min),
            ("long_duration_min_s", self.long_duration_min_s),
            ("jitter_shimmer_min_pct", self.jitter_shimmer_min_pct),
            ("low_power_max", self.low_power_max),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite")));
            }
        }
        if !(0.0..=1.0).contains(&self.flat_pitch_min) {
            return Err(Error::invalid("flat_pitch_min must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.low_power_max) {
            return Err(Error::invalid("low_power_max must be in [0, 1]"));
        }
        Ok(())
    }
}

impl LaughterDetector for LaughDetectorRules {
    /// Decision list. The low-power check runs first: mis-reciprocating an
    /// embarrassed laugh is the costliest error, so ambiguous laughs resolve
    /// toward embarrassment.
    fn detect(&self, acoustics: &LaughterAcoustics) -> UserLaughKind {
        if acoustics.power_norm <= self.low_power_max {
            return UserLaughKind::Embarrassment;
        }
        if acoustics.duration_s >= self.long_duration_min_s
            && (acoustics.jitter_pct >= self.jitter_shimmer_min_pct
                || acoustics.shimmer_pct >= self.jitter_shimmer_min_pct)
        {
            return UserLaughKind::Mirthful;
        }
        UserLaughKind::Social
    }
}

/// The reciprocation the system should produce for an observed laugh kind:
/// social and mirthful laughs are mirrored; an embarrassment laugh gets none.
pub fn reciprocation_label(kind: UserLaughKind) -> LaughterType {
    match kind {
        UserLaughKind::Social => LaughterType::Social,
        UserLaughKind::Mirthful => LaughterType::Mirthful,
        UserLaughKind::Embarrassment => LaughterType::None,
    }
}
