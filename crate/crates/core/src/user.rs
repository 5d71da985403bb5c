//! Simulated user: phase-dependent valence mimicry, strong arousal mimicry,
//! DA-conditioned valence shifts, and laughter contagion, so the controller
//! can be evaluated closed-loop without the original corpora.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::pearson_pcc;
use crate::error::{Error, Result};
use crate::types::{
    DialogueAct, DialoguePhase, EmotionLabel, LaughterAcoustics, LaughterType, Speaker, Turn,
    UserLaughKind,
};

/// Valence mimicry strength per dialogue phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseWeights {
    pub ice_breaking: f64,
    pub spontaneous: f64,
    pub ending: f64,
}

impl Default for PhaseWeights {
    fn default() -> Self {
        Self { ice_breaking: 0.05, spontaneous: 0.55, ending: 0.05 }
    }
}

impl PhaseWeights {
    pub fn get(&self, phase: DialoguePhase) -> f64 {
        match phase {
            DialoguePhase::IceBreaking => self.ice_breaking,
            DialoguePhase::Spontaneous => self.spontaneous,
            DialoguePhase::Ending => self.ending,
        }
    }

    fn set(&mut self, phase: DialoguePhase, w: f64) {
        match phase {
            DialoguePhase::IceBreaking => self.ice_breaking = w,
            DialoguePhase::Spontaneous => self.spontaneous = w,
            DialoguePhase::Ending => self.ending = w,
        }
    }
}

/// Effect of the system's dialogue act on the user's mimicked emotion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DaEffect {
    /// Added to the mimicked emotion after noise.
    Delta { valence: i8, arousal: i8 },
    /// Replaces the mimicked emotion before noise (greeting/closing politeness).
    Override { valence: i8, arousal: i8 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UserBehaviorModel {
    pub mimicry_valence: PhaseWeights,
    pub mimicry_arousal: f64,
    pub noise_valence: u8,
    pub noise_arousal: u8,
    pub da_rules: BTreeMap<DialogueAct, DaEffect>,
    /// Row-stochastic P(user laughter | system laughter), rows/cols in
    /// none, social, mirthful order.
    pub laugh_contagion: [[f64; 3]; 3],
    /// Probability an emitted laugh is embarrassment-flavored regardless of
    /// its contagion-sampled annotation.
    pub embarrassment_rate: f64,
    /// Participants rarely show extreme positive valence; cap at +2.
    pub valence_cap: i8,
}

impl Default for UserBehaviorModel {
    fn default() -> Self {
        let mut da_rules = BTreeMap::new();
        da_rules.insert(
            DialogueAct::SignalNonUnderstanding,
            DaEffect::Delta { valence: -2, arousal: 0 },
        );
        da_rules.insert(DialogueAct::Praise, DaEffect::Delta { valence: 1, arousal: 0 });
        da_rules.insert(DialogueAct::Apology, DaEffect::Delta { valence: -1, arousal: 0 });
        da_rules.insert(
            DialogueAct::ConventionalOpening,
            DaEffect::Override { valence: 1, arousal: 1 },
        );
        da_rules.insert(
            DialogueAct::ConventionalClosing,
            DaEffect::Override { valence: 1, arousal: 1 },
        );
        Self {
            mimicry_valence: PhaseWeights::default(),
            mimicry_arousal: 0.8,
            noise_valence: 1,
            noise_arousal: 1,
            da_rules,
            laugh_contagion: [
                [0.85, 0.10, 0.05],
                [0.25, 0.60, 0.15],
                [0.20, 0.25, 0.55],
            ],
            embarrassment_rate: 0.1,
            valence_cap: 2,
        }
    }
}

impl UserBehaviorModel {
    pub fn validate(&self) -> Result<()> {
        let weights = [
            self.mimicry_valence.ice_breaking,
            self.mimicry_valence.spontaneous,
            self.mimicry_valence.ending,
            self.mimicry_arousal,
            self.embarrassment_rate,
        ];
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::invalid("mimicry weights and rates must be in [0, 1]"));
        }
        for row in &self.laugh_contagion {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::invalid("contagion probabilities must be in [0, 1]"));
            }
            if (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::invalid("contagion rows must sum to 1"));
            }
        }
        if !(-3..=3).contains(&self.valence_cap) {
            return Err(Error::invalid("valence_cap must be in [-3, 3]"));
        }
        Ok(())
    }

    /// Generate the user's reaction to a system turn.
    pub fn react(&self, system_turn: &Turn, rng: &mut dyn rand::RngCore) -> Result<Turn> {
        if system_turn.speaker != Speaker::System {
            return Err(Error::invalid("react expects a system turn"));
        }
        let phase = system_turn.phase;
        let rule = self.da_rules.get(&system_turn.da).copied();

        let mut v = self.mimic(
            system_turn.emotion.valence(),
            self.mimicry_valence.get(phase),
            rng,
        );
        let mut a = self.mimic(system_turn.emotion.arousal(), self.mimicry_arousal, rng);
        if let Some(DaEffect::Override { valence, arousal }) = rule {
            v = valence as i16;
            a = arousal as i16;
        }
        v += self.noise(self.noise_valence, rng);
        a += self.noise(self.noise_arousal, rng);
        if let Some(DaEffect::Delta { valence, arousal }) = rule {
            v += valence as i16;
            a += arousal as i16;
        }
        let v = v.clamp(-3, self.valence_cap as i16) as i8;
        let a = a.clamp(-3, 3) as i8;

        let (laughter_type, laughter_acoustics) = self.laugh(system_turn, rng);

        Ok(Turn {
            session_id: system_turn.session_id.clone(),
            turn_index: system_turn.turn_index + 1,
            speaker: Speaker::User,
            phase,
            emotion: EmotionLabel::new(v, a).unwrap(),
            da: reply_da(system_turn.da),
            laughter_type,
            laughter_acoustics,
            transcript: None,
        })
    }

    fn mimic(&self, system_value: i8, weight: f64, rng: &mut dyn rand::RngCore) -> i16 {
        if rng.gen::<f64>() < weight {
            system_value as i16
        } else {
            rng.gen_range(-3..=3)
        }
    }

    fn noise(&self, magnitude: u8, rng: &mut dyn rand::RngCore) -> i16 {
        if magnitude == 0 {
            0
        } else {
            let m = magnitude as i16;
            rng.gen_range(-m..=m)
        }
    }

    fn laugh(
        &self,
        system_turn: &Turn,
        rng: &mut dyn rand::RngCore,
    ) -> (Option<LaughterType>, Option<LaughterAcoustics>) {
        let system_laugh = system_turn.laughter_type.unwrap_or(LaughterType::None);
        let row = &self.laugh_contagion[system_laugh.index()];
        let draw: f64 = rng.gen();
        let sampled = if draw < row[0] {
            LaughterType::None
        } else if draw < row[0] + row[1] {
            LaughterType::Social
        } else {
            LaughterType::Mirthful
        };
        if sampled == LaughterType::None {
            return (None, None);
        }
        let kind = if rng.gen::<f64>() < self.embarrassment_rate {
            UserLaughKind::Embarrassment
        } else {
            match sampled {
                LaughterType::Social => UserLaughKind::Social,
                _ => UserLaughKind::Mirthful,
            }
        };
        (Some(sampled), Some(sample_acoustics(kind, rng)))
    }

    /// Grid-search mimicry weights (step 0.05) against PCC targets, measured
    /// over `trials` simulated pairs per candidate. Returns the fitted model
    /// and the PCC each fitted weight achieved.
    pub fn calibrate(
        &self,
        targets: &CalibrationTargets,
        trials: usize,
        seed: u64,
    ) -> Result<(UserBehaviorModel, CalibrationReport)> {
        targets.validate()?;
        let mut model = self.clone();
        let mut report = CalibrationReport::default();
        let phase_targets = [
            (DialoguePhase::IceBreaking, targets.valence_ice_breaking),
            (DialoguePhase::Spontaneous, targets.valence_spontaneous),
            (DialoguePhase::Ending, targets.valence_ending),
        ];
        for (phase, target) in phase_targets {
            if let Some(t) = target {
                let (w, achieved) = grid_search(&model, Dimension::Valence(phase), t, trials, seed);
                model.mimicry_valence.set(phase, w);
                report.set_valence(phase, achieved);
            }
        }
        if let Some(t) = targets.arousal {
            let (w, achieved) = grid_search(&model, Dimension::Arousal, t, trials, seed);
            model.mimicry_arousal = w;
            report.arousal = Some(achieved);
        }
        Ok((model, report))
    }
}

/// PCC targets for calibration, each in [-1, 1].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationTargets {
    pub valence_ice_breaking: Option<f64>,
    pub valence_spontaneous: Option<f64>,
    pub valence_ending: Option<f64>,
    pub arousal: Option<f64>,
}

impl CalibrationTargets {
    pub fn validate(&self) -> Result<()> {
        for t in [
            self.valence_ice_breaking,
            self.valence_spontaneous,
            self.valence_ending,
            self.arousal,
        ]
        .into_iter()
        .flatten()
        {
            if !(-1.0..=1.0).contains(&t) {
                return Err(Error::invalid("PCC must be in [-1,1]"));
            }
        }
        Ok(())
    }
}

/// Achieved PCC per calibrated weight (best-effort for unreachable targets).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub valence_ice_breaking: Option<f64>,
    pub valence_spontaneous: Option<f64>,
    pub valence_ending: Option<f64>,
    pub arousal: Option<f64>,
}

impl CalibrationReport {
    fn set_valence(&mut self, phase: DialoguePhase, achieved: f64) {
        match phase {
            DialoguePhase::IceBreaking => self.valence_ice_breaking = Some(achieved),
            DialoguePhase::Spontaneous => self.valence_spontaneous = Some(achieved),
            DialoguePhase::Ending => self.valence_ending = Some(achieved),
        }
    }
}

enum Dimension {
    Valence(DialoguePhase),
    Arousal,
}

fn grid_search(
    base: &UserBehaviorModel,
    dim: Dimension,
    target: f64,
    trials: usize,
    seed: u64,
) -> (f64, f64) {
    let mut best = (0.0, f64::INFINITY, 0.0);
    for step in 0..=20u32 {
        let w = step as f64 * 0.05;
        let mut candidate = base.clone();
        let phase = match dim {
            Dimension::Valence(phase) => {
                candidate.mimicry_valence.set(phase, w);
                phase
            }
            Dimension::Arousal => {
                candidate.mimicry_arousal = w;
                DialoguePhase::Spontaneous
            }
        };
        let pcc = measure_pcc(&candidate, matches!(dim, Dimension::Valence(_)), phase, trials, seed);
        let err = (pcc - target).powi(2);
        if err < best.1 {
            best = (w, err, pcc);
        }
    }
    (best.0, best.2)
}

/// Simulate `trials` (system, user) pairs at statement DA with uniformly
/// random system emotion and measure the sample PCC for one dimension.
fn measure_pcc(
    model: &UserBehaviorModel,
    valence: bool,
    phase: DialoguePhase,
    trials: usize,
    seed: u64,
) -> f64 {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(trials);
    let mut ys = Vec::with_capacity(trials);
    for i in 0..trials {
        let v: i8 = rng.gen_range(-3..=3);
        let a: i8 = rng.gen_range(-3..=3);
        let system = Turn {
            session_id: "calibration".into(),
            turn_index: (2 * i) as u32,
            speaker: Speaker::System,
            phase,
            emotion: EmotionLabel::new(v, a).unwrap(),
            da: DialogueAct::Statement,
            laughter_type: None,
            laughter_acoustics: None,
            transcript: None,
        };
        let user = model.react(&system, &mut rng).expect("system turn");
        if valence {
            xs.push(system.emotion.valence() as f64);
            ys.push(user.emotion.valence() as f64);
        } else {
            xs.push(system.emotion.arousal() as f64);
            ys.push(user.emotion.arousal() as f64);
        }
    }
    pearson_pcc(&xs, &ys).unwrap_or(0.0)
}

/// Plausible response DA for a system DA; keeps simulated corpora realistic.
fn reply_da(system_da: DialogueAct) -> DialogueAct {
    match system_da {
        DialogueAct::WhQuestion | DialogueAct::YesNoQuestion => DialogueAct::Statement,
        DialogueAct::SignalNonUnderstanding => DialogueAct::Reject,
        DialogueAct::Apology => DialogueAct::Backchannel,
        DialogueAct::Praise => DialogueAct::Appreciation,
        DialogueAct::ConventionalOpening => DialogueAct::ConventionalOpening,
        DialogueAct::ConventionalClosing => DialogueAct::ConventionalClosing,
        _ => DialogueAct::Statement,
    }
}

/// Acoustics drawn from the laugh kind's prototype region.
pub fn sample_acoustics(kind: UserLaughKind, rng: &mut dyn rand::RngCore) -> LaughterAcoustics {
    match kind {
        UserLaughKind::Social => LaughterAcoustics {
            f0_flatness: rng.gen_range(0.75..0.95),
            power_norm: rng.gen_range(0.4..0.6),
            duration_s: rng.gen_range(0.2..0.8),
            jitter_pct: rng.gen_range(0.0..3.0),
            shimmer_pct: rng.gen_range(0.0..3.0),
        },
        UserLaughKind::Mirthful => LaughterAcoustics {
            f0_flatness: rng.gen_range(0.1..0.5),
            power_norm: rng.gen_range(0.5..0.9),
            duration_s: rng.gen_range(1.2..2.5),
            jitter_pct: rng.gen_range(5.0..12.0),
            shimmer_pct: rng.gen_range(5.0..12.0),
        },
        UserLaughKind::Embarrassment => LaughterAcoustics {
            f0_flatness: rng.gen_range(0.3..0.7),
            power_norm: rng.gen_range(0.05..0.25),
            duration_s: rng.gen_range(0.2..0.8),
            jitter_pct: rng.gen_range(0.0..3.0),
            shimmer_pct: rng.gen_range(0.0..3.0),
        },
    }
}
