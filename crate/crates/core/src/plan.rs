//! Synthetic system-turn plans for closed-loop simulation: a seeded emotion
//! walk with phase structure, weighted dialogue acts, and occasional system
//! laughter.

use rand::Rng;

use crate::store::SessionPlanConfig;
use crate::types::{DialogueAct, DialoguePhase, EmotionLabel, LaughterType, Speaker, Turn};

const DA_WEIGHTS: [(DialogueAct, f64); 9] = [
    (DialogueAct::Statement, 0.40),
    (DialogueAct::WhQuestion, 0.13),
    (DialogueAct::YesNoQuestion, 0.10),
    (DialogueAct::Backchannel, 0.10),
    (DialogueAct::Appreciation, 0.07),
    (DialogueAct::Praise, 0.07),
    (DialogueAct::Apology, 0.05),
    (DialogueAct::SignalNonUnderstanding, 0.05),
    (DialogueAct::Other, 0.03),
];

fn phase_for(index: usize, total: usize, config: &SessionPlanConfig) -> DialoguePhase {
    let ice_end = (total as f64 * config.ice_breaking_fraction).round() as usize;
    let ending_start = total - (total as f64 * config.ending_fraction).round() as usize;
    if index < ice_end {
        DialoguePhase::IceBreaking
    } else if index >= ending_start {
        DialoguePhase::Ending
    } else {
        DialoguePhase::Spontaneous
    }
}

fn weighted_da(rng: &mut dyn rand::RngCore) -> DialogueAct {
    let mut draw: f64 = rng.gen();
    for (da, w) in DA_WEIGHTS {
        if draw < w {
            return da;
        }
        draw -= w;
    }
    DialogueAct::Statement
}

fn walk(level: i8, jump_probability: f64, rng: &mut dyn rand::RngCore) -> i8 {
    if rng.gen::<f64>() < jump_probability {
        rng.gen_range(-3..=3)
    } else {
        (level as i16 + rng.gen_range(-1..=1)).clamp(-3, 3) as i8
    }
}

/// Generate `turns` system turns for one session. System turn indexes are
/// even; the user's reactions take the odd slots.
pub fn generate_plan(
    session_id: &str,
    turns: usize,
    config: &SessionPlanConfig,
    rng: &mut dyn rand::RngCore,
) -> Vec<Turn> {
    let mut plan = Vec::with_capacity(turns);
    let mut valence: i8 = 1;
    let mut arousal: i8 = 1;
    for i in 0..turns {
        let phase = phase_for(i, turns, config);
        let (emotion, da) = if let Some(fixed) = &config.fixed_turn {
            (EmotionLabel::new(fixed.valence, fixed.arousal).unwrap(), fixed.da)
        } else {
            valence = walk(valence, config.jump_probability, rng);
            arousal = walk(arousal, config.jump_probability, rng);
            let da = if phase == DialoguePhase::IceBreaking && i == 0 {
                DialogueAct::ConventionalOpening
            } else if phase == DialoguePhase::Ending && i == turns - 1 {
                DialogueAct::ConventionalClosing
            } else {
                weighted_da(rng)
            };
            (EmotionLabel::new(valence, arousal).unwrap(), da)
        };
        let laughter_type = if rng.gen::<f64>() < config.laugh_probability {
            Some(if rng.gen::<f64>() < 0.6 {
                LaughterType::Social
            } else {
                LaughterType::Mirthful
            })
        } else {
            None
        };
        plan.push(Turn {
            session_id: session_id.to_string(),
            turn_index: (2 * i) as u32,
            speaker: Speaker::System,
            phase,
            emotion,
            da,
            laughter_type,
            laughter_acoustics: None,
            transcript: None,
        });
    }
    plan
}
