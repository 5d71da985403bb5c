//! Statistical toolkit: Pearson correlations, phase-segmented mimicry
//! analysis, DA-conditioned emotion shifts, and prediction metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::controller::{SessionMetrics, TurnRecord};
use crate::error::{Error, Result};
use crate::types::{DialogueAct, DialoguePhase, Turn};

/// Sample Pearson correlation coefficient.
pub fn pearson_pcc(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("sequences must have equal length"));
    }
    if xs.len() < 2 {
        return Err(Error::invalid("need at least 2 pairs"));
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    Ok(cov / (var_x.sqrt() * var_y.sqrt()))
}

/// PCC for one phase; `None` when the sample is degenerate (too few pairs or
/// zero variance) — a reported value, not a fault.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhasePcc {
    pub valence: Option<f64>,
    pub arousal: Option<f64>,
    pub pairs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhasePccReport {
    pub ice_breaking: PhasePcc,
    pub spontaneous: PhasePcc,
    pub ending: PhasePcc,
    pub overall: PhasePcc,
}

impl PhasePccReport {
    pub fn phase(&self, phase: DialoguePhase) -> &PhasePcc {
        match phase {
            DialoguePhase::IceBreaking => &self.ice_breaking,
            DialoguePhase::Spontaneous => &self.spontaneous,
            DialoguePhase::Ending => &self.ending,
        }
    }
}

/// Groups (system, user) pairs by the system turn's phase and reports
/// valence/arousal PCC per phase and overall.
pub fn phase_segmented_pcc(pairs: &[(Turn, Turn)]) -> PhasePccReport {
    let mut report = PhasePccReport::default();
    for phase in DialoguePhase::ALL {
        let subset: Vec<&(Turn, Turn)> = pairs.iter().filter(|(s, _)| s.phase == phase).collect();
        let cell = match phase {
            DialoguePhase::IceBreaking => &mut report.ice_breaking,
            DialoguePhase::Spontaneous => &mut report.spontaneous,
            DialoguePhase::Ending => &mut report.ending,
        };
        *cell = pcc_of(&subset);
    }
    report.overall = pcc_of(&pairs.iter().collect::<Vec<_>>());
    report
}

fn pcc_of(pairs: &[&(Turn, Turn)]) -> PhasePcc {
    let sv: Vec<f64> = pairs.iter().map(|(s, _)| s.emotion.valence() as f64).collect();
    let uv: Vec<f64> = pairs.iter().map(|(_, u)| u.emotion.valence() as f64).collect();
    let sa: Vec<f64> = pairs.iter().map(|(s, _)| s.emotion.arousal() as f64).collect();
    let ua: Vec<f64> = pairs.iter().map(|(_, u)| u.emotion.arousal() as f64).collect();
    PhasePcc {
        valence: pearson_pcc(&sv, &uv).ok(),
        arousal: pearson_pcc(&sa, &ua).ok(),
        pairs: pairs.len(),
    }
}

/// Pair each system turn with the immediately following user turn in the
/// same session.
pub fn pair_adjacent_turns(turns: &[Turn]) -> Vec<(Turn, Turn)> {
    turns
        .windows(2)
        .filter(|w| {
            w[0].speaker == crate::types::Speaker::System
                && w[1].speaker == crate::types::Speaker::User
                && w[0].session_id == w[1].session_id
        })
        .map(|w| (w[0].clone(), w[1].clone()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DaShift {
    pub mean_delta_valence: f64,
    pub mean_delta_arousal: f64,
    pub count: usize,
}

/// Per system-DA mean of (user - system) emotion deltas.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DaShiftTable {
    pub shifts: BTreeMap<DialogueAct, DaShift>,
}

pub fn da_shift_table(pairs: &[(Turn, Turn)]) -> Result<DaShiftTable> {
    if pairs.is_empty() {
        return Err(Error::invalid("da_shift_table requires at least one pair"));
    }
    let mut sums: BTreeMap<DialogueAct, (f64, f64, usize)> = BTreeMap::new();
    for (system, user) in pairs {
        let entry = sums.entry(system.da).or_default();
        entry.0 += (user.emotion.valence() - system.emotion.valence()) as f64;
        entry.1 += (user.emotion.arousal() - system.emotion.arousal()) as f64;
        entry.2 += 1;
    }
    let shifts = sums
        .into_iter()
        .map(|(da, (dv, dan, count))| {
            (
                da,
                DaShift {
                    mean_delta_valence: dv / count as f64,
                    mean_delta_arousal: dan / count as f64,
                    count,
                },
            )
        })
        .collect();
    Ok(DaShiftTable { shifts })
}

impl DaShiftTable {
    /// CSV export, header `da,mean_dv,mean_da,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("da,mean_dv,mean_da,count\n");
        for (da, shift) in &self.shifts {
            out.push_str(&format!(
                "{},{},{},{}\n",
                da.name(),
                shift.mean_delta_valence,
                shift.mean_delta_arousal,
                shift.count
            ));
        }
        out
    }
}

/// Gating/accuracy/latency/learning-curve aggregates for a controller run.
pub fn prediction_metrics(records: &[TurnRecord], window: usize) -> Result<SessionMetrics> {
    if window == 0 {
        return Err(Error::invalid("window must be >= 1"));
    }
    let turns = records.len();
    let mut accepted = 0usize;
    let mut accepted_correct = 0usize;
    let mut overall_correct = 0usize;
    let mut emotion_updates = 0usize;
    let mut laughter_turns = 0usize;
    let mut laughter_accepted = 0usize;
    let mut laughter_accepted_correct = 0usize;
    let mut laughter_updates = 0usize;
    let mut total_latency = 0.0;
    let mut learning_curve = Vec::new();
    let mut window_accepted = 0usize;
    let mut window_correct = 0usize;

    for (i, r) in records.iter().enumerate() {
        let correct = r.emotion_prediction.argmax() == r.user_turn.emotion;
        if correct {
            overall_correct += 1;
        }
        if r.emotion_accepted {
            accepted += 1;
            window_accepted += 1;
            if correct {
                accepted_correct += 1;
                window_correct += 1;
            }
        } else {
            emotion_updates += 1;
        }
        total_latency += r.latency_charged;
        if let (Some((dist, _)), Some(accepted_flag)) = (&r.laughter_prediction, r.laughter_accepted) {
            laughter_turns += 1;
            if accepted_flag {
                laughter_accepted += 1;
                let argmax = dist
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(i, _)| i)
                    .unwrap();
                if argmax == r.user_laughter_label().index() {
                    laughter_accepted_correct += 1;
                }
            } else {
                laughter_updates += 1;
            }
        }
        if (i + 1) % window == 0 || i + 1 == turns {
            learning_curve.push(if window_accepted > 0 {
                Some(window_correct as f64 / window_accepted as f64)
            } else {
                None
            });
            window_accepted = 0;
            window_correct = 0;
        }
    }

    Ok(SessionMetrics {
        turns,
        emotion_acceptance_rate: ratio(accepted, turns),
        accepted_emotion_accuracy: fraction(accepted_correct, accepted),
        overall_emotion_accuracy: ratio(overall_correct, turns),
        emotion_updates,
        laughter_acceptance_rate: ratio(laughter_accepted, laughter_turns),
        accepted_laughter_accuracy: fraction(laughter_accepted_correct, laughter_accepted),
        laughter_updates,
        total_latency,
        learning_curve,
    })
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn fraction(num: usize, den: usize) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}
