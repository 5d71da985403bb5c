//! Per-turn anticipation loop: predict the user's reaction, gate on
//! confidence, and either act on the prediction or fall back to recognition
//! and self-correct. Runs the speech and laughter scenarios side by side.

use serde::{Deserialize, Serialize};

use crate::analysis::prediction_metrics;
use crate::error::{Error, Result};
use crate::laughter::LaughterContagionTable;
use crate::perception::{reciprocation_label, EmotionRecognizer, LaughterDetector};
use crate::predictor::{EmotionPredictorModel, EmotionPrediction};
use crate::types::{LaughterType, Speaker, Turn};
use crate::user::UserBehaviorModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnticipationConfig {
    /// Emotion gate. Fresh models sit at confidence 1/49, below this.
    pub p_thr1: f64,
    /// Laughter gate. A fresh table sits at confidence 1/3, below this.
    pub p_thr2: f64,
    /// Abstract time units charged when the recognition path runs.
    pub latency_recognition: f64,
    pub latency_anticipation: f64,
    /// Also update the predictor from the user's observed emotion on
    /// accepted turns. The literal algorithm updates only on the
    /// recognition path, so this is off by default.
    pub learn_on_accept: bool,
}

impl Default for AnticipationConfig {
    fn default() -> Self {
        Self {
            p_thr1: 0.5,
            p_thr2: 0.6,
            latency_recognition: 1.0,
            latency_anticipation: 0.0,
            learn_on_accept: false,
        }
    }
}

impl AnticipationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_thr1) {
            return Err(Error::invalid("p_thr1 must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.p_thr2) {
            return Err(Error::invalid("p_thr2 must be in [0, 1]"));
        }
        if self.latency_recognition < 0.0 || self.latency_anticipation < 0.0 {
            return Err(Error::invalid("latencies must be >= 0"));
        }
        Ok(())
    }
}

/// Everything observable about one system/user exchange.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnRecord {
    pub system_turn: Turn,
    pub user_turn: Turn,
    pub emotion_prediction: EmotionPrediction,
    pub emotion_accepted: bool,
    /// Present exactly when the recognition path ran.
    pub em_rec: Option<crate::types::EmotionLabel>,
    /// Present exactly when the system turn laughed.
    pub laughter_prediction: Option<([f64; 3], f64)>,
    pub laughter_accepted: Option<bool>,
    pub la_rec: Option<LaughterType>,
    pub latency_charged: f64,
}

impl TurnRecord {
    /// The user's actual reciprocation-style laughter label: the detected
    /// laugh kind mapped through reciprocation, or none for a silent turn.
    pub fn user_laughter_label(&self) -> LaughterType {
        self.la_rec.unwrap_or(LaughterType::None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub turns: usize,
    pub emotion_acceptance_rate: f64,
    pub accepted_emotion_accuracy: Option<f64>,
    pub overall_emotion_accuracy: f64,
    pub emotion_updates: usize,
    pub laughter_acceptance_rate: f64,
    pub accepted_laughter_accuracy: Option<f64>,
    pub laughter_updates: usize,
    pub total_latency: f64,
    /// Accepted-prediction accuracy per consecutive window; `None` for
    /// windows with no accepted turns.
    pub learning_curve: Vec<Option<f64>>,
}

/// Run the speech scenario for one system turn. The user turn comes from
/// the provider in both branches (for logging and metrics), but on the
/// accepted branch the model never sees it.
pub fn run_emotion_turn<F>(
    model: &mut EmotionPredictorModel,
    config: &AnticipationConfig,
    system_turn: &Turn,
    mut user_reaction_provider: F,
    recognizer: &dyn EmotionRecognizer,
    rng: &mut dyn rand::RngCore,
) -> Result<TurnRecord>
where
    F: FnMut(&EmotionPrediction, &mut dyn rand::RngCore) -> Result<Turn>,
{
    if system_turn.speaker != Speaker::System {
        return Err(Error::invalid("run_emotion_turn expects a system turn"));
    }
    let prediction = model.predict(system_turn.emotion, system_turn.da);
    let accepted = prediction.confidence >= config.p_thr1;
    let user_turn = user_reaction_provider(&prediction, rng)?;
    let (em_rec, latency) = if accepted {
        if config.learn_on_accept {
            model.update(system_turn.emotion, system_turn.da, user_turn.emotion);
        }
        (None, config.latency_anticipation)
    } else {
        let rec = recognizer.recognize(user_turn.emotion, rng);
        model.update(system_turn.emotion, system_turn.da, rec);
        (Some(rec), config.latency_recognition)
    };
    Ok(TurnRecord {
        system_turn: system_turn.clone(),
        user_turn,
        emotion_prediction: prediction,
        emotion_accepted: accepted,
        em_rec,
        laughter_prediction: None,
        laughter_accepted: None,
        la_rec: None,
        latency_charged: latency,
    })
}

/// Run the laughter scenario for one system turn that contained laughter.
/// Fills the laughter fields of an existing record.
pub fn run_laughter_turn(
    table: &mut LaughterContagionTable,
    config: &AnticipationConfig,
    record: &mut TurnRecord,
    detector: &dyn LaughterDetector,
) -> Result<()> {
    let system_turn = &record.system_turn;
    if !system_turn.laughed() {
        return Err(Error::invalid("run_laughter_turn expects a system turn with laughter"));
    }
    let la_cur = system_turn.laughter_type.unwrap();
    let (dist, confidence) = table.predict(la_cur);
    let accepted = confidence >= config.p_thr2;
    // LA_rec is the reciprocation the detector recommends: the detected
    // laugh kind mapped through reciprocation, or none when the user
    // didn't laugh.
    let la_rec = match &record.user_turn.laughter_acoustics {
        Some(acoustics) => reciprocation_label(detector.detect(acoustics)),
        None => LaughterType::None,
    };
    record.laughter_prediction = Some((dist, confidence));
    record.laughter_accepted = Some(accepted);
    record.la_rec = Some(la_rec);
    if !accepted {
        table.update(la_cur, la_rec);
    }
    Ok(())
}

/// Prediction models threaded through a session.
#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub emotion: EmotionPredictorModel,
    pub laughter: LaughterContagionTable,
}

impl Default for Models {
    fn default() -> Self {
        Self {
            emotion: EmotionPredictorModel::default(),
            laughter: LaughterContagionTable::default(),
        }
    }
}

/// Iterate the anticipation loop over a plan of system turns, with the
/// simulated user generating reactions. Deterministic given the rng seed.
pub fn run_session(
    models: &mut Models,
    config: &AnticipationConfig,
    session_plan: &[Turn],
    user_model: &UserBehaviorModel,
    recognizer: &dyn EmotionRecognizer,
    detector: &dyn LaughterDetector,
    rng: &mut dyn rand::RngCore,
    metrics_window: usize,
) -> Result<(Vec<TurnRecord>, SessionMetrics)> {
    let mut records = Vec::with_capacity(session_plan.len());
    for system_turn in session_plan {
        let mut record = run_emotion_turn(
            &mut models.emotion,
            config,
            system_turn,
            |_, rng| user_model.react(system_turn, rng),
            recognizer,
            rng,
        )?;
        if system_turn.laughed() {
            run_laughter_turn(&mut models.laughter, config, &mut record, detector)?;
        }
        records.push(record);
    }
    let metrics = prediction_metrics(&records, metrics_window.max(1))?;
    Ok((records, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::{IdentityRecognizer, LaughDetectorRules, NoisyRecognizerConfig};
    use crate::types::{DialogueAct, DialoguePhase, EmotionLabel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn system_turn(i: u32, v: i8, a: i8, da: DialogueAct) -> Turn {
        Turn {
            session_id: "t".into(),
            turn_index: 2 * i,
            speaker: Speaker::System,
            phase: DialoguePhase::Spontaneous,
            emotion: EmotionLabel::new(v, a).unwrap(),
            da,
            laughter_type: None,
            laughter_acoustics: None,
            transcript: None,
        }
    }

    fn plan(n: u32) -> Vec<Turn> {
        (0..n)
            .map(|i| system_turn(i, ((i % 7) as i8) - 3, ((i / 7 % 7) as i8) - 3, DialogueAct::ALL[(i % 12) as usize]))
            .collect()
    }

    fn run_with_threshold(p_thr1: f64, turns: u32) -> (Models, SessionMetrics) {
        let mut models = Models::default();
        let config = AnticipationConfig { p_thr1, ..Default::default() };
        let user = UserBehaviorModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let (_, metrics) = run_session(
            &mut models,
            &config,
            &plan(turns),
            &user,
            &NoisyRecognizerConfig::default(),
            &LaughDetectorRules::default(),
            &mut rng,
            50,
        )
        .unwrap();
        (models, metrics)
    }

    #[test]
    fn gate_always_open_never_updates() {
        let (models, metrics) = run_with_threshold(0.0, 200);
        assert_eq!(metrics.emotion_acceptance_rate, 1.0);
        assert_eq!(metrics.emotion_updates, 0);
        assert_eq!(models.emotion.update_count, 0);
    }

    #[test]
    fn gate_never_open_always_updates() {
        let (models, metrics) = run_with_threshold(1.0, 200);
        assert_eq!(metrics.emotion_acceptance_rate, 0.0);
        assert_eq!(metrics.emotion_updates, 200);
        assert_eq!(models.emotion.update_count, 200);
    }

    #[test]
    fn cold_start_routes_to_recognition() {
        let mut model = EmotionPredictorModel::default();
        let config = AnticipationConfig { p_thr1: 0.05, ..Default::default() };
        let sys = system_turn(0, 0, 0, DialogueAct::Statement);
        let user = UserBehaviorModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut user_rng = ChaCha8Rng::seed_from_u64(2);
        let record = run_emotion_turn(
            &mut model,
            &config,
            &sys,
            |_, _| user.react(&sys, &mut user_rng),
            &IdentityRecognizer,
            &mut rng,
        )
        .unwrap();
        assert!(!record.emotion_accepted);
        assert!(record.em_rec.is_some());
        assert_eq!(model.update_count, 1);
    }

    #[test]
    fn speaker_mismatch_rejected() {
        let mut model = EmotionPredictorModel::default();
        let mut sys = system_turn(0, 0, 0, DialogueAct::Statement);
        sys.speaker = Speaker::User;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = run_emotion_turn(
            &mut model,
            &AnticipationConfig::default(),
            &sys,
            |_, _| unreachable!(),
            &IdentityRecognizer,
            &mut rng,
        );
        assert!(err.is_err());
    }

    fn laughter_record(system_laugh: LaughterType, user_laughs: bool) -> TurnRecord {
        let mut sys = system_turn(0, 0, 0, DialogueAct::Statement);
        sys.laughter_type = Some(system_laugh);
        let mut user = system_turn(0, 0, 0, DialogueAct::Statement);
        user.speaker = Speaker::User;
        user.turn_index = 1;
        if user_laughs {
            user.laughter_type = Some(LaughterType::Social);
            user.laughter_acoustics = Some(crate::types::LaughterAcoustics {
                f0_flatness: 0.85,
                power_norm: 0.5,
                duration_s: 0.4,
                jitter_pct: 1.0,
                shimmer_pct: 1.0,
            });
        }
        TurnRecord {
            system_turn: sys.clone(),
            user_turn: user,
            emotion_prediction: EmotionPredictorModel::default().predict(sys.emotion, sys.da),
            emotion_accepted: false,
            em_rec: None,
            laughter_prediction: None,
            laughter_accepted: None,
            la_rec: None,
            latency_charged: 1.0,
        }
    }

    #[test]
    fn fresh_table_gate_behavior() {
        let detector = LaughDetectorRules::default();
        // 1/3 < 0.5: recognition path, one count update
        let mut table = LaughterContagionTable::default();
        let config = AnticipationConfig { p_thr2: 0.5, ..Default::default() };
        let mut record = laughter_record(LaughterType::Social, true);
        run_laughter_turn(&mut table, &config, &mut record, &detector).unwrap();
        assert_eq!(record.laughter_accepted, Some(false));
        assert_eq!(table.counts[1][1], 1.0);

        // 1/3 >= 0.3: accepted, table unchanged
        let mut table = LaughterContagionTable::default();
        let config = AnticipationConfig { p_thr2: 0.3, ..Default::default() };
        let mut record = laughter_record(LaughterType::Social, true);
        run_laughter_turn(&mut table, &config, &mut record, &detector).unwrap();
        assert_eq!(record.laughter_accepted, Some(true));
        assert_eq!(table.counts, [[0.0; 3]; 3]);
    }

    #[test]
    fn converged_table_passes_high_gate() {
        let detector = LaughDetectorRules::default();
        let mut table = LaughterContagionTable::default();
        for _ in 0..20 {
            table.update(LaughterType::Social, LaughterType::Social);
        }
        let (dist, conf) = table.predict(LaughterType::Social);
        assert!((dist[1] - 21.0 / 23.0).abs() < 1e-12);
        let config = AnticipationConfig { p_thr2: 0.8, ..Default::default() };
        let mut record = laughter_record(LaughterType::Social, true);
        run_laughter_turn(&mut table, &config, &mut record, &detector).unwrap();
        assert!(conf >= 0.8);
        assert_eq!(record.laughter_accepted, Some(true));
    }

    #[test]
    fn laughter_turn_requires_system_laugh() {
        let mut table = LaughterContagionTable::default();
        let mut record = laughter_record(LaughterType::None, false);
        let err = run_laughter_turn(
            &mut table,
            &AnticipationConfig::default(),
            &mut record,
            &LaughDetectorRules::default(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn empty_plan_is_a_noop() {
        let mut models = Models::default();
        let before = models.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (records, metrics) = run_session(
            &mut models,
            &AnticipationConfig::default(),
            &[],
            &UserBehaviorModel::default(),
            &IdentityRecognizer,
            &LaughDetectorRules::default(),
            &mut rng,
            10,
        )
        .unwrap();
        assert!(records.is_empty());
        assert_eq!(metrics.turns, 0);
        assert_eq!(models, before);
    }

    #[test]
    fn same_seed_identical_records() {
        let run = || {
            let mut models = Models::default();
            let mut rng = ChaCha8Rng::seed_from_u64(31337);
            run_session(
                &mut models,
                &AnticipationConfig::default(),
                &plan(100),
                &UserBehaviorModel::default(),
                &NoisyRecognizerConfig { error_rate: 0.1, max_perturbation: 1 },
                &LaughDetectorRules::default(),
                &mut rng,
                25,
            )
            .unwrap()
        };
        let (r1, m1) = run();
        let (r2, m2) = run();
        assert_eq!(r1, r2);
        assert_eq!(m1, m2);
    }

    #[test]
    fn update_count_equals_rejected_turns() {
        for thr in [0.0, 0.1, 0.5, 0.9, 1.0] {
            let (models, metrics) = {
                let mut models = Models::default();
                let config = AnticipationConfig { p_thr1: thr, ..Default::default() };
                let mut rng = ChaCha8Rng::seed_from_u64(4);
                let (_, m) = run_session(
                    &mut models,
                    &config,
                    &plan(150),
                    &UserBehaviorModel::default(),
                    &IdentityRecognizer,
                    &LaughDetectorRules::default(),
                    &mut rng,
                    50,
                )
                .unwrap();
                (models, m)
            };
            assert_eq!(models.emotion.update_count as usize, metrics.emotion_updates);
            let rejected = metrics.turns - (metrics.emotion_acceptance_rate * metrics.turns as f64).round() as usize;
            assert_eq!(metrics.emotion_updates, rejected);
        }
    }

    #[test]
    fn latency_accounting() {
        let config = AnticipationConfig {
            p_thr1: 0.5,
            latency_recognition: 1.0,
            latency_anticipation: 0.25,
            ..Default::default()
        };
        let mut models = Models::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (records, metrics) = run_session(
            &mut models,
            &config,
            &plan(120),
            &UserBehaviorModel::default(),
            &IdentityRecognizer,
            &LaughDetectorRules::default(),
            &mut rng,
            30,
        )
        .unwrap();
        let accepted = records.iter().filter(|r| r.emotion_accepted).count();
        let rejected = records.len() - accepted;
        let expected = accepted as f64 * 0.25 + rejected as f64 * 1.0;
        assert!((metrics.total_latency - expected).abs() < 1e-12);
    }

    #[test]
    fn monotone_gate_on_first_turn() {
        let sys = system_turn(0, 1, 1, DialogueAct::Statement);
        let mut prev_accepted = true;
        for thr in [0.0, 0.01, 0.02, 0.021, 0.5, 1.0] {
            let mut model = EmotionPredictorModel::default();
            let config = AnticipationConfig { p_thr1: thr, ..Default::default() };
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let mut user_rng = ChaCha8Rng::seed_from_u64(8);
            let user = UserBehaviorModel::default();
            let record = run_emotion_turn(
                &mut model,
                &config,
                &sys,
                |_, _| user.react(&sys, &mut user_rng),
                &IdentityRecognizer,
                &mut rng,
            )
            .unwrap();
            // raising the threshold can only flip accepted -> rejected
            assert!(prev_accepted || !record.emotion_accepted);
            prev_accepted = record.emotion_accepted;
        }
    }

    #[test]
    fn rule_driven_user_converges() {
        // deterministic user: emotion depends only on the system DA
        let rule = |da: DialogueAct| match da {
            DialogueAct::Statement => EmotionLabel::new(1, 1).unwrap(),
            DialogueAct::Praise => EmotionLabel::new(2, 0).unwrap(),
            DialogueAct::Apology => EmotionLabel::new(-1, -1).unwrap(),
            _ => EmotionLabel::new(0, 0).unwrap(),
        };
        let das = [DialogueAct::Statement, DialogueAct::Praise, DialogueAct::Apology, DialogueAct::Backchannel];
        let config = AnticipationConfig { p_thr1: 0.6, ..Default::default() };
        let mut model = EmotionPredictorModel::new(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut records = Vec::new();
        for i in 0..500u32 {
            let da = das[(i % 4) as usize];
            let sys = system_turn(i, 0, 0, da);
            let record = run_emotion_turn(
                &mut model,
                &config,
                &sys,
                |_, _| {
                    let mut user = sys.clone();
                    user.speaker = Speaker::User;
                    user.turn_index = sys.turn_index + 1;
                    user.emotion = rule(da);
                    Ok(user)
                },
                &IdentityRecognizer,
                &mut rng,
            )
            .unwrap();
            records.push(record);
        }
        let metrics = prediction_metrics(&records, 100).unwrap();
        let last = metrics.learning_curve.last().unwrap().unwrap();
        assert!(last >= 0.9, "final window accuracy {last}");
        // accepted accuracy non-decreasing after the first acceptance
        let mut prev = 0.0;
        for w in metrics.learning_curve.iter().flatten() {
            assert!(*w >= prev);
            prev = *w;
        }
    }
}
