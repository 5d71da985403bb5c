//! Next-turn emotion prediction: two independent 7-class softmax regressors
//! over the current system emotion and dialogue act, with online gradient
//! updates for self-correction.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{encode_features, DialogueAct, EmotionLabel, EMOTION_LEVELS, FEATURE_LEN};

pub const DEFAULT_LEARNING_RATE: f64 = 0.1;

/// Per-dimension softmax weight matrices with online-update state.
/// Zero initialization gives uniform predictions, so an untrained model
/// routes every turn through recognition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionPredictorModel {
    pub weights_valence: Vec<Vec<f64>>,
    pub weights_arousal: Vec<Vec<f64>>,
    pub learning_rate: f64,
    pub update_count: u64,
}

/// Predicted next-turn emotion distributions with gate confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionPrediction {
    pub valence_dist: [f64; EMOTION_LEVELS],
    pub arousal_dist: [f64; EMOTION_LEVELS],
    /// Joint probability of the per-dimension argmaxes under independence.
    pub confidence: f64,
}

impl EmotionPrediction {
    /// Most likely joint label.
    pub fn argmax(&self) -> EmotionLabel {
        let v = argmax_index(&self.valence_dist);
        let a = argmax_index(&self.arousal_dist);
        EmotionLabel::from_indices(v, a).unwrap()
    }
}

fn argmax_index(dist: &[f64; EMOTION_LEVELS]) -> usize {
    let mut best = 0;
    for i in 1..EMOTION_LEVELS {
        if dist[i] > dist[best] {
            best = i;
        }
    }
    best
}

fn softmax(logits: &[f64; EMOTION_LEVELS]) -> [f64; EMOTION_LEVELS] {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; EMOTION_LEVELS];
    let mut sum = 0.0;
    for (o, l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    out
}

fn forward(weights: &[Vec<f64>], x: &[f64; FEATURE_LEN]) -> [f64; EMOTION_LEVELS] {
    let mut logits = [0.0; EMOTION_LEVELS];
    for (logit, row) in logits.iter_mut().zip(weights) {
        *logit = row.iter().zip(x.iter()).map(|(w, v)| w * v).sum();
    }
    softmax(&logits)
}

impl EmotionPredictorModel {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            weights_valence: vec![vec![0.0; FEATURE_LEN]; EMOTION_LEVELS],
            weights_arousal: vec![vec![0.0; FEATURE_LEN]; EMOTION_LEVELS],
            learning_rate,
            update_count: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning_rate must be finite and > 0"));
        }
        for w in [&self.weights_valence, &self.weights_arousal] {
            if w.len() != EMOTION_LEVELS || w.iter().any(|row| row.len() != FEATURE_LEN) {
                return Err(Error::invalid("weight matrix must be 7x27"));
            }
            if w.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::invalid("weights must be finite"));
            }
        }
        Ok(())
    }

    /// Per-dimension softmax of weights times the encoded input. Pure.
    pub fn predict(&self, em_cur: EmotionLabel, da_cur: DialogueAct) -> EmotionPrediction {
        let x = encode_features(em_cur, da_cur);
        let valence_dist = forward(&self.weights_valence, &x);
        let arousal_dist = forward(&self.weights_arousal, &x);
        let confidence = valence_dist.iter().cloned().fold(0.0, f64::max)
            * arousal_dist.iter().cloned().fold(0.0, f64::max);
        EmotionPrediction { valence_dist, arousal_dist, confidence }
    }

    /// One SGD step per dimension on cross-entropy loss.
    pub fn update(&mut self, em_cur: EmotionLabel, da_cur: DialogueAct, em_true: EmotionLabel) {
        let x = encode_features(em_cur, da_cur);
        let vd = forward(&self.weights_valence, &x);
        let ad = forward(&self.weights_arousal, &x);
        step(&mut self.weights_valence, &vd, em_true.valence_index(), &x, self.learning_rate);
        step(&mut self.weights_arousal, &ad, em_true.arousal_index(), &x, self.learning_rate);
        self.update_count += 1;
    }

    /// Seeded-shuffle SGD over the pairs for the given number of epochs.
    pub fn train_batch(
        &mut self,
        pairs: &[(EmotionLabel, DialogueAct, EmotionLabel)],
        epochs: u32,
        seed: u64,
    ) -> Result<()> {
        if pairs.is_empty() {
            return Err(Error::invalid("train_batch requires at least one pair"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                let (em, da, label) = pairs[i];
                self.update(em, da, label);
            }
        }
        Ok(())
    }

    /// Summed log-probability of the true labels under the model.
    pub fn log_likelihood(&self, pairs: &[(EmotionLabel, DialogueAct, EmotionLabel)]) -> f64 {
        pairs
            .iter()
            .map(|&(em, da, label)| {
                let p = self.predict(em, da);
                p.valence_dist[label.valence_index()].ln() + p.arousal_dist[label.arousal_index()].ln()
            })
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(s)?;
        model.validate()?;
        Ok(model)
    }
}

impl Default for EmotionPredictorModel {
    fn default() -> Self {
        Self::new(DEFAULT_LEARNING_RATE)
    }
}

fn step(
    weights: &mut [Vec<f64>],
    predicted: &[f64; EMOTION_LEVELS],
    true_class: usize,
    x: &[f64; FEATURE_LEN],
    lr: f64,
) {
    for (k, row) in weights.iter_mut().enumerate() {
        let err = predicted[k] - if k == true_class { 1.0 } else { 0.0 };
        for (w, v) in row.iter_mut().zip(x.iter()) {
            *w -= lr * err * v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn em(v: i8, a: i8) -> EmotionLabel {
        EmotionLabel::new(v, a).unwrap()
    }

    #[test]
    fn zero_weights_predict_uniform() {
        let model = EmotionPredictorModel::default();
        let p = model.predict(em(2, -1), DialogueAct::Praise);
        for d in p.valence_dist.iter().chain(p.arousal_dist.iter()) {
            assert!((d - 1.0 / 7.0).abs() < 1e-12);
        }
        assert!((p.confidence - 1.0 / 49.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_shift_invariance() {
        let mut model = random_model(7);
        let before = model.predict(em(1, 1), DialogueAct::Statement);
        // shift every valence logit by a constant via the bias column
        for row in model.weights_valence.iter_mut() {
            row[0] += 3.5;
        }
        let after = model.predict(em(1, 1), DialogueAct::Statement);
        for (a, b) in before.valence_dist.iter().zip(after.valence_dist.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn distributions_normalized_and_positive() {
        let model = random_model(3);
        for em_cur in EmotionLabel::all() {
            let p = model.predict(em_cur, DialogueAct::Backchannel);
            for dist in [&p.valence_dist, &p.arousal_dist] {
                assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(dist.iter().all(|v| *v > 0.0));
            }
        }
    }

    #[test]
    fn train_batch_learns_deterministic_rule() {
        // rule: (any emotion, statement) -> (v=+1, a=+2)
        let mut pairs = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let v = rng.gen_range(-3..=3);
            let a = rng.gen_range(-3..=3);
            pairs.push((em(v, a), DialogueAct::Statement, em(1, 2)));
        }
        let mut model = EmotionPredictorModel::default();
        model.train_batch(&pairs, 1, 42).unwrap();
        let p = model.predict(em(0, 0), DialogueAct::Statement);
        assert_eq!(p.argmax(), em(1, 2));
    }

    #[test]
    fn repeated_updates_increase_label_probability_monotonically() {
        let mut model = EmotionPredictorModel::new(0.5);
        let (input, da, label) = (em(-2, 1), DialogueAct::Apology, em(3, -3));
        let mut prev = model.predict(input, da).valence_dist[label.valence_index()]
            * model.predict(input, da).arousal_dist[label.arousal_index()];
        for step in 0..5000 {
            model.update(input, da, label);
            let p = model.predict(input, da);
            let joint = p.valence_dist[label.valence_index()] * p.arousal_dist[label.arousal_index()];
            assert!(joint > prev, "non-monotone at step {step}");
            prev = joint;
            if p.valence_dist[label.valence_index()] > 0.99
                && p.arousal_dist[label.arousal_index()] > 0.99
            {
                return;
            }
        }
        panic!("never saturated");
    }

    #[test]
    fn saturated_model_update_is_near_noop() {
        let mut model = EmotionPredictorModel::new(0.5);
        let (input, da) = (em(0, 0), DialogueAct::Statement);
        for _ in 0..2000 {
            model.update(input, da, em(1, 2));
        }
        let p = model.predict(input, da);
        assert_eq!(p.argmax(), em(1, 2));
        let before = model.clone();
        model.update(input, da, em(1, 2));
        let max_delta = before
            .weights_valence
            .iter()
            .flatten()
            .chain(before.weights_arousal.iter().flatten())
            .zip(model.weights_valence.iter().flatten().chain(model.weights_arousal.iter().flatten()))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_delta < 0.5 * 1e-2, "max weight delta {max_delta}");
    }

    #[test]
    fn one_pair_one_epoch_equals_single_update() {
        let pair = (em(2, 0), DialogueAct::Reject, em(-1, 1));
        let mut batched = EmotionPredictorModel::default();
        batched.train_batch(&[pair], 1, 9).unwrap();
        let mut single = EmotionPredictorModel::default();
        single.update(pair.0, pair.1, pair.2);
        assert_eq!(batched.weights_valence, single.weights_valence);
        assert_eq!(batched.weights_arousal, single.weights_arousal);
    }

    #[test]
    fn train_batch_deterministic_for_seed() {
        let pairs: Vec<_> = EmotionLabel::all()
            .map(|e| (e, DialogueAct::Other, em(-e.valence(), e.arousal())))
            .collect();
        let mut a = EmotionPredictorModel::default();
        a.train_batch(&pairs, 3, 77).unwrap();
        let mut b = EmotionPredictorModel::default();
        b.train_batch(&pairs, 3, 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn train_batch_rejects_empty() {
        let mut model = EmotionPredictorModel::default();
        assert!(model.train_batch(&[], 1, 0).is_err());
    }

    #[test]
    fn training_improves_log_likelihood_on_excerpt_pairs() {
        // system turn -> following user turn pairs from a short annotated excerpt
        let pairs = vec![
            (em(1, 1), DialogueAct::WhQuestion, em(1, 2)),
            (em(2, 2), DialogueAct::SignalNonUnderstanding, em(0, 1)),
        ];
        let zero = EmotionPredictorModel::default();
        let before = zero.log_likelihood(&pairs);
        let mut model = EmotionPredictorModel::default();
        model.train_batch(&pairs, 50, 1).unwrap();
        assert!(model.log_likelihood(&pairs) > before);
    }

    #[test]
    fn cross_entropy_non_increasing_under_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let mut model = random_model(rng.gen());
            model.learning_rate = 0.5;
            let input = em(rng.gen_range(-3..=3), rng.gen_range(-3..=3));
            let da = DialogueAct::ALL[rng.gen_range(0..12)];
            let label = em(rng.gen_range(-3..=3), rng.gen_range(-3..=3));
            let mut prev = loss(&model, input, da, label);
            for _ in 0..50 {
                model.update(input, da, label);
                let cur = loss(&model, input, da, label);
                assert!(cur <= prev + 1e-12);
                prev = cur;
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(321);
        for _ in 0..20 {
            let model = random_model(rng.gen());
            let input = em(rng.gen_range(-3..=3), rng.gen_range(-3..=3));
            let da = DialogueAct::ALL[rng.gen_range(0..12)];
            let label = em(rng.gen_range(-3..=3), rng.gen_range(-3..=3));
            let max_rel = max_gradient_error(&model, input, da, label);
            assert!(max_rel < 1e-4, "relative error {max_rel}");
        }
    }

    fn loss(model: &EmotionPredictorModel, input: EmotionLabel, da: DialogueAct, label: EmotionLabel) -> f64 {
        let p = model.predict(input, da);
        -(p.valence_dist[label.valence_index()].ln() + p.arousal_dist[label.arousal_index()].ln())
    }

    /// Largest relative error between the analytic gradient implied by one
    /// `update` step and central finite differences of the loss, over the
    /// feature-active weight entries. Test-only oracle, independent of the
    /// update path it checks.
    pub(crate) fn max_gradient_error(
        model: &EmotionPredictorModel,
        input: EmotionLabel,
        da: DialogueAct,
        label: EmotionLabel,
    ) -> f64 {
        let h = 1e-5;
        let x = encode_features(input, da);
        let mut stepped = model.clone();
        stepped.update(input, da, label);
        let mut max_rel: f64 = 0.0;
        for dim in 0..2 {
            for k in 0..EMOTION_LEVELS {
                for j in 0..FEATURE_LEN {
                    if x[j] == 0.0 {
                        continue;
                    }
                    let analytic = {
                        let (w0, w1) = if dim == 0 {
                            (&model.weights_valence[k][j], &stepped.weights_valence[k][j])
                        } else {
                            (&model.weights_arousal[k][j], &stepped.weights_arousal[k][j])
                        };
                        -(w1 - w0) / model.learning_rate
                    };
                    let numeric = {
                        let mut plus = model.clone();
                        let mut minus = model.clone();
                        {
                            let (wp, wm) = if dim == 0 {
                                (&mut plus.weights_valence, &mut minus.weights_valence)
                            } else {
                                (&mut plus.weights_arousal, &mut minus.weights_arousal)
                            };
                            wp[k][j] += h;
                            wm[k][j] -= h;
                        }
                        (loss(&plus, input, da, label) - loss(&minus, input, da, label)) / (2.0 * h)
                    };
                    let scale = numeric.abs().max(analytic.abs()).max(1e-8);
                    max_rel = max_rel.max((analytic - numeric).abs() / scale);
                }
            }
        }
        max_rel
    }

    fn random_model(seed: u64) -> EmotionPredictorModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = EmotionPredictorModel::default();
        for row in model.weights_valence.iter_mut().chain(model.weights_arousal.iter_mut()) {
            for w in row.iter_mut() {
                *w = rng.gen_range(-1.0..1.0);
            }
        }
        model
    }

    #[test]
    fn json_round_trip() {
        let mut model = random_model(99);
        model.update_count = 17;
        let loaded = EmotionPredictorModel::from_json(&model.to_json()).unwrap();
        assert_eq!(model, loaded);
    }
}
