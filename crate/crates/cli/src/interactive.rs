//! Interactive mode: the operator plays the user against a live engine.
//!
//! Each turn commits to the prediction (SHA-256 over the reveal JSON plus a
//! nonce) before the reaction is entered, then reveals both so the session
//! transcript is auditable: nobody can claim the prediction was made up
//! after seeing the answer.

use std::io::{self, BufRead, Write as _};
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use anticipate_core::controller::{Models, TurnRecord};
use anticipate_core::plan::generate_plan;
use anticipate_core::predictor::EmotionPredictorModel;
use anticipate_core::laughter::LaughterContagionTable;
use anticipate_core::store::save_records;
use anticipate_core::types::{DialogueAct, EmotionLabel, LaughterType, Speaker, Turn};

use crate::commands::{resolve_config, resolve_seed};
use crate::{CliResult, CommonArgs};

const GRAMMAR: &str = "expected: v=INT a=INT da=TAG [laugh=none|social|mirthful], or :quit | :stats | :save PATH";

/// Everything committed to before the reaction is entered.
#[derive(Serialize)]
struct Reveal {
    valence_dist: [f64; 7],
    arousal_dist: [f64; 7],
    confidence: f64,
    predicted_valence: i8,
    predicted_arousal: i8,
    laughter_dist: Option<[f64; 3]>,
    laughter_confidence: Option<f64>,
}

struct Entry {
    emotion: EmotionLabel,
    da: DialogueAct,
    laugh: LaughterType,
}

enum Input {
    Entry(Entry),
    Quit,
    Stats,
    Save(String),
}

#[derive(Default)]
struct Stats {
    turns: usize,
    accepted: usize,
    correct: usize,
}

impl Stats {
    fn acceptance_rate(&self) -> f64 {
        if self.turns == 0 {
            0.0
        } else {
            self.accepted as f64 / self.turns as f64
        }
    }

    fn print(&self, models: &Models) {
        println!(
            "stats turns={} accepted={} acceptance_rate={:.4} accuracy={:.4} emotion_updates={}",
            self.turns,
            self.accepted,
            self.acceptance_rate(),
            if self.turns == 0 { 0.0 } else { self.correct as f64 / self.turns as f64 },
            models.emotion.update_count,
        );
    }
}

pub(crate) fn run(common: &CommonArgs) -> CliResult {
    let config = resolve_config(common)?;
    let seed = resolve_seed(common, &config);
    let anticipation = config.anticipation();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut models = Models {
        emotion: EmotionPredictorModel::new(config.learning_rate),
        laughter: LaughterContagionTable::new(config.prior_alpha),
    };
    let mut stats = Stats::default();
    let mut records: Vec<TurnRecord> = Vec::new();

    let stdin = io::stdin();
    let mut lines = stdin.lock().lines();
    let mut plan: Vec<Turn> = Vec::new();
    let mut next = 0usize;

    loop {
        if next >= plan.len() {
            plan = generate_plan("interactive", 1000, &config.session, &mut rng);
            next = 0;
        }
        let system_turn = plan[next].clone();
        next += 1;

        println!(
            "turn {} system v={} a={} da={} phase={} laugh={}",
            stats.turns + 1,
            system_turn.emotion.valence(),
            system_turn.emotion.arousal(),
            system_turn.da.name(),
            system_turn.phase.name(),
            system_turn.laughter_type.unwrap_or(LaughterType::None).name(),
        );

        let prediction = models.emotion.predict(system_turn.emotion, system_turn.da);
        let laughter_prediction = system_turn
            .laughed()
            .then(|| models.laughter.predict(system_turn.laughter_type.unwrap()));
        let predicted = prediction.argmax();
        let reveal = Reveal {
            valence_dist: prediction.valence_dist,
            arousal_dist: prediction.arousal_dist,
            confidence: prediction.confidence,
            predicted_valence: predicted.valence(),
            predicted_arousal: predicted.arousal(),
            laughter_dist: laughter_prediction.map(|(d, _)| d),
            laughter_confidence: laughter_prediction.map(|(_, c)| c),
        };
        let reveal_json = serde_json::to_string(&reveal).expect("reveal serializes");
        let mut nonce_bytes = [0u8; 16];
        rng.fill_bytes(&mut nonce_bytes);
        let nonce = hex::encode(nonce_bytes);
        let mut hasher = Sha256::new();
        hasher.update(reveal_json.as_bytes());
        hasher.update(nonce.as_bytes());
        println!("commit {}", hex::encode(hasher.finalize()));

        let entry = loop {
            print!("> ");
            io::stdout().flush()?;
            let line = match lines.next() {
                Some(line) => line?,
                None => return quit(&stats, &models), // EOF behaves like :quit
            };
            match parse_input(&line) {
                Ok(Input::Entry(entry)) => break entry,
                Ok(Input::Quit) => return quit(&stats, &models),
                Ok(Input::Stats) => stats.print(&models),
                Ok(Input::Save(path)) => match save_records(&records, Path::new(&path)) {
                    Ok(()) => println!("saved {} turns to {path}", records.len()),
                    Err(e) => println!("save failed: {e}"),
                },
                Err(message) => {
                    println!("{message}");
                    println!("{GRAMMAR}");
                }
            }
        };

        println!("reveal {reveal_json}");
        println!("nonce {nonce}");

        let accepted = prediction.confidence >= anticipation.p_thr1;
        let correct = predicted == entry.emotion;
        if !accepted || anticipation.learn_on_accept {
            models.emotion.update(system_turn.emotion, system_turn.da, entry.emotion);
        }

        let mut laughter_accepted = None;
        if let Some((_, la_conf)) = laughter_prediction {
            let la_ok = la_conf >= anticipation.p_thr2;
            if !la_ok || anticipation.learn_on_accept {
                models
                    .laughter
                    .update(system_turn.laughter_type.unwrap(), entry.laugh);
            }
            laughter_accepted = Some(la_ok);
        }

        stats.turns += 1;
        if accepted {
            stats.accepted += 1;
        }
        if correct {
            stats.correct += 1;
        }
        println!(
            "predicted v={} a={} accepted={} correct={} acceptance_rate={:.6}",
            predicted.valence(),
            predicted.arousal(),
            accepted,
            correct,
            stats.acceptance_rate(),
        );

        let user_turn = Turn {
            session_id: system_turn.session_id.clone(),
            turn_index: system_turn.turn_index + 1,
            speaker: Speaker::User,
            phase: system_turn.phase,
            emotion: entry.emotion,
            da: entry.da,
            laughter_type: Some(entry.laugh),
            laughter_acoustics: None,
            transcript: None,
        };
        records.push(TurnRecord {
            system_turn,
            user_turn,
            emotion_prediction: prediction,
            emotion_accepted: accepted,
            em_rec: if accepted { None } else { Some(entry.emotion) },
            laughter_prediction,
            laughter_accepted,
            la_rec: laughter_accepted.map(|ok| if ok { LaughterType::None } else { entry.laugh }),
            latency_charged: if accepted {
                anticipation.latency_anticipation
            } else {
                anticipation.latency_recognition
            },
        });
    }
}

fn quit(stats: &Stats, models: &Models) -> CliResult {
    stats.print(models);
    Ok(())
}

fn parse_input(line: &str) -> Result<Input, String> {
    let line = line.trim();
    if line == ":quit" {
        return Ok(Input::Quit);
    }
    if line == ":stats" {
        return Ok(Input::Stats);
    }
    if let Some(path) = line.strip_prefix(":save ") {
        let path = path.trim();
        if path.is_empty() {
            return Err("missing path after :save".into());
        }
        return Ok(Input::Save(path.into()));
    }
    if line.is_empty() || line.starts_with(':') {
        return Err(format!("unrecognized input {line:?}"));
    }

    let mut valence: Option<i8> = None;
    let mut arousal: Option<i8> = None;
    let mut da: Option<DialogueAct> = None;
    let mut laugh = LaughterType::None;
    for token in line.split_whitespace() {
        let (key, value) = token.split_once('=').ok_or_else(|| format!("malformed token {token:?}"))?;
        match key {
            "v" => valence = Some(parse_level(value, "valence")?),
            "a" => arousal = Some(parse_level(value, "arousal")?),
            "da" => da = Some(DialogueAct::parse(value).map_err(|e| e.to_string())?),
            "laugh" => laugh = LaughterType::parse(value).map_err(|e| e.to_string())?,
            _ => return Err(format!("unknown key {key:?}")),
        }
    }
    let (v, a, da) = match (valence, arousal, da) {
        (Some(v), Some(a), Some(da)) => (v, a, da),
        _ => return Err("v=, a= and da= are all required".into()),
    };
    let emotion = EmotionLabel::new(v, a).map_err(|e| e.to_string())?;
    Ok(Input::Entry(Entry { emotion, da, laugh }))
}

fn parse_level(value: &str, name: &str) -> Result<i8, String> {
    let n: i8 = value.parse().map_err(|_| format!("{name} must be in [-3, 3]"))?;
    if !(-3..=3).contains(&n) {
        return Err(format!("{name} must be in [-3, 3]"));
    }
    Ok(n)
}
