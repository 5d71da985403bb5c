use std::fs;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use anticipate_core::analysis::{
    da_shift_table, pair_adjacent_turns, phase_segmented_pcc, prediction_metrics,
};
use anticipate_core::controller::{run_session, Models, TurnRecord};
use anticipate_core::plan::generate_plan;
use anticipate_core::predictor::{EmotionPrediction, EmotionPredictorModel};
use anticipate_core::laughter::LaughterContagionTable;
use anticipate_core::store::{
    load_config, load_corpus, load_corpus_lines, save_records, CorpusLine, LoadMode, Report,
    RunConfig,
};
use anticipate_core::types::{DialogueAct, EmotionLabel, Turn, EMOTION_LEVELS};
use anticipate_core::user::CalibrationTargets;

use crate::{log_enabled, CliError, CliResult, CommonArgs};

pub(crate) fn resolve_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    match &common.config {
        Some(path) => Ok(load_config(path)?),
        None => Ok(RunConfig::default()),
    }
}

/// --seed wins, then the config's seed, then entropy (printed so the run can
/// be reproduced).
pub(crate) fn resolve_seed(common: &CommonArgs, config: &RunConfig) -> u64 {
    if let Some(seed) = common.seed {
        return seed;
    }
    if let Some(seed) = config.seed {
        return seed;
    }
    let seed = rand::rngs::OsRng.next_u64();
    println!("seed {seed}");
    seed
}

pub(crate) fn simulate(common: &CommonArgs, sessions: usize, turns: usize, out: &Path) -> CliResult {
    if sessions < 1 {
        return Err(CliError::usage("sessions must be >= 1"));
    }
    if turns < 1 {
        return Err(CliError::usage("turns must be >= 1"));
    }
    let config = resolve_config(common)?;
    let seed = resolve_seed(common, &config);
    fs::create_dir_all(out)?;

    let anticipation = config.anticipation();
    let window = (turns / 5).max(1);
    let mut all_records: Vec<TurnRecord> = Vec::new();
    for s in 0..sessions {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(s as u64));
        let session_id = format!("session_{s:03}");
        let plan = generate_plan(&session_id, turns, &config.session, &mut rng);
        let mut models = Models {
            emotion: EmotionPredictorModel::new(config.learning_rate),
            laughter: LaughterContagionTable::new(config.prior_alpha),
        };
        let (records, _) = run_session(
            &mut models,
            &anticipation,
            &plan,
            &config.user,
            &config.recognizer,
            &config.detector,
            &mut rng,
            window,
        )?;
        save_records(&records, &out.join(format!("{session_id}.jsonl")))?;
        if log_enabled("info") {
            eprintln!("info: finished {session_id} ({} turns)", records.len());
        }
        all_records.extend(records);
    }

    let pairs: Vec<(Turn, Turn)> = all_records
        .iter()
        .map(|r| (r.system_turn.clone(), r.user_turn.clone()))
        .collect();
    let pcc = phase_segmented_pcc(&pairs);
    let da_shifts = da_shift_table(&pairs)?;
    let metrics = prediction_metrics(&all_records, window)?;
    let report = Report { pcc, da_shifts, metrics, config_echo: config, seed };
    fs::write(out.join("report.json"), report.to_json())?;
    fs::write(out.join("da_shifts.csv"), report.da_shifts.to_csv())?;

    if !common.quiet {
        println!(
            "sessions={} turns={} acceptance={:.4} accepted_accuracy={} overall_accuracy={:.4} valence_pcc_spontaneous={} arousal_pcc_overall={}",
            sessions,
            turns,
            report.metrics.emotion_acceptance_rate,
            fmt_opt(report.metrics.accepted_emotion_accuracy),
            report.metrics.overall_emotion_accuracy,
            fmt_opt(report.pcc.spontaneous.valence),
            fmt_opt(report.pcc.overall.arousal),
        );
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "undefined".into())
}

pub(crate) fn train(common: &CommonArgs, corpus: &Path, epochs: u32, out: &Path) -> CliResult {
    if epochs < 1 {
        return Err(CliError::usage("epochs must be >= 1"));
    }
    let config = resolve_config(common)?;
    let seed = resolve_seed(common, &config);
    let loaded = load_corpus(corpus, LoadMode::Strict)?;
    let pairs: Vec<(EmotionLabel, DialogueAct, EmotionLabel)> = pair_adjacent_turns(&loaded.turns)
        .into_iter()
        .map(|(s, u)| (s.emotion, s.da, u.emotion))
        .collect();
    if pairs.is_empty() {
        return Err(CliError::usage("corpus has no adjacent system->user pairs"));
    }
    let mut model = EmotionPredictorModel::new(config.learning_rate);
    model.train_batch(&pairs, epochs, seed)?;
    fs::write(out, model.to_json())?;
    let cross_entropy = -model.log_likelihood(&pairs) / pairs.len() as f64;
    if !common.quiet {
        println!("pairs={} epochs={} final_cross_entropy={:.6}", pairs.len(), epochs, cross_entropy);
    }
    Ok(())
}

pub(crate) fn analyze(common: &CommonArgs, corpus: &Path, out: &Path) -> CliResult {
    let config = resolve_config(common)?;
    let loaded = load_corpus(corpus, LoadMode::Strict)?;
    let pairs = pair_adjacent_turns(&loaded.turns);
    if pairs.is_empty() {
        return Err(CliError::usage("corpus has no adjacent system->user pairs"));
    }
    let pcc = phase_segmented_pcc(&pairs);
    let da_shifts = da_shift_table(&pairs)?;

    // rebuild controller records where the log carries prediction blocks
    let lines = load_corpus_lines(corpus)?;
    let records = reconstruct_records(&lines)?;
    let window = (records.len() / 5).max(1);
    let metrics = prediction_metrics(&records, window)?;

    let report = Report { pcc, da_shifts, metrics, config_echo: config, seed: 0 };
    fs::write(out, report.to_json())?;
    if !common.quiet {
        println!(
            "pairs={} valence_pcc_spontaneous={} arousal_pcc_overall={} prediction_records={}",
            pairs.len(),
            fmt_opt(report.pcc.spontaneous.valence),
            fmt_opt(report.pcc.overall.arousal),
            records.len(),
        );
    }
    Ok(())
}

fn reconstruct_records(lines: &[CorpusLine]) -> Result<Vec<TurnRecord>, CliError> {
    let mut records = Vec::new();
    for pair in lines.windows(2) {
        let prediction = match &pair[1].prediction {
            Some(p) => p,
            None => continue,
        };
        let system = pair[0].clone().into_turn(LoadMode::Strict)?;
        let user = pair[1].clone().into_turn(LoadMode::Strict)?;
        if system.speaker != anticipate_core::types::Speaker::System
            || user.speaker != anticipate_core::types::Speaker::User
            || system.session_id != user.session_id
        {
            continue;
        }
        let to_array = |v: &[f64]| -> Result<[f64; EMOTION_LEVELS], CliError> {
            v.try_into().map_err(|_| CliError::usage("prediction distribution must have 7 entries"))
        };
        records.push(TurnRecord {
            system_turn: system,
            user_turn: user,
            emotion_prediction: EmotionPrediction {
                valence_dist: to_array(&prediction.valence_dist)?,
                arousal_dist: to_array(&prediction.arousal_dist)?,
                confidence: prediction.confidence,
            },
            emotion_accepted: prediction.accepted,
            em_rec: None,
            laughter_prediction: None,
            laughter_accepted: None,
            la_rec: None,
            latency_charged: 0.0,
        });
    }
    Ok(records)
}

pub(crate) fn calibrate(common: &CommonArgs, targets: &str, trials: usize, out: &Path) -> CliResult {
    if trials < 2 {
        return Err(CliError::usage("trials must be >= 2"));
    }
    let config = resolve_config(common)?;
    let seed = resolve_seed(common, &config);
    let text = if targets.trim_start().starts_with('{') {
        targets.to_string()
    } else {
        fs::read_to_string(targets)?
    };
    let targets: CalibrationTargets =
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("bad targets: {e}")))?;
    let (user, achieved) = config.user.calibrate(&targets, trials, seed)?;
    let mut fitted = config;
    fitted.user = user;
    fs::write(out, fitted.to_json())?;
    if !common.quiet {
        let row = |name: &str, target: Option<f64>, got: Option<f64>| {
            if let (Some(t), Some(g)) = (target, got) {
                println!("{name}: target={t:.4} achieved={g:.4} residual={:+.4}", g - t);
            }
        };
        row("valence_ice_breaking", targets.valence_ice_breaking, achieved.valence_ice_breaking);
        row("valence_spontaneous", targets.valence_spontaneous, achieved.valence_spontaneous);
        row("valence_ending", targets.valence_ending, achieved.valence_ending);
        row("arousal", targets.arousal, achieved.arousal);
    }
    Ok(())
}
