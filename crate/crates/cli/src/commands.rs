use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use deephash::features::{load_features, FeatureFormat, FeatureMatrix};
use deephash::pipeline::{load_model, save_model};
use deephash::search::{
    ground_truth, load_codes, load_ids, precision_recall_threaded, save_codes, GroundTruthMode, HammingIndex,
};
use deephash::{train as fit, HashCode, Model, TrainingConfig};

use crate::outcome::{CmdResult, Failure};

pub const THREADS_VAR: &str = "HDH_THREADS";

fn features(path: &Path, label_last: bool) -> Result<FeatureMatrix<f64>, Failure> {
    Ok(load_features(path, FeatureFormat::from_path(path), label_last)?)
}

/// Worker cap from the environment, 1 when unset.
fn threads() -> Result<usize, Failure> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(1),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Failure::usage(format!("{THREADS_VAR} must be a positive integer, got `{s}`"))),
        },
    }
}

fn write_error(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::data(format!("{}: {e}", path.display()))
}

pub fn train(config: &Path, features_path: &Path, out: &Path, label_last: bool) -> CmdResult {
    let text = fs::read_to_string(config).map_err(|e| Failure::usage(format!("{}: {e}", config.display())))?;
    let config = TrainingConfig::<f64>::from_kv_text(&text)?;
    let data = features(features_path, label_last)?;
    let (model, history) = fit(&config, &data)?;
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    for h in &history {
        let _ = writeln!(
            w,
            "iteration={} sae_objective={:.10e} rbm_objective={:.10e} sae_repeats={} rbm_repeats={}",
            h.iteration, h.sae_objective, h.rbm_objective, h.sae_repeats, h.rbm_repeats
        );
    }
    save_model(&model, out)?;
    let _ = writeln!(
        w,
        "model={} rows={} dim={} bits={}",
        out.display(),
        data.rows(),
        data.dim(),
        model.code_bits()
    );
    Ok(())
}

pub fn encode(model: &Path, features_path: &Path, out: &Path, label_last: bool) -> CmdResult {
    let model: Model<f64> = load_model(model)?;
    let data = features(features_path, label_last)?;
    let codes = model.encode_all(&data)?;
    save_codes(&codes, out)?;
    println!("codes={} count={} bits={}", out.display(), codes.len(), model.code_bits());
    Ok(())
}

pub fn query(codes: &Path, hex: &str, k: usize, ids: Option<&Path>) -> CmdResult {
    if k == 0 {
        return Err(Failure::usage("--k must be at least 1"));
    }
    let codes = load_codes(codes)?;
    let bits = codes.first().map_or(0, HashCode::len);
    let q = HashCode::from_hex(hex, bits).map_err(|e| Failure::usage(e.to_string()))?;
    let index = match ids {
        Some(p) => HammingIndex::new(codes, load_ids(p)?, None)?,
        None => HammingIndex::from_codes(codes)?,
    };
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    for (rank, n) in index.topk(&q, k)?.iter().enumerate() {
        let _ = writeln!(w, "rank={} id={} distance={}", rank + 1, n.id, n.distance);
    }
    Ok(())
}

pub fn eval_pr(
    codes: &Path,
    features_path: &Path,
    mode: GroundTruthMode,
    gt_n: usize,
    out: &Path,
    label_last: bool,
) -> CmdResult {
    let workers = threads()?;
    let codes = load_codes(codes)?;
    let data = features(features_path, label_last)?;
    if codes.len() != data.rows() {
        return Err(Failure::data(format!(
            "codes file holds {} codes but the features file has {} rows",
            codes.len(),
            data.rows()
        )));
    }
    if mode == GroundTruthMode::Label && data.labels().is_none() {
        return Err(Failure::data(
            "label mode needs labelled features (pass --label-col last with a label column)",
        ));
    }
    if mode == GroundTruthMode::EuclideanTopN && gt_n == 0 {
        return Err(Failure::usage("--gt-n must be at least 1"));
    }
    let rows: Vec<usize> = (0..data.rows()).collect();
    let truth = ground_truth(&data, &rows, mode, gt_n)?;
    let index = HammingIndex::from_codes(codes.clone())?;
    let report = precision_recall_threaded(&index, &codes, &truth, workers)?;

    let f = fs::File::create(out).map_err(write_error(out))?;
    report.write_csv(BufWriter::new(f)).map_err(write_error(out))?;
    let last = report.sweep.last().expect("sweep covers radius 0");
    println!(
        "auc={:.12} queries={} bits={} mode={} precision_at_full_recall={:.12}",
        report.auc(),
        codes.len(),
        index.bits(),
        mode.as_str(),
        last.precision
    );
    Ok(())
}
