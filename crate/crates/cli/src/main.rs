//! Command-line front end: feature extraction, training, calibration,
//! inference, evaluation and model-size tooling.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acoustic_grnn::audio_io::{load_wav, write_wav_pcm16};
use acoustic_grnn::eval::{evaluate_features, infer_clip_with, Evaluation};
use acoustic_grnn::features::{clip_features, FeatureRecord, FeatureSet, Preprocess};
use acoustic_grnn::model_store::{decode, quantize_int8, save_quantized, SizeReport, StoredModel};
use acoustic_grnn::synth::{generate, SynthConfig, CLASS_NAMES};
use acoustic_grnn::train::{calibrate_thresholds, train_model, CalibrationClip, ClassThresholds, TrainConfig};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(name = "acoustic-grnn", version, about = "Tiny FastGRNN acoustic event classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract MFCC features for every clip listed in a labels CSV.
    Extract {
        /// Directory holding the WAV files.
        #[arg(long = "in")]
        input: PathBuf,
        /// CSV with `filename,label` columns (header row required).
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Spectral-gate each clip before feature extraction.
        #[arg(long)]
        denoise: bool,
        /// Noise-only recording used as the gate's noise floor; implies --denoise.
        #[arg(long)]
        noise_profile: Option<PathBuf>,
        /// Skip clips that are shorter than 3 s or in an unsupported
        /// encoding instead of failing.
        #[arg(long)]
        skip_unusable: bool,
    },
    /// Train a model on a feature file.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lr: Option<f64>,
    },
    /// Set per-class detection thresholds from labeled clips.
    Calibrate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify one WAV clip; prints a JSON document.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        denoise: bool,
        /// Also report every class whose aggregate meets its threshold.
        #[arg(long)]
        multitone: bool,
    },
    /// Clip-level confusion matrix and metrics.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Print only the JSON document.
        #[arg(long)]
        json: bool,
    },
    /// Write an int8 copy of a model.
    Quantize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-tensor byte report of a model file.
    Size {
        #[arg(long)]
        model: PathBuf,
    },
    /// Write the synthetic six-class corpus as WAV files plus labels.csv.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        clips_per_class: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for malformed input files, 3 for everything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<acoustic_grnn::Error>() {
            return if err.is_format_error() { 2 } else { 3 };
        }
        if cause.is::<csv::Error>() || cause.is::<serde_json::Error>() {
            return 2;
        }
    }
    3
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Extract {
            input,
            labels,
            out,
            denoise,
            noise_profile,
            skip_unusable,
        } => extract(&input, &labels, &out, denoise, noise_profile.as_deref(), skip_unusable),
        Command::Train {
            features,
            out,
            epochs,
            seed,
            lr,
        } => train(&features, &out, epochs, seed, lr),
        Command::Calibrate { model, features, out } => calibrate(&model, &features, &out),
        Command::Infer {
            model,
            wav,
            denoise,
            multitone,
        } => infer(&model, &wav, denoise, multitone),
        Command::Eval { model, features, json } => eval(&model, &features, json),
        Command::Quantize { model, out } => quantize(&model, &out),
        Command::Size { model } => size(&model),
        Command::Synth {
            out,
            clips_per_class,
            seed,
        } => synth(&out, clips_per_class, seed),
    }
}

fn read_model(path: &Path) -> Result<StoredModel> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode(&bytes).with_context(|| format!("decoding {}", path.display()))
}

fn read_features(path: &Path) -> Result<FeatureSet> {
    FeatureSet::load(path).with_context(|| format!("loading {}", path.display()))
}

fn extract(
    dir: &Path,
    labels: &Path,
    out: &Path,
    denoise: bool,
    profile: Option<&Path>,
    skip_unusable: bool,
) -> Result<()> {
    let mut reader = csv::Reader::from_path(labels).with_context(|| format!("reading {}", labels.display()))?;
    let mut rows = Vec::new();
    for row in reader.records() {
        let row = row?;
        if row.len() < 2 {
            return Err(acoustic_grnn::Error::BadFeatureFile(format!("labels row {row:?} needs filename,label")).into());
        }
        rows.push((row[0].trim().to_owned(), row[1].trim().to_owned()));
    }
    let pre = Preprocess {
        denoise: denoise || profile.is_some(),
        noise_profile: profile
            .map(|p| load_wav(p).with_context(|| format!("loading {}", p.display())))
            .transpose()?,
    };

    let mut set = FeatureSet::new(Vec::new());
    let mut skipped = 0usize;
    for (file, label) in &rows {
        let path = dir.join(file);
        let segments = match load_wav(&path).and_then(|clip| clip_features(&clip, &pre)) {
            Err(e @ (acoustic_grnn::Error::TooShort { .. } | acoustic_grnn::Error::UnsupportedEncoding(_)))
                if skip_unusable =>
            {
                eprintln!("skipping {}: {e}", path.display());
                skipped += 1;
                continue;
            }
            other => other.with_context(|| format!("extracting {}", path.display()))?,
        };
        let label = match set.label_index(label) {
            Some(i) => i,
            None => {
                set.labels.push(label.clone());
                set.labels.len() - 1
            }
        };
        for (segment, mfcc) in segments.into_iter().enumerate() {
            set.records.push(FeatureRecord {
                clip: file.clone(),
                segment,
                label,
                mfcc,
            });
        }
    }
    set.save(out)?;
    println!(
        "{} clips ({skipped} skipped), {} segments, {} labels -> {}",
        rows.len() - skipped,
        set.records.len(),
        set.labels.len(),
        out.display()
    );
    Ok(())
}

fn train(features: &Path, out: &Path, epochs: Option<usize>, seed: Option<u64>, lr: Option<f64>) -> Result<()> {
    let set = read_features(features)?;
    let mut config = TrainConfig::default();
    if let Some(e) = epochs {
        config.max_epochs = e;
    }
    if let Some(s) = seed {
        config.rng_seed = s;
    }
    if let Some(r) = lr {
        config.learning_rate = r;
    }
    let outcome = train_model(&config, &set)?;
    for e in &outcome.history {
        eprintln!(
            "epoch {:>3}  train {:.4}  val {:.4}  acc {:.2}%",
            e.epoch,
            e.train_loss,
            e.val_loss,
            100.0 * e.val_accuracy
        );
    }
    std::fs::write(out, outcome.bundle.to_bytes()).with_context(|| format!("writing {}", out.display()))?;
    let best = outcome.best();
    println!(
        "best epoch {} of {}: validation loss {:.4}, accuracy {:.2}% -> {}",
        outcome.best_epoch,
        outcome.history.len(),
        best.val_loss,
        100.0 * best.val_accuracy,
        out.display()
    );
    Ok(())
}

fn calibrate(model_path: &Path, features: &Path, out: &Path) -> Result<()> {
    let stored = read_model(model_path)?;
    let bundle = stored.clone().into_bundle()?;
    let set = read_features(features)?;
    let clips = set
        .clips()
        .into_iter()
        .map(|g| {
            let name = &set.labels[g.label];
            let class = bundle
                .labels
                .iter()
                .position(|l| l == name)
                .ok_or_else(|| acoustic_grnn::Error::BadFeatureFile(format!("label {name:?} unknown to the model")))?;
            Ok(CalibrationClip {
                segments: g.segments.into_iter().cloned().collect(),
                classes: BTreeSet::from([class]),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tau = calibrate_thresholds(&bundle, &clips)?;
    let bytes = match stored {
        StoredModel::Float(b) => b.with_thresholds(tau.clone())?.to_bytes(),
        StoredModel::Quantized(mut q) => {
            // Same f32 rounding as float bundles.
            q.thresholds = ClassThresholds::new(tau.as_slice().iter().map(|&t| t as f32 as f64).collect())?;
            q.to_bytes()
        }
    };
    std::fs::write(out, bytes).with_context(|| format!("writing {}", out.display()))?;
    for (label, t) in bundle.labels.iter().zip(tau.as_slice()) {
        println!("{label:<20} {t:.4}");
    }
    Ok(())
}

fn infer(model_path: &Path, wav: &Path, denoise: bool, multitone: bool) -> Result<()> {
    let bundle = read_model(model_path)?.into_bundle()?;
    let clip = load_wav(wav).with_context(|| format!("loading {}", wav.display()))?;
    let pre = if denoise { Preprocess::denoised() } else { Preprocess::default() };
    let pred = infer_clip_with(&bundle, &clip, &pre)?;
    let mut doc = json!({
        "wav": wav.display().to_string(),
        "labels": bundle.labels,
        "per_segment": pred.per_segment.iter().map(|p| p.as_slice().to_vec()).collect::<Vec<_>>(),
        "aggregate": pred.aggregate.as_slice(),
        "predicted_class": pred.predicted_class,
        "predicted_label": bundle.labels[pred.predicted_class],
    });
    if multitone {
        doc["present_classes"] = json!(pred
            .present_classes
            .iter()
            .map(|&c| bundle.labels[c].clone())
            .collect::<Vec<_>>());
        doc["thresholds"] = json!(bundle.thresholds.as_slice());
    }
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}

fn confusion_table(ev: &Evaluation) -> String {
    let width = ev.labels.iter().map(|l| l.len() + 3).max().unwrap_or(0).max(10);
    let mut s = format!("{:<width$}", "truth\\pred");
    for i in 0..ev.labels.len() {
        s += &format!(" {i:>6}");
    }
    s += &format!(" {:>9} {:>9}\n", "precision", "recall");
    for (i, row) in ev.confusion.counts.iter().enumerate() {
        s += &format!("{:<width$}", format!("{i} {}", ev.labels[i]));
        for v in row {
            s += &format!(" {v:>6}");
        }
        s += &format!(" {:>9.4} {:>9.4}\n", ev.metrics.precision[i], ev.metrics.recall[i]);
    }
    s += &format!("accuracy {:.4} over {} clips", ev.metrics.accuracy, ev.confusion.total());
    s
}

fn eval(model_path: &Path, features: &Path, json_only: bool) -> Result<()> {
    let bundle = read_model(model_path)?.into_bundle()?;
    let set = read_features(features)?;
    let ev = evaluate_features(&bundle, &set)?;
    if !json_only {
        println!("{}\n", confusion_table(&ev));
    }
    println!("{}", serde_json::to_string(&ev)?);
    Ok(())
}

fn quantize(model_path: &Path, out: &Path) -> Result<()> {
    let q = match read_model(model_path)? {
        StoredModel::Float(b) => quantize_int8(&b),
        StoredModel::Quantized(_) => bail!(acoustic_grnn::Error::BadConfig("model is already quantized".into())),
    };
    save_quantized(&q, out)?;
    let r = StoredModel::Quantized(q).size_report();
    println!("{} core bytes, {} total -> {}", r.core_bytes, r.total_bytes, out.display());
    Ok(())
}

fn render_size(r: &SizeReport) -> String {
    let mut s = format!(
        "{} model, {} parameters\n{:<10} {:>8} {:>8}\n",
        if r.quantized { "int8" } else { "float32" },
        r.parameter_count,
        "tensor",
        "elements",
        "bytes"
    );
    for t in &r.tensors {
        s += &format!("{:<10} {:>8} {:>8}\n", t.name, t.elements, t.bytes);
    }
    s += &format!(
        "core       {:>17} ({:.2} KiB)\nheader     {:>17}\nnorm       {:>17}\nthresholds {:>17}\nlabels     {:>17}\ntotal      {:>17}",
        r.core_bytes,
        r.core_kib(),
        r.header_bytes,
        r.norm_bytes,
        r.threshold_bytes,
        r.label_bytes,
        r.total_bytes
    );
    s
}

fn size(model_path: &Path) -> Result<()> {
    let stored = read_model(model_path)?;
    let report = stored.size_report();
    let on_disk = std::fs::metadata(model_path)?.len();
    println!("{}\nfile       {:>17}", render_size(&report), on_disk);
    Ok(())
}

fn synth(out: &Path, clips_per_class: usize, seed: u64) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let cfg = SynthConfig {
        clips_per_class,
        seed,
        ..SynthConfig::default()
    };
    let clips = generate(&cfg);
    let mut labels = csv::Writer::from_path(out.join("labels.csv"))?;
    labels.write_record(["filename", "label"])?;
    for c in &clips {
        let file = format!("{}.wav", c.id);
        write_wav_pcm16(out.join(&file), &c.clip)?;
        labels.write_record([file.as_str(), CLASS_NAMES[c.label]])?;
    }
    labels.flush()?;
    println!("{} clips -> {}", clips.len(), out.display());
    Ok(())
}
