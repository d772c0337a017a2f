//! Staged pipeline: simulate, encode, train, sample, evaluate.
//!
//! A run lives in `{out}/{config hash}/`. Each stage writes into a hidden
//! temporary directory and renames it to its final name on success, so a
//! failed stage leaves nothing behind. Existing stage outputs are never
//! overwritten.

mod config;
mod manifest;

pub use config::{
    EncoderMode, EncoderSection, EvaluateSection, PathsConfig, PipelineConfig, SampleSection, ScheduleSection,
    TrainSection, METRIC_NAMES,
};
pub use manifest::{ConditionSpec, Manifest, ManifestEntry, Split};

use crate::conditioning::Condition;
use crate::ddpm::{sample_batch, NoiseSchedule};
use crate::denoiser::{load_params, save_params, train, train_from, AdamState, DenoiserParams};
use crate::error::{Error, Result};
use crate::esim::{inject_noise, load_sequence, simulate, simulate_parallel};
use crate::event::{load_stream, save_stream, EventStream};
use crate::frame::{
    encode_fixed_count, encode_fixed_interval, encode_full, load_frame, render_mono, save_frame, EventFrame,
};
use crate::metrics::{
    classification_scores, extract_features, fid, format_table, write_metrics_csv, NearestCentroid, Projection,
};
use crate::rng;
use crate::toy::event_mass_centroid;
use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const STREAMS_FILE: &str = "streams.tsv";
pub const PARAMS_FILE: &str = "params.dnsr";
pub const LOSS_FILE: &str = "loss.csv";
pub const SCHEDULE_FILE: &str = "schedule.txt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_FILE: &str = "config.toml";

pub const STAGES: [&str; 5] = ["simulate", "encode", "train", "sample", "evaluate"];

/// Command-line switches that do not change results.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Also write white-background preview images.
    pub preview: bool,
    /// Worker threads; 0 or 1 runs serially.
    pub parallel: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub stage: &'static str,
    pub dir: PathBuf,
    pub lines: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Run {
    pub config: PipelineConfig,
    pub dir: PathBuf,
    pub options: RunOptions,
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| Error::io(path, e))
}

fn require(path: &Path, hint: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!("missing input {} ({hint})", path.display())))
    }
}

impl Run {
    /// Validates `config` and creates `{out}/{hash}/` with a copy of the config.
    pub fn open(config: PipelineConfig, options: RunOptions) -> Result<Self> {
        config.validate()?;
        let out = config.paths.out.clone().unwrap_or_else(|| PathBuf::from("runs"));
        let dir = out.join(config.hash()?);
        io(&dir, fs::create_dir_all(&dir))?;
        let mut stored = config.clone();
        stored.paths.out = None;
        let cfg_path = dir.join(CONFIG_FILE);
        if !cfg_path.exists() {
            let tmp = dir.join(".config.toml.tmp");
            io(&tmp, fs::write(&tmp, stored.to_toml()?))?;
            io(&cfg_path, fs::rename(&tmp, &cfg_path))?;
        }
        Ok(Self { config, dir, options })
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.dir.join(stage)
    }

    fn parallel(&self) -> bool {
        self.options.parallel > 1
    }

    fn execute(&self, stage: &'static str, body: impl FnOnce(&Path) -> Result<Vec<String>> + Send) -> Result<StageReport> {
        let fin = self.stage_dir(stage);
        if fin.exists() {
            return Err(Error::Config(format!("{} already exists; refusing to overwrite", fin.display())).in_stage(stage));
        }
        let tmp = self.dir.join(format!(".{stage}.tmp"));
        if tmp.exists() {
            io(&tmp, fs::remove_dir_all(&tmp)).map_err(|e| e.in_stage(stage))?;
        }
        io(&tmp, fs::create_dir_all(&tmp)).map_err(|e| e.in_stage(stage))?;
        let result = if self.parallel() {
            rayon::ThreadPoolBuilder::new()
                .num_threads(self.options.parallel)
                .build()
                .map_err(|e| Error::Config(e.to_string()))
                .and_then(|pool| pool.install(|| body(&tmp)))
        } else {
            body(&tmp)
        };
        match result {
            Ok(lines) => {
                io(&fin, fs::rename(&tmp, &fin)).map_err(|e| e.in_stage(stage))?;
                Ok(StageReport { stage, dir: fin, lines })
            }
            Err(e) => {
                let _ = fs::remove_dir_all(&tmp);
                Err(e.in_stage(stage))
            }
        }
    }

    /// Intensity sequences to binary event streams.
    pub fn simulate(&self) -> Result<StageReport> {
        let cfg = &self.config;
        self.execute("simulate", |tmp| {
            let index_path = cfg.paths.sequences.as_ref().ok_or_else(|| Error::Config("paths.sequences is not set".into()))?;
            require(index_path, "sequence index")?;
            let base = parent(index_path);
            let index = Manifest::load(index_path)?;
            index.validate(&base)?;
            let mut entries = Vec::new();
            let mut lines = Vec::new();
            let mut total = 0;
            for (i, e) in index.entries.iter().enumerate() {
                let seq = load_sequence(base.join(&e.path))?;
                let mut stream =
                    if self.parallel() { simulate_parallel(&seq, &cfg.sensor, cfg.seed)? } else { simulate(&seq, &cfg.sensor, cfg.seed)? };
                if cfg.sensor.background_rate > 0.0 {
                    let t0 = seq.frames.first().map_or(0, |f| f.0);
                    let t1 = seq.frames.last().map_or(0, |f| f.0).max(t0 + 1);
                    stream = inject_noise(&stream, &cfg.sensor, t0, t1, rng::derive(cfg.seed, i as u64))?;
                }
                let name = format!("stream_{i:04}.evs");
                save_stream(tmp.join(&name), &stream)?;
                lines.push(format!("{}: {} events", e.path.display(), stream.len()));
                total += stream.len();
                let condition = import_condition(&e.condition, &base, tmp, i)?;
                entries.push(ManifestEntry { path: name.into(), condition, split: e.split });
            }
            Manifest { entries }.save(tmp.join(STREAMS_FILE))?;
            lines.push(format!("{} streams, {total} events", index.entries.len()));
            Ok(lines)
        })
    }

    /// Event streams to frames plus a manifest.
    pub fn encode(&self) -> Result<StageReport> {
        let cfg = &self.config;
        let enc = cfg.encoder.encoder_config();
        self.execute("encode", |tmp| {
            let index_path = match &cfg.paths.streams {
                Some(p) => p.clone(),
                None => self.stage_dir("simulate").join(STREAMS_FILE),
            };
            require(&index_path, "run simulate first or set paths.streams")?;
            let base = parent(&index_path);
            let index = Manifest::load(&index_path)?;
            index.validate(&base)?;
            if self.options.preview {
                io(tmp, fs::create_dir_all(tmp.join("previews")))?;
            }
            let mut entries = Vec::new();
            let mut lines = Vec::new();
            for (i, e) in index.entries.iter().enumerate() {
                let stream = load_stream(base.join(&e.path))?;
                let frames = encode_stream(&stream, &cfg.encoder, &enc)?;
                let condition = import_condition(&e.condition, &base, tmp, i)?;
                for (k, frame) in frames.iter().enumerate() {
                    let name = format!("frame_{i:04}_{k:03}.ppm");
                    save_frame(tmp.join(&name), frame)?;
                    if self.options.preview {
                        save_frame(tmp.join("previews").join(&name), &frame.preview())?;
                    }
                    entries.push(ManifestEntry { path: name.into(), condition: condition.clone(), split: e.split });
                }
                lines.push(format!("{}: {} frames", e.path.display(), frames.len()));
            }
            lines.push(format!("{} frames in {MANIFEST_FILE}", entries.len()));
            Manifest { entries }.save(tmp.join(MANIFEST_FILE))?;
            Ok(lines)
        })
    }

    /// Trains the denoiser on the train split of the encoded manifest.
    pub fn train(&self) -> Result<StageReport> {
        let cfg = &self.config;
        self.execute("train", |tmp| {
            let (base, manifest) = self.encoded_manifest()?;
            let spec = cfg.denoiser;
            let data = load_pairs(&base, manifest.split(Split::Train), spec.cond_dim)?;
            if data.is_empty() {
                return Err(Error::Empty("train split"));
            }
            check_control_channels(&data, spec.control_channels)?;
            let sched = cfg.schedule.build()?;
            let tcfg = cfg.train_config(self.parallel());
            let (params, report, first) = match &cfg.train.resume_from {
                Some(p) => {
                    let params = load_params(p, spec)?;
                    let state = AdamState { step: cfg.train.resume_step, ..AdamState::new(params.len()) };
                    let (params, report) = train_from(params, state, &data, &tcfg, &sched)?;
                    (params, report, cfg.train.resume_step)
                }
                None => {
                    let (params, report) = train(&data, spec, &tcfg, &sched)?;
                    (params, report, 0)
                }
            };
            save_params(tmp.join(PARAMS_FILE), &params)?;
            let loss_path = tmp.join(LOSS_FILE);
            report.write_loss_csv(io(&loss_path, fs::File::create(&loss_path))?, first)?;
            sched.save(tmp.join(SCHEDULE_FILE))?;
            let mut lines = vec![format!("{} frames, {} steps, {} parameters", data.len(), tcfg.steps, params.len())];
            if let Some(l) = report.losses.last() {
                lines.push(format!("final loss {l:.6}"));
            }
            Ok(lines)
        })
    }

    /// Samples frames for each condition; the condition is written as the frame's label.
    pub fn sample(&self) -> Result<StageReport> {
        let cfg = &self.config;
        self.execute("sample", |tmp| {
            let train_dir = self.stage_dir("train");
            require(&train_dir.join(PARAMS_FILE), "run train first")?;
            let params = load_params(train_dir.join(PARAMS_FILE), cfg.denoiser)?;
            let sched = NoiseSchedule::load(train_dir.join(SCHEDULE_FILE))?;
            let (enc_base, encoded) = self.encoded_manifest()?;
            let first = encoded.entries.first().ok_or(Error::Empty("encoded manifest"))?;
            let shape_frame = load_frame(enc_base.join(&first.path))?;
            let (w, h) = (shape_frame.width, shape_frame.height);

            let (cond_base, source): (PathBuf, Vec<ConditionSpec>) = match &cfg.paths.conditions {
                Some(p) => {
                    require(p, "condition list")?;
                    let m = Manifest::load(p)?;
                    (parent(p), m.entries.into_iter().map(|e| e.condition).collect())
                }
                None => {
                    let eval: Vec<_> = encoded.split(Split::Eval).map(|e| e.condition.clone()).collect();
                    let pick = if eval.is_empty() { encoded.entries.iter().map(|e| e.condition.clone()).collect() } else { eval };
                    (enc_base.clone(), pick)
                }
            };
            let mut seen = BTreeSet::new();
            let unique: Vec<ConditionSpec> = source.into_iter().filter(|c| seen.insert(c.clone())).collect();
            let mut specs = Vec::new();
            let mut conds = Vec::new();
            for (u, spec) in unique.iter().enumerate() {
                let imported = import_condition(spec, &cond_base, tmp, u)?;
                let cond = spec.resolve(&cond_base, w, h, cfg.denoiser.cond_dim)?;
                for _ in 0..cfg.sample.per_condition {
                    specs.push(imported.clone());
                    conds.push(cond.clone());
                }
            }
            let samples = sample_batch(
                &params,
                &conds,
                &sched,
                &[crate::frame::CHANNELS, h, w],
                cfg.seed,
                &cfg.guidance,
                self.parallel(),
            )?;
            if self.options.preview {
                io(tmp, fs::create_dir_all(tmp.join("previews")))?;
            }
            let mut entries = Vec::new();
            for (i, (x, spec)) in samples.iter().zip(specs).enumerate() {
                let frame = EventFrame::from_model_tensor(x)?;
                let name = format!("sample_{i:04}.ppm");
                save_frame(tmp.join(&name), &frame)?;
                if self.options.preview {
                    save_frame(tmp.join("previews").join(&name), &frame.preview())?;
                }
                entries.push(ManifestEntry { path: name.into(), condition: spec, split: Split::Train });
            }
            Manifest { entries }.save(tmp.join(MANIFEST_FILE))?;
            Ok(vec![format!("{} frames for {} conditions, {} steps each", samples.len(), unique.len(), sched.steps())])
        })
    }

    /// Compares generated frames against held-out real frames.
    pub fn evaluate(&self) -> Result<StageReport> {
        let cfg = &self.config;
        self.execute("evaluate", |tmp| {
            let gen_path = cfg.evaluate.generated.clone().unwrap_or_else(|| self.stage_dir("sample").join(MANIFEST_FILE));
            require(&gen_path, "run sample first or set evaluate.generated")?;
            let gen_base = parent(&gen_path);
            let generated = Manifest::load(&gen_path)?;
            generated.validate(&gen_base)?;

            let (ref_base, reference) = match &cfg.evaluate.reference {
                Some(p) => {
                    require(p, "reference manifest")?;
                    (parent(p), Manifest::load(p)?)
                }
                None => self.encoded_manifest()?,
            };
            reference.validate(&ref_base)?;
            let ref_entries: Vec<&ManifestEntry> = {
                let eval: Vec<_> = reference.split(Split::Eval).collect();
                if eval.is_empty() { reference.entries.iter().collect() } else { eval }
            };
            let gen_frames = load_frames(&gen_base, generated.entries.iter())?;
            let ref_frames = load_frames(&ref_base, ref_entries.iter().copied())?;

            let mut rows: Vec<(String, f64)> = Vec::new();
            for metric in &cfg.evaluate.metrics {
                match metric.as_str() {
                    "fid" => {
                        let proj = Projection::Random { dim: cfg.evaluate.feature_dim, seed: cfg.seed };
                        let score = fid(&extract_features(&gen_frames, proj)?, &extract_features(&ref_frames, proj)?)?;
                        rows.push(("fid".into(), score));
                    }
                    "classification" => {
                        let labelled = |entries: &mut dyn Iterator<Item = &ManifestEntry>, frames: &[EventFrame]| -> Result<Vec<(Vec<f64>, String)>> {
                            entries
                                .zip(frames)
                                .map(|(e, f)| match &e.condition {
                                    ConditionSpec::Class(l) => Ok((f.data().to_vec(), l.clone())),
                                    other => Err(Error::Config(format!("classification needs class conditions, got {}", other.kind()))),
                                })
                                .collect()
                        };
                        let train_entries: Vec<&ManifestEntry> = reference.split(Split::Train).collect();
                        let fit_set = if train_entries.is_empty() {
                            labelled(&mut ref_entries.iter().copied(), &ref_frames)?
                        } else {
                            let frames = load_frames(&ref_base, train_entries.iter().copied())?;
                            labelled(&mut train_entries.iter().copied(), &frames)?
                        };
                        let classifier = NearestCentroid::fit(&fit_set)?;
                        let gen = labelled(&mut generated.entries.iter(), &gen_frames)?;
                        let pred: Vec<String> = gen.iter().map(|(x, _)| classifier.predict(x).clone()).collect();
                        let truth: Vec<String> = gen.into_iter().map(|(_, l)| l).collect();
                        let (acc, prec) = classification_scores(&pred, &truth)?;
                        rows.push(("accuracy".into(), acc));
                        rows.push(("macro_precision".into(), prec));
                    }
                    "centroid" => {
                        let (mean, within) = control_centroid_error(&gen_base, &generated, &gen_frames)?;
                        rows.push(("centroid_error_px".into(), mean));
                        rows.push(("centroid_within_3px".into(), within));
                    }
                    other => return Err(Error::Config(format!("unknown metric {other:?}"))),
                }
            }
            let path = tmp.join(METRICS_FILE);
            write_metrics_csv(io(&path, fs::File::create(&path))?, &rows)?;
            Ok(format_table(&rows).lines().map(String::from).collect())
        })
    }

    /// All stages in order. `simulate` is skipped when `paths.streams` is set.
    pub fn pipeline(&self) -> Result<Vec<StageReport>> {
        let mut out = Vec::new();
        if self.config.paths.streams.is_none() {
            out.push(self.simulate()?);
        }
        out.push(self.encode()?);
        out.push(self.train()?);
        out.push(self.sample()?);
        out.push(self.evaluate()?);
        Ok(out)
    }

    fn encoded_manifest(&self) -> Result<(PathBuf, Manifest)> {
        let dir = self.stage_dir("encode");
        let path = dir.join(MANIFEST_FILE);
        require(&path, "run encode first")?;
        let m = Manifest::load(&path)?;
        m.validate(&dir)?;
        Ok((dir, m))
    }
}

fn parent(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}

/// Copies a control image into `stage/controls/` so runs stay self-contained.
fn import_condition(spec: &ConditionSpec, base: &Path, stage: &Path, index: usize) -> Result<ConditionSpec> {
    let Some(src) = spec.file() else {
        return Ok(spec.clone());
    };
    let from = base.join(src);
    let file = src.file_name().and_then(|s| s.to_str()).unwrap_or("control.ppm");
    let rel = PathBuf::from("controls").join(format!("{index:04}_{file}"));
    let dest = stage.join(&rel);
    io(stage, fs::create_dir_all(stage.join("controls")))?;
    io(&from, fs::copy(&from, &dest))?;
    Ok(match spec {
        ConditionSpec::Skeleton(_) => ConditionSpec::Skeleton(rel),
        _ => ConditionSpec::Normal(rel),
    })
}

fn encode_stream(stream: &EventStream, section: &EncoderSection, enc: &crate::frame::EncoderConfig) -> Result<Vec<EventFrame>> {
    match section.mode {
        EncoderMode::Full => Ok(vec![encode_full(stream, enc)]),
        EncoderMode::Mono => Ok(vec![render_mono(stream, enc)]),
        EncoderMode::FixedCount => encode_fixed_count(stream, section.count.unwrap_or(0), enc),
        EncoderMode::FixedInterval => encode_fixed_interval(stream, section.interval_us.unwrap_or(0), enc),
    }
}

fn load_frames<'a>(base: &Path, entries: impl Iterator<Item = &'a ManifestEntry>) -> Result<Vec<EventFrame>> {
    entries.map(|e| load_frame(base.join(&e.path))).collect()
}

fn load_pairs<'a>(
    base: &Path,
    entries: impl Iterator<Item = &'a ManifestEntry>,
    dim: usize,
) -> Result<Vec<(EventFrame, Condition)>> {
    entries
        .map(|e| {
            let frame = load_frame(base.join(&e.path))?;
            let cond = e.condition.resolve(base, frame.width, frame.height, dim)?;
            Ok((frame, cond))
        })
        .collect()
}

fn check_control_channels(data: &[(EventFrame, Condition)], expected: usize) -> Result<()> {
    for (_, c) in data {
        if let Some(ctrl) = c.control() {
            if ctrl.channels != expected {
                return Err(Error::Config(format!(
                    "control images have {} channels but denoiser.control_channels = {expected}",
                    ctrl.channels
                )));
            }
        }
    }
    Ok(())
}

/// Mean distance between each generated frame's event centroid and the
/// centroid of its control image, plus the share within 3 px (percent).
fn control_centroid_error(base: &Path, m: &Manifest, frames: &[EventFrame]) -> Result<(f64, f64)> {
    let mut dists = Vec::new();
    for (e, f) in m.entries.iter().zip(frames) {
        let Some(file) = e.condition.file() else {
            return Err(Error::Config(format!("centroid metric needs control images, got {}", e.condition.kind())));
        };
        let ctrl = crate::conditioning::load_control_image(base.join(file), f.width, f.height)?;
        let mass = EventFrame::from_data(
            f.width,
            f.height,
            (0..crate::frame::CHANNELS).flat_map(|c| ctrl.data[(c % ctrl.channels) * f.width * f.height..][..f.width * f.height].to_vec()).collect(),
            crate::frame::Encoding::Full,
        )?;
        let (Some(a), Some(b)) = (event_mass_centroid(f), event_mass_centroid(&mass)) else {
            dists.push(f64::INFINITY);
            continue;
        };
        dists.push(((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt());
    }
    if dists.is_empty() {
        return Err(Error::Empty("generated frames"));
    }
    let within = 100.0 * dists.iter().filter(|&&d| d <= 3.0).count() as f64 / dists.len() as f64;
    let finite: Vec<f64> = dists.iter().copied().filter(|d| d.is_finite()).collect();
    let mean = if finite.is_empty() { f64::INFINITY } else { finite.iter().sum::<f64>() / finite.len() as f64 };
    Ok((mean, within))
}

/// Loads the parameters a finished run produced.
pub fn load_run_params(run: &Run) -> Result<DenoiserParams> {
    load_params(run.stage_dir("train").join(PARAMS_FILE), run.config.denoiser)
}
