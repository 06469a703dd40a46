use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use ambulate::controller::{CalibrationData, Thresholds};
use ambulate::course::{run_session, write_session_log, CourseSpec, SessionResult, TraceSource};
use ambulate::decoder::{decode_model, encode_model, CvConfig, DecodingModel, FitOptions};
use ambulate::eval::{
    fit_parzen, hdr_p_value, mc_p_value, run_ensemble_with, write_ensemble_csv, Bandwidth, KdeConfig, Pdf2D,
    PerformancePoint,
};
use ambulate::kv::KeyValues;
use ambulate::pipeline::{calibration_data, online_posteriors, run_closed_loop, train as train_model, TrainConfig};
use ambulate::sigproc::{decode_recording, encode_recording, read_csv, Recording, RECORDING_MAGIC};
use ambulate::synth::{generate_recording, GeneratorConfig};
use ambulate::Error;

use crate::failure::{Context, Failure};
use crate::report::{
    BandStepRow, CalibrateSummary, EvaluateSummary, ExperimentConfig, ObservationRow, Outcome, Report, RunSummary,
    TrainSummary,
};
use crate::{CalibrateArgs, EvaluateArgs, ImportCsvArgs, ReportArgs, RunArgs, SynthArgs, TrainArgs};

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).context(&format!("reading {}", path.display()))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    String::from_utf8(read(path)?).map_err(|_| Failure::Data(format!("{} is not UTF-8 text", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::Pipeline(format!("writing {}: {e}", path.display())))
}

fn load_recording(path: &Path, config: &mut ExperimentConfig, name: &str) -> Result<Recording, Failure> {
    let bytes = read(path)?;
    config.input(name, &bytes);
    decode_recording(&bytes).context(&format!("loading recording {}", path.display()))
}

fn load_model(path: &Path, config: &mut ExperimentConfig) -> Result<DecodingModel, Failure> {
    let bytes = read(path)?;
    config.input("model", &bytes);
    decode_model(&bytes).context(&format!("loading model {}", path.display()))
}

fn load_thresholds(path: &Path, config: &mut ExperimentConfig) -> Result<Thresholds, Failure> {
    let text = read_text(path)?;
    config.input("thresholds", text.as_bytes());
    let what = format!("loading thresholds {}", path.display());
    match Thresholds::parse(&text) {
        // Out-of-order values in a file are bad input, not a failed fit.
        Err(e @ ambulate::Error::UnusableThresholds { .. }) => Err(Failure::Data(format!("{what}: {e}"))),
        other => other.context(&what),
    }
}

fn load_course(path: Option<&Path>, config: &mut ExperimentConfig) -> Result<CourseSpec, Failure> {
    let mut spec = CourseSpec::default_course();
    if let Some(path) = path {
        let text = read_text(path)?;
        config.input("course", text.as_bytes());
        let kv = KeyValues::parse(&text).context("course overrides")?;
        spec.apply_overrides(&kv).context("course overrides")?;
    }
    Ok(spec)
}

fn emit(report: &Report, path: Option<&Path>) -> Result<(), Failure> {
    print!("{}", report.render());
    if let Some(path) = path {
        write(path, report.to_json().as_bytes())?;
    }
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<(), Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let kv = KeyValues::parse(&read_text(path)?).context("generator config")?;
            GeneratorConfig::from_key_values(&kv).context("generator config")?
        }
        None => GeneratorConfig::default(),
    };
    cfg.seed = args.seed;
    if let Some(d) = args.erd_depth {
        cfg.erd_depth = d;
    }
    if let Some(d) = args.duration_s {
        cfg.duration_s = d;
    }
    cfg.validate().context("generator config")?;
    let rec = generate_recording(&cfg).context("synth")?;
    write(&args.out, &encode_recording(&rec).context("encoding recording")?)?;
    println!(
        "{} channels, {:.1} s at {} Hz, erd_depth {} -> {}",
        rec.n_channels(),
        rec.duration_s(),
        rec.sample_rate,
        cfg.erd_depth,
        args.out.display()
    );
    Ok(())
}

pub fn import_csv(args: ImportCsvArgs) -> Result<(), Failure> {
    let bytes = read(&args.input)?;
    let rec = read_csv(&bytes[..], args.sample_rate).context(&format!("importing {}", args.input.display()))?;
    write(&args.out, &encode_recording(&rec).context("encoding recording")?)?;
    println!(
        "{} channels, {} samples -> {}",
        rec.n_channels(),
        rec.n_samples(),
        args.out.display()
    );
    Ok(())
}

pub fn train(args: TrainArgs) -> Result<(), Failure> {
    let mut config = ExperimentConfig::new("train");
    let rec = load_recording(&args.recording, &mut config, "recording")?;
    config
        .seed("cv", args.seed)
        .param("variance_keep", args.variance_keep)
        .param("z_threshold", args.z_threshold)
        .param("cv_runs", args.cv_runs)
        .param("cv_folds", args.cv_folds);
    let cfg = TrainConfig {
        z_threshold: args.z_threshold,
        fit: FitOptions {
            variance_keep: args.variance_keep,
            ..FitOptions::default()
        },
        cv: CvConfig {
            runs: args.cv_runs,
            folds: args.cv_folds,
            seed: args.seed,
        },
        ..TrainConfig::default()
    };
    if !(args.variance_keep > 0.0 && args.variance_keep <= 1.0) {
        return Err(Failure::Usage(format!(
            "--variance-keep {} outside (0, 1]",
            args.variance_keep
        )));
    }
    let outcome = train_model(&rec, &cfg).context("train")?;
    let model_bytes = encode_model(&outcome.model);
    write(&args.out, &model_bytes)?;
    let (low, high) = outcome.band.edges();
    let summary = TrainSummary {
        accuracy_mean: outcome.report.mean_accuracy,
        accuracy_std: outcome.report.std_accuracy,
        p_value: outcome.report.p_value,
        n_trials: outcome.report.n_trials,
        n_idle: outcome.n_trials[0],
        n_walk: outcome.n_trials[1],
        channels: outcome.model.channels.clone(),
        excluded: outcome.excluded.clone(),
        band_low_hz: low,
        band_high_hz: high,
        band_path: outcome
            .band_path
            .iter()
            .map(|s| {
                let (l, h) = s.band.edges();
                BandStepRow {
                    low_hz: l,
                    high_hz: h,
                    accuracy: s.accuracy,
                    accepted: s.accepted,
                }
            })
            .collect(),
        model_sha256: crate::report::sha256_hex(&model_bytes),
    };
    emit(&Report::new(config, Outcome::Train(summary)), args.report.as_deref())
}

pub fn calibrate(args: CalibrateArgs) -> Result<(), Failure> {
    let mut config = ExperimentConfig::new("calibrate");
    let model = load_model(&args.model, &mut config)?;
    let bytes = read(&args.stream)?;
    config.input("stream", &bytes);
    let data = if bytes.starts_with(RECORDING_MAGIC) {
        let rec = decode_recording(&bytes).context(&format!("loading stream {}", args.stream.display()))?;
        let tick = CourseSpec::default_course().tick_s;
        calibration_data(&model, &rec, tick).context("calibration posteriors")?
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Failure::Data(format!("{} is neither a recording nor text", args.stream.display())))?;
        CalibrationData::parse(&text).context(&format!("loading stream {}", args.stream.display()))?
    };
    let th = data.thresholds().context("calibrate")?;
    write(&args.out, th.render().as_bytes())?;
    let summary = CalibrateSummary {
        t_idle: th.t_idle,
        t_walk: th.t_walk,
        n_idle: data.idle.len(),
        n_walk: data.walk.len(),
    };
    emit(
        &Report::new(config, Outcome::Calibrate(summary)),
        args.report.as_deref(),
    )
}

fn run_summary(r: &SessionResult, th: Thresholds) -> RunSummary {
    RunSummary {
        score: r.score,
        zone_scores: r.zone_scores.clone(),
        completion_time_s: r.completion_time_s,
        finished: r.finished(),
        censored: r.censored.map(|c| c.as_str().to_string()),
        ticks: r.ticks,
        walk_ticks: r.walk_ticks,
        final_position_m: r.final_position_m,
        false_starts: r.false_starts,
        false_stops: r.false_stops,
        false_start_s: r.false_start_s,
        false_stop_s: r.false_stop_s,
        t_idle: th.t_idle,
        t_walk: th.t_walk,
    }
}

pub fn run(args: RunArgs) -> Result<(), Failure> {
    let mut config = ExperimentConfig::new("run");
    let model = load_model(&args.model, &mut config)?;
    let base = load_thresholds(&args.thresholds, &mut config)?;
    let spec = load_course(args.course.as_deref(), &mut config)?;
    let th = base
        .adjust(args.adjust_idle, args.adjust_walk)
        .context("threshold adjustment")?;
    config
        .param("adjust_idle", args.adjust_idle)
        .param("adjust_walk", args.adjust_walk);

    let result = match (&args.input, &args.synth) {
        (Some(input), _) => {
            let rec = load_recording(input, &mut config, "stream")?;
            let trace: Vec<f64> = online_posteriors(&model, &rec, spec.tick_s)
                .context("online posteriors")?
                .into_iter()
                .map(|p| p.p_walk)
                .collect();
            config.param("mode", "replay");
            run_session(&spec, th, &mut TraceSource::new(trace), true).context("run")?
        }
        (None, Some(synth)) => {
            let seed = args.seed.ok_or_else(|| Failure::Usage("--synth needs --seed".into()))?;
            let text = read_text(synth)?;
            config
                .input("synth", text.as_bytes())
                .seed("subject", seed)
                .param("mode", "closed_loop");
            let kv = KeyValues::parse(&text).context("subject config")?;
            let mut cfg = GeneratorConfig::from_key_values(&kv).context("subject config")?;
            cfg.seed = seed;
            run_closed_loop(&model, th, &spec, &cfg, true).context("run")?
        }
        (None, None) => return Err(Failure::Usage("one of --input or --synth is required".into())),
    };

    let file =
        fs::File::create(&args.log).map_err(|e| Failure::Pipeline(format!("creating {}: {e}", args.log.display())))?;
    let mut out = BufWriter::new(file);
    let adjustment =
        (args.adjust_idle != 0.0 || args.adjust_walk != 0.0).then_some((args.adjust_idle, args.adjust_walk));
    write_session_log(&mut out, &result, Some(th), adjustment).context("writing session log")?;
    out.flush()
        .map_err(|e| Failure::Pipeline(format!("writing {}: {e}", args.log.display())))?;
    emit(
        &Report::new(config, Outcome::Run(run_summary(&result, th))),
        args.report.as_deref(),
    )
}

fn write_grid(path: &Path, pdf: &Pdf2D) -> Result<(), Failure> {
    let mut s = String::from("stops,time_s,density\n");
    let ny = pdf.time_axis.2;
    for i in 0..pdf.stops_axis.2 {
        for j in 0..ny {
            s.push_str(&format!(
                "{},{},{:e}\n",
                pdf.stops_at(i),
                pdf.time_at(j),
                pdf.density[i * ny + j]
            ));
        }
    }
    write(path, s.as_bytes())
}

pub fn evaluate(args: EvaluateArgs) -> Result<(), Failure> {
    let mut config = ExperimentConfig::new("evaluate");
    let th = load_thresholds(&args.thresholds, &mut config)?;
    let spec = load_course(args.course.as_deref(), &mut config)?;
    let observed: Vec<PerformancePoint> = args
        .observed
        .iter()
        .map(|s| s.parse::<PerformancePoint>().context("--observed"))
        .collect::<Result<_, _>>()?;
    if args.n == 0 {
        return Err(Failure::Usage("--n must be at least 1".into()));
    }
    if args.horizon == 0 {
        return Err(Failure::Usage("--horizon must be at least 1".into()));
    }
    let bandwidth = match (args.bandwidth_stops, args.bandwidth_time) {
        (Some(stops), Some(time)) => Bandwidth::Fixed { stops, time },
        _ => Bandwidth::Silverman,
    };
    config
        .seed("ensemble", args.seed)
        .param("n", args.n)
        .param("horizon", args.horizon)
        .param("alpha", args.alpha)
        .param("observed", &args.observed)
        .param("bandwidth", format!("{bandwidth:?}"));

    let ensemble = run_ensemble_with(th, &spec, args.n, args.seed, args.horizon).context("random-walk ensemble")?;
    let points = ensemble.points();
    let kde = KdeConfig {
        bandwidth,
        ..KdeConfig::default()
    };
    let (pdf, fallback_reason) = match fit_parzen(&points, &kde) {
        Ok(pdf) => (Some(pdf), None),
        Err(e @ (Error::TooCensored { .. } | Error::TooFewTrials(_))) => (None, Some(e.to_string())),
        Err(e) => return Err(e).context("density estimate"),
    };

    let mut rows = Vec::with_capacity(observed.len());
    for obs in &observed {
        let mc_p = mc_p_value(&points, *obs, bandwidth).context("Monte Carlo p-value")?;
        let hdr = pdf.as_ref().map(|p| hdr_p_value(p, *obs));
        let p = hdr.map_or(mc_p, |h| h.p);
        rows.push(ObservationRow {
            stops: obs.stops,
            time_s: obs.time_s,
            hdr_p: hdr.map(|h| h.p),
            outside_grid: hdr.map(|h| h.outside_grid),
            mc_p,
            p,
            significant: p < args.alpha,
        });
    }

    if let Some(path) = &args.ensemble_out {
        let mut buf = Vec::new();
        write_ensemble_csv(&mut buf, &ensemble).context("ensemble table")?;
        write(path, &buf)?;
    }
    if let Some(path) = &args.grid_out {
        match &pdf {
            Some(pdf) => write_grid(path, pdf)?,
            None => log::warn!(
                "no density grid to export: {}",
                fallback_reason.as_deref().unwrap_or("")
            ),
        }
    }

    let s = ensemble.summary();
    let summary = EvaluateSummary {
        t_idle: th.t_idle,
        t_walk: th.t_walk,
        n_runs: s.n,
        stops_mean: s.stops_mean,
        stops_std: s.stops_std,
        time_mean: s.time_mean,
        time_std: s.time_std,
        censored_fraction: s.censored_fraction,
        stops_cell: s.stops_cell(),
        time_cell: s.time_cell(),
        method: if pdf.is_some() { "hdr" } else { "mc" }.to_string(),
        fallback_reason,
        bandwidth_stops: pdf.as_ref().map(|p| p.bandwidth.0),
        bandwidth_time: pdf.as_ref().map(|p| p.bandwidth.1),
        alpha: args.alpha,
        observations: rows,
    };
    emit(&Report::new(config, Outcome::Evaluate(summary)), Some(&args.report))
}

pub fn report(args: ReportArgs) -> Result<(), Failure> {
    let mut out = String::new();
    for path in &args.input {
        let text = read_text(path)?;
        let report: Report = serde_json::from_str(&text)
            .map_err(|e| Failure::Data(format!("{} is not a report: {e}", path.display())))?;
        out.push_str(&format!("== {} ({}) ==\n", path.display(), report.config.command));
        out.push_str(&report.render());
    }
    match &args.out {
        Some(path) => write(path, out.as_bytes()),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}
