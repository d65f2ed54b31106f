use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bootband::blocklen::{default_l_max, select_block_length, SelectorConfig};
use bootband::bootstrap::{batch_resample, BlockPlan};
use bootband::lstm::{fit_observed, predict_window, TrainConfig};
use bootband::pipeline::{compare_methods, run, PipelineConfig, RunOutput, SelectorSettings};
use bootband::rng::derive_seed;
use bootband::timeseries::{price_path, to_log_returns, window_minmax_scale, LogReturnSeries};
use bootband::{load_csv, Method, PriceSeries, SplitSpec};
use clap::Args;
use serde::Serialize;

use crate::args::*;
use crate::error::CliError;
use crate::manifest::{sha256_hex, ConfigLayer, RunManifest};

#[derive(Debug, Clone, Default, Args)]
pub struct ResampleCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub method: MethodArg,
    #[command(flatten)]
    pub boot: BootArgs,
    #[command(flatten)]
    pub count: CountArg,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SelectBlockCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub method: MethodArg,
    #[command(flatten)]
    pub boot: BootArgs,
    #[command(flatten)]
    pub select: SelectArgs,
    #[command(flatten)]
    pub reps: SelectRepsArg,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct BandCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub method: MethodArg,
    #[command(flatten)]
    pub boot: BootArgs,
    #[command(flatten)]
    pub select: SelectArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub band: BandArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CompareCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub boot: BootArgs,
    #[command(flatten)]
    pub select: SelectArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub band: BandArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayCmd {
    /// Manifest written by an earlier run
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory [default: out]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads [default: available parallelism]
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Loaded input plus bookkeeping shared by every command.
struct Session {
    out: PathBuf,
    timings: bool,
    prices: PriceSeries,
    manifest: RunManifest,
    clock: BTreeMap<String, f64>,
}

impl Session {
    fn open(
        command: &str,
        data: DataArgs,
        run: &RunArgs,
        layer: &ConfigLayer,
    ) -> Result<(Self, DataArgs), CliError> {
        let data = data.or(layer.get()?).or(DataArgs::defaults());
        let input = data
            .input
            .clone()
            .ok_or_else(|| CliError::Usage("--input is required".into()))?;
        let column = data.column.clone().expect("column has a default");
        let started = Instant::now();
        let bytes =
            fs::read(&input).map_err(|e| CliError::Input(format!("{}: {e}", input.display())))?;
        let prices = load_csv(&input, &column).map_err(|e| CliError::Input(e.to_string()))?;
        let seed = data.seed.unwrap_or_else(|| {
            let s = rand::random::<u64>();
            eprintln!("seed: {s}");
            s
        });
        let data = DataArgs {
            seed: Some(seed),
            ..data
        };
        let mut manifest = RunManifest::new(command, seed, sha256_hex(&bytes));
        manifest.record(&data);
        let mut clock = BTreeMap::new();
        clock.insert("load".to_owned(), started.elapsed().as_secs_f64());
        Ok((
            Self {
                out: run.out.clone().unwrap_or_else(|| PathBuf::from("out")),
                timings: run.timings,
                prices,
                manifest,
                clock,
            },
            data,
        ))
    }

    fn seed(&self) -> u64 {
        self.manifest.seed
    }

    fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.out.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| out_err(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| out_err(&path, e))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
        text.push('\n');
        self.write(name, text)
    }

    fn finish(mut self) -> Result<(), CliError> {
        if self.timings {
            self.manifest.timings = Some(std::mem::take(&mut self.clock));
        }
        let manifest = self.manifest.clone();
        self.write_json("manifest.json", &manifest)?;
        println!("wrote {}", self.out.display());
        Ok(())
    }
}

fn out_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn positive(name: &str, v: usize) -> Result<usize, CliError> {
    if v == 0 {
        return Err(CliError::Usage(format!("--{name} must be positive")));
    }
    Ok(v)
}

fn resolve_split(
    split: SplitArgs,
    layer: &ConfigLayer,
    n: usize,
) -> Result<(SplitArgs, SplitSpec), CliError> {
    let split = split.or(layer.get()?);
    let spec = match (split.train_len, split.test_len) {
        (Some(a), Some(b)) => SplitSpec::new(a, b),
        (Some(a), None) => SplitSpec::new(a, n.saturating_sub(a)),
        (None, Some(b)) => SplitSpec::new(n.saturating_sub(b), b),
        (None, None) => SplitSpec::proportional(n),
    };
    spec.check(n).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((
        SplitArgs {
            train_len: Some(spec.train_len),
            test_len: Some(spec.test_len),
        },
        spec,
    ))
}

fn train_config(t: &TrainArgs, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig {
        lookback: t.lookback.expect("default"),
        batch_size: t.batch_size.expect("default"),
        epochs: t.epochs.expect("default"),
        dropout: t.dropout.expect("default"),
        l2_coeff: t.l2.expect("default"),
        hidden_size: t.hidden.expect("default"),
        seed,
        ..TrainConfig::default()
    };
    cfg.adam.lr = t.lr.expect("default");
    cfg
}

fn series_csv(header: &[String], dates: &[String], columns: &[&[f64]]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for (t, d) in dates.iter().enumerate() {
        out.push_str(d);
        for c in columns {
            out.push(',');
            out.push_str(&c[t].to_string());
        }
        out.push('\n');
    }
    out
}

pub fn resample(cmd: ResampleCmd, layer: ConfigLayer) -> Result<(), CliError> {
    layer.check_keys(&[
        DataArgs::KEYS,
        MethodArg::KEYS,
        BootArgs::KEYS,
        CountArg::KEYS,
    ])?;
    let (mut s, _) = Session::open("resample", cmd.data, &cmd.run, &layer)?;
    let method = cmd.method.or(layer.get()?).or(MethodArg::defaults());
    let boot = cmd.boot.or(layer.get()?).or(BootArgs::defaults());
    let count = cmd.count.or(layer.get()?).or(CountArg { count: Some(1) });
    let block_len = boot
        .block_len
        .ok_or_else(|| CliError::Usage("--block-len is required".into()))?;
    let reps = positive("count", count.count.expect("default"))?;
    s.manifest.record(&method);
    s.manifest.record(&boot);
    s.manifest.record(&count);

    let started = Instant::now();
    let returns = to_log_returns(&s.prices).map_err(|e| CliError::compute("resample", e))?;
    let plan = BlockPlan::new(
        method.method.expect("default"),
        block_len,
        derive_seed(s.seed(), "resample"),
    )
    .with_locality(boot.locality.expect("default"));
    let replicates = batch_resample(&returns.values, &plan, reps)
        .map_err(|e| CliError::compute("resample", e))?;
    s.clock
        .insert("resample".into(), started.elapsed().as_secs_f64());

    let dates: Vec<String> = s
        .prices
        .timestamps()
        .iter()
        .map(|d| d.to_string())
        .collect();
    let mut header = vec!["date".to_owned(), "original".to_owned()];
    header.extend((0..reps).map(|i| format!("rep_{i}")));

    let mut cols: Vec<&[f64]> = vec![&returns.values];
    cols.extend(replicates.iter().map(|r| r.values.as_slice()));
    s.write(
        "replicates_returns.csv",
        series_csv(&header, &dates[1..], &cols),
    )?;

    let paths: Vec<Vec<f64>> = replicates
        .iter()
        .map(|r| {
            price_path(&LogReturnSeries {
                values: r.values.clone(),
                anchor_price: returns.anchor_price,
            })
        })
        .collect();
    let mut cols: Vec<&[f64]> = vec![s.prices.values()];
    cols.extend(paths.iter().map(Vec::as_slice));
    s.write("replicates.csv", series_csv(&header, &dates, &cols))?;
    s.write_json("replicates.json", &replicates)?;
    s.finish()
}

pub fn select_block(cmd: SelectBlockCmd, layer: ConfigLayer) -> Result<(), CliError> {
    layer.check_keys(&[
        DataArgs::KEYS,
        MethodArg::KEYS,
        BootArgs::KEYS,
        SelectArgs::KEYS,
        SelectRepsArg::KEYS,
    ])?;
    let (mut s, _) = Session::open("select-block", cmd.data, &cmd.run, &layer)?;
    let method = cmd.method.or(layer.get()?).or(MethodArg::defaults());
    let boot = cmd.boot.or(layer.get()?).or(BootArgs::defaults());
    let returns = to_log_returns(&s.prices).map_err(|e| CliError::compute("select-block", e))?;
    let select = cmd.select.or(layer.get()?).or(SelectArgs {
        lmax: Some(default_l_max(returns.len())),
        ..SelectArgs::defaults()
    });
    let reps = cmd
        .reps
        .or(layer.get()?)
        .or(SelectRepsArg { reps: Some(100) });
    s.manifest.record(&method);
    s.manifest.record(&BootArgs {
        block_len: None,
        ..boot.clone()
    });
    s.manifest.record(&select);
    s.manifest.record(&reps);

    let cfg = SelectorConfig {
        method: method.method.expect("default"),
        reps: reps.reps.expect("default"),
        l_min: select.lmin.expect("default"),
        l_max: select.lmax.expect("default"),
        t: select.t.expect("default"),
        locality: boot.locality.expect("default"),
        seed: derive_seed(s.seed(), "select"),
    };
    cfg.check(returns.len())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let started = Instant::now();
    let sel =
        select_block_length(&returns, &cfg).map_err(|e| CliError::compute("select-block", e))?;
    s.clock
        .insert("selection".into(), started.elapsed().as_secs_f64());

    s.write("selector_curve.csv", sel.curve.to_csv())?;
    #[derive(Serialize)]
    struct SelectionReport {
        method: Method,
        l_opt: usize,
        n: usize,
        reps: usize,
        t: f64,
        l_min: usize,
        l_max: usize,
        seed: u64,
    }
    s.write_json(
        "selection.json",
        &SelectionReport {
            method: cfg.method,
            l_opt: sel.l_opt,
            n: returns.len(),
            reps: cfg.reps,
            t: cfg.t,
            l_min: cfg.l_min,
            l_max: cfg.l_max,
            seed: s.seed(),
        },
    )?;
    println!("{}: l_opt = {}", cfg.method, sel.l_opt);
    s.finish()
}

pub fn train(cmd: TrainCmd, layer: ConfigLayer) -> Result<(), CliError> {
    layer.check_keys(&[DataArgs::KEYS, SplitArgs::KEYS, TrainArgs::KEYS])?;
    let (mut s, _) = Session::open("train", cmd.data, &cmd.run, &layer)?;
    let (split_args, split) = resolve_split(cmd.split, &layer, s.prices.len())?;
    let targs = cmd.train.or(layer.get()?).or(TrainArgs::defaults());
    s.manifest.record(&split_args);
    s.manifest.record(&targs);
    let cfg = train_config(&targs, derive_seed(s.seed(), "train"));
    cfg.check().map_err(|e| CliError::Usage(e.to_string()))?;
    let window = positive("smoothing-window", targs.smoothing_window.expect("default"))?;

    let all = s.prices.values();
    let n_train = split.train_len;
    if n_train <= cfg.lookback + 1 {
        return Err(CliError::Usage(format!(
            "training length {n_train} must exceed lookback + 1"
        )));
    }
    let scaled = window_minmax_scale(all, window);
    let lb = cfg.lookback;
    let price_rmse = |params: &bootband::LstmParams, range: std::ops::Range<usize>| -> f64 {
        let len = range.len() as f64;
        let sq: f64 = range
            .map(|p| {
                let y = predict_window(params, &scaled.values[p - lb..p]);
                (scaled.denormalize(p, y) - all[p]).powi(2)
            })
            .sum();
        (sq / len).sqrt()
    };

    let started = Instant::now();
    let mut rows =
        String::from("epoch,mean_batch_loss,train_rmse_scaled,train_rmse_price,test_rmse_price\n");
    let fit = fit_observed(&scaled.values[..n_train], &cfg, |e, params| {
        rows.push_str(&format!(
            "{},{},{},{},{}\n",
            e.epoch,
            e.mean_batch_loss,
            e.train_rmse,
            price_rmse(params, lb..n_train),
            price_rmse(params, n_train..all.len()),
        ));
    })
    .map_err(|e| CliError::compute("train", e))?;
    s.clock
        .insert("training".into(), started.elapsed().as_secs_f64());

    let model = fit.model;
    let dates = s.prices.timestamps();
    let mut preds = String::from("date,actual,predicted\n");
    for p in n_train..all.len() {
        let y = predict_window(&model.params, &scaled.values[p - lb..p]);
        preds.push_str(&format!(
            "{},{},{}\n",
            dates[p],
            all[p],
            scaled.denormalize(p, y)
        ));
    }
    let mut model_json = model.to_json();
    model_json.push('\n');
    s.write("model.json", model_json)?;
    s.write("train_log.csv", rows)?;
    s.write("predictions.csv", preds)?;
    if let Some(last) = fit.log.last() {
        println!("final train RMSE (scaled) {}", last.train_rmse);
    }
    s.finish()
}

struct BandSettings {
    split: SplitArgs,
    boot: BootArgs,
    select: SelectArgs,
    train: TrainArgs,
    band: BandArgs,
    cfg: PipelineConfig,
}

#[allow(clippy::too_many_arguments)]
fn band_settings(
    s: &Session,
    layer: &ConfigLayer,
    method: Method,
    split: SplitArgs,
    boot: BootArgs,
    select: SelectArgs,
    train: TrainArgs,
    band: BandArgs,
) -> Result<BandSettings, CliError> {
    let (split, spec) = resolve_split(split, layer, s.prices.len())?;
    let boot = boot.or(layer.get()?).or(BootArgs::defaults());
    let select = select.or(layer.get()?).or(SelectArgs {
        lmax: Some(default_l_max(spec.train_len - 1)),
        ..SelectArgs::defaults()
    });
    let train = train.or(layer.get()?).or(TrainArgs::defaults());
    let band = band.or(layer.get()?).or(BandArgs::defaults());

    let mut cfg = PipelineConfig::new(spec, method, s.seed());
    cfg.reps = band.reps.expect("default");
    cfg.alpha = band.alpha.expect("default");
    cfg.allow_failures = band.allow_failures.expect("default");
    cfg.selector = SelectorSettings {
        reps: band.select_reps.expect("default"),
        l_min: select.lmin.expect("default"),
        l_max: select.lmax,
        t: select.t.expect("default"),
    };
    cfg.block_len = boot.block_len;
    cfg.locality = boot.locality.expect("default");
    cfg.smoothing_window = train.smoothing_window.expect("default");
    cfg.train = train_config(&train, 0);
    cfg.check().map_err(CliError::from)?;
    if cfg.block_len.is_none() {
        cfg.selector_config(spec.train_len - 1)
            .check(spec.train_len - 1)
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(BandSettings {
        split,
        boot,
        select,
        train,
        band,
        cfg,
    })
}

fn record_band(s: &mut Session, b: &BandSettings) {
    s.manifest.record(&b.split);
    s.manifest.record(&b.boot);
    s.manifest.record(&b.select);
    s.manifest.record(&b.train);
    s.manifest.record(&b.band);
}

fn record_run_timings(s: &mut Session, prefix: &str, out: &RunOutput) {
    let t = out.timings;
    for (k, v) in [
        ("selection", t.selection),
        ("resampling", t.resampling),
        ("training", t.training),
        ("band", t.band),
    ] {
        s.clock.insert(format!("{prefix}{k}"), v.as_secs_f64());
    }
}

fn write_run(s: &Session, dir: &str, out: &RunOutput, dump: bool) -> Result<(), CliError> {
    s.write(&format!("{dir}band.csv"), out.band.to_csv())?;
    if let Some(sel) = &out.selection {
        s.write(&format!("{dir}selector_curve.csv"), sel.curve.to_csv())?;
    }
    if dump {
        s.write(&format!("{dir}replicates.csv"), out.predictions_csv())?;
    }
    let mut report = out.report(s.seed());
    if s.timings {
        report.runtime_secs = Some(out.timings.total().as_secs_f64());
    }
    s.write_json(&format!("{dir}report.json"), &report)
}

const BAND_KEYS: [&[&str]; 7] = [
    DataArgs::KEYS,
    SplitArgs::KEYS,
    MethodArg::KEYS,
    BootArgs::KEYS,
    SelectArgs::KEYS,
    TrainArgs::KEYS,
    BandArgs::KEYS,
];

pub fn band(cmd: BandCmd, layer: ConfigLayer) -> Result<(), CliError> {
    layer.check_keys(&BAND_KEYS)?;
    let (mut s, _) = Session::open("band", cmd.data, &cmd.run, &layer)?;
    let method = cmd.method.or(layer.get()?).or(MethodArg::defaults());
    s.manifest.record(&method);
    let b = band_settings(
        &s,
        &layer,
        method.method.expect("default"),
        cmd.split,
        cmd.boot,
        cmd.select,
        cmd.train,
        cmd.band,
    )?;
    record_band(&mut s, &b);

    let out = run(&s.prices, &b.cfg)?;
    record_run_timings(&mut s, "", &out);
    write_run(&s, "", &out, b.band.dump_replicates.unwrap_or(false))?;
    println!(
        "{}: l_opt = {}, comparing factor = {}, coverage = {:.3}",
        out.band.method,
        out.band.l_opt,
        out.band.comparing_factor,
        out.band.coverage()
    );
    s.finish()
}

pub fn compare(cmd: CompareCmd, layer: ConfigLayer) -> Result<(), CliError> {
    let keys: Vec<&[&str]> = BAND_KEYS
        .iter()
        .copied()
        .filter(|k| *k != MethodArg::KEYS)
        .collect();
    layer.check_keys(&keys)?;
    let (mut s, _) = Session::open("compare", cmd.data, &cmd.run, &layer)?;
    let b = band_settings(
        &s,
        &layer,
        Method::Lbb,
        cmd.split,
        cmd.boot,
        cmd.select,
        cmd.train,
        cmd.band,
    )?;
    record_band(&mut s, &b);

    let cmp = compare_methods(&s.prices, &b.cfg)?;
    let dump = b.band.dump_replicates.unwrap_or(false);
    for out in &cmp.runs {
        let prefix = format!("{}/", out.band.method.as_str());
        record_run_timings(&mut s, &prefix, out);
        write_run(&s, &prefix, out, dump)?;
    }
    s.write_json("compare.json", &cmp.report(s.seed()))?;
    for r in &cmp.ranking {
        println!(
            "{}. {} (l = {}): comparing factor = {}",
            r.rank, r.method, r.l_opt, r.comparing_factor
        );
    }
    s.finish()
}

pub fn replay(cmd: ReplayCmd) -> Result<(), CliError> {
    let m = RunManifest::load(&cmd.manifest)?;
    let layer = ConfigLayer::from_map(m.settings.clone());
    let data: DataArgs = layer.get()?;
    let input = data
        .input
        .ok_or_else(|| CliError::Manifest("settings lack `input`".into()))?;
    let bytes =
        fs::read(&input).map_err(|e| CliError::Input(format!("{}: {e}", input.display())))?;
    if sha256_hex(&bytes) != m.input_sha256 {
        return Err(CliError::Manifest(format!(
            "{} no longer matches the recorded SHA-256",
            input.display()
        )));
    }
    let run = RunArgs {
        out: cmd.out,
        config: None,
        jobs: cmd.jobs,
        timings: false,
    };
    match m.command.as_str() {
        "resample" => resample(
            ResampleCmd {
                run,
                ..Default::default()
            },
            layer,
        ),
        "select-block" => select_block(
            SelectBlockCmd {
                run,
                ..Default::default()
            },
            layer,
        ),
        "train" => train(
            TrainCmd {
                run,
                ..Default::default()
            },
            layer,
        ),
        "band" => band(
            BandCmd {
                run,
                ..Default::default()
            },
            layer,
        ),
        "compare" => compare(
            CompareCmd {
                run,
                ..Default::default()
            },
            layer,
        ),
        other => Err(CliError::Manifest(format!("unknown command `{other}`"))),
    }
}
