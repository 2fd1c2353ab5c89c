use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use toepnmf::conv::{bench as run_bench, write_bench_csv, Renderer};
use toepnmf::hrir::{
    load_bundle, load_csv, load_signal, preprocess as run_preprocess, save_bundle, save_signal, HrirSet,
    PreprocessFlags, PreprocessOptions, SignalFormat,
};
use toepnmf::metrics::{evaluate, format_f64};
use toepnmf::seminmf::{train, TrainConfig};
use toepnmf::sparse::{default_sigma_grid, identity_sd, sparsify_model, tune_sigma as run_tune, ResidualTransform};
use toepnmf::FactorModel;

use crate::args::*;
use crate::output::{require_input, Staged};
use crate::{RunRecord, Usage};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn require_non_negative(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(usage(format!("--{name} must be a finite value >= 0, got {v}")));
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<FactorModel> {
    FactorModel::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn load_set(path: &Path) -> Result<HrirSet> {
    load_bundle(path).with_context(|| format!("loading bundle {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn preprocess(a: &PreprocessArgs, record: &RunRecord) -> Result<()> {
    require_input(&a.input, "input")?;
    if !(a.onset_threshold > 0.0 && a.onset_threshold < 1.0) {
        return Err(usage(format!("--onset-threshold must lie in (0, 1), got {}", a.onset_threshold)));
    }
    let from_csv = !a.input.is_dir();
    if from_csv {
        let Some(dirs) = &a.directions else {
            return Err(usage("CSV input needs --directions"));
        };
        require_input(dirs, "directions file")?;
        if a.sample_rate.is_none() {
            return Err(usage("CSV input needs --sample-rate"));
        }
    } else if a.directions.is_some() || a.sample_rate.is_some() {
        return Err(usage("--directions and --sample-rate only apply to CSV input"));
    }
    let out = Staged::dir(&a.out)?;

    let set = if from_csv {
        let dirs = a.directions.as_ref().expect("checked above");
        load_csv(&a.input, dirs, a.sample_rate.expect("checked above"))
            .with_context(|| format!("reading {}", a.input.display()))?
    } else {
        load_set(&a.input)?
    };
    let opts = PreprocessOptions {
        minphase: !a.no_minphase,
        remove_delay: !a.no_delay_removal,
        normalize: !a.no_normalize,
        onset_threshold: a.onset_threshold,
    };
    let done = run_preprocess(&set, &opts)?;
    save_bundle(&done, out.path()?)?;
    out.commit(record)?;
    info!("wrote {} directions x {} taps to {}", done.num_directions(), done.num_taps(), a.out.display());
    Ok(())
}

pub fn factorize(a: &FactorizeArgs, record: &RunRecord) -> Result<()> {
    require_input(&a.bundle, "bundle")?;
    if a.filter_len == 0 || a.iterations == 0 {
        return Err(usage("--filter-len and --iterations must be at least 1"));
    }
    let out = Staged::file(&a.out)?;
    let set = load_set(&a.bundle)?;
    if a.filter_len > set.num_taps() {
        return Err(usage(format!(
            "--filter-len {} exceeds the HRIR length {}",
            a.filter_len,
            set.num_taps()
        )));
    }
    if !set.flags().is_complete() {
        warn!("bundle {} is not fully preprocessed", a.bundle.display());
    }
    let mut cfg = TrainConfig::new(a.filter_len, a.iterations, a.seed);
    cfg.early_stop = a.early_stop;
    let model = train(&set, &cfg)?;
    model.save(out.path()?)?;
    out.commit(record)?;
    info!("final RMSE {:?}", model.training_log().last());
    Ok(())
}

fn transform_of(kind: TransformKind, sigma: Option<f64>) -> Result<ResidualTransform> {
    let need = |sigma: Option<f64>| {
        let s = sigma.ok_or_else(|| usage(format!("--transform {kind:?} needs --sigma").to_lowercase()))?;
        if !(s > 0.0) || !s.is_finite() {
            return Err(usage(format!("--sigma must be positive, got {s}")));
        }
        Ok(s)
    };
    match kind {
        TransformKind::Identity if sigma.is_some() => Err(usage("--sigma does not apply to the identity transform")),
        TransformKind::Identity => Ok(ResidualTransform::Identity),
        TransformKind::Convolution => Ok(ResidualTransform::Convolution { sigma: need(sigma)? }),
        TransformKind::Window => Ok(ResidualTransform::Window { sigma: need(sigma)? }),
    }
}

pub fn sparsify(a: &SparsifyArgs, record: &RunRecord) -> Result<()> {
    let transform = transform_of(a.transform, a.sigma)?;
    require_non_negative("lambda", a.lambda)?;
    require_non_negative("prune", a.prune)?;
    require_input(&a.model, "model")?;
    require_input(&a.bundle, "bundle")?;
    let out = Staged::file(&a.out)?;
    let model = load_model(&a.model)?;
    let set = load_set(&a.bundle)?;
    let sparse = sparsify_model(&model, &set, a.lambda, transform, a.prune)?;
    sparse.save(out.path()?)?;
    out.commit(record)?;
    Ok(())
}

fn matrix_csv(set: &HrirSet) -> String {
    let mut text = String::new();
    for col in set.columns() {
        let row: Vec<String> = col.into_iter().map(format_f64).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}

pub fn reconstruct(a: &ReconstructArgs, record: &RunRecord) -> Result<()> {
    require_input(&a.model, "model")?;
    let as_csv = a.out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let out = if as_csv { Staged::file(&a.out)? } else { Staged::dir(&a.out)? };
    let model = load_model(&a.model)?;
    let set = HrirSet::new(
        model.reconstruct_all(),
        model.sample_rate_hz(),
        model.directions().to_vec(),
        PreprocessFlags::default(),
    )?;
    if as_csv {
        write_text(out.path()?, &matrix_csv(&set))?;
    } else {
        save_bundle(&set, out.path()?)?;
    }
    out.commit(record)?;
    Ok(())
}

pub fn render(a: &RenderArgs, record: &RunRecord) -> Result<()> {
    require_input(&a.model, "model")?;
    require_input(&a.signal, "signal")?;
    let raw = SignalFormat::from_path(&a.signal) == SignalFormat::RawF32;
    if raw && a.sample_rate.is_none() {
        return Err(usage("a raw signal file needs --sample-rate"));
    }
    if !raw && a.sample_rate.is_some() {
        return Err(usage("--sample-rate only applies to raw signal files"));
    }
    let templated = a.out.contains("{j}");
    if a.directions.len() > 1 && !templated {
        return Err(usage("rendering several directions needs `{j}` in --out"));
    }
    let outs = a
        .directions
        .iter()
        .map(|j| Staged::file(Path::new(&a.out.replace("{j}", &j.to_string()))))
        .collect::<Result<Vec<_>>>()?;

    let model = load_model(&a.model)?;
    if let Some(&j) = a.directions.iter().find(|&&j| j >= model.num_directions()) {
        return Err(usage(format!("direction {j} out of range for {} directions", model.num_directions())));
    }
    let signal = load_signal(&a.signal, a.sample_rate.unwrap_or(0))?;
    if signal.sample_rate_hz() != model.sample_rate_hz() {
        warn!(
            "signal is {} Hz but the model was trained at {} Hz",
            signal.sample_rate_hz(),
            model.sample_rate_hz()
        );
    }
    let mut renderer = Renderer::new(&model, &signal, a.mode.into())?;
    let rendered = a.directions.iter().map(|&j| renderer.render(j)).collect::<toepnmf::Result<Vec<_>>>()?;
    for (out, sig) in outs.iter().zip(&rendered) {
        save_signal(sig, out.path()?)?;
    }
    for out in outs {
        out.commit(record)?;
    }
    info!("render work: {:?}", renderer.stats());
    Ok(())
}

pub fn metrics(a: &MetricsArgs, record: &RunRecord) -> Result<()> {
    require_non_negative("prune", a.prune)?;
    require_input(&a.model, "model")?;
    require_input(&a.bundle, "bundle")?;
    let out = Staged::file(&a.out)?;
    let model = load_model(&a.model)?;
    let set = load_set(&a.bundle)?;
    let report = evaluate(&model, &set, a.prune)?;
    let file = fs::File::create(out.path()?).with_context(|| format!("writing {}", a.out.display()))?;
    report.write_csv(BufWriter::new(file))?;
    out.commit(record)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        rmse_global: f64,
        all: &'a toepnmf::metrics::Aggregates,
        horizontal: &'a toepnmf::metrics::Aggregates,
        median: &'a toepnmf::metrics::Aggregates,
    }
    let summary = Summary {
        rmse_global: report.rmse_global,
        all: &report.aggregates,
        horizontal: &report.horizontal,
        median: &report.median,
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

pub fn tune_sigma(a: &TuneSigmaArgs, record: &RunRecord) -> Result<()> {
    require_non_negative("lambda", a.lambda)?;
    require_non_negative("prune", a.prune)?;
    if let Some(s) = a.grid.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
        return Err(usage(format!("--grid values must be positive, got {s}")));
    }
    require_input(&a.model, "model")?;
    require_input(&a.bundle, "bundle")?;
    let out = Staged::file(&a.out)?;
    let model = load_model(&a.model)?;
    let set = load_set(&a.bundle)?;
    let directions: Vec<usize> = if a.directions.is_empty() {
        (0..set.num_directions()).collect()
    } else {
        a.directions.clone()
    };
    if let Some(&j) = directions.iter().find(|&&j| j >= set.num_directions()) {
        return Err(usage(format!("direction {j} out of range for {} directions", set.num_directions())));
    }
    let grid = if a.grid.is_empty() { default_sigma_grid() } else { a.grid.clone() };
    let rows = directions
        .par_iter()
        .map(|&j| {
            let choice = run_tune(&model, &set, j, &grid, a.lambda, a.prune)?;
            let id = identity_sd(&model, &set, j, a.lambda, a.prune)?;
            Ok((j, choice, id))
        })
        .collect::<toepnmf::Result<Vec<_>>>()?;

    let sd = |v: f64| if v.is_finite() { format_f64(v) } else { String::new() };
    let mut text = String::from("direction_index,az_deg,el_deg,sigma,sd_db,nnze,identity_sd_db\n");
    for (j, choice, id) in &rows {
        let d = set.directions()[*j];
        writeln!(
            text,
            "{j},{},{},{},{},{},{}",
            format_f64(d.azimuth_deg),
            format_f64(d.elevation_deg),
            format_f64(choice.sigma),
            sd(choice.sd_db),
            choice.nnze,
            id.map(format_f64).unwrap_or_default()
        )?;
    }
    write_text(out.path()?, &text)?;
    out.commit(record)?;
    Ok(())
}

pub fn bench(a: &BenchArgs, record: &RunRecord) -> Result<()> {
    if a.repeats < 3 {
        return Err(usage(format!("--repeats must be at least 3, got {}", a.repeats)));
    }
    if a.signal_len == 0 || a.nnze.contains(&0) {
        return Err(usage("--signal-len and --nnze values must be at least 1"));
    }
    let out = Staged::file(&a.out)?;
    let rows = run_bench(a.signal_len, &a.nnze, a.repeats, a.seed)?;
    let file = fs::File::create(out.path()?).with_context(|| format!("writing {}", a.out.display()))?;
    write_bench_csv(&rows, BufWriter::new(file))?;
    out.commit(record)?;
    Ok(())
}
