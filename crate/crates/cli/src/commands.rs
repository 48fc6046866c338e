use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use unlinked_deconv::conditional::{unconditional_baselines, ConditionalEngine, FyVariant};
use unlinked_deconv::data::{project, sample_setting, Covariates, Dataset, Setting};
use unlinked_deconv::density::{default_bandwidth, kde, DensityEstimate};
use unlinked_deconv::dlse::{dist_to_solution_set, fit_dlse, FitOptions, FitResult};
use unlinked_deconv::experiments::{
    run_comparison, run_mse_grid, run_rate_study, ExperimentConfig, ExperimentKind, Scale,
};
use unlinked_deconv::io::{self, BatchRow, DataMeta};
use unlinked_deconv::kernel::KernelSpec;
use unlinked_deconv::report;
use unlinked_deconv::{CriterionContext, EmpiricalDist, Error, NoiseModel};

use crate::{
    ExperimentArg, ExperimentArgs, FitArgs, FyArg, GenArgs, InferArgs, IntervalArg, NoiseArg, ScaleArg,
};

pub enum Status {
    Done,
    NotConverged,
}

fn check_file(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        bail!("{} already exists (use --force to overwrite)", path.display());
    }
    Ok(())
}

fn prepare_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let occupied = std::fs::read_dir(dir)?.next().is_some();
        if occupied && !force {
            bail!("output directory {} is not empty (use --force to overwrite)", dir.display());
        }
    } else {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn parse_setting(s: &str) -> Result<Setting> {
    s.parse::<Setting>().map_err(|e| anyhow!(e))
}

fn noise_of(kind: NoiseArg, sigma: f64) -> Result<NoiseModel> {
    Ok(match kind {
        NoiseArg::Gaussian => NoiseModel::gaussian(sigma)?,
        NoiseArg::Laplace => NoiseModel::laplace(sigma)?,
    })
}

fn fy_of(arg: FyArg) -> FyVariant {
    match arg {
        FyArg::Empirical => FyVariant::Empirical,
        FyArg::Gauss => FyVariant::GaussConv,
        FyArg::Integrated => FyVariant::Integrated,
    }
}

fn load_dataset(x: &Option<PathBuf>, y: &Option<PathBuf>, synth: &crate::SyntheticArgs, sigma: f64) -> Result<Dataset> {
    match (x, y, &synth.setting) {
        (Some(x), Some(y), _) => {
            let cov = io::read_covariates(x)?;
            let resp = io::read_column(y)?;
            let mut ds = Dataset::new(cov, resp)?;
            // A sidecar from `gen` identifies the setting, enabling the distance report.
            let meta = x.parent().map(|d| d.join("meta.json")).filter(|p| p.exists());
            if let Some(meta) = meta.and_then(|p| io::read_json::<DataMeta>(&p).ok()) {
                if meta.n == ds.n() && meta.d == ds.d() {
                    ds.setting = meta.setting;
                }
            }
            Ok(ds)
        }
        (None, None, Some(s)) => {
            let n = synth.n.ok_or_else(|| anyhow!("--n is required with --setting"))?;
            Ok(sample_setting(parse_setting(s)?, n, sigma, synth.seed, false)?)
        }
        _ => bail!("give either --x and --y, or --setting with --n"),
    }
}

pub fn gen(a: &GenArgs, force: bool) -> Result<Status> {
    let setting = parse_setting(&a.setting)?;
    let ds = sample_setting(setting, a.n, a.sigma, a.seed, a.linked)?;
    prepare_dir(&a.out_dir, force)?;
    io::write_covariates(&a.out_dir.join("X.csv"), &ds.covariates)?;
    io::write_column(&a.out_dir.join("Y.csv"), "y", &ds.responses)?;
    let meta = DataMeta {
        setting: Some(setting),
        n: a.n,
        d: setting.dim(),
        sigma: Some(a.sigma),
        seed: Some(a.seed),
        beta0: Some(setting.beta0().to_vec()),
    };
    io::write_json(&a.out_dir.join("meta.json"), &meta)?;
    Ok(Status::Done)
}

#[derive(Debug, Serialize, Deserialize)]
struct FitOutput {
    beta_hat: Vec<f64>,
    criterion_value: f64,
    converged: bool,
    n: usize,
    d: usize,
    sigma: f64,
    noise: NoiseModel,
    setting: Option<Setting>,
    seed: u64,
    /// Distance to the solution set, for synthetic data.
    dist_to_solution_set: Option<f64>,
    norm_beta_hat: f64,
    starts_tried: usize,
    best_start_index: usize,
    evaluations: usize,
    warnings: Vec<String>,
}

fn run_fit(ds: &Dataset, noise: NoiseModel, opts: &FitOptions, seed: u64) -> Result<FitResult> {
    let ctx = CriterionContext::new(ds, noise)?;
    Ok(fit_dlse(&ctx, opts, seed)?)
}

pub fn fit(a: &FitArgs, force: bool) -> Result<Status> {
    if let Some(out) = &a.out {
        check_file(out, force)?;
    }
    let data = &a.data;
    let ds = load_dataset(&data.x, &data.y, &data.synthetic, data.sigma)?;
    let noise = noise_of(data.noise, data.sigma)?;
    let base = if a.exhaustive { FitOptions::exhaustive() } else { FitOptions::default() };
    let opts = FitOptions { n_starts: a.starts, ..base };
    let fit = run_fit(&ds, noise, &opts, data.synthetic.seed)?;
    let out = FitOutput {
        norm_beta_hat: fit.beta_hat.iter().map(|b| b * b).sum::<f64>().sqrt(),
        dist_to_solution_set: ds.setting.map(|s| dist_to_solution_set(&fit.beta_hat, s)).transpose()?,
        beta_hat: fit.beta_hat,
        criterion_value: fit.criterion_value,
        converged: fit.converged,
        n: ds.n(),
        d: ds.d(),
        sigma: data.sigma,
        noise,
        setting: ds.setting,
        seed: data.synthetic.seed,
        starts_tried: fit.starts_tried,
        best_start_index: fit.best_start_index,
        evaluations: fit.evaluations,
        warnings: fit.warnings,
    };
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    match &a.out {
        Some(path) => io::write_json(path, &out)?,
        None => println!("{}", serde_json::to_string_pretty(&out)?),
    }
    Ok(if out.converged { Status::Done } else { Status::NotConverged })
}

/// Projected atoms `β̂ᵀXᵢ` from a saved fit or a fit on the fly.
fn infer_atoms(a: &InferArgs, noise: NoiseModel) -> Result<EmpiricalDist> {
    if let Some(path) = &a.fit_json {
        let fit: FitOutput = io::read_json(path).with_context(|| format!("reading {}", path.display()))?;
        let cov: Covariates = match (&a.x, &a.setting) {
            (Some(x), _) => io::read_covariates(x)?,
            (None, Some(s)) => {
                let n = a.n.ok_or_else(|| anyhow!("--n is required with --setting"))?;
                sample_setting(parse_setting(s)?, n, a.sigma, a.seed, false)?.covariates
            }
            (None, None) => bail!("--fit-json needs the covariates via --x or --setting/--n"),
        };
        return Ok(project(&cov, &fit.beta_hat)?);
    }
    let synth = crate::SyntheticArgs { setting: a.setting.clone(), n: a.n, seed: a.seed };
    let ds = load_dataset(&a.x, &a.y, &synth, a.sigma)?;
    let fit = run_fit(&ds, noise, &FitOptions::default(), a.seed)?;
    if !fit.converged {
        eprintln!("warning: fit did not converge; continuing with the best start");
    }
    Ok(project(&ds.covariates, &fit.beta_hat)?)
}

pub fn infer(a: &InferArgs, force: bool) -> Result<Status> {
    if let Some(out) = &a.out {
        check_file(out, force)?;
    }
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        bail!("--alpha must lie in (0, 1)");
    }
    let mut y0s = a.at.clone();
    if let Some(p) = &a.y0 {
        y0s.extend(io::read_column(p)?);
    }
    if y0s.is_empty() {
        bail!("no responses to condition on (give --y0 FILE or --at VALUES)");
    }
    let noise = NoiseModel::gaussian(a.sigma)?;
    let fz: DensityEstimate = match a.oracle_gaussian {
        Some(tau) => DensityEstimate::gaussian(0.0, tau)?,
        None => {
            let atoms = infer_atoms(a, noise)?;
            let h = match a.bandwidth {
                Some(h) => h,
                None => {
                    let bw = default_bandwidth(&atoms)?;
                    if let Some(w) = &bw.warning {
                        eprintln!("warning: {w}");
                    }
                    bw.value
                }
            };
            let fz = kde(&atoms, KernelSpec::gaussian(h)?)?;
            let base = unconditional_baselines(&atoms, &fz, a.alpha)?;
            eprintln!(
                "unconditional: mean {} mode {} interval [{}, {}]",
                base.mean, base.mode, base.lo, base.hi
            );
            fz
        }
    };
    let engine = ConditionalEngine::new(&fz, noise, fy_of(a.fy))?;
    if let Some(dir) = &a.density_dir {
        prepare_dir(dir, force)?;
        let (lo, hi) = fz.support_hint();
        io::write_density(&dir.join("fz.csv"), &fz.tabulate(lo, hi, 1024))?;
    }

    let mut rows = Vec::with_capacity(y0s.len());
    let mut flagged = 0usize;
    for (k, &y0) in y0s.iter().enumerate() {
        let cd = match engine.condition(y0) {
            Ok(cd) => cd,
            Err(Error::OutsideSupport { .. }) => {
                flagged += 1;
                eprintln!("warning: response {y0} lies outside the estimated support");
                rows.push(BatchRow { y0, summary: None });
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let ci = match a.interval {
            IntervalArg::Quadrature => cd.credible_interval(a.alpha)?,
            IntervalArg::Importance => cd.credible_interval_is(a.alpha, a.n_is, a.seed.wrapping_add(k as u64))?,
        };
        let summary = unlinked_deconv::conditional::ConditionalSummary {
            y0,
            mean: cd.mean(),
            mode: cd.mode(),
            lo: ci.lo,
            hi: ci.hi,
        };
        if let Some(dir) = &a.density_dir {
            let (lo, hi) = cd.support_hint();
            let pts: Vec<(f64, f64)> = (0..512)
                .map(|i| {
                    let z = lo + (hi - lo) * i as f64 / 511.0;
                    (z, cd.density(z))
                })
                .collect();
            io::write_density(&dir.join(format!("conditional_{k:04}.csv")), &pts)?;
        }
        rows.push(BatchRow { y0, summary: Some(summary) });
    }
    match &a.out {
        Some(path) => io::write_batch(path, a.alpha, &rows)?,
        None => print!("{}", io::format_batch(a.alpha, &rows)),
    }
    if flagged > 0 {
        eprintln!("{flagged} of {} responses flagged", y0s.len());
    }
    Ok(Status::Done)
}

fn merge_json(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                merge_json(b.entry(k).or_insert(serde_json::Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

fn experiment_config(a: &ExperimentArgs) -> Result<ExperimentConfig> {
    let kind = match a.experiment {
        ExperimentArg::Rates => ExperimentKind::Rates,
        ExperimentArg::Comparison => ExperimentKind::Comparison,
        ExperimentArg::MseGrid => ExperimentKind::MseGrid,
    };
    let scale = match a.scale {
        ScaleArg::Desk => Scale::Desk,
        ScaleArg::Full => Scale::Full,
    };
    let file: Option<serde_json::Value> = match &a.config {
        Some(p) => Some(
            serde_json::from_str(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
                .with_context(|| format!("parsing {}", p.display()))?,
        ),
        None => None,
    };
    let setting = match (&a.setting, file.as_ref().and_then(|f| f.get("setting"))) {
        (Some(s), _) => parse_setting(s)?,
        (None, Some(v)) => serde_json::from_value(v.clone()).context("config field `setting`")?,
        (None, None) => Setting::A,
    };
    let mut cfg = ExperimentConfig::preset(kind, scale, setting);
    if let Some(f) = file {
        let mut v = serde_json::to_value(&cfg)?;
        merge_json(&mut v, f);
        cfg = serde_json::from_value(v).context("config file does not match the experiment configuration")?;
        cfg.setting = setting;
    }
    if let Some(r) = a.reps {
        cfg.reps = r;
    }
    if let Some(r) = a.rep_offset {
        cfg.rep_offset = r;
    }
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    if let Some(n) = &a.n_list {
        cfg.n_list = n.clone();
    }
    if let Some(s) = &a.sigma2_list {
        cfg.sigma2_list = s.clone();
    }
    if let Some(t) = a.test_size {
        cfg.test_size = t;
    }
    if let Some(m) = a.reference_size {
        cfg.reference_size = m;
    }
    if let Some(al) = a.alpha {
        cfg.alpha = al;
    }
    if let Some(fy) = a.fy {
        cfg.fy_variant = fy_of(fy);
    }
    if a.bandwidth.is_some() {
        cfg.bandwidth = a.bandwidth;
    }
    if kind == ExperimentKind::Rates && cfg.n_list.len() < 2 {
        bail!("the rate study needs at least two sample sizes");
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct Summary<'a, R: Serialize, S: Serialize> {
    experiment: &'static str,
    config: &'a ExperimentConfig,
    rows: &'a R,
    slopes: Option<S>,
}

pub fn experiment(a: &ExperimentArgs, force: bool) -> Result<Status> {
    let cfg = experiment_config(a)?;
    prepare_dir(&a.out_dir, force)?;
    let dir = &a.out_dir;
    match a.experiment {
        ExperimentArg::Rates => {
            let res = run_rate_study(&cfg)?;
            report::tidy_table(&report::rate_tidy(&res)).write(&dir.join("tidy.csv"))?;
            report::slopes_table(&res).write(&dir.join("slopes.csv"))?;
            if a.records {
                report::rate_records_table(&res).write(&dir.join("records.csv"))?;
            }
            let pts: Vec<(f64, f64)> = res.rows.iter().map(|r| (r.n as f64, r.moments[0])).collect();
            let svg = report::loglog_svg(
                &format!("Setting ({}): mean W1 against n", res.setting),
                "sample size n",
                "mean W1",
                &pts,
                res.slopes.map(|s| s.m1),
            );
            std::fs::write(dir.join("rates.svg"), svg)?;
            let summary = Summary { experiment: "rates", config: &cfg, rows: &res.rows, slopes: res.slopes };
            io::write_json(&dir.join("summary.json"), &summary)?;
            if let Some(s) = res.slopes {
                println!("slopes: m1 {:.3} m2 {:.3} m3 {:.3} q99 {:.3}", s.m1, s.m2, s.m3, s.q99);
            }
        }
        ExperimentArg::Comparison => {
            let res = run_comparison(&cfg)?;
            report::tidy_table(&report::comparison_tidy(&res)).write(&dir.join("tidy.csv"))?;
            report::comparison_table(&res).write(&dir.join("comparison.csv"))?;
            if a.records {
                report::prediction_records_table(&res.records).write(&dir.join("records.csv"))?;
            }
            let summary = Summary::<_, ()> { experiment: "comparison", config: &cfg, rows: &res.rows, slopes: None };
            io::write_json(&dir.join("summary.json"), &summary)?;
            print!("{}", report::comparison_table(&res).to_csv());
        }
        ExperimentArg::MseGrid => {
            let res = run_mse_grid(&cfg)?;
            report::tidy_table(&report::mse_tidy(&res)).write(&dir.join("tidy.csv"))?;
            report::mse_table(&res).write(&dir.join("mse.csv"))?;
            if a.records {
                report::prediction_records_table(&res.records).write(&dir.join("records.csv"))?;
            }
            let summary = Summary::<_, ()> { experiment: "mse-grid", config: &cfg, rows: &res.rows, slopes: None };
            io::write_json(&dir.join("summary.json"), &summary)?;
            print!("{}", report::mse_table(&res).to_csv());
        }
    }
    Ok(Status::Done)
}
