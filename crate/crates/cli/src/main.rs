//! Command-line front end for feature/clutter classification on linear networks.
//!
//! Exit codes: 0 success, 2 input error, 3 degenerate fit, 4 partial results.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use netclutter::design::DesignFile;
use netclutter::io::{self, ErrorReport, FitReport, NetworkFormat, PointFormat, Provenance, SCHEMA_VERSION};
use netclutter::kselect::{KPolicy, DEFAULT_K_MAX};
use netclutter::mixture::{EmOptions, Label};
use netclutter::network::{build_network, default_merge_tol, extract_subnetwork, LinearNetwork};
use netclutter::pipeline::{classify_partitioned, run_pipeline, PipelineOptions, ZoneStatus};
use netclutter::simulation::{rep_rng, rpoislpp, run_design, simulate_layers};
use netclutter::{geodesics, kselect, plot, synthetic, Error, Result};
use serde::Serialize;
use serde_json::json;

#[derive(Debug, Parser, Serialize)]
#[command(name = "netclutter", version, about = "Feature/clutter classification of point patterns on linear networks")]
struct Cli {
    /// Seed for simulation (overrides the seed of a design file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Format of tabular output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand, Serialize)]
enum Command {
    /// Simulate a point pattern from a design file or a single Poisson layer.
    Simulate(SimulateArgs),
    /// K-th nearest-neighbour distances and volumes for a pattern.
    Volumes(VolumesArgs),
    /// Entropy curve over K and its changepoint.
    SelectK(SelectKArgs),
    /// Full classification pipeline.
    Classify(ClassifyArgs),
    /// Classify each zone of a segment partition independently.
    ClassifyZones(ZonesArgs),
    /// Classification rates over simulated replicates of one or more designs.
    Rates(RatesArgs),
    /// Volume histograms over a range of K.
    Hist(HistArgs),
}

#[derive(Debug, Args, Serialize)]
struct NetworkArgs {
    /// Network file (GeoJSON or CSV x1,y1,x2,y2) or `synthetic:<chicago|dendrite|antonio>`.
    #[arg(long)]
    network: String,
    #[arg(long, value_enum)]
    network_format: Option<NetFmt>,
    /// Vertex merge tolerance (default: 1e-6 of the bounding-box diagonal).
    #[arg(long)]
    merge_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum NetFmt {
    Csv,
    Geojson,
}

#[derive(Debug, Args, Serialize)]
struct PointArgs {
    #[command(flatten)]
    net: NetworkArgs,
    /// Point file: CSV (x,y or segment_id,offset) or GeoJSON points.
    #[arg(long)]
    points: PathBuf,
    #[arg(long, value_enum)]
    points_format: Option<NetFmt>,
    /// Maximum snapping distance for planar points.
    #[arg(long, default_value_t = io::DEFAULT_SNAP_TOL)]
    snap_tol: f64,
    /// Replace zero volumes from co-located points by this value.
    #[arg(long)]
    volume_floor: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct EmArgs {
    /// EM stopping tolerance on the mean per-point log-likelihood change.
    #[arg(long, default_value_t = 1e-8)]
    em_tol: f64,
    #[arg(long, default_value_t = 1000)]
    em_max_iter: usize,
}

impl EmArgs {
    fn options(&self) -> EmOptions {
        EmOptions { tol: self.em_tol, max_iter: self.em_max_iter }
    }
}

#[derive(Debug, Args, Serialize)]
struct PolicyArgs {
    /// Use this K verbatim instead of choosing it automatically.
    #[arg(long)]
    k: Option<usize>,
    /// Largest K tried by automatic selection.
    #[arg(long, default_value_t = DEFAULT_K_MAX)]
    k_max: usize,
}

impl PolicyArgs {
    fn policy(&self) -> Result<KPolicy> {
        let p = match self.k {
            Some(k) => KPolicy::Fixed(k),
            None => KPolicy::Auto { k_max: self.k_max },
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    /// Design file; simulates replicate `--rep` of it.
    #[arg(long, conflicts_with_all = ["lambda", "network"])]
    design: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    rep: usize,
    /// Network for a single clutter layer (with --lambda).
    #[arg(long, requires = "lambda")]
    network: Option<String>,
    /// Intensity per unit length of a single layer.
    #[arg(long)]
    lambda: Option<f64>,
    /// Named region of a synthetic network to simulate on.
    #[arg(long, requires = "lambda")]
    region: Option<String>,
    /// Output point file (segment_id,offset,label).
    #[arg(long)]
    out: PathBuf,
    /// Also write the network segments (x1,y1,x2,y2) here.
    #[arg(long)]
    network_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct VolumesArgs {
    #[command(flatten)]
    pts: PointArgs,
    #[arg(long)]
    k: usize,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SelectKArgs {
    #[command(flatten)]
    pts: PointArgs,
    #[arg(long, default_value_t = DEFAULT_K_MAX)]
    k_max: usize,
    #[command(flatten)]
    em: EmArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ClassifyArgs {
    #[command(flatten)]
    pts: PointArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    #[command(flatten)]
    em: EmArgs,
    /// Report results even when a mixture component collapses.
    #[arg(long)]
    allow_degenerate: bool,
    /// Abort a whole-network run after this many seconds.
    #[arg(long)]
    time_budget: Option<f64>,
    /// Histogram K range, e.g. 27..32.
    #[arg(long)]
    hist: Option<String>,
    #[arg(long, default_value_t = netclutter::pipeline::DEFAULT_HIST_BINS)]
    bins: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ZonesArgs {
    #[command(flatten)]
    pts: PointArgs,
    /// CSV segment_id,zone covering every segment.
    #[arg(long)]
    partition: PathBuf,
    #[command(flatten)]
    policy: PolicyArgs,
    #[command(flatten)]
    em: EmArgs,
    /// Keep zones whose mixture component collapses instead of failing them.
    #[arg(long)]
    allow_degenerate: bool,
    /// Write results when some zones fail (exit code 4).
    #[arg(long)]
    allow_partial: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct RatesArgs {
    /// One or more design files; one table block per design.
    #[arg(long, required = true, num_args = 1..)]
    design: Vec<PathBuf>,
    /// Override the number of replicates.
    #[arg(long)]
    reps: Option<usize>,
    /// Override the K policies, e.g. fixed:5,fixed:10,auto:35.
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<String>>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct HistArgs {
    #[command(flatten)]
    pts: PointArgs,
    /// K range, e.g. 27..32.
    #[arg(long)]
    k: String,
    #[arg(long, default_value_t = netclutter::pipeline::DEFAULT_HIST_BINS)]
    bins: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Successful outcome with a non-zero status.
struct Partial;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not configure thread pool: {e}");
        }
    }
    match run(&cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(Partial)) => ExitCode::from(4),
        Err(e) => {
            let report = ErrorReport::new(&e);
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| e.to_string()));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<Option<Partial>> {
    let prov = Provenance::of(cli, cli.seed);
    match &cli.command {
        Command::Simulate(a) => simulate(cli, a, &prov).map(|_| None),
        Command::Volumes(a) => volumes(cli, a, &prov).map(|_| None),
        Command::SelectK(a) => select_k(a, &prov).map(|_| None),
        Command::Classify(a) => classify(a, &prov).map(|_| None),
        Command::ClassifyZones(a) => classify_zones(cli, a, &prov),
        Command::Rates(a) => rates(cli, a, &prov).map(|_| None),
        Command::Hist(a) => hist(a, &prov).map(|_| None),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn load_network(a: &NetworkArgs) -> Result<(LinearNetwork, BTreeMap<String, Vec<usize>>)> {
    if let Some(name) = a.network.strip_prefix("synthetic:") {
        let s = synthetic::by_name(name, 1)?;
        return Ok((s.network, s.regions));
    }
    let fmt = a.network_format.map(|f| match f {
        NetFmt::Csv => NetworkFormat::Csv,
        NetFmt::Geojson => NetworkFormat::GeoJson,
    });
    let raw = io::read_raw_network(Path::new(&a.network), fmt)?;
    let tol = a.merge_tol.unwrap_or_else(|| default_merge_tol(&raw.segments));
    let net = build_network(&raw.segments, tol)?;
    if net.dropped_zero_length() > 0 {
        log::warn!("dropped {} zero-length segments", net.dropped_zero_length());
    }
    if let Some(unit) = &raw.unit {
        log::info!("network length unit: {unit}");
    }
    Ok((net, BTreeMap::new()))
}

fn load_points(a: &PointArgs) -> Result<(LinearNetwork, io::PointSet)> {
    let (net, _) = load_network(&a.net)?;
    let fmt = a.points_format.map(|f| match f {
        NetFmt::Csv => PointFormat::Csv,
        NetFmt::Geojson => PointFormat::GeoJson,
    });
    let ps = io::read_points(&net, &a.points, fmt, a.snap_tol)?;
    if !ps.rejected.is_empty() {
        log::warn!("{} points farther than {} from the network were dropped", ps.rejected.len(), a.snap_tol);
        for (row, d) in &ps.rejected {
            log::info!("rejected row {row} at distance {d}");
        }
    }
    Ok((net, ps))
}

fn parse_range(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Validation(format!("bad K range {s:?}; expected A..B or a single K"));
    let ks = match s.split_once("..") {
        Some((a, b)) => {
            let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            (a..=b).collect::<Vec<_>>()
        }
        None => vec![s.trim().parse().map_err(|_| bad())?],
    };
    if ks.is_empty() || ks.contains(&0) {
        return Err(bad());
    }
    Ok(ks)
}

fn simulate(cli: &Cli, a: &SimulateArgs, prov: &Provenance) -> Result<()> {
    let mut prov = prov.clone();
    let (net, pattern) = match (&a.design, a.lambda) {
        (Some(path), _) => {
            let file = DesignFile::from_path(path)?;
            let loaded = file.load_network(path.parent().unwrap_or(Path::new(".")))?;
            let design = file.design(&loaded)?;
            let seed = cli.seed.unwrap_or(design.seed);
            prov.seed = Some(seed);
            let mut rng = rep_rng(seed, a.rep);
            let pattern = simulate_layers(&design.layers, &mut rng)?;
            (loaded.network, pattern)
        }
        (None, Some(lambda)) => {
            let source = a.network.clone().unwrap_or_else(|| "synthetic:chicago".into());
            let (net, regions) = load_network(&NetworkArgs { network: source, network_format: None, merge_tol: None })?;
            let region = match &a.region {
                None => net.full(),
                Some(r) => {
                    let ids = regions.get(r).ok_or_else(|| Error::Validation(format!("unknown region {r:?}")))?;
                    extract_subnetwork(&net, &ids.iter().copied().collect(), false)?
                }
            };
            let seed = cli.seed.unwrap_or(1);
            prov.seed = Some(seed);
            let mut rng = rep_rng(seed, a.rep);
            let points = rpoislpp(&region, lambda, &mut rng)?;
            let truth = vec![Label::Clutter; points.len()];
            drop(region);
            (net, netclutter::LabelledPattern { points, truth })
        }
        (None, None) => return Err(Error::Validation("simulate needs --design or --lambda".into())),
    };
    let mut w = create(&a.out)?;
    prov.write_comment(&mut w)?;
    io::write_points_csv(&pattern.points, Some(&pattern.truth), w)?;
    if let Some(p) = &a.network_out {
        io::write_network_csv(&net, create(p)?)?;
    }
    let n_feature = pattern.truth.iter().filter(|l| l.is_feature()).count();
    println!(
        "{}",
        json!({"schema_version": SCHEMA_VERSION, "n": pattern.len(), "n_feature": n_feature,
               "network_length": net.total_length(), "config_hash": prov.config_hash, "seed": prov.seed})
    );
    Ok(())
}

fn volumes(cli: &Cli, a: &VolumesArgs, prov: &Provenance) -> Result<()> {
    let (net, ps) = load_points(&a.pts)?;
    if ps.points.len() <= a.k {
        return Err(Error::InsufficientPoints { have: ps.points.len(), need: a.k + 1 });
    }
    let mut samples = geodesics::knn_volumes(&net, &ps.points, a.k)?;
    for s in &mut samples {
        if s.s_k <= 0.0 {
            match a.pts.volume_floor {
                Some(f) => s.s_k = f,
                None => return Err(Error::ZeroVolume { point: s.point_index, k: a.k }),
            }
        }
    }
    let w = output(a.out.as_deref())?;
    match cli.format {
        Format::Csv => io::write_volumes_csv(&samples, w, Some(prov)),
        Format::Json => {
            let mut w = w;
            serde_json::to_writer_pretty(
                &mut w,
                &json!({"schema_version": SCHEMA_VERSION, "K": a.k, "config_hash": prov.config_hash,
                        "seed": prov.seed, "volumes": samples}),
            )?;
            writeln!(w)?;
            Ok(())
        }
    }
}

fn segmented_json(sel: &kselect::KSelection, prov: &Provenance) -> serde_json::Value {
    let fit = sel.fit.as_ref();
    json!({
        "schema_version": SCHEMA_VERSION,
        "psi": fit.map(|f| f.psi), "beta": fit.map(|f| f.beta), "gamma": fit.map(|f| f.gamma),
        "rss": fit.map(|f| f.rss), "k_hat": sel.k,
        "flat": fit.map(|f| f.flat), "suspicious": fit.map(|f| f.suspicious),
        "skipped": sel.curve.as_ref().map(|c| c.skipped.clone()).unwrap_or_default(),
        "config_hash": prov.config_hash, "seed": prov.seed,
    })
}

fn write_selection(out: &Path, sel: &kselect::KSelection, prov: &Provenance) -> Result<()> {
    if let Some(curve) = &sel.curve {
        io::write_entropy_csv(curve, create(&out.join("entropy.csv"))?, Some(prov))?;
        fs::write(out.join("entropy.svg"), plot::entropy_svg(curve, sel.fit.as_ref()))?;
        write_json(&out.join("segmented.json"), &segmented_json(sel, prov))?;
        if sel.fit.is_some_and(|f| f.suspicious) {
            log::warn!("entropy curve rises before the changepoint; K = {} may be unreliable", sel.k);
        }
    }
    Ok(())
}

fn write_histograms(out: &Path, hists: &[io::Histogram], prov: &Provenance) -> Result<()> {
    io::write_histograms_csv(hists, create(&out.join("histograms.csv"))?, Some(prov))?;
    fs::write(out.join("histograms.svg"), plot::histograms_svg(hists))?;
    Ok(())
}

fn select_k(a: &SelectKArgs, prov: &Provenance) -> Result<()> {
    let (net, ps) = load_points(&a.pts)?;
    let opts = PipelineOptions {
        policy: KPolicy::Auto { k_max: a.k_max },
        em: a.em.options(),
        volume_floor: a.pts.volume_floor,
        ..Default::default()
    };
    opts.validate()?;
    if ps.points.len() < opts.min_points() {
        return Err(Error::InsufficientPoints { have: ps.points.len(), need: opts.min_points() });
    }
    let profiles = geodesics::insert_points(&net, &ps.points)?.profiles(a.k_max, None)?;
    let sel = kselect::select_k_from_profiles(&profiles, opts.policy, opts.em, opts.volume_floor)?;
    fs::create_dir_all(&a.out)?;
    write_selection(&a.out, &sel, prov)?;
    println!("{}", segmented_json(&sel, prov));
    Ok(())
}

fn classify(a: &ClassifyArgs, prov: &Provenance) -> Result<()> {
    let (net, ps) = load_points(&a.pts)?;
    let opts = PipelineOptions {
        policy: a.policy.policy()?,
        em: a.em.options(),
        volume_floor: a.pts.volume_floor,
        allow_degenerate: a.allow_degenerate,
        time_budget: a.time_budget,
        hist_ks: a.hist.as_deref().map(parse_range).transpose()?.unwrap_or_default(),
        hist_bins: a.bins,
    };
    let r = run_pipeline(&net, &ps.points, &opts)?;
    fs::create_dir_all(&a.out)?;
    let cls = &r.classification;
    let report = FitReport::new(&cls.fit, cls.n_features(), prov.clone());
    write_json(&a.out.join("fit.json"), &report)?;
    io::write_labelled_csv(
        &net,
        &ps.points,
        &r.volumes,
        &cls.fit.delta,
        &cls.labels,
        create(&a.out.join("labelled.csv"))?,
        Some(prov),
    )?;
    write_selection(&a.out, &r.selection, prov)?;
    if !r.histograms.is_empty() {
        write_histograms(&a.out, &r.histograms, prov)?;
    }
    if cls.degenerate {
        log::warn!("mixture fit is degenerate; labels are unreliable");
    }
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn classify_zones(cli: &Cli, a: &ZonesArgs, prov: &Provenance) -> Result<Option<Partial>> {
    let (net, ps) = load_points(&a.pts)?;
    let zones = io::read_partition_csv(&net, File::open(&a.partition)?)?;
    let opts = PipelineOptions {
        policy: a.policy.policy()?,
        em: a.em.options(),
        volume_floor: a.pts.volume_floor,
        allow_degenerate: a.allow_degenerate,
        ..Default::default()
    };
    let result = classify_partitioned(&net, &ps.points, &zones, &opts)?;
    let failed: Vec<_> = result.failed().collect();
    for z in result.skipped() {
        log::warn!("zone {} skipped: {}", z.zone, z.message.as_deref().unwrap_or_default());
    }
    if let Some(first) = failed.first() {
        if !a.allow_partial {
            let msg = failed
                .iter()
                .map(|z| format!("{}: {}", z.zone, z.message.as_deref().unwrap_or_default()))
                .collect::<Vec<_>>()
                .join("; ");
            let e = match first.exit_code {
                Some(3) => Error::Degenerate(format!("zones failed ({msg})")),
                _ => Error::Validation(format!("zones failed ({msg}); rerun with --allow-partial")),
            };
            return Err(e);
        }
    }
    fs::create_dir_all(&a.out)?;
    io::write_partitioned_csv(&net, &ps.points, &zones, &result, create(&a.out.join("labelled.csv"))?, Some(prov))?;
    let reports: Vec<_> = result.zones.iter().map(|z| z.report.clone()).collect();
    match cli.format {
        Format::Csv => io::write_zones_csv(&reports, create(&a.out.join("zones.csv"))?, Some(prov))?,
        Format::Json => write_json(
            &a.out.join("zones.json"),
            &json!({"schema_version": SCHEMA_VERSION, "config_hash": prov.config_hash, "seed": prov.seed, "zones": reports}),
        )?,
    }
    let ok = reports.iter().filter(|z| z.status == ZoneStatus::Ok).count();
    println!(
        "{}",
        json!({"schema_version": SCHEMA_VERSION, "zones": reports.len(), "ok": ok,
               "skipped": result.skipped().count(), "failed": failed.len(), "config_hash": prov.config_hash})
    );
    Ok((!failed.is_empty()).then_some(Partial))
}

fn rates(cli: &Cli, a: &RatesArgs, prov: &Provenance) -> Result<()> {
    let policies: Option<Vec<KPolicy>> =
        a.policies.as_ref().map(|ps| ps.iter().map(|p| p.parse()).collect()).transpose()?;
    let mut reports = Vec::new();
    for path in &a.design {
        let mut file = DesignFile::from_path(path)?;
        if let Some(r) = a.reps {
            file.reps = r;
        }
        if let Some(s) = cli.seed {
            file.seed = s;
        }
        if let Some(p) = &policies {
            file.k_policies = p.clone();
        }
        let loaded = file.load_network(path.parent().unwrap_or(Path::new(".")))?;
        let design = file.design(&loaded)?;
        let report = run_design(&design)?;
        for p in &report.policies {
            if p.failed > 0 {
                eprintln!("design {}: {} of {} reps failed under {}", report.design, p.failed, report.reps, p.policy);
            }
        }
        reports.push(report);
    }
    let mut prov = prov.clone();
    if reports.iter().all(|r| r.seed == reports[0].seed) {
        prov.seed = Some(reports[0].seed);
    }
    let mut w = output(a.out.as_deref())?;
    match cli.format {
        Format::Csv => io::write_rates_csv(&reports, w, Some(&prov)),
        Format::Json => {
            serde_json::to_writer_pretty(
                &mut w,
                &json!({"schema_version": SCHEMA_VERSION, "config_hash": prov.config_hash, "seed": prov.seed, "designs": reports}),
            )?;
            writeln!(w)?;
            Ok(())
        }
    }
}

fn hist(a: &HistArgs, prov: &Provenance) -> Result<()> {
    let (net, ps) = load_points(&a.pts)?;
    let ks = parse_range(&a.k)?;
    let k_max = *ks.iter().max().unwrap_or(&1);
    if ps.points.len() <= k_max {
        return Err(Error::InsufficientPoints { have: ps.points.len(), need: k_max + 1 });
    }
    let profiles = geodesics::insert_points(&net, &ps.points)?.profiles(k_max, None)?;
    let hists = ks
        .iter()
        .map(|&k| {
            let samples = geodesics::samples_at(&profiles, k)?;
            let vols: Vec<f64> = samples.iter().map(|s| s.s_k).collect();
            Ok(io::Histogram::new(k, &vols, a.bins))
        })
        .collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(&a.out)?;
    write_histograms(&a.out, &hists, prov)?;
    Ok(())
}
