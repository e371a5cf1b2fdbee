//! `sgicp`: scene synthesis, registration, evaluation, priors and vibration
//! exposure from the command line.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use sgicp_core::evaluation::{
    build_report, directed_hausdorff, point_to_mesh_distances, ComparisonReport, DistanceStats, MetricKind,
};
use sgicp_core::hav::{export_records, process_stream, HavConfig};
use sgicp_core::priors::{
    effective_gravity_weight, fetch_priors, simplify_label, PriorOverride, PriorServiceConfig, PriorSource,
    SemanticPriorTable,
};
use sgicp_core::registration::{BiasMode, GravityPrior, IcpParams, Registration, RegistrationResult};
use sgicp_core::scenes::{export_scene, generate_scenario, load_scene, make_primitive, preset, GeneratedScene, ScenarioSpec};
use sgicp_core::{sample_mesh_with_normals, Error, RigidTransform, Vec3};

#[derive(Parser)]
#[command(name = "sgicp", version, about = "Gravity-regularized ICP with semantic upright priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene (cloud PLY, meshes OBJ, poses JSON).
    SceneGen {
        #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
        preset: Option<String>,
        /// ScenarioSpec JSON
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Register every object of a scene with plain ICP and/or the upright prior.
    Register {
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long, conflicts_with = "scene")]
        preset: Option<String>,
        /// Directory written by `scene-gen`
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Record per-iteration objective values.
        #[arg(long)]
        trace: bool,
        /// Use keyword priors without contacting the service.
        #[arg(long)]
        offline: bool,
        #[arg(long)]
        gamma_initial: Option<f64>,
        /// Job JSON; flags override its values.
        #[arg(long, alias = "job")]
        config: Option<PathBuf>,
        /// Output directory [default: results]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two registration results against a scene's ground truth.
    Eval {
        /// Scene directory holding scene.json and the cloud
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        proposed: PathBuf,
        #[arg(long, value_enum, default_value = "point-to-mesh")]
        metric: Metric,
        #[arg(long)]
        out: PathBuf,
    },
    /// Resolve upright priors for a JSON list of BIM family labels.
    Priors {
        labels: PathBuf,
        #[arg(long)]
        offline: bool,
        /// Fail instead of falling back to keyword priors.
        #[arg(long)]
        no_fallback: bool,
        /// PriorServiceConfig JSON
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Process a JSON-lines vibration stream into IFC-flavored records.
    Hav {
        /// Path, or `-` for stdin
        #[arg(long)]
        stream: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// HavConfig JSON
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Icp,
    Sgicp,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Metric {
    PointToMesh,
    Hausdorff,
}

enum Failure {
    Usage(String),
    Data(String),
    Infeasible(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Infeasible(_) | Error::DegenerateGeometry(_) => Failure::Infeasible(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::SceneGen { preset, spec, seed, out } => scene_gen(preset, spec, seed, &out),
        Command::Register { mode, preset, scene, seed, trace, offline, gamma_initial, config, out } => {
            let flags = RegisterFlags { mode, preset, scene, seed, trace, offline, gamma_initial, out };
            register(flags, config.as_deref())
        }
        Command::Eval { scene, baseline, proposed, metric, out } => eval(&scene, &baseline, &proposed, metric, &out),
        Command::Priors { labels, offline, no_fallback, config, out } => {
            priors(&labels, offline, no_fallback, config.as_deref(), out.as_deref())
        }
        Command::Hav { stream, out, config } => hav(&stream, out.as_deref(), config.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Infeasible(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(4)
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn scene_gen(preset_name: Option<String>, spec: Option<PathBuf>, seed: Option<u64>, out: &Path) -> CmdResult {
    let mut spec: ScenarioSpec = match (preset_name, spec) {
        (Some(name), _) => preset(&name, seed.unwrap_or(0))?,
        (None, Some(path)) => read_json(&path)?,
        (None, None) => return Err(Failure::Usage("one of --preset or --spec is required".into())),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate()?;
    let scene = generate_scenario(&spec)?;
    for path in export_scene(&scene, out)? {
        println!("{}", path.display());
    }
    Ok(())
}

struct RegisterFlags {
    mode: Option<Mode>,
    preset: Option<String>,
    scene: Option<PathBuf>,
    seed: Option<u64>,
    trace: bool,
    offline: bool,
    gamma_initial: Option<f64>,
    out: Option<PathBuf>,
}

/// Register job file. Every field is optional; flags win.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
struct RegisterJob {
    mode: Option<Mode>,
    preset: Option<String>,
    scene: Option<PathBuf>,
    seed: Option<u64>,
    trace: bool,
    offline: bool,
    gamma_initial: Option<f64>,
    out: Option<PathBuf>,
    params: Option<IcpParams>,
    prior_service: Option<PriorServiceConfig>,
    bias_mode: BiasMode,
    overrides: BTreeMap<String, PriorOverride>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ObjectReport {
    label: String,
    initial: RigidTransform,
    #[serde(skip_serializing_if = "Option::is_none")]
    prior: Option<GravityPrior>,
    result: RegistrationResult,
    /// Scene segment to the mesh at the estimated pose.
    point_to_mesh: DistanceStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct RunReport {
    scenario: String,
    seed: u64,
    mode: Mode,
    params: IcpParams,
    objects: Vec<ObjectReport>,
}

fn register(flags: RegisterFlags, config: Option<&Path>) -> CmdResult {
    let job: RegisterJob = match config {
        Some(p) => read_json(p)?,
        None => RegisterJob::default(),
    };
    let mode = flags.mode.or(job.mode).unwrap_or(Mode::Both);
    let seed = flags.seed.or(job.seed);
    let out = flags.out.or(job.out).unwrap_or_else(|| PathBuf::from("results"));
    let scene = match (flags.preset.or(job.preset), flags.scene.or(job.scene)) {
        (Some(_), Some(_)) => return Err(Failure::Usage("give either a preset or a scene directory".into())),
        (Some(name), None) => generate_scenario(&preset(&name, seed.unwrap_or(0))?)?,
        (None, Some(dir)) => load_scene(&dir)?,
        (None, None) => return Err(Failure::Usage("one of --preset or --scene is required".into())),
    };
    let mut params = job.params.unwrap_or_default();
    params.seed = seed.unwrap_or(scene.spec.seed);
    if let Some(g) = flags.gamma_initial.or(job.gamma_initial) {
        params.gravity_weight_initial = g;
    }
    params.validate()?;
    let trace = flags.trace || job.trace;
    fs::create_dir_all(&out)?;

    let mut reports = Vec::new();
    if matches!(mode, Mode::Icp | Mode::Both) {
        reports.push(run_mode(&scene, &params, None, trace, Mode::Icp)?);
    }
    if matches!(mode, Mode::Sgicp | Mode::Both) {
        let mut service = job.prior_service.unwrap_or_default();
        service.offline |= flags.offline || job.offline;
        let mut labels: Vec<String> = scene.objects.iter().map(|o| o.label.clone()).collect();
        labels.sort();
        labels.dedup();
        let fetched = fetch_priors(&labels, &service)?;
        for d in &fetched.diagnostics {
            eprintln!("priors: {d}");
        }
        let mut table = fetched.table;
        table.apply_overrides(&job.overrides)?;
        write_json(&out.join("priors.json"), &table)?;
        let setup = PriorSetup { table: &table, bias_mode: job.bias_mode };
        reports.push(run_mode(&scene, &params, Some(setup), trace, Mode::Sgicp)?);
    }

    for (r, _) in &reports {
        let name = match r.mode {
            Mode::Icp => "icp.json",
            _ => "sgicp.json",
        };
        write_json(&out.join(name), r)?;
    }
    if let [(_, icp), (_, sg)] = reports.as_slice() {
        let report = comparison(MetricKind::PointToMesh, &scene, icp, sg)?;
        write_report(&out, &report)?;
        print!("{}", report.to_text());
    } else {
        for o in &reports[0].0.objects {
            println!("{:<20} rmse {:.6}  score {:.4}", o.label, o.point_to_mesh.rmse, o.result.score);
        }
    }
    Ok(())
}

#[derive(Clone, Copy)]
struct PriorSetup<'a> {
    table: &'a SemanticPriorTable,
    bias_mode: BiasMode,
}

fn run_mode(
    scene: &GeneratedScene,
    params: &IcpParams,
    priors: Option<PriorSetup>,
    trace: bool,
    mode: Mode,
) -> Result<(RunReport, Vec<Vec<f64>>), Failure> {
    let mut objects = Vec::new();
    let mut distances = Vec::new();
    for (i, o) in scene.objects.iter().enumerate() {
        let mesh = make_primitive(&o.primitive)?;
        let segment = scene.segment(i);
        let prior = match priors {
            Some(p) => {
                let beta = p.table.bias(&o.label);
                let gamma = effective_gravity_weight(params.gravity_weight_initial, beta)?;
                Some(
                    GravityPrior::new(beta, gamma)?
                        .with_mode(p.bias_mode)
                        .with_yaw_only(p.table.is_yaw_only(&o.label)),
                )
            }
            None => None,
        };
        let result = Registration { params, prior: prior.as_ref(), record_trace: trace }
            .run(&mesh, &o.initial, &segment)
            .map_err(|e| Failure::from(e).context(&o.label))?;
        let d = point_to_mesh_distances(&segment.points, &mesh, &result.pose)?;
        let point_to_mesh = DistanceStats::from_distances(&d)?;
        objects.push(ObjectReport { label: o.label.clone(), initial: o.initial, prior, result, point_to_mesh });
        distances.push(d);
    }
    let report = RunReport { scenario: scene.spec.name.clone(), seed: scene.spec.seed, mode, params: params.clone(), objects };
    Ok((report, distances))
}

impl Failure {
    fn context(self, what: &str) -> Self {
        match self {
            Failure::Usage(m) => Failure::Usage(format!("{what}: {m}")),
            Failure::Data(m) => Failure::Data(format!("{what}: {m}")),
            Failure::Infeasible(m) => Failure::Infeasible(format!("{what}: {m}")),
        }
    }
}

/// Per-object rows plus a pooled row over all objects' distances.
fn comparison(
    kind: MetricKind,
    scene: &GeneratedScene,
    baseline: &[Vec<f64>],
    proposed: &[Vec<f64>],
) -> Result<ComparisonReport, Failure> {
    let stats = |d: &[f64]| DistanceStats::from_distances(d).map_err(Failure::from);
    let mut rows = Vec::new();
    for (i, o) in scene.objects.iter().enumerate() {
        rows.push((format!("{}/{}", scene.spec.name, o.label), stats(&baseline[i])?, stats(&proposed[i])?));
    }
    rows.push((scene.spec.name.clone(), stats(&baseline.concat())?, stats(&proposed.concat())?));
    Ok(build_report(kind, &rows))
}

fn write_report(dir: &Path, report: &ComparisonReport) -> CmdResult {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("comparison.json"), report)?;
    fs::write(dir.join("comparison.txt"), report.to_text())?;
    fs::write(dir.join("comparison.csv"), report.to_csv())?;
    Ok(())
}

fn eval(scene_dir: &Path, baseline: &Path, proposed: &Path, metric: Metric, out: &Path) -> CmdResult {
    if !scene_dir.join("scene.json").is_file() {
        return Err(Failure::Data(format!("ground truth {} not found", scene_dir.join("scene.json").display())));
    }
    let scene = load_scene(scene_dir)?;
    let runs: Vec<RunReport> = vec![read_json(baseline)?, read_json(proposed)?];
    for r in &runs {
        let labels: Vec<&str> = r.objects.iter().map(|o| o.label.as_str()).collect();
        let expected: Vec<&str> = scene.objects.iter().map(|o| o.label.as_str()).collect();
        if r.scenario != scene.spec.name || r.seed != scene.spec.seed || labels != expected {
            return Err(Failure::Data(format!(
                "result for '{}' seed {} does not match scene '{}' seed {}",
                r.scenario, r.seed, scene.spec.name, scene.spec.seed
            )));
        }
    }

    let mut per_run: Vec<Vec<Vec<f64>>> = Vec::new();
    for r in &runs {
        let mut objs = Vec::new();
        for (i, (o, truth)) in r.objects.iter().zip(&scene.objects).enumerate() {
            let mesh = make_primitive(&truth.primitive)?;
            let d = match metric {
                Metric::PointToMesh => point_to_mesh_distances(&scene.segment(i).points, &mesh, &o.result.pose)?,
                Metric::Hausdorff => pose_discrepancy(&mesh, &o.result.pose, &truth.truth, r.params.seed)?,
            };
            objs.push(d);
        }
        per_run.push(objs);
    }
    let kind = match metric {
        Metric::PointToMesh => MetricKind::PointToMesh,
        Metric::Hausdorff => MetricKind::Hausdorff,
    };
    let report = comparison(kind, &scene, &per_run[0], &per_run[1])?;
    write_report(out, &report)?;
    print!("{}", report.to_text());
    Ok(())
}

/// Nearest-neighbour distances between model samples at the estimated and
/// the true pose, both directions. Their maximum is the symmetric Hausdorff
/// distance.
fn pose_discrepancy(
    mesh: &sgicp_core::TriangleMesh,
    estimate: &RigidTransform,
    truth: &RigidTransform,
    seed: u64,
) -> Result<Vec<f64>, Failure> {
    let samples = sample_mesh_with_normals(mesh, 2000, seed)?;
    let a: Vec<Vec3> = samples.points.iter().map(|p| estimate.apply(p)).collect();
    let b: Vec<Vec3> = samples.points.iter().map(|p| truth.apply(p)).collect();
    let mut d = Vec::with_capacity(a.len() * 2);
    for p in &a {
        d.push(directed_hausdorff(std::slice::from_ref(p), &b)?);
    }
    for p in &b {
        d.push(directed_hausdorff(std::slice::from_ref(p), &a)?);
    }
    Ok(d)
}

fn priors(labels: &Path, offline: bool, no_fallback: bool, config: Option<&Path>, out: Option<&Path>) -> CmdResult {
    let mut service: PriorServiceConfig = match config {
        Some(p) => read_json(p)?,
        None => PriorServiceConfig::default(),
    };
    service.offline |= offline;
    if service.offline && no_fallback {
        return Err(Failure::Usage("--offline with --no-fallback leaves no prior source".into()));
    }
    let raw: Vec<String> = read_json(labels)?;
    let mut simplified = Vec::with_capacity(raw.len());
    for r in &raw {
        simplified.push(simplify_label(r)?);
    }
    simplified.sort();
    simplified.dedup();
    let fetched = fetch_priors(&simplified, &service)?;
    for d in &fetched.diagnostics {
        eprintln!("priors: {d}");
    }
    if no_fallback && fetched.table.source == PriorSource::Fallback {
        return Err(Failure::Data("prior service failed and fallback is disabled".into()));
    }
    let mut text = serde_json::to_string_pretty(&fetched.table)?;
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn hav(stream: &str, out: Option<&Path>, config: Option<&Path>) -> CmdResult {
    let config: HavConfig = match config {
        Some(p) => read_json(p)?,
        None => HavConfig::default(),
    };
    let reader: Box<dyn BufRead> = if stream == "-" {
        Box::new(BufReader::new(std::io::stdin()))
    } else {
        let f = fs::File::open(stream).map_err(|e| Failure::Data(format!("{stream}: {e}")))?;
        Box::new(BufReader::new(f))
    };
    let run = process_stream(reader, config)?;
    let doc = export_records(&run.records);
    match out {
        Some(p) => fs::write(p, doc)?,
        None => print!("{doc}"),
    }
    let mut lines = format!("{:<16} {:>5} {:>8} {:>8}  {}\n", "worker", "day", "hours", "A(8)", "intervention");
    for d in &run.summary {
        lines += &format!(
            "{:<16} {:>5} {:>8.3} {:>8.4}  {}\n",
            d.worker_id,
            d.day,
            d.exposure_hours,
            d.a8,
            if d.intervention { "yes" } else { "no" }
        );
    }
    lines += &format!("records: {}\n", run.records.len());
    // keep stdout clean for the document when it goes there
    if out.is_some() {
        print!("{lines}");
    } else {
        eprint!("{lines}");
    }
    Ok(())
}
