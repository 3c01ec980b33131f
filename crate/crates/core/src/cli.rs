//! Command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geo::{buffered_bbox, BoundingBox, GeoPoint};
use crate::hvi::{score_tracts, vif};
use crate::ingest::overpass::{fetch_witnesses, HttpTransport};
use crate::ingest::{
    landmarks_to_geojson, load_demographics, load_regions_with, load_witnesses, witnesses_to_csv, FetchConfig,
    IngestError, WitnessQuery,
};
use crate::persistence::compute_persistence;
use crate::report::{read_pairs_csv, sha256_hex, summarize_deaths, write_outputs, AnalysisReport, Fingerprints, HviSection};
use crate::witness::{build_complex, ComplexStrategy, LandmarkSet, WitnessSet};

#[derive(Debug, Parser)]
#[command(name = "coolgap", version, about = "Coverage gaps in cooling-center networks via witness-complex persistent homology")]
pub struct Cli {
    /// Directory for cached Overpass responses.
    #[arg(long, global = true, default_value = ".coolgap-cache")]
    pub cache_dir: PathBuf,
    /// Overpass endpoint; overrides the config file and COOLGAP_OVERPASS_ENDPOINT.
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    #[arg(long, global = true, default_value_t = 2)]
    pub max_dim: usize,
    #[arg(long, global = true, default_value_t = 5)]
    pub top_k: usize,
    /// Seed for `synth`.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Persistence of the witness complex and the derived map layers.
    Analyze(AnalyzeArgs),
    /// Heat-vulnerability scores from a demographics table.
    Hvi(HviArgs),
    /// Download cooling-center candidates to a CSV file.
    FetchWitnesses(FetchArgs),
    /// Death-value statistics of an existing pairs.csv, as JSON on stdout.
    Summary(SummaryArgs),
    /// Random point fixtures for testing.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// TOML file with endpoint, retries, bbox and tag groups.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Search box as sw_lon,sw_lat,ne_lon,ne_lat.
    #[arg(long, allow_hyphen_values = true)]
    pub bbox: Option<String>,
    /// Comma-separated tag group names (default: all configured groups).
    #[arg(long, value_delimiter = ',')]
    pub tags: Vec<String>,
    /// Per-request timeout, seconds.
    #[arg(long)]
    pub timeout_secs: Option<u64>,
    #[arg(long)]
    pub retries: Option<u32>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// GeoJSON FeatureCollection of tract polygons or points.
    #[arg(long)]
    pub regions: PathBuf,
    /// Property holding the feature id when the feature has no `id` member.
    #[arg(long, default_value = "id")]
    pub id_property: String,
    /// Witness CSV (id,lat,lon) or GeoJSON points.
    #[arg(long, conflicts_with = "fetch", required_unless_present = "fetch")]
    pub witnesses: Option<PathBuf>,
    /// Fetch witnesses from Overpass instead of reading a file.
    #[arg(long)]
    pub fetch: bool,
    #[command(flatten)]
    pub source: SourceArgs,
    /// Optional demographics CSV; adds HVI outputs.
    #[arg(long)]
    pub demographics: Option<PathBuf>,
    #[arg(long)]
    pub city: Option<String>,
    /// Build every clique instead of the collapsed complex.
    #[arg(long)]
    pub full_complex: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HviArgs {
    #[arg(long)]
    pub demographics: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    /// Regions whose buffered bounding box is searched when no bbox is given.
    #[arg(long)]
    pub regions: Option<PathBuf>,
    #[arg(long, default_value = "id")]
    pub id_property: String,
    #[command(flatten)]
    pub source: SourceArgs,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SummaryArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    /// Report a single dimension.
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    pub landmarks: usize,
    #[arg(long, default_value_t = 10)]
    pub witnesses: usize,
    /// Square center as lat,lon.
    #[arg(long, default_value = "30.27,-97.74", allow_hyphen_values = true)]
    pub center: String,
    /// Side of the square, degrees.
    #[arg(long, default_value_t = 0.1)]
    pub span: f64,
    /// Writes regions.geojson and witnesses.csv here.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Upstream(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Upstream(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Upstream(m) => f.write_str(m),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        if e.is_upstream() {
            CliError::Upstream(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

fn parse_bbox(text: &str) -> Result<BoundingBox, CliError> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Input(format!("--bbox {text:?}: {e}")))?;
    let [sw_lon, sw_lat, ne_lon, ne_lat] = v[..] else {
        return Err(CliError::Input(format!("--bbox {text:?}: expected sw_lon,sw_lat,ne_lon,ne_lat")));
    };
    let sw = GeoPoint::new(sw_lat, sw_lon).map_err(input)?;
    let ne = GeoPoint::new(ne_lat, ne_lon).map_err(input)?;
    BoundingBox::new(sw, ne).map_err(input)
}

fn fetch_config(cli: &Cli, source: &SourceArgs) -> Result<FetchConfig, CliError> {
    let mut config = FetchConfig::load(source.config.as_deref())?;
    if let Some(e) = &cli.endpoint {
        config.endpoint = e.clone();
    }
    if let Some(t) = source.timeout_secs {
        config.timeout_secs = t;
    }
    if let Some(r) = source.retries {
        config.retries = r;
    }
    Ok(config)
}

fn fetch(cli: &Cli, source: &SourceArgs, landmarks: Option<&LandmarkSet>) -> Result<WitnessSet, CliError> {
    let config = fetch_config(cli, source)?;
    let bbox = match (&source.bbox, &config.bbox, landmarks) {
        (Some(text), _, _) => parse_bbox(text)?,
        (None, Some(b), _) => b.to_bbox()?,
        (None, None, Some(l)) => buffered_bbox(l.points()).map_err(input)?,
        (None, None, None) => return Err(CliError::Input("give --bbox, --regions or a bbox in --config".into())),
    };
    let query = if source.tags.is_empty() {
        WitnessQuery::new(bbox, config.groups.iter().map(|g| g.name.clone()).collect())?
    } else {
        WitnessQuery::new(bbox, source.tags.clone())?
    };
    let transport = HttpTransport::new(Duration::from_secs(config.timeout_secs));
    let outcome = fetch_witnesses(&query, &config, &cli.cache_dir, &transport)?;
    log::info!(
        "{} witnesses ({}, key {})",
        outcome.witnesses.len(),
        if outcome.from_cache { "cached" } else { "fetched" },
        outcome.cache_key
    );
    Ok(outcome.witnesses)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn hvi_section(path: &Path, k: usize) -> Result<HviSection, CliError> {
    let tracts = load_demographics(path)?;
    let results = score_tracts(&tracts).map_err(input)?;
    let vif = match vif(&tracts) {
        Ok(v) => Some(v),
        Err(e) => {
            log::warn!("skipping VIF: {e}");
            None
        }
    };
    Ok(HviSection::new(results, vif, k))
}

fn write(dir: &Path, files: &[(&'static str, String)]) -> Result<(), CliError> {
    write_outputs(dir, files).map_err(|e| CliError::Input(format!("cannot write to {}: {e}", dir.display())))?;
    Ok(())
}

fn analyze(cli: &Cli, args: &AnalyzeArgs) -> Result<(), CliError> {
    let region_bytes = read_bytes(&args.regions)?;
    let landmarks = load_regions_with(&args.regions, &args.id_property)?;
    let witnesses = match &args.witnesses {
        Some(path) => load_witnesses(path)?,
        None => fetch(cli, &args.source, Some(&landmarks))?,
    };
    if witnesses.is_empty() {
        log::warn!("no witnesses: every landmark stays its own component");
    }
    let hvi = args
        .demographics
        .as_deref()
        .map(|p| hvi_section(p, cli.top_k))
        .transpose()?;

    let strategy = if args.full_complex {
        ComplexStrategy::Full
    } else {
        ComplexStrategy::Collapsed
    };
    let complex = build_complex(&landmarks, &witnesses, cli.max_dim, strategy).map_err(input)?;
    log::info!("complex has {} simplices {:?}", complex.len(), complex.count_by_dim());
    let diagram = compute_persistence(&complex).map_err(input)?;

    let city = args.city.clone().unwrap_or_else(|| {
        args.regions
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let fingerprints = Fingerprints {
        landmark_count: landmarks.len(),
        witness_count: witnesses.len(),
        landmarks_sha256: sha256_hex(&region_bytes),
        witnesses_sha256: sha256_hex(witnesses_to_csv(&witnesses).as_bytes()),
    };
    let report = AnalysisReport::build(
        city,
        &landmarks,
        &diagram,
        complex.count_by_dim(),
        strategy,
        cli.top_k,
        hvi,
        fingerprints,
    );
    write(&args.out, &report.render())
}

fn hvi(cli: &Cli, args: &HviArgs) -> Result<(), CliError> {
    let section = hvi_section(&args.demographics, cli.top_k)?;
    write(&args.out, &section.render())
}

fn fetch_command(cli: &Cli, args: &FetchArgs) -> Result<(), CliError> {
    let landmarks = args
        .regions
        .as_deref()
        .map(|p| load_regions_with(p, &args.id_property))
        .transpose()?;
    let witnesses = fetch(cli, &args.source, landmarks.as_ref())?;
    std::fs::write(&args.out, witnesses_to_csv(&witnesses))
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", args.out.display())))
}

fn summary(args: &SummaryArgs) -> Result<(), CliError> {
    let text = String::from_utf8(read_bytes(&args.pairs)?).map_err(input)?;
    let rows = read_pairs_csv(&text).map_err(|e| CliError::Input(format!("{}: {e}", args.pairs.display())))?;
    let pairs: Vec<_> = rows
        .iter()
        .map(|&(dim, birth, death)| crate::persistence::PersistencePair {
            dim,
            birth,
            death,
            birth_simplex: crate::witness::Simplex::vertex(0),
            death_simplex: None,
        })
        .collect();
    let dims: Vec<usize> = match args.dim {
        Some(d) => vec![d],
        None => {
            let top = rows.iter().map(|r| r.0).max().unwrap_or(0);
            (0..=top).collect()
        }
    };
    let stats: Vec<_> = dims.into_iter().map(|d| summarize_deaths(&pairs, d)).collect();
    println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize"));
    Ok(())
}

fn synth(cli: &Cli, args: &SynthArgs) -> Result<(), CliError> {
    let center: Vec<f64> = args
        .center
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Input(format!("--center: {e}")))?;
    let [lat0, lon0] = center[..] else {
        return Err(CliError::Input("--center expects lat,lon".into()));
    };
    if args.landmarks == 0 {
        return Err(CliError::Input("--landmarks must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let half = args.span / 2.0;
    let mut points = |n: usize| -> Result<Vec<GeoPoint>, CliError> {
        (0..n)
            .map(|_| {
                let lat = lat0 + rng.random_range(-half..=half);
                let lon = lon0 + rng.random_range(-half..=half);
                GeoPoint::new(lat, lon).map_err(input)
            })
            .collect()
    };
    let lpts = points(args.landmarks)?;
    let wpts = points(args.witnesses)?;
    let landmarks = LandmarkSet::new((0..lpts.len()).map(|i| format!("L{i}")).collect(), lpts).map_err(input)?;
    let witnesses = WitnessSet::new((0..wpts.len()).map(|i| format!("W{i}")).collect(), wpts).map_err(input)?;
    write(
        &args.out,
        &[
            ("regions.geojson", landmarks_to_geojson(&landmarks)),
            ("witnesses.csv", witnesses_to_csv(&witnesses)),
        ],
    )
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Analyze(a) => analyze(cli, a),
        Command::Hvi(a) => hvi(cli, a),
        Command::FetchWitnesses(a) => fetch_command(cli, a),
        Command::Summary(a) => summary(a),
        Command::Synth(a) => synth(cli, a),
    }
}

/// Parses the process arguments and runs; usage errors exit 1.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
