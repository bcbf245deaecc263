use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use susnet_core::analytics::{self, GfpReport, GridSpec};
use susnet_core::ingest::{self, CorpusWindow, InteractionEvent, ParseSummary, DEFAULT_TARGET_THRESHOLD};
use susnet_core::netbuild::{self, FriendshipNetwork, NetworkKind, NetworkSummary};
use susnet_core::nullmodels::{self, NullConfig, NullModel};
use susnet_core::predict::{self, FitReport, ForestParams};
use susnet_core::suscept::{self, Metric, ScoreTable};
use susnet_core::synth::{self, SynthConfig};
use susnet_core::Error;

use crate::args::*;
use crate::manifest::{sha256_file, RunManifest, MANIFEST_FILE};
use crate::{CliError, Context};

const SECS_PER_DAY: i64 = 86_400;

struct Run {
    out: PathBuf,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
}

impl Run {
    fn open(&mut self, path: &Path) -> Result<BufReader<File>, CliError> {
        let shown = path.display().to_string();
        let digest = sha256_file(path).context(|| format!("reading {shown}"))?;
        self.inputs.insert(shown.clone(), digest);
        File::open(path).map(BufReader::new).context(|| format!("opening {shown}"))
    }

    fn write<F>(&mut self, name: &str, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> susnet_core::Result<()>,
    {
        let path = self.out.join(name);
        let file = File::create(&path).context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        f(&mut w).context(|| format!("writing {}", path.display()))?;
        w.flush().context(|| format!("writing {}", path.display()))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n")?;
            Ok(())
        })
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn invariant(msg: impl Into<String>) -> CliError {
    CliError::Data { context: "consistency check".into(), source: Error::Invariant(msg.into()) }
}

fn data(context: &str, e: Error) -> CliError {
    CliError::Data { context: context.to_string(), source: e }
}

fn validate(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Ingest(a) if a.threshold == 0 => Err(usage("--threshold must be at least 1")),
        Command::Score(a) => {
            if a.threshold == 0 {
                return Err(usage("--threshold must be at least 1"));
            }
            if a.buffer_days < 0 {
                return Err(usage("--buffer-days must not be negative"));
            }
            if let (Some(s), Some(e)) = (a.window_start, a.window_end) {
                if s >= e {
                    return Err(usage("--window-start must precede --window-end"));
                }
            }
            Ok(())
        }
        Command::Network(a) if a.threshold == Some(0) => Err(usage("--threshold must be at least 1")),
        Command::Analyze(a) if !(a.grid_s_width > 0.0 && a.grid_s_width <= 1.0) => {
            Err(usage("--grid-s-width must be in (0, 1]"))
        }
        Command::Null(a) if a.reps == 0 => Err(usage("--reps must be at least 1")),
        Command::Null(a) if a.swap_mult == 0 => Err(usage("--swap-mult must be at least 1")),
        Command::Predict(a) => {
            if !(a.test_frac > 0.0 && a.test_frac < 1.0) {
                return Err(usage("--test-frac must be in (0, 1)"));
            }
            if a.folds < 2 {
                return Err(usage("--folds must be at least 2"));
            }
            if a.search_settings == 0 || a.shuffles == 0 {
                return Err(usage("--search-settings and --shuffles must be at least 1"));
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

pub fn execute(cli: &Cli, started: Instant) -> Result<(), CliError> {
    validate(cli)?;
    fs::create_dir_all(&cli.out).context(|| format!("creating {}", cli.out.display()))?;
    let mut run = Run { out: cli.out.clone(), inputs: BTreeMap::new(), outputs: Vec::new() };
    let seed = cli.seed.unwrap_or(0);
    let seed = match &cli.command {
        Command::Ingest(a) => ingest_cmd(&mut run, cli, a).map(|_| seed),
        Command::Score(a) => score_cmd(&mut run, cli, a).map(|_| seed),
        Command::Network(a) => network_cmd(&mut run, cli, a).map(|_| seed),
        Command::Analyze(a) => analyze_cmd(&mut run, a).map(|_| seed),
        Command::Null(a) => null_cmd(&mut run, a, seed).map(|_| seed),
        Command::Predict(a) => predict_cmd(&mut run, a, seed).map(|_| seed),
        Command::Synth(a) => synth_cmd(&mut run, cli, a),
        Command::Report(a) => report_cmd(&mut run, a).map(|_| seed),
    }?;
    let flags = serde_json::to_value(cli).context(|| "serializing flags".into())?;
    let mut manifest = RunManifest::new(cli.command.name(), flags, seed, started.elapsed());
    manifest.inputs = std::mem::take(&mut run.inputs);
    manifest.outputs = std::mem::take(&mut run.outputs);
    run.write_json(MANIFEST_FILE, &manifest)
}

fn load_events(run: &mut Run, path: &Path, strict: bool) -> Result<(Vec<InteractionEvent>, ParseSummary), CliError> {
    let reader = run.open(path)?;
    let parsed = ingest::parse_event_log(reader, strict).context(|| format!("parsing {}", path.display()))?;
    if parsed.summary.malformed > 0 {
        log::warn!("skipped {} malformed lines in {}", parsed.summary.malformed, path.display());
    }
    Ok((parsed.events, parsed.summary))
}

fn load_scores(run: &mut Run, path: &Path) -> Result<ScoreTable, CliError> {
    let reader = run.open(path)?;
    ScoreTable::read_csv(reader).context(|| format!("reading {}", path.display()))
}

fn load_network(run: &mut Run, input: &NetworkInput) -> Result<FriendshipNetwork, CliError> {
    let reader = run.open(&input.network)?;
    netbuild::read_edge_list(input.kind.into(), reader).context(|| format!("reading {}", input.network.display()))
}

fn label(input: &NetworkInput) -> String {
    input.label.clone().unwrap_or_else(|| NetworkKind::from(input.kind).as_str().to_string())
}

#[derive(Serialize)]
struct IngestSummary {
    parse: ParseSummary,
    events_with_urls: usize,
    events_without_urls: usize,
    threshold: usize,
    targets: usize,
}

fn ingest_cmd(run: &mut Run, cli: &Cli, a: &IngestArgs) -> Result<(), CliError> {
    let (events, parse) = load_events(run, &a.events, cli.strict)?;
    let filtered = ingest::filter_url_events(events);
    let targets = ingest::select_target_users(&filtered.events, a.threshold).context(|| "selecting targets".into())?;
    run.write("events.filtered.jsonl", |w| ingest::write_event_log(&filtered.events, w))?;
    run.write("targets.txt", |w| {
        for t in &targets {
            writeln!(w, "{t}")?;
        }
        Ok(())
    })?;
    run.write_json(
        "ingest_summary.json",
        &IngestSummary {
            parse,
            events_with_urls: filtered.events.len(),
            events_without_urls: filtered.removed,
            threshold: a.threshold,
            targets: targets.len(),
        },
    )
}

fn resolve_window(run: &mut Run, a: &ScoreArgs, events: &[InteractionEvent]) -> Result<CorpusWindow, CliError> {
    let sidecar: Option<CorpusWindow> = match &a.window {
        Some(path) => {
            let reader = run.open(path)?;
            Some(serde_json::from_reader(reader).context(|| format!("reading {}", path.display()))?)
        }
        None => None,
    };
    let start = a
        .window_start
        .or(sidecar.map(|w| w.start))
        .or_else(|| events.iter().map(|e| e.timestamp).min());
    let end = a
        .window_end
        .or(sidecar.map(|w| w.end))
        .or_else(|| events.iter().map(|e| e.timestamp).max());
    let (Some(start), Some(end)) = (start, end) else {
        return Err(data("resolving the window", Error::InsufficientData("no events and no window given".into())));
    };
    CorpusWindow::with_buffer(start, end, a.buffer_days * SECS_PER_DAY).context(|| "resolving the window".into())
}

#[derive(Serialize)]
struct ScoreSummary {
    window: CorpusWindow,
    threshold: usize,
    targets: usize,
    with_iar: usize,
    with_sar: usize,
    with_meta: usize,
    parse: ParseSummary,
}

fn score_cmd(run: &mut Run, cli: &Cli, a: &ScoreArgs) -> Result<(), CliError> {
    let (events, parse) = load_events(run, &a.events, cli.strict)?;
    let window = resolve_window(run, a, &events)?;
    let events = ingest::filter_url_events(events).events;
    let targets = ingest::select_target_users(&events, a.threshold).context(|| "selecting targets".into())?;
    let meta = match &a.meta {
        Some(path) => {
            let reader = run.open(path)?;
            ingest::parse_user_meta(reader, cli.strict).context(|| format!("parsing {}", path.display()))?.0
        }
        None => BTreeMap::new(),
    };
    let histories = suscept::build_histories(&events, &targets, &window).context(|| "building histories".into())?;
    let scores = suscept::compute_all_scores(&histories);
    for s in &scores {
        let ok_rate = |v: Option<f64>| v.is_none_or(|x| (0.0..=1.0).contains(&x));
        if !ok_rate(s.iar) || !ok_rate(s.sar) || s.n_influence_driven > s.n_exposed.min(s.n_adopted) {
            return Err(invariant(format!("inconsistent score for {}: {s:?}", s.user)));
        }
    }
    let table = suscept::score_table(scores, &meta);
    run.write("scores.csv", |w| table.write_csv(w))?;
    run.write_json(
        "score_summary.json",
        &ScoreSummary {
            window,
            threshold: a.threshold,
            targets: targets.len(),
            with_iar: table.rows.iter().filter(|r| r.score.iar.is_some()).count(),
            with_sar: table.rows.iter().filter(|r| r.score.sar.is_some()).count(),
            with_meta: table.rows.iter().filter(|r| r.meta.is_some()).count(),
            parse,
        },
    )
}

#[derive(Serialize)]
struct NetworkReport {
    #[serde(flatten)]
    summary: NetworkSummary,
    components: usize,
    largest_component: usize,
    nodes_outside_largest: usize,
    eigenvalue: f64,
    eigen_iterations: usize,
    eigen_converged: bool,
    eigen_residual: f64,
}

fn network_cmd(run: &mut Run, cli: &Cli, a: &NetworkArgs) -> Result<(), CliError> {
    let (events, _) = load_events(run, &a.events, cli.strict)?;
    let events = ingest::filter_url_events(events).events;
    let targets: BTreeSet<String> = match &a.targets {
        Some(path) => {
            let reader = run.open(path)?;
            let mut set = BTreeSet::new();
            for line in reader.lines() {
                let line = line.context(|| format!("reading {}", path.display()))?;
                let id = line.trim();
                if !id.is_empty() {
                    set.insert(id.to_string());
                }
            }
            set
        }
        None => ingest::select_target_users(&events, a.threshold.unwrap_or(DEFAULT_TARGET_THRESHOLD))
            .context(|| "selecting targets".into())?,
    };
    let kind: NetworkKind = a.kind.into();
    let built = netbuild::build_friendship_network(&events, &targets, kind).context(|| "building the network".into())?;
    let net = &built.network;
    if let Some(e) = net.edges().iter().find(|e| e.weight < 2) {
        return Err(invariant(format!("reciprocal edge {}-{} has weight {}", net.nodes()[e.u], net.nodes()[e.v], e.weight)));
    }
    let name = kind.as_str();
    run.write(&format!("network.{name}.edges"), |w| netbuild::write_edge_list(net, w))?;
    let window = CorpusWindow::from_events(&events, ingest::DEFAULT_BUFFER_SECS).ok();
    let summary = NetworkSummary::of(net, window, built.isolated_targets_dropped);
    if net.node_count() == 0 {
        log::warn!("the {name} network is empty");
        run.write(&format!("network.{name}.features.csv"), |w| {
            writeln!(w, "user,degree,degree_centrality,eigenvector_centrality,clustering_coefficient")?;
            Ok(())
        })?;
        return run.write_json(&format!("network.{name}.summary.json"), &summary);
    }
    let features = netbuild::node_features(net).context(|| "computing node features".into())?;
    run.write(&format!("network.{name}.features.csv"), |w| features.write_csv(w))?;
    run.write_json(
        &format!("network.{name}.summary.json"),
        &NetworkReport {
            summary,
            components: features.components,
            largest_component: features.largest_component,
            nodes_outside_largest: features.nodes_outside_largest,
            eigenvalue: features.eigenvalue,
            eigen_iterations: features.eigen_iterations,
            eigen_converged: features.eigen_converged,
            eigen_residual: features.eigen_residual,
        },
    )
}

fn analyze_cmd(run: &mut Run, a: &AnalyzeArgs) -> Result<(), CliError> {
    let net = load_network(run, &a.input)?;
    let table = load_scores(run, &a.input.scores)?;
    let metric: Metric = a.input.metric.into();
    let label = label(&a.input);
    let grid = GridSpec { degree_bins: None, s_bin_width: a.grid_s_width };
    let report = analytics::gfp_report(&net, &table, metric, &grid, &label).context(|| "analyzing".into())?;
    run.write_json(&format!("gfp.{label}.{metric}.json"), &report)?;
    run.write(&format!("grid.{label}.{metric}.csv"), |w| report.grid.write_csv(w))
}

fn null_cmd(run: &mut Run, a: &NullArgs, seed: u64) -> Result<(), CliError> {
    let net = load_network(run, &a.input)?;
    let table = load_scores(run, &a.input.scores)?;
    let metric: Metric = a.input.metric.into();
    let model: NullModel = a.model.into();
    let config = NullConfig::new(model, a.reps, a.swap_mult, seed).map_err(|e| usage(e.to_string()))?;
    let scores = analytics::align_scores(&net, &table.metric(metric));
    let baseline = nullmodels::baseline_summary(&net, &scores, &config).context(|| "running the null model".into())?;
    let label = label(&a.input);
    run.write_json(&format!("null.{label}.{model}.{metric}.json"), &baseline)?;
    if let Some(path) = &a.report {
        let reader = run.open(path)?;
        let mut report: GfpReport = serde_json::from_reader(reader).context(|| format!("reading {}", path.display()))?;
        if report.metric != metric {
            return Err(data(
                "extending the report",
                Error::InvalidArgument(format!("report is for {} but --metric is {metric}", report.metric)),
            ));
        }
        match model {
            NullModel::EdgeSwap => report.baseline1 = Some(baseline),
            NullModel::NeighborReassign => report.baseline2 = Some(baseline),
        }
        let name = format!("gfp.{}.{metric}.json", report.network);
        run.write_json(&name, &report)?;
    }
    Ok(())
}

fn predict_cmd(run: &mut Run, a: &PredictArgs, seed: u64) -> Result<(), CliError> {
    let net = load_network(run, &a.input)?;
    let table = load_scores(run, &a.input.scores)?;
    let metric: Metric = a.input.metric.into();
    if net.node_count() == 0 {
        return Err(data("building features", Error::InsufficientData("the network is empty".into())));
    }
    let features = netbuild::node_features(&net).context(|| "computing node features".into())?;
    let matrix = predict::build_feature_matrix(&net, &table, &features, metric).context(|| "building features".into())?;
    if matrix.rows_dropped > 0 {
        log::info!("dropped {} rows with undefined values", matrix.rows_dropped);
    }
    if matrix.n_rows() == 0 {
        return Err(data(
            "building features",
            Error::InsufficientData(format!(
                "no complete feature rows; {} dropped for undefined scores, friend averages or missing metadata",
                matrix.rows_dropped
            )),
        ));
    }
    let (train, test) = matrix.train_test_split(a.test_frac, seed).context(|| "splitting rows".into())?;
    let report: FitReport = match a.model {
        ModelArg::Linear => predict::fit_friend_linear_split(&train, &test, metric).context(|| "fitting".into())?,
        ModelArg::Forest => {
            let mut params = if a.search {
                let search = predict::random_search(&train, a.search_settings, a.folds, seed)
                    .context(|| "searching forest parameters".into())?;
                run.write_json(&format!("search.{metric}.json"), &search)?;
                search.best
            } else {
                ForestParams::for_metric(metric, seed)
            };
            params.max_features = params.max_features.min(train.n_cols());
            let fit = predict::fit_forest(&train, &test, &params, metric, a.shuffles).context(|| "fitting".into())?;
            let mut report = fit.report;
            report.vif = match predict::compute_vif(&train) {
                Ok(v) => Some(v),
                Err(e) => {
                    log::warn!("VIF not computed: {e}");
                    None
                }
            };
            run.write(&format!("model.forest.{metric}.json"), |w| fit.forest.to_json(w))?;
            if let Some(imps) = &report.importances {
                run.write(&format!("importances.{metric}.csv"), |w| predict::write_importances_csv(imps, w))?;
            }
            report
        }
    };
    let model = match a.model {
        ModelArg::Linear => "linear",
        ModelArg::Forest => "forest",
    };
    run.write_json(&format!("fit.{model}.{metric}.json"), &report)
}

#[derive(Serialize)]
struct SynthSummary {
    n_nodes: usize,
    edges: usize,
    dropped_stubs: usize,
    events: usize,
    users_with_meta: usize,
    attributes: synth::AttributeAssignment,
}

fn synth_cmd(run: &mut Run, cli: &Cli, a: &SynthArgs) -> Result<u64, CliError> {
    let reader = run.open(&a.config)?;
    let mut config: SynthConfig = serde_json::from_reader(reader).context(|| format!("reading {}", a.config.display()))?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate().context(|| "validating the synth config".into())?;
    let graph = synth::generate_graph(&config).context(|| "generating the graph".into())?;
    let net = &graph.network;
    let attrs = synth::assign_attributes(net, &config).context(|| "assigning attributes".into())?;
    let corpus = synth::generate_event_log(net, &attrs.scores, &config.events, config.seed)
        .context(|| "generating events".into())?;
    run.write("events.jsonl", |w| ingest::write_event_log(&corpus.events, w))?;
    run.write("meta.jsonl", |w| ingest::write_user_meta(&corpus.meta, w))?;
    run.write("truth.edges", |w| netbuild::write_edge_list(net, w))?;
    run.write("truth_attributes.csv", |w| {
        writeln!(w, "user,attribute,planted_iar,planted_sar")?;
        for (p, s) in corpus.planted.iter().zip(&attrs.scores) {
            writeln!(w, "{},{s},{},{}", p.user, p.iar, p.sar)?;
        }
        Ok(())
    })?;
    run.write_json("window.json", &corpus.window)?;
    run.write_json("synth_config.json", &config)?;
    run.write_json(
        "synth_summary.json",
        &SynthSummary {
            n_nodes: net.node_count(),
            edges: net.edge_count(),
            dropped_stubs: graph.dropped_stubs,
            events: corpus.events.len(),
            users_with_meta: corpus.meta.len(),
            attributes: attrs,
        },
    )?;
    Ok(config.seed)
}

/// One row of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
struct SummaryRow {
    network: String,
    metric: Metric,
    rho_ks: Option<f64>,
    rho_ks_p: Option<f64>,
    p_real: f64,
    p_baseline1: Option<f64>,
    p_baseline2: Option<f64>,
    mean_s: f64,
    mean_s_nn_real: f64,
    mean_s_nn_baseline1: Option<f64>,
    mean_s_nn_baseline2: Option<f64>,
    homophily: Option<f64>,
    homophily_p: Option<f64>,
    n_nodes: usize,
}

const SUMMARY_COLUMNS: [&str; 14] = [
    "network",
    "metric",
    "rho_ks",
    "rho_ks_p",
    "P_real",
    "P_baseline1",
    "P_baseline2",
    "mean_s",
    "mean_s_nn_real",
    "mean_s_nn_baseline1",
    "mean_s_nn_baseline2",
    "homophily",
    "homophily_p",
    "n_nodes",
];

impl SummaryRow {
    fn of(r: &GfpReport) -> Self {
        SummaryRow {
            network: r.network.clone(),
            metric: r.metric,
            rho_ks: r.rho_ks.map(|c| c.coefficient),
            rho_ks_p: r.rho_ks.map(|c| c.p_value),
            p_real: r.p,
            p_baseline1: r.baseline1.as_ref().map(|b| b.p.null_mean),
            p_baseline2: r.baseline2.as_ref().map(|b| b.p.null_mean),
            mean_s: r.mean_s,
            mean_s_nn_real: r.mean_s_nn,
            mean_s_nn_baseline1: r.baseline1.as_ref().map(|b| b.mean_s_nn.null_mean),
            mean_s_nn_baseline2: r.baseline2.as_ref().map(|b| b.mean_s_nn.null_mean),
            homophily: r.homophily.map(|c| c.coefficient),
            homophily_p: r.homophily.map(|c| c.p_value),
            n_nodes: r.n_nodes_used,
        }
    }

    fn cells(&self, fmt: impl Fn(f64) -> String) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(&fmt).unwrap_or_default();
        vec![
            self.network.clone(),
            self.metric.to_string(),
            opt(self.rho_ks),
            opt(self.rho_ks_p),
            fmt(self.p_real),
            opt(self.p_baseline1),
            opt(self.p_baseline2),
            fmt(self.mean_s),
            fmt(self.mean_s_nn_real),
            opt(self.mean_s_nn_baseline1),
            opt(self.mean_s_nn_baseline2),
            opt(self.homophily),
            opt(self.homophily_p),
            self.n_nodes.to_string(),
        ]
    }
}

fn report_cmd(run: &mut Run, a: &ReportArgs) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for path in &a.reports {
        let reader = run.open(path)?;
        let report: GfpReport = serde_json::from_reader(reader).context(|| format!("reading {}", path.display()))?;
        rows.push(SummaryRow::of(&report));
    }
    run.write("summary.csv", |w| {
        writeln!(w, "{}", SUMMARY_COLUMNS.join(","))?;
        for r in &rows {
            let cells: Vec<String> = r.cells(|v| v.to_string()).into_iter().map(|c| csv_field(&c)).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    })?;
    run.write("summary.md", |w| {
        writeln!(w, "| {} |", SUMMARY_COLUMNS.join(" | "))?;
        writeln!(w, "|{}", "---|".repeat(SUMMARY_COLUMNS.len()))?;
        for r in &rows {
            writeln!(w, "| {} |", r.cells(|v| format!("{v:.4}")).join(" | "))?;
        }
        Ok(())
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
