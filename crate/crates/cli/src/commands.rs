use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;
use serde_json::json;

use signa::diffcore::{Purpose, RngStream};
use signa::evaluate::{
    evaluate_classification, evaluate_clustering, similarity_histograms, timing_harness,
    ClassificationSummary, KmeansConfig, MetricsReport, ProbeConfig, SplitRatios,
};
use signa::graphdata::{
    load_graph, local_homophily, sbm_generate, write_edge_list, write_features_csv, write_labels,
    Graph, LoadOptions, SbmParams,
};
use signa::trainer::{
    apply_ablation, export_embeddings, load_checkpoint, save_checkpoint, Ablation, TrainConfig,
};
use signa::{Result, SignaError};

use crate::manifest::RunManifest;
use crate::{EvalMode, Globals, GraphArgs};

pub struct Overrides {
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub mask_rate: Option<f64>,
    pub ablation: Option<String>,
}

pub struct EvalOptions {
    pub mode: EvalMode,
    pub runs: usize,
    pub bins: usize,
    pub pairs: Option<usize>,
    pub repeats: usize,
}

fn io_err(path: &Path, e: std::io::Error) -> SignaError {
    SignaError::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn write(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| io_err(path, e))
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn load(args: &GraphArgs, manifest: &mut RunManifest) -> Result<Graph> {
    let loaded = load_graph(
        &args.edges,
        &args.features,
        args.labels.as_deref(),
        LoadOptions {
            feature_header: args.feature_header,
        },
    )?;
    manifest.input(&args.edges)?;
    manifest.input(&args.features)?;
    if let Some(l) = &args.labels {
        manifest.input(l)?;
    }
    info!(
        "loaded {} nodes, {} edges, {} features",
        loaded.graph.num_nodes(),
        loaded.graph.num_edges(),
        loaded.graph.feature_dim()
    );
    Ok(loaded.graph)
}

fn require_labels(graph: &Graph) -> Result<&[usize]> {
    graph
        .labels()
        .ok_or_else(|| SignaError::InvalidArgument("this command needs --labels".into()))
}

/// Parses `none`, `no_dropout`, `nfm=0.3`, `no_stoch_mask`, `all_mask` or `no_all`.
pub fn parse_ablation(text: &str) -> Result<Ablation> {
    let (kind, arg) = match text.split_once('=') {
        Some((k, v)) => (k.trim(), Some(v.trim())),
        None => (text.trim(), None),
    };
    let value = match (kind, arg) {
        ("nfm", Some(v)) => {
            let p: f64 = v
                .parse()
                .map_err(|_| SignaError::Config(vec![format!("ablation {text}: bad p_feat")]))?;
            json!({ "kind": "nfm", "p_feat": p })
        }
        ("nfm", None) => {
            return Err(SignaError::Config(vec![
                "ablation nfm needs a value, e.g. nfm=0.3".into(),
            ]))
        }
        (k, None) => json!({ "kind": k }),
        (_, Some(_)) => {
            return Err(SignaError::Config(vec![format!(
                "ablation {text} takes no value"
            )]))
        }
    };
    serde_json::from_value(value)
        .map_err(|e| SignaError::Config(vec![format!("ablation {text}: {e}")]))
}

fn config_json(config: &TrainConfig) -> Result<serde_json::Value> {
    Ok(json!({
        "config": config,
        "effective": apply_ablation(config)?,
    }))
}

fn classify(
    state: &signa::encoder::EncoderState,
    graph: &Graph,
    runs: usize,
    seed: u64,
) -> Result<ClassificationSummary> {
    let h = state.inference_embeddings(graph)?;
    evaluate_classification(
        &h,
        require_labels(graph)?,
        SplitRatios::default(),
        runs,
        seed,
        &ProbeConfig::default(),
    )
}

pub fn homophily(g: &Globals, args: &GraphArgs, out: &Path) -> Result<()> {
    let mut manifest = RunManifest::start("homophily", g.seed.unwrap_or(0), g.threads);
    let graph = load(args, &mut manifest)?;
    require_labels(&graph)?;
    let report = local_homophily(&graph)?;
    out_dir(out)?;
    let files = [
        ("homophily.json", serde_json::to_string_pretty(&report)?),
        ("local_count_histogram.csv", report.count_histogram_csv()),
        ("local_ratio_histogram.csv", report.ratio_histogram_csv()),
        ("local_per_node.csv", report.per_node_csv()),
    ];
    for (name, body) in files {
        let path = out.join(name);
        write(&path, &body)?;
        manifest.output(&path)?;
    }
    match report.global_ratio {
        Some(r) => info!("global homophily {r:.6} over {} edges", report.num_edges),
        None => warn!("graph has no edges; global homophily undefined"),
    }
    manifest.finish(&out.join("manifest.json"))
}

fn resolve_config(g: &Globals, path: &Path, o: &Overrides) -> Result<TrainConfig> {
    let mut config = TrainConfig::from_json_file(path)?;
    if let Some(s) = g.seed {
        config.seed = s;
    }
    if let Some(p) = g.precision {
        config.precision = p;
    }
    if let Some(e) = o.epochs {
        config.num_epochs = e;
    }
    if let Some(lr) = o.learning_rate {
        config.learning_rate = lr;
    }
    if let Some(a) = o.mask_rate {
        config.mask_rate = a;
    }
    if let Some(a) = &o.ablation {
        config.ablation = parse_ablation(a)?;
    }
    config.validate()?;
    Ok(config)
}

pub fn train(
    g: &Globals,
    config_path: &Path,
    args: &GraphArgs,
    out: &Path,
    o: Overrides,
) -> Result<()> {
    let config = resolve_config(g, config_path, &o)?;
    let mut manifest = RunManifest::start("train", config.seed, g.threads);
    manifest.config(config_path, config_json(&config)?)?;
    let graph = load(args, &mut manifest)?;
    let outcome = signa::trainer::train(&graph, &config)?;
    out_dir(out)?;

    let ckpt = out.join("checkpoint.json");
    save_checkpoint(
        &outcome.state,
        &config,
        outcome.final_loss(),
        outcome.loss_curve.len(),
        &ckpt,
    )?;
    manifest.output(&ckpt)?;
    let mut curve = String::from("epoch,loss\n");
    for (e, l) in outcome.loss_curve.iter().enumerate() {
        curve.push_str(&format!("{e},{l}\n"));
    }
    let curve_path = out.join("loss_curve.csv");
    write(&curve_path, &curve)?;
    manifest.output(&curve_path)?;
    info!(
        "trained {} epochs, loss {:.6} -> {:.6}",
        outcome.loss_curve.len(),
        outcome.loss_curve[0],
        outcome.final_loss().unwrap_or(f64::NAN)
    );
    manifest.finish(&out.join("manifest.json"))
}

pub fn eval(
    g: &Globals,
    checkpoint: &Path,
    args: &GraphArgs,
    out: &Path,
    opts: EvalOptions,
) -> Result<()> {
    let (state, config) = load_checkpoint(checkpoint, g.precision)?;
    let seed = g.seed.unwrap_or(config.seed);
    let mode = format!("{:?}", opts.mode).to_lowercase();
    let mut manifest = RunManifest::start(&format!("eval {mode}"), seed, g.threads);
    manifest.input(checkpoint)?;
    let graph = load(args, &mut manifest)?;
    if graph.feature_dim() != state.in_dim() {
        return Err(SignaError::Dimension {
            op: "checkpoint input dimension vs graph features",
            left: vec![state.in_dim()],
            right: vec![graph.feature_dim()],
        });
    }
    out_dir(out)?;
    let mut report = MetricsReport::new(&mode, seed);
    report.config = Some(config_json(&config)?);
    match opts.mode {
        EvalMode::Classify => {
            let s = classify(&state, &graph, opts.runs, seed)?;
            info!("micro-F1 {:.4} over {} runs", s.micro_f1.mean, s.runs.len());
            report.classification = Some(s);
        }
        EvalMode::Cluster => {
            let labels = require_labels(&graph)?;
            let h = state.inference_embeddings(&graph)?;
            let s = evaluate_clustering(&h, labels, seed, &KmeansConfig::default())?;
            info!("NMI {:.4}, homogeneity {:.4}", s.nmi, s.homogeneity);
            report.clustering = Some(s);
        }
        EvalMode::Histograms => {
            let h = state.inference_embeddings(&graph)?;
            let mut rng = RngStream::new(seed, Purpose::Probe);
            let hist =
                similarity_histograms(&h, &graph, opts.bins, opts.pairs.map(|n| (n, &mut rng)))?;
            let path = out.join("similarity_histograms.csv");
            write(&path, &hist.to_csv())?;
            manifest.output(&path)?;
            report.outputs.push("similarity_histograms.csv".into());
        }
        EvalMode::Timing => {
            let t = timing_harness(&graph, &state, opts.repeats)?;
            info!("GCN / MLP inference time ratio {:.2}", t.gcn_over_mlp);
            report.timing = Some(t);
        }
    }
    let path = out.join(format!("metrics_{mode}.json"));
    write(&path, &report.to_json_pretty()?)?;
    manifest.output(&path)?;
    manifest.finish(&out.join(format!("manifest_{mode}.json")))
}

pub fn embed(g: &Globals, checkpoint: &Path, args: &GraphArgs, out: &Path) -> Result<()> {
    let (state, config) = load_checkpoint(checkpoint, g.precision)?;
    let mut manifest = RunManifest::start("embed", g.seed.unwrap_or(config.seed), g.threads);
    manifest.input(checkpoint)?;
    let graph = load(args, &mut manifest)?;
    if graph.feature_dim() != state.in_dim() {
        return Err(SignaError::Dimension {
            op: "checkpoint input dimension vs graph features",
            left: vec![state.in_dim()],
            right: vec![graph.feature_dim()],
        });
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        out_dir(parent)?;
    }
    export_embeddings(&state, &graph, out)?;
    manifest.output(out)?;
    manifest.finish(&out.with_extension("manifest.json"))
}

#[derive(Debug, Serialize)]
struct AblationRow {
    variant: String,
    ablation: Option<Ablation>,
    final_loss: Option<f64>,
    classification: Option<ClassificationSummary>,
    error: Option<String>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.6}"))
}

pub fn ablate(
    g: &Globals,
    config_path: &Path,
    args: &GraphArgs,
    variants: &[String],
    out: &Path,
    runs: usize,
) -> Result<()> {
    let base = resolve_config(
        g,
        config_path,
        &Overrides {
            epochs: None,
            learning_rate: None,
            mask_rate: None,
            ablation: None,
        },
    )?;
    let parsed = variants
        .iter()
        .map(|v| parse_ablation(v))
        .collect::<Result<Vec<_>>>()?;
    let mut manifest = RunManifest::start("ablate", base.seed, g.threads);
    manifest.config(config_path, config_json(&base)?)?;
    let graph = load(args, &mut manifest)?;
    require_labels(&graph)?;
    out_dir(out)?;

    let mut rows = Vec::new();
    let mut first_error = None;
    for (name, ablation) in variants.iter().zip(parsed) {
        let config = base.with_ablation(ablation);
        let result = signa::trainer::train(&graph, &config)
            .and_then(|o| Ok((o.final_loss(), classify(&o.state, &graph, runs, base.seed)?)));
        let row = match result {
            Ok((loss, summary)) => {
                info!("{name}: micro-F1 {:.4}", summary.micro_f1.mean);
                AblationRow {
                    variant: name.clone(),
                    ablation: Some(ablation),
                    final_loss: loss,
                    classification: Some(summary),
                    error: None,
                }
            }
            Err(e) => {
                warn!("{name} failed: {e}");
                let row = AblationRow {
                    variant: name.clone(),
                    ablation: Some(ablation),
                    final_loss: None,
                    classification: None,
                    error: Some(e.to_string()),
                };
                first_error.get_or_insert(e);
                row
            }
        };
        rows.push(row);
    }

    let mut csv = String::from(
        "variant,micro_f1_mean,micro_f1_std,accuracy_mean,accuracy_std,final_loss,status\n",
    );
    for r in &rows {
        let c = r.classification.as_ref();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.variant,
            fmt_opt(c.map(|c| c.micro_f1.mean)),
            fmt_opt(c.and_then(|c| c.micro_f1.std)),
            fmt_opt(c.map(|c| c.accuracy.mean)),
            fmt_opt(c.and_then(|c| c.accuracy.std)),
            fmt_opt(r.final_loss),
            if r.error.is_some() { "failed" } else { "ok" },
        ));
    }
    let table: PathBuf = out.join("ablation.csv");
    write(&table, &csv)?;
    manifest.output(&table)?;
    let detail = out.join("ablation.json");
    write(&detail, &serde_json::to_string_pretty(&rows)?)?;
    manifest.output(&detail)?;
    manifest.finish(&out.join("manifest.json"))?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

pub fn sbm(g: &Globals, params: SbmParams, out: &Path) -> Result<()> {
    let seed = g.seed.unwrap_or(0);
    let mut manifest = RunManifest::start("sbm", seed, g.threads);
    let graph = sbm_generate(&params, &mut RngStream::new(seed, Purpose::Data))?;
    out_dir(out)?;
    let (edges, features, labels) = (
        out.join("edges.txt"),
        out.join("features.csv"),
        out.join("labels.txt"),
    );
    write_edge_list(&graph, &edges)?;
    write_features_csv(graph.features(), &features)?;
    write_labels(graph.labels().expect("sbm graphs are labeled"), &labels)?;
    for p in [&edges, &features, &labels] {
        manifest.output(p)?;
    }
    info!(
        "wrote {} nodes and {} edges to {}",
        graph.num_nodes(),
        graph.num_edges(),
        out.display()
    );
    manifest.finish(&out.join("manifest.json"))
}
