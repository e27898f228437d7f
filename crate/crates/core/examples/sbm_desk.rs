//! Desk-scale run on a two-block stochastic block model.
//!
//! Usage: `cargo run --release --example sbm_desk -- [informative_dims] [noise_dims] [graph_seed] [train_seed]`

use std::time::Instant;

use signa::diffcore::{Purpose, RngStream};
use signa::evaluate::{
    classify_on_splits, evaluate_clustering, make_splits, KmeansConfig, ProbeConfig, SplitRatios,
};
use signa::graphdata::{sbm_generate, SbmParams};
use signa::trainer::{train, TrainConfig};

fn main() -> signa::Result<()> {
    let args: Vec<u64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("integer argument"))
        .collect();
    let informative = args.first().copied().unwrap_or(12) as usize;
    let noise = args.get(1).copied().unwrap_or(52) as usize;
    let graph_seed = args.get(2).copied().unwrap_or(0);
    let train_seed = args.get(3).copied().unwrap_or(0);

    let params = SbmParams::shifted_means(vec![100, 100], 0.1, 0.01, informative, 1.0, 1.0)
        .with_noise_dims(noise);
    let graph = sbm_generate(&params, &mut RngStream::new(graph_seed, Purpose::Data))?;
    let preset = concat!(env!("CARGO_MANIFEST_DIR"), "/../../presets/sbm_desk.json");
    let mut config = TrainConfig::from_json_file(preset)?;
    config.seed = train_seed;
    config.log_every = 0;

    let start = Instant::now();
    let out = train(&graph, &config)?;
    let h = out.state.inference_embeddings(&graph)?;
    let labels = graph.labels().expect("sbm labels");
    let ratios = SplitRatios::default();
    let splits = make_splits(labels.len(), ratios, 20, train_seed)?;
    let probe = ProbeConfig::default();
    let emb = classify_on_splits(&h, labels, &splits, ratios, &probe)?;
    let raw = classify_on_splits(graph.features(), labels, &splits, ratios, &probe)?;
    let km = KmeansConfig::default();
    let emb_nmi = evaluate_clustering(&h, labels, train_seed, &km)?.nmi;
    let raw_nmi = evaluate_clustering(graph.features(), labels, train_seed, &km)?.nmi;
    println!(
        "features {informative}+{noise}  loss {:.4} -> {:.4}  probe {:.4} (raw {:.4})  nmi {:.4} (raw {:.4})  {:.1}s",
        out.loss_curve[0],
        out.final_loss().unwrap_or(f64::NAN),
        emb.accuracy.mean,
        raw.accuracy.mean,
        emb_nmi,
        raw_nmi,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
