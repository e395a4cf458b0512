// Scratch harness for tuning the desk-scale comparison; not part of the
// library surface.

use std::time::Instant;

use tmn_core::data::{generate_synthetic_with_latents, EvalSplit, SynthConfig};
use tmn_core::evaluation::{auc, calibration_sweep, closed_world_accuracy, ScoreMatrix};
use tmn_core::model::{ModelKind, ModelParams, ModularNetConfig};
use tmn_core::training::{fit, NegativeCount, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let get = |i: usize, default: f64| -> f64 {
        args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default)
    };
    let sigma = get(1, 0.1);
    let spp = get(2, 20.0) as usize;
    let epochs = get(3, 30.0) as usize;
    let m = get(4, 8.0) as usize;
    let d = get(5, 8.0) as usize;
    let e = get(6, 8.0) as usize;
    let gh = get(7, 32.0) as usize;
    let k = get(8, 20.0) as usize;
    let layers = get(9, 3.0) as usize;
    let seeds = get(10, 2.0) as usize;
    let latent = get(11, 12.0) as usize;
    let pretrained = get(12, 0.0) as usize; // 0 none, 1 init, 2 init+freeze
    let feat_dim = get(13, 64.0) as usize;

    let synth = SynthConfig {
        noise: sigma,
        samples_per_pair: spp,
        latent_dim: latent,
        feature_dim: feat_dim,
        ..SynthConfig::default()
    };
    let (dataset, latents) = generate_synthetic_with_latents(&synth).unwrap();
    let e = if pretrained > 0 { latent } else { e };
    println!(
        "sigma={sigma} spp={spp} ep={epochs} M={m} d={d} e={e} gh={gh} K={k} L={layers} latent={latent} pre={pretrained}"
    );
    for kind in [ModelKind::Tmn, ModelKind::TaskAgnostic, ModelKind::NoJoint] {
        let mut aucs = Vec::new();
        for seed in 1..=seeds as u64 {
            let t0 = Instant::now();
            let cfg = ModularNetConfig::uniform(layers, m, d, dataset.feature_dim, gh, e);
            let params = ModelParams::init(
                kind,
                cfg,
                dataset.vocab.objects().to_vec(),
                dataset.vocab.attributes().to_vec(),
                seed,
                if pretrained > 0 { Some(&latents) } else { None },
            )
            .unwrap();
            let tc = TrainConfig {
                batch_size: 128,
                negatives: if k == 0 {
                    NegativeCount::All
                } else {
                    NegativeCount::Count(k)
                },
                epochs,
                seed,
                freeze_embeddings: pretrained == 2,
                ..TrainConfig::default()
            };
            let fitted = fit(params, &dataset, &tc).unwrap();
            let matrix = ScoreMatrix::build(
                &fitted.best,
                &dataset.val,
                &dataset.splits.candidates(EvalSplit::Val),
            )
            .unwrap();
            let val_auc = auc(&calibration_sweep(&matrix, 1).unwrap());
            let cw = closed_world_accuracy(&matrix, 1).unwrap();
            let losses: Vec<String> = fitted
                .logs
                .iter()
                .step_by((epochs / 4).max(1))
                .map(|l| format!("{:.3}", l.mean_loss))
                .collect();
            aucs.push(val_auc);
            println!(
                "  {} s{seed}: auc={val_auc:.4} cw={cw:.3} best_ep={:?} loss[{}] [{:.0}s]",
                kind.as_str(),
                fitted.best_epoch,
                losses.join(","),
                t0.elapsed().as_secs_f64()
            );
        }
        let mean: f64 = aucs.iter().sum::<f64>() / aucs.len() as f64;
        println!("  {} MEAN={mean:.4}", kind.as_str());
    }
}
