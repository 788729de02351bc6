//! Trains the default model on a synthetic corpus and prints the curves.
//!
//! `cargo run --release --example desk_run -- [per_class] [epochs] [seed]`

use std::time::Instant;

use bcnn::data::synth_corpus;
use bcnn::train::{train_with, TrainConfig};
use bcnn::ModelConfig;

fn main() -> bcnn::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let per_class = args.first().copied().unwrap_or(200) as usize;
    let epochs = args.get(1).copied().unwrap_or(15) as usize;
    let seed = args.get(2).copied().unwrap_or(0);

    let start = Instant::now();
    let corpus = synth_corpus(per_class, 64, seed)?;
    let cfg = TrainConfig { epochs, seed, ..TrainConfig::default() };
    let out = train_with(&corpus, &ModelConfig::default(), &cfg, |r| {
        println!(
            "epoch {:>2}  train {:.4} / {:.4}  val {:.4} / {:.4}  [{:.0?}]",
            r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc, start.elapsed()
        );
    })?;
    println!("final val acc {:.4}", out.records.last().map_or(0.0, |r| r.val_acc));
    Ok(())
}
