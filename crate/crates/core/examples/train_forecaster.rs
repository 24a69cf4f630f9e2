//! Trains the forecaster on the synthetic fixture with a chronological holdout.
//!
//! `cargo run --release --example train_forecaster -- [epochs] [units]`

use site_lookahead::features::{build_feature_rows, prepare_dataset, FEATURE_WIDTH};
use site_lookahead::gru::{fit, param_count_for, TrainConfig};
use site_lookahead::synth::site_fixture;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>());
    let epochs = args.next().transpose()?.unwrap_or(20);
    let units = args.next().transpose()?.unwrap_or(64);

    let fx = site_fixture(0)?;
    let observations = fx.progress.quantity_observations(&fx.bim)?;
    let metrics: Vec<_> = fx.scenes.iter().map(|s| s.expected.clone()).collect();
    let table = build_feature_rows(&observations, &metrics, &fx.bim)?;
    let data = prepare_dataset(&table, 18, 1, 18)?;

    let config = TrainConfig {
        epochs,
        units,
        ..TrainConfig::default()
    };
    println!("parameters: {:?}", param_count_for(units, FEATURE_WIDTH).as_tuple());
    let (_, report) = fit(&data.split, &config)?;
    for e in report.epochs.iter().step_by((epochs / 10).max(1)) {
        println!(
            "epoch {:>4}: train mse {:.5} mae {:.5} | val mse {:.5} mae {:.5}",
            e.epoch, e.train_mse, e.train_mae, e.val_mse, e.val_mae
        );
    }
    println!(
        "test mse {:.5} mae {:.5} ({:.1}s)",
        report.test_mse.unwrap(),
        report.test_mae.unwrap(),
        report.wall_time_secs
    );
    Ok(())
}
