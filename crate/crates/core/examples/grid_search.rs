//! Searches learning rate × units on the synthetic fixture and reports validation MAE.

use site_lookahead::features::{build_feature_rows, prepare_dataset};
use site_lookahead::gru::{grid_search, GridSpec, TrainConfig};
use site_lookahead::synth::site_fixture;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fx = site_fixture(0)?;
    let observations = fx.progress.quantity_observations(&fx.bim)?;
    let metrics: Vec<_> = fx.scenes.iter().map(|s| s.expected.clone()).collect();
    let table = build_feature_rows(&observations, &metrics, &fx.bim)?;
    let data = prepare_dataset(&table, 18, 1, 18)?;

    let base = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    let grid = GridSpec {
        learning_rates: vec![0.01, 0.001],
        units: vec![8, 16, 32],
    };
    let result = grid_search(&data.split, &base, &grid)?;
    for c in &result.cells {
        println!(
            "lr {:<6} units {:>3}: val mae {:.5} mse {:.5}",
            c.learning_rate, c.units, c.val_mae, c.val_mse
        );
    }
    println!("best: lr {} units {}", result.best_learning_rate, result.best_units);
    Ok(())
}
