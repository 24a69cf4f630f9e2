//! Builds the feature table from synthetic observations and scan metrics, then windows
//! and splits it chronologically.

use site_lookahead::features::{
    build_feature_rows, prepare_dataset, write_feature_table, DEFAULT_TEST_COUNT, DEFAULT_WINDOW,
};
use site_lookahead::synth::site_fixture;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fx = site_fixture(0)?;
    let observations = fx.progress.quantity_observations(&fx.bim)?;
    let metrics: Vec<_> = fx.scenes.iter().map(|s| s.expected.clone()).collect();
    let table = build_feature_rows(&observations, &metrics, &fx.bim)?;

    let mut csv = Vec::new();
    write_feature_table(&mut csv, &table)?;
    let text = String::from_utf8(csv)?;
    println!("first rows of {} ({} tasks):", table.row_count(), table.series.len());
    for line in text.lines().take(4) {
        println!("  {line}");
    }

    let data = prepare_dataset(&table, DEFAULT_WINDOW, 1, DEFAULT_TEST_COUNT)?;
    println!(
        "windows: {} train / {} validation / {} test",
        data.split.train.len(),
        data.split.validation.len(),
        data.split.test.len()
    );
    println!("scaler minima: {:?}", data.scaler.min);
    println!("scaler maxima: {:?}", data.scaler.max);
    Ok(())
}
