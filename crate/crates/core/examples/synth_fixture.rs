//! Summarizes the default synthetic fixture: progress curves and scan ground truth.

use site_lookahead::synth::site_fixture;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fx = site_fixture(0)?;
    let p = &fx.progress;
    println!(
        "{} observation days, {} to {}",
        p.dates.len(),
        p.dates[0],
        p.dates[p.dates.len() - 1]
    );
    for (cond, v) in &p.actuals {
        let at = |i: usize| v[i.min(v.len() - 1)];
        println!(
            "{:<28} start {:>5.1}  day 40 {:>5.1}  day 80 {:>5.1}  end {:>5.1}",
            cond,
            at(0),
            at(40),
            at(80),
            at(v.len() - 1)
        );
    }
    for s in &fx.scenes {
        let m = &s.expected;
        println!(
            "scan {}: {} points, extent {:.2}, closeness {:?}",
            m.capture_date,
            s.cloud.len(),
            m.utilization_extent,
            m.closeness.map(|c| c.map(|x| (x * 100.0).round() / 100.0))
        );
    }
    Ok(())
}
