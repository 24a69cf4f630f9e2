//! Registers one synthetic scan into the BIM frame from corner correspondences, then
//! labels its points and computes utilization extent and closeness.

use site_lookahead::geometry::{
    apply_rigid_transform, build_enclosure, classify_points, compute_spatial_metrics,
    estimate_rigid_transform, rms_residual, DEFAULT_ALLOWANCE, TEMPORARY,
};
use site_lookahead::synth::site_fixture;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fx = site_fixture(0)?;
    let scene = &fx.scenes[0];
    let raw = scene.in_scanner_frame(&fx.bim_to_scanner);

    let (scanner, bim): (Vec<_>, Vec<_>) = fx.correspondences.iter().copied().unzip();
    let t = estimate_rigid_transform(&scanner, &bim)?;
    println!("registration residual: {:.2e} m", rms_residual(&t, &scanner, &bim));

    let registered = apply_rigid_transform(&raw, &t)?;
    let enclosures = fx
        .bim
        .elements
        .iter()
        .map(|e| build_enclosure(&e.vertices, e.id.clone(), DEFAULT_ALLOWANCE))
        .collect::<Result<Vec<_>, _>>()?;
    let labels = classify_points(&registered, &enclosures)?;
    for e in &fx.bim.elements {
        println!("{:>10}: {} points", e.id, labels.count(&e.id));
    }
    println!("{:>10}: {} points", TEMPORARY, labels.temporary_count());

    let date = raw.capture_date.expect("dated scan");
    let m = compute_spatial_metrics(&labels, &registered, "floor", date)?;
    let c = m.closeness.expect("scan has temporary objects");
    println!(
        "{date}: utilization extent {:.2}, closeness ({:.2}, {:.2}, {:.2})",
        m.utilization_extent, c[0], c[1], c[2]
    );
    Ok(())
}
