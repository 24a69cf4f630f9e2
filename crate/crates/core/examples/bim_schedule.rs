//! Loads the bundled 4D BIM and prints each task's planned completion on a few dates.

use chrono::NaiveDate;
use site_lookahead::synth::site_bim;

fn main() {
    let bim = site_bim();
    let dates: Vec<NaiveDate> = ["2022-02-01", "2022-04-15", "2022-06-10", "2022-07-05"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    print!("{:<28} {:>9} {:>5}", "material condition", "quantity", "unit");
    for d in &dates {
        print!(" {:>10}", d.to_string());
    }
    println!();
    for t in &bim.tasks {
        print!(
            "{:<28} {:>9} {:>5}",
            t.material_condition,
            t.planned_quantity,
            t.unit.as_str()
        );
        for d in &dates {
            print!(" {:>9.1}%", t.planned_fraction_at(*d));
        }
        println!();
    }
}
