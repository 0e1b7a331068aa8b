//! Tabular p-box export: one `x,p` column pair per bound.

use uqsched_core::{PBox, StepCdf};

pub const HEADER: [&str; 4] = ["lower_x", "lower_p", "upper_x", "upper_p"];

fn cell(cdf: &StepCdf, i: usize) -> [String; 2] {
    match (cdf.knots().get(i), cdf.cum_probs().get(i)) {
        (Some(x), Some(p)) => [x.to_string(), p.to_string()],
        _ => [String::new(), String::new()],
    }
}

/// Rows run to the longer bound; the shorter one is padded with empty cells.
pub fn pbox_csv(band: &PBox) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).expect("write to memory");
    let rows = band.lower().knots().len().max(band.upper().knots().len());
    for i in 0..rows {
        let [lx, lp] = cell(band.lower(), i);
        let [ux, up] = cell(band.upper(), i);
        w.write_record([lx, lp, ux, up]).expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is utf-8")
}
