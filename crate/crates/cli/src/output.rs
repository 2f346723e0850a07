use std::path::Path;

use smallcell_core::CurveSet;

use crate::Format;

pub const CSV_HEADER: [&str; 5] = [
    "sweep_value",
    "scheme",
    "mean_rate_bps_hz",
    "ci95",
    "trials",
];

/// Twelve significant digits, so output is stable text across runs.
fn num(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn curves_to_csv(curves: &CurveSet) -> Result<Vec<u8>, String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(|e| e.to_string())?;
    for p in &curves.points {
        for s in &p.series {
            w.write_record([
                num(p.sweep_value),
                s.scheme.clone(),
                num(s.mean),
                num(s.ci95),
                s.trials.to_string(),
            ])
            .map_err(|e| e.to_string())?;
        }
    }
    w.into_inner().map_err(|e| e.to_string())
}

pub fn write_curves(curves: &CurveSet, path: &Path, format: Format) -> Result<(), String> {
    let bytes = match format {
        Format::Csv => curves_to_csv(curves)?,
        Format::Json => {
            let mut v = serde_json::to_vec_pretty(curves).map_err(|e| e.to_string())?;
            v.push(b'\n');
            v
        }
    };
    std::fs::write(path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))
}
