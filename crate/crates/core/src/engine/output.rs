use std::io::Write;

use serde::Serialize;

use super::NodeOutcome;

pub const NODE_CSV_HEADER: [&str; 6] = ["trial", "node_id", "class", "decided", "estimate", "crashed"];

/// One row per node: `trial,node_id,class,decided,estimate,crashed`.
/// A missing estimate is an empty field.
pub fn write_node_csv<'a, W: Write>(
    out: W,
    rows: impl IntoIterator<Item = (u32, &'a NodeOutcome)>,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(NODE_CSV_HEADER)?;
    for (trial, r) in rows {
        w.write_record([
            trial.to_string(),
            r.id.to_string(),
            r.class.to_string(),
            r.decided.to_string(),
            r.estimate.map(|e| e.to_string()).unwrap_or_default(),
            r.crashed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty-printed JSON, one document.
pub fn write_summary_json<W: Write, T: Serialize + ?Sized>(out: W, value: &T) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(out, value)
}
