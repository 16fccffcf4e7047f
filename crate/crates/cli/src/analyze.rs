use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::stats::quantile;
use crate::{create, io_err, Failure};

#[derive(Debug, Deserialize)]
struct NodeRow {
    trial: u32,
    #[allow(dead_code)]
    node_id: String,
    class: String,
    decided: bool,
    estimate: Option<u32>,
    crashed: bool,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize)]
pub struct TrialStats {
    pub trial: u32,
    pub honest: usize,
    pub decided: usize,
    pub crashed: usize,
    pub estimate_min: Option<u32>,
    pub estimate_q1: Option<f64>,
    pub estimate_median: Option<f64>,
    pub estimate_q3: Option<f64>,
    pub estimate_max: Option<u32>,
}

/// Per-trial statistics over honest nodes, in trial order.
pub fn summarize<R: Read>(input: R) -> Result<Vec<TrialStats>, Failure> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let mut by_trial: BTreeMap<u32, (TrialStats, Vec<u32>)> = BTreeMap::new();
    for row in rdr.deserialize() {
        let row: NodeRow = row.map_err(|e| Failure::Config(format!("node csv: {e}")))?;
        if row.class == "byzantine" {
            continue;
        }
        let (s, est) = by_trial.entry(row.trial).or_default();
        s.trial = row.trial;
        s.honest += 1;
        s.decided += row.decided as usize;
        s.crashed += row.crashed as usize;
        est.extend(row.estimate);
    }
    Ok(by_trial
        .into_values()
        .map(|(mut s, mut est)| {
            est.sort_unstable();
            s.estimate_min = est.first().copied();
            s.estimate_max = est.last().copied();
            s.estimate_q1 = quantile(&est, 0.25);
            s.estimate_median = quantile(&est, 0.5);
            s.estimate_q3 = quantile(&est, 0.75);
            s
        })
        .collect())
}

pub fn cmd_analyze(input: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let f = File::open(input).map_err(io_err(input))?;
    let mut reader = BufReader::new(f);
    // Carry the config comment through so the table stays reproducible.
    let mut first = String::new();
    reader.read_line(&mut first).map_err(io_err(input))?;
    let (comment, rest) = if first.starts_with('#') {
        (Some(first.trim_end().to_string()), String::new())
    } else {
        (None, first)
    };
    let stats = summarize(rest.as_bytes().chain(reader))?;
    let mut sink: Box<dyn Write> = match out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    if let Some(c) = comment {
        writeln!(sink, "{c}").map_err(|e| Failure::Io(e.to_string()))?;
    }
    let mut w = csv::Writer::from_writer(sink);
    for s in &stats {
        w.serialize(s)?;
    }
    w.flush().map_err(|e| Failure::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_by_trial_and_skips_byzantine_rows() {
        let csv = "# {}\ntrial,node_id,class,decided,estimate,crashed\n\
                   0,1,honest,true,4,false\n0,2,honest,true,6,false\n0,3,byzantine,true,99,false\n\
                   1,1,honest,false,,true\n";
        let s = summarize(csv.as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].honest, s[0].decided, s[0].estimate_median), (2, 2, Some(5.0)));
        assert_eq!(s[0].estimate_max, Some(6));
        assert_eq!((s[1].crashed, s[1].estimate_median), (1, None));
    }

    #[test]
    fn bad_rows_are_config_errors() {
        let csv = "trial,node_id,class,decided,estimate,crashed\nx,1,honest,true,4,false\n";
        assert!(matches!(summarize(csv.as_bytes()), Err(Failure::Config(_))));
    }
}
