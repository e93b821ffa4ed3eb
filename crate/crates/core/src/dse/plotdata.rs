use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::DseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    /// From a saturation-search log: x = injection rate, y = latency.
    LatencyVsLoad,
    /// From sweep results: x = proxy throughput, y = proxy latency.
    ParetoScatter,
}

impl std::str::FromStr for PlotKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "latency_vs_load" => Ok(PlotKind::LatencyVsLoad),
            "pareto_scatter" => Ok(PlotKind::ParetoScatter),
            other => Err(format!("unknown plot kind {other:?} (latency_vs_load, pareto_scatter)")),
        }
    }
}

struct Table {
    header: csv::StringRecord,
    records: Vec<csv::StringRecord>,
}

impl Table {
    fn column(&self, name: &str) -> Result<usize, DseError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DseError::Plot(format!("missing column {name:?}")))
    }

    fn optional(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

fn number(record: &csv::StringRecord, col: usize) -> Option<f64> {
    record.get(col)?.trim().parse().ok()
}

/// Reshapes a results or log CSV into `series,x,y,...` rows ready for
/// plotting, sorted by series then x.
pub fn plot_data<R: Read, W: Write>(input: R, kind: PlotKind, output: W) -> Result<(), DseError> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    let records = reader.records().collect::<Result<Vec<_>, _>>()?;
    if records.is_empty() {
        return Err(DseError::Plot("no rows".into()));
    }
    let table = Table { header, records };
    let mut w = csv::Writer::from_writer(output);
    match kind {
        PlotKind::LatencyVsLoad => {
            let rate = table.column("rate")?;
            let latency = table.column("avg_latency_cycles")?;
            let saturated = table.optional("saturated");
            let series = table.optional("design");
            let mut rows: Vec<(String, f64, f64, String)> = table
                .records
                .iter()
                .filter_map(|r| {
                    let key = series.and_then(|c| r.get(c)).unwrap_or("").to_string();
                    let sat = saturated.and_then(|c| r.get(c)).unwrap_or("").to_string();
                    Some((key, number(r, rate)?, number(r, latency)?, sat))
                })
                .collect();
            rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            w.write_record(["series", "injection_rate", "latency_cycles", "saturated"])?;
            for (key, x, y, sat) in rows {
                w.write_record([key, x.to_string(), y.to_string(), sat])?;
            }
        }
        PlotKind::ParetoScatter => {
            let topology = table.column("topology")?;
            let latency = table.column("latency_cycles")?;
            let throughput = table.column("throughput_units")?;
            let overhead = table.column("area_overhead")?;
            let index = table.optional("index");
            let bits = table.optional("shg_bits");
            let mut rows: Vec<(String, f64, f64, f64, String, String)> = table
                .records
                .iter()
                .filter_map(|r| {
                    Some((
                        r.get(topology)?.to_string(),
                        number(r, throughput)?,
                        number(r, latency)?,
                        number(r, overhead)?,
                        bits.and_then(|c| r.get(c)).unwrap_or("").to_string(),
                        index.and_then(|c| r.get(c)).unwrap_or("").to_string(),
                    ))
                })
                .collect();
            if rows.is_empty() {
                return Err(DseError::Plot("no rows with proxy results".into()));
            }
            rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)));
            w.write_record(["series", "throughput_units", "latency_cycles", "area_overhead", "shg_bits", "index"])?;
            for (key, x, y, o, b, i) in rows {
                w.write_record([key, x.to_string(), y.to_string(), o.to_string(), b, i])?;
            }
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(input: &str, kind: PlotKind) -> Result<String, DseError> {
        let mut out = Vec::new();
        plot_data(input.as_bytes(), kind, &mut out)?;
        Ok(String::from_utf8(out).unwrap())
    }

    #[test]
    fn log_rows_sorted_by_rate() {
        let log = "rate,saturated,avg_latency_cycles\n0.2,true,300\n0.1,false,60\n0.11,false,65\n";
        let out = run(log, PlotKind::LatencyVsLoad).unwrap();
        let xs: Vec<&str> = out.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
        assert_eq!(xs, ["0.1", "0.11", "0.2"]);
    }

    #[test]
    fn scatter_keeps_overhead() {
        let results = "index,topology,shg_bits,latency_cycles,throughput_units,area_overhead\n\
                       0,shg,0000,80,100,0\n1,shg,1111,60,200,0.2\n2,shg,0101,,,\n";
        let out = run(results, PlotKind::ParetoScatter).unwrap();
        assert_eq!(out.lines().count(), 3);
        assert!(out.contains("shg,200,60,0.2,1111,1"));
    }

    #[test]
    fn empty_and_missing_columns() {
        let err = run("rate,avg_latency_cycles\n", PlotKind::LatencyVsLoad).unwrap_err();
        assert_eq!(err.to_string(), "no rows");
        let err = run("x,y\n1,2\n", PlotKind::LatencyVsLoad).unwrap_err();
        assert!(err.to_string().contains("missing column \"rate\""));
    }
}
