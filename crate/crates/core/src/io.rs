//! CSV tables with a versioned schema line, JSON manifests and emitted plot
//! scripts.
//!
//! Every table starts with `# schema: qbat.<name>.v1`, followed by a header
//! row. Floats are written in shortest round-trip form so identical runs
//! produce identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::ObservableSeries;
use crate::experiments::{PopulationSeries, PowerRow, ResonancePeak, ResonantPoint, SpectrumPoint, WirrRow};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    name: String,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(name: &str, columns: impl IntoIterator<Item = S>) -> Self {
        Table { name: name.to_string(), columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn schema_line(&self) -> String {
        format!("# schema: qbat.{}.v{SCHEMA_VERSION}", self.name)
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch { expected: self.columns.len(), got: row.len() });
        }
        self.rows.push(row);
        Ok(())
    }

    /// Appends a column; `values` must match the current row count.
    pub fn add_column(&mut self, name: &str, values: Vec<String>) -> Result<()> {
        if values.len() != self.rows.len() {
            return Err(Error::DimensionMismatch { expected: self.rows.len(), got: values.len() });
        }
        self.columns.push(name.to_string());
        for (row, v) in self.rows.iter_mut().zip(values) {
            row.push(v);
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.schema_line())?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        self.write(BufWriter::new(File::create(path)?))
    }

    /// Reads a table written by [`Table::write`], checking the schema line.
    pub fn read(path: &Path, name: &str) -> Result<Table> {
        let text = std::fs::read_to_string(path)?;
        let (first, body) = text.split_once('\n').unwrap_or((text.as_str(), ""));
        let expected = format!("# schema: qbat.{name}.v{SCHEMA_VERSION}");
        if first.trim_end() != expected {
            return Err(Error::InvalidParameter(format!("{}: expected `{expected}`, found `{first}`", path.display())));
        }
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut table = Table::new(name, columns);
        for rec in r.records() {
            table.push(rec?.iter().map(str::to_string).collect())?;
        }
        Ok(table)
    }

    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::InvalidParameter(format!("no column `{name}` in table {}", self.name)))?;
        self.rows
            .iter()
            .map(|r| r[j].parse::<f64>().map_err(|e| Error::InvalidParameter(format!("column `{name}`: {e}"))))
            .collect()
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn opt(e: &Option<String>) -> String {
    e.clone().unwrap_or_default()
}

pub fn series_table(series: &ObservableSeries) -> Table {
    let mut t = Table::new("series", ObservableSeries::COLUMNS);
    let cols = series.columns();
    for i in 0..series.len() {
        t.rows.push(cols.iter().map(|c| fmt_f64(c[i])).collect());
    }
    t
}

pub fn spectrum_table(points: &[SpectrumPoint], swept: &str) -> Table {
    let mut t = Table::new("spectrum", [swept, "omega_c", "w_c", "ratio_w", "ratio_e", "t_max", "error"]);
    for p in points {
        t.rows.push(vec![
            fmt_f64(p.value),
            fmt_f64(p.omega_c),
            fmt_f64(p.w_c),
            fmt_f64(p.ratio_w),
            fmt_f64(p.ratio_e),
            fmt_f64(p.t_max),
            opt(&p.error),
        ]);
    }
    t
}

pub fn peaks_table(peaks: &[ResonancePeak]) -> Table {
    let mut t = Table::new(
        "peaks",
        ["omega_c", "ratio", "ergotropy_ratio", "t_max", "power", "seed", "gap", "coupling"],
    );
    for p in peaks {
        t.rows.push(
            [p.omega_c, p.ratio, p.ergotropy_ratio, p.t_max, p.power, p.seed, p.gap, p.coupling]
                .into_iter()
                .map(fmt_f64)
                .collect(),
        );
    }
    t
}

pub fn power_table(rows: &[PowerRow]) -> Table {
    let mut t = Table::new(
        "power",
        ["n", "N_B", "g_B", "g_BC", "omega_c", "w_c", "power_ed", "power_tlm", "qsl_num", "qsl_tlm", "t_max", "error"],
    );
    for r in rows {
        let mut row = vec![r.n.to_string(), r.num_particles.to_string()];
        row.extend(
            [r.g_b, r.g_bc, r.omega_c, r.w_c, r.power_ed, r.power_tlm, r.qsl_num, r.qsl_tlm, r.t_max]
                .into_iter()
                .map(fmt_f64),
        );
        row.push(opt(&r.error));
        t.rows.push(row);
    }
    t
}

pub fn wirr_table(rows: &[WirrRow]) -> Table {
    let mut t = Table::new(
        "wirr",
        ["n", "N_B", "g_B", "g_BC", "omega_c", "w_c", "w_max", "w_irr", "below_1pct", "error"],
    );
    for r in rows {
        let mut row = vec![r.n.to_string(), r.num_particles.to_string()];
        row.extend([r.g_b, r.g_bc, r.omega_c, r.w_c, r.w_max, r.w_irr].into_iter().map(fmt_f64));
        row.push(r.below_one_percent.to_string());
        row.push(opt(&r.error));
        t.rows.push(row);
    }
    t
}

pub fn resonant_table(points: &[ResonantPoint]) -> Table {
    let mut t = Table::new(
        "resonant",
        [
            "n", "N_B", "g_B", "g_BC", "omega_c", "w_c", "t_max", "w_max", "ergotropy", "entropy", "w_irr", "power_ed",
            "power_tlm", "qsl_num", "qsl_tlm", "error",
        ],
    );
    for p in points {
        let mut row = vec![p.n.to_string(), p.num_particles.to_string()];
        row.extend(
            [
                p.g_b, p.g_bc, p.omega_c, p.w_c, p.t_max, p.w_max, p.ergotropy, p.entropy, p.w_irr, p.power_ed,
                p.power_tlm, p.qsl_num, p.qsl_tlm,
            ]
            .into_iter()
            .map(fmt_f64),
        );
        row.push(opt(&p.error));
        t.rows.push(row);
    }
    t
}

/// Columns `t, p_0.., lambda_0..`.
pub fn population_table(series: &PopulationSeries) -> Table {
    let k = series.populations.first().map_or(0, Vec::len);
    let mut cols = vec!["t".to_string()];
    cols.extend((0..k).map(|i| format!("p_{i}")));
    cols.extend((0..k).map(|i| format!("lambda_{i}")));
    let mut t = Table::new("populations", cols);
    for (i, &time) in series.t.iter().enumerate() {
        let mut row = vec![fmt_f64(time)];
        row.extend(series.populations[i].iter().map(|&x| fmt_f64(x)));
        row.extend(series.eigenvalues[i].iter().map(|&x| fmt_f64(x)));
        t.rows.push(row);
    }
    t
}

/// Everything needed to repeat a run: the command, its resolved
/// configuration and what it wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    #[serde(default)]
    pub diagnostics: serde_json::Value,
}

impl Manifest {
    pub fn new<C: Serialize>(command: &str, config: &C) -> Result<Self> {
        Ok(Manifest {
            tool: "qbat".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: serde_json::to_value(config)?,
            outputs: Vec::new(),
            diagnostics: serde_json::Value::Null,
        })
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        f.flush()?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }
}

/// One curve of a plot: column name on the y axis and its legend label.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub column: String,
    pub label: String,
}

impl Curve {
    pub fn new(column: &str, label: &str) -> Self {
        Curve { column: column.into(), label: label.into() }
    }
}

/// A standalone matplotlib script that reads `csv_name` (relative to the
/// script's directory) and saves `<stem>.png` next to it.
pub fn plot_script(csv_name: &str, x: &str, curves: &[Curve], title: &str, ylabel: &str) -> String {
    let stem = csv_name.trim_end_matches(".csv");
    let mut s = String::new();
    s.push_str("#!/usr/bin/env python3\n");
    s.push_str("import csv, os\nimport matplotlib\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n\n");
    s.push_str("here = os.path.dirname(os.path.abspath(__file__))\n");
    s.push_str(&format!("with open(os.path.join(here, {csv_name:?})) as f:\n"));
    s.push_str("    rows = list(csv.DictReader(line for line in f if not line.startswith(\"#\")))\n\n");
    s.push_str("def col(name):\n    return [float(r[name]) if r[name] not in (\"\", \"NaN\") else float(\"nan\") for r in rows]\n\n");
    s.push_str("fig, ax = plt.subplots()\n");
    for c in curves {
        s.push_str(&format!("ax.plot(col({x:?}), col({:?}), label={:?})\n", c.column, c.label));
    }
    s.push_str(&format!("ax.set_xlabel({x:?})\nax.set_ylabel({ylabel:?})\nax.set_title({title:?})\n"));
    s.push_str("ax.legend()\nfig.tight_layout()\n");
    s.push_str(&format!("fig.savefig(os.path.join(here, {:?}), dpi=150)\n", format!("{stem}.png")));
    s
}
