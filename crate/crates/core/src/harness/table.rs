//! Empirical rejection frequencies, laid out like a simulation table.

use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TableCell {
    pub scenario: String,
    pub test: String,
    pub c: Option<f64>,
    pub level: f64,
    pub rejections: usize,
    pub replications: usize,
}

impl TableCell {
    pub fn frequency(&self) -> f64 {
        if self.replications == 0 {
            0.0
        } else {
            self.rejections as f64 / self.replications as f64
        }
    }

    /// Binomial standard error `sqrt(p (1 - p) / R)`.
    pub fn mc_se(&self) -> f64 {
        if self.replications == 0 {
            return 0.0;
        }
        let p = self.frequency();
        (p * (1.0 - p) / self.replications as f64).sqrt()
    }

    fn column(&self) -> (String, Option<f64>) {
        (self.test.clone(), self.c)
    }
}

const HEADER: [&str; 8] = [
    "scenario",
    "test",
    "c",
    "level",
    "rejections",
    "replications",
    "frequency",
    "mc_se",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RejectionTable {
    pub cells: Vec<TableCell>,
}

impl RejectionTable {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn get(&self, scenario: &str, test: &str, c: Option<f64>, level: f64) -> Option<&TableCell> {
        self.cells
            .iter()
            .find(|k| k.scenario == scenario && k.test == test && k.c == c && k.level == level)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        wtr.write_record(HEADER)?;
        for k in &self.cells {
            wtr.write_record([
                k.scenario.clone(),
                k.test.clone(),
                k.c.map(|c| c.to_string()).unwrap_or_default(),
                k.level.to_string(),
                k.rejections.to_string(),
                k.replications.to_string(),
                k.frequency().to_string(),
                k.mc_se().to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != HEADER {
            return Err(Error::Data(format!("unexpected table header {header:?}")));
        }
        let mut cells = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |col: usize| -> Result<&str> {
                rec.get(col).ok_or_else(|| Error::DataCell {
                    row: row + 2,
                    column: col + 1,
                    reason: "missing".into(),
                })
            };
            let parse_f = |col: usize| -> Result<f64> {
                field(col)?.parse().map_err(|_| Error::DataCell {
                    row: row + 2,
                    column: col + 1,
                    reason: "not a number".into(),
                })
            };
            let parse_u = |col: usize| -> Result<usize> {
                field(col)?.parse().map_err(|_| Error::DataCell {
                    row: row + 2,
                    column: col + 1,
                    reason: "not a count".into(),
                })
            };
            cells.push(TableCell {
                scenario: field(0)?.to_string(),
                test: field(1)?.to_string(),
                c: if field(2)?.is_empty() { None } else { Some(parse_f(2)?) },
                level: parse_f(3)?,
                rejections: parse_u(4)?,
                replications: parse_u(5)?,
            });
        }
        Ok(Self { cells })
    }

    /// Scenarios as row blocks (one line per level), tests as columns, percentages.
    pub fn render_text(&self) -> String {
        let mut scenarios: Vec<String> = Vec::new();
        let mut columns: Vec<(String, Option<f64>)> = Vec::new();
        let mut levels: Vec<f64> = Vec::new();
        for k in &self.cells {
            if !scenarios.contains(&k.scenario) {
                scenarios.push(k.scenario.clone());
            }
            if !columns.contains(&k.column()) {
                columns.push(k.column());
            }
            if !levels.contains(&k.level) {
                levels.push(k.level);
            }
        }
        levels.sort_by(f64::total_cmp);
        let labels: Vec<String> = columns
            .iter()
            .map(|(t, c)| match c {
                Some(c) => format!("{t} c={c}"),
                None => t.clone(),
            })
            .collect();
        let width = labels.iter().map(String::len).max().unwrap_or(0).max(7);
        let label_width = scenarios.iter().map(String::len).max().unwrap_or(0);
        let row_width = label_width + 7;

        let mut out = String::new();
        let _ = write!(out, "{:<row_width$}", "");
        for l in &labels {
            let _ = write!(out, " {l:>width$}");
        }
        out.push('\n');
        for s in &scenarios {
            for &level in &levels {
                let head = format!("{s:<label_width$} {:>4}%", fmt_pct(level));
                let _ = write!(out, "{head:<row_width$}");
                for (t, c) in &columns {
                    let cell = self.get(s, t, *c, level);
                    let v = cell.map(|k| format!("{:.1}", 100.0 * k.frequency()));
                    let _ = write!(out, " {:>width$}", v.unwrap_or_else(|| "-".into()));
                }
                out.push('\n');
            }
        }
        out
    }
}

fn fmt_pct(level: f64) -> String {
    let p = 100.0 * level;
    if (p - p.round()).abs() < 1e-9 {
        format!("{}", p.round() as i64)
    } else {
        format!("{p}")
    }
}
