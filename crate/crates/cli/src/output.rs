use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

/// `%.17g`: shortest of fixed/scientific notation with 17 significant digits.
pub fn g17(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.16e}");
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-5..17).contains(&exp) {
        let fixed = format!("{:.*}", (16 - exp) as usize, v);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{}{:02}", trim_zeros(mant), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s += &r.join(",");
            s.push('\n');
        }
        s
    }
}

/// Writes `text` to `out` or stdout.
pub fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

/// `<out>.config.json` next to a CSV output.
pub fn config_path(out: &Path) -> PathBuf {
    out.with_extension("config.json")
}

pub fn write_config(out: Option<&Path>, config: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(config).map_err(|e| CliError::Io(e.to_string()))?;
    match out {
        Some(p) => emit(Some(&config_path(p)), &(text + "\n")),
        None => {
            log::info!("resolved config: {text}");
            Ok(())
        }
    }
}

/// Companion gnuplot script `<out>.gp` plotting `ycols` against the first column.
pub fn write_gnuplot(csv: &Path, table: &Table, ycols: &[usize]) -> Result<PathBuf, CliError> {
    let script = csv.with_extension("gp");
    let name = csv.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut s = String::new();
    s += "set datafile separator ','\n";
    s += "set key autotitle columnhead\n";
    s += &format!("set xlabel '{}'\n", table.header[0]);
    let plots: Vec<String> = ycols.iter().map(|c| format!("'{name}' using 1:{} with lines", c + 1)).collect();
    s += &format!("plot {}\n", plots.join(", \\\n     "));
    s += "pause mouse close\n";
    emit(Some(&script), &s)?;
    Ok(script)
}
