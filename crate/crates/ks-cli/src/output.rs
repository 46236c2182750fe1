//! Output directory resolution and small file writers shared by the
//! subcommands.
//!
//! Directory precedence: the `--out` flag, then the config's
//! `output.directory`, then the `KS_OUT_DIR` environment variable, then
//! `./ks-out`. The directory is created on demand.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::errors::CliError;

pub const OUT_ENV: &str = "KS_OUT_DIR";

pub fn resolve_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = config {
        return p.to_path_buf();
    }
    match std::env::var(OUT_ENV) {
        Ok(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from("ks-out"),
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// One header line, then the rows as given.
pub fn write_csv<I>(path: &Path, header: &str, rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = String>,
{
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    for row in rows {
        writeln!(w, "{row}")?;
    }
    w.flush()?;
    Ok(())
}

/// Companion gnuplot script; each plot pairs a `using` clause with a title.
/// The script names the CSV by its bare file name, so it runs from inside
/// the output directory.
pub fn write_gnuplot(
    path: &Path,
    csv: &str,
    title: &str,
    xlabel: &str,
    ylabel: &str,
    logscale: Option<&str>,
    plots: &[(String, String)],
) -> Result<(), CliError> {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str(&format!("set title '{title}'\n"));
    s.push_str(&format!("set xlabel '{xlabel}'\n"));
    s.push_str(&format!("set ylabel '{ylabel}'\n"));
    if let Some(axes) = logscale {
        s.push_str(&format!("set logscale {axes}\n"));
    }
    let clauses: Vec<String> = plots
        .iter()
        .map(|(using, t)| format!("'{csv}' using {using} with lines title '{t}'"))
        .collect();
    s.push_str(&format!("plot {}\n", clauses.join(", ")));
    fs::write(path, s)?;
    Ok(())
}
