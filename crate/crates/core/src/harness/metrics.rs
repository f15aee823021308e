use crate::trainer::{EpisodeMetrics, METRICS_HEADER};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

/// Append-only CSV of per-episode training metrics.
pub struct MetricsWriter<W: Write = BufWriter<File>> {
    out: W,
    rows: usize,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> io::Result<Self> {
        Self::new(BufWriter::new(File::create(path)?))
    }
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{METRICS_HEADER}")?;
        Ok(Self { out, rows: 0 })
    }

    pub fn record(&mut self, m: &EpisodeMetrics) -> io::Result<()> {
        writeln!(self.out, "{}", m.csv_row())?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Drops the wall-clock column, leaving the part of a metrics file that
/// is a function of seed and configuration alone.
pub fn strip_wall_clock(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}
