//! On-disk formats shared by the library and the command-line front end.
//!
//! - Counts CSV: UTF-8, header row `sample_id,<taxon>,…` (the first header
//!   cell is ignored on read), one row per sample with integer cells.
//! - Labels CSV: `sample_id,label`.
//! - Draws CSV: `iteration,k,k_plus,log_density,allocations` with the
//!   allocation labels `;`-joined inside one field.
//! - ξ sidecar: little-endian binary. Layout: magic `DSDM3XI1` (8 bytes),
//!   u64 J, u64 record count, then per record u64 iteration, u64 k_plus,
//!   k_plus f64 weights, k_plus·J f64 ξ values (row-major filled rows).
//!
//! Cell coordinates in errors are 1-based file coordinates (the header is
//! row 1). Writers emit `\n` line endings and Rust's shortest round-trip
//! float formatting, so identical inputs produce byte-identical files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::sampler::{DrawRecord, PosteriorDraws};
use crate::{CountMatrix, Error, Result};

const XI_MAGIC: &[u8; 8] = b"DSDM3XI1";

fn parse_err(path: &Path, row: usize, col: usize, message: impl Into<String>) -> Error {
    Error::CsvParse {
        path: path.display().to_string(),
        row,
        col,
        message: message.into(),
    }
}

/// Read a counts CSV (EDD-style export: first column sample id, header row
/// of taxon names, nonnegative integer cells).
pub fn read_counts_csv(path: &Path) -> Result<CountMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, 1, "empty file"))?;
    let header = header.map_err(|e| Error::io(path.display().to_string(), e))?;
    let header_cells: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    if header_cells.len() < 3 {
        return Err(parse_err(
            path,
            1,
            header_cells.len(),
            "header needs a sample-id column and at least two taxa",
        ));
    }
    let taxon_ids: Vec<String> = header_cells[1..].iter().map(|s| s.to_string()).collect();
    {
        let mut seen = std::collections::HashSet::new();
        for (idx, t) in taxon_ids.iter().enumerate() {
            if t.is_empty() {
                return Err(parse_err(path, 1, idx + 2, "empty taxon id"));
            }
            if !seen.insert(t) {
                return Err(parse_err(path, 1, idx + 2, format!("duplicate taxon id '{t}'")));
            }
        }
    }
    let mut sample_ids = Vec::new();
    let mut rows: Vec<Vec<u32>> = Vec::new();
    let mut seen_ids = std::collections::HashSet::new();
    for (line_idx, line) in lines {
        let row_no = line_idx + 1;
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != taxon_ids.len() + 1 {
            return Err(parse_err(
                path,
                row_no,
                cells.len(),
                format!(
                    "ragged row: {} cells, expected {}",
                    cells.len(),
                    taxon_ids.len() + 1
                ),
            ));
        }
        let id = cells[0].to_string();
        if id.is_empty() {
            return Err(parse_err(path, row_no, 1, "empty sample id"));
        }
        if !seen_ids.insert(id.clone()) {
            return Err(parse_err(path, row_no, 1, format!("duplicate sample id '{id}'")));
        }
        let mut row = Vec::with_capacity(taxon_ids.len());
        for (j, cell) in cells[1..].iter().enumerate() {
            let value: u32 = cell.parse().map_err(|_| {
                let message = if cell.starts_with('-') && cell[1..].parse::<u64>().is_ok() {
                    format!("negative count '{cell}'")
                } else {
                    format!("invalid count '{cell}' (expected a nonnegative integer)")
                };
                parse_err(path, row_no, j + 2, message)
            })?;
            row.push(value);
        }
        sample_ids.push(id);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 2, 1, "no data rows"));
    }
    CountMatrix::new(rows, sample_ids, taxon_ids)
}

pub fn write_counts_csv(path: &Path, data: &CountMatrix) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path.display().to_string(), e);
    write!(w, "sample_id").map_err(io_err)?;
    for t in data.taxon_ids() {
        write!(w, ",{t}").map_err(io_err)?;
    }
    writeln!(w).map_err(io_err)?;
    for i in 0..data.n_samples() {
        write!(w, "{}", data.sample_ids()[i]).map_err(io_err)?;
        for &z in data.row(i) {
            write!(w, ",{z}").map_err(io_err)?;
        }
        writeln!(w).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Read a labels CSV (`sample_id,label`), preserving row order.
pub fn read_labels_csv(path: &Path) -> Result<Vec<(String, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (line_idx, line) in reader.lines().enumerate() {
        let row_no = line_idx + 1;
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        let line = line.trim_end_matches('\r');
        if row_no == 1 || line.is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let id = cells
            .next()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| parse_err(path, row_no, 1, "missing sample id"))?;
        let label = cells
            .next()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| parse_err(path, row_no, 2, "missing label"))?;
        if cells.next().is_some() {
            return Err(parse_err(path, row_no, 3, "expected two cells"));
        }
        if !seen.insert(id.to_string()) {
            return Err(parse_err(path, row_no, 1, format!("duplicate sample id '{id}'")));
        }
        out.push((id.to_string(), label.to_string()));
    }
    if out.is_empty() {
        return Err(parse_err(path, 2, 1, "no label rows"));
    }
    Ok(out)
}

pub fn write_labels_csv(path: &Path, ids: &[String], labels: &[usize]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path.display().to_string(), e);
    writeln!(w, "sample_id,label").map_err(io_err)?;
    for (id, l) in ids.iter().zip(labels) {
        writeln!(w, "{id},{l}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Streaming writer for the draws CSV.
pub struct DrawsCsvWriter {
    writer: BufWriter<File>,
    path: String,
}

impl DrawsCsvWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut writer = BufWriter::new(file);
        writeln!(writer, "iteration,k,k_plus,log_density,allocations")
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(DrawsCsvWriter {
            writer,
            path: path.display().to_string(),
        })
    }

    pub fn append(&mut self, rec: &DrawRecord) -> Result<()> {
        let io_err = |e| Error::io(self.path.clone(), e);
        write!(
            self.writer,
            "{},{},{},{},",
            rec.iteration, rec.k, rec.k_plus, rec.log_density
        )
        .map_err(io_err)?;
        let mut first = true;
        for &c in &rec.allocations {
            if !first {
                write!(self.writer, ";").map_err(io_err)?;
            }
            write!(self.writer, "{c}").map_err(io_err)?;
            first = false;
        }
        writeln!(self.writer).map_err(io_err)
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer
            .flush()
            .map_err(|e| Error::io(self.path.clone(), e))
    }
}

/// Read a draws CSV back. ξ traces live in the sidecar; merge them with
/// [`attach_xi_sidecar`]. `n_taxa` is not stored in the CSV and defaults to
/// 0 until a sidecar or counts file provides it.
pub fn read_draws_csv(path: &Path) -> Result<PosteriorDraws> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut n_samples = 0usize;
    for (line_idx, line) in reader.lines().enumerate() {
        let row_no = line_idx + 1;
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        let line = line.trim_end_matches('\r');
        if row_no == 1 {
            if line != "iteration,k,k_plus,log_density,allocations" {
                return Err(parse_err(path, 1, 1, "unexpected draws header"));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 5 {
            return Err(parse_err(path, row_no, cells.len(), "expected five cells"));
        }
        let iteration: u64 = cells[0]
            .parse()
            .map_err(|_| parse_err(path, row_no, 1, "invalid iteration"))?;
        let k: u32 = cells[1]
            .parse()
            .map_err(|_| parse_err(path, row_no, 2, "invalid k"))?;
        let k_plus: u32 = cells[2]
            .parse()
            .map_err(|_| parse_err(path, row_no, 3, "invalid k_plus"))?;
        let log_density: f64 = cells[3]
            .parse()
            .map_err(|_| parse_err(path, row_no, 4, "invalid log density"))?;
        let allocations: Vec<u16> = cells[4]
            .split(';')
            .map(|c| c.parse::<u16>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(path, row_no, 5, "invalid allocation label"))?;
        if allocations.is_empty()
            || allocations
                .iter()
                .any(|&c| c == 0 || c as u32 > k_plus)
        {
            return Err(parse_err(path, row_no, 5, "allocation labels outside 1..=k_plus"));
        }
        if n_samples == 0 {
            n_samples = allocations.len();
        } else if allocations.len() != n_samples {
            return Err(parse_err(path, row_no, 5, "allocation length changed"));
        }
        records.push(DrawRecord {
            iteration,
            k,
            k_plus,
            log_density,
            allocations,
            weights: Vec::new(),
            xi: None,
        });
    }
    if records.is_empty() {
        return Err(Error::NoDraws);
    }
    Ok(PosteriorDraws {
        n_samples,
        n_taxa: 0,
        records,
    })
}

/// Streaming writer for the binary ξ sidecar. The record count in the
/// header is patched on `finish`.
pub struct XiSidecarWriter {
    writer: BufWriter<File>,
    path: String,
    n_taxa: u64,
    n_records: u64,
}

impl XiSidecarWriter {
    pub fn create(path: &Path, n_taxa: usize) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut writer = BufWriter::new(file);
        let io_err = |e| Error::io(path.display().to_string(), e);
        writer.write_all(XI_MAGIC).map_err(io_err)?;
        writer
            .write_all(&(n_taxa as u64).to_le_bytes())
            .map_err(io_err)?;
        writer.write_all(&0u64.to_le_bytes()).map_err(io_err)?;
        Ok(XiSidecarWriter {
            writer,
            path: path.display().to_string(),
            n_taxa: n_taxa as u64,
            n_records: 0,
        })
    }

    pub fn append(&mut self, rec: &DrawRecord) -> Result<()> {
        let xi = rec.xi.as_ref().ok_or(Error::NoXiTraces)?;
        let k_plus = rec.k_plus as u64;
        if xi.len() as u64 != k_plus * self.n_taxa || rec.weights.len() as u64 != k_plus {
            return Err(Error::Dimension("xi record shape mismatch".into()));
        }
        let io_err = |e| Error::io(self.path.clone(), e);
        self.writer
            .write_all(&rec.iteration.to_le_bytes())
            .map_err(io_err)?;
        self.writer.write_all(&k_plus.to_le_bytes()).map_err(io_err)?;
        for &w in &rec.weights {
            self.writer.write_all(&w.to_le_bytes()).map_err(io_err)?;
        }
        for &x in xi {
            self.writer.write_all(&x.to_le_bytes()).map_err(io_err)?;
        }
        self.n_records += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        let XiSidecarWriter {
            writer,
            path,
            n_records,
            ..
        } = self;
        let mut file = writer
            .into_inner()
            .map_err(|e| Error::io(path.clone(), e.into_error()))?;
        use std::io::Seek;
        file.seek(std::io::SeekFrom::Start(16))
            .map_err(|e| Error::io(path.clone(), e))?;
        file.write_all(&n_records.to_le_bytes())
            .map_err(|e| Error::io(path.clone(), e))?;
        file.flush().map_err(|e| Error::io(path, e))
    }
}

fn read_u64(r: &mut impl Read, path: &str) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|e| Error::io(path.to_string(), e))?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64(r: &mut impl Read, path: &str) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|e| Error::io(path.to_string(), e))?;
    Ok(f64::from_le_bytes(buf))
}

/// Merge a ξ sidecar into draws read from CSV, matching records by
/// position and iteration.
pub fn attach_xi_sidecar(draws: &mut PosteriorDraws, path: &Path) -> Result<()> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut r = BufReader::new(file);
    let p = path.display().to_string();
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|e| Error::io(p.clone(), e))?;
    if &magic != XI_MAGIC {
        return Err(Error::InvalidArgument(format!("{p}: not a xi sidecar")));
    }
    let n_taxa = read_u64(&mut r, &p)? as usize;
    let n_records = read_u64(&mut r, &p)? as usize;
    if n_records != draws.records.len() {
        return Err(Error::Dimension(format!(
            "{p}: {n_records} sidecar records for {} draws",
            draws.records.len()
        )));
    }
    for rec in &mut draws.records {
        let iteration = read_u64(&mut r, &p)?;
        if iteration != rec.iteration {
            return Err(Error::Dimension(format!(
                "{p}: sidecar iteration {iteration} does not match draw {}",
                rec.iteration
            )));
        }
        let k_plus = read_u64(&mut r, &p)? as usize;
        if k_plus != rec.k_plus as usize {
            return Err(Error::Dimension(format!("{p}: sidecar k_plus mismatch")));
        }
        let mut weights = Vec::with_capacity(k_plus);
        for _ in 0..k_plus {
            weights.push(read_f64(&mut r, &p)?);
        }
        let mut xi = Vec::with_capacity(k_plus * n_taxa);
        for _ in 0..k_plus * n_taxa {
            xi.push(read_f64(&mut r, &p)?);
        }
        rec.weights = weights;
        rec.xi = Some(xi);
    }
    draws.n_taxa = n_taxa;
    Ok(())
}
