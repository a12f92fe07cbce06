//! Readers and writers for grid images and waypoint CSVs.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Occupancy rows as read from a file: `rows[0]` is the top row of the image.
#[derive(Debug, Clone, PartialEq)]
pub struct RawGrid {
    pub width: usize,
    pub height: usize,
    pub rows: Vec<Vec<bool>>,
}

impl RawGrid {
    /// Cells in bottom-up order (`j = 0` is the last image row).
    pub fn bottom_up_cells(&self) -> Vec<bool> {
        let mut cells = Vec::with_capacity(self.width * self.height);
        for row in self.rows.iter().rev() {
            cells.extend_from_slice(row);
        }
        cells
    }
}

/// Reads a PGM (P2/P5, dark = occupied) or a CSV of 0/1 rows (1 = occupied).
pub fn read_grid(path: &Path) -> Result<RawGrid> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let what = path.display().to_string();
    if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        parse_pgm(&bytes, &what)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::parse(&what, 0, "grid is neither PGM nor UTF-8 CSV"))?;
        parse_grid_csv(&text, &what)
    }
}

pub fn parse_grid_csv(text: &str, what: &str) -> Result<RawGrid> {
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| match tok.trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::parse(what, ln + 1, format!("expected 0 or 1, got {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            let first: &Vec<bool> = first;
            if first.len() != row.len() {
                return Err(Error::parse(what, ln + 1, format!("row has {} cells, expected {}", row.len(), first.len())));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::parse(what, 0, "empty grid"));
    }
    Ok(RawGrid { width: rows[0].len(), height: rows.len(), rows })
}

pub fn parse_pgm(bytes: &[u8], what: &str) -> Result<RawGrid> {
    let binary = bytes.starts_with(b"P5");
    let mut pos = 2;
    let mut header = [0usize; 3];
    for slot in header.iter_mut() {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        *slot = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(what, 0, "bad PGM header"))?;
    }
    let [width, height, maxval] = header;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(Error::parse(what, 0, "bad PGM dimensions"));
    }
    let n = width * height;
    let values: Vec<usize> = if binary {
        pos += 1;
        let wide = maxval > 255;
        let need = if wide { 2 * n } else { n };
        if bytes.len() < pos + need {
            return Err(Error::parse(what, 0, "truncated PGM raster"));
        }
        let data = &bytes[pos..pos + need];
        if wide {
            data.chunks_exact(2).map(|c| ((c[0] as usize) << 8) | c[1] as usize).collect()
        } else {
            data.iter().map(|&b| b as usize).collect()
        }
    } else {
        let text = std::str::from_utf8(&bytes[pos..]).map_err(|_| Error::parse(what, 0, "non-ASCII P2 raster"))?;
        let v: Vec<usize> = text
            .split(|c: char| c.is_ascii_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse().map_err(|_| Error::parse(what, 0, format!("bad pixel {t:?}"))))
            .collect::<Result<_>>()?;
        if v.len() < n {
            return Err(Error::parse(what, 0, "truncated PGM raster"));
        }
        v
    };
    let rows = (0..height)
        .map(|r| (0..width).map(|c| 2 * values[r * width + c] < maxval).collect())
        .collect();
    Ok(RawGrid { width, height, rows })
}

/// Writes a binary PGM, occupied cells black.
pub fn write_pgm(path: &Path, grid: &RawGrid) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", grid.width, grid.height).into_bytes();
    for row in &grid.rows {
        out.extend(row.iter().map(|&occ| if occ { 0u8 } else { 254u8 }));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a CSV with a header naming at least `x,y`; returns rows of the requested columns.
pub fn read_columns(path: &Path, columns: &[&str], optional: &[&str]) -> Result<Vec<Vec<Option<f64>>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_columns(&text, &path.display().to_string(), columns, optional)
}

pub fn parse_columns(text: &str, what: &str, required: &[&str], optional: &[&str]) -> Result<Vec<Vec<Option<f64>>>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (_, header) = lines.next().ok_or_else(|| Error::parse(what, 0, "missing header"))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let mut index = Vec::new();
    for col in required {
        let i = names
            .iter()
            .position(|n| n == col)
            .ok_or_else(|| Error::parse(what, 1, format!("missing column {col:?}")))?;
        index.push(Some(i));
    }
    for col in optional {
        index.push(names.iter().position(|n| n == col));
    }
    let mut rows = Vec::new();
    for (ln, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let row = index
            .iter()
            .map(|idx| match idx {
                None => Ok(None),
                Some(i) => {
                    let tok = fields.get(*i).ok_or_else(|| Error::parse(what, ln + 1, "short row"))?;
                    tok.parse::<f64>()
                        .map(Some)
                        .map_err(|_| Error::parse(what, ln + 1, format!("bad number {tok:?}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_xy_csv(path: &Path, points: &[[f64; 2]]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::from("x,y\n");
    for p in points {
        text.push_str(&format!("{},{}\n", p[0], p[1]));
    }
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
