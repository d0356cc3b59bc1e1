//! Per-cell CU geometry maps: extraction from a reference encode, 2x
//! interpolation to the dependent resolution, area lookups, and the
//! `MEVHASMAP` text format.
//!
//! The map stores, for every `cell_size` x `cell_size` cell of the padded
//! frame, the width and height of the CU covering it. A 128x128 CTU holds
//! 16x16 = 256 cells, serialized as one line of 256 widths followed by one
//! line of 256 heights.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::codec::PartitionRecord;

pub const CELL_SIZE: usize = 8;
pub const MAX_CU: usize = 128;
pub const MIN_CU: usize = 8;
const MAGIC: &str = "MEVHASMAP";
const VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MapError {
    #[error("record does not tile the {width}x{height} frame: {reason}")]
    NotTiling {
        width: usize,
        height: usize,
        reason: String,
    },
    #[error("point ({x}, {y}) outside the {width}x{height} map")]
    OutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cannot crop {from_w}x{from_h} map to {to_w}x{to_h}")]
    Crop {
        from_w: usize,
        from_h: usize,
        to_w: usize,
        to_h: usize,
    },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

/// Width and height of the CU covering one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CuDims {
    pub width: u16,
    pub height: u16,
}

impl CuDims {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width: width as u16,
            height: height as u16,
        }
    }

    pub fn area(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Doubled along both axes, clamped to the CTU size.
    pub fn doubled(&self) -> Self {
        Self::new(
            (2 * self.width as usize).min(MAX_CU),
            (2 * self.height as usize).min(MAX_CU),
        )
    }
}

/// Area of the interpolated reference CU at a position, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MaxSz(usize);

impl MaxSz {
    pub fn area(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionMap {
    frame_width: usize,
    frame_height: usize,
    ctu_size: usize,
    cell_size: usize,
    /// QP of the encode the geometry came from.
    qp: u8,
    cells: Vec<CuDims>,
}

fn is_cu_dim(v: usize) -> bool {
    v.is_power_of_two() && (MIN_CU..=MAX_CU).contains(&v)
}

impl PartitionMap {
    /// Map with every cell set to `dims`.
    pub fn uniform(frame_width: usize, frame_height: usize, qp: u8, dims: CuDims) -> Self {
        assert!(frame_width.is_multiple_of(MAX_CU) && frame_height.is_multiple_of(MAX_CU));
        let cells = (frame_width / CELL_SIZE) * (frame_height / CELL_SIZE);
        Self {
            frame_width,
            frame_height,
            ctu_size: MAX_CU,
            cell_size: CELL_SIZE,
            qp,
            cells: vec![dims; cells],
        }
    }

    pub fn frame_width(&self) -> usize {
        self.frame_width
    }

    pub fn frame_height(&self) -> usize {
        self.frame_height
    }

    pub fn cell_size(&self) -> usize {
        self.cell_size
    }

    pub fn qp(&self) -> u8 {
        self.qp
    }

    /// Grid size as (columns, rows).
    pub fn grid_dims(&self) -> (usize, usize) {
        (
            self.frame_width / self.cell_size,
            self.frame_height / self.cell_size,
        )
    }

    pub fn cell(&self, col: usize, row: usize) -> CuDims {
        let (cols, _) = self.grid_dims();
        self.cells[row * cols + col]
    }

    pub fn cells(&self) -> &[CuDims] {
        &self.cells
    }

    pub fn set_cell(&mut self, col: usize, row: usize, dims: CuDims) {
        let (cols, _) = self.grid_dims();
        self.cells[row * cols + col] = dims;
    }

    /// Area of the CU recorded for the cell containing pixel (`x`, `y`).
    pub fn max_sz(&self, x: usize, y: usize) -> Result<MaxSz, MapError> {
        if x >= self.frame_width || y >= self.frame_height {
            return Err(MapError::OutOfBounds {
                x,
                y,
                width: self.frame_width,
                height: self.frame_height,
            });
        }
        Ok(MaxSz(
            self.cell(x / self.cell_size, y / self.cell_size).area(),
        ))
    }

    /// Top-left region of `width`x`height` pixels (CTU multiples).
    pub fn crop(&self, width: usize, height: usize) -> Result<PartitionMap, MapError> {
        if width > self.frame_width
            || height > self.frame_height
            || !width.is_multiple_of(self.ctu_size)
            || !height.is_multiple_of(self.ctu_size)
            || width == 0
            || height == 0
        {
            return Err(MapError::Crop {
                from_w: self.frame_width,
                from_h: self.frame_height,
                to_w: width,
                to_h: height,
            });
        }
        let (cols, rows) = (width / self.cell_size, height / self.cell_size);
        let mut cells = Vec::with_capacity(cols * rows);
        for r in 0..rows {
            for c in 0..cols {
                cells.push(self.cell(c, r));
            }
        }
        Ok(PartitionMap {
            frame_width: width,
            frame_height: height,
            cells,
            ..*self
        })
    }

    /// Crops or extends to `width`x`height` (CTU multiples); new cells copy
    /// the nearest edge cell.
    pub fn fit_to(&self, width: usize, height: usize) -> Result<PartitionMap, MapError> {
        if !width.is_multiple_of(self.ctu_size)
            || !height.is_multiple_of(self.ctu_size)
            || width == 0
            || height == 0
        {
            return Err(MapError::Crop {
                from_w: self.frame_width,
                from_h: self.frame_height,
                to_w: width,
                to_h: height,
            });
        }
        let (src_cols, src_rows) = self.grid_dims();
        let (cols, rows) = (width / self.cell_size, height / self.cell_size);
        let mut cells = Vec::with_capacity(cols * rows);
        for r in 0..rows {
            for c in 0..cols {
                cells.push(self.cell(c.min(src_cols - 1), r.min(src_rows - 1)));
            }
        }
        Ok(PartitionMap {
            frame_width: width,
            frame_height: height,
            cells,
            ..*self
        })
    }

    pub fn write_to(&self, path: &Path) -> Result<(), MapError> {
        std::fs::write(path, serialize_map(self)).map_err(|e| MapError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn read_from(path: &Path) -> Result<PartitionMap, MapError> {
        let text = std::fs::read_to_string(path).map_err(|e| MapError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        parse_map(&text)
    }
}

/// Conventional file name for the map of frame `index`: `<stem>.f<index>.mevhasmap`.
pub fn map_file_name(stem: &str, index: usize) -> String {
    format!("{stem}.f{index}.mevhasmap")
}

/// Builds the cell map from a final partition covering `width`x`height`.
pub fn extract_map(
    record: &PartitionRecord,
    width: usize,
    height: usize,
    qp: u8,
) -> Result<PartitionMap, MapError> {
    let not_tiling = |reason: String| MapError::NotTiling {
        width,
        height,
        reason,
    };
    if !width.is_multiple_of(MAX_CU) || !height.is_multiple_of(MAX_CU) {
        return Err(not_tiling("frame is not a whole number of CTUs".into()));
    }
    let (cols, rows) = (width / CELL_SIZE, height / CELL_SIZE);
    let mut cells: Vec<Option<CuDims>> = vec![None; cols * rows];
    for cu in &record.cus {
        if !is_cu_dim(cu.width) || !is_cu_dim(cu.height) {
            return Err(not_tiling(format!(
                "CU {}x{} has an illegal size",
                cu.width, cu.height
            )));
        }
        if cu.x % CELL_SIZE != 0 || cu.y % CELL_SIZE != 0 {
            return Err(not_tiling(format!(
                "CU at ({}, {}) is not cell aligned",
                cu.x, cu.y
            )));
        }
        if cu.x + cu.width > width || cu.y + cu.height > height {
            return Err(not_tiling(format!(
                "CU at ({}, {}) leaves the frame",
                cu.x, cu.y
            )));
        }
        let dims = CuDims::new(cu.width, cu.height);
        for r in cu.y / CELL_SIZE..(cu.y + cu.height) / CELL_SIZE {
            for c in cu.x / CELL_SIZE..(cu.x + cu.width) / CELL_SIZE {
                let slot = &mut cells[r * cols + c];
                if slot.is_some() {
                    return Err(not_tiling(format!(
                        "CUs overlap at ({}, {})",
                        c * CELL_SIZE,
                        r * CELL_SIZE
                    )));
                }
                *slot = Some(dims);
            }
        }
    }
    let cells = cells
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            c.ok_or_else(|| {
                not_tiling(format!(
                    "pixel ({}, {}) is not covered",
                    (i % cols) * CELL_SIZE,
                    (i / cols) * CELL_SIZE
                ))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PartitionMap {
        frame_width: width,
        frame_height: height,
        ctu_size: MAX_CU,
        cell_size: CELL_SIZE,
        qp,
        cells,
    })
}

/// Scales a map to twice the resolution: each cell becomes a 2x2 block of
/// cells holding the doubled (CTU-clamped) CU size. One source CTU thus
/// covers four CTUs of the output.
pub fn interpolate_2x(low: &PartitionMap) -> PartitionMap {
    let (cols, rows) = low.grid_dims();
    let out_cols = 2 * cols;
    let mut cells = vec![CuDims::new(MIN_CU, MIN_CU); 4 * cols * rows];
    for r in 0..rows {
        for c in 0..cols {
            let d = low.cell(c, r).doubled();
            for (dr, dc) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                cells[(2 * r + dr) * out_cols + 2 * c + dc] = d;
            }
        }
    }
    PartitionMap {
        frame_width: 2 * low.frame_width,
        frame_height: 2 * low.frame_height,
        cells,
        ..*low
    }
}

/// `MEVHASMAP 1 <w> <h> <ctu> <cell> <qp>` followed by two lines per CTU in
/// raster order: the CTU's cell widths, then its cell heights, each row-major.
pub fn serialize_map(map: &PartitionMap) -> String {
    let per_side = map.ctu_size / map.cell_size;
    let mut out = format!(
        "{MAGIC} {VERSION} {} {} {} {} {}\n",
        map.frame_width, map.frame_height, map.ctu_size, map.cell_size, map.qp
    );
    let ctu_cols = map.frame_width / map.ctu_size;
    let ctu_rows = map.frame_height / map.ctu_size;
    for cy in 0..ctu_rows {
        for cx in 0..ctu_cols {
            for pick in [|d: CuDims| d.width, |d: CuDims| d.height] {
                let mut first = true;
                for r in 0..per_side {
                    for c in 0..per_side {
                        if !first {
                            out.push(' ');
                        }
                        first = false;
                        let d = map.cell(cx * per_side + c, cy * per_side + r);
                        write!(out, "{}", pick(d)).unwrap();
                    }
                }
                out.push('\n');
            }
        }
    }
    out
}

pub fn parse_map(text: &str) -> Result<PartitionMap, MapError> {
    let err = |line: usize, message: String| MapError::Parse { line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty input".into()))?;
    let fields: Vec<&str> = header.split_ascii_whitespace().collect();
    if fields.len() != 7 || fields[0] != MAGIC {
        return Err(err(
            1,
            format!("expected `{MAGIC} {VERSION} <w> <h> <ctu> <cell> <qp>`"),
        ));
    }
    if fields[1] != VERSION.to_string() {
        return Err(err(1, format!("unsupported version {}", fields[1])));
    }
    let num = |s: &str, what: &str| -> Result<usize, MapError> {
        s.parse()
            .map_err(|_| err(1, format!("bad {what} value {s:?}")))
    };
    let frame_width = num(fields[2], "width")?;
    let frame_height = num(fields[3], "height")?;
    let ctu_size = num(fields[4], "ctu size")?;
    let cell_size = num(fields[5], "cell size")?;
    let qp = num(fields[6], "qp")?;
    if qp > 51 {
        return Err(err(1, format!("qp {qp} out of range")));
    }
    if ctu_size != MAX_CU || cell_size != CELL_SIZE {
        return Err(err(
            1,
            format!("unsupported geometry ctu {ctu_size} cell {cell_size}; expected {MAX_CU}/{CELL_SIZE}"),
        ));
    }
    if frame_width == 0
        || frame_height == 0
        || frame_width % ctu_size != 0
        || frame_height % ctu_size != 0
    {
        return Err(err(
            1,
            format!(
                "frame {frame_width}x{frame_height} is not a whole number of {ctu_size}px CTUs"
            ),
        ));
    }

    let per_side = ctu_size / cell_size;
    let per_line = per_side * per_side;
    let ctu_cols = frame_width / ctu_size;
    let ctu_rows = frame_height / ctu_size;
    let cols = frame_width / cell_size;
    let mut cells = vec![CuDims::new(MIN_CU, MIN_CU); cols * (frame_height / cell_size)];

    let mut read_line = |expect: &str| -> Result<(usize, Vec<u16>), MapError> {
        let (n, line) = lines.next().ok_or_else(|| {
            err(
                text.lines().count() + 1,
                format!(
                    "missing {expect} line: expected {} CTUs",
                    ctu_cols * ctu_rows
                ),
            )
        })?;
        let values = line
            .split_ascii_whitespace()
            .map(|t| {
                let v: usize = t.parse().map_err(|_| err(n, format!("bad value {t:?}")))?;
                if !is_cu_dim(v) {
                    return Err(err(
                        n,
                        format!("value {v} is not a power of two in {MIN_CU}..={MAX_CU}"),
                    ));
                }
                Ok(v as u16)
            })
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != per_line {
            return Err(err(n, format!("expected {per_line} values at line {n}")));
        }
        Ok((n, values))
    };

    for cy in 0..ctu_rows {
        for cx in 0..ctu_cols {
            let (_, widths) = read_line("width")?;
            let (_, heights) = read_line("height")?;
            for r in 0..per_side {
                for c in 0..per_side {
                    let i = r * per_side + c;
                    cells[(cy * per_side + r) * cols + cx * per_side + c] = CuDims {
                        width: widths[i],
                        height: heights[i],
                    };
                }
            }
        }
    }
    if let Some((n, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(err(
            n,
            format!(
                "unexpected data after {} CTUs: {:.20}",
                ctu_cols * ctu_rows,
                extra
            ),
        ));
    }
    Ok(PartitionMap {
        frame_width,
        frame_height,
        ctu_size,
        cell_size,
        qp: qp as u8,
        cells,
    })
}
