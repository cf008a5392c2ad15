//! Diagnostics tables, run summaries and snapshots.
//!
//! CSV headers name every column as `name [unit]`, with units written in
//! terms of the code's base dimensions: `L` length, `T` time, `M` particle
//! mass and `Q` charge. A dimensionless column has unit `1`.
//!
//! Binary snapshots start with a 16-byte header, `LGRSNAP\0` then the format
//! version and the payload kind as little-endian `u32`; every later field is
//! little-endian as well.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use lagrangia_core::c2::ClebschDoublet;
use lagrangia_core::{Boundary, FlowMap, GridBoundary, GridGeometry, LabelLattice, StencilOrder};
use num_complex::Complex64;

use crate::error::LabError;

pub const MAGIC: [u8; 8] = *b"LGRSNAP\0";
pub const VERSION: u32 = 1;
pub const KIND_FLOW_MAP: u32 = 1;
pub const KIND_DOUBLET: u32 = 2;

/// Shortest representation that reads back to the same `f64`.
pub fn fmt(v: f64) -> String {
    format!("{v:e}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

impl Column {
    pub fn header(&self) -> String {
        format!("{} [{}]", self.name, self.unit)
    }

    /// Splits `name [unit]`; a bare name has an empty unit.
    pub fn parse(h: &str) -> Column {
        let h = h.trim();
        match (h.rfind('['), h.ends_with(']')) {
            (Some(i), true) => Column { name: h[..i].trim().to_string(), unit: h[i + 1..h.len() - 1].to_string() },
            _ => Column { name: h.to_string(), unit: String::new() },
        }
    }
}

/// Column-named table of samples.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Series {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(cols: &[(&str, &str)]) -> Self {
        Series {
            columns: cols.iter().map(|(n, u)| Column { name: n.to_string(), unit: u.to_string() }).collect(),
            rows: vec![],
        }
    }

    pub fn add_column(&mut self, name: &str, unit: &str) {
        debug_assert!(self.rows.is_empty());
        self.columns.push(Column { name: name.to_string(), unit: unit.to_string() });
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.index(name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), LabError> {
        let file = File::create(path).map_err(|e| LabError::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        let err = |e: csv::Error| LabError::io(path, std::io::Error::other(e));
        w.write_record(self.columns.iter().map(Column::header)).map_err(err)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| fmt(*v))).map_err(err)?;
        }
        w.flush().map_err(|e| LabError::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self, LabError> {
        let file = File::open(path).map_err(|e| LabError::io(path, e))?;
        let mut r = csv::Reader::from_reader(BufReader::new(file));
        let bad = |m: String| LabError::Config(format!("{}: {m}", path.display()));
        let columns: Vec<Column> = r.headers().map_err(|e| bad(e.to_string()))?.iter().map(Column::parse).collect();
        let mut rows = vec![];
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|_| bad(format!("row {}: '{s}' is not a number", line + 2))))
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != columns.len() {
                return Err(bad(format!("row {} has {} fields, header has {}", line + 2, row.len(), columns.len())));
            }
            rows.push(row);
        }
        Ok(Series { columns, rows })
    }
}

/// Label, position and momentum of every lattice node.
pub fn flow_map_table(map: &FlowMap) -> Series {
    let d = map.lattice.dim;
    let p_unit = format!("M L^{} T^-1", 1 - d as i32);
    let rho_unit = format!("L^-{d}");
    let mut s = Series::new(&[]);
    for a in 0..d {
        s.add_column(&format!("xi_{a}"), "L");
    }
    for a in 0..d {
        s.add_column(&format!("x_{a}"), "L");
    }
    for a in 0..d {
        s.add_column(&format!("p_{a}"), &p_unit);
    }
    s.add_column("rho0", &rho_unit);
    for i in 0..map.len() {
        let xi = map.lattice.label(i);
        let mut row = Vec::with_capacity(3 * d + 1);
        row.extend_from_slice(&xi[..d]);
        row.extend_from_slice(&map.x[i][..d]);
        row.extend_from_slice(&map.p[i][..d]);
        row.push(map.rho0[i]);
        s.push(row);
    }
    s
}

struct Out(Vec<u8>);

impl Out {
    fn header(kind: u32) -> Self {
        let mut b = Vec::with_capacity(1024);
        b.extend_from_slice(&MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.extend_from_slice(&kind.to_le_bytes());
        Out(b)
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn vec3(&mut self, v: [f64; 3]) {
        v.iter().for_each(|c| self.f64(*c));
    }
}

struct In<'a> {
    b: &'a [u8],
    at: usize,
}

impl In<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], LabError> {
        let s = self.b.get(self.at..self.at + N).ok_or_else(|| LabError::Config(String::from("snapshot is truncated")))?;
        self.at += N;
        Ok(s.try_into().unwrap())
    }
    fn u32(&mut self) -> Result<u32, LabError> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64, LabError> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64, LabError> {
        Ok(f64::from_le_bytes(self.take()?))
    }
    fn vec3(&mut self) -> Result<[f64; 3], LabError> {
        Ok([self.f64()?, self.f64()?, self.f64()?])
    }
}

fn write_bytes(path: &Path, b: &[u8]) -> Result<(), LabError> {
    let mut f = BufWriter::new(File::create(path).map_err(|e| LabError::io(path, e))?);
    f.write_all(b).and_then(|_| f.flush()).map_err(|e| LabError::io(path, e))
}

fn read_bytes(path: &Path, kind: u32) -> Result<Vec<u8>, LabError> {
    let mut b = vec![];
    File::open(path).and_then(|mut f| f.read_to_end(&mut b)).map_err(|e| LabError::io(path, e))?;
    if b.len() < 16 || b[..8] != MAGIC {
        return Err(LabError::Config(format!("{}: not a snapshot", path.display())));
    }
    let version = u32::from_le_bytes(b[8..12].try_into().unwrap());
    let k = u32::from_le_bytes(b[12..16].try_into().unwrap());
    if version != VERSION || k != kind {
        return Err(LabError::Config(format!("{}: version {version} kind {k}, expected {VERSION} and {kind}", path.display())));
    }
    Ok(b)
}

pub fn write_flow_map(path: &Path, map: &FlowMap) -> Result<(), LabError> {
    let lat = &map.lattice;
    let mut o = Out::header(KIND_FLOW_MAP);
    o.u32(lat.dim as u32);
    lat.shape.iter().for_each(|s| o.u32(*s as u32));
    o.u32(matches!(lat.boundary, Boundary::FixedWall) as u32);
    o.u32(matches!(lat.order, StencilOrder::Fourth) as u32);
    o.vec3(lat.lo);
    o.vec3(lat.hi);
    o.f64(map.mass);
    o.f64(map.time);
    o.u64(map.len() as u64);
    for i in 0..map.len() {
        o.f64(map.rho0[i]);
        o.vec3(map.x[i]);
        o.vec3(map.p[i]);
    }
    write_bytes(path, &o.0)
}

pub fn read_flow_map(path: &Path) -> Result<FlowMap, LabError> {
    let b = read_bytes(path, KIND_FLOW_MAP)?;
    let mut r = In { b: &b, at: 16 };
    let dim = r.u32()? as usize;
    let shape = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
    let boundary = if r.u32()? == 1 { Boundary::FixedWall } else { Boundary::Periodic };
    let order = if r.u32()? == 1 { StencilOrder::Fourth } else { StencilOrder::Second };
    let (lo, hi) = (r.vec3()?, r.vec3()?);
    let lattice = LabelLattice::new(dim, lo, hi, shape, boundary).map_err(crate::error::setup)?.with_order(order);
    let (mass, time) = (r.f64()?, r.f64()?);
    let n = r.u64()? as usize;
    if n != lattice.len() {
        return Err(LabError::Config(format!("{}: node count does not match the lattice", path.display())));
    }
    let (mut rho0, mut x, mut p) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        rho0.push(r.f64()?);
        x.push(r.vec3()?);
        p.push(r.vec3()?);
    }
    Ok(FlowMap { lattice, rho0, x, p, mass, time })
}

pub fn write_doublet(path: &Path, u: &ClebschDoublet, time: f64) -> Result<(), LabError> {
    let g = &u.grid;
    let mut o = Out::header(KIND_DOUBLET);
    o.u32(g.dim as u32);
    g.shape.iter().for_each(|s| o.u32(*s as u32));
    o.u32(matches!(g.boundary, GridBoundary::Clamped) as u32);
    o.vec3(g.lo);
    o.vec3(g.hi);
    o.f64(u.mass);
    o.f64(time);
    o.u64(u.u.len() as u64);
    for c in &u.u {
        for z in c {
            o.f64(z.re);
            o.f64(z.im);
        }
    }
    write_bytes(path, &o.0)
}

pub fn read_doublet(path: &Path) -> Result<(ClebschDoublet, f64), LabError> {
    let b = read_bytes(path, KIND_DOUBLET)?;
    let mut r = In { b: &b, at: 16 };
    let dim = r.u32()? as usize;
    let shape = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
    let boundary = if r.u32()? == 1 { GridBoundary::Clamped } else { GridBoundary::Periodic };
    let (lo, hi) = (r.vec3()?, r.vec3()?);
    let grid = GridGeometry::new(dim, lo, hi, shape, boundary).map_err(crate::error::setup)?;
    let (mass, time) = (r.f64()?, r.f64()?);
    let n = r.u64()? as usize;
    let mut u = Vec::with_capacity(n);
    for _ in 0..n {
        u.push([Complex64::new(r.f64()?, r.f64()?), Complex64::new(r.f64()?, r.f64()?)]);
    }
    Ok((ClebschDoublet::new(grid, u, mass).map_err(crate::error::setup)?, time))
}
