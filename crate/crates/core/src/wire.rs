//! Binary frame format and communication-overhead accounting.
//!
//! Every frame is a fixed header followed by a payload of little-endian
//! binary64 reals (row-major) or nothing:
//!
//! | offset      | size | field                                      |
//! |-------------|------|--------------------------------------------|
//! | 0           | 4    | magic `SPLC`                               |
//! | 4           | 2    | format version, `u16`, currently 1         |
//! | 6           | 1    | sender role                                |
//! | 7           | 1    | parametric dimension `k` (0 for vertices)  |
//! | 8           | 1    | physical dimension `d`                     |
//! | 9           | 8k   | per direction: `n_i: u32`, `p_i: u32`      |
//! | 9 + 8k      | 1    | payload kind                               |
//! | 10 + 8k     | 8    | payload length in bytes, `u64`             |
//! | 18 + 8k     | len  | payload                                    |
//!
//! Knot matrices have `k` rows of width `k * max_i(n_i + p_i + 1)`; row `i`
//! stores its knots at the start of column block `i` and canonical quiet
//! NaN everywhere else.

use std::io::Read;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spline::{KnotVector, TensorBasis};

pub const MAGIC: [u8; 4] = *b"SPLC";
pub const VERSION: u16 = 1;
/// Bit pattern used for every padding entry.
pub const CANONICAL_NAN: u64 = 0x7ff8_0000_0000_0000;

pub fn header_len(param_dim: usize) -> usize {
    18 + 8 * param_dim
}

#[derive(Debug, Clone)]
pub struct KnotMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

/// Bitwise comparison, so padded matrices compare equal to themselves.
impl PartialEq for KnotMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .entries
                .iter()
                .map(|v| v.to_bits())
                .eq(other.entries.iter().map(|v| v.to_bits()))
    }
}

impl KnotMatrix {
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || entries.len() != rows * cols {
            return Err(Error::format(format!(
                "{} entries cannot fill a {rows}x{cols} knot matrix",
                entries.len()
            )));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.cols + c]
    }

    pub fn nan_count(&self) -> usize {
        self.entries.iter().filter(|v| v.is_nan()).count()
    }
}

pub fn encode_knot_matrix(basis: &TensorBasis) -> KnotMatrix {
    let rows = basis.param_dim();
    let block = basis.directions().iter().map(|kv| kv.knots().len()).max().unwrap_or(0);
    let cols = rows * block;
    let mut entries = vec![f64::from_bits(CANONICAL_NAN); rows * cols];
    for (i, kv) in basis.directions().iter().enumerate() {
        let start = i * cols + i * block;
        entries[start..start + kv.knots().len()].copy_from_slice(kv.knots());
    }
    KnotMatrix { rows, cols, entries }
}

pub fn decode_knot_matrix(m: &KnotMatrix, degrees: &[usize]) -> Result<TensorBasis> {
    if degrees.len() != m.rows {
        return Err(Error::format(format!(
            "{} degrees for {} knot rows",
            degrees.len(),
            m.rows
        )));
    }
    if !m.cols.is_multiple_of(m.rows) {
        return Err(Error::format("knot matrix width is not a multiple of its row count"));
    }
    let block = m.cols / m.rows;
    let mut dirs = Vec::with_capacity(m.rows);
    for (i, &p) in degrees.iter().enumerate() {
        let row = &m.entries[i * m.cols..(i + 1) * m.cols];
        let own = &row[i * block..(i + 1) * block];
        let len = own.iter().take_while(|v| !v.is_nan()).count();
        let stray = row
            .iter()
            .enumerate()
            .any(|(c, v)| !v.is_nan() && !(i * block..i * block + len).contains(&c));
        if stray {
            return Err(Error::format(format!("finite entry in the padding of knot row {i}")));
        }
        dirs.push(KnotVector::new(own[..len].to_vec(), p).map_err(|e| Error::format(e.to_string()))?);
    }
    TensorBasis::new(dirs).map_err(|e| Error::format(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Role {
    Fluid = 1,
    Structure = 2,
    Dirichlet = 3,
    Neumann = 4,
}

impl Role {
    /// Whether this role sends first in every exchange.
    pub fn leads(self) -> bool {
        matches!(self, Role::Fluid | Role::Dirichlet)
    }

    fn from_byte(b: u8) -> Result<Self> {
        Ok(match b {
            1 => Role::Fluid,
            2 => Role::Structure,
            3 => Role::Dirichlet,
            4 => Role::Neumann,
            _ => return Err(Error::format(format!("unknown role byte {b}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum PayloadKind {
    KnotMatrix = 1,
    Vertices = 2,
    Control = 3,
    Continue = 4,
    Converged = 5,
}

impl PayloadKind {
    fn from_byte(b: u8) -> Result<Self> {
        Ok(match b {
            1 => PayloadKind::KnotMatrix,
            2 => PayloadKind::Vertices,
            3 => PayloadKind::Control,
            4 => PayloadKind::Continue,
            5 => PayloadKind::Converged,
            _ => return Err(Error::format(format!("unknown payload kind {b}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameHeader {
    pub version: u16,
    pub role: Role,
    pub param_dim: u8,
    pub dim: u8,
    /// `(n_i, p_i)` per parametric direction.
    pub directions: Vec<(u32, u32)>,
    pub kind: PayloadKind,
    pub payload_len: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Knots(KnotMatrix),
    Vertices(DMatrix<f64>),
    Control(DMatrix<f64>),
    Continue,
    Converged,
}

impl Payload {
    pub fn kind(&self) -> PayloadKind {
        match self {
            Payload::Knots(_) => PayloadKind::KnotMatrix,
            Payload::Vertices(_) => PayloadKind::Vertices,
            Payload::Control(_) => PayloadKind::Control,
            Payload::Continue => PayloadKind::Continue,
            Payload::Converged => PayloadKind::Converged,
        }
    }

    /// Number of reals carried.
    pub fn reals(&self) -> usize {
        match self {
            Payload::Knots(m) => m.entries.len(),
            Payload::Vertices(b) | Payload::Control(b) => b.len(),
            Payload::Continue | Payload::Converged => 0,
        }
    }

    pub fn nan_count(&self) -> usize {
        match self {
            Payload::Knots(m) => m.nan_count(),
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireFrame {
    pub role: Role,
    pub basis: Option<TensorBasis>,
    pub payload: Payload,
}

impl WireFrame {
    pub fn knots(role: Role, basis: &TensorBasis) -> Self {
        Self {
            role,
            basis: Some(basis.clone()),
            payload: Payload::Knots(encode_knot_matrix(basis)),
        }
    }

    pub fn vertices(role: Role, points: DMatrix<f64>) -> Self {
        Self {
            role,
            basis: None,
            payload: Payload::Vertices(points),
        }
    }

    /// A control block; `basis` is `None` for vertex-sampled data.
    pub fn control(role: Role, basis: Option<&TensorBasis>, block: DMatrix<f64>) -> Self {
        Self {
            role,
            basis: basis.cloned(),
            payload: Payload::Control(block),
        }
    }

    pub fn status(role: Role, converged: bool) -> Self {
        Self {
            role,
            basis: None,
            payload: if converged {
                Payload::Converged
            } else {
                Payload::Continue
            },
        }
    }

    pub fn header(&self) -> FrameHeader {
        let directions = self
            .basis
            .as_ref()
            .map(|b| {
                b.directions()
                    .iter()
                    .map(|kv| (kv.len() as u32, kv.degree() as u32))
                    .collect()
            })
            .unwrap_or_default();
        let dim = match &self.payload {
            Payload::Vertices(b) | Payload::Control(b) => b.ncols(),
            _ => 0,
        };
        FrameHeader {
            version: VERSION,
            role: self.role,
            param_dim: self.basis.as_ref().map_or(0, TensorBasis::param_dim) as u8,
            dim: dim as u8,
            directions,
            kind: self.payload.kind(),
            payload_len: 8 * self.payload.reals() as u64,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let h = self.header();
        let mut out = Vec::with_capacity(header_len(h.directions.len()) + h.payload_len as usize);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&h.version.to_le_bytes());
        out.push(h.role as u8);
        out.push(h.param_dim);
        out.push(h.dim);
        for (n, p) in &h.directions {
            out.extend_from_slice(&n.to_le_bytes());
            out.extend_from_slice(&p.to_le_bytes());
        }
        out.push(h.kind as u8);
        out.extend_from_slice(&h.payload_len.to_le_bytes());
        let mut put = |v: f64| out.extend_from_slice(&v.to_le_bytes());
        match &self.payload {
            Payload::Knots(m) => m.entries.iter().for_each(|&v| put(v)),
            Payload::Vertices(b) | Payload::Control(b) => {
                // storage is column-major; the wire is row-major
                b.transpose().as_slice().iter().for_each(|&v| put(v));
            }
            Payload::Continue | Payload::Converged => {}
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cursor = bytes;
        let frame = read_frame(&mut cursor).map_err(|e| match e {
            Error::Transport(io) => Error::format(format!("truncated frame: {io}")),
            other => other,
        })?;
        if !cursor.is_empty() {
            return Err(Error::format(format!("{} trailing bytes after frame", cursor.len())));
        }
        Ok(frame)
    }
}

/// Reads one frame from a byte stream. A stream that ends before the frame
/// is complete yields a transport error.
pub fn read_frame<R: Read>(reader: &mut R) -> Result<WireFrame> {
    let mut fixed = [0u8; 9];
    reader.read_exact(&mut fixed)?;
    if fixed[..4] != MAGIC {
        return Err(Error::format("bad magic bytes"));
    }
    let version = u16::from_le_bytes([fixed[4], fixed[5]]);
    if version != VERSION {
        return Err(Error::protocol(format!(
            "peer speaks format version {version}, expected {VERSION}"
        )));
    }
    let role = Role::from_byte(fixed[6])?;
    let param_dim = fixed[7] as usize;
    let dim = fixed[8] as usize;
    if param_dim > 2 {
        return Err(Error::format(format!("parametric dimension {param_dim} out of range")));
    }
    let mut dirs = vec![0u8; 8 * param_dim + 9];
    reader.read_exact(&mut dirs)?;
    let directions: Vec<(u32, u32)> = dirs[..8 * param_dim]
        .chunks_exact(8)
        .map(|c| {
            (
                u32::from_le_bytes(c[..4].try_into().expect("4 bytes")),
                u32::from_le_bytes(c[4..].try_into().expect("4 bytes")),
            )
        })
        .collect();
    let tail = &dirs[8 * param_dim..];
    let kind = PayloadKind::from_byte(tail[0])?;
    let payload_len = u64::from_le_bytes(tail[1..9].try_into().expect("8 bytes"));
    if payload_len % 8 != 0 {
        return Err(Error::format(format!(
            "payload length {payload_len} is not a whole number of reals"
        )));
    }
    let count = (payload_len / 8) as usize;
    let expected = expected_reals(kind, param_dim, dim, &directions, count)?;
    if count != expected {
        return Err(Error::format(format!(
            "payload carries {count} reals, header implies {expected}"
        )));
    }
    let mut raw = vec![0u8; payload_len as usize];
    reader.read_exact(&mut raw)?;
    let reals: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();

    let degrees: Vec<usize> = directions.iter().map(|&(_, p)| p as usize).collect();
    let (basis, payload) = match kind {
        PayloadKind::KnotMatrix => {
            let cols = count / param_dim;
            let m = KnotMatrix::from_row_major(param_dim, cols, reals)?;
            let basis = decode_knot_matrix(&m, &degrees)?;
            if basis.sizes() != directions.iter().map(|&(n, _)| n as usize).collect::<Vec<_>>() {
                return Err(Error::format("knot rows disagree with the header's basis sizes"));
            }
            (Some(basis), Payload::Knots(m))
        }
        PayloadKind::Vertices => (None, Payload::Vertices(block(reals, dim))),
        PayloadKind::Control => {
            // the header fixes sizes and degrees but not the knots themselves
            let basis = if param_dim == 0 {
                None
            } else {
                Some(placeholder_basis(&directions)?)
            };
            (basis, Payload::Control(block(reals, dim)))
        }
        PayloadKind::Continue => (None, Payload::Continue),
        PayloadKind::Converged => (None, Payload::Converged),
    };
    Ok(WireFrame { role, basis, payload })
}

fn expected_reals(kind: PayloadKind, param_dim: usize, dim: usize, dirs: &[(u32, u32)], count: usize) -> Result<usize> {
    Ok(match kind {
        PayloadKind::Continue | PayloadKind::Converged => 0,
        PayloadKind::KnotMatrix => {
            if param_dim == 0 {
                return Err(Error::format("knot matrix frame without parametric directions"));
            }
            let block = dirs.iter().map(|&(n, p)| (n + p + 1) as usize).max().unwrap_or(0);
            param_dim * param_dim * block
        }
        PayloadKind::Vertices | PayloadKind::Control if dim == 0 => {
            return Err(Error::format("data frame with zero physical dimension"));
        }
        PayloadKind::Control if param_dim > 0 => dim * dirs.iter().map(|&(n, _)| n as usize).product::<usize>(),
        PayloadKind::Vertices | PayloadKind::Control => {
            if !count.is_multiple_of(dim) {
                return Err(Error::format("vertex payload is not a whole number of rows"));
            }
            count
        }
    })
}

fn block(reals: Vec<f64>, dim: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(reals.len() / dim, dim, &reals)
}

/// Uniform basis with the header's sizes and degrees on `[0, 1]`; control
/// frames carry no knots, so receivers use their handshake copy instead.
fn placeholder_basis(dirs: &[(u32, u32)]) -> Result<TensorBasis> {
    let kvs = dirs
        .iter()
        .map(|&(n, p)| {
            let (n, p) = (n as usize, p as usize);
            if n <= p {
                return Err(Error::format(format!("basis size {n} too small for degree {p}")));
            }
            KnotVector::uniform(p, n - p, 0.0, 1.0)
        })
        .collect::<Result<Vec<_>>>()?;
    TensorBasis::new(kvs)
}

/// Real-valued traffic in one direction of travel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Accounting {
    pub frames: u64,
    pub header_bytes: u64,
    /// Knot-matrix entries exchanged at handshake, padding included.
    pub knot_reals: u64,
    pub knot_nans: u64,
    /// Vertex coordinates exchanged at handshake.
    pub vertex_setup_reals: u64,
    /// Data reals exchanged during coupling steps.
    pub step_reals: u64,
}

impl Accounting {
    pub fn record(&mut self, frame: &WireFrame, header_bytes: usize) {
        self.frames += 1;
        self.header_bytes += header_bytes as u64;
        let reals = frame.payload.reals() as u64;
        match frame.payload {
            Payload::Knots(_) => {
                self.knot_reals += reals;
                self.knot_nans += frame.payload.nan_count() as u64;
            }
            Payload::Vertices(_) => self.vertex_setup_reals += reals,
            Payload::Control(_) => self.step_reals += reals,
            Payload::Continue | Payload::Converged => {}
        }
    }

    /// Payload bytes counted toward the overhead figures.
    pub fn overhead_bytes(&self) -> u64 {
        8 * (self.knot_reals + self.step_reals)
    }

    /// Every byte that crossed the transport.
    pub fn total_bytes(&self) -> u64 {
        self.header_bytes + 8 * (self.knot_reals + self.vertex_setup_reals + self.step_reals)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverheadParams {
    pub steps: u64,
    pub dim: u64,
    pub param_dim: u32,
    pub degree: u64,
    pub subdivisions: u64,
}

impl OverheadParams {
    /// One step of three-component data on a surface interface with `r`
    /// uniform spans per direction.
    pub fn surface_grid(subdivisions: u64, degree: u64) -> Self {
        Self {
            steps: 1,
            dim: 3,
            param_dim: 2,
            degree,
            subdivisions,
        }
    }

    /// Control points per direction in spline mode.
    pub fn spline_size(&self) -> u64 {
        self.subdivisions + self.degree
    }
}

/// Doubles sent by a vertex-based participant: data at every quadrature
/// point of every interface element, every step.
pub fn overhead_vertex(p: &OverheadParams) -> u64 {
    p.steps * p.dim * p.subdivisions.pow(p.param_dim) * (p.degree + 1).pow(p.param_dim)
}

/// Doubles sent by a spline participant: control data every step plus the
/// knot vectors once.
pub fn overhead_spline(p: &OverheadParams) -> u64 {
    let n = p.spline_size();
    p.steps * p.dim * n.pow(p.param_dim) + p.param_dim as u64 * (n + p.degree + 1)
}

/// NaN entries of the padded knot matrix for equal directions.
pub fn knot_padding(p: &OverheadParams) -> u64 {
    let k = p.param_dim as u64;
    (k * k - k) * (p.spline_size() + p.degree + 1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverheadReport {
    pub theoretical_doubles: u64,
    pub theoretical_bytes: u64,
    pub measured_bytes: u64,
    pub nan_entries: u64,
    pub discrepancy_bytes: i64,
}

impl OverheadReport {
    pub fn kib(bytes: u64) -> f64 {
        bytes as f64 / 1024.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Vertex,
    Spline,
}

/// Compares one participant's sent traffic with the closed form.
pub fn measured_overhead(sent: &Accounting, params: &OverheadParams, mode: Mode) -> OverheadReport {
    let theoretical_doubles = match mode {
        Mode::Vertex => overhead_vertex(params),
        Mode::Spline => overhead_spline(params),
    };
    let measured_bytes = sent.overhead_bytes();
    OverheadReport {
        theoretical_doubles,
        theoretical_bytes: 8 * theoretical_doubles,
        measured_bytes,
        nan_entries: sent.knot_nans,
        discrepancy_bytes: measured_bytes as i64 - 8 * theoretical_doubles as i64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(r: usize, p: usize) -> TensorBasis {
        TensorBasis::uniform(2, p, r).unwrap()
    }

    #[test]
    fn knot_matrix_layout() {
        let m = encode_knot_matrix(&basis(2, 2));
        assert_eq!((m.rows(), m.cols()), (2, 14));
        assert_eq!(m.nan_count(), 14);
        assert_eq!(m.get(0, 6), 1.0);
        assert!(m.get(0, 7).is_nan() && m.get(1, 6).is_nan());
        assert_eq!(m.get(1, 7), 0.0);
        assert!(m
            .entries()
            .iter()
            .filter(|v| v.is_nan())
            .all(|v| v.to_bits() == CANONICAL_NAN));
        assert_eq!(encode_knot_matrix(&basis(128, 2)).nan_count(), 266);
        let curve = encode_knot_matrix(&TensorBasis::uniform(1, 3, 5).unwrap());
        assert_eq!((curve.rows(), curve.cols(), curve.nan_count()), (1, 12, 0));
    }

    #[test]
    fn knot_matrix_round_trip_and_padding_check() {
        let b = basis(2, 2);
        let m = encode_knot_matrix(&b);
        assert_eq!(decode_knot_matrix(&m, &[2, 2]).unwrap(), b);
        let mut bad = m.entries().to_vec();
        bad[10] = 0.5;
        let bad = KnotMatrix::from_row_major(2, 14, bad).unwrap();
        assert!(matches!(decode_knot_matrix(&bad, &[2, 2]), Err(Error::Format(_))));
    }

    #[test]
    fn uneven_directions_pad_to_the_wider_block() {
        let b = TensorBasis::surface(
            KnotVector::uniform(2, 2, 0.0, 1.0).unwrap(),
            KnotVector::uniform(1, 4, 0.0, 1.0).unwrap(),
        );
        let m = encode_knot_matrix(&b);
        assert_eq!((m.rows(), m.cols()), (2, 14));
        assert_eq!(m.nan_count(), 28 - 7 - 7);
        assert_eq!(decode_knot_matrix(&m, &[2, 1]).unwrap(), b);
    }

    #[test]
    fn frames_round_trip() {
        let b = basis(2, 2);
        let frames = [
            WireFrame::knots(Role::Dirichlet, &b),
            WireFrame::vertices(Role::Fluid, DMatrix::from_row_slice(2, 3, &[0., 1., 2., 3., 4., 5.])),
            WireFrame::control(Role::Structure, None, DMatrix::from_element(4, 3, -1.5)),
            WireFrame::status(Role::Neumann, true),
        ];
        for f in frames {
            let bytes = f.encode();
            assert_eq!(
                bytes.len(),
                header_len(f.header().directions.len()) + 8 * f.payload.reals()
            );
            let g = WireFrame::decode(&bytes).unwrap();
            assert_eq!(g.payload, f.payload);
            assert_eq!(g.header(), f.header());
            assert_eq!(g.encode(), bytes);
        }
    }

    #[test]
    fn header_errors() {
        let bytes = WireFrame::status(Role::Fluid, false).encode();
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(WireFrame::decode(&v2), Err(Error::Protocol(_))));
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(WireFrame::decode(&magic), Err(Error::Format(_))));
        assert!(matches!(WireFrame::decode(&bytes[..5]), Err(Error::Format(_))));
        let mut short = WireFrame::control(Role::Fluid, None, DMatrix::zeros(2, 3)).encode();
        short.truncate(short.len() - 8);
        assert!(WireFrame::decode(&short).is_err());
    }

    #[test]
    fn closed_forms() {
        let p = OverheadParams::surface_grid(2, 2);
        assert_eq!(overhead_vertex(&p), 108);
        assert_eq!(overhead_spline(&p), 62);
        assert_eq!(overhead_spline(&p) + knot_padding(&p), 76);
        assert_eq!(8 * overhead_vertex(&OverheadParams::surface_grid(128, 5)), 13824 * 1024);
        assert_eq!(overhead_vertex(&OverheadParams { steps: 0, ..p }), 0);
        assert_eq!(overhead_spline(&OverheadParams { steps: 0, ..p }), 14);
        for (deg, nans) in [(2, 266), (3, 270), (4, 274), (5, 278)] {
            assert_eq!(knot_padding(&OverheadParams::surface_grid(128, deg)), nans);
        }
    }
}
