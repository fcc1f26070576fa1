//! Plain-text and binary artifact files.
//!
//! Text artifacts start with `# key: value` header lines followed by a
//! whitespace-separated integer payload:
//!
//! ```text
//! # kind: lattice-vector          # kind: dnet-matrices
//! # base: 2                       # base: 2
//! # d: 2                          # d: 2
//! # m_max: 20                     # m: 3
//! # source: ...                   # t_max: 3
//! 1 182667                        4 2 1
//!                                 7 5 3   (one line per matrix)
//! ```
//!
//! Matrix columns are `t_max`-bit integers with row 0 in the most
//! significant bit. Point batches are CSV (`r,x1,...,xd`) or a
//! little-endian binary layout described at [`BINARY_MAGIC`].

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dnet::GeneratingMatrixSet;
use crate::error::{QmcError, Result};
use crate::lattice::{LatticeGeneratingVector, DEFAULT_M_MAX};
use crate::points::{BatchMeta, PointBatch};

/// First 12 bytes of a binary batch; followed by a `u32` version, then
/// `reps`, `n`, `d` as `u64` and the `(r, i, j)` row-major `f64` data.
pub const BINARY_MAGIC: &[u8; 12] = b"QMCKIT-BATCH";
pub const BINARY_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BatchFormat {
    Csv,
    Binary,
}

impl BatchFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "binary" | "bin" => Ok(Self::Binary),
            _ => Err(QmcError::InvalidArgument(format!("unknown batch format '{s}'"))),
        }
    }

    /// Guesses from the file extension; anything but `.bin` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => Self::Binary,
            _ => Self::Csv,
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| QmcError::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| QmcError::io(path, e))
}

fn parse_err(origin: &str, line: usize, msg: impl Into<String>) -> QmcError {
    QmcError::Parse {
        path: origin.to_string(),
        line,
        msg: msg.into(),
    }
}

struct TextArtifact {
    header: BTreeMap<String, (usize, String)>,
    /// `(line number, tokens)` per non-empty payload line.
    payload: Vec<(usize, Vec<String>)>,
}

impl TextArtifact {
    fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut header = BTreeMap::new();
        let mut payload = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let t = raw.trim();
            if let Some(rest) = t.strip_prefix('#') {
                if !payload.is_empty() {
                    return Err(parse_err(origin, line, "header line after payload"));
                }
                let Some((key, value)) = rest.split_once(':') else {
                    continue; // free-form comment
                };
                let key = key.trim().to_string();
                if header.contains_key(&key) {
                    return Err(parse_err(origin, line, format!("duplicate header key '{key}'")));
                }
                header.insert(key, (line, value.trim().to_string()));
            } else if !t.is_empty() {
                payload.push((line, t.split_whitespace().map(str::to_string).collect()));
            }
        }
        Ok(Self { header, payload })
    }

    fn expect_kind(&self, kind: &str, origin: &str) -> Result<()> {
        match self.header.get("kind") {
            Some((_, k)) if k == kind => Ok(()),
            Some((line, k)) => Err(parse_err(origin, *line, format!("expected kind '{kind}', found '{k}'"))),
            None => Err(parse_err(origin, 1, format!("missing '# kind: {kind}' header"))),
        }
    }

    fn num<T: std::str::FromStr>(&self, key: &str, origin: &str) -> Result<Option<T>> {
        match self.header.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| parse_err(origin, *line, format!("header '{key}' has non-integer value '{v}'"))),
        }
    }

    fn required<T: std::str::FromStr>(&self, key: &str, origin: &str) -> Result<T> {
        self.num(key, origin)?
            .ok_or_else(|| parse_err(origin, 1, format!("missing '# {key}:' header")))
    }

    fn check_base(&self, origin: &str) -> Result<()> {
        if let Some(b) = self.num::<u64>("base", origin)? {
            if b != 2 {
                let line = self.header["base"].0;
                return Err(parse_err(origin, line, format!("only base 2 is supported, found {b}")));
            }
        }
        Ok(())
    }
}

fn parse_u64(tok: &str, origin: &str, line: usize) -> Result<u64> {
    tok.parse::<u64>()
        .map_err(|_| parse_err(origin, line, format!("'{tok}' is not a non-negative integer")))
}

pub fn parse_lattice_vector(text: &str, origin: &str) -> Result<LatticeGeneratingVector> {
    let art = TextArtifact::parse(text, origin)?;
    art.expect_kind("lattice-vector", origin)?;
    art.check_base(origin)?;
    let d: usize = art.required("d", origin)?;
    let m_max: u32 = art.num("m_max", origin)?.unwrap_or(DEFAULT_M_MAX);
    let mut g = Vec::new();
    for (line, toks) in &art.payload {
        for t in toks {
            let v = parse_u64(t, origin, *line)?;
            if v == 0 {
                return Err(parse_err(origin, *line, "generating vector entries must be positive"));
            }
            g.push(v);
        }
    }
    if g.is_empty() {
        return Err(parse_err(origin, text.lines().count().max(1), "empty payload"));
    }
    if g.len() != d {
        let line = art.payload.last().map_or(1, |p| p.0);
        return Err(parse_err(origin, line, format!("header says d = {d} but payload has {} entries", g.len())));
    }
    LatticeGeneratingVector::new(g, m_max)
}

pub fn format_lattice_vector(g: &LatticeGeneratingVector, source: &str) -> String {
    let payload: Vec<String> = g.components().iter().map(u64::to_string).collect();
    format!(
        "# kind: lattice-vector\n# base: 2\n# d: {}\n# m_max: {}\n# source: {}\n{}\n",
        g.dim(),
        g.m_max(),
        source,
        payload.join(" ")
    )
}

pub fn read_lattice_vector(path: &Path) -> Result<LatticeGeneratingVector> {
    parse_lattice_vector(&read_text(path)?, &path.display().to_string())
}

pub fn write_lattice_vector(g: &LatticeGeneratingVector, path: &Path, source: &str) -> Result<()> {
    write_bytes(path, format_lattice_vector(g, source).as_bytes())
}

pub fn parse_dnet_matrices(text: &str, origin: &str) -> Result<GeneratingMatrixSet> {
    let art = TextArtifact::parse(text, origin)?;
    art.expect_kind("dnet-matrices", origin)?;
    art.check_base(origin)?;
    let t_max: u32 = art.required("t_max", origin)?;
    if t_max == 0 || t_max > 64 {
        let line = art.header["t_max"].0;
        return Err(parse_err(origin, line, format!("t_max must be in 1..=64, got {t_max}")));
    }
    if art.payload.is_empty() {
        return Err(parse_err(origin, text.lines().count().max(1), "empty payload"));
    }
    let d = art.payload.len();
    let m = art.payload[0].1.len();
    if let Some(hd) = art.num::<usize>("d", origin)? {
        if hd != d {
            return Err(parse_err(origin, art.header["d"].0, format!("header says d = {hd} but payload has {d} lines")));
        }
    }
    if let Some(hm) = art.num::<usize>("m", origin)? {
        if hm != m {
            return Err(parse_err(origin, art.header["m"].0, format!("header says m = {hm} but the first line has {m} entries")));
        }
    }
    let mut cols = Vec::with_capacity(d * m);
    for (line, toks) in &art.payload {
        if toks.len() != m {
            return Err(parse_err(origin, *line, format!("ragged line: expected {m} entries, found {}", toks.len())));
        }
        for t in toks {
            let v = parse_u64(t, origin, *line)?;
            if t_max < 64 && v >> t_max != 0 {
                return Err(QmcError::Range {
                    value: v,
                    bound: 1u128 << t_max,
                });
            }
            cols.push(v);
        }
    }
    GeneratingMatrixSet::new(d, m as u32, t_max, cols)
}

pub fn format_dnet_matrices(c: &GeneratingMatrixSet, source: &str) -> String {
    let mut s = format!(
        "# kind: dnet-matrices\n# base: 2\n# d: {}\n# m: {}\n# t_max: {}\n# source: {}\n",
        c.dim(),
        c.m(),
        c.t_max(),
        source
    );
    for j in 0..c.dim() {
        let line: Vec<String> = c.matrix(j).iter().map(u64::to_string).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

pub fn read_dnet_matrices(path: &Path) -> Result<GeneratingMatrixSet> {
    parse_dnet_matrices(&read_text(path)?, &path.display().to_string())
}

pub fn write_dnet_matrices(c: &GeneratingMatrixSet, path: &Path, source: &str) -> Result<()> {
    write_bytes(path, format_dnet_matrices(c, source).as_bytes())
}

/// Result of the best-effort converter for foreign layouts.
#[derive(Debug, Clone, PartialEq)]
pub enum Converted {
    Lattice(LatticeGeneratingVector),
    Dnet(GeneratingMatrixSet),
}

/// Best-effort import of bare integer files as distributed by external
/// low-discrepancy repositories. **Lossy and unverified**: it guesses the
/// layout from the shape of the numbers.
///
/// * one integer per line: a lattice generating vector (`m_max` defaults
///   to 20 unless a `m_max` comment is present);
/// * `d` lines of equal length: generating matrices, MSB-first, with
///   `t_max` taken as the bit length of the largest entry (at least `m`);
/// * a preamble of single integers `base, d, m, t_max` followed by
///   `d * m` integers: generating matrices in that order.
pub fn convert_foreign(text: &str, origin: &str) -> Result<Converted> {
    let mut rows: Vec<(usize, Vec<u64>)> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let vals = body
            .split_whitespace()
            .map(|t| parse_u64(t, origin, k + 1))
            .collect::<Result<Vec<_>>>()?;
        rows.push((k + 1, vals));
    }
    if rows.is_empty() {
        return Err(parse_err(origin, 1, "no numeric payload"));
    }
    let all_single = rows.iter().all(|r| r.1.len() == 1);
    if all_single {
        let vals: Vec<u64> = rows.iter().map(|r| r.1[0]).collect();
        // base / d / m / t_max preamble?
        if vals.len() >= 4 && vals[0] == 2 {
            let (d, m, t) = (vals[1] as usize, vals[2] as usize, vals[3] as u32);
            if d >= 1 && m >= 1 && (1..=64).contains(&t) && vals.len() == 4 + d * m {
                let c = GeneratingMatrixSet::new(d, m as u32, t, vals[4..].to_vec())?;
                return Ok(Converted::Dnet(c));
            }
        }
        return Ok(Converted::Lattice(LatticeGeneratingVector::new(vals, DEFAULT_M_MAX)?));
    }
    let m = rows[0].1.len();
    if let Some(r) = rows.iter().find(|r| r.1.len() != m) {
        return Err(parse_err(origin, r.0, "ragged matrix rows"));
    }
    let max = rows.iter().flat_map(|r| r.1.iter().copied()).max().unwrap_or(0);
    let t = (64 - max.leading_zeros()).max(m as u32);
    let cols = rows.into_iter().flat_map(|r| r.1).collect::<Vec<_>>();
    Ok(Converted::Dnet(GeneratingMatrixSet::new(cols.len() / m, m as u32, t, cols)?))
}

pub fn format_batch_csv(batch: &PointBatch) -> String {
    let mut s = String::with_capacity(batch.data().len() * 20);
    for r in 0..batch.reps() {
        for i in 0..batch.n() {
            s.push_str(&r.to_string());
            for &x in batch.point(r, i) {
                s.push(',');
                // shortest representation that round-trips exactly
                s.push_str(&format!("{x:?}"));
            }
            s.push('\n');
        }
    }
    s
}

pub fn parse_batch_csv(text: &str, origin: &str) -> Result<PointBatch> {
    let mut d = None;
    let mut counts: Vec<usize> = Vec::new();
    let mut data = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut fields = raw.split(',');
        let r_tok = fields.next().unwrap_or("").trim();
        let r: usize = r_tok
            .parse()
            .map_err(|_| parse_err(origin, line, format!("bad replication index '{r_tok}'")))?;
        let start = data.len();
        for f in fields {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| parse_err(origin, line, format!("'{}' is not a number", f.trim())))?;
            data.push(v);
        }
        let width = data.len() - start;
        match d {
            None if width == 0 => return Err(parse_err(origin, line, "row has no coordinates")),
            None => d = Some(width),
            Some(dd) if dd != width => {
                return Err(parse_err(origin, line, format!("expected {dd} coordinates, found {width}")))
            }
            _ => {}
        }
        if r == counts.len() {
            counts.push(0);
        } else if r + 1 != counts.len() {
            return Err(parse_err(origin, line, format!("replication {r} out of order")));
        }
        counts[r] += 1;
    }
    let Some(d) = d else {
        return Err(parse_err(origin, 1, "empty batch"));
    };
    let n = counts[0];
    if let Some(r) = counts.iter().position(|&c| c != n) {
        return Err(parse_err(origin, text.lines().count(), format!("replication {r} has {} rows, expected {n}", counts[r])));
    }
    PointBatch::new(counts.len(), n, d, data, BatchMeta::default())
}

pub fn encode_batch_binary(batch: &PointBatch) -> Vec<u8> {
    let mut out = Vec::with_capacity(40 + 8 * batch.data().len());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    for v in [batch.reps(), batch.n(), batch.dim()] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for x in batch.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_batch_binary(bytes: &[u8], origin: &str) -> Result<PointBatch> {
    let err = |msg: &str| parse_err(origin, 0, msg);
    if bytes.len() < 40 || &bytes[..12] != BINARY_MAGIC {
        return Err(err("not a binary point batch (bad magic)"));
    }
    let version = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
    if version != BINARY_VERSION {
        return Err(err(&format!("unsupported version {version}")));
    }
    let word = |k: usize| u64::from_le_bytes(bytes[16 + 8 * k..24 + 8 * k].try_into().unwrap()) as usize;
    let (reps, n, d) = (word(0), word(1), word(2));
    let count = reps
        .checked_mul(n)
        .and_then(|v| v.checked_mul(d))
        .ok_or_else(|| err("shape overflows"))?;
    let body = &bytes[40..];
    if body.len() != count * 8 {
        return Err(err(&format!("payload has {} bytes, shape needs {}", body.len(), count * 8)));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    PointBatch::new(reps, n, d, data, BatchMeta::default())
}

pub fn write_point_batch(batch: &PointBatch, path: &Path, format: BatchFormat) -> Result<()> {
    if batch.data().is_empty() {
        return Err(QmcError::InvalidArgument("refusing to write an empty batch".into()));
    }
    let file = fs::File::create(path).map_err(|e| QmcError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let bytes = match format {
        BatchFormat::Csv => format_batch_csv(batch).into_bytes(),
        BatchFormat::Binary => encode_batch_binary(batch),
    };
    w.write_all(&bytes)
        .and_then(|_| w.flush())
        .map_err(|e| QmcError::io(path, e))
}

pub fn read_point_batch(path: &Path, format: BatchFormat) -> Result<PointBatch> {
    let origin = path.display().to_string();
    match format {
        BatchFormat::Csv => parse_batch_csv(&read_text(path)?, &origin),
        BatchFormat::Binary => {
            let bytes = fs::read(path).map_err(|e| QmcError::io(path, e))?;
            decode_batch_binary(&bytes, &origin)
        }
    }
}

/// Provenance written next to every generated batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub library_version: String,
    pub meta: BatchMeta,
    /// Fully resolved generation settings.
    pub spec: serde_json::Value,
}

impl Sidecar {
    pub fn new(meta: BatchMeta, spec: serde_json::Value) -> Self {
        Self {
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            meta,
            spec,
        }
    }
}

/// `<path>.meta.json`.
pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    s.into()
}

pub fn write_sidecar(batch_path: &Path, sidecar: &Sidecar) -> Result<()> {
    let p = sidecar_path(batch_path);
    let json = serde_json::to_string_pretty(sidecar).expect("sidecar serializes");
    write_bytes(&p, format!("{json}\n").as_bytes())
}

pub fn read_sidecar(batch_path: &Path) -> Result<Sidecar> {
    let p = sidecar_path(batch_path);
    let text = read_text(&p)?;
    serde_json::from_str(&text).map_err(|e| parse_err(&p.display().to_string(), e.line(), e.to_string()))
}
