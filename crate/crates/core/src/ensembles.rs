//! Pattern ensembles and pattern files.
//!
//! Binary layout (`.damb`), little-endian:
//!
//! ```text
//! "DAMB" | 0x01 | N: u32 | p: u32 | p·N bytes, row-major, 0x01 = +1, 0x00 = −1
//! ```
//!
//! Text layout: a first line `"<N> <p>"`, then `p` lines of `N` whitespace
//! separated tokens from `{-1, 1}`.

use std::fs;
use std::path::Path;

use crate::model::{ModelParams, PatternSet};
use crate::{DamError, DamRng, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"DAMB";
pub const BINARY_VERSION: u8 = 0x01;
const HEADER_LEN: usize = 13;

pub const DEFAULT_COPY_PROB: f64 = 0.25;
pub const DEFAULT_COPY_FRACTION: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EnsembleKind {
    RandomIid,
    Correlated,
    File,
}

impl EnsembleKind {
    pub fn name(self) -> &'static str {
        match self {
            EnsembleKind::RandomIid => "random",
            EnsembleKind::Correlated => "correlated",
            EnsembleKind::File => "file",
        }
    }
}

impl std::str::FromStr for EnsembleKind {
    type Err = DamError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" | "random_iid" => Ok(EnsembleKind::RandomIid),
            "correlated" | "adversarial" => Ok(EnsembleKind::Correlated),
            "file" => Ok(EnsembleKind::File),
            other => Err(DamError::InvalidConfig(format!(
                "unknown ensemble kind {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub params: ModelParams,
    pub copy_prob: f64,
    pub copy_fraction: f64,
}

impl EnsembleSpec {
    pub fn random(params: ModelParams) -> Self {
        Self {
            kind: EnsembleKind::RandomIid,
            params,
            copy_prob: DEFAULT_COPY_PROB,
            copy_fraction: DEFAULT_COPY_FRACTION,
        }
    }

    pub fn correlated(params: ModelParams) -> Self {
        Self {
            kind: EnsembleKind::Correlated,
            ..Self::random(params)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.copy_prob) {
            return Err(DamError::InvalidConfig(format!(
                "copy_prob = {} must lie in [0, 1]",
                self.copy_prob
            )));
        }
        if !(0.0..=1.0).contains(&self.copy_fraction) {
            return Err(DamError::InvalidConfig(format!(
                "copy_fraction = {} must lie in [0, 1]",
                self.copy_fraction
            )));
        }
        Ok(())
    }

    /// Draws a pattern set. `File` ensembles are loaded elsewhere.
    pub fn generate(&self, rng: &mut DamRng) -> Result<PatternSet> {
        self.validate()?;
        match self.kind {
            EnsembleKind::RandomIid => generate_random(self.params, rng),
            EnsembleKind::Correlated => {
                generate_correlated(self.params, self.copy_prob, self.copy_fraction, rng)
            }
            EnsembleKind::File => Err(DamError::InvalidConfig(
                "file ensembles are loaded, not generated".into(),
            )),
        }
    }
}

/// i.i.d. uniform spins, one generator output per entry, row-major.
pub fn generate_random(params: ModelParams, rng: &mut DamRng) -> Result<PatternSet> {
    let len = params.neurons() * params.patterns();
    let rows = (0..len).map(|_| rng.spin()).collect();
    PatternSet::new(params, rows)
}

/// Random patterns in which patterns `2..=⌊p·copy_fraction⌋` copy each
/// coordinate from the first pattern with probability `copy_prob`.
///
/// The random set is drawn first; the copy decisions follow, pattern by
/// pattern, one uniform draw per coordinate.
pub fn generate_correlated(
    params: ModelParams,
    copy_prob: f64,
    copy_fraction: f64,
    rng: &mut DamRng,
) -> Result<PatternSet> {
    let (n, p) = (params.neurons(), params.patterns());
    if p < 3 {
        return Err(DamError::InvalidParams(format!(
            "correlated ensembles need p ≥ 3, got {p}"
        )));
    }
    let mut rows: Vec<i8> = (0..n * p).map(|_| rng.spin()).collect();
    let correlated = correlated_count(p, copy_fraction);
    let (first, rest) = rows.split_at_mut(n);
    for row in rest.chunks_exact_mut(n).take(correlated.saturating_sub(1)) {
        for (v, &source) in row.iter_mut().zip(first.iter()) {
            if rng.next_f64() < copy_prob {
                *v = source;
            }
        }
    }
    PatternSet::new(params, rows)
}

fn correlated_count(p: usize, fraction: f64) -> usize {
    // Integer path for the default so that p divisible by 3 is exact.
    if fraction == DEFAULT_COPY_FRACTION {
        p / 3
    } else {
        (p as f64 * fraction + 1e-9).floor() as usize
    }
}

/// Per-vector median thresholding: entries `≥ median` map to +1.
pub fn binarize_median(vectors: &[Vec<f64>], order: u32) -> Result<PatternSet> {
    let first = vectors.first().ok_or(DamError::EmptyInput("vectors"))?;
    let n = first.len();
    if n == 0 {
        return Err(DamError::EmptyInput("vector entries"));
    }
    let params = ModelParams::new(order, n, vectors.len())?;
    let mut rows = Vec::with_capacity(n * vectors.len());
    for v in vectors {
        if v.len() != n {
            return Err(DamError::DimensionMismatch {
                expected: n,
                actual: v.len(),
            });
        }
        if v.iter().any(|x| x.is_nan()) {
            return Err(DamError::InvalidConfig("NaN in input vector".into()));
        }
        let m = median(v);
        rows.extend(v.iter().map(|&x| if x >= m { 1i8 } else { -1 }));
    }
    PatternSet::new(params, rows)
}

/// Median; the mean of the two middle values for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternFormat {
    Binary,
    Text,
}

impl std::str::FromStr for PatternFormat {
    type Err = DamError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" | "damb" => Ok(PatternFormat::Binary),
            "text" | "txt" => Ok(PatternFormat::Text),
            other => Err(DamError::InvalidConfig(format!(
                "unknown pattern format {other:?}"
            ))),
        }
    }
}

pub fn encode_binary(patterns: &PatternSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + patterns.rows().len());
    out.extend_from_slice(BINARY_MAGIC);
    out.push(BINARY_VERSION);
    out.extend_from_slice(&(patterns.neurons() as u32).to_le_bytes());
    out.extend_from_slice(&(patterns.len() as u32).to_le_bytes());
    out.extend(patterns.rows().iter().map(|&v| u8::from(v > 0)));
    out
}

pub fn encode_text(patterns: &PatternSet) -> String {
    let mut out = format!("{} {}\n", patterns.neurons(), patterns.len());
    for mu in 0..patterns.len() {
        let line: Vec<&str> = patterns
            .pattern(mu)
            .iter()
            .map(|&v| if v > 0 { "1" } else { "-1" })
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn decode_binary(bytes: &[u8], order: u32) -> Result<PatternSet> {
    if bytes.len() < HEADER_LEN {
        return Err(DamError::MalformedHeader(format!(
            "need {HEADER_LEN} header bytes, found {}",
            bytes.len()
        )));
    }
    if &bytes[..4] != BINARY_MAGIC {
        return Err(DamError::MalformedHeader("bad magic".into()));
    }
    if bytes[4] != BINARY_VERSION {
        return Err(DamError::MalformedHeader(format!(
            "unsupported version {}",
            bytes[4]
        )));
    }
    let n = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
    let p = u32::from_le_bytes(bytes[9..13].try_into().expect("4 bytes")) as usize;
    if n == 0 || p == 0 {
        return Err(DamError::MalformedHeader(format!(
            "N = {n}, p = {p} must be positive"
        )));
    }
    let payload = &bytes[HEADER_LEN..];
    let expected = n * p;
    if payload.len() < expected {
        return Err(DamError::Truncated {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(DamError::MalformedHeader(format!(
            "{} trailing bytes after payload",
            payload.len() - expected
        )));
    }
    let mut rows = Vec::with_capacity(expected);
    for (k, &b) in payload.iter().enumerate() {
        rows.push(match b {
            0x01 => 1,
            0x00 => -1,
            other => {
                return Err(DamError::InvalidEntry {
                    row: k / n,
                    column: k % n,
                    token: format!("0x{other:02x}"),
                })
            }
        });
    }
    PatternSet::new(ModelParams::new(order, n, p)?, rows)
}

pub fn decode_text(text: &str, order: u32) -> Result<PatternSet> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| DamError::MalformedHeader("empty file".into()))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let (n, p) = match dims.as_slice() {
        [n, p] => (
            n.parse::<usize>()
                .map_err(|_| DamError::MalformedHeader(format!("bad N {n:?}")))?,
            p.parse::<usize>()
                .map_err(|_| DamError::MalformedHeader(format!("bad p {p:?}")))?,
        ),
        _ => {
            return Err(DamError::MalformedHeader(format!(
                "expected \"<N> <p>\", got {header:?}"
            )))
        }
    };
    if n == 0 || p == 0 {
        return Err(DamError::MalformedHeader(format!(
            "N = {n}, p = {p} must be positive"
        )));
    }
    let mut rows = Vec::with_capacity(n * p);
    for row in 0..p {
        let Some(line) = lines.next() else {
            return Err(DamError::Truncated {
                expected: n * p,
                found: rows.len(),
            });
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < n {
            return Err(DamError::Truncated {
                expected: n * p,
                found: rows.len() + tokens.len(),
            });
        }
        if tokens.len() > n {
            return Err(DamError::MalformedHeader(format!(
                "row {row} has {} entries, header says {n}",
                tokens.len()
            )));
        }
        for (column, token) in tokens.into_iter().enumerate() {
            rows.push(match token {
                "1" | "+1" => 1,
                "-1" => -1,
                _ => {
                    return Err(DamError::InvalidEntry {
                        row,
                        column,
                        token: token.to_string(),
                    })
                }
            });
        }
    }
    if lines.next().is_some() {
        return Err(DamError::MalformedHeader(format!("more than p = {p} rows")));
    }
    PatternSet::new(ModelParams::new(order, n, p)?, rows)
}

/// Decodes either format, choosing by the magic prefix.
pub fn decode_auto(bytes: &[u8], order: u32) -> Result<PatternSet> {
    if bytes.starts_with(BINARY_MAGIC) {
        decode_binary(bytes, order)
    } else {
        let text = std::str::from_utf8(bytes)
            .map_err(|_| DamError::MalformedHeader("neither DAMB nor UTF-8 text".into()))?;
        decode_text(text, order)
    }
}

/// Writes `patterns` and returns the number of bytes written.
pub fn save_patterns(patterns: &PatternSet, path: &Path, format: PatternFormat) -> Result<usize> {
    let bytes = match format {
        PatternFormat::Binary => encode_binary(patterns),
        PatternFormat::Text => encode_text(patterns).into_bytes(),
    };
    fs::write(path, &bytes).map_err(|source| DamError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(bytes.len())
}

/// Reads a pattern file in either format; `order` is the interaction order
/// the patterns will be used with.
pub fn load_patterns(path: &Path, order: u32) -> Result<PatternSet> {
    let bytes = fs::read(path).map_err(|source| DamError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_auto(&bytes, order)
}
