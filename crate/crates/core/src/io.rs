//! File formats.
//!
//! Text artifacts (schedules, vectors, factored distributions, solver
//! reports) are JSON envelopes
//!
//! ```text
//! {"kind": "vector", "version": "1", "payload": {...}}
//! ```
//!
//! with every real written as a 17-significant-digit decimal, which
//! round-trips 8-byte floats exactly. Dense tensors have two encodings:
//!
//! * indexed CSV: header `i1,…,ik,probability`, then one `i_1,…,i_k,p` row
//!   per entry in row-major order (first index slowest);
//! * flat binary: 16-byte header (magic `ECJT`, then little-endian `u32`
//!   version, order `k`, alphabet size `N`) followed by `N^k` little-endian
//!   `f64` entries in row-major order.
//!
//! Unknown kinds and versions are rejected.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use thiserror::Error;

use crate::entropy::{
    DenseJointTensor, EntropySchedule, FactoredJointDistribution, InvariantError,
    ProbabilityVector, SolverReport,
};

pub const FORMAT_VERSION: &str = "1";
pub const DENSE_MAGIC: [u8; 4] = *b"ECJT";
pub const DENSE_BINARY_VERSION: u32 = 1;
pub const DENSE_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Schedule,
    Vector,
    Factored,
    Dense,
    Report,
}

impl std::fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Schedule => "schedule",
            Self::Vector => "vector",
            Self::Factored => "factored",
            Self::Dense => "dense",
            Self::Report => "report",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenseFormat {
    IndexedCsv,
    FlatBinary,
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("parse error at line {line}, {field}: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },
    #[error("expected a {expected} artifact, found {found}")]
    WrongKind {
        expected: ArtifactKind,
        found: String,
    },
    #[error("unsupported {kind} format version `{found}`")]
    UnsupportedVersion { kind: String, found: String },
    #[error("{context}: {source}")]
    InvariantViolation {
        context: String,
        #[source]
        source: InvariantError,
    },
}

impl FormatError {
    fn parse(line: usize, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Parse {
            line,
            field: field.into(),
            message: message.into(),
        }
    }

    fn invariant(context: impl Into<String>, source: InvariantError) -> Self {
        Self::InvariantViolation {
            context: context.into(),
            source,
        }
    }

    fn from_json(e: serde_json::Error) -> Self {
        Self::parse(e.line(), format!("column {}", e.column()), e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Pretty JSON with every `f64` printed as a 17-significant-digit decimal.
struct FullPrecision<'a>(PrettyFormatter<'a>);

impl Formatter for FullPrecision<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes `value` as pretty JSON with full-precision reals.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, FullPrecision(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .expect("artifact payloads serialize infallibly");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// A type with a JSON envelope encoding.
pub trait Artifact: Sized {
    const KIND: ArtifactKind;
    type Payload: Serialize + DeserializeOwned;

    fn to_payload(&self) -> Self::Payload;
    fn from_payload(payload: Self::Payload) -> Result<Self, FormatError>;
}

#[derive(Serialize, Deserialize)]
pub struct SchedulePayload {
    pub n_symbols: usize,
    pub targets: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
pub struct VectorPayload {
    pub n_symbols: usize,
    pub probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
pub struct FactoredPayload {
    pub n_symbols: usize,
    pub order: usize,
    pub factors: Vec<Vec<f64>>,
}

impl Artifact for EntropySchedule {
    const KIND: ArtifactKind = ArtifactKind::Schedule;
    type Payload = SchedulePayload;

    fn to_payload(&self) -> SchedulePayload {
        SchedulePayload {
            n_symbols: self.n_symbols(),
            targets: self.targets().to_vec(),
        }
    }

    fn from_payload(p: SchedulePayload) -> Result<Self, FormatError> {
        EntropySchedule::new(p.n_symbols, p.targets).map_err(|v| {
            FormatError::parse(0, format!("targets (order {:?})", v.order()), v.to_string())
        })
    }
}

impl Artifact for ProbabilityVector {
    const KIND: ArtifactKind = ArtifactKind::Vector;
    type Payload = VectorPayload;

    fn to_payload(&self) -> VectorPayload {
        VectorPayload {
            n_symbols: self.n_symbols(),
            probs: self.probs().to_vec(),
        }
    }

    fn from_payload(p: VectorPayload) -> Result<Self, FormatError> {
        if p.probs.len() != p.n_symbols {
            return Err(FormatError::invariant(
                "probs",
                InvariantError::WrongLength {
                    expected: p.n_symbols,
                    found: p.probs.len(),
                },
            ));
        }
        ProbabilityVector::new(p.probs).map_err(|e| FormatError::invariant("probs", e))
    }
}

impl Artifact for FactoredJointDistribution {
    const KIND: ArtifactKind = ArtifactKind::Factored;
    type Payload = FactoredPayload;

    fn to_payload(&self) -> FactoredPayload {
        FactoredPayload {
            n_symbols: self.n_symbols(),
            order: self.order(),
            factors: self.factors().iter().map(|f| f.probs().to_vec()).collect(),
        }
    }

    fn from_payload(p: FactoredPayload) -> Result<Self, FormatError> {
        if p.factors.is_empty() {
            return Err(FormatError::parse(0, "factors", "factor list is empty"));
        }
        if p.factors.len() != p.order {
            return Err(FormatError::invariant(
                "factors",
                InvariantError::WrongLength {
                    expected: p.order,
                    found: p.factors.len(),
                },
            ));
        }
        let mut factors = Vec::with_capacity(p.factors.len());
        for (i, probs) in p.factors.into_iter().enumerate() {
            if probs.len() != p.n_symbols {
                return Err(FormatError::invariant(
                    format!("factor {i}"),
                    InvariantError::AlphabetMismatch {
                        position: i,
                        expected: p.n_symbols,
                        found: probs.len(),
                    },
                ));
            }
            factors.push(
                ProbabilityVector::new(probs)
                    .map_err(|e| FormatError::invariant(format!("factor {i}"), e))?,
            );
        }
        FactoredJointDistribution::new(factors).map_err(|e| FormatError::invariant("factors", e))
    }
}

impl Artifact for SolverReport {
    const KIND: ArtifactKind = ArtifactKind::Report;
    type Payload = SolverReport;

    fn to_payload(&self) -> SolverReport {
        self.clone()
    }

    fn from_payload(p: SolverReport) -> Result<Self, FormatError> {
        Ok(p)
    }
}

#[derive(Serialize)]
struct EnvelopeOut<'a, P> {
    kind: ArtifactKind,
    version: &'a str,
    payload: P,
}

#[derive(Deserialize)]
struct EnvelopeHeader {
    kind: String,
    version: String,
}

#[derive(Deserialize)]
struct EnvelopeIn<P> {
    payload: P,
}

pub fn encode<T: Artifact>(value: &T) -> String {
    let mut text = to_json_string(&EnvelopeOut {
        kind: T::KIND,
        version: FORMAT_VERSION,
        payload: value.to_payload(),
    });
    text.push('\n');
    text
}

/// Reads the envelope's `kind` and `version` without touching the payload.
pub fn peek_kind(text: &str) -> Result<ArtifactKind, FormatError> {
    let header: EnvelopeHeader = serde_json::from_str(text).map_err(FormatError::from_json)?;
    let kind: ArtifactKind = serde_json::from_value(serde_json::Value::String(header.kind.clone()))
        .map_err(|_| {
            FormatError::parse(
                1,
                "kind",
                format!("unknown artifact kind `{}`", header.kind),
            )
        })?;
    if header.version != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion {
            kind: header.kind,
            found: header.version,
        });
    }
    Ok(kind)
}

pub fn decode<T: Artifact>(text: &str) -> Result<T, FormatError> {
    let kind = peek_kind(text)?;
    if kind != T::KIND {
        return Err(FormatError::WrongKind {
            expected: T::KIND,
            found: kind.to_string(),
        });
    }
    let env: EnvelopeIn<T::Payload> = serde_json::from_str(text).map_err(FormatError::from_json)?;
    T::from_payload(env.payload)
}

pub fn write_artifact<T: Artifact>(value: &T, path: &Path) -> Result<(), FormatError> {
    std::fs::write(path, encode(value)).map_err(io_err(path))
}

pub fn read_artifact<T: Artifact>(path: &Path) -> Result<T, FormatError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    decode(&text)
}

pub fn write_vector(v: &ProbabilityVector, path: &Path) -> Result<(), FormatError> {
    write_artifact(v, path)
}

pub fn read_vector(path: &Path) -> Result<ProbabilityVector, FormatError> {
    read_artifact(path)
}

pub fn write_factored(f: &FactoredJointDistribution, path: &Path) -> Result<(), FormatError> {
    write_artifact(f, path)
}

pub fn read_factored(path: &Path) -> Result<FactoredJointDistribution, FormatError> {
    read_artifact(path)
}

/// Writes the indexed CSV encoding of `t`.
pub fn write_dense_csv<W: Write>(t: &DenseJointTensor, mut w: W) -> io::Result<()> {
    let header: Vec<String> = (1..=t.order()).map(|i| format!("i{i}")).collect();
    writeln!(w, "{},probability", header.join(","))?;
    let n = t.n_symbols();
    let mut index = vec![0usize; t.order()];
    for &p in t.entries() {
        for i in &index {
            write!(w, "{i},")?;
        }
        writeln!(w, "{p:.16e}")?;
        // Odometer increment, last index fastest.
        for slot in index.iter_mut().rev() {
            *slot += 1;
            if *slot < n {
                break;
            }
            *slot = 0;
        }
    }
    w.flush()
}

/// Writes the flat binary encoding of `t`.
pub fn write_dense_binary<W: Write>(t: &DenseJointTensor, mut w: W) -> io::Result<()> {
    let header_field = |v: usize| {
        u32::try_from(v).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "header overflow"))
    };
    w.write_all(&DENSE_MAGIC)?;
    w.write_all(&DENSE_BINARY_VERSION.to_le_bytes())?;
    w.write_all(&header_field(t.order())?.to_le_bytes())?;
    w.write_all(&header_field(t.n_symbols())?.to_le_bytes())?;
    for &p in t.entries() {
        w.write_all(&p.to_le_bytes())?;
    }
    w.flush()
}

pub fn encode_dense(t: &DenseJointTensor, format: DenseFormat) -> Vec<u8> {
    let mut buf = Vec::new();
    match format {
        DenseFormat::IndexedCsv => write_dense_csv(t, &mut buf),
        DenseFormat::FlatBinary => write_dense_binary(t, &mut buf),
    }
    .expect("writing to a Vec cannot fail");
    buf
}

pub fn write_dense(
    t: &DenseJointTensor,
    format: DenseFormat,
    path: &Path,
) -> Result<(), FormatError> {
    let file = File::create(path).map_err(io_err(path))?;
    let w = BufWriter::new(file);
    match format {
        DenseFormat::IndexedCsv => write_dense_csv(t, w),
        DenseFormat::FlatBinary => write_dense_binary(t, w),
    }
    .map_err(io_err(path))
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

pub fn decode_dense_binary(bytes: &[u8]) -> Result<DenseJointTensor, FormatError> {
    if bytes.len() < DENSE_HEADER_LEN {
        return Err(FormatError::parse(
            0,
            "header",
            "file shorter than the 16-byte header",
        ));
    }
    if bytes[..4] != DENSE_MAGIC {
        return Err(FormatError::parse(0, "magic", "not a dense tensor file"));
    }
    let version = u32_at(bytes, 4);
    if version != DENSE_BINARY_VERSION {
        return Err(FormatError::UnsupportedVersion {
            kind: "dense".into(),
            found: version.to_string(),
        });
    }
    let order = u32_at(bytes, 8) as usize;
    let n = u32_at(bytes, 12) as usize;
    let body = &bytes[DENSE_HEADER_LEN..];
    let expected = n
        .checked_pow(order as u32)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| FormatError::parse(0, "header", format!("{n}^{order} entries overflow")))?;
    if body.len() != expected {
        return Err(FormatError::parse(
            0,
            "body",
            format!("expected {expected} bytes of entries, found {}", body.len()),
        ));
    }
    let entries = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    DenseJointTensor::new(order, n, entries).map_err(|e| FormatError::invariant("entries", e))
}

pub fn decode_dense_csv<R: BufRead>(reader: R) -> Result<DenseJointTensor, FormatError> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| FormatError::parse(1, "header", "empty file"))?;
    let header = header.map_err(|e| FormatError::parse(1, "header", e.to_string()))?;
    let columns: Vec<&str> = header.trim().split(',').collect();
    if columns.len() < 2 || columns.last() != Some(&"probability") {
        return Err(FormatError::parse(
            1,
            "header",
            "expected `i1,…,ik,probability`",
        ));
    }
    let order = columns.len() - 1;
    let mut indices: Vec<Vec<usize>> = Vec::new();
    let mut entries = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.map_err(|e| FormatError::parse(line_no, "row", e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != order + 1 {
            return Err(FormatError::parse(
                line_no,
                "row",
                format!("expected {} fields, found {}", order + 1, fields.len()),
            ));
        }
        let mut idx = Vec::with_capacity(order);
        for (col, field) in fields[..order].iter().enumerate() {
            idx.push(field.parse::<usize>().map_err(|e| {
                FormatError::parse(line_no, format!("i{}", col + 1), e.to_string())
            })?);
        }
        let p = fields[order]
            .parse::<f64>()
            .map_err(|e| FormatError::parse(line_no, "probability", e.to_string()))?;
        indices.push(idx);
        entries.push(p);
    }
    let rows = entries.len();
    let n = (2..=rows)
        .take_while(|c| c.checked_pow(order as u32).is_some_and(|v| v <= rows))
        .find(|c| c.pow(order as u32) == rows)
        .ok_or_else(|| {
            FormatError::parse(
                0,
                "rows",
                format!("{rows} rows is not N^{order} for any N ≥ 2"),
            )
        })?;
    // Rows must enumerate the multi-indices in row-major order.
    for (row, idx) in indices.iter().enumerate() {
        let mut rem = row;
        for (col, &v) in idx.iter().enumerate().rev() {
            if v != rem % n {
                return Err(FormatError::parse(
                    row + 2,
                    format!("i{}", col + 1),
                    "rows are not in row-major index order",
                ));
            }
            rem /= n;
        }
    }
    DenseJointTensor::new(order, n, entries).map_err(|e| FormatError::invariant("probability", e))
}

/// Reads a dense tensor in either encoding, detected from the magic bytes.
pub fn read_dense(path: &Path) -> Result<DenseJointTensor, FormatError> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err(path))?;
    if bytes.starts_with(&DENSE_MAGIC) {
        decode_dense_binary(&bytes)
    } else {
        decode_dense_csv(BufReader::new(bytes.as_slice()))
    }
}

/// Any artifact this crate writes.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyArtifact {
    Schedule(EntropySchedule),
    Vector(ProbabilityVector),
    Factored(FactoredJointDistribution),
    Dense(DenseJointTensor),
    Report(SolverReport),
}

/// Reads any artifact, detecting dense binary, JSON envelope, or dense CSV.
pub fn read_any(path: &Path) -> Result<AnyArtifact, FormatError> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err(path))?;
    if bytes.starts_with(&DENSE_MAGIC) {
        return decode_dense_binary(&bytes).map(AnyArtifact::Dense);
    }
    let text = String::from_utf8(bytes)
        .map_err(|e| FormatError::parse(0, "encoding", format!("not UTF-8: {e}")))?;
    if !text.trim_start().starts_with('{') {
        return decode_dense_csv(BufReader::new(text.as_bytes())).map(AnyArtifact::Dense);
    }
    Ok(match peek_kind(&text)? {
        ArtifactKind::Schedule => AnyArtifact::Schedule(decode(&text)?),
        ArtifactKind::Vector => AnyArtifact::Vector(decode(&text)?),
        ArtifactKind::Factored => AnyArtifact::Factored(decode(&text)?),
        ArtifactKind::Report => AnyArtifact::Report(decode(&text)?),
        ArtifactKind::Dense => {
            return Err(FormatError::parse(
                1,
                "kind",
                "dense tensors use the CSV or binary encodings",
            ))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{build_from_schedule, materialize, DEFAULT_MATERIALIZATION_CAP};
    use crate::entropy::SolveMethod;
    use crate::solver::{solve_vector, SolverConfig};

    fn worked_example(targets: &[f64]) -> FactoredJointDistribution {
        let s = EntropySchedule::new(10, targets.to_vec()).unwrap();
        build_from_schedule(&s, &SolverConfig::default())
            .unwrap()
            .distribution
    }

    #[test]
    fn vector_round_trip_uniform() {
        let v = ProbabilityVector::uniform(10).unwrap();
        assert_eq!(decode::<ProbabilityVector>(&encode(&v)).unwrap(), v);
    }

    #[test]
    fn solved_vector_keeps_entropy_bits() {
        let v = solve_vector(10, 2.5, &SolverConfig::default())
            .unwrap()
            .vector;
        let back: ProbabilityVector = decode(&encode(&v)).unwrap();
        assert_eq!(back.entropy().to_bits(), v.entropy().to_bits());
    }

    #[test]
    fn reals_are_written_with_seventeen_digits() {
        let v = ProbabilityVector::uniform(10).unwrap();
        assert!(encode(&v).contains("1.0000000000000001e-1"));
    }

    #[test]
    fn unnormalized_vector_is_rejected() {
        let text = r#"{"kind":"vector","version":"1","payload":{"n_symbols":2,"probs":[0.5,0.3]}}"#;
        assert!(matches!(
            decode::<ProbabilityVector>(text),
            Err(FormatError::InvariantViolation {
                source: InvariantError::NotNormalized { .. },
                ..
            })
        ));
    }

    #[test]
    fn malformed_json_reports_line() {
        let text = "{\"kind\":\"vector\",\n\"version\":\"1\",\n\"payload\":{\"n_symbols\":2,\"probs\":[0.5,x]}}";
        match decode::<ProbabilityVector>(text) {
            Err(FormatError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn version_and_kind_are_enforced() {
        let v = ProbabilityVector::uniform(2).unwrap();
        let text = encode(&v).replace("\"version\": \"1\"", "\"version\": \"2\"");
        assert!(matches!(
            decode::<ProbabilityVector>(&text),
            Err(FormatError::UnsupportedVersion { .. })
        ));
        assert!(matches!(
            decode::<FactoredJointDistribution>(&encode(&v)),
            Err(FormatError::WrongKind {
                expected: ArtifactKind::Factored,
                ..
            })
        ));
        let text = encode(&v).replace("\"vector\"", "\"matrix\"");
        assert!(matches!(
            decode::<ProbabilityVector>(&text),
            Err(FormatError::Parse { .. })
        ));
    }

    #[test]
    fn factored_round_trip_keeps_entropy() {
        let f = worked_example(&[2.5, 3.2, 3.8]);
        let back: FactoredJointDistribution = decode(&encode(&f)).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.joint_entropy().to_bits(), f.joint_entropy().to_bits());
    }

    #[test]
    fn factored_structural_errors() {
        let empty =
            r#"{"kind":"factored","version":"1","payload":{"n_symbols":2,"order":0,"factors":[]}}"#;
        assert!(matches!(
            decode::<FactoredJointDistribution>(empty),
            Err(FormatError::Parse { .. })
        ));
        let ragged = r#"{"kind":"factored","version":"1","payload":{"n_symbols":2,"order":2,"factors":[[0.5,0.5],[0.2,0.3,0.5]]}}"#;
        assert!(matches!(
            decode::<FactoredJointDistribution>(ragged),
            Err(FormatError::InvariantViolation { .. })
        ));
    }

    #[test]
    fn schedule_and_report_round_trip() {
        let s = EntropySchedule::new(10, vec![2.5, 3.2, 3.8]).unwrap();
        assert_eq!(decode::<EntropySchedule>(&encode(&s)).unwrap(), s);
        let r = solve_vector(
            7,
            1.1,
            &SolverConfig::for_method(SolveMethod::RandomSearch).with_seed(3),
        )
        .unwrap()
        .report;
        assert_eq!(decode::<SolverReport>(&encode(&r)).unwrap(), r);
        let bad = encode(&s).replace("3.7999999999999998e0", "2.0");
        assert!(decode::<EntropySchedule>(&bad).is_err());
    }

    #[test]
    fn dense_csv_shapes() {
        let t = materialize(&worked_example(&[2.5, 3.2]), DEFAULT_MATERIALIZATION_CAP).unwrap();
        let text = String::from_utf8(encode_dense(&t, DenseFormat::IndexedCsv)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "i1,i2,probability");
        assert_eq!(lines.len(), 101);
        assert!(lines[1].starts_with("0,0,"));
        assert!(lines[12].starts_with("1,1,"));
        assert!(lines[100].starts_with("9,9,"));

        let single = materialize(
            &FactoredJointDistribution::single(ProbabilityVector::uniform(4).unwrap()),
            DEFAULT_MATERIALIZATION_CAP,
        )
        .unwrap();
        let text = String::from_utf8(encode_dense(&single, DenseFormat::IndexedCsv)).unwrap();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.split(',').count() == 2));
    }

    #[test]
    fn dense_round_trips_both_formats() {
        let t = materialize(
            &worked_example(&[2.5, 3.2, 3.8]),
            DEFAULT_MATERIALIZATION_CAP,
        )
        .unwrap();
        let csv = encode_dense(&t, DenseFormat::IndexedCsv);
        assert_eq!(decode_dense_csv(csv.as_slice()).unwrap(), t);
        let bin = encode_dense(&t, DenseFormat::FlatBinary);
        assert_eq!(bin.len(), DENSE_HEADER_LEN + 8 * 1000);
        assert_eq!(&bin[..4], b"ECJT");
        assert_eq!(decode_dense_binary(&bin).unwrap(), t);
        assert_eq!(
            encode_dense(&decode_dense_binary(&bin).unwrap(), DenseFormat::FlatBinary),
            bin
        );
    }

    #[test]
    fn dense_binary_errors() {
        let t = DenseJointTensor::new(1, 2, vec![0.5, 0.5]).unwrap();
        let mut bin = encode_dense(&t, DenseFormat::FlatBinary);
        assert!(decode_dense_binary(&bin[..10]).is_err());
        assert!(decode_dense_binary(&bin[..20]).is_err());
        bin[4] = 9;
        assert!(matches!(
            decode_dense_binary(&bin),
            Err(FormatError::UnsupportedVersion { .. })
        ));
    }

    #[test]
    fn dense_csv_rejects_disorder() {
        let text = "i1,probability\n1,0.5\n0,0.5\n";
        assert!(matches!(
            decode_dense_csv(text.as_bytes()),
            Err(FormatError::Parse { .. })
        ));
        let text = "i1,probability\n0,0.5\n1,abc\n";
        match decode_dense_csv(text.as_bytes()) {
            Err(FormatError::Parse { line, field, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(field, "probability");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn files_round_trip_through_read_any() {
        let dir = tempfile::tempdir().unwrap();
        let f = worked_example(&[2.5, 3.2]);
        let path = dir.path().join("f.json");
        write_factored(&f, &path).unwrap();
        assert_eq!(read_factored(&path).unwrap(), f);
        assert_eq!(read_any(&path).unwrap(), AnyArtifact::Factored(f.clone()));

        let t = materialize(&f, DEFAULT_MATERIALIZATION_CAP).unwrap();
        for (name, format) in [
            ("t.csv", DenseFormat::IndexedCsv),
            ("t.bin", DenseFormat::FlatBinary),
        ] {
            let p = dir.path().join(name);
            write_dense(&t, format, &p).unwrap();
            assert_eq!(read_dense(&p).unwrap(), t);
            assert_eq!(read_any(&p).unwrap(), AnyArtifact::Dense(t.clone()));
        }

        let missing = dir.path().join("nope.json");
        match read_vector(&missing) {
            Err(FormatError::Io { path, .. }) => assert_eq!(path, missing),
            other => panic!("unexpected {other:?}"),
        }
    }
}
