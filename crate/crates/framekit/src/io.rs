//! Frame files: a JSON schema holding the field tag, ambient dimension and
//! the weighted basis list of a fusion frame.
//!
//! ```json
//! { "field": "real" | "complex", "d": 3,
//!   "members": [ { "weight": 1.0, "basis": [[...row...], ...] } ] }
//! ```
//!
//! Bases are stored row-major (`d` rows of `L` entries); complex entries are
//! `[re, im]` pairs. Input bases need not be orthonormal: the loader
//! orthonormalizes and warns when that changes the spanned column space
//! beyond 1e-8. The canonical writer emits sorted keys and a fixed float
//! format with 17 significant digits, so saving a loaded canonical file is
//! byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::field::{Complex64, FieldTag, FrameScalar};
use crate::frame::{FrameError, FusionFrame, Subspace};

/// Span change (between the least-squares projector of the raw columns and
/// the projector of the orthonormalized basis) above which the loader warns.
pub const SPAN_WARN_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// A frame over whichever field the file declared.
#[derive(Debug, Clone)]
pub enum AnyFrame {
    Real(FusionFrame<f64>),
    Complex(FusionFrame<Complex64>),
}

impl AnyFrame {
    pub fn field(&self) -> FieldTag {
        match self {
            AnyFrame::Real(_) => FieldTag::Real,
            AnyFrame::Complex(_) => FieldTag::Complex,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            AnyFrame::Real(f) => f.ambient_dim(),
            AnyFrame::Complex(f) => f.ambient_dim(),
        }
    }
}

/// A parsed frame plus any loader warnings.
#[derive(Debug)]
pub struct LoadedFrame {
    pub frame: AnyFrame,
    pub warnings: Vec<String>,
}

#[derive(Deserialize)]
struct FileSchema {
    field: FieldTag,
    d: usize,
    members: Vec<MemberSchema>,
}

#[derive(Deserialize)]
struct MemberSchema {
    weight: f64,
    basis: Vec<Vec<Value>>,
}

fn parse_real(entry: &Value) -> Result<f64, IoError> {
    entry
        .as_f64()
        .ok_or_else(|| IoError::Schema(format!("expected a number, got {entry}")))
}

fn parse_complex(entry: &Value) -> Result<Complex64, IoError> {
    let pair = entry
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| IoError::Schema(format!("expected an [re, im] pair, got {entry}")))?;
    Ok(Complex64::new(parse_real(&pair[0])?, parse_real(&pair[1])?))
}

fn build_members<T: FrameScalar>(
    schema: &FileSchema,
    parse: impl Fn(&Value) -> Result<T, IoError>,
    warnings: &mut Vec<String>,
) -> Result<FusionFrame<T>, IoError> {
    let mut members = Vec::with_capacity(schema.members.len());
    for (k, member) in schema.members.iter().enumerate() {
        if member.basis.len() != schema.d {
            return Err(IoError::Schema(format!(
                "member {k}: basis must have d = {} rows, got {}",
                schema.d,
                member.basis.len()
            )));
        }
        let cols = member.basis[0].len();
        if cols == 0 || member.basis.iter().any(|row| row.len() != cols) {
            return Err(IoError::Schema(format!(
                "member {k}: basis rows must be nonempty and of equal length"
            )));
        }
        let mut raw = DMatrix::<T>::zeros(schema.d, cols);
        for (i, row) in member.basis.iter().enumerate() {
            for (j, entry) in row.iter().enumerate() {
                raw[(i, j)] = parse(entry)?;
            }
        }
        // keep already-orthonormal input bit-for-bit so canonical files
        // round trip byte-identically
        let subspace = Subspace::from_orthonormal(raw.clone())
            .or_else(|_| Subspace::orthonormalize(&raw))?;
        let gram_inv = (raw.adjoint() * &raw).try_inverse().ok_or_else(|| {
            IoError::Schema(format!("member {k}: basis Gram matrix is singular"))
        })?;
        let ls_projector = &raw * gram_inv * raw.adjoint();
        let span_change = (ls_projector - subspace.projection()).norm();
        if span_change > SPAN_WARN_TOL {
            warnings.push(format!(
                "member {k}: re-orthonormalization moved the span by {span_change:.3e}"
            ));
        }
        members.push((subspace, member.weight));
    }
    Ok(FusionFrame::new(schema.d, members)?)
}

pub fn read_frame_str(text: &str) -> Result<LoadedFrame, IoError> {
    let schema: FileSchema = serde_json::from_str(text)?;
    let mut warnings = Vec::new();
    let frame = match schema.field {
        FieldTag::Real => AnyFrame::Real(build_members(&schema, parse_real, &mut warnings)?),
        FieldTag::Complex => {
            AnyFrame::Complex(build_members(&schema, parse_complex, &mut warnings)?)
        }
    };
    Ok(LoadedFrame { frame, warnings })
}

pub fn read_frame_path(path: impl AsRef<Path>) -> Result<LoadedFrame, IoError> {
    read_frame_str(&fs::read_to_string(path)?)
}

fn real_entry_value(x: f64) -> Value {
    Value::from(x)
}

fn complex_entry_value(z: Complex64) -> Value {
    Value::from(vec![Value::from(z.re), Value::from(z.im)])
}

fn frame_value_with<T: FrameScalar>(
    frame: &FusionFrame<T>,
    entry: impl Fn(T) -> Value,
) -> Value {
    let members: Vec<Value> = frame
        .members()
        .map(|(subspace, weight)| {
            let b = subspace.basis();
            let rows: Vec<Value> = (0..b.nrows())
                .map(|i| Value::from((0..b.ncols()).map(|j| entry(b[(i, j)])).collect::<Vec<_>>()))
                .collect();
            serde_json::json!({ "basis": rows, "weight": weight })
        })
        .collect();
    serde_json::json!({
        "d": frame.ambient_dim(),
        "field": T::FIELD,
        "members": members,
    })
}

/// The file-schema JSON value for a frame (shortest-round-trip floats).
pub fn frame_to_value(frame: &AnyFrame) -> Value {
    match frame {
        AnyFrame::Real(f) => frame_value_with(f, real_entry_value),
        AnyFrame::Complex(f) => frame_value_with(f, complex_entry_value),
    }
}

/// Serializes JSON with object keys sorted (the default map is ordered) and
/// every float printed as `{:.16e}`: 17 significant digits, enough to round
/// trip any f64, and independent of the shortest-representation algorithm.
pub fn to_canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out.push('\n');
    out
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                let _ = write!(out, "{:.16e}", n.as_f64().unwrap());
            }
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}:", Value::String(key.clone()));
                write_canonical(&map[key], out);
            }
            out.push('}');
        }
        other => {
            let _ = write!(out, "{other}");
        }
    }
}

/// Writes a frame in canonical form (sorted keys, 17-significant-digit
/// floats). Weights are serialized as floats even when integral.
pub fn write_frame_canonical<W: Write>(frame: &AnyFrame, mut writer: W) -> Result<(), IoError> {
    let mut value = frame_to_value(frame);
    force_weight_floats(&mut value);
    writer.write_all(to_canonical_json(&value).as_bytes())?;
    Ok(())
}

// serde_json stores 1.0 as an integer-valued number; canonical output must
// still format weights through the float path.
fn force_weight_floats(value: &mut Value) {
    if let Some(members) = value.get_mut("members").and_then(Value::as_array_mut) {
        for member in members {
            if let Some(w) = member.get_mut("weight") {
                if let Some(x) = w.as_f64() {
                    *w = Value::from(x);
                }
            }
        }
    }
}

pub fn write_frame_canonical_path(frame: &AnyFrame, path: impl AsRef<Path>) -> Result<(), IoError> {
    let mut bytes = Vec::new();
    write_frame_canonical(frame, &mut bytes)?;
    fs::write(path, bytes)?;
    Ok(())
}
