//! The JSON spec-file format.
//!
//! A spec file names a `*`-closed subspace of `M_d` by a list of basis
//! matrices, each a flat row-major list of `d²` complex entries written as
//! `[re, im]` pairs:
//!
//! ```json
//! {
//!   "name": "off_diagonal(2)",
//!   "ambient_dim": 2,
//!   "basis": [
//!     [[0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
//!     [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]
//!   ]
//! }
//! ```
//!
//! Optional keys are `tolerances` (any subset of the tolerance fields) and
//! `tags` (a list of strings). [`SpecFile::to_canonical`] is the one
//! serialization; parsing a canonical file and writing it back reproduces it
//! byte for byte.

use crate::error::{CliError, Result};
use nclab::linalg::CMatrix;
use nclab::{build_system, OperatorSystemSpec, ToleranceConfig};
use num_complex::Complex64;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const SPEC_SCHEMA_VERSION: &str = "nclab.spec/1";

/// Raw matrix: flat row-major `[re, im]` pairs.
pub type RawMatrix = Vec<[f64; 2]>;

#[derive(Debug, Clone, PartialEq)]
pub struct SpecFile {
    pub name: String,
    pub ambient_dim: usize,
    pub basis: Vec<RawMatrix>,
    pub tolerances: Option<ToleranceConfig>,
    pub tags: Vec<String>,
}

impl SpecFile {
    pub fn new(name: &str, ambient_dim: usize, basis: Vec<RawMatrix>) -> Self {
        Self { name: name.into(), ambient_dim, basis, tolerances: None, tags: Vec::new() }
    }

    pub fn from_matrices(name: &str, mats: &[CMatrix]) -> Self {
        let d = mats.first().map_or(0, |m| m.nrows());
        Self::new(name, d, mats.iter().map(raw_from_matrix).collect())
    }

    pub fn with_tags(mut self, tags: &[&str]) -> Self {
        self.tags = tags.iter().map(|t| t.to_string()).collect();
        self
    }

    pub fn matrices(&self) -> Vec<CMatrix> {
        self.basis.iter().map(|b| matrix_from_raw(self.ambient_dim, b)).collect()
    }

    pub fn tolerance_config(&self) -> ToleranceConfig {
        self.tolerances.clone().unwrap_or_default()
    }

    /// Validate through the core constructor.
    pub fn build(&self) -> Result<OperatorSystemSpec> {
        Ok(build_system(&self.name, self.matrices(), self.tolerance_config())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| CliError::schema("$", e.to_string()))?;
        Self::from_value(&v, "")
    }

    /// Schema validation with precise paths; `prefix` is prepended to every
    /// path (empty at the document root).
    pub fn from_value(v: &Value, prefix: &str) -> Result<Self> {
        let at = |p: &str| if prefix.is_empty() { p.to_string() } else { format!("{prefix}.{p}") };
        let root = if prefix.is_empty() { "$".to_string() } else { prefix.to_string() };
        let obj = v.as_object().ok_or_else(|| CliError::schema(&root, "expected an object"))?;
        for key in obj.keys() {
            if !["name", "ambient_dim", "basis", "tolerances", "tags"].contains(&key.as_str()) {
                return Err(CliError::schema(at(key), "unknown field"));
            }
        }
        let name = obj
            .get("name")
            .ok_or_else(|| CliError::schema(&root, "missing field `name`"))?
            .as_str()
            .ok_or_else(|| CliError::schema(at("name"), "expected a string"))?
            .to_string();
        let d = obj
            .get("ambient_dim")
            .ok_or_else(|| CliError::schema(&root, "missing field `ambient_dim`"))?
            .as_u64()
            .filter(|&d| d > 0)
            .ok_or_else(|| CliError::schema(at("ambient_dim"), "expected a positive integer"))? as usize;
        let basis_v = obj
            .get("basis")
            .ok_or_else(|| CliError::schema(&root, "missing field `basis`"))?
            .as_array()
            .ok_or_else(|| CliError::schema(at("basis"), "expected an array of matrices"))?;
        if basis_v.is_empty() {
            return Err(CliError::schema(at("basis"), "basis is empty"));
        }
        let mut basis = Vec::with_capacity(basis_v.len());
        for (k, m) in basis_v.iter().enumerate() {
            let path = at(&format!("basis[{k}]"));
            let entries = m.as_array().ok_or_else(|| CliError::schema(&path, "expected an array of [re, im] pairs"))?;
            if entries.len() != d * d {
                return Err(CliError::schema(
                    &path,
                    format!("expected {} entries for a square {d}x{d} matrix, found {}", d * d, entries.len()),
                ));
            }
            let mut raw = Vec::with_capacity(d * d);
            for (i, e) in entries.iter().enumerate() {
                raw.push(parse_pair(e, &format!("{path}[{i}]"))?);
            }
            basis.push(raw);
        }
        let tolerances = match obj.get("tolerances") {
            None => None,
            Some(t) => {
                let tol: ToleranceConfig = serde_json::from_value(t.clone())
                    .map_err(|e| CliError::schema(at("tolerances"), e.to_string()))?;
                Some(tol)
            }
        };
        let tags = match obj.get("tags") {
            None => Vec::new(),
            Some(t) => t
                .as_array()
                .ok_or_else(|| CliError::schema(at("tags"), "expected an array of strings"))?
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    s.as_str().map(String::from).ok_or_else(|| CliError::schema(at(&format!("tags[{i}]")), "expected a string"))
                })
                .collect::<Result<Vec<_>>>()?,
        };
        Ok(Self { name, ambient_dim: d, basis, tolerances, tags })
    }

    pub fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("name".into(), Value::from(self.name.clone()));
        m.insert("ambient_dim".into(), Value::from(self.ambient_dim));
        m.insert(
            "basis".into(),
            Value::Array(self.basis.iter().map(|b| serde_json::to_value(b).expect("finite entries")).collect()),
        );
        if let Some(t) = &self.tolerances {
            m.insert("tolerances".into(), serde_json::to_value(t).expect("tolerances serialize"));
        }
        if !self.tags.is_empty() {
            m.insert("tags".into(), Value::from(self.tags.clone()));
        }
        Value::Object(m)
    }

    /// Canonical text: fixed key order, one basis matrix per line, floats in
    /// shortest round-trip form, trailing newline.
    pub fn to_canonical(&self) -> String {
        let mut out = String::from("{\n");
        out += &format!("  \"name\": {},\n", json(&Value::from(self.name.clone())));
        out += &format!("  \"ambient_dim\": {},\n", self.ambient_dim);
        out += "  \"basis\": [\n";
        for (k, b) in self.basis.iter().enumerate() {
            let sep = if k + 1 < self.basis.len() { "," } else { "" };
            out += &format!("    {}{sep}\n", raw_line(b));
        }
        out += "  ]";
        if let Some(t) = &self.tolerances {
            out += &format!(",\n  \"tolerances\": {}", json(&serde_json::to_value(t).expect("tolerances serialize")));
        }
        if !self.tags.is_empty() {
            out += &format!(",\n  \"tags\": {}", json(&Value::from(self.tags.clone())));
        }
        out += "\n}\n";
        out
    }

    /// Hex SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_canonical().as_bytes())
    }
}

fn json(v: &Value) -> String {
    serde_json::to_string(v).expect("json value serializes")
}

pub(crate) fn raw_line(b: &[[f64; 2]]) -> String {
    let cells: Vec<String> = b.iter().map(|[re, im]| format!("[{}, {}]", json(&Value::from(*re)), json(&Value::from(*im)))).collect();
    format!("[{}]", cells.join(", "))
}

pub(crate) fn parse_pair(e: &Value, path: &str) -> Result<[f64; 2]> {
    let pair = e.as_array().filter(|p| p.len() == 2).ok_or_else(|| CliError::schema(path, "expected an [re, im] pair"))?;
    let re = pair[0].as_f64().ok_or_else(|| CliError::schema(format!("{path}[0]"), "expected a number"))?;
    let im = pair[1].as_f64().ok_or_else(|| CliError::schema(format!("{path}[1]"), "expected a number"))?;
    Ok([re, im])
}

pub fn parse_matrix_list(v: &Value, path: &str) -> Result<RawMatrix> {
    let entries = v.as_array().ok_or_else(|| CliError::schema(path, "expected an array of [re, im] pairs"))?;
    entries.iter().enumerate().map(|(i, e)| parse_pair(e, &format!("{path}[{i}]"))).collect()
}

pub fn raw_from_matrix(m: &CMatrix) -> RawMatrix {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            let z = m[(i, j)];
            out.push([z.re, z.im]);
        }
    }
    out
}

pub fn matrix_from_raw(d: usize, raw: &[[f64; 2]]) -> CMatrix {
    CMatrix::from_fn(d, d, |i, j| {
        let [re, im] = raw[i * d + j];
        Complex64::new(re, im)
    })
}

/// Side length of a flat square matrix, if the length is a perfect square.
pub fn square_side(len: usize) -> Option<usize> {
    let s = (len as f64).sqrt().round() as usize;
    (s * s == len).then_some(s)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Parse and validate spec-file text.
pub fn parse_spec(text: &str) -> Result<(SpecFile, OperatorSystemSpec)> {
    let file = SpecFile::from_json(text)?;
    let spec = file.build()?;
    Ok((file, spec))
}

pub fn load_spec(path: &Path) -> Result<(SpecFile, OperatorSystemSpec)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_spec(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const OFF_DIAGONAL: &str = r#"{
  "name": "off_diagonal(2)",
  "ambient_dim": 2,
  "basis": [
    [[0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
    [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]
  ]
}
"#;

    #[test]
    fn off_diagonal_parses_and_round_trips() {
        let (file, spec) = parse_spec(OFF_DIAGONAL).unwrap();
        assert_eq!(spec.dim(), 2);
        assert_eq!(file.to_canonical(), OFF_DIAGONAL);
    }

    #[test]
    fn non_square_basis_is_a_schema_error() {
        let text = r#"{"name": "bad", "ambient_dim": 2, "basis": [[[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]]}"#;
        match parse_spec(text) {
            Err(CliError::Schema { path, .. }) => assert_eq!(path, "basis[0]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn error_paths_point_at_the_entry() {
        let text = r#"{"name": "bad", "ambient_dim": 1, "basis": [[[1.0, "x"]]]}"#;
        match parse_spec(text) {
            Err(CliError::Schema { path, .. }) => assert_eq!(path, "basis[0][0][1]"),
            other => panic!("unexpected {other:?}"),
        }
        let text = r#"{"name": "bad", "ambient_dim": 1, "basis": [[[1.0, 0.0]]], "colour": 3}"#;
        assert!(matches!(parse_spec(text), Err(CliError::Schema { path, .. }) if path == "colour"));
    }

    #[test]
    fn tolerances_and_tags_survive() {
        let mut f = SpecFile::new("one", 1, vec![vec![[1.0, 0.0]]]).with_tags(&["scalar"]);
        f.tolerances = Some(ToleranceConfig { feas_tol: 1e-7, ..Default::default() });
        let text = f.to_canonical();
        let (g, _) = parse_spec(&text).unwrap();
        assert_eq!(g, f);
        assert_eq!(g.to_canonical(), text);
    }

    #[test]
    fn core_validation_surfaces() {
        let text = r#"{"name": "bad", "ambient_dim": 2, "basis": [[[0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]]}"#;
        assert!(matches!(parse_spec(text), Err(CliError::Core(nclab::Error::NotAdjointClosed { .. }))));
    }
}
