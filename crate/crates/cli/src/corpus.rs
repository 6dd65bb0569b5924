//! Named example systems and maps.

use crate::error::{CliError, Result};
use crate::specfile::{self, parse_matrix_list, raw_line, square_side, RawMatrix, SpecFile};
use nclab::algebra::CcpMapSpec;
use nclab::linalg::{diag_real, unit, CMatrix};
use nclab::system::project_to_system;
use serde_json::{Map, Value};
use std::fmt;
use std::str::FromStr;

/// A linear map between two spec-file systems, given by the images of the
/// source basis as target-ambient matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MapFile {
    pub name: String,
    pub source: SpecFile,
    pub target: SpecFile,
    pub images: Vec<RawMatrix>,
}

impl MapFile {
    pub fn build(&self) -> Result<CcpMapSpec> {
        let s = self.source.build()?;
        let t = self.target.build()?;
        if self.images.len() != s.dim() {
            return Err(CliError::schema("images", format!("expected {} images, found {}", s.dim(), self.images.len())));
        }
        let d = t.ambient_dim();
        let mut values = Vec::with_capacity(self.images.len());
        for (k, raw) in self.images.iter().enumerate() {
            let m = specfile::matrix_from_raw(d, raw);
            let (e, residual) = project_to_system(&t, &m, 1)?;
            if residual > t.tolerances().dedup_tol * m.norm().max(1.0) {
                return Err(CliError::schema(format!("images[{k}]"), format!("image leaves the target (residual {residual:.3e})")));
            }
            values.push(e);
        }
        Ok(CcpMapSpec::new(&s, &t, values)?)
    }

    pub fn from_value(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| CliError::schema("$", "expected an object"))?;
        for key in obj.keys() {
            if !["name", "source", "target", "images"].contains(&key.as_str()) {
                return Err(CliError::schema(key.as_str(), "unknown field"));
            }
        }
        let name = obj
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| CliError::schema("name", "expected a string"))?
            .to_string();
        let source = SpecFile::from_value(obj.get("source").ok_or_else(|| CliError::schema("$", "missing field `source`"))?, "source")?;
        let target = SpecFile::from_value(obj.get("target").ok_or_else(|| CliError::schema("$", "missing field `target`"))?, "target")?;
        let images_v = obj
            .get("images")
            .and_then(Value::as_array)
            .ok_or_else(|| CliError::schema("images", "expected an array of matrices"))?;
        let d = target.ambient_dim;
        let mut images = Vec::with_capacity(images_v.len());
        for (k, m) in images_v.iter().enumerate() {
            let path = format!("images[{k}]");
            let raw = parse_matrix_list(m, &path)?;
            if raw.len() != d * d {
                return Err(CliError::schema(path, format!("expected {} entries, found {}", d * d, raw.len())));
            }
            images.push(raw);
        }
        Ok(Self { name, source, target, images })
    }

    pub fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("name".into(), Value::from(self.name.clone()));
        m.insert("source".into(), self.source.to_value());
        m.insert("target".into(), self.target.to_value());
        m.insert("images".into(), serde_json::to_value(&self.images).expect("finite entries"));
        Value::Object(m)
    }

    pub fn to_canonical(&self) -> String {
        let indent = |s: String| s.trim_end().replace('\n', "\n  ");
        let mut out = String::from("{\n");
        out += &format!("  \"name\": {},\n", Value::from(self.name.clone()));
        out += &format!("  \"source\": {},\n", indent(self.source.to_canonical()));
        out += &format!("  \"target\": {},\n", indent(self.target.to_canonical()));
        out += "  \"images\": [\n";
        for (k, b) in self.images.iter().enumerate() {
            let sep = if k + 1 < self.images.len() { "," } else { "" };
            out += &format!("    {}{sep}\n", raw_line(b));
        }
        out += "  ]\n}\n";
        out
    }

    pub fn hash(&self) -> String {
        specfile::sha256_hex(self.to_canonical().as_bytes())
    }
}

/// What a corpus entry or input file provides.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Spec(SpecFile),
    Map(MapFile),
}

impl Input {
    pub fn to_canonical(&self) -> String {
        match self {
            Input::Spec(s) => s.to_canonical(),
            Input::Map(m) => m.to_canonical(),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Input::Spec(s) => &s.name,
            Input::Map(m) => &m.name,
        }
    }

    /// Parse a spec file or a map file (recognized by its `source` key).
    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| CliError::schema("$", e.to_string()))?;
        if v.get("source").is_some() {
            Ok(Input::Map(MapFile::from_value(&v)?))
        } else {
            Ok(Input::Spec(SpecFile::from_value(&v, "")?))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorpusId {
    FullMatrix(usize),
    OffDiagonal(usize),
    /// `points` equally spaced grid points from `a` to `b`.
    DiagonalInterval { points: usize, a: f64, b: f64 },
    RestrictionPair,
    CoproductIntervalPair,
    QuotientExample,
}

impl fmt::Display for CorpusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusId::FullMatrix(d) => write!(f, "full_matrix({d})"),
            CorpusId::OffDiagonal(d) => write!(f, "off_diagonal({d})"),
            CorpusId::DiagonalInterval { points, a, b } => write!(f, "diagonal_interval({points},{a},{b})"),
            CorpusId::RestrictionPair => f.write_str("restriction_pair"),
            CorpusId::CoproductIntervalPair => f.write_str("coproduct_interval_pair"),
            CorpusId::QuotientExample => f.write_str("quotient_example"),
        }
    }
}

impl FromStr for CorpusId {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || CliError::UnknownCorpus(s.to_string());
        let s = s.trim();
        let (head, args) = match s.find('(') {
            Some(i) if s.ends_with(')') => (&s[..i], s[i + 1..s.len() - 1].split(',').map(str::trim).collect::<Vec<_>>()),
            Some(_) => return Err(bad()),
            None => (s, Vec::new()),
        };
        let dim = |args: &[&str]| -> Result<usize> {
            match args {
                [d] => d.parse::<usize>().ok().filter(|&d| (1..=8).contains(&d)).ok_or_else(bad),
                _ => Err(bad()),
            }
        };
        match head {
            "full_matrix" => Ok(CorpusId::FullMatrix(dim(&args)?)),
            "off_diagonal" => Ok(CorpusId::OffDiagonal(dim(&args)?).checked().ok_or_else(bad)?),
            "diagonal_interval" => match args.as_slice() {
                [p, a, b] => {
                    let points = p.parse::<usize>().ok().filter(|&p| (2..=32).contains(&p)).ok_or_else(bad)?;
                    let a = a.parse::<f64>().map_err(|_| bad())?;
                    let b = b.parse::<f64>().map_err(|_| bad())?;
                    if !(a < b) || !a.is_finite() || !b.is_finite() {
                        return Err(bad());
                    }
                    Ok(CorpusId::DiagonalInterval { points, a, b })
                }
                _ => Err(bad()),
            },
            "restriction_pair" if args.is_empty() => Ok(CorpusId::RestrictionPair),
            "coproduct_interval_pair" if args.is_empty() => Ok(CorpusId::CoproductIntervalPair),
            "quotient_example" if args.is_empty() => Ok(CorpusId::QuotientExample),
            _ => Err(bad()),
        }
    }
}

impl CorpusId {
    fn checked(self) -> Option<Self> {
        match self {
            CorpusId::OffDiagonal(d) if d < 2 => None,
            other => Some(other),
        }
    }

    /// The default parameterization of every builder.
    pub fn all() -> Vec<CorpusId> {
        vec![
            CorpusId::FullMatrix(2),
            CorpusId::OffDiagonal(2),
            CorpusId::DiagonalInterval { points: 3, a: 0.0, b: 1.0 },
            CorpusId::RestrictionPair,
            CorpusId::CoproductIntervalPair,
            CorpusId::QuotientExample,
        ]
    }

    pub fn description(&self) -> &'static str {
        match self {
            CorpusId::FullMatrix(_) => "all of M_d",
            CorpusId::OffDiagonal(_) => "off-diagonal matrices; positive cone {0}, not positively generated",
            CorpusId::DiagonalInterval { .. } => "affine functions on a grid of [a, b] vanishing at 0, as diagonal matrices",
            CorpusId::RestrictionPair => "restriction A([-1,1],0) -> A([0,1],0); a quotient map that is not onto the positives",
            CorpusId::CoproductIntervalPair => "two copies of A([0,1],0) carrying the coordinate function a",
            CorpusId::QuotientExample => "D_2 -> C, diag(a, b) -> (a + b)/2",
        }
    }

    pub fn build(&self) -> Vec<Input> {
        match *self {
            CorpusId::FullMatrix(d) => vec![Input::Spec(full_matrix(d))],
            CorpusId::OffDiagonal(d) => vec![Input::Spec(off_diagonal(d))],
            CorpusId::DiagonalInterval { points, a, b } => vec![Input::Spec(diagonal_interval(points, a, b))],
            CorpusId::RestrictionPair => vec![Input::Map(restriction_pair())],
            CorpusId::CoproductIntervalPair => {
                let (s, t) = coproduct_interval_pair();
                vec![Input::Spec(s), Input::Spec(t)]
            }
            CorpusId::QuotientExample => vec![Input::Map(quotient_example())],
        }
    }
}

/// `M_d` with the matrix units `E_ij` in row-major order.
pub fn full_matrix(d: usize) -> SpecFile {
    let mats: Vec<CMatrix> = (0..d).flat_map(|i| (0..d).map(move |j| unit(d, i, j))).collect();
    SpecFile::from_matrices(&format!("full_matrix({d})"), &mats).with_tags(&["unital"])
}

/// `span{E_ij : i ≠ j}`.
pub fn off_diagonal(d: usize) -> SpecFile {
    let mats: Vec<CMatrix> = (0..d).flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| unit(d, i, j))).collect();
    SpecFile::from_matrices(&format!("off_diagonal({d})"), &mats).with_tags(&["trivial_cone"])
}

pub fn grid(points: usize, a: f64, b: f64) -> Vec<f64> {
    let n = points - 1;
    (0..points)
        .map(|i| if i == n { b } else { a + (b - a) * i as f64 / n as f64 })
        .collect()
}

/// `A([a, b], 0)` on a grid: `span{diag(t_1, …, t_p)}`.
pub fn diagonal_interval(points: usize, a: f64, b: f64) -> SpecFile {
    let t = grid(points, a, b);
    SpecFile::from_matrices(&format!("diagonal_interval({points},{a},{b})"), &[diag_real(&t)]).with_tags(&["diagonal"])
}

/// Restriction of the coordinate function from the grid of `[-1, 1]` to
/// the grid points in `[0, 1]`.
pub fn restriction_pair() -> MapFile {
    let source = diagonal_interval(5, -1.0, 1.0);
    let target = diagonal_interval(3, 0.0, 1.0);
    let tail: Vec<f64> = grid(5, -1.0, 1.0)[2..].to_vec();
    MapFile {
        name: "restriction_pair".into(),
        source,
        target,
        images: vec![specfile::raw_from_matrix(&diag_real(&tail))],
    }
}

pub fn coproduct_interval_pair() -> (SpecFile, SpecFile) {
    let s = diagonal_interval(3, 0.0, 1.0);
    (s.clone(), s)
}

/// `D_2 → ℂ`, `diag(a, b) ↦ (a + b)/2`.
pub fn quotient_example() -> MapFile {
    let source = SpecFile::from_matrices("diagonal(2)", &[unit(2, 0, 0), unit(2, 1, 1)]).with_tags(&["diagonal", "unital"]);
    let target = full_matrix(1);
    MapFile { name: "quotient_example".into(), source, target, images: vec![vec![[0.5, 0.0]], vec![[0.5, 0.0]]] }
}

/// Resolve `corpus:<id>` or a path to a spec or map file.
pub fn resolve(arg: &str) -> Result<Vec<Input>> {
    if let Some(id) = arg.strip_prefix("corpus:") {
        return Ok(id.parse::<CorpusId>()?.build());
    }
    let path = std::path::Path::new(arg);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(vec![Input::from_json(&text)?])
}

/// A flat matrix argument, `[[re, im], ...]` row-major.
pub fn parse_flat_matrix(text: &str, what: &str) -> Result<CMatrix> {
    let v: Value = serde_json::from_str(text).map_err(|e| CliError::InvalidArgument(format!("{what}: {e}")))?;
    let raw = parse_matrix_list(&v, what)?;
    let n = square_side(raw.len()).ok_or_else(|| CliError::schema(what, format!("{} entries do not form a square matrix", raw.len())))?;
    Ok(specfile::matrix_from_raw(n, &raw))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_parse_and_print() {
        for id in CorpusId::all() {
            assert_eq!(id.to_string().parse::<CorpusId>().unwrap(), id);
        }
        assert!("off_diagonal(1)".parse::<CorpusId>().is_err());
        assert!("nonsense".parse::<CorpusId>().is_err());
        assert_eq!(
            "diagonal_interval(5, -1, 1)".parse::<CorpusId>().unwrap(),
            CorpusId::DiagonalInterval { points: 5, a: -1.0, b: 1.0 }
        );
    }

    #[test]
    fn every_entry_builds() {
        for id in CorpusId::all() {
            for input in id.build() {
                match input {
                    Input::Spec(s) => {
                        s.build().unwrap();
                    }
                    Input::Map(m) => {
                        m.build().unwrap();
                    }
                }
            }
        }
    }

    #[test]
    fn grid_hits_endpoints() {
        assert_eq!(grid(5, -1.0, 1.0), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(grid(3, 0.0, 1.0), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn map_files_round_trip() {
        for m in [restriction_pair(), quotient_example()] {
            let text = m.to_canonical();
            match Input::from_json(&text).unwrap() {
                Input::Map(back) => {
                    assert_eq!(back, m);
                    assert_eq!(back.to_canonical(), text);
                }
                other => panic!("unexpected {other:?}"),
            }
        }
    }
}
