//! On-disk description of potentials.
//!
//! ```json
//! {"domain_end": 6.28, "pieces": [
//!   {"a": 0, "b": 3.14, "kind": "polynomial", "params": [0, 0, 1, 0]},
//!   {"a": 3.14, "b": 6.28, "kind": "step", "params": [0, 2, 4, 3.14, 3.14]}]}
//! ```
//!
//! * `polynomial`: `[re c0, im c0, re c1, im c1, ...]`;
//! * `step`: `[re amp, im amp, n]` or `[re amp, im amp, n, origin, length]`
//!   (the short form uses the piece itself as the period);
//! * `scaled`: `[re scale, im scale, shift]` with a nested `base`.
//!
//! The named form is `{"name": "linear", "params": [], "domain_end": 30}`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{named_potential, Piece, PieceKind, Potential};
use crate::scalar::{lit, to_f64};
use crate::{Error, Real, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialFile {
    Named {
        name: String,
        #[serde(default)]
        params: Vec<f64>,
        #[serde(default)]
        domain_end: Option<f64>,
    },
    Pieces {
        domain_end: f64,
        pieces: Vec<PieceFile>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceFile {
    pub a: f64,
    pub b: f64,
    #[serde(flatten)]
    pub kind: KindFile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KindFile {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Box<KindFile>>,
}

impl KindFile {
    fn to_kind<T: Real>(&self, a: f64, b: f64) -> Result<PieceKind<T>> {
        let p = &self.params;
        let c = |re: f64, im: f64| Complex::new(lit::<T>(re), lit::<T>(im));
        match self.kind.as_str() {
            "polynomial" | "constant" => {
                if p.is_empty() || !p.len().is_multiple_of(2) {
                    return Err(Error::Format("polynomial params must be (re, im) pairs".into()));
                }
                Ok(PieceKind::Polynomial(p.chunks(2).map(|ri| c(ri[0], ri[1])).collect()))
            }
            "step" => {
                let (origin, length) = match p.len() {
                    3 => (a, b - a),
                    5 => (p[3], p[4]),
                    _ => return Err(Error::Format("step params are [re, im, n] or [re, im, n, origin, length]".into())),
                };
                if !(p[2] >= 1.0 && p[2].fract() == 0.0 && p[2] <= u32::MAX as f64) {
                    return Err(Error::Format(format!("step order must be a positive integer, got {}", p[2])));
                }
                Ok(PieceKind::Step { amplitude: c(p[0], p[1]), n: p[2] as u32, origin: lit(origin), length: lit(length) })
            }
            "scaled" => {
                if p.len() != 3 {
                    return Err(Error::Format("scaled params are [re scale, im scale, shift]".into()));
                }
                let base = self.base.as_ref().ok_or_else(|| Error::Format("scaled piece needs a base".into()))?;
                Ok(PieceKind::Scaled {
                    scale: c(p[0], p[1]),
                    shift: lit(p[2]),
                    base: Box::new(base.to_kind(a - p[2], b - p[2])?),
                })
            }
            other => Err(Error::Format(format!("unknown piece kind `{other}`"))),
        }
    }

    fn from_kind<T: Real>(kind: &PieceKind<T>) -> Self {
        match kind {
            PieceKind::Polynomial(cs) => KindFile {
                kind: "polynomial".into(),
                params: cs.iter().flat_map(|z| [to_f64(z.re), to_f64(z.im)]).collect(),
                base: None,
            },
            PieceKind::Step { amplitude, n, origin, length } => KindFile {
                kind: "step".into(),
                params: vec![to_f64(amplitude.re), to_f64(amplitude.im), *n as f64, to_f64(*origin), to_f64(*length)],
                base: None,
            },
            PieceKind::Scaled { scale, shift, base } => KindFile {
                kind: "scaled".into(),
                params: vec![to_f64(scale.re), to_f64(scale.im), to_f64(*shift)],
                base: Some(Box::new(Self::from_kind(base))),
            },
        }
    }
}

impl PotentialFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("potential JSON: {e}")))
    }

    pub fn build<T: Real>(&self) -> Result<Potential<T>> {
        match self {
            PotentialFile::Named { name, params, domain_end } => named_potential(name, params, domain_end.map(lit)),
            PotentialFile::Pieces { domain_end, pieces } => {
                let ps = pieces
                    .iter()
                    .map(|p| Ok(Piece { a: lit(p.a), b: lit(p.b), kind: p.kind.to_kind(p.a, p.b)? }))
                    .collect::<Result<Vec<_>>>()?;
                Potential::new(ps, lit(*domain_end))
            }
        }
    }
}

impl<T: Real> Potential<T> {
    /// Piecewise JSON description (named potentials are expanded).
    pub fn to_file(&self) -> PotentialFile {
        PotentialFile::Pieces {
            domain_end: to_f64(self.domain_end),
            pieces: self
                .pieces
                .iter()
                .map(|p| PieceFile { a: to_f64(p.a), b: to_f64(p.b), kind: KindFile::from_kind(&p.kind) })
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        PotentialFile::parse(text)?.build()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("potential files always serialize")
    }
}
