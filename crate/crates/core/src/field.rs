//! Right-hand sides `F(θ, u)` over the torus base.
//!
//! For an ODE cocycle `F` is the time derivative; for a difference cocycle it
//! is the next state. The realized nonautonomous equation is
//! `f(t, u) = F(σ(t, θ0), u)`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub trait VectorField: Send + Sync + fmt::Debug {
    /// Writes `F(theta, u)` into `out` (same length as `u`).
    fn eval(&self, theta: &[f64], u: &[f64], out: &mut [f64]);
}

/// Closure-backed field, mostly for tests and experiments.
pub struct FnField<F> {
    name: &'static str,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(name: &'static str, f: F) -> Self {
        FnField { name, f }
    }
}

impl<F> fmt::Debug for FnField<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnField({})", self.name)
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync,
{
    fn eval(&self, theta: &[f64], u: &[f64], out: &mut [f64]) {
        (self.f)(theta, u, out)
    }
}

/// `A u + c + B cos(2πθ) + S sin(2πθ)`, with `A` d×d and `B`, `S` d×m, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineField {
    pub dim: usize,
    pub base_dim: usize,
    pub matrix: Vec<f64>,
    pub offset: Vec<f64>,
    pub cos_amp: Vec<f64>,
    pub sin_amp: Vec<f64>,
}

impl AffineField {
    pub fn new(dim: usize, base_dim: usize, matrix: Vec<f64>) -> Self {
        assert_eq!(matrix.len(), dim * dim);
        AffineField {
            dim,
            base_dim,
            matrix,
            offset: vec![0.0; dim],
            cos_amp: vec![0.0; dim * base_dim],
            sin_amp: vec![0.0; dim * base_dim],
        }
    }

    pub fn with_offset(mut self, offset: Vec<f64>) -> Self {
        assert_eq!(offset.len(), self.dim);
        self.offset = offset;
        self
    }

    pub fn with_cos(mut self, amp: Vec<f64>) -> Self {
        assert_eq!(amp.len(), self.dim * self.base_dim);
        self.cos_amp = amp;
        self
    }

    pub fn with_sin(mut self, amp: Vec<f64>) -> Self {
        assert_eq!(amp.len(), self.dim * self.base_dim);
        self.sin_amp = amp;
        self
    }
}

impl VectorField for AffineField {
    fn eval(&self, theta: &[f64], u: &[f64], out: &mut [f64]) {
        let (d, m) = (self.dim, self.base_dim);
        for i in 0..d {
            let row = &self.matrix[i * d..(i + 1) * d];
            let mut acc = self.offset[i];
            for j in 0..d {
                acc += row[j] * u[j];
            }
            for k in 0..m {
                let (b, s) = (self.cos_amp[i * m + k], self.sin_amp[i * m + k]);
                if b != 0.0 {
                    acc += b * (TAU * theta[k]).cos();
                }
                if s != 0.0 {
                    acc += s * (TAU * theta[k]).sin();
                }
            }
            out[i] = acc;
        }
    }
}

/// Componentwise `-u_i³ + c_i + Σ_k b_ik cos(2πθ_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicDampedField {
    pub base_dim: usize,
    pub offset: Vec<f64>,
    pub cos_amp: Vec<f64>,
}

impl VectorField for CubicDampedField {
    fn eval(&self, theta: &[f64], u: &[f64], out: &mut [f64]) {
        let m = self.base_dim;
        for (i, o) in out.iter_mut().enumerate() {
            let forcing: f64 = (0..m).map(|k| self.cos_amp[i * m + k] * (TAU * theta[k]).cos()).sum();
            *o = -u[i] * u[i] * u[i] + self.offset[i] + forcing;
        }
    }
}

/// Componentwise map `u_i ↦ clamp(u_i³, -clip, clip)`: non-decreasing, with
/// stable fixed points at `±clip` and `0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClippedCubicMap {
    pub clip: f64,
}

impl VectorField for ClippedCubicMap {
    fn eval(&self, _theta: &[f64], u: &[f64], out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(u) {
            *o = (x * x * x).clamp(-self.clip, self.clip);
        }
    }
}

/// Keys accepted in scenario configs.
pub const BUILTIN_KEYS: &[&str] = &["affine", "cubic_damped", "clipped_cubic"];

/// Instantiates a registered field from its key and parameter map.
///
/// Parameter names are 1-based: `a_i_j` (matrix, all required for `affine`),
/// `c_i` (offset), `b_i_k` / `s_i_k` (cosine / sine amplitude of base
/// coordinate `k` in component `i`), `clip`.
pub fn build_field(
    key: &str,
    dim: usize,
    base_dim: usize,
    params: &BTreeMap<String, f64>,
) -> Result<Arc<dyn VectorField>> {
    let mut reader = ParamReader::new(params);
    let field: Arc<dyn VectorField> = match key {
        "affine" => {
            let mut matrix = vec![0.0; dim * dim];
            for i in 0..dim {
                for j in 0..dim {
                    matrix[i * dim + j] = reader.required(&format!("a_{}_{}", i + 1, j + 1))?;
                }
            }
            let offset = (0..dim).map(|i| reader.optional(&format!("c_{}", i + 1))).collect();
            let cos = reader.amplitudes("b", dim, base_dim);
            let sin = reader.amplitudes("s", dim, base_dim);
            Arc::new(AffineField::new(dim, base_dim, matrix).with_offset(offset).with_cos(cos).with_sin(sin))
        }
        "cubic_damped" => {
            let offset = (0..dim).map(|i| reader.optional(&format!("c_{}", i + 1))).collect();
            let cos_amp = reader.amplitudes("b", dim, base_dim);
            Arc::new(CubicDampedField { base_dim, offset, cos_amp })
        }
        "clipped_cubic" => {
            let clip = reader.required("clip")?;
            if !(clip > 0.0) {
                return Err(Error::Config("clip must be positive".into()));
            }
            Arc::new(ClippedCubicMap { clip })
        }
        other => {
            return Err(Error::Config(format!(
                "unknown field key `{other}` (registered: {})",
                BUILTIN_KEYS.join(", ")
            )))
        }
    };
    reader.finish(key)?;
    Ok(field)
}

struct ParamReader<'a> {
    params: &'a BTreeMap<String, f64>,
    used: Vec<&'a str>,
}

impl<'a> ParamReader<'a> {
    fn new(params: &'a BTreeMap<String, f64>) -> Self {
        ParamReader { params, used: Vec::new() }
    }

    fn required(&mut self, name: &str) -> Result<f64> {
        match self.params.get_key_value(name) {
            Some((k, &v)) if v.is_finite() => {
                self.used.push(k.as_str());
                Ok(v)
            }
            Some(_) => Err(Error::Config(format!("parameter `{name}` must be finite"))),
            None => Err(Error::Config(format!("missing parameter `{name}`"))),
        }
    }

    fn optional(&mut self, name: &str) -> f64 {
        self.required(name).unwrap_or(0.0)
    }

    fn amplitudes(&mut self, prefix: &str, dim: usize, base_dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim * base_dim];
        for i in 0..dim {
            for k in 0..base_dim {
                out[i * base_dim + k] = self.optional(&format!("{prefix}_{}_{}", i + 1, k + 1));
            }
        }
        out
    }

    fn finish(self, key: &str) -> Result<()> {
        let unknown: Vec<&str> = self
            .params
            .keys()
            .map(String::as_str)
            .filter(|k| !self.used.contains(k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown parameters for `{key}`: {}", unknown.join(", "))))
        }
    }
}
