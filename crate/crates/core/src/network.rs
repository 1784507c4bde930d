//! Shallow networks `x -> sum_j U_j act(V_j + W_j . x)` over exact
//! rationals or floats, plus their JSON form.

use num_traits::{Signed, Zero};
use serde_json::{json, Value};

use crate::activation::{relu, rho, rho_exact, sigma, sigma_exact};
use crate::error::{Error, Result};
use crate::poly::parse_scalar;
use crate::rational::{self, ExactRational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Rho,
    Sigma,
    Relu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Rho => "rho",
            Activation::Sigma => "sigma",
            Activation::Relu => "relu",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rho" => Ok(Activation::Rho),
            "sigma" => Ok(Activation::Sigma),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::Parse(format!("unknown activation {other:?}"))),
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Rho => rho(x),
            Activation::Sigma => sigma(x),
            Activation::Relu => relu(x),
        }
    }

    pub fn apply_exact(self, x: &ExactRational) -> ExactRational {
        match self {
            Activation::Rho => rho_exact(x),
            Activation::Sigma => sigma_exact(x),
            Activation::Relu => {
                if !x.is_negative() {
                    x.clone()
                } else {
                    ExactRational::zero()
                }
            }
        }
    }
}

/// Output weights `u`, biases `v`, and a `P x d` weight matrix `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShallowNetwork<T> {
    activation: Activation,
    dim: usize,
    u: Vec<T>,
    v: Vec<T>,
    w: Vec<Vec<T>>,
}

impl<T> ShallowNetwork<T> {
    pub fn new(activation: Activation, u: Vec<T>, v: Vec<T>, w: Vec<Vec<T>>) -> Result<Self> {
        let p = u.len();
        if p == 0 {
            return Err(Error::invalid("network width must be positive"));
        }
        if v.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: v.len() });
        }
        if w.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: w.len() });
        }
        let dim = w[0].len();
        if dim == 0 {
            return Err(Error::invalid("input dimension must be positive"));
        }
        if let Some(row) = w.iter().find(|row| row.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
        }
        Ok(ShallowNetwork { activation, dim, u, v, w })
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn width(&self) -> usize {
        self.u.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn u(&self) -> &[T] {
        &self.u
    }

    pub fn v(&self) -> &[T] {
        &self.v
    }

    pub fn w(&self) -> &[Vec<T>] {
        &self.w
    }

    pub fn into_parts(self) -> (Activation, Vec<T>, Vec<T>, Vec<Vec<T>>) {
        (self.activation, self.u, self.v, self.w)
    }

    /// Iterator over `(u_j, v_j, w_j)` per hidden unit.
    pub fn units(&self) -> impl Iterator<Item = (&T, &T, &[T])> {
        self.u
            .iter()
            .zip(&self.v)
            .zip(&self.w)
            .map(|((u, v), w)| (u, v, w.as_slice()))
    }

    fn check_point(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got });
        }
        Ok(())
    }
}

impl ShallowNetwork<f64> {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x.len())?;
        Ok(self
            .units()
            .map(|(u, v, w)| {
                let z = v + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                u * self.activation.apply(z)
            })
            .sum())
    }

    /// Univariate evaluation; panics unless `dim() == 1`.
    pub fn eval1(&self, x: f64) -> f64 {
        assert_eq!(self.dim, 1, "eval1 needs a univariate network");
        self.units()
            .map(|(u, v, w)| u * self.activation.apply(v + w[0] * x))
            .sum()
    }

    /// Hidden-layer outputs `act(V + W x)` for a univariate input.
    pub fn hidden1(&self, x: f64) -> Vec<f64> {
        assert_eq!(self.dim, 1, "hidden1 needs a univariate network");
        self.v
            .iter()
            .zip(&self.w)
            .map(|(v, w)| self.activation.apply(v + w[0] * x))
            .collect()
    }

    /// Largest absolute weight or bias.
    pub fn max_abs_parameter(&self) -> f64 {
        self.u
            .iter()
            .chain(&self.v)
            .chain(self.w.iter().flatten())
            .fold(0.0_f64, |m, p| m.max(p.abs()))
    }

    pub fn to_json(&self) -> Value {
        json!({
            "activation": self.activation.name(),
            "U": self.u,
            "V": self.v,
            "W": self.w,
            "mode": "float",
        })
    }
}

impl ShallowNetwork<ExactRational> {
    pub fn eval_exact(&self, x: &[ExactRational]) -> Result<ExactRational> {
        self.check_point(x.len())?;
        let mut acc = ExactRational::zero();
        for (u, v, w) in self.units() {
            if u.is_zero() {
                continue;
            }
            let mut z = v.clone();
            for (a, b) in w.iter().zip(x) {
                z += a * b;
            }
            acc += u * self.activation.apply_exact(&z);
        }
        Ok(acc)
    }

    /// Lossy float copy; output weights that compensate tiny node powers
    /// can be very large, see [`ShallowNetwork::max_abs_output_weight`].
    pub fn to_f64(&self) -> ShallowNetwork<f64> {
        let conv = |xs: &[ExactRational]| xs.iter().map(rational::to_f64).collect::<Vec<f64>>();
        ShallowNetwork {
            activation: self.activation,
            dim: self.dim,
            u: conv(&self.u),
            v: conv(&self.v),
            w: self.w.iter().map(|row| conv(row)).collect(),
        }
    }

    pub fn max_abs_output_weight(&self) -> f64 {
        rational::to_f64(&rational::max_abs(&self.u))
    }

    pub fn to_json(&self) -> Value {
        let conv = |xs: &[ExactRational]| {
            xs.iter()
                .map(|q| Value::String(rational::format_rational(q)))
                .collect::<Vec<Value>>()
        };
        json!({
            "activation": self.activation.name(),
            "U": conv(&self.u),
            "V": conv(&self.v),
            "W": self.w.iter().map(|row| conv(row)).collect::<Vec<_>>(),
            "mode": "exact",
        })
    }
}

/// A network read from JSON, in whichever mode the file declares.
#[derive(Debug, Clone, PartialEq)]
pub enum NetworkFile {
    Exact(ShallowNetwork<ExactRational>),
    Float(ShallowNetwork<f64>),
}

impl NetworkFile {
    /// Parses `{"activation", "U", "V", "W", "mode"}`; a missing `mode`
    /// means exact.
    pub fn from_json(v: &Value) -> Result<Self> {
        let field = |name: &str| {
            v.get(name)
                .ok_or_else(|| Error::Parse(format!("network JSON missing {name:?}")))
        };
        let activation = Activation::parse(
            field("activation")?
                .as_str()
                .ok_or_else(|| Error::Parse("activation must be a string".into()))?,
        )?;
        let mode = v.get("mode").and_then(Value::as_str).unwrap_or("exact");
        let vector = |name: &str| -> Result<Vec<Value>> {
            field(name)?
                .as_array()
                .cloned()
                .ok_or_else(|| Error::Parse(format!("{name} must be an array")))
        };
        let u = vector("U")?;
        let b = vector("V")?;
        let w = vector("W")?
            .into_iter()
            .map(|row| {
                row.as_array()
                    .cloned()
                    .ok_or_else(|| Error::Parse("W rows must be arrays".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        match mode {
            "exact" => {
                let conv = |xs: &[Value]| xs.iter().map(parse_scalar).collect::<Result<Vec<_>>>();
                Ok(NetworkFile::Exact(ShallowNetwork::new(
                    activation,
                    conv(&u)?,
                    conv(&b)?,
                    w.iter().map(|r| conv(r)).collect::<Result<_>>()?,
                )?))
            }
            "float" => {
                let conv = |xs: &[Value]| {
                    xs.iter()
                        .map(|x| match x {
                            Value::String(_) => parse_scalar(x).map(|q| rational::to_f64(&q)),
                            _ => x
                                .as_f64()
                                .ok_or_else(|| Error::Parse(format!("bad float entry {x}"))),
                        })
                        .collect::<Result<Vec<f64>>>()
                };
                Ok(NetworkFile::Float(ShallowNetwork::new(
                    activation,
                    conv(&u)?,
                    conv(&b)?,
                    w.iter().map(|r| conv(r)).collect::<Result<_>>()?,
                )?))
            }
            other => Err(Error::Parse(format!("unknown network mode {other:?}"))),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            NetworkFile::Exact(n) => n.to_json(),
            NetworkFile::Float(n) => n.to_json(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    #[test]
    fn shape_validation() {
        assert!(ShallowNetwork::<f64>::new(Activation::Rho, vec![], vec![], vec![]).is_err());
        assert!(ShallowNetwork::new(Activation::Rho, vec![1.0], vec![0.0, 1.0], vec![vec![1.0]]).is_err());
        assert!(ShallowNetwork::new(
            Activation::Rho,
            vec![1.0, 2.0],
            vec![0.0, 1.0],
            vec![vec![1.0], vec![1.0, 2.0]]
        )
        .is_err());
        let net = ShallowNetwork::new(Activation::Relu, vec![1.0], vec![0.0], vec![vec![1.0, 1.0]]).unwrap();
        assert_eq!((net.width(), net.dim()), (1, 2));
        assert!(net.eval(&[1.0]).is_err());
    }

    #[test]
    fn evaluation_matches_definition() {
        let net = ShallowNetwork::new(
            Activation::Relu,
            vec![2.0, -1.0],
            vec![-0.5, 0.25],
            vec![vec![1.0, 0.0], vec![0.0, 2.0]],
        )
        .unwrap();
        // 2 relu(x1 - 0.5) - relu(0.25 + 2 x2)
        assert_eq!(net.eval(&[1.0, 0.5]).unwrap(), 2.0 * 0.5 - 1.25);
        let exact = ShallowNetwork::new(
            Activation::Rho,
            vec![int(3)],
            vec![int(1)],
            vec![vec![rat(1, 2)]],
        )
        .unwrap();
        // 3 rho(1 + x/2) at x = 1: 3 ((1/2)^2 + 1)
        assert_eq!(exact.eval_exact(&[int(1)]).unwrap(), rat(15, 4));
        assert_eq!(exact.to_f64().eval(&[1.0]).unwrap(), 3.75);
    }

    #[test]
    fn json_round_trips() {
        let exact = ShallowNetwork::new(
            Activation::Sigma,
            vec![rat(-4, 3), rat(4, 3)],
            vec![int(1), int(0)],
            vec![vec![rat(1, 2)], vec![int(1)]],
        )
        .unwrap();
        let file = NetworkFile::Exact(exact.clone());
        let text = serde_json::to_string(&file.to_json()).unwrap();
        assert!(text.contains("\"-4/3\""));
        let back = NetworkFile::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, file);

        let float = NetworkFile::Float(exact.to_f64());
        let back = NetworkFile::from_json(&float.to_json()).unwrap();
        assert_eq!(back, float);

        let bad: Value = serde_json::from_str(r#"{"activation": "tanh", "U": [], "V": [], "W": []}"#).unwrap();
        assert!(NetworkFile::from_json(&bad).is_err());
    }
}
