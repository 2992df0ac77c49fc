use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

/// The density nonlinearity `F` in `B = F(rho) b`, with `F~(x) = x F(x)`.
#[derive(Clone)]
pub enum NonlinearF {
    Sine { amplitude: f64 },
    Sigmoid { steepness: f64, center: f64 },
    Cosine,
    Constant(f64),
    Custom(CustomF),
}

/// A user-supplied smooth bounded `F`.
#[derive(Clone)]
pub struct CustomF {
    pub name: String,
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub sup: f64,
}

impl NonlinearF {
    pub fn sine() -> Self {
        NonlinearF::Sine { amplitude: 1.0 }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            NonlinearF::Sine { amplitude } => amplitude * x.sin(),
            NonlinearF::Sigmoid { steepness, center } => {
                1.0 / (1.0 + (-steepness * (x - center)).exp())
            }
            NonlinearF::Cosine => x.cos(),
            NonlinearF::Constant(c) => *c,
            NonlinearF::Custom(c) => (c.f)(x),
        }
    }

    /// `x F(x)`; vanishes at 0.
    #[inline]
    pub fn eval_tilde(&self, x: f64) -> f64 {
        match self {
            NonlinearF::Constant(c) if *c == 0.0 => 0.0,
            _ => x * self.eval(x),
        }
    }

    /// `sup |F|`.
    pub fn sup_abs(&self) -> f64 {
        match self {
            NonlinearF::Sine { amplitude } => amplitude.abs(),
            NonlinearF::Sigmoid { .. } | NonlinearF::Cosine => 1.0,
            NonlinearF::Constant(c) => c.abs(),
            NonlinearF::Custom(c) => c.sup,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, NonlinearF::Constant(c) if *c == 0.0)
    }
}

impl fmt::Debug for NonlinearF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NonlinearF({self})")
    }
}

impl PartialEq for NonlinearF {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}

/// Round-trips through [`FromStr`] for every variant except `Custom`.
impl fmt::Display for NonlinearF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NonlinearF::Sine { amplitude } if *amplitude == 1.0 => write!(f, "sin"),
            NonlinearF::Sine { amplitude } => write!(f, "sin:{amplitude}"),
            NonlinearF::Sigmoid { steepness, center } => write!(f, "sigmoid:{steepness}:{center}"),
            NonlinearF::Cosine => write!(f, "cos"),
            NonlinearF::Constant(c) => write!(f, "const:{c}"),
            NonlinearF::Custom(c) => write!(f, "custom:{}", c.name),
        }
    }
}

impl FromStr for NonlinearF {
    type Err = Error;

    /// `sin`, `sin:<amplitude>`, `cos`, `sigmoid:<steepness>:<center>`,
    /// `const:<value>`, `zero`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| Error::config("F", format!("`{s}` is missing a parameter")))?
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::config("F", format!("bad number in `{s}`")))
        };
        let f = match (parts[0].trim(), parts.len()) {
            ("sin" | "sine", 1) => NonlinearF::sine(),
            ("sin" | "sine", 2) => NonlinearF::Sine { amplitude: num(1)? },
            ("cos" | "cosine", 1) => NonlinearF::Cosine,
            ("sigmoid", 3) => NonlinearF::Sigmoid {
                steepness: num(1)?,
                center: num(2)?,
            },
            ("const" | "constant", 2) => NonlinearF::Constant(num(1)?),
            ("zero", 1) => NonlinearF::Constant(0.0),
            _ => return Err(Error::config("F", format!("unknown nonlinearity `{s}`"))),
        };
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tilde_vanishes_at_zero() {
        for f in ["sin", "sin:5", "cos", "sigmoid:100:0.2", "const:2", "zero"] {
            let f: NonlinearF = f.parse().unwrap();
            assert_eq!(f.eval_tilde(0.0), 0.0);
        }
    }

    #[test]
    fn parse_round_trip() {
        for s in ["sin", "sin:5", "cos", "sigmoid:100:0.2", "const:0.5"] {
            let f: NonlinearF = s.parse().unwrap();
            assert_eq!(f.to_string(), s);
            assert_eq!(f.to_string().parse::<NonlinearF>().unwrap(), f);
        }
        assert!("tanh".parse::<NonlinearF>().is_err());
        assert!("sin:abc".parse::<NonlinearF>().is_err());
    }

    #[test]
    fn sup_bounds_hold_on_a_sweep() {
        for s in ["sin", "sin:5", "cos", "sigmoid:100:0.2"] {
            let f: NonlinearF = s.parse().unwrap();
            let sup = f.sup_abs();
            for i in -1000..1000 {
                assert!(f.eval(i as f64 * 0.01).abs() <= sup + 1e-15);
            }
        }
    }
}
