//! Weight families on the Hartogs triangle, their chart factorization and the
//! dual weight.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::HartogsPoint;

/// Exponent `p ∈ (1, ∞)` with its conjugate `p′ = p/(p − 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentPair {
    pub p: f64,
    pub q: f64,
}

impl ExponentPair {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::Config(format!("exponent p = {p} must lie in (1, ∞)")));
        }
        Ok(ExponentPair { p, q: p / (p - 1.0) })
    }

    /// `max{1, 1/(p − 1)}`.
    pub fn max_exp(&self) -> f64 {
        (1.0 / (self.p - 1.0)).max(1.0)
    }

    pub fn pp(&self) -> f64 {
        self.p * self.q
    }
}

#[derive(Clone)]
pub struct CustomProfile {
    pub name: String,
    pub f: Arc<dyn Fn(Complex64) -> f64 + Send + Sync>,
}

impl fmt::Debug for CustomProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomProfile({})", self.name)
    }
}

impl PartialEq for CustomProfile {
    fn eq(&self, o: &Self) -> bool {
        self.name == o.name && Arc::ptr_eq(&self.f, &o.f)
    }
}

/// One-variable factor of a separable weight.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// `coef · |w|^a · |1 − w|^b`.
    Power { coef: f64, a: f64, b: f64 },
    Custom(CustomProfile),
}

impl Profile {
    pub fn power(coef: f64, a: f64, b: f64) -> Profile {
        Profile::Power { coef, a, b }
    }

    pub fn one() -> Profile {
        Profile::power(1.0, 0.0, 0.0)
    }

    pub fn custom(name: &str, f: impl Fn(Complex64) -> f64 + Send + Sync + 'static) -> Profile {
        Profile::Custom(CustomProfile { name: name.into(), f: Arc::new(f) })
    }

    pub fn eval(&self, w: Complex64) -> f64 {
        match self {
            Profile::Power { coef, a, b } => {
                let mut v = *coef;
                if *a != 0.0 {
                    v *= w.norm().powf(*a);
                }
                if *b != 0.0 {
                    v *= (Complex64::new(1.0, 0.0) - w).norm().powf(*b);
                }
                v
            }
            Profile::Custom(c) => (c.f)(w),
        }
    }

    /// Exponent of `|w|` at the origin (0 for custom profiles).
    pub fn origin_power(&self) -> f64 {
        match self {
            Profile::Power { a, .. } => *a,
            Profile::Custom(_) => 0.0,
        }
    }

    /// Exponent of `|1 − w|` at the boundary point 1.
    pub fn one_power(&self) -> f64 {
        match self {
            Profile::Power { b, .. } => *b,
            Profile::Custom(_) => 0.0,
        }
    }

    pub fn powf(&self, e: f64) -> Profile {
        match self {
            Profile::Power { coef, a, b } => Profile::power(coef.powf(e), a * e, b * e),
            Profile::Custom(c) => {
                let f = c.f.clone();
                Profile::custom(&format!("({})^{e}", c.name), move |w| f(w).powf(e))
            }
        }
    }

    pub fn mul(&self, o: &Profile) -> Profile {
        match (self, o) {
            (Profile::Power { coef, a, b }, Profile::Power { coef: c2, a: a2, b: b2 }) => {
                Profile::power(coef * c2, a + a2, b + b2)
            }
            _ => {
                let (f, g) = (self.clone(), o.clone());
                Profile::custom(&format!("{}*{}", self.name(), o.name()), move |w| f.eval(w) * g.eval(w))
            }
        }
    }

    /// Multiply by `|w|^e`.
    pub fn with_modulus_power(&self, e: f64) -> Profile {
        self.mul(&Profile::power(1.0, e, 0.0))
    }

    pub fn name(&self) -> String {
        match self {
            Profile::Power { coef, a, b } => format!("{coef}*|w|^{a}*|1-w|^{b}"),
            Profile::Custom(c) => c.name.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GhwRole {
    W1,
    W2,
    H,
}

impl GhwRole {
    fn tag(&self) -> &'static str {
        match self {
            GhwRole::W1 => "w1",
            GhwRole::W2 => "w2",
            GhwRole::H => "h",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Weight {
    Constant(f64),
    /// `|w1|^a |w2|^b`.
    PowerAB { a: f64, b: f64 },
    /// The `s`-family tied to its exponent `p`.
    SharpExample { s: f64, p: f64 },
    /// `μ1(z1/z2) · μ2(z2)`.
    SeparableProduct(Profile, Profile),
    GeneralizedHartogs { role: GhwRole, m: u32, n: u32, a: f64, p: f64 },
}

impl Weight {
    pub fn constant(c: f64) -> Weight {
        Weight::Constant(c)
    }

    pub fn is_separable(&self) -> bool {
        true
    }

    /// Chart profiles `(μ1, μ2)` with `μ(t z2, z2) = μ1(t) μ2(z2)`.
    pub fn factors(&self) -> (Profile, Profile) {
        match self {
            Weight::Constant(c) => (Profile::power(*c, 0.0, 0.0), Profile::one()),
            Weight::PowerAB { a, b } => (Profile::power(1.0, *a, 0.0), Profile::power(1.0, a + b, 0.0)),
            Weight::SharpExample { s, p } => {
                let beta = 2.0 * (p - 1.0) * (1.0 - s);
                (Profile::power(1.0, s - 2.0, beta), Profile::power(1.0, p - 4.0 + s, beta))
            }
            Weight::SeparableProduct(a, b) => (a.clone(), b.clone()),
            Weight::GeneralizedHartogs { role, m, n, a, p } => {
                let (m, n) = (*m as f64, *n as f64);
                // |w1|^x |w2|^y = |t|^x |z2|^(x+y)
                let (x, y) = match role {
                    GhwRole::W1 => ((2.0 * m - 2.0) * (p - 1.0) / m, 2.0 * (n - 1.0) * (1.0 - p) / m),
                    GhwRole::W2 => (-2.0 + 2.0 / m, 2.0 * (n - 1.0) / m),
                    GhwRole::H => (0.0, a - 2.0 * n + 1.0),
                };
                (Profile::power(1.0, x, 0.0), Profile::power(1.0, x + y, 0.0))
            }
        }
    }

    /// The exponent a weight is tied to, if any.
    pub fn bound_exponent(&self) -> Option<f64> {
        match self {
            Weight::SharpExample { p, .. } => Some(*p),
            _ => None,
        }
    }

    pub fn check_exponent(&self, p: &ExponentPair) -> Result<()> {
        match self.bound_exponent() {
            Some(q) if (q - p.p).abs() > 1e-12 => Err(Error::Config(format!(
                "weight {self} is defined for p = {q}, not p = {}",
                p.p
            ))),
            _ => Ok(()),
        }
    }

    /// `c · μ` as a separable product.
    pub fn scaled(&self, c: f64) -> Weight {
        let (a, b) = self.factors();
        Weight::SeparableProduct(a.mul(&Profile::power(c, 0.0, 0.0)), b)
    }

    pub fn product(&self, o: &Weight) -> Weight {
        let ((a1, b1), (a2, b2)) = (self.factors(), o.factors());
        Weight::SeparableProduct(a1.mul(&a2), b1.mul(&b2))
    }

    pub fn powf(&self, e: f64) -> Weight {
        let (a, b) = self.factors();
        Weight::SeparableProduct(a.powf(e), b.powf(e))
    }
}

/// Value of the weight at a point, from the ambient formula of each family.
pub fn weight_eval(w: &Weight, point: &HartogsPoint) -> Result<f64> {
    let (w1, w2) = (point.z1(), point.z2.c());
    let (m1, m2) = (w1.norm(), w2.norm());
    let one = Complex64::new(1.0, 0.0);
    Ok(match w {
        Weight::Constant(c) => *c,
        Weight::PowerAB { a, b } => m1.powf(*a) * m2.powf(*b),
        Weight::SharpExample { s, p } => {
            if m1 == 0.0 {
                return Err(Error::Singular("sharp-example weight has a pole at w1 = 0".into()));
            }
            let t = w1 / w2;
            let num = ((one - t) * (one - w2)).norm().powf(2.0 * (p - 1.0) * (1.0 - s));
            m2.powf(p - 2.0) * num / (t.norm().powf(2.0 - s) * m2.powf(2.0 - s))
        }
        Weight::SeparableProduct(a, b) => a.eval(w1 / w2) * b.eval(w2),
        Weight::GeneralizedHartogs { role, m, n, a, p } => {
            let (m, n) = (*m as f64, *n as f64);
            match role {
                GhwRole::W1 => {
                    m1.powf((2.0 * m - 2.0) / m * (p - 1.0)) * m2.powf(2.0 / m * (n - 1.0) * (1.0 - p))
                }
                GhwRole::W2 => m1.powf(-2.0 + 2.0 / m) * m2.powf(2.0 / m * (n - 1.0)),
                GhwRole::H => m2.powf(a - 2.0 * n + 1.0),
            }
        }
    })
}

/// `ν = |z2|^{-p′} μ^{-p′/p}`.
pub fn dual_weight(mu: &Weight, p: &ExponentPair) -> Result<Weight> {
    mu.check_exponent(p)?;
    let e = -p.q / p.p;
    Ok(match mu {
        Weight::PowerAB { a, b } => Weight::PowerAB { a: -a * p.q / p.p, b: -p.q * (1.0 + b / p.p) },
        _ => {
            let (a, b) = mu.factors();
            Weight::SeparableProduct(a.powf(e), b.powf(e).with_modulus_power(-p.q))
        }
    })
}

/// `μ = ω2 h^p` for the generalized triangle.
pub fn ghw_mu(m: u32, n: u32, a: f64, p: f64) -> Weight {
    let w2 = Weight::GeneralizedHartogs { role: GhwRole::W2, m, n, a, p };
    let h = Weight::GeneralizedHartogs { role: GhwRole::H, m, n, a, p };
    w2.product(&h.powf(p))
}

/// `ν = ω1^{-p′/p} |w2|^{(A − 2n) p′}`, used in place of the dual weight.
pub fn ghw_nu(m: u32, n: u32, a: f64, p: &ExponentPair) -> Weight {
    let w1 = Weight::GeneralizedHartogs { role: GhwRole::W1, m, n, a, p: p.p };
    w1.powf(-p.q / p.p)
        .product(&Weight::PowerAB { a: 0.0, b: (a - 2.0 * n as f64) * p.q })
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Constant(c) => write!(f, "constant:{c}"),
            Weight::PowerAB { a, b } => write!(f, "power:a={a},b={b}"),
            Weight::SharpExample { s, p } => write!(f, "sharp:s={s},p={p}"),
            Weight::GeneralizedHartogs { role, m, n, a, p } => {
                write!(f, "ghw:role={},m={m},n={n},A={a},p={p}", role.tag())
            }
            Weight::SeparableProduct(a, b) => write!(f, "separable:[{}]x[{}]", a.name(), b.name()),
        }
    }
}

fn keyed(body: &str, keys: &[&str]) -> Result<Vec<String>> {
    let mut out = vec![None; keys.len()];
    for part in body.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value, got '{part}'")))?;
        let i = keys
            .iter()
            .position(|x| *x == k.trim())
            .ok_or_else(|| Error::Parse(format!("unknown key '{k}'")))?;
        if out[i].is_some() {
            return Err(Error::Parse(format!("duplicate key '{k}'")));
        }
        out[i] = Some(v.trim().to_string());
    }
    out.into_iter()
        .zip(keys)
        .map(|(v, k)| v.ok_or_else(|| Error::Parse(format!("missing key '{k}'"))))
        .collect()
}

fn num<T: FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse(format!("bad number '{s}'")))
}

impl FromStr for Weight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Weight> {
        let (family, body) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("weight spec '{s}' lacks a family prefix")))?;
        match family {
            "constant" => {
                let c: f64 = num(body)?;
                if !(c > 0.0) {
                    return Err(Error::Parse("constant weight must be positive".into()));
                }
                Ok(Weight::Constant(c))
            }
            "power" => {
                let v = keyed(body, &["a", "b"])?;
                Ok(Weight::PowerAB { a: num(&v[0])?, b: num(&v[1])? })
            }
            "sharp" => {
                let v = keyed(body, &["s", "p"])?;
                let (s, p): (f64, f64) = (num(&v[0])?, num(&v[1])?);
                if !(s > 0.0 && s < 1.0) || !(p > 1.0) {
                    return Err(Error::Parse("sharp weight needs 0 < s < 1 and p > 1".into()));
                }
                Ok(Weight::SharpExample { s, p })
            }
            "ghw" => {
                let v = keyed(body, &["role", "m", "n", "A", "p"])?;
                let role = match v[0].as_str() {
                    "w1" => GhwRole::W1,
                    "w2" => GhwRole::W2,
                    "h" => GhwRole::H,
                    r => return Err(Error::Parse(format!("unknown role '{r}'"))),
                };
                let (m, n): (u32, u32) = (num(&v[1])?, num(&v[2])?);
                if m == 0 || n == 0 || crate::kernels::gcd(m, n) != 1 {
                    return Err(Error::Parse("m, n must be coprime positive integers".into()));
                }
                Ok(Weight::GeneralizedHartogs { role, m, n, a: num(&v[3])?, p: num(&v[4])? })
            }
            other => Err(Error::Parse(format!("unknown weight family '{other}'"))),
        }
    }
}
