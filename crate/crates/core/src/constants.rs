//! Two-weight characteristics on the Hartogs triangle: the four component
//! constants, the combined characteristic, the upper-bound expression and the
//! closed-form windows of the unweighted, power-weight and generalized cases.
//!
//! Every weight here is separable in the chart `(t, z2) = (z1/z2, z2)`, and
//! the induced tents are products `T_{z1} × T_{z2}` there, so each tent product
//! `⟨μ|w2|^{2−p}⟩(⟨|w2|²ν⟩)^{p−1}` splits into a `t`-factor times a `z2`-factor.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
pub use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DiscPoint, DyadicCell, Region};
use crate::quadrature::{disc_area, integrate_disc, Hint, QuadratureSpec};
use crate::weights::{dual_weight, ghw_mu, ghw_nu, ExponentPair, Profile, Weight};

/// Sups beyond this are reported as divergent.
pub const DIVERGENCE_CAP: f64 = 1e12;

/// Relative margin for deciding that the argmax still grows at the grid edge.
const EDGE_GROWTH: f64 = 1e-6;

/// Carleson-tent apexes per factor: the origin, then radii `1 − 2^{-i}` for
/// `i = 1..=i_max` at `angles` equispaced angles starting from 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TentGrid {
    pub i_max: u32,
    pub angles: usize,
}

impl Default for TentGrid {
    fn default() -> Self {
        TentGrid { i_max: 10, angles: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Apex {
    /// Radius index; 0 is the whole disc.
    pub i: u32,
    pub k: usize,
    pub z: DiscPoint,
}

impl TentGrid {
    pub fn new(i_max: u32, angles: usize) -> Result<Self> {
        if i_max < 2 || angles == 0 || i_max > 40 {
            return Err(Error::Config(format!("tent grid needs 2 ≤ I_max ≤ 40 and angles ≥ 1 (got {i_max}, {angles})")));
        }
        Ok(TentGrid { i_max, angles })
    }

    pub fn radius(i: u32) -> f64 {
        1.0 - 2f64.powi(-(i as i32))
    }

    pub fn apexes(&self) -> Vec<Apex> {
        let mut out = vec![Apex { i: 0, k: 0, z: DiscPoint::origin() }];
        for i in 1..=self.i_max {
            for k in 0..self.angles {
                let th = 2.0 * PI * k as f64 / self.angles as f64;
                out.push(Apex { i, k, z: DiscPoint::polar(Self::radius(i), th).unwrap() });
            }
        }
        out
    }

    /// Apexes per factor.
    pub fn factor_size(&self) -> usize {
        1 + self.i_max as usize * self.angles
    }

    /// Number of apex pairs.
    pub fn size(&self) -> usize {
        self.factor_size() * self.factor_size()
    }

    pub fn refined(&self) -> TentGrid {
        TentGrid { i_max: self.i_max + 4, ..*self }
    }

    fn index(&self, i: u32, k: usize) -> usize {
        if i == 0 {
            0
        } else {
            1 + (i as usize - 1) * self.angles + k
        }
    }

    fn region(a: &Apex) -> Region {
        if a.i == 0 {
            Region::WholeDisc
        } else {
            Region::CarlesonTentDisc { apex: a.z }
        }
    }
}

/// `f` and `g` of one chart factor; the tent value is `⟨f⟩⟨g⟩^{p−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub f: Profile,
    pub g: Profile,
    pub p: f64,
}

/// Chart factor pairs for `(μ, ν)`:
/// `(μ1, ν1)` and `(|w|^{2−p} μ2, |w|² ν2)`.
pub fn factor_pairs(mu: &Weight, nu: &Weight, p: &ExponentPair) -> [FactorPair; 2] {
    let (m1, m2) = mu.factors();
    let (n1, n2) = nu.factors();
    [
        FactorPair { f: m1, g: n1, p: p.p },
        FactorPair { f: m2.with_modulus_power(2.0 - p.p), g: n2.with_modulus_power(2.0), p: p.p },
    ]
}

fn is_radial(p: &Profile) -> bool {
    matches!(p, Profile::Power { b, .. } if *b == 0.0)
}

fn average(p: &Profile, region: &Region, area: f64, quad: &QuadratureSpec) -> Result<Option<f64>> {
    match integrate_disc(|w: Complex64| p.eval(w), region, &Hint::of(p), quad) {
        Ok(v) => Ok(Some(v / area)),
        Err(Error::NonIntegrable(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

impl FactorPair {
    fn is_radial(&self) -> bool {
        is_radial(&self.f) && is_radial(&self.g)
    }

    /// `⟨f⟩_R (⟨g⟩_R)^{p−1}`, `None` when divergent or above the cap.
    pub fn value(&self, region: &Region, quad: &QuadratureSpec) -> Result<Option<f64>> {
        let area = disc_area(region, quad)?;
        let (Some(a), Some(b)) = (average(&self.f, region, area, quad)?, average(&self.g, region, area, quad)?) else {
            return Ok(None);
        };
        let v = a * b.powf(self.p - 1.0);
        Ok(if v.is_finite() && v <= DIVERGENCE_CAP { Some(v) } else { None })
    }
}

/// Tent values of one factor over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorTable {
    pub grid: TentGrid,
    pub apexes: Vec<Apex>,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sup {
    pub value: Option<f64>,
    pub argmax: usize,
}

impl FactorTable {
    pub fn build(pair: &FactorPair, grid: &TentGrid, quad: &QuadratureSpec, root_only: bool) -> Result<Self> {
        let apexes = grid.apexes();
        let radial = pair.is_radial();
        let todo: Vec<usize> = (0..apexes.len())
            .filter(|&n| n == 0 || (!root_only && (!radial || apexes[n].k == 0)))
            .collect();
        let computed: Vec<Result<Option<f64>>> = todo
            .par_iter()
            .map(|&n| pair.value(&TentGrid::region(&apexes[n]), quad))
            .collect();
        let mut values = vec![None; apexes.len()];
        for (&n, v) in todo.iter().zip(computed) {
            values[n] = v?;
        }
        if radial && !root_only {
            for n in 1..apexes.len() {
                values[n] = values[grid.index(apexes[n].i, 0)];
            }
        }
        Ok(FactorTable { grid: *grid, apexes, values })
    }

    pub fn root(&self) -> Option<f64> {
        self.values[0]
    }

    /// Sup over apexes with index `i ≥ min_i`; divergent if any entry is.
    pub fn sup(&self, min_i: u32) -> Sup {
        let mut best = Sup { value: Some(f64::NEG_INFINITY), argmax: 0 };
        for (n, (a, v)) in self.apexes.iter().zip(&self.values).enumerate() {
            if a.i < min_i {
                continue;
            }
            match v {
                None => return Sup { value: None, argmax: n },
                Some(x) if Some(*x) > best.value => best = Sup { value: Some(*x), argmax: n },
                _ => {}
            }
        }
        best
    }

    /// Small tents: apex modulus strictly above 1/2.
    pub fn sup_small(&self) -> Sup {
        self.sup(2)
    }

    pub fn sup_all(&self) -> Sup {
        self.sup(0)
    }

    /// Whether the sup still grows at the outermost radius.
    fn grows_at_edge(&self, s: &Sup) -> bool {
        let a = self.apexes[s.argmax];
        if a.i != self.grid.i_max || s.value.is_none() {
            return false;
        }
        match self.values[self.grid.index(a.i - 1, a.k)] {
            Some(prev) => s.value.unwrap() > prev * (1.0 + EDGE_GROWTH),
            None => false,
        }
    }

    pub fn min_finite(&self) -> Option<f64> {
        self.values.iter().flatten().copied().reduce(f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub value: Option<f64>,
    pub divergent: bool,
}

impl Component {
    fn of(v: Option<f64>) -> Component {
        match v {
            Some(x) if x.is_finite() && x <= DIVERGENCE_CAP => Component { value: Some(x), divergent: false },
            _ => Component { value: None, divergent: true },
        }
    }

    pub fn finite(&self) -> Option<f64> {
        self.value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApexPair {
    pub z1: DiscPoint,
    pub z2: DiscPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub component: String,
    pub tent: ApexPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub p: f64,
    pub c00: Component,
    pub c10: Component,
    pub c01: Component,
    pub c11: Component,
    pub combined: Component,
    pub upper_bound: Option<f64>,
    /// `combined^{1/(2p)}`, the lower-bound side of the main estimate.
    pub lower_bound_exponent_applied: Option<f64>,
    pub argmax: BTreeMap<String, ApexPair>,
    pub grid: TentGrid,
    pub quad: QuadratureSpec,
    pub divergent: bool,
    pub witness: Option<Witness>,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

/// `c00^{1/p} + pp′(c10 + c01) + (pp′)² c11^{max(1, 1/(p−1))}`.
pub fn upper_bound(c00: f64, c10: f64, c01: f64, c11: f64, p: &ExponentPair) -> f64 {
    let pp = p.pp();
    c00.powf(1.0 / p.p) + pp * (c10 + c01) + pp * pp * c11.powf(p.max_exp())
}

fn lift(a: Option<f64>, b: Option<f64>, f: impl Fn(f64, f64) -> f64) -> Option<f64> {
    Some(f(a?, b?))
}

/// Everything the report needs, from two factor tables.
fn assemble(t1: &FactorTable, t2: &FactorTable, p: &ExponentPair, quad: &QuadratureSpec, warnings: Vec<String>) -> ConstantsReport {
    let m = p.max_exp();
    let (r1, r2) = (t1.root(), t2.root());
    let (s1, s2) = (t1.sup_small(), t2.sup_small());
    let (a1, a2) = (t1.sup_all(), t2.sup_all());
    let c00 = Component::of(lift(r1, r2, |x, y| x * y));
    let c10 = Component::of(lift(r2, s1.value, |x, y| x.powf(1.0 / p.p) * y.powf(m)));
    let c01 = Component::of(lift(s2.value, r1, |x, y| x.powf(m) * y.powf(1.0 / p.p)));
    let c11 = Component::of(lift(s1.value, s2.value, |x, y| x * y));
    let combined = Component::of(lift(a1.value, a2.value, |x, y| x * y));
    let at = |n1: usize, n2: usize| ApexPair { z1: t1.apexes[n1].z, z2: t2.apexes[n2].z };
    let mut argmax = BTreeMap::new();
    argmax.insert("c00".to_string(), at(0, 0));
    argmax.insert("c10".to_string(), at(s1.argmax, 0));
    argmax.insert("c01".to_string(), at(0, s2.argmax));
    argmax.insert("c11".to_string(), at(s1.argmax, s2.argmax));
    argmax.insert("combined".to_string(), at(a1.argmax, a2.argmax));
    let comps = [("c00", &c00), ("c10", &c10), ("c01", &c01), ("c11", &c11), ("combined", &combined)];
    let witness = comps.iter().find(|(_, c)| c.divergent).map(|(name, _)| Witness {
        component: name.to_string(),
        tent: argmax[*name],
    });
    let upper = match (c00.value, c10.value, c01.value, c11.value) {
        (Some(a), Some(b), Some(c), Some(d)) => Some(upper_bound(a, b, c, d, p)),
        _ => None,
    };
    ConstantsReport {
        p: p.p,
        c00,
        c10,
        c01,
        c11,
        combined,
        upper_bound: upper,
        lower_bound_exponent_applied: combined.value.map(|c| c.powf(1.0 / (2.0 * p.p))),
        argmax,
        grid: t1.grid,
        quad: *quad,
        divergent: witness.is_some(),
        witness,
        warnings,
    }
}

/// Both factor tables for `(μ, ν)`, refining once when a sup still grows at
/// the outermost radius.
pub fn tables(mu: &Weight, nu: &Weight, p: &ExponentPair, grid: &TentGrid, quad: &QuadratureSpec) -> Result<(FactorTable, FactorTable, Vec<String>)> {
    quad.validate()?;
    let [f1, f2] = factor_pairs(mu, nu, p);
    let mut t1 = FactorTable::build(&f1, grid, quad, false)?;
    let mut t2 = FactorTable::build(&f2, grid, quad, false)?;
    let mut warnings = Vec::new();
    let grows = |t: &FactorTable| t.grows_at_edge(&t.sup_small()) || t.grows_at_edge(&t.sup_all());
    if grows(&t1) || grows(&t2) {
        let g = grid.refined();
        t1 = FactorTable::build(&f1, &g, quad, false)?;
        t2 = FactorTable::build(&f2, &g, quad, false)?;
        if grows(&t1) || grows(&t2) {
            warnings.push(format!("argmax on the outer grid radius after refining to I_max = {}; grid may be too coarse", g.i_max));
        }
    }
    Ok((t1, t2, warnings))
}

/// Full report for `μ` with the dual weight `ν = |z2|^{-p′} μ^{-p′/p}`.
pub fn constants_report(mu: &Weight, p: &ExponentPair, grid: &TentGrid, quad: &QuadratureSpec) -> Result<ConstantsReport> {
    mu.check_exponent(p)?;
    let nu = dual_weight(mu, p)?;
    constants_report_with(mu, &nu, p, grid, quad)
}

/// Full report for an explicit pair `(μ, ν)`.
pub fn constants_report_with(mu: &Weight, nu: &Weight, p: &ExponentPair, grid: &TentGrid, quad: &QuadratureSpec) -> Result<ConstantsReport> {
    let (t1, t2, w) = tables(mu, nu, p, grid, quad)?;
    Ok(assemble(&t1, &t2, p, quad, w))
}

/// One of the four component constants.
pub fn component_constant(which: (u8, u8), mu: &Weight, p: &ExponentPair, grid: &TentGrid, quad: &QuadratureSpec) -> Result<Component> {
    mu.check_exponent(p)?;
    let nu = dual_weight(mu, p)?;
    if which == (0, 0) {
        return c00_with(mu, &nu, p, quad);
    }
    let r = constants_report_with(mu, &nu, p, grid, quad)?;
    Ok(match which {
        (1, 0) => r.c10,
        (0, 1) => r.c01,
        (1, 1) => r.c11,
        _ => return Err(Error::Config(format!("no component {which:?}"))),
    })
}

/// The whole-space component alone; no tent grid needed.
pub fn c00_with(mu: &Weight, nu: &Weight, p: &ExponentPair, quad: &QuadratureSpec) -> Result<Component> {
    quad.validate()?;
    let [f1, f2] = factor_pairs(mu, nu, p);
    let a = f1.value(&Region::WholeDisc, quad)?;
    let b = f2.value(&Region::WholeDisc, quad)?;
    Ok(Component::of(lift(a, b, |x, y| x * y)))
}

/// `[μ,ν]_p`.
pub fn combined_constant(mu: &Weight, p: &ExponentPair, grid: &TentGrid, quad: &QuadratureSpec) -> Result<Component> {
    Ok(constants_report(mu, p, grid, quad)?.combined)
}

/// Smallest finite tent product of either factor; at least 1 by Hölder when
/// `ν` is the dual weight.
pub fn holder_floor(t1: &FactorTable, t2: &FactorTable) -> Option<f64> {
    match (t1.min_finite(), t2.min_finite()) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// `[μ,ν]_p` with the sup taken over dyadic tents of generation ≤ `kmax`
/// in every shifted system instead of over Carleson tents.
pub fn dyadic_combined(mu: &Weight, p: &ExponentPair, kmax: u32, shifts: &[f64], quad: &QuadratureSpec) -> Result<Component> {
    let nu = dual_weight(mu, p)?;
    let [f1, f2] = factor_pairs(mu, &nu, p);
    let sup = |pair: &FactorPair| -> Result<Option<f64>> {
        let mut cells = vec![DyadicCell { offset: 0.0, k: 0, j: 1 }];
        for &l in shifts {
            for k in 1..=kmax {
                let js: Vec<u64> = if pair.is_radial() { vec![1] } else { (1..=(1u64 << k)).collect() };
                cells.extend(js.into_iter().map(|j| DyadicCell { offset: l, k, j }));
            }
        }
        let vals: Vec<Result<Option<f64>>> = cells.par_iter().map(|c| pair.value(&Region::DyadicTentDisc(*c), quad)).collect();
        let mut best = f64::NEG_INFINITY;
        for v in vals {
            match v? {
                None => return Ok(None),
                Some(x) => best = best.max(x),
            }
        }
        Ok(Some(best))
    };
    Ok(Component::of(lift(sup(&f1)?, sup(&f2)?, |x, y| x * y)))
}

/// `⟨|w|^e⟩_𝔻 = 2/(e + 2)`; `None` when `e ≤ −2`.
fn disc_power_average(e: f64) -> Option<f64> {
    if e > -2.0 {
        Some(2.0 / (e + 2.0))
    } else {
        None
    }
}

/// `2/(4−p) · (2(p−1)/(3p−4))^{p−1}` on `4/3 < p < 4`.
pub fn closed_form_unweighted(p: &ExponentPair) -> Option<f64> {
    closed_form_power(0.0, 0.0, p)
}

/// Whole-space constant for `μ = |w1|^a |w2|^b` as the product of the four
/// one-dimensional averages; `None` outside
/// `−2 < a < 2(p−1)` and `p−4 < a+b < 3p−4`.
pub fn closed_form_power(a: f64, b: f64, p: &ExponentPair) -> Option<f64> {
    let (pp, q) = (p.p, p.q);
    let x1 = disc_power_average(a)?;
    let x2 = disc_power_average(-a * q / pp)?;
    let y1 = disc_power_average(2.0 + a - pp + b)?;
    let y2 = disc_power_average(2.0 - q * (1.0 + (a + b) / pp))?;
    let v = x1 * x2.powf(pp - 1.0) * y1 * y2.powf(pp - 1.0);
    if v.is_finite() && v <= DIVERGENCE_CAP {
        Some(v)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Unweighted,
    Power { a: f64, b: f64 },
    Generalized { m: u32, n: u32 },
}

/// Open `p`-interval; empty when `lo ≥ hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
    /// Exact endpoints for the integer families.
    pub exact: Option<(Ratio<i64>, Ratio<i64>)>,
    pub caveat: Option<String>,
}

impl Window {
    pub fn contains(&self, p: f64) -> bool {
        self.lo < p && p < self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.lo >= self.hi
    }
}

fn ratio_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Projection regularity window of a family.
pub fn regularity_window(family: Family) -> Result<Window> {
    Ok(match family {
        Family::Unweighted => Window {
            lo: 4.0 / 3.0,
            hi: 4.0,
            exact: Some((Ratio::new(4, 3), Ratio::from_integer(4))),
            caveat: None,
        },
        Family::Power { a, b } => Window {
            lo: 1f64.max((a + 1.0) / 2.0).max((a + b + 4.0) / 3.0),
            hi: a + b + 4.0,
            exact: None,
            caveat: Some("characterizes regularity for p ≥ 2 only; assumes a > −2".into()),
        },
        Family::Generalized { m, n } => {
            if m == 0 || n == 0 || crate::kernels::gcd(m, n) != 1 {
                return Err(Error::Config(format!("(m, n) = ({m}, {n}) must be coprime positive integers")));
            }
            let (m, n) = (m as i64, n as i64);
            let lo = Ratio::new(2 * m + 2 * n, m + n + 1);
            let hi = Ratio::new(2 * m + 2 * n, m + n - 1);
            Window { lo: ratio_f64(lo), hi: ratio_f64(hi), exact: Some((lo, hi)), caveat: None }
        }
    })
}

/// `A = 2n − 1 + (1 − n)/m`, the exponent tied to the projection.
pub fn projection_exponent(m: u32, n: u32) -> Ratio<i64> {
    let (m, n) = (m as i64, n as i64);
    Ratio::from_integer(2 * n - 1) + Ratio::new(1 - n, m)
}

/// `𝒦_A` window `((2n+2m)/(Am+2n+2m−2nm), (2n+2m)/(2nm−Am))`, defined when
/// `Am + 2n + 2m − 2nm > 2nm − Am > 0`.
pub fn ka_window(m: u32, n: u32, a: Ratio<i64>) -> Option<(Ratio<i64>, Ratio<i64>)> {
    let (mr, nr) = (Ratio::from_integer(m as i64), Ratio::from_integer(n as i64));
    let two = Ratio::from_integer(2);
    let s = two * (mr + nr);
    let lo_den = a * mr + s - two * nr * mr;
    let hi_den = two * nr * mr - a * mr;
    let zero = Ratio::from_integer(0);
    if lo_den > hi_den && hi_den > zero {
        Some((s / lo_den, s / hi_den))
    } else {
        None
    }
}

/// Whole-space constant of the `𝒦_A` weights and its companions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaReport {
    pub m: u32,
    pub n: u32,
    pub a: f64,
    pub p: f64,
    pub in_window: bool,
    /// Quadrature value of the whole-space constant.
    pub value: Option<f64>,
    /// `(2n−A)^{-p} (K−p)^{-1} (K−p′)^{1−p}`, `K = (2m+2n)/(2mn−Am)`.
    pub closed_form: Option<f64>,
    /// `value / closed_form`; equals `(2m)^p`.
    pub ratio: Option<f64>,
    /// `m^{-1} value^{1/p}`.
    pub norm_bound: Option<f64>,
}

/// `(2n−A)^{-p} (K−p)^{-1} (K−p′)^{1−p}` inside the `𝒦_A` window.
pub fn ka_closed_form(m: u32, n: u32, a: f64, p: &ExponentPair) -> Option<f64> {
    let (mf, nf) = (m as f64, n as f64);
    let d = 2.0 * mf * nf - a * mf;
    let k = (2.0 * mf + 2.0 * nf) / d;
    if !(d > 0.0 && k > p.p && k > p.q) {
        return None;
    }
    Some((2.0 * nf - a).powf(-p.p) / (k - p.p) * (k - p.q).powf(1.0 - p.p))
}

pub fn generalized_ka_constant(m: u32, n: u32, a: f64, p: f64, quad: &QuadratureSpec) -> Result<KaReport> {
    if m == 0 || n == 0 || crate::kernels::gcd(m, n) != 1 {
        return Err(Error::Config(format!("(m, n) = ({m}, {n}) must be coprime positive integers")));
    }
    let pe = ExponentPair::new(p)?;
    let mu = ghw_mu(m, n, a, p);
    let nu = ghw_nu(m, n, a, &pe);
    let value = c00_with(&mu, &nu, &pe, quad)?.value;
    let closed = ka_closed_form(m, n, a, &pe);
    let (mf, nf) = (m as f64, n as f64);
    let lo_den = a * mf + 2.0 * nf + 2.0 * mf - 2.0 * nf * mf;
    let hi_den = 2.0 * nf * mf - a * mf;
    let in_window = lo_den > hi_den && hi_den > 0.0 && {
        let s = 2.0 * (mf + nf);
        s / lo_den < p && p < s / hi_den
    };
    Ok(KaReport {
        m,
        n,
        a,
        p,
        in_window,
        value,
        closed_form: closed,
        ratio: lift(value, closed, |x, y| x / y),
        norm_bound: value.map(|v| v.powf(1.0 / p) / mf),
    })
}

/// Bisection for the onset of divergence of the `𝒦_A` constant between a
/// finite point `inside` and a divergent point `outside`.
pub fn ka_divergence_onset(m: u32, n: u32, a: f64, inside: f64, outside: f64, tol: f64, quad: &QuadratureSpec) -> Result<f64> {
    let finite = |p: f64| -> Result<bool> { Ok(generalized_ka_constant(m, n, a, p, quad)?.value.is_some()) };
    if !finite(inside)? || finite(outside)? {
        return Err(Error::Config("onset bisection needs a finite inside point and a divergent outside point".into()));
    }
    let (mut lo, mut hi) = (inside, outside);
    while (hi - lo).abs() > tol {
        let mid = 0.5 * (lo + hi);
        if finite(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn q() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    fn small() -> TentGrid {
        TentGrid { i_max: 6, angles: 16 }
    }

    #[test]
    fn unweighted_whole_space_constant() {
        let one = Weight::Constant(1.0);
        for p in [1.5, 2.0, 2.5, 3.0, 3.5] {
            let pe = ExponentPair::new(p).unwrap();
            let want = 2.0 / (4.0 - p) * (2.0 * (p - 1.0) / (3.0 * p - 4.0)).powf(p - 1.0);
            assert_relative_eq!(closed_form_unweighted(&pe).unwrap(), want, max_relative = 1e-14);
            let got = component_constant((0, 0), &one, &pe, &small(), &q()).unwrap().value.unwrap();
            assert_relative_eq!(got, want, max_relative = 1e-9);
        }
        let p2 = ExponentPair::new(2.0).unwrap();
        assert_relative_eq!(closed_form_unweighted(&p2).unwrap(), 1.0, max_relative = 1e-15);
        let p3 = ExponentPair::new(3.0).unwrap();
        assert_relative_eq!(closed_form_unweighted(&p3).unwrap(), 32.0 / 25.0, max_relative = 1e-14);
    }

    #[test]
    fn upper_bound_arithmetic() {
        let p = ExponentPair::new(2.0).unwrap();
        assert_relative_eq!(upper_bound(1.0, 1.0, 1.0, 1.0, &p), 25.0);
    }

    #[test]
    fn unweighted_components_are_order_one() {
        for p in [1.5, 2.0, 3.0] {
            let pe = ExponentPair::new(p).unwrap();
            let r = constants_report(&Weight::Constant(1.0), &pe, &small(), &q()).unwrap();
            for c in [r.c01, r.c11] {
                let v = c.value.unwrap();
                assert!(v >= 1.0 - 1e-9 && v < 3.0, "p={p}: {v}");
            }
            let c = r.combined.value.unwrap();
            assert!(c >= 1.0 && c.powf(1.0 / p) <= r.upper_bound.unwrap());
        }
    }

    #[test]
    fn divergence_is_flagged_not_infinite() {
        for p in [1.2, 4.0 / 3.0, 4.0, 4.5] {
            let pe = ExponentPair::new(p).unwrap();
            let r = constants_report(&Weight::Constant(1.0), &pe, &small(), &q()).unwrap();
            assert!(r.combined.divergent && r.divergent && r.upper_bound.is_none(), "p={p}");
            assert!(r.witness.is_some());
            assert!(r.combined.value.is_none());
        }
    }

    #[test]
    fn scale_invariance() {
        let mu = Weight::PowerAB { a: 0.5, b: -0.3 };
        let p = ExponentPair::new(2.5).unwrap();
        let base = constants_report(&mu, &p, &small(), &q()).unwrap();
        for c in [0.1, 10.0] {
            let r = constants_report(&mu.scaled(c), &p, &small(), &q()).unwrap();
            assert_relative_eq!(r.combined.value.unwrap(), base.combined.value.unwrap(), max_relative = 1e-12);
            assert_eq!(r.argmax["combined"], base.argmax["combined"]);
        }
    }

    #[test]
    fn power_closed_form_and_windows() {
        let p2 = ExponentPair::new(2.0).unwrap();
        // a = 1, b = 0, p = 2: (2/3)(2/1)(2/3)(2/1)
        assert_relative_eq!(closed_form_power(1.0, 0.0, &p2).unwrap(), 16.0 / 9.0, max_relative = 1e-14);
        let got = component_constant((0, 0), &Weight::PowerAB { a: 1.0, b: 0.0 }, &p2, &small(), &q()).unwrap();
        assert_relative_eq!(got.value.unwrap(), 16.0 / 9.0, max_relative = 1e-9);
        assert!(closed_form_power(4.0, 0.0, &p2).is_none());
        assert_eq!(closed_form_power(0.0, 0.0, &p2), closed_form_unweighted(&p2));
        let w = regularity_window(Family::Power { a: 0.0, b: 0.0 }).unwrap();
        assert_relative_eq!(w.lo, 4.0 / 3.0);
        assert_relative_eq!(w.hi, 4.0);
        let u = regularity_window(Family::Unweighted).unwrap();
        assert_eq!(u.exact, regularity_window(Family::Generalized { m: 1, n: 1 }).unwrap().exact);
        let g = regularity_window(Family::Generalized { m: 2, n: 1 }).unwrap();
        assert_eq!(g.exact, Some((Ratio::new(3, 2), Ratio::from_integer(3))));
        assert!(regularity_window(Family::Generalized { m: 2, n: 2 }).is_err());
    }

    #[test]
    fn ka_window_matches_projection_window() {
        for (m, n) in [(1, 1), (2, 1), (3, 2), (1, 4), (5, 3)] {
            let a = projection_exponent(m, n);
            let w = ka_window(m, n, a).unwrap();
            assert_eq!(Some(w), regularity_window(Family::Generalized { m, n }).unwrap().exact);
        }
        assert_eq!(projection_exponent(2, 1), Ratio::from_integer(1));
    }

    #[test]
    fn ka_constant_matches_closed_form_shape() {
        for (m, n) in [(1u32, 1u32), (2, 1), (3, 2)] {
            let a = ratio_f64(projection_exponent(m, n));
            let (lo, hi) = ka_window(m, n, projection_exponent(m, n)).unwrap();
            let mid = 0.5 * (ratio_f64(lo) + ratio_f64(hi));
            for p in [mid, ratio_f64(lo) + 0.01, ratio_f64(hi) - 0.01] {
                let r = generalized_ka_constant(m, n, a, p, &q()).unwrap();
                assert!(r.in_window, "{r:?}");
                assert_relative_eq!(r.ratio.unwrap(), (2.0 * m as f64).powf(p), max_relative = 1e-9);
            }
            for p in [ratio_f64(lo), ratio_f64(hi), ratio_f64(lo) - 1e-3, ratio_f64(hi) + 1e-3] {
                let r = generalized_ka_constant(m, n, a, p, &q()).unwrap();
                assert!(r.value.is_none(), "(m,n)=({m},{n}) p={p}: {r:?}");
            }
        }
    }

    #[test]
    fn holder_floor_on_grid() {
        for p in [1.5, 1.8, 2.0] {
            for mu in [Weight::Constant(1.0), Weight::PowerAB { a: 0.7, b: -0.4 }, Weight::SharpExample { s: 0.3, p }] {
                let pe = ExponentPair::new(p).unwrap();
                let nu = dual_weight(&mu, &pe).unwrap();
                let (t1, t2, _) = tables(&mu, &nu, &pe, &small(), &q()).unwrap();
                if let Some(f) = holder_floor(&t1, &t2) {
                    assert!(f >= 1.0 - 1e-6, "{mu} p={p}: {f}");
                }
            }
        }
    }

    #[test]
    fn refinement_never_lowers_components() {
        let mu = Weight::SharpExample { s: 0.4, p: 2.0 };
        let p = ExponentPair::new(2.0).unwrap();
        let nu = dual_weight(&mu, &p).unwrap();
        let g1 = TentGrid { i_max: 4, angles: 8 };
        let g2 = TentGrid { i_max: 6, angles: 16 };
        let [f1, f2] = factor_pairs(&mu, &nu, &p);
        let a = assemble(
            &FactorTable::build(&f1, &g1, &q(), false).unwrap(),
            &FactorTable::build(&f2, &g1, &q(), false).unwrap(),
            &p,
            &q(),
            vec![],
        );
        let b = assemble(
            &FactorTable::build(&f1, &g2, &q(), false).unwrap(),
            &FactorTable::build(&f2, &g2, &q(), false).unwrap(),
            &p,
            &q(),
            vec![],
        );
        for (x, y) in [(a.c10, b.c10), (a.c01, b.c01), (a.c11, b.c11), (a.combined, b.combined)] {
            assert!(y.value.unwrap() >= x.value.unwrap() * (1.0 - 1e-12));
        }
    }

    #[test]
    fn dyadic_and_carleson_sups_are_comparable() {
        for mu in [Weight::Constant(1.0), Weight::PowerAB { a: 0.5, b: 0.5 }] {
            let p = ExponentPair::new(2.2).unwrap();
            let c = constants_report(&mu, &p, &small(), &q()).unwrap().combined.value.unwrap();
            let d = dyadic_combined(&mu, &p, 10, &crate::geometry::DEFAULT_SHIFTS, &q()).unwrap().value.unwrap();
            let r = c / d;
            assert!((0.2..5.0).contains(&r), "{mu}: {c} vs {d}");
        }
    }
}
