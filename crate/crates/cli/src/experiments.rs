use std::collections::BTreeMap;
use std::time::Instant;

use bergman_core::constants::{
    closed_form_power, closed_form_unweighted, combined_constant, component_constant, constants_report,
    generalized_ka_constant, ka_divergence_onset, ka_window, projection_exponent, regularity_window, Component,
    Family, TentGrid,
};
use bergman_core::geometry::{
    build_forest, check_dump, comparability_brackets, dyadic_in_carleson_bracket, nesting_violations,
    pair_tent_bracket, parse_dump, partition_violations, tiling_violations, Bracket,
};
use bergman_core::operators::{log_log_slope, norm_lower_bound, norm_ratio, radial_dual_ratio, sharp_example_ratio, LowerBound, Op};
use bergman_core::{DyadicCell, ExponentPair, QuadratureSpec, TestFunction, Weight};
use serde_json::Value;

use crate::config::{CliError, Experiment, ExperimentConfig};
use crate::report::{number, opt_number, ExperimentReport, Quantity};
use crate::suite;

type Rows = Vec<BTreeMap<String, Value>>;

pub fn row(cells: &[(&str, Value)]) -> BTreeMap<String, Value> {
    cells.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn p_values(cfg: &ExperimentConfig, default: &[f64]) -> Vec<f64> {
    match (&cfg.p_grid, cfg.p) {
        (Some(g), _) => g.clone(),
        (None, Some(p)) => vec![p],
        _ => default.to_vec(),
    }
}

/// Fill in the per-experiment defaults so the echoed config is the full run.
pub fn resolve(cfg: &ExperimentConfig) -> Result<ExperimentConfig, CliError> {
    let mut c = cfg.clone();
    c.out = None;
    match c.experiment {
        Experiment::HartogsWindow => {
            c.weight.get_or_insert_with(|| "constant:1".into());
            c.p_grid = Some(p_values(cfg, &[1.2, 4.0 / 3.0 + 0.05, 2.0, 3.9, 4.1]));
            c.p = None;
        }
        Experiment::PowerWeights => {
            c.weight.get_or_insert_with(|| "power:a=1,b=0".into());
            c.p_grid = Some(p_values(cfg, &[2.0, 3.0, 4.5, 5.5]));
            c.p = None;
        }
        Experiment::Generalized => {
            let (m, n) = (*c.m.get_or_insert(2), *c.n.get_or_insert(1));
            let a = projection_exponent(m, n);
            c.a.get_or_insert(*a.numer() as f64 / *a.denom() as f64);
            if c.p_grid.is_none() && c.p.is_none() {
                let (lo, hi) = window_of(m, n, c.a.unwrap())?;
                c.p_grid = Some(vec![lo - 1e-3, lo, lo + 1e-3, 0.5 * (lo + hi), hi - 1e-3, hi, hi + 1e-3]);
            }
            c.p_grid = Some(p_values(&c, &[]));
            c.p = None;
        }
        Experiment::SharpExample => {
            c.p = Some(c.p.or(c.p_grid.as_ref().and_then(|g| g.first().copied())).unwrap_or(2.0));
            c.p_grid = None;
            c.s_grid.get_or_insert_with(|| vec![0.2, 0.1, 0.05]);
        }
        Experiment::Constants | Experiment::NormBounds => {
            c.weight.get_or_insert_with(|| "constant:1".into());
            let default = match c.parsed_weight()? {
                Some(Weight::SharpExample { p, .. }) => vec![p],
                _ if c.experiment == Experiment::Constants => vec![2.0],
                _ => vec![2.0, 3.0],
            };
            c.p_grid = Some(p_values(cfg, &default));
            c.p = None;
        }
        Experiment::TreeVerify | Experiment::Verify => {}
    }
    c.validate()?;
    Ok(c)
}

fn window_of(m: u32, n: u32, a: f64) -> Result<(f64, f64), CliError> {
    let proj = projection_exponent(m, n);
    let f = |r: bergman_core::constants::Ratio<i64>| *r.numer() as f64 / *r.denom() as f64;
    if (a - f(proj)).abs() < 1e-12 {
        let (lo, hi) = ka_window(m, n, proj).ok_or_else(|| CliError::Config("empty window".into()))?;
        return Ok((f(lo), f(hi)));
    }
    let (mf, nf) = (m as f64, n as f64);
    let (lo_den, hi_den) = (a * mf + 2.0 * nf + 2.0 * mf - 2.0 * nf * mf, 2.0 * nf * mf - a * mf);
    if !(lo_den > hi_den && hi_den > 0.0) {
        return Err(CliError::Config(format!("A = {a} gives an empty window for (m, n) = ({m}, {n})")));
    }
    Ok((2.0 * (mf + nf) / lo_den, 2.0 * (mf + nf) / hi_den))
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport, CliError> {
    let cfg = resolve(cfg)?;
    let start = Instant::now();
    let (quantities, rows) = match cfg.experiment {
        Experiment::HartogsWindow => hartogs_window(&cfg)?,
        Experiment::PowerWeights => power_weights(&cfg)?,
        Experiment::Generalized => generalized(&cfg)?,
        Experiment::SharpExample => sharp_example(&cfg)?,
        Experiment::Constants => constants(&cfg)?,
        Experiment::NormBounds => norm_bounds(&cfg)?,
        Experiment::TreeVerify => tree_verify(&cfg)?,
        Experiment::Verify => suite::verify_suite(cfg.level)?,
    };
    let passed = quantities.iter().all(|q| q.pass != Some(false));
    Ok(ExperimentReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: cfg.timing.then(|| start.elapsed().as_secs_f64()),
        config: cfg,
        quantities,
        rows,
        passed,
    })
}

fn weight(cfg: &ExperimentConfig) -> Result<Weight, CliError> {
    Ok(cfg.parsed_weight()?.unwrap_or(Weight::Constant(1.0)))
}

fn hartogs_window(cfg: &ExperimentConfig) -> Result<(Vec<Quantity>, Rows), CliError> {
    let mu = weight(cfg)?;
    if !matches!(mu, Weight::Constant(_)) {
        return Err(CliError::Config("hartogs-window takes a constant weight".into()));
    }
    let window = regularity_window(Family::Unweighted)?;
    let (mut qs, mut rows) = (Vec::new(), Vec::new());
    for p in p_values(cfg, &[]) {
        let pe = ExponentPair::new(p)?;
        let comb = combined_constant(&mu, &pe, &cfg.grid, &cfg.quad)?;
        let want_div = !window.contains(p);
        let verdict = |div: bool| if div { "divergent" } else { "finite" };
        qs.push(
            Quantity::new(format!("combined(p={p})"), comb.value, "the combined constant is finite iff 4/3 < p < 4")
                .err(cfg.quad.rel_tol)
                .expect(verdict(want_div), comb.divergent == want_div),
        );
        let c00 = component_constant((0, 0), &mu, &pe, &cfg.grid, &cfg.quad)?;
        let closed = closed_form_unweighted(&pe);
        let ok = match (c00.value, closed) {
            (Some(v), Some(c)) => rel(v, c) <= 1e-6,
            (None, None) => true,
            _ => false,
        };
        let mut q = Quantity::new(format!("c00(p={p})"), c00.value, "whole-space constant equals 2/(4-p) (2(p-1)/(3p-4))^(p-1)");
        if let (Some(v), Some(c)) = (c00.value, closed) {
            q = q.err((v - c).abs());
        }
        qs.push(q.expect(closed.map_or("divergent".into(), |c| format!("{c:.10} to 1e-6")), ok));
        let mut ratio = None;
        if window.contains(p) {
            let r = norm_ratio(Op::P, &TestFunction::RadialDual { p }, &mu, p, &cfg.quad)?;
            let want = radial_dual_ratio(p);
            qs.push(
                Quantity::new(format!("radial-dual-ratio(p={p})"), r, "norm ratio of the projection of w2-bar |w2|^(-p') matches its series closed form")
                    .err(cfg.quad.rel_tol)
                    .expect(format!("{want:.10} to 1%"), r.is_some_and(|v| rel(v, want) <= 0.01)),
            );
            ratio = r;
        }
        rows.push(row(&[
            ("p", number(p)),
            ("combined", opt_number(comb.value)),
            ("divergent", Value::Bool(comb.divergent)),
            ("expected_divergent", Value::Bool(want_div)),
            ("c00", opt_number(c00.value)),
            ("c00_closed_form", opt_number(closed)),
            ("radial_dual_ratio", opt_number(ratio)),
            ("radial_dual_closed_form", opt_number(window.contains(p).then(|| radial_dual_ratio(p)))),
        ]));
    }
    Ok((qs, rows))
}

fn power_weights(cfg: &ExperimentConfig) -> Result<(Vec<Quantity>, Rows), CliError> {
    let Weight::PowerAB { a, b } = weight(cfg)? else {
        return Err(CliError::Config("power-weights needs a power:a=..,b=.. weight".into()));
    };
    let mu = Weight::PowerAB { a, b };
    let window = regularity_window(Family::Power { a, b })?;
    let (mut qs, mut rows) = (Vec::new(), Vec::new());
    for p in p_values(cfg, &[]) {
        let pe = ExponentPair::new(p)?;
        let closed = closed_form_power(a, b, &pe);
        let predicted = window.contains(p);
        let mut q = Quantity::new(
            format!("closed-form(p={p})"),
            closed,
            "for p >= 2 the closed form is finite iff max{1,(a+1)/2,(a+b+4)/3} < p < a+b+4",
        );
        q = if p >= 2.0 {
            q.expect(if predicted { "finite" } else { "divergent" }, closed.is_some() == predicted)
        } else {
            q
        };
        qs.push(q);
        let c00 = component_constant((0, 0), &mu, &pe, &cfg.grid, &cfg.quad)?;
        let ok = match (c00.value, closed) {
            (Some(v), Some(c)) => rel(v, c) <= 1e-5,
            (None, None) => true,
            _ => false,
        };
        let mut q = Quantity::new(format!("c00(p={p})"), c00.value, "quadrature matches the closed form of the whole-space constant");
        if let (Some(v), Some(c)) = (c00.value, closed) {
            q = q.err((v - c).abs());
        }
        qs.push(q.expect(closed.map_or("divergent".into(), |c| format!("{c:.10} to 1e-5")), ok));
        rows.push(row(&[
            ("p", number(p)),
            ("a", number(a)),
            ("b", number(b)),
            ("window_lo", number(window.lo)),
            ("window_hi", number(window.hi)),
            ("in_window", Value::Bool(predicted)),
            ("closed_form", opt_number(closed)),
            ("c00", opt_number(c00.value)),
            ("divergent", Value::Bool(c00.divergent)),
        ]));
    }
    Ok((qs, rows))
}

/// The exact window check and both onset bisections for one `(m, n)`.
pub fn generalized_window_checks(m: u32, n: u32, quad: &QuadratureSpec) -> Result<Vec<Quantity>, CliError> {
    let mut qs = Vec::new();
    let w = regularity_window(Family::Generalized { m, n })?;
    let (lo, hi) = w.exact.expect("integer family has exact endpoints");
    let (mi, ni) = (m as i64, n as i64);
    // a/b = c/d  <=>  a d = b c
    let eq = |r: bergman_core::constants::Ratio<i64>, num: i64, den: i64| r.numer() * den == r.denom() * num;
    let formula = eq(lo, 2 * mi + 2 * ni, mi + ni + 1) && eq(hi, 2 * mi + 2 * ni, mi + ni - 1);
    let ka = ka_window(m, n, projection_exponent(m, n));
    let ka_ok = ka.is_some_and(|(a, b)| a == lo && b == hi);
    qs.push(Quantity::flag(
        format!("window-exact(m={m},n={n})"),
        formula && ka_ok,
        format!("projection window is ({lo}, {hi}) = ((2m+2n)/(m+n+1), (2m+2n)/(m+n-1)) and matches the K_A window"),
    ));
    let a = *projection_exponent(m, n).numer() as f64 / *projection_exponent(m, n).denom() as f64;
    let (lo, hi) = (w.lo, w.hi);
    let width = hi - lo;
    for (side, edge, inside, outside) in [
        ("lower", lo, lo + 0.1 * width, (lo - 0.1 * width).max(1.0 + 1e-6)),
        ("upper", hi, hi - 0.1 * width, hi + 0.1 * width),
    ] {
        let onset = ka_divergence_onset(m, n, a, inside, outside, 1e-4, quad)?;
        qs.push(
            Quantity::new(format!("onset-{side}(m={m},n={n})"), Some(onset), "the K_A constant diverges at the window endpoint")
                .err(1e-4)
                .expect(format!("{edge:.10} to 1e-3"), (onset - edge).abs() <= 1e-3),
        );
    }
    Ok(qs)
}

fn generalized(cfg: &ExperimentConfig) -> Result<(Vec<Quantity>, Rows), CliError> {
    let (m, n, a) = (cfg.m.unwrap(), cfg.n.unwrap(), cfg.a.unwrap());
    let (lo, hi) = window_of(m, n, a)?;
    let proj = projection_exponent(m, n);
    let is_proj = (a - *proj.numer() as f64 / *proj.denom() as f64).abs() < 1e-12;
    let mut qs = if is_proj { generalized_window_checks(m, n, &cfg.quad)? } else { Vec::new() };
    let mut rows = Vec::new();
    for p in p_values(cfg, &[]) {
        let r = generalized_ka_constant(m, n, a, p, &cfg.quad)?;
        let want = lo < p && p < hi;
        qs.push(
            Quantity::new(format!("ka-constant(p={p})"), r.value, format!("the K_A constant is finite iff {lo:.6} < p < {hi:.6}"))
                .err(cfg.quad.rel_tol)
                .expect(if want { "finite" } else { "divergent" }, r.value.is_some() == want),
        );
        if let Some(ratio) = r.ratio {
            let target = (2.0 * m as f64).powf(p);
            qs.push(
                Quantity::new(format!("ka-ratio(p={p})"), Some(ratio), "quadrature over closed form equals (2m)^p")
                    .err(cfg.quad.rel_tol * ratio)
                    .expect(format!("{target:.10}"), rel(ratio, target) <= 1e-6),
            );
        }
        rows.push(row(&[
            ("p", number(p)),
            ("m", Value::from(m)),
            ("n", Value::from(n)),
            ("A", number(a)),
            ("in_window", Value::Bool(r.in_window)),
            ("value", opt_number(r.value)),
            ("closed_form", opt_number(r.closed_form)),
            ("ratio", opt_number(r.ratio)),
            ("norm_bound", opt_number(r.norm_bound)),
        ]));
    }
    Ok((qs, rows))
}

/// Sharp-example sweep over `s`.
pub struct SharpSweep {
    pub s: Vec<f64>,
    pub ratio: Vec<f64>,
    pub f_norm_p: Vec<f64>,
    pub upper: Vec<Option<f64>>,
    pub pointwise: Vec<f64>,
    pub ratio_err: Vec<f64>,
}

impl SharpSweep {
    pub fn run(s_grid: &[f64], p: f64, grid: &TentGrid, quad: &QuadratureSpec) -> Result<Self, CliError> {
        let pe = ExponentPair::new(p)?;
        let mut out = SharpSweep { s: Vec::new(), ratio: Vec::new(), f_norm_p: Vec::new(), upper: Vec::new(), pointwise: Vec::new(), ratio_err: Vec::new() };
        for &s in s_grid {
            let r = sharp_example_ratio(s, p, quad)?;
            let rep = constants_report(&Weight::SharpExample { s, p }, &pe, grid, quad)?;
            out.s.push(s);
            out.ratio.push(r.ratio);
            out.ratio_err.push(r.ratio * (r.pf_norm_p.rel_error() + r.f_norm_p.rel_error()));
            out.f_norm_p.push(r.f_norm_p.value);
            out.upper.push(rep.upper_bound);
            out.pointwise.push(r.pointwise_constant);
        }
        Ok(out)
    }

    /// Slope of `log ratio` against `log(1/s)`.
    pub fn ratio_slope(&self) -> f64 {
        let inv: Vec<f64> = self.s.iter().map(|s| 1.0 / s).collect();
        log_log_slope(&inv, &self.ratio)
    }

    /// Slope of `log upper_bound` against `log s`.
    pub fn upper_slope(&self) -> Option<f64> {
        let u: Option<Vec<f64>> = self.upper.iter().copied().collect();
        u.map(|u| log_log_slope(&self.s, &u))
    }

    pub fn f_slope(&self) -> f64 {
        let inv: Vec<f64> = self.s.iter().map(|s| 1.0 / s).collect();
        log_log_slope(&inv, &self.f_norm_p)
    }
}

fn sharp_example(cfg: &ExperimentConfig) -> Result<(Vec<Quantity>, Rows), CliError> {
    let p = cfg.p.unwrap();
    let s_grid = cfg.s_grid.clone().unwrap();
    let sw = SharpSweep::run(&s_grid, p, &cfg.grid, &cfg.quad)?;
    let mut qs = Vec::new();
    let mut rows = Vec::new();
    for i in 0..sw.s.len() {
        let s = sw.s[i];
        let lower = sw.ratio[i].powf(1.0 / p);
        let ok = sw.upper[i].is_some_and(|u| lower <= u);
        qs.push(
            Quantity::new(format!("ratio(s={s})"), Some(sw.ratio[i]), "||Pf||^p over B_1/4 x B_1/4 divided by ||f||^p")
                .err(sw.ratio_err[i])
                .expect("ratio^(1/p) <= upper bound", ok),
        );
        qs.push(
            Quantity::new(format!("pointwise-constant(s={s})"), Some(sw.pointwise[i]), "|Pf(z)| >= c / (s^2 |z2|) on B_1/4 x B_1/4")
                .expect("> 0", sw.pointwise[i] > 0.0),
        );
        rows.push(row(&[
            ("s", number(s)),
            ("p", number(p)),
            ("ratio", number(sw.ratio[i])),
            ("ratio_error", number(sw.ratio_err[i])),
            ("f_norm_p", number(sw.f_norm_p[i])),
            ("upper_bound", opt_number(sw.upper[i])),
            ("pointwise_constant", number(sw.pointwise[i])),
        ]));
    }
    if sw.s.len() >= 2 {
        let slope = sw.ratio_slope();
        qs.push(
            Quantity::new("ratio-slope", Some(slope), "the norm ratio grows like s^(-2p): slope against 1/s")
                .expect(format!("{} +- {}", 2.0 * p, 0.2 * p), (slope - 2.0 * p).abs() <= 0.2 * p),
        );
        let up = sw.upper_slope();
        qs.push(
            Quantity::new("upper-bound-slope", up, "the upper bound scales as s^(-2): slope against s")
                .expect("-2 +- 0.3", up.is_some_and(|u| (u + 2.0).abs() <= 0.3)),
        );
        qs.push(Quantity::new("f-norm-slope", Some(sw.f_slope()), "||f||^p grows like s^(-2) as s -> 0 (recorded)"));
    }
    Ok((qs, rows))
}

fn component_value(c: &Component) -> Value {
    opt_number(c.value)
}

fn constants(cfg: &ExperimentConfig) -> Result<(Vec<Quantity>, Rows), CliError> {
    let mu = weight(cfg)?;
    let (mut qs, mut rows) = (Vec::new(), Vec::new());
    for p in p_values(cfg, &[]) {
        let pe = ExponentPair::new(p)?;
        let rep = constants_report(&mu, &pe, &cfg.grid, &cfg.quad)?;
        for (name, c) in [("c00", rep.c00), ("c10", rep.c10), ("c01", rep.c01), ("c11", rep.c11), ("combined", rep.combined)] {
            qs.push(Quantity::new(format!("{name}(p={p})"), c.value, "two-weight tent constant over the tent grid").err(cfg.quad.rel_tol));
        }
        qs.push(Quantity::new(format!("upper-bound(p={p})"), rep.upper_bound, "norm upper bound assembled from the four components"));
        match mu {
            Weight::Constant(_) => {
                let want = !regularity_window(Family::Unweighted)?.contains(p);
                qs.push(Quantity::flag(format!("window(p={p})"), rep.divergent == want, "unweighted constants are finite iff 4/3 < p < 4"));
            }
            Weight::PowerAB { a, b } => {
                let closed = closed_form_power(a, b, &pe);
                let ok = match (rep.c00.value, closed) {
                    (Some(v), Some(c)) => rel(v, c) <= 1e-5,
                    (None, None) => true,
                    _ => false,
                };
                qs.push(Quantity::flag(format!("c00-closed-form(p={p})"), ok, "whole-space constant matches the power-weight closed form"));
            }
            _ => {}
        }
        rows.push(row(&[
            ("p", number(p)),
            ("c00", component_value(&rep.c00)),
            ("c10", component_value(&rep.c10)),
            ("c01", component_value(&rep.c01)),
            ("c11", component_value(&rep.c11)),
            ("combined", component_value(&rep.combined)),
            ("upper_bound", opt_number(rep.upper_bound)),
            ("lower_bound_exponent_applied", opt_number(rep.lower_bound_exponent_applied)),
            ("divergent", Value::Bool(rep.divergent)),
            ("witness", rep.witness.as_ref().map_or(Value::Null, |w| Value::String(w.component.clone()))),
        ]));
    }
    Ok((qs, rows))
}

/// Test functions used for norm lower bounds.
pub fn standard_tests(mu: &Weight, p: f64) -> Vec<TestFunction> {
    let cell = |k, j| DyadicCell { offset: 0.0, k, j };
    let mut v = vec![
        TestFunction::Constant(1.0),
        TestFunction::QuarterBallIndicator,
        TestFunction::RadialDual { p },
        TestFunction::TentIndicator { gamma: cell(1, 1), eta: cell(1, 2) },
    ];
    if let Weight::SharpExample { s, p } = mu {
        v.push(TestFunction::SharpExampleF { s: *s, p: *p });
    }
    v
}

pub struct NormBounds {
    pub lower: LowerBound,
    pub upper: Option<f64>,
    pub combined: Component,
    /// `combined^{1/(2p)} / lower`.
    pub constant: Option<f64>,
}

pub fn norm_bounds_at(mu: &Weight, p: f64, grid: &TentGrid, quad: &QuadratureSpec) -> Result<NormBounds, CliError> {
    let pe = ExponentPair::new(p)?;
    let rep = constants_report(mu, &pe, grid, quad)?;
    let lower = norm_lower_bound(mu, p, &standard_tests(mu, p), quad)?;
    let constant = rep.combined.value.map(|c| c.powf(1.0 / (2.0 * p)) / lower.value);
    Ok(NormBounds { lower, upper: rep.upper_bound, combined: rep.combined, constant })
}

fn norm_bounds(cfg: &ExperimentConfig) -> Result<(Vec<Quantity>, Rows), CliError> {
    let mu = weight(cfg)?;
    let (mut qs, mut rows) = (Vec::new(), Vec::new());
    for p in p_values(cfg, &[]) {
        let nb = norm_bounds_at(&mu, p, &cfg.grid, &cfg.quad)?;
        let ok = nb.upper.map_or(true, |u| nb.lower.value <= u);
        qs.push(
            Quantity::new(format!("lower-bound(p={p})"), Some(nb.lower.value), format!("largest test ratio, attained by {}", nb.lower.witness))
                .err(1e-4 * nb.lower.value)
                .expect("<= upper bound", ok),
        );
        qs.push(Quantity::new(format!("upper-bound(p={p})"), nb.upper, "norm upper bound from the tent constants"));
        qs.push(
            Quantity::new(format!("comparison-constant(p={p})"), nb.constant, "combined^(1/(2p)) <= C * lower bound")
                .expect("<= 100", nb.constant.map_or(true, |c| c <= 100.0)),
        );
        let mut r = row(&[
            ("p", number(p)),
            ("lower_bound", number(nb.lower.value)),
            ("witness", Value::String(nb.lower.witness.clone())),
            ("upper_bound", opt_number(nb.upper)),
            ("combined", opt_number(nb.combined.value)),
            ("comparison_constant", opt_number(nb.constant)),
        ]);
        for (name, v) in &nb.lower.ratios {
            let kind = name.split('(').next().unwrap_or(name);
            r.insert(format!("ratio_{}", kind.replace('-', "_")), opt_number(*v));
        }
        rows.push(r);
    }
    Ok((qs, rows))
}

fn bracket_quantity(name: String, b: &Bracket, claim: &str, ok: bool) -> Quantity {
    Quantity::new(name, Some(b.spread()), claim).expect(format!("bracket [{:.6}, {:.6}] bounded", b.min, b.max), ok)
}

fn tree_verify(cfg: &ExperimentConfig) -> Result<(Vec<Quantity>, Rows), CliError> {
    let forest = build_forest(&cfg.shifts, cfg.kmax)?;
    let (mut qs, mut rows) = (Vec::new(), Vec::new());
    let mut dump = String::new();
    for (i, tree) in forest.iter().enumerate() {
        let shift = cfg.shifts[i];
        let tiling = tiling_violations(tree);
        for d in tiling.iter().take(20) {
            qs.push(Quantity::flag("tiling", false, d.clone()));
        }
        let part = partition_violations(tree, 20_000, 11 + i as u64);
        let nest = nesting_violations(tree, 2, 17 + i as u64);
        qs.push(Quantity::flag(format!("tiling(shift={shift})"), tiling.is_empty(), "children halve the parent arc for every node"));
        qs.push(Quantity::flag(format!("partition(shift={shift})"), part == 0, "each point of generations <= kmax lies in exactly one kube"));
        qs.push(Quantity::flag(format!("nesting(shift={shift})"), nest == 0, "each dyadic tent lies in its parent tent"));
        rows.push(row(&[
            ("shift", number(shift)),
            ("nodes", Value::from(tree.node_count() as u64)),
            ("tiling_violations", Value::from(tiling.len() as u64)),
            ("partition_violations", Value::from(part as u64)),
            ("nesting_violations", Value::from(nest as u64)),
        ]));
        dump.push_str(&tree.dump());
    }
    let own = check_dump(&parse_dump(&dump)?, &cfg.shifts, cfg.kmax);
    qs.push(Quantity::flag("dump-roundtrip", own.is_empty(), "the emitted tree dump passes the structural check"));
    if let Some(path) = &cfg.dump {
        let text = std::fs::read_to_string(path)?;
        let diag = match parse_dump(&text) {
            Ok(records) => check_dump(&records, &cfg.shifts, cfg.kmax),
            Err(e) => vec![e.to_string()],
        };
        for d in &diag {
            qs.push(Quantity::flag("dump", false, d.clone()));
        }
        qs.push(Quantity::flag("dump-file", diag.is_empty(), format!("{} is a sound dump of the configured forest", path.display())));
    }
    let quad = QuadratureSpec::tent_default();
    let per_k = comparability_brackets(cfg.shifts[0], cfg.kmax.max(12), &quad)?;
    for (i, what) in ["dyadic tent", "kube", "Carleson tent"].iter().enumerate() {
        let all = per_k.iter().fold(Bracket::empty(), |a, b| a.merge(&b[i]));
        qs.push(bracket_quantity(format!("comparability[{what}]"), &all, "area over (1-|c|)^2 stays in a bracket with spread <= 50", all.min > 0.0 && all.spread() <= 50.0));
    }
    let pairs = pair_tent_bracket(1000, 3, &quad)?;
    qs.push(bracket_quantity("pair-tent".into(), &pairs, "smallest tent containing z, w has area comparable to |1 - z w-bar|^2", pairs.min > 0.0 && pairs.spread() <= 50.0));
    for &l in &cfg.shifts {
        let b = dyadic_in_carleson_bracket(l, cfg.kmax, &quad)?;
        qs.push(bracket_quantity(format!("dyadic-in-carleson(shift={l})"), &b, "each dyadic tent lies in a Carleson tent of comparable area", b.min >= 1.0 - 1e-9 && b.max <= 50.0));
    }
    Ok((qs, rows))
}
