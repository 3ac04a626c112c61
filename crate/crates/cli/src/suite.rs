//! Acceptance criteria and the verification suites built from them.

use std::f64::consts::PI;
use std::time::Instant;

use bergman_core::constants::{
    closed_form_power, closed_form_unweighted, combined_constant, component_constant, holder_floor,
    regularity_window, tables, Family, TentGrid,
};
use bergman_core::geometry::{build_forest, check_dump, nesting_violations, parse_dump, partition_violations, tiling_violations};
use bergman_core::operators::{
    coarse_spec, factored_ratio, norm_ratio, project, projection_pairing, q_plus_m_nu, radial_dual_ratio, sample_points, weighted_norm, Op,
    SparseModel,
};
use bergman_core::weights::{dual_weight, weight_eval};
use bergman_core::{DyadicCell, ExponentPair, QuadratureSpec, Region, TestFunction, Weight};
use rand::{Rng, SeedableRng};

use crate::config::{CliError, Level};
use crate::experiments::{generalized_window_checks, norm_bounds_at, SharpSweep};
use crate::report::Quantity;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), pass, detail: detail.into() }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: &'static str,
    pub title: &'static str,
    pub checks: Vec<Check>,
    pub seconds: f64,
    pub budget_s: f64,
}

impl Outcome {
    pub fn in_budget(&self) -> bool {
        self.seconds <= self.budget_s
    }

    pub fn pass(&self) -> bool {
        self.in_budget() && self.checks.iter().all(|c| c.pass)
    }

    pub fn failing(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

type Res<T> = Result<T, CliError>;

fn timed(id: &'static str, title: &'static str, budget_s: f64, f: impl FnOnce() -> Res<Vec<Check>>) -> Res<Outcome> {
    let t = Instant::now();
    let checks = f()?;
    Ok(Outcome { id, title, checks, seconds: t.elapsed().as_secs_f64(), budget_s })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn cell(k: u32, j: u64) -> DyadicCell {
    DyadicCell { offset: 0.0, k, j }
}

pub fn unweighted_closed_form(ps: &[f64]) -> Res<Vec<Check>> {
    let quad = QuadratureSpec::default();
    let mut out = Vec::new();
    for &p in ps {
        let pe = ExponentPair::new(p)?;
        let c = component_constant((0, 0), &Weight::Constant(1.0), &pe, &TentGrid::default(), &quad)?;
        let want = closed_form_unweighted(&pe).expect("inside the window");
        let err = c.value.map_or(f64::INFINITY, |v| rel(v, want));
        out.push(check(format!("c00 p={p}"), err <= 1e-6, format!("rel err {err:.2e}")));
    }
    Ok(out)
}

pub fn criterion_1() -> Res<Outcome> {
    timed("1", "unweighted closed form", 25.0, || {
        let mut out = Vec::new();
        for p in [1.5, 2.0, 2.5, 3.0, 3.5] {
            let t = Instant::now();
            out.extend(unweighted_closed_form(&[p])?);
            let secs = t.elapsed().as_secs_f64();
            out.push(check(format!("runtime p={p}"), secs <= 5.0, format!("{secs:.2} s")));
        }
        Ok(out)
    })
}

pub fn window_detection(divergent: &[f64], finite: &[f64], grid: &TentGrid) -> Res<Vec<Check>> {
    let quad = QuadratureSpec::default();
    let mut out = Vec::new();
    for (&p, want_div) in divergent.iter().map(|p| (p, true)).chain(finite.iter().map(|p| (p, false))) {
        let c = combined_constant(&Weight::Constant(1.0), &ExponentPair::new(p)?, grid, &quad)?;
        let got = if c.divergent { "divergent".to_string() } else { format!("{:.6}", c.value.unwrap()) };
        out.push(check(format!("combined p={p:.6}"), c.divergent == want_div, got));
    }
    Ok(out)
}

pub fn criterion_2() -> Res<Outcome> {
    timed("2", "window detection", 30.0, || {
        window_detection(&[1.2, 4.0 / 3.0, 4.0, 4.5], &[1.4, 2.0, 3.9], &TentGrid::default())
    })
}

/// Random `(a, b, p)` with `p ≥ 2` and `−2 < a < 2`.
pub fn random_power_cases(count: usize, seed: u64) -> Vec<(f64, f64, f64)> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (rng.gen_range(-1.9..1.9), rng.gen_range(-4.0..4.0), rng.gen_range(2.0..6.0)))
        .collect()
}

pub fn power_weight_cases(cases: &[(f64, f64, f64)]) -> Res<Vec<Check>> {
    let quad = QuadratureSpec::default();
    let mut out = Vec::new();
    for &(a, b, p) in cases {
        let pe = ExponentPair::new(p)?;
        let closed = closed_form_power(a, b, &pe);
        let window = regularity_window(Family::Power { a, b })?;
        let name = format!("a={a:.4} b={b:.4} p={p:.4}");
        out.push(check(
            format!("finiteness {name}"),
            closed.is_some() == window.contains(p),
            format!("closed form {}, window ({:.4}, {:.4})", closed.map_or("divergent".into(), |c| format!("{c:.6}")), window.lo, window.hi),
        ));
        let c = component_constant((0, 0), &Weight::PowerAB { a, b }, &pe, &TentGrid::default(), &quad)?;
        let (ok, detail) = match (c.value, closed) {
            (Some(v), Some(w)) => (rel(v, w) <= 1e-5, format!("rel err {:.2e}", rel(v, w))),
            (None, None) => (true, "both divergent".into()),
            (v, w) => (false, format!("quadrature {v:?} vs closed form {w:?}")),
        };
        out.push(check(format!("quadrature {name}"), ok, detail));
    }
    Ok(out)
}

pub fn criterion_3() -> Res<Outcome> {
    timed("3", "power weights", 120.0, || power_weight_cases(&random_power_cases(20, 2024)))
}

pub fn criterion_4() -> Res<Outcome> {
    timed("4", "generalized Hartogs windows", 60.0, || {
        let mut out = Vec::new();
        for (m, n) in [(1, 1), (2, 1), (3, 2)] {
            for q in generalized_window_checks(m, n, &QuadratureSpec::default())? {
                out.push(check(q.name.clone(), q.pass == Some(true), format!("{:?} (want {})", q.value, q.expected.unwrap_or_default())));
            }
        }
        Ok(out)
    })
}

pub fn sharp_checks(sw: &SharpSweep, p: f64) -> Vec<Check> {
    let slope = sw.ratio_slope();
    let up = sw.upper_slope();
    vec![
        check("ratio slope", (slope - 2.0 * p).abs() <= 0.2 * p, format!("{slope:.4} vs {} +- {}", 2.0 * p, 0.2 * p)),
        check("upper-bound slope", up.is_some_and(|u| (u + 2.0).abs() <= 0.3), format!("{up:?} vs -2 +- 0.3")),
    ]
}

pub fn criterion_5() -> Res<Outcome> {
    timed("5", "sharpness", 300.0, || {
        let sw = SharpSweep::run(&[0.2, 0.1, 0.05], 2.0, &TentGrid::default(), &QuadratureSpec::default())?;
        Ok(sharp_checks(&sw, 2.0))
    })
}

pub fn radial_dual_checks(exact: &[f64], monotone: &[f64]) -> Res<Vec<Check>> {
    let quad = QuadratureSpec::default();
    let mu = Weight::Constant(1.0);
    let ratio = |p: f64| -> Res<f64> {
        norm_ratio(Op::P, &TestFunction::RadialDual { p }, &mu, p, &quad)?
            .ok_or_else(|| CliError::Config(format!("radial-dual ratio undefined at p = {p}")))
    };
    let mut out = Vec::new();
    for &p in exact {
        let (v, want) = (ratio(p)?, radial_dual_ratio(p));
        out.push(check(format!("ratio p={p}"), rel(v, want) <= 0.01, format!("{v:.6} vs {want:.6}")));
    }
    let vals: Vec<f64> = monotone.iter().map(|&p| ratio(p)).collect::<Res<_>>()?;
    let increasing = vals.windows(2).all(|w| w[1] > w[0]);
    out.push(check("monotone towards 4", increasing, format!("{vals:.4?}")));
    // consistent with the (4 − p)^{−1/p} blow-up
    let worst = monotone.iter().zip(&vals).map(|(&p, &v)| rel(v, radial_dual_ratio(p))).fold(0.0, f64::max);
    out.push(check("growth rate", worst <= 0.01, format!("max rel deviation {worst:.2e} from the closed form")));
    Ok(out)
}

pub fn criterion_6() -> Res<Outcome> {
    timed("6", "radial-dual lower bound", 120.0, || radial_dual_checks(&[2.0, 3.0, 3.5], &[3.5, 3.8, 3.9, 3.95]))
}

pub fn tree_checks(shifts: &[f64], kmax: u32) -> Res<Vec<Check>> {
    let forest = build_forest(shifts, kmax)?;
    let mut out = Vec::new();
    let mut dump = String::new();
    for (i, t) in forest.iter().enumerate() {
        let tiling = tiling_violations(t);
        let part = partition_violations(t, 20_000, 11 + i as u64);
        let nest = nesting_violations(t, 2, 17 + i as u64);
        out.push(check(
            format!("tree shift={:.4}", shifts[i]),
            tiling.is_empty() && part == 0 && nest == 0,
            format!("{} nodes; tiling {}, partition {part}, nesting {nest} violations", t.node_count(), tiling.len()),
        ));
        dump.push_str(&t.dump());
    }
    let diag = check_dump(&parse_dump(&dump)?, shifts, kmax);
    out.push(check("dump", diag.is_empty(), format!("{} diagnostics", diag.len())));
    Ok(out)
}

pub fn holder_checks(weights: &[Weight], exponents: &[f64], grid: &TentGrid) -> Res<Vec<Check>> {
    let quad = QuadratureSpec::tent_default();
    let mut out = Vec::new();
    for mu in weights {
        for &p in exponents {
            let w = match mu {
                Weight::SharpExample { s, .. } => Weight::SharpExample { s: *s, p },
                w => w.clone(),
            };
            let pe = ExponentPair::new(p)?;
            let nu = dual_weight(&w, &pe)?;
            let (t1, t2, _) = tables(&w, &nu, &pe, grid, &quad)?;
            let floor = holder_floor(&t1, &t2);
            out.push(check(format!("holder {w} p={p}"), floor.map_or(true, |f| f >= 1.0 - 1e-6), format!("floor {floor:?}")));
        }
    }
    Ok(out)
}

pub fn reproducing_checks(points: usize) -> Res<Vec<Check>> {
    let quad = QuadratureSpec::with_tol(1e-6);
    let mono = |a: u32, b: i32| TestFunction::HoloMonomial { alpha: a, beta: b };
    let mut worst: f64 = 0.0;
    for z in sample_points(points, 0.9, 1) {
        let (z1, z2) = (z.z1(), z.z2.c());
        for (f, want) in [
            (TestFunction::Constant(1.0), z2 / z2),
            (mono(1, 0), z1),
            (mono(0, 1), z2),
            (mono(1, 1), z1 * z2),
            (mono(0, 2), z2 * z2),
        ] {
            let v = project(&f, &z, &quad)?;
            worst = worst.max((v - want).norm() / want.norm());
        }
    }
    Ok(vec![check("reproducing", worst <= 1e-6, format!("max rel err {worst:.2e} over {points} points"))])
}

pub fn self_adjoint_checks() -> Res<Vec<Check>> {
    let quad = coarse_spec();
    let kubes = TestFunction::Factored(
        bergman_core::operators::ChartFactor::indicator(Region::KubeDisc(cell(1, 1))),
        bergman_core::operators::ChartFactor::indicator(Region::KubeDisc(cell(2, 3))),
    );
    let pairs = [
        (TestFunction::Constant(1.0), TestFunction::QuarterBallIndicator),
        (TestFunction::QuarterBallIndicator, TestFunction::TentIndicator { gamma: cell(1, 1), eta: cell(1, 2) }),
        (TestFunction::RadialDual { p: 3.0 }, kubes.clone()),
        (TestFunction::HoloMonomial { alpha: 0, beta: 1 }, kubes.clone()),
        (TestFunction::TentIndicator { gamma: cell(1, 1), eta: cell(0, 1) }, kubes),
    ];
    let mut worst: f64 = 0.0;
    for (f, g) in &pairs {
        let a = projection_pairing(f, g, &quad)?;
        let b = projection_pairing(g, f, &quad)?.conj();
        worst = worst.max((a - b).norm() / a.norm());
    }
    let one = projection_pairing(&TestFunction::Constant(1.0), &TestFunction::QuarterBallIndicator, &quad)?;
    let want = PI * PI * 0.25f64.powi(6) / 2.0;
    Ok(vec![
        check("self-adjoint", worst <= 1e-4, format!("max rel asymmetry {worst:.2e} over {} pairs", pairs.len())),
        check("pairing oracle", rel(one.re, want) <= 1e-9, format!("<P1, 1_B> = {:.12}", one.re)),
    ])
}

pub fn sparse_checks(points: usize) -> Res<Vec<Check>> {
    let q = QuadratureSpec::with_tol(1e-5);
    let forest = build_forest(&[0.0, 1.0 / 3.0, 2.0 / 3.0], 10)?;
    let f = TestFunction::Constant(1.0);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let mut truncated = 0;
    for mu in [Weight::Constant(1.0), Weight::PowerAB { a: 0.5, b: 0.0 }, Weight::PowerAB { a: -0.5, b: 1.0 }] {
        let nu = dual_weight(&mu, &ExponentPair::new(2.0)?)?;
        let model = SparseModel::new(forest.clone(), &nu, &f, &q);
        for z in sample_points(points, 0.9, 6) {
            let s = model.total(&z)?;
            truncated += s.truncated as usize;
            let r = q_plus_m_nu(&f, &nu, &z, &q)? / s.value;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    Ok(vec![check(
        "sparse domination",
        lo > 0.0 && hi / lo <= 100.0 && truncated == 0,
        format!("ratio in [{lo:.4}, {hi:.4}], max/min {:.3} over {points} points x 3 weights", hi / lo),
    )])
}

pub fn duality_checks() -> Res<Vec<Check>> {
    let q = QuadratureSpec::default();
    let cases = [
        (TestFunction::Constant(2.0), Weight::PowerAB { a: 0.3, b: -0.5 }, 2.0),
        (TestFunction::QuarterBallIndicator, Weight::Constant(1.0), 3.0),
        (TestFunction::TentIndicator { gamma: cell(2, 1), eta: cell(1, 2) }, Weight::PowerAB { a: -0.5, b: 1.0 }, 1.5),
        (TestFunction::RadialDual { p: 3.0 }, Weight::Constant(1.0), 3.0),
        (TestFunction::SharpExampleF { s: 0.2, p: 2.0 }, Weight::SharpExample { s: 0.2, p: 2.0 }, 2.0),
    ];
    let mut worst: f64 = 0.0;
    for (f, mu, p) in &cases {
        let a = weighted_norm(f, mu, *p, &Region::WholeHartogs, &q)?.unwrap_or(f64::NAN);
        let mu2 = mu.product(&Weight::PowerAB { a: 0.0, b: *p });
        let b = weighted_norm(&f.divided_by_w2(), &mu2, *p, &Region::WholeHartogs, &q)?.unwrap_or(f64::NAN);
        worst = worst.max(if a.is_finite() && b.is_finite() { rel(b, a) } else { f64::INFINITY });
    }
    let mut inv: f64 = 0.0;
    for (mu, p) in [
        (Weight::Constant(2.0), 2.5),
        (Weight::PowerAB { a: 0.7, b: -0.4 }, 1.7),
        (Weight::SharpExample { s: 0.3, p: 2.0 }, 2.0),
    ] {
        let pe = ExponentPair::new(p)?;
        let nu = dual_weight(&mu, &pe)?;
        for z in sample_points(200, 0.95, 9) {
            let back = z.z2.abs().powf(-pe.p) * weight_eval(&nu, &z)?.powf(-pe.p / pe.q);
            inv = inv.max(rel(back, weight_eval(&mu, &z)?));
        }
    }
    let mut route: f64 = 0.0;
    for (f, mu, p) in [
        (TestFunction::RadialDual { p: 3.0 }, Weight::Constant(1.0), 3.0),
        (TestFunction::Constant(1.0), Weight::PowerAB { a: 0.0, b: 0.5 }, 2.5),
    ] {
        let a = norm_ratio(Op::P, &f, &mu, p, &q)?.unwrap_or(f64::NAN);
        let b = factored_ratio(&f, &mu, p, &q)?.unwrap_or(f64::NAN);
        route = route.max(if a.is_finite() && b.is_finite() { rel(b, a) } else { f64::INFINITY });
    }
    Ok(vec![
        check("operator identity", route <= 1e-8, format!("||P f|| / ||f|| against the Q M_nu route, max rel err {route:.2e}")),
        check("chart norm identity", worst <= 1e-8, format!("max rel err {worst:.2e} over {} families", cases.len())),
        check("dual-weight involution", inv <= 1e-8, format!("max rel err {inv:.2e}")),
    ])
}

pub fn criterion_7() -> Res<Outcome> {
    timed("7", "property suites", 900.0, || {
        let mut out = tree_checks(&[0.0, 1.0 / 3.0, 2.0 / 3.0], 10)?;
        out.extend(holder_checks(
            &[Weight::Constant(1.0), Weight::PowerAB { a: 0.7, b: -0.4 }, Weight::SharpExample { s: 0.3, p: 2.0 }],
            &[1.5, 1.8, 2.0],
            &TentGrid::default(),
        )?);
        out.extend(reproducing_checks(20)?);
        out.extend(self_adjoint_checks()?);
        out.extend(sparse_checks(100)?);
        out.extend(duality_checks()?);
        Ok(out)
    })
}

/// Weight and exponent pairs of the two-sided comparison.
pub fn consistency_configurations() -> Vec<(Weight, f64)> {
    let mut v = Vec::new();
    for mu in [Weight::Constant(1.0), Weight::PowerAB { a: 0.5, b: 0.0 }, Weight::PowerAB { a: -0.5, b: 1.0 }] {
        for p in [2.0, 3.0] {
            v.push((mu.clone(), p));
        }
    }
    v.push((Weight::SharpExample { s: 0.2, p: 2.0 }, 2.0));
    v
}

pub fn criterion_8() -> Res<Outcome> {
    timed("8", "two-sided consistency", 300.0, || {
        let quad = QuadratureSpec::default();
        let mut out = Vec::new();
        let mut global: f64 = 0.0;
        for (mu, p) in consistency_configurations() {
            let nb = norm_bounds_at(&mu, p, &TentGrid::default(), &quad)?;
            let ok = nb.upper.map_or(true, |u| nb.lower.value <= u);
            out.push(check(
                format!("{mu} p={p}"),
                ok,
                format!("lower {:.4} ({}) <= upper {:?}, C needed {:?}", nb.lower.value, nb.lower.witness, nb.upper, nb.constant),
            ));
            if let Some(c) = nb.constant {
                global = global.max(c);
            }
        }
        out.push(check("global C", global <= 100.0, format!("C = {global:.4}")));
        Ok(out)
    })
}

/// Quick subset: smaller versions of the criteria, well under a minute.
pub fn quick_outcomes() -> Res<Vec<Outcome>> {
    Ok(vec![
        timed("q1", "unweighted closed form", 10.0, || unweighted_closed_form(&[2.0, 3.0]))?,
        timed("q2", "window detection", 30.0, || window_detection(&[1.2, 4.5], &[2.0], &TentGrid { i_max: 6, angles: 16 }))?,
        timed("q3", "power weights", 30.0, || power_weight_cases(&random_power_cases(5, 7)))?,
        timed("q4", "generalized windows", 30.0, || {
            let mut out = Vec::new();
            for q in generalized_window_checks(1, 1, &QuadratureSpec::default())? {
                out.push(check(q.name.clone(), q.pass == Some(true), format!("{:?}", q.value)));
            }
            Ok(out)
        })?,
        timed("q6", "radial-dual lower bound", 30.0, || radial_dual_checks(&[2.0], &[3.0, 3.5]))?,
        timed("q7", "property suites", 30.0, || {
            let mut out = tree_checks(&[0.0, 1.0 / 3.0, 2.0 / 3.0], 8)?;
            out.extend(reproducing_checks(3)?);
            out.extend(self_adjoint_checks()?);
            out.extend(sparse_checks(10)?);
            out.extend(duality_checks()?);
            Ok(out)
        })?,
    ])
}

pub fn full_outcomes() -> Res<Vec<Outcome>> {
    Ok(vec![criterion_1()?, criterion_2()?, criterion_3()?, criterion_4()?, criterion_5()?, criterion_6()?, criterion_7()?, criterion_8()?])
}

/// Runs a suite and turns every check into a quantity. Runtimes are left out
/// so that the report stays reproducible.
pub fn verify_suite(level: Level) -> Res<(Vec<Quantity>, Vec<std::collections::BTreeMap<String, serde_json::Value>>)> {
    let outcomes = match level {
        Level::Quick => quick_outcomes()?,
        Level::Full => full_outcomes()?,
    };
    let mut qs = Vec::new();
    for o in &outcomes {
        for c in &o.checks {
            qs.push(Quantity::flag(format!("{}: {}", o.id, c.name), c.pass, format!("{}: {}", o.title, c.detail)));
        }
    }
    Ok((qs, Vec::new()))
}
