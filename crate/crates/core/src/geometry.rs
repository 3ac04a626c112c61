//! Hyperbolic geometry of the unit disc, shifted Bergman trees, and the
//! regions (kubes, tents, products) used by every integral in the crate.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, Measure, QuadratureSpec};

/// Hyperbolic width of one generation annulus, `ln 2 / 2`.
pub const GEN_STEP: f64 = std::f64::consts::LN_2 / 2.0;

/// Largest generation a tree may be built to.
pub const MAX_GENERATION: u32 = 22;

pub const DEFAULT_KMAX: u32 = 14;

/// Quadrature nodes never come closer than this to the unit circle.
pub const BOUNDARY_MARGIN: f64 = 1e-13;

pub const DEFAULT_SHIFTS: [f64; 3] = [0.0, 1.0 / 3.0, 2.0 / 3.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscPoint {
    pub re: f64,
    pub im: f64,
}

impl DiscPoint {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        let p = DiscPoint { re, im };
        if !(p.abs() < 1.0) {
            return Err(Error::Domain(format!("|z| = {} is not < 1", p.abs())));
        }
        Ok(p)
    }

    pub fn origin() -> Self {
        DiscPoint { re: 0.0, im: 0.0 }
    }

    pub fn from_complex(z: Complex64) -> Result<Self> {
        Self::new(z.re, z.im)
    }

    pub fn polar(r: f64, theta: f64) -> Result<Self> {
        Self::from_complex(Complex64::from_polar(r, theta))
    }

    pub fn c(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn abs(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

/// A point of the Hartogs triangle in chart coordinates `(t, z2) = (z1/z2, z2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HartogsPoint {
    pub t: DiscPoint,
    pub z2: DiscPoint,
}

impl HartogsPoint {
    pub fn new(t: DiscPoint, z2: DiscPoint) -> Result<Self> {
        if z2.abs() == 0.0 {
            return Err(Error::Domain("z2 = 0 is not in the Hartogs triangle".into()));
        }
        Ok(HartogsPoint { t, z2 })
    }

    pub fn from_chart(t: Complex64, z2: Complex64) -> Result<Self> {
        Self::new(DiscPoint::from_complex(t)?, DiscPoint::from_complex(z2)?)
    }

    /// Build from ambient coordinates; requires `|z1| < |z2| < 1`.
    pub fn from_ambient(z1: Complex64, z2: Complex64) -> Result<Self> {
        if !(z1.norm() < z2.norm() && z2.norm() < 1.0) {
            return Err(Error::Domain(format!(
                "({z1}, {z2}) violates |z1| < |z2| < 1"
            )));
        }
        Self::from_chart(z1 / z2, z2)
    }

    pub fn z1(&self) -> Complex64 {
        self.t.c() * self.z2.c()
    }
}

fn check_disc(z: Complex64, name: &str) -> Result<()> {
    if z.norm() < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("|{name}| = {} is not < 1", z.norm())))
    }
}

/// Bergman distance `½·log((1+ρ)/(1−ρ))` with ρ the pseudo-hyperbolic distance.
pub fn bergman_distance(z: DiscPoint, w: DiscPoint) -> Result<f64> {
    let (z, w) = (z.c(), w.c());
    check_disc(z, "z")?;
    check_disc(w, "w")?;
    let rho = (z - w).norm() / (Complex64::new(1.0, 0.0) - z.conj() * w).norm();
    Ok(rho.min(1.0).atanh())
}

/// Euclidean radius of the hyperbolic circle of radius `k·r` about the origin.
pub fn generation_radius(k: u32) -> f64 {
    let p = 2f64.powi(k as i32);
    (p - 1.0) / (p + 1.0)
}

/// Euclidean radius at hyperbolic distance `d` from the origin.
pub fn radius_at(d: f64) -> f64 {
    d.tanh()
}

/// Angle of `z` as a fraction of a full turn, in [0, 1).
pub fn angle_turns(z: Complex64) -> f64 {
    let a = z.im.atan2(z.re) / (2.0 * PI);
    let a = if a < 0.0 { a + 1.0 } else { a };
    if a >= 1.0 {
        0.0
    } else {
        a
    }
}

/// Generation of `z`: the `k` with `R_k ≤ |z| < R_{k+1}`.
pub fn generation_of(z: Complex64) -> u32 {
    let m = z.norm();
    if m >= 1.0 {
        return u32::MAX;
    }
    let mut k = (m.atanh() / GEN_STEP).floor().max(0.0) as u32;
    while k > 0 && m < generation_radius(k) {
        k -= 1;
    }
    while m >= generation_radius(k + 1) {
        k += 1;
    }
    k
}

/// Identifies the kube `K_j^k` of the tree with index `shift`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TreeNode {
    pub shift: usize,
    pub k: u32,
    pub j: u64,
}

impl TreeNode {
    pub fn root(shift: usize) -> Self {
        TreeNode { shift, k: 0, j: 1 }
    }

    pub fn is_root(&self) -> bool {
        self.k == 0
    }

    pub fn parent(&self) -> Option<TreeNode> {
        if self.k == 0 {
            None
        } else {
            Some(TreeNode { shift: self.shift, k: self.k - 1, j: (self.j + 1) / 2 })
        }
    }

    pub fn children(&self) -> [TreeNode; 2] {
        let k = self.k + 1;
        [
            TreeNode { shift: self.shift, k, j: 2 * self.j - 1 },
            TreeNode { shift: self.shift, k, j: 2 * self.j },
        ]
    }

    /// The node itself followed by its ancestors up to the root.
    pub fn lineage(&self) -> Vec<TreeNode> {
        let mut out = vec![*self];
        let mut cur = *self;
        while let Some(p) = cur.parent() {
            out.push(p);
            cur = p;
        }
        out
    }

    pub fn is_ancestor_or_self_of(&self, other: &TreeNode) -> bool {
        if self.shift != other.shift || self.k > other.k {
            return false;
        }
        let d = other.k - self.k;
        ((other.j - 1) >> d) + 1 == self.j
    }
}

/// Pure geometric description of a kube: shift offset, generation and arc index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DyadicCell {
    pub offset: f64,
    pub k: u32,
    pub j: u64,
}

impl DyadicCell {
    pub fn arc_len(&self) -> f64 {
        2f64.powi(-(self.k as i32))
    }

    /// Arc start as a fraction of a turn (not reduced mod 1).
    pub fn arc_start(&self) -> f64 {
        (self.j as f64 - 1.0) * self.arc_len() + self.offset
    }

    pub fn in_arc(&self, z: Complex64) -> bool {
        if self.k == 0 {
            return true;
        }
        arc_index(angle_turns(z), self.offset, self.k) == self.j
    }

    pub fn center(&self) -> Complex64 {
        if self.k == 0 {
            return Complex64::new(0.0, 0.0);
        }
        let r = radius_at((self.k as f64 + 0.5) * GEN_STEP);
        let a = 2.0 * PI * ((self.j as f64 - 0.5) * self.arc_len() + self.offset);
        Complex64::from_polar(r, a)
    }

    pub fn kube_contains(&self, z: Complex64) -> bool {
        z.norm() < 1.0 && generation_of(z) == self.k && self.in_arc(z)
    }

    pub fn tent_contains(&self, z: Complex64) -> bool {
        z.norm() < 1.0 && z.norm() >= generation_radius(self.k) && self.in_arc(z)
    }

    pub fn kube_area(&self) -> f64 {
        let (a, b) = (generation_radius(self.k), generation_radius(self.k + 1));
        PI * self.arc_len() * (b * b - a * a)
    }

    pub fn tent_area(&self) -> f64 {
        let a = generation_radius(self.k);
        PI * self.arc_len() * (1.0 - a * a)
    }
}

/// Arc index `j ∈ [1, 2^k]` of the half-open dyadic arc containing angle `turns`.
pub fn arc_index(turns: f64, offset: f64, k: u32) -> u64 {
    let n = 1u64 << k;
    let mut x = (turns - offset).rem_euclid(1.0);
    if x >= 1.0 {
        x = 0.0;
    }
    let j = (x * n as f64).floor() as u64;
    j.min(n - 1) + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub center: Complex64,
    pub parent_j: u64,
}

/// One shifted dyadic decomposition of the disc.
#[derive(Debug, Clone, PartialEq)]
pub struct BergmanTree {
    pub index: usize,
    pub offset: f64,
    pub kmax: u32,
    pub step: f64,
    generations: Vec<Vec<NodeRecord>>,
}

pub fn build_tree(offset: f64, kmax: u32) -> Result<BergmanTree> {
    build_indexed_tree(0, offset, kmax)
}

pub fn build_indexed_tree(index: usize, offset: f64, kmax: u32) -> Result<BergmanTree> {
    if !(0.0..1.0).contains(&offset) {
        return Err(Error::Config(format!("shift offset {offset} not in [0,1)")));
    }
    if kmax < 1 {
        return Err(Error::Config("K_max must be at least 1".into()));
    }
    if kmax > MAX_GENERATION {
        return Err(Error::Resource(format!(
            "K_max = {kmax} exceeds the cap {MAX_GENERATION} (2^{} nodes)",
            kmax + 1
        )));
    }
    let generations = (0..=kmax)
        .map(|k| {
            (1..=(1u64 << k))
                .map(|j| NodeRecord {
                    center: DyadicCell { offset, k, j }.center(),
                    parent_j: if k == 0 { 0 } else { (j + 1) / 2 },
                })
                .collect()
        })
        .collect();
    Ok(BergmanTree { index, offset, kmax, step: GEN_STEP, generations })
}

/// Trees for each offset, indexed in order.
pub fn build_forest(offsets: &[f64], kmax: u32) -> Result<Vec<BergmanTree>> {
    offsets
        .iter()
        .enumerate()
        .map(|(i, &l)| build_indexed_tree(i, l, kmax))
        .collect()
}

impl BergmanTree {
    pub fn node_count(&self) -> usize {
        self.generations.iter().map(Vec::len).sum()
    }

    pub fn generation(&self, k: u32) -> &[NodeRecord] {
        &self.generations[k as usize]
    }

    pub fn cell(&self, node: TreeNode) -> DyadicCell {
        DyadicCell { offset: self.offset, k: node.k, j: node.j }
    }

    pub fn record(&self, node: TreeNode) -> Option<&NodeRecord> {
        self.generations
            .get(node.k as usize)
            .and_then(|g| g.get((node.j - 1) as usize))
    }

    pub fn nodes(&self) -> impl Iterator<Item = TreeNode> + '_ {
        let shift = self.index;
        (0..=self.kmax).flat_map(move |k| (1..=(1u64 << k)).map(move |j| TreeNode { shift, k, j }))
    }

    /// Node whose kube contains `z`.
    pub fn locate(&self, z: DiscPoint) -> Result<TreeNode> {
        let zc = z.c();
        let k = generation_of(zc);
        if k > self.kmax {
            return Err(Error::OutOfRange {
                kmax: self.kmax,
                distance: zc.norm().atanh(),
            });
        }
        Ok(self.node_at(zc, k))
    }

    /// Like [`locate`](Self::locate) but points beyond `K_max` map to the
    /// generation-`K_max` node on their ray.
    pub fn locate_clamped(&self, z: Complex64) -> TreeNode {
        let k = generation_of(z).min(self.kmax);
        self.node_at(z, k)
    }

    fn node_at(&self, z: Complex64, k: u32) -> TreeNode {
        let j = if k == 0 { 1 } else { arc_index(angle_turns(z), self.offset, k) };
        TreeNode { shift: self.index, k, j }
    }

    /// Newline-delimited `shift,k,j,center_re,center_im,parent_j` records.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (k, gen) in self.generations.iter().enumerate() {
            for (i, rec) in gen.iter().enumerate() {
                s.push_str(&format!(
                    "{},{},{},{:.17e},{:.17e},{}\n",
                    self.index,
                    k,
                    i + 1,
                    rec.center.re,
                    rec.center.im,
                    rec.parent_j
                ));
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DumpRecord {
    pub shift: usize,
    pub k: u32,
    pub j: u64,
    pub center: Complex64,
    pub parent_j: u64,
}

pub fn parse_dump(text: &str) -> Result<Vec<DumpRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 6 {
                return Err(Error::Parse(format!("line {}: expected 6 fields", n + 1)));
            }
            let bad = |what: &str| Error::Parse(format!("line {}: bad {what}", n + 1));
            Ok(DumpRecord {
                shift: f[0].parse().map_err(|_| bad("shift"))?,
                k: f[1].parse().map_err(|_| bad("k"))?,
                j: f[2].parse().map_err(|_| bad("j"))?,
                center: Complex64::new(
                    f[3].parse().map_err(|_| bad("center_re"))?,
                    f[4].parse().map_err(|_| bad("center_im"))?,
                ),
                parent_j: f[5].parse().map_err(|_| bad("parent_j"))?,
            })
        })
        .collect()
}

/// Structural check of a dump against the tree it claims to be.
/// Returns one diagnostic per offending node; empty means the dump is sound.
pub fn check_dump(records: &[DumpRecord], offsets: &[f64], kmax: u32) -> Vec<String> {
    let mut problems = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for r in records {
        let node = format!("node (shift={}, k={}, j={})", r.shift, r.k, r.j);
        let Some(&offset) = offsets.get(r.shift) else {
            problems.push(format!("{node}: unknown shift index"));
            continue;
        };
        if r.k > kmax || r.j < 1 || r.j > (1u64 << r.k.min(63)) {
            problems.push(format!("{node}: index out of range"));
            continue;
        }
        if !seen.insert((r.shift, r.k, r.j)) {
            problems.push(format!("{node}: duplicate record"));
        }
        let cell = DyadicCell { offset, k: r.k, j: r.j };
        if (r.center - cell.center()).norm() > 1e-9 {
            problems.push(format!("{node}: center {} differs from {}", r.center, cell.center()));
        }
        if !cell.kube_contains(r.center) {
            problems.push(format!("{node}: center lies outside its kube"));
        }
        let want_parent = if r.k == 0 { 0 } else { (r.j + 1) / 2 };
        if r.parent_j != want_parent {
            problems.push(format!("{node}: parent_j {} should be {want_parent}", r.parent_j));
        }
    }
    for (s, _) in offsets.iter().enumerate() {
        let count = seen.iter().filter(|(sh, _, _)| *sh == s).count();
        let want = (1usize << (kmax + 1)) - 1;
        if count != want {
            problems.push(format!("shift {s}: {count} nodes, expected {want}"));
        }
    }
    problems
}

/// Carleson tent membership, `|1 − w̄·z/|z|| < 1 − |z|`, with `T_0 = 𝔻`.
pub fn carleson_contains(apex: Complex64, w: Complex64) -> bool {
    if w.norm() >= 1.0 {
        return false;
    }
    let m = apex.norm();
    if m == 0.0 {
        return true;
    }
    (Complex64::new(1.0, 0.0) - w.conj() * apex / m).norm() < 1.0 - m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Region {
    WholeDisc,
    BallDisc { radius: f64 },
    CarlesonTentDisc { apex: DiscPoint },
    DyadicTentDisc(DyadicCell),
    KubeDisc(DyadicCell),
    /// Product `R1 × R2` in chart coordinates `(t, z2)`.
    ProductTentHartogs(Box<Region>, Box<Region>),
    WholeHartogs,
    /// `B_{1/4} × B_{1/4}` in chart coordinates.
    QuarterBallProduct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point {
    Disc(DiscPoint),
    Hartogs(HartogsPoint),
}

impl Region {
    pub fn quarter_ball() -> Region {
        Region::BallDisc { radius: 0.25 }
    }

    pub fn is_hartogs(&self) -> bool {
        matches!(
            self,
            Region::ProductTentHartogs(..) | Region::WholeHartogs | Region::QuarterBallProduct
        )
    }

    /// Chart factors of a Hartogs region.
    pub fn factors(&self) -> Option<(Region, Region)> {
        match self {
            Region::ProductTentHartogs(a, b) => Some(((**a).clone(), (**b).clone())),
            Region::WholeHartogs => Some((Region::WholeDisc, Region::WholeDisc)),
            Region::QuarterBallProduct => Some((Region::quarter_ball(), Region::quarter_ball())),
            _ => None,
        }
    }

    pub fn contains_disc(&self, w: Complex64) -> bool {
        if w.norm() >= 1.0 {
            return false;
        }
        match self {
            Region::WholeDisc => true,
            Region::BallDisc { radius } => w.norm() < *radius,
            Region::CarlesonTentDisc { apex } => carleson_contains(apex.c(), w),
            Region::DyadicTentDisc(c) => c.tent_contains(w),
            Region::KubeDisc(c) => c.kube_contains(w),
            _ => false,
        }
    }

    pub fn contains_hartogs(&self, p: &HartogsPoint) -> bool {
        match self.factors() {
            Some((a, b)) => p.z2.abs() > 0.0 && a.contains_disc(p.t.c()) && b.contains_disc(p.z2.c()),
            None => false,
        }
    }
}

pub fn region_membership(region: &Region, point: &Point) -> bool {
    match point {
        Point::Disc(z) => region.contains_disc(z.c()),
        Point::Hartogs(p) => region.contains_hartogs(p),
    }
}

/// Measure of a region. Kubes, dyadic tents and discs use exact polar formulas
/// under `dV`; everything else goes through quadrature.
pub fn region_area(region: &Region, measure: &Measure, quad: &QuadratureSpec) -> Result<f64> {
    if matches!(measure, Measure::LebesgueVolume) {
        match region {
            Region::WholeDisc => return Ok(PI),
            Region::BallDisc { radius } => return Ok(PI * radius * radius),
            Region::KubeDisc(c) => return Ok(c.kube_area()),
            Region::DyadicTentDisc(c) => return Ok(c.tent_area()),
            _ => {}
        }
    }
    let got = quadrature::measure_of(region, measure, quad)?;
    got.within(quad.rel_tol.max(1e-12))
}

/// Empirical bracket `[min, max]` of a ratio over a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub min: f64,
    pub max: f64,
}

impl Bracket {
    pub fn empty() -> Self {
        Bracket { min: f64::INFINITY, max: f64::NEG_INFINITY }
    }

    pub fn push(&mut self, x: f64) {
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    pub fn spread(&self) -> f64 {
        self.max / self.min
    }

    pub fn merge(&self, o: &Bracket) -> Bracket {
        Bracket { min: self.min.min(o.min), max: self.max.max(o.max) }
    }
}

/// Fraction-of-points check: every random point in generations `≤ kmax`
/// lies in exactly one kube of the tree. Returns the number of violations.
pub fn partition_violations(tree: &BergmanTree, samples: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rmax = generation_radius(tree.kmax + 1);
    let mut bad = 0;
    for _ in 0..samples {
        let z = Complex64::from_polar(rng.gen::<f64>().sqrt() * rmax, rng.gen::<f64>() * 2.0 * PI);
        let k = generation_of(z);
        if k > tree.kmax {
            continue;
        }
        // only the generation-k kubes can contain z; scan all of them
        let hits = (1..=(1u64 << k))
            .filter(|&j| tree.cell(TreeNode { shift: tree.index, k, j }).kube_contains(z))
            .count();
        let other = [k.wrapping_sub(1), k + 1]
            .iter()
            .filter(|&&kk| kk <= tree.kmax)
            .any(|&kk| {
                let node = tree.node_at(z, kk);
                tree.cell(node).kube_contains(z)
            });
        let located = tree.locate(DiscPoint { re: z.re, im: z.im }).ok();
        let agrees = located.map(|n| tree.cell(n).kube_contains(z)).unwrap_or(false);
        if hits != 1 || other || !agrees {
            bad += 1;
        }
    }
    bad
}

/// Exhaustive structural check: the two children of every node split its arc
/// into equal halves and sit one generation out. Returns one line per bad node.
pub fn tiling_violations(tree: &BergmanTree) -> Vec<String> {
    let mut out = Vec::new();
    for node in tree.nodes() {
        if node.k == tree.kmax {
            continue;
        }
        let pc = tree.cell(node);
        let [a, b] = node.children().map(|c| tree.cell(c));
        let half = 0.5 * pc.arc_len();
        let start = pc.arc_start();
        let ok = (a.arc_len() - half).abs() < 1e-15
            && (b.arc_len() - half).abs() < 1e-15
            && (a.arc_start() - start).abs() < 1e-12
            && (b.arc_start() - (a.arc_start() + half)).abs() < 1e-12
            && a.k == node.k + 1
            && b.k == node.k + 1;
        if !ok {
            out.push(format!("node (shift={}, k={}, j={}): children do not tile the arc", node.shift, node.k, node.j));
        }
        if tree.record(node).is_none() {
            out.push(format!("node (shift={}, k={}, j={}): missing record", node.shift, node.k, node.j));
        }
    }
    out
}

/// Sample points of each dyadic tent and verify they lie in the parent tent.
pub fn nesting_violations(tree: &BergmanTree, per_node: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for node in tree.nodes() {
        let Some(parent) = node.parent() else { continue };
        let (c, pc) = (tree.cell(node), tree.cell(parent));
        for _ in 0..per_node {
            let z = sample_tent(&c, &mut rng);
            if !c.tent_contains(z) || !pc.tent_contains(z) {
                bad += 1;
            }
        }
    }
    bad
}

/// Uniform-in-parameters sample of a point of the dyadic tent of `c`.
pub fn sample_tent<R: Rng>(c: &DyadicCell, rng: &mut R) -> Complex64 {
    let r0 = generation_radius(c.k);
    let r = r0 + (1.0 - r0) * rng.gen::<f64>() * (1.0 - 1e-12);
    let a = if c.k == 0 {
        rng.gen::<f64>()
    } else {
        c.arc_start() + c.arc_len() * rng.gen::<f64>()
    };
    Complex64::from_polar(r, 2.0 * PI * a)
}

/// Brackets of `|K̂_α|`, `|K_α|`, `|T_{c_α}|` against `(1 − |c_α|)^2`, one per
/// generation in `1..=kmax`.
pub fn comparability_brackets(
    offset: f64,
    kmax: u32,
    quad: &QuadratureSpec,
) -> Result<Vec<[Bracket; 3]>> {
    (1..=kmax)
        .map(|k| {
            // area ratios depend on j only through rotation; sample a few arcs
            let mut b = [Bracket::empty(); 3];
            let n = 1u64 << k;
            for j in [1, n / 2 + 1, n] {
                let c = DyadicCell { offset, k, j };
                let s = (1.0 - c.center().norm()).powi(2);
                let apex = DiscPoint::from_complex(c.center())?;
                let t = region_area(&Region::CarlesonTentDisc { apex }, &Measure::LebesgueVolume, quad)?;
                b[0].push(c.tent_area() / s);
                b[1].push(c.kube_area() / s);
                b[2].push(t / s);
            }
            Ok(b)
        })
        .collect()
}

/// Half-width `h` and direction of the smallest Carleson tent containing both points.
pub fn smallest_common_tent(z: Complex64, w: Complex64) -> (f64, Complex64) {
    let cost = |a: f64| {
        let u = Complex64::from_polar(1.0, a);
        (u - z).norm().max((u - w).norm())
    };
    let n = 720;
    let (mut best, mut arg) = (f64::INFINITY, 0.0);
    for i in 0..n {
        let a = 2.0 * PI * i as f64 / n as f64;
        let c = cost(a);
        if c < best {
            best = c;
            arg = a;
        }
    }
    // golden-section polish on the bracketing cell
    let (mut lo, mut hi) = (arg - 2.0 * PI / n as f64, arg + 2.0 * PI / n as f64);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if cost(a) < cost(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let a = 0.5 * (lo + hi);
    (cost(a), Complex64::from_polar(1.0, a))
}

/// Bracket of `|T| / |1 − z·w̄|^2` over random pairs, `T` the smallest Carleson
/// tent containing both points.
pub fn pair_tent_bracket(pairs: usize, seed: u64, quad: &QuadratureSpec) -> Result<Bracket> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Bracket::empty();
    for _ in 0..pairs {
        let mut draw = || {
            let r = 1.0 - 10f64.powf(-rng.gen_range(0.3..4.0));
            Complex64::from_polar(r, rng.gen::<f64>() * 2.0 * PI)
        };
        let (z, w) = (draw(), draw());
        let (h, u) = smallest_common_tent(z, w);
        let area = if h >= 1.0 {
            PI
        } else {
            let apex = DiscPoint::from_complex(u * (1.0 - h))?;
            region_area(&Region::CarlesonTentDisc { apex }, &Measure::LebesgueVolume, quad)?
        };
        b.push(area / (Complex64::new(1.0, 0.0) - z * w.conj()).norm_sqr());
    }
    Ok(b)
}

/// For every dyadic tent up to `kmax`, the smallest Carleson tent (or the
/// whole disc) containing it; returns the bracket of area ratios `|T| / |K̂|`.
pub fn dyadic_in_carleson_bracket(offset: f64, kmax: u32, quad: &QuadratureSpec) -> Result<Bracket> {
    let mut b = Bracket::empty();
    for k in 1..=kmax {
        // the ratio is rotation invariant, so one arc per generation suffices
        let c = DyadicCell { offset, k, j: 1 };
        let a0 = 2.0 * PI * c.arc_start();
        let a1 = a0 + 2.0 * PI * c.arc_len();
        let u = Complex64::from_polar(1.0, 0.5 * (a0 + a1));
        let corner = Complex64::from_polar(generation_radius(k), a0);
        let h = (u - corner).norm() * (1.0 + 1e-9);
        let area = if h >= 1.0 {
            PI
        } else {
            let apex = DiscPoint::from_complex(u * (1.0 - h))?;
            let tent = Region::CarlesonTentDisc { apex };
            for i in 0..=8 {
                for e in [0.0, 0.5, 0.999] {
                    let r = generation_radius(k) + (1.0 - generation_radius(k)) * e;
                    let w = Complex64::from_polar(r, a0 + (a1 - a0) * (i as f64 + 0.5) / 9.0);
                    if !tent.contains_disc(w) {
                        return Err(Error::Domain(format!("tent for k={k} misses {w}")));
                    }
                }
            }
            region_area(&tent, &Measure::LebesgueVolume, quad)?
        };
        b.push(area / c.tent_area());
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn distance_basics() {
        let o = DiscPoint::origin();
        assert_eq!(bergman_distance(o, o).unwrap(), 0.0);
        let third = DiscPoint::new(1.0 / 3.0, 0.0).unwrap();
        assert_relative_eq!(bergman_distance(o, third).unwrap(), GEN_STEP, max_relative = 1e-14);
        assert!(bergman_distance(o, DiscPoint { re: 1.0, im: 0.0 }).is_err());
    }

    #[test]
    fn distance_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let mut p = || DiscPoint::polar(rng.gen::<f64>().sqrt() * 0.999, rng.gen::<f64>() * 6.3).unwrap();
            let (z, w) = (p(), p());
            let (a, b) = (bergman_distance(z, w).unwrap(), bergman_distance(w, z).unwrap());
            assert_relative_eq!(a, b, max_relative = 1e-12, epsilon = 1e-15);
        }
    }

    #[test]
    fn radii() {
        assert_eq!(generation_radius(0), 0.0);
        assert_relative_eq!(generation_radius(1), 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(generation_radius(2), 3.0 / 5.0, max_relative = 1e-15);
        for k in 0..=20 {
            let r = generation_radius(k);
            let d = bergman_distance(DiscPoint::origin(), DiscPoint::new(r, 0.0).unwrap()).unwrap();
            assert!((d - k as f64 * GEN_STEP).abs() < 1e-12 * (1.0 + k as f64), "k={k}");
            // 1 - R = 2/(1 + 2^k) sits between 2^-k and 2·2^-k
            let q = (1.0 - r) * 2f64.powi(k as i32);
            assert!((1.0..=2.0 + 1e-9).contains(&q), "k={k} q={q}");
        }
    }

    #[test]
    fn tiling_is_exact() {
        for off in [0.0, 1.0 / 3.0, 2.0 / 3.0] {
            let t = build_tree(off, 10).unwrap();
            assert!(tiling_violations(&t).is_empty());
        }
    }

    #[test]
    fn tree_counts_and_centers() {
        let t = build_tree(0.0, 3).unwrap();
        assert_eq!(t.node_count(), 15);
        assert_eq!(t.record(TreeNode::root(0)).unwrap().center, Complex64::new(0.0, 0.0));
        for node in t.nodes() {
            let c = t.record(node).unwrap().center;
            assert!(t.cell(node).kube_contains(c), "{node:?}");
        }
        assert!(build_tree(0.0, MAX_GENERATION + 1).is_err());
        assert!(build_tree(1.0, 3).is_err());
        assert!(build_tree(0.0, 0).is_err());
    }

    #[test]
    fn locate_examples() {
        let t = build_tree(0.0, 8).unwrap();
        assert_eq!(t.locate(DiscPoint::origin()).unwrap(), TreeNode::root(0));
        let n = t.locate(DiscPoint::new(0.5, 0.0).unwrap()).unwrap();
        assert_eq!((n.k, n.j), (1, 1));
        let far = DiscPoint::new(generation_radius(9) + 1e-6, 0.0).unwrap();
        assert!(matches!(t.locate(far), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn locate_matches_brute_force() {
        let t = build_tree(0.3, 8).unwrap();
        assert_eq!(partition_violations(&t, 10_000, 11), 0);
    }

    #[test]
    fn carleson_examples() {
        let z = Complex64::new(0.3, -0.2);
        assert!(carleson_contains(Complex64::new(0.0, 0.0), z));
        assert!(carleson_contains(Complex64::new(0.8, 0.0), Complex64::new(0.9, 0.0)));
        assert!(!carleson_contains(Complex64::new(0.8, 0.0), Complex64::new(0.7, 0.0)));
    }

    #[test]
    fn tent_nesting() {
        let t = build_tree(0.0, 6).unwrap();
        assert_eq!(nesting_violations(&t, 100, 3), 0);
    }

    #[test]
    fn lineage_and_ancestry() {
        let n = TreeNode { shift: 0, k: 4, j: 11 };
        let line = n.lineage();
        assert_eq!(line.len(), 5);
        assert_eq!(line[1], TreeNode { shift: 0, k: 3, j: 6 });
        assert!(line.iter().all(|a| a.is_ancestor_or_self_of(&n)));
        assert!(!TreeNode { shift: 0, k: 3, j: 5 }.is_ancestor_or_self_of(&n));
        for c in n.children() {
            assert_eq!(c.parent(), Some(n));
        }
    }

    #[test]
    fn areas() {
        let q = QuadratureSpec::default();
        assert_relative_eq!(region_area(&Region::WholeDisc, &Measure::LebesgueVolume, &q).unwrap(), PI);
        let c = DyadicCell { offset: 0.0, k: 3, j: 2 };
        let (a, b) = (generation_radius(3), generation_radius(4));
        assert_relative_eq!(
            region_area(&Region::KubeDisc(c), &Measure::LebesgueVolume, &q).unwrap(),
            PI / 8.0 * (b * b - a * a),
            max_relative = 1e-15
        );
        let u = region_area(&Region::WholeHartogs, &Measure::Quotient, &q).unwrap();
        assert_relative_eq!(u, PI * PI, max_relative = 1e-12);
    }

    #[test]
    fn dump_roundtrip_and_corruption() {
        let t = build_tree(0.25, 4).unwrap();
        let recs = parse_dump(&t.dump()).unwrap();
        assert_eq!(recs.len(), 31);
        assert!(check_dump(&recs, &[0.25], 4).is_empty());
        let mut bad = recs.clone();
        bad[7].parent_j = 99;
        let diag = check_dump(&bad, &[0.25], 4);
        assert_eq!(diag.len(), 1);
        assert!(diag[0].contains("k=3"), "{diag:?}");
    }

    #[test]
    fn comparability_and_tent_brackets() {
        let quad = QuadratureSpec::tent_default();
        let per_k = comparability_brackets(0.0, 12, &quad).unwrap();
        for i in 0..3 {
            let all = per_k.iter().fold(Bracket::empty(), |a, b| a.merge(&b[i]));
            assert!(all.min > 0.0 && all.spread() <= 50.0, "ratio {i}: {all:?}");
            // the late generations sit inside the bracket of the early ones, up to 10%
            let early = per_k[..6].iter().fold(Bracket::empty(), |a, b| a.merge(&b[i]));
            let late = per_k[6..].iter().fold(Bracket::empty(), |a, b| a.merge(&b[i]));
            assert!(late.min >= 0.9 * early.min && late.max <= 1.1 * early.max, "ratio {i}: {early:?} {late:?}");
        }
        let pairs = pair_tent_bracket(1000, 3, &quad).unwrap();
        assert!(pairs.min > 0.0 && pairs.spread() <= 50.0, "{pairs:?}");
        for off in [0.0, 1.0 / 3.0, 2.0 / 3.0] {
            let b = dyadic_in_carleson_bracket(off, 10, &quad).unwrap();
            assert!(b.min >= 1.0 - 1e-9 && b.max <= 50.0, "{b:?}");
        }
    }
}
