//! Brute-force ground truth: dense grids, Monte-Carlo falsification, and
//! per-input robustness scans.
//!
//! Nothing in this module certifies anything. Its job is the opposite: to
//! expose a wrong certificate. Grid and sampling estimates are lower
//! bounds on the quantities the optimizer brackets from both sides, so
//! `oracle <= certified upper bound` must always hold, and a satisfying
//! point found by [`falsify`] contradicts any `Unsat` verdict outright.

use crate::encoder::{encode_local_flip, QueryKind, RobustnessQuery, Side};
use crate::error::{Error, Result};
use crate::formula::Formula;
use crate::interval::{Interval, IntervalBox};
use crate::nn::{perturb_box, Network, ParamVector};
use crate::optimizer::estimate_eps_local;
use crate::solver::{decide, SolverConfig, Verdict};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::io;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub features: Vec<f64>,
    pub label: u8,
}

/// Reads a dataset CSV: a header row, feature columns, and a 0/1 label in
/// the last column. Malformed rows are reported with their line number.
pub fn load_dataset(path: &Path) -> Result<Vec<LabeledPoint>> {
    parse_dataset(std::fs::File::open(path)?)
}

pub fn parse_dataset<R: io::Read>(reader: R) -> Result<Vec<LabeledPoint>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let columns = rdr.headers()?.len();
    if columns < 2 {
        return Err(Error::Dataset(
            "need at least one feature column and a label column".into(),
        ));
    }
    let mut points = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2; // 1-based, header is line 1
        let row = row?;
        if row.len() != columns {
            return Err(Error::Dataset(format!(
                "line {line}: expected {columns} columns, got {}",
                row.len()
            )));
        }
        let mut features = Vec::with_capacity(columns - 1);
        for field in row.iter().take(columns - 1) {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Dataset(format!("line {line}: {field:?} is not a number"))
            })?;
            if !v.is_finite() {
                return Err(Error::Dataset(format!("line {line}: non-finite feature")));
            }
            features.push(v);
        }
        let label = match row.get(columns - 1).unwrap_or("").trim() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Dataset(format!(
                    "line {line}: label must be 0 or 1, got {other:?}"
                )))
            }
        };
        points.push(LabeledPoint { features, label });
    }
    if points.is_empty() {
        return Err(Error::Dataset("dataset has no data rows".into()));
    }
    Ok(points)
}

/// Componentwise min/max bounding box of the feature vectors.
pub fn domain_from_dataset(points: &[LabeledPoint]) -> Result<IntervalBox> {
    let first = points
        .first()
        .ok_or_else(|| Error::Dataset("empty dataset has no domain".into()))?;
    let d = first.features.len();
    let mut lo = first.features.clone();
    let mut hi = first.features.clone();
    for p in points {
        if p.features.len() != d {
            return Err(Error::Dataset("feature rows differ in length".into()));
        }
        for (j, &v) in p.features.iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    Ok(IntervalBox::new(
        lo.into_iter().zip(hi).map(|(a, b)| Interval::raw(a, b)).collect(),
    ))
}

/// Fraction of points whose predicted label matches the recorded one.
pub fn accuracy(net: &Network, points: &[LabeledPoint]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Dataset("cannot score an empty dataset".into()));
    }
    let mut hits = 0usize;
    for p in points {
        if net.classify(&p.features)? == p.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / points.len() as f64)
}

/// Largest deviation `|f_p0(x0) - f_p(x0)|` over a uniform parameter grid
/// with `resolution` points per axis (endpoints included): a lower bound
/// on the supremum that converges as the grid refines. Cost is
/// `resolution^k` forward passes for `k` parameters.
pub fn grid_eps(
    net: &Network,
    p0: &ParamVector,
    x0: &[f64],
    delta: f64,
    resolution: usize,
) -> Result<f64> {
    if delta == 0.0 {
        net.forward_with(&p0.values, x0)?; // validate dimensions
        return Ok(0.0);
    }
    if resolution < 2 {
        return Err(Error::InvalidQuery(
            "grid resolution must be at least 2".into(),
        ));
    }
    let f0 = net.forward_with(&p0.values, x0)?;
    let k = p0.len();
    let mut idx = vec![0usize; k];
    let mut p = vec![0.0; k];
    let mut best = 0.0f64;
    loop {
        for i in 0..k {
            let t = idx[i] as f64 / (resolution - 1) as f64;
            p[i] = (p0.values[i] - delta) * (1.0 - t) + (p0.values[i] + delta) * t;
        }
        best = best.max((f0 - net.forward_with(&p, x0)?).abs());
        let mut i = 0;
        loop {
            if i == k {
                return Ok(best);
            }
            idx[i] += 1;
            if idx[i] < resolution {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Hunts for a satisfying point by uniform sampling over the formula's
/// domain box; `None` after `samples` draws. With `slack = 0` a hit
/// contradicts an `Unsat` verdict outright; a small positive slack makes
/// measure-zero equalities findable.
pub fn falsify(f: &Formula, samples: usize, slack: f64, seed: u64) -> Result<Option<Vec<f64>>> {
    let bx = f.domain_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let pt = bx.sample(&mut rng);
        if f.check_point(&pt, slack)? {
            return Ok(Some(pt));
        }
    }
    Ok(None)
}

/// How a scan prices the per-point deviation bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScanMode {
    /// Certified up to 100 points, grid beyond.
    #[default]
    Auto,
    /// Grid lower bound plus an interval upper bound. Cheap, loose.
    Fast,
    /// Full optimizer enclosure per point.
    Certified,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRecord {
    pub index: usize,
    pub x: Vec<f64>,
    /// Reference confidence `f_p0(x)`.
    pub confidence: f64,
    pub label: u8,
    /// `|confidence - level|`, the distance to the decision boundary.
    pub margin: f64,
    pub eps_lower: f64,
    pub eps_upper: f64,
    /// Whether some admissible perturbation flips this input's label;
    /// `None` when the flip query exhausted its budget undecided.
    pub flippable: Option<bool>,
}

/// Samples `n` inputs uniformly from `domain` (seeded, so reproducible)
/// and computes a [`ScanRecord`] for each. Points are independent and
/// processed in parallel; output order is by sample index.
#[allow(clippy::too_many_arguments)]
pub fn scan_inputs(
    net: &Network,
    p0: &ParamVector,
    domain: &IntervalBox,
    delta: f64,
    n: usize,
    seed: u64,
    mode: ScanMode,
    cfg: &SolverConfig,
) -> Result<Vec<ScanRecord>> {
    if n == 0 {
        return Err(Error::InvalidQuery("a scan needs at least one sample".into()));
    }
    if domain.len() != net.input_dim {
        return Err(Error::InvalidQuery(format!(
            "domain has {} dimensions, network expects {}",
            domain.len(),
            net.input_dim
        )));
    }
    net.validate()?;
    let certified = match mode {
        ScanMode::Auto => n <= 100,
        ScanMode::Fast => false,
        ScanMode::Certified => true,
    };
    // draw every input up front so the sample set depends only on the seed
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Vec<f64>> = (0..n).map(|_| domain.sample(&mut rng)).collect();
    let pbox = perturb_box(p0, delta)?;
    let level = net.level;
    let res = grid_resolution(p0.len());
    xs.into_par_iter()
        .enumerate()
        .map(|(index, x)| -> Result<ScanRecord> {
            let confidence = net.forward_with(&p0.values, &x)?;
            let label = u8::from(confidence >= level);
            let margin = (confidence - level).abs();
            let (eps_lower, eps_upper) = if certified {
                let e = estimate_eps_local(net, p0, &x, delta, cfg)?;
                (e.lower, e.upper)
            } else {
                let lo = grid_eps(net, p0, &x, delta, res)?;
                let xbox = IntervalBox::new(x.iter().map(|&v| Interval::point(v)).collect());
                let out = net.interval_forward(&pbox, &xbox)?;
                let hi = (confidence - out.lo).abs().max((out.hi - confidence).abs());
                (lo, hi.max(lo))
            };
            let mut q = RobustnessQuery::new(QueryKind::LocalFlip, net.clone(), delta);
            q.p0 = p0.clone();
            q.x0 = Some(x.clone());
            let (verdict, _) = decide(&encode_local_flip(&q)?, cfg)?;
            let flippable = match verdict {
                Verdict::DeltaSat { .. } => Some(true),
                Verdict::Unsat => Some(false),
                Verdict::Unknown { .. } => None,
            };
            Ok(ScanRecord {
                index,
                x,
                confidence,
                label,
                margin,
                eps_lower,
                eps_upper,
                flippable,
            })
        })
        .collect()
}

/// Per-axis grid count keeping a fast scan's per-point cost near 2^11
/// forward passes.
fn grid_resolution(params: usize) -> usize {
    match params {
        0 | 1 => 2049,
        2 => 45,
        3 => 13,
        4 => 7,
        _ => 3,
    }
}

/// Writes records as CSV in the fixed column order
/// `index,x1,...,xd,confidence,label,margin,eps_lower,eps_upper,flippable`.
pub fn write_scan_csv<W: io::Write>(records: &[ScanRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d = records.first().map_or(0, |r| r.x.len());
    let mut header = vec!["index".to_string()];
    header.extend((1..=d).map(|j| format!("x{j}")));
    for tail in ["confidence", "label", "margin", "eps_lower", "eps_upper", "flippable"] {
        header.push(tail.to_string());
    }
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.index.to_string()];
        row.extend(r.x.iter().map(f64::to_string));
        row.push(r.confidence.to_string());
        row.push(r.label.to_string());
        row.push(r.margin.to_string());
        row.push(r.eps_lower.to_string());
        row.push(r.eps_upper.to_string());
        row.push(
            match r.flippable {
                Some(true) => "true",
                Some(false) => "false",
                None => "unknown",
            }
            .to_string(),
        );
        w.write_record(&row)?;
    }
    w.flush().map_err(Error::Io)?;
    Ok(())
}

/// All `2^k` corners of the parameter box. For networks with at most one
/// hidden layer the output at a fixed input is monotone in every single
/// parameter, so these corners attain the per-input extremes exactly;
/// for deeper nets they are merely well-spread probes.
fn corner_params(pbox: &IntervalBox) -> Vec<Vec<f64>> {
    let k = pbox.len();
    assert!(k <= 20, "corner enumeration is infeasible past 20 parameters");
    (0..1usize << k)
        .map(|mask| {
            (0..k)
                .map(|i| {
                    let iv = pbox.get(i);
                    if mask >> i & 1 == 1 {
                        iv.hi
                    } else {
                        iv.lo
                    }
                })
                .collect()
        })
        .collect()
}

/// Mixed-radix grid over the domain box with at least `total` points
/// (rounded up to a full per-axis count, endpoints included).
fn grid_points(domain: &IntervalBox, total: usize) -> Vec<Vec<f64>> {
    let d = domain.len();
    let m = ((total as f64).powf(1.0 / d as f64).ceil() as usize).max(2);
    let mut pts = Vec::with_capacity(m.pow(d as u32));
    let mut idx = vec![0usize; d];
    loop {
        pts.push(
            (0..d)
                .map(|j| {
                    let iv = domain.get(j);
                    let t = idx[j] as f64 / (m - 1) as f64;
                    iv.lo * (1.0 - t) + iv.hi * t
                })
                .collect(),
        );
        let mut j = 0;
        loop {
            if j == d {
                return pts;
            }
            idx[j] += 1;
            if idx[j] < m {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

fn mul2(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let p = [a.0 * b.0, a.0 * b.1, a.1 * b.0, a.1 * b.1];
    (
        p.iter().copied().fold(f64::INFINITY, f64::min),
        p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    )
}

/// Exact range of the confidence over the parameter box at a fixed
/// input, for networks of at most one hidden layer. Each unit term
/// touches its own block of parameter coordinates and every supported
/// activation is monotone, so endpoint ranges per unit combine exactly.
/// With two hidden layers the second layer's units share the first
/// layer's parameters and this decomposition breaks, so deeper nets
/// return None.
fn exact_conf_range(net: &Network, pbox: &IntervalBox, x: &[f64]) -> Option<(f64, f64)> {
    if net.layers.is_empty()
        || net.layers.len() > 2
        || net.layers.last().is_none_or(|l| l.weights.len() != 1)
    {
        return None;
    }
    let mut off = 0usize;
    let mut acts: Vec<(f64, f64)> = x.iter().map(|&v| (v, v)).collect();
    for layer in &net.layers {
        let rows = layer.weights.len();
        let cols = layer.weights.first().map_or(0, Vec::len);
        let b_off = off + if layer.frozen_weights { 0 } else { rows * cols };
        let mut next = Vec::with_capacity(rows);
        for (j, row) in layer.weights.iter().enumerate() {
            let mut z = if layer.biases.is_empty() {
                (0.0, 0.0)
            } else {
                let b = pbox.get(b_off + j);
                (b.lo, b.hi)
            };
            for (i, &w) in row.iter().enumerate() {
                let wr = if layer.frozen_weights {
                    (w, w)
                } else {
                    let iv = pbox.get(off + j * cols + i);
                    (iv.lo, iv.hi)
                };
                let t = mul2(wr, acts[i]);
                z = (z.0 + t.0, z.1 + t.1);
            }
            next.push((layer.activation.apply(z.0), layer.activation.apply(z.1)));
        }
        acts = next;
        off = b_off + layer.biases.len();
    }
    Some(acts[0])
}

/// Per-input range of the confidence over the parameter box: exact for
/// shallow nets, a corner probe (well-spread but not exhaustive)
/// otherwise.
enum ParamProbe {
    Exact,
    Corners(Vec<Vec<f64>>),
}

impl ParamProbe {
    fn new(net: &Network, pbox: &IntervalBox) -> ParamProbe {
        let shallow = net.layers.len() <= 2
            && net.layers.last().is_some_and(|l| l.weights.len() == 1);
        if shallow {
            ParamProbe::Exact
        } else {
            ParamProbe::Corners(corner_params(pbox))
        }
    }

    fn conf_range(
        &self,
        net: &Network,
        pbox: &IntervalBox,
        x: &[f64],
    ) -> Result<(f64, f64)> {
        match self {
            ParamProbe::Exact => {
                Ok(exact_conf_range(net, pbox, x).expect("architecture checked on construction"))
            }
            ParamProbe::Corners(corners) => {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for p in corners {
                    let v = net.forward_with(p, x)?;
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                Ok((lo, hi))
            }
        }
    }
}

/// Hill-climbs a gridded objective: re-grids a shrinking window around
/// the incumbent and keeps the best qualifying point. The window center
/// stays on every pass's grid (odd node count), so the incumbent never
/// regresses. Scores of `None` mark non-qualifying inputs.
fn refine_argmax<F>(
    domain: &IntervalBox,
    mut best: (Vec<f64>, f64),
    score: F,
) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> Result<Option<f64>>,
{
    const PASSES: usize = 10;
    const PER_AXIS: usize = 9;
    const SHRINK: f64 = 0.35;
    let d = domain.len();
    let mut span: Vec<f64> = (0..d).map(|j| domain.get(j).width()).collect();
    for _ in 0..PASSES {
        for s in span.iter_mut() {
            *s *= SHRINK;
        }
        let window = IntervalBox::new(
            (0..d)
                .map(|j| {
                    let dom = domain.get(j);
                    let lo = (best.0[j] - span[j] / 2.0).max(dom.lo);
                    let hi = (best.0[j] + span[j] / 2.0).min(dom.hi);
                    Interval::raw(lo, hi)
                })
                .collect(),
        );
        for x in grid_points(&window, PER_AXIS.pow(d as u32)) {
            if let Some(v) = score(&x)? {
                if v > best.1 {
                    best = (x, v);
                }
            }
        }
    }
    Ok(best)
}

/// Dense lower-bound oracle for the global deviation supremum: an input
/// grid of at least `input_grid` points, each scored with the per-input
/// parameter range (exact for the shallow nets used here), then refined
/// around the best basins. `param_samples` uniform random (parameter,
/// input) draws guard the whole construction independently.
pub fn eps_global_oracle(
    net: &Network,
    p0: &ParamVector,
    domain: &IntervalBox,
    delta: f64,
    input_grid: usize,
    param_samples: usize,
    seed: u64,
) -> Result<f64> {
    let pbox = perturb_box(p0, delta)?;
    let probe = ParamProbe::new(net, &pbox);
    let score = |x: &[f64]| -> Result<Option<f64>> {
        let f0 = net.forward_with(&p0.values, x)?;
        let (lo, hi) = probe.conf_range(net, &pbox, x)?;
        Ok(Some((lo - f0).abs().max((hi - f0).abs())))
    };
    let best = best_of_grid(domain, input_grid, &score)?;
    let mut result = 0.0f64;
    for start in best {
        result = result.max(refine_argmax(domain, start, &score)?.1);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..param_samples {
        let p = pbox.sample(&mut rng);
        let x = domain.sample(&mut rng);
        let f0 = net.forward_with(&p0.values, &x)?;
        result = result.max((net.forward_with(&p, &x)? - f0).abs());
    }
    Ok(result)
}

/// Dense lower-bound oracle for the widest flippable margin: over an
/// input grid, a point counts as flippable when the per-input parameter
/// range crosses the level against the reference side, and the best
/// margins are refined around their basins.
pub fn sigma_oracle(
    net: &Network,
    p0: &ParamVector,
    domain: &IntervalBox,
    delta: f64,
    side: Side,
    input_grid: usize,
) -> Result<f64> {
    let pbox = perturb_box(p0, delta)?;
    let probe = ParamProbe::new(net, &pbox);
    let l = net.level;
    let score = |x: &[f64]| -> Result<Option<f64>> {
        let f0 = net.forward_with(&p0.values, x)?;
        let above = f0 > l;
        match side {
            Side::Above if !above => return Ok(None),
            Side::Below if f0 >= l => return Ok(None),
            _ => {}
        }
        let (lo, hi) = probe.conf_range(net, &pbox, x)?;
        let flips = if above { lo <= l } else { hi > l };
        Ok(flips.then(|| (f0 - l).abs()))
    };
    let best = best_of_grid(domain, input_grid, &score)?;
    let mut result = 0.0f64;
    for start in best {
        result = result.max(refine_argmax(domain, start, &score)?.1);
    }
    Ok(result)
}

/// Top qualifying grid points, mutually separated by a few grid steps so
/// refinement starts in distinct basins.
fn best_of_grid<F>(
    domain: &IntervalBox,
    total: usize,
    score: F,
) -> Result<Vec<(Vec<f64>, f64)>>
where
    F: Fn(&[f64]) -> Result<Option<f64>> + Sync,
{
    const STARTS: usize = 3;
    let pts = grid_points(domain, total);
    let mut scored: Vec<(Vec<f64>, f64)> = pts
        .par_iter()
        .map(|x| Ok(score(x)?.map(|v| (x.clone(), v))))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    let d = domain.len();
    let m = ((total as f64).powf(1.0 / d as f64).ceil() as usize).max(2);
    let sep: Vec<f64> = (0..d)
        .map(|j| 3.0 * domain.get(j).width() / (m - 1) as f64)
        .collect();
    let mut picks: Vec<(Vec<f64>, f64)> = Vec::new();
    for (x, v) in scored {
        if picks.len() >= STARTS {
            break;
        }
        let crowded = picks
            .iter()
            .any(|(px, _)| (0..d).all(|j| (px[j] - x[j]).abs() <= sep[j]));
        if !crowded {
            picks.push((x, v));
        }
    }
    Ok(picks)
}
