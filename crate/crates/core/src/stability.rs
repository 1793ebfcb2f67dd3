//! Stability analysis: g evaluation, stable-interval boundaries, the g = 0
//! operating point, and grid scans.
//!
//! g is a low-order polynomial in every distance parameter, so boundaries are
//! bracketed with a uniform pre-scan of the search range and refined by
//! bisection down to floating-point resolution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::{round_trip_matrix, CavityGeometry, Param};
use crate::error::{Error, Result};

/// Number of pre-scan steps across a search range.
pub const PRESCAN_STEPS: usize = 2000;

/// Half-width of the default dt search window around `f3 + f4`.
pub const DT_SEARCH_HALF_WIDTH: f64 = 20.0;
/// Half-width of the default d1 (and d2, dg) search window.
pub const D_SEARCH_HALF_WIDTH: f64 = 10.0;

/// Stability parameter `g = (A0 + D0)/2` of the round trip from M1.
pub fn g_parameter(geom: &CavityGeometry) -> Result<f64> {
    Ok(round_trip_matrix(geom)?.half_trace())
}

pub fn is_stable(g: f64) -> bool {
    g.abs() < 1.0
}

/// Default search window for a distance parameter.
pub fn default_search_range(geom: &CavityGeometry, param: Param) -> (f64, f64) {
    let (lo, hi) = match param {
        Param::Dt => {
            let c = geom.f3 + geom.f4;
            (c - DT_SEARCH_HALF_WIDTH, c + DT_SEARCH_HALF_WIDTH)
        }
        Param::D1 => (geom.f1 - D_SEARCH_HALF_WIDTH, geom.f1 + D_SEARCH_HALF_WIDTH),
        Param::D2 => (geom.f2 - D_SEARCH_HALF_WIDTH, geom.f2 + D_SEARCH_HALF_WIDTH),
        Param::Dg => {
            let c = geom.f1 + geom.f3;
            (c - D_SEARCH_HALF_WIDTH, c + D_SEARCH_HALF_WIDTH)
        }
        Param::Dw => (0.0, 4.0 * geom.dw.max(1.0)),
        // Focal lengths are not scanned by the CLI; keep a symmetric window.
        _ => {
            let v = geom.get(param);
            (v - D_SEARCH_HALF_WIDTH, v + D_SEARCH_HALF_WIDTH)
        }
    };
    if param.is_distance() {
        (lo.max(0.0), hi)
    } else {
        (lo, hi)
    }
}

/// A contiguous range of one parameter over which `|g| < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableInterval {
    pub param: Param,
    pub lower: f64,
    pub upper: f64,
    pub width: f64,
    /// g at `lower` (±1 up to rounding).
    pub g_lower: f64,
    /// g at `upper` (±1 up to rounding).
    pub g_upper: f64,
    /// More than one disjoint stable interval was found in the search range.
    pub multiple: bool,
}

/// Bisects between `inside` (predicate true) and `outside` (predicate false)
/// until the bracket cannot shrink further. Returns the last point where the
/// predicate held.
pub(crate) fn bisect_boundary(mut inside: f64, mut outside: f64, pred: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if pred(mid) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

struct Run {
    first: f64,
    last: f64,
    /// Nearest unstable neighbours; `None` if the run touches the range edge.
    before: Option<f64>,
    after: Option<f64>,
}

/// Stable runs of `g(x)` over `[lo, hi]`, including runs narrower than the
/// pre-scan step that show up only as a sign change of g between two
/// unstable samples.
fn stable_runs(g: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> Vec<Run> {
    let step = (hi - lo) / PRESCAN_STEPS as f64;
    let xs: Vec<f64> =
        (0..=PRESCAN_STEPS).map(|i| if i == PRESCAN_STEPS { hi } else { lo + step * i as f64 }).collect();
    let gs: Vec<f64> = xs.iter().map(|&x| g(x)).collect();

    let mut seq: Vec<(f64, bool)> = Vec::with_capacity(xs.len() + 8);
    for i in 0..xs.len() {
        seq.push((xs[i], is_stable(gs[i])));
        if i + 1 < xs.len()
            && !is_stable(gs[i])
            && !is_stable(gs[i + 1])
            && gs[i].is_finite()
            && gs[i + 1].is_finite()
            && gs[i].signum() != gs[i + 1].signum()
        {
            let positive_at_left = gs[i] > 0.0;
            let root = bisect_boundary(xs[i], xs[i + 1], |x| (g(x) > 0.0) == positive_at_left);
            if is_stable(g(root)) {
                seq.push((root, true));
            } else {
                let next = f64::from_bits(root.to_bits() + 1);
                if next < xs[i + 1] && is_stable(g(next)) {
                    seq.push((next, true));
                }
            }
        }
    }

    let mut runs = Vec::new();
    let mut k = 0;
    while k < seq.len() {
        if !seq[k].1 {
            k += 1;
            continue;
        }
        let start = k;
        while k + 1 < seq.len() && seq[k + 1].1 {
            k += 1;
        }
        runs.push(Run {
            first: seq[start].0,
            last: seq[k].0,
            before: start.checked_sub(1).map(|j| seq[j].0),
            after: seq.get(k + 1).map(|e| e.0),
        });
        k += 1;
    }
    runs
}

fn nearest_run(runs: &[Run], nominal: f64) -> Option<&Run> {
    let dist = |r: &Run| {
        if nominal < r.first {
            r.first - nominal
        } else if nominal > r.last {
            nominal - r.last
        } else {
            0.0
        }
    };
    runs.iter().min_by(|a, b| dist(a).total_cmp(&dist(b)))
}

fn check_range(param: Param, lo: f64, hi: f64) -> Result<()> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(param.name(), format!("search range [{lo}, {hi}] is empty")));
    }
    Ok(())
}

/// Stable interval of `param` containing (or nearest to) its nominal value,
/// searching `[search_lo, search_hi]`.
pub fn stable_interval(geom: &CavityGeometry, param: Param, search_lo: f64, search_hi: f64) -> Result<StableInterval> {
    geom.validate()?;
    check_range(param, search_lo, search_hi)?;
    let g = |x: f64| geom.with(param, x).g_unchecked();
    let runs = stable_runs(&g, search_lo, search_hi);
    let run =
        nearest_run(&runs, geom.get(param)).ok_or(Error::NoStableRegion { param, lo: search_lo, hi: search_hi })?;
    let (Some(before), Some(after)) = (run.before, run.after) else {
        return Err(Error::UnboundedRegion { param, lo: search_lo, hi: search_hi });
    };
    let stable = |x: f64| is_stable(g(x));
    let lower = bisect_boundary(run.first, before, stable);
    let upper = bisect_boundary(run.last, after, stable);
    Ok(StableInterval {
        param,
        lower,
        upper,
        width: upper - lower,
        g_lower: g(lower),
        g_upper: g(upper),
        multiple: runs.len() > 1,
    })
}

/// [`stable_interval`] over [`default_search_range`].
pub fn stable_interval_default(geom: &CavityGeometry, param: Param) -> Result<StableInterval> {
    let (lo, hi) = default_search_range(geom, param);
    stable_interval(geom, param, lo, hi)
}

/// Value of `param` giving g = 0 inside the stable interval nearest the
/// nominal value.
pub fn solve_g_zero(geom: &CavityGeometry, param: Param, search_lo: f64, search_hi: f64) -> Result<f64> {
    geom.validate()?;
    check_range(param, search_lo, search_hi)?;
    let g = |x: f64| geom.with(param, x).g_unchecked();
    let runs = stable_runs(&g, search_lo, search_hi);
    let run =
        nearest_run(&runs, geom.get(param)).ok_or(Error::NoStableRegion { param, lo: search_lo, hi: search_hi })?;
    let stable = |x: f64| is_stable(g(x));
    let lower = run.before.map_or(run.first, |b| bisect_boundary(run.first, b, stable));
    let upper = run.after.map_or(run.last, |a| bisect_boundary(run.last, a, stable));

    let no_root = Error::NoSolution { param, lo: lower, hi: upper };
    let (gl, gu) = (g(lower), g(upper));
    if gl == 0.0 {
        return Ok(lower);
    }
    if gu == 0.0 {
        return Ok(upper);
    }
    let (a, b) = if gl.signum() != gu.signum() {
        (lower, upper)
    } else {
        // Same sign at both ends: look for an interior crossing.
        let n = PRESCAN_STEPS;
        let step = (upper - lower) / n as f64;
        let mut bracket = None;
        let mut prev = lower;
        for i in 1..=n {
            let x = if i == n { upper } else { lower + step * i as f64 };
            if g(x).signum() != gl.signum() {
                bracket = Some((prev, x));
                break;
            }
            prev = x;
        }
        bracket.ok_or(no_root)?
    };
    let positive_at_a = g(a) > 0.0;
    let root = bisect_boundary(a, b, |x| (g(x) > 0.0) == positive_at_a);
    // Return whichever side of the final bracket is closer to zero.
    let next = if b > a { f64::from_bits(root.to_bits() + 1) } else { f64::from_bits(root.to_bits() - 1) };
    Ok(if g(next).abs() < g(root).abs() { next } else { root })
}

/// [`solve_g_zero`] over [`default_search_range`].
pub fn solve_g_zero_default(geom: &CavityGeometry, param: Param) -> Result<f64> {
    let (lo, hi) = default_search_range(geom, param);
    solve_g_zero(geom, param, lo, hi)
}

/// Uniformly spaced scan axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub param: Param,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(param: Param, lo: f64, hi: f64, count: usize) -> Self {
        Axis { param, lo, hi, count }
    }

    pub fn values(&self) -> Vec<f64> {
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.hi } else { self.lo + (self.hi - self.lo) * i as f64 / last })
            .collect()
    }

    fn check(&self) -> Result<()> {
        if self.count < 2 {
            return Err(Error::invalid(self.param.name(), format!("axis needs at least 2 points, got {}", self.count)));
        }
        if !(self.lo < self.hi) {
            return Err(Error::invalid(self.param.name(), format!("axis range [{}, {}] is empty", self.lo, self.hi)));
        }
        Ok(())
    }
}

/// Display clamp for map values.
pub const MAP_DISPLAY_LIMIT: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityMap {
    pub x_param: Param,
    pub y_param: Param,
    pub x_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    /// `g_values[i][j]` is g at `(x_grid[i], y_grid[j])`.
    pub g_values: Vec<Vec<f64>>,
}

impl StabilityMap {
    /// g clamped to `±MAP_DISPLAY_LIMIT`, with a flag set when clamping
    /// happened.
    pub fn display_value(&self, i: usize, j: usize) -> (f64, bool) {
        let g = self.g_values[i][j];
        let clamped = g.clamp(-MAP_DISPLAY_LIMIT, MAP_DISPLAY_LIMIT);
        (clamped, clamped != g)
    }

    /// For each x, the extent of y values with `|g| < 1` (0 if none).
    pub fn stable_extent_along_y(&self, i: usize) -> f64 {
        let ys: Vec<f64> =
            self.g_values[i].iter().zip(&self.y_grid).filter(|(g, _)| is_stable(**g)).map(|(_, y)| *y).collect();
        match (ys.first(), ys.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }
}

/// Dense g evaluation over the Cartesian product of two axes.
pub fn stability_map(geom: &CavityGeometry, x: Axis, y: Axis) -> Result<StabilityMap> {
    geom.validate()?;
    x.check()?;
    y.check()?;
    if x.param == y.param {
        return Err(Error::invalid(x.param.name(), "map axes must be different parameters"));
    }
    let x_grid = x.values();
    let y_grid = y.values();
    let g_values = x_grid
        .par_iter()
        .map(|&xv| y_grid.iter().map(|&yv| geom.with(x.param, xv).with(y.param, yv).g_unchecked()).collect())
        .collect();
    Ok(StabilityMap { x_param: x.param, y_param: y.param, x_grid, y_grid, g_values })
}

/// How dt is chosen before measuring widths at each working distance.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WidthSweepOptions {
    /// Move dt to the g = 0 point at each distance first.
    pub retune_dt: bool,
    /// Search range; the parameter's default window when `None`.
    pub search: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthRow {
    pub dw: f64,
    pub interval: Option<StableInterval>,
}

/// Number of times `retune_dt` doubles the dt window before giving up.
pub const RETUNE_WIDENINGS: u32 = 8;

/// Retunes dt to g = 0, starting from its default window and doubling the
/// window above f3 + f4 when no root is bracketed. Short working distances
/// put the g = 0 point far beyond the default window.
pub fn retune_dt(geom: &CavityGeometry) -> Result<CavityGeometry> {
    let (lo, hi) = default_search_range(geom, Param::Dt);
    let mut err = match solve_g_zero(geom, Param::Dt, lo, hi) {
        Ok(dt) => return Ok(geom.with(Param::Dt, dt)),
        Err(e) => e,
    };
    let centre = geom.f3 + geom.f4;
    let mut half = DT_SEARCH_HALF_WIDTH;
    for _ in 0..RETUNE_WIDENINGS {
        half *= 2.0;
        match solve_g_zero(geom, Param::Dt, (centre - half).max(0.0), centre + half) {
            Ok(dt) => return Ok(geom.with(Param::Dt, dt)),
            Err(e) => err = e,
        }
    }
    Err(err)
}

/// Stable-interval width of `param` at each working distance. Distances
/// without a bounded stable interval are recorded with `interval: None`.
pub fn width_vs_distance(
    geom: &CavityGeometry,
    param: Param,
    dw_values: &[f64],
    opts: WidthSweepOptions,
) -> Vec<WidthRow> {
    dw_values
        .par_iter()
        .map(|&dw| {
            let interval = (|| {
                let mut g = geom.with(Param::Dw, dw);
                if opts.retune_dt {
                    g = retune_dt(&g)?;
                }
                let (lo, hi) = opts.search.unwrap_or_else(|| default_search_range(&g, param));
                stable_interval(&g, param, lo, hi)
            })();
            if let Err(e) = &interval {
                log::debug!("width sweep at dw = {dw}: {e}");
            }
            WidthRow { dw, interval: interval.ok() }
        })
        .collect()
}
