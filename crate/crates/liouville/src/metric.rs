//! Lengths, grid geodesics, diameter, and the Nevanlinna functions `A(r, f)`
//! and `T(r, f)` for the conformal metric `e^{2u} |dz|^2`.

use std::cell::RefCell;
use std::collections::BinaryHeap;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::field::{FieldError, SolutionField};
use crate::geometry::Rect;
use crate::map::{DevelopingMap, MapError};
use crate::quad::{adaptive_quad, QuadError};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("node ({0}, {1}) outside the grid")]
    NodeOutOfRange(usize, usize),
    #[error("window too small: boundary conformal factor {boundary:e} exceeds 1e-3 x max factor {max:e}")]
    WindowTooSmall { boundary: f64, max: f64 },
}

/// A piecewise-smooth curve in the plane.
#[derive(Debug, Clone)]
pub enum Curve {
    Segment { from: Complex64, to: Complex64 },
    Arc { center: Complex64, radius: f64, theta_from: f64, theta_to: f64 },
    Polyline { points: Vec<Complex64> },
}

impl Curve {
    fn validate(&self) -> Result<(), MetricError> {
        match self {
            Curve::Segment { from, to } => {
                if from == to {
                    return Err(MetricError::InvalidCurve("degenerate segment".into()));
                }
            }
            Curve::Arc { radius, theta_from, theta_to, .. } => {
                if !(*radius > 0.0) || theta_from == theta_to {
                    return Err(MetricError::InvalidCurve("degenerate arc".into()));
                }
            }
            Curve::Polyline { points } => {
                if points.len() < 2 {
                    return Err(MetricError::InvalidCurve("polyline needs >= 2 points".into()));
                }
                if points.windows(2).any(|w| w[0] == w[1]) {
                    return Err(MetricError::InvalidCurve(
                        "polyline has repeated consecutive points".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn endpoints(&self) -> (Complex64, Complex64) {
        match self {
            Curve::Segment { from, to } => (*from, *to),
            Curve::Arc { center, radius, theta_from, theta_to } => (
                center + Complex64::from_polar(*radius, *theta_from),
                center + Complex64::from_polar(*radius, *theta_to),
            ),
            Curve::Polyline { points } => (points[0], *points.last().unwrap()),
        }
    }
}

/// Length of `γ` under `e^{2u} |dz|^2`: adaptive quadrature of
/// `e^{u(γ(s))} |γ'(s)| ds` to relative tolerance `rel_tol`.
pub fn curve_length(u: &SolutionField, curve: &Curve, rel_tol: f64) -> Result<f64, MetricError> {
    curve.validate()?;
    let failed: RefCell<Option<FieldError>> = RefCell::new(None);
    let factor = |z: Complex64| -> f64 {
        match u.value(z) {
            Ok(v) => v.exp(),
            Err(e) => {
                failed.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let piece = |from: Complex64, to: Complex64| -> Result<f64, MetricError> {
        let speed = (to - from).norm();
        let v = adaptive_quad(&|s| factor(from + (to - from) * s) * speed, 0.0, 1.0, rel_tol, 4000)?;
        Ok(v)
    };
    let total = match curve {
        Curve::Segment { from, to } => piece(*from, *to)?,
        Curve::Arc { center, radius, theta_from, theta_to } => adaptive_quad(
            &|theta| factor(center + Complex64::from_polar(*radius, theta)) * radius,
            *theta_from,
            *theta_to,
            rel_tol,
            4000,
        )?
        .abs(),
        Curve::Polyline { points } => {
            let mut s = 0.0;
            for w in points.windows(2) {
                s += piece(w[0], w[1])?;
            }
            s
        }
    };
    if let Some(e) = failed.into_inner() {
        return Err(MetricError::Field(e));
    }
    Ok(total)
}

/// Lattice discretization of the conformal factor `e^u` over a window.
#[derive(Debug, Clone)]
pub struct ConformalGrid {
    window: Rect,
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    /// `e^{u}` at node `(i, j)`, row-major (`j * nx + i`).
    weights: Vec<f64>,
}

impl ConformalGrid {
    pub fn build(u: &SolutionField, window: Rect, nx: usize, ny: usize) -> Result<Self, MetricError> {
        if nx < 16 || ny < 16 {
            return Err(MetricError::InvalidGrid(format!(
                "grid needs nx, ny >= 16, got {nx} x {ny}"
            )));
        }
        let hx = window.width() / (nx - 1) as f64;
        let hy = window.height() / (ny - 1) as f64;
        if !(hx > 0.0 && hy > 0.0) {
            return Err(MetricError::InvalidGrid("window has zero extent".into()));
        }
        let rows: Vec<Result<Vec<f64>, FieldError>> = (0..ny)
            .into_par_iter()
            .map(|j| {
                let y = window.y_min + j as f64 * hy;
                (0..nx)
                    .map(|i| {
                        let x = window.x_min + i as f64 * hx;
                        u.value(Complex64::new(x, y)).map(f64::exp)
                    })
                    .collect()
            })
            .collect();
        let mut weights = Vec::with_capacity(nx * ny);
        for row in rows {
            weights.extend(row?);
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(MetricError::InvalidGrid(
                "conformal factor not positive and finite on the grid".into(),
            ));
        }
        Ok(ConformalGrid { window, nx, ny, hx, hy, weights })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn window(&self) -> Rect {
        self.window
    }

    pub fn spacing(&self) -> (f64, f64) {
        (self.hx, self.hy)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node_point(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(
            self.window.x_min + i as f64 * self.hx,
            self.window.y_min + j as f64 * self.hy,
        )
    }

    pub fn node_index(&self, i: usize, j: usize) -> Result<usize, MetricError> {
        if i >= self.nx || j >= self.ny {
            return Err(MetricError::NodeOutOfRange(i, j));
        }
        Ok(j * self.nx + i)
    }

    pub fn nearest_node(&self, z: Complex64) -> (usize, usize) {
        let i = ((z.re - self.window.x_min) / self.hx).round().clamp(0.0, (self.nx - 1) as f64);
        let j = ((z.im - self.window.y_min) / self.hy).round().clamp(0.0, (self.ny - 1) as f64);
        (i as usize, j as usize)
    }

    /// Single-source shortest paths over the 8-connected lattice with edge
    /// weight `Euclidean length x (e^{u(a)} + e^{u(b)}) / 2`. Returns the
    /// distance field and the predecessor of each settled node.
    pub fn distances_from(&self, source: usize) -> (Vec<f64>, Vec<u32>) {
        #[derive(PartialEq)]
        struct Entry {
            dist: f64,
            node: u32,
        }
        impl Eq for Entry {}
        impl PartialOrd for Entry {
            fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Entry {
            fn cmp(&self, other: &Self) -> std::cmp::Ordering {
                // Reversed on distance: BinaryHeap pops the nearest node.
                other.dist.total_cmp(&self.dist).then(other.node.cmp(&self.node))
            }
        }

        let n = self.nx * self.ny;
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![u32::MAX; n];
        let mut heap = BinaryHeap::with_capacity(n / 4);
        dist[source] = 0.0;
        heap.push(Entry { dist: 0.0, node: source as u32 });

        let diag = self.hx.hypot(self.hy);
        let offsets: [(isize, isize, f64); 8] = [
            (1, 0, self.hx),
            (-1, 0, self.hx),
            (0, 1, self.hy),
            (0, -1, self.hy),
            (1, 1, diag),
            (1, -1, diag),
            (-1, 1, diag),
            (-1, -1, diag),
        ];

        while let Some(Entry { dist: d, node }) = heap.pop() {
            let idx = node as usize;
            if d > dist[idx] {
                continue;
            }
            let (i, j) = ((idx % self.nx) as isize, (idx / self.nx) as isize);
            let w_here = self.weights[idx];
            for &(di, dj, len) in &offsets {
                let (ni, nj) = (i + di, j + dj);
                if ni < 0 || nj < 0 || ni >= self.nx as isize || nj >= self.ny as isize {
                    continue;
                }
                let nidx = nj as usize * self.nx + ni as usize;
                let nd = d + len * 0.5 * (w_here + self.weights[nidx]);
                if nd < dist[nidx] {
                    dist[nidx] = nd;
                    pred[nidx] = node;
                    heap.push(Entry { dist: nd, node: nidx as u32 });
                }
            }
        }
        (dist, pred)
    }

    /// Graph distance between two nodes; symmetric and satisfying the
    /// triangle inequality exactly (it is a graph metric).
    pub fn geodesic_distance(
        &self,
        source: (usize, usize),
        target: (usize, usize),
    ) -> Result<f64, MetricError> {
        let s = self.node_index(source.0, source.1)?;
        let t = self.node_index(target.0, target.1)?;
        if s == t {
            return Ok(0.0);
        }
        let (dist, _) = self.distances_from(s);
        Ok(dist[t])
    }

    fn path_nodes(&self, pred: &[u32], target: usize) -> Vec<Complex64> {
        let mut nodes = vec![target];
        let mut cur = target;
        while pred[cur] != u32::MAX {
            cur = pred[cur] as usize;
            nodes.push(cur);
        }
        nodes.reverse();
        nodes
            .into_iter()
            .map(|idx| self.node_point(idx % self.nx, idx / self.nx))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct DiameterSettings {
    pub window: Rect,
    pub nx: usize,
    pub ny: usize,
    /// Grid resolutions used: level `l` has `(n - 1) * 2^l + 1` nodes per axis.
    pub levels: usize,
    pub sweeps: usize,
    pub max_landmarks: usize,
    /// Vertex count of the continuum-relaxed path.
    pub relax_vertices: usize,
    pub relax_rounds: usize,
}

impl Default for DiameterSettings {
    fn default() -> Self {
        DiameterSettings {
            window: Rect::centered_square(100.0),
            nx: 201,
            ny: 201,
            levels: 2,
            sweeps: 2,
            max_landmarks: 12,
            relax_vertices: 360,
            relax_rounds: 30,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiameterEstimate {
    /// Max over the candidate pairs of the relaxed-path length; a lower
    /// proxy for the true supremum over all pairs.
    pub lower: f64,
    /// Richardson-style combination of the per-level values.
    pub extrapolated: f64,
    /// `(nx, ny, graph diameter)` per level.
    pub resolutions: Vec<(usize, usize, f64)>,
    pub window: Rect,
    pub best_pair: (Complex64, Complex64),
}

/// Estimates the diameter of `(ℝ², e^{2u} δ)` restricted to a window chosen
/// so that escape paths are immaterial (the boundary conformal factor on the
/// x-edges must be below `1e-3 x` the max factor).
///
/// Strategy: Dijkstra from a landmark set (boundary mid-edges, the maximizer
/// of `u`, local maxima) plus farthest-point sweeps to locate extremal
/// pairs, then continuum relaxation of the best grid paths to remove the
/// lattice anisotropy bias.
pub fn diameter_estimate(
    u: &SolutionField,
    settings: &DiameterSettings,
) -> Result<DiameterEstimate, MetricError> {
    let mut per_level = Vec::new();
    let mut resolutions = Vec::new();
    let mut carried_pairs: Vec<(Complex64, Complex64)> = Vec::new();

    for level in 0..settings.levels.max(1) {
        let nx = (settings.nx - 1) * (1 << level) + 1;
        let ny = (settings.ny - 1) * (1 << level) + 1;
        let grid = ConformalGrid::build(u, settings.window, nx, ny)?;
        check_window(&grid)?;

        let mut landmarks = if level == 0 {
            initial_landmarks(&grid, settings.max_landmarks)
        } else {
            // Refined levels only re-examine what the coarse level found.
            let mut l: Vec<usize> = carried_pairs
                .iter()
                .flat_map(|&(p, q)| [p, q])
                .map(|z| {
                    let (i, j) = grid.nearest_node(z);
                    j * nx + i
                })
                .collect();
            l.push(argmax_weight(&grid));
            l.sort_unstable();
            l.dedup();
            l
        };

        let sweeps = if level == 0 { settings.sweeps } else { 1 };
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        let mut best_paths: Vec<(f64, Vec<Complex64>)> = Vec::new();
        for _ in 0..=sweeps {
            let mut next = Vec::new();
            for &lm in &landmarks {
                let (dist, pred) = grid.distances_from(lm);
                let far = dist
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i)
                    .unwrap();
                pairs.push((dist[far], lm, far));
                best_paths.push((dist[far], grid.path_nodes(&pred, far)));
                next.push(far);
            }
            next.sort_unstable();
            next.dedup();
            next.retain(|n| !landmarks.contains(n));
            if next.is_empty() {
                break;
            }
            landmarks = next;
        }

        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        best_paths.sort_by(|a, b| b.0.total_cmp(&a.0));
        let graph_diameter = pairs.first().map(|p| p.0).unwrap_or(0.0);
        resolutions.push((nx, ny, graph_diameter));

        // Relax the top distinct candidate paths off-lattice.
        let (hx, hy) = grid.spacing();
        let mut relaxed_best = 0.0_f64;
        let mut best_pair = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        let mut taken: Vec<(Complex64, Complex64)> = Vec::new();
        let sep = 5.0 * hx.max(hy);
        for (_, path) in best_paths.iter().take(8) {
            if path.len() < 2 {
                continue;
            }
            let ends = (path[0], *path.last().unwrap());
            if taken.iter().any(|&(p, q)| {
                ((p - ends.0).norm() < sep && (q - ends.1).norm() < sep)
                    || ((p - ends.1).norm() < sep && (q - ends.0).norm() < sep)
            }) {
                continue;
            }
            taken.push(ends);
            let h = hx.max(hy);
            let pre = relax_path(
                u,
                path,
                settings.window,
                settings.relax_vertices,
                settings.relax_rounds,
                h,
            )?;
            let mut relaxed = ascend_endpoints(u, pre.clone(), settings.window, h)?;
            relaxed = relax_path(
                u,
                &relaxed,
                settings.window,
                settings.relax_vertices,
                settings.relax_rounds / 2,
                0.5 * h,
            )?;
            let len = curve_length(u, &Curve::Polyline { points: relaxed.clone() }, 1e-9)?;
            // Both the polyline length and the grid distance between the
            // nearest nodes (plus the node-snap segments) are genuine upper
            // bounds on the endpoint distance, so each candidate contributes
            // the smaller of the two. This also discards wrapped paths:
            // endpoint ascent can push a path past an antipodal point, and
            // the wrapped extension is locally geodesic, so local relaxation
            // cannot undo it and the polyline length alone would overshoot.
            let pair_bound = |a: Complex64, b: Complex64| -> Result<f64, MetricError> {
                let na = grid.nearest_node(a);
                let nb = grid.nearest_node(b);
                Ok(grid.geodesic_distance(na, nb)?
                    + segment_length_g4(u, a, grid.node_point(na.0, na.1))?
                    + segment_length_g4(u, b, grid.node_point(nb.0, nb.1))?)
            };
            let a = relaxed[0];
            let b = *relaxed.last().unwrap();
            let bound = pair_bound(a, b)?;
            let (ends, len) = if len > 1.005 * bound {
                // Wrapped: fall back to the pre-ascent path and its own bound.
                let p = (pre[0], *pre.last().unwrap());
                let pre_len = curve_length(u, &Curve::Polyline { points: pre }, 1e-9)?;
                (p, pre_len.min(pair_bound(p.0, p.1)?))
            } else {
                ((a, b), len.min(bound))
            };
            if len > relaxed_best {
                relaxed_best = len;
                best_pair = ends;
            }
            if taken.len() >= 3 {
                break;
            }
        }
        carried_pairs = taken;
        per_level.push((relaxed_best, best_pair));
    }

    // Every per-level value is an upper bound on its pair distance, so
    // refinement tightens the estimate downward; report the finest level.
    let (lower, best_pair) = *per_level.last().unwrap();
    let last = lower;
    let extrapolated = if per_level.len() >= 2 {
        let prev = per_level[per_level.len() - 2].0;
        2.0 * last - prev
    } else {
        last
    };
    Ok(DiameterEstimate {
        lower,
        extrapolated,
        resolutions,
        window: settings.window,
        best_pair,
    })
}

fn check_window(grid: &ConformalGrid) -> Result<(), MetricError> {
    let (nx, ny) = grid.dims();
    let w = grid.weights();
    let max = w.iter().cloned().fold(0.0, f64::max);
    // Mass must escape through at least one edge pair: either the x-edges
    // decay (cylinder-type solutions, periodic in y) or the y-edges do (the
    // same picture rotated a quarter turn). Truncation error then falls off
    // exponentially in the window depth.
    let mut x_edges = 0.0_f64;
    for j in 0..ny {
        x_edges = x_edges.max(w[j * nx]).max(w[j * nx + nx - 1]);
    }
    let mut y_edges = 0.0_f64;
    for i in 0..nx {
        y_edges = y_edges.max(w[i]).max(w[(ny - 1) * nx + i]);
    }
    let boundary = x_edges.min(y_edges);
    if boundary > 1e-3 * max {
        return Err(MetricError::WindowTooSmall { boundary, max });
    }
    Ok(())
}

fn argmax_weight(grid: &ConformalGrid) -> usize {
    grid.weights()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap()
}

fn initial_landmarks(grid: &ConformalGrid, cap: usize) -> Vec<usize> {
    let (nx, ny) = grid.dims();
    let w = grid.weights();
    let mut landmarks = vec![
        nx / 2,                       // bottom mid-edge
        (ny - 1) * nx + nx / 2,       // top
        (ny / 2) * nx,                // left
        (ny / 2) * nx + nx - 1,       // right
        argmax_weight(grid),
    ];
    // Strict local maxima of the conformal factor, best first.
    let mut maxima: Vec<(f64, usize)> = Vec::new();
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let idx = j * nx + i;
            let v = w[idx];
            let is_max = [
                idx - 1,
                idx + 1,
                idx - nx,
                idx + nx,
                idx - nx - 1,
                idx - nx + 1,
                idx + nx - 1,
                idx + nx + 1,
            ]
            .iter()
            .all(|&n| w[n] < v);
            if is_max {
                maxima.push((v, idx));
            }
        }
    }
    maxima.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for (_, idx) in maxima.into_iter().take(cap) {
        landmarks.push(idx);
    }
    landmarks.sort_unstable();
    landmarks.dedup();
    landmarks
}

/// 4-point Gauss–Legendre nodes/weights on [0, 1].
const G4X: [f64; 4] = [0.069431844202974, 0.330009478207572, 0.669990521792428, 0.930568155797026];
const G4W: [f64; 4] = [0.173927422568727, 0.326072577431273, 0.326072577431273, 0.173927422568727];

fn segment_length_g4(u: &SolutionField, a: Complex64, b: Complex64) -> Result<f64, FieldError> {
    let speed = (b - a).norm();
    let mut s = 0.0;
    for k in 0..4 {
        s += G4W[k] * u.value(a + (b - a) * G4X[k])?.exp();
    }
    Ok(s * speed)
}

fn resample_by_conformal_length(
    u: &SolutionField,
    path: &[Complex64],
    n: usize,
) -> Result<Vec<Complex64>, FieldError> {
    let mut cum = vec![0.0];
    for w in path.windows(2) {
        let l = segment_length_g4(u, w[0], w[1])?;
        cum.push(cum.last().unwrap() + l.max(1e-300));
    }
    let total = *cum.last().unwrap();
    let mut out = Vec::with_capacity(n);
    out.push(path[0]);
    let mut seg = 0;
    for k in 1..n - 1 {
        let target = total * k as f64 / (n - 1) as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < target {
            seg += 1;
        }
        let f = (target - cum[seg]) / (cum[seg + 1] - cum[seg]);
        out.push(path[seg] + (path[seg + 1] - path[seg]) * f);
    }
    out.push(*path.last().unwrap());
    Ok(out)
}

/// Coordinate-descent shortening of a lattice path in the continuum: each
/// interior vertex tries sideways moves with a shrinking step, with periodic
/// resampling to equal conformal arclength. Removes the `<= 8.2%`
/// anisotropy overestimate of 8-connected grid geodesics.
fn relax_path(
    u: &SolutionField,
    path: &[Complex64],
    window: Rect,
    vertices: usize,
    rounds: usize,
    initial_step: f64,
) -> Result<Vec<Complex64>, MetricError> {
    let n = vertices.max(16);
    let mut pts = resample_by_conformal_length(u, path, n)?;
    let clamp = |z: Complex64| -> Complex64 {
        Complex64::new(
            z.re.clamp(window.x_min, window.x_max),
            z.im.clamp(window.y_min, window.y_max),
        )
    };
    let mut step = initial_step;
    for round in 0..rounds {
        for parity in 0..2 {
            let mut i = 1 + parity;
            while i < n - 1 {
                let (a, b) = (pts[i - 1], pts[i + 1]);
                let tangent = b - a;
                let tn = tangent.norm();
                if tn > 0.0 {
                    let normal = Complex64::new(-tangent.im, tangent.re) / tn;
                    let mut best = pts[i];
                    let mut best_e =
                        segment_length_g4(u, a, best)? + segment_length_g4(u, best, b)?;
                    for mv in [step, -step, 0.35 * step, -0.35 * step] {
                        let cand = clamp(pts[i] + normal * mv);
                        if cand == a || cand == b {
                            continue;
                        }
                        let e = segment_length_g4(u, a, cand)? + segment_length_g4(u, cand, b)?;
                        if e < best_e {
                            best_e = e;
                            best = cand;
                        }
                    }
                    pts[i] = best;
                }
                i += 2;
            }
        }
        if round % 5 == 4 {
            pts.dedup();
            if pts.len() >= 2 {
                pts = resample_by_conformal_length(u, &pts, n)?;
            }
        }
        step *= 0.78;
    }
    pts.dedup();
    Ok(pts)
}

fn quick_length(u: &SolutionField, pts: &[Complex64]) -> Result<f64, FieldError> {
    let mut s = 0.0;
    for w in pts.windows(2) {
        if w[0] != w[1] {
            s += segment_length_g4(u, w[0], w[1])?;
        }
    }
    Ok(s)
}

/// Re-minimizes only the `span` vertices nearest one end after an endpoint
/// move; the rest of the path is unaffected by a small local change.
fn relax_near(
    u: &SolutionField,
    pts: &mut [Complex64],
    window: Rect,
    from_start: bool,
    span: usize,
    passes: usize,
    step: f64,
) -> Result<(), FieldError> {
    let n = pts.len();
    let clamp = |z: Complex64| -> Complex64 {
        Complex64::new(
            z.re.clamp(window.x_min, window.x_max),
            z.im.clamp(window.y_min, window.y_max),
        )
    };
    let idx: Vec<usize> = if from_start {
        (1..span.min(n - 1)).collect()
    } else {
        ((n - 1).saturating_sub(span).max(1)..n - 1).collect()
    };
    let mut s = step;
    for _ in 0..passes {
        for &i in &idx {
            let (a, b) = (pts[i - 1], pts[i + 1]);
            let tangent = b - a;
            let tn = tangent.norm();
            if tn == 0.0 {
                continue;
            }
            let normal = Complex64::new(-tangent.im, tangent.re) / tn;
            let mut best = pts[i];
            let mut best_e = segment_length_g4(u, a, best)? + segment_length_g4(u, best, b)?;
            for mv in [s, -s, 0.35 * s, -0.35 * s] {
                let cand = clamp(pts[i] + normal * mv);
                if cand == a || cand == b {
                    continue;
                }
                let e = segment_length_g4(u, a, cand)? + segment_length_g4(u, cand, b)?;
                if e < best_e {
                    best_e = e;
                    best = cand;
                }
            }
            pts[i] = best;
        }
        s *= 0.6;
    }
    Ok(())
}

/// Local ascent on the endpoints of a relaxed path: the diameter is a
/// sup-inf, and on sharply peaked metrics the extremal points fall between
/// lattice nodes, so the grid endpoints can sit far (in the metric) from
/// the true maximizers. Each candidate endpoint move is scored after a
/// short local re-minimization of the path.
fn ascend_endpoints(
    u: &SolutionField,
    mut pts: Vec<Complex64>,
    window: Rect,
    grid_step: f64,
) -> Result<Vec<Complex64>, MetricError> {
    if pts.len() < 8 {
        return Ok(pts);
    }
    let clamp = |z: Complex64| -> Complex64 {
        Complex64::new(
            z.re.clamp(window.x_min, window.x_max),
            z.im.clamp(window.y_min, window.y_max),
        )
    };
    let dirs: Vec<Complex64> = (0..8)
        .map(|k| Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4 * k as f64))
        .collect();
    let mut step = 2.0 * grid_step;
    let span = 14;
    for _ in 0..18 {
        for end in [true, false] {
            let slot = if end { 0 } else { pts.len() - 1 };
            let mut best_len = quick_length(u, &pts)?;
            let mut best: Option<Vec<Complex64>> = None;
            for d in &dirs {
                let cand_pt = clamp(pts[slot] + d * step);
                if cand_pt == pts[slot] {
                    continue;
                }
                let mut cand = pts.clone();
                cand[slot] = cand_pt;
                relax_near(u, &mut cand, window, end, span, 3, 0.5 * step)?;
                let len = quick_length(u, &cand)?;
                if len > best_len + 1e-12 {
                    best_len = len;
                    best = Some(cand);
                }
            }
            if let Some(b) = best {
                pts = b;
            }
        }
        step *= 0.7;
    }
    pts.dedup();
    Ok(pts)
}

#[derive(Debug, Clone)]
pub struct NevanlinnaSettings {
    pub rel_tol: f64,
    pub max_panels: usize,
    pub min_theta: usize,
    pub max_theta: usize,
}

impl Default for NevanlinnaSettings {
    fn default() -> Self {
        NevanlinnaSettings {
            rel_tol: 1e-6,
            max_panels: 4000,
            min_theta: 64,
            max_theta: 1 << 15,
        }
    }
}

/// `A(r, f) = (1/4π) ∫_{|z| <= r} (f^#)² dx dy`: the mean covering number of
/// the sphere by `f` over the disk of radius `r`.
pub fn nevanlinna_a(
    f: &DevelopingMap,
    r: f64,
    settings: &NevanlinnaSettings,
) -> Result<f64, MetricError> {
    if !(r > 0.0) {
        return Err(MetricError::InvalidCurve(format!("radius must be positive, got {r}")));
    }
    let failed: RefCell<Option<MapError>> = RefCell::new(None);
    let sq = |z: Complex64| -> f64 {
        match f.log_spherical_derivative(z) {
            Ok(v) => (2.0 * v).exp(),
            Err(e) => {
                failed.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    // Periodic trapezoid with doubling: superalgebraic for smooth integrands.
    let ring = |rho: f64| -> f64 {
        if rho == 0.0 {
            return 2.0 * std::f64::consts::PI * sq(Complex64::new(0.0, 0.0));
        }
        let mut n = settings.min_theta;
        let tau = 2.0 * std::f64::consts::PI;
        let eval = |n: usize| -> f64 {
            (0..n).map(|k| sq(Complex64::from_polar(rho, tau * k as f64 / n as f64))).sum::<f64>()
                * tau
                / n as f64
        };
        let mut prev = eval(n);
        loop {
            n *= 2;
            let cur = eval(n);
            if (cur - prev).abs() <= 0.1 * settings.rel_tol * cur.abs() + 1e-300
                || n >= settings.max_theta
            {
                return cur;
            }
            prev = cur;
        }
    };
    let v = adaptive_quad(
        &|rho| ring(rho) * rho / (4.0 * std::f64::consts::PI),
        0.0,
        r,
        settings.rel_tol,
        settings.max_panels,
    )?;
    if let Some(e) = failed.into_inner() {
        return Err(MetricError::Map(e));
    }
    Ok(v)
}

/// `T(r, f) = ∫_0^r A(t, f) dt/t`, computed with a quadratic head below
/// `t0` (where `A(t) = O(t²)`) and the trapezoid rule in `log t` above it.
pub fn nevanlinna_t(
    f: &DevelopingMap,
    r: f64,
    samples: usize,
    settings: &NevanlinnaSettings,
) -> Result<f64, MetricError> {
    if !(r > 0.0) {
        return Err(MetricError::InvalidCurve(format!("radius must be positive, got {r}")));
    }
    let n = samples.max(16);
    let t0 = (0.01 * r).min(0.05);
    let a0 = nevanlinna_a(f, t0, settings)?;
    let mut total = 0.5 * a0; // ∫_0^{t0} A/t dt with A ≈ A(t0) (t/t0)²
    let ds = (r / t0).ln() / (n - 1) as f64;
    let mut prev = a0;
    for k in 1..n {
        let t = t0 * (ds * k as f64).exp();
        let a = nevanlinna_a(f, t, settings)?;
        total += 0.5 * (prev + a) * ds;
        prev = a;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Provenance, Transform};
    use crate::geometry::{spherical_distance, ExtPoint};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn field(p: Provenance) -> SolutionField {
        SolutionField::new(p, Transform::identity()).unwrap()
    }

    #[test]
    fn radial_segment_lengths() {
        let radial = field(Provenance::Radial);
        for r in [0.5, 2.0, 5.0] {
            let seg = Curve::Segment { from: c(0.0, 0.0), to: c(r, 0.0) };
            assert_abs_diff_eq!(
                curve_length(&radial, &seg, 1e-10).unwrap(),
                2.0 * r.atan(),
                epsilon = 1e-8
            );
        }
        let long = Curve::Segment { from: c(0.0, 0.0), to: c(1e6, 0.0) };
        assert_abs_diff_eq!(curve_length(&radial, &long, 1e-10).unwrap(), PI, epsilon = 1e-5);
    }

    #[test]
    fn t_family_line_integral() {
        for t in [0.0, 1.0, 5.0] {
            let u = field(Provenance::TFamily { t });
            let line = Curve::Segment { from: c(-40.0, PI), to: c(40.0, PI) };
            assert_abs_diff_eq!(
                curve_length(&u, &line, 1e-10).unwrap(),
                PI + 2.0 * t.atan(),
                epsilon = 1e-4
            );
        }
    }

    #[test]
    fn length_additive_under_concatenation() {
        let u = field(Provenance::TFamily { t: 0.7 });
        let whole = Curve::Segment { from: c(-2.0, 0.3), to: c(3.0, 1.1) };
        let mid = c(0.4, 0.684);
        let a = Curve::Segment { from: c(-2.0, 0.3), to: mid };
        let b = Curve::Segment { from: mid, to: c(3.0, 1.1) };
        let total = curve_length(&u, &whole, 1e-10).unwrap();
        let parts = curve_length(&u, &a, 1e-10).unwrap() + curve_length(&u, &b, 1e-10).unwrap();
        assert_abs_diff_eq!(total, parts, epsilon = 1e-8);
    }

    #[test]
    fn length_dominates_spherical_endpoint_distance() {
        let u = field(Provenance::TFamily { t: 0.0 });
        let f = DevelopingMap::exp_family(0.0, None).unwrap();
        let (za, zb) = (c(0.0, -PI), c(0.0, PI));
        let seg = Curve::Segment { from: za, to: zb };
        let len = curve_length(&u, &seg, 1e-10).unwrap();
        let d = spherical_distance(
            f.value(za).unwrap(),
            f.value(zb).unwrap(),
        );
        assert!(len >= d - 1e-9, "len {len} < spherical {d}");
    }

    #[test]
    fn grid_metric_axioms() {
        let u = field(Provenance::Radial);
        let grid = ConformalGrid::build(&u, Rect::centered_square(5.0), 41, 41).unwrap();
        assert_eq!(grid.geodesic_distance((7, 9), (7, 9)).unwrap(), 0.0);
        let d_ab = grid.geodesic_distance((3, 4), (30, 22)).unwrap();
        let d_ba = grid.geodesic_distance((30, 22), (3, 4)).unwrap();
        assert_abs_diff_eq!(d_ab, d_ba, epsilon = 1e-12);
        let d_ac = grid.geodesic_distance((3, 4), (15, 35)).unwrap();
        let d_cb = grid.geodesic_distance((15, 35), (30, 22)).unwrap();
        assert!(d_ab <= d_ac + d_cb + 1e-12);
    }

    #[test]
    fn radial_grid_geodesic_matches_closed_form() {
        let u = field(Provenance::Radial);
        let grid = ConformalGrid::build(&u, Rect::centered_square(100.0), 1001, 1001).unwrap();
        let center = grid.nearest_node(c(0.0, 0.0));
        let edge = grid.nearest_node(c(100.0, 0.0));
        let d = grid.geodesic_distance(center, edge).unwrap();
        let exact = 2.0 * 100.0_f64.atan();
        assert!((d - exact).abs() / exact < 0.02, "graph {d} vs exact {exact}");
        // Dominated from below by the true geodesic distance.
        assert!(d >= exact - 1e-6);
    }

    #[test]
    fn grid_lower_bounds_spherical_distance() {
        let u = field(Provenance::TFamily { t: 0.0 });
        let f = DevelopingMap::exp_family(0.0, None).unwrap();
        let grid = ConformalGrid::build(
            &u,
            Rect::new(-6.0, 6.0, -1.25 * PI, 1.25 * PI),
            121,
            121,
        )
        .unwrap();
        let a = grid.nearest_node(c(0.0, -PI));
        let b = grid.nearest_node(c(0.0, PI));
        let d = grid.geodesic_distance(a, b).unwrap();
        let pa = grid.node_point(a.0, a.1);
        let pb = grid.node_point(b.0, b.1);
        let ds = spherical_distance(f.value(pa).unwrap(), f.value(pb).unwrap());
        assert!(d >= ds - 1e-9);
    }

    #[test]
    fn radial_diameter_close_to_pi() {
        let u = field(Provenance::Radial);
        let settings = DiameterSettings {
            window: Rect::centered_square(100.0),
            nx: 201,
            ny: 201,
            levels: 2,
            ..DiameterSettings::default()
        };
        let est = diameter_estimate(&u, &settings).unwrap();
        assert!((est.lower - PI).abs() / PI < 0.01, "diameter {}", est.lower);
        assert!(est.lower < 2.0 * PI);
        // Graph values shrink under refinement, and the relaxed estimate
        // stays within the wrap-guard slack of the coarse graph value.
        assert!(est.resolutions[1].2 <= est.resolutions[0].2 + 0.01);
        assert!(est.lower <= 1.06 * est.resolutions[0].2);
    }

    #[test]
    fn window_rule_enforced() {
        let u = field(Provenance::Radial);
        let settings = DiameterSettings {
            window: Rect::centered_square(3.0),
            nx: 64,
            ny: 64,
            levels: 1,
            ..DiameterSettings::default()
        };
        assert!(matches!(
            diameter_estimate(&u, &settings),
            Err(MetricError::WindowTooSmall { .. })
        ));
    }

    #[test]
    fn nevanlinna_identity_mobius() {
        let id = DevelopingMap::identity();
        let s = NevanlinnaSettings::default();
        for r in [0.5, 1.0, 2.0] {
            assert_abs_diff_eq!(
                nevanlinna_a(&id, r, &s).unwrap(),
                r * r / (1.0 + r * r),
                epsilon = 1e-6
            );
        }
        assert_abs_diff_eq!(nevanlinna_a(&id, 1e4, &s).unwrap(), 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(
            nevanlinna_t(&id, 1.0, 64, &s).unwrap(),
            0.5 * 2.0_f64.ln(),
            epsilon = 2e-3
        );
        let t100 = nevanlinna_t(&id, 100.0, 96, &s).unwrap();
        assert!((t100 / 100.0_f64.ln() - 1.0).abs() < 0.02, "T(100) = {t100}");
    }

    #[test]
    fn nevanlinna_exp_family_linear_growth() {
        let f = DevelopingMap::exp_family(0.0, None).unwrap();
        let s = NevanlinnaSettings { rel_tol: 1e-5, ..NevanlinnaSettings::default() };
        let a40 = nevanlinna_a(&f, 40.0, &s).unwrap();
        assert!((a40 / 40.0 - 1.0 / PI).abs() / (1.0 / PI) < 0.03, "A(40)/40 = {}", a40 / 40.0);
        let a20 = nevanlinna_a(&f, 20.0, &s).unwrap();
        assert!(a40 >= a20);
    }

    #[test]
    fn curve_validation() {
        assert!(Curve::Segment { from: c(1.0, 0.0), to: c(1.0, 0.0) }.validate().is_err());
        assert!(Curve::Polyline { points: vec![c(0.0, 0.0)] }.validate().is_err());
        assert!(matches!(
            ExtPoint::finite(0.0, 0.0),
            ExtPoint::Finite(_)
        ));
    }
}
