//! Constructors for the initial surfaces and auxiliary objects: spheres,
//! pills, dumbbells, axial spikes, pancakes, stacked pancakes, bowl solitons,
//! and the tube-straightening chart.
//!
//! Piecewise-arc shapes are assembled by integrating a continuous curvature
//! profile (arcs joined by quintic curvature ramps), so every constructor
//! output is C^2 up to sampling. Corner intent follows the source geometry:
//! pill caps are hemispheres with a small fillet, pancake corner circles sit
//! at `(p +- (d + r/2), c + d + r/100)`, and spike graphs are a capped core
//! tube mollified into an asymptotically flat tail.

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::profile::{curvature_from_principal, ProfileCurve, Topology};
use nalgebra::{Point3, Vector3};

// ---------------------------------------------------------------------------
// small helpers
// ---------------------------------------------------------------------------

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Quintic on [0,1] with prescribed value/first/second derivative at both ends.
fn quintic_hermite(y0: f64, d0: f64, s0: f64, y1: f64, d1: f64, s1: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
    let h3 = 0.5 * t3 - t4 + 0.5 * t5;
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h5 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    h0 * y0 + h1 * d0 + h2 * s0 + h3 * s1 + h4 * d1 + h5 * y1
}

/// Polyline builder that integrates a tangent-angle/curvature description.
/// Curvature is the signed turning rate of the tangent angle.
struct PathBuilder {
    pts: Vec<[f64; 2]>,
    pos: [f64; 2],
    phi: f64,
    emit_h: f64,
    since_emit: f64,
}

impl PathBuilder {
    fn new(start: [f64; 2], phi0: f64, emit_h: f64) -> Self {
        PathBuilder {
            pts: vec![start],
            pos: start,
            phi: phi0,
            emit_h,
            since_emit: 0.0,
        }
    }

    /// March length `len` with curvature `kappa(s)`; `s` is local arclength.
    fn march(&mut self, len: f64, kappa: impl Fn(f64) -> f64) {
        if len <= 0.0 {
            return;
        }
        let sub = (len / (self.emit_h * 0.2)).ceil().max(4.0) as usize;
        let ds = len / sub as f64;
        let mut s = 0.0;
        for _ in 0..sub {
            // midpoint rule on the tangent angle
            let k_mid = kappa(s + 0.5 * ds);
            let phi_mid = self.phi + 0.5 * ds * k_mid;
            self.pos[0] += ds * phi_mid.cos();
            self.pos[1] += ds * phi_mid.sin();
            self.phi += ds * k_mid;
            s += ds;
            self.since_emit += ds;
            if self.since_emit >= self.emit_h {
                self.pts.push(self.pos);
                self.since_emit = 0.0;
            }
        }
        if self.since_emit > 1e-12 * len.max(1.0) {
            self.pts.push(self.pos);
            self.since_emit = 0.0;
        }
    }

    fn line(&mut self, len: f64) {
        self.march(len, |_| 0.0);
    }

    /// Curvature ramp `k0 -> k1` by a smoothstep over length `len`.
    /// Total turn is `(k0 + k1)/2 * len` by symmetry.
    fn blend(&mut self, k0: f64, k1: f64, len: f64) {
        self.march(len, |s| k0 + (k1 - k0) * smoothstep(s / len));
    }

    fn finish(self) -> Vec<[f64; 2]> {
        self.pts
    }
}

fn mirror_and_join(mut half: Vec<[f64; 2]>, about_x: f64) -> Vec<[f64; 2]> {
    // half runs from the left pole to the symmetry plane; append the mirror
    let mut out = half.clone();
    half.reverse();
    for p in half.iter().skip(1) {
        out.push([2.0 * about_x - p[0], p[1]]);
    }
    out
}

// ---------------------------------------------------------------------------
// basic bodies
// ---------------------------------------------------------------------------

/// Round sphere profile of radius `radius`. `count = 0` picks a default
/// resolution.
pub fn make_sphere(radius: f64, n: u32, count: usize) -> Result<ProfileCurve> {
    if radius <= 0.0 {
        return Err(Error::Construction("sphere radius must be positive".into()));
    }
    let count = if count == 0 { 257 } else { count.max(8) };
    let mut samples: Vec<[f64; 2]> = (0..count)
        .map(|i| {
            let t = std::f64::consts::PI * (i as f64 / (count - 1) as f64 - 0.5);
            [radius * t.sin(), radius * t.cos()]
        })
        .collect();
    samples[0] = [-radius, 0.0];
    samples[count - 1] = [radius, 0.0];
    ProfileCurve::new(samples, Topology::AxisToAxis, n)
}

/// Convex pill: tube of radius `r` around an axis segment of length `len`,
/// capped by hemispheres with a curvature fillet of width `fillet_frac * r`
/// at the cap junctions. Centered at x = 0.
pub fn make_pill(len: f64, r: f64, n: u32) -> Result<ProfileCurve> {
    make_pill_with(len, r, n, 0.05, r / 48.0)
}

pub fn make_pill_with(
    len: f64,
    r: f64,
    n: u32,
    fillet_frac: f64,
    emit_h: f64,
) -> Result<ProfileCurve> {
    if len <= 0.0 || r <= 0.0 {
        return Err(Error::Construction(
            "pill needs positive length and radius".into(),
        ));
    }
    let w_f = fillet_frac * r;
    if std::f64::consts::FRAC_PI_2 * r - 0.5 * w_f <= 0.0 {
        return Err(Error::Construction("pill fillet too wide".into()));
    }
    // the curvature fillet perturbs the cap height slightly; one corrector
    // pass on the cap radius lands the wall at radius r to high accuracy
    let mut r_cap = r;
    for _ in 0..2 {
        let half = pill_half(r_cap, w_f, emit_h);
        let r_wall = half.last().unwrap()[1];
        r_cap *= r / r_wall;
    }
    let mut b = pill_half_builder(r_cap, w_f, emit_h);
    let x_now = b.pos[0];
    let wall = (r + 0.5 * len) - x_now;
    if wall < 0.0 {
        return Err(Error::Construction(
            "pill too short for the requested fillet".into(),
        ));
    }
    b.line(wall);
    let mut half = b.finish();
    half[0] = [0.0, 0.0];
    let about_x = half.last().unwrap()[0];
    let mut samples = mirror_and_join(half, about_x);
    for p in samples.iter_mut() {
        p[0] -= about_x; // center at x = 0
    }
    let last = samples.len() - 1;
    samples[last][1] = 0.0;
    ProfileCurve::new(dedup_close(samples), Topology::AxisToAxis, n)
}

/// Cap quarter-turn with a smoothstep curvature fillet of width `w_f`; the
/// symmetric ramp makes the total turn exactly -pi/2.
fn pill_half_builder(r_cap: f64, w_f: f64, emit_h: f64) -> PathBuilder {
    let mut b = PathBuilder::new([0.0, 0.0], std::f64::consts::FRAC_PI_2, emit_h);
    let quarter = std::f64::consts::FRAC_PI_2 * r_cap;
    b.march(quarter - 0.5 * w_f, |_| -1.0 / r_cap);
    b.blend(-1.0 / r_cap, 0.0, w_f);
    b
}

fn pill_half(r_cap: f64, w_f: f64, emit_h: f64) -> Vec<[f64; 2]> {
    pill_half_builder(r_cap, w_f, emit_h).finish()
}

/// Drop consecutive samples closer than 1e-9 of the bounding scale.
fn dedup_close(samples: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    let mut scale: f64 = 0.0;
    for s in &samples {
        scale = scale.max(s[0].abs()).max(s[1].abs());
    }
    let tol = 1e-9 * scale.max(1e-12);
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(samples.len());
    for s in samples {
        if let Some(last) = out.last() {
            if (s[0] - last[0]).hypot(s[1] - last[1]) < tol {
                continue;
            }
        }
        out.push(s);
    }
    out
}

/// Dumbbell: two spherical bulbs of radius `r_bulb` joined by a neck of
/// radius `r_neck`. `l_neck` is the axial gap between the bulb spheres.
/// The neck blend is a quintic graph segment matching value, slope, and
/// curvature on the bulb side; it is a contrast control, not a paper shape.
pub fn make_dumbbell(r_bulb: f64, r_neck: f64, l_neck: f64, n: u32) -> Result<ProfileCurve> {
    if r_bulb <= 0.0 || r_neck <= 0.0 || l_neck <= 0.0 {
        return Err(Error::Construction("dumbbell needs positive parameters".into()));
    }
    if r_neck >= r_bulb {
        return Err(Error::Construction(
            "dumbbell neck radius must be below the bulb radius".into(),
        ));
    }
    let c = 0.5 * l_neck + r_bulb; // bulb centers at +-c
    let alpha_j = 1.05_f64; // polar angle on the bulb where the blend begins
    let x_j = -c + r_bulb * alpha_j.cos(); // blend start (left side)
    let x_n = 0.25 * l_neck; // flat neck on [-x_n, x_n]
    if x_j >= -x_n {
        return Err(Error::Construction(
            "dumbbell neck too short for the blend".into(),
        ));
    }
    let h = r_bulb / 96.0;
    let mut samples: Vec<[f64; 2]> = Vec::new();
    // left bulb arc from the pole to the blend start
    let arc_steps = ((std::f64::consts::PI - alpha_j) * r_bulb / h).ceil() as usize;
    for i in 0..=arc_steps {
        let a = std::f64::consts::PI
            - (std::f64::consts::PI - alpha_j) * (i as f64 / arc_steps as f64);
        samples.push([-c + r_bulb * a.cos(), r_bulb * a.sin()]);
    }
    samples[0] = [-c - r_bulb, 0.0];
    // quintic blend from the bulb (value/slope/curvature matched) to the neck
    let y0 = r_bulb * alpha_j.sin();
    let slope0 = -1.0 / (alpha_j.sin() / alpha_j.cos()); // du/dx on the circle: -cot(alpha)
    let circle_d2 = -(1.0 + slope0 * slope0).powf(1.5) / r_bulb;
    let w = -x_n - x_j;
    let blend_steps = (w / h).ceil() as usize;
    for i in 1..=blend_steps {
        let t = i as f64 / blend_steps as f64;
        let u = quintic_hermite(
            y0,
            slope0 * w,
            circle_d2 * w * w,
            r_neck,
            0.0,
            0.0,
            t,
        );
        samples.push([x_j + t * w, u]);
    }
    // flat neck up to the symmetry plane
    let neck_steps = ((x_n / h).ceil() as usize).max(4);
    for i in 1..=neck_steps {
        samples.push([-x_n + x_n * i as f64 / neck_steps as f64, r_neck]);
    }
    // mirror the left half (everything strictly left of x = 0 was pushed)
    let half: Vec<[f64; 2]> = samples.clone();
    for p in half.iter().rev() {
        if p[0] < -1e-14 {
            samples.push([-p[0], p[1]]);
        }
    }
    for s in samples.iter_mut() {
        if s[1] < 0.0 {
            s[1] = 0.0;
        }
    }
    ProfileCurve::new(samples, Topology::AxisToAxis, n)
}

// ---------------------------------------------------------------------------
// spike graphs (capped thin tubes over a plane)
// ---------------------------------------------------------------------------

/// Spike orientation relative to the base surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpikeOrientation {
    Outward,
    Inward,
}

/// Parameters of a rotationally symmetric spike graph.
#[derive(Debug, Clone, Copy)]
pub struct SpikeSpec {
    /// Spike height: g(0).
    pub l: f64,
    /// Core tube radius.
    pub r: f64,
    /// Flattening radius: the graph is delta2-flat well inside [0, R].
    pub big_r: f64,
    /// C^2 closeness target of the flat tail.
    pub delta2: f64,
    pub orientation: SpikeOrientation,
    /// Fillet radius at the base; defaults to `r` when zero.
    pub fillet: f64,
}

impl SpikeSpec {
    pub fn new(l: f64, r: f64, big_r: f64, delta2: f64, orientation: SpikeOrientation) -> Self {
        SpikeSpec {
            l,
            r,
            big_r,
            delta2,
            orientation,
            fillet: 0.0,
        }
    }
}

/// Verification report for the five spike-graph conditions. Two-convexity is
/// checked on the spike body `[0, body_end]`; the flat-tail bound is checked
/// on `[tail_start, R]`. A strictly two-convex junction cannot flatten to a
/// delta2-small tail inside a bounded annulus (the catenoid is the marginal
/// profile), so the two check regions are disjoint by construction and both
/// margins are reported.
#[derive(Debug, Clone)]
pub struct SpikeReport {
    pub tip_height: f64,
    pub min_two_convexity_body: f64,
    pub min_two_convexity_full: f64,
    pub unique_max_at_zero: bool,
    pub strictly_decreasing: bool,
    pub tip_has_max_h: bool,
    pub tail_value: f64,
    pub tail_slope: f64,
    pub tail_curv: f64,
    pub max_a2: f64,
    pub body_end: f64,
    pub tail_start: f64,
}

/// A sampled spike graph `g(rho)` on a uniform grid over [0, R].
#[derive(Debug, Clone)]
pub struct SpikeGraph {
    pub rho: Vec<f64>,
    pub g: Vec<f64>,
    pub report: SpikeReport,
}

const SPIKE_TAIL_START_FACTOR: f64 = 6.0;

/// Assemble a spike graph: hemispherical cap + slightly tapered tube wall +
/// base fillet + exponentially decaying toe, then mollified by a bump kernel
/// of width r/10. The five graph conditions are verified post hoc and a
/// violated condition aborts construction.
pub fn spike_graph(spec: &SpikeSpec, n: u32) -> Result<SpikeGraph> {
    let SpikeSpec {
        l,
        r,
        big_r,
        delta2,
        ..
    } = *spec;
    if r <= 0.0 || big_r <= 0.0 || delta2 <= 0.0 {
        return Err(Error::Construction("spike needs positive r, R, delta2".into()));
    }
    if l == 0.0 {
        return Err(Error::Construction(
            "condition (4) violated: flat graph has no unique maximum (L = 0)".into(),
        ));
    }
    if l < 0.0 {
        return Err(Error::Construction("spike height must be nonnegative".into()));
    }
    let tail_start = SPIKE_TAIL_START_FACTOR * r;
    if tail_start >= 0.8 * big_r {
        return Err(Error::Construction(format!(
            "condition (5) support violated: core radius {r} too close to flattening radius {big_r}"
        )));
    }
    if delta2 >= 0.2 * r {
        return Err(Error::Construction(
            "spike needs delta2 much smaller than r".into(),
        ));
    }
    let fillet = if spec.fillet > 0.0 { spec.fillet } else { r };

    // toe geometry: land at slope s_land and height h_land, then decay
    // exponentially with length scale w_toe (value and slope continuous)
    let taper = 0.06_f64; // wall taper angle from vertical
    let s_land = 0.02_f64;
    let w_toe = r / 4.0;
    let h_land = s_land * w_toe;

    let phi_wall = -(std::f64::consts::FRAC_PI_2 - taper);
    let phi_land = -s_land.atan();
    let drop_fillet = fillet * (phi_land.cos() - phi_wall.cos());
    let cap_turn = -phi_wall; // tip tangent horizontal -> wall angle
    if l < 2.0 * r + drop_fillet + h_land {
        return Err(Error::Construction(format!(
            "spike height {l} too small for core radius {r} (cap + fillet need ~{:.3})",
            2.0 * r + drop_fillet + h_land
        )));
    }

    let emit_h = (r / 24.0).min(w_toe / 8.0);
    let mut b = PathBuilder::new([0.0, l], 0.0, emit_h);
    b.march(cap_turn * r, |_| -1.0 / r); // cap arc, turns by -cap_turn
    // wall down to the fillet start height
    let h_fillet_start = h_land + drop_fillet;
    let wall_len = (b.pos[1] - h_fillet_start) / phi_wall.sin().abs();
    if wall_len < 0.0 {
        return Err(Error::Construction("spike cap/fillet overlap".into()));
    }
    b.line(wall_len);
    // 2-convexity can only hold up to here: the base fillet and flat tail
    // necessarily dip below marginal (catenoid-like) convexity
    let body_end_rho = b.pos[0] - 0.15 * r;
    // fillet: concave turn from the wall angle to the landing slope
    b.march(fillet * (phi_land - phi_wall), |_| 1.0 / fillet);
    let land = b.pos;
    let mut curve = b.finish();
    // exponential toe: value h_land, slope -s_land at the landing, scale w_toe
    let amp = land[1];
    let mut rho_t = land[0];
    while rho_t < big_r {
        rho_t += emit_h * 2.0;
        let v = amp * (-(rho_t - land[0]) / w_toe).exp();
        curve.push([rho_t.min(big_r), v]);
        if rho_t >= big_r {
            break;
        }
    }

    // resample onto a uniform rho grid (the assembled curve is monotone in rho)
    let grid_n = ((big_r / (r / 40.0)).ceil() as usize).clamp(200, 40_000);
    let mut rho = Vec::with_capacity(grid_n + 1);
    let mut g0 = Vec::with_capacity(grid_n + 1);
    let mut k = 0usize;
    for i in 0..=grid_n {
        let x = big_r * i as f64 / grid_n as f64;
        while k + 1 < curve.len() && curve[k + 1][0] < x {
            k += 1;
        }
        let (a, bb) = (curve[k], curve[(k + 1).min(curve.len() - 1)]);
        let tau = if bb[0] > a[0] {
            ((x - a[0]) / (bb[0] - a[0])).clamp(0.0, 1.0)
        } else {
            0.0
        };
        rho.push(x);
        g0.push((a[1] + tau * (bb[1] - a[1])).max(0.0));
    }

    // mollify with a compact bump kernel of width r/10 (even extension at 0)
    let g = bump_mollify(&rho, &g0, r / 10.0);

    let report = verify_spike(&rho, &g, n, body_end_rho, tail_start, big_r)?;
    check_spike_conditions(&report, delta2)?;
    Ok(SpikeGraph { rho, g, report })
}

fn bump_mollify(xs: &[f64], ys: &[f64], width: f64) -> Vec<f64> {
    let h = xs[1] - xs[0];
    let m = (width / h).round() as i64;
    if m < 2 {
        return ys.to_vec();
    }
    // bump kernel exp(-1/(1-t^2)) on (-1, 1)
    let mut w = Vec::with_capacity((2 * m + 1) as usize);
    for j in -m..=m {
        let t = j as f64 / m as f64;
        if t.abs() >= 1.0 {
            w.push(0.0);
        } else {
            w.push((-1.0 / (1.0 - t * t)).exp());
        }
    }
    let norm: f64 = w.iter().sum();
    let n = ys.len() as i64;
    let mut out = Vec::with_capacity(ys.len());
    for i in 0..n {
        let mut acc = 0.0;
        for j in -m..=m {
            let mut idx = i + j;
            if idx < 0 {
                idx = -idx; // even extension through rho = 0
            }
            if idx >= n {
                idx = n - 1; // flat extension on the tail
            }
            acc += w[(j + m) as usize] * ys[idx as usize];
        }
        out.push(acc / norm);
    }
    out
}

fn graph_principal_curvatures(rho: &[f64], g: &[f64], i: usize, n: u32) -> (f64, f64) {
    let h = rho[1] - rho[0];
    let m = g.len();
    let (gm, gp) = if i == 0 {
        (g[1], g[1]) // even extension
    } else if i == m - 1 {
        (g[m - 2], g[m - 1])
    } else {
        (g[i - 1], g[i + 1])
    };
    let d1 = (gp - gm) / (2.0 * h);
    let d2 = (gp - 2.0 * g[i] + gm) / (h * h);
    let w = 1.0 + d1 * d1;
    // inward = into the solid below the graph (downward)
    let kappa_m = -d2 / w.powf(1.5);
    let kappa_c = if i == 0 {
        kappa_m
    } else {
        -d1 / (rho[i] * w.sqrt())
    };
    let _ = n;
    (kappa_m, kappa_c)
}

fn verify_spike(
    rho: &[f64],
    g: &[f64],
    n: u32,
    body_end: f64,
    tail_start: f64,
    big_r: f64,
) -> Result<SpikeReport> {
    let m = g.len();
    let h = rho[1] - rho[0];
    let mut min_2c_body = f64::INFINITY;
    let mut min_2c_full = f64::INFINITY;
    let mut max_a2: f64 = 0.0;
    let mut max_h = f64::NEG_INFINITY;
    let mut max_h_at = 0.0;
    let mut tail_value: f64 = 0.0;
    let mut tail_slope: f64 = 0.0;
    let mut tail_curv: f64 = 0.0;
    let mut strictly_decreasing = true;
    for i in 0..m {
        let (km, kc) = graph_principal_curvatures(rho, g, i, n);
        let c = curvature_from_principal(km, kc, n);
        let two_sum = if km <= kc || n == 2 { km + kc } else { 2.0 * kc };
        min_2c_full = min_2c_full.min(two_sum);
        if rho[i] <= body_end {
            min_2c_body = min_2c_body.min(two_sum);
        }
        max_a2 = max_a2.max(c.norm_a2);
        if c.h > max_h {
            max_h = c.h;
            max_h_at = rho[i];
        }
        if rho[i] >= tail_start {
            let d1 = if i > 0 && i < m - 1 {
                (g[i + 1] - g[i - 1]) / (2.0 * h)
            } else {
                0.0
            };
            let d2 = if i > 0 && i < m - 1 {
                (g[i + 1] - 2.0 * g[i] + g[i - 1]) / (h * h)
            } else {
                0.0
            };
            tail_value = tail_value.max(g[i].abs());
            tail_slope = tail_slope.max(d1.abs());
            tail_curv = tail_curv.max(d2.abs());
        }
        if i > 0 && g[i] > g[i - 1] + 1e-15 {
            strictly_decreasing = false;
        }
    }
    let unique_max = g[0] >= g.iter().cloned().fold(f64::MIN, f64::max) - 1e-14;
    Ok(SpikeReport {
        tip_height: g[0],
        min_two_convexity_body: min_2c_body,
        min_two_convexity_full: min_2c_full,
        unique_max_at_zero: unique_max,
        strictly_decreasing,
        tip_has_max_h: max_h_at < 0.5 * tail_start,
        tail_value,
        tail_slope,
        tail_curv,
        max_a2,
        body_end,
        tail_start: tail_start.min(big_r),
    })
}

fn check_spike_conditions(rep: &SpikeReport, delta2: f64) -> Result<()> {
    if rep.tip_height <= 0.0 {
        return Err(Error::Construction(
            "condition (1) violated: graph not nonnegative".into(),
        ));
    }
    if rep.min_two_convexity_body <= 0.0 {
        return Err(Error::Construction(format!(
            "condition (2) violated: spike body not 2-convex (min sum {:.3e})",
            rep.min_two_convexity_body
        )));
    }
    if !rep.unique_max_at_zero || !rep.strictly_decreasing {
        return Err(Error::Construction(
            "condition (4) violated: graph not strictly decreasing from a unique maximum".into(),
        ));
    }
    if rep.tail_value > delta2 || rep.tail_slope > delta2 || rep.tail_curv > delta2 {
        return Err(Error::Construction(format!(
            "condition (5) violated: tail not delta2-flat (value {:.2e}, slope {:.2e}, curv {:.2e} vs {:.2e})",
            rep.tail_value, rep.tail_slope, rep.tail_curv, delta2
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// spike attachment (axial, pole-preserving)
// ---------------------------------------------------------------------------

/// Which axis endpoint carries the spike.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisEnd {
    Left,
    Right,
}

/// Attach a rotationally symmetric spike along the axis at a pole of `base`.
/// The profile equals `base` outside the graph window at the pole; `Inward`
/// orientation digs a thin finger into the body and makes min H < 0 on the
/// throat.
pub fn attach_axial_spike(
    base: &ProfileCurve,
    spec: &SpikeSpec,
    end: AxisEnd,
) -> Result<ProfileCurve> {
    if base.topology() != Topology::AxisToAxis {
        return Err(Error::Construction(
            "spike attachment needs an AxisToAxis base".into(),
        ));
    }
    let n = base.dim();
    let graph = spike_graph(spec, n)?;
    let last = base.len() - 1;
    let (pole_idx, dir) = match end {
        AxisEnd::Right => (last, 1.0),
        AxisEnd::Left => (0usize, -1.0),
    };
    let pole = base.point(pole_idx);
    // local feature size: the pole curvature radius must dominate the core
    let pole_curv = base.curvature_at(pole_idx)?.h.abs() / n as f64;
    if pole_curv > 0.0 && spec.r >= 0.5 / pole_curv {
        return Err(Error::Construction(format!(
            "spike core radius {} exceeds the local base feature size {:.3}",
            spec.r,
            0.5 / pole_curv
        )));
    }
    // walk inward from the pole while the base is graphical over the radius,
    // stopping once the window covers the flattening radius R
    let mut window = pole_idx;
    loop {
        let next = match end {
            AxisEnd::Right => window.checked_sub(1),
            AxisEnd::Left => {
                if window + 1 <= last {
                    Some(window + 1)
                } else {
                    None
                }
            }
        };
        let Some(next) = next else { break };
        if base.point(next)[1] <= base.point(window)[1] {
            break;
        }
        window = next;
        if base.point(window)[1] >= spec.big_r {
            break;
        }
    }
    let rho_max = base.point(window)[1].min(spec.big_r);
    if rho_max < spec.big_r * 0.999 {
        return Err(Error::Construction(format!(
            "base pole cap only graphical to rho = {rho_max:.4}, need R = {}",
            spec.big_r
        )));
    }
    // base height function h_b(rho) = |x_pole - x_base(rho)| by interpolation
    let range: Vec<usize> = match end {
        AxisEnd::Right => (window..=pole_idx).collect(),
        AxisEnd::Left => (pole_idx..=window).rev().collect(), // rho decreasing -> increasing
    };
    // (rho, x) pairs with rho increasing away from the pole
    let mut base_pairs: Vec<[f64; 2]> = range
        .iter()
        .rev()
        .map(|&i| [base.point(i)[1], base.point(i)[0]])
        .collect();
    base_pairs.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
    let x_base = |rho: f64| -> f64 {
        let mut k = 0;
        while k + 1 < base_pairs.len() - 1 && base_pairs[k + 1][0] < rho {
            k += 1;
        }
        let (a, b) = (base_pairs[k], base_pairs[k + 1]);
        if b[0] > a[0] {
            a[1] + (rho - a[0]) / (b[0] - a[0]) * (b[1] - a[1])
        } else {
            a[1]
        }
    };
    let sigma = match spec.orientation {
        SpikeOrientation::Outward => dir,
        SpikeOrientation::Inward => -dir,
    };
    // spiked cap sampled along the spike graph's own arclength
    let mut cap: Vec<[f64; 2]> = Vec::new();
    for (i, (&rho, &gv)) in graph.rho.iter().zip(&graph.g).enumerate() {
        if rho > rho_max {
            break;
        }
        let x = if i == 0 {
            pole[0] + sigma * gv
        } else {
            x_base(rho) + sigma * gv
        };
        cap.push([x, rho]);
    }
    cap[0][1] = 0.0;
    // thin out by arclength to roughly the spike emit resolution
    let cap = thin_by_arclength(&cap, spec.r / 16.0);
    // assemble: base samples outside the window + spiked cap
    let mut out: Vec<[f64; 2]> = Vec::new();
    match end {
        AxisEnd::Right => {
            for i in 0..window {
                out.push(base.point(i));
            }
            for p in cap.iter().rev() {
                out.push(*p);
            }
        }
        AxisEnd::Left => {
            for p in cap.iter() {
                out.push(*p);
            }
            for i in (window + 1)..=last {
                out.push(base.point(i));
            }
        }
    }
    ProfileCurve::new(out, Topology::AxisToAxis, n)
}

fn thin_by_arclength(pts: &[[f64; 2]], h: f64) -> Vec<[f64; 2]> {
    let mut out = vec![pts[0]];
    let mut acc = 0.0;
    for w in pts.windows(2) {
        acc += (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
        if acc >= h {
            out.push(w[1]);
            acc = 0.0;
        }
    }
    if *out.last().unwrap() != pts[pts.len() - 1] {
        out.push(pts[pts.len() - 1]);
    }
    out
}

// ---------------------------------------------------------------------------
// pancakes
// ---------------------------------------------------------------------------

/// Parameters of a thin rotationally symmetric pancake flange grafted onto a
/// cylindrical region of a profile.
#[derive(Debug, Clone, Copy)]
pub struct PancakeSpec {
    /// Axial position of the flange center.
    pub p: f64,
    /// Radial extent added at the center: f~(p) = f(p) + L.
    pub l: f64,
    /// Corner circle radius.
    pub d: f64,
    /// Flange half-thickness scale (wall separation is r, cap radius r/2).
    pub r: f64,
    /// Support half-width: the base is untouched outside [p - eps, p + eps].
    pub epsilon: f64,
}

/// Attach a pancake flange per the L-shaped-curve construction: corner
/// circles of radius `d` centered at `(p +- (d + r/2), c + d + r/100)`,
/// near-vertical walls, and a cap of radius `r/2` at height `f(p) + L`,
/// with a single critical point inside the support window.
pub fn attach_pancake(base: &ProfileCurve, spec: &PancakeSpec) -> Result<ProfileCurve> {
    let PancakeSpec { p, l, d, r, epsilon } = *spec;
    if l < 0.0 || d <= 0.0 || r <= 0.0 || epsilon <= 0.0 {
        return Err(Error::Construction("pancake needs positive parameters".into()));
    }
    if d >= epsilon {
        return Err(Error::Construction(
            "pancake needs corner radius d much smaller than the window epsilon".into(),
        ));
    }
    if l == 0.0 {
        return Ok(base.clone());
    }
    // the base must be graphical and (delta, c)-cylindrical over the window
    let (xs, us) = base
        .to_graph()
        .ok_or_else(|| Error::Construction("pancake base must be graphical over the axis".into()))?;
    let (lo, hi) = (p - epsilon, p + epsilon);
    if lo <= xs[0] || hi >= xs[xs.len() - 1] {
        return Err(Error::Construction(
            "pancake window exceeds the cylindrical region".into(),
        ));
    }
    let mut c_sum = 0.0;
    let mut c_cnt = 0usize;
    for (x, u) in xs.iter().zip(&us) {
        if *x >= lo && *x <= hi {
            c_sum += u;
            c_cnt += 1;
        }
    }
    if c_cnt < 8 {
        return Err(Error::Construction("pancake window undersampled".into()));
    }
    let c = c_sum / c_cnt as f64;
    let mut delta_meas: f64 = 0.0;
    for (x, u) in xs.iter().zip(&us) {
        if *x >= lo && *x <= hi {
            delta_meas = delta_meas.max((u - c).abs());
        }
    }
    if delta_meas > 0.05 * c {
        return Err(Error::Construction(format!(
            "base not cylindrical over the window: measured delta {delta_meas:.4} vs c {c:.4}"
        )));
    }
    if r / 2.0 + 2.0 * d >= epsilon * 0.8 {
        return Err(Error::Construction(
            "pancake corner geometry does not fit the window".into(),
        ));
    }

    // build the flange curve left-to-right in (x, u)
    let taper = 0.06_f64; // wall tilt from vertical, keeps f~ a graph
    let lift = r / 100.0;
    let cap_r = 0.5 * r;
    let emit_h = (d.min(cap_r) / 10.0).min(l / 60.0);
    let x_wall = p - 0.5 * r - d; // corner circle center x = p - (d + r/2)
    let ramp_w = (epsilon - (0.5 * r + 2.0 * d)) * 0.6;
    let x_ramp0 = x_wall - ramp_w;
    // quintic ramp from the cylinder up by `lift`
    let mut curve: Vec<[f64; 2]> = Vec::new();
    let ramp_steps = (ramp_w / emit_h).ceil().max(8.0) as usize;
    for i in 0..=ramp_steps {
        let t = i as f64 / ramp_steps as f64;
        let x = x_ramp0 + t * ramp_w;
        curve.push([x, c + lift * smoothstep(t)]);
    }
    // concave corner arc radius d: horizontal -> wall angle
    let phi_wall = std::f64::consts::FRAC_PI_2 - taper;
    let mut b = PathBuilder::new(*curve.last().unwrap(), 0.0, emit_h);
    b.march(d * phi_wall, |_| 1.0 / d);
    // wall up to the cap tangent height: the cap arc gains cap_r (1 - cos)
    let wall_top = (c + l) - cap_r * (1.0 - phi_wall.cos());
    let wall_len = ((wall_top - b.pos[1]) / phi_wall.sin()).max(0.0);
    b.line(wall_len);
    // convex cap: wall angle -> horizontal at the top center
    b.march(cap_r * phi_wall, |_| -1.0 / cap_r);
    let half = b.finish();
    curve.extend_from_slice(&half[1..]); // builder re-emits its start point
    // force the apex to land exactly at (p, c + l)
    let apex = *curve.last().unwrap();
    let dx_fix = p - apex[0];
    let du_fix = (c + l) - apex[1];
    let x0_fl = curve[0][0];
    for q in curve.iter_mut() {
        let t = ((q[0] - x0_fl) / (apex[0] - x0_fl)).clamp(0.0, 1.0);
        q[0] += dx_fix * t;
        q[1] += du_fix * t;
    }
    // mirror to the right side
    let mut flange = curve.clone();
    for q in curve.iter().rev().skip(1) {
        flange.push([2.0 * p - q[0], q[1]]);
    }

    // splice: base samples strictly outside [x_ramp0, mirrored end]
    let splice_lo = flange[0][0];
    let splice_hi = flange.last().unwrap()[0];
    let mut out: Vec<[f64; 2]> = Vec::new();
    for s in base.samples() {
        if s[0] < splice_lo {
            out.push(*s);
        }
    }
    // ensure f~ >= f at the splice by construction (ramp starts on the base)
    out.extend_from_slice(&flange);
    for s in base.samples() {
        if s[0] > splice_hi {
            out.push(*s);
        }
    }
    ProfileCurve::new(dedup_close(out), base.topology(), base.dim())
}

// ---------------------------------------------------------------------------
// stacked pancake (two fat pancakes with a slit and a bridge)
// ---------------------------------------------------------------------------

/// Stacked-pancake profile with its marked trough.
#[derive(Debug, Clone)]
pub struct StackedPancake {
    pub profile: ProfileCurve,
    /// Sample index range (inclusive) of the trough region.
    pub trough: (usize, usize),
    /// Axial window of the trough, for masked speed laws.
    pub trough_window: (f64, f64),
}

/// Two fat pancakes stacked along the axis with a bridge between them: outer
/// radius `r1 + r2`, an equatorial slit of width `eps` cut down to radius
/// `r1`, each pancake of axial width `w`. The profile is graphical over the
/// axis with steep (finite-slope) faces.
pub fn stacked_pancake(r1: f64, r2: f64, eps: f64, w: f64, n: u32) -> Result<StackedPancake> {
    if !(eps > 0.0 && w > 0.0 && r2 > 0.0 && r1 > 0.0) {
        return Err(Error::Construction("stacked pancake needs positive parameters".into()));
    }
    if eps >= w {
        return Err(Error::Construction(
            "slit width eps must be much smaller than the pancake width w".into(),
        ));
    }
    if r2 >= r1 {
        return Err(Error::Construction(
            "slit depth r2 must be below the trough radius r1".into(),
        ));
    }
    let r_out = r1 + r2;
    let taper = 0.12_f64;
    let d_slit = (eps / 4.0).min(r2 / 3.0);
    let rim = (w / 2.0).min(0.45 * r_out);
    let emit_h = (d_slit / 8.0).min(rim / 24.0);

    // right half, from the trough bottom (y = 0, u = r1) outward
    let phi_wall = std::f64::consts::FRAC_PI_2 - taper;
    let mut b = PathBuilder::new([0.0, r1], 0.0, emit_h);
    // trough fillet: horizontal -> steep up
    b.march(d_slit * phi_wall, |_| 1.0 / d_slit);
    // slit wall up
    let mouth_u = r_out - d_slit;
    let slit_wall = ((mouth_u - b.pos[1]) / phi_wall.sin()).max(0.0);
    b.line(slit_wall);
    // mouth fillet: steep up -> horizontal (convex)
    b.march(d_slit * phi_wall, |_| -1.0 / d_slit);
    // plateau to the rim
    let plateau = (0.5 * eps + w - rim - b.pos[0]).max(0.1 * w);
    b.line(plateau);
    // rim: horizontal -> steep down (convex quarter+)
    b.march(rim * phi_wall, |_| -1.0 / rim);
    // face down toward the axis, then land orthogonally via a gentle turn
    let face_u_stop = 0.12 * r_out;
    let face_len = ((b.pos[1] - face_u_stop) / phi_wall.sin().abs()).max(0.0);
    b.line(face_len);
    // turn the remaining taper so the tangent is exactly -pi/2 at the axis
    let turn_len = face_u_stop * 0.8;
    b.march(turn_len, |_| -taper / turn_len);
    // drop straight to the axis
    let drop = b.pos[1];
    b.line(drop * 0.999);
    let mut half = b.finish();
    let y_pole = half.last().unwrap()[0];
    half.push([y_pole, 0.0]);

    // assemble full profile: mirror across y = 0, pole-to-pole left to right
    let mut samples: Vec<[f64; 2]> = Vec::new();
    for q in half.iter().rev() {
        samples.push([-q[0], q[1]]);
    }
    for q in half.iter().skip(1) {
        samples.push(*q);
    }
    let profile = ProfileCurve::new(samples, Topology::AxisToAxis, n)?;
    // mark the trough: samples near the slit bottom
    let mut lo = usize::MAX;
    let mut hi = 0usize;
    for (i, s) in profile.samples().iter().enumerate() {
        if s[0].abs() <= 0.75 * eps && s[1] <= r1 + 0.5 * d_slit {
            lo = lo.min(i);
            hi = hi.max(i);
        }
    }
    if lo > hi {
        return Err(Error::Construction("stacked pancake trough not found".into()));
    }
    let trough_window = (profile.point(lo)[0], profile.point(hi)[0]);
    Ok(StackedPancake {
        profile,
        trough: (lo, hi),
        trough_window,
    })
}

// ---------------------------------------------------------------------------
// bowl soliton
// ---------------------------------------------------------------------------

/// Rotationally symmetric translator graph: u''/(1+u'^2) + (n-1) u'/rho =
/// speed, u(0) = u'(0) = 0, integrated out to `r_max`.
#[derive(Debug, Clone)]
pub struct BowlGraph {
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub speed: f64,
    pub n: u32,
}

impl BowlGraph {
    pub fn eval(&self, rho: f64) -> f64 {
        let h = self.rho[1] - self.rho[0];
        let k = ((rho / h).floor() as usize).min(self.u.len() - 2);
        let t = (rho - self.rho[k]) / h;
        self.u[k] * (1.0 - t) + self.u[k + 1] * t
    }

    /// Profile curve of the bowl translated so its tip sits at `tip_x`,
    /// opening toward `direction` (+1 opens to +x).
    pub fn to_profile(&self, tip_x: f64, direction: f64, count: usize) -> Result<ProfileCurve> {
        let m = self.u.len();
        let step = (m / count.max(8)).max(1);
        let mut samples = vec![[tip_x, 0.0]];
        let mut i = step;
        while i < m {
            samples.push([tip_x + direction * self.u[i], self.rho[i]]);
            i += step;
        }
        ProfileCurve::from_parts(samples, Topology::Open, self.n)
    }
}

/// Integrate the bowl translator profile with fixed-step RK4 and a series
/// start `u = c rho^2/(2n) + 2 a^3 rho^4/(n+2)`, `a = c/(2n)`.
pub fn bowl_soliton(n: u32, speed: f64, r_max: f64) -> Result<BowlGraph> {
    bowl_soliton_h(n, speed, r_max, r_max / 200_000.0)
}

pub fn bowl_soliton_h(n: u32, speed: f64, r_max: f64, h: f64) -> Result<BowlGraph> {
    if n < 2 || speed <= 0.0 || r_max <= 0.0 {
        return Err(Error::Construction("bowl needs n >= 2, speed > 0, r_max > 0".into()));
    }
    let a = speed / (2.0 * n as f64);
    let b4 = 2.0 * a * a * a / (n as f64 + 2.0);
    let m = (r_max / h).ceil() as usize;
    let nm1 = (n - 1) as f64;
    let rhs = |rho: f64, u1: f64| -> f64 {
        // u'' = (1 + u'^2) * (speed - (n-1) u'/rho)
        (1.0 + u1 * u1) * (speed - nm1 * u1 / rho)
    };
    let mut rho = Vec::with_capacity(m + 1);
    let mut us = Vec::with_capacity(m + 1);
    // series start to sidestep the rho = 0 singularity
    let rho0 = 10.0 * h;
    let mut x = rho0;
    let mut u = a * x * x + b4 * x.powi(4);
    let mut v = 2.0 * a * x + 4.0 * b4 * x.powi(3);
    let start_idx = (rho0 / h).round() as usize;
    for i in 0..=start_idx {
        let r = i as f64 * h;
        rho.push(r);
        us.push(a * r * r + b4 * r.powi(4));
    }
    for _ in start_idx..m {
        let k1v = rhs(x, v);
        let k1u = v;
        let k2v = rhs(x + 0.5 * h, v + 0.5 * h * k1v);
        let k2u = v + 0.5 * h * k1v;
        let k3v = rhs(x + 0.5 * h, v + 0.5 * h * k2v);
        let k3u = v + 0.5 * h * k2v;
        let k4v = rhs(x + h, v + h * k3v);
        let k4u = v + h * k3v;
        u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        x += h;
        if !u.is_finite() || !v.is_finite() {
            return Err(Error::Accuracy("bowl integrator diverged".into()));
        }
        rho.push(x);
        us.push(u);
    }
    Ok(BowlGraph {
        rho,
        u: us,
        speed,
        n,
    })
}

// ---------------------------------------------------------------------------
// straightening map
// ---------------------------------------------------------------------------

/// Tube-coordinate chart around a core curve: `phi` maps the curved tube onto
/// the straight one, `psi = phi^{-1}` maps back. Beyond the core endpoints
/// both act by straight extension, which matches the hemispherical endcap
/// chart of the source construction.
#[derive(Debug, Clone)]
pub struct StraighteningMap {
    arclen: Vec<f64>,
    points: Vec<Point3<f64>>,
    tangents: Vec<Vector3<f64>>,
    e2: Vec<Vector3<f64>>,
    e3: Vec<Vector3<f64>>,
    pub radius_max: f64,
    pub core_curvature_bound: f64,
    pub hessian_bound_estimate: f64,
}

/// Build the chart from a sampled core curve with |A| <= C and tube radius
/// `r`; the chart covers radius `2r` and requires `r < 1/(2C)`.
pub fn straightening_map(core: &[Point3<f64>], r: f64) -> Result<StraighteningMap> {
    if core.len() < 3 {
        return Err(Error::Construction("core needs at least 3 samples".into()));
    }
    if r <= 0.0 {
        return Err(Error::Construction("tube radius must be positive".into()));
    }
    let m = core.len();
    let mut arclen = vec![0.0];
    for i in 1..m {
        let d = (core[i] - core[i - 1]).norm();
        if d < 1e-14 {
            return Err(Error::Construction("degenerate core spacing".into()));
        }
        arclen.push(arclen[i - 1] + d);
    }
    // tangents by central differences, frames by parallel transport
    let mut tangents = Vec::with_capacity(m);
    for i in 0..m {
        let t = if i == 0 {
            core[1] - core[0]
        } else if i == m - 1 {
            core[m - 1] - core[m - 2]
        } else {
            core[i + 1] - core[i - 1]
        };
        tangents.push(t.normalize());
    }
    // curvature bound of the core
    let mut cbound: f64 = 0.0;
    for i in 1..m - 1 {
        let ds = 0.5 * (arclen[i + 1] - arclen[i - 1]);
        let dt = (tangents[i + 1] - tangents[i - 1]).norm() / (2.0 * ds);
        cbound = cbound.max(dt);
    }
    if cbound > 0.0 && r >= 0.5 / cbound {
        return Err(Error::Construction(format!(
            "tube radius {r} violates the focal bound 1/(2C) = {:.4}",
            0.5 / cbound
        )));
    }
    // distant self-approach of the core would self-intersect the offset
    for i in 0..m {
        for j in i + 1..m {
            if (arclen[j] - arclen[i]) > 4.0 * r && (core[j] - core[i]).norm() < 2.0 * r {
                return Err(Error::Construction(
                    "core approaches itself closer than the tube diameter".into(),
                ));
            }
        }
    }
    let mut e2 = Vec::with_capacity(m);
    let mut e3 = Vec::with_capacity(m);
    let seed = if tangents[0].x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let mut v2 = (seed - tangents[0] * seed.dot(&tangents[0])).normalize();
    for i in 0..m {
        if i > 0 {
            v2 = (v2 - tangents[i] * v2.dot(&tangents[i])).normalize();
        }
        e2.push(v2);
        e3.push(tangents[i].cross(&v2));
    }
    let mut map = StraighteningMap {
        arclen,
        points: core.to_vec(),
        tangents,
        e2,
        e3,
        radius_max: 2.0 * r,
        core_curvature_bound: cbound,
        hessian_bound_estimate: 0.0,
    };
    map.hessian_bound_estimate = map.estimate_hessian(r);
    Ok(map)
}

impl StraighteningMap {
    pub fn core_length(&self) -> f64 {
        *self.arclen.last().unwrap()
    }

    fn frame_at(&self, s: f64) -> (Point3<f64>, Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let l = self.core_length();
        if s <= 0.0 {
            let p = self.points[0] + self.tangents[0] * s;
            return (p, self.tangents[0], self.e2[0], self.e3[0]);
        }
        if s >= l {
            let last = self.points.len() - 1;
            let p = self.points[last] + self.tangents[last] * (s - l);
            return (p, self.tangents[last], self.e2[last], self.e3[last]);
        }
        let mut k = 0;
        while k + 1 < self.arclen.len() - 1 && self.arclen[k + 1] < s {
            k += 1;
        }
        let t = (s - self.arclen[k]) / (self.arclen[k + 1] - self.arclen[k]);
        let p = self.points[k] + (self.points[k + 1] - self.points[k]) * t;
        let tan = (self.tangents[k] * (1.0 - t) + self.tangents[k + 1] * t).normalize();
        let v2 = self.e2[k] * (1.0 - t) + self.e2[k + 1] * t;
        let v2 = (v2 - tan * v2.dot(&tan)).normalize();
        let v3 = tan.cross(&v2);
        (p, tan, v2, v3)
    }

    /// Inverse chart `psi`: tube coordinates `(s, a2, a3)` to ambient space.
    pub fn inverse(&self, q: Point3<f64>) -> Result<Point3<f64>> {
        let (s, a2, a3) = (q.x, q.y, q.z);
        let off = a2.hypot(a3);
        if off > self.radius_max * (1.0 + 1e-9) {
            return Err(Error::ChartDomain(format!(
                "offset {off:.4} beyond chart radius {}",
                self.radius_max
            )));
        }
        let (p, _t, v2, v3) = self.frame_at(s);
        Ok(p + v2 * a2 + v3 * a3)
    }

    /// Forward chart `phi`: ambient point to tube coordinates, by projection
    /// plus Newton polish on `psi(s, a2, a3) = p`.
    pub fn forward(&self, p: Point3<f64>) -> Result<Point3<f64>> {
        // initial guess: nearest core sample, offset in its frame
        let mut best = 0usize;
        let mut bestd = f64::INFINITY;
        for (i, c) in self.points.iter().enumerate() {
            let d = (p - c).norm_squared();
            if d < bestd {
                bestd = d;
                best = i;
            }
        }
        let (c0, t0, v20, v30) = self.frame_at(self.arclen[best]);
        let dp = p - c0;
        let mut q = Point3::new(
            self.arclen[best] + dp.dot(&t0),
            dp.dot(&v20),
            dp.dot(&v30),
        );
        // Newton on F(q) = psi(q) - p with finite-difference Jacobian
        let eta = 1e-6 * (1.0 + self.core_length());
        for _ in 0..40 {
            let f0 = self.inverse_unchecked(q) - p;
            if f0.norm() < 1e-12 {
                break;
            }
            let mut jac = nalgebra::Matrix3::<f64>::zeros();
            for c in 0..3 {
                let mut qc = q;
                qc[c] += eta;
                let fc = self.inverse_unchecked(qc) - p;
                let col = (fc - f0) / eta;
                jac.set_column(c, &col);
            }
            let delta = jac
                .lu()
                .solve(&f0)
                .ok_or_else(|| Error::ChartDomain("singular chart Jacobian".into()))?;
            q -= delta;
        }
        let off = q.y.hypot(q.z);
        if off > self.radius_max * (1.0 + 1e-9) {
            return Err(Error::ChartDomain(format!(
                "offset {off:.4} beyond chart radius {}",
                self.radius_max
            )));
        }
        Ok(q)
    }

    fn inverse_unchecked(&self, q: Point3<f64>) -> Point3<f64> {
        let (p, _t, v2, v3) = self.frame_at(q.x);
        p + v2 * q.y + v3 * q.z
    }

    /// Map a mesh in tube coordinates (x = arclength, (y, z) = offsets)
    /// through `psi`.
    pub fn apply_inverse_mesh(&self, mesh: &TriMesh) -> Result<TriMesh> {
        let mut vertices = Vec::with_capacity(mesh.vertices.len());
        for v in &mesh.vertices {
            vertices.push(self.inverse(*v)?);
        }
        Ok(TriMesh {
            vertices,
            faces: mesh.faces.clone(),
        })
    }

    /// Max second-difference magnitude of `psi` over a sample grid in the
    /// chart; scales linearly with the core curvature bound for small bounds.
    fn estimate_hessian(&self, r: f64) -> f64 {
        let l = self.core_length();
        let eta = (0.05 * r).min(0.02 * l);
        let mut worst: f64 = 0.0;
        let steps = 24;
        for i in 0..=steps {
            let s = l * i as f64 / steps as f64;
            for &(a2, a3) in &[(0.0, 0.0), (r, 0.0), (0.0, r), (-r, 0.0), (0.7 * r, 0.7 * r)] {
                let q = Point3::new(s, a2, a3);
                for c1 in 0..3usize {
                    for c2 in 0..3usize {
                        let mut qpp = q;
                        let mut qpm = q;
                        let mut qmp = q;
                        let mut qmm = q;
                        qpp[c1] += eta;
                        qpp[c2] += eta;
                        qpm[c1] += eta;
                        qpm[c2] -= eta;
                        qmp[c1] -= eta;
                        qmp[c2] += eta;
                        qmm[c1] -= eta;
                        qmm[c2] -= eta;
                        let d2 = (self.inverse_unchecked(qpp).coords
                            - self.inverse_unchecked(qpm).coords
                            - self.inverse_unchecked(qmp).coords
                            + self.inverse_unchecked(qmm).coords)
                            / (4.0 * eta * eta);
                        worst = worst.max(d2.norm());
                    }
                }
            }
        }
        worst
    }
}

/// Sampled circular-arc core in the xy-plane with curvature `c` and the given
/// length, starting at the origin heading +x. `c = 0` gives a straight core.
pub fn arc_core(c: f64, length: f64, count: usize) -> Vec<Point3<f64>> {
    let m = count.max(8);
    (0..m)
        .map(|i| {
            let s = length * i as f64 / (m - 1) as f64;
            if c.abs() < 1e-14 {
                Point3::new(s, 0.0, 0.0)
            } else {
                Point3::new(c.recip() * (c * s).sin(), c.recip() * (1.0 - (c * s).cos()), 0.0)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn sphere_measures() {
        let p = make_sphere(1.0, 2, 2000).unwrap();
        let m = p.measures().unwrap();
        assert!((m.area - 4.0 * PI).abs() < 1e-4);
        assert!((m.volume - 4.0 * PI / 3.0).abs() < 1e-4);
        assert!((m.diameter - 2.0).abs() < 1e-6);
    }

    #[test]
    fn pill_measures_match_cap_cylinder_decomposition() {
        // lateral area 2 pi r L plus two hemispherical caps
        let p = make_pill(2.0, 0.5, 2).unwrap();
        let m = p.measures().unwrap();
        let expect_area = 2.0 * PI * 0.5 * 2.0 + 4.0 * PI * 0.25;
        let expect_vol = PI * 0.25 * 2.0 + 4.0 * PI / 3.0 * 0.125;
        assert!(
            ((m.area - expect_area) / expect_area).abs() < 1e-3,
            "area {} vs {}",
            m.area,
            expect_area
        );
        assert!(((m.volume - expect_vol) / expect_vol).abs() < 1e-3);
        assert!((m.diameter - 3.0).abs() < 1e-3);
    }

    #[test]
    fn pill_is_convex() {
        let p = make_pill(4.0, 1.0, 2).unwrap();
        for c in p.curvature_all().unwrap() {
            assert!(c.k_min >= -1e-9, "pill k_min {}", c.k_min);
        }
    }

    #[test]
    fn dumbbell_has_a_saddle_flare() {
        let p = make_dumbbell(1.0, 0.15, 1.5, 2).unwrap();
        let kmin = p
            .curvature_all()
            .unwrap()
            .iter()
            .map(|c| c.k_min)
            .fold(f64::INFINITY, f64::min);
        assert!(kmin < -0.1, "expected negative k_min on the flare, got {kmin}");
    }

    #[test]
    fn spike_graph_passes_its_conditions() {
        let spec = SpikeSpec::new(1.0, 0.05, 1.0, 1e-4, SpikeOrientation::Outward);
        let g = spike_graph(&spec, 2).unwrap();
        assert!(g.report.min_two_convexity_body > 0.0);
        assert!(g.report.strictly_decreasing && g.report.unique_max_at_zero);
        // cap curvature scale 1/r^2
        assert!(
            g.report.max_a2 > 0.2 / (0.05f64 * 0.05) && g.report.max_a2 < 20.0 / (0.05 * 0.05),
            "max_a2 {} not on the 1/r^2 scale",
            g.report.max_a2
        );
        assert!((g.report.tip_height - 1.0).abs() < 0.05);
    }

    #[test]
    fn degenerate_spike_is_rejected_for_condition_four() {
        let spec = SpikeSpec::new(0.0, 0.05, 1.0, 1e-4, SpikeOrientation::Outward);
        let err = spike_graph(&spec, 2).unwrap_err();
        assert!(format!("{err}").contains("(4)"), "got: {err}");
    }

    #[test]
    fn cramped_spike_is_rejected_for_condition_five() {
        let spec = SpikeSpec::new(1.0, 0.5, 0.6, 1e-4, SpikeOrientation::Outward);
        let err = spike_graph(&spec, 2).unwrap_err();
        assert!(format!("{err}").contains("(5)"), "got: {err}");
    }

    #[test]
    fn outward_spike_extends_the_diameter() {
        let base = make_sphere(1.0, 2, 801).unwrap();
        let spec = SpikeSpec::new(1.0, 0.05, 0.6, 1e-4, SpikeOrientation::Outward);
        let spiked = attach_axial_spike(&base, &spec, AxisEnd::Right).unwrap();
        let m = spiked.measures().unwrap();
        assert!(
            (m.diameter - 3.0).abs() < 0.05,
            "diameter {} expected about 3",
            m.diameter
        );
    }

    #[test]
    fn inward_spike_breaks_mean_convexity() {
        let base = make_sphere(1.0, 2, 801).unwrap();
        let spec = SpikeSpec::new(0.5, 0.05, 0.6, 1e-4, SpikeOrientation::Inward);
        let spiked = attach_axial_spike(&base, &spec, AxisEnd::Right).unwrap();
        let min_h = spiked
            .curvature_all()
            .unwrap()
            .iter()
            .map(|c| c.h)
            .fold(f64::INFINITY, f64::min);
        assert!(min_h < 0.0, "inward spike should have min H < 0, got {min_h}");
    }

    #[test]
    fn vanishing_spike_stays_near_the_base() {
        let base = make_sphere(1.0, 2, 801).unwrap();
        let spec = SpikeSpec::new(0.16, 0.03, 0.5, 1e-4, SpikeOrientation::Outward);
        let spiked = attach_axial_spike(&base, &spec, AxisEnd::Right).unwrap();
        // Hausdorff to the base is at most the spike height
        let mut worst: f64 = 0.0;
        for s in spiked.samples() {
            let d = (s[0].hypot(s[1]) - 1.0).abs();
            worst = worst.max(d);
        }
        assert!(worst <= 0.17, "deviation {worst}");
    }

    #[test]
    fn pancake_respects_the_window_and_height() {
        let base = make_pill(6.0, 0.5, 2).unwrap();
        let spec = PancakeSpec {
            p: 0.0,
            l: 1.0,
            d: 0.1,
            r: 0.02,
            epsilon: 0.5,
        };
        let before = base.measures().unwrap().area;
        let out = attach_pancake(&base, &spec).unwrap();
        let after = out.measures().unwrap().area;
        // two annulus faces dominate the added area
        let expect = 2.0 * PI * ((0.5f64 + 1.0).powi(2) - 0.25);
        assert!(
            ((after - before) - expect).abs() < 0.1 * expect,
            "area increment {} vs {}",
            after - before,
            expect
        );
        // apex reaches c + L
        let apex = out
            .samples()
            .iter()
            .cloned()
            .fold([0.0, 0.0], |a, s| if s[1] > a[1] { s } else { a });
        assert!((apex[1] - 1.5).abs() < 1e-6 && apex[0].abs() < 1e-6);
        // untouched outside the window (bitwise sample equality)
        for s in out.samples() {
            if s[0].abs() > 0.5 {
                assert!(base.samples().contains(s));
            }
        }
    }

    #[test]
    fn pancake_window_must_fit() {
        let base = make_pill(2.0, 0.5, 2).unwrap();
        let spec = PancakeSpec {
            p: 0.0,
            l: 0.5,
            d: 0.05,
            r: 0.02,
            epsilon: 1.4,
        };
        assert!(attach_pancake(&base, &spec).is_err());
    }

    #[test]
    fn stacked_pancake_has_a_marked_trough_with_nonzero_h() {
        let sp = stacked_pancake(2.0, 1.0, 0.05, 0.5, 2).unwrap();
        let curv = sp.profile.curvature_all().unwrap();
        let mut min_abs_h = f64::INFINITY;
        for i in sp.trough.0..=sp.trough.1 {
            min_abs_h = min_abs_h.min(curv[i].h.abs());
        }
        assert!(
            min_abs_h > 1.0,
            "trough |H| should be bounded away from zero, got {min_abs_h}"
        );
        let m = sp.profile.measures().unwrap();
        assert!((m.diameter - 6.0).abs() < 0.2, "diameter {}", m.diameter);
    }

    #[test]
    fn stacked_pancake_rejects_wide_slits() {
        assert!(stacked_pancake(2.0, 1.0, 0.6, 0.5, 2).is_err());
    }

    #[test]
    fn shallow_slit_approaches_a_single_pancake() {
        let eps = 0.05;
        let sp = stacked_pancake(2.0, 0.02, eps, 0.5, 2).unwrap();
        // the slit is a dimple of depth r2; profile stays within 2 eps of the
        // same construction with the slit filled to the outer radius
        let mut worst: f64 = 0.0;
        for i in sp.trough.0..=sp.trough.1 {
            worst = worst.max(2.02 - sp.profile.point(i)[1]);
        }
        assert!(worst <= 2.0 * eps + 1e-9, "slit deviation {worst}");
    }

    #[test]
    fn bowl_matches_its_series_near_zero() {
        for (n, expect) in [(2u32, 0.0025), (3, 0.1f64 * 0.1 / 6.0)] {
            let bowl = bowl_soliton_h(n, 1.0, 0.5, 1e-5).unwrap();
            let u = bowl.eval(0.1);
            assert!(
                (u - expect).abs() < 1e-5,
                "n={n}: u(0.1) = {u} expected {expect}"
            );
        }
    }

    #[test]
    fn bowl_richardson_halving_agrees() {
        let coarse = bowl_soliton_h(2, 1.0, 5.0, 4e-4).unwrap();
        let fine = bowl_soliton_h(2, 1.0, 5.0, 2e-4).unwrap();
        let (uc, uf) = (coarse.eval(5.0 - 1e-9), fine.eval(5.0 - 1e-9));
        assert!(
            ((uc - uf) / uf).abs() < 1e-6,
            "step halving changed u(5) by {}",
            ((uc - uf) / uf).abs()
        );
    }

    #[test]
    fn straight_core_chart_is_the_identity() {
        let core = arc_core(0.0, 2.0, 64);
        let map = straightening_map(&core, 0.3).unwrap();
        let q = Point3::new(0.7, 0.1, -0.2);
        let p = map.inverse(q).unwrap();
        assert_relative_eq!((p - q).norm(), 0.0, epsilon = 1e-12);
        assert!(
            map.hessian_bound_estimate < 1e-8,
            "hessian estimate {} for a straight core",
            map.hessian_bound_estimate
        );
    }

    #[test]
    fn chart_roundtrip_is_tight() {
        let core = arc_core(0.1, 3.0, 256);
        let map = straightening_map(&core, 0.2).unwrap();
        // deterministic pseudo-random tube points
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rand01 = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        for _ in 0..1000 {
            let s = rand01() * 3.0;
            let ang = rand01() * std::f64::consts::TAU;
            let off = rand01() * 0.38;
            let q = Point3::new(s, off * ang.cos(), off * ang.sin());
            let p = map.inverse(q).unwrap();
            let q2 = map.forward(p).unwrap();
            assert!(
                (q2 - q).norm() < 1e-8,
                "roundtrip error {} at {q:?}",
                (q2 - q).norm()
            );
        }
    }

    #[test]
    fn hessian_estimate_scales_with_core_curvature() {
        let m1 = straightening_map(&arc_core(0.05, 3.0, 512), 0.2).unwrap();
        let m2 = straightening_map(&arc_core(0.10, 3.0, 512), 0.2).unwrap();
        let ratio = m2.hessian_bound_estimate / m1.hessian_bound_estimate;
        assert!(
            (ratio - 2.0).abs() < 0.4,
            "hessian ratio {ratio} expected about 2"
        );
    }

    #[test]
    fn focal_violation_is_rejected() {
        let core = arc_core(0.1, 3.0, 128);
        assert!(straightening_map(&core, 6.0).is_err());
    }
}
