//! Profile curves in the half-plane `{r >= 0}` and their differential geometry.
//!
//! A `ProfileCurve` samples a planar curve `(x, r)` whose rotation about the
//! x-axis generates a hypersurface of revolution in `R^{n+1}`. Curvature is
//! computed by local quadratic fits on the (generally nonuniform) polyline;
//! the rotational principal curvature carries multiplicity `n - 1`.
//!
//! Sign convention: profiles are oriented so that the rotated 90-degrees-right
//! normal `(T_r, -T_x)` points into the enclosed region, and curvatures are
//! taken with respect to that inward normal. A round sphere of radius `R` then
//! has `H = n / R` at every sample, which is the convention the flow engine
//! relies on.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// Topology of a profile curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Topology {
    /// Closed loop strictly inside the open half-plane (torus-like surface).
    Closed,
    /// Arc whose two endpoints lie on the axis `r = 0` (sphere-like surface).
    AxisToAxis,
    /// Open arc strictly inside the half-plane (cylinder segment, graph chart).
    Open,
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Topology::Closed => write!(f, "Closed"),
            Topology::AxisToAxis => write!(f, "AxisToAxis"),
            Topology::Open => write!(f, "Open"),
        }
    }
}

/// Pointwise curvature data of the revolved hypersurface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureData {
    /// Curvature of the profile curve (meridian principal curvature).
    pub kappa_profile: f64,
    /// Rotational principal curvature, multiplicity `n - 1`.
    pub kappa_rot: f64,
    /// Mean curvature `kappa_profile + (n-1) * kappa_rot`.
    pub h: f64,
    /// Squared norm of the second fundamental form.
    pub norm_a2: f64,
    /// Smallest principal curvature.
    pub k_min: f64,
    /// Whether the sum of the two smallest principal curvatures is positive.
    pub two_convex: bool,
}

/// Global measures of the revolved hypersurface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measures {
    /// n-dimensional area of the hypersurface.
    pub area: f64,
    /// (n+1)-dimensional volume of the enclosed region.
    pub volume: f64,
    /// Extrinsic diameter (sup distance over the revolved orbits).
    pub diameter: f64,
    /// Minimum of `r` over interior samples.
    pub min_radius: f64,
}

/// Interpolation used when placing resampled points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitKind {
    /// New samples lie exactly on the old polyline.
    Linear,
    /// New samples lie on a local Catmull-Rom fit through the old samples.
    CatmullRom,
}

/// Policy for arclength resampling.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ResamplePolicy {
    /// Target sample spacing.
    pub target_h: f64,
    /// Refine where `|A| * h` exceeds `refine_threshold`.
    pub curvature_refine: bool,
    /// Refinement threshold; local spacing is capped at `refine_threshold / |A|`.
    pub refine_threshold: f64,
    /// Smallest admissible local spacing, as a fraction of `target_h`.
    pub floor_frac: f64,
    pub fit: FitKind,
}

impl ResamplePolicy {
    pub fn uniform(target_h: f64) -> Self {
        ResamplePolicy {
            target_h,
            curvature_refine: false,
            refine_threshold: 0.1,
            floor_frac: 0.02,
            fit: FitKind::CatmullRom,
        }
    }

    pub fn adaptive(target_h: f64) -> Self {
        ResamplePolicy {
            curvature_refine: true,
            ..Self::uniform(target_h)
        }
    }
}

/// How `graph_to_profile` treats the interval ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphEnds {
    /// Ends stay where they are; the profile is an open arc.
    Clamped,
    /// `u -> 0` at the ends; the profile is closed onto the axis by
    /// extrapolating the axis crossing of `u^2` (square-root caps).
    CapZero,
}

/// Sampled planar curve generating a hypersurface of revolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCurve {
    samples: Vec<[f64; 2]>,
    topology: Topology,
    n: u32,
}

const AXIS_MEET_TOL: f64 = 0.15; // max |T_x| at an axis endpoint

impl ProfileCurve {
    /// Build and validate a profile curve. Samples are `(x, r)` pairs.
    pub fn new(samples: Vec<[f64; 2]>, topology: Topology, n: u32) -> Result<Self> {
        let p = Self::from_parts(samples, topology, n)?;
        p.check_simple()?;
        Ok(p)
    }

    /// Build with the cheap pointwise checks only (no O(N^2) simplicity test).
    /// Used on the hot path of the flow engine, which runs its own cadenced
    /// self-intersection checks.
    pub(crate) fn from_parts(samples: Vec<[f64; 2]>, topology: Topology, n: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGeometry(format!(
                "ambient dimension n must be >= 2, got {n}"
            )));
        }
        if samples.len() < 4 {
            return Err(Error::InvalidGeometry(format!(
                "profile needs at least 4 samples, got {}",
                samples.len()
            )));
        }
        for (i, s) in samples.iter().enumerate() {
            if !s[0].is_finite() || !s[1].is_finite() {
                return Err(Error::InvalidGeometry(format!(
                    "non-finite sample at index {i}"
                )));
            }
            if s[1] < 0.0 {
                return Err(Error::InvalidGeometry(format!(
                    "negative radius {} at index {i}",
                    s[1]
                )));
            }
        }
        let scale = polyline_scale(&samples);
        let interior = match topology {
            Topology::AxisToAxis => 1..samples.len() - 1,
            _ => 0..samples.len(),
        };
        for i in interior {
            if samples[i][1] <= 0.0 {
                return Err(Error::InvalidGeometry(format!(
                    "r = 0 at non-endpoint sample {i}"
                )));
            }
        }
        if topology == Topology::AxisToAxis {
            let last = samples.len() - 1;
            for &e in &[0usize, last] {
                if samples[e][1] != 0.0 {
                    return Err(Error::InvalidGeometry(format!(
                        "AxisToAxis endpoint {e} has r = {} != 0",
                        samples[e][1]
                    )));
                }
            }
            // orthogonal axis meet, required for smoothness of the revolved surface
            for (e, nb) in [(0usize, 1usize), (last, last - 1)] {
                let dx = samples[nb][0] - samples[e][0];
                let dr = samples[nb][1] - samples[e][1];
                let len = dx.hypot(dr);
                if len > 0.0 && (dx / len).abs() > AXIS_MEET_TOL {
                    return Err(Error::InvalidGeometry(format!(
                        "profile meets the axis at endpoint {e} with tangent x-component {:.3}",
                        dx / len
                    )));
                }
            }
        }
        let m = if topology == Topology::Closed {
            samples.len()
        } else {
            samples.len() - 1
        };
        for k in 0..m {
            let a = samples[k];
            let b = samples[(k + 1) % samples.len()];
            let d = (b[0] - a[0]).hypot(b[1] - a[1]);
            if d < 1e-14 * scale.max(1e-300) {
                return Err(Error::InvalidGeometry(format!(
                    "degenerate spacing between samples {k} and {}",
                    (k + 1) % samples.len()
                )));
            }
        }
        Ok(ProfileCurve {
            samples,
            topology,
            n,
        })
    }

    pub fn samples(&self) -> &[[f64; 2]] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    /// Dimension `n` of the revolved hypersurface (lives in `R^{n+1}`).
    pub fn dim(&self) -> u32 {
        self.n
    }

    pub fn point(&self, i: usize) -> [f64; 2] {
        self.samples[i]
    }

    pub fn is_axis_endpoint(&self, i: usize) -> bool {
        self.topology == Topology::AxisToAxis && (i == 0 || i == self.len() - 1)
    }

    /// Total polyline length (including the closing edge for loops).
    pub fn total_length(&self) -> f64 {
        let mut s = 0.0;
        let m = if self.topology == Topology::Closed {
            self.len()
        } else {
            self.len() - 1
        };
        for k in 0..m {
            let a = self.samples[k];
            let b = self.samples[(k + 1) % self.len()];
            s += (b[0] - a[0]).hypot(b[1] - a[1]);
        }
        s
    }

    /// Neighbor points of sample `i`, using axis reflection at poles and
    /// wrapping for closed loops. Returns `(prev, next)`.
    fn neighbors(&self, i: usize) -> ([f64; 2], [f64; 2]) {
        let last = self.len() - 1;
        let prev = if i == 0 {
            match self.topology {
                Topology::Closed => self.samples[last],
                // Continuing the meridian through the pole: x even, r odd.
                Topology::AxisToAxis => [self.samples[1][0], -self.samples[1][1]],
                Topology::Open => {
                    // linear extrapolation for free ends
                    let a = self.samples[0];
                    let b = self.samples[1];
                    [2.0 * a[0] - b[0], 2.0 * a[1] - b[1]]
                }
            }
        } else {
            self.samples[i - 1]
        };
        let next = if i == last {
            match self.topology {
                Topology::Closed => self.samples[0],
                Topology::AxisToAxis => [self.samples[last - 1][0], -self.samples[last - 1][1]],
                Topology::Open => {
                    let a = self.samples[last];
                    let b = self.samples[last - 1];
                    [2.0 * a[0] - b[0], 2.0 * a[1] - b[1]]
                }
            }
        } else {
            self.samples[i + 1]
        };
        (prev, next)
    }

    /// First and second derivatives with respect to chord arclength at sample
    /// `i` from the quadratic through `i-1, i, i+1`.
    fn fit_derivatives(&self, i: usize) -> Result<([f64; 2], [f64; 2])> {
        let p0 = self.samples[i];
        let (pm, pp) = self.neighbors(i);
        let a = (p0[0] - pm[0]).hypot(p0[1] - pm[1]);
        let b = (pp[0] - p0[0]).hypot(pp[1] - p0[1]);
        if a == 0.0 || b == 0.0 {
            return Err(Error::InvalidGeometry(format!(
                "zero spacing next to sample {i}"
            )));
        }
        let denom = a * b * (a + b);
        let mut d1 = [0.0; 2];
        let mut d2 = [0.0; 2];
        for c in 0..2 {
            let fp = pp[c] - p0[c];
            let fm = pm[c] - p0[c];
            d1[c] = (a * a * fp - b * b * fm) / denom;
            d2[c] = 2.0 * (a * fp + b * fm) / denom;
        }
        Ok((d1, d2))
    }

    /// Unit tangent at sample `i` (direction of increasing parameter).
    pub fn tangent(&self, i: usize) -> Result<[f64; 2]> {
        let (d1, _) = self.fit_derivatives(i)?;
        let len = d1[0].hypot(d1[1]);
        if len == 0.0 {
            return Err(Error::InvalidGeometry(format!(
                "vanishing tangent at sample {i}"
            )));
        }
        Ok([d1[0] / len, d1[1] / len])
    }

    /// Inward unit normal at sample `i`.
    pub fn normal(&self, i: usize) -> Result<[f64; 2]> {
        let t = self.tangent(i)?;
        Ok([t[1], -t[0]])
    }

    /// Curvature data at sample `i`. At axis endpoints the removable
    /// singularity of `kappa_rot` is resolved by the smooth limit
    /// `kappa_rot -> kappa_profile`.
    pub fn curvature_at(&self, i: usize) -> Result<CurvatureData> {
        let (d1, d2) = self.fit_derivatives(i)?;
        let speed2 = d1[0] * d1[0] + d1[1] * d1[1];
        let speed = speed2.sqrt();
        if speed == 0.0 {
            return Err(Error::InvalidGeometry(format!(
                "vanishing tangent at sample {i}"
            )));
        }
        // signed curvature w.r.t. the left normal, then flipped to our inward side
        let kappa_std = (d1[0] * d2[1] - d1[1] * d2[0]) / (speed2 * speed);
        let kappa_profile = -kappa_std;
        let kappa_rot = if self.is_axis_endpoint(i) {
            kappa_profile
        } else {
            let r = self.samples[i][1];
            if r <= 0.0 {
                return Err(Error::InvalidGeometry(format!(
                    "r = 0 at non-endpoint sample {i}"
                )));
            }
            let nu_r = -d1[0] / speed; // inward normal is (T_r, -T_x)
            -nu_r / r
        };
        Ok(curvature_from_principal(kappa_profile, kappa_rot, self.n))
    }

    /// Curvature data at every sample.
    pub fn curvature_all(&self) -> Result<Vec<CurvatureData>> {
        (0..self.len()).map(|i| self.curvature_at(i)).collect()
    }

    /// Area, volume, diameter and minimum radius of the revolved surface.
    pub fn measures(&self) -> Result<Measures> {
        if self.topology == Topology::Open {
            return Err(Error::InvalidTopology(
                "measures requires a Closed or AxisToAxis profile".into(),
            ));
        }
        let n = self.n as i32;
        let sphere = unit_sphere_area(self.n);
        let omega = unit_ball_volume(self.n);
        let m = if self.topology == Topology::Closed {
            self.len()
        } else {
            self.len() - 1
        };
        let mut area = 0.0;
        let mut flux = 0.0;
        for k in 0..m {
            let p = self.samples[k];
            let q = self.samples[(k + 1) % self.len()];
            let ell = (q[0] - p[0]).hypot(q[1] - p[1]);
            area += sphere * ell * power_mean(p[1], q[1], n - 1);
            flux += (q[0] - p[0]) * power_mean(p[1], q[1], n);
        }
        let volume = omega * flux.abs();
        let mut min_radius = f64::INFINITY;
        let interior = match self.topology {
            Topology::AxisToAxis => 1..self.len() - 1,
            _ => 0..self.len(),
        };
        for i in interior {
            min_radius = min_radius.min(self.samples[i][1]);
        }
        let diameter = revolved_diameter(&self.samples);
        Ok(Measures {
            area,
            volume,
            diameter,
            min_radius,
        })
    }

    /// O(N^2) simplicity check of the polyline; used at construction time and
    /// at a configurable cadence inside the flow engine.
    pub fn check_simple(&self) -> Result<()> {
        if let Some((i, j)) = first_self_intersection(&self.samples, self.topology) {
            return Err(Error::InvalidGeometry(format!(
                "profile self-intersects between segments {i} and {j}"
            )));
        }
        Ok(())
    }

    /// Arclength-equidistributed resampling with optional curvature refinement.
    pub fn resample(&self, policy: &ResamplePolicy) -> Result<ProfileCurve> {
        let total = self.total_length();
        if policy.target_h <= 0.0 {
            return Err(Error::InvalidGeometry("resample target_h must be > 0".into()));
        }
        if policy.target_h > total {
            return Err(Error::InvalidGeometry(format!(
                "target_h {} exceeds total length {total}",
                policy.target_h
            )));
        }
        let nseg = if self.topology == Topology::Closed {
            self.len()
        } else {
            self.len() - 1
        };
        // local target spacing per segment
        let floor = policy.target_h * policy.floor_frac;
        let mut h_seg = vec![policy.target_h; nseg];
        if policy.curvature_refine {
            let curv = self.curvature_all()?;
            for k in 0..nseg {
                let a2 = curv[k]
                    .norm_a2
                    .max(curv[(k + 1) % self.len()].norm_a2)
                    .sqrt();
                if a2 > 0.0 {
                    h_seg[k] = (policy.refine_threshold / a2)
                        .min(policy.target_h)
                        .max(floor);
                }
            }
        }
        // cumulative refinement measure
        let mut w = Vec::with_capacity(nseg + 1);
        w.push(0.0);
        let mut seg_len = Vec::with_capacity(nseg);
        for k in 0..nseg {
            let p = self.samples[k];
            let q = self.samples[(k + 1) % self.len()];
            let ell = (q[0] - p[0]).hypot(q[1] - p[1]);
            seg_len.push(ell);
            w.push(w[k] + ell / h_seg[k]);
        }
        let w_total = w[nseg];
        let count = (w_total.round() as usize).max(8);
        let closed = self.topology == Topology::Closed;
        let n_new = if closed { count } else { count + 1 };
        let mut out = Vec::with_capacity(n_new);
        let mut k = 0usize;
        let steps = if closed { n_new } else { n_new - 1 };
        out.push(self.samples[0]);
        for j in 1..steps {
            let target = w_total * j as f64 / steps as f64;
            while k + 1 < nseg && w[k + 1] < target {
                k += 1;
            }
            let tau = if w[k + 1] > w[k] {
                (target - w[k]) / (w[k + 1] - w[k])
            } else {
                0.0
            };
            let pos = match policy.fit {
                FitKind::Linear => {
                    let p = self.samples[k];
                    let q = self.samples[(k + 1) % self.len()];
                    [p[0] + tau * (q[0] - p[0]), p[1] + tau * (q[1] - p[1])]
                }
                FitKind::CatmullRom => self.catmull_rom(k, tau),
            };
            out.push([pos[0], pos[1].max(0.0)]);
        }
        if !closed {
            out.push(self.samples[self.len() - 1]);
        }
        ProfileCurve::from_parts(out, self.topology, self.n)
    }

    /// Catmull-Rom evaluation on segment `k` at parameter `tau` in [0, 1],
    /// with chord-length parameterization and reflected ghosts at the ends.
    fn catmull_rom(&self, k: usize, tau: f64) -> [f64; 2] {
        let len = self.len();
        let p1 = self.samples[k];
        let p2 = self.samples[(k + 1) % len];
        let p0 = if k == 0 {
            self.neighbors(0).0
        } else {
            self.samples[k - 1]
        };
        let p3 = if k + 2 <= len - 1 {
            self.samples[k + 2]
        } else if self.topology == Topology::Closed {
            self.samples[(k + 2) % len]
        } else {
            self.neighbors(len - 1).1
        };
        catmull_rom_chordal(p0, p1, p2, p3, tau)
    }

    /// Extract the graph `r = u(x)` when the profile is graphical over the
    /// axis (x strictly monotone). Returns `(xs, us)` with xs increasing.
    pub fn to_graph(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.topology == Topology::Closed {
            return None;
        }
        let inc = self.samples[1][0] > self.samples[0][0];
        let mut xs = Vec::with_capacity(self.len());
        let mut us = Vec::with_capacity(self.len());
        for w in self.samples.windows(2) {
            if (w[1][0] > w[0][0]) != inc || w[1][0] == w[0][0] {
                return None;
            }
        }
        if inc {
            for s in &self.samples {
                xs.push(s[0]);
                us.push(s[1]);
            }
        } else {
            for s in self.samples.iter().rev() {
                xs.push(s[0]);
                us.push(s[1]);
            }
        }
        Some((xs, us))
    }

    /// Write the plain-text snapshot format.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "profile n={} topology={}", self.n, self.topology)?;
        for s in &self.samples {
            writeln!(w, "{:.15e} {:.15e}", s[0], s[1])?;
        }
        Ok(())
    }

    /// Read the plain-text snapshot format.
    pub fn read_snapshot<R: BufRead>(r: R) -> Result<ProfileCurve> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidGeometry("empty snapshot".into()))??;
        let mut n = None;
        let mut topology = None;
        for tok in header.split_whitespace() {
            if let Some(v) = tok.strip_prefix("n=") {
                n = v.parse::<u32>().ok();
            } else if let Some(v) = tok.strip_prefix("topology=") {
                topology = match v {
                    "Closed" => Some(Topology::Closed),
                    "AxisToAxis" => Some(Topology::AxisToAxis),
                    "Open" => Some(Topology::Open),
                    _ => None,
                };
            }
        }
        let (n, topology) = match (n, topology) {
            (Some(n), Some(t)) => (n, t),
            _ => {
                return Err(Error::InvalidGeometry(format!(
                    "bad snapshot header: {header}"
                )))
            }
        };
        let mut samples = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let x: f64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::InvalidGeometry(format!("bad snapshot line: {line}")))?;
            let r: f64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::InvalidGeometry(format!("bad snapshot line: {line}")))?;
            samples.push([x, r]);
        }
        ProfileCurve::from_parts(samples, topology, n)
    }
}

/// Assemble `CurvatureData` from the two principal curvatures.
pub fn curvature_from_principal(kappa_profile: f64, kappa_rot: f64, n: u32) -> CurvatureData {
    let m = (n - 1) as f64;
    let h = kappa_profile + m * kappa_rot;
    let norm_a2 = kappa_profile * kappa_profile + m * kappa_rot * kappa_rot;
    let k_min = kappa_profile.min(kappa_rot);
    let two_smallest = if kappa_profile <= kappa_rot || n == 2 {
        kappa_profile + kappa_rot
    } else {
        2.0 * kappa_rot
    };
    CurvatureData {
        kappa_profile,
        kappa_rot,
        h,
        norm_a2,
        k_min,
        two_convex: two_smallest > 0.0,
    }
}

/// Build a profile from a sampled graph `u(x)` over an axis interval.
pub fn graph_to_profile(xs: &[f64], us: &[f64], n: u32, ends: GraphEnds) -> Result<ProfileCurve> {
    if xs.len() != us.len() || xs.len() < 3 {
        return Err(Error::InvalidGeometry(
            "graph needs matching xs/us with at least 3 samples".into(),
        ));
    }
    for w in xs.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidGeometry("graph xs must be increasing".into()));
        }
    }
    for (i, &u) in us.iter().enumerate() {
        if u <= 0.0 {
            return Err(Error::InvalidGeometry(format!(
                "graph value u = {u} <= 0 at interior sample {i}"
            )));
        }
    }
    let mut samples: Vec<[f64; 2]> = xs.iter().zip(us).map(|(&x, &u)| [x, u]).collect();
    match ends {
        GraphEnds::Clamped => ProfileCurve::from_parts(samples, Topology::Open, n),
        GraphEnds::CapZero => {
            // extrapolate the axis crossing of u^2, which is linear for
            // square-root caps
            let m = samples.len();
            let left = axis_crossing(samples[1], samples[0]);
            let right = axis_crossing(samples[m - 2], samples[m - 1]);
            samples.insert(0, [left, 0.0]);
            samples.push([right, 0.0]);
            ProfileCurve::from_parts(samples, Topology::AxisToAxis, n)
        }
    }
}

fn axis_crossing(inner: [f64; 2], outer: [f64; 2]) -> f64 {
    let (u1, u2) = (inner[1] * inner[1], outer[1] * outer[1]);
    let dx = outer[0] - inner[0];
    if (u1 - u2).abs() < 1e-300 {
        outer[0] + dx.signum() * outer[1]
    } else {
        // u^2 linear: crossing where it reaches zero
        outer[0] + dx * u2 / (u1 - u2)
    }
}

fn polyline_scale(samples: &[[f64; 2]]) -> f64 {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for s in samples {
        for c in 0..2 {
            lo[c] = lo[c].min(s[c]);
            hi[c] = hi[c].max(s[c]);
        }
    }
    (hi[0] - lo[0]).max(hi[1] - lo[1])
}

/// Mean of `t -> lerp(r1, r2, t)^p` over [0, 1], in closed form.
fn power_mean(r1: f64, r2: f64, p: i32) -> f64 {
    if p == 0 {
        return 1.0;
    }
    let d = r2 - r1;
    if d.abs() < 1e-12 * (r1.abs() + r2.abs() + 1e-300) {
        let rm = 0.5 * (r1 + r2);
        return rm.powi(p);
    }
    (r2.powi(p + 1) - r1.powi(p + 1)) / ((p + 1) as f64 * d)
}

/// Surface area of the unit n-sphere `S^n` embedded in `R^{n+1}`... here we
/// need `|S^{n-1}|`, so callers pass the hypersurface dimension `n`.
pub fn unit_sphere_area(n: u32) -> f64 {
    // |S^{m}| = 2 pi^{(m+1)/2} / Gamma((m+1)/2) with m = n - 1
    let half = 0.5 * n as f64;
    2.0 * std::f64::consts::PI.powf(half) / gamma_half_integer(n)
}

/// Volume of the unit n-ball.
pub fn unit_ball_volume(n: u32) -> f64 {
    unit_sphere_area(n) / n as f64
}

/// Gamma(n/2) for positive integer n.
fn gamma_half_integer(n: u32) -> f64 {
    let mut z = 0.5 * n as f64;
    let mut acc = 1.0;
    while z > 1.0 + 1e-12 {
        z -= 1.0;
        acc *= z;
    }
    if (z - 1.0).abs() < 1e-12 {
        acc
    } else {
        // z == 1/2
        acc * std::f64::consts::PI.sqrt()
    }
}

/// Extrinsic diameter of the revolved point set: max over sample pairs of
/// `sqrt(dx^2 + (r_i + r_j)^2)`, computed on the convex hull of the doubled
/// point set.
pub fn revolved_diameter(samples: &[[f64; 2]]) -> f64 {
    let mut pts = Vec::with_capacity(2 * samples.len());
    for s in samples {
        pts.push([s[0], s[1]]);
        pts.push([s[0], -s[1]]);
    }
    let hull = convex_hull(&mut pts);
    let mut best: f64 = 0.0;
    for i in 0..hull.len() {
        for j in i + 1..hull.len() {
            let d = (hull[i][0] - hull[j][0]).hypot(hull[i][1] - hull[j][1]);
            best = best.max(d);
        }
    }
    best
}

fn convex_hull(pts: &mut Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let n = pts.len();
    if n < 3 {
        return pts.clone();
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * n);
    for &p in pts.iter() {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev() {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Index pair of the first intersecting non-adjacent segment pair, if any.
pub fn first_self_intersection(
    samples: &[[f64; 2]],
    topology: Topology,
) -> Option<(usize, usize)> {
    let n = samples.len();
    let m = if topology == Topology::Closed { n } else { n - 1 };
    let seg = |k: usize| (samples[k], samples[(k + 1) % n]);
    for i in 0..m {
        for j in i + 2..m {
            if i == 0 && topology == Topology::Closed && j == m - 1 {
                continue; // adjacent through the wrap
            }
            let (a, b) = seg(i);
            let (c, d) = seg(j);
            if segments_intersect(a, b, c, d) {
                return Some((i, j));
            }
        }
    }
    None
}

fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let orient = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| {
        (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    };
    let d1 = orient(a, b, c);
    let d2 = orient(a, b, d);
    let d3 = orient(c, d, a);
    let d4 = orient(c, d, b);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    false
}

fn catmull_rom_chordal(
    p0: [f64; 2],
    p1: [f64; 2],
    p2: [f64; 2],
    p3: [f64; 2],
    tau: f64,
) -> [f64; 2] {
    let dist = |a: [f64; 2], b: [f64; 2]| (b[0] - a[0]).hypot(b[1] - a[1]).max(1e-300);
    let (d01, d12, d23) = (dist(p0, p1), dist(p1, p2), dist(p2, p3));
    let mut out = [0.0; 2];
    for c in 0..2 {
        // tangents of the chord-length parameterized cubic Hermite segment
        let m1 = d12 * ((p1[c] - p0[c]) / d01 + (p2[c] - p1[c]) / d12
            - (p2[c] - p0[c]) / (d01 + d12));
        let m2 = d12 * ((p2[c] - p1[c]) / d12 + (p3[c] - p2[c]) / d23
            - (p3[c] - p1[c]) / (d12 + d23));
        let t2 = tau * tau;
        let t3 = t2 * tau;
        out[c] = (2.0 * t3 - 3.0 * t2 + 1.0) * p1[c]
            + (t3 - 2.0 * t2 + tau) * m1
            + (-2.0 * t3 + 3.0 * t2) * p2[c]
            + (t3 - t2) * m2;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    pub(crate) fn circle_profile(radius: f64, n: u32, count: usize) -> ProfileCurve {
        let mut samples: Vec<[f64; 2]> = (0..count)
            .map(|i| {
                let t = PI * (i as f64 / (count - 1) as f64) - PI / 2.0;
                [radius * t.sin(), radius * t.cos()]
            })
            .collect();
        samples[0] = [-radius, 0.0];
        samples[count - 1] = [radius, 0.0];
        ProfileCurve::new(samples, Topology::AxisToAxis, n).unwrap()
    }

    fn straight_profile(height: f64, n: u32, count: usize) -> ProfileCurve {
        let samples: Vec<[f64; 2]> = (0..count)
            .map(|i| [i as f64 / (count - 1) as f64 * 2.0, height])
            .collect();
        ProfileCurve::new(samples, Topology::Open, n).unwrap()
    }

    #[test]
    fn sphere_mean_curvature_is_n_over_r() {
        for n in [2u32, 3, 4] {
            for radius in [0.5, 1.0, 2.0] {
                let p = circle_profile(radius, n, 400);
                let expect = n as f64 / radius;
                for i in [0, 1, 100, 200, 399] {
                    let c = p.curvature_at(i).unwrap();
                    assert!(
                        (c.h - expect).abs() < 1e-4 * expect,
                        "n={n} R={radius} i={i}: H={} expected {expect}",
                        c.h
                    );
                    assert!((c.kappa_profile - 1.0 / radius).abs() < 1e-4 / radius);
                    assert!((c.kappa_rot - 1.0 / radius).abs() < 1e-4 / radius);
                }
            }
        }
    }

    #[test]
    fn cylinder_mean_curvature_is_exact() {
        for n in [2u32, 3, 4] {
            for r in [0.25, 0.5, 1.0] {
                let p = straight_profile(r, n, 64);
                let expect = (n - 1) as f64 / r;
                for i in 0..p.len() {
                    let c = p.curvature_at(i).unwrap();
                    assert!(
                        (c.h - expect).abs() <= 1e-12 * expect,
                        "cylinder H={} vs {expect}",
                        c.h
                    );
                    assert_eq!(c.kappa_profile, 0.0);
                }
            }
        }
    }

    #[test]
    fn sphere_measures_match_closed_form() {
        let p = circle_profile(1.0, 2, 3000);
        let m = p.measures().unwrap();
        assert!((m.area - 4.0 * PI).abs() < 1e-4, "area {}", m.area);
        assert!((m.volume - 4.0 * PI / 3.0).abs() < 1e-4, "vol {}", m.volume);
        assert!((m.diameter - 2.0).abs() < 1e-6, "diam {}", m.diameter);
    }

    #[test]
    fn higher_dimensional_sphere_measures() {
        // S^3 of radius 1 in R^4: area 2 pi^2, enclosed volume pi^2 / 2
        let p = circle_profile(1.0, 3, 4000);
        let m = p.measures().unwrap();
        assert_relative_eq!(m.area, 2.0 * PI * PI, max_relative = 1e-4);
        assert_relative_eq!(m.volume, PI * PI / 2.0, max_relative = 1e-4);
    }

    #[test]
    fn resample_circle_stays_on_circle() {
        let p = circle_profile(1.0, 2, 33);
        let q = p.resample(&ResamplePolicy::uniform(0.01)).unwrap();
        assert!(
            q.len() > 250 && q.len() < 400,
            "unexpected count {} for semicircle of length pi",
            q.len()
        );
        for s in q.samples() {
            let rad = s[0].hypot(s[1]);
            assert!(
                (rad - 1.0).abs() < 1e-4,
                "resampled point off circle by {}",
                (rad - 1.0).abs()
            );
        }
    }

    #[test]
    fn resample_is_stable_under_repetition() {
        let p = circle_profile(1.0, 2, 200);
        let policy = ResamplePolicy::uniform(0.02);
        let q1 = p.resample(&policy).unwrap();
        let a1 = q1.measures().unwrap().area;
        let q2 = q1.resample(&policy).unwrap();
        let a2 = q2.measures().unwrap().area;
        assert!(
            ((a2 - a1) / a1).abs() < 1e-6,
            "area drifted {} under repeated resample",
            ((a2 - a1) / a1).abs()
        );
    }

    #[test]
    fn resample_rejects_oversized_target() {
        let p = circle_profile(1.0, 2, 100);
        assert!(p.resample(&ResamplePolicy::uniform(10.0)).is_err());
    }

    #[test]
    fn graph_constant_gives_cylinder() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 / 49.0 * 2.0).collect();
        let us = vec![0.5; 50];
        let p = graph_to_profile(&xs, &us, 2, GraphEnds::Clamped).unwrap();
        assert_eq!(p.topology(), Topology::Open);
        let c = p.curvature_at(25).unwrap();
        assert!((c.h - 2.0).abs() < 1e-12);
    }

    #[test]
    fn graph_semicircle_caps_to_sphere() {
        let m = 400;
        let xs: Vec<f64> = (1..m).map(|i| -1.0 + 2.0 * i as f64 / m as f64).collect();
        let us: Vec<f64> = xs.iter().map(|&x| (1.0 - x * x).sqrt()).collect();
        let p = graph_to_profile(&xs, &us, 2, GraphEnds::CapZero).unwrap();
        assert_eq!(p.topology(), Topology::AxisToAxis);
        let meas = p.measures().unwrap();
        assert!((meas.area - 4.0 * PI).abs() < 1e-3 * 4.0 * PI);
        assert!((meas.volume - 4.0 * PI / 3.0).abs() < 1e-3 * 4.0 * PI / 3.0);
    }

    #[test]
    fn graph_rejects_nonpositive_values() {
        let xs = vec![0.0, 1.0, 2.0, 3.0];
        let us = vec![1.0, -0.1, 1.0, 1.0];
        assert!(graph_to_profile(&xs, &us, 2, GraphEnds::Clamped).is_err());
    }

    #[test]
    fn invalid_geometry_is_rejected() {
        // r = 0 at a non-endpoint
        let bad = vec![[-1.0, 0.0], [-0.5, 0.5], [0.0, 0.0], [0.5, 0.5], [1.0, 0.0]];
        assert!(ProfileCurve::new(bad, Topology::AxisToAxis, 2).is_err());
        // duplicate consecutive samples
        let dup = vec![[-1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [1.0, 0.0]];
        assert!(ProfileCurve::new(dup, Topology::AxisToAxis, 2).is_err());
        // self-intersecting bowtie loop
        let bow = vec![[0.0, 1.0], [1.0, 2.0], [1.0, 1.0], [0.0, 2.0]];
        assert!(ProfileCurve::new(bow, Topology::Closed, 2).is_err());
    }

    #[test]
    fn snapshot_roundtrip_preserves_samples() {
        let p = circle_profile(1.0, 3, 64);
        let mut buf = Vec::new();
        p.write_snapshot(&mut buf).unwrap();
        let q = ProfileCurve::read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(p.dim(), q.dim());
        assert_eq!(p.topology(), q.topology());
        assert_eq!(p.len(), q.len());
        for (a, b) in p.samples().iter().zip(q.samples()) {
            assert!((a[0] - b[0]).abs() < 1e-14 && (a[1] - b[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn diameter_uses_opposite_orbits() {
        // straight profile at height 1: revolved cylinder of radius 1, length 2;
        // diameter is the diagonal sqrt(4 + 4)
        let p = straight_profile(1.0, 2, 32);
        let d = revolved_diameter(p.samples());
        assert_relative_eq!(d, (8.0f64).sqrt(), max_relative = 1e-12);
    }
}
