//! Axisymmetric flow engine: explicit normal-velocity stepping of profile
//! curves with adaptive time steps, curvature-driven remeshing, event
//! detection, and terminal classification.
//!
//! The engine moves every sample by `dt * speed * nu` where `nu` is the
//! inward normal and `speed` comes from a [`SpeedLaw`]. Axis endpoints move
//! along the axis with the limiting normal speed `n * kappa_profile`.
//! Tangential redistribution happens at remesh time only; it changes the
//! parameterization, not the surface.

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::profile::{CurvatureData, FitKind, ProfileCurve, ResamplePolicy, Topology};
use crate::shapes::StraighteningMap;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;

/// Spatial weight field `chi in [0, 1]` used by masked speed laws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SpatialMask {
    /// Constant weight everywhere.
    Uniform(f64),
    /// Weight `inside` for axial coordinates in `[lo, hi]`, blending smoothly
    /// to `outside` over a ramp of the given width.
    AxialWindow {
        lo: f64,
        hi: f64,
        ramp: f64,
        inside: f64,
        outside: f64,
    },
}

impl SpatialMask {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            SpatialMask::Uniform(c) => c,
            SpatialMask::AxialWindow {
                lo,
                hi,
                ramp,
                inside,
                outside,
            } => {
                if x >= lo && x <= hi {
                    inside
                } else {
                    let d = if x < lo { lo - x } else { x - hi };
                    if d >= ramp {
                        outside
                    } else {
                        inside + (outside - inside) * smoothstep(d / ramp)
                    }
                }
            }
        }
    }

    fn max_weight(&self) -> f64 {
        match *self {
            SpatialMask::Uniform(c) => c.abs(),
            SpatialMask::AxialWindow {
                inside, outside, ..
            } => inside.abs().max(outside.abs()),
        }
    }
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Normal-speed rule for the flow.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SpeedLaw {
    /// Pure mean curvature flow: speed = H.
    Mcf,
    /// Time-rescaled flow: speed = e^{-delta} H. Negative `delta` runs
    /// faster than MCF (supersolution candidate), positive slower
    /// (subsolution candidate).
    Scaled { delta: f64 },
    /// Spatially masked flow: speed = chi(x) H with chi in [0, 1], so
    /// |speed| <= |H| pointwise.
    Masked { mask: SpatialMask },
    /// Marker for barrier flows obtained by mapping a base trace through a
    /// straightening chart. Not a pointwise law; see [`pushforward_flow`].
    Pushforward,
}

impl SpeedLaw {
    pub fn speed(&self, h: f64, x: f64) -> Result<f64> {
        match self {
            SpeedLaw::Mcf => Ok(h),
            SpeedLaw::Scaled { delta } => Ok((-delta).exp() * h),
            SpeedLaw::Masked { mask } => {
                debug_assert!(mask.max_weight() <= 1.0 + 1e-12);
                Ok(mask.eval(x) * h)
            }
            SpeedLaw::Pushforward => Err(Error::UnsupportedLaw(
                "pushforward barriers are produced by pushforward_flow, not stepped".into(),
            )),
        }
    }

    pub fn name(&self) -> String {
        match self {
            SpeedLaw::Mcf => "mcf".into(),
            SpeedLaw::Scaled { delta } => format!("scaled(delta={delta})"),
            SpeedLaw::Masked { .. } => "masked".into(),
            SpeedLaw::Pushforward => "pushforward".into(),
        }
    }
}

/// Per-step scalar diagnostics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalarRecord {
    pub t: f64,
    pub area: f64,
    pub volume: f64,
    /// Maximum of |H| over the surface.
    pub max_h: f64,
    /// Maximum of |A|^2 over the surface.
    pub max_a2: f64,
    /// Global minimum principal curvature.
    pub k_min: f64,
    pub min_radius: f64,
    pub diameter: f64,
}

pub const TRACE_CSV_HEADER: &str = "t,area,volume,maxH,maxA2,kmin,min_radius,diameter";

/// Why a flow stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TerminalKind {
    RoundPoint,
    Neckpinch,
    StepLimit,
    TimeLimit,
    NumericalBreakdown,
}

/// Diagnostic payload attached to a terminal event.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roundness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diameter_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neck_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volume_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TerminalEvent {
    pub kind: TerminalKind,
    pub t_final: f64,
    pub witness: Witness,
}

/// Time-indexed sequence of surface states plus per-step diagnostics.
#[derive(Debug, Clone)]
pub struct FlowTrace<S> {
    /// Snapshots `(t, state)`; always contains the initial and final states.
    pub states: Vec<(f64, S)>,
    pub scalars: Vec<ScalarRecord>,
    pub terminal: TerminalEvent,
    /// Parameter echo for reproducibility.
    pub meta: BTreeMap<String, String>,
}

pub type ProfileTrace = FlowTrace<ProfileCurve>;
pub type MeshTrace = FlowTrace<TriMesh>;

impl<S> FlowTrace<S> {
    /// Snapshot state nearest to time `t`.
    pub fn state_at(&self, t: f64) -> &(f64, S) {
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (i, (ts, _)) in self.states.iter().enumerate() {
            let d = (ts - t).abs();
            if d < dist {
                dist = d;
                best = i;
            }
        }
        &self.states[best]
    }

    /// Snapshot states bracketing time `t` with the weight of the later one,
    /// or `None` outside the recorded span.
    pub fn bracket(&self, t: f64) -> Option<(&(f64, S), &(f64, S), f64)> {
        let first = self.states.first()?;
        let last = self.states.last()?;
        if t < first.0 - 1e-12 || t > last.0 + 1e-12 {
            return None;
        }
        let mut k = 0;
        while k + 1 < self.states.len() && self.states[k + 1].0 < t {
            k += 1;
        }
        if k + 1 == self.states.len() {
            return Some((&self.states[k], &self.states[k], 0.0));
        }
        let (t0, t1) = (self.states[k].0, self.states[k + 1].0);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        Some((&self.states[k], &self.states[k + 1], w.clamp(0.0, 1.0)))
    }

    pub fn t_final(&self) -> f64 {
        self.terminal.t_final
    }

    /// Linearly interpolated area at time `t` from the scalar records.
    pub fn area_at(&self, t: f64) -> Option<f64> {
        interp_records(&self.scalars, t, |r| r.area)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{TRACE_CSV_HEADER}")?;
        for r in &self.scalars {
            writeln!(
                w,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                r.t, r.area, r.volume, r.max_h, r.max_a2, r.k_min, r.min_radius, r.diameter
            )?;
        }
        Ok(())
    }
}

pub(crate) fn interp_records(
    records: &[ScalarRecord],
    t: f64,
    f: impl Fn(&ScalarRecord) -> f64,
) -> Option<f64> {
    let first = records.first()?;
    let last = records.last()?;
    if t < first.t - 1e-12 || t > last.t + 1e-12 {
        return None;
    }
    let mut k = 0;
    while k + 1 < records.len() && records[k + 1].t < t {
        k += 1;
    }
    if k + 1 == records.len() {
        return Some(f(&records[k]));
    }
    let (t0, t1) = (records[k].t, records[k + 1].t);
    let w = if t1 > t0 {
        ((t - t0) / (t1 - t0)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Some(f(&records[k]) * (1.0 - w) + f(&records[k + 1]) * w)
}

/// Event tolerances for terminal classification.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EventTolerances {
    /// Roundness certificate: max/min ratio over all principal curvatures.
    pub round_ratio: f64,
    /// Roundness certificate: diameter fraction of the initial diameter.
    pub size_frac: f64,
    /// Neckpinch stop: min interior radius below this fraction of the
    /// initial diameter.
    pub pinch_frac: f64,
    /// Neckpinch classification requires volume above this fraction of the
    /// initial volume.
    pub vol_floor_frac: f64,
    /// Hard stop when the diameter falls below this fraction (resolution floor).
    pub extinct_frac: f64,
}

impl Default for EventTolerances {
    fn default() -> Self {
        EventTolerances {
            round_ratio: 1.05,
            size_frac: 0.05,
            pinch_frac: 1e-3,
            vol_floor_frac: 1e-2,
            extinct_frac: 2e-3,
        }
    }
}

/// Remeshing policy applied during evolution.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RemeshControls {
    pub target_h: f64,
    /// Scale the target spacing with sqrt(diameter / initial diameter), so a
    /// shrinking surface keeps enough samples without grinding dt to zero.
    pub relative: bool,
    pub curvature_refine: bool,
    pub refine_threshold: f64,
    pub floor_frac: f64,
    pub fit: FitKind,
    /// Remesh when spacing drifts beyond this factor from target.
    pub drift_factor: f64,
    /// Minimum number of steps between remeshes.
    pub min_interval: usize,
}

impl RemeshControls {
    pub fn new(target_h: f64) -> Self {
        RemeshControls {
            target_h,
            relative: true,
            curvature_refine: true,
            refine_threshold: 0.1,
            floor_frac: 0.02,
            fit: FitKind::CatmullRom,
            drift_factor: 2.0,
            min_interval: 8,
        }
    }

    fn policy(&self, scale: f64) -> ResamplePolicy {
        ResamplePolicy {
            target_h: self.target_h * scale,
            curvature_refine: self.curvature_refine,
            refine_threshold: self.refine_threshold,
            floor_frac: self.floor_frac,
            fit: self.fit,
        }
    }
}

/// Solver controls for [`evolve`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EvolveControls {
    pub dt_safety: f64,
    /// Parabolic bound dt <= c_parab * h_min^2.
    pub c_parab: f64,
    /// Curvature bound dt <= c_curv / max|A|^2.
    pub c_curv: f64,
    pub t_max: f64,
    pub step_max: usize,
    pub remesh: RemeshControls,
    pub events: EventTolerances,
    /// Approximate time spacing of stored snapshots (0 = only first/last).
    pub snapshot_dt: f64,
    /// Self-intersection check cadence in steps (0 disables).
    pub check_every: usize,
}

impl EvolveControls {
    pub fn new(target_h: f64, t_max: f64) -> Self {
        EvolveControls {
            dt_safety: 0.9,
            c_parab: 0.2,
            c_curv: 0.1,
            t_max,
            step_max: 2_000_000,
            remesh: RemeshControls::new(target_h),
            events: EventTolerances::default(),
            snapshot_dt: t_max / 400.0,
            check_every: 25,
        }
    }
}

/// Move every sample by `dt * speed * nu`. The error cases (NaN, axis
/// crossing) surface as `InvalidGeometry`; [`evolve`] converts them to
/// `NumericalBreakdown` terminals.
pub fn step(profile: &ProfileCurve, dt: f64, law: &SpeedLaw) -> Result<ProfileCurve> {
    let curv = profile.curvature_all()?;
    step_with(profile, &curv, dt, law)
}

fn step_with(
    profile: &ProfileCurve,
    curv: &[CurvatureData],
    dt: f64,
    law: &SpeedLaw,
) -> Result<ProfileCurve> {
    let n = profile.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let p = profile.point(i);
        let speed = law.speed(curv[i].h, p[0])?;
        let nu = profile.normal(i)?;
        if profile.is_axis_endpoint(i) {
            // the inward normal at a pole is axial; poles slide along the axis
            out.push([p[0] + dt * speed * nu[0].signum(), 0.0]);
        } else {
            let q = [p[0] + dt * speed * nu[0], p[1] + dt * speed * nu[1]];
            if !q[0].is_finite() || !q[1].is_finite() {
                return Err(Error::InvalidGeometry(format!(
                    "non-finite position after step at sample {i}"
                )));
            }
            out.push(q);
        }
    }
    ProfileCurve::from_parts(out, profile.topology(), profile.dim())
}

struct StepStats {
    h_min: f64,
    h_max: f64,
    max_a2: f64,
    max_abs_h: f64,
    k_min: f64,
    max_refine_violation: f64,
}

fn step_stats(profile: &ProfileCurve, curv: &[CurvatureData], refine_threshold: f64) -> StepStats {
    let n = profile.len();
    let m = if profile.topology() == Topology::Closed {
        n
    } else {
        n - 1
    };
    let mut st = StepStats {
        h_min: f64::INFINITY,
        h_max: 0.0,
        max_a2: 0.0,
        max_abs_h: 0.0,
        k_min: f64::INFINITY,
        max_refine_violation: 0.0,
    };
    for k in 0..m {
        let a = profile.point(k);
        let b = profile.point((k + 1) % n);
        let h = (b[0] - a[0]).hypot(b[1] - a[1]);
        st.h_min = st.h_min.min(h);
        st.h_max = st.h_max.max(h);
        let a2 = curv[k].norm_a2.max(curv[(k + 1) % n].norm_a2);
        st.max_refine_violation = st
            .max_refine_violation
            .max(h * a2.sqrt() / refine_threshold);
    }
    for c in curv {
        st.max_a2 = st.max_a2.max(c.norm_a2);
        st.max_abs_h = st.max_abs_h.max(c.h.abs());
        st.k_min = st.k_min.min(c.k_min);
    }
    st
}

/// Roundness ratio max/min over all principal curvatures, or `None` when the
/// profile is not strictly convex.
pub fn roundness_ratio(curv: &[CurvatureData]) -> Option<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in curv {
        lo = lo.min(c.kappa_profile.min(c.kappa_rot));
        hi = hi.max(c.kappa_profile.max(c.kappa_rot));
    }
    if lo <= 0.0 {
        None
    } else {
        Some(hi / lo)
    }
}

/// Evolve a profile under the given speed law until a terminal event.
pub fn evolve(
    profile: &ProfileCurve,
    law: &SpeedLaw,
    controls: &EvolveControls,
) -> Result<ProfileTrace> {
    if profile.topology() == Topology::Open {
        return Err(Error::InvalidTopology(
            "evolve requires a Closed or AxisToAxis profile".into(),
        ));
    }
    let m0 = profile.measures()?;
    let diam0 = m0.diameter;
    let vol0 = m0.volume;
    let tol = controls.events;
    let pinch_tol = tol.pinch_frac * diam0;

    let mut cur = profile.resample(&controls.remesh.policy(1.0))?;
    let mut t = 0.0;
    let mut states: Vec<(f64, ProfileCurve)> = vec![(0.0, cur.clone())];
    let mut scalars: Vec<ScalarRecord> = Vec::new();
    let mut next_snap = controls.snapshot_dt;
    let mut steps_since_remesh = 0usize;
    let mut steps_since_check = 0usize;

    let mut terminal: Option<TerminalEvent> = None;
    let mut step_count = 0usize;

    while terminal.is_none() {
        let curv = match cur.curvature_all() {
            Ok(c) => c,
            Err(e) => {
                terminal = Some(breakdown(t, format!("curvature evaluation failed: {e}")));
                break;
            }
        };
        let meas = cur.measures()?;
        let stats = step_stats(&cur, &curv, controls.remesh.refine_threshold);
        scalars.push(ScalarRecord {
            t,
            area: meas.area,
            volume: meas.volume,
            max_h: stats.max_abs_h,
            max_a2: stats.max_a2,
            k_min: stats.k_min,
            min_radius: meas.min_radius,
            diameter: meas.diameter,
        });

        // event detection
        if meas.diameter <= tol.size_frac * diam0 {
            if let Some(ratio) = roundness_ratio(&curv) {
                if ratio <= tol.round_ratio {
                    terminal = Some(TerminalEvent {
                        kind: TerminalKind::RoundPoint,
                        t_final: t,
                        witness: Witness {
                            roundness: Some(ratio),
                            diameter_fraction: Some(meas.diameter / diam0),
                            ..Default::default()
                        },
                    });
                    break;
                }
            }
        }
        if meas.diameter <= tol.extinct_frac * diam0 {
            let ratio = roundness_ratio(&curv);
            let round = ratio.map(|r| r <= tol.round_ratio.max(1.2)).unwrap_or(false);
            terminal = Some(TerminalEvent {
                kind: if round {
                    TerminalKind::RoundPoint
                } else {
                    TerminalKind::NumericalBreakdown
                },
                t_final: t,
                witness: Witness {
                    roundness: ratio,
                    diameter_fraction: Some(meas.diameter / diam0),
                    note: Some("diameter reached the resolution floor".into()),
                    ..Default::default()
                },
            });
            break;
        }
        if cur.topology() == Topology::AxisToAxis && meas.min_radius < pinch_tol {
            let neck_x = neck_location(&cur);
            let kind = if meas.volume > tol.vol_floor_frac * vol0 {
                TerminalKind::Neckpinch
            } else {
                TerminalKind::NumericalBreakdown
            };
            terminal = Some(TerminalEvent {
                kind,
                t_final: t,
                witness: Witness {
                    neck_x,
                    min_radius: Some(meas.min_radius),
                    volume_fraction: Some(meas.volume / vol0),
                    ..Default::default()
                },
            });
            break;
        }
        if t >= controls.t_max {
            terminal = Some(TerminalEvent {
                kind: TerminalKind::TimeLimit,
                t_final: t,
                witness: Witness::default(),
            });
            break;
        }
        if step_count >= controls.step_max {
            terminal = Some(TerminalEvent {
                kind: TerminalKind::StepLimit,
                t_final: t,
                witness: Witness::default(),
            });
            break;
        }

        // adaptive time step
        let mut dt = controls.c_parab * stats.h_min * stats.h_min;
        if stats.max_a2 > 0.0 {
            dt = dt.min(controls.c_curv / stats.max_a2);
        }
        if stats.max_abs_h > 0.0 {
            dt = dt.min(0.3 * stats.h_min / stats.max_abs_h);
        }
        dt *= controls.dt_safety;
        dt = dt.min(controls.t_max - t).max(1e-16);

        match step_with(&cur, &curv, dt, law) {
            Ok(next) => cur = next,
            Err(e) => {
                terminal = Some(breakdown(t, format!("step failed: {e}")));
                break;
            }
        }
        t += dt;
        step_count += 1;
        steps_since_remesh += 1;
        steps_since_check += 1;

        // remeshing
        let scale = if controls.remesh.relative {
            (scalars.last().unwrap().diameter / diam0).sqrt().max(0.02)
        } else {
            1.0
        };
        let target = controls.remesh.target_h * scale;
        let needs = stats.h_max > controls.remesh.drift_factor * target
            || stats.h_min < target / (4.0 * controls.remesh.drift_factor)
            || (controls.remesh.curvature_refine && stats.max_refine_violation > 1.5);
        if needs && steps_since_remesh >= controls.remesh.min_interval {
            match cur.resample(&controls.remesh.policy(scale)) {
                Ok(r) => {
                    cur = r;
                    steps_since_remesh = 0;
                }
                Err(e) => {
                    terminal = Some(breakdown(t, format!("remesh failed: {e}")));
                    break;
                }
            }
        }

        // cadenced self-intersection check
        if controls.check_every > 0 && steps_since_check >= controls.check_every {
            steps_since_check = 0;
            if let Err(e) = cur.check_simple() {
                terminal = Some(breakdown(t, format!("{e}")));
                break;
            }
        }

        if controls.snapshot_dt > 0.0 && t >= next_snap {
            states.push((t, cur.clone()));
            next_snap = t + controls.snapshot_dt;
        }
    }

    let terminal = terminal.unwrap();
    if states.last().map(|(ts, _)| *ts) != Some(t) {
        states.push((t, cur.clone()));
    }
    let mut meta = BTreeMap::new();
    meta.insert("law".into(), law.name());
    meta.insert("target_h".into(), format!("{}", controls.remesh.target_h));
    meta.insert("dt_safety".into(), format!("{}", controls.dt_safety));
    meta.insert("c_parab".into(), format!("{}", controls.c_parab));
    meta.insert("c_curv".into(), format!("{}", controls.c_curv));
    Ok(FlowTrace {
        states,
        scalars,
        terminal,
        meta,
    })
}

fn breakdown(t: f64, note: String) -> TerminalEvent {
    TerminalEvent {
        kind: TerminalKind::NumericalBreakdown,
        t_final: t,
        witness: Witness {
            note: Some(note),
            ..Default::default()
        },
    }
}

fn neck_location(profile: &ProfileCurve) -> Option<f64> {
    profile
        .samples()
        .iter()
        .skip(1)
        .take(profile.len().saturating_sub(2))
        .min_by(|a, b| a[1].partial_cmp(&b[1]).unwrap())
        .map(|s| s[0])
}

/// Deterministic reclassification of a finished trace. Total: every trace
/// maps to some terminal kind; unresolved cases map to `NumericalBreakdown`.
pub fn classify_terminal(
    trace: &ProfileTrace,
    tol: &EventTolerances,
    t_max: f64,
    step_max: usize,
) -> TerminalEvent {
    let t_final = trace.terminal.t_final;
    let (_, last) = trace.states.last().expect("trace has states");
    let first = &trace.scalars[0];
    let lastrec = trace.scalars.last().expect("trace has scalars");
    if let Ok(curv) = last.curvature_all() {
        if let Some(ratio) = roundness_ratio(&curv) {
            if ratio <= tol.round_ratio && lastrec.diameter <= tol.size_frac * first.diameter {
                return TerminalEvent {
                    kind: TerminalKind::RoundPoint,
                    t_final,
                    witness: Witness {
                        roundness: Some(ratio),
                        diameter_fraction: Some(lastrec.diameter / first.diameter),
                        ..Default::default()
                    },
                };
            }
        }
    }
    if lastrec.min_radius < tol.pinch_frac * first.diameter
        && lastrec.volume > tol.vol_floor_frac * first.volume
    {
        return TerminalEvent {
            kind: TerminalKind::Neckpinch,
            t_final,
            witness: Witness {
                neck_x: neck_location(last),
                min_radius: Some(lastrec.min_radius),
                volume_fraction: Some(lastrec.volume / first.volume),
                ..Default::default()
            },
        };
    }
    if t_final >= t_max {
        return TerminalEvent {
            kind: TerminalKind::TimeLimit,
            t_final,
            witness: Witness::default(),
        };
    }
    if trace.scalars.len() >= step_max {
        return TerminalEvent {
            kind: TerminalKind::StepLimit,
            t_final,
            witness: Witness::default(),
        };
    }
    TerminalEvent {
        kind: TerminalKind::NumericalBreakdown,
        t_final,
        witness: Witness {
            note: Some("unresolved terminal state".into()),
            ..Default::default()
        },
    }
}

/// Map every snapshot of an axisymmetric trace through the inverse
/// straightening chart `psi`, producing mesh-valued barrier states with
/// scalars recomputed on the images. No re-evolution happens: the image is a
/// candidate barrier, not a mean curvature flow.
pub fn pushforward_flow(
    base: &ProfileTrace,
    map: &StraighteningMap,
    segments: usize,
) -> Result<MeshTrace> {
    use crate::mesh::revolve;
    // freeze the sample count so all image meshes share connectivity and
    // displacement-based speed audits can pair vertices across time
    let count0 = base.states[0].1.len();
    let mut states: Vec<(f64, TriMesh)> = Vec::with_capacity(base.states.len());
    let mut scalars = Vec::with_capacity(base.states.len());
    for (t, prof) in &base.states {
        let total = prof.total_length();
        let uniform = prof.resample(&ResamplePolicy {
            target_h: total / (count0 as f64 - 1.0),
            curvature_refine: false,
            refine_threshold: 0.1,
            floor_frac: 0.02,
            fit: FitKind::CatmullRom,
        })?;
        let mesh = revolve(&uniform, segments)?;
        let mapped = map.apply_inverse_mesh(&mesh)?;
        let rec = crate::mesh_flow::mesh_scalars(&mapped, *t)?;
        states.push((*t, mapped));
        scalars.push(rec);
    }
    let mut meta = base.meta.clone();
    meta.insert("pushforward".into(), "true".into());
    meta.insert("segments".into(), format!("{segments}"));
    Ok(FlowTrace {
        states,
        scalars,
        terminal: TerminalEvent {
            kind: base.terminal.kind,
            t_final: base.terminal.t_final,
            witness: Witness {
                note: Some("pushforward image of base trace".into()),
                ..base.terminal.witness.clone()
            },
        },
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::make_sphere;

    #[test]
    fn sphere_step_moves_inward_at_speed_h() {
        let p = make_sphere(1.0, 2, 600).unwrap();
        let dt = 1e-5;
        let q = step(&p, dt, &SpeedLaw::Mcf).unwrap();
        let mid = q.len() / 2;
        let s = q.point(mid);
        let r_new = s[0].hypot(s[1]);
        assert!(
            (1.0 - r_new - 2.0 * dt).abs() < 1e-9,
            "radius moved by {}",
            1.0 - r_new
        );
    }

    #[test]
    fn scaled_law_halves_the_speed() {
        let p = make_sphere(1.0, 2, 400).unwrap();
        let dt = 1e-5;
        let q = step(
            &p,
            dt,
            &SpeedLaw::Scaled {
                delta: (2.0f64).ln(),
            },
        )
        .unwrap();
        let mid = q.len() / 2;
        let s = q.point(mid);
        let r_new = s[0].hypot(s[1]);
        assert!((1.0 - r_new - dt).abs() < 1e-9);
    }

    #[test]
    fn fully_masked_flow_is_frozen() {
        let p = make_sphere(1.0, 2, 200).unwrap();
        let law = SpeedLaw::Masked {
            mask: SpatialMask::Uniform(0.0),
        };
        let q = step(&p, 1e-3, &law).unwrap();
        assert_eq!(p.samples(), q.samples());
    }

    #[test]
    fn pushforward_marker_law_cannot_step() {
        let p = make_sphere(1.0, 2, 200).unwrap();
        assert!(step(&p, 1e-4, &SpeedLaw::Pushforward).is_err());
    }

    #[test]
    fn sphere_trace_follows_the_exact_radius_law() {
        let p = make_sphere(1.0, 2, 0).unwrap();
        let mut controls = EvolveControls::new(0.02, 0.3);
        controls.events.size_frac = 0.3;
        let trace = evolve(&p, &SpeedLaw::Mcf, &controls).unwrap();
        assert_eq!(trace.terminal.kind, TerminalKind::RoundPoint);
        for rec in trace.scalars.iter().step_by(50) {
            let exact = (1.0 - 4.0 * rec.t).max(0.0).sqrt();
            if exact > 0.3 {
                let r = rec.diameter / 2.0;
                assert!(
                    ((r - exact) / exact).abs() < 5e-3,
                    "t={} r={} exact={}",
                    rec.t,
                    r,
                    exact
                );
            }
        }
    }

    #[test]
    fn area_is_monotone_under_mcf() {
        let p = make_sphere(1.0, 2, 0).unwrap();
        let mut controls = EvolveControls::new(0.03, 0.05);
        controls.events.size_frac = 0.0; // run to the time limit
        let trace = evolve(&p, &SpeedLaw::Mcf, &controls).unwrap();
        let mut prev = f64::INFINITY;
        for rec in &trace.scalars {
            assert!(
                rec.area <= prev * (1.0 + 1e-8),
                "area increased: {} -> {}",
                prev,
                rec.area
            );
            prev = rec.area;
        }
        assert_eq!(trace.terminal.kind, TerminalKind::TimeLimit);
    }

    #[test]
    fn volume_decreases_at_rate_integral_h() {
        // dV/dt = -int H dA; for the unit sphere with n = 2 that is 8 pi
        let p = make_sphere(1.0, 2, 800).unwrap();
        let dt = 1e-5;
        let v0 = p.measures().unwrap().volume;
        let q = step(&p, dt, &SpeedLaw::Mcf).unwrap();
        let v1 = q.measures().unwrap().volume;
        let expect = 8.0 * std::f64::consts::PI * dt;
        assert!(
            ((v0 - v1) - expect).abs() < 1e-3 * expect,
            "dV = {} expected {}",
            v0 - v1,
            expect
        );
    }
}
