//! Walker-delta constellation on circular orbits and contact-plan
//! generation for its inter-satellite links.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::contactplan::ContactPlan;
use crate::error::{Error, Result};

/// km
pub const EARTH_RADIUS: f64 = 6371.0;
/// m³/s²
pub const MU: f64 = 3.986004418e14;
/// km/s
pub const LIGHT_SPEED: f64 = 299_792.458;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WalkerParams {
    pub sats_per_plane: u32,
    pub planes: u32,
    pub phase_factor: u32,
    /// km
    pub altitude: f64,
    /// degrees
    pub inclination: f64,
}

impl WalkerParams {
    /// 12*10/10/1:1200:55
    pub fn nels() -> WalkerParams {
        WalkerParams {
            sats_per_plane: 12,
            planes: 10,
            phase_factor: 1,
            altitude: 1200.0,
            inclination: 55.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sats_per_plane == 0 || self.planes == 0 {
            return Err(Error::Constraints("plane and satellite counts must be positive".into()));
        }
        if self.phase_factor >= self.planes {
            return Err(Error::Constraints(format!(
                "phase factor {} must be below the plane count {}",
                self.phase_factor, self.planes
            )));
        }
        if !(self.altitude > 0.0) {
            return Err(Error::Constraints("altitude must be positive".into()));
        }
        Ok(())
    }

    pub fn sat_count(&self) -> usize {
        (self.sats_per_plane * self.planes) as usize
    }

    /// Orbit radius in km.
    pub fn semi_major_axis(&self) -> f64 {
        EARTH_RADIUS + self.altitude
    }

    pub fn plane_of(&self, sat: usize) -> u32 {
        sat as u32 / self.sats_per_plane
    }

    pub fn index(&self, plane: u32, slot: u32) -> usize {
        ((plane % self.planes) * self.sats_per_plane + slot % self.sats_per_plane) as usize
    }
}

/// Orbital period in seconds.
pub fn period(params: &WalkerParams) -> f64 {
    let a = params.semi_major_axis() * 1e3;
    2.0 * PI * (a.powi(3) / MU).sqrt()
}

/// Inertial positions in km, indexed plane-major.
pub fn propagate(params: &WalkerParams, t: f64) -> Vec<[f64; 3]> {
    let a = params.semi_major_axis();
    let n = 2.0 * PI / period(params);
    let inc = params.inclination.to_radians();
    let total = params.sat_count() as f64;
    let mut out = Vec::with_capacity(params.sat_count());
    for p in 0..params.planes {
        let raan = 2.0 * PI * p as f64 / params.planes as f64;
        for s in 0..params.sats_per_plane {
            let u = 2.0 * PI * s as f64 / params.sats_per_plane as f64
                + 2.0 * PI * (p * params.phase_factor) as f64 / total
                + n * t;
            let (su, cu) = u.sin_cos();
            let (so, co) = raan.sin_cos();
            out.push([
                a * (co * cu - so * su * inc.cos()),
                a * (so * cu + co * su * inc.cos()),
                a * su * inc.sin(),
            ]);
        }
    }
    out
}

pub fn pairwise_distance(positions: &[[f64; 3]], i: usize, j: usize) -> f64 {
    let (a, b) = (positions[i], positions[j]);
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IslConstraints {
    pub intraorbit_permanent: bool,
    /// km; 0 disables interorbit links.
    pub max_interorbit_km: f64,
    pub terminals_per_sat: u32,
    /// Mb/s on every link.
    pub rate: f64,
}

impl IslConstraints {
    pub fn nels() -> IslConstraints {
        IslConstraints {
            intraorbit_permanent: true,
            max_interorbit_km: 4909.0,
            terminals_per_sat: 4,
            rate: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.terminals_per_sat < 2 {
            return Err(Error::Constraints(format!(
                "{} terminals cannot hold the two intraorbit links",
                self.terminals_per_sat
            )));
        }
        if self.max_interorbit_km < 0.0 || !self.max_interorbit_km.is_finite() {
            return Err(Error::Constraints("interorbit distance must be non-negative".into()));
        }
        if !(self.rate > 0.0) {
            return Err(Error::Constraints("link rate must be positive".into()));
        }
        Ok(())
    }

    /// Interorbit links each satellite opens towards the next plane. The
    /// same number arrive from the previous plane.
    fn eastward_links(&self) -> usize {
        (self.terminals_per_sat as usize - 2) / 2
    }
}

/// Name of satellite `idx` in generated plans (1-based).
pub fn sat_name(idx: usize) -> String {
    (idx + 1).to_string()
}

struct OpenLink {
    west: usize,
    east: usize,
    start: u64,
    last: u64,
    max_dist: f64,
}

/// Interorbit link windows `(west, east, start, end, max_distance)` found by
/// sampling every `step` seconds.
pub fn interorbit_windows(
    params: &WalkerParams,
    constraints: &IslConstraints,
    horizon: u64,
    step: u64,
) -> Vec<(usize, usize, u64, u64, f64)> {
    let per_sat = constraints.eastward_links();
    if per_sat == 0 || constraints.max_interorbit_km <= 0.0 || params.planes < 2 {
        return Vec::new();
    }
    let n = params.sat_count();
    let limit = constraints.max_interorbit_km;
    let mut open: Vec<OpenLink> = Vec::new();
    let mut done = Vec::new();
    let mut t = 0;
    loop {
        let pos = propagate(params, t as f64);
        // keep links still in range
        let mut still = Vec::with_capacity(open.len());
        for mut l in open.drain(..) {
            let d = pairwise_distance(&pos, l.west, l.east);
            if d <= limit {
                l.last = t;
                l.max_dist = l.max_dist.max(d);
                still.push(l);
            } else {
                done.push(l);
            }
        }
        open = still;
        let mut east_used = vec![0usize; n];
        let mut west_used = vec![0usize; n];
        for l in &open {
            east_used[l.west] += 1;
            west_used[l.east] += 1;
        }
        for s in 0..n {
            if east_used[s] >= per_sat {
                continue;
            }
            let next_plane = params.plane_of(s) + 1;
            let mut options: Vec<(f64, usize)> = (0..params.sats_per_plane)
                .map(|k| params.index(next_plane, k))
                .filter(|&q| west_used[q] < per_sat)
                .filter(|&q| !open.iter().any(|l| l.west == s && l.east == q))
                .map(|q| (pairwise_distance(&pos, s, q), q))
                .filter(|&(d, _)| d <= limit)
                .collect();
            options.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for (d, q) in options {
                if east_used[s] >= per_sat {
                    break;
                }
                east_used[s] += 1;
                west_used[q] += 1;
                open.push(OpenLink {
                    west: s,
                    east: q,
                    start: t,
                    last: t,
                    max_dist: d,
                });
            }
        }
        if t >= horizon {
            break;
        }
        t = (t + step).min(horizon);
    }
    done.extend(open);
    let mut out: Vec<_> = done
        .into_iter()
        .filter(|l| l.last > l.start)
        .map(|l| (l.west, l.east, l.start, l.last, l.max_dist))
        .collect();
    out.sort_by_key(|w| (w.2, w.0, w.1));
    out
}

/// Contact plan over `[0, horizon]`: permanent links to both in-plane
/// neighbors plus sampled interorbit windows, each in both directions.
pub fn generate_contact_plan(
    params: &WalkerParams,
    constraints: &IslConstraints,
    horizon: u64,
    step: u64,
) -> Result<ContactPlan> {
    params.validate()?;
    constraints.validate()?;
    if step == 0 {
        return Err(Error::Constraints("sampling step must be at least 1 s".into()));
    }
    let mut plan = ContactPlan::new();
    for s in 0..params.sat_count() {
        plan.add_node(&sat_name(s));
    }
    let rate = constraints.rate;
    let add = |plan: &mut ContactPlan, a: usize, b: usize, start: u64, end: u64, d: f64| {
        let owlt = d / LIGHT_SPEED;
        plan.add_contact(None, &sat_name(a), &sat_name(b), start, end, rate, owlt)?;
        plan.add_contact(None, &sat_name(b), &sat_name(a), start, end, rate, owlt)
            .map(|_| ())
    };
    if constraints.intraorbit_permanent && params.sats_per_plane > 1 {
        let pos = propagate(params, 0.0);
        for p in 0..params.planes {
            for k in 0..params.sats_per_plane {
                let a = params.index(p, k);
                let b = params.index(p, k + 1);
                if params.sats_per_plane == 2 && k == 1 {
                    break;
                }
                add(&mut plan, a, b, 0, horizon, pairwise_distance(&pos, a, b))?;
            }
        }
    }
    for (a, b, start, end, d) in interorbit_windows(params, constraints, horizon, step) {
        add(&mut plan, a, b, start, end, d)?;
    }
    plan.set_horizon(horizon);
    Ok(plan)
}

/// `t,sat_id,x,y,z` rows for every sample in `[0, horizon]`.
pub fn positions_csv(params: &WalkerParams, horizon: u64, step: u64) -> String {
    let mut out = String::from("t,sat_id,x,y,z\n");
    let mut t = 0;
    loop {
        for (i, p) in propagate(params, t as f64).iter().enumerate() {
            let _ = writeln!(out, "{t},{},{:.3},{:.3},{:.3}", sat_name(i), p[0], p[1], p[2]);
        }
        if t >= horizon || step == 0 {
            break;
        }
        t = (t + step).min(horizon);
    }
    out
}
