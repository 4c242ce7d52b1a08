//! Per-node forwarding decisions: candidate construction (basic checks, ETO,
//! PAT, EVL), route selection, critical-bundle replication, overbooking and
//! rollback.
//!
//! Everything here is a pure function of explicit state. The simulator owns
//! the queues and bookings and applies the decisions.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::contactplan::{ContactId, ContactPlan, NodeId};
use crate::error::{Error, Result};
use crate::routesearch::{compare_routes, Route, RouteTimes, Timing};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Policy {
    StandardCgr,
    RmdgCgr,
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::StandardCgr => "standard",
            Policy::RmdgCgr => "rmdg",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "standard" => Ok(Policy::StandardCgr),
            "rmdg" => Ok(Policy::RmdgCgr),
            other => Err(format!("unknown policy `{other}` (expected standard or rmdg)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bundle {
    pub id: u64,
    pub source: NodeId,
    pub dest: NodeId,
    /// Megabits.
    pub size: f64,
    pub priority: u8,
    pub critical: bool,
    pub t_gen: u64,
    pub t_exp: u64,
    pub custodian: NodeId,
    pub hop_trace: Vec<NodeId>,
}

impl Bundle {
    pub fn new(
        id: u64,
        source: NodeId,
        dest: NodeId,
        size: f64,
        priority: u8,
        critical: bool,
        t_gen: u64,
        t_exp: u64,
    ) -> Bundle {
        Bundle {
            id,
            source,
            dest,
            size,
            priority,
            critical,
            t_gen,
            t_exp,
            custodian: source,
            hop_trace: vec![source],
        }
    }

    /// Node this bundle came from before first reaching `at`.
    pub fn upstream_of(&self, at: NodeId) -> Option<NodeId> {
        let pos = self.hop_trace.iter().position(|&n| n == at)?;
        pos.checked_sub(1).map(|p| self.hop_trace[p])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Booking {
    pub contact: ContactId,
    pub bundle: u64,
    /// Simulator copy handle; displacement is reported per copy.
    pub copy: u64,
    pub megabits: f64,
    pub priority: u8,
    /// Booking order, used to evict the latest booking first.
    pub seq: u64,
}

/// Outstanding bookings, grouped by contact.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bookings {
    by_contact: BTreeMap<ContactId, Vec<Booking>>,
}

impl Bookings {
    pub fn new() -> Bookings {
        Bookings::default()
    }

    pub fn on(&self, contact: ContactId) -> &[Booking] {
        self.by_contact.get(&contact).map_or(&[], |v| v.as_slice())
    }

    pub fn add(&mut self, booking: Booking) {
        self.by_contact.entry(booking.contact).or_default().push(booking);
    }

    pub fn remove_copy(&mut self, contact: ContactId, copy: u64) -> Option<Booking> {
        let list = self.by_contact.get_mut(&contact)?;
        let pos = list.iter().position(|b| b.copy == copy)?;
        Some(list.remove(pos))
    }

    /// Megabits booked on `contact` by bundles of at least `priority`.
    pub fn booked_at_least(&self, contact: ContactId, priority: u8) -> f64 {
        self.on(contact)
            .iter()
            .filter(|b| b.priority >= priority)
            .map(|b| b.megabits)
            .sum()
    }

    pub fn total(&self, contact: ContactId) -> f64 {
        self.on(contact).iter().map(|b| b.megabits).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Booking> {
        self.by_contact.values().flatten()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateRoute {
    /// The route re-evaluated for departure at decision time.
    pub route: Route,
    pub eto: f64,
    pub pat: f64,
    pub evl: f64,
    pub admissible: bool,
}

/// Queued traffic ahead of a new bundle on one outbound contact.
pub trait QueueState {
    /// Megabits that will be sent before a newly queued bundle of `priority`.
    fn megabits_ahead(&self, priority: u8) -> f64;
}

impl QueueState for f64 {
    fn megabits_ahead(&self, _priority: u8) -> f64 {
        *self
    }
}

/// Route usable at all: first hop still open, next node not yet visited,
/// first byte on time.
pub fn basic_checks(route: &Route, plan: &ContactPlan, bundle: &Bundle, now: f64) -> bool {
    if now > bundle.t_exp as f64 || route.hops.is_empty() {
        return false;
    }
    let first = plan.contact(route.plan_hops[0]);
    (first.t_end as f64) > now
        && !bundle.hop_trace.contains(&route.next_node())
        && route.bdt <= bundle.t_exp as f64
}

pub fn compute_eto<Q: QueueState>(
    route: &Route,
    plan: &ContactPlan,
    queue: &Q,
    priority: u8,
    now: f64,
) -> f64 {
    let first = plan.contact(route.plan_hops[0]);
    now.max(first.t_start as f64) + queue.megabits_ahead(priority) / first.rate
}

/// Last-byte arrival at the destination for a bundle entering the first hop
/// at `eto`. Every hop must be entered before it closes.
pub fn compute_pat(
    route: &Route,
    plan: &ContactPlan,
    eto: f64,
    size: f64,
    timing: Timing,
) -> Result<f64> {
    let mut arrival = eto;
    for (i, &idx) in route.plan_hops.iter().enumerate() {
        let c = plan.contact(idx);
        let depart = if i == 0 {
            eto.max(c.t_start as f64)
        } else {
            arrival.max(c.t_start as f64)
        };
        if depart > c.t_end as f64 || (i > 0 && depart >= c.t_end as f64) {
            return Err(Error::InfeasibleRoute {
                eto: depart,
                end: c.t_end,
            });
        }
        arrival = depart + size / c.rate + timing.delay(c.owlt);
    }
    Ok(arrival)
}

/// Smallest per-hop capacity left for a bundle of `priority` once bookings
/// of equal or higher priority are honored.
pub fn compute_evl(
    route: &Route,
    plan: &ContactPlan,
    bookings: &Bookings,
    priority: u8,
    now: f64,
    timing: Timing,
) -> f64 {
    let hops: Vec<_> = route.plan_hops.iter().map(|&i| plan.contact(i)).collect();
    let Some(times) = RouteTimes::evaluate(&hops, now.max(route.depart), timing) else {
        return 0.0;
    };
    hops.iter()
        .enumerate()
        .map(|(i, c)| {
            let window = (times.deadlines[i] - times.departs[i]) * c.rate;
            window.min(c.residual_volume) - bookings.booked_at_least(c.id, priority)
        })
        .fold(f64::INFINITY, f64::min)
        .max(0.0)
}

/// Builds the candidate for `route` at `now`, or `None` when it fails the
/// basic checks.
pub fn build_candidate<Q: QueueState>(
    route: &Route,
    plan: &ContactPlan,
    bundle: &Bundle,
    queue: &Q,
    bookings: &Bookings,
    now: f64,
    timing: Timing,
) -> Option<CandidateRoute> {
    let hops: Vec<_> = route.plan_hops.iter().map(|&i| plan.contact(i)).collect();
    let times = RouteTimes::evaluate(&hops, now, timing)?;
    let current = Route {
        depart: now,
        bdt: times.bdt,
        vti: times.vti,
        volume: times.volume,
        ..route.clone()
    };
    if !basic_checks(&current, plan, bundle, now) {
        return None;
    }
    let eto = compute_eto(&current, plan, queue, bundle.priority, now);
    let pat = compute_pat(&current, plan, eto, bundle.size, timing).unwrap_or(f64::INFINITY);
    let evl = compute_evl(&current, plan, bookings, bundle.priority, now, timing);
    Some(CandidateRoute {
        admissible: pat <= bundle.t_exp as f64 && evl >= bundle.size,
        route: current,
        eto,
        pat,
        evl,
    })
}

/// Order in which pending bundles get their routes under each policy.
/// Standard keeps the order bundles became ready (`arrival_seq`).
pub fn selection_order(policy: Policy, a: (&Bundle, u64), b: (&Bundle, u64)) -> Ordering {
    match policy {
        Policy::StandardCgr => a.1.cmp(&b.1),
        Policy::RmdgCgr => b
            .0
            .priority
            .cmp(&a.0.priority)
            .then(a.0.t_exp.cmp(&b.0.t_exp))
            .then(a.0.id.cmp(&b.0.id))
            .then(a.1.cmp(&b.1)),
    }
}

pub fn select_route<'a>(
    candidates: &'a [CandidateRoute],
    _bundle: &Bundle,
) -> Option<&'a CandidateRoute> {
    candidates
        .iter()
        .filter(|c| c.admissible)
        .min_by(|a, b| compare_routes(&a.route, &b.route))
}

/// Next-hop dispatches for a critical bundle.
///
/// Standard CGR sends a copy towards every distinct neighbor that some
/// admissible candidate starts with. RMDG-CGR sends one copy along the best
/// admissible route whose neighbor is not already known to hold the bundle.
pub fn forward_critical<'a>(
    candidates: &'a [CandidateRoute],
    holders: &BTreeSet<NodeId>,
    policy: Policy,
) -> Vec<&'a CandidateRoute> {
    let mut admissible: Vec<&CandidateRoute> = candidates.iter().filter(|c| c.admissible).collect();
    admissible.sort_by(|a, b| compare_routes(&a.route, &b.route));
    match policy {
        Policy::StandardCgr => {
            let mut seen = BTreeSet::new();
            admissible
                .into_iter()
                .filter(|c| seen.insert(c.route.next_node()))
                .collect()
        }
        Policy::RmdgCgr => admissible
            .into_iter()
            .find(|c| !holders.contains(&c.route.next_node()))
            .into_iter()
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Overbooking {
    Fits,
    /// The incoming booking fits once these copies are evicted.
    Displace(Vec<u64>),
    Rejected,
}

/// Resolves a booking that may exceed `capacity` megabits on a contact.
/// Lower-priority bookings are evicted, lowest priority and latest booked
/// first; if that cannot make room the incoming booking is rejected.
pub fn handle_overbooking(capacity: f64, bookings: &[Booking], incoming: &Booking) -> Overbooking {
    let used: f64 = bookings.iter().map(|b| b.megabits).sum();
    if used + incoming.megabits <= capacity {
        return Overbooking::Fits;
    }
    let mut victims: Vec<&Booking> = bookings
        .iter()
        .filter(|b| b.priority < incoming.priority)
        .collect();
    victims.sort_by(|a, b| a.priority.cmp(&b.priority).then(b.seq.cmp(&a.seq)));
    let mut freed = 0.0;
    let mut out = Vec::new();
    for v in victims {
        if used - freed + incoming.megabits <= capacity {
            break;
        }
        freed += v.megabits;
        out.push(v.copy);
    }
    if used - freed + incoming.megabits <= capacity {
        Overbooking::Displace(out)
    } else {
        Overbooking::Rejected
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RollbackDecision {
    /// Send back to `to` over the plan contact at `contact`.
    Return { to: NodeId, contact: usize },
    Store,
}

/// Where a bundle stuck at `at` goes: back to the node it came from when a
/// contact towards it is open now, otherwise it stays in storage.
pub fn rollback(bundle: &Bundle, at: NodeId, plan: &ContactPlan, now: f64) -> RollbackDecision {
    let Some(up) = bundle.upstream_of(at) else {
        return RollbackDecision::Store;
    };
    plan.contacts()
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            c.from == at
                && c.to == up
                && c.t_start as f64 <= now
                && (c.t_end as f64) > now + bundle.size / c.rate
                && c.residual_volume >= bundle.size
        })
        .min_by_key(|(_, c)| (c.t_start, c.id))
        .map_or(RollbackDecision::Store, |(i, _)| RollbackDecision::Return {
            to: up,
            contact: i,
        })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reason {
    Select,
    CriticalCopy,
    OverbookDisplace,
    Rollback,
}

impl Reason {
    pub fn as_str(&self) -> &'static str {
        match self {
            Reason::Select => "select",
            Reason::CriticalCopy => "critical_copy",
            Reason::OverbookDisplace => "overbook_displace",
            Reason::Rollback => "rollback",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceLine {
    pub time: f64,
    pub bundle: u64,
    pub from: NodeId,
    pub to: NodeId,
    pub contact: ContactId,
    pub policy: Policy,
    pub reason: Reason,
}

/// `time,bundle_id,from,to,contact_id,policy,reason`
pub fn trace_to_csv(lines: &[TraceLine], plan: &ContactPlan) -> String {
    let mut out = String::from("time,bundle_id,from,to,contact_id,policy,reason\n");
    for l in lines {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            l.time,
            l.bundle,
            plan.node_name(l.from),
            plan.node_name(l.to),
            l.contact,
            l.policy,
            l.reason.as_str()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contactplan::reference_plan;
    use crate::routesearch::{dijkstra_bdt, yen_plus};
    use crate::tsrcg::build_tsrcg;

    fn one_hop() -> (ContactPlan, Route) {
        let mut plan = ContactPlan::new();
        plan.add_contact(None, "S", "D", 0, 60, 1.0, 1.0).unwrap();
        let g = build_tsrcg(&plan, "S", "D").unwrap();
        let r = dijkstra_bdt(&g, 0.0, Timing::default()).unwrap();
        (plan, r)
    }

    fn bundle(plan: &ContactPlan, size: f64, priority: u8, t_exp: u64) -> Bundle {
        let s = plan.node("S").or_else(|| plan.node("A")).unwrap();
        let d = plan.node("D").or_else(|| plan.node("F")).unwrap();
        Bundle::new(1, s, d, size, priority, priority == 2, 0, t_exp)
    }

    fn fig_route_one(plan: &ContactPlan) -> Route {
        let g = build_tsrcg(plan, "A", "F").unwrap();
        yen_plus(&g, 7, 0.0, Timing::default())
            .unwrap()
            .into_iter()
            .find(|r| r.hops.iter().map(|h| h.0).eq([3, 13, 21]))
            .unwrap()
    }

    fn fake(next: NodeId, bdt: f64, first: u32, admissible: bool) -> CandidateRoute {
        CandidateRoute {
            route: Route {
                hops: vec![ContactId(first)],
                plan_hops: vec![0],
                nodes: vec![NodeId(0), next],
                depart: 0.0,
                bdt,
                vti: (0.0, 9.0),
                volume: 10.0,
            },
            eto: 0.0,
            pat: bdt,
            evl: 10.0,
            admissible,
        }
    }

    #[test]
    fn basic_checks_cases() {
        let plan = reference_plan();
        let r = fig_route_one(&plan);
        assert!(!basic_checks(&r, &plan, &bundle(&plan, 1.0, 0, 30), 0.0));
        assert!(basic_checks(&r, &plan, &bundle(&plan, 1.0, 0, 40), 0.0));
        assert!(!basic_checks(&r, &plan, &bundle(&plan, 1.0, 0, 40), 41.0));
        let mut looped = bundle(&plan, 1.0, 0, 40);
        looped.hop_trace.push(r.next_node());
        assert!(!basic_checks(&r, &plan, &looped, 0.0));
    }

    #[test]
    fn eto_cases() {
        let (plan, r) = one_hop();
        assert_eq!(compute_eto(&r, &plan, &0.0, 0, 0.0), 0.0);
        assert_eq!(compute_eto(&r, &plan, &5.0, 0, 3.0), 8.0);
        let mut late = ContactPlan::new();
        late.add_contact(None, "S", "D", 20, 60, 1.0, 1.0).unwrap();
        let g = build_tsrcg(&late, "S", "D").unwrap();
        let r = dijkstra_bdt(&g, 0.0, Timing::default()).unwrap();
        assert_eq!(compute_eto(&r, &late, &0.0, 0, 0.0), 20.0);
    }

    #[test]
    fn pat_cases() {
        let (plan, r) = one_hop();
        let t = Timing::default();
        assert_eq!(compute_pat(&r, &plan, 0.0, 1.0, t).unwrap(), 2.0);
        assert_eq!(compute_pat(&r, &plan, 0.0, 0.0, t).unwrap(), r.bdt);
        assert!(matches!(
            compute_pat(&r, &plan, 61.0, 1.0, t),
            Err(Error::InfeasibleRoute { .. })
        ));
        let fig = reference_plan();
        let r1 = fig_route_one(&fig);
        // A->C done at 2, C->E waits for 30 and lands at 32, E->F lands at 34
        assert_eq!(compute_pat(&r1, &fig, 0.0, 1.0, t).unwrap(), 34.0);
        assert_eq!(compute_pat(&r1, &fig, 0.0, 0.0, t).unwrap(), 32.0);
    }

    #[test]
    fn evl_cases() {
        let t = Timing::default();
        let mut plan = ContactPlan::new();
        plan.add_contact(None, "S", "D", 0, 10, 1.0, 1.0).unwrap();
        let g = build_tsrcg(&plan, "S", "D").unwrap();
        let r = dijkstra_bdt(&g, 0.0, t).unwrap();
        let mut b = Bookings::new();
        assert_eq!(compute_evl(&r, &plan, &b, 0, 0.0, t), r.volume);
        let booking = |copy, mb, priority| Booking {
            contact: ContactId(1),
            bundle: copy,
            copy,
            megabits: mb,
            priority,
            seq: copy,
        };
        b.add(booking(1, 4.0, 2));
        b.add(booking(2, 3.0, 0));
        assert_eq!(compute_evl(&r, &plan, &b, 1, 0.0, t), 6.0);
        b.add(booking(3, 20.0, 2));
        assert_eq!(compute_evl(&r, &plan, &b, 1, 0.0, t), 0.0);
    }

    #[test]
    fn selection_cases() {
        let b = Bundle::new(1, NodeId(0), NodeId(9), 1.0, 0, false, 0, 40);
        let one = [fake(NodeId(1), 32.0, 1, true)];
        assert_eq!(select_route(&one, &b), Some(&one[0]));
        let two = [fake(NodeId(1), 36.0, 1, true), fake(NodeId(2), 32.0, 2, true)];
        assert_eq!(select_route(&two, &b).unwrap().route.bdt, 32.0);
        let none = [fake(NodeId(1), 32.0, 1, false)];
        assert_eq!(select_route(&none, &b), None);
    }

    #[test]
    fn selection_order_by_policy() {
        let low = Bundle::new(1, NodeId(0), NodeId(9), 1.0, 0, false, 0, 20);
        let high = Bundle::new(2, NodeId(0), NodeId(9), 1.0, 2, true, 0, 30);
        assert_eq!(
            selection_order(Policy::StandardCgr, (&low, 0), (&high, 1)),
            Ordering::Less
        );
        assert_eq!(
            selection_order(Policy::RmdgCgr, (&low, 0), (&high, 1)),
            Ordering::Greater
        );
    }

    #[test]
    fn critical_dispatch() {
        let none = BTreeSet::new();
        let single = [fake(NodeId(1), 32.0, 1, true)];
        assert_eq!(forward_critical(&single, &none, Policy::StandardCgr).len(), 1);
        assert_eq!(forward_critical(&single, &none, Policy::RmdgCgr).len(), 1);
        let three = [
            fake(NodeId(1), 32.0, 1, true),
            fake(NodeId(2), 33.0, 2, true),
            fake(NodeId(3), 34.0, 3, true),
        ];
        assert_eq!(forward_critical(&three, &none, Policy::StandardCgr).len(), 3);
        let two_neighbors = [
            fake(NodeId(1), 32.0, 1, true),
            fake(NodeId(1), 33.0, 2, true),
            fake(NodeId(2), 34.0, 3, true),
        ];
        let holders = BTreeSet::from([NodeId(1)]);
        let out = forward_critical(&two_neighbors, &holders, Policy::RmdgCgr);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].route.next_node(), NodeId(2));
    }

    #[test]
    fn overbooking_cases() {
        let booked = |copy, priority, seq| Booking {
            contact: ContactId(1),
            bundle: copy,
            copy,
            megabits: 5.0,
            priority,
            seq,
        };
        let full_low = [booked(1, 0, 1), booked(2, 0, 2)];
        let incoming = Booking {
            priority: 2,
            ..booked(9, 2, 3)
        };
        assert_eq!(
            handle_overbooking(10.0, &full_low, &incoming),
            Overbooking::Displace(vec![2])
        );
        let full_high = [booked(1, 1, 1), booked(2, 1, 2)];
        let weak = booked(9, 0, 3);
        assert_eq!(handle_overbooking(10.0, &full_high, &weak), Overbooking::Rejected);
        assert_eq!(handle_overbooking(20.0, &full_high, &weak), Overbooking::Fits);
    }

    #[test]
    fn rollback_cases() {
        let mut plan = ContactPlan::new();
        plan.add_contact(None, "S", "X", 0, 60, 1.0, 1.0).unwrap();
        plan.add_contact(None, "X", "S", 0, 60, 1.0, 1.0).unwrap();
        plan.add_contact(None, "X", "S", 0, 5, 1.0, 1.0).unwrap();
        let s = plan.node("S").unwrap();
        let x = plan.node("X").unwrap();
        let mut b = Bundle::new(1, s, NodeId(7), 1.0, 0, false, 0, 40);
        assert_eq!(rollback(&b, s, &plan, 1.0), RollbackDecision::Store);
        b.hop_trace.push(x);
        assert_eq!(
            rollback(&b, x, &plan, 10.0),
            RollbackDecision::Return { to: s, contact: 1 }
        );
        let mut short = ContactPlan::new();
        short.add_contact(None, "S", "X", 0, 60, 1.0, 1.0).unwrap();
        short.add_contact(None, "X", "S", 0, 5, 1.0, 1.0).unwrap();
        assert_eq!(rollback(&b, x, &short, 10.0), RollbackDecision::Store);
    }

    #[test]
    fn policy_names_round_trip() {
        for p in [Policy::StandardCgr, Policy::RmdgCgr] {
            assert_eq!(p.name().parse::<Policy>(), Ok(p));
        }
        assert!("flood".parse::<Policy>().is_err());
    }
}
