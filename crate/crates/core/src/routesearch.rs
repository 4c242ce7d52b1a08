//! Route search over a [`TsrcgGraph`]: best-delivery-time Dijkstra and the
//! Yen-PLUS K-shortest-routes procedure ordered by the EDT key.
//!
//! The EDT key is lexicographic: earliest first-byte arrival (BDT), then
//! fewest contacts, then the latest end of the valid transmission interval
//! (VTI), then the smallest first-hop contact number. Hop ids settle any
//! remaining tie so the order is total.
//!
//! The key is not additive along a route (the VTI end is a minimum over
//! backward-propagated deadlines, and waiting for a contact can erase an
//! arrival-time lead), so every search keeps a Pareto set of labels per
//! contact vertex instead of a single best label. This makes each spur
//! search exact and Yen's deviation argument go through unchanged.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt::Write as _;

use crate::contactplan::{total_transit_time, Contact, ContactId, ContactPlan, NodeId};
use crate::error::{Error, Result};
use crate::tsrcg::{TsrcgGraph, Vertex, ROOT};

/// `ω` from the EDT packing.
pub const DEFAULT_OMEGA: u128 = 999_999_999;

/// Default number of routes per route list.
pub const DEFAULT_K: usize = 7;

/// How per-hop propagation delay is derived from a contact's OWLT.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Timing {
    /// Add the pessimistic OWLT margin on both ends of every hop.
    pub owlt_margin: bool,
}

impl Timing {
    pub fn delay(&self, owlt: f64) -> f64 {
        if self.owlt_margin {
            total_transit_time(owlt).unwrap_or(owlt)
        } else {
            owlt
        }
    }
}

/// Read access to the contact fields route arithmetic needs.
pub trait Hop {
    fn id(&self) -> ContactId;
    fn from(&self) -> NodeId;
    fn to(&self) -> NodeId;
    fn start(&self) -> f64;
    fn end(&self) -> f64;
    fn rate(&self) -> f64;
    fn owlt(&self) -> f64;
    fn residual(&self) -> f64;
}

macro_rules! impl_hop {
    ($t:ty) => {
        impl Hop for $t {
            fn id(&self) -> ContactId {
                self.id
            }
            fn from(&self) -> NodeId {
                self.from
            }
            fn to(&self) -> NodeId {
                self.to
            }
            fn start(&self) -> f64 {
                self.t_start as f64
            }
            fn end(&self) -> f64 {
                self.t_end as f64
            }
            fn rate(&self) -> f64 {
                self.rate
            }
            fn owlt(&self) -> f64 {
                self.owlt
            }
            fn residual(&self) -> f64 {
                self.residual_volume
            }
        }
    };
}
impl_hop!(Contact);
impl_hop!(Vertex);

/// Latest whole-second start allowed by a supremum deadline.
fn last_start(sup: f64) -> f64 {
    sup.ceil() - 1.0
}

/// Timing of a contact sequence for data leaving the source at `depart`.
#[derive(Clone, Debug, PartialEq)]
pub struct RouteTimes {
    /// Earliest departure on each hop.
    pub departs: Vec<f64>,
    /// Supremum of useful departure times on each hop.
    pub deadlines: Vec<f64>,
    pub bdt: f64,
    pub vti: (f64, f64),
    pub volume: f64,
}

impl RouteTimes {
    /// Forward earliest-departure pass plus backward deadline pass.
    /// `None` when some hop cannot be entered before it closes.
    pub fn evaluate<H: Hop>(hops: &[&H], depart: f64, timing: Timing) -> Option<RouteTimes> {
        if hops.is_empty() {
            return None;
        }
        let mut departs = Vec::with_capacity(hops.len());
        let mut arrival = depart;
        for h in hops {
            let d = arrival.max(h.start());
            if d >= h.end() {
                return None;
            }
            departs.push(d);
            arrival = d + timing.delay(h.owlt());
        }
        let mut deadlines = vec![0.0; hops.len()];
        let mut next = f64::INFINITY;
        for (i, h) in hops.iter().enumerate().rev() {
            deadlines[i] = h.end().min(next - timing.delay(h.owlt()));
            next = deadlines[i];
        }
        let volume = hops
            .iter()
            .enumerate()
            .map(|(i, h)| ((deadlines[i] - departs[i]) * h.rate()).min(h.residual()))
            .fold(f64::INFINITY, f64::min);
        Some(RouteTimes {
            bdt: arrival,
            vti: (departs[0], last_start(deadlines[0])),
            departs,
            deadlines,
            volume,
        })
    }
}

/// One element of a route's hop list including the notional contacts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RouteHop {
    Root,
    Contact(ContactId),
    Terminal,
}

/// The comparison key of a route, without the final hop-sequence tie-break.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdtKey {
    pub bdt: f64,
    pub hop_cnt: u32,
    pub vti_end: f64,
    pub first_hop: ContactId,
}

impl EdtKey {
    /// Packs the key into `bdt·ω³ + hop_cnt·ω² + (horizon − vti_end)·ω + first_hop`.
    /// Components are taken at whole-second resolution.
    pub fn scalar(&self, omega: u128, horizon: u64) -> Result<u128> {
        let check = |component: &'static str, value: u128| {
            if value >= omega {
                Err(Error::EdtOverflow {
                    component,
                    value,
                    omega,
                })
            } else {
                Ok(value)
            }
        };
        let bdt = check("bdt", self.bdt.max(0.0).ceil() as u128)?;
        let hops = check("hop_cnt", self.hop_cnt as u128)?;
        let slack = (horizon as f64 - self.vti_end).max(0.0).floor() as u128;
        let slack = check("vti", slack)?;
        let first = check("first_hop", self.first_hop.0 as u128)?;
        Ok(bdt * omega.pow(3) + hops * omega.pow(2) + slack * omega + first)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Route {
    pub hops: Vec<ContactId>,
    /// Plan indices of the hops.
    pub plan_hops: Vec<usize>,
    pub nodes: Vec<NodeId>,
    pub depart: f64,
    pub bdt: f64,
    pub vti: (f64, f64),
    pub volume: f64,
}

impl Route {
    pub fn hop_cnt(&self) -> u32 {
        self.hops.len() as u32
    }

    pub fn first_hop(&self) -> ContactId {
        self.hops[0]
    }

    /// Neighbor the route leaves the source towards.
    pub fn next_node(&self) -> NodeId {
        self.nodes[1]
    }

    pub fn hops_with_notional(&self) -> Vec<RouteHop> {
        let mut out = vec![RouteHop::Root];
        out.extend(self.hops.iter().map(|&h| RouteHop::Contact(h)));
        out.push(RouteHop::Terminal);
        out
    }

    pub fn edt_key(&self) -> EdtKey {
        EdtKey {
            bdt: self.bdt,
            hop_cnt: self.hop_cnt(),
            vti_end: self.vti.1,
            first_hop: self.first_hop(),
        }
    }

    pub fn edt_scalar(&self, omega: u128, horizon: u64) -> Result<u128> {
        self.edt_key().scalar(omega, horizon)
    }

    fn from_vertices(graph: &TsrcgGraph, verts: &[usize], depart: f64, timing: Timing) -> Route {
        let hops: Vec<&Vertex> = verts.iter().map(|&v| graph.vertex(v)).collect();
        let times =
            RouteTimes::evaluate(&hops, depart, timing).expect("search only yields feasible routes");
        let mut nodes = vec![graph.source()];
        nodes.extend(hops.iter().map(|h| h.to));
        Route {
            hops: hops.iter().map(|h| h.id).collect(),
            plan_hops: hops.iter().map(|h| h.plan_index).collect(),
            nodes,
            depart,
            bdt: times.bdt,
            vti: times.vti,
            volume: times.volume,
        }
    }
}

fn cmp_keys(
    (bdt_a, hops_a, vti_a, ids_a): (f64, u32, f64, &[ContactId]),
    (bdt_b, hops_b, vti_b, ids_b): (f64, u32, f64, &[ContactId]),
) -> Ordering {
    bdt_a
        .total_cmp(&bdt_b)
        .then(hops_a.cmp(&hops_b))
        .then(vti_b.total_cmp(&vti_a))
        .then_with(|| ids_a.cmp(ids_b))
}

/// Smallest BDT, then fewest contacts, then latest VTI end, then smallest
/// first-hop number; the remaining hop numbers break any leftover tie.
pub fn compare_routes(a: &Route, b: &Route) -> Ordering {
    cmp_keys(
        (a.bdt, a.hop_cnt(), a.vti.1, &a.hops),
        (b.bdt, b.hop_cnt(), b.vti.1, &b.hops),
    )
}

/// Recomputes the route volume against the plan's current residuals.
pub fn route_volume(route: &Route, plan: &ContactPlan, timing: Timing) -> f64 {
    let hops: Vec<&Contact> = route.plan_hops.iter().map(|&i| plan.contact(i)).collect();
    RouteTimes::evaluate(&hops, route.depart, timing).map_or(0.0, |t| t.volume.max(0.0))
}

#[derive(Clone, Debug)]
struct Label {
    vertex: usize,
    arrival: f64,
    hops: u32,
    deadline: f64,
    cum_delay: f64,
    ids: Vec<ContactId>,
    verts: Vec<usize>,
    alive: bool,
}

impl Label {
    fn root(depart: f64) -> Label {
        Label {
            vertex: ROOT,
            arrival: depart,
            hops: 0,
            deadline: f64::INFINITY,
            cum_delay: 0.0,
            ids: Vec::new(),
            verts: Vec::new(),
            alive: true,
        }
    }

    fn extend(&self, graph: &TsrcgGraph, w: usize, timing: Timing) -> Option<Label> {
        let c = graph.vertex(w);
        let d = self.arrival.max(c.t_start as f64);
        if d >= c.t_end as f64 {
            return None;
        }
        let delay = timing.delay(c.owlt);
        let mut ids = self.ids.clone();
        ids.push(c.id);
        let mut verts = self.verts.clone();
        verts.push(w);
        Some(Label {
            vertex: w,
            arrival: d + delay,
            hops: self.hops + 1,
            deadline: self.deadline.min(c.t_end as f64 - self.cum_delay),
            cum_delay: self.cum_delay + delay,
            ids,
            verts,
            alive: true,
        })
    }

    fn key(&self) -> (f64, u32, f64, &[ContactId]) {
        (self.arrival, self.hops, last_start(self.deadline), &self.ids)
    }

    /// Every completion of `other` is matched or beaten by the same
    /// completion of `self`.
    fn dominates(&self, other: &Label) -> bool {
        self.arrival <= other.arrival
            && self.hops <= other.hops
            && self.deadline >= other.deadline
            && self.cum_delay <= other.cum_delay
            && match (self.ids.first(), other.ids.first()) {
                (Some(a), Some(b)) => a <= b,
                _ => true,
            }
            && (self.hops < other.hops || self.ids <= other.ids)
    }
}

struct Queued {
    arrival: f64,
    hops: u32,
    vti_end: f64,
    ids: Vec<ContactId>,
    idx: usize,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_keys(
            (self.arrival, self.hops, self.vti_end, &self.ids),
            (other.arrival, other.hops, other.vti_end, &other.ids),
        )
        .then(self.idx.cmp(&other.idx))
    }
}

/// Best completion of `start` that avoids `forbidden` nodes and does not
/// leave the start vertex over any contact in `banned_first`.
fn best_completion(
    graph: &TsrcgGraph,
    start: Label,
    forbidden: &[bool],
    banned_first: &BTreeSet<usize>,
    timing: Timing,
) -> Option<Vec<usize>> {
    let start_vertex = start.vertex;
    let mut labels: Vec<Label> = vec![start];
    let mut per_vertex: Vec<Vec<usize>> = vec![Vec::new(); graph.vertices().len()];
    let mut heap = BinaryHeap::new();
    let push = |heap: &mut BinaryHeap<Reverse<Queued>>, l: &Label, idx: usize| {
        let (arrival, hops, vti_end, ids) = l.key();
        heap.push(Reverse(Queued {
            arrival,
            hops,
            vti_end,
            ids: ids.to_vec(),
            idx,
        }));
    };
    push(&mut heap, &labels[0], 0);

    while let Some(Reverse(q)) = heap.pop() {
        if !labels[q.idx].alive {
            continue;
        }
        let u = labels[q.idx].vertex;
        if u != ROOT && u != start_vertex && graph.reaches_terminal(u) {
            return Some(labels[q.idx].verts.clone());
        }
        if u != ROOT && graph.reaches_terminal(u) {
            continue;
        }
        for &w in graph.out_edges(u) {
            if u == start_vertex && banned_first.contains(&w) {
                continue;
            }
            if forbidden[graph.vertex(w).to.0 as usize] {
                continue;
            }
            let Some(next) = labels[q.idx].extend(graph, w, timing) else {
                continue;
            };
            if per_vertex[w]
                .iter()
                .any(|&i| labels[i].alive && labels[i].dominates(&next))
            {
                continue;
            }
            for &i in &per_vertex[w] {
                if labels[i].alive && next.dominates(&labels[i]) {
                    labels[i].alive = false;
                }
            }
            let idx = labels.len();
            per_vertex[w].retain(|&i| labels[i].alive);
            per_vertex[w].push(idx);
            push(&mut heap, &next, idx);
            labels.push(next);
        }
    }
    None
}

/// Route with the best EDT key for data available at the source at `depart`.
pub fn dijkstra_bdt(graph: &TsrcgGraph, depart: f64, timing: Timing) -> Option<Route> {
    let mut forbidden = vec![false; node_span(graph)];
    forbidden[graph.source().0 as usize] = true;
    best_completion(graph, Label::root(depart), &forbidden, &BTreeSet::new(), timing)
        .map(|verts| Route::from_vertices(graph, &verts, depart, timing))
}

fn node_span(graph: &TsrcgGraph) -> usize {
    graph
        .vertices()
        .iter()
        .flat_map(|v| [v.from.0, v.to.0])
        .chain([graph.source().0, graph.dest().0])
        .max()
        .map_or(0, |m| m as usize + 1)
}

struct Candidate {
    times: (f64, u32, f64),
    ids: Vec<ContactId>,
    verts: Vec<usize>,
}

impl Candidate {
    fn new(graph: &TsrcgGraph, verts: Vec<usize>, depart: f64, timing: Timing) -> Candidate {
        let r = Route::from_vertices(graph, &verts, depart, timing);
        Candidate {
            times: (r.bdt, r.hop_cnt(), r.vti.1),
            ids: r.hops,
            verts,
        }
    }

    fn cmp(&self, other: &Candidate) -> Ordering {
        cmp_keys(
            (self.times.0, self.times.1, self.times.2, &self.ids),
            (other.times.0, other.times.1, other.times.2, &other.ids),
        )
    }
}

/// Up to `k` loop-free routes in ascending EDT order.
///
/// Each spur search starts from the exact timing state at the end of the
/// root path, must avoid every node of the root, and may not leave the spur
/// over a contact already used by an accepted route sharing that root. The
/// initialization and each iteration count one computing iteration on the
/// graph.
pub fn yen_plus(graph: &TsrcgGraph, k: usize, depart: f64, timing: Timing) -> Result<Vec<Route>> {
    if k == 0 {
        return Err(Error::ZeroK);
    }
    graph.bump_computing(1);
    let Some(first) = dijkstra_bdt(graph, depart, timing) else {
        return Ok(Vec::new());
    };
    let first_verts: Vec<usize> = first
        .hops
        .iter()
        .map(|&id| graph.vertex_of(id).expect("route hops are graph vertices"))
        .collect();

    let span = node_span(graph);
    let mut accepted: Vec<Vec<usize>> = vec![first_verts];
    let mut potential: Vec<Candidate> = Vec::new();

    while accepted.len() < k {
        graph.bump_computing(1);
        let last = accepted.last().expect("non-empty").clone();
        let mut root = Label::root(depart);
        let mut forbidden = vec![false; span];
        forbidden[graph.source().0 as usize] = true;
        for spur in 0..last.len() {
            if spur > 0 {
                let v = last[spur - 1];
                root = root
                    .extend(graph, v, timing)
                    .expect("prefix of a feasible route is feasible");
                forbidden[graph.vertex(v).to.0 as usize] = true;
            }
            let prefix = &last[..spur];
            let banned: BTreeSet<usize> = accepted
                .iter()
                .filter(|p| p.len() > spur && &p[..spur] == prefix)
                .map(|p| p[spur])
                .collect();
            if let Some(verts) = best_completion(graph, root.clone(), &forbidden, &banned, timing) {
                if accepted.contains(&verts) || potential.iter().any(|c| c.verts == verts) {
                    continue;
                }
                potential.push(Candidate::new(graph, verts, depart, timing));
            }
        }
        let Some(best) = (0..potential.len()).min_by(|&a, &b| potential[a].cmp(&potential[b]))
        else {
            break;
        };
        accepted.push(potential.swap_remove(best).verts);
    }

    Ok(accepted
        .iter()
        .map(|verts| Route::from_vertices(graph, verts, depart, timing))
        .collect())
}

/// `rank,bdt,volume,vti_start,vti_end,hops` with `;`-joined contact ids.
pub fn routes_to_csv(routes: &[Route]) -> String {
    let mut out = String::from("rank,bdt,volume,vti_start,vti_end,hops\n");
    for (i, r) in routes.iter().enumerate() {
        let hops: Vec<String> = r.hops.iter().map(|h| h.to_string()).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            i + 1,
            r.bdt,
            r.volume,
            r.vti.0,
            r.vti.1,
            hops.join(";")
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contactplan::reference_plan;
    use crate::tsrcg::build_tsrcg;

    fn ids(v: &[u32]) -> Vec<ContactId> {
        v.iter().map(|&i| ContactId(i)).collect()
    }

    fn fixture(bdt: f64, hops: &[u32], vti: (f64, f64)) -> Route {
        Route {
            hops: ids(hops),
            plan_hops: vec![0; hops.len()],
            nodes: vec![NodeId(0); hops.len() + 1],
            depart: 0.0,
            bdt,
            vti,
            volume: 1.0,
        }
    }

    #[test]
    fn fastest_reference_route() {
        let g = build_tsrcg(&reference_plan(), "A", "F").unwrap();
        let r = dijkstra_bdt(&g, 0.0, Timing::default()).unwrap();
        // BDT 32 over three contacts; the later A->C window wins the VTI tie.
        assert_eq!(r.bdt, 32.0);
        assert_eq!(r.hop_cnt(), 3);
        assert_eq!(r.hops, ids(&[5, 13, 21]));
        assert_eq!(r.vti, (20.0, 29.0));
        assert_eq!(r.volume, 10.0);
    }

    #[test]
    fn route_one_timing_by_hand() {
        let plan = reference_plan();
        let hops: Vec<&Contact> = [3, 13, 21]
            .iter()
            .map(|&i| plan.by_id(ContactId(i)).unwrap())
            .collect();
        let t = RouteTimes::evaluate(&hops, 0.0, Timing::default()).unwrap();
        // 0 -> C at 1, wait until 30, E at 31, F at 32
        assert_eq!(t.departs, vec![0.0, 30.0, 31.0]);
        assert_eq!(t.bdt, 32.0);
        assert_eq!(t.vti, (0.0, 9.0));
        assert_eq!(t.volume, 10.0);
    }

    #[test]
    fn single_hop_bdt() {
        let mut plan = ContactPlan::new();
        plan.add_contact(None, "S", "D", 0, 60, 1.0, 1.0).unwrap();
        let g = build_tsrcg(&plan, "S", "D").unwrap();
        let r = dijkstra_bdt(&g, 0.0, Timing::default()).unwrap();
        assert_eq!(r.bdt, 1.0);
        assert_eq!(r.volume, 60.0);
        assert_eq!(
            r.hops_with_notional(),
            vec![RouteHop::Root, RouteHop::Contact(ContactId(1)), RouteHop::Terminal]
        );
    }

    #[test]
    fn margin_extends_bdt() {
        let mut plan = ContactPlan::new();
        plan.add_contact(None, "S", "D", 0, 60, 1.0, 18600.0).unwrap();
        let g = build_tsrcg(&plan, "S", "D").unwrap();
        let r = dijkstra_bdt(&g, 0.0, Timing { owlt_margin: true });
        // the window closes long before the signal lands, the route still departs at 0
        assert_eq!(r.unwrap().bdt, 18680.0);
    }

    #[test]
    fn disconnected_is_no_route() {
        let mut plan = ContactPlan::new();
        plan.add_contact(None, "S", "X", 0, 60, 1.0, 1.0).unwrap();
        plan.add_node("D");
        let g = build_tsrcg(&plan, "S", "D").unwrap();
        assert!(dijkstra_bdt(&g, 0.0, Timing::default()).is_none());
        assert!(yen_plus(&g, 3, 0.0, Timing::default()).unwrap().is_empty());
    }

    #[test]
    fn zero_k_rejected() {
        let g = build_tsrcg(&reference_plan(), "A", "F").unwrap();
        assert_eq!(yen_plus(&g, 0, 0.0, Timing::default()), Err(Error::ZeroK));
    }

    #[test]
    fn k_one_is_dijkstra() {
        let g = build_tsrcg(&reference_plan(), "A", "F").unwrap();
        let one = yen_plus(&g, 1, 0.0, Timing::default()).unwrap();
        assert_eq!(one, vec![dijkstra_bdt(&g, 0.0, Timing::default()).unwrap()]);
    }

    #[test]
    fn yen_counts_iterations() {
        let g = build_tsrcg(&reference_plan(), "A", "F").unwrap();
        let routes = yen_plus(&g, 7, 0.0, Timing::default()).unwrap();
        assert_eq!(routes.len(), 7);
        // initialization plus six iterations
        assert_eq!(g.computing(), 7);
    }

    #[test]
    fn comparator_rules() {
        let a = fixture(32.0, &[3, 13, 21], (0.0, 9.0));
        let b = fixture(36.0, &[3, 11, 17], (0.0, 9.0));
        assert_eq!(compare_routes(&a, &b), Ordering::Less);
        let long = fixture(32.0, &[1, 7, 12, 13, 21], (0.0, 33.0));
        assert_eq!(compare_routes(&a, &long), Ordering::Less);
        let late = fixture(32.0, &[1, 7, 12, 13, 21], (0.0, 33.0));
        let early = fixture(32.0, &[1, 9, 12, 13, 21], (0.0, 8.0));
        assert_eq!(compare_routes(&late, &early), Ordering::Less);
        let low_first = fixture(32.0, &[3, 13, 21], (0.0, 9.0));
        let high_first = fixture(32.0, &[4, 13, 21], (0.0, 9.0));
        assert_eq!(compare_routes(&low_first, &high_first), Ordering::Less);
        assert_eq!(compare_routes(&a, &a), Ordering::Equal);
    }

    #[test]
    fn edt_packing() {
        let horizon = 60;
        let zero = EdtKey {
            bdt: 0.0,
            hop_cnt: 0,
            vti_end: horizon as f64,
            first_hop: ContactId(0),
        };
        assert_eq!(zero.scalar(DEFAULT_OMEGA, horizon).unwrap(), 0);
        let small = EdtKey {
            bdt: 3.0,
            hop_cnt: 2,
            vti_end: (horizon - 5) as f64,
            first_hop: ContactId(1),
        };
        assert_eq!(small.scalar(10, horizon).unwrap(), 3251);
        let big = EdtKey {
            bdt: 12.0,
            ..small
        };
        assert!(matches!(
            big.scalar(10, horizon),
            Err(Error::EdtOverflow {
                component: "bdt",
                ..
            })
        ));
        // ω³·bdt does not fit in 64 bits
        let r = fixture(32.0, &[3, 13, 21], (0.0, 9.0));
        assert!(r.edt_scalar(DEFAULT_OMEGA, horizon).unwrap() > u64::MAX as u128);
    }

    #[test]
    fn volume_follows_residuals() {
        let mut plan = reference_plan();
        let g = build_tsrcg(&plan, "A", "F").unwrap();
        let r = dijkstra_bdt(&g, 0.0, Timing::default()).unwrap();
        assert_eq!(route_volume(&r, &plan, Timing::default()), 10.0);
        let idx = plan.index_of(ContactId(13)).unwrap();
        plan.contact_mut(idx).residual_volume = 3.0;
        assert_eq!(route_volume(&r, &plan, Timing::default()), 3.0);
    }

    #[test]
    fn identical_windows_give_duration_times_rate() {
        let mut plan = ContactPlan::new();
        plan.add_contact(None, "S", "X", 0, 20, 2.0, 0.0).unwrap();
        plan.add_contact(None, "X", "D", 0, 20, 2.0, 0.0).unwrap();
        let g = build_tsrcg(&plan, "S", "D").unwrap();
        let r = dijkstra_bdt(&g, 0.0, Timing::default()).unwrap();
        assert_eq!(r.volume, 40.0);
    }

    #[test]
    fn csv_columns() {
        let g = build_tsrcg(&reference_plan(), "A", "F").unwrap();
        let routes = yen_plus(&g, 2, 0.0, Timing::default()).unwrap();
        let csv = routes_to_csv(&routes);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("rank,bdt,volume,vti_start,vti_end,hops"));
        assert_eq!(lines.next(), Some("1,32,10,20,29,5;13;21"));
        assert_eq!(lines.next(), Some("2,32,10,0,9,3;13;21"));
    }
}
