//! Deterministic discrete-event simulation of bundle forwarding over a
//! contact plan.
//!
//! The clock ticks in whole seconds. Transmission ends and arrivals are
//! rounded up to the next second. Within one instant events run in a fixed
//! class order (contact end, transmission complete, arrival, contact start,
//! generation, expiration); afterwards every bundle waiting for a decision
//! is routed in policy order and idle contacts start their queues. The
//! metrics row for second `t` is taken before any event at `t`.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};
use std::fmt::Write as _;

use crate::contactplan::{ContactId, ContactPlan, NodeId};
use crate::error::{Error, Result};
use crate::forwarding::{
    build_candidate, forward_critical, handle_overbooking, rollback, selection_order, Booking,
    Bookings, Bundle, CandidateRoute, Overbooking, Policy, Reason, RollbackDecision, TraceLine,
};
use crate::routesearch::{compare_routes, yen_plus, Route, RouteTimes, Timing, DEFAULT_K};
use crate::tsrcg::{StorageIndex, TsrcgGraph};

/// Where per-hop propagation delay comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OwltMode {
    /// Every contact gets this delay in seconds.
    Uniform(f64),
    /// Use the plan's OWLT values.
    File,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimOptions {
    pub k: usize,
    pub owlt: OwltMode,
    pub timing: Timing,
    pub trace: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            k: DEFAULT_K,
            owlt: OwltMode::Uniform(1.0),
            timing: Timing::default(),
            trace: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub t: u64,
    pub r_o: f64,
    pub computing_cum: u64,
    pub storage_bundles: usize,
    pub mb_to_send: f64,
    pub mb_at_sending: f64,
    pub mb_sent: f64,
    pub delivered: usize,
    pub failed: usize,
    pub generated: usize,
    pub live: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Delivered,
    /// Expired before any copy left the source.
    ExpiredUnrouted,
    /// Expired after leaving the source.
    ExpiredEnRoute,
    /// Never generated within the run.
    Pending,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Delivered => "delivered",
            Outcome::ExpiredUnrouted => "expired_unrouted",
            Outcome::ExpiredEnRoute => "expired_en_route",
            Outcome::Pending => "pending",
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, Outcome::ExpiredUnrouted | Outcome::ExpiredEnRoute)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BundleRecord {
    pub id: u64,
    pub priority: u8,
    pub critical: bool,
    pub t_gen: u64,
    pub t_exp: u64,
    pub t_delivered: Option<u64>,
    pub outcome: Outcome,
}

impl BundleRecord {
    pub fn early_margin(&self) -> Option<i64> {
        self.t_delivered.map(|d| self.t_exp as i64 - d as i64)
    }
}

/// One transmission over one contact.
#[derive(Clone, Debug, PartialEq)]
pub struct TxRecord {
    pub copy: usize,
    pub bundle: u64,
    pub priority: u8,
    pub critical: bool,
    pub contact: ContactId,
    pub from: NodeId,
    pub to: NodeId,
    pub start: u64,
    pub end: u64,
    pub arrive: u64,
    pub size: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationMetrics {
    pub policy: Policy,
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
    pub bundles: Vec<BundleRecord>,
    pub transmissions: Vec<TxRecord>,
    pub trace: Vec<TraceLine>,
    /// Transmission starts that passed over a fitting higher-priority bundle.
    pub priority_violations: u64,
    /// Critical copies dropped on arrival at a node that already had one.
    pub duplicates_discarded: u64,
    pub copies_created: u64,
}

/// Aggregates the comparison reports use.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSummary {
    pub delivery_rate: f64,
    pub delivered: usize,
    pub early_deliveries: usize,
    pub mean_r_o: f64,
    pub computing: u64,
    pub peak_at_sending: f64,
    pub peak_storage_bundles: usize,
}

impl SimulationMetrics {
    pub fn summary(&self) -> RunSummary {
        let n = self.bundles.len();
        let delivered = self
            .bundles
            .iter()
            .filter(|b| b.outcome == Outcome::Delivered)
            .count();
        let early = self
            .bundles
            .iter()
            .filter(|b| b.early_margin().is_some_and(|m| m > 0))
            .count();
        let mean_r_o = if self.rows.is_empty() {
            0.0
        } else {
            self.rows.iter().map(|r| r.r_o).sum::<f64>() / self.rows.len() as f64
        };
        RunSummary {
            delivery_rate: if n == 0 { 0.0 } else { delivered as f64 / n as f64 },
            delivered,
            early_deliveries: early,
            mean_r_o,
            computing: self.rows.last().map_or(0, |r| r.computing_cum),
            peak_at_sending: self.rows.iter().map(|r| r.mb_at_sending).fold(0.0, f64::max),
            peak_storage_bundles: self.rows.iter().map(|r| r.storage_bundles).max().unwrap_or(0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Waiting,
    Live,
    Delivered(u64),
    Failed(Outcome),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CopyState {
    Pending,
    Stored,
    Queued(usize),
    Sending(usize),
    InFlight,
    Gone,
}

#[derive(Clone, Debug)]
struct CopyRec {
    bundle: usize,
    node: NodeId,
    next: NodeId,
    trace: Vec<NodeId>,
    state: CopyState,
    ready: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    ContactEnd(usize),
    TxComplete(usize, usize),
    Arrival(usize),
    ContactStart(usize),
    Generation(usize),
    Expiration(usize),
}

impl Event {
    fn class(&self) -> u8 {
        match self {
            Event::ContactEnd(_) => 0,
            Event::TxComplete(..) => 1,
            Event::Arrival(_) => 2,
            Event::ContactStart(_) => 3,
            Event::Generation(_) => 4,
            Event::Expiration(_) => 5,
        }
    }
}

struct CacheEntry {
    routes: Vec<Route>,
    computed_at: u64,
}

struct Engine<'a> {
    policy: Policy,
    opts: SimOptions,
    plan: ContactPlan,
    bundles: &'a [Bundle],
    status: Vec<Status>,
    left_source: Vec<bool>,
    copies: Vec<CopyRec>,
    copies_of: Vec<Vec<usize>>,
    queues: Vec<Vec<usize>>,
    busy: Vec<Option<(usize, u64)>>,
    nonempty: BTreeSet<usize>,
    bookings: Bookings,
    booking_seq: u64,
    stored: Vec<BTreeSet<usize>>,
    dirty: BTreeSet<NodeId>,
    pending: Vec<usize>,
    ready_seq: u64,
    seen: HashSet<(NodeId, usize)>,
    holders: HashMap<(NodeId, usize), BTreeSet<NodeId>>,
    cache: HashMap<(NodeId, NodeId), CacheEntry>,
    computing: u64,
    events: BinaryHeap<Reverse<(u64, u8, u64, Event)>>,
    event_seq: u64,
    storage: StorageIndex,
    delivered: usize,
    failed: usize,
    generated: usize,
    out: SimulationMetrics,
}

fn ceil_time(t: f64) -> u64 {
    let r = t.round();
    if (t - r).abs() < 1e-9 {
        r as u64
    } else {
        t.ceil() as u64
    }
}

impl<'a> Engine<'a> {
    fn push(&mut self, t: u64, ev: Event) {
        self.event_seq += 1;
        self.events.push(Reverse((t, ev.class(), self.event_seq, ev)));
    }

    fn view(&self, cid: usize) -> Bundle {
        let c = &self.copies[cid];
        Bundle {
            custodian: c.node,
            hop_trace: c.trace.clone(),
            ..self.bundles[c.bundle].clone()
        }
    }

    fn make_pending(&mut self, cid: usize) {
        self.ready_seq += 1;
        let c = &mut self.copies[cid];
        c.state = CopyState::Pending;
        c.ready = self.ready_seq;
        self.pending.push(cid);
    }

    fn store(&mut self, cid: usize) {
        let node = self.copies[cid].node;
        self.copies[cid].state = CopyState::Stored;
        self.stored[node.0 as usize].insert(cid);
    }

    fn new_copy(&mut self, bundle: usize, node: NodeId, trace: Vec<NodeId>) -> usize {
        let cid = self.copies.len();
        self.copies.push(CopyRec {
            bundle,
            node,
            next: node,
            trace,
            state: CopyState::Gone,
            ready: 0,
        });
        self.copies_of[bundle].push(cid);
        self.storage.insert(node, cid as u64);
        self.out.copies_created += 1;
        cid
    }

    fn drop_copy(&mut self, cid: usize) {
        let node = self.copies[cid].node;
        match self.copies[cid].state {
            CopyState::Queued(_) => self.unqueue(cid),
            CopyState::Sending(c) => {
                self.busy[c] = None;
            }
            CopyState::Stored => {
                self.stored[node.0 as usize].remove(&cid);
            }
            _ => {}
        }
        if !matches!(self.copies[cid].state, CopyState::InFlight | CopyState::Gone) {
            self.storage.remove(node, cid as u64);
        }
        self.copies[cid].state = CopyState::Gone;
    }

    fn unqueue(&mut self, cid: usize) {
        if let CopyState::Queued(c) = self.copies[cid].state {
            self.queues[c].retain(|&x| x != cid);
            if self.queues[c].is_empty() {
                self.nonempty.remove(&c);
            }
            let id = self.plan.contact(c).id;
            self.bookings.remove_copy(id, cid as u64);
        }
    }

    /// Megabits the contact can still carry after what is being sent now.
    fn capacity(&self, c: usize, now: u64) -> f64 {
        let ct = self.plan.contact(c);
        let from = now.max(ct.t_start);
        let mut window = ct.t_end.saturating_sub(from) as f64 * ct.rate;
        if let Some((_, end)) = self.busy[c] {
            window -= end.saturating_sub(from) as f64 * ct.rate;
        }
        window.min(ct.residual_volume).max(0.0)
    }

    fn ahead(&self, c: usize, priority: u8, now: u64) -> f64 {
        let rate = self.plan.contact(c).rate;
        let queued: f64 = self.queues[c]
            .iter()
            .map(|&x| &self.bundles[self.copies[x].bundle])
            .filter(|b| b.priority >= priority)
            .map(|b| b.size)
            .sum();
        let sending = self.busy[c].map_or(0.0, |(_, end)| end.saturating_sub(now) as f64 * rate);
        queued + sending
    }

    fn enqueue(&mut self, cid: usize, c: usize, now: u64, reason: Reason) {
        let b = &self.bundles[self.copies[cid].bundle];
        let ct = self.plan.contact(c);
        self.booking_seq += 1;
        self.bookings.add(Booking {
            contact: ct.id,
            bundle: b.id,
            copy: cid as u64,
            megabits: b.size,
            priority: b.priority,
            seq: self.booking_seq,
        });
        if self.opts.trace {
            self.out.trace.push(TraceLine {
                time: now as f64,
                bundle: b.id,
                from: ct.from,
                to: ct.to,
                contact: ct.id,
                policy: self.policy,
                reason,
            });
        }
        let node = self.copies[cid].node;
        self.stored[node.0 as usize].remove(&cid);
        self.copies[cid].state = CopyState::Queued(c);
        self.queues[c].push(cid);
        self.nonempty.insert(c);
    }

    /// Books `cid` on plan contact `c`, evicting lower-priority bookings
    /// when needed.
    fn try_book(&mut self, cid: usize, c: usize, now: u64, reason: Reason) -> bool {
        let b = &self.bundles[self.copies[cid].bundle];
        let ct = self.plan.contact(c).clone();
        let incoming = Booking {
            contact: ct.id,
            bundle: b.id,
            copy: cid as u64,
            megabits: b.size,
            priority: b.priority,
            seq: self.booking_seq + 1,
        };
        let cap = self.capacity(c, now);
        match handle_overbooking(cap, self.bookings.on(ct.id), &incoming) {
            Overbooking::Fits => {}
            Overbooking::Displace(victims) => {
                for v in victims {
                    let v = v as usize;
                    self.unqueue(v);
                    if self.opts.trace {
                        let vb = self.bundles[self.copies[v].bundle].id;
                        self.out.trace.push(TraceLine {
                            time: now as f64,
                            bundle: vb,
                            from: ct.from,
                            to: ct.to,
                            contact: ct.id,
                            policy: self.policy,
                            reason: Reason::OverbookDisplace,
                        });
                    }
                    self.make_pending(v);
                }
            }
            Overbooking::Rejected => return false,
        }
        self.enqueue(cid, c, now, reason);
        true
    }

    fn compute_routes(&mut self, node: NodeId, dest: NodeId, now: u64) {
        let graph = TsrcgGraph::build(&self.plan, node, dest, now);
        let routes = yen_plus(&graph, self.opts.k, now as f64, self.opts.timing).unwrap_or_default();
        self.computing += graph.computing();
        self.cache.insert(
            (node, dest),
            CacheEntry {
                routes,
                computed_at: now,
            },
        );
    }

    /// One candidate-construction iteration per cached route examined.
    fn build_candidates(&mut self, view: &Bundle, now: u64) -> Vec<CandidateRoute> {
        let entry = &self.cache[&(view.custodian, view.dest)];
        self.computing += entry.routes.len() as u64;
        entry
            .routes
            .iter()
            .filter_map(|r| {
                let ahead = self.ahead(r.plan_hops[0], view.priority, now);
                build_candidate(
                    r,
                    &self.plan,
                    view,
                    &ahead,
                    &self.bookings,
                    now as f64,
                    self.opts.timing,
                )
            })
            .collect()
    }

    /// A cached list is kept until none of its routes can still be
    /// entered; the plan itself never changes during a run.
    fn list_expired(&self, key: (NodeId, NodeId), now: u64) -> bool {
        self.cache[&key].routes.iter().all(|r| {
            let hops: Vec<_> = r.plan_hops.iter().map(|&i| self.plan.contact(i)).collect();
            RouteTimes::evaluate(&hops, now as f64, self.opts.timing).is_none()
        })
    }

    fn candidates(&mut self, view: &Bundle, now: u64) -> Vec<CandidateRoute> {
        let key = (view.custodian, view.dest);
        let stale = match self.cache.get(&key) {
            None => true,
            Some(e) => e.computed_at < now && self.list_expired(key, now),
        };
        if stale {
            self.compute_routes(key.0, key.1, now);
        }
        self.build_candidates(view, now)
    }

    fn decide(&mut self, cid: usize, now: u64) {
        let bi = self.copies[cid].bundle;
        if self.status[bi] != Status::Live || self.copies[cid].state != CopyState::Pending {
            return;
        }
        let view = self.view(cid);
        let node = view.custodian;
        let cands = self.candidates(&view, now);
        if view.critical {
            let empty = BTreeSet::new();
            let holders = self.holders.get(&(node, bi)).unwrap_or(&empty);
            let picks: Vec<CandidateRoute> = forward_critical(&cands, holders, self.policy)
                .into_iter()
                .cloned()
                .collect();
            let mut sent = false;
            for cand in picks {
                let target = if sent {
                    let trace = self.copies[cid].trace.clone();
                    self.new_copy(bi, node, trace)
                } else {
                    cid
                };
                if self.try_book(target, cand.route.plan_hops[0], now, Reason::CriticalCopy) {
                    sent = true;
                } else if target != cid {
                    self.drop_copy(target);
                }
            }
            if !sent {
                self.store(cid);
            }
            return;
        }
        let mut admissible: Vec<&CandidateRoute> = cands.iter().filter(|c| c.admissible).collect();
        admissible.sort_by(|a, b| compare_routes(&a.route, &b.route));
        for cand in admissible {
            if self.try_book(cid, cand.route.plan_hops[0], now, Reason::Select) {
                return;
            }
        }
        match rollback(&view, node, &self.plan, now as f64) {
            RollbackDecision::Return { contact, .. }
                if self.bookings.total(self.plan.contact(contact).id) + view.size
                    <= self.capacity(contact, now) =>
            {
                self.enqueue(cid, contact, now, Reason::Rollback);
            }
            _ => self.store(cid),
        }
    }

    fn select_all(&mut self, now: u64) {
        while !self.pending.is_empty() {
            let mut batch = std::mem::take(&mut self.pending);
            batch.retain(|&c| self.copies[c].state == CopyState::Pending);
            batch.sort_by(|&a, &b| {
                let (ca, cb) = (&self.copies[a], &self.copies[b]);
                selection_order(
                    self.policy,
                    (&self.bundles[ca.bundle], ca.ready),
                    (&self.bundles[cb.bundle], cb.ready),
                )
            });
            batch.dedup();
            for cid in batch {
                self.decide(cid, now);
            }
        }
    }

    fn fits(&self, cid: usize, c: usize, now: u64) -> Option<u64> {
        let b = &self.bundles[self.copies[cid].bundle];
        let ct = self.plan.contact(c);
        let end = ceil_time(now as f64 + b.size / ct.rate);
        (end <= ct.t_end && end <= b.t_exp).then_some(end)
    }

    fn start_transmissions(&mut self, now: u64) {
        let ready: Vec<usize> = self.nonempty.iter().copied().collect();
        for c in ready {
            let ct = self.plan.contact(c);
            if self.busy[c].is_some() || ct.t_start > now || ct.t_end <= now {
                continue;
            }
            let mut best: Option<(usize, u64)> = None;
            for &cid in &self.queues[c] {
                let Some(end) = self.fits(cid, c, now) else {
                    continue;
                };
                let p = self.bundles[self.copies[cid].bundle].priority;
                let better = best.map_or(true, |(b, _)| {
                    p > self.bundles[self.copies[b].bundle].priority
                });
                if better {
                    best = Some((cid, end));
                }
            }
            let Some((cid, end)) = best else {
                continue;
            };
            let chosen_p = self.bundles[self.copies[cid].bundle].priority;
            if self.queues[c].iter().any(|&x| {
                self.bundles[self.copies[x].bundle].priority > chosen_p
                    && self.fits(x, c, now).is_some()
            }) {
                self.out.priority_violations += 1;
            }
            self.unqueue(cid);
            let b = &self.bundles[self.copies[cid].bundle];
            let size = b.size;
            let ct = self.plan.contact(c).clone();
            self.plan.contact_mut(c).residual_volume -= size;
            self.busy[c] = Some((cid, end));
            self.copies[cid].state = CopyState::Sending(c);
            self.copies[cid].next = ct.to;
            let b = &self.bundles[self.copies[cid].bundle];
            if ct.from == b.source {
                self.left_source[self.copies[cid].bundle] = true;
            }
            let delay = ceil_time(self.opts.timing.delay(ct.owlt));
            self.out.transmissions.push(TxRecord {
                copy: cid,
                bundle: b.id,
                priority: b.priority,
                critical: b.critical,
                contact: ct.id,
                from: ct.from,
                to: ct.to,
                start: now,
                end,
                arrive: end + delay,
                size,
            });
            self.push(end, Event::TxComplete(c, cid));
        }
    }

    fn handle(&mut self, t: u64, ev: Event) {
        match ev {
            Event::ContactEnd(c) => {
                for cid in self.queues[c].clone() {
                    self.unqueue(cid);
                    self.make_pending(cid);
                }
            }
            Event::TxComplete(c, cid) => {
                if self.copies[cid].state != CopyState::Sending(c) {
                    return;
                }
                self.busy[c] = None;
                let node = self.copies[cid].node;
                let next = self.copies[cid].next;
                let bi = self.copies[cid].bundle;
                self.storage.remove(node, cid as u64);
                self.copies[cid].state = CopyState::InFlight;
                self.holders.entry((node, bi)).or_default().insert(next);
                self.dirty.insert(node);
                let ct = self.plan.contact(c);
                let delay = ceil_time(self.opts.timing.delay(ct.owlt));
                self.push(t + delay, Event::Arrival(cid));
            }
            Event::Arrival(cid) => {
                if self.copies[cid].state != CopyState::InFlight {
                    return;
                }
                let bi = self.copies[cid].bundle;
                let from = self.copies[cid].node;
                let v = self.copies[cid].next;
                let b = &self.bundles[bi];
                if v == b.dest {
                    self.copies[cid].state = CopyState::Gone;
                    if self.status[bi] == Status::Live {
                        self.status[bi] = Status::Delivered(t);
                        self.delivered += 1;
                    }
                    return;
                }
                let critical = b.critical;
                self.holders.entry((v, bi)).or_default().insert(from);
                if critical && self.policy == Policy::RmdgCgr {
                    // a copy still waiting to go where this one came from is redundant
                    for other in self.copies_of[bi].clone() {
                        let o = &self.copies[other];
                        if o.node == v
                            && matches!(o.state, CopyState::Queued(q) if self.plan.contact(q).to == from)
                        {
                            self.drop_copy(other);
                            self.out.duplicates_discarded += 1;
                        }
                    }
                }
                if critical
                    && self.policy == Policy::RmdgCgr
                    && self.seen.contains(&(v, bi))
                {
                    self.copies[cid].state = CopyState::Gone;
                    self.out.duplicates_discarded += 1;
                    return;
                }
                if critical {
                    self.seen.insert((v, bi));
                }
                let c = &mut self.copies[cid];
                c.node = v;
                c.trace.push(v);
                self.storage.insert(v, cid as u64);
                self.make_pending(cid);
            }
            Event::ContactStart(c) => {
                let from = self.plan.contact(c).from;
                self.dirty.insert(from);
            }
            Event::Generation(bi) => {
                self.status[bi] = Status::Live;
                self.generated += 1;
                let b = &self.bundles[bi];
                let (src, id) = (b.source, bi);
                let cid = self.new_copy(id, src, vec![src]);
                if b.critical {
                    self.seen.insert((src, bi));
                }
                self.make_pending(cid);
            }
            Event::Expiration(bi) => {
                if self.status[bi] == Status::Live {
                    let cause = if self.left_source[bi] {
                        Outcome::ExpiredEnRoute
                    } else {
                        Outcome::ExpiredUnrouted
                    };
                    self.status[bi] = Status::Failed(cause);
                    self.failed += 1;
                }
                for cid in self.copies_of[bi].clone() {
                    self.drop_copy(cid);
                }
                self.pending.retain(|&c| self.copies[c].bundle != bi);
            }
        }
    }

    fn retry_dirty(&mut self) {
        for node in std::mem::take(&mut self.dirty) {
            let stored = std::mem::take(&mut self.stored[node.0 as usize]);
            for cid in stored {
                self.make_pending(cid);
            }
        }
    }

    fn sample(&mut self, t: u64) {
        let active: BTreeSet<ContactId> = self
            .busy
            .iter()
            .enumerate()
            .filter(|(_, b)| b.is_some())
            .map(|(c, _)| self.plan.contact(c).id)
            .collect();
        let r_o = self.plan.occupancy_rate(t, &active).unwrap_or(0.0);
        let (mut to_send, mut at_sending, mut sent) = (0.0, 0.0, 0.0);
        for c in &self.copies {
            let size = self.bundles[c.bundle].size;
            match c.state {
                CopyState::Pending | CopyState::Stored => to_send += size,
                CopyState::Queued(_) | CopyState::Sending(_) => at_sending += size,
                CopyState::InFlight => sent += size,
                CopyState::Gone => {}
            }
        }
        let live = self.status.iter().filter(|s| **s == Status::Live).count();
        self.out.rows.push(MetricsRow {
            t,
            r_o,
            computing_cum: self.computing,
            storage_bundles: self.storage.total(),
            mb_to_send: to_send,
            mb_at_sending: at_sending,
            mb_sent: sent,
            delivered: self.delivered,
            failed: self.failed,
            generated: self.generated,
            live,
        });
    }
}

/// Runs `bundles` over `plan` with the given policy and route-list size.
///
/// The engine draws no random numbers; `seed` only labels the run.
pub fn run_simulation(
    plan: &ContactPlan,
    bundles: &[Bundle],
    policy: Policy,
    seed: u64,
    k: usize,
) -> Result<SimulationMetrics> {
    let opts = SimOptions {
        k,
        ..SimOptions::default()
    };
    run_with_options(plan, bundles, policy, seed, &opts)
}

pub fn run_with_options(
    plan: &ContactPlan,
    bundles: &[Bundle],
    policy: Policy,
    seed: u64,
    opts: &SimOptions,
) -> Result<SimulationMetrics> {
    if opts.k == 0 {
        return Err(Error::ZeroK);
    }
    for b in bundles {
        for n in [b.source, b.dest] {
            if n.0 as usize >= plan.node_count() {
                return Err(Error::BundleNode {
                    bundle: b.id,
                    node: format!("#{}", n.0),
                });
            }
        }
        if b.t_gen > plan.horizon() {
            return Err(Error::Scenario(format!(
                "bundle {} generated at {} after the plan horizon {}",
                b.id,
                b.t_gen,
                plan.horizon()
            )));
        }
        if b.t_exp <= b.t_gen {
            return Err(Error::Scenario(format!("bundle {} has no lifetime", b.id)));
        }
    }
    let end = bundles.iter().map(|b| b.t_exp + 1).max().unwrap_or(0);
    let mut work = plan.truncated(end);
    if let OwltMode::Uniform(d) = opts.owlt {
        for i in 0..work.len() {
            work.contact_mut(i).owlt = d;
        }
    }
    let n_contacts = work.len();
    let n_nodes = work.node_count();
    let mut eng = Engine {
        policy,
        opts: *opts,
        plan: work,
        bundles,
        status: vec![Status::Waiting; bundles.len()],
        left_source: vec![false; bundles.len()],
        copies: Vec::new(),
        copies_of: vec![Vec::new(); bundles.len()],
        queues: vec![Vec::new(); n_contacts],
        busy: vec![None; n_contacts],
        nonempty: BTreeSet::new(),
        bookings: Bookings::new(),
        booking_seq: 0,
        stored: vec![BTreeSet::new(); n_nodes],
        dirty: BTreeSet::new(),
        pending: Vec::new(),
        ready_seq: 0,
        seen: HashSet::new(),
        holders: HashMap::new(),
        cache: HashMap::new(),
        computing: 0,
        events: BinaryHeap::new(),
        event_seq: 0,
        storage: StorageIndex::default(),
        delivered: 0,
        failed: 0,
        generated: 0,
        out: SimulationMetrics {
            policy,
            seed,
            rows: Vec::new(),
            bundles: Vec::new(),
            transmissions: Vec::new(),
            trace: Vec::new(),
            priority_violations: 0,
            duplicates_discarded: 0,
            copies_created: 0,
        },
    };
    for c in 0..n_contacts {
        let ct = eng.plan.contact(c);
        let (s, e) = (ct.t_start, ct.t_end);
        eng.push(s, Event::ContactStart(c));
        eng.push(e, Event::ContactEnd(c));
    }
    for (i, b) in bundles.iter().enumerate() {
        eng.push(b.t_gen, Event::Generation(i));
        eng.push(b.t_exp, Event::Expiration(i));
    }

    for t in 0..=end {
        eng.sample(t);
        loop {
            let mut any = false;
            while let Some(Reverse((et, _, _, ev))) = eng.events.peek().copied() {
                if et > t {
                    break;
                }
                eng.events.pop();
                eng.handle(t, ev);
                any = true;
            }
            eng.retry_dirty();
            if !any && eng.pending.is_empty() {
                break;
            }
            eng.select_all(t);
            eng.start_transmissions(t);
            if eng.events.peek().map_or(true, |Reverse((et, ..))| *et > t) {
                break;
            }
        }
    }

    eng.out.bundles = bundles
        .iter()
        .zip(&eng.status)
        .map(|(b, s)| BundleRecord {
            id: b.id,
            priority: b.priority,
            critical: b.critical,
            t_gen: b.t_gen,
            t_exp: b.t_exp,
            t_delivered: match s {
                Status::Delivered(t) => Some(*t),
                _ => None,
            },
            outcome: match s {
                Status::Delivered(_) => Outcome::Delivered,
                Status::Failed(o) => *o,
                Status::Waiting | Status::Live => Outcome::Pending,
            },
        })
        .collect();
    Ok(eng.out)
}

/// `t,r_o,computing_cum,storage_bundles,mb_to_send,mb_at_sending,mb_sent,delivered,failed`
pub fn metrics_to_csv(m: &SimulationMetrics) -> String {
    let mut out = String::from(
        "t,r_o,computing_cum,storage_bundles,mb_to_send,mb_at_sending,mb_sent,delivered,failed\n",
    );
    for r in &m.rows {
        let _ = writeln!(
            out,
            "{},{:.6},{},{},{},{},{},{},{}",
            r.t,
            r.r_o,
            r.computing_cum,
            r.storage_bundles,
            r.mb_to_send,
            r.mb_at_sending,
            r.mb_sent,
            r.delivered,
            r.failed
        );
    }
    out
}

/// `bundle_id,priority,critical,t_gen,t_exp,t_delivered,early_margin,outcome`
pub fn bundles_to_csv(m: &SimulationMetrics) -> String {
    let mut out =
        String::from("bundle_id,priority,critical,t_gen,t_exp,t_delivered,early_margin,outcome\n");
    for b in &m.bundles {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            b.id,
            b.priority,
            b.critical as u8,
            b.t_gen,
            b.t_exp,
            b.t_delivered.map(|t| t.to_string()).unwrap_or_default(),
            b.early_margin().map(|m| m.to_string()).unwrap_or_default(),
            b.outcome.as_str()
        );
    }
    out
}

/// delivered + failed + live = generated at every sample.
pub fn check_conservation(m: &SimulationMetrics) -> std::result::Result<(), String> {
    for r in &m.rows {
        if r.delivered + r.failed + r.live != r.generated {
            return Err(format!(
                "t={}: {} delivered + {} failed + {} live != {} generated",
                r.t, r.delivered, r.failed, r.live, r.generated
            ));
        }
    }
    Ok(())
}

/// Transmissions stay inside their contact windows and their bundles'
/// lifetimes.
pub fn check_causality(
    m: &SimulationMetrics,
    plan: &ContactPlan,
    bundles: &[Bundle],
) -> std::result::Result<(), String> {
    let life: HashMap<u64, (u64, u64)> = bundles.iter().map(|b| (b.id, (b.t_gen, b.t_exp))).collect();
    for tx in &m.transmissions {
        let c = plan
            .by_id(tx.contact)
            .ok_or_else(|| format!("unknown contact {}", tx.contact))?;
        if tx.start < c.t_start || tx.end > c.t_end || tx.start > tx.end {
            return Err(format!(
                "bundle {} sent over contact {} during [{}, {}] outside [{}, {}]",
                tx.bundle, tx.contact, tx.start, tx.end, c.t_start, c.t_end
            ));
        }
        let (g, e) = life[&tx.bundle];
        if tx.start < g || tx.end > e {
            return Err(format!(
                "bundle {} moved during [{}, {}] outside its lifetime [{g}, {e}]",
                tx.bundle, tx.start, tx.end
            ));
        }
    }
    for b in &m.bundles {
        if let Some(d) = b.t_delivered {
            if d < b.t_gen || d > b.t_exp {
                return Err(format!("bundle {} delivered at {d} outside its lifetime", b.id));
            }
        }
    }
    Ok(())
}

/// Megabits sent over each contact stay within duration × rate, and no
/// contact carries two transmissions at once.
pub fn check_volume(m: &SimulationMetrics, plan: &ContactPlan) -> std::result::Result<(), String> {
    let mut per: HashMap<ContactId, Vec<&TxRecord>> = HashMap::new();
    for tx in &m.transmissions {
        per.entry(tx.contact).or_default().push(tx);
    }
    for (id, txs) in per {
        let c = plan.by_id(id).ok_or_else(|| format!("unknown contact {id}"))?;
        let sent: f64 = txs.iter().map(|t| t.size).sum();
        if sent > c.volume() + 1e-9 {
            return Err(format!("contact {id} carried {sent} Mb of {} Mb", c.volume()));
        }
        let mut spans: Vec<(u64, u64)> = txs.iter().map(|t| (t.start, t.end)).collect();
        spans.sort_unstable();
        for w in spans.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(format!("contact {id} overlaps transmissions {:?} and {:?}", w[0], w[1]));
            }
        }
    }
    Ok(())
}

pub fn check_priority(m: &SimulationMetrics) -> std::result::Result<(), String> {
    if m.priority_violations > 0 {
        return Err(format!("{} priority inversions", m.priority_violations));
    }
    Ok(())
}

/// Under RMDG-CGR no node sends a critical bundle to a neighbor it already
/// knows holds it (it sent it there or received it from there), and no node
/// forwards more copies of one bundle than it has distinct neighbors.
pub fn check_critical_dedup(m: &SimulationMetrics) -> std::result::Result<(), String> {
    if m.policy != Policy::RmdgCgr {
        return Ok(());
    }
    // (node, bundle) -> (time learned, neighbor)
    let mut known: HashMap<(NodeId, u64), Vec<(u64, NodeId)>> = HashMap::new();
    let mut txs: Vec<&TxRecord> = m.transmissions.iter().filter(|t| t.critical).collect();
    txs.sort_by_key(|t| (t.start, t.copy));
    let mut sends: HashMap<(NodeId, u64), BTreeSet<NodeId>> = HashMap::new();
    let mut count: HashMap<(NodeId, u64), usize> = HashMap::new();
    for tx in &txs {
        known
            .entry((tx.to, tx.bundle))
            .or_default()
            .push((tx.arrive, tx.from));
    }
    for tx in &txs {
        let learned = known.get(&(tx.from, tx.bundle)).into_iter().flatten();
        for &(at, n) in learned {
            if n == tx.to && at <= tx.start {
                return Err(format!(
                    "bundle {} sent back from {} to {} which it came from",
                    tx.bundle, tx.from.0, tx.to.0
                ));
            }
        }
        let set = sends.entry((tx.from, tx.bundle)).or_default();
        if !set.insert(tx.to) {
            return Err(format!(
                "bundle {} sent twice from {} to {}",
                tx.bundle, tx.from.0, tx.to.0
            ));
        }
        *count.entry((tx.from, tx.bundle)).or_default() += 1;
    }
    for ((node, bundle), n) in count {
        if n > sends[&(node, bundle)].len() {
            return Err(format!("bundle {bundle} replicated {n} times at {}", node.0));
        }
    }
    Ok(())
}

/// Every invariant suite; determinism is checked by re-running.
pub fn check_all(
    m: &SimulationMetrics,
    plan: &ContactPlan,
    bundles: &[Bundle],
) -> std::result::Result<(), String> {
    check_conservation(m)?;
    check_causality(m, plan, bundles)?;
    check_volume(m, plan)?;
    check_priority(m)?;
    check_critical_dedup(m)?;
    let first = m.rows.first().map_or(0.0, |r| r.mb_at_sending);
    let last = m.rows.last().map_or(0.0, |r| r.mb_at_sending);
    if first != 0.0 || last != 0.0 {
        return Err(format!("at_sending starts at {first} and ends at {last}"));
    }
    Ok(())
}
