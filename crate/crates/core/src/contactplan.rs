//! Contact plans: the scheduled transmission opportunities of the network.
//!
//! The text format is a line grammar modeled on ION's `ionrc` contact plans:
//!
//! ```text
//! a contact +<t_start> +<t_end> <from> <to> <rate> [id=<n>] [owlt=<x>]
//! a range   +<t_start> +<t_end> <from> <to> <owlt>
//! a horizon +<seconds>
//! ```
//!
//! `#` starts a comment. A range line applies to every contact on the same
//! ordered node pair whose window it overlaps; when no same-direction range
//! exists the reverse direction is used, since LEO links are symmetric.

use std::collections::{BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use crate::error::{Error, Result};

/// Index of a node inside a [`ContactPlan`]'s node table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

/// User-visible contact number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContactId(pub u32);

impl fmt::Display for ContactId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One directed transmission opportunity.
///
/// Times are whole seconds, `rate` is Mb/s, `owlt` is light-seconds and
/// `residual_volume` is the Mb still unused on the contact.
#[derive(Clone, Debug, PartialEq)]
pub struct Contact {
    pub id: ContactId,
    pub from: NodeId,
    pub to: NodeId,
    pub t_start: u64,
    pub t_end: u64,
    pub rate: f64,
    pub owlt: f64,
    pub residual_volume: f64,
}

impl Contact {
    pub fn duration(&self) -> u64 {
        self.t_end - self.t_start
    }

    /// Total volume of the contact in Mb.
    pub fn volume(&self) -> f64 {
        self.duration() as f64 * self.rate
    }

    /// Closed-interval membership.
    pub fn is_available(&self, t: u64) -> bool {
        self.t_start <= t && t <= self.t_end
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContactPlan {
    contacts: Vec<Contact>,
    horizon: u64,
    nodes: Vec<String>,
    node_index: HashMap<String, NodeId>,
    id_index: HashMap<ContactId, usize>,
}

impl ContactPlan {
    pub fn new() -> Self {
        Self::default()
    }

    /// Interns a node name, returning its id.
    pub fn add_node(&mut self, name: &str) -> NodeId {
        if let Some(id) = self.node_index.get(name) {
            return *id;
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(name.to_string());
        self.node_index.insert(name.to_string(), id);
        id
    }

    pub fn node(&self, name: &str) -> Option<NodeId> {
        self.node_index.get(name).copied()
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.nodes[id.0 as usize]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn set_horizon(&mut self, horizon: u64) {
        self.horizon = horizon;
    }

    pub fn contacts(&self) -> &[Contact] {
        &self.contacts
    }

    pub fn contact(&self, idx: usize) -> &Contact {
        &self.contacts[idx]
    }

    pub fn contact_mut(&mut self, idx: usize) -> &mut Contact {
        &mut self.contacts[idx]
    }

    pub fn index_of(&self, id: ContactId) -> Option<usize> {
        self.id_index.get(&id).copied()
    }

    pub fn by_id(&self, id: ContactId) -> Option<&Contact> {
        self.index_of(id).map(|i| &self.contacts[i])
    }

    pub fn len(&self) -> usize {
        self.contacts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contacts.is_empty()
    }

    fn next_id(&self) -> ContactId {
        ContactId(self.contacts.iter().map(|c| c.id.0).max().unwrap_or(0) + 1)
    }

    /// Appends a contact with full residual volume. A `None` id takes the
    /// next free number. The horizon grows to cover the contact.
    #[allow(clippy::too_many_arguments)]
    pub fn add_contact(
        &mut self,
        id: Option<ContactId>,
        from: &str,
        to: &str,
        t_start: u64,
        t_end: u64,
        rate: f64,
        owlt: f64,
    ) -> Result<ContactId> {
        if t_start > t_end {
            return Err(Error::InvertedInterval {
                line: 0,
                start: t_start,
                end: t_end,
            });
        }
        let id = id.unwrap_or_else(|| self.next_id());
        if self.id_index.contains_key(&id) {
            return Err(Error::DuplicateContact(id.0));
        }
        let from = self.add_node(from);
        let to = self.add_node(to);
        let contact = Contact {
            id,
            from,
            to,
            t_start,
            t_end,
            rate,
            owlt,
            residual_volume: (t_end - t_start) as f64 * rate,
        };
        self.id_index.insert(id, self.contacts.len());
        self.contacts.push(contact);
        self.horizon = self.horizon.max(t_end);
        Ok(id)
    }

    /// Keeps only contacts that open at or before `until`, preserving ids.
    pub fn truncated(&self, until: u64) -> ContactPlan {
        let mut out = ContactPlan {
            nodes: self.nodes.clone(),
            node_index: self.node_index.clone(),
            horizon: self.horizon,
            ..Default::default()
        };
        for c in self.contacts.iter().filter(|c| c.t_start <= until) {
            out.id_index.insert(c.id, out.contacts.len());
            out.contacts.push(c.clone());
        }
        out
    }

    /// Ids of every contact whose closed window contains `t`.
    pub fn available_contacts(&self, t: u64) -> BTreeSet<ContactId> {
        self.contacts
            .iter()
            .filter(|c| c.is_available(t))
            .map(|c| c.id)
            .collect()
    }

    /// Fraction of the contacts available at `t` that carry a bundle in
    /// progress. Zero when nothing is available.
    pub fn occupancy_rate(&self, t: u64, active: &BTreeSet<ContactId>) -> Result<f64> {
        let available = self.available_contacts(t);
        if let Some(bad) = active.iter().find(|id| !available.contains(id)) {
            return Err(Error::UnavailableContact(bad.0, t));
        }
        if available.is_empty() {
            return Ok(0.0);
        }
        Ok(active.len() as f64 / available.len() as f64)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "a horizon +{}", self.horizon);
        for c in &self.contacts {
            let _ = writeln!(
                out,
                "a contact +{} +{} {} {} {} id={} owlt={}",
                c.t_start,
                c.t_end,
                self.node_name(c.from),
                self.node_name(c.to),
                c.rate,
                c.id,
                c.owlt
            );
            let _ = writeln!(
                out,
                "a range +{} +{} {} {} {}",
                c.t_start,
                c.t_end,
                self.node_name(c.from),
                self.node_name(c.to),
                c.owlt
            );
        }
        out
    }
}

/// Extra seconds a signal may need over a path of `distance` light-seconds
/// when both ends recede from each other at the fastest spacecraft speed.
pub fn owlt_margin(distance: f64) -> Result<f64> {
    if distance < 0.0 || distance.is_nan() {
        return Err(Error::NegativeDistance(distance));
    }
    Ok(40.0 * distance / 18600.0)
}

/// Pessimistic one-way transit time: the distance plus twice the margin.
pub fn total_transit_time(distance: f64) -> Result<f64> {
    Ok(distance + 2.0 * owlt_margin(distance)?)
}

struct RangeLine {
    t_start: u64,
    t_end: u64,
    from: String,
    to: String,
    owlt: f64,
}

fn parse_time(tok: &str, line: usize) -> Result<u64> {
    let digits = tok.strip_prefix('+').ok_or_else(|| Error::Parse {
        line,
        msg: format!("time `{tok}` must start with `+`"),
    })?;
    digits.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad time `{tok}`"),
    })
}

fn parse_number(tok: &str, what: &str, line: usize) -> Result<f64> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            line,
            msg: format!("bad {what} `{tok}`"),
        }),
    }
}

fn check_node(tok: &str, line: usize) -> Result<()> {
    if tok.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') && !tok.is_empty() {
        Ok(())
    } else {
        Err(Error::Parse {
            line,
            msg: format!("bad node id `{tok}`"),
        })
    }
}

/// Parses the contact-plan text format.
pub fn parse_contact_plan(text: &str) -> Result<ContactPlan> {
    let mut plan = ContactPlan::new();
    let mut ranges = Vec::new();
    // (contact index, explicit owlt given)
    let mut explicit_owlt = Vec::new();
    let mut horizon_override = None;

    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        if toks[0] != "a" || toks.len() < 2 {
            return Err(Error::Parse {
                line,
                msg: format!("unknown directive `{body}`"),
            });
        }
        match toks[1] {
            "contact" => {
                if toks.len() < 7 {
                    return Err(Error::Parse {
                        line,
                        msg: "contact needs: +start +end from to rate".into(),
                    });
                }
                let t_start = parse_time(toks[2], line)?;
                let t_end = parse_time(toks[3], line)?;
                if t_start > t_end {
                    return Err(Error::InvertedInterval {
                        line,
                        start: t_start,
                        end: t_end,
                    });
                }
                check_node(toks[4], line)?;
                check_node(toks[5], line)?;
                let rate = parse_number(toks[6], "rate", line)?;
                if rate <= 0.0 {
                    return Err(Error::Parse {
                        line,
                        msg: format!("rate must be positive, got {rate}"),
                    });
                }
                let mut id = None;
                let mut owlt = None;
                for extra in &toks[7..] {
                    match extra.split_once('=') {
                        Some(("id", v)) => {
                            id = Some(ContactId(v.parse().map_err(|_| Error::Parse {
                                line,
                                msg: format!("bad contact id `{v}`"),
                            })?))
                        }
                        Some(("owlt", v)) => owlt = Some(parse_number(v, "owlt", line)?),
                        _ => {
                            return Err(Error::Parse {
                                line,
                                msg: format!("unexpected field `{extra}`"),
                            })
                        }
                    }
                }
                if let Some(o) = owlt {
                    if o < 0.0 {
                        return Err(Error::NegativeDistance(o));
                    }
                }
                plan.add_contact(id, toks[4], toks[5], t_start, t_end, rate, owlt.unwrap_or(0.0))
                    .map_err(|e| match e {
                        Error::InvertedInterval { start, end, .. } => {
                            Error::InvertedInterval { line, start, end }
                        }
                        other => other,
                    })?;
                explicit_owlt.push(owlt.is_some());
            }
            "range" => {
                if toks.len() != 7 {
                    return Err(Error::Parse {
                        line,
                        msg: "range needs: +start +end from to owlt".into(),
                    });
                }
                let t_start = parse_time(toks[2], line)?;
                let t_end = parse_time(toks[3], line)?;
                if t_start > t_end {
                    return Err(Error::InvertedInterval {
                        line,
                        start: t_start,
                        end: t_end,
                    });
                }
                check_node(toks[4], line)?;
                check_node(toks[5], line)?;
                let owlt = parse_number(toks[6], "owlt", line)?;
                if owlt < 0.0 {
                    return Err(Error::NegativeDistance(owlt));
                }
                ranges.push(RangeLine {
                    t_start,
                    t_end,
                    from: toks[4].to_string(),
                    to: toks[5].to_string(),
                    owlt,
                });
            }
            "horizon" => {
                if toks.len() != 3 {
                    return Err(Error::Parse {
                        line,
                        msg: "horizon needs: +seconds".into(),
                    });
                }
                horizon_override = Some(parse_time(toks[2], line)?);
            }
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown directive `a {other}`"),
                })
            }
        }
    }

    for idx in 0..plan.contacts.len() {
        if explicit_owlt[idx] {
            continue;
        }
        let (from, to, s, e) = {
            let c = &plan.contacts[idx];
            (
                plan.node_name(c.from).to_string(),
                plan.node_name(c.to).to_string(),
                c.t_start,
                c.t_end,
            )
        };
        let overlaps = |r: &&RangeLine| r.t_start <= e && s <= r.t_end;
        let found = ranges
            .iter()
            .filter(overlaps)
            .find(|r| r.from == from && r.to == to)
            .or_else(|| {
                ranges
                    .iter()
                    .filter(overlaps)
                    .find(|r| r.from == to && r.to == from)
            });
        if let Some(r) = found {
            plan.contacts[idx].owlt = r.owlt;
        }
    }

    if let Some(h) = horizon_override {
        plan.horizon = h;
    }
    Ok(plan)
}

/// The six-node example network used throughout the tests and docs.
///
/// Nodes A..F, rate 1 Mb/s and 1 light-second everywhere, 60 s period.
/// Permanent intra-plane links A-B, C-D, E-F; episodic links A-C, B-D, C-E
/// and D-F. Contact numbers follow the usual odd/even pairing of the two
/// directions of one link.
pub fn reference_plan() -> ContactPlan {
    const LINKS: &[(u32, &str, &str, u64, u64)] = &[
        (1, "A", "B", 0, 60),
        (3, "A", "C", 0, 10),
        (5, "A", "C", 20, 30),
        (7, "B", "D", 0, 35),
        (9, "B", "D", 0, 10),
        (11, "C", "D", 0, 60),
        (13, "C", "E", 30, 40),
        (17, "D", "F", 35, 45),
        (19, "D", "F", 50, 59),
        (21, "E", "F", 0, 60),
    ];
    let mut plan = ContactPlan::new();
    for name in ["A", "B", "C", "D", "E", "F"] {
        plan.add_node(name);
    }
    for &(id, a, b, s, e) in LINKS {
        plan.add_contact(Some(ContactId(id)), a, b, s, e, 1.0, 1.0)
            .expect("reference plan is well formed");
        plan.add_contact(Some(ContactId(id + 1)), b, a, s, e, 1.0, 1.0)
            .expect("reference plan is well formed");
    }
    plan.set_horizon(60);
    plan
}
