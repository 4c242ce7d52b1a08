//! Brute-force route oracle and random plan generation shared by the
//! integration suites.
#![allow(dead_code)]

use std::cmp::Ordering;

use cgrlab::contactplan::{Contact, ContactPlan, NodeId};
use cgrlab::routesearch::{yen_plus, Timing};
use cgrlab::tsrcg::TsrcgGraph;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleRoute {
    pub ids: Vec<u32>,
    pub bdt: f64,
    pub vti_end: f64,
}

fn hop_delay(owlt: f64, margin: bool) -> f64 {
    if margin {
        owlt * (1.0 + 80.0 / 18600.0)
    } else {
        owlt
    }
}

/// Arrival time and latest whole-second first-hop start, or `None` when
/// some contact closes before the data can enter it.
pub fn evaluate(path: &[&Contact], depart: f64, margin: bool) -> Option<(f64, f64)> {
    let mut t = depart;
    for c in path {
        let enter = if t > c.t_start as f64 { t } else { c.t_start as f64 };
        if enter >= c.t_end as f64 {
            return None;
        }
        t = enter + hop_delay(c.owlt, margin);
    }
    // data leaving a hop at x reaches the next node at x + delay
    let mut latest = f64::INFINITY;
    for c in path.iter().rev() {
        latest = (c.t_end as f64).min(latest - hop_delay(c.owlt, margin));
    }
    Some((t, latest.ceil() - 1.0))
}

fn order(a: &OracleRoute, b: &OracleRoute) -> Ordering {
    a.bdt
        .partial_cmp(&b.bdt)
        .unwrap()
        .then(a.ids.len().cmp(&b.ids.len()))
        .then(b.vti_end.partial_cmp(&a.vti_end).unwrap())
        .then_with(|| a.ids.cmp(&b.ids))
}

/// Every loop-free contact sequence from `src` to `dst`, feasible when
/// leaving at `depart`, best first.
pub fn enumerate(plan: &ContactPlan, src: NodeId, dst: NodeId, depart: f64, margin: bool) -> Vec<OracleRoute> {
    fn walk<'a>(
        plan: &'a ContactPlan,
        at: NodeId,
        dst: NodeId,
        visited: &mut Vec<NodeId>,
        path: &mut Vec<&'a Contact>,
        out: &mut Vec<Vec<&'a Contact>>,
    ) {
        if at == dst {
            out.push(path.clone());
            return;
        }
        for c in plan.contacts() {
            if c.from == at && !visited.contains(&c.to) {
                visited.push(c.to);
                path.push(c);
                walk(plan, c.to, dst, visited, path, out);
                path.pop();
                visited.pop();
            }
        }
    }
    let mut paths = Vec::new();
    walk(plan, src, dst, &mut vec![src], &mut Vec::new(), &mut paths);
    let mut routes: Vec<OracleRoute> = paths
        .into_iter()
        .filter_map(|p| {
            let (bdt, vti_end) = evaluate(&p, depart, margin)?;
            Some(OracleRoute {
                ids: p.iter().map(|c| c.id.0).collect(),
                bdt,
                vti_end,
            })
        })
        .collect();
    routes.sort_by(order);
    routes
}

pub struct RandomCase {
    pub plan: ContactPlan,
    pub src: NodeId,
    pub dst: NodeId,
    pub depart: u64,
    pub margin: bool,
}

pub fn random_case(seed: u64) -> RandomCase {
    build_case(seed, false)
}

/// Four nodes, eight long contacts: many parallel routes per case.
pub fn dense_case(seed: u64) -> RandomCase {
    build_case(seed, true)
}

fn build_case(seed: u64, dense: bool) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = if dense { 4 } else { rng.gen_range(3..=5usize) };
    let names: Vec<String> = (0..nodes).map(|i| format!("n{i}")).collect();
    let mut plan = ContactPlan::new();
    for n in &names {
        plan.add_node(n);
    }
    let owlts = [0.0, 0.5, 1.0, 1.25, 2.0, 3.0];
    let count = if dense { 8 } else { rng.gen_range(1..=8) };
    let max_len = if dense { 40 } else { 20 };
    for _ in 0..count {
        let mut pair: Vec<&String> = names.choose_multiple(&mut rng, 2).collect();
        // bias towards edges leaving the source and entering the destination
        if rng.gen_bool(0.25) {
            pair[0] = &names[0];
        }
        if rng.gen_bool(0.25) {
            pair[1] = &names[nodes - 1];
        }
        if pair[0] == pair[1] {
            continue;
        }
        let start = rng.gen_range(0..40u64);
        let end = start + rng.gen_range(1..=max_len);
        let rate = rng.gen_range(1..=5) as f64;
        let owlt = *owlts.choose(&mut rng).unwrap();
        plan.add_contact(None, pair[0], pair[1], start, end, rate, owlt)
            .expect("valid contact");
    }
    RandomCase {
        src: plan.node(&names[0]).unwrap(),
        dst: plan.node(&names[nodes - 1]).unwrap(),
        depart: rng.gen_range(0..10),
        margin: rng.gen_bool(0.3),
        plan,
    }
}

/// Compares `yen_plus` against the oracle for one case and one K; the
/// error names the first mismatch.
pub fn check_case(case: &RandomCase, k: usize) -> Result<(), String> {
    let graph = TsrcgGraph::build(&case.plan, case.src, case.dst, case.depart);
    let timing = Timing {
        owlt_margin: case.margin,
    };
    let got = yen_plus(&graph, k, case.depart as f64, timing).map_err(|e| e.to_string())?;
    let want: Vec<OracleRoute> = enumerate(&case.plan, case.src, case.dst, case.depart as f64, case.margin)
        .into_iter()
        .take(k)
        .collect();
    if got.len() != want.len() {
        return Err(format!("K={k}: {} routes, oracle has {}", got.len(), want.len()));
    }
    for (i, (g, w)) in got.iter().zip(&want).enumerate() {
        let ids: Vec<u32> = g.hops.iter().map(|h| h.0).collect();
        if ids != w.ids || (g.bdt - w.bdt).abs() > 1e-9 || g.vti.1 != w.vti_end {
            return Err(format!(
                "K={k} rank {}: got {:?} bdt {} vti_end {}, oracle {:?} bdt {} vti_end {}",
                i + 1,
                ids,
                g.bdt,
                g.vti.1,
                w.ids,
                w.bdt,
                w.vti_end
            ));
        }
    }
    Ok(())
}
