//! Seeded workload generation for the three traffic classes and the task
//! file format.
//!
//! * streaming: 1 Mb every 5 s, priority 2, critical
//! * expedited: up to 3 per 10 s window, 1–5 Mb, priority 1
//! * data: bursts of 20 within 25 s, 1–5 Mb, priority 0

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::contactplan::{ContactPlan, NodeId};
use crate::error::{Error, Result};
use crate::forwarding::Bundle;

pub const STREAMING_PERIOD: u64 = 5;
pub const EXPEDITED_WINDOW: u64 = 10;
pub const EXPEDITED_MAX: u32 = 3;
pub const BURST_SIZE: usize = 20;
pub const BURST_WINDOW: u64 = 25;
/// Share of bundles with priority 1 or 2.
pub const HIGH_SHARE: f64 = 0.25;

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub duration: u64,
    pub source: NodeId,
    pub dest_pool: Vec<NodeId>,
    pub with_critical: bool,
    pub ttl_range: (u64, u64),
    /// Target bundle count; `None` keeps whatever the generators produce,
    /// thinned to the 25/75 split.
    pub total_bundles: Option<usize>,
    /// All streaming bundles share one destination instead of drawing one
    /// per bundle.
    pub streaming_fixed_dest: bool,
    /// Apply the 25/75 split to megabits instead of bundle counts: the
    /// priority-0 class is drawn until it carries three times the megabits
    /// of the higher classes.
    pub split_by_volume: bool,
}

impl ScenarioSpec {
    pub fn new(seed: u64, source: NodeId, dest_pool: Vec<NodeId>) -> ScenarioSpec {
        ScenarioSpec {
            seed,
            duration: 60,
            source,
            dest_pool,
            with_critical: true,
            ttl_range: (20, 30),
            total_bundles: Some(40),
            streaming_fixed_dest: false,
            split_by_volume: false,
        }
    }

    /// Every node of `plan` except `source` as a destination pool.
    pub fn for_plan(seed: u64, plan: &ContactPlan, source: NodeId) -> ScenarioSpec {
        let pool = plan.node_ids().filter(|&n| n != source).collect();
        ScenarioSpec::new(seed, source, pool)
    }

    fn pool(&self) -> Result<Vec<NodeId>> {
        let pool: Vec<NodeId> = self
            .dest_pool
            .iter()
            .copied()
            .filter(|&n| n != self.source)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if pool.is_empty() {
            return Err(Error::Scenario("destination pool is empty".into()));
        }
        if self.ttl_range.0 == 0 || self.ttl_range.0 > self.ttl_range.1 {
            return Err(Error::Scenario(format!(
                "bad ttl range {:?}",
                self.ttl_range
            )));
        }
        Ok(pool)
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

#[derive(Clone, Copy, Debug)]
struct Draft {
    t_gen: u64,
    size: f64,
    priority: u8,
    critical: bool,
}

fn finish(spec: &ScenarioSpec, drafts: Vec<Draft>, stream: u64) -> Result<Vec<Bundle>> {
    let pool = spec.pool()?;
    let mut rng = spec.rng(stream);
    let fixed = pool[rng.gen_range(0..pool.len())];
    let mut drafts = drafts;
    drafts.sort_by_key(|d| (d.t_gen, std::cmp::Reverse(d.priority)));
    Ok(drafts
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            let dest = if d.critical && spec.streaming_fixed_dest {
                fixed
            } else {
                pool[rng.gen_range(0..pool.len())]
            };
            let ttl = rng.gen_range(spec.ttl_range.0..=spec.ttl_range.1);
            Bundle::new(
                i as u64 + 1,
                spec.source,
                dest,
                d.size,
                d.priority,
                d.critical,
                d.t_gen,
                d.t_gen + ttl,
            )
        })
        .collect())
}

fn streaming_drafts(spec: &ScenarioSpec) -> Vec<Draft> {
    (0..spec.duration)
        .step_by(STREAMING_PERIOD as usize)
        .map(|t| Draft {
            t_gen: t,
            size: 1.0,
            priority: 2,
            critical: true,
        })
        .collect()
}

fn expedited_drafts(spec: &ScenarioSpec) -> Vec<Draft> {
    expedited_until(spec, 0)
}

/// Expedited windows over the scenario, continued past its end until at
/// least `min_count` bundles exist.
fn expedited_until(spec: &ScenarioSpec, min_count: usize) -> Vec<Draft> {
    let mut rng = spec.rng(2);
    let mut out = Vec::new();
    let mut start = 0;
    while start < spec.duration || (out.len() < min_count && spec.duration > 0) {
        let end = if start < spec.duration {
            (start + EXPEDITED_WINDOW).min(spec.duration)
        } else {
            start + EXPEDITED_WINDOW
        };
        for _ in 0..rng.gen_range(0..=EXPEDITED_MAX) {
            out.push(Draft {
                t_gen: rng.gen_range(start..end),
                size: rng.gen_range(1..=5) as f64,
                priority: 1,
                critical: false,
            });
        }
        start += EXPEDITED_WINDOW;
    }
    out
}

fn burst(rng: &mut ChaCha8Rng, start: u64) -> Vec<Draft> {
    (0..BURST_SIZE)
        .map(|_| Draft {
            t_gen: start + rng.gen_range(0..BURST_WINDOW),
            size: rng.gen_range(1..=5) as f64,
            priority: 0,
            critical: false,
        })
        .collect()
}

fn data_drafts(spec: &ScenarioSpec, bursts: usize) -> Vec<Draft> {
    if spec.duration == 0 {
        return Vec::new();
    }
    let mut rng = spec.rng(3);
    let latest = spec.duration.saturating_sub(BURST_WINDOW);
    (0..bursts)
        .flat_map(|_| {
            let start = rng.gen_range(0..=latest);
            burst(&mut rng, start)
        })
        .collect()
}

pub fn generate_streaming(spec: &ScenarioSpec) -> Result<Vec<Bundle>> {
    finish(spec, streaming_drafts(spec), 11)
}

pub fn generate_expedited(spec: &ScenarioSpec) -> Result<Vec<Bundle>> {
    finish(spec, expedited_drafts(spec), 12)
}

/// One burst of 20 bundles.
pub fn generate_data(spec: &ScenarioSpec) -> Result<Vec<Bundle>> {
    finish(spec, data_drafts(spec, 1), 13)
}

fn thin(rng: &mut ChaCha8Rng, drafts: Vec<Draft>, keep: usize) -> Vec<Draft> {
    if drafts.len() <= keep {
        return drafts;
    }
    let mut picked = sample(rng, drafts.len(), keep).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| drafts[i]).collect()
}

/// Mixed workload with 25% of bundles at priority 1 or 2 and 75% at
/// priority 0, destinations uniform over the pool, TTL uniform in the range.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Vec<Bundle>> {
    spec.pool()?;
    let wanted = spec
        .total_bundles
        .map_or(0, |n| ((n as f64) * HIGH_SHARE).round() as usize);
    let streaming = if spec.with_critical {
        spec.duration.div_ceil(STREAMING_PERIOD) as usize
    } else {
        0
    };
    let mut high = expedited_until(spec, wanted.saturating_sub(streaming));
    if spec.with_critical {
        high.extend(streaming_drafts(spec));
    }
    let mut rng = spec.rng(4);
    let (high_n, low_n) = match spec.total_bundles {
        Some(n) => {
            let h = ((n as f64) * HIGH_SHARE).round() as usize;
            let h = h.min(high.len());
            // keep the split when the high classes come up short
            let l = if h < ((n as f64) * HIGH_SHARE).round() as usize {
                3 * h
            } else {
                n - h
            };
            (h, l)
        }
        None => {
            let low = BURST_SIZE;
            if (high.len() as f64) > (high.len() + low) as f64 * HIGH_SHARE {
                ((low as f64 / 3.0).round() as usize, low)
            } else {
                (high.len(), 3 * high.len())
            }
        }
    };
    let high = thin(&mut rng, high, high_n);
    let low = if spec.split_by_volume {
        let target = 3.0 * high.iter().map(|d| d.size).sum::<f64>();
        let bursts = ((target / BURST_SIZE as f64).ceil() as usize).max(1);
        let drafts = data_drafts(spec, bursts);
        let mut kept = Vec::new();
        let mut mb = 0.0;
        for i in sample(&mut rng, drafts.len(), drafts.len()) {
            if mb >= target {
                break;
            }
            mb += drafts[i].size;
            kept.push(i);
        }
        kept.sort_unstable();
        kept.into_iter().map(|i| drafts[i]).collect()
    } else {
        let bursts = low_n.div_ceil(BURST_SIZE).max(1);
        thin(&mut rng, data_drafts(spec, bursts), low_n)
    };
    let mut all = high;
    all.extend(low);
    finish(spec, all, 14)
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

/// Parses `bundle_id,source,dest,size_mb,priority,critical,t_gen,t_exp`
/// records. A header line and `#` comments are skipped.
pub fn read_task_file(text: &str, plan: &ContactPlan) -> Result<Vec<Bundle>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with("bundle_id") {
            continue;
        }
        let err = |msg: String| Error::TaskFile { line: line_no, msg };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 8 {
            return Err(err(format!("expected 8 fields, found {}", f.len())));
        }
        let num = |s: &str, what: &str| -> Result<u64> {
            s.parse().map_err(|_| err(format!("bad {what} `{s}`")))
        };
        let id = num(f[0], "bundle id")?;
        let node = |name: &str| {
            plan.node(name).ok_or_else(|| Error::BundleNode {
                bundle: id,
                node: name.to_string(),
            })
        };
        let source = node(f[1])?;
        let dest = node(f[2])?;
        let size: f64 = f[3]
            .parse()
            .map_err(|_| err(format!("bad size `{}`", f[3])))?;
        let priority = num(f[4], "priority")?;
        if priority > 2 {
            return Err(err(format!("priority {priority} out of range")));
        }
        let critical = parse_bool(f[5]).ok_or_else(|| err(format!("bad flag `{}`", f[5])))?;
        let t_gen = num(f[6], "t_gen")?;
        let t_exp = num(f[7], "t_exp")?;
        if t_exp <= t_gen {
            return Err(err(format!("t_exp {t_exp} is not after t_gen {t_gen}")));
        }
        if critical && priority != 2 {
            return Err(err("critical bundles must have priority 2".into()));
        }
        out.push(Bundle::new(
            id,
            source,
            dest,
            size,
            priority as u8,
            critical,
            t_gen,
            t_exp,
        ));
    }
    Ok(out)
}

pub fn write_task_file(bundles: &[Bundle], plan: &ContactPlan) -> String {
    let mut out = String::from("bundle_id,source,dest,size_mb,priority,critical,t_gen,t_exp\n");
    for b in bundles {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            b.id,
            plan.node_name(b.source),
            plan.node_name(b.dest),
            b.size,
            b.priority,
            b.critical as u8,
            b.t_gen,
            b.t_exp
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(seed: u64) -> ScenarioSpec {
        ScenarioSpec::new(seed, NodeId(0), (1..120).map(NodeId).collect())
    }

    #[test]
    fn streaming_counts() {
        let s = spec(1);
        let b = generate_streaming(&s).unwrap();
        assert_eq!(b.len(), 12);
        assert!(b.iter().all(|b| b.priority == 2 && b.critical && b.size == 1.0));
        assert!(generate_streaming(&ScenarioSpec { duration: 0, ..s }).unwrap().is_empty());
    }

    #[test]
    fn expedited_windows() {
        let s = spec(3);
        let b = generate_expedited(&s).unwrap();
        for w in 0..6 {
            let n = b.iter().filter(|b| b.t_gen / 10 == w).count();
            assert!(n <= 3);
        }
        assert!(b.iter().all(|b| (1.0..=5.0).contains(&b.size) && b.priority == 1));
        assert_eq!(b, generate_expedited(&s).unwrap());
        assert!(generate_expedited(&ScenarioSpec { duration: 0, ..s }).unwrap().is_empty());
    }

    #[test]
    fn data_burst() {
        let s = spec(5);
        let b = generate_data(&s).unwrap();
        assert_eq!(b.len(), 20);
        let lo = b.iter().map(|b| b.t_gen).min().unwrap();
        let hi = b.iter().map(|b| b.t_gen).max().unwrap();
        assert!(hi - lo < 25);
        assert!(b.iter().all(|b| b.priority == 0 && !b.critical));
        assert_eq!(b, generate_data(&s).unwrap());
    }

    #[test]
    fn scenario_split() {
        for seed in 1..=20 {
            let b = generate_scenario(&spec(seed)).unwrap();
            assert_eq!(b.len(), 40);
            assert_eq!(b.iter().filter(|b| b.priority > 0).count(), 10);
            assert!(b.iter().all(|b| (20..=30).contains(&(b.t_exp - b.t_gen))));
            assert!(b.iter().all(|b| b.dest != b.source));
            let ids: Vec<u64> = b.iter().map(|b| b.id).collect();
            assert_eq!(ids, (1..=40).collect::<Vec<_>>());
        }
    }

    #[test]
    fn scenario_without_critical() {
        let s = ScenarioSpec {
            with_critical: false,
            ..spec(2)
        };
        let b = generate_scenario(&s).unwrap();
        assert!(b.iter().all(|b| b.priority < 2));
        let high = b.iter().filter(|b| b.priority > 0).count();
        assert!((high as f64 - b.len() as f64 * 0.25).abs() <= 1.0);
    }

    #[test]
    fn empty_pool_rejected() {
        let s = ScenarioSpec {
            dest_pool: vec![NodeId(0)],
            ..spec(1)
        };
        assert!(matches!(generate_scenario(&s), Err(Error::Scenario(_))));
    }

    #[test]
    fn fixed_streaming_destination() {
        let s = ScenarioSpec {
            streaming_fixed_dest: true,
            ..spec(9)
        };
        let b = generate_streaming(&s).unwrap();
        assert!(b.iter().all(|x| x.dest == b[0].dest));
    }

    #[test]
    fn volume_weighted_split() {
        let plan = crate::contactplan::reference_plan();
        let src = plan.node("A").unwrap();
        for seed in 0..20 {
            let mut spec = ScenarioSpec::for_plan(seed, &plan, src);
            spec.split_by_volume = true;
            let b = generate_scenario(&spec).unwrap();
            let high: f64 = b.iter().filter(|x| x.priority > 0).map(|x| x.size).sum();
            let low: f64 = b.iter().filter(|x| x.priority == 0).map(|x| x.size).sum();
            assert!(low >= 3.0 * high && low < 3.0 * high + 5.0, "seed {seed}: {high} vs {low}");
        }
    }

    #[test]
    fn task_file_round_trip() {
        let mut plan = ContactPlan::new();
        let s = plan.add_node("1");
        for n in 2..=5 {
            plan.add_node(&n.to_string());
        }
        let spec = ScenarioSpec::for_plan(4, &plan, s);
        let b = generate_scenario(&spec).unwrap();
        let text = write_task_file(&b, &plan);
        assert_eq!(read_task_file(&text, &plan).unwrap(), b);
    }

    #[test]
    fn task_file_errors() {
        let mut plan = ContactPlan::new();
        plan.add_node("1");
        plan.add_node("2");
        assert!(matches!(
            read_task_file("1,1,9,1,0,0,0,20", &plan),
            Err(Error::BundleNode { bundle: 1, .. })
        ));
        assert!(matches!(
            read_task_file("1,1,2,1,0,0,20,20", &plan),
            Err(Error::TaskFile { line: 1, .. })
        ));
        assert!(matches!(
            read_task_file("\n1,1,2,1,1,1,0,20", &plan),
            Err(Error::TaskFile { line: 2, .. })
        ));
    }
}
