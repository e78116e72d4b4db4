//! Token replay of activity sequences.
//!
//! Each event fires one observable transition carrying its label. Before the
//! firing, the shortest sequence of silent transitions that enables it is
//! fired first (breadth-first, lowest transition index wins at every depth).
//! When no silent sequence helps, one token is injected into each empty
//! input place of the transition; injected tokens are never taken back.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{Marking, PetriNet};
use crate::error::{Error, Result};
use crate::eventlog::Vocabulary;

/// What to do with an event whose activity has no transition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnmappedPolicy {
    /// Record a step that fires nothing and leaves the marking unchanged.
    #[default]
    Skip,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplayOptions {
    pub unmapped: UnmappedPolicy,
    /// Silent search depth; `None` means twice the transition count.
    pub max_silent_depth: Option<usize>,
    /// Cap on markings visited by one silent search.
    pub max_search_states: usize,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        Self {
            unmapped: UnmappedPolicy::Skip,
            max_silent_depth: None,
            max_search_states: 20_000,
        }
    }
}

/// Observable transitions per activity index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelIndex {
    candidates: Vec<Vec<usize>>,
    labels: Vec<Option<String>>,
}

impl LabelIndex {
    /// Matches transition labels to `vocab` by exact string.
    pub fn new(net: &PetriNet, vocab: &Vocabulary) -> Self {
        let mut candidates = vec![Vec::new(); vocab.index_space()];
        for (t, tr) in net.transitions().iter().enumerate() {
            if let Some(idx) = tr.label.as_deref().and_then(|l| vocab.get(l)) {
                candidates[idx as usize].push(t);
            }
        }
        let labels = (0..vocab.index_space() as u32)
            .map(|i| vocab.label(i).map(str::to_owned))
            .collect();
        LabelIndex { candidates, labels }
    }

    pub fn transitions(&self, activity: u32) -> &[usize] {
        self.candidates
            .get(activity as usize)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    fn label(&self, activity: u32) -> String {
        self.labels
            .get(activity as usize)
            .cloned()
            .flatten()
            .unwrap_or_else(|| format!("#{activity}"))
    }
}

/// Result of replaying one event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayStep {
    pub activity: u32,
    /// Observable transition fired, or `None` when the event was skipped.
    pub fired: Option<usize>,
    /// Silent transitions fired before it, in order.
    pub silent: Vec<usize>,
    /// Places that received an injected token.
    pub repairs: Vec<usize>,
    pub marking: Marking,
}

/// Shortest silent firing sequence after which `target` is enabled.
///
/// Breadth-first over markings reachable through silent transitions,
/// expanding lower transition indices first, so among shortest sequences
/// the lexicographically least is returned. `None` when no sequence of at
/// most `max_depth` firings works or the state cap is hit.
pub fn silent_closure(
    net: &PetriNet,
    marking: &Marking,
    target: usize,
    max_depth: usize,
    max_states: usize,
) -> Option<Vec<usize>> {
    if net.is_enabled(marking, target) {
        return Some(Vec::new());
    }
    let silent: Vec<usize> = (0..net.num_transitions())
        .filter(|&t| net.transitions()[t].is_silent())
        .collect();
    if silent.is_empty() {
        return None;
    }
    // parent links: (marking, parent slot, transition fired to get here)
    let mut nodes: Vec<(Marking, usize, usize)> = vec![(marking.clone(), usize::MAX, usize::MAX)];
    let mut depth = vec![0usize];
    let mut seen: HashSet<Marking> = HashSet::new();
    seen.insert(marking.clone());
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        if depth[i] >= max_depth {
            continue;
        }
        for &t in &silent {
            if !net.is_enabled(&nodes[i].0, t) {
                continue;
            }
            let next = net.fire(&nodes[i].0, t).expect("enabled");
            if !seen.insert(next.clone()) {
                continue;
            }
            let hit = net.is_enabled(&next, target);
            nodes.push((next, i, t));
            depth.push(depth[i] + 1);
            let j = nodes.len() - 1;
            if hit {
                let mut path = Vec::new();
                let mut k = j;
                while nodes[k].1 != usize::MAX {
                    path.push(nodes[k].2);
                    k = nodes[k].1;
                }
                path.reverse();
                return Some(path);
            }
            if nodes.len() >= max_states {
                return None;
            }
            queue.push_back(j);
        }
    }
    None
}

/// Replays one event from `marking`.
pub fn repair_and_fire(
    net: &PetriNet,
    labels: &LabelIndex,
    marking: &Marking,
    activity: u32,
    opts: &ReplayOptions,
) -> Result<ReplayStep> {
    let candidates = labels.transitions(activity);
    if candidates.is_empty() {
        return match opts.unmapped {
            UnmappedPolicy::Skip => Ok(ReplayStep {
                activity,
                fired: None,
                silent: Vec::new(),
                repairs: Vec::new(),
                marking: marking.clone(),
            }),
            UnmappedPolicy::Error => Err(Error::UnmappedActivity {
                label: labels.label(activity),
            }),
        };
    }
    let depth = opts
        .max_silent_depth
        .unwrap_or(2 * net.num_transitions());
    let mut best: Option<(usize, Vec<usize>)> = None;
    for &t in candidates {
        if let Some(seq) = silent_closure(net, marking, t, depth, opts.max_search_states) {
            if best.as_ref().is_none_or(|(_, b)| seq.len() < b.len()) {
                best = Some((t, seq));
            }
            if best.as_ref().is_some_and(|(_, b)| b.is_empty()) {
                break;
            }
        }
    }
    let (target, silent, mut current) = match best {
        Some((t, seq)) => {
            let mut m = marking.clone();
            for &s in &seq {
                m = net.fire(&m, s)?;
            }
            (t, seq, m)
        }
        None => {
            let missing = |t: usize| net.preset(t).iter().filter(|&&p| !marking.marked(p)).count();
            let t = *candidates
                .iter()
                .min_by_key(|&&t| (missing(t), t))
                .expect("non-empty candidates");
            (t, Vec::new(), marking.clone())
        }
    };
    let repairs: Vec<usize> = net
        .preset(target)
        .iter()
        .copied()
        .filter(|&p| !current.marked(p))
        .collect();
    for &p in &repairs {
        current.tokens[p] += 1;
    }
    let marking = net.fire(&current, target)?;
    Ok(ReplayStep {
        activity,
        fired: Some(target),
        silent,
        repairs,
        marking,
    })
}

/// Replays `activities` from the initial marking, one step per activity.
pub fn replay_prefix(
    net: &PetriNet,
    labels: &LabelIndex,
    activities: &[u32],
    opts: &ReplayOptions,
) -> Result<Vec<ReplayStep>> {
    let mut marking = net.initial_marking();
    let mut steps = Vec::with_capacity(activities.len());
    for &a in activities {
        let step = repair_and_fire(net, labels, &marking, a, opts)?;
        marking = step.marking.clone();
        steps.push(step);
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::petrinet::NetBuilder;

    fn vocab(labels: &[&str]) -> Vocabulary {
        Vocabulary::fit(labels.iter().copied())
    }

    #[test]
    fn enabled_target_needs_no_silent_steps() {
        let mut b = NetBuilder::new();
        let p = b.places(2);
        let a = b.transition(Some("a"), &[p[0]], &[p[1]]);
        let net = b.build().unwrap();
        assert_eq!(silent_closure(&net, &net.initial_marking(), a, 4, 100), Some(vec![]));
    }

    #[test]
    fn one_silent_hop() {
        let mut b = NetBuilder::new();
        let p = b.places(3);
        let tau = b.transition(None, &[p[0]], &[p[1]]);
        let a = b.transition(Some("a"), &[p[1]], &[p[2]]);
        let net = b.build().unwrap();
        assert_eq!(silent_closure(&net, &net.initial_marking(), a, 4, 100), Some(vec![tau]));
    }

    #[test]
    fn diamond_picks_lowest_route() {
        let mut b = NetBuilder::new();
        let p = b.places(4);
        let t_hi = b.transition(None, &[p[0]], &[p[2]]);
        let t_lo = b.transition(None, &[p[0]], &[p[1]]);
        let u1 = b.transition(None, &[p[1]], &[p[3]]);
        let u2 = b.transition(None, &[p[2]], &[p[3]]);
        let a = b.transition(Some("a"), &[p[3]], &[]);
        let net = b.build().unwrap();
        let seq = silent_closure(&net, &net.initial_marking(), a, 8, 100).unwrap();
        // both routes have length 2; t_hi (index 0) sorts first
        assert_eq!(seq, vec![t_hi, u2]);
        let _ = (t_lo, u1);
    }

    #[test]
    fn unreachable_within_depth() {
        let mut b = NetBuilder::new();
        let p = b.places(4);
        b.transition(None, &[p[0]], &[p[1]]);
        b.transition(None, &[p[1]], &[p[2]]);
        let a = b.transition(Some("a"), &[p[2]], &[p[3]]);
        let net = b.build().unwrap();
        assert_eq!(silent_closure(&net, &net.initial_marking(), a, 1, 100), None);
        assert_eq!(silent_closure(&net, &net.initial_marking(), a, 2, 100).map(|s| s.len()), Some(2));
    }

    #[test]
    fn misaligned_event_gets_one_repair_token() {
        let mut b = NetBuilder::new();
        let p = b.places(3);
        b.transition(Some("a"), &[p[0]], &[p[1]]);
        let tb = b.transition(Some("b"), &[p[1]], &[p[2]]);
        let net = b.build().unwrap();
        let v = vocab(&["a", "b"]);
        let idx = LabelIndex::new(&net, &v);
        let m0 = net.initial_marking();
        let step = repair_and_fire(&net, &idx, &m0, v.get("b").unwrap(), &ReplayOptions::default()).unwrap();
        assert_eq!(step.fired, Some(tb));
        assert_eq!(step.repairs, vec![p[1]]);
        // fire semantics relative to the repaired marking
        let mut repaired = m0.clone();
        repaired.tokens[p[1]] += 1;
        assert_eq!(step.marking, net.fire(&repaired, tb).unwrap());
        assert_eq!(step.marking.tokens, vec![1, 0, 1]);
    }

    #[test]
    fn unmapped_activity_policies() {
        let mut b = NetBuilder::new();
        let p = b.places(2);
        b.transition(Some("a"), &[p[0]], &[p[1]]);
        let net = b.build().unwrap();
        let v = vocab(&["a", "zz"]);
        let idx = LabelIndex::new(&net, &v);
        let m0 = net.initial_marking();
        let zz = v.get("zz").unwrap();
        let skip = repair_and_fire(&net, &idx, &m0, zz, &ReplayOptions::default()).unwrap();
        assert_eq!(skip.fired, None);
        assert_eq!(skip.marking, m0);
        let strict = ReplayOptions {
            unmapped: UnmappedPolicy::Error,
            ..ReplayOptions::default()
        };
        let err = repair_and_fire(&net, &idx, &m0, zz, &strict).unwrap_err();
        assert!(err.to_string().contains("zz"));
    }

    #[test]
    fn duplicate_labels_prefer_shortest_closure() {
        let mut b = NetBuilder::new();
        let p = b.places(4);
        b.transition(None, &[p[0]], &[p[1]]);
        b.transition(Some("y"), &[p[0]], &[p[2]]);
        let far = b.transition(Some("x"), &[p[2]], &[p[3]]);
        let near = b.transition(Some("x"), &[p[1]], &[p[3]]);
        let net = b.build().unwrap();
        let v = vocab(&["x", "y"]);
        let idx = LabelIndex::new(&net, &v);
        let x = v.get("x").unwrap();
        let step = repair_and_fire(&net, &idx, &net.initial_marking(), x, &ReplayOptions::default()).unwrap();
        assert_eq!(step.fired, Some(near));
        assert!(step.repairs.is_empty());
        let _ = far;
    }

    #[test]
    fn empty_prefix_replays_to_nothing() {
        let mut b = NetBuilder::new();
        b.places(1);
        let net = b.build().unwrap();
        let idx = LabelIndex::new(&net, &Vocabulary::new());
        assert!(replay_prefix(&net, &idx, &[], &ReplayOptions::default()).unwrap().is_empty());
    }
}
