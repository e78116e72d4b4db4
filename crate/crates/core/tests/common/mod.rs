//! Brute-force oracles shared by the integration tests. Each works from the
//! raw arc list or from first principles, never from the indexed structures
//! the library builds.
#![allow(dead_code)]

use procnet::petrinet::{Arc, Marking, PetriNet};

pub fn inputs_of(net: &PetriNet, t: usize) -> Vec<usize> {
    net.arcs()
        .iter()
        .filter_map(|a| match *a {
            Arc::Input(p, tt) if tt == t => Some(p),
            _ => None,
        })
        .collect()
}

pub fn outputs_of(net: &PetriNet, t: usize) -> Vec<usize> {
    net.arcs()
        .iter()
        .filter_map(|a| match *a {
            Arc::Output(tt, p) if tt == t => Some(p),
            _ => None,
        })
        .collect()
}

pub fn enabled_oracle(net: &PetriNet, m: &Marking) -> Vec<usize> {
    (0..net.num_transitions())
        .filter(|&t| inputs_of(net, t).iter().all(|&p| m.tokens[p] > 0))
        .collect()
}

pub fn fire_oracle(net: &PetriNet, m: &Marking, t: usize) -> Marking {
    let mut tokens: Vec<i64> = m.tokens.iter().map(|&x| i64::from(x)).collect();
    for p in inputs_of(net, t) {
        tokens[p] -= 1;
    }
    for p in outputs_of(net, t) {
        tokens[p] += 1;
    }
    assert!(tokens.iter().all(|&x| x >= 0));
    Marking {
        tokens: tokens.into_iter().map(|x| x as u32).collect(),
    }
}

/// First silent sequence, in (length, lexicographic) order, after which
/// `target` is enabled. Enumerates every sequence without deduplication.
pub fn closure_oracle(net: &PetriNet, m: &Marking, target: usize, depth: usize) -> Option<Vec<usize>> {
    let silent: Vec<usize> = (0..net.num_transitions())
        .filter(|&t| net.transitions()[t].label.is_none())
        .collect();
    let enabled = |m: &Marking, t: usize| inputs_of(net, t).iter().all(|&p| m.tokens[p] > 0);
    let mut frontier: Vec<(Vec<usize>, Marking)> = vec![(Vec::new(), m.clone())];
    for _ in 0..=depth {
        for (seq, mk) in &frontier {
            if enabled(mk, target) {
                return Some(seq.clone());
            }
        }
        let mut next = Vec::new();
        for (seq, mk) in &frontier {
            for &t in &silent {
                if enabled(mk, t) {
                    let mut s = seq.clone();
                    s.push(t);
                    next.push((s, fire_oracle(net, mk, t)));
                }
            }
        }
        frontier = next;
    }
    None
}

/// Place-graph edges by scanning every (place, transition, place) triple.
pub fn place_edges_oracle(net: &PetriNet) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for p in 0..net.num_places() {
        for q in 0..net.num_places() {
            let linked = (0..net.num_transitions()).any(|t| {
                net.arcs().contains(&Arc::Input(p, t)) && net.arcs().contains(&Arc::Output(t, q))
            });
            if linked {
                edges.push((p, q));
            }
        }
    }
    edges
}

/// Relative error with the denominator floored at 1e-5: smaller gradients
/// sit below what a 64-bit central difference resolves.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-5)
}

pub mod gradcheck;
