//! Place/transition nets with single-token arcs.
//!
//! Places and transitions live in separate index spaces. A transition is
//! enabled when every input place holds a token; firing it removes one token
//! from each input place and adds one to each output place. Silent
//! transitions carry no activity label and only route control flow.

mod pnml;
mod replay;

pub use pnml::{is_silent_label, parse_pnml};
pub use replay::{
    repair_and_fire, replay_prefix, silent_closure, LabelIndex, ReplayOptions, ReplayStep,
    UnmappedPolicy,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Place {
    pub id: String,
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub id: String,
    /// Activity label; `None` for a silent transition.
    pub label: Option<String>,
}

impl Transition {
    pub fn is_silent(&self) -> bool {
        self.label.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arc {
    /// Place index to transition index.
    Input(usize, usize),
    /// Transition index to place index.
    Output(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "NetData", into = "NetData")]
pub struct PetriNet {
    places: Vec<Place>,
    transitions: Vec<Transition>,
    arcs: Vec<Arc>,
    /// Input places per transition, ascending.
    preset: Vec<Vec<usize>>,
    /// Output places per transition, ascending.
    postset: Vec<Vec<usize>>,
    /// Input transitions per place, ascending.
    place_preset: Vec<Vec<usize>>,
    place_postset: Vec<Vec<usize>>,
    start: usize,
    end: usize,
}

#[derive(Serialize, Deserialize)]
struct NetData {
    places: Vec<Place>,
    transitions: Vec<Transition>,
    arcs: Vec<Arc>,
}

impl TryFrom<NetData> for PetriNet {
    type Error = Error;

    fn try_from(d: NetData) -> Result<Self> {
        PetriNet::new(d.places, d.transitions, d.arcs)
    }
}

impl From<PetriNet> for NetData {
    fn from(n: PetriNet) -> Self {
        NetData {
            places: n.places,
            transitions: n.transitions,
            arcs: n.arcs,
        }
    }
}

impl PetriNet {
    /// Builds a net, synthesizing a unique source and sink place when the
    /// structure does not already have exactly one of each.
    pub fn new(places: Vec<Place>, transitions: Vec<Transition>, arcs: Vec<Arc>) -> Result<Self> {
        let mut net = PetriNet {
            places,
            transitions,
            arcs: Vec::new(),
            preset: Vec::new(),
            postset: Vec::new(),
            place_preset: Vec::new(),
            place_postset: Vec::new(),
            start: 0,
            end: 0,
        };
        if net.places.is_empty() {
            return Err(Error::Invalid("a Petri net needs at least one place".into()));
        }
        let mut arcs = arcs;
        for a in &arcs {
            let (p, t) = match *a {
                Arc::Input(p, t) | Arc::Output(t, p) => (p, t),
            };
            if p >= net.places.len() || t >= net.transitions.len() {
                return Err(Error::Invalid(format!("arc {a:?} references a missing node")));
            }
        }
        arcs.sort_unstable_by_key(|a| match *a {
            Arc::Input(p, t) => (0, p, t),
            Arc::Output(t, p) => (1, t, p),
        });
        arcs.dedup();
        net.arcs = arcs;
        net.index_arcs();

        let sources: Vec<usize> = (0..net.places.len())
            .filter(|&p| net.place_preset[p].is_empty())
            .collect();
        let free_in: Vec<usize> = (0..net.transitions.len())
            .filter(|&t| net.preset[t].is_empty())
            .collect();
        net.start = if sources.len() == 1 && free_in.is_empty() {
            sources[0]
        } else {
            log::warn!("net has {} source places; synthesizing a start place", sources.len());
            let s = net.add_place("synthetic_start");
            if sources.len() > 1 {
                let t = net.add_silent("synthetic_start_split");
                net.arcs.push(Arc::Input(s, t));
                net.arcs.extend(sources.iter().map(|&p| Arc::Output(t, p)));
            }
            net.arcs.extend(free_in.iter().map(|&t| Arc::Input(s, t)));
            net.index_arcs();
            s
        };

        let sinks: Vec<usize> = (0..net.places.len())
            .filter(|&p| net.place_postset[p].is_empty() && p != net.start)
            .collect();
        let free_out: Vec<usize> = (0..net.transitions.len())
            .filter(|&t| net.postset[t].is_empty())
            .collect();
        net.end = if net.places.len() == 1 {
            0
        } else if sinks.len() == 1 && free_out.is_empty() {
            sinks[0]
        } else {
            log::warn!("net has {} sink places; synthesizing an end place", sinks.len());
            let e = net.add_place("synthetic_end");
            if sinks.len() > 1 {
                let t = net.add_silent("synthetic_end_join");
                net.arcs.extend(sinks.iter().map(|&p| Arc::Input(p, t)));
                net.arcs.push(Arc::Output(t, e));
            }
            net.arcs.extend(free_out.iter().map(|&t| Arc::Output(t, e)));
            net.index_arcs();
            e
        };
        Ok(net)
    }

    fn add_place(&mut self, id: &str) -> usize {
        self.places.push(Place {
            id: id.into(),
            name: None,
        });
        self.places.len() - 1
    }

    fn add_silent(&mut self, id: &str) -> usize {
        self.transitions.push(Transition {
            id: id.into(),
            label: None,
        });
        self.transitions.len() - 1
    }

    fn index_arcs(&mut self) {
        let (np, nt) = (self.places.len(), self.transitions.len());
        self.preset = vec![Vec::new(); nt];
        self.postset = vec![Vec::new(); nt];
        self.place_preset = vec![Vec::new(); np];
        self.place_postset = vec![Vec::new(); np];
        for a in &self.arcs {
            match *a {
                Arc::Input(p, t) => {
                    self.preset[t].push(p);
                    self.place_postset[p].push(t);
                }
                Arc::Output(t, p) => {
                    self.postset[t].push(p);
                    self.place_preset[p].push(t);
                }
            }
        }
        for v in self
            .preset
            .iter_mut()
            .chain(&mut self.postset)
            .chain(&mut self.place_preset)
            .chain(&mut self.place_postset)
        {
            v.sort_unstable();
            v.dedup();
        }
    }

    pub fn places(&self) -> &[Place] {
        &self.places
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn num_places(&self) -> usize {
        self.places.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    pub fn preset(&self, t: usize) -> &[usize] {
        &self.preset[t]
    }

    pub fn postset(&self, t: usize) -> &[usize] {
        &self.postset[t]
    }

    /// Transitions producing into place `p`, ascending.
    pub fn place_preset(&self, p: usize) -> &[usize] {
        &self.place_preset[p]
    }

    pub fn place_postset(&self, p: usize) -> &[usize] {
        &self.place_postset[p]
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn initial_marking(&self) -> Marking {
        let mut m = Marking::empty(self.num_places());
        m.tokens[self.start] = 1;
        m
    }

    pub fn is_enabled(&self, m: &Marking, t: usize) -> bool {
        self.preset[t].iter().all(|&p| m.tokens[p] > 0)
    }

    /// Enabled transitions in ascending index order.
    pub fn enabled(&self, m: &Marking) -> Vec<usize> {
        (0..self.transitions.len())
            .filter(|&t| self.is_enabled(m, t))
            .collect()
    }

    pub fn fire(&self, m: &Marking, t: usize) -> Result<Marking> {
        if !self.is_enabled(m, t) {
            return Err(Error::NotEnabled { transition: t });
        }
        let mut next = m.clone();
        for &p in &self.preset[t] {
            next.tokens[p] -= 1;
        }
        for &p in &self.postset[t] {
            next.tokens[p] += 1;
        }
        Ok(next)
    }
}

/// Token count per place.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Marking {
    pub tokens: Vec<u32>,
}

impl Marking {
    pub fn empty(places: usize) -> Self {
        Marking {
            tokens: vec![0; places],
        }
    }

    pub fn total(&self) -> u64 {
        self.tokens.iter().map(|&t| u64::from(t)).sum()
    }

    pub fn marked(&self, p: usize) -> bool {
        self.tokens[p] > 0
    }
}

/// Convenience constructor used by fixtures and tests.
#[derive(Debug, Default, Clone)]
pub struct NetBuilder {
    places: Vec<Place>,
    transitions: Vec<Transition>,
    arcs: Vec<Arc>,
}

impl NetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn place(&mut self, id: &str) -> usize {
        self.places.push(Place {
            id: id.into(),
            name: None,
        });
        self.places.len() - 1
    }

    pub fn places(&mut self, n: usize) -> Vec<usize> {
        (0..n)
            .map(|_| {
                let id = format!("p{}", self.places.len());
                self.place(&id)
            })
            .collect()
    }

    /// Adds a transition labelled `label`, or silent when `None`, wired
    /// from `inputs` to `outputs`.
    pub fn transition(&mut self, label: Option<&str>, inputs: &[usize], outputs: &[usize]) -> usize {
        let t = self.transitions.len();
        self.transitions.push(Transition {
            id: format!("t{t}"),
            label: label.map(str::to_owned),
        });
        self.arcs.extend(inputs.iter().map(|&p| Arc::Input(p, t)));
        self.arcs.extend(outputs.iter().map(|&p| Arc::Output(t, p)));
        t
    }

    pub fn build(self) -> Result<PetriNet> {
        PetriNet::new(self.places, self.transitions, self.arcs)
    }
}
