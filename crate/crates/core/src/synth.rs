//! Synthetic nets and logs: small reference models, random nets, and
//! logs produced by simulating a net.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::eventlog::{EventLog, RawEvent, RawTrace};
use crate::petrinet::{NetBuilder, PetriNet};

/// Observable transitions fired by one random walk from the initial
/// marking, choosing uniformly among enabled transitions at every step.
/// Stops when the end place is marked, nothing is enabled, or after
/// `max_steps` firings.
pub fn random_walk<R: Rng>(net: &PetriNet, rng: &mut R, max_steps: usize) -> Vec<usize> {
    let mut m = net.initial_marking();
    let mut fired = Vec::new();
    for _ in 0..max_steps {
        if net.start() != net.end() && m.marked(net.end()) {
            break;
        }
        let enabled = net.enabled(&m);
        let Some(&t) = enabled.choose(rng) else { break };
        m = net.fire(&m, t).expect("enabled");
        fired.push(t);
    }
    fired
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub max_steps: usize,
    /// Resources drawn uniformly per event; empty means no attribute.
    pub resources: Vec<String>,
    /// Upper bound on seconds between consecutive events.
    pub max_gap_secs: i64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            max_steps: 200,
            resources: vec!["ann".into(), "bob".into(), "cyd".into()],
            max_gap_secs: 3 * 86_400,
        }
    }
}

/// Log of `traces` simulated cases. Walks that fire no observable
/// transition are retried.
pub fn simulate_log(net: &PetriNet, traces: usize, seed: u64, opts: &SimOptions) -> EventLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = Vec::with_capacity(traces);
    let with_attr = !opts.resources.is_empty();
    while raw.len() < traces {
        let labels: Vec<String> = random_walk(net, &mut rng, opts.max_steps)
            .into_iter()
            .filter_map(|t| net.transitions()[t].label.clone())
            .collect();
        if labels.is_empty() {
            continue;
        }
        let mut ts: i64 = 1_300_000_000 + rng.gen_range(0..10_000_000);
        let events = labels
            .into_iter()
            .map(|activity| {
                ts += rng.gen_range(0..=opts.max_gap_secs);
                RawEvent {
                    activity,
                    timestamp: ts,
                    attrs: if with_attr {
                        vec![opts.resources.choose(&mut rng).cloned()]
                    } else {
                        Vec::new()
                    },
                }
            })
            .collect();
        raw.push(RawTrace {
            case_id: format!("case{}", raw.len()),
            events,
        });
    }
    let attr_names = if with_attr { vec!["org:resource".to_owned()] } else { Vec::new() };
    EventLog::from_raw(raw, attr_names)
}

/// Eight places in a line: A, B, silent, C, D, E, F.
pub fn deterministic_chain() -> PetriNet {
    let mut b = NetBuilder::new();
    let p = b.places(8);
    let steps = [Some("A"), Some("B"), None, Some("C"), Some("D"), Some("E"), Some("F")];
    for (i, label) in steps.into_iter().enumerate() {
        b.transition(label, &[p[i]], &[p[i + 1]]);
    }
    b.build().expect("valid net")
}

/// Like [`deterministic_chain`] but the second step is an equiprobable
/// choice between `B` and `C`.
pub fn two_branch_chain() -> PetriNet {
    let mut b = NetBuilder::new();
    let p = b.places(8);
    b.transition(Some("A"), &[p[0]], &[p[1]]);
    b.transition(Some("B"), &[p[1]], &[p[2]]);
    b.transition(Some("C"), &[p[1]], &[p[2]]);
    b.transition(None, &[p[2]], &[p[3]]);
    b.transition(Some("D"), &[p[3]], &[p[4]]);
    b.transition(Some("E"), &[p[4]], &[p[5]]);
    b.transition(Some("F"), &[p[5]], &[p[6]]);
    b.transition(Some("G"), &[p[6]], &[p[7]]);
    b.build().expect("valid net")
}

/// Net for the loan-application subprocess: submission, pre-acceptance,
/// acceptance and finalization, then approval, registration and activation
/// in parallel. Declines and cancellations exit early; `A_DECLINED` and
/// `A_CANCELLED` each label several transitions.
///
/// Places: 0 source, 1 after SUBMITTED, 2 after PARTLYSUBMITTED,
/// 3 after PREACCEPTED, 4 after ACCEPTED, 5 after FINALIZED,
/// 6..=11 the parallel block, 12 sink.
pub fn loan_application_net() -> PetriNet {
    let mut b = NetBuilder::new();
    let p = b.places(13);
    b.transition(Some("A_SUBMITTED"), &[p[0]], &[p[1]]);
    b.transition(Some("A_PARTLYSUBMITTED"), &[p[1]], &[p[2]]);
    b.transition(Some("A_PREACCEPTED"), &[p[2]], &[p[3]]);
    b.transition(Some("A_DECLINED"), &[p[2]], &[p[12]]);
    b.transition(Some("A_ACCEPTED"), &[p[3]], &[p[4]]);
    b.transition(Some("A_DECLINED"), &[p[3]], &[p[12]]);
    b.transition(Some("A_CANCELLED"), &[p[3]], &[p[12]]);
    b.transition(Some("A_FINALIZED"), &[p[4]], &[p[5]]);
    b.transition(Some("A_DECLINED"), &[p[4]], &[p[12]]);
    b.transition(Some("A_CANCELLED"), &[p[4]], &[p[12]]);
    b.transition(None, &[p[5]], &[p[6], p[7], p[8]]);
    b.transition(Some("A_APPROVED"), &[p[6]], &[p[9]]);
    b.transition(Some("A_REGISTERED"), &[p[7]], &[p[10]]);
    b.transition(Some("A_ACTIVATED"), &[p[8]], &[p[11]]);
    b.transition(None, &[p[9], p[10], p[11]], &[p[12]]);
    b.transition(Some("A_DECLINED"), &[p[5]], &[p[12]]);
    b.transition(Some("A_CANCELLED"), &[p[5]], &[p[12]]);
    b.build().expect("valid net")
}

/// Net with a single-activity loop: `W_Afhandelen leads`, then
/// `W_Completeren aanvraag` repeated through a silent back edge.
pub fn single_activity_loop_net() -> PetriNet {
    let mut b = NetBuilder::new();
    let p = b.places(4);
    b.transition(Some("W_Afhandelen leads"), &[p[0]], &[p[1]]);
    b.transition(Some("W_Completeren aanvraag"), &[p[1]], &[p[2]]);
    b.transition(None, &[p[2]], &[p[1]]);
    b.transition(None, &[p[2]], &[p[3]]);
    b.build().expect("valid net")
}

/// A random net with `2..=max_places` places. Transitions take one to three
/// input and output places; roughly a third are silent and labels repeat.
pub fn random_net<R: Rng>(rng: &mut R, max_places: usize) -> PetriNet {
    let np = rng.gen_range(2..=max_places.max(2));
    let nt = rng.gen_range(1..=2 * np);
    let mut b = NetBuilder::new();
    let places = b.places(np);
    for _ in 0..nt {
        let n_in = rng.gen_range(1..=3.min(np));
        let ins: Vec<usize> = places.choose_multiple(rng, n_in).copied().collect();
        let n_out = rng.gen_range(1..=3.min(np));
        let outs: Vec<usize> = places.choose_multiple(rng, n_out).copied().collect();
        let label = if rng.gen_bool(0.33) {
            None
        } else {
            Some(["a", "b", "c", "d", "e", "f"][rng.gen_range(0..6)])
        };
        b.transition(label, &ins, &outs);
    }
    b.build().expect("valid net")
}

/// Process-tree operators for [`random_block_net`].
#[derive(Debug, Clone)]
pub enum Block {
    Activity(String),
    Silent,
    Sequence(Vec<Block>),
    Choice(Vec<Block>),
    Parallel(Vec<Block>),
    /// Body, then either the redo part and the body again, or exit.
    Loop(Box<Block>, Box<Block>),
}

impl Block {
    /// Random tree of at most `depth` operator levels with fresh labels
    /// `act1, act2, ..`. With `parallel_in_loops` false, no parallel block
    /// appears inside a loop body or redo part.
    pub fn random<R: Rng>(rng: &mut R, depth: usize, next_label: &mut usize, parallel_in_loops: bool) -> Block {
        Self::grow(rng, depth, next_label, parallel_in_loops, false)
    }

    fn grow<R: Rng>(rng: &mut R, depth: usize, next_label: &mut usize, parallel_in_loops: bool, in_loop: bool) -> Block {
        let leaf = depth == 0 || rng.gen_bool(0.3);
        if leaf {
            if rng.gen_bool(0.1) {
                return Block::Silent;
            }
            *next_label += 1;
            return Block::Activity(format!("act{}", *next_label));
        }
        let width = rng.gen_range(2..=3);
        let mut op = rng.gen_range(0..4);
        if op == 2 && in_loop && !parallel_in_loops {
            op = 0;
        }
        if op < 3 {
            let kids = (0..width)
                .map(|_| Self::grow(rng, depth - 1, next_label, parallel_in_loops, in_loop))
                .collect::<Vec<_>>();
            return match op {
                0 => Block::Sequence(kids),
                1 => Block::Choice(kids),
                _ => Block::Parallel(kids),
            };
        }
        let body = Self::grow(rng, depth - 1, next_label, parallel_in_loops, true);
        let redo = if rng.gen_bool(0.5) {
            Block::Silent
        } else {
            Self::grow(rng, depth - 1, next_label, parallel_in_loops, true)
        };
        Block::Loop(Box::new(body), Box::new(redo))
    }

    fn build(&self, b: &mut NetBuilder, entry: usize, exit: usize) {
        match self {
            Block::Activity(l) => {
                b.transition(Some(l), &[entry], &[exit]);
            }
            Block::Silent => {
                b.transition(None, &[entry], &[exit]);
            }
            Block::Sequence(kids) => {
                let mut cur = entry;
                for (i, k) in kids.iter().enumerate() {
                    let next = if i + 1 == kids.len() { exit } else { b.places(1)[0] };
                    k.build(b, cur, next);
                    cur = next;
                }
            }
            Block::Choice(kids) => {
                for k in kids {
                    k.build(b, entry, exit);
                }
            }
            Block::Parallel(kids) => {
                let starts = b.places(kids.len());
                let ends = b.places(kids.len());
                b.transition(None, &[entry], &starts);
                for (i, k) in kids.iter().enumerate() {
                    k.build(b, starts[i], ends[i]);
                }
                b.transition(None, &ends, &[exit]);
            }
            Block::Loop(body, redo) => {
                let l0 = b.places(1)[0];
                let l1 = b.places(1)[0];
                b.transition(None, &[entry], &[l0]);
                body.build(b, l0, l1);
                redo.build(b, l1, l0);
                b.transition(None, &[l1], &[exit]);
            }
        }
    }
}

/// Block-structured net with unique activity labels, built from a sequence
/// of two random trees (see [`Block::random`]).
///
/// Without parallel blocks inside loops, the marking after each event is
/// determined by the events so far, so replay never needs repairs on a
/// simulated trace. With them, an event may belong to the current loop
/// iteration or the next one and only later events tell which.
pub fn random_block_net<R: Rng>(rng: &mut R, depth: usize, parallel_in_loops: bool) -> PetriNet {
    let mut next = 0;
    let tree = Block::Sequence(vec![
        Block::random(rng, depth, &mut next, parallel_in_loops),
        Block::random(rng, depth, &mut next, parallel_in_loops),
    ]);
    block_net(&tree)
}

pub fn block_net(tree: &Block) -> PetriNet {
    let mut b = NetBuilder::new();
    let entry = b.place("source");
    let exit = b.place("sink");
    tree.build(&mut b, entry, exit);
    b.build().expect("valid net")
}
