mod common;

use procnet::eventlog::Vocabulary;
use procnet::petrinet::{replay_prefix, silent_closure, LabelIndex, Marking, ReplayOptions};
use procnet::synth::{block_net, random_block_net, random_net, random_walk, Block};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{closure_oracle, enabled_oracle, fire_oracle, inputs_of, outputs_of};

fn random_marking(rng: &mut ChaCha8Rng, places: usize) -> Marking {
    Marking {
        tokens: (0..places).map(|_| rng.gen_range(0..3)).collect(),
    }
}

#[test]
fn enabled_and_fire_match_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let net = random_net(&mut rng, 15);
        for _ in 0..5 {
            let m = random_marking(&mut rng, net.num_places());
            let enabled = net.enabled(&m);
            assert_eq!(enabled, enabled_oracle(&net, &m));
            for t in 0..net.num_transitions() {
                match net.fire(&m, t) {
                    Ok(next) => {
                        assert!(enabled.contains(&t));
                        assert_eq!(next, fire_oracle(&net, &m, t));
                        if inputs_of(&net, t).len() == outputs_of(&net, t).len() {
                            assert_eq!(next.total(), m.total());
                        }
                    }
                    Err(_) => assert!(!enabled.contains(&t)),
                }
            }
        }
    }
}

#[test]
fn silent_closure_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut non_trivial = 0;
    for _ in 0..300 {
        let net = random_net(&mut rng, 8);
        let m = random_marking(&mut rng, net.num_places());
        for t in 0..net.num_transitions() {
            if net.transitions()[t].is_silent() {
                continue;
            }
            let depth = 4;
            let got = silent_closure(&net, &m, t, depth, usize::MAX);
            let want = closure_oracle(&net, &m, t, depth);
            assert_eq!(got, want);
            if let Some(seq) = got {
                non_trivial += usize::from(!seq.is_empty());
                let mut mk = m.clone();
                for s in seq {
                    mk = net.fire(&mk, s).unwrap();
                }
                assert!(net.is_enabled(&mk, t));
            }
        }
    }
    assert!(non_trivial > 20, "only {non_trivial} non-empty closures exercised");
}

#[test]
fn simulated_traces_replay_without_repairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let net = random_block_net(&mut rng, 3, false);
        let labels: Vec<&str> = net
            .transitions()
            .iter()
            .filter_map(|t| t.label.as_deref())
            .collect();
        let vocab = Vocabulary::fit(labels);
        let index = LabelIndex::new(&net, &vocab);
        for _ in 0..10 {
            let acts: Vec<u32> = random_walk(&net, &mut rng, 60)
                .into_iter()
                .filter_map(|t| net.transitions()[t].label.as_deref())
                .map(|l| vocab.get(l).unwrap())
                .collect();
            let steps = replay_prefix(&net, &index, &acts, &ReplayOptions::default()).unwrap();
            let repairs: usize = steps.iter().map(|s| s.repairs.len()).sum();
            assert_eq!(repairs, 0, "trace {acts:?} needed repairs on {net:?}");
            assert_eq!(steps, replay_prefix(&net, &index, &acts, &ReplayOptions::default()).unwrap());
        }
    }
}

/// Concurrency inside a loop makes online replay ambiguous: the fourth event
/// `a` can redo the inner loop or start the next outer iteration. The
/// shortest silent route picks the inner redo, and the seventh event then
/// finds the iteration's `a` branch not yet done.
#[test]
fn parallel_block_in_loop_can_need_repairs() {
    let act = |l: &str| Block::Activity(l.into());
    let tree = Block::Loop(
        Box::new(Block::Parallel(vec![
            Block::Loop(Box::new(act("a")), Box::new(Block::Silent)),
            Block::Sequence(vec![act("b"), act("c")]),
        ])),
        Box::new(Block::Silent),
    );
    let net = block_net(&tree);
    let vocab = Vocabulary::fit(["a", "b", "c"]);
    let index = LabelIndex::new(&net, &vocab);
    let trace: Vec<u32> = "abcabcbac".chars().map(|c| vocab.get(&c.to_string()).unwrap()).collect();
    let steps = replay_prefix(&net, &index, &trace, &ReplayOptions::default()).unwrap();
    let repaired: Vec<usize> = (0..steps.len()).filter(|&i| !steps[i].repairs.is_empty()).collect();
    assert_eq!(repaired, [6]);
}
