mod common;

use common::*;
use dynobs::checker::{check, check_with, CheckOptions};
use dynobs::ktree::{replay_info, tree_at, udk};
use dynobs::logic::{innermost_epistemic, knowledge_depth, substitute};
use dynobs::oracle::{natural_eval_bounded, History, RecordTuple, Verdict3};
use dynobs::{parse_formula, parse_model, AgentId, Formula, Model, ObsId, ObsTuple, StateId};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn model(seed: u64, agents: usize) -> Model {
    let mut rng = StdRng::seed_from_u64(seed);
    let shape = ModelShape { states: 5, observations: 3, agents, atoms: 2, max_branch: 2 };
    random_model(&mut rng, &shape)
}

fn instance(seed: u64) -> (Model, Formula) {
    let mut rng = StdRng::seed_from_u64(seed);
    let agents = rng.gen_range(1..=2);
    let shape = ModelShape { states: 4, observations: 3, agents, atoms: 2, max_branch: 2 };
    let m = random_model(&mut rng, &shape);
    let f = random_formula(&mut rng, &m, &FormulaShape { max_size: 9, max_kdepth: 2, deltas: true });
    (m, f)
}

fn random_tree_point(seed: u64, m: &Model) -> (StateId, ObsTuple) {
    let mut rng = StdRng::seed_from_u64(seed);
    let s = StateId::from(rng.gen_range(0..m.num_states()));
    let ov = ObsTuple((0..m.num_agents()).map(|_| ObsId::from(rng.gen_range(0..m.num_observations()))).collect());
    (s, ov)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn observations_are_partitions(seed in any::<u64>(), agents in 1usize..=2) {
        let m = model(seed, agents);
        for o in m.obs_ids() {
            let mut covered = vec![0; m.num_states()];
            for block in m.partition(o) {
                for s in block {
                    covered[s.index()] += 1;
                }
            }
            prop_assert!(covered.iter().all(|&c| c == 1));
            for s in m.state_ids() {
                prop_assert!(m.equiv(o, s, s));
                for t in m.state_ids() {
                    prop_assert_eq!(m.equiv(o, s, t), m.equiv(o, t, s));
                    for u in m.state_ids() {
                        if m.equiv(o, s, t) && m.equiv(o, t, u) {
                            prop_assert!(m.equiv(o, s, u));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn model_text_round_trip(seed in any::<u64>(), agents in 1usize..=3) {
        let m = model(seed, agents);
        let again = parse_model(&m.to_text()).unwrap();
        prop_assert_eq!(again, m);
    }

    #[test]
    fn formula_print_parse_round_trip(seed in any::<u64>()) {
        let (m, f) = instance(seed);
        let text = f.display(&m).to_string();
        let back = parse_formula(&text, &m).unwrap();
        prop_assert_eq!(back, f, "{}", text);
    }

    #[test]
    fn innermost_elimination_terminates(seed in any::<u64>()) {
        let (_, mut f) = instance(seed);
        let bound = f.count_epistemic();
        let mut steps = 0;
        while let Some(g) = innermost_epistemic(&f).cloned() {
            let before = knowledge_depth(&f);
            let (h, n) = substitute(&f, &g, &format!("@x{steps}")).unwrap();
            prop_assert!(n >= 1);
            prop_assert!(knowledge_depth(&h) <= before);
            prop_assert!(h.count_epistemic() < f.count_epistemic());
            f = h;
            steps += 1;
        }
        prop_assert!(steps <= bound);
        prop_assert!(f.is_epistemic_free());
    }

    #[test]
    fn udk_is_idempotent_and_trees_are_well_formed(seed in any::<u64>(), k in 0usize..=2) {
        let m = model(seed, 2);
        let (s, ov) = random_tree_point(seed ^ 0x55, &m);
        let t = tree_at(&m, s, &ov, k);
        prop_assert!(t.is_well_formed());
        for a in m.agent_ids() {
            for o in m.obs_ids() {
                let once = udk(&t, o, a, &m);
                prop_assert!(once.is_well_formed());
                prop_assert_eq!(udk(&once, o, a, &m), once.clone());
            }
        }
    }

    #[test]
    fn replayed_sets_are_contained_in_the_current_class(seed in any::<u64>()) {
        let m = model(seed, 1);
        let mut rng = StdRng::seed_from_u64(seed.rotate_left(7));
        let len = rng.gen_range(1..=5);
        let h = random_history(&mut rng, &m, len);
        let changes: Vec<(usize, AgentId, ObsId)> = (0..rng.gen_range(0..=2))
            .map(|_| (rng.gen_range(0..len), AgentId(0), ObsId::from(rng.gen_range(0..m.num_observations()))))
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let (info, ov) = replay_info(&m, &h, &changes).unwrap();
        prop_assert!(info.iset.contains(h.last().unwrap()));
        for s in &info.iset {
            prop_assert!(m.equiv(ov.get(AgentId(0)), *s, info.current));
        }
    }

    #[test]
    fn oracle_is_monotone_in_horizon(seed in any::<u64>()) {
        let (m, f) = instance(seed);
        let mut rng = StdRng::seed_from_u64(seed ^ 0xabc);
        let len = rng.gen_range(1..=2);
        let h = History(random_history(&mut rng, &m, len));
        let r = RecordTuple::empty(m.num_agents());
        let short = natural_eval_bounded(&m, &h, &r, &f, 2);
        let long = natural_eval_bounded(&m, &h, &r, &f, 4);
        if short != Verdict3::Unknown {
            prop_assert_eq!(short, long);
        }
    }

    #[test]
    fn negation_flips_the_verdict(seed in any::<u64>()) {
        let (m, f) = instance(seed);
        let a = check(&m, &f).unwrap().verdict;
        let b = check(&m, &Formula::not(f)).unwrap().verdict;
        prop_assert_ne!(a, b);
    }

    #[test]
    fn knowledge_is_factive(seed in any::<u64>()) {
        let (m, f) = instance(seed);
        let a = AgentId::from((seed as usize) % m.num_agents());
        let g = Formula::all(Formula::globally(Formula::implies(Formula::knows(a, f.clone()), f)));
        prop_assert!(check(&m, &g).unwrap().verdict);
    }

    #[test]
    fn knowledge_labels_imply_their_argument(seed in any::<u64>()) {
        let (m, f) = instance(seed);
        for force_ktree in [false, true] {
            let run = check_with(&m, &f, &CheckOptions { force_ktree, ..CheckOptions::default() }).unwrap();
            for e in run.eliminated.iter().filter(|e| e.reduced.starts_with('K')) {
                // Below the subformula's depth the forests are empty and K holds vacuously.
                for v in (0..run.augmented.len()).filter(|&v| run.augmented.level(v) >= e.knowledge_depth) {
                    if run.has_label(v, &e.atom) {
                        prop_assert!(run.has_label(v, &e.argument_atom), "{} at node {}", e.subformula, v);
                    }
                }
            }
        }
    }

    #[test]
    fn repeated_observation_change_is_idempotent(seed in any::<u64>()) {
        let (m, f) = instance(seed);
        let a = AgentId::from((seed as usize) % m.num_agents());
        let o = ObsId::from((seed as usize / 7) % m.num_observations());
        let once = Formula::set_obs(a, o, f);
        let twice = Formula::set_obs(a, o, once.clone());
        prop_assert_eq!(check(&m, &once).unwrap().verdict, check(&m, &twice).unwrap().verdict);
    }

    #[test]
    fn information_sets_and_trees_agree(seed in any::<u64>()) {
        let (m, f) = instance(seed);
        let a = check(&m, &f).unwrap().verdict;
        let b = check_with(&m, &f, &CheckOptions { force_ktree: true, ..CheckOptions::default() }).unwrap().verdict;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn reports_are_deterministic(seed in any::<u64>()) {
        let (m, f) = instance(seed);
        let strip = |v: serde_json::Value| {
            let mut v = v;
            v.as_object_mut().unwrap().remove("timing");
            v
        };
        let one = strip(serde_json::to_value(check(&m, &f).unwrap().report(&m, true)).unwrap());
        let two = strip(serde_json::to_value(check(&m, &f).unwrap().report(&m, true)).unwrap());
        prop_assert_eq!(one, two);
    }
}
