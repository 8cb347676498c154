//! Delta-embedded beliefs against a naive root-to-node replay.

mod common;

use common::*;
use ipp_core::PlanTree;
use proptest::prelude::*;
use rand::Rng;

fn check_against_replay(tree: &PlanTree, scene: &Scene) -> Result<(), TestCaseError> {
    match replay_mismatch(tree, scene, 1e-9) {
        Some(e) => Err(TestCaseError::fail(e)),
        None => Ok(()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn embedding_matches_replay(seed in any::<u64>(), n in 1usize..=200) {
        let mut rng = rng(seed);
        let scene = random_scene(&mut rng, 50);
        let tree = random_tree(&mut rng, &scene, n, 60);
        check_against_replay(&tree, &scene)?;
        let j = tree.ids().map(|i| tree.node(i).unwrap().footprint.len()).max().unwrap();
        prop_assert!(tree.delta_entries() <= j * tree.len());
    }

    #[test]
    fn prune_before_keeps_beliefs(seed in any::<u64>(), n in 2usize..=120) {
        let mut rng = rng(seed);
        let scene = random_scene(&mut rng, 30);
        let mut tree = random_tree(&mut rng, &scene, n, 40);
        let ids: Vec<_> = tree.ids().collect();
        let pivot = ids[rng.gen_range(0..ids.len())];
        let keep = descendants(&tree, pivot);
        let before: Vec<Vec<f64>> = keep
            .iter()
            .map(|&id| (0..scene.map.len() as u32).map(|c| tree.belief_at(id, c, &scene.map).unwrap()).collect())
            .collect();
        tree.prune_before(pivot).unwrap();
        prop_assert_eq!(tree.root(), pivot);
        prop_assert_eq!(tree.ids().collect::<Vec<_>>(), keep.clone());
        for (id, row) in keep.iter().zip(before) {
            for (c, p) in row.into_iter().enumerate() {
                prop_assert_eq!(tree.belief_at(*id, c as u32, &scene.map).unwrap(), p);
            }
        }
    }

    #[test]
    fn recycling_matches_fresh_replay(seed in any::<u64>(), n in 2usize..=150) {
        if let Some(e) = recycling_mismatch(&mut rng(seed), 40, n, 50) {
            return Err(TestCaseError::fail(e));
        }
    }
}

#[test]
fn prune_before_chain_example() {
    use ipp_core::{BeliefMap, Footprint, Pose, TreeParams};
    let map = BeliefMap::new((0.0, 0.0), 10.0, 10, 10, 0.3).unwrap();
    let p = |x: f64| Pose::new(x, 0.0, 50.0, 0.0);
    let d = |c: u32, v: f64| [(c, v)].into_iter().collect();
    let mut t = PlanTree::new(p(0.0), Footprint::default(), d(1, 0.9), 0.0, &map, TreeParams::default());
    let a = t.root();
    let b = t.attach(a, p(100.0), straight(p(0.0), 100.0), Footprint::default(), d(2, 0.8), 0.1, 1e4).unwrap();
    let c = t.attach(b, p(200.0), straight(p(100.0), 100.0), Footprint::default(), d(3, 0.7), 0.1, 1e4).unwrap();
    let s = t.attach(a, p(-100.0), straight(p(0.0), 100.0), Footprint::default(), d(4, 0.6), 0.1, 1e4).unwrap();
    t.prune_before(b).unwrap();
    assert_eq!(t.root(), b);
    assert_eq!(t.len(), 2);
    assert!(t.node(s).is_none());
    let delta = &t.node(b).unwrap().delta;
    assert_eq!(delta.len(), 2);
    assert_eq!((delta[&1], delta[&2]), (0.9, 0.8));
    assert_eq!(t.belief_at(c, 1, &map).unwrap(), 0.9);
    assert_eq!(t.belief_at(c, 3, &map).unwrap(), 0.7);
    assert_eq!(t.belief_at(c, 5, &map).unwrap(), 0.3);
}
