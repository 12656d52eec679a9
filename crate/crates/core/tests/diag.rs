// Replays the criterion-2 generation to find the panicking case.
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use superhedge::tree::RandomTreeConfig;
use superhedge::*;

#[test]
fn find_failing_case() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let tree_cfg = RandomTreeConfig { max_depth: 5, max_branching: 4, ..RandomTreeConfig::default() };
    for case in 0..500 {
        let tree = random_tree(&mut rng, &tree_cfg);
        let strike = rng.gen_range(40.0..260.0);
        let text = tree.to_text();
        let result = std::panic::catch_unwind(|| {
            let payoff = PiecewisePayoff::call(strike);
            let pp = tree.multi_period_price(|s| payoff.value(s));
            for id in tree.node_ids() {
                let lp = tree.brute_force_superhedge(|s| payoff.value(s), id).unwrap();
                let _ = (pp.values[id], lp);
            }
        });
        if result.is_err() {
            std::fs::write("/tmp/failing_tree.txt", &text).unwrap();
            std::fs::write("/tmp/failing_strike.txt", format!("{strike}")).unwrap();
            panic!("case {case} panics; tree has {} nodes, strike {strike}", tree.len());
        }
    }
}
