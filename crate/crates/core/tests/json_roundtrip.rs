use proptest::prelude::*;
use trajrl::linalg::Vector;
use trajrl::trajectory::Trajectory;

proptest! {
    #[test]
    fn doubles_survive_a_json_round_trip(values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..20)) {
        let text = trajrl::json::to_string(&values).unwrap();
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn trajectories_survive_a_json_round_trip(seed in any::<u64>(), t in 1usize..6) {
        use rand::Rng;
        let mut rng = trajrl::rng::seeded(seed);
        let mut v = |n: usize| Vector::from_fn(n, |_, _| rng.random_range(-1e3..1e3));
        let states = (0..=t).map(|_| v(3)).collect();
        let actions = (0..t).map(|_| v(2)).collect();
        let traj = Trajectory::new(states, actions).unwrap();
        let back = Trajectory::from_json(&traj.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.states(), traj.states());
        prop_assert_eq!(back.actions(), traj.actions());
    }
}
