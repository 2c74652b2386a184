mod common;

use mixroute::choice::{
    aggregate_q, choice_argmax, choice_intervals, choice_softmax, dominated_set, interval_option, ChoiceNoise, Menu,
    MenuOption, WeightVector,
};
use mixroute::io::config::{parse_config, ExperimentConfig};
use mixroute::learning::{expected_information_gain, PosteriorSamples, Query};
use mixroute::planner::human_fill;
use mixroute::population::PopulationModel;
use mixroute::road::Road;
use proptest::prelude::*;

const CANONICAL: &str = include_str!("../../../configs/canonical.json");

fn road() -> impl Strategy<Value = Road> {
    (100.0..5000.0f64, 5.0..40.0f64, 3.0..15.0f64, 0.5..3.0f64, 0.0..1.0f64).prop_map(|(d, v, l, th, frac)| {
        Road::new(d, v, l, th, th * frac).unwrap()
    })
}

fn menu(max: usize) -> impl Strategy<Value = Menu> {
    prop::collection::vec((20.0..120.0f64, 0.0..20.0f64), 1..=max).prop_map(|pairs| {
        // Round to a coarse grid so that ties and duplicates actually occur.
        let pairs: Vec<(f64, f64)> = pairs.iter().map(|&(l, p)| (l.round(), (p * 2.0).round() / 2.0)).collect();
        Menu::from_pairs(&pairs).unwrap()
    })
}

proptest! {
    #[test]
    fn capacity_shrinks_with_latency_and_grows_with_autonomy(
        r in road(), s1 in 1.0..3.0f64, s2 in 1.0..2.0f64, x1 in 0.0..1.0f64, t in 0.0..1.0f64,
    ) {
        let l1 = r.free_flow_latency() * s1;
        let l2 = l1 * s2;
        let x2 = x1 + (1.0 - x1) * t;
        let c = |l: f64, x: f64| r.max_total_flow(l, x).unwrap();
        prop_assert!(c(l2, x1) <= c(l1, x1) * (1.0 + 1e-12));
        prop_assert!(c(l1, x2) >= c(l1, x1) * (1.0 - 1e-12));
        let reference = common::capacity_closed_form(r.length, r.vehicle_length, r.tau_h, r.tau_a, l1, x1);
        prop_assert!((c(l1, x1) - reference).abs() <= 1e-12 * reference);
    }

    #[test]
    fn platooning_strictly_helps(d in 100.0..5000.0f64, v in 5.0..40.0f64, th in 0.5..3.0f64, frac in 0.0..0.99f64, s in 1.0..3.0f64) {
        let r = Road::new(d, v, 5.0, th, th * frac).unwrap();
        let l = r.free_flow_latency() * s;
        prop_assert!(r.max_total_flow(l, 1.0).unwrap() > r.max_total_flow(l, 0.0).unwrap());
    }

    #[test]
    fn feasibility_boundary_matches_residual_capacity(r in road(), s in 1.0..3.0f64, share in 0.0..1.0f64) {
        let l = r.free_flow_latency() * s;
        let f_a = share * r.max_total_flow(l, 1.0).unwrap();
        let room = r.residual_human_capacity(l, f_a).unwrap();
        prop_assert!(r.is_feasible(l, room, f_a).unwrap());
        prop_assert!(!r.is_feasible(l, room + 1e-6, f_a).unwrap());
    }

    #[test]
    fn argmax_ignores_reward_scale(m in menu(6), theta in 0.0..=1.0f64, scale in 0.1..10.0f64) {
        let w = WeightVector::new(theta).unwrap();
        let scaled: Vec<(f64, f64)> = m.options().iter().map(|o| (o.ell * scale, o.price * scale)).collect();
        let scaled = Menu::from_pairs(&scaled).unwrap();
        prop_assert_eq!(choice_argmax(w, &m), choice_argmax(w, &scaled));
    }

    #[test]
    fn dominated_options_are_never_chosen(m in menu(6), theta in 0.0..=1.0f64) {
        let dominated = dominated_set(&m);
        let pick = choice_argmax(WeightVector::new(theta).unwrap(), &m);
        prop_assert!(!dominated.contains(&pick));
    }

    #[test]
    fn intervals_agree_with_argmax(m in menu(6), theta in 0.0..=1.0f64, endpoint in 0..3usize) {
        let theta = match endpoint { 0 => 0.0, 1 => 1.0, _ => theta };
        let intervals = choice_intervals(&m);
        let w = WeightVector::new(theta).unwrap();
        prop_assert_eq!(interval_option(&intervals, theta), Some(choice_argmax(w, &m)));
    }

    #[test]
    fn choice_shares_are_distributions(m in menu(6), a in 0.2..10.0f64, b in 0.2..10.0f64, beta in 0.05..5.0f64, theta in 0.0..=1.0f64) {
        let pop = PopulationModel::beta(a, b).unwrap();
        for noise in [ChoiceNoise::deterministic(), ChoiceNoise::noisy(beta).unwrap()] {
            let q = aggregate_q(&pop, &m, &noise);
            prop_assert!(q.0.iter().all(|&x| (0.0..=1.0 + 1e-12).contains(&x)));
            prop_assert!((q.0.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let s = choice_softmax(WeightVector::new(theta).unwrap(), &m, &ChoiceNoise::noisy(beta).unwrap()).unwrap();
        prop_assert!((s.0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn raising_a_price_never_attracts_riders(m in menu(5), i in 0..5usize, bump in 0.0..5.0f64, a in 0.5..6.0f64, b in 0.5..6.0f64) {
        let i = i % m.len();
        let pop = PopulationModel::beta(a, b).unwrap();
        let mut options: Vec<MenuOption> = m.options().to_vec();
        options[i].price += bump;
        let raised = Menu::new(options).unwrap();
        let det = ChoiceNoise::deterministic();
        let before = aggregate_q(&pop, &m, &det);
        let after = aggregate_q(&pop, &raised, &det);
        prop_assert!(after.0[i] <= before.0[i] + 1e-9);
    }

    #[test]
    fn information_gain_is_between_zero_and_one_bit(
        thetas in prop::collection::vec(0.0..=1.0f64, 1..200),
        la in 30.0..80.0f64, dl in 1.0..40.0f64, pb in 0.0..10.0f64, dp in 0.5..20.0f64, beta in 0.05..5.0f64,
    ) {
        let posterior = PosteriorSamples::from_thetas(thetas);
        let q = Query::from_pairs((la, pb + dp), (la + dl, pb)).unwrap();
        let ig = expected_information_gain(&posterior, &q, &ChoiceNoise::noisy(beta).unwrap());
        prop_assert!((0.0..=1.0).contains(&ig));
    }

    #[test]
    fn human_fill_conserves_demand(
        roads in prop::collection::vec((30.0..120.0f64, 0.0..1.0f64), 1..6), demand in 0.0..3.0f64,
    ) {
        let ell: Vec<f64> = roads.iter().map(|r| r.0.round()).collect();
        let residual: Vec<f64> = roads.iter().map(|r| r.1).collect();
        let (f_h, unserved) = human_fill(&ell, &residual, demand);
        let served: f64 = f_h.iter().sum();
        prop_assert!((served + unserved - demand).abs() < 1e-9);
        prop_assert!(unserved >= 0.0);
        for (f, r) in f_h.iter().zip(&residual) {
            prop_assert!(*f >= 0.0 && *f <= r + 1e-12);
        }
        // Nobody is turned away while capacity is left anywhere.
        if unserved > 1e-9 {
            prop_assert!(f_h.iter().zip(&residual).all(|(f, r)| (r - f).abs() < 1e-9));
        }
    }

    #[test]
    fn config_round_trips(seed in any::<u64>(), users in 1..50usize, budget in 1..30usize, floor in 0.0..1.0f64, beta in 0.1..3.0f64) {
        let mut config: ExperimentConfig = parse_config(CANONICAL.as_bytes()).unwrap();
        config.seed = seed;
        config.learning.users = users;
        config.learning.query_budget = budget;
        config.planner.profit_floor = floor;
        config.choice.beta = beta;
        let again = parse_config(config.to_json().as_bytes()).unwrap();
        prop_assert_eq!(config, again);
    }
}
