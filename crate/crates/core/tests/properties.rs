//! Randomized invariants. Each case draws a seed and builds its instance from
//! a ChaCha8 stream, so failures shrink to a reproducible seed.

use dicka_core::correlations::{
    apply_locr, check_no_signaling, embed_cq, extension_no_signaling_violation, flag_extension,
    marginal, mix, quantum_extension_from_purification, uniform_inputs, Correlation,
};
use dicka_core::games::{chsh_value, parity_chsh_win_probability, GameSpec};
use dicka_core::infotheory::{
    chain_rule_residual_multipartite, chain_rule_residual_tripartite, chain_rule_telescope,
    conditional_total_correlation, continuity_bound, cq_trace_distance, Conditioning,
    RegisterPartition, TripartiteLabels,
};
use dicka_core::qmat::{
    hermitian_eig, partial_trace, tensor, trace_distance, von_neumann_entropy, DensityMatrix,
};
use dicka_core::random::{
    random_cq_state, random_density_matrix, random_distribution, random_povm,
    random_quantum_correlation, random_wiring,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partial_trace_recovers_factor(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rho = random_density_matrix(&[2, 3], 3, &mut r);
        let sigma = random_density_matrix(&[2], 2, &mut r);
        let joint = rho.tensor(&sigma);
        let back = partial_trace(&joint, &[0, 1]).unwrap();
        prop_assert!(back.matrix().max_abs_diff(rho.matrix()) < 1e-10);
        let back = partial_trace(&sigma.tensor(&rho), &[1, 2]).unwrap();
        prop_assert!(back.matrix().max_abs_diff(rho.matrix()) < 1e-10);
    }

    #[test]
    fn entropy_is_additive(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rho = random_density_matrix(&[3], r.random_range(1..=3), &mut r);
        let sigma = random_density_matrix(&[2, 2], r.random_range(1..=4), &mut r);
        let joint = von_neumann_entropy(&rho.tensor(&sigma)).unwrap();
        let sum = von_neumann_entropy(&rho).unwrap() + von_neumann_entropy(&sigma).unwrap();
        prop_assert!((joint - sum).abs() < 1e-9);
    }

    #[test]
    fn eigenvalues_sum_to_trace(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rho = random_density_matrix(&[5], 5, &mut r);
        let h = tensor(rho.matrix(), rho.matrix());
        let eig = hermitian_eig(&h).unwrap();
        prop_assert!((eig.values.iter().sum::<f64>() - h.trace().re).abs() < 1e-9);
        prop_assert!(eig.reconstruct().max_abs_diff(&h) < 1e-10);
    }

    #[test]
    fn trace_distance_triangle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s: Vec<DensityMatrix> = (0..3).map(|_| random_density_matrix(&[4], 2, &mut r)).collect();
        let ab = trace_distance(&s[0], &s[1]).unwrap();
        let bc = trace_distance(&s[1], &s[2]).unwrap();
        let ac = trace_distance(&s[0], &s[2]).unwrap();
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
    }

    #[test]
    fn quantum_correlations_are_no_signaling(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_quantum_correlation(&[2, 3, 2], &[2, 3, 2], &[2, 3, 2], &mut r).unwrap();
        prop_assert!(check_no_signaling(&p, 1e-10).passed);
    }

    #[test]
    fn wirings_preserve_no_signaling(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_quantum_correlation(&[2, 2, 2], &[2, 2, 2], &[2, 2, 2], &mut r).unwrap();
        let w = random_wiring(&p, &[3, 2, 2], &[2, 3, 2], (2, 3), &mut r).unwrap();
        let f = apply_locr(&p, &w).unwrap();
        prop_assert_eq!(f.input_sizes(), &[3, 2, 2]);
        prop_assert!(check_no_signaling(&f, 1e-10).passed);
    }

    #[test]
    fn purification_extensions_are_no_signaling(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rho = random_density_matrix(&[2, 2], r.random_range(1..=4), &mut r);
        let povms: Vec<_> = (0..2)
            .map(|_| (0..2).map(|_| random_povm(2, 2, &mut r).unwrap()).collect::<Vec<_>>())
            .collect();
        let q = random_distribution(4, &mut r);
        let ext = quantum_extension_from_purification(&rho, &povms, &q).unwrap();
        prop_assert!(extension_no_signaling_violation(&ext, 2).unwrap() < 1e-10);
    }

    #[test]
    fn marginal_commutes_with_mix(seed in any::<u64>(), lambda in 0.0..=1.0f64) {
        let mut r = rng(seed);
        let t = random_quantum_correlation(&[2, 2, 2], &[2, 2, 2], &[2, 2, 2], &mut r).unwrap();
        let u = random_quantum_correlation(&[2, 2, 2], &[2, 2, 2], &[2, 2, 2], &mut r).unwrap();
        let a = marginal(&mix(&t, &u, lambda).unwrap(), &[0, 2]).unwrap();
        let b = mix(&marginal(&t, &[0, 2]).unwrap(), &marginal(&u, &[0, 2]).unwrap(), lambda).unwrap();
        for (x, y) in a.table().iter().zip(b.table()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn json_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_quantum_correlation(&[2, 2], &[2, 3], &[2, 2], &mut r).unwrap();
        prop_assert_eq!(Correlation::from_json(&p.to_json().unwrap()).unwrap(), p);
    }

    #[test]
    fn total_correlation_nonnegative(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = random_cq_state(&[("A", 2), ("B", 2), ("C", 3)], r.random_range(1..=3), &mut r).unwrap();
        let part = RegisterPartition::new(vec![names(&["A"]), names(&["B"]), names(&["C"])], Conditioning::e()).unwrap();
        prop_assert!(conditional_total_correlation(&s, &part).unwrap() >= -1e-9);
    }

    #[test]
    fn data_processing_on_one_group(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = random_cq_state(&[("A", 2), ("B", 2), ("C", 2), ("K", 2)], r.random_range(1..=3), &mut r).unwrap();
        let part = RegisterPartition::new(
            vec![names(&["A"]), names(&["B"]), names(&["C"])],
            Conditioning::e_and(names(&["K"])),
        )
        .unwrap();
        let before = conditional_total_correlation(&s, &part).unwrap();
        let channel: Vec<Vec<f64>> = (0..2).map(|_| random_distribution(3, &mut r)).collect();
        let after = conditional_total_correlation(&s.map_register("B", &channel).unwrap(), &part).unwrap();
        prop_assert!(after <= before + 1e-9, "{} > {}", after, before);
    }

    #[test]
    fn chain_rules_hold(seed in any::<u64>()) {
        let mut r = rng(seed);
        let regs = [("A1", 2), ("A2", 2), ("B1", 2), ("B2", 2), ("C1", 2), ("C2", 2)];
        let s = random_cq_state(&regs, r.random_range(1..=4), &mut r).unwrap();
        let labels = TripartiteLabels {
            a1: names(&["A1"]), a2: names(&["A2"]),
            b1: names(&["B1"]), b2: names(&["B2"]),
            c1: names(&["C1"]), c2: names(&["C2"]),
            conditioning: Conditioning::e(),
        };
        let tri = chain_rule_residual_tripartite(&s, &labels).unwrap();
        prop_assert!(tri <= 1e-9);
        let blocks = vec![
            (names(&["A1"]), names(&["A2"])),
            (names(&["B1"]), names(&["B2"])),
            (names(&["C1"]), names(&["C2"])),
        ];
        let multi = chain_rule_residual_multipartite(&s, &blocks, &Conditioning::e()).unwrap();
        prop_assert!((multi - tri).abs() <= 1e-12);
        let part = RegisterPartition::new(
            vec![names(&["A1", "A2"]), names(&["B1", "B2"]), names(&["C1", "C2"])],
            Conditioning::e(),
        )
        .unwrap();
        prop_assert!(chain_rule_telescope(&s, &part).unwrap() <= 1e-9);
    }

    #[test]
    fn continuity_bound_dominates(seed in any::<u64>(), t in 0.0..=1.0f64) {
        let mut r = rng(seed);
        let regs = [("A", 2), ("B", 2), ("C", 2)];
        let e_dim = 2;
        let s = random_cq_state(&regs, e_dim, &mut r).unwrap();
        let n = random_cq_state(&regs, e_dim, &mut r).unwrap();
        // σ = (1−t)ρ + tν, assembled entry by entry
        let mixed = blend(&s, &n, t);
        let eps = cq_trace_distance(&s, &mixed).unwrap();
        let part = RegisterPartition::new(vec![names(&["A"]), names(&["B"]), names(&["C"])], Conditioning::e()).unwrap();
        let d = (conditional_total_correlation(&s, &part).unwrap()
            - conditional_total_correlation(&mixed, &part).unwrap())
        .abs();
        prop_assert!(d <= continuity_bound(eps.min(1.0), 4, 3).unwrap() + 1e-9);
    }

    #[test]
    fn chsh_and_parity_chsh_agree_for_two_parties(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_quantum_correlation(&[2, 2], &[2, 2], &[2, 2], &mut r).unwrap();
        let w = parity_chsh_win_probability(&p).unwrap();
        prop_assert!((w - (0.5 + chsh_value(&p).unwrap() / 8.0)).abs() < 1e-9);
    }

    #[test]
    fn relabeling_both_key_outputs_keeps_s(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_quantum_correlation(&[2, 2, 2], &[2, 2, 2], &[2, 2, 2], &mut r).unwrap();
        let flipped = Correlation::from_fn(vec![2, 2, 2], vec![2, 2, 2], |a, x| {
            p.prob(&[1 - a[0], 1 - a[1], a[2]], x)
        })
        .unwrap();
        let g = GameSpec::parity_chsh(3).unwrap();
        prop_assert!((g.win_probability(&p).unwrap() - g.win_probability(&flipped).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn flag_extension_identity(seed in any::<u64>(), lambda in 0.0..=1.0f64) {
        let mut r = rng(seed);
        let t = random_quantum_correlation(&[2, 2, 2], &[2, 2, 2], &[2, 2, 2], &mut r).unwrap();
        let u = random_quantum_correlation(&[2, 2, 2], &[2, 2, 2], &[2, 2, 2], &mut r).unwrap();
        let q = uniform_inputs(&t);
        let xs = names(&["X1", "X2", "X3"]);
        let groups = vec![names(&["A1"]), names(&["A2"]), names(&["A3"])];
        let flag = RegisterPartition::new(groups.clone(), Conditioning::e_and(xs.clone())).unwrap();
        let plain = RegisterPartition::new(groups, Conditioning::classical(xs)).unwrap();
        let v = conditional_total_correlation(&flag_extension(&t, &u, lambda, &q).unwrap(), &flag).unwrap();
        let it = conditional_total_correlation(&embed_cq(&t, &q, None).unwrap(), &plain).unwrap();
        let iu = conditional_total_correlation(&embed_cq(&u, &q, None).unwrap(), &plain).unwrap();
        prop_assert!((v - (lambda * it + (1.0 - lambda) * iu)).abs() < 1e-10);
    }

    #[test]
    fn additivity_on_products(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = random_cq_state(&[("A", 2), ("B", 2), ("C", 2)], 2, &mut r).unwrap();
        let t = random_cq_state(&[("A", 2), ("B", 2), ("C", 2)], 2, &mut r).unwrap();
        let joint = s.rename_registers("1").product(&t.rename_registers("2")).unwrap();
        let part = |suffix: &str| {
            RegisterPartition::new(
                ["A", "B", "C"].iter().map(|n| vec![format!("{n}{suffix}")]).collect(),
                Conditioning::e(),
            )
            .unwrap()
        };
        let pair = RegisterPartition::new(
            ["A", "B", "C"].iter().map(|n| vec![format!("{n}1"), format!("{n}2")]).collect(),
            Conditioning::e(),
        )
        .unwrap();
        let lhs = conditional_total_correlation(&joint, &pair).unwrap();
        let rhs = conditional_total_correlation(&s, &part("")).unwrap()
            + conditional_total_correlation(&t, &part("")).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-9);
        let one = conditional_total_correlation(&joint, &part("1")).unwrap();
        prop_assert!((one - conditional_total_correlation(&s, &part("")).unwrap()).abs() < 1e-9);
    }
}

/// (1−t)·s + t·n over the union of their classical values.
fn blend(s: &dicka_core::CqState, n: &dicka_core::CqState, t: f64) -> dicka_core::CqState {
    use dicka_core::correlations::CqEntry;
    use std::collections::BTreeMap;
    let mut acc: BTreeMap<Vec<usize>, dicka_core::ComplexMatrix> = BTreeMap::new();
    for (st, w) in [(s, 1.0 - t), (n, t)] {
        for e in st.entries() {
            let m = e.e_state.matrix().scale(w * e.weight);
            acc.entry(e.values.clone())
                .and_modify(|a| *a = &*a + &m)
                .or_insert(m);
        }
    }
    let entries = acc
        .into_iter()
        .filter_map(|(values, m)| {
            let weight = m.trace().re;
            (weight > 0.0).then(|| CqEntry {
                values,
                weight,
                e_state: DensityMatrix::from_noisy(m, vec![s.e_dim()]).unwrap(),
            })
        })
        .collect();
    dicka_core::CqState::new(s.registers().to_vec(), entries, s.e_dim()).unwrap()
}
