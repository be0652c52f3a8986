use proptest::prelude::*;

use tnlab::spin::{
    bottom_layer_sum, classify_config, config_amplitude, exact_partition_function, f_table, g_table, mc_second_moment,
    two_layer_partition_function, two_layer_site_weight, ConfigClass, IsingCouplings,
    Spin::{self, Down as D, Up as U},
    SpinConfig, TableKind, WeightTable,
};
use tnlab::state::LatticeSpec;
use tnlab::Error;

const GRID: [usize; 3] = [2, 3, 4];

#[test]
fn f_table_reference_values() {
    let f = f_table(2, 2).unwrap();
    assert_eq!(f.get(D, D, D), 1.0);
    assert_eq!(f.get(U, D, D), 0.0);
    assert!((f.get(U, U, U) - 30.0 / 63.0).abs() < 1e-15);
}

#[test]
fn f_table_symmetries_and_range() {
    for bd in GRID {
        for pd in GRID {
            let f = f_table(bd, pd).unwrap();
            assert_eq!(f.get(D, D, U), f.get(D, U, D));
            assert_eq!(f.get(U, D, U), f.get(U, U, D));
            assert!(f.entries().iter().all(|&v| (0.0..=1.0).contains(&v)));
            for ((s1, s2, s3), v) in f.iter() {
                if s1 == U || s1 != s2 || s1 != s3 {
                    assert!(v < 1.0, "f({s1:?},{s2:?},{s3:?}) = {v}");
                }
            }
        }
    }
}

#[test]
fn g_table_reference_values() {
    let g = g_table(2, 2).unwrap();
    assert!((g.get(D, D, D) - 15.5 / 63.0).abs() < 1e-15);
    assert!(2.0 * g.get(D, D, D) < 1.0);
    for bd in GRID {
        for pd in GRID {
            let g = g_table(bd, pd).unwrap();
            assert!((g.get(D, D, D) - g.get(U, U, U)).abs() < 1e-15);
            assert!((g.get(D, D, U) - g.get(U, D, U)).abs() < 1e-15);
            assert!((g.get(D, D, U) - g.get(D, U, D)).abs() < 1e-15);
            assert!((g.get(U, D, D) - g.get(D, U, U)).abs() < 1e-15);
            let max = g.entries().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(max, g.get(D, D, D));
        }
    }
}

#[test]
fn two_layer_weights_reduce_to_tables() {
    for bd in [2, 3] {
        for pd in [2, 3] {
            for kind in [TableKind::NormF, TableKind::GlobalG] {
                let c = IsingCouplings::new(kind, bd, pd).unwrap();
                assert!((c.j2.re - ((bd * bd * pd) as f64).ln()).abs() < 1e-15);
                assert_eq!(c.j2.im, std::f64::consts::PI);
                for a in Spin::BOTH {
                    for b in Spin::BOTH {
                        for x in Spin::BOTH {
                            for y in Spin::BOTH {
                                let w = two_layer_site_weight(&c, a, b, x, y);
                                assert!(w.re.is_finite() && w.im.is_finite() && w.norm() > 0.0);
                            }
                        }
                    }
                }
            }
            let c = IsingCouplings::new(TableKind::NormF, bd, pd).unwrap();
            assert!((bottom_layer_sum(&c, D, D, D).re - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn amplitude_examples() {
    let f = f_table(2, 2).unwrap();
    assert_eq!(config_amplitude(&SpinConfig::all_down(3, 3), &f), 1.0);
    let isolated = SpinConfig::from_cells(3, 3, &[(1, 1)]);
    assert_eq!(config_amplitude(&isolated, &f), 0.0);
    let row = SpinConfig::from_cells(3, 3, &[(0, 0), (0, 1), (0, 2)]);
    let hand = f.get(U, U, D).powi(3) * f.get(D, D, U).powi(3);
    assert!((config_amplitude(&row, &f) - hand).abs() < 1e-15);
    assert!((hand - f.get(U, D, U).powi(3) * f.get(D, U, D).powi(3)).abs() < 1e-15);
}

#[test]
fn classification_examples() {
    assert_eq!(classify_config(&SpinConfig::all_down(3, 3)), ConfigClass::Ground);
    assert_eq!(classify_config(&SpinConfig::from_cells(3, 3, &[(2, 1)])), ConfigClass::Zero);
    let column = SpinConfig::from_cells(3, 3, &[(0, 1), (1, 1), (2, 1)]);
    assert_eq!(classify_config(&column), ConfigClass::Valid);
    assert_eq!(classify_config(&SpinConfig::all_up(3, 3)), ConfigClass::Valid);
}

#[test]
fn partition_function_examples() {
    let f = f_table(2, 2).unwrap();
    let z22 = exact_partition_function(2, 2, &f).unwrap();
    let z33 = exact_partition_function(3, 3, &f).unwrap();
    assert!(z22.z >= 1.0 && z33.z >= 1.0);
    assert!(z33.z - 1.0 < z22.z - 1.0);
    assert!((z22.z_minus_ground - (z22.z - 1.0)).abs() < 1e-15);
    let a = exact_partition_function(2, 3, &f).unwrap().z;
    let b = exact_partition_function(3, 2, &f).unwrap().z;
    assert!((a - b).abs() < 1e-14);
}

#[test]
fn two_layer_sum_matches_upper_layer_sum() {
    for bd in [2, 3] {
        for pd in [2, 3] {
            for (kind, table) in
                [(TableKind::NormF, f_table(bd, pd).unwrap()), (TableKind::GlobalG, g_table(bd, pd).unwrap())]
            {
                let c = IsingCouplings::new(kind, bd, pd).unwrap();
                for (r, cols) in [(2, 2), (2, 3)] {
                    let two = two_layer_partition_function(r, cols, &c).unwrap();
                    let one = exact_partition_function(r, cols, &table).unwrap().z;
                    assert!((two - one).abs() < 1e-10 * one.abs().max(1.0), "{kind:?} D={bd} d={pd} {r}x{cols}");
                }
            }
        }
    }
}

#[test]
fn monte_carlo_second_moment_brackets_one() {
    let m = mc_second_moment(LatticeSpec::new(2, 2, 2, 2).unwrap(), 3000, 31).unwrap();
    assert!(m.second_moment >= 1.0 - 3.0 * m.se_second_moment);
    let var = m.second_moment - m.mean_norm * m.mean_norm;
    assert!(var >= -3.0 * m.se_second_moment);
    let z = exact_partition_function(2, 2, &f_table(2, 2).unwrap()).unwrap().z;
    assert!((m.second_moment - z).abs() <= 3.0 * m.se_second_moment);
}

#[test]
fn global_table_sum_is_below_theorem_shape() {
    for l in 2..=4usize {
        let g = g_table(2, 2).unwrap();
        let z = exact_partition_function(l, l, &g).unwrap().z;
        let v = (l * l) as i32;
        let shape = 2f64.powi(v) * g.get(D, D, D).powi(v - 1);
        assert!(z <= shape, "L={l}: {z} > {shape}");
    }
}

#[test]
fn oversized_lattices_are_refused() {
    let f = f_table(2, 2).unwrap();
    assert!(matches!(exact_partition_function(5, 6, &f), Err(Error::ResourceLimit(_))));
    let c = IsingCouplings::new(TableKind::NormF, 2, 2).unwrap();
    assert!(matches!(two_layer_partition_function(3, 4, &c), Err(Error::ResourceLimit(_))));
    assert!(f_table(1, 2).is_err());
}

#[test]
fn table_json_roundtrip() {
    let f = f_table(3, 2).unwrap();
    let back: WeightTable = serde_json::from_str(&f.to_json().unwrap()).unwrap();
    assert_eq!(back, f);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn amplitude_vanishes_exactly_on_zero_class(rows in 2usize..6, cols in 2usize..6, bits in any::<u64>()) {
        let bits = bits & ((1u64 << (rows * cols)) - 1);
        let c = SpinConfig::from_bits(rows, cols, bits);
        let f = f_table(2, 2).unwrap();
        let a = config_amplitude(&c, &f);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert_eq!(a == 0.0, classify_config(&c) == ConfigClass::Zero);
    }
}
