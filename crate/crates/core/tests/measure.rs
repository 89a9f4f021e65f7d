use occupied::measure::{cyl_norm, parabolic_norm, project, projection_gap, q, theta_coercive};
use occupied::{OccupationMeasure, ParabolicPoint, SeparatingFamily};
use proptest::prelude::*;

fn measure_strategy(dim: usize, max_atoms: usize) -> impl Strategy<Value = OccupationMeasure> {
    prop::collection::vec((prop::collection::vec(-3.0..3.0f64, dim), 0.0..0.5f64), 1..=max_atoms).prop_map(move |atoms| {
        OccupationMeasure::from_particles(dim, atoms.iter().map(|(x, w)| (x.as_slice(), *w))).unwrap()
    })
}

fn family(dim: usize) -> SeparatingFamily {
    SeparatingFamily::new(dim, 0.25, 256).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cylindrical_norm_is_dominated_by_mass(o in (1usize..=3).prop_flat_map(|d| measure_strategy(d, 12))) {
        let fam = family(o.dim());
        let empty = OccupationMeasure::new(o.dim()).unwrap();
        let n = cyl_norm(&o, &empty, &fam, fam.k_max()).unwrap();
        prop_assert!(n.value <= o.total_mass() * (1.0 + 1e-12), "{} > {}", n.value, o.total_mass());
    }

    #[test]
    fn truncation_envelope(o in measure_strategy(2, 8), o2 in measure_strategy(2, 8), k in 0usize..64, step in 1usize..128) {
        let fam = family(2);
        let k2 = (k + step).min(fam.k_max());
        let a = cyl_norm(&o, &o2, &fam, k).unwrap();
        let b = cyl_norm(&o, &o2, &fam, k2).unwrap();
        prop_assert!(b.value >= a.value - 1e-14);
        prop_assert!(b.value <= a.value + a.tail_bound + 1e-12);
    }

    #[test]
    fn projection_is_linear(o in measure_strategy(2, 6), o2 in measure_strategy(2, 6), k in 1usize..200) {
        let fam = family(2);
        let sum = project(&o.sum(&o2).unwrap(), &fam, k).unwrap();
        let a = project(&o, &fam, k).unwrap();
        let b = project(&o2, &fam, k).unwrap();
        prop_assert_eq!(sum.len(), k);
        for i in 0..k {
            let scale = 1.0 + a[i].abs() + b[i].abs();
            prop_assert!((sum[i] - a[i] - b[i]).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn projection_gap_is_a_decreasing_tail(o in measure_strategy(1, 6), o2 in measure_strategy(1, 6)) {
        let fam = family(1);
        let mut prev = f64::INFINITY;
        for k in [0, 1, 3, 7, 15, 31, 63, 127, 255, 256] {
            let gap = projection_gap(&o, &o2, &fam, k).unwrap();
            prop_assert!(gap >= 0.0 && gap <= prev);
            let bound = fam.tail_sup_sq(k) * (o.total_mass() + o2.total_mass()).powi(2);
            prop_assert!(gap <= bound * (1.0 + 1e-12) + 1e-300);
            prev = gap;
        }
        prop_assert_eq!(projection_gap(&o, &o2, &fam, fam.k_max()).unwrap(), 0.0);
    }

    #[test]
    fn parabolic_norm_is_a_metric(o in measure_strategy(1, 4), o2 in measure_strategy(1, 4), x in -2.0..2.0f64, y in -2.0..2.0f64) {
        let fam = family(1);
        let p = ParabolicPoint::new(o, vec![x]).unwrap();
        let p2 = ParabolicPoint::new(o2, vec![y]).unwrap();
        let d = parabolic_norm(&p, &p2, &fam, 64).unwrap();
        prop_assert!((d - parabolic_norm(&p2, &p, &fam, 64).unwrap()).abs() < 1e-14);
        prop_assert!(d >= (x - y).abs() - 1e-15);
        prop_assert_eq!(parabolic_norm(&p, &p, &fam, 64).unwrap(), 0.0);
    }
}

#[test]
fn distinct_atoms_are_separated() {
    for dim in 1..=3 {
        let fam = SeparatingFamily::with_defaults(dim).unwrap();
        for (i, offset) in [0.01, 0.05, 0.5, 2.0].into_iter().enumerate() {
            let x: Vec<f64> = (0..dim).map(|j| 0.3 * (i + j) as f64 - 0.4).collect();
            let mut y = x.clone();
            y[dim - 1] += offset;
            let a = OccupationMeasure::dirac(&x, 1.0).unwrap();
            let b = OccupationMeasure::dirac(&y, 1.0).unwrap();
            let n = cyl_norm(&a, &b, &fam, fam.k_max()).unwrap();
            assert!(n.value > 0.0, "d={dim} offset={offset}");
        }
    }
}

#[test]
fn family_is_normalized_in_c1() {
    for dim in 1..=3 {
        for &(c0, k_max) in &[(0.25, 4096), (0.5, 100), (0.9, 16)] {
            let fam = SeparatingFamily::new(dim, c0, k_max).unwrap();
            let total: f64 = (0..=k_max).map(|k| fam.c1_norm(k).powi(2)).sum();
            assert!(total <= 1.0 + 1e-12, "d={dim} c0={c0}: {total}");
            assert!((total - fam.c1_norm_sq_sum()).abs() < 1e-12);
            for k in (0..=k_max).step_by(k_max / 8 + 1) {
                assert!(fam.sup_norm(k) <= fam.c1_norm(k));
            }
        }
    }
}

#[test]
fn coercivity_derivatives_match_second_order_differences() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let h = 1e-3;
    for _ in 0..100 {
        let dim = rng.random_range(1..=3);
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let atom: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let o = OccupationMeasure::dirac(&atom, rng.random_range(0.0..1.0)).unwrap();
        let p = ParabolicPoint::new(o.clone(), x.clone()).unwrap();
        let jet = theta_coercive(&p);
        let value = |x: &[f64]| o.pair(q) + q(x);
        assert!((jet.value - value(&x)).abs() < 1e-14);
        // d_o is exact: adding h delta_x raises the value by h q(x).
        let bumped = o.with_atom(&x, h).unwrap().pair(q) + q(&x);
        assert!(((bumped - jet.value) / h - jet.d_o).abs() < 1e-9);
        for i in 0..dim {
            let mut up = x.clone();
            let mut dn = x.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (value(&up) - value(&dn)) / (2.0 * h);
            assert!((fd - jet.grad[i]).abs() < 1e-6, "gradient {i}");
            for j in 0..dim {
                let shift = |si: f64, sj: f64| {
                    let mut z = x.clone();
                    z[i] += si * h;
                    z[j] += sj * h;
                    value(&z)
                };
                let fd = (shift(1.0, 1.0) - shift(1.0, -1.0) - shift(-1.0, 1.0) + shift(-1.0, -1.0)) / (4.0 * h * h);
                assert!((fd - jet.hess[(i, j)]).abs() < 1e-5, "hessian {i}{j}: {fd} vs {}", jet.hess[(i, j)]);
            }
        }
    }
}

#[test]
fn csv_round_trip() {
    let o = OccupationMeasure::from_particles(2, [([0.1, -0.2].as_slice(), 0.3), ([1.5, 2.0].as_slice(), 0.7)]).unwrap();
    let mut buf = Vec::new();
    o.write_csv(&mut buf).unwrap();
    let back = OccupationMeasure::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back, o);
}

#[test]
fn invalid_measures_are_rejected() {
    let mut o = OccupationMeasure::new(2).unwrap();
    assert!(o.push(&[0.0], 1.0).is_err());
    assert!(o.push(&[0.0, 0.0], -1.0).is_err());
    assert!(o.push(&[f64::NAN, 0.0], 1.0).is_err());
    assert!(ParabolicPoint::new(o, vec![0.0]).is_err());
    assert!(SeparatingFamily::new(0, 0.25, 10).is_err());
    assert!(SeparatingFamily::new(1, 1.0, 10).is_err());
}
