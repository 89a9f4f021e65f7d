//! Cylindrical and parabolic norms, and the finite-dimensional projections.

use super::{MeasureError, OccupationMeasure, ParabolicPoint, SeparatingFamily};

/// A truncated cylindrical norm together with a closed-form bound on the
/// contribution of the omitted members.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylNorm {
    pub value: f64,
    pub tail_bound: f64,
}

/// Differences `(o+ - o-)(f_k)` for `k = 0..=k`.
fn coordinate_gaps(
    plus: &OccupationMeasure,
    minus: &OccupationMeasure,
    family: &SeparatingFamily,
    k: usize,
) -> Result<Vec<f64>, MeasureError> {
    let a = family.pairings(plus, k)?;
    let b = family.pairings(minus, k)?;
    Ok(a.iter().zip(&b).map(|(x, y)| x - y).collect())
}

/// Cylindrical norm of the signed measure `plus - minus`, truncated to the
/// members `f_0..=f_k`.
///
/// `tail_bound = (sum_{m > k} ||f_m||_inf^2)^(1/2) (|plus| + |minus|)`
/// dominates the norm of the omitted coordinates.
pub fn cyl_norm(
    plus: &OccupationMeasure,
    minus: &OccupationMeasure,
    family: &SeparatingFamily,
    k: usize,
) -> Result<CylNorm, MeasureError> {
    let gaps = coordinate_gaps(plus, minus, family, k)?;
    let value = gaps.iter().map(|g| g * g).sum::<f64>().sqrt();
    let tail_bound = family.tail_sup_sq(k).sqrt() * (plus.total_mass() + minus.total_mass());
    Ok(CylNorm { value, tail_bound })
}

/// `rho(o - o', x - x') = sqrt(cyl^2 + |x - x'|^2)` with the cylindrical
/// part truncated at `k`.
pub fn parabolic_norm(
    p: &ParabolicPoint,
    p_other: &ParabolicPoint,
    family: &SeparatingFamily,
    k: usize,
) -> Result<f64, MeasureError> {
    if p.dim() != p_other.dim() {
        return Err(MeasureError::DimensionMismatch { expected: p.dim(), found: p_other.dim() });
    }
    let cyl = cyl_norm(&p.measure, &p_other.measure, family, k)?.value;
    let dx2: f64 = p.x.iter().zip(&p_other.x).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((cyl * cyl + dx2).sqrt())
}

/// `pi_K(o) = (o(f_1), .., o(f_K))`.
pub fn project(o: &OccupationMeasure, family: &SeparatingFamily, k: usize) -> Result<Vec<f64>, MeasureError> {
    let mut all = family.pairings(o, k)?;
    all.remove(0);
    Ok(all)
}

/// The squared cylindrical distance lost by projecting onto the first `k`
/// coordinates: `sum_{k < m <= K_max} |(o - o')(f_m)|^2`.
///
/// Nonnegative, zero at `k = K_max`, nonincreasing in `k`, and bounded by
/// `sum_{m > k} ||f_m||_inf^2 (|o| + |o'|)^2`.
pub fn projection_gap(
    o: &OccupationMeasure,
    o_other: &OccupationMeasure,
    family: &SeparatingFamily,
    k: usize,
) -> Result<f64, MeasureError> {
    family.check_k(k)?;
    let gaps = coordinate_gaps(o, o_other, family, family.k_max())?;
    Ok(gaps[k + 1..].iter().map(|g| g * g).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn family1() -> SeparatingFamily {
        SeparatingFamily::with_defaults(1).unwrap()
    }

    fn atoms(points: &[(f64, f64)]) -> OccupationMeasure {
        let mut o = OccupationMeasure::new(1).unwrap();
        for &(x, w) in points {
            o.push(&[x], w).unwrap();
        }
        o
    }

    /// Term-by-term summation straight from the member definitions.
    fn cyl_oracle(plus: &OccupationMeasure, minus: &OccupationMeasure, fam: &SeparatingFamily, k: usize) -> f64 {
        let mut s = 0.0;
        for m in 0..=k {
            let a: f64 = plus.particles().map(|(x, w)| w * fam.member(m, x)).sum();
            let b: f64 = minus.particles().map(|(x, w)| w * fam.member(m, x)).sum();
            s += (a - b).powi(2);
        }
        s.sqrt()
    }

    #[test]
    fn identical_measures_have_zero_norm() {
        let fam = family1();
        let o = atoms(&[(0.3, 0.5), (-1.0, 0.2)]);
        for k in [0, 1, 64, 4096] {
            assert_eq!(cyl_norm(&o, &o, &fam, k).unwrap().value, 0.0);
        }
    }

    #[test]
    fn unit_mass_norm_is_at_most_one() {
        let fam = family1();
        let o = atoms(&[(0.7, 1.0)]);
        let empty = OccupationMeasure::new(1).unwrap();
        let n = cyl_norm(&o, &empty, &fam, 4096).unwrap();
        assert!(n.value <= 1.0);
        assert!(n.value > 0.0);
    }

    #[test]
    fn close_atoms_match_term_by_term_oracle() {
        let fam = family1();
        let a = atoms(&[(0.0, 1.0)]);
        let b = atoms(&[(0.1, 1.0)]);
        let v64 = cyl_norm(&a, &b, &fam, 64).unwrap();
        assert!(v64.value > 0.0);
        let oracle64 = cyl_oracle(&a, &b, &fam, 64);
        assert!((v64.value - oracle64).abs() <= 1e-14 * oracle64.max(1e-300));
        let full = cyl_oracle(&a, &b, &fam, 4096);
        assert!(full >= v64.value);
        assert!(full <= v64.value + v64.tail_bound);
    }

    #[test]
    fn parabolic_norm_examples() {
        let fam = SeparatingFamily::with_defaults(2).unwrap();
        let m = OccupationMeasure::dirac(&[1.0, 1.0], 0.5).unwrap();
        let p = ParabolicPoint::new(m.clone(), vec![0.0, 0.0]).unwrap();
        let q = ParabolicPoint::new(m, vec![3.0, 4.0]).unwrap();
        assert_eq!(parabolic_norm(&p, &p, &fam, 64).unwrap(), 0.0);
        assert!((parabolic_norm(&p, &q, &fam, 64).unwrap() - 5.0).abs() < 1e-15);

        let fam1 = family1();
        let a = ParabolicPoint::new(atoms(&[(0.0, 1.0)]), vec![0.2]).unwrap();
        let b = ParabolicPoint::new(atoms(&[(0.5, 1.0)]), vec![-0.1]).unwrap();
        let cyl = cyl_oracle(&a.measure, &b.measure, &fam1, 64);
        let expected = (cyl * cyl + 0.09).sqrt();
        assert!((parabolic_norm(&a, &b, &fam1, 64).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn projection_of_unit_atom_uses_closed_forms() {
        let fam = family1();
        let z = project(&atoms(&[(0.0, 1.0)]), &fam, 3).unwrap();
        // xi_0 = 1, xi_1 = 0.5: members a_0 cos 0, a_0 sin 0, a_1 cos 0
        let a0 = 0.25 / 2.0;
        let a1 = 0.125 / 1.5;
        assert_eq!(z.len(), 3);
        assert!((z[0] - a0).abs() < 1e-16);
        assert_eq!(z[1], 0.0);
        assert!((z[2] - a1).abs() < 1e-16);
        let empty = OccupationMeasure::new(1).unwrap();
        assert!(project(&empty, &fam, 10).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn truncation_beyond_family_is_rejected() {
        let fam = SeparatingFamily::new(1, 0.25, 16).unwrap();
        let o = atoms(&[(0.0, 1.0)]);
        assert!(matches!(project(&o, &fam, 17), Err(MeasureError::TruncationTooLarge { .. })));
        assert!(projection_gap(&o, &o, &fam, 17).is_err());
    }

    #[test]
    fn projection_gap_edge_cases() {
        let fam = SeparatingFamily::new(1, 0.25, 256).unwrap();
        let a = atoms(&[(0.0, 0.6)]);
        let b = atoms(&[(1.3, 0.4)]);
        assert_eq!(projection_gap(&a, &a, &fam, 3).unwrap(), 0.0);
        assert_eq!(projection_gap(&a, &b, &fam, 256).unwrap(), 0.0);
        let gaps: Vec<f64> = (0..=256).map(|k| projection_gap(&a, &b, &fam, k).unwrap()).collect();
        assert!(gaps[1] > 0.0);
        for w in gaps.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn distinct_nearby_atoms_are_separated() {
        for dim in 1..=3 {
            let fam = SeparatingFamily::with_defaults(dim).unwrap();
            let x0 = vec![0.0; dim];
            let mut x1 = vec![0.0; dim];
            x1[dim - 1] = 0.01;
            let a = OccupationMeasure::dirac(&x0, 1.0).unwrap();
            let b = OccupationMeasure::dirac(&x1, 1.0).unwrap();
            assert!(cyl_norm(&a, &b, &fam, 4096).unwrap().value > 0.0, "dim {dim}");
        }
    }

    fn measure_strategy() -> impl Strategy<Value = OccupationMeasure> {
        prop::collection::vec((-3.0f64..3.0, 0.0f64..1.0), 0..12).prop_map(|pts| atoms(&pts))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn cyl_norm_bounded_by_total_mass(o in measure_strategy()) {
            let fam = SeparatingFamily::new(1, 0.25, 512).unwrap();
            let empty = OccupationMeasure::new(1).unwrap();
            let n = cyl_norm(&o, &empty, &fam, 512).unwrap();
            prop_assert!(n.value <= o.total_mass() * (1.0 + 1e-12));
        }

        #[test]
        fn cyl_norm_monotone_with_valid_envelope(a in measure_strategy(), b in measure_strategy(), k in 0usize..64) {
            let fam = SeparatingFamily::new(1, 0.25, 128).unwrap();
            let lo = cyl_norm(&a, &b, &fam, k).unwrap();
            for k2 in [k + 1, k + 7, 128] {
                let hi = cyl_norm(&a, &b, &fam, k2).unwrap();
                prop_assert!(hi.value >= lo.value);
                prop_assert!(hi.value <= lo.value + lo.tail_bound + 1e-15);
            }
        }

        #[test]
        fn projection_is_linear(a in measure_strategy(), b in measure_strategy()) {
            let fam = SeparatingFamily::new(1, 0.25, 32).unwrap();
            let s = project(&a.sum(&b).unwrap(), &fam, 32).unwrap();
            let pa = project(&a, &fam, 32).unwrap();
            let pb = project(&b, &fam, 32).unwrap();
            for i in 0..32 {
                prop_assert!((s[i] - pa[i] - pb[i]).abs() <= 1e-14 * (1.0 + s[i].abs()));
            }
        }

        #[test]
        fn projection_inside_mass_ball(o in measure_strategy()) {
            let fam = SeparatingFamily::new(1, 0.25, 64).unwrap();
            let z = project(&o, &fam, 64).unwrap();
            let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            let empty = OccupationMeasure::new(1).unwrap();
            let rho = cyl_norm(&o, &empty, &fam, 64).unwrap().value;
            prop_assert!(norm <= rho + 1e-15);
            prop_assert!(rho <= o.total_mass() + 1e-15);
        }
    }
}
