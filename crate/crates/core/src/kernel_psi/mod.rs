//! Radial kernels, robust score functions and the kernel moment constants
//! that enter the asymptotic variance.

mod kernel;
mod psi;

pub use kernel::{KernelFamily, KernelSpec};
pub use psi::{PsiSpec, DEFAULT_HUBER_C};

#[cfg(test)]
mod property_tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const BOUNDED: [KernelFamily; 3] = [
        KernelFamily::Indicator,
        KernelFamily::Epanechnikov,
        KernelFamily::Triweight,
    ];

    const ALL_PSI: [PsiSpec; 3] = [
        PsiSpec::Identity,
        PsiSpec::AlgebraicSigmoid,
        PsiSpec::Huber { c: 1.345 },
    ];

    // midpoint rule on [0, upper] with `panels` panels
    fn midpoint_moment(k: &KernelSpec, j: u32, upper: f64, panels: usize) -> f64 {
        let d = k.dim() as i32;
        let h = upper / panels as f64;
        (0..panels)
            .map(|i| {
                let u = (i as f64 + 0.5) * h;
                k.profile(u).powi(j as i32) * u.powi(d - 1)
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn moments_match_midpoint_quadrature() {
        for family in BOUNDED {
            for d in 1..=3 {
                let k = KernelSpec::new(family, d).unwrap();
                for j in 1..=3 {
                    let exact = k.moment(j);
                    let quad = midpoint_moment(&k, j, 1.0, 1_000_000);
                    // indicator has a jump at 1; midpoint handles it exactly
                    assert!(
                        ((exact - quad) / exact).abs() < 1e-9,
                        "{family} d={d} j={j}: {exact} vs {quad}"
                    );
                }
            }
        }
        for d in 1..=3 {
            let k = KernelSpec::new(KernelFamily::Gaussian, d).unwrap();
            for j in 1..=3 {
                let exact = k.moment(j);
                let quad = midpoint_moment(&k, j, 40.0, 4_000_000);
                assert!(
                    ((exact - quad) / exact).abs() < 1e-9,
                    "gaussian d={d} j={j}"
                );
            }
        }
    }

    #[test]
    fn epanechnikov_first_moment_d1() {
        let k = KernelSpec::new(KernelFamily::Epanechnikov, 1).unwrap();
        let quad = midpoint_moment(&k, 1, 1.0, 1_000_000);
        assert!((k.moment(1) - quad).abs() < 1e-12);
        assert!((k.moment(1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bounded_moments_respect_one_over_d() {
        for family in BOUNDED {
            for d in 1..=3 {
                let k = KernelSpec::new(family, d).unwrap();
                for j in 1..=3 {
                    assert!(
                        k.moment(j) <= 1.0 / d as f64 + 1e-12,
                        "{family} d={d} j={j}"
                    );
                }
            }
        }
    }

    #[test]
    fn kernels_integrate_to_one() {
        // d * V_d * int_0^inf k(r) r^{d-1} dr, V_1 = 2, V_2 = pi
        let volumes = [2.0, std::f64::consts::PI, 4.0 * std::f64::consts::PI / 3.0];
        for family in [
            KernelFamily::Epanechnikov,
            KernelFamily::Triweight,
            KernelFamily::Gaussian,
        ] {
            for d in 1..=3 {
                let k = KernelSpec::new(family, d).unwrap();
                let total = d as f64 * volumes[d - 1] * k.moment(1);
                assert!((total - 1.0).abs() < 1e-12, "{family} d={d}: {total}");
            }
        }
    }

    #[test]
    fn kernels_are_positive_at_origin_and_vanish_outside_support() {
        for family in BOUNDED {
            let k = KernelSpec::new(family, 2).unwrap();
            assert!(k.profile(0.0) > 0.0);
            assert_eq!(k.profile(1.0001), 0.0);
        }
        assert!(
            KernelSpec::new(KernelFamily::Gaussian, 1)
                .unwrap()
                .profile(0.0)
                > 0.0
        );
    }

    #[test]
    fn psi_derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let step = 1e-6;
        for psi in ALL_PSI {
            let mut checked = 0;
            while checked < 1000 {
                let u: f64 = rng.random_range(-6.0..6.0);
                if let PsiSpec::Huber { c } = psi {
                    if (u.abs() - c).abs() < 1e-3 {
                        continue;
                    }
                }
                let fd = (psi.eval(u + step) - psi.eval(u - step)) / (2.0 * step);
                assert!((fd - psi.derivative(u)).abs() < 1e-6, "{psi} at {u}");
                checked += 1;
            }
        }
    }

    fn random_rotation(rng: &mut ChaCha8Rng, d: usize) -> Vec<Vec<f64>> {
        // Gram-Schmidt on a random matrix
        let mut basis: Vec<Vec<f64>> = Vec::new();
        while basis.len() < d {
            let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
                v.iter_mut().zip(b).for_each(|(a, c)| *a -= dot * c);
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-6 {
                basis.push(v.into_iter().map(|a| a / norm).collect());
            }
        }
        basis
    }

    #[test]
    fn kernels_are_rotation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for family in [
            KernelFamily::Indicator,
            KernelFamily::Epanechnikov,
            KernelFamily::Triweight,
            KernelFamily::Gaussian,
        ] {
            for d in 2..=3 {
                let k = KernelSpec::new(family, d).unwrap();
                for _ in 0..200 {
                    let r = random_rotation(&mut rng, d);
                    let u: Vec<f64> = (0..d).map(|_| rng.random_range(-0.7..0.7)).collect();
                    let ru: Vec<f64> = r
                        .iter()
                        .map(|row| row.iter().zip(&u).map(|(a, b)| a * b).sum())
                        .collect();
                    let a = k.eval(&u).unwrap();
                    let b = k.eval(&ru).unwrap();
                    assert!((a - b).abs() <= 1e-12, "{family} d={d}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn psi_is_nondecreasing(mut a in -50.0f64..50.0, mut b in -50.0f64..50.0, c in 0.1f64..5.0) {
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            for psi in [PsiSpec::Identity, PsiSpec::AlgebraicSigmoid, PsiSpec::Huber { c }] {
                prop_assert!(psi.eval(a) <= psi.eval(b));
                prop_assert!(psi.derivative(a) >= 0.0);
            }
        }
    }
}
