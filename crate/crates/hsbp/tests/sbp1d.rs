use hsbp::sbp1d::{
    accurate_min_intervals, borrowing_constants, borrowing_min_intervals, build_first_derivative,
    build_first_derivative_with, min_intervals, Validation,
};
use hsbp::{Error, Exact, Sbp1d, Sbp1dExact, Sbp1dF32};
use nalgebra::DMatrix;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().min()
}

#[test]
fn exact_sbp_identity_all_orders() {
    for p in 1..=3 {
        for n in [min_intervals(p).unwrap(), 12, 24] {
            let ops: Sbp1dExact = build_first_derivative(p, n).unwrap();
            for i in 0..=n {
                for j in 0..=n {
                    let mut want = Exact::zero();
                    if i == j && i == 0 {
                        want = -Exact::one();
                    }
                    if i == j && i == n {
                        want = Exact::one();
                    }
                    let got = ops.q[(i, j)].clone() + ops.q[(j, i)].clone();
                    assert_eq!(got, want, "p={p} n={n} ({i},{j})");
                }
            }
            assert!(ops.hdiag.iter().all(|h| *h > Exact::zero()));
        }
    }
}

#[test]
fn exact_polynomial_accuracy() {
    // Rational grid points make exactness checks free of rounding.
    for p in 1..=3 {
        let n = accurate_min_intervals(p).unwrap() + 2;
        let ops: Sbp1dExact = build_first_derivative(p, n).unwrap();
        let nb = [0, 1, 4, 6][p];
        let r: Vec<Exact> = (0..=n)
            .map(|i| Exact::new((i as i64).into(), (n as i64).into()))
            .collect();
        for q in 0..=2 * p {
            let u: Vec<Exact> = r.iter().map(|x| num_traits::pow(x.clone(), q)).collect();
            let du: Vec<Exact> = r
                .iter()
                .map(|x| {
                    if q == 0 {
                        Exact::zero()
                    } else {
                        Exact::from_integer((q as i64).into()) * num_traits::pow(x.clone(), q - 1)
                    }
                })
                .collect();
            for i in 0..=n {
                let boundary = i < nb || i + nb > n;
                if boundary && q > p {
                    continue;
                }
                let mut s = Exact::zero();
                for j in 0..=n {
                    s += ops.d[(i, j)].clone() * u[j].clone();
                }
                assert_eq!(s, du[i], "p={p} q={q} row {i}");
            }
            if q <= p {
                let dot = |v: &[Exact]| {
                    v.iter()
                        .zip(&u)
                        .fold(Exact::zero(), |a, (x, y)| a + x.clone() * y.clone())
                };
                assert_eq!(dot(&ops.d0), du[0]);
                assert_eq!(dot(&ops.dn), du[n]);
            }
        }
    }
}

#[test]
fn second_order_example() {
    let ops: Sbp1d = build_first_derivative(1, 4).unwrap();
    let h = 0.25;
    let row: Vec<f64> = (0..5).map(|j| ops.d[(0, j)] * h).collect();
    assert_eq!(row, vec![-1.0, 1.0, 0.0, 0.0, 0.0]);
    assert_eq!(ops.hdiag, vec![h / 2.0, h, h, h, h / 2.0]);
    let r = grid(4);
    let dr = &ops.d * nalgebra::DVector::from_vec(r);
    assert!(dr.iter().all(|v| (v - 1.0).abs() < 1e-15));
}

#[test]
fn sixth_order_sbp_deviation() {
    let ops: Sbp1d = build_first_derivative(3, 12).unwrap();
    let mut s = &ops.q + ops.q.transpose();
    s[(0, 0)] += 1.0;
    s[(12, 12)] -= 1.0;
    assert!(s.amax() < 1e-13);
}

#[test]
fn validation_mode_passes() {
    for p in 1..=3 {
        for n in [min_intervals(p).unwrap(), 17, 40] {
            build_first_derivative_with::<f64>(p, n, Validation::Check).unwrap();
        }
    }
}

#[test]
fn integration_by_parts_random() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for p in 1..=3 {
        let n = 20;
        let ops: Sbp1d = build_first_derivative(p, n).unwrap();
        for _ in 0..100 {
            let u: Vec<f64> = (0..=n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..=n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let dv: Vec<f64> = (0..=n).map(|i| (0..=n).map(|j| ops.d[(i, j)] * v[j]).sum()).collect();
            let du: Vec<f64> = (0..=n).map(|i| (0..=n).map(|j| ops.d[(i, j)] * u[j]).sum()).collect();
            let lhs: f64 = (0..=n).map(|i| ops.hdiag[i] * (u[i] * dv[i] + du[i] * v[i])).sum();
            let rhs = u[n] * v[n] - u[0] * v[0];
            assert!((lhs - rhs).abs() < 1e-12, "p={p}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn second_derivative_identity_random() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for p in 1..=3 {
        let n = 24;
        let ops: Sbp1d = build_first_derivative(p, n).unwrap();
        for _ in 0..20 {
            let c: Vec<f64> = (0..=n).map(|_| rng.random_range(0.1..10.0)).collect();
            let u = nalgebra::DVector::from_fn(n + 1, |_, _| rng.random_range(-1.0..1.0));
            let v = nalgebra::DVector::from_fn(n + 1, |_, _| rng.random_range(-1.0..1.0));
            let op = ops.second_derivative(&c).unwrap();
            let d2v = &op.d2 * &v;
            let lhs: f64 = (0..=n).map(|i| u[i] * ops.hdiag[i] * d2v[i]).sum::<f64>()
                + u.dot(&(&op.a * &v));
            let d0v: f64 = (0..=n).map(|j| ops.d0[j] * v[j]).sum();
            let dnv: f64 = (0..=n).map(|j| ops.dn[j] * v[j]).sum();
            let rhs = c[n] * u[n] * dnv - c[0] * u[0] * d0v;
            let scale = op.a.amax();
            assert!((lhs - rhs).abs() < 1e-12 * scale, "p={p}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn second_derivative_polynomial_accuracy() {
    for p in 1..=3 {
        let n = 30;
        let ops: Sbp1d = build_first_derivative(p, n).unwrap();
        let r = grid(n);
        let c = vec![1.0; n + 1];
        let op = ops.second_derivative(&c).unwrap();
        let u = nalgebra::DVector::from_iterator(n + 1, r.iter().map(|x| x * x));
        let d2u = &op.d2 * &u;
        for i in 8..=n - 8 {
            assert!((d2u[i] - 2.0).abs() < 1e-9, "p={p} row {i}: {}", d2u[i]);
        }
        // Variable coefficient: (c u')' with c = 1 + r, u = r^q is exact for
        // q+1 within the boundary order.
        let c: Vec<f64> = r.iter().map(|x| 1.0 + x).collect();
        let op = ops.second_derivative(&c).unwrap();
        for q in 0..=p {
            let u = nalgebra::DVector::from_iterator(n + 1, r.iter().map(|x| x.powi(q as i32)));
            let d2u = &op.d2 * &u;
            for (i, x) in r.iter().enumerate() {
                let qf = q as f64;
                let want = if q == 0 {
                    0.0
                } else if q == 1 {
                    1.0
                } else {
                    qf * x.powi(q as i32 - 1) + qf * (qf - 1.0) * (1.0 + x) * x.powi(q as i32 - 2)
                };
                assert!((d2u[i] - want).abs() < 1e-7, "p={p} q={q} row {i}: {} vs {want}", d2u[i]);
            }
        }
    }
}

#[test]
fn second_derivative_boundary_order_at_accurate_minimum() {
    for p in 1..=3 {
        let n = accurate_min_intervals(p).unwrap();
        let ops: Sbp1dExact = build_first_derivative(p, n).unwrap();
        let r: Vec<Exact> = (0..=n)
            .map(|i| Exact::new((i as i64).into(), (n as i64).into()))
            .collect();
        let c = vec![Exact::one(); n + 1];
        let op = ops.second_derivative(&c).unwrap();
        for q in 0..=p + 1 {
            for i in 0..=n {
                let mut s = Exact::zero();
                for j in 0..=n {
                    s += op.d2[(i, j)].clone() * num_traits::pow(r[j].clone(), q);
                }
                let want = if q < 2 {
                    Exact::zero()
                } else {
                    Exact::from_integer(((q * (q - 1)) as i64).into())
                        * num_traits::pow(r[i].clone(), q - 2)
                };
                assert_eq!(s, want, "p={p} n={n} q={q} row {i}");
            }
        }
    }
}

#[test]
fn stiffness_and_remainder_definiteness() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for p in 1..=3 {
        for n in [12, 24] {
            let ops: Sbp1d = build_first_derivative(p, n).unwrap();
            for _ in 0..20 {
                let c: Vec<f64> = (0..=n).map(|_| rng.random_range(0.1..10.0)).collect();
                let a = ops.stiffness(&c).unwrap();
                assert!((&a - a.transpose()).amax() < 1e-12 * a.amax());
                let ones = nalgebra::DVector::from_element(n + 1, 1.0);
                assert!((&a * &ones).amax() < 1e-11 * a.amax());
                // A is semidefinite with null space span{1}; add the
                // projection onto 1 to test definiteness of the rest.
                let shifted = &a + DMatrix::from_element(n + 1, n + 1, 1.0);
                assert!(min_eig(&shifted) > 0.0, "p={p} n={n}");
                let r = ops.remainder_matrix(&c).unwrap();
                assert!(min_eig(&r) >= -1e-10 * r.amax(), "p={p} n={n}");
            }
        }
    }
}

#[test]
fn remainder_psd_spec_example() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let ops: Sbp1d = build_first_derivative(2, 12).unwrap();
    let c: Vec<f64> = (0..=12).map(|_| rng.random_range(0.1..10.0)).collect();
    let r = ops.remainder_matrix(&c).unwrap();
    assert!(min_eig(&r) >= -1e-10 * r.amax());
}

#[test]
fn stiffness_annihilates_constants_unit_c() {
    for p in 1..=3 {
        let n = 16;
        let ops: Sbp1dExact = build_first_derivative(p, n).unwrap();
        let a = ops.stiffness(&vec![Exact::one(); n + 1]).unwrap();
        for i in 0..=n {
            let s = (0..=n).fold(Exact::zero(), |acc, j| acc + a[(i, j)].clone());
            assert!(s.is_zero());
        }
    }
}

#[test]
fn coefficient_errors() {
    let ops: Sbp1d = build_first_derivative(1, 4).unwrap();
    assert!(matches!(
        ops.stiffness(&[1.0, 1.0, 0.0, 1.0, 1.0]),
        Err(Error::NonPositiveCoefficient { index: 2, .. })
    ));
    assert!(matches!(
        ops.stiffness(&[1.0; 3]),
        Err(Error::LengthMismatch { expected: 5, got: 3, .. })
    ));
}

#[test]
fn table_borrowing_constants() {
    let cases = [(1, 2, 0.363636363), (2, 4, 0.2505765857), (3, 6, 0.1878687080)];
    for (p, l, beta) in cases {
        let ops: Sbp1d = build_first_derivative(p, 20).unwrap();
        let b = borrowing_constants(p, &ops).unwrap();
        assert_eq!(b.l, l);
        assert_eq!(b.beta, beta);
        assert!(b.alpha > 0.0);
    }
    let ops: Sbp1d = build_first_derivative(1, 4).unwrap();
    assert_eq!(borrowing_constants(1, &ops).unwrap().alpha, 0.5);
    let ops4: Sbp1d = build_first_derivative(2, 20).unwrap();
    assert!((borrowing_constants(2, &ops4).unwrap().alpha - 17.0 / 48.0).abs() < 1e-15);
}

#[test]
fn table_beta_within_capacity() {
    // The stored β must not exceed what the operators can lend.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for p in 1..=3 {
        for n in [borrowing_min_intervals(p).unwrap(), 20, 41] {
            let ops: Sbp1d = build_first_derivative(p, n).unwrap();
            let b = borrowing_constants(p, &ops).unwrap();
            for trial in 0..10 {
                let c: Vec<f64> = if trial == 0 {
                    vec![1.0; n + 1]
                } else {
                    (0..=n).map(|_| rng.random_range(0.1..10.0)).collect()
                };
                let cap = ops.borrowing_capacity(&c, b.l).unwrap();
                assert!(cap >= b.beta * (1.0 - 1e-9), "p={p} n={n}: {cap} < {}", b.beta);
            }
        }
    }
}

#[test]
fn single_precision_build() {
    let ops: Sbp1dF32 = build_first_derivative(2, 16).unwrap();
    let s = &ops.q + ops.q.transpose();
    assert!((s[(0, 0)] + 1.0).abs() < 1e-6);
    assert!((s[(16, 16)] - 1.0).abs() < 1e-6);
}
