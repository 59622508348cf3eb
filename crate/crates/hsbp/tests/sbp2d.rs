use hsbp::sbp2d::*;
use hsbp::verify::random_spd_coefficients;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn unit_sj(ops: &Operators2D) -> [Vec<f64>; 4] {
    Face::ALL.map(|f| vec![1.0; ops.face_len(f)])
}

#[test]
fn grid_index_examples() {
    assert_eq!(grid_index(0, 0, 5).unwrap(), 0);
    assert_eq!(grid_index(5, 0, 5).unwrap(), 5);
    assert_eq!(grid_index(0, 1, 5).unwrap(), 6);
    assert!(grid_index(6, 0, 5).is_err());
}

#[test]
fn face_derivative_annihilates_constants() {
    for p in 1..=3 {
        let n = 3 * p + 2;
        let ops = Operators2D::new(p, n).unwrap();
        let c = random_spd_coefficients(5, n, n).unwrap();
        let ones = vec![1.0; ops.size()];
        for fo in build_all_faces(&ops, &c, &unit_sj(&ops)).unwrap() {
            assert!(fo.g.matvec(&ones).iter().all(|v| v.abs() < 1e-11));
        }
    }
}

#[test]
fn face_one_derivative_of_r() {
    let ops = Operators2D::new(2, 10).unwrap();
    let c = Coefficients2D::identity(10);
    let (r, _) = reference_nodes(&ops);
    let u: Vec<f64> = (0..ops.size()).map(|k| r[k % 11]).collect();
    let fo = build_face_operators(Face::R0, &ops, &c, &vec![1.0; 11]).unwrap();
    let gu = fo.g.matvec(&u);
    for (g, h) in gu.iter().zip(&fo.hface) {
        assert!((g + h).abs() < 1e-13);
    }
    // selection picks f(0, s_j)
    let (_, s) = reference_nodes(&ops);
    let f: Vec<f64> = (0..ops.size()).map(|k| r[k % 11] + 3.0 * s[k / 11]).collect();
    let lf = fo.l.matvec(&f);
    for j in 0..=10 {
        assert!((lf[j] - 3.0 * s[j]).abs() < 1e-15);
    }
}

#[test]
fn stiffness_bilinear_quadrature() {
    let rs_energy = |p: usize, n: usize| {
        let ops = Operators2D::new(p, n).unwrap();
        let c = Coefficients2D::identity(n);
        let a = build_stiffness(&ops, &c).unwrap();
        let (r, s) = reference_nodes(&ops);
        let u: Vec<f64> = (0..ops.size()).map(|k| r[k % (n + 1)] * s[k / (n + 1)]).collect();
        let au = a.arr.matvec(&u);
        u.iter().zip(&au).map(|(x, y)| x * y).sum::<f64>()
    };
    // H integrates s^2 exactly from p = 2 on
    for p in 2..=3 {
        let v = rs_energy(p, 4 * p + 4);
        assert!((v - 1.0 / 3.0).abs() < 1e-12, "p={p}: {v}");
    }
    // trapezoid rule: 1/3 + h^2/6
    let v = rs_energy(1, 6);
    assert!((v - (1.0 / 3.0 + 1.0 / 216.0)).abs() < 1e-13, "{v}");
}

#[test]
fn stiffness_null_space_and_semidefinite() {
    let ops = Operators2D::new(2, 8).unwrap();
    let c = random_spd_coefficients(11, 8, 8).unwrap();
    let a = build_stiffness_total(&ops, &c).unwrap();
    let ones = vec![1.0; ops.size()];
    assert!(a.matvec(&ones).iter().all(|v| v.abs() < 1e-12 * a.max_abs().max(1.0)));
    let d: DMatrix<f64> = a.to_dense();
    let lo = d.clone().symmetric_eigenvalues().min();
    assert!(lo >= -1e-10 * d.amax());
    assert!(a.asymmetry() < 1e-14 * a.max_abs());
}

#[test]
fn split_identity_examples() {
    let ops = Operators2D::new(1, 4).unwrap();
    let c = Coefficients2D::identity(4);
    let st = build_stiffness(&ops, &c).unwrap();
    let faces = build_all_faces(&ops, &c, &unit_sj(&ops)).unwrap();
    assert!(verify_split_identity(&ops, &c, &st, &faces).unwrap() < 1e-12);

    let ops = Operators2D::new(2, 8).unwrap();
    let c = random_spd_coefficients(3, 8, 8).unwrap();
    let st = build_stiffness(&ops, &c).unwrap();
    let faces = build_all_faces(&ops, &c, &unit_sj(&ops)).unwrap();
    assert!(verify_split_identity(&ops, &c, &st, &faces).unwrap() < 1e-11);
}

#[test]
fn psi_examples() {
    assert!((psi_min(1.0, 1.0, 0.0) - 1.0).abs() < 1e-15);
    assert!((psi_min(2.0, 1.0, 1.0) - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-12);
    assert!((psi_min(4.5, 4.5, 0.0) - 4.5).abs() < 1e-14);
    let bad = Coefficients2D::new(1, 1, vec![1.0; 4], vec![1.0; 4], vec![2.0; 4]);
    assert!(bad.is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn psi_is_smallest_eigenvalue(a in 0.1f64..5.0, b in 0.1f64..5.0, t in -0.95f64..0.95) {
        let c = t * (a * b).sqrt();
        let m = DMatrix::from_row_slice(2, 2, &[a, c, c, b]);
        let lo = m.symmetric_eigenvalues().min();
        prop_assert!((psi_min(a, b, c) - lo).abs() < 1e-10 * (a + b));
    }

    #[test]
    fn split_identity_random(seed in 0u64..1000, p in 1usize..=3) {
        let n = [0, 6, 9, 12][p];
        let ops = Operators2D::new(p, n).unwrap();
        let c = random_spd_coefficients(seed, n, n).unwrap();
        let st = build_stiffness(&ops, &c).unwrap();
        let sj = Face::ALL.map(|f| vec![0.5 + seed as f64 / 1000.0; ops.face_len(f)]);
        let faces = build_all_faces(&ops, &c, &sj).unwrap();
        prop_assert!(verify_split_identity(&ops, &c, &st, &faces).unwrap() < 1e-10);
    }
}
