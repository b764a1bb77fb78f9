use iga_core::assembly::*;
use iga_core::geometry::{DiffusionCoefficient, GeometryMap};
use iga_core::quadrature::gauss_rule;
use iga_core::splines::{KnotVector, SplineSpace};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spaces(d: usize, ne: usize, p: usize) -> Vec<SplineSpace<f64>> {
    (0..d)
        .map(|_| SplineSpace::uniform(ne, p).unwrap())
        .collect()
}

fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = b.norm();
    if scale == 0.0 {
        return a.norm();
    }
    (a - b).norm() / scale
}

#[test]
fn collocation_factor_examples() {
    let s = SplineSpace::<f64>::uniform(2, 2).unwrap();
    let f = univariate_collocation_matrices(&s);
    // B_1, B_2 at tau = 0.25, 0.75 on knots {0,0,0,.5,1,1,1}
    let expected = DMatrix::from_row_slice(2, 2, &[0.625, 0.125, 0.125, 0.625]);
    assert!((f.mass - expected).amax() < 1e-15);
    let full = univariate_collocation_matrices_full(&SplineSpace::<f64>::uniform(7, 3).unwrap());
    for i in 0..full.mass.nrows() {
        assert!((full.mass.row(i).sum() - 1.0).abs() < 1e-14);
        assert!(full.stiffness.row(i).sum().abs() < 1e-10);
    }
}

#[test]
fn collocation_stiffness_matches_second_differences() {
    // even degree keeps the Greville points off the knots
    for p in [2, 4] {
        let s = SplineSpace::<f64>::uniform(5, p).unwrap();
        let f = univariate_collocation_matrices(&s);
        let scale = f.stiffness.amax();
        let tau = s.greville_points();
        let h = 1e-4;
        for (i, &t) in tau.iter().enumerate() {
            let val = |x: f64| {
                let (first, v) = s.eval_basis(x, 0).unwrap();
                (first, v)
            };
            let (a, b, c) = (val(t - h), val(t), val(t + h));
            for j in 0..s.dim_interior() {
                let g = |e: &(usize, Vec<f64>)| {
                    let jj = j + 1;
                    if jj >= e.0 && jj < e.0 + e.1.len() {
                        e.1[jj - e.0]
                    } else {
                        0.0
                    }
                };
                let fd = -(g(&a) - 2.0 * g(&b) + g(&c)) / (h * h);
                assert!(
                    (f.stiffness[(i, j)] - fd).abs() < 1e-5 * scale,
                    "i={i} j={j}"
                );
            }
        }
    }
}

#[test]
fn galerkin_factor_examples() {
    let s = SplineSpace::full_basis(KnotVector::<f64>::uniform(1, 1).unwrap());
    let f = univariate_galerkin_matrices_full(&s, &gauss_rule(&s, 2).unwrap());
    let m = DMatrix::from_row_slice(2, 2, &[1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0]);
    let k = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
    assert!((f.mass - m).amax() < 1e-15 && (f.stiffness - k).amax() < 1e-15);
    let h = univariate_advection_matrix_full(&s, &gauss_rule(&s, 2).unwrap(), |_| 1.0);
    let expected = DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, -0.5, 0.5]);
    assert!((h - expected).amax() < 1e-15);
    for p in 2..=5 {
        let s = SplineSpace::<f64>::uniform(16, p).unwrap();
        let f = univariate_galerkin_matrices(&s, &gauss_rule(&s, p + 1).unwrap());
        assert_eq!(f.mass, f.mass.transpose());
        assert_eq!(f.stiffness, f.stiffness.transpose());
        assert!(f.mass.symmetric_eigenvalues().min() > 0.0);
    }
}

#[test]
fn identity_geometry_matches_kronecker_forms() {
    for d in [2, 3] {
        for (ne, p) in [(4, 1), (3, 2), (5, 3)] {
            let sp = spaces(d, ne, p);
            let g = GeometryMap::identity(d).unwrap();
            let k = DiffusionCoefficient::identity(d);
            let colloc = assemble_collocation_matrix(&g, &k, &sp).unwrap().to_dense();
            let kron = kronecker_form(&collocation_factors(&sp))
                .unwrap()
                .dense_materialize()
                .unwrap();
            assert!(rel_diff(&colloc, &kron) < 1e-12, "d={d} p={p}");
            let rules = build_wq_rules(&sp).unwrap();
            let wq = assemble_wq_matrix(&g, &k, &sp, &rules)
                .unwrap()
                .0
                .to_dense();
            let gal = kronecker_form(&galerkin_factors(&sp).unwrap())
                .unwrap()
                .dense_materialize()
                .unwrap();
            let exact = assemble_galerkin_matrix(&g, &k, &sp, 0).unwrap().to_dense();
            assert!(
                rel_diff(&wq, &gal) < 1e-12 && rel_diff(&exact, &gal) < 1e-12,
                "d={d} p={p}"
            );
        }
    }
}

#[test]
fn constant_q_keeps_wq_exact_on_affine_maps() {
    let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, -0.2, 1.5]);
    let g = GeometryMap::affine(&a, &[0.5, -1.0]).unwrap();
    let k = DiffusionCoefficient::constant(DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.7]))
        .unwrap();
    let sp = vec![
        SplineSpace::uniform(6, 3).unwrap(),
        SplineSpace::uniform(5, 2).unwrap(),
    ];
    let rules = build_wq_rules(&sp).unwrap();
    let wq = assemble_wq_matrix(&g, &k, &sp, &rules)
        .unwrap()
        .0
        .to_dense();
    let gal = assemble_galerkin_matrix(&g, &k, &sp, 0).unwrap().to_dense();
    assert!(rel_diff(&wq, &gal) < 1e-12);
}

#[test]
fn ring_matrices_have_expected_structure() {
    let g = GeometryMap::<f64>::default_quarter_ring();
    let k = DiffusionCoefficient::identity(2);
    let sp = spaces(2, 8, 2);
    let gal = assemble_galerkin_matrix(&g, &k, &sp, 0).unwrap().to_dense();
    assert!((&gal - gal.transpose()).norm() / gal.norm() < 1e-13);
    assert!(gal.symmetric_eigenvalues().min() > 0.0);
    let wq = assemble_wq_matrix(&g, &k, &sp, &build_wq_rules(&sp).unwrap())
        .unwrap()
        .0
        .to_dense();
    let asym = (&wq - wq.transpose()).norm() / wq.norm();
    let err = (&wq - &gal).norm() / gal.norm();
    assert!(asym > 1e-8, "asymmetry {asym}");
    assert!(err > 1e-8 && err < 0.1, "relative error {err}");
}

/// `-Δ` at `x` of `v(F^-1(x))` by a Richardson-extrapolated five-point stencil.
fn fd_laplacian(g: &GeometryMap<f64>, v: &dyn Fn(&[f64]) -> f64, x: &[f64], delta: f64) -> f64 {
    let u = |y: &[f64]| v(&g.inverse(y).unwrap());
    let lap = |h: f64| {
        let mut s = 0.0;
        for k in 0..x.len() {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[k] += h;
            m[k] -= h;
            s += (u(&p) - 2.0 * u(x) + u(&m)) / (h * h);
        }
        -s
    };
    (4.0 * lap(delta / 2.0) - lap(delta)) / 3.0
}

#[test]
fn ring_collocation_matches_physical_laplacian() {
    let g = GeometryMap::<f64>::default_quarter_ring();
    let k = DiffusionCoefficient::identity(2);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for p in [2, 4] {
        let sp = spaces(2, 4, p);
        let a = assemble_collocation_matrix(&g, &k, &sp).unwrap();
        let n = sp[0].dim_interior();
        let coeffs: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lhs = a.matvec(&coeffs).unwrap();
        let uh = |xi: &[f64]| {
            let (f0, b0) = sp[0].eval_basis(xi[0], 0).unwrap();
            let (f1, b1) = sp[1].eval_basis(xi[1], 0).unwrap();
            let mut s = 0.0;
            for (r1, v1) in b1.iter().enumerate() {
                for (r0, v0) in b0.iter().enumerate() {
                    let (j0, j1) = (f0 + r0, f1 + r1);
                    if j0 >= 1 && j0 <= n && j1 >= 1 && j1 <= n {
                        s += v0 * v1 * coeffs[(j1 - 1) * n + j0 - 1];
                    }
                }
            }
            s
        };
        let tau = sp[0].greville_points();
        let scale = lhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (i1, &t1) in tau.iter().enumerate() {
            for (i0, &t0) in tau.iter().enumerate() {
                let x = g.point(&[t0, t1]).unwrap();
                let fd = fd_laplacian(&g, &uh, &x, 2e-3);
                let got = lhs[i1 * n + i0];
                assert!(
                    (got - fd).abs() < 1e-8 * scale.max(1.0),
                    "p={p} ({i0},{i1}): {got} vs {fd}"
                );
            }
        }
    }
}

#[test]
fn h1_matrix_properties() {
    let sp = spaces(2, 4, 2);
    let id = GeometryMap::<f64>::identity(2).unwrap();
    let h = assemble_h1_matrix(&id, &sp, 0).unwrap().to_dense();
    let f = galerkin_factors(&sp).unwrap();
    let (m1, m2) = (&f[0].mass, &f[1].mass);
    let (k1, k2) = (&f[0].stiffness, &f[1].stiffness);
    let expected = m2.kronecker(m1) + k2.kronecker(m1) + m2.kronecker(k1);
    assert!(rel_diff(&h, &expected) < 1e-13);

    let ring = GeometryMap::<f64>::default_quarter_ring();
    let h = assemble_h1_matrix(&ring, &sp, 1).unwrap().to_dense();
    let l2 = assemble_mass_matrix(&ring, &sp, 1).unwrap().to_dense();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let v = DVector::from_fn(h.nrows(), |_, _| rng.gen_range(-1.0..1.0));
        let hv = v.dot(&(&h * &v));
        assert!(hv > 0.0 && v.dot(&(&l2 * &v)) <= hv);
    }
}

#[test]
fn rhs_examples() {
    let g = GeometryMap::<f64>::identity(2).unwrap();
    let sp = spaces(2, 3, 2);
    let zero = assemble_rhs(&g, &|_: &[f64]| 0.0, &sp, Method::Wq).unwrap();
    assert!(zero.iter().all(|&v| v == 0.0));
    let ones = assemble_rhs(&g, &|_: &[f64]| 1.0, &sp, Method::Collocation).unwrap();
    assert!(ones.iter().all(|&v| v == 1.0));
    let ring = GeometryMap::<f64>::default_quarter_ring();
    let ones = assemble_rhs(&ring, &|_: &[f64]| 1.0, &sp, Method::Collocation).unwrap();
    assert!(ones.iter().all(|&v| v == 1.0));

    // single interior hat on two linear elements in each direction
    let sp = spaces(2, 2, 1);
    let v = assemble_rhs(&g, &|_: &[f64]| 1.0, &sp, Method::Galerkin).unwrap();
    assert_eq!(v.len(), 1);
    assert!((v[0] - 0.25).abs() < 1e-15);
    let line = GeometryMap::<f64>::affine(
        &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]),
        &[0.0, 0.0],
    )
    .unwrap();
    let v = assemble_rhs(&line, &|_: &[f64]| 1.0, &sp, Method::Galerkin).unwrap();
    assert!((v[0] - 0.5).abs() < 1e-15);
}

#[test]
fn dispatch_uses_kronecker_form_on_identity() {
    let g = GeometryMap::<f64>::identity(2).unwrap();
    let k = DiffusionCoefficient::identity(2);
    let sp = spaces(2, 4, 3);
    let sys = assemble_collocation(&g, &k, &sp, &manufactured_source).unwrap();
    assert!(matches!(sys.operator, SystemOperator::Kronecker(_)));
    assert_eq!(sys.descriptor.method, Method::Collocation);
    assert_eq!(sys.rhs.len(), sys.operator.size());
    let ring = GeometryMap::default_quarter_ring();
    let rules = build_wq_rules(&sp).unwrap();
    let sys = assemble_wq(&ring, &k, &sp, &rules, &manufactured_source).unwrap();
    assert!(matches!(sys.operator, SystemOperator::Sparse(_)));
    assert_eq!(sys.descriptor.geometry, "quarter_ring");
    let variable =
        DiffusionCoefficient::variable(2, |x: &[f64]| DMatrix::identity(2, 2) * (1.0 + x[0]), None);
    assert!(assemble_collocation_matrix(&ring, &variable, &sp).is_err());
}

#[test]
fn variable_coefficient_collocation_uses_divergence() {
    // K = (1 + x) I on the identity map; L u = -(1 + x) Δu - du/dx
    let g = GeometryMap::<f64>::identity(2).unwrap();
    let k = DiffusionCoefficient::variable(
        2,
        |x: &[f64]| DMatrix::identity(2, 2) * (1.0 + x[0]),
        Some(Box::new(|_: &[f64]| vec![1.0, 0.0])),
    );
    let sp = spaces(2, 4, 3);
    let a = assemble_collocation_matrix(&g, &k, &sp).unwrap().to_dense();
    let f = collocation_factors(&sp);
    let tau = sp[0].greville_points();
    let n = tau.len();
    let lap = kronecker_form(&f).unwrap().dense_materialize().unwrap();
    let full = univariate_collocation_matrices_full(&sp[0]);
    let _ = full;
    let mut d1 = DMatrix::zeros(n, n);
    for (i, &t) in tau.iter().enumerate() {
        let (first, v) = sp[0].eval_basis(t, 1).unwrap();
        for (r, &val) in v.iter().enumerate() {
            let j = first + r;
            if j >= 1 && j <= n {
                d1[(i, j - 1)] = val;
            }
        }
    }
    let grad_x = f[1].mass.kronecker(&d1);
    let scale = DMatrix::from_diagonal(&DVector::from_fn(n * n, |r, _| 1.0 + tau[r % n]));
    let expected = &scale * lap - grad_x;
    assert!(rel_diff(&a, &expected) < 1e-12);
}
