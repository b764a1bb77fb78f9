use iga_core::geometry::{coefficient_matrix_q, q_from_eval, DiffusionCoefficient, GeometryMap};
use iga_core::splines::SplineSpace;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(0.02..0.98)).collect()
}

fn fd_jacobian(g: &GeometryMap<f64>, xi: &[f64], h: f64) -> DMatrix<f64> {
    let d = xi.len();
    let mut j = DMatrix::zeros(d, d);
    for a in 0..d {
        let mut p = xi.to_vec();
        let mut m = xi.to_vec();
        p[a] += h;
        m[a] -= h;
        let (fp, fm) = (g.point(&p).unwrap(), g.point(&m).unwrap());
        for k in 0..d {
            j[(k, a)] = (fp[k] - fm[k]) / (2.0 * h);
        }
    }
    j
}

#[test]
fn ring_arcs_have_constant_radius() {
    let g = GeometryMap::<f64>::default_quarter_ring();
    for i in 0..=50 {
        let t = i as f64 / 50.0;
        for (s, r) in [(0.0, 1.0), (1.0, 2.0)] {
            let x = g.point(&[t, s]).unwrap();
            assert!((x[0].hypot(x[1]) - r).abs() < 1e-12, "t={t} s={s}");
            assert!(x[0] >= -1e-15 && x[1] >= -1e-15);
        }
    }
    let mid = g.point(&[0.5, 0.0]).unwrap();
    let c = std::f64::consts::FRAC_1_SQRT_2;
    assert!((mid[0] - c).abs() < 1e-14 && (mid[1] - c).abs() < 1e-14);
    let corner = g.point(&[1.0, 1.0]).unwrap();
    assert!((corner[0] - 2.0).abs() < 1e-15 && corner[1].abs() < 1e-15);
}

#[test]
fn positive_jacobian_on_sample_grid() {
    let ring = GeometryMap::<f64>::default_quarter_ring();
    assert!(ring.min_det_on_grid(20).unwrap() > 0.0);
    let solid = GeometryMap::<f64>::revolved_quarter_ring();
    assert!(solid.min_det_on_grid(20).unwrap() > 0.0);
}

#[test]
fn revolved_points_are_rotated_ring_points() {
    let ring = GeometryMap::<f64>::default_quarter_ring();
    let solid = GeometryMap::<f64>::revolved_quarter_ring();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..40 {
        let s = rng.gen_range(0.0..=1.0);
        // rotation angle from the image of the ring point (0, 1, 0)
        let r0 = solid.point(&[0.0, 0.0, s]).unwrap();
        let theta = (r0[2] + 1.0).atan2(r0[0] + 1.0) - 1f64.atan2(1.0);
        assert!((-1e-12..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(&theta));
        for _ in 0..5 {
            let (a, b) = (rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0));
            let x = solid.point(&[a, b, s]).unwrap();
            let (ox, oz) = (x[0] + 1.0, x[2] + 1.0);
            let (c, sn) = (theta.cos(), theta.sin());
            // inverse rotation in the xz-plane
            let bx = c * ox + sn * oz - 1.0;
            let bz = -sn * ox + c * oz - 1.0;
            let p = ring.point(&[a, b]).unwrap();
            assert!((bx - p[0]).abs() < 1e-12 && (x[1] - p[1]).abs() < 1e-12 && bz.abs() < 1e-12);
        }
    }
    let end = solid.point(&[1.0, 1.0, 1.0]).unwrap();
    assert!((end[0] + 2.0).abs() < 1e-14 && end[1].abs() < 1e-14 && (end[2] - 2.0).abs() < 1e-14);
}

#[test]
fn jacobian_and_hessian_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for g in [
        GeometryMap::<f64>::default_quarter_ring(),
        GeometryMap::revolved_quarter_ring(),
    ] {
        let d = g.dim();
        for _ in 0..20 {
            let xi = random_point(&mut rng, d);
            let ev = g.eval_map(&xi, true).unwrap();
            let fd = fd_jacobian(&g, &xi, 1e-5);
            assert!(
                (&ev.jac - &fd).amax() < 1e-8,
                "jacobian {} vs {}",
                ev.jac,
                fd
            );
            let h = 1e-5;
            for b in 0..d {
                let mut p = xi.clone();
                let mut m = xi.clone();
                p[b] += h;
                m[b] -= h;
                let (jp, jm) = (g.eval(&p).unwrap().jac, g.eval(&m).unwrap().jac);
                for k in 0..d {
                    for a in 0..d {
                        let fd = (jp[(k, a)] - jm[(k, a)]) / (2.0 * h);
                        assert!((ev.hess[k][(a, b)] - fd).abs() < 1e-7);
                    }
                }
            }
        }
    }
}

#[test]
fn q_matches_dense_oracle_and_is_spd() {
    let g = GeometryMap::<f64>::default_quarter_ring();
    let k = DiffusionCoefficient::identity(2);
    let q = coefficient_matrix_q(&g, &k, &[0.5, 0.5]).unwrap();
    let j = fd_jacobian(&g, &[0.5, 0.5], 1e-5);
    let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
    let adj = DMatrix::from_row_slice(2, 2, &[j[(1, 1)], -j[(0, 1)], -j[(1, 0)], j[(0, 0)]]);
    let oracle = &adj * adj.transpose() / det;
    assert!((&q - &oracle).amax() < 1e-8);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for g in [
        GeometryMap::<f64>::default_quarter_ring(),
        GeometryMap::revolved_quarter_ring(),
    ] {
        let d = g.dim();
        let k = DiffusionCoefficient::identity(d);
        for _ in 0..50 {
            let q = coefficient_matrix_q(&g, &k, &random_point(&mut rng, d)).unwrap();
            assert!((&q - q.transpose()).amax() < 1e-14);
            assert!(q.symmetric_eigenvalues().min() > 0.0);
        }
    }
}

#[test]
fn q_scales_with_constant_coefficient() {
    let g = GeometryMap::<f64>::default_quarter_ring();
    let aniso =
        DiffusionCoefficient::constant(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]))
            .unwrap();
    let ev = g.eval(&[0.3, 0.6]).unwrap();
    let q1 = q_from_eval(&ev, &aniso).unwrap();
    let q3 = q_from_eval(&ev, &aniso.scaled(3.0)).unwrap();
    assert!((q1 * 3.0 - q3).amax() < 1e-13);
    assert!(
        DiffusionCoefficient::constant(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]))
            .is_err()
    );
}

#[test]
fn refinement_preserves_the_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ring = GeometryMap::<f64>::default_quarter_ring();
    let fine = ring
        .refined(vec![
            SplineSpace::uniform(8, 3).unwrap(),
            SplineSpace::uniform(4, 2).unwrap(),
        ])
        .unwrap();
    let solid = GeometryMap::<f64>::revolved_quarter_ring();
    let fine_solid = solid
        .refined(vec![
            SplineSpace::uniform(4, 2).unwrap(),
            SplineSpace::uniform(3, 2).unwrap(),
            SplineSpace::uniform(5, 4).unwrap(),
        ])
        .unwrap();
    for (a, b) in [(&ring, &fine), (&solid, &fine_solid)] {
        for _ in 0..100 {
            let xi: Vec<f64> = (0..a.dim()).map(|_| rng.gen_range(0.0..=1.0)).collect();
            let (x, y) = (a.point(&xi).unwrap(), b.point(&xi).unwrap());
            assert!(x.iter().zip(&y).all(|(u, v)| (u - v).abs() < 1e-12));
        }
    }
}

#[test]
fn newton_inverse_roundtrip() {
    let g = GeometryMap::<f64>::default_quarter_ring();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..30 {
        let xi = random_point(&mut rng, 2);
        let back = g.inverse(&g.point(&xi).unwrap()).unwrap();
        assert!((back[0] - xi[0]).abs() < 1e-12 && (back[1] - xi[1]).abs() < 1e-12);
    }
}
