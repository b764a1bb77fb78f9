use iga_core::quadrature::{build_wq_rule, gauss_legendre, wq_pair};
use iga_core::splines::{KnotVector, SplineSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Textbook recursive Cox-de Boor definition with its derivative formula.
fn naive_basis(u: &[f64], i: usize, p: usize, x: f64, deriv: usize) -> f64 {
    if deriv > 0 {
        if p == 0 {
            return 0.0;
        }
        let mut s = 0.0;
        let d1 = u[i + p] - u[i];
        if d1 > 0.0 {
            s += p as f64 / d1 * naive_basis(u, i, p - 1, x, deriv - 1);
        }
        let d2 = u[i + p + 1] - u[i + 1];
        if d2 > 0.0 {
            s -= p as f64 / d2 * naive_basis(u, i + 1, p - 1, x, deriv - 1);
        }
        return s;
    }
    if p == 0 {
        let last = *u.last().unwrap();
        let inside = (u[i] <= x && x < u[i + 1]) || (x == last && u[i] < x && u[i + 1] == last);
        return if inside { 1.0 } else { 0.0 };
    }
    let mut s = 0.0;
    let d1 = u[i + p] - u[i];
    if d1 > 0.0 {
        s += (x - u[i]) / d1 * naive_basis(u, i, p - 1, x, 0);
    }
    let d2 = u[i + p + 1] - u[i + 1];
    if d2 > 0.0 {
        s += (u[i + p + 1] - x) / d2 * naive_basis(u, i + 1, p - 1, x, 0);
    }
    s
}

fn naive_integral(u: &[f64], p: usize, i: usize, a: usize, j: usize, b: usize) -> f64 {
    let (x, w) = gauss_legendre(p + 2);
    let mut breaks: Vec<f64> = u.to_vec();
    breaks.dedup();
    breaks
        .windows(2)
        .map(|e| {
            let len = e[1] - e[0];
            x.iter()
                .zip(&w)
                .map(|(&t, &wt)| {
                    let y = e[0] + len * t;
                    len * wt * naive_basis(u, i, p, y, a) * naive_basis(u, j, p, y, b)
                })
                .sum::<f64>()
        })
        .sum()
}

fn check_exactness(space: &SplineSpace<f64>, tol: f64) {
    let rule = build_wq_rule(space).unwrap();
    let u = space.knot_vector().knots().to_vec();
    let p = space.degree();
    let m = space.dim_full();
    for row in 0..rule.num_rows() {
        let i = row + 1;
        let range = rule.rows[row].clone();
        let (lo, hi) = space.support(i);
        assert!(range.clone().all(|q| rule.points[q] >= lo && rule.points[q] <= hi));
        for j in i.saturating_sub(p)..=(i + p).min(m - 1) {
            for a in 0..2 {
                for b in 0..2 {
                    let w = &rule.weights[wq_pair(a, b)][row];
                    let quad: f64 = range
                        .clone()
                        .zip(w)
                        .map(|(q, &wq)| wq * naive_basis(&u, j, p, rule.points[q], b))
                        .sum();
                    let exact = naive_integral(&u, p, i, a, j, b);
                    assert!(
                        (quad - exact).abs() < tol * exact.abs().max(1.0),
                        "p={p} i={i} j={j} ({a},{b}): {quad} vs {exact}"
                    );
                }
            }
        }
    }
}

#[test]
fn linear_two_elements_exact() {
    check_exactness(&SplineSpace::uniform(2, 1).unwrap(), 1e-13);
}

#[test]
fn exactness_for_all_rows_and_pairs() {
    for p in 2..=5 {
        for ne in [1, 3, 8] {
            if ne + p < 3 {
                continue;
            }
            check_exactness(&SplineSpace::uniform(ne, p).unwrap(), 1e-12);
        }
    }
    let kv = KnotVector::new(3, vec![0.0, 0.0, 0.0, 0.0, 0.1, 0.35, 0.35, 0.8, 1.0, 1.0, 1.0, 1.0]).unwrap();
    check_exactness(&SplineSpace::new(kv).unwrap(), 1e-12);
}

#[test]
fn mass_row_sums_match_basis_integrals() {
    let space = SplineSpace::<f64>::uniform(8, 3).unwrap();
    let rule = build_wq_rule(&space).unwrap();
    let u = space.knot_vector().knots().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let row = rng.gen_range(0..rule.num_rows());
        // the full basis sums to one, so the (0,0) weights integrate B_i
        let quad: f64 = rule.weights[wq_pair(0, 0)][row].iter().sum();
        let exact = (0..space.dim_full()).map(|j| naive_integral(&u, 3, row + 1, 0, j, 0)).sum::<f64>();
        assert!((quad - exact).abs() < 1e-13);
        assert!((exact - (u[row + 5] - u[row + 1]) / 4.0).abs() < 1e-14);
    }
}

#[test]
fn points_per_row_grow_linearly() {
    let counts: Vec<usize> = (2..=5)
        .map(|p| build_wq_rule(&SplineSpace::<f64>::uniform(32, p).unwrap()).unwrap().max_points_per_row())
        .collect();
    for (p, &c) in (2..=5).zip(&counts) {
        assert!(c <= 4 * p, "p={p}: {c} points");
    }
}

#[test]
fn rule_exists_for_every_small_mesh() {
    // derivative moment systems are rank deficient; sizes like these once broke the solve
    for p in 1..=5 {
        for ne in 1..=40 {
            if ne + p < 3 {
                continue;
            }
            assert!(build_wq_rule(&SplineSpace::<f64>::uniform(ne, p).unwrap()).is_ok(), "p={p} ne={ne}");
            assert!(build_wq_rule(&SplineSpace::<f32>::uniform(ne, p).unwrap()).is_ok(), "f32 p={p} ne={ne}");
        }
    }
    check_exactness(&SplineSpace::uniform(9, 2).unwrap(), 1e-12);
    check_exactness(&SplineSpace::uniform(10, 3).unwrap(), 1e-12);
}
