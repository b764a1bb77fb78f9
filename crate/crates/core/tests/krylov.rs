use iga_core::krylov::*;
use iga_core::sparse::CsrMatrix;
use iga_core::Error;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn true_residual(a: &DMatrix<f64>, x: &[f64], b: &[f64]) -> f64 {
    let b = DVector::from_column_slice(b);
    (a * DVector::from_column_slice(x) - &b).norm() / b.norm()
}

fn laplacian_2d(m: usize) -> DMatrix<f64> {
    let n = m * m;
    DMatrix::from_fn(n, n, |i, j| {
        let (xi, yi, xj, yj) = (i % m, i / m, j % m, j / m);
        if i == j {
            4.0
        } else if (xi.abs_diff(xj) == 1 && yi == yj) || (yi.abs_diff(yj) == 1 && xi == xj) {
            -1.0
        } else {
            0.0
        }
    })
}

fn bandwidth(a: &CsrMatrix<f64>, perm: &[usize]) -> usize {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    (0..a.nrows())
        .flat_map(|i| a.row(i).0.iter().map(move |&j| (i, j)))
        .map(|(i, j)| inv[i].abs_diff(inv[j]))
        .max()
        .unwrap_or(0)
}

#[test]
fn exact_preconditioner_converges_in_one_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 30;
    let a = DMatrix::from_fn(n, n, |i, j| if i == j { 4.0 } else { rng.gen_range(-0.3..0.3) });
    let lu = a.clone().lu();
    let exact = FnOperator {
        size: n,
        f: |x: &[f64], y: &mut [f64]| {
            y.copy_from_slice(lu.solve(&DVector::from_column_slice(x)).unwrap().as_slice());
            Ok(())
        },
    };
    let b = random_vec(&mut rng, n);
    let (x, rep) = bicgstab(&a, &exact, &b, None, &BicgstabOptions::default()).unwrap();
    assert!(rep.converged);
    assert!(rep.iterations <= 1.0, "{}", rep.iterations);
    assert!(true_residual(&a, &x, &b) <= 1e-8);
}

#[test]
fn unpreconditioned_spd_and_history() {
    let a = laplacian_2d(12);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let b = random_vec(&mut rng, a.nrows());
    let opts = BicgstabOptions { tol: 1e-10, max_iter: 500 };
    let (x, rep) = bicgstab(&a, &Identity(a.nrows()), &b, None, &opts).unwrap();
    assert!(rep.converged);
    assert_eq!(rep.termination, Termination::Converged);
    let tr = true_residual(&a, &x, &b);
    assert!(tr <= opts.tol);
    let last = *rep.residual_history.last().unwrap();
    assert!((last - tr).abs() <= 10.0 * opts.tol);
    // one history entry per half step plus the initial residual
    assert_eq!(rep.residual_history.len(), (2.0 * rep.iterations) as usize + 1);
    assert!(rep.matvec_time >= 0.0 && rep.apply_time >= 0.0);
}

#[test]
fn half_iterations_reported_when_bicg_step_converges() {
    // a scaled identity converges at the first half step
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0; 5]));
    let (_, rep) = bicgstab(&a, &Identity(5), &[1.0, 2.0, 3.0, 4.0, 5.0], None, &BicgstabOptions::default()).unwrap();
    assert_eq!(rep.iterations, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = laplacian_2d(10);
    let b = random_vec(&mut rng, 100);
    let (_, rep) = bicgstab(&a, &Identity(100), &b, None, &BicgstabOptions::default()).unwrap();
    assert_eq!(rep.iterations.fract() == 0.5, rep.residual_history.len() % 2 == 0);
}

#[test]
fn max_iterations_and_initial_guess() {
    let a = laplacian_2d(10);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let b = random_vec(&mut rng, 100);
    let (_, rep) = bicgstab(&a, &Identity(100), &b, None, &BicgstabOptions { tol: 1e-14, max_iter: 2 }).unwrap();
    assert!(!rep.converged);
    assert_eq!(rep.termination, Termination::MaxIterations);
    let x_exact = a.clone().lu().solve(&DVector::from_column_slice(&b)).unwrap();
    let (_, rep) = bicgstab(&a, &Identity(100), &b, Some(x_exact.as_slice()), &BicgstabOptions::default()).unwrap();
    assert_eq!(rep.iterations, 0.0);
    assert!(matches!(
        bicgstab(&a, &Identity(99), &b, None, &BicgstabOptions::default()),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn ilu_of_identity_is_identity() {
    let a = CsrMatrix::from_dense(&DMatrix::<f64>::identity(6, 6));
    let ilu = Ilu0::new(&a).unwrap();
    let v = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    assert_eq!(ilu.apply(&v).unwrap(), v);
}

#[test]
fn ilu_is_exact_for_triangular_and_tridiagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 12;
    let lower = DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Equal => 2.0 + rng.gen_range(0.0..1.0),
        std::cmp::Ordering::Greater if rng.gen_bool(0.4) => rng.gen_range(-1.0..1.0),
        _ => 0.0,
    });
    let tri = DMatrix::from_fn(n, n, |i, j| if i == j { 2.5 } else if i.abs_diff(j) == 1 { -1.0 } else { 0.0 });
    for a in [lower, tri] {
        let csr = CsrMatrix::from_dense(&a);
        // natural ordering: no fill is discarded
        let ilu = Ilu0::with_permutation(&csr, (0..n).collect()).unwrap();
        let v = random_vec(&mut rng, n);
        let av = (&a * DVector::from_column_slice(&v)).as_slice().to_vec();
        let back = ilu.apply(&av).unwrap();
        assert!(back.iter().zip(&v).all(|(x, y)| (x - y).abs() < 1e-12));
        // dense LU oracle
        let dense = a.clone().lu().solve(&DVector::from_column_slice(&av)).unwrap();
        assert!(back.iter().zip(dense.iter()).all(|(x, y)| (x - y).abs() < 1e-12));
    }
}

#[test]
fn rcm_reduces_bandwidth_and_keeps_pattern() {
    let m = 8;
    let a = laplacian_2d(m);
    // scramble the natural ordering so RCM has work to do
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut shuffle: Vec<usize> = (0..m * m).collect();
    for i in (1..shuffle.len()).rev() {
        shuffle.swap(i, rng.gen_range(0..=i));
    }
    let scrambled = DMatrix::from_fn(m * m, m * m, |i, j| a[(shuffle[i], shuffle[j])]);
    let csr = CsrMatrix::from_dense(&scrambled);
    let natural: Vec<usize> = (0..m * m).collect();
    let perm = rcm_permutation(&csr);
    assert!(bandwidth(&csr, &perm) <= m + 1, "{}", bandwidth(&csr, &perm));
    assert!(bandwidth(&csr, &natural) > 2 * m);
    let ilu = Ilu0::new(&csr).unwrap();
    assert_eq!(ilu.factors().nnz(), csr.nnz());
    let mut sorted = ilu.permutation().to_vec();
    sorted.sort_unstable();
    assert_eq!(sorted, natural);
}

#[test]
fn ilu_preconditioned_solve() {
    let a = laplacian_2d(16);
    let csr = CsrMatrix::from_dense(&a);
    let ilu = Ilu0::new(&csr).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let b = random_vec(&mut rng, a.nrows());
    let (x, with) = bicgstab(&csr, &ilu, &b, None, &BicgstabOptions::default()).unwrap();
    let (_, without) = bicgstab(&csr, &Identity(a.nrows()), &b, None, &BicgstabOptions::default()).unwrap();
    assert!(with.converged && without.converged);
    assert!(with.iterations < without.iterations);
    assert!(true_residual(&a, &x, &b) <= 1e-8);
}

#[test]
fn zero_pivot_is_reported() {
    let a = CsrMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    assert!(matches!(Ilu0::with_permutation(&a, vec![0, 1]), Err(Error::ZeroPivot(_))));
}
