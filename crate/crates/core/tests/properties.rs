//! Property tests over randomly generated problems.

use cobras::balance::cobras_balance_factors;
use cobras::fom::{simulate, toy_system, ConvectiveChain, DiscreteSystem};
use cobras::rng::{self, Rng};
use cobras::sampling::adjoint_gradient_sequence;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng as _;
use rand_distr::StandardNormal;

fn gaussian(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn gaussian_vec(n: usize, rng: &mut Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Column-wise distance allowing a sign flip per column.
fn signless_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| {
            let (ca, cb) = (a.column(j), b.column(j));
            (ca - cb).norm().min((ca + cb).norm()) / cb.norm().max(1e-300)
        })
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn balancing_transforms_covariantly(seed in any::<u64>(), n in 2usize..8, extra in 0usize..4) {
        let mut rng = rng::stream(seed, 0);
        let (sx, sg) = (n + extra, n + 1);
        let r = 1 + (seed as usize) % (n - 1).max(1);
        let x = gaussian(n, sx, &mut rng);
        let y = gaussian(n, sg, &mut rng);
        let t = DMatrix::<f64>::identity(n, n) + gaussian(n, n, &mut rng) * (0.3 / n as f64);
        let t_inv = t.clone().try_inverse().unwrap();

        let p = cobras_balance_factors(&x, &y, r).unwrap();
        let q = cobras_balance_factors(&(&t_inv * &x), &(t.transpose() * &y), r).unwrap();

        for (a, b) in p.sigma.iter().zip(&q.sigma) {
            prop_assert!((a - b).abs() <= 1e-8 * a);
        }
        let expected = &t_inv * p.projector() * &t;
        prop_assert!((q.projector() - &expected).norm() <= 1e-8 * (1.0 + expected.norm()));
        // h̃(T⁻¹x) = h(x) coordinate-wise up to sign.
        let points = gaussian(n, 5, &mut rng);
        let h = p.psi.tr_mul(&points).transpose();
        let h_t = q.psi.tr_mul(&(&t_inv * &points)).transpose();
        prop_assert!(signless_diff(&h_t, &h) <= 1e-8);
    }

    #[test]
    fn adjoint_recursion_is_linear_in_eta(seed in any::<u64>(), tau in 0usize..6, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut rng = rng::stream(seed, 1);
        let chain = ConvectiveChain::new(8, 0.3, 0.8, 0.1, 2).unwrap();
        let toy = toy_system(0.5, 10).unwrap();
        let systems: [&dyn DiscreteSystem; 2] = [&chain, &toy];
        for sys in systems {
            let x0 = gaussian_vec(sys.state_dim(), &mut rng) * 0.5;
            let inputs: Vec<_> = (0..tau).map(|_| gaussian_vec(sys.input_dim(), &mut rng)).collect();
            let traj = simulate(sys, &x0, &inputs, 0.5).unwrap();
            let (e1, e2) = (gaussian_vec(sys.output_dim(), &mut rng), gaussian_vec(sys.output_dim(), &mut rng));
            let g1 = adjoint_gradient_sequence(sys, &traj, tau, &e1, tau).unwrap();
            let g2 = adjoint_gradient_sequence(sys, &traj, tau, &e2, tau).unwrap();
            let g = adjoint_gradient_sequence(sys, &traj, tau, &(&e1 * a + &e2 * b), tau).unwrap();
            for k in 0..=tau {
                let combo = &g1[k] * a + &g2[k] * b;
                prop_assert!((&g[k] - &combo).norm() <= 1e-10 * (1.0 + combo.norm()));
            }
        }
    }

    #[test]
    fn balancing_cost_never_exceeds_random_oblique_projection(seed in any::<u64>(), n in 3usize..7) {
        let mut rng = rng::stream(seed, 2);
        let r = rng.random_range(1..n);
        let x = gaussian(n, n + 2, &mut rng);
        let y = gaussian(n, n + 1, &mut rng);
        let p = cobras_balance_factors(&x, &y, r).unwrap();
        let cost = |phi: &DMatrix<f64>, psi: &DMatrix<f64>| {
            let proj = phi * psi.transpose();
            let q = DMatrix::<f64>::identity(n, n) - proj;
            (&x * x.transpose() * q.transpose() * &y * y.transpose() * &q).trace()
        };
        let opt = cost(&p.phi, &p.psi);
        let a = gaussian(n, r, &mut rng);
        let b = gaussian(n, r, &mut rng);
        if let Some(inv) = b.tr_mul(&a).try_inverse() {
            prop_assert!(cost(&(&a * inv), &b) >= opt * (1.0 - 1e-9));
        }
    }
}
