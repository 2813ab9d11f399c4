//! Statistical and explicit-lift checks against independent references.

use cobras::balance::{cobras_balance_factors, truncation_cost};
use cobras::fom::{simulate, DiscreteLti, Trajectory};
use cobras::kernel::{kernel_balance_weighted, KernelSpec};
use cobras::rng::{self, Rng};
use cobras::sampling::{sample_gradients_long, sample_gradients_stationary, EtaDistribution, GradientSampleSpec};
use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;

fn gaussian(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn gaussian_vec(n: usize, rng: &mut Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Symmetric square root of a positive semidefinite matrix.
fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = ((m + m.transpose()) * 0.5).symmetric_eigen();
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Projection of a Gaussian problem: covariance `Σ`, its square root, and a
/// CoBRAS projector built from sampled factors.
struct Problem {
    sigma: DMatrix<f64>,
    root: DMatrix<f64>,
    p: DMatrix<f64>,
}

fn problem(n: usize, r: usize, grad_factor: &DMatrix<f64>, rng: &mut Rng) -> Problem {
    let a = gaussian(n, n, rng) / (n as f64).sqrt();
    let sigma = &a * a.transpose() + DMatrix::identity(n, n) * 0.2;
    let root = psd_sqrt(&sigma);
    let x = &root * gaussian(n, 40, rng) / 40f64.sqrt();
    let proj = cobras_balance_factors(&x, grad_factor, r).unwrap();
    Problem { sigma, root, p: proj.projector() }
}

fn bound(sigma: &DMatrix<f64>, wg: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    let q = DMatrix::identity(p.nrows(), p.ncols()) - p;
    (sigma * q.transpose() * wg * &q).trace()
}

#[test]
fn linear_map_error_respects_gradient_bound() {
    let mut rng = rng::stream(201, 0);
    let (n, m, r) = (6, 3, 2);
    let map = gaussian(m, n, &mut rng);
    let pr = problem(n, r, &map.transpose(), &mut rng);
    let wg = map.transpose() * &map;
    let errors: Vec<f64> = (0..20_000)
        .map(|_| {
            let x = &pr.root * gaussian_vec(n, &mut rng);
            (&map * (&x - &pr.p * &x)).norm_squared()
        })
        .collect();
    let (mean, se) = mean_and_stderr(&errors);
    let b = bound(&pr.sigma, &wg, &pr.p);
    assert!(mean <= b + 3.0 * se, "empirical {mean} ± {se} vs bound {b}");
}

#[test]
fn conditional_expectation_error_respects_gradient_bound() {
    // F(x) = sin(aᵀx) + (bᵀx)²/2 with x ~ N(0, Σ). The cross term of
    // E[∇F ∇Fᵀ] vanishes by symmetry, leaving
    // W_g = E[cos²(aᵀx)] aaᵀ + (bᵀΣb) bbᵀ with E[cos²(s)] = (1 + e^{−2v})/2.
    let mut rng = rng::stream(202, 0);
    let (n, r) = (5, 1);
    let a = gaussian_vec(n, &mut rng) * 0.8;
    let b = gaussian_vec(n, &mut rng) * 0.6;
    let f = |x: &DVector<f64>| (a.dot(x)).sin() + 0.5 * b.dot(x).powi(2);
    let grads = DMatrix::from_columns(&[a.clone(), b.clone()]);
    let pr = problem(n, r, &grads, &mut rng);
    let va = (a.transpose() * &pr.sigma * &a)[(0, 0)];
    let vb = (b.transpose() * &pr.sigma * &b)[(0, 0)];
    let wg = &a * a.transpose() * (0.5 * (1.0 + (-2.0 * va).exp())) + &b * b.transpose() * vb;

    // x | Px ~ N(ΣPᵀ(PΣPᵀ)⁺ Px, Σ − ΣPᵀ(PΣPᵀ)⁺PΣ).
    let pinv = (&pr.p * &pr.sigma * pr.p.transpose()).pseudo_inverse(1e-10).unwrap();
    let gain = &pr.sigma * pr.p.transpose() * pinv;
    let cond_root = psd_sqrt(&(&pr.sigma - &gain * &pr.p * &pr.sigma));
    let inner = 400;
    let errors: Vec<f64> = (0..3_000)
        .map(|_| {
            let x = &pr.root * gaussian_vec(n, &mut rng);
            let mean = &gain * (&pr.p * &x);
            let cond: f64 = (0..inner).map(|_| f(&(&mean + &cond_root * gaussian_vec(n, &mut rng)))).sum::<f64>() / inner as f64;
            (f(&x) - cond).powi(2)
        })
        .collect();
    // Inner-sample noise only inflates the estimate, so this is conservative.
    let (mean, se) = mean_and_stderr(&errors);
    let b = bound(&pr.sigma, &wg, &pr.p);
    assert!(mean <= b + 3.0 * se, "empirical {mean} ± {se} vs bound {b}");
}

#[test]
fn factor_cost_matches_dense_trace() {
    let mut rng = rng::stream(203, 0);
    let x = gaussian(6, 9, &mut rng);
    let y = gaussian(6, 7, &mut rng);
    let p = cobras_balance_factors(&x, &y, 3).unwrap();
    let dense = bound(&(&x * x.transpose()), &(&y * y.transpose()), &p.projector());
    let factored = truncation_cost(&x, &y, &p.phi, &p.psi);
    assert!((dense - factored).abs() <= 1e-10 * dense);
}

#[test]
fn stationary_and_long_estimators_agree_under_white_noise() {
    let mut rng = rng::stream(204, 0);
    let n = 4;
    let a = gaussian(n, n, &mut rng);
    let a = &a * (0.8 / a.singular_values().max());
    let sys = DiscreteLti::new(a, gaussian(n, 1, &mut rng), gaussian(2, n, &mut rng)).unwrap();
    let (horizon, s_g) = (6, 500);
    let noise = |len: usize, rng: &mut Rng| -> Vec<DVector<f64>> { (0..len).map(|_| gaussian_vec(1, rng)).collect() };

    // Burn-in of 200 steps puts the state at statistical steady state.
    let burn_in = |rng: &mut Rng| -> DVector<f64> {
        let t = simulate(&sys, &DVector::zeros(n), &noise(200, rng), 1.0).unwrap();
        t.states.last().unwrap().clone()
    };
    let minis: Vec<Trajectory> = (0..s_g)
        .map(|_| {
            let x0 = burn_in(&mut rng);
            simulate(&sys, &x0, &noise(horizon, &mut rng), 1.0).unwrap()
        })
        .collect();
    let x0 = burn_in(&mut rng);
    let long = simulate(&sys, &x0, &noise(1_000 + horizon, &mut rng), 1.0).unwrap();

    let spec = |seed| GradientSampleSpec { horizon, samples: s_g, eta: EtaDistribution::Gaussian, seed };
    let stationary = sample_gradients_stationary(&sys, &minis, &spec(1)).unwrap().covariance();
    let long = sample_gradients_long(&sys, &long, &spec(2)).unwrap().covariance();
    let rel = (&stationary - &long).norm() / long.norm();
    let op_rel = (&stationary - &long).singular_values().max() / long.singular_values().max();
    assert!(op_rel < 0.1, "operator-norm relative difference {op_rel} (Frobenius {rel})");
}

/// Random Fourier features `φ(x) = √(2/D) cos(Wx + c)` with `W ~ N(0, σ⁻²I)`
/// approximate the Gaussian kernel; balancing the explicitly lifted factors
/// must agree with the kernel-trick computation up to Monte-Carlo error.
#[test]
fn gaussian_kernel_matches_random_fourier_lift() {
    let mut rng = rng::stream(205, 0);
    let (n, s_x, s_g, r, width, d) = (3, 12, 30, 3, 1.5, 100_000);
    let states = gaussian(n, s_x, &mut rng) * 0.7;
    let anchors = gaussian(n, s_g, &mut rng) * 0.7;
    let gradients = gaussian(n, s_g, &mut rng);
    let kernel = KernelSpec::Gaussian { sigma: width };
    let map = kernel_balance_weighted(&kernel, &states, &vec![1.0; s_x], &anchors, &gradients, &vec![1.0; s_g], r).unwrap();

    let w = gaussian(d, n, &mut rng) / width;
    let c = DVector::from_fn(d, |_, _| rng.random_range(0.0..std::f64::consts::TAU));
    let amp = (2.0 / d as f64).sqrt();
    let phi = |x: &DVector<f64>| (&w * x + &c).map(|v| amp * v.cos());
    let phi0 = phi(&DVector::zeros(n));
    let lifted_x = DMatrix::from_columns(&states.column_iter().map(|x| phi(&x.into_owned()) - &phi0).collect::<Vec<_>>());
    // Dφ(x̃) G⁻¹ g with G = σ⁻² I.
    let lifted_y = DMatrix::from_columns(
        &(0..s_g)
            .map(|i| {
                let xt = anchors.column(i).into_owned();
                let wg = &w * gradients.column(i) * (width * width);
                (&w * &xt + &c).zip_map(&wg, |arg, v| -amp * arg.sin() * v)
            })
            .collect::<Vec<_>>(),
    );
    let explicit = cobras_balance_factors(&lifted_x, &lifted_y, r).unwrap();

    for (k, (a, b)) in map.spectrum().iter().zip(&explicit.sigma).enumerate() {
        assert!((a - b).abs() <= 0.03 * map.spectrum()[0], "σ_{k}: kernel {a} vs lift {b}");
    }
    for _ in 0..5 {
        let x = gaussian_vec(n, &mut rng) * 0.7;
        let z = map.nonlinear_features(&x);
        let z_lift = explicit.psi.tr_mul(&(phi(&x) - &phi0));
        for j in 0..r {
            let diff = (z[j] - z_lift[j]).abs().min((z[j] + z_lift[j]).abs());
            assert!(diff <= 0.05 * (1.0 + z.norm()), "feature {j}: {} vs {}", z[j], z_lift[j]);
        }
    }
}
