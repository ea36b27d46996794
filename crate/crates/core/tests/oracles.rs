//! Independent numerical oracles for the discrete operators and eigensolvers.

use driftfront::discretize::{assemble_convolution, assemble_convolution_with, build_grid, kernel_tail};
use driftfront::model::{CoefficientField, KernelSpec, NonlinearitySpec};
use driftfront::spectral::{
    assemble, collatz_wielandt_bounds, critical_domain, diffusion_limit_probe, hadamard_derivative, operator_r0,
    principal_eig_direct, principal_eig_resolvent, principal_eigen, rho_curve, split, CriticalDomain,
    LinearizedOperator,
};
use driftfront::{Grid, ModelParams};
use nalgebra::DMatrix;

fn dense(op: &LinearizedOperator<f64>) -> DMatrix<f64> {
    let n = op.dim();
    DMatrix::from_fn(n, n, |i, j| op.full.get(i, j))
}

fn rightmost_real_eigenvalue(m: DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

fn grid() -> Grid {
    build_grid(1.0, 0.05, 8.0).unwrap()
}

#[test]
fn direct_route_matches_dense_eigensolve_without_drift() {
    let g = grid();
    let p = ModelParams::reference().with_drifts(0.0, 0.0);
    let op = assemble(&p, &g, 4.0).unwrap();
    let eig = principal_eig_direct(&op).unwrap();
    let oracle = rightmost_real_eigenvalue(dense(&op));
    assert!((eig.lambda - oracle).abs() < 1e-8, "{} vs {oracle}", eig.lambda);
}

#[test]
fn direct_route_matches_dense_eigensolve_with_drift() {
    let g = grid();
    for (p, q) in [(0.2, 0.2), (-0.7, 0.4), (1.0, -1.0)] {
        let params = ModelParams::reference().with_drifts(p, q).with_dispersals(0.5, 2.0);
        let op = assemble(&params, &g, 2.5).unwrap();
        let eig = principal_eig_direct(&op).unwrap();
        let oracle = rightmost_real_eigenvalue(dense(&op));
        assert!((eig.lambda - oracle).abs() < 1e-8, "p = {p}, q = {q}: {} vs {oracle}", eig.lambda);
        assert!(eig.residual <= 1e-10);
    }
}

#[test]
fn eigen_result_normalization() {
    let g = grid();
    let op = assemble(&ModelParams::reference(), &g, 6.0).unwrap();
    let eig = principal_eig_direct(&op).unwrap();
    let phi = eig.eigenvector_interleaved();
    let top = phi.iter().cloned().fold(0.0, f64::max);
    assert!((top - 1.0).abs() < 1e-14);
    assert!(eig.positive && eig.min_entry() > 1e-14);
    assert!((op.pairing(&eig.adjoint_interleaved(), &phi) - 1.0).abs() < 1e-12);
    assert!(eig.residual <= 1e-10, "{}", eig.residual);
}

#[test]
fn decoupled_blocks_give_the_larger_block_eigenvalue() {
    let g = grid();
    let zero = NonlinearitySpec::linear(0.0);
    let both = ModelParams::reference().with_sources(zero, zero).with_dispersals(0.5, 3.0);
    let lambda = principal_eig_direct(&assemble(&both, &g, 2.0).unwrap()).unwrap().lambda;
    let blocks: Vec<f64> = (0..2)
        .map(|s| {
            let op = assemble(&both, &g, 2.0).unwrap();
            let n = op.active();
            let m = DMatrix::from_fn(n, n, |i, j| op.full.get(2 * i + s, 2 * j + s));
            rightmost_real_eigenvalue(m)
        })
        .collect();
    assert!((lambda - blocks[0].max(blocks[1])).abs() < 1e-8);
}

#[test]
fn rho_at_principal_eigenvalue_is_one() {
    let g = grid();
    let op = assemble(&ModelParams::reference(), &g, 3.0).unwrap();
    let lambda = principal_eig_direct(&op).unwrap().lambda;
    let rho = rho_curve(&op, lambda).unwrap();
    assert!((rho - 1.0).abs() < 1e-8, "{rho}");
    assert!(rho_curve(&op, lambda + 10.0).unwrap() < rho);
}

#[test]
fn routes_agree_when_decoupled() {
    let g = grid();
    let zero = NonlinearitySpec::linear(0.0);
    let p = ModelParams::reference().with_sources(zero, zero).with_drifts(0.0, 0.0);
    let op = assemble(&p, &g, 2.0).unwrap();
    let direct = principal_eig_direct(&op).unwrap().lambda;
    let resolvent = principal_eig_resolvent(&op, None).unwrap();
    assert!((direct - resolvent.eigen.lambda).abs() < 1e-9);
    for w in resolvent.brackets.windows(2) {
        let (a, b) = (w[0].1 - w[0].0, w[1].1 - w[1].0);
        let ulps = 4.0 * f64::EPSILON * w[0].0.abs().max(w[0].1.abs());
        assert!((b - a / 2.0).abs() <= ulps, "{a} -> {b}");
    }
}

#[test]
fn collatz_wielandt_equality_and_constant_test_pair() {
    let g = grid();
    let op = assemble(&ModelParams::reference(), &g, 2.0).unwrap();
    let eig = principal_eig_direct(&op).unwrap();
    let (lo, hi) = collatz_wielandt_bounds(&op, &eig.eigenvector[0], &eig.eigenvector[1]).unwrap();
    assert!((lo - eig.lambda).abs() < 1e-9 && (hi - eig.lambda).abs() < 1e-9);
    let ones = vec![1.0; op.active()];
    let (lo, hi) = collatz_wielandt_bounds(&op, &ones, &ones).unwrap();
    assert!(lo <= eig.lambda && eig.lambda <= hi);
}

/// For symmetric decoupled blocks, `∂λ/∂d_j = φ_j^T (W_j - I) φ_j / |φ|^2`
/// from a dense symmetric eigensolve.
#[test]
fn hadamard_matches_symmetric_rayleigh_derivative() {
    let g = grid();
    let zero = NonlinearitySpec::linear(0.0);
    let p = ModelParams::reference().with_sources(zero, zero).with_drifts(0.0, 0.0).with_dispersals(1.0, 0.4);
    let op = assemble(&p, &g, 2.0).unwrap();
    let n = op.active();
    // Species 0 carries the principal eigenvalue here (larger dispersal loss is balanced by d).
    let eig = principal_eig_direct(&op).unwrap();
    let species = if eig.eigenvector[0].iter().sum::<f64>() > eig.eigenvector[1].iter().sum::<f64>() { 0 } else { 1 };
    let block = DMatrix::from_fn(n, n, |i, j| op.full.get(2 * i + species, 2 * j + species));
    let sym = block.clone().symmetric_eigen();
    let k = sym.eigenvalues.imax();
    let phi = sym.eigenvectors.column(k).into_owned();
    let w = DMatrix::from_fn(n, n, |i, j| op.kernel_blocks[species].get(i, j) - if i == j { 1.0 } else { 0.0 });
    let rayleigh = (phi.transpose() * &w * &phi)[(0, 0)] / phi.norm_squared();
    let hadamard = hadamard_derivative(&p, &g, 2.0, species).unwrap();
    assert!((hadamard - rayleigh).abs() < 1e-8, "{hadamard} vs {rayleigh}");
    assert!((sym.eigenvalues[k] - eig.lambda).abs() < 1e-8);
}

#[test]
fn hadamard_matches_central_differences() {
    let g = grid();
    let p = ModelParams::reference().with_dispersals(0.7, 2.2).with_drifts(0.3, -0.5);
    for j in 0..2 {
        let d = p.species[j].dispersal;
        let delta = 1e-5 * d;
        let at = |x: f64| {
            let mut q = p;
            q.species[j].dispersal = x;
            principal_eigen(&q, &g, 3.0).unwrap().lambda
        };
        let fd = (at(d + delta) - at(d - delta)) / (2.0 * delta);
        let h = hadamard_derivative(&p, &g, 3.0, j).unwrap();
        assert!(((h - fd) / fd).abs() < 1e-4, "species {j}: {h} vs {fd}");
    }
}

#[test]
fn critical_domain_brackets_a_sign_change() {
    let g = grid();
    let p = ModelParams::reference();
    match critical_domain(&p, &g, (0.05, 6.0)).unwrap() {
        CriticalDomain::Found { z_lo, z_hi, critical, .. } => {
            assert!(principal_eigen(&p, &g, z_lo).unwrap().lambda < 0.0);
            assert!(principal_eigen(&p, &g, z_hi).unwrap().lambda > 0.0);
            assert!(z_lo < critical && critical < z_hi);
        }
        other => panic!("{other:?}"),
    }
    let weak = p.with_sources(NonlinearitySpec::monod(0.5, 1.0), NonlinearitySpec::monod(0.5, 1.0));
    assert!(matches!(critical_domain(&weak, &g, (0.05, 6.0)).unwrap(), CriticalDomain::None { .. }));
}

#[test]
fn operator_r0_increases_with_domain() {
    let g = grid();
    let p = ModelParams::reference();
    let r: Vec<f64> = [0.25, 0.5, 1.0, 2.0, 4.0].iter().map(|&z| operator_r0(&p, &g, z).unwrap()).collect();
    assert!(r.windows(2).all(|w| w[1] > w[0]), "{r:?}");
    assert!(r[4] < 4.0);
}

#[test]
fn dispersal_limits() {
    let g = grid();
    let p = ModelParams::reference();
    let ds = [1e-6, 1e-4, 0.1, 0.1 + 1e-7, 1.0, 10.0, 100.0, 1e3, 1e4];
    let probe = diffusion_limit_probe(&p, &g, 1.0, 0, &ds).unwrap();
    let lam: Vec<f64> = probe.rows.iter().map(|r| r.1).collect();
    let mut zero = p;
    zero.species[0].dispersal = 0.0;
    let at_zero = principal_eigen(&zero, &g, 1.0).unwrap().lambda;
    assert!((lam[0] - at_zero).abs() < 1e-4);
    assert!((lam[3] - lam[2]).abs() < 1e-6);
    // Truncated kernel on a short interval: ρ(W) < 1, so λ* settles to a plateau.
    assert!(probe.kernel_radius[0] < 1.0);
    assert_eq!(probe.trend, driftfront::spectral::DispersalTrend::Plateau);
    assert!(lam[4..].windows(2).all(|w| w[1] < w[0]), "{lam:?}");
    let steps: Vec<f64> = lam[5..].windows(2).map(|w| w[0] - w[1]).collect();
    assert!(steps.windows(2).all(|w| w[1] < w[0]), "{steps:?}");
}

/// Exact `∫_{-Z}^{Z} J(x - y) dy` from the closed-form tails.
fn window_mass(k: &KernelSpec<f64>, x: f64, z: f64) -> f64 {
    1.0 - kernel_tail(k, z - x) - kernel_tail(k, x + z)
}

/// Composite trapezoid with `n` panels.
fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + h * i as f64)).sum();
    h * (inner + 0.5 * (f(a) + f(b)))
}

#[test]
fn convolution_of_window_indicator_matches_fine_quadrature() {
    let k = KernelSpec::quartic_bump(1.0);
    let z = 2.0f64;
    let mut errors = Vec::new();
    for dx in [0.1f64, 0.05] {
        let g: Grid = build_grid(1.0, dx, 8.0).unwrap();
        let w = assemble_convolution(&k, &g).unwrap();
        let x = g.nodes();
        let m = g.cells_of(z);
        let inside: Vec<f64> = x.iter().map(|&xi| if xi.abs() <= z + 1e-12 { 1.0 } else { 0.0 }).collect();
        // Trapezoid on [-Z, Z]: half weight on the two end nodes.
        let mut f = inside.clone();
        f[g.centre() - m] = 0.5;
        f[g.centre() + m] = 0.5;
        let wf = w.apply(&f);
        let mut worst = 0.0f64;
        for i in g.centred_range(m) {
            let fine = trapezoid(|y| k.eval(x[i] - y), -z, z, 10 * 2 * m);
            assert!((fine - window_mass(&k, x[i], z)).abs() < 1e-4);
            let err = (wf[i] - fine).abs();
            if x[i].abs() + k.support_radius <= z {
                assert!(err < 1e-6, "interior node {}: {err}", x[i]);
            }
            worst = worst.max(err);
        }
        errors.push(worst);
    }
    // Rows whose kernel support crosses ±Z carry the O(dx²) trapezoid end error.
    assert!(errors[1] < 1e-3 && errors[0] / errors[1] > 3.5, "{errors:?}");
}

#[test]
fn quadrature_converges_at_second_order_or_better() {
    let k = KernelSpec::quartic_bump(1.0);
    let err = |dx: f64| {
        let g: Grid = build_grid(1.0, dx, 4.0).unwrap();
        let w = assemble_convolution_with(&k, &g, false).unwrap();
        (w.row_sum(g.centre()) - 1.0).abs()
    };
    let (a, b, c) = (err(0.1), err(0.05), err(0.025));
    assert!(a / b >= 3.5 && b / c >= 3.5, "{a:e} {b:e} {c:e}");
}

#[test]
fn constant_coefficient_limit_for_wide_domains() {
    let g: Grid = build_grid(1.0, 0.05, 16.0).unwrap();
    let zero = NonlinearitySpec::linear(0.0);
    let p = ModelParams::reference()
        .with_sources(zero, zero)
        .with_drifts(0.0, 0.0)
        .with_decays(CoefficientField::constant(1.0), CoefficientField::constant(0.5));
    // With W rows summing to one in the bulk, λ* approaches -min(a, b) from below.
    let l: Vec<f64> = [2.0, 6.0, 14.0].iter().map(|&z| principal_eigen(&p, &g, z).unwrap().lambda).collect();
    assert!(l[0] < l[1] && l[1] < l[2] && l[2] < -0.5);
    assert!(l[2] > -0.5 - 0.01, "{l:?}");
}

#[test]
fn split_and_interleave_round_trip() {
    let v = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let [a, b] = split(&v);
    assert_eq!(a, vec![1.0, 3.0, 5.0]);
    assert_eq!(b, vec![2.0, 4.0, 6.0]);
    assert_eq!(driftfront::spectral::interleave(&a, &b), v);
}

