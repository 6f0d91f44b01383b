//! Worked examples per module, each against an oracle computed here.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use besovlab::besov::{besov_norm, block_norms, check_embedding, check_lifting, duality_pairing, BesovParams};
use besovlab::ensemble::gaussian_probes;
use besovlab::fit::fit_rate;
use besovlab::grid::{assemble_laplacian, build_domain, lp_norm, Field, GridSpec};
use besovlab::interpolation::{interpolation_norm, k_functional, InterpolationCouple};
use besovlab::multiplier::{
    amalgam_norm, script_a_norm, sobolev_norm_1d, verify_resolvent_factorization, CubeDecomposition, DenseOperator,
    MultiplierParams, SobolevGrid,
};
use besovlab::partition::{build_partition, phi, DyadicPartition};
use besovlab::report::Report;
use besovlab::semigroup::{duhamel_solve, equivalent_norm, EquivalenceCase, XSpace};
use besovlab::spectral::{decompose, SpectralDecomposition};
use besovlab::Error;

fn setup(spec: GridSpec) -> (SpectralDecomposition, DyadicPartition) {
    let d = build_domain(spec).unwrap();
    let dec = decompose(&assemble_laplacian(&d)).unwrap();
    let part = build_partition(&dec);
    (dec, part)
}

fn quarter() -> (SpectralDecomposition, DyadicPartition) {
    setup(GridSpec::interval(0.0, 1.0, 0.25).unwrap())
}

/// Closed-form lattice eigenvalues `(4/h^2) sin^2(k pi h / 2)` on (0, 1).
fn lattice_eigs(n: usize) -> Vec<f64> {
    let h = 1.0 / (n + 1) as f64;
    (1..=n).map(|k| 4.0 / (h * h) * (k as f64 * PI * h / 2.0).sin().powi(2)).collect()
}

#[test]
fn domains_and_stencils() {
    let d = build_domain(GridSpec::interval(0.0, 1.0, 0.25).unwrap()).unwrap();
    assert_eq!(d.n(), 3);
    for (i, x) in [0.25, 0.5, 0.75].iter().enumerate() {
        assert_relative_eq!(d.position(i)[0], *x, epsilon = 1e-15);
    }
    let a = assemble_laplacian(&d);
    assert_relative_eq!(a.get(0, 0), 32.0);
    assert_relative_eq!(a.get(0, 1), -16.0);
    let sq = build_domain(GridSpec::rectangle((0.0, 1.0), (0.0, 1.0), 1.0 / 3.0).unwrap()).unwrap();
    assert_eq!(sq.n(), 4);
    let a = assemble_laplacian(&sq);
    assert_relative_eq!(a.get(0, 0), 36.0, max_relative = 1e-12);
    assert_relative_eq!(a.get(0, 1).abs(), 9.0, max_relative = 1e-12);
    let empty = GridSpec::parse_mask("1 0.25 3\n000\n");
    assert!(matches!(empty.and_then(build_domain), Err(Error::EmptyDomain)));
}

#[test]
fn lp_norms_on_quarter_grid() {
    let d = build_domain(GridSpec::interval(0.0, 1.0, 0.25).unwrap()).unwrap();
    let one = Field::new(d.clone(), vec![1.0; 3]).unwrap();
    assert_relative_eq!(lp_norm(&one, 1.0).unwrap(), 0.75);
    assert_relative_eq!(lp_norm(&one, f64::INFINITY).unwrap(), 1.0);
    let f = Field::new(d, vec![3.0, 4.0, 0.0]).unwrap();
    assert_relative_eq!(lp_norm(&f, 2.0).unwrap(), 2.5, max_relative = 1e-15);
}

#[test]
fn eigenvalues_and_functions() {
    let (dec, _) = quarter();
    let r2 = 2f64.sqrt();
    for (a, b) in dec.eigenvalues().iter().zip([16.0 * (2.0 - r2), 32.0, 16.0 * (2.0 + r2)]) {
        assert_relative_eq!(*a, b, max_relative = 1e-12);
    }
    let v1 = dec.eigenvector(0);
    let half = dec.fractional_power(1.0, &v1).unwrap();
    let expect = (16.0 * (2.0 - r2)).sqrt();
    assert_relative_eq!(expect, 3.0615, epsilon = 1e-4);
    for (x, y) in half.values().iter().zip(v1.values()) {
        assert_relative_eq!(*x, expect * y, epsilon = 1e-12);
    }
    let t = 0.01;
    let u = dec.semigroup_apply(t, 2.0, &v1).unwrap();
    for (x, y) in u.values().iter().zip(v1.values()) {
        assert_relative_eq!(*x, (-t * dec.eigenvalues()[0]).exp() * y, epsilon = 1e-14);
    }
    // inverse pair
    let f = Field::new(dec.domain().clone(), vec![0.3, -1.0, 2.0]).unwrap();
    let back = dec.apply_function(|l| 1.0 / l, &dec.apply_function(|l| l, &f).unwrap()).unwrap();
    for (x, y) in back.values().iter().zip(f.values()) {
        assert_relative_eq!(*x, y, max_relative = 1e-10);
    }
    let (big, _) = setup(GridSpec::unit_interval(255).unwrap());
    for (a, b) in big.eigenvalues().iter().zip(lattice_eigs(255)) {
        assert_relative_eq!(*a, b, max_relative = 1e-8);
    }
    assert!((big.lambda_min() / (PI * PI) - 1.0).abs() < 0.01);
}

#[test]
fn partition_examples() {
    for j0 in -2..6 {
        let x = 2f64.powi(j0);
        assert_relative_eq!(phi(j0, x), 1.0);
        assert_eq!(phi(j0 - 1, x) + phi(j0 + 1, x), 0.0);
        // 3 * 2^j0 sits between 2^(j0+1) and 2^(j0+2)
        let y = 3.0 * x;
        assert_relative_eq!(phi(j0 + 1, y) + phi(j0 + 2, y), 1.0, epsilon = 1e-15);
        assert_eq!(phi(j0, y), 0.0);
    }
    let (dec, part) = quarter();
    assert!(part.j_min() <= 0 && part.j_max() >= 4, "{:?}", part.j_range());
    let f = Field::new(dec.domain().clone(), vec![0.3, -1.0, 2.0]).unwrap();
    let mut sum = [0.0; 3];
    for j in part.j_range() {
        for (s, v) in sum.iter_mut().zip(part.phi_block(&dec, j, &f).unwrap().values()) {
            *s += v;
        }
    }
    for (s, v) in sum.iter().zip(f.values()) {
        assert_relative_eq!(*s, v, epsilon = 1e-10);
    }
}

/// Interval of `n` cells whose mode `k` has eigenvalue exactly `4^j0`.
fn tuned(j0: i32, n: usize, k: usize) -> GridSpec {
    let h = 2.0 * (((k + 1) as f64) * PI / (2.0 * (n + 1) as f64)).sin() / 2f64.powi(j0);
    GridSpec::interval(0.0, (n + 1) as f64 * h, h).unwrap()
}

#[test]
fn besov_examples() {
    let (dec, part) = setup(tuned(3, 15, 4));
    let v = dec.eigenvector(4);
    for (s, p, q) in [(0.5, 2.0, 1.0), (-1.0, 1.0, 2.0), (2.0, f64::INFINITY, f64::INFINITY)] {
        let b = besov_norm(&dec, &part, &v, &BesovParams::homogeneous(s, p, q)).unwrap();
        assert_relative_eq!(b, 8f64.powf(s) * lp_norm(&v, p).unwrap(), max_relative = 1e-12);
    }
    let (dec, part) = setup(GridSpec::unit_interval(63).unwrap());
    let f = gaussian_probes(63, 1, 5)[0].field(&dec);
    let blocks = block_norms(&dec, &part, &f, 3.0, true).unwrap();
    let max = blocks.blocks.iter().map(|b| b.1).fold(0.0, f64::max);
    assert_relative_eq!(besov_norm(&dec, &part, &f, &BesovParams::homogeneous(0.0, 3.0, f64::INFINITY)).unwrap(), max);
    assert_relative_eq!(check_embedding(&dec, &part, &f, 2.0, 2.0, 0.3, 1.0).unwrap(), 1.0, max_relative = 1e-12);
    let lift = check_lifting(&dec, &part, &f, 0.0, &BesovParams::homogeneous(0.3, 2.0, 2.0)).unwrap();
    assert_relative_eq!(lift, 1.0, max_relative = 1e-12);
    let (u, w) = (dec.eigenvector(3), dec.eigenvector(7));
    assert!(duality_pairing(&dec, &part, &u, &w).unwrap().abs() < 1e-12);
}

#[test]
fn multiplier_examples() {
    // Gaussian symbol: ||e^(-x^2/2)||_(L^2) = pi^(1/4)
    let g = sobolev_norm_1d(|x| (-x * x / 2.0).exp(), 0.0, SobolevGrid::default()).unwrap();
    assert_relative_eq!(g, PI.powf(0.25), max_relative = 1e-8);
    assert_eq!(sobolev_norm_1d(|_| 0.0, 1.5, SobolevGrid::default()).unwrap(), 0.0);

    let (dec, _) = quarter();
    let prm = MultiplierParams::defaults(1);
    let (dev, _) = verify_resolvent_factorization(&dec, |x| (-x).exp() + x, 0, &prm).unwrap();
    assert!(dev <= 1e-10);
    assert_eq!(verify_resolvent_factorization(&dec, |_| 0.0, 0, &prm).unwrap(), (0.0, 0.0));

    let d = build_domain(GridSpec::unit_interval(15).unwrap()).unwrap();
    let huge = CubeDecomposition::new(&d, 16.0).unwrap();
    let f = Field::new(d.clone(), (0..15).map(|i| (i as f64).sin()).collect()).unwrap();
    assert_relative_eq!(amalgam_norm(&f, &huge), lp_norm(&f, 2.0).unwrap(), max_relative = 1e-12);
    let id = DenseOperator::identity(d.clone());
    assert_eq!(script_a_norm(&id.scaled(0.0), &huge, 2), 0.0);
    let cubes = CubeDecomposition::new(&d, 1.0 / 16.0).unwrap();
    let bound = (0.5 * (1.0f64 / 16.0).sqrt()).powi(2);
    assert!(script_a_norm(&id, &cubes, 2) <= bound * (1.0 + 1e-12));
}

#[test]
fn semigroup_examples() {
    let (dec, part) = setup(GridSpec::unit_interval(31).unwrap());
    let case = EquivalenceCase::new(2.0, 0.5, 1.0, 2.0, f64::INFINITY, XSpace::Lp);
    let zero = vec![0.0; 31];
    assert_eq!(equivalent_norm(&dec, &part, &zero, &case).unwrap().0, 0.0);
    // q = inf on one mode: sup_t t^(-s/a) (t mu)^s0 e^(-t mu) ||v||_2 with mu = lambda
    let k = 9;
    let mut e = vec![0.0; 31];
    e[k] = 1.0;
    let lam = dec.eigenvalues()[k];
    let g = 1.0 - 0.25;
    let oracle = lam.powf(0.25) * (g / std::f64::consts::E).powf(g);
    assert_relative_eq!(equivalent_norm(&dec, &part, &e, &case).unwrap().0, oracle, max_relative = 1e-4);

    // stationary forcing A w gives u(t) = (1 - e^(-tA)) w
    let w = gaussian_probes(31, 1, 2)[0].field(&dec);
    let aw = dec.fractional_power(2.0, &w).unwrap();
    let ts = [0.0, 1e-3, 1e-2, 0.1];
    let traj = duhamel_solve(&dec, &Field::zeros(dec.domain().clone()), &vec![aw; 3], 2.0, &ts).unwrap();
    for (i, &t) in ts.iter().enumerate() {
        let expect = dec.apply_function(|l| 1.0 - (-t * l).exp(), &w).unwrap();
        for (x, y) in traj.field(&dec, i).values().iter().zip(expect.values()) {
            assert_relative_eq!(*x, y, epsilon = 1e-10);
        }
    }
}

#[test]
fn interpolation_examples() {
    let (dec, part) = setup(GridSpec::unit_interval(63).unwrap());
    let c = gaussian_probes(63, 1, 9).remove(0).coeffs;
    let cp = InterpolationCouple::new(2.0, (0.0, 2.0), (1.0, 2.0), 0.5, 2.0).unwrap();
    let n0 = besov_norm(&dec, &part, &dec.synthesize(&c), &cp.x0()).unwrap();
    let n1 = besov_norm(&dec, &part, &dec.synthesize(&c), &cp.x1()).unwrap();
    assert_relative_eq!(k_functional(&dec, &part, &c, 1e9, &cp).unwrap(), n0, max_relative = 1e-10);
    assert_relative_eq!(k_functional(&dec, &part, &c, 1e-9, &cp).unwrap(), 1e-9 * n1, max_relative = 1e-10);
    assert_eq!(interpolation_norm(&dec, &part, &vec![0.0; 63], &cp).unwrap(), 0.0);
}

#[test]
fn fit_and_emit_examples() {
    let f = fit_rate(&[(1.0, 1.0), (2.0, 2.0), (4.0, 4.0)]).unwrap();
    assert_relative_eq!(f.slope, 1.0, epsilon = 1e-14);
    assert_relative_eq!(f.r_squared, 1.0, epsilon = 1e-14);
    assert_relative_eq!(fit_rate(&[(1.0, 1.0), (2.0, 1.0), (4.0, 1.0)]).unwrap().slope, 0.0, epsilon = 1e-14);
    assert_relative_eq!(fit_rate(&[(1.0, 8.0), (2.0, 2.0), (4.0, 0.5)]).unwrap().slope, -2.0, epsilon = 1e-14);
    assert!(matches!(fit_rate(&[(1.0, 1.0), (2.0, 2.0)]), Err(Error::TooFewPoints(2))));
    assert!(matches!(fit_rate(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]), Err(Error::NonPositiveValue(_))));
    let dir = tempfile::tempdir().unwrap();
    Report::new("h").emit(dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.trim_end(), "suite,param_json,value,target,tol,pass");
}
