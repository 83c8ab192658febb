use proptest::prelude::*;

use vhetnet_jubd::conic::{
    add_geometric_mean_tree, add_qol_taylor_bound, residuals, solve_relaxation, taylor_rhs, ClarabelBackend,
    ConicProgram, Fixing, LinExpr, TaylorPoint,
};
use vhetnet_jubd::metrics::empirical_cdf;

fn slots() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..4).prop_flat_map(|n| {
        let v = || prop::collection::vec(-50.0..50.0f64, n);
        (v(), v(), v(), v())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn taylor_never_exceeds_quadratic_over_linear(
        (p0, q0, p, q) in slots(),
        beta0 in 0.1..100.0f64,
        beta in 0.1..100.0f64,
    ) {
        let point = TaylorPoint { p0: p0.clone(), q0: q0.clone(), beta0 };
        let rhs = taylor_rhs(&point, &p, &q, beta);
        let truth: f64 = p.iter().zip(&q).map(|(a, b)| (a * a + b * b) / beta).sum();
        prop_assert!(rhs <= truth + 1e-9 * (1.0 + truth.abs()));
        // tight at the expansion point
        let at = taylor_rhs(&point, &p0, &q0, beta0);
        let f0: f64 = p0.iter().zip(&q0).map(|(a, b)| (a * a + b * b) / beta0).sum();
        prop_assert!((at - f0).abs() <= 1e-9 * (1.0 + f0));
    }

    #[test]
    fn taylor_row_matches_function((p0, q0, p, q) in slots(), beta0 in 0.1..10.0f64, beta in 0.1..10.0f64) {
        let n = p.len();
        let mut prog = ConicProgram::new();
        let alpha = prog.add_var("alpha");
        let pv: Vec<_> = (0..n).map(|i| prog.add_var(format!("p{i}"))).collect();
        let qv: Vec<_> = (0..n).map(|i| prog.add_var(format!("q{i}"))).collect();
        let bv = prog.add_var("beta");
        let point = TaylorPoint { p0, q0, beta0 };
        let pe: Vec<LinExpr> = pv.iter().map(|&v| LinExpr::var(v)).collect();
        let qe: Vec<LinExpr> = qv.iter().map(|&v| LinExpr::var(v)).collect();
        add_qol_taylor_bound(&mut prog, LinExpr::var(alpha), &pe, &qe, bv, &point).unwrap();
        let rhs = taylor_rhs(&point, &p, &q, beta);
        let mut x = vec![0.0; prog.num_vars()];
        for i in 0..n {
            x[pv[i]] = p[i];
            x[qv[i]] = q[i];
        }
        x[bv] = beta;
        x[alpha] = rhs;
        let r = residuals(&prog, &x).unwrap();
        prop_assert!(r.iter().all(|&v| v <= 1e-8 * (1.0 + rhs.abs())));
        x[alpha] = rhs + 1e-3 * (1.0 + rhs.abs());
        prop_assert!(residuals(&prog, &x).unwrap().iter().any(|&v| v > 0.0));
    }

    #[test]
    fn tree_root_is_bounded_by_geometric_mean(depth in 1u32..4, seed in prop::collection::vec(0.0..1.0f64, 16)) {
        let n = 1usize << depth;
        let mut prog = ConicProgram::new();
        let leaves: Vec<_> = (0..n).map(|i| prog.add_var(format!("t{i}"))).collect();
        let root = add_geometric_mean_tree(&mut prog, &leaves).unwrap();
        prop_assert_eq!(prog.num_vars(), 2 * n - 1);
        // leaves then internal nodes in creation order, each at a fraction
        // of the geometric mean of its children
        let mut x = vec![0.0; prog.num_vars()];
        let mut level: Vec<f64> = (0..n).map(|i| { x[leaves[i]] = 10.0 * seed[i]; x[leaves[i]] }).collect();
        let mut next = n;
        let mut k = 0;
        while level.len() > 1 {
            level = level.chunks_exact(2).map(|c| {
                let z = (c[0] * c[1]).sqrt() * seed[(k + 7) % 16];
                k += 1;
                x[next] = z;
                next += 1;
                z
            }).collect();
        }
        prop_assert!(residuals(&prog, &x).unwrap().iter().all(|&r| r <= 1e-9));
        let prod: f64 = leaves.iter().map(|&v| x[v]).product();
        prop_assert!(x[root].powi(n as i32) <= prod * (1.0 + 1e-9) + 1e-300);
    }

    #[test]
    fn cdf_percentiles_are_monotone(samples in prop::collection::vec(-1e3..1e3f64, 1..200)) {
        let cdf = empirical_cdf(&samples).unwrap();
        let mut last = f64::NEG_INFINITY;
        for i in 0..=20 {
            let v = cdf.percentile(f64::from(i) / 20.0);
            prop_assert!(v >= last);
            last = v;
        }
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(cdf.percentile(0.0) >= lo && cdf.percentile(1.0) <= hi);
        prop_assert!(cdf.mean() >= lo - 1e-9 && cdf.mean() <= hi + 1e-9);
    }
}

#[test]
fn tree_maximum_is_the_geometric_mean() {
    let t = [2.0, 8.0, 0.5, 4.0];
    let mut prog = ConicProgram::new();
    let leaves: Vec<_> = (0..4).map(|i| prog.add_var(format!("t{i}"))).collect();
    for (&v, &x) in leaves.iter().zip(&t) {
        prog.fix(v, x).unwrap();
    }
    let root = add_geometric_mean_tree(&mut prog, &leaves).unwrap();
    prog.maximize(LinExpr::var(root)).unwrap();
    let s = solve_relaxation(&prog, &Fixing::new(), &ClarabelBackend::default());
    assert!(s.is_optimal());
    assert!((s.values[root] - 32f64.powf(0.25)).abs() < 1e-6);
}
