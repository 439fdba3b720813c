use diagstrip::assembly::{build_candidate, verify_candidate, Sampling};
use diagstrip::boundary::{derivative_difference_roots, eval, BoundaryFunction, BoundaryPair};
use diagstrip::foliation::{
    d_fields, left_candidate_eval, left_condition, left_expressions, right_candidate_eval, right_condition,
    right_expressions,
};
use diagstrip::geometry::{left_diagonal_endpoints, right_diagonal_endpoints, Point, Strip};
use diagstrip::herringbone::{a_from_t, herringbone_eval, local_data, spine_args, spine_rhs, Orientation, Spine};
use diagstrip::oracle::simulate_extremal;
use diagstrip::vectorfield::{
    field, find_stationary_points, jacobian, shoot_separatrix, Launch, SaddleSide, StationaryKind,
    StationaryPoint, VectorFieldState,
};
use proptest::prelude::*;

fn coeffs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-2.0f64..2.0, 1..=n)
}

fn pair_strategy() -> impl Strategy<Value = BoundaryPair> {
    (coeffs(4), coeffs(4)).prop_map(|(p, m)| BoundaryPair::from_coefficients(&p, &m).unwrap())
}

fn orientation() -> impl Strategy<Value = Orientation> {
    prop_oneof![Just(Orientation::Left), Just(Orientation::Right)]
}

fn cubic_eps2() -> (BoundaryPair, Strip, Spine) {
    let pair = BoundaryPair::from_coefficients(&[0.0, 12.0, 0.0, 1.0], &[0.0, 0.0, 0.0, 1.0]).unwrap();
    let strip = Strip::new(2.0).unwrap();
    let spine = Spine::constant(&pair, &strip, Orientation::Left, 0.5, (-6.0, 6.0), 65).unwrap();
    (pair, strip, spine)
}

fn saddle(pts: &[StationaryPoint]) -> &StationaryPoint {
    pts.iter().find(|p| p.side == Some(SaddleSide::Upper)).unwrap()
}

fn sw_state(e: f64) -> VectorFieldState {
    let pair = BoundaryPair::from_coefficients(&[0.0, 0.0, 1.0, 1.0], &[0.0, 0.0, 0.0, 1.0]).unwrap();
    VectorFieldState::new(pair, e, Orientation::Left).unwrap()
}

/// x₁ of a curve at height x₂, by linear interpolation between samples.
fn x1_at(samples: &[Point], x2: f64) -> Option<f64> {
    samples.windows(2).find_map(|w| {
        let (a, b) = (w[0], w[1]);
        let (lo, hi) = (a.x2.min(b.x2), a.x2.max(b.x2));
        (lo <= x2 && x2 <= hi && hi > lo).then(|| a.x1 + (b.x1 - a.x1) * (x2 - a.x2) / (b.x2 - a.x2))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn derivatives_match_central_differences(c in coeffs(4), t in -10.0f64..10.0) {
        let f = BoundaryFunction::new(c).unwrap();
        let d = 1e-5;
        for k in 1..=3u32 {
            let exact = eval(&f, t, k).unwrap();
            let fd = (eval(&f, t + d, k - 1).unwrap() - eval(&f, t - d, k - 1).unwrap()) / (2.0 * d);
            prop_assert!((exact - fd).abs() <= 1e-6 * (1.0 + exact.abs()), "k={} {} vs {}", k, exact, fd);
        }
    }

    #[test]
    fn derivative_roots_are_sorted_and_accurate(pair in pair_strategy()) {
        let roots = derivative_difference_roots(&pair, (-10.0, 10.0)).unwrap();
        let q = pair.derivative_difference();
        let scale = 1.0 + q.coefficients().iter().enumerate().map(|(k, c)| c.abs() * 10f64.powi(k as i32)).sum::<f64>();
        for r in &roots {
            prop_assert!((pair.fp(r.u0, 1) - pair.fm(r.u0, 1)).abs() <= 1e-10 * scale);
        }
        prop_assert!(roots.windows(2).all(|w| w[0].u0 < w[1].u0));
    }

    #[test]
    fn diagonal_endpoints_lie_on_the_boundary(e in 0.01f64..5.0, x1 in -50.0f64..50.0, s in -1.0f64..=1.0) {
        let strip = Strip::new(e).unwrap();
        let p = Point::new(x1, s * e);
        let (lo, hi) = right_diagonal_endpoints(&strip, p).unwrap();
        prop_assert!(lo.x2 == -e && hi.x2 == e);
        let c = p.x1 - p.x2;
        prop_assert!((lo.x1 - lo.x2 - c).abs() <= 1e-15 * (1.0 + c.abs() + e));
        prop_assert!((hi.x1 - hi.x2 - c).abs() <= 1e-15 * (1.0 + c.abs() + e));
        let (lo, hi) = left_diagonal_endpoints(&strip, p).unwrap();
        prop_assert!(lo.x2 == -e && hi.x2 == e);
        let c = p.x1 + p.x2;
        prop_assert!((lo.x1 + lo.x2 - c).abs() <= 1e-15 * (1.0 + c.abs() + e));
        prop_assert!((hi.x1 + hi.x2 - c).abs() <= 1e-15 * (1.0 + c.abs() + e));
    }

    #[test]
    fn candidates_are_affine_along_their_segments(pair in pair_strategy(), e in 0.1f64..2.0, c in -5.0f64..5.0, s in -0.9f64..0.9) {
        let strip = Strip::new(e).unwrap();
        let h = 1e-3;
        let scale = pair.value_scale(c - 2.0 * e, c + 2.0 * e);
        let x2 = s * e;
        let r = |d: f64| right_candidate_eval(&pair, &strip, Point::new(c + x2 + d, x2 + d)).unwrap();
        prop_assert!((r(h) + r(-h) - 2.0 * r(0.0)).abs() <= 1e-9 * scale);
        let l = |d: f64| left_candidate_eval(&pair, &strip, Point::new(c - x2 - d, x2 + d)).unwrap();
        prop_assert!((l(h) + l(-h) - 2.0 * l(0.0)).abs() <= 1e-9 * scale);
    }

    #[test]
    fn candidates_reproduce_the_boundary(pair in pair_strategy(), e in 0.1f64..2.0, x1 in -10.0f64..10.0) {
        let strip = Strip::new(e).unwrap();
        let scale = pair.value_scale(x1 - 3.0 * e, x1 + 3.0 * e);
        for eval in [right_candidate_eval, left_candidate_eval] {
            prop_assert!((eval(&pair, &strip, Point::new(x1, e)).unwrap() - pair.fp(x1, 0)).abs() <= 1e-12 * scale);
            prop_assert!((eval(&pair, &strip, Point::new(x1, -e)).unwrap() - pair.fm(x1, 0)).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn conditions_agree_with_d_fields(pair in pair_strategy(), e in 0.1f64..2.0, u in -5.0f64..5.0) {
        let strip = Strip::new(e).unwrap();
        let (a, b, s) = right_expressions(&pair, &strip, u);
        let (c, d, t) = left_expressions(&pair, &strip, u);
        // Off the slack band the two tests must agree exactly.
        prop_assume!(a.abs().min(b.abs()) > 1e-9 * s && c.abs().min(d.abs()) > 1e-9 * t);
        let up = d_fields(&pair, Point::new(u, e)).unwrap();
        prop_assert_eq!(right_condition(&pair, &strip, u), up.d_plus >= 0.0 && up.d_minus >= 0.0);
        let down = d_fields(&pair, Point::new(u, -e)).unwrap();
        prop_assert_eq!(left_condition(&pair, &strip, u), down.d_plus >= 0.0 && down.d_minus >= 0.0);
    }

    #[test]
    fn right_candidate_is_concave_where_the_condition_holds(
        p in proptest::collection::vec(-2.0f64..2.0, 3),
        m in proptest::collection::vec(-2.0f64..2.0, 3),
        e in 0.1f64..1.0,
        c in -5.0f64..5.0,
        s in -0.8f64..0.8,
    ) {
        let pair = BoundaryPair::from_coefficients(&p, &m).unwrap();
        let strip = Strip::new(e).unwrap();
        let h = e / 16.0;
        prop_assume!((0..=8).all(|k| right_condition(&pair, &strip, c - 2.0 * h + k as f64 * h / 2.0)));
        let scale = pair.value_scale(c - 3.0 * e, c + 3.0 * e);
        let x2 = s * e;
        let b = |d: f64| right_candidate_eval(&pair, &strip, Point::new(c + x2 + d, x2 - d)).unwrap();
        prop_assert!(b(h) + b(-h) - 2.0 * b(0.0) <= 1e-9 * scale);
    }

    #[test]
    fn n_plus_equals_n_minus_on_the_family(pair in pair_strategy(), o in orientation(), e in 0.2f64..2.0, u in -3.0f64..3.0, s in 0.05f64..0.95, neg in any::<bool>()) {
        let strip = Strip::new(e).unwrap();
        let t = if neg { -s * e } else { s * e };
        let a = a_from_t(&pair, &strip, o, u, t).unwrap();
        let ld = local_data(&pair, &strip, o, u, t, a).unwrap();
        let (tp, tm) = spine_args(o, e, u, t);
        let scale = 1.0_f64.max(a.abs()).max(pair.value_scale(u - 2.0 * e, u + 2.0 * e)) / (e * e * s);
        prop_assert!((ld.n_plus - ld.n_minus).abs() <= 1e-9 * scale, "{:?}", ld);
        let target = (pair.fp(tp, 1) - pair.fm(tm, 1)) / (2.0 * t);
        prop_assert!((ld.n_plus - target).abs() <= 1e-9 * scale, "{} vs {}", ld.n_plus, target);
    }

    #[test]
    fn spine_slope_is_bounded(pair in pair_strategy(), o in orientation(), e in 0.2f64..2.0, u in -3.0f64..3.0, s in -0.95f64..0.95) {
        prop_assume!(s.abs() > 1e-3);
        let strip = Strip::new(e).unwrap();
        if let Ok(v) = spine_rhs(&pair, &strip, o, u, s * e) {
            let (dp, dm) = diagstrip::herringbone::d_orient(&pair, &strip, o, u, s * e).unwrap();
            if dp >= 0.0 && dm >= 0.0 {
                prop_assert!((-1.0..=1.0).contains(&v), "{}", v);
            }
        }
    }

    #[test]
    fn herringbone_is_c1_across_the_spine(u in -3.0f64..3.0) {
        let (pair, strip, spine) = cubic_eps2();
        let t = 0.5;
        let a = a_from_t(&pair, &strip, Orientation::Left, u, t).unwrap();
        let ld = local_data(&pair, &strip, Orientation::Left, u, t, a).unwrap();
        let scale = 1.0_f64.max(a.abs()).max(pair.value_scale(u - 2.0, u + 2.0));
        let b = |x1: f64, x2: f64| herringbone_eval(&pair, &strip, &spine, Point::new(x1, x2)).unwrap();
        let (d, eta) = (1e-4, 1e-9);
        for side in [1.0, -1.0] {
            let y = t + side * eta;
            let dx1 = (b(u + d, y) - b(u - d, y)) / (2.0 * d);
            prop_assert!((dx1 - 0.5 * ld.r).abs() <= 1e-6 * scale, "x1 side {}: {} vs {}", side, dx1, 0.5 * ld.r);
            let g = |k: f64| b(u, t + side * k * d);
            let dx2 = side * (-3.0 * g(0.0) + 4.0 * g(1.0) - g(2.0)) / (2.0 * d);
            let want = 0.5 * (ld.r_minus - ld.r_plus);
            prop_assert!((dx2 - want).abs() <= 1e-6 * scale, "x2 side {}: {} vs {}", side, dx2, want);
        }
    }

    #[test]
    fn herringbone_is_diagonally_concave(x1 in -3.0f64..3.0, s in -0.95f64..0.95) {
        let (pair, strip, spine) = cubic_eps2();
        let p = Point::new(x1, 2.0 * s);
        let h = 1.0 / 32.0;
        let scale = 1.0_f64.max(pair.value_scale(x1 - 4.0, x1 + 4.0));
        let b = |q: Point| herringbone_eval(&pair, &strip, &spine, q).unwrap();
        for (d1, d2) in [(1.0, 1.0), (1.0, -1.0)] {
            let (a, c) = (Point::new(x1 + h * d1, p.x2 + h * d2), Point::new(x1 - h * d1, p.x2 - h * d2));
            prop_assume!(strip.contains(a) && strip.contains(c));
            prop_assert!(b(a) + b(c) - 2.0 * b(p) <= 1e-8 * scale);
        }
    }

    #[test]
    fn jacobian_matches_field_differences(pair in pair_strategy(), o in orientation(), e in 0.1f64..2.0, x1 in -3.0f64..3.0, s in -1.0f64..1.0) {
        let st = VectorFieldState::new(pair, e, o).unwrap();
        let p = Point::new(x1, s * e);
        let j = jacobian(&st, p);
        let h = 1e-5;
        let fd1 = |dx: Point| {
            let (a, b) = (field(&st, Point::new(p.x1 + dx.x1, p.x2 + dx.x2)), field(&st, Point::new(p.x1 - dx.x1, p.x2 - dx.x2)));
            ((a.0 - b.0) / (2.0 * h), (a.1 - b.1) / (2.0 * h))
        };
        let (c1, c2) = (fd1(Point::new(h, 0.0)), fd1(Point::new(0.0, h)));
        let fd = [[c1.0, c2.0], [c1.1, c2.1]];
        let scale = 1.0 + j.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for r in 0..2 {
            for c in 0..2 {
                prop_assert!((j[r][c] - fd[r][c]).abs() <= 1e-6 * scale, "{:?} vs {:?}", j, fd);
            }
        }
    }

    #[test]
    fn nodes_have_scalar_jacobians(
        p in proptest::collection::vec(-2.0f64..2.0, 4),
        m in proptest::collection::vec(-2.0f64..2.0, 4),
        o in orientation(),
        e in 0.01f64..0.2,
    ) {
        let pair = BoundaryPair::from_coefficients(&p, &m).unwrap();
        let st = VectorFieldState::new(pair.clone(), e, o).unwrap();
        // Missing saddles or multiple roots are outside this property.
        if let Ok(pts) = find_stationary_points(&st, (-5.0, 5.0)) {
            for n in pts.iter().filter(|q| q.kind == StationaryKind::Node) {
                let u0 = n.node_u0;
                let c = e * (pair.fp(u0, 2) - pair.fm(u0, 2));
                let j = n.jacobian;
                let scale = 1.0 + c.abs();
                prop_assert!((j[0][0] - c).abs() <= 1e-8 * scale && (j[1][1] - c).abs() <= 1e-8 * scale, "{:?} c={}", j, c);
                prop_assert!(j[0][1].abs() <= 1e-8 * scale && j[1][0].abs() <= 1e-8 * scale);
            }
        }
    }

    #[test]
    fn saddle_eigen_data_follow_the_characteristic_polynomial(a2 in 0.2f64..3.0, a3 in 0.1f64..2.0, a1 in -1.0f64..1.0, k in 0.05f64..0.9) {
        // κε < 1 keeps u₊ inside the (u₀, u₀ + 2ε) bracket.
        let e = k * a2 / (6.0 * a3);
        let pair = BoundaryPair::from_coefficients(&[0.0, a1, a2, a3], &[0.0, 0.0, 0.0, a3]).unwrap();
        let st = VectorFieldState::new(pair, e, Orientation::Left).unwrap();
        let pts = find_stationary_points(&st, (-10.0, 10.0)).unwrap();
        let sd = saddle(&pts);
        let s = sd.s.unwrap();
        let c = 2.0 * a2 * e;
        for l in sd.eigenvalues {
            let l = l / c;
            prop_assert!((l * l - s * l - 2.0 * s).abs() <= 1e-10 * (1.0 + s * s), "λ={} s={}", l, s);
        }
        let v = sd.eigenvectors[0];
        let slope = v.1 / v.0;
        let want = 2.0 / (s - 2.0 + (s * s + 8.0 * s).sqrt());
        prop_assert!((slope - want).abs() <= 1e-8, "{} vs {}", slope, want);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn built_candidates_are_diagonally_concave(e in 0.05f64..0.16, seed in any::<u64>()) {
        let pair = BoundaryPair::from_coefficients(&[0.0, 0.0, 1.0, 1.0], &[0.0, 0.0, 0.0, 1.0]).unwrap();
        let c = build_candidate(&pair, &Strip::new(e).unwrap(), (-1.0, 1.0)).unwrap();
        let r = verify_candidate(&c, Sampling { n_points: 2000, h: e / 64.0, seed }).unwrap();
        prop_assert!(r.concavity_violation <= 1e-9 * r.scale, "{:?}", r);
        prop_assert!(r.boundary_residual <= 1e-10 * r.scale, "{:?}", r);
    }

    #[test]
    fn split_trees_conserve_mass(x1 in -1.0f64..1.0, s in -0.99f64..0.99, quadratic in any::<bool>()) {
        let (pair, e) = if quadratic {
            (BoundaryPair::from_coefficients(&[0.0, 0.0, 1.0], &[0.0, 2.0]).unwrap(), 0.25)
        } else {
            (BoundaryPair::from_coefficients(&[0.0, 0.0, 1.0, 1.0], &[0.0, 0.0, 0.0, 1.0]).unwrap(), 0.1)
        };
        let c = build_candidate(&pair, &Strip::new(e).unwrap(), (-2.0, 3.0)).unwrap();
        let sim = simulate_extremal(&c, Point::new(x1, s * e), 200, 1e-12).unwrap();
        prop_assert!((sim.tree.total_mass() - 1.0).abs() <= 1e-14);
        let (bary, mass) = sim.tree.martingale_defects();
        prop_assert!(bary <= 1e-14 && mass <= 1e-14, "{} {}", bary, mass);
        prop_assert!(sim.tree.splits_are_diagonal());
    }
}

#[test]
fn saddle_eigen_data_tend_to_their_limits() {
    let mut errs = Vec::new();
    for e in [0.1, 0.05, 0.025] {
        let st = sw_state(e);
        let pts = find_stationary_points(&st, (-10.0, 10.0)).unwrap();
        let sd = saddle(&pts);
        let c = 2.0 * e;
        let l = [sd.eigenvalues[0] / c, sd.eigenvalues[1] / c];
        let sl = [sd.eigenvectors[0].1 / sd.eigenvectors[0].0, sd.eigenvectors[1].1 / sd.eigenvectors[1].0];
        let err = (l[0] + 1.0).abs().max((l[1] - 2.0).abs()).max((sl[0] - 1.0).abs()).max((sl[1] + 0.5).abs());
        errs.push(err);
    }
    for w in errs.windows(2) {
        let rate = w[0] / w[1];
        assert!((1.6..2.5).contains(&rate), "{errs:?}");
    }
}

#[test]
fn separatrices_for_smaller_epsilon_lie_to_the_left() {
    let curve = |e: f64| {
        let st = sw_state(e);
        let pts = find_stationary_points(&st, (-10.0, 10.0)).unwrap();
        let node = pts.iter().find(|p| p.kind == StationaryKind::Node).unwrap();
        shoot_separatrix(&st, saddle(&pts), node, Launch::Connecting).unwrap().samples
    };
    let es = [0.15, 0.1, 0.05, 0.025];
    let curves: Vec<_> = es.iter().map(|&e| curve(e)).collect();
    for k in 1..es.len() {
        for i in 1..20 {
            let x2 = es[k] * i as f64 / 20.0;
            let small = x1_at(&curves[k], x2).unwrap();
            let big = x1_at(&curves[k - 1], x2).unwrap();
            assert!(small < big, "ε={} x2={x2}: {small} vs {big}", es[k]);
        }
    }
}
