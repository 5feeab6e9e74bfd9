mod common;

use common::{ns_for, operator, planar, smooth_forcing};
use proptest::prelude::*;
use wedgeshock::elliptic::*;
use wedgeshock::grid::{GridField, NodeKind, ZAxis};
use wedgeshock::polar::{background_on_branch, Branch, UpstreamSpec};
use wedgeshock::stability::{obliqueness_mu, SectorGeometry};
use wedgeshock::GasModel;

fn planar_system(ns: usize, nt: usize, radius: f64) -> LinearSystem {
    let (_, c) = planar();
    let dom = TruncatedDomain::symmetric(&c.sector(), c.sigma, ns, nt, ZAxis::Planar, radius).unwrap();
    LinearSystem::assemble(&operator(&c), &dom).unwrap()
}

#[test]
fn zero_data_gives_zero() {
    let sys = planar_system(33, 17, 8.0);
    let (v, _) = sys.solve(&BvpData::zeros(sys.grid())).unwrap();
    assert_eq!(v.max_abs(), 0.0);
}

#[test]
fn rejects_short_truncation() {
    let (_, c) = planar();
    assert!(TruncatedDomain::symmetric(&c.sector(), c.sigma, 33, 17, ZAxis::Planar, 4.0).is_err());
}

#[test]
fn harmonic_power_is_annihilated_at_second_order() {
    // r̄^β sin(βθ̄) is harmonic in the scaled plane
    let beta = 0.7;
    let residual = |m: usize| {
        let sys = planar_system(32 * m + 1, 8 * m + 1, 8.0);
        let g = *sys.grid();
        let v = GridField::from_fn(g, "v", |i, j, _| g.rbar(i).powf(beta) * (beta * g.theta(j)).sin());
        let lv = sys.apply_operator(&v);
        let mut e: f64 = 0.0;
        for n in 0..g.len() {
            let (i, j, k) = g.unidx(n);
            if g.kind(i, j, k) == NodeKind::Interior && g.rbar(i) >= 0.5 && g.rbar(i) <= 4.0 {
                e = e.max(lv.values[n].abs());
            }
        }
        e
    };
    let e: Vec<f64> = [1, 2, 4].iter().map(|&m| residual(m)).collect();
    for w in e.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.8, "residuals {e:?}");
    }
}

#[test]
fn quadratic_is_reproduced_at_second_order() {
    let (_, c) = planar();
    let op = operator(&c);
    let residual = |m: usize| {
        let sys = planar_system(32 * m + 1, 8 * m + 1, 8.0);
        let g = *sys.grid();
        let v = GridField::from_fn(g, "q", |i, j, k| {
            let y = g.y(i, j, k);
            y[0] * y[1] + 0.5 * y[0] * y[0] - y[1] * y[1]
        });
        let exact = op.contract(&[[1.0, 1.0, 0.0], [1.0, -2.0, 0.0], [0.0, 0.0, 0.0]]);
        let lv = sys.apply_operator(&v);
        let mut e: f64 = 0.0;
        for n in 0..g.len() {
            let (i, j, k) = g.unidx(n);
            if g.kind(i, j, k) == NodeKind::Interior && g.rbar(i) >= 0.5 && g.rbar(i) <= 4.0 {
                e = e.max((lv.values[n] - exact).abs());
            }
        }
        e
    };
    let (e1, e2) = (residual(1), residual(2));
    assert!((e1 / e2).log2() >= 1.8, "{e1} {e2}");
}

#[test]
fn planar_manufactured_solution_converges() {
    let (_, c) = planar();
    let e = common::mms_errors(&c, (65, 33, 1), 3, 8.0, None, 0.6);
    for w in e.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.9, "errors {e:?}");
    }
}

#[test]
fn linear_field_with_edge_data() {
    // v = a + b y1 + c y2 is reproduced through the edge extension
    let (_, c) = planar();
    let sys = planar_system(97, 33, 8.0);
    let g = *sys.grid();
    let (a, b, cc) = (0.3, -0.2, 0.5);
    let mu = c.mu;
    let mut data = BvpData::zeros(&g);
    for n in 0..g.len() {
        let (i, j, k) = g.unidx(n);
        let y = g.y(i, j, k);
        data.cut[n] = a + b * y[0] + cc * y[1];
        data.g[n] = match g.kind(i, j, k) {
            NodeKind::Wedge => cc,
            NodeKind::Shock => mu[0] * b + mu[1] * cc,
            _ => 0.0,
        };
    }
    let (v, _) = solve_mixed_bvp(&sys, &data, Some(&[a])).unwrap();
    let mut e: f64 = 0.0;
    for n in 0..g.len() {
        let (i, j, k) = g.unidx(n);
        let y = g.y(i, j, k);
        e = e.max((v.values[n] - (a + b * y[0] + cc * y[1])).abs());
    }
    assert!(e < 1e-3, "error {e}");
}

fn barrier_rho(n: usize) -> Vec<f64> {
    // deterministic values in [−1, 1]
    (0..n).map(|k| (k as f64 * 0.754_877_666_246_692_7).fract() * 2.0 - 1.0).collect()
}

#[test]
fn barriers_dominate_barrier_data() {
    let (_, c) = planar();
    let sys = planar_system(ns_for(32.0, 16), 33, 32.0);
    let len = sys.grid().len();
    for b in [BarrierSpec::decay(c.beta, c.tau0, 1.0), BarrierSpec::regularity(c.alpha, c.tau1, 1.0)] {
        assert!(b.sine_floor(c.omega_bar) > 0.0);
        let (v, _) = solve_barrier_data(&sys, &b, &barrier_rho(len)).unwrap();
        let rep = comparison_check(&v, &b, &sys);
        assert!(rep.supersolution && rep.dominated, "{rep:?}");
        // zero field and the barrier itself
        assert!(comparison_check(&GridField::new(*sys.grid(), "0"), &b, &sys).dominated);
        let (vb, _) = solve_barrier_data(&sys, &b, &vec![1.0; len]).unwrap();
        let eq = comparison_check(&vb, &b, &sys);
        let vmax = b.sample(sys.grid()).max_abs();
        assert!(eq.dominated && eq.worst_margin.abs() < 1e-9 * vmax, "{eq:?}");
        let fit = decay_fit(&vb, &sys.dom).near_edge.unwrap();
        assert!((fit.slope - b.l).abs() <= 0.05, "slope {} vs {}", fit.slope, b.l);
    }
}

#[test]
fn smooth_data_is_flat_at_the_edge() {
    let (_, c) = planar();
    for per in [12, 16, 24] {
        let sys = planar_system(ns_for(32.0, per), 2 * per + 1, 32.0);
        let (v, _) = sys.solve(&smooth_forcing(&sys, 0.5)).unwrap();
        let fit = decay_fit(&v, &sys.dom).near_edge.unwrap();
        assert!(fit.slope >= 1.0 + c.alpha - 0.1, "slope {} at {per}", fit.slope);
    }
}

#[test]
fn strong_branch_loses_edge_regularity() {
    let (bg, _) = planar();
    let gas = GasModel::new(1.4).unwrap();
    let spec = UpstreamSpec::new(gas, bg.q0, bg.theta_i).unwrap();
    let strong = background_on_branch(&spec, bg.theta_w, Branch::Strong).unwrap();
    let mu = obliqueness_mu(&gas, &strong.upstream, &strong.downstream).unwrap();
    let a0 = gas.coefficients(&strong.downstream).unwrap();
    let geom = SectorGeometry::new(mu, &a0, strong.sigma);
    assert!(geom.phi_cap >= std::f64::consts::FRAC_PI_2);
    // a long near-edge window so the inner cut does not steepen the fit
    let dom = TruncatedDomain::symmetric(&geom, strong.sigma, ns_for(1024.0, 12), 33, ZAxis::Planar, 1024.0).unwrap();
    let sys = LinearSystem::assemble(&Operator::new(a0, mu).unwrap(), &dom).unwrap();
    let (v, _) = sys.solve(&smooth_forcing(&sys, 0.5)).unwrap();
    let slope = decay_fit(&v, &dom).near_edge.unwrap().slope;
    assert!(slope < 0.9, "strong slope {slope}");
}

#[test]
fn truncation_error_decays_on_compact_sets() {
    // nodes line up across radii since the radial spacing is shared
    let per = 16;
    let solve = |radius: f64| {
        let sys = planar_system(ns_for(radius, per), 33, radius);
        sys.solve(&smooth_forcing(&sys, 0.5)).unwrap().0
    };
    let diff = |r: f64| {
        let (a, b) = (solve(r), solve(2.0 * r));
        let mut d: f64 = 0.0;
        for i in 0..a.grid.ns {
            let rb = a.grid.rbar(i);
            if (0.25..=4.0).contains(&rb) {
                for j in 0..a.grid.nt {
                    d = d.max((a.at(i, j, 0) - b.at(i + per, j, 0)).abs());
                }
            }
        }
        d / a.max_abs()
    };
    let (d16, d32) = (diff(16.0), diff(32.0));
    assert!(d32 < d16 && d32 < 0.05, "{d16} {d32}");
}

#[test]
fn uniqueness_barrier_crossing() {
    let (_, c) = planar();
    let (beta, beta_p, c2) = (c.beta, c.beta + 0.3, 2.0);
    let radii: Vec<f64> = [1e-1, 1e-2, 1e-3].iter().map(|&t| uniqueness_crossing_radius(c2, t, beta, beta_p)).collect();
    assert!(radii.windows(2).all(|w| w[1] > w[0]));
    // beyond the crossing radius the barrier exceeds C2 |y|^β
    let sys = planar_system(ns_for(64.0, 8), 17, 64.0);
    let g = *sys.grid();
    let tau = 0.5;
    let v3 = BarrierSpec::decay(beta, c.tau0, 1.0);
    let u = uniqueness_barrier(&g, &v3, 1.0, tau, beta_p);
    let rc = uniqueness_crossing_radius(c2, tau, beta, beta_p);
    for n in 0..g.len() {
        let (i, j, k) = g.unidx(n);
        let y = g.y(i, j, k);
        let r = y[0].hypot(y[1]);
        if r > rc {
            assert!(u.values[n] >= c2 * r.powf(beta));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn discrete_maximum_principle(seed in 0u64..1000) {
        let sys = planar_system(41, 17, 8.0);
        let g = *sys.grid();
        let mut data = BvpData::zeros(&g);
        let mut x = seed.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1);
        let mut next = || {
            x = x.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
            (x >> 11) as f64 / (1u64 << 53) as f64
        };
        for n in 0..g.len() {
            let (i, j, k) = g.unidx(n);
            match g.kind(i, j, k) {
                NodeKind::Interior => data.f1[n] = next(),
                NodeKind::Wedge => data.g[n] = next(),
                NodeKind::Shock => data.g[n] = -next(),
                _ => {}
            }
        }
        let (v, _) = sys.solve(&data).unwrap();
        prop_assert!(v.values.iter().all(|&x| x <= 1e-12));
    }
}
