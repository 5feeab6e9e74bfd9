use wedgeshock::geometry::{EdgeBump, ShockPerturbation, Transform, WedgeBump, WedgeGeometry};
use wedgeshock::grid::{Grid, ZAxis};

const SIGMA: f64 = 0.55;

fn grid() -> Grid {
    let z = ZAxis::Periodic { z0: 0.0, period: 4.0, n: 24 };
    Grid::new(41, 17, z, 1.0 / 16.0, 16.0, 0.5, 1.2, 1.4).unwrap()
}

fn wedge(eps: f64) -> WedgeGeometry {
    WedgeGeometry {
        wedge: vec![WedgeBump { amplitude: eps, c1: 1.5, r1: 1.2, c3: 2.0, r3: Some(1.5) }],
        edge: vec![EdgeBump { amplitude: 0.5 * eps, c3: 2.0, r3: Some(1.5) }],
        period: Some(4.0),
    }
}

fn shock(g: &Grid, w: &WedgeGeometry, eps: f64) -> ShockPerturbation {
    let w = w.clone();
    ShockPerturbation::from_fn(g, SIGMA, move |y2, y3| {
        w.e1(y3) + eps * y2 * (-y2 * y2).exp() * (1.0 + 0.5 * (std::f64::consts::PI * y3 / 2.0).sin())
    })
}

#[test]
fn zero_perturbation_is_identity() {
    let g = grid();
    let w = WedgeGeometry::flat();
    let sp = ShockPerturbation::zero(&g, SIGMA);
    let t = Transform::new(&w, &sp);
    for y in [[0.3, 0.1, 0.7], [2.0, 0.5, 3.9], [0.01, 0.004, 0.0]] {
        let jd = t.jacobian(y).unwrap();
        assert_eq!(jd.x, y);
        for i in 0..3 {
            for k in 0..3 {
                assert_eq!(jd.j[i][k], if i == k { 1.0 } else { 0.0 });
                assert!(jd.h[i][k].iter().all(|v| *v == 0.0));
            }
        }
        assert_eq!(t.forward(y).unwrap(), y);
    }
    assert_eq!(sp.mollify_extend().eval([1.0, 0.3, 0.2]).v, 0.0);
}

#[test]
fn extension_has_the_shock_trace() {
    let g = grid();
    let w = wedge(0.04);
    let sp = shock(&g, &w, 0.04);
    let ext = sp.mollify_extend();
    for &(y2, y3) in &[(0.3, 0.4), (1.1, 2.5), (2.7, 3.3)] {
        let on = ext.eval([y2 / SIGMA, y2, y3]).v;
        assert!((on - sp.eval(y2, y3)).abs() < 1e-13, "{on} vs {}", sp.eval(y2, y3));
    }
    // beyond the cutoff
    let y2 = 0.5;
    assert_eq!(ext.eval([(y2 + 3.0) / SIGMA, y2, 1.0]).v, 0.0);
}

#[test]
fn extension_derivatives_match_differences() {
    let g = grid();
    let w = wedge(0.04);
    let sp = shock(&g, &w, 0.04);
    let ext = sp.mollify_extend();
    let h = 1e-5;
    // inside the cutoff transition so every term contributes
    for y in [[3.0, 0.4, 1.3], [1.0, 0.2, 2.2], [4.5, 1.1, 0.4]] {
        let e = ext.eval(y);
        for l in 0..3 {
            let mut p = y;
            let mut m = y;
            p[l] += h;
            m[l] -= h;
            let (ep, em) = (ext.eval(p), ext.eval(m));
            let fd = (ep.v - em.v) / (2.0 * h);
            assert!((fd - e.d[l]).abs() < 1e-7, "d{l}: {fd} vs {}", e.d[l]);
            for c in 0..3 {
                let fd2 = (ep.d[c] - em.d[c]) / (2.0 * h);
                assert!((fd2 - e.dd[c][l]).abs() < 1e-5, "dd{c}{l}: {fd2} vs {}", e.dd[c][l]);
            }
        }
    }
}

#[test]
fn edge_maps_to_edge() {
    let g = grid();
    let w = wedge(0.04);
    let sp = shock(&g, &w, 0.04);
    let t = Transform::new(&w, &sp);
    // exact at the y3 nodes, interpolation accuracy in between
    for k in 0..g.nz() {
        let y = t.forward(w.edge_point(g.zc(k))).unwrap();
        assert!(y[0].abs() < 1e-12 && y[1].abs() < 1e-12, "{y:?}");
    }
    for x3 in [0.05, 1.3, 2.6] {
        let y = t.forward(w.edge_point(x3)).unwrap();
        assert!(y[0].abs() < 1e-5 && y[1].abs() < 1e-12, "{y:?}");
    }
}

#[test]
fn round_trip_and_shock_plane() {
    let g = grid();
    let w = wedge(0.05);
    let sp = shock(&g, &w, 0.05);
    let t = Transform::new(&w, &sp);
    for k in 0..200 {
        let a = k as f64 * 0.618_033_988_75;
        let y = [0.05 + 5.0 * a.fract(), 0.0, 4.0 * (a * 1.7).fract()];
        let y = [y[0], SIGMA * y[0] * (1.3 * a).fract(), y[2]];
        let x = t.inverse(y);
        let back = t.forward(x).unwrap();
        for c in 0..3 {
            assert!((back[c] - y[c]).abs() < 1e-10);
        }
        assert!(t.jacobian(y).unwrap().det() > 0.0);
    }
    // physical shock point x1 = ŝ(y2, y3) goes to the shock plane
    let (y2, y3) = (0.8, 1.1);
    let s_hat = y2 / SIGMA + sp.eval(y2, y3);
    let x1 = s_hat;
    let x = [x1, y2 + w.w(x1, y3), y3];
    let y = t.forward(x).unwrap();
    assert!((y[1] - SIGMA * y[0]).abs() < 1e-12);
}

fn fd_jacobian_error(t: &Transform, y: [f64; 3], h: f64) -> (f64, f64) {
    let jd = t.jacobian(y).unwrap();
    let x = jd.x;
    let mut e1: f64 = 0.0;
    let mut e2: f64 = 0.0;
    for m in 0..3 {
        let (mut xp, mut xm) = (x, x);
        xp[m] += h;
        xm[m] -= h;
        let (yp, ym) = (t.forward(xp).unwrap(), t.forward(xm).unwrap());
        let (jp, jm) = (t.jacobian(yp).unwrap(), t.jacobian(ym).unwrap());
        for i in 0..3 {
            e1 = e1.max(((yp[i] - ym[i]) / (2.0 * h) - jd.j[i][m]).abs());
            for k in 0..3 {
                e2 = e2.max(((jp.j[i][k] - jm.j[i][k]) / (2.0 * h) - jd.h[i][k][m]).abs());
            }
        }
    }
    (e1, e2)
}

#[test]
fn jacobian_matches_differences_of_forward_map() {
    let g = grid();
    let w = wedge(0.05);
    let sp = shock(&g, &w, 0.05);
    let t = Transform::new(&w, &sp);
    let y = [1.7, 0.45, 1.6];
    let (a1, a2) = fd_jacobian_error(&t, y, 1e-3);
    let (b1, b2) = fd_jacobian_error(&t, y, 5e-4);
    assert!(a1 < 1e-5 && a2 < 1e-4, "{a1} {a2}");
    assert!((a1 / b1).log2() > 1.9, "first derivative order {}", (a1 / b1).log2());
    assert!((a2 / b2).log2() > 1.9, "second derivative order {}", (a2 / b2).log2());
    // symmetry of second derivatives
    let jd = t.jacobian(y).unwrap();
    for i in 0..3 {
        for k in 0..3 {
            for m in 0..3 {
                assert!((jd.h[i][k][m] - jd.h[i][m][k]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn determinant_positive_on_grid() {
    let g = grid();
    let w = wedge(0.05);
    let sp = shock(&g, &w, 0.05);
    let t = Transform::new(&w, &sp);
    let data = t.sample(&g).unwrap();
    assert!(data.iter().all(|d| d.det() > 0.0));
}
