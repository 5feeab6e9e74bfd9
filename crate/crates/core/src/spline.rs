//! Interpolating cubic splines returning value, first and second derivative.

#[derive(Clone, Debug)]
enum Ends {
    /// Zero second derivative at both ends; linear continuation outside.
    Natural,
    /// Zero second derivative at both ends; zero outside the node range.
    NaturalZeroOutside,
    /// Periodic with period `x_last - x_0 + h`; the last node is not repeated.
    Periodic { period: f64 },
}

#[derive(Clone, Debug)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
    ends: Ends,
}

fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = diag[0];
    c[0] = if n > 1 { sup[0] / d } else { 0.0 };
    rhs[0] /= d;
    for i in 1..n {
        d = diag[i] - sub[i] * c[i - 1];
        if i + 1 < n {
            c[i] = sup[i] / d;
        }
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / d;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

fn natural_moments(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    let k = n - 2;
    let (mut sub, mut diag, mut sup, mut rhs) = (vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        sub[i - 1] = h0;
        diag[i - 1] = 2.0 * (h0 + h1);
        sup[i - 1] = h1;
        rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    solve_tridiagonal(&sub, &diag, &sup, &mut rhs);
    m[1..n - 1].copy_from_slice(&rhs);
    m
}

fn periodic_moments(h: f64, y: &[f64]) -> Vec<f64> {
    // M_{k-1} + 4 M_k + M_{k+1} = 6 (y_{k+1} - 2 y_k + y_{k-1}) / h², cyclic
    let n = y.len();
    if n < 3 {
        return vec![0.0; n];
    }
    let rhs: Vec<f64> = (0..n)
        .map(|k| 6.0 * (y[(k + 1) % n] - 2.0 * y[k] + y[(k + n - 1) % n]) / (h * h))
        .collect();
    // Sherman–Morrison on the cyclic tridiagonal system
    let gamma = -4.0;
    let mut diag = vec![4.0; n];
    diag[0] -= gamma;
    diag[n - 1] -= 1.0 / gamma;
    let sub = vec![1.0; n];
    let sup = vec![1.0; n];
    let mut xs = rhs.clone();
    solve_tridiagonal(&sub, &diag, &sup, &mut xs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = 1.0;
    solve_tridiagonal(&sub, &diag, &sup, &mut u);
    let fact = (xs[0] + xs[n - 1] / gamma) / (1.0 + u[0] + u[n - 1] / gamma);
    xs.iter().zip(&u).map(|(a, b)| a - fact * b).collect()
}

impl CubicSpline {
    /// Natural spline through `(x_i, y_i)`, `x` strictly increasing.
    pub fn natural(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len());
        assert!(!x.is_empty());
        let m = natural_moments(&x, &y);
        Self {
            x,
            y,
            m,
            ends: Ends::Natural,
        }
    }

    /// Natural spline that vanishes identically outside `[x_0, x_last]`.
    pub fn natural_compact(x: Vec<f64>, y: Vec<f64>) -> Self {
        let mut s = Self::natural(x, y);
        s.ends = Ends::NaturalZeroOutside;
        s
    }

    /// Periodic spline on the uniform nodes `x0 + k·period/n`.
    pub fn periodic(x0: f64, period: f64, y: Vec<f64>) -> Self {
        let n = y.len();
        assert!(n >= 1);
        let h = period / n as f64;
        let x = (0..n).map(|k| x0 + h * k as f64).collect();
        let m = periodic_moments(h, &y);
        Self {
            x,
            y,
            m,
            ends: Ends::Periodic { period },
        }
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|p| p.partial_cmp(&x).expect("finite nodes")) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// `(f, f', f'')` at `x`.
    pub fn eval(&self, x: f64) -> [f64; 3] {
        let n = self.x.len();
        if n == 1 {
            return [self.y[0], 0.0, 0.0];
        }
        match self.ends {
            Ends::Periodic { period } => {
                let x0 = self.x[0];
                let h = period / n as f64;
                let mut t = (x - x0).rem_euclid(period);
                if t >= period {
                    t = 0.0;
                }
                let i = ((t / h).floor() as usize).min(n - 1);
                let j = (i + 1) % n;
                let xl = i as f64 * h;
                self.cubic(t - xl, h, self.y[i], self.y[j], self.m[i], self.m[j])
            }
            Ends::Natural | Ends::NaturalZeroOutside => {
                let (a, b) = (self.x[0], self.x[n - 1]);
                if x < a || x > b {
                    if matches!(self.ends, Ends::NaturalZeroOutside) {
                        return [0.0; 3];
                    }
                    let (xe, i) = if x < a { (a, 0) } else { (b, n - 2) };
                    let h = self.x[i + 1] - self.x[i];
                    let e = self.cubic(xe - self.x[i], h, self.y[i], self.y[i + 1], self.m[i], self.m[i + 1]);
                    return [e[0] + e[1] * (x - xe), e[1], 0.0];
                }
                let i = self.segment(x);
                let h = self.x[i + 1] - self.x[i];
                self.cubic(x - self.x[i], h, self.y[i], self.y[i + 1], self.m[i], self.m[i + 1])
            }
        }
    }

    fn cubic(&self, t: f64, h: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> [f64; 3] {
        let u = h - t;
        let f = m0 * u * u * u / (6.0 * h)
            + m1 * t * t * t / (6.0 * h)
            + (y0 / h - m0 * h / 6.0) * u
            + (y1 / h - m1 * h / 6.0) * t;
        let df = -m0 * u * u / (2.0 * h) + m1 * t * t / (2.0 * h) - (y0 / h - m0 * h / 6.0)
            + (y1 / h - m1 * h / 6.0);
        let ddf = m0 * u / h + m1 * t / h;
        [f, df, ddf]
    }
}
