//! Shared numerical primitives: compensated summation, finite-difference
//! stencils on periodic grids, quadrature and small least-squares helpers.

/// Kahan–Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.comp += (self.sum - t) + value;
        } else {
            self.comp += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of an iterator.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// First derivative, 4th-order central stencil, periodic wrap.
pub fn gradient_periodic(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 5, "stencil needs at least 5 samples");
    let inv = 1.0 / (12.0 * dx);
    (0..n)
        .map(|i| {
            let m2 = values[(i + n - 2) % n];
            let m1 = values[(i + n - 1) % n];
            let p1 = values[(i + 1) % n];
            let p2 = values[(i + 2) % n];
            (m2 - 8.0 * m1 + 8.0 * p1 - p2) * inv
        })
        .collect()
}

/// Second derivative, 4th-order central stencil, periodic wrap.
pub fn laplacian_periodic(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 5, "stencil needs at least 5 samples");
    let inv = 1.0 / (12.0 * dx * dx);
    (0..n)
        .map(|i| {
            let m2 = values[(i + n - 2) % n];
            let m1 = values[(i + n - 1) % n];
            let c = values[i];
            let p1 = values[(i + 1) % n];
            let p2 = values[(i + 2) % n];
            (-m2 + 16.0 * m1 - 30.0 * c + 16.0 * p1 - p2) * inv
        })
        .collect()
}

/// Trapezoid-rule integral of uniformly sampled values.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut acc = CompensatedSum::new();
    acc.add(0.5 * values[0]);
    for v in &values[1..values.len() - 1] {
        acc.add(*v);
    }
    acc.add(0.5 * values[values.len() - 1]);
    acc.value() * dx
}

/// Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 2);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Chebyshev-style starting guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((x, w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Vertex abscissa of the parabola through (-1, ym), (0, y0), (1, yp),
/// in units of the sample spacing. Returns 0 when the points are collinear.
pub fn parabolic_vertex(ym: f64, y0: f64, yp: f64) -> f64 {
    let denom = ym - 2.0 * y0 + yp;
    if denom == 0.0 {
        0.0
    } else {
        0.5 * (ym - yp) / denom
    }
}

/// Value of the cubic interpolant through four consecutive samples
/// y[-1], y[0], y[1], y[2] at fractional position t in [0, 1] (measured from
/// the second sample).
pub fn cubic_interpolate(ym1: f64, y0: f64, y1: f64, y2: f64, t: f64) -> f64 {
    // Lagrange cubic through nodes at t = -1, 0, 1, 2.
    ym1 * (t * (t - 1.0) * (t - 2.0) / -6.0)
        + y0 * ((t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0)
        + y1 * ((t + 1.0) * t * (t - 2.0) / -2.0)
        + y2 * ((t + 1.0) * t * (t - 1.0) / 6.0)
}

/// Linear interpolation of uniformly gridded values at abscissa x, with
/// linear extrapolation beyond the ends.
pub fn lerp_grid(values: &[f64], x0: f64, dx: f64, x: f64) -> f64 {
    let n = values.len();
    let t = (x - x0) / dx;
    let i = (t.floor() as isize).clamp(0, n as isize - 2) as usize;
    let frac = t - i as f64;
    values[i] + frac * (values[i + 1] - values[i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn compensated_sum_beats_naive() {
        let vals: Vec<f64> = (0..1_000_000).map(|i| 0.1 + 1e-18 * i as f64).collect();
        let s = compensated_sum(vals.iter().copied());
        assert_relative_eq!(s, 100_000.0 + 1e-18 * (999_999.0 * 1_000_000.0 / 2.0), max_relative = 1e-14);
    }

    #[test]
    fn gradient_of_sine_is_cosine() {
        let n = 256;
        let dx = 2.0 * std::f64::consts::PI / n as f64;
        let f: Vec<f64> = (0..n).map(|i| (i as f64 * dx).sin()).collect();
        let g = gradient_periodic(&f, dx);
        for (i, gi) in g.iter().enumerate() {
            assert_relative_eq!(*gi, (i as f64 * dx).cos(), epsilon = 1e-7);
        }
    }

    #[test]
    fn laplacian_of_sine() {
        let n = 256;
        let dx = 2.0 * std::f64::consts::PI / n as f64;
        let f: Vec<f64> = (0..n).map(|i| (i as f64 * dx).sin()).collect();
        let g = laplacian_periodic(&f, dx);
        for (i, gi) in g.iter().enumerate() {
            assert_relative_eq!(*gi, -(i as f64 * dx).sin(), epsilon = 1e-6);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // n nodes integrate degree 2n-1 exactly.
        let nodes = gauss_legendre(6);
        let integral: f64 = nodes.iter().map(|(x, w)| w * x.powi(10)).sum();
        assert_relative_eq!(integral, 2.0 / 11.0, max_relative = 1e-13);
    }

    #[test]
    fn trapezoid_linear_exact() {
        let vals = [0.0, 1.0, 2.0, 3.0];
        assert_relative_eq!(trapezoid(&vals, 0.5), 2.25);
    }

    #[test]
    fn cubic_interp_reproduces_cubic() {
        let f = |x: f64| 2.0 * x * x * x - x * x + 0.5 * x - 3.0;
        let v = cubic_interpolate(f(-1.0), f(0.0), f(1.0), f(2.0), 0.37);
        assert_relative_eq!(v, f(0.37), epsilon = 1e-12);
    }
}
