//! Quadrature rules and compensated summation.

use std::f64::consts::PI;

/// Gauss-Legendre rule on `[0, 1]` with `n` points.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1, 1] -> [0, 1]
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { p0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Rule on the reference simplex of dimension `dim`.
///
/// `points` are barycentric-free local coordinates (the last `dim`
/// barycentrics); `weights` sum to one, i.e. they are fractions of the
/// simplex volume.
#[derive(Debug, Clone)]
pub struct SimplexRule {
    pub dim: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl SimplexRule {
    /// Collapsed (Duffy) tensor rule with `k` Gauss points per direction.
    /// Exact for polynomials of degree `2k - 1 - (dim - 1)` at least.
    pub fn collapsed(dim: usize, k: usize) -> Self {
        let (x, w) = gauss_legendre(k);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        match dim {
            0 => {
                points.push([0.0; 3]);
                weights.push(1.0);
            }
            1 => {
                for i in 0..k {
                    points.push([x[i], 0.0, 0.0]);
                    weights.push(w[i]);
                }
            }
            2 => {
                for i in 0..k {
                    for j in 0..k {
                        let u = x[i];
                        let v = x[j] * (1.0 - u);
                        points.push([u, v, 0.0]);
                        weights.push(2.0 * w[i] * w[j] * (1.0 - u));
                    }
                }
            }
            3 => {
                for i in 0..k {
                    for j in 0..k {
                        for l in 0..k {
                            let u = x[i];
                            let v = x[j] * (1.0 - u);
                            let s = x[l] * (1.0 - u) * (1.0 - x[j]);
                            points.push([u, v, s]);
                            weights.push(
                                6.0 * w[i] * w[j] * w[l] * (1.0 - u) * (1.0 - u) * (1.0 - x[j]),
                            );
                        }
                    }
                }
            }
            _ => panic!("simplex rules are provided for dimensions 0..=3"),
        }
        SimplexRule {
            dim,
            points,
            weights,
        }
    }

    /// Vertex rule: equal weights at the corners (the rule behind mass lumping).
    pub fn vertices(dim: usize) -> Self {
        let mut points = vec![[0.0; 3]];
        for d in 0..dim {
            let mut p = [0.0; 3];
            p[d] = 1.0;
            points.push(p);
        }
        let weights = vec![1.0 / (dim as f64 + 1.0); dim + 1];
        SimplexRule {
            dim,
            points,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Values of the `dim + 1` linear shape functions at point `q`.
    pub fn shape(&self, q: usize) -> [f64; 4] {
        let p = self.points[q];
        let mut phi = [0.0; 4];
        let mut rest = 1.0;
        for d in 0..self.dim {
            phi[d + 1] = p[d];
            rest -= p[d];
        }
        phi[0] = rest;
        phi
    }
}

/// Composite Gauss-Legendre rule on `[a, b]`.
#[derive(Debug, Clone)]
pub struct TimeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl TimeRule {
    pub fn panels(a: f64, b: f64, panels: usize, points: usize) -> Self {
        let (x, w) = gauss_legendre(points.max(1));
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * x.len());
        let mut weights = Vec::with_capacity(panels * x.len());
        for k in 0..panels {
            let t0 = a + k as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(t0 + xi * h);
                weights.push(wi * h);
            }
        }
        TimeRule { nodes, weights }
    }

    /// Nodes `a + k h`, `k = 1..=steps`, each with weight `h`.
    pub fn right_endpoint(a: f64, b: f64, steps: usize) -> Self {
        let steps = steps.max(1);
        let h = (b - a) / steps as f64;
        TimeRule {
            nodes: (1..=steps).map(|k| a + k as f64 * h).collect(),
            weights: vec![h; steps],
        }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut acc = NeumaierSum::default();
        for (t, w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(*t));
        }
        acc.value()
    }
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().collect::<NeumaierSum>().value()
}
