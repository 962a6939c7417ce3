//! P1 finite-element building blocks shared by the solver and the estimator:
//! quadrature sample sets, L^p norms with their gradients, sparse assembly.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};

use crate::domain::{FacetTag, Mesh};
use crate::error::{Error, Result};
use crate::quadrature::{NeumaierSum, SimplexRule};

/// Weighted sample points of P1 functions: each sample knows the nodes it
/// depends on and the shape-function values there.
#[derive(Debug, Clone)]
pub struct QuadSet {
    pub arity: usize,
    pub weights: Vec<f64>,
    pub nodes: Vec<[usize; 4]>,
    pub shape: Vec<[f64; 4]>,
    pub points: Vec<[f64; 3]>,
    /// Owning cell or facet of every sample.
    pub owner: Vec<usize>,
}

impl QuadSet {
    fn from_rule(arity: usize, rule: &SimplexRule, items: impl Iterator<Item = (usize, [usize; 4], f64, Vec<[f64; 3]>)>) -> Self {
        let mut set = QuadSet {
            arity,
            weights: Vec::new(),
            nodes: Vec::new(),
            shape: Vec::new(),
            points: Vec::new(),
            owner: Vec::new(),
        };
        for (id, nodes, measure, pts) in items {
            for q in 0..rule.len() {
                set.weights.push(measure * rule.weights[q]);
                set.nodes.push(nodes);
                set.shape.push(rule.shape(q));
                set.points.push(pts[q]);
                set.owner.push(id);
            }
        }
        set
    }

    /// Samples over all cells, `k` Gauss points per direction.
    pub fn cells(mesh: &Mesh, k: usize) -> Self {
        let rule = mesh.cell_rule(k);
        let items = (0..mesh.n_cells()).map(|c| {
            let pts = (0..rule.len()).map(|q| mesh.map_point(c, &rule.points[q])).collect();
            (c, mesh.cells[c], mesh.cell_volume[c], pts)
        });
        Self::from_rule(mesh.dim + 1, &rule, items)
    }

    /// Samples over boundary facets carrying `tag`.
    pub fn facets(mesh: &Mesh, k: usize, tag: FacetTag) -> Self {
        let rule = mesh.facet_rule(k);
        let items = mesh
            .facets
            .iter()
            .enumerate()
            .filter(|(_, f)| f.tag == tag)
            .map(|(i, f)| {
                let pts = (0..rule.len()).map(|q| mesh.map_facet_point(i, &rule.points[q])).collect();
                let mut nodes = [0; 4];
                nodes[..3].copy_from_slice(&f.nodes);
                (i, nodes, f.area, pts)
            });
        Self::from_rule(mesh.dim, &rule, items)
    }

    pub fn gamma(mesh: &Mesh, k: usize) -> Self {
        Self::facets(mesh, k, FacetTag::Gamma)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Value of the nodal field `v` at sample `s`.
    #[inline]
    pub fn value(&self, s: usize, v: &[f64]) -> f64 {
        let nodes = &self.nodes[s];
        let phi = &self.shape[s];
        (0..self.arity).map(|a| phi[a] * v[nodes[a]]).sum()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().copied().collect::<NeumaierSum>().value()
    }

    pub fn integrate(&self, v: &[f64]) -> f64 {
        (0..self.len())
            .map(|s| self.weights[s] * self.value(s, v))
            .collect::<NeumaierSum>()
            .value()
    }

    /// `∫ |v|^t`
    pub fn power_integral(&self, v: &[f64], t: f64) -> f64 {
        (0..self.len())
            .map(|s| self.weights[s] * self.value(s, v).abs().powf(t))
            .collect::<NeumaierSum>()
            .value()
    }

    /// `‖v‖_t`; `t = ∞` takes the largest sampled magnitude.
    pub fn lp_norm(&self, v: &[f64], t: f64) -> f64 {
        if t.is_infinite() {
            return (0..self.len()).fold(0.0, |m, s| m.max(self.value(s, v).abs()));
        }
        self.power_integral(v, t).powf(1.0 / t)
    }

    /// `‖v‖_t` and its gradient with respect to the nodal values, accumulated
    /// into `grad` with factor `scale`.
    pub fn lp_norm_with_grad(&self, v: &[f64], t: f64, scale: f64, grad: &mut [f64]) -> f64 {
        let norm = self.lp_norm(v, t);
        if norm == 0.0 {
            return 0.0;
        }
        let factor = scale * norm.powf(1.0 - t);
        for s in 0..self.len() {
            let u = self.value(s, v);
            if u == 0.0 {
                continue;
            }
            let d = factor * self.weights[s] * u.abs().powf(t - 1.0) * u.signum();
            for a in 0..self.arity {
                grad[self.nodes[s][a]] += d * self.shape[s][a];
            }
        }
        norm
    }
}

/// Constant gradient of `v` on cell `c`.
#[inline]
pub fn cell_gradient(mesh: &Mesh, c: usize, v: &[f64]) -> [f64; 3] {
    let mut g = [0.0; 3];
    for (a, &node) in mesh.cell(c).iter().enumerate() {
        for d in 0..mesh.dim {
            g[d] += v[node] * mesh.cell_grad[c][a][d];
        }
    }
    g
}

/// `‖∇v‖_p` over the mesh (exact for P1).
pub fn gradient_norm(mesh: &Mesh, v: &[f64], p: f64) -> f64 {
    let mags = (0..mesh.n_cells()).map(|c| cell_gradient(mesh, c, v).iter().map(|x| x * x).sum::<f64>().sqrt());
    if p.is_infinite() {
        return mags.fold(0.0, f64::max);
    }
    mags.enumerate()
        .map(|(c, m)| mesh.cell_volume[c] * m.powf(p))
        .collect::<NeumaierSum>()
        .value()
        .powf(1.0 / p)
}

/// `‖∇v‖_p` and its gradient; `eps` smooths `|∇v|` where it vanishes.
pub fn gradient_norm_with_grad(mesh: &Mesh, v: &[f64], p: f64, eps: f64, scale: f64, grad: &mut [f64]) -> f64 {
    let mut acc = NeumaierSum::default();
    let mut grads = Vec::with_capacity(mesh.n_cells());
    for c in 0..mesh.n_cells() {
        let g = cell_gradient(mesh, c, v);
        let mag = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        acc.add(mesh.cell_volume[c] * mag.powf(p));
        grads.push((g, mag));
    }
    let norm = acc.value().powf(1.0 / p);
    if norm == 0.0 {
        return 0.0;
    }
    let factor = scale * norm.powf(1.0 - p);
    for (c, (g, mag)) in grads.iter().enumerate() {
        let smooth = (mag * mag + eps * eps).sqrt();
        if smooth == 0.0 {
            continue;
        }
        let w = factor * mesh.cell_volume[c] * smooth.powf(p - 2.0);
        for (a, &node) in mesh.cell(c).iter().enumerate() {
            let dot: f64 = (0..mesh.dim).map(|d| g[d] * mesh.cell_grad[c][a][d]).sum();
            grad[node] += w * dot;
        }
    }
    norm
}

/// Accumulates sparse entries; duplicates are summed on conversion.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    pub n: usize,
    pub entries: Vec<Triplet<usize, usize, f64>>,
}

impl Triplets {
    pub fn new(n: usize) -> Self {
        Triplets {
            n,
            entries: Vec::new(),
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.entries.push(Triplet::new(i, j, v));
    }

    pub fn extend(&mut self, other: Triplets) {
        self.entries.extend(other.entries);
    }

    pub fn add_diagonal(&mut self, diag: &[f64], scale: f64) {
        for (i, d) in diag.iter().enumerate() {
            self.add(i, i, scale * d);
        }
    }

    pub fn to_matrix(&self) -> Result<SparseColMat<usize, f64>> {
        SparseColMat::try_new_from_triplets(self.n, self.n, &self.entries)
            .map_err(|e| Error::Linear(format!("assembly: {e:?}")))
    }

    /// `y = A x`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for t in &self.entries {
            y[t.row] += t.val * x[t.col];
        }
        y
    }
}

/// Sparse LU factorization of an assembled matrix.
pub struct LinearSolver {
    lu: Lu<usize, f64>,
    n: usize,
}

impl LinearSolver {
    pub fn new(a: &SparseColMat<usize, f64>) -> Result<Self> {
        // Keep factorizations single-threaded so results are reproducible;
        // parallelism lives at the assembly level.
        static SEQ: std::sync::Once = std::sync::Once::new();
        SEQ.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
        let sym = SymbolicLu::try_new(a.symbolic()).map_err(|e| Error::Linear(format!("{e:?}")))?;
        let lu = Lu::try_new_with_symbolic(sym, a.as_ref()).map_err(|e| Error::Linear(format!("{e:?}")))?;
        Ok(LinearSolver { lu, n: a.nrows() })
    }

    pub fn from_triplets(t: &Triplets) -> Result<Self> {
        Self::new(&t.to_matrix()?)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let rhs = faer::Col::<f64>::from_fn(self.n, |i| b[i]);
        let x = self.lu.solve(&rhs);
        let out: Vec<f64> = (0..self.n).map(|i| x[i]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Linear("singular or ill-conditioned system".into()));
        }
        Ok(out)
    }
}

/// Stiffness matrix of `-div(A ∇·)` with a cellwise constant matrix.
pub fn stiffness(mesh: &Mesh, coef: impl Fn(usize) -> [[f64; 3]; 3]) -> Triplets {
    let dim = mesh.dim;
    let mut t = Triplets::new(mesh.n_vertices());
    for c in 0..mesh.n_cells() {
        let a = coef(c);
        let g = &mesh.cell_grad[c];
        let nodes = mesh.cell(c);
        for i in 0..=dim {
            let mut ag = [0.0; 3];
            for r in 0..dim {
                for s in 0..dim {
                    ag[r] += a[r][s] * g[i][s];
                }
            }
            for j in 0..=dim {
                let v: f64 = (0..dim).map(|r| ag[r] * g[j][r]).sum::<f64>() * mesh.cell_volume[c];
                t.add(nodes[j], nodes[i], v);
            }
        }
    }
    t
}

/// Matrix of the discrete H¹ inner product with lumped mass.
pub fn h1_lumped(mesh: &Mesh) -> Triplets {
    let mut id = [[0.0; 3]; 3];
    for (d, row) in id.iter_mut().enumerate() {
        row[d] = 1.0;
    }
    let mut t = stiffness(mesh, |_| id);
    t.add_diagonal(&mesh.lumped_mass(), 1.0);
    t
}

/// Interpolates a P1 field from a coarse mesh onto a nested finer one.
pub fn prolongate(coarse: &Mesh, v: &[f64], fine: &Mesh) -> Vec<f64> {
    let dim = coarse.dim;
    fine.vertices
        .iter()
        .map(|x| {
            // Locate the coarse grid cube, then the Kuhn simplex within it.
            let mut idx = [0usize; 3];
            let mut frac = [0.0; 3];
            for d in 0..dim {
                let s = x[d] / coarse.extents[d] * coarse.divisions[d] as f64;
                let i = (s.floor() as usize).min(coarse.divisions[d] - 1);
                idx[d] = i;
                frac[d] = (s - i as f64).clamp(0.0, 1.0);
            }
            let stride = |i: &[usize; 3]| -> usize {
                let mut k = 0;
                let mut m = 1;
                for d in 0..dim {
                    k += i[d] * m;
                    m *= coarse.divisions[d] + 1;
                }
                k
            };
            // Kuhn simplex: walk the axes in decreasing order of the fraction.
            let mut order: Vec<usize> = (0..dim).collect();
            order.sort_by(|a, b| frac[*b].partial_cmp(&frac[*a]).unwrap());
            let mut corner = idx;
            let mut value = v[stride(&corner)] * (1.0 - frac[order[0]]);
            for k in 0..dim {
                corner[order[k]] += 1;
                let next = if k + 1 < dim { frac[order[k + 1]] } else { 0.0 };
                value += v[stride(&corner)] * (frac[order[k]] - next);
            }
            value
        })
        .collect()
}
