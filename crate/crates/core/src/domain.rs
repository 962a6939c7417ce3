//! Box domains, their simplicial meshes and the Γ / (∂Ω∖Γ̄) boundary split.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{NeumaierSum, SimplexRule};

pub type Point = [f64; 3];

/// One face of an axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct BoxFace {
    pub axis: usize,
    pub upper: bool,
}

impl BoxFace {
    /// Parses `left/right/bottom/top/back/front` or `x0-`, `x1+`, ...
    pub fn parse(name: &str) -> Option<BoxFace> {
        let named = match name {
            "left" => Some((0, false)),
            "right" => Some((0, true)),
            "bottom" => Some((1, false)),
            "top" => Some((1, true)),
            "back" => Some((2, false)),
            "front" => Some((2, true)),
            _ => None,
        };
        if let Some((axis, upper)) = named {
            return Some(BoxFace { axis, upper });
        }
        let rest = name.strip_prefix('x')?;
        let (digits, sign) = rest.split_at(rest.len().checked_sub(1)?);
        let axis = digits.parse().ok()?;
        let upper = match sign {
            "+" => true,
            "-" => false,
            _ => return None,
        };
        Some(BoxFace { axis, upper })
    }
}

impl From<BoxFace> for String {
    fn from(f: BoxFace) -> String {
        f.to_string()
    }
}

impl TryFrom<String> for BoxFace {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        BoxFace::parse(&s).ok_or_else(|| format!("unknown face `{s}`"))
    }
}

impl fmt::Display for BoxFace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}{}", self.axis, if self.upper { '+' } else { '-' })
    }
}

/// Which faces of the box make up Γ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSelector {
    /// `"all"` selects the whole boundary.
    All(AllFaces),
    Faces(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllFaces {
    All,
}

impl GammaSelector {
    pub fn faces(names: &[&str]) -> Self {
        GammaSelector::Faces(names.iter().map(|s| s.to_string()).collect())
    }

    pub fn all() -> Self {
        GammaSelector::All(AllFaces::All)
    }

    fn resolve(&self, dim: usize) -> Result<Vec<BoxFace>> {
        match self {
            GammaSelector::All(_) => Ok((0..dim)
                .flat_map(|axis| [false, true].map(|upper| BoxFace { axis, upper }))
                .collect()),
            GammaSelector::Faces(names) => names
                .iter()
                .map(|n| {
                    BoxFace::parse(n)
                        .filter(|f| f.axis < dim)
                        .ok_or_else(|| Error::Domain(format!("unknown face `{n}` for dimension {dim}")))
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub extents: Vec<f64>,
    pub gamma: GammaSelector,
    pub time_horizon: f64,
}

impl DomainSpec {
    pub fn unit_square(gamma: GammaSelector, time_horizon: f64) -> Self {
        DomainSpec {
            extents: vec![1.0, 1.0],
            gamma,
            time_horizon,
        }
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.dim();
        if !(2..=3).contains(&n) {
            return Err(Error::Domain(format!("dimension must be 2 or 3, got {n}")));
        }
        if let Some(l) = self.extents.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::Domain(format!("degenerate extent {l}")));
        }
        if !(self.time_horizon.is_finite() && self.time_horizon > 0.0) {
            return Err(Error::Domain(format!("time horizon must be positive, got {}", self.time_horizon)));
        }
        let faces = self.gamma.resolve(n)?;
        if faces.is_empty() {
            return Err(Error::Domain("Γ selector matches no face".into()));
        }
        Ok(())
    }

    pub fn gamma_faces(&self) -> Result<Vec<BoxFace>> {
        self.gamma.resolve(self.dim())
    }

    pub fn volume(&self) -> f64 {
        self.extents.iter().product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FacetTag {
    Gamma,
    Rest,
}

#[derive(Debug, Clone)]
pub struct BoundaryFacet {
    /// `dim` vertex indices.
    pub nodes: [usize; 3],
    pub face: BoxFace,
    pub tag: FacetTag,
    pub area: f64,
}

impl BoundaryFacet {
    pub fn nodes(&self, dim: usize) -> &[usize] {
        &self.nodes[..dim]
    }
}

/// Conforming simplicial mesh of a box.
///
/// Per-cell geometry (volumes and gradients of the barycentric coordinates)
/// is computed once at construction.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub dim: usize,
    pub extents: Vec<f64>,
    pub divisions: Vec<usize>,
    pub vertices: Vec<Point>,
    /// `dim + 1` vertex indices per cell.
    pub cells: Vec<[usize; 4]>,
    pub facets: Vec<BoundaryFacet>,
    pub cell_volume: Vec<f64>,
    pub cell_grad: Vec<[[f64; 3]; 4]>,
    pub h_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainMeasures {
    pub vol_omega: f64,
    pub area_gamma: f64,
    pub area_rest: f64,
    pub vol_qt: f64,
    pub area_sigma_t: f64,
}

/// Mesh with at most `target_h` cell diameter.
pub fn build_box_mesh(spec: &DomainSpec, target_h: f64) -> Result<Mesh> {
    spec.check()?;
    let min_extent = spec.extents.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(target_h > 0.0 && target_h < min_extent) {
        return Err(Error::Domain(format!(
            "target_h = {target_h} must be positive and below the smallest extent {min_extent}"
        )));
    }
    let n = spec.dim();
    // Kuhn simplices contain the cube diagonal, so h_i = target_h / sqrt(n) suffices.
    let divisions: Vec<usize> = spec
        .extents
        .iter()
        .map(|l| ((l * (n as f64).sqrt() / target_h) * (1.0 - 1e-12)).ceil().max(1.0) as usize)
        .collect();
    build_box_mesh_divisions(spec, &divisions)
}

/// Structured mesh with the given number of cells along each axis.
///
/// Every box cell is split into `n!` Kuhn simplices sharing its main
/// diagonal. In 2D these are right triangles, so the P1 stiffness matrix of
/// an isotropic coefficient has non-positive off-diagonal entries.
pub fn build_box_mesh_divisions(spec: &DomainSpec, divisions: &[usize]) -> Result<Mesh> {
    spec.check()?;
    let n = spec.dim();
    if divisions.len() != n || divisions.contains(&0) {
        return Err(Error::Domain(format!("need {n} positive division counts, got {divisions:?}")));
    }
    let gamma = spec.gamma_faces()?;

    let counts: Vec<usize> = divisions.iter().map(|d| d + 1).collect();
    let index = |ijk: &[usize]| -> usize {
        let mut idx = 0;
        for d in (0..n).rev() {
            idx = idx * counts[d] + ijk[d];
        }
        idx
    };
    let total: usize = counts.iter().product();
    let mut vertices = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut p = [0.0; 3];
        for d in 0..n {
            let i = rem % counts[d];
            rem /= counts[d];
            p[d] = if i == divisions[d] {
                spec.extents[d]
            } else {
                spec.extents[d] * i as f64 / divisions[d] as f64
            };
        }
        vertices.push(p);
    }

    let perms: Vec<Vec<usize>> = if n == 2 {
        vec![vec![0, 1], vec![1, 0]]
    } else {
        vec![
            vec![0, 1, 2],
            vec![0, 2, 1],
            vec![1, 0, 2],
            vec![1, 2, 0],
            vec![2, 0, 1],
            vec![2, 1, 0],
        ]
    };

    let n_boxes: usize = divisions.iter().product();
    let mut cells = Vec::with_capacity(n_boxes * perms.len());
    for flat in 0..n_boxes {
        let mut rem = flat;
        let mut corner = [0usize; 3];
        for d in 0..n {
            corner[d] = rem % divisions[d];
            rem /= divisions[d];
        }
        for perm in &perms {
            let mut cur = corner;
            let mut cell = [usize::MAX; 4];
            cell[0] = index(&cur[..n]);
            for (k, &axis) in perm.iter().enumerate() {
                cur[axis] += 1;
                cell[k + 1] = index(&cur[..n]);
            }
            cells.push(cell);
        }
    }

    let mut mesh = Mesh {
        dim: n,
        extents: spec.extents.clone(),
        divisions: divisions.to_vec(),
        vertices,
        cells,
        facets: Vec::new(),
        cell_volume: Vec::new(),
        cell_grad: Vec::new(),
        h_max: 0.0,
    };
    mesh.compute_geometry()?;
    mesh.collect_boundary(&gamma)?;
    Ok(mesh)
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c][..=self.dim]
    }

    /// Physical point of local coordinates `xi` in cell `c`.
    pub fn map_point(&self, c: usize, xi: &[f64; 3]) -> Point {
        let cell = self.cell(c);
        let v0 = self.vertices[cell[0]];
        let mut p = v0;
        for (k, &vk) in cell.iter().enumerate().skip(1) {
            for d in 0..self.dim {
                p[d] += xi[k - 1] * (self.vertices[vk][d] - v0[d]);
            }
        }
        p
    }

    /// Physical point of local coordinates `xi` on boundary facet `f`.
    pub fn map_facet_point(&self, f: usize, xi: &[f64; 3]) -> Point {
        let nodes = self.facets[f].nodes(self.dim);
        let v0 = self.vertices[nodes[0]];
        let mut p = v0;
        for (k, &vk) in nodes.iter().enumerate().skip(1) {
            for d in 0..self.dim {
                p[d] += xi[k - 1] * (self.vertices[vk][d] - v0[d]);
            }
        }
        p
    }

    fn compute_geometry(&mut self) -> Result<()> {
        let n = self.dim;
        let mut vols = Vec::with_capacity(self.cells.len());
        let mut grads = Vec::with_capacity(self.cells.len());
        let mut h_max: f64 = 0.0;
        let fact = if n == 2 { 2.0 } else { 6.0 };
        for c in 0..self.cells.len() {
            let cell = self.cell(c);
            let v0 = self.vertices[cell[0]];
            // Jacobian columns are edge vectors v_k - v_0.
            let jac = nalgebra::DMatrix::from_fn(n, n, |i, k| self.vertices[cell[k + 1]][i] - v0[i]);
            let det = jac.determinant();
            if det.abs() < 1e-300 {
                return Err(Error::Domain(format!("degenerate cell {c}")));
            }
            let inv = jac
                .try_inverse()
                .ok_or_else(|| Error::Domain(format!("singular cell {c}")))?;
            // grad λ_k = row k-1 of J^{-1}; grad λ_0 = -Σ.
            let mut g = [[0.0; 3]; 4];
            for k in 1..=n {
                for d in 0..n {
                    g[k][d] = inv[(k - 1, d)];
                    g[0][d] -= inv[(k - 1, d)];
                }
            }
            vols.push(det.abs() / fact);
            grads.push(g);
            for a in 0..=n {
                for b in (a + 1)..=n {
                    let pa = self.vertices[cell[a]];
                    let pb = self.vertices[cell[b]];
                    let d2: f64 = (0..n).map(|d| (pa[d] - pb[d]).powi(2)).sum();
                    h_max = h_max.max(d2.sqrt());
                }
            }
        }
        self.cell_volume = vols;
        self.cell_grad = grads;
        self.h_max = h_max;
        Ok(())
    }

    fn collect_boundary(&mut self, gamma: &[BoxFace]) -> Result<()> {
        let n = self.dim;
        let mut seen: HashMap<[usize; 3], (usize, [usize; 3])> = HashMap::new();
        for cell in &self.cells {
            for skip in 0..=n {
                let mut facet = [usize::MAX; 3];
                let mut k = 0;
                for (i, &v) in cell[..=n].iter().enumerate() {
                    if i != skip {
                        facet[k] = v;
                        k += 1;
                    }
                }
                let mut key = facet;
                key[..n].sort_unstable();
                seen.entry(key).and_modify(|e| e.0 += 1).or_insert((1, facet));
            }
        }
        let mut boundary: Vec<[usize; 3]> = seen
            .into_iter()
            .filter(|(_, (count, _))| *count == 1)
            .map(|(_, (_, facet))| facet)
            .collect();
        boundary.sort_unstable();

        let tol = 1e-12 * self.extents.iter().cloned().fold(0.0, f64::max);
        let mut facets = Vec::with_capacity(boundary.len());
        for nodes in boundary {
            let mut face = None;
            'axes: for axis in 0..n {
                for (upper, value) in [(false, 0.0), (true, self.extents[axis])] {
                    if nodes[..n]
                        .iter()
                        .all(|&v| (self.vertices[v][axis] - value).abs() <= tol)
                    {
                        face = Some(BoxFace { axis, upper });
                        break 'axes;
                    }
                }
            }
            let face = face.ok_or_else(|| Error::Domain("boundary facet off the box faces".into()))?;
            let tag = if gamma.contains(&face) {
                FacetTag::Gamma
            } else {
                FacetTag::Rest
            };
            let area = facet_area(&self.vertices, &nodes[..n]);
            facets.push(BoundaryFacet {
                nodes,
                face,
                tag,
                area,
            });
        }
        if !facets.iter().any(|f| f.tag == FacetTag::Gamma) {
            return Err(Error::Domain("Γ selector matches no boundary facet".into()));
        }
        self.facets = facets;
        Ok(())
    }

    pub fn gamma_facets(&self) -> impl Iterator<Item = (usize, &BoundaryFacet)> {
        self.facets
            .iter()
            .enumerate()
            .filter(|(_, f)| f.tag == FacetTag::Gamma)
    }

    /// Lumped (vertex-rule) weights of Γ: `w_i = Σ_{facets ∋ i} |F| / dim`.
    pub fn gamma_node_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n_vertices()];
        for (_, f) in self.gamma_facets() {
            for &v in f.nodes(self.dim) {
                w[v] += f.area / self.dim as f64;
            }
        }
        w
    }

    /// Lumped mass: `m_i = Σ_{cells ∋ i} |K| / (dim + 1)`.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_vertices()];
        let share = 1.0 / (self.dim as f64 + 1.0);
        for (c, vol) in self.cell_volume.iter().enumerate() {
            for &v in self.cell(c) {
                m[v] += vol * share;
            }
        }
        m
    }

    pub fn cell_rule(&self, points_per_dir: usize) -> SimplexRule {
        SimplexRule::collapsed(self.dim, points_per_dir)
    }

    pub fn facet_rule(&self, points_per_dir: usize) -> SimplexRule {
        SimplexRule::collapsed(self.dim - 1, points_per_dir)
    }

    /// Plain-text dump, one record per line.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# dim {} vertices {} cells {} facets {}", self.dim, self.n_vertices(), self.n_cells(), self.facets.len())?;
        for (i, v) in self.vertices.iter().enumerate() {
            write!(out, "vertex {i}")?;
            for x in &v[..self.dim] {
                write!(out, " {x:.17e}")?;
            }
            writeln!(out)?;
        }
        for (i, _) in self.cells.iter().enumerate() {
            write!(out, "cell {i}")?;
            for v in self.cell(i) {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        for (i, f) in self.facets.iter().enumerate() {
            write!(out, "facet {i}")?;
            for v in f.nodes(self.dim) {
                write!(out, " {v}")?;
            }
            let tag = match f.tag {
                FacetTag::Gamma => "gamma",
                FacetTag::Rest => "rest",
            };
            writeln!(out, " {} {tag}", f.face)?;
        }
        Ok(())
    }
}

fn facet_area(vertices: &[Point], nodes: &[usize]) -> f64 {
    let p0 = vertices[nodes[0]];
    let e = |k: usize| -> [f64; 3] {
        let p = vertices[nodes[k]];
        [p[0] - p0[0], p[1] - p0[1], p[2] - p0[2]]
    };
    match nodes.len() {
        2 => {
            let a = e(1);
            (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
        }
        3 => {
            let a = e(1);
            let b = e(2);
            let c = [
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            ];
            0.5 * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
        }
        _ => unreachable!("facets have 2 or 3 vertices"),
    }
}

/// Exact measures by summation over cells and facets.
pub fn measures(mesh: &Mesh, time_horizon: f64) -> Result<DomainMeasures> {
    if !(time_horizon.is_finite() && time_horizon > 0.0) {
        return Err(Error::Domain(format!("time horizon must be positive, got {time_horizon}")));
    }
    let vol: NeumaierSum = mesh.cell_volume.iter().copied().collect();
    let mut gamma = NeumaierSum::default();
    let mut rest = NeumaierSum::default();
    for f in &mesh.facets {
        match f.tag {
            FacetTag::Gamma => gamma.add(f.area),
            FacetTag::Rest => rest.add(f.area),
        }
    }
    let vol = vol.value();
    let gamma = gamma.value();
    Ok(DomainMeasures {
        vol_omega: vol,
        area_gamma: gamma,
        area_rest: rest.value(),
        vol_qt: vol * time_horizon,
        area_sigma_t: gamma * time_horizon,
    })
}
