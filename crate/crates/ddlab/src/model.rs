//! Model problem generation: a 2D Laplace problem `-div(rho grad u) = f` on
//! the unit square, discretized with bilinear Q1 elements on a uniform grid,
//! partitioned into an `m_x x m_y` grid of substructures with `n x n`
//! elements each. Every substructure is assembled separately and condensed
//! to its interface Schur complement.
//!
//! A degenerate 1D two-substructure bar ([`Problem::bar4`]) is provided as a
//! desk example: every operator built on top of it is a scalar or a 2-vector
//! that can be checked by hand.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{sym_eig, SpdFactor};
use crate::{Error, Result};

/// Edges of the unit square carrying homogeneous Dirichlet conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DirichletEdges {
    pub left: bool,
    pub right: bool,
    pub bottom: bool,
    pub top: bool,
}

impl DirichletEdges {
    /// Left edge only; the default. Keeps floating substructures around so
    /// the coarse machinery of the dual methods is exercised.
    pub fn left() -> Self {
        Self { left: true, right: false, bottom: false, top: false }
    }

    pub fn all() -> Self {
        Self { left: true, right: true, bottom: true, top: true }
    }

    pub fn left_bottom() -> Self {
        Self { left: true, right: false, bottom: true, top: false }
    }

    pub fn any(&self) -> bool {
        self.left || self.right || self.bottom || self.top
    }
}

/// Per-substructure diffusion coefficient.
#[derive(Clone, Debug)]
pub enum CoefficientField {
    Uniform(f64),
    /// `rho_even` on substructures with even `sx + sy`, `rho_odd` otherwise.
    Checkerboard(f64, f64),
    /// Explicit value per substructure, indexed by `sy * m_x + sx`.
    PerSubstructure(Vec<f64>),
}

impl CoefficientField {
    pub fn rho(&self, sx: usize, sy: usize, m_x: usize) -> f64 {
        match self {
            CoefficientField::Uniform(r) => *r,
            CoefficientField::Checkerboard(even, odd) => {
                if (sx + sy).is_multiple_of(2) { *even } else { *odd }
            }
            CoefficientField::PerSubstructure(v) => v[sy * m_x + sx],
        }
    }
}

/// Source of the interface residual used in solve experiments.
#[derive(Clone, Debug)]
pub enum RhsSeed {
    Zero,
    Ones,
    Random(u64),
}

/// Configuration of the 2D model problem.
#[derive(Clone, Debug)]
pub struct ProblemConfig {
    /// Substructures per direction `(m_x, m_y)`.
    pub sub_grid: (usize, usize),
    /// Elements per substructure and direction, so `H/h = n`.
    pub elems_per_sub: usize,
    pub coefficient: CoefficientField,
    pub dirichlet: DirichletEdges,
    pub seed_rhs: RhsSeed,
}

impl ProblemConfig {
    pub fn new(m_x: usize, m_y: usize, n: usize) -> Self {
        Self {
            sub_grid: (m_x, m_y),
            elems_per_sub: n,
            coefficient: CoefficientField::Uniform(1.0),
            dirichlet: DirichletEdges::left(),
            seed_rhs: RhsSeed::Random(0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (m_x, m_y) = self.sub_grid;
        if m_x == 0 || m_y == 0 {
            return Err(Error::Config("substructure grid must be at least 1x1".into()));
        }
        if self.elems_per_sub == 0 {
            return Err(Error::Config("elems-per-sub must be positive".into()));
        }
        if !self.dirichlet.any() {
            return Err(Error::Config(
                "at least one Dirichlet edge is required for a definite problem".into(),
            ));
        }
        let n_subs = m_x * m_y;
        for id in 0..n_subs {
            let rho = self.coefficient.rho(id % m_x, id / m_x, m_x);
            if rho.is_nan() || rho <= 0.0 {
                return Err(Error::Config(format!("coefficient of substructure {id} is {rho}")));
            }
        }
        if let CoefficientField::PerSubstructure(v) = &self.coefficient {
            if v.len() != n_subs {
                return Err(Error::Config(format!(
                    "expected {n_subs} per-substructure coefficients, got {}",
                    v.len()
                )));
            }
        }
        Ok(())
    }
}

/// Global interface bookkeeping: which free nodes are shared, by whom, and
/// which of them sit on substructure-rectangle vertices.
#[derive(Clone, Debug)]
pub struct InterfaceMap {
    /// Number of global interface degrees of freedom.
    pub n_global: usize,
    /// Number of substructures sharing each global interface dof (>= 2).
    pub multiplicity: Vec<usize>,
    /// Per global dof: `(substructure id, local interface index)` for every
    /// sharer, ascending in substructure id.
    pub sharers: Vec<Vec<(usize, usize)>>,
    /// Whether the dof is a vertex of the substructure partition (the corner
    /// candidates of the dual-primal methods).
    pub is_vertex: Vec<bool>,
}

/// One substructure after condensation to its interface.
pub struct SubstructureLocal {
    pub id: usize,
    /// Interface Schur complement (dense, symmetric PSD).
    pub s: DMatrix<f64>,
    /// Condensed interface load (unit body force).
    pub f: DVector<f64>,
    /// Orthonormal basis of `null(s)`: one constant column for floating
    /// substructures, zero columns otherwise.
    pub z: DMatrix<f64>,
    /// Local interface index -> global interface dof.
    pub iface_local_to_global: Vec<usize>,
    pub touches_dirichlet: bool,
}

impl SubstructureLocal {
    pub fn iface_dim(&self) -> usize {
        self.iface_local_to_global.len()
    }
}

/// A fully built model problem: condensed substructures plus interface map.
pub struct Problem {
    pub subs: Vec<SubstructureLocal>,
    pub interface: InterfaceMap,
}

impl Problem {
    /// Total dimension of the broken interface space `W` (sum of local
    /// interface dimensions).
    pub fn w_dim(&self) -> usize {
        self.subs.iter().map(|s| s.iface_dim()).sum()
    }

    pub fn n_interface(&self) -> usize {
        self.interface.n_global
    }

    /// Interface residual for solve experiments, driven by `seed`.
    pub fn interface_rhs(&self, seed: &RhsSeed) -> DVector<f64> {
        let n = self.n_interface();
        match seed {
            RhsSeed::Zero => DVector::zeros(n),
            RhsSeed::Ones => DVector::from_element(n, 1.0),
            RhsSeed::Random(s) => {
                let mut rng = ChaCha8Rng::seed_from_u64(*s);
                DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
            }
        }
    }

    /// The 1D desk example: the bar `(0, 2)` split into two substructures of
    /// two elements each (`h = 1/2`), Dirichlet at `x = 0`. The single
    /// interface dof sits at `x = 1`; substructure 1 floats. Condensed data:
    /// `S_1 = [1]`, `S_2 = [0]`, `Z = [0; 1]`.
    pub fn bar4() -> Problem {
        let h = 0.5;
        let e = DMatrix::from_row_slice(2, 2, &[1.0 / h, -1.0 / h, -1.0 / h, 1.0 / h]);

        // Substructure 0 on (0,1): free nodes [0.5 interior, 1.0 interface].
        let mut k0 = DMatrix::zeros(2, 2);
        // element (0, 0.5): node 0 is Dirichlet, only the (0.5, 0.5) entry survives
        k0[(0, 0)] += e[(1, 1)];
        // element (0.5, 1.0) couples nodes 0.5 and 1.0
        k0[(0, 0)] += e[(0, 0)];
        k0[(0, 1)] += e[(0, 1)];
        k0[(1, 0)] += e[(1, 0)];
        k0[(1, 1)] += e[(1, 1)];
        let load0 = DVector::from_vec(vec![h, h / 2.0]);

        // Substructure 1 on (1,2): free nodes [1.5, 2.0 interior, 1.0 interface].
        let mut k1 = DMatrix::zeros(3, 3);
        // element (1.0, 1.5): nodes (iface=2, interior=0)
        k1[(2, 2)] += e[(0, 0)];
        k1[(2, 0)] += e[(0, 1)];
        k1[(0, 2)] += e[(1, 0)];
        k1[(0, 0)] += e[(1, 1)];
        // element (1.5, 2.0): nodes (0, 1)
        k1[(0, 0)] += e[(0, 0)];
        k1[(0, 1)] += e[(0, 1)];
        k1[(1, 0)] += e[(1, 0)];
        k1[(1, 1)] += e[(1, 1)];
        let load1 = DVector::from_vec(vec![h, h / 2.0, h / 2.0]);

        let (s0, f0) = schur_reduce(&k0, &load0, 1).expect("bar4 substructure 0");
        let (s1, f1) = schur_reduce(&k1, &load1, 2).expect("bar4 substructure 1");
        let z0 = nullspace_basis(&s0, true).expect("bar4 nullspace 0");
        let z1 = nullspace_basis(&s1, false).expect("bar4 nullspace 1");

        Problem {
            subs: vec![
                SubstructureLocal {
                    id: 0,
                    s: s0,
                    f: f0,
                    z: z0,
                    iface_local_to_global: vec![0],
                    touches_dirichlet: true,
                },
                SubstructureLocal {
                    id: 1,
                    s: s1,
                    f: f1,
                    z: z1,
                    iface_local_to_global: vec![0],
                    touches_dirichlet: false,
                },
            ],
            interface: InterfaceMap {
                n_global: 1,
                multiplicity: vec![2],
                sharers: vec![vec![(0, 0), (1, 0)]],
                is_vertex: vec![true],
            },
        }
    }
}

/// Mesh geometry shared by the per-substructure and global assembly paths.
struct Grid {
    m_x: usize,
    m_y: usize,
    n: usize,
    dirichlet: DirichletEdges,
}

impl Grid {
    fn new(config: &ProblemConfig) -> Self {
        Self {
            m_x: config.sub_grid.0,
            m_y: config.sub_grid.1,
            n: config.elems_per_sub,
            dirichlet: config.dirichlet,
        }
    }

    fn nx(&self) -> usize {
        self.m_x * self.n
    }

    fn ny(&self) -> usize {
        self.m_y * self.n
    }

    fn hx(&self) -> f64 {
        1.0 / self.nx() as f64
    }

    fn hy(&self) -> f64 {
        1.0 / self.ny() as f64
    }

    fn is_dirichlet(&self, ix: usize, iy: usize) -> bool {
        (self.dirichlet.left && ix == 0)
            || (self.dirichlet.right && ix == self.nx())
            || (self.dirichlet.bottom && iy == 0)
            || (self.dirichlet.top && iy == self.ny())
    }

    /// Substructure indices along one axis owning grid line `i`.
    fn owners_1d(&self, i: usize, m: usize) -> Vec<usize> {
        if i.is_multiple_of(self.n) {
            let j = i / self.n;
            let mut v = Vec::with_capacity(2);
            if j > 0 {
                v.push(j - 1);
            }
            if j < m {
                v.push(j);
            }
            v
        } else {
            vec![i / self.n]
        }
    }

    fn multiplicity(&self, ix: usize, iy: usize) -> usize {
        self.owners_1d(ix, self.m_x).len() * self.owners_1d(iy, self.m_y).len()
    }

    fn is_interface(&self, ix: usize, iy: usize) -> bool {
        !self.is_dirichlet(ix, iy) && self.multiplicity(ix, iy) >= 2
    }

    fn is_sub_vertex(&self, ix: usize, iy: usize) -> bool {
        ix.is_multiple_of(self.n) && iy.is_multiple_of(self.n)
    }
}

/// Q1 element stiffness for the Laplacian on an `a x b` rectangle, node
/// order (SW, SE, NE, NW). Row sums vanish: constants carry no energy.
pub fn element_stiffness_q1(a: f64, b: f64) -> DMatrix<f64> {
    let kxx = DMatrix::from_row_slice(
        4,
        4,
        &[
            2.0, -2.0, -1.0, 1.0, //
            -2.0, 2.0, 1.0, -1.0, //
            -1.0, 1.0, 2.0, -2.0, //
            1.0, -1.0, -2.0, 2.0,
        ],
    );
    let kyy = DMatrix::from_row_slice(
        4,
        4,
        &[
            2.0, 1.0, -1.0, -2.0, //
            1.0, 2.0, -2.0, -1.0, //
            -1.0, -2.0, 2.0, 1.0, //
            -2.0, -1.0, 1.0, 2.0,
        ],
    );
    kxx * (b / (6.0 * a)) + kyy * (a / (6.0 * b))
}

/// One substructure's stiffness and load before condensation, rows and
/// columns ordered `[interior..., interface...]` (lexicographic by `(y, x)`
/// within each class).
pub struct LocalAssembly {
    pub k: DMatrix<f64>,
    pub load: DVector<f64>,
    pub n_interior: usize,
    /// Grid coordinates of the interface nodes, in local ordering.
    pub iface_nodes: Vec<(usize, usize)>,
    pub touches_dirichlet: bool,
}

/// Assemble the full local stiffness of substructure `sub_id` (Q1 elements,
/// coefficient `rho_i`, Dirichlet rows and columns eliminated) together with
/// the load of a unit body force.
pub fn assemble_substructure(config: &ProblemConfig, sub_id: usize) -> Result<LocalAssembly> {
    config.validate()?;
    let grid = Grid::new(config);
    let (m_x, m_y) = config.sub_grid;
    if sub_id >= m_x * m_y {
        return Err(Error::Config(format!("substructure id {sub_id} out of range")));
    }
    let (sx, sy) = (sub_id % m_x, sub_id / m_x);
    let n = grid.n;
    let rho = config.coefficient.rho(sx, sy, m_x);

    // Classify the substructure's free nodes, lexicographic by (y, x).
    let mut interior = Vec::new();
    let mut iface = Vec::new();
    let mut touches_dirichlet = false;
    for iy in sy * n..=sy * n + n {
        for ix in sx * n..=sx * n + n {
            if grid.is_dirichlet(ix, iy) {
                touches_dirichlet = true;
            } else if grid.is_interface(ix, iy) {
                iface.push((ix, iy));
            } else {
                interior.push((ix, iy));
            }
        }
    }
    let n_interior = interior.len();
    let nf = n_interior + iface.len();
    let mut local_index = std::collections::HashMap::new();
    for (k, &node) in interior.iter().chain(iface.iter()).enumerate() {
        local_index.insert(node, k);
    }

    let ke = element_stiffness_q1(grid.hx(), grid.hy()) * rho;
    let le = grid.hx() * grid.hy() / 4.0;
    let mut k = DMatrix::zeros(nf, nf);
    let mut load = DVector::zeros(nf);
    for ey in sy * n..sy * n + n {
        for ex in sx * n..sx * n + n {
            let nodes = [(ex, ey), (ex + 1, ey), (ex + 1, ey + 1), (ex, ey + 1)];
            for (a, na) in nodes.iter().enumerate() {
                let Some(&ia) = local_index.get(na) else { continue };
                load[ia] += le;
                for (b, nb) in nodes.iter().enumerate() {
                    if let Some(&ib) = local_index.get(nb) {
                        k[(ia, ib)] += ke[(a, b)];
                    }
                }
            }
        }
    }

    Ok(LocalAssembly { k, load, n_interior, iface_nodes: iface, touches_dirichlet })
}

/// Eliminate the interior block: `S = K_GG - K_GI K_II^-1 K_IG` and
/// `f = g_G - K_GI K_II^-1 g_I`. The stiffness must be ordered interior
/// first, as produced by [`assemble_substructure`].
pub fn schur_reduce(
    k: &DMatrix<f64>,
    load: &DVector<f64>,
    n_interior: usize,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let nf = k.nrows();
    let ng = nf - n_interior;
    if n_interior == 0 {
        return Ok((k.clone(), load.clone()));
    }
    let k_ii = k.view((0, 0), (n_interior, n_interior)).into_owned();
    let k_ig = k.view((0, n_interior), (n_interior, ng)).into_owned();
    let k_gg = k.view((n_interior, n_interior), (ng, ng)).into_owned();
    let factor = SpdFactor::new(&k_ii, "interior block of substructure stiffness")?;
    let x = factor.solve_mat(&k_ig);
    let s = k_gg - k_ig.transpose() * x;
    // the elimination leaves last-ulp asymmetry; make symmetry exact
    let s = (&s + s.transpose()) * 0.5;
    let g_i = load.rows(0, n_interior).into_owned();
    let g_g = load.rows(n_interior, ng).into_owned();
    let f = g_g - k_ig.transpose() * factor.solve(&g_i);
    Ok((s, f))
}

/// Orthonormal nullspace basis of a condensed substructure: the normalized
/// constant vector for floating substructures, no columns otherwise. The
/// analytic count is cross-checked against the eigenvalue count of `s`
/// below `1e-10 * lambda_max`; a mismatch is a tolerance pathology and is
/// reported as an error.
pub fn nullspace_basis(s: &DMatrix<f64>, touches_dirichlet: bool) -> Result<DMatrix<f64>> {
    let dim = s.nrows();
    let analytic = if touches_dirichlet { 0 } else { 1 };
    let numerical = sym_eig(s)?.null_count();
    if analytic != numerical {
        return Err(Error::Numerical(format!(
            "nullspace dimension mismatch: analytic {analytic} vs numerical {numerical} \
             on a {dim}-dof substructure"
        )));
    }
    if touches_dirichlet {
        Ok(DMatrix::zeros(dim, 0))
    } else {
        Ok(DMatrix::from_element(dim, 1, 1.0 / (dim as f64).sqrt()))
    }
}

/// Build the full model problem: assemble and condense every substructure
/// and enumerate the global interface.
pub fn build_problem(config: &ProblemConfig) -> Result<Problem> {
    config.validate()?;
    let grid = Grid::new(config);
    let (m_x, m_y) = config.sub_grid;

    // Global interface enumeration, lexicographic by (y, x).
    let mut global_of_node = std::collections::HashMap::new();
    let mut multiplicity = Vec::new();
    let mut is_vertex = Vec::new();
    for iy in 0..=grid.ny() {
        for ix in 0..=grid.nx() {
            if grid.is_interface(ix, iy) {
                let g = multiplicity.len();
                global_of_node.insert((ix, iy), g);
                multiplicity.push(grid.multiplicity(ix, iy));
                is_vertex.push(grid.is_sub_vertex(ix, iy));
            }
        }
    }
    let n_global = multiplicity.len();
    if n_global == 0 {
        return Err(Error::Config(
            "substructure grid has no interface (need at least 2 substructures)".into(),
        ));
    }

    let mut sharers = vec![Vec::new(); n_global];
    let mut subs = Vec::with_capacity(m_x * m_y);
    for id in 0..m_x * m_y {
        let asm = assemble_substructure(config, id)?;
        let (s, f) = schur_reduce(&asm.k, &asm.load, asm.n_interior)?;
        let z = nullspace_basis(&s, asm.touches_dirichlet)?;
        let iface_local_to_global: Vec<usize> = asm
            .iface_nodes
            .iter()
            .map(|node| global_of_node[node])
            .collect();
        for (local, &g) in iface_local_to_global.iter().enumerate() {
            sharers[g].push((id, local));
        }
        subs.push(SubstructureLocal {
            id,
            s,
            f,
            z,
            iface_local_to_global,
            touches_dirichlet: asm.touches_dirichlet,
        });
    }

    for (g, list) in sharers.iter().enumerate() {
        debug_assert_eq!(list.len(), multiplicity[g]);
    }

    Ok(Problem {
        subs,
        interface: InterfaceMap { n_global, multiplicity, sharers, is_vertex },
    })
}

/// The un-substructured reference path: the global stiffness on all free
/// nodes at once, plus where each global interface dof lands in that
/// ordering. Used to validate the condensed path, never by the methods.
pub struct FullAssembly {
    pub k: DMatrix<f64>,
    pub load: DVector<f64>,
    /// Position of global interface dof `g` within the free-dof ordering.
    pub iface_positions: Vec<usize>,
}

pub fn full_assembly(config: &ProblemConfig) -> Result<FullAssembly> {
    config.validate()?;
    let grid = Grid::new(config);
    let (m_x, _) = config.sub_grid;

    let mut free_index = std::collections::HashMap::new();
    let mut iface_positions = Vec::new();
    for iy in 0..=grid.ny() {
        for ix in 0..=grid.nx() {
            if !grid.is_dirichlet(ix, iy) {
                let idx = free_index.len();
                free_index.insert((ix, iy), idx);
                if grid.is_interface(ix, iy) {
                    iface_positions.push(idx);
                }
            }
        }
    }

    let nf = free_index.len();
    let mut k = DMatrix::zeros(nf, nf);
    let mut load = DVector::zeros(nf);
    let base = element_stiffness_q1(grid.hx(), grid.hy());
    let le = grid.hx() * grid.hy() / 4.0;
    for ey in 0..grid.ny() {
        for ex in 0..grid.nx() {
            let rho = config.coefficient.rho(ex / grid.n, ey / grid.n, m_x);
            let nodes = [(ex, ey), (ex + 1, ey), (ex + 1, ey + 1), (ex, ey + 1)];
            for (a, na) in nodes.iter().enumerate() {
                let Some(&ia) = free_index.get(na) else { continue };
                load[ia] += le;
                for (b, nb) in nodes.iter().enumerate() {
                    if let Some(&ib) = free_index.get(nb) {
                        k[(ia, ib)] += rho * base[(a, b)];
                    }
                }
            }
        }
    }
    Ok(FullAssembly { k, load, iface_positions })
}
