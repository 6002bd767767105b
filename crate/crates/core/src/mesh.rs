//! Radial finite-element mesh with the spherical volume measure `4πr²dr`.
//!
//! All field equations are discretized with piecewise-linear elements on a
//! 1D radial grid. The `r⁻²` terms of the spherical Laplacian never appear:
//! weak forms are assembled directly under the measure `4πr²dr`, so `r = 0`
//! needs no special treatment (the measure vanishes there).

use crate::error::{Error, Result};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// 3-point Gauss-Legendre rule on [-1, 1], exact through degree 5.
const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 0.555_555_555_555_555_6),
    (0.0, 0.888_888_888_888_888_9),
    (0.774_596_669_241_483_4, 0.555_555_555_555_555_6),
];

/// 4-point Gauss-Legendre rule on [-1, 1], exact through degree 7.
const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_2),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_2),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
];

/// Uniform radial grid on `[0, R]`.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    volume_weights: Vec<f64>,
}

impl RadialGrid {
    /// Build a uniform grid with `n_elements` elements on `[0, radius]`.
    pub fn new(n_elements: usize, radius: f64) -> Result<Self> {
        if n_elements < 2 {
            return Err(Error::invalid_input(format!(
                "grid needs at least 2 elements, got {n_elements}"
            )));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid_input(format!(
                "grid radius must be positive and finite, got {radius}"
            )));
        }
        let h = radius / n_elements as f64;
        let mut nodes: Vec<f64> = (0..=n_elements).map(|i| i as f64 * h).collect();
        // Pin the endpoint exactly.
        nodes[n_elements] = radius;
        let mut grid = Self {
            nodes,
            volume_weights: Vec::new(),
        };
        grid.volume_weights = assemble_mass(&grid).row_sums();
        Ok(grid)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn radius(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Endpoints `(a, b)` of element `e`.
    pub fn element(&self, e: usize) -> (f64, f64) {
        (self.nodes[e], self.nodes[e + 1])
    }

    /// Lumped spherical volume weight per node: `w_i = ∫ φ_i 4πr²dr`.
    ///
    /// These sum exactly to the ball volume `(4/3)πR³` and are the row sums
    /// of the consistent mass matrix.
    pub fn volume_weights(&self) -> &[f64] {
        &self.volume_weights
    }

    /// Total ball volume `(4/3)πR³` as seen by the discrete measure.
    pub fn ball_volume(&self) -> f64 {
        self.volume_weights.iter().sum()
    }
}

/// Symmetric tridiagonal operator over grid nodes (mass or stiffness matrix).
#[derive(Debug, Clone)]
pub struct SymTridiag {
    /// Main diagonal, length n.
    pub diag: Vec<f64>,
    /// Sub/super diagonal, length n-1.
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// y = A x
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(y.len(), n);
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
    }

    pub fn apply_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        self.apply(x, &mut y);
        y
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let n = self.n();
        let mut s = vec![0.0; n];
        for i in 0..n {
            s[i] = self.diag[i];
            if i > 0 {
                s[i] += self.off[i - 1];
            }
            if i + 1 < n {
                s[i] += self.off[i];
            }
        }
        s
    }

    /// Sum of all matrix entries.
    pub fn total(&self) -> f64 {
        self.diag.iter().sum::<f64>() + 2.0 * self.off.iter().sum::<f64>()
    }

    /// `Σ c_k A_k` for operators of identical size.
    pub fn linear_combination(terms: &[(f64, &SymTridiag)]) -> Self {
        let n = terms[0].1.n();
        let mut out = Self::zeros(n);
        for &(c, a) in terms {
            assert_eq!(a.n(), n);
            for i in 0..n {
                out.diag[i] += c * a.diag[i];
            }
            for i in 0..n - 1 {
                out.off[i] += c * a.off[i];
            }
        }
        out
    }

    /// Quadratic form xᵀAx.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let n = self.n();
        let mut s = 0.0;
        for i in 0..n {
            s += self.diag[i] * x[i] * x[i];
        }
        for i in 0..n - 1 {
            s += 2.0 * self.off[i] * x[i] * x[i + 1];
        }
        s
    }
}

/// Consistent mass matrix `M_ij = ∫ φ_i φ_j 4πr²dr`, assembled exactly.
pub fn assemble_mass(grid: &RadialGrid) -> SymTridiag {
    let n = grid.n_nodes();
    let mut m = SymTridiag::zeros(n);
    for e in 0..grid.n_elements() {
        let (a, b) = grid.element(e);
        let h = b - a;
        let mid = 0.5 * (a + b);
        let half = 0.5 * h;
        let mut maa = 0.0;
        let mut mab = 0.0;
        let mut mbb = 0.0;
        // Integrand degree 4; 3-point Gauss is exact.
        for (xi, w) in GAUSS3 {
            let r = mid + half * xi;
            let na = (b - r) / h;
            let nb = (r - a) / h;
            let common = w * half * FOUR_PI * r * r;
            maa += common * na * na;
            mab += common * na * nb;
            mbb += common * nb * nb;
        }
        m.diag[e] += maa;
        m.diag[e + 1] += mbb;
        m.off[e] += mab;
    }
    m
}

/// Stiffness matrix `K_ij = ∫ w ∇φ_i·∇φ_j 4πr²dr` with the weight taken
/// elementwise constant (mean of the nodal values).
pub fn assemble_stiffness(grid: &RadialGrid, weight: &[f64]) -> Result<SymTridiag> {
    let n = grid.n_nodes();
    if weight.len() != n {
        return Err(Error::invalid_input(format!(
            "weight field has {} entries for {} nodes",
            weight.len(),
            n
        )));
    }
    if let Some(w) = weight.iter().find(|w| **w < 0.0 || !w.is_finite()) {
        return Err(Error::invalid_input(format!(
            "stiffness weight must be non-negative and finite, got {w}"
        )));
    }
    let mut k = SymTridiag::zeros(n);
    for e in 0..grid.n_elements() {
        let (a, b) = grid.element(e);
        let h = b - a;
        let w_e = 0.5 * (weight[e] + weight[e + 1]);
        // ∇φ = ±1/h on the element, so the entry is w_e/h² ∫ 4πr²dr.
        let entry = w_e * FOUR_PI / 3.0 * (b * b * b - a * a * a) / (h * h);
        k.diag[e] += entry;
        k.diag[e + 1] += entry;
        k.off[e] -= entry;
    }
    Ok(k)
}

/// Unit-weight stiffness matrix.
pub fn assemble_unit_stiffness(grid: &RadialGrid) -> SymTridiag {
    assemble_stiffness(grid, &vec![1.0; grid.n_nodes()]).unwrap()
}

/// Weighted mass matrix `∫ c φ_i φ_j 4πr²dr` with piecewise-linear nodal `c`.
pub fn assemble_weighted_mass(grid: &RadialGrid, coeff: &[f64]) -> Result<SymTridiag> {
    let n = grid.n_nodes();
    if coeff.len() != n {
        return Err(Error::invalid_input(format!(
            "coefficient field has {} entries for {} nodes",
            coeff.len(),
            n
        )));
    }
    let mut m = SymTridiag::zeros(n);
    for e in 0..grid.n_elements() {
        let (a, b) = grid.element(e);
        let h = b - a;
        let mid = 0.5 * (a + b);
        let half = 0.5 * h;
        let (ca, cb) = (coeff[e], coeff[e + 1]);
        let mut maa = 0.0;
        let mut mab = 0.0;
        let mut mbb = 0.0;
        // Integrand degree 5; 3-point Gauss is exact.
        for (xi, w) in GAUSS3 {
            let r = mid + half * xi;
            let na = (b - r) / h;
            let nb = (r - a) / h;
            let c = ca * na + cb * nb;
            let common = w * half * FOUR_PI * r * r * c;
            maa += common * na * na;
            mab += common * na * nb;
            mbb += common * nb * nb;
        }
        m.diag[e] += maa;
        m.diag[e + 1] += mbb;
        m.off[e] += mab;
    }
    Ok(m)
}

/// `∫ f 4πr²dr` of the piecewise-linear interpolant of the nodal field.
pub fn integrate(grid: &RadialGrid, field: &[f64]) -> f64 {
    debug_assert_eq!(field.len(), grid.n_nodes());
    grid.volume_weights()
        .iter()
        .zip(field)
        .map(|(w, f)| w * f)
        .sum()
}

/// Load vector `b_i = ∫ g(fields(r)) φ_i 4πr²dr` where `g` is applied to the
/// piecewise-linear interpolants of up to two nodal fields.
///
/// Uses 4-point Gauss per element: exact whenever `g` composed with linear
/// fields has polynomial degree ≤ 4 in `r` (degree 7 integrand overall).
pub fn assemble_pointwise_load(
    grid: &RadialGrid,
    f1: &[f64],
    f2: &[f64],
    g: impl Fn(f64, f64) -> f64,
    out: &mut [f64],
) {
    let n = grid.n_nodes();
    debug_assert_eq!(f1.len(), n);
    debug_assert_eq!(f2.len(), n);
    debug_assert_eq!(out.len(), n);
    out.fill(0.0);
    for e in 0..grid.n_elements() {
        let (a, b) = grid.element(e);
        let h = b - a;
        let mid = 0.5 * (a + b);
        let half = 0.5 * h;
        let mut la = 0.0;
        let mut lb = 0.0;
        for (xi, w) in GAUSS4 {
            let r = mid + half * xi;
            let na = (b - r) / h;
            let nb = (r - a) / h;
            let v1 = f1[e] * na + f1[e + 1] * nb;
            let v2 = f2[e] * na + f2[e + 1] * nb;
            let common = w * half * FOUR_PI * r * r * g(v1, v2);
            la += common * na;
            lb += common * nb;
        }
        out[e] += la;
        out[e + 1] += lb;
    }
}

/// Elementwise Gauss integral `∫ g(fields(r)) 4πr²dr` (same quadrature as
/// [`assemble_pointwise_load`], without the test function).
pub fn integrate_pointwise(
    grid: &RadialGrid,
    f1: &[f64],
    f2: &[f64],
    g: impl Fn(f64, f64) -> f64,
) -> f64 {
    let n = grid.n_nodes();
    debug_assert_eq!(f1.len(), n);
    debug_assert_eq!(f2.len(), n);
    let mut total = 0.0;
    for e in 0..grid.n_elements() {
        let (a, b) = grid.element(e);
        let h = b - a;
        let mid = 0.5 * (a + b);
        let half = 0.5 * h;
        for (xi, w) in GAUSS4 {
            let r = mid + half * xi;
            let na = (b - r) / h;
            let nb = (r - a) / h;
            let v1 = f1[e] * na + f1[e + 1] * nb;
            let v2 = f2[e] * na + f2[e + 1] * nb;
            total += w * half * FOUR_PI * r * r * g(v1, v2);
        }
    }
    total
}
