//! Direct banded factorization and preconditioned MINRES for the coupled
//! phase-field step.
//!
//! The semi-implicit step produces one symmetric indefinite 2x2-block system
//! per time step. With unknowns interleaved per node the matrix is banded
//! with bandwidth 3, so a pivoted banded LU is the default path. The
//! block-diagonally preconditioned MINRES path exists for cross-validation
//! and keeps the interface ready for higher dimensions where a direct solve
//! is no longer cheap.

use crate::error::{Error, Result};
use crate::mesh::SymTridiag;

/// General banded matrix, `m1` sub- and `m2` superdiagonals.
///
/// Row-major compact storage: `a[i][j]` holds `A[i, i + j - m1]`.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    m1: usize,
    m2: usize,
    a: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, m1: usize, m2: usize) -> Self {
        Self {
            n,
            m1,
            m2,
            a: vec![0.0; n * (m1 + m2 + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn width(&self) -> usize {
        self.m1 + self.m2 + 1
    }

    pub fn clear(&mut self) {
        self.a.fill(0.0);
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j + self.m1 >= i && j <= i + self.m2, "({i},{j}) outside band");
        let w = self.width();
        self.a[i * w + (j + self.m1 - i)] = v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.m1 < i || j > i + self.m2 {
            return 0.0;
        }
        self.a[i * self.width() + (j + self.m1 - i)]
    }

    /// y = A x
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let w = self.width();
        for i in 0..self.n {
            let lo = i.saturating_sub(self.m1);
            let hi = (i + self.m2).min(self.n - 1);
            let mut s = 0.0;
            for j in lo..=hi {
                s += self.a[i * w + (j + self.m1 - i)] * x[j];
            }
            y[i] = s;
        }
    }

    /// LU factorization with partial pivoting (classic banded elimination).
    pub fn factor(&self) -> Result<BandedLu> {
        let mut lu = BandedLu::empty(self.n, self.m1, self.m2);
        lu.refactor(self)?;
        Ok(lu)
    }
}

/// Pivoted LU factors of a [`BandedMatrix`]; reusable across refactorizations
/// of identically-shaped systems.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    m1: usize,
    upper: Vec<f64>,
    lower: Vec<f64>,
    pivot: Vec<usize>,
    width: usize,
}

impl BandedLu {
    pub fn empty(n: usize, m1: usize, m2: usize) -> Self {
        Self {
            n,
            m1,
            upper: vec![0.0; n * (m1 + m2 + 1)],
            lower: vec![0.0; n * m1],
            pivot: vec![0; n],
            width: m1 + m2 + 1,
        }
    }

    /// Factor `mat` in place of any previous factorization.
    pub fn refactor(&mut self, mat: &BandedMatrix) -> Result<()> {
        let (n, m1) = (mat.n, mat.m1);
        assert_eq!(n, self.n);
        assert_eq!(m1, self.m1);
        assert_eq!(self.width, mat.width());
        let mm = self.width;
        let a = &mut self.upper;
        a.copy_from_slice(&mat.a);

        // Left-align the leading rows whose bands stick out of the matrix.
        for i in 0..m1 {
            let shift = m1 - i;
            for j in shift..mm {
                a[i * mm + j - shift] = a[i * mm + j];
            }
            for j in (mm - shift)..mm {
                a[i * mm + j] = 0.0;
            }
        }

        for k in 0..n {
            let lmax = (k + m1).min(n - 1);
            let mut piv = k;
            let mut big = a[k * mm].abs();
            for j in (k + 1)..=lmax {
                if a[j * mm].abs() > big {
                    big = a[j * mm].abs();
                    piv = j;
                }
            }
            self.pivot[k] = piv;
            if big == 0.0 {
                return Err(Error::Singular(format!(
                    "banded factorization: zero pivot column at row {k}"
                )));
            }
            if piv != k {
                for j in 0..mm {
                    a.swap(k * mm + j, piv * mm + j);
                }
            }
            for i in (k + 1)..=lmax {
                let mult = a[i * mm] / a[k * mm];
                self.lower[k * m1 + (i - k - 1)] = mult;
                for j in 1..mm {
                    a[i * mm + j - 1] = a[i * mm + j] - mult * a[k * mm + j];
                }
                a[i * mm + mm - 1] = 0.0;
            }
        }
        Ok(())
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, m1, mm) = (self.n, self.m1, self.width);
        debug_assert_eq!(b.len(), n);
        for k in 0..n {
            let piv = self.pivot[k];
            if piv != k {
                b.swap(k, piv);
            }
            let lmax = (k + m1).min(n - 1);
            for i in (k + 1)..=lmax {
                b[i] -= self.lower[k * m1 + (i - k - 1)] * b[k];
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            let reach = mm.min(n - i);
            for k in 1..reach {
                s -= self.upper[i * mm + k] * b[i + k];
            }
            b[i] = s / self.upper[i * mm];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Convert a symmetric tridiagonal operator into banded form.
pub fn tridiag_to_banded(t: &SymTridiag) -> BandedMatrix {
    let n = t.n();
    let mut b = BandedMatrix::zeros(n, 1, 1);
    for i in 0..n {
        b.set(i, i, t.diag[i]);
    }
    for i in 0..n - 1 {
        b.set(i, i + 1, t.off[i]);
        b.set(i + 1, i, t.off[i]);
    }
    b
}

/// Solve a symmetric tridiagonal system via pivoted banded LU.
pub fn solve_tridiag(t: &SymTridiag, rhs: &[f64]) -> Result<Vec<f64>> {
    let lu = tridiag_to_banded(t).factor()?;
    Ok(lu.solve(rhs))
}

/// Solution pair of the coupled step system.
#[derive(Debug, Clone)]
pub struct BlockSolution {
    pub chemical_potential: Vec<f64>,
    pub phase: Vec<f64>,
}

/// Symmetric 2x2-block system of one semi-implicit step, with node unknowns
/// ordered `(μ_i, φ_i)`:
///
/// ```text
/// [ A   M ] [μ]   [f]        A = dt·c_m·K_m        (PSD)
/// [ M  -C ] [φ] = [g]        C = ε²K₁ + 6c_Ψ·M     (PD)
/// ```
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub mobility_block: SymTridiag,
    pub mass: SymTridiag,
    pub potential_block: SymTridiag,
    pub rhs_mass_balance: Vec<f64>,
    pub rhs_potential: Vec<f64>,
}

impl BlockSystem {
    pub fn n(&self) -> usize {
        self.mass.n()
    }

    /// y = A_block x on concatenated vectors `[μ; φ]`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n();
        let (x_mu, x_phi) = x.split_at(n);
        let (y_mu, y_phi) = y.split_at_mut(n);
        for i in 0..n {
            let mut top = self.mobility_block.diag[i] * x_mu[i] + self.mass.diag[i] * x_phi[i];
            let mut bot = self.mass.diag[i] * x_mu[i] - self.potential_block.diag[i] * x_phi[i];
            if i > 0 {
                top += self.mobility_block.off[i - 1] * x_mu[i - 1]
                    + self.mass.off[i - 1] * x_phi[i - 1];
                bot += self.mass.off[i - 1] * x_mu[i - 1]
                    - self.potential_block.off[i - 1] * x_phi[i - 1];
            }
            if i + 1 < n {
                top += self.mobility_block.off[i] * x_mu[i + 1] + self.mass.off[i] * x_phi[i + 1];
                bot += self.mass.off[i] * x_mu[i + 1] - self.potential_block.off[i] * x_phi[i + 1];
            }
            y_mu[i] = top;
            y_phi[i] = bot;
        }
    }

    fn rhs_concat(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(2 * self.n());
        b.extend_from_slice(&self.rhs_mass_balance);
        b.extend_from_slice(&self.rhs_potential);
        b
    }

    /// Assemble the interleaved banded form (bandwidth 3).
    pub fn to_banded(&self, out: &mut BandedMatrix) {
        let n = self.n();
        assert_eq!(out.n(), 2 * n);
        out.clear();
        for i in 0..n {
            out.set(2 * i, 2 * i, self.mobility_block.diag[i]);
            out.set(2 * i, 2 * i + 1, self.mass.diag[i]);
            out.set(2 * i + 1, 2 * i, self.mass.diag[i]);
            out.set(2 * i + 1, 2 * i + 1, -self.potential_block.diag[i]);
            if i + 1 < n {
                let am = self.mobility_block.off[i];
                let mm = self.mass.off[i];
                let cm = self.potential_block.off[i];
                out.set(2 * i, 2 * i + 2, am);
                out.set(2 * i + 2, 2 * i, am);
                out.set(2 * i, 2 * i + 3, mm);
                out.set(2 * i + 3, 2 * i, mm);
                out.set(2 * i + 1, 2 * i + 2, mm);
                out.set(2 * i + 2, 2 * i + 1, mm);
                out.set(2 * i + 1, 2 * i + 3, -cm);
                out.set(2 * i + 3, 2 * i + 1, -cm);
            }
        }
    }
}

/// Reusable workspace for the direct block solve.
pub struct DirectWorkspace {
    banded: BandedMatrix,
    lu: BandedLu,
    interleaved: Vec<f64>,
    residual: Vec<f64>,
    concat: Vec<f64>,
}

impl DirectWorkspace {
    pub fn new(n: usize) -> Self {
        Self {
            banded: BandedMatrix::zeros(2 * n, 3, 3),
            lu: BandedLu::empty(2 * n, 3, 3),
            interleaved: vec![0.0; 2 * n],
            residual: vec![0.0; 2 * n],
            concat: vec![0.0; 2 * n],
        }
    }
}

/// Direct banded solve with one step of iterative refinement.
pub fn solve_direct(sys: &BlockSystem, ws: &mut DirectWorkspace) -> Result<BlockSolution> {
    let n = sys.n();
    let b = sys.rhs_concat();
    let bnorm = norm(&b);
    if bnorm == 0.0 {
        return Ok(BlockSolution {
            chemical_potential: vec![0.0; n],
            phase: vec![0.0; n],
        });
    }

    sys.to_banded(&mut ws.banded);
    ws.lu.refactor(&ws.banded)?;

    // Interleave the right-hand side, solve, de-interleave.
    for i in 0..n {
        ws.interleaved[2 * i] = sys.rhs_mass_balance[i];
        ws.interleaved[2 * i + 1] = sys.rhs_potential[i];
    }
    ws.lu.solve_in_place(&mut ws.interleaved);

    let mut x = vec![0.0; 2 * n];
    for i in 0..n {
        x[i] = ws.interleaved[2 * i];
        x[n + i] = ws.interleaved[2 * i + 1];
    }

    // One refinement pass keeps the residual near rounding even when the
    // blocks have very different scales.
    sys.apply(&x, &mut ws.concat);
    for i in 0..2 * n {
        ws.residual[i] = b[i] - ws.concat[i];
    }
    for i in 0..n {
        ws.interleaved[2 * i] = ws.residual[i];
        ws.interleaved[2 * i + 1] = ws.residual[n + i];
    }
    ws.lu.solve_in_place(&mut ws.interleaved);
    for i in 0..n {
        x[i] += ws.interleaved[2 * i];
        x[n + i] += ws.interleaved[2 * i + 1];
    }

    sys.apply(&x, &mut ws.concat);
    for i in 0..2 * n {
        ws.residual[i] = b[i] - ws.concat[i];
    }
    let rel = norm(&ws.residual) / bnorm;
    if !(rel <= 1e-12) {
        return Err(Error::NoConvergence {
            residual: rel,
            iterations: 1,
        });
    }

    Ok(BlockSolution {
        chemical_potential: x[..n].to_vec(),
        phase: x[n..].to_vec(),
    })
}

/// One-shot direct solve without an external workspace.
pub fn solve_direct_alloc(sys: &BlockSystem) -> Result<BlockSolution> {
    let mut ws = DirectWorkspace::new(sys.n());
    solve_direct(sys, &mut ws)
}

/// Block-diagonal preconditioner with SPD blocks
/// `(c_m·dt)K_m + √(c_m·dt)·M` and `ε²K₁ + (6c_Ψ/√(c_m·dt))·M`,
/// each inverted by a banded factorization.
pub struct BlockPreconditioner {
    mu_block: BandedLu,
    phi_block: BandedLu,
}

impl BlockPreconditioner {
    /// `sys.mobility_block` must hold `dt·c_m·K_m`; `cm_dt = c_m·dt`.
    pub fn new(
        sys: &BlockSystem,
        unit_stiffness: &SymTridiag,
        mass: &SymTridiag,
        cm_dt: f64,
        eps_sq: f64,
        six_c_psi: f64,
    ) -> Result<Self> {
        if !(cm_dt > 0.0) {
            return Err(Error::invalid_input(format!(
                "preconditioner needs c_m·dt > 0, got {cm_dt}"
            )));
        }
        let root = cm_dt.sqrt();
        let mu = SymTridiag::linear_combination(&[(1.0, &sys.mobility_block), (root, mass)]);
        let phi =
            SymTridiag::linear_combination(&[(eps_sq, unit_stiffness), (six_c_psi / root, mass)]);
        Ok(Self {
            mu_block: tridiag_to_banded(&mu).factor()?,
            phi_block: tridiag_to_banded(&phi).factor()?,
        })
    }

    /// z = P⁻¹ r on concatenated vectors.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len() / 2;
        z.copy_from_slice(r);
        self.mu_block.solve_in_place(&mut z[..n]);
        self.phi_block.solve_in_place(&mut z[n..]);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MinresStats {
    pub iterations: usize,
    /// Final preconditioned residual relative to the initial one.
    pub relative_residual: f64,
}

pub const MINRES_RTOL: f64 = 1e-13;
pub const MINRES_MAX_ITER: usize = 500;

/// Preconditioned MINRES on the block system.
pub fn solve_minres(
    sys: &BlockSystem,
    precond: &BlockPreconditioner,
    rtol: f64,
    max_iter: usize,
) -> Result<(BlockSolution, MinresStats)> {
    let n = sys.n();
    let dim = 2 * n;
    let b = sys.rhs_concat();

    let mut x = vec![0.0; dim];
    let mut r1 = b.clone();
    let mut r2 = b.clone();
    let mut y = vec![0.0; dim];
    precond.apply(&r1, &mut y);

    let beta1_sq = dot(&r1, &y);
    if beta1_sq < 0.0 {
        return Err(Error::Singular(
            "preconditioner is not positive definite".into(),
        ));
    }
    let beta1 = beta1_sq.sqrt();
    if beta1 == 0.0 {
        return Ok((
            BlockSolution {
                chemical_potential: vec![0.0; n],
                phase: vec![0.0; n],
            },
            MinresStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }

    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![0.0; dim];
    let mut w2 = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let mut av = vec![0.0; dim];

    for itn in 1..=max_iter {
        let s = 1.0 / beta;
        for i in 0..dim {
            v[i] = s * y[i];
        }
        sys.apply(&v, &mut av);
        if itn >= 2 {
            let c = beta / oldb;
            for i in 0..dim {
                av[i] -= c * r1[i];
            }
        }
        let alfa = dot(&v, &av);
        let c = alfa / beta;
        for i in 0..dim {
            av[i] -= c * r2[i];
        }
        std::mem::swap(&mut r1, &mut r2);
        std::mem::swap(&mut r2, &mut av);
        precond.apply(&r2, &mut y);
        oldb = beta;
        let beta_sq = dot(&r2, &y);
        if beta_sq < 0.0 {
            return Err(Error::Singular(
                "preconditioner is not positive definite".into(),
            ));
        }
        beta = beta_sq.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;

        let gamma = (gbar * gbar + beta * beta).sqrt().max(f64::MIN_POSITIVE);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar = sn * phibar;

        // w2 holds w_{k-2}, w holds w_{k-1}; rotate in the new direction.
        let denom = 1.0 / gamma;
        for i in 0..dim {
            let wk = (v[i] - oldeps * w2[i] - delta * w[i]) * denom;
            w2[i] = w[i];
            w[i] = wk;
            x[i] += phi * wk;
        }

        if phibar <= rtol * beta1 {
            return Ok((
                BlockSolution {
                    chemical_potential: x[..n].to_vec(),
                    phase: x[n..].to_vec(),
                },
                MinresStats {
                    iterations: itn,
                    relative_residual: phibar / beta1,
                },
            ));
        }
    }

    Err(Error::NoConvergence {
        residual: phibar / beta1,
        iterations: max_iter,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
