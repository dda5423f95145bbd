//! Graph charts on `M = F⁻¹(0)` built from the implicit function theorem.
//!
//! A chart splits `θ` into dependent coordinates `v` (the pivot columns of
//! `DF(θ*)`) and free coordinates `β`. Near `θ*` the manifold is the graph
//! `v = ζ̃(β)`.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};
use crate::linalg::{condition_number, max_abs, pivoted_qr_order, select_columns};

pub const DEFAULT_KAPPA_MAX: f64 = 1e8;
pub const DEFAULT_NEWTON_TOL: f64 = 1e-11;
pub const DEFAULT_NEWTON_MAX_ITER: usize = 25;
const MAX_DAMPING: usize = 8;

/// A smooth map `F: ℝ^p̃ → ℝ^q` with first and second derivatives.
pub trait ConstraintSystem {
    fn p_tilde(&self) -> usize;
    fn q(&self) -> usize;
    fn eval_f(&self, theta: &DVector<f64>) -> DVector<f64>;
    fn eval_df(&self, theta: &DVector<f64>) -> DMatrix<f64>;
    /// Bilinear application `D²F(θ)[s1, s2]`.
    fn eval_d2f_apply(&self, theta: &DVector<f64>, s1: &DVector<f64>, s2: &DVector<f64>) -> DVector<f64>;

    /// Reported constraint residual. Defaults to `‖F(θ)‖_∞`.
    fn residual(&self, theta: &DVector<f64>) -> f64 {
        max_abs(&self.eval_f(theta))
    }
}

impl<C: ConstraintSystem + ?Sized> ConstraintSystem for &C {
    fn p_tilde(&self) -> usize {
        (**self).p_tilde()
    }
    fn q(&self) -> usize {
        (**self).q()
    }
    fn eval_f(&self, theta: &DVector<f64>) -> DVector<f64> {
        (**self).eval_f(theta)
    }
    fn eval_df(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        (**self).eval_df(theta)
    }
    fn eval_d2f_apply(&self, theta: &DVector<f64>, s1: &DVector<f64>, s2: &DVector<f64>) -> DVector<f64> {
        (**self).eval_d2f_apply(theta, s1, s2)
    }
    fn residual(&self, theta: &DVector<f64>) -> f64 {
        (**self).residual(theta)
    }
}

impl<C: ConstraintSystem + ?Sized> ConstraintSystem for Box<C> {
    fn p_tilde(&self) -> usize {
        (**self).p_tilde()
    }
    fn q(&self) -> usize {
        (**self).q()
    }
    fn eval_f(&self, theta: &DVector<f64>) -> DVector<f64> {
        (**self).eval_f(theta)
    }
    fn eval_df(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        (**self).eval_df(theta)
    }
    fn eval_d2f_apply(&self, theta: &DVector<f64>, s1: &DVector<f64>, s2: &DVector<f64>) -> DVector<f64> {
        (**self).eval_d2f_apply(theta, s1, s2)
    }
    fn residual(&self, theta: &DVector<f64>) -> f64 {
        (**self).residual(theta)
    }
}

/// Wraps a bare `F` and supplies derivatives by central differences. Intended for tests.
pub struct FiniteDifferenceSystem<F> {
    p_tilde: usize,
    q: usize,
    f: F,
    eps: f64,
}

impl<F: Fn(&DVector<f64>) -> DVector<f64>> FiniteDifferenceSystem<F> {
    pub fn new(p_tilde: usize, q: usize, f: F) -> Self {
        FiniteDifferenceSystem { p_tilde, q, f, eps: 1e-6 }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }
}

impl<F: Fn(&DVector<f64>) -> DVector<f64>> ConstraintSystem for FiniteDifferenceSystem<F> {
    fn p_tilde(&self) -> usize {
        self.p_tilde
    }
    fn q(&self) -> usize {
        self.q
    }
    fn eval_f(&self, theta: &DVector<f64>) -> DVector<f64> {
        (self.f)(theta)
    }
    fn eval_df(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.q, self.p_tilde);
        for c in 0..self.p_tilde {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[c] += self.eps;
            tm[c] -= self.eps;
            let d = ((self.f)(&tp) - (self.f)(&tm)) / (2.0 * self.eps);
            j.set_column(c, &d);
        }
        j
    }
    fn eval_d2f_apply(&self, theta: &DVector<f64>, s1: &DVector<f64>, s2: &DVector<f64>) -> DVector<f64> {
        let e = self.eps.sqrt() * 0.1;
        let f = |a: f64, b: f64| (self.f)(&(theta + s1 * a + s2 * b));
        (f(e, e) - f(e, -e) - f(-e, e) + f(-e, -e)) / (4.0 * e * e)
    }
}

/// Block-diagonal stacking of independent constraint systems.
pub struct ProductSystem {
    blocks: Vec<Box<dyn ConstraintSystem>>,
}

impl ProductSystem {
    pub fn new(blocks: Vec<Box<dyn ConstraintSystem>>) -> Self {
        ProductSystem { blocks }
    }

    pub fn blocks(&self) -> &[Box<dyn ConstraintSystem>] {
        &self.blocks
    }

    /// Parameter range of block `b` inside `θ`.
    pub fn block_range(&self, b: usize) -> core::ops::Range<usize> {
        let start: usize = self.blocks[..b].iter().map(|s| s.p_tilde()).sum();
        start..start + self.blocks[b].p_tilde()
    }

    fn split<'a>(&self, v: &'a DVector<f64>) -> Vec<DVector<f64>> {
        (0..self.blocks.len())
            .map(|b| {
                let r = self.block_range(b);
                DVector::from_column_slice(&v.as_slice()[r])
            })
            .collect()
    }
}

impl ConstraintSystem for ProductSystem {
    fn p_tilde(&self) -> usize {
        self.blocks.iter().map(|b| b.p_tilde()).sum()
    }
    fn q(&self) -> usize {
        self.blocks.iter().map(|b| b.q()).sum()
    }
    fn eval_f(&self, theta: &DVector<f64>) -> DVector<f64> {
        let parts = self.split(theta);
        let mut out = Vec::with_capacity(self.q());
        for (b, t) in self.blocks.iter().zip(parts.iter()) {
            out.extend(b.eval_f(t).iter());
        }
        DVector::from_vec(out)
    }
    fn eval_df(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let parts = self.split(theta);
        let mut j = DMatrix::zeros(self.q(), self.p_tilde());
        let (mut r0, mut c0) = (0, 0);
        for (b, t) in self.blocks.iter().zip(parts.iter()) {
            let jb = b.eval_df(t);
            j.view_mut((r0, c0), jb.shape()).copy_from(&jb);
            r0 += b.q();
            c0 += b.p_tilde();
        }
        j
    }
    fn eval_d2f_apply(&self, theta: &DVector<f64>, s1: &DVector<f64>, s2: &DVector<f64>) -> DVector<f64> {
        let (t, a, b) = (self.split(theta), self.split(s1), self.split(s2));
        let mut out = Vec::with_capacity(self.q());
        for (i, blk) in self.blocks.iter().enumerate() {
            out.extend(blk.eval_d2f_apply(&t[i], &a[i], &b[i]).iter());
        }
        DVector::from_vec(out)
    }
    fn residual(&self, theta: &DVector<f64>) -> f64 {
        let parts = self.split(theta);
        self.blocks.iter().zip(parts.iter()).map(|(b, t)| b.residual(t)).fold(0.0, f64::max)
    }
}

/// The coordinate permutation between `θ` and `(v, β)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationNu {
    /// `forward[i]` is the position in `θ` of entry `i` of the concatenation `(v, β)`.
    pub forward: Vec<usize>,
    /// `inverse[p]` is the position in `(v, β)` of entry `p` of `θ`.
    pub inverse: Vec<usize>,
    q: usize,
}

impl PermutationNu {
    pub fn new(pivots: &[usize], complement: &[usize]) -> Self {
        let forward: Vec<usize> = pivots.iter().chain(complement.iter()).copied().collect();
        let mut inverse = vec![0; forward.len()];
        for (i, &p) in forward.iter().enumerate() {
            inverse[p] = i;
        }
        PermutationNu { forward, inverse, q: pivots.len() }
    }

    pub fn assemble(&self, v: &DVector<f64>, beta: &DVector<f64>) -> DVector<f64> {
        let mut theta = DVector::zeros(self.forward.len());
        for (i, &p) in self.forward.iter().enumerate() {
            theta[p] = if i < self.q { v[i] } else { beta[i - self.q] };
        }
        theta
    }

    pub fn split(&self, theta: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let q = self.q;
        let n = self.forward.len() - q;
        let v = DVector::from_fn(q, |i, _| theta[self.forward[i]]);
        let beta = DVector::from_fn(n, |i, _| theta[self.forward[q + i]]);
        (v, beta)
    }
}

pub fn complement_of(pivots: &[usize], p_tilde: usize) -> Vec<usize> {
    (0..p_tilde).filter(|i| !pivots.contains(i)).collect()
}

/// Picks `q` columns of `J` by column-pivoted QR and checks their conditioning.
pub fn select_pivots(j: &DMatrix<f64>, kappa_max: f64) -> Result<Vec<usize>> {
    let q = j.nrows();
    let order = pivoted_qr_order(j);
    let mut piv: Vec<usize> = order[..q].to_vec();
    piv.sort_unstable();
    let cond = condition_number(&select_columns(j, &piv));
    if !(cond <= kappa_max) {
        return Err(Error::RankDeficient { condition: cond });
    }
    Ok(piv)
}

/// Second derivatives `∂²ζ̃_k/∂β_i∂β_j`, shape `q × n × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct D2Zeta {
    q: usize,
    n: usize,
    data: Vec<f64>,
}

impl D2Zeta {
    pub fn zeros(q: usize, n: usize) -> Self {
        D2Zeta { q, n, data: vec![0.0; q * n * n] }
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(i * self.n + j) * self.q + k]
    }

    /// The vector `∂²ζ̃/∂β_i∂β_j ∈ ℝ^q`.
    pub fn column(&self, i: usize, j: usize) -> DVector<f64> {
        let s = (i * self.n + j) * self.q;
        DVector::from_column_slice(&self.data[s..s + self.q])
    }

    fn set_column(&mut self, i: usize, j: usize, c: &DVector<f64>) {
        let s = (i * self.n + j) * self.q;
        self.data[s..s + self.q].copy_from_slice(c.as_slice());
    }

    /// `Σ_ij d_i d_j ∂²ζ̃/∂β_i∂β_j`.
    pub fn contract(&self, d: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.q);
        for i in 0..self.n {
            for j in 0..self.n {
                let w = d[i] * d[j];
                if w != 0.0 {
                    out += self.column(i, j) * w;
                }
            }
        }
        out
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.q, self.n, self.n)
    }
}

#[derive(Debug, Clone)]
pub struct GraphChart {
    pub theta_star: DVector<f64>,
    pub pivots: Vec<usize>,
    pub complement: Vec<usize>,
    pub beta_star: DVector<f64>,
    pub v_star: DVector<f64>,
    pub d_zeta_tilde: DMatrix<f64>,
    pub d2_zeta_tilde: Option<D2Zeta>,
    jacobian: DMatrix<f64>,
    pivot_lu: LU<f64, Dyn, Dyn>,
}

impl GraphChart {
    /// Chart at `theta` with a prescribed pivot set.
    pub fn with_pivots<C: ConstraintSystem + ?Sized>(
        sys: &C,
        theta: &DVector<f64>,
        pivots: &[usize],
        tol: f64,
    ) -> Result<Self> {
        let residual = max_abs(&sys.eval_f(theta));
        if !(residual <= tol) {
            return Err(Error::NotOnManifold { residual });
        }
        let jacobian = sys.eval_df(theta);
        Self::from_parts(sys, theta, jacobian, pivots.to_vec())
    }

    fn from_parts<C: ConstraintSystem + ?Sized>(
        sys: &C,
        theta: &DVector<f64>,
        jacobian: DMatrix<f64>,
        pivots: Vec<usize>,
    ) -> Result<Self> {
        let complement = complement_of(&pivots, sys.p_tilde());
        let nu = PermutationNu::new(&pivots, &complement);
        let (v_star, beta_star) = nu.split(theta);
        let pivot_lu = select_columns(&jacobian, &pivots).lu();
        let d_beta = select_columns(&jacobian, &complement);
        let d_zeta_tilde = pivot_lu.solve(&(-d_beta)).ok_or(Error::SingularPivotBlock)?;
        Ok(GraphChart {
            theta_star: theta.clone(),
            pivots,
            complement,
            beta_star,
            v_star,
            d_zeta_tilde,
            d2_zeta_tilde: None,
            jacobian,
            pivot_lu,
        })
    }

    pub fn dim(&self) -> usize {
        self.complement.len()
    }

    pub fn nu(&self) -> PermutationNu {
        PermutationNu::new(&self.pivots, &self.complement)
    }

    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.jacobian
    }

    /// `Dζ` as a `p̃ × n` matrix: columns are the ambient tangent vectors `∂θ/∂β_i`.
    pub fn tangent_basis(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut t = DMatrix::zeros(self.theta_star.len(), n);
        for i in 0..n {
            for (k, &p) in self.pivots.iter().enumerate() {
                t[(p, i)] = self.d_zeta_tilde[(k, i)];
            }
            t[(self.complement[i], i)] = 1.0;
        }
        t
    }

    /// Attaches `D²ζ̃`.
    pub fn with_second_order<C: ConstraintSystem + ?Sized>(mut self, sys: &C) -> Result<Self> {
        if self.d2_zeta_tilde.is_none() {
            self.d2_zeta_tilde = Some(solve_d2zeta(sys, &self)?);
        }
        Ok(self)
    }

    /// Taylor approximation of `ζ̃(β)`, second order when `D²ζ̃` is attached.
    pub fn taylor_seed(&self, beta: &DVector<f64>) -> DVector<f64> {
        let d = beta - &self.beta_star;
        let mut v = &self.v_star + &self.d_zeta_tilde * &d;
        if let Some(d2) = &self.d2_zeta_tilde {
            v += d2.contract(&d) * 0.5;
        }
        v
    }

    /// `ν(ζ̃(β), β)`: Taylor seed refined by Newton with `β` fixed.
    pub fn embed<C: ConstraintSystem + ?Sized>(
        &self,
        sys: &C,
        beta: &DVector<f64>,
        tol: f64,
        max_iter: usize,
    ) -> Result<DVector<f64>> {
        let v = newton_refine(sys, &self.pivots, beta, &self.taylor_seed(beta), tol, max_iter)?;
        Ok(self.nu().assemble(&v, beta))
    }
}

/// Builds the graph chart at `theta_star`.
pub fn chart_at<C: ConstraintSystem + ?Sized>(
    sys: &C,
    theta_star: &DVector<f64>,
    kappa_max: f64,
    tol: f64,
) -> Result<GraphChart> {
    let residual = max_abs(&sys.eval_f(theta_star));
    if !(residual <= tol) {
        return Err(Error::NotOnManifold { residual });
    }
    let jacobian = sys.eval_df(theta_star);
    let pivots = select_pivots(&jacobian, kappa_max)?;
    GraphChart::from_parts(sys, theta_star, jacobian, pivots)
}

/// Solves `D_vF · Dζ̃ = -D_βF` at the chart's base point.
pub fn solve_dzeta<C: ConstraintSystem + ?Sized>(sys: &C, chart: &GraphChart) -> Result<DMatrix<f64>> {
    let j = sys.eval_df(&chart.theta_star);
    let dv = select_columns(&j, &chart.pivots);
    let db = select_columns(&j, &chart.complement);
    dv.lu().solve(&(-db)).ok_or(Error::SingularPivotBlock)
}

/// Solves `D_vF · ∂²ζ̃_ij = -D²F[(∂_iζ̃, e_i), (∂_jζ̃, e_j)]` for all `i <= j`.
pub fn solve_d2zeta<C: ConstraintSystem + ?Sized>(sys: &C, chart: &GraphChart) -> Result<D2Zeta> {
    let n = chart.dim();
    let q = chart.pivots.len();
    let t = chart.tangent_basis();
    let cols: Vec<DVector<f64>> = (0..n).map(|i| t.column(i).into_owned()).collect();
    let mut out = D2Zeta::zeros(q, n);
    for i in 0..n {
        for j in i..n {
            let rhs = -sys.eval_d2f_apply(&chart.theta_star, &cols[i], &cols[j]);
            let x = chart.pivot_lu.solve(&rhs).ok_or(Error::SingularPivotBlock)?;
            out.set_column(i, j, &x);
            if i != j {
                out.set_column(j, i, &x);
            }
        }
    }
    Ok(out)
}

/// Newton iteration on `v -> F(ν(v, β))` with `β` held fixed.
///
/// A step that increases `‖F‖_∞` is halved up to 8 times before it is taken anyway.
/// Once the tolerance is met, one further full step is tried and kept if it lowers the
/// residual, unless the input already sat below `tol/1000`.
pub fn newton_refine<C: ConstraintSystem + ?Sized>(
    sys: &C,
    pivots: &[usize],
    beta: &DVector<f64>,
    v0: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<DVector<f64>> {
    let complement = complement_of(pivots, sys.p_tilde());
    let nu = PermutationNu::new(pivots, &complement);
    let mut v = v0.clone();
    let mut theta = nu.assemble(&v, beta);
    let mut f = sys.eval_f(&theta);
    let mut r = max_abs(&f);
    for it in 0..max_iter {
        if r <= tol {
            if r > 0.0 && (it > 0 || r > 1e-3 * tol) {
                let jv = select_columns(&sys.eval_df(&theta), pivots);
                if let Some(delta) = jv.lu().solve(&f) {
                    let v_try = &v - &delta;
                    if max_abs(&sys.eval_f(&nu.assemble(&v_try, beta))) < r {
                        return Ok(v_try);
                    }
                }
            }
            return Ok(v);
        }
        let jv = select_columns(&sys.eval_df(&theta), pivots);
        let delta = jv.lu().solve(&f).ok_or(Error::SingularPivotBlock)?;
        let mut t = 1.0;
        let mut damping = 0;
        loop {
            let v_try = &v - &delta * t;
            let theta_try = nu.assemble(&v_try, beta);
            let f_try = sys.eval_f(&theta_try);
            let r_try = max_abs(&f_try);
            if (r_try.is_finite() && r_try < r) || damping == MAX_DAMPING {
                v = v_try;
                theta = theta_try;
                f = f_try;
                r = if r_try.is_finite() { r_try } else { f64::INFINITY };
                break;
            }
            t *= 0.5;
            damping += 1;
        }
        if !r.is_finite() {
            return Err(Error::NonConvergence { iterations: max_iter, residual: r });
        }
    }
    if r <= tol {
        Ok(v)
    } else {
        Err(Error::NonConvergence { iterations: max_iter, residual: r })
    }
}
