//! Hilbert–Schmidt operators on a discretized space.
//!
//! An operator `A` is stored through a kernel matrix `Q` on the coefficient
//! frame `{phi_k}` of its space: `A u = sum_{k,l} Q_kl <phi_l, u> phi_k`.
//! In coefficients this reads `c(Au) = Q G c(u)` with `G` the Gram matrix,
//! so `<Ah, g> = (G g)' Q (G h)`, tensor squares are `Q = c c'`, and on `L2`
//! the matrix `Q` is the integral kernel sampled on the grid.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::space::{GridFunction, SpaceSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct HSOperator {
    space: SpaceSpec,
    kernel: DMatrix<f64>,
    symmetric: bool,
}

fn relative_asymmetry(q: &DMatrix<f64>) -> f64 {
    let scale = q.amax().max(f64::MIN_POSITIVE);
    (q - q.transpose()).amax() / scale
}

impl HSOperator {
    /// Wraps a kernel matrix. When `symmetric` is set the kernel must be
    /// symmetric to relative `1e-10`.
    pub fn new(space: SpaceSpec, kernel: DMatrix<f64>, symmetric: bool) -> Result<Self> {
        space.validate()?;
        let j = space.dim();
        if kernel.nrows() != j || kernel.ncols() != j {
            return Err(Error::Dimension(format!(
                "{}x{} kernel for a space of dimension {j}",
                kernel.nrows(),
                kernel.ncols()
            )));
        }
        if kernel.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite kernel entry".into()));
        }
        if symmetric && relative_asymmetry(&kernel) > 1e-10 {
            return Err(Error::Argument("kernel flagged symmetric is not symmetric".into()));
        }
        Ok(HSOperator { space, kernel, symmetric })
    }

    pub(crate) fn from_parts_unchecked(space: SpaceSpec, kernel: DMatrix<f64>, symmetric: bool) -> Self {
        HSOperator { space, kernel, symmetric }
    }

    pub fn zeros(space: SpaceSpec) -> Self {
        let j = space.dim();
        HSOperator { space, kernel: DMatrix::zeros(j, j), symmetric: true }
    }

    /// The identity on the discretized space (`Q = G^{-1}`).
    pub fn identity(space: SpaceSpec) -> Result<Self> {
        let g = space.gram_matrix();
        let inv =
            g.cholesky().ok_or_else(|| Error::Numerical("Gram matrix is not positive definite".into()))?.inverse();
        let sym = (&inv + inv.transpose()) * 0.5;
        Ok(HSOperator { space, kernel: sym, symmetric: true })
    }

    /// Integral operator `u -> int q(., y) u(y) dy` on an `L2` grid.
    pub fn from_kernel_fn(space: SpaceSpec, q: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !matches!(space, SpaceSpec::L2 { .. }) {
            return Err(Error::Argument("integral kernels are sampled on L2 grids only".into()));
        }
        let x = space.grid_points();
        let j = x.len();
        let kernel = DMatrix::from_fn(j, j, |k, l| q(x[k], x[l]));
        let symmetric = relative_asymmetry(&kernel) <= 1e-10;
        Self::new(space, kernel, symmetric)
    }

    /// `f^{(x)2} = <f, .> f`.
    pub fn tensor_square(f: &GridFunction) -> Self {
        let c = f.coeffs();
        HSOperator { space: f.space(), kernel: c * c.transpose(), symmetric: true }
    }

    /// Rank-one operator `u -> <b, u> a`.
    pub fn outer(a: &GridFunction, b: &GridFunction) -> Result<Self> {
        a.space().check_same(&b.space())?;
        Ok(HSOperator { space: a.space(), kernel: a.coeffs() * b.coeffs().transpose(), symmetric: false })
    }

    /// `sum_i d_i d_i'` over the columns of `columns`.
    pub fn sum_of_squares(space: SpaceSpec, columns: &DMatrix<f64>) -> Result<Self> {
        if columns.nrows() != space.dim() {
            return Err(Error::Dimension("column length differs from the space dimension".into()));
        }
        let kernel = columns * columns.transpose();
        Ok(HSOperator { space, kernel, symmetric: true }.symmetrized())
    }

    pub fn space(&self) -> SpaceSpec {
        self.space
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn into_kernel(self) -> DMatrix<f64> {
        self.kernel
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        self.space.check_same(&f.space())?;
        Ok(GridFunction::from_parts_unchecked(self.space, &self.kernel * f.dual()))
    }

    /// `<A h, g>`.
    pub fn quad_form(&self, h: &GridFunction, g: &GridFunction) -> Result<f64> {
        self.space.check_same(&h.space())?;
        self.space.check_same(&g.space())?;
        Ok(self.quad_form_duals(&h.dual(), &g.dual()))
    }

    /// `<A h, g>` given the Riesz duals `G h` and `G g`.
    pub fn quad_form_duals(&self, dh: &DVector<f64>, dg: &DVector<f64>) -> f64 {
        dg.dot(&(&self.kernel * dh))
    }

    /// `G Q G`, the matrix of the bilinear form `(h, g) -> <A h, g>` in
    /// frame coefficients.
    fn sandwiched(&self) -> DMatrix<f64> {
        match self.space {
            SpaceSpec::L2 { .. } => {
                let h = self.space.step().unwrap();
                &self.kernel * (h * h)
            }
            SpaceSpec::Spectral { .. } => self.kernel.clone(),
            SpaceSpec::H1 { .. } => {
                let g = self.space.gram_matrix();
                &g * &self.kernel * &g
            }
        }
    }

    /// Hilbert–Schmidt inner product `tr(A C*)`.
    pub fn hs_inner(&self, other: &HSOperator) -> Result<f64> {
        self.space.check_same(&other.space)?;
        Ok(self.sandwiched().component_mul(&other.kernel).sum())
    }

    pub fn hs_norm(&self) -> f64 {
        self.hs_inner(self).unwrap().max(0.0).sqrt()
    }

    /// `hs_norm(self - other)`.
    pub fn hs_distance(&self, other: &HSOperator) -> Result<f64> {
        Ok(self.sub(other)?.hs_norm())
    }

    pub fn adjoint(&self) -> HSOperator {
        HSOperator { space: self.space, kernel: self.kernel.transpose(), symmetric: self.symmetric }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &HSOperator) -> Result<HSOperator> {
        self.space.check_same(&other.space)?;
        let g = self.space.gram_matrix();
        Ok(HSOperator { space: self.space, kernel: &self.kernel * g * &other.kernel, symmetric: false })
    }

    pub fn add(&self, other: &HSOperator) -> Result<HSOperator> {
        self.space.check_same(&other.space)?;
        Ok(HSOperator {
            space: self.space,
            kernel: &self.kernel + &other.kernel,
            symmetric: self.symmetric && other.symmetric,
        })
    }

    pub fn sub(&self, other: &HSOperator) -> Result<HSOperator> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> HSOperator {
        HSOperator { space: self.space, kernel: &self.kernel * c, symmetric: self.symmetric }
    }

    /// `(A + A*) / 2`, flagged symmetric.
    pub fn symmetrized(&self) -> HSOperator {
        let k = (&self.kernel + self.kernel.transpose()) * 0.5;
        HSOperator { space: self.space, kernel: k, symmetric: true }
    }

    /// Lower Cholesky factor `L` of the Gram matrix, `G = L L'`.
    fn gram_factor(&self) -> Result<DMatrix<f64>> {
        Ok(match self.space {
            SpaceSpec::L2 { .. } => {
                let j = self.space.dim();
                DMatrix::identity(j, j) * self.space.step().unwrap().sqrt()
            }
            SpaceSpec::Spectral { .. } => DMatrix::identity(self.space.dim(), self.space.dim()),
            SpaceSpec::H1 { .. } => self
                .space
                .gram_matrix()
                .cholesky()
                .ok_or_else(|| Error::Numerical("Gram matrix is not positive definite".into()))?
                .l(),
        })
    }

    /// Matrix of the operator in an orthonormal basis of the frame span.
    pub fn orthonormal_matrix(&self) -> Result<DMatrix<f64>> {
        let l = self.gram_factor()?;
        Ok(l.transpose() * &self.kernel * l)
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let m = self.orthonormal_matrix()?;
        let sym = (&m + m.transpose()) * 0.5;
        let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        Ok(ev)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.first().copied().unwrap_or(0.0))
    }
}

/// A finite weighted sum `B = sum_l mu_l a_l (x) b_l` of rank-one operators,
/// `(a (x) b) u = <b, u> a`. This is the class of test operators for the
/// functional limit theorems.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteRankOperator {
    space: SpaceSpec,
    terms: Vec<(f64, GridFunction, GridFunction)>,
}

/// Riesz duals of the factors of a [`FiniteRankOperator`], stacked as
/// columns, for repeated pairing against tensor squares.
#[derive(Debug, Clone)]
pub struct PreparedTest {
    weights: DVector<f64>,
    left: DMatrix<f64>,
    right: DMatrix<f64>,
}

impl PreparedTest {
    /// `<x^{(x)2}, B>_HS = sum_l mu_l <x, a_l> <x, b_l>` for coefficients `x`.
    pub fn pair(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        let a = self.left.tr_mul(&x);
        let b = self.right.tr_mul(&x);
        a.component_mul(&b).dot(&self.weights)
    }

    /// Pairings for every column of `columns`.
    pub fn pair_columns(&self, columns: &DMatrix<f64>) -> Vec<f64> {
        let a = self.left.tr_mul(columns);
        let b = self.right.tr_mul(columns);
        (0..columns.ncols())
            .map(|i| (0..self.weights.len()).map(|l| self.weights[l] * a[(l, i)] * b[(l, i)]).sum())
            .collect()
    }
}

impl FiniteRankOperator {
    pub fn new(terms: Vec<(f64, GridFunction, GridFunction)>) -> Result<Self> {
        let Some(first) = terms.first() else {
            return Err(Error::Argument("a test operator needs at least one term".into()));
        };
        let space = first.1.space();
        for (mu, a, b) in &terms {
            if !mu.is_finite() {
                return Err(Error::Numerical("non-finite weight".into()));
            }
            space.check_same(&a.space())?;
            space.check_same(&b.space())?;
        }
        Ok(FiniteRankOperator { space, terms })
    }

    /// `h^{(x)2}`.
    pub fn tensor_square(h: &GridFunction) -> Self {
        FiniteRankOperator { space: h.space(), terms: vec![(1.0, h.clone(), h.clone())] }
    }

    /// `a (x) b`.
    pub fn rank_one(a: &GridFunction, b: &GridFunction) -> Result<Self> {
        Self::new(vec![(1.0, a.clone(), b.clone())])
    }

    pub fn space(&self) -> SpaceSpec {
        self.space
    }

    pub fn terms(&self) -> &[(f64, GridFunction, GridFunction)] {
        &self.terms
    }

    pub fn scale(&self, c: f64) -> Self {
        let terms = self.terms.iter().map(|(m, a, b)| (m * c, a.clone(), b.clone())).collect();
        FiniteRankOperator { space: self.space, terms }
    }

    pub fn adjoint(&self) -> Self {
        let terms = self.terms.iter().map(|(m, a, b)| (*m, b.clone(), a.clone())).collect();
        FiniteRankOperator { space: self.space, terms }
    }

    /// `(B + B*) / 2`.
    pub fn symmetrized(&self) -> Self {
        let mut terms: Vec<_> = self.terms.iter().map(|(m, a, b)| (m / 2.0, a.clone(), b.clone())).collect();
        terms.extend(self.terms.iter().map(|(m, a, b)| (m / 2.0, b.clone(), a.clone())));
        FiniteRankOperator { space: self.space, terms }
    }

    pub fn to_operator(&self) -> HSOperator {
        let j = self.space.dim();
        let mut k = DMatrix::zeros(j, j);
        for (mu, a, b) in &self.terms {
            k += a.coeffs() * b.coeffs().transpose() * *mu;
        }
        let symmetric = relative_asymmetry(&k) <= 1e-12;
        HSOperator::from_parts_unchecked(self.space, k, symmetric)
    }

    /// `<A, B>_HS = sum_l mu_l <A b_l, a_l>`.
    pub fn pair(&self, a: &HSOperator) -> Result<f64> {
        self.space.check_same(&a.space())?;
        let mut s = 0.0;
        for (mu, l, r) in &self.terms {
            s += mu * a.quad_form(r, l)?;
        }
        Ok(s)
    }

    /// `<x^{(x)2}, B>_HS`.
    pub fn pair_tensor_square(&self, x: &GridFunction) -> Result<f64> {
        self.space.check_same(&x.space())?;
        let mut s = 0.0;
        for (mu, a, b) in &self.terms {
            s += mu * x.inner(a)? * x.inner(b)?;
        }
        Ok(s)
    }

    pub fn prepare(&self) -> PreparedTest {
        let j = self.space.dim();
        let l = self.terms.len();
        let mut left = DMatrix::zeros(j, l);
        let mut right = DMatrix::zeros(j, l);
        let mut weights = DVector::zeros(l);
        for (i, (mu, a, b)) in self.terms.iter().enumerate() {
            left.set_column(i, &a.dual());
            right.set_column(i, &b.dual());
            weights[i] = *mu;
        }
        PreparedTest { weights, left, right }
    }
}

/// Factors `h_1, ..., h_m` of a rank-one tensor `h_1 (x) ... (x) h_m`, used to
/// evaluate multilinear forms without materializing higher tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneTestTensor {
    space: SpaceSpec,
    factors: Vec<GridFunction>,
}

impl RankOneTestTensor {
    pub fn new(factors: Vec<GridFunction>) -> Result<Self> {
        let Some(first) = factors.first() else {
            return Err(Error::Argument("a test tensor needs at least one factor".into()));
        };
        let space = first.space();
        for f in &factors {
            space.check_same(&f.space())?;
        }
        Ok(RankOneTestTensor { space, factors })
    }

    pub fn space(&self) -> SpaceSpec {
        self.space
    }

    pub fn factors(&self) -> &[GridFunction] {
        &self.factors
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo(j: usize, seed: u64) -> Vec<f64> {
        (0..j).map(|k| (((k as u64 + 1) * 2654435761 ^ seed) % 1000) as f64 / 500.0 - 1.0).collect()
    }

    #[test]
    fn rank_one_norm_factorizes() {
        let s = SpaceSpec::spectral(3).unwrap();
        let f = GridFunction::from_vec(s, vec![2.0, 0.0, 0.0]).unwrap();
        let g = GridFunction::from_vec(s, vec![0.0, 3.0, 0.0]).unwrap();
        let a = HSOperator::outer(&f, &g).unwrap();
        assert!((a.hs_norm() - 6.0).abs() < 1e-14);
        assert_eq!(HSOperator::zeros(s).hs_norm(), 0.0);
    }

    #[test]
    fn rank_one_norm_factorizes_in_h1() {
        let s = SpaceSpec::h1(9).unwrap();
        let f = GridFunction::from_vec(s, pseudo(9, 1)).unwrap();
        let g = GridFunction::from_vec(s, pseudo(9, 7)).unwrap();
        let a = HSOperator::outer(&f, &g).unwrap();
        assert!((a.hs_norm() - f.norm() * g.norm()).abs() < 1e-10 * a.hs_norm());
    }

    #[test]
    fn tensor_square_quadratic_form_double_loop() {
        for space in
            [SpaceSpec::l2(0.0, 2.0, 10).unwrap(), SpaceSpec::h1(10).unwrap(), SpaceSpec::spectral(10).unwrap()]
        {
            let f = GridFunction::from_vec(space, pseudo(10, 3)).unwrap();
            let g = GridFunction::from_vec(space, pseudo(10, 11)).unwrap();
            let h = GridFunction::from_vec(space, pseudo(10, 29)).unwrap();
            let a = HSOperator::tensor_square(&f);
            assert!(a.is_symmetric());
            // double loop <A g, h> = sum_kl Q_kl <phi_l, g> <phi_k, h>
            let gm = space.gram_matrix();
            let mut direct = 0.0;
            for k in 0..10 {
                for l in 0..10 {
                    let pl_g: f64 = (0..10).map(|m| gm[(l, m)] * g.coeffs()[m]).sum();
                    let pk_h: f64 = (0..10).map(|m| gm[(k, m)] * h.coeffs()[m]).sum();
                    direct += a.kernel()[(k, l)] * pl_g * pk_h;
                }
            }
            let want = f.inner(&g).unwrap() * f.inner(&h).unwrap();
            assert!((a.quad_form(&g, &h).unwrap() - want).abs() < 1e-12 * (1.0 + want.abs()));
            assert!((direct - want).abs() < 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn identity_quadratic_form() {
        let s = SpaceSpec::spectral(4).unwrap();
        let e2 = GridFunction::basis(s, 2).unwrap();
        let id = HSOperator::identity(s).unwrap();
        assert!((id.quad_form(&e2, &e2).unwrap() - 1.0).abs() < 1e-15);
        let h1 = SpaceSpec::h1(6).unwrap();
        let f = GridFunction::from_vec(h1, pseudo(6, 5)).unwrap();
        let idf = HSOperator::identity(h1).unwrap().apply(&f).unwrap();
        assert!((idf.coeffs() - f.coeffs()).amax() < 1e-10);
    }

    #[test]
    fn product_kernel_quadratic_form() {
        let s = SpaceSpec::l2(0.0, 1.0, 40).unwrap();
        let a = HSOperator::from_kernel_fn(s, |x, y| x * y).unwrap();
        let one = GridFunction::from_fn(s, |_| 1.0).unwrap();
        assert!((a.quad_form(&one, &one).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn hs_norm_matches_eigenvalues_of_symmetric_operator() {
        let s = SpaceSpec::spectral(5).unwrap();
        let m = DMatrix::from_fn(5, 5, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let sym = (&m + m.transpose()) * 0.5;
        let a = HSOperator::new(s, sym.clone(), true).unwrap();
        let ev = sym.symmetric_eigenvalues();
        let want: f64 = ev.iter().map(|l| l * l).sum::<f64>().sqrt();
        assert!((a.hs_norm() - want).abs() < 1e-12 * want);
    }

    #[test]
    fn composition_and_adjoint_act_as_operators() {
        let s = SpaceSpec::h1(7).unwrap();
        let a = HSOperator::new(s, DMatrix::from_fn(7, 7, |i, j| pseudo(49, 2)[i * 7 + j]), false).unwrap();
        let c = HSOperator::new(s, DMatrix::from_fn(7, 7, |i, j| pseudo(49, 9)[i * 7 + j]), false).unwrap();
        let f = GridFunction::from_vec(s, pseudo(7, 4)).unwrap();
        let g = GridFunction::from_vec(s, pseudo(7, 13)).unwrap();
        let ac = a.compose(&c).unwrap().apply(&f).unwrap();
        let a_cf = a.apply(&c.apply(&f).unwrap()).unwrap();
        assert!((ac.coeffs() - a_cf.coeffs()).amax() < 1e-10);
        let lhs = a.apply(&f).unwrap().inner(&g).unwrap();
        let rhs = f.inner(&a.adjoint().apply(&g).unwrap()).unwrap();
        assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn finite_rank_pairing_agrees_with_dense_operator() {
        let s = SpaceSpec::l2(0.0, 1.0, 8).unwrap();
        let a = GridFunction::from_vec(s, pseudo(8, 1)).unwrap();
        let b = GridFunction::from_vec(s, pseudo(8, 2)).unwrap();
        let x = GridFunction::from_vec(s, pseudo(8, 3)).unwrap();
        let op = FiniteRankOperator::new(vec![(2.0, a.clone(), b.clone()), (-0.5, b, a)]).unwrap();
        let dense = op.to_operator();
        let sq = HSOperator::tensor_square(&x);
        let via_dense = sq.hs_inner(&dense).unwrap();
        let via_terms = op.pair_tensor_square(&x).unwrap();
        let via_prepared = op.prepare().pair(x.coeffs().as_slice());
        assert!((via_dense - via_terms).abs() < 1e-12);
        assert!((via_prepared - via_terms).abs() < 1e-12);
        assert!((op.pair(&sq).unwrap() - via_terms).abs() < 1e-12);
    }

    #[test]
    fn symmetric_flag_is_checked() {
        let s = SpaceSpec::spectral(2).unwrap();
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(HSOperator::new(s, k, true).is_err());
    }
}
