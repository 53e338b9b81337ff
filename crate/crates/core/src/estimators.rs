//! Realised covariation estimators built from (semigroup-adjusted) increments.
//!
//! Higher tensor powers are never formed: multipower variations and the
//! asymptotic-variance estimator are evaluated against rank-one test tensors.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::operator::{FiniteRankOperator, HSOperator, RankOneTestTensor};
use crate::quadrature::simpson_weights;
use crate::semigroup::{grid_steps, Direction, SemigroupSpec};
use crate::simulate::PathSample;
use crate::space::{GridFunction, SpaceSpec};
use crate::volatility::VolModel;

/// Increments `Delta_i Y` or `Y_i - S(Delta) Y_{i-1}`, `i = 1..n`, stored as
/// the columns of a `J x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSeries {
    space: SpaceSpec,
    increments: DMatrix<f64>,
    adjusted: bool,
    dt: f64,
}

impl IncrementSeries {
    pub fn from_columns(space: SpaceSpec, increments: DMatrix<f64>, adjusted: bool, dt: f64) -> Result<Self> {
        if increments.nrows() != space.dim() {
            return Err(Error::Dimension("increment length differs from the space dimension".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::Argument("sampling step must be positive".into()));
        }
        Ok(IncrementSeries { space, increments, adjusted, dt })
    }

    pub fn space(&self) -> SpaceSpec {
        self.space
    }

    pub fn len(&self) -> usize {
        self.increments.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.ncols() == 0
    }

    pub fn is_adjusted(&self) -> bool {
        self.adjusted
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.increments
    }

    /// Increment `i`, 1-based.
    pub fn increment(&self, i: usize) -> GridFunction {
        GridFunction::from_parts_unchecked(self.space, self.increments.column(i - 1).into_owned())
    }

    /// Number of increments falling in `[0, t]`.
    pub fn window(&self, t: f64) -> Result<usize> {
        window(t, self.dt, self.len())
    }

    /// `sum_{i <= t / Delta} d_i^{(x)2}`.
    pub fn sum_of_squares(&self, t: f64) -> Result<HSOperator> {
        let k = self.window(t)?;
        HSOperator::sum_of_squares(self.space, &self.increments.columns(0, k).into_owned())
    }

    /// `<d_i, h>` for every increment.
    pub fn inner_products(&self, h: &GridFunction) -> Result<DVector<f64>> {
        self.space.check_same(&h.space())?;
        Ok(self.increments.tr_mul(&h.dual()))
    }
}

fn window(t: f64, dt: f64, n: usize) -> Result<usize> {
    if !(t >= 0.0) {
        return Err(Error::Argument(format!("time {t} must be nonnegative")));
    }
    let k = (t / dt + 1e-9).floor() as usize;
    if k > n {
        return Err(Error::Window(format!("time {t} lies beyond the {n} observed increments")));
    }
    Ok(k)
}

/// `Y_i - S(Delta) Y_{i-1}`.
pub fn adjusted_increments(path: &PathSample, s: &SemigroupSpec) -> Result<IncrementSeries> {
    let space = path.space();
    let p = s.propagator(&space, path.dt(), Direction::Forward)?;
    let v = path.values();
    let n = path.n();
    let mut d = DMatrix::zeros(space.dim(), n);
    for i in 1..=n {
        let mut prev = v.column(i - 1).into_owned();
        p.apply_vector(&mut prev);
        d.set_column(i - 1, &(v.column(i) - prev));
    }
    IncrementSeries::from_columns(space, d, true, path.dt())
}

/// `Y_i - Y_{i-1}`.
pub fn raw_increments(path: &PathSample) -> IncrementSeries {
    let v = path.values();
    let n = path.n();
    let d = v.columns(1, n) - v.columns(0, n);
    IncrementSeries { space: path.space(), increments: d, adjusted: false, dt: path.dt() }
}

/// Semigroup-adjusted realised covariation on `[0, t]`.
pub fn sarcv(path: &PathSample, s: &SemigroupSpec, t: f64) -> Result<HSOperator> {
    adjusted_increments(path, s)?.sum_of_squares(t)
}

/// Realised covariation of the raw increments on `[0, t]`.
pub fn rv(path: &PathSample, t: f64) -> Result<HSOperator> {
    raw_increments(path).sum_of_squares(t)
}

/// `<SAMPV_t(m_1, ..., m_k), (x)_j (x)_l h_{j,l}>`, summing
/// `prod_j prod_l <d_{i+j-1}, h_{j,l}>` over `i = 1..floor(t/Delta) - k + 1`.
pub fn sampv_qform_increments(
    inc: &IncrementSeries,
    orders: &[usize],
    factors: &[RankOneTestTensor],
    t: f64,
) -> Result<f64> {
    if orders.is_empty() || orders.len() != factors.len() {
        return Err(Error::Argument("one test tensor is needed per order block".into()));
    }
    for (m, f) in orders.iter().zip(factors) {
        if *m != f.order() {
            return Err(Error::Argument(format!("order {m} paired with a test tensor of {} factors", f.order())));
        }
        inc.space.check_same(&f.space())?;
    }
    let k = orders.len();
    let n = inc.window(t)?;
    if n < k {
        return Ok(0.0);
    }
    let blocks: Vec<Vec<f64>> = factors
        .iter()
        .map(|tt| {
            let mut prod = vec![1.0; n];
            for h in tt.factors() {
                let ip = inc.increments.columns(0, n).tr_mul(&h.dual());
                for (p, v) in prod.iter_mut().zip(ip.iter()) {
                    *p *= v;
                }
            }
            prod
        })
        .collect();
    let mut total = 0.0;
    for i in 0..=(n - k) {
        let mut term = 1.0;
        for (j, b) in blocks.iter().enumerate() {
            term *= b[i + j];
        }
        total += term;
    }
    Ok(total)
}

/// Multipower quadratic form computed from a path.
pub fn sampv_qform(
    path: &PathSample,
    s: &SemigroupSpec,
    orders: &[usize],
    factors: &[RankOneTestTensor],
    t: f64,
) -> Result<f64> {
    sampv_qform_increments(&adjusted_increments(path, s)?, orders, factors, t)
}

/// Perfect pairings of `{1, ..., m}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairingSet {
    m: usize,
    pairings: Vec<Vec<(usize, usize)>>,
}

impl PairingSet {
    /// All `(m - 1)!!` pairings for even `m`; empty for odd `m`.
    pub fn new(m: usize) -> Self {
        let mut out = Vec::new();
        if m % 2 == 0 {
            let items: Vec<usize> = (1..=m).collect();
            pairings_rec(&items, &mut Vec::new(), &mut out);
        }
        PairingSet { m, pairings: out }
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn pairings(&self) -> &[Vec<(usize, usize)>] {
        &self.pairings
    }

    pub fn len(&self) -> usize {
        self.pairings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairings.is_empty()
    }
}

fn pairings_rec(rest: &[usize], current: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
    if rest.is_empty() {
        if !current.is_empty() {
            out.push(current.clone());
        }
        return;
    }
    let first = rest[0];
    for k in 1..rest.len() {
        current.push((first, rest[k]));
        let remaining: Vec<usize> = rest[1..].iter().enumerate().filter(|(i, _)| i + 1 != k).map(|(_, v)| *v).collect();
        pairings_rec(&remaining, current, out);
        current.pop();
    }
}

/// `<rho_Sigma(m), h_1 (x) ... (x) h_m> = sum_p prod_{(x,y) in p} <Sigma h_x, h_y>`.
pub fn rho_qform(sigma: &HSOperator, m: usize, factors: &[GridFunction]) -> Result<f64> {
    if factors.len() != m {
        return Err(Error::Argument(format!("{} factors for order {m}", factors.len())));
    }
    if m % 2 == 1 || m == 0 {
        return Ok(if m == 0 { 1.0 } else { 0.0 });
    }
    let duals: Vec<DVector<f64>> = factors
        .iter()
        .map(|f| {
            sigma.space().check_same(&f.space())?;
            Ok(f.dual())
        })
        .collect::<Result<_>>()?;
    let mut pair = DMatrix::zeros(m, m);
    for x in 0..m {
        for y in 0..m {
            pair[(x, y)] = sigma.quad_form_duals(&duals[x], &duals[y]);
        }
    }
    Ok(PairingSet::new(m)
        .pairings()
        .iter()
        .map(|p| p.iter().map(|&(x, y)| pair[(x - 1, y - 1)]).product::<f64>())
        .sum())
}

/// `c_i = <d_i^{(x)2}, B>` for the increments in `[0, t]`.
pub fn test_pairings(inc: &IncrementSeries, b: &FiniteRankOperator, t: f64) -> Result<Vec<f64>> {
    inc.space.check_same(&b.space())?;
    let n = inc.window(t)?;
    Ok(b.prepare().pair_columns(&inc.increments.columns(0, n).into_owned()))
}

/// `Delta^{-1} (sum c_i^2 - sum c_i c_{i+1})` from precomputed pairings.
pub fn gamma_hat_from_pairings(c: &[f64], dt: f64) -> Result<f64> {
    if c.len() < 2 {
        return Err(Error::Window(format!("{} increments; at least 2 are needed", c.len())));
    }
    let sq: f64 = c.iter().map(|v| v * v).sum();
    let cross: f64 = c.windows(2).map(|w| w[0] * w[1]).sum();
    Ok((sq - cross) / dt)
}

/// `<Gamma_hat_t B, B>`.
pub fn gamma_hat_qform_increments(inc: &IncrementSeries, b: &FiniteRankOperator, t: f64) -> Result<f64> {
    gamma_hat_from_pairings(&test_pairings(inc, b, t)?, inc.dt)
}

pub fn gamma_hat_qform(path: &PathSample, s: &SemigroupSpec, b: &FiniteRankOperator, t: f64) -> Result<f64> {
    gamma_hat_qform_increments(&adjusted_increments(path, s)?, b, t)
}

/// `<Sigma (B + B*) Sigma, B>_HS` for one operator `Sigma`.
pub fn gamma_integrand(sigma: &HSOperator, b: &FiniteRankOperator) -> Result<f64> {
    sigma.space().check_same(&b.space())?;
    let terms = b.terms();
    let da: Vec<DVector<f64>> = terms.iter().map(|(_, a, _)| a.dual()).collect();
    let db: Vec<DVector<f64>> = terms.iter().map(|(_, _, b)| b.dual()).collect();
    let q = |x: &DVector<f64>, y: &DVector<f64>| sigma.quad_form_duals(x, y);
    let mut total = 0.0;
    for (l, (mu, _, _)) in terms.iter().enumerate() {
        for (k, (nu, _, _)) in terms.iter().enumerate() {
            let straight = q(&da[l], &da[k]) * q(&db[l], &db[k]);
            let crossed = q(&db[l], &da[k]) * q(&da[l], &db[k]);
            total += mu * nu * (straight + crossed);
        }
    }
    Ok(total)
}

/// `<Gamma_t B, B> = int_0^t <Sigma_s (B + B*) Sigma_s, B> ds`.
pub fn gamma_theoretical_qform(vol: &VolModel, b: &FiniteRankOperator, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Argument(format!("time {t} must be nonnegative")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    if vol.is_time_constant() {
        return Ok(t * gamma_integrand(&vol.sigma_sq_at(0.0)?, b)?);
    }
    let (intervals, h) = match vol.time_grid_step() {
        Some(dx) => (grid_steps(t, dx)?, dx),
        None => (400, t / 400.0),
    };
    let w = simpson_weights(intervals, h);
    let mut total = 0.0;
    for (k, wk) in w.iter().enumerate() {
        let s = if k == intervals { t } else { k as f64 * h };
        total += wk * gamma_integrand(&vol.sigma_sq_at(s)?, b)?;
    }
    Ok(total)
}

/// `sum_{i = floor(U/Delta)+1}^{floor(T/Delta)} (S(T - i Delta) Y_i - S(T - (i-1) Delta) Y_{i-1})^{(x)2}`.
///
/// The transported increment equals `S(T - i Delta)` applied to the adjusted
/// increment, which is how it is evaluated.
pub fn conditional_cov_estimator(path: &PathSample, s: &SemigroupSpec, u: f64, t: f64) -> Result<HSOperator> {
    if u > t {
        return Err(Error::Argument(format!("start {u} exceeds terminal time {t}")));
    }
    let inc = adjusted_increments(path, s)?;
    let lo = inc.window(u)?;
    let hi = inc.window(t)?;
    let space = path.space();
    let dt = path.dt();
    let mut cols = DMatrix::zeros(space.dim(), hi - lo);
    for i in (lo + 1)..=hi {
        let p = s.propagator(&space, (t - i as f64 * dt).max(0.0), Direction::Forward)?;
        let mut v = inc.increments.column(i - 1).into_owned();
        p.apply_vector(&mut v);
        cols.set_column(i - lo - 1, &v);
    }
    HSOperator::sum_of_squares(space, &cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hand_path(vals: &[[f64; 3]]) -> PathSample {
        let s = SpaceSpec::spectral(3).unwrap();
        let obs: Vec<GridFunction> = vals.iter().map(|v| GridFunction::from_vec(s, v.to_vec()).unwrap()).collect();
        PathSample::from_observations(&obs, 1.0 / (vals.len() - 1) as f64, SemigroupSpec::Identity).unwrap()
    }

    #[test]
    fn pairing_counts_are_double_factorials() {
        assert_eq!(PairingSet::new(2).len(), 1);
        assert_eq!(PairingSet::new(4).len(), 3);
        assert_eq!(PairingSet::new(6).len(), 15);
        assert_eq!(PairingSet::new(8).len(), 105);
        assert!(PairingSet::new(3).is_empty());
        for p in PairingSet::new(6).pairings() {
            let mut seen: Vec<usize> = p.iter().flat_map(|&(a, b)| [a, b]).collect();
            assert!(p.iter().all(|&(a, b)| a < b));
            seen.sort();
            assert_eq!(seen, vec![1, 2, 3, 4, 5, 6]);
        }
    }

    #[test]
    fn single_increment_gives_tensor_square() {
        let p = hand_path(&[[0.0, 0.0, 0.0], [1.0, -2.0, 0.5]]);
        let est = sarcv(&p, &SemigroupSpec::Identity, 1.0).unwrap();
        let want = HSOperator::tensor_square(&p.observation(1));
        assert_eq!(est, want);
    }

    #[test]
    fn bipower_hand_expansion() {
        let p = hand_path(&[[0.0, 0.0, 0.0], [1.0, 2.0, 0.0], [0.0, 3.0, 1.0], [2.0, 3.0, -1.0]]);
        let s = p.space();
        let h = GridFunction::from_vec(s, vec![0.5, 1.0, -1.0]).unwrap();
        let inc = raw_increments(&p);
        let (a, b, c) = (inc.increment(1), inc.increment(2), inc.increment(3));
        let (ah, bh, ch) = (a.inner(&h).unwrap(), b.inner(&h).unwrap(), c.inner(&h).unwrap());
        let want = ah * ah * bh * bh + bh * bh * ch * ch;
        let tt = RankOneTestTensor::new(vec![h.clone(), h.clone()]).unwrap();
        let got = sampv_qform(&p, &SemigroupSpec::Identity, &[2, 2], &[tt.clone(), tt], 1.0).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn factor_count_mismatch_is_rejected() {
        let p = hand_path(&[[0.0, 0.0, 0.0], [1.0, 2.0, 0.0]]);
        let h = GridFunction::basis(p.space(), 1).unwrap();
        let tt = RankOneTestTensor::new(vec![h]).unwrap();
        assert!(sampv_qform(&p, &SemigroupSpec::Identity, &[2], &[tt], 1.0).is_err());
    }

    #[test]
    fn rho_examples() {
        let s = SpaceSpec::spectral(3).unwrap();
        let sig =
            HSOperator::new(s, DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 3.0]), true)
                .unwrap();
        let h1 = GridFunction::from_vec(s, vec![1.0, -1.0, 0.5]).unwrap();
        let h2 = GridFunction::from_vec(s, vec![0.0, 2.0, 1.0]).unwrap();
        let two = rho_qform(&sig, 2, &[h1.clone(), h2.clone()]).unwrap();
        assert!((two - sig.quad_form(&h1, &h2).unwrap()).abs() < 1e-14);
        let v = sig.quad_form(&h1, &h1).unwrap();
        let four = rho_qform(&sig, 4, &[h1.clone(), h1.clone(), h1.clone(), h1.clone()]).unwrap();
        assert!((four - 3.0 * v * v).abs() < 1e-12);
        assert_eq!(rho_qform(&sig, 3, &[h1.clone(), h1.clone(), h1]).unwrap(), 0.0);
    }

    #[test]
    fn gamma_hat_of_constant_pairings() {
        let c = vec![0.3; 10];
        let g = gamma_hat_from_pairings(&c, 0.1).unwrap();
        assert!((g - 0.09 / 0.1).abs() < 1e-12);
        assert!(matches!(gamma_hat_from_pairings(&[1.0], 0.1), Err(Error::Window(_))));
    }

    #[test]
    fn gamma_integrand_for_rank_one_square() {
        let s = SpaceSpec::spectral(3).unwrap();
        let sig =
            HSOperator::new(s, DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 3.0]), true)
                .unwrap();
        let h = GridFunction::from_vec(s, vec![1.0, -1.0, 0.5]).unwrap();
        let v = sig.quad_form(&h, &h).unwrap();
        let g = gamma_integrand(&sig, &FiniteRankOperator::tensor_square(&h)).unwrap();
        assert!((g - 2.0 * v * v).abs() < 1e-12);
    }
}
