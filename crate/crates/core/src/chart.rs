//! Charts at infinity.
//!
//! After an orthogonal change of coordinates `x' = Q x`, the chart with index
//! `k` sets `x'_k = 1/y_0` and lists the remaining rotated coordinates as
//! `y_j / y_0`, `j = 1..n-1`, in increasing order. The map then reads
//! `F(y, t) = f(x(y)) - t`.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::poly::rational_to_f64;
use crate::polymap::PolyMap;

#[derive(Debug, Clone)]
pub struct ChartMap {
    base: PolyMap,
    /// 1-based index of the coordinate sent to `1/y_0`.
    chart_index: usize,
    rotation: Vec<Vec<BigRational>>,
    q: Mat,
}

/// Partial derivatives of `F` at a chart point: `dF/dy` is `p x n` with the
/// `y_0` column first, `dF/dt = -I_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPartials {
    pub dfdy: Mat,
    pub dfdt: Mat,
}

fn rational_identity(n: usize) -> Vec<Vec<BigRational>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }).collect())
        .collect()
}

fn to_f64_matrix(r: &[Vec<BigRational>]) -> Mat {
    Mat::from_rows(&r.iter().map(|row| row.iter().map(rational_to_f64).collect()).collect::<Vec<_>>())
}

/// Rounds a float to a rational with 12 significant decimal digits.
pub fn rationalize_12(v: f64) -> BigRational {
    if v == 0.0 || !v.is_finite() {
        return BigRational::zero();
    }
    let e = libm::floor(libm::log10(libm::fabs(v))) as i32 - 11;
    let mant = libm::round(v / libm::pow(10.0, e as f64)) as i64;
    let ten = BigInt::from(10);
    let m = BigRational::from_integer(BigInt::from(mant));
    if e >= 0 {
        m * BigRational::from_integer(num_traits::pow(ten, e as usize))
    } else {
        m / BigRational::from_integer(num_traits::pow(ten, (-e) as usize))
    }
}

/// An exact rational unit vector close to the unit vector `u`.
///
/// The direction is stereographically projected from the pole opposite to
/// its last coordinate, the projection is rounded to 12 significant digits,
/// and the inverse projection (a rational map) brings it back to the sphere.
pub fn rational_unit_vector(u: &[f64]) -> Result<Vec<BigRational>> {
    let n = u.len();
    let nrm = linalg::norm(u);
    if n == 0 || nrm == 0.0 || !nrm.is_finite() {
        return Err(Error::ZeroVector);
    }
    let u: Vec<f64> = u.iter().map(|v| v / nrm).collect();
    let last = u[n - 1];
    // project from -e_n when the last coordinate is >= 0, else from +e_n
    let from_south = last >= 0.0;
    let denom = if from_south { 1.0 + last } else { 1.0 - last };
    let s: Vec<BigRational> = u[..n - 1].iter().map(|&v| rationalize_12(v / denom)).collect();
    let s2: BigRational = s.iter().map(|v| v * v).fold(BigRational::zero(), |a, b| a + b);
    let one = BigRational::one();
    let two = BigRational::from_integer(BigInt::from(2));
    let d = &one + &s2;
    let mut out: Vec<BigRational> = s.iter().map(|v| &two * v / &d).collect();
    let tail = if from_south { (&one - &s2) / &d } else { (&s2 - &one) / &d };
    out.push(tail);
    Ok(out)
}

/// Rational Householder reflection `H = I - 2 w w^T / (w^T w)`, `w = u - e_n`,
/// mapping the rational unit vector `u` to `e_n`.
pub fn householder_rational(u: &[BigRational]) -> Vec<Vec<BigRational>> {
    let n = u.len();
    let mut w: Vec<BigRational> = u.to_vec();
    w[n - 1] -= BigRational::one();
    let ww: BigRational = w.iter().map(|v| v * v).fold(BigRational::zero(), |a, b| a + b);
    let mut h = rational_identity(n);
    if ww.is_zero() {
        return h;
    }
    let two = BigRational::from_integer(BigInt::from(2));
    for i in 0..n {
        for j in 0..n {
            h[i][j] -= &two * &w[i] * &w[j] / &ww;
        }
    }
    h
}

impl ChartMap {
    /// Chart `U_k` with the identity rotation; `chart_index` is 1-based.
    pub fn new(base: PolyMap, chart_index: usize) -> Result<Self> {
        let n = base.n();
        Self::with_rotation(base, chart_index, rational_identity(n))
    }

    pub fn with_rotation(base: PolyMap, chart_index: usize, rotation: Vec<Vec<BigRational>>) -> Result<Self> {
        let n = base.n();
        if chart_index == 0 || chart_index > n {
            return Err(Error::VariableOutOfRange { index: chart_index, n_vars: n });
        }
        if rotation.len() != n || rotation.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: rotation.len() });
        }
        for i in 0..n {
            for j in 0..n {
                let d: BigRational =
                    (0..n).map(|k| &rotation[k][i] * &rotation[k][j]).fold(BigRational::zero(), |a, b| a + b);
                let want = if i == j { BigRational::one() } else { BigRational::zero() };
                if d != want {
                    return Err(Error::Config("rotation is not orthogonal".into()));
                }
            }
        }
        let q = to_f64_matrix(&rotation);
        Ok(ChartMap { base, chart_index, rotation, q })
    }

    /// Chart `U_n` after the rational Householder rotation taking the
    /// direction `u` (approximately) to the last axis.
    pub fn for_direction(base: PolyMap, u: &[f64]) -> Result<Self> {
        let n = base.n();
        if u.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: u.len() });
        }
        let ru = rational_unit_vector(u)?;
        let h = householder_rational(&ru);
        Self::with_rotation(base, n, h)
    }

    pub fn base(&self) -> &PolyMap {
        &self.base
    }

    pub fn chart_index(&self) -> usize {
        self.chart_index
    }

    pub fn rotation(&self) -> &[Vec<BigRational>] {
        &self.rotation
    }

    pub fn rotation_f64(&self) -> &Mat {
        &self.q
    }

    fn other_indices(&self) -> impl Iterator<Item = usize> + '_ {
        let k = self.chart_index - 1;
        (0..self.base.n()).filter(move |&i| i != k)
    }

    /// Rotated coordinates `x' = Q x`.
    pub fn rotate(&self, x: &[f64]) -> Vec<f64> {
        let n = self.base.n();
        (0..n).map(|i| linalg::dot(self.q.row(i), x)).collect()
    }

    /// `x = Q^T x'`.
    pub fn unrotate(&self, xr: &[f64]) -> Vec<f64> {
        let n = self.base.n();
        (0..n).map(|j| (0..n).map(|i| self.q[(i, j)] * xr[i]).sum()).collect()
    }

    /// Source point of chart coordinates `y` (requires `y_0 != 0`).
    pub fn to_source(&self, y: &[f64]) -> Result<Vec<f64>> {
        let n = self.base.n();
        if y.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: y.len() });
        }
        if y[0] == 0.0 {
            return Err(Error::OnHyperplaneAtInfinity);
        }
        let mut xr = vec![0.0; n];
        xr[self.chart_index - 1] = 1.0 / y[0];
        for (j, i) in self.other_indices().enumerate() {
            xr[i] = y[j + 1] / y[0];
        }
        Ok(self.unrotate(&xr))
    }

    /// Chart coordinates of a source point whose chart coordinate is nonzero.
    pub fn to_chart(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.base.n();
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: x.len() });
        }
        let xr = self.rotate(x);
        let xk = xr[self.chart_index - 1];
        if xk == 0.0 {
            return Err(Error::OnHyperplaneAtInfinity);
        }
        let mut y = vec![1.0 / xk];
        y.extend(self.other_indices().map(|i| xr[i] / xk));
        Ok(y)
    }

    /// `F(y, t) = f(x(y)) - t` by direct composition.
    pub fn eval(&self, y: &[f64], t: &[f64]) -> Result<Vec<f64>> {
        let p = self.base.p();
        if t.len() != p {
            return Err(Error::DimensionMismatch { expected: p, found: t.len() });
        }
        let x = self.to_source(y)?;
        Ok(self.base.eval(&x)?.iter().zip(t).map(|(f, t)| f - t).collect())
    }

    /// Partials of `F` from the base partials at `x = x(y)`:
    /// `dF_j/dy_i = x_k df_j/dx'_i` for the non-chart coordinates,
    /// `dF_j/dy_0 = -x_k sum_l x'_l df_j/dx'_l`, and `dF/dt = -I`.
    pub fn chart_partials(&self, y: &[f64], t: &[f64]) -> Result<ChartPartials> {
        let p = self.base.p();
        if t.len() != p {
            return Err(Error::DimensionMismatch { expected: p, found: t.len() });
        }
        let x = self.to_source(y)?;
        let xr = self.rotate(&x);
        let jac = self.base.jacobian_eval(&x)?.matrix;
        Ok(ChartPartials { dfdy: self.partials_from(&xr, &jac), dfdt: Mat::identity(p).scaled(-1.0) })
    }

    /// `dF/dy` given rotated coordinates and the (unrotated) Jacobian.
    pub fn partials_from(&self, xr: &[f64], jac: &Mat) -> Mat {
        let n = self.base.n();
        let p = self.base.p();
        let xk = xr[self.chart_index - 1];
        // rotated gradients: G' = G Q^T
        let g = jac.matmul(&self.q.transpose());
        let mut out = Mat::zeros(p, n);
        for j in 0..p {
            let euler: f64 = (0..n).map(|l| xr[l] * g[(j, l)]).sum();
            out[(j, 0)] = -xk * euler;
            for (c, i) in self.other_indices().enumerate() {
                out[(j, c + 1)] = xk * g[(j, i)];
            }
        }
        out
    }
}

/// Exact check of whether a rational vector has unit length.
pub fn is_rational_unit(u: &[BigRational]) -> bool {
    u.iter().map(|v| v * v).fold(BigRational::zero(), |a, b| a + b).is_one()
}

/// Sign convention for directions: first nonzero coordinate positive.
pub fn canonical_sign(u: &mut [f64]) {
    if let Some(first) = u.iter().find(|v| **v != 0.0) {
        if first.is_negative() {
            u.iter_mut().for_each(|v| *v = -*v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polymap::int_map;

    fn broughton() -> PolyMap {
        int_map("b", 2, &[&[(1, &[1, 0]), (1, &[2, 1])]]).unwrap()
    }

    #[test]
    fn broughton_chart_partial_by_hand() {
        // F = y1/y0 + y1^2/y0^3, dF/dy1 = 1/y0 + 2 y1/y0^3 = 2 + 16 = 18 at (0.5, 1)
        let cm = ChartMap::new(broughton(), 2).unwrap();
        let p = cm.chart_partials(&[0.5, 1.0], &[0.3]).unwrap();
        assert!((p.dfdy[(0, 1)] - 18.0).abs() < 1e-12);
        // dF/dy0 = -y1/y0^2 - 3 y1^2/y0^4 = -4 - 48
        assert!((p.dfdy[(0, 0)] + 52.0).abs() < 1e-12);
        assert_eq!(p.dfdt.to_rows(), vec![vec![-1.0]]);
    }

    #[test]
    fn linear_euler_relation() {
        let f = int_map("lin", 3, &[&[(2, &[1, 0, 0]), (-1, &[0, 1, 0])], &[(1, &[0, 0, 1])]]).unwrap();
        let cm = ChartMap::new(f.clone(), 3).unwrap();
        let y = [0.25, 1.5, -2.0];
        let x = cm.to_source(&y).unwrap();
        let fx = f.eval(&x).unwrap();
        let p = cm.chart_partials(&y, &[0.0, 0.0]).unwrap();
        for j in 0..2 {
            assert!((p.dfdy[(j, 0)] + x[2] * fx[j]).abs() < 1e-12);
        }
        assert_eq!(p.dfdt.to_rows(), vec![vec![-1.0, 0.0], vec![0.0, -1.0]]);
    }

    #[test]
    fn y0_zero_rejected() {
        let cm = ChartMap::new(broughton(), 2).unwrap();
        assert_eq!(cm.chart_partials(&[0.0, 1.0], &[0.0]), Err(Error::OnHyperplaneAtInfinity));
    }

    #[test]
    fn householder_rotation_is_exact_and_aligns() {
        let u = [0.3, -0.5, 0.8124];
        let ru = rational_unit_vector(&u).unwrap();
        assert!(is_rational_unit(&ru));
        let h = householder_rational(&ru);
        let cm = ChartMap::with_rotation(int_map("e", 3, &[&[(1, &[2, 0, 0])]]).unwrap(), 3, h).unwrap();
        let nrm = linalg::norm(&u);
        let ur: Vec<f64> = u.iter().map(|v| v / nrm).collect();
        let rot = cm.rotate(&ur);
        assert!((rot[2] - 1.0).abs() < 1e-11 && rot[0].abs() < 1e-11 && rot[1].abs() < 1e-11);
        // round trip through the chart
        let x = [10.0, -3.0, 40.0];
        let back = cm.to_source(&cm.to_chart(&x).unwrap()).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12 * 40.0);
        }
    }

    #[test]
    fn south_pole_direction_is_handled() {
        let ru = rational_unit_vector(&[0.0, 0.0, -1.0]).unwrap();
        assert!(is_rational_unit(&ru));
        assert_eq!(rational_to_f64(&ru[2]), -1.0);
        let ru = rational_unit_vector(&[0.0, 1.0]).unwrap();
        assert!(householder_rational(&ru) == rational_identity(2));
    }
}
