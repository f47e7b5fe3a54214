//! Concrete problem instances: a Nash–Cournot oligopoly, linear
//! complementarity problems, and an enumeration oracle for small LCPs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Lu};
use crate::ncp::{check_len, finite, NcpProblem};

/// Smallest total output at which the inverse demand is evaluated.
pub const MIN_TOTAL_OUTPUT: f64 = 1e-9;

/// Negative outputs down to this value are treated as zero.
pub const NEGATIVE_CLAMP: f64 = -1e-12;

/// Largest LCP size accepted by [`lcp_bruteforce`].
pub const BRUTEFORCE_MAX_DIM: usize = 10;

/// Equilibrium outputs quoted in the literature for the five-firm example.
/// They solve a variant with different exponents for firms 4 and 5, not the
/// map implemented by [`Oligopoly`].
pub const LITERATURE_OLIGOPOLY_Z: [f64; 5] = [15.42931, 12.49858, 9.663473, 7.165094, 5.132566];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OligopolyParams {
    /// Linear cost coefficient per firm.
    pub c: Vec<f64>,
    /// Capacity parameter per firm.
    #[serde(rename = "L")]
    pub l: Vec<f64>,
    pub beta: Vec<f64>,
    pub demand_scale: f64,
    pub demand_elasticity: f64,
}

impl OligopolyParams {
    /// The five-firm instance with `c = (10, 8, 6, 4, 2)`, `L = 5`,
    /// `β = (1.2, 1.1, 1, 0.8, 0.6)` and demand `5000 P^{−1.1}`.
    pub fn five_firm() -> Self {
        Self {
            c: vec![10.0, 8.0, 6.0, 4.0, 2.0],
            l: vec![5.0; 5],
            beta: vec![1.2, 1.1, 1.0, 0.8, 0.6],
            demand_scale: 5000.0,
            demand_elasticity: 1.1,
        }
    }

    pub fn firms(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.c.len();
        if n == 0 {
            return Err(Error::InvalidParameter("need at least one firm".into()));
        }
        if self.l.len() != n || self.beta.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "c has {n} entries, L has {}, beta has {}",
                self.l.len(),
                self.beta.len()
            )));
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !(self.c.iter().chain(&self.l).chain(&self.beta).all(|v| positive(*v))
            && positive(self.demand_scale)
            && positive(self.demand_elasticity))
        {
            return Err(Error::InvalidParameter("oligopoly parameters must be positive".into()));
        }
        Ok(())
    }
}

/// `fᵢ(z) = cᵢ + Lᵢ^{−1/βᵢ} zᵢ^{1/βᵢ} − P(Q) − zᵢ P′(Q)`, `Q = Σ zⱼ`,
/// with inverse demand `P(Q) = S^{1/γ} Q^{−1/γ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Oligopoly {
    params: OligopolyParams,
}

struct Price {
    p: f64,
    d1: f64,
    d2: f64,
    d3: f64,
}

impl Oligopoly {
    pub fn new(params: OligopolyParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &OligopolyParams {
        &self.params
    }

    /// Marginal production cost `cᵢ + Lᵢ^{−1/βᵢ} q^{1/βᵢ}` of firm `i`.
    pub fn marginal_cost(&self, i: usize, q: f64) -> f64 {
        let pr = &self.params;
        pr.c[i] + pr.l[i].powf(-1.0 / pr.beta[i]) * q.powf(1.0 / pr.beta[i])
    }

    fn clamped(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len(z, self.params.firms())?;
        z.iter()
            .map(|&v| {
                if v >= 0.0 {
                    Ok(v)
                } else if v >= NEGATIVE_CLAMP {
                    Ok(0.0)
                } else if v.is_nan() {
                    Err(Error::NonFiniteEvaluation)
                } else {
                    Err(Error::Domain(format!("negative output {v}")))
                }
            })
            .collect()
    }

    fn price(&self, q: f64) -> Result<Price> {
        if !(q >= MIN_TOTAL_OUTPUT) {
            return Err(Error::Domain(format!("total output {q} is below {MIN_TOTAL_OUTPUT}")));
        }
        let g = 1.0 / self.params.demand_elasticity;
        let p = self.params.demand_scale.powf(g) * q.powf(-g);
        Ok(Price {
            p,
            d1: -g * p / q,
            d2: g * (g + 1.0) * p / (q * q),
            d3: -g * (g + 1.0) * (g + 2.0) * p / (q * q * q),
        })
    }

    /// `(g′ᵢ, g″ᵢ)` for the cost term `gᵢ(q) = Lᵢ^{−1/βᵢ} q^{1/βᵢ}`.
    fn cost_derivatives(&self, i: usize, q: f64) -> (f64, f64) {
        let pr = &self.params;
        let e = 1.0 / pr.beta[i];
        let k = pr.l[i].powf(-e);
        (k * e * q.powf(e - 1.0), k * e * (e - 1.0) * q.powf(e - 2.0))
    }
}

impl NcpProblem for Oligopoly {
    fn dim(&self) -> usize {
        self.params.firms()
    }

    fn eval(&self, z: &[f64]) -> Result<Vec<f64>> {
        let z = self.clamped(z)?;
        let pr = self.price(z.iter().sum())?;
        finite(
            (0..z.len())
                .map(|i| self.marginal_cost(i, z[i]) - pr.p - z[i] * pr.d1)
                .collect(),
        )
    }

    fn jacobian(&self, z: &[f64]) -> Result<DenseMatrix> {
        let z = self.clamped(z)?;
        let n = z.len();
        let pr = self.price(z.iter().sum())?;
        let mut j = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for k in 0..n {
                j[(i, k)] = -pr.d1 - z[i] * pr.d2;
            }
            j[(i, i)] += self.cost_derivatives(i, z[i]).0 - pr.d1;
        }
        if !j.all_finite() {
            return Err(Error::NonFiniteEvaluation);
        }
        Ok(j)
    }

    fn jacobian_transpose_derivative(&self, z: &[f64], u: &[f64]) -> Option<Result<DenseMatrix>> {
        Some((|| {
            let z = self.clamped(z)?;
            let n = z.len();
            check_len(u, n)?;
            let pr = self.price(z.iter().sum())?;
            let su: f64 = u.iter().sum();
            let zu: f64 = z.iter().zip(u).map(|(a, b)| a * b).sum();
            let mut c = DenseMatrix::zeros(n, n);
            for j in 0..n {
                for k in 0..n {
                    c[(j, k)] = -u[j] * pr.d2 - pr.d2 * su - pr.d3 * zu - pr.d2 * u[k];
                }
                c[(j, j)] += u[j] * self.cost_derivatives(j, z[j]).1;
            }
            if !c.all_finite() {
                return Err(Error::NonFiniteEvaluation);
            }
            Ok(c)
        })())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcpData {
    #[serde(rename = "M")]
    pub m: Vec<Vec<f64>>,
    pub q: Vec<f64>,
}

impl LcpData {
    pub fn new(m: Vec<Vec<f64>>, q: Vec<f64>) -> Result<Self> {
        let d = Self { m, q };
        d.matrix()?;
        Ok(d)
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn matrix(&self) -> Result<DenseMatrix> {
        let n = self.q.len();
        if self.m.len() != n || self.m.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(format!("M must be {n}x{n} to match q")));
        }
        if self.q.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEvaluation);
        }
        DenseMatrix::from_rows(&self.m)
    }
}

/// `f(z) = M z + q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lcp {
    m: DenseMatrix,
    q: Vec<f64>,
}

impl Lcp {
    pub fn new(d: &LcpData) -> Result<Self> {
        Ok(Self {
            m: d.matrix()?,
            q: d.q.clone(),
        })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.m
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }
}

impl NcpProblem for Lcp {
    fn dim(&self) -> usize {
        self.q.len()
    }

    fn eval(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len(z, self.q.len())?;
        finite(self.m.mul_vec(z).into_iter().zip(&self.q).map(|(a, b)| a + b).collect())
    }

    fn jacobian(&self, z: &[f64]) -> Result<DenseMatrix> {
        check_len(z, self.q.len())?;
        Ok(self.m.clone())
    }

    fn jacobian_transpose_derivative(&self, z: &[f64], _u: &[f64]) -> Option<Result<DenseMatrix>> {
        let n = self.q.len();
        Some(check_len(z, n).map(|_| DenseMatrix::zeros(n, n)))
    }
}

/// All sign-feasible complementary basic solutions of an LCP, found by
/// enumerating the `2ⁿ` index sets. Duplicates (within `1e-12`) are merged.
pub fn lcp_bruteforce(d: &LcpData) -> Result<Vec<Vec<f64>>> {
    let m = d.matrix()?;
    let n = d.dim();
    if n > BRUTEFORCE_MAX_DIM {
        return Err(Error::DimensionTooLarge {
            dim: n,
            limit: BRUTEFORCE_MAX_DIM,
        });
    }
    let tol = 1e-12;
    let mut out: Vec<Vec<f64>> = Vec::new();
    for mask in 0u32..(1 << n) {
        let active: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let mut z = vec![0.0; n];
        if !active.is_empty() {
            let sub = m.principal_submatrix(&active);
            let rhs: Vec<f64> = active.iter().map(|&i| -d.q[i]).collect();
            let Ok(sol) = Lu::factor(&sub).and_then(|lu| lu.solve(&rhs)) else {
                continue;
            };
            for (&i, v) in active.iter().zip(sol) {
                z[i] = v;
            }
        }
        let w: Vec<f64> = m.mul_vec(&z).iter().zip(&d.q).map(|(a, b)| a + b).collect();
        let scale = 1.0 + z.iter().chain(&w).fold(0.0f64, |a, b| a.max(b.abs()));
        if z.iter().chain(&w).all(|v| *v >= -tol * scale) {
            let dup = out
                .iter()
                .any(|s| s.iter().zip(&z).all(|(a, b)| (a - b).abs() <= tol * scale));
            if !dup {
                out.push(z);
            }
        }
    }
    Ok(out)
}

/// Problem definition file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProblemSpec {
    Lcp(LcpData),
    Oligopoly(OligopolyParams),
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Box<dyn NcpProblem + Send + Sync>> {
        Ok(match self {
            Self::Lcp(d) => Box::new(Lcp::new(d)?),
            Self::Oligopoly(p) => Box::new(Oligopoly::new(p.clone())?),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Lcp(d) => d.dim(),
            Self::Oligopoly(p) => p.firms(),
        }
    }
}
