//! Linear algebra of shear coordinates: length and cusp forms, the polytope
//! of complete finite-area structures, membership, interior sampling, and an
//! affine chart on the solution space of the equality constraints.

use crate::schema::{CurveSide, SchemaError, TriangulationSchema};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use thiserror::Error;

pub const EQUALITY_TOL: f64 = 1e-9;
pub const SAMPLE_MARGIN: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ShearError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("equality constraints are linearly dependent")]
    DependentConstraints,
    #[error("interior sampling failed after {0} attempts")]
    SamplingFailed(usize),
    #[error("bad shear vector: {0}")]
    BadVector(String),
}

/// A point of R^{|lambda|}, keyed by leaf id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShearVector {
    pub values: BTreeMap<u32, f64>,
}

impl ShearVector {
    pub fn zero(schema: &TriangulationSchema) -> Self {
        ShearVector {
            values: schema.leaves.iter().map(|l| (l.id, 0.0)).collect(),
        }
    }

    pub fn from_pairs(pairs: &[(u32, f64)]) -> Self {
        ShearVector {
            values: pairs.iter().copied().collect(),
        }
    }

    pub fn get(&self, leaf: u32) -> f64 {
        self.values.get(&leaf).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, leaf: u32, v: f64) {
        self.values.insert(leaf, v);
    }

    /// Check the key set matches the schema's leaves and entries are finite.
    pub fn check_keys(&self, schema: &TriangulationSchema) -> Result<(), ShearError> {
        for l in &schema.leaves {
            match self.values.get(&l.id) {
                None => return Err(ShearError::BadVector(format!("missing leaf {}", l.id))),
                Some(v) if !v.is_finite() => {
                    return Err(ShearError::BadVector(format!("leaf {} not finite", l.id)))
                }
                Some(_) => {}
            }
        }
        if self.values.len() != schema.leaves.len() {
            return Err(ShearError::BadVector("extra keys".into()));
        }
        Ok(())
    }

    /// Parse from a JSON object mapping leaf ids to numbers.
    pub fn from_json(s: &str) -> Result<Self, ShearError> {
        let raw: BTreeMap<String, f64> =
            serde_json::from_str(s).map_err(|e| ShearError::BadVector(e.to_string()))?;
        let mut values = BTreeMap::new();
        for (k, v) in raw {
            let id: u32 = k
                .parse()
                .map_err(|_| ShearError::BadVector(format!("key {k:?} is not a leaf id")))?;
            values.insert(id, v);
        }
        Ok(ShearVector { values })
    }

    pub fn to_json(&self) -> String {
        let raw: BTreeMap<String, f64> = self
            .values
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        serde_json::to_string(&raw).expect("serializable")
    }

    pub fn add_scaled(&self, other: &ShearVector, t: f64) -> ShearVector {
        let mut out = self.clone();
        for (k, v) in &other.values {
            *out.values.entry(*k).or_insert(0.0) += t * v;
        }
        out
    }
}

/// Integer-coefficient linear form on shear vectors, constant term zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearForm {
    pub coeffs: BTreeMap<u32, i64>,
}

impl LinearForm {
    pub fn eval(&self, x: &ShearVector) -> f64 {
        self.coeffs
            .iter()
            .map(|(leaf, c)| *c as f64 * x.get(*leaf))
            .sum()
    }

    pub fn coeff(&self, leaf: u32) -> i64 {
        self.coeffs.get(&leaf).copied().unwrap_or(0)
    }
}

/// sigma_gamma^side * sum_beta n_gamma^side(beta) x_beta.
pub fn length_form(
    schema: &TriangulationSchema,
    gamma: u32,
    side: CurveSide,
) -> Result<LinearForm, ShearError> {
    let (a, b) = schema.crossing_counts(gamma)?;
    let counts = match side {
        CurveSide::A => a,
        CurveSide::B => b,
    };
    let sigma = schema.spiral_side(gamma, side)?.sigma as i64;
    Ok(LinearForm {
        coeffs: counts
            .into_iter()
            .filter(|&(_, n)| n != 0)
            .map(|(leaf, n)| (leaf, sigma * n as i64))
            .collect(),
    })
}

/// sum_beta n_c(beta) x_beta, raw integer coefficients.
pub fn cusp_form(schema: &TriangulationSchema, c: usize) -> Result<LinearForm, ShearError> {
    let counts = schema.cusp_counts(c)?;
    Ok(LinearForm {
        coeffs: counts
            .into_iter()
            .filter(|&(_, n)| n != 0)
            .map(|(leaf, n)| (leaf, n as i64))
            .collect(),
    })
}

#[derive(Debug, Clone)]
pub struct ShearPolytope {
    /// Leaf ids in ambient coordinate order.
    pub leaf_order: Vec<u32>,
    /// Equalities: length-form differences per closed leaf, then cusp forms.
    pub equalities: Vec<(String, LinearForm)>,
    /// Strict inequalities: the a-side length form of each closed leaf.
    pub inequalities: Vec<(u32, LinearForm)>,
    /// Dimension of the affine hull: |lambda| - n_c - n_p.
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Membership {
    Inside { margin: f64 },
    Boundary,
    Outside { violations: Vec<String> },
}

impl Membership {
    pub fn is_inside(&self) -> bool {
        matches!(self, Membership::Inside { .. })
    }
}

pub fn polytope(schema: &TriangulationSchema) -> Result<ShearPolytope, ShearError> {
    let leaf_order: Vec<u32> = schema.leaves.iter().map(|l| l.id).collect();
    let mut equalities = Vec::new();
    let mut inequalities = Vec::new();
    for gamma in schema.closed_leaves() {
        let a = length_form(schema, gamma, CurveSide::A)?;
        let b = length_form(schema, gamma, CurveSide::B)?;
        let mut diff = a.coeffs.clone();
        for (leaf, c) in &b.coeffs {
            *diff.entry(*leaf).or_insert(0) -= c;
        }
        diff.retain(|_, c| *c != 0);
        equalities.push((
            format!("length_a - length_b of closed leaf {gamma}"),
            LinearForm { coeffs: diff },
        ));
        inequalities.push((gamma, a));
    }
    for c in 0..schema.cusps.len() {
        equalities.push((format!("cusp form {c}"), cusp_form(schema, c)?));
    }

    let m = equality_matrix(&leaf_order, &equalities);
    let rank = m.rank(1e-9);
    if rank != equalities.len() {
        return Err(ShearError::DependentConstraints);
    }
    Ok(ShearPolytope {
        dim: leaf_order.len() - equalities.len(),
        leaf_order,
        equalities,
        inequalities,
    })
}

fn equality_matrix(leaf_order: &[u32], equalities: &[(String, LinearForm)]) -> DMatrix<f64> {
    DMatrix::from_fn(equalities.len(), leaf_order.len(), |i, j| {
        equalities[i].1.coeff(leaf_order[j]) as f64
    })
}

pub fn membership(p: &ShearPolytope, x: &ShearVector) -> Membership {
    let mut violations = Vec::new();
    for (label, form) in &p.equalities {
        let v = form.eval(x);
        if v.abs() > EQUALITY_TOL {
            violations.push(format!("{label} = {v}, expected 0"));
        }
    }
    let mut margin = f64::INFINITY;
    for (gamma, form) in &p.inequalities {
        let v = form.eval(x);
        if v < -EQUALITY_TOL {
            violations.push(format!("length form of closed leaf {gamma} = {v} <= 0"));
        }
        margin = margin.min(v);
    }
    if !violations.is_empty() {
        return Membership::Outside { violations };
    }
    if margin <= EQUALITY_TOL {
        return Membership::Boundary;
    }
    Membership::Inside { margin }
}

/// Orthonormal basis of the kernel of the equality constraints, with the
/// origin as base point.
#[derive(Debug, Clone)]
pub struct AffineChart {
    pub leaf_order: Vec<u32>,
    /// Columns are the basis vectors.
    pub basis: DMatrix<f64>,
}

impl AffineChart {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn to_ambient(&self, coords: &[f64]) -> ShearVector {
        assert_eq!(coords.len(), self.dim());
        let mut values = BTreeMap::new();
        for (row, leaf) in self.leaf_order.iter().enumerate() {
            let mut v = 0.0;
            for (col, c) in coords.iter().enumerate() {
                v += self.basis[(row, col)] * c;
            }
            values.insert(*leaf, v);
        }
        ShearVector { values }
    }

    /// Orthogonal projection of a shear vector to chart coordinates.
    pub fn project(&self, x: &ShearVector) -> Vec<f64> {
        (0..self.dim())
            .map(|col| {
                self.leaf_order
                    .iter()
                    .enumerate()
                    .map(|(row, leaf)| self.basis[(row, col)] * x.get(*leaf))
                    .sum()
            })
            .collect()
    }
}

pub fn affine_chart(p: &ShearPolytope) -> AffineChart {
    let m = equality_matrix(&p.leaf_order, &p.equalities);
    let n = p.leaf_order.len();
    if p.equalities.is_empty() {
        return AffineChart {
            leaf_order: p.leaf_order.clone(),
            basis: DMatrix::identity(n, n),
        };
    }
    // Kernel of M as the null eigenspace of M^T M (symmetric, so the full
    // orthonormal eigenbasis is available).
    let gram = m.transpose() * &m;
    let eig = gram.symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    let cols: Vec<usize> = (0..n)
        .filter(|&j| eig.eigenvalues[j].abs() < 1e-10 * scale)
        .collect();
    let mut basis = DMatrix::zeros(n, cols.len());
    for (col, &j) in cols.iter().enumerate() {
        for i in 0..n {
            basis[(i, col)] = eig.eigenvectors[(i, j)];
        }
    }
    AffineChart {
        leaf_order: p.leaf_order.clone(),
        basis,
    }
}

/// Deterministic interior point: pseudo-random chart coordinates in
/// [-radius, radius], pushed along a direction increasing every closed-leaf
/// length form when the raw sample is too close to the boundary.
pub fn sample_interior(
    p: &ShearPolytope,
    seed: u64,
    radius: f64,
) -> Result<ShearVector, ShearError> {
    let chart = affine_chart(p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // A feasible direction: project the sum of inequality gradients into the
    // chart and back; usable when it increases every length form.
    let push = {
        let mut grad = ShearVector::default();
        for (_, form) in &p.inequalities {
            for (leaf, c) in &form.coeffs {
                *grad.values.entry(*leaf).or_insert(0.0) += *c as f64;
            }
        }
        let d = chart.to_ambient(&chart.project(&grad));
        if p.inequalities.iter().all(|(_, f)| f.eval(&d) > 1e-9) {
            Some(d)
        } else {
            None
        }
    };
    const ATTEMPTS: usize = 1000;
    for _ in 0..ATTEMPTS {
        let coords: Vec<f64> = (0..chart.dim())
            .map(|_| rng.gen_range(-radius..=radius))
            .collect();
        let mut x = chart.to_ambient(&coords);
        let short = p
            .inequalities
            .iter()
            .map(|(_, f)| SAMPLE_MARGIN - f.eval(&x))
            .fold(f64::NEG_INFINITY, f64::max);
        if short > 0.0 {
            match &push {
                Some(d) => {
                    let t = p
                        .inequalities
                        .iter()
                        .map(|(_, f)| (SAMPLE_MARGIN + 1e-6 - f.eval(&x)) / f.eval(d))
                        .fold(0.0, f64::max);
                    x = x.add_scaled(d, t);
                }
                None => continue,
            }
        }
        if let Membership::Inside { margin } = membership(p, &x) {
            if margin >= SAMPLE_MARGIN {
                return Ok(x);
            }
        }
    }
    Err(ShearError::SamplingFailed(ATTEMPTS))
}
