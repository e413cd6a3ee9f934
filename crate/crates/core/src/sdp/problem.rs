//! Affine symmetric matrix constraints in scalar decision variables.
//!
//! A symmetric matrix variable `X` of order `n` is flattened into its
//! `n(n+1)/2` upper-triangle entries (row-major), so `X_ij = X_ji = x_k`.
//! Each constraint reads `M(x) = M₀ + Σ terms ≺ 0`, where a term is either a
//! scalar variable times a fixed symmetric matrix or a structured product
//! `L X Rᵀ + R X Lᵀ` in one matrix variable. The structured form lets the
//! solver assemble its normal equations without expanding every coefficient.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Handle to a declared variable block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Scalar,
    Symmetric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    /// Matrix order (1 for scalars).
    pub dim: usize,
    /// First flat scalar index.
    pub offset: usize,
}

impl Variable {
    pub fn len(&self) -> usize {
        match self.kind {
            VarKind::Scalar => 1,
            VarKind::Symmetric => self.dim * (self.dim + 1) / 2,
        }
    }
}

/// Position of `(i, j)` in the flattened upper triangle of an `n × n` symmetric matrix.
pub fn sym_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

/// Inverse of [`sym_index`]: `(i, j)` with `i <= j` for every flat position.
pub fn sym_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            out.push((i, j));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    /// `x_index · coeff`, `coeff` symmetric.
    Scalar { index: usize, coeff: DMatrix<f64> },
    /// `L X Rᵀ + R X Lᵀ` for the symmetric variable `var`; `L`, `R` are `d × n`.
    Product {
        var: VarId,
        left: DMatrix<f64>,
        right: DMatrix<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub constant: DMatrix<f64>,
    pub terms: Vec<Term>,
}

impl Constraint {
    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }
}

/// Incremental builder for one block constraint of order `dim`.
#[derive(Debug, Clone)]
pub struct ConstraintBuilder {
    name: String,
    dim: usize,
    constant: DMatrix<f64>,
    scalar: BTreeMap<usize, DMatrix<f64>>,
    products: Vec<(VarId, DMatrix<f64>, DMatrix<f64>)>,
}

impl ConstraintBuilder {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        Self {
            name: name.into(),
            dim,
            constant: DMatrix::zeros(dim, dim),
            scalar: BTreeMap::new(),
            products: Vec::new(),
        }
    }

    fn place(target: &mut DMatrix<f64>, row: usize, col: usize, block: &DMatrix<f64>, scale: f64) {
        let (r, c) = block.shape();
        if row == col {
            assert_eq!(r, c, "diagonal blocks must be square");
            for i in 0..r {
                for j in 0..c {
                    target[(row + i, col + j)] += 0.5 * scale * (block[(i, j)] + block[(j, i)]);
                }
            }
        } else {
            for i in 0..r {
                for j in 0..c {
                    target[(row + i, col + j)] += scale * block[(i, j)];
                    target[(col + j, row + i)] += scale * block[(i, j)];
                }
            }
        }
    }

    /// Adds `block` at `(row, col)` and its transpose at `(col, row)`.
    /// Diagonal placements contribute the symmetric part of `block`.
    pub fn constant(&mut self, row: usize, col: usize, block: &DMatrix<f64>) -> &mut Self {
        Self::place(&mut self.constant, row, col, block, 1.0);
        self
    }

    pub fn constant_scalar(&mut self, row: usize, col: usize, value: f64) -> &mut Self {
        self.constant(row, col, &DMatrix::from_element(1, 1, value))
    }

    /// `x_index · block` placed symmetrically, as in [`Self::constant`].
    pub fn scalar(&mut self, index: usize, row: usize, col: usize, block: &DMatrix<f64>) -> &mut Self {
        let dim = self.dim;
        let entry = self
            .scalar
            .entry(index)
            .or_insert_with(|| DMatrix::zeros(dim, dim));
        Self::place(entry, row, col, block, 1.0);
        self
    }

    /// General product term `L X Rᵀ + R X Lᵀ` (`L`, `R` of size `dim × n`).
    /// Terms sharing the same `var` and `left` are merged.
    pub fn product(&mut self, var: VarId, left: DMatrix<f64>, right: DMatrix<f64>) -> &mut Self {
        assert_eq!(left.nrows(), self.dim);
        assert_eq!(left.shape(), right.shape());
        if let Some(entry) = self
            .products
            .iter_mut()
            .find(|(v, l, _)| *v == var && *l == left)
        {
            entry.2 += right;
        } else {
            self.products.push((var, left, right));
        }
        self
    }

    /// `X · block` placed at `(row, col)` with `X` occupying rows `row..row+n`,
    /// plus its transpose. On the diagonal this yields `X B + Bᵀ X`.
    pub fn var_times(&mut self, var: VarId, n: usize, row: usize, col: usize, block: &DMatrix<f64>) -> &mut Self {
        assert_eq!(block.nrows(), n);
        let mut left = DMatrix::zeros(self.dim, n);
        for i in 0..n {
            left[(row + i, i)] = 1.0;
        }
        let mut right = DMatrix::zeros(self.dim, n);
        for j in 0..block.ncols() {
            for i in 0..n {
                right[(col + j, i)] = block[(i, j)];
            }
        }
        self.product(var, left, right)
    }

    /// `scale · G X Gᵀ` with `G` of size `dim × n`.
    pub fn congruence(&mut self, var: VarId, g: &DMatrix<f64>, scale: f64) -> &mut Self {
        self.product(var, g.clone(), g * (0.5 * scale))
    }

    pub fn build(self) -> Constraint {
        let mut terms: Vec<Term> = self
            .scalar
            .into_iter()
            .map(|(index, coeff)| Term::Scalar { index, coeff })
            .collect();
        terms.extend(
            self.products
                .into_iter()
                .map(|(var, left, right)| Term::Product { var, left, right }),
        );
        Constraint {
            name: self.name,
            constant: self.constant,
            terms,
        }
    }
}

/// A system of strict LMIs `M_i(x) ≺ 0` plus positivity of selected variable blocks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LmiProblem {
    variables: Vec<Variable>,
    num_vars: usize,
    pub constraints: Vec<Constraint>,
    /// Variable blocks required to be positive definite.
    pub positivity: Vec<VarId>,
}

impl LmiProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn find(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name).map(VarId)
    }

    fn push(&mut self, name: &str, kind: VarKind, dim: usize) -> VarId {
        let v = Variable {
            name: name.to_string(),
            kind,
            dim,
            offset: self.num_vars,
        };
        self.num_vars += v.len();
        self.variables.push(v);
        VarId(self.variables.len() - 1)
    }

    pub fn add_scalar(&mut self, name: &str) -> VarId {
        self.push(name, VarKind::Scalar, 1)
    }

    pub fn add_symmetric(&mut self, name: &str, dim: usize) -> VarId {
        self.push(name, VarKind::Symmetric, dim)
    }

    /// Flat index of a scalar variable.
    pub fn index(&self, id: VarId) -> usize {
        self.variables[id.0].offset
    }

    pub fn add_constraint(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    pub fn require_positive(&mut self, id: VarId) {
        if !self.positivity.contains(&id) {
            self.positivity.push(id);
        }
    }

    /// Largest `‖M₀‖_∞` over the constraints (0 when there are none).
    pub fn constant_norm(&self) -> f64 {
        self.constraints
            .iter()
            .map(|c| {
                c.constant
                    .row_iter()
                    .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Structural checks: symmetry, dimensions and variable indices.
    pub fn validate(&self) -> Result<()> {
        for c in &self.constraints {
            let d = c.dim();
            if d == 0 || c.constant.ncols() != d {
                return Err(invalid(format!("constraint '{}' must be square and nonempty", c.name)));
            }
            check_symmetric(&c.constant, &c.name)?;
            for t in &c.terms {
                match t {
                    Term::Scalar { index, coeff } => {
                        if *index >= self.num_vars {
                            return Err(invalid(format!(
                                "constraint '{}' references variable {} of {}",
                                c.name, index, self.num_vars
                            )));
                        }
                        if coeff.shape() != (d, d) {
                            return Err(Error::Dimension(format!("coefficient shape in '{}'", c.name)));
                        }
                        check_symmetric(coeff, &c.name)?;
                    }
                    Term::Product { var, left, right } => {
                        let v = self
                            .variables
                            .get(var.0)
                            .ok_or_else(|| invalid(format!("unknown variable block in '{}'", c.name)))?;
                        if v.kind != VarKind::Symmetric
                            || left.shape() != (d, v.dim)
                            || right.shape() != (d, v.dim)
                        {
                            return Err(Error::Dimension(format!(
                                "product term on '{}' in '{}'",
                                v.name, c.name
                            )));
                        }
                    }
                }
            }
        }
        for id in &self.positivity {
            if id.0 >= self.variables.len() {
                return Err(invalid("positivity references an unknown variable"));
            }
        }
        Ok(())
    }

    /// Symmetric matrix value of a variable block at `point`.
    pub fn value(&self, id: VarId, point: &[f64]) -> DMatrix<f64> {
        let v = &self.variables[id.0];
        match v.kind {
            VarKind::Scalar => DMatrix::from_element(1, 1, point[v.offset]),
            VarKind::Symmetric => unflatten(v.dim, &point[v.offset..v.offset + v.len()]),
        }
    }

    /// `M_i(x)` for every constraint.
    pub fn evaluate(&self, point: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        if point.len() != self.num_vars {
            return Err(Error::Dimension(format!(
                "point has {} entries, problem has {} variables",
                point.len(),
                self.num_vars
            )));
        }
        Ok(self
            .constraints
            .iter()
            .map(|c| {
                let mut m = c.constant.clone();
                for t in &c.terms {
                    match t {
                        Term::Scalar { index, coeff } => m += coeff * point[*index],
                        Term::Product { var, left, right } => {
                            let x = self.value(*var, point);
                            let lxr = left * x * right.transpose();
                            m += &lxr + lxr.transpose();
                        }
                    }
                }
                m
            })
            .collect())
    }

    /// Dense coefficient matrix of flat variable `index` in constraint `ci`.
    pub fn coefficient(&self, ci: usize, index: usize) -> DMatrix<f64> {
        let c = &self.constraints[ci];
        let d = c.dim();
        let mut out = DMatrix::zeros(d, d);
        for t in &c.terms {
            match t {
                Term::Scalar { index: k, coeff } if *k == index => out += coeff,
                Term::Product { var, left, right } => {
                    let v = &self.variables[var.0];
                    if index >= v.offset && index < v.offset + v.len() {
                        let (i, j) = sym_pairs(v.dim)[index - v.offset];
                        let mut e = DMatrix::zeros(v.dim, v.dim);
                        e[(i, j)] = 1.0;
                        e[(j, i)] = 1.0;
                        let lxr = left * e * right.transpose();
                        out += &lxr + lxr.transpose();
                    }
                }
                _ => {}
            }
        }
        out
    }

    /// Serialises the problem with every coefficient expanded to a dense row-major matrix.
    pub fn to_json(&self) -> Result<String> {
        let file = ProblemFile {
            format: FORMAT_TAG.to_string(),
            num_vars: self.num_vars,
            variables: self
                .variables
                .iter()
                .map(|v| VariableFile {
                    name: v.name.clone(),
                    kind: v.kind,
                    dim: v.dim,
                })
                .collect(),
            positivity: self
                .positivity
                .iter()
                .map(|id| self.variables[id.0].name.clone())
                .collect(),
            constraints: self
                .constraints
                .iter()
                .enumerate()
                .map(|(ci, c)| {
                    let mut coefficients = BTreeMap::new();
                    for k in 0..self.num_vars {
                        let m = self.coefficient(ci, k);
                        if m.iter().any(|v| *v != 0.0) {
                            coefficients.insert(k, row_major(&m));
                        }
                    }
                    ConstraintFile {
                        name: c.name.clone(),
                        dim: c.dim(),
                        constant: row_major(&c.constant),
                        coefficients,
                    }
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Loads a problem written by [`Self::to_json`] (or by hand in the same schema).
    /// All coefficients become dense scalar terms.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ProblemFile = serde_json::from_str(text)?;
        if file.format != FORMAT_TAG {
            return Err(invalid(format!("unsupported problem format '{}'", file.format)));
        }
        let mut p = LmiProblem::new();
        for v in &file.variables {
            match v.kind {
                VarKind::Scalar => p.add_scalar(&v.name),
                VarKind::Symmetric => p.add_symmetric(&v.name, v.dim),
            };
        }
        if p.num_vars != file.num_vars {
            return Err(invalid(format!(
                "declared num_vars {} disagrees with variable list ({})",
                file.num_vars, p.num_vars
            )));
        }
        for name in &file.positivity {
            let id = p
                .find(name)
                .ok_or_else(|| invalid(format!("positivity names unknown variable '{name}'")))?;
            p.require_positive(id);
        }
        for c in file.constraints {
            let d = c.dim;
            let constant = from_row_major(d, &c.constant, &c.name)?;
            let mut terms = Vec::new();
            for (index, data) in c.coefficients {
                terms.push(Term::Scalar {
                    index,
                    coeff: from_row_major(d, &data, &c.name)?,
                });
            }
            p.constraints.push(Constraint {
                name: c.name,
                constant,
                terms,
            });
        }
        p.validate()?;
        Ok(p)
    }
}

pub(crate) fn unflatten(n: usize, values: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for (k, (i, j)) in sym_pairs(n).into_iter().enumerate() {
        m[(i, j)] = values[k];
        m[(j, i)] = values[k];
    }
    m
}

/// Upper-triangle flattening of a symmetric matrix (inverse of the variable layout).
pub fn flatten(m: &DMatrix<f64>) -> Vec<f64> {
    sym_pairs(m.nrows())
        .into_iter()
        .map(|(i, j)| 0.5 * (m[(i, j)] + m[(j, i)]))
        .collect()
}

fn check_symmetric(m: &DMatrix<f64>, name: &str) -> Result<()> {
    let scale = 1.0 + m.abs().max();
    for i in 0..m.nrows() {
        for j in i + 1..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(invalid(format!("matrix in '{name}' is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().iter().copied().collect()
}

fn from_row_major(d: usize, data: &[f64], name: &str) -> Result<DMatrix<f64>> {
    if data.len() != d * d {
        return Err(Error::Dimension(format!(
            "constraint '{name}': expected {} entries, found {}",
            d * d,
            data.len()
        )));
    }
    Ok(DMatrix::from_row_slice(d, d, data))
}

const FORMAT_TAG: &str = "heatlmi-lmi/1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    format: String,
    num_vars: usize,
    variables: Vec<VariableFile>,
    #[serde(default)]
    positivity: Vec<String>,
    constraints: Vec<ConstraintFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableFile {
    name: String,
    kind: VarKind,
    #[serde(default = "one")]
    dim: usize,
}

fn one() -> usize {
    1
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintFile {
    name: String,
    dim: usize,
    constant: Vec<f64>,
    #[serde(default)]
    coefficients: BTreeMap<usize, Vec<f64>>,
}
