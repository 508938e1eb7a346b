//! Dense D-way tensors and the multilinear algebra built on them.
//!
//! Values are stored in a flat buffer with the **first index varying fastest**,
//! so voxel `(i_1, ..., i_D)` lives at `i_1 + p_1 * (i_2 + p_2 * (i_3 + ...))`.
//! With this layout, vectorizing a rank-1 tensor `b_1 ∘ ... ∘ b_D` gives the
//! Kronecker product `b_D ⊗ ... ⊗ b_1` literally.

use crate::error::{structural, Error, Result};

/// Dimensions `(p_1, ..., p_D)` of a tensor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TensorShape {
    dims: Vec<usize>,
    len: usize,
}

impl TensorShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(structural("tensor shape needs at least one mode"));
        }
        if dims.iter().any(|&p| p == 0) {
            return Err(structural(format!("zero-length mode in shape {dims:?}")));
        }
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &p| acc.checked_mul(p))
            .ok_or_else(|| structural(format!("voxel count of {dims:?} overflows")))?;
        Ok(Self { dims, len })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of modes D.
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Total voxel count.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Sum of the mode lengths (the per-component margin parameter count).
    pub fn margin_total(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Stride of mode `j` in the flat layout.
    pub fn stride(&self, j: usize) -> usize {
        self.dims[..j].iter().product()
    }

    pub fn flat_index(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.dims.len() {
            return Err(structural(format!(
                "index of order {} for tensor of order {}",
                index.len(),
                self.dims.len()
            )));
        }
        let mut flat = 0;
        let mut stride = 1;
        for (&i, &p) in index.iter().zip(&self.dims) {
            if i >= p {
                return Err(structural(format!("index {index:?} out of range for {:?}", self.dims)));
            }
            flat += i * stride;
            stride *= p;
        }
        Ok(flat)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        self.dims
            .iter()
            .map(|&p| {
                let i = flat % p;
                flat /= p;
                i
            })
            .collect()
    }

    /// For every voxel, its coordinate along mode `j`.
    pub fn mode_coordinates(&self, j: usize) -> Vec<usize> {
        let stride = self.stride(j);
        let p = self.dims[j];
        (0..self.len).map(|v| (v / stride) % p).collect()
    }
}

/// Iterates multi-indices in storage order.
struct Odometer<'a> {
    dims: &'a [usize],
    index: Vec<usize>,
    done: bool,
}

impl<'a> Odometer<'a> {
    fn new(dims: &'a [usize]) -> Self {
        Self { dims, index: vec![0; dims.len()], done: false }
    }

    fn advance(&mut self) {
        for (i, &p) in self.index.iter_mut().zip(self.dims) {
            *i += 1;
            if *i < p {
                return;
            }
            *i = 0;
        }
        self.done = true;
    }
}

/// A dense tensor of finite 64-bit values.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: TensorShape,
    values: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: TensorShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(structural(format!(
                "{} values for shape {:?} with {} voxels",
                values.len(),
                shape.dims(),
                shape.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite tensor entry at flat index {pos}")));
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: TensorShape) -> Self {
        let values = vec![0.0; shape.len()];
        Self { shape, values }
    }

    /// Builds a tensor from a function of the multi-index.
    pub fn from_fn(shape: TensorShape, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(shape.len());
        let mut odo = Odometer::new(shape.dims());
        while !odo.done {
            values.push(f(&odo.index));
            odo.advance();
        }
        Self::new(shape, values)
    }

    pub fn shape(&self) -> &TensorShape {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.values[self.shape.flat_index(index)?])
    }

    /// vec(X): the flat buffer in first-index-fastest order.
    pub fn vectorize(&self) -> Vec<f64> {
        self.values.clone()
    }

    /// ⟨X, B⟩ = vec(X)'vec(B).
    pub fn inner_product(&self, other: &DenseTensor) -> Result<f64> {
        check_same_shape(&self.shape, &other.shape)?;
        Ok(dot(&self.values, &other.values))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, c: f64) -> Result<DenseTensor> {
        DenseTensor::new(self.shape.clone(), self.values.iter().map(|v| v * c).collect())
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        check_same_shape(&self.shape, &other.shape)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        DenseTensor::new(self.shape.clone(), values)
    }

    /// Reorders modes: output mode `k` is input mode `perm[k]`.
    pub fn permute_modes(&self, perm: &[usize]) -> Result<DenseTensor> {
        let d = self.shape.order();
        let mut seen = vec![false; d];
        if perm.len() != d || perm.iter().any(|&m| m >= d || std::mem::replace(&mut seen[m], true)) {
            return Err(structural(format!("{perm:?} is not a permutation of {d} modes")));
        }
        let dims = perm.iter().map(|&m| self.shape.dims()[m]).collect();
        let out_shape = TensorShape::new(dims)?;
        let mut src = vec![0; d];
        DenseTensor::from_fn(out_shape, |idx| {
            for (k, &m) in perm.iter().enumerate() {
                src[m] = idx[k];
            }
            self.values[self.shape.flat_index(&src).expect("permuted index in range")]
        })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_same_shape(a: &TensorShape, b: &TensorShape) -> Result<()> {
    if a != b {
        return Err(structural(format!("shape mismatch: {:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

/// Rank-R parafac margins `β_j^{(r)}` for `r = 1..R`, `j = 1..D`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParafacFactors {
    shape: TensorShape,
    rank: usize,
    // indexed [r * D + j]
    margins: Vec<Vec<f64>>,
}

impl ParafacFactors {
    /// `margins[r][j]` is the mode-`j` margin of component `r`.
    pub fn new(shape: TensorShape, margins: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let rank = margins.len();
        if rank == 0 {
            return Err(structural("parafac rank must be positive"));
        }
        let d = shape.order();
        let mut flat = Vec::with_capacity(rank * d);
        for (r, comp) in margins.into_iter().enumerate() {
            if comp.len() != d {
                return Err(structural(format!("component {r} has {} margins, expected {d}", comp.len())));
            }
            for (j, m) in comp.into_iter().enumerate() {
                if m.len() != shape.dims()[j] {
                    return Err(structural(format!(
                        "margin (j={j}, r={r}) has length {}, expected {}",
                        m.len(),
                        shape.dims()[j]
                    )));
                }
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Domain(format!("non-finite entry in margin (j={j}, r={r})")));
                }
                flat.push(m);
            }
        }
        Ok(Self { shape, rank, margins: flat })
    }

    pub fn zeros(shape: TensorShape, rank: usize) -> Result<Self> {
        let margins = (0..rank)
            .map(|_| shape.dims().iter().map(|&p| vec![0.0; p]).collect())
            .collect();
        Self::new(shape, margins)
    }

    pub fn shape(&self) -> &TensorShape {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn margin(&self, j: usize, r: usize) -> &[f64] {
        &self.margins[r * self.shape.order() + j]
    }

    pub fn margin_mut(&mut self, j: usize, r: usize) -> &mut [f64] {
        let d = self.shape.order();
        &mut self.margins[r * d + j]
    }

    fn check_indices(&self, j: usize, r: usize) -> Result<()> {
        if j >= self.shape.order() || r >= self.rank {
            return Err(structural(format!(
                "margin index (j={j}, r={r}) out of range for D={}, R={}",
                self.shape.order(),
                self.rank
            )));
        }
        Ok(())
    }

    /// The rank-1 term `B_r = β_1^{(r)} ∘ ... ∘ β_D^{(r)}`, flat.
    pub fn component_values(&self, r: usize) -> Vec<f64> {
        let d = self.shape.order();
        let mut out = vec![1.0];
        // kron expands the first mode fastest
        for j in 0..d {
            let m = self.margin(j, r);
            let mut next = Vec::with_capacity(out.len() * m.len());
            for &b in m {
                next.extend(out.iter().map(|&a| a * b));
            }
            out = next;
        }
        out
    }

    pub fn component(&self, r: usize) -> Result<DenseTensor> {
        self.check_indices(0, r)?;
        DenseTensor::new(self.shape.clone(), self.component_values(r))
    }

    /// B = Σ_r β_1^{(r)} ∘ ... ∘ β_D^{(r)}.
    pub fn assemble(&self) -> DenseTensor {
        let mut values = vec![0.0; self.shape.len()];
        for r in 0..self.rank {
            for (acc, v) in values.iter_mut().zip(self.component_values(r)) {
                *acc += v;
            }
        }
        DenseTensor { shape: self.shape.clone(), values }
    }

    /// Returns a copy with components reordered: output `k` is input `order[k]`.
    pub fn permute_components(&self, order: &[usize]) -> Result<ParafacFactors> {
        let d = self.shape.order();
        let mut seen = vec![false; self.rank];
        if order.len() != self.rank || order.iter().any(|&r| r >= self.rank || std::mem::replace(&mut seen[r], true)) {
            return Err(structural(format!("{order:?} is not a permutation of {} components", self.rank)));
        }
        let margins = order
            .iter()
            .map(|&r| (0..d).map(|j| self.margin(j, r).to_vec()).collect())
            .collect();
        ParafacFactors::new(self.shape.clone(), margins)
    }

    /// Reorders tensor modes consistently with [`DenseTensor::permute_modes`].
    pub fn permute_modes(&self, perm: &[usize]) -> Result<ParafacFactors> {
        let dims = perm.iter().map(|&m| self.shape.dims()[m]).collect();
        let shape = TensorShape::new(dims)?;
        let margins = (0..self.rank)
            .map(|r| perm.iter().map(|&m| self.margin(m, r).to_vec()).collect())
            .collect();
        ParafacFactors::new(shape, margins)
    }
}

pub fn assemble_parafac(factors: &ParafacFactors) -> DenseTensor {
    factors.assemble()
}

/// Tucker model: mode factors `β_j^{(r_j)}` weighted by a core tensor Λ.
#[derive(Debug, Clone, PartialEq)]
pub struct TuckerModel {
    shape: TensorShape,
    // factors[j][r_j]
    factors: Vec<Vec<Vec<f64>>>,
    core: DenseTensor,
}

impl TuckerModel {
    pub fn new(shape: TensorShape, factors: Vec<Vec<Vec<f64>>>, core: DenseTensor) -> Result<Self> {
        if factors.len() != shape.order() || core.shape().order() != shape.order() {
            return Err(structural("Tucker factor/core order does not match the tensor order"));
        }
        for (j, fj) in factors.iter().enumerate() {
            if fj.len() != core.shape().dims()[j] {
                return Err(structural(format!(
                    "mode {j} has {} factors but core rank {}",
                    fj.len(),
                    core.shape().dims()[j]
                )));
            }
            if let Some(bad) = fj.iter().position(|v| v.len() != shape.dims()[j]) {
                return Err(structural(format!("factor {bad} of mode {j} has wrong length")));
            }
        }
        Ok(Self { shape, factors, core })
    }

    /// Tucker form of a parafac model: superdiagonal core.
    pub fn from_parafac(f: &ParafacFactors) -> Result<Self> {
        let d = f.shape().order();
        let rank = f.rank();
        let core_shape = TensorShape::new(vec![rank; d])?;
        let core = DenseTensor::from_fn(core_shape, |idx| {
            if idx.iter().all(|&i| i == idx[0]) {
                1.0
            } else {
                0.0
            }
        })?;
        let factors = (0..d)
            .map(|j| (0..rank).map(|r| f.margin(j, r).to_vec()).collect())
            .collect();
        Self::new(f.shape().clone(), factors, core)
    }

    pub fn shape(&self) -> &TensorShape {
        &self.shape
    }

    pub fn ranks(&self) -> &[usize] {
        self.core.shape().dims()
    }

    /// B = Σ_{r_1..r_D} λ_{r_1..r_D} β_1^{(r_1)} ∘ ... ∘ β_D^{(r_D)}.
    pub fn assemble(&self) -> DenseTensor {
        let mut values = vec![0.0; self.shape.len()];
        let core_dims = self.core.shape().dims().to_vec();
        let mut odo = Odometer::new(&core_dims);
        let mut flat = 0;
        while !odo.done {
            let lambda = self.core.values()[flat];
            if lambda != 0.0 {
                let mut term = vec![lambda];
                for (j, &rj) in odo.index.iter().enumerate() {
                    let m = &self.factors[j][rj];
                    let mut next = Vec::with_capacity(term.len() * m.len());
                    for &b in m {
                        next.extend(term.iter().map(|&a| a * b));
                    }
                    term = next;
                }
                for (acc, v) in values.iter_mut().zip(term) {
                    *acc += v;
                }
            }
            flat += 1;
            odo.advance();
        }
        DenseTensor { shape: self.shape.clone(), values }
    }
}

pub fn assemble_tucker(model: &TuckerModel) -> DenseTensor {
    model.assemble()
}

/// Weights `Π_{l≠j} β_{l,i_l}^{(r)}` for every voxel (mode `j` left free).
pub fn contraction_weights(factors: &ParafacFactors, j: usize, r: usize) -> Vec<f64> {
    let d = factors.shape().order();
    let mut out = vec![1.0];
    for l in 0..d {
        let ones;
        let m: &[f64] = if l == j {
            ones = vec![1.0; factors.shape().dims()[l]];
            &ones
        } else {
            factors.margin(l, r)
        };
        let mut next = Vec::with_capacity(out.len() * m.len());
        for &b in m {
            next.extend(out.iter().map(|&a| a * b));
        }
        out = next;
    }
    out
}

/// `H_j^{(r)}`: element k is Σ over voxels with i_j = k of x · Π_{l≠j} β_{l,i_l}^{(r)}.
///
/// Satisfies `⟨x, B_r⟩ = β_j^{(r)} · H_j^{(r)}` for every mode `j`.
pub fn margin_contraction(x: &DenseTensor, factors: &ParafacFactors, j: usize, r: usize) -> Result<Vec<f64>> {
    check_same_shape(x.shape(), factors.shape())?;
    factors.check_indices(j, r)?;
    let weights = contraction_weights(factors, j, r);
    let coords = x.shape().mode_coordinates(j);
    let mut h = vec![0.0; x.shape().dims()[j]];
    contract_into(x.values(), &weights, &coords, &mut h);
    Ok(h)
}

/// Single pass accumulation used by the sampler on raw sample rows.
#[inline]
pub(crate) fn contract_into(x: &[f64], weights: &[f64], coords: &[usize], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for ((&xv, &w), &k) in x.iter().zip(weights).zip(coords) {
        out[k] += xv * w;
    }
}

/// Canonical margins for reporting: `β_{j,1}^{(r)} = 1` for `j < D` and components
/// ordered by strictly decreasing `β_{D,1}^{(r)}`. Scale is pushed into the last mode.
pub fn canonicalize_report(factors: &ParafacFactors) -> Result<ParafacFactors> {
    let d = factors.shape().order();
    let rank = factors.rank();
    let mut comps: Vec<Vec<Vec<f64>>> = Vec::with_capacity(rank);
    for r in 0..rank {
        let mut comp: Vec<Vec<f64>> = (0..d).map(|j| factors.margin(j, r).to_vec()).collect();
        let mut carry = 1.0;
        for (j, m) in comp.iter_mut().enumerate().take(d - 1) {
            let lead = m[0];
            if lead == 0.0 {
                return Err(Error::CanonicalizationUnavailable(format!(
                    "leading element of margin (j={j}, r={r}) is zero"
                )));
            }
            m.iter_mut().for_each(|v| *v /= lead);
            carry *= lead;
        }
        comp[d - 1].iter_mut().for_each(|v| *v *= carry);
        comps.push(comp);
    }
    comps.sort_by(|a, b| b[d - 1][0].total_cmp(&a[d - 1][0]));
    for w in comps.windows(2) {
        let (x, y) = (w[0][d - 1][0], w[1][d - 1][0]);
        if (x - y).abs() <= 1e-12 * x.abs().max(y.abs()) {
            return Err(Error::CanonicalizationUnavailable(format!(
                "tied last-mode leading elements {x} and {y}"
            )));
        }
    }
    ParafacFactors::new(factors.shape().clone(), comps)
}
