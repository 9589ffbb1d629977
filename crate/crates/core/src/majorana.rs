//! Majorana correlation matrices, their entanglement spectra and Fourier blocks.
//!
//! Conventions: Γ_jl = (i/2) Tr(ρ [c_j, c_l]). A cell-periodic matrix with
//! `cell` modes per unit cell has momentum blocks
//! Γ_k = Σ_r e^{-ikr} G(r), where G(r)[α, β] = Γ_{(x+r, α), (x, β)},
//! on the grid k_j = 2πj/L. The inverse is G(r) = (1/L) Σ_k e^{ikr} Γ_k.
//! With this convention products and transposes of block-circulant matrices
//! map to products and adjoints of their blocks.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use ndarray::{s, ArrayView2};
use num_complex::Complex64 as c64;

use crate::error::{Error, Result};
use crate::linalg::{
    anti_hermiticity_defect, antisymmetry_defect, canonical_pairing, eigh_c, max_abs,
    max_abs_c, spectral_norm, spectral_norm_c, CMat, Mat, I,
};

pub const ANTISYMMETRY_TOL: f64 = 1e-12;
pub const PHYSICALITY_TOL: f64 = 1e-10;
pub const PURITY_TOL: f64 = 1e-8;
pub const TRANSLATION_TOL: f64 = 1e-10;
pub const REALITY_TOL: f64 = 1e-10;
/// |λ| at or above `1 - CLAMP` maps to an infinite entanglement energy.
pub const CLAMP: f64 = 1e-12;

/// Real antisymmetric two-point matrix of a Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    data: Mat,
}

impl CorrelationMatrix {
    /// Validates antisymmetry (1e-12) and physicality (singular values ≤ 1 + 1e-10).
    /// The stored matrix is exactly antisymmetric.
    pub fn new(data: Mat) -> Result<Self> {
        let (r, c) = data.dim();
        if r != c {
            return Err(Error::Shape(format!("correlation matrix is {r}×{c}")));
        }
        if r % 2 != 0 {
            return Err(Error::Shape(format!("odd Majorana count {r}")));
        }
        let defect = antisymmetry_defect(&data.view());
        if defect > ANTISYMMETRY_TOL {
            return Err(Error::NotAntisymmetric { defect });
        }
        let data = (&data - &data.t()) * 0.5;
        let excess = spectral_norm(&data.view()) - 1.0;
        if excess > PHYSICALITY_TOL {
            return Err(Error::Unphysical { excess });
        }
        Ok(Self { data })
    }

    /// Antisymmetrises first, for outputs of arithmetic that only drift by rounding.
    pub(crate) fn from_numeric(data: Mat) -> Result<Self> {
        let defect = antisymmetry_defect(&data.view());
        if defect > 1e-9 {
            return Err(Error::NotAntisymmetric { defect });
        }
        Self::new((&data - &data.t()) * 0.5)
    }

    pub fn zeros(n_modes: usize) -> Self {
        Self { data: Mat::zeros((n_modes, n_modes)) }
    }

    /// Product of pure pairs (c_{2j}, c_{2j+1}) with Γ_{2j,2j+1} = sign.
    pub fn paired(n_pairs: usize, sign: f64) -> Self {
        let mut data = Mat::zeros((2 * n_pairs, 2 * n_pairs));
        for j in 0..n_pairs {
            data[[2 * j, 2 * j + 1]] = sign;
            data[[2 * j + 1, 2 * j]] = -sign;
        }
        Self { data }
    }

    pub fn n_modes(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &Mat {
        &self.data
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_inner(self) -> Mat {
        self.data
    }

    /// ‖ΓΓᵀ - I‖ in spectral norm.
    pub fn purity_residual(&self) -> f64 {
        let n = self.n_modes();
        spectral_norm(&(self.data.dot(&self.data.t()) - Mat::eye(n)).view())
    }

    pub fn is_pure(&self) -> bool {
        self.purity_residual() <= PURITY_TOL
    }

    /// Sub-block on the given Majorana indices.
    pub fn restrict(&self, idx: &[usize]) -> Result<Self> {
        let n = idx.len();
        let mut out = Mat::zeros((n, n));
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out[[a, b]] = self.data[[i, j]];
            }
        }
        Self::new(out)
    }
}

/// Per-momentum blocks Γ_k on a uniform grid k_j = 2πj/L.
#[derive(Debug, Clone)]
pub struct MomentumCorrelation {
    k_grid: Vec<f64>,
    blocks: Vec<CMat>,
}

pub fn uniform_grid(l: usize) -> Vec<f64> {
    (0..l).map(|j| 2.0 * PI * j as f64 / l as f64).collect()
}

/// Index of -k_j on the uniform grid.
pub fn mirror_index(j: usize, l: usize) -> usize {
    (l - j) % l
}

impl MomentumCorrelation {
    pub fn new(blocks: Vec<CMat>) -> Result<Self> {
        let l = blocks.len();
        if l == 0 {
            return Err(Error::Shape("empty momentum grid".into()));
        }
        let dim = blocks[0].nrows();
        for b in &blocks {
            if b.dim() != (dim, dim) {
                return Err(Error::Shape("momentum blocks differ in shape".into()));
            }
            let defect = anti_hermiticity_defect(b);
            if defect > ANTISYMMETRY_TOL {
                return Err(Error::NotAntiHermitian { defect });
            }
            let excess = spectral_norm_c(&b.view()) - 1.0;
            if excess > PHYSICALITY_TOL {
                return Err(Error::Unphysical { excess });
            }
        }
        for j in 0..l {
            let m = mirror_index(j, l);
            let defect = max_abs_c(&(&blocks[j].mapv(|z| z.conj()) - &blocks[m]).view());
            if defect > REALITY_TOL {
                return Err(Error::Reality { k_index: j, defect });
            }
        }
        Ok(Self { k_grid: uniform_grid(l), blocks })
    }

    pub fn k_grid(&self) -> &[f64] {
        &self.k_grid
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn cell_modes(&self) -> usize {
        self.blocks[0].nrows()
    }
}

/// Single-particle entanglement data: λ sorted descending and ε = log((1+λ)/(1-λ)).
#[derive(Debug, Clone, PartialEq)]
pub struct EntanglementSpectrum {
    pub lambdas: Vec<f64>,
    pub energies: Vec<f64>,
    pub k: Option<f64>,
}

impl EntanglementSpectrum {
    pub fn from_lambdas(mut lambdas: Vec<f64>, k: Option<f64>) -> Self {
        lambdas.sort_by(|a, b| b.total_cmp(a));
        let energies = lambdas.iter().map(|&l| entanglement_energy(l)).collect();
        Self { lambdas, energies, k }
    }
}

/// ε(λ) = log((1+λ)/(1-λ)) with ±∞ sentinels within `CLAMP` of ±1.
pub fn entanglement_energy(lambda: f64) -> f64 {
    if lambda >= 1.0 - CLAMP {
        f64::INFINITY
    } else if lambda <= -1.0 + CLAMP {
        f64::NEG_INFINITY
    } else {
        2.0 * lambda.atanh()
    }
}

/// The n non-negative pairing amplitudes of a 2n-mode correlation matrix.
pub fn entanglement_spectrum(gamma: &CorrelationMatrix) -> Result<EntanglementSpectrum> {
    let (_, lambdas) = canonical_pairing(gamma.matrix())?;
    let lambdas = lambdas.into_iter().map(|l| l.clamp(0.0, 1.0)).collect();
    Ok(EntanglementSpectrum::from_lambdas(lambdas, None))
}

/// Signed λ of a momentum block: the eigenvalues of -iΓ_k, descending.
pub fn momentum_lambdas(block: &CMat) -> Result<(Vec<f64>, CMat)> {
    let h = block.mapv(|z| -z * I);
    let (vals, vecs) = eigh_c(&h)?;
    let n = vals.len();
    let lambdas = (0..n).rev().map(|j| vals[j].clamp(-1.0, 1.0)).collect();
    let mut ordered = CMat::zeros(vecs.dim());
    for (dst, src) in (0..n).rev().enumerate() {
        ordered.column_mut(dst).assign(&vecs.column(src));
    }
    Ok((lambdas, ordered))
}

#[derive(Debug, PartialEq)]
struct Node {
    cost: f64,
    last: usize,
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on cost, ties broken by index for determinism.
        other.cost.total_cmp(&self.cost).then_with(|| other.last.cmp(&self.last))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Largest `top_m` eigenvalues of the Gaussian density matrix with the given
/// single-particle spectrum, descending. Signed λ are allowed; only |λ| matters.
///
/// Each mode contributes (1 ± |λ|)/2. Eigenvalues are enumerated best-first
/// as subset sums of the log-ratios log((1+|λ|)/(1-|λ|)).
pub fn many_body_spectrum(spec: &EntanglementSpectrum, top_m: usize) -> Vec<f64> {
    let n = spec.lambdas.len();
    let total = if n >= 63 { usize::MAX } else { 1usize << n };
    let m = top_m.max(1).min(total);
    let mut base = 1.0;
    let mut costs: Vec<f64> = Vec::with_capacity(n);
    for &l in &spec.lambdas {
        let a = l.abs().min(1.0);
        let hi = (1.0 + a) / 2.0;
        let lo = (1.0 - a) / 2.0;
        base *= hi;
        costs.push(if lo <= 0.0 { f64::INFINITY } else { (hi / lo).ln() });
    }
    costs.sort_by(|a, b| a.total_cmp(b));
    let mut out = Vec::with_capacity(m);
    out.push(base);
    let mut heap = BinaryHeap::new();
    if n > 0 {
        heap.push(Node { cost: costs[0], last: 0 });
    }
    while out.len() < m {
        let Some(node) = heap.pop() else { break };
        if node.cost.is_infinite() {
            break;
        }
        out.push(base * (-node.cost).exp());
        if node.last + 1 < n {
            let next = costs[node.last + 1];
            heap.push(Node { cost: node.cost + next, last: node.last + 1 });
            heap.push(Node { cost: node.cost - costs[node.last] + next, last: node.last + 1 });
        }
    }
    out.resize(m, 0.0);
    out
}

/// Momentum blocks of a cell-periodic correlation matrix.
pub fn fourier_blocks(gamma: &CorrelationMatrix, cell_modes: usize) -> Result<MomentumCorrelation> {
    let g = real_space_blocks(gamma.matrix(), cell_modes)?;
    let blocks = blocks_to_momentum(&g);
    MomentumCorrelation::new(blocks)
}

/// Real-space displacement blocks G(r), r = 0..L, after checking block-circulance.
pub fn real_space_blocks(m: &Mat, cell: usize) -> Result<Vec<Mat>> {
    let n = m.nrows();
    if cell == 0 || n % cell != 0 {
        return Err(Error::Shape(format!("{n} modes not divisible into cells of {cell}")));
    }
    let l = n / cell;
    let block = |x: usize, y: usize| m.slice(s![x * cell..(x + 1) * cell, y * cell..(y + 1) * cell]);
    let g: Vec<Mat> = (0..l).map(|r| block(r, 0).to_owned()).collect();
    for x in 0..l {
        for y in 0..l {
            let r = (x + l - y) % l;
            let defect = max_abs(&(&block(x, y) - &g[r]).view());
            if defect > TRANSLATION_TOL {
                return Err(Error::TranslationBroken { distance: r.min(l - r), defect });
            }
        }
    }
    Ok(g)
}

/// Γ_k = Σ_r e^{-ikr} G(r) on the uniform grid.
pub fn blocks_to_momentum(g: &[Mat]) -> Vec<CMat> {
    let l = g.len();
    let cell = g[0].nrows();
    (0..l)
        .map(|j| {
            let k = 2.0 * PI * j as f64 / l as f64;
            let mut out = CMat::zeros((cell, cell));
            for (r, gr) in g.iter().enumerate() {
                let ph = c64::from_polar(1.0, -k * r as f64);
                out.zip_mut_with(gr, |o, &x| *o += ph * x);
            }
            out
        })
        .collect()
}

/// G(r) = (1/L) Σ_k e^{ikr} Γ_k, keeping the complex result.
pub fn momentum_to_blocks(blocks: &[CMat]) -> Vec<CMat> {
    let l = blocks.len();
    let cell = blocks[0].nrows();
    (0..l)
        .map(|r| {
            let mut out = CMat::zeros((cell, cell));
            for (j, b) in blocks.iter().enumerate() {
                let k = 2.0 * PI * j as f64 / l as f64;
                let ph = c64::from_polar(1.0 / l as f64, k * r as f64);
                out.zip_mut_with(b, |o, &x| *o += ph * x);
            }
            out
        })
        .collect()
}

/// Assembles the block-circulant matrix with displacement blocks G(r).
pub fn circulant(g: &[Mat]) -> Mat {
    let l = g.len();
    let cell = g[0].nrows();
    let mut m = Mat::zeros((l * cell, l * cell));
    for x in 0..l {
        for y in 0..l {
            let r = (x + l - y) % l;
            m.slice_mut(s![x * cell..(x + 1) * cell, y * cell..(y + 1) * cell]).assign(&g[r]);
        }
    }
    m
}

/// Inverse of [`fourier_blocks`].
pub fn from_fourier_blocks(mc: &MomentumCorrelation) -> Result<CorrelationMatrix> {
    let g = momentum_to_blocks(mc.blocks());
    let mut real = Vec::with_capacity(g.len());
    for (r, b) in g.iter().enumerate() {
        let imag = b.iter().fold(0.0f64, |acc, z| acc.max(z.im.abs()));
        if imag > REALITY_TOL {
            return Err(Error::Reality { k_index: r, defect: imag });
        }
        real.push(b.mapv(|z| z.re));
    }
    CorrelationMatrix::from_numeric(circulant(&real))
}
