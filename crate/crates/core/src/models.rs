//! Concrete states: the p+ip superconductor on a cylinder and the Kitaev-chain
//! fixed point.
//!
//! Complex fermions relate to Majoranas by a_j = (c_{2j} + i c_{2j+1})/2. A
//! quadratic Hamiltonian is stored as the real antisymmetric K of
//! H = (i/4) Σ K_jk c_j c_k; its ground state is Γ = i sgn(iK).

use std::collections::BTreeMap;

use ndarray::s;
use num_complex::Complex64 as c64;
use rayon::prelude::*;

use crate::branches::{continuity, track, zero_crossings, ContinuityReport, Crossing, Frame, Tracked};
use crate::channel::GaussianChannel;
use crate::error::{Error, Result};
use crate::isotns::{contract_mps, IsoTensor, Leg, LegKind};
use crate::linalg::{dagger, eigh_c, eigh_r, max_abs, max_abs_c, CMat, Mat, I};
use crate::majorana::{
    entanglement_energy, fourier_blocks, from_fourier_blocks, mirror_index, momentum_lambdas, uniform_grid,
    CorrelationMatrix, EntanglementSpectrum, MomentumCorrelation,
};
use crate::oracle::{gaussian_pure_state, reduced_density};

/// Bogoliubov energies below this count as zero modes.
pub const ZERO_MODE_TOL: f64 = 1e-10;
pub const MAX_PARITY_CHAIN: usize = 8;

/// Majorana form of H = Σ h_ij a_i† a_j + Σ (g_ij a_i a_j + h.c.).
pub fn bdg_to_majorana(h: &CMat, g: &CMat) -> Result<Mat> {
    let n = h.nrows();
    if h.dim() != (n, n) || g.dim() != (n, n) {
        return Err(Error::Shape("h and g must be square and equal in size".into()));
    }
    let herm = max_abs_c(&(h - &dagger(h)).view());
    if herm > 1e-12 {
        return Err(Error::Shape(format!("hopping matrix is not Hermitian (defect {herm:.3e})")));
    }
    // H = Σ M_jk c_j c_k first, then K = -2i (M - Mᵀ).
    let mut m = CMat::zeros((2 * n, 2 * n));
    let q = c64::new(0.25, 0.0);
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (2 * i, 2 * j);
            let hv = h[[i, j]] * q;
            m[[a, b]] += hv;
            m[[a, b + 1]] += I * hv;
            m[[a + 1, b]] -= I * hv;
            m[[a + 1, b + 1]] += hv;
            let gv = g[[i, j]] * q;
            m[[a, b]] += gv;
            m[[a, b + 1]] += I * gv;
            m[[a + 1, b]] += I * gv;
            m[[a + 1, b + 1]] -= gv;
            // (a_i a_j)† = a_j† a_i†
            let gc = gv.conj();
            m[[b, a]] += gc;
            m[[b, a + 1]] -= I * gc;
            m[[b + 1, a]] -= I * gc;
            m[[b + 1, a + 1]] -= gc;
        }
    }
    let k = (&m - &m.t()).mapv(|z| z * c64::new(0.0, -2.0));
    let imag = k.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if imag > 1e-12 {
        return Err(Error::Shape(format!("Majorana Hamiltonian is not real (defect {imag:.3e})")));
    }
    Ok(k.mapv(|z| z.re))
}

/// Translation-invariant Majorana hopping model on a square lattice with
/// `orbitals` Majoranas per site. terms[(dx, dy)][α, β] = K_{(r+d, α), (r, β)}.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeModel {
    orbitals: usize,
    terms: BTreeMap<(i32, i32), Mat>,
}

impl LatticeModel {
    pub fn new(orbitals: usize) -> Result<Self> {
        if orbitals == 0 || orbitals % 2 != 0 {
            return Err(Error::Shape("a site must carry an even, positive number of Majoranas".into()));
        }
        Ok(Self { orbitals, terms: BTreeMap::new() })
    }

    /// Adds T at d and -Tᵀ at -d, keeping K antisymmetric.
    pub fn add_bond(&mut self, d: (i32, i32), t: &Mat) -> Result<()> {
        let m = self.orbitals;
        if t.dim() != (m, m) {
            return Err(Error::Shape(format!("bond matrix must be {m}×{m}")));
        }
        let zero = || Mat::zeros((m, m));
        *self.terms.entry(d).or_insert_with(zero) += t;
        *self.terms.entry((-d.0, -d.1)).or_insert_with(zero) -= &t.t();
        Ok(())
    }

    pub fn orbitals(&self) -> usize {
        self.orbitals
    }

    pub fn terms(&self) -> &BTreeMap<(i32, i32), Mat> {
        &self.terms
    }

    /// K(q) = Σ_d e^{-i q·d} T(d).
    pub fn bloch(&self, qx: f64, qy: f64) -> CMat {
        let m = self.orbitals;
        let mut k = CMat::zeros((m, m));
        for (&(dx, dy), t) in &self.terms {
            let ph = c64::from_polar(1.0, -(qx * dx as f64 + qy * dy as f64));
            k.zip_mut_with(t, |z, &v| *z += ph * v);
        }
        k
    }

    /// K(q_x) on a strip of `ly` rows, open in y. Index (y, α) ↦ y·orbitals + α.
    pub fn cylinder(&self, qx: f64, ly: usize) -> CMat {
        let m = self.orbitals;
        let mut k = CMat::zeros((ly * m, ly * m));
        for (&(dx, dy), t) in &self.terms {
            let ph = c64::from_polar(1.0, -qx * dx as f64);
            for y in 0..ly as i64 {
                let y2 = y + dy as i64;
                if !(0..ly as i64).contains(&y2) {
                    continue;
                }
                let (r, c) = (y2 as usize * m, y as usize * m);
                let mut blk = k.slice_mut(s![r..r + m, c..c + m]);
                blk.zip_mut_with(t, |z, &v| *z += ph * v);
            }
        }
        k
    }
}

/// Ground state of one Bloch block.
#[derive(Debug, Clone)]
pub struct BlockGroundState {
    pub gamma: CMat,
    pub min_energy: f64,
    pub zero_modes: usize,
}

/// Γ = i sgn(iK). Zero modes are filled by a fixed pairing: a real one when
/// `real` is set (self-conjugate momenta), otherwise half +1, half -1.
pub fn block_ground_state(k: &CMat, real: bool) -> Result<BlockGroundState> {
    let h = k.mapv(|z| I * z);
    let (vals, vecs) = eigh_c(&h)?;
    let n = vals.len();
    let min_energy = vals.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min);
    let zero: Vec<usize> = (0..n).filter(|&j| vals[j].abs() <= ZERO_MODE_TOL).collect();
    let mut sgn = CMat::zeros((n, n));
    for j in 0..n {
        if vals[j].abs() <= ZERO_MODE_TOL {
            continue;
        }
        let v = vecs.column(j);
        let s = vals[j].signum();
        for a in 0..n {
            for b in 0..n {
                sgn[[a, b]] += v[a] * v[b].conj() * s;
            }
        }
    }
    let mut gamma = sgn.mapv(|z| I * z);
    if !zero.is_empty() {
        let kernel = vecs.select(ndarray::Axis(1), &zero);
        if real {
            // The kernel of a real antisymmetric K is closed under conjugation,
            // so its projector is real and has a real orthonormal eigenbasis.
            let p0 = kernel.dot(&dagger(&kernel)).mapv(|z| z.re);
            let (pv, pvec) = eigh_r(&p0)?;
            let basis: Vec<usize> = (0..n).filter(|&j| pv[j] > 0.5).collect();
            for pair in basis.chunks(2) {
                if let [a, b] = pair {
                    let (ea, eb) = (pvec.column(*a), pvec.column(*b));
                    for r in 0..n {
                        for c in 0..n {
                            gamma[[r, c]] += c64::new(ea[r] * eb[c] - eb[r] * ea[c], 0.0);
                        }
                    }
                }
            }
        } else {
            let half = zero.len() / 2;
            for (i, &j) in zero.iter().enumerate() {
                let v = vecs.column(j);
                let s = if i < half { -1.0 } else { 1.0 };
                for a in 0..n {
                    for b in 0..n {
                        gamma[[a, b]] += I * v[a] * v[b].conj() * s;
                    }
                }
            }
        }
    }
    Ok(BlockGroundState { gamma, min_energy, zero_modes: zero.len() })
}

/// Ground state of a lattice model on an Lx × Ly cylinder (periodic in x).
#[derive(Debug, Clone)]
pub struct CylinderGroundState {
    pub lx: usize,
    pub ly: usize,
    pub orbitals: usize,
    pub momentum: MomentumCorrelation,
    /// Smallest Bogoliubov energy per q_x.
    pub min_energy: Vec<f64>,
    /// (q index, number of zero-energy Majorana modes) where filling was a choice.
    pub zero_modes: Vec<(usize, usize)>,
}

impl CylinderGroundState {
    pub fn unique(&self) -> bool {
        self.zero_modes.is_empty()
    }

    /// Real-space Γ, cell x holding Majoranas (y, α) at x·(Ly·orbitals) + y·orbitals + α.
    pub fn correlation(&self) -> Result<CorrelationMatrix> {
        from_fourier_blocks(&self.momentum)
    }
}

pub fn cylinder_ground_state(model: &LatticeModel, lx: usize, ly: usize) -> Result<CylinderGroundState> {
    if lx < 2 || ly < 1 {
        return Err(Error::Shape(format!("cylinder {lx}×{ly} too small")));
    }
    let grid = uniform_grid(lx);
    // Solve q ≤ π and fill -q by conjugation so reality holds exactly.
    let half: Vec<usize> = (0..=lx / 2).collect();
    let solved: Vec<BlockGroundState> = half
        .par_iter()
        .map(|&j| block_ground_state(&model.cylinder(grid[j], ly), mirror_index(j, lx) == j))
        .collect::<Result<_>>()?;
    let mut blocks = vec![CMat::zeros((0, 0)); lx];
    let mut min_energy = vec![0.0; lx];
    let mut zero_modes = Vec::new();
    for (&j, bg) in half.iter().zip(&solved) {
        let m = mirror_index(j, lx);
        blocks[j] = bg.gamma.clone();
        blocks[m] = bg.gamma.mapv(|z| z.conj());
        min_energy[j] = bg.min_energy;
        min_energy[m] = bg.min_energy;
        if bg.zero_modes > 0 {
            zero_modes.push((j, bg.zero_modes));
            if m != j {
                zero_modes.push((m, bg.zero_modes));
            }
        }
    }
    zero_modes.sort_unstable();
    Ok(CylinderGroundState {
        lx,
        ly,
        orbitals: model.orbitals,
        momentum: MomentumCorrelation::new(blocks)?,
        min_energy,
        zero_modes,
    })
}

/// Parameters of the p+ip Hamiltonian
/// H = Σ_r (-t a_r† a_{r+x̂} - t a_r† a_{r+ŷ} - Δx a_r a_{r+x̂} - Δy a_r a_{r+ŷ}) + h.c. + μ Σ_r a_r† a_r.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipLattice {
    pub lx: usize,
    pub ly: usize,
    pub hopping: f64,
    pub pairing_x: c64,
    pub pairing_y: c64,
    pub mu: f64,
}

impl PipLattice {
    /// t = 1, Δ = (1, i), μ = 2.
    pub fn new(lx: usize, ly: usize) -> Result<Self> {
        Self { lx, ly, hopping: 1.0, pairing_x: c64::new(1.0, 0.0), pairing_y: I, mu: 2.0 }.validated()
    }

    pub fn with_mu(self, mu: f64) -> Result<Self> {
        Self { mu, ..self }.validated()
    }

    fn validated(self) -> Result<Self> {
        if self.lx < 4 || self.ly < 4 {
            return Err(Error::Shape(format!("p+ip lattice {}×{} below 4×4", self.lx, self.ly)));
        }
        Ok(self)
    }

    /// Majorana bond matrices, read off from the Majorana form on a 3×3 torus.
    pub fn model(&self) -> Result<LatticeModel> {
        let w = 3usize;
        let site = |x: usize, y: usize| (x % w) * w + (y % w);
        let n = w * w;
        let mut h = CMat::zeros((n, n));
        let mut g = CMat::zeros((n, n));
        let t = c64::new(self.hopping, 0.0);
        for x in 0..w {
            for y in 0..w {
                let r = site(x, y);
                for (nb, delta) in [(site(x + 1, y), self.pairing_x), (site(x, y + 1), self.pairing_y)] {
                    h[[r, nb]] -= t;
                    h[[nb, r]] -= t;
                    g[[r, nb]] -= delta;
                }
                h[[r, r]] += c64::new(self.mu, 0.0);
            }
        }
        let k = bdg_to_majorana(&h, &g)?;
        let mut model = LatticeModel::new(2)?;
        let origin = site(0, 0);
        // Each bond enters through add_bond together with its reverse, so only
        // d = (0,0) and one representative of every ±d pair are read.
        for d in [(0i32, 0i32), (1, 0), (0, 1), (1, 1), (1, -1)] {
            let target = site(d.0.rem_euclid(3) as usize, d.1.rem_euclid(3) as usize);
            let blk = k.slice(s![2 * target..2 * target + 2, 2 * origin..2 * origin + 2]).to_owned();
            if max_abs(&blk.view()) == 0.0 {
                continue;
            }
            let blk = if d == (0, 0) { blk * 0.5 } else { blk };
            model.add_bond(d, &blk)?;
        }
        Ok(model)
    }
}

pub fn pip_ground_state(lat: &PipLattice) -> Result<CylinderGroundState> {
    cylinder_ground_state(&lat.model()?, lat.lx, lat.ly)
}

/// max |τ_x C* τ_x - (I - C)| for the BdG correlation C = ⟨Ψ Ψ†⟩,
/// Ψ = (a_1…a_N, a_1†…a_N†).
pub fn particle_hole_residual(gamma: &CorrelationMatrix) -> f64 {
    let n2 = gamma.n_modes();
    let n = n2 / 2;
    let mut w = CMat::zeros((n2, n2));
    for j in 0..n {
        w[[j, 2 * j]] = c64::new(0.5, 0.0);
        w[[j, 2 * j + 1]] = c64::new(0.0, 0.5);
        w[[n + j, 2 * j]] = c64::new(0.5, 0.0);
        w[[n + j, 2 * j + 1]] = c64::new(0.0, -0.5);
    }
    // ⟨c_l c_k⟩ = δ_lk - iΓ_lk
    let cc = gamma.matrix().mapv(|v| c64::new(0.0, -v)) + CMat::eye(n2);
    let c = w.dot(&cc).dot(&dagger(&w));
    let mut swapped = CMat::zeros((n2, n2));
    for a in 0..n2 {
        for b in 0..n2 {
            swapped[[a, b]] = c[[(a + n) % n2, (b + n) % n2]].conj();
        }
    }
    max_abs_c(&(swapped - (CMat::eye(n2) - &c)).view())
}

/// Entanglement spectrum of the rows y < y_cut per q_x sector.
#[derive(Debug, Clone)]
pub struct CutSpectrum {
    pub y_cut: usize,
    pub k_grid: Vec<f64>,
    pub spectra: Vec<EntanglementSpectrum>,
    pub tracked: Tracked,
    pub continuity: ContinuityReport,
    pub crossings: Vec<Crossing>,
}

/// |ε| below this counts as zero for crossing detection.
pub const CROSSING_ZERO_TOL: f64 = 1e-9;

impl CutSpectrum {
    /// max over k of |sort ε(k) - sort(-ε(-k))|. Where |λ| > 1 - 1e-6 the
    /// comparison is made on λ instead: ε amplifies rounding by 2/(1-λ²), so
    /// at ε ≈ 28 it carries errors near 1e-4 regardless of the state.
    pub fn antisymmetry_residual(&self) -> f64 {
        let l = self.spectra.len();
        let mut worst: f64 = 0.0;
        for j in 0..l {
            let a = &self.spectra[j].lambdas;
            let mut b: Vec<f64> = self.spectra[mirror_index(j, l)].lambdas.iter().map(|x| -x).collect();
            b.sort_by(|x, y| y.total_cmp(x));
            for (&x, &y) in a.iter().zip(&b) {
                let d = if x.abs().max(y.abs()) > 1.0 - 1e-6 {
                    (x - y).abs()
                } else {
                    (entanglement_energy(x) - entanglement_energy(y)).abs()
                };
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Crossings grouped under ε(k) ↔ -ε(-k): a crossing at k pairs with one
    /// at -k of the same direction, and one at a self-conjugate k stands alone.
    pub fn crossing_pairs(&self) -> usize {
        let l = self.k_grid.len();
        let mut used = vec![false; self.crossings.len()];
        let mut pairs = 0;
        for i in 0..self.crossings.len() {
            if used[i] {
                continue;
            }
            used[i] = true;
            pairs += 1;
            let c = &self.crossings[i];
            let m = mirror_index(c.at, l);
            if m == c.at {
                continue;
            }
            if let Some(j) = (i + 1..self.crossings.len())
                .find(|&j| !used[j] && self.crossings[j].at == m && self.crossings[j].direction == c.direction)
            {
                used[j] = true;
            }
        }
        pairs
    }

    pub fn n_branches(&self) -> usize {
        self.tracked.n_branches
    }
}

/// Restricted spectra of the region of `y_cut` rows from a cylinder state in
/// momentum form.
pub fn cut_spectrum_momentum(mc: &MomentumCorrelation, orbitals: usize, y_cut: usize) -> Result<CutSpectrum> {
    let cell = mc.cell_modes();
    if orbitals == 0 || cell % orbitals != 0 {
        return Err(Error::Shape(format!("cell of {cell} Majoranas does not hold {orbitals}-orbital sites")));
    }
    let ly = cell / orbitals;
    if y_cut == 0 || y_cut >= ly {
        return Err(Error::Shape(format!("y_cut = {y_cut} outside 1..{ly}")));
    }
    let na = y_cut * orbitals;
    let frames: Vec<Frame> = mc
        .blocks()
        .par_iter()
        .map(|b| {
            let (values, vectors) = momentum_lambdas(&b.slice(s![..na, ..na]).to_owned())?;
            Ok(Frame { values, vectors })
        })
        .collect::<Result<_>>()?;
    let spectra = frames
        .iter()
        .zip(mc.k_grid())
        .map(|(f, &k)| EntanglementSpectrum::from_lambdas(f.values.clone(), Some(k)))
        .collect();
    let tracked = track(&frames.into_iter().map(Some).collect::<Vec<_>>())?;
    let report = continuity(&tracked, None);
    let crossings = zero_crossings(&tracked, report.jump_tol, CROSSING_ZERO_TOL);
    Ok(CutSpectrum { y_cut, k_grid: mc.k_grid().to_vec(), spectra, tracked, continuity: report, crossings })
}

/// Cut spectrum from a real-space Γ on an Lx-periodic cylinder with
/// `orbitals` Majoranas per site.
pub fn cut_spectrum(gamma: &CorrelationMatrix, lx: usize, orbitals: usize, y_cut: usize) -> Result<CutSpectrum> {
    let n = gamma.n_modes();
    if lx == 0 || n % lx != 0 {
        return Err(Error::Shape(format!("{n} Majoranas do not split into {lx} columns")));
    }
    let mc = fourier_blocks(gamma, n / lx)?;
    cut_spectrum_momentum(&mc, orbitals, y_cut)
}

/// Channel that keeps Majorana 1 and resets Majorana 2 (swapped into the
/// environment).
pub fn kitaev_channel() -> GaussianChannel {
    let mut b = Mat::zeros((2, 2));
    b[[0, 0]] = 1.0;
    GaussianChannel::new(Mat::zeros((2, 2)), b).expect("swap channel is CPTP")
}

/// Pure tensor over (P, V_t, V_b) with 2 Majoranas each, built from a
/// permutation of (V_b1, V_b2, e1, e2) onto (P1, P2, V_t1, V_t2) with the
/// environment pair in the state ⟨i e1 e2⟩ = 1.
fn permutation_tensor(source: [usize; 4]) -> IsoTensor {
    // Inputs 0, 1 are V_b; 2, 3 the environment.
    let mut lambda = Mat::zeros((6, 6));
    for (o, &src) in source.iter().enumerate() {
        if src < 2 {
            lambda[[o, 4 + src]] = 1.0;
            lambda[[4 + src, o]] = -1.0;
        }
    }
    let e1 = source.iter().position(|&x| x == 2).expect("e1 is routed");
    let e2 = source.iter().position(|&x| x == 3).expect("e2 is routed");
    lambda[[e1, e2]] = 1.0;
    lambda[[e2, e1]] = -1.0;
    let legs = vec![Leg::new(LegKind::P, 2), Leg::new(LegKind::Vt, 2), Leg::new(LegKind::Vb, 2)];
    IsoTensor::new(legs, lambda).expect("permutation tensor has consistent legs")
}

/// Kitaev-chain fixed point: P1 ← V_b2, P2 ← e2, V_t1 ← V_b1, V_t2 ← e1.
/// The virtual channel is `kitaev_channel`.
pub fn kitaev_tensor() -> IsoTensor {
    permutation_tensor([1, 3, 0, 2])
}

/// Trivial-phase counterpart: the physical legs take V_b and the virtual
/// output is reset to a fresh pair (B = 0).
pub fn trivial_tensor() -> IsoTensor {
    permutation_tensor([0, 1, 2, 3])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParitySpectra {
    pub cut: usize,
    /// Eigenvalues of ρ_A in the even sector, descending.
    pub even: Vec<f64>,
    pub odd: Vec<f64>,
    pub mismatch: f64,
}

/// Parity-resolved spectrum of the first `cut` sites of a chain grown from
/// `boundary` with `chain_length` copies of `t`.
pub fn parity_spectra_of(t: &IsoTensor, boundary: &CorrelationMatrix, chain_length: usize, cut: usize) -> Result<ParitySpectra> {
    if !(2..=MAX_PARITY_CHAIN).contains(&chain_length) {
        return Err(Error::OracleLimit(format!("chain length {chain_length} outside 2..={MAX_PARITY_CHAIN}")));
    }
    let np = t.modes(LegKind::P);
    if np % 2 != 0 || cut == 0 || cut >= chain_length {
        return Err(Error::Shape(format!("cut {cut} invalid for {chain_length} sites")));
    }
    let gamma = contract_mps(t, boundary, chain_length)?;
    let psi = gaussian_pure_state(&gamma)?;
    let nq = gamma.n_modes() / 2;
    let qa = cut * np / 2;
    let rho = reduced_density(&psi, nq, 2, 0..qa);
    let dim = rho.nrows();
    let sector = |parity: u32| -> Result<Vec<f64>> {
        let idx: Vec<usize> = (0..dim).filter(|i| i.count_ones() % 2 == parity).collect();
        let blk = rho.select(ndarray::Axis(0), &idx).select(ndarray::Axis(1), &idx);
        let (vals, _) = eigh_c(&blk)?;
        let mut v: Vec<f64> = vals.to_vec();
        v.sort_by(|a, b| b.total_cmp(a));
        Ok(v)
    };
    // Cross-sector coherences vanish for a parity eigenstate.
    let even = sector(0)?;
    let odd = sector(1)?;
    let mismatch = even.iter().zip(&odd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(ParitySpectra { cut, even, odd, mismatch })
}

/// Kitaev fixed-point chain on a pure boundary, cut in the middle.
pub fn parity_spectra(chain_length: usize) -> Result<ParitySpectra> {
    parity_spectra_of(&kitaev_tensor(), &CorrelationMatrix::paired(1, 1.0), chain_length, (chain_length / 2).max(1))
}
