//! Translation-invariant channels, one 2n×2n block per momentum.
//!
//! A channel N[Γ_k] = A_k + B_k Γ_k B_k† is stored on the uniform grid
//! k_j = 2πj/L. Per-k work runs in parallel; every post-pass over the grid is
//! sequential, so results do not depend on scheduling.

use std::f64::consts::PI;

use ndarray::{s, Axis};
use num_complex::Complex64 as c64;
use rayon::prelude::*;

use crate::branches::{self, continuity, track, ContinuityReport, Frame, Jump, Link, Tracked};
use crate::channel::{split_modes, GaussianChannel, Split, CPTP_TOL, FIXED_POINT_TOL, NOISE_FLOOR};
use crate::error::{Error, Result};
use crate::linalg::{
    anti_hermiticity_defect, dagger, eig_c, linear_fit, max_abs_c, orthonormal_columns,
    spectral_norm_c, stein_solve_c, to_complex, CMat, Mat,
};
use crate::majorana::{
    entanglement_energy, mirror_index, momentum_lambdas, momentum_to_blocks, real_space_blocks,
    uniform_grid, EntanglementSpectrum, REALITY_TOL,
};

#[derive(Debug, Clone)]
pub struct MomentumChannel {
    k_grid: Vec<f64>,
    a: Vec<CMat>,
    b: Vec<CMat>,
}

fn lambda_k(a: &CMat, b: &CMat) -> CMat {
    let (no, ni) = b.dim();
    let mut l = CMat::zeros((no + ni, no + ni));
    l.slice_mut(s![..no, ..no]).assign(a);
    l.slice_mut(s![..no, no..]).assign(b);
    l.slice_mut(s![no.., ..no]).assign(&dagger(b).mapv(|z| -z));
    l
}

/// ‖Λ_k‖² - 1, which is ≤ 0 exactly when the block is completely positive.
pub fn cptp_excess_k(a: &CMat, b: &CMat) -> f64 {
    let n = spectral_norm_c(&lambda_k(a, b).view());
    n * n - 1.0
}

impl MomentumChannel {
    pub fn new(a: Vec<CMat>, b: Vec<CMat>) -> Result<Self> {
        let l = a.len();
        if l == 0 || b.len() != l {
            return Err(Error::Shape("A_k and B_k grids differ or are empty".into()));
        }
        let n = a[0].nrows();
        for j in 0..l {
            if a[j].dim() != (n, n) || b[j].dim() != (n, n) {
                return Err(Error::Shape(format!("block shape mismatch at k index {j}")));
            }
            let defect = anti_hermiticity_defect(&a[j]);
            if defect > 1e-10 {
                return Err(Error::NotAntiHermitian { defect });
            }
        }
        let excess: Vec<f64> = (0..l).into_par_iter().map(|j| cptp_excess_k(&a[j], &b[j])).collect();
        if let Some(&e) = excess.iter().find(|&&e| e > CPTP_TOL) {
            return Err(Error::NotCptp { excess: e });
        }
        for j in 0..l {
            let m = mirror_index(j, l);
            let da = max_abs_c(&(&a[j].mapv(|z| z.conj()) - &a[m]).view());
            let db = max_abs_c(&(&b[j].mapv(|z| z.conj()) - &b[m]).view());
            if da.max(db) > REALITY_TOL {
                return Err(Error::Reality { k_index: j, defect: da.max(db) });
            }
        }
        Ok(Self { k_grid: uniform_grid(l), a, b })
    }

    /// Samples an exact per-k evaluator on L points.
    pub fn from_fn<F>(l: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> (CMat, CMat) + Sync,
    {
        let (a, b): (Vec<_>, Vec<_>) = uniform_grid(l).into_par_iter().map(|k| f(k)).unzip();
        Self::new(a, b)
    }

    /// Fourier blocks of a block-circulant real-space channel.
    pub fn from_real_space(ch: &GaussianChannel, cell_modes: usize) -> Result<Self> {
        let ga = real_space_blocks(ch.a(), cell_modes)?;
        let gb = real_space_blocks(ch.b(), cell_modes)?;
        Self::new(crate::majorana::blocks_to_momentum(&ga), crate::majorana::blocks_to_momentum(&gb))
    }

    pub fn k_grid(&self) -> &[f64] {
        &self.k_grid
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn cell_modes(&self) -> usize {
        self.a[0].nrows()
    }

    pub fn a(&self, j: usize) -> &CMat {
        &self.a[j]
    }

    pub fn b(&self, j: usize) -> &CMat {
        &self.b[j]
    }

    /// `after ∘ self`, one period of an alternating two-step circuit.
    pub fn then(&self, after: &MomentumChannel) -> Result<MomentumChannel> {
        if after.len() != self.len() || after.cell_modes() != self.cell_modes() {
            return Err(Error::Shape("momentum channels live on different grids".into()));
        }
        let (a, b): (Vec<_>, Vec<_>) = (0..self.len())
            .into_par_iter()
            .map(|j| {
                let a = &after.a[j] + &after.b[j].dot(&self.a[j]).dot(&dagger(&after.b[j]));
                (a, after.b[j].dot(&self.b[j]))
            })
            .unzip();
        Self::new(a, b)
    }
}

/// One period of the brick-wall circuit at momentum k: the two-site gate acts
/// inside each cell, then on the shifted pairs, giving
/// A_k = U𝖠U† + U𝖡U†𝖠U𝖡ᵀU† and B_k = U𝖡U†𝖡 with U_k = [[0, I], [e^{-ik} I, 0]].
pub fn brickwall_blocks(two_site: &GaussianChannel, k: f64) -> (CMat, CMat) {
    let m = two_site.n_in();
    let n = m / 2;
    let mut u = CMat::zeros((m, m));
    let ph = c64::from_polar(1.0, -k);
    for i in 0..n {
        u[[i, n + i]] = c64::new(1.0, 0.0);
        u[[n + i, i]] = ph;
    }
    let ud = dagger(&u);
    let ga = to_complex(&two_site.a().view());
    let gb = to_complex(&two_site.b().view());
    let ub = u.dot(&gb).dot(&ud);
    let a = u.dot(&ga).dot(&ud) + ub.dot(&ga).dot(&dagger(&ub));
    let b = ub.dot(&gb);
    ((&a - &dagger(&a)).mapv(|z| z * 0.5), b)
}

pub fn build_brickwall(two_site: &GaussianChannel, l: usize) -> Result<MomentumChannel> {
    if two_site.n_in() != two_site.n_out() || two_site.n_in() % 2 != 0 {
        return Err(Error::Shape("two-site gate must be square on an even mode count".into()));
    }
    if l == 0 || l % 2 != 0 {
        return Err(Error::Shape(format!("grid size {l} must be even")));
    }
    MomentumChannel::from_fn(l, |k| brickwall_blocks(two_site, k))
}

#[derive(Debug, Clone)]
pub struct BandClassification {
    pub k_grid: Vec<f64>,
    pub preserved_dim: Vec<usize>,
    pub generic_dim: usize,
    /// Grid indices whose preserved dimension differs from the generic one.
    pub exceptions: Vec<usize>,
    pub r_k: Vec<f64>,
    /// Largest r_k away from the exceptions.
    pub r_global: f64,
    /// band_phases[band][k]: unit eigenvalue of B_k on the band (None at exceptions).
    pub band_phases: Vec<Vec<Option<c64>>>,
    pub weak_links: Vec<Link>,
    pub ambiguities: Vec<Link>,
    pub(crate) splits: Vec<Split>,
}

impl BandClassification {
    pub fn is_exceptional(&self, j: usize) -> bool {
        self.exceptions.binary_search(&j).is_ok()
    }

    pub fn n_bands(&self) -> usize {
        self.band_phases.len()
    }
}

/// Eigenpairs of the unitary restriction of B_k to its preserved subspace,
/// with orthonormal vectors inside each degenerate cluster.
fn preserved_frame(split: &Split, b: &CMat) -> Result<(Vec<c64>, CMat)> {
    let q = &split.q_u;
    let p = q.ncols();
    if p == 0 {
        return Ok((vec![], CMat::zeros((b.nrows(), 0))));
    }
    let u = dagger(q).dot(b).dot(q);
    let (vals, vecs) = eig_c(&u)?;
    let mut idx: Vec<usize> = (0..p).collect();
    idx.sort_by(|&x, &y| vals[y].arg().total_cmp(&vals[x].arg()));
    let vals: Vec<c64> = idx.iter().map(|&i| vals[i]).collect();
    let mut vecs = vecs.select(Axis(1), &idx);
    let mut start = 0;
    for i in 1..=p {
        if i == p || (vals[i] - vals[i - 1]).norm() > 1e-8 {
            if i - start > 1 {
                let block = vecs.slice(s![.., start..i]).to_owned();
                let ortho = orthonormal_columns(&block, 1e-10)?;
                vecs.slice_mut(s![.., start..i]).assign(&ortho);
            }
            start = i;
        }
    }
    Ok((vals, q.dot(&vecs)))
}

pub fn classify_bands(mc: &MomentumChannel, tol_unit: f64) -> Result<BandClassification> {
    let l = mc.len();
    let splits: Vec<Split> = (0..l)
        .into_par_iter()
        .map(|j| split_modes(&mc.a[j], &mc.b[j], tol_unit))
        .collect::<Result<_>>()?;
    let dims: Vec<usize> = splits.iter().map(|s| s.q_u.ncols()).collect();
    let max_dim = dims.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0usize; max_dim + 1];
    for &d in &dims {
        counts[d] += 1;
    }
    // Most common dimension; ties resolved towards the smaller one.
    let generic = (0..=max_dim).max_by(|&x, &y| counts[x].cmp(&counts[y]).then(y.cmp(&x))).unwrap();
    let exceptions: Vec<usize> = (0..l).filter(|&j| dims[j] != generic).collect();
    if (exceptions.len() as f64) > (l as f64).sqrt() {
        return Err(Error::ClassificationUnstable { count: exceptions.len(), grid: l });
    }
    for w in exceptions.windows(2) {
        if w[1] == w[0] + 1 {
            return Err(Error::Classification(format!(
                "adjacent exceptional momenta at indices {} and {}; refine the grid",
                w[0], w[1]
            )));
        }
    }
    if exceptions.len() > 1 && exceptions[0] == 0 && *exceptions.last().unwrap() == l - 1 {
        return Err(Error::Classification("adjacent exceptional momenta across k = 0".into()));
    }
    let r_k: Vec<f64> = splits.iter().map(|s| s.r).collect();
    let r_global = (0..l)
        .filter(|j| exceptions.binary_search(j).is_err())
        .map(|j| r_k[j])
        .fold(0.0, f64::max);

    let frames: Vec<Option<(Vec<c64>, CMat)>> = (0..l)
        .into_par_iter()
        .map(|j| {
            if exceptions.binary_search(&j).is_ok() {
                Ok(None)
            } else {
                preserved_frame(&splits[j], &mc.b[j]).map(Some)
            }
        })
        .collect::<Result<_>>()?;
    let track_frames: Vec<Option<Frame>> = frames
        .iter()
        .map(|f| f.as_ref().map(|(v, q)| Frame { values: v.iter().map(|z| z.arg()).collect(), vectors: q.clone() }))
        .collect();
    let tracked = track(&track_frames)?;
    let mut band_phases = vec![vec![None; l]; generic];
    for (p, &j) in tracked.order.iter().enumerate() {
        let (vals, _) = frames[j].as_ref().unwrap();
        for b in 0..generic {
            band_phases[b][j] = Some(vals[tracked.columns[p][b]]);
        }
    }
    Ok(BandClassification {
        k_grid: mc.k_grid.clone(),
        preserved_dim: dims,
        generic_dim: generic,
        exceptions,
        r_k,
        r_global,
        band_phases,
        weak_links: tracked.weak_links,
        ambiguities: tracked.ambiguities,
        splits,
    })
}

/// Dissipative steady state at one momentum, in a V_d basis Q_d.
#[derive(Debug, Clone)]
pub struct DissipativeBlock {
    pub basis: CMat,
    pub gamma_d: CMat,
    pub residual: f64,
}

impl DissipativeBlock {
    /// Q_d Γ_d Q_d†, the steady state with the preserved block set to zero.
    pub fn embedded(&self) -> CMat {
        self.basis.dot(&self.gamma_d).dot(&dagger(&self.basis))
    }
}

#[derive(Debug, Clone)]
pub struct MomentumSteadyState {
    pub k_grid: Vec<f64>,
    /// None marks an exceptional momentum.
    pub blocks: Vec<Option<DissipativeBlock>>,
}

impl MomentumSteadyState {
    /// Wraps given Γ_k blocks, treating every mode as dissipative.
    pub fn from_blocks(blocks: Vec<CMat>) -> Self {
        let l = blocks.len();
        let blocks = blocks
            .into_iter()
            .map(|g| {
                let n = g.nrows();
                Some(DissipativeBlock { basis: CMat::eye(n), gamma_d: g, residual: 0.0 })
            })
            .collect();
        Self { k_grid: uniform_grid(l), blocks }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

fn dissipative_block(a: &CMat, b: &CMat, q_d: &CMat) -> Result<DissipativeBlock> {
    let qd = dagger(q_d);
    let a_d = qd.dot(a).dot(q_d);
    let b_d = qd.dot(b).dot(q_d);
    let g = stein_solve_c(&a_d, &b_d)?;
    let g = (&g - &dagger(&g)).mapv(|z| z * 0.5);
    let residual = max_abs_c(&(&g - &a_d - b_d.dot(&g).dot(&dagger(&b_d))).view());
    if residual > FIXED_POINT_TOL {
        return Err(Error::FixedPoint { residual });
    }
    Ok(DissipativeBlock { basis: q_d.clone(), gamma_d: g, residual })
}

/// Γ_{k,d} = A_{k,d} + B_{k,d} Γ_{k,d} B_{k,d}† per non-exceptional k.
pub fn steady_state_k(mc: &MomentumChannel, bands: &BandClassification) -> Result<MomentumSteadyState> {
    let l = mc.len();
    let blocks = (0..l)
        .into_par_iter()
        .map(|j| {
            if bands.is_exceptional(j) {
                return Ok(None);
            }
            dissipative_block(&mc.a[j], &mc.b[j], &bands.splits[j].q_d).map(Some)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentumSteadyState { k_grid: mc.k_grid.clone(), blocks })
}

/// Frame of signed λ (eigenvalues of -iΓ_{k,d}) with eigenvectors in ambient coordinates.
pub fn spectral_frame(block: &DissipativeBlock) -> Result<Frame> {
    let (lambdas, vecs) = momentum_lambdas(&block.gamma_d)?;
    Ok(Frame { values: lambdas, vectors: block.basis.dot(&vecs) })
}

#[derive(Debug, Clone)]
pub struct BulkSpectrum {
    pub k_grid: Vec<f64>,
    pub spectra: Vec<Option<EntanglementSpectrum>>,
    pub tracked: Tracked,
    pub report: ContinuityReport,
}

impl BulkSpectrum {
    /// max |ε(k) + ε(-k)| over matched finite values, sectors compared as sorted sets.
    pub fn antisymmetry_residual(&self) -> f64 {
        momentum_antisymmetry(&self.spectra)
    }
}

pub(crate) fn momentum_antisymmetry(spectra: &[Option<EntanglementSpectrum>]) -> f64 {
    let l = spectra.len();
    let mut worst = 0.0f64;
    for j in 0..l {
        let (Some(a), Some(b)) = (&spectra[j], &spectra[mirror_index(j, l)]) else { continue };
        let mut x: Vec<f64> = a.energies.clone();
        let mut y: Vec<f64> = b.energies.iter().map(|e| -e).collect();
        x.sort_by(|p, q| p.total_cmp(q));
        y.sort_by(|p, q| p.total_cmp(q));
        for (p, q) in x.iter().zip(&y) {
            if p.is_finite() && q.is_finite() {
                worst = worst.max((p - q).abs());
            } else if p != q {
                worst = f64::INFINITY;
            }
        }
    }
    worst
}

pub fn bulk_spectrum(ss: &MomentumSteadyState, jump_tol: Option<f64>) -> Result<BulkSpectrum> {
    let frames: Vec<Option<Frame>> = ss
        .blocks
        .par_iter()
        .map(|b| b.as_ref().map(spectral_frame).transpose())
        .collect::<Result<_>>()?;
    let spectra = frames
        .iter()
        .zip(&ss.k_grid)
        .map(|(f, &k)| {
            f.as_ref().map(|f| {
                let energies = f.values.iter().map(|&l| entanglement_energy(l)).collect();
                EntanglementSpectrum { lambdas: f.values.clone(), energies, k: Some(k) }
            })
        })
        .collect();
    let tracked = track(&frames)?;
    let report = continuity(&tracked, jump_tol);
    Ok(BulkSpectrum { k_grid: ss.k_grid.clone(), spectra, tracked, report })
}

/// How a flagged jump behaved under grid refinement.
#[derive(Debug, Clone, PartialEq)]
pub enum Resolution {
    /// Sub-steps fell below the jump tolerance at this refinement depth.
    Smooth { depth: u32, max_step: f64 },
    /// An exceptional momentum or a ±∞ clamp lies inside the interval.
    Removable { k: f64 },
    /// The jump survived the deepest refinement.
    Persistent { max_step: f64 },
}

#[derive(Debug, Clone)]
pub struct CertifiedContinuity {
    pub report: ContinuityReport,
    pub resolutions: Vec<(Jump, Resolution)>,
}

impl CertifiedContinuity {
    pub fn continuous(&self) -> bool {
        self.resolutions.iter().all(|(_, r)| !matches!(r, Resolution::Persistent { .. }))
    }

    /// No persistent jump changes the sign of ε.
    pub fn non_chiral(&self) -> bool {
        self.resolutions
            .iter()
            .all(|(j, r)| !(j.sign_crossing && matches!(r, Resolution::Persistent { .. })))
    }
}

/// Evaluates the dissipative steady-state frame of a channel at an arbitrary
/// momentum. Returns None where the preserved dimension differs from `generic_dim`.
pub fn steady_frame_at(a: &CMat, b: &CMat, generic_dim: usize, tol_unit: f64) -> Result<Option<Frame>> {
    let split = split_modes(a, b, tol_unit)?;
    if split.q_u.ncols() != generic_dim {
        return Ok(None);
    }
    let block = dissipative_block(a, b, &split.q_d)?;
    spectral_frame(&block).map(Some)
}

/// Re-examines every flagged jump of a bulk spectrum by bisecting its
/// interval with exact evaluations `eval(k)`, up to 2^max_depth sub-points.
pub fn certify_continuity<F>(spec: &BulkSpectrum, eval: F, max_depth: u32) -> Result<CertifiedContinuity>
where
    F: Fn(f64) -> Result<Option<Frame>> + Sync,
{
    let tol = spec.report.jump_tol;
    let mut resolutions = Vec::new();
    for jump in &spec.report.discontinuities {
        let p = spec.tracked.order.iter().position(|&j| j == jump.from).expect("tracked momentum");
        let column = spec.tracked.columns[p][jump.branch];
        let k0 = spec.k_grid[jump.from];
        let mut k1 = spec.k_grid[jump.to];
        if k1 <= k0 {
            k1 += 2.0 * PI;
        }
        let start = eval(k0)?.ok_or_else(|| Error::Classification("jump starts at an exceptional momentum".into()))?;
        let end = eval(k1)?;
        let mut resolution = None;
        let mut last_step = f64::INFINITY;
        for depth in 1..=max_depth {
            let m = 1usize << depth;
            let inner: Vec<Option<Frame>> = (1..m)
                .into_par_iter()
                .map(|i| eval(k0 + (k1 - k0) * i as f64 / m as f64))
                .collect::<Result<_>>()?;
            if let Some(i) = inner.iter().position(Option::is_none) {
                resolution = Some(Resolution::Removable { k: (k0 + (k1 - k0) * (i + 1) as f64 / m as f64) % (2.0 * PI) });
                break;
            }
            let mut path = vec![start.clone()];
            path.extend(inner.into_iter().map(Option::unwrap));
            match &end {
                Some(f) => path.push(f.clone()),
                None => {
                    resolution = Some(Resolution::Removable { k: k1 % (2.0 * PI) });
                    break;
                }
            }
            let cols = branches::track_path(&path)?;
            let eps: Vec<f64> = (0..path.len()).map(|i| entanglement_energy(path[i].values[cols[i][column]])).collect();
            if eps.iter().any(|e| !e.is_finite()) {
                resolution = Some(Resolution::Removable { k: k0 });
                break;
            }
            let max_step = eps.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
            last_step = max_step;
            if max_step <= tol {
                resolution = Some(Resolution::Smooth { depth, max_step });
                break;
            }
        }
        resolutions.push((jump.clone(), resolution.unwrap_or(Resolution::Persistent { max_step: last_step })));
    }
    Ok(CertifiedContinuity { report: spec.report.clone(), resolutions })
}

#[derive(Debug, Clone)]
pub struct DecayReport {
    pub distances: Vec<usize>,
    pub max_abs: Vec<f64>,
    /// Fitted correlation length; 0 when the window is below the noise floor.
    pub xi: f64,
    /// Root-mean-square deviation of the log-linear fit.
    pub fit_residual: f64,
    /// Inclusive distance range actually fitted.
    pub window: (usize, usize),
}

impl DecayReport {
    /// ξ ≤ (1 + rel_tol) / ln(1/r).
    pub fn respects_bound(&self, r: f64, rel_tol: f64) -> bool {
        if r <= 0.0 {
            return self.xi == 0.0;
        }
        self.xi <= (1.0 + rel_tol) / (1.0 / r).ln()
    }
}

/// Real-space correlations G(d) from Γ_k blocks and a log-linear fit of
/// max|G(±d)| over d in [2, L/4], dropping points below 1e-13.
pub fn realspace_decay_blocks(blocks: &[CMat]) -> Result<DecayReport> {
    let l = blocks.len();
    if l < 16 {
        return Err(Error::Fit(format!("grid of {l} points is too small for a decay fit")));
    }
    let g = momentum_to_blocks(blocks);
    let half = l / 2;
    let distances: Vec<usize> = (0..=half).collect();
    let max_abs: Vec<f64> = distances
        .iter()
        .map(|&d| max_abs_c(&g[d].view()).max(max_abs_c(&g[(l - d) % l].view())))
        .collect();
    let hi = l / 4;
    let pts: Vec<usize> = (2..=hi).take_while(|&d| max_abs[d] > NOISE_FLOOR).collect();
    if pts.len() < 3 {
        return Ok(DecayReport { distances, max_abs, xi: 0.0, fit_residual: 0.0, window: (2, 2) });
    }
    let x: Vec<f64> = pts.iter().map(|&d| d as f64).collect();
    let y: Vec<f64> = pts.iter().map(|&d| max_abs[d].ln()).collect();
    let (slope, icpt) = linear_fit(&x, &y);
    let rms = (x.iter().zip(&y).map(|(a, b)| (b - slope * a - icpt).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
    let xi = if slope < 0.0 { -1.0 / slope } else { f64::INFINITY };
    Ok(DecayReport { distances, max_abs, xi, fit_residual: rms, window: (pts[0], *pts.last().unwrap()) })
}

/// Decay of the steady state with the preserved block set to zero. Exceptional
/// momenta are filled with the mean of their neighbours.
pub fn realspace_decay(ss: &MomentumSteadyState) -> Result<DecayReport> {
    let l = ss.len();
    let emb: Vec<Option<CMat>> = ss.blocks.iter().map(|b| b.as_ref().map(DissipativeBlock::embedded)).collect();
    let mut filled = Vec::with_capacity(l);
    for j in 0..l {
        match &emb[j] {
            Some(g) => filled.push(g.clone()),
            None => {
                let prev = emb[(j + l - 1) % l].as_ref();
                let next = emb[(j + 1) % l].as_ref();
                match (prev, next) {
                    (Some(p), Some(n)) => filled.push((p + n).mapv(|z| z * 0.5)),
                    _ => return Err(Error::Classification("adjacent exceptional momenta".into())),
                }
            }
        }
    }
    realspace_decay_blocks(&filled)
}

/// Real-space brick-wall channel on `cells` unit cells: the gate on every
/// cell, then on the shifted pairs (second half of cell x+1, first half of cell x).
pub fn brickwall_real_space(two_site: &GaussianChannel, cells: usize) -> Result<GaussianChannel> {
    let m = two_site.n_in();
    let n = m / 2;
    let total = m * cells;
    let place = |slots: &dyn Fn(usize) -> Vec<usize>| -> Result<GaussianChannel> {
        let mut a = Mat::zeros((total, total));
        let mut b = Mat::zeros((total, total));
        for x in 0..cells {
            let idx = slots(x);
            for (p, &i) in idx.iter().enumerate() {
                for (q, &j) in idx.iter().enumerate() {
                    a[[i, j]] = two_site.a()[[p, q]];
                    b[[i, j]] = two_site.b()[[p, q]];
                }
            }
        }
        GaussianChannel::new(a, b)
    };
    let odd = place(&|x| (x * m..(x + 1) * m).collect())?;
    let even = place(&|x| {
        let nx = (x + 1) % cells;
        (nx * m + n..nx * m + m).chain(x * m..x * m + n).collect()
    })?;
    odd.then(&even)
}
