//! Chern number, edge-mode count and the quasi-diagonality precondition for
//! spectral projectors P = (I + iΓ)/2, i.e. 2P_kl = ⟨c_l c_k⟩.

use std::f64::consts::PI;
use std::ops::Range;

use ndarray::Axis;
use num_complex::Complex64 as c64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dagger, eigh_c, linear_fit, max_abs_c, CMat, Mat, I};
use crate::models::{block_ground_state, LatticeModel};

pub const PROJECTOR_TOL: f64 = 1e-10;
pub const GAP_TOL: f64 = 1e-3;
pub const JUMP_DETECT: f64 = 0.5;
pub const JUMP_INTEGER_TOL: f64 = 0.1;
/// Entries below this are treated as zero by the quasi-diagonality fit.
pub const QUASI_FLOOR: f64 = 1e-14;

/// Projectors on a product grid of momenta; `mats[ix * ny + iy]`. A cylinder
/// uses a single q_y.
#[derive(Debug, Clone)]
pub struct SpectralProjector {
    qx: Vec<f64>,
    qy: Vec<f64>,
    mats: Vec<CMat>,
    rank: usize,
}

fn rank_of(p: &CMat) -> usize {
    (0..p.nrows()).map(|i| p[[i, i]].re).sum::<f64>().round() as usize
}

impl SpectralProjector {
    pub fn new(qx: Vec<f64>, qy: Vec<f64>, mats: Vec<CMat>) -> Result<Self> {
        if qx.is_empty() || qy.is_empty() || mats.len() != qx.len() * qy.len() {
            return Err(Error::Shape(format!(
                "{} projectors for a {}×{} grid",
                mats.len(),
                qx.len(),
                qy.len()
            )));
        }
        let dim = mats[0].nrows();
        let rank = rank_of(&mats[0]);
        for (i, p) in mats.iter().enumerate() {
            if p.dim() != (dim, dim) {
                return Err(Error::Shape("projectors differ in size".into()));
            }
            let herm = max_abs_c(&(p - &dagger(p)).view());
            let idem = max_abs_c(&(p.dot(p) - p).view());
            if herm > PROJECTOR_TOL || idem > PROJECTOR_TOL {
                return Err(Error::Projector(format!(
                    "grid point {i}: hermiticity defect {herm:.2e}, idempotency defect {idem:.2e}"
                )));
            }
            if rank_of(p) != rank {
                return Err(Error::Projector(format!("rank changes from {rank} to {} at grid point {i}", rank_of(p))));
            }
        }
        Ok(Self { qx, qy, mats, rank })
    }

    /// Occupied-band projector of a lattice model on an n × n Brillouin-zone
    /// grid; refuses when the Bogoliubov gap drops below `gap_tol`.
    pub fn from_model(model: &LatticeModel, n: usize, gap_tol: f64) -> Result<Self> {
        let grid: Vec<f64> = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
        let mats: Vec<CMat> = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let (qx, qy) = (grid[idx / n], grid[idx % n]);
                let bg = block_ground_state(&model.bloch(qx, qy), false)?;
                if bg.min_energy < gap_tol {
                    return Err(Error::GapClosure { qx, qy, gap: bg.min_energy });
                }
                Ok(projector_of(&bg.gamma))
            })
            .collect::<Result<_>>()?;
        Self::new(grid.clone(), grid, mats)
    }

    /// Projectors P(q_x) of the model on a strip of `ly` rows, on the
    /// half-shifted grid q_j = 2π(j + 1/2)/nq, which avoids q_x = 0.
    pub fn cylinder(model: &LatticeModel, ly: usize, nq: usize) -> Result<Self> {
        let qx: Vec<f64> = (0..nq).map(|j| 2.0 * PI * (j as f64 + 0.5) / nq as f64).collect();
        let mats: Vec<CMat> = qx
            .par_iter()
            .map(|&q| {
                let bg = block_ground_state(&model.cylinder(q, ly), false)?;
                if bg.zero_modes > 0 {
                    return Err(Error::GapClosure { qx: q, qy: f64::NAN, gap: bg.min_energy });
                }
                Ok(projector_of(&bg.gamma))
            })
            .collect::<Result<_>>()?;
        Self::new(qx, vec![0.0], mats)
    }

    pub fn qx(&self) -> &[f64] {
        &self.qx
    }

    pub fn qy(&self) -> &[f64] {
        &self.qy
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.mats[0].nrows()
    }

    pub fn at(&self, ix: usize, iy: usize) -> &CMat {
        &self.mats[ix * self.qy.len() + iy]
    }

    /// U P U† at every point, for a fixed unitary U.
    pub fn conjugated(&self, u: &CMat) -> Result<Self> {
        let ud = dagger(u);
        let mats = self.mats.iter().map(|p| u.dot(p).dot(&ud)).collect();
        Self::new(self.qx.clone(), self.qy.clone(), mats)
    }

    /// Direct sum P ⊕ Q point by point.
    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        if self.qx.len() != other.qx.len() || self.qy.len() != other.qy.len() {
            return Err(Error::Shape("direct sum needs equal grids".into()));
        }
        let (n, m) = (self.dim(), other.dim());
        let mats = self
            .mats
            .iter()
            .zip(&other.mats)
            .map(|(a, b)| {
                let mut out = CMat::zeros((n + m, n + m));
                out.slice_mut(ndarray::s![..n, ..n]).assign(a);
                out.slice_mut(ndarray::s![n.., n..]).assign(b);
                out
            })
            .collect();
        Self::new(self.qx.clone(), self.qy.clone(), mats)
    }
}

/// P = (I + iΓ)/2.
pub fn projector_of(gamma: &CMat) -> CMat {
    let n = gamma.nrows();
    (CMat::eye(n) + gamma.mapv(|z| I * z)).mapv(|z| z * 0.5)
}

fn occupied_frame(p: &CMat) -> Result<(CMat, f64)> {
    let (vals, vecs) = eigh_c(p)?;
    let gap = vals.iter().map(|v| (v - 0.5).abs()).fold(f64::INFINITY, f64::min);
    let idx: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 0.5).collect();
    Ok((vecs.select(Axis(1), &idx), gap))
}

fn det_c(m: &CMat) -> c64 {
    // Gaussian elimination with partial pivoting; the link matrices are tiny.
    let n = m.nrows();
    let mut a = m.clone();
    let mut det = c64::new(1.0, 0.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[[x, col]].norm().total_cmp(&a[[y, col]].norm())).unwrap();
        if a[[piv, col]].norm() == 0.0 {
            return c64::new(0.0, 0.0);
        }
        if piv != col {
            for j in 0..n {
                a.swap([piv, j], [col, j]);
            }
            det = -det;
        }
        let d = a[[col, col]];
        det *= d;
        for r in col + 1..n {
            let f = a[[r, col]] / d;
            for j in col..n {
                let v = a[[col, j]];
                a[[r, j]] -= f * v;
            }
        }
    }
    det
}

fn link(u: &CMat, v: &CMat) -> Result<c64> {
    let d = det_c(&dagger(u).dot(v));
    if d.norm() < 1e-12 {
        return Err(Error::Projector("vanishing link variable; grid too coarse".into()));
    }
    Ok(d / d.norm())
}

/// Chern number by the plaquette (link-variable) method,
/// ν = (1/2π) Σ arg(U_x(q) U_y(q+x̂) U_x(q+ŷ)* U_y(q)*).
pub fn chern_number(p: &SpectralProjector) -> Result<i64> {
    let (nx, ny) = (p.qx.len(), p.qy.len());
    if nx < 2 || ny < 2 {
        return Err(Error::Shape("Chern number needs a two-dimensional grid".into()));
    }
    let frames: Vec<(CMat, f64)> = p.mats.par_iter().map(occupied_frame).collect::<Result<_>>()?;
    for (i, (_, gap)) in frames.iter().enumerate() {
        if *gap <= GAP_TOL {
            return Err(Error::GapClosure { qx: p.qx[i / ny], qy: p.qy[i % ny], gap: *gap });
        }
    }
    let f = |ix: usize, iy: usize| &frames[(ix % nx) * ny + (iy % ny)].0;
    let flux: Vec<f64> = (0..nx * ny)
        .into_par_iter()
        .map(|idx| {
            let (ix, iy) = (idx / ny, idx % ny);
            let ux = link(f(ix, iy), f(ix + 1, iy))?;
            let uy = link(f(ix + 1, iy), f(ix + 1, iy + 1))?;
            let ux2 = link(f(ix, iy + 1), f(ix + 1, iy + 1))?;
            let uy2 = link(f(ix, iy), f(ix, iy + 1))?;
            Ok((ux * uy * ux2.conj() * uy2.conj()).arg())
        })
        .collect::<Result<_>>()?;
    let nu = flux.iter().sum::<f64>() / (2.0 * PI);
    if (nu - nu.round()).abs() > 1e-6 {
        return Err(Error::Projector(format!("plaquette sum {nu} is not an integer")));
    }
    Ok(nu.round() as i64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeCount {
    pub nu_edge: i64,
    /// Tr P_A(q_x) on the grid.
    pub traces: Vec<f64>,
    /// (link j → j+1, integer jump subtracted there).
    pub jumps: Vec<(usize, i64)>,
}

/// ν_edge = -∫ (d Tr P_A/dq)_smooth dq from a periodic trace curve. Jumps
/// above 0.5 between neighbours are subtracted at the nearest integer; the
/// remaining increments are the smooth part.
pub fn edge_count_from_traces(traces: &[f64]) -> Result<EdgeCount> {
    let n = traces.len();
    if n < 3 {
        return Err(Error::Shape("trace curve needs at least 3 points".into()));
    }
    let mut smooth = 0.0;
    let mut jumps = Vec::new();
    for j in 0..n {
        let d = traces[(j + 1) % n] - traces[j];
        if d.abs() > JUMP_DETECT {
            let k = d.round();
            if (d - k).abs() > JUMP_INTEGER_TOL {
                return Err(Error::AmbiguousJump { index: j, jump: d });
            }
            jumps.push((j, k as i64));
            smooth += d - k;
        } else {
            smooth += d;
        }
    }
    let nu = -smooth;
    if (nu - nu.round()).abs() > 1e-6 {
        return Err(Error::Projector(format!("smooth trace variation {nu} is not an integer")));
    }
    Ok(EdgeCount { nu_edge: nu.round() as i64, traces: traces.to_vec(), jumps })
}

/// Edge-mode count for region A (indices into the strip basis) of a cylinder
/// projector P(q_x).
pub fn edge_mode_count(p: &SpectralProjector, region: Range<usize>) -> Result<EdgeCount> {
    if p.qy.len() != 1 {
        return Err(Error::Shape("edge count takes a cylinder projector".into()));
    }
    if region.end > p.dim() || region.is_empty() {
        return Err(Error::Shape(format!("region {region:?} outside a strip of {}", p.dim())));
    }
    let traces: Vec<f64> = p.mats.iter().map(|m| region.clone().map(|i| m[[i, i]].re).sum()).collect();
    edge_count_from_traces(&traces)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiDiagonality {
    /// Fitted α in max|P_kl| ~ |k-l|^{-α}; None when the fit is vacuous.
    pub exponent: Option<f64>,
    pub alpha: f64,
    pub passed: bool,
}

/// Fits log max|P_kl| against log|k-l| (distances in sites of `orbitals`
/// Majoranas) over [2, L/4], keeping points above the floor. Fewer than two
/// such points means the entries are already negligible: a vacuous pass.
pub fn quasidiagonality(p: &CMat, orbitals: usize, alpha: f64) -> Result<QuasiDiagonality> {
    let n = p.nrows();
    if orbitals == 0 || n % orbitals != 0 {
        return Err(Error::Shape(format!("{n} modes do not split into sites of {orbitals}")));
    }
    let l = n / orbitals;
    let mut by_dist = vec![0.0f64; l];
    for a in 0..n {
        for b in 0..n {
            let d = (a / orbitals).abs_diff(b / orbitals);
            by_dist[d] = by_dist[d].max(p[[a, b]].norm());
        }
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = (2..=(l / 4).max(2))
        .filter(|&d| d < l && by_dist[d] > QUASI_FLOOR)
        .map(|d| ((d as f64).ln(), by_dist[d].ln()))
        .unzip();
    if xs.len() < 2 {
        return Ok(QuasiDiagonality { exponent: None, alpha, passed: true });
    }
    let (slope, _) = linear_fit(&xs, &ys);
    let exponent = -slope;
    Ok(QuasiDiagonality { exponent: Some(exponent), alpha, passed: exponent >= alpha })
}

/// Quasi-diagonality of every P(q_x) of a cylinder projector; reports the
/// weakest fit.
pub fn cylinder_quasidiagonality(p: &SpectralProjector, orbitals: usize, alpha: f64) -> Result<QuasiDiagonality> {
    let mut worst = QuasiDiagonality { exponent: None, alpha, passed: true };
    for m in &p.mats {
        let q = quasidiagonality(m, orbitals, alpha)?;
        let weaker = match (q.exponent, worst.exponent) {
            (Some(a), Some(b)) => a < b,
            (Some(_), None) => true,
            _ => false,
        };
        if weaker {
            worst = q;
        }
    }
    Ok(worst)
}

/// Both invariants of a lattice model, with the quasi-diagonality check that
/// ν_edge relies on.
#[derive(Debug, Clone)]
pub struct TopologyReport {
    pub nu: i64,
    pub edge: EdgeCount,
    pub quasi: QuasiDiagonality,
}

impl TopologyReport {
    pub fn consistent(&self) -> bool {
        self.nu == self.edge.nu_edge
    }
}

/// ν on an n × n grid and ν_edge on an ly-row cylinder with region A the
/// upper half. The q_x grid starts at `nq` points and is doubled (up to 8×)
/// while a jump in Tr P_A is not yet resolved to an integer.
pub fn model_topology(model: &LatticeModel, n: usize, ly: usize, nq: usize) -> Result<TopologyReport> {
    let nu = chern_number(&SpectralProjector::from_model(model, n, GAP_TOL)?)?;
    let m = model.orbitals();
    let mut grid = nq;
    loop {
        let cyl = SpectralProjector::cylinder(model, ly, grid)?;
        let quasi = cylinder_quasidiagonality(&cyl, m, 1.0)?;
        if !quasi.passed {
            return Err(Error::Projector(format!(
                "P(q_x) is not quasi-diagonal (fitted exponent {:?} < 1)",
                quasi.exponent
            )));
        }
        match edge_mode_count(&cyl, (ly / 2) * m..ly * m) {
            Ok(edge) => return Ok(TopologyReport { nu, edge, quasi }),
            Err(Error::AmbiguousJump { .. }) if grid < 8 * nq => grid *= 2,
            Err(e) => return Err(e),
        }
    }
}

/// Smallest Bogoliubov energy of a model on an n × n grid.
pub fn min_gap(model: &LatticeModel, n: usize) -> Result<f64> {
    let gaps: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (qx, qy) = (2.0 * PI * (idx / n) as f64 / n as f64, 2.0 * PI * (idx % n) as f64 / n as f64);
            let h = model.bloch(qx, qy).mapv(|z| I * z);
            let (vals, _) = eigh_c(&h)?;
            Ok(vals.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min))
        })
        .collect::<Result<_>>()?;
    Ok(gaps.into_iter().fold(f64::INFINITY, f64::min))
}

/// Random nearest-neighbour model with one complex fermion per site, redrawn
/// until its gap on a 40 × 40 grid exceeds `min_gap_required`.
pub fn random_two_band_model<R: Rng + ?Sized>(min_gap_required: f64, rng: &mut R) -> Result<LatticeModel> {
    for _ in 0..1000 {
        let mut model = LatticeModel::new(2)?;
        let mu: f64 = rng.random_range(-3.0..3.0);
        let mut onsite = Mat::zeros((2, 2));
        onsite[[0, 1]] = mu / 2.0;
        model.add_bond((0, 0), &onsite)?;
        for d in [(1, 0), (0, 1), (1, 1)] {
            let scale = if d == (1, 1) { 0.3 } else { 1.0 };
            let t = Mat::from_shape_fn((2, 2), |_| scale * rng.sample::<f64, _>(StandardNormal));
            model.add_bond(d, &t)?;
        }
        if min_gap(&model, 40)? > min_gap_required {
            return Ok(model);
        }
    }
    Err(Error::Projector("no gapped model drawn in 1000 attempts".into()))
}
