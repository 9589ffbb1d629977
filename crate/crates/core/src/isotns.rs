//! Gaussian isometric tensors stored as pure-state correlation matrices Λ over
//! their legs, in the fixed leg order (P, V_r, V_t, V_l, V_b).
//!
//! Incoming legs are V_l and V_b; a tensor is isometric when the
//! incoming-incoming blocks of Λ vanish. Contraction of a virtual bond is a
//! projection of its Majorana pairs onto a reference state, which for
//! Gaussian states reduces to a Schur complement.

use std::ops::Range;

use ndarray::{s, Axis};
use ndarray_linalg::Inverse;
use num_complex::Complex64 as c64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    decompose_modes, dissipative_fixed_point, GaussianChannel, ModeDecomposition, DEFAULT_TOL_UNIT, MIN_FIT_POINTS,
    NOISE_FLOOR,
};
use crate::error::{Error, Result};
use crate::linalg::{
    antisymmetry_defect, canonical_pairing, dagger, linear_fit, max_abs, solve_r, spectral_norm, spectral_norm_c,
    to_complex, CMat, Mat,
};
use crate::majorana::{blocks_to_momentum, real_space_blocks, CorrelationMatrix, PURITY_TOL};
use crate::momentum::MomentumChannel;
use crate::sampling::{haar_orthogonal, random_pure_state};

pub const TENSOR_TOL: f64 = 1e-10;
/// Condition number above which the light-like resolvent is treated as singular.
pub const RESOLVENT_COND: f64 = 1e12;
/// Momentum offset used to step around a singular resolvent.
pub const DETOUR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LegKind {
    P,
    #[serde(rename = "V_r")]
    Vr,
    #[serde(rename = "V_t")]
    Vt,
    #[serde(rename = "V_l")]
    Vl,
    #[serde(rename = "V_b")]
    Vb,
}

impl LegKind {
    pub fn incoming(self) -> bool {
        matches!(self, LegKind::Vl | LegKind::Vb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leg {
    #[serde(rename = "name")]
    pub kind: LegKind,
    pub modes: usize,
}

impl Leg {
    pub fn new(kind: LegKind, modes: usize) -> Self {
        Self { kind, modes }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsoTensor {
    legs: Vec<Leg>,
    lambda: Mat,
}

impl IsoTensor {
    /// Legs must appear in canonical order, each kind at most once.
    pub fn new(legs: Vec<Leg>, lambda: Mat) -> Result<Self> {
        if legs.windows(2).any(|w| w[0].kind >= w[1].kind) {
            return Err(Error::Shape("legs must be listed once each in the order P, V_r, V_t, V_l, V_b".into()));
        }
        let total: usize = legs.iter().map(|l| l.modes).sum();
        if lambda.dim() != (total, total) {
            return Err(Error::Shape(format!(
                "legs carry {total} Majoranas but Λ is {}×{}",
                lambda.nrows(),
                lambda.ncols()
            )));
        }
        let defect = antisymmetry_defect(&lambda.view());
        if defect > 1e-9 {
            return Err(Error::NotAntisymmetric { defect });
        }
        let lambda = (&lambda - &lambda.t()) * 0.5;
        Ok(Self { legs, lambda })
    }

    pub fn legs(&self) -> &[Leg] {
        &self.legs
    }

    pub fn lambda(&self) -> &Mat {
        &self.lambda
    }

    pub fn n_modes(&self) -> usize {
        self.lambda.nrows()
    }

    pub fn modes(&self, kind: LegKind) -> usize {
        self.legs.iter().find(|l| l.kind == kind).map_or(0, |l| l.modes)
    }

    /// Index range of a leg inside Λ (empty when absent).
    pub fn range(&self, kind: LegKind) -> Range<usize> {
        let mut off = 0;
        for l in &self.legs {
            if l.kind == kind {
                return off..off + l.modes;
            }
            off += l.modes;
        }
        off..off
    }

    /// Λ_{XY}; a zero block of the right shape when a leg is absent.
    pub fn block(&self, x: LegKind, y: LegKind) -> Mat {
        let (rx, ry) = (self.range(x), self.range(y));
        self.lambda.slice(s![rx, ry]).to_owned()
    }

    pub fn is_mps_layout(&self) -> bool {
        self.legs.iter().all(|l| matches!(l.kind, LegKind::P | LegKind::Vt | LegKind::Vb))
            && self.modes(LegKind::Vt) == self.modes(LegKind::Vb)
            && self.modes(LegKind::Vb) > 0
    }

    pub fn is_lightlike_layout(&self) -> bool {
        let n = self.modes(LegKind::Vr);
        n > 0
            && n == self.modes(LegKind::Vl)
            && self.modes(LegKind::Vt) > 0
            && self.modes(LegKind::Vt) == self.modes(LegKind::Vb)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorReport {
    pub purity_residual: f64,
    /// max |Λ_{XY}| for each pair of incoming legs present.
    pub incoming_residuals: Vec<(LegKind, LegKind, f64)>,
    pub passed: bool,
}

pub fn validate_tensor(t: &IsoTensor) -> TensorReport {
    let n = t.n_modes();
    let purity_residual = max_abs(&(t.lambda.t().dot(&t.lambda) - Mat::eye(n)).view());
    let incoming: Vec<LegKind> = t.legs.iter().filter(|l| l.kind.incoming()).map(|l| l.kind).collect();
    let mut incoming_residuals = Vec::new();
    for (i, &x) in incoming.iter().enumerate() {
        for &y in &incoming[i..] {
            incoming_residuals.push((x, y, max_abs(&t.block(x, y).view())));
        }
    }
    let passed = purity_residual <= TENSOR_TOL && incoming_residuals.iter().all(|r| r.2 <= TENSOR_TOL);
    TensorReport { purity_residual, incoming_residuals, passed }
}

/// Channel N_{V→VP} of an MPS tensor,
/// Γ_V ↦ [[A_P, A_PV], [-A_PVᵀ, A]] + [B_P; B] Γ_V [B_Pᵀ, Bᵀ].
#[derive(Debug, Clone, PartialEq)]
pub struct TensorChannel {
    pub a_p: Mat,
    pub a_pv: Mat,
    pub a: Mat,
    pub b_p: Mat,
    pub b: Mat,
}

impl TensorChannel {
    pub fn n_physical(&self) -> usize {
        self.a_p.nrows()
    }

    /// The whole map from V_b into (P, V_t).
    pub fn full(&self) -> Result<GaussianChannel> {
        let np = self.n_physical();
        let nv = self.a.nrows();
        let mut a = Mat::zeros((np + nv, np + nv));
        a.slice_mut(s![..np, ..np]).assign(&self.a_p);
        a.slice_mut(s![..np, np..]).assign(&self.a_pv);
        a.slice_mut(s![np.., ..np]).assign(&self.a_pv.t().mapv(|x| -x));
        a.slice_mut(s![np.., np..]).assign(&self.a);
        let b = ndarray::concatenate(Axis(0), &[self.b_p.view(), self.b.view()]).expect("matching columns");
        GaussianChannel::new_numeric(a, b)
    }

    /// The virtual-leg dynamics (A, B) with the physical output traced out.
    pub fn virtual_channel(&self) -> Result<GaussianChannel> {
        GaussianChannel::new_numeric(self.a.clone(), self.b.clone())
    }

    /// Γ_P at one step for a given virtual input.
    pub fn physical_block(&self, gamma_v: &Mat) -> Mat {
        &self.a_p + &self.b_p.dot(gamma_v).dot(&self.b_p.t())
    }
}

pub fn channel_from_tensor(t: &IsoTensor) -> Result<TensorChannel> {
    if !t.is_mps_layout() {
        return Err(Error::Shape("channel extraction needs the MPS layout (P, V_t, V_b) with |V_t| = |V_b|".into()));
    }
    let rep = validate_tensor(t);
    if !rep.passed {
        let worst = rep.incoming_residuals.iter().map(|r| r.2).fold(rep.purity_residual, f64::max);
        return Err(Error::NotIsometric(format!("tensor fails validation (residual {worst:.3e})")));
    }
    use LegKind::*;
    Ok(TensorChannel {
        a_p: t.block(P, P),
        a_pv: t.block(P, Vt),
        a: t.block(Vt, Vt),
        b_p: t.block(P, Vb),
        b: t.block(Vt, Vb),
    })
}

/// Purifies a CPTP channel into an isometric tensor. The first `n_phys`
/// outputs become physical, the rest V_t; the environment needed for the
/// purification is appended to the front of the physical leg, one pair per
/// non-unit singular pair of Λ = [[A, B], [-Bᵀ, 0]].
pub fn dilate(ch: &GaussianChannel, n_phys: usize) -> Result<IsoTensor> {
    let no = ch.n_out();
    let ni = ch.n_in();
    if n_phys > no || no - n_phys != ni {
        return Err(Error::Shape(format!("{no} outputs cannot split into {n_phys} physical plus {ni} virtual")));
    }
    let m = crate::channel::lambda_matrix(ch.a(), ch.b());
    let (o, lambdas) = canonical_pairing(&m)?;
    let mixed: Vec<usize> = (0..lambdas.len()).filter(|&j| lambdas[j] < 1.0 - 1e-12).collect();
    let ne = 2 * mixed.len();
    let n = ne + no + ni;
    let mut lam = Mat::zeros((n, n));
    lam.slice_mut(s![ne.., ne..]).assign(&m);
    // Each mixed pair λJ is completed by [[-λJ, sI], [-sI, λJ]] with s = √(1-λ²).
    for (e, &j) in mixed.iter().enumerate() {
        let l = lambdas[j].min(1.0);
        let s_ = (1.0 - l * l).sqrt();
        lam[[2 * e, 2 * e + 1]] = -l;
        lam[[2 * e + 1, 2 * e]] = l;
        for c in 0..2 {
            let col = o.column(2 * j + c);
            for i in 0..no + ni {
                lam[[2 * e + c, ne + i]] = s_ * col[i];
                lam[[ne + i, 2 * e + c]] = -s_ * col[i];
            }
        }
    }
    let mut legs = Vec::new();
    if ne + n_phys > 0 {
        legs.push(Leg::new(LegKind::P, ne + n_phys));
    }
    legs.push(Leg::new(LegKind::Vt, ni));
    legs.push(Leg::new(LegKind::Vb, ni));
    IsoTensor::new(legs, lam)
}

/// Random isometric tensor: Λ = [[A, B], [-Bᵀ, 0]] over (outgoing, incoming)
/// with B the first columns of a Haar orthogonal matrix and A a random pure
/// state on the orthogonal complement, then permuted into leg order.
pub fn random_isometric_tensor<R: Rng + ?Sized>(legs: &[Leg], rng: &mut R) -> Result<IsoTensor> {
    let n_in: usize = legs.iter().filter(|l| l.kind.incoming()).map(|l| l.modes).sum();
    let n_out: usize = legs.iter().filter(|l| !l.kind.incoming()).map(|l| l.modes).sum();
    if n_out < n_in || (n_out - n_in) % 2 != 0 {
        return Err(Error::Shape(format!(
            "{n_out} outgoing and {n_in} incoming Majoranas admit no isometric tensor"
        )));
    }
    let o = haar_orthogonal(n_out, rng);
    let b = o.slice(s![.., ..n_in]).to_owned();
    let perp = o.slice(s![.., n_in..]).to_owned();
    let g = random_pure_state(n_out - n_in, rng);
    let a = perp.dot(g.matrix()).dot(&perp.t());
    let m = crate::channel::lambda_matrix(&a, &b);
    // Position of each leg mode in the (outgoing, incoming) ordering.
    let mut perm = Vec::with_capacity(n_out + n_in);
    let (mut out_off, mut in_off) = (0, n_out);
    for l in legs {
        let off = if l.kind.incoming() { &mut in_off } else { &mut out_off };
        perm.extend(*off..*off + l.modes);
        *off += l.modes;
    }
    let lam = m.select(Axis(0), &perm).select(Axis(1), &perm);
    IsoTensor::new(legs.to_vec(), lam)
}

fn inv_c(m: &CMat) -> Result<CMat> {
    Ok(m.inv()?)
}

/// A_k and B_k of the light-like channel at one momentum.
#[derive(Debug, Clone)]
pub struct LightlikeBlocks {
    pub a: CMat,
    pub b: CMat,
    /// The resolvent was near-singular at k and the value is the mean over k ± δ.
    pub detoured: bool,
}

fn lightlike_raw(t: &IsoTensor, k: f64) -> Result<(CMat, CMat, f64)> {
    use LegKind::*;
    let n = t.modes(Vr);
    let c = |x, y| to_complex(&t.block(x, y).view());
    let rl_t = c(Vr, Vl).t().to_owned();
    let res = CMat::eye(n).mapv(|z| z * c64::from_polar(1.0, -k)) - rl_t;
    let sv = {
        use ndarray_linalg::SVD;
        let (_, s, _) = res.svd(false, false)?;
        s
    };
    let cond = sv[0] / sv[sv.len() - 1].max(f64::MIN_POSITIVE);
    let q = inv_c(&res)?;
    let qd = dagger(&q);
    let w = qd.dot(&c(Vr, Vr)).dot(&q);
    let tl = c(Vt, Vl);
    let tr = c(Vt, Vr);
    let br = c(Vb, Vr);
    let a = c(Vt, Vt) + tl.dot(&w).dot(&tl.t()) + tr.dot(&q).dot(&tl.t()) - tl.dot(&qd).dot(&tr.t());
    let b = c(Vt, Vb) - tl.dot(&qd).dot(&br.t());
    Ok((a, b, cond))
}

/// Closed-form A_k = Λ_{V_t,k}, B_k = Λ_{V_tV_b,k} with
/// Q_k = (e^{-ik} - Λ_{V_rV_l}ᵀ)⁻¹ and W_k = Q_k† Λ_{V_r} Q_k.
pub fn lightlike_channel(t: &IsoTensor, k: f64) -> Result<LightlikeBlocks> {
    if !t.is_lightlike_layout() {
        return Err(Error::Shape("light-like contraction needs |V_r| = |V_l| > 0 and |V_t| = |V_b| > 0".into()));
    }
    let (a, b, cond) = lightlike_raw(t, k)?;
    if cond.is_finite() && cond < RESOLVENT_COND {
        return Ok(LightlikeBlocks { a, b, detoured: false });
    }
    let (a1, b1, _) = lightlike_raw(t, k + DETOUR)?;
    let (a2, b2, _) = lightlike_raw(t, k - DETOUR)?;
    Ok(LightlikeBlocks { a: (a1 + a2).mapv(|z| z * 0.5), b: (b1 + b2).mapv(|z| z * 0.5), detoured: true })
}

/// Light-like channel sampled on L momenta, with the indices that needed a detour.
pub fn lightlike_momentum_channel(t: &IsoTensor, l: usize) -> Result<(MomentumChannel, Vec<usize>)> {
    let grid = crate::majorana::uniform_grid(l);
    let blocks: Vec<LightlikeBlocks> = grid.iter().map(|&k| lightlike_channel(t, k)).collect::<Result<_>>()?;
    let detours = (0..l).filter(|&j| blocks[j].detoured).collect();
    let (a, b) = blocks.into_iter().map(|x| (x.a, x.b)).unzip();
    Ok((MomentumChannel::new(a, b)?, detours))
}

/// Brute-force contraction of a ring of `n` copies: every V_r of cell x-1 is
/// projected with V_l of cell x onto the reference pairing ⟨i c_r c_l⟩ = 1, and
/// the (V_t, V_b) correlations follow from one Schur complement. Returns the
/// momentum blocks (Λ_{V_t,k}, Λ_{V_tV_b,k}) on the n-point grid.
pub fn ring_contraction(t: &IsoTensor, n: usize) -> Result<Vec<(CMat, CMat)>> {
    use LegKind::*;
    if !t.is_lightlike_layout() || n < 2 {
        return Err(Error::Shape("ring contraction needs the light-like layout and at least 2 cells".into()));
    }
    let (nr, nt) = (t.modes(Vr), t.modes(Vt));
    let nc = 2 * nr; // per cell: V_r then V_l
    let no = 2 * nt; // per cell: V_t then V_b
    let (r, l, tt, b) = (t.range(Vr), t.range(Vl), t.range(Vt), t.range(Vb));
    let c_idx: Vec<usize> = r.clone().chain(l.clone()).collect();
    let o_idx: Vec<usize> = tt.clone().chain(b.clone()).collect();
    let lam_c = t.lambda.select(Axis(0), &c_idx).select(Axis(1), &c_idx);
    let lam_o = t.lambda.select(Axis(0), &o_idx).select(Axis(1), &o_idx);
    let lam_oc = t.lambda.select(Axis(0), &o_idx).select(Axis(1), &c_idx);

    let mut m = Mat::zeros((n * nc, n * nc));
    let mut big_o = Mat::zeros((n * no, n * no));
    let mut big_oc = Mat::zeros((n * no, n * nc));
    for x in 0..n {
        m.slice_mut(s![x * nc..(x + 1) * nc, x * nc..(x + 1) * nc]).assign(&lam_c);
        big_o.slice_mut(s![x * no..(x + 1) * no, x * no..(x + 1) * no]).assign(&lam_o);
        big_oc.slice_mut(s![x * no..(x + 1) * no, x * nc..(x + 1) * nc]).assign(&lam_oc);
    }
    for x in 0..n {
        let prev = (x + n - 1) % n;
        for j in 0..nr {
            let ri = prev * nc + j;
            let li = x * nc + nr + j;
            m[[ri, li]] -= 1.0;
            m[[li, ri]] += 1.0;
        }
    }
    // X = Λ_OC M⁻¹ Λ_OCᵀ, column by column through the layout-safe solver.
    let rhs = big_oc.t().to_owned();
    let mut sol = Mat::zeros(rhs.dim());
    for j in 0..rhs.ncols() {
        let col = solve_r(&m, &rhs.column(j).to_owned())?;
        sol.column_mut(j).assign(&col);
    }
    let out = &big_o + &big_oc.dot(&sol);

    let t_sel: Vec<usize> = (0..n).flat_map(|x| x * no..x * no + nt).collect();
    let b_sel: Vec<usize> = (0..n).flat_map(|x| x * no + nt..(x + 1) * no).collect();
    let at = out.select(Axis(0), &t_sel).select(Axis(1), &t_sel);
    let bt = out.select(Axis(0), &t_sel).select(Axis(1), &b_sel);
    let ak = blocks_to_momentum(&real_space_blocks(&at, nt)?);
    let bk = blocks_to_momentum(&real_space_blocks(&bt, nt)?);
    Ok(ak.into_iter().zip(bk).collect())
}

/// Largest deviation between the closed form and the ring contraction over the n-point grid.
pub fn lightlike_oracle_mismatch(t: &IsoTensor, n: usize) -> Result<f64> {
    let ring = ring_contraction(t, n)?;
    let grid = crate::majorana::uniform_grid(n);
    let mut worst = 0.0f64;
    for (j, (ra, rb)) in ring.iter().enumerate() {
        let cf = lightlike_channel(t, grid[j])?;
        worst = worst.max(spectral_norm_c(&(&cf.a - ra).view()));
        worst = worst.max(spectral_norm_c(&(&cf.b - rb).view()));
    }
    Ok(worst)
}

/// Physical-block difference between two bottom boundaries as a function of depth.
#[derive(Debug, Clone)]
pub struct BoundaryCurve {
    /// diff[y-1] = ‖Γ_P(y; Γ1) - Γ_P(y; Γ2)‖ for y = 1..=y_max.
    pub diff: Vec<f64>,
    pub r: f64,
    pub n_preserved: usize,
    /// Fitted log-slope; None when the curve reaches the noise floor too early to fit.
    pub slope: Option<f64>,
}

impl BoundaryCurve {
    /// slope ≤ -ln(1/r) + slack, or the curve is below the floor throughout.
    pub fn respects_bound(&self, slack: f64) -> bool {
        match self.slope {
            None => self.diff.iter().all(|&d| d <= NOISE_FLOOR) || self.n_preserved > 0,
            Some(s) => self.r <= 0.0 || s <= self.r.ln() + slack,
        }
    }

    /// Preserved modes keep boundary information alive, so the curve levels off.
    pub fn plateaus(&self) -> bool {
        self.n_preserved > 0
    }
}

pub fn boundary_independence(
    t: &IsoTensor,
    gamma1: &CorrelationMatrix,
    gamma2: &CorrelationMatrix,
    y_max: usize,
) -> Result<BoundaryCurve> {
    let tc = channel_from_tensor(t)?;
    let nv = tc.a.nrows();
    if gamma1.n_modes() != nv || gamma2.n_modes() != nv {
        return Err(Error::Shape(format!("boundaries must live on the {nv} V_b Majoranas")));
    }
    let vc = tc.virtual_channel()?;
    let dec = decompose_modes(&vc, DEFAULT_TOL_UNIT)?;
    let (mut g1, mut g2) = (gamma1.matrix().clone(), gamma2.matrix().clone());
    let mut diff = Vec::with_capacity(y_max);
    for _ in 0..y_max {
        let d = tc.b_p.dot(&(&g1 - &g2)).dot(&tc.b_p.t());
        diff.push(spectral_norm(&d.view()));
        g1 = vc.a() + &vc.b().dot(&g1).dot(&vc.b().t());
        g2 = vc.a() + &vc.b().dot(&g2).dot(&vc.b().t());
    }
    let above = diff.iter().take_while(|&&x| x > NOISE_FLOOR).count();
    let slope = if above >= MIN_FIT_POINTS && dec.n_preserved() == 0 {
        let start = above / 2;
        let ys: Vec<f64> = (start..above).map(|i| (i + 1) as f64).collect();
        let ls: Vec<f64> = (start..above).map(|i| diff[i].ln()).collect();
        Some(linear_fit(&ys, &ls).0)
    } else {
        None
    };
    Ok(BoundaryCurve { diff, r: dec.r, n_preserved: dec.n_preserved(), slope })
}

/// Γ_{P,bulk} = A_P + B_P E_d Γ_d E_dᵀ B_Pᵀ: the physical block deep in the
/// bulk when the preserved modes start maximally mixed.
pub fn bulk_physical_correlation(tc: &TensorChannel, dec: &ModeDecomposition) -> Result<Mat> {
    let gd = dissipative_fixed_point(dec)?;
    let v = dec.basis_d.dot(&gd).dot(&dec.basis_d.t());
    Ok(tc.physical_block(&v))
}

/// Correlation matrix over (P_1, …, P_y, V_t) after stacking `y` tensors on a
/// bottom boundary state.
pub fn contract_mps(t: &IsoTensor, boundary: &CorrelationMatrix, y: usize) -> Result<CorrelationMatrix> {
    let full = channel_from_tensor(t)?.full()?;
    if boundary.n_modes() != full.n_in() {
        return Err(Error::Shape("boundary does not match V_b".into()));
    }
    let mut joint = boundary.matrix().clone();
    for _ in 0..y {
        joint = full.apply_to_tail(&joint)?;
    }
    let out = CorrelationMatrix::from_numeric(joint)?;
    if boundary.is_pure() && out.purity_residual() > PURITY_TOL {
        return Err(Error::Unphysical { excess: out.purity_residual() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_c;
    use crate::sampling::random_state;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mps_legs(np: usize, nv: usize) -> Vec<Leg> {
        vec![Leg::new(LegKind::P, np), Leg::new(LegKind::Vt, nv), Leg::new(LegKind::Vb, nv)]
    }

    fn ll_legs(np: usize, nr: usize, nt: usize) -> Vec<Leg> {
        use LegKind::*;
        vec![Leg::new(P, np), Leg::new(Vr, nr), Leg::new(Vt, nt), Leg::new(Vl, nr), Leg::new(Vb, nt)]
    }

    #[test]
    fn swap_tensor_passes() {
        // P copies V_b, V_t is a fresh pair.
        let mut lam = Mat::zeros((6, 6));
        let pairs = [(0, 4), (1, 5), (2, 3)];
        for (i, j) in pairs {
            lam[[i, j]] = 1.0;
            lam[[j, i]] = -1.0;
        }
        let t = IsoTensor::new(mps_legs(2, 2), lam).unwrap();
        assert!(validate_tensor(&t).passed);
        let tc = channel_from_tensor(&t).unwrap();
        assert!(max_abs(&tc.b.view()) == 0.0);
        assert!(tc.full().unwrap().report().isometric);
    }

    #[test]
    fn nonzero_incoming_block_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_pure_state(6, &mut rng);
        let t = IsoTensor::new(mps_legs(2, 2), g.into_inner()).unwrap();
        let rep = validate_tensor(&t);
        assert!(rep.purity_residual < 1e-10);
        assert!(!rep.passed);
        assert!(channel_from_tensor(&t).is_err());
    }

    #[test]
    fn unitary_tensor_without_physical_leg() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_isometric_tensor(&[Leg::new(LegKind::Vt, 4), Leg::new(LegKind::Vb, 4)], &mut rng).unwrap();
        let tc = channel_from_tensor(&t).unwrap();
        assert!(max_abs(&tc.a.view()) < 1e-12);
        assert!(max_abs(&(tc.b.t().dot(&tc.b) - Mat::eye(4)).view()) < 1e-12);
    }

    #[test]
    fn random_tensors_give_valid_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let t = random_isometric_tensor(&mps_legs(2, 4), &mut rng).unwrap();
            assert!(validate_tensor(&t).passed);
            let tc = channel_from_tensor(&t).unwrap();
            let full = tc.full().unwrap();
            let rep = full.report();
            assert!(rep.passed && rep.isometric);
            assert!(tc.virtual_channel().unwrap().report().passed);
        }
    }

    #[test]
    fn dilation_reproduces_two_step_physics() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let t = random_isometric_tensor(&mps_legs(2, 4), &mut rng).unwrap();
            let tc = channel_from_tensor(&t).unwrap();
            // Dilating the virtual channel adds an environment but keeps the V dynamics.
            let d = dilate(&tc.virtual_channel().unwrap(), 0).unwrap();
            assert!(validate_tensor(&d).passed);
            let dc = channel_from_tensor(&d).unwrap();
            assert!(max_abs(&(&dc.a - &tc.a).view()) < 1e-10);
            assert!(max_abs(&(&dc.b - &tc.b).view()) < 1e-10);
            // Dilating the full channel keeps the physical leg as well.
            let d = dilate(&tc.full().unwrap(), 2).unwrap();
            assert_eq!(d.modes(LegKind::P), 2);
            let g0 = random_state(4, &mut rng);
            let s1 = contract_mps(&t, &g0, 2).unwrap();
            let s2 = contract_mps(&d, &g0, 2).unwrap();
            assert!(max_abs(&(s1.matrix() - s2.matrix()).view()) < 1e-10);
        }
    }

    #[test]
    fn decoupled_resolvent() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let t = random_isometric_tensor(&ll_legs(2, 2, 2), &mut rng).unwrap();
        let mut lam = t.lambda().clone();
        let (r, l) = (t.range(LegKind::Vr), t.range(LegKind::Vl));
        lam.slice_mut(s![r.clone(), l.clone()]).fill(0.0);
        lam.slice_mut(s![l, r]).fill(0.0);
        // Only the Q_k identity is checked here, so Λ need not stay pure.
        let t0 = IsoTensor::new(t.legs().to_vec(), lam).unwrap();
        let k = 0.7;
        let res = CMat::eye(2).mapv(|z| z * c64::from_polar(1.0, -k));
        let q = inv_c(&res).unwrap();
        assert!(max_abs_c(&(&q - &CMat::eye(2).mapv(|z| z * c64::from_polar(1.0, k))).view()) < 1e-14);
        assert!(lightlike_channel(&t0, k).is_ok());
    }

    #[test]
    fn lightlike_matches_ring_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let t = random_isometric_tensor(&ll_legs(2, 2, 2), &mut rng).unwrap();
            let mismatch = lightlike_oracle_mismatch(&t, 6).unwrap();
            assert!(mismatch < 1e-8, "{mismatch}");
        }
    }

    #[test]
    fn lightlike_is_real_and_cptp() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = random_isometric_tensor(&ll_legs(2, 2, 4), &mut rng).unwrap();
        let k = 1.1;
        let p = lightlike_channel(&t, k).unwrap();
        let m = lightlike_channel(&t, -k).unwrap();
        assert!(max_abs_c(&(&p.a.mapv(|z| z.conj()) - &m.a).view()) < 1e-12);
        assert!(max_abs_c(&(&p.b.mapv(|z| z.conj()) - &m.b).view()) < 1e-12);
        assert!(crate::momentum::cptp_excess_k(&p.a, &p.b) < 1e-10);
    }

    #[test]
    fn decoupled_legs_give_flat_channel() {
        use LegKind::*;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // l/r swap into each other, t/b form their own isometric tensor.
        let inner = random_isometric_tensor(&mps_legs(2, 2), &mut rng).unwrap();
        let legs = ll_legs(2, 2, 2);
        let mut t = IsoTensor::new(legs.clone(), Mat::zeros((10, 10))).unwrap();
        let mut lam = Mat::zeros((10, 10));
        let map = [t.range(P), t.range(Vt), t.range(Vb)];
        let src = [inner.range(P), inner.range(Vt), inner.range(Vb)];
        for (a, sa) in map.iter().zip(&src) {
            for (b, sb) in map.iter().zip(&src) {
                lam.slice_mut(s![a.clone(), b.clone()]).assign(&inner.lambda().slice(s![sa.clone(), sb.clone()]));
            }
        }
        let (r, l) = (t.range(Vr), t.range(Vl));
        for j in 0..2 {
            lam[[r.start + j, l.start + j]] = 1.0;
            lam[[l.start + j, r.start + j]] = -1.0;
        }
        t = IsoTensor::new(legs, lam).unwrap();
        assert!(validate_tensor(&t).passed);
        let x = lightlike_channel(&t, 0.3).unwrap();
        let y = lightlike_channel(&t, 2.9).unwrap();
        assert!(max_abs_c(&(&x.a - &y.a).view()) < 1e-12);
        assert!(max_abs_c(&(&x.b - &y.b).view()) < 1e-12);
    }

    #[test]
    fn identical_boundaries_give_zero_curve() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let t = random_isometric_tensor(&mps_legs(2, 4), &mut rng).unwrap();
        let g = random_state(4, &mut rng);
        let c = boundary_independence(&t, &g, &g, 20).unwrap();
        assert!(c.diff.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn boundary_decay_respects_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = random_isometric_tensor(&mps_legs(2, 4), &mut rng).unwrap();
        let g1 = random_pure_state(4, &mut rng);
        let g2 = random_pure_state(4, &mut rng);
        let c = boundary_independence(&t, &g1, &g2, 400).unwrap();
        assert!(c.r < 1.0);
        assert!(c.respects_bound(0.1), "slope {:?} r {}", c.slope, c.r);
    }

    #[test]
    fn bulk_block_from_mixed_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let t = random_isometric_tensor(&mps_legs(2, 4), &mut rng).unwrap();
        let tc = channel_from_tensor(&t).unwrap();
        let dec = decompose_modes(&tc.virtual_channel().unwrap(), DEFAULT_TOL_UNIT).unwrap();
        let bulk = bulk_physical_correlation(&tc, &dec).unwrap();
        let y = (5.0 / (1.0 / dec.r).ln()).ceil() as usize + 40;
        let vc = tc.virtual_channel().unwrap();
        let gv = vc.apply(&CorrelationMatrix::zeros(4), y - 1).unwrap();
        assert!(max_abs(&(tc.physical_block(gv.matrix()) - bulk).view()) < 1e-8);
    }
}
