//! Real-space Gaussian channels Γ ↦ A + BΓBᵀ.

use ndarray::{s, Axis};
use num_complex::Complex64 as c64;

use crate::error::{Error, Result};
use crate::linalg::{
    antisymmetry_defect, dagger, eig_c, eigh_c, linear_fit, max_abs, orthonormal_columns,
    real_split, spectral_norm, spectral_norm_c, spectral_radius_c, stein_solve_r, to_complex,
    CMat, Mat,
};
use crate::majorana::{CorrelationMatrix, ANTISYMMETRY_TOL};

pub const CPTP_TOL: f64 = 1e-10;
pub const ISOMETRY_TOL: f64 = 1e-10;
pub const DEFAULT_TOL_UNIT: f64 = 1e-9;
pub const LEMMA_FAIL: f64 = 1e-6;
pub const FIXED_POINT_TOL: f64 = 1e-10;
pub const NOISE_FLOOR: f64 = 1e-13;
/// Residuals above the floor needed for a log-slope fit. The fit uses the
/// later half, so at least three points. With r ≈ 0.3 the residual, which
/// decays like r^{2t}, only stays above the floor for about ten steps.
pub const MIN_FIT_POINTS: usize = 6;

/// Affine map on correlation matrices. `b` is `out × in`; `a` is `out × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianChannel {
    a: Mat,
    b: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub antisymmetry_defect: f64,
    /// Largest eigenvalue of ΛᵀΛ minus one.
    pub cptp_excess: f64,
    pub b_norm: f64,
    /// ‖ΛᵀΛ - I‖.
    pub isometry_residual: f64,
    pub isometric: bool,
    pub passed: bool,
}

/// Λ = [[A, B], [-Bᵀ, 0]].
pub fn lambda_matrix(a: &Mat, b: &Mat) -> Mat {
    let (no, ni) = b.dim();
    let mut l = Mat::zeros((no + ni, no + ni));
    l.slice_mut(s![..no, ..no]).assign(a);
    l.slice_mut(s![..no, no..]).assign(b);
    l.slice_mut(s![no.., ..no]).assign(&b.t().mapv(|x| -x));
    l
}

pub fn validate_channel(a: &Mat, b: &Mat) -> Result<ValidationReport> {
    let no = b.nrows();
    if a.dim() != (no, no) {
        return Err(Error::Shape(format!(
            "A is {}×{} but B has {} output rows",
            a.nrows(),
            a.ncols(),
            no
        )));
    }
    let lam = lambda_matrix(a, b);
    let smax = spectral_norm(&lam.view());
    let cptp_excess = smax * smax - 1.0;
    let n = lam.nrows();
    let isometry_residual = spectral_norm(&(lam.t().dot(&lam) - Mat::eye(n)).view());
    let defect = antisymmetry_defect(&a.view());
    Ok(ValidationReport {
        antisymmetry_defect: defect,
        cptp_excess,
        b_norm: spectral_norm(&b.view()),
        isometry_residual,
        isometric: isometry_residual <= ISOMETRY_TOL,
        passed: defect <= ANTISYMMETRY_TOL && cptp_excess <= CPTP_TOL,
    })
}

impl GaussianChannel {
    pub fn new(a: Mat, b: Mat) -> Result<Self> {
        let rep = validate_channel(&a, &b)?;
        if rep.antisymmetry_defect > ANTISYMMETRY_TOL {
            return Err(Error::NotAntisymmetric { defect: rep.antisymmetry_defect });
        }
        if rep.cptp_excess > CPTP_TOL {
            return Err(Error::NotCptp { excess: rep.cptp_excess });
        }
        Ok(Self { a: (&a - &a.t()) * 0.5, b })
    }

    /// Like [`GaussianChannel::new`] but tolerates rounding-level asymmetry in A.
    pub fn new_numeric(a: Mat, b: Mat) -> Result<Self> {
        let defect = antisymmetry_defect(&a.view());
        if defect > 1e-9 {
            return Err(Error::NotAntisymmetric { defect });
        }
        Self::new((&a - &a.t()) * 0.5, b)
    }

    pub fn identity(n_modes: usize) -> Self {
        Self { a: Mat::zeros((n_modes, n_modes)), b: Mat::eye(n_modes) }
    }

    /// Replaces any input by the state `a`.
    pub fn reset(a: &CorrelationMatrix) -> Self {
        let n = a.n_modes();
        Self { a: a.matrix().clone(), b: Mat::zeros((n, n)) }
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn b(&self) -> &Mat {
        &self.b
    }

    pub fn n_out(&self) -> usize {
        self.b.nrows()
    }

    pub fn n_in(&self) -> usize {
        self.b.ncols()
    }

    pub fn report(&self) -> ValidationReport {
        validate_channel(&self.a, &self.b).expect("shapes checked at construction")
    }

    /// `after ∘ self`: (A' + B'AB'ᵀ, B'B).
    pub fn then(&self, after: &GaussianChannel) -> Result<GaussianChannel> {
        if after.n_in() != self.n_out() {
            return Err(Error::Shape("composed channels do not chain".into()));
        }
        let a = &after.a + &after.b.dot(&self.a).dot(&after.b.t());
        let b = after.b.dot(&self.b);
        GaussianChannel::new_numeric(a, b)
    }

    fn step(&self, g: &Mat) -> Mat {
        &self.a + &self.b.dot(g).dot(&self.b.t())
    }

    /// N^t[Γ]. t = 0 is the identity.
    pub fn apply(&self, gamma: &CorrelationMatrix, t: usize) -> Result<CorrelationMatrix> {
        if gamma.n_modes() != self.n_in() || (t > 1 && self.n_in() != self.n_out()) {
            return Err(Error::Shape(format!(
                "channel {}→{} applied {t} times to {} modes",
                self.n_in(),
                self.n_out(),
                gamma.n_modes()
            )));
        }
        let mut g = gamma.matrix().clone();
        for _ in 0..t {
            g = self.step(&g);
        }
        CorrelationMatrix::from_numeric(g)
    }

    /// Acts on the trailing `n_in` modes of a joint correlation matrix and
    /// leaves the leading block untouched: (I ⊕ B) J (I ⊕ B)ᵀ + (0 ⊕ A).
    pub fn apply_to_tail(&self, joint: &Mat) -> Result<Mat> {
        let n = joint.nrows();
        let ni = self.n_in();
        if n < ni {
            return Err(Error::Shape("joint state smaller than channel input".into()));
        }
        let keep = n - ni;
        let no = self.n_out();
        let mut out = Mat::zeros((keep + no, keep + no));
        let jkk = joint.slice(s![..keep, ..keep]);
        let jkv = joint.slice(s![..keep, keep..]);
        let jvv = joint.slice(s![keep.., keep..]);
        out.slice_mut(s![..keep, ..keep]).assign(&jkk);
        let cross = jkv.dot(&self.b.t());
        out.slice_mut(s![..keep, keep..]).assign(&cross);
        out.slice_mut(s![keep.., ..keep]).assign(&cross.t().mapv(|x| -x));
        out.slice_mut(s![keep.., keep..]).assign(&(&self.a + &self.b.dot(&jvv).dot(&self.b.t())));
        Ok(out)
    }
}

/// Preserved/dissipative split of a (possibly complex) channel block.
#[derive(Debug, Clone)]
pub(crate) struct Split {
    pub q_u: CMat,
    pub q_d: CMat,
    pub unit_eigenvalues: Vec<c64>,
    pub lemma_residual: f64,
    pub bb_residual: f64,
    pub orthogonality_residual: f64,
    pub r: f64,
}

/// Classifies eigenvalues of B with |b| ≥ 1 - tol_unit as preserved and
/// checks the structure implied by CPTP: preserved eigenvectors are
/// annihilated by A, fixed by B†B and decoupled from the rest of B.
pub(crate) fn split_modes(a: &CMat, b: &CMat, tol_unit: f64) -> Result<Split> {
    let n = b.nrows();
    let (vals, vecs) = eig_c(b)?;
    let sel: Vec<usize> = (0..n).filter(|&i| vals[i].norm() >= 1.0 - tol_unit).collect();
    let v = vecs.select(Axis(1), &sel);
    let q_u = orthonormal_columns(&v, 1e-8)?;
    if q_u.ncols() != sel.len() {
        return Err(Error::Classification(format!(
            "{} unit-modulus eigenvalues but only {} independent eigenvectors",
            sel.len(),
            q_u.ncols()
        )));
    }
    let comp = CMat::eye(n) - q_u.dot(&dagger(&q_u));
    let (cv, cvecs) = eigh_c(&comp)?;
    let keep: Vec<usize> = (0..n).filter(|&i| cv[i] > 0.5).collect();
    let q_d = cvecs.select(Axis(1), &keep);

    let lemma_residual = spectral_norm_c(&a.dot(&q_u).view());
    let btb = dagger(b).dot(b);
    let bb_residual = spectral_norm_c(&(btb.dot(&q_u) - &q_u).view());
    let orthogonality_residual = spectral_norm_c(&dagger(&q_d).dot(b).dot(&q_u).view())
        .max(spectral_norm_c(&dagger(&q_u).dot(b).dot(&q_d).view()));
    if lemma_residual > LEMMA_FAIL {
        return Err(Error::LemmaViolation { residual: lemma_residual });
    }
    let b_d = dagger(&q_d).dot(b).dot(&q_d);
    let r = spectral_radius_c(&b_d)?;
    Ok(Split {
        q_u,
        q_d,
        unit_eigenvalues: sel.iter().map(|&i| vals[i]).collect(),
        lemma_residual,
        bb_residual,
        orthogonality_residual,
        r,
    })
}

/// Preserved (V_u) and dissipative (V_d) modes of a square real channel.
///
/// In the real bases E_u, E_d: B = E_u U E_uᵀ + E_d B_d E_dᵀ and A = E_d A_d E_dᵀ,
/// up to the reported residuals.
#[derive(Debug, Clone)]
pub struct ModeDecomposition {
    pub p_u: Mat,
    pub p_d: Mat,
    pub basis_u: Mat,
    pub basis_d: Mat,
    pub u: Mat,
    pub a_d: Mat,
    pub b_d: Mat,
    /// Spectral radius of B_d; zero when V_d is empty.
    pub r: f64,
    pub unit_eigenvalues: Vec<c64>,
    /// max ‖A v‖ over preserved v.
    pub lemma_residual: f64,
    /// max ‖BᵀB v - v‖ over preserved v.
    pub bb_residual: f64,
    /// Norm of the off-diagonal blocks of B between V_u and V_d.
    pub orthogonality_residual: f64,
}

impl ModeDecomposition {
    pub fn n_preserved(&self) -> usize {
        self.basis_u.ncols()
    }

    pub fn n_dissipative(&self) -> usize {
        self.basis_d.ncols()
    }
}

pub fn decompose_modes(ch: &GaussianChannel, tol_unit: f64) -> Result<ModeDecomposition> {
    if ch.n_in() != ch.n_out() {
        return Err(Error::Shape("mode decomposition needs a square B".into()));
    }
    let ac = to_complex(&ch.a.view());
    let bc = to_complex(&ch.b.view());
    let split = split_modes(&ac, &bc, tol_unit)?;
    let (eu, ed) = real_split(&split.q_u)?;
    if eu.ncols() != split.q_u.ncols() {
        return Err(Error::Classification("preserved subspace is not real".into()));
    }
    let u = eu.t().dot(&ch.b).dot(&eu);
    let k = u.ncols();
    let u_err = max_abs(&(u.t().dot(&u) - Mat::eye(k)).view());
    if u_err > 1e-8 {
        return Err(Error::Classification(format!("preserved block not orthogonal: {u_err:.3e}")));
    }
    let b_d = ed.t().dot(&ch.b).dot(&ed);
    let a_d = ed.t().dot(&ch.a).dot(&ed);
    Ok(ModeDecomposition {
        p_u: eu.dot(&eu.t()),
        p_d: ed.dot(&ed.t()),
        u,
        a_d: (&a_d - &a_d.t()) * 0.5,
        b_d,
        r: split.r,
        unit_eigenvalues: split.unit_eigenvalues,
        lemma_residual: split.lemma_residual,
        bb_residual: split.bb_residual,
        orthogonality_residual: split.orthogonality_residual,
        basis_u: eu,
        basis_d: ed,
    })
}

/// Dissipative fixed point Γ_d = A_d + B_d Γ_d B_dᵀ, checked to 1e-10.
pub fn dissipative_fixed_point(dec: &ModeDecomposition) -> Result<Mat> {
    let gd = stein_solve_r(&dec.a_d, &dec.b_d)?;
    let gd = (&gd - &gd.t()) * 0.5;
    let res = max_abs(&(&gd - &dec.a_d - dec.b_d.dot(&gd).dot(&dec.b_d.t())).view());
    if res > FIXED_POINT_TOL {
        return Err(Error::FixedPoint { residual: res });
    }
    Ok(gd)
}

/// Steady state in the t = 0 frame: the preserved block of Γ0 is kept and the
/// dissipative block is the unique fixed point.
pub fn steady_state(
    ch: &GaussianChannel,
    dec: &ModeDecomposition,
    gamma0: &CorrelationMatrix,
) -> Result<CorrelationMatrix> {
    steady_state_at(ch, dec, gamma0, 0)
}

/// Steady-state trajectory at time t: preserved block U^t Γ_u U^tᵀ.
pub fn steady_state_at(
    ch: &GaussianChannel,
    dec: &ModeDecomposition,
    gamma0: &CorrelationMatrix,
    t: usize,
) -> Result<CorrelationMatrix> {
    if gamma0.n_modes() != ch.n_in() {
        return Err(Error::Shape("initial state does not match channel".into()));
    }
    let gd = dissipative_fixed_point(dec)?;
    let eu = &dec.basis_u;
    let mut gu = eu.t().dot(gamma0.matrix()).dot(eu);
    for _ in 0..t {
        gu = dec.u.dot(&gu).dot(&dec.u.t());
    }
    let full = eu.dot(&gu).dot(&eu.t()) + dec.basis_d.dot(&gd).dot(&dec.basis_d.t());
    CorrelationMatrix::from_numeric(full)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConvergenceFit {
    /// Residual below the noise floor from the first step on.
    Instant,
    Decay {
        slope: f64,
        intercept: f64,
        r: f64,
        residuals: Vec<f64>,
        /// Inclusive range of t used in the fit.
        window: (usize, usize),
    },
}

impl ConvergenceFit {
    /// slope ≤ -ln(1/r) + slack. Instant convergence always satisfies it.
    pub fn respects_bound(&self, slack: f64) -> bool {
        match self {
            ConvergenceFit::Instant => true,
            ConvergenceFit::Decay { slope, r, .. } => {
                *r <= 0.0 || *slope <= r.ln() + slack
            }
        }
    }
}

/// Fits log ‖N^t[Γ0] - Γ^(s)(t)‖ against t for t = 1..=t_max, using the later
/// half of the points above the 1e-13 noise floor.
pub fn convergence_rate(
    ch: &GaussianChannel,
    gamma0: &CorrelationMatrix,
    t_max: usize,
) -> Result<ConvergenceFit> {
    let dec = decompose_modes(ch, DEFAULT_TOL_UNIT)?;
    let gd = dissipative_fixed_point(&dec)?;
    let eu = &dec.basis_u;
    let dd = dec.basis_d.dot(&gd).dot(&dec.basis_d.t());
    let mut gu = eu.t().dot(gamma0.matrix()).dot(eu);
    let mut g = gamma0.matrix().clone();
    let mut residuals = Vec::with_capacity(t_max);
    for _ in 1..=t_max {
        g = ch.step(&g);
        gu = dec.u.dot(&gu).dot(&dec.u.t());
        let target = eu.dot(&gu).dot(&eu.t()) + &dd;
        residuals.push(spectral_norm(&(&g - &target).view()));
    }
    let above = residuals.iter().take_while(|&&x| x > NOISE_FLOOR).count();
    if above == 0 {
        return Ok(ConvergenceFit::Instant);
    }
    if above < MIN_FIT_POINTS {
        return Err(Error::Fit(format!(
            "only {above} residuals above the noise floor within t ≤ {t_max}"
        )));
    }
    let start = above / 2;
    let ts: Vec<f64> = (start..above).map(|i| (i + 1) as f64).collect();
    let ls: Vec<f64> = (start..above).map(|i| residuals[i].ln()).collect();
    let (slope, intercept) = linear_fit(&ts, &ls);
    Ok(ConvergenceFit::Decay { slope, intercept, r: dec.r, residuals, window: (start + 1, above) })
}
