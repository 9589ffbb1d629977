//! Brute-force state-vector oracle for small sequential circuits and
//! Majorana operators.
//!
//! Qudits are ordered big-endian: the L system (virtual) sites first, then one
//! environment qudit per gate in creation order, all starting in |0⟩. The
//! total dimension is capped at 3^10.

use std::ops::Range;

use ndarray::{s, Array1, Axis};
use num_complex::Complex64 as c64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{dagger, eigh_c, max_abs_c, CMat, Mat};
use crate::majorana::{entanglement_spectrum, many_body_spectrum, CorrelationMatrix};
use crate::sampling::haar_unitary;

pub const MAX_DIM: usize = 59_049;
pub const MAX_SITES: usize = 6;
pub const MAX_QUDIT: usize = 3;
pub const MAX_STEPS: usize = 4;
pub const UNITARITY_TOL: f64 = 1e-12;
pub const COMMUTATION_TOL: f64 = 1e-10;

/// A unitary on (site x, site x+1, its own environment qudit).
#[derive(Debug, Clone)]
pub struct Gate {
    pub site: usize,
    pub unitary: CMat,
}

#[derive(Debug, Clone)]
pub struct TinyCircuit {
    l: usize,
    d: usize,
    steps: Vec<Vec<Gate>>,
}

fn unitarity_defect(u: &CMat) -> f64 {
    let n = u.nrows();
    max_abs_c(&(dagger(u).dot(u) - CMat::eye(n)).view())
}

impl TinyCircuit {
    pub fn new(l: usize, d: usize, steps: Vec<Vec<Gate>>) -> Result<Self> {
        if !(2..=MAX_SITES).contains(&l) || !(2..=MAX_QUDIT).contains(&d) || steps.len() > MAX_STEPS {
            return Err(Error::OracleLimit(format!(
                "L = {l}, d = {d}, T = {} outside L ≤ {MAX_SITES}, d ≤ {MAX_QUDIT}, T ≤ {MAX_STEPS}",
                steps.len()
            )));
        }
        let n_gates: usize = steps.iter().map(Vec::len).sum();
        let dim = (d as u64).checked_pow((l + n_gates) as u32).unwrap_or(u64::MAX);
        if dim > MAX_DIM as u64 {
            return Err(Error::OracleLimit(format!("dense dimension {d}^{} exceeds 3^10", l + n_gates)));
        }
        for g in steps.iter().flatten() {
            if g.site + 1 >= l || g.unitary.dim() != (d * d * d, d * d * d) {
                return Err(Error::Shape(format!("gate at site {} does not fit", g.site)));
            }
            let defect = unitarity_defect(&g.unitary);
            if defect > UNITARITY_TOL {
                return Err(Error::NotIsometric(format!("gate unitarity defect {defect:.3e}")));
            }
        }
        let c = Self { l, d, steps };
        c.check_commuting()?;
        Ok(c)
    }

    pub fn sites(&self) -> usize {
        self.l
    }

    pub fn qudit_dim(&self) -> usize {
        self.d
    }

    pub fn steps(&self) -> &[Vec<Gate>] {
        &self.steps
    }

    pub fn n_gates(&self) -> usize {
        self.steps.iter().map(Vec::len).sum()
    }

    fn n_qudits(&self) -> usize {
        self.l + self.n_gates()
    }

    /// Environment qudits created by steps before `t` (exclusive).
    fn env_range(&self, t: usize) -> Range<usize> {
        let n: usize = self.steps[..t].iter().map(Vec::len).sum();
        self.l..self.l + n
    }

    fn check_commuting(&self) -> Result<()> {
        let d = self.d;
        for (t, step) in self.steps.iter().enumerate() {
            for (i, g1) in step.iter().enumerate() {
                for g2 in &step[i + 1..] {
                    // Joint support: the union of sites plus both environments.
                    let mut sites: Vec<usize> = vec![g1.site, g1.site + 1, g2.site, g2.site + 1];
                    sites.sort_unstable();
                    sites.dedup();
                    if sites.len() == 4 {
                        continue;
                    }
                    let n = sites.len() + 2;
                    let dim = d.pow(n as u32);
                    let pos = |s: usize| sites.iter().position(|&x| x == s).unwrap();
                    let p1 = [pos(g1.site), pos(g1.site + 1), sites.len()];
                    let p2 = [pos(g2.site), pos(g2.site + 1), sites.len() + 1];
                    let m1 = embed(&g1.unitary, &p1, n, d, dim);
                    let m2 = embed(&g2.unitary, &p2, n, d, dim);
                    let residual = max_abs_c(&(m1.dot(&m2) - m2.dot(&m1)).view());
                    if residual > COMMUTATION_TOL {
                        return Err(Error::NonCommuting { step: t, residual });
                    }
                }
            }
        }
        Ok(())
    }
}

fn digits(mut idx: usize, n: usize, d: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for q in (0..n).rev() {
        out[q] = idx % d;
        idx /= d;
    }
    out
}

fn embed(u: &CMat, pos: &[usize; 3], n: usize, d: usize, dim: usize) -> CMat {
    let mut m = CMat::zeros((dim, dim));
    for col in 0..dim {
        let dg = digits(col, n, d);
        let local = (dg[pos[0]] * d + dg[pos[1]]) * d + dg[pos[2]];
        for out_local in 0..d * d * d {
            let amp = u[[out_local, local]];
            if amp == c64::new(0.0, 0.0) {
                continue;
            }
            let mut od = dg.clone();
            od[pos[0]] = out_local / (d * d);
            od[pos[1]] = (out_local / d) % d;
            od[pos[2]] = out_local % d;
            let row = od.iter().fold(0, |acc, &x| acc * d + x);
            m[[row, col]] += amp;
        }
    }
    m
}

/// Applies a three-qudit unitary to positions `pos` of a state vector.
fn apply_gate(psi: &mut Array1<c64>, u: &CMat, pos: [usize; 3], n: usize, d: usize) {
    let stride = |q: usize| d.pow((n - 1 - q) as u32);
    let st = [stride(pos[0]), stride(pos[1]), stride(pos[2])];
    let local_dim = d * d * d;
    let offsets: Vec<usize> = (0..local_dim)
        .map(|loc| (loc / (d * d)) * st[0] + ((loc / d) % d) * st[1] + (loc % d) * st[2])
        .collect();
    let mut buf = vec![c64::new(0.0, 0.0); local_dim];
    for base in 0..psi.len() {
        let dg = [(base / st[0]) % d, (base / st[1]) % d, (base / st[2]) % d];
        if dg != [0, 0, 0] {
            continue;
        }
        for (b, &o) in buf.iter_mut().zip(&offsets) {
            *b = psi[base + o];
        }
        for (row, &o) in offsets.iter().enumerate() {
            let mut acc = c64::new(0.0, 0.0);
            for (col, &b) in buf.iter().enumerate() {
                acc += u[[row, col]] * b;
            }
            psi[base + o] = acc;
        }
    }
}

/// ρ over a contiguous block of qudits of a pure state.
pub fn reduced_density(psi: &Array1<c64>, n: usize, d: usize, keep: Range<usize>) -> CMat {
    let left = d.pow(keep.start as u32);
    let mid = d.pow((keep.end - keep.start) as u32);
    let right = d.pow((n - keep.end) as u32);
    let t = psi.view().into_shape_with_order((left, mid, right)).expect("state size");
    let mut rho = CMat::zeros((mid, mid));
    for a in 0..left {
        let blk = t.index_axis(Axis(0), a);
        rho = rho + blk.dot(&blk.t().mapv(|z| z.conj()));
    }
    rho
}

#[derive(Debug, Clone)]
pub struct SequentialRun {
    /// Final pure state on all qudits.
    pub state: Array1<c64>,
    /// ρ_V(t) for t = 0..=T.
    pub rho_v: Vec<CMat>,
}

/// Runs the circuit on `input` (a pure state of the L system sites) with every
/// environment in |0⟩.
pub fn simulate_sequential(c: &TinyCircuit, input: &Array1<c64>) -> Result<SequentialRun> {
    let (l, d) = (c.l, c.d);
    if input.len() != d.pow(l as u32) {
        return Err(Error::Shape(format!("input has {} amplitudes, expected {}", input.len(), d.pow(l as u32))));
    }
    let n = c.n_qudits();
    let env_dim = d.pow((n - l) as u32);
    let mut psi = Array1::zeros(input.len() * env_dim);
    for (i, &a) in input.iter().enumerate() {
        psi[i * env_dim] = a;
    }
    let mut rho_v = vec![reduced_density(&psi, n, d, 0..l)];
    let mut env = l;
    for step in &c.steps {
        for g in step {
            apply_gate(&mut psi, &g.unitary, [g.site, g.site + 1, env], n, d);
            env += 1;
        }
        rho_v.push(reduced_density(&psi, n, d, 0..l));
    }
    Ok(SequentialRun { state: psi, rho_v })
}

fn sorted_spectrum(rho: &CMat) -> Result<Vec<f64>> {
    let (vals, _) = eigh_c(rho)?;
    let mut v = vals.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    Ok(v)
}

fn spectrum_mismatch(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| (a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct IsospectralReport {
    /// max |spec ρ_A - spec ρ_V(t0)|, sorted and zero-padded.
    pub mismatch: f64,
    /// Same for ρ_B, the legs above t0 together with the final virtual state.
    pub mismatch_b: f64,
    pub spectrum_v: Vec<f64>,
}

/// Compares the environment legs of the first t0 steps after the full circuit
/// with the channel state ρ_V(t0).
pub fn isospectral_check(c: &TinyCircuit, input: &Array1<c64>, t0: usize) -> Result<IsospectralReport> {
    if t0 > c.steps.len() {
        return Err(Error::Shape(format!("t0 = {t0} exceeds {} steps", c.steps.len())));
    }
    let run = simulate_sequential(c, input)?;
    let n = c.n_qudits();
    let a = c.env_range(t0);
    let rho_a = reduced_density(&run.state, n, c.d, a.clone());
    let spec_a = sorted_spectrum(&rho_a)?;
    let spec_v = sorted_spectrum(&run.rho_v[t0])?;
    // B is everything but A; its spectrum equals A's for a pure total state,
    // computed here from the complement as an independent check.
    let spec_b = if a.is_empty() {
        vec![1.0]
    } else {
        let perm: Vec<usize> = (0..n).filter(|q| !a.contains(q)).chain(a.clone()).collect();
        let psi_b = permute_qudits(&run.state, &perm, n, c.d);
        sorted_spectrum(&reduced_density(&psi_b, n, c.d, 0..n - a.len()))?
    };
    let spec_a_full = if a.is_empty() { vec![1.0] } else { spec_a };
    Ok(IsospectralReport {
        mismatch: spectrum_mismatch(&spec_a_full, &spec_v),
        mismatch_b: spectrum_mismatch(&spec_b, &spec_a_full),
        spectrum_v: spec_v,
    })
}

/// Reorders qudits so that new position p holds old qudit perm[p].
fn permute_qudits(psi: &Array1<c64>, perm: &[usize], n: usize, d: usize) -> Array1<c64> {
    let mut out = Array1::zeros(psi.len());
    for (idx, &amp) in psi.iter().enumerate() {
        let dg = digits(idx, n, d);
        let new = perm.iter().fold(0, |acc, &q| acc * d + dg[q]);
        out[new] = amp;
    }
    out
}

/// Product state from per-site amplitude vectors.
pub fn product_state(sites: &[Array1<c64>]) -> Array1<c64> {
    let mut psi = Array1::from_elem(1, c64::new(1.0, 0.0));
    for v in sites {
        let mut next = Array1::zeros(psi.len() * v.len());
        for (i, &a) in psi.iter().enumerate() {
            for (j, &b) in v.iter().enumerate() {
                next[i * v.len() + j] = a * b;
            }
        }
        psi = next;
    }
    psi
}

/// (|0…0⟩ + |d-1…d-1⟩)/√2.
pub fn cat_state(l: usize, d: usize) -> Array1<c64> {
    let dim = d.pow(l as u32);
    let mut psi = Array1::zeros(dim);
    psi[0] = c64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    psi[dim - 1] = c64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    psi
}

pub fn random_product_state<R: Rng + ?Sized>(l: usize, d: usize, rng: &mut R) -> Array1<c64> {
    let sites: Vec<Array1<c64>> = (0..l).map(|_| haar_unitary(d, rng).column(0).to_owned()).collect();
    product_state(&sites)
}

/// Random circuit whose steps alternate between even and odd bonds, so that
/// gates within a step act on disjoint pairs and commute.
pub fn random_circuit<R: Rng + ?Sized>(l: usize, d: usize, t: usize, rng: &mut R) -> Result<TinyCircuit> {
    let steps = (0..t)
        .map(|s| {
            (s % 2..l.saturating_sub(1))
                .step_by(2)
                .map(|x| Gate { site: x, unitary: haar_unitary(d * d * d, rng) })
                .collect()
        })
        .collect();
    TinyCircuit::new(l, d, steps)
}

// Jordan–Wigner Majoranas on qubits: c_{2q} = Z…Z X_q, c_{2q+1} = Z…Z Y_q, with
// qubit 0 the most significant bit and a_q = (c_{2q} + i c_{2q+1})/2.

/// c_j |idx⟩ = phase |idx'⟩.
pub fn majorana_action(j: usize, idx: usize, n_qubits: usize) -> (usize, c64) {
    let q = j / 2;
    let bit = n_qubits - 1 - q;
    let higher = idx >> (bit + 1);
    let sign = if higher.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
    let occupied = (idx >> bit) & 1 == 1;
    let flipped = idx ^ (1 << bit);
    let phase = if j % 2 == 0 {
        c64::new(sign, 0.0)
    } else if occupied {
        c64::new(0.0, -sign)
    } else {
        c64::new(0.0, sign)
    };
    (flipped, phase)
}

/// H = -(i/2) Σ_{j<k} M_jk c_j c_k as a dense matrix; for a pure Γ its ground
/// state is the Gaussian state with correlation Γ.
pub fn quadratic_hamiltonian(m: &Mat) -> Result<CMat> {
    let n = m.nrows();
    if n % 2 != 0 || n / 2 > 12 {
        return Err(Error::OracleLimit(format!("{n} Majoranas outside the dense range")));
    }
    let nq = n / 2;
    let dim = 1usize << nq;
    let mut h = CMat::zeros((dim, dim));
    for col in 0..dim {
        for j in 0..n {
            for k in j + 1..n {
                let w = m[[j, k]];
                if w == 0.0 {
                    continue;
                }
                let (i1, p1) = majorana_action(k, col, nq);
                let (i2, p2) = majorana_action(j, i1, nq);
                h[[i2, col]] += c64::new(0.0, -0.5 * w) * p1 * p2;
            }
        }
    }
    Ok(h)
}

/// Dense pure state with correlation matrix Γ (unique ground state of the
/// parent Hamiltonian, which has gap 1 for pure Γ).
pub fn gaussian_pure_state(gamma: &CorrelationMatrix) -> Result<Array1<c64>> {
    if !gamma.is_pure() {
        return Err(Error::Unphysical { excess: gamma.purity_residual() });
    }
    let h = quadratic_hamiltonian(gamma.matrix())?;
    let (vals, vecs) = eigh_c(&h)?;
    if vals.len() > 1 && vals[1] - vals[0] < 0.5 {
        return Err(Error::OracleLimit("parent Hamiltonian ground state is degenerate".into()));
    }
    Ok(vecs.column(0).to_owned())
}

/// Γ_jk = i Tr(ρ c_j c_k) for j ≠ k.
pub fn correlation_of_density(rho: &CMat) -> Mat {
    let dim = rho.nrows();
    let nq = dim.trailing_zeros() as usize;
    let n = 2 * nq;
    let mut g = Mat::zeros((n, n));
    for j in 0..n {
        for k in j + 1..n {
            let mut tr = c64::new(0.0, 0.0);
            for col in 0..dim {
                let (i1, p1) = majorana_action(k, col, nq);
                let (i2, p2) = majorana_action(j, i1, nq);
                // Tr(ρ c_j c_k) = Σ_col ⟨col| ρ c_j c_k |col⟩
                tr += rho[[col, i2]] * p1 * p2;
            }
            let v = (c64::new(0.0, 1.0) * tr).re;
            g[[j, k]] = v;
            g[[k, j]] = -v;
        }
    }
    g
}

/// Gaussian unitary exp((1/4) Σ h_jk c_j c_k) for a real antisymmetric generator.
pub fn gaussian_unitary(h: &Mat) -> Result<CMat> {
    // (1/4) Σ_jk h_jk c_j c_k = -i X with X = -(i/2) Σ_{j<k} (-h_jk) c_j c_k Hermitian.
    let x = quadratic_hamiltonian(&h.mapv(|v| -v))?;
    let (vals, vecs) = eigh_c(&x)?;
    let phases = CMat::from_diag(&vals.mapv(|e| c64::from_polar(1.0, -e)));
    Ok(vecs.dot(&phases).dot(&dagger(&vecs)))
}

/// S with U† c_j U = Σ_m S_jm c_m, read off from traces.
pub fn heisenberg_matrix(u: &CMat) -> Mat {
    let dim = u.nrows();
    let nq = dim.trailing_zeros() as usize;
    let n = 2 * nq;
    let cmat = |j: usize| {
        let mut m = CMat::zeros((dim, dim));
        for col in 0..dim {
            let (row, p) = majorana_action(j, col, nq);
            m[[row, col]] = p;
        }
        m
    };
    let cs: Vec<CMat> = (0..n).map(cmat).collect();
    let ud = dagger(u);
    let mut s = Mat::zeros((n, n));
    for j in 0..n {
        let heis = ud.dot(&cs[j]).dot(u);
        for m in 0..n {
            let tr: c64 = (0..dim).map(|i| cs[m].row(i).dot(&heis.column(i))).sum();
            s[[j, m]] = tr.re / dim as f64;
        }
    }
    s
}

/// Dense evolution of a Gaussian state under a Gaussian unitary coupling the
/// system to a vacuum environment, compared with the channel Γ ↦ A + BΓBᵀ
/// through the many-body spectrum of the reduced state.
pub fn gaussian_consistency(generator: &Mat, gamma_sys: &CorrelationMatrix, n_env: usize) -> Result<f64> {
    let ns = gamma_sys.n_modes();
    let n = ns + n_env;
    if generator.dim() != (n, n) || n > 12 || n_env % 2 != 0 {
        return Err(Error::OracleLimit(format!("{n} Majoranas outside the dense range")));
    }
    let u = gaussian_unitary(generator)?;
    let s = heisenberg_matrix(&u);
    let vac = CorrelationMatrix::paired(n_env / 2, -1.0);
    let ss = s.slice(s![..ns, ..ns]).to_owned();
    let se = s.slice(s![..ns, ns..]).to_owned();
    let a = se.dot(vac.matrix()).dot(&se.t());
    let ch = crate::channel::GaussianChannel::new_numeric(a, ss)?;
    let out = ch.apply(gamma_sys, 1)?;

    let psi_s = if gamma_sys.is_pure() {
        gaussian_pure_state(gamma_sys)?
    } else {
        return Err(Error::OracleLimit("dense consistency check takes a pure input".into()));
    };
    let nq_env = n_env / 2;
    let mut psi = Array1::zeros(psi_s.len() << nq_env);
    for (i, &a) in psi_s.iter().enumerate() {
        psi[i << nq_env] = a;
    }
    let psi = u.dot(&psi);
    let rho = reduced_density(&psi, n / 2, 2, 0..ns / 2);
    let dense = sorted_spectrum(&rho)?;
    let gauss = many_body_spectrum(&entanglement_spectrum(&out)?, dense.len());
    Ok(spectrum_mismatch(&dense, &gauss))
}
