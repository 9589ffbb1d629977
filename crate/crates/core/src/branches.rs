//! Branch matching of per-momentum spectra.
//!
//! Eigenvalue order alone mislabels branches at crossings and cusps, so
//! branches are followed by eigenvector overlap: a maximum-weight assignment
//! on |⟨u|v⟩|² between neighbouring momenta. Inside a degenerate cluster the
//! eigenvectors are first rotated (orthogonal Procrustes) onto the incoming
//! branches so that the assignment is well posed.
//!
//! The grid is treated as periodic; the last-to-first link is matched too and
//! its permutation reported.

use ndarray::{s, Axis};
use ndarray_linalg::SVD;
use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;

use crate::error::{Error, Result};
use crate::linalg::{dagger, CMat};
use crate::majorana::entanglement_energy;

pub const OVERLAP_THRESHOLD: f64 = 0.7;
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Spectrum at one momentum: values descending, eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct Frame {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub from: usize,
    pub to: usize,
    pub branch: usize,
    pub overlap: f64,
}

/// Branch-ordered values along the valid momenta, in grid order starting at
/// `order[0]`.
#[derive(Debug, Clone)]
pub struct Tracked {
    /// Grid indices of the valid frames, in visiting order.
    pub order: Vec<usize>,
    /// values[p][b]: branch b at position p.
    pub values: Vec<Vec<f64>>,
    /// columns[p][b]: column of frame order[p] carrying branch b.
    pub columns: Vec<Vec<usize>>,
    /// Branch b at the last position continues as branch wrap[b] at position 0.
    pub wrap: Vec<usize>,
    pub weak_links: Vec<Link>,
    pub ambiguities: Vec<Link>,
    pub n_branches: usize,
}

impl Tracked {
    /// Consecutive links (p, q, branch at p, branch at q), wrap included.
    pub fn links(&self) -> Vec<(usize, usize, usize, usize)> {
        let n = self.order.len();
        let mut out = Vec::new();
        if n < 2 {
            return out;
        }
        for p in 0..n - 1 {
            for b in 0..self.n_branches {
                out.push((p, p + 1, b, b));
            }
        }
        for b in 0..self.n_branches {
            out.push((n - 1, 0, b, self.wrap[b]));
        }
        out
    }

    /// Values of branch b in grid order (None where the frame was skipped).
    pub fn branch_on_grid(&self, b: usize, grid_len: usize) -> Vec<Option<f64>> {
        let mut out = vec![None; grid_len];
        for (p, &k) in self.order.iter().enumerate() {
            out[k] = Some(self.values[p][b]);
        }
        out
    }
}

fn clusters(values: &[f64], tol: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || (values[i - 1] - values[i]).abs() > tol {
            out.push((start, i));
            start = i;
        }
    }
    out
}

/// Rotates each degenerate cluster of `cur` onto the incoming vectors `prev`.
fn align_clusters(prev: &CMat, cur: &Frame, tol: f64) -> Result<CMat> {
    let mut vecs = cur.vectors.clone();
    for (a, b) in clusters(&cur.values, tol) {
        let c = b - a;
        if c < 2 {
            continue;
        }
        let block = vecs.slice(s![.., a..b]).to_owned();
        let proj = dagger(&block).dot(prev); // c × m
        let mut weights: Vec<(usize, f64)> = (0..prev.ncols())
            .map(|j| (j, proj.column(j).iter().map(|z| z.norm_sqr()).sum()))
            .collect();
        weights.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
        let mut chosen: Vec<usize> = weights.iter().take(c).map(|w| w.0).collect();
        chosen.sort_unstable();
        let m = proj.select(Axis(1), &chosen); // c × c
        let (w, _, zt) = m.svd(true, true)?;
        let r = w.expect("U").dot(&zt.expect("Vt"));
        vecs.slice_mut(s![.., a..b]).assign(&block.dot(&r));
    }
    Ok(vecs)
}

/// Maximum-weight assignment prev branch → current column.
fn assign(prev: &CMat, cur: &CMat) -> (Vec<usize>, Vec<Vec<f64>>) {
    let m = prev.ncols();
    let ov = dagger(prev).dot(cur);
    let abs: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| ov[[i, j]].norm()).collect()).collect();
    let weights: Vec<Vec<i64>> = abs
        .iter()
        .map(|row| row.iter().map(|x| (x * x * 1e12).round() as i64).collect())
        .collect();
    let mat = Matrix::from_rows(weights).expect("square overlap matrix");
    let (_, perm) = kuhn_munkres(&mat);
    (perm, abs)
}

/// Tracks branches through the frames; `None` frames are skipped.
pub fn track(frames: &[Option<Frame>]) -> Result<Tracked> {
    let valid: Vec<usize> = (0..frames.len()).filter(|&i| frames[i].is_some()).collect();
    if valid.is_empty() {
        return Ok(Tracked {
            order: vec![],
            values: vec![],
            columns: vec![],
            wrap: vec![],
            weak_links: vec![],
            ambiguities: vec![],
            n_branches: 0,
        });
    }
    let m = frames[valid[0]].as_ref().unwrap().values.len();
    for &i in &valid {
        if frames[i].as_ref().unwrap().values.len() != m {
            return Err(Error::Shape(format!("frame {i} has a different branch count")));
        }
    }
    // Start where the spectrum is non-degenerate so the initial labels are sharp.
    let start_pos = valid
        .iter()
        .position(|&i| {
            let v = &frames[i].as_ref().unwrap().values;
            v.windows(2).all(|w| (w[0] - w[1]).abs() > DEGENERACY_TOL)
        })
        .unwrap_or(0);
    let mut order: Vec<usize> = valid[start_pos..].to_vec();
    order.extend_from_slice(&valid[..start_pos]);

    let first = frames[order[0]].as_ref().unwrap();
    let mut values = vec![first.values.clone()];
    let mut columns = vec![(0..m).collect::<Vec<_>>()];
    let mut prev = first.vectors.clone();
    let mut weak_links = Vec::new();
    let mut ambiguities = Vec::new();

    let mut check = |from: usize, to: usize, perm: &[usize], abs: &[Vec<f64>], cur: &Frame| {
        for (b, &j) in perm.iter().enumerate() {
            if abs[b][j] < OVERLAP_THRESHOLD {
                weak_links.push(Link { from, to, branch: b, overlap: abs[b][j] });
            }
            let strong: Vec<usize> = (0..abs[b].len()).filter(|&c| abs[b][c] > OVERLAP_THRESHOLD).collect();
            if strong.len() > 1 {
                let v0 = cur.values[strong[0]];
                if strong.iter().any(|&c| (cur.values[c] - v0).abs() > DEGENERACY_TOL) {
                    ambiguities.push(Link { from, to, branch: b, overlap: abs[b][j] });
                }
            }
        }
    };

    for w in order.windows(2) {
        let cur = frames[w[1]].as_ref().unwrap();
        let aligned = align_clusters(&prev, cur, DEGENERACY_TOL)?;
        let (perm, abs) = assign(&prev, &aligned);
        check(w[0], w[1], &perm, &abs, cur);
        values.push(perm.iter().map(|&j| cur.values[j]).collect());
        prev = aligned.select(Axis(1), &perm);
        columns.push(perm);
    }

    // Wrap link: last position back to the first.
    let wrap = if order.len() > 1 {
        let cur = frames[order[0]].as_ref().unwrap();
        let aligned = align_clusters(&prev, cur, DEGENERACY_TOL)?;
        let (perm, abs) = assign(&prev, &aligned);
        check(*order.last().unwrap(), order[0], &perm, &abs, cur);
        // perm maps branch at the end to a column of frame order[0]; the
        // first frame's columns are its branch labels.
        perm
    } else {
        (0..m).collect()
    };

    Ok(Tracked { order, values, columns, wrap, weak_links, ambiguities, n_branches: m })
}

/// Open-path tracking from `path[0]`, whose columns are the branch labels.
/// Returns columns[p][b] for each position.
pub fn track_path(path: &[Frame]) -> Result<Vec<Vec<usize>>> {
    let Some(first) = path.first() else { return Ok(vec![]) };
    let m = first.values.len();
    let mut columns = vec![(0..m).collect::<Vec<_>>()];
    let mut prev = first.vectors.clone();
    for cur in &path[1..] {
        if cur.values.len() != m {
            return Err(Error::Shape("path frames differ in branch count".into()));
        }
        let aligned = align_clusters(&prev, cur, DEGENERACY_TOL)?;
        let (perm, _) = assign(&prev, &aligned);
        prev = aligned.select(Axis(1), &perm);
        columns.push(perm);
    }
    Ok(columns)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jump {
    pub branch: usize,
    /// Grid indices of the link.
    pub from: usize,
    pub to: usize,
    pub before: f64,
    pub after: f64,
    pub sign_crossing: bool,
}

#[derive(Debug, Clone)]
pub struct ContinuityReport {
    pub jump_tol: f64,
    pub median_step: f64,
    /// Largest finite inter-point jump per branch.
    pub max_jump: Vec<f64>,
    pub discontinuities: Vec<Jump>,
    /// Links skipped because an endpoint is clamped at ±∞.
    pub clamped_links: usize,
    pub weak_links: Vec<Link>,
    pub ambiguities: Vec<Link>,
}

impl ContinuityReport {
    pub fn continuous(&self) -> bool {
        self.discontinuities.is_empty()
    }

    /// A discontinuity that changes the sign of ε, as a chiral branch must.
    pub fn chiral_like(&self) -> bool {
        self.discontinuities.iter().any(|j| j.sign_crossing)
    }
}

/// Converts tracked λ values into ε values.
pub fn energies(tracked: &Tracked) -> Vec<Vec<f64>> {
    tracked
        .values
        .iter()
        .map(|row| row.iter().map(|&l| entanglement_energy(l)).collect())
        .collect()
}

/// Median of the finite inter-point steps of ε.
pub fn median_step(tracked: &Tracked, eps: &[Vec<f64>]) -> f64 {
    let mut steps: Vec<f64> = tracked
        .links()
        .iter()
        .filter_map(|&(p, q, b, c)| {
            let (x, y) = (eps[p][b], eps[q][c]);
            (x.is_finite() && y.is_finite()).then(|| (y - x).abs())
        })
        .collect();
    if steps.is_empty() {
        return 0.0;
    }
    steps.sort_by(|a, b| a.total_cmp(b));
    steps[steps.len() / 2]
}

/// Flags finite ε jumps above `jump_tol` (default 10× the median step).
pub fn continuity(tracked: &Tracked, jump_tol: Option<f64>) -> ContinuityReport {
    let eps = energies(tracked);
    let median = median_step(tracked, &eps);
    let tol = jump_tol.unwrap_or((10.0 * median).max(1e-9));
    let mut max_jump = vec![0.0f64; tracked.n_branches];
    let mut discontinuities = Vec::new();
    let mut clamped = 0;
    for (p, q, b, c) in tracked.links() {
        let (x, y) = (eps[p][b], eps[q][c]);
        if !(x.is_finite() && y.is_finite()) {
            clamped += 1;
            continue;
        }
        let d = (y - x).abs();
        max_jump[b] = max_jump[b].max(d);
        if d > tol {
            discontinuities.push(Jump {
                branch: b,
                from: tracked.order[p],
                to: tracked.order[q],
                before: x,
                after: y,
                sign_crossing: x * y < 0.0,
            });
        }
    }
    ContinuityReport {
        jump_tol: tol,
        median_step: median,
        max_jump,
        discontinuities,
        clamped_links: clamped,
        weak_links: tracked.weak_links.clone(),
        ambiguities: tracked.ambiguities.clone(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crossing {
    pub branch: usize,
    /// Grid index of the point with the smallest |ε| on the crossing link.
    pub at: usize,
    pub epsilon: f64,
    /// +1 if ε increases through zero along the grid, -1 otherwise.
    pub direction: i8,
}

/// Continuous zero crossings of ε: a sign change across a link whose jump is
/// within `jump_tol`. Values with |ε| ≤ `zero_tol` count as non-negative.
pub fn zero_crossings(tracked: &Tracked, jump_tol: f64, zero_tol: f64) -> Vec<Crossing> {
    let eps = energies(tracked);
    let sign = |x: f64| if x >= -zero_tol { 1 } else { -1 };
    let mut out = Vec::new();
    for (p, q, b, c) in tracked.links() {
        let (x, y) = (eps[p][b], eps[q][c]);
        if !(x.is_finite() && y.is_finite()) || (y - x).abs() > jump_tol {
            continue;
        }
        if sign(x) != sign(y) {
            let (at, e) = if x.abs() <= y.abs() { (p, x) } else { (q, y) };
            out.push(Crossing {
                branch: b,
                at: tracked.order[at],
                epsilon: e,
                direction: if y > x { 1 } else { -1 },
            });
        }
    }
    out
}
