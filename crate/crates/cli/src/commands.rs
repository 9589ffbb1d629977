use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;

use isogauss::branches::Tracked;
use isogauss::channel::{
    convergence_rate, decompose_modes, steady_state, validate_channel, CPTP_TOL, DEFAULT_TOL_UNIT,
};
use isogauss::isotns::{
    bulk_physical_correlation, channel_from_tensor, lightlike_channel, lightlike_momentum_channel, validate_tensor,
    IsoTensor, TENSOR_TOL,
};
use isogauss::linalg::{dagger, max_abs_c, CMat};
use isogauss::majorana::{entanglement_energy, ANTISYMMETRY_TOL};
use isogauss::models::{cut_spectrum_momentum, pip_ground_state, LatticeModel, PipLattice};
use isogauss::momentum::{
    brickwall_blocks, build_brickwall, bulk_spectrum, certify_continuity, classify_bands, realspace_decay,
    steady_frame_at, steady_state_k, BandClassification, BulkSpectrum, CertifiedContinuity, MomentumChannel,
};
use isogauss::oracle::{cat_state, isospectral_check, random_circuit, random_product_state};
use isogauss::topology::model_topology;
use isogauss::{entanglement_spectrum, ConvergenceFit, CorrelationMatrix, GaussianChannel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{input, out_dir, pick, Cli, Command, FileConfig};
use crate::io::{self, MatrixJson, Run};
use crate::Failure;

const LEMMA_TOL: f64 = 1e-8;
const SLOPE_SLACK: f64 = 0.1;
const XI_REL_TOL: f64 = 0.05;
const SPECTRUM_ANTISYMMETRY_TOL: f64 = 1e-8;
const PURITY_TOL: f64 = 1e-10;
const ISOSPECTRAL_TOL: f64 = 1e-10;
const CERTIFY_DEPTH: u32 = 10;

pub fn run(cli: &Cli, cfg: &FileConfig) -> Result<bool, Failure> {
    let dir = out_dir(cli, cfg);
    match &cli.command {
        Command::ValidateChannel { file } => validate(Run::new(dir, "validate-channel")?, &input(file, cfg)?),
        Command::SteadyState { file, boundary, t_max } => {
            let boundary = boundary.clone().or_else(|| cfg.boundary.clone());
            let t_max = pick(*t_max, cfg.t_max, 2000);
            steady(Run::new(dir, "steady-state")?, &input(file, cfg)?, boundary.as_deref(), t_max)
        }
        Command::BrickwallSpectrum { file, grid } => {
            brickwall(Run::new(dir, "brickwall-spectrum")?, &input(file, cfg)?, pick(*grid, cfg.grid, 256))
        }
        Command::Decay { file, grid } => decay(Run::new(dir, "decay")?, &input(file, cfg)?, pick(*grid, cfg.grid, 1024)),
        Command::TensorAudit { file, grid } => {
            tensor_audit(Run::new(dir, "tensor-audit")?, &input(file, cfg)?, pick(*grid, cfg.grid, 256))
        }
        Command::PipSpectrum { lx, ly, ycut, mu } => {
            let lx = pick(*lx, cfg.lx, 24);
            let ly = pick(*ly, cfg.ly, 24);
            let ycut = pick(*ycut, cfg.ycut, ly / 2);
            pip_spectrum(Run::new(dir, "pip-spectrum")?, lx, ly, ycut, pick(*mu, cfg.mu, 2.0))
        }
        Command::Chern { model, mu, grid, ly, nq } => {
            let model = pick(model.clone(), cfg.model.clone(), "pip".into());
            let params = ChernParams {
                mu: pick(*mu, cfg.mu, 2.0),
                grid: pick(*grid, cfg.grid, 24),
                ly: pick(*ly, cfg.ly, 24),
                nq: pick(*nq, cfg.nq, 96),
            };
            chern(Run::new(dir, "chern")?, &model, params)
        }
        Command::OracleCheck { seed, circuits } => {
            oracle(Run::new(dir, "oracle-check")?, pick(*seed, cfg.seed, 0), pick(*circuits, cfg.circuits, 25))
        }
    }
}

/// Records the validation residuals of a channel file and returns the channel
/// when it is a valid CPTP map.
fn checked_channel(run: &mut Run, path: &Path) -> Result<Option<GaussianChannel>, Failure> {
    let (a, b) = io::read_channel_matrices(path)?;
    let rep = validate_channel(&a, &b)?;
    let ok = run.at_most("antisymmetry_defect", rep.antisymmetry_defect, ANTISYMMETRY_TOL)
        & run.at_most("cptp_excess", rep.cptp_excess, CPTP_TOL);
    if !ok {
        return Ok(None);
    }
    GaussianChannel::new(a, b).map(Some).map_err(Failure::from)
}

#[derive(Serialize)]
struct ValidationJson {
    n_out: usize,
    n_in: usize,
    antisymmetry_defect: f64,
    cptp_excess: f64,
    b_norm: f64,
    isometry_residual: f64,
    isometric: bool,
    passed: bool,
}

fn validate(mut run: Run, path: &Path) -> Result<bool, Failure> {
    run.param("input", path);
    let (a, b) = io::read_channel_matrices(path)?;
    let rep = validate_channel(&a, &b)?;
    run.at_most("antisymmetry_defect", rep.antisymmetry_defect, ANTISYMMETRY_TOL);
    run.at_most("cptp_excess", rep.cptp_excess, CPTP_TOL);
    println!("isometric: {}", rep.isometric);
    run.json(
        "validate-channel.json",
        &ValidationJson {
            n_out: b.nrows(),
            n_in: b.ncols(),
            antisymmetry_defect: rep.antisymmetry_defect,
            cptp_excess: rep.cptp_excess,
            b_norm: rep.b_norm,
            isometry_residual: rep.isometry_residual,
            isometric: rep.isometric,
            passed: rep.passed,
        },
    )?;
    run.finish()
}

#[derive(Serialize)]
struct SteadyJson {
    n_preserved: usize,
    n_dissipative: usize,
    r: f64,
    /// Unit-modulus eigenvalues of B as (re, im).
    unit_eigenvalues: Vec<(f64, f64)>,
    lemma_residual: f64,
    bb_residual: f64,
    orthogonality_residual: f64,
    /// Rotation of the preserved block per step, in the basis E_u.
    preserved_rotation: MatrixJson,
    convergence: Option<ConvergenceJson>,
}

#[derive(Serialize)]
struct ConvergenceJson {
    instant: bool,
    slope: Option<f64>,
    bound: f64,
    window: Option<(usize, usize)>,
}

#[derive(Serialize)]
struct ResidualRow {
    t: usize,
    residual: f64,
}

fn steady(mut run: Run, path: &Path, boundary: Option<&Path>, t_max: usize) -> Result<bool, Failure> {
    run.param("input", path);
    run.param("boundary", boundary);
    run.param("t_max", t_max);
    let Some(ch) = checked_channel(&mut run, path)? else { return run.finish() };
    if ch.n_in() != ch.n_out() {
        return Err(Failure::Usage("steady state needs a channel with as many outputs as inputs".into()));
    }
    let gamma0 = match boundary {
        Some(p) => CorrelationMatrix::new(io::read_matrix(p)?)?,
        None => CorrelationMatrix::zeros(ch.n_in()),
    };
    let dec = decompose_modes(&ch, DEFAULT_TOL_UNIT)?;
    run.at_most("lemma_residual", dec.lemma_residual, LEMMA_TOL);
    run.at_most("orthogonality_residual", dec.orthogonality_residual, LEMMA_TOL);
    let ss = steady_state(&ch, &dec, &gamma0)?;
    let convergence = match convergence_rate(&ch, &gamma0, t_max) {
        Ok(fit) => {
            run.holds("convergence_rate_bound", fit.respects_bound(SLOPE_SLACK));
            let (instant, slope, window, residuals) = match &fit {
                ConvergenceFit::Instant => (true, None, None, Vec::new()),
                ConvergenceFit::Decay { slope, window, residuals, .. } => {
                    (false, Some(*slope), Some(*window), residuals.clone())
                }
            };
            let rows: Vec<ResidualRow> =
                residuals.iter().enumerate().map(|(i, &residual)| ResidualRow { t: i + 1, residual }).collect();
            run.csv("steady-state-residuals.csv", &rows)?;
            Some(ConvergenceJson { instant, slope, bound: -(1.0 / dec.r).ln(), window })
        }
        // Too few points above the noise floor to fit: nothing to check.
        Err(isogauss::Error::Fit(_)) => None,
        Err(e) => return Err(e.into()),
    };
    run.json(
        "steady-state.json",
        &SteadyJson {
            n_preserved: dec.n_preserved(),
            n_dissipative: dec.n_dissipative(),
            r: dec.r,
            unit_eigenvalues: dec.unit_eigenvalues.iter().map(|z| (z.re, z.im)).collect(),
            lemma_residual: dec.lemma_residual,
            bb_residual: dec.bb_residual,
            orthogonality_residual: dec.orthogonality_residual,
            preserved_rotation: MatrixJson::real(&dec.u),
            convergence,
        },
    )?;
    run.json("steady-state-gamma.json", &MatrixJson::real(ss.matrix()))?;
    run.finish()
}

#[derive(Serialize)]
struct SpectrumRow {
    k: f64,
    branch_index: usize,
    lambda: Option<f64>,
    epsilon: Option<f64>,
    exceptional_flag: bool,
}

fn spectrum_rows(k_grid: &[f64], tracked: &Tracked, exceptional: &BTreeSet<usize>) -> Vec<SpectrumRow> {
    let l = k_grid.len();
    let branches: Vec<Vec<Option<f64>>> = (0..tracked.n_branches).map(|b| tracked.branch_on_grid(b, l)).collect();
    let mut rows = Vec::with_capacity(l * tracked.n_branches);
    for (j, &k) in k_grid.iter().enumerate() {
        for (b, values) in branches.iter().enumerate() {
            rows.push(SpectrumRow {
                k,
                branch_index: b,
                lambda: values[j],
                epsilon: values[j].map(entanglement_energy),
                exceptional_flag: exceptional.contains(&j) || values[j].is_none(),
            });
        }
    }
    rows
}

#[derive(Serialize)]
struct JumpJson {
    branch: usize,
    from: usize,
    to: usize,
    before: f64,
    after: f64,
    sign_crossing: bool,
    resolution: String,
}

#[derive(Serialize)]
struct BulkJson {
    grid: usize,
    cell_modes: usize,
    generic_preserved_dim: usize,
    n_bands: usize,
    exceptions: Vec<usize>,
    r_global: f64,
    n_branches: usize,
    jump_tol: f64,
    median_step: f64,
    clamped_links: usize,
    antisymmetry_residual: f64,
    jumps: Vec<JumpJson>,
    continuous: bool,
    non_chiral: bool,
}

/// Steady state, bulk spectrum and certified continuity of a momentum channel.
/// `blocks(k)` evaluates the channel off the grid for the certificate.
fn bulk_analysis<F>(run: &mut Run, stem: &str, mc: &MomentumChannel, blocks: F) -> Result<(), Failure>
where
    F: Fn(f64) -> (CMat, CMat) + Sync,
{
    let bands: BandClassification = classify_bands(mc, DEFAULT_TOL_UNIT)?;
    let ss = steady_state_k(mc, &bands)?;
    let spec: BulkSpectrum = bulk_spectrum(&ss, None)?;
    let generic = bands.generic_dim;
    let cert: CertifiedContinuity = certify_continuity(
        &spec,
        |k| {
            let (a, b) = blocks(k);
            steady_frame_at(&a, &b, generic, DEFAULT_TOL_UNIT)
        },
        CERTIFY_DEPTH,
    )?;
    let anti = spec.antisymmetry_residual();
    run.at_most("spectrum_antisymmetry", anti, SPECTRUM_ANTISYMMETRY_TOL);
    run.holds("continuous_up_to_removable", cert.continuous());
    run.holds("no_sign_crossing_discontinuity", cert.non_chiral());
    let exceptional: BTreeSet<usize> = bands.exceptions.iter().copied().collect();
    run.csv(&format!("{stem}-spectrum.csv"), &spectrum_rows(&spec.k_grid, &spec.tracked, &exceptional))?;
    let jumps = cert
        .resolutions
        .iter()
        .map(|(j, r)| JumpJson {
            branch: j.branch,
            from: j.from,
            to: j.to,
            before: j.before,
            after: j.after,
            sign_crossing: j.sign_crossing,
            resolution: format!("{r:?}"),
        })
        .collect();
    run.json(
        &format!("{stem}.json"),
        &BulkJson {
            grid: mc.len(),
            cell_modes: mc.cell_modes(),
            generic_preserved_dim: generic,
            n_bands: bands.n_bands(),
            exceptions: bands.exceptions.clone(),
            r_global: bands.r_global,
            n_branches: spec.tracked.n_branches,
            jump_tol: spec.report.jump_tol,
            median_step: spec.report.median_step,
            clamped_links: spec.report.clamped_links,
            antisymmetry_residual: anti,
            jumps,
            continuous: cert.continuous(),
            non_chiral: cert.non_chiral(),
        },
    )
}

fn brickwall(mut run: Run, path: &Path, grid: usize) -> Result<bool, Failure> {
    run.param("input", path);
    run.param("grid", grid);
    let Some(gate) = checked_channel(&mut run, path)? else { return run.finish() };
    let mc = build_brickwall(&gate, grid)?;
    bulk_analysis(&mut run, "brickwall-spectrum", &mc, |k| brickwall_blocks(&gate, k))?;
    run.finish()
}

#[derive(Serialize)]
struct DecayRow {
    distance: usize,
    max_abs_correlation: f64,
}

#[derive(Serialize)]
struct DecayJson {
    grid: usize,
    r: f64,
    xi: f64,
    xi_bound: f64,
    fit_window: (usize, usize),
    fit_residual: f64,
}

fn decay(mut run: Run, path: &Path, grid: usize) -> Result<bool, Failure> {
    run.param("input", path);
    run.param("grid", grid);
    let Some(gate) = checked_channel(&mut run, path)? else { return run.finish() };
    let mc = build_brickwall(&gate, grid)?;
    let bands = classify_bands(&mc, DEFAULT_TOL_UNIT)?;
    let rep = realspace_decay(&steady_state_k(&mc, &bands)?)?;
    let r = bands.r_global;
    let bound = if r > 0.0 { 1.0 / (1.0 / r).ln() } else { 0.0 };
    // ξ relative to the bound; with r = 0 the correlations must be strictly local.
    if r > 0.0 {
        run.at_most("xi_over_bound", rep.xi / bound, 1.0 + XI_REL_TOL);
    } else {
        run.at_most("xi", rep.xi, 0.0);
    }
    let rows: Vec<DecayRow> = rep
        .distances
        .iter()
        .zip(&rep.max_abs)
        .map(|(&distance, &max_abs_correlation)| DecayRow { distance, max_abs_correlation })
        .collect();
    run.csv("decay.csv", &rows)?;
    run.json(
        "decay.json",
        &DecayJson { grid, r, xi: rep.xi, xi_bound: bound, fit_window: rep.window, fit_residual: rep.fit_residual },
    )?;
    run.finish()
}

#[derive(Serialize)]
struct MpsAuditJson {
    n_physical: usize,
    n_virtual: usize,
    r: f64,
    n_preserved: usize,
    lemma_residual: f64,
    /// Entanglement spectrum of one physical leg deep in the bulk.
    bulk_lambdas: Vec<f64>,
    bulk_epsilons: Vec<f64>,
}

fn tensor_audit(mut run: Run, path: &Path, grid: usize) -> Result<bool, Failure> {
    run.param("input", path);
    run.param("grid", grid);
    let t: IsoTensor = io::read_tensor(path)?;
    let rep = validate_tensor(&t);
    let incoming = rep.incoming_residuals.iter().map(|r| r.2).fold(0.0, f64::max);
    let ok = run.at_most("isometry_residual", rep.purity_residual, TENSOR_TOL)
        & run.at_most("incoming_block", incoming, TENSOR_TOL);
    if !ok {
        return run.finish();
    }
    if t.is_lightlike_layout() {
        run.param("layout", "light-like");
        let (mc, detours) = lightlike_momentum_channel(&t, grid)?;
        run.param("detoured_momenta", detours);
        bulk_analysis(&mut run, "tensor-audit", &mc, |k| {
            let b = lightlike_channel(&t, k).expect("validated light-like tensor");
            (b.a, b.b)
        })?;
    } else if t.is_mps_layout() {
        run.param("layout", "mps");
        let tc = channel_from_tensor(&t)?;
        let dec = decompose_modes(&tc.virtual_channel()?, DEFAULT_TOL_UNIT)?;
        run.at_most("lemma_residual", dec.lemma_residual, LEMMA_TOL);
        let bulk = CorrelationMatrix::new(bulk_physical_correlation(&tc, &dec)?)?;
        let spec = entanglement_spectrum(&bulk)?;
        run.json(
            "tensor-audit.json",
            &MpsAuditJson {
                n_physical: tc.n_physical(),
                n_virtual: tc.a.nrows(),
                r: dec.r,
                n_preserved: dec.n_preserved(),
                lemma_residual: dec.lemma_residual,
                bulk_lambdas: spec.lambdas.clone(),
                bulk_epsilons: spec.energies.clone(),
            },
        )?;
    } else {
        return Err(Failure::Usage(
            "tensor audit needs legs (P, V_t, V_b) or (P, V_r, V_t, V_l, V_b) with matching opposite legs".into(),
        ));
    }
    run.finish()
}

#[derive(Serialize)]
struct CrossingJson {
    branch: usize,
    k_index: usize,
    k: f64,
    epsilon: f64,
    direction: i8,
}

#[derive(Serialize)]
struct PipJson {
    lx: usize,
    ly: usize,
    y_cut: usize,
    mu: f64,
    n_branches: usize,
    crossing_pairs: usize,
    crossings: Vec<CrossingJson>,
    antisymmetry_residual: f64,
    /// (k index, zero-energy Majorana modes) where the ground state is degenerate.
    zero_modes: Vec<(usize, usize)>,
    unique_ground_state: bool,
}

fn pip_spectrum(mut run: Run, lx: usize, ly: usize, ycut: usize, mu: f64) -> Result<bool, Failure> {
    run.param("lx", lx);
    run.param("ly", ly);
    run.param("ycut", ycut);
    run.param("mu", mu);
    let lat = PipLattice::new(lx, ly)?.with_mu(mu)?;
    let gs = pip_ground_state(&lat)?;
    let purity = gs
        .momentum
        .blocks()
        .iter()
        .map(|g| max_abs_c(&(g.dot(&dagger(g)) - CMat::eye(g.nrows())).view()))
        .fold(0.0, f64::max);
    run.at_most("ground_state_purity", purity, PURITY_TOL);
    let cut = cut_spectrum_momentum(&gs.momentum, 2, ycut)?;
    let anti = cut.antisymmetry_residual();
    run.at_most("spectrum_antisymmetry", anti, SPECTRUM_ANTISYMMETRY_TOL);
    run.holds("branches_equal_2_ycut", cut.n_branches() == 2 * ycut);
    let degenerate: BTreeSet<usize> = gs.zero_modes.iter().map(|z| z.0).collect();
    run.csv("pip-spectrum.csv", &spectrum_rows(&cut.k_grid, &cut.tracked, &degenerate))?;
    let crossings = cut
        .crossings
        .iter()
        .map(|c| CrossingJson { branch: c.branch, k_index: c.at, k: cut.k_grid[c.at], epsilon: c.epsilon, direction: c.direction })
        .collect();
    run.json(
        "pip-spectrum.json",
        &PipJson {
            lx,
            ly,
            y_cut: ycut,
            mu,
            n_branches: cut.n_branches(),
            crossing_pairs: cut.crossing_pairs(),
            crossings,
            antisymmetry_residual: anti,
            zero_modes: gs.zero_modes.clone(),
            unique_ground_state: gs.unique(),
        },
    )?;
    run.finish()
}

struct ChernParams {
    mu: f64,
    grid: usize,
    ly: usize,
    nq: usize,
}

#[derive(Serialize)]
struct ChernJson {
    model: String,
    nu: i64,
    nu_edge: i64,
    consistent: bool,
    /// (q index, integer jump removed from Tr P_A there).
    jumps: Vec<(usize, i64)>,
    nq_used: usize,
    quasi_exponent: Option<f64>,
}

#[derive(Serialize)]
struct TraceRow {
    q_x: f64,
    trace: f64,
}

fn chern(mut run: Run, model_name: &str, p: ChernParams) -> Result<bool, Failure> {
    run.param("model", model_name);
    run.param("grid", p.grid);
    run.param("ly", p.ly);
    run.param("nq", p.nq);
    let model: LatticeModel = if model_name == "pip" {
        run.param("mu", p.mu);
        PipLattice::new(4, 4)?.with_mu(p.mu)?.model()?
    } else {
        io::read_model(Path::new(model_name))?
    };
    let top = model_topology(&model, p.grid, p.ly, p.nq)?;
    run.at_most("nu_minus_nu_edge", (top.nu - top.edge.nu_edge).abs() as f64, 0.0);
    let n = top.edge.traces.len();
    let rows: Vec<TraceRow> = top
        .edge
        .traces
        .iter()
        .enumerate()
        .map(|(j, &trace)| TraceRow { q_x: 2.0 * PI * (j as f64 + 0.5) / n as f64, trace })
        .collect();
    run.csv("chern-trace.csv", &rows)?;
    run.json(
        "chern.json",
        &ChernJson {
            model: model_name.into(),
            nu: top.nu,
            nu_edge: top.edge.nu_edge,
            consistent: top.consistent(),
            jumps: top.edge.jumps.clone(),
            nq_used: n,
            quasi_exponent: top.quasi.exponent,
        },
    )?;
    println!("nu = {}, nu_edge = {}", top.nu, top.edge.nu_edge);
    run.finish()
}

#[derive(Serialize)]
struct OracleRow {
    circuit: usize,
    qudit_dim: usize,
    sites: usize,
    steps: usize,
    input: &'static str,
    t0: usize,
    mismatch: f64,
    mismatch_complement: f64,
}

#[derive(Serialize)]
struct OracleJson {
    seed: u64,
    circuits: usize,
    cuts: usize,
    max_mismatch: f64,
    tolerance: f64,
}

fn oracle(mut run: Run, seed: u64, circuits: usize) -> Result<bool, Failure> {
    run.param("seed", seed);
    run.param("circuits", circuits);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for i in 0..circuits {
        let d = 2 + i % 2;
        let (l, t) = if d == 2 { (4, 3) } else { (3, 3) };
        let c = random_circuit(l, d, t, &mut rng)?;
        let (kind, state) = if i % 3 == 0 { ("cat", cat_state(l, d)) } else { ("product", random_product_state(l, d, &mut rng)) };
        for t0 in 0..=t {
            let rep = isospectral_check(&c, &state, t0)?;
            rows.push(OracleRow {
                circuit: i,
                qudit_dim: d,
                sites: l,
                steps: t,
                input: kind,
                t0,
                mismatch: rep.mismatch,
                mismatch_complement: rep.mismatch_b,
            });
        }
    }
    let worst = rows.iter().map(|r| r.mismatch.max(r.mismatch_complement)).fold(0.0, f64::max);
    run.at_most("isospectral_mismatch", worst, ISOSPECTRAL_TOL);
    run.csv("oracle-check.csv", &rows)?;
    run.json(
        "oracle-check.json",
        &OracleJson { seed, circuits, cuts: rows.len(), max_mismatch: worst, tolerance: ISOSPECTRAL_TOL },
    )?;
    println!("max isospectral mismatch {worst:.3e} over {} cuts", rows.len());
    run.finish()
}
