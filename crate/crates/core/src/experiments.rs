//! Instance generators and the head-to-head comparison harness.
//!
//! Randomness comes from xoshiro256** seeded through SplitMix64
//! (`seed_from_u64`). Uniforms take the top 53 bits of a draw; Gaussians use
//! the Marsaglia polar method and cache the second variate. Draws are consumed
//! in a fixed order: the entries of `K` row by row, then the generator-specific
//! quantities listed on each function.

use std::fs;
use std::path::Path;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};

use crate::diagnostics::ConvergenceTrace;
use crate::error::{Error, Result};
use crate::operators::DenseMatrix;
use crate::problem::{
    solve_kkt_direct, AffineConstraint, KktResidual, Objective, PrimalDualPair, ProblemInstance, QuadraticObjective,
    SmoothedL1,
};
use crate::solvers::{self, MethodConfig, OracleCounts, SolveOptions, StopReason, StoppingRule};
use crate::spectral::{self, SpectralBounds, Spectrum, DEFAULT_RANK_TOL};
use crate::vecops::dist_sq;

/// Seeded source of uniform and Gaussian variates.
#[derive(Clone, Debug)]
pub struct Rng {
    inner: Xoshiro256StarStar,
    spare: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256StarStar::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }

    pub fn gaussian_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.gaussian()).collect()
    }

    /// `s` distinct indices from `0..n`, by a partial Fisher-Yates shuffle.
    pub fn sample_indices(&mut self, n: usize, s: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..s.min(n) {
            let j = i + self.below(n - i);
            idx.swap(i, j);
        }
        idx.truncate(s.min(n));
        idx
    }
}

/// Placement of the nonzero singular values of a generated `K` inside
/// `[1/sqrt(chi), 1]`. Both grids include the two endpoints.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SingularGrid {
    #[default]
    Equispaced,
    /// Geometric grid: equispaced in `ln sigma`.
    Log,
}

impl SingularGrid {
    /// `i`-th of `r` values, in decreasing order from 1.
    fn value(&self, i: usize, r: usize, chi: f64) -> f64 {
        if r == 1 {
            return 1.0;
        }
        let t = i as f64 / (r - 1) as f64;
        match self {
            SingularGrid::Equispaced => 1.0 - (1.0 - 1.0 / chi.sqrt()) * t,
            SingularGrid::Log => (-0.5 * chi.ln() * t).exp(),
        }
    }
}

/// Compressed-sensing instance shape.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsConfig {
    pub d: usize,
    pub p: usize,
    pub sparsity: usize,
    pub chi_target: f64,
    /// Smoothing of the l1 surrogate; `kappa = 1 + 1/e^2`.
    pub e: f64,
    pub seed: u64,
    #[serde(default)]
    pub grid: SingularGrid,
}

impl CsConfig {
    /// `d = 1000`, `p = 250`, 50 nonzeros, `chi = 1e5`, `kappa = 1e4`.
    pub fn full_scale(seed: u64) -> Self {
        Self {
            d: 1000,
            p: 250,
            sparsity: 50,
            chi_target: 1e5,
            e: e_from_kappa(1e4).expect("valid kappa"),
            seed,
            grid: SingularGrid::Equispaced,
        }
    }

    fn validate(&self) -> Result<()> {
        check_shape(self.d, self.p, self.chi_target)?;
        if self.sparsity == 0 || self.sparsity > self.d {
            return Err(Error::InvalidInput(format!(
                "sparsity must lie in 1..={}, got {}",
                self.d, self.sparsity
            )));
        }
        if !(self.e > 0.0 && self.e.is_finite()) {
            return Err(Error::InvalidInput(format!("smoothing e must be positive, got {}", self.e)));
        }
        Ok(())
    }
}

fn check_shape(d: usize, p: usize, chi: f64) -> Result<()> {
    if d == 0 || p == 0 {
        return Err(Error::InvalidInput(format!("need d, p >= 1, got d = {d}, p = {p}")));
    }
    if p > d {
        return Err(Error::UnsupportedOracle(format!(
            "generators need p <= d (underdetermined constraints), got p = {p}, d = {d}"
        )));
    }
    if !(chi >= 1.0 && chi.is_finite()) {
        return Err(Error::InvalidInput(format!("chi must be finite and >= 1, got {chi}")));
    }
    Ok(())
}

/// `e = sqrt(1/(kappa - 1))`, so that the smoothed l1 objective has condition number `kappa`.
pub fn e_from_kappa(kappa: f64) -> Result<f64> {
    if !(kappa > 1.0 && kappa.is_finite()) {
        return Err(Error::InvalidInput(format!("smoothed l1 needs kappa > 1, got {kappa}")));
    }
    Ok((1.0 / (kappa - 1.0)).sqrt())
}

pub fn smoothed_l1_objective(d: usize, e: f64) -> Result<Objective> {
    Ok(Objective::SmoothedL1(SmoothedL1::new(d, e)?))
}

/// Gaussian `p x d` matrix whose singular values are replaced by `grid`
/// on `[1/sqrt(chi), 1]`, assigned in decreasing order.
fn gaussian_with_spectrum(rng: &mut Rng, p: usize, d: usize, chi: f64, grid: SingularGrid) -> Result<DenseMatrix> {
    let g = DenseMatrix::from_fn(p, d, |_, _| rng.gaussian())?;
    let svd = nalgebra::SVD::new(g.to_nalgebra(), true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let r = svd.singular_values.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut sigma = nalgebra::DMatrix::<f64>::zeros(r, r);
    for (rank, &j) in order.iter().enumerate() {
        sigma[(j, j)] = grid.value(rank, r, chi);
    }
    DenseMatrix::from_nalgebra(&(u * sigma * v_t))
}

/// Compressed-sensing instance and its planted sparse signal.
///
/// Draw order: `K`, then the support of the signal.
pub fn gen_compressed_sensing(cfg: &CsConfig) -> Result<(ProblemInstance, Vec<f64>)> {
    cfg.validate()?;
    let mut rng = Rng::new(cfg.seed);
    let k = gaussian_with_spectrum(&mut rng, cfg.p, cfg.d, cfg.chi_target, cfg.grid)?;
    let mut x_sharp = vec![0.0; cfg.d];
    for i in rng.sample_indices(cfg.d, cfg.sparsity) {
        x_sharp[i] = 1.0;
    }
    let b = k.mul_vec(&x_sharp);
    let inst = ProblemInstance::new(smoothed_l1_objective(cfg.d, cfg.e)?, AffineConstraint::new(k, b)?)?;
    Ok((inst, x_sharp))
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal moved into `Q`.
fn random_orthogonal(rng: &mut Rng, n: usize) -> Result<nalgebra::DMatrix<f64>> {
    let g = DenseMatrix::from_fn(n, n, |_, _| rng.gaussian())?;
    let qr = nalgebra::QR::new(g.to_nalgebra());
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// Random quadratic `1/2 x^T A x + c^T x` with `A` eigenvalues equispaced on
/// `[1, kappa]`, constraint matrix as in [`gen_compressed_sensing`] and
/// `b = K x0` for Gaussian `x0`.
///
/// Draw order: `K`, the rotation of `A`, `c`, `x0`.
pub fn gen_random_quadratic(d: usize, p: usize, kappa_target: f64, chi_target: f64, seed: u64) -> Result<ProblemInstance> {
    check_shape(d, p, chi_target)?;
    if !(kappa_target >= 1.0 && kappa_target.is_finite()) {
        return Err(Error::InvalidInput(format!("kappa must be finite and >= 1, got {kappa_target}")));
    }
    let mut rng = Rng::new(seed);
    let k = gaussian_with_spectrum(&mut rng, p, d, chi_target, SingularGrid::Equispaced)?;
    let q = random_orthogonal(&mut rng, d)?;
    let eig = |i: usize| if d == 1 { 1.0 } else { 1.0 + (kappa_target - 1.0) * i as f64 / (d - 1) as f64 };
    let lam = nalgebra::DMatrix::from_fn(d, d, |i, j| if i == j { eig(i) } else { 0.0 });
    let a = &q * lam * q.transpose();
    let a = DenseMatrix::from_fn(d, d, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))?;
    let c = rng.gaussian_vec(d);
    let x0 = rng.gaussian_vec(d);
    let b = k.mul_vec(&x0);
    let obj = Objective::Quadratic(QuadraticObjective::new(a, c, 1.0, kappa_target)?);
    ProblemInstance::new(obj, AffineConstraint::new(k, b)?)
}

/// The optimal primal-dual pair with `y*` in `range(K)`: a direct KKT solve
/// for quadratics, otherwise a long run of the optimal method followed by
/// `y* = K W^+ (-grad F(x*))`.
pub fn reference_solution(inst: &ProblemInstance, spec: &Spectrum, kkt_tol: f64, max_iters: usize) -> Result<PrimalDualPair> {
    if inst.objective.as_quadratic().is_some() {
        return solve_kkt_direct(inst);
    }
    let bounds = spectral::spectral_bounds(spec, DEFAULT_RANK_TOL)?;
    let cfg = MethodConfig::prescribed(solvers::Method::Algo1, inst.objective.mu(), inst.objective.lip(), &bounds)?;
    let x0 = vec![0.0; inst.dim()];
    let report = solvers::solve(&cfg, inst, &x0, &StoppingRule::new(max_iters, kkt_tol), &SolveOptions::default())?;
    if report.stop_reason != StopReason::Converged {
        return Err(Error::DegenerateInstance(format!(
            "reference run stopped at KKT residual {:e} above {kkt_tol:e}",
            report.residual.max()
        )));
    }
    let x_star = report.state.x;
    let g: Vec<f64> = inst.objective.grad(&x_star)?.iter().map(|v| -v).collect();
    let y_star = spectral::pinv_transpose_apply(inst.k(), spec, &g, DEFAULT_RANK_TOL)?;
    Ok(PrimalDualPair { x_star, y_star })
}

/// One method's outcome in a comparison.
#[derive(Clone, Debug)]
pub struct MethodRun {
    pub config: MethodConfig,
    pub trace: ConvergenceTrace,
    pub stop_reason: StopReason,
    pub residual: KktResidual,
    pub counts: OracleCounts,
    pub iterations: usize,
    pub final_err_sq: Option<f64>,
}

/// Runs every method from `x0 = 0` until one more step would exceed
/// `budget` applications of `K` and `K^T` combined. Methods run on
/// separate threads, each with its own counters.
pub fn run_comparison(
    inst: &ProblemInstance,
    methods: &[MethodConfig],
    budget: u64,
    oracle: Option<&PrimalDualPair>,
) -> Result<Vec<MethodRun>> {
    if methods.is_empty() {
        return Err(Error::InvalidInput("comparison needs at least one method".into()));
    }
    let stop = StoppingRule {
        max_iters: usize::MAX,
        kkt_tol: 0.0,
        check_every: 1,
        matvec_budget: Some(budget),
        err_sq_tol: None,
    };
    let x0 = vec![0.0; inst.dim()];
    let options = SolveOptions {
        oracle,
        transformed: None,
    };
    std::thread::scope(|s| {
        let handles: Vec<_> = methods
            .iter()
            .map(|cfg| {
                let (x0, stop, options) = (&x0, &stop, &options);
                s.spawn(move || {
                    let r = solvers::solve(cfg, inst, x0, stop, options)?;
                    Ok(MethodRun {
                        config: *cfg,
                        final_err_sq: oracle.map(|o| dist_sq(&r.state.x, &o.x_star)),
                        iterations: r.state.k,
                        trace: r.trace,
                        stop_reason: r.stop_reason,
                        residual: r.residual,
                        counts: r.counts,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect()
    })
}

/// Least-squares line through `(x_i, ln y_i)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits `ln y = intercept + slope x`; needs two distinct `x` and positive `y`.
pub fn log_linear_fit(xs: &[f64], ys: &[f64]) -> Result<LogLinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidInput("fit needs at least two paired samples".into()));
    }
    if ys.iter().any(|y| !(*y > 0.0)) {
        return Err(Error::InvalidInput("log fit needs positive values".into()));
    }
    let n = xs.len() as f64;
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("fit needs two distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LogLinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Per-method summary written alongside the trace CSVs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: solvers::Method,
    pub parameters: MethodConfig,
    /// False when any parameter was overridden by the caller.
    pub prescribed_parameters: bool,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub kkt_stat: f64,
    pub kkt_feas: f64,
    pub grads: u64,
    #[serde(rename = "matvecs_K")]
    pub matvecs_k: u64,
    #[serde(rename = "matvecs_Kt")]
    pub matvecs_kt: u64,
    pub err_sq: Option<f64>,
    pub trace_file: Option<String>,
}

impl RunSummary {
    pub fn from_run(run: &MethodRun, trace_file: Option<String>) -> Self {
        Self {
            method: run.config.method(),
            parameters: run.config,
            prescribed_parameters: run.config.source() != solvers::ParamSource::Custom,
            iterations: run.iterations,
            stop_reason: run.stop_reason,
            kkt_stat: run.residual.stationarity,
            kkt_feas: run.residual.feasibility,
            grads: run.counts.grads,
            matvecs_k: run.counts.matvecs.k,
            matvecs_kt: run.counts.matvecs.kt,
            err_sq: run.final_err_sq,
            trace_file,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub config: serde_json::Value,
    pub runs: Vec<RunSummary>,
}

/// Writes `<method>.csv` per run and `manifest.json` into `dir`.
pub fn write_comparison(dir: &Path, config: serde_json::Value, runs: &[MethodRun]) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut summaries = Vec::with_capacity(runs.len());
    for run in runs {
        let name = format!("{}.csv", run.config.method());
        run.trace.save_csv(&dir.join(&name))?;
        summaries.push(RunSummary::from_run(run, Some(name)));
    }
    let manifest = Manifest {
        config,
        runs: summaries,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Spectral bounds of an instance from a dense eigendecomposition of `W`.
pub fn exact_bounds(inst: &ProblemInstance) -> Result<(Spectrum, SpectralBounds)> {
    let spec = spectral::eigendecompose_gram(inst.k())?;
    let bounds = spectral::spectral_bounds(&spec, DEFAULT_RANK_TOL)?;
    Ok((spec, bounds))
}
