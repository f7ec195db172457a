//! The three primal-dual methods for `min F(x) s.t. K x = b`:
//!
//! * [`Method::Papc`]: the proximal alternating predictor-corrector baseline,
//!   one gradient, one `K` and two `K^T` per iteration;
//! * [`Method::Algo3`]: its Nesterov-accelerated variant with dual variable in
//!   the constraint space, one gradient, one `K` and two `K^T` per iteration;
//! * [`Method::Algo1`]: the optimal method, which replaces the dual update of
//!   the accelerated variant by a Chebyshev-preconditioned update in the
//!   primal space, one gradient and `N` applications of each of `K`, `K^T`.
//!
//! All three consume the problem only through an [`OracleSession`], which
//! counts gradient evaluations and matrix-vector products.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chebyshev::{precond_residual, ChebyshevConfig};
use crate::diagnostics::{self, ConvergenceTrace, TraceRecord, TransformedMetric};
use crate::error::{check_len, Error, Result};
use crate::operators::{InstrumentedMap, MatvecCounts};
use crate::problem::{KktResidual, PrimalDualPair, ProblemInstance};
use crate::spectral::SpectralBounds;
use crate::vecops::{dist_sq, is_finite, norm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Papc,
    Algo3,
    Algo1,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Papc, Method::Algo3, Method::Algo1];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Papc => "papc",
            Method::Algo3 => "algo3",
            Method::Algo1 => "algo1",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "papc" => Ok(Method::Papc),
            "algo3" => Ok(Method::Algo3),
            "algo1" => Ok(Method::Algo1),
            other => Err(Error::InvalidInput(format!(
                "unknown method {other:?} (expected papc, algo3 or algo1)"
            ))),
        }
    }
}

/// Where a parameter set came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSource {
    /// Baseline chooser `eta = 1/(2L)`, `theta = 1/(eta lambda1)`.
    PapcDefault,
    Accelerated,
    Optimal,
    /// At least one value overridden by the caller.
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PapcParams {
    pub eta: f64,
    pub theta: f64,
    pub source: ParamSource,
}

/// Baseline step sizes; `eta * theta * lambda1 = 1`.
pub fn papc_default_params(lip: f64, bounds: &SpectralBounds) -> PapcParams {
    let eta = 1.0 / (2.0 * lip);
    PapcParams {
        eta,
        theta: 1.0 / (eta * bounds.lambda1),
        source: ParamSource::PapcDefault,
    }
}

/// Parameters of the accelerated methods. `n_inner` is the number of
/// Chebyshev steps for [`Method::Algo1`] and 0 for [`Method::Algo3`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccelParams {
    pub tau: f64,
    pub eta: f64,
    pub theta: f64,
    pub alpha: f64,
    pub bounds: SpectralBounds,
    pub n_inner: usize,
    pub source: ParamSource,
}

fn check_moduli(mu: f64, lip: f64) -> Result<()> {
    if !(mu > 0.0 && lip >= mu && lip.is_finite()) {
        return Err(Error::InvalidInput(format!("need 0 < mu <= L, got mu = {mu}, L = {lip}")));
    }
    Ok(())
}

/// `tau = min{1, sqrt(chi/kappa)/2}`, `eta = 1/(4 tau L)`, `theta = 1/(eta lambda1)`, `alpha = mu`.
pub fn accel_params(mu: f64, lip: f64, bounds: &SpectralBounds) -> Result<AccelParams> {
    check_moduli(mu, lip)?;
    let kappa = lip / mu;
    let tau = f64::min(1.0, 0.5 * (bounds.chi() / kappa).sqrt());
    let eta = 1.0 / (4.0 * tau * lip);
    Ok(AccelParams {
        tau,
        eta,
        theta: 1.0 / (eta * bounds.lambda1),
        alpha: mu,
        bounds: *bounds,
        n_inner: 0,
        source: ParamSource::Accelerated,
    })
}

/// `tau = min{1, sqrt(19/(15 kappa))/2}`, `eta = 1/(4 tau L)`, `theta = 15/(19 eta)`,
/// `alpha = mu`, `N = ceil(sqrt(chi))`.
pub fn optimal_params(mu: f64, lip: f64, bounds: &SpectralBounds) -> Result<AccelParams> {
    check_moduli(mu, lip)?;
    let kappa = lip / mu;
    let tau = f64::min(1.0, 0.5 * (19.0 / (15.0 * kappa)).sqrt());
    let eta = 1.0 / (4.0 * tau * lip);
    Ok(AccelParams {
        tau,
        eta,
        theta: 15.0 / (19.0 * eta),
        alpha: mu,
        bounds: *bounds,
        n_inner: bounds.min_chebyshev_degree(),
        source: ParamSource::Optimal,
    })
}

/// A method together with its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", content = "params", rename_all = "lowercase")]
pub enum MethodConfig {
    Papc(PapcParams),
    Algo3(AccelParams),
    Algo1(AccelParams),
}

impl MethodConfig {
    /// The prescribed parameters of `method` for an instance with moduli
    /// `(mu, lip)` and spectral bounds `bounds`.
    pub fn prescribed(method: Method, mu: f64, lip: f64, bounds: &SpectralBounds) -> Result<Self> {
        Ok(match method {
            Method::Papc => {
                check_moduli(mu, lip)?;
                MethodConfig::Papc(papc_default_params(lip, bounds))
            }
            Method::Algo3 => MethodConfig::Algo3(accel_params(mu, lip, bounds)?),
            Method::Algo1 => MethodConfig::Algo1(optimal_params(mu, lip, bounds)?),
        })
    }

    pub fn method(&self) -> Method {
        match self {
            MethodConfig::Papc(_) => Method::Papc,
            MethodConfig::Algo3(_) => Method::Algo3,
            MethodConfig::Algo1(_) => Method::Algo1,
        }
    }

    pub fn source(&self) -> ParamSource {
        match self {
            MethodConfig::Papc(p) => p.source,
            MethodConfig::Algo3(p) | MethodConfig::Algo1(p) => p.source,
        }
    }

    /// `(K, K^T)` applications per iteration.
    pub fn matvecs_per_step(&self) -> MatvecCounts {
        match self {
            MethodConfig::Papc(_) | MethodConfig::Algo3(_) => MatvecCounts { k: 1, kt: 2 },
            MethodConfig::Algo1(p) => {
                let n = if p.bounds.is_degenerate() { 1 } else { p.n_inner as u64 };
                MatvecCounts { k: n, kt: n }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match self {
            MethodConfig::Papc(p) => {
                positive("eta", p.eta)?;
                positive("theta", p.theta)
            }
            MethodConfig::Algo3(p) | MethodConfig::Algo1(p) => {
                positive("eta", p.eta)?;
                positive("theta", p.theta)?;
                positive("alpha", p.alpha)?;
                if !(p.tau > 0.0 && p.tau <= 1.0) {
                    return Err(Error::InvalidInput(format!("tau must lie in (0, 1], got {}", p.tau)));
                }
                if matches!(self, MethodConfig::Algo1(_)) && p.n_inner == 0 {
                    return Err(Error::InvalidInput("number of Chebyshev steps must be at least 1".into()));
                }
                Ok(())
            }
        }
    }
}

/// Iterates of one method at iteration `k`. `dual` is `y` (length `p`) for
/// PAPC and the accelerated variant, and `u` (length `d`) for the optimal method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub x_f: Vec<f64>,
    pub dual: Vec<f64>,
    pub k: usize,
}

impl SolverState {
    /// `x = x_f = x0`, zero dual.
    pub fn initial(method: Method, x0: &[f64], n_constraints: usize) -> Self {
        let dual_len = match method {
            Method::Papc | Method::Algo3 => n_constraints,
            Method::Algo1 => x0.len(),
        };
        Self {
            x: x0.to_vec(),
            x_f: x0.to_vec(),
            dual: vec![0.0; dual_len],
            k: 0,
        }
    }
}

/// Vectors computed inside one step, exposed for diagnostics.
#[derive(Clone, Debug)]
pub struct StepIntermediates {
    /// Extrapolated point where the gradient was taken (`x^k` for PAPC).
    pub x_g: Vec<f64>,
    pub x_half: Vec<f64>,
    pub grad_g: Vec<f64>,
}

/// Counting access to `grad F`, `K` and `K^T` for one solver run.
#[derive(Debug)]
pub struct OracleSession<'a> {
    inst: &'a ProblemInstance,
    map: InstrumentedMap,
    grads: u64,
}

/// Oracle calls consumed so far.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleCounts {
    pub grads: u64,
    pub matvecs: MatvecCounts,
}

impl<'a> OracleSession<'a> {
    pub fn new(inst: &'a ProblemInstance) -> Self {
        Self {
            inst,
            map: inst.constraint.instrumented(),
            grads: 0,
        }
    }

    pub fn instance(&self) -> &'a ProblemInstance {
        self.inst
    }

    pub fn grad(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let g = self.inst.objective.grad(x)?;
        self.grads += 1;
        Ok(g)
    }

    pub fn map(&mut self) -> &mut InstrumentedMap {
        &mut self.map
    }

    pub fn counts(&self) -> OracleCounts {
        OracleCounts {
            grads: self.grads,
            matvecs: self.map.counter_snapshot(),
        }
    }
}

fn check_state(state: &SolverState, d: usize, dual_len: usize) -> Result<()> {
    check_len("x", d, &state.x)?;
    check_len("x_f", d, &state.x_f)?;
    check_len("dual variable", dual_len, &state.dual)
}

/// One PAPC iteration:
/// `x+- = x - eta grad F(x) - eta K^T y`, `y+ = y + theta (K x+- - b)`,
/// `x+ = x - eta grad F(x) - eta K^T y+`.
pub fn papc_step(state: &mut SolverState, session: &mut OracleSession<'_>, params: &PapcParams) -> Result<StepIntermediates> {
    let inst = session.instance();
    check_state(state, inst.dim(), inst.n_constraints())?;
    let eta = params.eta;
    let grad = session.grad(&state.x)?;
    // common part x - eta grad F(x), shared by both half steps
    let base: Vec<f64> = state.x.iter().zip(&grad).map(|(x, g)| x - eta * g).collect();

    let kty = session.map().apply_transpose(&state.dual)?;
    let x_half: Vec<f64> = base.iter().zip(&kty).map(|(b, k)| b - eta * k).collect();
    let kx = session.map().apply(&x_half)?;
    for ((y, kx), b) in state.dual.iter_mut().zip(&kx).zip(inst.b()) {
        *y += params.theta * (kx - b);
    }
    let kty = session.map().apply_transpose(&state.dual)?;
    let x_g = std::mem::take(&mut state.x);
    state.x = base.iter().zip(&kty).map(|(b, k)| b - eta * k).collect();
    state.x_f.clone_from(&state.x);
    state.k += 1;
    Ok(StepIntermediates {
        x_g,
        x_half,
        grad_g: grad,
    })
}

/// `x_g = tau x + (1 - tau) x_f` and
/// `x^k - eta (grad F(x_g) - alpha x_g)`, the part shared by both x-updates.
fn accelerated_prologue(
    state: &SolverState,
    session: &mut OracleSession<'_>,
    params: &AccelParams,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let tau = params.tau;
    let x_g: Vec<f64> = state.x.iter().zip(&state.x_f).map(|(x, f)| tau * x + (1.0 - tau) * f).collect();
    let grad = session.grad(&x_g)?;
    let base: Vec<f64> = state
        .x
        .iter()
        .zip(&grad)
        .zip(&x_g)
        .map(|((x, g), xg)| x - params.eta * (g - params.alpha * xg))
        .collect();
    Ok((x_g, grad, base))
}

fn accelerated_epilogue(state: &mut SolverState, x_new: Vec<f64>, x_g: &[f64], tau: f64) {
    let c = 2.0 * tau / (2.0 - tau);
    state.x_f = x_g
        .iter()
        .zip(&x_new)
        .zip(&state.x)
        .map(|((g, xn), xo)| g + c * (xn - xo))
        .collect();
    state.x = x_new;
    state.k += 1;
}

/// One iteration of the accelerated primal-dual method with dual in `Y`.
/// The gradient at `x_g` is evaluated once and used by both x-updates.
pub fn algorithm3_step(
    state: &mut SolverState,
    session: &mut OracleSession<'_>,
    params: &AccelParams,
) -> Result<StepIntermediates> {
    let inst = session.instance();
    check_state(state, inst.dim(), inst.n_constraints())?;
    let (x_g, grad, base) = accelerated_prologue(state, session, params)?;
    let damp = 1.0 / (1.0 + params.eta * params.alpha);

    let kty = session.map().apply_transpose(&state.dual)?;
    let x_half: Vec<f64> = base.iter().zip(&kty).map(|(b, k)| damp * (b - params.eta * k)).collect();
    let kx = session.map().apply(&x_half)?;
    for ((y, kx), b) in state.dual.iter_mut().zip(&kx).zip(inst.b()) {
        *y += params.theta * (kx - b);
    }
    let kty = session.map().apply_transpose(&state.dual)?;
    let x_new: Vec<f64> = base.iter().zip(&kty).map(|(b, k)| damp * (b - params.eta * k)).collect();

    accelerated_epilogue(state, x_new, &x_g, params.tau);
    Ok(StepIntermediates {
        x_g,
        x_half,
        grad_g: grad,
    })
}

/// `P(W)(x - x*)` through the Chebyshev iteration, or `W (x - x*) / lambda1`
/// when `lambda1 = lambda2` (no preconditioning needed; one `K` and one `K^T`).
fn preconditioned_residual(x: &[f64], session: &mut OracleSession<'_>, params: &AccelParams) -> Result<Vec<f64>> {
    let b = session.instance().b();
    if params.bounds.is_degenerate() {
        let r = session.map().normal_residual(x, b)?;
        let s = 1.0 / params.bounds.lambda1;
        return Ok(r.into_iter().map(|v| s * v).collect());
    }
    let cfg = ChebyshevConfig::new(params.n_inner, params.bounds)?;
    precond_residual(x, session.map(), b, &cfg)
}

/// One iteration of the optimal method (dual `u` in `X`).
pub fn algorithm1_step(
    state: &mut SolverState,
    session: &mut OracleSession<'_>,
    params: &AccelParams,
) -> Result<StepIntermediates> {
    let inst = session.instance();
    check_state(state, inst.dim(), inst.dim())?;
    let (x_g, grad, base) = accelerated_prologue(state, session, params)?;
    let damp = 1.0 / (1.0 + params.eta * params.alpha);

    let x_half: Vec<f64> = base.iter().zip(&state.dual).map(|(b, u)| damp * (b - params.eta * u)).collect();
    let r: Vec<f64> = preconditioned_residual(&x_half, session, params)?
        .into_iter()
        .map(|v| params.theta * v)
        .collect();
    for (u, ri) in state.dual.iter_mut().zip(&r) {
        *u += ri;
    }
    let x_new: Vec<f64> = x_half.iter().zip(&r).map(|(xh, ri)| xh - params.eta * damp * ri).collect();

    accelerated_epilogue(state, x_new, &x_g, params.tau);
    Ok(StepIntermediates {
        x_g,
        x_half,
        grad_g: grad,
    })
}

/// Dispatches one iteration of `config` on `state`.
pub fn step(state: &mut SolverState, session: &mut OracleSession<'_>, config: &MethodConfig) -> Result<StepIntermediates> {
    match config {
        MethodConfig::Papc(p) => papc_step(state, session, p),
        MethodConfig::Algo3(p) => algorithm3_step(state, session, p),
        MethodConfig::Algo1(p) => algorithm1_step(state, session, p),
    }
}

/// KKT residuals of a solver state: the dual enters as `K^T y` for PAPC and
/// the accelerated variant, and directly as `u` for the optimal method.
/// Evaluated without touching any counter.
pub fn state_residual(inst: &ProblemInstance, method: Method, state: &SolverState) -> Result<KktResidual> {
    match method {
        Method::Papc | Method::Algo3 => inst.kkt_residual(&state.x, &state.dual),
        Method::Algo1 => {
            check_len("x", inst.dim(), &state.x)?;
            check_len("dual variable", inst.dim(), &state.dual)?;
            let g = inst.objective.grad_unchecked(&state.x);
            let stat: f64 = g.iter().zip(&state.dual).map(|(a, b)| (a + b) * (a + b)).sum::<f64>().sqrt();
            Ok(KktResidual {
                stationarity: stat,
                feasibility: inst.feasibility(&state.x),
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub max_iters: usize,
    /// Both KKT residuals must fall below this.
    pub kkt_tol: f64,
    pub check_every: usize,
    /// Stop before a step that would push `count_K + count_Kt` above this.
    pub matvec_budget: Option<u64>,
    /// Stop once `|x - x*|^2` falls to this level; needs an oracle solution.
    pub err_sq_tol: Option<f64>,
}

impl StoppingRule {
    pub fn new(max_iters: usize, kkt_tol: f64) -> Self {
        Self {
            max_iters,
            kkt_tol,
            check_every: 1,
            matvec_budget: None,
            err_sq_tol: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.kkt_tol >= 0.0) || self.check_every == 0 {
            return Err(Error::InvalidInput(format!(
                "stopping rule needs kkt_tol >= 0 and check_every >= 1, got {} and {}",
                self.kkt_tol, self.check_every
            )));
        }
        Ok(())
    }
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self::new(10_000, 1e-10)
    }
}

/// Extra quantities a run may record.
#[derive(Clone, Copy, Debug, Default)]
pub struct SolveOptions<'a> {
    /// Known solution; enables `err_sq` and `bregman_f` (and the Lyapunov
    /// value for the accelerated variant) in the trace.
    pub oracle: Option<&'a PrimalDualPair>,
    /// Transformed-problem metric; enables the Lyapunov value for the optimal method.
    pub transformed: Option<&'a TransformedMetric>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    MatvecBudget,
    /// Reached `err_sq_tol`.
    TargetError,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub state: SolverState,
    pub trace: ConvergenceTrace,
    pub stop_reason: StopReason,
    pub residual: KktResidual,
    /// Oracle calls consumed by this run.
    pub counts: OracleCounts,
}

/// Divergence guard: `|x|` above this multiple of `1 + |x0|` aborts the run.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

/// Runs `config` from `x0` until the stopping rule fires.
pub fn solve(
    config: &MethodConfig,
    inst: &ProblemInstance,
    x0: &[f64],
    stop: &StoppingRule,
    options: &SolveOptions<'_>,
) -> Result<SolveReport> {
    solve_observed(config, inst, x0, stop, options, &mut |_, _| {})
}

/// As [`solve`], calling `observer` with the new state and the step
/// intermediates after every iteration.
pub fn solve_observed(
    config: &MethodConfig,
    inst: &ProblemInstance,
    x0: &[f64],
    stop: &StoppingRule,
    options: &SolveOptions<'_>,
    observer: &mut dyn FnMut(&SolverState, &StepIntermediates),
) -> Result<SolveReport> {
    check_len("starting point", inst.dim(), x0)?;
    config.validate()?;
    stop.validate()?;
    let method = config.method();
    if let Some(o) = options.oracle {
        check_len("oracle x*", inst.dim(), &o.x_star)?;
        check_len("oracle y*", inst.n_constraints(), &o.y_star)?;
    } else if stop.err_sq_tol.is_some() {
        return Err(Error::InvalidInput("an error target needs an oracle solution".into()));
    }

    let mut session = OracleSession::new(inst);
    let mut state = SolverState::initial(method, x0, inst.n_constraints());
    let mut trace = ConvergenceTrace::default();
    let limit = DIVERGENCE_FACTOR * (1.0 + norm(x0));
    let per_step = config.matvecs_per_step().total();

    let mut residual = state_residual(inst, method, &state)?;
    let converged = |r: &KktResidual| r.stationarity <= stop.kkt_tol && r.feasibility <= stop.kkt_tol;

    let stop_reason = loop {
        if state.k.is_multiple_of(stop.check_every) && converged(&residual) {
            break StopReason::Converged;
        }
        if let (Some(tol), Some(o)) = (stop.err_sq_tol, options.oracle) {
            if dist_sq(&state.x, &o.x_star) <= tol {
                break StopReason::TargetError;
            }
        }
        if state.k >= stop.max_iters {
            break StopReason::MaxIterations;
        }
        if let Some(budget) = stop.matvec_budget {
            if session.counts().matvecs.total() + per_step > budget {
                break StopReason::MatvecBudget;
            }
        }

        let inter = step(&mut state, &mut session, config)?;

        let xn = norm(&state.x);
        if !is_finite(&state.x) || !is_finite(&state.dual) || xn > limit {
            return Err(Error::Divergence {
                iteration: state.k,
                norm: xn,
                limit,
            });
        }
        residual = state_residual(inst, method, &state)?;
        trace.push(make_record(config, inst, &state, &residual, &session, options)?);
        observer(&state, &inter);
    };

    Ok(SolveReport {
        state,
        trace,
        stop_reason,
        residual,
        counts: session.counts(),
    })
}

fn make_record(
    config: &MethodConfig,
    inst: &ProblemInstance,
    state: &SolverState,
    residual: &KktResidual,
    session: &OracleSession<'_>,
    options: &SolveOptions<'_>,
) -> Result<TraceRecord> {
    let counts = session.counts();
    let (err_sq, bregman_f) = match options.oracle {
        Some(o) => (
            Some(dist_sq(&state.x, &o.x_star)),
            Some(inst.objective.bregman_unchecked(&state.x_f, &o.x_star)),
        ),
        None => (None, None),
    };
    let lyapunov = match (config, options.oracle, options.transformed) {
        (MethodConfig::Algo3(p), Some(o), _) => Some(diagnostics::lyapunov(inst, state, o, p)?),
        (MethodConfig::Algo1(p), Some(o), Some(t)) => Some(t.lyapunov(inst, state, o, p)?),
        _ => None,
    };
    Ok(TraceRecord {
        k: state.k,
        err_sq,
        bregman_f,
        lyapunov,
        kkt_stat: residual.stationarity,
        kkt_feas: residual.feasibility,
        grads: counts.grads,
        matvecs_k: counts.matvecs.k,
        matvecs_kt: counts.matvecs.kt,
    })
}
