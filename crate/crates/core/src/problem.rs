//! Problem instances `min F(x) s.t. K x = b`, optimality conditions and the
//! direct KKT oracle for quadratic objectives.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::operators::{DenseMatrix, InstrumentedMap};
use crate::spectral::{self, Spectrum, DEFAULT_RANK_TOL};
use crate::vecops::{dot, norm, sub};

/// `F(x) = 1/2 x^T A x + c^T x` with `A` symmetric positive definite.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticObjective {
    a: DenseMatrix,
    c: Vec<f64>,
    mu: f64,
    lip: f64,
}

impl QuadraticObjective {
    /// Builds the objective with caller-supplied moduli `mu <= lambda_min(A)`,
    /// `lip >= lambda_max(A)`.
    pub fn new(a: DenseMatrix, c: Vec<f64>, mu: f64, lip: f64) -> Result<Self> {
        let d = a.rows();
        if a.cols() != d {
            return Err(Error::InvalidInput("quadratic term must be square".into()));
        }
        check_len("linear term", d, &c)?;
        validate_moduli(mu, lip)?;
        let asym = (0..d)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| (a.get(i, j) - a.get(j, i)).abs())
            .fold(0.0, f64::max);
        if asym > 1e-12 * (1.0 + a.frobenius_norm()) {
            return Err(Error::InvalidInput(format!("quadratic term is not symmetric (defect {asym:e})")));
        }
        Ok(Self { a, c, mu, lip })
    }

    /// Builds the objective with moduli taken from the extreme eigenvalues of `A`.
    pub fn from_matrix(a: DenseMatrix, c: Vec<f64>) -> Result<Self> {
        let spec = spectral::eigendecompose_symmetric(&a)?;
        let mu = spec.eigenvalues()[0];
        let lip = spec.lambda_max();
        if !(mu > 0.0) {
            return Err(Error::InvalidInput("quadratic term is not positive definite".into()));
        }
        Self::new(a, c, mu, lip)
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }
}

/// `F(x) = sum_i sqrt(x_i^2 + e^2) + (e/2) x_i^2`, a smooth strongly convex
/// surrogate of the l1 norm with `mu = e`, `L = 1/e + e`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothedL1 {
    dim: usize,
    e: f64,
}

impl SmoothedL1 {
    pub fn new(dim: usize, e: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::InvalidInput(format!("smoothing parameter must be positive, got {e}")));
        }
        Ok(Self { dim, e })
    }

    pub fn e(&self) -> f64 {
        self.e
    }

    pub fn scalar_value(&self, t: f64) -> f64 {
        (t * t + self.e * self.e).sqrt() + 0.5 * self.e * t * t
    }

    pub fn scalar_derivative(&self, t: f64) -> f64 {
        t / (t * t + self.e * self.e).sqrt() + self.e * t
    }

    /// Scalar Bregman divergence. The square-root part is rewritten as
    /// `e^2 (t - s)^2 / (g(s) (g(t) g(s) + t s + e^2))`, whose denominator is
    /// at least `2 e^2 g(s)`, so no cancellation occurs near `t = s`.
    fn scalar_bregman(&self, t: f64, s: f64) -> f64 {
        let e2 = self.e * self.e;
        let gt = (t * t + e2).sqrt();
        let gs = (s * s + e2).sqrt();
        let diff = t - s;
        e2 * diff * diff / (gs * (gt * gs + t * s + e2)) + 0.5 * self.e * diff * diff
    }
}

/// Smooth, strongly convex objective with known moduli.
#[derive(Clone, Debug)]
pub enum Objective {
    Quadratic(QuadraticObjective),
    SmoothedL1(SmoothedL1),
}

impl Objective {
    pub fn dim(&self) -> usize {
        match self {
            Objective::Quadratic(q) => q.c.len(),
            Objective::SmoothedL1(s) => s.dim,
        }
    }

    pub fn mu(&self) -> f64 {
        match self {
            Objective::Quadratic(q) => q.mu,
            Objective::SmoothedL1(s) => s.e,
        }
    }

    pub fn lip(&self) -> f64 {
        match self {
            Objective::Quadratic(q) => q.lip,
            Objective::SmoothedL1(s) => 1.0 / s.e + s.e,
        }
    }

    /// `kappa = L / mu`
    pub fn kappa(&self) -> f64 {
        self.lip() / self.mu()
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Objective::Quadratic(_) => "quadratic",
            Objective::SmoothedL1(_) => "smoothed_l1",
        }
    }

    pub fn as_quadratic(&self) -> Option<&QuadraticObjective> {
        match self {
            Objective::Quadratic(q) => Some(q),
            Objective::SmoothedL1(_) => None,
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        check_len("objective argument", self.dim(), x)?;
        Ok(self.value_unchecked(x))
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("gradient argument", self.dim(), x)?;
        Ok(self.grad_unchecked(x))
    }

    pub(crate) fn value_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            Objective::Quadratic(q) => 0.5 * dot(x, &q.a.mul_vec(x)) + dot(&q.c, x),
            Objective::SmoothedL1(s) => x.iter().map(|&t| s.scalar_value(t)).sum(),
        }
    }

    pub(crate) fn grad_unchecked(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Objective::Quadratic(q) => {
                let mut g = q.a.mul_vec(x);
                for (gi, ci) in g.iter_mut().zip(&q.c) {
                    *gi += ci;
                }
                g
            }
            Objective::SmoothedL1(s) => x.iter().map(|&t| s.scalar_derivative(t)).collect(),
        }
    }

    /// Bregman divergence `D_F(x, x_ref) = F(x) - F(x_ref) - <grad F(x_ref), x - x_ref>`,
    /// evaluated in closed form to avoid cancellation near `x = x_ref`.
    pub fn bregman(&self, x: &[f64], x_ref: &[f64]) -> Result<f64> {
        check_len("Bregman argument", self.dim(), x)?;
        check_len("Bregman reference", self.dim(), x_ref)?;
        Ok(self.bregman_unchecked(x, x_ref))
    }

    pub(crate) fn bregman_unchecked(&self, x: &[f64], x_ref: &[f64]) -> f64 {
        match self {
            Objective::Quadratic(q) => {
                let delta = sub(x, x_ref);
                0.5 * dot(&delta, &q.a.mul_vec(&delta))
            }
            Objective::SmoothedL1(s) => x.iter().zip(x_ref).map(|(&t, &r)| s.scalar_bregman(t, r)).sum(),
        }
    }
}

fn validate_moduli(mu: f64, lip: f64) -> Result<()> {
    if !(mu > 0.0 && lip >= mu && lip.is_finite()) {
        return Err(Error::InvalidInput(format!("need 0 < mu <= L, got mu = {mu}, L = {lip}")));
    }
    Ok(())
}

/// The affine constraint `K x = b`. Solver runs obtain their own
/// [`InstrumentedMap`] over the shared matrix.
#[derive(Clone, Debug)]
pub struct AffineConstraint {
    matrix: Arc<DenseMatrix>,
    rhs: Vec<f64>,
}

impl AffineConstraint {
    pub fn new(matrix: DenseMatrix, rhs: Vec<f64>) -> Result<Self> {
        Self::from_shared(Arc::new(matrix), rhs)
    }

    pub fn from_shared(matrix: Arc<DenseMatrix>, rhs: Vec<f64>) -> Result<Self> {
        check_len("right-hand side b", matrix.rows(), &rhs)?;
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("right-hand side has non-finite entries".into()));
        }
        Ok(Self { matrix, rhs })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// A fresh counting wrapper over `K`.
    pub fn instrumented(&self) -> InstrumentedMap {
        InstrumentedMap::new(Arc::clone(&self.matrix))
    }

    /// `|K K^+ b - b|`; zero (up to rounding) iff `b` is in `range(K)`.
    pub fn range_residual(&self, spec: &Spectrum) -> Result<f64> {
        let proj = spectral::project_onto_range(&self.matrix, spec, &self.rhs, DEFAULT_RANK_TOL)?;
        Ok(norm(&sub(&proj, &self.rhs)))
    }
}

/// `min F(x)` subject to `K x = b`.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub objective: Objective,
    pub constraint: AffineConstraint,
}

/// Stationarity and feasibility residuals of a primal-dual pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktResidual {
    pub stationarity: f64,
    pub feasibility: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.feasibility)
    }
}

/// Optimal pair `(x*, y*)` with `y*` in `range(K)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PrimalDualPair {
    pub x_star: Vec<f64>,
    pub y_star: Vec<f64>,
}

impl ProblemInstance {
    pub fn new(objective: Objective, constraint: AffineConstraint) -> Result<Self> {
        if objective.dim() != constraint.matrix().cols() {
            return Err(Error::DimensionMismatch {
                what: "objective dimension vs columns of K",
                expected: constraint.matrix().cols(),
                found: objective.dim(),
            });
        }
        Ok(Self { objective, constraint })
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn n_constraints(&self) -> usize {
        self.constraint.matrix().rows()
    }

    pub fn k(&self) -> &DenseMatrix {
        self.constraint.matrix()
    }

    pub fn b(&self) -> &[f64] {
        self.constraint.rhs()
    }

    /// `(|grad F(x) + K^T y|, |K x - b|)`. Does not touch any counters.
    pub fn kkt_residual(&self, x: &[f64], y: &[f64]) -> Result<KktResidual> {
        check_len("primal point", self.dim(), x)?;
        check_len("dual point", self.n_constraints(), y)?;
        let mut g = self.objective.grad_unchecked(x);
        for (gi, ki) in g.iter_mut().zip(self.k().tr_mul_vec(y)) {
            *gi += ki;
        }
        Ok(KktResidual {
            stationarity: norm(&g),
            feasibility: self.feasibility(x),
        })
    }

    pub(crate) fn feasibility(&self, x: &[f64]) -> f64 {
        let kx = self.k().mul_vec(x);
        kx.iter().zip(self.b()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

/// Solves the KKT system `[A K^T; K 0] (x, y) = (-c, b)` of a quadratic
/// instance by a rank-revealing factorization, then projects `y` onto
/// `range(K)` so the pair is the distinguished one.
pub fn solve_kkt_direct(inst: &ProblemInstance) -> Result<PrimalDualPair> {
    let q = inst.objective.as_quadratic().ok_or_else(|| {
        Error::UnsupportedOracle(format!(
            "direct KKT solve needs a quadratic objective, got {}",
            inst.objective.kind()
        ))
    })?;
    let d = inst.dim();
    let p = inst.n_constraints();
    if d + p > 2000 {
        return Err(Error::InvalidInput(format!("KKT system of size {} too large for the dense oracle", d + p)));
    }
    let k = inst.k();
    let n = d + p;
    let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = q.a.get(i, j);
        }
    }
    for r in 0..p {
        for j in 0..d {
            let v = k.get(r, j);
            m[(d + r, j)] = v;
            m[(j, d + r)] = v;
        }
    }
    let mut rhs = nalgebra::DVector::<f64>::zeros(n);
    for i in 0..d {
        rhs[i] = -q.c[i];
    }
    for r in 0..p {
        rhs[d + r] = inst.b()[r];
    }

    let svd = nalgebra::SVD::new(m.clone(), true, true);
    let smax = svd.singular_values.max();
    let sol = svd
        .solve(&rhs, DEFAULT_RANK_TOL * smax)
        .map_err(|e| Error::DegenerateInstance(e.to_string()))?;
    let resid = (&m * &sol - &rhs).norm();
    if !(resid <= 1e-8 * (1.0 + rhs.norm())) {
        return Err(Error::DegenerateInstance(format!(
            "KKT system is inconsistent (residual {resid:e}); is b in range(K)?"
        )));
    }

    let x_star: Vec<f64> = sol.rows(0, d).iter().copied().collect();
    let y_raw: Vec<f64> = sol.rows(d, p).iter().copied().collect();
    let spec = spectral::eigendecompose_gram(k)?;
    let y_star = spectral::project_onto_range(k, &spec, &y_raw, DEFAULT_RANK_TOL)?;
    Ok(PrimalDualPair { x_star, y_star })
}

/// On-disk description of an objective.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ObjectiveParams {
    Quadratic {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        c: Vec<f64>,
    },
    SmoothedL1 {
        e: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    #[serde(flatten)]
    pub params: ObjectiveParams,
    pub mu: f64,
    pub lip: f64,
}

/// JSON instance document. `K` is the path of a matrix CSV file, resolved
/// relative to the JSON file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceFile {
    pub objective: ObjectiveSpec,
    #[serde(rename = "K")]
    pub k: PathBuf,
    pub b: Vec<f64>,
}

impl ObjectiveSpec {
    pub fn from_objective(obj: &Objective) -> Self {
        match obj {
            Objective::Quadratic(q) => ObjectiveSpec {
                params: ObjectiveParams::Quadratic {
                    a: (0..q.a.rows()).map(|i| q.a.row(i).to_vec()).collect(),
                    c: q.c.clone(),
                },
                mu: q.mu,
                lip: q.lip,
            },
            Objective::SmoothedL1(s) => ObjectiveSpec {
                params: ObjectiveParams::SmoothedL1 { e: s.e },
                mu: obj.mu(),
                lip: obj.lip(),
            },
        }
    }

    pub fn build(&self, dim: usize) -> Result<Objective> {
        match &self.params {
            ObjectiveParams::Quadratic { a, c } => {
                let a = DenseMatrix::from_rows(a)?;
                Ok(Objective::Quadratic(QuadraticObjective::new(a, c.clone(), self.mu, self.lip)?))
            }
            ObjectiveParams::SmoothedL1 { e } => {
                let s = SmoothedL1::new(dim, *e)?;
                let obj = Objective::SmoothedL1(s);
                let rel = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs());
                if !rel(obj.mu(), self.mu) || !rel(obj.lip(), self.lip) {
                    return Err(Error::InvalidInput(format!(
                        "smoothed_l1 with e = {e} has mu = {}, L = {}, file says mu = {}, L = {}",
                        obj.mu(),
                        obj.lip(),
                        self.mu,
                        self.lip
                    )));
                }
                Ok(obj)
            }
        }
    }
}

/// Writes `inst` as a JSON document plus a matrix CSV next to it.
pub fn save_instance(inst: &ProblemInstance, json_path: &Path, matrix_path: &Path) -> Result<()> {
    inst.k().save(matrix_path)?;
    let rel = match (json_path.parent(), matrix_path.parent()) {
        (Some(a), Some(b)) if a == b => PathBuf::from(matrix_path.file_name().expect("matrix path has a file name")),
        _ => matrix_path.to_path_buf(),
    };
    let doc = InstanceFile {
        objective: ObjectiveSpec::from_objective(&inst.objective),
        k: rel,
        b: inst.b().to_vec(),
    };
    let text = serde_json::to_string_pretty(&doc)?;
    std::fs::write(json_path, text).map_err(|e| Error::io(json_path, e))
}

pub fn load_instance(json_path: &Path) -> Result<ProblemInstance> {
    let text = std::fs::read_to_string(json_path).map_err(|e| Error::io(json_path, e))?;
    let doc: InstanceFile = serde_json::from_str(&text)?;
    let kpath = if doc.k.is_absolute() {
        doc.k.clone()
    } else {
        json_path.parent().unwrap_or(Path::new(".")).join(&doc.k)
    };
    let k = DenseMatrix::load(&kpath)?;
    let objective = doc.objective.build(k.cols())?;
    ProblemInstance::new(objective, AffineConstraint::new(k, doc.b)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_norm(d: usize) -> Objective {
        let a = DenseMatrix::identity(d).unwrap();
        Objective::Quadratic(QuadraticObjective::new(a, vec![0.0; d], 1.0, 1.0).unwrap())
    }

    fn inst(obj: Objective, k: Vec<Vec<f64>>, b: Vec<f64>) -> ProblemInstance {
        ProblemInstance::new(obj, AffineConstraint::new(DenseMatrix::from_rows(&k).unwrap(), b).unwrap()).unwrap()
    }

    #[test]
    fn bregman_of_half_norm() {
        let f = half_norm(2);
        assert_eq!(f.bregman(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.5);
        assert_eq!(f.bregman(&[0.3, -2.0], &[0.3, -2.0]).unwrap(), 0.0);
        assert!(f.bregman(&[1.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn smoothed_l1_basics() {
        let s = SmoothedL1::new(3, 0.5).unwrap();
        assert_eq!(s.scalar_value(0.0), 0.5);
        assert_eq!(s.scalar_derivative(0.0), 0.0);
        let f = Objective::SmoothedL1(SmoothedL1::new(4, 1.0).unwrap());
        assert_eq!((f.lip(), f.mu(), f.kappa()), (2.0, 1.0, 2.0));
        assert!(SmoothedL1::new(3, 0.0).is_err());
        assert!(SmoothedL1::new(3, -1.0).is_err());
    }

    #[test]
    fn smoothed_l1_bregman_matches_definition() {
        let f = Objective::SmoothedL1(SmoothedL1::new(3, 0.3).unwrap());
        let x = [1.2, -0.4, 0.05];
        let r = [-0.7, 0.9, 0.0];
        let direct = f.value(&x).unwrap() - f.value(&r).unwrap() - dot(&f.grad(&r).unwrap(), &sub(&x, &r));
        let closed = f.bregman(&x, &r).unwrap();
        assert!((direct - closed).abs() <= 1e-12 * closed.abs());
    }

    #[test]
    fn kkt_residual_by_hand() {
        let i = inst(half_norm(1), vec![vec![1.0]], vec![0.0]);
        let r = i.kkt_residual(&[1.0], &[0.0]).unwrap();
        assert_eq!((r.stationarity, r.feasibility), (1.0, 1.0));
        assert!(i.kkt_residual(&[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn kkt_direct_two_variables() {
        let i = inst(half_norm(2), vec![vec![1.0, 1.0]], vec![2.0]);
        let pair = solve_kkt_direct(&i).unwrap();
        assert!((pair.x_star[0] - 1.0).abs() < 1e-12);
        assert!((pair.x_star[1] - 1.0).abs() < 1e-12);
        assert!((pair.y_star[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn kkt_direct_identity_constraint() {
        let b0 = vec![0.5, -1.5, 2.0];
        let k = (0..3).map(|i| (0..3).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let i = inst(half_norm(3), k, b0.clone());
        let pair = solve_kkt_direct(&i).unwrap();
        for (j, b) in b0.iter().enumerate() {
            assert!((pair.x_star[j] - b).abs() < 1e-12);
            assert!((pair.y_star[j] + b).abs() < 1e-12);
        }
    }

    #[test]
    fn kkt_direct_rank_deficient_constraint() {
        // duplicated row: K K^T is singular but the problem is well posed
        let i = inst(half_norm(3), vec![vec![1.0, 1.0, 0.0], vec![1.0, 1.0, 0.0]], vec![2.0, 2.0]);
        let pair = solve_kkt_direct(&i).unwrap();
        let r = i.kkt_residual(&pair.x_star, &pair.y_star).unwrap();
        assert!(r.max() < 1e-10);
        // y* in range(K) = span{(1, 1)}
        assert!((pair.y_star[0] - pair.y_star[1]).abs() < 1e-10);
    }

    #[test]
    fn kkt_direct_rejects_other_objectives_and_inconsistent_rhs() {
        let i = inst(
            Objective::SmoothedL1(SmoothedL1::new(2, 0.5).unwrap()),
            vec![vec![1.0, 1.0]],
            vec![1.0],
        );
        assert!(matches!(solve_kkt_direct(&i), Err(Error::UnsupportedOracle(_))));

        let i = inst(half_norm(2), vec![vec![1.0, 1.0], vec![1.0, 1.0]], vec![1.0, 2.0]);
        assert!(matches!(solve_kkt_direct(&i), Err(Error::DegenerateInstance(_))));
    }

    #[test]
    fn instance_rejects_mismatched_dimensions() {
        let c = AffineConstraint::new(DenseMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap(), vec![1.0]).unwrap();
        assert!(ProblemInstance::new(half_norm(3), c).is_err());
        assert!(AffineConstraint::new(DenseMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap(), vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn quadratic_validation() {
        let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![0.0, 2.0]]).unwrap();
        assert!(QuadraticObjective::new(a, vec![0.0; 2], 1.0, 3.0).is_err());
        let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let q = QuadraticObjective::from_matrix(a, vec![0.0; 2]).unwrap();
        assert!((q.mu - 1.0).abs() < 1e-14 && (q.lip - 3.0).abs() < 1e-14);
        let a = DenseMatrix::identity(2).unwrap();
        assert!(QuadraticObjective::new(a, vec![0.0; 2], 2.0, 1.0).is_err());
    }

    #[test]
    fn instance_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = DenseMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let q = QuadraticObjective::from_matrix(a, vec![0.1, -0.2]).unwrap();
        let i = inst(Objective::Quadratic(q), vec![vec![1.0, 2.0]], vec![3.0]);
        let json = dir.path().join("inst.json");
        save_instance(&i, &json, &dir.path().join("K.csv")).unwrap();
        let text = std::fs::read_to_string(&json).unwrap();
        assert!(text.contains("\"kind\": \"quadratic\""));
        assert!(text.contains("\"K\": \"K.csv\""));
        let back = load_instance(&json).unwrap();
        assert_eq!(back.k(), i.k());
        assert_eq!(back.b(), i.b());
        assert_eq!(back.objective.mu(), i.objective.mu());

        let s = inst(
            Objective::SmoothedL1(SmoothedL1::new(2, 0.25).unwrap()),
            vec![vec![1.0, 2.0]],
            vec![3.0],
        );
        save_instance(&s, &json, &dir.path().join("K.csv")).unwrap();
        let back = load_instance(&json).unwrap();
        assert_eq!(back.objective.kind(), "smoothed_l1");
        assert_eq!(back.objective.lip(), 4.25);
    }
}
