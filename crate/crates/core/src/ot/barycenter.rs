use std::time::{Duration, Instant};

use num_complex::Complex;
use thiserror::Error;

use super::active_set::{dot, ActiveSet, AddOutcome};
use super::admm::{Dims, Engine, PlanProx, StepResiduals};
use super::transport::{mass_tolerance, ot_distance, TransportPlan};
use crate::error::{Error, Result};
use crate::lift::{
    make_ground_cost, moment_of, DiscreteMeasure, GroundCost, PhaseGrid, VectorMeasure,
};
use crate::model::{CoefficientVector, PlaneWaveDictionary, SensorArray};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T = f64> {
    /// Stop once the certified duality gap is below `rel_gap · objective`.
    pub rel_gap: T,
    /// Marginal/non-negativity tolerance on returned plans.
    pub feas_tol: T,
    pub max_iters: usize,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            rel_gap: T::lit(1e-5),
            feas_tol: T::lit(1e-7),
            max_iters: 50_000,
        }
    }
}

impl<T: Real> SolverOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if self.rel_gap >= T::zero() && self.feas_tol > T::zero() && self.max_iters > 0 {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid solver options {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverDiagnostics<T = f64> {
    pub iterations: usize,
    pub converged: bool,
    pub primal_objective: T,
    pub dual_bound: T,
    pub gap: T,
    /// Largest violation of a dual constraint at the last dual iterate.
    pub dual_violation: T,
    /// Transport patterns carrying mass in the returned plans.
    pub support: usize,
    pub runtime: Duration,
}

/// Inverse barycenter problem: measurements, steering matrix, phase grid, ground cost and `η`.
#[derive(Debug, Clone)]
pub struct BarycenterProblem<T = f64> {
    pressures: Vec<Complex<T>>,
    steering: Vec<Complex<T>>,
    num_directions: usize,
    grid: PhaseGrid<T>,
    cost: GroundCost<T>,
    eta: T,
}

/// Builds the problem from a measurement set and an estimation dictionary.
pub fn assemble_problem<T: Real>(
    pressures: &[Complex<T>],
    array: &SensorArray<T>,
    dict: &PlaneWaveDictionary<T>,
    grid: &PhaseGrid<T>,
    gamma: T,
    eta: T,
) -> Result<BarycenterProblem<T>> {
    if pressures.len() != array.len() {
        return Err(Error::dim(
            "measurements vs sensors",
            array.len(),
            pressures.len(),
        ));
    }
    let cost = make_ground_cost(grid, gamma)?;
    let steering = dict.steering_matrix(array);
    BarycenterProblem::new(
        pressures.to_vec(),
        steering,
        dict.len(),
        grid.clone(),
        cost,
        eta,
    )
}

impl<T: Real> BarycenterProblem<T> {
    /// `steering` is row-major `Q × L` with `Q = pressures.len()`.
    pub fn new(
        pressures: Vec<Complex<T>>,
        steering: Vec<Complex<T>>,
        num_directions: usize,
        grid: PhaseGrid<T>,
        cost: GroundCost<T>,
        eta: T,
    ) -> Result<Self> {
        let nq = pressures.len();
        if nq == 0 || num_directions == 0 {
            return Err(Error::Domain("problem needs Q >= 1 and L >= 1".into()));
        }
        if steering.len() != nq * num_directions {
            return Err(Error::dim(
                "steering matrix",
                nq * num_directions,
                steering.len(),
            ));
        }
        if cost.len() != grid.len() {
            return Err(Error::dim(
                "ground cost vs phase grid",
                grid.len(),
                cost.len(),
            ));
        }
        if !(eta > T::zero()) || !eta.is_finite() {
            return Err(Error::Domain(format!("eta must be positive, got {eta}")));
        }
        if pressures
            .iter()
            .chain(&steering)
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::Data(
                "measurements or steering matrix contain NaN/Inf".into(),
            ));
        }
        Ok(Self {
            pressures,
            steering,
            num_directions,
            grid,
            cost,
            eta,
        })
    }

    pub fn num_sensors(&self) -> usize {
        self.pressures.len()
    }

    pub fn num_directions(&self) -> usize {
        self.num_directions
    }

    pub fn grid(&self) -> &PhaseGrid<T> {
        &self.grid
    }

    pub fn cost(&self) -> &GroundCost<T> {
        &self.cost
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    pub fn pressures(&self) -> &[Complex<T>] {
        &self.pressures
    }

    /// Row-major `Q × L`.
    pub fn steering(&self) -> &[Complex<T>] {
        &self.steering
    }

    fn dims(&self) -> Dims {
        Dims {
            q: self.num_sensors(),
            l: self.num_directions,
            k: self.grid.len(),
        }
    }

    /// Number of plan entries, `Q·L·K²`.
    pub fn num_plan_entries(&self) -> usize {
        self.dims().len()
    }

    /// Objective `Σ ⟨C, m⟩ + η Σ_q |⟨g_q, Σ_k e^{iψ_k} colsum(m[q])⟩ − p_q|²` for plans in
    /// `[q][l][j][k]` order.
    pub fn objective(&self, plans: &[T]) -> Result<T> {
        let d = self.dims();
        if plans.len() != d.len() {
            return Err(Error::dim("plans", d.len(), plans.len()));
        }
        let phasors = self.grid.phasors();
        let mut transport = T::zero();
        let mut fit = T::zero();
        for q in 0..d.q {
            let mut acc = Complex::new(T::zero(), T::zero());
            for l in 0..d.l {
                let plan = &plans[(q * d.l + l) * d.k * d.k..(q * d.l + l + 1) * d.k * d.k];
                let mut colsum = vec![T::zero(); d.k];
                for (j, row) in plan.chunks(d.k).enumerate() {
                    for (k, &m) in row.iter().enumerate() {
                        colsum[k] = colsum[k] + m;
                        transport = transport + self.cost.get(j, k) * m;
                    }
                }
                acc = acc + self.steering[q * d.l + l] * moment_of(&colsum, phasors);
            }
            fit = fit + (acc - self.pressures[q]).norm_sqr();
        }
        Ok(transport + self.eta * fit)
    }
}

/// Optimum of the inverse barycenter problem.
#[derive(Debug, Clone)]
pub struct BarycenterSolution<T = f64> {
    dims: (usize, usize, usize),
    /// Barycenter measures, `L × K`.
    pub barycenter: VectorMeasure<T>,
    /// One `L × K` measure per sensor.
    pub sensor_measures: Vec<VectorMeasure<T>>,
    plans: Vec<T>,
    pub objective: T,
    pub diagnostics: SolverDiagnostics<T>,
}

impl<T: Real> BarycenterSolution<T> {
    pub fn num_sensors(&self) -> usize {
        self.dims.0
    }

    pub fn num_directions(&self) -> usize {
        self.dims.1
    }

    pub fn grid_len(&self) -> usize {
        self.dims.2
    }

    /// All plans in `[q][l][j][k]` order.
    pub fn plans(&self) -> &[T] {
        &self.plans
    }

    /// Plan between barycenter component `l` and sensor `q`, row-major `K × K`.
    pub fn plan_slice(&self, q: usize, l: usize) -> &[T] {
        let (_, nl, nk) = self.dims;
        let b = (q * nl + l) * nk * nk;
        &self.plans[b..b + nk * nk]
    }

    pub fn plan(&self, q: usize, l: usize) -> TransportPlan<T> {
        let nk = self.dims.2;
        TransportPlan::from_matrix(nk, nk, self.plan_slice(q, l).to_vec())
            .expect("plan slice has K x K entries")
    }
}

#[derive(Debug, Error)]
pub enum BarycenterError<T: Real> {
    #[error(transparent)]
    Invalid(#[from] Error),
    /// Iteration limit hit; carries the last (feasible) iterate and its gap.
    #[error("barycenter solver stopped after {} iterations with gap {:e}", .0.diagnostics.iterations, .0.diagnostics.gap.as_f64())]
    NotConverged(Box<BarycenterSolution<T>>),
}

impl<T: Real> From<BarycenterError<T>> for Error {
    fn from(e: BarycenterError<T>) -> Self {
        match e {
            BarycenterError::Invalid(e) => e,
            BarycenterError::NotConverged(s) => Error::Convergence {
                iterations: s.diagnostics.iterations,
                residual: s.diagnostics.gap.as_f64(),
            },
        }
    }
}

impl<T: Real> BarycenterError<T> {
    /// The last iterate, when the solver merely ran out of iterations.
    pub fn best_iterate(&self) -> Option<&BarycenterSolution<T>> {
        match self {
            BarycenterError::NotConverged(s) => Some(s),
            BarycenterError::Invalid(_) => None,
        }
    }
}

/// A transport pattern: mass at barycenter node `j` of component `l` sent to
/// node `k[q]` at every sensor `q`.
#[derive(Debug, Clone)]
struct Pattern {
    l: usize,
    j: usize,
    k: Vec<usize>,
}

/// Per-`(l, j)` minimum of the dual slack and the minimizing pattern.
struct Pricing<'a, T: Real> {
    problem: &'a BarycenterProblem<T>,
    /// `Σ_q min_k C[j, k]`: slack of every `(l, j)` at `λ = 0`.
    base_slack: Vec<T>,
    scan_all: bool,
    phasors: &'a [Complex<T>],
}

impl<'a, T: Real> Pricing<'a, T> {
    fn new(problem: &'a BarycenterProblem<T>) -> Self {
        let nk = problem.grid.len();
        let nq = T::from_usize(problem.num_sensors()).unwrap();
        let base_slack = (0..nk)
            .map(|j| {
                (0..nk)
                    .map(|k| problem.cost.get(j, k))
                    .fold(T::infinity(), T::min)
                    * nq
            })
            .collect();
        Self {
            problem,
            base_slack,
            scan_all: nk <= 8,
            phasors: problem.grid.phasors(),
        }
    }

    /// `min_k C[j,k] + Re(w̄ e^{iψ_k})` and its argmin.
    ///
    /// With `C[j,k] = 2 + γ − 2 Re(e^{−iψ_j} e^{iψ_k})` the minimizer is the node
    /// nearest in angle to `2e^{iψ_j} − w`; its neighbours are checked too.
    fn best_node(&self, j: usize, w: Complex<T>) -> (T, usize) {
        let p = self.problem;
        let nk = self.phasors.len();
        let value = |k: usize| p.cost.get(j, k) + (w.conj() * self.phasors[k]).re;
        if self.scan_all {
            return (0..nk).fold((T::infinity(), 0), |(bv, bk), k| {
                let v = value(k);
                if v < bv {
                    (v, k)
                } else {
                    (bv, bk)
                }
            });
        }
        let v = self.phasors[j] * T::lit(2.0) - w;
        let k0 = p.grid.nearest_node(v.im.atan2(v.re));
        let mut best = (value(k0), k0);
        for k in [(k0 + nk - 1) % nk, (k0 + 1) % nk] {
            let val = value(k);
            if val < best.0 {
                best = (val, k);
            }
        }
        best
    }

    /// Slack of every `(l, j)`, laid out `[l][j]`, at dual point `λ`.
    fn slacks(&self, lambda: &[Complex<T>]) -> Vec<T> {
        let p = self.problem;
        let (nq, nl, nk) = (p.num_sensors(), p.num_directions, p.grid.len());
        let mut out = vec![T::zero(); nl * nk];
        for q in 0..nq {
            for l in 0..nl {
                let w = p.steering[q * nl + l].conj() * lambda[q];
                for j in 0..nk {
                    out[l * nk + j] = out[l * nk + j] + self.best_node(j, w).0;
                }
            }
        }
        out
    }

    fn pattern(&self, lambda: &[Complex<T>], l: usize, j: usize) -> Pattern {
        let p = self.problem;
        let nl = p.num_directions;
        let k = (0..p.num_sensors())
            .map(|q| {
                self.best_node(j, p.steering[q * nl + l].conj() * lambda[q])
                    .1
            })
            .collect();
        Pattern { l, j, k }
    }

    /// Constraint `nᵀx ≥ b` of a pattern in the stacked-real dual variable.
    fn constraint(&self, pat: &Pattern) -> (Vec<T>, T) {
        let p = self.problem;
        let nl = p.num_directions;
        let mut normal = Vec::with_capacity(2 * p.num_sensors());
        let mut cost = T::zero();
        for (q, &k) in pat.k.iter().enumerate() {
            let a = p.steering[q * nl + pat.l] * self.phasors[k];
            normal.push(a.re);
            normal.push(a.im);
            cost = cost + p.cost.get(pat.j, k);
        }
        (normal, -cost)
    }
}

fn to_complex<T: Real>(x: &[T]) -> Vec<Complex<T>> {
    x.chunks(2).map(|c| Complex::new(c[0], c[1])).collect()
}

/// Primal objective of the pattern weights `ω = u / 2η` held by the active set.
fn primal_value<T: Real>(problem: &BarycenterProblem<T>, set: &ActiveSet<T, Pattern>) -> T {
    let two_eta = T::lit(2.0) * problem.eta;
    let mut fit = vec![T::zero(); 2 * problem.num_sensors()];
    let mut transport = T::zero();
    for i in 0..set.len() {
        let w = set.mult[i] / two_eta;
        transport = transport - w * set.rhs(i);
        for (f, n) in fit.iter_mut().zip(set.normal(i)) {
            *f = *f + w * *n;
        }
    }
    let misfit: T = to_complex(&fit)
        .iter()
        .zip(&problem.pressures)
        .map(|(a, p)| (*a - *p).norm_sqr())
        .sum();
    transport + problem.eta * misfit
}

/// Dual value `−Re(λᴴp) − |λ|²/4η` at the best feasible multiple `tλ`.
///
/// Each slack is concave in `λ` and equals `base_slack` at `λ = 0`, so
/// `t ≤ base / (base − slack)` restores feasibility of every violated `(l, j)`.
fn dual_value<T: Real>(
    problem: &BarycenterProblem<T>,
    pricing: &Pricing<T>,
    lambda: &[Complex<T>],
    slacks: &[T],
) -> T {
    let nk = problem.grid.len();
    let mut t_max = T::one();
    for (i, &s) in slacks.iter().enumerate() {
        if s < T::zero() {
            let base = pricing.base_slack[i % nk];
            t_max = t_max.min(base / (base - s));
        }
    }
    let lin: T = lambda
        .iter()
        .zip(&problem.pressures)
        .map(|(y, p)| (y.conj() * *p).re)
        .sum();
    let quad: T = lambda.iter().map(|y| y.norm_sqr()).sum::<T>() / (T::lit(4.0) * problem.eta);
    if !(quad > T::zero()) {
        return T::zero();
    }
    let t = (-lin / (T::lit(2.0) * quad)).max(T::zero()).min(t_max);
    -t * lin - t * t * quad
}

fn build_solution<T: Real>(
    problem: &BarycenterProblem<T>,
    set: &ActiveSet<T, Pattern>,
    diagnostics: SolverDiagnostics<T>,
) -> BarycenterSolution<T> {
    let Dims {
        q: nq,
        l: nl,
        k: nk,
    } = problem.dims();
    let two_eta = T::lit(2.0) * problem.eta;
    let mut plans = vec![T::zero(); nq * nl * nk * nk];
    let mut bary = vec![T::zero(); nl * nk];
    let mut sensors = vec![vec![T::zero(); nl * nk]; nq];
    let mut support = 0;
    for (pat, &u) in set.tags.iter().zip(&set.mult) {
        let w = u / two_eta;
        if !(w > T::zero()) {
            continue;
        }
        support += 1;
        bary[pat.l * nk + pat.j] = bary[pat.l * nk + pat.j] + w;
        for (q, &k) in pat.k.iter().enumerate() {
            let at = ((q * nl + pat.l) * nk + pat.j) * nk + k;
            plans[at] = plans[at] + w;
            sensors[q][pat.l * nk + k] = sensors[q][pat.l * nk + k] + w;
        }
    }
    let objective = diagnostics.primal_objective;
    BarycenterSolution {
        dims: (nq, nl, nk),
        barycenter: VectorMeasure::from_flat(nk, bary).expect("pattern weights are non-negative"),
        sensor_measures: sensors
            .into_iter()
            .map(|s| VectorMeasure::from_flat(nk, s).expect("pattern weights are non-negative"))
            .collect(),
        plans,
        objective,
        diagnostics: SolverDiagnostics {
            support,
            ..diagnostics
        },
    }
}

/// Solves the inverse barycenter problem to a certified relative duality gap.
///
/// The Lagrange dual has one complex variable `λ_q` per sensor:
///
/// ```text
/// min ½‖λ + 2ηp‖²   s.t.   Σ_q min_k (C[j,k] + Re(λ̄_q G[q][l] e^{iψ_k})) ≥ 0   for all (l, j)
/// ```
///
/// i.e. a projection onto a polytope whose facets are transport patterns
/// `(l, j, k_0 … k_{Q−1})`. A dual active-set method adds the most violated
/// pattern found by pricing until none remains; the pattern multipliers,
/// divided by `2η`, are the masses of an optimal set of plans. Every iterate
/// yields feasible plans and a dual bound, so the gap is certified.
pub fn solve_barycenter<T: Real>(
    problem: &BarycenterProblem<T>,
    opts: &SolverOptions<T>,
) -> std::result::Result<BarycenterSolution<T>, BarycenterError<T>> {
    opts.validate()?;
    let start = Instant::now();
    let nk = problem.grid.len();
    let two_eta = T::lit(2.0) * problem.eta;
    let x0: Vec<T> = problem
        .pressures
        .iter()
        .flat_map(|p| [-two_eta * p.re, -two_eta * p.im])
        .collect();
    let pricing = Pricing::new(problem);
    let mut set: ActiveSet<T, Pattern> = ActiveSet::new(x0);
    let p_norm2: T = problem.pressures.iter().map(|p| p.norm_sqr()).sum();
    let floor = T::epsilon() * T::lit(16.0) * (T::one() + problem.eta * p_norm2);
    let slack_tol = T::epsilon()
        * T::lit(64.0)
        * (pricing.base_slack.iter().copied().fold(T::zero(), T::max)
            + set.x.iter().map(|v| v.abs()).sum::<T>());

    let mut iterations = 0;
    loop {
        let lambda = to_complex(&set.x);
        let slacks = pricing.slacks(&lambda);
        let (worst, min_slack) =
            slacks
                .iter()
                .enumerate()
                .fold(
                    (0, T::infinity()),
                    |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) },
                );
        let primal = primal_value(problem, &set);
        let dual = dual_value(problem, &pricing, &lambda, &slacks);
        let gap = (primal - dual).max(T::zero());
        let exhausted = min_slack >= -slack_tol;
        let diag = SolverDiagnostics {
            iterations,
            converged: true,
            primal_objective: primal,
            dual_bound: dual,
            gap,
            dual_violation: (-min_slack).max(T::zero()),
            support: 0,
            runtime: start.elapsed(),
        };
        if exhausted || gap <= opts.rel_gap * primal.abs().max(floor) {
            return Ok(build_solution(problem, &set, diag));
        }
        if iterations >= opts.max_iters {
            let diag = SolverDiagnostics {
                converged: false,
                ..diag
            };
            return Err(BarycenterError::NotConverged(Box::new(build_solution(
                problem, &set, diag,
            ))));
        }
        let pat = pricing.pattern(&lambda, worst / nk, worst % nk);
        let (normal, b) = pricing.constraint(&pat);
        debug_assert!(
            (dot(&normal, &set.x) - b - min_slack).abs()
                <= T::lit(1e-6) * (T::one() + min_slack.abs())
        );
        match set.add(normal, b, pat) {
            AddOutcome::Added | AddOutcome::Satisfied => {}
            AddOutcome::Infeasible => {
                return Err(Error::Convergence {
                    iterations,
                    residual: gap.as_f64(),
                }
                .into())
            }
        }
        iterations += 1;
    }
}

/// `Φ̂_l = Σ_k e^{iψ_k} μ⁰_l[k]`.
pub fn extract_coefficients<T: Real>(
    solution: &BarycenterSolution<T>,
    grid: &PhaseGrid<T>,
) -> Result<CoefficientVector<T>> {
    if solution.grid_len() != grid.len() {
        return Err(Error::dim(
            "solution phase grid",
            grid.len(),
            solution.grid_len(),
        ));
    }
    let b = &solution.barycenter;
    Ok(CoefficientVector::new(
        (0..b.num_rows())
            .map(|l| moment_of(b.row(l), grid.phasors()))
            .collect(),
    ))
}

/// Assemble, solve and extract in one call.
pub fn estimate_ot<T: Real>(
    pressures: &[Complex<T>],
    array: &SensorArray<T>,
    dict: &PlaneWaveDictionary<T>,
    grid: &PhaseGrid<T>,
    gamma: T,
    eta: T,
    opts: &SolverOptions<T>,
) -> std::result::Result<CoefficientVector<T>, BarycenterError<T>> {
    let problem = assemble_problem(pressures, array, dict, grid, gamma, eta)?;
    let sol = solve_barycenter(&problem, opts)?;
    Ok(extract_coefficients(&sol, grid)?)
}

/// Forward barycenter of a set of equal-mass measures.
#[derive(Debug, Clone)]
pub struct BarycenterFit<T = f64> {
    pub measure: DiscreteMeasure<T>,
    /// `(1/Q) Σ_q T̃(μ, μ_q)` evaluated exactly at `measure`.
    pub objective: T,
    pub iterations: usize,
}

struct ForwardProx<'a, T> {
    targets: &'a [Vec<T>],
    colsum_cost: Vec<T>,
}

impl<T: Real> PlanProx<T> for ForwardProx<'_, T> {
    // affine projection of v − C/ρ onto { colsum(x_q) = ν_q }
    fn offsets(&self, colsum_v: &[T], rho: T, offsets: &mut [T]) {
        let nk = self.colsum_cost.len();
        let kf = T::from_usize(nk).unwrap();
        for (q, nu) in self.targets.iter().enumerate() {
            for k in 0..nk {
                let shift = (nu[k] - colsum_v[q * nk + k] + self.colsum_cost[k] / rho) / kf;
                offsets[q * nk + k] = -shift;
            }
        }
    }
}

/// `argmin_μ (1/Q) Σ_q T̃(μ, μ_q)`.
///
/// Solved by ADMM over the `Q` plans with the sensor marginals held fixed and
/// the row sums tied together; the returned objective is recomputed with
/// exact transport from the recovered barycenter.
pub fn ot_barycenter<T: Real>(
    measures: &[DiscreteMeasure<T>],
    cost: &GroundCost<T>,
    opts: &SolverOptions<T>,
) -> Result<BarycenterFit<T>> {
    opts.validate()?;
    let nk = cost.len();
    if measures.is_empty() {
        return Err(Error::Domain("barycenter of an empty set".into()));
    }
    for m in measures {
        if m.len() != nk {
            return Err(Error::dim("barycenter input", nk, m.len()));
        }
    }
    let masses: Vec<T> = measures
        .iter()
        .map(|m| m.masses().iter().copied().sum())
        .collect();
    let mass = masses[0];
    let top = masses.iter().fold(T::zero(), |a, &b| a.max(b));
    if masses
        .iter()
        .any(|&m| (m - mass).abs() > mass_tolerance::<T>() * top)
    {
        return Err(Error::Infeasible(
            "barycenter inputs have different masses".into(),
        ));
    }
    if top == T::zero() {
        return Ok(BarycenterFit {
            measure: DiscreteMeasure::zeros(nk),
            objective: T::zero(),
            iterations: 0,
        });
    }
    let targets: Vec<Vec<T>> = measures
        .iter()
        .zip(&masses)
        .map(|(m, &s)| m.masses().iter().map(|&x| x / s).collect())
        .collect();
    let nq = measures.len();
    let dims = Dims { q: nq, l: 1, k: nk };
    let cm = cost.matrix();
    let prox = ForwardProx {
        targets: &targets,
        colsum_cost: (0..nk)
            .map(|k| (0..nk).map(|j| cm[j * nk + k]).sum())
            .collect(),
    };
    let mut engine = Engine::new(dims, cm, T::one(), T::lit(1.6));
    let mut iterations = 0;
    let tol = opts.feas_tol * T::lit(1e-2);
    while iterations < opts.max_iters {
        let mut r = StepResiduals::default();
        for _ in 0..10 {
            r = engine.step(&prox);
            iterations += 1;
        }
        if r.primal_inf <= tol && r.dual_inf <= tol {
            break;
        }
        engine.adapt_rho(&r);
    }

    let plans = engine.natural_plans();
    let qf = T::from_usize(nq).unwrap();
    let mut bary = vec![T::zero(); nk];
    for q in 0..nq {
        for (j, row) in plans[q * nk * nk..(q + 1) * nk * nk].chunks(nk).enumerate() {
            bary[j] = bary[j] + row.iter().copied().sum::<T>() / qf;
        }
    }
    let total: T = bary.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(Error::Convergence {
            iterations,
            residual: f64::NAN,
        });
    }
    let bary: Vec<T> = bary.iter().map(|&b| b / total).collect();
    let unit = DiscreteMeasure::new(bary)?;
    let mut objective = T::zero();
    for t in &targets {
        let (v, _) = ot_distance(&unit, &DiscreteMeasure::new(t.clone())?, cost)?;
        objective = objective + v;
    }
    Ok(BarycenterFit {
        measure: DiscreteMeasure::new(unit.masses().iter().map(|&b| b * mass).collect())?,
        objective: objective * mass / qf,
        iterations,
    })
}
