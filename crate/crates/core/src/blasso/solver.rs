//! Two-stage solver for the nonnegative spike-recovery program
//! `min_m ½‖Φm - y‖² + λ‖m‖_TV` over positive measures.
//!
//! Stage 1 solves the nonnegative LASSO on a uniform position grid with
//! greedy coordinate descent (largest-KKT-violation rule, exact coordinate
//! minimization — the objective is strictly non-increasing per iteration
//! and iterates stay exactly sparse, which accelerated proximal gradient
//! cannot guarantee on a grid this coherent). Every inner product goes
//! through the kernel Gram, no function-space vectors are formed. Stage 2
//! extracts clusters from the grid solution and polishes them with Newton
//! iterations on the continuous first-order optimality system
//! `Γ_x^*(Φ_x a - y) + λ (1_N; 0) = 0`.

use super::{BlassoError, Observation, SpikeTrain, SupportMatch};
use crate::certificates::lambda_certificate;
use crate::kernels::{Domain, Kernel};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Number of grid points for stage 1; 0 picks the kernel default
    /// (16·fc over the torus, 40 per σ over the data span on the line,
    /// capped at 4096).
    pub grid_points: usize,
    pub lambda: f64,
    /// Stage-1 iteration cap.
    pub fista_max_iter: usize,
    /// Stage-1 stops when the largest KKT violation falls below this,
    /// relative to `max(‖Φ*y‖∞, λ)`.
    pub fista_tol: f64,
    pub refine_max_iter: usize,
    /// Newton stops when `‖f‖∞ / λ` (the dual-certificate deviation scale)
    /// drops below this.
    pub refine_tol: f64,
    /// Grid atoms closer than this merge into one cluster; 0 picks twice
    /// the grid step.
    pub merge_radius: f64,
    /// Grid atoms below this amplitude are discarded before clustering.
    pub amplitude_floor: f64,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            grid_points: 0,
            lambda,
            fista_max_iter: 50_000,
            // initializer-grade: cluster centroids localize well before the
            // grid dual gap closes on coherent grids
            fista_tol: 1e-5,
            refine_max_iter: 60,
            refine_tol: 1e-7,
            merge_radius: 0.0,
            amplitude_floor: 1e-7,
            seed: 0,
        }
    }

    /// Absolute `‖f‖∞` threshold for the Newton stage. `data_scale` is
    /// `‖Φ*y‖∞`-like; the floor keeps the target above the f64 noise of the
    /// residual evaluation when λ is tiny.
    fn effective_refine_tol(&self, data_scale: f64) -> f64 {
        (self.refine_tol * self.lambda).max(1e-13 * data_scale)
    }
}

/// Outcome of a solve: the recovered measure, dual-certificate diagnostics,
/// and (once a ground truth is attached) sup-norm errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub measure: SpikeTrain,
    pub spike_count: usize,
    /// `sup |η_λ|` on the verification grid.
    pub dual_sup: f64,
    /// `η_λ` at the recovered spikes (1 at an exact solution).
    pub dual_at_spikes: Vec<f64>,
    pub converged: bool,
    /// (stage-1 iterations, Newton iterations).
    pub iterations: (usize, usize),
    pub support: Option<SupportMatch>,
}

impl RecoveryResult {
    /// Attach errors against a declared ground truth.
    pub fn with_truth(mut self, truth: &SpikeTrain) -> Self {
        self.support = Some(super::match_support(&self.measure, truth));
        self
    }
}

fn solver_grid(kernel: &Kernel, y: &Observation, cfg: &SolverConfig) -> Vec<f64> {
    match kernel.domain() {
        Domain::Torus => {
            let m = if cfg.grid_points > 0 {
                cfg.grid_points
            } else {
                (16.0 / kernel.scale()).round() as usize
            }
            .clamp(8, 4096);
            (0..m).map(|i| -0.5 + i as f64 / m as f64).collect()
        }
        Domain::Line => {
            let sigma = kernel.scale();
            let (mut lo, mut hi) = (-1.0f64, 1.0f64);
            if let crate::kernels::DualVector::Atoms(combo) = &y.data {
                for a in combo.atoms() {
                    lo = lo.min(a.position);
                    hi = hi.max(a.position);
                }
            }
            let (lo, hi) = (lo - 6.0 * sigma, hi + 6.0 * sigma);
            let m = if cfg.grid_points > 0 {
                cfg.grid_points
            } else {
                (40.0 * (hi - lo) / sigma).round() as usize
            }
            .clamp(8, 4096);
            (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect()
        }
    }
}

/// Greedy coordinate descent for `min_{a ≥ 0} ½ aᵀQa - bᵀa + λ Σ a`:
/// repeatedly minimize exactly along the coordinate with the largest KKT
/// violation, keeping `o = Qa` incrementally. Returns
/// `(a, iterations, converged)`; the objective is non-increasing per
/// iteration and iterates are exactly sparse.
fn nonneg_lasso_grid(
    q: &DMatrix<f64>,
    b: &DVector<f64>,
    lambda: f64,
    max_iter: usize,
    tol: f64,
) -> (DVector<f64>, usize, bool) {
    let m = b.len();
    let mut a: DVector<f64> = DVector::zeros(m);
    let mut o: DVector<f64> = DVector::zeros(m); // Q a
    let scale = b.amax().max(lambda);
    let mut iters = 0usize;
    let mut converged = false;
    for k in 0..max_iter {
        iters = k + 1;
        // g_i = -(∂/∂a_i) objective = b_i - (Qa)_i - λ
        let mut best = (0usize, 0.0f64);
        for i in 0..m {
            let g = b[i] - o[i] - lambda;
            let viol = if a[i] > 0.0 { g.abs() } else { g.max(0.0) };
            if viol > best.1 {
                best = (i, viol);
            }
        }
        if best.1 <= tol * scale {
            converged = true;
            break;
        }
        let i = best.0;
        let g = b[i] - o[i] - lambda;
        let next = (a[i] + g / q[(i, i)]).max(0.0);
        let delta = next - a[i];
        if delta != 0.0 {
            a[i] = next;
            for r in 0..m {
                o[r] += delta * q[(r, i)];
            }
        }
    }
    (a, iters, converged)
}

fn torus_wrap(x: f64) -> f64 {
    let mut v = (x + 0.5).rem_euclid(1.0) - 0.5;
    if v >= 0.5 {
        v -= 1.0;
    }
    v
}

/// Group surviving grid atoms into clusters no wider than `merge_radius`
/// and collapse each to its amplitude-weighted centroid.
fn extract_clusters(
    grid: &[f64],
    amp: &DVector<f64>,
    floor: f64,
    merge_radius: f64,
    torus: bool,
) -> SpikeTrain {
    let mut survivors: Vec<(f64, f64)> = grid
        .iter()
        .zip(amp.iter())
        .filter(|(_, &a)| a > floor)
        .map(|(&x, &a)| (x, a))
        .collect();
    if survivors.is_empty() {
        return SpikeTrain::empty();
    }
    survivors.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut clusters: Vec<Vec<(f64, f64)>> = vec![vec![survivors[0]]];
    for &(x, a) in &survivors[1..] {
        let last = clusters.last_mut().unwrap();
        if x - last.last().unwrap().0 <= merge_radius {
            last.push((x, a));
        } else {
            clusters.push(vec![(x, a)]);
        }
    }
    // the torus seam: first and last clusters may be one cluster wrapped
    if torus && clusters.len() > 1 {
        let first_lo = clusters.first().unwrap().first().unwrap().0;
        let last_hi = clusters.last().unwrap().last().unwrap().0;
        if (first_lo + 1.0) - last_hi <= merge_radius {
            let mut tail = clusters.pop().unwrap();
            for p in &mut tail {
                p.0 -= 1.0;
            }
            tail.extend(clusters[0].drain(..));
            clusters[0] = tail;
        }
    }
    let mut amplitudes = Vec::with_capacity(clusters.len());
    let mut positions = Vec::with_capacity(clusters.len());
    for cl in &clusters {
        let total: f64 = cl.iter().map(|p| p.1).sum();
        let centroid: f64 = cl.iter().map(|p| p.0 * p.1).sum::<f64>() / total;
        amplitudes.push(total);
        positions.push(if torus { torus_wrap(centroid) } else { centroid });
    }
    SpikeTrain { amplitudes, positions }
}

/// Newton refinement on the first-order optimality system
/// `f(a, x) = Γ_x^*(Φ_x a - y) + λ (1_N; 0)`, using the analytic block
/// Jacobian `Γ*Γ·diag(I, diag(a))` plus the second-derivative correction.
/// Colliding spikes are merged and the iteration restarted once.
pub fn refine_first_order(
    kernel: &Kernel,
    observation: &Observation,
    lambda: f64,
    init: &SpikeTrain,
    max_iter: usize,
    tol: f64,
    merge_radius: f64,
) -> Result<(SpikeTrain, usize), BlassoError> {
    let mut train = init.clone();
    let mut merged_once = false;
    let mut total_iters = 0usize;
    'outer: loop {
        let n = train.len();
        if n == 0 {
            return Ok((train, total_iters));
        }
        let mut a = DVector::from_column_slice(&train.amplitudes);
        let mut x = DVector::from_column_slice(&train.positions);
        let mut prev_res = f64::INFINITY;
        let mut rises = 0usize;
        for _ in 0..max_iter {
            let f = first_order_residual(kernel, observation, lambda, &a, &x)?;
            let res = f.amax();
            if res < tol {
                train = SpikeTrain { amplitudes: a.iter().copied().collect(), positions: x.iter().copied().collect() };
                return Ok((train, total_iters));
            }
            if res > prev_res * (1.0 + 1e-12) {
                rises += 1;
                if rises >= 3 || !res.is_finite() {
                    return Err(BlassoError::RefinementDiverged { iterations: total_iters, residual: res });
                }
            } else {
                rises = 0;
            }
            prev_res = res;
            let jac = first_order_jacobian(kernel, observation, &a, &x)?;
            let delta = jac
                .lu()
                .solve(&(-&f))
                .ok_or(BlassoError::SingularJacobian { iterations: total_iters })?;
            // clamp position moves to half the kernel scale per step
            let max_move = (n..2 * n).map(|i| delta[i].abs()).fold(0.0f64, f64::max);
            let damp = (0.5 * kernel.scale() / max_move).min(1.0);
            for i in 0..n {
                a[i] += damp * delta[i];
                x[i] += damp * delta[n + i];
            }
            total_iters += 1;
            // active set: amplitudes pushed to zero or below leave the support
            if a.iter().any(|&ai| ai <= 0.0) {
                let keep: Vec<usize> = (0..n).filter(|&i| a[i] > 0.0).collect();
                train = SpikeTrain {
                    amplitudes: keep.iter().map(|&i| a[i]).collect(),
                    positions: keep.iter().map(|&i| x[i]).collect(),
                };
                if train.is_empty() {
                    return Ok((train, total_iters));
                }
                continue 'outer;
            }
            // collision check
            for i in 0..n {
                for j in (i + 1)..n {
                    if (x[i] - x[j]).abs() < merge_radius {
                        if merged_once {
                            return Err(BlassoError::CollidingSpikes);
                        }
                        merged_once = true;
                        let mut amplitudes = Vec::new();
                        let mut positions = Vec::new();
                        let total = a[i] + a[j];
                        let centroid = if total.abs() > 1e-300 {
                            (a[i] * x[i] + a[j] * x[j]) / total
                        } else {
                            0.5 * (x[i] + x[j])
                        };
                        for k in 0..n {
                            if k != i && k != j {
                                amplitudes.push(a[k]);
                                positions.push(x[k]);
                            }
                        }
                        amplitudes.push(total);
                        positions.push(centroid);
                        train = SpikeTrain { amplitudes, positions };
                        continue 'outer;
                    }
                }
            }
        }
        let res = first_order_residual(kernel, observation, lambda, &a, &x)?.amax();
        return Err(BlassoError::RefinementDiverged { iterations: total_iters, residual: res });
    }
}

/// `f(a, x) ∈ R^{2N}`: value rows `⟨φ(x_i), Φa - y⟩ + λ`, slope rows
/// `⟨φ'(x_i), Φa - y⟩`.
pub fn first_order_residual(
    kernel: &Kernel,
    observation: &Observation,
    lambda: f64,
    a: &DVector<f64>,
    x: &DVector<f64>,
) -> Result<DVector<f64>, BlassoError> {
    let n = a.len();
    let mut f = DVector::zeros(2 * n);
    for i in 0..n {
        for d in 0..2usize {
            let mut v = 0.0;
            for j in 0..n {
                v += a[j] * kernel.correlation_deriv(d, 0, x[i], x[j])?;
            }
            v -= observation.correlate(kernel, d, x[i])?;
            if d == 0 {
                v += lambda;
            }
            f[d * n + i] = v;
        }
    }
    Ok(f)
}

/// Analytic Jacobian of [`first_order_residual`] in `(a, x)`.
pub fn first_order_jacobian(
    kernel: &Kernel,
    observation: &Observation,
    a: &DVector<f64>,
    x: &DVector<f64>,
) -> Result<DMatrix<f64>, BlassoError> {
    let n = a.len();
    let mut jac = DMatrix::zeros(2 * n, 2 * n);
    // residual correlations ⟨φ^{(d)}(x_i), Φa - y⟩ for the diagonal terms
    let mut resid = vec![[0.0f64; 2]; n];
    for (i, r) in resid.iter_mut().enumerate() {
        for (d, slot) in r.iter_mut().enumerate() {
            let mut v = 0.0;
            for j in 0..n {
                v += a[j] * kernel.correlation_deriv(d + 1, 0, x[i], x[j])?;
            }
            v -= observation.correlate(kernel, d + 1, x[i])?;
            *slot = v;
        }
    }
    for i in 0..n {
        for j in 0..n {
            let c00 = kernel.correlation_deriv(0, 0, x[i], x[j])?;
            let c01 = kernel.correlation_deriv(0, 1, x[i], x[j])?;
            let c10 = kernel.correlation_deriv(1, 0, x[i], x[j])?;
            let c11 = kernel.correlation_deriv(1, 1, x[i], x[j])?;
            jac[(i, j)] = c00;
            jac[(i, n + j)] = a[j] * c01;
            jac[(n + i, j)] = c10;
            jac[(n + i, n + j)] = a[j] * c11;
        }
        jac[(i, n + i)] += resid[i][0];
        jac[(n + i, n + i)] += resid[i][1];
    }
    Ok(jac)
}

/// Verification grid for the dual certificate (finer bandwidth fraction
/// than the solver grid).
fn dual_grid(kernel: &Kernel, measure: &SpikeTrain) -> Vec<f64> {
    match kernel.domain() {
        Domain::Torus => {
            let m = (16.0 / kernel.scale()).round() as usize;
            (0..m).map(|i| -0.5 + i as f64 / m as f64).collect()
        }
        Domain::Line => {
            let sigma = kernel.scale();
            let lo = measure.positions.iter().copied().fold(0.0f64, f64::min) - 8.0 * sigma;
            let hi = measure.positions.iter().copied().fold(0.0f64, f64::max) + 8.0 * sigma;
            let m = ((hi - lo) * 50.0 / sigma).round() as usize;
            (0..=m).map(|i| lo + (hi - lo) * i as f64 / m as f64).collect()
        }
    }
}

/// Solve the regularized recovery program for the observation `y`.
pub fn solve_blasso(
    kernel: &Kernel,
    y: &Observation,
    cfg: &SolverConfig,
) -> Result<RecoveryResult, BlassoError> {
    assert!(cfg.lambda > 0.0, "lambda must be positive");
    let grid = solver_grid(kernel, y, cfg);
    let m = grid.len();
    let step = if m >= 2 { (grid[1] - grid[0]).abs() } else { kernel.scale() };
    let merge_radius = if cfg.merge_radius > 0.0 { cfg.merge_radius } else { 2.0 * step };

    let mut b = DVector::zeros(m);
    for i in 0..m {
        b[i] = y.correlate(kernel, 0, grid[i])?;
    }
    // λ at or above the max correlation makes the zero measure optimal
    if b.max() <= cfg.lambda {
        let dual = lambda_certificate(kernel, &y.data, cfg.lambda, &[], &[])?;
        let mut dual_sup = 0.0f64;
        for &x in &grid {
            dual_sup = dual_sup.max(dual.eval(x)?.abs());
        }
        return Ok(RecoveryResult {
            measure: SpikeTrain::empty(),
            spike_count: 0,
            dual_sup,
            dual_at_spikes: Vec::new(),
            converged: true,
            iterations: (0, 0),
            support: None,
        });
    }

    let mut q = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = kernel.correlation_deriv(0, 0, grid[i], grid[j])?;
            q[(i, j)] = v;
            q[(j, i)] = v;
        }
    }
    // Stage 1 only initializes the Newton stage, so its regularization is
    // floored: at tiny λ the grid problem (more atoms than measurement
    // dimensions) is massively non-unique and the iterate smears across the
    // grid. The floored solve is sparse and lands in the Newton basin; the
    // refinement then solves the optimality system at the true λ.
    let stage1_lambda = cfg.lambda.max(1e-4 * b.max());
    let (amp, grid_iters, fista_ok) =
        nonneg_lasso_grid(&q, &b, stage1_lambda, cfg.fista_max_iter, cfg.fista_tol);

    let torus = kernel.domain() == Domain::Torus;
    let floor = cfg.amplitude_floor.max(1e-3 * amp.max());
    let init = extract_clusters(&grid, &amp, floor, merge_radius, torus);

    // Newton polish with active-set pruning: an atom whose amplitude
    // leaves the nonnegative set is dropped and the reduced support is
    // refined again.
    let mut candidate = init.clone();
    let mut refine_iters = 0usize;
    let mut refined_ok = true;
    for _round in 0..3 {
        match refine_first_order(
            kernel,
            y,
            cfg.lambda,
            &candidate,
            cfg.refine_max_iter,
            cfg.effective_refine_tol(b.max()),
            0.25 * merge_radius,
        ) {
            Ok((train, iters)) => {
                refine_iters += iters;
                let keep: Vec<usize> = (0..train.len())
                    .filter(|&i| train.amplitudes()[i] > cfg.amplitude_floor)
                    .collect();
                if keep.len() == train.len() {
                    candidate = train;
                    refined_ok = true;
                    break;
                }
                candidate = SpikeTrain {
                    amplitudes: keep.iter().map(|&i| train.amplitudes()[i]).collect(),
                    positions: keep.iter().map(|&i| train.positions()[i]).collect(),
                };
            }
            // refinement failure falls back to the grid clusters, flagged
            Err(BlassoError::SingularJacobian { .. })
            | Err(BlassoError::CollidingSpikes)
            | Err(BlassoError::RefinementDiverged { .. }) => {
                candidate = init.clone();
                refined_ok = false;
                break;
            }
            Err(other) => return Err(other),
        }
    }
    let measure = candidate;

    let measure = SpikeTrain {
        amplitudes: measure.amplitudes.clone(),
        positions: measure
            .positions
            .iter()
            .map(|&p| if torus { torus_wrap(p) } else { p })
            .collect(),
    };

    let dual = lambda_certificate(
        kernel,
        &y.data,
        cfg.lambda,
        measure.amplitudes(),
        measure.positions(),
    )?;
    let mut dual_sup = 0.0f64;
    for &x in &dual_grid(kernel, &measure) {
        dual_sup = dual_sup.max(dual.eval(x)?.abs());
    }
    let mut dual_at_spikes = Vec::with_capacity(measure.len());
    for &x in measure.positions() {
        dual_at_spikes.push(dual.eval(x)?);
    }

    Ok(RecoveryResult {
        spike_count: measure.len(),
        measure,
        dual_sup,
        dual_at_spikes,
        converged: fista_ok && refined_ok,
        iterations: (grid_iters, refine_iters),
        support: None,
    })
}
