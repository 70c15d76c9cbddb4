//! Interval location plus golden-section line search, and Fletcher-Reeves
//! conjugate gradient built on it.

use thiserror::Error;

/// `(sqrt(5) - 1) / 2`
const GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error("no bracketing interval found within {expansions} expansions")]
    NoBracketFound { expansions: usize },
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}

pub type Result<T> = std::result::Result<T, OptimError>;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LineSearchConfig {
    /// Initial step of the interval search.
    pub step: f64,
    /// Final interval width of the golden-section search.
    pub tolerance: f64,
    pub max_expansions: usize,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        LineSearchConfig {
            step: 0.01,
            tolerance: 0.01,
            max_expansions: 60,
        }
    }
}

impl LineSearchConfig {
    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) {
            return Err(OptimError::InvalidConfig("line-search step must be positive"));
        }
        if !(self.tolerance > 0.0) {
            return Err(OptimError::InvalidConfig("line-search tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CgConfig {
    pub max_iterations: usize,
    pub gradient_norm_tolerance: f64,
    /// Iterations between steepest-descent restarts; `None` uses the
    /// parameter dimension.
    pub restart_period: Option<usize>,
}

impl CgConfig {
    pub fn mlp_default() -> Self {
        CgConfig {
            max_iterations: 500,
            gradient_norm_tolerance: 1e-5,
            restart_period: None,
        }
    }

    pub fn hyperparameter_default() -> Self {
        CgConfig {
            max_iterations: 100,
            gradient_norm_tolerance: 1e-5,
            restart_period: None,
        }
    }
}

impl Default for CgConfig {
    fn default() -> Self {
        Self::mlp_default()
    }
}

/// Locates an interval containing a local minimizer of `phi` on `t >= 0` by
/// evaluating at `0, step, 2 step, 4 step, ...` until the value rises.
pub fn bracket_minimum(phi: impl Fn(f64) -> f64, config: &LineSearchConfig) -> Result<(f64, f64)> {
    config.validate()?;
    let f0 = phi(0.0);
    let mut prev = 0.0;
    let mut cur = config.step;
    let mut f_cur = phi(cur);
    if !(f_cur < f0) {
        return Ok((0.0, cur));
    }
    for _ in 0..config.max_expansions {
        let next = 2.0 * cur;
        let f_next = phi(next);
        if !(f_next < f_cur) {
            return Ok((prev, next));
        }
        prev = cur;
        cur = next;
        f_cur = f_next;
    }
    Err(OptimError::NoBracketFound {
        expansions: config.max_expansions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineMinimum {
    pub t: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Golden-section search on `[a, b]` until the interval is narrower than
/// `tolerance`. One new evaluation per iteration.
pub fn golden_section(phi: impl Fn(f64) -> f64, interval: (f64, f64), tolerance: f64) -> Result<LineMinimum> {
    let (mut a, mut b) = interval;
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(OptimError::InvalidInterval { a, b });
    }
    if !(tolerance > 0.0) {
        return Err(OptimError::InvalidConfig("golden-section tolerance must be positive"));
    }
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = phi(c);
    let mut fd = phi(d);
    let mut iterations = 0;
    while b - a > tolerance {
        iterations += 1;
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = phi(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = phi(d);
        }
    }
    let t = 0.5 * (a + b);
    Ok(LineMinimum {
        t,
        value: phi(t),
        iterations,
    })
}

/// Interval location followed by golden-section refinement. Returns `None`
/// when no step along the direction lowers `phi(0)`.
fn line_search(phi: &impl Fn(f64) -> f64, f0: f64, config: &LineSearchConfig) -> Result<Option<(f64, f64)>> {
    let interval = bracket_minimum(phi, config)?;
    let best = golden_section(phi, interval, config.tolerance)?;
    if best.value < f0 {
        return Ok(Some((best.t, best.value)));
    }
    // The minimizer lies closer to zero than the tolerance resolves.
    let mut t = best.t.min(config.step);
    for _ in 0..60 {
        t *= 0.5;
        let v = phi(t);
        if v < f0 {
            return Ok(Some((t, v)));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone)]
pub struct CgResult {
    pub x: Vec<f64>,
    /// Objective value at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl CgResult {
    pub fn value(&self) -> f64 {
        *self.trace.last().expect("trace holds the starting value")
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fletcher-Reeves nonlinear conjugate gradient with a bracketing +
/// golden-section line search and periodic steepest-descent restarts.
/// Line-search failures restart along the steepest direction; a failure on
/// a steepest-descent step ends the run.
pub fn conjugate_gradient(
    objective: impl Fn(&[f64]) -> f64,
    gradient: impl Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
    cg: &CgConfig,
    ls: &LineSearchConfig,
) -> Result<CgResult> {
    ls.validate()?;
    let dim = x0.len();
    let restart_period = cg.restart_period.unwrap_or(dim).max(1);
    let mut x = x0.to_vec();
    let mut fx = objective(&x);
    let mut trace = vec![fx];
    let mut g = gradient(&x);
    let mut direction: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut since_restart = 0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cg.max_iterations {
        if norm(&g) < cg.gradient_norm_tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let steepest = since_restart == 0;
        let phi = |t: f64| {
            let probe: Vec<f64> = x.iter().zip(&direction).map(|(a, d)| a + t * d).collect();
            objective(&probe)
        };
        let step = if dot(&direction, &g) < 0.0 {
            line_search(&phi, fx, ls).ok().flatten()
        } else {
            None
        };
        let Some((t, f_new)) = step else {
            if steepest {
                break;
            }
            direction = g.iter().map(|v| -v).collect();
            since_restart = 0;
            continue;
        };

        for (xi, di) in x.iter_mut().zip(&direction) {
            *xi += t * di;
        }
        fx = f_new;
        trace.push(fx);
        let g_new = gradient(&x);
        since_restart += 1;
        if since_restart >= restart_period {
            direction = g_new.iter().map(|v| -v).collect();
            since_restart = 0;
        } else {
            let beta = dot(&g_new, &g_new) / dot(&g, &g).max(f64::MIN_POSITIVE);
            for (d, gi) in direction.iter_mut().zip(&g_new) {
                *d = -gi + beta * *d;
            }
        }
        g = g_new;
    }
    if !converged && norm(&g) < cg.gradient_norm_tolerance {
        converged = true;
    }
    Ok(CgResult {
        x,
        trace,
        iterations,
        converged,
    })
}

/// Central-difference gradient with step `h`.
pub fn finite_difference_gradient(objective: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = objective(&probe);
            probe[i] = orig - h;
            let down = objective(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracket_contains_minimizer() {
        let (a, b) = bracket_minimum(|t| (t - 2.0).powi(2), &LineSearchConfig::default()).unwrap();
        assert!(a <= 2.0 && 2.0 <= b, "[{a}, {b}]");
    }

    #[test]
    fn bracket_increasing_function() {
        let cfg = LineSearchConfig::default();
        assert_eq!(bracket_minimum(|t| t, &cfg).unwrap(), (0.0, 0.01));
    }

    #[test]
    fn bracket_unbounded_descent() {
        assert!(matches!(
            bracket_minimum(|t| -t, &LineSearchConfig::default()),
            Err(OptimError::NoBracketFound { .. })
        ));
    }

    #[test]
    fn golden_section_examples() {
        let m = golden_section(|t| (t - 2.0).powi(2), (0.0, 5.0), 0.01).unwrap();
        assert!((m.t - 2.0).abs() <= 0.01);
        let m = golden_section(|t| (t - 1.0).abs(), (0.0, 3.0), 0.01).unwrap();
        assert!((m.t - 1.0).abs() <= 0.01);
        let m = golden_section(f64::cos, (2.0, 5.0), 0.01).unwrap();
        assert!((m.t - std::f64::consts::PI).abs() <= 0.01);
    }

    #[test]
    fn golden_section_rejects_bad_interval() {
        assert!(matches!(
            golden_section(|t| t, (1.0, 1.0), 0.01),
            Err(OptimError::InvalidInterval { .. })
        ));
        assert!(golden_section(|t| t, (2.0, 1.0), 0.01).is_err());
    }

    #[test]
    fn golden_section_iteration_bound() {
        for &(a, b, tol) in &[(0.0, 5.0, 0.01), (-3.0, 40.0, 1e-4), (0.0, 1.0, 0.3)] {
            let m = golden_section(|t| (t - 0.7).powi(2), (a, b), tol).unwrap();
            let bound = (((b - a) / tol).ln() / (1.0 / GOLDEN).ln()).ceil() as usize + 2;
            assert!(m.iterations <= bound, "{} > {bound}", m.iterations);
        }
    }

    #[test]
    fn cg_on_diagonal_quadratic() {
        let f = |x: &[f64]| 0.5 * (x[0] * x[0] + 4.0 * x[1] * x[1]) - x[0] - 4.0 * x[1];
        let g = |x: &[f64]| vec![x[0] - 1.0, 4.0 * x[1] - 4.0];
        let r = conjugate_gradient(f, g, &[0.0, 0.0], &CgConfig::default(), &LineSearchConfig::default()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-2 && (r.x[1] - 1.0).abs() < 1e-2, "{:?}", r.x);
    }

    #[test]
    fn cg_constant_objective_returns_start() {
        let r = conjugate_gradient(
            |_| 3.0,
            |x| vec![0.0; x.len()],
            &[1.0, -2.0],
            &CgConfig::default(),
            &LineSearchConfig::default(),
        )
        .unwrap();
        assert_eq!(r.x, vec![1.0, -2.0]);
        assert!(r.converged);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn cg_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let g = |x: &[f64]| {
            vec![
                -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ]
        };
        let cg = CgConfig {
            max_iterations: 20_000,
            gradient_norm_tolerance: 1e-8,
            restart_period: None,
        };
        let ls = LineSearchConfig {
            step: 1e-3,
            tolerance: 1e-6,
            max_expansions: 60,
        };
        let r = conjugate_gradient(f, g, &[-1.2, 1.0], &cg, &ls).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-2 && (r.x[1] - 1.0).abs() < 1e-2, "{:?}", r.x);
    }

    #[test]
    fn finite_differences() {
        let d = finite_difference_gradient(|x| x[0] * x[0], &[3.0], 1e-5);
        assert!((d[0] - 6.0).abs() < 1e-8);
        let d = finite_difference_gradient(|x| 2.5 * x[0] - 4.0 * x[1], &[0.3, 7.0], 1e-3);
        assert!((d[0] - 2.5).abs() < 1e-9 && (d[1] + 4.0).abs() < 1e-9);
        let d = finite_difference_gradient(|x| x[0].sin(), &[0.0], 1e-5);
        assert!((d[0] - 1.0).abs() < 1e-9);
    }
}
