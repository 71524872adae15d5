//! Max-min phase subproblem over the relaxed unit disk.
//!
//! The objective min_k f_k(φ) is replaced by the log-sum-exp smoothing
//! `-(1/λ)·log Σ_k exp(-λ f_k)`, which is maximized by projected gradient
//! ascent with backtracking for an increasing sequence of λ. The best iterate
//! under the true minimum is returned.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::config::PhaseSolverParams;
use crate::error::{Error, Result};
use crate::link::{PhaseVector, QuadForm};

/// Largest N accepted by [`brute_force_phase_oracle`].
pub const ORACLE_MAX_ELEMENTS: usize = 3;

const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSolve {
    pub phase: PhaseVector,
    /// min_k f_k at `phase`.
    pub value: f64,
    /// min_k f_k at the start vector.
    pub start_value: f64,
    /// Smoothed objective after every accepted step, one list per λ stage.
    pub smoothed_trace: Vec<Vec<f64>>,
    pub iterations: usize,
}

/// Entrywise projection onto |z| ≤ 1.
pub fn project_unit_disk(phi: &DVector<Complex64>) -> DVector<Complex64> {
    phi.map(project_entry)
}

fn project_entry(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r > 1.0 {
        // Rounding can leave |z/r| a hair above one, which would break idempotence.
        let mut u = z / r;
        while u.norm() > 1.0 {
            u *= 1.0 - f64::EPSILON;
        }
        u
    } else {
        z
    }
}

/// -(1/λ)·log Σ exp(-λ v_k), evaluated without overflow.
pub fn smoothed_min(values: &[f64], lambda: f64) -> f64 {
    let m = values.iter().copied().fold(f64::INFINITY, f64::min);
    let s: f64 = values.iter().map(|v| (-lambda * (v - m)).exp()).sum();
    m - s.ln() / lambda
}

pub fn min_value(forms: &[QuadForm], phi: &DVector<Complex64>) -> f64 {
    forms.iter().map(|f| f.value(phi)).fold(f64::INFINITY, f64::min)
}

fn check_forms(forms: &[QuadForm], n: usize) -> Result<()> {
    if forms.is_empty() {
        return Err(Error::InvalidInput("no quadratic forms given".into()));
    }
    for f in forms {
        if f.len() != n {
            return Err(Error::Dimension(format!(
                "{:?} has {} entries, phase vector has {n}",
                f.label,
                f.len()
            )));
        }
        f.check_psd()?;
    }
    Ok(())
}

/// Evaluation state at one point: Bφ per form and the form values.
struct Point {
    phi: DVector<Complex64>,
    bphi: Vec<DVector<Complex64>>,
    values: Vec<f64>,
}

impl Point {
    fn new(forms: &[QuadForm], phi: DVector<Complex64>) -> Self {
        let bphi: Vec<_> = forms.iter().map(|f| &f.b * &phi).collect();
        let values = forms.iter().zip(&bphi).map(|(f, bp)| f.value_with(&phi, bp)).collect();
        Point { phi, bphi, values }
    }

    fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Gradient of the smoothed objective with respect to φ*.
    fn smoothed_gradient(&self, forms: &[QuadForm], lambda: f64) -> DVector<Complex64> {
        let m = self.min();
        let weights: Vec<f64> = self.values.iter().map(|v| (-lambda * (v - m)).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut g = DVector::zeros(self.phi.len());
        for ((f, bp), w) in forms.iter().zip(&self.bphi).zip(weights) {
            let pi = w / total;
            if pi < 1e-300 {
                continue;
            }
            for n in 0..g.len() {
                g[n] += (f.a[n].conj() - bp[n]) * pi;
            }
        }
        g
    }
}

/// Maximizes min_k f_k(φ) subject to |φ_n| ≤ 1, starting from `phi0`.
pub fn solve_maxmin_phase(forms: &[QuadForm], phi0: &PhaseVector, params: &PhaseSolverParams) -> Result<PhaseSolve> {
    let n = phi0.len();
    check_forms(forms, n)?;
    params.validate("phase")?;

    let mut current = Point::new(forms, project_unit_disk(phi0.entries()));
    let start_value = current.min();
    let mut best_phi = current.phi.clone();
    let mut best_value = start_value;

    let scale = {
        let lo = current.values.iter().copied().fold(f64::INFINITY, f64::min).abs();
        let hi = current.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let s = lo.max(1e-3 * hi);
        if s > 0.0 && s.is_finite() {
            s
        } else {
            1.0
        }
    };

    let curvature = forms.iter().map(QuadForm::curvature_bound).fold(0.0, f64::max);
    let eta0 = if curvature > 0.0 {
        params.step_scale / curvature
    } else {
        let a = forms.iter().map(|f| f.a.norm()).fold(0.0, f64::max);
        if a > 0.0 {
            params.step_scale / a
        } else {
            params.step_scale
        }
    };

    let mut trace = Vec::with_capacity(params.stages);
    let mut iterations = 0;
    for stage in 0..params.stages {
        let lambda = params.lambda0 * params.lambda_growth.powi(stage as i32) / scale;
        let mut smoothed = smoothed_min(&current.values, lambda);
        let mut stage_trace = vec![smoothed];
        let mut eta = 0.5 * eta0;
        for _ in 0..params.max_inner_iters {
            let g = current.smoothed_gradient(forms, lambda);
            if g.iter().all(|z| z.norm_sqr() == 0.0) {
                break;
            }
            let mut step = 2.0 * eta;
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                let cand = Point::new(forms, (&current.phi + &g * Complex64::new(step, 0.0)).map(project_entry));
                let s = smoothed_min(&cand.values, lambda);
                if s > smoothed {
                    accepted = Some((cand, s));
                    break;
                }
                step *= 0.5;
            }
            let Some((cand, s)) = accepted else { break };
            iterations += 1;
            eta = step;
            let improvement = s - smoothed;
            current = cand;
            smoothed = s;
            stage_trace.push(s);
            let m = current.min();
            if m > best_value {
                best_value = m;
                best_phi = current.phi.clone();
            }
            if improvement <= params.tolerance * smoothed.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
        trace.push(stage_trace);
    }

    Ok(PhaseSolve {
        phase: PhaseVector::relaxed(project_unit_disk(&best_phi))?,
        value: best_value,
        start_value,
        smoothed_trace: trace,
        iterations,
    })
}

/// Returns deg(φ) when its objective is at least `f_prev`, else φ unchanged.
///
/// Returns the chosen vector and, for the feasible branch, its objective.
pub fn round_feasible<F>(phi_opt: &PhaseVector, f_prev: f64, mut evaluate: F) -> Result<(PhaseVector, Option<f64>)>
where
    F: FnMut(&PhaseVector) -> Result<f64>,
{
    let rounded = phi_opt.to_unit_modulus();
    let value = evaluate(&rounded)?;
    if value >= f_prev || phi_opt.is_unit_modulus() {
        Ok((rounded, Some(value)))
    } else {
        Ok((phi_opt.clone(), None))
    }
}

/// Exhaustive search over `grid`^N unit-modulus points plus the zero vector.
pub fn brute_force_phase_oracle(forms: &[QuadForm], grid: usize) -> Result<(PhaseVector, f64)> {
    let n = forms.first().map(QuadForm::len).unwrap_or(0);
    if n > ORACLE_MAX_ELEMENTS {
        return Err(Error::InvalidInput(format!(
            "oracle supports at most {ORACLE_MAX_ELEMENTS} elements, got {n}"
        )));
    }
    if grid == 0 {
        return Err(Error::InvalidInput("oracle grid must be positive".into()));
    }
    check_forms(forms, n)?;

    let zero = DVector::zeros(n);
    let mut best = (zero.clone(), min_value(forms, &zero));
    let points: Vec<Complex64> = (0..grid)
        .map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / grid as f64))
        .collect();
    let mut idx = vec![0usize; n];
    let mut phi = DVector::from_element(n, points[0]);
    loop {
        for (p, &i) in phi.iter_mut().zip(&idx) {
            *p = points[i];
        }
        let v = min_value(forms, &phi);
        if v > best.1 {
            best = (phi.clone(), v);
        }
        // Odometer increment.
        let mut pos = 0;
        loop {
            if pos == n {
                let phase = PhaseVector::relaxed(best.0)?;
                return Ok((phase, best.1));
            }
            idx[pos] += 1;
            if idx[pos] < grid {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::TermLabel;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn form(a: Vec<Complex64>, b: DMatrix<Complex64>, cst: f64, label: TermLabel) -> QuadForm {
        QuadForm::new(DVector::from_vec(a), b, cst, label).unwrap()
    }

    fn random_forms(rng: &mut ChaCha8Rng, n: usize) -> Vec<QuadForm> {
        TermLabel::ALL
            .iter()
            .map(|&label| {
                let u = DVector::from_fn(n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                let a = DVector::from_fn(n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                let b = (&u * u.adjoint()) * c(rng.gen_range(0.1..1.0), 0.0);
                QuadForm::new(a, b, rng.gen_range(-1.0..1.0), label).unwrap()
            })
            .collect()
    }

    #[test]
    fn projection() {
        let p = project_unit_disk(&DVector::from_vec(vec![c(2.0, 0.0), c(0.0, 0.5)]));
        assert_eq!(p[0], c(1.0, 0.0));
        assert_eq!(p[1], c(0.0, 0.5));
        assert_eq!(project_unit_disk(&p), p);
    }

    #[test]
    fn smoothing_bounds_min() {
        let v = [1.0, 2.0, 3.0, 1.5];
        let mut prev = f64::NEG_INFINITY;
        for lambda in [1.0, 10.0, 100.0] {
            let s = smoothed_min(&v, lambda);
            assert!(s <= 1.0);
            assert!(s > prev);
            assert!(1.0 - s <= (4.0f64).ln() / lambda + 1e-12);
            prev = s;
        }
    }

    #[test]
    fn identical_forms_reach_boundary() {
        let eye = DMatrix::from_element(1, 1, c(1.0, 0.0));
        let forms: Vec<_> = TermLabel::ALL
            .iter()
            .map(|&l| form(vec![c(1.0, 0.0)], eye.clone(), 0.0, l))
            .collect();
        let out = solve_maxmin_phase(&forms, &PhaseVector::zeros(1), &PhaseSolverParams::default()).unwrap();
        assert!((out.value - 1.0).abs() < 1e-6, "{}", out.value);
        assert!((out.phase.entries()[0] - c(1.0, 0.0)).norm() < 1e-3);
    }

    #[test]
    fn pure_quadratic_optimum_is_zero() {
        let b = DMatrix::from_element(2, 2, c(0.5, 0.0)) + DMatrix::identity(2, 2) * c(0.5, 0.0);
        let forms: Vec<_> = TermLabel::ALL
            .iter()
            .enumerate()
            .map(|(k, &l)| form(vec![c(0.0, 0.0); 2], b.clone(), k as f64, l))
            .collect();
        let out = solve_maxmin_phase(&forms, &PhaseVector::ones(2), &PhaseSolverParams::default()).unwrap();
        assert!((out.value - 0.0).abs() < 1e-6);
        assert!(out.phase.entries().norm() < 1e-3);
    }

    #[test]
    fn rejects_indefinite_b() {
        let b = DMatrix::from_element(1, 1, c(-1.0, 0.0));
        let forms = vec![form(vec![c(1.0, 0.0)], b, 0.0, TermLabel::Up1)];
        assert!(matches!(
            solve_maxmin_phase(&forms, &PhaseVector::ones(1), &PhaseSolverParams::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn ascent_and_relaxed_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let forms = random_forms(&mut rng, 6);
            let out = solve_maxmin_phase(&forms, &PhaseVector::ones(6), &PhaseSolverParams::default()).unwrap();
            assert!(out.value >= out.start_value);
            assert!(out.phase.entries().iter().all(|z| z.norm() <= 1.0 + 1e-12));
            for stage in &out.smoothed_trace {
                assert!(stage.windows(2).all(|w| w[1] >= w[0]));
            }
        }
    }

    #[test]
    fn oracle_picks_quarter_turn() {
        let b = DMatrix::from_element(1, 1, c(0.1, 0.0));
        // 2Re{A φ} is largest at φ = j when A = -j.
        let forms: Vec<_> = TermLabel::ALL
            .iter()
            .map(|&l| form(vec![c(0.0, -1.0)], b.clone(), 0.0, l))
            .collect();
        let (phi, v) = brute_force_phase_oracle(&forms, 4).unwrap();
        assert!((phi.entries()[0] - c(0.0, 1.0)).norm() < 1e-12);
        assert!((v - 1.9).abs() < 1e-12);
    }

    #[test]
    fn oracle_rejects_large_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let forms = random_forms(&mut rng, 4);
        assert!(brute_force_phase_oracle(&forms, 4).is_err());
    }

    #[test]
    fn oracle_matches_single_form_calculus() {
        // f(φ) = 2Re{Aφ} − b|φ|² on the unit circle peaks at φ = conj(A)/|A|.
        let a = c(0.6, 0.8);
        let forms = vec![form(vec![a], DMatrix::from_element(1, 1, c(0.2, 0.0)), 0.0, TermLabel::Up1)];
        let (phi, v) = brute_force_phase_oracle(&forms, 256).unwrap();
        let exact = 2.0 * a.norm() - 0.2;
        assert!(v <= exact + 1e-12);
        assert!(exact - v < 2.0 * a.norm() * (1.0 - (std::f64::consts::PI / 256.0).cos()) + 1e-12);
        assert!((phi.entries()[0] - a.conj() / a.norm()).norm() < 2.0 * std::f64::consts::PI / 256.0);
    }

    #[test]
    fn solver_close_to_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let forms = random_forms(&mut rng, 2);
            let (_, oracle) = brute_force_phase_oracle(&forms, 64).unwrap();
            let out = solve_maxmin_phase(&forms, &PhaseVector::ones(2), &PhaseSolverParams::default()).unwrap();
            assert!(out.value >= oracle - 0.02 * oracle.abs() - 1e-9, "{} vs {}", out.value, oracle);
        }
    }

    #[test]
    fn round_feasible_branches() {
        let unit = PhaseVector::from_angles(&[0.3, -1.0]);
        let (p, v) = round_feasible(&unit, 10.0, |_| Ok(0.0)).unwrap();
        assert_eq!(p, unit);
        assert_eq!(v, Some(0.0));

        let relaxed = PhaseVector::relaxed(DVector::from_vec(vec![c(0.5, 0.0)])).unwrap();
        let (p, _) = round_feasible(&relaxed, 1.0, |_| Ok(1.0)).unwrap();
        assert!(p.is_unit_modulus());

        let (p, v) = round_feasible(&relaxed, 1.0, |_| Ok(0.5)).unwrap();
        assert_eq!(p, relaxed);
        assert_eq!(v, None);
    }
}
