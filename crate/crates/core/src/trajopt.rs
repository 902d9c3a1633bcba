//! One SCA trajectory step: the convex program built by linearizing the
//! slot-separable rate surrogate around the previous trajectory, solved
//! jointly over all slots (the velocity chain couples them).
//!
//! Position enters the rates only through the slot-wise slant ranges, so the
//! step introduces slacks `alpha_k[n] >= H^2 + |q[n] - q_k|^2` (user ranges)
//! and `gamma[n] <= H^2 + |q[n] - q_E|^2` (eavesdropper range, linearized to
//! stay convex). The user-rate term keeps its exact concave log part and
//! linearizes the convex `-log` part; the eavesdropper term is kept in exact
//! concave form. Channel directions are frozen at the previous iterate, and
//! the sensing-SINR constraint collapses to a disk around the eavesdropper
//! because the only position-dependent factor in the echo SINR is the
//! sensing gain.

use thiserror::Error;

use crate::channel::ChannelState;
use crate::conic::{ConicProblem, LinExpr, SolveError};
use crate::metrics::BeamformerSet;
use crate::scenario::{dist2d, ScenarioConfig, Trajectory};

const LN2: f64 = std::f64::consts::LN_2;

/// Frozen per-slot data for one trajectory step.
#[derive(Debug, Clone)]
pub struct StepCoefficients {
    /// `c_k[n] = |chi_k^H f_k|^2`, indexed `[n][k]`.
    pub c_user: Vec<Vec<f64>>,
    /// `c_{E,k}[n] = |chi_E^H f_k|^2`, indexed `[n][k]`.
    pub c_eve: Vec<Vec<f64>>,
    /// `C_k[n] = sum_i |chi_k^H f_i|^2 + |chi_k^H f_E|^2`, indexed `[n][k]`.
    pub big_c_user: Vec<Vec<f64>>,
    /// `C_E[n] = sum_i |chi_E^H f_i|^2 + |chi_E^H f_E|^2`.
    pub big_c_eve: Vec<f64>,
    /// `C_beta = sigma_n^2 / (M beta0)`.
    pub c_beta: f64,
    /// Linearization trajectory.
    pub anchor: Vec<[f64; 2]>,
    /// `alpha~_k[n] = H^2 + |q~[n] - q_k|^2`.
    pub alpha_anchor: Vec<Vec<f64>>,
    /// `gamma~[n] = H^2 + |q~[n] - q_E|^2`.
    pub gamma_anchor: Vec<f64>,
    /// Sensing-disk bound: `|q[n] - q_E|^2 <= disk_r2[n]`. Negative means
    /// the echo SINR threshold is unattainable at that slot.
    pub disk_r2: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum TrajStepError {
    #[error("sensing disk empty at slot {slot}: threshold unattainable for any position")]
    SensingDiskEmpty { slot: usize },
    #[error("sensing disk unreachable at slot {slot}: endpoints too far for the speed cap")]
    SensingDiskUnreachable { slot: usize },
    #[error("trajectory subproblem infeasible")]
    Infeasible,
    #[error("trajectory subproblem solver failure: {0}")]
    Solver(String),
}

/// Result of one trajectory step.
#[derive(Debug, Clone)]
pub struct TrajStep {
    pub trajectory: Trajectory,
    /// Linearized objective at the returned trajectory with tight slacks.
    pub surrogate_objective: f64,
    pub solver_status: String,
    /// Contraction factor applied by the kinematic repair, if any.
    pub contraction: Option<f64>,
}

/// Freeze channel directions and beams at the previous iterate and collect
/// every coefficient of the linearized subproblem.
///
/// `channels` must be the LOS channel state evaluated along `prev`.
pub fn compute_step_coefficients(
    prev: &Trajectory,
    beams: &BeamformerSet,
    channels: &ChannelState,
    cfg: &ScenarioConfig,
) -> StepCoefficients {
    let n_slots = cfg.slot_count;
    let k_users = cfg.user_count();
    let c_beta = cfg.noise_power / (cfg.antenna_count() as f64 * cfg.beta0);
    let h2 = cfg.altitude * cfg.altitude;

    let mut c_user = vec![vec![0.0; k_users]; n_slots];
    let mut c_eve = vec![vec![0.0; k_users]; n_slots];
    let mut big_c_user = vec![vec![0.0; k_users]; n_slots];
    let mut big_c_eve = vec![0.0; n_slots];
    let mut alpha_anchor = vec![vec![0.0; k_users]; n_slots];
    let mut gamma_anchor = vec![0.0; n_slots];
    let mut disk_r2 = vec![0.0; n_slots];

    for n in 0..n_slots {
        let ch = &channels.slots[n];
        let jam = &beams.jam_beams[n];
        let w = &beams.rx_filters[n];
        for k in 0..k_users {
            let chi_k = &ch.user_dirs[k];
            c_user[n][k] = chi_k.dotc(&beams.user_beams[n][k]).norm_sqr();
            c_eve[n][k] = ch.eve_dir.dotc(&beams.user_beams[n][k]).norm_sqr();
            big_c_user[n][k] = beams.user_beams[n]
                .iter()
                .map(|f| chi_k.dotc(f).norm_sqr())
                .sum::<f64>()
                + chi_k.dotc(jam).norm_sqr();
            debug_assert!(big_c_user[n][k] >= c_user[n][k] - 1e-15);
            alpha_anchor[n][k] = h2 + dist2d(prev.points[n], cfg.user_positions[k]).powi(2);
        }
        big_c_eve[n] = beams.user_beams[n]
            .iter()
            .map(|f| ch.eve_dir.dotc(f).norm_sqr())
            .sum::<f64>()
            + ch.eve_dir.dotc(jam).norm_sqr();
        gamma_anchor[n] = h2 + dist2d(prev.points[n], cfg.eve_position).powi(2);

        // Sensing disk: zeta(q)^2 * G / D >= Gamma_th with
        // G = |w^H chi_E|^2 * (sum_i |chi_E^H f_i|^2 + |chi_E^H f_E|^2) and
        // D the self-interference-plus-noise power, both position-free at
        // frozen angles.
        let w_chi = w.dotc(&ch.eve_dir).norm_sqr();
        let g = w_chi * big_c_eve[n];
        let si_w = ch.si.adjoint() * w;
        let d: f64 = beams.user_beams[n]
            .iter()
            .chain(std::iter::once(jam))
            .map(|f| si_w.dotc(f).norm_sqr())
            .sum::<f64>()
            + cfg.noise_power;
        let m = cfg.antenna_count() as f64;
        // zeta = sqrt(M^2 beta0 rcs) / den, den = H^2 + |q - q_E|^2 (or the
        // squared horizontal distance in paper-literal mode), so the
        // constraint is den <= sqrt(M^2 beta0 rcs * G / (Gamma_th * D)).
        let den_bound = (m * m * cfg.beta0 * cfg.rcs * g / (cfg.sensing_sinr_min * d)).sqrt();
        disk_r2[n] = if cfg.paper_literal_sensing_gain { den_bound } else { den_bound - h2 };
    }

    StepCoefficients {
        c_user,
        c_eve,
        big_c_user,
        big_c_eve,
        c_beta,
        anchor: prev.points.clone(),
        alpha_anchor,
        gamma_anchor,
        disk_r2,
    }
}

/// Linearized objective (bits) at trajectory `q` with tight slacks
/// `alpha = H^2 + |q - q_k|^2` and `gamma` at the linearized eavesdropper
/// bound.
pub fn surrogate_objective(coeffs: &StepCoefficients, points: &[[f64; 2]], cfg: &ScenarioConfig) -> f64 {
    let h2 = cfg.altitude * cfg.altitude;
    let mut total = 0.0;
    for n in 0..points.len() {
        let gamma = linearized_eve_bound(coeffs, n, points[n], cfg);
        for k in 0..cfg.user_count() {
            let alpha = h2 + dist2d(points[n], cfg.user_positions[k]).powi(2);
            total += surrogate_term(coeffs, n, k, alpha, gamma);
        }
    }
    total
}

/// One `(slot, user)` term of the linearized objective at arbitrary slacks.
pub fn surrogate_term(coeffs: &StepCoefficients, n: usize, k: usize, alpha: f64, gamma: f64) -> f64 {
    let cb = coeffs.c_beta;
    let big_c = coeffs.big_c_user[n][k];
    let c = coeffs.c_user[n][k];
    let d_anchor = big_c - c + cb * coeffs.alpha_anchor[n][k];
    let user = (big_c + cb * alpha).log2()
        - cb * (alpha - coeffs.alpha_anchor[n][k]) / (LN2 * d_anchor)
        - d_anchor.log2();
    let ce = coeffs.c_eve[n][k];
    let big_ce = coeffs.big_c_eve[n];
    let eve = (1.0 + ce / (big_ce - ce + cb * gamma)).log2();
    user - eve
}

/// Pre-linearization slot objective (the slack program's exact terms) at
/// arbitrary slacks; the linearized objective never exceeds it.
pub fn slack_objective_term(coeffs: &StepCoefficients, n: usize, k: usize, alpha: f64, gamma: f64) -> f64 {
    let cb = coeffs.c_beta;
    let big_c = coeffs.big_c_user[n][k];
    let c = coeffs.c_user[n][k];
    let user = (1.0 + c / (big_c - c + cb * alpha)).log2();
    let ce = coeffs.c_eve[n][k];
    let big_ce = coeffs.big_c_eve[n];
    let eve = (1.0 + ce / (big_ce - ce + cb * gamma)).log2();
    user - eve
}

/// Right-hand side of the linearized eavesdropper-range bound at slot `n`.
pub fn linearized_eve_bound(
    coeffs: &StepCoefficients,
    n: usize,
    q: [f64; 2],
    cfg: &ScenarioConfig,
) -> f64 {
    let anchor = coeffs.anchor[n];
    let h2 = cfg.altitude * cfg.altitude;
    let ax = anchor[0] - cfg.eve_position[0];
    let ay = anchor[1] - cfg.eve_position[1];
    h2 + (ax * ax + ay * ay) + 2.0 * (ax * (q[0] - anchor[0]) + ay * (q[1] - anchor[1]))
}

/// Solve the trajectory subproblem around `prev`.
pub fn solve_trajectory_step(
    prev: &Trajectory,
    coeffs: &StepCoefficients,
    cfg: &ScenarioConfig,
) -> Result<TrajStep, TrajStepError> {
    let n_slots = cfg.slot_count;
    let k_users = cfg.user_count();
    let cap = cfg.step_cap();
    let h2 = cfg.altitude * cfg.altitude;

    // infeasibility prechecks with the violating slot attached
    for n in 0..n_slots {
        if coeffs.disk_r2[n] < 0.0 {
            return Err(TrajStepError::SensingDiskEmpty { slot: n });
        }
        let r = coeffs.disk_r2[n].sqrt();
        let from_start = dist2d(cfg.q_start, cfg.eve_position) - n as f64 * cap;
        let from_end = dist2d(cfg.q_final, cfg.eve_position) - (n_slots - 1 - n) as f64 * cap;
        if from_start > r * (1.0 + 1e-12) + 1e-9 || from_end > r * (1.0 + 1e-12) + 1e-9 {
            return Err(TrajStepError::SensingDiskUnreachable { slot: n });
        }
    }

    // with both endpoints pinned there is nothing to optimize
    if n_slots <= 2 {
        return Ok(TrajStep {
            trajectory: prev.clone(),
            surrogate_objective: surrogate_objective(coeffs, &prev.points, cfg),
            solver_status: "FixedEndpoints".to_string(),
            contraction: None,
        });
    }

    // variable layout: q (2N), alpha (N*K), gamma (N), r (N*K)
    let q_x = |n: usize| 2 * n;
    let q_y = |n: usize| 2 * n + 1;
    let alpha_idx = |n: usize, k: usize| 2 * n_slots + n * k_users + k;
    let gamma_idx = |n: usize| 2 * n_slots + n_slots * k_users + n;
    let ratio_idx =
        |n: usize, k: usize| 2 * n_slots + n_slots * k_users + n_slots + n * k_users + k;
    let nvars = 2 * n_slots + 2 * n_slots * k_users + n_slots;

    let mut p = ConicProblem::new(nvars);
    let cb = coeffs.c_beta;

    for n in 0..n_slots {
        for k in 0..k_users {
            let big_c = coeffs.big_c_user[n][k];
            let c = coeffs.c_user[n][k];
            let alpha_t = coeffs.alpha_anchor[n][k];
            let d_anchor = big_c - c + cb * alpha_t;

            // exact concave log of the user term, normalized at the anchor
            // so the exponential-cone argument stays O(1)
            let anchor_val = big_c + cb * alpha_t;
            let mut arg = LinExpr::constant(big_c / anchor_val);
            arg.push(alpha_idx(n, k), cb / anchor_val);
            p.add_log_term(1.0 / LN2, arg);
            p.add_objective_constant(anchor_val.log2());

            // tangent of the convex -log term around alpha~
            let lin = cb / (LN2 * d_anchor);
            p.add_objective_term(alpha_idx(n, k), -lin);
            p.add_objective_constant(lin * alpha_t - d_anchor.log2());

            // eavesdropper term log2(1 - r) with r >= c_E / (C_E + C_beta*gamma),
            // the exact concave form of -log2(1 + c_E/(C_E - c_E + C_beta*gamma))
            let mut one_minus_r = LinExpr::constant(1.0);
            one_minus_r.push(ratio_idx(n, k), -1.0);
            p.add_log_term(1.0 / LN2, one_minus_r);

            // hyperbolic constraint r * (C_E + C_beta*gamma) >= c_E as a
            // rotated cone: |(r - u, 2 sqrt(c_E))| <= r + u
            let ce = coeffs.c_eve[n][k];
            let mut head = LinExpr::term(ratio_idx(n, k), 1.0);
            head.push(gamma_idx(n), cb);
            head.constant = coeffs.big_c_eve[n];
            let mut diff = LinExpr::term(ratio_idx(n, k), 1.0);
            diff.push(gamma_idx(n), -cb);
            diff.constant = -coeffs.big_c_eve[n];
            p.add_soc(vec![head, diff, LinExpr::constant(2.0 * ce.sqrt())]);

            // alpha_k[n] >= H^2 + |q - q_k|^2 as a second-order cone
            let qk = cfg.user_positions[k];
            let mut soc_head = LinExpr::term(alpha_idx(n, k), 1.0);
            soc_head.constant = 1.0 - h2;
            let mut dx = LinExpr::term(q_x(n), 2.0);
            dx.constant = -2.0 * qk[0];
            let mut dy = LinExpr::term(q_y(n), 2.0);
            dy.constant = -2.0 * qk[1];
            let mut tail = LinExpr::term(alpha_idx(n, k), 1.0);
            tail.constant = -1.0 - h2;
            p.add_soc(vec![soc_head, dx, dy, tail]);
        }

        // linearized eavesdropper-range upper bound on gamma
        let anchor = coeffs.anchor[n];
        let ax = anchor[0] - cfg.eve_position[0];
        let ay = anchor[1] - cfg.eve_position[1];
        let mut bound = LinExpr::constant(
            h2 + ax * ax + ay * ay - 2.0 * (ax * anchor[0] + ay * anchor[1]),
        );
        bound.push(q_x(n), 2.0 * ax);
        bound.push(q_y(n), 2.0 * ay);
        bound.push(gamma_idx(n), -1.0);
        p.add_nonneg(bound);

        // sensing disk |q - q_E| <= sqrt(disk_r2)
        let mut ex = LinExpr::term(q_x(n), 1.0);
        ex.constant = -cfg.eve_position[0];
        let mut ey = LinExpr::term(q_y(n), 1.0);
        ey.constant = -cfg.eve_position[1];
        p.add_soc(vec![LinExpr::constant(coeffs.disk_r2[n].sqrt()), ex, ey]);
    }

    // velocity chain
    for n in 1..n_slots {
        let mut dx = LinExpr::term(q_x(n), 1.0);
        dx.push(q_x(n - 1), -1.0);
        let mut dy = LinExpr::term(q_y(n), 1.0);
        dy.push(q_y(n - 1), -1.0);
        p.add_soc(vec![LinExpr::constant(cap), dx, dy]);
    }

    // endpoints
    let mut e = LinExpr::term(q_x(0), 1.0);
    e.constant = -cfg.q_start[0];
    p.add_equality(e);
    let mut e = LinExpr::term(q_y(0), 1.0);
    e.constant = -cfg.q_start[1];
    p.add_equality(e);
    let mut e = LinExpr::term(q_x(n_slots - 1), 1.0);
    e.constant = -cfg.q_final[0];
    p.add_equality(e);
    let mut e = LinExpr::term(q_y(n_slots - 1), 1.0);
    e.constant = -cfg.q_final[1];
    p.add_equality(e);

    let solution = match p.solve(1e-9) {
        Ok(s) => s,
        Err(SolveError::Infeasible) => return Err(TrajStepError::Infeasible),
        Err(SolveError::Unbounded) => {
            return Err(TrajStepError::Solver("unbounded subproblem".to_string()))
        }
        Err(SolveError::NumericalFailure(msg)) => return Err(TrajStepError::Solver(msg)),
    };

    let mut points: Vec<[f64; 2]> = (0..n_slots)
        .map(|n| [solution.x[q_x(n)], solution.x[q_y(n)]])
        .collect();
    points[0] = cfg.q_start;
    points[n_slots - 1] = cfg.q_final;

    let contraction = enforce_speed_cap(&mut points, cfg);
    let trajectory = Trajectory { points };
    let surrogate = surrogate_objective(coeffs, &trajectory.points, cfg);

    Ok(TrajStep {
        trajectory,
        surrogate_objective: surrogate,
        solver_status: solution.status,
        contraction,
    })
}

/// Contract the solution toward the straight chord just enough to absorb
/// solver-tolerance speed violations. Endpoints are preserved; returns the
/// contraction factor if one was applied.
fn enforce_speed_cap(points: &mut [[f64; 2]], cfg: &ScenarioConfig) -> Option<f64> {
    let cap = cfg.step_cap();
    let n = points.len();
    let mut worst: f64 = 1.0;
    for i in 1..n {
        worst = worst.max(dist2d(points[i], points[i - 1]) / cap);
    }
    if worst <= 1.0 {
        return None;
    }
    let line = crate::scenario::straight_line_trajectory(cfg).points;
    let step_line = dist2d(line[1], line[0]);
    // |d_line + s(d_q - d_line)| <= (1-s)*step_line + s*cap*worst == cap
    let denom = cap * worst - step_line;
    let s = if denom > 0.0 { ((cap - step_line) / denom).clamp(0.0, 1.0) } else { 0.0 };
    for i in 0..n {
        points[i] = [
            line[i][0] + s * (points[i][0] - line[i][0]),
            line[i][1] + s * (points[i][1] - line[i][1]),
        ];
    }
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelState;
    use crate::rng::{stream, Realm};
    use crate::rxbf::rx_filter_or_matched;
    use crate::scenario::straight_line_trajectory;
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use num_complex::Complex64;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn small_cfg(k_users: usize, slots: usize) -> ScenarioConfig {
        ScenarioConfig {
            user_positions: (0..k_users).map(|k| [20.0 + 15.0 * k as f64, 45.0]).collect(),
            mx: 2,
            my: 2,
            slot_count: slots,
            mission_time: slots as f64 * 0.05,
            q_start: [20.0, 50.0],
            q_final: [30.0, 40.0],
            v_max: 120.0,
            si_power: 5.0 * 1e-7,
            ..ScenarioConfig::default()
        }
    }

    fn mrt_beams(cfg: &ScenarioConfig, channels: &ChannelState) -> BeamformerSet {
        let scale = (cfg.p_max / (cfg.user_count() + 1) as f64).sqrt();
        let mut user_beams = Vec::new();
        let mut jam_beams = Vec::new();
        let mut rx_filters = Vec::new();
        for ch in &channels.slots {
            let users: Vec<DVector<Complex64>> = ch
                .user_dirs
                .iter()
                .map(|chi| chi * Complex64::from(scale / chi.norm()))
                .collect();
            let jam = &ch.eve_dir * Complex64::from(scale / ch.eve_dir.norm());
            let w = rx_filter_or_matched(&users, &jam, &ch.eve_dir, &ch.si, cfg.noise_power);
            user_beams.push(users);
            jam_beams.push(jam);
            rx_filters.push(w);
        }
        BeamformerSet { user_beams, jam_beams, rx_filters }
    }

    fn setup(k_users: usize, slots: usize) -> (ScenarioConfig, Trajectory, ChannelState, BeamformerSet) {
        let cfg = small_cfg(k_users, slots);
        let traj = straight_line_trajectory(&cfg);
        let channels = ChannelState::los(&cfg, &traj);
        let beams = mrt_beams(&cfg, &channels);
        (cfg, traj, channels, beams)
    }

    #[test]
    fn zero_beams_zero_coefficients() {
        let (cfg, traj, channels, mut beams) = setup(2, 4);
        for n in 0..cfg.slot_count {
            for f in beams.user_beams[n].iter_mut() {
                f.fill(Complex64::new(0.0, 0.0));
            }
            beams.jam_beams[n].fill(Complex64::new(0.0, 0.0));
        }
        let coeffs = compute_step_coefficients(&traj, &beams, &channels, &cfg);
        for n in 0..cfg.slot_count {
            assert_eq!(coeffs.big_c_eve[n], 0.0);
            for k in 0..cfg.user_count() {
                assert_eq!(coeffs.c_user[n][k], 0.0);
                assert_eq!(coeffs.c_eve[n][k], 0.0);
                assert_eq!(coeffs.big_c_user[n][k], 0.0);
            }
        }
    }

    #[test]
    fn single_user_totals_are_c_plus_jam() {
        let (cfg, traj, channels, beams) = setup(1, 3);
        let coeffs = compute_step_coefficients(&traj, &beams, &channels, &cfg);
        for n in 0..cfg.slot_count {
            let chi = &channels.slots[n].user_dirs[0];
            let jam_leak = chi.dotc(&beams.jam_beams[n]).norm_sqr();
            assert_relative_eq!(
                coeffs.big_c_user[n][0],
                coeffs.c_user[n][0] + jam_leak,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn coefficients_match_direct_evaluation() {
        let (cfg, traj, channels, beams) = setup(2, 3);
        let coeffs = compute_step_coefficients(&traj, &beams, &channels, &cfg);
        let mut rng = stream(5, Realm::Test, 0);
        // scalar-loop oracle for randomly chosen (slot, user) pairs
        for _ in 0..8 {
            let n = rng.gen_range(0..cfg.slot_count);
            let k = rng.gen_range(0..cfg.user_count());
            let chi = &channels.slots[n].user_dirs[k];
            let dot = |a: &DVector<Complex64>, b: &DVector<Complex64>| -> Complex64 {
                a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
            };
            assert_relative_eq!(
                coeffs.c_user[n][k],
                dot(chi, &beams.user_beams[n][k]).norm_sqr(),
                max_relative = 1e-12
            );
            let total: f64 = beams.user_beams[n]
                .iter()
                .map(|f| dot(chi, f).norm_sqr())
                .sum::<f64>()
                + dot(chi, &beams.jam_beams[n]).norm_sqr();
            assert_relative_eq!(coeffs.big_c_user[n][k], total, max_relative = 1e-12);
        }
        assert!(coeffs.c_beta > 0.0);
        assert_relative_eq!(
            coeffs.c_beta,
            cfg.noise_power / (4.0 * cfg.beta0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn surrogate_under_estimates_slack_objective() {
        // tangent of the convex -log part never exceeds it, equality at the anchor
        let (cfg, traj, channels, beams) = setup(2, 4);
        let coeffs = compute_step_coefficients(&traj, &beams, &channels, &cfg);
        let mut rng = stream(6, Realm::Test, 1);
        for n in 0..cfg.slot_count {
            for k in 0..cfg.user_count() {
                let at = coeffs.alpha_anchor[n][k];
                let gt = coeffs.gamma_anchor[n];
                let lin0 = surrogate_term(&coeffs, n, k, at, gt);
                let exact0 = slack_objective_term(&coeffs, n, k, at, gt);
                assert_relative_eq!(lin0, exact0, epsilon = 1e-8);
                for _ in 0..50 {
                    let alpha = at * rng.gen_range(0.3..3.0);
                    let gamma = gt * rng.gen_range(0.3..3.0);
                    let lin = surrogate_term(&coeffs, n, k, alpha, gamma);
                    let exact = slack_objective_term(&coeffs, n, k, alpha, gamma);
                    assert!(
                        lin <= exact + 1e-10,
                        "surrogate {lin} exceeded slack objective {exact} at slot {n} user {k}"
                    );
                }
            }
        }
    }

    #[test]
    fn linearized_bound_under_estimates_true_range() {
        // any gamma feasible for the linearized bound satisfies the true one
        let (cfg, traj, channels, beams) = setup(1, 4);
        let coeffs = compute_step_coefficients(&traj, &beams, &channels, &cfg);
        let mut rng = stream(7, Realm::Test, 2);
        let h2 = cfg.altitude * cfg.altitude;
        for _ in 0..500 {
            let n = rng.gen_range(0..cfg.slot_count);
            let q = [rng.gen_range(-50.0..100.0), rng.gen_range(-50.0..100.0)];
            let linearized = linearized_eve_bound(&coeffs, n, q, &cfg);
            let exact = h2 + dist2d(q, cfg.eve_position).powi(2);
            assert!(
                linearized <= exact + 1e-9,
                "linearized bound {linearized} exceeds true range {exact}"
            );
        }
    }

    #[test]
    fn two_slot_mission_is_fixed() {
        let mut cfg = small_cfg(2, 2);
        cfg.q_final = [24.0, 47.0]; // one 5 m hop, within the 6 m step cap
        let traj = straight_line_trajectory(&cfg);
        let channels = ChannelState::los(&cfg, &traj);
        let beams = mrt_beams(&cfg, &channels);
        let coeffs = compute_step_coefficients(&traj, &beams, &channels, &cfg);
        let step = solve_trajectory_step(&traj, &coeffs, &cfg).unwrap();
        assert_eq!(step.trajectory.points, traj.points);
        // slack tightness is trivial here: alpha is pinned by geometry
        let h2 = cfg.altitude * cfg.altitude;
        for n in 0..2 {
            for k in 0..cfg.user_count() {
                let alpha = h2 + dist2d(traj.points[n], cfg.user_positions[k]).powi(2);
                assert_relative_eq!(alpha, coeffs.alpha_anchor[n][k], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn step_does_not_decrease_surrogate() {
        let (cfg, traj, channels, beams) = setup(2, 8);
        let coeffs = compute_step_coefficients(&traj, &beams, &channels, &cfg);
        let step = solve_trajectory_step(&traj, &coeffs, &cfg).unwrap();
        step.trajectory.validate(&cfg).unwrap();
        let at_prev = surrogate_objective(&coeffs, &traj.points, &cfg);
        assert!(
            step.surrogate_objective >= at_prev - 1e-7,
            "step lowered the surrogate: {} -> {}",
            at_prev,
            step.surrogate_objective
        );
    }

    #[test]
    fn sensing_disk_respected() {
        let (cfg, traj, channels, beams) = setup(1, 8);
        let mut coeffs = compute_step_coefficients(&traj, &beams, &channels, &cfg);
        // shrink the disk to something binding but reachable: keep every
        // straight-line point feasible with 2% margin
        let max_needed = traj
            .points
            .iter()
            .map(|&p| dist2d(p, cfg.eve_position).powi(2))
            .fold(0.0f64, f64::max);
        for r in coeffs.disk_r2.iter_mut() {
            *r = (*r).min(max_needed * 1.02);
        }
        let step = solve_trajectory_step(&traj, &coeffs, &cfg).unwrap();
        for (n, &p) in step.trajectory.points.iter().enumerate() {
            let d2 = dist2d(p, cfg.eve_position).powi(2);
            assert!(
                d2 <= coeffs.disk_r2[n] * (1.0 + 1e-6),
                "slot {n} violates the sensing disk: {d2} > {}",
                coeffs.disk_r2[n]
            );
        }
    }

    #[test]
    fn empty_disk_reports_slot() {
        let (cfg, traj, channels, beams) = setup(1, 4);
        let mut coeffs = compute_step_coefficients(&traj, &beams, &channels, &cfg);
        coeffs.disk_r2[2] = -1.0;
        match solve_trajectory_step(&traj, &coeffs, &cfg) {
            Err(TrajStepError::SensingDiskEmpty { slot }) => assert_eq!(slot, 2),
            other => panic!("expected SensingDiskEmpty, got {other:?}"),
        }
    }

    #[test]
    fn unreachable_disk_reports_slot() {
        let (cfg, traj, channels, beams) = setup(1, 4);
        let mut coeffs = compute_step_coefficients(&traj, &beams, &channels, &cfg);
        // a 1 m disk around the eavesdropper is unreachable from the endpoints
        coeffs.disk_r2[1] = 1.0;
        match solve_trajectory_step(&traj, &coeffs, &cfg) {
            Err(TrajStepError::SensingDiskUnreachable { slot }) => assert_eq!(slot, 1),
            other => panic!("expected SensingDiskUnreachable, got {other:?}"),
        }
    }

    #[test]
    fn pull_toward_user_moves_trajectory() {
        // generous sensing disk, single user far from the chord: the step
        // must bend toward the user relative to the straight line
        let mut cfg = small_cfg(1, 10);
        cfg.user_positions = vec![[60.0, 60.0]];
        cfg.q_start = [10.0, 10.0];
        cfg.q_final = [20.0, 10.0];
        let traj = straight_line_trajectory(&cfg);
        let channels = ChannelState::los(&cfg, &traj);
        let beams = mrt_beams(&cfg, &channels);
        let coeffs = compute_step_coefficients(&traj, &beams, &channels, &cfg);
        let step = solve_trajectory_step(&traj, &coeffs, &cfg).unwrap();
        let mid = cfg.slot_count / 2;
        let before = dist2d(traj.points[mid], cfg.user_positions[0]);
        let after = dist2d(step.trajectory.points[mid], cfg.user_positions[0]);
        assert!(
            after < before - 1e-3,
            "expected the midpoint to move toward the user: {before} -> {after}"
        );
        assert!(step.surrogate_objective >= surrogate_objective(&coeffs, &traj.points, &cfg) - 1e-9);
    }

    #[test]
    fn slack_tightness_at_optimum() {
        let (cfg, traj, channels, beams) = setup(2, 6);
        let coeffs = compute_step_coefficients(&traj, &beams, &channels, &cfg);
        // the solver objective must be reproduced by recomputing slacks
        // tight at the returned trajectory
        let step = solve_trajectory_step(&traj, &coeffs, &cfg).unwrap();
        let tight = surrogate_objective(&coeffs, &step.trajectory.points, &cfg);
        assert_relative_eq!(step.surrogate_objective, tight, max_relative = 1e-12);
    }

    #[test]
    fn random_instance_oracle_for_surrogate_value() {
        // independent scalar recomputation of the full linearized objective
        let (cfg, traj, channels, beams) = setup(2, 5);
        let coeffs = compute_step_coefficients(&traj, &beams, &channels, &cfg);
        let mut rng = stream(8, Realm::Test, 3);
        let mut points = traj.points.clone();
        for p in points.iter_mut().skip(1).take(cfg.slot_count - 2) {
            let jx: f64 = rng.sample(StandardNormal);
            let jy: f64 = rng.sample(StandardNormal);
            p[0] += 0.3 * jx;
            p[1] += 0.3 * jy;
        }
        let got = surrogate_objective(&coeffs, &points, &cfg);
        let h2 = cfg.altitude * cfg.altitude;
        let mut expect = 0.0;
        for n in 0..cfg.slot_count {
            let gamma = linearized_eve_bound(&coeffs, n, points[n], &cfg);
            for k in 0..cfg.user_count() {
                let alpha = h2 + dist2d(points[n], cfg.user_positions[k]).powi(2);
                let d_anchor = coeffs.big_c_user[n][k] - coeffs.c_user[n][k]
                    + coeffs.c_beta * coeffs.alpha_anchor[n][k];
                expect += (coeffs.big_c_user[n][k] + coeffs.c_beta * alpha).log2();
                expect -= coeffs.c_beta * (alpha - coeffs.alpha_anchor[n][k]) / (LN2 * d_anchor);
                expect -= d_anchor.log2();
                expect -= (1.0
                    + coeffs.c_eve[n][k]
                        / (coeffs.big_c_eve[n] - coeffs.c_eve[n][k] + coeffs.c_beta * gamma))
                    .log2();
            }
        }
        assert_relative_eq!(got, expect, max_relative = 1e-12);
    }
}
