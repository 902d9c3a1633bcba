//! UPA steering vectors, Rician air-to-ground channels, path and sensing
//! gains, and the residual self-interference matrix.
//!
//! All channel quantities are pure functions of `(config, position, seed)`,
//! so slots can be evaluated in parallel and runs replay exactly.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::rng::{stream, Realm};
use crate::scenario::{ScenarioConfig, Trajectory};

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("steering vector undefined: UAV and node are at zero 3D distance")]
    ZeroDistance,
}

/// Unit-norm UPA array response toward a ground node.
#[derive(Debug, Clone)]
pub struct SteeringVector {
    pub entries: DVector<Complex64>,
    /// Elevation angle of departure, radians.
    pub elevation: f64,
    /// Azimuth angle of departure, radians.
    pub azimuth: f64,
}

/// Half-wavelength UPA response from a UAV at `(q_uav, altitude)` toward a
/// ground node at `q_node`. Entry `(m, p)` (x index `m`, y index `p`, in
/// `x ⊗ y` Kronecker order) is `exp(-j*pi*(m*u + p*v)) / sqrt(M)` with
/// direction cosines `u = (x_node - x_uav)/d3`, `v = (y_node - y_uav)/d3`.
pub fn steering_vector(
    q_uav: [f64; 2],
    q_node: [f64; 2],
    altitude: f64,
    mx: usize,
    my: usize,
) -> Result<SteeringVector, ChannelError> {
    let dx = q_node[0] - q_uav[0];
    let dy = q_node[1] - q_uav[1];
    let d3 = (altitude * altitude + dx * dx + dy * dy).sqrt();
    if d3 == 0.0 {
        return Err(ChannelError::ZeroDistance);
    }
    let u = dx / d3;
    let v = dy / d3;
    let m_total = mx * my;
    let scale = 1.0 / (m_total as f64).sqrt();
    let mut entries = DVector::zeros(m_total);
    for m in 0..mx {
        for p in 0..my {
            let phase = -std::f64::consts::PI * (m as f64 * u + p as f64 * v);
            entries[m * my + p] = Complex64::from_polar(scale, phase);
        }
    }
    // elevation measured from the vertical; azimuth in the ground plane
    let horiz = (dx * dx + dy * dy).sqrt();
    Ok(SteeringVector {
        entries,
        elevation: horiz.atan2(altitude),
        azimuth: dy.atan2(dx),
    })
}

/// Channel power gain `M * beta0 / (H^2 + |q_uav - q_node|^2)`, linear.
pub fn path_gain(q_uav: [f64; 2], q_node: [f64; 2], cfg: &ScenarioConfig) -> f64 {
    let d2 = (q_uav[0] - q_node[0]).powi(2) + (q_uav[1] - q_node[1]).powi(2);
    cfg.antenna_count() as f64 * cfg.beta0 / (cfg.altitude * cfg.altitude + d2)
}

/// Sensing amplitude gain toward the eavesdropper,
/// `sqrt(M^2 * beta0 * rcs) / (H^2 + |q_uav - q_eve|^2)`.
///
/// With `paper_literal_sensing_gain` the altitude term is dropped and the
/// gain diverges as the UAV approaches the eavesdropper's vertical.
pub fn sensing_gain(q_uav: [f64; 2], q_eve: [f64; 2], cfg: &ScenarioConfig) -> f64 {
    let m = cfg.antenna_count() as f64;
    let d2 = (q_uav[0] - q_eve[0]).powi(2) + (q_uav[1] - q_eve[1]).powi(2);
    let denom = if cfg.paper_literal_sensing_gain {
        d2
    } else {
        cfg.altitude * cfg.altitude + d2
    };
    (m * m * cfg.beta0 * cfg.rcs).sqrt() / denom
}

/// One circularly-symmetric complex Gaussian draw with per-component
/// variance `var/2` (total power `var`).
fn cscg(rng: &mut impl Rng, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Rician channel direction: LOS steering vector mixed with an i.i.d. CSCG
/// NLOS component of expected unit total power.
pub fn rician_direction(
    los: &DVector<Complex64>,
    rician_k: f64,
    rng: &mut impl Rng,
) -> DVector<Complex64> {
    let m = los.len();
    let los_w = (rician_k / (rician_k + 1.0)).sqrt();
    let nlos_w = (1.0 / (rician_k + 1.0)).sqrt();
    let per_entry_var = 1.0 / m as f64;
    DVector::from_iterator(
        m,
        los.iter().map(|&g| los_w * g + nlos_w * cscg(rng, per_entry_var)),
    )
}

/// Residual self-interference matrix for one slot: i.i.d. CSCG entries of
/// power `si_power`, fixed per `(rng_seed, slot)`.
pub fn self_interference(cfg: &ScenarioConfig, slot: usize, m: usize) -> DMatrix<Complex64> {
    if cfg.si_power == 0.0 {
        return DMatrix::zeros(m, m);
    }
    let mut rng = stream(cfg.rng_seed, Realm::SelfInterference, slot as u64);
    DMatrix::from_fn(m, m, |_, _| cscg(&mut rng, cfg.si_power))
}

/// Channel quantities for one time slot.
#[derive(Debug, Clone)]
pub struct SlotChannel {
    /// Channel directions toward each user (`chi` vectors).
    pub user_dirs: Vec<DVector<Complex64>>,
    /// Channel direction toward the eavesdropper.
    pub eve_dir: DVector<Complex64>,
    /// Linear power gain toward each user.
    pub user_gains: Vec<f64>,
    /// Linear power gain toward the eavesdropper.
    pub eve_gain: f64,
    /// Sensing amplitude gain toward the eavesdropper.
    pub sensing_gain: f64,
    /// Self-interference matrix.
    pub si: DMatrix<Complex64>,
}

impl SlotChannel {
    /// Full channel vector `h = sqrt(beta) * chi` toward user `k`.
    pub fn user_channel(&self, k: usize) -> DVector<Complex64> {
        &self.user_dirs[k] * Complex64::from(self.user_gains[k].sqrt())
    }

    /// Full channel vector toward the eavesdropper.
    pub fn eve_channel(&self) -> DVector<Complex64> {
        &self.eve_dir * Complex64::from(self.eve_gain.sqrt())
    }
}

/// Per-slot channel state along a trajectory.
#[derive(Debug, Clone)]
pub struct ChannelState {
    pub slots: Vec<SlotChannel>,
}

impl ChannelState {
    /// LOS-only channel state (directions equal the steering vectors).
    /// This is what every optimization block consumes.
    pub fn los(cfg: &ScenarioConfig, traj: &Trajectory) -> Self {
        Self::build(cfg, traj, None)
    }

    /// Channel state with Rician NLOS realizations drawn from the given
    /// evaluation stream index.
    pub fn rician(cfg: &ScenarioConfig, traj: &Trajectory, realization: u64) -> Self {
        Self::build(cfg, traj, Some(realization))
    }

    fn build(cfg: &ScenarioConfig, traj: &Trajectory, realization: Option<u64>) -> Self {
        let m = cfg.antenna_count();
        let slots = traj
            .points
            .iter()
            .enumerate()
            .map(|(n, &q)| {
                let dir = |node: [f64; 2], node_idx: u64| {
                    let sv = steering_vector(q, node, cfg.altitude, cfg.mx, cfg.my)
                        .expect("positive altitude rules out zero distance");
                    match realization {
                        None => sv.entries,
                        Some(r) => {
                            let idx = r
                                .wrapping_mul(1_000_003)
                                .wrapping_add(n as u64 * 64 + node_idx);
                            let mut rng = stream(cfg.rng_seed, Realm::Nlos, idx);
                            rician_direction(&sv.entries, cfg.rician_k, &mut rng)
                        }
                    }
                };
                let user_dirs: Vec<_> = cfg
                    .user_positions
                    .iter()
                    .enumerate()
                    .map(|(k, &qk)| dir(qk, k as u64))
                    .collect();
                let eve_dir = dir(cfg.eve_position, 63);
                SlotChannel {
                    user_dirs,
                    eve_dir,
                    user_gains: cfg
                        .user_positions
                        .iter()
                        .map(|&qk| path_gain(q, qk, cfg))
                        .collect(),
                    eve_gain: path_gain(q, cfg.eve_position, cfg),
                    sensing_gain: sensing_gain(q, cfg.eve_position, cfg),
                    si: self_interference(cfg, n, m),
                }
            })
            .collect();
        ChannelState { slots }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Realm};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cfg_with(mx: usize, my: usize) -> ScenarioConfig {
        ScenarioConfig { mx, my, ..ScenarioConfig::default() }
    }

    #[test]
    fn broadside_steering_is_uniform_real() {
        // node directly below the UAV: u = v = 0, all entries 1/sqrt(M)
        let sv = steering_vector([10.0, -3.0], [10.0, -3.0], 40.0, 3, 3).unwrap();
        for e in sv.entries.iter() {
            assert_relative_eq!(e.re, 1.0 / 3.0, max_relative = 1e-12);
            assert_relative_eq!(e.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn single_element_array() {
        let sv = steering_vector([0.0, 0.0], [25.0, 13.0], 40.0, 1, 1).unwrap();
        assert_eq!(sv.entries.len(), 1);
        assert_relative_eq!(sv.entries[0].re, 1.0, max_relative = 1e-12);
        assert_relative_eq!(sv.entries[0].im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn x_axis_phase_increment() {
        // u = 30/50 = 0.6, v = 0: successive x elements step by exp(-j*0.6*pi)
        let sv = steering_vector([0.0, 0.0], [30.0, 0.0], 40.0, 3, 2).unwrap();
        let my = 2;
        let expected = Complex64::from_polar(1.0, -0.6 * std::f64::consts::PI);
        for m in 0..2 {
            for p in 0..my {
                let ratio = sv.entries[(m + 1) * my + p] / sv.entries[m * my + p];
                assert_relative_eq!(ratio.re, expected.re, max_relative = 1e-12);
                assert_relative_eq!(ratio.im, expected.im, max_relative = 1e-12);
            }
        }
        // y-direction cosine is zero, so y phase is flat
        assert_relative_eq!((sv.entries[1] / sv.entries[0]).re, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_distance_rejected() {
        assert!(matches!(
            steering_vector([5.0, 5.0], [5.0, 5.0], 0.0, 2, 2),
            Err(ChannelError::ZeroDistance)
        ));
    }

    #[test]
    fn path_gain_overhead_value() {
        // overhead: 9 * 1e-3 / 1600
        let cfg = cfg_with(3, 3);
        let g = path_gain([20.0, 60.0], [20.0, 60.0], &cfg);
        assert_relative_eq!(g, 9e-3 / 1600.0, max_relative = 1e-12);
    }

    #[test]
    fn path_gain_inverse_law() {
        let cfg = cfg_with(3, 3);
        // doubling H^2 + d^2 halves the gain: d^2 = 0 -> 1600, d^2 = 1600 -> 3200
        let g0 = path_gain([0.0, 0.0], [0.0, 0.0], &cfg);
        let g1 = path_gain([0.0, 0.0], [40.0, 0.0], &cfg);
        assert_relative_eq!(g0 / g1, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn path_gain_unit_case() {
        let cfg = ScenarioConfig {
            mx: 1,
            my: 1,
            beta0: 1.0,
            altitude: 1.0,
            ..ScenarioConfig::default()
        };
        assert_relative_eq!(path_gain([3.0, 4.0], [3.0, 4.0], &cfg), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn sensing_gain_overhead_value() {
        // sqrt(81 * 1e-3 * 0.1) / 1600 = 0.09 / 1600
        let cfg = cfg_with(3, 3);
        let z = sensing_gain([20.0, 0.0], [20.0, 0.0], &cfg);
        assert_relative_eq!(z, 0.09 / 1600.0, max_relative = 1e-12);
    }

    #[test]
    fn sensing_gain_algebraic_identity() {
        // zeta^2 * (H^2 + d^2)^2 == M^2 * beta0 * rcs
        let cfg = cfg_with(3, 3);
        let q = [12.0, 7.0];
        let z = sensing_gain(q, cfg.eve_position, &cfg);
        let d2 = (q[0] - cfg.eve_position[0]).powi(2) + (q[1] - cfg.eve_position[1]).powi(2);
        let lhs = z * z * (cfg.altitude * cfg.altitude + d2).powi(2);
        let m = cfg.antenna_count() as f64;
        assert_relative_eq!(lhs, m * m * cfg.beta0 * cfg.rcs, max_relative = 1e-12);
    }

    #[test]
    fn sensing_gain_monotone_in_distance() {
        let cfg = cfg_with(3, 3);
        let near = sensing_gain([20.0, 0.0], [20.0, 0.0], &cfg);
        let far = sensing_gain([50.0, 0.0], [20.0, 0.0], &cfg);
        assert!(far < near);
    }

    #[test]
    fn paper_literal_sensing_gain_drops_altitude() {
        let cfg = ScenarioConfig { paper_literal_sensing_gain: true, ..cfg_with(3, 3) };
        let z = sensing_gain([30.0, 0.0], [20.0, 0.0], &cfg);
        assert_relative_eq!(z, 0.09 / 100.0, max_relative = 1e-12);
    }

    #[test]
    fn rician_limits() {
        let sv = steering_vector([0.0, 0.0], [30.0, 20.0], 40.0, 2, 2).unwrap();
        // K_r -> infinity: direction equals the LOS component
        let mut rng = stream(9, Realm::Test, 0);
        let chi = rician_direction(&sv.entries, 1e18, &mut rng);
        for (a, b) in chi.iter().zip(sv.entries.iter()) {
            assert_relative_eq!(a.re, b.re, epsilon = 1e-8);
            assert_relative_eq!(a.im, b.im, epsilon = 1e-8);
        }
        // K_r = 0: no LOS contribution at all
        let mut rng_a = stream(9, Realm::Test, 1);
        let mut rng_b = stream(9, Realm::Test, 1);
        let chi0 = rician_direction(&sv.entries, 0.0, &mut rng_a);
        let m = sv.entries.len();
        let pure_nlos =
            DVector::from_iterator(m, (0..m).map(|_| cscg(&mut rng_b, 1.0 / m as f64)));
        for (a, b) in chi0.iter().zip(pure_nlos.iter()) {
            assert_relative_eq!(a.re, b.re, epsilon = 1e-12);
            assert_relative_eq!(a.im, b.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn rician_mean_power_is_unit() {
        // Monte-Carlo oracle: E||chi||^2 = 1 within 2% over 1e4 draws
        let sv = steering_vector([0.0, 0.0], [30.0, 20.0], 40.0, 3, 3).unwrap();
        let mut rng = stream(11, Realm::Test, 2);
        let draws = 10_000;
        let mean: f64 = (0..draws)
            .map(|_| rician_direction(&sv.entries, 3.0, &mut rng).norm_squared())
            .sum::<f64>()
            / draws as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean power {mean} deviates from 1 by more than 2%");
    }

    #[test]
    fn self_interference_zero_power() {
        let cfg = ScenarioConfig { si_power: 0.0, ..ScenarioConfig::default() };
        let h = self_interference(&cfg, 5, 4);
        assert!(h.iter().all(|e| *e == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn self_interference_entry_power() {
        // Monte-Carlo oracle: mean |entry|^2 = si_power within 2%
        let cfg = ScenarioConfig { si_power: 2.5e-7, ..ScenarioConfig::default() };
        let mut acc = 0.0;
        let mut count = 0usize;
        for slot in 0..700 {
            let h = self_interference(&cfg, slot, 4);
            acc += h.iter().map(|e| e.norm_sqr()).sum::<f64>();
            count += 16;
        }
        assert!(count >= 10_000);
        let mean = acc / count as f64;
        assert!(
            (mean / cfg.si_power - 1.0).abs() < 0.02,
            "mean entry power {mean:.3e} deviates from {:.3e} by more than 2%",
            cfg.si_power
        );
    }

    #[test]
    fn self_interference_deterministic_per_slot() {
        let cfg = ScenarioConfig::default();
        let a = self_interference(&cfg, 3, 9);
        let b = self_interference(&cfg, 3, 9);
        assert_eq!(a, b);
        let c = self_interference(&cfg, 4, 9);
        assert_ne!(a, c);
    }

    proptest! {
        #[test]
        fn steering_vectors_unit_norm(
            qx in -100.0..100.0f64, qy in -100.0..100.0f64,
            nx in -100.0..100.0f64, ny in -100.0..100.0f64,
            mx in 1usize..5, my in 1usize..5,
        ) {
            let sv = steering_vector([qx, qy], [nx, ny], 40.0, mx, my).unwrap();
            prop_assert!((sv.entries.norm() - 1.0).abs() < 1e-12);
            let scale = 1.0 / ((mx * my) as f64).sqrt();
            for e in sv.entries.iter() {
                prop_assert!((e.norm() - scale).abs() < 1e-12);
            }
        }

        #[test]
        fn direction_cosines_within_unit_disk(
            qx in -100.0..100.0f64, qy in -100.0..100.0f64,
            nx in -100.0..100.0f64, ny in -100.0..100.0f64,
            h in 0.1..200.0f64,
        ) {
            let dx = nx - qx;
            let dy = ny - qy;
            let d3 = (h * h + dx * dx + dy * dy).sqrt();
            let (u, v) = (dx / d3, dy / d3);
            prop_assert!(u * u + v * v <= 1.0 + 1e-12);
        }

        #[test]
        fn gains_monotone_in_horizontal_distance(
            d1 in 0.0..200.0f64, extra in 0.1..200.0f64,
        ) {
            let cfg = cfg_with(3, 3);
            let g_near = path_gain([d1, 0.0], [0.0, 0.0], &cfg);
            let g_far = path_gain([d1 + extra, 0.0], [0.0, 0.0], &cfg);
            prop_assert!(g_far < g_near);
            let z_near = sensing_gain([d1, 0.0], [0.0, 0.0], &cfg);
            let z_far = sensing_gain([d1 + extra, 0.0], [0.0, 0.0], &cfg);
            prop_assert!(z_far < z_near);
        }
    }
}
