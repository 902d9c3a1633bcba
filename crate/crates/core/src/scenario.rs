//! Scenario configuration, geometry, and time discretization.
//!
//! [`ScenarioConfig`] owns every physical and algorithmic constant; all other
//! modules read from it and never mutate it. Config files are JSON with
//! suffix-tagged units (`*_dbm`/`*_w` for powers, `*_db` for gains, meters
//! for distances). Everything is converted to linear scale at load time so
//! internal math never mixes unit systems.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Convert dB to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Convert dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invariant `slot grid`: slot_count * slot_len = {product} does not match mission_time {mission_time}")]
    SlotGrid { product: f64, mission_time: f64 },
    #[error("invariant `endpoint reachability`: |q0 - qf| = {dist:.3} m exceeds max travel {max_travel:.3} m")]
    EndpointUnreachable { dist: f64, max_travel: f64 },
    #[error("invariant `strictly positive`: field `{field}` must be > 0, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("invariant `user count`: at least one user position is required")]
    NoUsers,
    #[error("invariant `antenna count`: mx and my must be >= 1, got {mx} x {my}")]
    AntennaCount { mx: usize, my: usize },
    #[error("invariant `slot count`: need at least one slot, got {0}")]
    SlotCount(usize),
    #[error("field `{field}` specified both in watts and dBm")]
    DuplicateUnit { field: &'static str },
}

/// Raw config file schema. All fields optional; missing ones take the
/// default campaign values. Powers accept either a `*_w` or `*_dbm` key,
/// gains a `*_db` or `*_lin` key.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    users: Option<Vec<[f64; 2]>>,
    eve: Option<[f64; 2]>,
    altitude_m: Option<f64>,
    mission_time_s: Option<f64>,
    slot_len_s: Option<f64>,
    slot_count: Option<usize>,
    v_max_mps: Option<f64>,
    p_max_w: Option<f64>,
    p_max_dbm: Option<f64>,
    sensing_sinr_db: Option<f64>,
    sensing_sinr_lin: Option<f64>,
    noise_power_w: Option<f64>,
    noise_power_dbm: Option<f64>,
    beta0_db: Option<f64>,
    beta0_lin: Option<f64>,
    rician_k: Option<f64>,
    rcs_m2: Option<f64>,
    si_power_w: Option<f64>,
    /// Self-interference power per matrix entry, in dB relative to `p_max`.
    si_power_rel_db: Option<f64>,
    mx: Option<usize>,
    my: Option<usize>,
    q_start: Option<[f64; 2]>,
    q_final: Option<[f64; 2]>,
    epsilon: Option<f64>,
    rng_seed: Option<u64>,
    max_outer_iters: Option<usize>,
    tx_inner_passes: Option<usize>,
    paper_literal_velocity: Option<bool>,
    paper_literal_sensing_gain: Option<bool>,
    evaluate_with_nlos: Option<usize>,
}

/// Validated scenario. Immutable after load; all values linear scale
/// (watts, linear gains, meters, seconds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Ground user positions, meters.
    pub user_positions: Vec<[f64; 2]>,
    /// Eavesdropper position, meters.
    pub eve_position: [f64; 2],
    /// Fixed flight altitude, meters.
    pub altitude: f64,
    /// Mission duration, seconds.
    pub mission_time: f64,
    /// Number of time slots.
    pub slot_count: usize,
    /// Slot duration, seconds.
    pub slot_len: f64,
    /// Maximum UAV speed, m/s.
    pub v_max: f64,
    /// Transmit power budget, watts.
    pub p_max: f64,
    /// Sensing-SINR threshold, linear.
    pub sensing_sinr_min: f64,
    /// Receiver noise power, watts.
    pub noise_power: f64,
    /// Channel power gain at 1 m, linear.
    pub beta0: f64,
    /// Rician factor, linear.
    pub rician_k: f64,
    /// Eavesdropper radar cross section, m^2.
    pub rcs: f64,
    /// Residual self-interference power per matrix entry, watts.
    pub si_power: f64,
    /// Antenna elements along x.
    pub mx: usize,
    /// Antenna elements along y.
    pub my: usize,
    /// Initial UAV position, meters.
    pub q_start: [f64; 2],
    /// Final UAV position, meters.
    pub q_final: [f64; 2],
    /// Relative-change convergence tolerance of the outer loop.
    pub epsilon: f64,
    /// Master seed for every random stream.
    pub rng_seed: u64,
    /// Hard cap on outer iterations.
    pub max_outer_iters: usize,
    /// Transmit-beamforming passes per outer iteration.
    pub tx_inner_passes: usize,
    /// Use the printed squared-distance velocity constraint
    /// `|dq|^2 <= slot_len * v_max` instead of `|dq| <= slot_len * v_max`.
    pub paper_literal_velocity: bool,
    /// Use the printed sensing gain without the altitude term.
    pub paper_literal_sensing_gain: bool,
    /// Monte-Carlo NLOS realizations for final-rate evaluation (0 = LOS only).
    pub evaluate_with_nlos: usize,
}

impl Default for ScenarioConfig {
    /// Default campaign: 70 m x 70 m area, four users, one eavesdropper.
    fn default() -> Self {
        let p_max = 5.0;
        ScenarioConfig {
            user_positions: vec![[20.0, 60.0], [30.0, 30.0], [40.0, 55.0], [50.0, 30.0]],
            eve_position: [20.0, 0.0],
            altitude: 40.0,
            mission_time: 4.0,
            slot_count: 80,
            slot_len: 0.05,
            v_max: 50.0,
            p_max,
            sensing_sinr_min: db_to_linear(10.0),
            noise_power: dbm_to_watts(-110.0),
            beta0: db_to_linear(-30.0),
            rician_k: 500.0,
            rcs: 0.1,
            si_power: p_max * db_to_linear(-70.0),
            mx: 3,
            my: 3,
            q_start: [20.0, 50.0],
            q_final: [50.0, 10.0],
            epsilon: 1e-3,
            rng_seed: 1,
            max_outer_iters: 30,
            tx_inner_passes: 1,
            paper_literal_velocity: false,
            paper_literal_sensing_gain: false,
            evaluate_with_nlos: 0,
        }
    }
}

impl ScenarioConfig {
    /// Parse, default-fill, and validate a JSON config document.
    pub fn load(source: &str) -> Result<Self, ScenarioError> {
        let raw: RawConfig =
            serde_json::from_str(source).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self, ScenarioError> {
        let d = ScenarioConfig::default();

        let p_max = match (raw.p_max_w, raw.p_max_dbm) {
            (Some(_), Some(_)) => return Err(ScenarioError::DuplicateUnit { field: "p_max" }),
            (Some(w), None) => w,
            (None, Some(dbm)) => dbm_to_watts(dbm),
            (None, None) => d.p_max,
        };
        let noise_power = match (raw.noise_power_w, raw.noise_power_dbm) {
            (Some(_), Some(_)) => {
                return Err(ScenarioError::DuplicateUnit { field: "noise_power" })
            }
            (Some(w), None) => w,
            (None, Some(dbm)) => dbm_to_watts(dbm),
            (None, None) => d.noise_power,
        };
        let sensing_sinr_min = match (raw.sensing_sinr_lin, raw.sensing_sinr_db) {
            (Some(_), Some(_)) => {
                return Err(ScenarioError::DuplicateUnit { field: "sensing_sinr" })
            }
            (Some(lin), None) => lin,
            (None, Some(db)) => db_to_linear(db),
            (None, None) => d.sensing_sinr_min,
        };
        let beta0 = match (raw.beta0_lin, raw.beta0_db) {
            (Some(_), Some(_)) => return Err(ScenarioError::DuplicateUnit { field: "beta0" }),
            (Some(lin), None) => lin,
            (None, Some(db)) => db_to_linear(db),
            (None, None) => d.beta0,
        };
        let si_power = match (raw.si_power_w, raw.si_power_rel_db) {
            (Some(_), Some(_)) => return Err(ScenarioError::DuplicateUnit { field: "si_power" }),
            (Some(w), None) => w,
            (None, Some(rel_db)) => p_max * db_to_linear(rel_db),
            (None, None) => p_max * db_to_linear(-70.0),
        };

        let mission_time = raw.mission_time_s.unwrap_or(d.mission_time);
        let slot_len = raw.slot_len_s.unwrap_or(d.slot_len);
        let slot_count = match raw.slot_count {
            Some(n) => n,
            None => {
                if slot_len <= 0.0 {
                    return Err(ScenarioError::NonPositive {
                        field: "slot_len_s",
                        value: slot_len,
                    });
                }
                (mission_time / slot_len).round() as usize
            }
        };

        let cfg = ScenarioConfig {
            user_positions: raw.users.unwrap_or(d.user_positions),
            eve_position: raw.eve.unwrap_or(d.eve_position),
            altitude: raw.altitude_m.unwrap_or(d.altitude),
            mission_time,
            slot_count,
            slot_len,
            v_max: raw.v_max_mps.unwrap_or(d.v_max),
            p_max,
            sensing_sinr_min,
            noise_power,
            beta0,
            rician_k: raw.rician_k.unwrap_or(d.rician_k),
            rcs: raw.rcs_m2.unwrap_or(d.rcs),
            si_power,
            mx: raw.mx.unwrap_or(d.mx),
            my: raw.my.unwrap_or(d.my),
            q_start: raw.q_start.unwrap_or(d.q_start),
            q_final: raw.q_final.unwrap_or(d.q_final),
            epsilon: raw.epsilon.unwrap_or(d.epsilon),
            rng_seed: raw.rng_seed.unwrap_or(d.rng_seed),
            max_outer_iters: raw.max_outer_iters.unwrap_or(d.max_outer_iters),
            tx_inner_passes: raw.tx_inner_passes.unwrap_or(d.tx_inner_passes),
            paper_literal_velocity: raw.paper_literal_velocity.unwrap_or(false),
            paper_literal_sensing_gain: raw.paper_literal_sensing_gain.unwrap_or(false),
            evaluate_with_nlos: raw.evaluate_with_nlos.unwrap_or(0),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Check every config invariant; error messages name the violated one.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        fn positive(field: &'static str, value: f64) -> Result<(), ScenarioError> {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(ScenarioError::NonPositive { field, value })
            }
        }
        if self.user_positions.is_empty() {
            return Err(ScenarioError::NoUsers);
        }
        if self.mx < 1 || self.my < 1 {
            return Err(ScenarioError::AntennaCount { mx: self.mx, my: self.my });
        }
        if self.slot_count < 1 {
            return Err(ScenarioError::SlotCount(self.slot_count));
        }
        positive("altitude", self.altitude)?;
        positive("mission_time", self.mission_time)?;
        positive("slot_len", self.slot_len)?;
        positive("v_max", self.v_max)?;
        positive("p_max", self.p_max)?;
        positive("sensing_sinr_min", self.sensing_sinr_min)?;
        positive("noise_power", self.noise_power)?;
        positive("beta0", self.beta0)?;
        positive("rcs", self.rcs)?;
        positive("epsilon", self.epsilon)?;
        if self.rician_k < 0.0 {
            return Err(ScenarioError::NonPositive { field: "rician_k", value: self.rician_k });
        }
        if self.si_power < 0.0 {
            return Err(ScenarioError::NonPositive { field: "si_power", value: self.si_power });
        }

        let product = self.slot_count as f64 * self.slot_len;
        if (product - self.mission_time).abs() > 1e-9 * self.mission_time.max(1.0) {
            return Err(ScenarioError::SlotGrid { product, mission_time: self.mission_time });
        }

        let dist = dist2d(self.q_start, self.q_final);
        let max_travel = self.max_travel();
        if dist > max_travel + 1e-9 {
            return Err(ScenarioError::EndpointUnreachable { dist, max_travel });
        }
        Ok(())
    }

    /// Total antenna count `M = mx * my`.
    pub fn antenna_count(&self) -> usize {
        self.mx * self.my
    }

    /// Number of ground users `K`.
    pub fn user_count(&self) -> usize {
        self.user_positions.len()
    }

    /// Per-slot displacement cap, meters. Honors `paper_literal_velocity`.
    pub fn step_cap(&self) -> f64 {
        let dv = self.slot_len * self.v_max;
        if self.paper_literal_velocity {
            dv.sqrt()
        } else {
            dv
        }
    }

    /// Maximum distance the UAV can cover across the whole mission.
    pub fn max_travel(&self) -> f64 {
        self.slot_count.saturating_sub(1) as f64 * self.step_cap()
    }

    /// Canonical JSON emission. `load(emit(cfg))` reproduces `cfg` exactly,
    /// and re-emitting yields byte-identical text.
    pub fn emit(&self) -> String {
        let raw = RawConfig {
            users: Some(self.user_positions.clone()),
            eve: Some(self.eve_position),
            altitude_m: Some(self.altitude),
            mission_time_s: Some(self.mission_time),
            slot_len_s: Some(self.slot_len),
            slot_count: Some(self.slot_count),
            v_max_mps: Some(self.v_max),
            p_max_w: Some(self.p_max),
            p_max_dbm: None,
            sensing_sinr_db: None,
            sensing_sinr_lin: Some(self.sensing_sinr_min),
            noise_power_w: Some(self.noise_power),
            noise_power_dbm: None,
            beta0_db: None,
            beta0_lin: Some(self.beta0),
            rician_k: Some(self.rician_k),
            rcs_m2: Some(self.rcs),
            si_power_w: Some(self.si_power),
            si_power_rel_db: None,
            mx: Some(self.mx),
            my: Some(self.my),
            q_start: Some(self.q_start),
            q_final: Some(self.q_final),
            epsilon: Some(self.epsilon),
            rng_seed: Some(self.rng_seed),
            max_outer_iters: Some(self.max_outer_iters),
            tx_inner_passes: Some(self.tx_inner_passes),
            paper_literal_velocity: Some(self.paper_literal_velocity),
            paper_literal_sensing_gain: Some(self.paper_literal_sensing_gain),
            evaluate_with_nlos: Some(self.evaluate_with_nlos),
        };
        serde_json::to_string_pretty(&raw).expect("config serialization cannot fail")
    }
}

/// Load and validate a scenario from JSON text (empty object = defaults).
pub fn load_scenario(source: &str) -> Result<ScenarioConfig, ScenarioError> {
    ScenarioConfig::load(source)
}

/// Per-slot UAV ground-plane positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("invariant `slot count`: trajectory has {got} points, scenario has {want} slots")]
    SlotCount { got: usize, want: usize },
    #[error("invariant `endpoints`: point {which} is {got:?}, expected {want:?}")]
    Endpoint { which: &'static str, got: [f64; 2], want: [f64; 2] },
    #[error("invariant `speed`: step {n} has length {len:.6} m, cap {cap:.6} m")]
    Speed { n: usize, len: f64, cap: f64 },
}

impl Trajectory {
    /// Validate endpoint and per-step speed invariants against a scenario.
    pub fn validate(&self, cfg: &ScenarioConfig) -> Result<(), TrajectoryError> {
        if self.points.len() != cfg.slot_count {
            return Err(TrajectoryError::SlotCount {
                got: self.points.len(),
                want: cfg.slot_count,
            });
        }
        let first = self.points[0];
        if dist2d(first, cfg.q_start) > 1e-9 {
            return Err(TrajectoryError::Endpoint { which: "first", got: first, want: cfg.q_start });
        }
        let last = *self.points.last().expect("non-empty");
        if dist2d(last, cfg.q_final) > 1e-9 {
            return Err(TrajectoryError::Endpoint { which: "last", got: last, want: cfg.q_final });
        }
        let cap = cfg.step_cap();
        for n in 1..self.points.len() {
            let len = dist2d(self.points[n], self.points[n - 1]);
            if len > cap * (1.0 + 1e-9) + 1e-9 {
                return Err(TrajectoryError::Speed { n, len, cap });
            }
        }
        Ok(())
    }

    /// Smallest horizontal UAV-eavesdropper distance over the mission.
    pub fn min_eve_distance(&self, cfg: &ScenarioConfig) -> f64 {
        self.points
            .iter()
            .map(|&p| dist2d(p, cfg.eve_position))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Constant-velocity straight flight from `q_start` to `q_final`.
pub fn straight_line_trajectory(cfg: &ScenarioConfig) -> Trajectory {
    let n = cfg.slot_count;
    let points = if n == 1 {
        vec![cfg.q_start]
    } else {
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                [
                    cfg.q_start[0] + t * (cfg.q_final[0] - cfg.q_start[0]),
                    cfg.q_start[1] + t * (cfg.q_final[1] - cfg.q_start[1]),
                ]
            })
            .collect()
    };
    Trajectory { points }
}

/// Euclidean distance between two ground points.
pub fn dist2d(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}
