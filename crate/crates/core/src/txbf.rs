//! One transmit-beamforming step at one slot: semidefinite relaxation over
//! beam covariance matrices with the tangent secrecy surrogate, then rank-1
//! extraction with a feasibility scaling factor.
//!
//! Each Hermitian covariance is parameterized by `M^2` real variables
//! (diagonal, real and imaginary upper-triangle parts) and constrained PSD
//! through the real symmetric embedding `[[X, -Y], [Y, X]]`, which has the
//! same eigenvalues (doubled in multiplicity). The secrecy surrogate keeps
//! the two concave logs exact and replaces the two convex `-log` terms with
//! tangents at the anchor covariances, so it lower-bounds the exact
//! unclipped rate everywhere and touches it at the anchor.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::channel::SlotChannel;
use crate::conic::{ConicProblem, LinExpr, PsdBlock, SolveError};
use crate::scenario::ScenarioConfig;

const LN2: f64 = std::f64::consts::LN_2;

/// Beam covariance matrices for one slot: one per user plus jamming.
#[derive(Debug, Clone)]
pub struct SlotCovariances {
    pub users: Vec<DMatrix<Complex64>>,
    pub jam: DMatrix<Complex64>,
}

impl SlotCovariances {
    /// Rank-1 covariances `f f^H` from beam vectors.
    pub fn from_beams(user_beams: &[DVector<Complex64>], jam_beam: &DVector<Complex64>) -> Self {
        let outer = |f: &DVector<Complex64>| {
            let m = f.len();
            let mut a = DMatrix::zeros(m, m);
            a.gerc(Complex64::new(1.0, 0.0), f, f, Complex64::new(0.0, 0.0));
            a
        };
        SlotCovariances { users: user_beams.iter().map(outer).collect(), jam: outer(jam_beam) }
    }

    pub fn total_trace(&self) -> f64 {
        self.users.iter().map(|f| f.trace().re).sum::<f64>() + self.jam.trace().re
    }

    fn all(&self) -> impl Iterator<Item = &DMatrix<Complex64>> {
        self.users.iter().chain(std::iter::once(&self.jam))
    }
}

#[derive(Debug, Error)]
pub enum TxStepError {
    #[error("beamforming subproblem infeasible: sensing threshold unattainable under the power budget")]
    Infeasible,
    #[error("beamforming subproblem solver failure: {0}")]
    Solver(String),
}

/// Result of one per-slot covariance solve.
#[derive(Debug, Clone)]
pub struct TxStep {
    pub covariances: SlotCovariances,
    /// Sum of the per-user surrogates at the solution.
    pub surrogate_objective: f64,
    pub solver_status: String,
}

/// Rank-1 extraction outcome for one slot.
#[derive(Debug, Clone)]
pub struct ExtractedBeams {
    pub user_beams: Vec<DVector<Complex64>>,
    pub jam_beam: DVector<Complex64>,
    /// Common feasibility scaling applied to every beam.
    pub rho: f64,
    /// Achieved sensing SINR at the fixed receive filter.
    pub sensing_sinr: f64,
    /// `lambda_max / trace` per entity (users then jamming); 1 means exactly
    /// rank-1.
    pub eigen_ratios: Vec<f64>,
    /// False when no admissible scaling meets the sensing threshold.
    pub sensing_ok: bool,
}

// ---------------------------------------------------------------------------
// Hermitian parameterization and real embedding
// ---------------------------------------------------------------------------

/// Index helpers for one Hermitian matrix block of dimension `m` stored as
/// `m^2` reals: diagonal entries, then `Re(upper)`, then `Im(upper)`, with
/// upper-triangle pairs ordered column-major.
#[derive(Debug, Clone, Copy)]
pub struct HermitianBlock {
    pub offset: usize,
    pub dim: usize,
}

impl HermitianBlock {
    pub fn param_count(&self) -> usize {
        self.dim * self.dim
    }

    fn pair_pos(i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        j * (j - 1) / 2 + i
    }

    fn diag_idx(&self, i: usize) -> usize {
        self.offset + i
    }

    fn re_idx(&self, i: usize, j: usize) -> usize {
        self.offset + self.dim + Self::pair_pos(i, j)
    }

    fn im_idx(&self, i: usize, j: usize) -> usize {
        self.offset + self.dim + self.dim * (self.dim - 1) / 2 + Self::pair_pos(i, j)
    }

    /// Coefficients of `tr(A F)` over this block's parameters, for
    /// Hermitian `A`.
    pub fn trace_form(&self, a: &DMatrix<Complex64>) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(self.param_count());
        for i in 0..self.dim {
            out.push((self.diag_idx(i), a[(i, i)].re));
        }
        for j in 1..self.dim {
            for i in 0..j {
                out.push((self.re_idx(i, j), 2.0 * a[(i, j)].re));
                out.push((self.im_idx(i, j), 2.0 * a[(i, j)].im));
            }
        }
        out
    }

    /// Coefficients of the quadratic form `h^H F h = tr(F h h^H)`.
    pub fn quad_form(&self, h: &DVector<Complex64>) -> Vec<(usize, f64)> {
        let m = h.len();
        let mut a = DMatrix::zeros(m, m);
        a.gerc(Complex64::new(1.0, 0.0), h, h, Complex64::new(0.0, 0.0));
        self.trace_form(&a)
    }

    /// Coefficients of `tr(F)`.
    pub fn trace(&self) -> Vec<(usize, f64)> {
        (0..self.dim).map(|i| (self.diag_idx(i), 1.0)).collect()
    }

    /// Rebuild the Hermitian matrix from the solved parameter vector.
    pub fn matrix(&self, x: &[f64]) -> DMatrix<Complex64> {
        let mut f = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            f[(i, i)] = Complex64::new(x[self.diag_idx(i)], 0.0);
        }
        for j in 1..self.dim {
            for i in 0..j {
                let v = Complex64::new(x[self.re_idx(i, j)], x[self.im_idx(i, j)]);
                f[(i, j)] = v;
                f[(j, i)] = v.conj();
            }
        }
        f
    }

    /// Parameter vector of a Hermitian matrix (inverse of [`Self::matrix`],
    /// with the block offset applied).
    pub fn params(&self, f: &DMatrix<Complex64>) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(self.param_count());
        for i in 0..self.dim {
            out.push((self.diag_idx(i), f[(i, i)].re));
        }
        for j in 1..self.dim {
            for i in 0..j {
                out.push((self.re_idx(i, j), f[(i, j)].re));
                out.push((self.im_idx(i, j), f[(i, j)].im));
            }
        }
        out
    }

    /// Entry `(r, c)` of the `2M x 2M` real symmetric embedding
    /// `[[X, -Y], [Y, X]]` as an affine expression of this block's
    /// parameters (upper triangle only, `r <= c`).
    pub fn embedding_entry(&self, r: usize, c: usize) -> LinExpr {
        let m = self.dim;
        debug_assert!(r <= c && c < 2 * m);
        if r < m && c < m {
            // X block
            if r == c {
                LinExpr::var(self.diag_idx(r))
            } else {
                LinExpr::var(self.re_idx(r, c))
            }
        } else if r < m {
            // -Y block: entry (r, c - m) of -Y with Y antisymmetric
            let j = c - m;
            match r.cmp(&j) {
                std::cmp::Ordering::Less => LinExpr::term(self.im_idx(r, j), -1.0),
                std::cmp::Ordering::Equal => LinExpr::default(),
                std::cmp::Ordering::Greater => LinExpr::term(self.im_idx(j, r), 1.0),
            }
        } else {
            // X block again
            let (i, j) = (r - m, c - m);
            if i == j {
                LinExpr::var(self.diag_idx(i))
            } else {
                LinExpr::var(self.re_idx(i, j))
            }
        }
    }
}

/// Real symmetric embedding of a Hermitian matrix.
pub fn embed_hermitian(f: &DMatrix<Complex64>) -> DMatrix<f64> {
    let m = f.nrows();
    DMatrix::from_fn(2 * m, 2 * m, |r, c| {
        let (i, j) = (r % m, c % m);
        if (r < m) == (c < m) {
            f[(i, j)].re
        } else if r < m {
            -f[(i, j)].im
        } else {
            f[(i, j)].im
        }
    })
}

/// Inverse of [`embed_hermitian`].
pub fn recover_hermitian(t: &DMatrix<f64>) -> DMatrix<Complex64> {
    let m = t.nrows() / 2;
    DMatrix::from_fn(m, m, |i, j| Complex64::new(t[(i, j)], t[(m + i, j)]))
}

// ---------------------------------------------------------------------------
// Surrogate evaluation
// ---------------------------------------------------------------------------

fn qform(h: &DVector<Complex64>, f: &DMatrix<Complex64>) -> f64 {
    (h.adjoint() * f * h)[(0, 0)].re
}

/// Received-power aggregates the rate terms divide by.
struct RateTerms {
    total_user: f64,
    intf_user: f64,
    total_eve: f64,
    intf_eve: f64,
}

fn rate_terms(covs: &SlotCovariances, ch: &SlotChannel, cfg: &ScenarioConfig, k: usize) -> RateTerms {
    let h_user = ch.user_channel(k);
    let h_eve = ch.eve_channel();
    let mut total_user = cfg.noise_power;
    let mut intf_user = cfg.noise_power;
    let mut total_eve = cfg.noise_power;
    let mut intf_eve = cfg.noise_power;
    for (i, f) in covs.users.iter().enumerate() {
        let qu = qform(&h_user, f);
        let qe = qform(&h_eve, f);
        total_user += qu;
        total_eve += qe;
        if i != k {
            intf_user += qu;
            intf_eve += qe;
        }
    }
    let qu = qform(&h_user, &covs.jam);
    let qe = qform(&h_eve, &covs.jam);
    total_user += qu;
    intf_user += qu;
    total_eve += qe;
    intf_eve += qe;
    RateTerms { total_user, intf_user, total_eve, intf_eve }
}

/// Exact unclipped secrecy rate of user `k` in covariance form.
pub fn covariance_secrecy_rate(
    covs: &SlotCovariances,
    ch: &SlotChannel,
    cfg: &ScenarioConfig,
    k: usize,
) -> f64 {
    let t = rate_terms(covs, ch, cfg, k);
    (t.total_user / t.intf_user).log2() - (t.total_eve / t.intf_eve).log2()
}

/// Tangent secrecy surrogate of user `k` at `covs`, anchored at `anchor`.
///
/// Keeps `log2(total_user)` and `log2(intf_eve)` exact and linearizes the
/// convex `-log2(intf_user)` and `-log2(total_eve)` terms around the anchor.
pub fn taylor_secrecy_surrogate(
    covs: &SlotCovariances,
    anchor: &SlotCovariances,
    ch: &SlotChannel,
    cfg: &ScenarioConfig,
    k: usize,
) -> f64 {
    let at = rate_terms(anchor, ch, cfg, k);
    let now = rate_terms(covs, ch, cfg, k);
    now.total_user.log2()
        - (now.intf_user - at.intf_user) / (LN2 * at.intf_user)
        - at.intf_user.log2()
        + now.intf_eve.log2()
        - (now.total_eve - at.total_eve) / (LN2 * at.total_eve)
        - at.total_eve.log2()
}

// ---------------------------------------------------------------------------
// Per-slot covariance solve
// ---------------------------------------------------------------------------

/// Solve the relaxed covariance program at one slot around `anchor`.
pub fn solve_txbf_step(
    anchor: &SlotCovariances,
    ch: &SlotChannel,
    w: &DVector<Complex64>,
    cfg: &ScenarioConfig,
) -> Result<TxStep, TxStepError> {
    let m = cfg.antenna_count();
    let k_users = cfg.user_count();
    let blocks: Vec<HermitianBlock> = (0..=k_users)
        .map(|b| HermitianBlock { offset: b * m * m, dim: m })
        .collect();
    let nvars = (k_users + 1) * m * m;
    let mut p = ConicProblem::new(nvars);

    // per-user rate surrogate
    for k in 0..k_users {
        let h_user = ch.user_channel(k);
        let h_eve = ch.eve_channel();
        let at = rate_terms(anchor, ch, cfg, k);

        // exact log of the user's total received power, anchor-normalized
        let mut total_user = LinExpr::constant(cfg.noise_power / at.total_user);
        for b in &blocks {
            for (idx, coef) in b.quad_form(&h_user) {
                total_user.push(idx, coef / at.total_user);
            }
        }
        p.add_log_term(1.0 / LN2, total_user);
        p.add_objective_constant(at.total_user.log2());

        // exact log of the eavesdropper's interference when decoding k
        let mut intf_eve = LinExpr::constant(cfg.noise_power / at.intf_eve);
        for (i, b) in blocks.iter().enumerate() {
            if i == k {
                continue; // the jamming block is last and always included
            }
            for (idx, coef) in b.quad_form(&h_eve) {
                intf_eve.push(idx, coef / at.intf_eve);
            }
        }
        p.add_log_term(1.0 / LN2, intf_eve);
        p.add_objective_constant(at.intf_eve.log2());

        // tangent of -log2(user interference) at the anchor
        let slope_user = 1.0 / (LN2 * at.intf_user);
        for (i, b) in blocks.iter().enumerate() {
            if i == k {
                continue;
            }
            for (idx, coef) in b.quad_form(&h_user) {
                p.add_objective_term(idx, -coef * slope_user);
            }
        }
        p.add_objective_constant(
            (at.intf_user - cfg.noise_power) * slope_user - at.intf_user.log2(),
        );

        // tangent of -log2(eavesdropper total) at the anchor
        let slope_eve = 1.0 / (LN2 * at.total_eve);
        for b in &blocks {
            for (idx, coef) in b.quad_form(&h_eve) {
                p.add_objective_term(idx, -coef * slope_eve);
            }
        }
        p.add_objective_constant(
            (at.total_eve - cfg.noise_power) * slope_eve - at.total_eve.log2(),
        );
    }

    // power budget
    let mut power = LinExpr::constant(cfg.p_max);
    for b in &blocks {
        for (idx, coef) in b.trace() {
            power.push(idx, -coef);
        }
    }
    p.add_nonneg(power);

    // sensing threshold, linear in the covariances:
    // a^H (sum F) a - Gamma_th (w^H H_SI (sum F) H_SI^H w + sigma^2) >= 0
    let a_vec: DVector<Complex64> =
        &ch.eve_dir * (ch.eve_dir.dotc(w).conj() * Complex64::from(ch.sensing_gain));
    let si_w: DVector<Complex64> = ch.si.adjoint() * w;
    let mut raw = LinExpr::constant(-cfg.sensing_sinr_min * cfg.noise_power);
    for b in &blocks {
        for (idx, coef) in b.quad_form(&a_vec) {
            raw.push(idx, coef);
        }
        for (idx, coef) in b.quad_form(&si_w) {
            raw.push(idx, -cfg.sensing_sinr_min * coef);
        }
    }
    // merge duplicate indices and bring the row to unit scale
    let mut merged: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
    for (idx, coef) in raw.terms {
        *merged.entry(idx).or_insert(0.0) += coef;
    }
    let scale = merged
        .values()
        .fold(raw.constant.abs(), |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let sensing = LinExpr {
        terms: merged.into_iter().map(|(i, c)| (i, c / scale)).collect(),
        constant: raw.constant / scale,
    };
    p.add_nonneg(sensing);

    // PSD cones through the real embedding
    for b in &blocks {
        p.add_psd(PsdBlock::from_upper_triangle(2 * m, |r, c| b.embedding_entry(r, c)));
    }

    let solution = match p.solve(1e-8) {
        Ok(s) => s,
        Err(SolveError::Infeasible) => return Err(TxStepError::Infeasible),
        Err(SolveError::Unbounded) => {
            return Err(TxStepError::Solver("unbounded subproblem".to_string()))
        }
        Err(SolveError::NumericalFailure(msg)) => return Err(TxStepError::Solver(msg)),
    };

    let covariances = SlotCovariances {
        users: blocks[..k_users].iter().map(|b| b.matrix(&solution.x)).collect(),
        jam: blocks[k_users].matrix(&solution.x),
    };
    let surrogate_objective = (0..k_users)
        .map(|k| taylor_secrecy_surrogate(&covariances, anchor, ch, cfg, k))
        .sum();

    Ok(TxStep { covariances, surrogate_objective, solver_status: solution.status })
}

// ---------------------------------------------------------------------------
// Rank-1 extraction
// ---------------------------------------------------------------------------

fn principal_component(f: &DMatrix<Complex64>) -> (f64, DVector<Complex64>, f64) {
    let sym = (f + f.adjoint()) * Complex64::from(0.5);
    let trace = sym.trace().re;
    let eig = sym.symmetric_eigen();
    let (top, lam) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &l)| if l > acc.1 { (i, l) } else { acc });
    let v = eig.eigenvectors.column(top).clone_owned();
    let ratio = if trace > 1e-12 * f.nrows() as f64 { (lam / trace).clamp(0.0, 1.0) } else { 1.0 };
    (lam.max(0.0), v, ratio)
}

fn sensing_sinr_scaled(
    user_beams: &[DVector<Complex64>],
    jam_beam: &DVector<Complex64>,
    ch: &SlotChannel,
    w: &DVector<Complex64>,
    cfg: &ScenarioConfig,
    rho: f64,
) -> f64 {
    let w_chi = w.dotc(&ch.eve_dir);
    let si_w: DVector<Complex64> = ch.si.adjoint() * w;
    let mut num = 0.0;
    let mut den = cfg.noise_power;
    for f in user_beams.iter().chain(std::iter::once(jam_beam)) {
        num += (ch.sensing_gain * w_chi * ch.eve_dir.dotc(f)).norm_sqr() * rho * rho;
        den += si_w.dotc(f).norm_sqr() * rho * rho;
    }
    num / den
}

/// Extract rank-1 beams from covariances and pick a common scaling that
/// restores the power budget and, when attainable, the sensing threshold.
///
/// Scaling starts at `min(1, sqrt(P_max / sum lambda_max))`; if the echo
/// SINR then falls short, the factor is pushed up toward the sensing
/// boundary while staying inside the power budget, exploiting that the echo
/// SINR is strictly increasing in the common scale. When even the full
/// budget cannot reach the threshold the slot is flagged and the covariance
/// solution remains the authoritative iterate for reporting.
pub fn extract_rank1(
    covs: &SlotCovariances,
    ch: &SlotChannel,
    w: &DVector<Complex64>,
    cfg: &ScenarioConfig,
) -> ExtractedBeams {
    let mut beams: Vec<DVector<Complex64>> = Vec::with_capacity(covs.users.len() + 1);
    let mut eigen_ratios = Vec::with_capacity(covs.users.len() + 1);
    let mut power = 0.0;
    for f in covs.all() {
        let (lam, v, ratio) = principal_component(f);
        beams.push(v * Complex64::from(lam.sqrt()));
        eigen_ratios.push(ratio);
        power += lam;
    }
    let jam_raw = beams.pop().expect("jamming beam present");
    let users_raw = beams;

    let rho_power = if power > 0.0 { (cfg.p_max / power).sqrt() } else { f64::INFINITY };
    let rho_start = rho_power.min(1.0);
    let threshold = cfg.sensing_sinr_min * (1.0 - 1e-9);

    let sinr_at = |rho: f64| sensing_sinr_scaled(&users_raw, &jam_raw, ch, w, cfg, rho);

    let (rho, sensing_ok) = if sinr_at(rho_start) >= threshold {
        (rho_start, true)
    } else if !rho_power.is_finite() || sinr_at(rho_power) < threshold {
        (rho_start.min(rho_power), false)
    } else {
        // the echo SINR rises with rho: bisect to the boundary and keep the
        // feasible end
        let (mut lo, mut hi) = (rho_start, rho_power);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if sinr_at(mid) >= threshold {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (hi, true)
    };

    let sensing_sinr = sinr_at(rho);
    let scale = Complex64::from(rho);
    ExtractedBeams {
        user_beams: users_raw.into_iter().map(|f| f * scale).collect(),
        jam_beam: jam_raw * scale,
        rho,
        sensing_sinr,
        eigen_ratios,
        sensing_ok,
    }
}
