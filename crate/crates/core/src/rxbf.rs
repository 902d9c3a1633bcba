//! Closed-form receive filter maximizing the sensing SINR at one slot for
//! fixed transmit beams.
//!
//! The sensing SINR is a generalized Rayleigh quotient with a rank-1
//! numerator, so the maximizer is `w ∝ A^{-1} chi_E` with
//! `A = H_SI (sum_i f_i f_i^H + f_E f_E^H) H_SI^H + sigma_n^2 I`. `A` is
//! Hermitian positive definite whenever the noise power is positive, so the
//! solve goes through a Cholesky factorization rather than an explicit
//! inverse.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RxFilterError {
    #[error("degenerate direction: transmit beams have no projection onto the eavesdropper channel")]
    DegenerateDirection,
    #[error("interference-plus-noise matrix is not positive definite")]
    NotPositiveDefinite,
}

/// Optimal unit-norm receive filter for one slot.
///
/// `user_beams`/`jam_beam` are the transmit vectors, `eve_dir` the channel
/// direction toward the eavesdropper, `si` the self-interference matrix.
/// Fails with [`RxFilterError::DegenerateDirection`] when
/// `chi_E^H (sum_i f_i + f_E) = 0`; callers fall back to `w = chi_E`, which
/// is optimal there because the sensing SINR vanishes for every filter.
pub fn optimal_rx_filter(
    user_beams: &[DVector<Complex64>],
    jam_beam: &DVector<Complex64>,
    eve_dir: &DVector<Complex64>,
    si: &DMatrix<Complex64>,
    noise_power: f64,
) -> Result<DVector<Complex64>, RxFilterError> {
    let beam_sum: DVector<Complex64> =
        user_beams.iter().fold(jam_beam.clone(), |acc, f| acc + f);
    let proj = eve_dir.dotc(&beam_sum);
    let scale = eve_dir.norm() * beam_sum.norm();
    if proj.norm() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(RxFilterError::DegenerateDirection);
    }

    let m = eve_dir.len();
    let mut a = DMatrix::<Complex64>::identity(m, m) * Complex64::from(noise_power);
    for f in user_beams.iter().chain(std::iter::once(jam_beam)) {
        let sf: DVector<Complex64> = si * f;
        // A += (H_SI f)(H_SI f)^H
        a.gerc(Complex64::new(1.0, 0.0), &sf, &sf, Complex64::new(1.0, 0.0));
    }
    // direction A^{-1} chi_E chi_E^H (sum f) = (chi_E^H sum f) * A^{-1} chi_E
    let rhs = eve_dir * proj;
    let chol = Cholesky::new(a).ok_or(RxFilterError::NotPositiveDefinite)?;
    let w = chol.solve(&rhs);
    let norm = w.norm();
    Ok(w / Complex64::from(norm))
}

/// [`optimal_rx_filter`] with the degenerate-direction fallback `w = chi_E`
/// applied (any unit filter is optimal when the projection vanishes).
pub fn rx_filter_or_matched(
    user_beams: &[DVector<Complex64>],
    jam_beam: &DVector<Complex64>,
    eve_dir: &DVector<Complex64>,
    si: &DMatrix<Complex64>,
    noise_power: f64,
) -> DVector<Complex64> {
    match optimal_rx_filter(user_beams, jam_beam, eve_dir, si, noise_power) {
        Ok(w) => w,
        Err(_) => {
            let n = eve_dir.norm();
            eve_dir / Complex64::from(n)
        }
    }
}
