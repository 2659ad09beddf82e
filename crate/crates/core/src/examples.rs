//! Small reference plants with known security indices.

use nalgebra::DMatrix;

use crate::model::Realization;

fn vandermonde_sensors(diag: [f64; 3]) -> Realization<f64> {
    Realization::new(
        DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&diag)),
        DMatrix::zeros(3, 0),
        DMatrix::zeros(3, 3),
        DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 1.0, 1.0, 2.0, 4.0, 1.0, 3.0, 9.0]),
        DMatrix::zeros(3, 0),
        DMatrix::identity(3, 3),
    )
    .expect("conformant example")
}

/// Three sensors, each of which observes the whole state on its own, all of
/// them attackable: `A = diag(2, 3, 4)`, Vandermonde `C`, `Da = I`, no
/// disturbances. Every channel has index 3.
pub fn redundant_sensors() -> Realization<f64> {
    vandermonde_sensors([2.0, 3.0, 4.0])
}

/// [`redundant_sensors`] with the Schur state matrix `diag(0.2, 0.3, 0.4)`;
/// no persistent undetectable attack exists.
pub fn redundant_sensors_schur() -> Realization<f64> {
    vandermonde_sensors([0.2, 0.3, 0.4])
}

/// Scalar integrator-free plant `A = 0, C = 1` with one disturbance entering
/// the state, one actuator attack duplicating the disturbance column and one
/// sensor attack. Both channels have index 1.
pub fn masked_channels() -> Realization<f64> {
    Realization::new(
        DMatrix::zeros(1, 1),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::zeros(1, 1),
        DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
    )
    .expect("conformant example")
}
