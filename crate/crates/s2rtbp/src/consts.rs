//! Fixed geometry of the symmetric configuration in the rotating chart.

use std::f64::consts::SQRT_2;

/// Chart distance of each primary from the origin, `√2 − 1`.
pub const S: f64 = SQRT_2 - 1.0;

/// First primary (the one every polar chart is centred on).
pub const Q_M1: [f64; 2] = [-S, 0.0];
/// Second primary.
pub const Q_M2: [f64; 2] = [S, 0.0];
/// Image of the point antipodal to the first primary.
pub const QBAR_M1: [f64; 2] = [SQRT_2 + 1.0, 0.0];
/// Image of the point antipodal to the second primary.
pub const QBAR_M2: [f64; 2] = [-(SQRT_2 + 1.0), 0.0];

/// Energy of the collinear critical point at the chart origin.
pub const L1_ENERGY: f64 = -1.0;

/// Evaluations closer than this to a singular point are refused.
pub const SINGULARITY_GUARD: f64 = 1e-13;

/// Membership tolerance for the constraint manifold `|ξ| = 1, ξ·η = 0`.
pub const CONSTRAINT_TOL: f64 = 1e-12;

/// `(2 − √2)/2`, residue of the collision pole of the attracting primary.
pub const POLE_RESIDUE: f64 = (2.0 - SQRT_2) / 2.0;
