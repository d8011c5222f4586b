//! Scaling laws, averaging-field constructions, exponent fitting and the
//! Monte-Carlo campaigns that measure them.

mod averaging;
mod campaigns;
mod fit;
mod laws;

pub use averaging::{
    ball_indicator, dipole_bound_constant, g1_bound_statistic, g1_radial_derivative,
    g2_radial_derivative, make_g1, make_g2, sigma_average_transform, unit_ball_volume,
    AveragingField, AveragingKind,
};
pub use campaigns::{
    annulus_rms, direction_set, face_magnitude, helmholtz_campaign, helmholtz_decay_probe,
    helmholtz_probe_field, measure_average_decay, measure_corrector_growth, probe_envelope,
    sigma_average_identity_gap, HelmholtzProbe,
};
pub use fit::{fit_power_law, PowerLawFit};
pub use laws::{mu_alpha_d, mu_star, pi_star, ScalingLaw};
