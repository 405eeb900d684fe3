//! Problem fixtures shared by the benchmarks.

use std::sync::Arc;

use vekua_core::{make_grid, CoefficientField, Domain, Grid, GridField, PeriodicProfile, PointInput, ProblemSpec, RingSpec, C64};

/// Unit disc with one singular point at the origin and a smooth `B`.
pub fn disc_problem() -> ProblemSpec {
    ProblemSpec::new(
        Domain::disc(C64::new(0.0, 0.0), 1.0).expect("valid disc"),
        vec![PointInput::at(C64::new(0.0, 0.0)).delta(0.3)],
        CoefficientField::zero(),
        CoefficientField::function(|z| C64::new(0.5, 0.0) + 0.3 * z),
        CoefficientField::function(|z| z * z.conj()),
        1,
    )
    .expect("valid problem")
}

pub fn grid_for(spec: &ProblemSpec, n: usize) -> Arc<Grid> {
    Arc::new(make_grid(&spec.domain, n, &spec.locations(), Some(RingSpec::default())).expect("valid grid"))
}

pub fn gaussian(grid: &Arc<Grid>) -> GridField {
    GridField::from_fn(grid, |z| C64::new((-z.norm_sqr()).exp(), 0.0))
}

/// Constant model profile `Q ≡ c`.
pub fn constant_profile(c: f64) -> PeriodicProfile {
    PeriodicProfile::constant(C64::new(c, 0.0))
}
