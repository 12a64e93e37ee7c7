//! Central-difference verification for every differentiable primitive,
//! 20 random instances each at eps = 1e-5, worst relative error <= 1e-3.
//! The sweep itself lives in `motok_autodiff::verify` so the workspace
//! acceptance suite runs the identical checks.

use motok_autodiff::verify::check_all_primitives;

#[test]
fn every_primitive_matches_central_differences() {
    let results = check_all_primitives(20, 1e-5).expect("gradient check failed to run");
    assert!(results.len() == 16, "expected every primitive covered, got {}", results.len());
    for (name, err) in &results {
        assert!(*err <= 1e-3, "{name}: relative error {err} > 1e-3");
    }
}
