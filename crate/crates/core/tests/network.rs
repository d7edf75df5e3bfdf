use pia3c::loss::Composition;
use pia3c::selftest::gradient_check;

#[test]
fn gradients_match_finite_differences() {
    for composition in [Composition::A3c, Composition::PiA3c] {
        let g = gradient_check(5, composition, 60, 6).unwrap();
        let worst = g.worst().unwrap();
        assert!(g.max_relative_error() < 1e-3, "{composition:?}: {worst:?}");
    }
}
