//! The torus test function built from a harmonic window as the torus grows.

use interlace::lattice::{BoxEmbedding, BoxRegion, Point, PointSet, TorusGeometry};
use interlace::potential::{BoxDomain, HittingProbabilities};
use interlace::variational::{build_test_function, expected_hitting_exact, torus_dirichlet_value, ScalarField};

/// Watson's integral, `G(0,0)` on `Z^3`.
const WATSON_G00: f64 = 1.516_386_059_151_978;

fn harmonic_window(r: usize) -> ScalarField {
    let k = PointSet::lattice(3, [Point::origin(3)]).unwrap();
    let phi = HittingProbabilities::solve(&k, &BoxDomain::centered(3, r)).unwrap();
    let region = BoxRegion::cube(&Point::origin(3), r);
    let values = (0..region.len()).map(|i| phi.value(&region.point(i))).collect();
    ScalarField::lattice(region, values).unwrap()
}

#[test]
fn dirichlet_value_decreases_towards_capacity() {
    let cap = 1.0 / WATSON_G00;
    let mut previous = f64::INFINITY;
    for n in [8usize, 16, 32] {
        let geom = TorusGeometry::new(n, 3).unwrap();
        let emb = BoxEmbedding::new(geom, Point::origin(3)).unwrap();
        let center = Point::splat(3, n as i64 / 2);
        let f = build_test_function(&[harmonic_window(n / 2 - 2)], &[center.clone()], &emb).unwrap();
        let b = PointSet::torus(&geom, [center]).unwrap();
        let value = torus_dirichlet_value(&f.field, &b).unwrap();
        let rate = geom.volume() as f64 / expected_hitting_exact(&b, &geom).unwrap();
        assert!((value - f.closed_form_energy()).abs() < 1e-9 * value, "N={n}");
        assert!(rate <= value + 1e-9, "N={n}: {rate} > {value}");
        assert!(value < previous, "N={n}");
        assert!(value > cap);
        previous = value;
    }
    assert!(previous - cap < 0.03, "{previous}");
}
