use pme_core::field::Window;
use pme_core::inference::ObservationSet;
use pme_core::{Boundary, GridField, GridSpec};

#[test]
fn field_csv_round_trips_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    for dim in [1, 2] {
        let spec = GridSpec::new(dim, 1.5, 12, Boundary::Periodic).unwrap();
        let f = GridField::from_fn(spec, |x| (x[0] * 7.1).sin() / 3.0 + x[1].exp()).unwrap();
        let path = dir.path().join(format!("f{dim}.csv"));
        f.save_csv(&path).unwrap();
        let g = GridField::load_csv(spec, &path).unwrap();
        assert_eq!(f.values(), g.values());
    }
}

#[test]
fn field_csv_rejects_wrong_grid() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.csv");
    let spec = GridSpec::new(1, 1.0, 8, Boundary::DirichletZero).unwrap();
    GridField::zeros(spec).save_csv(&path).unwrap();
    let bigger = GridSpec::new(1, 1.0, 9, Boundary::DirichletZero).unwrap();
    let err = GridField::load_csv(bigger, &path).unwrap_err().to_string();
    assert!(err.contains("missing cell"), "{err}");
}

#[test]
fn observations_round_trip_through_file() {
    let dir = tempfile::tempdir().unwrap();
    let obs = ObservationSet::with_iid_noise(
        vec![Window::interval(-0.5, 0.0), Window::interval(0.0, 0.5)],
        vec![0.1, 0.2],
        vec![0.3, 0.1, 0.25, 0.05],
        0.01,
    )
    .unwrap();
    let path = dir.path().join("obs.json");
    std::fs::write(&path, obs.to_json().unwrap()).unwrap();
    let back = ObservationSet::load_json(&path).unwrap();
    assert_eq!(back.y(), obs.y());
    assert_eq!(back.misfit(&[0.3, 0.1, 0.25, 0.06]).unwrap(), obs.misfit(&[0.3, 0.1, 0.25, 0.06]).unwrap());
}
