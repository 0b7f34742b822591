use ptbd::experiment::{run_one, Init};
use ptbd::io::{load_matrix, load_tensor, save_any, save_matrix, save_tensor, AnyTensor};
use ptbd::report::RunSummary;
use ptbd_core::random::NormalRng;
use ptbd_core::{Complex64, Field, Matrix, Method, ProblemSpec, SolverConfig, Tensor};

#[test]
fn tensors_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = NormalRng::seed_from(1);
    let real: Tensor<f64> = rng.tensor(&[5, 4, 3, 2]);
    let complex: Tensor<Complex64> = rng.tensor(&[3, 3, 2]);
    save_tensor(dir.path().join("r.dten"), &real).unwrap();
    save_any(dir.path().join("c.dten"), &AnyTensor::from(complex.clone())).unwrap();
    assert_eq!(load_tensor(dir.path().join("r.dten")).unwrap(), AnyTensor::Real(real));
    let back = load_tensor(dir.path().join("c.dten")).unwrap();
    assert_eq!(back.field(), Field::Complex);
    assert_eq!(back, AnyTensor::Complex(complex));
}

#[test]
fn matrices_round_trip_and_reject_higher_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = NormalRng::seed_from(2);
    let m: Matrix<Complex64> = rng.matrix(4, 3);
    save_matrix(dir.path().join("m.dten"), &m).unwrap();
    assert_eq!(load_matrix::<Complex64>(dir.path().join("m.dten")).unwrap(), m);
    assert!(load_matrix::<f64>(dir.path().join("m.dten")).is_err());
    let t: Tensor<f64> = rng.tensor(&[2, 2, 2]);
    save_tensor(dir.path().join("t.dten"), &t).unwrap();
    assert!(load_matrix::<f64>(dir.path().join("t.dten")).is_err());
}

#[test]
fn summaries_round_trip_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ProblemSpec {
        dims: vec![9, 8, 7],
        partition: "2,1x1,2x2,2".parse().unwrap(),
        eta: 2f64.powi(-5),
        field: Field::Complex,
        seed: 3,
    };
    let run = run_one(&spec, Method::AccNpdo, &SolverConfig::default(), Init::Random);
    assert!(run.summary.error.is_none());
    let path = dir.path().join("s.json");
    run.summary.save(&path).unwrap();
    let back = RunSummary::load(&path).unwrap();
    assert_eq!(back, run.summary);
    let failed = RunSummary::failed(Method::Npdo, None, &SolverConfig::default(), "boom".into());
    failed.save(&path).unwrap();
    assert_eq!(RunSummary::load(&path).unwrap(), failed);
}
