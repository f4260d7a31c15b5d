//! Generator spectra and concentration, file round trips, standardization.

use nalgebra::DMatrix;
use newst::data::{
    column_moments, generate_spiked, load_dataset, read_metadata, save_dataset, standardize, DatasetMetadata,
    LoadOptions, SpikedModelSpec,
};
use newst::{linalg, CumulantFamily};

#[test]
fn constructed_covariance_has_the_declared_spectrum() {
    for seed in 0..5 {
        let mut spec = SpikedModelSpec::new(4, 40, 4, CumulantFamily::Logistic, seed);
        spec.sigma2 = 0.7;
        let sample = generate_spiked(&spec).unwrap();
        let m = &sample.basis;
        assert!((m.tr_mul(m) - DMatrix::identity(40, 40)).amax() < 1e-10);
        let eig = linalg::sym_eigenvalues_desc(&sample.covariance());
        for (a, b) in eig.iter().zip(spec.eigenvalues()) {
            assert!((a - b).abs() < 1e-10 * eig[0], "{a} vs {b}");
        }
    }
}

#[test]
fn empirical_covariance_concentrates() {
    let (n, p) = (20_000, 30);
    for seed in 0..20 {
        let sample = generate_spiked(&SpikedModelSpec::new(n, p, 3, CumulantFamily::LeastSquares, seed)).unwrap();
        let x = sample.dataset.x();
        let sigma = sample.covariance();
        let err = linalg::sym_spectral_norm(&linalg::symmetrize(x.tr_mul(x) / n as f64 - &sigma));
        let bound = 3.0 * (p as f64 / n as f64).sqrt() * sample.eigenvalues[0];
        assert!(err < bound, "seed {seed}: {err} >= {bound}");
    }
}

#[test]
fn isotropic_model_at_a_million_rows() {
    let mut spec = SpikedModelSpec::new(1_000_000, 10, 0, CumulantFamily::LeastSquares, 42);
    spec.theta.clear();
    let x = generate_spiked(&spec).unwrap().dataset.into_parts().0;
    let err = linalg::sym_spectral_norm(&linalg::symmetrize(x.tr_mul(&x) / 1e6 - DMatrix::identity(10, 10)));
    assert!(err < 0.02, "{err}");
}

#[test]
fn saved_dataset_reloads_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SpikedModelSpec::new(300, 7, 2, CumulantFamily::Logistic, 3);
    let data = generate_spiked(&spec).unwrap().dataset;
    let path = dir.path().join("spiked.csv");
    let meta = DatasetMetadata {
        family: Some(CumulantFamily::Logistic),
        generator: Some(spec.clone()),
        seed: Some(spec.seed),
        ..DatasetMetadata::for_dataset(&data)
    };
    let meta_path = save_dataset(&data, &path, &meta).unwrap();
    let back = load_dataset(&path, &LoadOptions::for_family(CumulantFamily::Logistic)).unwrap();
    assert_eq!(back.x(), data.x());
    assert_eq!(back.y(), data.y());
    assert_eq!(back.feature_names(), data.feature_names());
    assert_eq!(read_metadata(meta_path).unwrap(), meta);
}

#[test]
fn standardized_moments_and_idempotence() {
    let data = generate_spiked(&SpikedModelSpec::new(1000, 12, 2, CumulantFamily::LeastSquares, 8)).unwrap().dataset;
    let once = standardize(&data).unwrap();
    let (mean, sd) = column_moments(&once.dataset);
    assert!(mean.amax() < 1e-12);
    assert!(sd.iter().all(|s| (s - 1.0).abs() <= 1e-9));
    let twice = standardize(&once.dataset).unwrap();
    assert!((twice.dataset.x() - once.dataset.x()).amax() < 1e-12);
    let reapplied = once.transform.apply(&data).unwrap();
    assert_eq!(reapplied.x(), once.dataset.x());
}

#[test]
fn malformed_file_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "a,b,y\n1,2,0\n3,4,1\n5,oops,1\n").unwrap();
    let err = load_dataset(&path, &LoadOptions::default()).unwrap_err().to_string();
    assert!(err.contains('4'), "{err}");
}
