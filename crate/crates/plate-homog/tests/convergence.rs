//! Fine-scale eigenvalues against limit spectra. These runs take tens of seconds.

use plate_homog::fem::eig::EigOptions;
use plate_homog::fine::{compare_with_limit, fine_eigs, FineConfig, FineParity, FineProblem};
use plate_homog::geometry::{build_cell_mesh, build_cell_mesh_without_inclusion, build_macro_mesh, Edge, InclusionShape};
use plate_homog::limit::{MuScaling, ScaleLimit};
use plate_homog::spectrum::{compute_limit_spectrum, SpectralProblem, SpectrumSettings};
use plate_homog::tensor::{isotropic, MaterialSpec};

fn demo_material() -> MaterialSpec {
    MaterialSpec::new(isotropic(1.0, 1.0), isotropic(10.0, 10.0), 1.0, 2.0, 0.01).unwrap()
}

#[test]
fn slow_membrane_eigenvalues_approach_the_limit_spectrum() {
    let mat = demo_material();
    let shape = InclusionShape::disk(0.26);
    let cell3 = build_cell_mesh(&shape, 8, 3, 4).unwrap();
    let cell2 = build_cell_mesh(&shape, 8, 2, 0).unwrap();
    let mesh = build_macro_mesh(1.0, 1.0, 16, 16, &[Edge::Left]).unwrap();
    let settings = SpectrumSettings { modes: 10, truncation: 10, macro_count: 20, ..SpectrumSettings::default() };
    let problem = SpectralProblem::Membrane { delta: ScaleLimit::Finite(1.0) };
    let limit = compute_limit_spectrum(problem, &mat, &cell3, &mesh, &settings).unwrap().limit;
    let distances: Vec<Vec<f64>> = [0.5, 0.25]
        .iter()
        .map(|&eps| {
            let mut cfg = FineConfig::new(eps, 1.0, Some(MuScaling::Eps), 0);
            cfg.parity = FineParity::Membrane;
            let fp = FineProblem::new(cfg, &mat, &cell2).unwrap();
            let values = fine_eigs(&fp, 3, &EigOptions::default()).unwrap();
            compare_with_limit(&fp, &values, &limit, 0.05).rows.iter().map(|r| r.distance).collect()
        })
        .collect();
    for k in 0..3 {
        assert!(distances[1][k] < distances[0][k], "eigenvalue {k}: {distances:?}");
    }
}

/// First bending eigenvalue of a clamped homogeneous strip: fine value at thickness `h` with `n` elements per period
/// of 1/8, and the homogenized plate value.
fn strip_first_eigenvalue(h: f64, n: usize) -> (f64, f64) {
    let c = isotropic(1.0, 1.0);
    let mat = MaterialSpec::new(c, c, 1.0, 1.0, 0.01).unwrap();
    let eps = 0.125;
    let delta = h / eps;
    let mesh = build_macro_mesh(1.0, 0.25, 32, 8, &[Edge::Left]).unwrap();
    let cell3 = build_cell_mesh_without_inclusion(4, 3, 4).unwrap();
    let settings = SpectrumSettings { macro_count: 1, ..SpectrumSettings::default() };
    let limit = compute_limit_spectrum(SpectralProblem::Plate { delta }, &mat, &cell3, &mesh, &settings).unwrap();
    let mut cfg = FineConfig::new(eps, delta, None, 2);
    cfg.lengths = [1.0, 0.25];
    cfg.parity = FineParity::Bending;
    let fp = FineProblem::new(cfg, &mat, &build_cell_mesh_without_inclusion(n, 2, 0).unwrap()).unwrap();
    (fine_eigs(&fp, 1, &EigOptions::default()).unwrap()[0], limit.macro_values[0])
}

#[test]
fn slow_scaled_plate_eigenvalue_is_stable_and_converges() {
    let (thick, limit) = strip_first_eigenvalue(0.1, 16);
    let errors: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| {
            let (fine, _) = strip_first_eigenvalue(0.05, n);
            (fine - limit).abs() / limit
        })
        .collect();
    let (thin, _) = strip_first_eigenvalue(0.05, 16);
    assert!((thick - thin).abs() < 0.1 * thin, "{thick} vs {thin}");
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    assert!(errors[2] < 0.01, "{errors:?}");
}
