use nalgebra::{DMatrix, DVector};

use super::*;
use crate::estimators::{transport_eig, EstimatorKind, TransportOptions};
use crate::models::{closed_form_eig, make_linear_gaussian, sample_joint, LinearGaussianModel, Model, MoessbauerModel};
use crate::numerics::mean_and_standard_error;

fn diag_model(g: &[f64], sx: &[f64], se: &[f64]) -> LinearGaussianModel {
    LinearGaussianModel::new(
        DMatrix::from_diagonal(&DVector::from_column_slice(g)),
        SymmetricMatrix::from_diagonal(sx),
        SymmetricMatrix::from_diagonal(se),
    )
    .unwrap()
}

fn identity_basis(n_x: usize, n_y: usize) -> ProjectionBasis {
    ProjectionBasis {
        method: ReductionMethod::Pca,
        u: DMatrix::identity(n_x, n_x),
        v: DMatrix::identity(n_y, n_y),
        lambda_x: DVector::from_element(n_x, 1.0),
        lambda_y: DVector::from_element(n_y, 1.0),
    }
}

fn linear_bases(model: &LinearGaussianModel) -> Vec<ProjectionBasis> {
    let pair = diagnostic_matrices(model, 1, 0).unwrap();
    let cov = model.joint_covariance().unwrap();
    ReductionMethod::ALL
        .iter()
        .map(|&m| reduction_basis(m, Some(&pair), &cov).unwrap())
        .collect()
}

#[test]
fn linear_diagnostics_are_exact() {
    let model = make_linear_gaussian(6, 4, 0.8, 2).unwrap();
    let pair = diagnostic_matrices(&model, 1000, 0).unwrap();
    assert_eq!(pair.n_mc, 1);
    // independent route through Cholesky factors instead of symmetric roots:
    // H_X̃ is similar to Σ_X GᵀΣ_E⁻¹G, so the spectra must agree
    let g = model.g();
    let se_inv = model.sigma_e().cholesky().unwrap().inverse();
    let m = model.sigma_x().as_matrix() * g.transpose() * se_inv.as_matrix() * g;
    let mut oracle: Vec<f64> = m.complex_eigenvalues().iter().map(|c| c.re).collect();
    oracle.sort_by(|a, b| b.total_cmp(a));
    let ours = pair.h_x.eigen().values;
    for (a, b) in ours.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-8 * oracle[0], "{a} vs {b}");
    }
    // the nonzero spectra of H_X̃ and H_Ỹ coincide
    let hy = pair.h_y.eigen().values;
    for k in 0..4 {
        assert!((hy[k] - ours[k]).abs() < 1e-8 * oracle[0]);
    }
}

#[test]
fn zero_forward_gives_zero_diagnostics() {
    let model = diag_model(&[0.0, 0.0], &[1.0, 2.0], &[0.5, 0.5]);
    let pair = diagnostic_matrices(&model, 1, 0).unwrap();
    assert_eq!(pair.h_x.as_matrix().amax(), 0.0);
    assert_eq!(pair.h_y.as_matrix().amax(), 0.0);
}

#[test]
fn cmi_whitened_orthonormality() {
    let model = make_linear_gaussian(12, 5, 0.8, 4).unwrap();
    let b = &linear_bases(&model)[0];
    let ux = b.u.transpose() * model.sigma_x().as_matrix() * &b.u;
    let ve = b.v.transpose() * model.sigma_e().as_matrix() * &b.v;
    assert!((ux - DMatrix::identity(12, 12)).amax() < 1e-8);
    assert!((ve - DMatrix::identity(5, 5)).amax() < 1e-8);
}

#[test]
fn diagonal_model_ranks_coordinates_by_signal_to_noise() {
    let g = [0.5, 2.0, 1.0];
    let sx = [1.0, 0.5, 3.0];
    let se = [0.1, 1.0, 0.2];
    let model = diag_model(&g, &sx, &se);
    // G_ii² Σ_X,ii / Σ_E,ii = 2.5, 2.0, 15
    let expected = [2usize, 0, 1];
    let b = &linear_bases(&model)[0];
    for (col, &coord) in expected.iter().enumerate() {
        let u = b.u.column(col);
        assert!((u[coord].abs() - 1.0 / sx[coord].sqrt()).abs() < 1e-12);
        assert!(u.iter().enumerate().all(|(i, v)| i == coord || v.abs() < 1e-12));
        assert!((b.lambda_x[col] - g[coord].powi(2) * sx[coord] / se[coord]).abs() < 1e-12);
    }
    // r = 1 keeps the top coordinate, scaled to unit prior variance
    let s = sample_joint(&model, 50, 1).unwrap();
    let p = project(&s, b, 1, 1).unwrap();
    for i in 0..50 {
        assert!((p.x()[(i, 0)].abs() - s.x()[(i, 2)].abs() / 3f64.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn pca_leading_direction() {
    let b = pca_basis(
        &SymmetricMatrix::from_diagonal(&[3.0, 1.0]),
        &SymmetricMatrix::identity(1),
    );
    assert!((b.u.column(0) - DVector::from_column_slice(&[1.0, 0.0])).amax() < 1e-14);
    assert_eq!(b.lambda_x.as_slice(), &[3.0, 1.0]);
}

#[test]
fn cca_of_identical_variables_has_unit_correlation() {
    let s = SymmetricMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])).unwrap();
    let cov = JointCovariance {
        sigma_x: s.clone(),
        sigma_y: s.clone(),
        sigma_xy: s.as_matrix().clone(),
    };
    let b = cca_basis(&cov).unwrap();
    assert!((b.lambda_x[0] - 1.0).abs() < 1e-12);
    assert!((b.lambda_y[0] - 1.0).abs() < 1e-12);
    let g = b.u.transpose() * s.as_matrix() * &b.u;
    assert!((g - DMatrix::identity(2, 2)).amax() < 1e-12);
}

#[test]
fn projection_rank_checks_and_full_rotation() {
    let model = make_linear_gaussian(4, 3, 0.8, 6).unwrap();
    let samples = sample_joint(&model, 20, 0).unwrap().with_split(5).unwrap();
    for b in linear_bases(&model) {
        assert!(project(&samples, &b, 0, 1).is_err());
        assert!(project(&samples, &b, 5, 1).is_err());
        assert!(project(&samples, &b, 1, 0).is_err());
        let p = project(&samples, &b, 2, 2).unwrap();
        assert_eq!((p.x().ncols(), p.y().ncols(), p.n_train()), (2, 2, 5));
        let (u, v) = b.truncate(4, 3).unwrap();
        let full = closed_form_eig(&model, Some(&u), Some(&v)).unwrap();
        assert!((full - model.exact_eig().unwrap()).abs() < 1e-9);
    }
}

#[test]
fn truncation_bound_limits_and_monotonicity() {
    let model = make_linear_gaussian(6, 4, 0.7, 3).unwrap();
    let pair = diagnostic_matrices(&model, 1, 0).unwrap();
    for b in linear_bases(&model) {
        assert!(truncation_bound(&pair, &b, 6, 4).unwrap().abs() < 1e-10);
        let total = pair.h_x.trace() + pair.h_y.trace();
        assert!((truncation_bound(&pair, &b, 0, 0).unwrap() - total).abs() < 1e-10 * total);
        for s in 0..=4 {
            let mut prev = f64::INFINITY;
            for r in 0..=6 {
                let t = truncation_bound(&pair, &b, r, s).unwrap();
                assert!(t <= prev + 1e-12);
                prev = t;
            }
        }
    }
}

#[test]
fn cmi_bound_is_smallest() {
    let model = make_linear_gaussian(8, 5, 0.8, 9).unwrap();
    let pair = diagnostic_matrices(&model, 1, 0).unwrap();
    let bases = linear_bases(&model);
    for r in 1..8 {
        for s in 1..5 {
            let cmi = truncation_bound(&pair, &bases[0], r, s).unwrap();
            for b in &bases[1..] {
                assert!(cmi <= truncation_bound(&pair, b, r, s).unwrap() + 1e-10);
            }
        }
    }
}

#[test]
fn gaussian_eig_exact_cases() {
    let model = make_linear_gaussian(5, 3, 0.8, 1).unwrap();
    let cov = model.joint_covariance().unwrap();
    assert!((gaussian_eig_exact(&cov, None, None).unwrap() - model.exact_eig().unwrap()).abs() < 1e-10);
    let indep = JointCovariance {
        sigma_x: cov.sigma_x.clone(),
        sigma_y: cov.sigma_y.clone(),
        sigma_xy: DMatrix::zeros(5, 3),
    };
    assert!(gaussian_eig_exact(&indep, None, None).unwrap().abs() < 1e-12);
}

#[test]
fn gaussian_eig_empirical_is_close() {
    let model = make_linear_gaussian(5, 3, 0.8, 1).unwrap();
    let truth = model.exact_eig().unwrap();
    for seed in 0..20 {
        let s = sample_joint(&model, 10_000, seed).unwrap();
        let v = gaussian_eig(s.x(), s.y()).unwrap();
        assert!((v - truth).abs() < 0.1, "seed {seed}: {v} vs {truth}");
    }
    let s = sample_joint(&model, 9, 0).unwrap();
    assert!(gaussian_eig(s.x(), s.y()).is_err());
}

#[test]
fn closed_form_orderings_on_random_models() {
    for seed in 0..5 {
        let model = make_linear_gaussian(10, 6, 0.8, seed).unwrap();
        let full = model.exact_eig().unwrap();
        let bases = linear_bases(&model);
        let val = |b: &ProjectionBasis, r, s| {
            let (u, v) = b.truncate(r, s).unwrap();
            closed_form_eig(&model, Some(&u), Some(&v)).unwrap()
        };
        for b in &bases {
            for r in 1..=10 {
                for s in 1..=6 {
                    let here = val(b, r, s);
                    assert!(here <= full + 1e-9);
                    if r > 1 {
                        assert!(here >= val(b, r - 1, s) - 1e-9);
                    }
                    if s > 1 {
                        assert!(here >= val(b, r, s - 1) - 1e-9);
                    }
                }
            }
        }
        for r in 1..=10 {
            for s in 1..=6 {
                let cmi = val(&bases[0], r, s);
                assert!(cmi >= val(&bases[1], r, s) - 1e-9, "seed {seed} PCA ({r}, {s})");
                assert!(cmi >= val(&bases[2], r, s) - 1e-9, "seed {seed} CCA ({r}, {s})");
            }
        }
    }
}

#[test]
fn full_identity_projection_matches_unprojected() {
    let model = make_linear_gaussian(3, 2, 0.8, 7).unwrap();
    let opts = TransportOptions::default();
    let basis = identity_basis(3, 2);
    for seed in 0..3 {
        let a = projected_eig_pos(&model, &basis, 3, 2, 2000, 1.0 / 3.0, seed, &opts).unwrap();
        let b = transport_eig(&model, EstimatorKind::Pos, 2000, 1.0 / 3.0, seed, &opts).unwrap();
        assert!((a.value - b.value).abs() < 1e-10, "{} vs {}", a.value, b.value);
        assert_eq!((a.m, a.n), (b.m, b.n));
    }
}

#[test]
fn projected_estimate_tracks_projected_truth() {
    let model = make_linear_gaussian(6, 4, 0.8, 2).unwrap();
    let b = &linear_bases(&model)[0];
    let opts = TransportOptions::default();
    let vals: Vec<f64> = (0..20)
        .map(|rep| {
            projected_eig_pos(&model, b, 2, 2, 20_000, 0.125, rep, &opts)
                .unwrap()
                .value
        })
        .collect();
    let (u, v) = b.truncate(2, 2).unwrap();
    let truth = closed_form_eig(&model, Some(&u), Some(&v)).unwrap();
    let (mean, se) = mean_and_standard_error(&vals);
    assert!((mean - truth).abs() < 3.0 * se, "{mean} ± {se} vs {truth}");
}

#[test]
fn moessbauer_diagnostics_are_stable() {
    let model = MoessbauerModel::default();
    let a = diagnostic_matrices(&model, 500, 1).unwrap();
    // same seed: the larger estimate extends the smaller one's draws
    let b = diagnostic_matrices(&model, 1000, 1).unwrap();
    let (ea, eb) = (a.h_x.eigen().values, b.h_x.eigen().values);
    assert!(ea.iter().all(|&l| l > -1e-10));
    for k in 0..4 {
        assert!(
            (ea[k] - eb[k]).abs() < 0.05 * eb[k],
            "eigenvalue {k}: {} vs {}",
            ea[k],
            eb[k]
        );
    }
    let (ya, yb) = (a.h_y.eigen().values, b.h_y.eigen().values);
    assert!(ya.iter().all(|&l| l > -1e-8 * ya[0]));
    for k in 0..ya.len() {
        assert!((ya[k] - yb[k]).abs() < 0.05 * yb[k], "{ya} {yb}");
    }
}

#[test]
fn grid_shares_draws_across_methods() {
    let model = make_linear_gaussian(5, 3, 0.8, 1).unwrap();
    let cfg = DimredConfig {
        methods: ReductionMethod::ALL.to_vec(),
        ranks_x: vec![1, 5],
        ranks_y: vec![3],
        replicates: 2,
        budget: 1500,
        p: 1.0 / 3.0,
        base_seed: 11,
        n_mc: 10,
        n_covariance: 100,
        transport: TransportOptions::default(),
    };
    let t = dimred_grid(&model, &cfg).unwrap();
    assert_eq!(t.rows.len(), 12);
    assert_eq!(t.n_failed(), 0);
    assert_eq!(t, dimred_grid(&model, &cfg).unwrap());
    // full rank: the projected pos estimate is invariant to the affine basis
    // change, so all three methods agree on shared draws
    let full: Vec<&DimredRow> = t.rows.iter().filter(|r| r.r == 5 && r.replicate == 0).collect();
    assert!(full.iter().all(|r| r.seed == full[0].seed));
    for r in &full[1..] {
        assert!((r.value.unwrap() - full[0].value.unwrap()).abs() < 1e-8);
    }
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with(DIMRED_CSV_HEADER));
}
