//! Property tests against closed-form oracles.

use std::f64::consts::PI;

use dirac_lab::clifford::CliffordModule;
use dirac_lab::config::parse_config;
use dirac_lab::dirac::{assemble_dirac, ConnectionSpec, DiracBundle};
use dirac_lab::fractional::{fractional_dirac_apply, project_off_kernel, solve_poisson};
use dirac_lab::geometry::{FlatTorus, Region};
use dirac_lab::grid::{FourierBasis, Section};
use dirac_lab::linalg::vec_norm;
use dirac_lab::output::Table;
use dirac_lab::recovery::DistanceProfile;
use dirac_lab::wave::{hat_response, SpaceTimeSource};
use dirac_lab::C64;
use ndarray::{arr2, Array2};
use proptest::prelude::*;

fn spd() -> impl Strategy<Value = Array2<f64>> {
    (-0.5f64..0.5, -0.5f64..0.5, -0.5f64..0.5, -0.5f64..0.5).prop_map(|(a, b, c, d)| {
        let m = arr2(&[[a, b], [c, d]]);
        m.dot(&m.t()) + Array2::<f64>::eye(2)
    })
}

fn section(basis: &FourierBasis, seed: u64) -> Section {
    let mut x = (seed as f64 * 0.618_033_988_75).fract();
    Section::from_shape_fn(basis.dim(), |_| {
        x = (x * 7.3 + 0.31).fract();
        C64::new(x - 0.5, (5.0 * x).fract() - 0.5)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn clifford_relations_hold_for_any_metric(g in spd()) {
        let cm = CliffordModule::build(2, &g).unwrap();
        prop_assert!(cm.anticommutation_residual() <= 1e-12);
        prop_assert!(cm.skew_residual() <= 1e-12);
    }

    #[test]
    fn twisted_spectrum_matches_fourier_oracle(a1 in -0.49f64..0.49, a2 in -0.49f64..0.49, g in spd()) {
        let torus = FlatTorus::new(vec![2.0 * PI, 2.0 * PI], g.clone(), 9).unwrap();
        let bundle = DiracBundle::new(torus, ConnectionSpec::constant_scalar(&[a1, a2], 2)).unwrap();
        let op = assemble_dirac(&bundle, 4).unwrap();
        prop_assert!(op.hermitian_deviation() <= 1e-12);
        prop_assert!(op.chirality_anticommutator() <= 1e-12);
        let res = op.resolve().unwrap();
        prop_assert!(res.residual(&op.matrix) <= 1e-12);
        let ginv = {
            let det = g[[0, 0]] * g[[1, 1]] - g[[0, 1]] * g[[1, 0]];
            arr2(&[[g[[1, 1]] / det, -g[[0, 1]] / det], [-g[[1, 0]] / det, g[[0, 0]] / det]])
        };
        let mut oracle = Vec::new();
        for k1 in -4i64..=4 {
            for k2 in -4i64..=4 {
                let v = [k1 as f64 + a1, k2 as f64 + a2];
                let len = (v[0] * v[0] * ginv[[0, 0]] + 2.0 * v[0] * v[1] * ginv[[0, 1]] + v[1] * v[1] * ginv[[1, 1]]).sqrt();
                oracle.push(len);
                oracle.push(-len);
            }
        }
        oracle.sort_by(f64::total_cmp);
        let mut got = res.raw_eigenvalues().to_vec();
        got.sort_by(f64::total_cmp);
        for (x, y) in got.iter().zip(&oracle) {
            prop_assert!((x - y).abs() <= 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn fractional_round_trip(alpha in 0.05f64..0.95, seed in 0u64..1000) {
        let bundle = DiracBundle::trivial(11);
        let op = assemble_dirac(&bundle, 5).unwrap();
        let res = op.resolve().unwrap();
        let f = project_off_kernel(&res, &section(res.basis(), seed));
        let u = solve_poisson(&res, alpha, &f).unwrap();
        let back = fractional_dirac_apply(&res, alpha, &u).unwrap();
        prop_assert!(vec_norm(&(&back - &f)) <= 1e-9 * vec_norm(&f));
    }

    #[test]
    fn hat_response_is_odd_symmetric_in_lambda(lam in 0.0f64..20.0, tau in -0.2f64..3.0, h in 0.01f64..0.5) {
        prop_assert_eq!(hat_response(lam, tau, h), hat_response(-lam, tau, h));
        if tau + h <= 0.0 {
            prop_assert_eq!(hat_response(lam, tau, h), 0.0);
        }
    }

    #[test]
    fn source_csv_round_trips(seed in 0u64..1000, steps in 2usize..6) {
        let torus = FlatTorus::standard(9);
        let basis = FourierBasis::new(&torus, 4, 2).unwrap();
        let f = section(&basis, seed);
        let src = SpaceTimeSource::separable(0.1, steps, |t| t * t, &f).unwrap();
        let mut bytes = Vec::new();
        src.write_csv(&basis, &mut bytes).unwrap();
        let back = SpaceTimeSource::read_csv(&basis, 0.1, steps, bytes.as_slice()).unwrap();
        for (a, b) in src.values.iter().zip(&back.values) {
            prop_assert!(vec_norm(&(a - b)) <= 1e-15 * vec_norm(a).max(1.0));
        }
    }

    #[test]
    fn table_csv_round_trips(cells in proptest::collection::vec("[ -~\\n\"]{0,12}", 1..6)) {
        let cols: Vec<String> = (0..cells.len()).map(|i| format!("c{i}")).collect();
        let col_refs: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
        let mut t = Table::new("t", &col_refs);
        t.push(cells.clone());
        let text = t.to_csv_string().unwrap();
        let mut rd = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let rec = rd.records().next().unwrap().unwrap();
        let got: Vec<String> = rec.iter().map(|s| s.to_string()).collect();
        prop_assert_eq!(got, cells);
    }

    #[test]
    fn config_values_round_trip(k in 2usize..40, alpha in 0.01f64..0.99, seed in 0u64..u32::MAX as u64) {
        let text = format!("seed = {seed}\n[dirac]\ncutoff = {k}\n[fractional]\nalpha = {alpha:?}\n");
        let cfg = parse_config(&text, true).unwrap().config;
        prop_assert_eq!(cfg.cutoff, k);
        prop_assert_eq!(cfg.alpha, alpha);
        prop_assert_eq!(cfg.seed, seed);
    }

    #[test]
    fn distance_profiles_are_lipschitz(x in 0.0f64..6.28, y in 0.0f64..6.28) {
        let torus = FlatTorus::standard(17);
        let region = Region::ball(&torus, &[3.0, 3.0], 1.2).unwrap();
        let prof = DistanceProfile::from_geometry(&torus, vec![vec![x, y]], &region);
        prop_assert!(prof.lipschitz_violation(&torus, 1e-12) <= 0.0);
    }
}
