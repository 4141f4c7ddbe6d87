//! Recovery must depend on the local wave map alone: replacing the spectral
//! map by a sealed black box gives bit-identical outputs.

use dirac_lab::dirac::{assemble_dirac, ConnectionSpec, DiracBundle, SpectralResolution};
use dirac_lab::geometry::{FlatTorus, Region};
use dirac_lab::recovery::{
    blago_inner_product, fiber_basis_at_point, recover_distance, ArrivalParams, FiberBasisParams, GlobalStates,
    LocalSource, LocalWaveData, SealedWaveMap, SpectralWaveMap,
};
use dirac_lab::C64;

fn setup() -> (SpectralResolution, FlatTorus, Region) {
    let torus = FlatTorus::standard(17);
    let bundle = DiracBundle::new(torus.clone(), ConnectionSpec::constant_scalar(&[0.3, -0.1], 2)).unwrap();
    let res = assemble_dirac(&bundle, 8).unwrap().resolve().unwrap();
    let region = Region::ball(&torus, &[3.0, 3.0], 0.8).unwrap();
    (res, torus, region)
}

fn source(data: &LocalWaveData, seed: u64) -> LocalSource {
    let mut s = data.zero_source();
    let mut x = seed as f64;
    for r in 0..s.coeffs.nrows() {
        for j in 1..s.steps() {
            x = (x * 1.618_033_988_75 + 0.1).fract();
            s.coeffs[[r, j]] = C64::new(x - 0.5, 0.5 - (3.0 * x).fract());
        }
    }
    s
}

#[test]
fn blago_inner_product_is_local() {
    let (res, torus, region) = setup();
    let open = SpectralWaveMap::new(&res, region.clone());
    let sealed = SealedWaveMap::new(SpectralWaveMap::new(&res, region));
    let a = LocalWaveData::new(&open, torus.clone(), 1.0, 1.0 / 64.0).unwrap();
    let b = LocalWaveData::new(&sealed, torus, 1.0, 1.0 / 64.0).unwrap();
    let (f, g) = (source(&a, 1), source(&a, 2));
    let x = blago_inner_product(&a, &f, &g).unwrap();
    let y = blago_inner_product(&b, &f, &g).unwrap();
    assert_eq!(x.re.to_bits(), y.re.to_bits());
    assert_eq!(x.im.to_bits(), y.im.to_bits());
}

#[test]
fn distance_is_local() {
    let (res, torus, region) = setup();
    let open = SpectralWaveMap::new(&res, region.clone());
    let sealed = SealedWaveMap::new(SpectralWaveMap::new(&res, region.clone()));
    let a = LocalWaveData::new(&open, torus.clone(), 1.0, 1.0 / 128.0).unwrap();
    let b = LocalWaveData::new(&sealed, torus.clone(), 1.0, 1.0 / 128.0).unwrap();
    let x = torus.grid_point(region.indices[0]);
    let y = torus.grid_point(*region.indices.last().unwrap());
    let da = recover_distance(&a, &x, &y, 0.3, ArrivalParams::default()).unwrap();
    let db = recover_distance(&b, &x, &y, 0.3, ArrivalParams::default()).unwrap();
    assert_eq!(da.value.to_bits(), db.value.to_bits());
}

#[test]
fn fiber_frame_is_local() {
    let (res, torus, region) = setup();
    let open = SpectralWaveMap::new(&res, region.clone());
    let sealed = SealedWaveMap::new(SpectralWaveMap::new(&res, region.clone()));
    let dt = 0.05;
    let a = LocalWaveData::new(&open, torus.clone(), 1.0, dt).unwrap();
    let b = LocalWaveData::new(&sealed, torus, 1.0, dt).unwrap();
    let oracle = GlobalStates::new(&res, &region, dt, 2);
    let params = FiberBasisParams { sigma: 0.4, reach: 1.0, beta: 1e-4, half: 2 };
    let ra = fiber_basis_at_point(&a, &oracle, &[3.2, 3.0], params).unwrap();
    let rb = fiber_basis_at_point(&b, &oracle, &[3.2, 3.0], params).unwrap();
    for (ca, cb) in ra.controls.iter().zip(&rb.controls) {
        for (p, q) in ca.iter().zip(cb) {
            assert_eq!(p.re.to_bits(), q.re.to_bits());
            assert_eq!(p.im.to_bits(), q.im.to_bits());
        }
    }
}
