use atmos_core::dataset::{
    build_dataset, decode_archive, encode_archive, normalize, physics_mask, random_mask, slice_meridional,
    split_dataset, BuildConfig, Dataset, NormSpec, SlicePair,
};
use atmos_core::rng::CounterRng;
use atmos_core::scenegen::SceneParams;
use atmos_core::{generate_scene, simulate, two_way_transmittance, Field3, GridSpec, LidarConfig, Wavelength};
use proptest::prelude::*;
use std::collections::BTreeSet;

/// Two-way transmittance by 10x oversampled trapezoid integration of the
/// piecewise-linear extinction profile, from half a layer above level k to
/// the top of the column.
fn refined_t2(sigma: &[f64], eta: f64, dz: f64, k: usize) -> f64 {
    let n = sigma.len();
    let at = |z: f64| -> f64 {
        let pos = (z / dz).clamp(0.0, (n - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        let f = pos - lo as f64;
        sigma[lo] * (1.0 - f) + sigma[hi] * f
    };
    let z0 = (k as f64 + 0.5) * dz;
    let z1 = (n as f64 - 0.5) * dz;
    if z1 <= z0 {
        return 1.0;
    }
    let steps = ((z1 - z0) / dz * 10.0).round() as usize;
    let h = (z1 - z0) / steps as f64;
    let mut tau = 0.0;
    for s in 0..steps {
        let a = z0 + s as f64 * h;
        tau += 0.5 * h * (at(a) + at(a + h));
    }
    (-2.0 * eta * tau).exp()
}

#[test]
fn transmittance_matches_refined_quadrature() {
    let rng = CounterRng::new(17);
    for trial in 0..5u64 {
        let sigma: Vec<f64> = (0..200).map(|k| rng.fork(trial).uniform_at(k) * 2e-5).collect();
        let t2 = two_way_transmittance(&sigma, 0.7, 100.0).unwrap();
        for k in 0..200 {
            let oracle = refined_t2(&sigma, 0.7, 100.0, k);
            assert!((t2[k] - oracle).abs() / oracle < 0.01, "level {k}: {} vs {oracle}", t2[k]);
        }
    }
}

#[test]
fn slab_scene_mask_matches_analytic_crossing() {
    let g = GridSpec { n_lon: 2, n_lat: 8, n_alt: 40, alt_top: 4000.0, ..GridSpec::desk() };
    let mut v = generate_scene(1, &g, &SceneParams::empty(), Wavelength::Nm532).unwrap();
    v.sigma_mol = Field3::zeros(&g);
    let dz = g.dz();
    let layer_tau = 0.05;
    let slab = 20..30;
    for i in 0..g.n_lon {
        for j in 0..g.n_lat {
            for k in slab.clone() {
                v.sigma_cloud.set(i, j, k, layer_tau / dz);
                v.beta_cloud.set(i, j, k, layer_tau / dz / 18.0);
            }
        }
    }
    let eta = 0.7;
    let pair = simulate(&v, &LidarConfig { wavelength: Wavelength::Nm532, eta }).unwrap();
    for s in slice_meridional(&pair) {
        let mask = physics_mask(&s.t2, 0.7).unwrap();
        for k in 0..g.n_alt {
            let layers_above = slab.clone().filter(|&j| j > k).count() as f64;
            let expected = 2.0 * eta * layers_above * layer_tau > -(0.7f64).ln();
            for j in 0..g.n_lat {
                assert_eq!(mask[k * g.n_lat + j] == 1, expected, "level {k}");
            }
        }
    }
}

#[test]
fn zero_tau_pairs_have_empty_physics_masks() {
    let g = GridSpec { n_lon: 3, ..GridSpec::desk_model() };
    let v = generate_scene(4, &g, &SceneParams::default(), Wavelength::Nm355).unwrap();
    let pair = simulate(&v.without_extinction(), &LidarConfig::new(Wavelength::Nm355)).unwrap();
    for s in slice_meridional(&pair) {
        assert!(physics_mask(&s.t2, 0.7).unwrap().iter().all(|&m| m == 0));
        assert_eq!(s.atb, s.bc);
    }
}

#[test]
fn build_is_reproducible_through_archive() {
    let cfg = BuildConfig { n_scenes: 3, ..BuildConfig::desk() };
    let a = build_dataset(&cfg).unwrap();
    let (bytes_a, _) = encode_archive(&a).unwrap();
    let (bytes_b, _) = encode_archive(&build_dataset(&cfg).unwrap()).unwrap();
    assert_eq!(bytes_a, bytes_b);
    let back = decode_archive(&bytes_a).unwrap();
    assert_eq!(back.slices, a.slices);
    let train: BTreeSet<_> = back.manifest.train.iter().map(|&i| back.slices[i].scene_index).collect();
    let test: BTreeSet<_> = back.manifest.test.iter().map(|&i| back.slices[i].scene_index).collect();
    assert!(train.is_disjoint(&test));
    assert_eq!(train.len() + test.len(), 3);
}

fn arb_slice() -> impl Strategy<Value = SlicePair> {
    (1usize..6, 1usize..7, any::<u64>()).prop_map(|(rows, cols, seed)| {
        let r = CounterRng::new(seed);
        let n = rows * cols;
        SlicePair {
            rows,
            cols,
            atb: (0..n as u64).map(|i| r.uniform_at(i) as f32 * 1e-5).collect(),
            bc: (0..n as u64).map(|i| r.uniform_at(i + 1000) as f32 * 1e-5).collect(),
            t2: (0..n as u64).map(|i| r.uniform_at(i + 2000) as f32).collect(),
            mask: (0..n as u64).map(|i| (r.u64_at(i + 3000) & 1) as u8).collect(),
            wavelength: if seed % 2 == 0 { Wavelength::Nm355 } else { Wavelength::Nm532 },
            scene_id: format!("scene-{seed}"),
            scene_index: (seed % 5) as usize,
            slice_index: (seed % 11) as usize,
            norm: NormSpec::default(),
        }
    })
}

proptest! {
    #[test]
    fn archive_round_trip(slices in prop::collection::vec(arb_slice(), 0..6), seed in any::<u64>()) {
        let d = Dataset::new(slices, NormSpec::default(), seed);
        let (bytes, manifest) = encode_archive(&d).unwrap();
        let back = decode_archive(&bytes).unwrap();
        prop_assert_eq!(&back.slices, &d.slices);
        prop_assert_eq!(back.manifest, manifest);
    }

    #[test]
    fn normalization_is_monotone_and_clipped(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let s = NormSpec::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (nlo, nhi) = (normalize(lo * 1e-2, &s), normalize(hi * 1e-2, &s));
        prop_assert!(nlo <= nhi);
        prop_assert!((0.0..=1.0).contains(&nlo) && (0.0..=1.0).contains(&nhi));
    }

    #[test]
    fn random_mask_meets_coverage(rows in 4usize..40, cols in 4usize..40, coverage in 0.0f64..1.0, seed in any::<u64>()) {
        let m = random_mask(seed, rows, cols, coverage).unwrap();
        let frac = m.iter().filter(|&&v| v == 1).count() as f64 / m.len() as f64;
        prop_assert!(frac + 1e-12 >= coverage);
        prop_assert!(m.iter().all(|&v| v <= 1));
    }

    #[test]
    fn split_never_leaks_scenes(n_scenes in 2usize..12, ratio in 0.05f64..0.95, seed in any::<u64>()) {
        let slices: Vec<SlicePair> = (0..n_scenes * 2)
            .map(|i| SlicePair {
                rows: 1, cols: 1, atb: vec![0.0], bc: vec![0.0], t2: vec![1.0], mask: vec![0],
                wavelength: Wavelength::Nm532, scene_id: format!("s{}", i / 2), scene_index: i / 2,
                slice_index: i % 2, norm: NormSpec::default(),
            })
            .collect();
        let d = Dataset::new(slices, NormSpec::default(), 0);
        let m = split_dataset(&d.manifest, ratio, seed).unwrap();
        let train: BTreeSet<_> = m.train.iter().map(|&i| m.slices[i].scene_index).collect();
        let test: BTreeSet<_> = m.test.iter().map(|&i| m.slices[i].scene_index).collect();
        prop_assert!(train.is_disjoint(&test));
        prop_assert!(!train.is_empty() && !test.is_empty());
        prop_assert_eq!(m.train.len() + m.test.len(), n_scenes * 2);
        let ideal = ratio * n_scenes as f64;
        prop_assert!((train.len() as f64 - ideal).abs() <= 1.0);
    }
}
