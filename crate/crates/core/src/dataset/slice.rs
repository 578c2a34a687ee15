use super::{NormSpec, SlicePair};
use crate::lidar::SimulatedPair;

/// One altitude x latitude slice per longitude index, in longitude order.
/// The mask starts empty; the dataset builder fills it in.
pub fn slice_meridional(pair: &SimulatedPair) -> Vec<SlicePair> {
    let g = pair.grid;
    let to_f32 = |plane: &[f64]| plane.iter().map(|&v| v as f32).collect::<Vec<f32>>();
    (0..g.n_lon)
        .map(|i| SlicePair {
            rows: g.n_alt,
            cols: g.n_lat,
            atb: to_f32(pair.atb.meridional_plane(i)),
            bc: to_f32(pair.bc.meridional_plane(i)),
            t2: to_f32(pair.t2.meridional_plane(i)),
            mask: vec![0; g.n_alt * g.n_lat],
            wavelength: pair.wavelength,
            scene_id: pair.scene_id.clone(),
            scene_index: 0,
            slice_index: i,
            norm: NormSpec::default(),
        })
        .collect()
}

/// Stacks slices back into longitude-major `(atb, bc, t2)` volumes.
pub fn assemble_meridional(slices: &[SlicePair]) -> (Vec<f32>, Vec<f32>, Vec<f32>) {
    let mut ordered: Vec<&SlicePair> = slices.iter().collect();
    ordered.sort_by_key(|s| s.slice_index);
    let cat = |f: fn(&SlicePair) -> &Vec<f32>| ordered.iter().flat_map(|s| f(s).iter().copied()).collect::<Vec<f32>>();
    (cat(|s| &s.atb), cat(|s| &s.bc), cat(|s| &s.t2))
}
