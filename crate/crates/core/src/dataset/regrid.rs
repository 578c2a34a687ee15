use crate::error::{ConfigError, Result};
use crate::grid::{Field3, GridSpec, METERS_PER_DEGREE};
use crate::lidar::SimulatedPair;

/// Interpolation stencil along one axis.
#[derive(Debug, Clone, Copy)]
struct Tap {
    lo: usize,
    hi: usize,
    frac: f64,
}

/// Stencils for target nodes `offset + i * ratio` expressed in source index units.
fn taps(n_target: usize, n_source: usize, offset: f64, ratio: f64) -> Vec<Tap> {
    (0..n_target)
        .map(|i| {
            let pos = offset + i as f64 * ratio;
            let last = (n_source - 1) as f64;
            if !(pos > 0.0) {
                Tap { lo: 0, hi: 0, frac: 0.0 }
            } else if pos >= last {
                Tap { lo: n_source - 1, hi: n_source - 1, frac: 0.0 }
            } else {
                let lo = pos.floor() as usize;
                Tap { lo, hi: lo + 1, frac: pos - lo as f64 }
            }
        })
        .collect()
}

fn overlaps(a0: f64, a1: f64, b0: f64, b1: f64) -> bool {
    a0 <= b1 && b0 <= a1
}

fn interpolate(src: &Field3, tx: &[Tap], ty: &[Tap], tz: &[Tap], target: &GridSpec) -> Field3 {
    let mut out = Field3::zeros(target);
    for (i, x) in tx.iter().enumerate() {
        for (k, z) in tz.iter().enumerate() {
            for (j, y) in ty.iter().enumerate() {
                let c = |a: usize, b: usize, c: usize| src.get(a, b, c);
                let (fx, fy, fz) = (x.frac, y.frac, z.frac);
                let v00 = c(x.lo, y.lo, z.lo) * (1.0 - fx) + c(x.hi, y.lo, z.lo) * fx;
                let v10 = c(x.lo, y.hi, z.lo) * (1.0 - fx) + c(x.hi, y.hi, z.lo) * fx;
                let v01 = c(x.lo, y.lo, z.hi) * (1.0 - fx) + c(x.hi, y.lo, z.hi) * fx;
                let v11 = c(x.lo, y.hi, z.hi) * (1.0 - fx) + c(x.hi, y.hi, z.hi) * fx;
                let v0 = v00 * (1.0 - fy) + v10 * fy;
                let v1 = v01 * (1.0 - fy) + v11 * fy;
                out.set(i, j, k, (v0 * (1.0 - fz) + v1 * fz).max(0.0));
            }
        }
    }
    out
}

/// Trilinear interpolation of `atb`, `bc` and `t2` onto `target`. Target
/// nodes outside the source span take the nearest boundary value.
pub fn regrid(pair: &SimulatedPair, target: &GridSpec) -> Result<SimulatedPair> {
    let source = &pair.grid;
    source.validate()?;
    target.validate()?;
    let (sx0, sx1, sy0, sy1, sz0, sz1) = source.extent();
    let (tx0, tx1, ty0, ty1, tz0, tz1) = target.extent();
    if !(overlaps(sx0, sx1, tx0, tx1) && overlaps(sy0, sy1, ty0, ty1) && overlaps(sz0, sz1, tz0, tz1)) {
        return Err(ConfigError::GridMismatch("source and target grids do not overlap".into()));
    }

    let ratio_h = target.d_horiz / source.d_horiz;
    let tx = taps(
        target.n_lon,
        source.n_lon,
        (target.origin_lon - source.origin_lon) * METERS_PER_DEGREE / source.d_horiz,
        ratio_h,
    );
    let ty = taps(
        target.n_lat,
        source.n_lat,
        (target.origin_lat - source.origin_lat) * METERS_PER_DEGREE / source.d_horiz,
        ratio_h,
    );
    let tz = taps(target.n_alt, source.n_alt, 0.0, target.dz() / source.dz());

    Ok(SimulatedPair {
        grid: *target,
        wavelength: pair.wavelength,
        scene_id: pair.scene_id.clone(),
        seed: pair.seed,
        atb: interpolate(&pair.atb, &tx, &ty, &tz, target),
        bc: interpolate(&pair.bc, &tx, &ty, &tz, target),
        t2: interpolate(&pair.t2, &tx, &ty, &tz, target),
    })
}
